//! Experiment runner for lifted and classical Bregman iterations.

pub mod args;
pub mod commands;
pub mod selftest;

use std::io::Write;

use liftbreg::oracle::{prox_oracle, EnvelopeOracle};
use liftbreg::{Error, Result};
use rand::{Rng, SeedableRng};

use args::{Cli, Command, Experiment, OracleArgs, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

pub fn exit_code(e: &Error) -> i32 {
    if e.is_solver_failure() {
        EXIT_SOLVER
    } else {
        EXIT_CONFIG
    }
}

fn summary(out: &mut impl Write, cfg: &RunConfig, run: &commands::RunOutcome) -> std::io::Result<()> {
    for (mode, states) in &run.runs {
        let last = states.last().expect("at least one step");
        writeln!(
            out,
            "{}: {} steps, final data {:.6e}, tv {:.6e}, {} non-integral pixels",
            mode.name(),
            states.len(),
            last.energies.data,
            last.energies.tv,
            last.nonintegral_count
        )?;
    }
    if let Some(dir) = &cfg.out {
        writeln!(out, "wrote {}", dir.display())?;
    }
    Ok(())
}

fn oracle_dump(a: &OracleArgs, out: &mut impl Write) -> Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.seed);
    let _ = writeln!(out, "instance,l,tau,z,u");
    for n in 0..a.count {
        let l = 1 + n % 2;
        let labels: Vec<f64> = (0..=l).map(|i| i as f64 / l as f64).collect();
        let rho = selftest::RandomPl::new(&mut rng, 0.0, 1.0, 5);
        let oracle = EnvelopeOracle::from_samples(&labels, 3, |t| rho.eval(t))?;
        let z: Vec<f64> = (0..l).map(|_| rng.gen_range(-0.5..1.5)).collect();
        let tau: f64 = rng.gen_range(0.05..2.0);
        let u = prox_oracle(&oracle, &z, tau, a.grid_step)?;
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "{n},{l},{tau:.6},{},{}", join(&z), join(&u));
    }
    Ok(())
}

/// Runs a parsed command line; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = match &cli.command {
        Command::Rof(a) => RunConfig::resolve(Experiment::Rof, a)
            .and_then(|cfg| commands::cmd_rof(&cfg).map(|r| (cfg, r)))
            .map(|(cfg, r)| {
                let _ = summary(&mut out, &cfg, &r);
                EXIT_OK
            }),
        Command::StereoToy(a) => RunConfig::resolve(Experiment::StereoToy, a)
            .and_then(|cfg| commands::cmd_stereo_toy(&cfg).map(|r| (cfg, r)))
            .map(|(cfg, r)| {
                let _ = summary(&mut out, &cfg, &r.run);
                for (i, k) in r.detection.iter().enumerate() {
                    let k = k.map(|k| k.to_string()).unwrap_or_else(|| "-".into());
                    let _ = writeln!(out, "shape {i} (size {}): first detected at k = {k}", r.scene.shapes[i].size);
                }
                EXIT_OK
            }),
        Command::StereoFile(a) => RunConfig::resolve(Experiment::StereoFile, a)
            .and_then(|cfg| commands::cmd_stereo_file(&cfg).map(|r| (cfg, r)))
            .map(|(cfg, r)| {
                let _ = summary(&mut out, &cfg, &r);
                EXIT_OK
            }),
        Command::Selftest(a) => {
            let results = selftest::run_all(a.seed.unwrap_or(args::DEFAULT_SEED), a.corrupt_radius.unwrap_or(1.0));
            let _ = write!(out, "{}", selftest::format_table(&results));
            Ok(if results.iter().all(|r| r.passed) { EXIT_OK } else { 1 })
        }
        Command::Oracle(a) => oracle_dump(a, &mut out).map(|_| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
