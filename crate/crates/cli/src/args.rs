//! Command-line flags and their resolution into a [`RunConfig`].

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use liftbreg::bregman::Mode;
use liftbreg::imageio::Manifest;
use liftbreg::{Error, Result, SolverConfig, TvKind};

#[derive(Parser, Debug)]
#[command(name = "liftbreg", version, about = "Lifted Bregman iterations for variational imaging")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Classical vs lifted Bregman iteration for ROF denoising.
    Rof(CommonArgs),
    /// Lifted Bregman iteration on a generated stereo scene.
    StereoToy(CommonArgs),
    /// Lifted Bregman iteration on a stereo pair of PGM files.
    StereoFile(CommonArgs),
    /// Oracle-backed invariant checks.
    Selftest(SelftestArgs),
    /// Prints grid-prox oracle values for seeded random instances.
    #[command(hide = true)]
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Reg {
    Iso,
    Aniso,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Synthetic {
    Squares,
}

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Number of labels L.
    #[arg(long)]
    pub labels: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma_max: Option<f64>,
    /// Samples per label interval M.
    #[arg(long)]
    pub subsamples: Option<usize>,
    #[arg(long, value_enum)]
    pub reg: Option<Reg>,
    #[arg(long, value_enum)]
    pub transform: Option<Switch>,
    /// Number of Bregman steps.
    #[arg(short = 'K', long = "steps")]
    pub steps: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub in2: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated subset of classical,untransformed,transformed.
    #[arg(long)]
    pub modes: Option<String>,
    #[arg(long)]
    pub profile_row: Option<usize>,
    #[arg(long, value_enum)]
    pub synthetic: Option<Synthetic>,
    /// Side length of generated images.
    #[arg(long)]
    pub size: Option<usize>,
    /// Noise amplitude of the synthetic squares image.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Disparity of the shapes in the toy stereo scene.
    #[arg(long)]
    pub shift: Option<usize>,
    /// Truncation threshold of the stereo costs.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub patch_radius: Option<usize>,
    /// Record wall-clock times in the metrics (breaks byte-determinism).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SelftestArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Scales the projection radii used by the projection check.
    #[arg(long, hide = true)]
    pub corrupt_radius: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub grid_step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Rof,
    StereoToy,
    StereoFile,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Rof => "rof",
            Experiment::StereoToy => "stereo-toy",
            Experiment::StereoFile => "stereo-file",
        }
    }
}

/// Every effective setting of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub lambda: f64,
    pub labels: usize,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub subsamples: usize,
    pub reg: TvKind,
    pub transform: bool,
    pub steps: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub input: Option<PathBuf>,
    pub input2: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub modes: Vec<Mode>,
    pub profile_row: Option<usize>,
    pub synthetic: bool,
    pub size: usize,
    pub noise: f64,
    pub shift: usize,
    pub threshold: f64,
    pub patch_radius: usize,
    pub timings: bool,
}

pub const DEFAULT_SEED: u64 = 1;
pub const TOY_THRESHOLD: f64 = 0.025;
pub const FILE_THRESHOLD: f64 = 0.1;

fn parse_modes(s: &str) -> Result<Vec<Mode>> {
    let mut modes = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let m: Mode = part.parse()?;
        if !modes.contains(&m) {
            modes.push(m);
        }
    }
    if modes.is_empty() {
        return Err(Error::Usage("--modes needs at least one mode".into()));
    }
    Ok(modes)
}

impl RunConfig {
    pub fn resolve(experiment: Experiment, a: &CommonArgs) -> Result<Self> {
        use Experiment::*;
        let reg = match a.reg {
            Some(Reg::Iso) => TvKind::Isotropic,
            Some(Reg::Aniso) => TvKind::Anisotropic,
            None if experiment == Rof => TvKind::Anisotropic,
            None => TvKind::Isotropic,
        };
        let iso = reg == TvKind::Isotropic;
        let transform = a.transform != Some(Switch::Off);
        let shift = a.shift.unwrap_or(4);
        let (lambda, labels, gmax, m, steps, threshold) = match experiment {
            Rof => (20.0, 4, 1.0, liftbreg::dataterm::DEFAULT_SUBSAMPLES_SMOOTH, 5, 0.0),
            StereoToy => (
                if iso { 14.0 } else { 7.0 },
                5,
                2.0 * shift as f64,
                liftbreg::dataterm::DEFAULT_SUBSAMPLES_STEREO,
                if iso { 10 } else { 6 },
                TOY_THRESHOLD,
            ),
            StereoFile => (1.0, 5, 8.0, liftbreg::dataterm::DEFAULT_SUBSAMPLES_STEREO, 5, FILE_THRESHOLD),
        };
        let lifted = if transform { Mode::Transformed } else { Mode::Untransformed };
        let modes = match (&a.modes, experiment) {
            (Some(s), _) => parse_modes(s)?,
            (None, Rof) => vec![Mode::Classical, lifted],
            (None, _) => vec![lifted],
        };
        if experiment != Rof && modes.contains(&Mode::Classical) {
            return Err(Error::Usage("the classical mode exists only for rof".into()));
        }
        let synthetic = match experiment {
            Rof => a.synthetic.is_some() || a.input.is_none(),
            StereoToy => true,
            StereoFile => false,
        };
        let cfg = RunConfig {
            experiment,
            lambda: a.lambda.unwrap_or(lambda),
            labels: a.labels.unwrap_or(labels),
            gamma_min: a.gamma_min.unwrap_or(0.0),
            gamma_max: a.gamma_max.unwrap_or(gmax),
            subsamples: a.subsamples.unwrap_or(m),
            reg,
            transform,
            steps: a.steps.unwrap_or(steps),
            tol: a.tol.unwrap_or(1e-7),
            max_iters: a.max_iters.unwrap_or(20_000),
            input: a.input.clone(),
            input2: a.in2.clone(),
            out: a.out.clone(),
            seed: a.seed.unwrap_or(DEFAULT_SEED),
            modes,
            profile_row: a.profile_row,
            synthetic,
            size: a.size.unwrap_or(if experiment == Rof { 32 } else { 64 }),
            noise: a.noise.unwrap_or(liftbreg::problems::SQUARES_NOISE),
            shift,
            threshold: a.threshold.unwrap_or(threshold),
            patch_radius: a.patch_radius.unwrap_or(1),
            timings: a.timings,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Usage(m));
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("--lambda must be positive, got {}", self.lambda));
        }
        if self.labels < 2 {
            return bad(format!("--labels must be at least 2, got {}", self.labels));
        }
        if !(self.gamma_max > self.gamma_min) {
            return bad("--gamma-max must exceed --gamma-min".into());
        }
        if self.subsamples == 0 || self.steps == 0 || self.max_iters == 0 {
            return bad("--subsamples, -K and --max-iters must be positive".into());
        }
        if !(self.tol > 0.0) {
            return bad("--tol must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad("--noise must lie in [0, 1]".into());
        }
        if self.experiment != Experiment::Rof && !(self.threshold > 0.0) {
            return bad("--threshold must be positive".into());
        }
        if self.experiment == Experiment::StereoFile && (self.input.is_none() || self.input2.is_none()) {
            return bad("stereo-file needs --in and --in2".into());
        }
        Ok(())
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            tol: self.tol,
            max_iters: self.max_iters,
            ..SolverConfig::default()
        }
    }

    pub fn manifest(&self) -> Manifest {
        let mut m = Manifest::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        m.set("command", self.experiment.name());
        m.set("lambda", self.lambda);
        m.set("labels", self.labels);
        m.set("gamma_min", self.gamma_min);
        m.set("gamma_max", self.gamma_max);
        m.set("subsamples", self.subsamples);
        m.set("reg", if self.reg == TvKind::Isotropic { "iso" } else { "aniso" });
        m.set("transform", if self.transform { "on" } else { "off" });
        m.set("steps", self.steps);
        m.set("tol", self.tol);
        m.set("max_iters", self.max_iters);
        m.set("in", path(&self.input));
        m.set("in2", path(&self.input2));
        m.set("seed", self.seed);
        m.set("modes", self.modes.iter().map(|m| m.name()).collect::<Vec<_>>().join(","));
        m.set("profile_row", self.profile_row.map(|r| r.to_string()).unwrap_or_default());
        let source = match self.experiment {
            Experiment::Rof if self.synthetic => "squares",
            Experiment::StereoToy if self.reg == TvKind::Isotropic => "discs",
            Experiment::StereoToy => "squares",
            _ => "",
        };
        m.set("synthetic", source);
        m.set("size", self.size);
        m.set("noise", self.noise);
        m.set("shift", self.shift);
        m.set("threshold", self.threshold);
        m.set("patch_radius", self.patch_radius);
        m.set("timings", self.timings);
        let s = self.solver();
        m.set("solver_sigma", s.sigma);
        m.set("solver_tau", s.tau);
        m.set("solver_check_every", s.check_every);
        // depth maps are written as (value - gamma_min) / (gamma_max - gamma_min)
        m.set("depth_scale", format!("{},{}", self.gamma_min, self.gamma_max));
        m
    }
}
