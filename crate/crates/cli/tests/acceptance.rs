//! Acceptance criteria A1-A8. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::path::Path;
use std::time::Instant;

use liftbreg::bregman::{transform_subgradient, Mode};
use liftbreg::oracle::{adjoint_gap, exhaustive_min, prox_oracle, EnvelopeOracle, TinyInstance};
use liftbreg::regularizer::{div_adjoint, grad, lifted_tv, project_k, scalar_tv};
use liftbreg::solver::solve_lifted;
use liftbreg::{
    BregmanProblem, ConstraintSet, CostSampler, DualField, Field, LabelSpace, LiftedDataTerm, PixelGrid,
    SolverConfig, TvKind,
};
use liftbreg_cli::args::{CommonArgs, Experiment, Reg, RunConfig, Switch};
use liftbreg_cli::commands::{cmd_rof, cmd_stereo_toy, max_abs_diff, mean_abs_diff, rof_input, RunOutcome};
use liftbreg_cli::selftest::RandomPl;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn rof_args(transform: Switch) -> CommonArgs {
    CommonArgs {
        synthetic: Some(liftbreg_cli::args::Synthetic::Squares),
        lambda: Some(20.0),
        labels: Some(4),
        subsamples: Some(64),
        reg: Some(Reg::Aniso),
        transform: Some(transform),
        steps: Some(5),
        tol: Some(1e-7),
        max_iters: Some(20_000),
        ..CommonArgs::default()
    }
}

fn rof_run(transform: Switch, out: Option<&Path>) -> RunOutcome {
    let mut a = rof_args(transform);
    a.out = out.map(Path::to_path_buf);
    let cfg = RunConfig::resolve(Experiment::Rof, &a).unwrap();
    cmd_rof(&cfg).unwrap()
}

fn deviations(run: &RunOutcome, mode: Mode, diff: fn(&Field, &Field) -> f64) -> Vec<f64> {
    let c = run.states(Mode::Classical).unwrap();
    let l = run.states(mode).unwrap();
    c.iter().zip(l).map(|(a, b)| diff(&a.u_scalar, &b.u_scalar)).collect()
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn a1(on: &RunOutcome) -> Verdict {
    let d = deviations(on, Mode::Transformed, max_abs_diff);
    let worst = d.iter().cloned().fold(0.0, f64::max);
    verdict(worst <= 2e-2, format!("max |lifted - classical| per k = [{}], worst {worst:.3e} (tol 2e-2)", sci(&d)))
}

fn a2(on: &RunOutcome, off: &RunOutcome) -> Verdict {
    let t = deviations(on, Mode::Transformed, mean_abs_diff)[2];
    let u = deviations(off, Mode::Untransformed, mean_abs_diff)[2];
    verdict(
        u >= 2.0 * t,
        format!("mean deviation at k=3: untransformed {u:.3e}, transformed {t:.3e}, ratio {:.2} (need >= 2)", u / t),
    )
}

fn random_labels(rng: &mut ChaCha8Rng, l: usize) -> Vec<f64> {
    let mut labels = vec![0.0];
    for _ in 0..l {
        labels.push(labels.last().unwrap() + rng.gen_range(0.1..1.0));
    }
    labels
}

fn box_point(rng: &mut ChaCha8Rng, l: usize) -> Vec<f64> {
    let mut u: Vec<f64> = (0..l).map(|_| rng.gen_range(0.0..1.0)).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    u
}

fn a3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let labels = random_labels(&mut rng, 3);
        let top = labels[3];
        let rho = RandomPl::new(&mut rng, 0.0, top, 6);
        let p: f64 = rng.gen_range(-1.0..1.0);
        let e1 = EnvelopeOracle::from_samples(&labels, 3, |t| rho.eval(t)).unwrap();
        let e2 = EnvelopeOracle::from_samples(&labels, 3, |t| rho.eval(t) - p * t).unwrap();
        assert_eq!(e1.points().len(), 10);
        let gt: Vec<f64> = labels.windows(2).map(|w| w[1] - w[0]).collect();
        for _ in 0..100 {
            let u = box_point(&mut rng, 3);
            let lin: f64 = u.iter().zip(&gt).map(|(a, g)| a * p * g).sum();
            worst = worst.max((e2.envelope_value(&u) - (e1.envelope_value(&u) - lin)).abs());
        }
    }
    verdict(worst <= 1e-8, format!("worst identity defect {worst:.3e} over 50 x 100 points (tol 1e-8)"))
}

fn a4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let grid = PixelGrid::new(16, 16).unwrap();

    let mut adj = 0.0f64;
    for _ in 0..10 {
        let u = Field::from_vec(grid, 3, (0..grid.len() * 3).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let q = DualField::from_vec(grid, 3, (0..grid.len() * 6).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap();
        adj = adj.max(adjoint_gap(grad(&u).data(), q.data(), u.data(), div_adjoint(&q).data()));
    }

    let mut proj = 0.0f64;
    for n in 0..1000 {
        let kind = if n % 2 == 0 { TvKind::Isotropic } else { TvKind::Anisotropic };
        let set = ConstraintSet::new(kind, (0..3).map(|_| rng.gen_range(0.05..1.0)).collect()).unwrap();
        let a: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (mut pa, mut pb) = (a.clone(), b.clone());
        set.project_pixel(&mut pa);
        set.project_pixel(&mut pb);
        let mut twice = pa.clone();
        set.project_pixel(&mut twice);
        let d = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        let feasible = set.contains_pixel(&pa, 1e-12);
        proj = proj
            .max(if feasible { 0.0 } else { 1.0 })
            .max(d(&pa, &twice))
            .max(d(&pa, &pb) - d(&a, &b));
    }

    let mut coarea = 0.0f64;
    for _ in 0..20 {
        let space = LabelSpace::new(random_labels(&mut rng, 4)).unwrap();
        let vals: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(space.min()..=space.max())).collect();
        let u = Field::from_vec(grid, 1, vals.clone()).unwrap();
        let lu = Field::from_vec(grid, 4, vals.iter().flat_map(|&t| space.lift_scalar(t).unwrap()).collect()).unwrap();
        let a = lifted_tv(&lu, &ConstraintSet::lifted(TvKind::Anisotropic, &space)).unwrap();
        let b = scalar_tv(&u, TvKind::Anisotropic).unwrap();
        coarea = coarea.max((a - b).abs() / b);
    }

    let mut transform = 0.0f64;
    let tiny = PixelGrid::new(3, 3).unwrap();
    for _ in 0..1000 {
        let space = LabelSpace::new(random_labels(&mut rng, 3)).unwrap();
        let set = ConstraintSet::lifted(TvKind::Anisotropic, &space);
        let raw = (0..tiny.len() * 6).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let q = project_k(&DualField::from_vec(tiny, 3, raw).unwrap(), &set).unwrap();
        let u: Vec<f64> = (0..tiny.len())
            .flat_map(|_| space.lift_scalar(rng.gen_range(space.min()..=space.max())).unwrap())
            .collect();
        let t = transform_subgradient(&q, &Field::from_vec(tiny, 3, u).unwrap(), &space, 1e-3).unwrap();
        let reproj = project_k(&t.q_t, &set).unwrap();
        let d = div_adjoint(&t.q_t);
        for p in 0..tiny.len() {
            for i in 0..6 {
                transform = transform.max((reproj.pixel(p)[i] - t.q_t.pixel(p)[i]).abs());
            }
            for (j, g) in space.gamma_tilde().iter().enumerate() {
                transform = transform.max((d.pixel(p)[j] - t.p_scalar.data()[p] * g).abs());
            }
        }
    }

    let passed = adj <= 1e-10 && proj <= 1e-12 && coarea <= 1e-9 && transform <= 1e-12;
    verdict(
        passed,
        format!(
            "adjointness {adj:.1e} (1e-10), projections {proj:.1e} (1e-12), coarea {coarea:.1e} (1e-9), transform {transform:.1e} (1e-12)"
        ),
    )
}

fn a5() -> Verdict {
    let mut notes = Vec::new();
    let mut passed = true;
    for (reg, lambda, steps) in [(Reg::Iso, 14.0, 10), (Reg::Aniso, 7.0, 6)] {
        let a = CommonArgs {
            reg: Some(reg),
            lambda: Some(lambda),
            steps: Some(steps),
            shift: Some(4),
            size: Some(64),
            ..CommonArgs::default()
        };
        let cfg = RunConfig::resolve(Experiment::StereoToy, &a).unwrap();
        match cmd_stereo_toy(&cfg) {
            Ok(out) => {
                let sizes: Vec<f64> = out.scene.shapes.iter().map(|s| s.size).collect();
                assert!(sizes.windows(2).all(|w| w[0] > w[1]));
                let k: Vec<usize> = out.detection.iter().map(|d| d.unwrap_or(steps + 1)).collect();
                let ordered = k.windows(2).all(|w| w[0] <= w[1]);
                passed &= ordered;
                notes.push(format!("{reg:?} lambda={lambda} K={steps}: first detection {k:?}"));
            }
            Err(e) => {
                passed = false;
                notes.push(format!("{reg:?}: {e}"));
            }
        }
    }
    verdict(passed, notes.join("; "))
}

struct Pixelwise<'a>(PixelGrid, &'a [RandomPl]);

impl CostSampler for Pixelwise<'_> {
    fn grid(&self) -> PixelGrid {
        self.0
    }

    fn cost(&self, pixel: usize, t: f64) -> f64 {
        self.1[pixel].eval(t)
    }
}

fn tiny_gap(rng: &mut ChaCha8Rng, w: usize, h: usize, l: usize, m: usize, step: f64) -> f64 {
    let grid = PixelGrid::new(w, h).unwrap();
    let space = LabelSpace::uniform(0.0, 1.0, l + 1).unwrap();
    let costs: Vec<RandomPl> = (0..grid.len()).map(|_| RandomPl::new(rng, 0.0, 1.0, 5)).collect();
    let shift: Vec<Vec<f64>> = (0..grid.len()).map(|_| (0..l).map(|_| rng.gen_range(-0.3..0.3)).collect()).collect();
    let mut term = LiftedDataTerm::build(&Pixelwise(grid, &costs), &space, m).unwrap();
    term.set_lifted_shift(&Field::from_vec(grid, l, shift.concat()).unwrap()).unwrap();
    let inst = TinyInstance {
        width: w,
        height: h,
        data: costs
            .iter()
            .map(|c| EnvelopeOracle::from_samples(space.labels(), m, |t| c.eval(t)).unwrap())
            .collect(),
        shift,
        kind: TvKind::Anisotropic,
        radii: space.gamma_tilde().to_vec(),
    };
    let (_, best) = exhaustive_min(&inst, step).unwrap();
    let set = ConstraintSet::lifted(TvKind::Anisotropic, &space);
    let sol = solve_lifted(&term, &set, None, &SolverConfig::default()).unwrap();
    (sol.primal_energy - best).abs()
}

fn a6(on: &RunOutcome) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let step = 1e-3;
    let mut prox = 0.0f64;
    for n in 0..200 {
        let l = 1 + n % 2;
        let m = rng.gen_range(1..=4);
        let space = LabelSpace::uniform(0.0, 1.0, l + 1).unwrap();
        let rho = [RandomPl::new(&mut rng, 0.0, 1.0, 5)];
        let term = LiftedDataTerm::build(&Pixelwise(PixelGrid::new(1, 1).unwrap(), &rho), &space, m).unwrap();
        let oracle = EnvelopeOracle::from_samples(space.labels(), m, |t| rho[0].eval(t)).unwrap();
        let z: Vec<f64> = (0..l).map(|_| rng.gen_range(-0.5..1.5)).collect();
        let tau = rng.gen_range(0.05..2.0);
        let x = term.prox_data(0, &z, tau).unwrap();
        let g = prox_oracle(&oracle, &z, tau, step).unwrap();
        prox = prox.max(x.iter().zip(&g).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt());
    }

    let mut gap = 0.0f64;
    for (w, h) in [(2, 2), (2, 2), (2, 2), (2, 1), (1, 2), (2, 2)] {
        gap = gap.max(tiny_gap(&mut rng, w, h, 1, 4, 1.0 / 8.0));
    }
    for _ in 0..4 {
        gap = gap.max(tiny_gap(&mut rng, 1, 1, 2, 3, 1.0 / 6.0));
    }

    let fid: Vec<f64> = on
        .states(Mode::Classical)
        .unwrap()
        .iter()
        .map(|s| s.energies.fidelity.unwrap())
        .collect();
    let monotone = fid.windows(2).all(|w| w[1] <= w[0] + 1e-6);

    verdict(
        prox <= 5e-3 && gap <= 1e-4 && monotone,
        format!(
            "prox distance {prox:.2e} (5e-3), tiny-instance gap {gap:.2e} (1e-4), fidelity {:.4?} non-increasing: {monotone}",
            fid
        ),
    )
}

fn a7() -> Verdict {
    let cfg = RunConfig::resolve(Experiment::Rof, &rof_args(Switch::On)).unwrap();
    let f = rof_input(&cfg).unwrap();
    let space = LabelSpace::uniform(0.0, 1.0, 4).unwrap();
    let problem = BregmanProblem::rof(&f, 20.0, TvKind::Anisotropic, &space, 64).unwrap();
    let data = problem.data.as_ref().unwrap();
    let set = ConstraintSet::lifted(TvKind::Anisotropic, &space);
    let sol = solve_lifted(data, &set, None, &SolverConfig::default()).unwrap();
    let energy = |u: &Field| data.data_energy(u).unwrap() + lifted_tv(u, &set).unwrap();
    let mut rounded = sol.u.clone();
    for p in 0..rounded.grid().len() {
        let r = space.round_to_integral(sol.u.pixel(p));
        rounded.pixel_mut(p).copy_from_slice(&r);
    }
    let (e0, e1) = (energy(&sol.u), energy(&rounded));
    let rel = (e1 - e0).abs() / e0.abs();
    verdict(rel <= 1e-3, format!("energy {e0:.6e} -> {e1:.6e} after rounding, relative change {rel:.2e} (1e-3)"))
}

fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn a8(first: &Path) -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    rof_run(Switch::On, Some(dir.path()));
    let a = tree_bytes(first);
    let b = tree_bytes(dir.path());
    let names: Vec<&str> = a.iter().map(|f| f.0.as_str()).collect();
    verdict(!a.is_empty() && a == b, format!("{} files compared: {}", a.len(), names.join(" ")))
}

fn main() {
    let mut failed = 0;
    let mut report = |name: &str, started: Instant, v: Verdict| {
        let status = if v.passed { "PASS" } else { "FAIL" };
        println!("{name} {status} [{:.1}s] {}", started.elapsed().as_secs_f64(), v.detail);
        if !v.passed {
            failed += 1;
        }
    };

    let out_dir = tempfile::tempdir().unwrap();
    let t = Instant::now();
    let on = rof_run(Switch::On, Some(out_dir.path()));
    report("A1", t, a1(&on));
    let t = Instant::now();
    let off = rof_run(Switch::Off, None);
    report("A2", t, a2(&on, &off));
    let t = Instant::now();
    report("A3", t, a3());
    let t = Instant::now();
    report("A4", t, a4());
    let t = Instant::now();
    report("A5", t, a5());
    let t = Instant::now();
    report("A6", t, a6(&on));
    let t = Instant::now();
    report("A7", t, a7());
    let t = Instant::now();
    report("A8", t, a8(out_dir.path()));

    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
