//! Oracle-backed invariant checks run by `liftbreg selftest`.

use liftbreg::oracle::{adjoint_gap, prox_oracle, EnvelopeOracle};
use liftbreg::regularizer::{div_adjoint, grad, lifted_tv, scalar_tv};
use liftbreg::{ConstraintSet, CostSampler, DualField, Field, LabelSpace, LiftedDataTerm, PixelGrid, TvKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed defect.
    pub worst: f64,
    pub tolerance: f64,
}

/// Piecewise-linear cost through random values at equispaced knots.
#[derive(Clone, Debug)]
pub struct RandomPl {
    lo: f64,
    hi: f64,
    ys: Vec<f64>,
}

impl RandomPl {
    pub fn new<R: Rng>(rng: &mut R, lo: f64, hi: f64, knots: usize) -> Self {
        RandomPl { lo, hi, ys: (0..knots).map(|_| rng.gen_range(0.0..1.0)).collect() }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.ys.len() - 1;
        let s = ((t - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0) * n as f64;
        let k = (s.floor() as usize).min(n - 1);
        let w = s - k as f64;
        self.ys[k] * (1.0 - w) + self.ys[k + 1] * w
    }
}

struct OnePixel<'a>(&'a RandomPl);

impl CostSampler for OnePixel<'_> {
    fn grid(&self) -> PixelGrid {
        PixelGrid::new(1, 1).unwrap()
    }

    fn cost(&self, _: usize, t: f64) -> f64 {
        self.0.eval(t)
    }
}

fn box_point<R: Rng>(rng: &mut R, l: usize) -> Vec<f64> {
    let mut u: Vec<f64> = (0..l).map(|_| rng.gen_range(0.0..1.0)).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    u
}

fn check(name: &'static str, worst: f64, tolerance: f64) -> CheckResult {
    CheckResult { name, passed: worst <= tolerance, worst, tolerance }
}

/// `env(rho - p t) = env(rho) - <p gamma_tilde, u>` for `gamma_1 = 0`, by enumeration.
pub fn check_linear_shift(rng: &mut ChaCha8Rng, functions: usize, points: usize) -> CheckResult {
    let labels = [0.0, 0.25, 0.6, 1.0];
    let gt = [0.25, 0.35, 0.4];
    let mut worst = 0.0f64;
    for _ in 0..functions {
        let rho = RandomPl::new(rng, 0.0, 1.0, 7);
        let p: f64 = rng.gen_range(-1.0..1.0);
        let e1 = EnvelopeOracle::from_samples(&labels, 3, |t| rho.eval(t)).unwrap();
        let e2 = EnvelopeOracle::from_samples(&labels, 3, |t| rho.eval(t) - p * t).unwrap();
        for _ in 0..points {
            let u = box_point(rng, 3);
            let lin: f64 = u.iter().zip(&gt).map(|(a, g)| a * p * g).sum();
            worst = worst.max((e2.envelope_value(&u) - (e1.envelope_value(&u) - lin)).abs());
        }
    }
    check("linear shift identity", worst, 1e-8)
}

pub fn check_envelope(rng: &mut ChaCha8Rng, instances: usize) -> CheckResult {
    let mut worst = 0.0f64;
    for n in 0..instances {
        let l = 1 + n % 3;
        let m = [15, 7, 3][l - 1];
        let space = LabelSpace::uniform(0.0, 1.0, l + 1).unwrap();
        let rho = RandomPl::new(rng, 0.0, 1.0, 6);
        let term = LiftedDataTerm::build(&OnePixel(&rho), &space, m).unwrap();
        let oracle = EnvelopeOracle::from_samples(space.labels(), m, |t| rho.eval(t)).unwrap();
        for _ in 0..20 {
            let u = box_point(rng, l);
            worst = worst.max((term.eval_envelope(0, &u) - oracle.envelope_value(&u)).abs());
        }
    }
    check("envelope vs enumeration", worst, 1e-9)
}

pub fn check_coarea(rng: &mut ChaCha8Rng, images: usize) -> CheckResult {
    let space = LabelSpace::new(vec![0.0, 0.1, 0.5, 0.6, 1.0]).unwrap();
    let grid = PixelGrid::new(16, 16).unwrap();
    let set = ConstraintSet::lifted(TvKind::Anisotropic, &space);
    let mut worst = 0.0f64;
    for _ in 0..images {
        let vals: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let u = Field::from_vec(grid, 1, vals.clone()).unwrap();
        let lifted: Vec<f64> = vals.iter().flat_map(|&t| space.lift_scalar(t).unwrap()).collect();
        let lu = Field::from_vec(grid, 4, lifted).unwrap();
        let a = lifted_tv(&lu, &set).unwrap();
        let b = scalar_tv(&u, TvKind::Anisotropic).unwrap();
        worst = worst.max((a - b).abs() / b.max(1.0));
    }
    check("anisotropic coarea", worst, 1e-9)
}

pub fn check_adjoint(rng: &mut ChaCha8Rng, fields: usize) -> CheckResult {
    let grid = PixelGrid::new(16, 16).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..fields {
        let u = Field::from_vec(grid, 3, (0..grid.len() * 3).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let q = DualField::from_vec(grid, 3, (0..grid.len() * 6).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap();
        worst = worst.max(adjoint_gap(grad(&u).data(), q.data(), u.data(), div_adjoint(&q).data()));
    }
    check("gradient adjointness", worst, 1e-10)
}

/// Projection feasibility, idempotence and non-expansiveness. The projection
/// uses radii scaled by `radius_scale`; feasibility is judged on the true ones.
pub fn check_projections(rng: &mut ChaCha8Rng, samples: usize, radius_scale: f64) -> CheckResult {
    let mut worst = 0.0f64;
    for n in 0..samples {
        let kind = if n % 2 == 0 { TvKind::Isotropic } else { TvKind::Anisotropic };
        let radii: Vec<f64> = (0..3).map(|_| rng.gen_range(0.05..1.0)).collect();
        let truth = ConstraintSet::new(kind, radii.clone()).unwrap();
        let used = ConstraintSet::new(kind, radii.iter().map(|r| r * radius_scale).collect()).unwrap();
        let a: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut pa = a.clone();
        let mut pb = b.clone();
        used.project_pixel(&mut pa);
        used.project_pixel(&mut pb);
        let mut twice = pa.clone();
        used.project_pixel(&mut twice);
        let dist = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        let infeasible = pa
            .chunks_exact(2)
            .zip(truth.radii())
            .map(|(row, r)| match kind {
                TvKind::Isotropic => (row[0].hypot(row[1]) - r).max(0.0),
                TvKind::Anisotropic => (row[0].abs().max(row[1].abs()) - r).max(0.0),
            })
            .fold(0.0, f64::max);
        worst = worst
            .max(infeasible)
            .max(dist(&pa, &twice))
            .max(dist(&pa, &pb) - dist(&a, &b));
    }
    check("dual projections", worst, 1e-12)
}

pub fn check_prox(rng: &mut ChaCha8Rng, instances: usize, grid_step: f64) -> CheckResult {
    let mut worst = 0.0f64;
    for n in 0..instances {
        let l = 1 + n % 2;
        let m = rng.gen_range(1..=4);
        let space = LabelSpace::uniform(0.0, 1.0, l + 1).unwrap();
        let rho = RandomPl::new(rng, 0.0, 1.0, 5);
        let term = LiftedDataTerm::build(&OnePixel(&rho), &space, m).unwrap();
        let oracle = EnvelopeOracle::from_samples(space.labels(), m, |t| rho.eval(t)).unwrap();
        let z: Vec<f64> = (0..l).map(|_| rng.gen_range(-0.5..1.5)).collect();
        let tau = rng.gen_range(0.05..2.0);
        let x = term.prox_data(0, &z, tau).unwrap();
        let g = prox_oracle(&oracle, &z, tau, grid_step).unwrap();
        let d = x.iter().zip(&g).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        worst = worst.max(d);
    }
    check("prox vs grid oracle", worst, 5.0 * grid_step)
}

pub fn run_all(seed: u64, radius_scale: f64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        check_linear_shift(&mut rng, 20, 50),
        check_envelope(&mut rng, 30),
        check_coarea(&mut rng, 20),
        check_adjoint(&mut rng, 10),
        check_projections(&mut rng, 1000, radius_scale),
        check_prox(&mut rng, 60, 0.005),
    ]
}

pub fn format_table(results: &[CheckResult]) -> String {
    let mut s = format!("{:<26} {:<6} {:>12} {:>12}\n", "check", "result", "worst", "tolerance");
    for r in results {
        s.push_str(&format!(
            "{:<26} {:<6} {:>12.3e} {:>12.3e}\n",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.worst,
            r.tolerance
        ));
    }
    s
}
