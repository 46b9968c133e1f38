mod common;

use common::{dist, random_box_point, FnSampler, Pl};
use liftbreg::oracle::{path_prox_oracle, prox_oracle, EnvelopeOracle};
use liftbreg::problems::rof_sampler;
use liftbreg::{Field, LabelSpace, LiftedDataTerm, PixelGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn one_pixel() -> PixelGrid {
    PixelGrid::new(1, 1).unwrap()
}

fn random_term(rng: &mut ChaCha8Rng, l: usize, m: usize) -> LiftedDataTerm {
    let space = LabelSpace::uniform(0.0, 1.0, l + 1).unwrap();
    let pl = Pl::random(rng, 0.0, 1.0, 6, 1.0);
    LiftedDataTerm::build(&FnSampler(one_pixel(), move |_, t| pl.eval(t)), &space, m).unwrap()
}

/// Data term and oracle for a random piecewise-linear cost on uniform labels.
fn random_instance(rng: &mut ChaCha8Rng, l: usize, m: usize) -> (LiftedDataTerm, EnvelopeOracle, Pl) {
    let space = LabelSpace::uniform(0.0, 1.0, l + 1).unwrap();
    let knots = rng.gen_range(2..8);
    let pl = Pl::random(rng, 0.0, 1.0, knots, 1.0);
    let f = pl.clone();
    let term = LiftedDataTerm::build(&FnSampler(one_pixel(), move |_, t| f.eval(t)), &space, m).unwrap();
    let g = pl.clone();
    let oracle = EnvelopeOracle::from_samples(space.labels(), m, move |t| g.eval(t)).unwrap();
    (term, oracle, pl)
}

#[test]
fn envelope_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (l, m) in [(1, 7), (1, 15), (2, 3), (2, 7), (3, 1), (3, 3)] {
        for _ in 0..20 {
            let (term, oracle, _) = random_instance(&mut rng, l, m);
            for _ in 0..30 {
                let u = random_box_point(&mut rng, l);
                let a = term.eval_envelope(0, &u);
                let b = oracle.envelope_value(&u);
                assert!((a - b).abs() <= 1e-9, "l={l} M={m} u={u:?}: {a} vs {b}");
            }
            // vertices of the box
            for i in 0..=l {
                let u: Vec<f64> = (0..l).map(|j| if j < i { 1.0 } else { 0.0 }).collect();
                assert!((term.eval_envelope(0, &u) - oracle.envelope_value(&u)).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn envelope_is_infinite_outside_box() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (term, oracle, _) = random_instance(&mut rng, 2, 3);
    for u in [[0.3, 0.5], [1.1, 0.2], [0.4, -0.1]] {
        assert!(term.eval_envelope(0, &u).is_infinite());
        assert!(oracle.envelope_value(&u).is_infinite());
    }
}

#[test]
fn linear_shift_identity() {
    // rho_2(t) = rho_1(t) - p t with gamma_1 = 0 gives env_2 = env_1 - <p gamma_tilde, u>
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let space = LabelSpace::new(vec![0.0, 0.3, 0.5, 1.0]).unwrap();
    for _ in 0..30 {
        let pl = Pl::random(&mut rng, 0.0, 1.0, 6, 1.0);
        let p: f64 = rng.gen_range(-1.0..1.0);
        let (f1, f2) = (pl.clone(), pl.clone());
        let t1 = LiftedDataTerm::build(&FnSampler(one_pixel(), move |_, t| f1.eval(t)), &space, 3).unwrap();
        let t2 = LiftedDataTerm::build(&FnSampler(one_pixel(), move |_, t| f2.eval(t) - p * t), &space, 3).unwrap();
        let mut shifted = t1.clone();
        shifted.set_bregman_shift(&Field::constant(one_pixel(), 1, p)).unwrap();
        for _ in 0..50 {
            let u = random_box_point(&mut rng, 3);
            let lin: f64 = u.iter().zip(space.gamma_tilde()).map(|(a, g)| a * p * g).sum();
            let lhs = t2.eval_envelope(0, &u);
            assert!((lhs - (t1.eval_envelope(0, &u) - lin)).abs() <= 1e-9);
            assert!((lhs - shifted.eval_envelope(0, &u)).abs() <= 1e-9);
        }
    }
}

#[test]
fn fenchel_young_and_equality_at_prox() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for l in 1..=3 {
        for _ in 0..20 {
            let (mut term, _, _) = random_instance(&mut rng, l, 4);
            let b: Vec<f64> = (0..l).map(|_| rng.gen_range(-0.5..0.5)).collect();
            term.set_lifted_shift(&Field::from_vec(one_pixel(), l, b).unwrap()).unwrap();
            for _ in 0..20 {
                let u = random_box_point(&mut rng, l);
                let v: Vec<f64> = (0..l).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let uv: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                assert!(term.eval_envelope(0, &u) + term.eval_conjugate(0, &v) >= uv - 1e-9);

                let z: Vec<f64> = (0..l).map(|_| rng.gen_range(-0.5..1.5)).collect();
                let tau = rng.gen_range(0.05..2.0);
                let x = term.prox_data(0, &z, tau).unwrap();
                let g: Vec<f64> = z.iter().zip(&x).map(|(a, b)| (a - b) / tau).collect();
                let xg: f64 = x.iter().zip(&g).map(|(a, b)| a * b).sum();
                let gap = term.eval_envelope(0, &x) + term.eval_conjugate(0, &g) - xg;
                assert!(gap.abs() <= 1e-8, "l={l}: Fenchel-Young gap {gap} at prox");
            }
        }
    }
}

fn prox_objective(oracle: &EnvelopeOracle, u: &[f64], z: &[f64], tau: f64) -> f64 {
    tau * oracle.envelope_value(u) + 0.5 * dist(u, z).powi(2)
}

#[test]
fn prox_matches_grid_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let step = 0.005;
    let mut worst = 0.0f64;
    for n in 0..60 {
        let l = 1 + n % 2;
        let m = rng.gen_range(1..=4);
        let (term, oracle, _) = random_instance(&mut rng, l, m);
        let z: Vec<f64> = (0..l).map(|_| rng.gen_range(-0.5..1.5)).collect();
        let tau = rng.gen_range(0.05..2.0);
        let x = term.prox_data(0, &z, tau).unwrap();
        let g = prox_oracle(&oracle, &z, tau, step).unwrap();
        // the exact prox can never be beaten by a grid point
        assert!(prox_objective(&oracle, &x, &z, tau) <= prox_objective(&oracle, &g, &z, tau) + 1e-10);
        worst = worst.max(dist(&x, &g));
    }
    assert!(worst <= 5.0 * step, "worst prox distance {worst}");
}

#[test]
fn prox_is_nonexpansive() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for l in 1..=4 {
        for _ in 0..50 {
            let term = random_term(&mut rng, l, 5);
            let z1: Vec<f64> = (0..l).map(|_| rng.gen_range(-1.0..2.0)).collect();
            let z2: Vec<f64> = (0..l).map(|_| rng.gen_range(-1.0..2.0)).collect();
            let tau = rng.gen_range(0.05..3.0);
            let x1 = term.prox_data(0, &z1, tau).unwrap();
            let x2 = term.prox_data(0, &z2, tau).unwrap();
            assert!(dist(&x1, &x2) <= dist(&z1, &z2) + 1e-9);
        }
    }
}

#[test]
fn rof_prox_on_lifted_path() {
    // lambda = 20, f = 0.5 on labels (0, 1/3, 2/3, 1), z = (1, 1, 1)
    let space = LabelSpace::uniform(0.0, 1.0, 4).unwrap();
    let f = Field::constant(one_pixel(), 1, 0.5);
    let term = LiftedDataTerm::build(&rof_sampler(&f, 20.0).unwrap(), &space, 64).unwrap();
    let tau = 0.1;
    let z = [1.0, 1.0, 1.0];
    let x = term.prox_data(0, &z, tau).unwrap();
    let y = path_prox_oracle(space.labels(), 64, |t| 10.0 * (t - 0.5) * (t - 0.5), &z, tau, 1e-3);
    assert!(dist(&x, &y) <= 5e-3, "{x:?} vs {y:?}");
}
