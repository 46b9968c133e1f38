use liftbreg::oracle::{adjoint_gap, forward_differences};
use liftbreg::regularizer::{div_adjoint, grad, lifted_tv, project_k, scalar_tv};
use liftbreg::{ConstraintSet, DualField, Field, LabelSpace, PixelGrid, TvKind};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(rng: &mut ChaCha8Rng, grid: PixelGrid, ch: usize) -> Field {
    let data = (0..grid.len() * ch).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Field::from_vec(grid, ch, data).unwrap()
}

fn random_dual(rng: &mut ChaCha8Rng, grid: PixelGrid, ch: usize, scale: f64) -> DualField {
    let data = (0..grid.len() * ch * 2).map(|_| rng.gen_range(-scale..scale)).collect();
    DualField::from_vec(grid, ch, data).unwrap()
}

#[test]
fn gradient_is_adjoint_to_div() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (w, h, sp) in [(16, 16, 1.0), (7, 3, 0.5), (1, 9, 2.0), (1, 1, 1.0)] {
        let grid = PixelGrid::with_spacing(w, h, sp).unwrap();
        for _ in 0..10 {
            let u = random_field(&mut rng, grid, 3);
            let q = random_dual(&mut rng, grid, 3, 1.0);
            let gap = adjoint_gap(grad(&u).data(), q.data(), u.data(), div_adjoint(&q).data());
            assert!(gap <= 1e-12, "adjointness defect {gap}");
        }
    }
}

#[test]
fn gradient_matches_reference_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let grid = PixelGrid::with_spacing(5, 4, 0.5).unwrap();
    let u = random_field(&mut rng, grid, 1);
    let g = grad(&u);
    let r = forward_differences(5, 4, 0.5, u.data());
    for (p, &(dx, dy)) in r.iter().enumerate() {
        assert!((g.get(p, 0, 0) - dx).abs() < 1e-12);
        assert!((g.get(p, 0, 1) - dy).abs() < 1e-12);
    }
}

fn project_block(set: &ConstraintSet, b: &[f64]) -> Vec<f64> {
    let mut out = b.to_vec();
    set.project_pixel(&mut out);
    out
}

fn norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn projection_properties(
        iso in any::<bool>(),
        radii in prop::collection::vec(0.01..2.0f64, 3),
        a in prop::collection::vec(-4.0..4.0f64, 6),
        b in prop::collection::vec(-4.0..4.0f64, 6),
    ) {
        let kind = if iso { TvKind::Isotropic } else { TvKind::Anisotropic };
        let set = ConstraintSet::new(kind, radii).unwrap();
        let pa = project_block(&set, &a);
        let pb = project_block(&set, &b);
        prop_assert!(set.contains_pixel(&pa, 1e-12));
        let twice = project_block(&set, &pa);
        prop_assert!(norm(&pa, &twice) <= 1e-14);
        prop_assert!(norm(&pa, &pb) <= norm(&a, &b) + 1e-12);
        // points inside are fixed
        if set.contains_pixel(&a, 0.0) {
            prop_assert_eq!(pa, a);
        }
    }

    #[test]
    fn projection_is_nearest_point(
        radii in prop::collection::vec(0.1..2.0f64, 2),
        a in prop::collection::vec(-4.0..4.0f64, 4),
        c in prop::collection::vec(-1.0..1.0f64, 4),
    ) {
        // compare with a random feasible point of the isotropic set
        let set = ConstraintSet::new(TvKind::Isotropic, radii).unwrap();
        let pa = project_block(&set, &a);
        let other = project_block(&set, &c);
        prop_assert!(norm(&a, &pa) <= norm(&a, &other) + 1e-12);
    }

    #[test]
    fn anisotropic_coarea(seed in any::<u64>(), widths in prop::collection::vec(0.1..1.0f64, 1..5)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut labels = vec![0.0];
        for w in widths {
            labels.push(labels.last().unwrap() + w);
        }
        let space = LabelSpace::new(labels).unwrap();
        let grid = PixelGrid::new(9, 7).unwrap();
        let vals: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(space.min()..=space.max())).collect();
        let u = Field::from_vec(grid, 1, vals.clone()).unwrap();
        let l = space.sublabels();
        let lifted: Vec<f64> = vals.iter().flat_map(|&t| space.lift_scalar(t).unwrap()).collect();
        let lu = Field::from_vec(grid, l, lifted).unwrap();
        let set = ConstraintSet::lifted(TvKind::Anisotropic, &space);
        let a = lifted_tv(&lu, &set).unwrap();
        let b = scalar_tv(&u, TvKind::Anisotropic).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * b.max(1.0));
    }
}

#[test]
fn isotropic_coarea_is_an_upper_bound() {
    // the isotropic lifted TV can only exceed the scalar one
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let space = LabelSpace::uniform(0.0, 1.0, 5).unwrap();
    let grid = PixelGrid::new(8, 8).unwrap();
    for _ in 0..20 {
        let vals: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let u = Field::from_vec(grid, 1, vals.clone()).unwrap();
        let lu = Field::from_vec(grid, 4, vals.iter().flat_map(|&t| space.lift_scalar(t).unwrap()).collect()).unwrap();
        let a = lifted_tv(&lu, &ConstraintSet::lifted(TvKind::Isotropic, &space)).unwrap();
        let b = scalar_tv(&u, TvKind::Isotropic).unwrap();
        assert!(a >= b - 1e-12);
    }
}

#[test]
fn projected_dual_field_is_feasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let grid = PixelGrid::new(6, 5).unwrap();
    let space = LabelSpace::new(vec![0.0, 0.2, 0.7, 1.0]).unwrap();
    for kind in [TvKind::Isotropic, TvKind::Anisotropic] {
        let set = ConstraintSet::lifted(kind, &space);
        let q = project_k(&random_dual(&mut rng, grid, 3, 3.0), &set).unwrap();
        for p in 0..grid.len() {
            assert!(set.contains_pixel(q.pixel(p), 1e-12));
        }
    }
}
