use liftbreg::imageio::{parse_metrics, read_pgm, write_metrics, write_pgm, GrayImage, Manifest, MetricsRow};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pgm_round_trip(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let img = GrayImage::new(w, h, (0..w * h).map(|_| rng.gen_range(0.0..=1.0)).collect()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pgm");
        write_pgm(&img, &path, 255).unwrap();
        let back = read_pgm(&path).unwrap();
        prop_assert_eq!((back.width, back.height), (w, h));
        for (a, b) in img.samples.iter().zip(&back.samples) {
            prop_assert!((a - b).abs() <= 1.0 / 510.0 + 1e-15);
        }
        // rewriting gives identical bytes
        let again = dir.path().join("b.pgm");
        write_pgm(&img, &again, 255).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }

    #[test]
    fn metrics_round_trip(vals in prop::collection::vec(-1e6..1e6f64, 4), k in 0usize..100) {
        let row = MetricsRow {
            k,
            mode: "classical".into(),
            data_energy: vals[0],
            tv_energy: vals[1],
            fidelity: Some(vals[2]),
            noninteg_count: 7,
            solver_iters: 1234,
            wall_ms: 0,
            diff_to_classic: Some(vals[3]),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_metrics(std::slice::from_ref(&row), &path).unwrap();
        let back = parse_metrics(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-11 * a.abs().max(1.0);
        prop_assert!(close(back[0].data_energy, row.data_energy));
        prop_assert!(close(back[0].tv_energy, row.tv_energy));
        prop_assert!(close(back[0].fidelity.unwrap(), vals[2]));
        prop_assert!(close(back[0].diff_to_classic.unwrap(), vals[3]));
        prop_assert_eq!((back[0].k, back[0].solver_iters), (k, 1234));
    }
}

#[test]
fn missing_file_reports_path() {
    let err = read_pgm(std::path::Path::new("/nonexistent/x.pgm")).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/x.pgm"));
}

#[test]
fn manifest_file_is_sorted() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = Manifest::new();
    m.set("seed", 1);
    m.set("labels", 5);
    m.write(&dir.path().join("manifest.txt")).unwrap();
    assert_eq!(std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap(), "labels=5\nseed=1\n");
}
