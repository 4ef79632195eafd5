use std::io::Write;

use sha2::{Digest, Sha256};

use denl_core::dataset::{self, draw_object, generate, load_all, DatasetConfig};
use denl_core::{Error, Order, SampleRng};

fn digest(path: &std::path::Path) -> String {
    let bytes = std::fs::read(path).unwrap();
    format!("{:x}", Sha256::digest(bytes))
}

#[test]
fn generation_is_byte_identical_for_one_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DatasetConfig::toy(Order::Third, 23, 7);
    let (a, b) = (dir.path().join("a.bin"), dir.path().join("b.bin"));
    generate(&cfg, &a).unwrap();
    generate(&cfg, &b).unwrap();
    assert_eq!(digest(&a), digest(&b));
    let other = DatasetConfig::toy(Order::Third, 23, 8);
    let c = dir.path().join("c.bin");
    generate(&other, &c).unwrap();
    assert_ne!(digest(&a), digest(&c));
}

#[test]
fn generation_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DatasetConfig::toy(Order::Second, 30, 3);
    let (a, b) = (dir.path().join("a.bin"), dir.path().join("b.bin"));
    generate(&cfg, &a).unwrap();
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| generate(&cfg, &b).unwrap());
    assert_eq!(digest(&a), digest(&b));
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DatasetConfig::toy(Order::Second, 13, 1);
    let path = dir.path().join("d.bin");
    let header = generate(&cfg, &path).unwrap();
    let (back, samples) = load_all(&path).unwrap();
    assert_eq!(back, header);
    assert_eq!(samples, dataset::generate_samples(&cfg, 0..13).unwrap());
    for s in &samples {
        let lo = s.target.iter().copied().fold(f32::INFINITY, f32::min);
        let hi = s.target.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        assert_eq!((lo, hi), (0.0, 1.0));
    }
    let counts: Vec<usize> = samples.iter().map(|s| s.interface_count()).collect();
    assert_eq!(counts, (0..13).map(|i| cfg.interfaces_for(i)).collect::<Vec<_>>());
}

#[test]
fn truncated_files_report_the_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DatasetConfig::toy(Order::Second, 4, 1);
    let path = dir.path().join("d.bin");
    generate(&cfg, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let cut = dir.path().join("cut.bin");
    std::fs::File::create(&cut).unwrap().write_all(&bytes[..bytes.len() - 100]).unwrap();
    match load_all(&cut) {
        Err(Error::TruncatedRecord { index }) => assert_eq!(index, 3),
        other => panic!("expected a truncated record, got {other:?}"),
    }
}

/// Chi-square test of the reflectivity draws against U(0, 1] with 20 cells.
#[test]
fn reflectivities_are_uniform() {
    let cfg = DatasetConfig::toy(Order::Second, 1, 0);
    let mut rng = SampleRng::from_seed(11);
    let mut cells = [0usize; 20];
    let mut total = 0;
    for _ in 0..1000 {
        for i in draw_object(&mut rng, &cfg, 6).unwrap().interfaces {
            cells[((i.reflectivity * 20.0).ceil() as usize).clamp(1, 20) - 1] += 1;
            total += 1;
        }
    }
    let expected = total as f64 / 20.0;
    let chi2: f64 = cells.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 99.9th percentile of chi-square with 19 degrees of freedom.
    assert!(chi2 < 43.82, "chi2 = {chi2}");
}
