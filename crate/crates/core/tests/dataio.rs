mod common;

use nalgebra::DVector;

use common::*;
use lssvm_rmt::dataio::{self, IdxImages, ImageDataset};
use lssvm_rmt::seed::rng_from_seed;
use lssvm_rmt::Error;

#[test]
fn idx_files_round_trip_through_disk() {
    let dir = std::env::temp_dir().join(format!("lssvm-idx-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let pixels: Vec<u8> = (0..5 * 3 * 4).map(|i| (i * 37 % 256) as u8).collect();
    let images = IdxImages { count: 5, rows: 3, cols: 4, pixels };
    let labels = vec![8, 9, 8, 1, 9];
    std::fs::write(dir.join("img"), dataio::write_idx_images(&images)).unwrap();
    std::fs::write(dir.join("lab"), dataio::write_idx_labels(&labels)).unwrap();

    let d = dataio::load_idx_digits(&dir.join("img"), &dir.join("lab"), &[8, 9]).unwrap();
    assert_eq!(d.labels, vec![8, 9, 8, 9]);
    assert_eq!(d.dim(), 12);
    assert_eq!(d.images[(1, 0)], images.pixels[1] as f64 / 255.0);
    assert_eq!(d.images[(0, 3)], images.pixels[4 * 12] as f64 / 255.0);
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn corrupt_headers_are_reported() {
    let images = IdxImages { count: 2, rows: 2, cols: 2, pixels: vec![0; 8] };
    let mut bytes = dataio::write_idx_images(&images);
    bytes[3] = 0x01;
    assert!(matches!(dataio::parse_idx_images(&bytes), Err(Error::BadMagic { .. })));
    let bytes = dataio::write_idx_images(&images);
    assert!(matches!(dataio::parse_idx_images(&bytes[..bytes.len() - 1]), Err(Error::TruncatedFile { .. })));
}

#[test]
fn class_stats_recover_known_moments() {
    let p = 6;
    let mut rng = rng_from_seed(9);
    let cov = random_spd(&mut rng, p);
    let chol = cov.clone().cholesky().unwrap().l();
    let mu = DVector::from_fn(p, |i, _| i as f64 * 0.1);
    let n = 40_000;
    let z = normal_matrix(&mut rng, p, 2 * n);
    let mut images = &chol * z;
    for j in 0..2 * n {
        for i in 0..p {
            images[(i, j)] += if j < n { mu[i] } else { -mu[i] };
        }
    }
    let labels: Vec<u8> = (0..2 * n).map(|j| if j < n { 3 } else { 5 }).collect();
    let data = ImageDataset { images, labels, rows: 1, cols: p, scaling: Vec::new() };
    let m = dataio::class_stats(&data, 3, 5).unwrap();
    assert!((m.mean(lssvm_rmt::Class::One) - &mu).amax() < 0.05);
    assert!((m.cov(lssvm_rmt::Class::Two) - &cov).amax() < 0.1);
    assert!((m.c1() - 0.5).abs() < 1e-12);
}
