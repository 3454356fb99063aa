#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use spectra_core::GridField;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn random_field(seed: u64, h: usize, w: usize, dx: f64, names: &[&str]) -> GridField {
    let mut r = rng(seed);
    let values = normal_vec(&mut r, names.len() * h * w);
    GridField::new(values, h, w, dx, names.iter().map(|s| s.to_string()).collect()).unwrap()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// Elementwise relative agreement with a floor at `1e-3` of the reference's
/// largest magnitude, so round-off-level entries do not dominate.
pub fn assert_close_modewise(actual: &[f64], expected: &[f64], tol: f64, what: &str) {
    assert_eq!(actual.len(), expected.len(), "{what}: length");
    let floor = 1e-3 * max_abs(expected);
    for (i, (a, e)) in actual.iter().zip(expected).enumerate() {
        let scale = e.abs().max(floor).max(f64::MIN_POSITIVE);
        assert!(
            (a - e).abs() <= tol * scale,
            "{what}: index {i}: {a} vs {e} (rel {:.3e})",
            (a - e).abs() / scale
        );
    }
}

/// Largest relative difference over the vector, measured against its norm.
pub fn rel_l2(actual: &[f64], expected: &[f64]) -> f64 {
    let num: f64 = actual.iter().zip(expected).map(|(a, e)| (a - e) * (a - e)).sum();
    let den: f64 = expected.iter().map(|e| e * e).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}
