mod common;

use common::random_field;
use proptest::prelude::*;
use rand::Rng;
use spectra_core::metrics::crps_scalar;
use spectra_core::{crps, mae, rmse, CrpsEstimator, Ensemble, GridField};

/// Integrates the CRPS integrand on 1e5 cells over the data range. Cell edges
/// include every breakpoint, so the midpoint rule sees a constant integrand
/// on each cell.
fn quadrature_crps(members: &[f64], obs: f64, fair: bool) -> f64 {
    let m = members.len() as f64;
    let mut knots: Vec<f64> = members.to_vec();
    knots.push(obs);
    knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (lo, hi) = (knots[0], knots[knots.len() - 1]);
    if hi == lo {
        return 0.0;
    }
    let total_cells = 100_000.0;
    let mut sum = 0.0;
    for seg in knots.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if b <= a {
            continue;
        }
        let cells = ((b - a) / (hi - lo) * total_cells).ceil().max(1.0) as usize;
        let dt = (b - a) / cells as f64;
        for j in 0..cells {
            let t = a + (j as f64 + 0.5) * dt;
            let f = members.iter().filter(|&&x| x <= t).count() as f64 / m;
            let step = if t >= obs { 1.0 } else { 0.0 };
            let mut g = (f - step) * (f - step);
            if fair {
                g -= f * (1.0 - f) / (m - 1.0);
            }
            sum += g * dt;
        }
    }
    sum
}

#[test]
fn crps_matches_quadrature_oracle() {
    let mut rng = common::rng(2024);
    for case in 0..1000 {
        let m = rng.random_range(1..=12);
        let spread = rng.random_range(0.1..5.0);
        let members: Vec<f64> = (0..m).map(|_| rng.random_range(-spread..spread)).collect();
        let obs = rng.random_range(-1.5 * spread..1.5 * spread);
        let standard = crps_scalar(&members, obs, CrpsEstimator::Standard).unwrap();
        let oracle = quadrature_crps(&members, obs, false);
        assert!((standard - oracle).abs() <= 1e-6, "case {case}: standard {standard} vs {oracle}");
        if m >= 2 {
            let fair = crps_scalar(&members, obs, CrpsEstimator::Fair).unwrap();
            let oracle = quadrature_crps(&members, obs, true);
            assert!((fair - oracle).abs() <= 1e-6, "case {case}: fair {fair} vs {oracle}");
        }
    }
}

#[test]
fn single_member_crps_is_mae_bitwise() {
    for seed in 0..20u64 {
        let truth = random_field(seed, 9, 7, 1.0, &["a", "b"]);
        let pred = random_field(seed + 100, 9, 7, 1.0, &["a", "b"]);
        let ens = Ensemble::new(vec![pred.clone()]).unwrap();
        let c = crps(&ens, &truth, CrpsEstimator::Standard).unwrap();
        let m = mae(&pred, &truth).unwrap();
        for (x, y) in c.iter().zip(&m) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

fn shifted(f: &GridField, alpha: f64, c: f64) -> GridField {
    f.with_values(f.values().iter().map(|v| alpha * v + c).collect()).unwrap()
}

proptest! {
    #[test]
    fn crps_is_nonnegative_and_zero_only_at_truth(seed in any::<u64>(), m in 1usize..6) {
        let truth = random_field(seed, 4, 5, 1.0, &["q"]);
        let members: Vec<GridField> = (0..m).map(|i| random_field(seed ^ (i as u64 + 1), 4, 5, 1.0, &["q"])).collect();
        let ens = Ensemble::new(members).unwrap();
        for est in [CrpsEstimator::Standard, CrpsEstimator::Fair] {
            if est == CrpsEstimator::Fair && m < 2 {
                continue;
            }
            prop_assert!(crps(&ens, &truth, est).unwrap()[0] >= 0.0);
        }
        let perfect = Ensemble::new(vec![truth.clone(); m]).unwrap();
        prop_assert_eq!(crps(&perfect, &truth, CrpsEstimator::Standard).unwrap()[0], 0.0);
    }

    #[test]
    fn mae_rmse_translation_and_homogeneity(seed in any::<u64>(), alpha in -5.0..5.0f64, c in -10.0..10.0f64) {
        let t = random_field(seed, 5, 6, 1.0, &["q", "r"]);
        let p = random_field(seed ^ 77, 5, 6, 1.0, &["q", "r"]);
        let (m0, r0) = (mae(&p, &t).unwrap(), rmse(&p, &t).unwrap());
        let (mt, rt) = (mae(&shifted(&p, 1.0, c), &shifted(&t, 1.0, c)).unwrap(), rmse(&shifted(&p, 1.0, c), &shifted(&t, 1.0, c)).unwrap());
        let (ms, rs) = (mae(&shifted(&p, alpha, 0.0), &shifted(&t, alpha, 0.0)).unwrap(), rmse(&shifted(&p, alpha, 0.0), &shifted(&t, alpha, 0.0)).unwrap());
        for ch in 0..2 {
            prop_assert!((mt[ch] - m0[ch]).abs() <= 1e-12 * (1.0 + c.abs()));
            prop_assert!((rt[ch] - r0[ch]).abs() <= 1e-12 * (1.0 + c.abs()));
            prop_assert!((ms[ch] - alpha.abs() * m0[ch]).abs() <= 1e-12 * (1.0 + alpha.abs()));
            prop_assert!((rs[ch] - alpha.abs() * r0[ch]).abs() <= 1e-12 * (1.0 + alpha.abs()));
        }
    }
}
