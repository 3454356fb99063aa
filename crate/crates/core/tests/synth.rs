mod common;

use spectra_core::spectral::{mean_radial, psd, radial_bin, BinScale, RadialSpectrum};
use spectra_core::synth::{gaussian_random_field, sample_potentials, sample_truth, wind_from_potentials, write_dataset};
use spectra_core::{helmholtz_decompose, make_dataset, GridField, SynthSpec, WindPair};

/// Least-squares slope of ln(power) against ln(k) over occupied bins.
fn loglog_slope(s: &RadialSpectrum) -> f64 {
    let pts: Vec<(f64, f64)> = s.occupied().map(|(k, p, _)| (k.ln(), p.ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn mean_spectrum(fields: &[GridField], channel: usize) -> RadialSpectrum {
    let spectra: Vec<RadialSpectrum> = fields
        .iter()
        .map(|f| {
            let n = f.height().min(f.width()) / 2;
            radial_bin(&psd(f, channel).unwrap(), n, BinScale::Log).unwrap()
        })
        .collect();
    mean_radial(&spectra).unwrap()
}

#[test]
fn scalar_field_slope_and_variance() {
    for alpha in [1.0, 5.0 / 3.0, 3.0] {
        let fields: Vec<GridField> = (0..32)
            .map(|seed| gaussian_random_field(&SynthSpec { seed, alpha, ..SynthSpec::default() }).unwrap())
            .collect();
        let slope = loglog_slope(&mean_spectrum(&fields, 0));
        assert!((slope + alpha).abs() < 0.2, "alpha {alpha}: slope {slope}");
        let var: f64 = fields.iter().map(|f| common::rms(f.values()).powi(2)).sum::<f64>() / 32.0;
        assert!((var - 1.0).abs() < 0.25, "variance {var}");
    }
}

#[test]
fn wind_and_t2m_slopes() {
    let spec = SynthSpec::default();
    let truths: Vec<GridField> = (0..32).map(|i| sample_truth(&spec, i).unwrap()).collect();
    let u = loglog_slope(&mean_spectrum(&truths, 0));
    let t = loglog_slope(&mean_spectrum(&truths, 2));
    assert!((u + spec.alpha).abs() < 0.2, "u slope {u}");
    assert!((t + spec.alpha + 1.0).abs() < 0.2, "t2m slope {t}");
}

fn rotational_fraction(wind: &WindPair) -> (f64, f64) {
    let parts = helmholtz_decompose(wind).unwrap();
    let e = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * x + y * y).sum::<f64>();
    (e(&parts.u_rot, &parts.v_rot), e(&parts.u_div, &parts.v_div))
}

#[test]
fn energy_partition_follows_rot_frac() {
    for rot_frac in [0.2, 0.7, 0.9] {
        let mut fracs = 0.0;
        for seed in 0..32 {
            let spec = SynthSpec { seed, rot_frac, ..SynthSpec::default() };
            let t = sample_truth(&spec, 0).unwrap();
            let (r, d) = rotational_fraction(&WindPair::from_named(&t, "u10", "v10").unwrap());
            fracs += r / (r + d);
        }
        let mean = fracs / 32.0;
        assert!((mean - rot_frac).abs() <= 0.05, "rot_frac {rot_frac}: measured {mean}");
    }
}

#[test]
fn decomposition_recovers_potential_winds() {
    let spec = SynthSpec { height: 32, width: 48, seed: 5, ..SynthSpec::default() };
    for sample in 0..4 {
        let (psi, chi) = sample_potentials(&spec, sample).unwrap();
        let zero = psi.with_values(vec![0.0; psi.values().len()]).unwrap();
        let rot = wind_from_potentials(&psi, &zero).unwrap();
        let div = wind_from_potentials(&zero, &chi).unwrap();
        let truth = sample_truth(&spec, sample).unwrap();
        let parts = helmholtz_decompose(&WindPair::from_named(&truth, "u10", "v10").unwrap()).unwrap();
        let check = |a: &[f64], b: &[f64]| {
            let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            assert!(common::max_abs(&d) <= 1e-8 * common::max_abs(b));
        };
        check(&parts.u_rot, rot.u());
        check(&parts.v_rot, rot.v());
        check(&parts.u_div, div.u());
        check(&parts.v_div, div.v());
    }
}

#[test]
fn generation_is_byte_reproducible() {
    let spec = SynthSpec { height: 32, width: 32, seed: 17, ..SynthSpec::default() };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_dataset(a.path(), &make_dataset(&spec, 4, 4).unwrap(), &spec).unwrap();
    write_dataset(b.path(), &make_dataset(&spec, 4, 4).unwrap(), &spec).unwrap();
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 9);
    for name in names {
        assert_eq!(std::fs::read(a.path().join(&name)).unwrap(), std::fs::read(b.path().join(&name)).unwrap());
    }
}

#[test]
fn different_seeds_and_samples_differ() {
    let spec = SynthSpec { height: 16, width: 16, ..SynthSpec::default() };
    let a = sample_truth(&spec, 0).unwrap();
    assert_ne!(a, sample_truth(&spec, 1).unwrap());
    assert_ne!(a, sample_truth(&SynthSpec { seed: 1, ..spec.clone() }, 0).unwrap());
}
