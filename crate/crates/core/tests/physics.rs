mod common;

use common::{assert_close_modewise, max_abs, random_field, rms};
use proptest::prelude::*;
use spectra_core::physics::divergence_power_spectrum;
use spectra_core::spectral::psd_plane;
use spectra_core::synth::wind_from_potentials;
use spectra_core::{divergence, helmholtz_decompose, kinetic_energy, vorticity, DerivativeMethod, WindPair};

fn random_wind(seed: u64, n: usize, dx: f64) -> WindPair {
    let f = random_field(seed, n, n, dx, &["u", "v"]);
    WindPair::from_named(&f, "u", "v").unwrap()
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    max_abs(&d) / max_abs(b).max(f64::MIN_POSITIVE)
}

#[test]
fn helmholtz_recovers_constructed_parts() {
    for (i, n) in [16usize, 32, 64].into_iter().enumerate() {
        for rep in 0..4u64 {
            let seed = 10 * i as u64 + rep;
            let dx = 1000.0 * (1.0 + rep as f64);
            let psi = random_field(seed, n, n, dx, &["psi"]);
            let chi = random_field(seed + 500, n, n, dx, &["chi"]);
            let rot = wind_from_potentials(&psi, &psi.with_values(vec![0.0; n * n]).unwrap()).unwrap();
            let div = wind_from_potentials(&chi.with_values(vec![0.0; n * n]).unwrap(), &chi).unwrap();
            let (cu, cv) = (0.7, -1.3);
            let u: Vec<f64> = rot.u().iter().zip(div.u()).map(|(a, b)| a + b + cu).collect();
            let v: Vec<f64> = rot.v().iter().zip(div.v()).map(|(a, b)| a + b + cv).collect();
            let wind = WindPair::new(u.clone(), v.clone(), n, n, dx).unwrap();
            let parts = helmholtz_decompose(&wind).unwrap();

            let back = parts.reconstruct().unwrap();
            assert!(rel(back.u(), &u) <= 1e-8 && rel(back.v(), &v) <= 1e-8, "round trip n={n}");
            assert!(rel(&parts.u_rot, rot.u()) <= 1e-8 && rel(&parts.v_rot, rot.v()) <= 1e-8);
            assert!(rel(&parts.u_div, div.u()) <= 1e-8 && rel(&parts.v_div, div.v()) <= 1e-8);
            assert!(parts.mean_u.iter().all(|m| (m - cu).abs() < 1e-10));

            let scale = rms(&u).max(rms(&v));
            let dr = divergence(&parts.rotational().unwrap(), DerivativeMethod::Spectral).unwrap();
            let zd = vorticity(&parts.divergent().unwrap(), DerivativeMethod::Spectral).unwrap();
            assert!(max_abs(dr.values()) <= 1e-8 * scale / dx);
            assert!(max_abs(zd.values()) <= 1e-8 * scale / dx);
        }
    }
}

#[test]
fn helmholtz_round_trip_on_arbitrary_winds() {
    for (i, n) in [16usize, 32, 64].into_iter().enumerate() {
        for rep in 0..3u64 {
            let wind = random_wind(100 + 10 * i as u64 + rep, n, 2.0);
            let parts = helmholtz_decompose(&wind).unwrap();
            let back = parts.reconstruct().unwrap();
            assert!(rel(back.u(), wind.u()) <= 1e-8);
            assert!(rel(back.v(), wind.v()) <= 1e-8);
            let scale = rms(wind.u()).max(rms(wind.v()));
            let dr = divergence(&parts.rotational().unwrap(), DerivativeMethod::Spectral).unwrap();
            let zd = vorticity(&parts.divergent().unwrap(), DerivativeMethod::Spectral).unwrap();
            assert!(max_abs(dr.values()) <= 1e-8 * scale);
            assert!(max_abs(zd.values()) <= 1e-8 * scale);
        }
    }
}

#[test]
fn constructed_winds_are_pure() {
    for seed in 0..10u64 {
        let n = 32;
        let psi = random_field(seed, n, n, 1.0, &["psi"]);
        let zero = psi.with_values(vec![0.0; n * n]).unwrap();
        let rot = wind_from_potentials(&psi, &zero).unwrap();
        let div = wind_from_potentials(&zero, &psi).unwrap();
        assert!(max_abs(divergence(&rot, DerivativeMethod::Spectral).unwrap().values()) <= 1e-10);
        assert!(max_abs(vorticity(&div, DerivativeMethod::Spectral).unwrap().values()) <= 1e-10);
    }
}

#[test]
fn divergence_spectrum_two_paths_agree() {
    for seed in 0..20u64 {
        let n = [8usize, 16, 32, 15][seed as usize % 4];
        let wind = random_wind(300 + seed, n, 250.0 + seed as f64);
        let direct = psd_plane(
            divergence(&wind, DerivativeMethod::Spectral).unwrap().values(),
            n,
            n,
            wind.dx(),
        );
        let expanded = divergence_power_spectrum(&wind).unwrap();
        assert_close_modewise(expanded.power(), direct.power(), 1e-10, "divergence spectrum");
    }
}

proptest! {
    #[test]
    fn kinetic_energy_is_rotation_invariant(seed in any::<u64>(), theta in -7.0..7.0f64) {
        let wind = random_wind(seed, 6, 1.0);
        let (s, c) = theta.sin_cos();
        let u: Vec<f64> = wind.u().iter().zip(wind.v()).map(|(u, v)| c * u - s * v).collect();
        let v: Vec<f64> = wind.u().iter().zip(wind.v()).map(|(u, v)| s * u + c * v).collect();
        let turned = WindPair::new(u, v, 6, 6, 1.0).unwrap();
        let a = kinetic_energy(&wind).unwrap();
        let b = kinetic_energy(&turned).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }
}
