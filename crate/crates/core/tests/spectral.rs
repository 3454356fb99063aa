mod common;

use std::f64::consts::PI;

use common::{assert_close_modewise, random_field, rel_l2};
use num_complex::Complex64;
use proptest::prelude::*;
use spectra_core::spectral::{
    derivative_plane, dft2, fft2_real, is_nyquist, psd, psd_plane, signed_freq, wavenumber_grid, Spectrum,
};
use spectra_core::{spectral_derivative, Axis, GridField};

fn naive_dft(plane: &[f64], h: usize, w: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); h * w];
    for kh in 0..h {
        for kw in 0..w {
            let mut acc = Complex64::new(0.0, 0.0);
            for y in 0..h {
                for x in 0..w {
                    let phase = -2.0 * PI * ((kh * y) as f64 / h as f64 + (kw * x) as f64 / w as f64);
                    acc += plane[y * w + x] * Complex64::from_polar(1.0, phase);
                }
            }
            out[kh * w + kw] = acc;
        }
    }
    out
}

fn field_strategy(max: usize) -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (2..=max, 2..=max).prop_flat_map(|(h, w)| (Just(h), Just(w), prop::collection::vec(-5.0..5.0f64, h * w)))
}

proptest! {
    #[test]
    fn fft_matches_naive_dft((h, w, v) in field_strategy(7)) {
        let fast = fft2_real(&v, h, w);
        let slow = naive_dft(&v, h, w);
        let scale = slow.iter().map(|c| c.norm()).fold(1.0, f64::max);
        for (a, b) in fast.iter().zip(&slow) {
            prop_assert!((a - b).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn spectrum_is_hermitian((h, w, v) in field_strategy(9)) {
        let s = Spectrum::from_plane(&v, h, w, 1.0);
        let scale = s.coeffs().iter().map(|c| c.norm()).fold(1.0, f64::max);
        for kh in 0..h {
            for kw in 0..w {
                let a = s.coeff(kh, kw);
                let b = s.coeff((h - kh) % h, (w - kw) % w).conj();
                prop_assert!((a - b).norm() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn derivative_is_linear(
        seed in any::<u64>(),
        a in -3.0..3.0f64,
        b in -3.0..3.0f64,
        n in prop::sample::select(vec![4usize, 6, 8, 9, 16]),
    ) {
        let f = random_field(seed, n, n, 2.5, &["q"]);
        let g = random_field(seed.wrapping_add(1), n, n, 2.5, &["q"]);
        let mix = f.with_values(f.values().iter().zip(g.values()).map(|(x, y)| a * x + b * y).collect()).unwrap();
        for axis in [Axis::X, Axis::Y] {
            let lhs = spectral_derivative(&mix, 0, axis).unwrap();
            let df = spectral_derivative(&f, 0, axis).unwrap();
            let dg = spectral_derivative(&g, 0, axis).unwrap();
            let scale = common::max_abs(lhs.values()).max(1.0);
            for ((l, x), y) in lhs.values().iter().zip(df.values()).zip(dg.values()) {
                prop_assert!((l - (a * x + b * y)).abs() <= 1e-12 * scale);
            }
        }
    }
}

#[test]
fn round_trip_and_parseval_all_sizes() {
    for (i, n) in [4usize, 8, 16, 32, 64].into_iter().enumerate() {
        for rep in 0..10u64 {
            let f = random_field(100 * i as u64 + rep, n, n, 1.0, &["q"]);
            let s = dft2(&f, 0).unwrap();
            let back = s.inverse();
            assert!(rel_l2(&back, f.values()) <= 1e-12, "round trip n={n}");
            let energy: f64 = s.coeffs().iter().map(|c| c.norm_sqr()).sum();
            let cells: f64 = f.values().iter().map(|x| x * x).sum::<f64>() * (n * n) as f64;
            assert!((energy - cells).abs() <= 1e-10 * cells, "parseval n={n}");
        }
    }
}

#[test]
fn round_trip_rectangular_and_odd() {
    for (h, w) in [(5usize, 7usize), (6, 10), (3, 2), (12, 9)] {
        let f = random_field((h * 31 + w) as u64, h, w, 1.0, &["q"]);
        let back = dft2(&f, 0).unwrap().inverse();
        assert!(rel_l2(&back, f.values()) <= 1e-12);
    }
}

/// PSD of the x-derivative equals `kx^2` times the PSD, and the gradient
/// PSD equals `kappa^2` times the PSD, at every non-Nyquist mode.
#[test]
fn derivative_spectrum_identities() {
    for seed in 0..50u64 {
        let n = [8usize, 16, 32][seed as usize % 3];
        let dx = 0.5 + seed as f64 * 0.1;
        let f = random_field(seed, n, n, dx, &["q"]);
        let p = psd(&f, 0).unwrap();
        let qx = derivative_plane(f.values(), n, n, dx, Axis::X);
        let qy = derivative_plane(f.values(), n, n, dx, Axis::Y);
        let px = psd_plane(&qx, n, n, dx);
        let py = psd_plane(&qy, n, n, dx);
        let grid = wavenumber_grid(n, n, dx).unwrap();
        let (mut ax, mut ex, mut ag, mut eg) = (vec![], vec![], vec![], vec![]);
        for kh in 0..n {
            for kw in 0..n {
                let i = kh * n + kw;
                if !is_nyquist(kw, n) {
                    ax.push(px.at(kh, kw));
                    ex.push(grid.kappa_x[i].powi(2) * p.at(kh, kw));
                }
                if !is_nyquist(kw, n) && !is_nyquist(kh, n) {
                    ag.push(px.at(kh, kw) + py.at(kh, kw));
                    eg.push(grid.kappa[i].powi(2) * p.at(kh, kw));
                }
            }
        }
        assert_close_modewise(&ax, &ex, 1e-10, "x-derivative PSD");
        assert_close_modewise(&ag, &eg, 1e-10, "gradient PSD");
    }
}

#[test]
fn signed_frequencies_cover_symmetric_range() {
    for n in [4usize, 5, 8, 9] {
        let mut s: Vec<i64> = (0..n).map(|k| signed_freq(k, n)).collect();
        s.sort();
        let lo = -(n as i64 / 2);
        assert_eq!(s, (lo..lo + n as i64).collect::<Vec<_>>());
    }
}

#[test]
fn derivative_of_plane_wave() {
    let (n, dx) = (32usize, 3.0);
    let len = n as f64 * dx;
    let vals: Vec<f64> = (0..n * n)
        .map(|i| {
            let (y, x) = ((i / n) as f64 * dx, (i % n) as f64 * dx);
            (2.0 * PI * (3.0 * x + 5.0 * y) / len).sin()
        })
        .collect();
    let f = GridField::single(vals, n, n, dx, "q").unwrap();
    let dfx = spectral_derivative(&f, 0, Axis::X).unwrap();
    for i in 0..n * n {
        let (y, x) = ((i / n) as f64 * dx, (i % n) as f64 * dx);
        let expect = 2.0 * PI * 3.0 / len * (2.0 * PI * (3.0 * x + 5.0 * y) / len).cos();
        assert!((dfx.values()[i] - expect).abs() < 1e-12);
    }
}
