//! 2D Fourier machinery: DFT, periodogram PSD, wavenumber grids, spectral
//! derivatives and radial binning.
//!
//! Conventions:
//!
//! * The forward DFT is unnormalized, `F(k) = sum_n q(n) exp(-2 pi i k.n / N)`;
//!   the inverse carries the `1/(H W)` factor.
//! * Mode index `k` along an axis of length `N` maps to the signed frequency
//!   `s(k)` in `[-N/2, N/2)`. Physical wavenumbers are
//!   `kappa_x = 2 pi s(k_w) / (W dx)` and `kappa_y = 2 pi s(k_h) / (H dx)`,
//!   and the dimensionless isotropic index is `sqrt(s(k_h)^2 + s(k_w)^2)`.
//! * Spectral derivatives use `i kappa` with the Nyquist wavenumber of an
//!   even-length axis set to zero, so derivatives of real fields stay real.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::field::GridField;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Inverse,
}

fn transpose(src: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = src[r * cols + c];
        }
    }
    out
}

/// Unnormalized in-place 2D transform of a row-major `height x width` buffer.
fn fft2_in_place(buf: &mut Vec<Complex64>, height: usize, width: usize, dir: Direction) {
    PLANNER.with(|planner| {
        let mut planner = planner.borrow_mut();
        let (row_fft, col_fft) = match dir {
            Direction::Forward => (planner.plan_fft_forward(width), planner.plan_fft_forward(height)),
            Direction::Inverse => (planner.plan_fft_inverse(width), planner.plan_fft_inverse(height)),
        };
        row_fft.process(buf);
        let mut t = transpose(buf, height, width);
        col_fft.process(&mut t);
        *buf = transpose(&t, width, height);
    });
}

/// Forward DFT of a real plane.
pub fn fft2_real(plane: &[f64], height: usize, width: usize) -> Vec<Complex64> {
    assert_eq!(plane.len(), height * width);
    let mut buf: Vec<Complex64> = plane.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2_in_place(&mut buf, height, width, Direction::Forward);
    buf
}

/// Forward DFT of a complex plane.
pub fn fft2(coeffs: &[Complex64], height: usize, width: usize) -> Vec<Complex64> {
    let mut buf = coeffs.to_vec();
    fft2_in_place(&mut buf, height, width, Direction::Forward);
    buf
}

/// Normalized inverse DFT, `1/(H W) sum_k F(k) exp(+2 pi i k.n / N)`.
pub fn ifft2(coeffs: &[Complex64], height: usize, width: usize) -> Vec<Complex64> {
    assert_eq!(coeffs.len(), height * width);
    let mut buf = coeffs.to_vec();
    fft2_in_place(&mut buf, height, width, Direction::Inverse);
    let norm = 1.0 / (height * width) as f64;
    buf.iter_mut().for_each(|c| *c *= norm);
    buf
}

/// Signed frequency of mode `k` on an axis of length `n`, in `[-n/2, n/2)`.
pub fn signed_freq(k: usize, n: usize) -> i64 {
    if k >= n.div_ceil(2) {
        k as i64 - n as i64
    } else {
        k as i64
    }
}

/// True for the unpaired Nyquist mode of an even-length axis.
pub fn is_nyquist(k: usize, n: usize) -> bool {
    n % 2 == 0 && k == n / 2
}

/// Physical wavenumbers `2 pi s(k) / (n dx)` along one axis.
pub fn axis_wavenumbers(n: usize, dx: f64) -> Vec<f64> {
    let length = n as f64 * dx;
    (0..n)
        .map(|k| 2.0 * PI * signed_freq(k, n) as f64 / length)
        .collect()
}

/// Axis wavenumbers used for differentiation: Nyquist entry zeroed.
pub fn derivative_wavenumbers(n: usize, dx: f64) -> Vec<f64> {
    let mut kappa = axis_wavenumbers(n, dx);
    if n % 2 == 0 {
        kappa[n / 2] = 0.0;
    }
    kappa
}

/// Fourier coefficients of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    coeffs: Vec<Complex64>,
    height: usize,
    width: usize,
    dx: f64,
}

impl Spectrum {
    pub fn from_plane(plane: &[f64], height: usize, width: usize, dx: f64) -> Self {
        Self {
            coeffs: fft2_real(plane, height, width),
            height,
            width,
            dx,
        }
    }

    pub fn from_coeffs(coeffs: Vec<Complex64>, height: usize, width: usize, dx: f64) -> Self {
        assert_eq!(coeffs.len(), height * width);
        Self {
            coeffs,
            height,
            width,
            dx,
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn coeff(&self, kh: usize, kw: usize) -> Complex64 {
        self.coeffs[kh * self.width + kw]
    }

    /// Inverse transform, returning the full complex result.
    pub fn inverse_complex(&self) -> Vec<Complex64> {
        ifft2(&self.coeffs, self.height, self.width)
    }

    /// Inverse transform with the imaginary part discarded.
    pub fn inverse(&self) -> Vec<f64> {
        self.inverse_complex().into_iter().map(|c| c.re).collect()
    }

    /// Multiplies by `i kappa_axis` (Nyquist zeroed).
    pub fn differentiate(&self, axis: Axis) -> Spectrum {
        let (h, w) = (self.height, self.width);
        let kx = derivative_wavenumbers(w, self.dx);
        let ky = derivative_wavenumbers(h, self.dx);
        let mut coeffs = self.coeffs.clone();
        for kh in 0..h {
            for kw in 0..w {
                let kappa = match axis {
                    Axis::X => kx[kw],
                    Axis::Y => ky[kh],
                };
                let c = &mut coeffs[kh * w + kw];
                *c = Complex64::new(-kappa * c.im, kappa * c.re);
            }
        }
        Spectrum::from_coeffs(coeffs, h, w, self.dx)
    }
}

/// Forward DFT of one channel of `field`.
pub fn dft2(field: &GridField, channel: usize) -> Result<Spectrum> {
    let plane = field.channel(channel)?;
    Ok(Spectrum::from_plane(
        plane,
        field.height(),
        field.width(),
        field.dx(),
    ))
}

/// Per-mode power `|F(k)|^2 / (H W dx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdGrid {
    power: Vec<f64>,
    height: usize,
    width: usize,
    dx: f64,
}

impl PsdGrid {
    pub fn from_spectrum(spec: &Spectrum) -> Self {
        let norm = 1.0 / (spec.height * spec.width) as f64 / spec.dx;
        Self {
            power: spec.coeffs.iter().map(|c| c.norm_sqr() * norm).collect(),
            height: spec.height,
            width: spec.width,
            dx: spec.dx,
        }
    }

    /// Wraps precomputed power values; rejects negative or non-finite entries.
    pub fn from_power(power: Vec<f64>, height: usize, width: usize, dx: f64) -> Result<Self> {
        if power.len() != height * width {
            return Err(Error::DimensionMismatch {
                expected: height * width,
                actual: power.len(),
            });
        }
        if let Some(index) = power.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::NonFiniteValue { index });
        }
        Ok(Self {
            power,
            height,
            width,
            dx,
        })
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    pub fn at(&self, kh: usize, kw: usize) -> f64 {
        self.power[kh * self.width + kw]
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }
}

pub fn psd(field: &GridField, channel: usize) -> Result<PsdGrid> {
    Ok(PsdGrid::from_spectrum(&dft2(field, channel)?))
}

/// Periodogram of a bare plane.
pub fn psd_plane(plane: &[f64], height: usize, width: usize, dx: f64) -> PsdGrid {
    PsdGrid::from_spectrum(&Spectrum::from_plane(plane, height, width, dx))
}

/// Physical and dimensionless wavenumbers for every mode of an `H x W` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WavenumberGrid {
    pub height: usize,
    pub width: usize,
    pub dx: f64,
    /// rad/m, along columns.
    pub kappa_x: Vec<f64>,
    /// rad/m, along rows.
    pub kappa_y: Vec<f64>,
    pub kappa: Vec<f64>,
    /// `sqrt(s(k_h)^2 + s(k_w)^2)`, dimensionless.
    pub k_index: Vec<f64>,
}

impl WavenumberGrid {
    pub fn k_max(&self) -> f64 {
        self.k_index.iter().copied().fold(0.0, f64::max)
    }
}

pub fn wavenumber_grid(height: usize, width: usize, dx: f64) -> Result<WavenumberGrid> {
    if height < 2 || width < 2 {
        return Err(Error::DegenerateGrid { height, width });
    }
    if !(dx > 0.0 && dx.is_finite()) {
        return Err(Error::InvalidSpacing(dx));
    }
    let ax = axis_wavenumbers(width, dx);
    let ay = axis_wavenumbers(height, dx);
    let n = height * width;
    let mut grid = WavenumberGrid {
        height,
        width,
        dx,
        kappa_x: Vec::with_capacity(n),
        kappa_y: Vec::with_capacity(n),
        kappa: Vec::with_capacity(n),
        k_index: Vec::with_capacity(n),
    };
    for kh in 0..height {
        let sh = signed_freq(kh, height) as f64;
        for kw in 0..width {
            let sw = signed_freq(kw, width) as f64;
            grid.kappa_x.push(ax[kw]);
            grid.kappa_y.push(ay[kh]);
            grid.kappa.push(ax[kw].hypot(ay[kh]));
            grid.k_index.push(sh.hypot(sw));
        }
    }
    Ok(grid)
}

/// Dimensionless isotropic index per mode without the physical grids.
pub fn k_index_grid(height: usize, width: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(height * width);
    for kh in 0..height {
        let sh = signed_freq(kh, height) as f64;
        for kw in 0..width {
            out.push(sh.hypot(signed_freq(kw, width) as f64));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Zonal, along columns.
    X,
    /// Meridional, along rows.
    Y,
}

/// `d/dx` or `d/dy` of a real plane via `i kappa`.
pub fn derivative_plane(plane: &[f64], height: usize, width: usize, dx: f64, axis: Axis) -> Vec<f64> {
    let spec = Spectrum::from_plane(plane, height, width, dx).differentiate(axis);
    let out = spec.inverse_complex();
    debug_assert!({
        let re = out.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
        let im = out.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
        im <= 1e-10 * re.max(f64::MIN_POSITIVE) || im < 1e-300
    });
    out.into_iter().map(|c| c.re).collect()
}

/// Spectral derivative of one channel, returned as a single-channel field.
pub fn spectral_derivative(field: &GridField, channel: usize, axis: Axis) -> Result<GridField> {
    let plane = field.channel(channel)?;
    let d = derivative_plane(plane, field.height(), field.width(), field.dx(), axis);
    let name = format!(
        "d{}/d{}",
        field.channel_names()[channel],
        match axis {
            Axis::X => "x",
            Axis::Y => "y",
        }
    );
    GridField::single(d, field.height(), field.width(), field.dx(), &name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BinScale {
    Linear,
    #[default]
    Log,
}

impl FromStr for BinScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(BinScale::Linear),
            "log" => Ok(BinScale::Log),
            other => Err(Error::InvalidParameter(format!("unknown bin scale `{other}`"))),
        }
    }
}

/// Isotropically binned PSD. Empty annuli have zero count and zero power.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSpectrum {
    pub bin_centers: Vec<f64>,
    pub bin_power: Vec<f64>,
    pub bin_counts: Vec<usize>,
}

impl RadialSpectrum {
    pub fn len(&self) -> usize {
        self.bin_centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bin_centers.is_empty()
    }

    /// `(center, power, count)` for annuli that contain at least one mode.
    pub fn occupied(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        (0..self.len())
            .filter(|&i| self.bin_counts[i] > 0)
            .map(|i| (self.bin_centers[i], self.bin_power[i], self.bin_counts[i]))
    }
}

/// Default bin count: half the smaller grid dimension.
pub fn default_bins(height: usize, width: usize) -> usize {
    (height.min(width) / 2).max(2)
}

/// Annulus assignment for every mode (`None` for DC), plus bin centers.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialBinning {
    pub assignment: Vec<Option<usize>>,
    pub centers: Vec<f64>,
    pub counts: Vec<usize>,
}

impl RadialBinning {
    pub fn new(height: usize, width: usize, n_bins: usize, scale: BinScale) -> Result<Self> {
        if n_bins < 2 {
            return Err(Error::TooFewBins(n_bins));
        }
        let k = k_index_grid(height, width);
        let k_max = k.iter().copied().fold(0.0, f64::max);
        let k_min = 1.0;
        let nb = n_bins as f64;
        let (centers, edges): (Vec<f64>, Vec<f64>) = match scale {
            BinScale::Linear => (
                (0..n_bins).map(|i| (i as f64 + 0.5) * k_max / nb).collect(),
                (0..=n_bins).map(|i| i as f64 * k_max / nb).collect(),
            ),
            BinScale::Log => {
                let ratio = k_max / k_min;
                (
                    (0..n_bins).map(|i| k_min * ratio.powf((i as f64 + 0.5) / nb)).collect(),
                    (0..=n_bins).map(|i| k_min * ratio.powf(i as f64 / nb)).collect(),
                )
            }
        };
        let mut counts = vec![0usize; n_bins];
        let assignment = k
            .iter()
            .map(|&kk| {
                if kk == 0.0 {
                    return None;
                }
                let raw = match scale {
                    BinScale::Linear => (kk * nb / k_max).ceil() as isize - 1,
                    BinScale::Log => ((kk / k_min).ln() / (k_max / k_min).ln() * nb).floor() as isize,
                };
                let mut b = raw.clamp(0, n_bins as isize - 1) as usize;
                // Guard the floating-point edge placement.
                while b > 0 && kk < edges[b] && matches!(scale, BinScale::Log) {
                    b -= 1;
                }
                counts[b] += 1;
                Some(b)
            })
            .collect();
        Ok(Self {
            assignment,
            centers,
            counts,
        })
    }

    pub fn apply(&self, power: &[f64]) -> RadialSpectrum {
        assert_eq!(power.len(), self.assignment.len());
        let mut sums = vec![0.0; self.centers.len()];
        for (p, a) in power.iter().zip(&self.assignment) {
            if let Some(b) = a {
                sums[*b] += p;
            }
        }
        let bin_power = sums
            .iter()
            .zip(&self.counts)
            .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
            .collect();
        RadialSpectrum {
            bin_centers: self.centers.clone(),
            bin_power,
            bin_counts: self.counts.clone(),
        }
    }
}

pub fn radial_bin(psd_grid: &PsdGrid, n_bins: usize, scale: BinScale) -> Result<RadialSpectrum> {
    let binning = RadialBinning::new(psd_grid.height(), psd_grid.width(), n_bins, scale)?;
    Ok(binning.apply(psd_grid.power()))
}

/// Bin-wise arithmetic mean of spectra that share a binning.
pub fn mean_radial(spectra: &[RadialSpectrum]) -> Option<RadialSpectrum> {
    let first = spectra.first()?;
    let mut power = vec![0.0; first.len()];
    for s in spectra {
        assert_eq!(s.bin_counts, first.bin_counts, "spectra use different binnings");
        power.iter_mut().zip(&s.bin_power).for_each(|(a, b)| *a += b);
    }
    let n = spectra.len() as f64;
    power.iter_mut().for_each(|p| *p /= n);
    Some(RadialSpectrum {
        bin_centers: first.bin_centers.clone(),
        bin_power: power,
        bin_counts: first.bin_counts.clone(),
    })
}
