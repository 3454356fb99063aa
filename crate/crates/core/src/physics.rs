//! Kinetic energy, divergence, vorticity and Helmholtz decomposition of a
//! horizontal wind pair on a periodic grid, plus the spectral diagnostics that
//! compare a prediction against truth.

use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::metrics::{band_gaps, Bands};
use crate::spectral::{
    derivative_plane, derivative_wavenumbers, fft2_real, ifft2, mean_radial, psd_plane,
    Axis, BinScale, PsdGrid, RadialBinning, RadialSpectrum, Spectrum,
};

/// Zonal (`u`, along x/columns) and meridional (`v`, along y/rows) wind on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WindPair {
    u: Vec<f64>,
    v: Vec<f64>,
    height: usize,
    width: usize,
    dx: f64,
}

impl WindPair {
    pub fn new(u: Vec<f64>, v: Vec<f64>, height: usize, width: usize, dx: f64) -> Result<Self> {
        // Reuse the field validation for both components.
        GridField::single(u.clone(), height, width, dx, "u")?;
        GridField::single(v.clone(), height, width, dx, "v")?;
        Ok(Self {
            u,
            v,
            height,
            width,
            dx,
        })
    }

    /// Pairs two fields; both must share one grid.
    pub fn from_fields(u: &GridField, u_channel: usize, v: &GridField, v_channel: usize) -> Result<Self> {
        u.ensure_same_grid(v)?;
        Self::new(
            u.channel(u_channel)?.to_vec(),
            v.channel(v_channel)?.to_vec(),
            u.height(),
            u.width(),
            u.dx(),
        )
    }

    /// Picks the named wind channels out of a multi-channel field.
    pub fn from_named(field: &GridField, u_name: &str, v_name: &str) -> Result<Self> {
        let (iu, iv) = (field.channel_index(u_name)?, field.channel_index(v_name)?);
        Self::from_fields(field, iu, field, iv)
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
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

    pub fn ensure_same_grid(&self, other: &WindPair) -> Result<()> {
        if self.height == other.height && self.width == other.width && self.dx == other.dx {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{}x{} (dx {}) vs {}x{} (dx {})",
                self.height, self.width, self.dx, other.height, other.width, other.dx
            )))
        }
    }

    fn scalar(&self, values: Vec<f64>, name: &str) -> Result<GridField> {
        GridField::single(values, self.height, self.width, self.dx, name)
    }

    fn derivative(&self, plane: &[f64], axis: Axis, method: DerivativeMethod) -> Vec<f64> {
        match method {
            DerivativeMethod::Spectral => derivative_plane(plane, self.height, self.width, self.dx, axis),
            DerivativeMethod::CentralFd => central_difference(plane, self.height, self.width, self.dx, axis),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DerivativeMethod {
    #[default]
    Spectral,
    /// Second-order central differences with periodic wrap.
    CentralFd,
}

impl FromStr for DerivativeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Self::Spectral),
            "fd" | "central_fd" => Ok(Self::CentralFd),
            other => Err(Error::InvalidParameter(format!("unknown derivative method `{other}`"))),
        }
    }
}

pub fn central_difference(plane: &[f64], height: usize, width: usize, dx: f64, axis: Axis) -> Vec<f64> {
    let inv = 0.5 / dx;
    let mut out = vec![0.0; plane.len()];
    for r in 0..height {
        for c in 0..width {
            let (a, b) = match axis {
                Axis::X => (
                    plane[r * width + (c + 1) % width],
                    plane[r * width + (c + width - 1) % width],
                ),
                Axis::Y => (
                    plane[((r + 1) % height) * width + c],
                    plane[((r + height - 1) % height) * width + c],
                ),
            };
            out[r * width + c] = (a - b) * inv;
        }
    }
    out
}

/// `E_h = (u^2 + v^2) / 2`.
pub fn kinetic_energy(w: &WindPair) -> Result<GridField> {
    let e = w.u.iter().zip(&w.v).map(|(u, v)| 0.5 * (u * u + v * v)).collect();
    w.scalar(e, "Eh")
}

/// `delta_h = du/dx + dv/dy`.
pub fn divergence(w: &WindPair, method: DerivativeMethod) -> Result<GridField> {
    let dudx = w.derivative(&w.u, Axis::X, method);
    let dvdy = w.derivative(&w.v, Axis::Y, method);
    w.scalar(dudx.iter().zip(&dvdy).map(|(a, b)| a + b).collect(), "div")
}

/// `zeta_h = dv/dx - du/dy`.
pub fn vorticity(w: &WindPair, method: DerivativeMethod) -> Result<GridField> {
    let dvdx = w.derivative(&w.v, Axis::X, method);
    let dudy = w.derivative(&w.u, Axis::Y, method);
    w.scalar(dvdx.iter().zip(&dudy).map(|(a, b)| a - b).collect(), "vort")
}

/// Rotational, divergent and residual (mean/harmonic) parts of a wind pair.
///
/// The residual holds every mode whose differentiation wavenumber vanishes:
/// the mean flow and, on even axes, the pure-Nyquist modes that neither
/// divergence nor vorticity can see.
#[derive(Debug, Clone, PartialEq)]
pub struct HelmholtzParts {
    pub u_rot: Vec<f64>,
    pub v_rot: Vec<f64>,
    pub u_div: Vec<f64>,
    pub v_div: Vec<f64>,
    pub mean_u: Vec<f64>,
    pub mean_v: Vec<f64>,
    /// Streamfunction, `zeta = laplacian(psi)`, zero mean.
    pub psi: Vec<f64>,
    /// Velocity potential, `delta = laplacian(chi)`, zero mean.
    pub chi: Vec<f64>,
    pub height: usize,
    pub width: usize,
    pub dx: f64,
}

impl HelmholtzParts {
    pub fn rotational(&self) -> Result<WindPair> {
        WindPair::new(self.u_rot.clone(), self.v_rot.clone(), self.height, self.width, self.dx)
    }

    pub fn divergent(&self) -> Result<WindPair> {
        WindPair::new(self.u_div.clone(), self.v_div.clone(), self.height, self.width, self.dx)
    }

    /// Sum of the three parts.
    pub fn reconstruct(&self) -> Result<WindPair> {
        let sum = |a: &[f64], b: &[f64], c: &[f64]| -> Vec<f64> {
            a.iter().zip(b).zip(c).map(|((x, y), z)| x + y + z).collect()
        };
        WindPair::new(
            sum(&self.u_rot, &self.u_div, &self.mean_u),
            sum(&self.v_rot, &self.v_div, &self.mean_v),
            self.height,
            self.width,
            self.dx,
        )
    }
}

/// Solves `laplacian(psi) = zeta` and `laplacian(chi) = delta` in Fourier
/// space and rebuilds the rotational (`-dpsi/dy, dpsi/dx`) and divergent
/// (`dchi/dx, dchi/dy`) winds from them.
pub fn helmholtz_decompose(w: &WindPair) -> Result<HelmholtzParts> {
    let (h, wd) = (w.height, w.width);
    let kx = derivative_wavenumbers(wd, w.dx);
    let ky = derivative_wavenumbers(h, w.dx);
    let uh = fft2_real(&w.u, h, wd);
    let vh = fft2_real(&w.v, h, wd);
    let zero = Complex64::new(0.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let n = h * wd;
    let mut spec = [vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]];
    let mut psi_h = vec![zero; n];
    let mut chi_h = vec![zero; n];
    for r in 0..h {
        for c in 0..wd {
            let idx = r * wd + c;
            let (ax, ay) = (kx[c], ky[r]);
            let k2 = ax * ax + ay * ay;
            let (u, v) = (uh[idx], vh[idx]);
            if k2 == 0.0 {
                spec[4][idx] = u;
                spec[5][idx] = v;
                continue;
            }
            let zeta = i * (ax * v - ay * u);
            let delta = i * (ax * u + ay * v);
            let psi = -zeta / k2;
            let chi = -delta / k2;
            psi_h[idx] = psi;
            chi_h[idx] = chi;
            spec[0][idx] = -i * ay * psi;
            spec[1][idx] = i * ax * psi;
            spec[2][idx] = i * ax * chi;
            spec[3][idx] = i * ay * chi;
        }
    }
    let real = |s: &[Complex64]| -> Vec<f64> { ifft2(s, h, wd).into_iter().map(|c| c.re).collect() };
    Ok(HelmholtzParts {
        u_rot: real(&spec[0]),
        v_rot: real(&spec[1]),
        u_div: real(&spec[2]),
        v_div: real(&spec[3]),
        mean_u: real(&spec[4]),
        mean_v: real(&spec[5]),
        psi: real(&psi_h),
        chi: real(&chi_h),
        height: h,
        width: wd,
        dx: w.dx,
    })
}

/// Divergence power spectrum from the wind spectra:
/// `kx^2 |U|^2 + ky^2 |V|^2 + 2 kx ky Re(U V*)`, normalized like [`PsdGrid`].
pub fn divergence_power_spectrum(w: &WindPair) -> Result<PsdGrid> {
    let (h, wd) = (w.height, w.width);
    let kx = derivative_wavenumbers(wd, w.dx);
    let ky = derivative_wavenumbers(h, w.dx);
    let uh = Spectrum::from_plane(&w.u, h, wd, w.dx);
    let vh = Spectrum::from_plane(&w.v, h, wd, w.dx);
    let norm = 1.0 / (h * wd) as f64 / w.dx;
    let mut power = Vec::with_capacity(h * wd);
    for r in 0..h {
        for c in 0..wd {
            let (u, v) = (uh.coeff(r, c), vh.coeff(r, c));
            let (ax, ay) = (kx[c], ky[r]);
            let p = ax * ax * u.norm_sqr() + ay * ay * v.norm_sqr() + 2.0 * ax * ay * (u * v.conj()).re;
            // The cross term can push an exact zero slightly negative.
            power.push((p * norm).max(0.0));
        }
    }
    PsdGrid::from_power(power, h, wd, w.dx)
}

/// The diagnosed variables, in report order.
pub const DIAGNOSTIC_VARIABLES: [&str; 6] = ["u", "v", "t2m", "Eh", "div", "vort"];

/// Which channels of a field play the roles of u, v and t2m.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRoles {
    pub u: String,
    pub v: String,
    pub t2m: Option<String>,
}

impl Default for ChannelRoles {
    fn default() -> Self {
        Self {
            u: "u10".into(),
            v: "v10".into(),
            t2m: Some("t2m".into()),
        }
    }
}

impl ChannelRoles {
    /// Picks `u10`/`u`, `v10`/`v` and `t2m` when present.
    pub fn detect(field: &GridField) -> Result<Self> {
        let find = |cands: &[&str]| cands.iter().find(|c| field.channel_index(c).is_ok()).map(|c| c.to_string());
        let u = find(&["u10", "u"]).ok_or_else(|| Error::UnknownChannel("u10".into()))?;
        let v = find(&["v10", "v"]).ok_or_else(|| Error::UnknownChannel("v10".into()))?;
        Ok(Self {
            u,
            v,
            t2m: find(&["t2m"]),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsOptions {
    pub method: DerivativeMethod,
    pub n_bins: Option<usize>,
    pub scale: BinScale,
    pub eps: f64,
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        Self {
            method: DerivativeMethod::Spectral,
            n_bins: None,
            scale: BinScale::Log,
            eps: crate::loss::DEFAULT_EPS,
        }
    }
}

/// Truth and prediction radial spectra of one diagnosed variable.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableDiagnostics {
    pub name: String,
    pub truth: RadialSpectrum,
    pub pred: RadialSpectrum,
    /// Mean absolute log-PSD gap per k-quartile band, low to high.
    pub band_gaps: [f64; 4],
    /// Log floor used for this variable. Derivative variables use the base
    /// floor divided by `dx^2` so it stays in their squared units.
    pub eps: f64,
}

impl VariableDiagnostics {
    pub fn top_quartile_gap(&self) -> f64 {
        self.band_gaps[3]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub variables: Vec<VariableDiagnostics>,
    pub samples: usize,
    /// Base log floor; see [`VariableDiagnostics::eps`].
    pub eps: f64,
}

impl DiagnosticsReport {
    pub fn variable(&self, name: &str) -> Option<&VariableDiagnostics> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub const CSV_HEADER: [&'static str; 5] = ["variable", "k_bin", "psd_truth", "psd_pred", "log_gap"];

    /// One row per occupied radial bin; `log_gap = ln(pred + eps) - ln(truth + eps)`.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(Self::CSV_HEADER)?;
        for var in &self.variables {
            for b in (0..var.truth.len()).filter(|&b| var.truth.bin_counts[b] > 0) {
                let (k, pt, pp) = (var.truth.bin_centers[b], var.truth.bin_power[b], var.pred.bin_power[b]);
                let gap = (pp + var.eps).ln() - (pt + var.eps).ln();
                wtr.write_record([
                    var.name.clone(),
                    k.to_string(),
                    pt.to_string(),
                    pp.to_string(),
                    gap.to_string(),
                ])?;
            }
        }
        wtr.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
    }
}

/// Whether a diagnosed variable is a first derivative of the wind.
fn is_derivative(name: &str) -> bool {
    matches!(name, "div" | "vort")
}

/// The derived variables of one field, as named planes.
fn derived_planes(
    field: &GridField,
    roles: &ChannelRoles,
    method: DerivativeMethod,
) -> Result<Vec<(&'static str, Vec<f64>)>> {
    let wind = WindPair::from_named(field, &roles.u, &roles.v)?;
    let mut out = vec![("u", wind.u.clone()), ("v", wind.v.clone())];
    if let Some(t) = &roles.t2m {
        out.push(("t2m", field.channel_by_name(t)?.to_vec()));
    }
    out.push(("Eh", kinetic_energy(&wind)?.into_values()));
    out.push(("div", divergence(&wind, method)?.into_values()));
    out.push(("vort", vorticity(&wind, method)?.into_values()));
    Ok(out)
}

/// Accumulates radial spectra over (truth, prediction) samples; gaps are
/// taken between the dataset-mean spectra.
#[derive(Debug, Clone)]
pub struct DiagnosticsAccumulator {
    roles: ChannelRoles,
    opts: DiagnosticsOptions,
    binning: Option<(usize, usize, f64, RadialBinning)>,
    names: Vec<&'static str>,
    truth: Vec<Vec<RadialSpectrum>>,
    pred: Vec<Vec<RadialSpectrum>>,
}

impl DiagnosticsAccumulator {
    pub fn new(roles: ChannelRoles, opts: DiagnosticsOptions) -> Self {
        Self {
            roles,
            opts,
            binning: None,
            names: Vec::new(),
            truth: Vec::new(),
            pred: Vec::new(),
        }
    }

    pub fn add(&mut self, truth: &GridField, pred: &GridField) -> Result<()> {
        truth.ensure_same_grid(pred)?;
        let (h, w, dx) = (truth.height(), truth.width(), truth.dx());
        match &self.binning {
            Some((bh, bw, bdx, _)) if (*bh, *bw, *bdx) != (h, w, dx) => {
                return Err(Error::GridMismatch(format!(
                    "sample grid {h}x{w} (dx {dx}) differs from earlier samples {bh}x{bw} (dx {bdx})"
                )));
            }
            Some(_) => {}
            None => {
                let bins = self.opts.n_bins.unwrap_or_else(|| crate::spectral::default_bins(h, w));
                self.binning = Some((h, w, dx, RadialBinning::new(h, w, bins, self.opts.scale)?));
            }
        }
        let binning = &self.binning.as_ref().unwrap().3;
        let t = derived_planes(truth, &self.roles, self.opts.method)?;
        let p = derived_planes(pred, &self.roles, self.opts.method)?;
        if self.names.is_empty() {
            self.names = t.iter().map(|(n, _)| *n).collect();
            self.truth = vec![Vec::new(); t.len()];
            self.pred = vec![Vec::new(); t.len()];
        }
        for (i, ((_, tp), (_, pp))) in t.iter().zip(&p).enumerate() {
            self.truth[i].push(binning.apply(psd_plane(tp, h, w, dx).power()));
            self.pred[i].push(binning.apply(psd_plane(pp, h, w, dx).power()));
        }
        Ok(())
    }

    pub fn finish(&self) -> Result<DiagnosticsReport> {
        if self.names.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let dx = self.binning.as_ref().unwrap().2;
        let variables = self
            .names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let truth = mean_radial(&self.truth[i]).unwrap();
                let pred = mean_radial(&self.pred[i]).unwrap();
                let eps = if is_derivative(name) {
                    self.opts.eps / (dx * dx)
                } else {
                    self.opts.eps
                };
                VariableDiagnostics {
                    name: name.to_string(),
                    band_gaps: band_gaps(&truth, &pred, eps, Bands::Quartiles),
                    truth,
                    pred,
                    eps,
                }
            })
            .collect();
        Ok(DiagnosticsReport {
            variables,
            samples: self.truth[0].len(),
            eps: self.opts.eps,
        })
    }
}

/// Diagnostics for a single truth/prediction pair.
pub fn diagnostics_report(
    truth: &GridField,
    pred: &GridField,
    roles: &ChannelRoles,
    opts: &DiagnosticsOptions,
) -> Result<DiagnosticsReport> {
    let mut acc = DiagnosticsAccumulator::new(roles.clone(), opts.clone());
    acc.add(truth, pred)?;
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(h: usize, w: usize, dx: f64, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..h * w)
            .map(|i| f((i % w) as f64 * dx, (i / w) as f64 * dx))
            .collect()
    }

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    #[test]
    fn kinetic_energy_cases() {
        let w = WindPair::new(vec![0.0; 4], vec![0.0; 4], 2, 2, 1.0).unwrap();
        assert!(kinetic_energy(&w).unwrap().values().iter().all(|&e| e == 0.0));
        let w = WindPair::new(vec![3.0; 4], vec![4.0; 4], 2, 2, 1.0).unwrap();
        assert!(kinetic_energy(&w).unwrap().values().iter().all(|&e| e == 12.5));
    }

    #[test]
    fn constant_wind_has_no_div_or_vort() {
        let w = WindPair::new(vec![5.0; 64], vec![-2.0; 64], 8, 8, 1000.0).unwrap();
        for m in [DerivativeMethod::Spectral, DerivativeMethod::CentralFd] {
            assert!(max_abs(divergence(&w, m).unwrap().values()) < 1e-15);
            assert!(max_abs(vorticity(&w, m).unwrap().values()) < 1e-15);
        }
    }

    #[test]
    fn sine_divergence() {
        let (n, dx) = (32, 2500.0);
        let l = n as f64 * dx;
        let k = 2.0 * PI / l;
        let u = grid(n, n, dx, |x, _| (k * x).sin());
        let w = WindPair::new(u, vec![0.0; n * n], n, n, dx).unwrap();
        let d = divergence(&w, DerivativeMethod::Spectral).unwrap();
        let exact = grid(n, n, dx, |x, _| k * (k * x).cos());
        for (a, b) in d.values().iter().zip(&exact) {
            assert!((a - b).abs() < 1e-10 * k);
        }
    }

    #[test]
    fn solid_body_like_vorticity() {
        let (n, dx) = (32, 1.0);
        let l = n as f64 * dx;
        let k = 2.0 * PI / l;
        let u = grid(n, n, dx, |_, y| -(k * y).sin());
        let v = grid(n, n, dx, |x, _| (k * x).sin());
        let w = WindPair::new(u, v, n, n, dx).unwrap();
        let z = vorticity(&w, DerivativeMethod::Spectral).unwrap();
        let exact = grid(n, n, dx, |x, y| k * ((k * x).cos() + (k * y).cos()));
        for (a, b) in z.values().iter().zip(&exact) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn central_fd_converges_at_second_order() {
        let l = 1.0e5;
        let field = |x: f64, y: f64| (2.0 * PI * x / l).sin() * (4.0 * PI * y / l).cos() + (2.0 * PI * y / l).sin();
        let discrepancy = |n: usize| {
            let dx = l / n as f64;
            let u = grid(n, n, dx, field);
            let v = grid(n, n, dx, |x, y| field(y, x));
            let w = WindPair::new(u, v, n, n, dx).unwrap();
            let s = divergence(&w, DerivativeMethod::Spectral).unwrap();
            let f = divergence(&w, DerivativeMethod::CentralFd).unwrap();
            s.values().iter().zip(f.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        };
        for n in [16, 32, 64] {
            let ratio = discrepancy(n) / discrepancy(2 * n);
            assert!((3.5..=4.5).contains(&ratio), "n={n} ratio={ratio}");
        }
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let a = GridField::single(vec![0.0; 16], 4, 4, 1.0, "u").unwrap();
        let b = GridField::single(vec![0.0; 16], 4, 4, 2.0, "v").unwrap();
        assert!(matches!(WindPair::from_fields(&a, 0, &b, 0), Err(Error::GridMismatch(_))));
        let c = GridField::new(vec![0.0; 48], 4, 4, 1.0, vec!["u10".into(), "v10".into(), "t2m".into()]).unwrap();
        let d = GridField::new(vec![0.0; 27], 3, 3, 1.0, vec!["u10".into(), "v10".into(), "t2m".into()]).unwrap();
        assert!(matches!(
            diagnostics_report(&c, &d, &ChannelRoles::default(), &DiagnosticsOptions::default()),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn constant_wind_is_all_mean_flow() {
        let w = WindPair::new(vec![1.5; 64], vec![-0.5; 64], 8, 8, 1.0).unwrap();
        let parts = helmholtz_decompose(&w).unwrap();
        assert!(max_abs(&parts.u_rot) < 1e-14 && max_abs(&parts.u_div) < 1e-14);
        assert!(max_abs(&parts.v_rot) < 1e-14 && max_abs(&parts.v_div) < 1e-14);
        assert!(parts.mean_u.iter().all(|&m| (m - 1.5).abs() < 1e-14));
        assert!(parts.mean_v.iter().all(|&m| (m + 0.5).abs() < 1e-14));
    }

    #[test]
    fn divergence_spectrum_with_zero_v() {
        let n = 16;
        let u = grid(n, n, 1.0, |x, y| (0.3 * x).sin() + (0.7 * y + 0.2 * x).cos());
        let w = WindPair::new(u.clone(), vec![0.0; n * n], n, n, 1.0).unwrap();
        let spec = divergence_power_spectrum(&w).unwrap();
        let pu = psd_plane(&u, n, n, 1.0);
        let kx = derivative_wavenumbers(n, 1.0);
        for r in 0..n {
            for c in 0..n {
                let expect = kx[c] * kx[c] * pu.at(r, c);
                assert!((spec.at(r, c) - expect).abs() <= 1e-10 * expect.max(1e-300) + 1e-14);
            }
        }
        let zero = WindPair::new(vec![0.0; 16], vec![0.0; 16], 4, 4, 1.0).unwrap();
        assert!(divergence_power_spectrum(&zero).unwrap().power().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn identical_prediction_has_zero_gaps() {
        let n = 16;
        let names = vec!["u10".to_string(), "v10".to_string(), "t2m".to_string()];
        let mut values = grid(n, n, 1.0, |x, y| (0.4 * x).sin() * (0.2 * y).cos());
        values.extend(grid(n, n, 1.0, |x, y| (0.9 * y).sin() + 0.1 * x.cos()));
        values.extend(grid(n, n, 1.0, |x, y| 280.0 + (0.1 * x + 0.3 * y).sin()));
        let f = GridField::new(values, n, n, 1.0, names).unwrap();
        let rep = diagnostics_report(&f, &f, &ChannelRoles::detect(&f).unwrap(), &DiagnosticsOptions::default()).unwrap();
        assert_eq!(rep.variables.len(), 6);
        for v in &rep.variables {
            assert_eq!(v.band_gaps, [0.0; 4], "{}", v.name);
        }
        let csv = String::from_utf8(rep.to_csv().unwrap()).unwrap();
        assert!(csv.starts_with("variable,k_bin,psd_truth,psd_pred,log_gap\n"));
    }
}
