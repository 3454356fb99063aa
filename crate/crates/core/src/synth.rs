//! Synthetic atmospheric-like fields with prescribed power-law spectra and
//! known Helmholtz structure, and the paired coarse/fine datasets built from
//! them.
//!
//! Spectral slopes refer to the per-mode PSD averaged over annuli, so a field
//! with slope `alpha` has radial spectrum `~ k^-alpha`. Winds are built from a
//! streamfunction and a velocity potential with slope `alpha + 2`, which
//! differentiation turns back into `alpha` for `u` and `v`.
//!
//! Every random draw comes from a ChaCha8 generator keyed by the dataset seed
//! with one stream per (sample, variable), so outputs are identical across
//! platforms and independent of generation order.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{block_average_downsample, FieldPair, GridField};
use crate::grd;
use crate::physics::WindPair;
use crate::spectral::{derivative_plane, derivative_wavenumbers, fft2_real, ifft2, k_index_grid, Axis};

/// Output channel names, in order.
pub const CHANNELS: [&str; 3] = ["u10", "v10", "t2m"];

const STREAM_PSI: u64 = 0;
const STREAM_CHI: u64 = 1;
const STREAM_T2M: u64 = 2;
const STREAM_SCALAR: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub height: usize,
    pub width: usize,
    /// Fine-grid spacing in meters.
    pub dx: f64,
    /// Target radial slope of the wind spectra.
    pub alpha: f64,
    /// Fraction of kinetic energy in the rotational component.
    pub rot_frac: f64,
    pub seed: u64,
    pub region_tag: String,
    /// Expected standard deviation of each wind component.
    pub wind_std: f64,
    /// Expected standard deviation of t2m anomalies.
    pub t2m_std: f64,
    /// Constant carried by the DC mode of t2m (winds have zero mean).
    pub t2m_mean: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            dx: 5500.0,
            alpha: 5.0 / 3.0,
            rot_frac: 0.7,
            seed: 0,
            region_tag: "central".into(),
            wind_std: 1.0,
            t2m_std: 1.0,
            t2m_mean: 0.0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height < 2 || self.width < 2 {
            return Err(Error::DegenerateGrid {
                height: self.height,
                width: self.width,
            });
        }
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return Err(Error::InvalidSpacing(self.dx));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.rot_frac) {
            return Err(Error::InvalidParameter(format!("rot_frac must be in [0, 1], got {}", self.rot_frac)));
        }
        if !(self.wind_std >= 0.0 && self.t2m_std >= 0.0 && self.t2m_mean.is_finite()) {
            return Err(Error::InvalidParameter("standard deviations must be >= 0".into()));
        }
        Ok(())
    }
}

/// Random generator for one (seed, sample, variable) stream.
pub fn stream_rng(seed: u64, sample: u64, variable: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((sample << 2) | variable);
    rng
}

/// Isotropic amplitude filter `k^(-slope/2)`, zero at DC, scaled so that
/// filtered unit white noise has expected mean square `target_var`, either of
/// the field itself or (with `gradient`) of its gradient magnitude.
fn power_law_filter(height: usize, width: usize, dx: f64, slope: f64, gradient: bool, target_var: f64) -> Vec<f64> {
    let k = k_index_grid(height, width);
    let mut f: Vec<f64> = k
        .iter()
        .map(|&kk| if kk == 0.0 { 0.0 } else { kk.powf(-slope / 2.0) })
        .collect();
    let kx = derivative_wavenumbers(width, dx);
    let ky = derivative_wavenumbers(height, dx);
    let n = (height * width) as f64;
    let mut var = 0.0;
    for r in 0..height {
        for c in 0..width {
            let a = f[r * width + c];
            let gain = if gradient { kx[c] * kx[c] + ky[r] * ky[r] } else { 1.0 };
            var += gain * a * a;
        }
    }
    var /= n;
    let scale = if var > 0.0 { (target_var / var).sqrt() } else { 0.0 };
    f.iter_mut().for_each(|a| *a *= scale);
    f
}

/// Filters white noise from `rng` with `filter`; the result is real by symmetry of the filter.
fn filtered_noise(rng: &mut ChaCha8Rng, height: usize, width: usize, filter: &[f64]) -> Vec<f64> {
    let noise: Vec<f64> = (0..height * width).map(|_| StandardNormal.sample(rng)).collect();
    let spec: Vec<Complex64> = fft2_real(&noise, height, width)
        .into_iter()
        .zip(filter)
        .map(|(c, f)| c * *f)
        .collect();
    ifft2(&spec, height, width).into_iter().map(|c| c.re).collect()
}

/// A single-channel Gaussian random field with radial spectrum `~ k^-alpha`,
/// unit expected variance and the DC mode pinned to zero.
pub fn gaussian_random_field(spec: &SynthSpec) -> Result<GridField> {
    spec.validate()?;
    let filter = power_law_filter(spec.height, spec.width, spec.dx, spec.alpha, false, 1.0);
    let mut rng = stream_rng(spec.seed, 0, STREAM_SCALAR);
    let plane = filtered_noise(&mut rng, spec.height, spec.width, &filter);
    GridField::single(plane, spec.height, spec.width, spec.dx, "q")
}

/// `u = -dpsi/dy + dchi/dx`, `v = dpsi/dx + dchi/dy` (spectral derivatives).
pub fn wind_from_potentials(psi: &GridField, chi: &GridField) -> Result<WindPair> {
    psi.ensure_same_grid(chi)?;
    let (h, w, dx) = (psi.height(), psi.width(), psi.dx());
    let (p, c) = (psi.channel(0)?, chi.channel(0)?);
    let dpdx = derivative_plane(p, h, w, dx, Axis::X);
    let dpdy = derivative_plane(p, h, w, dx, Axis::Y);
    let dcdx = derivative_plane(c, h, w, dx, Axis::X);
    let dcdy = derivative_plane(c, h, w, dx, Axis::Y);
    let u = dpdy.iter().zip(&dcdx).map(|(a, b)| -a + b).collect();
    let v = dpdx.iter().zip(&dcdy).map(|(a, b)| a + b).collect();
    WindPair::new(u, v, h, w, dx)
}

/// Streamfunction and velocity potential for one sample, scaled so the
/// expected wind variance is `wind_std^2` per component, split by `rot_frac`.
pub fn sample_potentials(spec: &SynthSpec, sample: u64) -> Result<(GridField, GridField)> {
    spec.validate()?;
    let (h, w, dx) = (spec.height, spec.width, spec.dx);
    // Mean of u^2 + v^2 equals the mean squared potential gradient.
    let filter = power_law_filter(h, w, dx, spec.alpha + 2.0, true, 2.0 * spec.wind_std * spec.wind_std);
    let psi_scale = spec.rot_frac.sqrt();
    let chi_scale = (1.0 - spec.rot_frac).sqrt();
    let mut psi = filtered_noise(&mut stream_rng(spec.seed, sample, STREAM_PSI), h, w, &filter);
    let mut chi = filtered_noise(&mut stream_rng(spec.seed, sample, STREAM_CHI), h, w, &filter);
    psi.iter_mut().for_each(|v| *v *= psi_scale);
    chi.iter_mut().for_each(|v| *v *= chi_scale);
    Ok((
        GridField::single(psi, h, w, dx, "psi")?,
        GridField::single(chi, h, w, dx, "chi")?,
    ))
}

/// Fine-resolution truth `(u10, v10, t2m)` for one sample index.
pub fn sample_truth(spec: &SynthSpec, sample: u64) -> Result<GridField> {
    let (psi, chi) = sample_potentials(spec, sample)?;
    let wind = wind_from_potentials(&psi, &chi)?;
    let (h, w, dx) = (spec.height, spec.width, spec.dx);
    let filter = power_law_filter(h, w, dx, spec.alpha + 1.0, false, spec.t2m_std * spec.t2m_std);
    let mut t2m = filtered_noise(&mut stream_rng(spec.seed, sample, STREAM_T2M), h, w, &filter);
    t2m.iter_mut().for_each(|v| *v += spec.t2m_mean);
    GridField::from_channels(
        vec![
            (CHANNELS[0].into(), wind.u().to_vec()),
            (CHANNELS[1].into(), wind.v().to_vec()),
            (CHANNELS[2].into(), t2m),
        ],
        h,
        w,
        dx,
    )
}

/// `n_samples` (coarse, fine) pairs; sample `i` uses streams keyed by `(spec.seed, i)`.
pub fn make_dataset(spec: &SynthSpec, n_samples: usize, factor: usize) -> Result<Vec<FieldPair>> {
    spec.validate()?;
    if factor == 0 || spec.height % factor != 0 || spec.width % factor != 0 {
        return Err(Error::NotDivisible {
            height: spec.height,
            width: spec.width,
            factor,
        });
    }
    (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let target = sample_truth(spec, i)?;
            let input = block_average_downsample(&target, factor)?;
            FieldPair::new(input, target)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub input_path: String,
    pub target_path: String,
    pub seed: u64,
    pub region_tag: String,
}

pub const MANIFEST_NAME: &str = "manifest.csv";

/// Writes `pair_XXXX.{input,target}.grd` and `manifest.csv` into `dir`.
pub fn write_dataset(dir: &Path, pairs: &[FieldPair], spec: &SynthSpec) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    // An empty dataset still gets a header.
    wtr.write_record(["index", "input_path", "target_path", "seed", "region_tag"])?;
    for (i, pair) in pairs.iter().enumerate() {
        let input = format!("pair_{i:04}.input.grd");
        let target = format!("pair_{i:04}.target.grd");
        grd::write(dir.join(&input), &pair.input)?;
        grd::write(dir.join(&target), &pair.target)?;
        wtr.serialize(ManifestEntry {
            index: i,
            input_path: input,
            target_path: target,
            seed: spec.seed,
            region_tag: spec.region_tag.clone(),
        })?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
    let manifest = dir.join(MANIFEST_NAME);
    grd::write_atomic(&manifest, &bytes)?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    rdr.deserialize()
        .map(|r| r.map_err(|e: csv::Error| Error::format(path, e.to_string())))
        .collect()
}

/// Loads every pair listed in a manifest; paths are relative to the manifest.
pub fn load_dataset(manifest: &Path) -> Result<Vec<FieldPair>> {
    let base = manifest.parent().unwrap_or(Path::new("."));
    read_manifest(manifest)?
        .iter()
        .map(|e| {
            let input = grd::read(base.join(&e.input_path))?;
            let target = grd::read(base.join(&e.target_path))?;
            FieldPair::new(input, target).map_err(|err| Error::format(base.join(&e.target_path), err.to_string()))
        })
        .collect()
}
