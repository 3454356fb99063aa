//! Pixel-space and probabilistic verification metrics.
//!
//! All scores pool uniformly over grid cells (no area weighting).

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::spectral::{default_bins, psd_plane, BinScale, RadialBinning, RadialSpectrum};

/// Members of a probabilistic prediction; all share one grid and channel layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<GridField>,
}

impl Ensemble {
    pub fn new(members: Vec<GridField>) -> Result<Self> {
        let first = members.first().ok_or(Error::EmptyEnsemble)?;
        for m in &members[1..] {
            first.ensure_same_layout(m)?;
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[GridField] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Member-wise mean field.
    pub fn mean(&self) -> GridField {
        let n = self.members.len() as f64;
        let mut acc = vec![0.0; self.members[0].values().len()];
        for m in &self.members {
            acc.iter_mut().zip(m.values()).for_each(|(a, v)| *a += v);
        }
        acc.iter_mut().for_each(|a| *a /= n);
        self.members[0].with_values(acc).expect("mean of finite fields is finite")
    }
}

fn per_channel(pred: &GridField, truth: &GridField, cell: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
    pred.ensure_same_grid(truth)?;
    if pred.channel_count() != truth.channel_count() {
        return Err(Error::GridMismatch(format!(
            "{} vs {} channels",
            pred.channel_count(),
            truth.channel_count()
        )));
    }
    let n = pred.plane_len();
    Ok(pred
        .values()
        .chunks_exact(n)
        .zip(truth.values().chunks_exact(n))
        .map(|(p, t)| p.iter().zip(t).map(|(&a, &b)| cell(a, b)).sum::<f64>() / n as f64)
        .collect())
}

pub fn mae(pred: &GridField, truth: &GridField) -> Result<Vec<f64>> {
    per_channel(pred, truth, |p, t| (p - t).abs())
}

pub fn rmse(pred: &GridField, truth: &GridField) -> Result<Vec<f64>> {
    Ok(per_channel(pred, truth, |p, t| (p - t) * (p - t))?
        .into_iter()
        .map(f64::sqrt)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrpsEstimator {
    /// Spread term divided by `2 M^2`.
    Standard,
    /// Spread term divided by `2 M (M - 1)`; needs `M >= 2`.
    Fair,
}

impl CrpsEstimator {
    /// Fair for real ensembles, standard for a single member.
    pub fn default_for(members: usize) -> Self {
        if members >= 2 {
            Self::Fair
        } else {
            Self::Standard
        }
    }
}

impl FromStr for CrpsEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Self::Standard),
            "fair" => Ok(Self::Fair),
            other => Err(Error::InvalidParameter(format!("unknown CRPS estimator `{other}`"))),
        }
    }
}

/// Sum over all ordered pairs of `|x_i - x_j|`; sorts `members` in place.
fn pairwise_abs_sum(members: &mut [f64]) -> f64 {
    members.sort_by(f64::total_cmp);
    let m = members.len();
    // Each gap between neighbours is crossed by (k + 1) * (m - k - 1) pairs.
    let half: f64 = members
        .windows(2)
        .enumerate()
        .map(|(k, w)| (w[1] - w[0]) * ((k + 1) * (m - k - 1)) as f64)
        .sum();
    2.0 * half
}

/// CRPS of a scalar ensemble against one observation.
pub fn crps_scalar(members: &[f64], obs: f64, estimator: CrpsEstimator) -> Result<f64> {
    let m = members.len();
    if m == 0 {
        return Err(Error::EmptyEnsemble);
    }
    if estimator == CrpsEstimator::Fair && m < 2 {
        return Err(Error::FairEstimatorNeedsTwoMembers);
    }
    let skill = members.iter().map(|x| (x - obs).abs()).sum::<f64>() / m as f64;
    if m == 1 {
        return Ok(skill);
    }
    let mut sorted = members.to_vec();
    let spread = pairwise_abs_sum(&mut sorted);
    let mf = m as f64;
    let denom = match estimator {
        CrpsEstimator::Standard => 2.0 * mf * mf,
        CrpsEstimator::Fair => 2.0 * mf * (mf - 1.0),
    };
    Ok(skill - spread / denom)
}

/// Cell-averaged CRPS per channel.
pub fn crps(ensemble: &Ensemble, truth: &GridField, estimator: CrpsEstimator) -> Result<Vec<f64>> {
    let members = ensemble.members();
    members[0].ensure_same_grid(truth)?;
    if members[0].channel_count() != truth.channel_count() {
        return Err(Error::GridMismatch("channel count differs".into()));
    }
    if estimator == CrpsEstimator::Fair && members.len() < 2 {
        return Err(Error::FairEstimatorNeedsTwoMembers);
    }
    let n = truth.plane_len();
    let mut buf = vec![0.0; members.len()];
    let mut out = Vec::with_capacity(truth.channel_count());
    for (c, t) in truth.values().chunks_exact(n).enumerate() {
        let mut sum = 0.0;
        for (i, &obs) in t.iter().enumerate() {
            for (b, m) in buf.iter_mut().zip(members) {
                *b = m.values()[c * n + i];
            }
            sum += crps_scalar(&buf, obs, estimator)?;
        }
        out.push(sum / n as f64);
    }
    Ok(out)
}

/// How radial bins are grouped into bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bands {
    /// Occupied bins split, in order of increasing k, into four consecutive
    /// groups of near-equal size.
    Quartiles,
}

/// Ranks `[lo, hi)` of band `q` out of four over `n` occupied bins; never empty for `n >= 1`.
fn quartile_range(q: usize, n: usize) -> (usize, usize) {
    let lo = (q * n / 4).min(n - 1);
    let hi = ((q + 1) * n / 4).max(lo + 1);
    (lo, hi)
}

/// Mean `|ln(pred + eps) - ln(truth + eps)|` over the occupied bins of each band.
pub fn band_gaps(truth: &RadialSpectrum, pred: &RadialSpectrum, eps: f64, bands: Bands) -> [f64; 4] {
    let Bands::Quartiles = bands;
    let occupied: Vec<usize> = (0..truth.len()).filter(|&b| truth.bin_counts[b] > 0).collect();
    let mut out = [0.0; 4];
    if occupied.is_empty() {
        return out;
    }
    for (q, slot) in out.iter_mut().enumerate() {
        let (lo, hi) = quartile_range(q, occupied.len());
        let sum: f64 = occupied[lo..hi]
            .iter()
            .map(|&b| ((pred.bin_power[b] + eps).ln() - (truth.bin_power[b] + eps).ln()).abs())
            .sum();
        *slot = sum / (hi - lo) as f64;
    }
    out
}

/// Per-channel quartile-band log-PSD gaps between two fields, default log binning.
pub fn spectral_gap(pred: &GridField, truth: &GridField, eps: f64) -> Result<Vec<[f64; 4]>> {
    pred.ensure_same_grid(truth)?;
    if pred.channel_count() != truth.channel_count() {
        return Err(Error::GridMismatch("channel count differs".into()));
    }
    let (h, w, dx) = (truth.height(), truth.width(), truth.dx());
    let binning = RadialBinning::new(h, w, default_bins(h, w), BinScale::Log)?;
    (0..truth.channel_count())
        .map(|c| {
            let t = binning.apply(psd_plane(truth.channel(c)?, h, w, dx).power());
            let p = binning.apply(psd_plane(pred.channel(c)?, h, w, dx).power());
            Ok(band_gaps(&t, &p, eps, Bands::Quartiles))
        })
        .collect()
}

/// Scores for one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableScores {
    pub name: String,
    pub mae: f64,
    pub rmse: f64,
    pub crps: f64,
    pub gaps: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub variables: Vec<VariableScores>,
    pub samples: usize,
}

impl MetricsReport {
    pub const CSV_HEADER: [&'static str; 8] =
        ["variable", "mae", "rmse", "crps", "gap_q1", "gap_q2", "gap_q3", "gap_q4"];

    pub fn variable(&self, name: &str) -> Option<&VariableScores> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(Self::CSV_HEADER)?;
        for v in &self.variables {
            let mut row = vec![v.name.clone(), v.mae.to_string(), v.rmse.to_string(), v.crps.to_string()];
            row.extend(v.gaps.iter().map(|g| g.to_string()));
            wtr.write_record(&row)?;
        }
        wtr.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
    }
}

/// Streams samples into pooled per-channel scores.
#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    names: Vec<String>,
    abs_sum: Vec<f64>,
    sq_sum: Vec<f64>,
    crps_sum: Vec<f64>,
    gap_sum: Vec<[f64; 4]>,
    samples: usize,
    eps: f64,
}

impl MetricsAccumulator {
    pub fn new(eps: f64) -> Self {
        Self {
            names: Vec::new(),
            abs_sum: Vec::new(),
            sq_sum: Vec::new(),
            crps_sum: Vec::new(),
            gap_sum: Vec::new(),
            samples: 0,
            eps,
        }
    }

    /// Adds one target with its ensemble; MAE/RMSE use the ensemble mean,
    /// spectral gaps are averaged over members.
    pub fn add(&mut self, ensemble: &Ensemble, truth: &GridField, estimator: CrpsEstimator) -> Result<()> {
        let mean = ensemble.mean();
        let m = mae(&mean, truth)?;
        let r = per_channel(&mean, truth, |p, t| (p - t) * (p - t))?;
        let c = crps(ensemble, truth, estimator)?;
        let mut gaps = vec![[0.0; 4]; truth.channel_count()];
        for member in ensemble.members() {
            for (acc, g) in gaps.iter_mut().zip(spectral_gap(member, truth, self.eps)?) {
                acc.iter_mut().zip(g).for_each(|(a, b)| *a += b / ensemble.len() as f64);
            }
        }
        if self.samples == 0 {
            self.names = truth.channel_names().to_vec();
            let k = self.names.len();
            self.abs_sum = vec![0.0; k];
            self.sq_sum = vec![0.0; k];
            self.crps_sum = vec![0.0; k];
            self.gap_sum = vec![[0.0; 4]; k];
        } else if self.names != truth.channel_names() {
            return Err(Error::GridMismatch("channel layout differs between samples".into()));
        }
        for i in 0..self.names.len() {
            self.abs_sum[i] += m[i];
            self.sq_sum[i] += r[i];
            self.crps_sum[i] += c[i];
            for q in 0..4 {
                self.gap_sum[i][q] += gaps[i][q];
            }
        }
        self.samples += 1;
        Ok(())
    }

    /// Convenience for deterministic predictions (single member, standard CRPS).
    pub fn add_deterministic(&mut self, pred: &GridField, truth: &GridField) -> Result<()> {
        self.add(&Ensemble::new(vec![pred.clone()])?, truth, CrpsEstimator::Standard)
    }

    pub fn finish(&self) -> Result<MetricsReport> {
        if self.samples == 0 {
            return Err(Error::EmptyDataset);
        }
        let n = self.samples as f64;
        let variables = self
            .names
            .iter()
            .enumerate()
            .map(|(i, name)| VariableScores {
                name: name.clone(),
                mae: self.abs_sum[i] / n,
                rmse: (self.sq_sum[i] / n).sqrt(),
                crps: self.crps_sum[i] / n,
                gaps: self.gap_sum[i].map(|g| g / n),
            })
            .collect();
        Ok(MetricsReport {
            variables,
            samples: self.samples,
        })
    }
}
