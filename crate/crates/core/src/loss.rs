//! Wavenumber-weighted log-PSD loss and its analytic gradient.
//!
//! For truth `q` and prediction `p` on an `H x W` grid,
//!
//! ```text
//! L = sqrt( 1/(H W) * sum_k w(k) * (ln(P_q(k) + eps) - ln(P_p(k) + eps))^2 )
//! w(k) = (k / k_max)^2
//! ```
//!
//! with `P` the periodogram of [`crate::spectral::PsdGrid`] and `k` the
//! signed-frequency isotropic index. The gradient with respect to `p` is
//!
//! ```text
//! g(k)      = -w(k) d(k) / (H W L (P_p(k) + eps)),   d = ln(P_q + eps) - ln(P_p + eps)
//! dL/dp(n)  = (2 / dx) * Re( IDFT(g * DFT(p)) )(n)
//! ```
//!
//! where IDFT carries the `1/(H W)` factor.

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::GridField;
use crate::spectral::{fft2_real, ifft2, k_index_grid};

/// Floor added inside the logarithm, in PSD units.
pub const DEFAULT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BaseLoss {
    L1,
    #[default]
    L2,
}

impl FromStr for BaseLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(Self::L1),
            "l2" => Ok(Self::L2),
            other => Err(Error::InvalidParameter(format!("unknown base loss `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub lambda: f64,
    pub epsilon: f64,
    pub base_loss: BaseLoss,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            epsilon: DEFAULT_EPS,
            base_loss: BaseLoss::L2,
        }
    }
}

impl LossConfig {
    pub fn new(lambda: f64, epsilon: f64, base_loss: BaseLoss) -> Result<Self> {
        let cfg = Self {
            lambda,
            epsilon,
            base_loss,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Quadratic wavenumber weights `(k / k_max)^2`, zero at DC and one at `k_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdWeights {
    w: Vec<f64>,
    height: usize,
    width: usize,
}

impl PsdWeights {
    pub fn values(&self) -> &[f64] {
        &self.w
    }

    pub fn at(&self, kh: usize, kw: usize) -> f64 {
        self.w[kh * self.width + kw]
    }

    pub fn mean(&self) -> f64 {
        self.w.iter().sum::<f64>() / self.w.len() as f64
    }

    /// Shared weights for an `H x W` grid, built once per shape.
    pub fn cached(height: usize, width: usize) -> Result<Arc<PsdWeights>> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<PsdWeights>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(w) = cache.lock().unwrap().get(&(height, width)) {
            return Ok(w.clone());
        }
        let built = Arc::new(psd_weights(height, width)?);
        Ok(cache
            .lock()
            .unwrap()
            .entry((height, width))
            .or_insert(built)
            .clone())
    }
}

pub fn psd_weights(height: usize, width: usize) -> Result<PsdWeights> {
    if height < 2 || width < 2 {
        return Err(Error::DegenerateGrid { height, width });
    }
    let k = k_index_grid(height, width);
    let k_max = k.iter().copied().fold(0.0, f64::max);
    Ok(PsdWeights {
        w: k.iter().map(|&kk| (kk / k_max) * (kk / k_max)).collect(),
        height,
        width,
    })
}

/// `ln(PSD + eps)` of a plane, the fixed side of the loss.
pub fn log_psd(plane: &[f64], height: usize, width: usize, dx: f64, eps: f64) -> Vec<f64> {
    let norm = 1.0 / (height * width) as f64 / dx;
    fft2_real(plane, height, width)
        .iter()
        .map(|c| (c.norm_sqr() * norm + eps).ln())
        .collect()
}

/// Loss value and, when requested, its gradient with respect to `pred`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneLoss {
    pub loss: f64,
    pub grad: Option<Vec<f64>>,
    /// The loss was exactly zero and the zero subgradient was returned.
    pub subgradient: bool,
}

/// Core evaluation against a precomputed `ln(PSD_truth + eps)`.
#[allow(clippy::too_many_arguments)]
pub fn psd_loss_plane(
    truth_log_psd: &[f64],
    pred: &[f64],
    height: usize,
    width: usize,
    dx: f64,
    eps: f64,
    weights: &PsdWeights,
    want_grad: bool,
) -> PlaneLoss {
    let n = height * width;
    let norm = 1.0 / n as f64 / dx;
    let q = fft2_real(pred, height, width);
    let mut sum = 0.0;
    let mut diffs = Vec::with_capacity(n);
    for ((c, &lt), &w) in q.iter().zip(truth_log_psd).zip(weights.values()) {
        let p = c.norm_sqr() * norm;
        let d = lt - (p + eps).ln();
        sum += w * d * d;
        diffs.push((d, p));
    }
    let loss = (sum / n as f64).sqrt();
    if !want_grad {
        return PlaneLoss {
            loss,
            grad: None,
            subgradient: false,
        };
    }
    if loss == 0.0 {
        return PlaneLoss {
            loss,
            grad: Some(vec![0.0; n]),
            subgradient: true,
        };
    }
    let scale = -1.0 / (n as f64 * loss);
    let weighted: Vec<Complex64> = q
        .iter()
        .zip(&diffs)
        .zip(weights.values())
        .map(|((c, &(d, p)), &w)| c * (scale * w * d / (p + eps)))
        .collect();
    let back = ifft2(&weighted, height, width);
    let grad = back.iter().map(|c| 2.0 / dx * c.re).collect();
    PlaneLoss {
        loss,
        grad: Some(grad),
        subgradient: false,
    }
}

fn check_pair(truth: &GridField, pred: &GridField, channel: usize) -> Result<()> {
    truth.ensure_same_grid(pred)?;
    truth.check_channel(channel)?;
    pred.check_channel(channel)?;
    Ok(())
}

pub fn psd_loss(truth: &GridField, pred: &GridField, channel: usize, cfg: &LossConfig) -> Result<f64> {
    check_pair(truth, pred, channel)?;
    let (h, w, dx) = (truth.height(), truth.width(), truth.dx());
    let weights = PsdWeights::cached(h, w)?;
    let target = log_psd(truth.channel(channel)?, h, w, dx, cfg.epsilon);
    Ok(psd_loss_plane(&target, pred.channel(channel)?, h, w, dx, cfg.epsilon, &weights, false).loss)
}

/// Gradient of [`psd_loss`] with respect to the prediction channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdLossGrad {
    pub loss: f64,
    pub grad: GridField,
    /// Set when `L = 0`, where the zero subgradient is returned.
    pub subgradient: bool,
}

pub fn psd_loss_grad(truth: &GridField, pred: &GridField, channel: usize, cfg: &LossConfig) -> Result<PsdLossGrad> {
    check_pair(truth, pred, channel)?;
    let (h, w, dx) = (truth.height(), truth.width(), truth.dx());
    let weights = PsdWeights::cached(h, w)?;
    let target = log_psd(truth.channel(channel)?, h, w, dx, cfg.epsilon);
    let out = psd_loss_plane(&target, pred.channel(channel)?, h, w, dx, cfg.epsilon, &weights, true);
    Ok(PsdLossGrad {
        loss: out.loss,
        grad: GridField::single(out.grad.unwrap(), h, w, dx, &pred.channel_names()[channel])?,
        subgradient: out.subgradient,
    })
}

/// Mean base loss over one plane and its gradient.
pub fn base_loss_plane(truth: &[f64], pred: &[f64], kind: BaseLoss) -> (f64, Vec<f64>) {
    let n = truth.len() as f64;
    match kind {
        BaseLoss::L2 => {
            let loss = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
            let grad = pred.iter().zip(truth).map(|(p, t)| 2.0 * (p - t) / n).collect();
            (loss, grad)
        }
        BaseLoss::L1 => {
            let loss = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / n;
            let grad = pred
                .iter()
                .zip(truth)
                .map(|(p, t)| {
                    let d = p - t;
                    if d > 0.0 {
                        1.0 / n
                    } else if d < 0.0 {
                        -1.0 / n
                    } else {
                        0.0
                    }
                })
                .collect();
            (loss, grad)
        }
    }
}

/// Composite loss summed over channels, with its parts.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalLoss {
    pub total: f64,
    pub base: f64,
    pub psd: f64,
    pub grad: GridField,
}

/// `sum_c [ base_c + lambda * psd_c ]` and its gradient with respect to `pred`.
pub fn total_loss(truth: &GridField, pred: &GridField, cfg: &LossConfig) -> Result<TotalLoss> {
    truth.ensure_same_layout(pred)?;
    cfg.validate()?;
    let (h, w, dx) = (truth.height(), truth.width(), truth.dx());
    let weights = PsdWeights::cached(h, w)?;
    let targets: Vec<Vec<f64>> = (0..truth.channel_count())
        .map(|c| Ok(log_psd(truth.channel(c)?, h, w, dx, cfg.epsilon)))
        .collect::<Result<_>>()?;
    let parts = total_loss_planes(truth, pred, &targets, &weights, cfg)?;
    Ok(TotalLoss {
        total: parts.0 + cfg.lambda * parts.1,
        base: parts.0,
        psd: parts.1,
        grad: pred.with_values(parts.2)?,
    })
}

/// Shared path for [`total_loss`] and training: returns (base sum, psd sum, flat gradient).
pub(crate) fn total_loss_planes(
    truth: &GridField,
    pred: &GridField,
    truth_log_psd: &[Vec<f64>],
    weights: &PsdWeights,
    cfg: &LossConfig,
) -> Result<(f64, f64, Vec<f64>)> {
    let (h, w, dx) = (truth.height(), truth.width(), truth.dx());
    let mut base = 0.0;
    let mut psd = 0.0;
    let mut grad = Vec::with_capacity(pred.values().len());
    for c in 0..truth.channel_count() {
        let (t, p) = (truth.channel(c)?, pred.channel(c)?);
        let (b, mut g) = base_loss_plane(t, p, cfg.base_loss);
        base += b;
        if cfg.lambda > 0.0 {
            let out = psd_loss_plane(&truth_log_psd[c], p, h, w, dx, cfg.epsilon, weights, true);
            psd += out.loss;
            for (gi, pi) in g.iter_mut().zip(out.grad.unwrap()) {
                *gi += cfg.lambda * pi;
            }
        } else {
            psd += psd_loss_plane(&truth_log_psd[c], p, h, w, dx, cfg.epsilon, weights, false).loss;
        }
        grad.extend(g);
    }
    Ok((base, psd, grad))
}
