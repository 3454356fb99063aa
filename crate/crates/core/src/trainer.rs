//! A toy linear downscaler trained with the composite loss.
//!
//! The model nearest-neighbour upsamples the coarse input by an integer
//! factor and applies one periodic `K x K` filter per (output, input) channel
//! pair plus a bias per output channel:
//!
//! ```text
//! out[o](y, x) = b[o] + sum_i sum_{a,c} K[o][i][a][c] * up[i](y + a - r, x + c - r)
//! ```
//!
//! with `r = K / 2` and indices wrapping. The map is linear in the parameters,
//! so with `lambda = 0` and an l2 base loss training is a convex quadratic.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{nearest_upsample, FieldPair, GridField};
use crate::grd;
use crate::loss::{log_psd, total_loss_planes, LossConfig, PsdWeights};
use crate::metrics::{mae, spectral_gap, MetricsAccumulator, MetricsReport};
use crate::physics::{ChannelRoles, DiagnosticsAccumulator, DiagnosticsOptions, DiagnosticsReport};

pub const MODEL_MAGIC: &[u8; 4] = b"TDS1";

#[derive(Debug, Clone, PartialEq)]
pub struct ToyDownscaler {
    factor: usize,
    kernel_size: usize,
    in_channels: usize,
    out_channels: usize,
    /// Kernels in `[out][in][row][col]` order, then one bias per output channel.
    params: Vec<f64>,
}

impl ToyDownscaler {
    pub fn from_params(
        factor: usize,
        kernel_size: usize,
        in_channels: usize,
        out_channels: usize,
        params: Vec<f64>,
    ) -> Result<Self> {
        if kernel_size % 2 == 0 {
            return Err(Error::EvenKernel(kernel_size));
        }
        if factor == 0 || in_channels == 0 || out_channels == 0 {
            return Err(Error::InvalidParameter("factor and channel counts must be positive".into()));
        }
        let expected = out_channels * in_channels * kernel_size * kernel_size + out_channels;
        if params.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "expected {expected} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("parameters must be finite".into()));
        }
        Ok(Self {
            factor,
            kernel_size,
            in_channels,
            out_channels,
            params,
        })
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Flat index of kernel tap `(o, i, row, col)`.
    pub fn kernel_index(&self, o: usize, i: usize, row: usize, col: usize) -> usize {
        let k = self.kernel_size;
        ((o * self.in_channels + i) * k + row) * k + col
    }

    pub fn bias_index(&self, o: usize) -> usize {
        self.out_channels * self.in_channels * self.kernel_size * self.kernel_size + o
    }

    fn kernel(&self, o: usize, i: usize) -> &[f64] {
        let kk = self.kernel_size * self.kernel_size;
        let start = (o * self.in_channels + i) * kk;
        &self.params[start..start + kk]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + 8 * self.params.len());
        out.extend_from_slice(MODEL_MAGIC);
        for v in [self.factor, self.kernel_size, self.in_channels, self.out_channels] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        if bytes.len() < 20 || &bytes[..4] != MODEL_MAGIC {
            return Err(Error::format(origin, "not a TDS1 model file"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        let (factor, k, cin, cout) = (word(0), word(1), word(2), word(3));
        let body = &bytes[20..];
        if body.len() % 8 != 0 {
            return Err(Error::format(origin, "truncated parameter block"));
        }
        let params = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_params(factor, k, cin, cout, params).map_err(|e| Error::format(origin, e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        grd::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

/// Initialization settings; see [`init_model`] for the defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelInit {
    pub factor: usize,
    pub kernel_size: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub seed: u64,
    pub noise_std: f64,
}

impl ModelInit {
    pub fn new(factor: usize, kernel_size: usize, seed: u64) -> Self {
        Self {
            factor,
            kernel_size,
            in_channels: 3,
            out_channels: 3,
            seed,
            noise_std: 1e-2,
        }
    }

    /// Identity kernels (centre tap 1 where input and output channel coincide)
    /// plus seeded Gaussian noise on every tap; zero biases.
    pub fn build(&self) -> Result<ToyDownscaler> {
        if self.kernel_size % 2 == 0 {
            return Err(Error::EvenKernel(self.kernel_size));
        }
        let n_kernel = self.out_channels * self.in_channels * self.kernel_size * self.kernel_size;
        let mut model = ToyDownscaler::from_params(
            self.factor,
            self.kernel_size,
            self.in_channels,
            self.out_channels,
            vec![0.0; n_kernel + self.out_channels],
        )?;
        let r = self.kernel_size / 2;
        for c in 0..self.in_channels.min(self.out_channels) {
            let idx = model.kernel_index(c, c, r, r);
            model.params[idx] = 1.0;
        }
        if self.noise_std > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let normal = Normal::new(0.0, self.noise_std)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            for p in &mut model.params[..n_kernel] {
                *p += normal.sample(&mut rng);
            }
        }
        Ok(model)
    }
}

/// Three-channel model with `noise_std = 1e-2`.
pub fn init_model(factor: usize, kernel_size: usize, seed: u64) -> Result<ToyDownscaler> {
    ModelInit::new(factor, kernel_size, seed).build()
}

/// `acc[y][x] += weight * src[(y + dy) mod H][(x + dx) mod W]`.
fn add_shifted(acc: &mut [f64], src: &[f64], h: usize, w: usize, dy: isize, dx: isize, weight: f64) {
    let sx = dx.rem_euclid(w as isize) as usize;
    for y in 0..h {
        let sy = (y as isize + dy).rem_euclid(h as isize) as usize;
        let row = &src[sy * w..(sy + 1) * w];
        let out = &mut acc[y * w..(y + 1) * w];
        let split = w - sx;
        for (o, s) in out[..split].iter_mut().zip(&row[sx..]) {
            *o += weight * s;
        }
        for (o, s) in out[split..].iter_mut().zip(&row[..sx]) {
            *o += weight * s;
        }
    }
}

/// `sum_{y,x} g[y][x] * src[(y + dy) mod H][(x + dx) mod W]`.
fn dot_shifted(g: &[f64], src: &[f64], h: usize, w: usize, dy: isize, dx: isize) -> f64 {
    let sx = dx.rem_euclid(w as isize) as usize;
    let mut acc = 0.0;
    for y in 0..h {
        let sy = (y as isize + dy).rem_euclid(h as isize) as usize;
        let row = &src[sy * w..(sy + 1) * w];
        let gr = &g[y * w..(y + 1) * w];
        let split = w - sx;
        acc += gr[..split].iter().zip(&row[sx..]).map(|(a, b)| a * b).sum::<f64>();
        acc += gr[split..].iter().zip(&row[..sx]).map(|(a, b)| a * b).sum::<f64>();
    }
    acc
}

impl ToyDownscaler {
    fn check_input(&self, input: &GridField) -> Result<()> {
        if input.channel_count() != self.in_channels {
            return Err(Error::ChannelMismatch {
                expected: self.in_channels,
                actual: input.channel_count(),
            });
        }
        Ok(())
    }

    fn output_names(&self, input: &GridField) -> Vec<String> {
        if self.in_channels == self.out_channels {
            input.channel_names().to_vec()
        } else {
            (0..self.out_channels).map(|o| format!("out{o}")).collect()
        }
    }

    /// Filters an already upsampled `(in, H, W)` buffer.
    fn forward_upsampled(&self, up: &[f64], h: usize, w: usize) -> Vec<f64> {
        let n = h * w;
        let k = self.kernel_size;
        let r = (k / 2) as isize;
        let mut out = vec![0.0; self.out_channels * n];
        for o in 0..self.out_channels {
            let acc = &mut out[o * n..(o + 1) * n];
            acc.iter_mut().for_each(|v| *v = self.params[self.bias_index(o)]);
            for i in 0..self.in_channels {
                let src = &up[i * n..(i + 1) * n];
                for (t, &wt) in self.kernel(o, i).iter().enumerate() {
                    if wt != 0.0 {
                        add_shifted(acc, src, h, w, (t / k) as isize - r, (t % k) as isize - r, wt);
                    }
                }
            }
        }
        out
    }

    /// Parameter gradient for an upsampled input and output gradient.
    fn backward_upsampled(&self, up: &[f64], grad_out: &[f64], h: usize, w: usize) -> Vec<f64> {
        let n = h * w;
        let k = self.kernel_size;
        let r = (k / 2) as isize;
        let mut grad = vec![0.0; self.params.len()];
        for o in 0..self.out_channels {
            let g = &grad_out[o * n..(o + 1) * n];
            for i in 0..self.in_channels {
                let src = &up[i * n..(i + 1) * n];
                for t in 0..k * k {
                    let idx = self.kernel_index(o, i, t / k, t % k);
                    grad[idx] = dot_shifted(g, src, h, w, (t / k) as isize - r, (t % k) as isize - r);
                }
            }
            grad[self.bias_index(o)] = g.iter().sum();
        }
        grad
    }
}

pub fn forward(model: &ToyDownscaler, input: &GridField) -> Result<GridField> {
    model.check_input(input)?;
    let up = nearest_upsample(input, model.factor)?;
    let out = model.forward_upsampled(up.values(), up.height(), up.width());
    GridField::new(out, up.height(), up.width(), up.dx(), model.output_names(input))
}

/// Gradient of a scalar loss with respect to the flat parameter vector, given
/// the loss gradient with respect to the model output.
pub fn backward(model: &ToyDownscaler, input: &GridField, grad_wrt_output: &GridField) -> Result<Vec<f64>> {
    model.check_input(input)?;
    let up = nearest_upsample(input, model.factor)?;
    if grad_wrt_output.height() != up.height()
        || grad_wrt_output.width() != up.width()
        || grad_wrt_output.channel_count() != model.out_channels
    {
        return Err(Error::ShapeMismatch(format!(
            "output gradient is {}x{}x{}, model output is {}x{}x{}",
            grad_wrt_output.channel_count(),
            grad_wrt_output.height(),
            grad_wrt_output.width(),
            model.out_channels,
            up.height(),
            up.width()
        )));
    }
    Ok(model.backward_upsampled(up.values(), grad_wrt_output.values(), up.height(), up.width()))
}

/// Optimizer and schedule settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub loss: LossConfig,
    pub epochs: usize,
    pub lr: f64,
    /// Heavy-ball momentum coefficient; 0 gives plain gradient descent.
    pub momentum: f64,
    /// Samples per step; 0 means full batch.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossConfig::default(),
            epochs: 200,
            lr: 1e-2,
            momentum: 0.0,
            batch_size: 0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean over the epoch's samples, evaluated at the parameters used for each step.
    pub total: f64,
    pub base: f64,
    pub psd: f64,
    /// Mean over channels of validation MAE after the epoch.
    pub val_mae: f64,
    /// Mean over channels of the validation top-quartile spectral gap after the epoch.
    pub val_gap_top: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Sample order used in each epoch.
    pub batch_orders: Vec<Vec<usize>>,
}

impl TrainHistory {
    pub const CSV_HEADER: [&'static str; 6] = ["epoch", "total", "base", "psd", "val_mae", "val_gap_top"];

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(Self::CSV_HEADER)?;
        for e in &self.epochs {
            wtr.write_record([
                e.epoch.to_string(),
                e.total.to_string(),
                e.base.to_string(),
                e.psd.to_string(),
                e.val_mae.to_string(),
                e.val_gap_top.to_string(),
            ])?;
        }
        wtr.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
    }
}

/// A pair with its upsampled input and truth log-spectra cached.
struct Prepared<'a> {
    up: Vec<f64>,
    target: &'a GridField,
    target_log_psd: Vec<Vec<f64>>,
}

fn prepare<'a>(model: &ToyDownscaler, pairs: &'a [FieldPair], eps: f64) -> Result<Vec<Prepared<'a>>> {
    pairs
        .par_iter()
        .map(|p| {
            model.check_input(&p.input)?;
            let up = nearest_upsample(&p.input, model.factor)?;
            if !up.same_grid(&p.target) || p.target.channel_count() != model.out_channels {
                return Err(Error::ShapeMismatch(format!(
                    "upsampled input {}x{} does not match target {}x{}x{}",
                    up.height(),
                    up.width(),
                    p.target.channel_count(),
                    p.target.height(),
                    p.target.width()
                )));
            }
            let (h, w, dx) = (p.target.height(), p.target.width(), p.target.dx());
            let target_log_psd = (0..p.target.channel_count())
                .map(|c| Ok(log_psd(p.target.channel(c)?, h, w, dx, eps)))
                .collect::<Result<_>>()?;
            Ok(Prepared {
                up: up.into_values(),
                target: &p.target,
                target_log_psd,
            })
        })
        .collect()
}

/// Loss parts and parameter gradient for one prepared sample.
fn sample_step(model: &ToyDownscaler, s: &Prepared<'_>, weights: &PsdWeights, cfg: &LossConfig) -> Result<(f64, f64, Vec<f64>)> {
    let (h, w) = (s.target.height(), s.target.width());
    let out = model.forward_upsampled(&s.up, h, w);
    let pred = s.target.with_values(out).map_err(|_| Error::DivergenceDetected {
        epoch: 0,
        history: Box::default(),
    })?;
    let (base, psd, grad_out) = total_loss_planes(s.target, &pred, &s.target_log_psd, weights, cfg)?;
    Ok((base, psd, model.backward_upsampled(&s.up, &grad_out, h, w)))
}

/// Mean composite loss and parameter gradient over a set of samples.
///
/// Per-sample work runs in parallel; the reduction is sequential in sample
/// order so results are bit-reproducible.
fn batch_gradient(
    model: &ToyDownscaler,
    samples: &[&Prepared<'_>],
    weights: &PsdWeights,
    cfg: &LossConfig,
) -> Result<(f64, f64, Vec<f64>)> {
    let parts: Vec<(f64, f64, Vec<f64>)> = samples
        .par_iter()
        .map(|s| sample_step(model, s, weights, cfg))
        .collect::<Result<_>>()?;
    let n = samples.len() as f64;
    let mut grad = vec![0.0; model.n_params()];
    let (mut base, mut psd) = (0.0, 0.0);
    for (b, p, g) in parts {
        base += b;
        psd += p;
        grad.iter_mut().zip(&g).for_each(|(a, v)| *a += v);
    }
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((base / n, psd / n, grad))
}

/// Composite loss of `model` over a dataset, with its parameter gradient.
pub fn dataset_loss(model: &ToyDownscaler, pairs: &[FieldPair], cfg: &LossConfig) -> Result<(f64, Vec<f64>)> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    cfg.validate()?;
    let prepared = prepare(model, pairs, cfg.epsilon)?;
    let t = &pairs[0].target;
    let weights = PsdWeights::cached(t.height(), t.width())?;
    let refs: Vec<&Prepared<'_>> = prepared.iter().collect();
    let (base, psd, grad) = batch_gradient(model, &refs, &weights, cfg)?;
    Ok((base + cfg.lambda * psd, grad))
}

/// Validation MAE and top-quartile gap, each averaged over channels and samples.
fn validation_scores(model: &ToyDownscaler, val: &[Prepared<'_>], eps: f64) -> Result<(f64, f64)> {
    let scores: Vec<(f64, f64)> = val
        .par_iter()
        .map(|s| {
            let (h, w) = (s.target.height(), s.target.width());
            let pred = s.target.with_values(model.forward_upsampled(&s.up, h, w))?;
            let m = mae(&pred, s.target)?;
            let g = spectral_gap(&pred, s.target, eps)?;
            let c = m.len() as f64;
            Ok((m.iter().sum::<f64>() / c, g.iter().map(|b| b[3]).sum::<f64>() / c))
        })
        .collect::<Result<_>>()?;
    let n = scores.len() as f64;
    Ok((
        scores.iter().map(|s| s.0).sum::<f64>() / n,
        scores.iter().map(|s| s.1).sum::<f64>() / n,
    ))
}

/// Gradient descent from `model`. `val` supplies the per-epoch validation
/// columns; when empty the training pairs are used instead.
pub fn train_from(
    mut model: ToyDownscaler,
    dataset: &[FieldPair],
    val: &[FieldPair],
    cfg: &TrainConfig,
) -> Result<(ToyDownscaler, TrainHistory)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    cfg.loss.validate()?;
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) || !(0.0..1.0).contains(&cfg.momentum) {
        return Err(Error::InvalidParameter("lr must be > 0 and momentum in [0, 1)".into()));
    }
    let train = prepare(&model, dataset, cfg.loss.epsilon)?;
    let val = prepare(&model, if val.is_empty() { dataset } else { val }, cfg.loss.epsilon)?;
    let t = &dataset[0].target;
    let weights = PsdWeights::cached(t.height(), t.width())?;
    let batch = if cfg.batch_size == 0 { train.len() } else { cfg.batch_size.min(train.len()) };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut velocity = vec![0.0; model.n_params()];
    let mut history = TrainHistory::default();

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        if batch < train.len() {
            order.shuffle(&mut rng);
        }
        let (mut total, mut base, mut psd) = (0.0, 0.0, 0.0);
        for chunk in order.chunks(batch) {
            let samples: Vec<&Prepared<'_>> = chunk.iter().map(|&i| &train[i]).collect();
            let step = batch_gradient(&model, &samples, &weights, &cfg.loss);
            let (b, p, grad) = match step {
                Ok(v) if v.0.is_finite() && v.1.is_finite() && v.2.iter().all(|g| g.is_finite()) => v,
                Ok(_) | Err(Error::DivergenceDetected { .. }) => {
                    return Err(Error::DivergenceDetected {
                        epoch,
                        history: Box::new(history),
                    })
                }
                Err(e) => return Err(e),
            };
            let share = chunk.len() as f64 / train.len() as f64;
            base += b * share;
            psd += p * share;
            total += (b + cfg.loss.lambda * p) * share;
            for ((param, vel), g) in model.params.iter_mut().zip(&mut velocity).zip(&grad) {
                *vel = cfg.momentum * *vel - cfg.lr * g;
                *param += *vel;
            }
        }
        if model.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::DivergenceDetected {
                epoch,
                history: Box::new(history),
            });
        }
        let (val_mae, val_gap_top) = validation_scores(&model, &val, cfg.loss.epsilon)?;
        history.epochs.push(EpochRecord {
            epoch,
            total,
            base,
            psd,
            val_mae,
            val_gap_top,
        });
        history.batch_orders.push(order);
    }
    Ok((model, history))
}

/// Initializes a three-channel model with `kernel_size` and trains it.
pub fn train(
    dataset: &[FieldPair],
    val: &[FieldPair],
    kernel_size: usize,
    cfg: &TrainConfig,
) -> Result<(ToyDownscaler, TrainHistory)> {
    let first = dataset.first().ok_or(Error::EmptyDataset)?;
    let factor = (first.target.height() / first.input.height()).max(1);
    let mut init = ModelInit::new(factor, kernel_size, cfg.seed);
    init.in_channels = first.input.channel_count();
    init.out_channels = first.target.channel_count();
    train_from(init.build()?, dataset, val, cfg)
}

/// Scores and spectral diagnostics for one evaluation pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub metrics: MetricsReport,
    pub diagnostics: DiagnosticsReport,
}

/// Evaluates any predictor over a dataset.
pub fn evaluate_with<F>(dataset: &[FieldPair], opts: &DiagnosticsOptions, predict: F) -> Result<Evaluation>
where
    F: Fn(&FieldPair) -> Result<GridField> + Sync,
{
    let first = dataset.first().ok_or(Error::EmptyDataset)?;
    let roles = ChannelRoles::detect(&first.target)?;
    let preds: Vec<GridField> = dataset.par_iter().map(&predict).collect::<Result<_>>()?;
    let mut metrics = MetricsAccumulator::new(opts.eps);
    let mut diagnostics = DiagnosticsAccumulator::new(roles, opts.clone());
    for (pair, pred) in dataset.iter().zip(&preds) {
        pred.ensure_same_layout(&pair.target)?;
        metrics.add_deterministic(pred, &pair.target)?;
        diagnostics.add(&pair.target, pred)?;
    }
    Ok(Evaluation {
        metrics: metrics.finish()?,
        diagnostics: diagnostics.finish()?,
    })
}

pub fn evaluate(model: &ToyDownscaler, dataset: &[FieldPair], opts: &DiagnosticsOptions) -> Result<Evaluation> {
    evaluate_with(dataset, opts, |pair| forward(model, &pair.input))
}
