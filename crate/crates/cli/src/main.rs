//! `spectra`: generate synthetic data, compute spectra and diagnostics,
//! score predictions, and train or evaluate the toy downscaler.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spectra_core::grd;
use spectra_core::metrics::MetricsAccumulator;
use spectra_core::physics::{diagnostics_report, ChannelRoles, DiagnosticsOptions};
use spectra_core::spectral::{default_bins, psd, radial_bin};
use spectra_core::synth::{load_dataset, write_dataset};
use spectra_core::trainer::{dataset_loss, evaluate, train, TrainConfig};
use spectra_core::{
    make_dataset, BaseLoss, BinScale, CrpsEstimator, DerivativeMethod, Ensemble, GridField, LossConfig, SynthSpec,
    ToyDownscaler,
};

#[derive(Parser)]
#[command(name = "spectra", version, about = "Spectral diagnostics and PSD-loss training for gridded downscaling")]
struct Cli {
    /// Print progress and summaries to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic (coarse, fine) pairs and a manifest.
    Gen(GenArgs),
    /// Radial power spectra of a GRD1 file, one CSV per channel.
    Psd(PsdArgs),
    /// Spectra of winds, t2m and derived variables for truth vs prediction.
    Diagnose(DiagnoseArgs),
    /// MAE, RMSE, CRPS and spectral gaps of one or more predictions.
    Compare(CompareArgs),
    /// Train the toy downscaler on a manifest.
    Train(TrainArgs),
    /// Evaluate a trained model on a manifest.
    Eval(EvalArgs),
}

#[derive(Args)]
struct BinArgs {
    /// Number of radial bins [default: half the smaller grid dimension].
    #[arg(long)]
    bins: Option<usize>,
    /// Logarithmically spaced bins (the default).
    #[arg(long, conflicts_with = "linear_bins")]
    log_bins: bool,
    /// Linearly spaced bins.
    #[arg(long)]
    linear_bins: bool,
}

impl BinArgs {
    fn scale(&self) -> BinScale {
        if self.linear_bins {
            BinScale::Linear
        } else {
            BinScale::Log
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Spectral,
    Fd,
}

impl From<Method> for DerivativeMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Spectral => DerivativeMethod::Spectral,
            Method::Fd => DerivativeMethod::CentralFd,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BaseLossArg {
    L1,
    L2,
}

#[derive(Args)]
struct LossArgs {
    /// Weight of the spectral term.
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    /// Floor inside the logarithms.
    #[arg(long, default_value_t = 1e-12)]
    eps: f64,
    /// Pointwise base loss.
    #[arg(long, value_enum, default_value = "l2")]
    base_loss: BaseLossArg,
}

impl LossArgs {
    fn config(&self) -> Result<LossConfig, CliError> {
        let base = match self.base_loss {
            BaseLossArg::L1 => BaseLoss::L1,
            BaseLossArg::L2 => BaseLoss::L2,
        };
        LossConfig::new(self.lambda, self.eps, base).map_err(|e| CliError::Usage(format!("--lambda/--eps: {e}")))
    }
}

#[derive(Args)]
struct GenArgs {
    /// TOML file with generator settings; defaults apply to missing keys.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Number of pairs.
    #[arg(long, default_value_t = 256)]
    n: usize,
    /// Coarsening factor.
    #[arg(long, default_value_t = 4)]
    factor: usize,
}

#[derive(Args)]
struct PsdArgs {
    /// Input GRD1 file.
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    bins: BinArgs,
    /// Channel name or index [default: all channels].
    #[arg(long)]
    channel: Option<String>,
    /// Output directory; files are named `<input stem>_<channel>.psd.csv`.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Derivative operator for divergence and vorticity.
    #[arg(long, value_enum, default_value = "spectral")]
    method: Method,
    #[command(flatten)]
    bins: BinArgs,
    #[arg(long, default_value_t = 1e-12)]
    eps: f64,
    #[arg(long, default_value = "diagnostics.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    truth: PathBuf,
    /// Prediction file; repeat for ensemble members.
    #[arg(long, required = true)]
    pred: Vec<PathBuf>,
    /// Fair CRPS estimator (default with two or more members).
    #[arg(long, conflicts_with = "standard")]
    fair: bool,
    /// Standard CRPS estimator (default with one member).
    #[arg(long)]
    standard: bool,
    #[arg(long, default_value_t = 1e-12)]
    eps: f64,
    #[arg(long, default_value = "metrics.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Training manifest written by `gen`.
    #[arg(long)]
    data: PathBuf,
    /// Validation manifest for the per-epoch columns [default: training data].
    #[arg(long)]
    val: Option<PathBuf>,
    #[command(flatten)]
    loss: LossArgs,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-2)]
    lr: f64,
    /// Heavy-ball momentum; 0 is plain gradient descent.
    #[arg(long, default_value_t = 0.0)]
    momentum: f64,
    /// Samples per step; 0 is full batch.
    #[arg(long, default_value_t = 0)]
    batch_size: usize,
    /// Odd convolution kernel size.
    #[arg(long, default_value_t = 5)]
    kernel_size: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value = "model.bin")]
    out: PathBuf,
    #[arg(long, default_value = "history.csv")]
    history: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    loss: LossArgs,
    #[arg(long, value_enum, default_value = "spectral")]
    method: Method,
    #[command(flatten)]
    bins: BinArgs,
    /// Output directory for metrics.csv and diagnostics.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

enum CliError {
    Usage(String),
    Domain(String),
}

/// Domain error with `context` prepended unless the message already names it.
fn domain<T>(r: spectra_core::Result<T>, context: impl Display) -> Result<T, CliError> {
    r.map_err(|e| {
        let (msg, ctx) = (e.to_string(), context.to_string());
        if msg.contains(&ctx) {
            CliError::Domain(msg)
        } else {
            CliError::Domain(format!("{ctx}: {msg}"))
        }
    })
}

fn require_file(path: &Path, flag: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Domain(format!("{flag}: no such file: {}", path.display())))
    }
}

fn require_out_parent(path: &Path, flag: &str) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => Err(CliError::Domain(format!(
            "{flag}: directory does not exist: {}",
            p.display()
        ))),
        _ => Ok(()),
    }
}

fn ensure_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    domain(grd::write_atomic(path, bytes), path.display())
}

fn read_grid(path: &Path) -> Result<GridField, CliError> {
    domain(grd::read(path), path.display())
}

fn diagnostics_options(method: Method, bins: &BinArgs, eps: f64) -> Result<DiagnosticsOptions, CliError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(CliError::Usage("--eps must be positive".into()));
    }
    Ok(DiagnosticsOptions {
        method: method.into(),
        n_bins: bins.bins,
        scale: bins.scale(),
        eps,
    })
}

fn run_gen(a: &GenArgs, verbose: bool) -> Result<(), CliError> {
    let spec = match &a.spec {
        Some(path) => {
            require_file(path, "--spec")?;
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?;
            toml::from_str::<SynthSpec>(&text).map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?
        }
        None => SynthSpec::default(),
    };
    domain(spec.validate(), "generator settings")?;
    ensure_dir(&a.out)?;
    let pairs = domain(make_dataset(&spec, a.n, a.factor), "--factor")?;
    let manifest = domain(write_dataset(&a.out, &pairs, &spec), a.out.display())?;
    if verbose {
        eprintln!("wrote {} pairs, manifest {}", pairs.len(), manifest.display());
    }
    Ok(())
}

fn run_psd(a: &PsdArgs, verbose: bool) -> Result<(), CliError> {
    require_file(&a.input, "--in")?;
    ensure_dir(&a.out)?;
    let field = read_grid(&a.input)?;
    let channels: Vec<usize> = match &a.channel {
        None => (0..field.channel_count()).collect(),
        Some(c) => {
            let idx = match c.parse::<usize>() {
                Ok(i) => domain(field.check_channel(i).map(|_| i), "--channel")?,
                Err(_) => domain(field.channel_index(c), "--channel")?,
            };
            vec![idx]
        }
    };
    let bins = a.bins.bins.unwrap_or_else(|| default_bins(field.height(), field.width()));
    let stem = a.input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    for c in channels {
        let spectrum = domain(psd(&field, c).and_then(|p| radial_bin(&p, bins, a.bins.scale())), a.input.display())?;
        let mut out = String::from("k,psd,count\n");
        for i in 0..spectrum.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                spectrum.bin_centers[i], spectrum.bin_power[i], spectrum.bin_counts[i]
            ));
        }
        let path = a.out.join(format!("{stem}_{}.psd.csv", field.channel_names()[c]));
        write_out(&path, out.as_bytes())?;
        if verbose {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn run_diagnose(a: &DiagnoseArgs) -> Result<(), CliError> {
    require_file(&a.truth, "--truth")?;
    require_file(&a.pred, "--pred")?;
    require_out_parent(&a.out, "--out")?;
    let opts = diagnostics_options(a.method, &a.bins, a.eps)?;
    let truth = read_grid(&a.truth)?;
    let pred = read_grid(&a.pred)?;
    let context = format!("{} vs {}", a.pred.display(), a.truth.display());
    domain(pred.ensure_same_layout(&truth), &context)?;
    let roles = domain(ChannelRoles::detect(&truth), a.truth.display())?;
    let report = domain(diagnostics_report(&truth, &pred, &roles, &opts), &context)?;
    write_out(&a.out, &domain(report.to_csv(), &a.out.display())?)
}

fn run_compare(a: &CompareArgs) -> Result<(), CliError> {
    require_file(&a.truth, "--truth")?;
    for p in &a.pred {
        require_file(p, "--pred")?;
    }
    require_out_parent(&a.out, "--out")?;
    let estimator = if a.fair {
        if a.pred.len() < 2 {
            return Err(CliError::Usage("--fair needs at least two --pred members".into()));
        }
        CrpsEstimator::Fair
    } else if a.standard {
        CrpsEstimator::Standard
    } else {
        CrpsEstimator::default_for(a.pred.len())
    };
    let truth = read_grid(&a.truth)?;
    let mut members = Vec::with_capacity(a.pred.len());
    for p in &a.pred {
        let m = read_grid(p)?;
        domain(m.ensure_same_layout(&truth), format!("{} vs {}", p.display(), a.truth.display()))?;
        members.push(m);
    }
    let ensemble = domain(Ensemble::new(members), "--pred")?;
    let mut acc = MetricsAccumulator::new(a.eps);
    domain(acc.add(&ensemble, &truth, estimator), a.truth.display())?;
    let report = domain(acc.finish(), a.truth.display())?;
    write_out(&a.out, &domain(report.to_csv(), a.out.display())?)
}

fn run_train(a: &TrainArgs, verbose: bool) -> Result<(), CliError> {
    require_file(&a.data, "--data")?;
    if let Some(v) = &a.val {
        require_file(v, "--val")?;
    }
    require_out_parent(&a.out, "--out")?;
    require_out_parent(&a.history, "--history")?;
    if a.kernel_size % 2 == 0 {
        return Err(CliError::Usage(format!("--kernel-size must be odd, got {}", a.kernel_size)));
    }
    let cfg = TrainConfig {
        loss: a.loss.config()?,
        epochs: a.epochs,
        lr: a.lr,
        momentum: a.momentum,
        batch_size: a.batch_size,
        seed: a.seed,
    };
    let data = domain(load_dataset(&a.data), a.data.display())?;
    let val = match &a.val {
        Some(v) => domain(load_dataset(v), v.display())?,
        None => Vec::new(),
    };
    let (model, history) = match train(&data, &val, a.kernel_size, &cfg) {
        Ok(out) => out,
        Err(spectra_core::Error::DivergenceDetected { epoch, history }) => {
            let csv = domain(history.to_csv(), a.history.display())?;
            write_out(&a.history, &csv)?;
            return Err(CliError::Domain(format!(
                "training diverged at epoch {epoch}; partial history written to {}",
                a.history.display()
            )));
        }
        Err(e) => return Err(CliError::Domain(format!("{}: {e}", a.data.display()))),
    };
    domain(model.save(&a.out), a.out.display())?;
    write_out(&a.history, &domain(history.to_csv(), a.history.display())?)?;
    if verbose {
        if let Some(last) = history.epochs.last() {
            eprintln!(
                "epoch {}: total {:.6} base {:.6} psd {:.6} val_mae {:.6} val_gap_top {:.6}",
                last.epoch, last.total, last.base, last.psd, last.val_mae, last.val_gap_top
            );
        }
    }
    Ok(())
}

fn run_eval(a: &EvalArgs, verbose: bool) -> Result<(), CliError> {
    require_file(&a.model, "--model")?;
    require_file(&a.data, "--data")?;
    let loss = a.loss.config()?;
    let opts = diagnostics_options(a.method, &a.bins, loss.epsilon)?;
    ensure_dir(&a.out)?;
    let model = domain(ToyDownscaler::load(&a.model), a.model.display())?;
    let data = domain(load_dataset(&a.data), a.data.display())?;
    let ev = domain(evaluate(&model, &data, &opts), a.data.display())?;
    let metrics = a.out.join("metrics.csv");
    let diagnostics = a.out.join("diagnostics.csv");
    write_out(&metrics, &domain(ev.metrics.to_csv(), metrics.display())?)?;
    write_out(&diagnostics, &domain(ev.diagnostics.to_csv(), diagnostics.display())?)?;
    if verbose {
        let (total, _) = domain(dataset_loss(&model, &data, &loss), a.data.display())?;
        eprintln!("mean composite loss {total:.6} over {} samples", data.len());
    }
    Ok(())
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("SPECTRA_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("SPECTRA_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("SPECTRA_THREADS: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    let result = configure_threads().and_then(|_| match &cli.command {
        Command::Gen(a) => run_gen(a, cli.verbose),
        Command::Psd(a) => run_psd(a, cli.verbose),
        Command::Diagnose(a) => run_diagnose(a),
        Command::Compare(a) => run_compare(a),
        Command::Train(a) => run_train(a, cli.verbose),
        Command::Eval(a) => run_eval(a, cli.verbose),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
