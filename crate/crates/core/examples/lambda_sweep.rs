//! Trains the toy downscaler with and without the spectral term on synthetic
//! data and prints validation MAE and top-quartile gaps for each seed.
//!
//! Usage: `lambda_sweep [seeds] [epochs] [lr] [momentum] [batch] [lambdas] [kernel]`
//!
//! `lambdas` is a comma-separated list, default `0,0.01,0.1,1`.

use std::time::Instant;

use spectra_core::physics::DiagnosticsOptions;
use spectra_core::trainer::{evaluate, train, TrainConfig};
use spectra_core::{make_dataset, LossConfig, SynthSpec};

fn arg<T: std::str::FromStr>(i: usize, default: T) -> T {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> spectra_core::Result<()> {
    let seeds: u64 = arg(1, 5);
    let mut cfg = TrainConfig {
        epochs: arg(2, 30),
        lr: arg(3, 3e-2),
        momentum: arg(4, 0.9),
        batch_size: arg(5, 32),
        ..TrainConfig::default()
    };
    let lambdas: Vec<f64> = arg(6, String::from("0,0.01,0.1,1"))
        .split(',')
        .map(|s| s.trim().parse().expect("lambda list"))
        .collect();
    let kernel: usize = arg(7, 5);
    println!("seed,lambda,val_mae,gap_u,gap_div,gap_vort,seconds");
    for seed in 0..seeds {
        let spec = SynthSpec { seed, ..SynthSpec::default() };
        let mut data = make_dataset(&spec, 320, 4)?;
        let val = data.split_off(256);
        for &lam in &lambdas {
            let start = Instant::now();
            cfg.seed = seed;
            cfg.loss = LossConfig { lambda: lam, ..LossConfig::default() };
            let (model, _) = train(&data, &val, kernel, &cfg)?;
            let ev = evaluate(&model, &val, &DiagnosticsOptions::default())?;
            let mae: f64 = ev.metrics.variables.iter().map(|v| v.mae).sum::<f64>() / ev.metrics.variables.len() as f64;
            let gap = |n: &str| ev.diagnostics.variable(n).map(|v| v.top_quartile_gap()).unwrap_or(f64::NAN);
            println!(
                "{seed},{lam},{mae:.4},{:.4},{:.4},{:.4},{:.1}",
                gap("u"),
                gap("div"),
                gap("vort"),
                start.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
