//! Power-spectrum loss, spectral and physical diagnostics, and synthetic
//! benchmarks for gridded downscaling on periodic grids.

pub mod error;
pub mod field;
pub mod grd;
pub mod loss;
pub mod metrics;
pub mod physics;
pub mod spectral;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
pub use field::{block_average_downsample, nearest_upsample, FieldPair, GridField};
pub use loss::{psd_loss, psd_loss_grad, total_loss, BaseLoss, LossConfig};
pub use metrics::{crps, mae, rmse, spectral_gap, CrpsEstimator, Ensemble};
pub use physics::{divergence, helmholtz_decompose, kinetic_energy, vorticity, DerivativeMethod, WindPair};
pub use spectral::{dft2, psd, radial_bin, spectral_derivative, Axis, BinScale, RadialSpectrum};
pub use synth::{make_dataset, SynthSpec};
pub use trainer::{backward, evaluate, forward, init_model, train, ToyDownscaler, TrainConfig, TrainHistory};
