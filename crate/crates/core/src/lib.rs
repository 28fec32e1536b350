//! Sparse system identification with zero-attracting proportionate NLMS
//! filters.
//!
//! * [`signal`]: seeded sparse systems, white/AR(1) inputs, noise, `d(n)`.
//! * [`gain`]: the proportionate gain diagonal `G(n)`.
//! * [`filters`]: NLMS, PNLMS, ZA-PNLMS and RZA-PNLMS updates and a run driver.
//! * [`theory`]: transform-domain checks, angular discretization and the
//!   steady-state mean/bias predictors.
//! * [`harness`]: Monte-Carlo experiments, MSD/EMSE curves and bias extraction.
//! * [`export`]: CSV and JSON persistence of experiment results.
//!
//! The filter kernels are generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below name the double-precision instantiations used by the
//! theory and harness layers.

pub mod error;
pub mod export;
pub mod filters;
pub mod gain;
pub mod harness;
pub mod scalar;
pub mod signal;
pub mod theory;

pub use error::{Error, Result};
pub use filters::{
    run_filter, AdaptiveFilter, Algorithm, FilterConfig, FilterState, RecordPolicy, RunOutput,
};
pub use gain::{compute_gain, compute_gamma, GainParams, GainVector};
pub use harness::{extract_bias, run_experiment, ExperimentConfig, ExperimentResult, InputModel};
pub use scalar::{sgn, Real};
pub use signal::{RngSeed, SignalBuffer, SparseSystem, WeightVector};
pub use theory::{predict_bias, SteadyStateReport};

pub type WeightVector64 = WeightVector<f64>;
pub type GainVector64 = GainVector<f64>;
pub type GainParams64 = GainParams<f64>;
pub type FilterConfig64 = FilterConfig<f64>;
pub type FilterState64 = FilterState<f64>;
pub type AdaptiveFilter64 = AdaptiveFilter<f64>;
pub type SparseSystem64 = SparseSystem<f64>;
pub type SignalBuffer64 = SignalBuffer<f64>;

pub type FilterConfig32 = FilterConfig<f32>;
pub type AdaptiveFilter32 = AdaptiveFilter<f32>;
