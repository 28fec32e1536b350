//! Monte-Carlo experiments: independent trials of one or more filters on a
//! common sparse system, averaged per tap.
//!
//! Every trial draws its own input and noise realization; all filters of a
//! trial see the same realization, so algorithms can be compared pairwise.
//! Trials run in parallel and are reduced in trial order, which makes the
//! result a pure function of the [`ExperimentConfig`].

use std::ops::RangeInclusive;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{AdaptiveFilter, Algorithm, FilterConfig};
use crate::scalar::sgn;
use crate::signal::{gen_ar1, gen_sparse_system, gen_white_gaussian, system_output, RngSeed, SignalBuffer, SparseSystem};
use crate::theory::ar1_correlation;

pub const DEFAULT_STRIDE: usize = 10;
/// Fraction of the final iterations treated as steady state.
pub const DEFAULT_STEADY_WINDOW: f64 = 0.1;

const INPUT_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

/// 37-tap layout on 512 taps used for the reference learning-curve and bias
/// experiments. Indices are zero-based.
pub const REFERENCE_TAPS: [(usize, f64); 37] = [
    (31, -0.08),
    (33, 0.15),
    (35, -0.3),
    (36, 0.5),
    (37, 0.9),
    (38, -0.45),
    (39, 0.25),
    (41, -0.2),
    (42, 0.12),
    (44, -0.15),
    (46, 0.08),
    (47, -0.06),
    (49, 0.1),
    (51, -0.07),
    (53, 0.05),
    (55, 0.1),
    (57, -0.04),
    (59, 0.06),
    (61, -0.03),
    (63, 0.04),
    (65, 0.03),
    (67, -0.05),
    (70, 0.02),
    (73, -0.03),
    (76, 0.02),
    (80, -0.02),
    (84, 0.015),
    (88, -0.01),
    (93, 0.01),
    (98, -0.01),
    (104, 0.008),
    (111, -0.006),
    (119, 0.005),
    (128, -0.004),
    (138, 0.003),
    (150, -0.003),
    (163, 0.002),
];
pub const REFERENCE_LEN: usize = 512;

/// Reduced 8-tap system on 64 taps for quick runs.
pub const SMOKE_TAPS: [(usize, f64); 8] = [
    (3, -0.6),
    (10, -0.8),
    (17, 0.7),
    (24, 0.5),
    (37, 0.9),
    (45, -0.42),
    (55, 0.35),
    (60, -0.3),
];
pub const SMOKE_LEN: usize = 64;

pub fn reference_system() -> SparseSystem<f64> {
    gen_sparse_system(REFERENCE_LEN, &REFERENCE_TAPS).expect("valid layout")
}

pub fn smoke_system() -> SparseSystem<f64> {
    gen_sparse_system(SMOKE_LEN, &SMOKE_TAPS).expect("valid layout")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum InputModel {
    White { variance: f64 },
    Ar1 { pole: f64, innovation_variance: f64 },
}

impl InputModel {
    pub fn generate(&self, n: usize, seed: RngSeed) -> Result<SignalBuffer<f64>> {
        match *self {
            InputModel::White { variance } => gen_white_gaussian(n, variance, seed),
            InputModel::Ar1 {
                pole,
                innovation_variance,
            } => gen_ar1(n, pole, innovation_variance, seed),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            InputModel::White { variance } => variance,
            InputModel::Ar1 {
                pole,
                innovation_variance,
            } => innovation_variance / (1.0 - pole * pole),
        }
    }

    pub fn is_white(&self) -> bool {
        matches!(self, InputModel::White { .. })
    }

    /// `R = E[x(n) x(n)^T]` for a regressor of `len` taps.
    pub fn correlation(&self, len: usize) -> Result<DMatrix<f64>> {
        match *self {
            InputModel::White { variance } => Ok(DMatrix::identity(len, len) * variance),
            InputModel::Ar1 {
                pole,
                innovation_variance,
            } => ar1_correlation(len, pole, innovation_variance),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            InputModel::White { variance } => variance.is_finite() && variance >= 0.0,
            InputModel::Ar1 {
                pole,
                innovation_variance,
            } => pole.abs() < 1.0 && innovation_variance.is_finite() && innovation_variance >= 0.0,
        };
        if !ok {
            return Err(Error::InvalidParameter {
                name: "input",
                reason: format!("{self:?} is not a valid input model"),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: SparseSystem<f64>,
    pub input: InputModel,
    pub noise_variance: f64,
    /// Filters compared on identical realizations.
    pub filters: Vec<FilterConfig<f64>>,
    pub iterations: usize,
    pub trials: usize,
    pub seed: u64,
    /// Weight snapshots are kept at `n = 0, stride, 2 stride, ...`.
    pub stride: usize,
    /// Steady-state window as a fraction of the iterations, in `(0, 1]`.
    pub steady_window: f64,
}

impl ExperimentConfig {
    /// Unit-variance white input, `sigma_v^2 = 1e-3`, 25000 iterations,
    /// 30 trials and the default stride and window.
    pub fn new(system: SparseSystem<f64>, filters: Vec<FilterConfig<f64>>) -> Self {
        ExperimentConfig {
            system,
            input: InputModel::White { variance: 1.0 },
            noise_variance: 1e-3,
            filters,
            iterations: 25_000,
            trials: 30,
            seed: 1,
            stride: DEFAULT_STRIDE,
            steady_window: DEFAULT_STEADY_WINDOW,
        }
    }

    /// The 512-tap reference experiment with standard parameters.
    pub fn reference(algorithms: &[Algorithm]) -> Self {
        ExperimentConfig::new(reference_system(), standard_filters(algorithms))
    }

    /// The 64-tap smoke experiment: 10 trials of 5000 iterations.
    pub fn smoke(algorithms: &[Algorithm]) -> Self {
        ExperimentConfig {
            iterations: 5000,
            trials: 10,
            ..ExperimentConfig::new(smoke_system(), standard_filters(algorithms))
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter {
                name: "iterations",
                reason: "must be at least 1".into(),
            });
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter {
                name: "trials",
                reason: "must be at least 1".into(),
            });
        }
        if self.stride == 0 {
            return Err(Error::InvalidParameter {
                name: "stride",
                reason: "must be at least 1".into(),
            });
        }
        if self.filters.is_empty() {
            return Err(Error::InvalidParameter {
                name: "filters",
                reason: "at least one filter is required".into(),
            });
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "noise_variance",
                reason: format!("{} must be finite and >= 0", self.noise_variance),
            });
        }
        steady_range(self.iterations, self.steady_window)?;
        self.input.validate()?;
        self.filters.iter().try_for_each(|f| f.validate())
    }

    pub fn snapshot_iterations(&self) -> Vec<usize> {
        (0..=self.iterations).step_by(self.stride).collect()
    }
}

fn standard_filters(algorithms: &[Algorithm]) -> Vec<FilterConfig<f64>> {
    algorithms.iter().map(|&a| FilterConfig::standard(a)).collect()
}

/// Update indices `n` (1-based, `n = N` is the last update) in the final
/// `ceil(window * N)` iterations.
pub fn steady_range(iterations: usize, window: f64) -> Result<RangeInclusive<usize>> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::EmptyWindow(format!("window {window} is outside (0, 1]")));
    }
    if iterations == 0 {
        return Err(Error::EmptyWindow("no iterations".into()));
    }
    let k = ((window * iterations as f64).ceil() as usize).clamp(1, iterations);
    Ok(iterations - k + 1..=iterations)
}

/// Seed of trial `trial`; its input and noise use two derived streams.
pub fn trial_seed(base: u64, trial: usize) -> RngSeed {
    RngSeed(base).derive(trial as u64)
}

/// Input `x(n)` and desired response `d(n)` of one trial.
pub fn trial_signals(cfg: &ExperimentConfig, trial: usize) -> Result<(SignalBuffer<f64>, SignalBuffer<f64>)> {
    let seed = trial_seed(cfg.seed, trial);
    let input = cfg.input.generate(cfg.iterations, seed.derive(INPUT_STREAM))?;
    let noise = gen_white_gaussian(cfg.iterations, cfg.noise_variance, seed.derive(NOISE_STREAM))?;
    let desired = system_output(&cfg.system, &input, &noise)?;
    Ok((input, desired))
}

/// `||w_opt - w||^2` for each weight vector of a trajectory.
pub fn msd_curve<'a, I>(trajectory: I, system: &SparseSystem<f64>) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    trajectory
        .into_iter()
        .map(|w| {
            if w.len() != system.len() {
                return Err(Error::LengthMismatch {
                    what: "weights",
                    got: w.len(),
                    expected: system.len(),
                });
            }
            Ok(squared_deviation(w, &system.weights))
        })
        .collect()
}

fn squared_deviation(w: &[f64], w_opt: &[f64]) -> f64 {
    w.iter().zip(w_opt).map(|(a, b)| (b - a) * (b - a)).sum()
}

/// `max(E[e^2(n)] - sigma_v^2, 0)` per iteration.
pub fn emse_curve(mean_sq_error: &[f64], noise_variance: f64) -> Vec<f64> {
    mean_sq_error.iter().map(|e| (e - noise_variance).max(0.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialDivergence {
    pub trial: usize,
    pub iteration: usize,
    pub max_abs_weight: f64,
}

/// Trial-averaged series for one filter. Diverged trials are listed in
/// `divergences` and left out of every average; when all trials diverge the
/// series are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmResult {
    pub config: FilterConfig<f64>,
    pub trials_averaged: usize,
    pub divergences: Vec<TrialDivergence>,
    /// `E[w(n)]` at each snapshot iteration.
    pub mean_weights: Vec<Vec<f64>>,
    /// MSD at each snapshot iteration.
    pub msd: Vec<f64>,
    /// `E[e^2(n)]` for `n = 1..=N`.
    pub mean_sq_error: Vec<f64>,
    pub emse: Vec<f64>,
    /// `E[w]` averaged over every iteration of the steady window.
    pub steady_mean_weights: Vec<f64>,
    /// `E[g]` over the steady window.
    pub steady_mean_gain: Vec<f64>,
    /// `E[sgn(w)]` over the steady window.
    pub steady_mean_sign: Vec<f64>,
    /// `w_opt - steady_mean_weights`.
    pub bias: Vec<f64>,
}

impl AlgorithmResult {
    pub fn algorithm(&self) -> Algorithm {
        self.config.algorithm
    }

    pub fn any_diverged(&self) -> bool {
        !self.divergences.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub w_opt: Vec<f64>,
    pub input: InputModel,
    pub noise_variance: f64,
    pub iterations: usize,
    pub trials: usize,
    pub stride: usize,
    pub steady_window: f64,
    pub snapshot_iterations: Vec<usize>,
    pub algorithms: Vec<AlgorithmResult>,
}

impl ExperimentResult {
    pub fn get(&self, algorithm: Algorithm) -> Option<&AlgorithmResult> {
        self.algorithms.iter().find(|a| a.algorithm() == algorithm)
    }

    fn require(&self, algorithm: Algorithm) -> Result<&AlgorithmResult> {
        let r = self.get(algorithm).ok_or(Error::InvalidParameter {
            name: "algorithm",
            reason: format!("{algorithm} is not part of this result"),
        })?;
        if r.trials_averaged == 0 {
            return Err(Error::Degenerate("every trial diverged"));
        }
        Ok(r)
    }

    /// Snapshot positions whose iteration lies in the steady window.
    fn window_snapshots(&self, window: f64) -> Result<Vec<usize>> {
        let range = steady_range(self.iterations, window)?;
        let picked: Vec<usize> = self
            .snapshot_iterations
            .iter()
            .enumerate()
            .filter(|(_, n)| range.contains(n))
            .map(|(k, _)| k)
            .collect();
        if picked.is_empty() {
            return Err(Error::StrideTooCoarse(format!(
                "no snapshot at stride {} falls in iterations {}..={}",
                self.stride,
                range.start(),
                range.end()
            )));
        }
        Ok(picked)
    }

    /// Mean of the recorded `E[w(n)]` snapshots inside the window.
    pub fn window_mean_weights(&self, algorithm: Algorithm, window: f64) -> Result<Vec<f64>> {
        let r = self.require(algorithm)?;
        let picked = self.window_snapshots(window)?;
        let mut acc = vec![0.0; self.w_opt.len()];
        for &k in &picked {
            acc.iter_mut().zip(&r.mean_weights[k]).for_each(|(a, w)| *a += w);
        }
        let count = picked.len() as f64;
        Ok(acc.into_iter().map(|a| a / count).collect())
    }

    /// Mean MSD over the snapshots inside the window.
    pub fn window_msd(&self, algorithm: Algorithm, window: f64) -> Result<f64> {
        let r = self.require(algorithm)?;
        let picked = self.window_snapshots(window)?;
        Ok(picked.iter().map(|&k| r.msd[k]).sum::<f64>() / picked.len() as f64)
    }

    /// `max(mean E[e^2(n)] - sigma_v^2, 0)` over the window.
    pub fn window_emse(&self, algorithm: Algorithm, window: f64) -> Result<f64> {
        let r = self.require(algorithm)?;
        let range = steady_range(self.iterations, window)?;
        let count = range.clone().count() as f64;
        let mean = r.mean_sq_error[range.start() - 1..*range.end()].iter().sum::<f64>() / count;
        Ok((mean - self.noise_variance).max(0.0))
    }
}

/// Per-tap `w_opt,i - mean over the window of E[w_i(n)]`, using the
/// recorded snapshots.
pub fn extract_bias(result: &ExperimentResult, algorithm: Algorithm, window: f64) -> Result<Vec<f64>> {
    let mean = result.window_mean_weights(algorithm, window)?;
    Ok(result.w_opt.iter().zip(mean).map(|(w, m)| w - m).collect())
}

struct TrialRun {
    weights: Vec<f64>,
    msd: Vec<f64>,
    sq_error: Vec<f64>,
    steady_w: Vec<f64>,
    steady_g: Vec<f64>,
    steady_sign: Vec<f64>,
}

enum TrialOutcome {
    Completed(TrialRun),
    Diverged(TrialDivergence),
}

fn run_one(
    cfg: &ExperimentConfig,
    filter_cfg: &FilterConfig<f64>,
    trial: usize,
    input: &SignalBuffer<f64>,
    desired: &SignalBuffer<f64>,
    window: &RangeInclusive<usize>,
) -> Result<TrialOutcome> {
    let len = cfg.system.len();
    let w_opt = &cfg.system.weights;
    let mut filter = AdaptiveFilter::new(*filter_cfg, len)?;
    let snapshots = cfg.iterations / cfg.stride + 1;
    let mut weights = Vec::with_capacity(snapshots * len);
    let mut msd = Vec::with_capacity(snapshots);
    weights.extend_from_slice(filter.weights());
    msd.push(squared_deviation(filter.weights(), w_opt));
    let mut sq_error = Vec::with_capacity(cfg.iterations);
    let mut steady_w = vec![0.0; len];
    let mut steady_g = vec![0.0; len];
    let mut steady_sign = vec![0.0; len];

    for (k, (&x, &d)) in input.samples().iter().zip(desired.samples()).enumerate() {
        let n = k + 1;
        let out = filter.process(x, d)?;
        if out.diverged {
            let max_abs_weight = filter.weights().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            return Ok(TrialOutcome::Diverged(TrialDivergence {
                trial,
                iteration: n,
                max_abs_weight,
            }));
        }
        sq_error.push(out.error * out.error);
        if n % cfg.stride == 0 {
            weights.extend_from_slice(filter.weights());
            msd.push(squared_deviation(filter.weights(), w_opt));
        }
        if window.contains(&n) {
            for (i, &w) in filter.weights().iter().enumerate() {
                steady_w[i] += w;
                steady_g[i] += filter.gain()[i];
                steady_sign[i] += sgn(w);
            }
        }
    }
    let count = window.clone().count() as f64;
    for v in steady_w.iter_mut().chain(&mut steady_g).chain(&mut steady_sign) {
        *v /= count;
    }
    Ok(TrialOutcome::Completed(TrialRun {
        weights,
        msd,
        sq_error,
        steady_w,
        steady_g,
        steady_sign,
    }))
}

fn run_trial(cfg: &ExperimentConfig, trial: usize, window: &RangeInclusive<usize>) -> Result<Vec<TrialOutcome>> {
    let (input, desired) = trial_signals(cfg, trial)?;
    cfg.filters
        .iter()
        .map(|f| run_one(cfg, f, trial, &input, &desired, window))
        .collect()
}

#[derive(Default)]
struct Accumulator {
    count: usize,
    divergences: Vec<TrialDivergence>,
    weights: Vec<f64>,
    msd: Vec<f64>,
    sq_error: Vec<f64>,
    steady_w: Vec<f64>,
    steady_g: Vec<f64>,
    steady_sign: Vec<f64>,
}

fn add_into(acc: &mut Vec<f64>, v: Vec<f64>) {
    if acc.is_empty() {
        *acc = v;
    } else {
        acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
    }
}

impl Accumulator {
    fn add(&mut self, outcome: TrialOutcome) {
        match outcome {
            TrialOutcome::Diverged(d) => self.divergences.push(d),
            TrialOutcome::Completed(run) => {
                self.count += 1;
                add_into(&mut self.weights, run.weights);
                add_into(&mut self.msd, run.msd);
                add_into(&mut self.sq_error, run.sq_error);
                add_into(&mut self.steady_w, run.steady_w);
                add_into(&mut self.steady_g, run.steady_g);
                add_into(&mut self.steady_sign, run.steady_sign);
            }
        }
    }

    fn finish(self, config: FilterConfig<f64>, w_opt: &[f64], noise_variance: f64) -> AlgorithmResult {
        let scale = |v: Vec<f64>| -> Vec<f64> {
            let c = self.count as f64;
            v.into_iter().map(|x| x / c).collect()
        };
        let len = w_opt.len();
        let mean_weights = scale(self.weights.clone()).chunks(len).map(|c| c.to_vec()).collect();
        let mean_sq_error = scale(self.sq_error.clone());
        let steady_mean_weights = scale(self.steady_w.clone());
        let bias = if self.count == 0 {
            Vec::new()
        } else {
            w_opt.iter().zip(&steady_mean_weights).map(|(w, m)| w - m).collect()
        };
        AlgorithmResult {
            config,
            trials_averaged: self.count,
            mean_weights,
            msd: scale(self.msd.clone()),
            emse: emse_curve(&mean_sq_error, noise_variance),
            mean_sq_error,
            steady_mean_weights,
            steady_mean_gain: scale(self.steady_g.clone()),
            steady_mean_sign: scale(self.steady_sign.clone()),
            bias,
            divergences: self.divergences,
        }
    }
}

/// Runs every trial of `cfg` and averages per filter.
///
/// Trials are executed in parallel on the current rayon pool, in batches of
/// the pool size, and summed in trial order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let window = steady_range(cfg.iterations, cfg.steady_window)?;
    let mut accs: Vec<Accumulator> = cfg.filters.iter().map(|_| Accumulator::default()).collect();
    let batch = rayon::current_num_threads().max(1);
    let trials: Vec<usize> = (0..cfg.trials).collect();
    for chunk in trials.chunks(batch) {
        let outcomes: Vec<Result<Vec<TrialOutcome>>> =
            chunk.par_iter().map(|&t| run_trial(cfg, t, &window)).collect();
        for trial in outcomes {
            for (acc, outcome) in accs.iter_mut().zip(trial?) {
                acc.add(outcome);
            }
        }
    }
    let w_opt = cfg.system.weights.to_vec();
    let algorithms = accs
        .into_iter()
        .zip(&cfg.filters)
        .map(|(acc, f)| acc.finish(*f, &w_opt, cfg.noise_variance))
        .collect();
    Ok(ExperimentResult {
        w_opt,
        input: cfg.input,
        noise_variance: cfg.noise_variance,
        iterations: cfg.iterations,
        trials: cfg.trials,
        stride: cfg.stride,
        steady_window: cfg.steady_window,
        snapshot_iterations: cfg.snapshot_iterations(),
        algorithms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{run_filter, RecordPolicy};

    fn tiny(algorithms: &[Algorithm]) -> ExperimentConfig {
        ExperimentConfig {
            iterations: 400,
            trials: 3,
            ..ExperimentConfig::new(
                gen_sparse_system(8, &[(1, 0.9), (5, -0.3)]).unwrap(),
                standard_filters(algorithms),
            )
        }
    }

    #[test]
    fn reference_layouts() {
        let s = reference_system();
        assert_eq!(s.len(), 512);
        assert_eq!(s.active_indices.len(), 37);
        assert_eq!(s.weights[37], 0.9);
        assert_eq!(s.weights[1], 0.0);
        assert_eq!(s.weights[67], -0.05);
        let m = smoke_system();
        assert_eq!(m.active_indices.len(), 8);
        assert_eq!(m.weights[37], 0.9);
        assert_eq!(m.weights[1], 0.0);
    }

    #[test]
    fn steady_range_bounds() {
        assert_eq!(steady_range(25_000, 0.1).unwrap(), 22_501..=25_000);
        assert_eq!(steady_range(10, 1.0).unwrap(), 1..=10);
        assert_eq!(steady_range(10, 1e-9).unwrap(), 10..=10);
        assert!(matches!(steady_range(10, 0.0), Err(Error::EmptyWindow(_))));
        assert!(matches!(steady_range(10, 1.5), Err(Error::EmptyWindow(_))));
    }

    #[test]
    fn config_validation() {
        let ok = tiny(&[Algorithm::Pnlms]);
        assert!(ok.validate().is_ok());
        for bad in [
            ExperimentConfig { iterations: 0, ..ok.clone() },
            ExperimentConfig { trials: 0, ..ok.clone() },
            ExperimentConfig { stride: 0, ..ok.clone() },
            ExperimentConfig { steady_window: 0.0, ..ok.clone() },
            ExperimentConfig { filters: vec![], ..ok.clone() },
            ExperimentConfig { noise_variance: -1.0, ..ok.clone() },
            ExperimentConfig {
                input: InputModel::Ar1 {
                    pole: 1.0,
                    innovation_variance: 1.0,
                },
                ..ok.clone()
            },
        ] {
            assert!(run_experiment(&bad).is_err());
        }
    }

    #[test]
    fn single_trial_matches_run_filter() {
        let cfg = ExperimentConfig {
            trials: 1,
            stride: 7,
            ..tiny(&[Algorithm::ZaPnlms, Algorithm::Nlms])
        };
        let result = run_experiment(&cfg).unwrap();
        let (input, desired) = trial_signals(&cfg, 0).unwrap();
        for (k, f) in cfg.filters.iter().enumerate() {
            let run = run_filter(f, 8, &input, &desired, RecordPolicy::Stride(7)).unwrap();
            let r = &result.algorithms[k];
            assert_eq!(r.mean_weights.len(), run.snapshots.len());
            for (a, b) in r.mean_weights.iter().zip(&run.snapshots) {
                assert_eq!(a.as_slice(), &b.w[..]);
            }
            let sq: Vec<f64> = run.errors.iter().map(|e| e * e).collect();
            assert_eq!(r.mean_sq_error, sq);
        }
        assert_eq!(result.snapshot_iterations.len(), 400 / 7 + 1);
        assert_eq!(*result.snapshot_iterations.last().unwrap(), 399);
    }

    #[test]
    fn deterministic_and_shape_consistent() {
        let cfg = tiny(&[Algorithm::Pnlms, Algorithm::RzaPnlms]);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a, b);
        for r in &a.algorithms {
            assert_eq!(r.mean_weights.len(), 400 / 10 + 1);
            assert_eq!(r.msd.len(), r.mean_weights.len());
            assert_eq!(r.mean_sq_error.len(), 400);
            assert_eq!(r.emse.len(), 400);
            for i in 0..8 {
                assert_eq!(r.bias[i], a.w_opt[i] - r.steady_mean_weights[i]);
            }
            assert_eq!(r.msd[0], 0.81 + 0.09);
            assert!(r.msd.iter().chain(&r.emse).all(|v| *v >= 0.0));
            let gsum: f64 = r.steady_mean_gain.iter().sum();
            assert!((gsum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn paired_trials_share_realizations() {
        let cfg = tiny(&[Algorithm::Pnlms, Algorithm::ZaPnlms]);
        let cfg = ExperimentConfig {
            filters: vec![cfg.filters[0], FilterConfig { rho: 0.0, ..cfg.filters[1] }],
            ..cfg
        };
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.algorithms[0].mean_weights, r.algorithms[1].mean_weights);
        assert_eq!(r.algorithms[0].mean_sq_error, r.algorithms[1].mean_sq_error);
    }

    #[test]
    fn trial_seeds_are_independent_of_filters() {
        let a = tiny(&[Algorithm::Pnlms]);
        let b = tiny(&[Algorithm::Nlms, Algorithm::Pnlms]);
        let ra = run_experiment(&a).unwrap();
        let rb = run_experiment(&b).unwrap();
        assert_eq!(ra.algorithms[0], rb.algorithms[1]);
    }

    #[test]
    fn noiseless_pnlms_identifies_exactly() {
        let cfg = ExperimentConfig {
            noise_variance: 0.0,
            iterations: 3000,
            trials: 2,
            stride: 100,
            ..ExperimentConfig::new(
                gen_sparse_system(4, &[(0, 1.0), (2, -0.5)]).unwrap(),
                vec![FilterConfig::standard(Algorithm::Pnlms)],
            )
        };
        let r = run_experiment(&cfg).unwrap();
        assert!(*r.algorithms[0].msd.last().unwrap() <= 1e-10);
        assert!(r.window_emse(Algorithm::Pnlms, 0.1).unwrap() <= 1e-10);
    }

    #[test]
    fn divergent_trials_are_flagged_and_excluded() {
        let cfg = tiny(&[Algorithm::Nlms]);
        let cfg = ExperimentConfig {
            filters: vec![FilterConfig { mu: 4.0, ..cfg.filters[0] }],
            iterations: 5000,
            ..cfg
        };
        let r = run_experiment(&cfg).unwrap();
        let a = &r.algorithms[0];
        assert_eq!(a.divergences.len(), 3);
        assert_eq!(a.trials_averaged, 0);
        assert!(a.mean_weights.is_empty() && a.bias.is_empty());
        assert!(extract_bias(&r, Algorithm::Nlms, 0.1).is_err());
    }

    #[test]
    fn bias_extraction() {
        let mut r = run_experiment(&tiny(&[Algorithm::Pnlms])).unwrap();
        let w_opt = r.w_opt.clone();
        for w in r.algorithms[0].mean_weights.iter_mut() {
            *w = w_opt.clone();
        }
        assert!(extract_bias(&r, Algorithm::Pnlms, 0.1).unwrap().iter().all(|b| *b == 0.0));
        for w in r.algorithms[0].mean_weights.iter_mut() {
            *w = w_opt.iter().map(|v| v - 0.25).collect();
        }
        for b in extract_bias(&r, Algorithm::Pnlms, 0.5).unwrap() {
            assert!((b - 0.25).abs() < 1e-15);
        }
        assert!(matches!(extract_bias(&r, Algorithm::Pnlms, 0.0), Err(Error::EmptyWindow(_))));
        assert!(extract_bias(&r, Algorithm::Nlms, 0.1).is_err());
    }

    #[test]
    fn coarse_stride_is_reported() {
        let cfg = ExperimentConfig {
            stride: 300,
            ..tiny(&[Algorithm::Pnlms])
        };
        let r = run_experiment(&cfg).unwrap();
        assert!(matches!(extract_bias(&r, Algorithm::Pnlms, 0.1), Err(Error::StrideTooCoarse(_))));
        assert!(extract_bias(&r, Algorithm::Pnlms, 0.5).is_ok());
    }

    #[test]
    fn curve_helpers() {
        let s = gen_sparse_system(2, &[(0, 1.0)]).unwrap();
        let traj = [vec![1.0, 0.0], vec![0.0, 0.0], vec![1.0, 2.0]];
        assert_eq!(msd_curve(traj.iter().map(|v| v.as_slice()), &s).unwrap(), vec![0.0, 1.0, 4.0]);
        assert!(msd_curve([&[1.0][..]], &s).is_err());
        assert_eq!(emse_curve(&[1e-3, 2e-3, 5e-4], 1e-3), vec![0.0, 1e-3, 0.0]);
    }

    #[test]
    fn ar1_correlation_model() {
        let m = InputModel::Ar1 {
            pole: 0.5,
            innovation_variance: 0.75,
        };
        assert!((m.variance() - 1.0).abs() < 1e-15);
        let r = m.correlation(3).unwrap();
        assert!((r[(0, 2)] - 0.25).abs() < 1e-15);
        assert!(!m.is_white());
    }
}
