//! NLMS, PNLMS, ZA-PNLMS and RZA-PNLMS weight updates.
//!
//! With `e(n) = d(n) - w^T(n) x(n)` computed from the pre-update weights,
//!
//! ```text
//! NLMS      w+ = w + mu x e / (x^T x + delta_p)
//! PNLMS     w+ = w + mu G x e / (x^T G x + delta_p)
//! ZA-PNLMS  w+ = PNLMS(w) - rho sgn(w)
//! RZA-PNLMS w+ = PNLMS(w) - rho sgn(w) / (1 + eps |w|)      (per tap)
//! ```
//!
//! where `G = diag(g)` comes from [`crate::gain::compute_gain`] and
//! `sgn(0) = 0`. The attractor always uses the sign of the pre-update tap.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gain::{compute_gain_into, GainParams, GainVector};
use crate::scalar::{dot, sgn, Real};
use crate::signal::{SignalBuffer, TapDelayLine, WeightVector};

/// Any tap whose magnitude exceeds this (or is non-finite) marks a run as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Nlms,
    Pnlms,
    ZaPnlms,
    RzaPnlms,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Nlms,
        Algorithm::Pnlms,
        Algorithm::ZaPnlms,
        Algorithm::RzaPnlms,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Nlms => "nlms",
            Algorithm::Pnlms => "pnlms",
            Algorithm::ZaPnlms => "za_pnlms",
            Algorithm::RzaPnlms => "rza_pnlms",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == norm)
            .ok_or_else(|| Error::Parse(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig<T> {
    pub algorithm: Algorithm,
    /// Overall step size.
    pub mu: T,
    /// Regularizer added to the normalizing denominator.
    pub delta_p: T,
    /// Unused by NLMS.
    pub gain_params: GainParams<T>,
    /// Zero-attraction strength (ZA/RZA only).
    pub rho: T,
    /// Reweighting constant (RZA only); `0` reduces RZA to ZA.
    pub epsilon: T,
    /// Stop the attractor from pushing a tap through zero.
    #[serde(default)]
    pub clamp_zero_crossing: bool,
}

impl<T: Real> FilterConfig<T> {
    fn c(v: f64) -> T {
        T::from_f64_lossy(v)
    }

    /// Step size, regularizer and gain constants of the sparse-identification
    /// experiments (mu = 0.7, delta_p = 0.01, rho_g = 0.01, delta = 0.001,
    /// rho = 1e-4, eps = 10).
    pub fn standard(algorithm: Algorithm) -> Self {
        FilterConfig {
            algorithm,
            mu: Self::c(0.7),
            delta_p: Self::c(0.01),
            gain_params: GainParams {
                rho_g: Self::c(0.01),
                delta: Self::c(0.001),
            },
            rho: Self::c(1e-4),
            epsilon: Self::c(10.0),
            clamp_zero_crossing: false,
        }
    }

    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &'static str, v: T| -> Result<()> {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("{v} must be finite and >= 0"),
                });
            }
            Ok(())
        };
        if !(self.mu > T::zero()) || !self.mu.is_finite() {
            return Err(Error::InvalidParameter {
                name: "mu",
                reason: format!("{} must be > 0", self.mu),
            });
        }
        nonneg("delta_p", self.delta_p)?;
        nonneg("rho", self.rho)?;
        nonneg("epsilon", self.epsilon)?;
        if self.algorithm != Algorithm::Nlms {
            self.gain_params.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterState<T> {
    pub w: WeightVector<T>,
    /// Number of updates applied so far.
    pub n: usize,
    pub last_error: T,
}

impl<T: Real> FilterState<T> {
    pub fn zeros(len: usize) -> Self {
        FilterState {
            w: WeightVector::zeros(len),
            n: 0,
            last_error: T::zero(),
        }
    }
}

/// Result of one in-place update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome<T> {
    /// A-priori error `d - w^T x`.
    pub error: T,
    /// Some tap left the finite range or crossed [`DIVERGENCE_THRESHOLD`].
    pub diverged: bool,
}

fn check_inputs<T: Real>(len: usize, x: &[T], d: T) -> Result<()> {
    if x.len() != len {
        return Err(Error::LengthMismatch {
            what: "regressor",
            got: x.len(),
            expected: len,
        });
    }
    if !d.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("input sample"));
    }
    Ok(())
}

/// Applies one update of `cfg.algorithm` to `w` in place. `gain` is scratch
/// space of length `L`; on return it holds the gain used for this update.
pub fn update_in_place<T: Real>(
    cfg: &FilterConfig<T>,
    w: &mut [T],
    gain: &mut [T],
    x: &[T],
    d: T,
) -> Result<StepOutcome<T>> {
    check_inputs(w.len(), x, d)?;
    let limit = T::from_f64_lossy(DIVERGENCE_THRESHOLD);
    let error = d - dot(w, x);
    let mut diverged = false;

    if cfg.algorithm == Algorithm::Nlms {
        let scale = cfg.mu * error / (dot(x, x) + cfg.delta_p);
        for (wi, &xi) in w.iter_mut().zip(x) {
            *wi = *wi + scale * xi;
            diverged |= !(wi.abs() <= limit);
        }
        let u = T::one() / T::from_usize(gain.len().max(1)).expect("length fits in T");
        gain.iter_mut().for_each(|g| *g = u);
        return Ok(StepOutcome { error, diverged });
    }

    compute_gain_into(w, &cfg.gain_params, gain);
    proportionate_update(cfg, w, gain, x, error, &mut diverged, limit);
    Ok(StepOutcome { error, diverged })
}

/// Data term with an explicit gain, followed by the configured attractor.
fn proportionate_update<T: Real>(
    cfg: &FilterConfig<T>,
    w: &mut [T],
    gain: &[T],
    x: &[T],
    error: T,
    diverged: &mut bool,
    limit: T,
) {
    let energy = gain
        .iter()
        .zip(x)
        .fold(T::zero(), |acc, (&g, &xi)| acc + g * xi * xi);
    let scale = cfg.mu * error / (energy + cfg.delta_p);
    for ((wi, &gi), &xi) in w.iter_mut().zip(gain).zip(x) {
        let old = *wi;
        let data = old + scale * gi * xi;
        let attraction = match cfg.algorithm {
            Algorithm::Nlms | Algorithm::Pnlms => None,
            Algorithm::ZaPnlms => Some(cfg.rho * sgn(old)),
            Algorithm::RzaPnlms => Some(cfg.rho * sgn(old) / (T::one() + cfg.epsilon * old.abs())),
        };
        *wi = match attraction {
            None => data,
            Some(a) => {
                let next = data - a;
                if cfg.clamp_zero_crossing && a != T::zero() && sgn(next) != sgn(data) {
                    T::zero()
                } else {
                    next
                }
            }
        };
        *diverged |= !(wi.abs() <= limit);
    }
}

fn require(cfg_alg: Algorithm, required: Algorithm) -> Result<()> {
    if cfg_alg != required {
        return Err(Error::AlgorithmMismatch {
            configured: cfg_alg.name(),
            required: required.name(),
        });
    }
    Ok(())
}

fn functional_step<T: Real>(
    state: &FilterState<T>,
    x: &[T],
    d: T,
    cfg: &FilterConfig<T>,
) -> Result<FilterState<T>> {
    let mut w = state.w.clone();
    let mut gain = vec![T::zero(); w.len()];
    let out = update_in_place(cfg, &mut w, &mut gain, x, d)?;
    if !w.is_finite() {
        return Err(Error::NonFinite("weight after update"));
    }
    Ok(FilterState {
        w,
        n: state.n + 1,
        last_error: out.error,
    })
}

pub fn nlms_step<T: Real>(state: &FilterState<T>, x: &[T], d: T, cfg: &FilterConfig<T>) -> Result<FilterState<T>> {
    require(cfg.algorithm, Algorithm::Nlms)?;
    functional_step(state, x, d, cfg)
}

pub fn pnlms_step<T: Real>(state: &FilterState<T>, x: &[T], d: T, cfg: &FilterConfig<T>) -> Result<FilterState<T>> {
    require(cfg.algorithm, Algorithm::Pnlms)?;
    functional_step(state, x, d, cfg)
}

pub fn zapnlms_step<T: Real>(state: &FilterState<T>, x: &[T], d: T, cfg: &FilterConfig<T>) -> Result<FilterState<T>> {
    require(cfg.algorithm, Algorithm::ZaPnlms)?;
    functional_step(state, x, d, cfg)
}

pub fn rzapnlms_step<T: Real>(state: &FilterState<T>, x: &[T], d: T, cfg: &FilterConfig<T>) -> Result<FilterState<T>> {
    require(cfg.algorithm, Algorithm::RzaPnlms)?;
    functional_step(state, x, d, cfg)
}

/// Dispatches on `cfg.algorithm`.
pub fn step<T: Real>(state: &FilterState<T>, x: &[T], d: T, cfg: &FilterConfig<T>) -> Result<FilterState<T>> {
    functional_step(state, x, d, cfg)
}

/// PNLMS data term with a caller-supplied gain instead of `compute_gain(w)`.
/// Any attractor in `cfg` is applied as usual.
pub fn step_with_gain<T: Real>(
    state: &FilterState<T>,
    x: &[T],
    d: T,
    gain: &GainVector<T>,
    cfg: &FilterConfig<T>,
) -> Result<FilterState<T>> {
    check_inputs(state.w.len(), x, d)?;
    if gain.len() != state.w.len() {
        return Err(Error::LengthMismatch {
            what: "gain",
            got: gain.len(),
            expected: state.w.len(),
        });
    }
    let mut w = state.w.clone();
    let error = d - dot(&w, x);
    let mut diverged = false;
    let limit = T::from_f64_lossy(DIVERGENCE_THRESHOLD);
    proportionate_update(cfg, &mut w, gain, x, error, &mut diverged, limit);
    Ok(FilterState {
        w,
        n: state.n + 1,
        last_error: error,
    })
}

/// A running adaptive filter with its own tapped delay line.
#[derive(Debug, Clone)]
pub struct AdaptiveFilter<T: Real> {
    cfg: FilterConfig<T>,
    state: FilterState<T>,
    gain: Vec<T>,
    line: TapDelayLine<T>,
}

impl<T: Real> AdaptiveFilter<T> {
    /// Zero-initialized filter with `len` taps.
    pub fn new(cfg: FilterConfig<T>, len: usize) -> Result<Self> {
        cfg.validate()?;
        if len == 0 {
            return Err(Error::EmptySystem);
        }
        let u = T::one() / T::from_usize(len).expect("length fits in T");
        Ok(AdaptiveFilter {
            cfg,
            state: FilterState::zeros(len),
            gain: vec![u; len],
            line: TapDelayLine::new(len),
        })
    }

    /// Pushes `x(n)` into the delay line and adapts towards `d(n)`.
    pub fn process(&mut self, x: T, d: T) -> Result<StepOutcome<T>> {
        self.line.push(x);
        let out = update_in_place(&self.cfg, &mut self.state.w, &mut self.gain, self.line.regressor(), d)?;
        self.state.n += 1;
        self.state.last_error = out.error;
        Ok(out)
    }

    pub fn weights(&self) -> &[T] {
        &self.state.w
    }

    /// Gain used by the most recent update (uniform before the first one).
    pub fn gain(&self) -> &[T] {
        &self.gain
    }

    pub fn regressor(&self) -> &[T] {
        self.line.regressor()
    }

    pub fn state(&self) -> &FilterState<T> {
        &self.state
    }

    pub fn config(&self) -> &FilterConfig<T> {
        &self.cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordPolicy {
    /// State after every update, plus the initial state.
    Every,
    /// States at `n = 0, k, 2k, ...`.
    Stride(usize),
    FinalOnly,
}

impl RecordPolicy {
    pub fn stride(self) -> Option<usize> {
        match self {
            RecordPolicy::Every => Some(1),
            RecordPolicy::Stride(k) => Some(k),
            RecordPolicy::FinalOnly => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    /// Update count at which the threshold was crossed.
    pub iteration: usize,
    pub max_abs_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput<T> {
    pub snapshots: Vec<FilterState<T>>,
    pub errors: Vec<T>,
    pub final_state: FilterState<T>,
    pub divergence: Option<Divergence>,
}

/// Runs a zero-initialized filter over `input`/`desired`.
///
/// A run whose weights cross [`DIVERGENCE_THRESHOLD`] stops at that sample
/// and reports it in [`RunOutput::divergence`].
pub fn run_filter<T: Real>(
    cfg: &FilterConfig<T>,
    len: usize,
    input: &SignalBuffer<T>,
    desired: &SignalBuffer<T>,
    record: RecordPolicy,
) -> Result<RunOutput<T>> {
    if input.len() != desired.len() {
        return Err(Error::LengthMismatch {
            what: "desired",
            got: desired.len(),
            expected: input.len(),
        });
    }
    if record == RecordPolicy::Stride(0) {
        return Err(Error::InvalidParameter {
            name: "stride",
            reason: "must be at least 1".into(),
        });
    }
    let mut filter = AdaptiveFilter::new(*cfg, len)?;
    let stride = record.stride();
    let mut snapshots = Vec::new();
    if stride.is_some() {
        snapshots.push(filter.state().clone());
    }
    let mut errors = Vec::with_capacity(input.len());
    let mut divergence = None;
    for (&x, &d) in input.samples().iter().zip(desired.samples()) {
        let out = filter.process(x, d)?;
        errors.push(out.error);
        let n = filter.state().n;
        if out.diverged {
            let max_abs_weight = filter
                .weights()
                .iter()
                .map(|v| v.to_f64_lossy().abs())
                .fold(0.0, |m: f64, v| if v.is_nan() { f64::NAN } else { m.max(v) });
            divergence = Some(Divergence {
                iteration: n,
                max_abs_weight,
            });
            break;
        }
        if let Some(k) = stride {
            if n % k == 0 {
                snapshots.push(filter.state().clone());
            }
        }
    }
    let final_state = filter.state().clone();
    if record == RecordPolicy::FinalOnly {
        snapshots.push(final_state.clone());
    }
    Ok(RunOutput {
        snapshots,
        errors,
        final_state,
        divergence,
    })
}
