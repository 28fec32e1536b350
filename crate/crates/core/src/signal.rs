//! Seedable generation of sparse systems, input signals, observation noise
//! and the observed system output `d(n) = w_opt^T x(n) + v(n)`.
//!
//! All random streams come from ChaCha8 (`rand_chacha` 0.9) seeded with a
//! 64-bit seed; Gaussian variates use `rand_distr::StandardNormal`. Equal
//! arguments and seed give bit-identical buffers on every platform.

use std::io::{BufRead, Write};
use std::ops::{Deref, DerefMut};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Tap weights of a transversal filter: `w(n)`, `w_opt` or an error vector.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector<T>(pub Vec<T>);

impl<T: Real> WeightVector<T> {
    pub fn zeros(len: usize) -> Self {
        WeightVector(vec![T::zero(); len])
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn squared_norm(&self) -> T {
        self.0.iter().fold(T::zero(), |acc, &v| acc + v * v)
    }
}

impl<T> Deref for WeightVector<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<T> DerefMut for WeightVector<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.0
    }
}

impl<T> From<Vec<T>> for WeightVector<T> {
    fn from(v: Vec<T>) -> Self {
        WeightVector(v)
    }
}

/// 64-bit seed for one deterministic random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Child seed for a numbered sub-stream, mixed with SplitMix64 so that
    /// neighbouring stream ids give unrelated seeds.
    pub fn derive(self, stream: u64) -> RngSeed {
        let mut z = self.0 ^ splitmix64(stream.wrapping_add(0x5851_f42d_4c95_7f2d));
        z = splitmix64(z);
        RngSeed(z)
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A system impulse response together with the positions of its nonzero taps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSystem<T> {
    pub weights: WeightVector<T>,
    pub active_indices: Vec<usize>,
}

impl<T: Real> SparseSystem<T> {
    pub fn from_weights(weights: Vec<T>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptySystem);
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("system weight"));
        }
        let active_indices = weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != T::zero())
            .map(|(i, _)| i)
            .collect();
        Ok(SparseSystem {
            weights: WeightVector(weights),
            active_indices,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `w_opt^T x` for a regressor `x = [x(n), ..., x(n-L+1)]`, summed over
    /// active taps only.
    pub fn response(&self, regressor: &[T]) -> T {
        self.active_indices
            .iter()
            .fold(T::zero(), |acc, &i| acc + self.weights[i] * regressor[i])
    }
}

/// Builds a length-`len` system with the given `(index, value)` nonzeros.
pub fn gen_sparse_system<T: Real>(len: usize, taps: &[(usize, T)]) -> Result<SparseSystem<T>> {
    if len == 0 {
        return Err(Error::EmptySystem);
    }
    let mut weights = vec![T::zero(); len];
    let mut seen = vec![false; len];
    for &(index, value) in taps {
        if index >= len {
            return Err(Error::IndexOutOfRange { index, len });
        }
        if seen[index] {
            return Err(Error::DuplicateIndex(index));
        }
        seen[index] = true;
        weights[index] = value;
    }
    SparseSystem::from_weights(weights)
}

/// A finite sample sequence with the variance it was generated to have.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalBuffer<T> {
    samples: Vec<T>,
    nominal_variance: T,
}

impl<T: Real> SignalBuffer<T> {
    pub fn new(samples: Vec<T>, nominal_variance: T) -> Result<Self> {
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("signal sample"));
        }
        if !(nominal_variance >= T::zero()) || !nominal_variance.is_finite() {
            return Err(Error::InvalidParameter {
                name: "nominal_variance",
                reason: format!("{nominal_variance} is not a finite nonnegative value"),
            });
        }
        Ok(SignalBuffer {
            samples,
            nominal_variance,
        })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn nominal_variance(&self) -> T {
        self.nominal_variance
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn scaled(&self, factor: T) -> Result<Self> {
        SignalBuffer::new(
            self.samples.iter().map(|&v| v * factor).collect(),
            self.nominal_variance * factor * factor,
        )
    }
}

fn check_variance(name: &'static str, variance: f64) -> Result<()> {
    if !(variance >= 0.0) || !variance.is_finite() {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("{variance} must be finite and >= 0"),
        });
    }
    Ok(())
}

fn check_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "sample count must be at least 1".into(),
        });
    }
    Ok(())
}

/// Zero-mean i.i.d. Gaussian samples of the given variance.
pub fn gen_white_gaussian<T: Real>(n: usize, variance: f64, seed: RngSeed) -> Result<SignalBuffer<T>> {
    check_count(n)?;
    check_variance("variance", variance)?;
    let sd = variance.sqrt();
    let mut rng = seed.rng();
    let samples = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            T::from_f64_lossy(sd * z)
        })
        .collect();
    SignalBuffer::new(samples, T::from_f64_lossy(variance))
}

/// Stationary AR(1) process `x(k) = pole x(k-1) + u(k)` with Gaussian
/// innovations of the given variance.
///
/// The first sample is drawn from the stationary law, so `pole = 0` yields
/// exactly the white buffer for the same seed and variance.
pub fn gen_ar1<T: Real>(
    n: usize,
    pole: f64,
    innovation_variance: f64,
    seed: RngSeed,
) -> Result<SignalBuffer<T>> {
    check_count(n)?;
    check_variance("innovation_variance", innovation_variance)?;
    if !(pole.abs() < 1.0) {
        return Err(Error::InvalidParameter {
            name: "pole",
            reason: format!("|{pole}| must be < 1"),
        });
    }
    let sd = innovation_variance.sqrt();
    let stationary_scale = 1.0 / (1.0 - pole * pole).sqrt();
    let mut rng = seed.rng();
    let mut prev = 0.0f64;
    let samples = (0..n)
        .map(|k| {
            let z: f64 = StandardNormal.sample(&mut rng);
            let u = sd * z;
            prev = if k == 0 {
                u * stationary_scale
            } else {
                pole * prev + u
            };
            T::from_f64_lossy(prev)
        })
        .collect();
    let variance = innovation_variance / (1.0 - pole * pole);
    SignalBuffer::new(samples, T::from_f64_lossy(variance))
}

/// Tapped delay line holding `[x(n), x(n-1), ..., x(n-L+1)]` contiguously,
/// zero before the first pushed sample.
#[derive(Debug, Clone)]
pub struct TapDelayLine<T> {
    buf: Vec<T>,
    pos: usize,
    len: usize,
}

impl<T: Real> TapDelayLine<T> {
    pub fn new(len: usize) -> Self {
        // Each sample is written twice so the window never wraps.
        TapDelayLine {
            buf: vec![T::zero(); 2 * len],
            pos: 0,
            len,
        }
    }

    pub fn push(&mut self, sample: T) {
        if self.len == 0 {
            return;
        }
        self.pos = if self.pos == 0 { self.len - 1 } else { self.pos - 1 };
        self.buf[self.pos] = sample;
        self.buf[self.pos + self.len] = sample;
    }

    pub fn regressor(&self) -> &[T] {
        &self.buf[self.pos..self.pos + self.len]
    }
}

/// Observed output `d(n) = w_opt^T x(n) + v(n)` with a zero pre-window.
pub fn system_output<T: Real>(
    system: &SparseSystem<T>,
    input: &SignalBuffer<T>,
    noise: &SignalBuffer<T>,
) -> Result<SignalBuffer<T>> {
    if noise.len() != input.len() {
        return Err(Error::LengthMismatch {
            what: "noise",
            got: noise.len(),
            expected: input.len(),
        });
    }
    let mut line = TapDelayLine::new(system.len());
    let samples = input
        .samples()
        .iter()
        .zip(noise.samples())
        .map(|(&x, &v)| {
            line.push(x);
            system.response(line.regressor()) + v
        })
        .collect();
    let variance = system.weights.squared_norm() * input.nominal_variance() + noise.nominal_variance();
    SignalBuffer::new(samples, variance)
}

/// Writes one value per line with 17 significant digits and LF endings.
pub fn write_values<T: Real, W: Write>(mut out: W, values: &[T]) -> Result<()> {
    for v in values {
        writeln!(out, "{:.16e}", v.to_f64_lossy())?;
    }
    out.flush()?;
    Ok(())
}

/// Reads one value per line; blank lines are skipped.
pub fn read_values<T: Real, R: BufRead>(input: R) -> Result<Vec<T>> {
    let mut values = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let v: f64 = trimmed
            .parse()
            .map_err(|e| Error::Parse(format!("line {}: {trimmed:?}: {e}", lineno + 1)))?;
        if !v.is_finite() {
            return Err(Error::NonFinite("value in file"));
        }
        values.push(T::from_f64_lossy(v));
    }
    Ok(values)
}
