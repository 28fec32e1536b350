//! Proportionate step-size gains.
//!
//! For weights `w(n)` the per-tap gain is
//!
//! ```text
//! gamma_l = max(rho_g * max(delta, |w_0|, ..., |w_{L-1}|), |w_l|)
//! g_l     = gamma_l / sum_i gamma_i
//! ```
//!
//! `G(n) = diag(g)` is recomputed from the current iterate on every sample.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainParams<T> {
    /// Floor on each gain as a fraction of the largest tap magnitude.
    pub rho_g: T,
    /// Floor on the largest magnitude; keeps an all-zero filter adapting.
    pub delta: T,
}

impl<T: Real> GainParams<T> {
    pub fn new(rho_g: T, delta: T) -> Result<Self> {
        let p = GainParams { rho_g, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_g > T::zero() && self.rho_g <= T::one()) {
            return Err(Error::InvalidParameter {
                name: "rho_g",
                reason: format!("{} must lie in (0, 1]", self.rho_g),
            });
        }
        if !(self.delta > T::zero()) || !self.delta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: format!("{} must be > 0", self.delta),
            });
        }
        Ok(())
    }
}

/// Diagonal of `G(n)`: strictly positive, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>")]
pub struct GainVector<T: Real>(Vec<T>);

impl<T: Real> GainVector<T> {
    /// Validates strict positivity. The unit-sum property is the caller's
    /// responsibility (it holds by construction for `compute_gain`).
    pub fn new(g: Vec<T>) -> Result<Self> {
        if let Some(index) = g.iter().position(|&v| !(v > T::zero()) || !v.is_finite()) {
            return Err(Error::NonPositiveGain { index });
        }
        Ok(GainVector(g))
    }

    pub fn uniform(len: usize) -> Self {
        let v = T::one() / T::from_usize(len).expect("length fits in T");
        GainVector(vec![v; len])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T: Real> Deref for GainVector<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<T: Real> TryFrom<Vec<T>> for GainVector<T> {
    type Error = Error;
    fn try_from(v: Vec<T>) -> Result<Self> {
        GainVector::new(v)
    }
}

impl<T: Real> From<GainVector<T>> for Vec<T> {
    fn from(g: GainVector<T>) -> Vec<T> {
        g.0
    }
}

fn floor_level<T: Real>(w: &[T], p: &GainParams<T>) -> T {
    let largest = w.iter().fold(p.delta, |m, &v| m.max(v.abs()));
    p.rho_g * largest
}

pub fn compute_gamma<T: Real>(w: &[T], p: &GainParams<T>) -> Vec<T> {
    let floor = floor_level(w, p);
    w.iter().map(|&v| floor.max(v.abs())).collect()
}

/// Writes `g` for weights `w` into `out` without allocating.
pub fn compute_gain_into<T: Real>(w: &[T], p: &GainParams<T>, out: &mut [T]) {
    debug_assert_eq!(w.len(), out.len());
    let floor = floor_level(w, p);
    let mut total = T::zero();
    for (g, &v) in out.iter_mut().zip(w) {
        *g = floor.max(v.abs());
        total = total + *g;
    }
    for g in out.iter_mut() {
        *g = *g / total;
    }
}

pub fn compute_gain<T: Real>(w: &[T], p: &GainParams<T>) -> GainVector<T> {
    let mut g = vec![T::zero(); w.len()];
    compute_gain_into(w, p, &mut g);
    GainVector(g)
}

/// Elementwise `sqrt(g)`, the diagonal of `G^{1/2}`.
pub fn gain_sqrt<T: Real>(g: &GainVector<T>) -> Vec<T> {
    g.iter().map(|v| v.sqrt()).collect()
}

/// Elementwise `1/sqrt(g)`, the diagonal of `G^{-1/2}`.
pub fn gain_inv_sqrt<T: Real>(g: &GainVector<T>) -> Vec<T> {
    g.iter().map(|v| v.sqrt().recip()).collect()
}
