//! Analysis of the zero-attracting PNLMS update.
//!
//! * A transform-domain model: with `s = G^{1/2} x` and `w_N = G^{-1/2} w`,
//!   the proportionate update is an ordinary normalized update of `w_N`
//!   followed by `w(n+1) = G^{1/2} w'_N(n+1)`. [`transform_step_check`]
//!   computes both routes.
//! * Angular discretization: a zero-mean vector with correlation `R` is
//!   modelled as `x = s r v`, `s = +-1`, `r ~ ||x||`, `v = e_i` with
//!   probability `lambda_i / Tr(R)`. Under this model
//!   `B = E[s s^T / s^T s] = S / Tr(S)`.
//! * Steady-state mean: for `0 < mu < 2`,
//!   `w(inf) = w_opt - (rho/mu) Tr(S) E(G^{1/2}) S^{-1} E(G^{-1/2} sgn(w))`,
//!   which for white input reduces per active tap to
//!   `w_i(inf) = w_opt,i - (rho/mu) sgn(w_opt,i) / g_i(inf)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{step, Algorithm, FilterConfig, FilterState};
use crate::gain::{compute_gain, gain_inv_sqrt, gain_sqrt, GainParams, GainVector};
use crate::scalar::{dot, sgn};
use crate::signal::{RngSeed, SparseSystem, WeightVector};

/// A correlation matrix together with its eigendecomposition.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    r: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl CovarianceModel {
    pub fn new(r: DMatrix<f64>) -> Result<Self> {
        if !r.is_square() || r.nrows() == 0 {
            return Err(Error::InvalidParameter {
                name: "R",
                reason: format!("must be a nonempty square matrix, got {}x{}", r.nrows(), r.ncols()),
            });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("correlation matrix entry"));
        }
        let scale = r.amax();
        if (&r - r.transpose()).amax() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidParameter {
                name: "R",
                reason: "matrix is not symmetric".into(),
            });
        }
        let eig = SymmetricEigen::new(r.clone());
        let mut eigenvalues = eig.eigenvalues;
        let floor = -1e-12 * scale;
        if eigenvalues.iter().any(|&l| l < floor) {
            return Err(Error::InvalidParameter {
                name: "R",
                reason: "matrix is not positive semidefinite".into(),
            });
        }
        eigenvalues.iter_mut().for_each(|l| *l = l.max(0.0));
        Ok(CovarianceModel {
            r,
            eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn white(len: usize, variance: f64) -> Result<Self> {
        CovarianceModel::new(DMatrix::identity(len, len) * variance)
    }

    /// Toeplitz correlation of a stationary AR(1) process:
    /// `R_ij = sigma^2 pole^|i-j|` with `sigma^2 = q / (1 - pole^2)`.
    pub fn ar1(len: usize, pole: f64, innovation_variance: f64) -> Result<Self> {
        CovarianceModel::new(ar1_correlation(len, pole, innovation_variance)?)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors as columns.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn dim(&self) -> usize {
        self.r.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.r.trace()
    }

    /// `p_i = lambda_i / Tr(R)`.
    pub fn direction_probabilities(&self) -> Result<Vec<f64>> {
        let total: f64 = self.eigenvalues.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Degenerate("correlation matrix is zero"));
        }
        Ok(self.eigenvalues.iter().map(|l| l / total).collect())
    }

    /// `|| R - sum lambda_i e_i e_i^T ||_F`.
    pub fn reconstruction_error(&self) -> f64 {
        let e = &self.eigenvectors;
        let rebuilt = e * DMatrix::from_diagonal(&self.eigenvalues) * e.transpose();
        (&self.r - rebuilt).norm()
    }

    /// `|| E^T E - I ||_F`.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.dim();
        (self.eigenvectors.transpose() * &self.eigenvectors - DMatrix::identity(n, n)).norm()
    }
}

pub fn ar1_correlation(len: usize, pole: f64, innovation_variance: f64) -> Result<DMatrix<f64>> {
    if !(pole.abs() < 1.0) {
        return Err(Error::InvalidParameter {
            name: "pole",
            reason: format!("|{pole}| must be < 1"),
        });
    }
    let var = innovation_variance / (1.0 - pole * pole);
    Ok(DMatrix::from_fn(len, len, |i, j| {
        var * pole.powi((i as i64 - j as i64).unsigned_abs() as i32)
    }))
}

/// Where the radial part `r = ||x||` of a discretized draw comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum NormSource {
    /// `||x||` for `x ~ N(0, R)`, i.e. `sqrt(sum lambda_i z_i^2)`.
    Gaussian,
    /// Resample uniformly from recorded norms.
    Empirical(Vec<f64>),
}

/// Draws `x = s r v` from the angular discretization of a [`CovarianceModel`].
#[derive(Debug, Clone)]
pub struct AngularSampler<'a> {
    model: &'a CovarianceModel,
    directions: WeightedIndex<f64>,
    sqrt_eigenvalues: Vec<f64>,
    norms: NormSource,
}

impl<'a> AngularSampler<'a> {
    pub fn new(model: &'a CovarianceModel, norms: NormSource) -> Result<Self> {
        let p = model.direction_probabilities()?;
        if let NormSource::Empirical(v) = &norms {
            if v.is_empty() {
                return Err(Error::Degenerate("empirical norm source is empty"));
            }
            if v.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
                return Err(Error::NonFinite("recorded norm"));
            }
        }
        let directions = WeightedIndex::new(&p).map_err(|_| Error::Degenerate("correlation matrix is zero"))?;
        Ok(AngularSampler {
            model,
            directions,
            sqrt_eigenvalues: model.eigenvalues.iter().map(|l| l.sqrt()).collect(),
            norms,
        })
    }

    fn radius<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.norms {
            NormSource::Gaussian => self
                .sqrt_eigenvalues
                .iter()
                .map(|s| {
                    let z: f64 = StandardNormal.sample(rng);
                    (s * z) * (s * z)
                })
                .sum::<f64>()
                .sqrt(),
            NormSource::Empirical(v) => v[rng.random_range(0..v.len())],
        }
    }

    /// Writes one draw into `out` (length `L`).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let i = self.directions.sample(rng);
        let r = self.radius(rng);
        let e = self.model.eigenvectors.column(i);
        for (o, ei) in out.iter_mut().zip(e.iter()) {
            *o = sign * r * ei;
        }
    }

    /// `count` draws stored row-major in one buffer of `count * L` values.
    pub fn sample_batch<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        let l = self.model.dim();
        let mut out = vec![0.0; count * l];
        for row in out.chunks_mut(l) {
            self.sample_into(rng, row);
        }
        out
    }
}

/// A single draw `s r v` using a fresh stream for `seed`.
pub fn angular_discretize_sample(model: &CovarianceModel, norms: NormSource, seed: RngSeed) -> Result<Vec<f64>> {
    let sampler = AngularSampler::new(model, norms)?;
    let mut out = vec![0.0; model.dim()];
    sampler.sample_into(&mut seed.rng(), &mut out);
    Ok(out)
}

/// Compensated (Neumaier) running sum of weighted outer products; only the
/// lower triangle is accumulated.
struct OuterSum {
    sum: DMatrix<f64>,
    comp: DMatrix<f64>,
    count: usize,
}

impl OuterSum {
    fn new(dim: usize) -> Self {
        OuterSum {
            sum: DMatrix::zeros(dim, dim),
            comp: DMatrix::zeros(dim, dim),
            count: 0,
        }
    }

    fn add(&mut self, s: &[f64], weight: f64) -> Result<()> {
        let dim = self.sum.nrows();
        if s.len() != dim {
            return Err(Error::LengthMismatch {
                what: "sample",
                got: s.len(),
                expected: dim,
            });
        }
        for j in 0..dim {
            let sj = s[j] * weight;
            for i in j..dim {
                let y = s[i] * sj;
                let a = self.sum[(i, j)];
                let t = a + y;
                self.comp[(i, j)] += if a.abs() >= y.abs() { (a - t) + y } else { (y - t) + a };
                self.sum[(i, j)] = t;
            }
        }
        self.count += 1;
        Ok(())
    }

    fn mean(self) -> DMatrix<f64> {
        let n = self.sum.nrows();
        let c = self.count as f64;
        let mut m = self.sum + self.comp;
        for j in 0..n {
            for i in j..n {
                m[(i, j)] /= c;
                m[(j, i)] = m[(i, j)];
            }
        }
        m
    }
}

/// Empirical `E[x x^T]` over the given rows.
pub fn second_moment<'a, I>(samples: I, dim: usize) -> Result<DMatrix<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut acc = OuterSum::new(dim);
    for s in samples {
        acc.add(s, 1.0)?;
    }
    if acc.count == 0 {
        return Err(Error::Degenerate("no samples"));
    }
    Ok(acc.mean())
}

/// Empirical `B = E[s s^T / (s^T s)]`; all-zero rows are skipped.
pub fn estimate_b<'a, I>(samples: I) -> Result<DMatrix<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut acc: Option<OuterSum> = None;
    for s in samples {
        let m = acc.get_or_insert_with(|| OuterSum::new(s.len()));
        let energy = dot(s, s);
        if energy == 0.0 {
            continue;
        }
        m.add(s, 1.0 / energy)?;
    }
    match acc {
        Some(m) if m.count > 0 => Ok(m.mean()),
        _ => Err(Error::Degenerate("all samples are zero")),
    }
}

/// `S = G^{1/2} R G^{1/2}` for a fixed gain.
pub fn transformed_covariance(r: &DMatrix<f64>, g: &GainVector<f64>) -> Result<DMatrix<f64>> {
    if r.nrows() != g.len() || r.ncols() != g.len() {
        return Err(Error::LengthMismatch {
            what: "gain",
            got: g.len(),
            expected: r.nrows(),
        });
    }
    let sq = gain_sqrt(g);
    Ok(DMatrix::from_fn(r.nrows(), r.ncols(), |i, j| sq[i] * r[(i, j)] * sq[j]))
}

/// `S / Tr(S)`.
pub fn normalized_covariance(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let t = s.trace();
    if !(t > 0.0) {
        return Err(Error::Degenerate("trace is not positive"));
    }
    Ok(s / t)
}

/// Computes `w(n+1)` directly and through the transform-domain model and
/// returns the largest elementwise discrepancy.
///
/// Each element's discrepancy is measured relative to the magnitudes of the
/// operands that form it: `|w_i|`, the data term with the error replaced by
/// `|d| + sum |w_j x_j|`, and the attractor. Cancellation in `e` or in the
/// final sum therefore cannot inflate the ratio.
pub fn transform_step_check(w: &[f64], x: &[f64], d: f64, cfg: &FilterConfig<f64>) -> Result<f64> {
    if !matches!(cfg.algorithm, Algorithm::ZaPnlms | Algorithm::Pnlms) {
        return Err(Error::AlgorithmMismatch {
            configured: cfg.algorithm.name(),
            required: Algorithm::ZaPnlms.name(),
        });
    }
    cfg.validate()?;
    let rho = if cfg.algorithm == Algorithm::Pnlms { 0.0 } else { cfg.rho };
    let cfg = FilterConfig {
        clamp_zero_crossing: false,
        ..*cfg
    };
    let state = FilterState {
        w: WeightVector(w.to_vec()),
        n: 0,
        last_error: 0.0,
    };
    let direct = step(&state, x, d, &cfg)?;

    let g = compute_gain(w, &cfg.gain_params);
    let sq = gain_sqrt(&g);
    let isq = gain_inv_sqrt(&g);
    if let Some(index) = sq.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::NonPositiveGain { index });
    }
    let s: Vec<f64> = sq.iter().zip(x).map(|(a, b)| a * b).collect();
    let w_n: Vec<f64> = isq.iter().zip(w).map(|(a, b)| a * b).collect();
    let e = d - dot(&w_n, &s);
    let denom = dot(&s, &s) + cfg.delta_p;
    let scale = cfg.mu * e / denom;
    let error_scale = d.abs() + w_n.iter().zip(&s).map(|(a, b)| (a * b).abs()).sum::<f64>();
    let data_scale = cfg.mu * error_scale / denom;

    let mut worst = 0.0f64;
    for i in 0..w.len() {
        let data = scale * s[i];
        let attract = rho * isq[i] * sgn(w_n[i]);
        let w_next_n = w_n[i] + data - attract;
        let via_transform = sq[i] * w_next_n;
        let magnitude = w[i].abs() + (sq[i] * data_scale * s[i]).abs() + (sq[i] * attract).abs();
        let diff = (via_transform - direct.w[i]).abs();
        if diff > 0.0 {
            worst = worst.max(diff / magnitude);
        }
    }
    Ok(worst)
}

/// Relative size of the projection term dropped when deriving the
/// zero-attracting update:
/// `|| x x^T G sgn(w) / (x^T G x) || / || sgn(w) ||`, or 0 when `w = 0`.
pub fn projection_residual(x: &[f64], g: &GainVector<f64>, w: &[f64]) -> Result<f64> {
    if x.len() != g.len() || w.len() != g.len() {
        return Err(Error::LengthMismatch {
            what: "regressor",
            got: x.len(),
            expected: g.len(),
        });
    }
    let energy: f64 = g.iter().zip(x).map(|(gi, xi)| gi * xi * xi).sum();
    if !(energy > 0.0) {
        return Err(Error::Degenerate("zero regressor"));
    }
    let signs: Vec<f64> = w.iter().map(|&v| sgn(v)).collect();
    let sign_norm = dot(&signs, &signs).sqrt();
    if sign_norm == 0.0 {
        return Ok(0.0);
    }
    let coupling: f64 = x.iter().zip(g.iter()).zip(&signs).map(|((xi, gi), si)| xi * gi * si).sum();
    let x_norm = dot(x, x).sqrt();
    Ok((coupling / energy).abs() * x_norm / sign_norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    OutsideBound,
}

/// Mean stability holds for `0 < mu < 2`.
pub fn check_mu_stability(mu: f64) -> Stability {
    if mu > 0.0 && mu < 2.0 {
        Stability::Stable
    } else {
        Stability::OutsideBound
    }
}

fn require_stable(mu: f64) -> Result<()> {
    match check_mu_stability(mu) {
        Stability::Stable => Ok(()),
        Stability::OutsideBound => Err(Error::OutsideStabilityBound(mu)),
    }
}

fn require_rho(rho: f64) -> Result<()> {
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter {
            name: "rho",
            reason: format!("{rho} must be finite and >= 0"),
        });
    }
    Ok(())
}

/// Deterministic estimate of the steady-state mean gain: the gain evaluated
/// at `w_opt`.
pub fn predict_steady_gain(system: &SparseSystem<f64>, p: &GainParams<f64>) -> GainVector<f64> {
    compute_gain(&system.weights, p)
}

/// Averages recorded gain vectors (e.g. from the tail of a simulation) and
/// renormalizes onto the simplex.
pub fn average_gain<'a, I>(gains: I) -> Result<GainVector<f64>>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut acc: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for g in gains {
        if acc.is_empty() {
            acc = vec![0.0; g.len()];
        } else if g.len() != acc.len() {
            return Err(Error::LengthMismatch {
                what: "gain",
                got: g.len(),
                expected: acc.len(),
            });
        }
        acc.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        count += 1;
    }
    if count == 0 {
        return Err(Error::Degenerate("no gain samples"));
    }
    let total: f64 = acc.iter().sum();
    GainVector::new(acc.into_iter().map(|v| v / total).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateReport {
    pub predicted_mean: Vec<f64>,
    pub predicted_bias: Vec<f64>,
    pub steady_gain: Vec<f64>,
    pub s_matrix: Vec<Vec<f64>>,
}

impl SteadyStateReport {
    fn from_mean(w_opt: &[f64], mean: Vec<f64>, gain: &GainVector<f64>, s: &DMatrix<f64>) -> Self {
        let predicted_bias = w_opt.iter().zip(&mean).map(|(w, m)| w - m).collect();
        SteadyStateReport {
            predicted_mean: mean,
            predicted_bias,
            steady_gain: gain.to_vec(),
            s_matrix: matrix_rows(s),
        }
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// White-input steady-state prediction using the deterministic gain
/// estimate; see [`predict_bias_with_gain`].
pub fn predict_bias(system: &SparseSystem<f64>, p: &GainParams<f64>, rho: f64, mu: f64) -> Result<SteadyStateReport> {
    predict_bias_with_gain(system, &predict_steady_gain(system, p), rho, mu)
}

/// White-input prediction for a given steady-state mean gain.
///
/// Active taps are pulled towards zero by `(rho/mu) / g_i`; inactive taps are
/// unbiased. When that pull reaches `|w_opt,i|` the sign assumption behind
/// the formula no longer holds and the tap is predicted to collapse to zero.
/// `s_matrix` is `diag(g)`, i.e. `S(inf)` for unit input variance.
pub fn predict_bias_with_gain(
    system: &SparseSystem<f64>,
    gain: &GainVector<f64>,
    rho: f64,
    mu: f64,
) -> Result<SteadyStateReport> {
    require_stable(mu)?;
    require_rho(rho)?;
    if gain.len() != system.len() {
        return Err(Error::LengthMismatch {
            what: "gain",
            got: gain.len(),
            expected: system.len(),
        });
    }
    let w_opt = &system.weights;
    let bias: Vec<f64> = w_opt
        .iter()
        .zip(gain.iter())
        .map(|(&w, &g)| {
            let pull = rho / mu / g;
            if w == 0.0 {
                0.0
            } else if pull >= w.abs() {
                w
            } else {
                pull * sgn(w)
            }
        })
        .collect();
    let mean = w_opt
        .iter()
        .zip(&bias)
        .map(|(&w, &b)| if b == w { 0.0 } else { w - b })
        .collect();
    let s = DMatrix::from_diagonal(&DVector::from_column_slice(gain));
    Ok(SteadyStateReport {
        predicted_mean: mean,
        predicted_bias: bias,
        steady_gain: gain.to_vec(),
        s_matrix: matrix_rows(&s),
    })
}

/// `E(sgn(w(inf)))` under the usual steady-state approximation:
/// `sgn(w_opt,i)` on active taps, 0 on inactive ones.
pub fn default_sign_expectation(system: &SparseSystem<f64>) -> Vec<f64> {
    system.weights.iter().map(|&w| sgn(w)).collect()
}

/// General-input steady-state mean
/// `w_opt - (rho/mu) Tr(S) E(G^{1/2}) S^{-1} E(G^{-1/2}) E(sgn(w))`,
/// with `E(G^{+-1/2})` approximated by elementwise powers of the supplied
/// mean gain and the gain/sign expectation factored.
pub fn predict_mean_general(
    system: &SparseSystem<f64>,
    s_inf: &DMatrix<f64>,
    gain_expectations: &GainVector<f64>,
    rho: f64,
    mu: f64,
    sign_expectation: &[f64],
) -> Result<Vec<f64>> {
    require_stable(mu)?;
    require_rho(rho)?;
    let l = system.len();
    if s_inf.nrows() != l || s_inf.ncols() != l {
        return Err(Error::LengthMismatch {
            what: "S",
            got: s_inf.nrows(),
            expected: l,
        });
    }
    for (what, got) in [("gain", gain_expectations.len()), ("sign expectation", sign_expectation.len())] {
        if got != l {
            return Err(Error::LengthMismatch { what, got, expected: l });
        }
    }
    let chol = s_inf.clone().cholesky().ok_or(Error::Singular)?;
    let sq = gain_sqrt(gain_expectations);
    let isq = gain_inv_sqrt(gain_expectations);
    let rhs = DVector::from_iterator(l, isq.iter().zip(sign_expectation).map(|(a, b)| a * b));
    let solved = chol.solve(&rhs);
    let factor = rho / mu * s_inf.trace();
    Ok(system
        .weights
        .iter()
        .enumerate()
        .map(|(i, &w)| w - factor * sq[i] * solved[i])
        .collect())
}

/// Steady-state report for input correlation `R`, using the deterministic
/// gain estimate, `S = G^{1/2} R G^{1/2}` and the default sign expectation.
pub fn predict_general(
    system: &SparseSystem<f64>,
    r: &DMatrix<f64>,
    p: &GainParams<f64>,
    rho: f64,
    mu: f64,
) -> Result<SteadyStateReport> {
    let gain = predict_steady_gain(system, p);
    let s = transformed_covariance(r, &gain)?;
    let signs = default_sign_expectation(system);
    let mean = predict_mean_general(system, &s, &gain, rho, mu, &signs)?;
    Ok(SteadyStateReport::from_mean(&system.weights, mean, &gain, &s))
}
