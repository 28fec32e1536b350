//! Fixed-seed invariant suites for `sparsefilt verify`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sparsefilt::filters::{step, step_with_gain, Algorithm, FilterConfig, FilterState};
use sparsefilt::gain::{compute_gain, GainVector};
use sparsefilt::harness::reference_system;
use sparsefilt::theory::{
    estimate_b, normalized_covariance, projection_residual, second_moment, transform_step_check,
    transformed_covariance, AngularSampler, CovarianceModel, NormSource,
};

use crate::{CliError, Suite};

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn transform() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for k in 0..10_000 {
        let len = [2usize, 8, 64][k % 3];
        let w: Vec<f64> = gaussian_vec(&mut rng, len)
            .into_iter()
            .map(|v| if rng.random_bool(0.3) { 0.0 } else { 0.5 * v })
            .collect();
        let x = gaussian_vec(&mut rng, len);
        let d: f64 = rng.sample(StandardNormal);
        let cfg = FilterConfig {
            mu: rng.random_range(0.05..1.95),
            rho: rng.random_range(0.0..1e-2),
            ..FilterConfig::standard(Algorithm::ZaPnlms)
        };
        match transform_step_check(&w, &x, d, &cfg) {
            Ok(v) => worst = worst.max(v),
            Err(_) => worst = f64::INFINITY,
        }
    }
    vec![Check {
        name: "direct and transform-domain updates agree",
        pass: worst <= 1e-12,
        detail: format!("max relative discrepancy {worst:.3e} over 10^4 instances (<= 1e-12)"),
    }]
}

fn discretization() -> Vec<Check> {
    let len = 8;
    let draws = 1_000_000;
    let mut checks = Vec::new();
    let white = CovarianceModel::white(len, 1.0).expect("valid model");
    let ar1 = CovarianceModel::ar1(len, 0.8, 0.36).expect("valid model");
    for (k, (label, model)) in [("white", &white), ("AR(1)", &ar1)].into_iter().enumerate() {
        checks.push(Check {
            name: "eigendecomposition reconstructs R",
            pass: model.reconstruction_error() <= 1e-10 && model.orthonormality_error() <= 1e-10,
            detail: format!(
                "{label}: reconstruction {:.1e}, orthonormality {:.1e}",
                model.reconstruction_error(),
                model.orthonormality_error()
            ),
        });
        let sampler = AngularSampler::new(model, NormSource::Gaussian).expect("nonzero model");
        let batch = sampler.sample_batch(&mut ChaCha8Rng::seed_from_u64(21 + k as u64), draws);
        let m = second_moment(batch.chunks(len), len).expect("samples");
        let rel = (&m - model.matrix()).norm() / model.matrix().norm();
        checks.push(Check {
            name: "sampled second moment matches R",
            pass: rel <= 0.02,
            detail: format!("{label}: relative Frobenius error {rel:.4} (<= 0.02)"),
        });
        let b = estimate_b(batch.chunks(len)).expect("samples");
        let target = normalized_covariance(model.matrix()).expect("nonzero trace");
        let err = (&b - &target).amax();
        checks.push(Check {
            name: "B = R / Tr R",
            pass: err <= 0.003 && (b.trace() - 1.0).abs() <= 1e-12,
            detail: format!("{label}: max entry error {err:.2e} (<= 0.003), trace {:.15}", b.trace()),
        });
    }
    let w = [0.9, 0.0, -0.4, 0.0, 0.0, 0.15, 0.0, 0.02];
    let g = compute_gain(&w, &FilterConfig::<f64>::standard(Algorithm::ZaPnlms).gain_params);
    let s = transformed_covariance(ar1.matrix(), &g).expect("matching sizes");
    let s_model = CovarianceModel::new(s.clone()).expect("valid model");
    let sampler = AngularSampler::new(&s_model, NormSource::Gaussian).expect("nonzero model");
    let batch = sampler.sample_batch(&mut ChaCha8Rng::seed_from_u64(23), draws);
    let b = estimate_b(batch.chunks(len)).expect("samples");
    let err = (&b - normalized_covariance(&s).expect("nonzero trace")).amax();
    checks.push(Check {
        name: "B = S / Tr S for S = G^1/2 R G^1/2",
        pass: err <= 0.003,
        detail: format!("max entry error {err:.2e} (<= 0.003)"),
    });
    let white_b = {
        let sampler = AngularSampler::new(&white, NormSource::Gaussian).expect("nonzero model");
        let batch = sampler.sample_batch(&mut ChaCha8Rng::seed_from_u64(24), draws);
        estimate_b(batch.chunks(len)).expect("samples")
    };
    let err = (&white_b - DMatrix::identity(len, len) / len as f64).amax();
    checks.push(Check {
        name: "white input gives B = I / L",
        pass: err <= 0.003,
        detail: format!("max entry error {err:.2e} (<= 0.003)"),
    });
    checks
}

fn trajectory(cfg: &FilterConfig<f64>, xs: &[Vec<f64>], ds: &[f64]) -> Vec<Vec<f64>> {
    let mut state = FilterState::zeros(xs[0].len());
    xs.iter()
        .zip(ds)
        .map(|(x, &d)| {
            state = step(&state, x, d, cfg).expect("valid step");
            state.w.to_vec()
        })
        .collect()
}

fn reductions() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (mut za, mut rza, mut nlms, mut runs) = (0, 0, 0, 0);
    for &len in &[4usize, 64] {
        for _ in 0..8 {
            let xs: Vec<Vec<f64>> = (0..1000).map(|_| gaussian_vec(&mut rng, len)).collect();
            let ds = gaussian_vec(&mut rng, 1000);
            let mu = rng.random_range(0.05..1.95);
            let rho = rng.random_range(1e-6..1e-2);
            let base = FilterConfig {
                mu,
                ..FilterConfig::standard(Algorithm::Pnlms)
            };
            let p = trajectory(&base, &xs, &ds);
            let z0 = trajectory(&FilterConfig { rho: 0.0, ..base.with_algorithm(Algorithm::ZaPnlms) }, &xs, &ds);
            let z = trajectory(&FilterConfig { rho, ..base.with_algorithm(Algorithm::ZaPnlms) }, &xs, &ds);
            let r0 = trajectory(
                &FilterConfig {
                    rho,
                    epsilon: 0.0,
                    ..base.with_algorithm(Algorithm::RzaPnlms)
                },
                &xs,
                &ds,
            );
            za += usize::from(p != z0);
            rza += usize::from(z != r0);

            // Uniform-gain PNLMS is NLMS with the regularizer scaled by L.
            let uniform = GainVector::uniform(len);
            let nlms_cfg = FilterConfig {
                delta_p: base.delta_p * len as f64,
                ..base.with_algorithm(Algorithm::Nlms)
            };
            let mut a = FilterState::zeros(len);
            let mut b = FilterState::zeros(len);
            let mut same = true;
            for (x, &d) in xs.iter().zip(&ds) {
                a = step_with_gain(&a, x, d, &uniform, &base).expect("valid step");
                b = step(&b, x, d, &nlms_cfg).expect("valid step");
                same &= a.w == b.w;
            }
            nlms += usize::from(!same);
            runs += 1;
        }
    }
    vec![
        Check {
            name: "ZA-PNLMS with rho = 0 equals PNLMS",
            pass: za == 0,
            detail: format!("{za} of {runs} 1000-step runs differ (bit-exact)"),
        },
        Check {
            name: "RZA-PNLMS with eps = 0 equals ZA-PNLMS",
            pass: rza == 0,
            detail: format!("{rza} of {runs} 1000-step runs differ (bit-exact)"),
        },
        Check {
            name: "uniform-gain PNLMS equals NLMS(delta_p * L)",
            pass: nlms == 0,
            detail: format!("{nlms} of {runs} 1000-step runs differ (bit-exact)"),
        },
    ]
}

fn projection() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let system = reference_system();
    let uniform = GainVector::uniform(system.len());
    let draws = 10_000;
    let mean = (0..draws)
        .map(|_| {
            let x = gaussian_vec(&mut rng, system.len());
            projection_residual(&x, &uniform, &system.weights).expect("nonzero regressor")
        })
        .sum::<f64>()
        / draws as f64;
    let one = GainVector::new(vec![1.0]).expect("positive gain");
    let worst = (0..100)
        .map(|_| {
            let x = gaussian_vec(&mut rng, 1);
            let w = gaussian_vec(&mut rng, 1);
            (projection_residual(&x, &one, &w).expect("nonzero regressor") - 1.0).abs()
        })
        .fold(0.0f64, f64::max);
    vec![
        Check {
            name: "projection residual is small for long filters",
            pass: mean <= 0.15,
            detail: format!("mean residual at L=512 {mean:.4} (<= 0.15)"),
        },
        Check {
            name: "projection residual is one for a single tap",
            pass: worst <= 1e-15,
            detail: format!("max |residual - 1| {worst:.1e}"),
        },
    ]
}

pub fn run(suite: Suite) -> Result<(), CliError> {
    let checks = match suite {
        Suite::Transform => transform(),
        Suite::Discretization => discretization(),
        Suite::Reductions => reductions(),
        Suite::Projection => projection(),
    };
    let mut failed = 0;
    for c in &checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        failed += usize::from(!c.pass);
    }
    if failed > 0 {
        return Err(CliError::Failure(format!("{failed} of {} checks failed", checks.len())));
    }
    Ok(())
}
