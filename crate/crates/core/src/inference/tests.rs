use super::*;
use crate::location::evaluate;
use crate::regression::{fit_least_squares, fit_mm_regression, LinearModel, SearchConfig};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn r0() -> RhoKernel {
    RhoKernel::tukey(1.57)
}

fn r1() -> RhoKernel {
    RhoKernel::tukey(3.44)
}

/// y = 3·Σx + N(0,1), x ~ U[0,1]^5, logistic missingness.
fn design(n: usize, seed: u64) -> CompleteCaseSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let x: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
        let s: f64 = x.iter().sum();
        let u: f64 = StandardNormal.sample(&mut rng);
        let observed = rng.random::<f64>() < 1.0 / (1.0 + (-0.57 * s).exp());
        rows.push(x);
        y.push(observed.then_some(3.0 * s + u));
    }
    CompleteCaseSample::new(rows, y).unwrap()
}

struct Fitted {
    sample: CompleteCaseSample,
    fit: RegressionFit,
    dist: ConvolvedDistribution,
}

fn fitted(n: usize, seed: u64) -> Fitted {
    let sample = design(n, seed);
    let model = LinearModel::new(5);
    let fit = fit_mm_regression(&sample, &model, &r0(), &r1(), 0.5, &SearchConfig::default()).unwrap();
    let dist = ConvolvedDistribution::build(&fit, &sample, &model).unwrap();
    Fitted { sample, fit, dist }
}

#[test]
fn median_if_values() {
    assert_eq!(median_if(0.4, 1.0, 1.0).unwrap(), 0.0);
    let v = median_if(0.398942, 0.0, 1.0).unwrap();
    assert!((v - 1.25331).abs() < 1e-5);
    for t in [0.1, 2.0, 30.0] {
        assert_eq!(median_if(0.3, 2.0, 2.0 + t).unwrap(), -median_if(0.3, 2.0, 2.0 - t).unwrap());
    }
    assert_eq!(median_if(0.0, 0.0, 1.0), Err(Error::ZeroDensity(0.0)));
}

#[test]
fn location_if_is_centered_and_bounded() {
    let f = fitted(150, 1);
    let spec = LocationSpec::mm90();
    let est = evaluate(&spec, &f.dist).unwrap();
    let c = LocationIfConstants::estimate(&f.dist, &spec, &est).unwrap();
    let mean_if = f.dist.expectation(|y| c.influence(y));
    assert!(mean_if.abs() < 1e-3 * c.sigma, "{mean_if}");
    let bound = c.sigma / c.a01.abs() * 2.0 + (c.e01 * c.sigma / (c.a01 * c.d0)).abs();
    for y in [-1e9, -50.0, 0.0, 7.5, 1e3, 1e12] {
        assert!(c.influence(y).abs() <= bound);
    }
}

#[test]
fn symmetric_location_if() {
    let v: Vec<f64> = (1..=50).flat_map(|k| [k as f64 * 0.07, -(k as f64) * 0.07]).collect();
    let d = ConvolvedDistribution::new(vec![2.0], v).unwrap();
    let spec = LocationSpec::mm95();
    let est = evaluate(&spec, &d).unwrap();
    assert!((est.value - 2.0).abs() < 1e-10);
    let c = LocationIfConstants::estimate(&d, &spec, &est).unwrap();
    assert!(c.e01.abs() < 1e-12);
    assert!(c.influence(2.0).abs() < 1e-10);
    let first = |y: f64| c.sigma / c.a01 * c.rho1.psi((y - c.mu01) / c.sigma);
    for y in [0.0, 1.0, 2.5, 4.0] {
        assert!((c.influence(y) - first(y)).abs() < 1e-10);
    }
}

#[test]
fn location_if_derivative_matches_differences() {
    let f = fitted(120, 2);
    let spec = LocationSpec::mm90();
    let est = evaluate(&spec, &f.dist).unwrap();
    let c = LocationIfConstants::estimate(&f.dist, &spec, &est).unwrap();
    let h = 1e-6;
    let mut y = est.value - 8.0;
    while y < est.value + 8.0 {
        let fd = (c.influence(y + h) - c.influence(y - h)) / (2.0 * h);
        assert!((fd - c.influence_derivative(y)).abs() < 1e-5, "{y}");
        y += 0.0137;
    }
}

#[test]
fn regression_if_properties() {
    let f = fitted(200, 3);
    let model = LinearModel::new(5);
    let c = RegressionIfConstants::estimate(&f.fit, &f.sample, &model, (r0(), r1())).unwrap();
    let beta = &f.fit.beta_hat;
    // ġ = b₀ and zero residual: both factors vanish.
    let y0 = model.value(&c.b0, beta) + c.alpha01;
    assert!(c.influence(&model, beta, &c.b0, y0).iter().all(|v| v.abs() < 1e-12));
    let x = [0.9, 0.1, 0.5, 0.2, 0.7];
    let far = model.value(&x, beta) + c.alpha01 + 3.45 * c.sigma0;
    assert!(c.influence(&model, beta, &x, far).iter().all(|v| *v == 0.0));
    let obs = f.sample.observed_indices();
    let mut mean = [0.0; 5];
    for &i in obs {
        let v = c.influence(&model, beta, f.sample.x_row(i), f.sample.response(i).unwrap());
        for k in 0..5 {
            mean[k] += v[k] / obs.len() as f64;
        }
    }
    assert!(mean.iter().all(|v| v.abs() < 1e-6), "{mean:?}");
}

#[test]
fn symmetric_errors_give_small_e01() {
    let f = fitted(1000, 4);
    let c = RegressionIfConstants::estimate(&f.fit, &f.sample, &LinearModel::new(5), (r0(), r1())).unwrap();
    assert!(c.e01.abs() < 0.1, "{}", c.e01);
}

#[test]
fn gaussian_a01_matches_quadrature() {
    // Population S-scale of N(0,1) and a01 = E ψ₁'(Z/σ₀), by Simpson's rule.
    let simpson = |f: &dyn Fn(f64) -> f64| {
        let (a, b, n) = (-12.0, 12.0, 24000);
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    };
    let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let (mut lo, mut hi) = (0.1, 10.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if simpson(&|z| r0().rho(z / mid) * phi(z)) > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let sigma = lo;
    let a01 = simpson(&|z| r1().psi_prime(z / sigma) * phi(z));
    let second = simpson(&|z| r1().psi_prime(z / sigma).powi(2) * phi(z));
    let sd = (second - a01 * a01).sqrt();
    let f = fitted(2000, 5);
    let c = RegressionIfConstants::estimate(&f.fit, &f.sample, &LinearModel::new(5), (r0(), r1())).unwrap();
    let band = 3.0 * sd / (f.sample.m() as f64).sqrt();
    assert!((c.a01 - a01).abs() < band, "{} vs {a01} ± {band}", c.a01);
}

#[test]
fn constant_gradient_is_degenerate() {
    let rows = vec![vec![1.0]; 20];
    let y = (0..20).map(|i| Some(i as f64)).collect();
    let sample = CompleteCaseSample::new(rows, y).unwrap();
    let fit = RegressionFit {
        method: FitMethod::MM,
        beta_hat: vec![1.0],
        alpha_hat: 0.0,
        alpha_s: 0.0,
        sigma_hat: 1.0,
        residuals_observed: vec![],
        converged: true,
        iterations: 1,
        exact_fit: false,
        objective_trace: vec![],
        warnings: vec![],
    };
    let err = RegressionIfConstants::estimate(&fit, &sample, &LinearModel::new(1), (r0(), r1())).unwrap_err();
    assert!(matches!(err, Error::DegenerateConstant { name: "A0", .. }));
}

#[test]
fn tau_sq_nonnegative_and_permutation_invariant() {
    let f = fitted(120, 6);
    let model = LinearModel::new(5);
    let opts = InferenceOptions::default();
    let perm: Vec<usize> = (0..120).rev().collect();
    let permuted = f.sample.permuted(&perm);
    for spec in [LocationSpec::mm90(), LocationSpec::mm95(), LocationSpec::median()] {
        let est = evaluate(&spec, &f.dist).unwrap();
        let v = estimate_tau_sq(&spec, &est, &f.fit, &f.sample, &model, &f.dist, &opts).unwrap();
        assert!(v.tau_sq >= 0.0 && v.tau_sq.is_finite());
        assert!(v.ci_lower < est.value && est.value < v.ci_upper);
        assert!((v.eta_hat - f.sample.m() as f64 / 120.0).abs() == 0.0);
        let w = estimate_tau_sq(&spec, &est, &f.fit, &permuted, &model, &f.dist, &opts).unwrap();
        assert!((v.tau_sq - w.tau_sq).abs() <= 1e-10 * v.tau_sq, "{spec:?}");
        // Clean Monte Carlo design: τ² sits near the unit error variance plus the spread of the fitted values.
        assert!(v.tau_sq > 1.0 && v.tau_sq < 20.0, "{spec:?}: {}", v.tau_sq);
    }
}

#[test]
fn mean_route_with_least_squares() {
    let sample = design(200, 7);
    let model = LinearModel::new(5);
    let fit = fit_least_squares(&sample, &model, &SearchConfig::default()).unwrap();
    let dist = ConvolvedDistribution::build(&fit, &sample, &model).unwrap();
    let spec = LocationSpec::mean();
    let est = evaluate(&spec, &dist).unwrap();
    let v = estimate_tau_sq(&spec, &est, &fit, &sample, &model, &dist, &InferenceOptions::default()).unwrap();
    assert!(v.tau_sq > 1.0 && v.tau_sq < 20.0, "{}", v.tau_sq);
    assert!(v.density_at_mu.is_none());
}

#[test]
fn subsampled_pairs_are_flagged() {
    let f = fitted(100, 8);
    let opts = InferenceOptions {
        max_pairs: 2000,
        ..InferenceOptions::default()
    };
    let spec = LocationSpec::mm90();
    let est = evaluate(&spec, &f.dist).unwrap();
    let v = estimate_tau_sq(&spec, &est, &f.fit, &f.sample, &LinearModel::new(5), &f.dist, &opts).unwrap();
    assert!(v.subsampled_pairs);
    assert_eq!(v.warnings.len(), 1);
    let exact = estimate_tau_sq(&spec, &est, &f.fit, &f.sample, &LinearModel::new(5), &f.dist, &InferenceOptions::default()).unwrap();
    assert!((v.tau_sq / exact.tau_sq - 1.0).abs() < 0.5);
}

#[test]
fn kde_of_normal_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pts: Vec<f64> = (0..5000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let kde = GaussianKde::new(pts).unwrap();
    assert!((kde.density(0.0) - 0.398942).abs() < 0.03);
    assert!((kde.bandwidth - 0.9 * 5000f64.powf(-0.2)).abs() < 0.03);
}
