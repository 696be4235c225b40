use marloc::distribution::{ConvolvedDistribution, WeightedSample};
use marloc::location::{evaluate, LocationSpec};
use marloc::pipeline::{run_pipeline, PipelineConfig};
use marloc::regression::{fit_mm_regression, CompleteCaseSample, LinearModel, SearchConfig};
use marloc::rho::{RhoKernel, K0_DEFAULT, K1_REGRESSION};
use marloc::sim::{generate_replicate, SimScenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FUNCTIONALS: [fn() -> LocationSpec; 3] = [LocationSpec::mean, LocationSpec::median, LocationSpec::mm90];

fn scenario(seed: u64) -> SimScenario {
    SimScenario {
        seed,
        ..SimScenario::default()
    }
}

#[test]
fn regression_equivariance() {
    let model = LinearModel::new(5);
    let rho0 = RhoKernel::tukey(K0_DEFAULT);
    let rho1 = RhoKernel::tukey(K1_REGRESSION);
    for seed in 0..5 {
        let s = generate_replicate(&scenario(seed), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gamma: Vec<f64> = (0..5).map(|_| rng.random_range(-5.0..5.0)).collect();
        let shifted = s.map_responses(|i, y| y + s.x_row(i).iter().zip(&gamma).map(|(a, b)| a * b).sum::<f64>());
        let search = SearchConfig::default();
        let a = fit_mm_regression(&s, &model, &rho0, &rho1, 0.5, &search).unwrap();
        let b = fit_mm_regression(&shifted, &model, &rho0, &rho1, 0.5, &search).unwrap();
        for k in 0..5 {
            let diff = (b.beta_hat[k] - a.beta_hat[k] - gamma[k]).abs();
            assert!(diff <= 1e-8, "seed {seed}, coef {k}: {diff:e}");
        }
    }
}

#[test]
fn location_equivariance_on_distributions() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..10 {
        let preds: Vec<f64> = (0..40).map(|_| rng.random_range(0.0..15.0)).collect();
        let resids: Vec<f64> = (0..30).map(|_| rng.random_range(-2.0..2.0)).collect();
        let a = if trial % 2 == 0 { 2.5 } else { -0.75 };
        let b = 13.0;
        let d = ConvolvedDistribution::new(preds.clone(), resids.clone()).unwrap();
        let t = ConvolvedDistribution::new(
            preds.iter().map(|p| a * p + b).collect(),
            resids.iter().map(|u| a * u).collect(),
        )
        .unwrap();
        let values: Vec<f64> = preds.iter().chain(&resids).copied().collect();
        let w = WeightedSample::from_values(&values).unwrap();
        let wt = WeightedSample::from_values(&values.iter().map(|v| a * v + b).collect::<Vec<_>>()).unwrap();
        for f in FUNCTIONALS {
            let spec = f();
            let lhs = evaluate(&spec, &t).unwrap().value;
            let rhs = a * evaluate(&spec, &d).unwrap().value + b;
            assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + rhs.abs()), "{} trial {trial}: {lhs} vs {rhs}", spec.name());
            if !matches!(spec, LocationSpec::Median) || a > 0.0 {
                let lhs = evaluate(&spec, &wt).unwrap().value;
                let rhs = a * evaluate(&spec, &w).unwrap().value + b;
                assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + rhs.abs()), "{} sample trial {trial}", spec.name());
            }
        }
    }
}

#[test]
fn pipeline_is_affine_equivariant_in_the_response() {
    let model = LinearModel::new(5);
    let s: CompleteCaseSample = generate_replicate(&scenario(9), 0);
    let (a, b) = (3.7, -12.25);
    let t = s.map_responses(|_, y| a * y + b);
    for f in FUNCTIONALS {
        let cfg = PipelineConfig::new(f());
        let lhs = run_pipeline(&t, &model, &cfg).unwrap().estimate.value;
        let rhs = a * run_pipeline(&s, &model, &cfg).unwrap().estimate.value + b;
        assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + rhs.abs()), "{}: {lhs} vs {rhs}", cfg.functional.name());
    }
}
