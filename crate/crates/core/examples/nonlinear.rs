//! User-supplied differentiable model `g(x, β) = β₁ exp(β₂ x)` fitted by MM
//! and plugged into the location estimator.
//!
//! cargo run --release --example nonlinear

use marloc::location::LocationSpec;
use marloc::pipeline::{run_pipeline, PipelineConfig};
use marloc::regression::{gradient_discrepancy, CompleteCaseSample, RegressionModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Exponential;

impl RegressionModel for Exponential {
    fn n_params(&self) -> usize {
        2
    }

    fn value(&self, x: &[f64], beta: &[f64]) -> f64 {
        beta[0] * (beta[1] * x[0]).exp()
    }

    fn gradient(&self, x: &[f64], beta: &[f64], out: &mut [f64]) {
        let e = (beta[1] * x[0]).exp();
        out[0] = e;
        out[1] = beta[0] * x[0] * e;
    }

    fn initial_beta(&self) -> Vec<f64> {
        vec![1.0, 0.5]
    }
}

fn main() -> marloc::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    println!("gradient vs finite differences: {:.2e}", gradient_discrepancy(&Exponential, 1, 100, &mut rng));

    let mut rows = Vec::new();
    let mut y = Vec::new();
    for _ in 0..150 {
        let x: f64 = rng.random_range(0.0..2.0);
        let u: f64 = StandardNormal.sample(&mut rng);
        let observed = rng.random::<f64>() < 0.5 + 0.2 * x;
        rows.push(vec![x]);
        y.push(observed.then_some(2.0 * (0.8 * x).exp() + 0.3 * u));
    }
    let sample = CompleteCaseSample::new(rows, y)?;
    for spec in [LocationSpec::mean(), LocationSpec::median(), LocationSpec::mm90()] {
        let out = run_pipeline(&sample, &Exponential, &PipelineConfig::new(spec))?;
        println!(
            "{:<7} {:.4}   beta = [{:.3}, {:.3}]",
            spec.name(),
            out.estimate.value,
            out.fit.beta_hat[0],
            out.fit.beta_hat[1]
        );
    }
    Ok(())
}
