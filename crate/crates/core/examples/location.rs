//! Mean, median and MM location functionals on a contaminated sample, with
//! the S-location stage exposed.
//!
//! cargo run --release --example location

use marloc::distribution::WeightedSample;
use marloc::location::{evaluate, s_location, LocationSpec};
use marloc::rho::{RhoKernel, K0_DEFAULT};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> marloc::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let normal = Normal::new(10.0, 1.0).unwrap();
    let mut values: Vec<f64> = (0..300).map(|_| normal.sample(&mut rng)).collect();
    for v in values.iter_mut().take(60) {
        *v = 1e3;
    }
    let sample = WeightedSample::from_values(&values)?;
    let s = s_location(&sample, &RhoKernel::tukey(K0_DEFAULT), 0.5)?;
    println!("S-location {:.4}, scale {:.4}", s.mu, s.sigma);
    for spec in [LocationSpec::mean(), LocationSpec::median(), LocationSpec::mm90(), LocationSpec::mm95()] {
        let est = evaluate(&spec, &sample)?;
        println!(
            "{:<7} {:>10.4}  ({} iterations, converged {})",
            spec.name(),
            est.value,
            est.iterations,
            est.converged
        );
    }
    Ok(())
}
