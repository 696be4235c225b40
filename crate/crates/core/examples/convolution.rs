//! The response distribution estimate: every fitted value plus every
//! complete-case residual, handled without materializing the nm sums.
//!
//! cargo run --release --example convolution [n]

use marloc::distribution::{ConvolvedDistribution, EmpiricalDistribution};
use marloc::pipeline::{fit_regression, PipelineConfig};
use marloc::location::LocationSpec;
use marloc::sim::{generate_replicate, SimScenario};

fn main() -> marloc::Result<()> {
    let n = std::env::args().nth(1).map(|s| s.parse().expect("n")).unwrap_or(2000);
    let scenario = SimScenario {
        n,
        ..SimScenario::default()
    };
    let sample = generate_replicate(&scenario, 0);
    let model = scenario.model();
    let fit = fit_regression(&sample, &model, &PipelineConfig::new(LocationSpec::median()))?;
    let dist = ConvolvedDistribution::build(&fit, &sample, &model)?;
    println!("n = {}, m = {}, support size {}", dist.n(), dist.m(), dist.len());
    println!("mean {:.4}, median {:.4}", dist.mean(), dist.median());
    for p in [0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99] {
        let q = dist.quantile(p);
        println!("q({p:<4}) = {q:8.4}   F(q) = {:.6}", dist.cdf(q));
    }

    let small = ConvolvedDistribution::new(vec![0.0, 1.0, 2.0], vec![-0.5, 0.5])?;
    let mut out = Vec::new();
    small.write_csv(&mut out)?;
    print!("\nsix-point example:\n{}", String::from_utf8_lossy(&out));
    Ok(())
}
