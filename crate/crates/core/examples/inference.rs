//! Plug-in asymptotic variance and confidence intervals for the median and
//! the MM location functionals.
//!
//! cargo run --release --example inference [n]

use marloc::location::LocationSpec;
use marloc::pipeline::{run_with_variance, PipelineConfig};
use marloc::sim::{generate_replicate, SimScenario};

fn main() -> marloc::Result<()> {
    let n = std::env::args().nth(1).map(|s| s.parse().expect("n")).unwrap_or(400);
    let scenario = SimScenario {
        n,
        ..SimScenario::default()
    };
    let sample = generate_replicate(&scenario, 0);
    println!("n = {}, m = {}, true center {}", sample.n(), sample.m(), scenario.mu0());
    for spec in [LocationSpec::mean(), LocationSpec::median(), LocationSpec::mm90(), LocationSpec::mm95()] {
        let (out, v) = run_with_variance(&sample, &scenario.model(), &PipelineConfig::new(spec))?;
        println!(
            "{:<7} {:.4}  se {:.4}  95% CI [{:.4}, {:.4}]  tau^2 {:.3}",
            spec.name(),
            out.estimate.value,
            v.se,
            v.ci_lower,
            v.ci_upper,
            v.tau_sq
        );
        if let (Some(f), Some(h)) = (v.density_at_mu, v.bandwidth) {
            println!("        density at the median {f:.4} (bandwidth {h:.4})");
        }
        for w in &v.warnings {
            println!("        warning: {w}");
        }
    }
    Ok(())
}
