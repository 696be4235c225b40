//! Empirical breakdown: replace growing shares of rows by far-away points and
//! watch which estimators escape.
//!
//! cargo run --release --example breakdown [trials]

use marloc::breakdown::{
    empirical_fsbp, fsbp_lower_bound, hyperplane_mass, pattern_grid, regression_breakdown_point,
    uniform_breakdown_point, BreakdownConfig,
};
use marloc::location::LocationSpec;
use marloc::pipeline::{run_pipeline, PipelineConfig};
use marloc::sim::{generate_replicate, SimScenario};

fn main() -> marloc::Result<()> {
    let trials: u64 = std::env::args().nth(1).map(|s| s.parse().expect("trials")).unwrap_or(4);
    let scenario = SimScenario::default();
    let base = generate_replicate(&scenario, 0);
    let model = scenario.model();
    let c = hyperplane_mass(&base, 500, 1);
    let eps1 = regression_breakdown_point(0.5, c);
    println!("n = {}, m = {}, hyperplane mass {c:.3}, regression breakdown {eps1:.3}", base.n(), base.m());

    let kappas = [0.02, 0.1, 0.2, 0.28, 0.35, 0.45];
    let patterns = pattern_grid(base.n(), base.m(), &kappas);
    let config = BreakdownConfig {
        seeds: (0..trials).collect(),
        ..BreakdownConfig::default()
    };
    for spec in [LocationSpec::mean(), LocationSpec::median(), LocationSpec::mm90()] {
        let cfg = PipelineConfig::new(spec);
        let report = empirical_fsbp(|s| run_pipeline(s, &model, &cfg).map(|o| o.estimate.value), &base, &patterns, &config)?;
        let bound = uniform_breakdown_point(&spec).map(|e2| fsbp_lower_bound(eps1, e2)).ok();
        println!(
            "{:<7} clean {:.4}  lower bound {}  first escape {}",
            spec.name(),
            report.clean,
            bound.map(|b| format!("{b:.3}")).unwrap_or_else(|| "none".into()),
            report.first_escape.map(|k| format!("{k:.3}")).unwrap_or_else(|| "none on grid".into())
        );
        for g in &report.grid {
            println!("    kappa {:.3} (t {:>2}, s {:>2}) escaped {:<5} worst |mu| {:.3e}", g.kappa, g.t, g.s, g.escaped, g.worst_abs);
        }
    }
    Ok(())
}
