//! S and MM regression on the complete cases, clean and with bad leverage
//! points, next to least squares.
//!
//! cargo run --release --example mm_regression

use marloc::regression::{fit_least_squares, fit_mm_regression, fit_s_regression, LinearModel, SearchConfig};
use marloc::rho::{RhoKernel, K0_DEFAULT, K1_REGRESSION};
use marloc::sim::{generate_replicate, SimScenario};

fn main() -> marloc::Result<()> {
    let scenario = SimScenario::default();
    let clean = generate_replicate(&scenario, 0);
    let mut dirty = clean.clone();
    for &i in clean.observed_indices().iter().take(15) {
        dirty.replace_row(i, &[5.0; 5], -40.0);
    }
    let model = LinearModel::new(5);
    let (rho0, rho1) = (RhoKernel::tukey(K0_DEFAULT), RhoKernel::tukey(K1_REGRESSION));
    let search = SearchConfig::default();

    for (label, sample) in [("clean", &clean), ("15 bad leverage points", &dirty)] {
        println!("{label} (n = {}, m = {})", sample.n(), sample.m());
        let ls = fit_least_squares(sample, &model, &search)?;
        let s = fit_s_regression(sample, &model, &rho0, 0.5, &search)?;
        let mm = fit_mm_regression(sample, &model, &rho0, &rho1, 0.5, &search)?;
        for (name, fit) in [("LS", &ls), ("S", &s), ("MM", &mm)] {
            let b: Vec<String> = fit.beta_hat.iter().map(|v| format!("{v:6.3}")).collect();
            println!(
                "  {name:<3} beta [{}]  alpha {:7.3}  sigma {:.3}",
                b.join(", "),
                fit.alpha_hat,
                fit.sigma_hat
            );
        }
        println!("  MM descent: {} iterations, objective {:?}", mm.iterations, mm.objective_trace.last());
    }
    Ok(())
}
