//! Clean-scenario Monte Carlo: MSE and efficiency of MEAN, MEDIAN, MM90, MM95.
//!
//! cargo run --release --example clean_study -- [replications] [seed]

use marloc::sim::{run_study, Estimator, SimScenario};

fn main() -> marloc::Result<()> {
    let mut args = std::env::args().skip(1);
    let replications = args.next().map(|s| s.parse().expect("replications")).unwrap_or(1000);
    let seed = args.next().map(|s| s.parse().expect("seed")).unwrap_or(20_240_601);
    let scenario = SimScenario {
        replications,
        seed,
        ..SimScenario::default()
    };
    let report = run_study(&scenario, &Estimator::ALL)?;
    print!("{}", report.to_table());
    println!("{:.1} s", report.runtime_secs);
    Ok(())
}
