//! MSE curves under 10% replacement of complete cases by `(x*·1, y*)`.
//! Writes long-format CSV to stdout and a short summary to stderr.
//!
//! cargo run --release --example contamination_sweep -- [x*] [replications] > sweep.csv

use marloc::sim::{run_sweep, ContaminationSpec, Estimator, SimScenario};

fn main() -> marloc::Result<()> {
    let mut args = std::env::args().skip(1);
    let x_star: f64 = args.next().map(|s| s.parse().expect("x*")).unwrap_or(1.0);
    let replications = args.next().map(|s| s.parse().expect("replications")).unwrap_or(100);
    let scenario = SimScenario {
        replications,
        contamination: Some(ContaminationSpec::new(x_star)),
        ..SimScenario::default()
    };
    let report = run_sweep(&scenario, &Estimator::ALL)?;
    report.write_csv(std::io::stdout().lock())?;
    for name in &report.estimators {
        let curve = report.curve(name).unwrap();
        let max = curve.iter().copied().fold(f64::MIN, f64::max);
        eprintln!(
            "{name:<7} y*=8: {:>9.4}  y*=50: {:>9.4}  max: {:>9.4}",
            curve[0],
            curve[curve.len() - 1],
            max
        );
    }
    eprintln!("{:.1} s", report.runtime_secs);
    Ok(())
}
