//! End-to-end on a CSV file: load, estimate, print the JSON report.
//! Without an argument a generated dataset is written to a temporary file first.
//!
//! cargo run --release --example estimate_csv -- [data.csv] [functional]

use marloc::io::{estimate_command, load_csv, write_sample_csv, CsvSchema, EstimateOptions};
use marloc::location::LocationSpec;
use marloc::pipeline::PipelineConfig;
use marloc::sim::{generate_replicate, SimScenario};

fn main() -> marloc::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = match args.next() {
        Some(p) => std::path::PathBuf::from(p),
        None => {
            let p = std::env::temp_dir().join("marloc_example.csv");
            write_sample_csv(&generate_replicate(&SimScenario::default(), 0), std::fs::File::create(&p)?)?;
            p
        }
    };
    let spec = LocationSpec::from_name(&args.next().unwrap_or_else(|| "mm90".into()))?;
    let dataset = load_csv(&path, &CsvSchema::default())?;
    let report = estimate_command(&dataset, &EstimateOptions::new(PipelineConfig::new(spec)))?;
    eprint!("{}", report.to_text());
    println!("{}", report.to_json());
    Ok(())
}
