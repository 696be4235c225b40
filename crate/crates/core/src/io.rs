//! CSV ingestion, flat `key = value` configuration and JSON run reports.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::breakdown::{empirical_fsbp, hyperplane_mass, pattern_grid, BreakdownConfig, FsbpReport};
use crate::error::{Error, Result};
use crate::inference::VarianceEstimate;
use crate::location::{LocationEstimate, LocationSpec};
use crate::pipeline::{run_pipeline, PipelineConfig, RegressionChoice};
use crate::regression::{CompleteCaseSample, FitMethod, LinearModel, SearchConfig};
use crate::sim::{ContaminationSpec, SimScenario};

/// Column roles of an input CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub response: String,
    /// Optional 0/1 column; must agree with the missing responses.
    pub indicator: Option<String>,
    /// Covariate columns; every remaining column when `None`.
    pub covariates: Option<Vec<String>>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            response: "y".into(),
            indicator: None,
            covariates: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub covariate_names: Vec<String>,
    pub response_name: String,
    pub sample: CompleteCaseSample,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.sample.n()
    }

    pub fn m(&self) -> usize {
        self.sample.m()
    }
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c == "NA"
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref()).map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_csv(file, schema)
}

/// Reads a headed CSV. Empty cells and `NA` mark missing values; row
/// numbers in errors count data rows from 1.
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Io(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let position = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidArgument(format!("column '{name}' not found")))
    };
    let y_col = position(&schema.response)?;
    let a_col = schema.indicator.as_deref().map(position).transpose()?;
    let x_cols: Vec<usize> = match &schema.covariates {
        Some(names) => names.iter().map(|n| position(n)).collect::<Result<_>>()?,
        None => (0..headers.len()).filter(|&c| c != y_col && Some(c) != a_col).collect(),
    };
    if x_cols.is_empty() {
        return Err(Error::InvalidArgument("no covariate columns".into()));
    }
    let p = x_cols.len();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        let number = |c: usize| -> Result<f64> {
            let cell = record.get(c).unwrap_or("").trim();
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    row,
                    column: headers[c].clone(),
                    message: format!("'{cell}' is not a finite number"),
                })
        };
        for &c in &x_cols {
            if is_missing(record.get(c).unwrap_or("")) {
                return Err(Error::MissingCovariate {
                    row,
                    column: headers[c].clone(),
                });
            }
            x.push(number(c)?);
        }
        let response = if is_missing(record.get(y_col).unwrap_or("")) {
            None
        } else {
            Some(number(y_col)?)
        };
        if let Some(a) = a_col {
            let observed = match record.get(a).unwrap_or("").trim() {
                "1" => true,
                "0" => false,
                other => {
                    return Err(Error::Parse {
                        row,
                        column: headers[a].clone(),
                        message: format!("indicator must be 0 or 1, got '{other}'"),
                    })
                }
            };
            if observed != response.is_some() {
                return Err(Error::IndicatorConflict { row });
            }
        }
        y.push(response);
    }
    Ok(Dataset {
        covariate_names: x_cols.iter().map(|&c| headers[c].clone()).collect(),
        response_name: headers[y_col].clone(),
        sample: CompleteCaseSample::from_flat(p, x, y)?,
    })
}

/// Writes a sample as CSV with columns `x1..xp,y`, missing responses empty.
pub fn write_sample_csv<W: std::io::Write>(sample: &CompleteCaseSample, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut header: Vec<String> = (1..=sample.p()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header).map_err(io)?;
    for i in 0..sample.n() {
        let mut rec: Vec<String> = sample.x_row(i).iter().map(|v| format!("{v:?}")).collect();
        rec.push(sample.response(i).map(|v| format!("{v:?}")).unwrap_or_default());
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Flat `key = value` configuration shared by every subcommand. Command
/// line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub functional: Option<String>,
    pub se: Option<bool>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub response: Option<String>,
    pub indicator: Option<String>,
    pub covariates: Option<Vec<String>>,
    pub k0: Option<f64>,
    pub k1: Option<f64>,
    pub delta: Option<f64>,
    pub subsets: Option<usize>,
    pub keep: Option<usize>,
    pub max_pairs: Option<usize>,
    pub level: Option<f64>,
    pub n: Option<usize>,
    pub replications: Option<usize>,
    pub contaminate: Option<String>,
    pub kappas: Option<Vec<f64>>,
    pub trials: Option<usize>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {}", e.message())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }

    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            response: self.response.clone().unwrap_or_else(|| "y".into()),
            indicator: self.indicator.clone(),
            covariates: self.covariates.clone(),
        }
    }

    pub fn functional_spec(&self) -> Result<LocationSpec> {
        LocationSpec::from_name(self.functional.as_deref().unwrap_or("mm90"))
    }

    pub fn search(&self) -> SearchConfig {
        let d = SearchConfig::default();
        SearchConfig {
            subsets: self.subsets.unwrap_or(d.subsets),
            keep: self.keep.unwrap_or(d.keep),
            seed: self.seed.unwrap_or(d.seed),
            ..d
        }
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let mut c = PipelineConfig::new(self.functional_spec()?);
        c.k0 = self.k0.unwrap_or(c.k0);
        c.k1 = self.k1.unwrap_or(c.k1);
        c.delta = self.delta.unwrap_or(c.delta);
        c.search = self.search();
        Ok(c)
    }

    pub fn scenario(&self) -> Result<SimScenario> {
        let d = SimScenario::default();
        Ok(SimScenario {
            n: self.n.unwrap_or(d.n),
            replications: self.replications.unwrap_or(d.replications),
            seed: self.seed.unwrap_or(d.seed),
            contamination: self.contaminate.as_deref().map(ContaminationSpec::parse).transpose()?,
            search: SearchConfig {
                subsets: self.subsets.unwrap_or(d.search.subsets),
                keep: self.keep.unwrap_or(d.search.keep),
                ..d.search
            },
            ..d
        })
    }
}

/// Regression part of a [`RunReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSummary {
    pub method: FitMethod,
    pub beta_hat: Vec<f64>,
    pub alpha_hat: f64,
    pub sigma_hat: f64,
    pub converged: bool,
    pub iterations: usize,
    pub exact_fit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub functional: String,
    pub estimate: LocationEstimate,
    pub regression: RegressionSummary,
    pub covariates: Vec<String>,
    pub n: usize,
    pub m: usize,
    pub eta_hat: f64,
    pub variance: Option<VarianceEstimate>,
    pub config: PipelineConfig,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("report: {e}")))
    }

    /// Aligned text summary.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "functional  {}\nestimate    {:.6}\nn, m        {}, {}\neta         {:.4}\nregression  {:?}, sigma {:.4}\n",
            self.functional, self.estimate.value, self.n, self.m, self.eta_hat, self.regression.method, self.regression.sigma_hat
        );
        if let Some(v) = &self.variance {
            out += &format!(
                "se          {:.6}\nci({:.0}%)     [{:.6}, {:.6}]\n",
                v.se,
                100.0 * v.level,
                v.ci_lower,
                v.ci_upper
            );
        }
        for w in &self.warnings {
            out += &format!("warning     {w}\n");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOptions {
    pub pipeline: PipelineConfig,
    /// Compute `τ̂²` and a confidence interval.
    pub se: bool,
    pub max_pairs: Option<usize>,
    pub level: Option<f64>,
}

impl EstimateOptions {
    /// Standard errors for every functional except the mean.
    pub fn new(pipeline: PipelineConfig) -> Self {
        EstimateOptions {
            se: !matches!(pipeline.functional, LocationSpec::Mean),
            pipeline,
            max_pairs: None,
            level: None,
        }
    }
}

/// Regression on the complete cases, convolution, functional, and
/// optionally the plug-in variance, with every warning collected.
pub fn estimate_command(dataset: &Dataset, options: &EstimateOptions) -> Result<RunReport> {
    let model = LinearModel::new(dataset.sample.p());
    let config = &options.pipeline;
    let (out, variance) = if options.se {
        let mut inference = config.inference_options();
        if let Some(mp) = options.max_pairs {
            inference.max_pairs = mp;
        }
        if let Some(level) = options.level {
            inference.level = level;
        }
        let out = run_pipeline(&dataset.sample, &model, config)?;
        let v = crate::inference::estimate_tau_sq(
            &config.functional,
            &out.estimate,
            &out.fit,
            &dataset.sample,
            &model,
            &out.distribution,
            &inference,
        )?;
        (out, Some(v))
    } else {
        (run_pipeline(&dataset.sample, &model, config)?, None)
    };
    let mut warnings = out.fit.warnings.clone();
    if out.fit.exact_fit {
        warnings.push("exact_fit: at least half of the complete cases lie on the fitted surface".into());
    }
    if out.estimate.degenerate {
        warnings.push("degenerate: the response distribution has a point mass of at least 1 - delta".into());
    }
    if let Some(v) = &variance {
        warnings.extend(v.warnings.iter().cloned());
        if v.subsampled_pairs {
            warnings.push("subsampled_pairs: variance sums were computed on a subsample of pairs".into());
        }
    }
    warnings.dedup();
    Ok(RunReport {
        functional: config.functional.name(),
        estimate: out.estimate,
        regression: RegressionSummary {
            method: out.fit.method,
            beta_hat: out.fit.beta_hat.clone(),
            alpha_hat: out.fit.alpha_hat,
            sigma_hat: out.fit.sigma_hat,
            converged: out.fit.converged,
            iterations: out.fit.iterations,
            exact_fit: out.fit.exact_fit,
        },
        covariates: dataset.covariate_names.clone(),
        n: dataset.n(),
        m: dataset.m(),
        eta_hat: dataset.m() as f64 / dataset.n() as f64,
        variance,
        config: *config,
        warnings,
    })
}

/// Process exit code for an error: 2 for bad input or arguments, 3 for
/// estimation failures, 4 for I/O.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. } | Error::MissingCovariate { .. } | Error::IndicatorConflict { .. } | Error::InvalidArgument(_) => 2,
        Error::Io(_) => 4,
        _ => 3,
    }
}

/// Breakdown experiment of one functional on `sample`, with the theoretical
/// lower bound filled in from the estimated hyperplane mass.
pub fn breakdown_command(
    sample: &CompleteCaseSample,
    pipeline: &PipelineConfig,
    kappas: &[f64],
    config: &BreakdownConfig,
) -> Result<FsbpReport> {
    let model = LinearModel::new(sample.p());
    let patterns = pattern_grid(sample.n(), sample.m(), kappas);
    let mut report = empirical_fsbp(
        |s| run_pipeline(s, &model, pipeline).map(|o| o.estimate.value),
        sample,
        &patterns,
        config,
    )?;
    report.lower_bound = match (pipeline.regression, crate::breakdown::uniform_breakdown_point(&pipeline.functional)) {
        (RegressionChoice::MM, Ok(eps2)) => {
            let c = hyperplane_mass(sample, 500, pipeline.search.seed);
            Some(crate::breakdown::fsbp_lower_bound(crate::breakdown::regression_breakdown_point(pipeline.delta, c), eps2))
        }
        _ => None,
    };
    Ok(report)
}

/// `key=value` pairs of a config as a map, for echoing.
pub fn config_echo(config: &Config) -> HashMap<String, String> {
    let value = toml::Value::try_from(config).expect("config serializes");
    value
        .as_table()
        .map(|t| t.iter().map(|(k, v)| (k.clone(), v.to_string())).collect())
        .unwrap_or_default()
}
