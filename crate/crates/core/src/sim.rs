//! Monte Carlo study: `yᵢ = 3xᵢ₁ + … + 3xᵢ₅ + uᵢ` with uniform covariates,
//! standard normal errors and logistic missingness, optionally with a share
//! of the complete cases replaced by a fixed outlier `(x*·1, y*)`.
//!
//! Every replicate draws from its own ChaCha stream of the master seed, so
//! results do not depend on the number of worker threads.

use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::ConvolvedDistribution;
use crate::error::{Error, Result};
use crate::inference::{estimate_tau_sq, InferenceOptions};
use crate::location::{mm_location_from, s_location, LocationSpec};
use crate::pipeline::{fit_regression, PipelineConfig, RegressionChoice};
use crate::regression::{CompleteCaseSample, LinearModel, RegressionFit, SearchConfig};

/// Center of symmetry of the response distribution at the default design.
pub const MU0: f64 = 7.5;

const CONTAMINATION_SALT: u64 = 0x00c0_ffee_d00d_f00d;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Estimator {
    Mean,
    Median,
    MM90,
    MM95,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [Estimator::Mean, Estimator::Median, Estimator::MM90, Estimator::MM95];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Mean => "MEAN",
            Estimator::Median => "MEDIAN",
            Estimator::MM90 => "MM90",
            Estimator::MM95 => "MM95",
        }
    }

    pub fn spec(self) -> LocationSpec {
        match self {
            Estimator::Mean => LocationSpec::mean(),
            Estimator::Median => LocationSpec::median(),
            Estimator::MM90 => LocationSpec::mm90(),
            Estimator::MM95 => LocationSpec::mm95(),
        }
    }

    /// Least squares feeds the mean; the other three share one MM fit.
    pub fn regression(self) -> RegressionChoice {
        match self {
            Estimator::Mean => RegressionChoice::LeastSquares,
            _ => RegressionChoice::MM,
        }
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mean" => Ok(Estimator::Mean),
            "median" => Ok(Estimator::Median),
            "mm90" => Ok(Estimator::MM90),
            "mm95" => Ok(Estimator::MM95),
            other => Err(Error::InvalidArgument(format!("unknown estimator '{other}'"))),
        }
    }
}

/// Share of the complete cases replaced by `(x*·1, y*)`, with `y*` swept
/// over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSpec {
    pub fraction: f64,
    pub x_star: f64,
    pub y_grid: Vec<f64>,
}

impl ContaminationSpec {
    /// 10% of the complete cases, `y*` from 8 to 50 in steps of 0.2.
    pub fn new(x_star: f64) -> Self {
        ContaminationSpec {
            fraction: 0.10,
            x_star,
            y_grid: grid(8.0, 50.0, 0.2),
        }
    }

    /// Rows replaced in a sample with `m` complete cases.
    pub fn count(&self, m: usize) -> usize {
        ((self.fraction * m as f64).round() as usize).min(m)
    }

    /// Parses `x*` or `x*:start:end:step`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("contamination '{text}': expected x* or x*:start:end:step"));
        let parts: Vec<f64> = text
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        match parts[..] {
            [x] => Ok(ContaminationSpec::new(x)),
            [x, a, b, h] if h > 0.0 && b >= a => Ok(ContaminationSpec {
                y_grid: grid(a, b, h),
                ..ContaminationSpec::new(x)
            }),
            _ => Err(bad()),
        }
    }
}

/// `start, start + step, …` up to `end` inclusive, without accumulated drift.
pub fn grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let k = ((end - start) / step + 1e-9).floor() as usize;
    (0..=k).map(|i| start + i as f64 * step).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub n: usize,
    pub p: usize,
    /// Common value of every slope.
    pub beta: f64,
    /// Slope of the logit of `P(a = 1 | x)` in `Σⱼ xⱼ`.
    pub missing_slope: f64,
    pub replications: usize,
    pub seed: u64,
    pub contamination: Option<ContaminationSpec>,
    pub search: SearchConfig,
}

impl Default for SimScenario {
    fn default() -> Self {
        SimScenario {
            n: 100,
            p: 5,
            beta: 3.0,
            missing_slope: 0.57,
            replications: 1000,
            seed: 20_240_601,
            contamination: None,
            search: SearchConfig::default(),
        }
    }
}

impl SimScenario {
    /// Population center `β·p/2`.
    pub fn mu0(&self) -> f64 {
        self.beta * self.p as f64 / 2.0
    }

    pub fn model(&self) -> LinearModel {
        LinearModel::new(self.p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 || self.replications == 0 {
            return Err(Error::InvalidArgument("n, p and replications must be positive".into()));
        }
        if let Some(c) = &self.contamination {
            if !(0.0..=1.0).contains(&c.fraction) || c.y_grid.is_empty() {
                return Err(Error::InvalidArgument("contamination fraction in [0, 1] and a nonempty y* grid".into()));
            }
        }
        Ok(())
    }
}

/// Stream `index` of the ChaCha8 generator seeded with `seed`.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Clean replicate `index`: covariates, errors and missingness indicators.
pub fn generate_replicate(scenario: &SimScenario, index: u64) -> CompleteCaseSample {
    let mut rng = replicate_rng(scenario.seed, index);
    let p = scenario.p;
    let mut x = Vec::with_capacity(scenario.n * p);
    let mut y = Vec::with_capacity(scenario.n);
    for _ in 0..scenario.n {
        let row: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
        let s: f64 = row.iter().sum();
        let u: f64 = StandardNormal.sample(&mut rng);
        let prob = 1.0 / (1.0 + (-scenario.missing_slope * s).exp());
        let observed = rng.random::<f64>() < prob;
        y.push(observed.then_some(scenario.beta * s + u));
        x.extend(row);
    }
    CompleteCaseSample::from_flat(p, x, y).expect("generated sample is valid")
}

/// Complete cases of replicate `index` that contamination replaces; fixed
/// across the `y*` grid.
pub fn contaminated_rows(scenario: &SimScenario, sample: &CompleteCaseSample, index: u64) -> Vec<usize> {
    let Some(c) = &scenario.contamination else {
        return Vec::new();
    };
    let obs = sample.observed_indices();
    let mut rng = replicate_rng(scenario.seed ^ CONTAMINATION_SALT, index);
    let mut rows: Vec<usize> = sample_indices(&mut rng, obs.len(), c.count(obs.len()))
        .into_iter()
        .map(|k| obs[k])
        .collect();
    rows.sort_unstable();
    rows
}

/// Replace `rows` (complete cases) by `(x*·1, y*)`.
pub fn apply_contamination(sample: &CompleteCaseSample, rows: &[usize], x_star: f64, y_star: f64) -> CompleteCaseSample {
    let x = vec![x_star; sample.p()];
    let mut out = sample.clone();
    for &i in rows {
        out.replace_row(i, &x, y_star);
    }
    out
}

/// Fits and estimates for one sample, shared across estimators.
struct Shared<'a> {
    sample: &'a CompleteCaseSample,
    model: LinearModel,
    search: SearchConfig,
    fits: [Option<Result<(RegressionFit, ConvolvedDistribution)>>; 2],
}

impl<'a> Shared<'a> {
    fn new(sample: &'a CompleteCaseSample, scenario: &SimScenario) -> Self {
        Shared {
            sample,
            model: scenario.model(),
            search: scenario.search,
            fits: [None, None],
        }
    }

    fn fit(&mut self, choice: RegressionChoice) -> Result<&(RegressionFit, ConvolvedDistribution)> {
        let slot = match choice {
            RegressionChoice::LeastSquares => 0,
            RegressionChoice::MM => 1,
        };
        if self.fits[slot].is_none() {
            let mut config = PipelineConfig::new(LocationSpec::median());
            config.regression = choice;
            config.search = self.search;
            let result = fit_regression(self.sample, &self.model, &config).and_then(|fit| {
                let dist = ConvolvedDistribution::build(&fit, self.sample, &self.model)?;
                Ok((fit, dist))
            });
            self.fits[slot] = Some(result);
        }
        self.fits[slot].as_ref().unwrap().as_ref().map_err(Clone::clone)
    }
}

/// `μ̂` for every estimator, in order. MM90 and MM95 share one S-location.
pub fn estimate_all(sample: &CompleteCaseSample, scenario: &SimScenario, estimators: &[Estimator]) -> Vec<Result<f64>> {
    let mut shared = Shared::new(sample, scenario);
    let mut s_loc = None;
    estimators
        .iter()
        .map(|&e| {
            let (_, dist) = shared.fit(e.regression())?;
            match e.spec() {
                LocationSpec::MMLocation { rho0, rho1, delta } => {
                    let s = match &s_loc {
                        Some(s) => s,
                        None => s_loc.insert(s_location(dist, &rho0, delta)?),
                    };
                    Ok(mm_location_from(dist, s, &rho1)?.value)
                }
                spec => Ok(crate::location::evaluate(&spec, dist)?.value),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub name: String,
    pub mse: f64,
    pub bias: f64,
    pub median_abs_error: f64,
    /// `MSE(MEAN) / MSE(this)`, when MEAN is part of the study.
    pub efficiency: Option<f64>,
    pub failures: usize,
    /// `μ̂ - μ₀` per replicate; `None` where the estimator failed.
    pub errors: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub mu0: f64,
    pub estimators: Vec<EstimatorSummary>,
    pub runtime_secs: f64,
}

fn summarize(name: &str, errors: Vec<Option<f64>>) -> EstimatorSummary {
    let ok: Vec<f64> = errors.iter().flatten().copied().collect();
    let k = ok.len().max(1) as f64;
    let mut abs: Vec<f64> = ok.iter().map(|e| e.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let median_abs_error = match abs.len() {
        0 => f64::NAN,
        l if l % 2 == 1 => abs[l / 2],
        l => 0.5 * (abs[l / 2 - 1] + abs[l / 2]),
    };
    EstimatorSummary {
        name: name.to_string(),
        mse: ok.iter().map(|e| e * e).sum::<f64>() / k,
        bias: ok.iter().sum::<f64>() / k,
        median_abs_error,
        efficiency: None,
        failures: errors.len() - ok.len(),
        errors,
    }
}

/// MSE of `μ̂` against `μ₀` over the replications of the scenario; a
/// contaminated scenario is evaluated at the first `y*` of its grid.
pub fn run_study(scenario: &SimScenario, estimators: &[Estimator]) -> Result<SimReport> {
    scenario.validate()?;
    let start = Instant::now();
    let mu0 = scenario.mu0();
    let per_rep: Vec<Vec<Option<f64>>> = (0..scenario.replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut sample = generate_replicate(scenario, r);
            if let Some(c) = &scenario.contamination {
                let rows = contaminated_rows(scenario, &sample, r);
                sample = apply_contamination(&sample, &rows, c.x_star, c.y_grid[0]);
            }
            estimate_all(&sample, scenario, estimators)
                .into_iter()
                .map(|v| v.ok().filter(|v| v.is_finite()).map(|v| v - mu0))
                .collect()
        })
        .collect();
    let mut summaries: Vec<EstimatorSummary> = estimators
        .iter()
        .enumerate()
        .map(|(k, e)| summarize(e.name(), per_rep.iter().map(|r| r[k]).collect()))
        .collect();
    if let Some(base) = estimators.iter().position(|&e| e == Estimator::Mean) {
        let reference = summaries[base].mse;
        for s in &mut summaries {
            s.efficiency = Some(reference / s.mse);
        }
    }
    Ok(SimReport {
        n: scenario.n,
        replications: scenario.replications,
        seed: scenario.seed,
        mu0,
        estimators: summaries,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

impl SimReport {
    pub fn summary(&self, name: &str) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|s| s.name == name)
    }

    /// Aligned text table of MSE and efficiency.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "n = {}, replications = {}, seed = {}, mu0 = {}\n{:<10}{:>10}{:>10}{:>12}{:>10}\n",
            self.n, self.replications, self.seed, self.mu0, "estimate", "MSE", "bias", "efficiency", "failed"
        );
        for s in &self.estimators {
            let eff = s.efficiency.map(|e| format!("{:.1}%", 100.0 * e)).unwrap_or_else(|| "-".into());
            out += &format!("{:<10}{:>10.4}{:>10.4}{:>12}{:>10}\n", s.name, s.mse, s.bias, eff, s.failures);
        }
        out
    }

    /// CSV with columns `estimator,mse,bias,median_abs_error,efficiency,failures`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["estimator", "mse", "bias", "median_abs_error", "efficiency", "failures"])
            .map_err(io)?;
        for s in &self.estimators {
            w.write_record([
                s.name.clone(),
                s.mse.to_string(),
                s.bias.to_string(),
                s.median_abs_error.to_string(),
                s.efficiency.map(|e| e.to_string()).unwrap_or_default(),
                s.failures.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// MSE curves over the `y*` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub x_star: f64,
    pub fraction: f64,
    pub replications: usize,
    pub seed: u64,
    pub y_grid: Vec<f64>,
    pub estimators: Vec<String>,
    /// `mse[e][g]` for estimator `e` at grid point `g`.
    pub mse: Vec<Vec<f64>>,
    pub failures: Vec<Vec<usize>>,
    pub runtime_secs: f64,
}

impl SweepReport {
    pub fn curve(&self, name: &str) -> Option<&[f64]> {
        self.estimators.iter().position(|e| e == name).map(|k| self.mse[k].as_slice())
    }

    /// Long CSV with columns `x_star,y_star,estimator,mse,failures`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["x_star", "y_star", "estimator", "mse", "failures"]).map_err(io)?;
        for (g, y) in self.y_grid.iter().enumerate() {
            for (k, name) in self.estimators.iter().enumerate() {
                w.write_record([
                    self.x_star.to_string(),
                    format!("{y:.2}"),
                    name.clone(),
                    self.mse[k][g].to_string(),
                    self.failures[k][g].to_string(),
                ])
                .map_err(io)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Contamination sweep. Every replicate keeps its clean draw and its
/// replaced rows across the grid; only `y*` moves.
pub fn run_sweep(scenario: &SimScenario, estimators: &[Estimator]) -> Result<SweepReport> {
    scenario.validate()?;
    let c = scenario
        .contamination
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("sweep needs a contamination spec".into()))?;
    let start = Instant::now();
    let mu0 = scenario.mu0();
    let reps = scenario.replications;
    let g = c.y_grid.len();
    let bases: Vec<(CompleteCaseSample, Vec<usize>)> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let s = generate_replicate(scenario, r);
            let rows = contaminated_rows(scenario, &s, r);
            (s, rows)
        })
        .collect();
    let cells: Vec<Vec<Option<f64>>> = (0..reps * g)
        .into_par_iter()
        .map(|cell| {
            let (base, rows) = &bases[cell / g];
            let sample = apply_contamination(base, rows, c.x_star, c.y_grid[cell % g]);
            estimate_all(&sample, scenario, estimators)
                .into_iter()
                .map(|v| v.ok().filter(|v| v.is_finite()).map(|v| v - mu0))
                .collect()
        })
        .collect();
    let mut mse = vec![vec![0.0; g]; estimators.len()];
    let mut failures = vec![vec![0usize; g]; estimators.len()];
    for k in 0..estimators.len() {
        for j in 0..g {
            let mut sum = 0.0;
            let mut ok = 0usize;
            for r in 0..reps {
                match cells[r * g + j][k] {
                    Some(e) => {
                        sum += e * e;
                        ok += 1;
                    }
                    None => failures[k][j] += 1,
                }
            }
            mse[k][j] = if ok > 0 { sum / ok as f64 } else { f64::NAN };
        }
    }
    Ok(SweepReport {
        x_star: c.x_star,
        fraction: c.fraction,
        replications: reps,
        seed: scenario.seed,
        y_grid: c.y_grid.clone(),
        estimators: estimators.iter().map(|e| e.name().to_string()).collect(),
        mse,
        failures,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub name: String,
    pub covered: usize,
    pub evaluated: usize,
    pub failures: usize,
    pub mean_se: f64,
}

impl CoverageSummary {
    pub fn rate(&self) -> f64 {
        self.covered as f64 / self.evaluated.max(1) as f64
    }
}

/// Share of replications whose plug-in confidence interval at `level`
/// contains `μ₀`.
pub fn run_coverage(scenario: &SimScenario, estimators: &[Estimator], level: f64) -> Result<Vec<CoverageSummary>> {
    scenario.validate()?;
    let mu0 = scenario.mu0();
    let per_rep: Vec<Vec<Option<(bool, f64)>>> = (0..scenario.replications as u64)
        .into_par_iter()
        .map(|r| {
            let sample = generate_replicate(scenario, r);
            let mut shared = Shared::new(&sample, scenario);
            let model = scenario.model();
            estimators
                .iter()
                .map(|&e| {
                    let spec = e.spec();
                    let (fit, dist) = shared.fit(e.regression()).ok()?;
                    let est = crate::location::evaluate(&spec, dist).ok()?;
                    let options = InferenceOptions {
                        level,
                        seed: r,
                        ..InferenceOptions::default()
                    };
                    let v = estimate_tau_sq(&spec, &est, fit, &sample, &model, dist, &options).ok()?;
                    v.se.is_finite().then_some((v.ci_lower <= mu0 && mu0 <= v.ci_upper, v.se))
                })
                .collect()
        })
        .collect();
    Ok(estimators
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let ok: Vec<(bool, f64)> = per_rep.iter().filter_map(|r| r[k]).collect();
            CoverageSummary {
                name: e.name().to_string(),
                covered: ok.iter().filter(|c| c.0).count(),
                evaluated: ok.len(),
                failures: per_rep.len() - ok.len(),
                mean_se: ok.iter().map(|c| c.1).sum::<f64>() / ok.len().max(1) as f64,
            }
        })
        .collect())
}
