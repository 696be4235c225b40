//! Finite-sample breakdown experiments for the missing-data estimator.
//!
//! A replacement pattern `(t, s)` changes at most `t` rows, at most `s` of
//! them complete cases; unobserved rows can only have their covariates
//! replaced. Its size is `κ(t, s) = max(t/n, s/m)`. An estimator escapes at
//! `(t, s)` when some rung of a magnitude ladder pushes `|μ̂|` past a fixed
//! multiple of the clean `|μ̂|`.

use std::io::Write;

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::location::LocationSpec;
use crate::regression::CompleteCaseSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Placement {
    /// Covariates pushed far along a direction, response kept.
    LeverageX,
    /// Response replaced, covariates kept.
    OutlierY,
    /// Both covariates and response pushed out.
    Both,
}

impl Placement {
    pub const ALL: [Placement; 3] = [Placement::LeverageX, Placement::OutlierY, Placement::Both];
}

/// One replacement pattern with its magnitude ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationScheme {
    pub t: usize,
    pub s: usize,
    pub ladder: Vec<f64>,
    pub placement: Placement,
}

/// `10², 10³, …, 10⁸`.
pub fn default_ladder() -> Vec<f64> {
    (2..=8).map(|e| 10f64.powi(e)).collect()
}

pub fn kappa(t: usize, s: usize, n: usize, m: usize) -> f64 {
    (t as f64 / n as f64).max(s as f64 / m as f64)
}

/// Lower bound `min(ε₁, 1 - √(1 - ε₂))` for the breakdown point of
/// `T_L(F̂ₙ)` given the regression breakdown point `ε₁` and the uniform
/// breakdown point `ε₂` of the location functional.
pub fn fsbp_lower_bound(eps1: f64, eps2: f64) -> f64 {
    eps1.min(1.0 - (1.0 - eps2).sqrt())
}

/// Uniform asymptotic breakdown point: 0.5 for the median, `min(δ, 1-δ)`
/// for an MM location. The mean has none.
pub fn uniform_breakdown_point(spec: &LocationSpec) -> Result<f64> {
    match spec {
        LocationSpec::Mean => Err(Error::MeanHasNoUabp),
        LocationSpec::Median => Ok(0.5),
        LocationSpec::MMLocation { delta, .. } => Ok(delta.min(1.0 - delta)),
    }
}

/// Breakdown point `min(δ, 1 - δ - c)` of S/MM linear regression, where
/// `c` is the largest covariate mass on one affine hyperplane.
pub fn regression_breakdown_point(delta: f64, c: f64) -> f64 {
    delta.min(1.0 - delta - c).max(0.0)
}

/// Estimate of the largest fraction of complete-case covariate rows lying
/// on a common affine hyperplane, by fitting hyperplanes through random
/// `p`-subsets. A lower bound, not a certificate.
pub fn hyperplane_mass(sample: &CompleteCaseSample, probes: usize, seed: u64) -> f64 {
    let obs = sample.observed_indices();
    let m = obs.len();
    let p = sample.p();
    if m == 0 {
        return 0.0;
    }
    if m <= p {
        return 1.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0usize;
    for _ in 0..probes.max(1) {
        let idx = sample_indices(&mut rng, m, p).into_vec();
        // Rows (x, 1) padded with a zero row; the last right singular vector spans the null space.
        let mut a = DMatrix::<f64>::zeros(p + 1, p + 1);
        for (r, &k) in idx.iter().enumerate() {
            let x = sample.x_row(obs[k]);
            for c in 0..p {
                a[(r, c)] = x[c];
            }
            a[(r, p)] = 1.0;
        }
        let svd = a.svd(false, true);
        let Some(vt) = svd.v_t else { continue };
        let k = (0..=p)
            .min_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]))
            .unwrap();
        let gamma: Vec<f64> = vt.row(k).iter().copied().collect();
        let count = obs
            .iter()
            .filter(|&&i| {
                let x = sample.x_row(i);
                let v: f64 = x.iter().zip(&gamma).map(|(a, b)| a * b).sum::<f64>() + gamma[p];
                let size: f64 = 1.0 + x.iter().map(|a| a.abs()).sum::<f64>();
                v.abs() <= 1e-9 * size
            })
            .count();
        best = best.max(count);
    }
    best as f64 / m as f64
}

/// Settings of [`empirical_fsbp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownConfig {
    pub ladder: Vec<f64>,
    pub placements: Vec<Placement>,
    pub seeds: Vec<u64>,
    /// Escape threshold as a multiple of the clean `|μ̂|`.
    pub escape_factor: f64,
}

impl Default for BreakdownConfig {
    fn default() -> Self {
        BreakdownConfig {
            ladder: default_ladder(),
            placements: Placement::ALL.to_vec(),
            seeds: (0..10).collect(),
            escape_factor: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub t: usize,
    pub s: usize,
    pub kappa: f64,
    pub escaped: bool,
    /// Largest `|μ̂|` over seeds, placements and rungs (infinite when the estimator failed).
    pub worst_abs: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsbpReport {
    pub n: usize,
    pub m: usize,
    pub clean: f64,
    /// Escape threshold on `|μ̂|`.
    pub escape_bound: f64,
    /// Theoretical lower bound on the breakdown point, when known.
    pub lower_bound: Option<f64>,
    pub grid: Vec<GridOutcome>,
    /// Smallest `κ` on the grid at which the estimator escaped.
    pub first_escape: Option<f64>,
}

impl FsbpReport {
    /// CSV with columns `kappa,t,s,escaped,worst_abs,failures`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["kappa", "t", "s", "escaped", "worst_abs", "failures"]).map_err(io)?;
        for g in &self.grid {
            w.write_record([
                format!("{:.6}", g.kappa),
                g.t.to_string(),
                g.s.to_string(),
                g.escaped.to_string(),
                format!("{:e}", g.worst_abs),
                g.failures.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Replacement patterns `(t, s)` with `κ(t, s) ≤ max_kappa`: for each size
/// `s` of observed replacements, the largest admissible `t`, plus `(t, 0)`
/// with only unobserved rows changed.
pub fn pattern_grid(n: usize, m: usize, kappas: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for &k in kappas {
        let s = ((k * m as f64) + 1e-9).floor() as usize;
        let t = (((k * n as f64) + 1e-9).floor() as usize).max(s);
        if !out.contains(&(t, s)) {
            out.push((t, s));
        }
        let unobserved = n - m;
        let t0 = t.min(unobserved);
        if t0 > 0 && !out.contains(&(t0, 0)) {
            out.push((t0, 0));
        }
    }
    out
}

/// Unit leverage direction: axis-aligned for even seeds, Gaussian for odd.
fn direction(p: usize, seed: u64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if seed % 2 == 0 {
        let mut d = vec![0.0; p];
        d[(seed / 2) as usize % p] = 1.0;
        d
    } else {
        let v: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter().map(|a| a / norm).collect()
    }
}

/// Apply one replacement pattern at magnitude `magnitude`.
pub fn contaminate(
    base: &CompleteCaseSample,
    scheme_t: usize,
    scheme_s: usize,
    placement: Placement,
    magnitude: f64,
    seed: u64,
) -> CompleteCaseSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((scheme_t as u64) << 32) ^ ((scheme_s as u64) << 16));
    let obs = base.observed_indices().to_vec();
    let unobs: Vec<usize> = (0..base.n()).filter(|&i| base.response(i).is_none()).collect();
    let s = scheme_s.min(obs.len());
    let extra = scheme_t.saturating_sub(s).min(unobs.len());
    let d = direction(base.p(), seed, &mut rng);
    let far_x: Vec<f64> = d.iter().map(|v| v * magnitude).collect();
    let mut out = base.clone();
    for k in sample_indices(&mut rng, obs.len(), s).into_vec() {
        let i = obs[k];
        let (x, y) = match placement {
            Placement::LeverageX => (far_x.clone(), base.response(i).unwrap()),
            Placement::OutlierY => (base.x_row(i).to_vec(), magnitude),
            Placement::Both => (far_x.clone(), magnitude),
        };
        out.replace_row(i, &x, y);
    }
    for k in sample_indices(&mut rng, unobs.len(), extra).into_vec() {
        out.replace_row(unobs[k], &far_x, 0.0);
    }
    out
}

/// Probe every `(t, s)` pattern with every placement, seed and ladder rung.
///
/// `estimator` maps a sample to `μ̂`; errors and non-finite values count as
/// escapes. Patterns are evaluated in parallel and reported in grid order.
pub fn empirical_fsbp<F>(
    estimator: F,
    base: &CompleteCaseSample,
    patterns: &[(usize, usize)],
    config: &BreakdownConfig,
) -> Result<FsbpReport>
where
    F: Fn(&CompleteCaseSample) -> Result<f64> + Sync,
{
    let clean = estimator(base)?;
    let n = base.n();
    let m = base.m();
    let reference = if clean == 0.0 { 1.0 } else { clean.abs() };
    let bound = config.escape_factor * reference;
    let grid: Vec<GridOutcome> = patterns
        .par_iter()
        .map(|&(t, s)| {
            let mut worst: f64 = 0.0;
            let mut failures = 0;
            if t == 0 && s == 0 {
                worst = clean.abs();
            }
            for &seed in &config.seeds {
                for &placement in &config.placements {
                    if t == 0 && s == 0 {
                        continue;
                    }
                    for &mag in &config.ladder {
                        let sample = contaminate(base, t, s, placement, mag, seed);
                        match estimator(&sample) {
                            Ok(v) if v.is_finite() => worst = worst.max(v.abs()),
                            _ => {
                                failures += 1;
                                worst = f64::INFINITY;
                            }
                        }
                    }
                }
            }
            GridOutcome {
                t,
                s,
                kappa: kappa(t, s, n, m),
                escaped: worst > bound,
                worst_abs: worst,
                failures,
            }
        })
        .collect();
    let first_escape = grid
        .iter()
        .filter(|g| g.escaped)
        .map(|g| g.kappa)
        .min_by(f64::total_cmp);
    Ok(FsbpReport {
        n,
        m,
        clean,
        escape_bound: bound,
        lower_bound: None,
        grid,
        first_escape,
    })
}
