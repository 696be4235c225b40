//! Location functionals: mean, median and the MM location.
//!
//! Every functional is evaluated on anything implementing
//! [`EmpiricalDistribution`], so the same code runs on the convolution
//! estimator and on plain weighted samples.

use serde::{Deserialize, Serialize};

use crate::distribution::{EmpiricalDistribution, WeightedSample};
use crate::error::{Error, Result};
use crate::rho::{RhoKernel, K0_DEFAULT, K1_LOCATION_90, K1_LOCATION_95};
use crate::scale::{solve_scale_equation, ScaleOptions};

/// Quantile levels probed before the local S-location search.
const GRID_LEVELS: [f64; 11] = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum LocationSpec {
    Mean,
    Median,
    MMLocation {
        rho0: RhoKernel,
        rho1: RhoKernel,
        delta: f64,
    },
}

impl LocationSpec {
    pub fn mean() -> Self {
        LocationSpec::Mean
    }

    pub fn median() -> Self {
        LocationSpec::Median
    }

    pub fn mm90() -> Self {
        Self::mm(K0_DEFAULT, K1_LOCATION_90, 0.5).expect("valid preset")
    }

    pub fn mm95() -> Self {
        Self::mm(K0_DEFAULT, K1_LOCATION_95, 0.5).expect("valid preset")
    }

    /// Bisquare MM location with tuning constants `k0 ≤ k1`.
    pub fn mm(k0: f64, k1: f64, delta: f64) -> Result<Self> {
        if !(k0 > 0.0 && k1 > 0.0) {
            return Err(Error::InvalidArgument("tuning constants must be positive".into()));
        }
        let spec = LocationSpec::MMLocation {
            rho0: RhoKernel::tukey(k0),
            rho1: RhoKernel::tukey(k1),
            delta,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Preset by name: `mean`, `median`, `mm90`, `mm95`.
    pub fn from_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "mean" => Ok(Self::mean()),
            "median" => Ok(Self::median()),
            "mm90" => Ok(Self::mm90()),
            "mm95" => Ok(Self::mm95()),
            other => Err(Error::InvalidArgument(format!(
                "unknown functional `{other}` (expected mean, median, mm90 or mm95)"
            ))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            LocationSpec::Mean => "mean".into(),
            LocationSpec::Median => "median".into(),
            LocationSpec::MMLocation { rho0, rho1, delta } => {
                if rho0.k == K0_DEFAULT && *delta == 0.5 && rho1.k == K1_LOCATION_90 {
                    "mm90".into()
                } else if rho0.k == K0_DEFAULT && *delta == 0.5 && rho1.k == K1_LOCATION_95 {
                    "mm95".into()
                } else {
                    format!("mm(k0={}, k1={}, delta={})", rho0.k, rho1.k, delta)
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let LocationSpec::MMLocation { rho0, rho1, delta } = self {
            if !(*delta > 0.0 && *delta < 1.0) {
                return Err(Error::InvalidArgument(format!("delta must lie in (0,1), got {delta}")));
            }
            if !rho1.dominated_by(rho0) {
                return Err(Error::InvalidArgument(
                    "efficiency kernel must satisfy rho1 <= rho0 pointwise".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Value of a location functional plus diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationEstimate {
    pub functional: String,
    pub value: f64,
    /// Set when the location scale is zero: at least `1 - δ` of the mass
    /// sits on the returned point.
    pub degenerate: bool,
    /// S-location `μ₀₀` (MM only).
    pub s_location: Option<f64>,
    /// Location scale `σᴸ` (MM only).
    pub scale: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `E ρ₁((y-μ)/σᴸ)` after every step that lowered it (MM only).
    pub objective_trace: Vec<f64>,
}

impl LocationEstimate {
    fn plain(spec: &LocationSpec, value: f64) -> Self {
        LocationEstimate {
            functional: spec.name(),
            value,
            degenerate: false,
            s_location: None,
            scale: None,
            iterations: 0,
            converged: true,
            objective_trace: Vec::new(),
        }
    }
}

/// First stage of the MM location: `μ₀₀` minimizing the M-scale, and that scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SLocation {
    pub mu: f64,
    pub sigma: f64,
    pub delta: f64,
    pub rho0: RhoKernel,
    pub degenerate: bool,
}

/// Evaluate a location functional on a distribution.
pub fn evaluate<D: EmpiricalDistribution>(spec: &LocationSpec, dist: &D) -> Result<LocationEstimate> {
    spec.validate()?;
    match *spec {
        LocationSpec::Mean => Ok(LocationEstimate::plain(spec, dist.mean())),
        LocationSpec::Median => Ok(LocationEstimate::plain(spec, dist.median())),
        LocationSpec::MMLocation { rho0, rho1, delta } => {
            let s = s_location(dist, &rho0, delta)?;
            let mut est = mm_location_from(dist, &s, &rho1)?;
            est.functional = spec.name();
            Ok(est)
        }
    }
}

/// [`evaluate`] on a finite weighted sample.
pub fn mm_location_on_sample(spec: &LocationSpec, sample: &WeightedSample) -> Result<LocationEstimate> {
    evaluate(spec, sample)
}

struct ScaleProfile<'a, D> {
    dist: &'a D,
    rho0: RhoKernel,
    opts: ScaleOptions,
    last: f64,
}

impl<D: EmpiricalDistribution> ScaleProfile<'_, D> {
    /// `S*(μ)`: the M-scale of `y - μ`, zero when `μ` carries mass `≥ 1 - δ`.
    ///
    /// Damped Newton on `ln s` from the previous scale; falls back to the
    /// bracketing solver if Newton does not settle.
    fn at(&mut self, mu: f64) -> Result<f64> {
        if self.dist.mass_at(mu) >= 1.0 - self.opts.delta {
            return Ok(0.0);
        }
        let rho0 = self.rho0;
        let dist = self.dist;
        let delta = self.opts.delta;
        let mut s = self.last;
        for _ in 0..20 {
            let inv = 1.0 / s;
            let (f, g) = dist.expectation_pair(|y| {
                let t = (y - mu) * inv;
                (rho0.rho(t), rho0.psi(t) * t)
            });
            let f = f - delta;
            if f == 0.0 {
                self.last = s;
                return Ok(s);
            }
            if !(g > 0.0) {
                break;
            }
            let step = (f / g).clamp(-0.5, 0.5);
            s *= step.exp();
            if step.abs() <= 1e-12 {
                self.last = s;
                return Ok(s);
            }
        }
        let sol = solve_scale_equation(
            |s| dist.expectation(|y| rho0.rho((y - mu) / s)),
            (0.8 * self.last, 1.25 * self.last),
            self.opts,
        )?;
        self.last = sol.scale;
        Ok(sol.scale)
    }
}

/// S-location of `dist`: grid over quantiles, then Brent's method around
/// the best grid point.
pub fn s_location<D: EmpiricalDistribution>(dist: &D, rho0: &RhoKernel, delta: f64) -> Result<SLocation> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0,1), got {delta}")));
    }
    let median = dist.quantile(0.5);
    let degenerate = SLocation {
        mu: median,
        sigma: 0.0,
        delta,
        rho0: *rho0,
        degenerate: true,
    };
    if dist.mass_at(median) >= 1.0 - delta {
        return Ok(degenerate);
    }
    let grid: Vec<f64> = GRID_LEVELS.iter().map(|&p| dist.quantile(p)).collect();
    let (lo_q, hi_q) = (dist.quantile(0.25), dist.quantile(0.75));
    let spread = [hi_q - lo_q, grid[10] - grid[0], dist.quantile(1.0) - dist.quantile(f64::MIN_POSITIVE)]
        .into_iter()
        .find(|v| *v > 0.0)
        .unwrap_or(1.0);
    let mut profile = ScaleProfile {
        dist,
        rho0: *rho0,
        opts: ScaleOptions::new(delta),
        last: spread / 1.349,
    };

    let mut values = Vec::with_capacity(grid.len());
    for &mu in &grid {
        values.push(profile.at(mu)?);
    }
    let best = (0..grid.len())
        .min_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)))
        .unwrap();
    if values[best] == 0.0 {
        return Ok(SLocation { mu: grid[best], ..degenerate });
    }
    profile.last = values[best];
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(grid.len() - 1)];
    let tol = 1e-9 * (grid[10] - grid[0]).max(f64::MIN_POSITIVE);
    let (mu, sigma) = if b > a {
        brent_minimize(|mu| profile.at(mu), a, b, grid[best], values[best], tol)?
    } else {
        (grid[best], values[best])
    };
    let (mu, sigma) = if sigma <= values[best] { (mu, sigma) } else { (grid[best], values[best]) };
    if sigma == 0.0 {
        return Ok(SLocation { mu, ..degenerate });
    }
    Ok(SLocation {
        mu,
        sigma,
        delta,
        rho0: *rho0,
        degenerate: false,
    })
}

/// Brent's minimizer on `[a, b]` started from `x` with `f(x) = fx`.
fn brent_minimize<F>(mut f: F, mut a: f64, mut b: f64, x0: f64, f0: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    const GOLD: f64 = 0.381_966_011_250_105_1;
    let (mut x, mut w, mut v) = (x0, x0, x0);
    let (mut fx, mut fw, mut fv) = (f0, f0, f0);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let tol1 = tol + 1e-12 * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_old = e;
            e = d;
            if p.abs() < (0.5 * q * e_old).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if mid >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= mid { a - x } else { b - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u)?;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok((x, fx))
}

/// Second stage: minimize `E ρ₁((y-μ)/σᴸ)` by weighted-mean IRWLS from `μ₀₀`.
pub fn mm_location_from<D: EmpiricalDistribution>(
    dist: &D,
    s: &SLocation,
    rho1: &RhoKernel,
) -> Result<LocationEstimate> {
    let mut est = LocationEstimate {
        functional: String::from("mm"),
        value: s.mu,
        degenerate: s.degenerate,
        s_location: Some(s.mu),
        scale: Some(s.sigma),
        iterations: 0,
        converged: true,
        objective_trace: Vec::new(),
    };
    if s.degenerate {
        return Ok(est);
    }
    let sigma = s.sigma;
    let objective = |mu: f64| dist.expectation(|y| rho1.rho((y - mu) / sigma));
    let mut mu = s.mu;
    let mut current = objective(mu);
    est.objective_trace.push(current);
    est.converged = false;
    let tol = 1e-12 * sigma;
    while est.iterations < 500 {
        est.iterations += 1;
        let (sw, swy) = dist.weighted_moments(|y| rho1.weight((y - mu) / sigma));
        if !(sw > 0.0) {
            break;
        }
        let target = swy / sw;
        let mut step = target - mu;
        let mut accepted = None;
        for _ in 0..40 {
            let trial = mu + step;
            let value = objective(trial);
            if value <= current + 1e-13 * current {
                accepted = Some((trial, value));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, value)) = accepted else {
            est.converged = true;
            break;
        };
        let change = (trial - mu).abs();
        mu = trial;
        if value < current {
            current = value;
            est.objective_trace.push(value);
        }
        if change <= tol {
            est.converged = true;
            break;
        }
    }
    est.value = mu;
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::ConvolvedDistribution;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn all_specs() -> [LocationSpec; 4] {
        [LocationSpec::mean(), LocationSpec::median(), LocationSpec::mm90(), LocationSpec::mm95()]
    }

    #[test]
    fn median_of_three() {
        let s = WeightedSample::from_values(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(evaluate(&LocationSpec::median(), &s).unwrap().value, 2.0);
    }

    #[test]
    fn symmetric_mm_is_center() {
        let s = WeightedSample::from_values(&[-1.0, 0.0, 1.0]).unwrap();
        let est = evaluate(&LocationSpec::mm90(), &s).unwrap();
        assert!(est.value.abs() < 1e-12, "{est:?}");
    }

    #[test]
    fn point_mass_is_degenerate() {
        let s = WeightedSample::from_values(&[5.0; 4]).unwrap();
        let est = evaluate(&LocationSpec::mm90(), &s).unwrap();
        assert_eq!(est.value, 5.0);
        assert!(est.degenerate);
        let s = WeightedSample::from_values(&[5.0, 5.0, 5.0, 1.0, 9.0]).unwrap();
        let est = evaluate(&LocationSpec::mm95(), &s).unwrap();
        assert_eq!(est.value, 5.0);
        assert!(est.degenerate);
    }

    #[test]
    fn gaussian_sample_centered() {
        let s = WeightedSample::from_values(&normals(2000, 1)).unwrap();
        for spec in all_specs() {
            let est = evaluate(&spec, &s).unwrap();
            assert!(est.value.abs() < 0.08, "{spec:?}: {}", est.value);
        }
    }

    #[test]
    fn resists_forty_percent_outliers() {
        let mut v = normals(500, 2);
        for x in v.iter_mut().take(200) {
            *x = 1e6;
        }
        let s = WeightedSample::from_values(&v).unwrap();
        for spec in [LocationSpec::median(), LocationSpec::mm90(), LocationSpec::mm95()] {
            let est = evaluate(&spec, &s).unwrap();
            assert!(est.value.abs() <= 3.0, "{spec:?}: {}", est.value);
        }
    }

    #[test]
    fn equivariance() {
        let d = ConvolvedDistribution::new(normals(40, 3), normals(25, 4)).unwrap();
        let (a, b) = (3.7, -12.25);
        let moved = ConvolvedDistribution::new(
            d.predictions().iter().map(|p| a * p + b).collect(),
            d.residuals().iter().map(|u| a * u).collect(),
        )
        .unwrap();
        for spec in all_specs() {
            let x = evaluate(&spec, &d).unwrap().value;
            let y = evaluate(&spec, &moved).unwrap().value;
            assert!((y - (a * x + b)).abs() <= 1e-8 * (1.0 + y.abs()), "{spec:?}: {x} {y}");
        }
    }

    #[test]
    fn median_minimizes_absolute_deviation() {
        let d = ConvolvedDistribution::new(normals(30, 5), normals(20, 6)).unwrap();
        let med = evaluate(&LocationSpec::median(), &d).unwrap().value;
        let support = d.materialize().unwrap();
        let mad = |mu: f64| d.expectation(|y| (y - mu).abs());
        let best = support.iter().map(|&t| mad(t)).fold(f64::INFINITY, f64::min);
        assert!(mad(med) <= best + 1e-12);
    }

    #[test]
    fn mm_descent_and_s_stage() {
        let mut v = normals(300, 7);
        v.iter_mut().take(30).for_each(|x| *x += 15.0);
        let s = WeightedSample::from_values(&v).unwrap();
        let est = evaluate(&LocationSpec::mm90(), &s).unwrap();
        assert!(est.converged);
        for w in est.objective_trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
        let sl = s_location(&s, &RhoKernel::tukey(1.57), 0.5).unwrap();
        let mean_rho = s.expectation(|y| RhoKernel::tukey(1.57).rho((y - sl.mu) / sl.sigma));
        assert!((mean_rho - 0.5).abs() < 1e-9);
        // Local optimality of the S-location.
        let mut probe = ScaleProfile {
            dist: &s,
            rho0: RhoKernel::tukey(1.57),
            opts: ScaleOptions::new(0.5),
            last: sl.sigma,
        };
        for h in [-0.01, 0.01] {
            assert!(probe.at(sl.mu + h).unwrap() >= sl.sigma - 1e-12);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(LocationSpec::mm(4.0, 3.0, 0.5).is_err());
        assert!(LocationSpec::mm(1.5, 3.0, 1.0).is_err());
        assert_eq!(LocationSpec::from_name("MM95").unwrap(), LocationSpec::mm95());
        assert_eq!(LocationSpec::mm90().name(), "mm90");
        assert!(LocationSpec::from_name("trimmed").is_err());
    }
}
