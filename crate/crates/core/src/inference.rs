//! Plug-in asymptotic variance of `μ̂ = T_L(F̂ₙ)`.
//!
//! The variance combines three influence pieces evaluated at the fitted
//! empiricals: the location influence `I_L` averaged over the predictions
//! (`ê`) and over the residuals (`f̂`), and the regression influence `I_R`
//! propagated through `ĉ`. The median has no smooth `I_L`; its `ĉ` uses
//! kernel density estimates instead.

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::distribution::{ConvolvedDistribution, EmpiricalDistribution};
use crate::error::{Error, Result};
use crate::location::{LocationEstimate, LocationSpec};
use crate::regression::{CompleteCaseSample, FitMethod, RegressionFit, RegressionModel};
use crate::rho::RhoKernel;

/// Smallest magnitude accepted for `a₀ᵢ`, `d₀` and their location analogues.
pub const CONSTANT_FLOOR: f64 = 1e-8;
/// Pair budget for the `O(nm)` double sums before they are subsampled.
pub const DEFAULT_MAX_PAIRS: usize = 1_000_000;

/// Constants of the regression influence function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionIfConstants {
    pub method: FitMethod,
    pub sigma0: f64,
    /// Center of the final fit.
    pub alpha01: f64,
    /// Center of the initial S fit.
    pub alpha00: f64,
    pub a00: f64,
    pub a01: f64,
    pub e00: f64,
    pub e01: f64,
    pub d0: f64,
    pub b0: Vec<f64>,
    /// Covariance of `ġ` over the complete cases, row-major `q × q`.
    pub a0: Vec<f64>,
    pub a0_inv: Vec<f64>,
    pub rho1: Option<RhoKernel>,
}

/// Constants of the MM location influence function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationIfConstants {
    pub sigma: f64,
    pub mu00: f64,
    pub mu01: f64,
    pub a00: f64,
    pub a01: f64,
    pub e00: f64,
    pub e01: f64,
    pub d0: f64,
    pub delta: f64,
    pub rho0: RhoKernel,
    pub rho1: RhoKernel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IFConstants {
    pub regression: RegressionIfConstants,
    pub location: Option<LocationIfConstants>,
}

fn check_constant(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value.abs() >= CONSTANT_FLOOR {
        Ok(())
    } else {
        Err(Error::DegenerateConstant { name, value })
    }
}

fn gradients<M: RegressionModel + ?Sized>(model: &M, sample: &CompleteCaseSample, beta: &[f64], rows: &[usize]) -> Vec<f64> {
    let q = model.n_params();
    let mut out = vec![0.0; rows.len() * q];
    for (k, &i) in rows.iter().enumerate() {
        model.gradient(sample.x_row(i), beta, &mut out[k * q..(k + 1) * q]);
    }
    out
}

impl RegressionIfConstants {
    /// Empirical constants over the complete cases. `kernels` are `(ρ₀, ρ₁)`
    /// for S/MM fits and ignored for least squares.
    pub fn estimate<M: RegressionModel + ?Sized>(
        fit: &RegressionFit,
        sample: &CompleteCaseSample,
        model: &M,
        kernels: (RhoKernel, RhoKernel),
    ) -> Result<Self> {
        let obs = sample.observed_indices();
        if obs.is_empty() {
            return Err(Error::EmptyObservedSet);
        }
        let q = model.n_params();
        let m = obs.len() as f64;
        let g = gradients(model, sample, &fit.beta_hat, obs);
        let mut b0 = vec![0.0; q];
        for row in g.chunks(q) {
            for (b, v) in b0.iter_mut().zip(row) {
                *b += v / m;
            }
        }
        let mut a0 = vec![0.0; q * q];
        for row in g.chunks(q) {
            for r in 0..q {
                for c in 0..q {
                    a0[r * q + c] += (row[r] - b0[r]) * (row[c] - b0[c]) / m;
                }
            }
        }
        let second: f64 = g.iter().map(|v| v * v).sum::<f64>() / m;
        let a0_inv = invert_spd(&a0, q, second)?;

        let residuals: Vec<f64> = obs
            .iter()
            .map(|&i| sample.response(i).unwrap() - model.value(sample.x_row(i), &fit.beta_hat))
            .collect();
        if fit.method == FitMethod::LeastSquares {
            return Ok(RegressionIfConstants {
                method: fit.method,
                sigma0: fit.sigma_hat,
                alpha01: fit.alpha_hat,
                alpha00: fit.alpha_hat,
                a00: 1.0,
                a01: 1.0,
                e00: 1.0,
                e01: 1.0,
                d0: 1.0,
                b0,
                a0,
                a0_inv,
                rho1: None,
            });
        }
        let (rho0, rho1) = kernels;
        let sigma0 = fit.sigma_hat;
        if !(sigma0 > 0.0) {
            return Err(Error::DegenerateConstant { name: "sigma0", value: sigma0 });
        }
        let mean = |f: &dyn Fn(f64) -> f64| residuals.iter().map(|&u| f(u)).sum::<f64>() / m;
        let t0 = |u: f64| (u - fit.alpha_s) / sigma0;
        let t1 = |u: f64| (u - fit.alpha_hat) / sigma0;
        let c = RegressionIfConstants {
            method: fit.method,
            sigma0,
            alpha01: fit.alpha_hat,
            alpha00: fit.alpha_s,
            a00: mean(&|u| rho0.psi_prime(t0(u))),
            a01: mean(&|u| rho1.psi_prime(t1(u))),
            e00: mean(&|u| rho0.psi_prime(t0(u)) * t0(u)),
            e01: mean(&|u| rho1.psi_prime(t1(u)) * t1(u)),
            d0: mean(&|u| rho0.psi(t0(u)) * t0(u)),
            b0,
            a0,
            a0_inv,
            rho1: Some(rho1),
        };
        check_constant("a00", c.a00)?;
        check_constant("a01", c.a01)?;
        check_constant("d0", c.d0)?;
        Ok(c)
    }

    /// Influence function of the regression functional at `(x, y)`; divide
    /// by `η` to get `I_R`.
    pub fn influence<M: RegressionModel + ?Sized>(&self, model: &M, beta: &[f64], x: &[f64], y: f64) -> Vec<f64> {
        let q = self.b0.len();
        let mut g = vec![0.0; q];
        model.gradient(x, beta, &mut g);
        let r = y - model.value(x, beta) - self.alpha01;
        let factor = match self.rho1 {
            Some(rho1) => self.sigma0 / self.a01 * rho1.psi(r / self.sigma0),
            None => r,
        };
        (0..q)
            .map(|a| {
                factor * (0..q).map(|b| self.a0_inv[a * q + b] * (g[b] - self.b0[b])).sum::<f64>()
            })
            .collect()
    }
}

/// Inverse of a symmetric positive definite matrix. Fails with
/// `DegenerateConstant` when the smallest eigenvalue is negligible against
/// `scale` (the uncentered second moment of `ġ`) or the largest eigenvalue.
fn invert_spd(a: &[f64], q: usize, scale: f64) -> Result<Vec<f64>> {
    let mat = DMatrix::from_row_slice(q, q, a);
    let eig = mat.clone().symmetric_eigenvalues();
    let (min, max) = (eig.min(), eig.max());
    if !(max > 0.0) || min <= 1e-10 * max.max(scale) {
        return Err(Error::DegenerateConstant { name: "A0", value: min });
    }
    let chol = mat.cholesky().ok_or(Error::SingularA0)?;
    let inv = chol.inverse();
    Ok((0..q).flat_map(|r| (0..q).map(move |c| (r, c))).map(|(r, c)| inv[(r, c)]).collect())
}

impl LocationIfConstants {
    /// Constants under `dist` for an MM location estimate.
    pub fn estimate<D: EmpiricalDistribution>(dist: &D, spec: &LocationSpec, est: &LocationEstimate) -> Result<Self> {
        let LocationSpec::MMLocation { rho0, rho1, delta } = *spec else {
            return Err(Error::InvalidArgument("location constants need an MM functional".into()));
        };
        let sigma = est.scale.unwrap_or(0.0);
        if est.degenerate || !(sigma > 0.0) {
            return Err(Error::DegenerateConstant { name: "sigma0L", value: sigma });
        }
        let mu00 = est.s_location.unwrap_or(est.value);
        let mu01 = est.value;
        let (a01, e01) = dist.expectation_pair(|y| {
            let t = (y - mu01) / sigma;
            let d = rho1.psi_prime(t);
            (d, d * t)
        });
        let (a00, e00) = dist.expectation_pair(|y| {
            let t = (y - mu00) / sigma;
            let d = rho0.psi_prime(t);
            (d, d * t)
        });
        let d0 = dist.expectation(|y| {
            let t = (y - mu00) / sigma;
            rho0.psi(t) * t
        });
        check_constant("a00L", a00)?;
        check_constant("a01L", a01)?;
        check_constant("d0L", d0)?;
        Ok(LocationIfConstants {
            sigma,
            mu00,
            mu01,
            a00,
            a01,
            e00,
            e01,
            d0,
            delta,
            rho0,
            rho1,
        })
    }

    /// Influence function of the MM location functional.
    #[inline]
    pub fn influence(&self, y: f64) -> f64 {
        let s = self.sigma;
        s / self.a01 * self.rho1.psi((y - self.mu01) / s)
            - self.e01 * s / (self.a01 * self.d0) * (self.rho0.rho((y - self.mu00) / s) - self.delta)
    }

    /// Derivative of [`influence`](Self::influence) in `y`.
    #[inline]
    pub fn influence_derivative(&self, y: f64) -> f64 {
        let s = self.sigma;
        self.rho1.psi_prime((y - self.mu01) / s) / self.a01
            - self.e01 / (self.a01 * self.d0) * self.rho0.psi((y - self.mu00) / s)
    }
}

/// Influence function of the median, `sign(y - μ₀) / (2 f₀(μ₀))`.
pub fn median_if(f0_at_mu: f64, mu0: f64, y: f64) -> Result<f64> {
    if !(f0_at_mu > 0.0 && f0_at_mu.is_finite()) {
        return Err(Error::ZeroDensity(f0_at_mu));
    }
    let s = if y > mu0 {
        1.0
    } else if y < mu0 {
        -1.0
    } else {
        0.0
    };
    Ok(s / (2.0 * f0_at_mu))
}

/// Gaussian kernel density estimate with Silverman's bandwidth
/// `0.9 · min(sd, IQR/1.34) · N^(-1/5)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKde {
    points: Vec<f64>,
    pub bandwidth: f64,
}

impl GaussianKde {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument("density estimate needs at least two points".into()));
        }
        let n = points.len() as f64;
        let mean = points.iter().sum::<f64>() / n;
        let sd = (points.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let mut sorted = points.clone();
        sorted.sort_by(f64::total_cmp);
        let q = |p: f64| sorted[((p * (n - 1.0)).round() as usize).min(sorted.len() - 1)];
        let iqr = q(0.75) - q(0.25);
        let bandwidth = silverman(sd, iqr, n);
        if !(bandwidth > 0.0) {
            return Err(Error::ZeroDensity(0.0));
        }
        Ok(GaussianKde { points, bandwidth })
    }

    pub fn density(&self, t: f64) -> f64 {
        let h = self.bandwidth;
        let sum: f64 = self.points.iter().map(|p| gauss((t - p) / h)).sum();
        sum / (self.points.len() as f64 * h)
    }
}

fn silverman(sd: f64, iqr: f64, n: f64) -> f64 {
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

#[inline]
fn gauss(z: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Density of `F̂ₙ` at `t`: exact over all `nm` sums up to `max_pairs`,
/// otherwise over a seeded subsample of `10⁵` sums.
pub fn convolution_density(dist: &ConvolvedDistribution, t: f64, max_pairs: usize, seed: u64) -> Result<(f64, f64)> {
    if dist.len() <= max_pairs as u64 {
        let mean = dist.mean();
        let var = dist.expectation(|y| (y - mean) * (y - mean)) * dist.len() as f64 / (dist.len() as f64 - 1.0).max(1.0);
        let iqr = dist.quantile(0.75) - dist.quantile(0.25);
        let h = silverman(var.sqrt(), iqr, dist.len() as f64);
        if !(h > 0.0) {
            return Err(Error::ZeroDensity(0.0));
        }
        let f = dist.expectation(|y| gauss((t - y) / h)) / h;
        Ok((f, h))
    } else {
        let kde = GaussianKde::new(dist.sample_points(100_000, seed))?;
        Ok((kde.density(t), kde.bandwidth))
    }
}

/// Settings of the variance plug-in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceOptions {
    /// `(ρ₀, ρ₁)` of the regression fit.
    pub regression_kernels: (RhoKernel, RhoKernel),
    pub max_pairs: usize,
    pub seed: u64,
    pub level: f64,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        InferenceOptions {
            regression_kernels: (
                RhoKernel::tukey(crate::rho::K0_DEFAULT),
                RhoKernel::tukey(crate::rho::K1_REGRESSION),
            ),
            max_pairs: DEFAULT_MAX_PAIRS,
            seed: 0x1f,
            level: 0.95,
        }
    }
}

/// `(1/η²)` times the mean square of each summand of `τ̂²` taken alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    pub e: f64,
    pub f: f64,
    pub regression: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub tau_sq: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub level: f64,
    pub eta_hat: f64,
    pub c_hat: Vec<f64>,
    pub components: VarianceComponents,
    /// `f̂₀(μ̂)` and its bandwidth (median only).
    pub density_at_mu: Option<f64>,
    pub bandwidth: Option<f64>,
    pub subsampled_pairs: bool,
    pub warnings: Vec<String>,
}

/// Influence of the location functional as used by the double sums.
enum LocationInfluence {
    Mean { mu: f64 },
    MM(LocationIfConstants),
    Median { mu: f64, f0: f64 },
}

impl LocationInfluence {
    #[inline]
    fn value(&self, y: f64) -> f64 {
        match self {
            LocationInfluence::Mean { mu } => y - mu,
            LocationInfluence::MM(c) => c.influence(y),
            LocationInfluence::Median { mu, f0 } => median_if(*f0, *mu, y).unwrap_or(0.0),
        }
    }

    #[inline]
    fn derivative(&self, y: f64) -> f64 {
        match self {
            LocationInfluence::Mean { .. } => 1.0,
            LocationInfluence::MM(c) => c.influence_derivative(y),
            LocationInfluence::Median { .. } => 0.0,
        }
    }
}

/// Plug-in `τ̂²`, standard error `τ̂/√n` and a normal confidence interval.
pub fn estimate_tau_sq<M: RegressionModel + ?Sized>(
    spec: &LocationSpec,
    estimate: &LocationEstimate,
    fit: &RegressionFit,
    sample: &CompleteCaseSample,
    model: &M,
    dist: &ConvolvedDistribution,
    options: &InferenceOptions,
) -> Result<VarianceEstimate> {
    let n = sample.n();
    let obs = sample.observed_indices().to_vec();
    let m = obs.len();
    if m == 0 {
        return Err(Error::EmptyObservedSet);
    }
    let q = model.n_params();
    let nf = n as f64;
    let eta = m as f64 / nf;
    let beta = &fit.beta_hat;
    let mut warnings = Vec::new();

    let reg = RegressionIfConstants::estimate(fit, sample, model, options.regression_kernels)?;
    let all: Vec<usize> = (0..n).collect();
    let preds: Vec<f64> = all.iter().map(|&j| model.value(sample.x_row(j), beta)).collect();
    let grads = gradients(model, sample, beta, &all);
    let resid: Vec<f64> = obs
        .iter()
        .map(|&i| sample.response(i).unwrap() - preds[i])
        .collect();

    let mut density_at_mu = None;
    let mut bandwidth = None;
    let influence = match *spec {
        LocationSpec::Mean => LocationInfluence::Mean { mu: estimate.value },
        LocationSpec::MMLocation { .. } => LocationInfluence::MM(LocationIfConstants::estimate(dist, spec, estimate)?),
        LocationSpec::Median => {
            let (f0, h) = convolution_density(dist, estimate.value, options.max_pairs, options.seed)?;
            if !(f0 > 0.0) {
                return Err(Error::ZeroDensity(f0));
            }
            density_at_mu = Some(f0);
            bandwidth = Some(h);
            LocationInfluence::Median { mu: estimate.value, f0 }
        }
    };

    // Column subset for sums over predictions, residual subset for sums over residuals.
    let subsampled = (n as u64) * (m as u64) > options.max_pairs as u64;
    if subsampled {
        warnings.push(format!(
            "pair sums subsampled to about {} of {} pairs",
            options.max_pairs,
            n * m
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let cols: Vec<usize> = if subsampled {
        let k = (options.max_pairs / m).clamp(1, n);
        let mut v = sample_indices(&mut rng, n, k).into_vec();
        v.sort_unstable();
        v
    } else {
        all.clone()
    };
    let rows: Vec<usize> = if subsampled {
        let k = (options.max_pairs / n).clamp(1, m);
        let mut v = sample_indices(&mut rng, m, k).into_vec();
        v.sort_unstable();
        v
    } else {
        (0..m).collect()
    };

    // ê over observed rows (indexed like `obs`).
    let ncols = cols.len() as f64;
    let e_obs: Vec<f64> = resid
        .iter()
        .map(|&u| cols.iter().map(|&j| influence.value(u + preds[j])).sum::<f64>() / ncols)
        .collect();
    // f̂ over all rows.
    let nrows = rows.len() as f64;
    let f_all: Vec<f64> = preds
        .iter()
        .map(|&p| eta * rows.iter().map(|&i| influence.value(resid[i] + p)).sum::<f64>() / nrows)
        .collect();

    let c_hat: Vec<f64> = match influence {
        LocationInfluence::Median { mu, f0 } => {
            let kde = GaussianKde::new(resid.clone())?;
            let kvals: Vec<f64> = cols.iter().map(|&j| kde.density(mu - preds[j])).collect();
            let ksum: f64 = kvals.iter().sum::<f64>() / ncols;
            let mut kg = vec![0.0; q];
            for (kv, &j) in kvals.iter().zip(&cols) {
                for a in 0..q {
                    kg[a] += kv * grads[j * q + a] / ncols;
                }
            }
            let mut gobs = vec![0.0; q];
            for &i in &obs {
                for a in 0..q {
                    gobs[a] += grads[i * q + a] / m as f64;
                }
            }
            // (1/n²) Σᵢ Σⱼ aᵢ k̂₀(μ̂ - pⱼ)(ġⱼ - ġᵢ) = η (kg - ksum · ġ̄_obs)
            let c_star: Vec<f64> = (0..q).map(|a| eta * (kg[a] - ksum * gobs[a]) / (eta * f0)).collect();
            c_star.iter().map(|c| eta * c).collect()
        }
        _ => {
            let mut acc = vec![0.0; q];
            for (k, &i) in obs.iter().enumerate() {
                let u = resid[k];
                let mut dsum = 0.0;
                let mut dg = vec![0.0; q];
                for &j in &cols {
                    let d = influence.derivative(u + preds[j]);
                    dsum += d;
                    for a in 0..q {
                        dg[a] += d * grads[j * q + a];
                    }
                }
                for a in 0..q {
                    acc[a] += (dg[a] - dsum * grads[i * q + a]) / ncols;
                }
            }
            acc.iter().map(|v| v / nf).collect()
        }
    };

    // τ̂² = (1/η²) mean_k (ê_k + f̂_k + a_k ĉ'Î_R,k)²
    let mut total = 0.0;
    let (mut se_e, mut se_f, mut se_r) = (0.0, 0.0, 0.0);
    let mut obs_pos = vec![usize::MAX; n];
    for (k, &i) in obs.iter().enumerate() {
        obs_pos[i] = k;
    }
    for k in 0..n {
        let (e, r) = if obs_pos[k] != usize::MAX {
            let ir = reg.influence(model, beta, sample.x_row(k), sample.response(k).unwrap());
            let r: f64 = c_hat.iter().zip(&ir).map(|(c, v)| c * v / eta).sum();
            (e_obs[obs_pos[k]], r)
        } else {
            (0.0, 0.0)
        };
        let f = f_all[k];
        total += (e + f + r).powi(2);
        se_e += e * e;
        se_f += f * f;
        se_r += r * r;
    }
    let scale = 1.0 / (eta * eta * nf);
    let tau_sq = total * scale;
    let se = (tau_sq / nf).sqrt();
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(0.5 + options.level / 2.0);
    Ok(VarianceEstimate {
        tau_sq,
        se,
        ci_lower: estimate.value - z * se,
        ci_upper: estimate.value + z * se,
        level: options.level,
        eta_hat: eta,
        c_hat,
        components: VarianceComponents {
            e: se_e * scale,
            f: se_f * scale,
            regression: se_r * scale,
        },
        density_at_mu,
        bandwidth,
        subsampled_pairs: subsampled,
        warnings,
    })
}

#[cfg(test)]
mod tests;
