//! Complete-case regression: least squares, S and MM fits.
//!
//! All fits estimate `ξ = (β, α)` where `α` is the center of the error
//! distribution. The residuals handed downstream are `yᵢ - g(xᵢ, β̂)`,
//! without subtracting `α̂`.

mod model;
mod sample;

pub use model::{gradient_discrepancy, LinearModel, ModelKind, RegressionModel};
pub use sample::CompleteCaseSample;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::rho::RhoKernel;
use crate::scale::{solve_m_scale, ScaleProblem};

/// Subsampling and iteration settings of the S/MM search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Random elemental subsets drawn as starting candidates.
    pub subsets: usize,
    /// Candidates kept (lowest S-scale) for refinement.
    pub keep: usize,
    /// Refinement steps applied to each kept candidate.
    pub refine_steps: usize,
    /// Iteration cap for the final S refinement and for the MM descent.
    pub max_iterations: usize,
    /// Stop when no fitted value moves by more than `tolerance · σ̂`.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            subsets: 500,
            keep: 10,
            refine_steps: 50,
            max_iterations: 1000,
            tolerance: 1e-12,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitMethod {
    LeastSquares,
    S,
    MM,
}

/// Outcome of a complete-case regression fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub method: FitMethod,
    pub beta_hat: Vec<f64>,
    /// Error center of the final fit.
    pub alpha_hat: f64,
    /// Error center of the initial S fit (equal to `alpha_hat` for S and LS fits).
    pub alpha_s: f64,
    /// S-scale of the complete-case residuals (residual standard deviation for LS).
    pub sigma_hat: f64,
    /// `yᵢ - g(xᵢ, β̂)` over the observed rows, in `observed_indices` order.
    pub residuals_observed: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub exact_fit: bool,
    /// Objective value after every iteration of the last stage that lowered it.
    pub objective_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Starting value `(β, α)` for the S search.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub beta: Vec<f64>,
    pub alpha: f64,
}

/// Observed rows gathered contiguously.
struct Working<'a, M: RegressionModel + ?Sized> {
    model: &'a M,
    p: usize,
    q: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    snap: f64,
}

impl<'a, M: RegressionModel + ?Sized> Working<'a, M> {
    fn new(sample: &CompleteCaseSample, model: &'a M) -> Result<Self> {
        let q = model.n_params();
        let m = sample.m();
        if m == 0 {
            return Err(Error::EmptyObservedSet);
        }
        if m <= q {
            return Err(Error::Underdetermined {
                observed: m,
                params: q,
            });
        }
        let p = sample.p();
        let mut x = Vec::with_capacity(m * p);
        for &i in sample.observed_indices() {
            x.extend_from_slice(sample.x_row(i));
        }
        let y = sample.observed_responses();
        let ymax = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        Ok(Working {
            model,
            p,
            q,
            x,
            y,
            snap: 1e-11 * ymax,
        })
    }

    fn m(&self) -> usize {
        self.y.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    /// `yᵢ - g(xᵢ, β) - α`, with values below the round-off floor set to 0.
    fn residuals(&self, beta: &[f64], alpha: f64, out: &mut Vec<f64>) {
        out.clear();
        for i in 0..self.m() {
            let r = self.y[i] - self.model.value(self.row(i), beta) - alpha;
            out.push(if r.abs() <= self.snap { 0.0 } else { r });
        }
    }

    /// Rows `[∂g/∂β (xᵢ, β), 1]`.
    fn design(&self, beta: &[f64], out: &mut Vec<f64>) {
        let cols = self.q + 1;
        out.clear();
        out.resize(self.m() * cols, 1.0);
        for i in 0..self.m() {
            self.model
                .gradient(self.row(i), beta, &mut out[i * cols..i * cols + self.q]);
        }
    }

    fn candidates(&self, count: usize, seed: u64) -> Result<Vec<Candidate>> {
        let m = self.m();
        let cols = self.q + 1;
        if cols > m {
            return Err(Error::Underdetermined {
                observed: m,
                params: self.q,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        let mut a = vec![0.0; cols * cols];
        let mut g = vec![0.0; self.q];
        let mut rhs = vec![0.0; cols];
        for _ in 0..count {
            let mut idx = rand::seq::index::sample(&mut rng, m, cols).into_vec();
            idx.sort_unstable();
            let candidate = match self.model.kind() {
                ModelKind::Linear => {
                    for (r, &i) in idx.iter().enumerate() {
                        a[r * cols..r * cols + self.q].copy_from_slice(self.row(i));
                        a[r * cols + self.q] = 1.0;
                        rhs[r] = self.y[i];
                    }
                    linalg::solve_square(&a, cols, &rhs).map(|z| Candidate {
                        beta: z[..self.q].to_vec(),
                        alpha: z[self.q],
                    })
                }
                ModelKind::UserDifferentiable => {
                    self.interpolate_nonlinear(&idx, &mut a, &mut g, &mut rhs)
                }
            };
            if let Some(c) = candidate {
                out.push(c);
            }
        }
        if out.is_empty() {
            return Err(Error::DegenerateDesign(
                "every elemental subset was singular".into(),
            ));
        }
        Ok(out)
    }

    /// Gauss-Newton interpolation of a `q+1` point subset.
    fn interpolate_nonlinear(
        &self,
        idx: &[usize],
        a: &mut [f64],
        g: &mut [f64],
        rhs: &mut [f64],
    ) -> Option<Candidate> {
        let cols = self.q + 1;
        let mut beta = self.model.initial_beta();
        let mut alpha = 0.0;
        let yscale = 1.0 + idx.iter().fold(0.0f64, |acc, &i| acc.max(self.y[i].abs()));
        for _ in 0..50 {
            let mut worst: f64 = 0.0;
            for (r, &i) in idx.iter().enumerate() {
                let x = self.row(i);
                self.model.gradient(x, &beta, g);
                a[r * cols..r * cols + self.q].copy_from_slice(g);
                a[r * cols + self.q] = 1.0;
                rhs[r] = self.y[i] - self.model.value(x, &beta) - alpha;
                worst = worst.max(rhs[r].abs());
            }
            if worst <= 1e-10 * yscale {
                return Some(Candidate { beta, alpha });
            }
            let step = linalg::solve_square(a, cols, rhs)?;
            for k in 0..self.q {
                beta[k] += step[k];
            }
            alpha += step[self.q];
            if !beta.iter().all(|b| b.is_finite()) {
                return None;
            }
        }
        None
    }
}

fn mean_rho(kernel: &RhoKernel, r: &[f64], s: f64) -> f64 {
    r.iter().map(|v| kernel.rho(v / s)).sum::<f64>() / r.len() as f64
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Draw `count` random elemental subsets of the complete cases and
/// interpolate each exactly. Singular subsets are skipped.
pub fn resampling_candidates<M: RegressionModel + ?Sized>(
    sample: &CompleteCaseSample,
    model: &M,
    count: usize,
    seed: u64,
) -> Result<Vec<Candidate>> {
    if count == 0 {
        return Err(Error::InvalidArgument("candidate count must be positive".into()));
    }
    let m = sample.m();
    let q = model.n_params();
    if m < q + 1 {
        return Err(Error::Underdetermined {
            observed: m,
            params: q,
        });
    }
    Working::new(sample, model)?.candidates(count, seed)
}

struct SState {
    beta: Vec<f64>,
    alpha: f64,
    scale: f64,
    iterations: usize,
    converged: bool,
    exact: bool,
    trace: Vec<f64>,
}

fn refine_s<M: RegressionModel + ?Sized>(
    w: &Working<'_, M>,
    start: &Candidate,
    rho0: &RhoKernel,
    delta: f64,
    steps: usize,
    tol: f64,
) -> Result<SState> {
    let mut beta = start.beta.clone();
    let mut alpha = start.alpha;
    let mut r = Vec::new();
    w.residuals(&beta, alpha, &mut r);
    let sol = solve_m_scale(&ScaleProblem::new(&r, *rho0, delta))?;
    let mut state = SState {
        beta: beta.clone(),
        alpha,
        scale: sol.scale,
        iterations: 0,
        converged: sol.exact_fit,
        exact: sol.exact_fit,
        trace: vec![sol.scale],
    };
    if sol.exact_fit {
        return Ok(state);
    }
    let mut s = sol.scale;
    let cols = w.q + 1;
    let mut design = Vec::new();
    let mut weights = vec![0.0; w.m()];
    let mut trial_r = Vec::new();
    let mut trial_beta = vec![0.0; w.q];
    for it in 1..=steps {
        state.iterations = it;
        for (wi, ri) in weights.iter_mut().zip(&r) {
            *wi = rho0.weight(ri / s);
        }
        w.design(&beta, &mut design);
        let Some(step) = linalg::weighted_least_squares(&design, cols, &r, &weights) else {
            break;
        };
        let base = mean_rho(rho0, &r, s);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            for k in 0..w.q {
                trial_beta[k] = beta[k] + lambda * step[k];
            }
            let trial_alpha = alpha + lambda * step[w.q];
            w.residuals(&trial_beta, trial_alpha, &mut trial_r);
            if mean_rho(rho0, &trial_r, s) <= base + 1e-12 {
                alpha = trial_alpha;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            state.converged = true;
            break;
        }
        let change = max_abs_diff(&trial_r, &r);
        beta.copy_from_slice(&trial_beta);
        std::mem::swap(&mut r, &mut trial_r);
        let sol = solve_m_scale(&ScaleProblem::new(&r, *rho0, delta))?;
        s = sol.scale;
        state.trace.push(s);
        if sol.exact_fit {
            state.exact = true;
            state.converged = true;
            break;
        }
        if change <= tol * s {
            state.converged = true;
            break;
        }
    }
    state.beta = beta;
    state.alpha = alpha;
    state.scale = s;
    Ok(state)
}

/// Regression S fit on the complete cases: `(β̂, α̂)` minimizing the
/// M-scale of the residuals over subsampled, refined candidates.
pub fn fit_s_regression<M: RegressionModel + ?Sized>(
    sample: &CompleteCaseSample,
    model: &M,
    rho0: &RhoKernel,
    delta: f64,
    search: &SearchConfig,
) -> Result<RegressionFit> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0,1), got {delta}")));
    }
    let w = Working::new(sample, model)?;
    let candidates = w.candidates(search.subsets.max(1), search.seed)?;
    let keep = search.keep.max(1);

    // (scale, index), ascending.
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(keep + 1);
    let mut r = Vec::new();
    for (idx, c) in candidates.iter().enumerate() {
        w.residuals(&c.beta, c.alpha, &mut r);
        if best.len() == keep {
            let worst = best[keep - 1].0;
            // S*(ξ) ≥ worst exactly when mean ρ(r/worst) ≥ δ.
            if worst == 0.0 || mean_rho(rho0, &r, worst) >= delta {
                continue;
            }
        }
        let sol = solve_m_scale(&ScaleProblem::new(&r, *rho0, delta))?;
        let pos = best.partition_point(|&(s, i)| (s, i) < (sol.scale, idx));
        best.insert(pos, (sol.scale, idx));
        best.truncate(keep);
    }

    let mut winner: Option<(SState, usize)> = None;
    for &(_, idx) in &best {
        let st = refine_s(&w, &candidates[idx], rho0, delta, search.refine_steps, search.tolerance)?;
        let better = match &winner {
            None => true,
            Some((cur, cur_idx)) => (st.scale, idx) < (cur.scale, *cur_idx),
        };
        if better {
            winner = Some((st, idx));
        }
    }
    let (first, _) = winner.expect("at least one candidate kept");
    let start = Candidate {
        beta: first.beta.clone(),
        alpha: first.alpha,
    };
    let final_state = if first.exact {
        first
    } else {
        let st = refine_s(&w, &start, rho0, delta, search.max_iterations, search.tolerance)?;
        if st.scale <= first.scale {
            st
        } else {
            SState {
                converged: st.converged,
                iterations: st.iterations,
                ..first
            }
        }
    };
    Ok(finish(
        &w,
        FitMethod::S,
        final_state.beta,
        final_state.alpha,
        final_state.alpha,
        final_state.scale,
        final_state.converged,
        final_state.iterations,
        final_state.exact,
        final_state.trace,
    ))
}

/// Regression MM fit: S fit, then descent of `mean ρ₁(r/σ̂)` with the
/// S-scale held fixed.
pub fn fit_mm_regression<M: RegressionModel + ?Sized>(
    sample: &CompleteCaseSample,
    model: &M,
    rho0: &RhoKernel,
    rho1: &RhoKernel,
    delta: f64,
    search: &SearchConfig,
) -> Result<RegressionFit> {
    if !rho1.dominated_by(rho0) {
        return Err(Error::InvalidArgument(
            "efficiency kernel must satisfy rho1 <= rho0 pointwise".into(),
        ));
    }
    let s_fit = fit_s_regression(sample, model, rho0, delta, search)?;
    if s_fit.exact_fit {
        return Ok(RegressionFit {
            method: FitMethod::MM,
            ..s_fit
        });
    }
    let w = Working::new(sample, model)?;
    let sigma = s_fit.sigma_hat;
    let cols = w.q + 1;
    let mut beta = s_fit.beta_hat.clone();
    let mut alpha = s_fit.alpha_hat;
    let mut r = Vec::new();
    w.residuals(&beta, alpha, &mut r);
    let mut objective = mean_rho(rho1, &r, sigma);
    let mut trace = vec![objective];
    let mut design = Vec::new();
    let mut weights = vec![0.0; w.m()];
    let mut trial_r = Vec::new();
    let mut trial_beta = vec![0.0; w.q];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < search.max_iterations {
        iterations += 1;
        for (wi, ri) in weights.iter_mut().zip(&r) {
            *wi = rho1.weight(ri / sigma);
        }
        w.design(&beta, &mut design);
        let Some(step) = linalg::weighted_least_squares(&design, cols, &r, &weights) else {
            break;
        };
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            for k in 0..w.q {
                trial_beta[k] = beta[k] + lambda * step[k];
            }
            let trial_alpha = alpha + lambda * step[w.q];
            w.residuals(&trial_beta, trial_alpha, &mut trial_r);
            let value = mean_rho(rho1, &trial_r, sigma);
            if value <= objective + 1e-13 * objective {
                accepted = Some((trial_alpha, value));
                break;
            }
            lambda *= 0.5;
        }
        let Some((trial_alpha, value)) = accepted else {
            converged = true;
            break;
        };
        let change = max_abs_diff(&trial_r, &r);
        beta.copy_from_slice(&trial_beta);
        alpha = trial_alpha;
        if value < objective {
            objective = value;
            trace.push(value);
        }
        std::mem::swap(&mut r, &mut trial_r);
        if change <= search.tolerance * sigma {
            converged = true;
            break;
        }
    }
    let mut fit = finish(
        &w,
        FitMethod::MM,
        beta,
        alpha,
        s_fit.alpha_hat,
        sigma,
        converged,
        iterations,
        false,
        trace,
    );
    for warning in s_fit.warnings {
        if !fit.warnings.contains(&warning) {
            fit.warnings.push(warning);
        }
    }
    Ok(fit)
}

/// Least squares fit of `(β, α)` on the complete cases (Gauss-Newton for
/// nonlinear models). `sigma_hat` is the residual standard deviation.
pub fn fit_least_squares<M: RegressionModel + ?Sized>(
    sample: &CompleteCaseSample,
    model: &M,
    search: &SearchConfig,
) -> Result<RegressionFit> {
    let w = Working::new(sample, model)?;
    let cols = w.q + 1;
    let m = w.m();
    let ones = vec![1.0; m];
    let mut beta = match model.kind() {
        ModelKind::Linear => vec![0.0; w.q],
        ModelKind::UserDifferentiable => model.initial_beta(),
    };
    let mut alpha = 0.0;
    let mut r = Vec::new();
    let mut design = Vec::new();
    let sse = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    w.residuals(&beta, alpha, &mut r);
    let mut current = sse(&r);
    let mut trace = vec![current];
    let mut iterations = 0;
    let mut converged = false;
    let mut trial_r = Vec::new();
    while iterations < search.max_iterations.max(1) {
        iterations += 1;
        w.design(&beta, &mut design);
        let step = linalg::weighted_least_squares(&design, cols, &r, &ones).ok_or_else(|| {
            Error::DegenerateDesign("observed design is rank deficient".into())
        })?;
        let mut lambda = 1.0;
        let mut accepted = false;
        let mut trial_beta = beta.clone();
        for _ in 0..30 {
            for k in 0..w.q {
                trial_beta[k] = beta[k] + lambda * step[k];
            }
            w.residuals(&trial_beta, alpha + lambda * step[w.q], &mut trial_r);
            let value = sse(&trial_r);
            if value <= current {
                alpha += lambda * step[w.q];
                current = value;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            converged = true;
            break;
        }
        let change = max_abs_diff(&trial_r, &r);
        beta = trial_beta;
        std::mem::swap(&mut r, &mut trial_r);
        trace.push(current);
        let rms = (current / m as f64).sqrt();
        if model.kind() == ModelKind::Linear || change <= search.tolerance * rms.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    let dof = (m as f64 - cols as f64).max(1.0);
    let sigma = (current / dof).sqrt();
    Ok(finish(
        &w,
        FitMethod::LeastSquares,
        beta,
        alpha,
        alpha,
        sigma,
        converged,
        iterations,
        current == 0.0,
        trace,
    ))
}

#[allow(clippy::too_many_arguments)]
fn finish<M: RegressionModel + ?Sized>(
    w: &Working<'_, M>,
    method: FitMethod,
    beta: Vec<f64>,
    alpha: f64,
    alpha_s: f64,
    sigma: f64,
    converged: bool,
    iterations: usize,
    exact_fit: bool,
    objective_trace: Vec<f64>,
) -> RegressionFit {
    let residuals_observed: Vec<f64> = (0..w.m())
        .map(|i| w.y[i] - w.model.value(w.row(i), &beta))
        .collect();
    let mut warnings = Vec::new();
    let mut design = Vec::new();
    w.design(&beta, &mut design);
    if linalg::inverse_condition(&design, w.q + 1) < 1e-10 {
        warnings.push("observed design is numerically rank deficient; beta may not be identified".into());
    }
    if exact_fit {
        warnings.push("exact fit: at least 1 - delta of the complete cases are interpolated".into());
    }
    if !converged {
        warnings.push(format!("{method:?} iterations stopped before convergence"));
    }
    RegressionFit {
        method,
        beta_hat: beta,
        alpha_hat: alpha,
        alpha_s,
        sigma_hat: if exact_fit && method != FitMethod::LeastSquares { 0.0 } else { sigma },
        residuals_observed,
        converged,
        iterations,
        exact_fit,
        objective_trace,
        warnings,
    }
}
