//! M-scale: the `s` solving `mean ρ(rᵢ/s) = δ`.
//!
//! The left side is continuous and nonincreasing in `s`, so the root is found
//! by bracketing. Inside the bracket we take Illinois (modified regula falsi)
//! steps on `ln s` and fall back to bisection whenever a step fails to halve
//! the bracket, which keeps the unconditional convergence of plain bisection.
//!
//! If the fraction of exactly-zero residuals is at least `1 - δ` the equation
//! has no positive root; the infimum `s = 0` is returned and flagged as an
//! exact fit.

use crate::error::{Error, Result};
use crate::rho::RhoKernel;

pub const DEFAULT_SCALE_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_SCALE_MAX_ITERATIONS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleOptions {
    pub delta: f64,
    /// Relative width of the final bracket on `s`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl ScaleOptions {
    pub fn new(delta: f64) -> Self {
        ScaleOptions {
            delta,
            tolerance: DEFAULT_SCALE_TOLERANCE,
            max_iterations: DEFAULT_SCALE_MAX_ITERATIONS,
        }
    }
}

/// Residual sample plus the settings of the scale equation.
#[derive(Debug, Clone, Copy)]
pub struct ScaleProblem<'a> {
    pub residuals: &'a [f64],
    pub kernel: RhoKernel,
    pub options: ScaleOptions,
}

impl<'a> ScaleProblem<'a> {
    pub fn new(residuals: &'a [f64], kernel: RhoKernel, delta: f64) -> Self {
        ScaleProblem {
            residuals,
            kernel,
            options: ScaleOptions::new(delta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleSolution {
    pub scale: f64,
    /// Set when at least `1 - δ` of the mass sits exactly at zero.
    pub exact_fit: bool,
    pub iterations: usize,
}

impl ScaleSolution {
    fn exact() -> Self {
        ScaleSolution {
            scale: 0.0,
            exact_fit: true,
            iterations: 0,
        }
    }
}

/// Solve the M-scale equation for a finite residual sample.
pub fn solve_m_scale(problem: &ScaleProblem<'_>) -> Result<ScaleSolution> {
    let r = problem.residuals;
    let opts = problem.options;
    if r.is_empty() {
        return Err(Error::InvalidArgument("empty residual sample".into()));
    }
    if !(opts.delta > 0.0 && opts.delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in (0,1), got {}",
            opts.delta
        )));
    }
    if let Some(index) = r.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteResidual { index });
    }

    let n = r.len() as f64;
    let zeros = r.iter().filter(|v| **v == 0.0).count() as f64;
    if zeros / n >= 1.0 - opts.delta {
        return Ok(ScaleSolution::exact());
    }

    let mut abs: Vec<f64> = r.iter().map(|v| v.abs()).collect();
    let max_abs = abs.iter().cloned().fold(0.0, f64::max);
    let mid = abs.len() / 2;
    let (_, med, _) = abs.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    let mut med = *med;
    if med == 0.0 {
        med = r
            .iter()
            .map(|v| v.abs())
            .filter(|v| *v > 0.0)
            .fold(f64::INFINITY, f64::min);
    }
    let k = problem.kernel;
    let objective = |s: f64| r.iter().map(|v| k.rho(v / s)).sum::<f64>() / n;
    solve_scale_equation(objective, (med / k.k, 10.0 * max_abs), opts)
}

/// Root of `mean_rho(s) = δ` given a (possibly loose) initial bracket.
///
/// `mean_rho` must be continuous and nonincreasing in `s`, tend to the
/// nonzero mass as `s → 0` and to 0 as `s → ∞`. The bracket is widened
/// geometrically until it straddles the root. Exact-fit detection is the
/// caller's job.
pub fn solve_scale_equation<F>(
    mut mean_rho: F,
    bracket: (f64, f64),
    opts: ScaleOptions,
) -> Result<ScaleSolution>
where
    F: FnMut(f64) -> f64,
{
    let delta = opts.delta;
    let mut h = |s: f64| mean_rho(s) - delta;

    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && lo.is_finite()) {
        lo = f64::MIN_POSITIVE.sqrt();
    }
    if !(hi > lo && hi.is_finite()) {
        hi = lo * 2.0;
    }
    let mut iterations = 0usize;
    let mut h_lo = h(lo);
    while h_lo < 0.0 {
        iterations += 1;
        if iterations > opts.max_iterations || lo < 1e-300 {
            return Err(Error::NoConvergence { iterations });
        }
        hi = lo;
        lo *= 0.25;
        h_lo = h(lo);
    }
    if h_lo == 0.0 {
        return Ok(ScaleSolution {
            scale: lo,
            exact_fit: false,
            iterations,
        });
    }
    let mut h_hi = h(hi);
    while h_hi > 0.0 {
        iterations += 1;
        if iterations > opts.max_iterations || hi > 1e300 {
            return Err(Error::NoConvergence { iterations });
        }
        lo = hi;
        h_lo = h_hi;
        hi *= 4.0;
        h_hi = h(hi);
    }
    if h_hi == 0.0 {
        return Ok(ScaleSolution {
            scale: hi,
            exact_fit: false,
            iterations,
        });
    }

    // Illinois on x = ln s: h(x_lo) > 0 > h(x_hi).
    let (mut x_lo, mut x_hi) = (lo.ln(), hi.ln());
    let width_tol = opts.tolerance.ln_1p();
    let mut side = 0i8;
    let mut last_width = x_hi - x_lo;
    let mut stalled = 0;
    loop {
        iterations += 1;
        if iterations > opts.max_iterations {
            return Err(Error::NoConvergence { iterations });
        }
        let width = x_hi - x_lo;
        if width <= width_tol {
            break;
        }
        let mut x = if stalled >= 2 {
            stalled = 0;
            0.5 * (x_lo + x_hi)
        } else {
            (x_lo * h_hi - x_hi * h_lo) / (h_hi - h_lo)
        };
        if !(x > x_lo && x < x_hi) {
            x = 0.5 * (x_lo + x_hi);
        }
        let hx = h(x.exp());
        if hx == 0.0 {
            return Ok(ScaleSolution {
                scale: x.exp(),
                exact_fit: false,
                iterations,
            });
        }
        if hx > 0.0 {
            x_lo = x;
            h_lo = hx;
            if side == 1 {
                h_hi *= 0.5;
            }
            side = 1;
        } else {
            x_hi = x;
            h_hi = hx;
            if side == -1 {
                h_lo *= 0.5;
            }
            side = -1;
        }
        let new_width = x_hi - x_lo;
        if new_width > 0.5 * last_width {
            stalled += 1;
        } else {
            stalled = 0;
        }
        last_width = new_width;
    }
    // Final point: linear interpolation inside the converged bracket.
    let (h_lo_true, h_hi_true) = (h(x_lo.exp()), h(x_hi.exp()));
    let x = if h_lo_true.abs() <= h_hi_true.abs() {
        x_lo
    } else {
        x_hi
    };
    Ok(ScaleSolution {
        scale: x.exp(),
        exact_fit: false,
        iterations,
    })
}
