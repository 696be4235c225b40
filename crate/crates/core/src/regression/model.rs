use rand::Rng;

/// Whether the regression function is the linear `β'x` or user supplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Linear,
    UserDifferentiable,
}

/// Regression function `g(x, β)` with its gradient in `β`.
///
/// The model carries no intercept: the center of the errors is estimated
/// separately as `α` and kept inside the residual distribution.
pub trait RegressionModel: Sync {
    /// Dimension `q` of `β`.
    fn n_params(&self) -> usize;

    fn value(&self, x: &[f64], beta: &[f64]) -> f64;

    /// Writes `∂g/∂β` at `(x, β)` into `out` (length `q`).
    fn gradient(&self, x: &[f64], beta: &[f64], out: &mut [f64]);

    fn kind(&self) -> ModelKind {
        ModelKind::UserDifferentiable
    }

    /// Starting point for Gauss-Newton on nonlinear models.
    fn initial_beta(&self) -> Vec<f64> {
        vec![0.0; self.n_params()]
    }
}

/// `g(x, β) = β'x`, no intercept column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinearModel {
    pub p: usize,
}

impl LinearModel {
    pub fn new(p: usize) -> Self {
        LinearModel { p }
    }
}

impl RegressionModel for LinearModel {
    fn n_params(&self) -> usize {
        self.p
    }

    #[inline]
    fn value(&self, x: &[f64], beta: &[f64]) -> f64 {
        x.iter().zip(beta).map(|(a, b)| a * b).sum()
    }

    #[inline]
    fn gradient(&self, x: &[f64], _beta: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }

    fn kind(&self) -> ModelKind {
        ModelKind::Linear
    }
}

/// Largest absolute gap between `gradient` and central finite differences
/// of `value` over random probes `x ~ U[-1,1]^p`, `β ~ U[-2,2]^q`.
pub fn gradient_discrepancy<M: RegressionModel + ?Sized, R: Rng>(
    model: &M,
    p: usize,
    probes: usize,
    rng: &mut R,
) -> f64 {
    let q = model.n_params();
    let h = 1e-6;
    let mut grad = vec![0.0; q];
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let x: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let beta: Vec<f64> = (0..q).map(|_| rng.random_range(-2.0..2.0)).collect();
        model.gradient(&x, &beta, &mut grad);
        for k in 0..q {
            let mut up = beta.clone();
            let mut dn = beta.clone();
            up[k] += h;
            dn[k] -= h;
            let fd = (model.value(&x, &up) - model.value(&x, &dn)) / (2.0 * h);
            worst = worst.max((fd - grad[k]).abs());
        }
    }
    worst
}
