//! Complete estimator: regression on the complete cases, convolution of
//! fitted values with residuals, location functional.

use serde::{Deserialize, Serialize};

use crate::distribution::ConvolvedDistribution;
use crate::error::Result;
use crate::inference::{estimate_tau_sq, InferenceOptions, VarianceEstimate};
use crate::location::{evaluate, LocationEstimate, LocationSpec};
use crate::regression::{
    fit_least_squares, fit_mm_regression, CompleteCaseSample, RegressionFit, RegressionModel, SearchConfig,
};
use crate::rho::{RhoKernel, K0_DEFAULT, K1_REGRESSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegressionChoice {
    LeastSquares,
    MM,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub functional: LocationSpec,
    pub regression: RegressionChoice,
    /// Regression S-scale constant.
    pub k0: f64,
    /// Regression MM constant.
    pub k1: f64,
    pub delta: f64,
    pub search: SearchConfig,
}

impl PipelineConfig {
    /// Least squares for the mean, MM regression (`k0 = 1.57`, `k1 = 3.44`,
    /// `δ = 0.5`) for everything else.
    pub fn new(functional: LocationSpec) -> Self {
        PipelineConfig {
            functional,
            regression: match functional {
                LocationSpec::Mean => RegressionChoice::LeastSquares,
                _ => RegressionChoice::MM,
            },
            k0: K0_DEFAULT,
            k1: K1_REGRESSION,
            delta: 0.5,
            search: SearchConfig::default(),
        }
    }

    pub fn kernels(&self) -> (RhoKernel, RhoKernel) {
        (RhoKernel::tukey(self.k0), RhoKernel::tukey(self.k1))
    }

    pub fn inference_options(&self) -> InferenceOptions {
        InferenceOptions {
            regression_kernels: self.kernels(),
            seed: self.search.seed,
            ..InferenceOptions::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub fit: RegressionFit,
    pub distribution: ConvolvedDistribution,
    pub estimate: LocationEstimate,
}

pub fn fit_regression<M: RegressionModel + ?Sized>(
    sample: &CompleteCaseSample,
    model: &M,
    config: &PipelineConfig,
) -> Result<RegressionFit> {
    match config.regression {
        RegressionChoice::LeastSquares => fit_least_squares(sample, model, &config.search),
        RegressionChoice::MM => {
            let (rho0, rho1) = config.kernels();
            fit_mm_regression(sample, model, &rho0, &rho1, config.delta, &config.search)
        }
    }
}

/// `μ̂ = T_L(F̂ₙ)`.
pub fn run_pipeline<M: RegressionModel + ?Sized>(
    sample: &CompleteCaseSample,
    model: &M,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    let fit = fit_regression(sample, model, config)?;
    let distribution = ConvolvedDistribution::build(&fit, sample, model)?;
    let estimate = evaluate(&config.functional, &distribution)?;
    Ok(PipelineOutput {
        fit,
        distribution,
        estimate,
    })
}

/// [`run_pipeline`] followed by the plug-in variance.
pub fn run_with_variance<M: RegressionModel + ?Sized>(
    sample: &CompleteCaseSample,
    model: &M,
    config: &PipelineConfig,
) -> Result<(PipelineOutput, VarianceEstimate)> {
    let out = run_pipeline(sample, model, config)?;
    let var = estimate_tau_sq(
        &config.functional,
        &out.estimate,
        &out.fit,
        sample,
        model,
        &out.distribution,
        &config.inference_options(),
    )?;
    Ok((out, var))
}
