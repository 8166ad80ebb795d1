//! Weighted nonlinear least squares and the concrete spectrum fit models.

mod bounds;
mod lm;
mod lorentzian;
mod peaks;
mod ratefit;
mod saturation;
mod uncertainty;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bounds::Transform;
pub use lm::{levenberg_marquardt, numeric_jacobian};
pub use lorentzian::{fit_lorentzian_multi, multi_lorentzian, PeakGuess};
pub use peaks::{detect_peaks, detect_peaks_with, DetectedPeak, PeakOptions};
pub use ratefit::{fit_rate_model, fit_rate_model_with, RateFit, RateFitSetup, RateModel};
pub use saturation::{fit_saturation, saturation_law};
pub use uncertainty::{estimate_uncertainties, Uncertainties};

use crate::ratesim::RateError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("residuals are not finite at the initial point: {0}")]
    InvalidInitialPoint(String),
    #[error("normal equations are singular at the initial point (parameter `{0}` has no effect)")]
    SingularNormalEquations(String),
    #[error("Jacobian is rank deficient; degenerate parameters: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("parameter `{name}`: initial value {value} outside [{lower}, {upper}]")]
    InitialOutOfBounds { name: String, value: f64, lower: f64, upper: f64 },
    #[error("duplicate parameter name `{0}`")]
    DuplicateParameter(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("need more data points ({points}) than free parameters ({params})")]
    InsufficientData { points: usize, params: usize },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("requested {requested} peaks but only {found} detected")]
    TooFewPeaks { requested: usize, found: usize },
    #[error("{0} weights given for {1} data points")]
    WeightCount(usize, usize),
    #[error("invalid fit setup: {0}")]
    Setup(String),
    #[error("forward model failed: {0}")]
    Model(String),
}

impl From<RateError> for FitError {
    fn from(e: RateError) -> Self {
        FitError::Model(e.to_string())
    }
}

/// A free parameter with optional bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub initial: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

impl Parameter {
    pub fn new(name: impl Into<String>, initial: f64) -> Self {
        Parameter {
            name: name.into(),
            initial,
            lower: None,
            upper: None,
        }
    }

    pub fn lower(mut self, lower: f64) -> Self {
        self.lower = Some(lower);
        self
    }

    pub fn upper(mut self, upper: f64) -> Self {
        self.upper = Some(upper);
        self
    }

    pub fn bounded(self, lower: f64, upper: f64) -> Self {
        self.lower(lower).upper(upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    MultiLorentzian,
    RateFluorex,
    RateSted,
    Saturation,
    Custom,
}

/// Data, parameters and weighting of one fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    pub model: ModelKind,
    pub free: Vec<Parameter>,
    pub fixed: Vec<(String, f64)>,
    pub data: Vec<f64>,
    /// Per-point weights 1/σ². `None` means Poisson weights 1/max(y, 1).
    pub weights: Option<Vec<f64>>,
}

impl FitProblem {
    pub fn new(model: ModelKind, free: Vec<Parameter>, data: Vec<f64>) -> Self {
        FitProblem {
            model,
            free,
            fixed: Vec::new(),
            data,
            weights: None,
        }
    }

    pub fn resolved_weights(&self) -> Result<Vec<f64>, FitError> {
        match &self.weights {
            Some(w) if w.len() != self.data.len() => Err(FitError::WeightCount(w.len(), self.data.len())),
            Some(w) => Ok(w.clone()),
            None => Ok(poisson_weights(&self.data)),
        }
    }

    pub fn names(&self) -> Vec<String> {
        self.free.iter().map(|p| p.name.clone()).collect()
    }

    pub(crate) fn validate(&self) -> Result<(), FitError> {
        if self.data.is_empty() {
            return Err(FitError::InsufficientData {
                points: 0,
                params: self.free.len(),
            });
        }
        let mut seen = std::collections::HashSet::new();
        for p in self.free.iter().map(|p| &p.name).chain(self.fixed.iter().map(|f| &f.0)) {
            if !seen.insert(p.as_str()) {
                return Err(FitError::DuplicateParameter(p.clone()));
            }
        }
        for p in &self.free {
            let lo = p.lower.unwrap_or(f64::NEG_INFINITY);
            let hi = p.upper.unwrap_or(f64::INFINITY);
            if !(p.initial >= lo && p.initial <= hi) || !p.initial.is_finite() || lo >= hi {
                return Err(FitError::InitialOutOfBounds {
                    name: p.name.clone(),
                    value: p.initial,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(())
    }
}

/// 1/σ² with σ² = max(y, 1).
pub fn poisson_weights(data: &[f64]) -> Vec<f64> {
    data.iter().map(|&y| 1.0 / y.max(1.0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Stop when max_j |g_j| / sqrt(A_jj * SSE) falls below this.
    pub tol_grad: f64,
    /// Stop when ‖Δx‖ < tol_step * (‖x‖ + tol_step).
    pub tol_step: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol_grad: 1e-10,
            tol_step: 1e-10,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterEstimate {
    pub name: String,
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Gradient,
    Step,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelKind,
    pub parameters: Vec<ParameterEstimate>,
    pub fixed: Vec<(String, f64)>,
    pub covariance: Vec<Vec<f64>>,
    /// Weighted sum of squared residuals.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub points: usize,
    /// Weighted SSE after each accepted step, starting with the initial point.
    pub sse_history: Vec<f64>,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<&ParameterEstimate> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.get(name).map(|p| p.value)
    }

    pub fn values(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.value).collect()
    }
}
