//! Damped Gauss-Newton (Levenberg-Marquardt) least squares with a numeric
//! Jacobian.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Converged once |Δp| ≤ tol·(|p| + tol).
    pub relative_step_tolerance: f64,
    pub initial_damping: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_iterations: 200, relative_step_tolerance: 1e-8, initial_damping: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FitStatus {
    Converged,
    /// Iteration budget exhausted; parameters are the best found.
    MaxIterations,
    /// The data do not constrain the model (e.g. no decay in a decay fit).
    NotConverged,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// 1σ from the inverse curvature matrix; only present on convergence.
    pub uncertainties: Option<Vec<f64>>,
    /// sqrt(Σ ((y - f) / σ)²)
    pub residual_norm: f64,
    pub degrees_of_freedom: usize,
    pub status: FitStatus,
    pub iterations: usize,
    /// χ² after each accepted step, starting with the initial guess.
    pub cost_history: Vec<f64>,
}

impl FitResult {
    pub fn converged(&self) -> bool {
        self.status == FitStatus::Converged
    }

    pub fn reduced_chi2(&self) -> f64 {
        self.residual_norm.powi(2) / self.degrees_of_freedom.max(1) as f64
    }

    pub fn sigma(&self, i: usize) -> Option<f64> {
        self.uncertainties.as_ref().map(|u| u[i])
    }
}

/// Weighted samples for a fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
}

impl Sample {
    pub fn new(x: f64, y: f64, sigma: f64) -> Self {
        Self { x, y, sigma }
    }
}

fn cost<F: Fn(f64, &[f64]) -> f64>(model: &F, data: &[Sample], p: &[f64]) -> (DVector<f64>, f64) {
    let r = DVector::from_iterator(data.len(), data.iter().map(|s| (s.y - model(s.x, p)) / s.sigma));
    let c = r.norm_squared();
    (r, c)
}

fn jacobian<F: Fn(f64, &[f64]) -> f64>(model: &F, data: &[Sample], p: &[f64]) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(data.len(), p.len());
    let mut q = p.to_vec();
    for k in 0..p.len() {
        let h = 1e-6 * p[k].abs().max(1e-6);
        q[k] = p[k] + h;
        let up: Vec<f64> = data.iter().map(|s| model(s.x, &q)).collect();
        q[k] = p[k] - h;
        for (i, s) in data.iter().enumerate() {
            j[(i, k)] = (up[i] - model(s.x, &q)) / (2.0 * h * s.sigma);
        }
        q[k] = p[k];
    }
    j
}

/// Minimizes Σ ((y - model(x, p)) / σ)² starting from `initial`.
///
/// Returns an error for unusable input or singular normal equations at the
/// solution; running out of iterations is reported through
/// [`FitResult::status`] with the best parameters found.
pub fn nlls_fit<F: Fn(f64, &[f64]) -> f64>(
    model: F,
    data: &[Sample],
    initial: &[f64],
    options: &FitOptions,
) -> Result<FitResult, AnalysisError> {
    let n_par = initial.len();
    if data.len() < n_par || n_par == 0 {
        return Err(AnalysisError::InsufficientData { needed: n_par.max(1), got: data.len() });
    }
    if let Some(s) = data.iter().find(|s| !(s.sigma > 0.0) || !s.x.is_finite() || !s.y.is_finite()) {
        return Err(AnalysisError::InvalidInput(format!("bad sample {s:?}")));
    }
    let mut p = initial.to_vec();
    let (_, mut chi2) = cost(&model, data, &p);
    if !chi2.is_finite() {
        return Err(AnalysisError::InvalidInput("model not finite at the initial guess".into()));
    }
    let mut history = vec![chi2];
    let mut lambda = options.initial_damping;
    let mut status = FitStatus::MaxIterations;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        let j = jacobian(&model, data, &p);
        let (r, _) = cost(&model, data, &p);
        let jtj = j.transpose() * &j;
        let grad = j.transpose() * r;
        if grad.iter().all(|g| *g == 0.0) {
            status = FitStatus::Converged;
            break;
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..n_par {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&grad)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let (_, trial_chi2) = cost(&model, data, &trial);
            let p_norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            let small = step.norm() <= options.relative_step_tolerance * (p_norm + options.relative_step_tolerance);
            if trial_chi2.is_finite() && trial_chi2 <= chi2 {
                p = trial;
                chi2 = trial_chi2;
                history.push(chi2);
                lambda = (lambda * 0.3).max(1e-12);
                accepted = true;
                if small {
                    status = FitStatus::Converged;
                }
                break;
            }
            if small {
                // no downhill step left at this resolution
                status = FitStatus::Converged;
                break;
            }
            lambda *= 10.0;
        }
        if status == FitStatus::Converged {
            break;
        }
        if !accepted {
            // damping saturated: stationary point within numerical precision
            status = FitStatus::Converged;
            break;
        }
    }

    let uncertainties = if status == FitStatus::Converged {
        let j = jacobian(&model, data, &p);
        let jtj = j.transpose() * &j;
        let inv = jtj
            .clone()
            .try_inverse()
            .filter(|m| m.iter().all(|v| v.is_finite()) && (0..n_par).all(|k| m[(k, k)] >= 0.0))
            .ok_or_else(|| AnalysisError::DegenerateFit("singular normal equations at the solution".into()))?;
        Some((0..n_par).map(|k| inv[(k, k)].sqrt()).collect())
    } else {
        None
    };
    Ok(FitResult {
        params: p,
        uncertainties,
        residual_norm: chi2.sqrt(),
        degrees_of_freedom: data.len().saturating_sub(n_par),
        status,
        iterations,
        cost_history: history,
    })
}
