//! Damped Gauss-Newton (Levenberg-Marquardt) least-squares solver with a
//! forward-difference numeric Jacobian.
//!
//! The solver never aborts: on non-convergence it returns the best parameters
//! seen so far with `converged = false`, and callers surface that as a
//! diagnostic warning rather than an error.

use nalgebra::{DMatrix, DVector};

/// Absolute floor for the finite-difference step.
pub const JACOBIAN_STEP_FLOOR: f64 = 1e-8;

/// Damping factor ceiling; beyond this the iteration is considered stalled.
const LAMBDA_MAX: f64 = 1e14;

/// Hyperparameters for [`levenberg_marquardt`].
#[derive(Debug, Clone, PartialEq)]
pub struct LmConfig {
    /// Initial damping factor.
    pub lambda_init: f64,
    /// Multiplier applied to the damping on a rejected step (> 1).
    pub lambda_up: f64,
    /// Multiplier applied to the damping on an accepted step (in (0, 1)).
    pub lambda_down: f64,
    /// Maximum number of outer iterations (Jacobian evaluations).
    pub max_iters: usize,
    /// Stop when the infinity norm of the gradient J^T r falls below this.
    pub gradient_tol: f64,
    /// Stop when the accepted step norm falls below `step_tol * (|x| + step_tol)`.
    pub step_tol: f64,
    /// Stop when the cost (sum of squared residuals) falls below this.
    pub residual_tol: f64,
    /// Relative perturbation for the forward-difference Jacobian,
    /// floored at [`JACOBIAN_STEP_FLOOR`].
    pub jacobian_step: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            lambda_init: 1e-3,
            lambda_up: 10.0,
            lambda_down: 0.1,
            max_iters: 200,
            gradient_tol: 1e-10,
            step_tol: 1e-8,
            residual_tol: 1e-10,
            jacobian_step: 1e-6,
        }
    }
}

impl LmConfig {
    /// Checks the structural invariants (positivity, damping schedule order).
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("lambda_init", self.lambda_init),
            ("lambda_up", self.lambda_up),
            ("lambda_down", self.lambda_down),
            ("gradient_tol", self.gradient_tol),
            ("step_tol", self.step_tol),
            ("residual_tol", self.residual_tol),
            ("jacobian_step", self.jacobian_step),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(format!("{name} must be positive and finite, got {value}"));
            }
        }
        if self.max_iters == 0 {
            return Err("max_iters must be at least 1".to_string());
        }
        if !(self.lambda_up > 1.0 && self.lambda_down < 1.0) {
            return Err(format!(
                "damping schedule requires lambda_up > 1 > lambda_down > 0, got up = {}, down = {}",
                self.lambda_up, self.lambda_down
            ));
        }
        Ok(())
    }
}

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Gradient infinity norm below `gradient_tol`.
    GradientTol,
    /// Accepted step norm below the step tolerance.
    StepTol,
    /// Cost below `residual_tol`.
    ResidualTol,
    /// Iteration budget exhausted or damping stalled.
    MaxIters,
    /// The residual at the start point was not finite.
    InvalidStart,
}

/// Solver result: best parameters seen plus convergence diagnostics.
#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: DVector<f64>,
    /// Final cost, i.e. sum of squared residuals.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
    /// Damping factor at termination.
    pub lambda: f64,
    /// Norm of the last accepted step (0 when no step was taken).
    pub last_step_norm: f64,
    /// Gradient infinity norm at termination.
    pub gradient_norm: f64,
    /// Cost after each accepted step; non-increasing by construction.
    pub accepted_costs: Vec<f64>,
}

fn numeric_jacobian<F>(f: &F, x: &DVector<f64>, r0: &DVector<f64>, rel_step: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let m = r0.len();
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut xp = x.clone();
    for j in 0..n {
        let h = (x[j].abs() * rel_step).max(JACOBIAN_STEP_FLOOR);
        xp[j] = x[j] + h;
        let rp = f(&xp);
        assert_eq!(rp.len(), m, "residual length changed between evaluations");
        for i in 0..m {
            jac[(i, j)] = (rp[i] - r0[i]) / h;
        }
        xp[j] = x[j];
    }
    jac
}

/// Minimizes the sum of squared residuals of `residual_fn` starting from
/// `theta0`.
///
/// Uses Marquardt scaling (`J^T J + lambda * diag(J^T J)`), multiplying
/// `lambda` by `lambda_up` on rejected steps and by `lambda_down` on accepted
/// ones. Residual vectors may contain large sentinel values to signal
/// infeasible parameters; such steps are simply rejected.
pub fn levenberg_marquardt<F>(residual_fn: F, theta0: DVector<f64>, config: &LmConfig) -> LmOutcome
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    debug_assert!(config.validate().is_ok(), "invalid LmConfig");

    let mut x = theta0;
    let mut r = residual_fn(&x);
    let mut cost = r.norm_squared();
    let mut lambda = config.lambda_init;
    let mut accepted_costs = Vec::new();
    let mut last_step_norm = 0.0;

    if !cost.is_finite() {
        return LmOutcome {
            params: x,
            cost,
            iterations: 0,
            converged: false,
            stop: StopReason::InvalidStart,
            lambda,
            last_step_norm,
            gradient_norm: f64::NAN,
            accepted_costs,
        };
    }
    if cost < config.residual_tol {
        return LmOutcome {
            params: x,
            cost,
            iterations: 0,
            converged: true,
            stop: StopReason::ResidualTol,
            lambda,
            last_step_norm,
            gradient_norm: 0.0,
            accepted_costs,
        };
    }

    let mut gradient_norm = f64::NAN;
    let mut stop = StopReason::MaxIters;
    let mut converged = false;
    let mut iterations = 0;

    'outer: for iter in 1..=config.max_iters {
        iterations = iter;
        let jac = numeric_jacobian(&residual_fn, &x, &r, config.jacobian_step);
        let gradient = jac.transpose() * &r;
        gradient_norm = gradient.amax();
        if gradient_norm < config.gradient_tol {
            stop = StopReason::GradientTol;
            converged = true;
            break;
        }
        let jtj = jac.transpose() * &jac;
        // Marquardt scaling keeps the damping meaningful across parameters of
        // very different magnitudes (focal lengths vs. angles).
        let scale: Vec<f64> = (0..jtj.nrows()).map(|i| jtj[(i, i)].max(1e-12)).collect();

        loop {
            let mut damped = jtj.clone();
            for (i, s) in scale.iter().enumerate() {
                damped[(i, i)] += lambda * s;
            }
            let step = damped.cholesky().map(|chol| chol.solve(&(-&gradient)));

            let mut accepted = false;
            if let Some(step) = step {
                let x_new = &x + &step;
                let r_new = residual_fn(&x_new);
                let cost_new = r_new.norm_squared();
                if cost_new.is_finite() && cost_new < cost {
                    last_step_norm = step.norm();
                    x = x_new;
                    r = r_new;
                    cost = cost_new;
                    lambda = (lambda * config.lambda_down).max(1e-12);
                    accepted_costs.push(cost);
                    accepted = true;
                }
            }

            if accepted {
                if cost < config.residual_tol {
                    stop = StopReason::ResidualTol;
                    converged = true;
                    break 'outer;
                }
                if last_step_norm < config.step_tol * (x.norm() + config.step_tol) {
                    stop = StopReason::StepTol;
                    converged = true;
                    break 'outer;
                }
                break;
            }

            lambda *= config.lambda_up;
            if lambda > LAMBDA_MAX {
                // No acceptable step at any damping: stalled.
                stop = StopReason::MaxIters;
                break 'outer;
            }
        }
    }

    LmOutcome {
        params: x,
        cost,
        iterations,
        converged,
        stop,
        lambda,
        last_step_norm,
        gradient_norm,
        accepted_costs,
    }
}
