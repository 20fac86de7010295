//! Numerical plumbing shared by every geometric module: finite differences,
//! adaptive Runge–Kutta integration with dense output, smooth minimization,
//! nonlinear least squares and numerical rank.
//!
//! Everything here is a pure function of its inputs. Nothing caches, nothing
//! draws randomness, so results are reproducible bit for bit.

mod fd;
mod linalg;
mod ode;
mod optimize;

pub use fd::{fd_derivative, fd_gradient, fd_hessian, fd_jacobian, Derivative};
pub use linalg::{null_space, numeric_rank, numeric_rank_scaled, pseudo_inverse, solve_spd};
pub use ode::{integrate_ivp, integrate_until, DenseStep, OdeOptions, Trajectory};
pub use optimize::{
    least_squares, minimize_smooth, minimize_smooth_with_gradient, AffineConstraint, LeastSquaresOptions,
    LeastSquaresSolution, Minimum,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical tolerances threaded through every computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Step for first-order central differences.
    pub fd_step: f64,
    /// Step for second-order (Hessian) stencils, relative to the scale of the point.
    pub fd_hessian_step: f64,
    pub ode_rel_tol: f64,
    pub ode_abs_tol: f64,
    pub opt_grad_tol: f64,
    /// Singular values below `rank_sv_cutoff * sigma_max` count as zero.
    pub rank_sv_cutoff: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            fd_step: 1e-5,
            fd_hessian_step: 1e-4,
            ode_rel_tol: 1e-9,
            ode_abs_tol: 1e-11,
            opt_grad_tol: 1e-9,
            rank_sv_cutoff: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("fd_step", self.fd_step),
            ("fd_hessian_step", self.fd_hessian_step),
            ("ode_rel_tol", self.ode_rel_tol),
            ("ode_abs_tol", self.ode_abs_tol),
            ("opt_grad_tol", self.opt_grad_tol),
            ("rank_sv_cutoff", self.rank_sv_cutoff),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("tolerance {name} must be positive, got {value}")));
            }
        }
        if self.fd_step * self.fd_step <= f64::EPSILON {
            return Err(Error::Config(format!(
                "fd_step^2 = {:e} does not exceed machine epsilon",
                self.fd_step * self.fd_step
            )));
        }
        Ok(())
    }

    /// Apply a `KEY=VALUE` override, as accepted on the command line.
    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        let slot = match key {
            "fd_step" => &mut self.fd_step,
            "fd_hessian_step" => &mut self.fd_hessian_step,
            "ode_rel_tol" => &mut self.ode_rel_tol,
            "ode_abs_tol" => &mut self.ode_abs_tol,
            "opt_grad_tol" => &mut self.opt_grad_tol,
            "rank_sv_cutoff" => &mut self.rank_sv_cutoff,
            other => return Err(Error::Config(format!("unknown tolerance key `{other}`"))),
        };
        *slot = value;
        self.validate()
    }

    pub fn ode_options(&self) -> OdeOptions {
        OdeOptions {
            rel_tol: self.ode_rel_tol,
            abs_tol: self.ode_abs_tol,
            ..OdeOptions::default()
        }
    }

    /// Same tolerances with the integrator tightened by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            ode_rel_tol: self.ode_rel_tol * factor,
            ode_abs_tol: self.ode_abs_tol * factor,
            ..*self
        }
    }
}
