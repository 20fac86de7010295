use crate::error::{Error, Result};
use crate::{Matrix, Vector};

use super::{fd_gradient, fd_jacobian, null_space, pseudo_inverse, Tolerances};

/// The affine set `{x : a x = b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineConstraint {
    pub a: Matrix,
    pub b: Vector,
}

impl AffineConstraint {
    pub fn new(a: Matrix, b: Vector) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::InvalidConstraint(format!(
                "{} rows but right-hand side of length {}",
                a.nrows(),
                b.len()
            )));
        }
        Ok(Self { a, b })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vector,
    pub value: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

const MAX_ITER: usize = 500;
const ESCAPE: f64 = 1e8;

/// Reduced coordinates `x = base + basis * z` of the feasible set.
struct Reduction {
    base: Vector,
    basis: Matrix,
}

impl Reduction {
    fn new(x0: &Vector, constraint: Option<&AffineConstraint>) -> Result<Self> {
        let n = x0.len();
        let Some(c) = constraint else {
            return Ok(Self {
                base: x0.clone(),
                basis: Matrix::identity(n, n),
            });
        };
        if c.a.ncols() != n {
            return Err(Error::InvalidConstraint(format!(
                "constraint has {} columns, point has dimension {n}",
                c.a.ncols()
            )));
        }
        let pinv = pseudo_inverse(&c.a)?;
        let base = x0 - &pinv * (&c.a * x0 - &c.b);
        let miss = (&c.a * &base - &c.b).norm();
        if miss > 1e-9 * (1.0 + c.b.norm()) {
            return Err(Error::InvalidConstraint(format!(
                "inconsistent system (residual {miss:e})"
            )));
        }
        Ok(Self {
            base,
            basis: null_space(&c.a, 1e-12),
        })
    }

    fn lift(&self, z: &Vector) -> Vector {
        &self.base + &self.basis * z
    }
}

/// Single-start BFGS with finite-difference gradients, optionally restricted
/// to an affine subspace.
pub fn minimize_smooth<F>(f: F, x0: &Vector, constraint: Option<&AffineConstraint>, tol: &Tolerances) -> Result<Minimum>
where
    F: Fn(&Vector) -> f64,
{
    let red = Reduction::new(x0, constraint)?;
    let g = |z: &Vector| f(&red.lift(z));
    let grad = |z: &Vector| fd_gradient(&g, z, tol.fd_step);
    bfgs(&red, &g, &grad, tol)
}

/// As [`minimize_smooth`] with an analytic gradient of `f` in ambient coordinates.
pub fn minimize_smooth_with_gradient<F, G>(
    f: F,
    grad: G,
    x0: &Vector,
    constraint: Option<&AffineConstraint>,
    tol: &Tolerances,
) -> Result<Minimum>
where
    F: Fn(&Vector) -> f64,
    G: Fn(&Vector) -> Vector,
{
    let red = Reduction::new(x0, constraint)?;
    let g = |z: &Vector| f(&red.lift(z));
    let gz = |z: &Vector| {
        let x = red.lift(z);
        let gr = red.basis.transpose() * grad(&x);
        if gr.iter().all(|v| v.is_finite()) {
            Ok(gr)
        } else {
            Err(Error::eval_at(&x))
        }
    };
    bfgs(&red, &g, &gz, tol)
}

fn bfgs<F, G>(red: &Reduction, f: &F, grad: &G, tol: &Tolerances) -> Result<Minimum>
where
    F: Fn(&Vector) -> f64,
    G: Fn(&Vector) -> Result<Vector>,
{
    let m = red.basis.ncols();
    let mut z = Vector::zeros(m);
    let mut fz = f(&z);
    if !fz.is_finite() {
        return Err(Error::eval_at(&red.lift(&z)));
    }
    if m == 0 {
        return Ok(Minimum {
            x: red.lift(&z),
            value: fz,
            iterations: 0,
            grad_norm: 0.0,
        });
    }
    let mut gz = grad(&z)?;
    let mut hinv = Matrix::identity(m, m);
    let mut fresh = true;
    for it in 0..MAX_ITER {
        let gn = gz.norm();
        if gn <= tol.opt_grad_tol * fz.abs().max(1.0) {
            return Ok(Minimum {
                x: red.lift(&z),
                value: fz,
                iterations: it,
                grad_norm: gn,
            });
        }
        let mut dir = -(&hinv * &gz);
        let mut slope = gz.dot(&dir);
        if slope >= 0.0 {
            hinv = Matrix::identity(m, m);
            dir = -gz.clone();
            slope = -gn * gn;
        }
        // Armijo backtracking with a slack that absorbs rounding in f.
        let slack = 8.0 * f64::EPSILON * fz.abs().max(1.0);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let zt = &z + &dir * step;
            let ft = f(&zt);
            if ft.is_finite() && ft <= fz + 1e-4 * step * slope + slack {
                accepted = Some((zt, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((zn, fnew)) = accepted else {
            if !fresh {
                hinv = Matrix::identity(m, m);
                fresh = true;
                continue;
            }
            if gn <= 1e-5 * fz.abs().max(1.0) {
                // Stuck at the rounding floor of f: the iterate is as good as it gets.
                return Ok(Minimum {
                    x: red.lift(&z),
                    value: fz,
                    iterations: it,
                    grad_norm: gn,
                });
            }
            return Err(Error::NonConvergence {
                iterations: it,
                best: red.lift(&z).iter().copied().collect(),
                value: fz,
            });
        };
        if zn.norm() > ESCAPE {
            return Err(Error::Diverged { norm: zn.norm() });
        }
        let gnew = grad(&zn)?;
        let s = &zn - &z;
        let y = &gnew - &gz;
        let sy = s.dot(&y);
        if sy > 1e-14 * s.norm() * y.norm() {
            if fresh {
                // Initial scaling of the inverse Hessian.
                hinv = Matrix::identity(m, m) * (sy / y.dot(&y));
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            hinv +=
                (&s * s.transpose()) * (rho * (1.0 + rho * yhy)) - (&hy * s.transpose() + &s * hy.transpose()) * rho;
            fresh = false;
        }
        z = zn;
        fz = fnew;
        gz = gnew;
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITER,
        best: red.lift(&z).iter().copied().collect(),
        value: fz,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeastSquaresOptions {
    pub max_iter: usize,
    /// Stop once `|r| <= residual_tol`.
    pub residual_tol: f64,
    pub fd_step: f64,
}

impl Default for LeastSquaresOptions {
    fn default() -> Self {
        Self {
            max_iter: 60,
            residual_tol: 1e-11,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresSolution {
    pub x: Vector,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Levenberg–Marquardt on `r(x) = 0` with a central-difference Jacobian.
/// Trial points where `r` fails are treated as rejected steps.
pub fn least_squares<R>(r: R, x0: &Vector, opts: &LeastSquaresOptions) -> Result<LeastSquaresSolution>
where
    R: Fn(&Vector) -> Result<Vector>,
{
    let mut x = x0.clone();
    let mut res = r(&x)?;
    let mut cost = res.norm_squared();
    let mut lambda = 1e-3;
    let n = x.len();
    for it in 0..opts.max_iter {
        if cost.sqrt() <= opts.residual_tol {
            return Ok(LeastSquaresSolution {
                x,
                residual_norm: cost.sqrt(),
                iterations: it,
                converged: true,
            });
        }
        let jac = fd_jacobian(&r, &x, opts.fd_step)?;
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &res;
        let mut improved = false;
        for _ in 0..30 {
            let mut lhs = jtj.clone();
            for i in 0..n {
                lhs[(i, i)] += lambda * (jtj[(i, i)].max(1e-12));
            }
            let Some(step) = lhs.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let xt = &x + &step;
            match r(&xt) {
                Ok(rt) if rt.iter().all(|v| v.is_finite()) && rt.norm_squared() < cost => {
                    let small_step = step.norm() <= 1e-15 * (1.0 + x.norm());
                    x = xt;
                    res = rt;
                    cost = res.norm_squared();
                    lambda = (lambda * 0.3).max(1e-12);
                    improved = !small_step;
                    break;
                }
                _ => lambda *= 10.0,
            }
            if lambda > 1e16 {
                break;
            }
        }
        if !improved {
            return Ok(LeastSquaresSolution {
                x,
                residual_norm: cost.sqrt(),
                iterations: it,
                converged: cost.sqrt() <= opts.residual_tol,
            });
        }
    }
    Ok(LeastSquaresSolution {
        residual_norm: cost.sqrt(),
        converged: cost.sqrt() <= opts.residual_tol,
        x,
        iterations: opts.max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_vec(xs.to_vec())
    }

    #[test]
    fn shifted_paraboloid() {
        let c = v(&[1.0, 2.0]);
        let m = minimize_smooth(
            |x| (x - &c).norm_squared(),
            &v(&[0.0, 0.0]),
            None,
            &Tolerances::default(),
        )
        .unwrap();
        assert!((m.x - c).norm() < 1e-8);
        assert!(m.value < 1e-15);
    }

    #[test]
    fn constrained_norm() {
        let con = AffineConstraint::new(Matrix::from_row_slice(1, 2, &[1.0, 0.0]), v(&[1.0])).unwrap();
        let m = minimize_smooth(
            |x| x.norm_squared(),
            &v(&[0.0, 3.0]),
            Some(&con),
            &Tolerances::default(),
        )
        .unwrap();
        assert!((m.x - v(&[1.0, 0.0])).norm() < 1e-8);
        assert!((m.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &Vector| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = minimize_smooth(f, &v(&[-1.2, 1.0]), None, &Tolerances::default()).unwrap();
        assert!((&m.x - v(&[1.0, 1.0])).norm() < 1e-5, "{:?}", m.x);
    }

    #[test]
    fn deterministic_iterates() {
        let f = |x: &Vector| (x[0] - 0.3).powi(4) + x[0] * x[1] + x[1] * x[1];
        let a = minimize_smooth(f, &v(&[2.0, -1.0]), None, &Tolerances::default()).unwrap();
        let b = minimize_smooth(f, &v(&[2.0, -1.0]), None, &Tolerances::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unbounded_below_diverges() {
        let err = minimize_smooth(|x| x[0], &v(&[0.0]), None, &Tolerances::default()).unwrap_err();
        assert!(
            matches!(err, Error::Diverged { .. } | Error::NonConvergence { .. }),
            "{err:?}"
        );
    }

    #[test]
    fn inconsistent_constraint_rejected() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let con = AffineConstraint::new(a, v(&[0.0, 1.0])).unwrap();
        assert!(matches!(
            minimize_smooth(
                |x| x.norm_squared(),
                &v(&[0.0, 0.0]),
                Some(&con),
                &Tolerances::default()
            ),
            Err(Error::InvalidConstraint(_))
        ));
    }

    #[test]
    fn lm_solves_circle_line_intersection() {
        let r = |x: &Vector| Ok(v(&[x[0] * x[0] + x[1] * x[1] - 1.0, x[0] - x[1]]));
        let s = least_squares(r, &v(&[1.0, 0.2]), &LeastSquaresOptions::default()).unwrap();
        assert!(s.converged);
        let h = 0.5f64.sqrt();
        assert!((s.x - v(&[h, h])).norm() < 1e-10);
    }
}
