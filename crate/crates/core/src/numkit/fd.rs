use crate::error::{Error, Result};
use crate::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq)]
pub enum Derivative {
    Gradient(Vector),
    Hessian(Matrix),
}

fn eval<F: Fn(&Vector) -> f64>(f: &F, x: &Vector) -> Result<f64> {
    let y = f(x);
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::eval_at(x))
    }
}

/// Central-difference gradient with fixed step `h`.
pub fn fd_gradient<F: Fn(&Vector) -> f64>(f: &F, x: &Vector, h: f64) -> Result<Vector> {
    let n = x.len();
    let mut g = Vector::zeros(n);
    let mut xp = x.clone();
    for i in 0..n {
        xp[i] = x[i] + h;
        let fp = eval(f, &xp)?;
        xp[i] = x[i] - h;
        let fm = eval(f, &xp)?;
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

/// Symmetric central-difference Hessian. Diagonal entries use the `±2h`
/// stencil so that every evaluation lies within `2h` of `x`.
pub fn fd_hessian<F: Fn(&Vector) -> f64>(f: &F, x: &Vector, h: f64) -> Result<Matrix> {
    let n = x.len();
    let f0 = eval(f, x)?;
    let mut hess = Matrix::zeros(n, n);
    let mut xs = x.clone();
    for i in 0..n {
        xs[i] = x[i] + 2.0 * h;
        let fpp = eval(f, &xs)?;
        xs[i] = x[i] - 2.0 * h;
        let fmm = eval(f, &xs)?;
        xs[i] = x[i];
        hess[(i, i)] = (fpp - 2.0 * f0 + fmm) / (4.0 * h * h);
        for j in (i + 1)..n {
            let mut corner = |si: f64, sj: f64| -> Result<f64> {
                xs[i] = x[i] + si * h;
                xs[j] = x[j] + sj * h;
                let v = eval(f, &xs);
                xs[i] = x[i];
                xs[j] = x[j];
                v
            };
            let fpp = corner(1.0, 1.0)?;
            let fpm = corner(1.0, -1.0)?;
            let fmp = corner(-1.0, 1.0)?;
            let fmm = corner(-1.0, -1.0)?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok((&hess + hess.transpose()) * 0.5)
}

/// Central-difference Jacobian of a vector map (rows = outputs).
pub fn fd_jacobian<F>(f: &F, x: &Vector, h: f64) -> Result<Matrix>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let n = x.len();
    let mut xp = x.clone();
    let mut cols: Vec<Vector> = Vec::with_capacity(n);
    for i in 0..n {
        xp[i] = x[i] + h;
        let fp = f(&xp)?;
        xp[i] = x[i] - h;
        let fm = f(&xp)?;
        xp[i] = x[i];
        if fp.iter().chain(fm.iter()).any(|v| !v.is_finite()) {
            return Err(Error::eval_at(&xp));
        }
        cols.push((fp - fm) / (2.0 * h));
    }
    let m = cols.first().map(|c| c.len()).unwrap_or(0);
    Ok(Matrix::from_fn(m, n, |r, c| cols[c][r]))
}

/// Gradient (`order == 1`) or Hessian (`order == 2`) by central differences.
pub fn fd_derivative<F: Fn(&Vector) -> f64>(
    f: &F,
    x: &Vector,
    order: u8,
    tol: &super::Tolerances,
) -> Result<Derivative> {
    match order {
        1 => fd_gradient(f, x, tol.fd_step).map(Derivative::Gradient),
        2 => fd_hessian(f, x, tol.fd_hessian_step).map(Derivative::Hessian),
        o => Err(Error::Domain(format!(
            "finite-difference order must be 1 or 2, got {o}"
        ))),
    }
}
