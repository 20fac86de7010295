//! Minkowski norms on a single vector space and the objects derived from
//! them: fundamental tensor, Cartan tensor, Legendre map, orthogonal cones
//! and quotient norms through linear surjections.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numkit::{
    fd_gradient, fd_hessian, minimize_smooth_with_gradient, pseudo_inverse, AffineConstraint, Tolerances,
};
use crate::{Matrix, Vector};

/// A positively homogeneous, strongly convex norm on `R^dim`.
pub trait MinkowskiNorm: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, v: &Vector) -> f64;

    /// Exact fundamental tensor, when the norm has one in closed form.
    fn closed_form_tensor(&self, _v: &Vector) -> Option<Matrix> {
        None
    }
}

impl<N: MinkowskiNorm + ?Sized> MinkowskiNorm for &N {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, v: &Vector) -> f64 {
        (**self).eval(v)
    }
    fn closed_form_tensor(&self, v: &Vector) -> Option<Matrix> {
        (**self).closed_form_tensor(v)
    }
}

impl<N: MinkowskiNorm + ?Sized> MinkowskiNorm for Box<N> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, v: &Vector) -> f64 {
        (**self).eval(v)
    }
    fn closed_form_tensor(&self, v: &Vector) -> Option<Matrix> {
        (**self).closed_form_tensor(v)
    }
}

/// `sqrt(vᵀ a v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticNorm {
    a: Matrix,
}

impl QuadraticNorm {
    pub fn new(a: Matrix) -> Result<Self> {
        if !a.is_square() || a.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite(format!(
                "{} x {} quadratic form",
                a.nrows(),
                a.ncols()
            )));
        }
        Ok(Self { a })
    }

    pub fn euclidean(n: usize) -> Self {
        Self {
            a: Matrix::identity(n, n),
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }
}

impl MinkowskiNorm for QuadraticNorm {
    fn dim(&self) -> usize {
        self.a.nrows()
    }
    fn eval(&self, v: &Vector) -> f64 {
        v.dot(&(&self.a * v)).max(0.0).sqrt()
    }
    fn closed_form_tensor(&self, _v: &Vector) -> Option<Matrix> {
        Some(self.a.clone())
    }
}

/// A norm given only by its evaluator; all derivatives are numerical.
pub struct FnNorm<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&Vector) -> f64 + Send + Sync> FnNorm<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&Vector) -> f64 + Send + Sync> MinkowskiNorm for FnNorm<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, v: &Vector) -> f64 {
        (self.f)(v)
    }
}

/// The reverse norm `v ↦ F(-v)`.
pub struct Reversed<N>(pub N);

impl<N: MinkowskiNorm> MinkowskiNorm for Reversed<N> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval(&self, v: &Vector) -> f64 {
        self.0.eval(&-v)
    }
    fn closed_form_tensor(&self, v: &Vector) -> Option<Matrix> {
        self.0.closed_form_tensor(&-v)
    }
}

fn nonzero(v: &Vector, what: &str) -> Result<f64> {
    let n = v.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::Domain(format!("{what} undefined at the zero section")));
    }
    Ok(n)
}

/// `g_v = ½ Hess(F²)(v)`. Uses the closed form when available, otherwise a
/// central-difference Hessian taken at `v/|v|` (g is 0-homogeneous).
pub fn fundamental_tensor<N: MinkowskiNorm + ?Sized>(norm: &N, v: &Vector, tol: &Tolerances) -> Result<Matrix> {
    let nv = nonzero(v, "fundamental tensor")?;
    if let Some(g) = norm.closed_form_tensor(v) {
        return Ok(g);
    }
    let u = v / nv;
    let f2 = |x: &Vector| {
        let f = norm.eval(x);
        0.5 * f * f
    };
    let g = fd_hessian(&f2, &u, tol.fd_hessian_step)?;
    if g.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite(format!(
            "fundamental tensor at {:?}",
            v.as_slice()
        )));
    }
    Ok(g)
}

/// `C_v(w1, w2, w3) = ½ d/dz g_{v + z w1}(w2, w3)` at `z = 0`.
pub fn cartan_contraction<N: MinkowskiNorm + ?Sized>(
    norm: &N,
    v: &Vector,
    w1: &Vector,
    w2: &Vector,
    w3: &Vector,
    tol: &Tolerances,
) -> Result<f64> {
    let nv = nonzero(v, "Cartan tensor")?;
    if norm.closed_form_tensor(v).is_some() {
        let h = 1e-4 * nv / w1.norm().max(f64::MIN_POSITIVE);
        let gp = fundamental_tensor(norm, &(v + w1 * h), tol)?;
        let gm = fundamental_tensor(norm, &(v - w1 * h), tol)?;
        return Ok(0.25 * (w2.dot(&((gp - gm) * w3))) / h);
    }
    // C = ¼ D³(F²)[w1, w2, w3]: eight-corner stencil at the unit direction, rescaled
    // by the (-1)-homogeneity of C.
    let u = v / nv;
    let h = 1e-3;
    let mut acc = 0.0;
    for mask in 0..8u8 {
        let s = |bit: u8| if mask & bit == 0 { 1.0 } else { -1.0 };
        let (s1, s2, s3) = (s(1), s(2), s(4));
        let x = &u + (w1 * s1 + w2 * s2 + w3 * s3) * h;
        let f = norm.eval(&x);
        if !f.is_finite() {
            return Err(Error::eval_at(&x));
        }
        acc += s1 * s2 * s3 * f * f;
    }
    Ok(0.25 * acc / (8.0 * h * h * h) / nv)
}

/// `v ↦ g_v(v, ·)`, returned as a coordinate covector.
pub fn legendre<N: MinkowskiNorm + ?Sized>(norm: &N, v: &Vector, tol: &Tolerances) -> Result<Vector> {
    let nv = nonzero(v, "Legendre transform")?;
    if let Some(g) = norm.closed_form_tensor(v) {
        return Ok(g * v);
    }
    // g_v v is the gradient of F²/2, which is 1-homogeneous.
    let u = v / nv;
    let f2 = |x: &Vector| {
        let f = norm.eval(x);
        0.5 * f * f
    };
    Ok(fd_gradient(&f2, &u, tol.fd_step)? * nv)
}

const NEWTON_CAP: usize = 100;

/// Solve `g_v(v, ·) = p` by damped Newton on `F(v)²/2 − p(v)`.
pub fn legendre_inverse<N: MinkowskiNorm + ?Sized>(norm: &N, p: &Vector, tol: &Tolerances) -> Result<Vector> {
    nonzero(p, "inverse Legendre transform")?;
    let phi = |v: &Vector| {
        let f = norm.eval(v);
        0.5 * f * f - p.dot(v)
    };
    // Riemannian proxy: freeze the tensor at p read as a vector.
    let g0 = fundamental_tensor(norm, p, tol)?;
    let mut v = g0
        .clone()
        .cholesky()
        .map(|c| c.solve(p))
        .ok_or_else(|| Error::NotPositiveDefinite("Legendre seed tensor".into()))?;
    let target = 1e-13 * (1.0 + p.norm());
    let mut residual = f64::INFINITY;
    for it in 0..NEWTON_CAP {
        let r = legendre(norm, &v, tol)? - p;
        residual = r.norm();
        if residual <= target {
            return Ok(v);
        }
        let g = fundamental_tensor(norm, &v, tol)?;
        let step = g
            .cholesky()
            .map(|c| c.solve(&r))
            .ok_or_else(|| Error::NotPositiveDefinite(format!("tensor at Newton iterate {it}")))?;
        let base = phi(&v);
        let mut damp = 1.0;
        let mut next = &v - &step * damp;
        for _ in 0..40 {
            if next.norm() > 0.0 && phi(&next) <= base + 1e-14 * base.abs().max(1.0) {
                break;
            }
            damp *= 0.5;
            next = &v - &step * damp;
        }
        if (&next - &v).norm() <= 1e-16 * v.norm() {
            // No further progress representable; accept if close enough.
            if residual <= 1e-9 * (1.0 + p.norm()) {
                return Ok(v);
            }
            break;
        }
        v = next;
    }
    let r = (legendre(norm, &v, tol)? - p).norm();
    if r <= 1e-9 * (1.0 + p.norm()) {
        return Ok(v);
    }
    Err(Error::Inversion {
        residual: residual.min(r),
        iterations: NEWTON_CAP,
    })
}

/// Unit vectors `u` (F(u) = 1) with `g_u(u, t) = 0` for every column `t` of
/// `frame`, found by Gauss–Newton from `k` random seeds and deduplicated.
/// Returned in lexicographic order.
pub fn orthogonal_cone<N, R>(norm: &N, frame: &Matrix, k: usize, rng: &mut R, tol: &Tolerances) -> Result<Vec<Vector>>
where
    N: MinkowskiNorm + ?Sized,
    R: Rng + ?Sized,
{
    let n = norm.dim();
    if frame.nrows() != n {
        return Err(Error::Domain(format!(
            "frame vectors have length {}, expected {n}",
            frame.nrows()
        )));
    }
    if crate::numkit::numeric_rank(frame, 1e-10) >= n {
        return Err(Error::Domain("subspace must have positive codimension".into()));
    }
    let mut found: Vec<Vector> = Vec::new();
    for _ in 0..k {
        let seed = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        if seed.norm() < 1e-8 {
            continue;
        }
        let Ok(u) = cone_newton(norm, frame, seed, tol) else {
            continue;
        };
        if !found.iter().any(|f| (f - &u).norm() <= 1e-6) {
            found.push(u);
        }
    }
    if found.is_empty() {
        return Err(Error::EmptyCone { seeds: k });
    }
    found.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .find(|(x, y)| (*x - *y).abs() > 1e-7)
            .map(|(x, y)| x.total_cmp(y))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(found)
}

/// Residual of the cone system at `u`: `(g_u(u, t_i))_i` followed by `F(u) − 1`.
fn cone_residual<N: MinkowskiNorm + ?Sized>(norm: &N, frame: &Matrix, u: &Vector, tol: &Tolerances) -> Result<Vector> {
    let l = legendre(norm, u, tol)?;
    let r = frame.ncols();
    let mut res = Vector::zeros(r + 1);
    for i in 0..r {
        res[i] = l.dot(&frame.column(i));
    }
    res[r] = norm.eval(u) - 1.0;
    Ok(res)
}

/// Projects a single seed onto the cone by minimum-norm Gauss–Newton steps.
pub fn cone_newton<N: MinkowskiNorm + ?Sized>(
    norm: &N,
    frame: &Matrix,
    seed: Vector,
    tol: &Tolerances,
) -> Result<Vector> {
    let mut u = &seed / norm.eval(&seed);
    let r = frame.ncols();
    for _ in 0..60 {
        let res = cone_residual(norm, frame, &u, tol)?;
        let ortho = res.rows(0, r).amax();
        if ortho <= 1e-11 && res[r].abs() <= 1e-12 {
            return Ok(u);
        }
        let g = fundamental_tensor(norm, &u, tol)?;
        let f = norm.eval(&u);
        let mut jac = Matrix::zeros(r + 1, u.len());
        for i in 0..r {
            jac.row_mut(i).copy_from(&(&g * frame.column(i)).transpose());
        }
        jac.row_mut(r).copy_from(&(&g * &u / f).transpose());
        let step = pseudo_inverse(&jac)? * &res;
        let mut next = &u - step;
        let fn_ = norm.eval(&next);
        if !(fn_.is_finite() && fn_ > 0.0) {
            return Err(Error::eval_at(&next));
        }
        next /= fn_;
        u = next;
    }
    let res = cone_residual(norm, frame, &u, tol)?;
    if res.rows(0, r).amax() <= 1e-8 && res[r].abs() <= 1e-10 {
        Ok(u)
    } else {
        Err(Error::NonConvergence {
            iterations: 60,
            best: u.iter().copied().collect(),
            value: res.amax(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuotientValue {
    pub value: f64,
    pub minimizer: Vector,
}

/// `inf { F(v) : P v = w }` together with its minimizer.
pub fn quotient_norm<N: MinkowskiNorm + ?Sized>(
    norm: &N,
    p: &Matrix,
    w: &Vector,
    tol: &Tolerances,
) -> Result<QuotientValue> {
    nonzero(w, "quotient norm")?;
    if p.ncols() != norm.dim() || p.nrows() != w.len() {
        return Err(Error::Domain(format!(
            "projection is {} x {}, norm dimension {}, target length {}",
            p.nrows(),
            p.ncols(),
            norm.dim(),
            w.len()
        )));
    }
    let constraint = AffineConstraint::new(p.clone(), w.clone())?;
    let x0 = pseudo_inverse(p)? * w;
    let grad = |v: &Vector| match legendre(norm, v, tol) {
        Ok(l) => l / norm.eval(v),
        Err(_) => Vector::from_element(v.len(), f64::NAN),
    };
    let inner = Tolerances {
        opt_grad_tol: tol.opt_grad_tol.min(1e-10),
        ..*tol
    };
    let m =
        minimize_smooth_with_gradient(|v| norm.eval(v), grad, &x0, Some(&constraint), &inner).map_err(|e| match e {
            Error::Diverged { .. } => Error::UnboundedFiber,
            Error::InvalidConstraint(_) => Error::UnboundedFiber,
            other => other,
        })?;
    Ok(QuotientValue {
        value: m.value,
        minimizer: m.x,
    })
}

/// The norm `w ↦ inf { F(v) : P v = w }` on the target space.
pub struct QuotientNorm<N> {
    pub total: N,
    pub projection: Matrix,
    pub tol: Tolerances,
}

impl<N: MinkowskiNorm> MinkowskiNorm for QuotientNorm<N> {
    fn dim(&self) -> usize {
        self.projection.nrows()
    }
    fn eval(&self, w: &Vector) -> f64 {
        if w.norm() == 0.0 {
            return 0.0;
        }
        quotient_norm(&self.total, &self.projection, w, &self.tol)
            .map(|q| q.value)
            .unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormAudit {
    pub samples: usize,
    pub max_homogeneity_error: f64,
    pub max_gvv_error: f64,
    pub min_tensor_eigenvalue: f64,
}

impl NormAudit {
    pub fn passed(&self) -> bool {
        self.max_homogeneity_error <= 1e-10 && self.max_gvv_error <= 1e-8 && self.min_tensor_eigenvalue > 0.0
    }
}

/// Samples homogeneity, `g_v(v,v) = F(v)²` and positive definiteness.
pub fn audit_norm<N, R>(norm: &N, samples: usize, rng: &mut R, tol: &Tolerances) -> Result<NormAudit>
where
    N: MinkowskiNorm + ?Sized,
    R: Rng + ?Sized,
{
    let n = norm.dim();
    let mut audit = NormAudit {
        samples,
        max_homogeneity_error: 0.0,
        max_gvv_error: 0.0,
        min_tensor_eigenvalue: f64::INFINITY,
    };
    for _ in 0..samples {
        let v = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let lam: f64 = rng.gen_range(0.01..10.0);
        let f = norm.eval(&v);
        let hom = (norm.eval(&(&v * lam)) - lam * f).abs() / (lam * f);
        let g = fundamental_tensor(norm, &v, tol)?;
        let gvv = (v.dot(&(&g * &v)) - f * f).abs() / (f * f);
        let eig = g.symmetric_eigenvalues().min();
        audit.max_homogeneity_error = audit.max_homogeneity_error.max(hom);
        audit.max_gvv_error = audit.max_gvv_error.max(gvv);
        audit.min_tensor_eigenvalue = audit.min_tensor_eigenvalue.min(eig);
    }
    Ok(audit)
}
