//! Randers norms `Z = α + β` and their Zermelo description `(h, W)`.

use crate::error::{Error, Result};
use crate::minkowski::MinkowskiNorm;
use crate::{Matrix, Vector};

/// Strictness margin on `h(W,W) < 1` and `|β|_a < 1`.
pub const MARGIN: f64 = 1e-10;

fn check_spd(m: &Matrix, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::NotPositiveDefinite(format!(
            "{what} is {} x {}",
            m.nrows(),
            m.ncols()
        )));
    }
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 * m.amax().max(1.0) || m.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite(what.to_string()));
    }
    Ok(())
}

/// Riemannian metric `h` plus wind `W` with `h(W,W) < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZermeloData {
    pub h: Matrix,
    pub w: Vector,
}

impl ZermeloData {
    pub fn new(h: Matrix, w: Vector) -> Result<Self> {
        check_spd(&h, "metric h")?;
        if w.len() != h.nrows() {
            return Err(Error::Domain(format!(
                "wind of length {} for {}-dimensional metric",
                w.len(),
                h.nrows()
            )));
        }
        let norm_sq = w.dot(&(&h * &w));
        if !(norm_sq <= 1.0 - MARGIN) {
            return Err(Error::InvalidWind { norm_sq, at: None });
        }
        Ok(Self { h, w })
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    /// `λ = 1 − h(W,W)`.
    pub fn lambda(&self) -> f64 {
        1.0 - self.w.dot(&(&self.h * &self.w))
    }

    /// The same metric with the wind negated; its norm is `v ↦ Z(−v)`.
    pub fn reversed(&self) -> Self {
        Self {
            h: self.h.clone(),
            w: -&self.w,
        }
    }

    pub fn to_randers(&self) -> Result<RandersData> {
        zermelo_to_randers(self)
    }

    /// Solves `h(v/Z − W, v/Z − W) = 1` for `Z` directly.
    pub fn norm(&self, v: &Vector) -> f64 {
        let hv = &self.h * v;
        let vv = v.dot(&hv);
        if vv == 0.0 {
            return 0.0;
        }
        let vw = hv.dot(&self.w);
        let lam = self.lambda();
        vv / (vw + (vw * vw + lam * vv).sqrt())
    }
}

/// Riemannian metric `a` plus one-form `β` with `|β|_a < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandersData {
    pub a: Matrix,
    pub beta: Vector,
}

impl RandersData {
    pub fn new(a: Matrix, beta: Vector) -> Result<Self> {
        check_spd(&a, "metric a")?;
        if beta.len() != a.nrows() {
            return Err(Error::Domain(format!(
                "one-form of length {} for {}-dimensional metric",
                beta.len(),
                a.nrows()
            )));
        }
        let sharp = a
            .clone()
            .cholesky()
            .map(|c| c.solve(&beta))
            .ok_or_else(|| Error::NotPositiveDefinite("metric a".into()))?;
        let norm_sq = beta.dot(&sharp);
        if !(norm_sq <= 1.0 - MARGIN) {
            return Err(Error::InvalidForm { norm_sq });
        }
        Ok(Self { a, beta })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// `β⃗`, the `a`-dual vector of `β`.
    pub fn beta_sharp(&self) -> Vector {
        self.a
            .clone()
            .cholesky()
            .map(|c| c.solve(&self.beta))
            .expect("metric a is positive definite")
    }

    /// `μ = 1 − a(β⃗, β⃗)`.
    pub fn mu(&self) -> f64 {
        1.0 - self.beta.dot(&self.beta_sharp())
    }

    pub fn alpha(&self, v: &Vector) -> f64 {
        v.dot(&(&self.a * v)).max(0.0).sqrt()
    }

    pub fn norm(&self, v: &Vector) -> f64 {
        self.alpha(v) + self.beta.dot(v)
    }

    pub fn to_zermelo(&self) -> Result<ZermeloData> {
        randers_to_zermelo(self)
    }
}

pub fn zermelo_to_randers(zd: &ZermeloData) -> Result<RandersData> {
    let lam = zd.lambda();
    if !(lam >= MARGIN) {
        return Err(Error::InvalidWind {
            norm_sq: 1.0 - lam,
            at: None,
        });
    }
    let hw = &zd.h * &zd.w;
    let a = (&zd.h * lam + &hw * hw.transpose()) / (lam * lam);
    let beta = -hw / lam;
    Ok(RandersData { a: symmetrize(a), beta })
}

pub fn randers_to_zermelo(rd: &RandersData) -> Result<ZermeloData> {
    let sharp = rd.beta_sharp();
    let mu = 1.0 - rd.beta.dot(&sharp);
    if !(mu >= MARGIN) {
        return Err(Error::InvalidForm { norm_sq: 1.0 - mu });
    }
    // a(β⃗, ·) is β itself.
    let h = (&rd.a - &rd.beta * rd.beta.transpose()) * mu;
    Ok(ZermeloData {
        h: symmetrize(h),
        w: -sharp / mu,
    })
}

fn symmetrize(m: Matrix) -> Matrix {
    (&m + m.transpose()) * 0.5
}

/// Closed-form fundamental tensor
/// `g_v(w,u) = Z/α [a(w,u) − a(v,w)a(v,u)/α²] + (a(v,w)/α + β(w))(a(v,u)/α + β(u))`.
pub fn randers_fundamental_tensor(rd: &RandersData, v: &Vector) -> Result<Matrix> {
    let alpha = rd.alpha(v);
    if alpha == 0.0 {
        return Err(Error::Domain("fundamental tensor undefined at the zero section".into()));
    }
    let av = &rd.a * v;
    let z = alpha + rd.beta.dot(v);
    let l = &av / alpha + &rd.beta;
    Ok((&rd.a - &av * av.transpose() / (alpha * alpha)) * (z / alpha) + &l * l.transpose())
}

/// `g_v(v, u)` through both closed identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GvvInner {
    /// `Z(v) (a(u,v)/α(v) + β(u))`.
    pub randers: f64,
    /// `Z(v)/(μ α(v)) · h(v − Z(v) W, u)`.
    pub zermelo: f64,
}

pub fn gvv_inner(rd: &RandersData, v: &Vector, u: &Vector) -> Result<GvvInner> {
    let alpha = rd.alpha(v);
    if alpha == 0.0 {
        return Err(Error::Domain("g_v(v, ·) undefined at the zero section".into()));
    }
    let z = rd.norm(v);
    let zd = randers_to_zermelo(rd)?;
    let randers = z * (u.dot(&(&rd.a * v)) / alpha + rd.beta.dot(u));
    let shifted = v - &zd.w * z;
    let zermelo = z / (rd.mu() * alpha) * shifted.dot(&(&zd.h * u));
    Ok(GvvInner { randers, zermelo })
}

impl MinkowskiNorm for RandersData {
    fn dim(&self) -> usize {
        self.a.nrows()
    }
    fn eval(&self, v: &Vector) -> f64 {
        self.norm(v)
    }
    fn closed_form_tensor(&self, v: &Vector) -> Option<Matrix> {
        randers_fundamental_tensor(self, v).ok()
    }
}

impl MinkowskiNorm for ZermeloData {
    fn dim(&self) -> usize {
        self.h.nrows()
    }
    fn eval(&self, v: &Vector) -> f64 {
        self.norm(v)
    }
    fn closed_form_tensor(&self, v: &Vector) -> Option<Matrix> {
        zermelo_to_randers(self)
            .ok()
            .and_then(|rd| randers_fundamental_tensor(&rd, v).ok())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsometryPoint {
    pub point: Vec<f64>,
    /// Max entrywise `|dψᵀ h₂ dψ − h₁|`.
    pub metric_error: f64,
    /// `|dψ W₁ − W₂|`.
    pub wind_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsometryReport {
    pub points: Vec<IsometryPoint>,
}

impl IsometryReport {
    pub fn passed(&self) -> bool {
        self.points.iter().all(|p| p.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &IsometryPoint> {
        self.points.iter().filter(|p| !p.passed)
    }
}

/// Checks `ψ*h₂ = h₁` and `dψ(W₁) = W₂` at each sample point.
pub fn verify_isometry<P, J, Z1, Z2>(psi: P, dpsi: J, zd1: Z1, zd2: Z2, pts: &[Vector]) -> Result<IsometryReport>
where
    P: Fn(&Vector) -> Vector,
    J: Fn(&Vector) -> Matrix,
    Z1: Fn(&Vector) -> Result<ZermeloData>,
    Z2: Fn(&Vector) -> Result<ZermeloData>,
{
    let mut points = Vec::with_capacity(pts.len());
    for p in pts {
        let q = psi(p);
        let j = dpsi(p);
        let d1 = zd1(p)?;
        let d2 = zd2(&q)?;
        let metric_error = (j.transpose() * &d2.h * &j - &d1.h).amax();
        let wind_error = (&j * &d1.w - &d2.w).norm();
        points.push(IsometryPoint {
            point: p.iter().copied().collect(),
            metric_error,
            wind_error,
            passed: metric_error <= 1e-8 && wind_error <= 1e-8,
        });
    }
    Ok(IsometryReport { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minkowski::{cartan_contraction, fundamental_tensor, legendre, orthogonal_cone, quotient_norm};
    use crate::numkit::{fd_hessian, Tolerances};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_vec(xs.to_vec())
    }

    fn half_wind() -> ZermeloData {
        ZermeloData::new(Matrix::identity(2, 2), v(&[0.5, 0.0])).unwrap()
    }

    #[test]
    fn zero_wind_is_riemannian() {
        let h = Matrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let rd = ZermeloData::new(h.clone(), Vector::zeros(2))
            .unwrap()
            .to_randers()
            .unwrap();
        assert_eq!(rd.a, h);
        assert_eq!(rd.beta, Vector::zeros(2));
        let zd = RandersData::new(h.clone(), Vector::zeros(2))
            .unwrap()
            .to_zermelo()
            .unwrap();
        assert_eq!(zd.h, h);
        assert_eq!(zd.w, Vector::zeros(2));
    }

    #[test]
    fn half_wind_randers_data() {
        let rd = half_wind().to_randers().unwrap();
        let a = Matrix::from_row_slice(2, 2, &[16.0 / 9.0, 0.0, 0.0, 4.0 / 3.0]);
        assert!((&rd.a - a).amax() < 1e-14);
        assert!((&rd.beta - v(&[-2.0 / 3.0, 0.0])).amax() < 1e-14);
        let back = rd.to_zermelo().unwrap();
        assert!((back.h - Matrix::identity(2, 2)).amax() < 1e-12);
        assert!((back.w - v(&[0.5, 0.0])).amax() < 1e-12);
    }

    #[test]
    fn half_wind_norm_values() {
        let zd = half_wind();
        let rd = zd.to_randers().unwrap();
        for n in [&rd as &dyn MinkowskiNorm, &zd] {
            assert!((n.eval(&v(&[1.0, 0.0])) - 2.0 / 3.0).abs() < 1e-14);
            assert!((n.eval(&v(&[-1.0, 0.0])) - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn one_dimensional_zermelo() {
        let zd = ZermeloData::new(Matrix::from_element(1, 1, 1.0), v(&[0.5])).unwrap();
        assert!((zd.norm(&v(&[1.0])) - 2.0 / 3.0).abs() < 1e-14);
        assert!((zd.norm(&v(&[-1.0])) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn wind_and_form_bounds() {
        let h = Matrix::identity(2, 2);
        assert!(matches!(
            ZermeloData::new(h.clone(), v(&[1.0, 0.0])),
            Err(Error::InvalidWind { .. })
        ));
        assert!(matches!(
            RandersData::new(h, v(&[0.0, 1.2])),
            Err(Error::InvalidForm { .. })
        ));
    }

    #[test]
    fn closed_tensor_matches_fd_hessian() {
        let rd = half_wind().to_randers().unwrap();
        let x = v(&[1.0, 0.0]);
        let g = randers_fundamental_tensor(&rd, &x).unwrap();
        let f2 = |y: &Vector| 0.5 * rd.norm(y).powi(2);
        let fd = fd_hessian(&f2, &x, 1e-4).unwrap();
        assert!((&g - fd).amax() < 1e-6 * g.amax());
        assert!((x.dot(&(&g * &x)) - rd.norm(&x).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn gvv_identities_agree() {
        let rd = half_wind().to_randers().unwrap();
        let i = gvv_inner(&rd, &v(&[0.3, -1.1]), &v(&[0.7, 0.2])).unwrap();
        assert!((i.randers - i.zermelo).abs() < 1e-12);
    }

    #[test]
    fn legendre_matches_closed_form() {
        let rd = half_wind().to_randers().unwrap();
        let x = v(&[1.0, 0.0]);
        let l = legendre(&rd, &x, &Tolerances::default()).unwrap();
        let z = rd.norm(&x);
        let expect = (&rd.a * &x / rd.alpha(&x) + &rd.beta) * z;
        assert!((l - expect).amax() < 1e-12);
    }

    #[test]
    fn worked_cone_and_quotient() {
        let tol = Tolerances::default();
        let rd = half_wind().to_randers().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let frame = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let cone = orthogonal_cone(&rd, &frame, 16, &mut rng, &tol).unwrap();
        assert_eq!(cone.len(), 2, "{cone:?}");
        assert!((&cone[0] - v(&[0.5, -1.0])).norm() < 1e-8, "{cone:?}");
        assert!((&cone[1] - v(&[0.5, 1.0])).norm() < 1e-8);
        let p = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let plus = quotient_norm(&rd, &p, &v(&[1.0]), &tol).unwrap();
        let minus = quotient_norm(&rd, &p, &v(&[-1.0]), &tol).unwrap();
        assert!((plus.value - 2.0 / 3.0).abs() < 1e-8);
        assert!((minus.value - 2.0).abs() < 1e-8);
        // Horizontality of the minimizer.
        let g = fundamental_tensor(&rd, &plus.minimizer, &tol).unwrap();
        assert!((plus.minimizer.dot(&(&g * v(&[0.0, 1.0])))).abs() < 1e-7);
    }

    #[test]
    fn cartan_closed_vs_third_derivative() {
        let tol = Tolerances::default();
        let rd = half_wind().to_randers().unwrap();
        // At v = (1,0) the reflection y ↦ −y fixes v and Z, so C_v(e2,e2,e2) = 0.
        let e = v(&[0.0, 1.0]);
        let sym = cartan_contraction(&rd, &v(&[1.0, 0.0]), &e, &e, &e, &tol).unwrap();
        assert!(sym.abs() < 1e-8);
        let x = v(&[1.0, 1.0]);
        let c = cartan_contraction(&rd, &x, &e, &e, &e, &tol).unwrap();
        // Oracle: ¼ d³/ds³ Z(x + s e)² by a five-point stencil.
        let f = |s: f64| rd.norm(&(&x + &e * s)).powi(2);
        let h = 1e-2;
        let d3 = (f(2.0 * h) - 2.0 * f(h) + 2.0 * f(-h) - f(-2.0 * h)) / (2.0 * h * h * h);
        assert!(c.abs() > 1e-3);
        assert!((c - 0.25 * d3).abs() < 1e-4 * c.abs().max(1.0), "{c} vs {}", 0.25 * d3);
    }

    #[test]
    fn isometry_rotation() {
        let rot = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let psi = |p: &Vector| &rot * p;
        let dpsi = |_: &Vector| rot.clone();
        let swirl = |p: &Vector| ZermeloData::new(Matrix::identity(2, 2), v(&[-p[1], p[0]]) * 0.3);
        let pts = vec![v(&[0.5, 0.1]), v(&[-0.2, 0.9]), v(&[0.0, 0.0])];
        assert!(verify_isometry(psi, dpsi, swirl, swirl, &pts).unwrap().passed());
        let constant = |_: &Vector| Ok(half_wind());
        let report = verify_isometry(psi, dpsi, constant, constant, &pts).unwrap();
        assert!(!report.passed());
        assert!(report
            .failures()
            .all(|p| p.metric_error < 1e-12 && (p.wind_error - 0.5f64.sqrt()).abs() < 1e-12));
    }
}
