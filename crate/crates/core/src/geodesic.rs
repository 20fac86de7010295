//! Geodesics of `Z` on a scene: the initial-value problem, exponential and
//! endpoint maps, shooting distances (forward and backward), and the
//! navigation construction from the flow of the wind.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::manifold::{
    flow_with_jacobian, homothety_constant, integrate_on_scene, ChartPoint, Scene, SceneKind, ScenePath,
    SubmanifoldPatch,
};
use crate::minkowski::{cone_newton, legendre};
use crate::numkit::{fd_gradient, least_squares, numeric_rank_scaled, LeastSquaresOptions, Tolerances};
use crate::randers::randers_fundamental_tensor;
use crate::report::num;
use crate::{Matrix, Vector};

/// Homothety residual below which the navigation construction applies.
pub const HOMOTHETY_THRESHOLD: f64 = 1e-8;

/// Acceleration of the Euler–Lagrange system of `L = Z²/2` in chart
/// coordinates: `g_v ẍ = ∂_x L − D_x(∂_v L)[v]`.
pub fn spray(scene: &Scene, p: &ChartPoint, v: &Vector, tol: &Tolerances) -> Result<Vector> {
    let vn = v.norm();
    if vn == 0.0 {
        return Ok(Vector::zeros(v.len()));
    }
    let chart = p.chart;
    let h = tol.fd_step;
    let zd_at = |x: &Vector| scene.zermelo_at(&ChartPoint::new(chart, x.clone()));
    let lag = |x: &Vector| match zd_at(x) {
        Ok(zd) => 0.5 * zd.norm(v).powi(2),
        Err(_) => f64::NAN,
    };
    let dx_l = fd_gradient(&lag, &p.x, h)?;
    let momentum = |x: &Vector| -> Result<Vector> {
        let rd = zd_at(x)?.to_randers()?;
        Ok(randers_fundamental_tensor(&rd, v)? * v)
    };
    let e = v / vn;
    let dmom = (momentum(&(&p.x + &e * h))? - momentum(&(&p.x - &e * h))?) * (vn / (2.0 * h));
    let g = randers_fundamental_tensor(&zd_at(&p.x)?.to_randers()?, v)?;
    g.cholesky()
        .map(|c| c.solve(&(dx_l - dmom)))
        .ok_or_else(|| Error::Degeneracy {
            at: scene.ambient(p).iter().copied().collect(),
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub t: f64,
    pub point: ChartPoint,
    /// Velocity in the chart of `point`.
    pub velocity: Vector,
    pub ambient: Vector,
    pub ambient_velocity: Vector,
    /// `Z(γ'(t))`.
    pub speed: f64,
}

/// A sampled geodesic with its diagnostics.
#[derive(Debug, Clone)]
pub struct GeodesicPath {
    pub samples: Vec<PathSample>,
    /// Max defect of the geodesic equation over interior samples.
    pub residual: f64,
    dense: Option<ScenePath>,
}

impl GeodesicPath {
    pub fn speed_profile(&self) -> Vec<(f64, f64)> {
        self.samples.iter().map(|s| (s.t, s.speed)).collect()
    }

    /// `max_t |Z(γ'(t)) − Z(γ'(0))|`.
    pub fn speed_drift(&self) -> f64 {
        let s0 = self.samples[0].speed;
        self.samples.iter().map(|s| (s.speed - s0).abs()).fold(0.0, f64::max)
    }

    pub fn start(&self) -> &PathSample {
        &self.samples[0]
    }

    pub fn end(&self) -> &PathSample {
        self.samples.last().expect("nonempty path")
    }

    /// Position and chart velocity at any `t` (integrated paths only).
    pub fn eval(&self, t: f64) -> Result<(ChartPoint, Vector)> {
        let dense = self
            .dense
            .as_ref()
            .ok_or_else(|| Error::Domain("path carries no dense output".into()))?;
        let (chart, y) = dense.eval(t)?;
        let n = y.len() / 2;
        Ok((
            ChartPoint::new(chart, y.rows(0, n).into_owned()),
            y.rows(n, n).into_owned(),
        ))
    }

    /// Largest ambient distance between samples taken at equal times.
    pub fn sup_deviation(&self, other: &GeodesicPath) -> f64 {
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (&a.ambient - &b.ambient).norm())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `t, x0.., v0.., speed, residual` in ambient coordinates.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.samples.first().map(|s| s.ambient.len()).unwrap_or(0);
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|i| format!("x{i}")));
        header.extend((0..n).map(|i| format!("v{i}")));
        header.push("speed".into());
        header.push("residual".into());
        w.write_record(&header)?;
        for s in &self.samples {
            let mut row = vec![num(s.t)];
            row.extend(s.ambient.iter().map(|x| num(*x)));
            row.extend(s.ambient_velocity.iter().map(|x| num(*x)));
            row.push(num(s.speed));
            row.push(num(self.residual));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn make_sample(scene: &Scene, t: f64, point: ChartPoint, velocity: Vector) -> Result<PathSample> {
    let ambient = scene.ambient(&point);
    let ambient_velocity = scene.to_ambient_vector(&point, &velocity);
    let speed = scene.zermelo_at(&point)?.norm(&velocity);
    Ok(PathSample {
        t,
        point,
        velocity,
        ambient,
        ambient_velocity,
        speed,
    })
}

fn geodesic_field<'a>(scene: &'a Scene, tol: &'a Tolerances) -> impl Fn(usize, f64, &Vector) -> Result<Vector> + 'a {
    let n = scene.dim();
    move |chart, _t, y: &Vector| {
        let x = y.rows(0, n).into_owned();
        let v = y.rows(n, n).into_owned();
        let a = spray(scene, &ChartPoint::new(chart, x), &v, tol)?;
        let mut out = Vec::with_capacity(2 * n);
        out.extend(v.iter().copied());
        out.extend(a.iter().copied());
        Ok(Vector::from_vec(out))
    }
}

fn integrate_geodesic(scene: &Scene, p: &ChartPoint, v: &Vector, t_end: f64, tol: &Tolerances) -> Result<ScenePath> {
    let n = scene.dim();
    // The velocity rides along as a tangent block so chart switches transform it.
    let field = geodesic_field(scene, tol);
    let path = integrate_on_scene(
        scene,
        p,
        std::slice::from_ref(v),
        (0.0, t_end),
        &tol.ode_options(),
        |c, t, y| field(c, t, y),
    );
    path.map_err(|e| match e {
        Error::Stiffness { t, .. } if n > 0 => Error::Degeneracy { at: vec![t] },
        other => other,
    })
}

/// Samples used by [`geodesic_ivp`].
pub const PATH_SAMPLES: usize = 64;

/// Integrates the geodesic with `γ(0) = p`, `γ'(0) = v` over `[0, t_end]`.
pub fn geodesic_ivp(scene: &Scene, p: &ChartPoint, v: &Vector, t_end: f64, tol: &Tolerances) -> Result<GeodesicPath> {
    geodesic_ivp_sampled(scene, p, v, t_end, PATH_SAMPLES, tol)
}

pub fn geodesic_ivp_sampled(
    scene: &Scene,
    p: &ChartPoint,
    v: &Vector,
    t_end: f64,
    samples: usize,
    tol: &Tolerances,
) -> Result<GeodesicPath> {
    let samples = samples.max(2);
    if v.norm() == 0.0 {
        let s = (0..=samples)
            .map(|i| make_sample(scene, t_end * i as f64 / samples as f64, p.clone(), v.clone()))
            .collect::<Result<Vec<_>>>()?;
        return Ok(GeodesicPath {
            samples: s,
            residual: 0.0,
            dense: None,
        });
    }
    let path = integrate_geodesic(scene, p, v, t_end, tol)?;
    let n = scene.dim();
    let mut out = Vec::with_capacity(samples + 1);
    for i in 0..=samples {
        let t = t_end * i as f64 / samples as f64;
        let (chart, y) = path.eval(t)?;
        out.push(make_sample(
            scene,
            t,
            ChartPoint::new(chart, y.rows(0, n).into_owned()),
            y.rows(n, n).into_owned(),
        )?);
    }
    // Defect: finite difference of the interpolated velocity against the spray.
    let delta = 1e-3 * t_end.abs();
    let mut residual: f64 = 0.0;
    for s in &out[1..samples] {
        let (ca, ya) = path.eval(s.t - delta)?;
        let (cb, yb) = path.eval(s.t + delta)?;
        if ca != s.point.chart || cb != s.point.chart {
            continue;
        }
        let acc = (yb.rows(n, n) - ya.rows(n, n)) / (2.0 * delta);
        let a = spray(scene, &s.point, &s.velocity, tol)?;
        residual = residual.max((acc - a).norm());
    }
    Ok(GeodesicPath {
        samples: out,
        residual,
        dense: Some(path),
    })
}

/// Endpoint and velocity of the geodesic at `t_end`.
pub fn geodesic_endpoint(
    scene: &Scene,
    p: &ChartPoint,
    v: &Vector,
    t_end: f64,
    tol: &Tolerances,
) -> Result<(ChartPoint, Vector)> {
    if v.norm() == 0.0 {
        return Ok((p.clone(), v.clone()));
    }
    let path = integrate_geodesic(scene, p, v, t_end, tol)?;
    let n = scene.dim();
    let (chart, y) = path.end();
    Ok((
        ChartPoint::new(chart, y.rows(0, n).into_owned()),
        y.rows(n, n).into_owned(),
    ))
}

/// `exp_p(v) = γ_v(1)`.
pub fn exp_map(scene: &Scene, p: &ChartPoint, v: &Vector, tol: &Tolerances) -> Result<ChartPoint> {
    geodesic_endpoint(scene, p, v, 1.0, tol).map(|(q, _)| q)
}

/// First guess for `exp_p⁻¹(q)` from the Riemannian metric `h`.
fn h_log_guess(scene: &Scene, p: &ChartPoint, q: &Vector) -> Vector {
    let pa = scene.ambient(p);
    let amb = match scene.kind {
        SceneKind::Euclidean { .. } => q - &pa,
        SceneKind::Sphere { radius } => {
            let c = (pa.dot(q) / (radius * radius)).clamp(-1.0, 1.0);
            let theta = c.acos();
            let tangent = q - &pa * (pa.dot(q) / (radius * radius));
            if tangent.norm() < 1e-15 {
                tangent
            } else {
                tangent.normalize() * (radius * theta)
            }
        }
    };
    scene.to_chart_vector(p, &amb)
}

/// Shooting precision: tighter integrator, tight residual.
fn shooting_tol(tol: &Tolerances) -> Tolerances {
    tol.tightened(1e-2)
}

fn lm_options() -> LeastSquaresOptions {
    LeastSquaresOptions {
        max_iter: 40,
        residual_tol: 1e-11,
        fd_step: 1e-6,
    }
}

/// Deterministic seed directions: evenly spaced in the plane, pseudo-random otherwise.
fn seed_directions(n: usize, count: usize) -> Vec<Vector> {
    if n == 2 {
        return (0..count)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / count as f64;
                Vector::from_vec(vec![a.cos(), a.sin()])
            })
            .collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xd15c);
    (0..count)
        .map(|_| Vector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)).normalize())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Shot {
    pub distance: f64,
    /// Initial velocity at `p` (chart of `p`) with `exp_p(velocity) = q`.
    pub velocity: Vector,
    pub seeds_tried: usize,
}

/// Number of indicatrix seeds tried after the Riemannian guess.
pub const SHOOTING_SEEDS: usize = 16;

/// `d(p, q)` by multi-start shooting on `exp_p(v) = q`.
pub fn distance(scene: &Scene, p: &ChartPoint, q: &ChartPoint, tol: &Tolerances) -> Result<f64> {
    shoot(scene, p, q, tol).map(|s| s.distance)
}

pub fn shoot(scene: &Scene, p: &ChartPoint, q: &ChartPoint, tol: &Tolerances) -> Result<Shot> {
    let target = scene.ambient(q);
    let pa = scene.ambient(p);
    let zd = scene.zermelo_at(p)?;
    if (&target - &pa).norm() <= 1e-14 * (1.0 + pa.norm()) {
        return Ok(Shot {
            distance: 0.0,
            velocity: Vector::zeros(scene.dim()),
            seeds_tried: 0,
        });
    }
    let stol = shooting_tol(tol);
    let residual = |v: &Vector| -> Result<Vector> { Ok(scene.ambient(&exp_map(scene, p, v, &stol)?) - &target) };
    let opts = lm_options();
    let accept = 1e-9 * (1.0 + target.norm());
    let guess = h_log_guess(scene, p, &target);
    let mut tried = 1;
    if let Ok(sol) = least_squares(residual, &guess, &opts) {
        if sol.residual_norm <= accept {
            return Ok(Shot {
                distance: zd.norm(&sol.x),
                velocity: sol.x,
                seeds_tried: tried,
            });
        }
    }
    let scale = zd.norm(&guess);
    let mut best: Option<Vector> = None;
    for dir in seed_directions(scene.dim(), SHOOTING_SEEDS) {
        tried += 1;
        let v0 = &dir / zd.norm(&dir) * scale;
        if let Ok(sol) = least_squares(residual, &v0, &opts) {
            if sol.residual_norm <= accept && best.as_ref().is_none_or(|b| zd.norm(&sol.x) < zd.norm(b)) {
                best = Some(sol.x);
            }
        }
    }
    best.map(|v| Shot {
        distance: zd.norm(&v),
        velocity: v,
        seeds_tried: tried,
    })
    .ok_or(Error::Unreachable { seeds: tried })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `d(P, x)`: geodesics leaving `P` orthogonally.
    Forward,
    /// `d(x, P)`: geodesics arriving at `P`, handled as forward geodesics
    /// of the reverse metric `Z̃(v) = Z(−v)`.
    Backward,
}

/// Result of [`distance_to_patch`]. `velocity` lives in the chart of
/// `foot` and is a geodesic velocity of the scene actually integrated (the
/// reversed scene for backward connectors).
#[derive(Debug, Clone, PartialEq)]
pub struct PatchConnector {
    pub distance: f64,
    pub foot_param: Vector,
    pub foot: ChartPoint,
    pub velocity: Vector,
    /// `max_i |g_u(u, t_i)|` with `u = v/Z(v)` and `t_i` h-unit frame vectors.
    pub cone_residual: f64,
    pub direction: Direction,
}

/// Chart tangent frame of the patch at `s`, columns normalised in `h`.
fn chart_frame(scene: &Scene, patch: &SubmanifoldPatch, foot: &ChartPoint, s: &Vector) -> Result<Matrix> {
    let amb = patch.frame(s)?;
    let h = scene.metric(foot);
    let cols: Vec<Vector> = (0..amb.ncols())
        .map(|i| {
            let c = scene.to_chart_vector(foot, &amb.column(i).into_owned());
            let len = c.dot(&(&h * &c)).sqrt();
            c / len
        })
        .collect();
    Ok(if cols.is_empty() {
        Matrix::zeros(scene.dim(), 0)
    } else {
        Matrix::from_columns(&cols)
    })
}

fn cone_residual(scene: &Scene, foot: &ChartPoint, frame: &Matrix, v: &Vector, tol: &Tolerances) -> Result<Vector> {
    let zd = scene.zermelo_at(foot)?;
    let l = legendre(&zd, v, tol)? / zd.norm(v);
    Ok(frame.transpose() * l)
}

/// Distance between the patch and `x` along orthogonal geodesics.
pub fn distance_to_patch(
    scene: &Scene,
    patch: &SubmanifoldPatch,
    x: &Vector,
    direction: Direction,
    tol: &Tolerances,
) -> Result<PatchConnector> {
    let work = match direction {
        Direction::Forward => scene.clone(),
        Direction::Backward => scene.reversed(),
    };
    let k = patch.dim();
    let n = work.dim();
    let stol = shooting_tol(tol);
    let seeds = patch.grid(match k {
        0 => 1,
        1 => 9,
        2 => 4,
        _ => 3,
    });
    let seed_count = seeds.len();

    // Initial guesses: orthogonal direction nearest the Riemannian guess, ranked by miss distance.
    let mut starts: Vec<(f64, usize, Vector)> = Vec::new();
    for s in &seeds {
        let foot_amb = patch.eval(s);
        let Ok(foot) = work.locate(&foot_amb) else { continue };
        let Ok(zd) = work.zermelo_at(&foot) else { continue };
        let guess = h_log_guess(&work, &foot, x);
        if guess.norm() == 0.0 {
            continue;
        }
        let frame = chart_frame(&work, patch, &foot, s)?;
        let v0 = if k == 0 {
            guess.clone()
        } else {
            match cone_newton(&zd, &frame, guess.clone(), tol) {
                Ok(u) => u * zd.norm(&guess),
                Err(_) => continue,
            }
        };
        let Ok(end) = exp_map(&work, &foot, &v0, &stol) else {
            continue;
        };
        let miss = (work.ambient(&end) - x).norm();
        let mut z = Vec::with_capacity(k + n);
        z.extend(s.iter().copied());
        z.extend(v0.iter().copied());
        starts.push((miss, foot.chart, Vector::from_vec(z)));
    }
    starts.sort_by(|a, b| a.0.total_cmp(&b.0));

    let opts = lm_options();
    let accept = 1e-9 * (1.0 + x.norm());
    let mut best: Option<PatchConnector> = None;
    for (_, chart, z0) in starts.into_iter().take(3) {
        let residual = |z: &Vector| -> Result<Vector> {
            let s = z.rows(0, k).into_owned();
            let v = z.rows(k, n).into_owned();
            let foot = work.in_chart(chart, &patch.eval(&s))?;
            let end = exp_map(&work, &foot, &v, &stol)?;
            let miss = work.ambient(&end) - x;
            let frame = chart_frame(&work, patch, &foot, &s)?;
            let cone = cone_residual(&work, &foot, &frame, &v, tol)?;
            let mut r = Vec::with_capacity(miss.len() + k);
            r.extend(miss.iter().copied());
            r.extend(cone.iter().copied());
            Ok(Vector::from_vec(r))
        };
        let Ok(sol) = least_squares(residual, &z0, &opts) else {
            continue;
        };
        if sol.residual_norm > accept {
            continue;
        }
        let s = sol.x.rows(0, k).into_owned();
        if !patch.contains(&s, 1e-9) {
            continue;
        }
        let v = sol.x.rows(k, n).into_owned();
        let foot = work.in_chart(chart, &patch.eval(&s))?;
        let zd = work.zermelo_at(&foot)?;
        let frame = chart_frame(&work, patch, &foot, &s)?;
        let cres = cone_residual(&work, &foot, &frame, &v, tol)?;
        let candidate = PatchConnector {
            distance: zd.norm(&v),
            foot_param: s,
            foot,
            velocity: v,
            cone_residual: if k == 0 { 0.0 } else { cres.amax() },
            direction,
        };
        if best.as_ref().is_none_or(|b| candidate.distance < b.distance) {
            best = Some(candidate);
        }
    }
    best.ok_or(Error::SearchFailure { seeds: seed_count })
}

/// Images and Jacobian ranks of the endpoint map `s ↦ exp_{P(s)}(t ξ(s))`.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointImages {
    pub params: Vec<Vector>,
    pub points: Vec<Vector>,
    pub ranks: Vec<usize>,
    pub singular_values: Vec<Vec<f64>>,
}

impl EndpointImages {
    pub fn rank_constant(&self) -> bool {
        self.ranks.windows(2).all(|w| w[0] == w[1])
    }

    /// Largest ambient distance between any two images.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                d = d.max((a - b).norm());
            }
        }
        d
    }
}

/// Evaluates the endpoint map at each parameter, with the Jacobian in the
/// patch parameters by central differences (step `1e-4`). Ranks count
/// singular values at least `cutoff` times the scale of the patch frame.
/// `xi(s)` returns the normal vector at `P(s)` in ambient coordinates.
pub fn endpoint_map<X>(
    scene: &Scene,
    patch: &SubmanifoldPatch,
    xi: X,
    params: &[Vector],
    t: f64,
    cutoff: f64,
    tol: &Tolerances,
) -> Result<EndpointImages>
where
    X: Fn(&Vector) -> Result<Vector>,
{
    let stol = shooting_tol(tol);
    let eta = |s: &Vector| -> Result<Vector> {
        let foot = scene.locate(&patch.eval(s))?;
        let v = scene.to_chart_vector(&foot, &xi(s)?) * t;
        Ok(scene.ambient(&exp_map(scene, &foot, &v, &stol)?))
    };
    let mut out = EndpointImages {
        params: params.to_vec(),
        points: Vec::with_capacity(params.len()),
        ranks: Vec::with_capacity(params.len()),
        singular_values: Vec::with_capacity(params.len()),
    };
    let h = 1e-4;
    for s in params {
        out.points.push(eta(s)?);
        let k = s.len();
        let mut cols = Vec::with_capacity(k);
        for i in 0..k {
            let mut sp = s.clone();
            let mut sm = s.clone();
            sp[i] += h;
            sm[i] -= h;
            cols.push((eta(&sp)? - eta(&sm)?) / (2.0 * h));
        }
        let jac = if cols.is_empty() {
            Matrix::zeros(scene.ambient_dim(), 0)
        } else {
            Matrix::from_columns(&cols)
        };
        let frame = patch.frame(s)?;
        let scale = if frame.ncols() == 0 {
            1.0
        } else {
            frame.clone().svd(false, false).singular_values.max()
        };
        out.ranks.push(numeric_rank_scaled(&jac, cutoff, scale));
        out.singular_values.push(if jac.ncols() == 0 {
            Vec::new()
        } else {
            jac.svd(false, false).singular_values.iter().copied().collect()
        });
    }
    Ok(out)
}

/// `s(t) = −(2/σ)(e^{−σt/2} − 1)`, and `s = t` at `σ = 0`.
pub fn arc_reparam(sigma: f64, t: f64) -> f64 {
    let x = -0.5 * sigma * t;
    if x.abs() < 1e-8 {
        // Series of (e^x − 1)/x keeps the map continuous through σ = 0.
        t * (1.0 + 0.5 * x + x * x / 6.0)
    } else {
        t * x.exp_m1() / x
    }
}

/// The reparametrisation `t ↦ s(t)` for a fixed `σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcReparam {
    pub sigma: f64,
}

impl ArcReparam {
    pub fn eval(&self, t: f64) -> f64 {
        arc_reparam(self.sigma, t)
    }

    /// `ds/dt = e^{−σt/2}`.
    pub fn derivative(&self, t: f64) -> f64 {
        (-0.5 * self.sigma * t).exp()
    }
}

/// Sample points for the homothety precondition near `p`.
fn homothety_sample(scene: &Scene, p: &ChartPoint) -> Result<Vec<ChartPoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x407);
    let mut pts = vec![p.clone()];
    for _ in 0..8 {
        pts.push(scene.sample_point(&mut rng, 0.9)?);
    }
    Ok(pts)
}

/// Builds the `Z`-geodesic with `γ(0) = p`, `γ'(0) = v` as `γ(t) = φ_t(γ̃(t))`,
/// where `γ̃` is the `h`-geodesic with `γ̃'(0) = v − W(p)` and
/// `h(γ̃', γ̃') = e^{σt}` for `ℒ_W h = −σ h`.
pub fn navigation_geodesic(
    scene: &Scene,
    p: &ChartPoint,
    v: &Vector,
    t_end: f64,
    samples: usize,
    tol: &Tolerances,
) -> Result<GeodesicPath> {
    let fit = homothety_constant(scene, &homothety_sample(scene, p)?, tol)?;
    if !fit.is_homothety(HOMOTHETY_THRESHOLD) {
        return Err(Error::Precondition(format!(
            "wind is not an infinitesimal homothety (residual {:e})",
            fit.residual
        )));
    }
    let sigma = fit.sigma;
    let zd = scene.zermelo_at(p)?;
    if (zd.norm(v) - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition(format!(
            "initial velocity has Z = {}, expected 1",
            zd.norm(v)
        )));
    }
    let u = v - scene.wind(p);
    // γ̃ traverses the unit-speed h-geodesic with ds/dt = e^{σt/2}.
    let reparam = ArcReparam { sigma: -sigma };
    let base = scene.without_wind();
    let stol = tol.tightened(1e-2);
    let s_end = reparam.eval(t_end);
    let c = geodesic_ivp_sampled(&base, p, &u, s_end, 2, &stol)?;
    let at = |t: f64| -> Result<(ChartPoint, Vector)> {
        let (q, qd) = if s_end == 0.0 {
            (p.clone(), u.clone())
        } else {
            c.eval(reparam.eval(t))?
        };
        let tilde_vel = qd * reparam.derivative(t);
        let (img, j) = flow_with_jacobian(scene, &q, t, &stol)?;
        let vel = j * tilde_vel + scene.wind(&img);
        Ok((img, vel))
    };
    let samples = samples.max(2);
    let mut out = Vec::with_capacity(samples + 1);
    for i in 0..=samples {
        let t = t_end * i as f64 / samples as f64;
        let (q, vel) = at(t)?;
        out.push(make_sample(scene, t, q, vel)?);
    }
    let delta = 1e-3 * t_end.abs();
    let mut residual: f64 = 0.0;
    for s in &out[1..samples] {
        let (qa, va) = at(s.t - delta)?;
        let (qb, vb) = at(s.t + delta)?;
        if qa.chart != s.point.chart || qb.chart != s.point.chart {
            continue;
        }
        let acc = (vb - va) / (2.0 * delta);
        residual = residual.max((acc - spray(scene, &s.point, &s.velocity, tol)?).norm());
    }
    Ok(GeodesicPath {
        samples: out,
        residual,
        dense: None,
    })
}
