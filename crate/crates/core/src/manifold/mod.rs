//! Chart-based model spaces carrying a Riemannian metric `h`, a wind `W`
//! and the flow of `W`.
//!
//! Every builtin scene is an embedded submanifold of a Euclidean ambient
//! space: points are stored in chart coordinates, the metric is the pullback
//! `Jᵀ J` of the ambient inner product through the chart Jacobian, and the
//! wind is an ambient vector field tangent to the manifold.

mod builtins;
mod patch;

pub(crate) use builtins::hopf_vertical;
pub use builtins::{SceneSpec, Template, WindSpec};
pub use patch::SubmanifoldPatch;

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numkit::{fd_jacobian, integrate_until, OdeOptions, Tolerances, Trajectory};
use crate::randers::{RandersData, ZermeloData, MARGIN};
use crate::{Matrix, Vector};

pub(crate) type MapFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
pub(crate) type JacFn = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;
pub(crate) type InvFn = Arc<dyn Fn(&Vector) -> Option<Vector> + Send + Sync>;

/// A coordinate domain with its parametrisation into the ambient space.
#[derive(Clone)]
pub struct Chart {
    pub name: String,
    to_ambient: MapFn,
    jacobian: JacFn,
    from_ambient: InvFn,
    /// Coordinates with `|x| <= comfort_radius` are well conditioned;
    /// integrations switch charts beyond it.
    comfort_radius: f64,
}

impl Chart {
    pub fn new(name: &str, to_ambient: MapFn, jacobian: JacFn, from_ambient: InvFn, comfort_radius: f64) -> Self {
        Self {
            name: name.to_string(),
            to_ambient,
            jacobian,
            from_ambient,
            comfort_radius,
        }
    }

    pub fn to_ambient(&self, x: &Vector) -> Vector {
        (self.to_ambient)(x)
    }

    pub fn from_ambient(&self, p: &Vector) -> Option<Vector> {
        (self.from_ambient)(p)
    }

    pub fn jacobian(&self, x: &Vector) -> Matrix {
        (self.jacobian)(x)
    }

    pub fn comfortable(&self, x: &Vector) -> bool {
        x.norm() <= self.comfort_radius
    }
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Chart")
            .field("name", &self.name)
            .finish_non_exhaustive()
    }
}

/// A point in the coordinates of one chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub chart: usize,
    pub x: Vector,
}

impl ChartPoint {
    pub fn new(chart: usize, x: Vector) -> Self {
        Self { chart, x }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SceneKind {
    /// A ball of the given radius about the origin of `R^n`.
    Euclidean { radius: f64 },
    /// The round sphere of the given radius in `R^{n+1}`.
    Sphere { radius: f64 },
}

#[derive(Clone)]
pub struct Scene {
    pub name: String,
    dim: usize,
    ambient_dim: usize,
    charts: Vec<Chart>,
    wind: MapFn,
    pub kind: SceneKind,
    pub wind_label: String,
}

impl fmt::Debug for Scene {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scene")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("kind", &self.kind)
            .field("wind", &self.wind_label)
            .finish_non_exhaustive()
    }
}

impl Scene {
    pub fn new(name: &str, dim: usize, ambient_dim: usize, charts: Vec<Chart>, kind: SceneKind) -> Self {
        Self {
            name: name.to_string(),
            dim,
            ambient_dim,
            charts,
            wind: Arc::new(move |_: &Vector| Vector::zeros(ambient_dim)),
            kind,
            wind_label: "zero".into(),
        }
    }

    /// Replace the wind by an ambient vector field (assumed tangent).
    pub fn with_wind<F>(mut self, label: &str, wind: F) -> Self
    where
        F: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        self.wind = Arc::new(wind);
        self.wind_label = label.to_string();
        self
    }

    /// Same manifold with wind `-W`, whose norm is `v ↦ Z(−v)`.
    pub fn reversed(&self) -> Self {
        let w = self.wind.clone();
        let mut s = self.clone();
        s.wind = Arc::new(move |p: &Vector| -w(p));
        s.wind_label = format!("-({})", self.wind_label);
        s.name = format!("{} (reversed)", self.name);
        s
    }

    /// The underlying Riemannian scene `(M, h)`.
    pub fn without_wind(&self) -> Self {
        let n = self.ambient_dim;
        let mut s = self.clone();
        s.wind = Arc::new(move |_: &Vector| Vector::zeros(n));
        s.wind_label = "zero".into();
        s.name = format!("{} (no wind)", self.name);
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    pub fn chart(&self, i: usize) -> &Chart {
        &self.charts[i]
    }

    pub fn in_region(&self, p: &Vector) -> bool {
        match self.kind {
            SceneKind::Euclidean { radius } => p.norm() <= radius,
            SceneKind::Sphere { .. } => true,
        }
    }

    /// The best-conditioned chart containing the ambient point `p`.
    pub fn locate(&self, p: &Vector) -> Result<ChartPoint> {
        self.charts
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.from_ambient(p).map(|x| (i, x)))
            .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .map(|(i, x)| ChartPoint::new(i, x))
            .ok_or_else(|| Error::Domain(format!("point {:?} lies in no chart", p.as_slice())))
    }

    /// Coordinates of the ambient point `p` in a prescribed chart.
    pub fn in_chart(&self, chart: usize, p: &Vector) -> Result<ChartPoint> {
        self.charts[chart]
            .from_ambient(p)
            .map(|x| ChartPoint::new(chart, x))
            .ok_or_else(|| {
                Error::Domain(format!(
                    "point {:?} outside chart {}",
                    p.as_slice(),
                    self.charts[chart].name
                ))
            })
    }

    pub fn ambient(&self, p: &ChartPoint) -> Vector {
        self.charts[p.chart].to_ambient(&p.x)
    }

    pub fn jacobian(&self, p: &ChartPoint) -> Matrix {
        self.charts[p.chart].jacobian(&p.x)
    }

    /// `h` in chart coordinates.
    pub fn metric(&self, p: &ChartPoint) -> Matrix {
        let j = self.jacobian(p);
        j.transpose() * j
    }

    pub fn ambient_wind(&self, p: &Vector) -> Vector {
        (self.wind)(p)
    }

    pub fn to_ambient_vector(&self, p: &ChartPoint, v: &Vector) -> Vector {
        self.jacobian(p) * v
    }

    /// Chart components of an ambient vector (least squares onto the tangent space).
    pub fn to_chart_vector(&self, p: &ChartPoint, v: &Vector) -> Vector {
        let j = self.jacobian(p);
        let jt = j.transpose();
        (&jt * &j)
            .cholesky()
            .map(|c| c.solve(&(jt * v)))
            .expect("chart Jacobian has full rank")
    }

    /// `W` in chart coordinates.
    pub fn wind(&self, p: &ChartPoint) -> Vector {
        let amb = self.ambient(p);
        self.to_chart_vector(p, &self.ambient_wind(&amb))
    }

    pub fn zermelo_at(&self, p: &ChartPoint) -> Result<ZermeloData> {
        let h = self.metric(p);
        let w = self.wind(p);
        let norm_sq = w.dot(&(&h * &w));
        if !(norm_sq <= 1.0 - MARGIN) {
            return Err(Error::InvalidWind {
                norm_sq,
                at: Some(self.ambient(p).iter().copied().collect()),
            });
        }
        ZermeloData::new(h, w)
    }

    pub fn randers_at(&self, p: &ChartPoint) -> Result<RandersData> {
        self.zermelo_at(p)?.to_randers()
    }

    /// Express `(p, vectors)` in the best chart for `p`.
    pub fn rechart(&self, p: &ChartPoint, vectors: &[Vector]) -> Result<(ChartPoint, Vec<Vector>)> {
        let amb = self.ambient(p);
        let q = self.locate(&amb)?;
        if q.chart == p.chart {
            return Ok((p.clone(), vectors.to_vec()));
        }
        let j = self.jacobian(p);
        let moved = vectors.iter().map(|v| self.to_chart_vector(&q, &(&j * v))).collect();
        Ok((q, moved))
    }

    /// Uniform-ish sample of the working region: the ball of radius
    /// `fraction * radius` for Euclidean scenes, the whole sphere otherwise.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R, fraction: f64) -> Result<ChartPoint> {
        let amb = match self.kind {
            SceneKind::Euclidean { radius } => {
                let g = Vector::from_fn(self.ambient_dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                let r: f64 = rng.gen::<f64>().powf(1.0 / self.ambient_dim as f64);
                g.normalize() * (r * fraction * radius)
            }
            SceneKind::Sphere { radius } => {
                let g = Vector::from_fn(self.ambient_dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                g.normalize() * radius
            }
        };
        self.locate(&amb)
    }

    /// Checks `h(W,W) < 1` at the given points.
    pub fn validate(&self, pts: &[ChartPoint]) -> Result<()> {
        for p in pts {
            self.zermelo_at(p)?;
        }
        Ok(())
    }
}

/// One chart-local piece of a scene integration.
#[derive(Debug, Clone)]
pub struct Segment {
    pub chart: usize,
    pub traj: Trajectory,
}

/// Solution of an ODE on a scene, possibly spanning several charts. The
/// state is `blocks` consecutive vectors of length `dim`; the first is the
/// position and the others are tangent vectors.
#[derive(Debug, Clone)]
pub struct ScenePath {
    pub segments: Vec<Segment>,
    pub blocks: usize,
}

impl ScenePath {
    pub fn t_start(&self) -> f64 {
        self.segments[0].traj.t_start()
    }

    pub fn t_end(&self) -> f64 {
        self.segments.last().expect("nonempty path").traj.t_end()
    }

    pub fn end(&self) -> (usize, &Vector) {
        let last = self.segments.last().expect("nonempty path");
        (last.chart, last.traj.end_state())
    }

    pub fn eval(&self, t: f64) -> Result<(usize, Vector)> {
        let forward = self.t_end() >= self.t_start();
        let seg = self
            .segments
            .iter()
            .find(|s| {
                let te = s.traj.t_end();
                if forward {
                    t <= te
                } else {
                    t >= te
                }
            })
            .unwrap_or_else(|| self.segments.last().expect("nonempty path"));
        Ok((seg.chart, seg.traj.eval(t)?))
    }
}

fn split_blocks(y: &Vector, n: usize, blocks: usize) -> Vec<Vector> {
    (0..blocks).map(|b| y.rows(b * n, n).into_owned()).collect()
}

fn join_blocks(parts: &[Vector]) -> Vector {
    let mut out = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
    for p in parts {
        out.extend(p.iter().copied());
    }
    Vector::from_vec(out)
}

const MAX_CHART_SWITCHES: usize = 64;

/// Integrate `field(chart, t, state)` from `start` with `tangents` attached,
/// switching charts whenever the position leaves the comfort zone and
/// failing with a domain-exit error when it leaves the working region.
pub fn integrate_on_scene<F>(
    scene: &Scene,
    start: &ChartPoint,
    tangents: &[Vector],
    (t0, t1): (f64, f64),
    opts: &OdeOptions,
    field: F,
) -> Result<ScenePath>
where
    F: Fn(usize, f64, &Vector) -> Result<Vector>,
{
    let n = scene.dim();
    let blocks = 1 + tangents.len();
    let (mut chart_pt, mut vecs) = scene.rechart(start, tangents)?;
    if !scene.in_region(&scene.ambient(&chart_pt)) {
        return Err(Error::DomainExit { t: t0 });
    }
    let mut segments = Vec::new();
    let mut t = t0;
    for _ in 0..MAX_CHART_SWITCHES {
        let chart = chart_pt.chart;
        let mut parts = vec![chart_pt.x.clone()];
        parts.extend(vecs.iter().cloned());
        let y0 = join_blocks(&parts);
        let c = &scene.charts[chart];
        let stop = |_: f64, y: &Vector| {
            let x = y.rows(0, n).into_owned();
            !c.comfortable(&x) || !scene.in_region(&c.to_ambient(&x))
        };
        let (traj, fired) = integrate_until(|tt, y: &Vector| field(chart, tt, y), &y0, (t, t1), opts, stop)?;
        let t_stop = traj.t_end();
        let end = traj.end_state().clone();
        segments.push(Segment { chart, traj });
        if !fired {
            return Ok(ScenePath { segments, blocks });
        }
        let parts = split_blocks(&end, n, blocks);
        let here = ChartPoint::new(chart, parts[0].clone());
        if !scene.in_region(&scene.ambient(&here)) {
            return Err(Error::DomainExit { t: t_stop });
        }
        let (next, moved) = scene.rechart(&here, &parts[1..])?;
        if next.chart == chart {
            // No better chart exists; the comfort zone was the working region edge.
            return Err(Error::DomainExit { t: t_stop });
        }
        chart_pt = next;
        vecs = moved;
        t = t_stop;
    }
    Err(Error::Domain(format!("more than {MAX_CHART_SWITCHES} chart switches")))
}

/// `φ_t(p)`, the flow of the wind.
pub fn flow(scene: &Scene, p: &ChartPoint, t: f64, tol: &Tolerances) -> Result<ChartPoint> {
    if t == 0.0 {
        return Ok(p.clone());
    }
    let path = integrate_on_scene(scene, p, &[], (0.0, t), &tol.ode_options(), |chart, _, y| {
        Ok(scene.wind(&ChartPoint::new(chart, y.clone())))
    })?;
    let (chart, y) = path.end();
    Ok(ChartPoint::new(chart, y.clone()))
}

/// `φ_t(p)` together with `dφ_t`, mapping chart vectors at `p` to chart
/// vectors at the image (in the image's chart).
pub fn flow_with_jacobian(scene: &Scene, p: &ChartPoint, t: f64, tol: &Tolerances) -> Result<(ChartPoint, Matrix)> {
    let n = scene.dim();
    let basis: Vec<Vector> = (0..n).map(|i| Matrix::identity(n, n).column(i).into_owned()).collect();
    // Work in the best chart for p and convert the initial frame accordingly.
    let (p0, frame0) = scene.rechart(p, &basis)?;
    if t == 0.0 {
        return Ok((p0, Matrix::from_columns(&frame0)));
    }
    let h = tol.fd_step;
    let path = integrate_on_scene(scene, &p0, &frame0, (0.0, t), &tol.ode_options(), |chart, _, y| {
        let x = y.rows(0, n).into_owned();
        let w = |z: &Vector| Ok(scene.wind(&ChartPoint::new(chart, z.clone())));
        let dw = fd_jacobian(&w, &x, h)?;
        let mut out = Vec::with_capacity(n * (n + 1));
        out.extend(scene.wind(&ChartPoint::new(chart, x.clone())).iter().copied());
        for b in 1..=n {
            let col = y.rows(b * n, n).into_owned();
            out.extend((&dw * col).iter().copied());
        }
        Ok(Vector::from_vec(out))
    })?;
    let (chart, y) = path.end();
    let parts = split_blocks(y, n, n + 1);
    Ok((
        ChartPoint::new(chart, parts[0].clone()),
        Matrix::from_columns(&parts[1..]),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomothetyFit {
    pub sigma: f64,
    /// Max entrywise `|ℒ_W h + σ h|` over the sample.
    pub residual: f64,
}

impl HomothetyFit {
    pub fn is_homothety(&self, threshold: f64) -> bool {
        self.residual <= threshold
    }
}

/// `ℒ_W h` in chart coordinates by central differences.
pub fn lie_derivative_metric(scene: &Scene, p: &ChartPoint, tol: &Tolerances) -> Result<Matrix> {
    let n = scene.dim();
    let h = tol.fd_step;
    let chart = p.chart;
    let w = scene.wind(p);
    let wf = |z: &Vector| Ok(scene.wind(&ChartPoint::new(chart, z.clone())));
    let dw = fd_jacobian(&wf, &p.x, h)?;
    let g = scene.metric(p);
    let mut dg = Matrix::zeros(n, n);
    for k in 0..n {
        let mut xp = p.x.clone();
        let mut xm = p.x.clone();
        xp[k] += h;
        xm[k] -= h;
        let gp = scene.metric(&ChartPoint::new(chart, xp));
        let gm = scene.metric(&ChartPoint::new(chart, xm));
        dg += (gp - gm) * (w[k] / (2.0 * h));
    }
    // (ℒ_W h)_ij = W^k ∂_k h_ij + h_kj ∂_i W^k + h_ik ∂_j W^k
    Ok(&dg + dw.transpose() * &g + &g * &dw)
}

/// Least-squares fit of `ℒ_W h = −σ h` over the sample points.
pub fn homothety_constant(scene: &Scene, pts: &[ChartPoint], tol: &Tolerances) -> Result<HomothetyFit> {
    let mut lies = Vec::with_capacity(pts.len());
    let mut num = 0.0;
    let mut den = 0.0;
    for p in pts {
        let l = lie_derivative_metric(scene, p, tol)?;
        let g = scene.metric(p);
        num += l.dot(&g);
        den += g.dot(&g);
        lies.push((l, g));
    }
    let sigma = if den > 0.0 { -num / den } else { 0.0 };
    let residual = lies.iter().map(|(l, g)| (l + g * sigma).amax()).fold(0.0, f64::max);
    Ok(HomothetyFit { sigma, residual })
}
