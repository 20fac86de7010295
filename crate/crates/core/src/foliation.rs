//! Singular foliations given by invariant maps, and the checks run on them:
//! the Finsler condition, equidistance, homothetic transformations, wind
//! tangency to strata, the Randers–Minkowski lemmas, the Riemannian
//! reduction, equifocality and the blow-up limit.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geodesic::{
    arc_reparam, distance_to_patch, endpoint_map, geodesic_endpoint, geodesic_ivp_sampled, Direction,
    HOMOTHETY_THRESHOLD,
};
use crate::manifold::{flow, homothety_constant, ChartPoint, Scene, SceneKind, SubmanifoldPatch, Template};
use crate::minkowski::{cone_newton, legendre, orthogonal_cone, quotient_norm};
use crate::numkit::{fd_jacobian, numeric_rank, pseudo_inverse, Tolerances};
use crate::report::{flag, num, Table};
use crate::{Matrix, Vector};

type AmbientMap = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
type OrbitFn = Arc<dyn Fn(&Vector, f64) -> Vector + Send + Sync>;

/// Orthogonality threshold along geodesics.
pub const ORTHOGONALITY_THRESHOLD: f64 = 1e-4;
/// Leaf-spread threshold for endpoint images.
pub const LEAF_SPREAD_THRESHOLD: f64 = 1e-4;
/// Equidistance spread relative to the mean distance.
pub const EQUIDISTANCE_RELATIVE: f64 = 1e-3;
/// Invariant spread of leaves moved by the wind flow.
pub const FLOW_SPREAD_THRESHOLD: f64 = 1e-5;
pub const TENSOR_THRESHOLD: f64 = 1e-6;
/// Smallest time accepted in endpoint-map rank experiments.
pub const MIN_RANK_TIME: f64 = 1e-3;

/// Names accepted by [`FoliationModel::builtin`].
pub const BUILTIN_FOLIATIONS: [&str; 5] = ["circles", "lines", "latitudes", "cylinder", "hopf"];

/// A foliation whose leaves are the connected level sets of an invariant map
/// `ρ`, with leaves swept out by a one-parameter group generated by `X`.
#[derive(Clone)]
pub struct FoliationModel {
    pub name: String,
    pub ambient_dim: usize,
    invariant: AmbientMap,
    generator: AmbientMap,
    orbit: OrbitFn,
    section: Option<AmbientMap>,
    singular: Vec<SubmanifoldPatch>,
}

impl std::fmt::Debug for FoliationModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FoliationModel")
            .field("name", &self.name)
            .field("ambient_dim", &self.ambient_dim)
            .field("singular", &self.singular.len())
            .finish_non_exhaustive()
    }
}

fn rotate_pair(p: &Vector, i: usize, j: usize, s: f64) -> Vector {
    let (c, sn) = (s.cos(), s.sin());
    let mut q = p.clone();
    q[i] = c * p[i] - sn * p[j];
    q[j] = sn * p[i] + c * p[j];
    q
}

fn rotation_field(p: &Vector, i: usize, j: usize) -> Vector {
    let mut w = Vector::zeros(p.len());
    w[i] = -p[j];
    w[j] = p[i];
    w
}

fn v(xs: &[f64]) -> Vector {
    Vector::from_vec(xs.to_vec())
}

impl FoliationModel {
    /// Builds a foliation from its invariant map, generator, the flow of the
    /// generator, an optional section of `ρ` and the minimal strata.
    pub fn new<I, G, O>(name: &str, ambient_dim: usize, invariant: I, generator: G, orbit: O) -> Self
    where
        I: Fn(&Vector) -> Vector + Send + Sync + 'static,
        G: Fn(&Vector) -> Vector + Send + Sync + 'static,
        O: Fn(&Vector, f64) -> Vector + Send + Sync + 'static,
    {
        Self {
            name: name.to_string(),
            ambient_dim,
            invariant: Arc::new(invariant),
            generator: Arc::new(generator),
            orbit: Arc::new(orbit),
            section: None,
            singular: Vec::new(),
        }
    }

    pub fn with_section<S>(mut self, section: S) -> Self
    where
        S: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        self.section = Some(Arc::new(section));
        self
    }

    pub fn with_singular(mut self, patches: Vec<SubmanifoldPatch>) -> Self {
        self.singular = patches;
        self
    }

    /// The builtin foliation `name` on the given template.
    pub fn builtin(name: &str, template: &Template) -> Result<Self> {
        let n = template.ambient_dim();
        let mismatch = || Error::Config(format!("foliation `{name}` does not fit template {}", template.label()));
        let fol = match (name, *template) {
            ("circles", Template::EuclideanBall { dim: 2, .. }) => Self::new(
                name,
                2,
                |p| v(&[p.norm_squared()]),
                |p| rotation_field(p, 0, 1),
                |p, s| rotate_pair(p, 0, 1, s),
            )
            .with_section(|b| v(&[b[0].max(0.0).sqrt(), 0.0]))
            .with_singular(vec![SubmanifoldPatch::point(v(&[0.0, 0.0]))]),
            ("lines", Template::EuclideanBall { dim: 2, .. }) => Self::new(
                name,
                2,
                |p| v(&[p[1]]),
                |p| Vector::from_fn(p.len(), |i, _| if i == 0 { 1.0 } else { 0.0 }),
                |p, s| p + v(&[s, 0.0]),
            )
            .with_section(|b| v(&[0.0, b[0]])),
            ("latitudes", Template::Sphere2 { radius }) => Self::new(
                name,
                3,
                move |p| v(&[p[2] / radius]),
                |p| rotation_field(p, 0, 1),
                |p, s| rotate_pair(p, 0, 1, s),
            )
            .with_section(move |b| {
                let z = b[0].clamp(-1.0, 1.0);
                v(&[radius * (1.0 - z * z).sqrt(), 0.0, radius * z])
            })
            .with_singular(vec![
                SubmanifoldPatch::point(v(&[0.0, 0.0, radius])),
                SubmanifoldPatch::point(v(&[0.0, 0.0, -radius])),
            ]),
            ("cylinder", Template::CylinderR3 { radius }) => {
                let axis = SubmanifoldPatch::new(vec![-0.5 * radius], vec![0.5 * radius], |s: &Vector| {
                    v(&[0.0, 0.0, s[0]])
                })?
                .with_frame(|_| Matrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]));
                Self::new(
                    name,
                    3,
                    |p| v(&[p[0] * p[0] + p[1] * p[1], p[2]]),
                    |p| rotation_field(p, 0, 1),
                    |p, s| rotate_pair(p, 0, 1, s),
                )
                .with_section(|b| v(&[b[0].max(0.0).sqrt(), 0.0, b[1]]))
                .with_singular(vec![axis])
            }
            ("hopf", Template::Sphere3Hopf { radius }) => Self::new(
                name,
                4,
                move |p| hopf_map(p) / radius,
                crate::manifold::hopf_vertical,
                |p, s| rotate_pair(&rotate_pair(p, 0, 1, s), 2, 3, s),
            ),
            _ if BUILTIN_FOLIATIONS.contains(&name) => return Err(mismatch()),
            _ => return Err(Error::Config(format!("unknown foliation `{name}`"))),
        };
        debug_assert_eq!(fol.ambient_dim, n);
        Ok(fol)
    }

    pub fn rho(&self, p: &Vector) -> Vector {
        (self.invariant)(p)
    }

    pub fn generator(&self, p: &Vector) -> Vector {
        (self.generator)(p)
    }

    pub fn orbit(&self, p: &Vector, s: f64) -> Vector {
        (self.orbit)(p, s)
    }

    /// Ambient frame of the leaf through `p` (no columns on a point leaf).
    pub fn leaf_frame(&self, p: &Vector) -> Matrix {
        let x = self.generator(p);
        if x.norm() <= 1e-9 * (1.0 + p.norm()) {
            Matrix::zeros(p.len(), 0)
        } else {
            Matrix::from_columns(&[x])
        }
    }

    /// Dimension of the leaf through `p`.
    pub fn stratum_label(&self, p: &Vector) -> usize {
        numeric_rank(&self.leaf_frame(p), 1e-8)
    }

    /// `|dρ(X)|` at `p`; zero when the frame is tangent to the level sets.
    pub fn frame_defect(&self, p: &Vector) -> Result<f64> {
        let frame = self.leaf_frame(p);
        if frame.ncols() == 0 {
            return Ok(0.0);
        }
        let f = |x: &Vector| Ok(self.rho(x));
        let d = fd_jacobian(&f, p, 1e-6)?;
        Ok((d * frame).amax())
    }

    /// Leaf frame in the chart of `p`, columns of unit `h`-length. Empty on
    /// point leaves and where the generator is shorter than `min_len`.
    pub fn chart_frame(&self, scene: &Scene, p: &ChartPoint, min_len: f64) -> Matrix {
        let amb = scene.ambient(p);
        let x = self.generator(&amb);
        if x.norm() <= min_len.max(1e-9) {
            return Matrix::zeros(scene.dim(), 0);
        }
        let c = scene.to_chart_vector(p, &x);
        let h = scene.metric(p);
        let len = c.dot(&(&h * &c)).sqrt();
        Matrix::from_columns(&[c / len])
    }

    /// `dρ` in the chart of `p`.
    pub fn chart_differential(&self, scene: &Scene, p: &ChartPoint) -> Result<Matrix> {
        let chart = scene.chart(p.chart);
        let f = |x: &Vector| Ok(self.rho(&chart.to_ambient(x)));
        fd_jacobian(&f, &p.x, 1e-6)
    }

    /// `h`-gradient of the first invariant, as a chart vector at `p`.
    pub fn normal_hint(&self, scene: &Scene, p: &ChartPoint) -> Result<Vector> {
        let d = self.chart_differential(scene, p)?;
        let h = scene.metric(p);
        h.cholesky()
            .map(|c| c.solve(&d.row(0).transpose()))
            .ok_or_else(|| Error::NotPositiveDefinite("scene metric".into()))
    }

    pub fn section(&self, b: &Vector) -> Result<Vector> {
        self.section
            .as_ref()
            .map(|s| s(b))
            .ok_or_else(|| Error::Precondition(format!("foliation `{}` has no section", self.name)))
    }

    /// Patches covering the minimal strata.
    pub fn singular_patches(&self) -> &[SubmanifoldPatch] {
        &self.singular
    }

    /// `count` points of the leaf through `p`, at orbit parameters evenly
    /// spaced in `[−half_width, half_width]`.
    pub fn leaf_points(&self, p: &Vector, half_width: f64, count: usize) -> Vec<Vector> {
        if count <= 1 {
            return vec![p.clone()];
        }
        (0..count)
            .map(|i| {
                let s = -half_width + 2.0 * half_width * i as f64 / (count - 1) as f64;
                self.orbit(p, s)
            })
            .collect()
    }

    /// The plaque of the leaf through `p` swept by orbit parameters in
    /// `[−half_width, half_width]`.
    pub fn plaque(&self, p: &Vector, half_width: f64) -> Result<LeafPatch> {
        if self.stratum_label(p) == 0 {
            return Err(Error::Domain("point leaves have no one-parameter plaque".into()));
        }
        let base = p.clone();
        let orbit = self.orbit.clone();
        let gen = self.generator.clone();
        let orbit2 = self.orbit.clone();
        let base2 = p.clone();
        let patch = SubmanifoldPatch::new(vec![-half_width], vec![half_width], move |s: &Vector| {
            orbit(&base, s[0])
        })?
        .with_frame(move |s: &Vector| Matrix::from_columns(&[gen(&orbit2(&base2, s[0]))]));
        let leaf = LeafPatch {
            patch,
            leaf_id: self.rho(p),
        };
        let drift = leaf.rho_drift(self, 9);
        if drift > 1e-8 {
            return Err(Error::Domain(format!("invariant varies by {drift:e} along the plaque")));
        }
        Ok(leaf)
    }

    /// Largest component-wise range of `ρ` over the points.
    pub fn rho_spread(&self, pts: &[Vector]) -> f64 {
        spread_of(&pts.iter().map(|p| self.rho(p)).collect::<Vec<_>>())
    }
}

fn spread_of(vals: &[Vector]) -> f64 {
    let Some(first) = vals.first() else { return 0.0 };
    (0..first.len())
        .map(|i| {
            let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r[i]), hi.max(r[i]))
            });
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// `(Re z₁z̄₂, Im z₁z̄₂, (|z₁|² − |z₂|²)/2)` with `z₁ = x₁ + i x₂`, `z₂ = x₃ + i x₄`;
/// maps `S³(R)` onto `S²(R²/2)`.
pub fn hopf_map(p: &Vector) -> Vector {
    v(&[
        p[0] * p[2] + p[1] * p[3],
        p[1] * p[2] - p[0] * p[3],
        0.5 * (p[0] * p[0] + p[1] * p[1] - p[2] * p[2] - p[3] * p[3]),
    ])
}

/// A plaque of a single leaf.
#[derive(Debug, Clone)]
pub struct LeafPatch {
    pub patch: SubmanifoldPatch,
    pub leaf_id: Vector,
}

impl LeafPatch {
    /// Max deviation of `ρ` from the leaf id on a parameter grid.
    pub fn rho_drift(&self, fol: &FoliationModel, per_dim: usize) -> f64 {
        self.patch
            .grid(per_dim)
            .iter()
            .map(|s| (fol.rho(&self.patch.eval(s)) - &self.leaf_id).amax())
            .fold(0.0, f64::max)
    }
}

/// Orthogonality residual `max_i |g_v(v, t_i)| / Z(v)` against an `h`-unit frame.
fn orthogonality(scene: &Scene, p: &ChartPoint, vel: &Vector, frame: &Matrix, tol: &Tolerances) -> Result<f64> {
    if frame.ncols() == 0 {
        return Ok(0.0);
    }
    let zd = scene.zermelo_at(p)?;
    let l = legendre(&zd, vel, tol)? / zd.norm(vel);
    Ok((frame.transpose() * l).amax())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinslerParams {
    pub trials: usize,
    pub t_end: f64,
    pub samples: usize,
    /// Starting points are drawn from this fraction of the working region.
    pub sample_fraction: f64,
    /// Points with a shorter generator count as near-singular.
    pub min_generator: f64,
    pub seed: u64,
}

impl Default for FinslerParams {
    fn default() -> Self {
        Self {
            trials: 12,
            t_end: 1.0,
            samples: 40,
            sample_fraction: 0.5,
            min_generator: 0.1,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinslerTrial {
    pub index: usize,
    pub start: Vector,
    /// Initial velocity in ambient coordinates.
    pub direction: Vector,
    pub forward: f64,
    pub backward: f64,
    pub error: Option<String>,
}

impl FinslerTrial {
    pub fn passed(&self, threshold: f64) -> bool {
        self.error.is_none() && self.forward <= threshold && self.backward <= threshold
    }
}

/// Orthogonality residuals of orthogonal geodesics, forward and backward
/// reported separately.
#[derive(Debug, Clone, PartialEq)]
pub struct FinslerReport {
    pub trials: Vec<FinslerTrial>,
    pub threshold: f64,
}

impl FinslerReport {
    pub fn passed(&self) -> bool {
        !self.trials.is_empty() && self.trials.iter().all(|t| t.passed(self.threshold))
    }

    pub fn max_forward(&self) -> f64 {
        self.trials.iter().map(|t| t.forward).fold(0.0, f64::max)
    }

    pub fn max_backward(&self) -> f64 {
        self.trials.iter().map(|t| t.backward).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &FinslerTrial> {
        self.trials.iter().filter(|t| !t.passed(self.threshold))
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "trial",
            "start",
            "direction",
            "forward_residual",
            "backward_residual",
            "pass",
            "error",
        ]);
        for tr in &self.trials {
            t.push(vec![
                tr.index.to_string(),
                join(&tr.start),
                join(&tr.direction),
                num(tr.forward),
                num(tr.backward),
                flag(tr.passed(self.threshold)),
                tr.error.clone().unwrap_or_default(),
            ]);
        }
        t
    }
}

pub(crate) fn join(x: &Vector) -> String {
    x.iter().map(|c| num(*c)).collect::<Vec<_>>().join(" ")
}

fn max_residual_along(
    scene: &Scene,
    fol: &FoliationModel,
    p: &ChartPoint,
    u: &Vector,
    params: &FinslerParams,
    tol: &Tolerances,
) -> Result<f64> {
    let path = geodesic_ivp_sampled(scene, p, u, params.t_end, params.samples, tol)?;
    let mut worst: f64 = 0.0;
    for s in &path.samples {
        let frame = fol.chart_frame(scene, &s.point, 0.1 * params.min_generator);
        worst = worst.max(orthogonality(scene, &s.point, &s.velocity, &frame, tol)?);
    }
    Ok(worst)
}

fn finsler_trial(
    scene: &Scene,
    reversed: &Scene,
    fol: &FoliationModel,
    params: &FinslerParams,
    index: usize,
    seed: u64,
    tol: &Tolerances,
) -> FinslerTrial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trial = FinslerTrial {
        index,
        start: Vector::zeros(0),
        direction: Vector::zeros(0),
        forward: f64::NAN,
        backward: f64::NAN,
        error: None,
    };
    let run = |trial: &mut FinslerTrial, rng: &mut ChaCha8Rng| -> Result<()> {
        let mut p = scene.sample_point(rng, params.sample_fraction)?;
        for _ in 0..50 {
            if fol.generator(&scene.ambient(&p)).norm() >= params.min_generator {
                break;
            }
            p = scene.sample_point(rng, params.sample_fraction)?;
        }
        trial.start = scene.ambient(&p);
        let frame = fol.chart_frame(scene, &p, 0.0);
        let zd = scene.zermelo_at(&p)?;
        let cone = orthogonal_cone(&zd, &frame, 8, rng, tol)?;
        let u = cone[rng.gen_range(0..cone.len())].clone();
        trial.direction = scene.to_ambient_vector(&p, &u);
        trial.forward = max_residual_along(scene, fol, &p, &u, params, tol)?;
        trial.backward = max_residual_along(reversed, fol, &p, &(-&u), params, tol)?;
        Ok(())
    };
    if let Err(e) = run(&mut trial, &mut rng) {
        trial.error = Some(e.to_string());
    }
    trial
}

/// Starts geodesics orthogonally to the leaf through random points and
/// records how far they drift from orthogonality to the leaves they meet.
/// The backward residual follows `−u` for the reverse metric.
pub fn check_finsler(scene: &Scene, fol: &FoliationModel, params: &FinslerParams, tol: &Tolerances) -> FinslerReport {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let seeds: Vec<u64> = (0..params.trials).map(|_| rng.gen()).collect();
    let reversed = scene.reversed();
    let trials = seeds
        .par_iter()
        .enumerate()
        .map(|(i, s)| finsler_trial(scene, &reversed, fol, params, i, *s, tol))
        .collect();
    FinslerReport {
        trials,
        threshold: ORTHOGONALITY_THRESHOLD,
    }
}

/// A source plaque and sample points of another leaf.
#[derive(Debug, Clone)]
pub struct LeafPair {
    pub source: LeafPatch,
    pub targets: Vec<Vector>,
}

impl LeafPair {
    pub fn new(
        fol: &FoliationModel,
        source_point: &Vector,
        source_half_width: f64,
        target_point: &Vector,
        target_half_width: f64,
        count: usize,
    ) -> Result<Self> {
        Ok(Self {
            source: fol.plaque(source_point, source_half_width)?,
            targets: fol.leaf_points(target_point, target_half_width, count),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquidistanceReport {
    pub direction: Direction,
    pub targets: Vec<Vector>,
    pub distances: Vec<f64>,
    pub mean: f64,
    pub spread: f64,
}

impl EquidistanceReport {
    pub fn passed(&self) -> bool {
        self.spread <= EQUIDISTANCE_RELATIVE * self.mean
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["direction", "sample", "target", "distance"]);
        for (i, (x, d)) in self.targets.iter().zip(&self.distances).enumerate() {
            t.push(vec![
                direction_label(self.direction).into(),
                i.to_string(),
                join(x),
                num(*d),
            ]);
        }
        t
    }
}

pub fn direction_label(d: Direction) -> &'static str {
    match d {
        Direction::Forward => "forward",
        Direction::Backward => "backward",
    }
}

/// Distances from the source plaque to each target point (or back).
pub fn check_equidistance(
    scene: &Scene,
    pair: &LeafPair,
    direction: Direction,
    tol: &Tolerances,
) -> Result<EquidistanceReport> {
    let distances = pair
        .targets
        .par_iter()
        .map(|x| distance_to_patch(scene, &pair.source.patch, x, direction, tol).map(|c| c.distance))
        .collect::<Result<Vec<_>>>()?;
    let mean = distances.iter().sum::<f64>() / distances.len().max(1) as f64;
    let (lo, hi) = distances
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
            (lo.min(*d), hi.max(*d))
        });
    Ok(EquidistanceReport {
        direction,
        targets: pair.targets.clone(),
        distances,
        mean,
        spread: if hi >= lo { hi - lo } else { 0.0 },
    })
}

/// `h⁺_λ(x)` (forward) or `h⁻_λ(x)` (backward): slides `x` along its
/// minimizing orthogonal connector to the plaque so that its distance is
/// rescaled by `λ`.
pub fn homothetic_transform(
    scene: &Scene,
    plaque: &LeafPatch,
    x: &Vector,
    lambda: f64,
    direction: Direction,
    tol: &Tolerances,
) -> Result<Vector> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!(
            "homothety factor must be positive, got {lambda}"
        )));
    }
    if lambda == 1.0 {
        return Ok(x.clone());
    }
    let c = distance_to_patch(scene, &plaque.patch, x, direction, tol)?;
    let work = match direction {
        Direction::Forward => scene.clone(),
        Direction::Backward => scene.reversed(),
    };
    let (q, _) = geodesic_endpoint(&work, &c.foot, &c.velocity, lambda, &tol.tightened(1e-2))?;
    Ok(work.ambient(&q))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangencyPoint {
    pub point: Vector,
    pub wind: Vector,
    /// `h`-norm of the wind's component normal to the stratum.
    pub normal_component: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindTangencyReport {
    pub points: Vec<TangencyPoint>,
    pub threshold: f64,
}

impl WindTangencyReport {
    pub fn passed(&self) -> bool {
        self.points.iter().all(|p| p.normal_component <= self.threshold)
    }

    pub fn max_normal(&self) -> f64 {
        self.points.iter().map(|p| p.normal_component).fold(0.0, f64::max)
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["point", "wind", "normal_component", "pass"]);
        for p in &self.points {
            t.push(vec![
                join(&p.point),
                join(&p.wind),
                num(p.normal_component),
                flag(p.normal_component <= self.threshold),
            ]);
        }
        t
    }
}

/// Normal component of the wind along sampled points of the given strata.
/// The scene metric is the ambient Euclidean one restricted to the
/// manifold, so projections are taken in ambient coordinates.
pub fn check_wind_tangency(scene: &Scene, patches: &[SubmanifoldPatch], per_dim: usize) -> Result<WindTangencyReport> {
    let mut points = Vec::new();
    for patch in patches {
        for s in patch.grid(per_dim) {
            let p = patch.eval(&s);
            let w = scene.ambient_wind(&p);
            let f = patch.frame(&s)?;
            let normal = if f.ncols() == 0 {
                w.clone()
            } else {
                &w - &f * (pseudo_inverse(&f)? * &w)
            };
            points.push(TangencyPoint {
                normal_component: normal.norm(),
                point: p,
                wind: w,
            });
        }
    }
    Ok(WindTangencyReport {
        points,
        threshold: TENSOR_THRESHOLD,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinkowskiLemmaReport {
    pub beta_sharp: Vector,
    /// `max |h(t̂, β⃗)|` over leaf frames.
    pub perpendicular_residual: f64,
    /// Largest spread of `h(y, β⃗)` within one leaf.
    pub level_residual: f64,
    /// Distance from `β⃗` to the span of the minimal stratum.
    pub containment_residual: f64,
    pub riemannian: FinslerReport,
}

impl MinkowskiLemmaReport {
    pub fn passed(&self) -> bool {
        self.perpendicular_residual <= TENSOR_THRESHOLD
            && self.level_residual <= TENSOR_THRESHOLD
            && self.containment_residual <= 1e-10
            && self.riemannian.passed()
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["quantity", "value", "threshold", "pass"]);
        let rows = [
            ("perpendicular_residual", self.perpendicular_residual, TENSOR_THRESHOLD),
            ("level_residual", self.level_residual, TENSOR_THRESHOLD),
            ("containment_residual", self.containment_residual, 1e-10),
            (
                "riemannian_forward",
                self.riemannian.max_forward(),
                ORTHOGONALITY_THRESHOLD,
            ),
            (
                "riemannian_backward",
                self.riemannian.max_backward(),
                ORTHOGONALITY_THRESHOLD,
            ),
        ];
        for (name, value, thr) in rows {
            t.push(vec![name.into(), num(value), num(thr), flag(value <= thr)]);
        }
        t
    }
}

/// On a Randers–Minkowski space with a point leaf at the origin: leaves lie
/// in hyperplanes `⟨·, β⃗⟩ = c`, the minimal stratum contains `β⃗`, and the
/// foliation is Riemannian for `h`.
pub fn check_minkowski_lemmas(
    scene: &Scene,
    fol: &FoliationModel,
    leaves: usize,
    params: &FinslerParams,
    tol: &Tolerances,
) -> Result<MinkowskiLemmaReport> {
    if !matches!(scene.kind, SceneKind::Euclidean { .. }) {
        return Err(Error::Precondition("Randers–Minkowski checks need a flat scene".into()));
    }
    let origin = scene.locate(&Vector::zeros(scene.ambient_dim()))?;
    if fol.stratum_label(&scene.ambient(&origin)) != 0 {
        return Err(Error::Precondition("the origin is not a point leaf".into()));
    }
    let zd0 = scene.zermelo_at(&origin)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for _ in 0..8 {
        let p = scene.sample_point(&mut rng, 1.0)?;
        let zd = scene.zermelo_at(&p)?;
        if (&zd.h - &zd0.h).amax() > 1e-12 || (&zd.w - &zd0.w).amax() > 1e-12 {
            return Err(Error::Precondition("metric and wind must be constant".into()));
        }
    }
    let beta = zd0.to_randers()?.beta_sharp();
    let h = zd0.h.clone();
    let mut perpendicular: f64 = 0.0;
    let mut level: f64 = 0.0;
    for _ in 0..leaves {
        let p = scene.ambient(&scene.sample_point(&mut rng, params.sample_fraction)?);
        let pts = fol.leaf_points(&p, std::f64::consts::PI, 13);
        let mut vals = Vec::with_capacity(pts.len());
        for y in &pts {
            let x = fol.generator(y);
            if x.norm() >= params.min_generator {
                let xh = &x / x.dot(&(&h * &x)).sqrt();
                perpendicular = perpendicular.max(xh.dot(&(&h * &beta)).abs());
            }
            vals.push(v(&[y.dot(&(&h * &beta))]));
        }
        level = level.max(spread_of(&vals));
    }
    let mut stratum = Vec::new();
    for patch in fol.singular_patches() {
        for s in patch.grid(9) {
            stratum.push(patch.eval(&s));
        }
    }
    let containment = if beta.norm() == 0.0 || stratum.is_empty() {
        if beta.norm() == 0.0 {
            0.0
        } else {
            beta.norm()
        }
    } else {
        let m = Matrix::from_columns(&stratum);
        let svd = m.clone().svd(true, false);
        let u = svd.u.expect("requested U");
        let rank = numeric_rank(&m, 1e-10);
        let basis = u.columns(0, rank).into_owned();
        (&beta - &basis * (basis.transpose() * &beta)).norm()
    };
    let riemannian = check_finsler(&scene.without_wind(), fol, params, tol);
    Ok(MinkowskiLemmaReport {
        beta_sharp: beta,
        perpendicular_residual: perpendicular,
        level_residual: level,
        containment_residual: containment,
        riemannian,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Report {
    /// The Finsler check on the original scene (the precondition).
    pub finsler: FinslerReport,
    /// The same check with the wind removed.
    pub riemannian: FinslerReport,
    pub equidistance: Vec<EquidistanceReport>,
    /// Largest invariant spread of a leaf moved by the wind flow.
    pub flow_spread: f64,
}

impl Theorem1Report {
    pub fn passed(&self) -> bool {
        self.riemannian.passed()
            && self.equidistance.iter().all(|e| e.passed())
            && self.flow_spread <= FLOW_SPREAD_THRESHOLD
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["quantity", "value", "threshold", "pass"]);
        let mut push = |name: String, value: f64, thr: f64| {
            t.push(vec![name, num(value), num(thr), flag(value <= thr)]);
        };
        push(
            "riemannian_forward".into(),
            self.riemannian.max_forward(),
            ORTHOGONALITY_THRESHOLD,
        );
        push(
            "riemannian_backward".into(),
            self.riemannian.max_backward(),
            ORTHOGONALITY_THRESHOLD,
        );
        for e in &self.equidistance {
            push(
                format!("h_equidistance_{}", direction_label(e.direction)),
                e.spread,
                EQUIDISTANCE_RELATIVE * e.mean,
            );
        }
        push("flow_spread".into(), self.flow_spread, FLOW_SPREAD_THRESHOLD);
        t
    }
}

/// Largest invariant spread of sampled leaves after flowing them by the wind
/// for time `t`.
pub fn wind_flow_spread(
    scene: &Scene,
    fol: &FoliationModel,
    leaves: usize,
    t: f64,
    params: &FinslerParams,
    tol: &Tolerances,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0xf10);
    let starts = (0..leaves)
        .map(|_| {
            scene
                .sample_point(&mut rng, params.sample_fraction)
                .map(|p| scene.ambient(&p))
        })
        .collect::<Result<Vec<_>>>()?;
    let spreads = starts
        .par_iter()
        .map(|p| {
            let imgs = fol
                .leaf_points(p, 1.0, 20)
                .iter()
                .map(|y| {
                    let q = flow(scene, &scene.locate(y)?, t, &tol.tightened(1e-2))?;
                    Ok(scene.ambient(&q))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(fol.rho_spread(&imgs))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(spreads.into_iter().fold(0.0, f64::max))
}

/// Reduction to the Riemannian foliation: gated on the Finsler check, then
/// re-runs it and the equidistance check with the wind removed, and checks
/// that the wind flow maps leaves to leaves.
pub fn check_theorem1(
    scene: &Scene,
    fol: &FoliationModel,
    pair: &LeafPair,
    params: &FinslerParams,
    tol: &Tolerances,
) -> Result<Theorem1Report> {
    let finsler = check_finsler(scene, fol, params, tol);
    if !finsler.passed() {
        return Err(Error::Precondition(format!(
            "foliation is not Finsler for this wind (max residual {:e})",
            finsler.max_forward().max(finsler.max_backward())
        )));
    }
    let still = scene.without_wind();
    let riemannian = check_finsler(&still, fol, params, tol);
    let equidistance = vec![
        check_equidistance(&still, pair, Direction::Forward, tol)?,
        check_equidistance(&still, pair, Direction::Backward, tol)?,
    ];
    let flow_spread = wind_flow_spread(scene, fol, 4, 1.0, params, tol)?;
    Ok(Theorem1Report {
        finsler,
        riemannian,
        equidistance,
        flow_spread,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquifocalParams {
    pub regular_t: Vec<f64>,
    /// Times where images are expected to collapse.
    pub focal_t: Vec<f64>,
    /// Regular times closer than this to a focal time are skipped.
    pub focal_margin: f64,
    pub samples: usize,
    pub rank_cutoff: f64,
    /// `+1` follows the gradient of the first invariant, `−1` the opposite side.
    pub normal_sign: f64,
}

impl Default for EquifocalParams {
    fn default() -> Self {
        Self {
            regular_t: vec![0.1, 0.3, 0.5, 0.7, 1.3],
            focal_t: Vec::new(),
            focal_margin: 0.05,
            samples: 20,
            rank_cutoff: 1e-6,
            normal_sign: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquifocalRow {
    pub t: f64,
    /// Parameter of the `h`-geodesic paired with `t`.
    pub s: f64,
    pub focal: bool,
    pub spread: f64,
    pub diameter: f64,
    pub rank_min: usize,
    pub rank_max: usize,
    pub identity_error: f64,
}

impl EquifocalRow {
    pub fn passed(&self, regular_rank: usize) -> bool {
        let ok_identity = self.identity_error <= LEAF_SPREAD_THRESHOLD;
        if self.focal {
            ok_identity && self.diameter <= LEAF_SPREAD_THRESHOLD && self.rank_max < regular_rank
        } else {
            ok_identity && self.spread <= LEAF_SPREAD_THRESHOLD && self.rank_min == self.rank_max
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquifocalReport {
    pub sigma: f64,
    pub regular_rank: usize,
    pub rows: Vec<EquifocalRow>,
    pub skipped: Vec<f64>,
}

impl EquifocalReport {
    pub fn passed(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.passed(self.regular_rank))
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "t",
            "s",
            "kind",
            "spread",
            "diameter",
            "rank_min",
            "rank_max",
            "identity_error",
            "pass",
        ]);
        for r in &self.rows {
            t.push(vec![
                num(r.t),
                num(r.s),
                if r.focal { "focal" } else { "regular" }.into(),
                num(r.spread),
                num(r.diameter),
                r.rank_min.to_string(),
                r.rank_max.to_string(),
                num(r.identity_error),
                flag(r.passed(self.regular_rank)),
            ]);
        }
        t
    }
}

/// The `Z`-unit normal field along the plaque, projected from the gradient
/// of the invariant onto the orthogonal cone. Ambient coordinates.
pub fn basic_normal(
    scene: &Scene,
    fol: &FoliationModel,
    leaf: &LeafPatch,
    s: &Vector,
    sign: f64,
    tol: &Tolerances,
) -> Result<Vector> {
    let p = scene.locate(&leaf.patch.eval(s))?;
    let zd = scene.zermelo_at(&p)?;
    let frame = fol.chart_frame(scene, &p, 0.0);
    let hint = fol.normal_hint(scene, &p)? * sign;
    let u = cone_newton(&zd, &frame, hint, tol)?;
    Ok(scene.to_ambient_vector(&p, &u))
}

/// Endpoint maps of a regular plaque along its basic normal field: images
/// stay in one leaf with constant rank at regular times, collapse at focal
/// times, and agree with `φ_t(exp^h(s ξ̃))` for `ξ̃ = ξ − W`.
pub fn check_equifocal(
    scene: &Scene,
    fol: &FoliationModel,
    leaf: &LeafPatch,
    params: &EquifocalParams,
    tol: &Tolerances,
) -> Result<EquifocalReport> {
    if let Some(t) = params
        .regular_t
        .iter()
        .chain(&params.focal_t)
        .find(|t| !(**t >= MIN_RANK_TIME))
    {
        return Err(Error::Domain(format!("endpoint-map time {t} is below {MIN_RANK_TIME}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xe9f);
    let mut pts = vec![scene.locate(&leaf.patch.eval(&leaf.patch.center()))?];
    for _ in 0..8 {
        pts.push(scene.sample_point(&mut rng, 0.9)?);
    }
    let fit = homothety_constant(scene, &pts, tol)?;
    if !fit.is_homothety(HOMOTHETY_THRESHOLD) {
        return Err(Error::Precondition(format!(
            "wind is not an infinitesimal homothety (residual {:e})",
            fit.residual
        )));
    }
    let sigma = fit.sigma;
    let params_grid = leaf.patch.grid(params.samples);
    let xi = |s: &Vector| basic_normal(scene, fol, leaf, s, params.normal_sign, tol);
    let still = scene.without_wind();
    let stol = tol.tightened(1e-2);
    let mut times: Vec<(f64, bool)> = Vec::new();
    let mut skipped = Vec::new();
    for &t in &params.regular_t {
        if params.focal_t.iter().any(|f| (f - t).abs() < params.focal_margin) {
            skipped.push(t);
        } else {
            times.push((t, false));
        }
    }
    times.extend(params.focal_t.iter().map(|t| (*t, true)));
    let regular_rank = leaf.patch.dim();
    let rows = times
        .par_iter()
        .map(|&(t, focal)| -> Result<EquifocalRow> {
            let images = endpoint_map(scene, &leaf.patch, xi, &params_grid, t, params.rank_cutoff, tol)?;
            // The h-geodesic has speed e^{σt/2} in t, so it is run to ∫₀ᵗ e^{σu/2} du.
            let s_t = arc_reparam(-sigma, t);
            let mut err: f64 = 0.0;
            for (s, img) in params_grid.iter().zip(&images.points) {
                let foot = scene.locate(&leaf.patch.eval(s))?;
                let tilde = xi(s)? - scene.ambient_wind(&scene.ambient(&foot));
                let tv = still.to_chart_vector(&foot, &tilde);
                let (q, _) = geodesic_endpoint(&still, &foot, &tv, s_t, &stol)?;
                let moved = flow(scene, &q, t, &stol)?;
                err = err.max((scene.ambient(&moved) - img).norm());
            }
            Ok(EquifocalRow {
                t,
                s: s_t,
                focal,
                spread: fol.rho_spread(&images.points),
                diameter: images.diameter(),
                rank_min: images.ranks.iter().copied().min().unwrap_or(0),
                rank_max: images.ranks.iter().copied().max().unwrap_or(0),
                identity_error: err,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EquifocalReport {
        sigma,
        regular_rank,
        rows,
        skipped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupParams {
    pub lambdas: Vec<f64>,
    /// Radius of the base offsets probed around `ρ(q)`.
    pub probe_radius: f64,
    pub directions: usize,
}

impl Default for BlowupParams {
    fn default() -> Self {
        Self {
            lambdas: vec![1.0, 0.3, 0.1, 0.03, 0.01, 0.001],
            probe_radius: 0.2,
            directions: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupReport {
    pub lambdas: Vec<f64>,
    pub sup_difference: Vec<f64>,
}

impl BlowupReport {
    pub fn monotone(&self) -> bool {
        self.sup_difference.windows(2).all(|w| w[1] <= w[0] + 1e-9)
    }

    pub fn passed(&self) -> bool {
        self.monotone() && self.sup_difference.last().is_some_and(|d| *d <= 1e-3)
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["lambda", "sup_difference"]);
        for (l, d) in self.lambdas.iter().zip(&self.sup_difference) {
            t.push(vec![num(*l), num(*d)]);
        }
        t
    }
}

/// The induced norm on the leaf space at base point `b` (in invariant
/// coordinates), as the quotient of `Z` through `dρ` at the section.
pub fn induced_leaf_norm(scene: &Scene, fol: &FoliationModel, b: &Vector, w: &Vector, tol: &Tolerances) -> Result<f64> {
    let p = scene.locate(&fol.section(b)?)?;
    let zd = scene.zermelo_at(&p)?;
    let d = fol.chart_differential(scene, &p)?;
    Ok(quotient_norm(&zd, &d, w, tol)?.value)
}

/// Rescaling limit of the induced leaf-space norm around `ρ(q)`: the
/// blown-up norms `u ↦ F̂_{ρ(q)+λx}(u)` over base offsets `x` converge to
/// the frozen norm `F̂_{ρ(q)}` as `λ → 0`.
pub fn blowup_metric_check(
    scene: &Scene,
    fol: &FoliationModel,
    q: &Vector,
    params: &BlowupParams,
    tol: &Tolerances,
) -> Result<BlowupReport> {
    let bq = fol.rho(q);
    let k = bq.len();
    let dirs: Vec<Vector> = if k == 1 {
        vec![v(&[1.0]), v(&[-1.0])]
    } else {
        (0..params.directions.max(2))
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / params.directions.max(2) as f64;
                let mut u = Vector::zeros(k);
                u[0] = a.cos();
                u[1] = a.sin();
                u
            })
            .collect()
    };
    let offsets: Vec<Vector> = dirs
        .iter()
        .flat_map(|d| [d * params.probe_radius, d * (0.5 * params.probe_radius)])
        .collect();
    let frozen = dirs
        .iter()
        .map(|u| induced_leaf_norm(scene, fol, &bq, u, tol))
        .collect::<Result<Vec<_>>>()?;
    let sup_difference = params
        .lambdas
        .par_iter()
        .map(|&lambda| {
            let mut sup: f64 = 0.0;
            for x in &offsets {
                let b = &bq + x * lambda;
                for (u, f0) in dirs.iter().zip(&frozen) {
                    sup = sup.max((induced_leaf_norm(scene, fol, &b, u, tol)? - f0).abs());
                }
            }
            Ok(sup)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(BlowupReport {
        lambdas: params.lambdas.clone(),
        sup_difference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{SceneSpec, WindSpec};
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_6, PI};

    fn scene(template: Template, wind: WindSpec) -> Scene {
        SceneSpec::new(template, wind).build().unwrap()
    }

    fn plane() -> Template {
        Template::EuclideanBall { dim: 2, radius: 4.0 }
    }

    fn sphere() -> Template {
        Template::Sphere2 { radius: 1.0 }
    }

    fn colatitude(theta: f64) -> Vector {
        v(&[theta.sin(), 0.0, theta.cos()])
    }

    fn quick() -> FinslerParams {
        FinslerParams {
            trials: 4,
            samples: 20,
            ..FinslerParams::default()
        }
    }

    #[test]
    fn frames_are_tangent_to_levels() {
        for (name, t) in [
            ("circles", plane()),
            ("lines", plane()),
            ("latitudes", sphere()),
            ("cylinder", Template::CylinderR3 { radius: 2.0 }),
            ("hopf", Template::Sphere3Hopf { radius: 1.0 }),
        ] {
            let f = FoliationModel::builtin(name, &t).unwrap();
            let s = SceneSpec::new(t, WindSpec::Zero).build().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            for _ in 0..10 {
                let p = s.ambient(&s.sample_point(&mut rng, 0.8).unwrap());
                assert!(f.frame_defect(&p).unwrap() < 1e-7, "{name}");
                assert_eq!(f.stratum_label(&p), 1);
            }
        }
        let f = FoliationModel::builtin("latitudes", &sphere()).unwrap();
        assert_eq!(f.stratum_label(&v(&[0.0, 0.0, 1.0])), 0);
        assert!(FoliationModel::builtin("latitudes", &plane()).is_err());
        assert!(FoliationModel::builtin("spirals", &plane()).is_err());
    }

    #[test]
    fn finsler_condition_positive_and_negative() {
        let tol = Tolerances::default();
        let circles = FoliationModel::builtin("circles", &plane()).unwrap();
        let good = check_finsler(
            &scene(plane(), WindSpec::Rotational { epsilon: 0.5 }),
            &circles,
            &quick(),
            &tol,
        );
        assert!(good.passed(), "{:?}", good.table());
        let bad = check_finsler(
            &scene(plane(), WindSpec::Constant { w: vec![0.5, 0.0] }),
            &circles,
            &quick(),
            &tol,
        );
        assert!(!bad.passed());
        assert!(bad.max_forward() > 1e-2);
        let lines = FoliationModel::builtin("lines", &plane()).unwrap();
        let trans = check_finsler(
            &scene(plane(), WindSpec::Constant { w: vec![0.5, 0.0] }),
            &lines,
            &quick(),
            &tol,
        );
        assert!(trans.passed());
    }

    #[test]
    fn round_latitudes_are_pi_over_six_apart() {
        let tol = Tolerances::default();
        let fol = FoliationModel::builtin("latitudes", &sphere()).unwrap();
        let s = scene(sphere(), WindSpec::Zero);
        let pair = LeafPair::new(&fol, &colatitude(FRAC_PI_3), 1.0, &colatitude(PI / 2.0), 0.4, 5).unwrap();
        let r = check_equidistance(&s, &pair, Direction::Forward, &tol).unwrap();
        assert!((r.mean - FRAC_PI_6).abs() < 1e-7);
        assert!(r.passed());
    }

    #[test]
    fn killing_latitudes_are_equidistant() {
        let tol = Tolerances::default();
        let fol = FoliationModel::builtin("latitudes", &sphere()).unwrap();
        let s = scene(sphere(), WindSpec::Killing { epsilon: 0.2 });
        let pair = LeafPair::new(&fol, &colatitude(FRAC_PI_3), 1.0, &colatitude(PI / 2.0), 0.4, 5).unwrap();
        for d in [Direction::Forward, Direction::Backward] {
            let r = check_equidistance(&s, &pair, d, &tol).unwrap();
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn radial_wind_separates_forward_and_backward() {
        let tol = Tolerances::default();
        let fol = FoliationModel::builtin("circles", &plane()).unwrap();
        let s = scene(plane(), WindSpec::Radial { c: 0.2 });
        let pair = LeafPair::new(&fol, &v(&[1.0, 0.0]), 1.0, &v(&[2.0, 0.0]), 0.5, 5).unwrap();
        let f = check_equidistance(&s, &pair, Direction::Forward, &tol).unwrap();
        let b = check_equidistance(&s, &pair, Direction::Backward, &tol).unwrap();
        assert!(f.passed() && b.passed());
        // Moving outward with the wind is cheaper: ∫ dr/(1 + 0.2 r) vs ∫ dr/(1 − 0.2 r).
        assert!((f.mean - 5.0 * (1.4f64 / 1.2).ln()).abs() < 1e-6, "{}", f.mean);
        assert!((b.mean + 5.0 * (0.6f64 / 0.8).ln()).abs() < 1e-6, "{}", b.mean);
    }

    #[test]
    fn homothetic_maps_send_leaves_to_leaves() {
        let tol = Tolerances::default();
        let fol = FoliationModel::builtin("circles", &plane()).unwrap();
        let s = scene(plane(), WindSpec::Rotational { epsilon: 0.5 });
        let plaque = fol.plaque(&v(&[1.0, 0.0]), 1.2).unwrap();
        let x = v(&[2.0, 0.0]);
        assert_eq!(
            homothetic_transform(&s, &plaque, &x, 1.0, Direction::Forward, &tol).unwrap(),
            x
        );
        let imgs: Vec<Vector> = fol
            .leaf_points(&x, 0.3, 6)
            .iter()
            .map(|y| homothetic_transform(&s, &plaque, y, 0.5, Direction::Forward, &tol).unwrap())
            .collect();
        assert!(fol.rho_spread(&imgs) < 1e-5);
        let a = homothetic_transform(&s, &plaque, &x, 0.5, Direction::Forward, &tol).unwrap();
        let ab = homothetic_transform(&s, &plaque, &a, 0.8, Direction::Forward, &tol).unwrap();
        let c = homothetic_transform(&s, &plaque, &x, 0.4, Direction::Forward, &tol).unwrap();
        assert!((ab - c).norm() < 1e-5);
    }

    #[test]
    fn wind_tangency_on_axis() {
        let cyl = Template::CylinderR3 { radius: 2.0 };
        let fol = FoliationModel::builtin("cylinder", &cyl).unwrap();
        let good = scene(cyl, WindSpec::Constant { w: vec![0.0, 0.0, 0.4] });
        assert!(check_wind_tangency(&good, fol.singular_patches(), 5).unwrap().passed());
        let bad = scene(cyl, WindSpec::Constant { w: vec![0.1, 0.0, 0.4] });
        let r = check_wind_tangency(&bad, fol.singular_patches(), 5).unwrap();
        assert!(!r.passed());
        assert!((r.max_normal() - 0.1).abs() < 1e-12);
        let lat = FoliationModel::builtin("latitudes", &sphere()).unwrap();
        let ks = scene(sphere(), WindSpec::Killing { epsilon: 0.3 });
        assert_eq!(
            check_wind_tangency(&ks, lat.singular_patches(), 1)
                .unwrap()
                .max_normal(),
            0.0
        );
    }

    #[test]
    fn minkowski_lemmas_on_cylinder() {
        let tol = Tolerances::default();
        let cyl = Template::CylinderR3 { radius: 2.0 };
        let fol = FoliationModel::builtin("cylinder", &cyl).unwrap();
        let s = scene(cyl, WindSpec::Constant { w: vec![0.0, 0.0, 0.4] });
        let r = check_minkowski_lemmas(&s, &fol, 4, &quick(), &tol).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(r.beta_sharp[2] < 0.0 && r.beta_sharp[0] == 0.0);
        assert!(r.containment_residual <= 1e-10);
        let still = scene(cyl, WindSpec::Zero);
        assert!(check_minkowski_lemmas(&still, &fol, 2, &quick(), &tol)
            .unwrap()
            .passed());
    }

    #[test]
    fn theorem1_gating() {
        let tol = Tolerances::default();
        let fol = FoliationModel::builtin("circles", &plane()).unwrap();
        let pair = LeafPair::new(&fol, &v(&[1.0, 0.0]), 1.0, &v(&[2.0, 0.0]), 0.5, 4).unwrap();
        let good = scene(plane(), WindSpec::Rotational { epsilon: 0.5 });
        let r = check_theorem1(&good, &fol, &pair, &quick(), &tol).unwrap();
        assert!(r.passed(), "{r:?}");
        let bad = scene(plane(), WindSpec::Constant { w: vec![0.5, 0.0] });
        assert!(matches!(
            check_theorem1(&bad, &fol, &pair, &quick(), &tol),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn latitude_endpoint_maps() {
        let tol = Tolerances::default();
        let fol = FoliationModel::builtin("latitudes", &sphere()).unwrap();
        let s = scene(sphere(), WindSpec::Killing { epsilon: 0.2 });
        let leaf = fol.plaque(&colatitude(FRAC_PI_3), 1.0).unwrap();
        let params = EquifocalParams {
            regular_t: vec![0.3, 1.3],
            focal_t: vec![FRAC_PI_3],
            samples: 6,
            ..EquifocalParams::default()
        };
        let r = check_equifocal(&s, &fol, &leaf, &params, &tol).unwrap();
        assert!(r.sigma.abs() < 1e-8);
        assert!(r.passed(), "{:?}", r.rows);
        assert_eq!(r.rows[2].rank_max, 0);
    }

    #[test]
    fn radial_wind_endpoint_identity() {
        let tol = Tolerances::default();
        let fol = FoliationModel::builtin("circles", &plane()).unwrap();
        let s = scene(plane(), WindSpec::Radial { c: 0.2 });
        let leaf = fol.plaque(&v(&[1.0, 0.0]), 0.8).unwrap();
        let params = EquifocalParams {
            regular_t: vec![0.5, 1.0],
            samples: 5,
            ..EquifocalParams::default()
        };
        let r = check_equifocal(&s, &fol, &leaf, &params, &tol).unwrap();
        assert!((r.sigma + 0.4).abs() < 1e-8);
        assert!(r.passed(), "{:?}", r.rows);
        let tiny = EquifocalParams {
            regular_t: vec![1e-4],
            ..params
        };
        assert!(matches!(
            check_equifocal(&s, &fol, &leaf, &tiny, &tol),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn literal_reparametrisation_sign_fails_for_radial_wind() {
        // Following the h-geodesic to arc_reparam(σ, t) instead of arc_reparam(−σ, t)
        // misses the Z-geodesic when σ ≠ 0.
        let tol = Tolerances::default();
        let fol = FoliationModel::builtin("circles", &plane()).unwrap();
        let s = scene(plane(), WindSpec::Radial { c: 0.2 });
        let leaf = fol.plaque(&v(&[1.0, 0.0]), 0.8).unwrap();
        let sigma = -0.4;
        let t = 1.0;
        let zero = v(&[0.0]);
        let foot = s.locate(&leaf.patch.eval(&zero)).unwrap();
        let xi = basic_normal(&s, &fol, &leaf, &zero, 1.0, &tol).unwrap();
        let (q, _) = geodesic_endpoint(&s, &foot, &s.to_chart_vector(&foot, &xi), t, &tol).unwrap();
        let target = s.ambient(&q);
        let still = s.without_wind();
        let tilde = s.to_chart_vector(&foot, &(xi - s.ambient_wind(&s.ambient(&foot))));
        let build = |len: f64| {
            let (p, _) = geodesic_endpoint(&still, &foot, &tilde, len, &tol).unwrap();
            s.ambient(&flow(&s, &p, t, &tol).unwrap())
        };
        assert!((build(arc_reparam(-sigma, t)) - &target).norm() < 1e-8);
        assert!((build(arc_reparam(sigma, t)) - &target).norm() > 1e-2);
    }

    #[test]
    fn blowup_converges() {
        let tol = Tolerances::default();
        let lines = FoliationModel::builtin("lines", &plane()).unwrap();
        let flat = scene(plane(), WindSpec::Constant { w: vec![0.5, 0.0] });
        let r = blowup_metric_check(&flat, &lines, &v(&[0.3, 0.5]), &BlowupParams::default(), &tol).unwrap();
        assert!(r.sup_difference.iter().all(|d| *d < 1e-8));
        let circles = FoliationModel::builtin("circles", &plane()).unwrap();
        let rot = scene(plane(), WindSpec::Rotational { epsilon: 0.5 });
        let r = blowup_metric_check(&rot, &circles, &v(&[1.0, 0.0]), &BlowupParams::default(), &tol).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(r.sup_difference[0] > 1e-3);
    }
}
