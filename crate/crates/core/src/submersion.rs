//! Finsler submersions: the unit-ball criterion through quotient norms, the
//! induced metric on the base, and recovery of Randers data on the base.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::foliation::{hopf_map, join};
use crate::manifold::{ChartPoint, Scene};
use crate::minkowski::quotient_norm;
use crate::numkit::{fd_jacobian, null_space, numeric_rank, pseudo_inverse, Tolerances};
use crate::randers::RandersData;
use crate::report::{flag, num, Table};
use crate::{Matrix, Vector};

type MapFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
type DiffFn = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;
type FiberFn = Arc<dyn Fn(&Vector, f64) -> Vector + Send + Sync>;

/// Tolerance on the difference of induced norms at two fiber points.
pub const WELL_DEFINED_TOL: f64 = 1e-5;
/// Tolerance of the Randers fit and the data comparisons.
pub const FIT_TOL: f64 = 1e-6;

/// A submersion `π` between the ambient spaces of two scenes, with a
/// parametrisation `(b, s) ↦ point of π⁻¹(b)` of its (connected) fibers.
#[derive(Clone)]
pub struct SubmersionSpec {
    pub total: Scene,
    pub base: Scene,
    map: MapFn,
    differential: Option<DiffFn>,
    fiber: FiberFn,
}

impl std::fmt::Debug for SubmersionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SubmersionSpec")
            .field("total", &self.total.name)
            .field("base", &self.base.name)
            .finish_non_exhaustive()
    }
}

impl SubmersionSpec {
    pub fn new<P, F>(total: Scene, base: Scene, map: P, fiber: F) -> Self
    where
        P: Fn(&Vector) -> Vector + Send + Sync + 'static,
        F: Fn(&Vector, f64) -> Vector + Send + Sync + 'static,
    {
        Self {
            total,
            base,
            map: Arc::new(map),
            differential: None,
            fiber: Arc::new(fiber),
        }
    }

    /// Analytic ambient differential; finite differences otherwise.
    pub fn with_differential<D>(mut self, d: D) -> Self
    where
        D: Fn(&Vector) -> Matrix + Send + Sync + 'static,
    {
        self.differential = Some(Arc::new(d));
        self
    }

    /// `x ↦ A x` with a one-dimensional kernel.
    pub fn linear(total: Scene, base: Scene, a: Matrix) -> Result<Self> {
        let kernel = null_space(&a, 1e-12);
        if kernel.ncols() != 1 {
            return Err(Error::NotASubmersion {
                at: Vec::new(),
                rank: a.ncols() - kernel.ncols(),
                expected: a.ncols() - 1,
            });
        }
        let k = kernel.column(0).into_owned();
        let a_pinv = pseudo_inverse(&a)?;
        let a_map = a.clone();
        let a_diff = a.clone();
        Ok(
            Self::new(total, base, move |x| &a_map * x, move |b, s| &a_pinv * b + &k * s)
                .with_differential(move |_| a_diff.clone()),
        )
    }

    /// The Hopf map `S³(1) → S²(½)`.
    pub fn hopf(total: Scene, base: Scene) -> Self {
        Self::new(total, base, hopf_map, |b, s| {
            let z1 = (0.5 + b[2]).max(0.0).sqrt();
            let lift = if z1 > 1e-8 {
                Vector::from_vec(vec![z1, 0.0, b[0] / z1, -b[1] / z1])
            } else {
                Vector::from_vec(vec![0.0, 0.0, 1.0, 0.0])
            };
            let (c, sn) = (s.cos(), s.sin());
            Vector::from_vec(vec![
                c * lift[0] - sn * lift[1],
                sn * lift[0] + c * lift[1],
                c * lift[2] - sn * lift[3],
                sn * lift[2] + c * lift[3],
            ])
        })
    }

    pub fn project(&self, p: &Vector) -> Vector {
        (self.map)(p)
    }

    pub fn fiber_point(&self, b: &Vector, s: f64) -> Vector {
        (self.fiber)(b, s)
    }

    fn ambient_differential(&self, p: &Vector) -> Result<Matrix> {
        match &self.differential {
            Some(d) => Ok(d(p)),
            None => {
                let f = |x: &Vector| Ok(self.project(x));
                fd_jacobian(&f, p, 1e-6)
            }
        }
    }

    /// `dπ` from the chart of `p` to the chart of `π(p)`.
    pub fn chart_differential(&self, p: &ChartPoint) -> Result<(ChartPoint, Matrix)> {
        let amb = self.total.ambient(p);
        let b = self.base.locate(&self.project(&amb))?;
        let jb = pseudo_inverse(&self.base.jacobian(&b))?;
        let d = jb * self.ambient_differential(&amb)? * self.total.jacobian(p);
        let rank = numeric_rank(&d, 1e-8);
        if rank < self.base.dim() {
            return Err(Error::NotASubmersion {
                at: amb.iter().copied().collect(),
                rank,
                expected: self.base.dim(),
            });
        }
        Ok((b, d))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubmersionRow {
    pub point: Vector,
    pub direction: Vector,
    pub quotient: f64,
    pub base: f64,
}

impl SubmersionRow {
    pub fn error(&self) -> f64 {
        (self.quotient - self.base).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubmersionReport {
    pub rows: Vec<SubmersionRow>,
    pub threshold: f64,
    /// Largest `|g_v(v, k)|/F(v)` of quotient minimizers against unit kernel vectors.
    pub horizontality: f64,
}

impl SubmersionReport {
    pub fn max_error(&self) -> f64 {
        self.rows.iter().map(|r| r.error()).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_error() <= self.threshold
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["point", "direction", "quotient_norm", "base_norm", "error", "pass"]);
        for r in &self.rows {
            t.push(vec![
                join(&r.point),
                join(&r.direction),
                num(r.quotient),
                num(r.base),
                num(r.error()),
                flag(r.error() <= self.threshold),
            ]);
        }
        t
    }
}

/// Compares, at sampled points and base directions, the quotient of the
/// total norm through `dπ` with the base norm.
pub fn check_submersion(
    spec: &SubmersionSpec,
    samples: usize,
    directions: usize,
    seed: u64,
    threshold: f64,
    tol: &Tolerances,
) -> Result<SubmersionReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = spec.base.dim();
    let mut jobs = Vec::with_capacity(samples * directions);
    for _ in 0..samples {
        let p = spec.total.sample_point(&mut rng, 0.6)?;
        for _ in 0..directions {
            let w = Vector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
            jobs.push((p.clone(), w));
        }
    }
    let results = jobs
        .par_iter()
        .map(|(p, w)| -> Result<(SubmersionRow, f64)> {
            let (b, d) = spec.chart_differential(p)?;
            let zt = spec.total.zermelo_at(p)?;
            let zb = spec.base.zermelo_at(&b)?;
            let q = quotient_norm(&zt, &d, w, tol)?;
            let l = crate::minkowski::legendre(&zt, &q.minimizer, tol)? / zt.norm(&q.minimizer);
            let h = spec.total.metric(p);
            let horiz = null_space(&d, 1e-10)
                .column_iter()
                .map(|k| (l.dot(&k) / k.dot(&(&h * k)).sqrt()).abs())
                .fold(0.0, f64::max);
            Ok((
                SubmersionRow {
                    point: spec.total.ambient(p),
                    direction: spec.base.to_ambient_vector(&b, w),
                    quotient: q.value,
                    base: zb.norm(w),
                },
                horiz,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let horizontality = results.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(SubmersionReport {
        rows: results.into_iter().map(|r| r.0).collect(),
        threshold,
        horizontality,
    })
}

/// The induced norm of `w` (base ambient tangent vector at `b`) computed
/// at two points of the fiber over `b`, which must agree.
pub fn induced_base_metric(spec: &SubmersionSpec, b: &Vector, w: &Vector, tol: &Tolerances) -> Result<f64> {
    let at = |s: f64| -> Result<f64> {
        let p = spec.total.locate(&spec.fiber_point(b, s))?;
        let (bc, d) = spec.chart_differential(&p)?;
        let wc = spec.base.to_chart_vector(&bc, w);
        Ok(quotient_norm(&spec.total.zermelo_at(&p)?, &d, &wc, tol)?.value)
    };
    let a = at(0.0)?;
    let c = at(1.3)?;
    if (a - c).abs() > WELL_DEFINED_TOL {
        return Err(Error::WellDefinedness {
            difference: (a - c).abs(),
        });
    }
    Ok(a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandersFit {
    pub data: RandersData,
    pub residual: f64,
}

/// Fits `N(w) = √(wᵀ a w) + β·w` from values on `±` pairs of directions,
/// splitting `N(w) ± N(−w)` into the symmetric and odd parts.
pub fn fit_randers<N: Fn(&Vector) -> Result<f64>>(norm: N, dirs: &[Vector]) -> Result<RandersFit> {
    let m = dirs.first().map(|d| d.len()).unwrap_or(0);
    let pairs = m * (m + 1) / 2;
    if dirs.len() < m.max(pairs) {
        return Err(Error::Domain(format!("need at least {} directions", m.max(pairs))));
    }
    let mut vals = Vec::with_capacity(dirs.len());
    for d in dirs {
        vals.push((norm(d)?, norm(&(-d))?));
    }
    let mut sym = Matrix::zeros(dirs.len(), pairs);
    let mut odd = Matrix::zeros(dirs.len(), m);
    let mut rhs_sym = Vector::zeros(dirs.len());
    let mut rhs_odd = Vector::zeros(dirs.len());
    for (r, (d, (np, nm))) in dirs.iter().zip(&vals).enumerate() {
        let alpha = 0.5 * (np + nm);
        rhs_sym[r] = alpha * alpha;
        rhs_odd[r] = 0.5 * (np - nm);
        odd.row_mut(r).copy_from(&d.transpose());
        let mut c = 0;
        for i in 0..m {
            for j in i..m {
                sym[(r, c)] = if i == j { d[i] * d[i] } else { 2.0 * d[i] * d[j] };
                c += 1;
            }
        }
    }
    let entries = pseudo_inverse(&sym)? * rhs_sym;
    let beta = pseudo_inverse(&odd)? * rhs_odd;
    let mut a = Matrix::zeros(m, m);
    let mut c = 0;
    for i in 0..m {
        for j in i..m {
            a[(i, j)] = entries[c];
            a[(j, i)] = entries[c];
            c += 1;
        }
    }
    let data = RandersData::new(a, beta).map_err(|_| Error::BaseNotRanders {
        residual: f64::INFINITY,
    })?;
    let residual = dirs
        .iter()
        .zip(&vals)
        .map(|(d, (np, nm))| (data.norm(d) - np).abs().max((data.norm(&(-d)) - nm).abs()))
        .fold(0.0, f64::max);
    Ok(RandersFit { data, residual })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureRow {
    pub base_point: Vector,
    pub fit_residual: f64,
    /// `|W₂ − dπ W|` in base chart coordinates.
    pub wind_error: f64,
    /// `|h₂ − h_base|` entrywise.
    pub metric_error: f64,
    /// Largest `| |ŵ|_h − |w|_{h₂} |` for `h`-horizontal lifts `ŵ`.
    pub horizontal_error: f64,
}

impl StructureRow {
    pub fn passed(&self) -> bool {
        self.fit_residual <= FIT_TOL
            && self.wind_error <= FIT_TOL
            && self.metric_error <= FIT_TOL
            && self.horizontal_error <= FIT_TOL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    pub rows: Vec<StructureRow>,
}

impl StructureReport {
    pub fn passed(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.passed())
    }

    pub fn max_data_error(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.wind_error.max(r.metric_error))
            .fold(0.0, f64::max)
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "base_point",
            "fit_residual",
            "wind_error",
            "metric_error",
            "horizontal_error",
            "pass",
        ]);
        for r in &self.rows {
            t.push(vec![
                join(&r.base_point),
                num(r.fit_residual),
                num(r.wind_error),
                num(r.metric_error),
                num(r.horizontal_error),
                flag(r.passed()),
            ]);
        }
        t
    }
}

fn direction_set(m: usize) -> Vec<Vector> {
    let mut dirs = Vec::new();
    for i in 0..m {
        dirs.push(Vector::from_fn(m, |k, _| if k == i { 1.0 } else { 0.0 }));
        for j in i + 1..m {
            dirs.push(Vector::from_fn(m, |k, _| if k == i || k == j { 1.0 } else { 0.0 }));
            dirs.push(Vector::from_fn(m, |k, _| {
                if k == i {
                    1.0
                } else if k == j {
                    -0.5
                } else {
                    0.0
                }
            }));
        }
    }
    dirs
}

/// Fits Randers data to the induced base norm at sampled base points and
/// compares it with the projected Zermelo data `(h_base, dπ W)`; with the
/// winds removed, horizontal lifts must preserve `h`-lengths.
pub fn check_randers_submersion_structure(
    spec: &SubmersionSpec,
    samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<StructureReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = spec.base.dim();
    let dirs = direction_set(m);
    let still = spec.total.without_wind();
    let points = (0..samples)
        .map(|_| spec.total.sample_point(&mut rng, 0.6))
        .collect::<Result<Vec<_>>>()?;
    let rows = points
        .par_iter()
        .map(|p| -> Result<StructureRow> {
            let (b, d) = spec.chart_differential(p)?;
            let zt = spec.total.zermelo_at(p)?;
            let fit = fit_randers(|w| Ok(quotient_norm(&zt, &d, w, tol)?.value), &dirs)?;
            if fit.residual > FIT_TOL {
                return Err(Error::BaseNotRanders { residual: fit.residual });
            }
            let z2 = fit.data.to_zermelo()?;
            let projected = &d * spec.total.wind(p);
            let h_base = spec.base.metric(&b);
            let h = still.metric(p);
            let hinv = h
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::NotPositiveDefinite("total metric".into()))?;
            let gram = &d * &hinv * d.transpose();
            let ginv = gram.try_inverse().ok_or_else(|| Error::NotASubmersion {
                at: spec.total.ambient(p).iter().copied().collect(),
                rank: 0,
                expected: m,
            })?;
            let mut horizontal: f64 = 0.0;
            for w in &dirs {
                let lift = &hinv * d.transpose() * (&ginv * w);
                let up = lift.dot(&(&h * &lift)).sqrt();
                let down = w.dot(&(&z2.h * w)).sqrt();
                horizontal = horizontal.max((up - down).abs());
            }
            Ok(StructureRow {
                base_point: spec.base.ambient(&b),
                fit_residual: fit.residual,
                wind_error: (&z2.w - projected).amax(),
                metric_error: (&z2.h - h_base).amax(),
                horizontal_error: horizontal,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StructureReport { rows })
}
