use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Chart, Scene, SceneKind};
use crate::error::{Error, Result};
use crate::{Matrix, Vector};

/// Builtin manifolds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Template {
    /// Ball of `R^dim` about the origin.
    EuclideanBall { dim: usize, radius: f64 },
    /// Round 2-sphere in `R^3`.
    Sphere2 { radius: f64 },
    /// Round 3-sphere in `R^4 = C^2`, the total space of the Hopf fibration.
    Sphere3Hopf { radius: f64 },
    /// Ball of `R^3` foliated by circles about the z-axis times the axis.
    CylinderR3 { radius: f64 },
}

impl Template {
    pub fn label(&self) -> &'static str {
        match self {
            Template::EuclideanBall { .. } => "euclidean-ball",
            Template::Sphere2 { .. } => "sphere2",
            Template::Sphere3Hopf { .. } => "sphere3-hopf",
            Template::CylinderR3 { .. } => "cylinder-r3",
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match *self {
            Template::EuclideanBall { dim, .. } => dim,
            Template::Sphere2 { .. } | Template::CylinderR3 { .. } => 3,
            Template::Sphere3Hopf { .. } => 4,
        }
    }

    fn is_sphere(&self) -> bool {
        matches!(self, Template::Sphere2 { .. } | Template::Sphere3Hopf { .. })
    }
}

type VectorField = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

/// Builtin wind fields, written in ambient coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WindSpec {
    Zero,
    /// Constant vector (flat templates).
    Constant {
        w: Vec<f64>,
    },
    /// `ε (−x₂, x₁, 0, …) / (1 + x₁² + x₂²)`, tangent to circles about the origin.
    Rotational {
        epsilon: f64,
    },
    /// `c x`, an infinitesimal homothety with `σ = −2c`.
    Radial {
        c: f64,
    },
    /// `ε (−x₂, x₁, 0, …)`, rotation about the last axes (Killing).
    Killing {
        epsilon: f64,
    },
    /// `ε i z` on `C²`: tangent to the Hopf fibers.
    HopfVertical {
        epsilon: f64,
    },
    /// `ε (i z₁, 0)`: Killing and projectable along the Hopf map.
    HopfBasic {
        epsilon: f64,
    },
    /// The horizontal part of `HopfBasic`.
    HopfHorizontal {
        epsilon: f64,
    },
    /// `ε (x₂, 0, …)`: a linear shear, not a homothety.
    Shear {
        epsilon: f64,
    },
}

impl WindSpec {
    pub fn label(&self) -> String {
        match self {
            WindSpec::Zero => "zero".into(),
            WindSpec::Constant { w } => format!("constant{w:?}"),
            WindSpec::Rotational { epsilon } => format!("rotational(eps={epsilon})"),
            WindSpec::Radial { c } => format!("radial(c={c})"),
            WindSpec::Killing { epsilon } => format!("killing(eps={epsilon})"),
            WindSpec::HopfVertical { epsilon } => format!("hopf-vertical(eps={epsilon})"),
            WindSpec::HopfBasic { epsilon } => format!("hopf-basic(eps={epsilon})"),
            WindSpec::HopfHorizontal { epsilon } => format!("hopf-horizontal(eps={epsilon})"),
            WindSpec::Shear { epsilon } => format!("shear(eps={epsilon})"),
        }
    }

    fn field(&self, template: &Template) -> Result<VectorField> {
        let n = template.ambient_dim();
        let flat_only = |name: &str| -> Result<()> {
            if template.is_sphere() {
                Err(Error::Config(format!(
                    "wind `{name}` is not tangent to {}",
                    template.label()
                )))
            } else {
                Ok(())
            }
        };
        let hopf_only = |name: &str| -> Result<()> {
            if matches!(template, Template::Sphere3Hopf { .. }) {
                Ok(())
            } else {
                Err(Error::Config(format!("wind `{name}` needs the sphere3-hopf template")))
            }
        };
        Ok(match self.clone() {
            WindSpec::Zero => Arc::new(move |_: &Vector| Vector::zeros(n)),
            WindSpec::Constant { w } => {
                flat_only("constant")?;
                if w.len() != n {
                    return Err(Error::Config(format!(
                        "constant wind has {} components, expected {n}",
                        w.len()
                    )));
                }
                let w = Vector::from_vec(w);
                Arc::new(move |_: &Vector| w.clone())
            }
            WindSpec::Rotational { epsilon } => {
                flat_only("rotational")?;
                need_plane(n)?;
                Arc::new(move |p: &Vector| {
                    let mut w = Vector::zeros(p.len());
                    let f = epsilon / (1.0 + p[0] * p[0] + p[1] * p[1]);
                    w[0] = -f * p[1];
                    w[1] = f * p[0];
                    w
                })
            }
            WindSpec::Radial { c } => {
                flat_only("radial")?;
                Arc::new(move |p: &Vector| p * c)
            }
            WindSpec::Killing { epsilon } => {
                need_plane(n)?;
                Arc::new(move |p: &Vector| {
                    let mut w = Vector::zeros(p.len());
                    w[0] = -epsilon * p[1];
                    w[1] = epsilon * p[0];
                    w
                })
            }
            WindSpec::HopfVertical { epsilon } => {
                hopf_only("hopf-vertical")?;
                Arc::new(move |p: &Vector| hopf_vertical(p) * epsilon)
            }
            WindSpec::HopfBasic { epsilon } => {
                hopf_only("hopf-basic")?;
                Arc::new(move |p: &Vector| hopf_basic(p) * epsilon)
            }
            WindSpec::HopfHorizontal { epsilon } => {
                hopf_only("hopf-horizontal")?;
                Arc::new(move |p: &Vector| {
                    let b = hopf_basic(p);
                    let v = hopf_vertical(p);
                    (&b - &v * (b.dot(&v) / v.norm_squared())) * epsilon
                })
            }
            WindSpec::Shear { epsilon } => {
                flat_only("shear")?;
                need_plane(n)?;
                Arc::new(move |p: &Vector| {
                    let mut w = Vector::zeros(p.len());
                    w[0] = epsilon * p[1];
                    w
                })
            }
        })
    }
}

fn need_plane(n: usize) -> Result<()> {
    if n < 2 {
        Err(Error::Config("wind needs at least two ambient dimensions".into()))
    } else {
        Ok(())
    }
}

/// `i z` on `C²` with `z₁ = x₁ + i x₂`, `z₂ = x₃ + i x₄`.
pub(crate) fn hopf_vertical(p: &Vector) -> Vector {
    Vector::from_vec(vec![-p[1], p[0], -p[3], p[2]])
}

fn hopf_basic(p: &Vector) -> Vector {
    Vector::from_vec(vec![-p[1], p[0], 0.0, 0.0])
}

/// A builtin manifold together with its wind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub template: Template,
    #[serde(default = "default_wind")]
    pub wind: WindSpec,
}

fn default_wind() -> WindSpec {
    WindSpec::Zero
}

impl SceneSpec {
    pub fn new(template: Template, wind: WindSpec) -> Self {
        Self { template, wind }
    }

    /// Builds the scene and checks `h(W,W) < 1` on a deterministic sample
    /// of the working region (boundary included).
    pub fn build(&self) -> Result<Scene> {
        let scene = self.build_unchecked()?;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut pts = Vec::with_capacity(320);
        for _ in 0..256 {
            pts.push(scene.sample_point(&mut rng, 1.0)?);
        }
        if let SceneKind::Euclidean { radius } = scene.kind {
            let n = scene.ambient_dim();
            for i in 0..n {
                for s in [-1.0, 1.0] {
                    let mut e = Vector::zeros(n);
                    e[i] = s * radius;
                    pts.push(scene.locate(&e)?);
                }
            }
            for _ in 0..64 {
                let p = scene.sample_point(&mut rng, 1.0)?;
                let amb = scene.ambient(&p);
                if amb.norm() > 0.0 {
                    pts.push(scene.locate(&(amb.normalize() * radius))?);
                }
            }
        }
        scene.validate(&pts)?;
        Ok(scene)
    }

    /// Builds the scene without sampling the wind bound.
    pub fn build_unchecked(&self) -> Result<Scene> {
        let t = self.template;
        let scene = match t {
            Template::EuclideanBall { dim, radius } => {
                positive(radius, "radius")?;
                if dim == 0 {
                    return Err(Error::Config("dimension must be at least 1".into()));
                }
                Scene::new(
                    t.label(),
                    dim,
                    dim,
                    vec![identity_chart(dim)],
                    SceneKind::Euclidean { radius },
                )
            }
            Template::CylinderR3 { radius } => {
                positive(radius, "radius")?;
                Scene::new(
                    t.label(),
                    3,
                    3,
                    vec![identity_chart(3)],
                    SceneKind::Euclidean { radius },
                )
            }
            Template::Sphere2 { radius } | Template::Sphere3Hopf { radius } => {
                positive(radius, "radius")?;
                let n = t.ambient_dim() - 1;
                Scene::new(
                    t.label(),
                    n,
                    n + 1,
                    vec![stereographic(n, radius, 1.0), stereographic(n, radius, -1.0)],
                    SceneKind::Sphere { radius },
                )
            }
        };
        let field = self.wind.field(&t)?;
        let label = self.wind.label();
        Ok(scene.with_wind(&label, move |p| field(p)))
    }
}

fn positive(x: f64, what: &str) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} must be positive, got {x}")))
    }
}

fn identity_chart(n: usize) -> Chart {
    Chart::new(
        "identity",
        Arc::new(|x: &Vector| x.clone()),
        Arc::new(move |_: &Vector| Matrix::identity(n, n)),
        Arc::new(|p: &Vector| Some(p.clone())),
        f64::INFINITY,
    )
}

/// Stereographic chart of the radius-`r` sphere `S^n`. `pole = 1` projects
/// from the south pole (chart centred at the north pole), `pole = -1` the
/// opposite.
fn stereographic(n: usize, r: f64, pole: f64) -> Chart {
    let name = if pole > 0.0 { "north" } else { "south" };
    Chart::new(
        name,
        Arc::new(move |x: &Vector| {
            let q = x.norm_squared();
            let d = 1.0 + q;
            let mut p = Vector::zeros(n + 1);
            for i in 0..n {
                p[i] = 2.0 * r * x[i] / d;
            }
            p[n] = pole * r * (1.0 - q) / d;
            p
        }),
        Arc::new(move |x: &Vector| {
            let q = x.norm_squared();
            let d = 1.0 + q;
            let mut j = Matrix::zeros(n + 1, n);
            for i in 0..n {
                for k in 0..n {
                    let delta = if i == k { 1.0 } else { 0.0 };
                    j[(i, k)] = 2.0 * r * (delta / d - 2.0 * x[i] * x[k] / (d * d));
                }
            }
            for k in 0..n {
                j[(n, k)] = -pole * 4.0 * r * x[k] / (d * d);
            }
            j
        }),
        Arc::new(move |p: &Vector| {
            let den = r + pole * p[n];
            if den <= 1e-9 * r {
                return None;
            }
            Some(Vector::from_fn(n, |i, _| p[i] / den))
        }),
        1.25,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::fd_jacobian;

    #[test]
    fn stereographic_round_trip_and_jacobian() {
        for pole in [1.0, -1.0] {
            let c = stereographic(3, 1.7, pole);
            let x = Vector::from_vec(vec![0.3, -0.8, 0.5]);
            let p = c.to_ambient(&x);
            assert!((p.norm() - 1.7).abs() < 1e-14);
            assert!((c.from_ambient(&p).unwrap() - &x).norm() < 1e-14);
            let f = |y: &Vector| Ok(c.to_ambient(y));
            let fd = fd_jacobian(&f, &x, 1e-6).unwrap();
            assert!((c.jacobian(&x) - fd).amax() < 1e-8);
        }
    }

    #[test]
    fn hopf_winds_are_tangent() {
        let s = SceneSpec::new(
            Template::Sphere3Hopf { radius: 1.0 },
            WindSpec::HopfHorizontal { epsilon: 0.4 },
        )
        .build()
        .unwrap();
        let p = Vector::from_vec(vec![0.5, 0.5, 0.5, -0.5]);
        let w = s.ambient_wind(&p);
        assert!(w.dot(&p).abs() < 1e-14);
        assert!(w.dot(&hopf_vertical(&p)).abs() < 1e-14);
    }

    #[test]
    fn rejects_incompatible_and_too_strong_winds() {
        assert!(SceneSpec::new(
            Template::Sphere2 { radius: 1.0 },
            WindSpec::Constant { w: vec![0.1, 0.0, 0.0] }
        )
        .build()
        .is_err());
        assert!(SceneSpec::new(
            Template::EuclideanBall { dim: 2, radius: 1.0 },
            WindSpec::HopfVertical { epsilon: 0.1 }
        )
        .build()
        .is_err());
        assert!(matches!(
            SceneSpec::new(
                Template::EuclideanBall { dim: 2, radius: 3.0 },
                WindSpec::Radial { c: 0.5 }
            )
            .build(),
            Err(Error::InvalidWind { .. })
        ));
    }

    #[test]
    fn scene_spec_from_toml() {
        let spec: SceneSpec =
            toml::from_str("[template]\nkind = \"sphere2\"\nradius = 1.0\n[wind]\ntype = \"killing\"\nepsilon = 0.2\n")
                .unwrap();
        assert_eq!(spec.wind, WindSpec::Killing { epsilon: 0.2 });
        assert!(toml::from_str::<SceneSpec>("[template]\nkind = \"sphere2\"\nradius = 1.0\nbogus = 1\n").is_err());
    }
}
