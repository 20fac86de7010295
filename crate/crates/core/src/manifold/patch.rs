use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numkit::fd_jacobian;
use crate::{Matrix, Vector};

use super::{JacFn, MapFn};

/// A parametrised submanifold: a map from the box `[lower, upper]` in `R^k`
/// into ambient coordinates.
#[derive(Clone)]
pub struct SubmanifoldPatch {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    param: MapFn,
    frame: Option<JacFn>,
}

impl fmt::Debug for SubmanifoldPatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SubmanifoldPatch")
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .finish_non_exhaustive()
    }
}

impl SubmanifoldPatch {
    pub fn new<P>(lower: Vec<f64>, upper: Vec<f64>, param: P) -> Result<Self>
    where
        P: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        if lower.len() != upper.len() || lower.iter().zip(&upper).any(|(a, b)| !(a <= b)) {
            return Err(Error::Domain(format!("bad parameter box {lower:?}..{upper:?}")));
        }
        Ok(Self {
            lower,
            upper,
            param: Arc::new(param),
            frame: None,
        })
    }

    /// A single point.
    pub fn point(p: Vector) -> Self {
        Self {
            lower: Vec::new(),
            upper: Vec::new(),
            param: Arc::new(move |_: &Vector| p.clone()),
            frame: None,
        }
    }

    /// Supply the tangent frame analytically (ambient `N x k`).
    pub fn with_frame<J>(mut self, frame: J) -> Self
    where
        J: Fn(&Vector) -> Matrix + Send + Sync + 'static,
    {
        self.frame = Some(Arc::new(frame));
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn eval(&self, s: &Vector) -> Vector {
        (self.param)(s)
    }

    /// Ambient tangent frame at `s`, one column per parameter.
    pub fn frame(&self, s: &Vector) -> Result<Matrix> {
        if let Some(f) = &self.frame {
            return Ok(f(s));
        }
        let n = self.eval(s).len();
        if self.dim() == 0 {
            return Ok(Matrix::zeros(n, 0));
        }
        let p = |x: &Vector| Ok(self.eval(x));
        fd_jacobian(&p, s, 1e-6)
    }

    pub fn contains(&self, s: &Vector, slack: f64) -> bool {
        s.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(x, (lo, hi))| *x >= lo - slack && *x <= hi + slack)
    }

    pub fn center(&self) -> Vector {
        Vector::from_fn(self.dim(), |i, _| 0.5 * (self.lower[i] + self.upper[i]))
    }

    /// Parameters on a regular grid with `per_dim` points per axis.
    pub fn grid(&self, per_dim: usize) -> Vec<Vector> {
        let k = self.dim();
        if k == 0 {
            return vec![Vector::zeros(0)];
        }
        let per = per_dim.max(1);
        let total = per.pow(k as u32);
        (0..total)
            .map(|mut idx| {
                Vector::from_fn(k, |i, _| {
                    let j = idx % per;
                    idx /= per;
                    if per == 1 {
                        0.5 * (self.lower[i] + self.upper[i])
                    } else {
                        self.lower[i] + (self.upper[i] - self.lower[i]) * j as f64 / (per - 1) as f64
                    }
                })
            })
            .collect()
    }
}
