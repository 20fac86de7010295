//! Dormand–Prince 5(4) with the order-4 continuous extension.

use crate::error::{Error, Result};
use crate::Vector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub initial_step: Option<f64>,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            initial_step: None,
            max_step: f64::INFINITY,
            max_steps: 200_000,
        }
    }
}

/// One accepted step with its interpolation coefficients.
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    coeffs: [Vector; 5],
}

impl DenseStep {
    fn eval_theta(&self, theta: f64) -> Vector {
        let [r1, r2, r3, r4, r5] = &self.coeffs;
        let th1 = 1.0 - theta;
        r1 + (r2 + (r3 + (r4 + r5 * th1) * theta) * th1) * theta
    }

    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }
}

/// Integrated solution. Interior values come from the dense interpolant.
#[derive(Debug, Clone)]
pub struct Trajectory {
    steps: Vec<DenseStep>,
    t_start: f64,
    t_end: f64,
    y_start: Vector,
    y_end: Vector,
    dense: bool,
}

impl Trajectory {
    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn start_state(&self) -> &Vector {
        &self.y_start
    }

    pub fn end_state(&self) -> &Vector {
        &self.y_end
    }

    pub fn steps(&self) -> &[DenseStep] {
        &self.steps
    }

    fn covers(&self, t: f64) -> bool {
        let (lo, hi) = if self.t_end >= self.t_start {
            (self.t_start, self.t_end)
        } else {
            (self.t_end, self.t_start)
        };
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        t >= lo - slack && t <= hi + slack
    }

    /// State at time `t` inside the integrated span.
    pub fn eval(&self, t: f64) -> Result<Vector> {
        if !self.covers(t) {
            return Err(Error::Domain(format!(
                "t = {t} outside integrated span [{}, {}]",
                self.t_start, self.t_end
            )));
        }
        if t == self.t_end {
            return Ok(self.y_end.clone());
        }
        if t == self.t_start {
            return Ok(self.y_start.clone());
        }
        if !self.dense {
            return Err(Error::Domain("trajectory was integrated without dense output".into()));
        }
        let forward = self.t_end >= self.t_start;
        // Steps are ordered in integration direction; find the first one whose end passes t.
        let idx = self
            .steps
            .partition_point(|s| if forward { s.t1() < t } else { s.t1() > t })
            .min(self.steps.len() - 1);
        let step = &self.steps[idx];
        Ok(step.eval_theta((t - step.t0) / step.h))
    }

    /// `n + 1` equally spaced samples over the span, endpoints included.
    pub fn sample(&self, n: usize) -> Result<Vec<(f64, Vector)>> {
        let n = n.max(1);
        (0..=n)
            .map(|i| {
                let t = self.t_start + (self.t_end - self.t_start) * i as f64 / n as f64;
                self.eval(t).map(|y| (t, y))
            })
            .collect()
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn error_norm(err: &Vector, y0: &Vector, y1: &Vector, opts: &OdeOptions) -> f64 {
    let n = err.len().max(1) as f64;
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1.iter()))
        .map(|(e, (a, b))| {
            let sc = opts.abs_tol + opts.rel_tol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

fn initial_step<F>(field: &mut F, t0: f64, y0: &Vector, f0: &Vector, span: f64, opts: &OdeOptions) -> f64
where
    F: FnMut(f64, &Vector) -> Result<Vector>,
{
    let zero = Vector::zeros(y0.len());
    let d0 = error_norm(y0, &zero, y0, opts);
    let d1 = error_norm(f0, &zero, y0, opts);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(span.abs()).min(opts.max_step);
    let dir = span.signum();
    if let Ok(f1) = field(t0 + dir * h, &(y0 + f0 * (dir * h))) {
        let d2 = error_norm(&(f1 - f0), &zero, y0, opts) / h;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        h = (100.0 * h).min(h1);
    }
    h.min(span.abs()).min(opts.max_step).max(1e-12 * span.abs())
}

/// Integrate `y' = field(t, y)` over `span`. With `dense` the returned
/// trajectory can be evaluated at any interior time.
pub fn integrate_ivp<F>(
    mut field: F,
    y0: &Vector,
    span: (f64, f64),
    opts: &OdeOptions,
    dense: bool,
) -> Result<Trajectory>
where
    F: FnMut(f64, &Vector) -> Result<Vector>,
{
    run(&mut field, y0, span, opts, dense, None::<&dyn Fn(f64, &Vector) -> bool>).map(|(tr, _)| tr)
}

/// Like [`integrate_ivp`], but stops at the first time `stop(t, y)` turns
/// true (located by bisection on the interpolant). The flag reports whether
/// the stop fired.
pub fn integrate_until<F, S>(
    mut field: F,
    y0: &Vector,
    span: (f64, f64),
    opts: &OdeOptions,
    stop: S,
) -> Result<(Trajectory, bool)>
where
    F: FnMut(f64, &Vector) -> Result<Vector>,
    S: Fn(f64, &Vector) -> bool,
{
    run(&mut field, y0, span, opts, true, Some(&stop))
}

fn run<F, S>(
    field: &mut F,
    y0: &Vector,
    (t0, t1): (f64, f64),
    opts: &OdeOptions,
    dense: bool,
    stop: Option<&S>,
) -> Result<(Trajectory, bool)>
where
    F: FnMut(f64, &Vector) -> Result<Vector>,
    S: Fn(f64, &Vector) -> bool + ?Sized,
{
    if !(t0.is_finite() && t1.is_finite()) {
        return Err(Error::Domain("integration span must be finite".into()));
    }
    let mut traj = Trajectory {
        steps: Vec::new(),
        t_start: t0,
        t_end: t0,
        y_start: y0.clone(),
        y_end: y0.clone(),
        dense,
    };
    let span = t1 - t0;
    if span == 0.0 {
        return Ok((traj, false));
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0.clone();
    let mut k1 = field(t, &y)?;
    let mut h = opts
        .initial_step
        .unwrap_or_else(|| initial_step(field, t0, y0, &k1, span, opts))
        .abs();
    let mut last_rejected = false;
    let mut last_field_error: Option<Error> = None;

    for _ in 0..opts.max_steps {
        let remaining = (t1 - t) * dir;
        if remaining <= 1e-14 * (1.0 + t1.abs()) {
            break;
        }
        h = h.min(remaining).min(opts.max_step);
        if h < 1e-14 * (1.0 + t.abs()) {
            return Err(last_field_error.unwrap_or(Error::Stiffness {
                t,
                state: y.iter().copied().collect(),
            }));
        }
        let hs = dir * h;
        let attempt = (|| -> Result<(Vector, Vector, [Vector; 7])> {
            let k2 = field(t + C2 * hs, &(&y + &k1 * (A21 * hs)))?;
            let k3 = field(t + C3 * hs, &(&y + (&k1 * A31 + &k2 * A32) * hs))?;
            let k4 = field(t + C4 * hs, &(&y + (&k1 * A41 + &k2 * A42 + &k3 * A43) * hs))?;
            let k5 = field(
                t + C5 * hs,
                &(&y + (&k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * hs),
            )?;
            let k6 = field(
                t + hs,
                &(&y + (&k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * hs),
            )?;
            let y_new = &y + (&k1 * A71 + &k3 * A73 + &k4 * A74 + &k5 * A75 + &k6 * A76) * hs;
            let k7 = field(t + hs, &y_new)?;
            let err = (&k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * hs;
            Ok((y_new, err, [k1.clone(), k2, k3, k4, k5, k6, k7]))
        })();

        let (y_new, err, ks) = match attempt {
            Ok(v) => v,
            Err(e) => {
                last_field_error = Some(e);
                h *= 0.25;
                last_rejected = true;
                continue;
            }
        };
        if y_new.iter().any(|v| !v.is_finite()) {
            h *= 0.25;
            last_rejected = true;
            continue;
        }
        let en = error_norm(&err, &y, &y_new, opts);
        if en <= 1.0 {
            last_field_error = None;
            let [k1s, _, k3, k4, k5, k6, k7] = ks;
            let ydiff = &y_new - &y;
            let bspl = &k1s * hs - &ydiff;
            let r4 = &ydiff - &k7 * hs - &bspl;
            let r5 = (&k1s * D1 + &k3 * D3 + &k4 * D4 + &k5 * D5 + &k6 * D6 + &k7 * D7) * hs;
            let step = DenseStep {
                t0: t,
                h: hs,
                coeffs: [y.clone(), ydiff, bspl, r4, r5],
            };
            let t_new = t + hs;
            if let Some(stop) = stop {
                if stop(t_new, &y_new) {
                    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if stop(t + mid * hs, &step.eval_theta(mid)) {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    let t_event = t + hi * hs;
                    traj.y_end = step.eval_theta(hi);
                    traj.t_end = t_event;
                    traj.steps.push(step);
                    if !dense {
                        let keep = traj.steps.pop();
                        traj.steps.clear();
                        traj.steps.extend(keep);
                    }
                    return Ok((traj, true));
                }
            }
            if dense {
                traj.steps.push(step);
            }
            t = t_new;
            y = y_new;
            k1 = k7;
            let fac = if en == 0.0 {
                10.0
            } else {
                (0.9 * en.powf(-0.2)).clamp(0.2, 10.0)
            };
            h *= if last_rejected { fac.min(1.0) } else { fac };
            last_rejected = false;
        } else {
            h *= (0.9 * en.powf(-0.2)).clamp(0.2, 1.0);
            last_rejected = true;
        }
    }
    if (t1 - t) * dir > 1e-14 * (1.0 + t1.abs()) {
        return Err(Error::Stiffness {
            t,
            state: y.iter().copied().collect(),
        });
    }
    traj.t_end = t1;
    traj.y_end = y;
    Ok((traj, false))
}
