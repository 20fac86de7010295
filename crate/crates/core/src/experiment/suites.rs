use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{CheckRow, SceneFile, Status, SuiteOutcome, SuiteParams};
use crate::error::{Error, Result};
use crate::foliation::{
    blowup_metric_check, check_equidistance, check_equifocal, check_finsler, check_minkowski_lemmas, check_theorem1,
    check_wind_tangency, BlowupParams, EquifocalParams, FinslerParams, FoliationModel, LeafPair, EQUIDISTANCE_RELATIVE,
    FLOW_SPREAD_THRESHOLD, LEAF_SPREAD_THRESHOLD, ORTHOGONALITY_THRESHOLD, TENSOR_THRESHOLD,
};
use crate::geodesic::{geodesic_ivp_sampled, navigation_geodesic, Direction, GeodesicPath};
use crate::manifold::{Scene, Template, WindSpec};
use crate::minkowski::{audit_norm, fundamental_tensor, FnNorm};
use crate::numkit::Tolerances;
use crate::randers::randers_fundamental_tensor;
use crate::report::{num, Table};
use crate::submersion::{check_randers_submersion_structure, check_submersion, SubmersionSpec, FIT_TOL};
use crate::{Matrix, Vector};

pub(super) struct Context<'a> {
    pub file: &'a SceneFile,
    pub scene: &'a Scene,
    pub foliation: Option<&'a FoliationModel>,
    pub params: &'a SuiteParams,
    pub seed: u64,
    pub tol: &'a Tolerances,
}

impl Context<'_> {
    fn rng(&self, stream: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ stream)
    }

    fn foliation(&self) -> Result<&FoliationModel> {
        self.foliation
            .ok_or_else(|| Error::Config(format!("scene `{}` declares no foliation", self.file.name)))
    }

    fn finsler_params(&self) -> FinslerParams {
        let d = FinslerParams::default();
        let p = self.params;
        FinslerParams {
            trials: p.trials.unwrap_or(d.trials),
            t_end: p.t_end.unwrap_or(d.t_end),
            samples: p.path_samples.unwrap_or(d.samples),
            sample_fraction: p.sample_fraction.unwrap_or(d.sample_fraction),
            min_generator: p.min_generator.unwrap_or(d.min_generator),
            seed: self.seed,
        }
    }
}

fn vec_of(xs: &[f64]) -> Vector {
    Vector::from_vec(xs.to_vec())
}

fn colatitude(theta: f64) -> Vector {
    vec_of(&[theta.sin(), 0.0, theta.cos()])
}

/// Default leaf choices: (source, target, regular leaf, blow-up point, focal times).
struct Defaults {
    source: Vector,
    target: Vector,
    leaf: Vector,
    q: Vector,
    focal_t: Vec<f64>,
}

fn defaults(fol: &FoliationModel) -> Defaults {
    match fol.name.as_str() {
        "circles" => Defaults {
            source: vec_of(&[1.0, 0.0]),
            target: vec_of(&[2.0, 0.0]),
            leaf: vec_of(&[1.0, 0.0]),
            q: vec_of(&[1.0, 0.0]),
            focal_t: Vec::new(),
        },
        "lines" => Defaults {
            source: vec_of(&[0.0, 0.0]),
            target: vec_of(&[0.0, 1.0]),
            leaf: vec_of(&[0.0, 0.0]),
            q: vec_of(&[0.3, 0.5]),
            focal_t: Vec::new(),
        },
        "latitudes" => Defaults {
            source: colatitude(FRAC_PI_3),
            target: colatitude(FRAC_PI_2),
            leaf: colatitude(FRAC_PI_3),
            q: colatitude(FRAC_PI_3),
            focal_t: vec![FRAC_PI_3],
        },
        "cylinder" => Defaults {
            source: vec_of(&[1.0, 0.0, 0.0]),
            target: vec_of(&[1.5, 0.0, 0.0]),
            leaf: vec_of(&[1.0, 0.0, 0.0]),
            q: vec_of(&[1.0, 0.0, 0.0]),
            focal_t: Vec::new(),
        },
        _ => {
            let a = 0.5f64;
            Defaults {
                source: vec_of(&[1.0, 0.0, 0.0, 0.0]),
                target: vec_of(&[a.cos(), 0.0, a.sin(), 0.0]),
                leaf: vec_of(&[1.0, 0.0, 0.0, 0.0]),
                q: vec_of(&[1.0, 0.0, 0.0, 0.0]),
                focal_t: Vec::new(),
            }
        }
    }
}

fn point_param(p: &Option<Vec<f64>>, default: &Vector) -> Vector {
    p.as_ref().map(|x| vec_of(x)).unwrap_or_else(|| default.clone())
}

pub(super) fn norm_audit(ctx: &Context, out: &mut SuiteOutcome) -> Result<()> {
    let mut rng = ctx.rng(1);
    let samples = ctx.params.samples.unwrap_or(20);
    let n = ctx.scene.dim();
    let mut detail = Table::new(&[
        "sample",
        "point",
        "tensor_rel_error",
        "gvv_error",
        "homogeneity_error",
        "min_eigenvalue",
    ]);
    for i in 0..samples {
        let p = ctx.scene.sample_point(&mut rng, 0.9)?;
        let zd = ctx.scene.zermelo_at(&p)?;
        let rd = zd.to_randers()?;
        let audit = audit_norm(&zd, 8, &mut rng, ctx.tol)?;
        let v = Vector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let closed = randers_fundamental_tensor(&rd, &v)?;
        let zc = zd.clone();
        let numeric = fundamental_tensor(&FnNorm::new(n, move |x: &Vector| zc.norm(x)), &v, ctx.tol)?;
        let rel = (&closed - &numeric).amax() / closed.amax();
        let z = zd.norm(&v);
        let gvv = (v.dot(&(&closed * &v)) - z * z).abs();
        let item = format!("sample {i}");
        out.checks.push(CheckRow::at_most(
            "tensor_rel_error",
            item.clone(),
            rel,
            TENSOR_THRESHOLD,
        ));
        out.checks.push(CheckRow::at_most("gvv_error", item.clone(), gvv, 1e-8));
        out.checks.push(CheckRow::at_most(
            "homogeneity_error",
            item.clone(),
            audit.max_homogeneity_error,
            1e-10,
        ));
        out.checks.push(CheckRow::with_status(
            "min_tensor_eigenvalue",
            item,
            audit.min_tensor_eigenvalue,
            0.0,
            Status::from_pass(audit.min_tensor_eigenvalue > 0.0),
        ));
        detail.push(vec![
            i.to_string(),
            crate::foliation::join(&ctx.scene.ambient(&p)),
            num(rel),
            num(gvv),
            num(audit.max_homogeneity_error),
            num(audit.min_tensor_eigenvalue),
        ]);
    }
    out.files.push(("norms.csv".into(), detail));
    Ok(())
}

pub(super) fn convert(ctx: &Context, out: &mut SuiteOutcome) -> Result<()> {
    let mut rng = ctx.rng(2);
    let samples = ctx.params.samples.unwrap_or(100);
    let n = ctx.scene.dim();
    let mut round: f64 = 0.0;
    let mut indicatrix: f64 = 0.0;
    for i in 0..samples {
        let p = ctx.scene.sample_point(&mut rng, 0.9)?;
        let zd = ctx.scene.zermelo_at(&p)?;
        let rd = zd.to_randers()?;
        let back = rd.to_zermelo()?;
        let again = back.to_randers()?;
        let e1 = (&back.h - &zd.h).amax().max((&back.w - &zd.w).amax());
        let e2 = (&again.a - &rd.a).amax().max((&again.beta - &rd.beta).amax());
        let g = Vector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let u = &g / g.dot(&(&zd.h * &g)).sqrt();
        let e3 = (rd.norm(&(&u + &zd.w)) - 1.0).abs();
        round = round.max(e1.max(e2));
        indicatrix = indicatrix.max(e3);
        out.checks.push(CheckRow::at_most(
            "round_trip",
            format!("sample {i}"),
            e1.max(e2),
            1e-12,
        ));
        out.checks
            .push(CheckRow::at_most("indicatrix", format!("sample {i}"), e3, 1e-10));
    }
    out.notes.push(format!("round-trip max error: {}", num(round)));
    out.notes.push(format!("indicatrix max error: {}", num(indicatrix)));
    Ok(())
}

fn path_rows(table: &mut Table, trial: usize, method: &str, path: &GeodesicPath) {
    for s in &path.samples {
        let mut row = vec![trial.to_string(), method.to_string(), num(s.t)];
        row.extend(s.ambient.iter().map(|x| num(*x)));
        row.push(num(s.speed));
        table.push(row);
    }
}

pub(super) fn geodesic_compare(ctx: &Context, out: &mut SuiteOutcome) -> Result<()> {
    let mut rng = ctx.rng(3);
    let trials = ctx.params.trials.unwrap_or(4);
    let t_end = ctx.params.t_end.unwrap_or(1.0);
    let samples = ctx.params.path_samples.unwrap_or(20);
    let fraction = ctx.params.sample_fraction.unwrap_or(0.5);
    let scene = ctx.scene;
    let n = scene.dim();
    let mut starts = Vec::with_capacity(trials);
    for _ in 0..trials {
        let p = scene.sample_point(&mut rng, fraction)?;
        let d = Vector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let v = &d / scene.zermelo_at(&p)?.norm(&d);
        starts.push((p, v));
    }
    let results = starts
        .par_iter()
        .map(|(p, v)| {
            let direct = geodesic_ivp_sampled(scene, p, v, t_end, samples, ctx.tol)?;
            let nav = navigation_geodesic(scene, p, v, t_end, samples, ctx.tol)?;
            Ok((direct, nav))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut header = vec!["trial".to_string(), "method".into(), "t".into()];
    header.extend((0..scene.ambient_dim()).map(|i| format!("x{i}")));
    header.push("speed".into());
    let mut paths = Table::new(&header);
    let mut sup: f64 = 0.0;
    for (i, (direct, nav)) in results.iter().enumerate() {
        let dev = direct.sup_deviation(nav);
        sup = sup.max(dev);
        out.checks
            .push(CheckRow::at_most("sup_deviation", format!("trial {i}"), dev, 1e-4));
        out.checks.push(CheckRow::at_most(
            "speed_drift",
            format!("trial {i}"),
            direct.speed_drift(),
            1e-6,
        ));
        path_rows(&mut paths, i, "integrated", direct);
        path_rows(&mut paths, i, "navigation", nav);
    }
    out.notes.push(format!("sup deviation: {}", num(sup)));
    out.files.push(("paths.csv".into(), paths));
    Ok(())
}

fn leaf_pair(ctx: &Context, fol: &FoliationModel) -> Result<LeafPair> {
    let d = defaults(fol);
    let p = ctx.params;
    LeafPair::new(
        fol,
        &point_param(&p.source, &d.source),
        p.source_half_width.unwrap_or(1.0),
        &point_param(&p.target, &d.target),
        p.target_half_width.unwrap_or(0.4),
        p.targets.unwrap_or(10),
    )
}

pub(super) fn foliation_check(ctx: &Context, out: &mut SuiteOutcome) -> Result<()> {
    let fol = ctx.foliation()?;
    let scene = ctx.scene;
    let params = ctx.finsler_params();
    let finsler = check_finsler(scene, fol, &params, ctx.tol);
    for t in &finsler.trials {
        let item = format!("trial {}", t.index);
        if let Some(e) = &t.error {
            out.notes.push(format!("finsler trial {}: {e}", t.index));
            out.checks.push(CheckRow::with_status(
                "finsler_forward",
                item,
                f64::NAN,
                ORTHOGONALITY_THRESHOLD,
                Status::Fail,
            ));
            continue;
        }
        out.checks.push(CheckRow::at_most(
            "finsler_forward",
            item.clone(),
            t.forward,
            ORTHOGONALITY_THRESHOLD,
        ));
        out.checks.push(CheckRow::at_most(
            "finsler_backward",
            item,
            t.backward,
            ORTHOGONALITY_THRESHOLD,
        ));
    }
    out.files.push(("finsler.csv".into(), finsler.table()));

    let pair = leaf_pair(ctx, fol)?;
    let mut spread = Table::new(&["direction", "sample", "target", "distance"]);
    for dir in [Direction::Forward, Direction::Backward] {
        let name = match dir {
            Direction::Forward => "equidistance_forward",
            Direction::Backward => "equidistance_backward",
        };
        match check_equidistance(scene, &pair, dir, ctx.tol) {
            Ok(r) => {
                out.checks.push(CheckRow::at_most(
                    name,
                    format!("mean {}", num(r.mean)),
                    r.spread,
                    EQUIDISTANCE_RELATIVE * r.mean,
                ));
                spread.extend(r.table());
            }
            Err(e) => {
                out.notes.push(format!("{name}: {e}"));
                out.checks
                    .push(CheckRow::with_status(name, "search", f64::NAN, 0.0, Status::Fail));
            }
        }
    }
    out.files.push(("spread.csv".into(), spread));

    if !fol.singular_patches().is_empty() {
        let r = check_wind_tangency(scene, fol.singular_patches(), 5)?;
        for p in &r.points {
            out.checks.push(CheckRow::at_most(
                "wind_tangency",
                crate::foliation::join(&p.point),
                p.normal_component,
                r.threshold,
            ));
        }
    }

    if matches!(ctx.file.template, Template::CylinderR3 { .. }) {
        let r = check_minkowski_lemmas(
            scene,
            fol,
            ctx.params.leaves.unwrap_or(params.trials.min(6)),
            &params,
            ctx.tol,
        )?;
        out.checks.push(CheckRow::at_most(
            "leaf_perpendicular_beta",
            "leaves",
            r.perpendicular_residual,
            TENSOR_THRESHOLD,
        ));
        out.checks.push(CheckRow::at_most(
            "leaf_level_beta",
            "leaves",
            r.level_residual,
            TENSOR_THRESHOLD,
        ));
        out.checks.push(CheckRow::at_most(
            "beta_in_minimal_stratum",
            "axis",
            r.containment_residual,
            1e-10,
        ));
        out.checks.push(CheckRow::with_status(
            "euclidean_finsler",
            "trials",
            r.riemannian.max_forward().max(r.riemannian.max_backward()),
            ORTHOGONALITY_THRESHOLD,
            Status::from_pass(r.riemannian.passed()),
        ));
        out.notes
            .push(format!("beta_sharp: {}", crate::foliation::join(&r.beta_sharp)));
    }

    match check_theorem1(scene, fol, &pair, &params, ctx.tol) {
        Ok(r) => {
            out.checks.push(CheckRow::with_status(
                "theorem1_riemannian",
                "trials",
                r.riemannian.max_forward().max(r.riemannian.max_backward()),
                ORTHOGONALITY_THRESHOLD,
                Status::from_pass(r.riemannian.passed()),
            ));
            for e in &r.equidistance {
                out.checks.push(CheckRow::at_most(
                    "theorem1_h_equidistance",
                    crate::foliation::direction_label(e.direction),
                    e.spread,
                    EQUIDISTANCE_RELATIVE * e.mean,
                ));
            }
            out.checks.push(CheckRow::at_most(
                "theorem1_flow_spread",
                "leaves",
                r.flow_spread,
                FLOW_SPREAD_THRESHOLD,
            ));
        }
        Err(Error::Precondition(msg)) => {
            out.notes.push(format!("theorem1: not applicable ({msg})"));
            out.checks.push(CheckRow::with_status(
                "theorem1",
                "precondition",
                f64::NAN,
                0.0,
                Status::Skip,
            ));
        }
        Err(e) => return Err(e),
    }
    Ok(())
}

pub(super) fn equifocal(ctx: &Context, out: &mut SuiteOutcome) -> Result<()> {
    let fol = ctx.foliation()?;
    let d = defaults(fol);
    let p = ctx.params;
    let base = EquifocalParams::default();
    let params = EquifocalParams {
        regular_t: p.regular_t.clone().unwrap_or(base.regular_t),
        focal_t: p.focal_t.clone().unwrap_or(d.focal_t),
        focal_margin: p.focal_margin.unwrap_or(base.focal_margin),
        samples: p.samples.unwrap_or(base.samples),
        rank_cutoff: p.rank_cutoff.unwrap_or(base.rank_cutoff),
        normal_sign: p.normal_sign.unwrap_or(base.normal_sign),
    };
    let leaf = fol.plaque(&point_param(&p.leaf, &d.leaf), p.leaf_half_width.unwrap_or(1.0))?;
    let r = check_equifocal(ctx.scene, fol, &leaf, &params, ctx.tol)?;
    for row in &r.rows {
        let item = format!("t {}", num(row.t));
        if row.focal {
            out.checks.push(CheckRow::at_most(
                "focal_collapse",
                item.clone(),
                row.diameter,
                LEAF_SPREAD_THRESHOLD,
            ));
            out.checks.push(CheckRow::with_status(
                "focal_rank_drop",
                item.clone(),
                row.rank_max as f64,
                r.regular_rank as f64,
                Status::from_pass(row.rank_max < r.regular_rank),
            ));
        } else {
            out.checks.push(CheckRow::at_most(
                "leaf_spread",
                item.clone(),
                row.spread,
                LEAF_SPREAD_THRESHOLD,
            ));
            out.checks.push(CheckRow::with_status(
                "rank_constant",
                item.clone(),
                row.rank_max as f64,
                row.rank_min as f64,
                Status::from_pass(row.rank_min == row.rank_max),
            ));
        }
        out.checks.push(CheckRow::at_most(
            "endpoint_identity",
            item,
            row.identity_error,
            LEAF_SPREAD_THRESHOLD,
        ));
    }
    for t in &r.skipped {
        out.notes
            .push(format!("t = {} skipped: within the focal margin", num(*t)));
    }
    out.notes.push(format!("homothety sigma: {}", num(r.sigma)));
    out.files.push(("equifocal.csv".into(), r.table()));
    Ok(())
}

/// The submersion matching a scene, with the base carrying the projected wind.
fn submersion_for(file: &SceneFile, scene: &Scene) -> Result<SubmersionSpec> {
    match (&file.template, &file.wind) {
        (Template::Sphere3Hopf { radius }, wind) if (*radius - 1.0).abs() < 1e-15 => {
            let base_wind = match wind {
                WindSpec::Zero | WindSpec::HopfVertical { .. } => WindSpec::Zero,
                WindSpec::HopfBasic { epsilon } | WindSpec::HopfHorizontal { epsilon } => {
                    WindSpec::Killing { epsilon: *epsilon }
                }
                other => return Err(Error::Config(format!("no projected base wind for {}", other.label()))),
            };
            let base = crate::manifold::SceneSpec::new(Template::Sphere2 { radius: 0.5 }, base_wind).build()?;
            Ok(SubmersionSpec::hopf(scene.clone(), base))
        }
        (Template::EuclideanBall { dim, radius }, WindSpec::Constant { w }) if *dim >= 2 => {
            let base = crate::manifold::SceneSpec::new(
                Template::EuclideanBall {
                    dim: dim - 1,
                    radius: *radius,
                },
                WindSpec::Constant {
                    w: w[..dim - 1].to_vec(),
                },
            )
            .build()?;
            let a = Matrix::from_fn(dim - 1, *dim, |i, j| if i == j { 1.0 } else { 0.0 });
            SubmersionSpec::linear(scene.clone(), base, a)
        }
        (Template::EuclideanBall { dim, radius }, WindSpec::Zero) if *dim >= 2 => {
            let base = crate::manifold::SceneSpec::new(
                Template::EuclideanBall {
                    dim: dim - 1,
                    radius: *radius,
                },
                WindSpec::Zero,
            )
            .build()?;
            let a = Matrix::from_fn(dim - 1, *dim, |i, j| if i == j { 1.0 } else { 0.0 });
            SubmersionSpec::linear(scene.clone(), base, a)
        }
        _ => Err(Error::Config(format!(
            "scene `{}` has no builtin submersion (use sphere3-hopf or a flat ball with constant wind)",
            file.name
        ))),
    }
}

pub(super) fn submersion_check(ctx: &Context, out: &mut SuiteOutcome) -> Result<()> {
    let spec = submersion_for(ctx.file, ctx.scene)?;
    let samples = ctx.params.samples.unwrap_or(8);
    let directions = ctx.params.directions.unwrap_or(4);
    let threshold = ctx.params.threshold.unwrap_or(1e-5);
    let r = check_submersion(&spec, samples, directions, ctx.seed, threshold, ctx.tol)?;
    for (i, row) in r.rows.iter().enumerate() {
        out.checks.push(CheckRow::at_most(
            "unit_ball",
            format!("sample {i}"),
            row.error(),
            threshold,
        ));
    }
    out.checks
        .push(CheckRow::at_most("horizontal_minimizers", "all", r.horizontality, 1e-7));
    out.files.push(("submersion.csv".into(), r.table()));
    let s = check_randers_submersion_structure(&spec, samples.min(6), ctx.seed ^ 0x5b, ctx.tol)?;
    for (i, row) in s.rows.iter().enumerate() {
        let item = format!("base {i}");
        out.checks.push(CheckRow::at_most(
            "randers_fit",
            item.clone(),
            row.fit_residual,
            FIT_TOL,
        ));
        out.checks
            .push(CheckRow::at_most("base_wind", item.clone(), row.wind_error, FIT_TOL));
        out.checks.push(CheckRow::at_most(
            "base_metric",
            item.clone(),
            row.metric_error,
            FIT_TOL,
        ));
        out.checks.push(CheckRow::at_most(
            "horizontal_lengths",
            item,
            row.horizontal_error,
            FIT_TOL,
        ));
    }
    out.files.push(("structure.csv".into(), s.table()));
    Ok(())
}

pub(super) fn blowup(ctx: &Context, out: &mut SuiteOutcome) -> Result<()> {
    let fol = ctx.foliation()?;
    let d = defaults(fol);
    let base = BlowupParams::default();
    let params = BlowupParams {
        lambdas: ctx.params.lambdas.clone().unwrap_or(base.lambdas),
        probe_radius: ctx.params.probe_radius.unwrap_or(base.probe_radius),
        directions: ctx.params.directions.unwrap_or(base.directions),
    };
    let q = point_param(&ctx.params.q, &d.q);
    let r = blowup_metric_check(ctx.scene, fol, &q, &params, ctx.tol)?;
    for w in r.sup_difference.windows(2).zip(&r.lambdas[1..]) {
        let (pair, lambda) = w;
        out.checks.push(CheckRow::at_most(
            "monotone",
            format!("lambda {}", num(*lambda)),
            pair[1] - pair[0],
            1e-9,
        ));
    }
    if let (Some(l), Some(dl)) = (r.lambdas.last(), r.sup_difference.last()) {
        out.checks.push(CheckRow::at_most(
            "final_difference",
            format!("lambda {}", num(*l)),
            *dl,
            1e-3,
        ));
    }
    out.files.push(("blowup.csv".into(), r.table()));
    Ok(())
}
