//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};
use std::process::ExitCode;
use std::time::Instant;

use finslerkit::experiment::{self, ExperimentConfig};
use finslerkit::foliation::{
    check_equidistance, check_equifocal, check_finsler, check_minkowski_lemmas, check_theorem1, EquifocalParams,
    FinslerParams, FoliationModel, LeafPair, EQUIDISTANCE_RELATIVE, LEAF_SPREAD_THRESHOLD,
};
use finslerkit::geodesic::{arc_reparam, geodesic_ivp_sampled, navigation_geodesic, Direction};
use finslerkit::manifold::{Scene, SceneSpec, Template, WindSpec};
use finslerkit::minkowski::{fundamental_tensor, orthogonal_cone, quotient_norm, FnNorm};
use finslerkit::numkit::Tolerances;
use finslerkit::randers::{randers_fundamental_tensor, RandersData, ZermeloData};
use finslerkit::submersion::{check_randers_submersion_structure, check_submersion, SubmersionSpec};
use finslerkit::{Matrix, Result, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        passed,
        detail: detail.into(),
    })
}

fn v(xs: &[f64]) -> Vector {
    Vector::from_vec(xs.to_vec())
}

fn scene(t: Template, w: WindSpec) -> Result<Scene> {
    SceneSpec::new(t, w).build()
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

fn gaussian<R: Rng>(rng: &mut R, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

fn random_spd<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    let b = Matrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    b.transpose() * b * 0.5 + Matrix::identity(n, n) * 0.5
}

fn random_randers<R: Rng>(rng: &mut R, n: usize) -> Result<RandersData> {
    let a = random_spd(rng, n);
    let b = gaussian(rng, n);
    // |β|_a² = βᵀ a⁻¹ β.
    let ainv = a.clone().try_inverse().unwrap();
    let len = b.dot(&(&ainv * &b)).sqrt();
    let r: f64 = rng.gen_range(0.0..0.85);
    RandersData::new(a, b * (r / len))
}

fn random_zermelo<R: Rng>(rng: &mut R, n: usize) -> Result<ZermeloData> {
    let h = random_spd(rng, n);
    let w = gaussian(rng, n);
    let len = w.dot(&(&h * &w)).sqrt();
    let r: f64 = rng.gen_range(0.0..0.85);
    ZermeloData::new(h, w * (r / len))
}

fn tensor_consistency() -> Result<Outcome> {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut rel, mut gvv) = (0.0f64, 0.0f64);
    for i in 0..100 {
        let n = 2 + i % 3;
        let rd = random_randers(&mut rng, n)?;
        let x = gaussian(&mut rng, n);
        let closed = randers_fundamental_tensor(&rd, &x)?;
        let r2 = rd.clone();
        let numeric = fundamental_tensor(&FnNorm::new(n, move |y: &Vector| r2.norm(y)), &x, &tol)?;
        rel = rel.max((&closed - numeric).amax() / closed.amax());
        let z = rd.norm(&x);
        gvv = gvv.max((x.dot(&(&closed * &x)) - z * z).abs() / (z * z));
    }
    outcome(
        rel <= 1e-6 && gvv <= 1e-8,
        format!("tensor rel {rel:.3e}, gvv rel {gvv:.3e}"),
    )
}

fn conversion_exactness() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut round, mut ind) = (0.0f64, 0.0f64);
    for i in 0..1000 {
        let n = 2 + i % 4;
        let zd = random_zermelo(&mut rng, n)?;
        let back = zd.to_randers()?.to_zermelo()?;
        let scale = zd.h.amax().max(1.0);
        round = round
            .max((&back.h - &zd.h).amax() / scale)
            .max((&back.w - &zd.w).amax());
        let rd = random_randers(&mut rng, n)?;
        let back = rd.to_zermelo()?.to_randers()?;
        let scale = rd.a.amax().max(1.0);
        round = round
            .max((&back.a - &rd.a).amax() / scale)
            .max((&back.beta - &rd.beta).amax());
    }
    for i in 0..100 {
        let n = 2 + i % 4;
        let zd = random_zermelo(&mut rng, n)?;
        let rd = zd.to_randers()?;
        let g = gaussian(&mut rng, n);
        let u = &g / g.dot(&(&zd.h * &g)).sqrt();
        ind = ind.max((rd.norm(&(&u + &zd.w)) - 1.0).abs());
    }
    outcome(
        round <= 1e-12 && ind <= 1e-10,
        format!("round trip {round:.3e}, indicatrix {ind:.3e}"),
    )
}

fn worked_values() -> Result<Outcome> {
    let tol = Tolerances::default();
    let zd = ZermeloData::new(Matrix::identity(2, 2), v(&[0.5, 0.0]))?;
    let rd = zd.to_randers()?;
    let mut err = (rd.norm(&v(&[1.0, 0.0])) - 2.0 / 3.0).abs();
    err = err.max((rd.norm(&v(&[-1.0, 0.0])) - 2.0).abs());
    let frame = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let cone = orthogonal_cone(&rd, &frame, 16, &mut rng, &tol)?;
    let expect = [v(&[0.5, -1.0]), v(&[0.5, 1.0])];
    let cone_ok = cone.len() == 2;
    for e in &expect {
        let unit = e / rd.norm(e);
        let best = cone.iter().map(|c| (c - &unit).norm()).fold(f64::INFINITY, f64::min);
        err = err.max(best);
    }
    let p = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
    err = err.max((quotient_norm(&rd, &p, &v(&[1.0]), &tol)?.value - 2.0 / 3.0).abs());
    err = err.max((quotient_norm(&rd, &p, &v(&[-1.0]), &tol)?.value - 2.0).abs());
    outcome(
        cone_ok && err <= 1e-8,
        format!("max error {err:.3e}, cone size {}", cone.len()),
    )
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

fn navigation_correspondence() -> Result<Outcome> {
    let tol = Tolerances::default();
    let mut sup = 0.0f64;
    let cases = [
        scene(sphere(), WindSpec::Killing { epsilon: 0.2 })?,
        scene(
            Template::EuclideanBall { dim: 2, radius: 4.0 },
            WindSpec::Radial { c: 0.2 },
        )?,
    ];
    for (k, s) in cases.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(404 + k as u64);
        for _ in 0..4 {
            let p = s.sample_point(&mut rng, 0.5)?;
            let d = gaussian(&mut rng, s.dim());
            let vel = &d / s.zermelo_at(&p)?.norm(&d);
            let nav = navigation_geodesic(s, &p, &vel, 1.0, 20, &tol)?;
            let direct = geodesic_ivp_sampled(s, &p, &vel, 1.0, 20, &tol)?;
            sup = sup.max(nav.sup_deviation(&direct));
        }
    }
    let mut quad = 0.0f64;
    for sigma in [-2.0, -0.4, 0.0, 0.4, 2.0] {
        for t in [0.25, 0.5, 1.0] {
            let q = simpson(|u: f64| (-sigma * u / 2.0).exp(), 0.0, t, 2000);
            quad = quad.max((arc_reparam(sigma, t) - q).abs());
        }
    }
    outcome(
        sup <= 1e-4 && quad <= 1e-10,
        format!("sup deviation {sup:.3e}, reparam vs quadrature {quad:.3e}"),
    )
}

fn finsler_params() -> FinslerParams {
    FinslerParams {
        trials: 8,
        seed: 505,
        ..FinslerParams::default()
    }
}

struct FoliatedCase {
    label: &'static str,
    scene: Scene,
    fol: FoliationModel,
    pair: LeafPair,
}

fn foliated_cases() -> Result<Vec<FoliatedCase>> {
    let circles = FoliationModel::builtin("circles", &plane())?;
    let latitudes = FoliationModel::builtin("latitudes", &sphere())?;
    let lines = FoliationModel::builtin("lines", &plane())?;
    Ok(vec![
        FoliatedCase {
            label: "circles+rotational",
            scene: scene(plane(), WindSpec::Rotational { epsilon: 0.5 })?,
            pair: LeafPair::new(&circles, &v(&[1.0, 0.0]), 1.0, &v(&[2.0, 0.0]), 0.4, 10)?,
            fol: circles,
        },
        FoliatedCase {
            label: "latitudes+killing",
            scene: scene(sphere(), WindSpec::Killing { epsilon: 0.2 })?,
            pair: LeafPair::new(&latitudes, &colatitude(FRAC_PI_3), 1.0, &colatitude(FRAC_PI_2), 0.4, 10)?,
            fol: latitudes,
        },
        FoliatedCase {
            label: "lines+constant",
            scene: scene(plane(), WindSpec::Constant { w: vec![0.5, 0.0] })?,
            pair: LeafPair::new(&lines, &v(&[0.0, 0.0]), 1.0, &v(&[0.0, 1.0]), 0.4, 10)?,
            fol: lines,
        },
    ])
}

fn foliation_verification() -> Result<Outcome> {
    let tol = Tolerances::default();
    let params = finsler_params();
    let mut ok = true;
    let mut notes = Vec::new();
    for case in foliated_cases()?.iter().take(2) {
        let f = check_finsler(&case.scene, &case.fol, &params, &tol);
        let mut worst = f.max_forward().max(f.max_backward());
        ok &= f.passed();
        for d in [Direction::Forward, Direction::Backward] {
            let r = check_equidistance(&case.scene, &case.pair, d, &tol)?;
            ok &= r.spread <= EQUIDISTANCE_RELATIVE * r.mean;
            worst = worst.max(r.spread / r.mean);
        }
        notes.push(format!("{} {worst:.2e}", case.label));
    }
    let circles = FoliationModel::builtin("circles", &plane())?;
    let neg = scene(plane(), WindSpec::Constant { w: vec![0.5, 0.0] })?;
    let control = check_finsler(&neg, &circles, &params, &tol);
    ok &= !control.passed();
    notes.push(format!("negative control residual {:.2e}", control.max_forward()));
    outcome(ok, notes.join(", "))
}

fn theorem1_instance() -> Result<Outcome> {
    let tol = Tolerances::default();
    let params = finsler_params();
    let mut ok = true;
    let mut notes = Vec::new();
    for case in foliated_cases()? {
        if !check_finsler(&case.scene, &case.fol, &params, &tol).passed() {
            notes.push(format!("{} not Finsler", case.label));
            ok = false;
            continue;
        }
        let r = check_theorem1(&case.scene, &case.fol, &case.pair, &params, &tol)?;
        ok &= r.passed();
        notes.push(format!("{} flow spread {:.2e}", case.label, r.flow_spread));
    }
    outcome(ok, notes.join(", "))
}

fn equifocality() -> Result<Outcome> {
    let tol = Tolerances::default();
    let lat = FoliationModel::builtin("latitudes", &sphere())?;
    let ks = scene(sphere(), WindSpec::Killing { epsilon: 0.2 })?;
    let leaf = lat.plaque(&colatitude(FRAC_PI_3), 1.0)?;
    let params = EquifocalParams {
        regular_t: vec![0.1, 0.3, 0.5, 0.7, 1.3],
        focal_t: vec![FRAC_PI_3],
        samples: 20,
        ..EquifocalParams::default()
    };
    let r = check_equifocal(&ks, &lat, &leaf, &params, &tol)?;
    let mut ok = r.passed() && r.rows.len() == 6;
    let spread = r.rows.iter().filter(|x| !x.focal).map(|x| x.spread).fold(0.0, f64::max);
    let collapse = r
        .rows
        .iter()
        .filter(|x| x.focal)
        .map(|x| x.diameter)
        .fold(0.0, f64::max);
    ok &= r.rows.iter().filter(|x| !x.focal).all(|x| x.rank_min == x.rank_max);
    ok &= spread <= LEAF_SPREAD_THRESHOLD && collapse <= LEAF_SPREAD_THRESHOLD;
    let mut identity = r.rows.iter().map(|x| x.identity_error).fold(0.0, f64::max);

    let circles = FoliationModel::builtin("circles", &plane())?;
    let radial = scene(plane(), WindSpec::Radial { c: 0.2 })?;
    let leaf = circles.plaque(&v(&[1.0, 0.0]), 0.8)?;
    let params = EquifocalParams {
        regular_t: vec![0.1, 0.3, 0.5, 0.7, 1.0],
        samples: 20,
        ..EquifocalParams::default()
    };
    let r = check_equifocal(&radial, &circles, &leaf, &params, &tol)?;
    ok &= r.passed() && r.sigma.abs() > 1e-3;
    identity = identity.max(r.rows.iter().map(|x| x.identity_error).fold(0.0, f64::max));
    ok &= identity <= LEAF_SPREAD_THRESHOLD;
    outcome(
        ok,
        format!("spread {spread:.2e}, focal diameter {collapse:.2e}, identity {identity:.2e}"),
    )
}

fn minkowski_lemmas() -> Result<Outcome> {
    let tol = Tolerances::default();
    let cyl = Template::CylinderR3 { radius: 2.0 };
    let fol = FoliationModel::builtin("cylinder", &cyl)?;
    let s = scene(cyl, WindSpec::Constant { w: vec![0.0, 0.0, 0.4] })?;
    let r = check_minkowski_lemmas(&s, &fol, 6, &finsler_params(), &tol)?;
    let ok = r.perpendicular_residual <= 1e-6 && r.containment_residual <= 1e-10 && r.passed();
    outcome(
        ok,
        format!(
            "perpendicular {:.2e}, containment {:.2e}",
            r.perpendicular_residual, r.containment_residual
        ),
    )
}

fn submersion_structure() -> Result<Outcome> {
    let tol = Tolerances::default();
    let hopf = SubmersionSpec::hopf(
        scene(
            Template::Sphere3Hopf { radius: 1.0 },
            WindSpec::HopfBasic { epsilon: 0.3 },
        )?,
        scene(Template::Sphere2 { radius: 0.5 }, WindSpec::Killing { epsilon: 0.3 })?,
    );
    let plane3 = SubmersionSpec::linear(
        scene(
            Template::EuclideanBall { dim: 2, radius: 4.0 },
            WindSpec::Constant { w: vec![0.5, 0.0] },
        )?,
        scene(
            Template::EuclideanBall { dim: 1, radius: 4.0 },
            WindSpec::Constant { w: vec![0.5] },
        )?,
        Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
    )?;
    let mut ok = true;
    let (mut quot, mut data) = (0.0f64, 0.0f64);
    for spec in [&hopf, &plane3] {
        let r = check_submersion(spec, 8, 4, 606, 1e-5, &tol)?;
        ok &= r.passed();
        quot = quot.max(r.max_error());
        let s = check_randers_submersion_structure(spec, 6, 607, &tol)?;
        ok &= s.passed();
        data = data.max(s.max_data_error());
    }
    outcome(ok, format!("quotient error {quot:.2e}, base data error {data:.2e}"))
}

fn determinism() -> Result<Outcome> {
    let configs = [
        "suite = \"convert\"\nseed = 7\npreset = \"sphere2-latitudes\"\n[params]\nsamples = 50\n",
        "suite = \"geodesic-compare\"\nseed = 7\npreset = \"euclid-ball-radialwind\"\n[params]\ntrials = 2\n",
        "suite = \"submersion-check\"\nseed = 7\npreset = \"plane-constwind\"\n",
    ];
    let mut ok = true;
    for text in configs {
        let cfg = ExperimentConfig::parse(text, "acceptance")?;
        let render = || -> Result<Vec<String>> {
            let o = experiment::run(&cfg)?;
            let mut out = vec![o.report().to_csv_string()?, o.summary()];
            for (_, t) in &o.files {
                out.push(t.to_csv_string()?);
            }
            Ok(out)
        };
        ok &= render()? == render()?;
    }
    outcome(ok, format!("{} configs compared", configs.len()))
}

type Criterion = (&'static str, fn() -> Result<Outcome>);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("tensor consistency", tensor_consistency),
        ("conversion exactness", conversion_exactness),
        ("worked values", worked_values),
        ("navigation correspondence", navigation_correspondence),
        ("foliation verification", foliation_verification),
        ("riemannian reduction", theorem1_instance),
        ("equifocality", equifocality),
        ("randers-minkowski lemmas", minkowski_lemmas),
        ("submersion structure", submersion_structure),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<28} {}  ({detail}; {:.1}s)",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
