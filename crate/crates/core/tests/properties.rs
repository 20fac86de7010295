use finslerkit::foliation::{homothetic_transform, FoliationModel};
use finslerkit::geodesic::{arc_reparam, Direction};
use finslerkit::manifold::{flow, SceneSpec, Template, WindSpec};
use finslerkit::minkowski::{fundamental_tensor, legendre, legendre_inverse, orthogonal_cone, quotient_norm};
use finslerkit::numkit::{fd_hessian, null_space, numeric_rank, Tolerances};
use finslerkit::randers::{gvv_inner, randers_fundamental_tensor, RandersData, ZermeloData};
use finslerkit::submersion::{check_submersion, SubmersionSpec};
use finslerkit::{Matrix, Vector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian<R: Rng>(rng: &mut R, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

fn spd<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    let b = Matrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    b.transpose() * b * 0.5 + Matrix::identity(n, n) * 0.5
}

fn zermelo(seed: u64, n: usize, strength: f64) -> ZermeloData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = spd(&mut rng, n);
    let w = gaussian(&mut rng, n);
    let len = w.dot(&(&h * &w)).sqrt();
    ZermeloData::new(h, w * (strength / len)).unwrap()
}

fn randers(seed: u64, n: usize, strength: f64) -> RandersData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = spd(&mut rng, n);
    let b = gaussian(&mut rng, n);
    let len = b.dot(&(a.clone().try_inverse().unwrap() * &b)).sqrt();
    RandersData::new(a, b * (strength / len)).unwrap()
}

fn direction(seed: u64, n: usize) -> Vector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
    loop {
        let v = gaussian(&mut rng, n);
        if v.norm() > 1e-3 {
            return v;
        }
    }
}

/// `n × m` matrix with orthonormal rows.
fn orthonormal_rows<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    let q = Matrix::from_fn(cols, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
        .qr()
        .q();
    q.rows(0, rows).into_owned()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn conversions_round_trip(seed in any::<u64>(), n in 2usize..=5, s in 0.0f64..0.9) {
        let zd = zermelo(seed, n, s);
        let back = zd.to_randers().unwrap().to_zermelo().unwrap();
        let scale = zd.h.amax().max(1.0);
        prop_assert!((&back.h - &zd.h).amax() <= 1e-12 * scale);
        prop_assert!((&back.w - &zd.w).amax() <= 1e-12 * scale);
        let rd = randers(seed, n, s);
        let again = rd.to_zermelo().unwrap().to_randers().unwrap();
        let scale = rd.a.amax().max(1.0);
        prop_assert!((&again.a - &rd.a).amax() <= 1e-12 * scale);
        prop_assert!((&again.beta - &rd.beta).amax() <= 1e-12 * scale);
    }

    #[test]
    fn indicatrix_is_translated_sphere(seed in any::<u64>(), n in 2usize..=5, s in 0.0f64..0.9) {
        let zd = zermelo(seed, n, s);
        let g = direction(seed, n);
        let u = &g / g.dot(&(&zd.h * &g)).sqrt();
        prop_assert!((zd.norm(&(&u + &zd.w)) - 1.0).abs() <= 1e-10);
        prop_assert!(zd.norm(&g) > 0.0);
    }

    #[test]
    fn norm_is_positively_homogeneous(seed in any::<u64>(), n in 2usize..=4, s in 0.0f64..0.9, lam in 0.01f64..10.0) {
        let rd = randers(seed, n, s);
        let v = direction(seed, n);
        let f = rd.norm(&v);
        prop_assert!((rd.norm(&(&v * lam)) - lam * f).abs() <= 1e-10 * lam * f);
        let g1 = randers_fundamental_tensor(&rd, &v).unwrap();
        let g2 = randers_fundamental_tensor(&rd, &(&v * lam)).unwrap();
        prop_assert!((g1 - g2).amax() <= 1e-6);
    }

    #[test]
    fn gvv_equals_norm_squared(seed in any::<u64>(), n in 2usize..=4, s in 0.0f64..0.9) {
        let rd = randers(seed, n, s);
        let v = direction(seed, n);
        let g = randers_fundamental_tensor(&rd, &v).unwrap();
        let z = rd.norm(&v);
        prop_assert!((v.dot(&(&g * &v)) - z * z).abs() <= 1e-8 * z * z);
        prop_assert!(g.cholesky().is_some());
    }

    #[test]
    fn gvv_inner_forms_agree(seed in any::<u64>(), n in 2usize..=4, s in 0.0f64..0.9) {
        let rd = randers(seed, n, s);
        let v = direction(seed, n);
        let u = direction(seed.wrapping_add(1), n);
        let i = gvv_inner(&rd, &v, &u).unwrap();
        prop_assert!((i.randers - i.zermelo).abs() <= 1e-10 * (1.0 + i.randers.abs()));
        // g_v(v, u) = ½ d/dz Z(v + z u)² at 0.
        let h = 1e-5;
        let d = (rd.norm(&(&v + &u * h)).powi(2) - rd.norm(&(&v - &u * h)).powi(2)) / (4.0 * h);
        prop_assert!((i.randers - d).abs() <= 1e-6 * (1.0 + d.abs()));
    }

    #[test]
    fn legendre_inverse_round_trip(seed in any::<u64>(), n in 2usize..=4, s in 0.0f64..0.8) {
        let tol = Tolerances::default();
        let rd = randers(seed, n, s);
        let v = direction(seed, n);
        let p = legendre(&rd, &v, &tol).unwrap();
        let back = legendre_inverse(&rd, &p, &tol).unwrap();
        prop_assert!((back - &v).norm() <= 1e-8 * v.norm());
    }

    #[test]
    fn reverse_norm_is_reversed_wind(seed in any::<u64>(), n in 2usize..=4, s in 0.0f64..0.9) {
        let zd = zermelo(seed, n, s);
        let v = direction(seed, n);
        prop_assert!((zd.reversed().norm(&v) - zd.norm(&-&v)).abs() <= 1e-12 * (1.0 + zd.norm(&v)));
    }

    #[test]
    fn arc_reparam_is_increasing_from_zero(sigma in -3.0f64..3.0, t in 0.0f64..2.0, dt in 1e-3f64..0.5) {
        prop_assert_eq!(arc_reparam(sigma, 0.0), 0.0);
        prop_assert!(arc_reparam(sigma, t + dt) > arc_reparam(sigma, t));
        prop_assert!((arc_reparam(0.0, t) - t).abs() <= 1e-15);
    }

    #[test]
    fn fd_hessian_exact_on_quadratics(seed in any::<u64>(), n in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = spd(&mut rng, n);
        let x = gaussian(&mut rng, n);
        let b = gaussian(&mut rng, n);
        let f = |y: &Vector| 0.5 * y.dot(&(&a * y)) + b.dot(y);
        let h = fd_hessian(&f, &x, 1e-4).unwrap();
        prop_assert!((&h - &h.transpose()).amax() == 0.0);
        prop_assert!((h - &a).amax() <= 1e-8 * a.amax().max(1.0) * (1.0 + x.amax()).powi(2) * 10.0);
    }

    #[test]
    fn rank_of_outer_products(seed in any::<u64>(), n in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = direction(seed, n);
        prop_assert_eq!(numeric_rank(&(&u * u.transpose()), 1e-10), 1);
        prop_assert_eq!(numeric_rank(&spd(&mut rng, n), 1e-10), n);
        prop_assert_eq!(numeric_rank(&Matrix::zeros(n, n), 1e-10), 0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn quotient_minimizers_are_cone_elements(seed in any::<u64>(), s in 0.0f64..0.7) {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let zd = zermelo(seed, 3, s);
        let p = Matrix::from_fn(2, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        prop_assume!(numeric_rank(&p, 1e-3) == 2);
        let ker = null_space(&p, 1e-10);
        prop_assert_eq!(ker.ncols(), 1);

        // Minimizer → horizontal.
        let w = direction(seed, 2);
        let q = quotient_norm(&zd, &p, &w, &tol).unwrap();
        let g = fundamental_tensor(&zd, &q.minimizer, &tol).unwrap();
        let k = ker.column(0).into_owned();
        prop_assert!((q.minimizer.dot(&(&g * &k))).abs() / q.value <= 1e-7);
        prop_assert!((&p * &q.minimizer - &w).amax() <= 1e-9 * (1.0 + w.amax()));

        // Cone element → minimizer of its own fiber.
        let cone = orthogonal_cone(&zd, &ker, 4, &mut rng, &tol).unwrap();
        for u in cone {
            let target = &p * &u;
            let q = quotient_norm(&zd, &p, &target, &tol).unwrap();
            prop_assert!((q.value - 1.0).abs() <= 1e-7, "{}", q.value);
            prop_assert!((q.minimizer - &u).norm() <= 1e-5);
        }
    }

    #[test]
    fn translated_submersions_stay_finsler(seed in any::<u64>(), s in 0.0f64..0.8) {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = orthonormal_rows(&mut rng, 2, 3);
        let w = direction(seed, 3);
        let w = &w * (s / w.norm());
        let base_w = &a * &w;
        let total = SceneSpec::new(Template::EuclideanBall { dim: 3, radius: 4.0 }, WindSpec::Constant { w: w.iter().copied().collect() })
            .build()
            .unwrap();
        let base = SceneSpec::new(Template::EuclideanBall { dim: 2, radius: 4.0 }, WindSpec::Constant { w: base_w.iter().copied().collect() })
            .build()
            .unwrap();
        let spec = SubmersionSpec::linear(total.without_wind(), base.without_wind(), a.clone()).unwrap();
        prop_assert!(check_submersion(&spec, 2, 3, seed, 1e-5, &tol).unwrap().passed());
        let spec = SubmersionSpec::linear(total, base, a).unwrap();
        let r = check_submersion(&spec, 2, 3, seed, 1e-5, &tol).unwrap();
        prop_assert!(r.passed(), "{}", r.max_error());
        prop_assert!(r.horizontality <= 1e-7);
    }

    #[test]
    fn invariant_map_constant_along_frames(seed in any::<u64>()) {
        let cases = [
            ("circles", Template::EuclideanBall { dim: 2, radius: 4.0 }),
            ("lines", Template::EuclideanBall { dim: 2, radius: 4.0 }),
            ("latitudes", Template::Sphere2 { radius: 1.0 }),
            ("cylinder", Template::CylinderR3 { radius: 2.0 }),
            ("hopf", Template::Sphere3Hopf { radius: 1.0 }),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (name, t) in cases {
            let fol = FoliationModel::builtin(name, &t).unwrap();
            let scene = SceneSpec::new(t, WindSpec::Zero).build().unwrap();
            let p = scene.ambient(&scene.sample_point(&mut rng, 0.9).unwrap());
            prop_assert!(fol.frame_defect(&p).unwrap() <= 1e-7, "{name}");
            let pts = fol.leaf_points(&p, 0.5, 5);
            prop_assert!(fol.rho_spread(&pts) <= 1e-8, "{name}");
        }
    }

    #[test]
    fn flow_group_law(seed in any::<u64>(), s in 0.0f64..0.6, t in 0.0f64..0.6) {
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for wind in [WindSpec::Killing { epsilon: 0.3 }, WindSpec::Rotational { epsilon: 0.5 }] {
            let template = match wind {
                WindSpec::Killing { .. } => Template::Sphere2 { radius: 1.0 },
                _ => Template::EuclideanBall { dim: 2, radius: 4.0 },
            };
            let scene = SceneSpec::new(template, wind).build().unwrap();
            let p = scene.sample_point(&mut rng, 0.5).unwrap();
            prop_assert_eq!(scene.ambient(&flow(&scene, &p, 0.0, &tol).unwrap()), scene.ambient(&p));
            let two = flow(&scene, &flow(&scene, &p, s, &tol).unwrap(), t, &tol).unwrap();
            let one = flow(&scene, &p, s + t, &tol).unwrap();
            prop_assert!((scene.ambient(&two) - scene.ambient(&one)).norm() <= 1e-8);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn homotheties_send_leaves_to_leaves(lam in 0.3f64..0.9, r in 1.6f64..2.4, angle in -0.5f64..0.5) {
        let tol = Tolerances::default();
        let plane = Template::EuclideanBall { dim: 2, radius: 4.0 };
        let fol = FoliationModel::builtin("circles", &plane).unwrap();
        let scene = SceneSpec::new(plane, WindSpec::Rotational { epsilon: 0.5 }).build().unwrap();
        let plaque = fol.plaque(&Vector::from_vec(vec![1.0, 0.0]), 1.2).unwrap();
        let x = Vector::from_vec(vec![r * angle.cos(), r * angle.sin()]);
        for dir in [Direction::Forward, Direction::Backward] {
            let imgs: Vec<Vector> = fol
                .leaf_points(&x, 0.2, 4)
                .iter()
                .map(|y| homothetic_transform(&scene, &plaque, y, lam, dir, &tol).unwrap())
                .collect();
            prop_assert!(fol.rho_spread(&imgs) <= 1e-5, "{:?}", imgs);
        }
    }
}
