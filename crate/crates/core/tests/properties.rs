use hypam_core::decomp::{angular_radius, build_pou, decompose_ball};
use hypam_core::field::{j_t, make_profile, DiscreteMeasure, ProfileKind, ScalingTriple};
use hypam_core::geometry::{
    distance_expansion_residual, hyper_distance, random_polar_in_ball, volume_ball, HyperPoint,
    LorentzTransform, MetricParams, Polar,
};
use hypam_core::moments::path_exponent;
use hypam_core::rng::stream;
use hypam_core::spectral::{assemble, principal_eig, rayleigh_quotient, GridSpec};
use hypam_core::stochastic::{occupation_measure, simulate_bm, Bins, DriftConvention};
use hypam_core::variational::{convexity_defect, euclidean_grid};
use proptest::prelude::*;

fn polar(d: usize, radius: f64, seed: u64) -> Polar {
    random_polar_in_ball(d, radius, &mut stream(seed, 0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn polar_ambient_round_trip(d in 2usize..5, rho in 0.0f64..50.0, alpha in 1e-3f64..10.0, seed in any::<u64>()) {
        let mut p = polar(d, 1.0, seed);
        p.rho = rho;
        let x = HyperPoint::from_polar(alpha, p.clone()).unwrap();
        let y = HyperPoint::from_ambient(alpha, x.ambient().to_vec()).unwrap();
        prop_assert!((y.polar().rho - rho).abs() <= 1e-12 * rho.max(1.0));
        if rho > 1e-6 {
            for (a, b) in y.polar().sigma.iter().zip(&p.sigma) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn distance_is_a_metric(d in 2usize..5, alpha in 0.05f64..3.0, seed in any::<u64>()) {
        let mut rng = stream(seed, 1);
        let pts: Vec<HyperPoint> = (0..3)
            .map(|_| HyperPoint::from_polar(alpha, random_polar_in_ball(d, 5.0, &mut rng)).unwrap())
            .collect();
        let dab = hyper_distance(&pts[0], &pts[1]).unwrap();
        let dba = hyper_distance(&pts[1], &pts[0]).unwrap();
        let dbc = hyper_distance(&pts[1], &pts[2]).unwrap();
        let dac = hyper_distance(&pts[0], &pts[2]).unwrap();
        prop_assert_eq!(dab, dba);
        prop_assert!(dac <= dab + dbc + 1e-9);
        prop_assert!(hyper_distance(&pts[0], &pts[0]).unwrap() < 1e-6);
    }

    #[test]
    fn isometries_preserve_distance(d in 2usize..5, alpha in 0.1f64..2.0, seed in any::<u64>()) {
        let mut rng = stream(seed, 2);
        let g = LorentzTransform::random(d, 1.0, &mut rng);
        let x = HyperPoint::from_polar(alpha, random_polar_in_ball(d, 3.0, &mut rng)).unwrap();
        let y = HyperPoint::from_polar(alpha, random_polar_in_ball(d, 3.0, &mut rng)).unwrap();
        let before = hyper_distance(&x, &y).unwrap();
        let after = hyper_distance(&g.apply(&x).unwrap(), &g.apply(&y).unwrap()).unwrap();
        prop_assert!((before - after).abs() < 1e-9 * before.max(1.0));
    }

    #[test]
    fn flattening_residual_is_quadratic(seed in any::<u64>()) {
        let z = polar(2, 5.0, seed);
        let w = polar(2, 5.0, seed ^ 0x9e37);
        let ratios: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&a| distance_expansion_residual(&z, &w, a).unwrap() / (a * a))
            .collect();
        prop_assert!(ratios[1] <= ratios[0] * (1.0 + 1e-9) + 1e-12);
        prop_assert!(ratios[2] <= ratios[1] * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn j_t_nonnegative_and_concave(seed in any::<u64>(), theta in 0.05f64..0.95, t in 1.0f64..1e4) {
        let q = make_profile(ProfileKind::GaussianBump { sigma2: 1.0, ell: 1.0 }).unwrap();
        let triple = ScalingTriple::new(t, 1.0).unwrap();
        let mut rng = stream(seed, 3);
        let mut measure = |n: usize| {
            let atoms = (0..n).map(|_| (random_polar_in_ball(2, 5.0, &mut rng), 1.0 / n as f64)).collect();
            DiscreteMeasure::new(atoms, 5.0).unwrap()
        };
        let (mu, nu) = (measure(3), measure(4));
        let (a, b) = (j_t(&mu, &triple, &q), j_t(&nu, &triple, &q));
        let mix = j_t(&mu.mix(&nu, theta), &triple, &q);
        prop_assert!(a >= -1e-12 && b >= -1e-12);
        prop_assert!(mix >= theta * a + (1.0 - theta) * b - 1e-10);
    }

    #[test]
    fn pou_squares_sum_to_one(seed in any::<u64>()) {
        let dec = decompose_ball(3.0, 1.0, 0.3, 2, 1).unwrap();
        let pou = build_pou(dec, 0.25).unwrap();
        let p = polar(2, 3.0, seed);
        prop_assert!((pou.sum_of_squares(&p) - 1.0).abs() < 1e-10);
        prop_assert_eq!(pou.support_violations(&p), 0);
    }

    #[test]
    fn angular_radius_non_increasing(r in 0.2f64..2.0, alpha in 0.01f64..0.5, d in 2usize..4) {
        prop_assume!(alpha * r <= 1.0);
        let mut last = f64::INFINITY;
        for k in 1..30 {
            let (theta, _) = angular_radius(k, r, alpha, d).unwrap();
            prop_assert!(theta <= last + 1e-12);
            last = theta;
        }
    }

    #[test]
    fn convexity_of_dv_functional(seed in any::<u64>(), theta in 0.01f64..0.99) {
        let grid = euclidean_grid(1, 3.0, 60).unwrap();
        let mut rng = stream(seed, 4);
        use rand::Rng;
        let r1: Vec<f64> = (0..60).map(|_| rng.random::<f64>()).collect();
        let r2: Vec<f64> = (0..60).map(|_| rng.random::<f64>()).collect();
        prop_assert!(convexity_defect(&grid, &r1, &r2, &[theta]) <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn rayleigh_quotient_bounded_by_ground_state(seed in any::<u64>()) {
        let grid = GridSpec::radial(MetricParams::new(3, 0.5).unwrap(), 2.0, 80, DriftConvention::Riemannian)
            .build()
            .unwrap();
        let v: Vec<f64> = grid.coord.iter().map(|r| (-r * r).exp()).collect();
        let lambda0 = principal_eig(&assemble(&grid, &v, None).unwrap()).unwrap().lambda0;
        use rand::Rng;
        let mut rng = stream(seed, 5);
        let psi: Vec<f64> = grid.coord.iter().map(|_| rng.random::<f64>() - 0.3).collect();
        prop_assert!(rayleigh_quotient(&grid, &v, &psi) >= lambda0 - 1e-8);
    }

    #[test]
    fn occupation_is_a_probability(seed in any::<u64>(), alpha in 0.0f64..1.5) {
        let params = MetricParams { d: 2, alpha };
        let path = simulate_bm(polar(2, 1.0, seed), params, 1.0, 0.01, DriftConvention::Riemannian, seed).unwrap();
        let occ = occupation_measure(&path, Bins { radius: 50.0, n_r: 10, n_theta: 8 }).unwrap();
        let total: f64 = occ.weights.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exponent_exchangeable_and_nonnegative(seed in any::<u64>()) {
        let q = make_profile(ProfileKind::GaussianBump { sigma2: 1.0, ell: 1.0 }).unwrap();
        let params = MetricParams { d: 2, alpha: 1.0 };
        let start = polar(2, 0.0, 0);
        let paths: Vec<Vec<Polar>> = (0..3)
            .map(|k| simulate_bm(start.clone(), params, 0.5, 0.05, DriftConvention::Riemannian, seed.wrapping_add(k)).unwrap().states)
            .collect();
        let e = path_exponent(&paths, &q, 1.0, 0.05);
        let rev: Vec<Vec<Polar>> = paths.iter().rev().cloned().collect();
        prop_assert!((e - path_exponent(&rev, &q, 1.0, 0.05)).abs() < 1e-12 * e.max(1.0));
        prop_assert!(e >= 0.0);
    }
}

#[test]
fn domain_monotonicity() {
    let l: Vec<f64> = [1.0, 2.0, 3.0]
        .iter()
        .map(|&r| {
            let grid = GridSpec::polar(0.0, r, 60, 32).build().unwrap();
            principal_eig(&assemble(&grid, &vec![0.0; grid.len()], None).unwrap())
                .unwrap()
                .lambda0
        })
        .collect();
    assert!(l[0] > l[1] && l[1] > l[2]);
}

#[test]
fn ball_volume_converges_to_flat() {
    let flat = volume_ball(2.0, MetricParams::euclidean(3));
    let errs: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&a| (volume_ball(2.0, MetricParams::new(3, a).unwrap()) - flat).abs())
        .collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2]);
    assert!((errs[0] / errs[1] - 4.0).abs() < 0.2);
}
