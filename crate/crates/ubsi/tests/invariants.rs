//! Cross-module invariants, property-tested where randomization earns its
//! keep and seeded where a fixed corpus is the point.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ubsi::averages::{average, AverageFamily, AverageKind};
use ubsi::fields::{laplace_catalog, make_quadratic, Arity, ScalarField};
use ubsi::geometry::{
    heat_kernel_radial, heatball_slice_radius, heatball_time_extent, heatball_volume,
    modified_slice_radius, shrink_domain, Domain, HeatballSpec,
};
use ubsi::levelsets::{
    for_each_cell, lp_norm, measure_sublevel, measure_superlevel, Exponent,
};
use ubsi::quadrature::{log_kernel, modified_kernel, QuadratureConfig};

fn quad() -> QuadratureConfig {
    QuadratureConfig::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // parabolic scaling: |E(r)| = r^(n+2) |E(1)|
    #[test]
    fn heatball_volume_scaling(r in 0.5f64..2.0) {
        for n in 1usize..=3 {
            let mut center = vec![0.0; n];
            center.push(0.0);
            let unit = heatball_volume(&HeatballSpec::new(center.clone(), 1.0).unwrap(), &quad()).unwrap();
            let scaled = heatball_volume(&HeatballSpec::new(center, r).unwrap(), &quad()).unwrap();
            let expect = r.powi(n as i32 + 2);
            prop_assert!(((scaled / unit) - expect).abs() <= 1e-6 * expect);
        }
    }

    // membership consistency: Phi(x-y, t-s) >= 1/r^n iff |x-y| is within
    // the slice radius at depth t-s
    #[test]
    fn membership_matches_slice_radius(
        r in 0.4f64..1.8,
        depth_frac in 1e-3f64..0.999,
        offset_frac in 0.0f64..1.5,
    ) {
        for n in 1usize..=3 {
            let depth = depth_frac * heatball_time_extent(r);
            let rho = heatball_slice_radius(depth, r, n).unwrap().unwrap_or(0.0);
            let dist = offset_frac * rho.max(1e-9);
            let kernel = heat_kernel_radial(dist * dist, depth, n).unwrap();
            let inside_kernel = kernel >= r.powi(-(n as i32)) * (1.0 - 1e-12);
            let inside_slice = dist <= rho * (1.0 + 1e-12);
            prop_assert_eq!(inside_kernel, inside_slice,
                "n={} r={} depth={} dist={} rho={}", n, r, depth, dist, rho);
        }
    }

    // the modified half-width at zero offset is the (m+n)-dimensional slice
    // radius
    #[test]
    fn modified_slice_reduces(
        r in 0.3f64..2.0,
        depth_frac in 1e-3f64..0.999,
    ) {
        for (n, m) in [(1usize, 3usize), (2, 3), (1, 4), (3, 5)] {
            let depth = depth_frac * heatball_time_extent(r);
            let a = modified_slice_radius(0.0, depth, r, n, m).unwrap();
            let rho = heatball_slice_radius(depth, r, n + m).unwrap();
            match (a, rho) {
                (Some(a), Some(rho)) => prop_assert!((a - rho).abs() <= 1e-12 * rho.max(1.0)),
                (None, None) => {}
                other => prop_assert!(false, "mismatch {:?}", other),
            }
        }
    }

    // shrink monotone: bigger delta gives a subset with smaller measure
    #[test]
    fn shrink_is_monotone(
        d1 in 0.01f64..0.4,
        gap in 0.01f64..0.2,
        use_ball in proptest::bool::ANY,
    ) {
        let d2 = d1 + gap;
        let dom = if use_ball { Domain::unit_ball(2).unwrap() } else { Domain::unit_box(2).unwrap() };
        let s1 = shrink_domain(&dom, d1).unwrap();
        let s2 = shrink_domain(&dom, d2).unwrap();
        prop_assert!(s2.measure() <= s1.measure() + 1e-15);
        // subset check on sampled points of the inner shrink
        for_each_cell(&s2, 8, |p, _| {
            assert!(s1.contains(p), "{p:?} escaped the weaker shrink");
        });
    }

    // kernel positivity on sampled interior points
    #[test]
    fn kernels_nonnegative(
        r in 0.4f64..1.5,
        depth_frac in 1e-3f64..0.999,
        offset_frac in 0.0f64..0.999,
    ) {
        let (n, m) = (1usize, 3usize);
        let depth = depth_frac * heatball_time_extent(r);
        if let Some(rho) = heatball_slice_radius(depth, r, n).unwrap() {
            let dist = offset_frac * rho;
            prop_assert!(log_kernel(dist * dist, depth, r, n) >= -1e-12);
        }
        if let Some(a) = modified_slice_radius(0.0, depth, r, n, m).unwrap() {
            let dist = offset_frac * a;
            prop_assert!(modified_kernel(dist * dist, depth, r, n, m) >= 0.0);
        }
    }

    // level-set bracket: inner <= midpoint <= outer, and the bracket
    // shrinks like 1/resolution for a Lipschitz field
    #[test]
    fn bracket_consistency(c in 0.05f64..1.4) {
        let u = ScalarField::from_closure("x+y", Arity::Space(2), |p| p[0] + p[1]);
        let dom = Domain::unit_box(2).unwrap();
        for res in [64usize, 128, 256] {
            let est = measure_superlevel(&u, &dom, c, res).unwrap();
            prop_assert!(est.inner <= est.measure + 1e-12);
            prop_assert!(est.measure <= est.outer + 1e-12);
            // |grad| = sqrt(2), level sets are lines: boundary cells are
            // O(1/res) in total volume
            prop_assert!(est.outer - est.inner <= 6.0 / res as f64);
        }
    }

    // p-monotonicity of L^p norms on a probability-measure domain
    #[test]
    fn lp_monotone_in_p(a in 0.2f64..3.0, b in -1.0f64..1.0) {
        let u = ScalarField::from_closure("axb", Arity::Space(1), move |p| a * p[0] + b);
        let dom = Domain::unit_box(1).unwrap();
        let mut last = 0.0;
        for p in [1.0, 1.5, 2.0, 4.0, 8.0] {
            let norm = lp_norm(&u, &dom, Exponent::Finite(p), 256).unwrap().value;
            prop_assert!(norm >= last - 1e-12);
            last = norm;
        }
        let sup = lp_norm(&u, &dom, Exponent::Infinity, 256).unwrap().value;
        prop_assert!(sup >= last - 1e-9);
    }
}

#[test]
fn complement_identity_across_catalog() {
    let dom = Domain::unit_box(2).unwrap();
    for field in laplace_catalog(2).unwrap() {
        let sub = measure_sublevel(&field, &dom, 0.4, 128).unwrap();
        let sup = measure_superlevel(&field, &dom, 0.4, 128).unwrap();
        let total = sub.measure + sup.measure;
        assert!(
            (total - dom.measure()).abs() <= 1e-12,
            "{}: {total}",
            field.label
        );
    }
}

#[test]
fn holder_product_bound_on_catalog() {
    // ||u||_p ||1_superlevel||_p' >= L^1 mass of u on the superlevel set
    let dom = Domain::unit_box(2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for field in laplace_catalog(2).unwrap() {
        for _ in 0..3 {
            let p = Exponent::Finite(rng.gen_range(1.0..4.0));
            let c = rng.gen_range(0.05..0.8);
            let norm = lp_norm(&field, &dom, p, 128).unwrap().value;
            let level = measure_superlevel(&field, &dom, c, 128).unwrap();
            let mut l1_mass = 0.0;
            for_each_cell(&dom, 128, |center, vol| {
                let v = field.eval(center).abs();
                if v >= c {
                    l1_mass += v * vol;
                }
            });
            let product = norm * p.conjugate().measure_power(level.measure);
            assert!(
                product >= l1_mass - 1e-9,
                "{}: {product} < {l1_mass}",
                field.label
            );
        }
    }
}

#[test]
fn fd_convergence_order_at_100_random_points() {
    use ubsi::fields::{finite_difference_operator, DiffOp};
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    for n in 1..=3usize {
        for field in laplace_catalog(n).unwrap() {
            for _ in 0..4 {
                let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.7..0.7)).collect();
                let exact = field.laplacian(&p).unwrap();
                let e1 = (finite_difference_operator(&field, DiffOp::Laplacian, &p, 2e-3).unwrap()
                    - exact)
                    .abs();
                let e2 = (finite_difference_operator(&field, DiffOp::Laplacian, &p, 1e-3).unwrap()
                    - exact)
                    .abs();
                if e1 > 1e-8 {
                    let order = (e1 / e2).log2();
                    assert!(order >= 1.9, "{} at {p:?}: order {order}", field.label);
                    checked += 1;
                }
            }
        }
    }
    assert!(checked >= 30, "only {checked} nontrivial samples");
}

#[test]
fn heatball_refinement_is_stable() {
    // halving the effective step (one more refinement level) moves the
    // value by less than the target tolerance
    let u = make_quadratic(2).unwrap();
    let field = ScalarField::from_closure("u(x) in space-time", Arity::SpaceTime(2), move |p| {
        u.eval(&p[..2])
    });
    let coarse = QuadratureConfig {
        slice_count: 24,
        max_refinements: 3,
        target_rel_tol: 1e-8,
        ..QuadratureConfig::default()
    };
    let fine = QuadratureConfig {
        slice_count: 48,
        max_refinements: 3,
        target_rel_tol: 1e-8,
        ..QuadratureConfig::default()
    };
    let fam_c = AverageFamily::new(
        AverageKind::Heatball,
        field.clone(),
        vec![0.1, 0.0, 0.5],
        1.0,
        coarse,
    )
    .unwrap();
    let fam_f = AverageFamily::new(
        AverageKind::Heatball,
        field,
        vec![0.1, 0.0, 0.5],
        1.0,
        fine,
    )
    .unwrap();
    let a = average(&fam_c, 0.8).unwrap();
    let b = average(&fam_f, 0.8).unwrap();
    assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "{a} vs {b}");
}
