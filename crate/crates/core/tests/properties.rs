use proptest::collection::vec;
use proptest::prelude::*;

use spraylab::catalog::{self, named_factor, named_spray, params, SPRAY_LABELS};
use spraylab::diffops::{self, berwald_data, jet_at, riemann_curvature};
use spraylab::fd::{fd_jet, FdSteps};
use spraylab::geodesics::{self, IntegratorSettings};
use spraylab::pathspace::{self, PathFamily};
use spraylab::{
    check_homogeneity, projective_deform, ConicalDomain, Constraint, Params, SprayField,
    TangentState,
};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn spray_params(label: &str) -> Params {
    match label {
        "funk_scaled" | "funk_reversible" => params(&[("c", 0.5)]),
        _ => Params::new(),
    }
}

fn catalog_sprays() -> Vec<SprayField> {
    SPRAY_LABELS
        .iter()
        .map(|l| named_spray(l, &spray_params(l)).unwrap())
        .collect()
}

/// Moves a raw sample into the domain's sampling region; `None` if it
/// still falls outside.
fn place(domain: &ConicalDomain, x: &[f64], y: &[f64]) -> Option<TangentState> {
    let mut x = x.to_vec();
    if domain
        .constraints()
        .iter()
        .any(|c| matches!(c, Constraint::HalfSpace { axis: 1 }))
    {
        x[1] = x[1].abs() + 0.2;
    }
    let s = TangentState::new(x, y.to_vec()).ok()?;
    domain.contains(&s).then_some(s)
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    vec(-0.6..0.6f64, 2)
}

fn velocity() -> impl Strategy<Value = Vec<f64>> {
    vec(-1.0..1.0f64, 2).prop_filter("nonzero", |y| norm(y) > 1e-2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn catalog_sprays_are_two_homogeneous(x in point(), y in velocity()) {
        for sp in catalog_sprays() {
            if let Some(s) = place(sp.domain(), &x, &y) {
                let r = check_homogeneity(&sp, &[s], &[0.5, 2.0, 10.0]).unwrap();
                prop_assert!(r.max_deviation <= 1e-9, "{}: {:e}", sp.label(), r.max_deviation);
            }
        }
    }

    #[test]
    fn domains_are_cones(x in point(), y in velocity(), lambda in 0.01..100.0f64) {
        for sp in catalog_sprays() {
            if let Some(s) = place(sp.domain(), &x, &y) {
                prop_assert!(sp.domain().contains(&s.scaled(lambda).unwrap()));
            }
        }
    }

    #[test]
    fn deforming_back_restores_the_spray(x in point(), y in velocity()) {
        let s = TangentState::new(x, y).unwrap();
        for base in ["flat_ball", "hyperbolic_ball", "klein_finsler"] {
            let sp = named_spray(base, &Params::new()).unwrap();
            for f in ["funk", "funk_reversible", "sphere_proj", "funk_log"] {
                let p = named_factor(f, &Params::new()).unwrap();
                let there = projective_deform(&sp, &p).unwrap();
                let back = projective_deform(&there, &p.scaled(-1.0)).unwrap();
                if let (Ok(a), Ok(b)) = (sp.eval(&s), back.eval(&s)) {
                    for (u, v) in a.iter().zip(&b) {
                        prop_assert!((u - v).abs() <= 1e-14 * (1.0 + norm(&a)) , "{base}+{f}");
                    }
                }
            }
        }
    }

    #[test]
    fn hyperbolic_ball_preserves_euclidean_speed(x in vec(-0.5..0.5f64, 3), y in vec(-1.0..1.0f64, 3)) {
        prop_assume!(norm(&y) > 1e-2);
        let sp = named_spray("hyperbolic_ball", &params(&[("dim", 3.0)])).unwrap();
        let s = TangentState::new(x, y.clone()).unwrap();
        let g = sp.eval(&s).unwrap();
        let along: f64 = g.iter().zip(&y).map(|(a, b)| a * b).sum();
        prop_assert!(along.abs() <= 1e-12);
    }

    #[test]
    fn klein_coefficients_are_reversible(x in point(), y in velocity()) {
        let sp = named_spray("klein_finsler", &Params::new()).unwrap();
        let s = TangentState::new(x, y).unwrap();
        let a = sp.eval(&s).unwrap();
        let b = sp.eval(&s.reversed()).unwrap();
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() <= 1e-12);
        }
    }

    #[test]
    fn funk_translation_identity(u in point(), v in velocity(), frac in -0.9..0.9f64) {
        let s = TangentState::new(u.clone(), v.clone()).unwrap();
        let f = catalog::funk_metric_ball(&s).unwrap();
        let fb = catalog::funk_metric_ball(&s.reversed()).unwrap();
        // Chord parameter strictly inside (−1/F(u,−v), 1/F(u,v)).
        let t = if frac >= 0.0 { frac / f } else { frac / fb };
        let (r1, r2) = catalog::verify_funk_translation_identity(&u, &v, t).unwrap();
        let scale = 1.0 + (f / (1.0 - t * f)).abs() + (fb / (1.0 + t * fb)).abs();
        prop_assert!(r1 <= 1e-10 * scale && r2 <= 1e-10 * scale, "{r1:e} {r2:e}");
    }

    #[test]
    fn curvature_is_two_homogeneous_with_trace_ricci(x in point(), y in velocity()) {
        for sp in catalog_sprays() {
            let Some(s) = place(sp.domain(), &x, &y) else { continue };
            let a = riemann_curvature(&sp, &s).unwrap();
            let b = riemann_curvature(&sp, &s.scaled(2.0).unwrap()).unwrap();
            let n = s.dim();
            let tr: f64 = (0..n).map(|i| a.r[i][i]).sum();
            prop_assert_eq!(tr, a.ric);
            prop_assert!((b.ric - 4.0 * a.ric).abs() <= 1e-7 * (1.0 + a.ric.abs()));
            for i in 0..n {
                for k in 0..n {
                    prop_assert!((b.r[i][k] - 4.0 * a.r[i][k]).abs() <= 1e-7 * (1.0 + a.r[i][k].abs()));
                }
            }
            let g = sp.eval(&s).unwrap();
            prop_assert!(berwald_data(&sp, &s).unwrap().euler_residual(&g, s.y()) <= 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn funk_norm_hits_the_sphere(x in vec(-0.6..0.6f64, 3), y in vec(-1.0..1.0f64, 3)) {
        prop_assume!(norm(&x) < 0.95 && norm(&y) > 1e-3);
        let s = TangentState::new(x.clone(), y.clone()).unwrap();
        let f = catalog::funk_metric_ball(&s).unwrap();
        let p: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b / f).collect();
        prop_assert!((norm(&p) - 1.0).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn dual_partials_agree_with_finite_differences(x in point(), y in velocity()) {
        // The oracle's absolute steps are sized for unit velocities; the
        // derivatives are homogeneous in y, so nothing is lost.
        let unit: Vec<f64> = y.iter().map(|v| v / norm(&y)).collect();
        for sp in catalog_sprays() {
            let Some(s) = place(sp.domain(), &x, &unit) else { continue };
            let exact = jet_at(&sp, s.x(), s.y()).unwrap();
            let f = |a: &[f64], b: &[f64]| sp.eval_raw(a, b);
            let approx = fd_jet(&f, s.x(), s.y(), FdSteps::default()).unwrap();
            let close = |u: f64, v: f64| (u - v).abs() <= 1e-6 * u.abs().max(1.0);
            for i in 0..exact.g.len() {
                for m in 0..exact.grad[i].len() {
                    prop_assert!(close(exact.grad[i][m], approx.grad[i][m]), "{} d{i}/d{m}", sp.label());
                    for q in 0..exact.grad[i].len() {
                        prop_assert!(close(exact.hess[i][m][q], approx.hess[i][m][q]), "{} d2 {i} {m} {q}", sp.label());
                    }
                }
            }
        }
    }

    #[test]
    fn method2_fields_scale_and_circles_ignore_position(
        x in vec(-2.0..2.0f64, 2), x2 in vec(-2.0..2.0f64, 2), y in velocity(),
    ) {
        let circ = pathspace::construct_spray(&PathFamily::circles(2, 0.8).unwrap()).unwrap();
        let a = circ.eval(&TangentState::new(x.clone(), y.clone()).unwrap()).unwrap();
        let b = circ.eval(&TangentState::new(x2, y.clone()).unwrap()).unwrap();
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() <= 1e-9);
        }
        let semi = pathspace::construct_spray(&PathFamily::semicircles().unwrap()).unwrap();
        if let Some(s) = place(semi.domain(), &x, &y) {
            let g = semi.eval(&s).unwrap();
            let g2 = semi.eval(&s.scaled(2.0).unwrap()).unwrap();
            for (u, v) in g.iter().zip(&g2) {
                prop_assert!((v - 4.0 * u).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn ball_arc_fields_are_orthogonal_to_velocity(x in vec(-0.5..0.5f64, 3), y in vec(-1.0..1.0f64, 3)) {
        prop_assume!(norm(&y) > 1e-2);
        let arcs = pathspace::construct_spray(&PathFamily::ball_arcs(3).unwrap()).unwrap();
        let g = arcs.eval(&TangentState::new(x, y.clone()).unwrap()).unwrap();
        let along: f64 = g.iter().zip(&y).map(|(a, b)| a * b).sum();
        prop_assert!(along.abs() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn probed_intervals_scale_inversely_with_speed(x in point(), y in velocity()) {
        for label in ["flat_ball", "semicircle", "hyperbolic_ball"] {
            let sp = named_spray(label, &Params::new()).unwrap();
            let Some(s) = place(sp.domain(), &x, &y) else { continue };
            let a = geodesics::probe_maximal_interval(&sp, &s, &Default::default()).unwrap();
            let b = geodesics::probe_maximal_interval(&sp, &s.scaled(2.0).unwrap(), &Default::default()).unwrap();
            for (u, v, finite) in [(a.a, b.a, a.left_finite()), (a.b, b.b, a.right_finite())] {
                if finite {
                    prop_assert!((2.0 * v - u).abs() <= 1e-4 * u.abs(), "{label}: {u} {v}");
                }
            }
        }
    }

    #[test]
    fn restarting_matches_one_run(x in point(), y in velocity(), t1 in 0.05..0.3f64, t2 in 0.05..0.3f64) {
        for label in ["semicircle", "hyperbolic_ball", "sphere_proj", "funk_log"] {
            let sp = named_spray(label, &Params::new()).unwrap();
            let Some(s) = place(sp.domain(), &x, &y.iter().map(|v| v / norm(&y)).collect::<Vec<_>>()) else { continue };
            let iv = geodesics::probe_maximal_interval(&sp, &s, &Default::default()).unwrap();
            prop_assume!(t1 + t2 < 0.5 * iv.b);
            let settings = IntegratorSettings::default();
            let whole = geodesics::integrate(&sp, &s, t1 + t2, &settings).unwrap();
            let first = geodesics::integrate(&sp, &s, t1, &settings).unwrap();
            let mid = first.samples.last().unwrap();
            let restart = TangentState::new(mid.x.clone(), mid.y.clone()).unwrap();
            let second = geodesics::integrate(&sp, &restart, t2, &settings).unwrap();
            let (a, b) = (&whole.samples.last().unwrap().x, &second.samples.last().unwrap().x);
            let d: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
            prop_assert!(norm(&d) <= 1e-8, "{label}: {:e}", norm(&d));
        }
    }

    #[test]
    fn tighter_tolerances_barely_move_the_endpoint(x in point(), y in velocity()) {
        for sp in catalog_sprays() {
            let unit: Vec<f64> = y.iter().map(|v| v / norm(&y)).collect();
            let Some(s) = place(sp.domain(), &x, &unit) else { continue };
            let coarse = IntegratorSettings::default();
            let fine = IntegratorSettings { atol: 0.5 * coarse.atol, rtol: 0.5 * coarse.rtol, ..coarse };
            let iv = geodesics::probe_maximal_interval(&sp, &s, &Default::default()).unwrap();
            let t = (0.5 * iv.b).min(1.0);
            let a = geodesics::integrate(&sp, &s, t, &coarse).unwrap();
            let b = geodesics::integrate(&sp, &s, t, &fine).unwrap();
            let (p, q) = (&a.samples.last().unwrap().x, &b.samples.last().unwrap().x);
            let d: Vec<f64> = p.iter().zip(q).map(|(u, v)| u - v).collect();
            // Step control mixes absolute and relative tolerances, so the
            // change is measured against the size of the endpoint.
            let scale = norm(p).max(1.0);
            prop_assert!(norm(&d) <= 10.0 * coarse.residual_bound * scale, "{}: {:e}", sp.label(), norm(&d));
        }
    }
}

#[test]
fn weak_ricci_dichotomy_for_funk_factors() {
    let ball = ConicalDomain::unit_ball(2);
    let states = spraylab::sampling::seeded_states(&ball, 20, 3).unwrap();
    for (c, constant) in [(0.0, true), (0.5, true), (1.0, true), (2.0, false)] {
        let sp = named_spray("funk_scaled", &params(&[("c", c)])).unwrap();
        let r =
            diffops::is_weakly_ricci_constant(&sp, &states, diffops::WEAK_RICCI_THRESHOLD).unwrap();
        assert_eq!(r.weakly_ricci_constant, constant, "c = {c}: {r:?}");
    }
}
