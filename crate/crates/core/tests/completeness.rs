use spraylab::catalog::{funk_metric_ball, named_spray, params};
use spraylab::completeness::{self, CompletionSettings, ReparamStrategy};
use spraylab::geodesics::{self, IntegratorSettings};
use spraylab::sampling::seeded_states;
use spraylab::{Params, SprayField, TangentState};

fn spray(label: &str) -> SprayField {
    named_spray(label, &Params::new()).unwrap()
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}

#[test]
fn ln_two_sided_on_flat_ball_is_klein() {
    let done = completeness::make_complete(
        &spray("flat_ball"),
        ReparamStrategy::LnTwoSided,
        &Default::default(),
    )
    .unwrap();
    let klein = spray("klein_finsler");
    for s in seeded_states(done.domain(), 100, 31).unwrap() {
        assert!(max_gap(&done.eval(&s).unwrap(), &klein.eval(&s).unwrap()) <= 2e-4);
    }
}

#[test]
fn ln_right_on_flat_ball_is_half_funk() {
    let done = completeness::make_complete(
        &spray("flat_ball"),
        ReparamStrategy::LnRight,
        &Default::default(),
    )
    .unwrap();
    for s in seeded_states(done.domain(), 100, 32).unwrap() {
        let f = funk_metric_ball(&s).unwrap();
        let want: Vec<f64> = s.y().iter().map(|v| 0.5 * f * v).collect();
        assert!(max_gap(&done.eval(&s).unwrap(), &want) <= 2e-4);
    }
}

#[test]
fn tan_two_sided_on_semicircles_is_semicircle_complete() {
    let done = completeness::make_complete(
        &spray("semicircle"),
        ReparamStrategy::TanTwoSided,
        &Default::default(),
    )
    .unwrap();
    let target = spray("semicircle_complete");
    let states: Vec<TangentState> = seeded_states(done.domain(), 150, 33)
        .unwrap()
        .into_iter()
        .filter(|s| s.y()[0].abs() > 1e-3)
        .take(100)
        .collect();
    assert_eq!(states.len(), 100);
    for s in &states {
        assert!(
            max_gap(&done.eval(s).unwrap(), &target.eval(s).unwrap()) <= 2e-4,
            "{s:?}"
        );
        let p = completeness::completion_factor(
            &spray("semicircle"),
            s,
            ReparamStrategy::TanTwoSided,
            &Default::default(),
        )
        .unwrap();
        assert!((p + s.y()[1] / s.x()[1]).abs() <= 2e-4);
    }
}

#[test]
fn completion_factor_is_one_homogeneous() {
    let cases = [
        ("flat_ball", ReparamStrategy::LnLeft),
        ("flat_ball", ReparamStrategy::LnRight),
        ("flat_ball", ReparamStrategy::LnTwoSided),
        ("semicircle", ReparamStrategy::TanTwoSided),
        ("semicircle", ReparamStrategy::LnTwoSided),
    ];
    for (label, k) in cases {
        let sp = spray(label);
        for s in seeded_states(sp.domain(), 10, 34).unwrap() {
            let p1 = completeness::completion_factor(&sp, &s, k, &Default::default()).unwrap();
            let p2 = completeness::completion_factor(
                &sp,
                &s.scaled(2.0).unwrap(),
                k,
                &Default::default(),
            )
            .unwrap();
            assert!(
                (p2 - 2.0 * p1).abs() <= 1e-3 * p1.abs().max(1e-3),
                "{label} {k}: {p1} {p2}"
            );
        }
    }
}

#[test]
fn completed_geodesics_keep_their_point_sets() {
    let base = spray("semicircle");
    let done =
        completeness::make_complete(&base, ReparamStrategy::TanTwoSided, &Default::default())
            .unwrap();
    let settings = IntegratorSettings {
        residual_bound: 1e-6,
        ..Default::default()
    };
    let s = TangentState::new(vec![0.2, 0.7], vec![0.5, 0.3]).unwrap();
    let a = geodesics::integrate(&done, &s, 1.0, &settings).unwrap();
    let b = geodesics::integrate(&base, &s, 3.0, &Default::default()).unwrap();
    assert!(geodesics::pointset_distance(&a, &b) <= 1e-5);
}

#[test]
fn completeness_verdicts() {
    let ball = spraylab::ConicalDomain::unit_ball(2);
    let states = seeded_states(&ball, 50, 35).unwrap();
    let probe = Default::default();
    let r = completeness::verify_complete(&spray("klein_finsler"), &states, 1e4, &probe).unwrap();
    assert!(r.complete);
    let r = completeness::verify_complete(&spray("funk_log"), &states, 1e4, &probe).unwrap();
    assert!(r.complete);
    let half = named_spray("funk_scaled", &params(&[("c", 0.5)])).unwrap();
    let r = completeness::verify_complete(&half, &states, 1e4, &probe).unwrap();
    assert!(r.positively_complete && !r.negatively_complete);
    let quarter = named_spray("funk_scaled", &params(&[("c", 0.25)])).unwrap();
    let r = completeness::verify_complete(&quarter, &states, 1e4, &probe).unwrap();
    assert!(r.incomplete_both_ways);
}

#[test]
fn make_complete_checks_sample_patterns() {
    let settings = CompletionSettings {
        sample_states: seeded_states(&spraylab::ConicalDomain::unit_ball(2), 5, 36).unwrap(),
        ..Default::default()
    };
    assert!(completeness::make_complete(
        &spray("flat_ball"),
        ReparamStrategy::LnTwoSided,
        &settings
    )
    .is_ok());
    let r =
        completeness::make_complete(&spray("klein_finsler"), ReparamStrategy::LnRight, &settings);
    assert!(matches!(
        r,
        Err(spraylab::SprayError::WrongIntervalPattern { .. })
    ));
}
