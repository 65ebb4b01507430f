use spraylab::catalog::{named_spray, params};
use spraylab::pathspace::{self, PathFamily, RoundtripSettings, ROUNDTRIP_TOLERANCE};
use spraylab::sampling::seeded_states;
use spraylab::{Params, TangentState};

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}

#[test]
fn semicircle_reconstruction_at_random_states() {
    let fam = PathFamily::semicircles().unwrap();
    let spray = pathspace::construct_spray(&fam).unwrap();
    let exact = named_spray("semicircle", &Params::new()).unwrap();
    for s in seeded_states(fam.domain(), 100, 11).unwrap() {
        let gap = max_gap(&spray.eval(&s).unwrap(), &exact.eval(&s).unwrap());
        assert!(gap <= 1e-8, "{s:?}: {gap:e}");
    }
}

#[test]
fn ball_arc_reconstruction_at_random_states() {
    for n in [2, 3] {
        let fam = PathFamily::ball_arcs(n).unwrap();
        let spray = pathspace::construct_spray(&fam).unwrap();
        let exact = named_spray("hyperbolic_ball", &params(&[("dim", n as f64)])).unwrap();
        for s in seeded_states(fam.domain(), 100, 12).unwrap() {
            let g = spray.eval(&s).unwrap();
            assert!(max_gap(&g, &exact.eval(&s).unwrap()) <= 1e-7, "{s:?}");
            let along: f64 = g.iter().zip(s.y()).map(|(a, b)| a * b).sum();
            assert!(along.abs() <= 1e-10);
            let g2 = spray.eval(&s.scaled(2.0).unwrap()).unwrap();
            assert!(g2.iter().zip(&g).all(|(a, b)| (a - 4.0 * b).abs() <= 1e-9));
        }
    }
}

#[test]
fn circle_geodesics_have_the_family_radius() {
    for r in [0.5, 1.0, 2.0] {
        let fam = PathFamily::circles(2, r).unwrap();
        let spray = pathspace::construct_spray(&fam).unwrap();
        let states = seeded_states(fam.domain(), 3, 5).unwrap();
        let report =
            pathspace::roundtrip_check(&fam, &spray, &states, &RoundtripSettings::default())
                .unwrap();
        assert!(report.max_distance <= ROUNDTRIP_TOLERANCE, "{report:?}");
        for (e, s) in report.entries.iter().zip(&states) {
            let centre = &e.fit.as_ref().unwrap().params;
            let traj = spraylab::geodesics::integrate(&spray, s, 2.0, &Default::default()).unwrap();
            for smp in &traj.samples {
                let d = (smp.x[0] - centre[0]).hypot(smp.x[1] - centre[1]);
                assert!((d - r).abs() <= 1e-7);
            }
        }
    }
}

#[test]
fn roundtrips_of_the_other_families() {
    let cases = [
        PathFamily::ball_arcs(2).unwrap(),
        PathFamily::ball_arcs(3).unwrap(),
        PathFamily::cubic2d().unwrap(),
        PathFamily::cubic3d().unwrap(),
        PathFamily::lines(3).unwrap(),
    ];
    for fam in &cases {
        let spray = pathspace::construct_spray(fam).unwrap();
        let states = seeded_states(fam.domain(), 3, 9).unwrap();
        let report =
            pathspace::roundtrip_check(fam, &spray, &states, &RoundtripSettings::default())
                .unwrap();
        assert!(
            report.max_distance <= ROUNDTRIP_TOLERANCE,
            "{}: {:e}",
            fam.name(),
            report.max_distance
        );
    }
}

#[test]
fn ball_arc_diameter_roundtrip() {
    let fam = PathFamily::ball_arcs(2).unwrap();
    let spray = pathspace::construct_spray(&fam).unwrap();
    let s = TangentState::new(vec![0.3, 0.4], vec![0.6, 0.8]).unwrap();
    let report =
        pathspace::roundtrip_check(&fam, &spray, &[s], &RoundtripSettings::default()).unwrap();
    assert!(report.entries[0].fit.is_none());
    assert!(report.max_distance <= 1e-9);
}

#[test]
fn builtin_families_pass_the_axioms() {
    let closure = [(0.5, 0.05), (1.5, -0.1), (2.0, 0.0)];
    for label in [
        "ball_arcs",
        "circles",
        "cubic2d",
        "cubic3d",
        "lines",
        "semicircles",
        "zero",
    ] {
        let dim = match label {
            "cubic3d" => 3.0,
            _ => 2.0,
        };
        let fam = PathFamily::builtin(label, &params(&[("dim", dim)])).unwrap();
        let states = seeded_states(fam.domain(), 10, 21).unwrap();
        let report = pathspace::axioms_check(&fam, &states, &closure).unwrap();
        assert!(report.passed, "{report:?}");
        let p: Vec<f64> = (0..2 * (fam.dim() - 1))
            .map(|i| 0.2 + 0.1 * i as f64)
            .collect();
        let t = match label {
            "semicircles" | "circles" => 1.0,
            "ball_arcs" => -0.5,
            _ => 0.3,
        };
        let det = pathspace::jacobian_rank_check(&fam, t, &p).unwrap();
        assert!(det.abs() > pathspace::JACOBIAN_THRESHOLD, "{label}: {det}");
    }
}
