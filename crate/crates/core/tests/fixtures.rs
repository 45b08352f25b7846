mod common;

use common::load;
use tiltstab_core::analysis::{analyze, AnalysisConfig, OracleOutcome};
use tiltstab_core::linalg::norm2;
use tiltstab_core::oracle::{solve_tilted, OracleConfig};
use tiltstab_core::stability::{
    check_kappa_free, check_pointbased, check_ssosc, delta_spectrum, estimate_bepp,
    estimate_mscq, build_delta, tilt_bound, StationaryPoint, Verdict,
};

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn twin_constraints_report() {
    let (_, p) = load("ex4_5.nlp");
    let r = analyze(&p, &AnalysisConfig::default()).unwrap();
    assert!(!r.cq.licq.holds);
    assert!(!r.cq.mfcq.holds);
    assert!(r.cq.crcq.as_ref().unwrap().holds_on_samples);
    assert_eq!(r.second_order.ssosc.verdict, Verdict::Holds);
    assert!((r.second_order.ssosc.min_form.unwrap() - 2.0).abs() < 1e-12);
    assert!((r.tilt_bound.unwrap() - 0.5).abs() < 1e-9);
    let OracleOutcome::Ran { report, growth } = &r.oracle else {
        panic!("oracle skipped");
    };
    assert!(report.single_valued);
    let l = report.lipschitz.unwrap();
    assert!((0.4..=0.55).contains(&l), "{l}");
    assert!(growth.as_ref().unwrap().holds);
    assert!(!r.inconsistent());
}

#[test]
fn unbounded_multiplier_example_report() {
    let (_, p) = load("ex4_11.nlp");
    let ev = p.evaluate(p.point()).unwrap();
    let set = ev.multiplier_set(&[1.0, 0.0]).unwrap();
    assert_eq!(set.vertices().len(), 1);
    assert!(close(&set.vertices()[0], &[0.0, 1.0, 0.0], 1e-9));
    assert_eq!(set.rays().len(), 2);
    assert!(close(&set.rays()[0], &[0.0, 0.0, 1.0], 1e-9));
    assert!(close(&set.rays()[1], &[1.0, 1.0, 0.0], 1e-9));

    let mscq = estimate_mscq(&p, 0.1, 2000).unwrap();
    assert!(!mscq.diverging);
    assert!((0.95..=1.05).contains(&mscq.kappa_hat), "{}", mscq.kappa_hat);

    let bepp = estimate_bepp(&p, 0.5, 100, 50).unwrap();
    assert!(!bepp.bounded_on_samples);
    for i in [2.0f64, 4.0, 8.0] {
        let x = [0.0, 1.0 / i];
        let ev = p.evaluate(&x).unwrap();
        let set = ev.multiplier_set(&[1.0, 0.0]).unwrap();
        let big = set.vertices().iter().map(|v| norm2(v)).fold(0.0, f64::max);
        assert!(big >= i * i - 1e-9, "at {x:?}: {big}");
        let shell = bepp
            .shells
            .iter()
            .find(|s| (s.r_outer - 1.0 / i).abs() < 1e-12)
            .unwrap_or_else(|| panic!("no shell of radius 1/{i}"));
        let w = shell.witness.as_ref().unwrap();
        assert!(w.x[0].abs() < 1e-12, "{:?}", w.x);
        assert!(norm2(&w.lambda) >= i * i - 1e-9, "{:?}", w.lambda);
    }

    let sp = StationaryPoint::new(&p).unwrap();
    assert_eq!(check_ssosc(&sp).unwrap().condition.verdict, Verdict::Holds);
    let delta = build_delta(&sp, 2.0, 500).unwrap();
    let spectrum = delta_spectrum(&sp, &delta);
    assert!((tilt_bound(&spectrum) - 0.5).abs() < 1e-9);
    let kf = check_kappa_free(&spectrum, &delta);
    assert_eq!(kf.verdict, Verdict::Holds);
    assert!((kf.min_form.unwrap() - 2.0).abs() < 1e-9);
    assert_eq!(check_pointbased(&spectrum, &delta, 0.55).unwrap().verdict, Verdict::Holds);
    assert_eq!(check_pointbased(&spectrum, &delta, 0.45).unwrap().verdict, Verdict::Fails);

    let r = analyze(
        &p,
        &AnalysisConfig {
            gamma: Some(2.0),
            ..AnalysisConfig::default()
        },
    )
    .unwrap();
    let OracleOutcome::Ran { report, .. } = &r.oracle else {
        panic!("oracle skipped");
    };
    assert!(report.single_valued);
    assert!(report.lipschitz.unwrap() <= 0.55);
}

#[test]
fn axes_example_is_multivalued() {
    let (_, p) = load("ex3_5.nlp");
    let mscq = estimate_mscq(&p, 0.1, 2000).unwrap();
    assert!(mscq.diverging);
    assert!(mscq.kappa_hat >= 5.0, "{}", mscq.kappa_hat);
    let t = solve_tilted(&p, &[0.1, 0.1], &OracleConfig::default()).unwrap();
    assert_eq!(t.clusters.len(), 2, "{:?}", t.clusters);
    let mut pts: Vec<&Vec<f64>> = t.clusters.iter().map(|c| &c.point).collect();
    pts.sort_by(|a, b| b[0].total_cmp(&a[0]));
    assert!(close(pts[0], &[0.05, 0.0], 2e-3), "{pts:?}");
    assert!(close(pts[1], &[0.0, 0.05], 2e-3), "{pts:?}");

    let r = analyze(&p, &AnalysisConfig::default()).unwrap();
    assert_eq!(r.second_order.ssosc.verdict, Verdict::NotApplicable);
    assert_eq!(r.second_order.ssosc.reason.as_deref(), Some("mscq"));
    assert!(r.tilt_bound.is_none());
    let OracleOutcome::Ran { report, .. } = &r.oracle else {
        panic!("oracle skipped");
    };
    assert!(!report.single_valued);
}

#[test]
fn affine_and_unconstrained_fixtures() {
    for name in ["single_constraint.nlp", "unconstrained_quadratic.nlp"] {
        let (_, p) = load(name);
        let r = analyze(&p, &AnalysisConfig::default()).unwrap();
        assert!(r.cq.licq.holds, "{name}");
        assert_eq!(r.second_order.ssosc.verdict, Verdict::Holds, "{name}");
        assert_eq!(r.second_order.extreme_point.verdict, Verdict::Holds, "{name}");
        assert!((r.tilt_bound.unwrap() - 0.5).abs() < 1e-9, "{name}");
        let OracleOutcome::Ran { report, .. } = &r.oracle else {
            panic!("oracle skipped");
        };
        assert!((report.lipschitz.unwrap() - 0.5).abs() < 0.02, "{name}");
    }
}

#[test]
fn ssosc_implies_kappa_free_and_pointbased_bounds_the_modulus() {
    for name in ["ex4_5.nlp", "ex4_11.nlp", "single_constraint.nlp", "unconstrained_quadratic.nlp"] {
        let (_, p) = load(name);
        let sp = StationaryPoint::new(&p).unwrap();
        let delta = build_delta(&sp, 2.0, 300).unwrap();
        let spectrum = delta_spectrum(&sp, &delta);
        if check_ssosc(&sp).unwrap().condition.verdict == Verdict::Holds {
            assert_eq!(check_kappa_free(&spectrum, &delta).verdict, Verdict::Holds, "{name}");
        }
        let bound = tilt_bound(&spectrum);
        for kappa in [0.3, 0.5, 0.7, 1.0] {
            if check_pointbased(&spectrum, &delta, kappa).unwrap().verdict == Verdict::Holds {
                assert!(bound <= kappa + 1e-9, "{name}: bound {bound} > {kappa}");
            }
        }
    }
}

#[test]
fn analysis_is_deterministic() {
    let (_, p) = load("ex4_11.nlp");
    let a = analyze(&p, &AnalysisConfig::default()).unwrap();
    let b = analyze(&p, &AnalysisConfig::default()).unwrap();
    // Debug text compares NaN fields too.
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
}
