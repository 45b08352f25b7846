//! Acceptance criteria 1-8. Prints one PASS/FAIL line per criterion and
//! exits nonzero when any fails.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use tiltstab_cli::{analysis_config, cmd_analyze, load, AnalyzeArgs};
use tiltstab_core::analysis::{analyze, AnalysisReport, OracleOutcome};
use tiltstab_core::linalg::norm2;
use tiltstab_core::oracle::{solve_tilted, OracleConfig, OracleReport};
use tiltstab_core::report::to_canonical_string;
use tiltstab_core::stability::{estimate_mscq, Verdict};
use tiltstab_core::validation::{
    derivative_suite, graph_derivative_suite, lp_suite, qp_consistency_suite,
};
use tiltstab_core::Problem;

const SEED: u64 = 2024;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../problems").join(name)
}

fn args(name: &str) -> AnalyzeArgs {
    AnalyzeArgs {
        file: fixture(name),
        gamma: None,
        eta: 1e-2,
        kappa: None,
        radius: 0.1,
        dirs: 500,
        json: None,
        no_oracle: false,
    }
}

fn run_analysis(a: &AnalyzeArgs) -> Result<(Problem, AnalysisReport), String> {
    let (_, p) = load(&a.file).map_err(|e| e.to_string())?;
    let r = analyze(&p, &analysis_config(a)).map_err(|e| e.to_string())?;
    Ok((p, r))
}

fn oracle(r: &AnalysisReport) -> Result<&OracleReport, String> {
    match &r.oracle {
        OracleOutcome::Ran { report, .. } => Ok(report),
        OracleOutcome::Skipped(why) => Err(format!("oracle skipped: {why}")),
    }
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// Collects the failed checks of one criterion.
struct Checks(Vec<String>);

impl Checks {
    fn new() -> Self {
        Checks(Vec::new())
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.0.push(what.into());
        }
    }

    fn finish(self, detail: String) -> Result<String, String> {
        if self.0.is_empty() {
            Ok(detail)
        } else {
            Err(format!("{}; {}", self.0.join("; "), detail))
        }
    }
}

fn criterion_1() -> Result<String, String> {
    let start = Instant::now();
    let (_, r) = run_analysis(&args("ex4_5.nlp"))?;
    let elapsed = start.elapsed();
    let o = oracle(&r)?;
    let so = &r.second_order;
    let bound = r.tilt_bound.unwrap_or(f64::NAN);
    let l = o.lipschitz.unwrap_or(f64::NAN);
    let form = so.ssosc.min_form.unwrap_or(f64::NAN);
    let mut c = Checks::new();
    c.check(!r.cq.licq.holds, "LICQ should fail");
    c.check(!r.cq.mfcq.holds, "MFCQ should fail");
    c.check(
        r.cq.crcq.as_ref().is_some_and(|c| c.holds_on_samples),
        "CRCQ should hold on samples",
    );
    c.check(so.ssosc.verdict == Verdict::Holds, "SSOSC should hold");
    c.check((form - 2.0).abs() <= 1e-9, format!("SSOSC form {form} != 2"));
    c.check((bound - 0.5).abs() <= 1e-9, format!("tilt bound {bound}"));
    c.check(o.single_valued, "oracle multivalued");
    c.check((0.4..=0.55).contains(&l), format!("L̂ = {l}"));
    c.check(elapsed < Duration::from_secs(30), format!("runtime {elapsed:.2?}"));
    c.finish(format!(
        "form {form}, bound {bound:.12}, L̂ {l:.6}, {elapsed:.2?}"
    ))
}

fn criterion_2() -> Result<String, String> {
    let (p, r) = run_analysis(&AnalyzeArgs {
        gamma: Some(2.0),
        ..args("ex4_11.nlp")
    })?;
    let mut c = Checks::new();
    let ev = p.evaluate(p.point()).map_err(|e| e.to_string())?;
    let set = ev.multiplier_set(&[1.0, 0.0]).map_err(|e| e.to_string())?;
    c.check(
        set.vertices().len() == 1 && close(&set.vertices()[0], &[0.0, 1.0, 0.0], 1e-9),
        format!("vertices {:?}", set.vertices()),
    );
    let mut rays = set.rays().to_vec();
    rays.sort_by(|a, b| a.partial_cmp(b).unwrap());
    c.check(
        rays.len() == 2
            && close(&rays[0], &[0.0, 0.0, 1.0], 1e-9)
            && close(&rays[1], &[1.0, 1.0, 0.0], 1e-9),
        format!("rays {rays:?}"),
    );
    let khat = r.cq.mscq.kappa_hat;
    c.check((0.9..=1.1).contains(&khat), format!("MSCQ κ̂ = {khat}"));
    c.check(!r.cq.bepp.bounded_on_samples, "BEPP should fail with witness");
    let mut norms = Vec::new();
    for i in [2.0f64, 4.0, 8.0] {
        let x = [0.0, 1.0 / i];
        let ev = p.evaluate(&x).map_err(|e| e.to_string())?;
        let set = ev.multiplier_set(&[1.0, 0.0]).map_err(|e| e.to_string())?;
        let at_point = set.vertices().iter().map(|v| norm2(v)).fold(0.0, f64::max);
        let shell = r
            .cq
            .bepp
            .shells
            .iter()
            .find(|s| (s.r_outer - 1.0 / i).abs() < 1e-12)
            .and_then(|s| s.witness.as_ref())
            .map_or(0.0, |w| norm2(&w.lambda));
        c.check(at_point >= i * i - 1e-9, format!("vertex norm {at_point} at {x:?}"));
        c.check(shell >= i * i - 1e-9, format!("BEPP witness norm {shell} in shell 1/{i}"));
        norms.push(at_point);
    }
    let so = &r.second_order;
    c.check(so.ssosc.verdict == Verdict::Holds, "SSOSC should hold");
    let bound = r.tilt_bound.unwrap_or(f64::NAN);
    c.check((bound - 0.5).abs() <= 1e-9, format!("tilt bound {bound}"));
    let o = oracle(&r)?;
    let l = o.lipschitz.unwrap_or(f64::NAN);
    c.check(o.single_valued, "oracle multivalued");
    c.check(l <= 0.55, format!("L̂ = {l}"));
    let ell = so.kappa_free.min_form.unwrap_or(f64::NAN);
    c.check(so.kappa_free.verdict == Verdict::Holds, "kappa-free check should hold");
    c.check((ell - 2.0).abs() <= 1e-9, format!("ℓ = {ell}"));
    c.finish(format!(
        "κ̂ {khat:.6}, vertex norms {norms:?}, bound {bound:.12}, L̂ {l:.6}, ℓ {ell}"
    ))
}

fn criterion_3() -> Result<String, String> {
    let (_, p) = load(&fixture("ex3_5.nlp")).map_err(|e| e.to_string())?;
    let mscq = estimate_mscq(&p, 0.1, 2000).map_err(|e| e.to_string())?;
    let t = solve_tilted(&p, &[0.1, 0.1], &OracleConfig::default()).map_err(|e| e.to_string())?;
    let (_, r) = run_analysis(&args("ex3_5.nlp"))?;
    let o = oracle(&r)?;
    let mut c = Checks::new();
    c.check(mscq.diverging, "MSCQ should diverge");
    c.check(mscq.kappa_hat >= 5.0, format!("MSCQ ratio {}", mscq.kappa_hat));
    c.check(t.clusters.len() == 2, format!("{} clusters", t.clusters.len()));
    for target in [[0.05, 0.0], [0.0, 0.05]] {
        c.check(
            t.clusters.iter().any(|cl| close(&cl.point, &target, 2e-3)),
            format!("no cluster near {target:?}"),
        );
    }
    c.check(!o.single_valued, "oracle should be multivalued");
    let pts: Vec<&Vec<f64>> = t.clusters.iter().map(|cl| &cl.point).collect();
    c.finish(format!("ratio {:.3}, clusters {pts:?}", mscq.kappa_hat))
}

fn criterion_4() -> Result<String, String> {
    let r = lp_suite(SEED, 500);
    let mut c = Checks::new();
    c.check(r.cases == 500, "case count");
    c.check(r.passed(), r.failures.first().cloned().unwrap_or_default());
    c.check(r.elapsed < Duration::from_secs(60), "runtime");
    c.finish(r.to_string())
}

fn criterion_5() -> Result<String, String> {
    let r = derivative_suite(SEED, 1000);
    let mut c = Checks::new();
    c.check(r.cases == 1000, "case count");
    c.check(r.passed(), r.failures.first().cloned().unwrap_or_default());
    c.finish(r.to_string())
}

fn criterion_6() -> Result<String, String> {
    let r = qp_consistency_suite(SEED, 25);
    let mut c = Checks::new();
    c.check(r.cases == 25, "case count");
    c.check(r.passed(), r.failures.first().cloned().unwrap_or_default());
    c.check(r.elapsed < Duration::from_secs(600), "runtime");
    c.finish(r.to_string())
}

fn criterion_7() -> Result<String, String> {
    let mut problems = Vec::new();
    for name in [
        "ex3_5.nlp",
        "ex4_5.nlp",
        "ex4_11.nlp",
        "single_constraint.nlp",
        "unconstrained_quadratic.nlp",
    ] {
        let (_, p) = load(&fixture(name)).map_err(|e| e.to_string())?;
        problems.push((name.to_string(), p));
    }
    let r = graph_derivative_suite(&problems, SEED, 200);
    let mut c = Checks::new();
    c.check(r.cases == 200, "case count");
    c.check(r.passed(), r.failures.first().cloned().unwrap_or_default());
    c.finish(r.to_string())
}

fn criterion_8() -> Result<String, String> {
    let mut texts = Vec::new();
    for name in ["ex4_5.nlp", "ex4_11.nlp", "ex3_5.nlp"] {
        let a = args(name);
        let first = cmd_analyze(&a).map_err(|e| e.to_string())?;
        let second = cmd_analyze(&a).map_err(|e| e.to_string())?;
        let (x, y) = (to_canonical_string(&first.json), to_canonical_string(&second.json));
        if x != y {
            return Err(format!("{name}: reports differ"));
        }
        texts.push(x.len());
    }
    Ok(format!("byte-identical reports of {texts:?} bytes"))
}

type Criterion = fn() -> Result<String, String>;

fn main() {
    let criteria: [(&str, Criterion); 8] = [
        ("twin constraints example", criterion_1),
        ("unbounded multiplier example", criterion_2),
        ("coordinate axes example", criterion_3),
        ("LP vs vertex enumeration", criterion_4),
        ("derivatives vs finite differences", criterion_5),
        ("tilt bound vs oracle on convex QPs", criterion_6),
        ("graphical derivative structure", criterion_7),
        ("deterministic JSON", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
