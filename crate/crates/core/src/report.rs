//! Canonical JSON for analysis and oracle reports: object keys sorted,
//! floats written with 17 significant digits (`{:.16e}`), non-finite floats
//! as the strings `"inf"`, `"-inf"`, `"nan"`, integers verbatim, no
//! insignificant whitespace. Identical reports serialize to identical bytes.

use serde_json::{json, Map, Value};

use crate::analysis::{AnalysisConfig, AnalysisReport, CqReport, OracleOutcome, SecondOrderReport};
use crate::oracle::{
    ConsistencyRecord, GrowthReport, OracleConfig, OracleReport, OracleWitness, TiltResult,
};
use crate::problem_file::ProblemFile;
use crate::stability::{
    BeppReport, ConditionReport, CrcqReport, DeltaEntry, DeltaSet, LicqReport, MfcqReport,
    MscqEstimate, RusoscReport, SecondOrderWitness, ShellRatio,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn num(x: f64) -> Value {
    match serde_json::Number::from_f64(x) {
        Some(n) => Value::Number(n),
        None if x.is_nan() => Value::String("nan".into()),
        None if x > 0.0 => Value::String("inf".into()),
        None => Value::String("-inf".into()),
    }
}

pub fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

pub fn vec_json(v: &[f64]) -> Value {
    Value::Array(v.iter().copied().map(num).collect())
}

pub fn mat_json(rows: &[Vec<f64>]) -> Value {
    Value::Array(rows.iter().map(|r| vec_json(r)).collect())
}

/// Serializes `v` canonically.
pub fn to_canonical_string(v: &Value) -> String {
    let mut out = String::new();
    write_canonical(v, &mut out);
    out
}

fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                let f = n.as_f64().unwrap_or(f64::NAN);
                out.push_str(&format!("{f:.16e}"));
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (k, key) in keys.into_iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(key.clone()).to_string());
                out.push(':');
                write_canonical(&map[key], out);
            }
            out.push('}');
        }
    }
}

pub fn problem_json(file: &ProblemFile) -> Value {
    json!({
        "vars": file.vars,
        "objective": file.objective.display(&file.vars).to_string(),
        "constraints": file.constraint_texts(),
        "point": vec_json(&file.point),
    })
}

fn witness_json(w: &Option<SecondOrderWitness>) -> Value {
    match w {
        None => Value::Null,
        Some(w) => json!({
            "lambda": vec_json(&w.lambda),
            "w": vec_json(&w.w),
            "value": num(w.value),
            "threshold": num(w.threshold),
        }),
    }
}

pub fn condition_json(c: &ConditionReport) -> Value {
    json!({
        "verdict": c.verdict.as_str(),
        "qualifier": c.qualifier,
        "reason": c.reason,
        "witness": witness_json(&c.witness),
        "min_form": opt_num(c.min_form),
        "threshold": num(c.threshold),
        "modulus": opt_num(c.modulus),
    })
}

pub fn licq_json(r: &LicqReport) -> Value {
    json!({
        "verdict": if r.holds { "Holds" } else { "Fails" },
        "rank": r.rank,
        "active": r.active,
    })
}

pub fn mfcq_json(r: &MfcqReport) -> Value {
    json!({
        "verdict": if r.holds { "Holds" } else { "Fails" },
        "t_star": num(r.t_star),
        "direction": vec_json(&r.direction),
    })
}

pub fn crcq_json(r: &CrcqReport) -> Value {
    json!({
        "verdict": if r.holds_on_samples { "HoldsOnSamples" } else { "FailsWithWitness" },
        "radius": num(r.radius),
        "samples": r.samples,
        "witness": r.witness.as_ref().map(|w| json!({
            "subset": w.subset,
            "x": vec_json(&w.x),
            "rank_at_point": w.rank_at_point,
            "rank_at_sample": w.rank_at_sample,
        })),
    })
}

fn shell_json(s: &ShellRatio) -> Value {
    json!({
        "r_inner": num(s.r_inner),
        "r_outer": num(s.r_outer),
        "ratio": num(s.ratio),
        "contributing": s.contributing,
        "worst_point": s.worst_point.as_ref().map(|p| vec_json(p)),
    })
}

pub fn mscq_json(r: &MscqEstimate) -> Value {
    json!({
        "kappa_hat": num(r.kappa_hat),
        "diverging": r.diverging,
        "radius": num(r.radius),
        "samples": r.samples,
        "shells": r.shells.iter().map(shell_json).collect::<Vec<_>>(),
    })
}

pub fn bepp_json(r: &BeppReport) -> Value {
    json!({
        "verdict": if r.bounded_on_samples { "HoldsOnSamples" } else { "FailsWithWitness" },
        "kappa_hat": num(r.kappa_hat),
        "radius": num(r.radius),
        "points": r.points,
        "directions": r.directions,
        "shells": r.shells.iter().map(|s| json!({
            "r_inner": num(s.r_inner),
            "r_outer": num(s.r_outer),
            "ratio": num(s.ratio),
            "points": s.points,
            "witness": s.witness.as_ref().map(|w| json!({
                "x": vec_json(&w.x),
                "xstar": vec_json(&w.xstar),
                "lambda": vec_json(&w.lambda),
                "ratio": num(w.ratio),
            })),
        })).collect::<Vec<_>>(),
    })
}

/// Object with only the probes that were run.
pub fn cq_json(
    licq: Option<&LicqReport>,
    mfcq: Option<&MfcqReport>,
    crcq: Option<&CrcqReport>,
    mscq: Option<&MscqEstimate>,
    bepp: Option<&BeppReport>,
) -> Value {
    let mut m = Map::new();
    if let Some(r) = licq {
        m.insert("licq".into(), licq_json(r));
    }
    if let Some(r) = mfcq {
        m.insert("mfcq".into(), mfcq_json(r));
    }
    if let Some(r) = crcq {
        m.insert("crcq".into(), crcq_json(r));
    }
    if let Some(r) = mscq {
        m.insert("mscq".into(), mscq_json(r));
    }
    if let Some(r) = bepp {
        m.insert("bepp".into(), bepp_json(r));
    }
    Value::Object(m)
}

fn full_cq_json(cq: &CqReport) -> Value {
    let mut v = cq_json(
        Some(&cq.licq),
        Some(&cq.mfcq),
        cq.crcq.as_ref(),
        Some(&cq.mscq),
        Some(&cq.bepp),
    );
    if cq.crcq.is_none() {
        v["crcq"] = json!({ "verdict": "NotApplicable", "reason": "active set too large" });
    }
    v
}

pub fn rusosc_json(r: &RusoscReport) -> Value {
    json!({
        "verdict": match r.verdict {
            crate::stability::Verdict::Holds => "HoldsOnSamples",
            crate::stability::Verdict::Fails => "FailsWithWitness",
            crate::stability::Verdict::NotApplicable => "NotApplicable",
        },
        "eta": num(r.config.eta),
        "ell": num(r.config.ell),
        "gamma": num(r.config.gamma),
        "enforce_ball": r.config.enforce_ball,
        "points": r.config.points,
        "directions": r.config.directions,
        "graph_points": r.graph_points,
        "checks": r.checks,
        "min_value": opt_num(r.min_value),
        "witness": r.witness.as_ref().map(|w| json!({
            "x": vec_json(&w.x),
            "v": vec_json(&w.v),
            "lambda": vec_json(&w.lambda),
            "w": vec_json(&w.w),
            "value": num(w.value),
        })),
    })
}

fn second_order_json(s: &SecondOrderReport) -> Value {
    let mut ssosc = condition_json(&s.ssosc);
    ssosc["faces"] = json!(s.ssosc_faces);
    json!({
        "ssosc": ssosc,
        "pointbased": condition_json(&s.pointbased),
        "kappa_free": condition_json(&s.kappa_free),
        "extreme_point": condition_json(&s.extreme_point),
        "rusosc": match &s.rusosc {
            Some(r) => rusosc_json(r),
            None => json!({ "verdict": "NotApplicable", "reason": "mscq" }),
        },
    })
}

fn delta_json(d: &DeltaSet, spectrum: &[DeltaEntry]) -> Value {
    json!({
        "vertices": mat_json(&d.vertices),
        "gamma": num(d.gamma),
        "radius": num(d.radius),
        "norm": d.norm.as_str(),
        "exact": d.exact,
        "directions": d.directions,
        "cone_dim": d.cone_dim,
        "faces": d.faces,
        "unbounded_directions": d.unbounded_directions,
        "degenerate_ball": d.degenerate_ball,
        "spectrum": spectrum.iter().map(|e| json!({
            "lambda": vec_json(&e.lambda),
            "positive": e.positive,
            "reduced_dim": e.reduced_dim,
            "min_eig": opt_num(e.min_eig.as_ref().map(|m| m.0)),
        })).collect::<Vec<_>>(),
    })
}

pub fn oracle_config_json(c: &OracleConfig) -> Value {
    json!({
        "gamma": num(c.gamma),
        "tilt_radius": num(c.tilt_radius),
        "tilt_levels": c.tilt_levels,
        "resolution": c.resolution,
        "points_per_axis": c.points_per_axis(),
        "refine_polls": c.refine_polls,
        "cluster_tol": num(c.cluster_tolerance()),
    })
}

fn tilt_json(t: &TiltResult) -> Value {
    json!({
        "v": vec_json(&t.v),
        "min_separation": opt_num(t.min_separation),
        "clusters": t.clusters.iter().map(|c| json!({
            "point": vec_json(&c.point),
            "diameter": num(c.diameter),
            "value": num(c.value),
            "members": c.members,
        })).collect::<Vec<_>>(),
    })
}

pub fn oracle_json(r: &OracleReport) -> Value {
    json!({
        "config": oracle_config_json(&r.config),
        "grid_points": r.grid_points,
        "single_valued": r.single_valued,
        "lipschitz": opt_num(r.lipschitz),
        "lipschitz_pair": r.lipschitz_pair.as_ref().map(|(a, b)| json!([vec_json(a), vec_json(b)])),
        "xbar_in_m0": r.xbar_in_m0,
        "witnesses": r.witnesses.iter().map(|w| match w {
            OracleWitness::MultiValued { v, points } => json!({
                "kind": "MultiValued",
                "v": vec_json(v),
                "points": mat_json(points),
            }),
            OracleWitness::NotALocalMin { minimizer, distance } => json!({
                "kind": "NotALocalMin",
                "minimizer": vec_json(minimizer),
                "distance": num(*distance),
            }),
        }).collect::<Vec<_>>(),
        "tilts": r.tilts.iter().map(tilt_json).collect::<Vec<_>>(),
    })
}

pub fn growth_json(g: &GrowthReport) -> Value {
    json!({
        "kappa": num(g.kappa),
        "verdict": if g.holds { "Holds" } else { "Fails" },
        "pairs": g.pairs,
        "witness": g.witness.as_ref().map(|w| json!({
            "v": vec_json(&w.v),
            "u": vec_json(&w.u),
            "x": vec_json(&w.x),
            "lhs": num(w.lhs),
            "rhs": num(w.rhs),
        })),
    })
}

fn consistency_json(c: &ConsistencyRecord) -> Value {
    json!({
        "lipschitz": opt_num(c.lipschitz),
        "bound": num(c.bound),
        "pass": c.pass,
    })
}

fn config_json(c: &AnalysisConfig, report: &AnalysisReport) -> Value {
    json!({
        "gamma": num(report.gamma),
        "gamma_source": report.gamma_source,
        "kappa": num(report.kappa),
        "kappa_source": report.kappa_source,
        "ell": num(c.ell.unwrap_or(1.0 / report.kappa)),
        "eta": num(c.eta),
        "directions": c.directions,
        "ball_norm": "inf",
        "mscq_radius": num(c.mscq_radius),
        "mscq_samples": c.mscq_samples,
        "crcq_radius": num(c.crcq_radius),
        "crcq_samples": c.crcq_samples,
        "bepp_radius": num(c.bepp_radius),
        "bepp_points": c.bepp_points,
        "bepp_directions": c.bepp_directions,
        "rusosc_points": c.rusosc_points,
        "rusosc_directions": c.rusosc_directions,
        "rusosc_enforce_ball": c.rusosc_enforce_ball,
        "oracle": c.oracle.as_ref().map(oracle_config_json),
        "tolerances": {
            "active": num(crate::nlp::ACTIVE_TOL),
            "positive": num(crate::nlp::POSITIVE_TOL),
            "stationary": num(crate::stability::STATIONARY_TOL),
            "eigenvalue": num(crate::stability::EIG_TOL),
            "rank": num(crate::linalg::RANK_TOL),
        },
        "sampling": "halton",
    })
}

pub fn analysis_json(file: &ProblemFile, r: &AnalysisReport) -> Value {
    json!({
        "version": VERSION,
        "problem": problem_json(file),
        "stationarity": {
            "residual": num(r.residual),
            "multiplier": vec_json(&r.multiplier),
            "active": r.active,
            "multiplier_vertices": mat_json(&r.multiplier_vertices),
            "multiplier_rays": mat_json(&r.multiplier_rays),
        },
        "cq": full_cq_json(&r.cq),
        "delta": r.delta.as_ref().map(|d| delta_json(d, &r.spectrum)),
        "second_order": second_order_json(&r.second_order),
        "tilt_bound": opt_num(r.tilt_bound),
        "oracle": match &r.oracle {
            OracleOutcome::Skipped(reason) => json!({ "skipped": reason }),
            OracleOutcome::Ran { report, growth } => {
                let mut o = oracle_json(report);
                o["growth"] = growth.as_ref().map_or(Value::Null, growth_json);
                o
            }
        },
        "consistency": r.consistency.as_ref().map(consistency_json),
        "config": config_json(&r.config, r),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_formatting() {
        let v = json!({"b": [1, 2.5, num(f64::INFINITY)], "a": {"z": null, "y": true}, "c": "q\""});
        assert_eq!(
            to_canonical_string(&v),
            r#"{"a":{"y":true,"z":null},"b":[1,2.5000000000000000e0,"inf"],"c":"q\""}"#
        );
        assert_eq!(to_canonical_string(&num(0.1)), "1.0000000000000001e-1");
    }
}
