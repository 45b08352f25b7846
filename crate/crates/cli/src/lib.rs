//! Command dispatch for the `tiltstab` binary.
//!
//! Exit codes: 0 ok, 1 parse or input error, 2 point not stationary,
//! 3 tilt bound below the empirical modulus, 4 oracle found a multivalued
//! tilt.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use tiltstab_core::analysis::{analyze, AnalysisConfig, AnalysisReport, OracleOutcome, PipelineError};
use tiltstab_core::oracle::{verify_tilt_stability, OracleConfig, OracleReport};
use tiltstab_core::problem_file::ProblemFile;
use tiltstab_core::report::{
    analysis_json, cq_json, num, oracle_json, problem_json, to_canonical_string, VERSION,
};
use tiltstab_core::stability::{
    check_crcq, check_licq, check_mfcq, estimate_bepp, estimate_mscq, AnalysisError,
    ConditionReport, MAX_CRCQ_ACTIVE,
};
use tiltstab_core::{NlpError, Problem};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_STATIONARY: i32 = 2;
pub const EXIT_INCONSISTENT: i32 = 3;
pub const EXIT_MULTIVALUED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "tiltstab", version, about = "Tilt-stability analysis of NLP stationary points")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full pipeline: CQ probes, second-order conditions, tilt bound, oracle.
    Analyze(AnalyzeArgs),
    /// Brute-force oracle only.
    Oracle(OracleArgs),
    /// Selected constraint-qualification probes.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub file: PathBuf,
    /// Ball factor γ for the multiplier subset (default 1.5·κ̂ from MSCQ).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Neighborhood radius η of the RUSOSC probe.
    #[arg(long, default_value_t = 1e-2)]
    pub eta: f64,
    /// Modulus κ tested by the pointbased conditions (default 1.05·bound).
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Sampling radius of the MSCQ probe.
    #[arg(long, default_value_t = 0.1)]
    pub radius: f64,
    /// Critical-cone directions used to build the multiplier subset.
    #[arg(long, default_value_t = 500)]
    pub dirs: usize,
    /// Write the canonical JSON report here (`-` for standard output).
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Skip the brute-force oracle.
    #[arg(long)]
    pub no_oracle: bool,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    pub file: PathBuf,
    /// Radius of the ball around the point.
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
    /// Largest tilt norm ρ.
    #[arg(long, default_value_t = 0.05)]
    pub tilt_radius: f64,
    /// Grid points per axis (rounded up to odd).
    #[arg(long, default_value_t = 65)]
    pub grid: usize,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub file: PathBuf,
    /// Comma-separated probes among licq, mfcq, crcq, mscq, bepp.
    #[arg(long, default_value = "licq,mfcq,crcq,mscq,bepp")]
    pub cq: String,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

/// Result of one command: canonical JSON, human summary, exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub json: Value,
    pub summary: String,
    pub code: i32,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Parse(#[from] tiltstab_core::ParseError),
    #[error("unknown constraint qualification `{0}` (expected licq, mfcq, crcq, mscq or bepp)")]
    UnknownCq(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Oracle(#[from] tiltstab_core::OracleError),
}

pub fn load(path: &Path) -> Result<(ProblemFile, Problem), CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file = ProblemFile::parse(&text)?;
    let problem = file.to_problem()?;
    Ok((file, problem))
}

pub fn analysis_config(args: &AnalyzeArgs) -> AnalysisConfig {
    AnalysisConfig {
        gamma: args.gamma,
        kappa: args.kappa,
        eta: args.eta,
        mscq_radius: args.radius,
        directions: args.dirs,
        oracle: (!args.no_oracle).then(OracleConfig::default),
        ..AnalysisConfig::default()
    }
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<Outcome, CliError> {
    let (file, problem) = load(&args.file)?;
    match analyze(&problem, &analysis_config(args)) {
        Ok(report) => {
            let multivalued = matches!(
                &report.oracle,
                OracleOutcome::Ran { report, .. } if !report.single_valued
            );
            let code = if report.inconsistent() {
                EXIT_INCONSISTENT
            } else if multivalued {
                EXIT_MULTIVALUED
            } else {
                EXIT_OK
            };
            Ok(Outcome {
                json: analysis_json(&file, &report),
                summary: analysis_summary(&file, &report),
                code,
            })
        }
        Err(PipelineError::Analysis(AnalysisError::NotStationary { residual })) => {
            Ok(not_stationary(&file, residual, None))
        }
        Err(PipelineError::Analysis(AnalysisError::Nlp(NlpError::InfeasiblePoint {
            max_violation,
        }))) => Ok(not_stationary(&file, f64::NAN, Some(max_violation))),
        Err(e) => Err(e.into()),
    }
}

fn not_stationary(file: &ProblemFile, residual: f64, violation: Option<f64>) -> Outcome {
    let summary = match violation {
        Some(v) => format!("point is infeasible (max violation {v:e})\n"),
        None => format!("point is not stationary (residual {residual:e})\n"),
    };
    Outcome {
        json: json!({
            "version": VERSION,
            "problem": problem_json(file),
            "stationarity": {
                "residual": num(residual),
                "stationary": false,
                "max_violation": violation.map(num),
            },
        }),
        summary,
        code: EXIT_NOT_STATIONARY,
    }
}

pub fn oracle_config(args: &OracleArgs) -> OracleConfig {
    OracleConfig {
        gamma: args.gamma,
        tilt_radius: args.tilt_radius,
        resolution: args.grid,
        ..OracleConfig::default()
    }
}

pub fn cmd_oracle(args: &OracleArgs) -> Result<Outcome, CliError> {
    let (file, problem) = load(&args.file)?;
    let report = verify_tilt_stability(&problem, &oracle_config(args))?;
    let code = if report.single_valued { EXIT_OK } else { EXIT_MULTIVALUED };
    let mut summary = String::new();
    oracle_summary(&mut summary, &report);
    let mut json = oracle_json(&report);
    json["problem"] = problem_json(&file);
    json["version"] = json!(VERSION);
    Ok(Outcome {
        json,
        summary,
        code,
    })
}

pub const CQ_NAMES: [&str; 5] = ["licq", "mfcq", "crcq", "mscq", "bepp"];

pub fn parse_cq_list(list: &str) -> Result<Vec<&'static str>, CliError> {
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let lower = name.to_ascii_lowercase();
        let known = CQ_NAMES
            .iter()
            .find(|&&c| c == lower)
            .ok_or_else(|| CliError::UnknownCq(name.to_string()))?;
        if !out.contains(known) {
            out.push(*known);
        }
    }
    Ok(out)
}

pub fn cmd_check(args: &CheckArgs) -> Result<Outcome, CliError> {
    let names = parse_cq_list(&args.cq)?;
    let (file, problem) = load(&args.file)?;
    let cfg = AnalysisConfig::default();
    let ev = problem.evaluate(problem.point()).map_err(AnalysisError::from)?;
    let wants = |n: &str| names.contains(&n);
    let licq = wants("licq").then(|| check_licq(&ev)).transpose()?;
    let mfcq = wants("mfcq").then(|| check_mfcq(&ev)).transpose()?;
    let crcq = (wants("crcq") && ev.active.len() <= MAX_CRCQ_ACTIVE)
        .then(|| check_crcq(&problem, &ev, cfg.crcq_radius, cfg.crcq_samples))
        .transpose()?;
    let mscq = wants("mscq")
        .then(|| estimate_mscq(&problem, cfg.mscq_radius, cfg.mscq_samples))
        .transpose()?;
    let bepp = wants("bepp")
        .then(|| estimate_bepp(&problem, cfg.bepp_radius, cfg.bepp_points, cfg.bepp_directions))
        .transpose()?;
    let mut cq = cq_json(
        licq.as_ref(),
        mfcq.as_ref(),
        crcq.as_ref(),
        mscq.as_ref(),
        bepp.as_ref(),
    );
    if wants("crcq") && crcq.is_none() {
        cq["crcq"] = json!({ "verdict": "NotApplicable", "reason": "active set too large" });
    }
    let mut summary = String::new();
    for n in &names {
        let _ = writeln!(summary, "{n}: {}", cq_line(&cq[*n]));
    }
    Ok(Outcome {
        json: json!({ "version": VERSION, "problem": problem_json(&file), "cq": cq }),
        summary,
        code: EXIT_OK,
    })
}

fn cq_line(v: &Value) -> String {
    let verdict = v["verdict"].as_str().unwrap_or("");
    let khat = &v["kappa_hat"];
    match (verdict, khat) {
        ("", k) => format!(
            "kappa_hat = {} ({})",
            fmt_value(k),
            if v["diverging"] == json!(true) { "diverging" } else { "bounded" }
        ),
        (vd, Value::Null) => vd.to_string(),
        (vd, k) => format!("{vd} (kappa_hat = {})", fmt_value(k)),
    }
}

fn fmt_value(v: &Value) -> String {
    match v {
        Value::Number(n) => fmt_f(n.as_f64().unwrap_or(f64::NAN)),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn fmt_f(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.6}")
    } else {
        format!("{x}")
    }
}

fn condition_line(c: &ConditionReport) -> String {
    let mut s = c.verdict.as_str().to_string();
    let mut extra = Vec::new();
    if let Some(q) = &c.qualifier {
        extra.push(q.clone());
    }
    if let Some(r) = &c.reason {
        extra.push(format!("reason: {r}"));
    }
    if let Some(m) = c.min_form {
        extra.push(format!("min form {}", fmt_f(m)));
    }
    if let Some(k) = c.modulus {
        extra.push(format!("modulus {}", fmt_f(k)));
    }
    if !extra.is_empty() {
        s.push_str(&format!(" ({})", extra.join(", ")));
    }
    s
}

fn oracle_summary(s: &mut String, r: &OracleReport) {
    let _ = writeln!(
        s,
        "oracle: {} over {} tilts on {} grid points",
        if r.single_valued { "single-valued" } else { "multivalued" },
        r.tilts.len(),
        r.grid_points
    );
    if let Some(l) = r.lipschitz {
        let _ = writeln!(s, "empirical modulus: {}", fmt_f(l));
    }
    if !r.xbar_in_m0 {
        let _ = writeln!(s, "point is not the minimizer of the untilted problem");
    }
    for w in &r.witnesses {
        if let tiltstab_core::oracle::OracleWitness::MultiValued { v, points } = w {
            let _ = writeln!(s, "multivalued at v = {v:?}: {points:?}");
            break;
        }
    }
}

pub fn analysis_summary(file: &ProblemFile, r: &AnalysisReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "problem: {} variables, {} constraints, point {:?}",
        file.vars.len(),
        file.constraints.len(),
        file.point
    );
    let _ = writeln!(s, "stationarity residual: {:e}", r.residual);
    let cq = &r.cq;
    let _ = writeln!(s, "licq: {}", if cq.licq.holds { "Holds" } else { "Fails" });
    let _ = writeln!(s, "mfcq: {}", if cq.mfcq.holds { "Holds" } else { "Fails" });
    let _ = writeln!(
        s,
        "crcq: {}",
        match &cq.crcq {
            Some(c) if c.holds_on_samples => "HoldsOnSamples",
            Some(_) => "FailsWithWitness",
            None => "NotApplicable",
        }
    );
    let _ = writeln!(
        s,
        "mscq: kappa_hat = {} ({})",
        fmt_f(cq.mscq.kappa_hat),
        if cq.mscq.diverging { "diverging" } else { "bounded" }
    );
    let _ = writeln!(
        s,
        "bepp: {} (kappa_hat = {})",
        if cq.bepp.bounded_on_samples { "HoldsOnSamples" } else { "FailsWithWitness" },
        fmt_f(cq.bepp.kappa_hat)
    );
    let _ = writeln!(s, "gamma: {} ({})", fmt_f(r.gamma), r.gamma_source);
    let so = &r.second_order;
    let _ = writeln!(s, "ssosc: {}", condition_line(&so.ssosc));
    let _ = writeln!(s, "pointbased (kappa = {}): {}", fmt_f(r.kappa), condition_line(&so.pointbased));
    let _ = writeln!(s, "kappa-free: {}", condition_line(&so.kappa_free));
    let _ = writeln!(s, "extreme-point: {}", condition_line(&so.extreme_point));
    match &so.rusosc {
        Some(ru) => {
            let _ = writeln!(
                s,
                "rusosc (ell = {}, eta = {}): {}",
                fmt_f(ru.config.ell),
                ru.config.eta,
                if ru.witness.is_some() { "FailsWithWitness" } else { "HoldsOnSamples" }
            );
        }
        None => {
            let _ = writeln!(s, "rusosc: NotApplicable (reason: mscq)");
        }
    }
    match r.tilt_bound {
        Some(b) => {
            let _ = writeln!(s, "tilt bound: {}", fmt_f(b));
        }
        None => {
            let _ = writeln!(s, "tilt bound: unavailable");
        }
    }
    match &r.oracle {
        OracleOutcome::Skipped(why) => {
            let _ = writeln!(s, "oracle: skipped ({why})");
        }
        OracleOutcome::Ran { report, growth } => {
            oracle_summary(&mut s, report);
            if let Some(g) = growth {
                let _ = writeln!(
                    s,
                    "growth at kappa = {}: {}",
                    fmt_f(g.kappa),
                    if g.holds { "Holds" } else { "Fails" }
                );
            }
        }
    }
    if let Some(c) = &r.consistency {
        let _ = writeln!(s, "consistency: {}", if c.pass { "pass" } else { "FAIL" });
    }
    s
}

fn emit(path: &Option<PathBuf>, json: &Value, out: &mut dyn Write) -> Result<(), CliError> {
    let Some(path) = path else {
        return Ok(());
    };
    let mut text = to_canonical_string(json);
    text.push('\n');
    if path.as_os_str() == "-" {
        let _ = out.write_all(text.as_bytes());
        return Ok(());
    }
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            if e.use_stderr() {
                let _ = write!(err, "{e}");
            } else {
                let _ = write!(out, "{e}");
            }
            return code;
        }
    };
    let (result, json_path) = match &cli.command {
        Command::Analyze(a) => (cmd_analyze(a), &a.json),
        Command::Oracle(a) => (cmd_oracle(a), &a.json),
        Command::Check(a) => (cmd_check(a), &a.json),
    };
    match result {
        Ok(o) => {
            let _ = out.write_all(o.summary.as_bytes());
            if let Err(e) = emit(json_path, &o.json, out) {
                let _ = writeln!(err, "error: {e}");
                return EXIT_INPUT;
            }
            o.code
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT
        }
    }
}
