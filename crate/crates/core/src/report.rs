//! Replayable runs: a [`Plan`] names a command with its full parameter set,
//! [`execute`] turns it into JSON-lines records plus CSV tables, and a
//! [`RunManifest`] stores the plan with a digest of everything it produced.

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::analytics::{log_moment_iterated, MomentSpec, MAX_LOG};
use crate::densities::DensityEvaluator;
use crate::error::{Error, Result};
use crate::identities::{
    cdf_identity_check, default_cases, moment_check, run_identity, IdentityReport, IdentityTag, MIN_SAMPLES,
};
use crate::model::{Hurst, ProcessModel};
use crate::numerics::Grid1D;
use crate::parallel::with_threads;
use crate::pdecheck::{lookup, strong_residual, weak_delta_residual, EquationTag, PdeResidualReport, TestFunction};
use crate::sampling::{sample_many, RngState};

pub const SCHEMA_VERSION: u32 = 1;

/// Largest CDF deviation accepted by the reciprocal CDF-quadrature check.
pub const CDF_IDENTITY_TOL: f64 = 1e-8;

/// Weak-form defect bound for delta-forced equations.
pub const WEAK_TOL: f64 = 1e-5;

/// Highest half-order `k` whose moment is also estimated by Monte Carlo;
/// sample means of `X^{2k}` beyond this are dominated by rare draws.
pub const MC_MAX_K: u32 = 4;

/// Outcome of one check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
    /// Value computed with nothing to compare it against.
    Computed,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Inconclusive => "inconclusive",
            Outcome::Computed => "computed",
        }
    }

    fn from_bool(pass: bool) -> Self {
        if pass {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }
}

/// One JSON-lines report object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub schema_version: u32,
    /// `pde`, `identity`, `identity_control`, `cdf_identity`, `moment`, `density` or `sample`.
    pub kind: String,
    pub tag: String,
    pub params: Value,
    pub verdict: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rel_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_statistic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    pub seeds: Vec<RngState>,
    /// Check-specific numbers.
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub details: Value,
    pub runtime_ms: u64,
}

impl ReportRecord {
    fn new(kind: &str, tag: String, params: Value, verdict: Outcome) -> Self {
        ReportRecord {
            schema_version: SCHEMA_VERSION,
            kind: kind.to_string(),
            tag,
            params,
            verdict,
            max_rel_residual: None,
            ks_statistic: None,
            p_value: None,
            seeds: Vec::new(),
            details: Value::Null,
            runtime_ms: 0,
        }
    }
}

/// A CSV file produced by a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub contents: String,
}

/// Everything a run reports.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOutput {
    pub records: Vec<ReportRecord>,
    pub tables: Vec<Table>,
}

impl RunOutput {
    /// Records as JSON lines, one object per line.
    pub fn jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("records serialize"));
            s.push('\n');
        }
        s
    }

    /// SHA-256 over every record (with timings zeroed) and every table.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for r in &self.records {
            let mut r = r.clone();
            r.runtime_ms = 0;
            h.update(serde_json::to_string(&r).expect("records serialize").as_bytes());
            h.update(b"\n");
        }
        for t in &self.tables {
            h.update(t.name.as_bytes());
            h.update(b"\n");
            h.update(t.contents.as_bytes());
        }
        hex::encode(h.finalize())
    }

    /// 1 if any check failed, else 2 if any was inconclusive, else 0.
    pub fn exit_code(&self) -> i32 {
        if self.records.iter().any(|r| r.verdict == Outcome::Fail) {
            1
        } else if self.records.iter().any(|r| r.verdict == Outcome::Inconclusive) {
            2
        } else {
            0
        }
    }

    pub fn verdicts(&self) -> Vec<CheckVerdict> {
        self.records
            .iter()
            .map(|r| CheckVerdict {
                kind: r.kind.clone(),
                tag: r.tag.clone(),
                verdict: r.verdict,
            })
            .collect()
    }

    pub fn seeds(&self) -> Vec<RngState> {
        let mut seeds: Vec<RngState> = Vec::new();
        for s in self.records.iter().flat_map(|r| r.seeds.iter()) {
            if !seeds.contains(s) {
                seeds.push(*s);
            }
        }
        seeds
    }
}

/// Inclusive range `a:b:step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub start: f64,
    pub end: f64,
    pub step: f64,
}

impl Range {
    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::from_range(self.start, self.end, self.step)
    }
}

impl std::str::FromStr for Range {
    type Err = Error;

    /// `a:b:step`, or a single value.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("expected a:b:step or a number, got '{s}'"));
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let r = match parts[..] {
            [x] => Range {
                start: x,
                end: x,
                step: 1.0,
            },
            [a, b, step] => Range { start: a, end: b, step },
            _ => return Err(bad()),
        };
        if !r.start.is_finite() || !r.end.is_finite() || !(r.step > 0.0) || r.end < r.start {
            return Err(bad());
        }
        Ok(r)
    }
}

/// A command with its complete parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Plan {
    VerifyPde {
        tags: Vec<EquationTag>,
        #[serde(default)]
        tol: Option<f64>,
        #[serde(default)]
        grid: Option<Range>,
    },
    VerifyIdentities {
        samples: usize,
        seed: u64,
        negative_control: bool,
    },
    Density {
        model: ProcessModel,
        t: Vec<f64>,
        x: Range,
    },
    Sample {
        model: ProcessModel,
        t: f64,
        n: usize,
        seed: u64,
    },
    Moments {
        hursts: Vec<Hurst>,
        k: Vec<u32>,
        t: f64,
        samples: usize,
        seed: u64,
    },
}

impl Plan {
    pub fn command(&self) -> &'static str {
        match self {
            Plan::VerifyPde { .. } => "verify-pde",
            Plan::VerifyIdentities { .. } => "verify-identities",
            Plan::Density { .. } => "density",
            Plan::Sample { .. } => "sample",
            Plan::Moments { .. } => "moments",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match self {
            Plan::VerifyPde { tags, tol, .. } => {
                if tags.is_empty() {
                    return Err(Error::InvalidParameter("no equations selected".into()));
                }
                if let Some(tol) = tol {
                    positive("tolerance", *tol)?;
                }
            }
            Plan::VerifyIdentities { samples, .. } => {
                if *samples < MIN_SAMPLES {
                    return Err(Error::InvalidParameter(format!(
                        "{samples} samples is below the minimum of {MIN_SAMPLES}"
                    )));
                }
            }
            Plan::Density { t, .. } => {
                if t.is_empty() {
                    return Err(Error::InvalidParameter("no times given".into()));
                }
                for &t in t {
                    positive("t", t)?;
                }
            }
            Plan::Sample { t, n, .. } => {
                positive("t", *t)?;
                if *n == 0 {
                    return Err(Error::InvalidParameter("sample count must be positive".into()));
                }
            }
            Plan::Moments { hursts, k, t, samples, .. } => {
                positive("t", *t)?;
                if hursts.is_empty() || k.is_empty() || k.contains(&0) {
                    return Err(Error::InvalidParameter("moments need a chain and orders k >= 1".into()));
                }
                if *samples < 2 {
                    return Err(Error::InvalidParameter("Monte Carlo needs at least 2 samples".into()));
                }
            }
        }
        Ok(())
    }
}

fn elapsed_ms(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn finish(name: &str, w: csv::Writer<Vec<u8>>) -> Result<Table> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidParameter(format!("CSV write failed: {e}")))?;
    Ok(Table {
        name: name.to_string(),
        contents: String::from_utf8(bytes).expect("CSV output is UTF-8"),
    })
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidParameter(format!("CSV write failed: {e}"))
}

/// Numbers are written in shortest round-trip form, so tables are bit-exact.
fn num(v: f64) -> String {
    ryu::Buffer::new().format(v).to_string()
}

fn schema(name: &str) -> String {
    format!("iterlab.{name}/{SCHEMA_VERSION}")
}

fn pde_record(report: &PdeResidualReport, weak: Option<Value>, weak_ok: bool, runtime_ms: u64) -> ReportRecord {
    use crate::pdecheck::Verdict;
    let mut verdict = match report.verdict {
        Verdict::Pass => Outcome::Pass,
        Verdict::Fail => Outcome::Fail,
        Verdict::Inconclusive => Outcome::Inconclusive,
    };
    if verdict == Outcome::Pass && !weak_ok {
        verdict = Outcome::Fail;
    }
    let params = json!({
        "model": report.model.to_string(),
        "tolerance": report.tolerance,
        "x_min": report.grid.x_min,
        "x_max": report.grid.x_max,
        "grid_points": report.grid.points,
        "times": report.grid.times,
    });
    let mut rec = ReportRecord::new("pde", report.tag.to_string(), params, verdict);
    rec.max_rel_residual = Some(report.max_rel_residual);
    rec.details = json!({
        "max_abs_residual": report.max_abs_residual,
        "budget": report.budget,
        "evaluated": report.grid.evaluated,
        "skipped": report.grid.skipped,
        "worst": report.worst.as_ref().map(|w| json!({"x": w.x, "t": w.t, "rel": w.rel})),
        "term_magnitudes": report.term_magnitudes.iter().map(|m| json!({"label": m.label, "max_abs": m.max_abs})).collect::<Vec<_>>(),
        "weak_form": weak,
    });
    rec.runtime_ms = runtime_ms;
    rec
}

fn run_pde(tags: &[EquationTag], tol: Option<f64>, grid: Option<Range>) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    let mut w = csv_writer();
    w.write_record(["tag", "x", "t", "residual", "rel", "budget", "schema"])
        .map_err(csv_err)?;
    let schema = schema("pde_points");
    for &tag in tags {
        let start = Instant::now();
        let mut spec = lookup(tag);
        if let Some(tol) = tol {
            spec = spec.with_tolerance(tol);
        }
        if let Some(g) = grid {
            let radius = spec.grid.excluded_radius;
            spec = spec.with_grid(g.grid()?.with_excluded_radius(radius));
        }
        spec.validate()?;
        let report = strong_residual(&spec, &crate::pdecheck::time_diff())?;
        let (weak, weak_ok) = if tag.has_delta() {
            let phi = TestFunction::gaussian();
            let full = weak_delta_residual(&spec, &phi, 1.0, 1.0)?;
            let halved = weak_delta_residual(&spec, &phi, 1.0, 0.5)?;
            let ok = full.defect.abs() <= WEAK_TOL && halved.defect.abs() >= 10.0 * full.defect.abs();
            (
                Some(json!({
                    "t": 1.0,
                    "defect": full.defect,
                    "halved_delta_defect": halved.defect,
                    "pass": ok,
                })),
                ok,
            )
        } else {
            (None, true)
        };
        for p in &report.points {
            w.write_record([
                tag.to_string(),
                num(p.x),
                num(p.t),
                num(p.residual),
                num(p.rel),
                num(p.budget),
                schema.clone(),
            ])
            .map_err(csv_err)?;
        }
        out.records.push(pde_record(&report, weak, weak_ok, elapsed_ms(start)));
    }
    out.tables.push(finish("pde_points.csv", w)?);
    Ok(out)
}

fn identity_record(report: &IdentityReport, control: bool, runtime_ms: u64) -> ReportRecord {
    let case = &report.case;
    let params = json!({
        "t": case.t,
        "samples": case.n_samples,
        "negative_control": control,
    });
    // a control passes when the perturbed identity is rejected
    let verdict = Outcome::from_bool(report.pass != control);
    let kind = if control { "identity_control" } else { "identity" };
    let mut rec = ReportRecord::new(kind, case.tag.to_string(), params, verdict);
    if let Some(w) = report.worst() {
        rec.ks_statistic = Some(w.ks.statistic);
        rec.p_value = Some(w.ks.p_value);
    }
    rec.seeds = vec![case.seeds.0, case.seeds.1];
    rec.details = json!({
        "identity_holds": report.pass,
        "redraws": report.redraws,
        "comparisons": report.comparisons.iter().map(|c| json!({
            "left": c.left, "right": c.right,
            "ks_statistic": c.ks.statistic, "p_value": c.ks.p_value,
        })).collect::<Vec<_>>(),
        "moments": report.moments,
    });
    rec.runtime_ms = runtime_ms;
    rec
}

fn run_identities(samples: usize, seed: u64, negative_control: bool) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    for case in default_cases(seed, samples) {
        let start = Instant::now();
        let report = run_identity(&case)?;
        out.records.push(identity_record(&report, false, elapsed_ms(start)));
        if case.tag == IdentityTag::CcReciprocal {
            let start = Instant::now();
            let cdf = cdf_identity_check(case.t)?;
            let mut rec = ReportRecord::new(
                "cdf_identity",
                case.tag.to_string(),
                json!({"t": cdf.t, "points": cdf.points}),
                Outcome::from_bool(cdf.max_deviation <= CDF_IDENTITY_TOL),
            );
            rec.details = json!({"max_deviation": cdf.max_deviation, "worst_w": cdf.worst_w, "tolerance": CDF_IDENTITY_TOL});
            rec.runtime_ms = elapsed_ms(start);
            out.records.push(rec);
        }
        if negative_control {
            let start = Instant::now();
            let report = run_identity(&case.negative_control())?;
            out.records.push(identity_record(&report, true, elapsed_ms(start)));
        }
    }
    Ok(out)
}

fn run_density(model: &ProcessModel, times: &[f64], x: Range) -> Result<RunOutput> {
    let start = Instant::now();
    let ev = DensityEvaluator::new(model.clone())?;
    let grid = x.grid()?;
    let mut w = csv_writer();
    w.write_record(["x", "t", "density", "err_estimate", "singular", "schema"])
        .map_err(csv_err)?;
    let schema = schema("density");
    let mut singular = 0usize;
    for &t in times {
        for &x in grid.points() {
            let (d, e, s) = match ev.density(x, t) {
                Ok(v) if v.value.is_finite() => (num(v.value), num(v.error), "0"),
                Ok(_) | Err(Error::SingularPoint { .. }) => {
                    singular += 1;
                    (String::new(), String::new(), "1")
                }
                Err(e) => return Err(e),
            };
            w.write_record([num(x), num(t), d, e, s.to_string(), schema.clone()])
                .map_err(csv_err)?;
        }
    }
    let mut rec = ReportRecord::new(
        "density",
        model.to_string(),
        json!({"t": times, "x": x}),
        Outcome::Computed,
    );
    rec.details = json!({"points": grid.len() * times.len(), "singular": singular});
    rec.runtime_ms = elapsed_ms(start);
    Ok(RunOutput {
        records: vec![rec],
        tables: vec![finish("density.csv", w)?],
    })
}

/// Stream used by the `sample` and `moments` commands.
pub fn command_stream(seed: u64) -> RngState {
    RngState::new(seed, 0)
}

fn run_sample(model: &ProcessModel, t: f64, n: usize, seed: u64) -> Result<RunOutput> {
    let start = Instant::now();
    let state = command_stream(seed);
    let s = sample_many(model, t, state, n)?;
    let mut w = csv_writer();
    w.write_record(["index", "value", "schema"]).map_err(csv_err)?;
    let schema = schema("sample");
    for (i, v) in s.values.iter().enumerate() {
        w.write_record([i.to_string(), num(*v), schema.clone()])
            .map_err(csv_err)?;
    }
    let mut rec = ReportRecord::new(
        "sample",
        model.to_string(),
        json!({"t": t, "n": n, "seed": seed}),
        Outcome::Computed,
    );
    rec.seeds = vec![state];
    rec.details = json!({"redraws": s.redraws});
    rec.runtime_ms = elapsed_ms(start);
    Ok(RunOutput {
        records: vec![rec],
        tables: vec![finish("samples.csv", w)?],
    })
}

/// The chain `B_{H1}(|B_{H2}(...)|)` as a process model.
pub fn chain_model(hursts: &[Hurst]) -> Result<ProcessModel> {
    Ok(match hursts {
        [] => return Err(Error::InvalidParameter("empty chain".into())),
        [h] => ProcessModel::FBm { h: *h },
        [outer, inner] => ProcessModel::IteratedFBm {
            outer: *outer,
            inner: *inner,
        },
        hs => ProcessModel::IteratedFBmChain { hursts: hs.to_vec() },
    })
}

fn fmt_chain(hursts: &[Hurst]) -> String {
    hursts.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(",")
}

fn run_moments(hursts: &[Hurst], ks: &[u32], t: f64, samples: usize, seed: u64) -> Result<RunOutput> {
    let model = chain_model(hursts)?;
    let state = command_stream(seed);
    let need_mc = ks.iter().any(|&k| k <= MC_MAX_K);
    let draws = if need_mc {
        Some(sample_many(&model, t, state, samples)?.values)
    } else {
        None
    };
    let mut out = RunOutput::default();
    let mut w = csv_writer();
    w.write_record([
        "k", "log_closed_form", "closed_form", "mc_estimate", "std_error", "z", "verdict", "schema",
    ])
    .map_err(csv_err)?;
    let schema = schema("moments");
    for &k in ks {
        let start = Instant::now();
        let spec = MomentSpec::new(k, hursts.to_vec())?;
        let log = log_moment_iterated(&spec, t)?;
        let exact = (log <= MAX_LOG).then(|| log.exp());
        let check = match (&draws, exact) {
            (Some(v), Some(e)) if k <= MC_MAX_K => Some(moment_check(&model.to_string(), v, k, e)),
            _ => None,
        };
        let verdict = check.as_ref().map_or(Outcome::Computed, |c| Outcome::from_bool(c.pass));
        let mut rec = ReportRecord::new(
            "moment",
            format!("E X^{}", 2 * k),
            json!({"chain": fmt_chain(hursts), "k": k, "t": t, "samples": samples}),
            verdict,
        );
        if check.is_some() {
            rec.seeds = vec![state];
        }
        rec.details = json!({
            "log_closed_form": log,
            "closed_form": exact,
            "mc_estimate": check.as_ref().map(|c| c.estimate),
            "std_error": check.as_ref().map(|c| c.std_error),
            "z": check.as_ref().map(|c| c.z),
        });
        let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
        w.write_record([
            k.to_string(),
            num(log),
            opt(exact),
            opt(check.as_ref().map(|c| c.estimate)),
            opt(check.as_ref().map(|c| c.std_error)),
            opt(check.as_ref().map(|c| c.z)),
            verdict.as_str().to_string(),
            schema.clone(),
        ])
        .map_err(csv_err)?;
        rec.runtime_ms = elapsed_ms(start);
        out.records.push(rec);
    }
    out.tables.push(finish("moments.csv", w)?);
    Ok(out)
}

/// Runs a plan on the current worker pool.
pub fn execute(plan: &Plan) -> Result<RunOutput> {
    plan.validate()?;
    match plan {
        Plan::VerifyPde { tags, tol, grid } => run_pde(tags, *tol, *grid),
        Plan::VerifyIdentities {
            samples,
            seed,
            negative_control,
        } => run_identities(*samples, *seed, *negative_control),
        Plan::Density { model, t, x } => run_density(model, t, *x),
        Plan::Sample { model, t, n, seed } => run_sample(model, *t, *n, *seed),
        Plan::Moments {
            hursts,
            k,
            t,
            samples,
            seed,
        } => run_moments(hursts, k, *t, *samples, *seed),
    }
}

/// Runs a plan on a pool of `threads` workers.
pub fn execute_with_threads(plan: &Plan, threads: usize) -> Result<RunOutput> {
    with_threads(threads, || execute(plan))?
}

/// Verdict of one reported check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckVerdict {
    pub kind: String,
    pub tag: String,
    pub verdict: Outcome,
}

/// Record of a run, sufficient to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub plan: Plan,
    pub seeds: Vec<RngState>,
    pub tool_version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub threads: usize,
    pub verdicts: Vec<CheckVerdict>,
    /// [`RunOutput::digest`] of the run.
    pub digest: String,
}

impl RunManifest {
    pub fn new(plan: &Plan, output: &RunOutput, threads: usize) -> Self {
        RunManifest {
            schema_version: SCHEMA_VERSION,
            command: plan.command().to_string(),
            plan: plan.clone(),
            seeds: output.seeds(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            threads,
            verdicts: output.verdicts(),
            digest: output.digest(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: RunManifest =
            serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("bad manifest: {e}")))?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidParameter(format!(
                "manifest schema {} is not supported (expected {SCHEMA_VERSION})",
                m.schema_version
            )));
        }
        Ok(m)
    }
}

/// Result of re-running a manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct RerunOutcome {
    pub output: RunOutput,
    pub digest: String,
    /// Digest and verdicts both match the manifest.
    pub reproduced: bool,
}

/// Re-executes the plan stored in a manifest and compares digests.
pub fn rerun(manifest: &RunManifest, threads: usize) -> Result<RerunOutcome> {
    let output = execute_with_threads(&manifest.plan, threads)?;
    let digest = output.digest();
    let reproduced = digest == manifest.digest && output.verdicts() == manifest.verdicts;
    Ok(RerunOutcome {
        output,
        digest,
        reproduced,
    })
}
