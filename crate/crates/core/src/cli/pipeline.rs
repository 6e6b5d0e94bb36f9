//! `verify-all`: shadow decay, uniform shadow decay, horofunction moments,
//! progress moments, iterated decay and full decay, in that order. The
//! first failing stage stops the run and every later stage is skipped.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::json;

use super::config::RunConfig;
use super::CliError;
use crate::estimators::{
    certify_uniform_shadow, estimate_decay_curve, estimate_horofn_mgf, estimate_progress_mgf, estimate_shadow_decay,
    witness_constant, DecayCurve,
};
use crate::verifier::{check_mgf_estimate, full_walk_constant};

const DEFAULT_SHADOW_LEVEL: f64 = 0.05;
const DEFAULT_UNIFORM_LEVEL: f64 = 0.01;
const DEFAULT_PROGRESS_STEPS: usize = 10;
const DEFAULT_DECAY_GRID: [usize; 4] = [1, 2, 4, 8];

pub const STAGES: [&str; 6] = ["shadow", "uniform_shadow", "horofn_mgf", "progress_mgf", "iterated_decay", "full_decay"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageReport {
    pub stage: String,
    pub status: StageStatus,
    pub summary: String,
    pub witnesses: BTreeMap<String, f64>,
    pub detail: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AllReport {
    pub passed: bool,
    pub failed_stage: Option<String>,
    pub witnesses: BTreeMap<String, f64>,
    pub stages: Vec<StageReport>,
}

struct Stages {
    done: Vec<StageReport>,
}

impl Stages {
    fn record(&mut self, stage: &str, passed: bool, text: String, witnesses: BTreeMap<String, f64>, detail: serde_json::Value) -> bool {
        let status = if passed { StageStatus::Pass } else { StageStatus::Fail };
        self.done.push(StageReport {
            stage: stage.to_string(),
            status,
            summary: format!("{} {stage}: {text}", if passed { "PASS" } else { "FAIL" }),
            witnesses,
            detail,
        });
        passed
    }

    fn finish(mut self) -> AllReport {
        let failed_stage = self.done.iter().find(|s| s.status == StageStatus::Fail).map(|s| s.stage.clone());
        for stage in STAGES.iter().skip(self.done.len()) {
            self.done.push(StageReport {
                stage: stage.to_string(),
                status: StageStatus::Skipped,
                summary: format!("SKIP {stage}: upstream stage failed"),
                witnesses: BTreeMap::new(),
                detail: serde_json::Value::Null,
            });
        }
        let mut witnesses = BTreeMap::new();
        for s in &self.done {
            for (k, v) in &s.witnesses {
                witnesses.insert(format!("{}.{k}", s.stage), *v);
            }
        }
        AllReport { passed: failed_stage.is_none(), failed_stage, witnesses, stages: self.done }
    }
}

fn w(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn req<T: Clone>(value: &Option<T>, field: &str, command: &str) -> Result<T, CliError> {
    RunConfig::require(value, field, command)
}

fn max_of(grid: &[usize]) -> usize {
    grid.iter().copied().max().unwrap_or(0)
}

/// Points where the lower confidence bound exceeds `C e^{−x/C}`.
fn violations(curve: &DecayCurve, c: f64) -> usize {
    curve.points.iter().filter(|p| p.ci_low > c * (-p.x / c).exp()).count()
}

pub fn verify_all(config: &RunConfig) -> Result<AllReport, CliError> {
    let cmd = "verify-all";
    let trials = config.trials(cmd)?;
    let family = req(&config.family, "family", cmd)?;
    let d_grid = req(&config.d_grid, "d_grid", cmd)?;
    let n_grid = req(&config.n_grid, "n_grid", cmd)?;
    let k_grid = req(&config.k_grid, "k_grid", cmd)?;
    let mgf_n_grid = req(&config.mgf_n_grid, "mgf_n_grid", cmd)?;
    let t_grid = req(&config.t_grid, "t_grid", cmd)?;
    let decay_grid = config.decay_n_grid.clone().unwrap_or_else(|| DEFAULT_DECAY_GRID.to_vec());
    let shadow_level = config.shadow_level.unwrap_or(DEFAULT_SHADOW_LEVEL);
    let uniform_level = config.uniform_level.unwrap_or(DEFAULT_UNIFORM_LEVEL);
    let steps = config.progress_steps.unwrap_or(DEFAULT_PROGRESS_STEPS);
    let bin_width = config.bin_width.unwrap_or(1.0);
    for (field, empty) in [
        ("d_grid", d_grid.is_empty()),
        ("n_grid", n_grid.is_empty()),
        ("k_grid", k_grid.is_empty()),
        ("mgf_n_grid", mgf_n_grid.is_empty()),
        ("t_grid", t_grid.is_empty()),
        ("decay_n_grid", decay_grid.is_empty()),
    ] {
        if empty {
            return Err(CliError::config(field, "grid must be nonempty"));
        }
    }
    if t_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(CliError::config("t_grid", "values must be positive"));
    }
    let base = config.walk(cmd, 1)?;
    let mut stages = Stages { done: Vec::new() };

    // shadow decay, forward and reflected
    let walk = base.clone().with_horizon(max_of(&n_grid)).map_err(|e| CliError::config("n_grid", e))?;
    let decay = estimate_shadow_decay(&walk, &family, &d_grid, &n_grid, trials)?;
    let d_max = d_grid[d_grid.len() - 1];
    let fwd = decay.forward.points.last().map_or(f64::NAN, |p| p.ci_high);
    let rev = decay.reflected.points.last().map_or(f64::NAN, |p| p.ci_high);
    let ok = fwd <= shadow_level && rev <= shadow_level;
    let text = format!("at d = {d_max} upper bounds forward {fwd:.6}, reflected {rev:.6} against level {shadow_level}");
    if !stages.record("shadow", ok, text, w(&[("d", d_max), ("forward", fwd), ("reflected", rev)]), json!(decay)) {
        return Ok(stages.finish());
    }

    // uniform shadow decay
    let walk = base.clone().with_horizon(max_of(&k_grid)).map_err(|e| CliError::config("k_grid", e))?;
    let Some(cert) = certify_uniform_shadow(&walk, &family, &d_grid, &k_grid, trials, uniform_level)? else {
        let text = format!("no (d, k) on the grid reaches level {uniform_level}");
        stages.record("uniform_shadow", false, text, BTreeMap::new(), serde_json::Value::Null);
        return Ok(stages.finish());
    };
    let (d, k) = (cert.d, cert.k);
    let text = format!("certified d = {d}, k = {k}, upper bound {:.6} ≤ {uniform_level}", cert.report.ci_high);
    stages.record(
        "uniform_shadow",
        true,
        text,
        w(&[("d", d), ("k", k as f64), ("level", cert.report.ci_high)]),
        json!(cert),
    );

    // horofunction moments
    let mgf_grid: Vec<usize> = mgf_n_grid.iter().copied().filter(|&n| n >= k).collect();
    if mgf_grid.is_empty() {
        let text = format!("no value of mgf_n_grid is at least k = {k}");
        stages.record("horofn_mgf", false, text, BTreeMap::new(), serde_json::Value::Null);
        return Ok(stages.finish());
    }
    let walk = base.clone().with_horizon(max_of(&mgf_grid)).map_err(|e| CliError::config("mgf_n_grid", e))?;
    let (check, checks) = check_mgf_estimate(&walk, &family, k, &mgf_grid, d, &t_grid, trials, Some(&cert))?;
    let Some(n0) = check.witnesses.get("n0").map(|&n| n as usize).filter(|_| check.passed) else {
        let text = format!("{}; no n with negative derivative or a bound failed", check.summary());
        stages.record("horofn_mgf", false, text, check.witnesses.clone(), json!({ "check": check, "per_n": checks }));
        return Ok(stages.finish());
    };
    let walk = base.clone().with_horizon(n0).map_err(|e| CliError::config("mgf_n_grid", e))?;
    let curve = estimate_horofn_mgf(&walk, &family, n0, &t_grid, trials)?;
    let best = curve
        .points
        .iter()
        .filter(|p| p.x > 0.0)
        .min_by(|a, b| a.ci_high.total_cmp(&b.ci_high))
        .copied()
        .expect("t grid is nonempty");
    let ok = best.ci_high < 1.0;
    let text = format!("n0 = {n0}, t = {}, sup over family {:.6} with upper bound {:.6}", best.x, best.estimate, best.ci_high);
    let witnesses = w(&[("n0", n0 as f64), ("t", best.x), ("value", best.estimate), ("value_upper", best.ci_high)]);
    if !stages.record("horofn_mgf", ok, text, witnesses, json!({ "check": check, "per_n": checks, "curve": curve })) {
        return Ok(stages.finish());
    }

    // progress moments of the n0-iterated walk
    let (a, b) = (n0, best.x);
    let walk = base.clone().with_horizon(a * steps).map_err(|e| CliError::config("progress_steps", e))?;
    let (progress, bins) = estimate_progress_mgf(&walk, a, b, trials, bin_width)?;
    let ok = progress.ci_high < 1.0;
    let c = -progress.ci_high.ln();
    let text = format!("a = {a}, b = {b}, sup over bins {:.6} with upper bound {:.6}, c = {c:.6}", progress.estimate, progress.ci_high);
    let witnesses = w(&[("a", a as f64), ("b", b), ("epsilon", 1.0 - progress.ci_high), ("c", c)]);
    let bins_used = bins.iter().filter(|b| b.reliable).count();
    if !stages.record("progress_mgf", ok, text, witnesses, json!({ "report": progress, "bins_used": bins_used })) {
        return Ok(stages.finish());
    }

    // iterated decay: P(Z_j ≤ cj/2b) ≤ e^{−cj/2} with Z_0 = 0
    let c_iter = (2.0 * b / c).max(2.0 / c).max(1.0);
    let walk = base
        .clone()
        .with_horizon(a * max_of(&decay_grid))
        .and_then(|cfg| cfg.with_iteration(a))
        .map_err(|e| CliError::config("decay_n_grid", e))?;
    let curve = estimate_decay_curve(&walk, c_iter, &decay_grid, trials)?;
    let bad = violations(&curve, c_iter);
    let empirical = witness_constant(&curve.points.iter().map(|p| (p.x, p.ci_high)).collect::<Vec<_>>());
    let text = format!("C = {c_iter:.6} from the progress constant, {bad} of {} points exceed the bound", curve.points.len());
    let mut witnesses = w(&[("c_iter", c_iter), ("a", a as f64)]);
    if let Some(e) = empirical {
        witnesses.insert("c_iter_empirical".into(), e);
    }
    if !stages.record("iterated_decay", bad == 0, text, witnesses, json!(curve)) {
        return Ok(stages.finish());
    }

    // full decay from the iterated constant and the tail certificate
    let lambda = config.lambda.unwrap_or(1.0 / a as f64);
    let tail = base.mu.tail_certificate(&base.model, lambda).map_err(|e| CliError::config("lambda", e))?;
    let c_full = full_walk_constant(c_iter, a, lambda, tail);
    let full_grid: Vec<usize> = decay_grid.iter().map(|&i| a * i).collect();
    let walk = base.clone().with_horizon(max_of(&full_grid)).map_err(|e| CliError::config("decay_n_grid", e))?;
    let curve = estimate_decay_curve(&walk, c_full, &full_grid, trials)?;
    let bad = violations(&curve, c_full);
    let text = format!("C = {c_full:.6} from C_iter = {c_iter:.6}, λ = {lambda}, tail {tail:.6}; {bad} points exceed the bound");
    let witnesses = w(&[("c_full", c_full), ("lambda", lambda), ("tail_certificate", tail)]);
    stages.record("full_decay", bad == 0, text, witnesses, json!(curve));
    Ok(stages.finish())
}
