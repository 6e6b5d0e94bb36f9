use serde::Serialize;
use serde_json::json;

use super::config::RunConfig;
use super::{pipeline, CliError, Outcome, Output};
use crate::estimators::{
    certify_uniform_shadow, estimate_decay_curve, estimate_drift, estimate_horofn_mgf, estimate_progress_mgf,
    estimate_shadow_decay, estimate_uniform_shadow_decay, fit_exponential_rate, polya_mgf, polya_mgf_derivative,
    Axis, CurvePoint, DecayCurve, EstimatorError, ShadowCertificate,
};
use crate::verifier::{
    check_back_geometric, check_hierarchy, check_horo_bounds, check_iter_corollary, check_mgf_estimate,
    check_prog_chain, VerificationReport, VerifierError,
};
use crate::verifier::lattice::DEFAULT_STATE_CAP;

const DEFAULT_UNIFORM_LEVEL: f64 = 0.01;
const DEFAULT_PROGRESS_STEPS: usize = 10;

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        CliError::Config(format!("invalid input: {e}"))
    }
}

impl From<VerifierError> for CliError {
    fn from(e: VerifierError) -> Self {
        CliError::Config(format!("invalid input: {e}"))
    }
}

pub(super) fn dispatch(name: &str, config: &RunConfig, out: &Output) -> Result<Outcome, CliError> {
    match name {
        "polya" => polya(config, out),
        "drift" => drift(config, out),
        "decay" => decay(config, out),
        "shadow" => shadow(config, out),
        "uniform-shadow" => uniform_shadow(config, out),
        "horofn-mgf" => horofn_mgf(config, out),
        "progress-mgf" => progress_mgf(config, out),
        "verify-back" => verify_back(config, out),
        "verify-horo" => verify_horo(config, out),
        "verify-prog" => verify_prog(config, out),
        "verify-iter" => verify_iter(config, out),
        "verify-hierarchy" => verify_hierarchy(config, out),
        "verify-all" => {
            let report = pipeline::verify_all(config)?;
            out.json("verify_all.json", &report)?;
            let mut outcome = Outcome::new();
            for stage in &report.stages {
                outcome.line(stage.status != pipeline::StageStatus::Fail, stage.summary.clone());
            }
            outcome.passed = report.passed;
            Ok(outcome)
        }
        other => Err(CliError::Config(format!("unknown subcommand `{other}`"))),
    }
}

fn req<T: Clone>(value: &Option<T>, field: &str, command: &str) -> Result<T, CliError> {
    RunConfig::require(value, field, command)
}

fn cap(config: &RunConfig) -> usize {
    config.state_cap.unwrap_or(DEFAULT_STATE_CAP)
}

fn max_of(grid: &[usize]) -> usize {
    grid.iter().copied().max().unwrap_or(0)
}

fn report_line(report: &VerificationReport) -> String {
    let mut line = report.summary();
    for (name, value) in &report.witnesses {
        line.push_str(&format!(", {name} = {value}"));
    }
    line
}

fn polya(config: &RunConfig, out: &Output) -> Result<Outcome, CliError> {
    let cmd = "polya";
    let p = req(&config.p, "p", cmd)?;
    let t_grid = req(&config.t_grid, "t_grid", cmd)?;
    config.seed(cmd)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(CliError::config("p", format!("must lie in [0, 1], got {p}")));
    }
    if t_grid.is_empty() {
        return Err(CliError::config("t_grid", "grid must be nonempty"));
    }
    let curve = DecayCurve {
        axis: Axis::T,
        points: t_grid
            .iter()
            .map(|&t| {
                let v = polya_mgf(p, t);
                CurvePoint { x: t, estimate: v, ci_low: v, ci_high: v }
            })
            .collect(),
        trials: 0,
        seed: config.seed.unwrap_or_default(),
        params: [("p".to_string(), p)].into_iter().collect(),
    };
    let derivative = polya_mgf_derivative(p, 0.0);
    out.csv("polya.csv", &curve.to_csv())?;
    out.json("polya.json", &json!({ "p": p, "derivative_at_zero": derivative, "curve": curve }))?;
    let mut outcome = Outcome::new();
    outcome.line(true, format!("PASS polya: p = {p}, {} t values, derivative at 0 = {derivative}", t_grid.len()));
    Ok(outcome)
}

fn drift(config: &RunConfig, out: &Output) -> Result<Outcome, CliError> {
    let cmd = "drift";
    let n = config.n.or(config.horizon).ok_or_else(|| CliError::config("n", "missing field required by `drift`"))?;
    let walk = config.walk(cmd, n)?;
    let report = estimate_drift(&walk, config.trials(cmd)?)?;
    out.json("drift.json", &report)?;
    let mut outcome = Outcome::new();
    outcome.line(
        true,
        format!("PASS drift: n = {n}, estimate {:.6} [{:.6}, {:.6}]", report.estimate, report.ci_low, report.ci_high),
    );
    Ok(outcome)
}

#[derive(Serialize)]
struct DecayOutput {
    curve: DecayCurve,
    fit: Option<crate::estimators::EstimatorReport>,
    fit_error: Option<String>,
}

fn decay(config: &RunConfig, out: &Output) -> Result<Outcome, CliError> {
    let cmd = "decay";
    let c = req(&config.c, "c", cmd)?;
    let n_grid = req(&config.n_grid, "n_grid", cmd)?;
    let a = config.iteration.unwrap_or(1);
    let walk = config.walk(cmd, a * max_of(&n_grid))?;
    let curve = estimate_decay_curve(&walk, c, &n_grid, config.trials(cmd)?)?;
    let (fit, fit_error) = match fit_exponential_rate(&curve) {
        Ok(fit) => (Some(fit), None),
        Err(e) => (None, Some(e.to_string())),
    };
    out.csv("decay.csv", &curve.to_csv())?;
    let line = match &fit {
        Some(f) => format!("PASS decay: C = {c}, {} points, fitted rate {:.6}", curve.points.len(), f.estimate),
        None => format!("PASS decay: C = {c}, {} points, no rate fitted", curve.points.len()),
    };
    out.json("decay.json", &DecayOutput { curve, fit, fit_error })?;
    let mut outcome = Outcome::new();
    outcome.line(true, line);
    Ok(outcome)
}

fn shadow(config: &RunConfig, out: &Output) -> Result<Outcome, CliError> {
    let cmd = "shadow";
    let family = req(&config.family, "family", cmd)?;
    let d_grid = req(&config.d_grid, "d_grid", cmd)?;
    let n_grid = req(&config.n_grid, "n_grid", cmd)?;
    let walk = config.walk(cmd, max_of(&n_grid))?;
    let decay = estimate_shadow_decay(&walk, &family, &d_grid, &n_grid, config.trials(cmd)?)?;
    out.csv("shadow.csv", &decay.forward.to_csv())?;
    out.csv("shadow_reflected.csv", &decay.reflected.to_csv())?;
    out.json("shadow.json", &decay)?;
    let last = |c: &DecayCurve| c.points.last().map_or(f64::NAN, |p| p.estimate);
    let mut outcome = Outcome::new();
    outcome.line(
        true,
        format!(
            "PASS shadow: at d = {}, forward {:.6}, reflected {:.6}",
            d_grid[d_grid.len() - 1],
            last(&decay.forward),
            last(&decay.reflected)
        ),
    );
    Ok(outcome)
}

fn uniform_shadow(config: &RunConfig, out: &Output) -> Result<Outcome, CliError> {
    let cmd = "uniform-shadow";
    let family = req(&config.family, "family", cmd)?;
    let trials = config.trials(cmd)?;
    let mut outcome = Outcome::new();
    if let (Some(d_grid), Some(k_grid)) = (&config.d_grid, &config.k_grid) {
        let level = config.uniform_level.unwrap_or(DEFAULT_UNIFORM_LEVEL);
        let walk = config.walk(cmd, max_of(k_grid))?;
        let cert = certify_uniform_shadow(&walk, &family, d_grid, k_grid, trials, level)?;
        out.json("uniform_shadow.json", &json!({ "level": level, "d_grid": d_grid, "k_grid": k_grid, "certificate": cert }))?;
        match cert {
            Some(c) => outcome.line(
                true,
                format!("PASS uniform-shadow: certified d = {}, k = {}, upper bound {:.6} ≤ {level}", c.d, c.k, c.report.ci_high),
            ),
            None => outcome.line(false, format!("FAIL uniform-shadow: no (d, k) on the grid reaches level {level}")),
        }
    } else {
        let d = req(&config.d, "d", cmd)?;
        let k = req(&config.k, "k", cmd)?;
        let walk = config.walk(cmd, k)?;
        let report = estimate_uniform_shadow_decay(&walk, &family, d, k, trials)?;
        out.json("uniform_shadow.json", &report)?;
        outcome.line(
            true,
            format!("PASS uniform-shadow: d = {d}, k = {k}, estimate {:.6} [{:.6}, {:.6}]", report.estimate, report.ci_low, report.ci_high),
        );
    }
    Ok(outcome)
}

fn horofn_mgf(config: &RunConfig, out: &Output) -> Result<Outcome, CliError> {
    let cmd = "horofn-mgf";
    let family = req(&config.family, "family", cmd)?;
    let t_grid = req(&config.t_grid, "t_grid", cmd)?;
    let a = config.a.or(config.n).ok_or_else(|| CliError::config("a", "missing field required by `horofn-mgf`"))?;
    let walk = config.walk(cmd, a)?;
    let curve = estimate_horofn_mgf(&walk, &family, a, &t_grid, config.trials(cmd)?)?;
    out.csv("horofn_mgf.csv", &curve.to_csv())?;
    out.json("horofn_mgf.json", &curve)?;
    let below = curve.points.iter().filter(|p| p.x > 0.0 && p.ci_high < 1.0).count();
    let mut outcome = Outcome::new();
    outcome.line(true, format!("PASS horofn-mgf: a = {a}, {below} of {} t values certified below 1", curve.points.len()));
    Ok(outcome)
}

fn progress_mgf(config: &RunConfig, out: &Output) -> Result<Outcome, CliError> {
    let cmd = "progress-mgf";
    let a = req(&config.a, "a", cmd)?;
    let b = req(&config.b, "b", cmd)?;
    let steps = config.progress_steps.unwrap_or(DEFAULT_PROGRESS_STEPS);
    let walk = config.walk(cmd, a * steps)?;
    let (report, bins) = estimate_progress_mgf(&walk, a, b, config.trials(cmd)?, config.bin_width.unwrap_or(1.0))?;
    let mut csv = String::from("z,estimate,ci_low,ci_high\n");
    for bin in bins.iter().filter(|b| b.reliable) {
        csv.push_str(&format!("{},{},{},{}\n", bin.bin_low, bin.mean, bin.ci_low, bin.ci_high));
    }
    out.csv("progress_mgf.csv", &csv)?;
    out.json("progress_mgf.json", &json!({ "report": report, "bins": bins }))?;
    let mut outcome = Outcome::new();
    outcome.line(
        true,
        format!("PASS progress-mgf: a = {a}, b = {b}, sup over bins {:.6} [{:.6}, {:.6}]", report.estimate, report.ci_low, report.ci_high),
    );
    Ok(outcome)
}

fn finish(out: &Output, file: &str, report: VerificationReport) -> Result<Outcome, CliError> {
    out.json(file, &report)?;
    let mut outcome = Outcome::new();
    outcome.line(report.passed, report_line(&report));
    Ok(outcome)
}

fn verify_back(config: &RunConfig, out: &Output) -> Result<Outcome, CliError> {
    let cmd = "verify-back";
    let model = config.model(cmd)?;
    let instances = req(&config.instances, "instances", cmd)?;
    let d = req(&config.d, "d", cmd)?;
    finish(out, "verify_back.json", check_back_geometric(&model, &instances, d)?)
}

#[derive(Serialize)]
struct HoroOutput {
    bounds: VerificationReport,
    uniform_shadow: crate::estimators::EstimatorReport,
    mgf: Option<VerificationReport>,
    mgf_checks: Vec<crate::verifier::MgfCheck>,
}

fn verify_horo(config: &RunConfig, out: &Output) -> Result<Outcome, CliError> {
    let cmd = "verify-horo";
    let family = req(&config.family, "family", cmd)?;
    let k = req(&config.k, "k", cmd)?;
    let d = req(&config.d, "d", cmd)?;
    let trials = config.trials(cmd)?;
    let n = config
        .n
        .or_else(|| config.n_grid.as_deref().map(max_of))
        .ok_or_else(|| CliError::config("n", "missing field required by `verify-horo`"))?;
    let horizon = n.max(config.n_grid.as_deref().map_or(0, max_of));
    let walk = config.walk(cmd, horizon)?;
    let mut outcome = Outcome::new();

    let bounds = check_horo_bounds(&walk, &family, k, n, d, trials)?;
    outcome.line(bounds.passed, report_line(&bounds));

    let level = config.uniform_level.unwrap_or(DEFAULT_UNIFORM_LEVEL);
    let shadow = estimate_uniform_shadow_decay(&walk, &family, d, k, trials)?;
    let certificate = (shadow.ci_high <= level).then(|| ShadowCertificate { d, k, level, attempts: 1, report: shadow.clone() });
    outcome.line(
        true,
        format!(
            "{} uniform-shadow: d = {d}, k = {k}, upper bound {:.6} against level {level}",
            if certificate.is_some() { "PASS" } else { "WARN" },
            shadow.ci_high
        ),
    );

    let (mgf, mgf_checks) = match (&config.n_grid, &config.t_grid) {
        (Some(n_grid), Some(t_grid)) => {
            let (report, checks) = check_mgf_estimate(&walk, &family, k, n_grid, d, t_grid, trials, certificate.as_ref())?;
            outcome.line(report.passed, report_line(&report));
            (Some(report), checks)
        }
        _ => (None, Vec::new()),
    };
    out.json("verify_horo.json", &HoroOutput { bounds, uniform_shadow: shadow, mgf, mgf_checks })?;
    Ok(outcome)
}

fn verify_prog(config: &RunConfig, out: &Output) -> Result<Outcome, CliError> {
    let cmd = "verify-prog";
    let process = req(&config.process, "process", cmd)?;
    let b = req(&config.b, "b", cmd)?;
    let c = req(&config.c, "c", cmd)?;
    finish(out, "verify_prog.json", check_prog_chain(&process, b, c, cap(config))?)
}

fn verify_iter(config: &RunConfig, out: &Output) -> Result<Outcome, CliError> {
    let cmd = "verify-iter";
    let process = req(&config.process, "process", cmd)?;
    let a = req(&config.a, "a", cmd)?;
    let lambda = req(&config.lambda, "lambda", cmd)?;
    finish(out, "verify_iter.json", check_iter_corollary(&process, a, lambda, cap(config))?)
}

fn verify_hierarchy(config: &RunConfig, out: &Output) -> Result<Outcome, CliError> {
    let cmd = "verify-hierarchy";
    let processes = req(&config.processes, "processes", cmd)?;
    if processes.is_empty() {
        return Err(CliError::config("processes", "list must be nonempty"));
    }
    let named: Vec<_> = processes.into_iter().map(|p| (p.name, p.process)).collect();
    let report = check_hierarchy(&named, cap(config))?;
    let mut outcome = finish(out, "verify_hierarchy.json", report.clone())?;
    for (flag, holds) in &report.flags {
        outcome.lines.push(format!("  {flag} = {holds}"));
    }
    Ok(outcome)
}
