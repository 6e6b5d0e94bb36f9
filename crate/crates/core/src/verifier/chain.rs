//! Exact checks of the progress, remainder and hierarchy statements on
//! lattice processes.

use serde_json::json;

use super::lattice::{LatticeLaw, SyntheticProcess};
use super::{le_exact, VerificationReport, VerifierError};

/// `E(e^{−bΔ}) ≤ e^{−c}` first; then for every `n ≤ horizon`
///
/// * `E(e^{−bZ_{n+1}}) ≤ E(e^{−bZ_n}) e^{−c}`,
/// * `E(e^{−bZ_n + cn}) ≤ L` with `L = E(e^{−bZ_0})`,
/// * `P(Z_n ≤ cn / 2b) ≤ L e^{−cn/2}`,
///
/// all on exact laws.
pub fn check_prog_chain(process: &SyntheticProcess, b: f64, c: f64, cap: usize) -> Result<VerificationReport, VerifierError> {
    if !(b > 0.0 && c > 0.0) {
        return Err(VerifierError::InvalidInput(format!("need b, c > 0, got b = {b}, c = {c}")));
    }
    process.validate()?;
    let mut report = VerificationReport::new("prog_chain");
    let premise = process.increment_mgf(b);
    report.witness("b", b);
    report.witness("c", c);
    report.witness("premise_value", premise);
    report.witness("horizon", process.horizon as f64);
    let premise_holds = le_exact(premise, (-c).exp());
    report.flag("premise", premise_holds);
    if !premise_holds {
        report.fail(json!({"stage": "premise", "mgf": premise, "bound": (-c).exp()}));
        return Ok(report);
    }
    let laws = process.laws(cap)?;
    let mgf: Vec<f64> = laws.iter().map(|law| law.expectation(|z| (-b * z as f64).exp())).collect();
    let l = mgf[0];
    report.witness("L", l);
    let mut worst_markov: f64 = 0.0;
    for (n, law) in laws.iter().enumerate() {
        let nf = n as f64;
        if n + 1 < laws.len() {
            report.instances_tested += 1;
            if !le_exact(mgf[n + 1], mgf[n] * (-c).exp()) {
                report.fail(json!({"stage": "geo", "n": n, "lhs": mgf[n + 1], "rhs": mgf[n] * (-c).exp()}));
            }
        }
        report.instances_tested += 2;
        let ind = law.expectation(|z| (-b * z as f64 + c * nf).exp());
        if !le_exact(ind, l) {
            report.fail(json!({"stage": "ind", "n": n, "lhs": ind, "rhs": l}));
        }
        let threshold = c * nf / (2.0 * b);
        let tail = law.probability_where(|z| z as f64 <= threshold);
        let bound = l * (-c * nf / 2.0).exp();
        if !le_exact(tail, bound) {
            report.fail(json!({"stage": "markov", "n": n, "lhs": tail, "rhs": bound}));
        }
        worst_markov = worst_markov.max(tail / bound);
    }
    report.hypothesis_satisfying = report.instances_tested;
    report.witness("markov_worst_ratio", worst_markov);
    Ok(report)
}

/// Least grid `C` with `P(Z_n ≤ n / C) ≤ C e^{−n/C}` for `n = 1, …`, where
/// `laws[n]` is the law of `Z_n`. Both sides grow with `C`, so the whole
/// grid is scanned.
pub fn lattice_witness(laws: &[LatticeLaw]) -> Option<f64> {
    let cdfs: Vec<(i64, Vec<f64>)> = laws.iter().map(LatticeLaw::cdf_table).collect();
    let below = |(offset, cdf): &(i64, Vec<f64>), x: f64| {
        let k = x.floor() as i64 - offset;
        if k < 0 {
            0.0
        } else {
            cdf[(k as usize).min(cdf.len() - 1)]
        }
    };
    crate::estimators::WITNESS_GRID.iter().copied().find(|&c| {
        cdfs.iter().enumerate().skip(1).all(|(n, table)| {
            let n = n as f64;
            below(table, n / c) <= c * (-n / c).exp()
        })
    })
}

/// Exact laws for the remainder decomposition `n = a·i(n) + r(n)` of a
/// walk on the integer line with i.i.d. increments.
#[derive(Clone, Debug)]
pub struct RemainderLaws {
    pub a: usize,
    /// Law of the position `W_m`, `m = 0, …, horizon`.
    pub positions: Vec<LatticeLaw>,
    /// Law of `Z_n = |W_{a i(n)}|`.
    pub z: Vec<LatticeLaw>,
    /// Law of `Y_n = |W_{a i(n)}⁻¹ W_n|`, identical to that of `|W_{r(n)}|`.
    pub y: Vec<LatticeLaw>,
}

pub fn iterated_remainder_laws(process: &SyntheticProcess, a: usize, cap: usize) -> Result<RemainderLaws, VerifierError> {
    if a < 1 {
        return Err(VerifierError::InvalidInput("a must be at least 1".into()));
    }
    let positions = process.laws(cap)?;
    let abs: Vec<LatticeLaw> = positions.iter().map(LatticeLaw::abs).collect();
    let z = (0..positions.len()).map(|n| abs[a * (n / a)].clone()).collect();
    let y = (0..positions.len()).map(|n| abs[n % a].clone()).collect();
    Ok(RemainderLaws { a, positions, z, y })
}

/// Checks, for `n = 1, …`, with `Y_n` and `Z_n` independent,
/// `P(−|Y_n| + Z_n ≤ n/2C) ≤ E(e^{λ|Y_n|}) e^{−λn/2C} + C e^{−n/C}`,
/// after confirming that `Z` decays with constant `C`.
pub fn check_iter_remainder(
    z: &[LatticeLaw],
    y: &[LatticeLaw],
    c: f64,
    lambda: f64,
) -> Result<VerificationReport, VerifierError> {
    if z.len() != y.len() || z.len() < 2 {
        return Err(VerifierError::InvalidInput("need matching laws for n = 0, 1, …".into()));
    }
    if !(c > 0.0 && lambda > 0.0) {
        return Err(VerifierError::InvalidInput(format!("need C, λ > 0, got C = {c}, λ = {lambda}")));
    }
    let mut report = VerificationReport::new("iter_remainder");
    report.witness("c", c);
    report.witness("lambda", lambda);
    let mut premise = true;
    let mut tail_sup: f64 = 0.0;
    for n in 1..z.len() {
        let nf = n as f64;
        report.instances_tested += 1;
        if z[n].probability_where(|v| v as f64 <= nf / c) > c * (-nf / c).exp() {
            premise = false;
            report.fail(json!({"stage": "premise", "n": n}));
            continue;
        }
        report.hypothesis_satisfying += 1;
        let tail = y[n].expectation(|v| (lambda * v.abs() as f64).exp());
        tail_sup = tail_sup.max(tail);
        let threshold = nf / (2.0 * c);
        let lhs: f64 = y[n]
            .support()
            .map(|(yv, py)| py * z[n].probability_where(|zv| (zv - yv.abs()) as f64 <= threshold))
            .sum();
        let rhs = tail * (-lambda * nf / (2.0 * c)).exp() + c * (-nf / c).exp();
        if !le_exact(lhs, rhs) {
            report.fail(json!({"stage": "bound", "n": n, "lhs": lhs, "rhs": rhs}));
        }
    }
    report.flag("premise", premise);
    report.witness("tail_sup", tail_sup);
    Ok(report)
}

/// Full-walk constant from an iterated witness `c_iter` (indexed by `i`),
/// iteration `a`, and a step tail certificate `Σ μ(g) e^{λ|g|}`.
///
/// `C1 = 2a·c_iter` is a decay constant of `Z_n = |w_{a i(n)}|` indexed by
/// `n`, and `M = tail^{a−1}` bounds `E(e^{λ|Y_n|})`; then
/// `C = max(2C1, 2C1/λ, M + C1)` dominates both terms of the remainder
/// bound.
pub fn full_walk_constant(c_iter: f64, a: usize, lambda: f64, tail: f64) -> f64 {
    let c1 = 2.0 * a as f64 * c_iter;
    let m = tail.max(1.0).powi(a as i32 - 1);
    (2.0 * c1).max(2.0 * c1 / lambda).max(m + c1)
}

/// End-to-end: iterated witness, remainder bound with `C1 = 2a·c_iter`,
/// then the full-walk constant checked against the exact law of `|W_n|`.
pub fn check_iter_corollary(process: &SyntheticProcess, a: usize, lambda: f64, cap: usize) -> Result<VerificationReport, VerifierError> {
    let laws = iterated_remainder_laws(process, a, cap)?;
    let iterated: Vec<LatticeLaw> = laws.positions.iter().step_by(a).map(LatticeLaw::abs).collect();
    let mut report = VerificationReport::new("iter_corollary");
    report.witness("a", a as f64);
    let Some(c_iter) = lattice_witness(&iterated) else {
        report.flag("iterated_witness", false);
        report.fail(json!({"stage": "iterated_witness"}));
        return Ok(report);
    };
    report.flag("iterated_witness", true);
    report.witness("c_iter", c_iter);
    let tail: f64 = process.increments.iter().map(|&(d, p)| p * (lambda * d.abs() as f64).exp()).sum();
    report.witness("tail_certificate", tail);
    let c1 = 2.0 * a as f64 * c_iter;
    let mut remainder = check_iter_remainder(&laws.z, &laws.y, c1, lambda)?;
    remainder.check = report.check.clone();
    report.absorb(remainder);
    let c_full = full_walk_constant(c_iter, a, lambda, tail);
    report.witness("c_full", c_full);
    for (n, law) in laws.positions.iter().enumerate().skip(1) {
        let nf = n as f64;
        report.instances_tested += 1;
        let p = law.abs().probability_where(|v| v as f64 <= nf / c_full);
        if p > c_full * (-nf / c_full).exp() {
            report.fail(json!({"stage": "full_walk", "n": n, "p": p}));
        }
    }
    if let Some(direct) = lattice_witness(&laws.positions.iter().map(LatticeLaw::abs).collect::<Vec<_>>()) {
        report.witness("c_full_direct", direct);
    }
    Ok(report)
}

/// The four progress properties of one process, evaluated at its horizon.
fn hierarchy_properties(name: &str, laws: &[LatticeLaw], report: &mut VerificationReport) -> [bool; 4] {
    let h = laws.len() - 1;
    let abs: Vec<LatticeLaw> = laws.iter().map(LatticeLaw::abs).collect();

    let decay_c = lattice_witness(&abs).filter(|&c| c * (-(h as f64) / c).exp() < 0.01);
    if let Some(c) = decay_c {
        report.witness(&format!("{name}.decay_c"), c);
    }

    let mut epsilon = None;
    for eps in [0.5, 0.25, 0.1, 0.05, 0.02, 0.01] {
        let tail: f64 = (h / 2..=h)
            .map(|n| abs[n].probability_where(|v| v as f64 <= eps * n as f64))
            .sum();
        if tail <= 0.01 {
            epsilon = Some(eps);
            break;
        }
    }
    if let Some(eps) = epsilon {
        report.witness(&format!("{name}.epsilon"), eps);
    }

    let mut m = h / 4;
    if (h - m) % 2 == 1 {
        m += 1;
    }
    let probability_zero = [1i64, 10].iter().all(|&r| {
        let late = abs[h].probability_where(|v| v <= r);
        let early = abs[m].probability_where(|v| v <= r);
        late <= 1e-12 || late < 0.75 * early
    });

    let mean_late = abs[h].expectation(|v| v as f64);
    let mean_early = abs[m].expectation(|v| v as f64);
    report.witness(&format!("{name}.mean_at_horizon"), mean_late);
    let transient = mean_late > 1.5 * mean_early;

    [decay_c.is_some(), epsilon.is_some(), probability_zero, transient]
}

const PROPERTY_NAMES: [&str; 4] = ["decay", "linear_progress", "probability_zero", "not_positive_recurrent"];

/// Evaluates, on exact laws, exponential decay ⇒ positive linear progress
/// ⇒ zero asymptotic probability of bounded sets ⇒ not positive recurrent,
/// and fails on any implication whose antecedent holds and consequent does
/// not.
pub fn check_hierarchy(processes: &[(String, SyntheticProcess)], cap: usize) -> Result<VerificationReport, VerifierError> {
    let mut report = VerificationReport::new("hierarchy");
    for (name, process) in processes {
        if process.horizon < 8 {
            return Err(VerifierError::InvalidInput(format!("process {name} needs horizon at least 8")));
        }
        let laws = process.laws(cap)?;
        let props = hierarchy_properties(name, &laws, &mut report);
        for (p, holds) in PROPERTY_NAMES.iter().zip(props) {
            report.flag(&format!("{name}.{p}"), holds);
        }
        for i in 0..3 {
            report.instances_tested += 1;
            if props[i] {
                report.hypothesis_satisfying += 1;
                if !props[i + 1] {
                    report.fail(json!({
                        "process": name,
                        "antecedent": PROPERTY_NAMES[i],
                        "consequent": PROPERTY_NAMES[i + 1],
                    }));
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verifier::lattice::DEFAULT_STATE_CAP;

    #[test]
    fn deterministic_progress_chain() {
        let p = SyntheticProcess { increments: vec![(1, 1.0)], initial: 0, horizon: 50 };
        let r = check_prog_chain(&p, 0.5, 0.5, DEFAULT_STATE_CAP).unwrap();
        assert!(r.passed, "{:?}", r.failures);
        let bad = check_prog_chain(&SyntheticProcess::polya(0.5, 10), 0.5, 0.1, DEFAULT_STATE_CAP).unwrap();
        assert!(!bad.passed);
        assert!(!bad.flags["premise"]);
        assert_eq!(bad.instances_tested, 0);
    }

    #[test]
    fn zero_remainder_reduces_to_decay() {
        let laws = SyntheticProcess::polya(0.9, 60).laws(DEFAULT_STATE_CAP).unwrap();
        let z: Vec<_> = laws.iter().map(LatticeLaw::abs).collect();
        let c = lattice_witness(&z).unwrap();
        let y = vec![LatticeLaw::point_mass(0); z.len()];
        let r = check_iter_remainder(&z, &y, c, 1.0).unwrap();
        assert!(r.passed && r.flags["premise"]);
        assert_eq!(r.witnesses["tail_sup"], 1.0);
    }

    #[test]
    fn constant_process_fails_everything() {
        let r = check_hierarchy(&[("zero".into(), SyntheticProcess::constant(0, 100))], DEFAULT_STATE_CAP).unwrap();
        for p in PROPERTY_NAMES {
            assert!(!r.flags[&format!("zero.{p}")], "{p}");
        }
        assert!(r.passed);
    }
}
