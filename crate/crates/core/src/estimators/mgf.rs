use std::collections::BTreeMap;

use serde::Serialize;

use super::stats::Moments;
use super::{check_grid, check_trials, Axis, CurvePoint, DecayCurve, EstimatorError, EstimatorReport, SupremumFamily};
use crate::rng::par_blocks;
use crate::walk::{WalkConfig, WalkError};

/// Bins with fewer samples are excluded from conditional estimates.
pub const MIN_BIN_SAMPLES: u64 = 30;

/// `f(t) = p e^{−t} + (1 − p) e^t`, the moment generating function of
/// `−X` for a `±1` step with `P(X = 1) = p`.
pub fn polya_mgf(p: f64, t: f64) -> f64 {
    p * (-t).exp() + (1.0 - p) * t.exp()
}

/// `f'(t) = −p e^{−t} + (1 − p) e^t`.
pub fn polya_mgf_derivative(p: f64, t: f64) -> f64 {
    -p * (-t).exp() + (1.0 - p) * t.exp()
}

/// `max_g Ê(e^{−t ρ_g(w_a)})` for each `t`, over the family.
pub fn estimate_horofn_mgf(
    config: &WalkConfig,
    family: &SupremumFamily,
    a: usize,
    t_grid: &[f64],
    trials: u64,
) -> Result<DecayCurve, EstimatorError> {
    if a < 1 {
        return Err(EstimatorError::InvalidInput("a must be at least 1".into()));
    }
    check_grid("t", t_grid)?;
    if t_grid[0] < 0.0 {
        return Err(EstimatorError::InvalidInput("t grid must be nonnegative".into()));
    }
    check_trials(trials, 2)?;
    config.validate()?;
    let gs = family.elements(&config.model, &config.mu, config.seed)?;
    let (ng, nt) = (gs.len(), t_grid.len());
    let blocks = par_blocks(trials, |range| {
        let mut acc = vec![Moments::default(); ng * nt];
        for trial in range {
            let mut walker = config.walker(trial);
            let w = walker.advance_to(a);
            for (i, g) in gs.iter().enumerate() {
                let rho = config.model.horofunction(g, w).expect("validated");
                for (l, &t) in t_grid.iter().enumerate() {
                    acc[i * nt + l].push(if t == 0.0 { 1.0 } else { (-t * rho).exp() });
                }
            }
        }
        acc
    });
    let mut acc = vec![Moments::default(); ng * nt];
    for b in &blocks {
        acc.iter_mut().zip(b).for_each(|(x, y)| x.merge(y));
    }
    let points = t_grid
        .iter()
        .enumerate()
        .map(|(l, &t)| {
            let best = (0..ng)
                .map(|i| &acc[i * nt + l])
                .fold(None::<&Moments>, |best, m| match best {
                    Some(b) if b.mean() >= m.mean() => Some(b),
                    _ => Some(m),
                })
                .expect("nonempty family");
            let (ci_low, ci_high) = best.interval();
            CurvePoint { x: t, estimate: best.mean(), ci_low, ci_high }
        })
        .collect();
    Ok(DecayCurve {
        axis: Axis::T,
        points,
        trials,
        seed: config.seed,
        params: [("a".to_string(), a as f64), ("family_size".to_string(), ng as f64)]
            .into_iter()
            .collect(),
    })
}

/// Conditional mean of `e^{−bΔ}` within one bin of the conditioning value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BinEstimate {
    pub bin_low: f64,
    pub count: u64,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub reliable: bool,
}

fn bin_index(z: f64, width: f64) -> i64 {
    (z / width + 1e-9).floor() as i64
}

fn summarize(bins: &BTreeMap<i64, Moments>, width: f64, min_samples: u64) -> Vec<BinEstimate> {
    bins.iter()
        .map(|(&bin, m)| {
            let (ci_low, ci_high) = m.interval();
            BinEstimate {
                bin_low: bin as f64 * width,
                count: m.count,
                mean: m.mean(),
                ci_low,
                ci_high,
                reliable: m.count >= min_samples,
            }
        })
        .collect()
}

/// Bins pairs `(Z, Z')` by `⌊Z / bin_width⌋` and estimates
/// `E(e^{−b(Z' − Z)} | bin)`; bins with fewer than `min_samples` pairs are
/// marked unreliable.
pub fn conditional_mgf_by_bin(pairs: &[(f64, f64)], b: f64, bin_width: f64, min_samples: u64) -> Vec<BinEstimate> {
    let mut bins: BTreeMap<i64, Moments> = BTreeMap::new();
    for &(z, next) in pairs {
        bins.entry(bin_index(z, bin_width)).or_default().push(increment_mgf(b, next - z));
    }
    summarize(&bins, bin_width, min_samples)
}

#[inline]
fn increment_mgf(b: f64, delta: f64) -> f64 {
    if b == 0.0 {
        1.0
    } else {
        (-b * delta).exp()
    }
}

/// With `Z_j = |w_{aj}|`, the largest over reliable bins of
/// `Ê(e^{−b(Z_{j+1} − Z_j)} | Z_j)`; `epsilon` is one minus it.
pub fn estimate_progress_mgf(
    config: &WalkConfig,
    a: usize,
    b: f64,
    trials: u64,
    bin_width: f64,
) -> Result<(EstimatorReport, Vec<BinEstimate>), EstimatorError> {
    if a < 1 {
        return Err(EstimatorError::InvalidInput("a must be at least 1".into()));
    }
    if !(b >= 0.0 && b.is_finite()) || !(bin_width > 0.0) {
        return Err(EstimatorError::InvalidInput(format!(
            "need b ≥ 0 and a positive bin width, got b = {b}, width = {bin_width}"
        )));
    }
    check_trials(trials, 1)?;
    config.validate()?;
    let steps = config.horizon / a;
    if steps < 1 {
        return Err(WalkError::InsufficientHorizon { a, horizon: config.horizon }.into());
    }
    let blocks = par_blocks(trials, |range| {
        let mut bins: BTreeMap<i64, Moments> = BTreeMap::new();
        for trial in range {
            let mut walker = config.walker(trial);
            let mut z = 0.0;
            for j in 1..=steps {
                let next = config.model.norm(walker.advance_to(a * j)).expect("validated");
                bins.entry(bin_index(z, bin_width)).or_default().push(increment_mgf(b, next - z));
                z = next;
            }
        }
        bins
    });
    let mut bins: BTreeMap<i64, Moments> = BTreeMap::new();
    for block in &blocks {
        for (k, m) in block {
            bins.entry(*k).or_default().merge(m);
        }
    }
    let estimates = summarize(&bins, bin_width, MIN_BIN_SAMPLES);
    let reliable: Vec<_> = estimates.iter().filter(|e| e.reliable).collect();
    let best = reliable
        .iter()
        .copied()
        .fold(None::<&BinEstimate>, |best, e| match best {
            Some(x) if x.mean >= e.mean => Some(x),
            _ => Some(e),
        })
        .ok_or_else(|| EstimatorError::InvalidInput(format!("no bin has {MIN_BIN_SAMPLES} samples")))?;
    let excluded: u64 = estimates.iter().filter(|e| !e.reliable).map(|e| e.count).sum();
    let report = EstimatorReport::new(best.mean, (best.ci_low, best.ci_high), trials, config.seed)
        .with_param("a", a as f64)
        .with_param("b", b)
        .with_param("bin_width", bin_width)
        .with_param("argmax_bin", best.bin_low)
        .with_param("epsilon", 1.0 - best.mean)
        .with_param("epsilon_lower", 1.0 - best.ci_high)
        .with_param("bins_used", reliable.len() as f64)
        .with_param("bins_excluded", (estimates.len() - reliable.len()) as f64)
        .with_param("excluded_samples", excluded as f64)
        .with_param("steps", steps as f64);
    Ok((report, estimates))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polya_closed_form() {
        assert_eq!(polya_mgf(0.75, 0.0), 1.0);
        assert_eq!(polya_mgf_derivative(0.75, 0.0), -0.5);
        let v = polya_mgf(0.75, 0.5);
        assert!((v - 0.867_078).abs() < 1e-6, "{v}");
        let h = 1e-6;
        let fd = (polya_mgf(0.6, h) - polya_mgf(0.6, -h)) / (2.0 * h);
        assert!((fd - (1.0 - 2.0 * 0.6)).abs() < 1e-8);
    }

    #[test]
    fn binning() {
        let pairs: Vec<(f64, f64)> = (0..100).map(|i| ((i % 3) as f64, (i % 3) as f64 + 1.0)).collect();
        let bins = conditional_mgf_by_bin(&pairs, 0.5, 1.0, 34);
        assert_eq!(bins.len(), 3);
        assert!(bins[0].reliable && !bins[1].reliable);
        for b in &bins {
            assert!((b.mean - (-0.5f64).exp()).abs() < 1e-15);
        }
        let zero = conditional_mgf_by_bin(&pairs, 0.0, 1.0, 1);
        assert!(zero.iter().all(|b| b.mean == 1.0));
    }
}
