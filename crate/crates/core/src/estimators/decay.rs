use std::sync::LazyLock;

use super::stats::{wilson, Moments, Z95};
use super::{check_grid, check_trials, Axis, CurvePoint, DecayCurve, EstimatorError, EstimatorReport};
use crate::rng::par_blocks;
use crate::walk::{WalkConfig, WalkError};

/// Logarithmic grid of candidate witness constants on `[0.1, 100]`.
pub static WITNESS_GRID: LazyLock<Vec<f64>> =
    LazyLock::new(|| (0..=3000).map(|j| 0.1 * 1000f64.powf(j as f64 / 3000.0)).collect());

/// Mean of `|w_n| / n` at `n = horizon`.
pub fn estimate_drift(config: &WalkConfig, trials: u64) -> Result<EstimatorReport, EstimatorError> {
    check_trials(trials, 30)?;
    config.validate()?;
    let n = config.horizon;
    let blocks = par_blocks(trials, |range| {
        let mut m = Moments::default();
        for trial in range {
            let mut walker = config.walker(trial);
            let w = walker.advance_to(n);
            m.push(config.model.norm(w).expect("validated") / n as f64);
        }
        m
    });
    let mut total = Moments::default();
    blocks.iter().for_each(|b| total.merge(b));
    Ok(EstimatorReport::new(total.mean(), total.interval(), trials, config.seed)
        .with_param("n", n as f64)
        .with_param("std_dev", total.variance().sqrt()))
}

/// `p̂(i) = P(|w_{a·i}| ≤ i / C)` for each `i` in the grid, with
/// `a = config.iteration`.
pub fn estimate_decay_curve(
    config: &WalkConfig,
    c: f64,
    n_grid: &[usize],
    trials: u64,
) -> Result<DecayCurve, EstimatorError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(EstimatorError::InvalidInput(format!("C must be positive, got {c}")));
    }
    check_grid("n", n_grid)?;
    check_trials(trials, 1)?;
    config.validate()?;
    let a = config.iteration;
    let last = a * n_grid[n_grid.len() - 1];
    if last > config.horizon {
        return Err(WalkError::InsufficientHorizon { a: last, horizon: config.horizon }.into());
    }
    let blocks = par_blocks(trials, |range| {
        let mut hits = vec![0u64; n_grid.len()];
        for trial in range {
            let mut walker = config.walker(trial);
            for (j, &i) in n_grid.iter().enumerate() {
                let w = walker.advance_to(a * i);
                if config.model.norm(w).expect("validated") <= i as f64 / c {
                    hits[j] += 1;
                }
            }
        }
        hits
    });
    let mut hits = vec![0u64; n_grid.len()];
    for b in &blocks {
        hits.iter_mut().zip(b).for_each(|(h, x)| *h += x);
    }
    let points = n_grid
        .iter()
        .zip(&hits)
        .map(|(&i, &h)| {
            let (ci_low, ci_high) = wilson(h, trials);
            CurvePoint { x: i as f64, estimate: h as f64 / trials as f64, ci_low, ci_high }
        })
        .collect();
    Ok(DecayCurve {
        axis: Axis::N,
        points,
        trials,
        seed: config.seed,
        params: [("c".to_string(), c), ("a".to_string(), a as f64)].into_iter().collect(),
    })
}

/// Least `C` on [`WITNESS_GRID`] with `upper ≤ C e^{−x/C}` at every
/// `(x, upper)`. `C e^{−x/C}` increases in `C`, so the feasible set is an
/// up-set of the grid.
pub fn witness_constant(points: &[(f64, f64)]) -> Option<f64> {
    let feasible = |c: f64| points.iter().all(|&(x, upper)| upper <= c * (-x / c).exp());
    let grid = &*WITNESS_GRID;
    let first = grid.partition_point(|&c| !feasible(c));
    grid.get(first).copied()
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, Option<f64>) {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let se = (xs.len() > 2).then(|| {
        let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (rss / (m - 2.0) / sxx).sqrt()
    });
    (slope, intercept, se)
}

/// Least-squares fit of `ln p̂` against `n`. The estimate is the decay rate
/// (minus the slope); `witness_c` is the least grid `C` dominating every
/// upper confidence bound.
///
/// With fewer than two positive points the fit runs on the upper bounds
/// instead and `upper_bound_fit` is set.
pub fn fit_exponential_rate(curve: &DecayCurve) -> Result<EstimatorReport, EstimatorError> {
    if curve.points.len() < 2 {
        return Err(EstimatorError::InvalidInput("need at least two curve points".into()));
    }
    if curve.points.iter().all(|p| p.estimate >= 1.0) {
        return Err(EstimatorError::NoDecay);
    }
    let positive: Vec<_> = curve.points.iter().filter(|p| p.estimate > 0.0).collect();
    let from_upper = positive.len() < 2;
    let (xs, ys): (Vec<f64>, Vec<f64>) = if from_upper {
        curve.points.iter().map(|p| (p.x, p.ci_high.ln())).unzip()
    } else {
        positive.iter().map(|p| (p.x, p.estimate.ln())).unzip()
    };
    let (slope, intercept, se) = least_squares(&xs, &ys);
    let rate = -slope;
    let ci = match se {
        Some(se) => (rate - Z95 * se, rate + Z95 * se),
        None => (rate, rate),
    };
    let mut report = EstimatorReport::new(rate, ci, curve.trials, curve.seed)
        .with_param("intercept", intercept)
        .with_param("points_used", xs.len() as f64)
        .with_param("upper_bound_fit", f64::from(u8::from(from_upper)));
    let uppers: Vec<_> = curve.points.iter().map(|p| (p.x, p.ci_high)).collect();
    match witness_constant(&uppers) {
        Some(c) => report = report.with_param("witness_found", 1.0).with_param("witness_c", c),
        None => report = report.with_param("witness_found", 0.0),
    }
    Ok(report)
}
