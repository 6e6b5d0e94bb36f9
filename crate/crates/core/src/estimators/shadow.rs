use rand::Rng;
use serde::Serialize;

use super::stats::wilson;
use super::{check_grid, check_trials, Axis, CurvePoint, DecayCurve, EstimatorError, EstimatorReport, SupremumFamily};
use crate::geometry::{GroupElement, SpaceModel};
use crate::rng::{aux_rng, par_blocks};
use crate::walk::{WalkConfig, WalkError};

const QUADRUPLE_STREAM: u64 = 0x4b7;

/// Shadow decay curves for `w_n` and for `w_n⁻¹` (the reflected walk).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShadowDecay {
    pub forward: DecayCurve,
    pub reflected: DecayCurve,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShadowCertificate {
    pub d: f64,
    pub k: usize,
    pub level: f64,
    pub attempts: usize,
    pub report: EstimatorReport,
}

/// `w ∈ S(g, d)` given `(w, g)_1` and `|g|`.
#[inline]
fn hit(gp: f64, d: f64, norm_g: f64) -> bool {
    d <= 0.0 || (d <= norm_g && gp >= d)
}

/// Largest count and the index of its first cell.
fn max_cell(counts: impl Iterator<Item = u64>) -> (u64, usize) {
    counts
        .enumerate()
        .fold((0, 0), |(best, at), (i, c)| if c > best { (c, i) } else { (best, at) })
}

fn family_elements(config: &WalkConfig, family: &SupremumFamily) -> Result<(Vec<GroupElement>, Vec<f64>), EstimatorError> {
    let gs = family.elements(&config.model, &config.mu, config.seed)?;
    let norms = gs.iter().map(|g| config.model.norm(g)).collect::<Result<Vec<_>, _>>()?;
    Ok((gs, norms))
}

/// `f̂(d) = max_{n, g} P((w_n, g)_1 ≥ d)` over the n grid and the family,
/// together with the same quantity for `w_n⁻¹`.
pub fn estimate_shadow_decay(
    config: &WalkConfig,
    family: &SupremumFamily,
    d_grid: &[f64],
    n_grid: &[usize],
    trials: u64,
) -> Result<ShadowDecay, EstimatorError> {
    check_grid("d", d_grid)?;
    check_grid("n", n_grid)?;
    check_trials(trials, 1)?;
    config.validate()?;
    let last = n_grid[n_grid.len() - 1];
    if last > config.horizon {
        return Err(WalkError::InsufficientHorizon { a: last, horizon: config.horizon }.into());
    }
    let (gs, norms) = family_elements(config, family)?;
    let model = &config.model;
    let (nn, ng, nd) = (n_grid.len(), gs.len(), d_grid.len());
    let cell = |j: usize, i: usize, l: usize| (j * ng + i) * nd + l;
    let blocks = par_blocks(trials, |range| {
        let mut fwd = vec![0u64; nn * ng * nd];
        let mut rev = vec![0u64; nn * ng * nd];
        for trial in range {
            let mut walker = config.walker(trial);
            for (j, &n) in n_grid.iter().enumerate() {
                let w = walker.advance_to(n).clone();
                let winv = w.inverse();
                for (i, g) in gs.iter().enumerate() {
                    let gf = model.gromov_product_at_identity(&w, g).expect("validated");
                    let gr = model.gromov_product_at_identity(&winv, g).expect("validated");
                    for (l, &d) in d_grid.iter().enumerate() {
                        fwd[cell(j, i, l)] += u64::from(hit(gf, d, norms[i]));
                        rev[cell(j, i, l)] += u64::from(hit(gr, d, norms[i]));
                    }
                }
            }
        }
        (fwd, rev)
    });
    let mut fwd = vec![0u64; nn * ng * nd];
    let mut rev = vec![0u64; nn * ng * nd];
    for (f, r) in &blocks {
        fwd.iter_mut().zip(f).for_each(|(a, b)| *a += b);
        rev.iter_mut().zip(r).for_each(|(a, b)| *a += b);
    }
    let curve = |counts: &[u64]| {
        let points = d_grid
            .iter()
            .enumerate()
            .map(|(l, &d)| {
                let cells = (0..nn).flat_map(|j| (0..ng).map(move |i| (j, i)));
                let (best, _) = max_cell(cells.map(|(j, i)| counts[cell(j, i, l)]));
                let (ci_low, ci_high) = wilson(best, trials);
                CurvePoint { x: d, estimate: best as f64 / trials as f64, ci_low, ci_high }
            })
            .collect();
        DecayCurve {
            axis: Axis::D,
            points,
            trials,
            seed: config.seed,
            params: [("family_size".to_string(), ng as f64), ("n_max".to_string(), last as f64)]
                .into_iter()
                .collect(),
        }
    };
    Ok(ShadowDecay { forward: curve(&fwd), reflected: curve(&rev) })
}

/// `max_{g, h} P((w_k h, g)_1 ≥ d)` with `g` over the family and `h` over
/// the family plus the identity.
pub fn estimate_uniform_shadow_decay(
    config: &WalkConfig,
    family: &SupremumFamily,
    d: f64,
    k: usize,
    trials: u64,
) -> Result<EstimatorReport, EstimatorError> {
    if k < 1 {
        return Err(EstimatorError::InvalidInput("k must be at least 1".into()));
    }
    check_trials(trials, 1)?;
    config.validate()?;
    let (gs, norms) = family_elements(config, family)?;
    let mut hs = vec![config.model.identity()];
    hs.extend(gs.iter().filter(|g| **g != config.model.identity()).cloned());
    let model = &config.model;
    let (ng, nh) = (gs.len(), hs.len());
    let blocks = par_blocks(trials, |range| {
        let mut counts = vec![0u64; nh * ng];
        for trial in range {
            let mut walker = config.walker(trial);
            let w = walker.advance_to(k).clone();
            for (j, h) in hs.iter().enumerate() {
                let wh = w.compose(h).expect("validated");
                for (i, g) in gs.iter().enumerate() {
                    let gp = model.gromov_product_at_identity(&wh, g).expect("validated");
                    counts[j * ng + i] += u64::from(hit(gp, d, norms[i]));
                }
            }
        }
        counts
    });
    let mut counts = vec![0u64; nh * ng];
    for b in &blocks {
        counts.iter_mut().zip(b).for_each(|(a, x)| *a += x);
    }
    let (best, at) = max_cell(counts.iter().copied());
    Ok(EstimatorReport::new(best as f64 / trials as f64, wilson(best, trials), trials, config.seed)
        .with_param("d", d)
        .with_param("k", k as f64)
        .with_param("g_count", ng as f64)
        .with_param("h_count", nh as f64)
        .with_param("argmax_h_norm", model.norm(&hs[at / ng])?)
        .with_param("argmax_g_norm", norms[at % ng]))
}

/// Searches `d` ascending, then `k` ascending, for the first pair whose
/// uniform shadow estimate has upper confidence bound at most `level`.
pub fn certify_uniform_shadow(
    config: &WalkConfig,
    family: &SupremumFamily,
    d_grid: &[f64],
    k_grid: &[usize],
    trials: u64,
    level: f64,
) -> Result<Option<ShadowCertificate>, EstimatorError> {
    check_grid("d", d_grid)?;
    check_grid("k", k_grid)?;
    let mut attempts = 0;
    for &d in d_grid {
        for &k in k_grid {
            attempts += 1;
            let report = estimate_uniform_shadow_decay(config, family, d, k, trials)?;
            if report.ci_high <= level {
                return Ok(Some(ShadowCertificate { d, k, level, attempts, report }));
            }
        }
    }
    Ok(None)
}

/// Largest four-point defect over `quadruples` random quadruples from the
/// ball of radius `radius`, trying every choice of base point and of the
/// point paired against the other two.
pub fn four_point_supremum(model: &SpaceModel, radius: f64, quadruples: usize, seed: u64) -> Result<f64, EstimatorError> {
    let mut rng = aux_rng(seed, QUADRUPLE_STREAM);
    let family = SupremumFamily::BallUniform { radius, samples: 4 * quadruples };
    let mu = crate::walk::StepDistribution::point_mass(model, model.identity())?;
    let points = family.elements(model, &mu, rng.random())?;
    let mut sup = f64::NEG_INFINITY;
    for q in points.chunks_exact(4) {
        for base in 0..4 {
            let rest: Vec<usize> = (0..4).filter(|&i| i != base).collect();
            for pivot in 0..3 {
                let (b, c) = match pivot {
                    0 => (rest[1], rest[2]),
                    1 => (rest[0], rest[2]),
                    _ => (rest[0], rest[1]),
                };
                let defect = model.four_point_defect(&q[base], &q[b], &q[c], &q[rest[pivot]])?;
                sup = sup.max(defect);
            }
        }
    }
    Ok(sup)
}
