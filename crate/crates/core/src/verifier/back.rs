//! The geometric step behind uniform shadow decay: for `|w| > 2d`,
//! `(w, g)_1 < d − δ` and `(w⁻¹, h)_1 < d`, both `d < (wh, w)_1` and
//! `(wh, g)_1 < d`.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{VerificationReport, VerifierError};
use crate::estimators::SupremumFamily;
use crate::geometry::{GroupElement, ModelKind, SpaceModel, Word};
use crate::walk::StepDistribution;

/// Slack applied to every hypothesis and conclusion on the half-plane.
const MARGIN: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BackInstances {
    /// Every triple from the ball of radius `max_len` (words of length at
    /// most `max_len` on the tree, `|t| ≤ max_len` on the line).
    Exhaustive { max_len: usize },
    /// `triples` independent triples, each point uniform in the ball of
    /// radius `radius`.
    Random { triples: usize, radius: f64, seed: u64 },
}

pub fn check_back_geometric(model: &SpaceModel, instances: &BackInstances, d: f64) -> Result<VerificationReport, VerifierError> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(VerifierError::InvalidInput(format!("d must be positive, got {d}")));
    }
    let mut report = match instances {
        BackInstances::Exhaustive { max_len } => match model.kind() {
            ModelKind::FreeGroup { rank } => exhaustive_tree(model, rank, *max_len, d)?,
            ModelKind::IntegerLine => {
                let r = *max_len as i64;
                let ball: Vec<_> = (-r..=r).map(GroupElement::Translation).collect();
                let mut report = VerificationReport::new("back_geometric");
                for w in &ball {
                    for g in &ball {
                        for h in &ball {
                            check_triple(model, w, g, h, d, &mut report)?;
                        }
                    }
                }
                report
            }
            ModelKind::UpperHalfPlane => {
                return Err(VerifierError::InvalidInput(
                    "the half-plane has no finite ball to enumerate; use random triples".into(),
                ))
            }
        },
        BackInstances::Random { triples, radius, seed } => {
            let family = SupremumFamily::BallUniform { radius: *radius, samples: 3 * triples };
            let mu = StepDistribution::point_mass(model, model.identity())?;
            let points = family.elements(model, &mu, *seed)?;
            let mut report = VerificationReport::new("back_geometric");
            for t in points.chunks_exact(3) {
                check_triple(model, &t[0], &t[1], &t[2], d, &mut report)?;
            }
            report
        }
    };
    report.witness("d", d);
    report.witness("delta", model.delta());
    Ok(report)
}

fn check_triple(
    model: &SpaceModel,
    w: &GroupElement,
    g: &GroupElement,
    h: &GroupElement,
    d: f64,
    report: &mut VerificationReport,
) -> Result<(), VerifierError> {
    let m = if model.is_exact() { 0.0 } else { MARGIN };
    report.instances_tested += 1;
    let delta = model.delta();
    let long = model.norm(w)? > 2.0 * d + m;
    if !long || model.gromov_product_at_identity(w, g)? >= d - delta - m {
        return Ok(());
    }
    if model.gromov_product_at_identity(&w.inverse(), h)? >= d - m {
        return Ok(());
    }
    report.hypothesis_satisfying += 1;
    let wh = w.compose(h)?;
    let whw = model.gromov_product_at_identity(&wh, w)?;
    let whg = model.gromov_product_at_identity(&wh, g)?;
    let (ok_w, ok_g) = if model.is_exact() {
        (whw > d, whg < d)
    } else {
        (whw >= d + MARGIN, whg <= d - MARGIN)
    };
    if !(ok_w && ok_g) {
        report.fail(json!({
            "w": w, "g": g, "h": h,
            "gromov_wh_w": whw, "gromov_wh_g": whg,
        }));
    }
    Ok(())
}

/// Words packed most-significant-first with `bits` bits per letter, so the
/// common prefix of two words is read off the leading zeros of their xor.
#[derive(Clone, Copy)]
struct Packed {
    bits: u32,
    word: u64,
    len: u32,
}

impl Packed {
    fn new(w: &Word, bits: u32) -> Self {
        let mut word = 0u64;
        for (i, &l) in w.letters().iter().enumerate() {
            word |= u64::from(l) << (64 - bits * (i as u32 + 1));
        }
        Packed { bits, word, len: w.len() as u32 }
    }

    #[inline]
    fn prefix(self, other: Packed) -> u32 {
        let agree = (self.word ^ other.word).leading_zeros() / self.bits;
        agree.min(self.len).min(other.len)
    }
}

/// Exhaustive tree check. Triples are grouped by `w`: the `g`s passing the
/// second hypothesis are collected once per `w`, and each `h` passing the
/// third is checked against all of them.
fn exhaustive_tree(model: &SpaceModel, rank: u8, max_len: usize, d: f64) -> Result<VerificationReport, VerifierError> {
    let ball = Word::enumerate_ball(rank, max_len);
    let bits = (2 * u32::from(rank)).next_power_of_two().trailing_zeros();
    if bits as usize * 2 * max_len > 64 {
        // too long to pack: fall back to the generic path
        let elements: Vec<_> = ball.into_iter().map(GroupElement::Word).collect();
        let mut report = VerificationReport::new("back_geometric");
        for w in &elements {
            for g in &elements {
                for h in &elements {
                    check_triple(model, w, g, h, d, &mut report)?;
                }
            }
        }
        return Ok(report);
    }
    let delta = model.delta();
    let packed: Vec<Packed> = ball.iter().map(|w| Packed::new(w, bits)).collect();
    let size = ball.len() as u64;
    let mut report = VerificationReport::new("back_geometric");
    report.instances_tested = size * size * size;
    for (w, &pw) in ball.iter().zip(&packed) {
        if w.len() as f64 <= 2.0 * d {
            continue;
        }
        let gs: Vec<(usize, Packed)> = packed
            .iter()
            .enumerate()
            .filter(|(_, &pg)| (pw.prefix(pg) as f64) < d - delta)
            .map(|(i, &pg)| (i, pg))
            .collect();
        if gs.is_empty() {
            continue;
        }
        let w_inv = Packed::new(&w.inverse(), bits);
        for (h, &ph) in ball.iter().zip(&packed) {
            if w_inv.prefix(ph) as f64 >= d {
                continue;
            }
            report.hypothesis_satisfying += gs.len() as u64;
            let wh = Packed::new(&w.mul(h), bits);
            let whw = wh.prefix(pw) as f64;
            for &(gi, pg) in &gs {
                let whg = wh.prefix(pg) as f64;
                if !(whw > d && whg < d) {
                    report.fail(json!({
                        "w": w.to_string(), "g": ball[gi].to_string(), "h": h.to_string(),
                        "gromov_wh_w": whw, "gromov_wh_g": whg,
                    }));
                }
            }
        }
    }
    Ok(report)
}
