//! Finite families standing in for a supremum over the whole group.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EstimatorError;
use crate::geometry::{GroupElement, Mobius, ModelKind, SpaceModel, Word};
use crate::rng::aux_rng;
use crate::walk::StepDistribution;

const FAMILY_STREAM: u64 = 0x0fa3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum SupremumFamily {
    /// Locations `w_t` of `samples` independent walks at each time `t`.
    WalkPositions { times: Vec<usize>, samples: usize },
    /// Powers `gᵉ` for each exponent `e`.
    LoxodromicPowers {
        element: GroupElement,
        exponents: Vec<i64>,
    },
    /// `samples` points drawn uniformly from the ball of radius `radius`
    /// about the basepoint (counting measure on the line and tree,
    /// hyperbolic area on the half-plane).
    BallUniform { radius: f64, samples: usize },
}

impl SupremumFamily {
    pub fn validate(&self) -> Result<(), EstimatorError> {
        let empty = match self {
            SupremumFamily::WalkPositions { times, samples } => times.is_empty() || *samples == 0,
            SupremumFamily::LoxodromicPowers { exponents, .. } => exponents.is_empty(),
            SupremumFamily::BallUniform { radius, samples } => {
                if !(*radius >= 0.0 && radius.is_finite()) {
                    return Err(EstimatorError::InvalidInput(format!(
                        "ball radius must be a nonnegative real, got {radius}"
                    )));
                }
                *samples == 0
            }
        };
        if empty {
            return Err(EstimatorError::InvalidInput("supremum family is empty".into()));
        }
        Ok(())
    }

    /// Materializes the family. Randomized strategies draw from an auxiliary
    /// stream of `seed`, so the family never overlaps trial randomness.
    /// Duplicates are removed, first occurrence kept.
    pub fn elements(
        &self,
        model: &SpaceModel,
        mu: &StepDistribution,
        seed: u64,
    ) -> Result<Vec<GroupElement>, EstimatorError> {
        self.validate()?;
        let mut rng = aux_rng(seed, FAMILY_STREAM);
        let raw = match self {
            SupremumFamily::WalkPositions { times, samples } => {
                let sampler = mu.sampler();
                let horizon = *times.iter().max().expect("nonempty");
                let mut out = Vec::with_capacity(times.len() * samples);
                for _ in 0..*samples {
                    let mut w = model.identity();
                    let mut at = Vec::with_capacity(times.len());
                    for t in 0..=horizon {
                        if t > 0 {
                            w.mul_assign_right(sampler.sample(&mut rng))?;
                        }
                        if times.contains(&t) {
                            at.push(w.clone());
                        }
                    }
                    out.extend(at);
                }
                out
            }
            SupremumFamily::LoxodromicPowers { element, exponents } => {
                model.validate(element)?;
                exponents.iter().map(|&e| element.pow(e)).collect()
            }
            SupremumFamily::BallUniform { radius, samples } => (0..*samples)
                .map(|_| sample_ball(model, *radius, &mut rng))
                .collect(),
        };
        let mut seen = std::collections::BTreeSet::new();
        Ok(raw.into_iter().filter(|g| seen.insert(g.key())).collect())
    }
}

fn sample_ball(model: &SpaceModel, radius: f64, rng: &mut ChaCha8Rng) -> GroupElement {
    match model.kind() {
        ModelKind::IntegerLine => {
            let r = radius.floor() as i64;
            GroupElement::Translation(rng.random_range(-r..=r))
        }
        ModelKind::FreeGroup { rank } => {
            let r = radius.floor() as usize;
            let k = 2 * u64::from(rank);
            // spheres have 1 and 2k(2k − 1)^{ℓ−1} words
            let sizes: Vec<f64> = (0..=r)
                .map(|l| if l == 0 { 1.0 } else { (k * (k - 1).pow(l as u32 - 1)) as f64 })
                .collect();
            let total: f64 = sizes.iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut len = r;
            for (l, s) in sizes.iter().enumerate() {
                if u < *s {
                    len = l;
                    break;
                }
                u -= s;
            }
            let mut letters = Vec::with_capacity(len);
            for i in 0..len {
                let letter = if i == 0 {
                    rng.random_range(0..k as u8)
                } else {
                    let prev_inverse = letters[i - 1] ^ 1;
                    let l = rng.random_range(0..k as u8 - 1);
                    if l >= prev_inverse { l + 1 } else { l }
                };
                letters.push(letter);
            }
            GroupElement::Word(Word::from_letters(letters))
        }
        ModelKind::UpperHalfPlane => {
            // area of a disc of radius r is 2π(cosh r − 1)
            let u: f64 = rng.random();
            let r = (1.0 + u * (radius.cosh() - 1.0)).acosh();
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            GroupElement::Mobius(Mobius::rotation(theta).mul(&Mobius::dilation(r)))
        }
    }
}
