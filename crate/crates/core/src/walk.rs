//! Step distributions and the seeded random-walk engine.
//!
//! A walk is `w_0 = 1`, `w_n = s_1 ⋯ s_n` with i.i.d. steps `s_i ~ μ`.
//! Locations are built by right multiplication, so each step costs
//! `O(|s_i|)` on the tree.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, GroupElement, SpaceModel};
use crate::rng::trial_rng;

/// Probabilities must sum to one within this tolerance.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Default cap on the support size of an exact convolution.
pub const DEFAULT_CONVOLUTION_CAP: usize = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WalkError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid step distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid walk configuration: {0}")]
    InvalidConfig(String),
    #[error("iteration {a} exceeds the path horizon {horizon}")]
    InsufficientHorizon { a: usize, horizon: usize },
    #[error("convolution support of {size} atoms exceeds the cap of {cap}")]
    SupportExplosion { size: usize, cap: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub element: GroupElement,
    pub probability: f64,
}

/// A finitely supported probability measure μ on the group.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct StepDistribution {
    atoms: Vec<Atom>,
}

impl StepDistribution {
    /// Validates the atoms against the model: canonical, pairwise distinct
    /// elements with probabilities in `(0, 1]` summing to one.
    pub fn new(model: &SpaceModel, atoms: Vec<Atom>) -> Result<Self, WalkError> {
        if atoms.is_empty() {
            return Err(WalkError::InvalidDistribution("empty support".into()));
        }
        let mut seen = BTreeMap::new();
        let mut total = 0.0;
        for (i, atom) in atoms.iter().enumerate() {
            model.validate(&atom.element)?;
            let p = atom.probability;
            if !(p > 0.0 && p <= 1.0) {
                return Err(WalkError::InvalidDistribution(format!(
                    "atom {i} has probability {p} outside (0, 1]"
                )));
            }
            if let Some(j) = seen.insert(atom.element.key(), i) {
                return Err(WalkError::InvalidDistribution(format!(
                    "atoms {j} and {i} are the same element {}",
                    atom.element
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(WalkError::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { atoms })
    }

    pub fn point_mass(model: &SpaceModel, g: GroupElement) -> Result<Self, WalkError> {
        Self::new(
            model,
            vec![Atom {
                element: g,
                probability: 1.0,
            }],
        )
    }

    pub fn uniform(model: &SpaceModel, elements: Vec<GroupElement>) -> Result<Self, WalkError> {
        let p = 1.0 / elements.len() as f64;
        Self::new(
            model,
            elements
                .into_iter()
                .map(|element| Atom {
                    element,
                    probability: p,
                })
                .collect(),
        )
    }

    /// Uniform measure on the model's symmetric generating set.
    pub fn uniform_generators(model: &SpaceModel) -> Result<Self, WalkError> {
        Self::uniform(model, model.generators())
    }

    /// Pólya's walk on the integer line: `+1` with probability `p`, `−1`
    /// with probability `1 − p`.
    pub fn polya(p: f64) -> Result<Self, WalkError> {
        if !(0.5..=1.0).contains(&p) {
            return Err(WalkError::InvalidDistribution(format!(
                "Pólya parameter {p} outside [1/2, 1]"
            )));
        }
        let line = SpaceModel::integer_line();
        let mut atoms = vec![Atom {
            element: GroupElement::Translation(1),
            probability: p,
        }];
        if p < 1.0 {
            atoms.push(Atom {
                element: GroupElement::Translation(-1),
                probability: 1.0 - p,
            });
        }
        Self::new(&line, atoms)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn probability_of(&self, g: &GroupElement) -> f64 {
        let key = g.key();
        self.atoms
            .iter()
            .filter(|a| a.element.key() == key)
            .map(|a| a.probability)
            .sum()
    }

    /// `μ̌(g) = μ(g⁻¹)`.
    pub fn reflected(&self) -> StepDistribution {
        StepDistribution {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    element: a.element.inverse(),
                    probability: a.probability,
                })
                .collect(),
        }
    }

    /// `(μ * ν)(g) = Σ_{ab = g} μ(a) ν(b)`, with atoms in key order.
    pub fn convolution(&self, other: &StepDistribution, cap: usize) -> Result<StepDistribution, WalkError> {
        let mut merged: BTreeMap<_, Atom> = BTreeMap::new();
        for a in &self.atoms {
            for b in &other.atoms {
                let element = a.element.compose(&b.element)?;
                let mass = a.probability * b.probability;
                merged
                    .entry(element.key())
                    .and_modify(|atom| atom.probability += mass)
                    .or_insert(Atom {
                        element,
                        probability: mass,
                    });
                if merged.len() > cap {
                    return Err(WalkError::SupportExplosion {
                        size: merged.len(),
                        cap,
                    });
                }
            }
        }
        Ok(StepDistribution {
            atoms: merged.into_values().collect(),
        })
    }

    /// `μⁿ`, the `n`-fold convolution power (`μ⁰` is the point mass at 1).
    pub fn convolution_power(&self, model: &SpaceModel, n: usize, cap: usize) -> Result<StepDistribution, WalkError> {
        let mut out = StepDistribution::point_mass(model, model.identity())?;
        for _ in 0..n {
            out = out.convolution(self, cap)?;
        }
        Ok(out)
    }

    /// `Σ μ(g) e^{λ|g|}`, exact for finite support.
    pub fn tail_certificate(&self, model: &SpaceModel, lambda: f64) -> Result<f64, WalkError> {
        if !(lambda > 0.0) {
            return Err(WalkError::InvalidConfig(format!(
                "tail exponent must be positive, got {lambda}"
            )));
        }
        let mut sum = 0.0;
        for atom in &self.atoms {
            sum += atom.probability * (lambda * model.norm(&atom.element)?).exp();
        }
        Ok(sum)
    }

    pub fn sampler(&self) -> StepSampler<'_> {
        let weights = self.atoms.iter().map(|a| a.probability);
        StepSampler {
            atoms: &self.atoms,
            index: WeightedIndex::new(weights).expect("validated probabilities"),
        }
    }
}

/// Draws atoms of a [`StepDistribution`].
#[derive(Clone, Debug)]
pub struct StepSampler<'a> {
    atoms: &'a [Atom],
    index: WeightedIndex<f64>,
}

impl<'a> StepSampler<'a> {
    #[inline]
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> &'a GroupElement {
        &self.atoms[self.index.sample(rng)].element
    }
}

/// Model, step distribution, master seed, horizon and iteration `a`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WalkConfig {
    pub model: SpaceModel,
    pub mu: StepDistribution,
    pub seed: u64,
    pub horizon: usize,
    pub iteration: usize,
}

impl WalkConfig {
    pub fn new(model: SpaceModel, mu: StepDistribution, seed: u64, horizon: usize) -> Result<Self, WalkError> {
        let config = Self {
            model,
            mu,
            seed,
            horizon,
            iteration: 1,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_iteration(mut self, a: usize) -> Result<Self, WalkError> {
        self.iteration = a;
        self.validate()?;
        Ok(self)
    }

    pub fn with_horizon(mut self, horizon: usize) -> Result<Self, WalkError> {
        self.horizon = horizon;
        self.validate()?;
        Ok(self)
    }

    pub fn with_mu(mut self, mu: StepDistribution) -> Self {
        self.mu = mu;
        self
    }

    pub fn validate(&self) -> Result<(), WalkError> {
        if self.horizon < 1 {
            return Err(WalkError::InvalidConfig("horizon must be at least 1".into()));
        }
        if self.iteration < 1 {
            return Err(WalkError::InvalidConfig("iteration must be at least 1".into()));
        }
        for atom in self.mu.atoms() {
            self.model.validate(&atom.element)?;
        }
        Ok(())
    }

    /// A walker on the stream of trial `trial`.
    pub fn walker(&self, trial: u64) -> Walker<'_> {
        Walker::new(&self.model, self.mu.sampler(), self.seed, trial)
    }
}

/// Incremental sample path: holds only the current location.
pub struct Walker<'a> {
    sampler: StepSampler<'a>,
    rng: ChaCha8Rng,
    location: GroupElement,
    time: usize,
}

impl<'a> Walker<'a> {
    pub fn new(model: &SpaceModel, sampler: StepSampler<'a>, seed: u64, trial: u64) -> Self {
        Self {
            sampler,
            rng: trial_rng(seed, trial),
            location: model.identity(),
            time: 0,
        }
    }

    /// Draws the next step and returns it; the location becomes
    /// `w_{n+1} = w_n s_{n+1}`.
    #[inline]
    pub fn step(&mut self) -> &'a GroupElement {
        let s = self.sampler.sample(&mut self.rng);
        self.location
            .mul_assign_right(s)
            .expect("steps validated against the model");
        self.time += 1;
        s
    }

    /// Advances to time `target` (no-op if already there).
    pub fn advance_to(&mut self, target: usize) -> &GroupElement {
        while self.time < target {
            self.step();
        }
        &self.location
    }

    pub fn location(&self) -> &GroupElement {
        &self.location
    }

    pub fn time(&self) -> usize {
        self.time
    }
}

/// A realization `w_0 = 1, w_1, …, w_n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplePath {
    pub locations: Vec<GroupElement>,
    pub seed: u64,
    pub trial: u64,
}

impl SamplePath {
    /// Number of steps `n` (one less than the number of locations for a
    /// raw path).
    pub fn horizon(&self) -> usize {
        self.locations.len().saturating_sub(1)
    }

    /// `s_i = w_{i−1}⁻¹ w_i` for `i = 1, …, n`.
    pub fn steps(&self) -> Result<Vec<GroupElement>, WalkError> {
        self.locations
            .windows(2)
            .map(|pair| Ok(pair[0].inverse().compose(&pair[1])?))
            .collect()
    }
}

/// Sample path of trial 0.
pub fn sample_path(config: &WalkConfig) -> SamplePath {
    sample_path_for_trial(config, 0)
}

pub fn sample_path_for_trial(config: &WalkConfig, trial: u64) -> SamplePath {
    let mut walker = config.walker(trial);
    let mut locations = Vec::with_capacity(config.horizon + 1);
    locations.push(walker.location().clone());
    for _ in 0..config.horizon {
        walker.step();
        locations.push(walker.location().clone());
    }
    SamplePath {
        locations,
        seed: config.seed,
        trial,
    }
}

/// The `a`-iterated walk `w_a, w_2a, …` of a raw path. `w_0` is dropped,
/// so index `i − 1` of the result holds `w_{ai}`.
pub fn iterate(path: &SamplePath, a: usize) -> Result<SamplePath, WalkError> {
    if a < 1 {
        return Err(WalkError::InvalidConfig("iteration must be at least 1".into()));
    }
    let horizon = path.horizon();
    if a > horizon {
        return Err(WalkError::InsufficientHorizon { a, horizon });
    }
    Ok(SamplePath {
        locations: path.locations.iter().skip(a).step_by(a).cloned().collect(),
        seed: path.seed,
        trial: path.trial,
    })
}

/// `n = a·i(n) + r(n)` with `0 ≤ r(n) ≤ a − 1`.
pub fn decompose(n: usize, a: usize) -> (usize, usize) {
    (n / a, n % a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Word;

    fn word(s: &str) -> GroupElement {
        GroupElement::Word(Word::parse(s).unwrap())
    }

    fn f2() -> SpaceModel {
        SpaceModel::free_group(2).unwrap()
    }

    #[test]
    fn validation() {
        let m = f2();
        let dup = vec![
            Atom { element: word("a"), probability: 0.5 },
            Atom { element: word("a"), probability: 0.5 },
        ];
        assert!(StepDistribution::new(&m, dup).is_err());
        let short = vec![Atom { element: word("a"), probability: 0.5 }];
        assert!(StepDistribution::new(&m, short).is_err());
        let zero = vec![
            Atom { element: word("a"), probability: 1.0 },
            Atom { element: word("b"), probability: 0.0 },
        ];
        assert!(StepDistribution::new(&m, zero).is_err());
        assert!(StepDistribution::point_mass(&m, GroupElement::Translation(1)).is_err());
        assert!(StepDistribution::polya(0.4).is_err());
    }

    #[test]
    fn point_mass_path() {
        let m = f2();
        let mu = StepDistribution::point_mass(&m, word("a")).unwrap();
        let config = WalkConfig::new(m, mu, 1, 5).unwrap();
        let path = sample_path(&config);
        let expected: Vec<_> = (0..=5).map(|k| word("a").pow(k)).collect();
        assert_eq!(path.locations, expected);
    }

    #[test]
    fn polya_p_one_goes_straight() {
        let config = WalkConfig::new(
            SpaceModel::integer_line(),
            StepDistribution::polya(1.0).unwrap(),
            3,
            40,
        )
        .unwrap();
        let path = sample_path(&config);
        assert_eq!(path.locations[40], GroupElement::Translation(40));
    }

    #[test]
    fn steps_lie_in_support_and_reconstruct() {
        let m = f2();
        let mu = StepDistribution::uniform_generators(&m).unwrap();
        let config = WalkConfig::new(m, mu.clone(), 11, 200).unwrap();
        let path = sample_path_for_trial(&config, 5);
        let steps = path.steps().unwrap();
        assert_eq!(steps.len(), 200);
        let mut w = m.identity();
        for (i, s) in steps.iter().enumerate() {
            assert!(mu.probability_of(s) > 0.0);
            w.mul_assign_right(s).unwrap();
            assert_eq!(w, path.locations[i + 1]);
        }
        assert_eq!(sample_path_for_trial(&config, 5), path);
        assert_ne!(sample_path_for_trial(&config, 6), path);
    }

    #[test]
    fn reflection() {
        let m = f2();
        let pm = StepDistribution::point_mass(&m, word("a")).unwrap();
        assert_eq!(pm.reflected().atoms()[0].element, word("A"));
        let uniform = StepDistribution::uniform_generators(&m).unwrap();
        for atom in uniform.atoms() {
            assert_eq!(uniform.reflected().probability_of(&atom.element), 0.25);
        }
        let skew = StepDistribution::new(
            &m,
            vec![
                Atom { element: word("a"), probability: 0.7 },
                Atom { element: word("b"), probability: 0.3 },
            ],
        )
        .unwrap();
        let r = skew.reflected();
        assert_eq!(r.probability_of(&word("A")), 0.7);
        assert_eq!(r.probability_of(&word("B")), 0.3);
        assert_eq!(r.reflected(), skew);
    }

    #[test]
    fn iteration_and_decomposition() {
        let m = f2();
        let mu = StepDistribution::uniform_generators(&m).unwrap();
        let config = WalkConfig::new(m, mu, 2, 10).unwrap();
        let path = sample_path(&config);
        let once = iterate(&path, 1).unwrap();
        assert_eq!(once.locations, path.locations[1..].to_vec());
        let twice = iterate(&path, 2).unwrap();
        let expected: Vec<_> = [2, 4, 6, 8, 10].iter().map(|&i| path.locations[i].clone()).collect();
        assert_eq!(twice.locations, expected);
        assert_eq!(
            iterate(&path, 11),
            Err(WalkError::InsufficientHorizon { a: 11, horizon: 10 })
        );
        assert_eq!(decompose(7, 3), (2, 1));
        for n in 0..50 {
            for a in 1..7 {
                let (i, r) = decompose(n, a);
                assert_eq!(a * i + r, n);
                assert!(r < a);
            }
        }
    }

    #[test]
    fn tail_certificates() {
        let m = f2();
        let id = StepDistribution::point_mass(&m, m.identity()).unwrap();
        assert_eq!(id.tail_certificate(&m, 3.0).unwrap(), 1.0);
        let mu = StepDistribution::uniform_generators(&m).unwrap();
        let e = std::f64::consts::E;
        assert!((mu.tail_certificate(&m, 1.0).unwrap() - 4.0 * 0.25 * e).abs() < 1e-12);
        let mu2 = mu.convolution(&mu, DEFAULT_CONVOLUTION_CAP).unwrap();
        let two = mu2.tail_certificate(&m, 1.0).unwrap();
        // 4 of 16 products cancel to the identity, 12 have length 2
        assert!((two - (0.25 + 0.75 * e * e)).abs() < 1e-12);
        assert!(two <= mu.tail_certificate(&m, 1.0).unwrap().powi(2));
        assert!(mu.tail_certificate(&m, 0.0).is_err());
    }

    #[test]
    fn convolutions() {
        let m = f2();
        let mu = StepDistribution::uniform_generators(&m).unwrap();
        let id = StepDistribution::point_mass(&m, m.identity()).unwrap();
        let same = mu.convolution(&id, DEFAULT_CONVOLUTION_CAP).unwrap();
        for atom in mu.atoms() {
            assert_eq!(same.probability_of(&atom.element), atom.probability);
        }
        let mu2 = mu.convolution(&mu, DEFAULT_CONVOLUTION_CAP).unwrap();
        assert_eq!(mu2.probability_of(&m.identity()), 4.0 / 16.0);
        let total: f64 = mu2.atoms().iter().map(|a| a.probability).sum();
        assert!((total - 1.0).abs() < 1e-15);

        let line = SpaceModel::integer_line();
        let simple = StepDistribution::polya(0.5).unwrap();
        let sq = simple.convolution(&simple, DEFAULT_CONVOLUTION_CAP).unwrap();
        assert_eq!(sq.probability_of(&GroupElement::Translation(0)), 0.5);
        assert_eq!(sq.probability_of(&GroupElement::Translation(2)), 0.25);
        assert_eq!(sq.probability_of(&GroupElement::Translation(-2)), 0.25);
        // 2^{-2n} binom(2n, n) at n = 1
        assert_eq!(sq.probability_of(&GroupElement::Translation(0)), 2.0 / 4.0);
        let cube = sq.convolution_power(&line, 0, 8).unwrap();
        assert_eq!(cube.atoms().len(), 1);
        assert!(matches!(
            mu.convolution_power(&m, 4, 20),
            Err(WalkError::SupportExplosion { .. })
        ));
    }

    #[test]
    fn serde_roundtrip() {
        let m = f2();
        let mu = StepDistribution::uniform_generators(&m).unwrap();
        let text = serde_json::to_string(&mu).unwrap();
        assert!(text.contains("\"element\":\"A\""));
        let atoms: Vec<Atom> = serde_json::from_str(&text).unwrap();
        assert_eq!(StepDistribution::new(&m, atoms).unwrap(), mu);
    }
}
