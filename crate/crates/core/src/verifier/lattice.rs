//! Exact laws of integer-valued processes with i.i.d. increments.

use serde::{Deserialize, Serialize};

use super::VerifierError;
use crate::walk::MASS_TOLERANCE;

/// Default cap on the number of lattice sites of a propagated law.
pub const DEFAULT_STATE_CAP: usize = 1 << 22;

/// A probability law on `offset, offset + 1, …, offset + len − 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeLaw {
    offset: i64,
    probs: Vec<f64>,
}

impl LatticeLaw {
    pub fn point_mass(at: i64) -> Self {
        Self { offset: at, probs: vec![1.0] }
    }

    /// Builds a law from `(value, probability)` pairs, merging repeats.
    pub fn from_atoms(atoms: &[(i64, f64)]) -> Result<Self, VerifierError> {
        if atoms.is_empty() {
            return Err(VerifierError::InvalidInput("empty law".into()));
        }
        let lo = atoms.iter().map(|a| a.0).min().unwrap();
        let hi = atoms.iter().map(|a| a.0).max().unwrap();
        let mut probs = vec![0.0; (hi - lo + 1) as usize];
        let mut total = 0.0;
        for &(v, p) in atoms {
            if !(p > 0.0 && p <= 1.0) {
                return Err(VerifierError::InvalidInput(format!("probability {p} outside (0, 1]")));
            }
            probs[(v - lo) as usize] += p;
            total += p;
        }
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(VerifierError::InvalidInput(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { offset: lo, probs })
    }

    pub fn support(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(move |(i, &p)| (self.offset + i as i64, p))
    }

    pub fn probability(&self, value: i64) -> f64 {
        let i = value - self.offset;
        if i < 0 {
            return 0.0;
        }
        self.probs.get(i as usize).copied().unwrap_or(0.0)
    }

    pub fn expectation(&self, f: impl Fn(i64) -> f64) -> f64 {
        self.support().map(|(v, p)| p * f(v)).sum()
    }

    pub fn probability_where(&self, pred: impl Fn(i64) -> bool) -> f64 {
        self.support().filter(|&(v, _)| pred(v)).map(|(_, p)| p).sum()
    }

    /// `(offset, F)` with `F[i] = P(X ≤ offset + i)`.
    pub fn cdf_table(&self) -> (i64, Vec<f64>) {
        let mut acc = 0.0;
        let cdf = self
            .probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        (self.offset, cdf)
    }

    /// The law of `|X|`.
    pub fn abs(&self) -> LatticeLaw {
        let atoms: Vec<_> = self.support().map(|(v, p)| (v.abs(), p)).collect();
        let lo = atoms.iter().map(|a| a.0).min().unwrap();
        let hi = atoms.iter().map(|a| a.0).max().unwrap();
        let mut probs = vec![0.0; (hi - lo + 1) as usize];
        for (v, p) in atoms {
            probs[(v - lo) as usize] += p;
        }
        LatticeLaw { offset: lo, probs }
    }

    /// The law of `X + Δ` for independent `Δ` with the given atoms.
    pub fn step(&self, increments: &[(i64, f64)], cap: usize) -> Result<LatticeLaw, VerifierError> {
        let lo = increments.iter().map(|a| a.0).min().unwrap();
        let hi = increments.iter().map(|a| a.0).max().unwrap();
        let len = self.probs.len() + (hi - lo) as usize;
        if len > cap {
            return Err(VerifierError::StateOverflow { states: len, cap });
        }
        let mut probs = vec![0.0; len];
        for (i, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for &(delta, q) in increments {
                probs[i + (delta - lo) as usize] += p * q;
            }
        }
        Ok(LatticeLaw { offset: self.offset + lo, probs })
    }
}

/// A process `Z_0 = initial`, `Z_{n+1} = Z_n + Δ_{n+1}` with i.i.d.
/// increments, up to `horizon`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProcess {
    pub increments: Vec<(i64, f64)>,
    #[serde(default)]
    pub initial: i64,
    pub horizon: usize,
}

impl SyntheticProcess {
    /// `±1` increments with `P(+1) = p`.
    pub fn polya(p: f64, horizon: usize) -> Self {
        let mut increments = vec![(1, p)];
        if p < 1.0 {
            increments.push((-1, 1.0 - p));
        }
        Self { increments, initial: 0, horizon }
    }

    pub fn constant(value: i64, horizon: usize) -> Self {
        Self { increments: vec![(0, 1.0)], initial: value, horizon }
    }

    pub fn validate(&self) -> Result<(), VerifierError> {
        LatticeLaw::from_atoms(&self.increments).map(|_| ())
    }

    /// Exact laws of `Z_0, …, Z_horizon`.
    pub fn laws(&self, cap: usize) -> Result<Vec<LatticeLaw>, VerifierError> {
        self.validate()?;
        let mut out = Vec::with_capacity(self.horizon + 1);
        out.push(LatticeLaw::point_mass(self.initial));
        for n in 0..self.horizon {
            let next = out[n].step(&self.increments, cap)?;
            out.push(next);
        }
        Ok(out)
    }

    /// `E(e^{−bΔ})`.
    pub fn increment_mgf(&self, b: f64) -> f64 {
        self.increments.iter().map(|&(d, p)| p * (-b * d as f64).exp()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn propagation_matches_binomial() {
        let laws = SyntheticProcess::polya(0.5, 4).laws(DEFAULT_STATE_CAP).unwrap();
        assert_eq!(laws[4].probability(0), 6.0 / 16.0);
        assert_eq!(laws[4].probability(4), 1.0 / 16.0);
        assert_eq!(laws[4].probability(1), 0.0);
        assert_eq!(laws[4].abs().probability(2), 8.0 / 16.0);
        let total: f64 = laws[4].support().map(|a| a.1).sum();
        assert_eq!(total, 1.0);
    }

    #[test]
    fn cap_is_enforced() {
        let p = SyntheticProcess { increments: vec![(-5, 0.5), (5, 0.5)], initial: 0, horizon: 10 };
        assert!(matches!(p.laws(30), Err(VerifierError::StateOverflow { .. })));
        assert!(LatticeLaw::from_atoms(&[(0, 0.5)]).is_err());
    }
}
