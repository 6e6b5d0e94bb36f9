//! Pointed metric spaces with isometry groups, and the coarse-geometric
//! primitives evaluated on orbit points: distance, Gromov product,
//! horofunctions, shadows, four-point defect and quasi-geodesic constants.
//!
//! Three models are supported:
//!
//! * the integer line `ℤ ⊂ ℝ` acted on by translations (basepoint 0),
//! * the Cayley tree of the free group `F_k` acted on by left
//!   multiplication (basepoint the identity vertex),
//! * the upper half-plane acted on by `SL(2, ℝ)` (basepoint `i`).
//!
//! All quantities are computed on orbit points `g·x0`, so an element `g`
//! stands for the point `g·x0` throughout.

pub mod mobius;
pub mod word;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use mobius::{HalfPlanePoint, Mobius};
pub use word::Word;

/// Tolerance used for every half-plane identity.
pub const HALF_PLANE_TOLERANCE: f64 = 1e-9;

/// Default hyperbolicity constant for the half-plane. The empirical
/// four-point supremum on random quadruples is about `ln 2 ≈ 0.6931`.
pub const DEFAULT_HALF_PLANE_DELTA: f64 = 0.7;

/// Grid resolution of [`SpaceModel::quasi_geodesic_constant`].
pub const QUASI_GEODESIC_RESOLUTION: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("element {element} does not belong to model {model}")]
    ModelMismatch { model: String, element: String },
    #[error("invalid element: {0}")]
    InvalidElement(String),
    #[error("point ({x}, {y}) is not in the upper half-plane")]
    OffHalfPlane { x: f64, y: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("quasi-geodesic horizon must be at least 2, got {0}")]
    HorizonTooShort(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    IntegerLine,
    FreeGroup { rank: u8 },
    UpperHalfPlane,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::IntegerLine => f.write_str("integer_line"),
            ModelKind::FreeGroup { rank } => write!(f, "free_group(rank {rank})"),
            ModelKind::UpperHalfPlane => f.write_str("upper_half_plane"),
        }
    }
}

/// A pointed metric space with a group of isometries and the hyperbolicity
/// constant the verifier assumes for it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpaceModel {
    #[serde(flatten)]
    kind: ModelKind,
    delta: f64,
}

/// An isometry in the canonical representation of its model.
#[derive(Clone, Debug, PartialEq)]
pub enum GroupElement {
    Translation(i64),
    Word(Word),
    Mobius(Mobius),
}

/// Total order on elements, used to merge atoms of a distribution.
/// Matrices are compared after sign canonicalization on a `1e-9` grid.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementKey {
    Translation(i64),
    Word(Vec<u8>),
    Matrix([i64; 4]),
}

impl GroupElement {
    pub fn key(&self) -> ElementKey {
        match self {
            GroupElement::Translation(t) => ElementKey::Translation(*t),
            GroupElement::Word(w) => ElementKey::Word(w.letters().to_vec()),
            GroupElement::Mobius(m) => {
                ElementKey::Matrix(m.canonical().entries().map(|x| (x * 1e9).round() as i64))
            }
        }
    }

    pub fn inverse(&self) -> GroupElement {
        match self {
            GroupElement::Translation(t) => GroupElement::Translation(-t),
            GroupElement::Word(w) => GroupElement::Word(w.inverse()),
            GroupElement::Mobius(m) => GroupElement::Mobius(m.inverse()),
        }
    }

    /// `self · rhs`.
    pub fn compose(&self, rhs: &GroupElement) -> Result<GroupElement, GeometryError> {
        let mut out = self.clone();
        out.mul_assign_right(rhs)?;
        Ok(out)
    }

    /// `self ← self · rhs`; words cancel at the seam only, matrices are
    /// renormalized to unit determinant.
    #[inline]
    pub fn mul_assign_right(&mut self, rhs: &GroupElement) -> Result<(), GeometryError> {
        match (self, rhs) {
            (GroupElement::Translation(a), GroupElement::Translation(b)) => *a += b,
            (GroupElement::Word(a), GroupElement::Word(b)) => a.mul_assign_right(b),
            (GroupElement::Mobius(a), GroupElement::Mobius(b)) => *a = a.mul(b),
            (lhs, rhs) => {
                return Err(GeometryError::InvalidElement(format!(
                    "cannot compose {lhs} with {rhs}"
                )))
            }
        }
        Ok(())
    }

    pub fn pow(&self, exponent: i64) -> GroupElement {
        match self {
            GroupElement::Translation(t) => GroupElement::Translation(t * exponent),
            GroupElement::Word(w) => GroupElement::Word(w.pow(exponent)),
            GroupElement::Mobius(m) => {
                let base = if exponent < 0 { m.inverse() } else { *m };
                let mut out = Mobius::IDENTITY;
                for _ in 0..exponent.unsigned_abs() {
                    out = out.mul(&base);
                }
                GroupElement::Mobius(out)
            }
        }
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupElement::Translation(t) => write!(f, "{t}"),
            GroupElement::Word(w) => write!(f, "{w}"),
            GroupElement::Mobius(m) => {
                let [a, b, c, d] = m.entries();
                write!(f, "[{a}, {b}, {c}, {d}]")
            }
        }
    }
}

impl Serialize for GroupElement {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            GroupElement::Translation(t) => serializer.serialize_i64(*t),
            GroupElement::Word(w) => serializer.serialize_str(&w.to_string()),
            GroupElement::Mobius(m) => m.entries().serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for GroupElement {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Integer(i64),
            Text(String),
            Matrix([f64; 4]),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Integer(t) => Ok(GroupElement::Translation(t)),
            Raw::Text(s) => Word::parse(&s)
                .map(GroupElement::Word)
                .map_err(serde::de::Error::custom),
            Raw::Matrix(m) => Mobius::new(m)
                .map(GroupElement::Mobius)
                .map_err(serde::de::Error::custom),
        }
    }
}

impl SpaceModel {
    pub fn integer_line() -> Self {
        Self {
            kind: ModelKind::IntegerLine,
            delta: 0.0,
        }
    }

    pub fn free_group(rank: u8) -> Result<Self, GeometryError> {
        if !(2..=word::MAX_RANK).contains(&rank) {
            return Err(GeometryError::InvalidModel(format!(
                "free group rank must be in 2..={}, got {rank}",
                word::MAX_RANK
            )));
        }
        Ok(Self {
            kind: ModelKind::FreeGroup { rank },
            delta: 0.0,
        })
    }

    pub fn upper_half_plane(delta: f64) -> Result<Self, GeometryError> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(GeometryError::InvalidModel(format!(
                "hyperbolicity constant must be a nonnegative real, got {delta}"
            )));
        }
        Ok(Self {
            kind: ModelKind::UpperHalfPlane,
            delta,
        })
    }

    pub fn from_kind(kind: ModelKind, delta: Option<f64>) -> Result<Self, GeometryError> {
        match kind {
            ModelKind::IntegerLine => Ok(Self::integer_line()),
            ModelKind::FreeGroup { rank } => Self::free_group(rank),
            ModelKind::UpperHalfPlane => {
                Self::upper_half_plane(delta.unwrap_or(DEFAULT_HALF_PLANE_DELTA))
            }
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Line and tree distances are integers computed exactly.
    pub fn is_exact(&self) -> bool {
        !matches!(self.kind, ModelKind::UpperHalfPlane)
    }

    /// Slack for comparisons: zero on exact models.
    pub fn tolerance(&self) -> f64 {
        if self.is_exact() {
            0.0
        } else {
            HALF_PLANE_TOLERANCE
        }
    }

    pub fn identity(&self) -> GroupElement {
        match self.kind {
            ModelKind::IntegerLine => GroupElement::Translation(0),
            ModelKind::FreeGroup { .. } => GroupElement::Word(Word::identity()),
            ModelKind::UpperHalfPlane => GroupElement::Mobius(Mobius::IDENTITY),
        }
    }

    /// A symmetric generating set: `±1` on the line, `a_i^{±1}` on the
    /// tree, and on the half-plane two translations of length 2 along the
    /// perpendicular geodesics through `i`, with their inverses.
    pub fn generators(&self) -> Vec<GroupElement> {
        match self.kind {
            ModelKind::IntegerLine => {
                vec![GroupElement::Translation(1), GroupElement::Translation(-1)]
            }
            ModelKind::FreeGroup { rank } => (0..rank)
                .flat_map(|i| {
                    [false, true].map(|inv| GroupElement::Word(Word::generator(i, inv)))
                })
                .collect(),
            ModelKind::UpperHalfPlane => [
                Mobius::boost(2.0),
                Mobius::boost(-2.0),
                Mobius::dilation(2.0),
                Mobius::dilation(-2.0),
            ]
            .into_iter()
            .map(GroupElement::Mobius)
            .collect(),
        }
    }

    pub fn validate(&self, g: &GroupElement) -> Result<(), GeometryError> {
        match (self.kind, g) {
            (ModelKind::IntegerLine, GroupElement::Translation(_)) => Ok(()),
            (ModelKind::FreeGroup { rank }, GroupElement::Word(w)) => match w.max_generator() {
                Some(m) if m >= rank => Err(GeometryError::InvalidElement(format!(
                    "word {w} uses generator {} outside rank {rank}",
                    (b'a' + m) as char
                ))),
                _ => Ok(()),
            },
            (ModelKind::UpperHalfPlane, GroupElement::Mobius(m)) => {
                if (m.determinant() - 1.0).abs() > mobius::DET_TOLERANCE {
                    Err(GeometryError::InvalidElement(format!(
                        "determinant {} is not 1",
                        m.determinant()
                    )))
                } else {
                    Ok(())
                }
            }
            _ => Err(self.mismatch(g)),
        }
    }

    fn mismatch(&self, g: &GroupElement) -> GeometryError {
        GeometryError::ModelMismatch {
            model: self.kind.to_string(),
            element: g.to_string(),
        }
    }

    /// The orbit point `g·x0` in the half-plane.
    pub fn half_plane_point(&self, g: &GroupElement) -> Result<HalfPlanePoint, GeometryError> {
        match (self.kind, g) {
            (ModelKind::UpperHalfPlane, GroupElement::Mobius(m)) => m.apply(HalfPlanePoint::BASE),
            _ => Err(self.mismatch(g)),
        }
    }

    /// `|g| = d(x0, g·x0)`.
    #[inline]
    pub fn norm(&self, g: &GroupElement) -> Result<f64, GeometryError> {
        match (self.kind, g) {
            (ModelKind::IntegerLine, GroupElement::Translation(t)) => Ok(t.unsigned_abs() as f64),
            (ModelKind::FreeGroup { .. }, GroupElement::Word(w)) => Ok(w.len() as f64),
            (ModelKind::UpperHalfPlane, GroupElement::Mobius(m)) => Ok(m.displacement()),
            _ => Err(self.mismatch(g)),
        }
    }

    /// `d(g·x0, h·x0)`.
    #[inline]
    pub fn distance(&self, g: &GroupElement, h: &GroupElement) -> Result<f64, GeometryError> {
        match (self.kind, g, h) {
            (ModelKind::IntegerLine, GroupElement::Translation(a), GroupElement::Translation(b)) => {
                Ok(a.abs_diff(*b) as f64)
            }
            (ModelKind::FreeGroup { .. }, GroupElement::Word(a), GroupElement::Word(b)) => {
                Ok(a.distance(b) as f64)
            }
            (ModelKind::UpperHalfPlane, GroupElement::Mobius(a), GroupElement::Mobius(b)) => {
                Ok(a.inverse().mul(b).displacement())
            }
            _ => Err(if self.validate(g).is_err() {
                self.mismatch(g)
            } else {
                self.mismatch(h)
            }),
        }
    }

    /// `(w, g)_h = ½ d(w, h) + ½ d(g, h) − ½ d(w, g)`, clamped below at 0
    /// to absorb rounding on the half-plane.
    pub fn gromov_product(
        &self,
        w: &GroupElement,
        g: &GroupElement,
        base: &GroupElement,
    ) -> Result<f64, GeometryError> {
        let value = 0.5
            * (self.distance(w, base)? + self.distance(g, base)? - self.distance(w, g)?);
        Ok(value.max(0.0))
    }

    /// `(w, g)_1`; on the tree this is the common prefix length.
    #[inline]
    pub fn gromov_product_at_identity(
        &self,
        w: &GroupElement,
        g: &GroupElement,
    ) -> Result<f64, GeometryError> {
        match (self.kind, w, g) {
            (ModelKind::FreeGroup { .. }, GroupElement::Word(a), GroupElement::Word(b)) => {
                Ok(a.common_prefix_len(b) as f64)
            }
            (ModelKind::IntegerLine, GroupElement::Translation(a), GroupElement::Translation(b)) => {
                let value = a.unsigned_abs() + b.unsigned_abs() - a.abs_diff(*b);
                Ok((value / 2) as f64)
            }
            _ => {
                let value = 0.5 * (self.norm(w)? + self.norm(g)? - self.distance(w, g)?);
                Ok(value.max(0.0))
            }
        }
    }

    /// `ρ_g(w) = −|g| + d(g·x0, w·x0)`.
    pub fn horofunction(&self, g: &GroupElement, w: &GroupElement) -> Result<f64, GeometryError> {
        Ok(self.distance(g, w)? - self.norm(g)?)
    }

    /// `w ∈ S(g, d)`, i.e. `(w, g)_1 ≥ d`.
    pub fn in_shadow(&self, w: &GroupElement, g: &GroupElement, d: f64) -> Result<bool, GeometryError> {
        if d <= 0.0 {
            return Ok(true);
        }
        if d > self.norm(g)? {
            return Ok(false);
        }
        Ok(self.gromov_product_at_identity(w, g)? >= d)
    }

    /// Shadow of radius `r` about `g`: `Shad(g, r) = S(g, |g| − r)`.
    pub fn in_shadow_radius(&self, w: &GroupElement, g: &GroupElement, r: f64) -> Result<bool, GeometryError> {
        self.in_shadow(w, g, self.norm(g)? - r)
    }

    /// `min{(b, d)_a, (c, d)_a} − (b, c)_a`; the space is δ-hyperbolic iff
    /// this never exceeds δ.
    pub fn four_point_defect(
        &self,
        a: &GroupElement,
        b: &GroupElement,
        c: &GroupElement,
        d: &GroupElement,
    ) -> Result<f64, GeometryError> {
        let bd = self.gromov_product(b, d, a)?;
        let cd = self.gromov_product(c, d, a)?;
        let bc = self.gromov_product(b, c, a)?;
        Ok(bd.min(cd) - bc)
    }

    /// Least `C ≥ 1` on a grid of resolution `1e-3` such that
    /// `|n − m| / C − C ≤ d(gⁿx0, gᵐx0) ≤ C|n − m| + C` for all
    /// `0 ≤ n, m ≤ n_max`.
    ///
    /// By equivariance only the displacements `|g^k|`, `0 ≤ k ≤ n_max`,
    /// matter, and both constraints are monotone in `C`.
    pub fn quasi_geodesic_constant(&self, g: &GroupElement, n_max: usize) -> Result<f64, GeometryError> {
        if n_max < 2 {
            return Err(GeometryError::HorizonTooShort(n_max));
        }
        self.validate(g)?;
        let mut displacements = Vec::with_capacity(n_max + 1);
        let mut power = self.identity();
        for _ in 0..=n_max {
            displacements.push(self.norm(&power)?);
            power.mul_assign_right(g)?;
        }
        let feasible = |c: f64| {
            displacements.iter().enumerate().all(|(k, &dk)| {
                let k = k as f64;
                k / c - c <= dk && dk <= c * k + c
            })
        };
        let mut least: f64 = 1.0;
        for (k, &dk) in displacements.iter().enumerate() {
            let k = k as f64;
            let upper = dk / (k + 1.0);
            let lower = 0.5 * (-dk + (dk * dk + 4.0 * k).sqrt());
            least = least.max(upper).max(lower);
        }
        let mut steps = ((least - 1.0) / QUASI_GEODESIC_RESOLUTION - 1e-9).ceil().max(0.0);
        let mut c = 1.0 + steps * QUASI_GEODESIC_RESOLUTION;
        while !feasible(c) {
            steps += 1.0;
            c = 1.0 + steps * QUASI_GEODESIC_RESOLUTION;
        }
        Ok((c / QUASI_GEODESIC_RESOLUTION).round() * QUASI_GEODESIC_RESOLUTION)
    }
}

impl<'de> Deserialize<'de> for SpaceModel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            #[serde(flatten)]
            kind: ModelKind,
            #[serde(default)]
            delta: Option<f64>,
        }
        let raw = Raw::deserialize(deserializer)?;
        SpaceModel::from_kind(raw.kind, raw.delta).map_err(serde::de::Error::custom)
    }
}
