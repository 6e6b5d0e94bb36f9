//! Orientation-preserving isometries of the upper half-plane as real 2×2
//! matrices of unit determinant acting by `z ↦ (az + b) / (cz + d)`.

use super::GeometryError;

/// Determinant tolerance accepted for a valid element.
pub const DET_TOLERANCE: f64 = 1e-9;

/// A point `x + iy` of the upper half-plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfPlanePoint {
    pub x: f64,
    pub y: f64,
}

impl HalfPlanePoint {
    /// The basepoint `i`.
    pub const BASE: HalfPlanePoint = HalfPlanePoint { x: 0.0, y: 1.0 };

    pub fn new(x: f64, y: f64) -> Result<Self, GeometryError> {
        if !(y > 0.0) || !x.is_finite() || !y.is_finite() {
            return Err(GeometryError::OffHalfPlane { x, y });
        }
        Ok(Self { x, y })
    }

    /// `arccosh(1 + |z − w|² / (2 Im z Im w))`, evaluated as
    /// `2 asinh(|z − w| / (2 sqrt(Im z Im w)))` for accuracy at short range.
    pub fn distance(&self, other: &HalfPlanePoint) -> Result<f64, GeometryError> {
        for p in [self, other] {
            if !(p.y > 0.0) {
                return Err(GeometryError::OffHalfPlane { x: p.x, y: p.y });
            }
        }
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let chord = dx.hypot(dy);
        Ok(2.0 * (chord / (2.0 * (self.y * other.y).sqrt())).asinh())
    }
}

/// Row-major `[a, b, c, d]` with `ad − bc = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mobius {
    m: [f64; 4],
}

impl Mobius {
    pub const IDENTITY: Mobius = Mobius {
        m: [1.0, 0.0, 0.0, 1.0],
    };

    /// Accepts a matrix whose determinant is within [`DET_TOLERANCE`] of 1
    /// and rescales it to determinant exactly 1 (up to rounding).
    pub fn new(m: [f64; 4]) -> Result<Self, GeometryError> {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(GeometryError::InvalidElement(format!(
                "non-finite matrix entry in {m:?}"
            )));
        }
        let det = m[0] * m[3] - m[1] * m[2];
        if (det - 1.0).abs() > DET_TOLERANCE {
            return Err(GeometryError::InvalidElement(format!(
                "determinant {det} is not 1"
            )));
        }
        Ok(Self::renormalized(m))
    }

    fn renormalized(m: [f64; 4]) -> Self {
        let det = m[0] * m[3] - m[1] * m[2];
        let s = det.sqrt();
        Mobius {
            m: [m[0] / s, m[1] / s, m[2] / s, m[3] / s],
        }
    }

    /// Hyperbolic translation of length `length` along the imaginary axis.
    pub fn dilation(length: f64) -> Self {
        let h = (length / 2.0).exp();
        Mobius {
            m: [h, 0.0, 0.0, 1.0 / h],
        }
    }

    /// Hyperbolic translation of length `length` along the unit circle
    /// (the geodesic through `i` perpendicular to the imaginary axis).
    pub fn boost(length: f64) -> Self {
        let (s, c) = ((length / 2.0).sinh(), (length / 2.0).cosh());
        Mobius { m: [c, s, s, c] }
    }

    /// Rotation about `i` by angle `angle`.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = (angle / 2.0).sin_cos();
        Mobius { m: [c, s, -s, c] }
    }

    pub fn entries(&self) -> [f64; 4] {
        self.m
    }

    pub fn determinant(&self) -> f64 {
        self.m[0] * self.m[3] - self.m[1] * self.m[2]
    }

    pub fn mul(&self, rhs: &Mobius) -> Mobius {
        let [a, b, c, d] = self.m;
        let [e, f, g, h] = rhs.m;
        Self::renormalized([a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h])
    }

    pub fn inverse(&self) -> Mobius {
        let [a, b, c, d] = self.m;
        Mobius { m: [d, -b, -c, a] }
    }

    pub fn apply(&self, z: HalfPlanePoint) -> Result<HalfPlanePoint, GeometryError> {
        let [a, b, c, d] = self.m;
        // (a z + b) / (c z + d) with z = x + iy
        let (nr, ni) = (a * z.x + b, a * z.y);
        let (dr, di) = (c * z.x + d, c * z.y);
        let den = dr * dr + di * di;
        HalfPlanePoint::new((nr * dr + ni * di) / den, (ni * dr - nr * di) / den)
    }

    /// `d(i, g·i)`. For unit determinant, `cosh d − 1 = ((a − d)² + (b + c)²) / 2`.
    pub fn displacement(&self) -> f64 {
        let [a, b, c, d] = self.m;
        let q = (a - d).hypot(b + c);
        2.0 * (q / 2.0).asinh()
    }

    /// `±M` represent the same isometry; pick the sign making the first
    /// non-negligible entry positive.
    pub fn canonical(&self) -> Mobius {
        let lead = self
            .m
            .iter()
            .copied()
            .find(|x| x.abs() > 1e-12)
            .unwrap_or(1.0);
        if lead < 0.0 {
            Mobius {
                m: self.m.map(|x| -x),
            }
        } else {
            *self
        }
    }
}
