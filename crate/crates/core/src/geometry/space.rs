use nalgebra::DVector;

use super::GeometryError;

/// A point of the ambient space. Coordinates are stored densely.
pub type Point = DVector<f64>;

/// Builds a [`Point`] from a coordinate slice.
pub fn point(coords: &[f64]) -> Point {
    DVector::from_column_slice(coords)
}

/// Finite-dimensional `lp` space with `1 < p < inf`.
///
/// These spaces are uniformly convex, so metric projections onto closed
/// convex sets are single valued. `p = 1` and `p = inf` are rejected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpSpace {
    dim: usize,
    p: f64,
}

impl LpSpace {
    pub fn new(dim: usize, p: f64) -> Result<Self, GeometryError> {
        if dim == 0 {
            return Err(GeometryError::ZeroDimension);
        }
        if !(p.is_finite() && p > 1.0) {
            return Err(GeometryError::InvalidExponent(p));
        }
        Ok(Self { dim, p })
    }

    /// Euclidean space of the given dimension.
    pub fn euclidean(dim: usize) -> Result<Self, GeometryError> {
        Self::new(dim, 2.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn is_euclidean(&self) -> bool {
        self.p == 2.0
    }

    /// Hölder conjugate exponent `q` with `1/p + 1/q = 1`.
    pub fn conjugate(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn check(&self, x: &Point) -> Result<(), GeometryError> {
        if x.len() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `(sum |x_i|^p)^(1/p)`.
    pub fn norm(&self, x: &Point) -> Result<f64, GeometryError> {
        self.check(x)?;
        Ok(self.norm_unchecked(x))
    }

    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64, GeometryError> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.dist_unchecked(x, y))
    }

    pub(crate) fn norm_unchecked(&self, x: &Point) -> f64 {
        lp_norm(x.as_slice(), self.p)
    }

    pub(crate) fn dist_unchecked(&self, x: &Point, y: &Point) -> f64 {
        self.norm_unchecked(&(x - y))
    }
}

/// lp norm of a slice, scaled by the largest magnitude to avoid overflow.
pub(crate) fn lp_norm(x: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        return x.iter().map(|v| v * v).sum::<f64>().sqrt();
    }
    let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let sum: f64 = x.iter().map(|v| (v.abs() / scale).powf(p)).sum();
    scale * sum.powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_exponents() {
        assert!(matches!(LpSpace::new(2, 1.0), Err(GeometryError::InvalidExponent(_))));
        assert!(LpSpace::new(2, f64::INFINITY).is_err());
        assert!(LpSpace::new(2, 0.5).is_err());
        assert!(LpSpace::new(2, f64::NAN).is_err());
        assert!(matches!(LpSpace::new(0, 2.0), Err(GeometryError::ZeroDimension)));
        assert!(LpSpace::new(3, 1.0001).is_ok());
    }

    #[test]
    fn norm_examples() {
        let e = LpSpace::euclidean(2).unwrap();
        assert_eq!(e.norm(&point(&[3.0, 4.0])).unwrap(), 5.0);
        for p in [1.5, 2.0, 3.0, 7.0] {
            let s = LpSpace::new(4, p).unwrap();
            assert_eq!(s.norm(&Point::zeros(4)).unwrap(), 0.0);
        }
        let s4 = LpSpace::new(2, 4.0).unwrap();
        let v = s4.norm(&point(&[1.0, 1.0])).unwrap();
        // 2^(1/4) = 1.189207115002721...
        assert!((v - 1.189_207_115_002_721).abs() < 1e-12);
    }

    #[test]
    fn norm_dimension_mismatch() {
        let s = LpSpace::new(3, 2.5).unwrap();
        assert_eq!(
            s.norm(&point(&[1.0, 2.0])),
            Err(GeometryError::DimensionMismatch { expected: 3, got: 2 })
        );
    }

    #[test]
    fn norm_handles_large_magnitudes() {
        let s = LpSpace::new(2, 3.0).unwrap();
        let v = s.norm(&point(&[1e300, 1e300])).unwrap();
        assert!((v / 1e300 - 2f64.powf(1.0 / 3.0)).abs() < 1e-12);
    }
}
