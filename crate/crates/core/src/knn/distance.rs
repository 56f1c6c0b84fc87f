use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::sparse::{SparseVec, UnitVector};

/// Largest possible distance between nonnegative unit vectors.
pub const MAX_DISTANCE: f64 = 0.5;

/// Angle between two unit vectors divided by π.
///
/// Evaluated as `2·atan2(|u - v|, |u + v|)`, which equals `arccos(u·v)` but
/// stays accurate for nearly parallel vectors. Vectors with disjoint supports
/// are exactly [`MAX_DISTANCE`] apart.
pub fn angular_distance(u: &UnitVector, v: &UnitVector) -> f64 {
    let (a, b) = (u.as_sparse(), v.as_sparse());
    if !a.supports_overlap(b) {
        return MAX_DISTANCE;
    }
    let (diff, sum) = a.diff_sum_sq(b);
    (2.0 * diff.sqrt().atan2(sum.sqrt()) / PI).min(MAX_DISTANCE)
}

/// [`angular_distance`] on raw vectors, checking they are nonnegative and of
/// unit length within `1e-9`.
pub fn angular_distance_checked(u: &SparseVec, v: &SparseVec) -> Result<f64> {
    let check = |x: &SparseVec| {
        UnitVector::try_from_unit(x.clone(), 1e-9)
            .map_err(|e| Error::Contract(format!("angular distance: {e}")))
    };
    Ok(angular_distance(&check(u)?, &check(v)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(pairs: &[(u32, f64)]) -> UnitVector {
        UnitVector::normalize(&SparseVec::from_sorted(pairs.iter().copied()).unwrap()).unwrap()
    }

    #[test]
    fn examples() {
        let u = unit(&[(0, 1.0), (3, 2.0)]);
        assert_eq!(angular_distance(&u, &u), 0.0);
        assert_eq!(angular_distance(&unit(&[(0, 1.0)]), &unit(&[(1, 1.0)])), 0.5);
        // u·v = √2/2
        let d = angular_distance(&unit(&[(0, 1.0)]), &unit(&[(0, 1.0), (1, 1.0)]));
        assert!((d - 0.25).abs() < 1e-15);
    }

    #[test]
    fn agrees_with_arccos_form() {
        let a = unit(&[(0, 0.3), (2, 1.7), (5, 0.2)]);
        let b = unit(&[(2, 0.4), (5, 2.5), (7, 1.0)]);
        let dot = a.as_sparse().dot(b.as_sparse()).clamp(0.0, 1.0);
        assert!((angular_distance(&a, &b) - dot.acos() / PI).abs() < 1e-12);
    }

    #[test]
    fn checked_rejects_non_unit() {
        let v = SparseVec::from_sorted([(0, 2.0)]).unwrap();
        let u = SparseVec::from_sorted([(0, 1.0)]).unwrap();
        assert_eq!(angular_distance_checked(&v, &u).unwrap_err().exit_code(), 4);
        assert_eq!(angular_distance_checked(&u, &u).unwrap(), 0.0);
    }
}
