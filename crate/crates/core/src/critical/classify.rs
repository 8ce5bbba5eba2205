use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::Mat2;

const DEGENERATE_DET: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPointKind {
    Saddle,
    StableNode,
    UnstableNode,
    StableSpiral,
    UnstableSpiral,
    CenterLike,
}

impl fmt::Display for FixedPointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FixedPointKind::Saddle => "saddle",
            FixedPointKind::StableNode => "stable-node",
            FixedPointKind::UnstableNode => "unstable-node",
            FixedPointKind::StableSpiral => "stable-spiral",
            FixedPointKind::UnstableSpiral => "unstable-spiral",
            FixedPointKind::CenterLike => "center-like",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointClassification {
    pub kind: FixedPointKind,
    /// Ascending real part.
    pub eigenvalues: [Complex64; 2],
    /// Unit eigenvectors matching `eigenvalues`; `None` for a complex pair.
    pub eigenvectors: Option<[[f64; 2]; 2]>,
}

impl FixedPointClassification {
    /// Eigenvector of the positive eigenvalue of a saddle.
    pub fn unstable_direction(&self) -> Option<[f64; 2]> {
        (self.kind == FixedPointKind::Saddle)
            .then(|| self.eigenvectors.map(|e| e[1]))
            .flatten()
    }

    pub fn stable_direction(&self) -> Option<[f64; 2]> {
        (self.kind == FixedPointKind::Saddle)
            .then(|| self.eigenvectors.map(|e| e[0]))
            .flatten()
    }
}

/// Planar classification from trace, determinant and discriminant.
pub fn classify_fixed_point(j: &Mat2) -> Result<FixedPointClassification> {
    if !j.is_finite() {
        return Err(Error::InvalidParameter("non-finite Jacobian".into()));
    }
    let det = j.det();
    if det.abs() < DEGENERATE_DET {
        return Err(Error::Degenerate { det });
    }
    let tr = j.trace();
    let eigenvalues = j.eigenvalues();
    let disc = tr * tr - 4.0 * det;
    let kind = if det < 0.0 {
        FixedPointKind::Saddle
    } else if disc >= 0.0 {
        if tr < 0.0 {
            FixedPointKind::StableNode
        } else {
            FixedPointKind::UnstableNode
        }
    } else if tr.abs() <= 1e-12 * j.max_abs() {
        FixedPointKind::CenterLike
    } else if tr < 0.0 {
        FixedPointKind::StableSpiral
    } else {
        FixedPointKind::UnstableSpiral
    };
    let eigenvectors = (disc >= 0.0).then(|| {
        [
            j.real_eigenvector(eigenvalues[0].re),
            j.real_eigenvector(eigenvalues[1].re),
        ]
    });
    Ok(FixedPointClassification {
        kind,
        eigenvalues,
        eigenvectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_cases() {
        let s = classify_fixed_point(&Mat2::diag(1.0, -1.0)).unwrap();
        assert_eq!(s.kind, FixedPointKind::Saddle);
        assert_eq!(s.unstable_direction().unwrap().map(f64::abs), [1.0, 0.0]);
        assert_eq!(s.stable_direction().unwrap().map(f64::abs), [0.0, 1.0]);
        let c = classify_fixed_point(&Mat2::new(0.0, 1.0, -1.0, 0.0)).unwrap();
        assert_eq!(c.kind, FixedPointKind::CenterLike);
        assert!(c.eigenvectors.is_none());
        assert_eq!(
            classify_fixed_point(&Mat2::diag(-1.0, -2.0)).unwrap().kind,
            FixedPointKind::StableNode
        );
        assert_eq!(
            classify_fixed_point(&Mat2::diag(1.0, 2.0)).unwrap().kind,
            FixedPointKind::UnstableNode
        );
        assert_eq!(
            classify_fixed_point(&Mat2::new(0.1, 1.0, -1.0, 0.1))
                .unwrap()
                .kind,
            FixedPointKind::UnstableSpiral
        );
        assert_eq!(
            classify_fixed_point(&Mat2::new(-0.1, 1.0, -1.0, -0.1))
                .unwrap()
                .kind,
            FixedPointKind::StableSpiral
        );
        assert!(matches!(
            classify_fixed_point(&Mat2::diag(1.0, 0.0)),
            Err(Error::Degenerate { .. })
        ));
    }
}
