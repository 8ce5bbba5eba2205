//! Minimal 2×2 real linear algebra for flow Jacobians.

use num_complex::Complex64;

/// Row-major 2×2 real matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[0.0; 2]; 2]);

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn diag(a: f64, d: f64) -> Self {
        Mat2([[a, 0.0], [0.0, d]])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    /// Solves `self · x = rhs`; `None` when the matrix is numerically singular.
    pub fn solve(&self, rhs: [f64; 2]) -> Option<[f64; 2]> {
        let det = self.det();
        let scale = self.max_abs().powi(2);
        if det == 0.0 || !det.is_finite() || det.abs() <= 1e-300 * scale.max(1e-300) {
            return None;
        }
        let [[a, b], [c, d]] = self.0;
        Some([
            (d * rhs[0] - b * rhs[1]) / det,
            (a * rhs[1] - c * rhs[0]) / det,
        ])
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    /// Eigenvalues ordered by ascending real part (then imaginary part).
    pub fn eigenvalues(&self) -> [Complex64; 2] {
        let tr = self.trace();
        let det = self.det();
        let disc = tr * tr - 4.0 * det;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            // Larger-magnitude root first; the other from the product avoids cancellation.
            let q = 0.5 * (tr + tr.signum_or_one() * sq);
            let (l1, l2) = if q != 0.0 { (q, det / q) } else { (0.0, 0.0) };
            let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
            [Complex64::new(lo, 0.0), Complex64::new(hi, 0.0)]
        } else {
            let re = 0.5 * tr;
            let im = 0.5 * (-disc).sqrt();
            [Complex64::new(re, -im), Complex64::new(re, im)]
        }
    }

    /// Unit eigenvector for a real eigenvalue.
    pub fn real_eigenvector(&self, lambda: f64) -> [f64; 2] {
        let [[a, b], [c, d]] = self.0;
        // Rows of (J - λI) are orthogonal to the eigenvector; use the better-conditioned row.
        let r1 = [a - lambda, b];
        let r2 = [c, d - lambda];
        let n1 = r1[0].hypot(r1[1]);
        let n2 = r2[0].hypot(r2[1]);
        let v = if n1 >= n2 {
            if n1 == 0.0 {
                [1.0, 0.0]
            } else {
                [-r1[1], r1[0]]
            }
        } else {
            [-r2[1], r2[0]]
        };
        let n = v[0].hypot(v[1]);
        [v[0] / n, v[1] / n]
    }
}

trait SignumOrOne {
    fn signum_or_one(self) -> f64;
}

impl SignumOrOne for f64 {
    fn signum_or_one(self) -> f64 {
        if self < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_diagonal_and_rotation() {
        let ev = Mat2::diag(1.0, -1.0).eigenvalues();
        assert_eq!(ev[0].re, -1.0);
        assert_eq!(ev[1].re, 1.0);
        let rot = Mat2::new(0.0, 1.0, -1.0, 0.0).eigenvalues();
        assert_eq!(rot[0].re, 0.0);
        assert!((rot[0].im.abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eigenvector_satisfies_definition() {
        let m = Mat2::new(2.0, 1.0, 1.0, -3.0);
        for lam in m.eigenvalues() {
            let v = m.real_eigenvector(lam.re);
            let mv = m.mul_vec(v);
            assert!((mv[0] - lam.re * v[0]).abs() < 1e-12);
            assert!((mv[1] - lam.re * v[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn solve_inverts() {
        let m = Mat2::new(3.0, 1.0, -2.0, 4.0);
        let x = m.solve([1.0, 2.0]).unwrap();
        let b = m.mul_vec(x);
        assert!((b[0] - 1.0).abs() < 1e-14 && (b[1] - 2.0).abs() < 1e-14);
        assert!(Mat2::new(1.0, 2.0, 2.0, 4.0).solve([1.0, 0.0]).is_none());
    }
}
