//! Small dense solves on the stack.

use crate::constants::MAX_DIM;

/// Pivots smaller than this fraction of the largest matrix entry are
/// treated as zero.
pub const PIVOT_RATIO: f64 = 1e-10;

const ROWS: usize = MAX_DIM + 1;

/// Row-major `(rows) x (cols)` matrix with `rows <= MAX_DIM + 1` and
/// `cols <= MAX_DIM`, plus a right-hand side column.
#[derive(Clone)]
pub(crate) struct System {
    a: [[f64; MAX_DIM]; ROWS],
    b: [f64; ROWS],
    rows: usize,
    cols: usize,
}

impl System {
    pub(crate) fn new(rows: usize, cols: usize) -> Self {
        debug_assert!(rows <= ROWS && cols <= MAX_DIM && rows >= cols);
        System {
            a: [[0.0; MAX_DIM]; ROWS],
            b: [0.0; ROWS],
            rows,
            cols,
        }
    }

    #[inline]
    pub(crate) fn set(&mut self, r: usize, c: usize, v: f64) {
        self.a[r][c] = v;
    }

    #[inline]
    pub(crate) fn set_rhs(&mut self, r: usize, v: f64) {
        self.b[r] = v;
    }

    fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for row in &self.a[..self.rows] {
            for v in &row[..self.cols] {
                m = m.max(v.abs());
            }
        }
        m
    }

    /// Reshapes for reuse without clearing the coefficients; callers must
    /// overwrite every entry of the new shape. The right-hand side is zeroed.
    pub(crate) fn reshape(&mut self, rows: usize, cols: usize) {
        debug_assert!(rows <= ROWS && cols <= MAX_DIM && rows >= cols);
        self.rows = rows;
        self.cols = cols;
        self.b[..rows].iter_mut().for_each(|v| *v = 0.0);
    }

    /// Gaussian elimination with partial pivoting. For `rows > cols` the
    /// system must be consistent; surplus rows are dropped after
    /// elimination. Returns `None` when a pivot falls below
    /// [`PIVOT_RATIO`] relative to the largest entry.
    pub(crate) fn solve(mut self, out: &mut [f64]) -> Option<()> {
        self.solve_in_place(out)
    }

    /// As [`System::solve`], destroying the stored coefficients.
    pub(crate) fn solve_in_place(&mut self, out: &mut [f64]) -> Option<()> {
        let (n, m) = (self.rows, self.cols);
        let scale = self.max_abs();
        if !(scale > 0.0) || !scale.is_finite() {
            return None;
        }
        let tol = PIVOT_RATIO * scale;
        for k in 0..m {
            let mut p = k;
            for r in k + 1..n {
                if self.a[r][k].abs() > self.a[p][k].abs() {
                    p = r;
                }
            }
            if self.a[p][k].abs() < tol {
                return None;
            }
            self.a.swap(k, p);
            self.b.swap(k, p);
            let inv = 1.0 / self.a[k][k];
            for r in k + 1..n {
                let f = self.a[r][k] * inv;
                if f != 0.0 {
                    for c in k + 1..m {
                        self.a[r][c] -= f * self.a[k][c];
                    }
                    self.b[r] -= f * self.b[k];
                }
            }
        }
        for k in (0..m).rev() {
            let mut s = self.b[k];
            for c in k + 1..m {
                s -= self.a[k][c] * out[c];
            }
            out[k] = s / self.a[k][k];
        }
        Some(())
    }

    /// Determinant of a square system by elimination (exact zero pivots give 0).
    pub(crate) fn determinant(mut self) -> f64 {
        let n = self.cols;
        debug_assert_eq!(self.rows, n);
        let mut det = 1.0;
        for k in 0..n {
            let mut p = k;
            for r in k + 1..n {
                if self.a[r][k].abs() > self.a[p][k].abs() {
                    p = r;
                }
            }
            if self.a[p][k] == 0.0 {
                return 0.0;
            }
            if p != k {
                self.a.swap(k, p);
                det = -det;
            }
            let piv = self.a[k][k];
            det *= piv;
            for r in k + 1..n {
                let f = self.a[r][k] / piv;
                for c in k + 1..n {
                    self.a[r][c] -= f * self.a[k][c];
                }
            }
        }
        det
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_square() {
        let mut s = System::new(2, 2);
        s.set(0, 0, 2.0);
        s.set(0, 1, 1.0);
        s.set(1, 0, 1.0);
        s.set(1, 1, 3.0);
        s.set_rhs(0, 3.0);
        s.set_rhs(1, 5.0);
        let mut x = [0.0; 2];
        s.solve(&mut x).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-15 && (x[1] - 1.4).abs() < 1e-15);
    }

    #[test]
    fn flags_singular() {
        let mut s = System::new(2, 2);
        s.set(0, 0, 1.0);
        s.set(0, 1, 2.0);
        s.set(1, 0, 2.0);
        s.set(1, 1, 4.0);
        let mut x = [0.0; 2];
        assert!(s.solve(&mut x).is_none());
    }

    #[test]
    fn determinant_sign() {
        let mut s = System::new(2, 2);
        s.set(0, 1, 1.0);
        s.set(1, 0, 1.0);
        assert_eq!(s.determinant(), -1.0);
    }
}
