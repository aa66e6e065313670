//! Small dense linear algebra over a prime field.
//!
//! Everything in the protocol that needs linear algebra is tiny (systems
//! of dimension `k`, span computations over a few dozen rows), so a
//! straightforward Gaussian elimination is both the clearest and the
//! fastest tool for the job.

use crate::error::{Error, Result};
use crate::field::PrimeField;

/// Dense row-major matrix over `F_q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FqMatrix {
    pub field: PrimeField,
    pub rows: usize,
    pub cols: usize,
    data: Vec<u64>,
}

impl FqMatrix {
    pub fn zero(field: PrimeField, rows: usize, cols: usize) -> Self {
        FqMatrix { field, rows, cols, data: vec![0; rows * cols] }
    }

    pub fn from_rows(field: PrimeField, rows: &[Vec<u64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::Dimension("ragged rows".into()));
            }
            for &x in row {
                data.push(field.check(x)?);
            }
        }
        Ok(FqMatrix { field, rows: r, cols: c, data })
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Matrix-vector product `A x`.
    pub fn mul_vec(&self, x: &[u64]) -> Result<Vec<u64>> {
        if x.len() != self.cols {
            return Err(Error::Dimension(format!(
                "mul_vec: {} cols vs vector of {}",
                self.cols,
                x.len()
            )));
        }
        let f = self.field;
        let mut out = vec![0u64; self.rows];
        for r in 0..self.rows {
            let mut acc = 0u64;
            for c in 0..self.cols {
                acc = f.add(acc, f.mul(self.get(r, c), x[c]));
            }
            out[r] = acc;
        }
        Ok(out)
    }

    /// Determinant by elimination; consumes a working copy.
    pub fn determinant(&self) -> Result<u64> {
        if self.rows != self.cols {
            return Err(Error::Dimension("determinant of non-square matrix".into()));
        }
        let f = self.field;
        let n = self.rows;
        let mut a = self.data.clone();
        let at = |a: &Vec<u64>, r: usize, c: usize| a[r * n + c];
        let mut det = 1u64;
        for col in 0..n {
            let pivot = (col..n).find(|&r| at(&a, r, col) != 0);
            let Some(p) = pivot else { return Ok(0) };
            if p != col {
                for c in 0..n {
                    a.swap(p * n + c, col * n + c);
                }
                det = f.neg(det);
            }
            let pv = at(&a, col, col);
            det = f.mul(det, pv);
            let pv_inv = f.inv(pv)?;
            for r in (col + 1)..n {
                let factor = f.mul(at(&a, r, col), pv_inv);
                if factor == 0 {
                    continue;
                }
                for c in col..n {
                    let v = f.sub(at(&a, r, c), f.mul(factor, at(&a, col, c)));
                    a[r * n + c] = v;
                }
            }
        }
        Ok(det)
    }

    /// Solves the square system `A x = b`; errors if `A` is singular.
    pub fn solve(&self, b: &[u64]) -> Result<Vec<u64>> {
        if self.rows != self.cols {
            return Err(Error::Dimension("solve on non-square matrix".into()));
        }
        if b.len() != self.rows {
            return Err(Error::Dimension("solve: rhs length mismatch".into()));
        }
        let f = self.field;
        let n = self.rows;
        // Augmented elimination.
        let mut a = self.data.clone();
        let mut rhs = b.to_vec();
        for col in 0..n {
            let pivot = (col..n).find(|&r| a[r * n + col] != 0);
            let Some(p) = pivot else {
                return Err(Error::Singular(format!("no pivot in column {col}")));
            };
            if p != col {
                for c in 0..n {
                    a.swap(p * n + c, col * n + c);
                }
                rhs.swap(p, col);
            }
            let pv_inv = f.inv(a[col * n + col])?;
            for c in col..n {
                a[col * n + c] = f.mul(a[col * n + c], pv_inv);
            }
            rhs[col] = f.mul(rhs[col], pv_inv);
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a[r * n + col];
                if factor == 0 {
                    continue;
                }
                for c in col..n {
                    let v = f.sub(a[r * n + c], f.mul(factor, a[col * n + c]));
                    a[r * n + c] = v;
                }
                rhs[r] = f.sub(rhs[r], f.mul(factor, rhs[col]));
            }
        }
        Ok(rhs)
    }

    pub fn rank(&self) -> usize {
        let f = self.field;
        let (nr, nc) = (self.rows, self.cols);
        let mut a = self.data.clone();
        let mut rank = 0usize;
        for col in 0..nc {
            let pivot = (rank..nr).find(|&r| a[r * nc + col] != 0);
            let Some(p) = pivot else { continue };
            for c in 0..nc {
                a.swap(p * nc + c, rank * nc + c);
            }
            let pv_inv = f.inv(a[rank * nc + col]).expect("nonzero pivot");
            for c in 0..nc {
                a[rank * nc + c] = f.mul(a[rank * nc + c], pv_inv);
            }
            for r in 0..nr {
                if r == rank {
                    continue;
                }
                let factor = a[r * nc + col];
                if factor == 0 {
                    continue;
                }
                for c in 0..nc {
                    let v = f.sub(a[r * nc + c], f.mul(factor, a[rank * nc + c]));
                    a[r * nc + c] = v;
                }
            }
            rank += 1;
            if rank == nr {
                break;
            }
        }
        rank
    }
}

/// Expresses `target` as a linear combination of `rows`, if possible.
///
/// Returns the coefficient vector `lambda` with
/// `sum_i lambda[i] * rows[i] == target`, or `None` when `target` lies
/// outside the row span. Used both to certify that withheld query types
/// can be reconstructed off-line and to perform that reconstruction while
/// decoding.
pub fn express_in_span(field: PrimeField, rows: &[Vec<u64>], target: &[u64]) -> Option<Vec<u64>> {
    let n_rows = rows.len();
    let n_cols = target.len();
    debug_assert!(rows.iter().all(|r| r.len() == n_cols));
    let f = field;
    // Eliminate on the transpose-augmented system: we row-reduce the
    // candidate rows while tracking the elimination as coefficients over
    // the original rows.
    let mut work: Vec<Vec<u64>> = rows.to_vec();
    let mut coeffs: Vec<Vec<u64>> = (0..n_rows)
        .map(|i| {
            let mut e = vec![0u64; n_rows];
            e[i] = 1;
            e
        })
        .collect();
    let mut t = target.to_vec();
    let mut t_coeffs = vec![0u64; n_rows];

    let mut pivot_row = 0usize;
    for col in 0..n_cols {
        let Some(p) = (pivot_row..n_rows).find(|&r| work[r][col] != 0) else {
            continue;
        };
        work.swap(p, pivot_row);
        coeffs.swap(p, pivot_row);
        let pv_inv = f.inv(work[pivot_row][col]).expect("nonzero pivot");
        for c in 0..n_cols {
            work[pivot_row][c] = f.mul(work[pivot_row][c], pv_inv);
        }
        for c in 0..n_rows {
            coeffs[pivot_row][c] = f.mul(coeffs[pivot_row][c], pv_inv);
        }
        for r in 0..n_rows {
            if r == pivot_row || work[r][col] == 0 {
                continue;
            }
            let factor = work[r][col];
            for c in 0..n_cols {
                work[r][c] = f.sub(work[r][c], f.mul(factor, work[pivot_row][c]));
            }
            for c in 0..n_rows {
                coeffs[r][c] = f.sub(coeffs[r][c], f.mul(factor, coeffs[pivot_row][c]));
            }
        }
        // Reduce the target against the fresh pivot as we go.
        if t[col] != 0 {
            let factor = t[col];
            for c in 0..n_cols {
                t[c] = f.sub(t[c], f.mul(factor, work[pivot_row][c]));
            }
            for c in 0..n_rows {
                t_coeffs[c] = f.add(t_coeffs[c], f.mul(factor, coeffs[pivot_row][c]));
            }
        }
        pivot_row += 1;
        if pivot_row == n_rows {
            break;
        }
    }
    // Any residue in columns we never pivoted on means the target is
    // outside the span.
    if t.iter().any(|&x| x != 0) {
        return None;
    }
    Some(t_coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(q: u64) -> PrimeField {
        PrimeField::new(q).unwrap()
    }

    #[test]
    fn determinant_and_solve_f7() {
        let m = FqMatrix::from_rows(f(7), &[vec![2, 3], vec![1, 4]]).unwrap();
        // det = 8 - 3 = 5
        assert_eq!(m.determinant().unwrap(), 5);
        let x = m.solve(&[1, 6]).unwrap();
        assert_eq!(m.mul_vec(&x).unwrap(), vec![1, 6]);
    }

    #[test]
    fn singular_systems_error() {
        let m = FqMatrix::from_rows(f(2), &[vec![1, 1], vec![1, 1]]).unwrap();
        assert_eq!(m.determinant().unwrap(), 0);
        assert!(m.solve(&[1, 0]).is_err());
        assert_eq!(m.rank(), 1);
    }

    #[test]
    fn solve_round_trip_exhaustive_f3() {
        let field = f(3);
        // Every invertible 2x2 over F_3, every rhs.
        for a in 0..3u64 {
            for b in 0..3u64 {
                for c in 0..3u64 {
                    for d in 0..3u64 {
                        let m = FqMatrix::from_rows(field, &[vec![a, b], vec![c, d]]).unwrap();
                        if m.determinant().unwrap() == 0 {
                            continue;
                        }
                        for r0 in 0..3u64 {
                            for r1 in 0..3u64 {
                                let x = m.solve(&[r0, r1]).unwrap();
                                assert_eq!(m.mul_vec(&x).unwrap(), vec![r0, r1]);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn span_expression_found_and_rejected() {
        let field = f(3);
        let rows = vec![vec![1, 0, 2], vec![0, 1, 1]];
        // target = 2*r0 + 1*r1
        let target = vec![2, 1, 2]; // (2,0,4=1) + (0,1,1) = (2,1,2)
        let lambda = express_in_span(field, &rows, &target).unwrap();
        let mut acc = vec![0u64; 3];
        for (l, row) in lambda.iter().zip(&rows) {
            for (a, &x) in acc.iter_mut().zip(row) {
                *a = field.add(*a, field.mul(*l, x));
            }
        }
        assert_eq!(acc, target);
        assert!(express_in_span(field, &rows, &[0, 0, 1]).is_none());
    }
}
