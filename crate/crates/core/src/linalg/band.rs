//! Banded direct solvers: Cholesky for SPD band matrices and LU with partial
//! pivoting for general band matrices. Band storage keeps the structured-grid
//! subsystems (bandwidth O(n)) cheap next to dense factorizations.

use crate::error::{Error, Result};
use crate::linalg::sparse::Csr;

/// Cholesky factor of an SPD band matrix. Row-major storage of the lower
/// band: row `i` holds `L[i, i-kl ..= i]` in `data[i*(kl+1) ..]`.
#[derive(Clone, Debug)]
pub struct BandCholesky {
    pub n: usize,
    pub kl: usize,
    data: Vec<f64>,
}

impl BandCholesky {
    /// Factorizes a square CSR matrix assumed symmetric; only the lower
    /// triangle is read. Fails when a pivot is not strictly positive.
    pub fn from_csr(a: &Csr, label: &str) -> Result<BandCholesky> {
        assert_eq!(a.nrows, a.ncols);
        let n = a.nrows;
        let (kl, _) = a.bandwidths();
        let w = kl + 1;
        let mut data = vec![0.0; n * w];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (c, v) in cols.iter().zip(vals) {
                if *c <= i {
                    data[i * w + (c + kl - i)] = *v;
                }
            }
        }

        // In-place left-looking factorization within the band.
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            for j in lo..=i {
                let mut s = data[i * w + (j + kl - i)];
                let t0 = lo.max(j.saturating_sub(kl));
                for t in t0..j {
                    s -= data[i * w + (t + kl - i)] * data[j * w + (t + kl - j)];
                }
                if j < i {
                    data[i * w + (j + kl - i)] = s / data[j * w + kl];
                } else {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::FactorizationFailure(format!(
                            "{label}: pivot {s} at row {i} is not positive"
                        )));
                    }
                    data[i * w + kl] = s.sqrt();
                }
            }
        }
        Ok(BandCholesky { n, kl, data })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let w = self.kl + 1;
        let mut x = rhs.to_vec();
        // L y = b
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let mut s = x[i];
            for j in lo..i {
                s -= self.data[i * w + (j + self.kl - i)] * x[j];
            }
            x[i] = s / self.data[i * w + self.kl];
        }
        // L^T x = y
        for i in (0..self.n).rev() {
            let hi = (i + self.kl).min(self.n - 1);
            let mut s = x[i];
            for j in (i + 1)..=hi {
                s -= self.data[j * w + (i + self.kl - j)] * x[j];
            }
            x[i] = s / self.data[i * w + self.kl];
        }
        x
    }
}

/// LU factorization of a general band matrix with partial pivoting.
/// Column-major band storage with `kl` extra fill rows: entry `A[i, j]` lives
/// at `data[j*ldab + (kl + ku + i - j)]`.
#[derive(Clone, Debug)]
pub struct BandLu {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    ldab: usize,
    data: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    pub fn from_csr(a: &Csr, label: &str) -> Result<BandLu> {
        assert_eq!(a.nrows, a.ncols);
        let n = a.nrows;
        let (kl, ku) = a.bandwidths();
        // Pivoting widens the upper band by up to kl.
        let ldab = 2 * kl + ku + 1;
        let mut data = vec![0.0; ldab * n];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (c, v) in cols.iter().zip(vals) {
                data[c * ldab + (kl + ku + i - c)] = *v;
            }
        }

        let mut ipiv = vec![0usize; n];
        let diag = kl + ku;
        for j in 0..n {
            // Partial pivot within the column's lower band.
            let km = kl.min(n - 1 - j);
            let mut p = 0;
            let mut best = data[j * ldab + diag].abs();
            for i in 1..=km {
                let v = data[j * ldab + diag + i].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            ipiv[j] = j + p;
            if best == 0.0 || !best.is_finite() {
                return Err(Error::FactorizationFailure(format!(
                    "{label}: zero pivot in column {j}"
                )));
            }
            let hi = (j + kl + ku).min(n - 1);
            if p != 0 {
                for c in j..=hi {
                    let a_idx = c * ldab + (diag + j - c);
                    let b_idx = c * ldab + (diag + j + p - c);
                    data.swap(a_idx, b_idx);
                }
            }
            let pivot = data[j * ldab + diag];
            for i in 1..=km {
                data[j * ldab + diag + i] /= pivot;
            }
            for c in (j + 1)..=hi {
                let f = data[c * ldab + (diag + j - c)];
                if f != 0.0 {
                    for i in 1..=km {
                        data[c * ldab + (diag + j + i - c)] -= f * data[j * ldab + diag + i];
                    }
                }
            }
        }
        Ok(BandLu {
            n,
            kl,
            ku,
            ldab,
            data,
            ipiv,
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let diag = self.kl + self.ku;
        let mut x = rhs.to_vec();
        // Forward solve with the unit-lower factor, applying the row swaps
        // in factorization order.
        for j in 0..self.n {
            x.swap(j, self.ipiv[j]);
            let km = self.kl.min(self.n - 1 - j);
            let xj = x[j];
            if xj != 0.0 {
                for i in 1..=km {
                    x[j + i] -= self.data[j * self.ldab + diag + i] * xj;
                }
            }
        }
        // Back substitution with the widened upper factor.
        for j in (0..self.n).rev() {
            x[j] /= self.data[j * self.ldab + diag];
            let xj = x[j];
            let lo = j.saturating_sub(self.kl + self.ku);
            for i in lo..j {
                x[i] -= self.data[j * self.ldab + (diag + i - j)] * xj;
            }
        }
        x
    }
}
