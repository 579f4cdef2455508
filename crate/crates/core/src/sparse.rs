//! Minimal CSR storage specialized for Hermitian Hamiltonians.
//!
//! Assembly happens in triplet (COO) form; conversion sorts by (row, col)
//! and merges duplicates in that fixed order, so repeated builds of the same
//! Hamiltonian are bit-identical. A matrix whose imaginary parts are all
//! negligible relative to its largest entry collapses to a real CSR, which
//! roughly halves memory traffic in the eigensolver.

use ndarray::Array2;
use num_complex::Complex64;

/// Relative imaginary-part threshold below which a matrix is stored real.
const REALNESS_TOL: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct Csr<T> {
    pub dim: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Copy> Csr<T> {
    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let (a, b) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[a..b], &self.data[a..b])
    }
}

fn triplets_to_csr<T, F>(dim: usize, mut trips: Vec<(usize, usize, T)>, zero: T, add: F) -> Csr<T>
where
    T: Copy,
    F: Fn(T, T) -> T,
{
    trips.sort_by_key(|&(r, c, _)| (r, c));
    let mut indptr = Vec::with_capacity(dim + 1);
    let mut indices = Vec::new();
    let mut data: Vec<T> = Vec::new();
    indptr.push(0);
    let mut cur_row = 0usize;
    for (r, c, v) in trips {
        while cur_row < r {
            indptr.push(indices.len());
            cur_row += 1;
        }
        if let (Some(&last_c), true) = (indices.last(), indptr[cur_row] < indices.len()) {
            if last_c == c {
                let last = data.len() - 1;
                data[last] = add(data[last], v);
                continue;
            }
        }
        indices.push(c);
        data.push(add(zero, v));
    }
    while cur_row < dim {
        indptr.push(indices.len());
        cur_row += 1;
    }
    Csr { dim, indptr, indices, data }
}

impl Csr<f64> {
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.dim {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            y[r] = acc;
        }
    }
}

impl Csr<Complex64> {
    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        for r in 0..self.dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            y[r] = acc;
        }
    }
}

/// A Hermitian sparse matrix, stored real when it is one.
#[derive(Debug, Clone)]
pub enum SparseMatrix {
    Real(Csr<f64>),
    Complex(Csr<Complex64>),
}

impl SparseMatrix {
    /// Build from complex triplets, merging duplicates and detecting
    /// realness. Entries that merge to exactly zero are kept — structural
    /// zeros are harmless and dropping them would depend on summation order.
    pub fn from_triplets(dim: usize, trips: Vec<(usize, usize, Complex64)>) -> Self {
        let scale = trips.iter().map(|&(_, _, v)| v.norm()).fold(0.0, f64::max);
        let csr = triplets_to_csr(dim, trips, Complex64::new(0.0, 0.0), |a, b| a + b);
        let max_im = csr.data.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        if max_im <= REALNESS_TOL * scale.max(f64::MIN_POSITIVE) {
            SparseMatrix::Real(Csr {
                dim: csr.dim,
                indptr: csr.indptr,
                indices: csr.indices,
                data: csr.data.iter().map(|v| v.re).collect(),
            })
        } else {
            SparseMatrix::Complex(csr)
        }
    }

    /// Build (T + T†)/2 from triplets: appends the conjugate transpose and
    /// halves, which symmetrizes away one-sided assembly.
    pub fn hermitian_from_triplets(dim: usize, trips: Vec<(usize, usize, Complex64)>) -> Self {
        let mut all = Vec::with_capacity(trips.len() * 2);
        for &(r, c, v) in &trips {
            all.push((r, c, 0.5 * v));
            all.push((c, r, 0.5 * v.conj()));
        }
        Self::from_triplets(dim, all)
    }

    pub fn dim(&self) -> usize {
        match self {
            SparseMatrix::Real(m) => m.dim,
            SparseMatrix::Complex(m) => m.dim,
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            SparseMatrix::Real(m) => m.nnz(),
            SparseMatrix::Complex(m) => m.nnz(),
        }
    }

    pub fn is_real(&self) -> bool {
        matches!(self, SparseMatrix::Real(_))
    }

    /// y = A·x over complex vectors regardless of storage.
    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        match self {
            SparseMatrix::Real(m) => {
                for r in 0..m.dim {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in m.indptr[r]..m.indptr[r + 1] {
                        acc += m.data[k] * x[m.indices[k]];
                    }
                    y[r] = acc;
                }
            }
            SparseMatrix::Complex(m) => m.matvec(x, y),
        }
    }

    /// Real part of the diagonal (the full diagonal for a Hermitian matrix).
    pub fn diagonal(&self) -> Vec<f64> {
        let n = self.dim();
        let mut d = vec![0.0; n];
        match self {
            SparseMatrix::Real(m) => {
                for r in 0..n {
                    let (idx, val) = m.row(r);
                    if let Some(p) = idx.iter().position(|&c| c == r) {
                        d[r] = val[p];
                    }
                }
            }
            SparseMatrix::Complex(m) => {
                for r in 0..n {
                    let (idx, val) = m.row(r);
                    if let Some(p) = idx.iter().position(|&c| c == r) {
                        d[r] = val[p].re;
                    }
                }
            }
        }
        d
    }

    /// Gershgorin interval bounds (lower, upper) on the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in 0..n {
            let (mut diag, mut radius) = (0.0, 0.0);
            match self {
                SparseMatrix::Real(m) => {
                    let (idx, val) = m.row(r);
                    for (&c, &v) in idx.iter().zip(val) {
                        if c == r {
                            diag = v;
                        } else {
                            radius += v.abs();
                        }
                    }
                }
                SparseMatrix::Complex(m) => {
                    let (idx, val) = m.row(r);
                    for (&c, &v) in idx.iter().zip(val) {
                        if c == r {
                            diag = v.re;
                        } else {
                            radius += v.norm();
                        }
                    }
                }
            }
            lo = lo.min(diag - radius);
            hi = hi.max(diag + radius);
        }
        if n == 0 {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }

    pub fn to_dense_complex(&self) -> Array2<Complex64> {
        let n = self.dim();
        let mut a = Array2::zeros((n, n));
        match self {
            SparseMatrix::Real(m) => {
                for r in 0..n {
                    let (idx, val) = m.row(r);
                    for (&c, &v) in idx.iter().zip(val) {
                        a[[r, c]] = Complex64::new(v, 0.0);
                    }
                }
            }
            SparseMatrix::Complex(m) => {
                for r in 0..n {
                    let (idx, val) = m.row(r);
                    for (&c, &v) in idx.iter().zip(val) {
                        a[[r, c]] = v;
                    }
                }
            }
        }
        a
    }

    /// Dense real form; panics if the matrix is stored complex.
    pub fn to_dense_real(&self) -> Array2<f64> {
        match self {
            SparseMatrix::Real(m) => {
                let n = m.dim;
                let mut a = Array2::zeros((n, n));
                for r in 0..n {
                    let (idx, val) = m.row(r);
                    for (&c, &v) in idx.iter().zip(val) {
                        a[[r, c]] = v;
                    }
                }
                a
            }
            SparseMatrix::Complex(_) => panic!("matrix is complex"),
        }
    }

    /// Max Hermiticity defect ‖A − A†‖_∞ over stored entries.
    pub fn hermiticity_defect(&self) -> f64 {
        let a = self.to_dense_complex();
        let n = self.dim();
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                worst = worst.max((a[[r, c]] - a[[c, r]].conj()).norm());
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn merge_and_realness() {
        let trips = vec![
            (0, 0, c(1.0, 0.0)),
            (0, 1, c(0.5, 1e-16)),
            (0, 1, c(0.5, -1e-16)),
            (1, 0, c(1.0, 0.0)),
            (1, 1, c(-2.0, 0.0)),
        ];
        let m = SparseMatrix::from_triplets(2, trips);
        assert!(m.is_real());
        assert_eq!(m.nnz(), 4);
        let d = m.to_dense_real();
        assert_eq!(d[[0, 1]], 1.0);
        assert_eq!(d[[1, 1]], -2.0);
    }

    #[test]
    fn complex_stays_complex() {
        let m = SparseMatrix::from_triplets(2, vec![(0, 1, c(0.0, 1.0)), (1, 0, c(0.0, -1.0))]);
        assert!(!m.is_real());
        assert!(m.hermiticity_defect() < 1e-15);
    }

    #[test]
    fn hermitize_splits_defect() {
        // A one-sided entry becomes a symmetric pair at half weight.
        let m = SparseMatrix::hermitian_from_triplets(2, vec![(0, 1, c(2.0, 0.0))]);
        let d = m.to_dense_real();
        assert_eq!(d[[0, 1]], 1.0);
        assert_eq!(d[[1, 0]], 1.0);
    }

    #[test]
    fn matvec_matches_dense() {
        let trips = vec![
            (0, 0, c(2.0, 0.0)),
            (0, 2, c(0.0, 1.0)),
            (2, 0, c(0.0, -1.0)),
            (1, 1, c(-1.0, 0.0)),
            (2, 2, c(0.5, 0.0)),
        ];
        let m = SparseMatrix::from_triplets(3, trips);
        let x = vec![c(1.0, 0.0), c(0.0, 2.0), c(-1.0, 1.0)];
        let mut y = vec![c(0.0, 0.0); 3];
        m.matvec(&x, &mut y);
        let dense = m.to_dense_complex();
        for r in 0..3 {
            let want: Complex64 = (0..3).map(|k| dense[[r, k]] * x[k]).sum();
            assert!((y[r] - want).norm() < 1e-15);
        }
    }

    #[test]
    fn gershgorin_contains_spectrum() {
        // diag(1, 5) with off-diagonal 2: eigenvalues 3 ± √8.
        let m = SparseMatrix::from_triplets(
            2,
            vec![(0, 0, c(1.0, 0.0)), (0, 1, c(2.0, 0.0)), (1, 0, c(2.0, 0.0)), (1, 1, c(5.0, 0.0))],
        );
        let (lo, hi) = m.gershgorin();
        assert_eq!(lo, -1.0);
        assert_eq!(hi, 7.0);
        let evs = [3.0 - 8.0f64.sqrt(), 3.0 + 8.0f64.sqrt()];
        assert!(evs.iter().all(|&e| e >= lo && e <= hi));
    }

    #[test]
    fn empty_rows_are_fine() {
        let m = SparseMatrix::from_triplets(4, vec![(3, 3, c(1.0, 0.0))]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.diagonal(), vec![0.0, 0.0, 0.0, 1.0]);
    }
}
