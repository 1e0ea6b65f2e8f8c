//! Compressed sparse row matrices and the unit upper-triangular inverse used
//! by the tree block formulas.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Row-major sparse matrix. Column indices inside each row are strictly
/// increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CsrMatrix { rows, cols, indptr: vec![0; rows + 1], indices: Vec::new(), values: Vec::new() }
    }

    /// Builds a matrix from per-row `(column, value)` lists. Rows are sorted
    /// and duplicate columns summed; explicit zeros are dropped.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n_rows = rows.len();
        let mut indptr = Vec::with_capacity(n_rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut iter = row.into_iter().peekable();
            while let Some((c, mut v)) = iter.next() {
                assert!(c < cols, "column {c} out of range {cols}");
                while let Some(&(c2, v2)) = iter.peek() {
                    if c2 != c {
                        break;
                    }
                    v += v2;
                    iter.next();
                }
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix { rows: n_rows, cols, indptr, indices, values }
    }

    pub fn from_dense(dense: &Array2<f64>) -> Self {
        let (rows, cols) = dense.dim();
        let mut indptr = Vec::with_capacity(rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for i in 0..rows {
            for j in 0..cols {
                let v = dense[[i, j]];
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix { rows, cols, indptr, indices, values }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows, self.cols));
        for i in 0..self.rows {
            let (idx, val) = self.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                out[[i, j]] = v;
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[s..e], &self.values[s..e])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (idx, val) = self.row(i);
        match idx.binary_search(&j) {
            Ok(p) => val[p],
            Err(_) => 0.0,
        }
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_strictly_upper(&self) -> bool {
        (0..self.rows).all(|i| self.row(i).0.iter().all(|&j| j > i))
    }

    /// Sparse product `self * rhs`.
    pub fn mul(&self, rhs: &CsrMatrix) -> Result<CsrMatrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, got: rhs.rows });
        }
        let mut acc = vec![0.0; rhs.cols];
        let mut mark = vec![false; rhs.cols];
        let mut touched = Vec::new();
        let mut rows = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let (idx, val) = self.row(i);
            for (&k, &a) in idx.iter().zip(val) {
                let (ridx, rval) = rhs.row(k);
                for (&j, &b) in ridx.iter().zip(rval) {
                    if !mark[j] {
                        mark[j] = true;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            let row: Vec<(usize, f64)> = touched.iter().map(|&j| (j, acc[j])).collect();
            for &j in &touched {
                acc[j] = 0.0;
                mark[j] = false;
            }
            touched.clear();
            rows.push(row);
        }
        Ok(CsrMatrix::from_rows(rhs.cols, rows))
    }

    /// Dense product `self * rhs`.
    pub fn mul_dense(&self, rhs: &Array2<f64>) -> Result<Array2<f64>> {
        if self.cols != rhs.nrows() {
            return Err(Error::DimensionMismatch { expected: self.cols, got: rhs.nrows() });
        }
        let mut out = Array2::zeros((self.rows, rhs.ncols()));
        for i in 0..self.rows {
            let (idx, val) = self.row(i);
            let mut out_row = out.row_mut(i);
            for (&k, &a) in idx.iter().zip(val) {
                out_row.scaled_add(a, &rhs.row(k));
            }
        }
        Ok(out)
    }

    /// Dense product `selfᵀ * rhs`.
    pub fn transpose_mul_dense(&self, rhs: &Array2<f64>) -> Result<Array2<f64>> {
        if self.rows != rhs.nrows() {
            return Err(Error::DimensionMismatch { expected: self.rows, got: rhs.nrows() });
        }
        let mut out = Array2::zeros((self.cols, rhs.ncols()));
        for i in 0..self.rows {
            let (idx, val) = self.row(i);
            for (&k, &a) in idx.iter().zip(val) {
                out.row_mut(k).scaled_add(a, &rhs.row(i));
            }
        }
        Ok(out)
    }
}

/// Computes `(I - D)^-1` for a strictly upper-triangular `D` by back
/// substitution: row `i` of the inverse is `e_i + sum_k D[i,k] * row_k`,
/// filled from the last row up. No pivoting or division is needed because
/// `I - D` is unit upper triangular.
pub fn unit_upper_inverse(strict_upper: &CsrMatrix) -> Result<CsrMatrix> {
    let n = strict_upper.rows();
    if strict_upper.cols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: strict_upper.cols() });
    }
    if !strict_upper.is_strictly_upper() {
        return Err(Error::InvalidTree("matrix is not strictly upper triangular".into()));
    }
    let mut solved: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut acc = vec![0.0; n];
    let mut mark = vec![false; n];
    let mut touched = Vec::new();
    for i in (0..n).rev() {
        let (idx, val) = strict_upper.row(i);
        for (&k, &d) in idx.iter().zip(val) {
            for &(j, x) in &solved[k] {
                if !mark[j] {
                    mark[j] = true;
                    touched.push(j);
                }
                acc[j] += d * x;
            }
        }
        touched.sort_unstable();
        let mut row = Vec::with_capacity(touched.len() + 1);
        row.push((i, 1.0));
        for &j in &touched {
            row.push((j, acc[j]));
            acc[j] = 0.0;
            mark[j] = false;
        }
        touched.clear();
        solved[i] = row;
    }
    Ok(CsrMatrix::from_rows(n, solved))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn chain_inverse_is_upper_ones() {
        let d = array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]];
        let inv = unit_upper_inverse(&CsrMatrix::from_dense(&d)).unwrap().to_dense();
        assert_eq!(inv, array![[1.0, 1.0, 1.0], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]]);
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let d = array![[0.0, 0.3, 0.7, 0.0], [0.0, 0.0, 0.5, 0.5], [0.0, 0.0, 0.0, 0.25], [0.0; 4]];
        let inv = unit_upper_inverse(&CsrMatrix::from_dense(&d)).unwrap().to_dense();
        let i_minus_d = Array2::<f64>::eye(4) - &d;
        let prod = inv.dot(&i_minus_d);
        for ((i, j), v) in prod.indexed_iter() {
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-14, "({i},{j}) = {v}");
        }
    }

    #[test]
    fn rejects_lower_entries() {
        let d = array![[0.0, 0.0], [1.0, 0.0]];
        assert!(unit_upper_inverse(&CsrMatrix::from_dense(&d)).is_err());
    }

    #[test]
    fn products_match_dense() {
        let a = array![[1.0, 0.0, 2.0], [0.0, 3.0, 0.0]];
        let b = array![[1.0, 2.0], [0.0, 1.0], [4.0, 0.0]];
        let sa = CsrMatrix::from_dense(&a);
        assert_eq!(sa.mul(&CsrMatrix::from_dense(&b)).unwrap().to_dense(), a.dot(&b));
        assert_eq!(sa.mul_dense(&b).unwrap(), a.dot(&b));
        let c = array![[1.0, 1.0], [2.0, -1.0]];
        assert_eq!(sa.transpose_mul_dense(&c).unwrap(), a.t().dot(&c));
    }

    #[test]
    fn from_rows_sums_duplicates_and_drops_zeros() {
        let m = CsrMatrix::from_rows(3, vec![vec![(2, 1.0), (0, 1.0), (2, 2.0), (1, 0.0)]]);
        assert_eq!(m.row(0), (&[0usize, 2][..], &[1.0, 3.0][..]));
    }
}
