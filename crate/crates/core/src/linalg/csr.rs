use std::fmt::Write as _;

use nalgebra::DMatrix;

use super::Scalar;

/// Coordinate-format accumulator. Duplicate entries are summed in insertion
/// order when converted, so the result is bit-reproducible.
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    pub nrows: usize,
    pub ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Triplets { nrows, ncols, entries: Vec::new() }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.entries.push((i, j, v));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_csr(&self) -> Csr {
        let mut e = self.entries.clone();
        e.sort_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(e.len());
        let mut values: Vec<f64> = Vec::with_capacity(e.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in e {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.nrows {
            indptr[i + 1] += indptr[i];
        }
        Csr { nrows: self.nrows, ncols: self.ncols, indptr, indices, values }
    }
}

/// Real compressed-sparse-row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Triplets::new(nrows, ncols).to_csr()
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Triplets::new(n, n);
        for i in 0..n {
            t.push(i, i, 1.0);
        }
        t.to_csr()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).fold(T::zero(), |acc, (j, v)| acc + x[j] * v))
            .collect()
    }

    /// `xᴴ A y`.
    pub fn form<T: Scalar>(&self, x: &[T], y: &[T]) -> T {
        super::dotc(x, &self.mul_vec(y))
    }

    pub fn transpose(&self) -> Csr {
        let mut t = Triplets::new(self.ncols, self.nrows);
        for (i, j, v) in self.triplets() {
            t.push(j, i, v);
        }
        t.to_csr()
    }

    pub fn scaled(&self, s: f64) -> Csr {
        Csr { values: self.values.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    /// `Σ c_k A_k` over matrices of equal shape.
    pub fn linear_combination(terms: &[(f64, &Csr)]) -> Csr {
        let (nrows, ncols) = (terms[0].1.nrows, terms[0].1.ncols);
        let mut t = Triplets::new(nrows, ncols);
        for (c, a) in terms {
            assert_eq!((a.nrows, a.ncols), (nrows, ncols));
            for (i, j, v) in a.triplets() {
                t.push(i, j, c * v);
            }
        }
        t.to_csr()
    }

    /// Rows and columns restricted to the given index lists.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Csr {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut t = Triplets::new(rows.len(), cols.len());
        for (r, &i) in rows.iter().enumerate() {
            for (j, v) in self.row(i) {
                if col_map[j] != usize::MAX {
                    t.push(r, col_map[j], v);
                }
            }
        }
        t.to_csr()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        self.triplets().fold(0.0, |m, (i, j, v)| m.max((v - self.get(j, i)).abs()))
    }

    /// Coordinate text export, one `row col value` line per stored entry.
    pub fn to_coordinate_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {}", self.nrows, self.ncols, self.nnz());
        for (i, j, v) in self.triplets() {
            let _ = writeln!(s, "{i} {j} {v:.16e}");
        }
        s
    }
}
