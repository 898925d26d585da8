//! Banded direct factorizations behind a reverse Cuthill–McKee ordering.
//!
//! The LU follows the LAPACK `gbtf2` layout: partial pivoting inside the
//! band, with the upper bandwidth widened to `kl + ku` to hold pivot fill.

use std::collections::VecDeque;

use super::{Csr, Scalar};
use crate::error::{Error, Result};

/// Symmetric reordering and the resulting half-bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct BandLayout {
    /// `perm[new] = old`.
    pub perm: Vec<usize>,
    /// `inv[old] = new`.
    pub inv: Vec<usize>,
    pub bandwidth: usize,
}

impl BandLayout {
    pub fn identity(n: usize, bandwidth: usize) -> Self {
        BandLayout { perm: (0..n).collect(), inv: (0..n).collect(), bandwidth }
    }

    /// RCM ordering of the symmetrized pattern of `a`.
    pub fn rcm(a: &Csr) -> Self {
        let n = a.nrows;
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, j, _) in a.triplets() {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        for nb in adj.iter_mut() {
            nb.sort_unstable();
            nb.dedup();
        }
        let degree: Vec<usize> = adj.iter().map(Vec::len).collect();

        let bfs_levels = |start: usize, seen: &[bool]| -> Vec<Vec<usize>> {
            let mut mark = seen.to_vec();
            let mut levels = vec![vec![start]];
            mark[start] = true;
            loop {
                let mut next = Vec::new();
                for &v in levels.last().unwrap() {
                    for &w in &adj[v] {
                        if !mark[w] {
                            mark[w] = true;
                            next.push(w);
                        }
                    }
                }
                if next.is_empty() {
                    return levels;
                }
                levels.push(next);
            }
        };

        let mut visited = vec![false; n];
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            let mut start = (0..n).filter(|&v| !visited[v]).min_by_key(|&v| (degree[v], v)).unwrap();
            // pseudo-peripheral node: walk to the far level while eccentricity grows
            let mut depth = bfs_levels(start, &visited).len();
            loop {
                let levels = bfs_levels(start, &visited);
                let cand = *levels.last().unwrap().iter().min_by_key(|&&v| (degree[v], v)).unwrap();
                let d = bfs_levels(cand, &visited).len();
                if d > depth {
                    depth = d;
                    start = cand;
                } else {
                    break;
                }
            }
            let mut queue = VecDeque::from([start]);
            visited[start] = true;
            while let Some(v) = queue.pop_front() {
                order.push(v);
                let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
                nb.sort_by_key(|&w| (degree[w], w));
                for w in nb {
                    visited[w] = true;
                    queue.push_back(w);
                }
            }
        }
        order.reverse();
        let mut inv = vec![0; n];
        for (new, &old) in order.iter().enumerate() {
            inv[old] = new;
        }
        let bandwidth = a.triplets().map(|(i, j, _)| inv[i].abs_diff(inv[j])).max().unwrap_or(0);
        BandLayout { perm: order, inv, bandwidth }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    fn to_new<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        self.perm.iter().map(|&old| x[old]).collect()
    }

    fn to_old<T: Scalar>(&self, y: &[T]) -> Vec<T> {
        self.inv.iter().map(|&new| y[new]).collect()
    }
}

/// Banded LU with partial pivoting over `f64` or `Complex64`.
#[derive(Debug, Clone)]
pub struct BandedLu<T: Scalar> {
    layout: BandLayout,
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<T>,
    pivots: Vec<usize>,
}

impl<T: Scalar> BandedLu<T> {
    /// Factors the matrix given as `(row, col, value)` entries in the
    /// original numbering; duplicates are summed. Every entry must lie in
    /// the layout's band.
    pub fn factor(layout: &BandLayout, entries: impl IntoIterator<Item = (usize, usize, T)>) -> Result<Self> {
        let n = layout.len();
        let (kl, ku) = (layout.bandwidth, layout.bandwidth);
        let width = 2 * kl + ku + 1;
        let mut band = vec![T::zero(); n * width];
        for (i, j, v) in entries {
            let (r, c) = (layout.inv[i], layout.inv[j]);
            assert!(r.abs_diff(c) <= kl, "entry ({i},{j}) outside the band");
            band[r * width + c + kl - r] += v;
        }
        let at = |i: usize, j: usize| i * width + j + kl - i;
        let mut pivots = vec![0; n];
        let mut scale = 0.0f64;
        for v in &band {
            scale = scale.max(v.modulus());
        }
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = band[at(k, k)].modulus();
            for i in (k + 1)..=last_row {
                let m = band[at(i, k)].modulus();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if !(best > f64::EPSILON * 1e-3 * scale) {
                return Err(Error::SolverBreakdown(format!("zero pivot at column {k} (|pivot| = {best:e})")));
            }
            pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    band.swap(at(k, j), at(p, j));
                }
            }
            let pivot = band[at(k, k)];
            for i in (k + 1)..=last_row {
                let l = band[at(i, k)] / pivot;
                band[at(i, k)] = l;
                if l == T::zero() {
                    continue;
                }
                for j in (k + 1)..=last_col {
                    let u = band[at(k, j)];
                    band[at(i, j)] -= l * u;
                }
            }
        }
        Ok(BandedLu { layout: layout.clone(), n, kl, ku, width, band, pivots })
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let (n, kl, ku, w) = (self.n, self.kl, self.ku, self.width);
        let at = |i: usize, j: usize| i * w + j + kl - i;
        let mut x = self.layout.to_new(rhs);
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            let xk = x[k];
            for i in (k + 1)..=(k + kl).min(n.saturating_sub(1)) {
                x[i] -= self.band[at(i, k)] * xk;
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..=(i + kl + ku).min(n - 1) {
                s -= self.band[at(i, j)] * x[j];
            }
            x[i] = s / self.band[at(i, i)];
        }
        self.layout.to_old(&x)
    }
}

/// Banded Cholesky `A = L Lᵀ` of a real symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    layout: BandLayout,
    n: usize,
    bw: usize,
    /// Row `i` holds `L[i][i - bw ..= i]`.
    lower: Vec<f64>,
}

impl BandedCholesky {
    /// Fails with `NonPositiveEnergy` (reporting the original row) when a
    /// pivot is not positive.
    pub fn factor(layout: &BandLayout, a: &Csr) -> Result<Self> {
        let n = layout.len();
        let bw = layout.bandwidth;
        let w = bw + 1;
        let mut lower = vec![0.0; n * w];
        for (i, j, v) in a.triplets() {
            let (r, c) = (layout.inv[i], layout.inv[j]);
            if c <= r {
                assert!(r - c <= bw, "entry ({i},{j}) outside the band");
                lower[r * w + c + bw - r] += v;
            }
        }
        let at = |i: usize, j: usize| i * w + j + bw - i;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let klo = lo.max(j.saturating_sub(bw));
                let mut s = lower[at(i, j)];
                for k in klo..j {
                    s -= lower[at(i, k)] * lower[at(j, k)];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::NonPositiveEnergy { row: layout.perm[i], pivot: s });
                    }
                    lower[at(i, i)] = s.sqrt();
                } else {
                    lower[at(i, j)] = s / lower[at(j, j)];
                }
            }
        }
        Ok(BandedCholesky { layout: layout.clone(), n, bw, lower })
    }

    pub fn solve<T: Scalar>(&self, rhs: &[T]) -> Vec<T> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let at = |i: usize, j: usize| i * w + j + bw - i;
        let mut x = self.layout.to_new(rhs);
        for i in 0..n {
            let mut s = x[i];
            for k in i.saturating_sub(bw)..i {
                s -= x[k] * self.lower[at(i, k)];
            }
            x[i] = s * (1.0 / self.lower[at(i, i)]);
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..=(i + bw).min(n - 1) {
                s -= x[k] * self.lower[at(k, i)];
            }
            x[i] = s * (1.0 / self.lower[at(i, i)]);
        }
        self.layout.to_old(&x)
    }
}
