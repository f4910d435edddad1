//! Small numerical helpers shared by the modules.

use nalgebra::DMatrix;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `k`-th point (1-based) of the Halton sequence in `(0,1)^dim`.
pub fn halton(k: usize, dim: usize) -> Vec<f64> {
    const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    assert!(dim <= PRIMES.len(), "halton: dimension {dim} unsupported");
    PRIMES[..dim]
        .iter()
        .map(|&base| {
            let mut f = 1.0;
            let mut r = 0.0;
            let mut i = k;
            while i > 0 {
                f /= base as f64;
                r += f * (i % base) as f64;
                i /= base;
            }
            r
        })
        .collect()
}

/// Singular values of a dense row-major matrix, largest first.
pub fn singular_values(rows: &[Vec<f64>]) -> Vec<f64> {
    let m = rows.len();
    let n = rows.first().map_or(0, |r| r.len());
    let mat = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
    let mut sv: Vec<f64> = mat.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Numerical rank with singular values above `rel_tol * σ_max`.
pub fn numerical_rank(singular: &[f64], rel_tol: f64) -> usize {
    let largest = singular.first().copied().unwrap_or(0.0);
    if largest == 0.0 {
        return 0;
    }
    singular.iter().filter(|s| **s > rel_tol * largest).count()
}

/// Solves the small dense system `a x = b`, `None` when singular.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mat = DMatrix::from_fn(n, n, |i, j| a[i][j]);
    let rhs = nalgebra::DVector::from_column_slice(b);
    mat.lu().solve(&rhs).map(|x| x.iter().copied().collect())
}

/// Symmetric positive definite matrix in lower band storage.
#[derive(Debug, Clone)]
pub struct BandedSpd {
    n: usize,
    bw: usize,
    // row i holds entries (i, i - bw ..= i), stored at i * (bw + 1) + (j + bw - i)
    data: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSpd {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Adds `v` at `(i, j)` for `j <= i`.
    #[inline]
    pub fn add_lower(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if i - j > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.data[self.idx(i, i)]).collect()
    }

    pub fn add_diagonal(&mut self, d: &[f64]) {
        for (i, v) in d.iter().enumerate() {
            let k = self.idx(i, i);
            self.data[k] += v;
        }
    }

    /// In-place Cholesky factorisation; `false` if the matrix is not positive definite.
    pub fn factor(&mut self) -> bool {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = if j >= bw { j - bw } else { 0 }.max(j0);
                let mut s = self.data[self.idx(i, j)];
                let ri = i * (bw + 1) + bw - i;
                let rj = j * (bw + 1) + bw - j;
                for k in k0..j {
                    s -= self.data[ri + k] * self.data[rj + k];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return false;
                    }
                    let k = self.idx(i, i);
                    self.data[k] = s.sqrt();
                } else {
                    let d = self.data[self.idx(j, j)];
                    let k = self.idx(i, j);
                    self.data[k] = s / d;
                }
            }
        }
        true
    }

    /// Solves with a factor produced by [`BandedSpd::factor`].
    pub fn solve_factored(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let mut y = b.to_vec();
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let mut s = y[i];
            for j in j0..i {
                s -= self.data[self.idx(i, j)] * y[j];
            }
            y[i] = s / self.data[self.idx(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            let hi = (i + bw).min(n - 1);
            for j in i + 1..=hi {
                s -= self.data[self.idx(j, i)] * y[j];
            }
            y[i] = s / self.data[self.idx(i, i)];
        }
        y
    }
}

/// Cubic Lagrange interpolation weights on a uniform 1-D grid of `n` nodes over `[lo, hi]`.
///
/// Returns up to four `(node, weight)` pairs; falls back to lower order on tiny grids.
pub fn lagrange_weights(lo: f64, hi: f64, n: usize, x: f64) -> Vec<(usize, f64)> {
    if n == 1 {
        return vec![(0, 1.0)];
    }
    let h = (hi - lo) / (n - 1) as f64;
    let s = (x - lo) / h;
    let order = n.min(4);
    let mut start = s.floor() as isize - (order as isize / 2 - 1);
    start = start.clamp(0, (n - order) as isize);
    let nodes: Vec<usize> = (0..order).map(|k| start as usize + k).collect();
    nodes
        .iter()
        .map(|&i| {
            let w = nodes
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| (s - j as f64) / (i as f64 - j as f64))
                .product::<f64>();
            (i, w)
        })
        .collect()
}
