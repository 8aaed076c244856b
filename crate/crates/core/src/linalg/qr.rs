//! Householder QR factorization, optionally with column pivoting.
//!
//! The factorization stores the normalized Householder reflectors
//! explicitly, so Q and Qᵀ are applied reflector by reflector instead of
//! ever being formed. Column pivoting orders the diagonal of R by
//! decreasing magnitude, which is what the rank decision reads.

use super::Matrix;

pub(super) struct QrFactors {
    /// Upper-triangular factor (entries below the diagonal are zeroed).
    pub r: Matrix,
    /// Reflector j acts on rows j.. ; stored normalized to unit length.
    reflectors: Vec<Vec<f64>>,
    /// Column permutation: factored column j came from input column perm[j].
    pub perm: Vec<usize>,
    rows: usize,
}

pub(super) fn factorize(a: &Matrix, pivot: bool) -> QrFactors {
    let m = a.rows();
    let n = a.cols();
    let mut r = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(m.min(n));

    for j in 0..m.min(n) {
        if pivot {
            // column norms over the remaining rows, recomputed each step
            let mut best = j;
            let mut best_norm = 0.0;
            for c in j..n {
                let norm_sq: f64 = (j..m).map(|i| r[(i, c)] * r[(i, c)]).sum();
                if norm_sq > best_norm {
                    best_norm = norm_sq;
                    best = c;
                }
            }
            if best != j {
                r.swap_cols(j, best);
                perm.swap(j, best);
            }
        }

        let norm: f64 = (j..m).map(|i| r[(i, j)] * r[(i, j)]).sum::<f64>().sqrt();
        if norm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        let alpha = if r[(j, j)] >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (j..m).map(|i| r[(i, j)]).collect();
        v[0] -= alpha;
        let v_norm: f64 = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        if v_norm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        for t in v.iter_mut() {
            *t /= v_norm;
        }
        // apply H = I - 2vv^T to the trailing block
        for c in j..n {
            let dot: f64 = (0..v.len()).map(|i| v[i] * r[(j + i, c)]).sum();
            for i in 0..v.len() {
                r[(j + i, c)] -= 2.0 * dot * v[i];
            }
        }
        r[(j, j)] = alpha;
        for i in j + 1..m {
            r[(i, j)] = 0.0;
        }
        reflectors.push(v);
    }

    QrFactors {
        r,
        reflectors,
        perm,
        rows: m,
    }
}

impl QrFactors {
    /// Magnitudes of the R diagonal, in factored column order.
    pub fn diag_magnitudes(&self) -> Vec<f64> {
        (0..self.reflectors.len())
            .map(|j| self.r[(j, j)].abs())
            .collect()
    }

    /// Numerical rank: diagonal magnitudes above `rel_tol` times the
    /// largest one. With pivoting the diagonal is decreasing, so this is a
    /// prefix count.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let mags = self.diag_magnitudes();
        let largest = mags.iter().cloned().fold(0.0, f64::max);
        if largest == 0.0 {
            return 0;
        }
        mags.iter().filter(|&&m| m > rel_tol * largest).count()
    }

    /// b ← Qᵀ b.
    pub fn apply_qt(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.rows);
        for (j, v) in self.reflectors.iter().enumerate() {
            if v.is_empty() {
                continue;
            }
            let dot: f64 = (0..v.len()).map(|i| v[i] * b[j + i]).sum();
            for i in 0..v.len() {
                b[j + i] -= 2.0 * dot * v[i];
            }
        }
    }

    /// b ← Q b.
    pub fn apply_q(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.rows);
        for (j, v) in self.reflectors.iter().enumerate().rev() {
            if v.is_empty() {
                continue;
            }
            let dot: f64 = (0..v.len()).map(|i| v[i] * b[j + i]).sum();
            for i in 0..v.len() {
                b[j + i] -= 2.0 * dot * v[i];
            }
        }
    }

    /// Solve the leading r×r upper-triangular block R u = c.
    pub fn solve_upper(&self, c: &[f64]) -> Vec<f64> {
        let r = c.len();
        let mut u = c.to_vec();
        for i in (0..r).rev() {
            for k in i + 1..r {
                u[i] -= self.r[(i, k)] * u[k];
            }
            u[i] /= self.r[(i, i)];
        }
        u
    }

    /// Solve the leading r×r lower-triangular block Rᵀ w = c.
    pub fn solve_upper_transposed(&self, c: &[f64]) -> Vec<f64> {
        let r = c.len();
        let mut w = c.to_vec();
        for i in 0..r {
            for k in 0..i {
                w[i] -= self.r[(k, i)] * w[k];
            }
            w[i] /= self.r[(i, i)];
        }
        w
    }
}
