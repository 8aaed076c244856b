//! Dense small-scale linear algebra: numerical rank, minimum-norm least
//! squares, and dual bases paired with gradient functionals.
//!
//! Rows of a [`Matrix`] play the role of linear functionals T_i (in
//! practice, constraint gradients at a point). The central construction is
//! [`dual_basis`]: vectors v_j with `T_i · v_j = δ_ij`, realized
//! constructively as the minimum-norm solutions of `T v = e_j` through a
//! Householder QR factorization rather than any explicit inverse.

mod qr;

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default relative rank tolerance: diagonal magnitudes below this times
/// the largest magnitude are treated as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Pairing deviation allowed for a dual basis: max |T_i·v_j − δ_ij|.
pub const DUAL_BASIS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error("rows have inconsistent lengths")]
    RaggedRows,
    #[error("rows are not linearly independent: numerical rank {rank} of {rows}")]
    RankDeficient { rank: usize, rows: usize },
    #[error("dual basis pairing deviates by {deviation:.3e} (limit {limit:.3e})")]
    IllConditioned { deviation: f64, limit: f64 },
}

/// Dense row-major matrix of finite reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(cols >= 1, "matrix needs at least one column");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Build from row vectors. An empty row list yields the 0×1 matrix.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, LinalgError> {
        if rows.is_empty() {
            return Ok(Matrix {
                rows: 0,
                cols: 1,
                data: Vec::new(),
            });
        }
        let cols = rows[0].len();
        if cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(LinalgError::RaggedRows);
        }
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Matrix {
            rows: data.len() / cols,
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        assert!(self.rows > 0, "cannot transpose a matrix with no rows");
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub(crate) fn swap_cols(&mut self, a: usize, b: usize) {
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Outcome of a numerical rank decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub numerical_rank: usize,
    /// Diagonal magnitudes of the column-pivoted QR factor, descending.
    pub magnitudes: Vec<f64>,
    /// Relative tolerance the decision used.
    pub tolerance_used: f64,
    /// True when the numerical rank equals the row count.
    pub independent: bool,
}

/// Numerical rank of `m` at relative tolerance `tol`: the count of
/// column-pivoted QR diagonal magnitudes exceeding `tol` times the largest
/// magnitude. The zero matrix (and the empty matrix) has rank 0.
pub fn rank_with_tolerance(m: &Matrix, tol: f64) -> RankReport {
    assert!(tol > 0.0, "rank tolerance must be positive");
    if m.rows() == 0 {
        return RankReport {
            numerical_rank: 0,
            magnitudes: Vec::new(),
            tolerance_used: tol,
            independent: true,
        };
    }
    let f = qr::factorize(m, true);
    let mut magnitudes = f.diag_magnitudes();
    let numerical_rank = f.rank(tol);
    magnitudes.sort_by(|a, b| b.partial_cmp(a).unwrap());
    RankReport {
        numerical_rank,
        magnitudes,
        tolerance_used: tol,
        independent: numerical_rank == m.rows(),
    }
}

/// Minimum-Euclidean-norm minimizer of ‖Ax − b‖₂.
///
/// Always defined: rank-deficient and even zero matrices are handled by a
/// complete orthogonal decomposition (column-pivoted QR followed by a QR
/// of the transposed leading block) at [`DEFAULT_RANK_TOL`].
pub fn least_squares_min_norm(a: &Matrix, b: &[f64]) -> Vec<f64> {
    assert_eq!(b.len(), a.rows(), "rhs length must match row count");
    let d = a.cols();
    if a.rows() == 0 {
        return vec![0.0; d];
    }
    let f = qr::factorize(a, true);
    let rank = f.rank(DEFAULT_RANK_TOL);
    if rank == 0 {
        return vec![0.0; d];
    }
    let mut qtb = b.to_vec();
    f.apply_qt(&mut qtb);
    let c = &qtb[..rank];

    let u_permuted = if rank == d {
        f.solve_upper(c)
    } else {
        // Factor the transposed leading block of R to expose its row
        // space; solving there keeps the answer minimum-norm when the
        // system is wide or rank-deficient.
        let mut rt = Matrix::zeros(d, rank);
        for i in 0..rank {
            for j in 0..d {
                rt[(j, i)] = f.r[(i, j)];
            }
        }
        let f2 = qr::factorize(&rt, false);
        let w = f2.solve_upper_transposed(c);
        let mut u = vec![0.0; d];
        u[..rank].copy_from_slice(&w);
        f2.apply_q(&mut u);
        u
    };

    let mut x = vec![0.0; d];
    for (j, &col) in f.perm.iter().enumerate().take(u_permuted.len()) {
        x[col] = u_permuted[j];
    }
    x
}

/// A family of vectors v_j paired with the rows T_i of the matrix that
/// produced it: `T_i · v_j = δ_ij`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualBasis {
    pub vectors: Vec<Vec<f64>>,
}

impl DualBasis {
    /// Max |T_i·v_j − δ_ij| over all pairs — the defining check.
    pub fn pairing_deviation(&self, t: &Matrix) -> f64 {
        let mut worst = 0.0_f64;
        for (j, v) in self.vectors.iter().enumerate() {
            let image = t.matvec(v);
            for (i, &val) in image.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((val - target).abs());
            }
        }
        worst
    }
}

/// Dual (quasi-primal) basis for the rows of `t`: each v_j is the
/// minimum-norm solution of `T v = e_j`, computed from one QR
/// factorization of Tᵀ.
///
/// Errors with [`LinalgError::RankDeficient`] when the rows fail the rank
/// test at [`DEFAULT_RANK_TOL`], mirroring the linear-independence
/// hypothesis the construction needs.
pub fn dual_basis(t: &Matrix) -> Result<DualBasis, LinalgError> {
    let k = t.rows();
    if k == 0 {
        return Ok(DualBasis {
            vectors: Vec::new(),
        });
    }
    let report = rank_with_tolerance(t, DEFAULT_RANK_TOL);
    if !report.independent {
        return Err(LinalgError::RankDeficient {
            rank: report.numerical_rank,
            rows: k,
        });
    }
    let d = t.cols();
    let f = qr::factorize(&t.transpose(), false);
    let mut vectors = Vec::with_capacity(k);
    for j in 0..k {
        let mut e = vec![0.0; k];
        e[j] = 1.0;
        let z = f.solve_upper_transposed(&e);
        let mut v = vec![0.0; d];
        v[..k].copy_from_slice(&z);
        f.apply_q(&mut v);
        vectors.push(v);
    }
    let basis = DualBasis { vectors };
    let deviation = basis.pairing_deviation(t);
    if deviation > DUAL_BASIS_TOL {
        return Err(LinalgError::IllConditioned {
            deviation,
            limit: DUAL_BASIS_TOL,
        });
    }
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn rank_of_identity() {
        let r = rank_with_tolerance(&Matrix::identity(2), 1e-10);
        assert_eq!(r.numerical_rank, 2);
        assert!(r.independent);
    }

    #[test]
    fn rank_of_parallel_rows() {
        let r = rank_with_tolerance(&mat(&[&[1.0, 0.0], &[2.0, 0.0]]), 1e-10);
        assert_eq!(r.numerical_rank, 1);
        assert!(!r.independent);
    }

    #[test]
    fn rank_below_tolerance_collapses() {
        let r = rank_with_tolerance(&mat(&[&[1.0, 1.0], &[1.0, 1.0 + 1e-14]]), 1e-10);
        assert_eq!(r.numerical_rank, 1);
    }

    #[test]
    fn rank_of_zero_and_empty() {
        let r = rank_with_tolerance(&mat(&[&[0.0, 0.0]]), 1e-10);
        assert_eq!(r.numerical_rank, 0);
        assert!(!r.independent);
        let empty = Matrix::from_rows(Vec::new()).unwrap();
        let r = rank_with_tolerance(&empty, 1e-10);
        assert_eq!(r.numerical_rank, 0);
        assert!(r.independent); // zero rows are vacuously independent
    }

    #[test]
    fn lsq_identity() {
        let x = least_squares_min_norm(&Matrix::identity(2), &[3.0, 4.0]);
        assert!((x[0] - 3.0).abs() < 1e-14);
        assert!((x[1] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn lsq_min_norm_on_wide_system() {
        // x0 + x1 = 1 has min-norm solution (0.5, 0.5)
        let x = least_squares_min_norm(&mat(&[&[1.0, 1.0]]), &[1.0]);
        assert!((x[0] - 0.5).abs() < 1e-14);
        assert!((x[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn lsq_diagonal() {
        let x = least_squares_min_norm(&mat(&[&[2.0, 0.0], &[0.0, 3.0]]), &[1.0, 1.0]);
        assert!((x[0] - 0.5).abs() < 1e-14);
        assert!((x[1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn lsq_zero_matrix_gives_zero() {
        let x = least_squares_min_norm(&mat(&[&[0.0, 0.0]]), &[5.0]);
        assert_eq!(x, vec![0.0, 0.0]);
    }

    #[test]
    fn lsq_overdetermined_full_column_rank() {
        // rows (1,0), (0,1), (1,1); b = (1,2,3): normal equations
        // [[2,1],[1,2]] x = (4,5) give x = (1, 2)
        let a = mat(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let x = least_squares_min_norm(&a, &[1.0, 2.0, 3.0]);
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lsq_rank_deficient_tall_system() {
        // two identical columns: the fit needs x0 + x1 = 2, and the
        // min-norm representative splits it evenly as (1, 1)
        let a = mat(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let x = least_squares_min_norm(&a, &[2.0, 2.0]);
        assert!((x[0] - 1.0).abs() < 1e-13);
        assert!((x[1] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn dual_basis_of_identity_is_identity() {
        let b = dual_basis(&Matrix::identity(2)).unwrap();
        assert!((b.vectors[0][0] - 1.0).abs() < 1e-14);
        assert!(b.vectors[0][1].abs() < 1e-14);
        assert!((b.vectors[1][1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dual_basis_of_diagonal_is_reciprocal() {
        let b = dual_basis(&mat(&[&[2.0, 0.0], &[0.0, 3.0]])).unwrap();
        assert!((b.vectors[0][0] - 0.5).abs() < 1e-14);
        assert!((b.vectors[1][1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn dual_basis_hand_solved_two_by_two() {
        // rows (0,1) and (2,2): v_1 = (-1, 1), v_2 = (0.5, 0)
        let t = mat(&[&[0.0, 1.0], &[2.0, 2.0]]);
        let b = dual_basis(&t).unwrap();
        assert!((b.vectors[0][0] + 1.0).abs() < 1e-13);
        assert!((b.vectors[0][1] - 1.0).abs() < 1e-13);
        assert!((b.vectors[1][0] - 0.5).abs() < 1e-13);
        assert!(b.vectors[1][1].abs() < 1e-13);
        assert!(b.pairing_deviation(&t) < 1e-13);
    }

    #[test]
    fn dual_basis_rejects_dependent_rows() {
        let err = dual_basis(&mat(&[&[1.0, 0.0], &[2.0, 0.0]])).unwrap_err();
        assert_eq!(err, LinalgError::RankDeficient { rank: 1, rows: 2 });
    }

    #[test]
    fn dual_basis_wide_matrix_is_min_norm() {
        // single row (3, 4): the min-norm preimage of 1 is (3, 4)/25
        let t = mat(&[&[3.0, 4.0]]);
        let b = dual_basis(&t).unwrap();
        assert!((b.vectors[0][0] - 0.12).abs() < 1e-14);
        assert!((b.vectors[0][1] - 0.16).abs() < 1e-14);
    }
}
