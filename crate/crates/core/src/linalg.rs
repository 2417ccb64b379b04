//! Factorizations and rank-revealing helpers: the singular-value threshold
//! policy, kernel/cokernel extraction (dense SVD for small systems, sparse
//! shift-invert subspace iteration otherwise) and a sparse LU wrapper.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::Mat;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::sparse::Csr;

/// Systems with at most this many rows + columns go through a dense SVD.
pub const DENSE_LIMIT: usize = 3000;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Threshold {
    pub threshold: f64,
    pub sv_gap: f64,
}

/// threshold = max(1e-10 sigma_max, geometric midpoint of the widest ratio gap
/// whose lower end lies below 1e-4 sigma_max). `values` must contain every
/// singular value below the gap that matters (sorted or not).
pub fn threshold_policy(values: &[f64], sigma_max: f64) -> Threshold {
    let floor = 1e-10 * sigma_max;
    let mut v: Vec<f64> = values.iter().map(|x| x.max(0.0)).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best = (1.0, floor);
    for w in v.windows(2) {
        if w[0] >= 1e-4 * sigma_max {
            break;
        }
        let lo = w[0].max(1e-300);
        let ratio = w[1] / lo;
        if ratio > best.0 {
            best = (ratio, (lo * w[1]).sqrt());
        }
    }
    let threshold = floor.max(best.1);
    Threshold { threshold, sv_gap: gap_for(&v, threshold) }
}

pub fn gap_for(values: &[f64], threshold: f64) -> f64 {
    let retained = values.iter().copied().filter(|&x| x > threshold).fold(f64::INFINITY, f64::min);
    let discarded = values.iter().copied().filter(|&x| x <= threshold).fold(0.0, f64::max);
    if retained.is_infinite() {
        return f64::INFINITY;
    }
    retained / discarded.max(threshold).max(1e-300)
}

/// Kernel and cokernel of a real matrix with the singular values that decided them.
#[derive(Clone, Debug)]
pub struct NullSpaces {
    pub nrows: usize,
    pub ncols: usize,
    /// Orthonormal kernel basis, one column per kernel vector.
    pub kernel: Mat<f64>,
    /// Orthonormal cokernel basis (left null vectors).
    pub cokernel: Mat<f64>,
    /// Smallest singular values seen from the right (ascending).
    pub right_values: Vec<f64>,
    /// Smallest singular values seen from the left (ascending).
    pub left_values: Vec<f64>,
    pub sigma_max: f64,
    pub threshold: f64,
    pub sv_gap: f64,
    pub dense: bool,
}

impl NullSpaces {
    pub fn dim_ker(&self) -> usize {
        self.kernel.ncols()
    }
    pub fn dim_coker(&self) -> usize {
        self.cokernel.ncols()
    }
    pub fn index(&self) -> i64 {
        self.dim_ker() as i64 - self.dim_coker() as i64
    }
}

pub fn null_spaces(a: &Csr) -> Result<NullSpaces> {
    if a.nrows + a.ncols <= DENSE_LIMIT {
        null_spaces_dense(&a.to_dense())
    } else {
        null_spaces_sparse(a)
    }
}

pub fn null_spaces_dense(a: &Mat<f64>) -> Result<NullSpaces> {
    let (n, m) = (a.nrows(), a.ncols());
    if n == 0 || m == 0 {
        return Ok(NullSpaces {
            nrows: n,
            ncols: m,
            kernel: Mat::identity(m, m),
            cokernel: Mat::identity(n, n),
            right_values: vec![],
            left_values: vec![],
            sigma_max: 0.0,
            threshold: 0.0,
            sv_gap: f64::INFINITY,
            dense: true,
        });
    }
    let svd = a.svd().map_err(|e| Error::NoConvergence(format!("svd: {e:?}")))?;
    let k = n.min(m);
    let s: Vec<f64> = (0..k).map(|i| svd.S()[i]).collect();
    let sigma_max = s.iter().copied().fold(0.0, f64::max);
    // zero singular values for the dimension excess on each side
    let mut right = s.clone();
    right.extend(std::iter::repeat(0.0).take(m - k));
    let mut left = s.clone();
    left.extend(std::iter::repeat(0.0).take(n - k));
    let mut all = s.clone();
    all.extend(std::iter::repeat(0.0).take(m.max(n) - k));
    let th = threshold_policy(&all, sigma_max);
    let rank = s.iter().filter(|&&x| x > th.threshold).count();
    // faer orders singular values non-increasingly
    let kernel = svd.V().subcols(rank, m - rank).to_owned();
    let cokernel = svd.U().subcols(rank, n - rank).to_owned();
    right.sort_by(|x, y| x.partial_cmp(y).unwrap());
    left.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(NullSpaces {
        nrows: n,
        ncols: m,
        kernel,
        cokernel,
        right_values: right,
        left_values: left,
        sigma_max,
        threshold: th.threshold,
        sv_gap: th.sv_gap,
        dense: true,
    })
}

/// Power-iteration estimate of the largest singular value.
pub fn sigma_max_estimate(a: &Csr) -> f64 {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut x: Vec<f64> = (0..a.ncols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut est = 0.0;
    for _ in 0..60 {
        let nx = norm(&x);
        if nx == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        let y = a.matvec(&x);
        est = norm(&y);
        x = a.matvec_t(&y);
    }
    est
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub struct SparseLu {
    lu: Lu<usize, f64>,
    pub n: usize,
}

impl SparseLu {
    pub fn new(a: &Csr) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::Shape(format!("LU needs a square matrix, got {}x{}", a.nrows, a.ncols)));
        }
        let lu = a.to_faer()?.sp_lu().map_err(|e| Error::Singular(format!("sparse LU: {e:?}")))?;
        Ok(Self { lu, n: a.nrows })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut m = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place(m.as_mut());
        (0..self.n).map(|i| m[(i, 0)]).collect()
    }

    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let mut m = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_transpose_in_place(m.as_mut());
        (0..self.n).map(|i| m[(i, 0)]).collect()
    }

    pub fn solve_mat(&self, b: &Mat<f64>) -> Mat<f64> {
        let mut m = b.clone();
        self.lu.solve_in_place(m.as_mut());
        m
    }
}

/// Bordered system [[A, C], [K^T, 0]] for a square A with a (near) kernel.
/// Border entries below `keep` times the column maximum are dropped so the
/// factorization stays sparse; the solution then satisfies K~^T x = 0 for the
/// truncated border K~.
pub struct BorderedLu {
    lu: SparseLu,
    pub n: usize,
    pub kernel_border: Mat<f64>,
    pub cokernel_border: Mat<f64>,
}

impl BorderedLu {
    pub fn new(a: &Csr, kernel: &Mat<f64>, cokernel: &Mat<f64>, keep: f64) -> Result<Self> {
        let (n, k, l) = (a.nrows, kernel.ncols(), cokernel.ncols());
        if a.ncols + l != n + k {
            return Err(Error::Shape(format!("bordered system with {k} kernel and {l} cokernel columns is not square")));
        }
        let trunc = |m: &Mat<f64>| {
            let mut out = m.clone();
            for c in 0..m.ncols() {
                let mx = (0..m.nrows()).map(|i| m[(i, c)].abs()).fold(0.0, f64::max);
                for i in 0..m.nrows() {
                    if m[(i, c)].abs() < keep * mx {
                        out[(i, c)] = 0.0;
                    }
                }
            }
            out
        };
        let (kb, cb) = (trunc(kernel), trunc(cokernel));
        let mut t = a.triplets();
        for c in 0..l {
            t.extend((0..n).filter(|&i| cb[(i, c)] != 0.0).map(|i| (i, a.ncols + c, cb[(i, c)])));
        }
        for c in 0..k {
            t.extend((0..a.ncols).filter(|&i| kb[(i, c)] != 0.0).map(|i| (n + c, i, kb[(i, c)])));
        }
        let lu = SparseLu::new(&Csr::from_triplets(n + k, n + k, t))?;
        Ok(Self { lu, n, kernel_border: kb, cokernel_border: cb })
    }

    /// Solves A x + C~ lambda = f, K~^T x = 0; returns (x, lambda).
    pub fn solve(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let k = self.kernel_border.ncols();
        let mut rhs = f.to_vec();
        rhs.extend(std::iter::repeat(0.0).take(k));
        let mut x = self.lu.solve(&rhs);
        let ncols = self.n + k - self.cokernel_border.ncols();
        let lambda = x.split_off(ncols);
        (x, lambda)
    }
}

/// Orthonormal basis of the column span, dropping directions below `rel_tol`.
pub fn orth(m: &Mat<f64>, rel_tol: f64) -> Mat<f64> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return Mat::zeros(m.nrows(), 0);
    }
    let svd = m.thin_svd().expect("thin svd");
    let s0 = svd.S()[0];
    let k = (0..m.ncols().min(m.nrows())).filter(|&i| svd.S()[i] > rel_tol * s0 && s0 > 0.0).count();
    svd.U().subcols(0, k).to_owned()
}

pub fn csr_times_dense(a: &Csr, x: &Mat<f64>) -> Mat<f64> {
    let mut out = Mat::zeros(a.nrows, x.ncols());
    for c in 0..x.ncols() {
        let col: Vec<f64> = (0..x.nrows()).map(|i| x[(i, c)]).collect();
        let y = a.matvec(&col);
        for (i, v) in y.into_iter().enumerate() {
            out[(i, c)] = v;
        }
    }
    out
}

pub fn column(m: &Mat<f64>, c: usize) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, c)]).collect()
}

/// Smallest singular triplets of a large sparse matrix via block inverse
/// iteration on the symmetric embedding [[0, A], [A^T, 0]] shifted slightly
/// off zero. Both null spaces fall out of one factorization.
pub fn null_spaces_sparse(a: &Csr) -> Result<NullSpaces> {
    let (n, m) = (a.nrows, a.ncols);
    let sigma_max = sigma_max_estimate(a);
    if sigma_max == 0.0 {
        return null_spaces_dense(&a.to_dense());
    }
    let shift = 1e-9 * sigma_max;
    let mut t = Vec::with_capacity(2 * a.nnz() + n + m);
    for (i, j, v) in a.triplets() {
        t.push((i, n + j, v));
        t.push((n + j, i, v));
    }
    for i in 0..n + m {
        t.push((i, i, -shift));
    }
    let h = Csr::from_triplets(n + m, n + m, t);
    let lu = SparseLu::new(&h)?;
    let at = a.transpose();
    let mut p = 8usize;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    loop {
        let mut x = Mat::from_fn(n + m, p, |_, _| rng.gen_range(-1.0..1.0));
        for _ in 0..10 {
            x = orth(&lu.solve_mat(&x), 1e-14);
        }
        let xu = orth(&Mat::from_fn(n, x.ncols(), |i, j| x[(i, j)]), 1e-10);
        let xv = orth(&Mat::from_fn(m, x.ncols(), |i, j| x[(n + i, j)]), 1e-10);
        let (right_vals, right_vecs) = ritz(a, &xv)?;
        let (left_vals, left_vecs) = ritz(&at, &xu)?;
        let mut all = right_vals.clone();
        all.extend(&left_vals);
        let th = threshold_policy(&all, sigma_max);
        let nk = right_vals.iter().filter(|&&s| s <= th.threshold).count();
        let nc = left_vals.iter().filter(|&&s| s <= th.threshold).count();
        let enough = nk + 2 <= right_vals.len() && nc + 2 <= left_vals.len();
        if !enough && 2 * p <= (n + m).min(512) {
            p *= 2;
            continue;
        }
        let kernel = Mat::from_fn(m, nk, |i, j| right_vecs[(i, j)]);
        let cokernel = Mat::from_fn(n, nc, |i, j| left_vecs[(i, j)]);
        return Ok(NullSpaces {
            nrows: n,
            ncols: m,
            kernel,
            cokernel,
            right_values: right_vals,
            left_values: left_vals,
            sigma_max,
            threshold: th.threshold,
            sv_gap: th.sv_gap,
            dense: false,
        });
    }
}

/// Singular values of `a` restricted to span(basis), ascending, with the
/// corresponding unit vectors (columns, same order).
fn ritz(a: &Csr, basis: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let q = basis.ncols();
    if q == 0 {
        return Ok((vec![], Mat::zeros(basis.nrows(), 0)));
    }
    let av = csr_times_dense(a, basis);
    let svd = av.thin_svd().map_err(|e| Error::NoConvergence(format!("ritz svd: {e:?}")))?;
    let k = q.min(av.nrows());
    let mut vals: Vec<f64> = (0..k).map(|i| svd.S()[i]).collect();
    let mut w = svd.V().to_owned();
    // thin SVD of a wide product leaves q - k directions with value 0
    if k < q {
        vals.extend(std::iter::repeat(0.0).take(q - k));
        let full = av.svd().map_err(|e| Error::NoConvergence(format!("ritz svd: {e:?}")))?;
        w = full.V().to_owned();
    }
    let vecs = basis * &w;
    let order: Vec<usize> = (0..q).rev().collect();
    let sorted_vals = order.iter().map(|&i| vals[i]).collect();
    let sorted_vecs = Mat::from_fn(basis.nrows(), q, |i, j| vecs[(i, order[j])]);
    Ok((sorted_vals, sorted_vecs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_policy_examples() {
        let t = threshold_policy(&[1.0, 0.5, 1e-13, 0.0], 1.0);
        assert!(t.threshold > 1e-13 && t.threshold < 0.5);
        assert!(t.sv_gap > 10.0);
        let t = threshold_policy(&[1.0, 0.5, 0.2], 1.0);
        assert_eq!(t.threshold, 1e-10);
    }

    #[test]
    fn dense_identity_and_zero() {
        let ns = null_spaces_dense(&Mat::identity(5, 5)).unwrap();
        assert_eq!((ns.dim_ker(), ns.dim_coker()), (0, 0));
        let ns = null_spaces_dense(&Mat::zeros(4, 4)).unwrap();
        assert_eq!((ns.dim_ker(), ns.dim_coker()), (4, 4));
    }

    fn path_laplacian_like(n: usize) -> Csr {
        // forward difference: n-1 x n, kernel = constants, full row rank
        let mut t = Vec::new();
        for i in 0..n - 1 {
            t.push((i, i, -1.0));
            t.push((i, i + 1, 1.0));
        }
        Csr::from_triplets(n - 1, n, t)
    }

    #[test]
    fn sparse_matches_dense_on_difference_operator() {
        let a = path_laplacian_like(2000);
        let s = null_spaces_sparse(&a).unwrap();
        assert_eq!((s.dim_ker(), s.dim_coker()), (1, 0));
        let v = column(&s.kernel, 0);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!(v.iter().all(|x| (x - mean).abs() < 1e-8));
        let at = a.transpose();
        let s = null_spaces_sparse(&at).unwrap();
        assert_eq!((s.dim_ker(), s.dim_coker()), (0, 1));
        let small = path_laplacian_like(40);
        let d = null_spaces_dense(&small.to_dense()).unwrap();
        assert_eq!((d.dim_ker(), d.dim_coker()), (1, 0));
    }

    #[test]
    fn lu_solves() {
        let a = Csr::from_triplets(3, 3, vec![(0, 0, 2.0), (1, 1, 3.0), (2, 2, 4.0), (0, 2, 1.0)]);
        let lu = SparseLu::new(&a).unwrap();
        let x = lu.solve(&[1.0, 2.0, 3.0]);
        let r = a.matvec(&x);
        assert!((r[0] - 1.0).abs() < 1e-14 && (r[2] - 3.0).abs() < 1e-14);
        let y = lu.solve_transpose(&[1.0, 2.0, 3.0]);
        let r = a.matvec_t(&y);
        assert!((r[0] - 1.0).abs() < 1e-14 && (r[2] - 3.0).abs() < 1e-14);
    }
}
