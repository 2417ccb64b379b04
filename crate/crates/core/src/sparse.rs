//! Compressed-row real matrices with the handful of operations the
//! operator assembly needs, plus conversion to faer for factorizations.

use std::io::Write;

use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl Csr {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), data: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![1.0; n])
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        Self { nrows: n, ncols: n, indptr: (0..=n).collect(), indices: (0..n).collect(), data: d.to_vec() }
    }

    /// Duplicate entries are summed; explicit zeros are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut data: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        let mut row_of = Vec::with_capacity(t.len());
        for (i, j, v) in t {
            debug_assert!(i < nrows && j < ncols, "triplet ({i},{j}) out of {nrows}x{ncols}");
            if last == Some((i, j)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                data.push(v);
                row_of.push(i);
                last = Some((i, j));
            }
        }
        let mut keep_idx = Vec::with_capacity(indices.len());
        let mut keep_val = Vec::with_capacity(data.len());
        for k in 0..indices.len() {
            if data[k] != 0.0 {
                indptr[row_of[k] + 1] += 1;
                keep_idx.push(indices[k]);
                keep_val.push(data[k]);
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Self { nrows, ncols, indptr, indices: keep_idx, data: keep_val }
    }

    pub fn from_dense(m: &Mat<f64>) -> Self {
        let mut t = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), t)
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.indptr[i]..self.indptr[i + 1]).map(move |k| (self.indices[k], self.data[k]))
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                t.push((i, j, v));
            }
        }
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows);
        let mut out = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                out[j] += v * y[i];
            }
        }
        out
    }

    pub fn transpose(&self) -> Csr {
        let mut t = self.triplets();
        for e in &mut t {
            std::mem::swap(&mut e.0, &mut e.1);
        }
        Csr::from_triplets(self.ncols, self.nrows, t)
    }

    pub fn scale(&self, a: f64) -> Csr {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= a);
        out
    }

    /// self + a * other
    pub fn add_scaled(&self, a: f64, other: &Csr) -> Csr {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t = self.triplets();
        t.extend(other.triplets().into_iter().map(|(i, j, v)| (i, j, a * v)));
        Csr::from_triplets(self.nrows, self.ncols, t)
    }

    pub fn sub(&self, other: &Csr) -> Csr {
        self.add_scaled(-1.0, other)
    }

    pub fn matmul(&self, other: &Csr) -> Csr {
        assert_eq!(self.ncols, other.nrows);
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut cols = Vec::new();
        let mut t = Vec::new();
        for i in 0..self.nrows {
            cols.clear();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        cols.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            for &j in &cols {
                t.push((i, j, acc[j]));
            }
        }
        Csr::from_triplets(self.nrows, other.ncols, t)
    }

    /// diag(left) * self * diag(right)
    pub fn scale_rows_cols(&self, left: &[f64], right: &[f64]) -> Csr {
        let mut out = self.clone();
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                out.data[k] *= left[i] * right[self.indices[k]];
            }
        }
        out
    }

    pub fn vstack(blocks: &[&Csr]) -> Csr {
        let ncols = blocks[0].ncols;
        let mut t = Vec::new();
        let mut off = 0;
        for b in blocks {
            assert_eq!(b.ncols, ncols);
            t.extend(b.triplets().into_iter().map(|(i, j, v)| (i + off, j, v)));
            off += b.nrows;
        }
        Csr::from_triplets(off, ncols, t)
    }

    pub fn block_diag(blocks: &[&Csr]) -> Csr {
        let mut t = Vec::new();
        let (mut r, mut c) = (0, 0);
        for b in blocks {
            t.extend(b.triplets().into_iter().map(|(i, j, v)| (i + r, j + c, v)));
            r += b.nrows;
            c += b.ncols;
        }
        Csr::from_triplets(r, c, t)
    }

    /// 2x2 block matrix; `None` blocks are zero.
    pub fn block2(blocks: [[Option<&Csr>; 2]; 2], rows: [usize; 2], cols: [usize; 2]) -> Csr {
        let mut t = Vec::new();
        for (bi, brow) in blocks.iter().enumerate() {
            for (bj, b) in brow.iter().enumerate() {
                if let Some(b) = b {
                    assert_eq!((b.nrows, b.ncols), (rows[bi], cols[bj]));
                    let (ro, co) = (if bi == 0 { 0 } else { rows[0] }, if bj == 0 { 0 } else { cols[0] });
                    t.extend(b.triplets().into_iter().map(|(i, j, v)| (i + ro, j + co, v)));
                }
            }
        }
        Csr::from_triplets(rows[0] + rows[1], cols[0] + cols[1], t)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Csr {
        let mut t = Vec::new();
        for (k, &i) in rows.iter().enumerate() {
            t.extend(self.row(i).map(|(j, v)| (k, j, v)));
        }
        Csr::from_triplets(rows.len(), self.ncols, t)
    }

    pub fn sub_block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Csr {
        let mut t = Vec::new();
        for i in r0..r1 {
            t.extend(self.row(i).filter(|&(j, _)| j >= c0 && j < c1).map(|(j, v)| (i - r0, j - c0, v)));
        }
        Csr::from_triplets(r1 - r0, c1 - c0, t)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Csr) -> f64 {
        self.sub(other).max_abs()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let t: Vec<Triplet<usize, usize, f64>> =
            self.triplets().into_iter().map(|(row, col, val)| Triplet { row, col, val }).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t)
            .map_err(|e| Error::Shape(format!("sparse conversion failed: {e:?}")))
    }

    /// Text triplet format: header line `rows cols nnz`, then `i j value` per line (0-based).
    pub fn write_triplets<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# scfloer-triplets v1")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(w, "{i} {j} {v:.17e}")?;
        }
        Ok(())
    }

    pub fn read_triplets(text: &str) -> Result<Csr> {
        let mut lines = text.lines().filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty());
        let bad = || Error::Format("malformed triplet file".into());
        let head: Vec<usize> =
            lines.next().ok_or_else(bad)?.split_whitespace().map(|x| x.parse().map_err(|_| bad())).collect::<Result<_>>()?;
        if head.len() != 3 {
            return Err(bad());
        }
        let mut t = Vec::with_capacity(head[2]);
        for l in lines {
            let p: Vec<&str> = l.split_whitespace().collect();
            if p.len() != 3 {
                return Err(bad());
            }
            let i: usize = p[0].parse().map_err(|_| bad())?;
            let j: usize = p[1].parse().map_err(|_| bad())?;
            if i >= head[0] || j >= head[1] {
                return Err(bad());
            }
            t.push((i, j, p[2].parse::<f64>().map_err(|_| bad())?));
        }
        if t.len() != head[2] {
            return Err(bad());
        }
        Ok(Csr::from_triplets(head[0], head[1], t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_csr(n: usize, m: usize, seed: u64) -> Csr {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for _ in 0..(n * m / 3 + 1) {
            t.push((rng.gen_range(0..n), rng.gen_range(0..m), rng.gen_range(-1.0..1.0)));
        }
        Csr::from_triplets(n, m, t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = Csr::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 1, 1.0), (1, 1, -1.0)]);
        assert_eq!(a.nnz(), 1);
        assert_eq!(a.to_dense()[(0, 0)], 3.0);
    }

    #[test]
    fn triplet_text_round_trip() {
        let a = random_csr(7, 5, 3);
        let mut buf = Vec::new();
        a.write_triplets(&mut buf).unwrap();
        assert_eq!(Csr::read_triplets(std::str::from_utf8(&buf).unwrap()).unwrap(), a);
    }

    proptest! {
        #[test]
        fn matmul_and_transpose_match_dense(seed in 0u64..500) {
            let a = random_csr(6, 4, seed);
            let b = random_csr(4, 5, seed + 1000);
            let c = a.matmul(&b).to_dense();
            let d = &a.to_dense() * &b.to_dense();
            for i in 0..6 { for j in 0..5 { prop_assert!((c[(i, j)] - d[(i, j)]).abs() < 1e-14); } }
            let x: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
            let y1 = a.matvec_t(&x);
            let y2 = a.transpose().matvec(&x);
            for (p, q) in y1.iter().zip(&y2) { prop_assert!((p - q).abs() < 1e-14); }
        }
    }
}
