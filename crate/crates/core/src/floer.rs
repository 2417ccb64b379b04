//! Hamiltonian data on C^n, the perturbed Cauchy-Riemann operator on the
//! truncated cylinder, its linearization, energy, a Newton solver for
//! decaying trajectories, decay-rate fits and spectral flow.
//!
//! Real vector layout: index `2 * ((i_s * n_t + i_t) * dim + c) + {0: re, 1: im}`,
//! so each s-node owns one contiguous block of `2 * dim * n_t` reals.

use std::f64::consts::PI;
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{cutoff_beta, cutoff_beta_prime, diff_s, diff_t, dt_matrix, quadrature_weights, weight_profile, CylinderGrid, Field};
use crate::linalg::{norm, BorderedLu, SparseLu};
use crate::linear::ScOperator;
use crate::scale::WeightSequence;
use crate::sparse::Csr;

pub fn to_real(z: &[Complex64]) -> Vec<f64> {
    z.iter().flat_map(|w| [w.re, w.im]).collect()
}

pub fn from_real(v: &[f64]) -> Vec<Complex64> {
    v.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect()
}

fn matvec(m: &Mat<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum()).collect()
}

/// Multiplication by i on C^n in real coordinates.
pub fn complex_i(n: usize) -> Mat<f64> {
    let mut m = Mat::zeros(2 * n, 2 * n);
    for c in 0..n {
        m[(2 * c, 2 * c + 1)] = -1.0;
        m[(2 * c + 1, 2 * c)] = 1.0;
    }
    m
}

/// Floer data: an autonomous vector field with a nondegenerate zero at the
/// origin and a compatible almost complex structure, all in real coordinates.
pub trait HamiltonianModel: Send + Sync {
    fn dim(&self) -> usize;
    fn x(&self, z: &[Complex64]) -> Vec<Complex64>;
    /// Real Jacobian of X (2n x 2n).
    fn dx(&self, z: &[Complex64]) -> Mat<f64>;
    fn j(&self, z: &[Complex64]) -> Mat<f64>;
    /// Directional derivative of J at z along `dir`.
    fn dj(&self, z: &[Complex64], dir: &[Complex64]) -> Mat<f64>;
    /// Exponential decay constant of trajectories at the origin.
    fn delta_decay(&self) -> f64;
    /// Distance from 0 to the spectrum of the asymptotic operator.
    fn gap(&self) -> f64 {
        self.delta_decay()
    }
    fn id(&self) -> String;
    /// Whether J is constant (so both linearization variants coincide).
    fn constant_j(&self) -> bool {
        false
    }

    /// Real matrix of xi -> D_z(JX) xi = DJ[xi] X + J DX xi.
    fn d_jx(&self, z: &[Complex64]) -> Mat<f64> {
        let n2 = 2 * self.dim();
        let xr = to_real(&self.x(z));
        let jm = self.j(z);
        let mut out = &jm * &self.dx(z);
        if !self.constant_j() {
            for k in 0..n2 {
                let mut e = vec![0.0; n2];
                e[k] = 1.0;
                let col = matvec(&self.dj(z, &from_real(&e)), &xr);
                for i in 0..n2 {
                    out[(i, k)] += col[i];
                }
            }
        }
        out
    }
}

/// J = i, X(z) = i a z.
#[derive(Clone, Debug)]
pub struct LinearModel {
    pub a: f64,
    pub n: usize,
}

impl LinearModel {
    pub fn new(a: f64, n: usize) -> Result<Self> {
        if !(a > 0.0 && a < 2.0 * PI) || n == 0 {
            return Err(Error::InvalidParameter(format!("linear model needs 0 < a < 2 pi and n >= 1, got a = {a}, n = {n}")));
        }
        Ok(Self { a, n })
    }
}

impl HamiltonianModel for LinearModel {
    fn dim(&self) -> usize {
        self.n
    }
    fn x(&self, z: &[Complex64]) -> Vec<Complex64> {
        z.iter().map(|w| Complex64::new(0.0, self.a) * w).collect()
    }
    fn dx(&self, _z: &[Complex64]) -> Mat<f64> {
        complex_i(self.n) * faer::Scale(self.a)
    }
    fn j(&self, _z: &[Complex64]) -> Mat<f64> {
        complex_i(self.n)
    }
    fn dj(&self, _z: &[Complex64], _dir: &[Complex64]) -> Mat<f64> {
        Mat::zeros(2 * self.n, 2 * self.n)
    }
    fn delta_decay(&self) -> f64 {
        self.a.min(2.0 * PI - self.a)
    }
    fn id(&self) -> String {
        format!("linear(a={},n={})", self.a, self.n)
    }
    fn constant_j(&self) -> bool {
        true
    }
}

/// J = i, X(z) = i a z + eps chi(|z|^2) conj(z)^2 componentwise, with chi a
/// smooth cutoff equal to 1 on [0, 1] and 0 on [3, inf).
#[derive(Clone, Debug)]
pub struct PerturbedModel {
    pub a: f64,
    pub eps: f64,
    pub n: usize,
}

impl PerturbedModel {
    pub fn new(a: f64, eps: f64, n: usize) -> Result<Self> {
        LinearModel::new(a, n)?;
        if !eps.is_finite() {
            return Err(Error::InvalidParameter("eps must be finite".into()));
        }
        Ok(Self { a, eps, n })
    }
}

fn chi(u: f64) -> f64 {
    1.0 - cutoff_beta(u - 2.0)
}

fn chi_prime(u: f64) -> f64 {
    -cutoff_beta_prime(u - 2.0)
}

impl HamiltonianModel for PerturbedModel {
    fn dim(&self) -> usize {
        self.n
    }
    fn x(&self, z: &[Complex64]) -> Vec<Complex64> {
        let u: f64 = z.iter().map(|w| w.norm_sqr()).sum();
        let c = self.eps * chi(u);
        z.iter().map(|w| Complex64::new(0.0, self.a) * w + c * w.conj() * w.conj()).collect()
    }
    fn dx(&self, z: &[Complex64]) -> Mat<f64> {
        let n = self.n;
        let u: f64 = z.iter().map(|w| w.norm_sqr()).sum();
        let (ch, dch) = (chi(u), chi_prime(u));
        let mut m = complex_i(n) * faer::Scale(self.a);
        for c in 0..n {
            let w2 = z[c].conj() * z[c].conj();
            for d in 0..n {
                for p in 0..2 {
                    // direction: unit real (p = 0) or imaginary (p = 1) in component d
                    let dz = if p == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 1.0) };
                    let du = 2.0 * (z[d].re * dz.re + z[d].im * dz.im);
                    let mut v = self.eps * dch * du * w2;
                    if c == d {
                        v += self.eps * ch * 2.0 * z[c].conj() * dz.conj();
                    }
                    m[(2 * c, 2 * d + p)] += v.re;
                    m[(2 * c + 1, 2 * d + p)] += v.im;
                }
            }
        }
        m
    }
    fn j(&self, _z: &[Complex64]) -> Mat<f64> {
        complex_i(self.n)
    }
    fn dj(&self, _z: &[Complex64], _dir: &[Complex64]) -> Mat<f64> {
        Mat::zeros(2 * self.n, 2 * self.n)
    }
    fn delta_decay(&self) -> f64 {
        self.a.min(2.0 * PI - self.a)
    }
    fn id(&self) -> String {
        format!("perturbed(a={},eps={},n={})", self.a, self.eps, self.n)
    }
    fn constant_j(&self) -> bool {
        true
    }
}

/// One-dimensional model with an explicit t-independent connecting orbit from
/// the origin back to itself. With z = x + iy and F(x, y) = (mu y, mu x - x^2/mu),
/// X = -J F so that J X = F, and the orbit solves d_s gamma = F(gamma):
/// x = (3 mu^2 / 2) sech^2(mu s / 2), y = x' / mu. J = P i P^{-1} with
/// P = diag(1 + kappa x / (1 + |z|^2), 1) exercises a non-constant structure.
#[derive(Clone, Debug)]
pub struct HomoclinicModel {
    pub mu: f64,
    pub kappa: f64,
}

impl HomoclinicModel {
    pub fn new(mu: f64, kappa: f64) -> Result<Self> {
        if !(mu > 0.0 && mu < PI) {
            return Err(Error::InvalidParameter(format!("homoclinic model needs 0 < mu < pi, got {mu}")));
        }
        if !(kappa.abs() < 0.5) {
            return Err(Error::InvalidParameter(format!("|kappa| must stay below 0.5, got {kappa}")));
        }
        Ok(Self { mu, kappa })
    }

    fn f(&self, z: Complex64) -> [f64; 2] {
        let (x, y) = (z.re, z.im);
        [self.mu * y, self.mu * x - x * x / self.mu]
    }

    fn df(&self, z: Complex64) -> Mat<f64> {
        let x = z.re;
        let mut m = Mat::zeros(2, 2);
        m[(0, 1)] = self.mu;
        m[(1, 0)] = self.mu - 2.0 * x / self.mu;
        m
    }

    fn p(&self, z: Complex64) -> f64 {
        1.0 + self.kappa * z.re / (1.0 + z.norm_sqr())
    }

    fn dp(&self, z: Complex64, d: Complex64) -> f64 {
        let q = 1.0 + z.norm_sqr();
        let dq = 2.0 * (z.re * d.re + z.im * d.im);
        self.kappa * (d.re * q - z.re * dq) / (q * q)
    }

    /// The explicit orbit sampled on a grid (constant in t).
    pub fn orbit(&self, grid: &CylinderGrid) -> Field {
        let mu = self.mu;
        Field::from_fn(*grid, 1, |s, _, _| {
            let sech = 1.0 / (0.5 * mu * s).cosh();
            let x = 1.5 * mu * mu * sech * sech;
            let dx = -1.5 * mu * mu * mu * sech * sech * (0.5 * mu * s).tanh();
            Complex64::new(x, dx / mu)
        })
    }

    /// The orbit corrected by Newton to a solution of the discretized equation.
    pub fn discrete_orbit(&self, grid: &CylinderGrid) -> Result<Field> {
        Ok(solve_trajectory(self, &self.orbit(grid), 1e-12)?.gamma)
    }
}

impl HamiltonianModel for HomoclinicModel {
    fn dim(&self) -> usize {
        1
    }
    fn x(&self, z: &[Complex64]) -> Vec<Complex64> {
        let f = self.f(z[0]);
        let jf = matvec(&self.j(z), &f);
        vec![Complex64::new(-jf[0], -jf[1])]
    }
    fn dx(&self, z: &[Complex64]) -> Mat<f64> {
        // X = -J F, DX v = -DJ[v] F - J DF v
        let f = self.f(z[0]);
        let jm = self.j(z);
        let mut out = -(&jm * &self.df(z[0]));
        for k in 0..2 {
            let dir = if k == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 1.0) };
            let col = matvec(&self.dj(z, &[dir]), &f);
            out[(0, k)] -= col[0];
            out[(1, k)] -= col[1];
        }
        out
    }
    fn j(&self, z: &[Complex64]) -> Mat<f64> {
        let p = self.p(z[0]);
        let mut m = Mat::zeros(2, 2);
        m[(0, 1)] = -p;
        m[(1, 0)] = 1.0 / p;
        m
    }
    fn dj(&self, z: &[Complex64], dir: &[Complex64]) -> Mat<f64> {
        let p = self.p(z[0]);
        let dp = self.dp(z[0], dir[0]);
        let mut m = Mat::zeros(2, 2);
        m[(0, 1)] = -dp;
        m[(1, 0)] = -dp / (p * p);
        m
    }
    fn delta_decay(&self) -> f64 {
        self.mu
    }
    fn id(&self) -> String {
        format!("homoclinic(mu={},kappa={})", self.mu, self.kappa)
    }
    fn constant_j(&self) -> bool {
        self.kappa == 0.0
    }
    fn d_jx(&self, z: &[Complex64]) -> Mat<f64> {
        self.df(z[0])
    }
}

pub type SharedModel = Arc<dyn HamiltonianModel>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum Variant {
    /// Adds the DJ[xi] d_t(base) term produced by differentiating J(gamma).
    Full,
    /// d_s + J(base) d_t - D_base(JX) only.
    FrozenJ,
}

/// Size of one s-node block of reals.
pub fn node_size(n_t: usize, dim: usize) -> usize {
    2 * dim * n_t
}

/// Limit operator J(0) d_t - D_0(JX) on one node, its eigen-decomposition and sign.
#[derive(Clone, Debug)]
pub struct Asymptotics {
    pub n_t: usize,
    pub dim: usize,
    pub a_inf: Mat<f64>,
    /// Orthonormal eigenvectors (columns) sorted by eigenvalue.
    pub v: Mat<f64>,
    pub mu: Vec<f64>,
    pub sign: Mat<f64>,
}

fn dt_real_blocks(n_t: usize) -> Vec<Complex64> {
    dt_matrix(n_t, 1)
}

/// N x N node block of xi -> J(z_j) (d_t xi)_j - D_{z_j}(JX) xi_j [+ DJ[xi_j] (d_t z)_j].
pub fn node_block(model: &dyn HamiltonianModel, zs: &[Complex64], dtz: Option<&[Complex64]>, dt: &[Complex64], n_t: usize) -> Mat<f64> {
    let dim = model.dim();
    let n2 = 2 * dim;
    let big = node_size(n_t, dim);
    let mut m = Mat::zeros(big, big);
    for j in 0..n_t {
        let z = &zs[j * dim..(j + 1) * dim];
        let jm = model.j(z);
        for l in 0..n_t {
            let d = dt[j * n_t + l];
            if d.norm_sqr() == 0.0 {
                continue;
            }
            // J * (d acting on each component)
            for r in 0..n2 {
                for c in 0..dim {
                    let (a, b) = (jm[(r, 2 * c)], jm[(r, 2 * c + 1)]);
                    // columns: (re, im) of component c at t-point l; d*(x + iy)
                    m[(j * n2 + r, l * n2 + 2 * c)] += a * d.re + b * d.im;
                    m[(j * n2 + r, l * n2 + 2 * c + 1)] += -a * d.im + b * d.re;
                }
            }
        }
        let djx = model.d_jx(z);
        for r in 0..n2 {
            for c in 0..n2 {
                m[(j * n2 + r, j * n2 + c)] -= djx[(r, c)];
            }
        }
        if let Some(dtz) = dtz {
            if !model.constant_j() {
                let v = to_real(&dtz[j * dim..(j + 1) * dim]);
                for k in 0..n2 {
                    let mut e = vec![0.0; n2];
                    e[k] = 1.0;
                    let col = matvec(&model.dj(z, &from_real(&e)), &v);
                    for r in 0..n2 {
                        m[(j * n2 + r, j * n2 + k)] += col[r];
                    }
                }
            }
        }
    }
    m
}

pub fn asymptotics(model: &dyn HamiltonianModel, n_t: usize) -> Result<Asymptotics> {
    let dim = model.dim();
    let zero = vec![Complex64::new(0.0, 0.0); dim * n_t];
    let x0 = model.x(&zero[..dim]);
    if x0.iter().any(|w| w.norm() > 1e-14) {
        return Err(Error::InvalidParameter("the vector field must vanish at the origin".into()));
    }
    let a = node_block(model, &zero, None, &dt_real_blocks(n_t), n_t);
    let asym = (&a - a.transpose()).norm_max();
    if asym > 1e-10 * a.norm_max().max(1.0) {
        return Err(Error::InvalidParameter(format!("asymptotic operator is not symmetric (defect {asym:.3e})")));
    }
    let sym = (&a + a.transpose()) * faer::Scale(0.5);
    let eig = sym.self_adjoint_eigen(faer::Side::Lower).map_err(|e| Error::NoConvergence(format!("{e:?}")))?;
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    let vals: Vec<f64> = (0..n).map(|i| eig.S()[i]).collect();
    order.sort_by(|&p, &q| vals[p].partial_cmp(&vals[q]).unwrap());
    let mu: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let scale = mu.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if mu.iter().any(|x| x.abs() <= 1e-10 * scale.max(1.0)) {
        return Err(Error::Degenerate("asymptotic operator has a zero eigenvalue".into()));
    }
    let v = Mat::from_fn(n, n, |i, j| eig.U()[(i, order[j])]);
    let sgn = Mat::from_fn(n, n, |i, j| (0..n).map(|k| v[(i, k)] * mu[k].signum() * v[(j, k)]).sum::<f64>());
    Ok(Asymptotics { n_t, dim, a_inf: a, v, mu, sign: sgn })
}

const D4_CENTRAL: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
const D6_CENTRAL: [f64; 7] = [1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0];

/// s-derivative used inside the Cauchy-Riemann operator: central fourth order,
/// zero-extended past the truncation, plus a sixth-difference dissipation
/// along sign(A_inf) that suppresses the grid-scale doubler.
pub fn cr_ds_operator(n_s: usize, h: f64, asym: &Asymptotics) -> Csr {
    let big = asym.v.nrows();
    let mut t = Vec::with_capacity(n_s * (5 * big + 7 * big * big));
    for i in 0..n_s {
        for (o, c) in D4_CENTRAL.iter().enumerate() {
            let j = i as isize + o as isize - 2;
            if *c == 0.0 || j < 0 || j >= n_s as isize {
                continue;
            }
            for r in 0..big {
                t.push((i * big + r, j as usize * big + r, c / h));
            }
        }
        for (o, c) in D6_CENTRAL.iter().enumerate() {
            let j = i as isize + o as isize - 3;
            if j < 0 || j >= n_s as isize {
                continue;
            }
            let coef = -c / (64.0 * h);
            for r in 0..big {
                for q in 0..big {
                    let v = asym.sign[(r, q)];
                    if v.abs() > 1e-15 {
                        t.push((i * big + r, j as usize * big + q, coef * v));
                    }
                }
            }
        }
    }
    Csr::from_triplets(n_s * big, n_s * big, t)
}

/// Discrete d_s gamma + J(gamma)(d_t gamma - X(gamma)).
pub fn floer_residual(model: &dyn HamiltonianModel, gamma: &Field) -> Result<Field> {
    let asym = asymptotics(model, gamma.grid.n_t)?;
    Ok(floer_residual_with(model, gamma, &asym))
}

pub fn floer_residual_with(model: &dyn HamiltonianModel, gamma: &Field, asym: &Asymptotics) -> Field {
    let g = gamma.grid;
    floer_residual_ds(model, gamma, &cr_ds_operator(g.n_s, g.h_s, asym))
}

/// Residual with a prebuilt s-derivative operator for `gamma`'s grid.
pub fn floer_residual_ds(model: &dyn HamiltonianModel, gamma: &Field, ds: &Csr) -> Field {
    let g = gamma.grid;
    let mut out = ds.matvec(&gamma.to_real());
    let dt = diff_t(gamma, 1).expect("order 1");
    for i in 0..g.n_s {
        for j in 0..g.n_t {
            let z = gamma.point(i, j);
            let x = model.x(z);
            let w: Vec<Complex64> = dt.point(i, j).iter().zip(&x).map(|(a, b)| a - b).collect();
            let jw = matvec(&model.j(z), &to_real(&w));
            let base = 2 * gamma.idx(i, j, 0);
            for (k, v) in jw.into_iter().enumerate() {
                out[base + k] += v;
            }
        }
    }
    Field::from_real(g, gamma.dim, &out)
}

/// Node-block matrix of xi -> J(base) d_t xi - D_base(JX) xi [+ DJ[xi] d_t base], block diagonal in s.
pub fn node_operator(model: &dyn HamiltonianModel, base: &Field, variant: Variant) -> Csr {
    let g = base.grid;
    let big = node_size(g.n_t, base.dim);
    let dt = dt_real_blocks(g.n_t);
    let dtb = diff_t(base, 1).expect("order 1");
    let blocks: Vec<Vec<(usize, usize, f64)>> = {
        use rayon::prelude::*;
        (0..g.n_s)
            .into_par_iter()
            .map(|i| {
                let nl = base.node_len();
                let zs = &base.values[i * nl..(i + 1) * nl];
                let dtz = &dtb.values[i * nl..(i + 1) * nl];
                let m = node_block(model, zs, if variant == Variant::Full { Some(dtz) } else { None }, &dt, g.n_t);
                let mut t = Vec::new();
                for r in 0..big {
                    for c in 0..big {
                        let v = m[(r, c)];
                        if v != 0.0 {
                            t.push((i * big + r, i * big + c, v));
                        }
                    }
                }
                t
            })
            .collect()
    };
    Csr::from_triplets(g.n_s * big, g.n_s * big, blocks.into_iter().flatten().collect())
}

/// Jacobian of the discrete residual at `base` (Full) or the displayed operator.
pub fn linearize_cr(model: &dyn HamiltonianModel, base: &Field, variant: Variant) -> Result<Csr> {
    let asym = asymptotics(model, base.grid.n_t)?;
    Ok(linearize_cr_with(model, base, variant, &asym))
}

pub fn linearize_cr_with(model: &dyn HamiltonianModel, base: &Field, variant: Variant, asym: &Asymptotics) -> Csr {
    let g = base.grid;
    cr_ds_operator(g.n_s, g.h_s, asym).add_scaled(1.0, &node_operator(model, base, variant))
}

/// e^{delta eta(s_i)} repeated over each node block.
pub fn weight_vector(grid: &CylinderGrid, dim: usize, delta: f64) -> Vec<f64> {
    let big = node_size(grid.n_t, dim);
    weight_profile(grid, delta).into_iter().flat_map(|w| std::iter::repeat(w).take(big)).collect()
}

/// W L W^{-1} for W = diag(e^{delta eta}).
pub fn conjugate_weight(l: &Csr, grid: &CylinderGrid, dim: usize, delta: f64) -> Csr {
    let w = weight_vector(grid, dim, delta);
    let winv: Vec<f64> = w.iter().map(|x| 1.0 / x).collect();
    l.scale_rows_cols(&w, &winv)
}

/// Row selection that turns the truncated operator into a Fredholm problem on
/// weighted coordinates: edge equations keep only their outgoing half, and
/// boundary rows kill the modes that would grow into the truncation.
#[derive(Clone, Debug)]
pub struct Closure {
    pub left_eq: Csr,
    pub right_eq: Csr,
    pub left_bc: Csr,
    pub right_bc: Csr,
    pub big: usize,
}

impl Closure {
    pub fn new(asym: &Asymptotics, delta: f64) -> Self {
        let big = asym.v.nrows();
        let pick = |keep: &dyn Fn(f64) -> bool| {
            let cols: Vec<usize> = (0..big).filter(|&k| keep(asym.mu[k])).collect();
            let mut t = Vec::new();
            for (r, &k) in cols.iter().enumerate() {
                for q in 0..big {
                    t.push((r, q, asym.v[(q, k)]));
                }
            }
            Csr::from_triplets(cols.len(), big, t)
        };
        Self {
            left_eq: pick(&|m| m < 0.0),
            right_eq: pick(&|m| m > 0.0),
            left_bc: pick(&|m| m + delta >= 0.0),
            right_bc: pick(&|m| m - delta <= 0.0),
            big,
        }
    }

    pub fn rows(&self, n_s: usize) -> usize {
        self.left_bc.nrows + self.left_eq.nrows + (n_s - 2) * self.big + self.right_eq.nrows + self.right_bc.nrows
    }

    /// Closed matrix from a weighted operator on one slot of `n_s` nodes.
    pub fn close_operator(&self, m: &Csr, n_s: usize) -> Csr {
        self.close_block(m, n_s, 0)
    }

    /// Closes the `n_s * big` rows of one slot whose unknowns start at column `col0`.
    pub fn close_block(&self, m: &Csr, n_s: usize, col0: usize) -> Csr {
        let big = self.big;
        let cols = m.ncols;
        let last = (n_s - 1) * big;
        let place = |b: &Csr, off: usize| Csr::from_triplets(b.nrows, cols, b.triplets().into_iter().map(|(r, q, v)| (r, off + q, v)).collect());
        let bcl = place(&self.left_bc, col0);
        let bcr = place(&self.right_bc, col0 + last);
        let eql = self.left_eq.matmul(&m.sub_block(0, big, 0, cols));
        let eqr = self.right_eq.matmul(&m.sub_block(last, last + big, 0, cols));
        let mid = m.sub_block(big, last, 0, cols);
        Csr::vstack(&[&bcl, &eql, &mid, &eqr, &bcr])
    }

    /// Closed residual from weighted residual `r`, weighted state `u` and weighted edge targets.
    pub fn close_residual(&self, r: &[f64], u: &[f64], left_target: &[f64], right_target: &[f64]) -> Vec<f64> {
        let big = self.big;
        let n = r.len();
        let mut out = Vec::with_capacity(n);
        let dl: Vec<f64> = (0..big).map(|q| u[q] - left_target[q]).collect();
        out.extend(self.left_bc.matvec(&dl));
        out.extend(self.left_eq.matvec(&r[..big]));
        out.extend_from_slice(&r[big..n - big]);
        out.extend(self.right_eq.matvec(&r[n - big..]));
        let dr: Vec<f64> = (0..big).map(|q| u[n - big + q] - right_target[q]).collect();
        out.extend(self.right_bc.matvec(&dr));
        out
    }

    /// Same closure applied to a vector of operator rows (no boundary data).
    pub fn close_rows_only(&self, r: &[f64]) -> Vec<f64> {
        let z = vec![0.0; r.len()];
        let zb = vec![0.0; self.big];
        self.close_residual(r, &z, &zb, &zb)
    }

    pub fn close_bc_only(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        let mut out = self.left_bc.matvec(&u[..self.big]);
        out.extend(vec![0.0; self.left_eq.nrows + n - 2 * self.big + self.right_eq.nrows]);
        out.extend(self.right_bc.matvec(&u[n - self.big..]));
        out
    }
}

/// Closed, weighted linearization as a level-indexed operator: level m uses
/// weight delta_m (the s-regularity order is carried by the norms, not the matrix).
pub fn linearize_cr_levels(model: &dyn HamiltonianModel, base: &Field, variant: Variant, weights: &WeightSequence, levels: &[usize]) -> Result<ScOperator> {
    let asym = asymptotics(model, base.grid.n_t)?;
    let l = linearize_cr_with(model, base, variant, &asym);
    let mats = levels
        .iter()
        .map(|&m| {
            let d = weights.delta(m);
            Closure::new(&asym, d).close_operator(&conjugate_weight(&l, &base.grid, base.dim, d), base.grid.n_s)
        })
        .collect();
    ScOperator::from_levels(levels.to_vec(), mats, 1)
}

/// Integral of |d_s gamma|^2 + |d_t gamma - X(gamma)|^2.
pub fn energy(model: &dyn HamiltonianModel, gamma: &Field) -> Result<f64> {
    let ds = diff_s(gamma, 1)?;
    let dt = diff_t(gamma, 1)?;
    let w = quadrature_weights(&gamma.grid);
    let mut e = 0.0;
    for i in 0..gamma.grid.n_s {
        for j in 0..gamma.grid.n_t {
            let x = model.x(gamma.point(i, j));
            let a: f64 = ds.point(i, j).iter().map(|z| z.norm_sqr()).sum();
            let b: f64 = dt.point(i, j).iter().zip(&x).map(|(p, q)| (p - q).norm_sqr()).sum();
            e += w[i] * (a + b);
        }
    }
    Ok(e)
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    #[serde(skip)]
    pub gamma: Field,
    pub model_id: String,
    /// Weighted, quadrature-scaled norm of the closed residual rows.
    pub residual_norm: f64,
    pub decay_rate: f64,
    pub energy: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub bordered: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    pub max_iter: usize,
    pub variant: Variant,
    /// Weight of the coordinates the Newton step is solved in (None: 0.8 of the decay constant).
    pub weight: Option<f64>,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { max_iter: 30, variant: Variant::Full, weight: None }
    }
}

pub fn solve_trajectory(model: &dyn HamiltonianModel, guess: &Field, tol: f64) -> Result<Trajectory> {
    solve_trajectory_with(model, guess, tol, NewtonOptions::default())
}

/// Newton iteration on the closed residual with the edge values pinned to the
/// guess. A translation-type near-kernel is handled by bordering the Jacobian;
/// steps are halved until the residual decreases, and the iteration stops at
/// the round-off floor.
pub fn solve_trajectory_with(model: &dyn HamiltonianModel, guess: &Field, tol: f64, opt: NewtonOptions) -> Result<Trajectory> {
    if !guess.is_finite() {
        return Err(Error::NonFinite("initial guess".into()));
    }
    if guess.dim != model.dim() {
        return Err(Error::Shape(format!("guess has {} components, model {}", guess.dim, model.dim())));
    }
    let g = guess.grid;
    let dim = guess.dim;
    let big = node_size(g.n_t, dim);
    let asym = asymptotics(model, g.n_t)?;
    let dw = opt.weight.unwrap_or(0.8 * model.delta_decay());
    let closure = Closure::new(&asym, dw);
    let w = weight_vector(&g, dim, dw);
    let qscale = (g.h_s * g.h_t).sqrt();
    let mut gamma = guess.clone();
    let u0 = guess.to_real();
    let n = u0.len();
    let lt: Vec<f64> = (0..big).map(|q| u0[q] * w[q]).collect();
    let rt: Vec<f64> = (0..big).map(|q| u0[n - big + q] * w[n - big + q]).collect();
    let mut history = Vec::new();
    let mut bordered = false;
    let eval = |gamma: &Field| -> Vec<f64> {
        let r = floer_residual_with(model, gamma, &asym).to_real();
        let rw: Vec<f64> = r.iter().zip(&w).map(|(a, b)| a * b).collect();
        let uw: Vec<f64> = gamma.to_real().iter().zip(&w).map(|(a, b)| a * b).collect();
        closure.close_residual(&rw, &uw, &lt, &rt)
    };
    for it in 0..=opt.max_iter {
        let f = eval(&gamma);
        let res = qscale * norm(&f);
        if !res.is_finite() {
            return Err(Error::NoConvergence(format!("residual became non-finite at iteration {it}")));
        }
        history.push(res);
        if res <= tol {
            return Ok(Trajectory {
                decay_rate: decay_rate(&gamma),
                energy: energy(model, &gamma)?,
                gamma,
                model_id: model.id(),
                residual_norm: res,
                iterations: it,
                residual_history: history,
                bordered,
            });
        }
        if it == opt.max_iter {
            break;
        }
        let jac = closure.close_operator(&conjugate_weight(&linearize_cr_with(model, &gamma, opt.variant, &asym), &g, dim, dw), g.n_s);
        if jac.nrows != jac.ncols {
            return Err(Error::Shape(format!("closed Jacobian is {}x{}", jac.nrows, jac.ncols)));
        }
        let lu = SparseLu::new(&jac)?;
        let rhs: Vec<f64> = f.iter().map(|x| -x).collect();
        let (near, k, c) = near_kernel(&lu, &jac);
        let step = if near {
            bordered = true;
            let col = |v: &[f64]| Mat::from_fn(v.len(), 1, |i, _| v[i]);
            BorderedLu::new(&jac, &col(&k), &col(&c), BORDER_KEEP)?.solve(&rhs).0
        } else {
            lu.solve(&rhs)
        };
        if step.iter().any(|x| !x.is_finite()) {
            return Err(Error::Singular("Newton step is not finite".into()));
        }
        let u: Vec<f64> = gamma.to_real().iter().zip(&w).map(|(a, b)| a * b).collect();
        let mut lambda = 1.0;
        let mut accepted = None;
        while lambda >= 1.0 / 64.0 {
            let v: Vec<f64> = u.iter().zip(&step).zip(&w).map(|((a, d), b)| (a + lambda * d) / b).collect();
            let trial = Field::from_real(g, dim, &v);
            let r = qscale * norm(&eval(&trial));
            if r.is_finite() && r < res {
                accepted = Some((trial, r));
                break;
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((t, r)) if r <= tol || r < STALL * res => gamma = t,
            Some((_, r)) => {
                history.push(r);
                break;
            }
            None => break,
        }
    }
    Err(Error::NoConvergence(format!("Newton did not reach {tol:.1e}; residual history {history:?}")))
}

/// Inverse iteration on J^T J and J J^T for the smallest singular directions; reports whether it is
/// below 1e-3 of the operator scale together with right and left vectors.
fn near_kernel(lu: &SparseLu, a: &Csr) -> (bool, Vec<f64>, Vec<f64>) {
    let n = a.nrows;
    let scale = crate::linalg::sigma_max_estimate(a);
    let mut x: Vec<f64> = (0..n).map(|i| ((i * 7919 % 104729) as f64 / 104729.0) - 0.5).collect();
    let mut y = x.clone();
    for _ in 0..4 {
        x = lu.solve(&lu.solve_transpose(&x));
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        y = lu.solve_transpose(&lu.solve(&y));
        let ny = norm(&y);
        y.iter_mut().for_each(|v| *v /= ny);
    }
    let rq = norm(&a.matvec(&x));
    (rq.is_finite() && rq < 1e-3 * scale, x, y)
}

/// Residual reduction per step above which Newton is taken to have stalled.
const STALL: f64 = 0.9;

/// Relative size below which border entries are dropped in the Newton bordering.
const BORDER_KEEP: f64 = 0.3;

/// max_t |d_s gamma(s_i, .)| for every s-index.
fn ds_profile(gamma: &Field) -> Vec<f64> {
    diff_s(gamma, 1).map(|d| d.sup_t()).unwrap_or_default()
}

fn fit_rate(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 3 {
        return None;
    }
    let x: Vec<f64> = points.iter().map(|p| p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    Some(-crate::scale::fit_slope(&x, &y))
}

/// Smallest normal magnitude treated as a genuine sample in the fits.
const NEGLIGIBLE: f64 = 1e-280;

/// Rate of exponential decay of max_t |d_s gamma| fitted over
/// |s| in [s_max / 2, s_max - 1]; `f64::INFINITY` when the tail vanishes.
pub fn decay_rate(gamma: &Field) -> f64 {
    let s = gamma.grid.s_max;
    decay_rate_window(gamma, 0.5 * s, s - 1.0)
}

pub fn decay_rate_window(gamma: &Field, lo: f64, hi: f64) -> f64 {
    let p = ds_profile(gamma);
    let pts: Vec<(f64, f64)> = (0..gamma.grid.n_s)
        .filter_map(|i| {
            let s = gamma.grid.s(i).abs();
            (s >= lo && s <= hi && p[i] > NEGLIGIBLE).then_some((s, p[i]))
        })
        .collect();
    fit_rate(&pts).unwrap_or(f64::INFINITY)
}

/// Decay fit per side over the samples with |s| >= 5 whose values lie in
/// [floor * peak, 1e-2 * peak]; the smaller of the two side rates.
pub fn decay_rate_adaptive(gamma: &Field, floor: f64) -> f64 {
    let p = ds_profile(gamma);
    let peak = p.iter().copied().fold(0.0, f64::max);
    if peak <= NEGLIGIBLE {
        return f64::INFINITY;
    }
    let mut best = f64::INFINITY;
    for side in [-1.0, 1.0] {
        let pts: Vec<(f64, f64)> = (0..gamma.grid.n_s)
            .filter_map(|i| {
                let s = gamma.grid.s(i);
                (s * side >= 5.0 && p[i] >= floor * peak && p[i] <= 1e-2 * peak).then_some((s.abs(), p[i]))
            })
            .collect();
        if let Some(r) = fit_rate(&pts) {
            best = best.min(r);
        }
    }
    best
}

/// Signed count: (# eigenvalues with negative real part at the first operator)
/// minus the same count at the last, accumulated sample by sample.
pub fn spectral_flow_path(ops: &[Mat<f64>]) -> Result<i64> {
    if ops.len() < 2 {
        return Err(Error::InvalidParameter("path needs at least two samples".into()));
    }
    let count = |m: &Mat<f64>| -> Result<(usize, f64)> {
        let ev = m.eigenvalues().map_err(|e| Error::NoConvergence(format!("{e:?}")))?;
        let neg = ev.iter().filter(|z| z.re < 0.0).count();
        let closest = ev.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
        Ok((neg, closest))
    };
    let mut flow = 0i64;
    let (mut prev, gap0) = count(&ops[0])?;
    let scale = ops[0].norm_max().max(1.0);
    if gap0 < 1e-9 * scale {
        return Err(Error::Degenerate("eigenvalue at zero at the start of the path".into()));
    }
    for (k, m) in ops.iter().enumerate().skip(1) {
        let (cur, gap) = count(m)?;
        if k == ops.len() - 1 && gap < 1e-9 * scale {
            return Err(Error::Degenerate("eigenvalue at zero at the end of the path".into()));
        }
        flow += prev as i64 - cur as i64;
        prev = cur;
    }
    Ok(flow)
}

/// Spectral flow of s -> J(gamma(s)) d_t - D_gamma(s)(JX) - delta eta'(s) along the grid.
/// (The weighted operator d_s + A - delta eta' has the index of this flow.)
pub fn spectral_flow_index(model: &dyn HamiltonianModel, gamma: &Field, delta: f64) -> Result<i64> {
    let g = gamma.grid;
    let dt = dt_real_blocks(g.n_t);
    let nl = gamma.node_len();
    let ops: Vec<Mat<f64>> = (0..g.n_s)
        .map(|i| {
            let zs = &gamma.values[i * nl..(i + 1) * nl];
            let mut a = node_block(model, zs, None, &dt, g.n_t);
            let shift = -delta * crate::grid::weight_eta_prime(g.s(i));
            for k in 0..a.nrows() {
                a[(k, k)] += shift;
            }
            a
        })
        .collect();
    spectral_flow_path(&ops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn models() -> Vec<Box<dyn HamiltonianModel>> {
        vec![
            Box::new(LinearModel::new(1.0, 2).unwrap()),
            Box::new(PerturbedModel::new(1.0, 0.3, 2).unwrap()),
            Box::new(HomoclinicModel::new(0.5, 0.3).unwrap()),
        ]
    }

    #[test]
    fn model_invariants_and_derivatives() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for m in models() {
            let n = m.dim();
            let zero = vec![Complex64::new(0.0, 0.0); n];
            assert!(m.x(&zero).iter().all(|w| w.norm() == 0.0));
            let sv = m.dx(&zero).singular_values().unwrap();
            assert!(sv.iter().copied().fold(f64::INFINITY, f64::min) > 0.0);
            for _ in 0..100 {
                let z: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2))).collect();
                let jm = m.j(&z);
                let j2 = &jm * &jm + Mat::<f64>::identity(2 * n, 2 * n);
                assert!(j2.norm_max() < 1e-12);
                let h = 1e-5;
                for k in 0..2 * n {
                    let mut e = vec![0.0; 2 * n];
                    e[k] = 1.0;
                    let dir = from_real(&e);
                    let zp: Vec<Complex64> = z.iter().zip(&dir).map(|(a, b)| a + b * h).collect();
                    let zm: Vec<Complex64> = z.iter().zip(&dir).map(|(a, b)| a - b * h).collect();
                    let fd: Vec<f64> = to_real(&m.x(&zp)).iter().zip(to_real(&m.x(&zm))).map(|(a, b)| (a - b) / (2.0 * h)).collect();
                    let dx = m.dx(&z);
                    let sc = dx.norm_max().max(1.0);
                    for r in 0..2 * n {
                        assert!((fd[r] - dx[(r, k)]).abs() < 1e-6 * sc, "{} DX", m.id());
                    }
                    let fdj = (m.j(&zp) - m.j(&zm)) * faer::Scale(0.5 / h);
                    assert!((fdj - m.dj(&z, &dir)).norm_max() < 1e-6 * m.j(&z).norm_max(), "{} DJ", m.id());
                }
            }
        }
    }

    #[test]
    fn residual_examples() {
        let g = make_grid(4.0, 321, 8).unwrap();
        let lin = LinearModel::new(1.0, 1).unwrap();
        assert_eq!(floer_residual(&lin, &Field::zeros(g, 1)).unwrap().max_abs(), 0.0);
        for k in [0i32, 1] {
            let rate = 2.0 * PI * k as f64 - 1.0;
            let u = Field::from_fn(g, 1, |s, t, _| Complex64::from_polar(0.1 * (rate * s).exp(), 2.0 * PI * k as f64 * t));
            let r = floer_residual(&lin, &u).unwrap();
            for i in 4..g.n_s - 4 {
                let local = u.at(i, 3, 0).norm() * (1.0 + rate.abs());
                assert!(r.at(i, 3, 0).norm() < 1e-4 * local, "k={k} i={i} {}", r.at(i, 3, 0).norm());
            }
        }
        // pointwise oracle for a Gaussian: d_s u + i d_t u + a u
        let u = Field::from_fn(g, 1, |s, t, _| Complex64::new((-s * s).exp() * (1.0 + 0.5 * (2.0 * PI * t).cos()), 0.0));
        let r = floer_residual(&lin, &u).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let i = rng.gen_range(40..g.n_s - 40);
            let j = rng.gen_range(0..g.n_t);
            let (s, t) = (g.s(i), g.t(j));
            let e = (-s * s).exp();
            let us = -2.0 * s * e * (1.0 + 0.5 * (2.0 * PI * t).cos());
            let ut = -e * 0.5 * 2.0 * PI * (2.0 * PI * t).sin();
            let uu = e * (1.0 + 0.5 * (2.0 * PI * t).cos());
            let expect = Complex64::new(us + uu, ut);
            assert!((r.at(i, j, 0) - expect).norm() < 1e-4, "{} vs {expect}", r.at(i, j, 0));
        }
    }

    #[test]
    fn homoclinic_orbit_is_a_solution() {
        let g = make_grid(40.0, 801, 8).unwrap();
        for kappa in [0.0, 0.3] {
            let m = HomoclinicModel::new(0.5, kappa).unwrap();
            let r = floer_residual(&m, &m.orbit(&g)).unwrap();
            assert!(r.max_abs() < 1e-6, "kappa {kappa}: {}", r.max_abs());
        }
    }

    #[test]
    fn energy_examples() {
        let g = make_grid(40.0, 1601, 8).unwrap();
        let lin = LinearModel::new(1.0, 1).unwrap();
        assert_eq!(energy(&lin, &Field::zeros(g, 1)).unwrap(), 0.0);
        let m = HomoclinicModel::new(0.5, 0.0).unwrap();
        let orbit = m.orbit(&g);
        let e = energy(&m, &orbit).unwrap();
        let ds = diff_s(&orbit, 1).unwrap();
        let w = quadrature_weights(&g);
        let twice: f64 = (0..g.n_s).map(|i| 2.0 * w[i] * (0..g.n_t).map(|j| ds.at(i, j, 0).norm_sqr()).sum::<f64>()).sum();
        assert!((e - twice).abs() < 1e-6 * e);
        let u = Field::from_fn(g, 1, |s, t, _| Complex64::from_polar((-s * s).exp(), 2.0 * PI * t));
        let e1 = energy(&lin, &u).unwrap();
        let e2 = energy(&lin, &u.scale(2.0)).unwrap();
        assert!((e2 - 4.0 * e1).abs() < 1e-12 * e2);
    }

    #[test]
    fn linearization_examples() {
        let g = make_grid(3.0, 61, 8).unwrap();
        let lin = LinearModel::new(1.0, 1).unwrap();
        let z = Field::zeros(g, 1);
        let full = linearize_cr(&lin, &z, Variant::Full).unwrap();
        let disp = linearize_cr(&lin, &z, Variant::FrozenJ).unwrap();
        assert_eq!(full.max_abs_diff(&disp), 0.0);
        // node part equals i d_t + a
        let node = node_operator(&lin, &z, Variant::Full);
        let u = Field::from_fn(g, 1, |s, t, _| Complex64::from_polar((-s * s).exp(), 2.0 * PI * t));
        let got = Field::from_real(g, 1, &node.matvec(&u.to_real()));
        let expect = diff_t(&u, 1).unwrap().map(|w| Complex64::new(0.0, 1.0) * w).add(&u);
        assert!(got.sub(&expect).max_abs() < 1e-12);
        // finite-difference consistency on a non-constant structure
        let m = HomoclinicModel::new(0.5, 0.3).unwrap();
        let base = m.orbit(&g).add(&u.scale(0.2));
        let l = linearize_cr(&m, &base, Variant::Full).unwrap();
        let ld = linearize_cr(&m, &base, Variant::FrozenJ).unwrap();
        assert!(l.max_abs_diff(&ld) > 1e-6);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut errs = Vec::new();
        for h in [1e-3, 1e-4] {
            let mut worst: f64 = 0.0;
            for _ in 0..20 {
                let xi = Field::from_fn(g, 1, |s, _, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * (-s * s / 4.0).exp());
                let r0 = floer_residual(&m, &base).unwrap();
                let r1 = floer_residual(&m, &base.axpy(h, &xi)).unwrap();
                let fd = r1.sub(&r0).scale(1.0 / h);
                let an = Field::from_real(g, 1, &l.matvec(&xi.to_real()));
                worst = worst.max(fd.sub(&an).max_abs());
            }
            errs.push(worst);
        }
        assert!(errs[0] / errs[1] > 5.0 && errs[0] / errs[1] < 20.0, "{errs:?}");
    }

    #[test]
    fn newton_examples() {
        let g = make_grid(3.0, 121, 8).unwrap();
        let lin = LinearModel::new(1.0, 1).unwrap();
        let t = solve_trajectory(&lin, &Field::zeros(g, 1), 1e-12).unwrap();
        assert_eq!(t.iterations, 0);
        assert_eq!(t.gamma.max_abs(), 0.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let noisy = Field::from_fn(g, 1, |s, _, _| Complex64::new(1e-3 * rng.gen_range(-1.0..1.0), 1e-3 * rng.gen_range(-1.0..1.0)) * (-4.0 * s * s).exp());
        let t = solve_trajectory(&lin, &noisy, 1e-10).unwrap();
        assert!(t.residual_norm < 1e-10);
        assert!(t.gamma.max_abs() < 1e-9, "{}", t.gamma.max_abs());
        let exact = Field::from_fn(g, 1, |s, _, _| Complex64::new(0.05 * (-s).exp(), 0.0));
        let pert = PerturbedModel::new(1.0, 0.05, 1).unwrap();
        let t = solve_trajectory(&pert, &exact, 1e-12).unwrap();
        let h = &t.residual_history;
        assert!(h.len() >= 3, "{h:?}");
        let n = h.len();
        // quadratic convergence: log r_{k+1} / log r_k approaches 2 before hitting round-off
        let k = (0..n - 1).filter(|&k| h[k + 1] > 1e-14).last().unwrap_or(0);
        if k > 0 {
            let ratio = h[k + 1].ln() / h[k].ln();
            assert!(ratio > 1.6, "{h:?}");
        }
    }

    #[test]
    fn newton_recovers_homoclinic_orbit() {
        let g = make_grid(40.0, 641, 4).unwrap();
        let m = HomoclinicModel::new(0.5, 0.0).unwrap();
        let orbit = m.orbit(&g);
        let guess = orbit.map(|z| z * 1.05);
        let t = solve_trajectory(&m, &guess, 1e-10).unwrap();
        let err = t.gamma.sub(&orbit).max_abs();
        assert!(err < 1e-3, "{err}");
        assert!((t.decay_rate - 0.5).abs() < 0.05, "{}", t.decay_rate);
    }

    #[test]
    fn decay_rate_examples() {
        let g = make_grid(20.0, 801, 4).unwrap();
        let u = Field::from_fn(g, 1, |s, t, _| Complex64::new(-s.signum() * (-2.0 * s.abs()).exp() / 2.0 * (1.0 + 0.3 * (2.0 * PI * t).cos()), 0.0));
        assert!((decay_rate(&u) - 2.0).abs() < 0.04);
        assert_eq!(decay_rate(&Field::zeros(g, 1)), f64::INFINITY);
        let m = HomoclinicModel::new(0.5, 0.0).unwrap();
        assert!((decay_rate_adaptive(&m.orbit(&g), 1e-12) - 0.5).abs() < 0.02);
    }

    #[test]
    fn spectral_flow_examples() {
        let g = make_grid(5.0, 51, 8).unwrap();
        let lin = LinearModel::new(1.0, 1).unwrap();
        assert_eq!(spectral_flow_index(&lin, &Field::zeros(g, 1), 0.1).unwrap(), 0);
        assert_eq!(spectral_flow_index(&lin, &Field::zeros(g, 1), 1.5).unwrap(), -2);
        let path: Vec<Mat<f64>> = (0..11).map(|k| Mat::from_fn(2, 2, |i, j| if i == j { if i == 0 { -1.0 + 0.2 * k as f64 + 0.01 } else { 3.0 } } else { 0.0 })).collect();
        assert_eq!(spectral_flow_path(&path).unwrap(), 1);
        let rev: Vec<Mat<f64>> = path.iter().rev().cloned().collect();
        assert_eq!(spectral_flow_path(&rev).unwrap(), -1);
        let degenerate: Vec<Mat<f64>> = vec![Mat::zeros(2, 2), Mat::identity(2, 2)];
        assert!(spectral_flow_path(&degenerate).is_err());
    }

    #[test]
    fn closed_index_matches_spectral_flow() {
        let g = make_grid(6.0, 121, 8).unwrap();
        let lin = LinearModel::new(1.0, 1).unwrap();
        let w = WeightSequence::new(vec![0.1, 1.5], 2.0).unwrap();
        let op = linearize_cr_levels(&lin, &Field::zeros(g, 1), Variant::Full, &w, &[0, 1]).unwrap();
        let r0 = crate::linear::fredholm_report(&op, 0).unwrap();
        let r1 = crate::linear::fredholm_report(&op, 1).unwrap();
        assert_eq!(r0.index, 0);
        assert!(r0.trustworthy);
        assert_eq!(r1.index, -2);
        assert!(r1.trustworthy, "{r1:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn full_linearization_matches_difference_quotient(seed in 0u64..1000, kappa in -0.4f64..0.4) {
            let g = make_grid(2.0, 41, 4).unwrap();
            let m = HomoclinicModel::new(0.5, kappa).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let base = Field::from_fn(g, 1, |_, _, _| Complex64::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)));
            let xi = Field::from_fn(g, 1, |_, _, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let l = linearize_cr(&m, &base, Variant::Full).unwrap();
            let h = 1e-6;
            let fd = floer_residual(&m, &base.axpy(h, &xi)).unwrap().sub(&floer_residual(&m, &base.axpy(-h, &xi)).unwrap()).scale(0.5 / h);
            let an = Field::from_real(g, 1, &l.matvec(&xi.to_real()));
            prop_assert!(fd.sub(&an).max_abs() < 1e-6 * an.max_abs().max(1.0));
        }
    }
}
