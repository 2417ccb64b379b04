//! Pregluing and anti-pregluing of pairs of cylinder fields, the explicit
//! inverse, the splicing projection, the filled section and its linearization
//! with the error-term split.
//!
//! Grids: for a pair on a grid with half-width S and a shift R = k h, the
//! preglued field lives on the outer grid (half-width S + R) and the
//! anti-preglued field on the inner grid (half-width S - R). Node counts add
//! up to those of the pair, so both maps together form a square system.
//!
//! The seam cutoff is b(sigma) = beta(-sigma): it equals 1 for sigma <= -1,
//! where the first field of the pair is seen, and 0 for sigma >= 1.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::floer::{
    asymptotics, cr_ds_operator, floer_residual_ds, node_operator, node_size, weight_vector, Asymptotics, Closure, HamiltonianModel, SharedModel, Variant,
};
use crate::grid::{cutoff_beta, cutoff_beta_prime, shift_onto, CylinderGrid, Field};
use crate::linear::ScOperator;
use crate::scale::{weighted_norm, WeightSequence};
use crate::sparse::Csr;

/// Largest admissible gluing parameter, 1 / ln 42.
pub fn r_limit() -> f64 {
    1.0 / 42f64.ln()
}

/// Distance kept between the seam support and the truncation edge.
pub const SEAM_MARGIN: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct GluingProfile {
    pub r: f64,
    /// e^{1/r}; infinite for r = 0.
    pub big_r: f64,
    /// Round R to the nearest grid multiple so every shift is exact.
    pub snap: bool,
}

impl GluingProfile {
    pub fn new(r: f64) -> Result<Self> {
        if !(r >= 0.0 && r < r_limit()) {
            return Err(Error::InvalidParameter(format!("gluing parameter must lie in [0, 1/ln 42), got {r}")));
        }
        let big_r = if r == 0.0 { f64::INFINITY } else { (1.0 / r).exp() };
        Ok(Self { r, big_r, snap: true })
    }

    /// Profile with a prescribed neck length R > 42.
    pub fn from_length(big_r: f64) -> Result<Self> {
        if !(big_r > 42.0) || !big_r.is_finite() {
            return Err(Error::InvalidParameter(format!("neck length must exceed 42, got {big_r}")));
        }
        Ok(Self { r: 1.0 / big_r.ln(), big_r, snap: true })
    }

    pub fn unglued() -> Self {
        Self { r: 0.0, big_r: f64::INFINITY, snap: true }
    }

    pub fn interpolated(mut self) -> Self {
        self.snap = false;
        self
    }

    pub fn is_glued(&self) -> bool {
        self.r > 0.0
    }

    /// Grid placement on a pair grid, checking the truncation margin.
    pub fn place(&self, pair: &CylinderGrid) -> Result<Placement> {
        if !self.is_glued() {
            return Err(Error::InvalidParameter("r = 0 has no seam placement".into()));
        }
        let (k, _) = pair.steps_for(self.big_r);
        let shift = if self.snap { k as f64 * pair.h_s } else { self.big_r };
        let need = shift.max(self.big_r) + SEAM_MARGIN;
        if pair.s_max < need {
            return Err(Error::Margin { required: need, s_max: pair.s_max });
        }
        Ok(Placement { k: k as usize, shift, pair: *pair, outer: pair.resized(k)?, inner: pair.resized(-k)? })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Placement {
    pub k: usize,
    /// Effective neck length used by the shifts.
    pub shift: f64,
    pub pair: CylinderGrid,
    pub outer: CylinderGrid,
    pub inner: CylinderGrid,
}

impl Placement {
    pub fn exact(&self) -> bool {
        (self.shift - self.k as f64 * self.pair.h_s).abs() <= 1e-9 * self.shift
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairField {
    pub xi1: Field,
    pub xi2: Field,
}

impl PairField {
    pub fn new(xi1: Field, xi2: Field) -> Result<Self> {
        if !xi1.compatible(&xi2) {
            return Err(Error::Shape("pair components must share grid and dimension".into()));
        }
        Ok(Self { xi1, xi2 })
    }

    pub fn zeros(grid: CylinderGrid, dim: usize) -> Self {
        Self { xi1: Field::zeros(grid, dim), xi2: Field::zeros(grid, dim) }
    }

    pub fn grid(&self) -> CylinderGrid {
        self.xi1.grid
    }

    pub fn dim(&self) -> usize {
        self.xi1.dim
    }

    pub fn to_real(&self) -> Vec<f64> {
        let mut v = self.xi1.to_real();
        v.extend(self.xi2.to_real());
        v
    }

    pub fn from_real(grid: CylinderGrid, dim: usize, v: &[f64]) -> Self {
        let h = v.len() / 2;
        Self { xi1: Field::from_real(grid, dim, &v[..h]), xi2: Field::from_real(grid, dim, &v[h..]) }
    }

    pub fn add(&self, o: &Self) -> Self {
        Self { xi1: self.xi1.add(&o.xi1), xi2: self.xi2.add(&o.xi2) }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Self { xi1: self.xi1.sub(&o.xi1), xi2: self.xi2.sub(&o.xi2) }
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { xi1: self.xi1.scale(a), xi2: self.xi2.scale(a) }
    }

    pub fn max_abs(&self) -> f64 {
        self.xi1.max_abs().max(self.xi2.max_abs())
    }

    /// sqrt of the sum of squared slot norms in H^{k, delta}.
    pub fn norm(&self, k: usize, delta: f64) -> Result<f64> {
        Ok(weighted_norm(&self.xi1, k, delta)?.hypot(weighted_norm(&self.xi2, k, delta)?))
    }
}

pub fn seam_cutoff(sigma: f64) -> f64 {
    cutoff_beta(-sigma)
}

pub fn seam_cutoff_prime(sigma: f64) -> f64 {
    -cutoff_beta_prime(-sigma)
}

fn seam_den(sigma: f64) -> f64 {
    let b = seam_cutoff(sigma);
    b * b + (1.0 - b) * (1.0 - b)
}

fn profile(grid: &CylinderGrid, f: impl Fn(f64) -> f64) -> Vec<f64> {
    (0..grid.n_s).map(|i| f(grid.s(i))).collect()
}

fn check_pair(xi: &PairField) -> Result<()> {
    if !xi.xi1.compatible(&xi.xi2) {
        return Err(Error::Shape("pair components must share grid and dimension".into()));
    }
    Ok(())
}

/// b * tau_R xi1 + (1 - b) * tau_{-R} xi2 on the outer grid.
pub fn preglue(p: &GluingProfile, xi: &PairField) -> Result<Field> {
    check_pair(xi)?;
    let pl = p.place(&xi.grid())?;
    Ok(preglue_at(&pl, xi))
}

fn preglue_at(pl: &Placement, xi: &PairField) -> Field {
    let o = pl.outer;
    let a = shift_onto(&xi.xi1, o, pl.shift).mul_profile(&profile(&o, seam_cutoff));
    let b = shift_onto(&xi.xi2, o, -pl.shift).mul_profile(&profile(&o, |s| 1.0 - seam_cutoff(s)));
    a.add(&b)
}

/// (1 - b) * tau_R xi1 - b * tau_{-R} xi2 on the inner grid; zero on the pair grid when r = 0.
pub fn antiglue(p: &GluingProfile, xi: &PairField) -> Result<Field> {
    check_pair(xi)?;
    if !p.is_glued() {
        return Ok(Field::zeros(xi.grid(), xi.dim()));
    }
    let pl = p.place(&xi.grid())?;
    Ok(antiglue_at(&pl, xi))
}

fn antiglue_at(pl: &Placement, xi: &PairField) -> Field {
    let g = pl.inner;
    let a = shift_onto(&xi.xi1, g, pl.shift).mul_profile(&profile(&g, |s| 1.0 - seam_cutoff(s)));
    let b = shift_onto(&xi.xi2, g, -pl.shift).mul_profile(&profile(&g, |s| -seam_cutoff(s)));
    a.add(&b)
}

/// Explicit inverse of (preglue, antiglue); the pair grid is recovered from the two input grids.
pub fn glue_inverse(p: &GluingProfile, zeta_plus: &Field, zeta_minus: &Field) -> Result<PairField> {
    if !p.is_glued() {
        return Err(Error::InvalidParameter("the inverse needs r > 0".into()));
    }
    let (o, i) = (zeta_plus.grid, zeta_minus.grid);
    if !o.same_lattice(&i) || o.n_s <= i.n_s || zeta_plus.dim != zeta_minus.dim {
        return Err(Error::Shape("expected an outer and an inner field on one lattice".into()));
    }
    let k = (o.n_s - i.n_s) / 4;
    let pair = o.resized(-(k as isize))?;
    let pl = p.place(&pair)?;
    if pl.k != k {
        return Err(Error::Shape(format!("grids encode {k} shift steps, profile needs {}", pl.k)));
    }
    Ok(glue_inverse_at(&pl, zeta_plus, zeta_minus))
}

fn glue_inverse_at(pl: &Placement, zp: &Field, zm: &Field) -> PairField {
    let o = pl.outer;
    let zm = shift_onto(zm, o, 0.0);
    let y1 = zp.mul_profile(&profile(&o, |s| seam_cutoff(s) / seam_den(s))).add(&zm.mul_profile(&profile(&o, |s| (1.0 - seam_cutoff(s)) / seam_den(s))));
    let y2 = zp.mul_profile(&profile(&o, |s| (1.0 - seam_cutoff(s)) / seam_den(s))).add(&zm.mul_profile(&profile(&o, |s| -seam_cutoff(s) / seam_den(s))));
    PairField { xi1: shift_onto(&y1, pl.pair, -pl.shift), xi2: shift_onto(&y2, pl.pair, pl.shift) }
}

/// Projection onto the kernel of antiglue along the kernel of preglue; identity at r = 0.
pub fn splicing_projection(p: &GluingProfile, xi: &PairField) -> Result<PairField> {
    check_pair(xi)?;
    if !p.is_glued() {
        return Ok(xi.clone());
    }
    let pl = p.place(&xi.grid())?;
    Ok(glue_inverse_at(&pl, &preglue_at(&pl, xi), &Field::zeros(pl.inner, xi.dim())))
}

/// max |antiglue(xi)|: zero exactly when xi lies in the splicing core.
pub fn splicing_membership(p: &GluingProfile, xi: &PairField) -> Result<f64> {
    Ok(antiglue(p, xi)?.max_abs())
}

/// Coefficient fields of the error terms for one slot, sampled on the pair grid.
#[derive(Clone, Debug)]
pub struct CutoffFields {
    /// b^2 / den, supported where the slot still sees itself through the preglued field.
    pub own: Vec<f64>,
    /// (1 - b)^2 / den, supported beyond the seam.
    pub far: Vec<f64>,
    /// b (1 - b) / den, supported on the seam.
    pub seam: Vec<f64>,
    /// (2b - 1) b' / den, supported on the seam.
    pub seam_s: Vec<f64>,
}

/// Cutoff combinations for slot 1 (`sign = -1`, seam at s = R) or slot 2 (`sign = +1`, seam at s = -R).
pub fn cutoff_fields(pl: &Placement, sign: f64) -> CutoffFields {
    let g = pl.pair;
    let at = |f: &dyn Fn(f64) -> f64| profile(&g, |s| f(s + sign * pl.shift));
    let (own, far) = if sign < 0.0 {
        (at(&|x| seam_cutoff(x).powi(2) / seam_den(x)), at(&|x| (1.0 - seam_cutoff(x)).powi(2) / seam_den(x)))
    } else {
        (at(&|x| (1.0 - seam_cutoff(x)).powi(2) / seam_den(x)), at(&|x| seam_cutoff(x).powi(2) / seam_den(x)))
    };
    CutoffFields {
        own,
        far,
        seam: at(&|x| seam_cutoff(x) * (1.0 - seam_cutoff(x)) / seam_den(x)),
        seam_s: at(&|x| (2.0 * seam_cutoff(x) - 1.0) * seam_cutoff_prime(x) / seam_den(x)),
    }
}

/// Scalar node map expanded over node blocks of size `big`.
fn node_matrix(rows: usize, cols: usize, big: usize, entries: impl Iterator<Item = (usize, usize, f64)>) -> Csr {
    let mut t = Vec::new();
    for (a, b, c) in entries {
        if c != 0.0 {
            for q in 0..big {
                t.push((a * big + q, b * big + q, c));
            }
        }
    }
    Csr::from_triplets(rows * big, cols * big, t)
}

/// Preglue as a matrix from pair unknowns to outer-grid unknowns.
pub fn preglue_matrix(pl: &Placement, big: usize) -> Csr {
    let (n, k, o) = (pl.pair.n_s, pl.k, pl.outer);
    let e = (0..o.n_s).flat_map(move |a| {
        let b = seam_cutoff(o.s(a));
        let mut v = Vec::new();
        if a < n {
            v.push((a, a, b));
        }
        if a >= 2 * k && a - 2 * k < n {
            v.push((a, n + a - 2 * k, 1.0 - b));
        }
        v
    });
    node_matrix(o.n_s, 2 * n, big, e)
}

pub fn antiglue_matrix(pl: &Placement, big: usize) -> Csr {
    let (n, k, g) = (pl.pair.n_s, pl.k, pl.inner);
    let e = (0..g.n_s).flat_map(move |b| {
        let c = seam_cutoff(g.s(b));
        [(b, b + 2 * k, 1.0 - c), (b, n + b, -c)]
    });
    node_matrix(g.n_s, 2 * n, big, e)
}

/// Inverse as a matrix from (outer, inner) unknowns to pair unknowns.
pub fn glue_inverse_matrix(pl: &Placement, big: usize) -> Csr {
    let (n, k, o) = (pl.pair.n_s, pl.k, pl.outer);
    let no = o.n_s;
    let e = (0..n).flat_map(move |i| {
        let mut v = Vec::new();
        let s1 = o.s(i);
        let (b1, d1) = (seam_cutoff(s1), seam_den(s1));
        v.push((i, i, b1 / d1));
        if i >= 2 * k {
            v.push((i, no + i - 2 * k, (1.0 - b1) / d1));
        }
        let s2 = o.s(i + 2 * k);
        let (b2, d2) = (seam_cutoff(s2), seam_den(s2));
        v.push((n + i, i + 2 * k, (1.0 - b2) / d2));
        if i < n - 2 * k {
            v.push((n + i, no + i, -b2 / d2));
        }
        v
    });
    node_matrix(2 * n, no + pl.inner.n_s, big, e)
}

/// Broken trajectory data for the filled section: the model and two pieces on a common grid.
pub struct GluingProblem {
    pub model: SharedModel,
    pub gamma1: Field,
    pub gamma2: Field,
    pub asym: Asymptotics,
    ds_cache: Mutex<HashMap<usize, Arc<Csr>>>,
    l0_cache: Mutex<HashMap<usize, Arc<Csr>>>,
}

/// Error terms of the linearized filled section at e = 0.
#[derive(Clone, Debug)]
pub struct ErrorTerms {
    pub q1: Csr,
    pub q2: Csr,
    pub s1: Csr,
    pub s2: Csr,
    /// Linearizations at the two halves of the preglued base.
    pub diag1: Csr,
    pub diag2: Csr,
    pub dphi: Csr,
}

impl GluingProblem {
    pub fn new(model: SharedModel, gamma1: Field, gamma2: Field) -> Result<Self> {
        if !gamma1.compatible(&gamma2) {
            return Err(Error::Shape("trajectories must share grid and dimension".into()));
        }
        if gamma1.dim != model.dim() {
            return Err(Error::Shape(format!("trajectories have {} components, model {}", gamma1.dim, model.dim())));
        }
        if !gamma1.is_finite() || !gamma2.is_finite() {
            return Err(Error::NonFinite("trajectory".into()));
        }
        let asym = asymptotics(model.as_ref(), gamma1.grid.n_t)?;
        Ok(Self { model, gamma1, gamma2, asym, ds_cache: Mutex::new(HashMap::new()), l0_cache: Mutex::new(HashMap::new()) })
    }

    pub fn grid(&self) -> CylinderGrid {
        self.gamma1.grid
    }

    pub fn dim(&self) -> usize {
        self.gamma1.dim
    }

    pub fn big(&self) -> usize {
        node_size(self.grid().n_t, self.dim())
    }

    pub fn n(&self) -> usize {
        2 * self.grid().n_s * self.big()
    }

    pub fn pair_gamma(&self) -> PairField {
        PairField { xi1: self.gamma1.clone(), xi2: self.gamma2.clone() }
    }

    pub fn model(&self) -> &dyn HamiltonianModel {
        self.model.as_ref()
    }

    pub fn place(&self, p: &GluingProfile) -> Result<Placement> {
        p.place(&self.grid())
    }

    fn ds(&self, g: &CylinderGrid) -> Arc<Csr> {
        let mut c = self.ds_cache.lock().unwrap();
        c.entry(g.n_s).or_insert_with(|| Arc::new(cr_ds_operator(g.n_s, g.h_s, &self.asym))).clone()
    }

    /// Linearization at the constant trajectory 0 on grid `g`.
    fn l0(&self, g: &CylinderGrid) -> Arc<Csr> {
        if let Some(m) = self.l0_cache.lock().unwrap().get(&g.n_s) {
            return m.clone();
        }
        let m = Arc::new(self.linearize(&Field::zeros(*g, self.dim()), Variant::FrozenJ));
        self.l0_cache.lock().unwrap().insert(g.n_s, m.clone());
        m
    }

    pub fn residual(&self, u: &Field) -> Field {
        floer_residual_ds(self.model(), u, &self.ds(&u.grid))
    }

    pub fn linearize(&self, base: &Field, variant: Variant) -> Csr {
        self.ds(&base.grid).add_scaled(1.0, &node_operator(self.model(), base, variant))
    }

    /// Preglued base trajectory and its two halves gamma_r^- (seen from slot 1) and gamma_r^+.
    pub fn glued_base(&self, p: &GluingProfile) -> Result<(Field, Field, Field)> {
        let pl = self.place(p)?;
        let g = preglue_at(&pl, &self.pair_gamma());
        let minus = shift_onto(&g, pl.pair, -pl.shift);
        let plus = shift_onto(&g, pl.pair, pl.shift);
        Ok((g, minus, plus))
    }

    /// Filled section: r > 0 inverts (residual of the preglued field, linearized residual at 0 of the
    /// anti-preglued field); r = 0 returns the residuals of the two pieces.
    pub fn filled_section(&self, p: &GluingProfile, xi: &PairField) -> Result<PairField> {
        check_pair(xi)?;
        if !xi.xi1.compatible(&self.gamma1) {
            return Err(Error::Shape("perturbation does not match the trajectory grid".into()));
        }
        if !p.is_glued() {
            return Ok(PairField { xi1: self.residual(&self.gamma1.add(&xi.xi1)), xi2: self.residual(&self.gamma2.add(&xi.xi2)) });
        }
        let pl = self.place(p)?;
        let full = self.pair_gamma().add(xi);
        let zp = self.residual(&preglue_at(&pl, &full));
        let am = antiglue_at(&pl, xi);
        let zm = Field::from_real(pl.inner, self.dim(), &self.l0(&pl.inner).matvec(&am.to_real()));
        Ok(glue_inverse_at(&pl, &zp, &zm))
    }

    /// Unweighted, unclosed matrix of the linearized filled section at base `e`.
    pub fn dphi_unclosed(&self, p: &GluingProfile, e: &PairField) -> Result<Csr> {
        if !p.is_glued() {
            let l1 = self.linearize(&self.gamma1.add(&e.xi1), Variant::Full);
            let l2 = self.linearize(&self.gamma2.add(&e.xi2), Variant::Full);
            return Ok(Csr::block_diag(&[&l1, &l2]));
        }
        let pl = self.place(p)?;
        if !pl.exact() {
            return Err(Error::InvalidParameter("matrix assembly needs a snapped neck length".into()));
        }
        let big = self.big();
        let base = preglue_at(&pl, &self.pair_gamma().add(e));
        let lo = self.linearize(&base, Variant::Full);
        let li = self.l0(&pl.inner);
        let pa = Csr::vstack(&[&preglue_matrix(&pl, big), &antiglue_matrix(&pl, big)]);
        let mid = Csr::block_diag(&[&lo, &li]).matmul(&pa);
        Ok(glue_inverse_matrix(&pl, big).matmul(&mid))
    }

    pub fn pair_weights(&self, delta: f64) -> Vec<f64> {
        let w = weight_vector(&self.grid(), self.dim(), delta);
        let mut v = w.clone();
        v.extend(w);
        v
    }

    /// Weighted, per-slot closed version of a pair operator.
    pub fn close(&self, m: &Csr, delta: f64) -> Csr {
        let w = self.pair_weights(delta);
        let winv: Vec<f64> = w.iter().map(|x| 1.0 / x).collect();
        let mw = m.scale_rows_cols(&w, &winv);
        let half = self.n() / 2;
        let c = Closure::new(&self.asym, delta);
        let ns = self.grid().n_s;
        let top = c.close_block(&mw.sub_block(0, half, 0, mw.ncols), ns, 0);
        let bottom = c.close_block(&mw.sub_block(half, 2 * half, 0, mw.ncols), ns, half);
        Csr::vstack(&[&top, &bottom])
    }

    /// Closed rows of a pair vector: weighted section values `phi` and weighted unknowns `u`.
    pub fn close_vector(&self, phi: &[f64], u: &[f64], delta: f64) -> Vec<f64> {
        let c = Closure::new(&self.asym, delta);
        let half = self.n() / 2;
        let zb = vec![0.0; self.big()];
        let mut out = c.close_residual(&phi[..half], &u[..half], &zb, &zb);
        out.extend(c.close_residual(&phi[half..], &u[half..], &zb, &zb));
        out
    }

    pub fn dphi_closed(&self, p: &GluingProfile, e: &PairField, delta: f64) -> Result<Csr> {
        Ok(self.close(&self.dphi_unclosed(p, e)?, delta))
    }

    /// Linearized filled section as a level-indexed operator (level m: weight delta_m, closed).
    pub fn assemble_dphi(&self, p: &GluingProfile, e: &PairField, weights: &WeightSequence, levels: &[usize]) -> Result<ScOperator> {
        let m = self.dphi_unclosed(p, e)?;
        let mats = levels.iter().map(|&l| self.close(&m, weights.delta(l))).collect();
        ScOperator::from_levels(levels.to_vec(), mats, 1)
    }

    /// E = dphi(r, 0) - diag(L(gamma_r^-), L(gamma_r^+)) split into Q (same slot) and -S (other slot).
    pub fn decompose_errors(&self, p: &GluingProfile) -> Result<ErrorTerms> {
        if !p.is_glued() {
            return Err(Error::InvalidParameter("the error split is defined for r > 0".into()));
        }
        let dphi = self.dphi_unclosed(p, &PairField::zeros(self.grid(), self.dim()))?;
        let (_, minus, plus) = self.glued_base(p)?;
        let diag1 = self.linearize(&minus, Variant::Full);
        let diag2 = self.linearize(&plus, Variant::Full);
        let e = dphi.sub(&Csr::block_diag(&[&diag1, &diag2]));
        let h = self.n() / 2;
        Ok(ErrorTerms {
            q1: e.sub_block(0, h, 0, h),
            s1: e.sub_block(0, h, h, 2 * h).scale(-1.0),
            s2: e.sub_block(h, 2 * h, 0, h).scale(-1.0),
            q2: e.sub_block(h, 2 * h, h, 2 * h),
            diag1,
            diag2,
            dphi,
        })
    }
}

/// Rows of `m` (node blocks of size `big`) carrying a nonzero entry, as s-node indices.
pub fn nonzero_nodes(m: &Csr, big: usize, tol: f64) -> Vec<usize> {
    let mut nodes: Vec<usize> = (0..m.nrows).filter(|&r| m.row(r).any(|(_, v)| v.abs() > tol)).map(|r| r / big).collect();
    nodes.dedup();
    nodes
}

/// Reassembly defect: max |dphi - diag(L^-, L^+) - [[Q1, -S1], [-S2, Q2]]|.
pub fn reassembly_defect(t: &ErrorTerms) -> f64 {
    let h = t.q1.nrows;
    let rebuilt = Csr::block_diag(&[&t.diag1, &t.diag2])
        .add_scaled(1.0, &Csr::block2([[Some(&t.q1), Some(&t.s1.scale(-1.0))], [Some(&t.s2.scale(-1.0)), Some(&t.q2)]], [h, h], [h, h]));
    rebuilt.max_abs_diff(&t.dphi)
}

pub fn complex_gaussian(grid: CylinderGrid, dim: usize, center: f64, width: f64, mode: i32) -> Field {
    Field::from_fn(grid, dim, |s, t, c| {
        let a = (-((s - center) / width).powi(2)).exp() * (1.0 + 0.25 * c as f64);
        Complex64::from_polar(a, 2.0 * std::f64::consts::PI * mode as f64 * t)
    })
}
