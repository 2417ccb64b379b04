//! Verification of the sc-Fredholm conditions for the filled section: index
//! stability in the gluing parameter, kernel decay, continuity and convergence
//! of the linearization, and the contraction germ with Picard gluing.

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::floer::{decay_rate_adaptive, spectral_flow_index, Variant};
use crate::gluing::{nonzero_nodes, preglue, GluingProblem, GluingProfile, PairField};
use crate::grid::{diff_s, diff_t, CylinderGrid, Field};
use crate::linalg::{column, dot, norm, null_spaces, orth, BorderedLu};
use crate::linear::FredholmReport;
use crate::scale::{fit_slope, weighted_norm, WeightSequence};
use crate::sparse::Csr;
use num_complex::Complex64;

/// sup over derivatives d_s^a d_t^b, a + b <= m, of the pointwise modulus.
pub fn cm_norm(u: &Field, m: usize) -> Result<f64> {
    let mut best: f64 = 0.0;
    for a in 0..=m {
        let da = if a == 0 { u.clone() } else { diff_s(u, a)? };
        for b in 0..=(m - a) {
            let d = if b == 0 { da.clone() } else { diff_t(&da, b)? };
            best = best.max(d.max_abs());
        }
    }
    Ok(best)
}

/// Rate r of a fit value ~ C e^{-r x}.
pub fn fitted_rate(x: &[f64], values: &[f64]) -> f64 {
    let (xs, ys): (Vec<f64>, Vec<f64>) = x.iter().zip(values).filter(|(_, v)| **v > 0.0).map(|(a, v)| (*a, v.ln())).unzip();
    if xs.len() < 2 {
        return f64::NAN;
    }
    -fit_slope(&xs, &ys)
}

/// Smooth random pair: Gaussian bumps of width 1.5 to 3 with Fourier modes 0..2,
/// centred in `centres` (one range per slot).
pub fn smooth_pair(grid: CylinderGrid, dim: usize, rng: &mut ChaCha8Rng, bumps: usize, centres: [(f64, f64); 2]) -> PairField {
    let mut make = |range: (f64, f64)| {
        let params: Vec<(f64, f64, i32, Complex64, usize)> = (0..bumps)
            .map(|_| {
                (
                    rng.gen_range(range.0..range.1),
                    rng.gen_range(1.5..3.0),
                    rng.gen_range(0..3),
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                    rng.gen_range(0..dim),
                )
            })
            .collect();
        Field::from_fn(grid, dim, |s, t, c| {
            params
                .iter()
                .filter(|p| p.4 == c)
                .map(|&(c0, w, k, amp, _)| amp * (-((s - c0) / w).powi(2)).exp() * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 * t))
                .sum()
        })
    };
    let a = make(centres[0]);
    let b = make(centres[1]);
    PairField { xi1: a, xi2: b }
}

/// Centres of the complement probes: the nonlinearity is strongest where the
/// weighted norm is least restrictive, around s = 0 of each slot.
const CORE_WINDOW: (f64, f64) = (-15.0, 15.0);

fn default_centres(grid: &CylinderGrid) -> [(f64, f64); 2] {
    let s = grid.s_max - 8.0;
    [(-s, s), (-s, s)]
}

fn apply(m: &Csr, xi: &PairField) -> PairField {
    PairField::from_real(xi.grid(), xi.dim(), &m.matvec(&xi.to_real()))
}

/// Operator norm of diag(w_row) M diag(1/w_col) by power iteration on M^T M.
pub fn weighted_operator_norm(m: &Csr, w_row: &[f64], w_col: &[f64], iters: usize) -> f64 {
    let inv: Vec<f64> = w_col.iter().map(|x| 1.0 / x).collect();
    let a = m.scale_rows_cols(w_row, &inv);
    let mut x: Vec<f64> = (0..a.ncols).map(|i| 1.0 + ((i * 2654435761usize) % 1000) as f64 / 1000.0).collect();
    let mut est = 0.0;
    for _ in 0..iters {
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

// ---------------------------------------------------------------- index

#[derive(Clone, Debug, Serialize)]
pub struct IndexRow {
    pub r: f64,
    pub big_r: f64,
    pub report: FredholmReport,
    /// Fitted decay rate of every kernel element (unweighted pair fields).
    pub kernel_decay: Vec<f64>,
    /// Spectral-flow index, computed at r = 0 only.
    pub spectral_flow: Option<i64>,
}

/// Smallest side decay rate of a pair field, skipping slots that carry no mass.
pub fn pair_decay(xi: &PairField) -> f64 {
    let peak = xi.max_abs();
    [&xi.xi1, &xi.xi2]
        .iter()
        .filter(|f| f.max_abs() > 1e-6 * peak)
        .map(|f| decay_rate_adaptive(f, 1e-7))
        .fold(f64::INFINITY, f64::min)
}

pub fn kernel_fields(prob: &GluingProblem, kernel: &Mat<f64>, delta: f64) -> Vec<PairField> {
    let w = prob.pair_weights(delta);
    (0..kernel.ncols())
        .map(|c| {
            let u: Vec<f64> = column(kernel, c).iter().zip(&w).map(|(a, b)| a / b).collect();
            PairField::from_real(prob.grid(), prob.dim(), &u)
        })
        .collect()
}

/// Fredholm report of the closed linearized filled section at each gluing parameter.
pub fn index_vs_r(prob: &GluingProblem, profiles: &[GluingProfile], weights: &WeightSequence, level: usize) -> Result<Vec<IndexRow>> {
    let delta = weights.delta(level);
    let zero = PairField::zeros(prob.grid(), prob.dim());
    profiles
        .iter()
        .map(|p| {
            let d = prob.dphi_closed(p, &zero, delta)?;
            let ns = null_spaces(&d)?;
            let report = FredholmReport::from_null_spaces(level, &ns);
            let kernel_decay = kernel_fields(prob, &ns.kernel, delta).iter().map(pair_decay).collect();
            let spectral_flow = if p.is_glued() {
                None
            } else {
                Some(spectral_flow_index(prob.model(), &prob.gamma1, delta)? + spectral_flow_index(prob.model(), &prob.gamma2, delta)?)
            };
            Ok(IndexRow { r: p.r, big_r: p.big_r, report, kernel_decay, spectral_flow })
        })
        .collect()
}

// ---------------------------------------------------------------- (ii a)

#[derive(Clone, Debug, Serialize)]
pub struct ContinuityRow {
    pub level: usize,
    pub r: f64,
    pub big_r: f64,
    /// ||e - e'|| in H^{m+2, delta_{m+1}}.
    pub diff_norm: f64,
    /// sup over probes of ||(D(r,e) - D(r,e')) xi||_{H^{m,delta_m}} / (||e - e'|| ||xi||_{H^{m+1,delta_m}}).
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuityTable {
    pub rows: Vec<ContinuityRow>,
    /// Largest ratio observed (the constant of the Lipschitz bound).
    pub constant: f64,
    /// max/min ratio over each r, for the linear-in-perturbation check.
    pub spread: f64,
}

pub struct ContinuityOptions {
    pub base_amplitude: f64,
    pub sizes: Vec<f64>,
    pub probes: usize,
    pub seed: u64,
}

impl Default for ContinuityOptions {
    fn default() -> Self {
        Self { base_amplitude: 0.05, sizes: vec![1e-1, 3e-2, 1e-2], probes: 6, seed: 11 }
    }
}

/// Continuity of e -> D_E Phi(r, e) in the operator norm from level m to target level m.
pub fn verify_iia(prob: &GluingProblem, weights: &WeightSequence, level: usize, profiles: &[GluingProfile], opt: &ContinuityOptions) -> Result<ContinuityTable> {
    if level < 1 {
        return Err(Error::InvalidParameter("continuity is checked for levels m >= 1".into()));
    }
    let (dm, dm1) = (weights.delta(level), weights.delta(level + 1));
    let g = prob.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
    let mut rows = Vec::new();
    let mut spread: f64 = 1.0;
    for p in profiles {
        let centres = seam_centres(p, &g);
        let e = smooth_pair(g, prob.dim(), &mut rng, 3, centres).scale(opt.base_amplitude);
        let dir = smooth_pair(g, prob.dim(), &mut rng, 3, centres);
        let dn = dir.norm(level + 2, dm1)?;
        let dir = dir.scale(1.0 / dn);
        let probes: Vec<PairField> = (0..opt.probes)
            .map(|_| {
                let x = smooth_pair(g, prob.dim(), &mut rng, 2, centres);
                let n = x.norm(level + 1, dm).unwrap_or(1.0);
                x.scale(1.0 / n)
            })
            .collect();
        let d0 = prob.dphi_unclosed(p, &e)?;
        let mut ratios = Vec::new();
        for &size in &opt.sizes {
            let e2 = e.add(&dir.scale(size));
            let diff = prob.dphi_unclosed(p, &e2)?.sub(&d0);
            let mut best: f64 = 0.0;
            for x in &probes {
                best = best.max(apply(&diff, x).norm(level, dm)? / size);
            }
            ratios.push(best);
            rows.push(ContinuityRow { level, r: p.r, big_r: p.big_r, diff_norm: size, ratio: best });
        }
        let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        if hi > 0.0 {
            spread = spread.max(hi / lo);
        }
    }
    let constant = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(ContinuityTable { rows, constant, spread })
}

fn seam_centres(p: &GluingProfile, g: &CylinderGrid) -> [(f64, f64); 2] {
    if p.is_glued() {
        let r = p.big_r.min(g.s_max - 6.0);
        [(r - 6.0, r + 2.0), (-r - 2.0, -r + 6.0)]
    } else {
        default_centres(g)
    }
}

// ---------------------------------------------------------------- (ii b)

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub level: usize,
    pub big_r: f64,
    /// max over both halves of ||gamma_r^{-/+} - gamma_{1/2}||_{C^m}.
    pub base_diff: f64,
    /// Weighted operator norm of the coefficient-difference part of Q1 and Q2.
    pub q_norm: f64,
    /// sup over probes of ||(L(gamma_r^{-/+}) - L(gamma_{1/2})) xi||_m / ||xi||_{m+1}.
    pub diag_diff: f64,
    /// max |S xi| for probes supported in |s| <= R - 2 (zero by support).
    pub s_on_far_probe: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub base_rate: f64,
    pub q_rate: f64,
    pub diag_rate: f64,
}

/// Decay in R of the base-trajectory error, the Q-term coefficients and the diagonal difference.
pub fn verify_iib(prob: &GluingProblem, weights: &WeightSequence, level: usize, profiles: &[GluingProfile], seed: u64) -> Result<ConvergenceTable> {
    if level < 1 {
        return Err(Error::InvalidParameter("convergence is checked for levels m >= 1".into()));
    }
    let g = prob.grid();
    let dm = weights.delta(level);
    let flat = GluingProblem::new(prob.model.clone(), Field::zeros(g, prob.dim()), Field::zeros(g, prob.dim()))?;
    let w = prob.pair_weights(dm);
    let half = prob.n() / 2;
    let l1 = prob.linearize(&prob.gamma1, Variant::Full);
    let l2 = prob.linearize(&prob.gamma2, Variant::Full);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for p in profiles {
        if !p.is_glued() {
            continue;
        }
        let (_, minus, plus) = prob.glued_base(p)?;
        let base_diff = cm_norm(&minus.sub(&prob.gamma1), level)?.max(cm_norm(&plus.sub(&prob.gamma2), level)?);
        let t = prob.decompose_errors(p)?;
        let tf = flat.decompose_errors(p)?;
        let qc1 = t.q1.sub(&tf.q1);
        let qc2 = t.q2.sub(&tf.q2);
        let q_norm = weighted_operator_norm(&qc1, &w[..half], &w[..half], 30).max(weighted_operator_norm(&qc2, &w[half..], &w[half..], 30));
        let dd1 = t.diag1.sub(&l1);
        let dd2 = t.diag2.sub(&l2);
        let mut diag_diff: f64 = 0.0;
        for _ in 0..6 {
            let x = smooth_pair(g, prob.dim(), &mut rng, 3, seam_centres(p, &g));
            let nx = x.norm(level + 1, dm)?;
            let y = PairField {
                xi1: Field::from_real(g, prob.dim(), &dd1.matvec(&x.xi1.to_real())),
                xi2: Field::from_real(g, prob.dim(), &dd2.matvec(&x.xi2.to_real())),
            };
            diag_diff = diag_diff.max(y.norm(level, dm)? / nx);
        }
        let r = p.big_r;
        let far = PairField {
            xi1: Field::from_fn(g, prob.dim(), |s, _, _| if s.abs() <= r - 2.0 { Complex64::new((0.3 * s).cos(), 1.0) } else { Complex64::new(0.0, 0.0) }),
            xi2: Field::from_fn(g, prob.dim(), |s, _, _| if s.abs() <= r - 2.0 { Complex64::new(1.0, (0.2 * s).sin()) } else { Complex64::new(0.0, 0.0) }),
        };
        let s_on_far_probe = t.s1.matvec(&far.xi2.to_real()).iter().chain(t.s2.matvec(&far.xi1.to_real()).iter()).fold(0.0f64, |a, b| a.max(b.abs()));
        rows.push(ConvergenceRow { level, big_r: r, base_diff, q_norm, diag_diff, s_on_far_probe });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.big_r).collect();
    let rate = |f: &dyn Fn(&ConvergenceRow) -> f64| fitted_rate(&x, &rows.iter().map(f).collect::<Vec<_>>());
    Ok(ConvergenceTable { base_rate: rate(&|r| r.base_diff), q_rate: rate(&|r| r.q_norm), diag_rate: rate(&|r| r.diag_diff), rows })
}

/// Nodes where S1 or S2 carry entries, as signed distances from the respective seam.
pub fn s_support_offsets(prob: &GluingProblem, p: &GluingProfile) -> Result<Vec<f64>> {
    let t = prob.decompose_errors(p)?;
    let pl = prob.place(p)?;
    let g = prob.grid();
    let big = prob.big();
    let mut out: Vec<f64> = nonzero_nodes(&t.s1, big, 0.0).into_iter().map(|i| g.s(i) - pl.shift).collect();
    out.extend(nonzero_nodes(&t.s2, big, 0.0).into_iter().map(|i| g.s(i) + pl.shift));
    Ok(out)
}

// ---------------------------------------------------------------- germ

/// Contraction germ normal form of the filled section at one gluing parameter and level.
///
/// Coordinates are weighted (u = e^{delta eta} xi, per slot) and closed per slot.
/// With K an orthonormal kernel basis and C an orthonormal cokernel basis of
/// D = D_E Phi(r, 0), the map F(u) = Phi(r, xi) - Phi(r, 0) becomes
/// (A(v, w), w - B(v, w)) where (w - B, A) solves the bordered system
/// [[D, C~], [K~^T, 0]] with right-hand side F(K v + w). The borders K~, C~ are
/// K, C restricted to their significant entries, and W = ker K~^T.
pub struct GermNormalForm<'a> {
    pub prob: &'a GluingProblem,
    pub profile: GluingProfile,
    pub level: usize,
    pub delta: f64,
    pub kernel: Mat<f64>,
    /// Kernel columns rescaled to unit level norm; v is expressed in this basis.
    pub kernel_param: Mat<f64>,
    pub cokernel: Mat<f64>,
    pub d: Csr,
    pub report: FredholmReport,
    bordered: BorderedLu,
    /// K~ (K~^T K)^{-T}: the projection onto W along span K is u - K dual^T u.
    kernel_dual: Mat<f64>,
    phi0: Vec<f64>,
    weights: Vec<f64>,
    /// Measured sup of ||w||_m / ||D w||_m over probes.
    pub stability_constant: f64,
}

impl<'a> GermNormalForm<'a> {
    pub fn k(&self) -> usize {
        self.kernel.ncols()
    }

    pub fn l(&self) -> usize {
        self.cokernel.ncols()
    }

    pub fn unknowns(&self) -> usize {
        self.d.ncols
    }

    fn field_of(&self, u: &[f64]) -> PairField {
        let x: Vec<f64> = u.iter().zip(&self.weights).map(|(a, b)| a / b).collect();
        PairField::from_real(self.prob.grid(), self.prob.dim(), &x)
    }

    /// Norm of weighted coordinates in the level-m domain space H^{m+1, delta_m}.
    pub fn level_norm(&self, u: &[f64]) -> f64 {
        self.field_of(u).norm(self.level + 1, self.delta).unwrap_or(f64::NAN)
    }

    fn phi_weighted(&self, u: &[f64]) -> Result<Vec<f64>> {
        let xi = self.field_of(u);
        let phi = self.prob.filled_section(&self.profile, &xi)?.to_real();
        Ok(phi.iter().zip(&self.weights).map(|(a, b)| a * b).collect())
    }

    /// Closed F(u) = Phi(r, xi(u)) - Phi(r, 0).
    pub fn f(&self, u: &[f64]) -> Result<Vec<f64>> {
        let phi = self.phi_weighted(u)?;
        let diff: Vec<f64> = phi.iter().zip(&self.phi0).map(|(a, b)| a - b).collect();
        Ok(self.prob.close_vector(&diff, u, self.delta))
    }

    /// Bordered solve: the complement element w with D w = y modulo span C~.
    pub fn solve_complement(&self, y: &[f64]) -> Vec<f64> {
        self.bordered.solve(y).0
    }

    pub fn embed_v(&self, v: &[f64]) -> Vec<f64> {
        let n = self.unknowns();
        (0..n).map(|i| (0..self.k()).map(|c| self.kernel_param[(i, c)] * v[c]).sum()).collect()
    }

    /// Projection onto the complement W along the kernel.
    pub fn project_complement(&self, u: &[f64]) -> Vec<f64> {
        let mut w = u.to_vec();
        for c in 0..self.k() {
            let a = dot(&column(&self.kernel_dual, c), u);
            for (i, x) in w.iter_mut().enumerate() {
                *x -= a * self.kernel[(i, c)];
            }
        }
        w
    }

    /// (A(v, w), w - B(v, w)).
    pub fn transformed(&self, v: &[f64], w: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let x: Vec<f64> = self.embed_v(v).iter().zip(w).map(|(a, b)| a + b).collect();
        let (w2, a) = self.bordered.solve(&self.f(&x)?);
        Ok((a, w2))
    }

    pub fn b(&self, v: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        let (_, second) = self.transformed(v, w)?;
        Ok(w.iter().zip(&second).map(|(a, b)| a - b).collect())
    }

    /// Random smooth element of W with level norm `size`.
    pub fn sample_complement(&self, rng: &mut ChaCha8Rng, size: f64) -> Vec<f64> {
        let g = self.prob.grid();
        let x = smooth_pair(g, self.prob.dim(), rng, 3, [CORE_WINDOW, CORE_WINDOW]);
        let u: Vec<f64> = x.to_real().iter().zip(&self.weights).map(|(a, b)| a * b).collect();
        let w = self.project_complement(&u);
        let n = self.level_norm(&w);
        w.iter().map(|x| x * size / n).collect()
    }
}

pub fn build_germ_normal_form<'a>(prob: &'a GluingProblem, p: &GluingProfile, weights: &WeightSequence, level: usize) -> Result<GermNormalForm<'a>> {
    if level < 1 {
        return Err(Error::InvalidParameter("the germ is built for levels m >= 1".into()));
    }
    let delta = weights.delta(level);
    let zero = PairField::zeros(prob.grid(), prob.dim());
    let d = prob.dphi_closed(p, &zero, delta)?;
    let ns = null_spaces(&d)?;
    let report = FredholmReport::from_null_spaces(level, &ns);
    if !report.trustworthy {
        return Err(Error::Degenerate(format!("kernel/cokernel split is not resolved (gap {:.2e}, smallest {:?})", report.sv_gap, report.smallest)));
    }
    let kernel = if ns.dim_ker() > 0 { orth(&ns.kernel, 1e-12) } else { ns.kernel.clone() };
    let cokernel = if ns.dim_coker() > 0 { orth(&ns.cokernel, 1e-12) } else { ns.cokernel.clone() };
    let cols = d.ncols;
    let (bordered, kernel_dual) = germ_border(&d, &kernel, &cokernel)?;
    let w = prob.pair_weights(delta);
    let phi0: Vec<f64> = prob.filled_section(p, &zero)?.to_real().iter().zip(&w).map(|(a, b)| a * b).collect();
    let mut g = GermNormalForm {
        prob,
        profile: *p,
        level,
        delta,
        kernel_param: kernel.clone(),
        kernel,
        cokernel,
        d,
        report,
        bordered,
        kernel_dual,
        phi0,
        weights: w,
        stability_constant: f64::NAN,
    };
    for c in 0..g.k() {
        let n = g.level_norm(&column(&g.kernel, c));
        for i in 0..cols {
            g.kernel_param[(i, c)] /= n;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut cm: f64 = 0.0;
    for _ in 0..6 {
        let w = g.sample_complement(&mut rng, 1.0);
        let dw = g.d.matvec(&w);
        let back = g.solve_complement(&dw);
        let num = g.level_norm(&back);
        let den = apply(&g.prob.dphi_unclosed(p, &zero)?, &g.field_of(&w)).norm(level, delta)?;
        cm = cm.max(num / den);
    }
    g.stability_constant = cm;
    Ok(g)
}

/// Truncation levels tried for the borders, coarsest first.
const BORDER_KEEP: [f64; 5] = [0.3, 0.1, 1e-2, 1e-4, 0.0];

/// Factorizes the bordered system with the sparsest borders whose pairing with
/// the kernel and cokernel stays well conditioned.
fn germ_border(d: &Csr, kernel: &Mat<f64>, cokernel: &Mat<f64>) -> Result<(BorderedLu, Mat<f64>)> {
    let cond = |a: &Mat<f64>, b: &Mat<f64>| -> f64 {
        if a.ncols() == 0 {
            return 1.0;
        }
        let s = (a.transpose() * b).singular_values().expect("small svd");
        s[0] / s[s.len() - 1]
    };
    for keep in BORDER_KEEP {
        let b = BorderedLu::new(d, kernel, cokernel, keep)?;
        if cond(&b.kernel_border, kernel) < 1e3 && cond(&b.cokernel_border, cokernel) < 1e3 {
            let dual = if kernel.ncols() == 0 {
                Mat::zeros(kernel.nrows(), 0)
            } else {
                let pairing = b.kernel_border.transpose() * kernel;
                let inv = pairing.partial_piv_lu().inverse();
                &b.kernel_border * inv.transpose()
            };
            return Ok((b, dual));
        }
    }
    Err(Error::Degenerate("bordered system is ill-conditioned for every border truncation".into()))
}

/// max over probes of |S D w - w| / |w| for w in the complement (zero for an exact normal form).
pub fn normal_form_defect(g: &GermNormalForm, probes: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..probes)
        .map(|_| {
            let w = g.sample_complement(&mut rng, 1.0);
            let back = g.solve_complement(&g.d.matvec(&w));
            norm(&back.iter().zip(&w).map(|(a, b)| a - b).collect::<Vec<_>>()) / norm(&w)
        })
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------- contraction

#[derive(Clone, Debug, Serialize)]
pub struct ContractionRow {
    pub level: usize,
    pub radius: f64,
    pub theta: f64,
    pub pairs: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractionTable {
    pub rows: Vec<ContractionRow>,
    /// Slope of a least-squares line through the origin and its worst relative misfit.
    pub slope: f64,
    pub line_misfit: f64,
}

/// Ratios below this are round-off of an affine map and count as zero.
pub const THETA_ZERO: f64 = 1e-10;

/// Samples that also get a power-iterated worst-case partner.
const POWER_SAMPLES: usize = 2;
const POWER_STEPS: usize = 4;

/// Dominant direction of w -> D_w B(v, w1) w (unit level norm), by power iteration on difference quotients.
fn dominant_direction(g: &GermNormalForm, v: &[f64], w1: &[f64], steps: usize) -> Result<Vec<f64>> {
    let b0 = g.b(v, w1)?;
    let unit = |x: Vec<f64>| {
        let n = g.level_norm(&x);
        x.into_iter().map(|a| a / n).collect::<Vec<f64>>()
    };
    let start = if g.level_norm(w1) > 0.0 { w1.to_vec() } else { b0.clone() };
    let mut d = unit(g.project_complement(&start));
    let tau = 1e-2 * g.level_norm(w1).max(norm(v)).max(1e-12);
    for _ in 0..steps {
        let shifted: Vec<f64> = w1.iter().zip(&d).map(|(a, b)| a + tau * b).collect();
        let diff: Vec<f64> = g.b(v, &shifted)?.iter().zip(&b0).map(|(a, b)| (a - b) / tau).collect();
        if !(g.level_norm(&diff) > 0.0) {
            break;
        }
        d = unit(g.project_complement(&diff));
    }
    Ok(d)
}

/// sup over sampled (v, w1, w2) with |v|, ||w_i|| <= radius of ||B(v,w1) - B(v,w2)|| / ||w1 - w2||.
pub fn estimate_contraction(g: &GermNormalForm, radii: &[f64], n_samples: usize, seed: u64) -> Result<ContractionTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // One family of unit-radius samples, rescaled to every radius.
    let samples: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..n_samples)
        .map(|_| {
            let mut v: Vec<f64> = (0..g.k()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let nv = norm(&v).max(1e-300);
            let sv = rng.gen_range(0.2..1.0);
            v.iter_mut().for_each(|x| *x *= sv / nv);
            let (s1, s2) = (rng.gen_range(0.2..1.0), rng.gen_range(0.2..1.0));
            let w1 = g.sample_complement(&mut rng, s1);
            let w2 = g.sample_complement(&mut rng, s2);
            (v, w1, w2)
        })
        .collect();
    let mut rows = Vec::new();
    for &eps in radii {
        let mut theta: f64 = 0.0;
        let mut pairs = 0;
        let sc = |x: &Vec<f64>| x.iter().map(|a| a * eps).collect::<Vec<f64>>();
        let mut cells: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = samples.iter().map(|(v, a, b)| (sc(v), sc(a), sc(b))).collect();
        // The supremum of a quadratic remainder sits on the sphere |v| = eps, so the
        // power-iterated cells use full-radius parameters, including the kernel axes at w = 0.
        let mut seeds: Vec<(Vec<f64>, Vec<f64>)> = samples
            .iter()
            .take(POWER_SAMPLES)
            .map(|(v, w1, _)| {
                let nv = norm(v).max(1e-300);
                (v.iter().map(|x| x * eps / nv).collect(), sc(w1))
            })
            .collect();
        for i in 0..g.k() {
            let mut v = vec![0.0; g.k()];
            v[i] = eps;
            seeds.push((v, vec![0.0; g.unknowns()]));
        }
        for (v, w1) in seeds {
            let d = dominant_direction(g, &v, &w1, POWER_STEPS)?;
            let w2 = w1.iter().zip(&d).map(|(a, b)| a + 0.5 * eps * b).collect();
            cells.push((v, w1, w2));
        }
        for (v, w1, w2) in cells {
            let dw: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| a - b).collect();
            let dn = g.level_norm(&dw);
            if !(dn > 0.0) {
                continue;
            }
            let b1 = g.b(&v, &w1)?;
            let b2 = g.b(&v, &w2)?;
            let db: Vec<f64> = b1.iter().zip(&b2).map(|(a, b)| a - b).collect();
            theta = theta.max(g.level_norm(&db) / dn);
            pairs += 1;
        }
        if pairs == 0 {
            return Err(Error::Degenerate(format!("no valid sample pairs at radius {eps}")));
        }
        if theta < THETA_ZERO {
            theta = 0.0;
        }
        rows.push(ContractionRow { level: g.level, radius: eps, theta, pairs });
    }
    let sxx: f64 = rows.iter().map(|r| r.radius * r.radius).sum();
    let sxy: f64 = rows.iter().map(|r| r.radius * r.theta).sum();
    let slope = sxy / sxx;
    let line_misfit = rows
        .iter()
        .map(|r| {
            let fit = slope * r.radius;
            if fit == 0.0 && r.theta == 0.0 {
                0.0
            } else {
                (r.theta - fit).abs() / fit.abs().max(r.theta.abs())
            }
        })
        .fold(0.0, f64::max);
    Ok(ContractionTable { rows, slope, line_misfit })
}

// ---------------------------------------------------------------- Picard

#[derive(Clone, Debug)]
pub struct PicardResult {
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub glued: Field,
    /// ||residual of the glued field||_{0, delta_0}.
    pub residual: f64,
    /// Level norms of successive differences w_{n+1} - w_n.
    pub steps: Vec<f64>,
    pub ratios: Vec<f64>,
    /// |A(v, w)| at the fixed point.
    pub obstruction: f64,
}

/// Relative step size at which a non-decreasing step is taken as the round-off floor.
pub const ROUNDOFF_PLATEAU: f64 = 1e-3;

pub fn picard_glue(g: &GermNormalForm, v: &[f64], delta0: f64, tol: f64, max_iter: usize) -> Result<PicardResult> {
    if v.len() != g.k() {
        return Err(Error::Shape(format!("parameter has {} entries, kernel dimension is {}", v.len(), g.k())));
    }
    let mut w = vec![0.0; g.unknowns()];
    let mut steps = Vec::new();
    let mut ratios = Vec::new();
    for it in 0..max_iter {
        let next = g.b(v, &w)?;
        let step = g.level_norm(&next.iter().zip(&w).map(|(a, b)| a - b).collect::<Vec<_>>());
        if !step.is_finite() {
            return Err(Error::NoConvergence(format!("non-finite iterate at step {it}; steps {steps:?}")));
        }
        if let Some(&prev) = steps.last() {
            if prev > 0.0 {
                let q = step / prev;
                ratios.push(q);
                if q >= 1.0 && step <= ROUNDOFF_PLATEAU * steps[0] {
                    break;
                }
                if q >= 1.0 && step > tol {
                    return Err(Error::NoConvergence(format!("iteration is not contracting: ratio {q:.3} at step {it}; steps {steps:?}")));
                }
            }
        }
        steps.push(step);
        w = next;
        if step <= tol {
            break;
        }
    }
    if steps.last().map_or(true, |&s| s > tol.max(ROUNDOFF_PLATEAU * steps[0])) {
        return Err(Error::NoConvergence(format!("no convergence in {max_iter} steps; steps {steps:?}")));
    }
    let x: Vec<f64> = g.embed_v(v).iter().zip(&w).map(|(a, b)| a + b).collect();
    let xi = g.field_of(&x);
    let glued = preglue(&g.profile, &g.prob.pair_gamma().add(&xi))?;
    let residual = weighted_norm(&g.prob.residual(&glued), 0, delta0)?;
    let (a, _) = g.transformed(v, &w)?;
    Ok(PicardResult { v: v.to_vec(), w, glued, residual, steps, ratios, obstruction: norm(&a) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floer::{HomoclinicModel, LinearModel, PerturbedModel};
    use std::sync::Arc;

    fn grid() -> CylinderGrid {
        CylinderGrid::with_spacing(0.25, 240, 4).unwrap()
    }

    fn weights() -> WeightSequence {
        WeightSequence::new(vec![0.1, 0.2, 0.3, 0.35], 0.45).unwrap()
    }

    fn homoclinic() -> GluingProblem {
        let m = HomoclinicModel::new(0.5, 0.0).unwrap();
        let o = m.discrete_orbit(&grid()).unwrap();
        GluingProblem::new(Arc::new(m), o.clone(), o).unwrap()
    }

    fn flat_linear() -> GluingProblem {
        let g = grid();
        GluingProblem::new(Arc::new(LinearModel::new(1.0, 1).unwrap()), Field::zeros(g, 1), Field::zeros(g, 1)).unwrap()
    }

    #[test]
    fn cm_norm_of_plane_wave() {
        let g = CylinderGrid::with_spacing(0.05, 400, 16).unwrap();
        let u = Field::from_fn(g, 1, |s, t, _| Complex64::new((0.5 * s).sin() * (2.0 * std::f64::consts::PI * t).cos(), 0.0));
        let c1 = cm_norm(&u, 1).unwrap();
        assert!((c1 - 2.0 * std::f64::consts::PI).abs() < 1e-3);
    }

    #[test]
    fn index_is_stable_and_matches_spectral_flow() {
        let p = [GluingProfile::unglued(), GluingProfile::from_length(45.0).unwrap()];
        for prob in [flat_linear(), homoclinic()] {
            let rows = index_vs_r(&prob, &p, &weights(), 1).unwrap();
            for r in &rows {
                assert_eq!(r.report.index, 0, "{r:?}");
                assert!(r.report.trustworthy, "{r:?}");
                for d in &r.kernel_decay {
                    assert!(*d >= 0.9 * 0.2, "{r:?}");
                }
            }
            assert_eq!(rows[0].spectral_flow, Some(rows[0].report.index));
        }
        let neg = WeightSequence::new(vec![0.1, 1.5], 2.0).unwrap();
        let rows = index_vs_r(&flat_linear(), &p, &neg, 1).unwrap();
        assert!(rows.iter().all(|r| r.report.index == -4), "{rows:?}");
        assert_eq!(rows[0].spectral_flow, Some(-4));
    }

    #[test]
    fn continuity_rows() {
        let p = [GluingProfile::from_length(45.0).unwrap()];
        let t = verify_iia(&flat_linear(), &weights(), 1, &p, &ContinuityOptions::default()).unwrap();
        assert!(t.rows.iter().all(|r| r.ratio == 0.0));
        let g = grid();
        let pert = GluingProblem::new(Arc::new(PerturbedModel::new(1.0, 0.05, 1).unwrap()), Field::zeros(g, 1), Field::zeros(g, 1)).unwrap();
        let t = verify_iia(&pert, &weights(), 1, &p, &ContinuityOptions::default()).unwrap();
        assert!(t.constant.is_finite() && t.constant > 0.0);
        assert!(t.spread < 1.3, "{t:?}");
    }

    #[test]
    fn convergence_rates() {
        let prob = homoclinic();
        let p: Vec<GluingProfile> = [44.0, 48.0, 52.0].iter().map(|&r| GluingProfile::from_length(r).unwrap()).collect();
        let t = verify_iib(&prob, &weights(), 1, &p, 3).unwrap();
        assert!(t.base_rate >= 0.9 * 0.3, "{t:?}");
        assert!(t.q_rate >= 0.9 * 0.3, "{t:?}");
        assert!(t.rows.iter().all(|r| r.s_on_far_probe == 0.0));
    }

    #[test]
    fn germ_contraction_and_picard() {
        let prob = homoclinic();
        let p = GluingProfile::from_length(45.0).unwrap();
        let g = build_germ_normal_form(&prob, &p, &weights(), 1).unwrap();
        assert!(normal_form_defect(&g, 4, 1) < 1e-8);
        let zero_v = vec![0.0; g.k()];
        let (a, w) = g.transformed(&zero_v, &vec![0.0; g.unknowns()]).unwrap();
        assert!(a.iter().all(|x| *x == 0.0) && w.iter().all(|x| *x == 0.0));
        let table = estimate_contraction(&g, &[0.04, 0.02, 0.01, 0.005], 8, 5).unwrap();
        assert!(table.rows.last().unwrap().theta < 1.0, "{table:?}");
        let r = picard_glue(&g, &zero_v, 0.1, 1e-12, 20).unwrap();
        assert!(r.w.iter().all(|x| *x == 0.0));
        let mut v = vec![0.0; g.k()];
        v[0] = 1e-3;
        let r = picard_glue(&g, &v, 0.1, 1e-13, 50).unwrap();
        assert!(r.residual < 1e-8, "{} {:?}", r.residual, r.steps);
        let lin = flat_linear();
        let gl = build_germ_normal_form(&lin, &p, &weights(), 1).unwrap();
        let tl = estimate_contraction(&gl, &[0.04, 0.02], 4, 5).unwrap();
        assert!(tl.rows.iter().all(|r| r.theta == 0.0), "{tl:?}");
    }
}
