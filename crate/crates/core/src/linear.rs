//! Level-indexed linear operators: kernel/cokernel/index reports, regularity
//! of preimages, and the splitting of domain and target into kernel,
//! complement, range and a smoothed cokernel complement.

use std::f64::consts::PI;

use faer::Mat;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{column, null_spaces, null_spaces_dense, orth, NullSpaces};
use crate::sparse::Csr;

/// One matrix per level acting on level-scaled coordinates:
/// `matrices[i] = diag(target_scale[i]) * raw * diag(1 / domain_scale[i])`.
#[derive(Clone, Debug)]
pub struct ScOperator {
    pub levels: Vec<usize>,
    pub matrices: Vec<Csr>,
    pub raw: Csr,
    pub domain_scale: Vec<Vec<f64>>,
    pub target_scale: Vec<Vec<f64>>,
    /// Derivative order consumed per level.
    pub order: usize,
    /// Frequency label of each domain/target coordinate (used for smoothness proxies).
    pub frequencies: Vec<usize>,
}

impl ScOperator {
    /// An operator whose level matrices are explicit (no raw/scale relation).
    pub fn from_levels(levels: Vec<usize>, matrices: Vec<Csr>, order: usize) -> Result<Self> {
        if levels.len() != matrices.len() || matrices.is_empty() {
            return Err(Error::Shape("one matrix per level required".into()));
        }
        let m = matrices[0].ncols;
        if matrices.iter().any(|a| a.ncols != m) {
            return Err(Error::Shape("levels must share the domain dimension".into()));
        }
        Ok(Self {
            levels,
            raw: matrices[0].clone(),
            domain_scale: matrices.iter().map(|a| vec![1.0; a.ncols]).collect(),
            target_scale: matrices.iter().map(|a| vec![1.0; a.nrows]).collect(),
            frequencies: vec![0; m],
            matrices,
            order,
        })
    }

    pub fn scaled(raw: Csr, levels: Vec<usize>, domain_scale: Vec<Vec<f64>>, target_scale: Vec<Vec<f64>>, order: usize, frequencies: Vec<usize>) -> Self {
        let matrices = domain_scale
            .iter()
            .zip(&target_scale)
            .map(|(d, t)| raw.scale_rows_cols(t, &d.iter().map(|x| 1.0 / x).collect::<Vec<_>>()))
            .collect();
        Self { levels, matrices, raw, domain_scale, target_scale, order, frequencies }
    }

    pub fn identity(n: usize, levels: Vec<usize>) -> Self {
        let k = levels.len();
        Self::scaled(Csr::identity(n), levels, vec![vec![1.0; n]; k], vec![vec![1.0; n]; k], 0, vec![0; n])
    }

    pub fn zero(n: usize, levels: Vec<usize>) -> Self {
        let k = levels.len();
        Self::scaled(Csr::zeros(n, n), levels, vec![vec![1.0; n]; k], vec![vec![1.0; n]; k], 0, vec![0; n])
    }

    fn slot(&self, level: usize) -> Result<usize> {
        self.levels
            .iter()
            .position(|&l| l == level)
            .ok_or_else(|| Error::InvalidParameter(format!("level {level} not assembled")))
    }

    pub fn matrix(&self, level: usize) -> Result<&Csr> {
        Ok(&self.matrices[self.slot(level)?])
    }
}

/// Real Fourier coordinates on n_t samples: [mean, cos 1, sin 1, cos 2, sin 2, ...]
/// without the Nyquist mode.
pub fn fourier_frequencies(n_t: usize) -> Vec<usize> {
    let kmax = (n_t - 1) / 2;
    let mut f = vec![0];
    for k in 1..=kmax {
        f.push(k);
        f.push(k);
    }
    f
}

pub fn samples_to_fourier(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let freqs = fourier_frequencies(n);
    let mut c = vec![0.0; freqs.len()];
    c[0] = f.iter().sum::<f64>() / n as f64;
    for k in 1..=(n - 1) / 2 {
        for (j, v) in f.iter().enumerate() {
            let th = 2.0 * PI * (k * j) as f64 / n as f64;
            c[2 * k - 1] += 2.0 * v * th.cos() / n as f64;
            c[2 * k] += 2.0 * v * th.sin() / n as f64;
        }
    }
    c
}

pub fn fourier_to_samples(c: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let mut v = c[0];
            for k in 1..=(n - 1) / 2 {
                let th = 2.0 * PI * (k * j) as f64 / n as f64;
                v += c[2 * k - 1] * th.cos() + c[2 * k] * th.sin();
            }
            v
        })
        .collect()
}

/// d/dt on real periodic functions, level m mapping the (m+1)-weighted domain
/// coordinates to m-weighted target coordinates, weights (1 + |k|)^m.
pub fn assemble_ddt(n_t: usize, levels: &[usize]) -> Result<ScOperator> {
    if n_t < 4 {
        return Err(Error::InvalidParameter(format!("n_t must be at least 4, got {n_t}")));
    }
    let freqs = fourier_frequencies(n_t);
    let dim = freqs.len();
    let mut t = Vec::new();
    for k in 1..=(n_t - 1) / 2 {
        let w = 2.0 * PI * k as f64;
        // d/dt cos = -w sin, d/dt sin = w cos
        t.push((2 * k, 2 * k - 1, -w));
        t.push((2 * k - 1, 2 * k, w));
    }
    let raw = Csr::from_triplets(dim, dim, t);
    let pw = |m: usize| freqs.iter().map(|&k| (1.0 + k as f64).powi(m as i32)).collect::<Vec<f64>>();
    let domain = levels.iter().map(|&m| pw(m + 1)).collect();
    let target = levels.iter().map(|&m| pw(m)).collect();
    Ok(ScOperator::scaled(raw, levels.to_vec(), domain, target, 1, freqs))
}

/// d/dt applied to real samples through the Fourier coordinates.
pub fn ddt_apply(samples: &[f64]) -> Result<Vec<f64>> {
    let op = assemble_ddt(samples.len(), &[0])?;
    Ok(fourier_to_samples(&op.raw.matvec(&samples_to_fourier(samples)), samples.len()))
}

#[derive(Clone, Debug, Serialize)]
pub struct FredholmReport {
    pub level: usize,
    pub dim_ker: usize,
    pub dim_coker: usize,
    pub index: i64,
    pub sv_threshold: f64,
    pub sv_gap: f64,
    pub sigma_max: f64,
    pub trustworthy: bool,
    /// Smallest singular values observed (ascending), for diagnostics.
    pub smallest: Vec<f64>,
}

pub const TRUST_GAP: f64 = 10.0;

impl FredholmReport {
    pub fn from_null_spaces(level: usize, ns: &NullSpaces) -> Self {
        let mut smallest = ns.right_values.clone();
        smallest.truncate(12);
        Self {
            level,
            dim_ker: ns.dim_ker(),
            dim_coker: ns.dim_coker(),
            index: ns.index(),
            sv_threshold: ns.threshold,
            sv_gap: ns.sv_gap,
            sigma_max: ns.sigma_max,
            trustworthy: ns.sv_gap > TRUST_GAP,
            smallest,
        }
    }
}

pub fn fredholm_report(t: &ScOperator, level: usize) -> Result<FredholmReport> {
    let ns = null_spaces(t.matrix(level)?)?;
    Ok(FredholmReport::from_null_spaces(level, &ns))
}

/// Reports for every assembled level; fails with a diagnostic when index or
/// kernel dimension differ between trustworthy levels.
pub fn index_all_scales(t: &ScOperator) -> Result<Vec<FredholmReport>> {
    if t.levels.len() < 2 {
        return Err(Error::InvalidParameter("need at least two levels".into()));
    }
    let reps: Vec<FredholmReport> = t.levels.iter().map(|&l| fredholm_report(t, l)).collect::<Result<_>>()?;
    let base = &reps[0];
    for r in &reps[1..] {
        if r.index != base.index || r.dim_ker != base.dim_ker {
            return Err(Error::Degenerate(format!(
                "level {} has (ker {}, coker {}, index {}) but level {} has (ker {}, coker {}, index {}); smallest singular values {:?} vs {:?}",
                r.level, r.dim_ker, r.dim_coker, r.index, base.level, base.dim_ker, base.dim_coker, base.index, r.smallest, base.smallest
            )));
        }
    }
    Ok(reps)
}

#[derive(Clone, Debug, Serialize)]
pub enum Regularity {
    /// A preimage exists and is finite and spectrally decaying at the requested level.
    Regular { level_norm: f64, high_frequency_fraction: f64, residual: f64 },
    /// A preimage exists but fails the smoothness proxy at the requested level.
    Irregular { level_norm: f64, high_frequency_fraction: f64, residual: f64 },
    /// Least-squares residual shows the right-hand side is not in the range.
    NoPreimage { residual: f64 },
}

#[derive(Clone, Debug)]
pub struct RegularizingResult {
    pub verdict: Regularity,
    pub preimage: Option<Vec<f64>>,
}

impl RegularizingResult {
    pub fn passed(&self) -> bool {
        matches!(self.verdict, Regularity::Regular { .. })
    }
}

/// Solve T e = f (raw coordinates, minimum-norm least squares) and test e at level m.
pub fn regularizing_check(t: &ScOperator, f: &[f64], level: usize) -> Result<RegularizingResult> {
    let slot = t.slot(level)?;
    let a = t.raw.to_dense();
    let svd = a.svd().map_err(|e| Error::NoConvergence(format!("{e:?}")))?;
    let k = a.nrows().min(a.ncols());
    let ns = null_spaces_dense(&a)?;
    let mut e = vec![0.0; a.ncols()];
    for i in 0..k {
        let s = svd.S()[i];
        if s <= ns.threshold || s == 0.0 {
            continue;
        }
        let ui = column(&svd.U().to_owned(), i);
        let coef = crate::linalg::dot(&ui, f) / s;
        for (j, ej) in e.iter_mut().enumerate() {
            *ej += coef * svd.V()[(j, i)];
        }
    }
    let te = t.raw.matvec(&e);
    let fnorm = crate::linalg::norm(f);
    let residual = crate::linalg::norm(&te.iter().zip(f).map(|(a, b)| a - b).collect::<Vec<_>>());
    if residual > 1e-8 * fnorm.max(1e-300) && fnorm > 0.0 {
        return Ok(RegularizingResult { verdict: Regularity::NoPreimage { residual }, preimage: None });
    }
    let scaled: Vec<f64> = e.iter().zip(&t.domain_scale[slot]).map(|(x, w)| x * w).collect();
    let level_norm = crate::linalg::norm(&scaled);
    let kmax = t.frequencies.iter().copied().max().unwrap_or(0);
    let hi: f64 = scaled
        .iter()
        .zip(&t.frequencies)
        .filter(|(_, &k)| 2 * k > kmax)
        .map(|(x, _)| x * x)
        .sum::<f64>()
        .sqrt();
    let frac = if level_norm > 0.0 { hi / level_norm } else { 0.0 };
    let verdict = if level_norm.is_finite() && frac < 1e-6 {
        Regularity::Regular { level_norm, high_frequency_fraction: frac, residual }
    } else {
        Regularity::Irregular { level_norm, high_frequency_fraction: frac, residual }
    };
    Ok(RegularizingResult { verdict, preimage: Some(e) })
}

/// Kernel, complement and range/cokernel-complement splittings of one level.
#[derive(Clone, Debug)]
pub struct Splitting {
    pub kernel_basis: Mat<f64>,
    pub c_basis: Mat<f64>,
    /// Whether the cokernel complement was replaced by its low-frequency smoothing.
    pub smoothed: bool,
    pub report: FredholmReport,
}

impl Splitting {
    pub fn x_projector(&self) -> Mat<f64> {
        let n = self.kernel_basis.nrows();
        Mat::<f64>::identity(n, n) - &self.kernel_basis * self.kernel_basis.transpose()
    }

    pub fn pi_c(&self) -> Mat<f64> {
        &self.c_basis * self.c_basis.transpose()
    }

    pub fn pi_c_perp(&self) -> Mat<f64> {
        let n = self.c_basis.nrows();
        Mat::<f64>::identity(n, n) - self.pi_c()
    }

    pub fn apply_pi_c(&self, y: &[f64]) -> Vec<f64> {
        let coeffs: Vec<f64> = (0..self.c_basis.ncols()).map(|j| crate::linalg::dot(&column(&self.c_basis, j), y)).collect();
        (0..y.len()).map(|i| (0..coeffs.len()).map(|j| self.c_basis[(i, j)] * coeffs[j]).sum()).collect()
    }
}

pub const SMOOTHING_ANGLE_TOL: f64 = 1e-6;

pub fn build_splittings(t: &ScOperator, level: usize) -> Result<Splitting> {
    let a = t.matrix(level)?;
    let ns = null_spaces(a)?;
    let report = FredholmReport::from_null_spaces(level, &ns);
    if !report.trustworthy {
        return Err(Error::Degenerate(format!("singular-value gap {} too small at level {level}", report.sv_gap)));
    }
    let raw_c = ns.cokernel.clone();
    let (c_basis, smoothed) = smooth_cokernel(&raw_c, &t.frequencies, a.nrows);
    Ok(Splitting { kernel_basis: ns.kernel, c_basis, smoothed, report })
}

/// Project onto coordinates with frequency <= max/2 and re-orthonormalize; keep
/// the result only if it spans the same subspace up to the angle tolerance.
fn smooth_cokernel(c: &Mat<f64>, freqs: &[usize], n: usize) -> (Mat<f64>, bool) {
    if c.ncols() == 0 || freqs.len() != n {
        return (c.clone(), false);
    }
    let kmax = freqs.iter().copied().max().unwrap_or(0);
    let low = Mat::from_fn(n, c.ncols(), |i, j| if 2 * freqs[i] <= kmax { c[(i, j)] } else { 0.0 });
    let q = orth(&low, 1e-12);
    if q.ncols() != c.ncols() {
        return (c.clone(), false);
    }
    // sine of the largest principal angle
    let resid = &q - c * (c.transpose() * &q);
    let mut worst: f64 = 0.0;
    for j in 0..q.ncols() {
        worst = worst.max(crate::linalg::norm(&column(&resid, j)));
    }
    if worst <= SMOOTHING_ANGLE_TOL {
        (q, true)
    } else {
        (c.clone(), false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..n).map(|j| f(j as f64 / n as f64)).collect()
    }

    #[test]
    fn ddt_examples() {
        let n = 16;
        let d = ddt_apply(&vec![2.0; n]).unwrap();
        assert!(d.iter().all(|x| x.abs() < 1e-12));
        for k in 1..4 {
            let kk = k as f64;
            let re = ddt_apply(&samples(n, |t| (2.0 * PI * kk * t).cos())).unwrap();
            let im = ddt_apply(&samples(n, |t| (2.0 * PI * kk * t).sin())).unwrap();
            // d/dt e^{2 pi i k t} = 2 pi i k e^{2 pi i k t}
            let ere = samples(n, |t| -2.0 * PI * kk * (2.0 * PI * kk * t).sin());
            let eim = samples(n, |t| 2.0 * PI * kk * (2.0 * PI * kk * t).cos());
            for j in 0..n {
                assert!((re[j] - ere[j]).abs() < 1e-10 && (im[j] - eim[j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn ddt_index_on_every_level() {
        let op = assemble_ddt(16, &[0, 1, 2]).unwrap();
        let reps = index_all_scales(&op).unwrap();
        for r in reps {
            assert_eq!((r.dim_ker, r.dim_coker, r.index), (1, 1, 0));
            assert!(r.trustworthy);
        }
    }

    #[test]
    fn identity_and_zero_reports() {
        let id = ScOperator::identity(6, vec![0, 1]);
        for r in index_all_scales(&id).unwrap() {
            assert_eq!((r.dim_ker, r.dim_coker, r.index), (0, 0, 0));
        }
        let z = ScOperator::zero(6, vec![0]);
        let r = fredholm_report(&z, 0).unwrap();
        assert_eq!((r.dim_ker, r.dim_coker, r.index), (6, 6, 0));
    }

    #[test]
    fn truncated_level_is_detected() {
        let op = assemble_ddt(12, &[0, 1]).unwrap();
        let m0 = op.matrices[0].clone();
        let rows: Vec<usize> = (1..m0.nrows).collect();
        let broken = ScOperator::from_levels(vec![0, 1], vec![m0.clone(), op.matrices[1].select_rows(&rows)], 1).unwrap();
        let err = index_all_scales(&broken).unwrap_err();
        assert!(format!("{err}").contains("level 1"));
    }

    #[test]
    fn regularizing_examples() {
        let n = 16;
        let op = assemble_ddt(n, &[0, 1, 2]).unwrap();
        let f = samples_to_fourier(&samples(n, |t| (2.0 * PI * t).cos()));
        let res = regularizing_check(&op, &f, 2).unwrap();
        assert!(res.passed());
        let e = fourier_to_samples(res.preimage.as_ref().unwrap(), n);
        let expect = samples(n, |t| (2.0 * PI * t).sin() / (2.0 * PI));
        for j in 0..n {
            assert!((e[j] - expect[j]).abs() < 1e-12);
        }
        let res = regularizing_check(&op, &vec![0.0; f.len()], 2).unwrap();
        assert!(res.passed());
        let c = samples_to_fourier(&vec![1.0; n]);
        let res = regularizing_check(&op, &c, 1).unwrap();
        assert!(matches!(res.verdict, Regularity::NoPreimage { .. }));
    }

    #[test]
    fn splitting_examples() {
        let op = assemble_ddt(16, &[0, 1]).unwrap();
        let sp = build_splittings(&op, 1).unwrap();
        assert_eq!(sp.kernel_basis.ncols(), 1);
        assert_eq!(sp.c_basis.ncols(), 1);
        assert!(sp.smoothed);
        // Pi_C is the t-average projector: only the mean coordinate survives
        let p = sp.pi_c();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((p.norm_l2() - 1.0).abs() < 1e-12);
        let perp = sp.pi_c_perp();
        let sum = &p + &perp;
        let id = Mat::<f64>::identity(p.nrows(), p.nrows());
        assert!((&sum - &id).norm_max() < 1e-14);
        assert!((&p * &p - &p).norm_max() < 1e-14);
        // Pi_C^perp T = T up to the threshold
        let a = op.matrix(1).unwrap().to_dense();
        assert!((&perp * &a - &a).norm_max() <= sp.report.sv_threshold * a.norm_l2() + 1e-12);
        // T restricted to X composed with its pseudo-inverse is the identity on range(Pi_C^perp)
        let x = sp.x_projector();
        let tx = &a * &x;
        let pinv = tx.svd().unwrap();
        let mut rec = Mat::<f64>::zeros(a.nrows(), a.nrows());
        for i in 0..a.nrows().min(a.ncols()) {
            let s = pinv.S()[i];
            if s > sp.report.sv_threshold {
                for r in 0..a.nrows() {
                    for c in 0..a.nrows() {
                        rec[(r, c)] += pinv.U()[(r, i)] * pinv.U()[(c, i)];
                    }
                }
            }
        }
        assert!((&rec - &perp).norm_max() < 1e-8);
        let inv = build_splittings(&ScOperator::identity(5, vec![0]), 0).unwrap();
        assert_eq!((inv.kernel_basis.ncols(), inv.c_basis.ncols()), (0, 0));
        assert!(inv.pi_c().norm_max() == 0.0);
        let z = build_splittings(&ScOperator::zero(5, vec![0]), 0).unwrap();
        assert!((z.pi_c() - Mat::<f64>::identity(5, 5)).norm_max() < 1e-14);
    }
}
