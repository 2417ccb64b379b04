//! Exponentially weighted Sobolev norms on the cylinder, empirical checks of
//! the level inclusions, the tail estimate behind compactness, and the
//! translation-action differentiability experiment on the circle.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{diff_s, diff_t, quadrature_weights, weight_profile, CylinderGrid, Field, MAX_DIFF_ORDER};

#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct WeightSequence {
    pub deltas: Vec<f64>,
    pub delta_cap: f64,
}

impl WeightSequence {
    pub fn new(deltas: Vec<f64>, delta_cap: f64) -> Result<Self> {
        if deltas.is_empty() {
            return Err(Error::InvalidParameter("weight sequence is empty".into()));
        }
        if deltas.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::InvalidParameter("weights must be positive".into()));
        }
        if deltas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("weights must be strictly increasing".into()));
        }
        if *deltas.last().unwrap() >= delta_cap {
            return Err(Error::InvalidParameter(format!(
                "largest weight {} must stay below the decay constant {delta_cap}",
                deltas.last().unwrap()
            )));
        }
        Ok(Self { deltas, delta_cap })
    }

    /// Weight of level m; levels past the end reuse the last weight.
    pub fn delta(&self, m: usize) -> f64 {
        self.deltas[m.min(self.deltas.len() - 1)]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScaleSpec {
    pub level: usize,
    pub base_order: usize,
    pub delta: f64,
}

impl ScaleSpec {
    pub fn order(&self) -> usize {
        self.base_order + self.level
    }

    pub fn norm(&self, u: &Field) -> Result<f64> {
        weighted_norm(u, self.order(), self.delta)
    }
}

/// All mixed derivatives d_s^a d_t^b v with a + b <= k, squared and integrated
/// with weights `w_s` over s (one weight per s-index).
fn sobolev_sq(v: &Field, k: usize, w_s: &[f64]) -> Result<f64> {
    let nl = v.node_len();
    let mut total = 0.0;
    let mut by_t = vec![v.clone()];
    for b in 1..=k {
        by_t.push(diff_t(&by_t[b - 1], 1)?);
    }
    for (b, vt) in by_t.iter().enumerate() {
        let mut cur = vt.clone();
        for a in 0..=(k - b) {
            if a > 0 {
                cur = diff_s(&cur, 1)?;
            }
            for (i, w) in w_s.iter().enumerate() {
                if *w != 0.0 {
                    total += w * cur.values[i * nl..(i + 1) * nl].iter().map(|z| z.norm_sqr()).sum::<f64>();
                }
            }
        }
    }
    Ok(total)
}

fn check_field(u: &Field, k: usize) -> Result<()> {
    if !u.is_finite() {
        return Err(Error::NonFinite("field".into()));
    }
    if k > MAX_DIFF_ORDER {
        return Err(Error::UnsupportedOrder { order: k, max: MAX_DIFF_ORDER });
    }
    Ok(())
}

/// ||e^{delta eta} u||_{H^k} with p = 2.
pub fn weighted_norm(u: &Field, k: usize, delta: f64) -> Result<f64> {
    weighted_norm_on(u, k, delta, |_| true)
}

/// Same norm with the integral restricted to the s-values accepted by `keep`.
pub fn weighted_norm_on(u: &Field, k: usize, delta: f64, keep: impl Fn(f64) -> bool) -> Result<f64> {
    check_field(u, k)?;
    if delta < 0.0 {
        return Err(Error::InvalidParameter(format!("weight must be non-negative, got {delta}")));
    }
    let v = u.mul_profile(&weight_profile(&u.grid, delta));
    let mut w = quadrature_weights(&u.grid);
    for (i, wi) in w.iter_mut().enumerate() {
        if !keep(u.grid.s(i)) {
            *wi = 0.0;
        }
    }
    Ok(sobolev_sq(&v, k, &w)?.sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct TailRow {
    pub k: usize,
    pub j: usize,
    pub delta_k: f64,
    pub delta_j: f64,
    pub r: f64,
    pub measured: f64,
    pub bound: f64,
}

/// Gaussian bumps (widths 0.5, 1, 2) on a 0.25 lattice of centres times
/// Fourier modes 0, 1, 2, all kept at least `margin` inside the truncation.
pub fn default_tail_probes(grid: &CylinderGrid, margin: f64) -> Vec<Field> {
    let mut out = Vec::new();
    let lim = grid.s_max - margin;
    let n = (lim / 0.25).floor() as i64;
    for width in [0.5, 1.0, 2.0] {
        for mode in 0..3 {
            for c in -n..=n {
                let c = c as f64 * 0.25;
                if c.abs() + 3.0 * width > lim {
                    continue;
                }
                out.push(Field::from_fn(*grid, 1, |s, t, _| {
                    Complex64::from_polar((-((s - c) / width).powi(2)).exp(), 2.0 * PI * mode as f64 * t)
                }));
            }
        }
    }
    out
}

/// Sup over probes of ||u||_{H^{m,delta_m}(|s| >= r)} / ||u||_{H^{k,delta_k}}.
pub fn embedding_tail_norm(
    probes: &[Field],
    k: usize,
    delta_k: f64,
    m: usize,
    delta_m: f64,
    r: f64,
) -> Result<TailRow> {
    if probes.is_empty() {
        return Err(Error::InvalidParameter("probe family is empty".into()));
    }
    if k <= m || delta_k <= delta_m {
        return Err(Error::InvalidParameter("need k > m and delta_k > delta_m".into()));
    }
    use rayon::prelude::*;
    let ratios: Vec<f64> = probes
        .par_iter()
        .map(|u| {
            let den = weighted_norm(u, k, delta_k)?;
            let num = weighted_norm_on(u, m, delta_m, |s| s.abs() >= r)?;
            Ok(if den > 0.0 { num / den } else { 0.0 })
        })
        .collect::<Result<_>>()?;
    Ok(TailRow {
        k,
        j: m,
        delta_k,
        delta_j: delta_m,
        r,
        measured: ratios.into_iter().fold(0.0, f64::max),
        bound: (-(delta_k - delta_m) * r).exp(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelPairRatio {
    pub k: usize,
    pub j: usize,
    pub max_ratio: f64,
    pub all_finite: bool,
}

/// For each pair of levels k > j the largest observed ||f||_j / ||f||_k.
pub fn norm_scale_check(levels: &[ScaleSpec], probes: &[Field]) -> Result<Vec<LevelPairRatio>> {
    if levels.len() < 2 {
        return Err(Error::InvalidParameter("need at least two levels".into()));
    }
    let norms: Vec<Vec<f64>> =
        probes.iter().map(|p| levels.iter().map(|l| l.norm(p)).collect::<Result<Vec<_>>>()).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for ki in 0..levels.len() {
        for ji in 0..ki {
            let mut max_ratio: f64 = 0.0;
            let mut all_finite = true;
            for n in &norms {
                if n[ki] == 0.0 {
                    continue;
                }
                let r = n[ji] / n[ki];
                all_finite &= r.is_finite();
                max_ratio = max_ratio.max(r);
            }
            out.push(LevelPairRatio { k: levels[ki].level, j: levels[ji].level, max_ratio, all_finite });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TranslationRow {
    pub h: f64,
    pub remainder: f64,
}

/// Periodic samples on [0, 1), shifted by a real amount through the Fourier series
/// (the Nyquist mode is treated as a cosine so real data stays real).
pub fn fourier_shift(f: &[f64], shift: f64) -> Vec<f64> {
    let n = f.len();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (j, z) in buf.iter_mut().enumerate() {
        if n % 2 == 0 && j == n / 2 {
            *z *= (2.0 * PI * (n / 2) as f64 * shift).cos();
        } else {
            *z *= Complex64::from_polar(1.0, 2.0 * PI * crate::grid::wavenumber(j, n) * shift);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|z| z.re / n as f64).collect()
}

/// Spectral derivative of periodic samples on [0, 1).
pub fn fourier_derivative(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (j, z) in buf.iter_mut().enumerate() {
        if n % 2 == 0 && j == n / 2 {
            *z = Complex64::new(0.0, 0.0);
        } else {
            *z *= Complex64::new(0.0, 2.0 * PI * crate::grid::wavenumber(j, n));
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|z| z.re / n as f64).collect()
}

/// ||tau(s0 + hS, f0 + hF) - tau(s0, f0) - h D tau(S, F)||_sup / h for each h,
/// where tau(s, f) = f(s + .) and D tau(S, F) = S f0'(s0 + .) + F(s0 + .).
pub fn translation_diff_check(f0: &[f64], s0: f64, big_s: f64, big_f: &[f64], h_list: &[f64]) -> Result<Vec<TranslationRow>> {
    if f0.len() != big_f.len() || f0.len() < 4 {
        return Err(Error::Shape("f0 and F must share a periodic grid of at least 4 points".into()));
    }
    if h_list.iter().any(|&h| !(h > 0.0)) {
        return Err(Error::InvalidParameter("step sizes must be positive".into()));
    }
    let base = fourier_shift(f0, s0);
    let df0 = fourier_shift(&fourier_derivative(f0), s0);
    let f_shift = fourier_shift(big_f, s0);
    Ok(h_list
        .iter()
        .map(|&h| {
            let moved: Vec<f64> = f0.iter().zip(big_f).map(|(a, b)| a + h * b).collect();
            let moved = fourier_shift(&moved, s0 + h * big_s);
            let rem = (0..f0.len())
                .map(|i| (moved[i] - base[i] - h * (big_s * df0[i] + f_shift[i])).abs())
                .fold(0.0, f64::max);
            TranslationRow { h, remainder: rem / h }
        })
        .collect())
}

/// The oscillating family F_n = cos(2 pi n t), n = ceil(1 / (2h)), with f0 = 0:
/// the remainder quotient stays near 2 instead of tending to 0.
pub fn translation_rough_family(n_samples: usize, s0: f64, big_s: f64, h_list: &[f64]) -> Result<Vec<TranslationRow>> {
    let f0 = vec![0.0; n_samples];
    let mut out = Vec::new();
    for &h in h_list {
        let n = (1.0 / (2.0 * h)).ceil();
        if 2.0 * n >= n_samples as f64 {
            return Err(Error::InvalidParameter(format!("frequency {n} not resolved by {n_samples} samples")));
        }
        let f: Vec<f64> = (0..n_samples).map(|i| (2.0 * PI * n * i as f64 / n_samples as f64).cos()).collect();
        out.extend(translation_diff_check(&f0, s0, big_s, &f, &[h])?);
    }
    Ok(out)
}

/// Least-squares slope of y against x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, weight_eta};
    use proptest::prelude::*;

    #[test]
    fn weighted_norm_examples() {
        let g = make_grid(20.0, 801, 8).unwrap();
        assert_eq!(weighted_norm(&Field::zeros(g, 1), 2, 1.0).unwrap(), 0.0);
        let u = Field::from_fn(g, 1, |s, _, _| Complex64::new((-2.0 * weight_eta(s)).exp(), 0.0));
        let n = weighted_norm(&u, 0, 1.0).unwrap();
        // oracle: composite Simpson on a much finer grid
        let m = 400_000;
        let h = 40.0 / m as f64;
        let mut acc = 0.0;
        for i in 0..=m {
            let s = -20.0 + i as f64 * h;
            let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * (-2.0 * weight_eta(s)).exp();
        }
        acc *= h / 3.0;
        assert!((n * n - acc).abs() / acc < 1e-6, "{} vs {acc}", n * n);
        let u = Field::from_fn(g, 1, |s, _, _| Complex64::new((-s * s).exp(), 0.0));
        let n = weighted_norm(&u, 0, 0.0).unwrap();
        assert!((n * n - (PI / 2.0).sqrt()).abs() < 1e-6);
        assert!(weighted_norm(&u, 1, -1.0).is_err());
    }

    #[test]
    fn h1_of_gaussian_mode() {
        // ||g e^{2 pi i t}||_{H^1}^2 = (1 + 4 pi^2) int g^2 + int g'^2
        let g = make_grid(12.0, 961, 8).unwrap();
        let u = Field::from_fn(g, 1, |s, t, _| Complex64::from_polar((-s * s).exp(), 2.0 * PI * t));
        let n = weighted_norm(&u, 1, 0.0).unwrap();
        let i0 = (PI / 2.0).sqrt();
        let i1 = (PI / 2.0).sqrt(); // int 4 s^2 e^{-2 s^2} = sqrt(pi/2)
        let expect = (1.0 + 4.0 * PI * PI) * i0 + i1;
        assert!((n * n - expect).abs() / expect < 1e-6);
    }

    #[test]
    fn tail_examples() {
        let g = make_grid(14.0, 561, 8).unwrap();
        let probes = default_tail_probes(&g, 2.0);
        let rows: Vec<TailRow> = [2.0, 4.0, 6.0].iter().map(|&r| embedding_tail_norm(&probes, 1, 1.5, 0, 0.5, r).unwrap()).collect();
        for row in &rows {
            assert!(row.measured <= row.bound * 1.05, "{row:?}");
        }
        let x: Vec<f64> = rows.iter().map(|r| r.r).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.measured.ln()).collect();
        assert!((fit_slope(&x, &y) + 1.0).abs() < 0.1);
        let inside = Field::from_fn(g, 1, |s, _, _| Complex64::new(crate::grid::cutoff_beta(2.0 * s + 1.0) * crate::grid::cutoff_beta(1.0 - 2.0 * s), 0.0));
        let row = embedding_tail_norm(&[inside], 1, 1.0, 0, 0.5, 2.0).unwrap();
        assert_eq!(row.measured, 0.0);
        assert!(embedding_tail_norm(&[], 1, 1.0, 0, 0.5, 2.0).is_err());
    }

    #[test]
    fn scale_check_examples() {
        let g = make_grid(6.0, 241, 16).unwrap();
        let levels = [
            ScaleSpec { level: 0, base_order: 0, delta: 0.1 },
            ScaleSpec { level: 1, base_order: 0, delta: 0.2 },
            ScaleSpec { level: 2, base_order: 0, delta: 0.3 },
        ];
        let bump = Field::from_fn(g, 1, |s, _, _| Complex64::new(if s.abs() < 1.0 { (1.0 - s * s).powi(6) } else { 0.0 }, 0.0));
        let rep = norm_scale_check(&levels, &[bump]).unwrap();
        assert_eq!(rep.len(), 3);
        assert!(rep.iter().all(|r| r.all_finite && r.max_ratio.is_finite()));
        // t-frequency n: ||.||_0 / ||.||_1 ~ 1 / (2 pi n)
        let l01 = [ScaleSpec { level: 0, base_order: 0, delta: 0.0 }, ScaleSpec { level: 1, base_order: 0, delta: 0.0 }];
        for n in [1.0, 2.0, 4.0] {
            let u = Field::from_fn(g, 1, |s, t, _| Complex64::from_polar((-4.0 * s * s).exp(), 2.0 * PI * n * t));
            let r = norm_scale_check(&l01, &[u]).unwrap()[0].max_ratio;
            let approx = 1.0 / (2.0 * PI * n);
            assert!(r < approx * 1.05 && r > approx * 0.6, "n={n}: {r} vs {approx}");
        }
        let same = [levels[0], levels[0]];
        let r = norm_scale_check(&same, &[Field::from_fn(g, 1, |s, _, _| Complex64::new((-s * s).exp(), 0.0))]).unwrap();
        assert!((r[0].max_ratio - 1.0).abs() < 1e-15);
    }

    #[test]
    fn translation_examples() {
        let n = 256;
        let hs = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
        let f0: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / n as f64).sin()).collect();
        let rows = translation_diff_check(&f0, 0.0, 1.0, &vec![0.0; n], &hs).unwrap();
        for w in rows.windows(2) {
            let ratio = w[0].remainder / w[1].remainder;
            assert!((ratio - 2.0).abs() < 0.1, "O(h) ratio {ratio}");
        }
        // oracle: remainder/h -> (2 pi)^2 h / 2 sup|sin|
        let r = rows.last().unwrap();
        assert!((r.remainder - 0.5 * (2.0 * PI).powi(2) * r.h).abs() / r.remainder < 0.05);
        let c = vec![3.0; n];
        let rows = translation_diff_check(&c, 0.3, 1.0, &vec![0.0; n], &hs).unwrap();
        assert!(rows.iter().all(|r| r.remainder < 1e-12));
        let rough = translation_rough_family(n, 0.0, 1.0, &hs).unwrap();
        assert!(rough.iter().all(|r| r.remainder > 1.0));
    }

    proptest! {
        #[test]
        fn zero_weight_matches_plain_norm(a in 0.3f64..2.0, c in -2.0f64..2.0) {
            let g = make_grid(10.0, 201, 8).unwrap();
            let u = Field::from_fn(g, 1, |s, t, _| Complex64::new((-a * (s - c).powi(2)).exp() * (1.0 + (2.0 * PI * t).cos()), 0.0));
            let w = weighted_norm(&u, 1, 0.0).unwrap();
            let qw = quadrature_weights(&g);
            let plain = sobolev_sq(&u, 1, &qw).unwrap().sqrt();
            prop_assert!((w - plain).abs() <= 1e-12 * plain);
        }

        #[test]
        fn tail_bound_holds(dk in 0.2f64..1.5, r in 2.0f64..5.0) {
            let g = make_grid(12.0, 241, 8).unwrap();
            let probes: Vec<Field> = default_tail_probes(&g, 2.0).into_iter().step_by(7).collect();
            let row = embedding_tail_norm(&probes, 1, 0.1 + dk, 0, 0.1, r).unwrap();
            prop_assert!(row.measured <= row.bound * 1.05);
        }
    }
}
