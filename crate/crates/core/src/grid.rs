//! Truncated cylinder grids, complex fields on them, and the elementary
//! operations (shifts, cutoffs, weights, derivatives) everything else uses.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Highest derivative order accepted by [`diff_s`] and [`diff_t`].
pub const MAX_DIFF_ORDER: usize = 4;

const FIELD_FORMAT_VERSION: u32 = 1;
const FIELD_MAGIC: &[u8; 4] = b"SCFD";

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CylinderGrid {
    pub s_max: f64,
    pub n_s: usize,
    pub n_t: usize,
    pub h_s: f64,
    pub h_t: f64,
}

pub fn make_grid(s_max: f64, n_s: usize, n_t: usize) -> Result<CylinderGrid> {
    CylinderGrid::new(s_max, n_s, n_t)
}

impl CylinderGrid {
    pub fn new(s_max: f64, n_s: usize, n_t: usize) -> Result<Self> {
        if !(s_max > 0.0) || !s_max.is_finite() {
            return Err(Error::InvalidGrid(format!("s_max must be positive, got {s_max}")));
        }
        if n_s < 3 || n_s % 2 == 0 {
            return Err(Error::InvalidGrid(format!("n_s must be odd and at least 3, got {n_s}")));
        }
        if n_t < 4 {
            return Err(Error::InvalidGrid(format!("n_t must be at least 4, got {n_t}")));
        }
        Ok(Self { s_max, n_s, n_t, h_s: 2.0 * s_max / (n_s - 1) as f64, h_t: 1.0 / n_t as f64 })
    }

    /// Grid with spacing `h` and `half` points on each side of s = 0.
    pub fn with_spacing(h: f64, half: usize, n_t: usize) -> Result<Self> {
        let n_s = 2 * half + 1;
        let mut g = Self::new(h * half as f64, n_s, n_t)?;
        g.h_s = h;
        Ok(g)
    }

    pub fn center(&self) -> usize {
        (self.n_s - 1) / 2
    }

    pub fn s(&self, i: usize) -> f64 {
        (i as f64 - self.center() as f64) * self.h_s
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.h_t
    }

    pub fn s_values(&self) -> Vec<f64> {
        (0..self.n_s).map(|i| self.s(i)).collect()
    }

    /// Same spacing, `k` extra points on each side (negative `k` shrinks).
    pub fn resized(&self, k: isize) -> Result<Self> {
        let half = self.center() as isize + k;
        if half < 1 {
            return Err(Error::InvalidGrid(format!("cannot shrink grid by {} points", -k)));
        }
        Self::with_spacing(self.h_s, half as usize, self.n_t)
    }

    /// Number of s-steps closest to `r`, and whether `r` is (numerically) a grid multiple.
    pub fn steps_for(&self, r: f64) -> (isize, bool) {
        let k = (r / self.h_s).round();
        (k as isize, (k * self.h_s - r).abs() <= 1e-9 * r.abs().max(1.0))
    }

    pub fn same_lattice(&self, other: &Self) -> bool {
        (self.h_s - other.h_s).abs() <= 1e-12 * self.h_s && self.n_t == other.n_t
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub grid: CylinderGrid,
    pub dim: usize,
    pub values: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: CylinderGrid, dim: usize) -> Self {
        Self { grid, dim, values: vec![Complex64::new(0.0, 0.0); grid.n_s * grid.n_t * dim] }
    }

    pub fn from_fn(grid: CylinderGrid, dim: usize, mut f: impl FnMut(f64, f64, usize) -> Complex64) -> Self {
        let mut out = Self::zeros(grid, dim);
        for i in 0..grid.n_s {
            for j in 0..grid.n_t {
                for c in 0..dim {
                    out.values[(i * grid.n_t + j) * dim + c] = f(grid.s(i), grid.t(j), c);
                }
            }
        }
        out
    }

    pub fn from_values(grid: CylinderGrid, dim: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n_s * grid.n_t * dim {
            return Err(Error::Shape(format!(
                "expected {} samples, got {}",
                grid.n_s * grid.n_t * dim,
                values.len()
            )));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("field values".into()));
        }
        Ok(Self { grid, dim, values })
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, c: usize) -> usize {
        (i * self.grid.n_t + j) * self.dim + c
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, c: usize) -> Complex64 {
        self.values[self.idx(i, j, c)]
    }

    pub fn point(&self, i: usize, j: usize) -> &[Complex64] {
        let k = self.idx(i, j, 0);
        &self.values[k..k + self.dim]
    }

    pub fn node_len(&self) -> usize {
        self.grid.n_t * self.dim
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn compatible(&self, other: &Field) -> bool {
        self.grid == other.grid && self.dim == other.dim
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, a: f64) -> Field {
        self.map(|z| z * a)
    }

    pub fn axpy(&self, a: f64, other: &Field) -> Field {
        self.zip(other, |x, y| x + y * a)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Field {
        Field { grid: self.grid, dim: self.dim, values: self.values.iter().map(|&z| f(z)).collect() }
    }

    fn zip(&self, other: &Field, f: impl Fn(Complex64, Complex64) -> Complex64) -> Field {
        assert!(self.compatible(other), "field grids differ");
        Field {
            grid: self.grid,
            dim: self.dim,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Multiply every sample at s-index `i` by `profile[i]`.
    pub fn mul_profile(&self, profile: &[f64]) -> Field {
        let nl = self.node_len();
        let mut out = self.clone();
        for (i, p) in profile.iter().enumerate() {
            for z in &mut out.values[i * nl..(i + 1) * nl] {
                *z *= *p;
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// max_t |u(s_i, t)| for every s-index.
    pub fn sup_t(&self) -> Vec<f64> {
        let nl = self.node_len();
        (0..self.grid.n_s)
            .map(|i| self.values[i * nl..(i + 1) * nl].iter().map(|z| z.norm()).fold(0.0, f64::max))
            .collect()
    }

    /// Real coordinates (re, im interleaved) in field order.
    pub fn to_real(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.values.len());
        for z in &self.values {
            v.push(z.re);
            v.push(z.im);
        }
        v
    }

    pub fn from_real(grid: CylinderGrid, dim: usize, v: &[f64]) -> Field {
        assert_eq!(v.len(), 2 * grid.n_s * grid.n_t * dim);
        Field { grid, dim, values: v.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect() }
    }

    /// Copy onto another grid with the same lattice, aligning s = 0; points
    /// not present in the source are zero.
    pub fn regrid(&self, target: CylinderGrid) -> Field {
        shift_steps_onto(self, target, 0)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let g = self.grid;
        let mut w = w;
        writeln!(
            w,
            "# scfloer-field v{FIELD_FORMAT_VERSION} s_max={:.17e} n_s={} n_t={} target_dim={}",
            g.s_max, g.n_s, g.n_t, self.dim
        )?;
        let mut cw = csv::Writer::from_writer(w);
        cw.write_record(["s", "t", "comp", "re", "im"])?;
        for i in 0..g.n_s {
            for j in 0..g.n_t {
                for c in 0..self.dim {
                    let z = self.at(i, j, c);
                    cw.write_record(&[
                        format!("{:.17e}", g.s(i)),
                        format!("{:.17e}", g.t(j)),
                        c.to_string(),
                        format!("{:.17e}", z.re),
                        format!("{:.17e}", z.im),
                    ])?;
                }
            }
        }
        cw.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Field> {
        let mut text = String::new();
        let mut r = r;
        r.read_to_string(&mut text)?;
        let (header, body) = text.split_once('\n').ok_or_else(|| Error::Format("empty field file".into()))?;
        let mut s_max = None;
        let mut n_s = None;
        let mut n_t = None;
        let mut dim = None;
        let mut version = None;
        for tok in header.trim_start_matches('#').split_whitespace() {
            if let Some(v) = tok.strip_prefix('v') {
                version = v.parse::<u32>().ok();
            } else if let Some((k, v)) = tok.split_once('=') {
                match k {
                    "s_max" => s_max = v.parse::<f64>().ok(),
                    "n_s" => n_s = v.parse::<usize>().ok(),
                    "n_t" => n_t = v.parse::<usize>().ok(),
                    "target_dim" => dim = v.parse::<usize>().ok(),
                    _ => {}
                }
            }
        }
        if version != Some(FIELD_FORMAT_VERSION) {
            return Err(Error::Format(format!("unsupported field format header: {header}")));
        }
        let (Some(s_max), Some(n_s), Some(n_t), Some(dim)) = (s_max, n_s, n_t, dim) else {
            return Err(Error::Format(format!("incomplete field header: {header}")));
        };
        let grid = CylinderGrid::new(s_max, n_s, n_t)?;
        let mut field = Field::zeros(grid, dim);
        let mut rd = csv::Reader::from_reader(body.as_bytes());
        let mut count = 0;
        for (k, rec) in rd.records().enumerate() {
            let rec = rec?;
            let get = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|x| x.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Format(format!("bad value in row {k}")))
            };
            if k >= field.values.len() {
                return Err(Error::Format("too many rows".into()));
            }
            field.values[k] = Complex64::new(get(3)?, get(4)?);
            count += 1;
        }
        if count != field.values.len() {
            return Err(Error::Format(format!("expected {} rows, found {count}", field.values.len())));
        }
        Field::from_values(grid, dim, field.values)
    }

    /// Little-endian binary: magic, version, s_max, n_s, n_t, dim, then (re, im) pairs.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(FIELD_MAGIC)?;
        w.write_all(&FIELD_FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&self.grid.s_max.to_le_bytes())?;
        for n in [self.grid.n_s, self.grid.n_t, self.dim] {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        for z in &self.values {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Field> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != FIELD_MAGIC {
            return Err(Error::Format("not a field file".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != FIELD_FORMAT_VERSION {
            return Err(Error::Format("unsupported field format version".into()));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let s_max = f64::from_le_bytes(b8);
        let mut dims = [0usize; 3];
        for d in &mut dims {
            r.read_exact(&mut b8)?;
            *d = u64::from_le_bytes(b8) as usize;
        }
        let grid = CylinderGrid::new(s_max, dims[0], dims[1])?;
        let n = dims[0] * dims[1] * dims[2];
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            r.read_exact(&mut b8)?;
            values.push(Complex64::new(re, f64::from_le_bytes(b8)));
        }
        Field::from_values(grid, dims[2], values)
    }
}

fn smooth_g(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// Smooth step: 0 on (-inf, -1], 1 on [1, inf), symmetric about (0, 1/2).
pub fn cutoff_beta(s: f64) -> f64 {
    if s <= -1.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let a = smooth_g(s + 1.0);
    let b = smooth_g(1.0 - s);
    a / (a + b)
}

pub fn cutoff_beta_prime(s: f64) -> f64 {
    if s <= -1.0 || s >= 1.0 {
        return 0.0;
    }
    let (x, y) = (s + 1.0, 1.0 - s);
    let (a, b) = (smooth_g(x), smooth_g(y));
    let (da, db) = (a / (x * x), -b / (y * y));
    (da * (a + b) - a * (da + db)) / ((a + b) * (a + b))
}

// Mollifier on [-1/2, 1/2] used to round off |s|.
fn bump(y: f64) -> f64 {
    let u = 1.0 - 4.0 * y * y;
    if u <= 0.0 {
        0.0
    } else {
        (-1.0 / u).exp()
    }
}

struct Mollifier {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    norm: f64,
}

fn mollifier() -> &'static Mollifier {
    static M: OnceLock<Mollifier> = OnceLock::new();
    M.get_or_init(|| {
        let (nodes, weights) = gauss_legendre(64);
        let mut m = Mollifier { nodes, weights, norm: 1.0 };
        m.norm = m.integrate(-0.5, 0.5, bump);
        m
    })
}

impl Mollifier {
    fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        h * self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(c + h * x)).sum::<f64>()
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// |s| convolved with a smooth bump of radius 1/2.
pub fn weight_eta(s: f64) -> f64 {
    if s.abs() >= 0.5 {
        return s.abs();
    }
    // eta(s) = s (2F(s) - 1) - 2 G(s), F = cdf of the bump, G its first moment up to s
    let m = mollifier();
    let f = m.integrate(-0.5, s, bump) / m.norm;
    let g = m.integrate(-0.5, s, |y| y * bump(y)) / m.norm;
    s * (2.0 * f - 1.0) - 2.0 * g
}

pub fn weight_eta_prime(s: f64) -> f64 {
    if s.abs() >= 0.5 {
        return s.signum();
    }
    let m = mollifier();
    2.0 * m.integrate(-0.5, s, bump) / m.norm - 1.0
}

pub fn eta_profile(grid: &CylinderGrid) -> Vec<f64> {
    (0..grid.n_s).map(|i| weight_eta(grid.s(i))).collect()
}

/// e^{delta * eta(s_i)} for every s-index.
pub fn weight_profile(grid: &CylinderGrid, delta: f64) -> Vec<f64> {
    eta_profile(grid).into_iter().map(|e| (delta * e).exp()).collect()
}

const D4_INTERIOR: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
const D4_ROW0: [f64; 5] = [-25.0 / 12.0, 48.0 / 12.0, -36.0 / 12.0, 16.0 / 12.0, -3.0 / 12.0];
const D4_ROW1: [f64; 5] = [-3.0 / 12.0, -10.0 / 12.0, 18.0 / 12.0, -6.0 / 12.0, 1.0 / 12.0];

/// Coefficients (column offsets relative to row start, values / h) of the
/// closed fourth-order first derivative at row `i` of an `n`-point line.
pub fn d4_closed_row(i: usize, n: usize) -> (usize, [f64; 5]) {
    if i == 0 {
        (0, D4_ROW0)
    } else if i == 1 {
        (0, D4_ROW1)
    } else if i == n - 1 {
        let mut c = D4_ROW0;
        c.reverse();
        (n - 5, c.map(|x| -x))
    } else if i == n - 2 {
        let mut c = D4_ROW1;
        c.reverse();
        (n - 5, c.map(|x| -x))
    } else {
        (i - 2, D4_INTERIOR)
    }
}

fn diff_s_once(u: &Field) -> Field {
    let g = u.grid;
    let nl = u.node_len();
    let mut out = Field::zeros(g, u.dim);
    if g.n_s < 5 {
        // too short for the closed stencil: second-order one-sided/central
        for i in 0..g.n_s {
            let (a, b, w) = if i == 0 {
                (0, 1, 1.0)
            } else if i == g.n_s - 1 {
                (i - 1, i, 1.0)
            } else {
                (i - 1, i + 1, 0.5)
            };
            for k in 0..nl {
                out.values[i * nl + k] = (u.values[b * nl + k] - u.values[a * nl + k]) * (w / g.h_s);
            }
        }
        return out;
    }
    for i in 0..g.n_s {
        let (start, c) = d4_closed_row(i, g.n_s);
        for k in 0..nl {
            let mut acc = Complex64::new(0.0, 0.0);
            for (o, cv) in c.iter().enumerate() {
                acc += u.values[(start + o) * nl + k] * *cv;
            }
            out.values[i * nl + k] = acc / g.h_s;
        }
    }
    out
}

/// s-derivative of the given order: fourth-order central differences with
/// one-sided closures at the truncation edges.
pub fn diff_s(u: &Field, order: usize) -> Result<Field> {
    check_order(order)?;
    let mut v = diff_s_once(u);
    for _ in 1..order {
        v = diff_s_once(&v);
    }
    Ok(v)
}

fn check_order(order: usize) -> Result<()> {
    if order == 0 || order > MAX_DIFF_ORDER {
        return Err(Error::UnsupportedOrder { order, max: MAX_DIFF_ORDER });
    }
    Ok(())
}

/// Fourier wavenumber of DFT index `j`; the Nyquist index maps to +n/2.
pub fn wavenumber(j: usize, n: usize) -> f64 {
    if j <= n / 2 {
        j as f64
    } else {
        j as f64 - n as f64
    }
}

/// Dense complex matrix (row-major n x n) of the spectral t-derivative with
/// multiplier (2 pi i k)^order.
pub fn dt_matrix(n: usize, order: usize) -> Vec<Complex64> {
    let mut m = vec![Complex64::new(0.0, 0.0); n * n];
    for k in 0..n {
        let kk = wavenumber(k, n);
        let mult = (Complex64::new(0.0, 2.0 * PI * kk)).powi(order as i32);
        for j in 0..n {
            for l in 0..n {
                let phase = 2.0 * PI * kk * (j as f64 - l as f64) / n as f64;
                m[j * n + l] += mult * Complex64::from_polar(1.0 / n as f64, phase);
            }
        }
    }
    m
}

fn dt_cached(n: usize, order: usize) -> Vec<Complex64> {
    use std::collections::HashMap;
    use std::sync::Mutex;
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Vec<Complex64>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut c = cache.lock().unwrap();
    c.entry((n, order)).or_insert_with(|| dt_matrix(n, order)).clone()
}

/// Spectral t-derivative (periodic) of the given order.
pub fn diff_t(u: &Field, order: usize) -> Result<Field> {
    check_order(order)?;
    Ok(apply_dt(u, &dt_cached(u.grid.n_t, order)))
}

pub(crate) fn apply_dt(u: &Field, m: &[Complex64]) -> Field {
    let (nt, d) = (u.grid.n_t, u.dim);
    let mut out = Field::zeros(u.grid, d);
    for i in 0..u.grid.n_s {
        for j in 0..nt {
            for l in 0..nt {
                let c = m[j * nt + l];
                if c.norm_sqr() == 0.0 {
                    continue;
                }
                for k in 0..d {
                    let v = u.at(i, l, k);
                    out.values[(i * nt + j) * d + k] += c * v;
                }
            }
        }
    }
    out
}

/// Shift by an integer number of s-steps, (tau u)(s_i) = u(s_{i+k}), zero beyond the grid.
pub fn shift_steps(u: &Field, k: isize) -> Field {
    shift_steps_onto(u, u.grid, k)
}

/// out(sigma) = u(sigma + k h) on `target` (same lattice), zero outside `u`'s grid.
pub fn shift_steps_onto(u: &Field, target: CylinderGrid, k: isize) -> Field {
    debug_assert!(u.grid.same_lattice(&target));
    let nl = u.node_len();
    let mut out = Field::zeros(target, u.dim);
    let off = u.grid.center() as isize - target.center() as isize + k;
    for j in 0..target.n_s {
        let i = j as isize + off;
        if i >= 0 && (i as usize) < u.grid.n_s {
            let i = i as usize;
            out.values[j * nl..(j + 1) * nl].copy_from_slice(&u.values[i * nl..(i + 1) * nl]);
        }
    }
    out
}

/// Cubic Lagrange sample of u at real s-position `x` (in index units), zero outside.
fn sample_cubic(u: &Field, x: f64, k: usize) -> Complex64 {
    let n = u.grid.n_s as isize;
    let nl = u.node_len();
    let i0 = x.floor() as isize;
    let f = x - i0 as f64;
    let w = [
        -f * (f - 1.0) * (f - 2.0) / 6.0,
        (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
        -(f + 1.0) * f * (f - 2.0) / 2.0,
        (f + 1.0) * f * (f - 1.0) / 6.0,
    ];
    let mut acc = Complex64::new(0.0, 0.0);
    for (o, wo) in w.iter().enumerate() {
        let i = i0 - 1 + o as isize;
        if i >= 0 && i < n {
            acc += u.values[i as usize * nl + k] * *wo;
        }
    }
    acc
}

/// (tau_R u)(s, t) = u(R + s, t) sampled on `target` (same lattice); grid
/// multiples are exact, other shifts use cubic interpolation in s.
pub fn shift_onto(u: &Field, target: CylinderGrid, r: f64) -> Field {
    let (k, exact) = u.grid.steps_for(r);
    if exact {
        return shift_steps_onto(u, target, k);
    }
    let nl = u.node_len();
    let mut out = Field::zeros(target, u.dim);
    let c = u.grid.center() as f64;
    for j in 0..target.n_s {
        let x = (target.s(j) + r) / u.grid.h_s + c;
        for kk in 0..nl {
            out.values[j * nl + kk] = sample_cubic(u, x, kk);
        }
    }
    out
}

pub fn shift_field(u: &Field, r: f64) -> Field {
    shift_onto(u, u.grid, r)
}

/// Trapezoid weights in s times h_t (so sum w |u|^2 approximates the L^2 norm squared).
pub fn quadrature_weights(grid: &CylinderGrid) -> Vec<f64> {
    let mut w = vec![grid.h_s * grid.h_t; grid.n_s];
    w[0] *= 0.5;
    w[grid.n_s - 1] *= 0.5;
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn make_grid_examples() {
        let g = make_grid(10.0, 401, 32).unwrap();
        assert!((g.h_s - 0.05).abs() < 1e-15);
        assert!((g.h_t - 1.0 / 32.0).abs() < 1e-15);
        assert!(make_grid(1.0, 3, 4).is_ok());
        assert!(make_grid(10.0, 400, 32).is_err());
        assert!(make_grid(10.0, 401, 3).is_err());
        assert!(make_grid(0.0, 401, 32).is_err());
        assert_eq!(g.s(g.center()), 0.0);
    }

    #[test]
    fn shift_examples() {
        let g = make_grid(10.0, 401, 8).unwrap();
        let u = Field::from_fn(g, 1, |_, _, _| c(2.5));
        assert_eq!(shift_field(&u, 0.0), u);
        let bump = Field::from_fn(g, 1, |s, _, _| c(if s.abs() <= 1.0 { 1.0 } else { 0.0 }));
        assert_eq!(shift_field(&bump, 20.0).max_abs(), 0.0);
        let gauss = Field::from_fn(g, 1, |s, _, _| c((-s * s).exp()));
        let sh = shift_field(&gauss, 1.0);
        let expect = Field::from_fn(g, 1, |s, _, _| c((-(s + 1.0) * (s + 1.0)).exp()));
        assert!(sh.sub(&expect).max_abs() < 1e-14);
        let sh = shift_field(&gauss, 0.37);
        let expect = Field::from_fn(g, 1, |s, _, _| c((-(s + 0.37) * (s + 0.37)).exp()));
        assert!(sh.sub(&expect).max_abs() < 1e-4);
    }

    #[test]
    fn beta_values() {
        assert_eq!(cutoff_beta(-1.0), 0.0);
        assert_eq!(cutoff_beta(1.0), 1.0);
        assert!((cutoff_beta(0.0) - 0.5).abs() < 1e-15);
        let h = 1e-6;
        for s in [-0.9, -0.3, 0.0, 0.4, 0.8] {
            let fd = (cutoff_beta(s + h) - cutoff_beta(s - h)) / (2.0 * h);
            assert!((fd - cutoff_beta_prime(s)).abs() < 1e-7);
        }
    }

    #[test]
    fn eta_values() {
        assert_eq!(weight_eta(2.0), 2.0);
        assert_eq!(weight_eta(-3.0), 3.0);
        let e0 = weight_eta(0.0);
        assert!(e0 > 0.0 && e0 < 0.5);
        // oracle: direct trapezoid of |s - y| rho(y) on a very fine grid
        for s in [0.0, 0.1, -0.2, 0.45] {
            let n = 200_000;
            let (mut num, mut den) = (0.0, 0.0);
            for k in 0..=n {
                let y = -0.5 + k as f64 / n as f64;
                num += (s - y).abs() * bump(y);
                den += bump(y);
            }
            assert!((num / den - weight_eta(s)).abs() < 1e-8, "eta({s})");
        }
        for s in [-0.4, 0.0, 0.2, 0.49] {
            let h = 1e-6;
            let fd = (weight_eta(s + h) - weight_eta(s - h)) / (2.0 * h);
            assert!((fd - weight_eta_prime(s)).abs() < 1e-7);
        }
    }

    #[test]
    fn derivative_examples() {
        let g = make_grid(5.0, 201, 16).unwrap();
        let u = Field::from_fn(g, 1, |_, _, _| c(3.0));
        assert!(diff_s(&u, 1).unwrap().max_abs() < 1e-12);
        assert!(diff_t(&u, 1).unwrap().max_abs() < 1e-12);
        let u = Field::from_fn(g, 1, |_, t, _| c((2.0 * PI * t).sin()));
        let d = diff_t(&u, 1).unwrap();
        let e = Field::from_fn(g, 1, |_, t, _| c(2.0 * PI * (2.0 * PI * t).cos()));
        assert!(d.sub(&e).max_abs() < 1e-12);
        let u = Field::from_fn(g, 1, |s, _, _| c(s * s));
        let d2 = diff_s(&u, 2).unwrap();
        for i in 4..g.n_s - 4 {
            assert!((d2.at(i, 0, 0).re - 2.0).abs() < 1e-9);
        }
        assert!(diff_s(&u, 0).is_err());
        assert!(diff_s(&u, MAX_DIFF_ORDER + 1).is_err());
    }

    #[test]
    fn serialization_round_trip() {
        let g = make_grid(2.0, 9, 4).unwrap();
        let u = Field::from_fn(g, 2, |s, t, k| Complex64::new(s + k as f64, t * s));
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        assert_eq!(Field::read_csv(&buf[..]).unwrap(), u);
        let mut buf = Vec::new();
        u.write_binary(&mut buf).unwrap();
        assert_eq!(Field::read_binary(&buf[..]).unwrap(), u);
        assert!(Field::read_binary(&b"XXXX"[..]).is_err());
    }

    proptest! {
        #[test]
        fn beta_symmetric_and_in_range(s in -3.0f64..3.0) {
            let b = cutoff_beta(s);
            prop_assert!((0.0..=1.0).contains(&b));
            prop_assert!((b + cutoff_beta(-s) - 1.0).abs() < 1e-14);
            let e = weight_eta(s);
            if s.abs() >= 1.0 { prop_assert_eq!(e, s.abs()); } else { prop_assert!(e > 0.0 && e < 1.0); }
        }

        #[test]
        fn shift_round_trip_on_interior(k in -20isize..20, seed in 0u64..100) {
            let g = make_grid(10.0, 201, 8).unwrap();
            let u = Field::from_fn(g, 1, |s, t, _| {
                Complex64::new((-(s - 0.01 * seed as f64).powi(2)).exp() * (2.0 * PI * t).cos(), s.sin() * (-s * s).exp())
            });
            let back = shift_steps(&shift_steps(&u, k), -k);
            let m = k.unsigned_abs();
            for i in m..g.n_s - m {
                for j in 0..g.n_t {
                    prop_assert_eq!(back.at(i, j, 0), u.at(i, j, 0));
                }
            }
        }

        #[test]
        fn diff_t_commutes_with_shift(r in -3.0f64..3.0) {
            let g = make_grid(8.0, 161, 8).unwrap();
            let u = Field::from_fn(g, 1, |s, t, _| Complex64::new((-s * s).exp() * (2.0 * PI * t).sin(), (-(s - 1.0).powi(2)).exp()));
            let a = diff_t(&shift_field(&u, r), 1).unwrap();
            let b = shift_field(&diff_t(&u, 1).unwrap(), r);
            prop_assert!(a.sub(&b).max_abs() < 1e-10);
        }
    }
}
