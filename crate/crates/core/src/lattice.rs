//! Lattice sites, finitely supported fields on Z^d and their convolution.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// A point of Z^d.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site(pub Vec<i32>);

impl Site {
    pub fn origin(dim: usize) -> Self {
        Site(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i32] {
        &self.0
    }

    pub fn is_origin(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn add(&self, other: &Site) -> Site {
        Site(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Site) -> Site {
        Site(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn neg(&self) -> Site {
        Site(self.0.iter().map(|a| -a).collect())
    }

    pub fn norm_inf(&self) -> i32 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// Squared Euclidean norm.
    pub fn norm2(&self) -> i64 {
        self.0.iter().map(|&c| (c as i64) * (c as i64)).sum()
    }

    pub fn dot(&self, k: &[f64]) -> f64 {
        self.0.iter().zip(k).map(|(&c, &kk)| c as f64 * kk).sum()
    }

    /// Orbit representative under coordinate sign flips and permutations.
    pub fn canonical(&self) -> Site {
        let mut c: Vec<i32> = self.0.iter().map(|a| a.abs()).collect();
        c.sort_unstable();
        Site(c)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Every site of the box `[-radius, radius]^dim`, in lexicographic order.
pub fn box_sites(dim: usize, radius: i32) -> Vec<Site> {
    let side = (2 * radius + 1) as usize;
    let total = side.pow(dim as u32);
    let mut out = Vec::with_capacity(total);
    let mut cur = vec![-radius; dim];
    for _ in 0..total {
        out.push(Site(cur.clone()));
        for c in (0..dim).rev() {
            if cur[c] < radius {
                cur[c] += 1;
                break;
            }
            cur[c] = -radius;
        }
    }
    out
}

/// Dense indexing of the box `[-radius, radius]^dim` used by the enumerators.
#[derive(Clone, Debug)]
pub struct Grid {
    dim: usize,
    radius: i32,
    side: usize,
    strides: Vec<usize>,
}

impl Grid {
    pub fn new(dim: usize, radius: i32) -> Self {
        let side = (2 * radius + 1) as usize;
        let mut strides = vec![1usize; dim];
        for c in (0..dim.saturating_sub(1)).rev() {
            strides[c] = strides[c + 1] * side;
        }
        Grid {
            dim,
            radius,
            side,
            strides,
        }
    }

    /// Number of cells, or `None` when it does not fit in usize.
    pub fn cells(dim: usize, radius: i32) -> u128 {
        ((2 * radius as u128) + 1).pow(dim as u32)
    }

    pub fn len(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn origin(&self) -> usize {
        self.strides.iter().map(|s| s * self.radius as usize).sum()
    }

    pub fn index(&self, site: &Site) -> usize {
        site.0
            .iter()
            .zip(&self.strides)
            .map(|(&c, &s)| (c + self.radius) as usize * s)
            .sum()
    }

    /// Index shift produced by a displacement.
    pub fn offset(&self, step: &Site) -> isize {
        step.0
            .iter()
            .zip(&self.strides)
            .map(|(&c, &s)| c as isize * s as isize)
            .sum()
    }

    pub fn site(&self, mut idx: usize) -> Site {
        let mut c = vec![0i32; self.dim];
        for (axis, &s) in self.strides.iter().enumerate() {
            c[axis] = (idx / s) as i32 - self.radius;
            idx %= s;
        }
        Site(c)
    }
}

/// Numeric mode of a field.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Float,
}

#[derive(Clone, Debug, PartialEq)]
enum Values {
    Exact(BTreeMap<Site, BigRational>),
    Float(BTreeMap<Site, f64>),
}

/// A finitely supported function on Z^d, either exact rational or f64.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeField {
    dim: usize,
    values: Values,
}

impl LatticeField {
    pub fn zero(dim: usize, mode: Mode) -> Self {
        let values = match mode {
            Mode::Exact => Values::Exact(BTreeMap::new()),
            Mode::Float => Values::Float(BTreeMap::new()),
        };
        LatticeField { dim, values }
    }

    /// Kronecker delta at the origin.
    pub fn delta(dim: usize, mode: Mode) -> Self {
        let mut f = LatticeField::zero(dim, mode);
        match &mut f.values {
            Values::Exact(m) => {
                m.insert(Site::origin(dim), BigRational::from_integer(1.into()));
            }
            Values::Float(m) => {
                m.insert(Site::origin(dim), 1.0);
            }
        }
        f
    }

    /// Builds an exact field; zero entries are dropped.
    pub fn from_exact(dim: usize, entries: BTreeMap<Site, BigRational>) -> Result<Self> {
        for s in entries.keys() {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch(dim, s.dim()));
            }
        }
        let entries = entries.into_iter().filter(|(_, v)| !v.is_zero()).collect();
        Ok(LatticeField {
            dim,
            values: Values::Exact(entries),
        })
    }

    pub fn from_float(dim: usize, entries: BTreeMap<Site, f64>) -> Result<Self> {
        for s in entries.keys() {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch(dim, s.dim()));
            }
        }
        let entries = entries.into_iter().filter(|(_, v)| *v != 0.0).collect();
        Ok(LatticeField {
            dim,
            values: Values::Float(entries),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> Mode {
        match self.values {
            Values::Exact(_) => Mode::Exact,
            Values::Float(_) => Mode::Float,
        }
    }

    pub fn len(&self) -> usize {
        match &self.values {
            Values::Exact(m) => m.len(),
            Values::Float(m) => m.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn support(&self) -> Vec<Site> {
        match &self.values {
            Values::Exact(m) => m.keys().cloned().collect(),
            Values::Float(m) => m.keys().cloned().collect(),
        }
    }

    pub fn exact_entries(&self) -> Option<&BTreeMap<Site, BigRational>> {
        match &self.values {
            Values::Exact(m) => Some(m),
            Values::Float(_) => None,
        }
    }

    pub fn float_entries(&self) -> Option<&BTreeMap<Site, f64>> {
        match &self.values {
            Values::Float(m) => Some(m),
            Values::Exact(_) => None,
        }
    }

    /// Exact value at a site (zero off the support). `None` in float mode.
    pub fn get_exact(&self, site: &Site) -> Option<BigRational> {
        match &self.values {
            Values::Exact(m) => Some(m.get(site).cloned().unwrap_or_else(BigRational::zero)),
            Values::Float(_) => None,
        }
    }

    /// Value at a site as f64, in either mode.
    pub fn get_f64(&self, site: &Site) -> f64 {
        match &self.values {
            Values::Exact(m) => m.get(site).map(rational_to_f64).unwrap_or(0.0),
            Values::Float(m) => m.get(site).copied().unwrap_or(0.0),
        }
    }

    /// Iterates `(site, value as f64)` in site order.
    pub fn iter_f64(&self) -> Box<dyn Iterator<Item = (&Site, f64)> + '_> {
        match &self.values {
            Values::Exact(m) => Box::new(m.iter().map(|(s, v)| (s, rational_to_f64(v)))),
            Values::Float(m) => Box::new(m.iter().map(|(s, v)| (s, *v))),
        }
    }

    /// Exact total mass; `None` in float mode.
    pub fn total_exact(&self) -> Option<BigRational> {
        self.exact_entries()
            .map(|m| m.values().fold(BigRational::zero(), |acc, v| acc + v))
    }

    pub fn total_f64(&self) -> f64 {
        self.iter_f64().map(|(_, v)| v).sum()
    }

    /// `sum_x |x|^2 f(x)`, exact.
    pub fn second_moment_exact(&self) -> Option<BigRational> {
        self.exact_entries().map(|m| {
            m.iter().fold(BigRational::zero(), |acc, (s, v)| {
                acc + v * BigRational::from_integer(BigInt::from(s.norm2()))
            })
        })
    }

    pub fn second_moment_f64(&self) -> f64 {
        self.iter_f64().map(|(s, v)| s.norm2() as f64 * v).sum()
    }

    /// Real part of the Fourier transform `sum_x f(x) e^{ik.x}`.
    pub fn fourier_re(&self, k: &[f64]) -> f64 {
        self.iter_f64().map(|(s, v)| v * s.dot(k).cos()).sum()
    }

    /// Full complex Fourier transform `(re, im)`.
    pub fn fourier(&self, k: &[f64]) -> (f64, f64) {
        self.iter_f64().fold((0.0, 0.0), |(re, im), (s, v)| {
            let a = s.dot(k);
            (re + v * a.cos(), im + v * a.sin())
        })
    }

    pub fn to_float(&self) -> LatticeField {
        match &self.values {
            Values::Float(_) => self.clone(),
            Values::Exact(m) => LatticeField {
                dim: self.dim,
                values: Values::Float(m.iter().map(|(s, v)| (s.clone(), rational_to_f64(v))).collect()),
            },
        }
    }

    /// `self + factor * other`, exact mode only.
    pub fn add_scaled_exact(&self, other: &LatticeField, factor: &BigRational) -> Result<LatticeField> {
        self.check_compatible(other)?;
        let (a, b) = match (&self.values, &other.values) {
            (Values::Exact(a), Values::Exact(b)) => (a, b),
            _ => return Err(Error::ModeMismatch),
        };
        let mut out = a.clone();
        for (s, v) in b {
            let e = out.entry(s.clone()).or_insert_with(BigRational::zero);
            *e += v * factor;
        }
        LatticeField::from_exact(self.dim, out)
    }

    /// Max over the union of supports of `|self - other|`, exact mode.
    pub fn max_abs_diff_exact(&self, other: &LatticeField) -> Result<BigRational> {
        let diff = self.add_scaled_exact(other, &BigRational::from_integer((-1).into()))?;
        Ok(diff
            .exact_entries()
            .into_iter()
            .flat_map(|m| m.values())
            .map(|v| v.abs())
            .max()
            .unwrap_or_else(BigRational::zero))
    }

    fn check_compatible(&self, other: &LatticeField) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        if self.mode() != other.mode() {
            return Err(Error::ModeMismatch);
        }
        Ok(())
    }

    /// Per-axis `(min, max)` of the support, `None` for an empty field.
    pub fn bounds(&self) -> Option<Vec<(i32, i32)>> {
        let support = self.support();
        let first = support.first()?;
        let mut b: Vec<(i32, i32)> = first.0.iter().map(|&c| (c, c)).collect();
        for s in &support[1..] {
            for (axis, &c) in s.0.iter().enumerate() {
                b[axis].0 = b[axis].0.min(c);
                b[axis].1 = b[axis].1.max(c);
            }
        }
        Some(b)
    }

    /// `(f * g)(x) = sum_y f(y) g(x - y)`.
    ///
    /// Exact fields are summed directly. Float fields go through an FFT on
    /// a box large enough that the cyclic convolution has no wraparound, and
    /// the output support is the exact Minkowski sum of the input supports.
    pub fn convolve(&self, other: &LatticeField) -> Result<LatticeField> {
        self.check_compatible(other)?;
        match (&self.values, &other.values) {
            (Values::Exact(a), Values::Exact(b)) => {
                let mut out: BTreeMap<Site, BigRational> = BTreeMap::new();
                for (sa, va) in a {
                    for (sb, vb) in b {
                        let e = out.entry(sa.add(sb)).or_insert_with(BigRational::zero);
                        *e += va * vb;
                    }
                }
                LatticeField::from_exact(self.dim, out)
            }
            (Values::Float(_), Values::Float(_)) => fft_convolve(self, other),
            _ => Err(Error::ModeMismatch),
        }
    }

    /// Direct O(|f||g|) float convolution; reference path for the FFT.
    pub fn convolve_direct_f64(&self, other: &LatticeField) -> Result<LatticeField> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        let mut out: BTreeMap<Site, f64> = BTreeMap::new();
        for (sa, va) in self.iter_f64() {
            for (sb, vb) in other.iter_f64() {
                *out.entry(sa.add(sb)).or_insert(0.0) += va * vb;
            }
        }
        LatticeField::from_float(self.dim, out)
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// `num/den` rendering used by every exact report.
pub fn format_rational(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Cells allowed in one FFT box before convolution refuses.
pub const FFT_CELL_CAP: u128 = 1 << 26;

fn fft_convolve(f: &LatticeField, g: &LatticeField) -> Result<LatticeField> {
    let dim = f.dim;
    let (bf, bg) = match (f.bounds(), g.bounds()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Ok(LatticeField::zero(dim, Mode::Float)),
    };
    let lo: Vec<i32> = bf.iter().zip(&bg).map(|(a, b)| a.0 + b.0).collect();
    let shape: Vec<usize> = bf
        .iter()
        .zip(&bg)
        .map(|(a, b)| ((a.1 - a.0) + (b.1 - b.0) + 1) as usize)
        .collect();
    let cells: u128 = shape.iter().map(|&s| s as u128).product();
    if cells > FFT_CELL_CAP {
        return Err(Error::MemoryBudget {
            n: 0,
            cells,
            cap: FFT_CELL_CAP,
        });
    }
    let cells = cells as usize;
    let mut strides = vec![1usize; dim];
    for c in (0..dim.saturating_sub(1)).rev() {
        strides[c] = strides[c + 1] * shape[c + 1];
    }
    let place = |field: &LatticeField, origin: &[i32], indicator: bool| {
        let mut buf = vec![Complex::new(0.0, 0.0); cells];
        for (s, v) in field.iter_f64() {
            let idx: usize = s
                .0
                .iter()
                .zip(origin)
                .zip(&strides)
                .map(|((&c, &o), &st)| (c - o) as usize * st)
                .sum();
            buf[idx] = Complex::new(if indicator { 1.0 } else { v }, 0.0);
        }
        buf
    };
    let of: Vec<i32> = bf.iter().map(|b| b.0).collect();
    let og: Vec<i32> = bg.iter().map(|b| b.0).collect();
    let mut planner = FftPlanner::<f64>::new();
    let mut a = place(f, &of, false);
    let mut b = place(g, &og, false);
    let mut ia = place(f, &of, true);
    let mut ib = place(g, &og, true);
    for buf in [&mut a, &mut b, &mut ia, &mut ib] {
        fft_nd(buf, &shape, &strides, &mut planner, false);
    }
    for i in 0..cells {
        a[i] *= b[i];
        ia[i] *= ib[i];
    }
    fft_nd(&mut a, &shape, &strides, &mut planner, true);
    fft_nd(&mut ia, &shape, &strides, &mut planner, true);
    let scale = 1.0 / cells as f64;
    let mut out = BTreeMap::new();
    for idx in 0..cells {
        // pair counts are integers, so >= 0.5 marks the exact Minkowski support
        if ia[idx].re * scale < 0.5 {
            continue;
        }
        let mut rem = idx;
        let mut c = vec![0i32; dim];
        for axis in 0..dim {
            c[axis] = (rem / strides[axis]) as i32 + lo[axis];
            rem %= strides[axis];
        }
        out.insert(Site(c), a[idx].re * scale);
    }
    Ok(LatticeField {
        dim,
        values: Values::Float(out),
    })
}

/// In-place d-dimensional FFT applied axis by axis (unnormalized).
fn fft_nd(
    buf: &mut [Complex<f64>],
    shape: &[usize],
    strides: &[usize],
    planner: &mut FftPlanner<f64>,
    inverse: bool,
) {
    let total = buf.len();
    for axis in 0..shape.len() {
        let n = shape[axis];
        if n == 1 {
            continue;
        }
        let fft = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        let stride = strides[axis];
        let mut line = vec![Complex::new(0.0, 0.0); n];
        for start in 0..total {
            // line starts are the indices whose coordinate along `axis` is zero
            if (start / stride) % n != 0 {
                continue;
            }
            for (j, l) in line.iter_mut().enumerate() {
                *l = buf[start + j * stride];
            }
            fft.process(&mut line);
            for (j, l) in line.iter().enumerate() {
                buf[start + j * stride] = *l;
            }
        }
    }
}
