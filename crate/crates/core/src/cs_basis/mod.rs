//! Coulomb-Sturmian basis functions and their analytic matrix elements.
//!
//! The radial functions are
//!
//! ```text
//! <r|n> = sqrt(n!/(n+2l+1)!) exp(-b r) (2 b r)^(l+1) L_n^(2l+1)(2 b r)
//! ```
//!
//! With the biorthogonal partner `<r|ñ> = <r|n>/r` they form a complete set, and
//! `1/r`, the overlap, `p^2`, `r` and `r^2` are banded with bandwidth 0, 1, 1, 2
//! and 3 respectively. All element formulas take `hbar = 1`; callers scale `p^2`
//! by `hbar^2` themselves.

mod quadrature;

pub use quadrature::{
    cs_table, quadrature_element, quadrature_matrix, quadrature_p2_element, GaussLaguerreRule,
    QUADRATURE_TOLERANCE,
};

use crate::error::{Error, Result};

/// Identifies a Coulomb-Sturmian representation and its truncation sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsBasisSpec {
    /// Orbital angular momentum.
    pub l: u32,
    /// Scale parameter (inverse length).
    pub b: f64,
    /// Number of CS functions carrying the short-range (low-rank) representation.
    pub n_short: usize,
    /// Size of the larger basis used by the invert-truncate-invert scheme.
    pub n_big: usize,
    /// Block depth at which the continued fraction is seeded.
    pub n_cf_start: usize,
}

impl CsBasisSpec {
    pub fn new(l: u32, b: f64, n_short: usize, n_big: usize, n_cf_start: usize) -> Result<Self> {
        let spec = Self {
            l,
            b,
            n_short,
            n_big,
            n_cf_start,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// A basis with default truncation sizes, convenient when only `l` and `b` matter.
    pub fn with_scale(l: u32, b: f64) -> Result<Self> {
        Self::new(l, b, 32, 128, 5000)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(Error::InvalidBasis(format!("b must be positive, got {}", self.b)));
        }
        if self.n_short == 0 {
            return Err(Error::InvalidBasis("n_short must be positive".into()));
        }
        if self.n_big < self.n_short {
            return Err(Error::InvalidBasis(format!(
                "n_big ({}) must be at least n_short ({})",
                self.n_big, self.n_short
            )));
        }
        if self.n_cf_start <= self.n_big {
            return Err(Error::InvalidBasis(format!(
                "n_cf_start ({}) must exceed n_big ({})",
                self.n_cf_start, self.n_big
            )));
        }
        Ok(())
    }

    /// `alpha = 2l + 1`, the Laguerre index of the basis.
    pub fn laguerre_alpha(&self) -> u32 {
        2 * self.l + 1
    }
}

/// Symmetric banded real matrix addressed by `(diagonal offset, row)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSymmetric {
    size: usize,
    /// `bands[d][n]` holds entry `(n, n + d)`.
    bands: Vec<Vec<f64>>,
}

impl BandedSymmetric {
    pub fn from_fn(size: usize, bandwidth: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let bands = (0..=bandwidth)
            .map(|d| (0..size.saturating_sub(d)).map(|n| f(n, n + d)).collect())
            .collect();
        Self { size, bands }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn bandwidth(&self) -> usize {
        self.bands.len() - 1
    }

    pub fn entry(&self, n: usize, m: usize) -> f64 {
        let (lo, hi) = if n <= m { (n, m) } else { (m, n) };
        let d = hi - lo;
        if hi >= self.size || d > self.bandwidth() {
            return 0.0;
        }
        self.bands[d][lo]
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.size, self.size, |i, j| self.entry(i, j))
    }
}

/// Matrix elements available in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CsOperator {
    InvR,
    Overlap,
    P2,
    R,
    R2,
}

impl CsOperator {
    pub const ALL: [CsOperator; 5] = [
        CsOperator::InvR,
        CsOperator::Overlap,
        CsOperator::P2,
        CsOperator::R,
        CsOperator::R2,
    ];

    pub fn bandwidth(self) -> usize {
        match self {
            CsOperator::InvR => 0,
            CsOperator::Overlap | CsOperator::P2 => 1,
            CsOperator::R => 2,
            CsOperator::R2 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CsOperator::InvR => "inv_r",
            CsOperator::Overlap => "overlap",
            CsOperator::P2 => "p2",
            CsOperator::R => "r",
            CsOperator::R2 => "r2",
        }
    }

    pub fn element(self, l: u32, b: f64, n: usize, m: usize) -> f64 {
        match self {
            CsOperator::InvR => inv_r_element(n, m),
            CsOperator::Overlap => overlap_element(l, b, n, m),
            CsOperator::P2 => p2_element(l, b, n, m),
            CsOperator::R => r_element(l, b, n, m),
            CsOperator::R2 => r2_element(l, b, n, m),
        }
    }

    pub fn matrix(self, spec: &CsBasisSpec, size: usize) -> BandedSymmetric {
        BandedSymmetric::from_fn(size, self.bandwidth(), |n, m| {
            self.element(spec.l, spec.b, n, m)
        })
    }
}

fn ordered(n: usize, m: usize) -> (f64, usize) {
    let (lo, hi) = if n <= m { (n, m) } else { (m, n) };
    (lo as f64, hi - lo)
}

/// `<n|1/r|n'> = δ_{nn'}`.
pub fn inv_r_element(n: usize, m: usize) -> f64 {
    if n == m {
        1.0
    } else {
        0.0
    }
}

pub fn overlap_element(l: u32, b: f64, n: usize, m: usize) -> f64 {
    let l = l as f64;
    let (n, d) = ordered(n, m);
    match d {
        0 => (n + l + 1.0) / b,
        1 => {
            let m = n + 1.0;
            -(m * (m + 2.0 * l + 1.0)).sqrt() / (2.0 * b)
        }
        _ => 0.0,
    }
}

pub fn p2_element(l: u32, b: f64, n: usize, m: usize) -> f64 {
    let l = l as f64;
    let (n, d) = ordered(n, m);
    match d {
        0 => (n + l + 1.0) * b,
        1 => {
            let m = n + 1.0;
            (m * (m + 2.0 * l + 1.0)).sqrt() * b / 2.0
        }
        _ => 0.0,
    }
}

pub fn r_element(l: u32, b: f64, n: usize, m: usize) -> f64 {
    let l = l as f64;
    let b2 = b * b;
    let (n, d) = ordered(n, m);
    match d {
        0 => (6.0 * n * n + 2.0 * (l + 1.0) * (6.0 * n + 2.0 * l + 3.0)) / (4.0 * b2),
        1 => {
            let m = n + 1.0;
            -(2.0 * m + 2.0 * l + 1.0) * (m * (m + 2.0 * l + 1.0)).sqrt() / (2.0 * b2)
        }
        2 => {
            let m = n + 2.0;
            (m * (m - 1.0) * (m + 2.0 * l) * (m + 2.0 * l + 1.0)).sqrt() / (4.0 * b2)
        }
        _ => 0.0,
    }
}

pub fn r2_element(l: u32, b: f64, n: usize, m: usize) -> f64 {
    let l = l as f64;
    let b3 = b * b * b;
    let (n, d) = ordered(n, m);
    match d {
        0 => {
            (((10.0 * n + 2.0 * l + 4.0) * (n + 2.0 * l + 3.0) + 9.0 * n * (n - 1.0))
                * (n + 2.0 * l + 2.0)
                + n * (n - 1.0) * (n - 2.0))
                / (8.0 * b3)
        }
        1 => {
            let m = n + 1.0;
            -((4.0 * m + 2.0 * l) * (m + 2.0 * l + 2.0) + (m - 1.0) * (m - 2.0))
                * (m * (m + 2.0 * l + 1.0)).sqrt()
                * 3.0
                / (8.0 * b3)
        }
        2 => {
            let m = n + 2.0;
            (2.0 * m + 2.0 * l)
                * (m * (m - 1.0) * (m + 2.0 * l + 1.0) * (m + 2.0 * l)).sqrt()
                * 3.0
                / (8.0 * b3)
        }
        3 => {
            let m = n + 3.0;
            -(m * (m - 1.0)
                * (m - 2.0)
                * (m + 2.0 * l + 1.0)
                * (m + 2.0 * l)
                * (m + 2.0 * l - 1.0))
                .sqrt()
                / (8.0 * b3)
        }
        _ => 0.0,
    }
}

pub fn overlap_matrix(spec: &CsBasisSpec, size: usize) -> BandedSymmetric {
    CsOperator::Overlap.matrix(spec, size)
}

pub fn p2_matrix(spec: &CsBasisSpec, size: usize) -> BandedSymmetric {
    CsOperator::P2.matrix(spec, size)
}

pub fn r_matrix(spec: &CsBasisSpec, size: usize) -> BandedSymmetric {
    CsOperator::R.matrix(spec, size)
}

pub fn r2_matrix(spec: &CsBasisSpec, size: usize) -> BandedSymmetric {
    CsOperator::R2.matrix(spec, size)
}

/// A floating value times `2^exp`, used to keep Laguerre recurrences finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub mantissa: f64,
    pub exp2: i32,
}

impl Scaled {
    pub fn value(self) -> f64 {
        ldexp(self.mantissa, self.exp2)
    }

    /// `ln |value|`.
    pub fn ln_abs(self) -> f64 {
        self.mantissa.abs().ln() + self.exp2 as f64 * std::f64::consts::LN_2
    }
}

/// `v * 2^k` without intermediate overflow.
pub fn ldexp(mut v: f64, mut k: i32) -> f64 {
    while k > 1000 {
        v *= 2f64.powi(1000);
        k -= 1000;
    }
    while k < -1000 {
        v *= 2f64.powi(-1000);
        k += 1000;
        if v == 0.0 {
            return 0.0;
        }
    }
    v * 2f64.powi(k)
}

const RESCALE_EXP: i32 = 500;

/// Generalized Laguerre polynomials `L_0..=L_{n_max}` at `x`.
///
/// The three-term recurrence is rescaled by exact powers of two whenever the running
/// value grows past `2^500`, so the result is finite for any degree and argument.
pub fn laguerre_scaled_sequence(n_max: usize, alpha: f64, x: f64) -> Vec<Scaled> {
    let big = 2f64.powi(RESCALE_EXP);
    let small = 2f64.powi(-RESCALE_EXP);
    let mut out = Vec::with_capacity(n_max + 1);
    let mut exp2 = 0;
    let mut prev = 0.0;
    let mut cur = 1.0;
    out.push(Scaled { mantissa: cur, exp2 });
    for k in 0..n_max {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
        if cur.abs() > big {
            cur *= small;
            prev *= small;
            exp2 += RESCALE_EXP;
        }
        out.push(Scaled { mantissa: cur, exp2 });
    }
    out
}

/// `L_n^alpha(x)` by the three-term recurrence. Overflows to infinity only when the
/// true value does.
pub fn laguerre(n: usize, alpha: f64, x: f64) -> f64 {
    laguerre_scaled_sequence(n, alpha, x).last().unwrap().value()
}

/// `ln sqrt(n!/(n+2l+1)!)`.
pub fn log_norm(n: usize, l: u32) -> f64 {
    let top = n + 2 * l as usize + 1;
    -0.5 * ((n + 1)..=top).map(|k| (k as f64).ln()).sum::<f64>()
}

fn check_radius(r: f64) -> Result<()> {
    if r.is_finite() && r > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("radius must be positive, got {r}")))
    }
}

/// Coordinate-space CS function `<r|n>`.
pub fn cs_function(spec: &CsBasisSpec, n: usize, r: f64) -> Result<f64> {
    check_radius(r)?;
    Ok(cs_values(spec.l, spec.b, n + 1, r)[n])
}

/// `<r|0> .. <r|count-1>` at a single radius.
pub fn cs_values(l: u32, b: f64, count: usize, r: f64) -> Vec<f64> {
    if count == 0 {
        return Vec::new();
    }
    let x = 2.0 * b * r;
    let alpha = (2 * l + 1) as f64;
    let base = -0.5 * x + (l as f64 + 1.0) * x.ln();
    laguerre_scaled_sequence(count - 1, alpha, x)
        .into_iter()
        .enumerate()
        .map(|(n, v)| {
            if v.mantissa == 0.0 {
                0.0
            } else {
                v.mantissa * (log_norm(n, l) + base + v.exp2 as f64 * std::f64::consts::LN_2).exp()
            }
        })
        .collect()
}

/// Radial derivative `d<r|n>/dr`.
pub fn cs_derivative(spec: &CsBasisSpec, n: usize, r: f64) -> Result<f64> {
    check_radius(r)?;
    Ok(cs_derivatives(spec.l, spec.b, n + 1, r)[n])
}

/// `d<r|n>/dr` for `n < count`, from `x L_n' = n L_n - (n + alpha) L_{n-1}`.
pub fn cs_derivatives(l: u32, b: f64, count: usize, r: f64) -> Vec<f64> {
    if count == 0 {
        return Vec::new();
    }
    let x = 2.0 * b * r;
    let lf = l as f64;
    let alpha = (2 * l + 1) as f64;
    let seq = laguerre_scaled_sequence(count - 1, alpha, x);
    let base = -0.5 * x + lf * x.ln();
    (0..count)
        .map(|n| {
            let d = derivative_bracket(&seq, n, lf, x);
            if d.mantissa == 0.0 {
                0.0
            } else {
                2.0 * b
                    * d.mantissa
                    * (log_norm(n, l) + base + d.exp2 as f64 * std::f64::consts::LN_2).exp()
            }
        })
        .collect()
}

/// `(l + 1 - x/2 + n) L_n - (n + 2l + 1) L_{n-1}`, i.e. `e^{x/2} x^{-l} d/dx[e^{-x/2} x^{l+1} L_n]`,
/// on the binary scale of `L_n`.
pub(crate) fn derivative_bracket(seq: &[Scaled], n: usize, l: f64, x: f64) -> Scaled {
    let nf = n as f64;
    let alpha = 2.0 * l + 1.0;
    let cur = seq[n];
    let lm1 = if n == 0 {
        0.0
    } else {
        ldexp(seq[n - 1].mantissa, seq[n - 1].exp2 - cur.exp2)
    };
    Scaled {
        mantissa: (l + 1.0 - 0.5 * x + nf) * cur.mantissa - (nf + alpha) * lm1,
        exp2: cur.exp2,
    }
}
