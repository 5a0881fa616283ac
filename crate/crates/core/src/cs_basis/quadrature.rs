//! Generalized Gauss-Laguerre quadrature, used as an independent check on the
//! closed-form matrix elements and to build short-range potential matrices.
//!
//! With `w_i = G / (x_i L_K'(x_i)^2)`, `G = Γ(K+α+1)/K!`, the `e^{-x}` of the
//! basis functions cancels against the weight analytically, so basis-function
//! products are summed as ratios `L_n(x_i) / L_K'(x_i)` carried on exact binary
//! scales. This keeps rules with a thousand nodes accurate to roundoff. Nodes and the
//! Laguerre values in the product table are carried in double-double, so exactly
//! vanishing out-of-band elements come out at the rounding level of single terms.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use super::{derivative_bracket, laguerre_scaled_sequence, ldexp, log_norm, CsBasisSpec, Scaled};
use crate::error::{Error, Result};

/// Node doubling stops once successive results agree to this accuracy, relative to
/// `max(1, |result|)`.
pub const QUADRATURE_TOLERANCE: f64 = 1e-12;

const MAX_NODES: usize = 1024;

type RuleCache = Mutex<HashMap<(usize, u32), Arc<GaussLaguerreRule>>>;

/// Gauss-Laguerre rule for the weight `x^alpha e^{-x}` on `(0, ∞)`, integer `alpha`.
#[derive(Debug, Clone)]
pub struct GaussLaguerreRule {
    alpha: u32,
    nodes: Vec<f64>,
    /// Low-order parts: the node is `nodes[i] + nodes_lo[i]` to double-double accuracy.
    nodes_lo: Vec<f64>,
    /// `L_K'(x_i)` on a binary scale.
    derivs: Vec<Scaled>,
    /// `Γ(K+α+1)/K!`.
    gamma_ratio: f64,
}

impl GaussLaguerreRule {
    /// Nodes from the Jacobi-matrix eigenvalues, polished by Newton steps on `L_K^alpha`.
    pub fn new(n_nodes: usize, alpha: u32) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::Domain("quadrature needs at least one node".into()));
        }
        let a = alpha as f64;
        let jacobi = DMatrix::from_fn(n_nodes, n_nodes, |i, j| {
            if i == j {
                2.0 * i as f64 + a + 1.0
            } else if i.abs_diff(j) == 1 {
                let k = i.max(j) as f64;
                -(k * (k + a)).sqrt()
            } else {
                0.0
            }
        });
        let mut guesses: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
        guesses.sort_by(|x, y| x.partial_cmp(y).unwrap());

        let k = n_nodes as f64;
        let mut nodes = Vec::with_capacity(n_nodes);
        let mut nodes_lo = Vec::with_capacity(n_nodes);
        let mut derivs = Vec::with_capacity(n_nodes);
        for mut x in guesses {
            for _ in 0..30 {
                let (lk, lm, _) = laguerre_top_pair_scaled(n_nodes, a, x, 0.0);
                let deriv_times_x = k * lk - (k + a) * lm;
                if deriv_times_x == 0.0 {
                    break;
                }
                let step = x * lk / deriv_times_x;
                x -= step;
                if step.abs() <= 0.5 * f64::EPSILON * x.abs() {
                    break;
                }
            }
            // one more Newton step, kept as the low-order part of the node
            let (lk, lm, _) = laguerre_top_pair_scaled(n_nodes, a, x, 0.0);
            let deriv_times_x = k * lk - (k + a) * lm;
            let lo = if deriv_times_x == 0.0 { 0.0 } else { -x * lk / deriv_times_x };
            let (_, lm, exp2) = laguerre_top_pair_scaled(n_nodes, a, x, lo);
            // at a root, L_K'(x) = -(K+α) L_{K-1}(x) / x
            derivs.push(Scaled {
                mantissa: -(k + a) * lm / (x + lo),
                exp2,
            });
            nodes.push(x);
            nodes_lo.push(lo);
        }
        let gamma_ratio = ((n_nodes + 1)..=(n_nodes + alpha as usize))
            .map(|i| i as f64)
            .product();
        Ok(Self {
            alpha,
            nodes,
            nodes_lo,
            derivs,
            gamma_ratio,
        })
    }

    /// Shared, cached rule.
    pub fn cached(n_nodes: usize, alpha: u32) -> Result<Arc<Self>> {
        static CACHE: OnceLock<RuleCache> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(rule) = cache.lock().unwrap().get(&(n_nodes, alpha)) {
            return Ok(rule.clone());
        }
        let rule = Arc::new(Self::new(n_nodes, alpha)?);
        cache
            .lock()
            .unwrap()
            .insert((n_nodes, alpha), rule.clone());
        Ok(rule)
    }

    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .zip(&self.derivs)
            .map(|(&x, d)| (self.gamma_ratio.ln() - x.ln() - 2.0 * d.ln_abs()).exp())
            .collect()
    }

    /// `∫ x^alpha e^{-x} f(x) dx`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(self.weights())
            .map(|(&x, w)| w * f(x))
            .sum()
    }

    /// `sqrt(w_i x_i) * p / L_K'(x_i)`-style ratio: returns `sqrt(G) * v / |L_K'(x_i)|`.
    fn ratio(&self, i: usize, v: Scaled) -> f64 {
        let d = self.derivs[i];
        ldexp(
            self.gamma_ratio.sqrt() * v.mantissa / d.mantissa.abs(),
            v.exp2 - d.exp2,
        )
    }
}

/// Double-double value `hi + lo`.
#[derive(Debug, Clone, Copy)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    fn new(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        let e = (a - (s - bb)) + (b - bb);
        Self { hi: s, lo: e }
    }

    fn renorm(hi: f64, lo: f64) -> Self {
        let s = hi + lo;
        Self {
            hi: s,
            lo: lo - (s - hi),
        }
    }

    fn add(self, o: Self) -> Self {
        let s = Self::two_sum(self.hi, o.hi);
        Self::renorm(s.hi, s.lo + self.lo + o.lo)
    }

    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn mul(self, o: Self) -> Self {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        Self::renorm(p, e + self.hi * o.lo + self.lo * o.hi)
    }

    fn div_f64(self, d: f64) -> Self {
        let q = self.hi / d;
        // remainder self - q*d, exactly via fma
        let r = Self::two_sum(self.hi, -q * d).add(Self::new(-(q.mul_add(d, -(q * d)))));
        let r = r.add(Self::new(self.lo));
        Self::renorm(q, r.hi / d)
    }

    fn scale(self, f: f64) -> Self {
        Self {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }
}

/// `(L_K, L_{K-1}, exp2)` at `x` in double-double arithmetic, both scaled by `2^-exp2`.
fn laguerre_top_pair_scaled(degree: usize, alpha: f64, x: f64, x_lo: f64) -> (f64, f64, i32) {
    let big = 2f64.powi(500);
    let small = 2f64.powi(-500);
    let mut exp2 = 0;
    let mut prev = DoubleDouble::new(0.0);
    let mut cur = DoubleDouble::new(1.0);
    for k in 0..degree {
        let kf = k as f64;
        let factor = DoubleDouble::two_sum(2.0 * kf + 1.0 + alpha, -x).add(DoubleDouble::new(-x_lo));
        let next = factor
            .mul(cur)
            .add(prev.mul(DoubleDouble::new(kf + alpha)).neg())
            .div_f64(kf + 1.0);
        prev = cur;
        cur = next;
        if cur.hi.abs() > big {
            cur = cur.scale(small);
            prev = prev.scale(small);
            exp2 += 500;
        }
    }
    (cur.hi + cur.lo, prev.hi + prev.lo, exp2)
}

/// `L_0..=L_{n_max}` at `x` like [`laguerre_scaled_sequence`], carried in double-double.
fn laguerre_sequence_dd(n_max: usize, alpha: f64, x: f64, x_lo: f64) -> Vec<Scaled> {
    let big = 2f64.powi(500);
    let small = 2f64.powi(-500);
    let mut out = Vec::with_capacity(n_max + 1);
    let mut exp2 = 0;
    let mut prev = DoubleDouble::new(0.0);
    let mut cur = DoubleDouble::new(1.0);
    out.push(Scaled { mantissa: 1.0, exp2 });
    for k in 0..n_max {
        let kf = k as f64;
        let factor = DoubleDouble::two_sum(2.0 * kf + 1.0 + alpha, -x).add(DoubleDouble::new(-x_lo));
        let next = factor
            .mul(cur)
            .add(prev.mul(DoubleDouble::new(kf + alpha)).neg())
            .div_f64(kf + 1.0);
        prev = cur;
        cur = next;
        if cur.hi.abs() > big {
            cur = cur.scale(small);
            prev = prev.scale(small);
            exp2 += 500;
        }
        out.push(Scaled {
            mantissa: cur.hi + cur.lo,
            exp2,
        });
    }
    out
}

/// Per-node factors `T[n, i]` such that `∫ <r|n> f(r) <r|n'> dr = (1/2b) Σ_i T[n,i] T[n',i] f(r_i)`,
/// `r_i = x_i / 2b`, for a rule with `alpha = 2l + 1`.
pub fn cs_table(l: u32, size: usize, rule: &GaussLaguerreRule) -> DMatrix<f64> {
    debug_assert_eq!(rule.alpha(), 2 * l + 1);
    let alpha = (2 * l + 1) as f64;
    let norms: Vec<f64> = (0..size).map(|n| log_norm(n, l).exp()).collect();
    let mut table = DMatrix::zeros(size, rule.len());
    for (i, &x) in rule.nodes().iter().enumerate() {
        if size == 0 {
            break;
        }
        let seq = laguerre_sequence_dd(size - 1, alpha, x, rule.nodes_lo[i]);
        for n in 0..size {
            table[(n, i)] = norms[n] * rule.ratio(i, seq[n]);
        }
    }
    table
}

fn start_nodes(size: usize, l: u32) -> usize {
    (size + l as usize + 16).next_power_of_two().max(32)
}

fn matrix_at(spec: &CsBasisSpec, size: usize, rule: &GaussLaguerreRule, f: &dyn Fn(f64) -> f64) -> DMatrix<f64> {
    let b = spec.b;
    let table = cs_table(spec.l, size, rule);
    let scaled = DMatrix::from_fn(size, rule.len(), |n, i| {
        table[(n, i)] * f(rule.nodes()[i] / (2.0 * b)) / (2.0 * b)
    });
    &scaled * table.transpose()
}

/// Matrix `∫ <r|n> f(r) <r|n'> dr` for `n, n' < size`, with node doubling until
/// successive rules agree to [`QUADRATURE_TOLERANCE`].
pub fn quadrature_matrix(
    spec: &CsBasisSpec,
    size: usize,
    f: &dyn Fn(f64) -> f64,
) -> Result<DMatrix<f64>> {
    let alpha = spec.laguerre_alpha();
    let mut nodes = start_nodes(size, spec.l);
    let mut previous = matrix_at(spec, size, &*GaussLaguerreRule::cached(nodes, alpha)?, f);
    let mut change = f64::INFINITY;
    while nodes * 2 <= MAX_NODES {
        nodes *= 2;
        let current = matrix_at(spec, size, &*GaussLaguerreRule::cached(nodes, alpha)?, f);
        let scale = current.amax().max(1.0);
        change = (&current - &previous).amax() / scale;
        if !change.is_finite() {
            break;
        }
        if change < QUADRATURE_TOLERANCE {
            return Ok(current);
        }
        previous = current;
    }
    Err(Error::QuadratureNonConvergence { nodes, change })
}

/// Node doubling on `eval`, which returns the quadrature sum and the sum of the
/// magnitudes of its terms; the latter sets the rounding floor of the change test.
fn doubled(start: usize, alpha: u32, eval: impl Fn(&GaussLaguerreRule) -> (f64, f64)) -> Result<f64> {
    let mut nodes = start;
    let mut previous = eval(&*GaussLaguerreRule::cached(nodes, alpha)?).0;
    let mut change = f64::INFINITY;
    while nodes * 2 <= MAX_NODES {
        nodes *= 2;
        let (current, magnitude) = eval(&*GaussLaguerreRule::cached(nodes, alpha)?);
        change = (current - previous).abs() / magnitude.max(1.0);
        if change < QUADRATURE_TOLERANCE {
            return Ok(current);
        }
        previous = current;
    }
    Err(Error::QuadratureNonConvergence { nodes, change })
}

/// `∫ <r|n> f(r) <r|n'> dr` by Gauss-Laguerre quadrature with weight `x^{2l+1} e^{-x}`.
pub fn quadrature_element(
    spec: &CsBasisSpec,
    n: usize,
    m: usize,
    f: impl Fn(f64) -> f64,
) -> Result<f64> {
    let b = spec.b;
    let size = n.max(m) + 1;
    doubled(start_nodes(size, spec.l), spec.laguerre_alpha(), |rule| {
        let table = cs_table(spec.l, size, rule);
        let (sum, magnitude) = (0..rule.len())
            .map(|i| table[(n, i)] * table[(m, i)] * f(rule.nodes()[i] / (2.0 * b)))
            .fold((0.0, 0.0), |(s, a), t| (s + t, a + t.abs()));
        (sum / (2.0 * b), magnitude / (2.0 * b))
    })
}

/// `<n|p^2|n'>` (with `hbar = 1`) from derivatives of the basis functions,
/// `∫ u_n' u_n'' dr + l(l+1) ∫ u_n u_n' / r^2 dr`, with weight `x^{2l} e^{-x}`.
pub fn quadrature_p2_element(spec: &CsBasisSpec, n: usize, m: usize) -> Result<f64> {
    let (l, b) = (spec.l, spec.b);
    let lf = l as f64;
    let size = n.max(m) + 1;
    let centrifugal = lf * (lf + 1.0);
    let norm = log_norm(n, l).exp() * log_norm(m, l).exp();
    doubled(start_nodes(size, l), 2 * l, |rule| {
        let (sum, magnitude) = rule
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let seq = laguerre_scaled_sequence(size - 1, 2.0 * lf + 1.0, x);
                let dn = rule.ratio(i, derivative_bracket(&seq, n, lf, x));
                let dm = rule.ratio(i, derivative_bracket(&seq, m, lf, x));
                let mut term = dn * dm;
                if centrifugal > 0.0 {
                    term += centrifugal * rule.ratio(i, seq[n]) * rule.ratio(i, seq[m]);
                }
                term / x
            })
            .fold((0.0, 0.0), |(s, a), t: f64| (s + t, a + t.abs()));
        (2.0 * b * norm * sum, 2.0 * b * norm * magnitude)
    })
}
