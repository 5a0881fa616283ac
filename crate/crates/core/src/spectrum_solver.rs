//! Bound and resonant states from `det[(G^(l)(E))^-1 - H^(s)] = 0`.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cs_basis::{cs_values, overlap_element, CsBasisSpec};
use crate::error::{Error, Result};
use crate::fv_operator::{LongRangeOperator, PhysicalConstants};
use crate::green_cf::{blocks_for, green_inverse_with, CfOptions, GreenResult, SeedPolicy};
use crate::linalg::{c, log_det, smallest_singular, spectral_norm, CMatrix};
use crate::potentials::{build_short_range, PotentialModel, ShortRangeMatrix};

/// A fully specified eigenvalue problem; the short-range matrix is built once.
#[derive(Debug, Clone)]
pub struct Problem {
    pub op: LongRangeOperator,
    pub model: PotentialModel,
    pub cf: CfOptions,
    pub n_blocks: usize,
    pub short: ShortRangeMatrix,
}

#[derive(Debug, Clone)]
pub struct Bracket {
    pub matrix: CMatrix,
    pub green: GreenResult,
}

impl Problem {
    pub fn new(
        spec: CsBasisSpec,
        model: PotentialModel,
        consts: PhysicalConstants,
        relativistic: bool,
        cf: CfOptions,
    ) -> Result<Self> {
        spec.validate()?;
        consts.validate()?;
        model.validate()?;
        let lr = model.long_range(relativistic);
        let op = LongRangeOperator::new(spec, lr, consts);
        let n_blocks = blocks_for(&lr, spec.n_short);
        let rank = n_blocks * lr.group_size();
        let dim = n_blocks * lr.block_dim();
        let short = build_short_range(&model, &consts, &spec, relativistic, rank, dim)?;
        Ok(Self {
            op,
            model,
            cf,
            n_blocks,
            short,
        })
    }

    pub fn relativistic(&self) -> bool {
        self.op.lr.relativistic
    }

    /// Shift between total energy and binding energy.
    pub fn rest_offset(&self) -> f64 {
        if self.relativistic() {
            self.op.consts.rest_energy()
        } else {
            0.0
        }
    }

    pub fn total_energy(&self, e_bind: Complex64) -> Complex64 {
        e_bind + self.rest_offset()
    }

    pub fn with_seed(&self, seed: SeedPolicy) -> Self {
        let mut out = self.clone();
        out.cf.seed = seed;
        out
    }

    /// `(G^(l))^-1 - H^(s)` at binding energy `e_bind`, with the fraction seeded
    /// once at `n_cf_start`.
    pub fn bracket(&self, e_bind: Complex64) -> Result<Bracket> {
        self.bracket_with(e_bind, &self.cf.single_depth())
    }

    /// As [`Problem::bracket`], running the depth-doubling check of the fraction.
    pub fn bracket_diagnosed(&self, e_bind: Complex64) -> Result<Bracket> {
        self.bracket_with(e_bind, &self.cf)
    }

    fn bracket_with(&self, e_bind: Complex64, cf: &CfOptions) -> Result<Bracket> {
        let green = green_inverse_with(&self.op, e_bind, cf)?;
        let matrix = &green.g_inverse - &self.short.dense_block;
        Ok(Bracket { matrix, green })
    }

    /// Binding-energy interval without continuum, `None` for confining problems.
    pub fn gap(&self) -> Option<(f64, f64)> {
        if self.op.lr.is_confining() {
            None
        } else if self.relativistic() {
            Some((-2.0 * self.op.consts.rest_energy(), 0.0))
        } else {
            Some((f64::NEG_INFINITY, 0.0))
        }
    }

    fn is_bound_energy(&self, e_bind: Complex64) -> bool {
        let tol = 1e-10 * (1.0 + e_bind.re.abs());
        e_bind.im.abs() < tol
            && self
                .gap()
                .is_none_or(|(lo, hi)| e_bind.re > lo && e_bind.re < hi)
    }

    /// The same problem with the fraction seeded twice as deep.
    pub fn deeper(&self) -> Self {
        let mut out = self.clone();
        out.op.spec.n_cf_start *= 2;
        out
    }

    /// `(ln|det|, phase)` of the bracket at binding energy `e_bind`.
    pub fn log_det(&self, e_bind: Complex64) -> Result<(f64, Complex64)> {
        let b = self.bracket(e_bind)?;
        log_det(&b.matrix).ok_or_else(|| Error::Singular("bracket factorization".into()))
    }
}

/// Determinant of the bracket divided by `exp(reference_log_abs)`.
pub fn determinant_indicator(bracket: &CMatrix, reference_log_abs: f64) -> Option<Complex64> {
    let (la, phase) = log_det(bracket)?;
    Some(phase * (la - reference_log_abs).exp())
}

pub fn default_seed(model: &PotentialModel) -> SeedPolicy {
    if model.alpha1 != 0.0 || model.alpha2 != 0.0 {
        SeedPolicy::Zero
    } else {
        SeedPolicy::CoulombTail
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchWindow {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    pub initial_guesses: Vec<Complex64>,
    pub max_roots: usize,
}

impl SearchWindow {
    pub fn real(re_min: f64, re_max: f64) -> Self {
        Self {
            re_min,
            re_max,
            im_min: 0.0,
            im_max: 0.0,
            initial_guesses: Vec::new(),
            max_roots: usize::MAX,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.re_min < self.re_max) {
            return Err(Error::Config("solver.window re_min must be below re_max".into()));
        }
        if !(self.im_min <= self.im_max && self.im_max <= 0.0) {
            return Err(Error::Config(
                "solver.window requires im_min <= im_max <= 0".into(),
            ));
        }
        Ok(())
    }

    fn contains(&self, e: Complex64) -> bool {
        let slack = 1e-9 * (1.0 + e.norm());
        e.re >= self.re_min - slack
            && e.re <= self.re_max + slack
            && e.im >= self.im_min - slack
            && e.im <= self.im_max + slack
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Bound,
    Resonance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParticleSign {
    Particle,
    Antiparticle,
    Undetermined,
}

impl ParticleSign {
    pub fn as_i8(self) -> Option<i8> {
        match self {
            ParticleSign::Particle => Some(1),
            ParticleSign::Antiparticle => Some(-1),
            ParticleSign::Undetermined => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateResult {
    pub e_total: Complex64,
    pub e_bind: Complex64,
    pub kind: StateKind,
    pub particle_sign: ParticleSign,
    /// Block ordering: CS index slowest, FV component fastest.
    pub coefficients: DVector<Complex64>,
    /// Smallest singular value of the bracket over its spectral norm.
    pub residual: f64,
    pub depth_used: usize,
    pub iterations: usize,
    /// The root moved by less than the depth tolerance when the fraction was
    /// seeded twice as deep.
    pub converged: bool,
    /// `|E(2d) - E(d)|`, infinite when the deeper search lost the root.
    pub depth_shift: f64,
    /// Corner-block diagnostic of the fraction at the root.
    pub cf_converged: bool,
    pub cf_change: Option<f64>,
    pub degenerate: bool,
    pub relativistic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Bound,
    Resonance,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub grid_points: usize,
    pub energy_tolerance: f64,
    pub residual_tolerance: f64,
    pub dedup_tolerance: f64,
    pub max_iterations: usize,
    /// Relative root shift allowed when the fraction depth doubles.
    pub depth_tolerance: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            grid_points: 200,
            energy_tolerance: 1e-10,
            residual_tolerance: 1e-8,
            dedup_tolerance: 1e-8,
            max_iterations: 100,
            depth_tolerance: 1e-7,
        }
    }
}

impl Problem {
    /// Bracket at `e_bind`, retried once at a slightly shifted energy when a
    /// block of the fraction or the bracket itself is exactly singular.
    pub fn bracket_retry(&self, e_bind: Complex64) -> Result<(Complex64, Bracket)> {
        match self.bracket(e_bind) {
            Ok(b) => Ok((e_bind, b)),
            Err(Error::SingularBlock { .. }) | Err(Error::SingularOffDiagonal) => {
                let shifted = e_bind + 1e-12 * (1.0 + e_bind.norm());
                Ok((shifted, self.bracket(shifted)?))
            }
            Err(e) => Err(e),
        }
    }

    fn log_det_retry(&self, e_bind: Complex64) -> Result<(f64, Complex64)> {
        let (_, b) = self.bracket_retry(e_bind)?;
        match log_det(&b.matrix) {
            Some(v) => Ok(v),
            None => {
                let shifted = e_bind + 1e-12 * (1.0 + e_bind.norm());
                self.log_det(shifted)
            }
        }
    }

    /// Normalized determinant at binding energy `e_bind`.
    pub fn indicator(&self, e_bind: Complex64, reference_log_abs: f64) -> Result<Complex64> {
        let (la, phase) = self.log_det_retry(e_bind)?;
        Ok(phase * (la - reference_log_abs).exp())
    }
}

/// Right null vector of the bracket and the particle/antiparticle character.
pub fn extract_state(
    problem: &Problem,
    bracket: &CMatrix,
    kind: StateKind,
) -> (DVector<Complex64>, ParticleSign, f64, bool) {
    let (sigma, mut v, second) = smallest_singular(bracket);
    let scale = spectral_norm(bracket).max(f64::MIN_POSITIVE);
    let degenerate = second < 1e3 * sigma.max(1e-300) || second < 1e-6 * scale;
    let cd = problem.op.lr.component_dim();
    let spec = &problem.op.spec;
    let n_cs = v.len() / cd;
    let mut norm = c(0.0, 0.0);
    for n in 0..n_cs {
        for m in n.saturating_sub(1)..(n + 2).min(n_cs) {
            let s = overlap_element(spec.l, spec.b, n, m);
            for a in 0..cd {
                let t = if a == 1 { -1.0 } else { 1.0 };
                norm += v[n * cd + a].conj() * v[m * cd + a] * (t * s);
            }
        }
    }
    // fix the overall phase so the largest coefficient is real and positive
    let (imax, _) = v
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
    let phase = v[imax] / v[imax].norm();
    v /= phase;
    let v2 = v.norm_squared();
    let sign = if kind == StateKind::Resonance || norm.norm() <= 1e-6 * v2 {
        ParticleSign::Undetermined
    } else if norm.re > 0.0 {
        ParticleSign::Particle
    } else {
        ParticleSign::Antiparticle
    };
    if sign != ParticleSign::Undetermined {
        v /= c(norm.re.abs().sqrt(), 0.0);
    }
    (v, sign, sigma / scale, degenerate)
}

/// `(φ(r), χ(r))` of a state on `r_grid`; `χ` is empty for Schrödinger states.
pub fn wavefunction_on_grid(
    state: &StateResult,
    spec: &CsBasisSpec,
    r_grid: &[f64],
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let cd = if state.relativistic { 2 } else { 1 };
    let n_cs = state.coefficients.len() / cd;
    let mut phi = Vec::with_capacity(r_grid.len());
    let mut chi = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("radius must be positive, got {r}")));
        }
        let values = cs_values(spec.l, spec.b, n_cs, r);
        let mut p = c(0.0, 0.0);
        let mut q = c(0.0, 0.0);
        for (n, f) in values.iter().enumerate() {
            p += state.coefficients[n * cd] * f;
            if cd == 2 {
                q += state.coefficients[n * cd + 1] * f;
            }
        }
        phi.push(p);
        if cd == 2 {
            chi.push(q);
        }
    }
    Ok((phi, chi))
}

/// Assembles the state record at a root and checks it against a twice as deep fraction.
pub fn finish_state(
    problem: &Problem,
    e_bind: Complex64,
    iterations: usize,
    opts: &SolveOptions,
) -> Result<StateResult> {
    let (kind, e_bind) = if problem.is_bound_energy(e_bind) {
        (StateKind::Bound, c(e_bind.re, 0.0))
    } else {
        (StateKind::Resonance, e_bind)
    };
    let (e_bind, bracket) = problem.bracket_retry(e_bind)?;
    let e_total = problem.total_energy(e_bind);
    let diagnosed = problem.bracket_diagnosed(e_bind)?;
    let (coefficients, particle_sign, residual, degenerate) =
        extract_state(problem, &bracket.matrix, kind);
    let depth_shift = depth_shift(problem, e_bind, kind, opts);
    Ok(StateResult {
        e_total,
        e_bind,
        kind,
        particle_sign,
        coefficients,
        residual,
        depth_used: problem.op.spec.n_cf_start,
        iterations,
        converged: depth_shift <= opts.depth_tolerance * (1.0 + e_bind.norm()),
        depth_shift,
        cf_converged: diagnosed.green.converged,
        cf_change: diagnosed.green.change,
        degenerate,
        relativistic: problem.relativistic(),
    })
}

fn depth_shift(problem: &Problem, e_bind: Complex64, kind: StateKind, opts: &SolveOptions) -> f64 {
    let deeper = problem.deeper();
    let delta = opts.depth_tolerance * (1.0 + e_bind.norm());
    let moved = match kind {
        StateKind::Bound => [delta, 1e2 * delta, 1e4 * delta].iter().find_map(|&w| {
            refine_real(&deeper, e_bind.re - w, e_bind.re + w, opts)
                .ok()
                .map(|(e, _)| c(e, 0.0))
        }),
        StateKind::Resonance => {
            let h = 1e3 * delta;
            muller(&deeper, [e_bind - h, e_bind + h, e_bind - c(0.0, h)], opts)
                .ok()
                .map(|(e, _)| e)
        }
    };
    moved.map_or(f64::INFINITY, |e| (e - e_bind).norm())
}

fn real_grid(window: &SearchWindow, points: usize) -> Vec<f64> {
    let n = points.max(2);
    (0..n)
        .map(|i| window.re_min + (window.re_max - window.re_min) * i as f64 / (n - 1) as f64)
        .collect()
}

/// `(e, ln|det|, sign)` along the real axis.
fn scan_real(problem: &Problem, grid: &[f64]) -> Vec<Option<(f64, f64, f64)>> {
    grid.par_iter()
        .map(|&e| {
            problem
                .log_det_retry(c(e, 0.0))
                .ok()
                .map(|(la, ph)| (e, la, ph.re.signum()))
        })
        .collect()
}

/// Illinois-modified regula falsi on the real indicator.
fn refine_real(
    problem: &Problem,
    mut a: f64,
    mut b: f64,
    opts: &SolveOptions,
) -> Result<(f64, usize)> {
    let reference = problem.log_det_retry(c(0.5 * (a + b), 0.0))?.0;
    let f = |e: f64| -> Result<f64> { Ok(problem.indicator(c(e, 0.0), reference)?.re) };
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    if fa.signum() == fb.signum() {
        return Err(Error::NonConvergence {
            depth: 0,
            change: (b - a).abs(),
        });
    }
    let mut side = 0i8;
    for it in 1..=opts.max_iterations {
        let x = if fa != fb { (a * fb - b * fa) / (fb - fa) } else { 0.5 * (a + b) };
        let x = if x > a.min(b) && x < a.max(b) { x } else { 0.5 * (a + b) };
        let fx = f(x)?;
        if (b - a).abs() < opts.energy_tolerance * (1.0 + x.abs()) || fx == 0.0 {
            return Ok((x, it));
        }
        if fx.signum() == fb.signum() {
            b = x;
            fb = fx;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = x;
            fa = fx;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        let width = (b - a).abs();
        if width < opts.energy_tolerance * (1.0 + x.abs()) {
            return Ok((0.5 * (a + b), it));
        }
    }
    Err(Error::NonConvergence {
        depth: opts.max_iterations,
        change: (b - a).abs(),
    })
}

fn accept(state: &StateResult, opts: &SolveOptions) -> bool {
    state.residual < opts.residual_tolerance
}

/// Real roots in `[re_min, re_max]` (binding-energy coordinates).
pub fn find_bound_states(
    problem: &Problem,
    window: &SearchWindow,
    opts: &SolveOptions,
) -> Result<Vec<StateResult>> {
    let mut clipped = window.clone();
    if let Some((lo, hi)) = problem.gap() {
        clipped.re_min = clipped.re_min.max(lo);
        clipped.re_max = clipped.re_max.min(hi);
        if clipped.re_min >= clipped.re_max {
            return Ok(Vec::new());
        }
    }
    let grid = real_grid(&clipped, opts.grid_points);
    let scan = scan_real(problem, &grid);
    let mut brackets = Vec::new();
    for pair in scan.windows(2) {
        if let (Some(l), Some(r)) = (pair[0], pair[1]) {
            if l.2 != r.2 {
                brackets.push((l.0, r.0));
            }
        }
    }
    let found: Vec<Result<Option<StateResult>>> = brackets
        .par_iter()
        .map(|&(a, b)| {
            let (e, its) = match refine_real(problem, a, b, opts) {
                Ok(v) => v,
                Err(Error::NonConvergence { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let state = finish_state(problem, c(e, 0.0), its, opts)?;
            Ok(accept(&state, opts).then_some(state))
        })
        .collect();
    let mut out = Vec::new();
    for r in found {
        if let Some(s) = r? {
            out.push(s);
        }
    }
    Ok(finalize(out, window, opts))
}

/// Muller iteration on the normalized determinant from three starting points.
pub fn muller(
    problem: &Problem,
    start: [Complex64; 3],
    opts: &SolveOptions,
) -> Result<(Complex64, usize)> {
    let reference = problem.log_det_retry(start[2])?.0;
    let f = |e: Complex64| problem.indicator(e, reference);
    let [mut x0, mut x1, mut x2] = start;
    let (mut f0, mut f1, mut f2) = (f(x0)?, f(x1)?, f(x2)?);
    for it in 1..=opts.max_iterations {
        let h1 = x1 - x0;
        let h2 = x2 - x1;
        let d1 = (f1 - f0) / h1;
        let d2 = (f2 - f1) / h2;
        let a = (d2 - d1) / (h2 + h1);
        let b = a * h2 + d2;
        let disc = (b * b - 4.0 * a * f2).sqrt();
        let den = if (b + disc).norm() >= (b - disc).norm() { b + disc } else { b - disc };
        let step = if den.norm() == 0.0 { h2 } else { -2.0 * f2 / den };
        let x3 = x2 + step;
        if !(x3.re.is_finite() && x3.im.is_finite()) {
            break;
        }
        if step.norm() < opts.energy_tolerance * (1.0 + x3.norm()) {
            return Ok((x3, it));
        }
        let f3 = f(x3)?;
        if f3.norm() == 0.0 {
            return Ok((x3, it));
        }
        (x0, x1, x2) = (x1, x2, x3);
        (f0, f1, f2) = (f1, f2, f3);
    }
    Err(Error::NonConvergence {
        depth: opts.max_iterations,
        change: (x2 - x1).norm(),
    })
}

/// Complex roots reached by Muller iteration from the window's guesses, or
/// from local minima of `|det|` along the real axis when none are given.
pub fn find_resonances(
    problem: &Problem,
    window: &SearchWindow,
    opts: &SolveOptions,
) -> Result<Vec<StateResult>> {
    let grid = real_grid(window, opts.grid_points);
    let step = (window.re_max - window.re_min) / (grid.len() - 1) as f64;
    let guesses: Vec<Complex64> = if window.initial_guesses.is_empty() {
        let scan = scan_real(problem, &grid);
        let mut g = Vec::new();
        for i in 1..scan.len().saturating_sub(1) {
            if let (Some(l), Some(m), Some(r)) = (scan[i - 1], scan[i], scan[i + 1]) {
                if m.1 < l.1 && m.1 < r.1 {
                    g.push(c(m.0, 0.5 * (window.im_min + window.im_max)));
                }
            }
        }
        g
    } else {
        window.initial_guesses.clone()
    };
    let h = 0.25 * step;
    let found: Vec<Result<Option<StateResult>>> = guesses
        .par_iter()
        .map(|&g| {
            let start = [g - h, g + h, g + c(0.0, -0.5 * h)];
            let (e, its) = match muller(problem, start, opts) {
                Ok(v) => v,
                Err(Error::NonConvergence { .. }) => {
                    log::info!("Muller iteration from {g} did not converge");
                    return Ok(None);
                }
                Err(e) => return Err(e),
            };
            if !window.contains(e) {
                return Ok(None);
            }
            let state = finish_state(problem, e, its, opts)?;
            Ok(accept(&state, opts).then_some(state))
        })
        .collect();
    let mut out = Vec::new();
    for r in found {
        if let Some(s) = r? {
            out.push(s);
        }
    }
    Ok(finalize(out, window, opts))
}

pub fn find_roots(
    problem: &Problem,
    window: &SearchWindow,
    mode: SearchMode,
    opts: &SolveOptions,
) -> Result<Vec<StateResult>> {
    window.validate()?;
    let mut out = Vec::new();
    if matches!(mode, SearchMode::Bound | SearchMode::Both) {
        out.extend(find_bound_states(problem, window, opts)?);
    }
    if matches!(mode, SearchMode::Resonance | SearchMode::Both) {
        out.extend(find_resonances(problem, window, opts)?);
    }
    Ok(finalize(out, window, opts))
}

fn finalize(mut states: Vec<StateResult>, window: &SearchWindow, opts: &SolveOptions) -> Vec<StateResult> {
    states.retain(|s| window.contains(s.e_bind) || s.kind == StateKind::Bound);
    states.sort_by(|a, b| {
        a.e_bind
            .re
            .total_cmp(&b.e_bind.re)
            .then(a.e_bind.im.total_cmp(&b.e_bind.im))
    });
    let mut out: Vec<StateResult> = Vec::with_capacity(states.len());
    for s in states {
        if let Some(last) = out.last() {
            if (last.e_bind - s.e_bind).norm() < opts.dedup_tolerance {
                continue;
            }
        }
        out.push(s);
    }
    out.truncate(window.max_roots);
    out
}
