//! Green's matrix of the long-range Hamiltonian in the CS basis through matrix
//! continued fractions.
//!
//! For a block-tridiagonal `J`, the inverse of the truncated Green's matrix is
//! `J_trunc` with its last diagonal block replaced by
//! `J_NN - J_{N,N+1} C_{N+1} J_{N+1,N}`, where
//! `C_k = (J_kk - J_{k,k+1} C_{k+1} J_{k+1,k})^-1`.
//!
//! For pure Coulomb problems the blocks grow linearly, `J_kk ~ J k` and
//! `J_{k,k+1} ~ J' k`, so `C_k ~ C/k` with `C = (J - J' C J')^-1`. Writing
//! `X = C J'` and `B = J'^-1 J` this becomes `X² - B X + I = 0`, solved in closed
//! form. Seeding the recursion with the tail continues it to complex energies.

use num_complex::Complex64;

use crate::cs_basis::CsBasisSpec;
use crate::error::{Error, Result};
use crate::fv_operator::{BlockTridiag, LongRangeOperator, LongRangeSpec, PhysicalConstants};
use crate::linalg::{c, eigenvalues_2x2, inverse, max_abs, CMatrix};

pub const DEFAULT_CF_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailBranch {
    Plus,
    Minus,
}

impl TailBranch {
    fn sign(self) -> f64 {
        match self {
            TailBranch::Plus => 1.0,
            TailBranch::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedPolicy {
    Zero,
    CoulombTail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailBlocks {
    pub j_block: CMatrix,
    pub jp_block: CMatrix,
    pub c_tail: CMatrix,
    pub branch: TailBranch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreenResult {
    pub g_inverse: CMatrix,
    pub corner_correction: CMatrix,
    /// CS index at which the fraction was seeded.
    pub depth_used: usize,
    /// Whether the depth-doubling check passed; true when it was not requested.
    pub converged: bool,
    /// Relative change of the corner correction between the last two depths,
    /// `None` when a single depth was evaluated.
    pub change: Option<f64>,
}

impl GreenResult {
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence {
                depth: self.depth_used,
                change: self.change.unwrap_or(f64::NAN),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfOptions {
    pub seed: SeedPolicy,
    pub tolerance: f64,
    /// Largest CS index at which a fraction may be seeded when doubling.
    pub max_depth: usize,
    /// Run the depth-doubling convergence check; otherwise evaluate once at `n_cf_start`.
    pub diagnose: bool,
}

impl CfOptions {
    pub fn new(seed: SeedPolicy) -> Self {
        Self {
            seed,
            tolerance: DEFAULT_CF_TOLERANCE,
            max_depth: 20_000,
            diagnose: true,
        }
    }

    pub fn single_depth(self) -> Self {
        Self {
            diagnose: false,
            ..self
        }
    }
}

/// Leading large-index coefficients of the FV0 blocks: `J_kk ~ J k`, `J_{k,k+1} ~ J' k`.
pub fn asymptotic_blocks(
    consts: &PhysicalConstants,
    energy: Complex64,
    spec: &CsBasisSpec,
) -> (CMatrix, CMatrix) {
    asymptotic_blocks_bind(consts, energy - consts.rest_energy(), spec)
}

/// [`asymptotic_blocks`] at binding energy `e_bind = E - mc²`.
pub fn asymptotic_blocks_bind(
    consts: &PhysicalConstants,
    e_bind: Complex64,
    spec: &CsBasisSpec,
) -> (CMatrix, CMatrix) {
    let b = spec.b;
    let two_mc2 = 2.0 * consts.rest_energy();
    let kin = consts.hbar * consts.hbar * b / (2.0 * consts.m);
    let j = CMatrix::from_row_slice(
        2,
        2,
        &[
            e_bind / b - kin,
            c(-kin, 0.0),
            c(kin, 0.0),
            (e_bind + two_mc2) / b + kin,
        ],
    );
    let jp = CMatrix::from_row_slice(
        2,
        2,
        &[
            -e_bind / (2.0 * b) - kin / 2.0,
            c(-kin / 2.0, 0.0),
            c(kin / 2.0, 0.0),
            -(e_bind + two_mc2) / (2.0 * b) + kin / 2.0,
        ],
    );
    (j, jp)
}

/// Schrödinger counterpart of [`asymptotic_blocks`] (1x1 blocks).
pub fn asymptotic_blocks_schrodinger(
    consts: &PhysicalConstants,
    energy: Complex64,
    spec: &CsBasisSpec,
) -> (CMatrix, CMatrix) {
    let b = spec.b;
    let kin = consts.hbar * consts.hbar * b / (2.0 * consts.m);
    (
        CMatrix::from_element(1, 1, energy / b - kin),
        CMatrix::from_element(1, 1, -energy / (2.0 * b) - kin / 2.0),
    )
}

/// Solves `C = (J - J' C J')^-1` on the given branch of `X = (B ± √(B² - 4I))/2`.
///
/// `X` is formed as a function of `A = B + 2I = J'^-1 (J + 2J')` from the
/// eigenvalues of `A`, using `μ² - 4 = a(a - 4)`. The FV0 blocks make `A`
/// singular at every energy (a marginal channel with `X = -I` on both
/// branches); working with `A` keeps that zero eigenvalue exact to rounding, and
/// it is snapped to zero so that `√(a(a - 4))` does not amplify the noise.
pub fn solve_tail(j: &CMatrix, jp: &CMatrix, branch: TailBranch) -> Result<CMatrix> {
    let jp_inv = singular_checked_inverse(jp)?;
    let a = &jp_inv * (j + jp * c(2.0, 0.0));
    let sign = branch.sign();
    let root = |a: Complex64| (a * (a - 4.0)).sqrt();
    let g = |a: Complex64, r: Complex64| (a - 2.0 + sign * r) * 0.5;
    let x = match a.nrows() {
        1 => {
            let a0 = a[(0, 0)];
            CMatrix::from_element(1, 1, g(a0, root(a0)))
        }
        2 => {
            let id = CMatrix::identity(2, 2);
            let tr = a[(0, 0)] + a[(1, 1)];
            let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
            let [e1, e2] = eigenvalues_2x2(&a);
            let (big, small) = if e1.norm() >= e2.norm() { (e1, e2) } else { (e2, e1) };
            let small = if big.norm() > 0.0 { det / big } else { small };
            let scale = max_abs(&a).max(tr.norm());
            let (a1, r1) = if small.norm() <= 1e-10 * scale {
                (c(0.0, 0.0), c(0.0, 0.0))
            } else {
                (small, root(small))
            };
            let (a2, r2) = (big, root(big));
            if (a1 - a2).norm() > 1e-7 * (1.0 + scale) {
                (&a - &id * a2) * (g(a1, r1) / (a1 - a2)) + (&a - &id * a1) * (g(a2, r2) / (a2 - a1))
            } else {
                let off = &a - &id * a2;
                if max_abs(&off) <= 1e-10 * (1.0 + scale) {
                    id * g(a2, r2)
                } else if r2.norm() == 0.0 {
                    return Err(Error::DefectiveSquareRoot);
                } else {
                    let slope = (1.0 + sign * (a2 - 2.0) / r2) * 0.5;
                    id * g(a2, r2) + off * slope
                }
            }
        }
        n => {
            return Err(Error::DimensionMismatch(format!(
                "tail implemented for 1x1 and 2x2 blocks, got {n}x{n}"
            )))
        }
    };
    Ok(x * jp_inv)
}

fn singular_checked_inverse(m: &CMatrix) -> Result<CMatrix> {
    let scale = max_abs(m);
    let det = m.determinant();
    if scale == 0.0 || det.norm() <= 1e-13 * scale.powi(m.nrows() as i32) {
        return Err(Error::SingularOffDiagonal);
    }
    inverse(m).ok_or(Error::SingularOffDiagonal)
}

/// Residual `‖C - (J - J' C J')^-1‖ / ‖C‖` of the tail equation.
pub fn tail_residual(j: &CMatrix, jp: &CMatrix, c_tail: &CMatrix) -> f64 {
    let inner = j - jp * c_tail * jp;
    match inverse(&inner) {
        Some(inv) => max_abs(&(c_tail - inv)) / max_abs(c_tail).max(f64::MIN_POSITIVE),
        None => f64::INFINITY,
    }
}

/// Momentum `k` with the cut rotated so that `arg k ∈ (-π/4, 3π/4]`: bound states
/// have `Im k > 0`, resonances sit in the fourth quadrant.
pub fn channel_momentum(consts: &PhysicalConstants, energy: Complex64, relativistic: bool) -> Complex64 {
    let e_bind = if relativistic { energy - consts.rest_energy() } else { energy };
    channel_momentum_bind(consts, e_bind, relativistic)
}

/// [`channel_momentum`] at binding energy (`E - mc²`, or `E` without rest mass).
pub fn channel_momentum_bind(consts: &PhysicalConstants, e_bind: Complex64, relativistic: bool) -> Complex64 {
    let k2 = if relativistic {
        e_bind * (e_bind + 2.0 * consts.rest_energy()) / (consts.hbar * consts.hbar * consts.c * consts.c)
    } else {
        e_bind * (2.0 * consts.m / (consts.hbar * consts.hbar))
    };
    let k = k2.sqrt();
    if k.arg() <= -std::f64::consts::FRAC_PI_4 {
        -k
    } else {
        k
    }
}

/// Tail on the branch matching the analytically continued free solution, whose
/// eigenvalue of `X` is `-(k - ib)/(k + ib)`.
pub fn select_tail(
    consts: &PhysicalConstants,
    energy: Complex64,
    spec: &CsBasisSpec,
    relativistic: bool,
) -> Result<TailBlocks> {
    let e_bind = if relativistic { energy - consts.rest_energy() } else { energy };
    select_tail_bind(consts, e_bind, spec, relativistic)
}

/// [`select_tail`] at binding energy.
pub fn select_tail_bind(
    consts: &PhysicalConstants,
    e_bind: Complex64,
    spec: &CsBasisSpec,
    relativistic: bool,
) -> Result<TailBlocks> {
    let (j_block, jp_block) = if relativistic {
        asymptotic_blocks_bind(consts, e_bind, spec)
    } else {
        asymptotic_blocks_schrodinger(consts, e_bind, spec)
    };
    let k = channel_momentum_bind(consts, e_bind, relativistic);
    let ib = c(0.0, spec.b);
    let target = -(k - ib) / (k + ib);
    let mut best: Option<(f64, TailBlocks)> = None;
    for branch in [TailBranch::Plus, TailBranch::Minus] {
        let c_tail = solve_tail(&j_block, &jp_block, branch)?;
        let x = &c_tail * &jp_block;
        let distance = if x.nrows() == 1 {
            (x[(0, 0)] - target).norm()
        } else {
            eigenvalues_2x2(&x)
                .iter()
                .map(|e| (e - target).norm())
                .fold(f64::INFINITY, f64::min)
        };
        if best.as_ref().is_none_or(|(d, _)| distance < *d) {
            best = Some((
                distance,
                TailBlocks {
                    j_block: j_block.clone(),
                    jp_block: jp_block.clone(),
                    c_tail,
                    branch,
                },
            ));
        }
    }
    Ok(best.expect("two branches tried").1)
}

/// Index-addressable block source for the backward recursion.
pub trait BlockSource {
    fn block_dim(&self) -> usize;
    fn block(&self, i: usize, j: usize) -> CMatrix;
}

impl BlockSource for BlockTridiag {
    fn block_dim(&self) -> usize {
        self.block_dim
    }

    fn block(&self, i: usize, j: usize) -> CMatrix {
        if i == j {
            self.diag[i].clone()
        } else if j == i + 1 {
            self.sup[i].clone()
        } else if i == j + 1 {
            self.sub[j].clone()
        } else {
            CMatrix::zeros(self.block_dim, self.block_dim)
        }
    }
}

/// Blocks of `J` evaluated lazily at one binding energy.
pub struct EnergyBlocks<'a> {
    pub op: &'a LongRangeOperator,
    pub e_bind: Complex64,
}

impl BlockSource for EnergyBlocks<'_> {
    fn block_dim(&self) -> usize {
        self.op.block_dim()
    }

    fn block(&self, i: usize, j: usize) -> CMatrix {
        self.op.block_bind(self.e_bind, i, j)
    }
}

/// `C_{n_stop}` by backward recursion from `seed = C_{n_start+1}`.
pub fn continued_fraction<S: BlockSource + ?Sized>(
    blocks: &S,
    n_start: usize,
    n_stop: usize,
    seed: &CMatrix,
) -> Result<CMatrix> {
    if n_stop > n_start {
        return Err(Error::DimensionMismatch(format!(
            "continued fraction runs downward: n_start {n_start} < n_stop {n_stop}"
        )));
    }
    let mut cur = seed.clone();
    let mut coupling_down = blocks.block(n_start + 1, n_start);
    for k in (n_stop..=n_start).rev() {
        let up = blocks.block(k, k + 1);
        let inner = blocks.block(k, k) - &up * &cur * &coupling_down;
        cur = inverse(&inner).ok_or(Error::SingularBlock { index: k })?;
        if k > n_stop {
            coupling_down = blocks.block(k, k - 1);
        }
    }
    Ok(cur)
}

fn seed_block(op: &LongRangeOperator, tail: Option<&CMatrix>, block_index: usize) -> CMatrix {
    match tail {
        Some(c_tail) => c_tail / c((block_index + op.spec.l as usize + 1) as f64, 0.0),
        None => CMatrix::zeros(op.block_dim(), op.block_dim()),
    }
}

/// Corner correction `J_{N,N+1} C_{N+1} J_{N+1,N}` for the first `n_blocks`
/// blocks at binding energy `e_bind`, seeding the fraction at block `n_start`.
pub fn corner_correction(
    op: &LongRangeOperator,
    e_bind: Complex64,
    n_blocks: usize,
    n_start: usize,
    seed: SeedPolicy,
) -> Result<CMatrix> {
    let tail = tail_for(op, e_bind, seed)?;
    corner_with_tail(op, e_bind, n_blocks, n_start, tail.as_ref())
}

fn tail_for(op: &LongRangeOperator, e_bind: Complex64, seed: SeedPolicy) -> Result<Option<CMatrix>> {
    match seed {
        SeedPolicy::Zero => Ok(None),
        SeedPolicy::CoulombTail => {
            if op.lr.is_confining() {
                return Err(Error::Config(
                    "the Coulomb tail seed requires alpha1 = alpha2 = 0".into(),
                ));
            }
            Ok(Some(select_tail_bind(&op.consts, e_bind, &op.spec, op.lr.relativistic)?.c_tail))
        }
    }
}

fn corner_with_tail(
    op: &LongRangeOperator,
    e_bind: Complex64,
    n_blocks: usize,
    n_start: usize,
    tail: Option<&CMatrix>,
) -> Result<CMatrix> {
    let n_start = n_start.max(n_blocks);
    let src = EnergyBlocks { op, e_bind };
    let seed = seed_block(op, tail, n_start + 1);
    let c_next = continued_fraction(&src, n_start, n_blocks, &seed)?;
    let last = n_blocks - 1;
    Ok(src.block(last, n_blocks) * c_next * src.block(n_blocks, last))
}

/// Number of blocks needed to hold `n_short` CS functions.
pub fn blocks_for(lr: &LongRangeSpec, n_short: usize) -> usize {
    n_short.div_ceil(lr.group_size())
}

/// Bracket `J_trunc - corner` (the inverse of the truncated Green's matrix),
/// with a depth-doubling convergence check on the corner block.
pub fn green_inverse(
    spec: &CsBasisSpec,
    lr: &LongRangeSpec,
    consts: &PhysicalConstants,
    energy: Complex64,
    options: &CfOptions,
) -> Result<GreenResult> {
    let op = LongRangeOperator::new(*spec, *lr, *consts);
    green_inverse_with(&op, op.binding(energy), options)
}

/// [`green_inverse`] at binding energy `e_bind`.
pub fn green_inverse_with(
    op: &LongRangeOperator,
    e_bind: Complex64,
    options: &CfOptions,
) -> Result<GreenResult> {
    let g = op.lr.group_size();
    let n_blocks = blocks_for(&op.lr, op.spec.n_short);
    let tail = tail_for(op, e_bind, options.seed)?;
    let mut depth = op.spec.n_cf_start.div_ceil(g).max(2 * n_blocks + 2);
    let (corner, converged, change) = if options.diagnose {
        let max_depth = options.max_depth.div_ceil(g).max(depth);
        let mut previous = corner_with_tail(op, e_bind, n_blocks, depth / 2, tail.as_ref())?;
        loop {
            let corner = corner_with_tail(op, e_bind, n_blocks, depth, tail.as_ref())?;
            let scale = max_abs(&corner).max(f64::MIN_POSITIVE);
            let change = max_abs(&(&corner - &previous)) / scale;
            if change < options.tolerance || corner == previous {
                break (corner, true, Some(change));
            }
            if depth * 2 > max_depth {
                break (corner, false, Some(change));
            }
            previous = corner;
            depth *= 2;
        }
    } else {
        let corner = corner_with_tail(op, e_bind, n_blocks, depth, tail.as_ref())?;
        (corner, true, None)
    };
    let mut g_inverse = op.assemble_bind(e_bind, n_blocks)?.to_dense();
    let d = op.block_dim();
    let at = (n_blocks - 1) * d;
    let mut view = g_inverse.view_mut((at, at), (d, d));
    view -= &corner;
    Ok(GreenResult {
        g_inverse,
        corner_correction: corner,
        depth_used: depth * g,
        converged,
        change,
    })
}
