//! Coulomb-Sturmian representation of `J(E) = E - H^(l)` for the long-range
//! Hamiltonian, as a block-tridiagonal matrix.
//!
//! Feshbach-Villars (FV0) form:
//!
//! ```text
//! H^(l) = (τ3 + iτ2) (p²/2m + α1 r + α2 r²) + τ3 mc² + Z e²/r
//! ```
//!
//! With only the Coulomb term every CS index is one block (2x2). Linear or
//! quadratic confinement widens the scalar band to 5 or 7 diagonals; grouping
//! consecutive CS indices in triples makes it block-tridiagonal again (6x6). The
//! Schrödinger comparison path drops the τ structure and the rest energy
//! (1x1 or 3x3 blocks). Within a block the FV component varies fastest.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::cs_basis::{overlap_element, p2_element, r2_element, r_element, CsBasisSpec};
use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub m: f64,
    pub hbar: f64,
    pub c: f64,
    pub e2: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            m: 1.0,
            hbar: 1.0,
            c: 137.036,
            e2: 1.0,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("m", self.m), ("hbar", self.hbar), ("c", self.c), ("e2", self.e2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("constants.{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// `mc²`.
    pub fn rest_energy(&self) -> f64 {
        self.m * self.c * self.c
    }

    /// `ħ²/2m`, the coefficient of the CS `p²` matrix.
    pub fn kinetic_factor(&self) -> f64 {
        self.hbar * self.hbar / (2.0 * self.m)
    }
}

/// Long-range part of the interaction: Coulomb vector potential `Z e²/r` and
/// scalar confinement `U = α1 r + α2 r²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LongRangeSpec {
    pub z: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub relativistic: bool,
}

impl LongRangeSpec {
    pub fn coulomb(z: f64, relativistic: bool) -> Self {
        Self {
            z,
            alpha1: 0.0,
            alpha2: 0.0,
            relativistic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.z.is_finite() {
            return Err(Error::Config("potential.z must be finite".into()));
        }
        for (name, v) in [("alpha1", self.alpha1), ("alpha2", self.alpha2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("potential.{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn is_confining(&self) -> bool {
        self.alpha1 != 0.0 || self.alpha2 != 0.0
    }

    /// CS indices per block.
    pub fn group_size(&self) -> usize {
        if self.is_confining() {
            3
        } else {
            1
        }
    }

    /// Wave-function components per CS index.
    pub fn component_dim(&self) -> usize {
        if self.relativistic {
            2
        } else {
            1
        }
    }

    pub fn block_dim(&self) -> usize {
        self.group_size() * self.component_dim()
    }
}

/// Pauli matrices and the nilpotent `τ3 + iτ2 = [[1, 1], [-1, -1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TauMatrices {
    pub tau1: CMatrix,
    pub tau2: CMatrix,
    pub tau3: CMatrix,
    pub tau3_plus_i_tau2: CMatrix,
}

pub fn tau_structure() -> TauMatrices {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    TauMatrices {
        tau1: CMatrix::from_row_slice(2, 2, &[z, one, one, z]),
        tau2: CMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        tau3: CMatrix::from_row_slice(2, 2, &[one, z, z, -one]),
        tau3_plus_i_tau2: CMatrix::from_row_slice(2, 2, &[one, one, -one, -one]),
    }
}

/// Complex block-tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiag {
    pub block_dim: usize,
    pub diag: Vec<CMatrix>,
    /// `sup[i]` is block `(i, i+1)`.
    pub sup: Vec<CMatrix>,
    /// `sub[i]` is block `(i+1, i)`.
    pub sub: Vec<CMatrix>,
}

impl BlockTridiag {
    pub fn n_blocks(&self) -> usize {
        self.diag.len()
    }

    pub fn dim(&self) -> usize {
        self.block_dim * self.n_blocks()
    }

    pub fn to_dense(&self) -> CMatrix {
        let d = self.block_dim;
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        for (i, blk) in self.diag.iter().enumerate() {
            out.view_mut((i * d, i * d), (d, d)).copy_from(blk);
        }
        for (i, blk) in self.sup.iter().enumerate() {
            out.view_mut((i * d, (i + 1) * d), (d, d)).copy_from(blk);
        }
        for (i, blk) in self.sub.iter().enumerate() {
            out.view_mut(((i + 1) * d, i * d), (d, d)).copy_from(blk);
        }
        out
    }
}

/// Diagonal metric `τ3 ⊗ 1` in the block ordering (all ones for the Schrödinger path).
pub fn tau3_metric(dim: usize, component_dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|k| {
            if component_dim == 2 && k % 2 == 1 {
                -1.0
            } else {
                1.0
            }
        })
        .collect()
}

/// `max |τ3 M† τ3 - M|`.
pub fn pseudo_hermiticity_defect(m: &CMatrix, component_dim: usize) -> f64 {
    let t = tau3_metric(m.nrows(), component_dim);
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let mirrored = m[(j, i)].conj() * t[i] * t[j];
            worst = worst.max((mirrored - m[(i, j)]).norm());
        }
    }
    worst
}

/// Long-range Hamiltonian in the CS basis; produces blocks of `J(E)` at any depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LongRangeOperator {
    pub spec: CsBasisSpec,
    pub lr: LongRangeSpec,
    pub consts: PhysicalConstants,
}

impl LongRangeOperator {
    pub fn new(spec: CsBasisSpec, lr: LongRangeSpec, consts: PhysicalConstants) -> Self {
        Self { spec, lr, consts }
    }

    pub fn block_dim(&self) -> usize {
        self.lr.block_dim()
    }

    /// Scalar pieces `(overlap, kinetic + confinement, Coulomb)` for CS indices `(n, m)`.
    fn scalar_parts(&self, n: usize, m: usize) -> (f64, f64, f64) {
        let (l, b) = (self.spec.l, self.spec.b);
        let s = overlap_element(l, b, n, m);
        let mut u = self.consts.kinetic_factor() * p2_element(l, b, n, m);
        if self.lr.alpha1 != 0.0 {
            u += self.lr.alpha1 * r_element(l, b, n, m);
        }
        if self.lr.alpha2 != 0.0 {
            u += self.lr.alpha2 * r2_element(l, b, n, m);
        }
        let coulomb = if n == m { self.lr.z * self.consts.e2 } else { 0.0 };
        (s, u, coulomb)
    }

    /// Energy measured from the rest energy (`E - mc²`; `E` itself without the rest mass).
    pub fn binding(&self, energy: Complex64) -> Complex64 {
        if self.lr.relativistic {
            energy - self.consts.rest_energy()
        } else {
            energy
        }
    }

    /// Block `(i, j)` of `J(E)`; zero unless `|i - j| <= 1`.
    pub fn block(&self, energy: Complex64, i: usize, j: usize) -> CMatrix {
        self.block_bind(self.binding(energy), i, j)
    }

    /// Block `(i, j)` of `J` at binding energy `e_bind`, keeping `E - mc²` exact.
    pub fn block_bind(&self, e_bind: Complex64, i: usize, j: usize) -> CMatrix {
        let g = self.lr.group_size();
        let cd = self.lr.component_dim();
        let d = g * cd;
        let mut out = CMatrix::zeros(d, d);
        if i.abs_diff(j) > 1 {
            return out;
        }
        let below = e_bind;
        let above = e_bind + 2.0 * self.consts.rest_energy();
        for a in 0..g {
            for a2 in 0..g {
                let (s, u, v) = self.scalar_parts(g * i + a, g * j + a2);
                if s == 0.0 && u == 0.0 && v == 0.0 {
                    continue;
                }
                let (r, col) = (a * cd, a2 * cd);
                if cd == 2 {
                    out[(r, col)] = below * s - u - v;
                    out[(r, col + 1)] = c(-u, 0.0);
                    out[(r + 1, col)] = c(u, 0.0);
                    out[(r + 1, col + 1)] = above * s + u - v;
                } else {
                    out[(r, col)] = e_bind * s - u - v;
                }
            }
        }
        out
    }

    /// Overlap metric in block `(i, j)`, i.e. `∂J/∂E`.
    pub fn overlap_block(&self, i: usize, j: usize) -> CMatrix {
        let g = self.lr.group_size();
        let cd = self.lr.component_dim();
        let mut out = CMatrix::zeros(g * cd, g * cd);
        if i.abs_diff(j) > 1 {
            return out;
        }
        for a in 0..g {
            for a2 in 0..g {
                let s = overlap_element(self.spec.l, self.spec.b, g * i + a, g * j + a2);
                for k in 0..cd {
                    out[(a * cd + k, a2 * cd + k)] = c(s, 0.0);
                }
            }
        }
        out
    }

    pub fn assemble(&self, energy: Complex64, n_blocks: usize) -> Result<BlockTridiag> {
        self.assemble_bind(self.binding(energy), n_blocks)
    }

    pub fn assemble_bind(&self, e_bind: Complex64, n_blocks: usize) -> Result<BlockTridiag> {
        if n_blocks == 0 {
            return Err(Error::DimensionMismatch("at least one block required".into()));
        }
        Ok(BlockTridiag {
            block_dim: self.block_dim(),
            diag: (0..n_blocks).map(|i| self.block_bind(e_bind, i, i)).collect(),
            sup: (1..n_blocks).map(|i| self.block_bind(e_bind, i - 1, i)).collect(),
            sub: (1..n_blocks).map(|i| self.block_bind(e_bind, i, i - 1)).collect(),
        })
    }
}

/// `J(E) = E - H_FV0^(l)` on the first `n_blocks` blocks.
pub fn assemble_j(
    spec: &CsBasisSpec,
    lr: &LongRangeSpec,
    consts: &PhysicalConstants,
    energy: Complex64,
    n_blocks: usize,
) -> Result<BlockTridiag> {
    let lr = LongRangeSpec {
        relativistic: true,
        ..*lr
    };
    LongRangeOperator::new(*spec, lr, *consts).assemble(energy, n_blocks)
}

/// `J(E) = E - (p²/2m + Z e²/r + α1 r + α2 r²)` on the first `n_blocks` blocks.
pub fn assemble_j_schrodinger(
    spec: &CsBasisSpec,
    lr: &LongRangeSpec,
    consts: &PhysicalConstants,
    energy: Complex64,
    n_blocks: usize,
) -> Result<BlockTridiag> {
    let lr = LongRangeSpec {
        relativistic: false,
        ..*lr
    };
    LongRangeOperator::new(*spec, lr, *consts).assemble(energy, n_blocks)
}

/// Dense scalar matrix of `p²/2m + α1 r + α2 r²` on `size` CS functions.
pub fn scalar_kinetic_confinement(
    spec: &CsBasisSpec,
    lr: &LongRangeSpec,
    consts: &PhysicalConstants,
    size: usize,
) -> DMatrix<f64> {
    let op = LongRangeOperator::new(*spec, *lr, *consts);
    DMatrix::from_fn(size, size, |n, m| op.scalar_parts(n, m).1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(l: u32, b: f64) -> CsBasisSpec {
        CsBasisSpec::with_scale(l, b).unwrap()
    }

    #[test]
    fn tau_identities() {
        let t = tau_structure();
        let k = &t.tau3_plus_i_tau2;
        assert_eq!(k, &(&t.tau3 + &t.tau2 * c(0.0, 1.0)));
        assert!((k * k).iter().all(|z| z.norm() == 0.0));
        assert_eq!(&t.tau3 * &t.tau3, CMatrix::identity(2, 2));
        let mirrored = &t.tau3 * k * &t.tau3;
        assert_eq!(mirrored, k.adjoint());
        assert_eq!(
            mirrored,
            CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)])
        );
    }

    #[test]
    fn free_leading_block() {
        let consts = PhysicalConstants::default();
        let mc2 = consts.rest_energy();
        let e = c(mc2 + 0.3, 0.0);
        let j = assemble_j(&spec(0, 1.0), &LongRangeSpec::coulomb(0.0, true), &consts, e, 2).unwrap();
        let b = &j.diag[0];
        assert!((b[(0, 0)] - c(0.3 - 0.5, 0.0)).norm() < 1e-11);
        assert_eq!(b[(0, 1)], c(-0.5, 0.0));
        assert_eq!(b[(1, 0)], c(0.5, 0.0));
        assert!((b[(1, 1)] - c(2.0 * mc2 + 0.3 + 0.5, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn coulomb_enters_diagonal_identity() {
        let consts = PhysicalConstants::default();
        let e = c(consts.rest_energy() - 0.2, 0.01);
        let s = spec(1, 2.0);
        let with = assemble_j(&s, &LongRangeSpec::coulomb(-3.0, true), &consts, e, 4).unwrap();
        let without = assemble_j(&s, &LongRangeSpec::coulomb(0.0, true), &consts, e, 4).unwrap();
        for i in 0..4 {
            let diff = &with.diag[i] - &without.diag[i];
            assert!((diff - CMatrix::identity(2, 2) * c(3.0, 0.0)).norm() < 1e-9);
        }
        for i in 0..3 {
            assert_eq!(with.sup[i], without.sup[i]);
        }
    }

    #[test]
    fn pseudo_hermitian_for_real_energy() {
        let consts = PhysicalConstants::default();
        for lr in [
            LongRangeSpec::coulomb(92.0, true),
            LongRangeSpec { z: -1.0, alpha1: 1.0, alpha2: 0.0, relativistic: true },
            LongRangeSpec { z: -1.0, alpha1: 0.3, alpha2: 0.5, relativistic: true },
            LongRangeSpec { z: -1.0, alpha1: 0.0, alpha2: 0.5, relativistic: false },
        ] {
            let e = c(consts.rest_energy() + 1.7, 0.0);
            let j = LongRangeOperator::new(spec(0, 8.0), lr, consts).assemble(e, 12).unwrap().to_dense();
            let defect = pseudo_hermiticity_defect(&j, lr.component_dim());
            let scale = crate::linalg::max_abs(&j);
            assert!(defect < 1e-13 * scale, "{lr:?}: {defect} vs {scale}");
        }
    }

    #[test]
    fn confinement_groups_into_tridiagonal_blocks() {
        let consts = PhysicalConstants::default();
        let lr = LongRangeSpec { z: -1.0, alpha1: 1.0, alpha2: 0.5, relativistic: false };
        let s = spec(0, 1.0);
        // full scalar septa-diagonal matrix vs its block-tridiagonal grouping
        let size = 18;
        let dense = scalar_kinetic_confinement(&s, &lr, &consts, size);
        for i in 0..size {
            for j in 0..size {
                if i.abs_diff(j) > 3 {
                    assert_eq!(dense[(i, j)], 0.0);
                }
                if (i / 3).abs_diff(j / 3) >= 2 {
                    assert_eq!(dense[(i, j)], 0.0);
                }
            }
        }
        assert!(dense[(0, 3)] != 0.0);
        let j = assemble_j_schrodinger(&s, &lr, &consts, c(0.0, 0.0), 6).unwrap().to_dense();
        for i in 0..size {
            for k in 0..size {
                let v = dense[(i, k)];
                assert!((j[(i, k)] + c(v, 0.0) + if i == k { c(-1.0, 0.0) } else { c(0.0, 0.0) }).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn block_dims() {
        assert_eq!(LongRangeSpec::coulomb(1.0, true).block_dim(), 2);
        assert_eq!(LongRangeSpec::coulomb(1.0, false).block_dim(), 1);
        let conf = LongRangeSpec { z: 0.0, alpha1: 0.0, alpha2: 0.5, relativistic: true };
        assert_eq!(conf.block_dim(), 6);
        assert_eq!(LongRangeSpec { relativistic: false, ..conf }.block_dim(), 3);
    }
}
