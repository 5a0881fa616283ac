//! Potential models and the CS representation of their short-range parts.
//!
//! The vector potential `V` and the scalar potential `U` split into a long-range
//! part (`Z e²/r` and `α1 r + α2 r²`, handled exactly by the continued fraction)
//! and short-range terms that are represented on a finite CS basis. The short-range
//! matrix is built with the invert-truncate-invert scheme: represent the potential
//! on `n_big` functions, invert, keep the leading block and invert back.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cs_basis::{quadrature_matrix, CsBasisSpec};
use crate::error::{Error, Result};
use crate::fv_operator::{LongRangeSpec, PhysicalConstants};
use crate::linalg::{c, CMatrix};

/// Condition numbers above this disable the low-rank scheme.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShortForm {
    /// `exp(-μr)/r`
    Yukawa,
    /// `exp(-μr)`
    Exponential,
    /// `exp(-μr²)`
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShortTerm {
    pub amplitude: f64,
    pub form: ShortForm,
    pub mu: f64,
}

impl ShortTerm {
    pub fn new(amplitude: f64, form: ShortForm, mu: f64) -> Self {
        Self { amplitude, form, mu }
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.amplitude
            * match self.form {
                ShortForm::Yukawa => (-self.mu * r).exp() / r,
                ShortForm::Exponential => (-self.mu * r).exp(),
                ShortForm::Gaussian => (-self.mu * r * r).exp(),
            }
    }
}

/// Which potential the `v0_short` terms describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarKind {
    /// The terms are `U` directly.
    #[default]
    U,
    /// The terms are the scalar potential `S`; `U = S + S²/2mc²`.
    S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialModel {
    pub z: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub v4_short: Vec<ShortTerm>,
    pub v0_short: Vec<ShortTerm>,
    pub scalar_kind: ScalarKind,
}

impl Default for PotentialModel {
    fn default() -> Self {
        Self {
            z: 0.0,
            alpha1: 0.0,
            alpha2: 0.0,
            v4_short: Vec::new(),
            v0_short: Vec::new(),
            scalar_kind: ScalarKind::U,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// Fourth component of the four-potential, no τ structure.
    Vector,
    /// Scalar channel, enters with `τ3 + iτ2`.
    Scalar,
}

impl PotentialModel {
    pub fn validate(&self) -> Result<()> {
        self.long_range(true).validate()?;
        for (name, terms) in [("vector", &self.v4_short), ("scalar", &self.v0_short)] {
            for (i, t) in terms.iter().enumerate() {
                if !(t.mu.is_finite() && t.mu > 0.0) {
                    return Err(Error::Config(format!(
                        "potential.{name}[{i}].mu must be positive, got {}",
                        t.mu
                    )));
                }
                if !t.amplitude.is_finite() {
                    return Err(Error::Config(format!(
                        "potential.{name}[{i}].amplitude must be finite"
                    )));
                }
            }
        }
        if self.scalar_kind == ScalarKind::S && (self.alpha1 != 0.0 || self.alpha2 != 0.0) {
            return Err(Error::Config(
                "potential.scalar_kind = \"s\" requires alpha1 = alpha2 = 0".into(),
            ));
        }
        Ok(())
    }

    pub fn long_range(&self, relativistic: bool) -> LongRangeSpec {
        LongRangeSpec {
            z: self.z,
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            relativistic,
        }
    }

    fn terms(&self, channel: Channel) -> &[ShortTerm] {
        match channel {
            Channel::Vector => &self.v4_short,
            Channel::Scalar => &self.v0_short,
        }
    }

    /// Short-range part of a channel at `r`.
    pub fn short_value(&self, channel: Channel, consts: &PhysicalConstants, r: f64) -> f64 {
        let v: f64 = self.terms(channel).iter().map(|t| t.eval(r)).sum();
        if channel == Channel::Scalar && self.scalar_kind == ScalarKind::S {
            v + v * v / (2.0 * consts.rest_energy())
        } else {
            v
        }
    }

    pub fn has_short(&self, channel: Channel) -> bool {
        !self.terms(channel).is_empty()
    }
}

/// CS matrix of one channel's short-range potential on `size` functions.
pub fn short_range_matrix_raw(
    model: &PotentialModel,
    consts: &PhysicalConstants,
    spec: &CsBasisSpec,
    size: usize,
    channel: Channel,
) -> Result<DMatrix<f64>> {
    if !model.has_short(channel) {
        return Ok(DMatrix::zeros(size, size));
    }
    quadrature_matrix(spec, size, &|r| model.short_value(channel, consts, r))
}

/// Result of the invert-truncate-invert step.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRank {
    pub w: DMatrix<f64>,
    /// False when the conditioning guard fell back to plain truncation.
    pub inverted: bool,
    pub condition: f64,
}

/// `W = ((raw_big)^-1 truncated to n_short)^-1`.
pub fn low_rank_representation(raw_big: &DMatrix<f64>, n_short: usize) -> Result<LowRank> {
    let n_big = raw_big.nrows();
    if n_short > n_big || raw_big.ncols() != n_big {
        return Err(Error::DimensionMismatch(format!(
            "n_short {n_short} vs raw matrix {}x{}",
            raw_big.nrows(),
            raw_big.ncols()
        )));
    }
    if raw_big.amax() == 0.0 {
        return Err(Error::DegeneratePotential("identically zero potential matrix".into()));
    }
    let truncated = raw_big.view((0, 0), (n_short, n_short)).into_owned();
    if n_short == n_big {
        return Ok(LowRank {
            w: truncated,
            inverted: false,
            condition: 1.0,
        });
    }
    let sv = raw_big.clone().svd(false, false).singular_values;
    let condition = sv.max() / sv.min();
    if !(condition < MAX_CONDITION) {
        log::warn!(
            "short-range matrix condition {condition:.3e} exceeds {MAX_CONDITION:.0e}; using plain truncation"
        );
        return Ok(LowRank {
            w: truncated,
            inverted: false,
            condition,
        });
    }
    let inv = raw_big
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::DegeneratePotential("singular potential matrix".into()))?;
    let w = inv
        .view((0, 0), (n_short, n_short))
        .into_owned()
        .try_inverse()
        .ok_or_else(|| Error::DegeneratePotential("singular truncated inverse".into()))?;
    let w = (&w + w.transpose()) * 0.5;
    Ok(LowRank {
        w,
        inverted: true,
        condition,
    })
}

/// Short-range Hamiltonian on the truncated space, in the block ordering of `J`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortRangeMatrix {
    /// Number of CS functions carrying the potential.
    pub rank: usize,
    pub component_dim: usize,
    pub dense_block: CMatrix,
}

impl ShortRangeMatrix {
    pub fn zero(rank: usize, component_dim: usize, dim: usize) -> Self {
        Self {
            rank,
            component_dim,
            dense_block: CMatrix::zeros(dim, dim),
        }
    }

    /// Adds `structure ⊗ w`, with `structure` a `component_dim` square pattern.
    pub fn add_channel(&mut self, w: &DMatrix<f64>, structure: &[[f64; 2]; 2]) {
        let cd = self.component_dim;
        for n in 0..w.nrows() {
            for m in 0..w.ncols() {
                for a in 0..cd {
                    for a2 in 0..cd {
                        let s = structure[a][a2];
                        if s != 0.0 {
                            self.dense_block[(n * cd + a, m * cd + a2)] += c(s * w[(n, m)], 0.0);
                        }
                    }
                }
            }
        }
    }
}

pub const IDENTITY_STRUCTURE: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 1.0]];
pub const SCALAR_STRUCTURE: [[f64; 2]; 2] = [[1.0, 1.0], [-1.0, -1.0]];

/// Short-range Hamiltonian with `rank` CS functions embedded in a bracket of
/// dimension `dim`. Vector terms enter as `1 ⊗ W4`, scalar terms as
/// `(τ3 + iτ2) ⊗ W0`; the Schrödinger path uses `W` of `V + U`.
pub fn build_short_range(
    model: &PotentialModel,
    consts: &PhysicalConstants,
    spec: &CsBasisSpec,
    relativistic: bool,
    rank: usize,
    dim: usize,
) -> Result<ShortRangeMatrix> {
    let n_big = spec.n_big.max(rank);
    let cd = if relativistic { 2 } else { 1 };
    let mut out = ShortRangeMatrix::zero(rank, cd, dim);
    let mut channel = |raw: DMatrix<f64>, structure: &[[f64; 2]; 2]| -> Result<()> {
        match low_rank_representation(&raw, rank) {
            Ok(lr) => {
                out.add_channel(&lr.w, structure);
                Ok(())
            }
            Err(Error::DegeneratePotential(msg)) => {
                log::info!("short-range channel omitted: {msg}");
                Ok(())
            }
            Err(e) => Err(e),
        }
    };
    let v4 = short_range_matrix_raw(model, consts, spec, n_big, Channel::Vector)?;
    let v0 = short_range_matrix_raw(model, consts, spec, n_big, Channel::Scalar)?;
    if relativistic {
        channel(v4, &IDENTITY_STRUCTURE)?;
        channel(v0, &SCALAR_STRUCTURE)?;
    } else {
        channel(v4 + v0, &IDENTITY_STRUCTURE)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn screened_model() -> PotentialModel {
        PotentialModel {
            z: 92.0,
            v4_short: vec![
                ShortTerm::new(-240.0, ShortForm::Yukawa, 1.0),
                ShortTerm::new(320.0, ShortForm::Yukawa, 4.0),
            ],
            ..PotentialModel::default()
        }
    }

    #[test]
    fn zero_potential_is_zero_matrix_and_degenerate() {
        let spec = CsBasisSpec::with_scale(0, 1.0).unwrap();
        let k = PhysicalConstants::default();
        let raw =
            short_range_matrix_raw(&PotentialModel::default(), &k, &spec, 6, Channel::Vector).unwrap();
        assert_eq!(raw, DMatrix::zeros(6, 6));
        assert!(matches!(
            low_rank_representation(&raw, 3),
            Err(Error::DegeneratePotential(_))
        ));
    }

    #[test]
    fn coulomb_like_term_is_identity() {
        let spec = CsBasisSpec::with_scale(2, 3.0).unwrap();
        let raw = quadrature_matrix(&spec, 10, &|r| 1.0 / r).unwrap();
        assert!((raw - DMatrix::<f64>::identity(10, 10)).amax() < 1e-12);
    }

    #[test]
    fn low_rank_trivial_cases() {
        let m = DMatrix::from_fn(5, 5, |i, j| 1.0 / (1.0 + i as f64 + j as f64) + if i == j { 1.0 } else { 0.0 });
        assert_eq!(low_rank_representation(&m, 5).unwrap().w, m);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -2.0, 3.0, 0.5]));
        let w = low_rank_representation(&d, 2).unwrap();
        assert!(w.inverted);
        assert!((w.w - d.view((0, 0), (2, 2))).amax() < 1e-15);
    }

    #[test]
    fn screened_potential_element_is_stable() {
        let spec = CsBasisSpec::with_scale(0, 8.0).unwrap();
        let k = PhysicalConstants::default();
        let model = screened_model();
        let raw = short_range_matrix_raw(&model, &k, &spec, 4, Channel::Vector).unwrap();
        let direct = crate::cs_basis::quadrature_element(&spec, 0, 0, |r| {
            -240.0 * (-r).exp() / r + 320.0 * (-4.0 * r).exp() / r
        })
        .unwrap();
        assert!((raw[(0, 0)] - direct).abs() < 1e-12 * direct.abs().max(1.0));
    }

    #[test]
    fn channel_placement() {
        let spec = CsBasisSpec::new(0, 2.0, 4, 16, 100).unwrap();
        let k = PhysicalConstants::default();
        let term = vec![ShortTerm::new(-3.0, ShortForm::Exponential, 1.5)];
        let vector = PotentialModel { v4_short: term.clone(), ..Default::default() };
        let scalar = PotentialModel { v0_short: term, ..Default::default() };
        let hv = build_short_range(&vector, &k, &spec, true, 4, 8).unwrap().dense_block;
        let hs = build_short_range(&scalar, &k, &spec, true, 4, 8).unwrap().dense_block;
        for n in 0..4 {
            for m in 0..4 {
                let w = hv[(2 * n, 2 * m)];
                assert_eq!(hv[(2 * n + 1, 2 * m + 1)], w);
                assert_eq!(hv[(2 * n, 2 * m + 1)], c(0.0, 0.0));
                assert_eq!(hv[(2 * n + 1, 2 * m)], c(0.0, 0.0));
                let w0 = hs[(2 * n, 2 * m)];
                assert_eq!(hs[(2 * n, 2 * m + 1)], w0);
                assert_eq!(hs[(2 * n + 1, 2 * m)], -w0);
                assert_eq!(hs[(2 * n + 1, 2 * m + 1)], -w0);
                assert_eq!(w, w0);
            }
        }
        assert!(crate::fv_operator::pseudo_hermiticity_defect(&hs, 2) < 1e-13);
    }

    #[test]
    fn invalid_mu_names_key() {
        let mut m = screened_model();
        m.v4_short[1].mu = -1.0;
        let err = m.validate().unwrap_err();
        assert!(err.to_string().contains("potential.vector[1].mu"));
    }
}
