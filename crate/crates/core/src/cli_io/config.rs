//! Run configuration: TOML text with `[constants]`, `[basis]`, `[potential]` and
//! `[solver]` sections. Every key is optional; unknown keys are rejected.

use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cs_basis::CsBasisSpec;
use crate::error::{Error, Result};
use crate::fv_operator::PhysicalConstants;
use crate::green_cf::{CfOptions, SeedPolicy, DEFAULT_CF_TOLERANCE};
use crate::potentials::{PotentialModel, ScalarKind, ShortTerm};
use crate::spectrum_solver::{default_seed, Problem, SearchMode, SearchWindow, SolveOptions};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    pub constants: ConstantsSection,
    pub basis: BasisSection,
    pub potential: PotentialSection,
    pub solver: SolverSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            constants: ConstantsSection::default(),
            basis: BasisSection::default(),
            potential: PotentialSection::default(),
            solver: SolverSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsSection {
    pub m: f64,
    pub hbar: f64,
    pub c: f64,
    pub e2: f64,
}

impl Default for ConstantsSection {
    fn default() -> Self {
        let k = PhysicalConstants::default();
        Self {
            m: k.m,
            hbar: k.hbar,
            c: k.c,
            e2: k.e2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisSection {
    pub l: u32,
    pub b: f64,
    pub n_short: usize,
    /// Defaults to `4 * n_short`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_big: Option<usize>,
    /// Defaults to 5000 for pure Coulomb problems and 2000 with confinement.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_cf_start: Option<usize>,
}

impl Default for BasisSection {
    fn default() -> Self {
        Self {
            l: 0,
            b: 1.0,
            n_short: 32,
            n_big: None,
            n_cf_start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialSection {
    pub z: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub scalar_kind: ScalarKind,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub vector: Vec<ShortTerm>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub scalar: Vec<ShortTerm>,
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self {
            z: 0.0,
            alpha1: 0.0,
            alpha2: 0.0,
            scalar_kind: ScalarKind::U,
            vector: Vec::new(),
            scalar: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dynamics {
    Fv0,
    Schrodinger,
    Both,
}

impl Dynamics {
    /// `relativistic` flags to run, Schrödinger first.
    pub fn flags(self) -> Vec<bool> {
        match self {
            Dynamics::Fv0 => vec![true],
            Dynamics::Schrodinger => vec![false],
            Dynamics::Both => vec![false, true],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedChoice {
    Auto,
    Zero,
    Tail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub mode: SearchMode,
    pub dynamics: Dynamics,
    /// Search window in binding-energy coordinates.
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    /// Starting points `[re, im]` for the resonance search.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub guesses: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_roots: Option<usize>,
    pub grid_points: usize,
    pub energy_tolerance: f64,
    pub residual_tolerance: f64,
    pub depth_tolerance: f64,
    pub seed: SeedChoice,
    pub cf_tolerance: f64,
    /// Defaults to `4 * n_cf_start`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cf_max_depth: Option<usize>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let opts = SolveOptions::default();
        Self {
            mode: SearchMode::Bound,
            dynamics: Dynamics::Fv0,
            re_min: -10.0,
            re_max: 10.0,
            im_min: -1.0,
            im_max: 0.0,
            guesses: Vec::new(),
            max_roots: None,
            grid_points: opts.grid_points,
            energy_tolerance: opts.energy_tolerance,
            residual_tolerance: opts.residual_tolerance,
            depth_tolerance: opts.depth_tolerance,
            seed: SeedChoice::Auto,
            cf_tolerance: DEFAULT_CF_TOLERANCE,
            cf_max_depth: None,
        }
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{key} must be positive, got {v}")))
    }
}

fn finite(key: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{key} must be finite, got {v}")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses `text` after applying `key=value` overrides (dotted keys, TOML values;
    /// bare words are taken as strings).
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn render(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "format_version {} is not supported (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let k = &self.constants;
        positive("constants.m", k.m)?;
        positive("constants.hbar", k.hbar)?;
        positive("constants.c", k.c)?;
        positive("constants.e2", k.e2)?;
        positive("basis.b", self.basis.b)?;
        if self.basis.n_short == 0 {
            return Err(Error::Config("basis.n_short must be positive".into()));
        }
        if self.n_big() < self.basis.n_short {
            return Err(Error::Config(format!(
                "basis.n_big ({}) must be at least basis.n_short ({})",
                self.n_big(),
                self.basis.n_short
            )));
        }
        if self.n_cf_start() <= self.n_big() {
            return Err(Error::Config(format!(
                "basis.n_cf_start ({}) must exceed basis.n_big ({})",
                self.n_cf_start(),
                self.n_big()
            )));
        }
        let p = &self.potential;
        finite("potential.z", p.z)?;
        for (key, v) in [("potential.alpha1", p.alpha1), ("potential.alpha2", p.alpha2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{key} must be >= 0, got {v}")));
            }
        }
        self.model().validate()?;
        let s = &self.solver;
        for (key, v) in [
            ("solver.re_min", s.re_min),
            ("solver.re_max", s.re_max),
            ("solver.im_min", s.im_min),
            ("solver.im_max", s.im_max),
        ] {
            finite(key, v)?;
        }
        if s.re_min >= s.re_max {
            return Err(Error::Config("solver.re_min must be below solver.re_max".into()));
        }
        if s.im_max > 0.0 {
            return Err(Error::Config("solver.im_max must be <= 0".into()));
        }
        if s.im_min > s.im_max {
            return Err(Error::Config("solver.im_min must not exceed solver.im_max".into()));
        }
        for (i, g) in s.guesses.iter().enumerate() {
            if !(g[0].is_finite() && g[1].is_finite()) {
                return Err(Error::Config(format!("solver.guesses[{i}] must be finite")));
            }
        }
        if s.grid_points < 2 {
            return Err(Error::Config("solver.grid_points must be at least 2".into()));
        }
        positive("solver.energy_tolerance", s.energy_tolerance)?;
        positive("solver.residual_tolerance", s.residual_tolerance)?;
        positive("solver.depth_tolerance", s.depth_tolerance)?;
        positive("solver.cf_tolerance", s.cf_tolerance)?;
        if s.seed == SeedChoice::Tail && self.is_confining() {
            return Err(Error::Config(
                "solver.seed = \"tail\" requires potential.alpha1 = potential.alpha2 = 0".into(),
            ));
        }
        if self.cf_max_depth() < self.n_cf_start() {
            return Err(Error::Config("solver.cf_max_depth must be at least basis.n_cf_start".into()));
        }
        Ok(())
    }

    fn is_confining(&self) -> bool {
        self.potential.alpha1 != 0.0 || self.potential.alpha2 != 0.0
    }

    pub fn n_big(&self) -> usize {
        self.basis.n_big.unwrap_or(4 * self.basis.n_short)
    }

    pub fn n_cf_start(&self) -> usize {
        self.basis
            .n_cf_start
            .unwrap_or(if self.is_confining() { 2000 } else { 5000 })
    }

    pub fn cf_max_depth(&self) -> usize {
        self.solver.cf_max_depth.unwrap_or(4 * self.n_cf_start())
    }

    pub fn constants(&self) -> PhysicalConstants {
        PhysicalConstants {
            m: self.constants.m,
            hbar: self.constants.hbar,
            c: self.constants.c,
            e2: self.constants.e2,
        }
    }

    pub fn spec(&self) -> Result<CsBasisSpec> {
        CsBasisSpec::new(
            self.basis.l,
            self.basis.b,
            self.basis.n_short,
            self.n_big(),
            self.n_cf_start(),
        )
    }

    pub fn model(&self) -> PotentialModel {
        PotentialModel {
            z: self.potential.z,
            alpha1: self.potential.alpha1,
            alpha2: self.potential.alpha2,
            v4_short: self.potential.vector.clone(),
            v0_short: self.potential.scalar.clone(),
            scalar_kind: self.potential.scalar_kind,
        }
    }

    pub fn cf_options(&self) -> CfOptions {
        let seed = match self.solver.seed {
            SeedChoice::Auto => default_seed(&self.model()),
            SeedChoice::Zero => SeedPolicy::Zero,
            SeedChoice::Tail => SeedPolicy::CoulombTail,
        };
        CfOptions {
            seed,
            tolerance: self.solver.cf_tolerance,
            max_depth: self.cf_max_depth(),
            diagnose: true,
        }
    }

    pub fn problem(&self, relativistic: bool) -> Result<Problem> {
        Problem::new(
            self.spec()?,
            self.model(),
            self.constants(),
            relativistic,
            self.cf_options(),
        )
    }

    pub fn window(&self) -> SearchWindow {
        let s = &self.solver;
        SearchWindow {
            re_min: s.re_min,
            re_max: s.re_max,
            im_min: s.im_min,
            im_max: s.im_max,
            initial_guesses: s.guesses.iter().map(|g| Complex64::new(g[0], g[1])).collect(),
            max_roots: s.max_roots.unwrap_or(usize::MAX),
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        let s = &self.solver;
        SolveOptions {
            grid_points: s.grid_points,
            energy_tolerance: s.energy_tolerance,
            residual_tolerance: s.residual_tolerance,
            depth_tolerance: s.depth_tolerance,
            ..SolveOptions::default()
        }
    }
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{item}` is not of the form key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = toml::Table::from_str(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override key `{key}` is malformed")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override key `{key}`: `{part}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Reference configuration with every default spelled out.
pub fn reference_config() -> String {
    let mut cfg = RunConfig::default();
    cfg.basis.n_big = Some(cfg.n_big());
    cfg.basis.n_cf_start = Some(cfg.n_cf_start());
    cfg.solver.cf_max_depth = Some(cfg.cf_max_depth());
    cfg.render()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_default() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.solver.mode, SearchMode::Bound);
        assert_eq!(cfg.potential.z, 0.0);
    }

    #[test]
    fn negative_b_names_key() {
        let err = RunConfig::parse("[basis]\nb = -1.0\n").unwrap_err();
        assert!(err.to_string().contains("basis.b"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let err = RunConfig::parse("[basis]\nbee = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("bee"), "{err}");
        assert!(RunConfig::parse("[extra]\n").is_err());
    }

    #[test]
    fn parse_error_has_position() {
        let err = RunConfig::parse("[basis]\nb = = 1\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn overrides() {
        let cfg = RunConfig::parse_with_overrides(
            "[basis]\nb = 2.0\n",
            &["basis.b=8".into(), "solver.mode=resonance".into(), "potential.z=-1".into()],
        )
        .unwrap();
        assert_eq!(cfg.basis.b, 8.0);
        assert_eq!(cfg.solver.mode, SearchMode::Resonance);
        assert_eq!(cfg.potential.z, -1.0);
        assert!(RunConfig::parse_with_overrides("", &["basis.b".into()]).is_err());
    }

    #[test]
    fn render_round_trip() {
        let text = r#"
[basis]
l = 0
b = 8.0
n_short = 32

[potential]
z = 92.0

[[potential.vector]]
amplitude = -240.0
form = "yukawa"
mu = 1.0

[[potential.vector]]
amplitude = 320.0
form = "yukawa"
mu = 4.0

[solver]
mode = "both"
dynamics = "both"
guesses = [[15.6, -0.001]]
"#;
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.potential.vector.len(), 2);
        assert_eq!(RunConfig::parse(&cfg.render()).unwrap(), cfg);
        assert_eq!(RunConfig::parse(&reference_config()).unwrap().n_big(), 128);
    }

    #[test]
    fn tail_seed_with_confinement_rejected() {
        let err = RunConfig::parse("[potential]\nalpha1 = 1.0\n[solver]\nseed = \"tail\"\n").unwrap_err();
        assert!(err.to_string().contains("solver.seed"));
    }
}
