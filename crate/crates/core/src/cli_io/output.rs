//! Deterministic JSON and CSV artifacts; floats carry 17 significant digits.

use std::fmt::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde_json::{json, Map, Number, Value};

use super::config::{RunConfig, FORMAT_VERSION};
use crate::spectrum_solver::{StateKind, StateResult};

#[derive(Debug, Clone)]
pub struct SolvedSet {
    pub relativistic: bool,
    pub states: Vec<StateResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub relativistic: bool,
    pub e_bind: Complex64,
    pub log_abs_det: Option<f64>,
    pub indicator: Option<Complex64>,
}

/// `x` in scientific notation with 17 significant digits; `nan`/`inf` spelled out.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}").to_lowercase()
    }
}

fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(Number::from_str(&fmt_f64(x)).expect("formatted float is valid JSON"))
    } else {
        Value::Null
    }
}

fn cnum(z: Complex64) -> Value {
    json!({ "re": num(z.re), "im": num(z.im) })
}

fn dynamics_name(rel: bool) -> &'static str {
    if rel {
        "fv0"
    } else {
        "schrodinger"
    }
}

fn state_record(rel: bool, s: &StateResult) -> Value {
    let mut m = Map::new();
    m.insert("dynamics".into(), dynamics_name(rel).into());
    m.insert("kind".into(), serde_json::to_value(s.kind).expect("enum"));
    m.insert("e_total".into(), cnum(s.e_total));
    m.insert("e_bind".into(), cnum(s.e_bind));
    m.insert(
        "particle_sign".into(),
        s.particle_sign.as_i8().map_or(Value::Null, |v| v.into()),
    );
    m.insert("residual".into(), num(s.residual));
    m.insert("converged".into(), s.converged.into());
    m.insert("depth_shift".into(), num(s.depth_shift));
    m.insert("cf_converged".into(), s.cf_converged.into());
    m.insert("cf_change".into(), s.cf_change.map_or(Value::Null, num));
    m.insert("depth_used".into(), s.depth_used.into());
    m.insert("iterations".into(), s.iterations.into());
    m.insert("degenerate".into(), s.degenerate.into());
    m.insert(
        "coefficients".into(),
        Value::Array(s.coefficients.iter().map(|z| json!([num(z.re), num(z.im)])).collect()),
    );
    Value::Object(m)
}

/// The `states.json` document. With both dynamics, bound states are paired in
/// order and their relativistic shifts listed.
pub fn states_json(cfg: &RunConfig, sets: &[SolvedSet]) -> String {
    let mut root = Map::new();
    root.insert("format_version".into(), FORMAT_VERSION.into());
    let converged = sets.iter().all(|s| s.states.iter().all(|st| st.converged));
    root.insert("converged".into(), converged.into());
    root.insert("config".into(), cfg.render().into());
    let records: Vec<Value> = sets
        .iter()
        .flat_map(|set| set.states.iter().map(move |s| state_record(set.relativistic, s)))
        .collect();
    root.insert("states".into(), Value::Array(records));
    let sch = sets.iter().find(|s| !s.relativistic);
    let fv = sets.iter().find(|s| s.relativistic);
    if let (Some(sch), Some(fv)) = (sch, fv) {
        let pairs: Vec<Value> = sch
            .states
            .iter()
            .zip(&fv.states)
            .filter(|(a, b)| a.kind == b.kind && a.kind == StateKind::Bound)
            .map(|(a, b)| {
                json!({
                    "schrodinger": num(a.e_bind.re),
                    "fv0": num(b.e_bind.re),
                    "shift": num(b.e_bind.re - a.e_bind.re),
                })
            })
            .collect();
        root.insert("pairs".into(), Value::Array(pairs));
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(root)).expect("json");
    text.push('\n');
    text
}

pub fn scan_csv(rows: &[ScanRow]) -> String {
    let mut out = String::from("dynamics,e_bind_re,e_bind_im,log_abs_det,indicator_re,indicator_im\n");
    for r in rows {
        let (la, ire, iim) = match (r.log_abs_det, r.indicator) {
            (Some(la), Some(z)) => (fmt_f64(la), fmt_f64(z.re), fmt_f64(z.im)),
            _ => ("nan".into(), "nan".into(), "nan".into()),
        };
        writeln!(
            out,
            "{},{},{},{la},{ire},{iim}",
            dynamics_name(r.relativistic),
            fmt_f64(r.e_bind.re),
            fmt_f64(r.e_bind.im)
        )
        .unwrap();
    }
    out
}

/// Nonzero entries `operator,n,m,value` of each named matrix.
pub fn elements_csv(mats: &[(String, DMatrix<f64>)]) -> String {
    let mut out = String::from("operator,n,m,value\n");
    for (name, m) in mats {
        for n in 0..m.nrows() {
            for k in 0..m.ncols() {
                if m[(n, k)] != 0.0 {
                    writeln!(out, "{name},{n},{k},{}", fmt_f64(m[(n, k)])).unwrap();
                }
            }
        }
    }
    out
}

pub fn wavefunction_csv(
    grid: &[f64],
    curves: &[(bool, usize, Vec<Complex64>, Vec<Complex64>)],
) -> String {
    let mut out = String::from("dynamics,state,r,phi_re,phi_im,chi_re,chi_im\n");
    for (rel, idx, phi, chi) in curves {
        for (i, r) in grid.iter().enumerate() {
            let (cre, cim) = chi
                .get(i)
                .map_or(("nan".to_string(), "nan".to_string()), |z| (fmt_f64(z.re), fmt_f64(z.im)));
            writeln!(
                out,
                "{},{idx},{},{},{},{cre},{cim}",
                dynamics_name(*rel),
                fmt_f64(*r),
                fmt_f64(phi[i].re),
                fmt_f64(phi[i].im)
            )
            .unwrap();
        }
    }
    out
}
