//! Deterministic report emission: canonical JSON and CSV writers.
//!
//! Every float is rendered with 17 significant digits in scientific form,
//! object keys are sorted, and nothing time- or path-dependent is embedded,
//! so rerunning a command on the same inputs reproduces its outputs byte for
//! byte. Complex numbers appear as `[re, im]` pairs.

use std::fmt::Write as _;

use nalgebra::Complex;
use serde_json::{Map, Value};

use crate::eigen::Matching;
use crate::integrate::Trajectory;
use crate::monodromy::Monodromy;
use crate::orbit::PeriodicOrbit;
use crate::stability::{
    FloquetReport, MarkusYamabeDemo, ProbeReport, SwitchingDemo, TransverseSubspaceReport,
    WaveCheck,
};
use crate::system::AdmissibleSystem;

/// 17-significant-digit scientific rendering; the non-finite values that
/// JSON cannot carry come out as words.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

/// A float as a JSON value; non-finite values become strings.
pub fn jnum(v: f64) -> Value {
    if v.is_finite() {
        Value::from(v)
    } else {
        Value::String(fmt_f64(v))
    }
}

pub fn complex_value(z: Complex<f64>) -> Value {
    Value::Array(vec![jnum(z.re), jnum(z.im)])
}

pub fn complex_list(zs: &[Complex<f64>]) -> Value {
    Value::Array(zs.iter().map(|&z| complex_value(z)).collect())
}

fn float_list(vs: impl IntoIterator<Item = f64>) -> Value {
    Value::Array(vs.into_iter().map(jnum).collect())
}

/// Canonical rendering of a JSON tree: sorted keys, two-space indentation,
/// floats via [`fmt_f64`], trailing newline.
pub fn to_json_string(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, 0, &mut out);
    out.push('\n');
    out
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                out.push_str(&fmt_f64(n.as_f64().unwrap()));
            }
        }
        Value::String(s) => {
            // serde_json's escaping, which is deterministic.
            out.push_str(&Value::String(s.clone()).to_string());
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            let flat = items.iter().all(is_scalar);
            if flat {
                out.push('[');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_value(item, indent, out);
                }
                out.push(']');
            } else {
                out.push_str("[\n");
                for (k, item) in items.iter().enumerate() {
                    pad(indent + 1, out);
                    write_value(item, indent + 1, out);
                    if k + 1 < items.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                pad(indent, out);
                out.push(']');
            }
        }
        Value::Object(m) => {
            if m.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (k, key) in keys.iter().enumerate() {
                pad(indent + 1, out);
                out.push_str(&Value::String((*key).clone()).to_string());
                out.push_str(": ");
                write_value(&m[*key], indent + 1, out);
                if k + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(indent, out);
            out.push('}');
        }
    }
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

fn pad(indent: usize, out: &mut String) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

pub fn obj(entries: Vec<(&str, Value)>) -> Value {
    let mut m = Map::new();
    for (k, v) in entries {
        m.insert(k.to_string(), v);
    }
    Value::Object(m)
}

/// `{period, closure_residual, anchor}` metadata of a located orbit.
pub fn orbit_value(orbit: &PeriodicOrbit) -> Value {
    obj(vec![
        ("period", jnum(orbit.period)),
        ("closure_residual", jnum(orbit.closure_residual)),
        ("anchor", float_list(orbit.anchor.iter().copied())),
    ])
}

fn monodromy_diag_value(m: &Monodromy) -> Value {
    obj(vec![
        ("det", jnum(m.det)),
        ("liouville_det", jnum(m.liouville_det)),
        (
            "liouville_relative_error",
            m.liouville_relative_error.map_or(Value::Null, jnum),
        ),
        ("liouville_floor", jnum(m.liouville_floor)),
        ("rtol", jnum(m.rtol)),
        ("atol", jnum(m.atol)),
    ])
}

fn matching_value(m: &Matching) -> Value {
    obj(vec![
        ("method", Value::String(m.method.to_string())),
        ("max_relative_residual", jnum(m.max_relative_residual)),
        ("residuals", float_list(m.residuals.iter().copied())),
        (
            "pairs",
            Value::Array(m.pairs.iter().map(|&j| Value::from(j as u64)).collect()),
        ),
    ])
}

pub fn floquet_value(r: &FloquetReport) -> Value {
    let transverse: Vec<Value> = r
        .transverse
        .iter()
        .map(|(id, tv)| {
            obj(vec![
                ("node", Value::from(u64::from(id.0))),
                ("multipliers", complex_list(tv)),
                ("stable", Value::Bool(r.transverse_stable[id])),
            ])
        })
        .collect();
    obj(vec![
        ("full", complex_list(&r.full)),
        ("cpg", complex_list(&r.cpg)),
        ("transverse", Value::Array(transverse)),
        (
            "trivial_index",
            r.trivial_index.map_or(Value::Null, |i| Value::from(i as u64)),
        ),
        ("pairing", matching_value(&r.pairing)),
        ("cpg_stable", Value::Bool(r.cpg_stable)),
        ("lift_stable", Value::Bool(r.lift_stable)),
        ("full_monodromy", monodromy_diag_value(&r.full_monodromy)),
        ("cpg_monodromy", monodromy_diag_value(&r.cpg_monodromy)),
    ])
}

pub fn pointwise_value(r: &TransverseSubspaceReport) -> Value {
    let nodes: Vec<Value> = r
        .nodes
        .iter()
        .map(|(id, n)| {
            obj(vec![
                ("node", Value::from(u64::from(id.0))),
                ("max_real", jnum(n.max_real)),
                ("eigenvector_rotation", jnum(n.eigenvector_rotation)),
                (
                    "eigenvalues",
                    Value::Array(n.eigenvalues.iter().map(|ev| complex_list(ev)).collect()),
                ),
            ])
        })
        .collect();
    obj(vec![
        ("times", float_list(r.times.iter().copied())),
        ("nodes", Value::Array(nodes)),
        ("max_real", jnum(r.max_real)),
        ("transversely_stable", Value::Bool(r.transversely_stable)),
    ])
}

pub fn probe_value(r: &ProbeReport) -> Value {
    let outcomes: Vec<Value> = r
        .outcomes
        .iter()
        .map(|o| {
            obj(vec![
                ("delta", jnum(o.delta)),
                ("class", Value::String(o.class.label())),
                ("probe", Value::from(o.probe as u64)),
                ("sup_deviation", jnum(o.sup_deviation)),
                ("sup_cpg", jnum(o.sup_cpg)),
                ("sup_chain", jnum(o.sup_chain)),
                (
                    "error",
                    o.error.as_ref().map_or(Value::Null, |e| Value::String(e.clone())),
                ),
            ])
        })
        .collect();
    obj(vec![
        ("seed", Value::from(r.seed)),
        ("horizon", jnum(r.horizon)),
        ("outcomes", Value::Array(outcomes)),
    ])
}

pub fn wave_value(r: &WaveCheck) -> Value {
    let residuals: Vec<Value> = r
        .residuals
        .iter()
        .map(|(id, v)| {
            obj(vec![("node", Value::from(u64::from(id.0))), ("residual", jnum(*v))])
        })
        .collect();
    obj(vec![
        ("residuals", Value::Array(residuals)),
        ("max_residual", jnum(r.max_residual)),
        ("multiplier_phase_spread", jnum(r.multiplier_phase_spread)),
        ("is_wave", Value::Bool(r.is_wave)),
    ])
}

pub fn markus_yamabe_value(d: &MarkusYamabeDemo) -> Value {
    obj(vec![
        ("samples", Value::from(d.samples as u64)),
        ("max_trace_deviation", jnum(d.max_trace_deviation)),
        ("max_det_deviation", jnum(d.max_det_deviation)),
        ("pointwise_eigenvalues", complex_list(&d.pointwise_eigenvalues)),
        ("max_pointwise_deviation", jnum(d.max_pointwise_deviation)),
        ("pointwise_max_real", jnum(d.pointwise_max_real)),
        ("multipliers", complex_list(&d.multipliers)),
        ("growth_factor", jnum(d.growth_factor)),
        ("expected_growth", jnum(d.expected_growth)),
        ("closed_form_deviation", jnum(d.closed_form_deviation)),
        ("paradox", Value::Bool(d.paradox)),
    ])
}

pub fn switching_value(d: &SwitchingDemo) -> Value {
    obj(vec![
        ("sigma", jnum(d.sigma)),
        ("samples", Value::from(d.samples as u64)),
        ("pointwise_max_real", jnum(d.pointwise_max_real)),
        ("multipliers", complex_list(&d.multipliers)),
        ("product_eigenvalues", complex_list(&d.product_eigenvalues)),
        ("max_multiplier_deviation", jnum(d.max_multiplier_deviation)),
        ("paradox", Value::Bool(d.paradox)),
    ])
}

/// Trajectory samples as CSV with header `t,node<i>_dim<j>,...`, blocks in
/// node-id order.
pub fn trajectory_csv(sys: &AdmissibleSystem, traj: &Trajectory) -> String {
    let mut out = String::from("t");
    for id in sys.net.node_ids() {
        for j in 0..sys.node_dim(id) {
            let _ = write!(out, ",node{id}_dim{j}");
        }
    }
    out.push('\n');
    for (k, &t) in traj.times.iter().enumerate() {
        out.push_str(&fmt_f64(t));
        for v in &traj.states[k] {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

/// All multipliers of a decomposition as CSV rows
/// `magnitude,angle,re,im,source` with source `full`, `cpg`, or
/// `transverse:<node>`.
pub fn multipliers_csv(r: &FloquetReport) -> String {
    let mut out = String::from("magnitude,angle,re,im,source\n");
    let mut row = |z: &Complex<f64>, source: &str| {
        let _ = writeln!(
            out,
            "{},{},{},{},{source}",
            fmt_f64(z.norm()),
            fmt_f64(z.arg()),
            fmt_f64(z.re),
            fmt_f64(z.im)
        );
    };
    for z in &r.full {
        row(z, "full");
    }
    for z in &r.cpg {
        row(z, "cpg");
    }
    for (id, tv) in &r.transverse {
        for z in tv {
            row(z, &format!("transverse:{id}"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_render_with_17_significant_digits() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(0.0), "0.0000000000000000e0");
        assert_eq!(fmt_f64(-0.25), "-2.5000000000000000e-1");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        // Round trip: the rendering pins the exact bit pattern.
        for v in [std::f64::consts::PI, 71.890284548, 1e-300, -0.1] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn canonical_json_sorts_keys_and_is_stable() {
        let v = json!({"b": [1.5, 2], "a": {"y": true, "x": null}, "c": []});
        let s = to_json_string(&v);
        assert_eq!(
            s,
            "{\n  \"a\": {\n    \"x\": null,\n    \"y\": true\n  },\n  \"b\": [1.5000000000000000e0, 2],\n  \"c\": []\n}\n"
        );
        assert_eq!(to_json_string(&v), s);
    }

    #[test]
    fn non_finite_floats_become_strings() {
        let v = jnum(f64::NEG_INFINITY);
        assert_eq!(to_json_string(&v), "\"-inf\"\n");
    }
}
