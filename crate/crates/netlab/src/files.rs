//! JSON input formats: networks, lift specs, phase-lift specs, model
//! bundles, and parameter sets.
//!
//! A network file is an object with `nodes` (id, node_type, state_type,
//! state_dim) and `arrows` (id, arrow_type, head, tail), plus optional
//! `colouring` (id-string to colour), `cpg` (node-id list) and `phases`
//! (order, id-string to `num/den`, representatives). The optional keys are
//! round-tripped by [`network_value`], so the output of one command can feed
//! the next.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::lift::{Addition, LiftSpec, TailPolicy};
use crate::model::{builtin, NodeModel, Params};
use crate::network::{Arrow, Colouring, Network, NodeDecl, NodeId};
use crate::phase::{Automorphism, Phase, PhaseAssignment};
use crate::report::{jnum, obj};

#[derive(Deserialize)]
struct NodeJson {
    id: u32,
    node_type: String,
    state_type: String,
    state_dim: usize,
}

#[derive(Deserialize)]
struct ArrowJson {
    id: u32,
    arrow_type: String,
    head: u32,
    tail: u32,
}

#[derive(Deserialize)]
struct PhasesJson {
    order: u32,
    of: BTreeMap<String, String>,
    representatives: BTreeMap<String, u32>,
}

#[derive(Deserialize)]
struct NetworkJson {
    nodes: Vec<NodeJson>,
    arrows: Vec<ArrowJson>,
    colouring: Option<BTreeMap<String, String>>,
    cpg: Option<Vec<u32>>,
    phases: Option<PhasesJson>,
}

/// A parsed network file with its optional annotations.
pub struct NetworkFile {
    pub net: Network,
    pub colouring: Option<Colouring>,
    pub cpg: Option<Vec<NodeId>>,
    pub phases: Option<PhaseAssignment>,
}

fn parse_node_key(key: &str) -> Result<NodeId> {
    key.parse::<u32>()
        .map(NodeId)
        .map_err(|_| Error::InvalidNetwork(format!("node key \"{key}\" is not an integer id")))
}

fn parse_phase(text: &str) -> Result<Phase> {
    let bad = || Error::PhaseLift(format!("phase \"{text}\" is not of the form num/den"));
    let (num, den) = text.split_once('/').ok_or_else(bad)?;
    let num: u32 = num.trim().parse().map_err(|_| bad())?;
    let den: u32 = den.trim().parse().map_err(|_| bad())?;
    if den == 0 {
        return Err(bad());
    }
    Ok(Phase::new(num, den))
}

pub fn parse_network(text: &str) -> Result<NetworkFile> {
    let raw: NetworkJson = serde_json::from_str(text)?;
    let nodes = raw
        .nodes
        .into_iter()
        .map(|n| NodeDecl {
            id: NodeId(n.id),
            node_type: n.node_type,
            state_type: n.state_type,
            state_dim: n.state_dim,
        })
        .collect();
    let arrows = raw
        .arrows
        .into_iter()
        .map(|a| Arrow {
            id: a.id,
            arrow_type: a.arrow_type,
            head: NodeId(a.head),
            tail: NodeId(a.tail),
        })
        .collect();
    let net = Network::new(nodes, arrows);

    let colouring = match raw.colouring {
        None => None,
        Some(m) => {
            let mut kappa = Colouring::new();
            for (key, colour) in m {
                kappa.set(parse_node_key(&key)?, colour);
            }
            Some(kappa)
        }
    };
    let cpg = raw.cpg.map(|ids| ids.into_iter().map(NodeId).collect());
    let phases = match raw.phases {
        None => None,
        Some(p) => {
            let mut phases = BTreeMap::new();
            for (key, text) in &p.of {
                phases.insert(parse_node_key(key)?, parse_phase(text)?);
            }
            let mut reps = BTreeMap::new();
            for (key, rep) in &p.representatives {
                reps.insert(parse_node_key(key)?, NodeId(*rep));
            }
            Some(PhaseAssignment::new(p.order, phases, reps))
        }
    };
    Ok(NetworkFile { net, colouring, cpg, phases })
}

/// JSON tree for a network plus whichever annotations are present.
pub fn network_value(
    net: &Network,
    colouring: Option<&Colouring>,
    cpg: Option<&[NodeId]>,
    phases: Option<&PhaseAssignment>,
) -> Value {
    let nodes: Vec<Value> = net
        .nodes
        .iter()
        .map(|n| {
            obj(vec![
                ("id", Value::from(u64::from(n.id.0))),
                ("node_type", Value::String(n.node_type.clone())),
                ("state_type", Value::String(n.state_type.clone())),
                ("state_dim", Value::from(n.state_dim as u64)),
            ])
        })
        .collect();
    let arrows: Vec<Value> = net
        .arrows
        .iter()
        .map(|a| {
            obj(vec![
                ("id", Value::from(u64::from(a.id))),
                ("arrow_type", Value::String(a.arrow_type.clone())),
                ("head", Value::from(u64::from(a.head.0))),
                ("tail", Value::from(u64::from(a.tail.0))),
            ])
        })
        .collect();
    let mut entries = vec![
        ("nodes", Value::Array(nodes)),
        ("arrows", Value::Array(arrows)),
    ];
    if let Some(kappa) = colouring {
        let m: Vec<(String, Value)> = kappa
            .iter()
            .map(|(id, c)| (id.to_string(), Value::String(c.to_string())))
            .collect();
        entries.push((
            "colouring",
            Value::Object(m.into_iter().collect()),
        ));
    }
    if let Some(ids) = cpg {
        entries.push((
            "cpg",
            Value::Array(ids.iter().map(|id| Value::from(u64::from(id.0))).collect()),
        ));
    }
    if let Some(p) = phases {
        let of: serde_json::Map<String, Value> = p
            .display_map()
            .into_iter()
            .map(|(k, v)| (k, Value::String(v)))
            .collect();
        let reps: serde_json::Map<String, Value> = p
            .iter()
            .filter_map(|(id, _)| {
                p.representative(id)
                    .map(|r| (id.to_string(), Value::from(u64::from(r.0))))
            })
            .collect();
        entries.push((
            "phases",
            obj(vec![
                ("order", Value::from(u64::from(p.order))),
                ("of", Value::Object(of)),
                ("representatives", Value::Object(reps)),
            ]),
        ));
    }
    obj(entries)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PolicyJson {
    Named(String),
    Explicit { tails: Vec<u32> },
}

#[derive(Deserialize)]
struct AdditionJson {
    colour: String,
    policy: PolicyJson,
}

#[derive(Deserialize)]
struct LiftSpecJson {
    cpg: Vec<u32>,
    additions: Vec<AdditionJson>,
}

pub fn parse_lift_spec(text: &str) -> Result<LiftSpec> {
    let raw: LiftSpecJson = serde_json::from_str(text)?;
    let mut additions = Vec::new();
    for (k, a) in raw.additions.into_iter().enumerate() {
        let policy = match a.policy {
            PolicyJson::Named(name) => match name.as_str() {
                "nearest_upstream" => TailPolicy::NearestUpstream,
                "cpg_direct" => TailPolicy::CpgDirect,
                other => {
                    return Err(Error::Lift(format!(
                        "addition {k}: unknown tail policy \"{other}\""
                    )))
                }
            },
            PolicyJson::Explicit { tails } => {
                TailPolicy::Explicit(tails.into_iter().map(NodeId).collect())
            }
        };
        additions.push(Addition { colour: a.colour, policy });
    }
    Ok(LiftSpec {
        cpg: raw.cpg.into_iter().map(NodeId).collect(),
        additions,
    })
}

/// A parsed phase-lift specification.
pub struct PhaseSpec {
    pub alpha: Automorphism,
    pub module: Vec<NodeId>,
    pub copies: u32,
    pub rewire_internal: bool,
}

#[derive(Deserialize)]
struct PhaseSpecJson {
    alpha: BTreeMap<String, u32>,
    order: u32,
    module: Vec<u32>,
    copies: u32,
    #[serde(default)]
    rewire_internal: bool,
}

pub fn parse_phase_spec(text: &str) -> Result<PhaseSpec> {
    let raw: PhaseSpecJson = serde_json::from_str(text)?;
    let mut map = BTreeMap::new();
    for (key, image) in &raw.alpha {
        map.insert(parse_node_key(key)?, NodeId(*image));
    }
    Ok(PhaseSpec {
        alpha: Automorphism { map, order: raw.order },
        module: raw.module.into_iter().map(NodeId).collect(),
        copies: raw.copies,
        rewire_internal: raw.rewire_internal,
    })
}

#[derive(Deserialize)]
struct ModelEntryJson {
    name: String,
    expr: Option<String>,
}

#[derive(Deserialize)]
struct ModelFileJson {
    models: BTreeMap<String, ModelEntryJson>,
    initial_state: Option<Vec<f64>>,
    transient: Option<f64>,
    max_time: Option<f64>,
    min_samples: Option<usize>,
    declared_period: Option<f64>,
}

/// A parsed model bundle: one built-in model per node type, plus optional
/// orbit-search settings. `declared_period` switches the orbit stage from
/// searching to integrating the given initial state over a known period
/// (the route for forced/non-autonomous systems).
pub struct ModelFile {
    pub models: BTreeMap<String, Arc<NodeModel>>,
    pub initial_state: Option<Vec<f64>>,
    pub transient: Option<f64>,
    pub max_time: Option<f64>,
    pub min_samples: Option<usize>,
    pub declared_period: Option<f64>,
}

pub fn parse_models(text: &str) -> Result<ModelFile> {
    let raw: ModelFileJson = serde_json::from_str(text)?;
    let mut models = BTreeMap::new();
    for (node_type, entry) in raw.models {
        models.insert(node_type, builtin(&entry.name, entry.expr.as_deref())?);
    }
    Ok(ModelFile {
        models,
        initial_state: raw.initial_state,
        transient: raw.transient,
        max_time: raw.max_time,
        min_samples: raw.min_samples,
        declared_period: raw.declared_period,
    })
}

pub fn parse_params(text: &str) -> Result<Params> {
    let raw: BTreeMap<String, f64> = serde_json::from_str(text)?;
    Ok(Params::from_pairs(raw))
}

/// Params as a JSON tree (for echoing resolved inputs into reports).
pub fn params_value(p: &Params) -> Value {
    obj(p.iter().map(|(k, v)| (k, jnum(v))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::report::to_json_string;

    #[test]
    fn network_files_round_trip() {
        let net = fixtures::fig1_network();
        let kappa = fixtures::fig1_colouring();
        let v = network_value(&net, Some(&kappa), Some(&[NodeId(1), NodeId(2), NodeId(3)]), None);
        let text = to_json_string(&v);
        let parsed = parse_network(&text).unwrap();
        assert_eq!(parsed.net, net);
        assert_eq!(parsed.colouring.as_ref().unwrap().classes(), kappa.classes());
        assert_eq!(parsed.cpg.unwrap(), vec![NodeId(1), NodeId(2), NodeId(3)]);
        assert!(parsed.phases.is_none());
        // Canonical output is a fixed point of parse -> serialize.
        let again = to_json_string(&network_value(
            &parsed.net,
            parsed.colouring.as_ref(),
            Some(&[NodeId(1), NodeId(2), NodeId(3)]),
            None,
        ));
        assert_eq!(text, again);
    }

    #[test]
    fn phases_round_trip() {
        let alpha = Automorphism { map: fixtures::ring3_shift(), order: 3 };
        let pl = crate::phase::build_phase_lift(
            &fixtures::ring3_network(),
            &alpha,
            &[NodeId(1)],
            4,
            false,
        )
        .unwrap();
        let v = network_value(
            &pl.lift.net,
            Some(&pl.lift.colouring),
            Some(&pl.lift.cpg_nodes),
            Some(&pl.phases),
        );
        let parsed = parse_network(&to_json_string(&v)).unwrap();
        let phases = parsed.phases.unwrap();
        assert_eq!(phases.order, 3);
        for (id, p) in pl.phases.iter() {
            assert_eq!(phases.phase(id), Some(p));
            assert_eq!(phases.representative(id), pl.phases.representative(id));
        }
    }

    #[test]
    fn lift_spec_policies_parse() {
        let spec = parse_lift_spec(
            r#"{"cpg": [1, 2, 3], "additions": [
                {"colour": "W", "policy": "nearest_upstream"},
                {"colour": "G", "policy": "cpg_direct"},
                {"colour": "B", "policy": {"tails": [3]}}
            ]}"#,
        )
        .unwrap();
        assert_eq!(spec.cpg, vec![NodeId(1), NodeId(2), NodeId(3)]);
        assert_eq!(spec.additions[0].policy, TailPolicy::NearestUpstream);
        assert_eq!(spec.additions[1].policy, TailPolicy::CpgDirect);
        assert_eq!(spec.additions[2].policy, TailPolicy::Explicit(vec![NodeId(3)]));
        assert!(parse_lift_spec(r#"{"cpg": [], "additions": [{"colour": "W", "policy": "x"}]}"#)
            .is_err());
    }

    #[test]
    fn malformed_json_reports_location() {
        let err = parse_network("{\"nodes\": [\n  {\"id\": }").err().unwrap();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn model_bundles_build_builtins() {
        let mf = parse_models(
            r#"{"models": {"cell": {"name": "scalar_generic", "expr": "-u + v"},
                           "fhn": {"name": "fhn_voltage"}},
                "initial_state": [0.1, 0.2],
                "declared_period": 2.0}"#,
        )
        .unwrap();
        assert_eq!(mf.models.len(), 2);
        assert_eq!(mf.initial_state.as_deref(), Some(&[0.1, 0.2][..]));
        assert_eq!(mf.declared_period, Some(2.0));
        assert!(parse_models(r#"{"models": {"x": {"name": "nope"}}}"#).is_err());
    }
}
