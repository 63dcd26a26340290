//! Feedforward lifts: grow a network downstream of a recurrent core (the
//! CPG) by appending nodes that copy the input set of an existing colour
//! class, and verify the four defining properties of such lifts.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{
    is_balanced, path_components, Arrow, Colouring, Network, NodeDecl, NodeId,
};

/// How the tails of a copied input set are chosen for a new node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailPolicy {
    /// For each required colour take the latest (maximal id) preceding node
    /// of that colour.
    NearestUpstream,
    /// Wire every copied arrow back to the tail of the arrow being copied,
    /// i.e. directly into the CPG.
    CpgDirect,
    /// Tails given explicitly, aligned with the representative's input
    /// arrows in arrow id order. Each tail must precede the new node and
    /// carry the required colour.
    Explicit(Vec<NodeId>),
}

/// One appended node: the colour class it joins and how its inputs are
/// wired.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Addition {
    pub colour: String,
    pub policy: TailPolicy,
}

/// Recipe for building a feedforward lift of a CPG.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftSpec {
    /// The CPG node set (must equal the node set of the network being
    /// lifted).
    pub cpg: Vec<NodeId>,
    pub additions: Vec<Addition>,
}

/// A constructed feedforward lift.
#[derive(Clone, Debug)]
pub struct Lift {
    pub net: Network,
    pub colouring: Colouring,
    pub cpg_nodes: Vec<NodeId>,
}

/// Builds a feedforward lift of `cpg` under the balanced colouring `kappa`
/// by appending one node per entry of `spec.additions`, in order. Each new
/// node copies the input set of the smallest-id CPG node of its colour; a
/// copied self-loop is redirected to the latest preceding node of the same
/// colour, so loops are never created outside the CPG.
pub fn build_feedforward_lift(cpg: &Network, kappa: &Colouring, spec: &LiftSpec) -> Result<Lift> {
    kappa.is_total_on(cpg)?;
    let verdict = is_balanced(cpg, kappa)?;
    if let Some(w) = verdict.witness {
        return Err(Error::NotBalanced(w.to_string()));
    }
    let declared: BTreeSet<NodeId> = spec.cpg.iter().copied().collect();
    let actual: BTreeSet<NodeId> = cpg.node_ids().collect();
    if declared != actual {
        return Err(Error::Lift(format!(
            "spec declares CPG nodes {declared:?} but the network has nodes {actual:?}"
        )));
    }

    let reps = kappa.representatives();
    let mut net = cpg.clone();
    let mut colouring = kappa.clone();
    let mut next_arrow = net.max_arrow_id() + 1;

    for (k, addition) in spec.additions.iter().enumerate() {
        let rep = *reps
            .get(&addition.colour)
            .ok_or_else(|| Error::UnknownColour(addition.colour.clone()))?;
        let new_id = NodeId(net.n_nodes() as u32 + 1);
        let rep_decl = cpg.node(rep)?.clone();
        let rep_inputs: Vec<Arrow> = cpg.inputs(rep).into_iter().cloned().collect();

        let explicit = match &addition.policy {
            TailPolicy::Explicit(tails) => {
                if tails.len() != rep_inputs.len() {
                    return Err(Error::Lift(format!(
                        "addition {k}: {} explicit tails given but colour {} has {} input arrows",
                        tails.len(),
                        addition.colour,
                        rep_inputs.len()
                    )));
                }
                Some(tails.clone())
            }
            _ => None,
        };

        let mut new_arrows = Vec::new();
        for (slot, e) in rep_inputs.iter().enumerate() {
            let required = colouring.colour(e.tail).unwrap().to_string();
            let tail = match &addition.policy {
                TailPolicy::NearestUpstream => net
                    .node_ids()
                    .filter(|&d| d < new_id && colouring.colour(d) == Some(required.as_str()))
                    .max()
                    .ok_or_else(|| {
                        Error::Lift(format!(
                            "addition {k}: no preceding node of colour {required}"
                        ))
                    })?,
                TailPolicy::CpgDirect => e.tail,
                TailPolicy::Explicit(_) => {
                    let t = explicit.as_ref().unwrap()[slot];
                    if t >= new_id || net.node(t).is_err() {
                        return Err(Error::Lift(format!(
                            "addition {k}: explicit tail {t} does not precede node {new_id}"
                        )));
                    }
                    if colouring.colour(t) != Some(required.as_str()) {
                        return Err(Error::Lift(format!(
                            "addition {k}: explicit tail {t} has colour {:?}, required {required}",
                            colouring.colour(t)
                        )));
                    }
                    t
                }
            };
            new_arrows.push(Arrow {
                id: next_arrow,
                arrow_type: e.arrow_type.clone(),
                head: new_id,
                tail,
            });
            next_arrow += 1;
        }

        net.nodes.push(NodeDecl {
            id: new_id,
            node_type: rep_decl.node_type,
            state_type: rep_decl.state_type,
            state_dim: rep_decl.state_dim,
        });
        net.arrows.extend(new_arrows);
        colouring.set(new_id, addition.colour.clone());
    }

    let lift = Lift { net, colouring, cpg_nodes: spec.cpg.clone() };
    let verdict = verify_feedforward_lift(
        &lift.net,
        &lift.cpg_nodes.iter().copied().collect(),
        &lift.colouring,
    );
    if !verdict.ok() {
        return Err(Error::Lift(format!(
            "constructed network fails verification: {}",
            verdict
                .violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; ")
        )));
    }
    Ok(lift)
}

/// A violated clause of the feedforward-lift definition.
#[derive(Clone, Debug, PartialEq)]
pub enum LiftViolation {
    /// (a) the CPG node set is empty or mentions undeclared nodes.
    BadCpgSet(String),
    /// (b) a node outside the CPG is not downstream of any CPG node.
    NotDownstream(NodeId),
    /// (c) a directed loop passes outside the CPG.
    LoopOutsideCpg(Vec<NodeId>),
    /// (d) the colouring fails to extend the CPG colouring with the same
    /// colour set, or is not balanced.
    BadColouring(String),
}

impl fmt::Display for LiftViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LiftViolation::BadCpgSet(msg) => write!(f, "(a) {msg}"),
            LiftViolation::NotDownstream(id) => {
                write!(f, "(b) node {id} is not downstream of the CPG")
            }
            LiftViolation::LoopOutsideCpg(nodes) => {
                write!(f, "(c) a loop through {nodes:?} leaves the CPG")
            }
            LiftViolation::BadColouring(msg) => write!(f, "(d) {msg}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LiftVerdict {
    pub violations: Vec<LiftViolation>,
}

impl LiftVerdict {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the four properties that make `net` a feedforward lift over the
/// induced CPG subnetwork on `cpg_nodes`: (a) the CPG set is sound, (b)
/// every added node is downstream of the CPG, (c) every directed loop stays
/// inside the CPG, (d) the colouring is balanced and the added nodes reuse
/// the CPG's colour set.
pub fn verify_feedforward_lift(
    net: &Network,
    cpg_nodes: &BTreeSet<NodeId>,
    kappa: &Colouring,
) -> LiftVerdict {
    let mut violations = Vec::new();

    let declared: BTreeSet<NodeId> = net.node_ids().collect();
    if cpg_nodes.is_empty() {
        violations.push(LiftViolation::BadCpgSet("CPG node set is empty".into()));
    }
    for id in cpg_nodes {
        if !declared.contains(id) {
            violations.push(LiftViolation::BadCpgSet(format!(
                "CPG node {id} is not declared in the network"
            )));
        }
    }
    if !violations.is_empty() {
        return LiftVerdict { violations };
    }

    // (b) reachability from the CPG along arrows.
    let mut reach: BTreeSet<NodeId> = cpg_nodes.clone();
    let mut frontier: Vec<NodeId> = cpg_nodes.iter().copied().collect();
    while let Some(v) = frontier.pop() {
        for a in &net.arrows {
            if a.tail == v && reach.insert(a.head) {
                frontier.push(a.head);
            }
        }
    }
    for id in net.node_ids() {
        if !reach.contains(&id) {
            violations.push(LiftViolation::NotDownstream(id));
        }
    }

    // (c) recurrent components must lie inside the CPG.
    let cg = path_components(net);
    for k in cg.recurrent(net) {
        let comp = &cg.components[k];
        if !comp.iter().all(|id| cpg_nodes.contains(id)) {
            violations.push(LiftViolation::LoopOutsideCpg(comp.clone()));
        }
    }

    // (d) colouring: total, balanced, chain colours drawn from CPG colours.
    match is_balanced(net, kappa) {
        Err(e) => violations.push(LiftViolation::BadColouring(e.to_string())),
        Ok(verdict) => {
            if let Some(w) = verdict.witness {
                violations.push(LiftViolation::BadColouring(format!("not balanced: {w}")));
            }
            let cpg_colours: BTreeSet<&str> =
                cpg_nodes.iter().filter_map(|&id| kappa.colour(id)).collect();
            for id in net.node_ids() {
                if cpg_nodes.contains(&id) {
                    continue;
                }
                if let Some(c) = kappa.colour(id) {
                    if !cpg_colours.contains(c) {
                        violations.push(LiftViolation::BadColouring(format!(
                            "node {id} has colour {c} which does not occur in the CPG"
                        )));
                    }
                }
            }
        }
    }

    LiftVerdict { violations }
}
