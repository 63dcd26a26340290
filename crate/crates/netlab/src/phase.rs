//! Cyclic symmetries and phase-shifted feedforward lifts.
//!
//! A CPG whose arrows are preserved by a cyclic permutation of order `k`
//! supports rotating waves in which the node at position `i` of an orbit
//! runs `i/k` of a period ahead of the orbit's representative. Copying a
//! module (one node per orbit) downstream at successive phases produces a
//! feedforward lift carrying a travelling wave.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lift::{verify_feedforward_lift, Lift};
use crate::network::{Arrow, Colouring, Network, NodeDecl, NodeId};

/// A permutation of the node set together with its declared order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Automorphism {
    pub map: BTreeMap<NodeId, NodeId>,
    pub order: u32,
}

impl Automorphism {
    pub fn apply(&self, id: NodeId) -> Result<NodeId> {
        self.map.get(&id).copied().ok_or(Error::UnknownNode(id))
    }

    pub fn apply_pow(&self, id: NodeId, power: u32) -> Result<NodeId> {
        let mut x = id;
        for _ in 0..power {
            x = self.apply(x)?;
        }
        Ok(x)
    }
}

/// Exact phase `num/den` of a period, reduced, in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Phase {
    pub num: u32,
    pub den: u32,
}

impl Phase {
    pub fn new(num: u32, den: u32) -> Phase {
        assert!(den > 0);
        let num = num % den;
        let g = gcd(num.max(1), den);
        if num == 0 {
            Phase { num: 0, den: 1 }
        } else {
            Phase { num: num / g, den: den / g }
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Exact phases (in units of the period) for every node of a phase lift,
/// together with the phase-zero representative each node is a time-shifted
/// copy of.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseAssignment {
    pub order: u32,
    phases: BTreeMap<NodeId, Phase>,
    reps: BTreeMap<NodeId, NodeId>,
}

impl PhaseAssignment {
    pub fn new(
        order: u32,
        phases: BTreeMap<NodeId, Phase>,
        reps: BTreeMap<NodeId, NodeId>,
    ) -> Self {
        PhaseAssignment { order, phases, reps }
    }

    pub fn phase(&self, id: NodeId) -> Option<Phase> {
        self.phases.get(&id).copied()
    }

    /// The phase-zero node whose waveform node `id` reproduces with a shift.
    pub fn representative(&self, id: NodeId) -> Option<NodeId> {
        self.reps.get(&id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, Phase)> + '_ {
        self.phases.iter().map(|(&id, &p)| (id, p))
    }

    /// Id-string to `num/den` strings, for serialization.
    pub fn display_map(&self) -> BTreeMap<String, String> {
        self.phases.iter().map(|(id, p)| (id.to_string(), p.to_string())).collect()
    }
}

/// Checks that `alpha` is a network automorphism of declared cyclic order:
/// a bijection on nodes preserving node types and the arrow multiset, whose
/// orbits all have length exactly `alpha.order`. Returns the orbits, each
/// listed from its smallest member and following the permutation, ordered
/// by smallest member.
pub fn verify_automorphism(net: &Network, alpha: &Automorphism) -> Result<Vec<Vec<NodeId>>> {
    if alpha.order == 0 {
        return Err(Error::Automorphism("declared order must be positive".into()));
    }
    let ids: BTreeSet<NodeId> = net.node_ids().collect();
    let domain: BTreeSet<NodeId> = alpha.map.keys().copied().collect();
    let image: BTreeSet<NodeId> = alpha.map.values().copied().collect();
    if domain != ids || image != ids {
        return Err(Error::Automorphism(
            "the map is not a bijection of the node set".into(),
        ));
    }
    for (&a, &b) in &alpha.map {
        let na = net.node(a)?;
        let nb = net.node(b)?;
        if na.node_type != nb.node_type || na.state_type != nb.state_type {
            return Err(Error::Automorphism(format!(
                "node {a} and its image {b} have different types"
            )));
        }
    }

    let mut arrow_counts: BTreeMap<(&str, NodeId, NodeId), i64> = BTreeMap::new();
    for arrow in &net.arrows {
        *arrow_counts
            .entry((arrow.arrow_type.as_str(), arrow.head, arrow.tail))
            .or_insert(0) += 1;
        let mapped = (
            arrow.arrow_type.as_str(),
            alpha.apply(arrow.head)?,
            alpha.apply(arrow.tail)?,
        );
        *arrow_counts.entry(mapped).or_insert(0) -= 1;
    }
    if let Some(((ty, head, tail), _)) = arrow_counts.iter().find(|(_, &n)| n != 0) {
        return Err(Error::Automorphism(format!(
            "arrows are not preserved: the image multiset differs at ({ty}, {tail} -> {head})"
        )));
    }

    let mut seen = BTreeSet::new();
    let mut orbits = Vec::new();
    for id in &ids {
        if seen.contains(id) {
            continue;
        }
        let mut orbit = vec![*id];
        seen.insert(*id);
        let mut x = alpha.apply(*id)?;
        while x != *id {
            if !seen.insert(x) {
                return Err(Error::Automorphism("the map is not a permutation".into()));
            }
            orbit.push(x);
            x = alpha.apply(x)?;
        }
        if orbit.len() != alpha.order as usize {
            return Err(Error::Automorphism(format!(
                "orbit of node {id} has length {}, expected the declared order {}",
                orbit.len(),
                alpha.order
            )));
        }
        orbits.push(orbit);
    }
    Ok(orbits)
}

/// A feedforward lift built by copying a module at successive phases.
#[derive(Clone, Debug)]
pub struct PhaseLift {
    pub lift: Lift,
    pub phases: PhaseAssignment,
}

/// Builds the phase lift of a cyclically symmetric CPG.
///
/// The CPG is trivially coloured (`c<id>` per node). The module must pick
/// exactly one node per orbit of `alpha`; its members sit at phase 0 and the
/// node `alpha^i(m)` at phase `i/k`. Copy `j` (zero based) of module node
/// `m` is a copy of the CPG node `alpha^(j mod k)(m)`: it takes that node's
/// colour and phase, and each input arrow is rewired to the latest earlier
/// node of the colour the template's input carries. Arrows internal to the
/// module stay inside each copy unless `rewire_internal` is set, in which
/// case they are redirected to the previous instance of their colour, which
/// keeps every copy loop-free.
pub fn build_phase_lift(
    cpg: &Network,
    alpha: &Automorphism,
    module: &[NodeId],
    copies: u32,
    rewire_internal: bool,
) -> Result<PhaseLift> {
    let orbits = verify_automorphism(cpg, alpha)?;
    let k = alpha.order;

    let module_sorted: BTreeSet<NodeId> = module.iter().copied().collect();
    if module_sorted.len() != module.len() {
        return Err(Error::PhaseLift("module lists a node twice".into()));
    }
    let mut orbit_of: BTreeMap<NodeId, usize> = BTreeMap::new();
    for (i, orbit) in orbits.iter().enumerate() {
        for id in orbit {
            orbit_of.insert(*id, i);
        }
    }
    for id in &module_sorted {
        if !orbit_of.contains_key(id) {
            return Err(Error::UnknownNode(*id));
        }
    }
    let mut hit = vec![0usize; orbits.len()];
    for id in &module_sorted {
        hit[orbit_of[id]] += 1;
    }
    if hit.iter().any(|&h| h != 1) {
        return Err(Error::PhaseLift(
            "module must contain exactly one node per orbit".into(),
        ));
    }

    // Trivial colouring and orbit phases on the CPG.
    let mut colouring = Colouring::new();
    for id in cpg.node_ids() {
        colouring.set(id, format!("c{id}"));
    }
    let mut phases: BTreeMap<NodeId, Phase> = BTreeMap::new();
    let mut reps: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    for &m in &module_sorted {
        let mut x = m;
        for i in 0..k {
            phases.insert(x, Phase::new(i, k));
            reps.insert(x, m);
            x = alpha.apply(x)?;
        }
    }

    let module_vec: Vec<NodeId> = module_sorted.iter().copied().collect();
    let mut net = cpg.clone();
    let mut next_arrow = net.max_arrow_id() + 1;
    let n0 = net.n_nodes() as u32;

    for j in 0..copies {
        let copy_start = NodeId(n0 + j * module_vec.len() as u32 + 1);
        for (idx, &m) in module_vec.iter().enumerate() {
            let new_id = NodeId(copy_start.0 + idx as u32);
            let template = alpha.apply_pow(m, j % k)?;
            let template_decl = cpg.node(template)?.clone();

            for e in cpg.inputs(template) {
                let internal = module_sorted.contains(&alpha.apply_pow(e.tail, k - j % k)?);
                let tail = if internal && !rewire_internal {
                    // Same copy's instance of the tail's module node.
                    let m_tail = alpha.apply_pow(e.tail, k - j % k)?;
                    let pos = module_vec.iter().position(|&x| x == m_tail).unwrap();
                    NodeId(copy_start.0 + pos as u32)
                } else {
                    let required = colouring.colour(e.tail).unwrap().to_string();
                    let bound = if internal { copy_start } else { new_id };
                    net.node_ids()
                        .filter(|&d| d < bound && colouring.colour(d) == Some(required.as_str()))
                        .max()
                        .ok_or_else(|| {
                            Error::PhaseLift(format!(
                                "no earlier node of colour {required} for node {new_id}"
                            ))
                        })?
                };
                net.arrows.push(Arrow {
                    id: next_arrow,
                    arrow_type: e.arrow_type.clone(),
                    head: new_id,
                    tail,
                });
                next_arrow += 1;
            }

            net.nodes.push(NodeDecl {
                id: new_id,
                node_type: template_decl.node_type,
                state_type: template_decl.state_type,
                state_dim: template_decl.state_dim,
            });
            colouring.set(new_id, format!("c{template}"));
            phases.insert(new_id, Phase::new(j % k, k));
            reps.insert(new_id, m);
        }
    }

    let cpg_nodes: Vec<NodeId> = cpg.node_ids().collect();
    let verdict =
        verify_feedforward_lift(&net, &cpg_nodes.iter().copied().collect(), &colouring);
    if !verdict.ok() {
        return Err(Error::PhaseLift(format!(
            "constructed network fails lift verification: {}",
            verdict
                .violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; ")
        )));
    }

    // Every added arrow must respect the phase pattern: the tail leads the
    // head by exactly the offset the template's input carries.
    debug_assert!(net.arrows.iter().all(|a| {
        let (ph, pt) = (phases[&a.head], phases[&a.tail]);
        let diff = (pt.as_f64() - ph.as_f64()).rem_euclid(1.0);
        net.arrows.iter().any(|b| {
            b.arrow_type == a.arrow_type
                && colouring.colour(b.head) == colouring.colour(a.head)
                && (phases[&b.tail].as_f64() - phases[&b.head].as_f64()).rem_euclid(1.0) == diff
                && b.head.0 <= n0
        })
    }));

    Ok(PhaseLift {
        lift: Lift { net, colouring, cpg_nodes },
        phases: PhaseAssignment { order: k, phases, reps },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn ring_shift() -> Automorphism {
        Automorphism { map: fixtures::ring3_shift(), order: 3 }
    }

    #[test]
    fn ring_shift_is_a_cyclic_automorphism() {
        let ring = fixtures::ring3_network();
        let orbits = verify_automorphism(&ring, &ring_shift()).unwrap();
        assert_eq!(orbits, vec![vec![NodeId(1), NodeId(2), NodeId(3)]]);
    }

    #[test]
    fn identity_has_order_one() {
        let ring = fixtures::ring3_network();
        let alpha = Automorphism {
            map: ring.node_ids().map(|id| (id, id)).collect(),
            order: 1,
        };
        let orbits = verify_automorphism(&ring, &alpha).unwrap();
        assert_eq!(orbits.len(), 3);
    }

    #[test]
    fn a_swap_does_not_preserve_the_ring() {
        let ring = fixtures::ring3_network();
        let alpha = Automorphism {
            map: [(NodeId(1), NodeId(2)), (NodeId(2), NodeId(1)), (NodeId(3), NodeId(3))]
                .into_iter()
                .collect(),
            order: 2,
        };
        assert!(matches!(
            verify_automorphism(&ring, &alpha),
            Err(Error::Automorphism(_))
        ));
    }

    #[test]
    fn mixed_orbit_lengths_are_rejected() {
        // Two disjoint self-loop nodes swapped plus a fixed third node with
        // its own loop: arrows are preserved but orbit lengths are 2 and 1.
        let net = Network::homogeneous(3, "cell", "R", 1, "syn", &[(1, 1), (2, 2), (3, 3)]);
        let alpha = Automorphism {
            map: [(NodeId(1), NodeId(2)), (NodeId(2), NodeId(1)), (NodeId(3), NodeId(3))]
                .into_iter()
                .collect(),
            order: 2,
        };
        assert!(matches!(
            verify_automorphism(&net, &alpha),
            Err(Error::Automorphism(_))
        ));
    }

    #[test]
    fn phase_lift_of_the_ring_reproduces_the_seven_node_chain() {
        let ring = fixtures::ring3_network();
        let pl = build_phase_lift(&ring, &ring_shift(), &[NodeId(1)], 4, false).unwrap();
        let expected = fixtures::fig1_network();
        let mut got: Vec<(u32, u32)> =
            pl.lift.net.arrows.iter().map(|a| (a.tail.0, a.head.0)).collect();
        let mut want: Vec<(u32, u32)> =
            expected.arrows.iter().map(|a| (a.tail.0, a.head.0)).collect();
        got.sort();
        want.sort();
        assert_eq!(got, want);

        let phase_list: Vec<String> = (1..=7)
            .map(|id| pl.phases.phase(NodeId(id)).unwrap().to_string())
            .collect();
        assert_eq!(
            phase_list,
            vec!["0/1", "1/3", "2/3", "0/1", "1/3", "2/3", "0/1"]
        );
        // Colour classes match the three-colour pattern.
        let classes = pl.lift.colouring.classes();
        let mut sets: Vec<Vec<u32>> = classes
            .values()
            .map(|v| v.iter().map(|id| id.0).collect())
            .collect();
        sets.sort();
        assert_eq!(sets, vec![vec![1, 4, 7], vec![2, 5], vec![3, 6]]);
        // Every node is a shifted copy of the single module node.
        for id in 1..=7 {
            assert_eq!(pl.phases.representative(NodeId(id)), Some(NodeId(1)));
        }
    }

    #[test]
    fn zero_copies_returns_the_cpg() {
        let ring = fixtures::ring3_network();
        let pl = build_phase_lift(&ring, &ring_shift(), &[NodeId(1)], 0, false).unwrap();
        assert_eq!(pl.lift.net.n_nodes(), 3);
        assert_eq!(pl.lift.net.arrows.len(), 3);
    }

    #[test]
    fn module_must_be_a_transversal() {
        let ring = fixtures::ring3_network();
        assert!(matches!(
            build_phase_lift(&ring, &ring_shift(), &[NodeId(1), NodeId(2)], 2, false),
            Err(Error::PhaseLift(_))
        ));
    }

    #[test]
    fn module_self_loop_requires_rewiring() {
        // One node, self-loop, trivial symmetry: the module is {1} and its
        // self-loop is internal. Without rewiring each copy keeps a loop.
        let net = fixtures::self_loop_network("cell", 1);
        let alpha = Automorphism { map: [(NodeId(1), NodeId(1))].into_iter().collect(), order: 1 };
        assert!(build_phase_lift(&net, &alpha, &[NodeId(1)], 2, false).is_err());
        let pl = build_phase_lift(&net, &alpha, &[NodeId(1)], 2, true).unwrap();
        let mut arcs: Vec<(u32, u32)> =
            pl.lift.net.arrows.iter().map(|a| (a.tail.0, a.head.0)).collect();
        arcs.sort();
        assert_eq!(arcs, vec![(1, 1), (1, 2), (2, 3)]);
    }
}
