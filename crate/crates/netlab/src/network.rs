//! Typed coloured digraphs: node and arrow declarations, colourings,
//! balance checking, quotient networks and path components.
//!
//! A network is a finite digraph in which every node carries a node type
//! (its internal dynamic), a state type (its phase-space block) and every
//! arrow carries an arrow type (its coupling form). Self-loops and parallel
//! arrows are allowed. Node types refine state types: two nodes of the same
//! node type always declare the same state type and dimension.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node identifier. A valid network declares the dense range `1..=n`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    /// Zero-based position of this node in id order.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeDecl {
    pub id: NodeId,
    pub node_type: String,
    pub state_type: String,
    pub state_dim: usize,
}

/// A directed arrow from `tail` to `head`. Parallel arrows are distinguished
/// by `id` only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arrow {
    pub id: u32,
    pub arrow_type: String,
    pub head: NodeId,
    pub tail: NodeId,
}

impl Arrow {
    pub fn is_self_loop(&self) -> bool {
        self.head == self.tail
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub nodes: Vec<NodeDecl>,
    pub arrows: Vec<Arrow>,
}

impl Network {
    pub fn new(mut nodes: Vec<NodeDecl>, mut arrows: Vec<Arrow>) -> Self {
        nodes.sort_by_key(|n| n.id);
        arrows.sort_by_key(|a| a.id);
        Network { nodes, arrows }
    }

    /// Network with `n` identical nodes and one arrow type; `arcs` lists
    /// `(tail, head)` pairs, arrow ids follow list order starting at 1.
    pub fn homogeneous(
        n: u32,
        node_type: &str,
        state_type: &str,
        state_dim: usize,
        arrow_type: &str,
        arcs: &[(u32, u32)],
    ) -> Self {
        let nodes = (1..=n)
            .map(|id| NodeDecl {
                id: NodeId(id),
                node_type: node_type.to_string(),
                state_type: state_type.to_string(),
                state_dim,
            })
            .collect();
        let arrows = arcs
            .iter()
            .enumerate()
            .map(|(k, &(tail, head))| Arrow {
                id: k as u32 + 1,
                arrow_type: arrow_type.to_string(),
                head: NodeId(head),
                tail: NodeId(tail),
            })
            .collect();
        Network::new(nodes, arrows)
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: NodeId) -> Result<&NodeDecl> {
        self.nodes
            .iter()
            .find(|n| n.id == id)
            .ok_or(Error::UnknownNode(id))
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().map(|n| n.id)
    }

    /// Input set of `c`: all arrows whose head is `c`, in arrow id order.
    pub fn inputs(&self, c: NodeId) -> Vec<&Arrow> {
        self.arrows.iter().filter(|a| a.head == c).collect()
    }

    pub fn max_arrow_id(&self) -> u32 {
        self.arrows.iter().map(|a| a.id).max().unwrap_or(0)
    }
}

/// A structural defect found by [`validate_network`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    DuplicateNodeId(NodeId),
    NonDenseNodeIds { expected: u32, found: u32 },
    ZeroStateDim(NodeId),
    DuplicateArrowId(u32),
    DanglingHead { arrow: u32, head: NodeId },
    DanglingTail { arrow: u32, tail: NodeId },
    NodeTypeConflict { node_type: String, a: NodeId, b: NodeId, field: &'static str },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateNodeId(id) => write!(f, "node id {id} declared twice"),
            Violation::NonDenseNodeIds { expected, found } => {
                write!(f, "node ids must be dense: expected {expected}, found {found}")
            }
            Violation::ZeroStateDim(id) => write!(f, "node {id} declares state_dim 0"),
            Violation::DuplicateArrowId(id) => write!(f, "arrow id {id} declared twice"),
            Violation::DanglingHead { arrow, head } => {
                write!(f, "arrow {arrow} has undeclared head {head}")
            }
            Violation::DanglingTail { arrow, tail } => {
                write!(f, "arrow {arrow} has undeclared tail {tail}")
            }
            Violation::NodeTypeConflict { node_type, a, b, field } => {
                write!(f, "nodes {a} and {b} share node type \"{node_type}\" but differ in {field}")
            }
        }
    }
}

/// Checks the structural invariants of a network declaration and returns
/// every violation found (empty means valid): dense node ids, declared arrow
/// endpoints, positive state dimensions, unique arrow ids and node-type
/// consistency (same node type implies same state type and dimension).
pub fn validate_network(net: &Network) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for n in &net.nodes {
        if !seen.insert(n.id) {
            out.push(Violation::DuplicateNodeId(n.id));
        }
        if n.state_dim == 0 {
            out.push(Violation::ZeroStateDim(n.id));
        }
    }
    for (k, &id) in seen.iter().enumerate() {
        let expected = k as u32 + 1;
        if id.0 != expected {
            out.push(Violation::NonDenseNodeIds { expected, found: id.0 });
            break;
        }
    }
    let mut arrow_ids = BTreeSet::new();
    for a in &net.arrows {
        if !arrow_ids.insert(a.id) {
            out.push(Violation::DuplicateArrowId(a.id));
        }
        if !seen.contains(&a.head) {
            out.push(Violation::DanglingHead { arrow: a.id, head: a.head });
        }
        if !seen.contains(&a.tail) {
            out.push(Violation::DanglingTail { arrow: a.id, tail: a.tail });
        }
    }
    let mut rep: BTreeMap<&str, &NodeDecl> = BTreeMap::new();
    for n in &net.nodes {
        match rep.get(n.node_type.as_str()) {
            None => {
                rep.insert(&n.node_type, n);
            }
            Some(r) => {
                if r.state_type != n.state_type {
                    out.push(Violation::NodeTypeConflict {
                        node_type: n.node_type.clone(),
                        a: r.id,
                        b: n.id,
                        field: "state_type",
                    });
                }
                if r.state_dim != n.state_dim {
                    out.push(Violation::NodeTypeConflict {
                        node_type: n.node_type.clone(),
                        a: r.id,
                        b: n.id,
                        field: "state_dim",
                    });
                }
            }
        }
    }
    out
}

/// Assignment of a colour to every node.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Colouring {
    map: BTreeMap<NodeId, String>,
}

impl Colouring {
    pub fn new() -> Self {
        Colouring::default()
    }

    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (u32, S)>,
        S: Into<String>,
    {
        Colouring {
            map: pairs
                .into_iter()
                .map(|(id, c)| (NodeId(id), c.into()))
                .collect(),
        }
    }

    pub fn set(&mut self, id: NodeId, colour: impl Into<String>) {
        self.map.insert(id, colour.into());
    }

    pub fn colour(&self, id: NodeId) -> Option<&str> {
        self.map.get(&id).map(|s| s.as_str())
    }

    pub fn colour_or_err(&self, id: NodeId) -> Result<&str> {
        self.colour(id).ok_or(Error::ColouringNotTotal(id))
    }

    /// The colour set, in lexicographic order.
    pub fn colours(&self) -> BTreeSet<String> {
        self.map.values().cloned().collect()
    }

    /// Colour classes keyed by colour; members sorted by id.
    pub fn classes(&self) -> BTreeMap<String, Vec<NodeId>> {
        let mut out: BTreeMap<String, Vec<NodeId>> = BTreeMap::new();
        for (&id, colour) in &self.map {
            out.entry(colour.clone()).or_default().push(id);
        }
        out
    }

    /// Smallest node id of each colour class.
    pub fn representatives(&self) -> BTreeMap<String, NodeId> {
        let mut out = BTreeMap::new();
        for (&id, colour) in &self.map {
            out.entry(colour.clone()).or_insert(id);
        }
        out
    }

    pub fn is_total_on(&self, net: &Network) -> Result<()> {
        for id in net.node_ids() {
            if !self.map.contains_key(&id) {
                return Err(Error::ColouringNotTotal(id));
            }
        }
        Ok(())
    }

    pub fn restricted_to<'a>(&self, ids: impl IntoIterator<Item = &'a NodeId>) -> Colouring {
        let mut map = BTreeMap::new();
        for id in ids {
            if let Some(c) = self.map.get(id) {
                map.insert(*id, c.clone());
            }
        }
        Colouring { map }
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &str)> {
        self.map.iter().map(|(&id, c)| (id, c.as_str()))
    }

    /// One colour per node, named `c<id>`.
    pub fn trivial(net: &Network) -> Colouring {
        Colouring {
            map: net
                .node_ids()
                .map(|id| (id, format!("c{id}")))
                .collect(),
        }
    }
}

/// Multiset of `(arrow type, tail colour)` pairs describing the inputs of a
/// node. Two nodes with equal input multisets admit a colour-preserving
/// input isomorphism.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InputMultiset {
    counts: BTreeMap<(String, String), usize>,
}

impl InputMultiset {
    pub fn insert(&mut self, arrow_type: &str, tail_colour: &str) {
        *self
            .counts
            .entry((arrow_type.to_string(), tail_colour.to_string()))
            .or_insert(0) += 1;
    }

    pub fn counts(&self) -> &BTreeMap<(String, String), usize> {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }
}

impl fmt::Display for InputMultiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, ((ty, col), n)) in self.counts.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "({ty}, {col}) x{n}")?;
        }
        write!(f, "}}")
    }
}

/// Input multiset of node `c` under `kappa`: one `(arrow type, tail colour)`
/// entry per input arrow, with multiplicity.
pub fn input_multiset(net: &Network, kappa: &Colouring, c: NodeId) -> Result<InputMultiset> {
    net.node(c)?;
    let mut m = InputMultiset::default();
    for a in net.inputs(c) {
        let colour = kappa.colour_or_err(a.tail)?;
        m.insert(&a.arrow_type, colour);
    }
    Ok(m)
}

/// Why a colouring fails to be balanced: the first offending pair of
/// same-coloured nodes, in (class representative, member) id order.
#[derive(Clone, Debug, PartialEq)]
pub enum BalanceWitness {
    NodeType { a: NodeId, b: NodeId, type_a: String, type_b: String },
    Inputs { a: NodeId, b: NodeId, inputs_a: InputMultiset, inputs_b: InputMultiset },
}

impl BalanceWitness {
    pub fn pair(&self) -> (NodeId, NodeId) {
        match self {
            BalanceWitness::NodeType { a, b, .. } => (*a, *b),
            BalanceWitness::Inputs { a, b, .. } => (*a, *b),
        }
    }
}

impl fmt::Display for BalanceWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BalanceWitness::NodeType { a, b, type_a, type_b } => write!(
                f,
                "nodes {a} and {b} share a colour but have node types \"{type_a}\" and \"{type_b}\""
            ),
            BalanceWitness::Inputs { a, b, inputs_a, inputs_b } => write!(
                f,
                "nodes {a} and {b} share a colour but have input multisets {inputs_a} and {inputs_b}"
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BalanceVerdict {
    pub balanced: bool,
    pub witness: Option<BalanceWitness>,
}

/// Decides whether `kappa` is balanced on `net`: every two nodes of one
/// colour must share a node type and have equal input multisets. The witness
/// reported for an unbalanced colouring is deterministic: classes are
/// scanned by smallest member id and each class member is compared against
/// the class representative in id order.
pub fn is_balanced(net: &Network, kappa: &Colouring) -> Result<BalanceVerdict> {
    kappa.is_total_on(net)?;
    let mut classes: BTreeMap<&str, Vec<NodeId>> = BTreeMap::new();
    for id in net.node_ids() {
        classes.entry(kappa.colour(id).unwrap()).or_default().push(id);
    }
    let mut ordered: Vec<&Vec<NodeId>> = classes.values().collect();
    ordered.sort_by_key(|m| m[0]);
    for members in ordered {
        let rep = members[0];
        let rep_decl = net.node(rep)?;
        let rep_inputs = input_multiset(net, kappa, rep)?;
        for &b in &members[1..] {
            let b_decl = net.node(b)?;
            if b_decl.node_type != rep_decl.node_type {
                return Ok(BalanceVerdict {
                    balanced: false,
                    witness: Some(BalanceWitness::NodeType {
                        a: rep,
                        b,
                        type_a: rep_decl.node_type.clone(),
                        type_b: b_decl.node_type.clone(),
                    }),
                });
            }
            let b_inputs = input_multiset(net, kappa, b)?;
            if b_inputs != rep_inputs {
                return Ok(BalanceVerdict {
                    balanced: false,
                    witness: Some(BalanceWitness::Inputs {
                        a: rep,
                        b,
                        inputs_a: rep_inputs,
                        inputs_b: b_inputs,
                    }),
                });
            }
        }
    }
    Ok(BalanceVerdict { balanced: true, witness: None })
}

/// Coarsest balanced colouring refining both the node-type partition and the
/// separations present in `seed`, computed by iterated refinement on input
/// multisets until a fixed point. Colour names are `c<r>` with `r` the
/// smallest node id in the class.
pub fn coarsest_balanced(net: &Network, seed: &Colouring) -> Result<Colouring> {
    seed.is_total_on(net)?;
    let n = net.n_nodes();
    let ids: Vec<NodeId> = net.node_ids().collect();
    let pos: BTreeMap<NodeId, usize> = ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();

    // Initial classes: seed colour refined by node type, numbered in first-
    // occurrence order over ascending node ids.
    let mut class: Vec<usize> = vec![0; n];
    {
        let mut key_to_class: BTreeMap<(String, String), usize> = BTreeMap::new();
        for (k, id) in ids.iter().enumerate() {
            let decl = net.node(*id)?;
            let key = (seed.colour(*id).unwrap().to_string(), decl.node_type.clone());
            let next = key_to_class.len();
            class[k] = *key_to_class.entry(key).or_insert(next);
        }
    }

    loop {
        let mut key_to_class: BTreeMap<(usize, Vec<(String, usize)>), usize> = BTreeMap::new();
        let mut next_class: Vec<usize> = vec![0; n];
        for (k, id) in ids.iter().enumerate() {
            let mut sig: Vec<(String, usize)> = net
                .inputs(*id)
                .iter()
                .map(|a| (a.arrow_type.clone(), class[pos[&a.tail]]))
                .collect();
            sig.sort();
            let key = (class[k], sig);
            let next = key_to_class.len();
            next_class[k] = *key_to_class.entry(key).or_insert(next);
        }
        let stable = key_to_class.len() == class.iter().collect::<BTreeSet<_>>().len();
        class = next_class;
        if stable {
            break;
        }
    }

    let mut rep_of_class: BTreeMap<usize, NodeId> = BTreeMap::new();
    for (k, id) in ids.iter().enumerate() {
        rep_of_class.entry(class[k]).or_insert(*id);
    }
    let mut out = Colouring::new();
    for (k, id) in ids.iter().enumerate() {
        out.set(*id, format!("c{}", rep_of_class[&class[k]]));
    }
    debug_assert!(is_balanced(net, &out)?.balanced);
    Ok(out)
}

/// Quotient of a network by a balanced colouring, together with the node
/// correspondence.
#[derive(Clone, Debug)]
pub struct Quotient {
    pub net: Network,
    /// Original node -> quotient node.
    pub node_map: BTreeMap<NodeId, NodeId>,
    /// Colour -> quotient node carrying that class.
    pub colour_to_node: BTreeMap<String, NodeId>,
    /// The quotient network coloured by the original colour names (one node
    /// per colour, so this colouring is trivially balanced).
    pub colouring: Colouring,
}

/// Quotient network of `net` by the balanced colouring `kappa`: one node per
/// colour, input set copied from the smallest-id representative of each
/// class with tails mapped through the colouring. Quotient node ids are
/// assigned in order of the class representatives; arrow ids are renumbered
/// from 1 in (head class, original arrow id) order.
pub fn quotient(net: &Network, kappa: &Colouring) -> Result<Quotient> {
    let verdict = is_balanced(net, kappa)?;
    if let Some(w) = verdict.witness {
        return Err(Error::NotBalanced(w.to_string()));
    }

    let mut reps: Vec<(NodeId, String)> = kappa
        .representatives()
        .into_iter()
        .map(|(colour, rep)| (rep, colour))
        .collect();
    reps.sort();

    let mut colour_to_node = BTreeMap::new();
    let mut nodes = Vec::new();
    let mut colouring = Colouring::new();
    for (k, (rep, colour)) in reps.iter().enumerate() {
        let q = NodeId(k as u32 + 1);
        colour_to_node.insert(colour.clone(), q);
        let decl = net.node(*rep)?;
        nodes.push(NodeDecl {
            id: q,
            node_type: decl.node_type.clone(),
            state_type: decl.state_type.clone(),
            state_dim: decl.state_dim,
        });
        colouring.set(q, colour.clone());
    }

    let mut node_map = BTreeMap::new();
    for id in net.node_ids() {
        node_map.insert(id, colour_to_node[kappa.colour(id).unwrap()]);
    }

    let mut arrows = Vec::new();
    let mut next_id = 1u32;
    for (rep, colour) in &reps {
        let head = colour_to_node[colour];
        for a in net.inputs(*rep) {
            arrows.push(Arrow {
                id: next_id,
                arrow_type: a.arrow_type.clone(),
                head,
                tail: node_map[&a.tail],
            });
            next_id += 1;
        }
    }

    Ok(Quotient { net: Network::new(nodes, arrows), node_map, colour_to_node, colouring })
}

/// Induced subnetwork on `keep`: nodes renumbered densely in ascending id
/// order, arrows with both endpoints inside renumbered from 1 in original
/// id order. Returns the network and the old-to-new node correspondence.
pub fn induced_subnetwork(
    net: &Network,
    keep: &BTreeSet<NodeId>,
) -> Result<(Network, BTreeMap<NodeId, NodeId>)> {
    for id in keep {
        net.node(*id)?;
    }
    let renumber: BTreeMap<NodeId, NodeId> = keep
        .iter()
        .enumerate()
        .map(|(k, &id)| (id, NodeId(k as u32 + 1)))
        .collect();
    let nodes = net
        .nodes
        .iter()
        .filter(|n| keep.contains(&n.id))
        .map(|n| NodeDecl { id: renumber[&n.id], ..n.clone() })
        .collect();
    let mut next = 1u32;
    let mut arrows = Vec::new();
    for a in &net.arrows {
        if keep.contains(&a.head) && keep.contains(&a.tail) {
            arrows.push(Arrow {
                id: next,
                arrow_type: a.arrow_type.clone(),
                head: renumber[&a.head],
                tail: renumber[&a.tail],
            });
            next += 1;
        }
    }
    Ok((Network::new(nodes, arrows), renumber))
}

/// Strongly connected components (path components) of a network and their
/// acyclic condensation, in a topological order in which every arrow points
/// from its tail's component to an equal or later component. Ties between
/// simultaneously ready components are broken by smallest member id, and the
/// flattened `order` is compatible with the condensation.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentGraph {
    /// Components in topological order; members sorted ascending.
    pub components: Vec<Vec<NodeId>>,
    /// Node -> index into `components`.
    pub membership: BTreeMap<NodeId, usize>,
    /// Condensation arcs (tail component, head component), self-arcs omitted.
    pub edges: BTreeSet<(usize, usize)>,
    /// Total node order compatible with the condensation.
    pub order: Vec<NodeId>,
}

impl ComponentGraph {
    /// Indices of components containing a directed loop (more than one node,
    /// or a single node with a self-arrow).
    pub fn recurrent(&self, net: &Network) -> Vec<usize> {
        self.components
            .iter()
            .enumerate()
            .filter(|(_, comp)| {
                comp.len() > 1
                    || net
                        .arrows
                        .iter()
                        .any(|a| a.is_self_loop() && a.head == comp[0])
            })
            .map(|(k, _)| k)
            .collect()
    }
}

/// Tarjan's algorithm (iterative), followed by a deterministic topological
/// sort of the condensation.
pub fn path_components(net: &Network) -> ComponentGraph {
    let ids: Vec<NodeId> = net.node_ids().collect();
    let n = ids.len();
    let pos: BTreeMap<NodeId, usize> = ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    for a in &net.arrows {
        succ[pos[&a.tail]].push(pos[&a.head]);
    }
    for s in &mut succ {
        s.sort_unstable();
        s.dedup();
    }

    let mut index = vec![usize::MAX; n];
    let mut lowlink = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut raw_components: Vec<Vec<usize>> = Vec::new();

    for start in 0..n {
        if index[start] != usize::MAX {
            continue;
        }
        // Explicit DFS stack of (node, next successor position).
        let mut call: Vec<(usize, usize)> = vec![(start, 0)];
        index[start] = next_index;
        lowlink[start] = next_index;
        next_index += 1;
        stack.push(start);
        on_stack[start] = true;
        while let Some(&mut (v, ref mut i)) = call.last_mut() {
            if *i < succ[v].len() {
                let w = succ[v][*i];
                *i += 1;
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    lowlink[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
            } else {
                if lowlink[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    raw_components.push(comp);
                }
                call.pop();
                if let Some(&mut (u, _)) = call.last_mut() {
                    lowlink[u] = lowlink[u].min(lowlink[v]);
                }
            }
        }
    }

    // Condensation on raw component indices.
    let mut comp_of = vec![0usize; n];
    for (k, comp) in raw_components.iter().enumerate() {
        for &v in comp {
            comp_of[v] = k;
        }
    }
    let m = raw_components.len();
    let mut cond_succ: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); m];
    let mut indegree = vec![0usize; m];
    for a in &net.arrows {
        let (ct, ch) = (comp_of[pos[&a.tail]], comp_of[pos[&a.head]]);
        if ct != ch && cond_succ[ct].insert(ch) {
            indegree[ch] += 1;
        }
    }

    // Kahn's algorithm; among ready components pick the one whose smallest
    // member id is least.
    let min_id = |k: usize| raw_components[k].iter().map(|&v| ids[v]).min().unwrap();
    let mut ready: BTreeSet<(NodeId, usize)> =
        (0..m).filter(|&k| indegree[k] == 0).map(|k| (min_id(k), k)).collect();
    let mut topo: Vec<usize> = Vec::with_capacity(m);
    while let Some(&(key, k)) = ready.iter().next() {
        ready.remove(&(key, k));
        topo.push(k);
        for &h in &cond_succ[k] {
            indegree[h] -= 1;
            if indegree[h] == 0 {
                ready.insert((min_id(h), h));
            }
        }
    }

    let mut new_index = vec![0usize; m];
    for (rank, &k) in topo.iter().enumerate() {
        new_index[k] = rank;
    }
    let mut components: Vec<Vec<NodeId>> = topo
        .iter()
        .map(|&k| {
            let mut members: Vec<NodeId> = raw_components[k].iter().map(|&v| ids[v]).collect();
            members.sort();
            members
        })
        .collect();
    let mut membership = BTreeMap::new();
    for (rank, comp) in components.iter().enumerate() {
        for &id in comp {
            membership.insert(id, rank);
        }
    }
    let mut edges = BTreeSet::new();
    for (k, succs) in cond_succ.iter().enumerate() {
        for &h in succs {
            edges.insert((new_index[k], new_index[h]));
        }
    }
    let order: Vec<NodeId> = components.iter_mut().flat_map(|c| c.iter().copied()).collect();
    ComponentGraph { components, membership, edges, order }
}
