//! Assembly of admissible systems: a network plus one model per node type
//! yields a coupled ODE whose right-hand side respects the network
//! structure. The assembled Jacobian has exact structural zeros at every
//! block with no arrow, and on a synchrony subspace same-coloured diagonal
//! blocks coincide.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::{InputGroup, NodeModel, Params};
use crate::network::{validate_network, Colouring, Network, NodeId, Quotient};

/// A ready-to-integrate coupled system.
pub struct AdmissibleSystem {
    pub net: Network,
    pub params: Params,
    models: Vec<Arc<NodeModel>>,
    offsets: Vec<usize>,
    dims: Vec<usize>,
    total: usize,
    /// Per node: input groups as (arrow type, tails in arrow id order).
    wiring: Vec<Vec<(String, Vec<NodeId>)>>,
}

/// Binds `net` to one model per node type. Fails on structural violations,
/// missing models, state-dimension or arity mismatches, and absent
/// parameters.
pub fn assemble(
    net: &Network,
    models: &BTreeMap<String, Arc<NodeModel>>,
    params: Params,
) -> Result<AdmissibleSystem> {
    let violations = validate_network(net);
    if !violations.is_empty() {
        let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::Assembly(msgs.join("; ")));
    }

    let mut bound = Vec::new();
    let mut offsets = Vec::new();
    let mut dims = Vec::new();
    let mut total = 0usize;
    let mut wiring = Vec::new();
    for node in &net.nodes {
        let model = models.get(&node.node_type).ok_or_else(|| {
            Error::Assembly(format!("no model bound to node type \"{}\"", node.node_type))
        })?;
        if model.state_dim != node.state_dim {
            return Err(Error::Assembly(format!(
                "model \"{}\" has dimension {} but node {} declares {}",
                model.name, model.state_dim, node.id, node.state_dim
            )));
        }
        let inputs = net.inputs(node.id);
        if !model.accepts(inputs.len()) {
            return Err(Error::Assembly(format!(
                "model \"{}\" ({:?}) cannot take the {} input arrows of node {}",
                model.name,
                model.arity,
                inputs.len(),
                node.id
            )));
        }
        for name in &model.required_params {
            params.get(name)?;
        }
        let mut groups: BTreeMap<String, Vec<(u32, NodeId)>> = BTreeMap::new();
        for a in inputs {
            groups.entry(a.arrow_type.clone()).or_default().push((a.id, a.tail));
        }
        let groups = groups
            .into_iter()
            .map(|(ty, mut tails)| {
                tails.sort();
                (ty, tails.into_iter().map(|(_, t)| t).collect())
            })
            .collect();
        wiring.push(groups);
        bound.push(Arc::clone(model));
        offsets.push(total);
        dims.push(node.state_dim);
        total += node.state_dim;
    }

    Ok(AdmissibleSystem {
        net: net.clone(),
        params,
        models: bound,
        offsets,
        dims,
        total,
        wiring,
    })
}

impl AdmissibleSystem {
    pub fn dim(&self) -> usize {
        self.total
    }

    pub fn offset(&self, id: NodeId) -> usize {
        self.offsets[id.index()]
    }

    pub fn node_dim(&self, id: NodeId) -> usize {
        self.dims[id.index()]
    }

    pub fn model(&self, id: NodeId) -> &Arc<NodeModel> {
        &self.models[id.index()]
    }

    pub fn block<'a>(&self, x: &'a [f64], id: NodeId) -> &'a [f64] {
        let o = self.offset(id);
        &x[o..o + self.node_dim(id)]
    }

    pub fn block_mut<'a>(&self, x: &'a mut [f64], id: NodeId) -> &'a mut [f64] {
        let o = self.offset(id);
        let d = self.node_dim(id);
        &mut x[o..o + d]
    }

    /// Sum of per-node Euclidean block norms.
    pub fn net_norm(&self, x: &[f64]) -> f64 {
        self.net
            .node_ids()
            .map(|id| self.block(x, id).iter().map(|v| v * v).sum::<f64>().sqrt())
            .sum()
    }

    fn gather<'a>(&'a self, x: &'a [f64], id: NodeId) -> Vec<InputGroup<'a>> {
        self.wiring[id.index()]
            .iter()
            .map(|(ty, tails)| InputGroup {
                arrow_type: ty.as_str(),
                states: tails.iter().map(|&t| self.block(x, t)).collect(),
            })
            .collect()
    }

    /// Full right-hand side into `out` (length [`dim`](Self::dim)).
    pub fn rhs(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        for node in &self.net.nodes {
            let groups = self.gather(x, node.id);
            let o = self.offset(node.id);
            let d = self.node_dim(node.id);
            self.models[node.id.index()].eval(
                t,
                self.block(x, node.id),
                &groups,
                &self.params,
                &mut out[o..o + d],
            )?;
            if out[o..o + d].iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { node: node.id, t });
            }
        }
        Ok(())
    }

    pub fn rhs_vec(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.total];
        self.rhs(t, x, &mut out)?;
        Ok(out)
    }

    /// Partial derivative of node `id`'s component with respect to its own
    /// state, holding all inputs fixed (self-loop inputs included). This is
    /// the internal dynamic's Jacobian block.
    pub fn internal_block(&self, t: f64, x: &[f64], id: NodeId) -> Result<DMatrix<f64>> {
        let own = self.block(x, id);
        let groups = self.gather(x, id);
        let model = &self.models[id.index()];
        match model.d_own(t, own, &groups, &self.params) {
            Some(res) => res,
            None => self.fd_own(t, x, id),
        }
    }

    fn fd_own(&self, t: f64, x: &[f64], id: NodeId) -> Result<DMatrix<f64>> {
        let model = &self.models[id.index()];
        let d = self.node_dim(id);
        let groups = self.gather(x, id);
        let own = self.block(x, id);
        let mut j = DMatrix::zeros(d, d);
        let mut fp = vec![0.0; d];
        let mut fm = vec![0.0; d];
        for i in 0..d {
            let h = 1e-6_f64.max(1e-6 * own[i].abs());
            let mut xp = own.to_vec();
            let mut xm = own.to_vec();
            xp[i] += h;
            xm[i] -= h;
            model.eval(t, &xp, &groups, &self.params, &mut fp)?;
            model.eval(t, &xm, &groups, &self.params, &mut fm)?;
            for r in 0..d {
                j[(r, i)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        Ok(j)
    }

    /// Derivative of node `head`'s component with respect to the state of
    /// `tail`, summed over all arrows from `tail` to `head` (central finite
    /// differences; the `own` argument stays fixed, so a self-loop tail
    /// yields only the coupling contribution).
    fn fd_tail(&self, t: f64, x: &[f64], head: NodeId, tail: NodeId) -> Result<DMatrix<f64>> {
        let model = &self.models[head.index()];
        let dh = self.node_dim(head);
        let dt = self.node_dim(tail);
        let own = self.block(x, head).to_vec();
        let mut j = DMatrix::zeros(dh, dt);
        let mut fp = vec![0.0; dh];
        let mut fm = vec![0.0; dh];
        let mut xbuf = x.to_vec();
        for i in 0..dt {
            let o = self.offset(tail) + i;
            let h = 1e-6_f64.max(1e-6 * x[o].abs());
            xbuf[o] = x[o] + h;
            let groups = self.gather(&xbuf, head);
            model.eval(t, &own, &groups, &self.params, &mut fp)?;
            xbuf[o] = x[o] - h;
            let groups = self.gather(&xbuf, head);
            model.eval(t, &own, &groups, &self.params, &mut fm)?;
            xbuf[o] = x[o];
            for r in 0..dh {
                j[(r, i)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        Ok(j)
    }

    /// Full Jacobian. Blocks without an arrow are exact zeros; diagonal
    /// blocks combine the internal partial with any self-loop coupling.
    pub fn jacobian(&self, t: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        let mut j = DMatrix::zeros(self.total, self.total);
        for node in &self.net.nodes {
            let id = node.id;
            let o = self.offset(id);
            let internal = self.internal_block(t, x, id)?;
            j.view_mut((o, o), internal.shape()).copy_from(&internal);

            let model = &self.models[id.index()];
            if model.has_input_partials() {
                let own = self.block(x, id);
                let groups = self.gather(x, id);
                for (g, (_, tails)) in self.wiring[id.index()].iter().enumerate() {
                    for (slot, &tail) in tails.iter().enumerate() {
                        let block = model
                            .d_input(t, own, &groups, &self.params, g, slot)
                            .unwrap()?;
                        let mut view =
                            j.view_mut((o, self.offset(tail)), (block.nrows(), block.ncols()));
                        view += &block;
                    }
                }
            } else {
                let tails: BTreeSet<NodeId> = self.wiring[id.index()]
                    .iter()
                    .flat_map(|(_, t)| t.iter().copied())
                    .collect();
                for tail in tails {
                    let block = self.fd_tail(t, x, id, tail)?;
                    let mut view =
                        j.view_mut((o, self.offset(tail)), (block.nrows(), block.ncols()));
                    view += &block;
                }
            }
        }
        Ok(j)
    }

    /// Time offsets in `(t0, t1)` at which some model's time dependence is
    /// only piecewise smooth.
    pub fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut pts = BTreeSet::new();
        for model in &self.models {
            if let Some(pattern) = model.breakpoint_pattern(&self.params) {
                let mut k = (t0 / pattern.period).floor() - 1.0;
                loop {
                    let base = k * pattern.period;
                    if base > t1 {
                        break;
                    }
                    for &off in &pattern.offsets {
                        let t = base + off;
                        if t > t0 && t < t1 {
                            // Deduplicate by bit pattern; offsets repeat per period.
                            pts.insert(t.to_bits());
                        }
                    }
                    k += 1.0;
                }
            }
        }
        pts.into_iter().map(f64::from_bits).collect()
    }
}

/// Correspondence from colours to the base (quotient or CPG) node carrying
/// each colour class.
#[derive(Clone, Debug, PartialEq)]
pub struct ColourBase {
    pub to_base: BTreeMap<String, NodeId>,
}

impl ColourBase {
    pub fn from_quotient(q: &Quotient) -> Self {
        ColourBase { to_base: q.colour_to_node.clone() }
    }

    /// Base nodes are the CPG nodes themselves: each colour maps to its
    /// smallest CPG representative.
    pub fn from_cpg(kappa: &Colouring, cpg_nodes: &[NodeId]) -> Self {
        let mut to_base = BTreeMap::new();
        let mut sorted = cpg_nodes.to_vec();
        sorted.sort();
        for id in sorted {
            if let Some(c) = kappa.colour(id) {
                to_base.entry(c.to_string()).or_insert(id);
            }
        }
        ColourBase { to_base }
    }
}

/// Lifts a base state to the full network: node `c`'s block is copied from
/// the base node carrying `c`'s colour.
pub fn lift_state(
    base_sys: &AdmissibleSystem,
    x_base: &[f64],
    base: &ColourBase,
    kappa: &Colouring,
    lifted_sys: &AdmissibleSystem,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; lifted_sys.dim()];
    for id in lifted_sys.net.node_ids() {
        let colour = kappa.colour_or_err(id)?;
        let b = *base
            .to_base
            .get(colour)
            .ok_or_else(|| Error::UnknownColour(colour.to_string()))?;
        let src = base_sys.block(x_base, b);
        let dst = lifted_sys.block_mut(&mut out, id);
        if src.len() != dst.len() {
            return Err(Error::Assembly(format!(
                "dimension mismatch lifting colour {colour} to node {id}"
            )));
        }
        dst.copy_from_slice(src);
    }
    Ok(out)
}

/// Restricts a synchronous state to the base network, checking that every
/// colour class is synchronous to within `tol` (maximal componentwise
/// deviation from the class representative).
pub fn restrict_state(
    lifted_sys: &AdmissibleSystem,
    x: &[f64],
    base: &ColourBase,
    kappa: &Colouring,
    base_sys: &AdmissibleSystem,
    tol: f64,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; base_sys.dim()];
    let classes = kappa.classes();
    for (colour, members) in &classes {
        let Some(&b) = base.to_base.get(colour) else {
            return Err(Error::UnknownColour(colour.clone()));
        };
        let rep = members[0];
        let rep_block = lifted_sys.block(x, rep);
        for &m in &members[1..] {
            let mb = lifted_sys.block(x, m);
            let dev = rep_block
                .iter()
                .zip(mb.iter())
                .map(|(a, c)| (a - c).abs())
                .fold(0.0_f64, f64::max);
            if dev > tol {
                return Err(Error::NotSynchronous(format!(
                    "nodes {rep} and {m} (colour {colour}) differ by {dev:.3e} > {tol:.3e}"
                )));
            }
        }
        base_sys.block_mut(&mut out, b).copy_from_slice(rep_block);
    }
    Ok(out)
}

/// Default synchrony tolerance used when restricting states.
pub const SYNCHRONY_TOL: f64 = 1e-7;
