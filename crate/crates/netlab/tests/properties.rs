//! Randomized structural properties: balance, quotients, lifts and
//! admissibility quantified over generated networks rather than fixtures.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;

use netlab::lift::{build_feedforward_lift, verify_feedforward_lift, Addition, LiftSpec, TailPolicy};
use netlab::model::{scalar_generic, stable_sum, Params};
use netlab::network::{
    coarsest_balanced, input_multiset, is_balanced, path_components, quotient, Colouring, Network,
    NodeId,
};
use netlab::phase::{build_phase_lift, Automorphism};
use netlab::system::{assemble, lift_state, ColourBase};

const COLOUR_POOL: [&str; 3] = ["A", "B", "C"];

fn arb_net() -> impl Strategy<Value = Network> {
    (1u32..=6).prop_flat_map(|n| {
        prop::collection::vec((1..=n, 1..=n), 0..=(2 * n as usize + 2))
            .prop_map(move |arcs| Network::homogeneous(n, "cell", "R", 1, "syn", &arcs))
    })
}

/// A network together with a random seed colouring.
fn arb_net_and_seed() -> impl Strategy<Value = (Network, Colouring)> {
    arb_net().prop_flat_map(|net| {
        let n = net.n_nodes();
        prop::collection::vec(0usize..COLOUR_POOL.len(), n).prop_map(move |picks| {
            let kappa = Colouring::from_pairs(
                picks.iter().enumerate().map(|(i, &k)| (i as u32 + 1, COLOUR_POOL[k])),
            );
            (net.clone(), kappa)
        })
    })
}

fn model_bundle() -> BTreeMap<String, Arc<netlab::model::NodeModel>> {
    let mut m = BTreeMap::new();
    m.insert("cell".to_string(), scalar_generic("-u^3 + 0.4*u - 0.7*v").unwrap());
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn all_distinct_colouring_is_always_balanced(net in arb_net()) {
        let kappa = Colouring::trivial(&net);
        prop_assert!(is_balanced(&net, &kappa).unwrap().balanced);
    }

    #[test]
    fn coarsest_balanced_is_balanced_and_idempotent((net, seed) in arb_net_and_seed()) {
        let kappa = coarsest_balanced(&net, &seed).unwrap();
        prop_assert!(is_balanced(&net, &kappa).unwrap().balanced);
        let again = coarsest_balanced(&net, &kappa).unwrap();
        let as_map = |k: &Colouring| -> Vec<(NodeId, String)> {
            k.iter().map(|(id, c)| (id, c.to_string())).collect()
        };
        prop_assert_eq!(as_map(&again), as_map(&kappa));
    }

    #[test]
    fn balanced_classes_share_input_multisets((net, seed) in arb_net_and_seed()) {
        let kappa = coarsest_balanced(&net, &seed).unwrap();
        let ids: Vec<NodeId> = net.node_ids().collect();
        for &a in &ids {
            for &b in &ids {
                if kappa.colour(a) == kappa.colour(b) {
                    let ma = input_multiset(&net, &kappa, a).unwrap();
                    let mb = input_multiset(&net, &kappa, b).unwrap();
                    prop_assert_eq!(ma.counts(), mb.counts());
                }
            }
        }
    }

    #[test]
    fn quotient_preserves_input_structure((net, seed) in arb_net_and_seed()) {
        let kappa = coarsest_balanced(&net, &seed).unwrap();
        let q = quotient(&net, &kappa).unwrap();
        // The quotient's own (all-distinct) colouring is balanced.
        prop_assert!(is_balanced(&q.net, &q.colouring).unwrap().balanced);
        // Each quotient node sees exactly the input multiset of the class
        // it collapses, with tail classes as colours.
        for (colour, &qnode) in &q.colour_to_node {
            let rep = kappa
                .classes()
                .get(colour)
                .map(|members| members[0])
                .unwrap();
            let above = input_multiset(&net, &kappa, rep).unwrap();
            let below = input_multiset(&q.net, &q.colouring, qnode).unwrap();
            let renamed: BTreeMap<(String, String), usize> = below
                .counts()
                .iter()
                .map(|((at, tail_colour), &k)| {
                    // Quotient colours are the class colours themselves.
                    ((at.clone(), tail_colour.clone()), k)
                })
                .collect();
            prop_assert_eq!(above.counts(), &renamed);
        }
    }

    #[test]
    fn path_component_order_is_compatible(net in arb_net()) {
        let pc = path_components(&net);
        let pos: BTreeMap<NodeId, usize> =
            pc.order.iter().enumerate().map(|(k, &id)| (id, k)).collect();
        for arrow in &net.arrows {
            let (ct, ch) = (pc.membership[&arrow.tail], pc.membership[&arrow.head]);
            // Arrows stay inside a component or point to a later one.
            prop_assert!(ct <= ch);
            if ct != ch {
                prop_assert!(pos[&arrow.tail] < pos[&arrow.head]);
            }
        }
        for &(a, b) in &pc.edges {
            prop_assert!(a < b);
        }
    }

    #[test]
    fn feedforward_lifts_verify_balance_and_components(
        (net, seed) in arb_net_and_seed(),
        picks in prop::collection::vec((0usize..8, prop::bool::ANY), 1..=4),
    ) {
        let kappa = coarsest_balanced(&net, &seed).unwrap();
        // A copy of a node with no inputs would dangle (it cannot be
        // downstream of the CPG), and the constructor refuses to build it;
        // only colours that receive arrows can be appended.
        let colours: Vec<String> = kappa
            .classes()
            .iter()
            .filter(|(_, members)| !net.inputs(members[0]).is_empty())
            .map(|(c, _)| c.clone())
            .collect();
        prop_assume!(!colours.is_empty());
        let additions: Vec<Addition> = picks
            .iter()
            .map(|&(c, direct)| Addition {
                colour: colours[c % colours.len()].clone(),
                policy: if direct { TailPolicy::CpgDirect } else { TailPolicy::NearestUpstream },
            })
            .collect();
        let spec = LiftSpec { cpg: net.node_ids().collect(), additions: additions.clone() };
        let lift = build_feedforward_lift(&net, &kappa, &spec).unwrap();

        let cpg_set: BTreeSet<NodeId> = net.node_ids().collect();
        prop_assert!(verify_feedforward_lift(&lift.net, &cpg_set, &lift.colouring).ok());
        prop_assert!(is_balanced(&lift.net, &lift.colouring).unwrap().balanced);

        // Path components: the CPG's components followed by one singleton
        // per appended node.
        let below = path_components(&net);
        let above = path_components(&lift.net);
        let mut expected = below.components.clone();
        for k in 0..additions.len() {
            expected.push(vec![NodeId(net.n_nodes() as u32 + 1 + k as u32)]);
        }
        let sorted = |mut v: Vec<Vec<NodeId>>| {
            v.sort();
            v
        };
        prop_assert_eq!(sorted(above.components.clone()), sorted(expected));

        // The lift's quotient is the CPG's quotient: same nodes per colour,
        // same arrow multiset over (type, tail colour, head colour).
        let qc = quotient(&net, &kappa).unwrap();
        let ql = quotient(&lift.net, &lift.colouring).unwrap();
        prop_assert_eq!(&qc.colour_to_node, &ql.colour_to_node);
        let arrow_profile = |q: &netlab::network::Quotient| -> BTreeMap<(String, String, String), usize> {
            let mut out = BTreeMap::new();
            for a in &q.net.arrows {
                let key = (
                    a.arrow_type.clone(),
                    q.colouring.colour(a.tail).unwrap().to_string(),
                    q.colouring.colour(a.head).unwrap().to_string(),
                );
                *out.entry(key).or_insert(0) += 1;
            }
            out
        };
        prop_assert_eq!(arrow_profile(&qc), arrow_profile(&ql));
    }

    #[test]
    fn phase_lift_arrows_advance_phase_by_one_step(
        k in 2u32..=6,
        copies in 0u32..=12,
    ) {
        let arcs: Vec<(u32, u32)> = (1..=k).map(|i| (i, i % k + 1)).collect();
        let ring = Network::homogeneous(k, "cell", "R", 1, "syn", &arcs);
        let alpha = Automorphism {
            map: (1..=k).map(|i| (NodeId(i), NodeId(i % k + 1))).collect(),
            order: k,
        };
        let pl = build_phase_lift(&ring, &alpha, &[NodeId(1)], copies, false).unwrap();

        // Every arrow of a rotation-ring lift advances the phase by exactly
        // 1/k, the phase difference of the template arrows.
        for arrow in &pl.lift.net.arrows {
            let ph = |id: NodeId| {
                let p = pl.phases.phase(id).unwrap();
                // Denominators divide k, so this is exact.
                p.num * (k / p.den)
            };
            prop_assert_eq!((ph(arrow.head) + k - ph(arrow.tail)) % k, 1);
        }
        prop_assert!(is_balanced(&pl.lift.net, &pl.lift.colouring).unwrap().balanced);
    }

    #[test]
    fn rhs_ignores_undeclared_inputs(
        (net, seed) in arb_net_and_seed(),
        x0 in prop::collection::vec(-1.5f64..1.5, 6),
        bump in -2.0f64..2.0,
    ) {
        let _ = seed;
        let sys = assemble(&net, &model_bundle(), Params::new()).unwrap();
        let x: Vec<f64> = x0[..sys.dim()].to_vec();
        let base = sys.rhs_vec(0.0, &x).unwrap();
        for c in net.node_ids() {
            let declared: BTreeSet<NodeId> =
                net.inputs(c).iter().map(|a| a.tail).chain([c]).collect();
            for d in net.node_ids() {
                if declared.contains(&d) {
                    continue;
                }
                let mut y = x.clone();
                sys.block_mut(&mut y, d)[0] += bump;
                let moved = sys.rhs_vec(0.0, &y).unwrap();
                // Exact: untouched blocks may not move at all.
                prop_assert_eq!(sys.block(&moved, c)[0], sys.block(&base, c)[0]);
            }
        }
    }

    #[test]
    fn rhs_is_exactly_invariant_under_arrow_reordering(
        (net, perm_seed) in arb_net().prop_flat_map(|net| {
            let m = net.arrows.len().max(1);
            (Just(net), prop::collection::vec(0usize..m, 8))
        }),
        x0 in prop::collection::vec(-1.5f64..1.5, 6),
    ) {
        // Shuffle the arrow list (ids follow list order) and compare.
        let mut arcs: Vec<(u32, u32)> =
            net.arrows.iter().map(|a| (a.tail.0, a.head.0)).collect();
        for (i, &j) in perm_seed.iter().enumerate() {
            if !arcs.is_empty() {
                let a = i % arcs.len();
                let b = j % arcs.len();
                arcs.swap(a, b);
            }
        }
        let shuffled = Network::homogeneous(net.n_nodes() as u32, "cell", "R", 1, "syn", &arcs);
        let sys_a = assemble(&net, &model_bundle(), Params::new()).unwrap();
        let sys_b = assemble(&shuffled, &model_bundle(), Params::new()).unwrap();
        let x: Vec<f64> = x0[..sys_a.dim()].to_vec();
        let ra = sys_a.rhs_vec(0.0, &x).unwrap();
        let rb = sys_b.rhs_vec(0.0, &x).unwrap();
        prop_assert_eq!(ra, rb);
    }

    #[test]
    fn quotient_dynamics_commute_with_lifting(
        (net, seed) in arb_net_and_seed(),
        xq in prop::collection::vec(-1.2f64..1.2, 6),
    ) {
        let kappa = coarsest_balanced(&net, &seed).unwrap();
        let q = quotient(&net, &kappa).unwrap();
        let sys = assemble(&net, &model_bundle(), Params::new()).unwrap();
        let qsys = assemble(&q.net, &model_bundle(), Params::new()).unwrap();
        let base = ColourBase::from_quotient(&q);

        let x_base: Vec<f64> = xq[..qsys.dim()].to_vec();
        let x = lift_state(&qsys, &x_base, &base, &kappa, &sys).unwrap();
        let up = sys.rhs_vec(0.0, &x).unwrap();
        let down = qsys.rhs_vec(0.0, &x_base).unwrap();
        let lifted = lift_state(&qsys, &down, &base, &kappa, &sys).unwrap();
        // Input sums are order-insensitive by construction, so the two
        // routes agree bitwise, not just approximately.
        prop_assert_eq!(up, lifted);
    }

    #[test]
    fn stable_sum_ignores_permutation(
        values in prop::collection::vec((-1.0f64..1.0, -20i32..20), 0..12),
        swaps in prop::collection::vec((0usize..12, 0usize..12), 6),
    ) {
        let v: Vec<f64> = values.iter().map(|&(m, e)| m * 2f64.powi(e)).collect();
        let mut w = v.clone();
        for &(a, b) in &swaps {
            if !w.is_empty() {
                let (a, b) = (a % w.len(), b % w.len());
                w.swap(a, b);
            }
        }
        let sa = stable_sum(v.iter().copied());
        let sb = stable_sum(w.iter().copied());
        prop_assert_eq!(sa.to_bits(), sb.to_bits());
    }
}
