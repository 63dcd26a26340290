//! Shared example networks and parameter sets used by tests, the benchmark
//! fixtures shipped with the CLI and the counterexample demos.

use std::collections::BTreeMap;

use crate::model::Params;
use crate::network::{Colouring, Network, NodeId};
use crate::orbit::OrbitConfig;

/// Seven-node feedforward lift of a three-node ring: arrows
/// 3->1, 1->2, 2->3 close the recurrent core {1,2,3}, then a chain
/// 3->4->5->6->7 hangs off it. One node type, one arrow type.
pub fn fig1_network() -> Network {
    Network::homogeneous(
        7,
        "cell",
        "R",
        1,
        "syn",
        &[(3, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7)],
    )
}

/// The same network with two-dimensional nodes (used for the
/// FitzHugh-Nagumo fixtures).
pub fn fig1_network_2d() -> Network {
    Network::homogeneous(
        7,
        "fhn",
        "R2",
        2,
        "syn",
        &[(3, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7)],
    )
}

/// The balanced three-colour pattern on [`fig1_network`]:
/// {1,4,7} -> W, {2,5} -> G, {3,6} -> B.
pub fn fig1_colouring() -> Colouring {
    Colouring::from_pairs([
        (1, "W"),
        (2, "G"),
        (3, "B"),
        (4, "W"),
        (5, "G"),
        (6, "B"),
        (7, "W"),
    ])
}

/// Unidirectional three-ring carrying cyclic symmetry: arrows
/// 3->1, 1->2, 2->3.
pub fn ring3_network() -> Network {
    Network::homogeneous(3, "cell", "R", 1, "syn", &[(3, 1), (1, 2), (2, 3)])
}

/// Two-dimensional variant of [`ring3_network`].
pub fn ring3_network_2d() -> Network {
    Network::homogeneous(3, "fhn", "R2", 2, "syn", &[(3, 1), (1, 2), (2, 3)])
}

/// The cyclic shift 1 -> 2 -> 3 -> 1 as a map.
pub fn ring3_shift() -> BTreeMap<NodeId, NodeId> {
    [(NodeId(1), NodeId(2)), (NodeId(2), NodeId(3)), (NodeId(3), NodeId(1))]
        .into_iter()
        .collect()
}

/// One node with a self-loop; its feedforward lifts are chains in which
/// every node listens to its predecessor.
pub fn self_loop_network(node_type: &str, state_dim: usize) -> Network {
    Network::homogeneous(1, node_type, "R2", state_dim, "syn", &[(1, 1)])
}

/// Parameter set at which the inhibitory FitzHugh-Nagumo three-ring
/// ([`ring3_network_2d`] with the `fhn_voltage` model) carries an
/// attracting rotating wave: each node runs one third of a period ahead
/// of the node driving it, i.e. `x_2(t) = x_1(t + T/3)` under the shift
/// [`ring3_shift`].
pub fn fhn_wave_params() -> Params {
    Params::from_pairs([("a", 0.1), ("b", 0.01), ("gamma", 0.02), ("I", 0.1), ("mu", -0.05)])
}

/// A state on (numerically: within ~1e-9 of) the rotating wave of
/// [`fhn_wave_params`], ordered `(V1, W1, V2, W2, V3, W3)`. Starting orbit
/// searches here keeps the transient short and the runs deterministic.
pub fn fhn_wave_seed() -> Vec<f64> {
    vec![
        -0.2500470628910715,
        0.1599041020794109,
        0.17925672124670125,
        0.08433058208391221,
        0.8392360306547201,
        0.2050157725463642,
    ]
}

/// Orbit-search settings matched to [`fhn_wave_seed`]: long enough for three
/// section returns at period ~71.9, with a dense final pass.
pub fn fhn_wave_orbit_config() -> OrbitConfig {
    OrbitConfig {
        transient: 200.0,
        max_time: 250.0,
        min_samples: 600,
        ..OrbitConfig::default()
    }
}

/// Reference values for the [`fhn_wave_params`] rotating wave, frozen from an
/// independent implementation (different integrator, different orbit locator)
/// run at tight tolerance. Residual accuracy there was ~1e-9.
pub mod fhn_wave_reference {
    /// Period of the wave.
    pub const PERIOD: f64 = 71.890284548;
    /// Magnitude of the leading nontrivial Floquet multiplier of the
    /// three-node ring (a complex pair).
    pub const LEADING_NONTRIVIAL_MAG: f64 = 0.236309094;
    /// The third nontrivial multiplier (real).
    pub const THIRD_MULTIPLIER: f64 = 0.001103439;
    /// Magnitude of the leading transverse multiplier of any chain node
    /// hung off the ring (per colour; the second one is ~1e-12, i.e. below
    /// integration accuracy).
    pub const TRANSVERSE_LEADING_MAG: f64 = 0.289050806;
}
