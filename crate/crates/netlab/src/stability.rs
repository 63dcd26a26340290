//! Floquet stability of lifted orbits.
//!
//! The central computation: the multipliers of a feedforward lift split into
//! the CPG's own multipliers plus, for every appended node, the multipliers
//! of that node's internal variational block driven along the orbit. This
//! module computes both sides independently and certifies the pairing, plus
//! three supporting views: frozen-time (pointwise) transverse eigenvalue
//! reports, empirical perturbation probes, and travelling-wave verification.
//! Two classical demonstrations close the file: systems whose frozen-time
//! eigenvalues are stable at every instant while the orbit is Floquet
//! unstable, which is why the pointwise report never gets the last word.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eigen::{eigenvalues, match_multisets, match_multisets_clustered, Matching};
use crate::error::{Error, Result};
use crate::integrate::{integrate, FnOde, IntegratorConfig};
use crate::model::{my_matrix, switch_matrix};
use crate::monodromy::{monodromy, period_map, Monodromy};
use crate::network::{Colouring, NodeId};
use crate::orbit::PeriodicOrbit;
use crate::phase::{Phase, PhaseAssignment};
use crate::system::{AdmissibleSystem, ColourBase, SYNCHRONY_TOL};

/// Relative tolerance for pairing the lift's multipliers against the
/// CPG-plus-transverse pool.
pub const TOL_MATCH: f64 = 1e-5;
/// A multiplier counts as contracting when its magnitude is below
/// `1 - STABILITY_MARGIN`.
pub const STABILITY_MARGIN: f64 = 1e-6;
/// Frozen-time verdicts require every sampled eigenvalue real part below
/// `-POINTWISE_MARGIN`.
pub const POINTWISE_MARGIN: f64 = 1e-8;
/// The trivial (flow-direction) multiplier is recognized within this
/// distance of 1.
pub const TRIVIAL_TOL: f64 = 1e-4;

/// Floquet multipliers of one appended node of colour `[node]`: the period
/// map of `y' = B(t) y`, where `B` is the internal block of the CPG node
/// carrying the colour, evaluated along the orbit shifted by `phase` of a
/// period. The result never depends on how many nodes hang off the CPG.
pub fn transverse_floquet(
    cpg_sys: &AdmissibleSystem,
    orbit: &PeriodicOrbit,
    node: NodeId,
    phase: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<Complex<f64>>> {
    let d = cpg_sys.node_dim(node);
    let t_period = orbit.period;
    let phi = period_map(
        |t| {
            let a = orbit.state_at(t + phase * t_period);
            cpg_sys.internal_block(t, &a, node)
        },
        d,
        t_period,
        cpg_sys.breakpoints(0.0, t_period),
        cfg,
    )?;
    eigenvalues(&phi)
}

/// Closed form for one-dimensional nodes: the transverse multiplier is
/// `exp` of the quadrature of the scalar internal derivative along the
/// orbit. Independent route used to cross-check [`transverse_floquet`].
pub fn transverse_quadrature(
    cpg_sys: &AdmissibleSystem,
    orbit: &PeriodicOrbit,
    node: NodeId,
    phase: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    if cpg_sys.node_dim(node) != 1 {
        return Err(Error::Stability(format!(
            "quadrature form only applies to scalar nodes; node {node} has dimension {}",
            cpg_sys.node_dim(node)
        )));
    }
    let t_period = orbit.period;
    let q = FnOde {
        dim: 1,
        f: |t: f64, _: &[f64], out: &mut [f64]| {
            let a = orbit.state_at(t + phase * t_period);
            out[0] = cpg_sys.internal_block(t, &a, node)?[(0, 0)];
            Ok(())
        },
        breakpoints: cpg_sys.breakpoints(0.0, t_period),
    };
    Ok(integrate(&q, &[0.0], 0.0, t_period, cfg)?.end_state()[0].exp())
}

/// The certified multiplier decomposition of a lifted orbit.
#[derive(Clone, Debug)]
pub struct FloquetReport {
    /// Multipliers of the full lifted system, canonically ordered.
    pub full: Vec<Complex<f64>>,
    /// Multipliers of the CPG alone.
    pub cpg: Vec<Complex<f64>>,
    /// Transverse multipliers per appended node.
    pub transverse: BTreeMap<NodeId, Vec<Complex<f64>>>,
    /// Index into `full` of the flow-direction multiplier, when one lies
    /// within [`TRIVIAL_TOL`] of 1 (equilibria and declared-period
    /// pseudo-orbits have none).
    pub trivial_index: Option<usize>,
    /// Optimal pairing of `full` against `cpg` followed by the transverse
    /// sets in node order.
    pub pairing: Matching,
    pub cpg_stable: bool,
    pub transverse_stable: BTreeMap<NodeId, bool>,
    /// `cpg_stable` and every transverse set contracting.
    pub lift_stable: bool,
    pub full_monodromy: Monodromy,
    pub cpg_monodromy: Monodromy,
}

fn closest_to_one(vals: &[Complex<f64>]) -> Option<usize> {
    let one = Complex::new(1.0, 0.0);
    vals.iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| (*a - one).norm().total_cmp(&(*b - one).norm()))
        .and_then(|(i, v)| ((v - one).norm() <= TRIVIAL_TOL).then_some(i))
}

fn contracting(vals: &[Complex<f64>], skip: Option<usize>) -> bool {
    vals.iter()
        .enumerate()
        .all(|(i, v)| Some(i) == skip || v.norm() < 1.0 - STABILITY_MARGIN)
}

/// Computes the lift's multipliers twice — once from the full variational
/// equation, once as CPG multipliers plus per-node transverse multipliers —
/// and certifies that the two multisets agree to [`TOL_MATCH`] (relative,
/// with magnitudes below 1 treated absolutely). Verdicts: the CPG factor is
/// judged with the trivial multiplier excluded, each appended node by its
/// transverse set alone, and the lift is stable when both sides are.
#[allow(clippy::too_many_arguments)]
pub fn decomposition_check(
    lift_sys: &AdmissibleSystem,
    lifted_orbit: &PeriodicOrbit,
    cpg_sys: &AdmissibleSystem,
    cpg_orbit: &PeriodicOrbit,
    kappa: &Colouring,
    cpg_nodes: &[NodeId],
    base: &ColourBase,
    phases: Option<&PhaseAssignment>,
    cfg: &IntegratorConfig,
) -> Result<FloquetReport> {
    let full_monodromy = monodromy(lift_sys, lifted_orbit, cfg)?;
    let full = full_monodromy.multipliers()?;
    let cpg_monodromy = monodromy(cpg_sys, cpg_orbit, cfg)?;
    let cpg = cpg_monodromy.multipliers()?;

    let cpg_set: BTreeSet<NodeId> = cpg_nodes.iter().copied().collect();
    let mut transverse = BTreeMap::new();
    let mut pool = cpg.clone();
    for id in lift_sys.net.node_ids() {
        if cpg_set.contains(&id) {
            continue;
        }
        let colour = kappa.colour_or_err(id)?;
        let b = *base
            .to_base
            .get(colour)
            .ok_or_else(|| Error::UnknownColour(colour.to_string()))?;
        // The base node's waveform already carries its own phase; only the
        // offset relative to it shifts the driving signal.
        let rel_phase = phases.map_or(0.0, |p| {
            let of = |n: NodeId| p.phase(n).map_or(0.0, |ph| ph.as_f64());
            (of(id) - of(b)).rem_euclid(1.0)
        });
        let tv = transverse_floquet(cpg_sys, cpg_orbit, b, rel_phase, cfg)?;
        pool.extend(tv.iter().copied());
        transverse.insert(id, tv);
    }

    if pool.len() != full.len() {
        return Err(Error::Stability(format!(
            "dimension bookkeeping failed: {} full multipliers vs {} in the decomposition",
            full.len(),
            pool.len()
        )));
    }
    // Repeated multipliers (same-colour or phase-copy chain nodes) make the
    // full monodromy defective, so individual eigenvalues split; match
    // repeated references by cluster mean instead.
    let pairing = match_multisets_clustered(&full, &pool, TOL_MATCH)?;
    if pairing.max_relative_residual > TOL_MATCH {
        let rounded: Vec<String> =
            pairing.residuals.iter().map(|r| format!("{r:.3e}")).collect();
        return Err(Error::Stability(format!(
            "lift multipliers do not decompose into CPG + transverse: worst pairing \
             residual {:.3e} exceeds {TOL_MATCH:.1e} (residuals [{}])",
            pairing.max_relative_residual,
            rounded.join(", ")
        )));
    }

    let trivial_index = closest_to_one(&full);
    let cpg_trivial = closest_to_one(&cpg);
    let cpg_stable = contracting(&cpg, cpg_trivial);
    let transverse_stable: BTreeMap<NodeId, bool> =
        transverse.iter().map(|(&id, tv)| (id, contracting(tv, None))).collect();
    let lift_stable = cpg_stable && transverse_stable.values().all(|&ok| ok);

    Ok(FloquetReport {
        full,
        cpg,
        transverse,
        trivial_index,
        pairing,
        cpg_stable,
        transverse_stable,
        lift_stable,
        full_monodromy,
        cpg_monodromy,
    })
}

/// Frozen-time view of one node's transverse block.
#[derive(Clone, Debug)]
pub struct NodePointwise {
    /// Eigenvalues of the internal block at each sample time.
    pub eigenvalues: Vec<Vec<Complex<f64>>>,
    /// Largest real part over all samples.
    pub max_real: f64,
    /// Accumulated angle (radians) swept by the leading eigenvector of the
    /// block's symmetric part over the period. Large values flag the
    /// rotating, non-normal regime in which frozen-time eigenvalues say
    /// nothing about the multipliers. Diagnostic only — no verdict.
    pub eigenvector_rotation: f64,
}

/// Pointwise (frozen-time) transverse eigenvalues along the orbit.
#[derive(Clone, Debug)]
pub struct TransverseSubspaceReport {
    pub times: Vec<f64>,
    pub nodes: BTreeMap<NodeId, NodePointwise>,
    pub max_real: f64,
    /// True when every sampled eigenvalue has real part below
    /// `-`[`POINTWISE_MARGIN`]. This is *not* an orbital-stability
    /// certificate; see the demonstrations at the end of this module.
    pub transversely_stable: bool,
}

/// Samples the internal blocks of `nodes` at `grid + 1` equispaced times
/// covering one period and reports their frozen-time eigenvalues.
pub fn transverse_subspace_report(
    cpg_sys: &AdmissibleSystem,
    orbit: &PeriodicOrbit,
    nodes: &[NodeId],
    grid: usize,
) -> Result<TransverseSubspaceReport> {
    if grid == 0 {
        return Err(Error::Stability("the sampling grid must be positive".into()));
    }
    let times: Vec<f64> =
        (0..=grid).map(|k| orbit.period * k as f64 / grid as f64).collect();
    let mut out = BTreeMap::new();
    let mut max_real = f64::NEG_INFINITY;
    for &id in nodes {
        let mut evs = Vec::with_capacity(times.len());
        let mut node_max = f64::NEG_INFINITY;
        let mut rotation = 0.0;
        let mut prev: Option<DVector<f64>> = None;
        for &t in &times {
            let a = orbit.state_at(t);
            let block = cpg_sys.internal_block(t, &a, id)?;
            let ev = eigenvalues(&block)?;
            for v in &ev {
                node_max = node_max.max(v.re);
            }
            let sym = (&block + block.transpose()) * 0.5;
            let se = sym.symmetric_eigen();
            let lead = se
                .eigenvalues
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| a.total_cmp(b))
                .map(|(i, _)| i)
                .unwrap();
            let mut v = se.eigenvectors.column(lead).into_owned();
            if let Some(p) = &prev {
                // Eigenvectors carry no preferred sign; align with the
                // previous sample before measuring the swept angle.
                if v.dot(p) < 0.0 {
                    v = -v;
                }
                rotation += v.dot(p).clamp(-1.0, 1.0).acos();
            }
            prev = Some(v);
            evs.push(ev);
        }
        max_real = max_real.max(node_max);
        out.insert(
            id,
            NodePointwise { eigenvalues: evs, max_real: node_max, eigenvector_rotation: rotation },
        );
    }
    Ok(TransverseSubspaceReport {
        times,
        nodes: out,
        max_real,
        transversely_stable: max_real < -POINTWISE_MARGIN,
    })
}

/// Which components a probe perturbs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProbeClass {
    /// Only the CPG blocks.
    CpgOnly,
    /// One appended node's block.
    SingleChainNode(NodeId),
    /// Every block at once.
    Joint,
}

impl ProbeClass {
    pub fn label(&self) -> String {
        match self {
            ProbeClass::CpgOnly => "cpg".into(),
            ProbeClass::SingleChainNode(id) => format!("chain:{id}"),
            ProbeClass::Joint => "joint".into(),
        }
    }
}

/// One perturb-and-integrate experiment.
#[derive(Clone, Debug)]
pub struct ProbeOutcome {
    pub delta: f64,
    pub class: ProbeClass,
    pub probe: usize,
    /// Largest network-norm deviation from the reference orbit over the
    /// horizon (infinite when the integration failed).
    pub sup_deviation: f64,
    /// Same, restricted to the CPG blocks.
    pub sup_cpg: f64,
    /// Largest single appended-node block deviation.
    pub sup_chain: f64,
    /// A failed integration is recorded, not fatal: finite-time blowup of a
    /// perturbed run is itself evidence.
    pub error: Option<String>,
}

/// Empirical orbital-stability probe: falsification evidence only, never a
/// proof of stability.
#[derive(Clone, Debug)]
pub struct ProbeReport {
    pub seed: u64,
    pub horizon: f64,
    pub outcomes: Vec<ProbeOutcome>,
}

/// Perturbs the orbit anchor by `delta` in seeded random directions —
/// restricted to the CPG, to a single appended node, or applied jointly —
/// integrates over `horizon`, and records the supremum deviation from the
/// reference orbit. `delta = 0` rows measure the orbit's own drift.
#[allow(clippy::too_many_arguments)]
pub fn liapunov_probe(
    lift_sys: &AdmissibleSystem,
    orbit: &PeriodicOrbit,
    cpg_nodes: &[NodeId],
    deltas: &[f64],
    horizon: f64,
    probes_per_class: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<ProbeReport> {
    if !(horizon > 0.0) {
        return Err(Error::Stability("probe horizon must be positive".into()));
    }
    let cpg_set: BTreeSet<NodeId> = cpg_nodes.iter().copied().collect();
    let chain: Vec<NodeId> =
        lift_sys.net.node_ids().filter(|id| !cpg_set.contains(id)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = lift_sys.dim();
    let n_cmp = 400usize;
    let cmp_times: Vec<f64> =
        (0..=n_cmp).map(|i| horizon * i as f64 / n_cmp as f64).collect();

    let mut outcomes = Vec::new();
    for &delta in deltas {
        for probe in 0..probes_per_class {
            let mut classes = vec![ProbeClass::CpgOnly];
            if !chain.is_empty() {
                classes.push(ProbeClass::SingleChainNode(chain[probe % chain.len()]));
            }
            classes.push(ProbeClass::Joint);
            for class in classes {
                let mut dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                for id in lift_sys.net.node_ids() {
                    let keep = match &class {
                        ProbeClass::CpgOnly => cpg_set.contains(&id),
                        ProbeClass::SingleChainNode(c) => id == *c,
                        ProbeClass::Joint => true,
                    };
                    if !keep {
                        lift_sys.block_mut(&mut dir, id).fill(0.0);
                    }
                }
                let mut x0 = orbit.anchor.clone();
                if delta > 0.0 {
                    let norm = lift_sys.net_norm(&dir);
                    if norm == 0.0 {
                        return Err(Error::Stability(format!(
                            "probe class {} has no components to perturb",
                            class.label()
                        )));
                    }
                    for (x, d) in x0.iter_mut().zip(&dir) {
                        *x += d * delta / norm;
                    }
                }
                let outcome = match integrate(lift_sys, &x0, 0.0, horizon, cfg) {
                    Ok(traj) => {
                        let mut buf = vec![0.0; n];
                        let mut rf = vec![0.0; n];
                        let (mut sup, mut sup_cpg, mut sup_chain) = (0.0_f64, 0.0_f64, 0.0_f64);
                        for &t in &cmp_times {
                            traj.sample_into(t, &mut buf);
                            orbit.state_into(t, &mut rf);
                            for (b, r) in buf.iter_mut().zip(&rf) {
                                *b -= r;
                            }
                            let mut cpg_part = 0.0;
                            let mut chain_part = 0.0_f64;
                            let mut total = 0.0;
                            for id in lift_sys.net.node_ids() {
                                let bn = lift_sys
                                    .block(&buf, id)
                                    .iter()
                                    .map(|v| v * v)
                                    .sum::<f64>()
                                    .sqrt();
                                total += bn;
                                if cpg_set.contains(&id) {
                                    cpg_part += bn;
                                } else {
                                    chain_part = chain_part.max(bn);
                                }
                            }
                            sup = sup.max(total);
                            sup_cpg = sup_cpg.max(cpg_part);
                            sup_chain = sup_chain.max(chain_part);
                        }
                        ProbeOutcome {
                            delta,
                            class: class.clone(),
                            probe,
                            sup_deviation: sup,
                            sup_cpg,
                            sup_chain,
                            error: None,
                        }
                    }
                    Err(e) => ProbeOutcome {
                        delta,
                        class: class.clone(),
                        probe,
                        sup_deviation: f64::INFINITY,
                        sup_cpg: f64::INFINITY,
                        sup_chain: f64::INFINITY,
                        error: Some(e.to_string()),
                    },
                };
                outcomes.push(outcome);
            }
        }
    }
    Ok(ProbeReport { seed, horizon, outcomes })
}

/// Travelling-wave verification of a phase-lifted orbit.
#[derive(Clone, Debug)]
pub struct WaveCheck {
    /// Per node: the largest distance over the period between the node's
    /// waveform and its representative's waveform shifted by the node's
    /// phase.
    pub residuals: BTreeMap<NodeId, f64>,
    pub max_residual: f64,
    /// Worst matched difference between transverse multipliers computed at
    /// the different phases present in the pattern (two independent routes
    /// per phase; zero when the pattern has a single phase).
    pub multiplier_phase_spread: f64,
    /// True when every residual is below the synchrony tolerance.
    pub is_wave: bool,
}

/// Checks the realized phase pattern of a lifted orbit: every node must
/// reproduce its representative's waveform shifted by the node's declared
/// phase, and the transverse multipliers of a colour must not depend on the
/// phase at which they are computed.
#[allow(clippy::too_many_arguments)]
pub fn travelling_wave_check(
    lift_sys: &AdmissibleSystem,
    lifted_orbit: &PeriodicOrbit,
    phases: &PhaseAssignment,
    kappa: &Colouring,
    base: &ColourBase,
    cpg_sys: &AdmissibleSystem,
    cpg_orbit: &PeriodicOrbit,
    cfg: &IntegratorConfig,
) -> Result<WaveCheck> {
    let t_period = lifted_orbit.period;
    let traj = &lifted_orbit.trajectory;
    let mut residuals = BTreeMap::new();
    let mut max_residual = 0.0_f64;
    let mut shifted = vec![0.0; lifted_orbit.dim()];
    let mut checks: BTreeSet<(NodeId, NodeId, Phase)> = BTreeSet::new();

    for id in lift_sys.net.node_ids() {
        let phase = phases
            .phase(id)
            .ok_or_else(|| Error::PhaseLift(format!("node {id} carries no phase")))?;
        let rep = phases
            .representative(id)
            .ok_or_else(|| Error::PhaseLift(format!("node {id} has no representative")))?;
        let colour = kappa.colour_or_err(id)?;
        let b = *base
            .to_base
            .get(colour)
            .ok_or_else(|| Error::UnknownColour(colour.to_string()))?;
        if phase.num != 0 {
            checks.insert((b, rep, phase));
        }

        let mut worst = 0.0_f64;
        for (k, &t) in traj.times.iter().enumerate() {
            lifted_orbit.state_into(t + phase.as_f64() * t_period, &mut shifted);
            let own = lift_sys.block(&traj.states[k], id);
            let other = lift_sys.block(&shifted, rep);
            let d = own
                .iter()
                .zip(other)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(d);
        }
        max_residual = max_residual.max(worst);
        residuals.insert(id, worst);
    }

    // Dual route per phase: the colour's block integrated in place vs the
    // representative's block integrated along the shifted orbit.
    let mut spread = 0.0_f64;
    for (b, rep, phase) in checks {
        let direct = transverse_floquet(cpg_sys, cpg_orbit, b, 0.0, cfg)?;
        let via_shift = transverse_floquet(cpg_sys, cpg_orbit, rep, phase.as_f64(), cfg)?;
        let m = match_multisets(&direct, &via_shift)?;
        spread = spread.max(m.residuals.iter().copied().fold(0.0, f64::max));
    }

    Ok(WaveCheck {
        residuals,
        max_residual,
        multiplier_phase_spread: spread,
        is_wave: max_residual < SYNCHRONY_TOL,
    })
}

/// The planar system whose frozen-time eigenvalues sit at `(-1 ± i√7)/4` for
/// every `t` — strictly stable pointwise — while the period map doubles the
/// `e^{t/2}(cos t, -sin t)` solution by `e^{π/2}` every period.
#[derive(Clone, Debug)]
pub struct MarkusYamabeDemo {
    pub samples: usize,
    /// Largest deviation of the sampled trace from -1/2.
    pub max_trace_deviation: f64,
    /// Largest deviation of the sampled determinant from 1/2.
    pub max_det_deviation: f64,
    /// The constant frozen-time pair, canonically ordered.
    pub pointwise_eigenvalues: [Complex<f64>; 2],
    /// Largest distance of any sampled eigenvalue from the constant pair.
    pub max_pointwise_deviation: f64,
    pub pointwise_max_real: f64,
    pub multipliers: Vec<Complex<f64>>,
    /// Magnitude of the leading multiplier.
    pub growth_factor: f64,
    /// `e^{π/2}`, the exact value.
    pub expected_growth: f64,
    /// Deviation of the integrated solution from the closed form
    /// `x(π) = e^{π/2} (1, 0)` starting at `(-1, 0)`.
    pub closed_form_deviation: f64,
    /// Pointwise stable and orbitally unstable at once.
    pub paradox: bool,
}

/// Runs the pointwise-vs-Floquet demonstration on the rotating planar
/// system: samples the frozen-time invariants at seeded random times, then
/// computes the period map and its multipliers.
pub fn markus_yamabe_demo(
    samples: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<MarkusYamabeDemo> {
    use crate::model::my_linear;
    use crate::network::Network;
    use crate::orbit::OrbitConfig;
    use crate::system::assemble;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sqrt7 = 7.0_f64.sqrt();
    let pair = [
        Complex::new(-0.25, -sqrt7 / 4.0),
        Complex::new(-0.25, sqrt7 / 4.0),
    ];
    let (mut trace_dev, mut det_dev, mut eig_dev) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut max_real = f64::NEG_INFINITY;
    for _ in 0..samples {
        let t = rng.gen_range(0.0..std::f64::consts::PI);
        let m = my_matrix(t);
        trace_dev = trace_dev.max((m.trace() + 0.5).abs());
        det_dev = det_dev.max((m.determinant() - 0.5).abs());
        let ev = eigenvalues(&m)?;
        for (v, r) in ev.iter().zip(&pair) {
            eig_dev = eig_dev.max((v - r).norm());
            max_real = max_real.max(v.re);
        }
    }

    let net = Network::homogeneous(1, "my", "R2", 2, "syn", &[]);
    let models = BTreeMap::from([("my".to_string(), my_linear())]);
    let sys = assemble(&net, &models, crate::model::Params::new())?;
    let period = std::f64::consts::PI;
    let ocfg = OrbitConfig { integrator: cfg.clone(), ..OrbitConfig::default() };
    let orbit = PeriodicOrbit::from_declared_period(&sys, &[0.0, 0.0], period, &ocfg)?;
    let mono = monodromy(&sys, &orbit, cfg)?;
    let multipliers = mono.multipliers()?;
    let growth_factor = multipliers[0].norm();
    let expected_growth = (period / 2.0).exp();

    let sol = integrate(&sys, &[-1.0, 0.0], 0.0, period, cfg)?;
    let end = sol.end_state();
    let closed_form_deviation = (end[0] - expected_growth).abs().max(end[1].abs());

    let paradox =
        max_real < -POINTWISE_MARGIN && growth_factor > 1.0 + STABILITY_MARGIN;
    Ok(MarkusYamabeDemo {
        samples,
        max_trace_deviation: trace_dev,
        max_det_deviation: det_dev,
        pointwise_eigenvalues: pair,
        max_pointwise_deviation: eig_dev,
        pointwise_max_real: max_real,
        multipliers,
        growth_factor,
        expected_growth,
        closed_form_deviation,
        paradox,
    })
}

/// The period-2 switching system: triangular at every instant with frozen
/// eigenvalues always `{-0.5, -0.7}`, yet the period map is close to
/// `exp(A) exp(B)`, whose leading eigenvalue exceeds 1.
#[derive(Clone, Debug)]
pub struct SwitchingDemo {
    pub sigma: f64,
    pub samples: usize,
    pub pointwise_max_real: f64,
    pub multipliers: Vec<Complex<f64>>,
    /// Eigenvalues of the exact product `exp(A) exp(B)` of the two phases.
    pub product_eigenvalues: Vec<Complex<f64>>,
    /// Worst matched difference between the multipliers and the product
    /// eigenvalues (shrinks with `sigma`).
    pub max_multiplier_deviation: f64,
    pub paradox: bool,
}

/// Runs the switching demonstration at smoothing width `sigma`.
pub fn switching_demo(
    sigma: f64,
    samples: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<SwitchingDemo> {
    use crate::model::{switch_linear, Params};
    use crate::network::Network;
    use crate::orbit::OrbitConfig;
    use crate::system::assemble;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_real = f64::NEG_INFINITY;
    for _ in 0..samples {
        let t = rng.gen_range(0.0..2.0);
        let ev = eigenvalues(&switch_matrix(t, sigma))?;
        for v in &ev {
            max_real = max_real.max(v.re);
        }
    }

    let a_phase = DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, 2.0, -0.7]);
    let b_phase = DMatrix::from_row_slice(2, 2, &[-0.5, 2.0, 0.0, -0.7]);
    let product_eigenvalues = eigenvalues(&(a_phase.exp() * b_phase.exp()))?;

    let net = Network::homogeneous(1, "sw", "R2", 2, "syn", &[]);
    let models = BTreeMap::from([("sw".to_string(), switch_linear())]);
    let sys = assemble(&net, &models, Params::from_pairs([("sigma", sigma)]))?;
    let ocfg = OrbitConfig { integrator: cfg.clone(), ..OrbitConfig::default() };
    let orbit = PeriodicOrbit::from_declared_period(&sys, &[0.0, 0.0], 2.0, &ocfg)?;
    let mono = monodromy(&sys, &orbit, cfg)?;
    let multipliers = mono.multipliers()?;

    let m = match_multisets(&multipliers, &product_eigenvalues)?;
    let max_multiplier_deviation = m.residuals.iter().copied().fold(0.0, f64::max);
    let paradox = max_real < -POINTWISE_MARGIN
        && multipliers[0].norm() > 1.0 + STABILITY_MARGIN;
    Ok(SwitchingDemo {
        sigma,
        samples,
        pointwise_max_real: max_real,
        multipliers,
        product_eigenvalues,
        max_multiplier_deviation,
        paradox,
    })
}
