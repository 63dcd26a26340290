//! Batch front-end: reads network/model/spec files, runs constructions and
//! analyses, and emits deterministic reports.
//!
//! Exit codes are a stable scripting contract: 0 success or affirmative
//! verdict, 2 negative verdict, 1 input error, 3 inconclusive analysis.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use netlab::error::Error;
use netlab::files::{
    network_value, parse_lift_spec, parse_models, parse_network, parse_params, parse_phase_spec,
    NetworkFile,
};
use netlab::integrate::IntegratorConfig;
use netlab::lift::build_feedforward_lift;
use netlab::network::{
    induced_subnetwork, is_balanced, path_components, quotient, Colouring, NodeId,
};
use netlab::orbit::{find_periodic_orbit, lift_orbit, OrbitConfig, PeriodicOrbit};
use netlab::phase::build_phase_lift;
use netlab::report::{
    floquet_value, fmt_f64, markus_yamabe_value, multipliers_csv, obj, orbit_value,
    pointwise_value, probe_value, switching_value, to_json_string, trajectory_csv, wave_value,
};
use netlab::stability::{
    decomposition_check, liapunov_probe, markus_yamabe_demo, switching_demo,
    transverse_subspace_report, travelling_wave_check,
};
use netlab::system::{assemble, ColourBase};
use num_complex::Complex;
use serde_json::Value;

#[derive(Parser)]
#[command(
    name = "netlab",
    version,
    about = "Coupled-cell networks: balanced colourings, feedforward lifts, Floquet stability"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check whether the colouring in a network file is balanced
    CheckBalance {
        /// Network JSON (must carry a colouring)
        net: PathBuf,
    },
    /// Print the quotient network of a balanced colouring
    Quotient {
        /// Network JSON (must carry a balanced colouring)
        net: PathBuf,
    },
    /// Build a feedforward lift of a CPG
    Lift {
        /// CPG network JSON (must carry a colouring)
        cpg: PathBuf,
        /// Lift specification JSON
        spec: PathBuf,
    },
    /// Build a phase-shifted (travelling-wave) lift from a cyclic symmetry
    PhaseLift {
        /// CPG network JSON
        cpg: PathBuf,
        /// Phase-lift specification JSON
        spec: PathBuf,
    },
    /// Locate a periodic orbit of the CPG and certify its lift's stability
    Analyze {
        /// Lifted network JSON (colouring required; `cpg` and `phases` keys
        /// are honoured, otherwise the CPG is detected from the loops)
        net: PathBuf,
        /// Model bundle JSON (node-type to built-in model, orbit settings)
        model: PathBuf,
        /// Parameter JSON (name to value)
        params: PathBuf,
        /// Also run empirical perturbation probes
        #[arg(long)]
        probe: bool,
        /// Samples per period for the frozen-time eigenvalue report
        #[arg(long, default_value_t = 64)]
        grid: usize,
        /// Seed for probe directions
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report directory
        #[arg(long, default_value = "netlab_out")]
        out: PathBuf,
    },
    /// Reproduce the frozen-time-stability counterexamples
    Counterexamples {
        /// Also write the JSON report into this directory
        #[arg(long)]
        out: Option<PathBuf>,
        /// Random sample count for the frozen-time checks
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Seed for the sampled times
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// 0 affirmative, 2 negative verdict, 1 input error, 3 inconclusive.
fn exit_for(err: &Error) -> u8 {
    match err {
        Error::NotBalanced(_)
        | Error::Lift(_)
        | Error::Automorphism(_)
        | Error::PhaseLift(_) => 2,
        Error::NonFinite { .. }
        | Error::Integration(_)
        | Error::NoReturn(_)
        | Error::Closure(_)
        | Error::NotSynchronous(_)
        | Error::Stability(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}

fn run(cmd: Cmd) -> netlab::Result<u8> {
    match cmd {
        Cmd::CheckBalance { net } => cmd_check_balance(&net),
        Cmd::Quotient { net } => cmd_quotient(&net),
        Cmd::Lift { cpg, spec } => cmd_lift(&cpg, &spec),
        Cmd::PhaseLift { cpg, spec } => cmd_phase_lift(&cpg, &spec),
        Cmd::Analyze { net, model, params, probe, grid, seed, out } => {
            cmd_analyze(&net, &model, &params, probe, grid, seed, &out)
        }
        Cmd::Counterexamples { out, samples, seed } => {
            cmd_counterexamples(out.as_deref(), samples, seed)
        }
    }
}

fn read_network(path: &Path) -> netlab::Result<NetworkFile> {
    parse_network(&fs::read_to_string(path)?)
}

fn require_colouring(nf: &NetworkFile) -> netlab::Result<Colouring> {
    nf.colouring
        .clone()
        .ok_or_else(|| Error::InvalidNetwork("the network file carries no colouring".into()))
}

fn cmd_check_balance(net: &Path) -> netlab::Result<u8> {
    let nf = read_network(net)?;
    let kappa = require_colouring(&nf)?;
    let verdict = is_balanced(&nf.net, &kappa)?;
    match verdict.witness {
        None => {
            println!(
                "balanced: {} nodes in {} colour classes",
                nf.net.n_nodes(),
                kappa.colours().len()
            );
            Ok(0)
        }
        Some(w) => {
            println!("not balanced: {w}");
            Ok(2)
        }
    }
}

fn cmd_quotient(net: &Path) -> netlab::Result<u8> {
    let nf = read_network(net)?;
    let kappa = require_colouring(&nf)?;
    let q = quotient(&nf.net, &kappa)?;
    print!(
        "{}",
        to_json_string(&network_value(&q.net, Some(&q.colouring), None, None))
    );
    Ok(0)
}

fn cmd_lift(cpg: &Path, spec: &Path) -> netlab::Result<u8> {
    let nf = read_network(cpg)?;
    let kappa = require_colouring(&nf)?;
    let spec = parse_lift_spec(&fs::read_to_string(spec)?)?;
    let lift = build_feedforward_lift(&nf.net, &kappa, &spec)?;
    print!(
        "{}",
        to_json_string(&network_value(
            &lift.net,
            Some(&lift.colouring),
            Some(&lift.cpg_nodes),
            None,
        ))
    );
    Ok(0)
}

fn cmd_phase_lift(cpg: &Path, spec: &Path) -> netlab::Result<u8> {
    let nf = read_network(cpg)?;
    let spec = parse_phase_spec(&fs::read_to_string(spec)?)?;
    let pl = build_phase_lift(&nf.net, &spec.alpha, &spec.module, spec.copies, spec.rewire_internal)?;
    print!(
        "{}",
        to_json_string(&network_value(
            &pl.lift.net,
            Some(&pl.lift.colouring),
            Some(&pl.lift.cpg_nodes),
            Some(&pl.phases),
        ))
    );
    Ok(0)
}

/// CPG nodes named in the file, otherwise every node lying on a directed
/// loop (the union of the recurrent path components).
fn cpg_nodes(nf: &NetworkFile) -> netlab::Result<Vec<NodeId>> {
    let mut ids = match &nf.cpg {
        Some(ids) => {
            for id in ids {
                nf.net.node(*id)?;
            }
            ids.clone()
        }
        None => {
            let comps = path_components(&nf.net);
            comps
                .recurrent(&nf.net)
                .into_iter()
                .flat_map(|k| comps.components[k].iter().copied())
                .collect()
        }
    };
    ids.sort();
    ids.dedup();
    if ids.is_empty() {
        return Err(Error::InvalidNetwork(
            "no CPG: the network has no directed loop and the file names no cpg nodes".into(),
        ));
    }
    Ok(ids)
}

fn write_report(dir: &Path, name: &str, contents: &str) -> netlab::Result<()> {
    fs::write(dir.join(name), contents)?;
    Ok(())
}

/// Inconclusive outcomes (orbit not found, blowup, decomposition mismatch)
/// print the verdict and exit 3 instead of failing.
macro_rules! inconclusive_on_dynamics {
    ($stage:expr, $result:expr) => {
        match $result {
            Ok(v) => v,
            Err(e) if exit_for(&e) == 3 => {
                println!("INCONCLUSIVE");
                eprintln!("{}: {e}", $stage);
                return Ok(3);
            }
            Err(e) => return Err(e),
        }
    };
}

#[allow(clippy::too_many_arguments)]
fn cmd_analyze(
    net: &Path,
    model: &Path,
    params: &Path,
    probe: bool,
    grid: usize,
    seed: u64,
    out: &Path,
) -> netlab::Result<u8> {
    let nf = read_network(net)?;
    let mf = parse_models(&fs::read_to_string(model)?)?;
    let params = parse_params(&fs::read_to_string(params)?)?;
    let cfg = IntegratorConfig::from_env();

    let cpg_ids = cpg_nodes(&nf)?;
    let kappa = match &nf.colouring {
        Some(k) => k.clone(),
        None if cpg_ids.len() == nf.net.n_nodes() => Colouring::trivial(&nf.net),
        None => {
            return Err(Error::InvalidNetwork(
                "a colouring is required when nodes hang off the CPG".into(),
            ))
        }
    };
    kappa.is_total_on(&nf.net)?;

    let keep: BTreeSet<NodeId> = cpg_ids.iter().copied().collect();
    let (cpg_net, renumber) = induced_subnetwork(&nf.net, &keep)?;
    let identity = renumber.iter().all(|(a, b)| a == b);
    if nf.phases.is_some() && !identity {
        return Err(Error::InvalidNetwork(
            "phase analysis requires the CPG nodes to be numbered 1..k".into(),
        ));
    }

    let lifted_sys = assemble(&nf.net, &mf.models, params.clone())?;
    let cpg_sys = assemble(&cpg_net, &mf.models, params)?;

    let mut to_base: BTreeMap<String, NodeId> = BTreeMap::new();
    for &id in &cpg_ids {
        to_base
            .entry(kappa.colour_or_err(id)?.to_string())
            .or_insert(renumber[&id]);
    }
    let base = ColourBase { to_base };

    let mut ocfg = OrbitConfig { integrator: cfg.clone(), ..OrbitConfig::default() };
    if let Some(t) = mf.transient {
        ocfg.transient = t;
    }
    if let Some(t) = mf.max_time {
        ocfg.max_time = t;
    }
    if let Some(m) = mf.min_samples {
        ocfg.min_samples = m;
    }
    let x0 = match &mf.initial_state {
        Some(x) => {
            if x.len() != cpg_sys.dim() {
                return Err(Error::Assembly(format!(
                    "initial_state has dimension {} but the CPG has dimension {}",
                    x.len(),
                    cpg_sys.dim()
                )));
            }
            x.clone()
        }
        // A mildly asymmetric default so the search is not started on an
        // invariant subspace.
        None => (0..cpg_sys.dim()).map(|i| 0.1 + 0.07 * i as f64).collect(),
    };

    let cpg_orbit = inconclusive_on_dynamics!(
        "orbit stage",
        match mf.declared_period {
            Some(t_period) => PeriodicOrbit::from_declared_period(&cpg_sys, &x0, t_period, &ocfg),
            None => find_periodic_orbit(&cpg_sys, &x0, &ocfg),
        }
    );
    let lifted_orbit =
        lift_orbit(&cpg_orbit, &cpg_sys, &base, &kappa, &lifted_sys, nf.phases.as_ref())?;
    let floquet = inconclusive_on_dynamics!(
        "decomposition stage",
        decomposition_check(
            &lifted_sys,
            &lifted_orbit,
            &cpg_sys,
            &cpg_orbit,
            &kappa,
            &cpg_ids,
            &base,
            nf.phases.as_ref(),
            &cfg,
        )
    );
    let cpg_renumbered: Vec<NodeId> = cpg_net.node_ids().collect();
    let pointwise = inconclusive_on_dynamics!(
        "frozen-time stage",
        transverse_subspace_report(&cpg_sys, &cpg_orbit, &cpg_renumbered, grid)
    );
    let wave = match nf.phases.as_ref() {
        Some(p) => Some(inconclusive_on_dynamics!(
            "travelling-wave stage",
            travelling_wave_check(
                &lifted_sys,
                &lifted_orbit,
                p,
                &kappa,
                &base,
                &cpg_sys,
                &cpg_orbit,
                &cfg,
            )
        )),
        None => None,
    };
    let probe_report = if probe {
        Some(inconclusive_on_dynamics!(
            "probe stage",
            liapunov_probe(
                &lifted_sys,
                &lifted_orbit,
                &cpg_ids,
                &[1e-6, 1e-5, 1e-4],
                10.0 * cpg_orbit.period,
                2,
                seed,
                &cfg,
            )
        ))
    } else {
        None
    };

    fs::create_dir_all(out)?;
    let run = obj(vec![
        ("seed", Value::from(seed)),
        ("grid", Value::from(grid as u64)),
        ("probe", Value::Bool(probe)),
        ("rtol", netlab::report::jnum(cfg.rtol)),
        ("atol", netlab::report::jnum(cfg.atol)),
        (
            "cpg",
            Value::Array(cpg_ids.iter().map(|id| Value::from(u64::from(id.0))).collect()),
        ),
    ]);
    write_report(out, "run.json", &to_json_string(&run))?;
    write_report(out, "cpg_orbit.json", &to_json_string(&orbit_value(&cpg_orbit)))?;
    write_report(out, "lifted_orbit.json", &to_json_string(&orbit_value(&lifted_orbit)))?;
    write_report(out, "cpg_orbit.csv", &trajectory_csv(&cpg_sys, &cpg_orbit.trajectory))?;
    write_report(out, "lifted_orbit.csv", &trajectory_csv(&lifted_sys, &lifted_orbit.trajectory))?;
    write_report(out, "floquet.json", &to_json_string(&floquet_value(&floquet)))?;
    write_report(out, "multipliers.csv", &multipliers_csv(&floquet))?;
    write_report(out, "pointwise.json", &to_json_string(&pointwise_value(&pointwise)))?;
    if let Some(w) = &wave {
        write_report(out, "wave.json", &to_json_string(&wave_value(w)))?;
    }
    if let Some(p) = &probe_report {
        write_report(out, "probe.json", &to_json_string(&probe_value(p)))?;
    }

    let ids: Vec<String> = cpg_ids.iter().map(|id| id.to_string()).collect();
    println!("CPG nodes: {}", ids.join(", "));
    println!("period: {}", fmt_f64(cpg_orbit.period));
    println!("closure residual: {}", fmt_f64(cpg_orbit.closure_residual));
    println!("full multipliers: {}", floquet.full.len());
    println!("cpg stable: {}", floquet.cpg_stable);
    println!(
        "transverse stable: {}",
        floquet.transverse_stable.values().all(|&ok| ok)
    );
    println!(
        "pointwise transversely stable: {}",
        pointwise.transversely_stable
    );
    if let Some(w) = &wave {
        println!(
            "travelling wave: max residual {}, verdict {}",
            fmt_f64(w.max_residual),
            w.is_wave
        );
    }
    if pointwise.transversely_stable && !floquet.lift_stable {
        println!(
            "PARADOX: frozen-time transverse eigenvalues are stable at every sample, \
             yet the lift is Floquet-unstable"
        );
    }
    if !pointwise.transversely_stable && floquet.lift_stable {
        println!(
            "note: frozen-time transverse eigenvalues leave the stable half-plane, \
             yet the lift is Floquet-stable; the frozen-time report is not decisive"
        );
    }
    if floquet.lift_stable {
        println!("LIFT_STABLE");
        Ok(0)
    } else {
        println!("LIFT_UNSTABLE");
        Ok(2)
    }
}

fn print_multiplier_rows(multipliers: &[Complex<f64>]) {
    for z in multipliers {
        let mag = z.norm();
        let side = if mag > 1.0 { "outside" } else { "inside" };
        println!(
            "    {} + {}i  |rho| = {}  ({} the unit circle)",
            fmt_f64(z.re),
            fmt_f64(z.im),
            fmt_f64(mag),
            side
        );
    }
}

fn cmd_counterexamples(out: Option<&Path>, samples: usize, seed: u64) -> netlab::Result<u8> {
    let cfg = IntegratorConfig::from_env();
    let my = markus_yamabe_demo(samples, seed, &cfg)?;
    let sw = switching_demo(1e-4, samples, seed, &cfg)?;

    println!("rotating frozen-eigenvalue system");
    println!(
        "  trace -0.5 at every sampled t; max deviation {}",
        fmt_f64(my.max_trace_deviation)
    );
    println!(
        "  determinant 0.5 at every sampled t; max deviation {}",
        fmt_f64(my.max_det_deviation)
    );
    println!(
        "  frozen eigenvalues (-1 +- i sqrt 7)/4, max real part {}",
        fmt_f64(my.pointwise_max_real)
    );
    println!("  multipliers over one period:");
    print_multiplier_rows(&my.multipliers);
    println!(
        "  leading growth {} vs e^(pi/2) = {}",
        fmt_f64(my.growth_factor),
        fmt_f64(my.expected_growth)
    );
    println!(
        "  closed-form solution deviation {}",
        fmt_f64(my.closed_form_deviation)
    );
    if my.paradox {
        println!("  PARADOX: frozen-time stable at every instant, orbitally unstable");
    }

    println!("switching system (sigma = 1e-4)");
    println!(
        "  frozen eigenvalues {{-0.5, -0.7}} throughout; max sampled real part {}",
        fmt_f64(sw.pointwise_max_real)
    );
    println!("  exp(A) exp(B) eigenvalues (reference values 1.772 and 0.051):");
    print_multiplier_rows(&sw.product_eigenvalues);
    println!("  multipliers over one period:");
    print_multiplier_rows(&sw.multipliers);
    println!(
        "  worst multiplier-vs-product deviation {}",
        fmt_f64(sw.max_multiplier_deviation)
    );
    if sw.paradox {
        println!("  PARADOX: frozen-time stable at every instant, orbitally unstable");
    }

    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let v = obj(vec![
            ("seed", Value::from(seed)),
            ("samples", Value::from(samples as u64)),
            ("rotating", markus_yamabe_value(&my)),
            ("switching", switching_value(&sw)),
        ]);
        write_report(dir, "counterexamples.json", &to_json_string(&v))?;
    }
    Ok(0)
}
