//! Adaptive embedded Runge-Kutta (Dormand-Prince 5(4)) integration with
//! cubic Hermite dense output. Integration is split at declared breakpoints
//! so piecewise-smooth right-hand sides never lose the controller's order.

use crate::error::{Error, Result};
use crate::system::AdmissibleSystem;

/// Anything integrable: a first-order ODE with optional smoothness
/// breakpoints.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()>;
    /// Interior times in `(t0, t1)` where the rhs is only piecewise smooth.
    fn breakpoints(&self, _t0: f64, _t1: f64) -> Vec<f64> {
        Vec::new()
    }
}

impl OdeSystem for AdmissibleSystem {
    fn dim(&self) -> usize {
        AdmissibleSystem::dim(self)
    }

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.rhs(t, x, out)
    }

    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        AdmissibleSystem::breakpoints(self, t0, t1)
    }
}

/// Closure-backed ODE, mostly for variational equations and tests.
pub struct FnOde<F> {
    pub dim: usize,
    pub f: F,
    pub breakpoints: Vec<f64>,
}

impl<F> FnOde<F>
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<()>,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnOde { dim, f, breakpoints: Vec::new() }
    }
}

impl<F> OdeSystem for FnOde<F>
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<()>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        (self.f)(t, x, out)
    }

    fn breakpoints(&self, t0: f64, t1: f64) -> Vec<f64> {
        self.breakpoints.iter().copied().filter(|&t| t > t0 && t < t1).collect()
    }
}

#[derive(Clone, Debug)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub first_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rtol: 1e-9,
            atol: 1e-11,
            max_step: f64::INFINITY,
            first_step: None,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorConfig {
    /// Default configuration with the relative tolerance optionally
    /// overridden by the `NETLAB_RTOL` environment variable.
    pub fn from_env() -> Self {
        let mut cfg = IntegratorConfig::default();
        if let Ok(s) = std::env::var("NETLAB_RTOL") {
            if let Ok(v) = s.trim().parse::<f64>() {
                if v.is_finite() && v > 0.0 {
                    cfg.rtol = v;
                }
            }
        }
        cfg
    }

    pub fn with_rtol(mut self, rtol: f64) -> Self {
        self.rtol = rtol;
        self
    }

    pub fn with_max_step(mut self, h: f64) -> Self {
        self.max_step = h;
        self
    }
}

/// A solution sampled at the accepted steps, with the derivative stored at
/// each sample so a C1 cubic Hermite interpolant is available in between.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub derivs: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn end_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    fn segment(&self, t: f64) -> usize {
        // Index k with times[k] <= t < times[k+1] (clamped at the ends).
        let n = self.times.len();
        let k = self.times.partition_point(|&s| s <= t);
        k.clamp(1, n - 1) - 1
    }

    pub fn sample_into(&self, t: f64, out: &mut [f64]) {
        let k = self.segment(t);
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        if t == t0 {
            out.copy_from_slice(&self.states[k]);
            return;
        }
        if t == t1 {
            out.copy_from_slice(&self.states[k + 1]);
            return;
        }
        let h = t1 - t0;
        let s = ((t - t0) / h).clamp(0.0, 1.0);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let (y0, y1) = (&self.states[k], &self.states[k + 1]);
        let (f0, f1) = (&self.derivs[k], &self.derivs[k + 1]);
        for i in 0..out.len() {
            out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i];
        }
    }

    pub fn sample(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(t, &mut out);
        out
    }

    /// Derivative of the interpolant (not a fresh rhs evaluation).
    pub fn deriv_into(&self, t: f64, out: &mut [f64]) {
        let k = self.segment(t);
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let s = ((t - t0) / h).clamp(0.0, 1.0);
        let s2 = s * s;
        let d00 = (6.0 * s2 - 6.0 * s) / h;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = (-6.0 * s2 + 6.0 * s) / h;
        let d11 = 3.0 * s2 - 2.0 * s;
        let (y0, y1) = (&self.states[k], &self.states[k + 1]);
        let (f0, f1) = (&self.derivs[k], &self.derivs[k + 1]);
        for i in 0..out.len() {
            out[i] = d00 * y0[i] + d10 * f0[i] + d01 * y1[i] + d11 * f1[i];
        }
    }

    pub fn deriv_sample(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.deriv_into(t, &mut out);
        out
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Difference between the 5th- and 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const SAFETY: f64 = 0.9;

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v * v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

fn initial_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    x0: &[f64],
    f0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let span = t_end - t0;
    let sc: Vec<f64> = x0.iter().map(|&x| cfg.atol + cfg.rtol * x.abs()).collect();
    let d0 = rms(x0.iter().zip(&sc).map(|(x, s)| x / s));
    let d1 = rms(f0.iter().zip(&sc).map(|(f, s)| f / s));
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span).min(cfg.max_step);
    let y1: Vec<f64> = x0.iter().zip(f0).map(|(x, f)| x + h0 * f).collect();
    let mut f1 = vec![0.0; x0.len()];
    sys.eval(t0 + h0, &y1, &mut f1)?;
    let d2 = rms(f1.iter().zip(f0).zip(&sc).map(|((a, b), s)| (a - b) / s)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(span).min(cfg.max_step))
}

/// Integrates `sys` from `x0` over `[t0, t1]`, splitting at declared
/// breakpoints. Deterministic for fixed inputs and configuration.
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    x0: &[f64],
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    if !(t1 > t0) {
        return Err(Error::Integration(format!("bad time span [{t0}, {t1}]")));
    }
    if x0.len() != sys.dim() {
        return Err(Error::Integration(format!(
            "state dimension {} does not match system dimension {}",
            x0.len(),
            sys.dim()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integration("non-finite initial state".into()));
    }

    let mut boundaries: Vec<f64> =
        sys.breakpoints(t0, t1).into_iter().filter(|&t| t > t0 && t < t1).collect();
    boundaries.sort_by(f64::total_cmp);
    boundaries.dedup();
    boundaries.push(t1);

    let n = sys.dim();
    let mut f0 = vec![0.0; n];
    sys.eval(t0, x0, &mut f0)?;
    let mut traj = Trajectory {
        times: vec![t0],
        states: vec![x0.to_vec()],
        derivs: vec![f0],
    };

    let mut steps = 0usize;
    let mut h_next: Option<f64> = cfg.first_step;
    let mut seg_start = t0;
    for seg_end in boundaries {
        integrate_segment(sys, &mut traj, seg_start, seg_end, cfg, &mut steps, &mut h_next)?;
        seg_start = seg_end;
    }
    Ok(traj)
}

#[allow(clippy::too_many_arguments)]
fn integrate_segment<S: OdeSystem + ?Sized>(
    sys: &S,
    traj: &mut Trajectory,
    t_start: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
    steps: &mut usize,
    h_next: &mut Option<f64>,
) -> Result<()> {
    let n = sys.dim();
    let mut t = t_start;
    let mut y = traj.end_state().to_vec();
    // Fresh derivative at the segment start: the rhs may change shape across
    // a breakpoint.
    let mut k1 = vec![0.0; n];
    sys.eval(t, &y, &mut k1)?;
    *traj.derivs.last_mut().unwrap() = k1.clone();

    let mut h = match *h_next {
        Some(h) => h.min(t_end - t).min(cfg.max_step),
        None => initial_step(sys, t, &y, &k1, t_end, cfg)?,
    };

    let mut k = vec![vec![0.0; n]; 7];
    k[0].copy_from_slice(&k1);
    let mut y_stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    while t < t_end {
        *steps += 1;
        if *steps > cfg.max_steps {
            return Err(Error::Integration(format!(
                "step budget {} exhausted at t = {t}",
                cfg.max_steps
            )));
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::Integration(format!("step size underflow at t = {t}")));
        }
        let h_eff = h.min(t_end - t);

        for s in 1..6 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, a) in A[s - 1][..s].iter().enumerate() {
                    acc += a * k[j][i];
                }
                y_stage[i] = y[i] + h_eff * acc;
            }
            let (head, tail) = k.split_at_mut(s);
            let _ = head;
            sys.eval(t + C[s] * h_eff, &y_stage, &mut tail[0])?;
        }
        for i in 0..n {
            let mut acc = 0.0;
            for (j, a) in A[5].iter().enumerate() {
                acc += a * k[j][i];
            }
            y_new[i] = y[i] + h_eff * acc;
        }
        sys.eval(t + h_eff, &y_new, &mut k[6])?;

        let err_norm = rms((0..n).map(|i| {
            let e: f64 = (0..7).map(|j| E[j] * k[j][i]).sum();
            let sc = cfg.atol + cfg.rtol * y[i].abs().max(y_new[i].abs());
            h_eff * e / sc
        }));

        let accept = err_norm.is_finite() && err_norm <= 1.0 && y_new.iter().all(|v| v.is_finite());
        let factor = if err_norm.is_finite() && err_norm > 0.0 {
            (SAFETY * err_norm.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
        } else if accept {
            MAX_FACTOR
        } else {
            MIN_FACTOR
        };

        if accept {
            t = if h_eff >= t_end - t { t_end } else { t + h_eff };
            y.copy_from_slice(&y_new);
            let (k6, k0) = {
                let (a, b) = k.split_at_mut(6);
                (&mut b[0], &mut a[0])
            };
            std::mem::swap(k6, k0);
            traj.times.push(t);
            traj.states.push(y.clone());
            traj.derivs.push(k[0].clone());
            h = (h_eff * factor).min(cfg.max_step);
        } else {
            h = h_eff * factor.min(1.0);
        }
    }
    *h_next = Some(h);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{builtin, scalar_generic, Params};
    use crate::network::Network;
    use crate::system::assemble;
    use std::collections::BTreeMap;

    fn decay() -> FnOde<impl Fn(f64, &[f64], &mut [f64]) -> Result<()>> {
        FnOde::new(1, |_, x, out| {
            out[0] = -x[0];
            Ok(())
        })
    }

    #[test]
    fn exponential_decay_meets_tolerance() {
        let traj =
            integrate(&decay(), &[1.0], 0.0, 1.0, &IntegratorConfig::default()).unwrap();
        assert!((traj.end_state()[0] - (-1.0_f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn fixed_step_error_shrinks_at_the_pair_order() {
        // Loose tolerances make max_step the binding control, so halving it
        // exposes the raw convergence order (>= 4 for the embedded pair).
        let err = |h: f64| {
            let cfg = IntegratorConfig {
                rtol: 1.0,
                atol: 1.0,
                max_step: h,
                first_step: Some(h),
                ..IntegratorConfig::default()
            };
            let traj = integrate(&decay(), &[1.0], 0.0, 1.0, &cfg).unwrap();
            (traj.end_state()[0] - (-1.0_f64).exp()).abs()
        };
        let (e1, e2) = (err(0.2), err(0.1));
        assert!(e2 > 0.0 && e1 / e2 >= 16.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn tightening_rtol_reduces_the_error() {
        let err = |rtol: f64| {
            let cfg = IntegratorConfig {
                rtol,
                atol: rtol * 1e-2,
                ..IntegratorConfig::default()
            };
            let traj = integrate(&decay(), &[1.0], 0.0, 1.0, &cfg).unwrap();
            (traj.end_state()[0] - (-1.0_f64).exp()).abs()
        };
        assert!(err(1e-6) > err(1e-9));
    }

    #[test]
    fn periodic_linear_block_matches_the_closed_form() {
        let net = Network::homogeneous(1, "my", "R2", 2, "syn", &[]);
        let models = BTreeMap::from([("my".to_string(), builtin("my_linear", None).unwrap())]);
        let sys = assemble(&net, &models, Params::new()).unwrap();
        let pi = std::f64::consts::PI;
        let traj =
            integrate(&sys, &[-1.0, 0.0], 0.0, pi, &IntegratorConfig::default()).unwrap();
        let scale = (pi / 2.0).exp();
        assert!((traj.end_state()[0] - scale).abs() < 1e-6);
        assert!(traj.end_state()[1].abs() < 1e-6);
    }

    #[test]
    fn hermite_interpolation_is_accurate_between_samples() {
        let cfg = IntegratorConfig::default().with_max_step(0.02);
        let traj = integrate(&decay(), &[1.0], 0.0, 1.0, &cfg).unwrap();
        for k in 0..traj.times.len() - 1 {
            let tm = 0.5 * (traj.times[k] + traj.times[k + 1]);
            let x = traj.sample(tm)[0];
            assert!((x - (-tm).exp()).abs() < 1e-9, "at t = {tm}");
            let d = traj.deriv_sample(tm)[0];
            assert!((d + (-tm).exp()).abs() < 1e-6);
        }
        // Samples themselves reproduce states bitwise.
        for k in 0..traj.times.len() {
            assert_eq!(traj.sample(traj.times[k]), traj.states[k]);
        }
    }

    #[test]
    fn synchronous_states_stay_exactly_synchronous() {
        let net = fixtures::fig1_network();
        let models =
            BTreeMap::from([("cell".to_string(), scalar_generic("-u + tanh(v)").unwrap())]);
        let sys = assemble(&net, &models, Params::new()).unwrap();
        let x0 = vec![0.4, -0.2, 0.9, 0.4, -0.2, 0.9, 0.4];
        let traj = integrate(&sys, &x0, 0.0, 10.0, &IntegratorConfig::default()).unwrap();
        let end = traj.end_state();
        for (a, b) in [(0, 3), (3, 6), (1, 4), (2, 5)] {
            assert_eq!(end[a].to_bits(), end[b].to_bits());
        }
    }

    #[test]
    fn integration_splits_at_declared_breakpoints() {
        let net = Network::homogeneous(1, "sw", "R2", 2, "syn", &[]);
        let models =
            BTreeMap::from([("sw".to_string(), builtin("switch_linear", None).unwrap())]);
        let sys = assemble(&net, &models, Params::from_pairs([("sigma", 1e-2)])).unwrap();
        let traj =
            integrate(&sys, &[1.0, 1.0], 0.0, 2.0, &IntegratorConfig::default()).unwrap();
        for bp in [0.005, 0.995, 1.0, 1.005, 1.995] {
            assert!(
                traj.times.iter().any(|&t| t == bp),
                "breakpoint {bp} not a sample time"
            );
        }
    }

    #[test]
    fn reruns_are_bitwise_identical() {
        let cfg = IntegratorConfig::default();
        let a = integrate(&decay(), &[1.0], 0.0, 3.0, &cfg).unwrap();
        let b = integrate(&decay(), &[1.0], 0.0, 3.0, &cfg).unwrap();
        assert_eq!(a.times, b.times);
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn misuse_is_reported() {
        assert!(integrate(&decay(), &[1.0], 1.0, 0.0, &IntegratorConfig::default()).is_err());
        assert!(integrate(&decay(), &[f64::NAN], 0.0, 1.0, &IntegratorConfig::default())
            .is_err());
        // Finite-time blowup cannot be integrated through.
        let blowup = FnOde::new(1, |_, x: &[f64], out: &mut [f64]| {
            out[0] = x[0] * x[0];
            Ok(())
        });
        assert!(integrate(&blowup, &[1.0], 0.0, 2.0, &IntegratorConfig::default()).is_err());
    }
}
