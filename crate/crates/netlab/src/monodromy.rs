//! Monodromy matrices: the period map of the variational equation along a
//! periodic orbit, integrated column by column against the orbit
//! interpolant, with a Liouville determinant cross-check.

use nalgebra::{Complex, DMatrix};

use crate::eigen::eigenvalues;
use crate::error::{Error, Result};
use crate::integrate::{integrate, FnOde, IntegratorConfig};
use crate::orbit::PeriodicOrbit;
use crate::system::AdmissibleSystem;

#[derive(Clone, Debug)]
pub struct Monodromy {
    pub matrix: DMatrix<f64>,
    pub period: f64,
    pub det: f64,
    /// exp of the integrated Jacobian trace along the orbit.
    pub liouville_det: f64,
    /// Relative disagreement between `det` and `liouville_det`; `None` when
    /// the expected determinant sits below the round-off floor of an LU
    /// determinant (strongly contracting orbits), where the comparison
    /// carries no information.
    pub liouville_relative_error: Option<f64>,
    /// The round-off floor the expected determinant was compared against.
    pub liouville_floor: f64,
    pub rtol: f64,
    pub atol: f64,
}

impl Monodromy {
    pub fn multipliers(&self) -> Result<Vec<Complex<f64>>> {
        eigenvalues(&self.matrix)
    }
}

/// Largest acceptable relative disagreement between det and the Liouville
/// integral before the computation is reported as inaccurate.
const LIOUVILLE_GATE: f64 = 1e-4;

/// Integrates `y' = J(t) y` over `[0, t_period]` for each basis vector and
/// assembles the period map.
pub fn period_map<J>(
    jac: J,
    dim: usize,
    t_period: f64,
    breakpoints: Vec<f64>,
    cfg: &IntegratorConfig,
) -> Result<DMatrix<f64>>
where
    J: Fn(f64) -> Result<DMatrix<f64>>,
{
    let var = FnOde {
        dim,
        f: |t: f64, y: &[f64], out: &mut [f64]| {
            let j = jac(t)?;
            for r in 0..dim {
                let mut acc = 0.0;
                for c in 0..dim {
                    acc += j[(r, c)] * y[c];
                }
                out[r] = acc;
            }
            Ok(())
        },
        breakpoints,
    };
    let mut phi = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut e = vec![0.0; dim];
        e[col] = 1.0;
        let traj = integrate(&var, &e, 0.0, t_period, cfg)?;
        let end = traj.end_state();
        for r in 0..dim {
            phi[(r, col)] = end[r];
        }
    }
    Ok(phi)
}

/// Smallest determinant magnitude an LU factorization of `m` can resolve:
/// round-off relative to the Hadamard bound.
fn det_floor(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let hadamard: f64 = m.column_iter().map(|c| c.norm().max(f64::MIN_POSITIVE)).product();
    (n as f64).powi(3) * f64::EPSILON * hadamard
}

/// Integrates the variational equation `y' = J(a(t)) y` over one period,
/// with `a(t)` taken from the orbit interpolant.
pub fn monodromy(
    sys: &AdmissibleSystem,
    orbit: &PeriodicOrbit,
    cfg: &IntegratorConfig,
) -> Result<Monodromy> {
    let n = sys.dim();
    if orbit.dim() != n {
        return Err(Error::Stability(format!(
            "orbit dimension {} does not match system dimension {}",
            orbit.dim(),
            n
        )));
    }
    let t_period = orbit.period;
    let phi = period_map(
        |t| {
            let a = orbit.trajectory.sample(t);
            sys.jacobian(t, &a)
        },
        n,
        t_period,
        sys.breakpoints(0.0, t_period),
        cfg,
    )?;

    // Liouville check: quadrature of the trace along the orbit.
    let trace = FnOde {
        dim: 1,
        f: |t: f64, _: &[f64], out: &mut [f64]| {
            let a = orbit.trajectory.sample(t);
            out[0] = sys.jacobian(t, &a)?.trace();
            Ok(())
        },
        breakpoints: sys.breakpoints(0.0, t_period),
    };
    let q = integrate(&trace, &[0.0], 0.0, t_period, cfg)?;
    let liouville_det = q.end_state()[0].exp();
    let det = phi.determinant();
    let floor = det_floor(&phi);

    let liouville_relative_error = if liouville_det.is_finite()
        && liouville_det.abs() > 1e8 * floor
    {
        let rel = (det - liouville_det).abs() / liouville_det.abs();
        if !rel.is_finite() || rel > LIOUVILLE_GATE {
            return Err(Error::Stability(format!(
                "Liouville check failed: det {det:.6e} vs exp-integral {liouville_det:.6e} \
                 (relative error {rel:.3e})"
            )));
        }
        Some(rel)
    } else {
        None
    };
    Ok(Monodromy {
        matrix: phi,
        period: t_period,
        det,
        liouville_det,
        liouville_relative_error,
        liouville_floor: floor,
        rtol: cfg.rtol,
        atol: cfg.atol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin, Params};
    use crate::network::Network;
    use crate::orbit::OrbitConfig;
    use crate::system::assemble;
    use std::collections::BTreeMap;
    use std::sync::Arc;

    fn one_node_system(model_name: &str, params: Params) -> AdmissibleSystem {
        let net = Network::homogeneous(1, "blk", "R2", 2, "syn", &[]);
        let models =
            BTreeMap::from([("blk".to_string(), builtin(model_name, None).unwrap())]);
        assemble(&net, &models, params).unwrap()
    }

    #[test]
    fn constant_coefficients_give_the_matrix_exponential() {
        let b = DMatrix::from_row_slice(2, 2, &[-0.5, 0.3, 0.1, -0.7]);
        let rhs = b.clone();
        let model = crate::model::NodeModel::new(
            "const_linear",
            2,
            crate::model::Arity::Exact(0),
            move |_, own, _, _, out| {
                out[0] = rhs[(0, 0)] * own[0] + rhs[(0, 1)] * own[1];
                out[1] = rhs[(1, 0)] * own[0] + rhs[(1, 1)] * own[1];
                Ok(())
            },
        );
        let net = Network::homogeneous(1, "blk", "R2", 2, "syn", &[]);
        let models = BTreeMap::from([("blk".to_string(), Arc::new(model))]);
        let sys = assemble(&net, &models, Params::new()).unwrap();
        let t_period = 1.3;
        let orbit = PeriodicOrbit::from_declared_period(
            &sys,
            &[0.0, 0.0],
            t_period,
            &OrbitConfig::default(),
        )
        .unwrap();
        let m = monodromy(&sys, &orbit, &IntegratorConfig::default()).unwrap();
        let expected = (b * t_period).exp();
        for r in 0..2 {
            for c in 0..2 {
                assert!(
                    (m.matrix[(r, c)] - expected[(r, c)]).abs() < 1e-7,
                    "({r},{c}): {} vs {}",
                    m.matrix[(r, c)],
                    expected[(r, c)]
                );
            }
        }
        assert!(m.liouville_relative_error.unwrap() < 1e-5);
    }

    #[test]
    fn periodic_negative_eigenvalue_matrix_is_floquet_unstable() {
        let sys = one_node_system("my_linear", Params::new());
        let pi = std::f64::consts::PI;
        let orbit =
            PeriodicOrbit::from_declared_period(&sys, &[0.0, 0.0], pi, &OrbitConfig::default())
                .unwrap();
        let m = monodromy(&sys, &orbit, &IntegratorConfig::default()).unwrap();
        let mult = m.multipliers().unwrap();
        assert!((mult[0].re - (-(pi / 2.0).exp())).abs() < 1e-4, "{}", mult[0]);
        assert!(mult[0].im.abs() < 1e-6);
        assert!((mult[1].re - (-(-pi).exp())).abs() < 1e-4, "{}", mult[1]);
        assert!(m.liouville_relative_error.unwrap() < 1e-5);
    }

    #[test]
    fn smoothed_switching_matches_the_exponential_product() {
        let sys = one_node_system("switch_linear", Params::from_pairs([("sigma", 1e-4)]));
        let orbit =
            PeriodicOrbit::from_declared_period(&sys, &[0.0, 0.0], 2.0, &OrbitConfig::default())
                .unwrap();
        let m = monodromy(&sys, &orbit, &IntegratorConfig::default()).unwrap();
        let mult = m.multipliers().unwrap();
        // Three-decimal reference values.
        assert!((mult[0].re - 1.772).abs() < 1e-2, "{}", mult[0]);
        assert!((mult[1].re - 0.051).abs() < 1e-2, "{}", mult[1]);

        // Exact product of the two phase exponentials.
        let a = DMatrix::from_row_slice(2, 2, &[-0.5, 0.0, 2.0, -0.7]);
        let b = DMatrix::from_row_slice(2, 2, &[-0.5, 2.0, 0.0, -0.7]);
        let product = a.exp() * b.exp();
        let exact = eigenvalues(&product).unwrap();
        assert!((mult[0].re - exact[0].re).abs() < 1e-3);
        assert!((mult[1].re - exact[1].re).abs() < 1e-3);
        assert!(m.liouville_relative_error.unwrap() < 1e-5);
    }

    #[test]
    fn hopf_orbit_has_the_trivial_multiplier() {
        use crate::model::{Arity, NodeModel};
        let net = Network::homogeneous(1, "hopf", "R2", 2, "syn", &[]);
        let model = NodeModel::new("hopf", 2, Arity::Exact(0), |_, own, _, _, out| {
            let (x, y) = (own[0], own[1]);
            let r2 = x * x + y * y;
            out[0] = x * (1.0 - r2) - y;
            out[1] = y * (1.0 - r2) + x;
            Ok(())
        });
        let models = BTreeMap::from([("hopf".to_string(), Arc::new(model))]);
        let sys = assemble(&net, &models, Params::new()).unwrap();
        let cfg = OrbitConfig { transient: 30.0, max_time: 40.0, ..OrbitConfig::default() };
        let orbit = crate::orbit::find_periodic_orbit(&sys, &[0.5, 0.0], &cfg).unwrap();
        let m = monodromy(&sys, &orbit, &IntegratorConfig::default()).unwrap();
        let mult = m.multipliers().unwrap();
        // Trivial multiplier 1 and the radial multiplier e^{-2T}.
        assert!((mult[0] - Complex::new(1.0, 0.0)).norm() < 1e-6, "{:?}", mult);
        let radial = (-2.0 * orbit.period).exp();
        assert!((mult[1].re - radial).abs() < 1e-8, "{:?}", mult);
        assert!(m.liouville_relative_error.unwrap() < 1e-5);
    }
}
