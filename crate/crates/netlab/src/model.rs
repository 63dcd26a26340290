//! Node models: the internal dynamic of one node together with how grouped
//! inputs enter it, and optional analytic partial derivatives.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::expr::{Expr, Var};

/// Named scalar parameters shared by every node of a system.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params(BTreeMap<String, f64>);

impl Params {
    pub fn new() -> Self {
        Params::default()
    }

    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        Params(pairs.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn set(&mut self, name: impl Into<String>, value: f64) {
        self.0.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        self.0
            .get(name)
            .copied()
            .ok_or_else(|| Error::Assembly(format!("parameter \"{name}\" is absent")))
    }

    pub fn get_or(&self, name: &str, default: f64) -> f64 {
        self.0.get(name).copied().unwrap_or(default)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

/// How many input arrows a model accepts in total.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Arity {
    Exact(usize),
    /// Any number of inputs, entering symmetrically.
    Variadic,
}

/// One group of input blocks sharing an arrow type, in arrow id order.
pub struct InputGroup<'a> {
    pub arrow_type: &'a str,
    pub states: Vec<&'a [f64]>,
}

impl InputGroup<'_> {
    /// Componentwise sum of the group's input blocks, order-insensitive.
    pub fn sum(&self, dim: usize) -> Vec<f64> {
        (0..dim)
            .map(|i| stable_sum(self.states.iter().map(|s| s[i])))
            .collect()
    }
}

/// Sums in ascending value order, so the result is exactly invariant under
/// permutations of the inputs (plain left-to-right summation is not).
pub fn stable_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

/// Sum of the first components over all groups (the usual scalar coupling).
pub fn input_sum_first(groups: &[InputGroup]) -> f64 {
    stable_sum(groups.iter().flat_map(|g| g.states.iter()).map(|s| s[0]))
}

type RhsFn = dyn Fn(f64, &[f64], &[InputGroup], &Params, &mut [f64]) -> Result<()> + Send + Sync;
type DOwnFn = dyn Fn(f64, &[f64], &[InputGroup], &Params) -> Result<DMatrix<f64>> + Send + Sync;
/// Partial with respect to one input block, identified by (group, position).
type DInputFn = dyn Fn(f64, &[f64], &[InputGroup], &Params, usize, usize) -> Result<DMatrix<f64>>
    + Send
    + Sync;

/// Times (within one pattern period) at which a model's time dependence
/// loses smoothness; integration is split there.
#[derive(Clone, Debug, PartialEq)]
pub struct BreakpointPattern {
    pub period: f64,
    pub offsets: Vec<f64>,
}

/// The dynamic of a single node: its state dimension, how inputs enter, the
/// right-hand side and (optionally) analytic partials with respect to the
/// own state and to each input block. Models without analytic partials fall
/// back to central finite differences at the system level.
pub struct NodeModel {
    pub name: String,
    pub state_dim: usize,
    pub arity: Arity,
    pub nonautonomous: bool,
    pub required_params: Vec<String>,
    rhs: Box<RhsFn>,
    d_own: Option<Box<DOwnFn>>,
    d_input: Option<Box<DInputFn>>,
    breakpoints: Option<Box<dyn Fn(&Params) -> BreakpointPattern + Send + Sync>>,
}

impl fmt::Debug for NodeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NodeModel")
            .field("name", &self.name)
            .field("state_dim", &self.state_dim)
            .field("arity", &self.arity)
            .finish()
    }
}

impl NodeModel {
    pub fn new(
        name: impl Into<String>,
        state_dim: usize,
        arity: Arity,
        rhs: impl Fn(f64, &[f64], &[InputGroup], &Params, &mut [f64]) -> Result<()>
            + Send
            + Sync
            + 'static,
    ) -> Self {
        NodeModel {
            name: name.into(),
            state_dim,
            arity,
            nonautonomous: false,
            required_params: Vec::new(),
            rhs: Box::new(rhs),
            d_own: None,
            d_input: None,
            breakpoints: None,
        }
    }

    pub fn nonautonomous(mut self) -> Self {
        self.nonautonomous = true;
        self
    }

    pub fn requires(mut self, names: &[&str]) -> Self {
        self.required_params = names.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn with_d_own(
        mut self,
        f: impl Fn(f64, &[f64], &[InputGroup], &Params) -> Result<DMatrix<f64>>
            + Send
            + Sync
            + 'static,
    ) -> Self {
        self.d_own = Some(Box::new(f));
        self
    }

    pub fn with_d_input(
        mut self,
        f: impl Fn(f64, &[f64], &[InputGroup], &Params, usize, usize) -> Result<DMatrix<f64>>
            + Send
            + Sync
            + 'static,
    ) -> Self {
        self.d_input = Some(Box::new(f));
        self
    }

    pub fn with_breakpoints(
        mut self,
        f: impl Fn(&Params) -> BreakpointPattern + Send + Sync + 'static,
    ) -> Self {
        self.breakpoints = Some(Box::new(f));
        self
    }

    /// Copy of this model with analytic partials removed (forces the
    /// finite-difference route).
    pub fn strip_partials(self: &Arc<Self>) -> Arc<NodeModel> {
        let inner = Arc::clone(self);
        let inner2 = Arc::clone(self);
        let mut out = NodeModel::new(
            format!("{}#fd", self.name),
            self.state_dim,
            self.arity,
            move |t, own, inputs, p, dst| inner.eval(t, own, inputs, p, dst),
        );
        out.nonautonomous = self.nonautonomous;
        out.required_params = self.required_params.clone();
        if self.breakpoints.is_some() {
            out.breakpoints = Some(Box::new(move |p| inner2.breakpoint_pattern(p).unwrap()));
        }
        Arc::new(out)
    }

    pub fn eval(
        &self,
        t: f64,
        own: &[f64],
        inputs: &[InputGroup],
        p: &Params,
        out: &mut [f64],
    ) -> Result<()> {
        (self.rhs)(t, own, inputs, p, out)
    }

    pub fn has_analytic_partials(&self) -> bool {
        self.d_own.is_some()
    }

    pub fn has_input_partials(&self) -> bool {
        self.d_input.is_some()
    }

    pub fn d_own(
        &self,
        t: f64,
        own: &[f64],
        inputs: &[InputGroup],
        p: &Params,
    ) -> Option<Result<DMatrix<f64>>> {
        self.d_own.as_ref().map(|f| f(t, own, inputs, p))
    }

    pub fn d_input(
        &self,
        t: f64,
        own: &[f64],
        inputs: &[InputGroup],
        p: &Params,
        group: usize,
        index: usize,
    ) -> Option<Result<DMatrix<f64>>> {
        self.d_input.as_ref().map(|f| f(t, own, inputs, p, group, index))
    }

    pub fn breakpoint_pattern(&self, p: &Params) -> Option<BreakpointPattern> {
        self.breakpoints.as_ref().map(|f| f(p))
    }

    pub fn accepts(&self, n_inputs: usize) -> bool {
        match self.arity {
            Arity::Exact(n) => n == n_inputs,
            Arity::Variadic => true,
        }
    }
}

/// FitzHugh-Nagumo node with voltage coupling:
/// `V' = V(a-V)(V-1) - W + I + mu * sum(V_in)`, `W' = b V - gamma W`.
pub fn fhn_voltage() -> Arc<NodeModel> {
    let model = NodeModel::new("fhn_voltage", 2, Arity::Variadic, |_, own, inputs, p, out| {
        let (v, w) = (own[0], own[1]);
        let a = p.get("a")?;
        let s = input_sum_first(inputs);
        out[0] = v * (a - v) * (v - 1.0) - w + p.get("I")? + p.get("mu")? * s;
        out[1] = p.get("b")? * v - p.get("gamma")? * w;
        Ok(())
    })
    .requires(&["a", "b", "gamma", "I", "mu"])
    .with_d_own(|_, own, _, p| {
        let v = own[0];
        let a = p.get("a")?;
        Ok(DMatrix::from_row_slice(
            2,
            2,
            &[
                -3.0 * v * v + 2.0 * (1.0 + a) * v - a,
                -1.0,
                p.get("b")?,
                -p.get("gamma")?,
            ],
        ))
    })
    .with_d_input(|_, _, _, p, _, _| {
        Ok(DMatrix::from_row_slice(2, 2, &[p.get("mu")?, 0.0, 0.0, 0.0]))
    });
    Arc::new(model)
}

/// Scalar node defined by an expression in `u` (own state), `v` (sum of all
/// input states) and named parameters.
pub fn scalar_generic(text: &str) -> Result<Arc<NodeModel>> {
    let expr = Expr::parse(text)?;
    let du = expr.diff(Var::Own);
    let dv = expr.diff(Var::Input);
    let required: Vec<String> = expr.params().into_iter().collect();
    let e_rhs = expr.clone();
    let mut model = NodeModel::new(
        format!("scalar_generic({text})"),
        1,
        Arity::Variadic,
        move |_, own, inputs, p, out| {
            let v = input_sum_first(inputs);
            out[0] = e_rhs.eval(own[0], v, &|name| p.get(name))?;
            Ok(())
        },
    )
    .with_d_own(move |_, own, inputs, p| {
        let v = input_sum_first(inputs);
        Ok(DMatrix::from_element(1, 1, du.eval(own[0], v, &|name| p.get(name))?))
    })
    .with_d_input(move |_, own, inputs, p, _, _| {
        let v = input_sum_first(inputs);
        Ok(DMatrix::from_element(1, 1, dv.eval(own[0], v, &|name| p.get(name))?))
    });
    model.required_params = required;
    Ok(Arc::new(model))
}

/// The time-periodic planar matrix whose pointwise eigenvalues have negative
/// real part at every instant while the zero solution is unstable:
/// rows `[-1 + 1.5 cos^2 t, 1 - 1.5 sin t cos t]`,
/// `[-1 - 1.5 sin t cos t, -1 + 1.5 sin^2 t]`. Period pi.
pub fn my_matrix(t: f64) -> DMatrix<f64> {
    let (s, c) = t.sin_cos();
    DMatrix::from_row_slice(
        2,
        2,
        &[
            -1.0 + 1.5 * c * c,
            1.0 - 1.5 * s * c,
            -1.0 - 1.5 * s * c,
            -1.0 + 1.5 * s * s,
        ],
    )
}

/// Two-dimensional nonautonomous block `x' = A(t) x` with [`my_matrix`].
/// No inputs.
pub fn my_linear() -> Arc<NodeModel> {
    let model = NodeModel::new("my_linear", 2, Arity::Exact(0), |t, own, _, _, out| {
        let m = my_matrix(t);
        out[0] = m[(0, 0)] * own[0] + m[(0, 1)] * own[1];
        out[1] = m[(1, 0)] * own[0] + m[(1, 1)] * own[1];
        Ok(())
    })
    .with_d_own(|t, _, _, _| Ok(my_matrix(t)))
    .nonautonomous();
    Arc::new(model)
}

/// C1 ramp from 0 at x <= 0 to 1 at x >= 1.
fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// The period-2 switching matrix: `B = [[-0.5, 2], [0, -0.7]]`-like phase on
/// `[0,1)` and its transpose layout on `[1,2)`, with the off-diagonal
/// entries ramped through zero one after the other over a window of width
/// `sigma/2` each. The matrix is triangular at every instant, so its
/// pointwise eigenvalues are always -0.5 and -0.7.
pub fn switch_matrix(t: f64, sigma: f64) -> DMatrix<f64> {
    let t2 = t.rem_euclid(2.0);
    let half = 0.5 * sigma;
    // beta: upper-right entry, equal to 2 in the B phase [0, 1).
    let beta = 2.0
        * if t2 < half {
            smoothstep(t2 / half)
        } else if t2 <= 1.0 - half {
            1.0
        } else if t2 < 1.0 {
            1.0 - smoothstep((t2 - (1.0 - half)) / half)
        } else {
            0.0
        };
    // gamma: lower-left entry, equal to 2 in the A phase [1, 2).
    let gamma = 2.0
        * if t2 <= 1.0 {
            0.0
        } else if t2 < 1.0 + half {
            smoothstep((t2 - 1.0) / half)
        } else if t2 <= 2.0 - half {
            1.0
        } else {
            1.0 - smoothstep((t2 - (2.0 - half)) / half)
        };
    DMatrix::from_row_slice(2, 2, &[-0.5, beta, gamma, -0.7])
}

/// Two-dimensional nonautonomous block `x' = M(t) x + mu * sum(x_in)` with
/// [`switch_matrix`]; `sigma` (default 1e-3) is the smoothing width and
/// `mu` (default 0) the input coupling.
pub fn switch_linear() -> Arc<NodeModel> {
    let model =
        NodeModel::new("switch_linear", 2, Arity::Variadic, |t, own, inputs, p, out| {
            let m = switch_matrix(t, p.get_or("sigma", 1e-3));
            let mu = p.get_or("mu", 0.0);
            let s = [
                stable_sum(inputs.iter().flat_map(|g| g.states.iter()).map(|x| x[0])),
                stable_sum(inputs.iter().flat_map(|g| g.states.iter()).map(|x| x[1])),
            ];
            out[0] = m[(0, 0)] * own[0] + m[(0, 1)] * own[1] + mu * s[0];
            out[1] = m[(1, 0)] * own[0] + m[(1, 1)] * own[1] + mu * s[1];
            Ok(())
        })
        .with_d_own(|t, _, _, p| Ok(switch_matrix(t, p.get_or("sigma", 1e-3))))
        .with_d_input(|_, _, _, p, _, _| {
            let mu = p.get_or("mu", 0.0);
            Ok(DMatrix::from_row_slice(2, 2, &[mu, 0.0, 0.0, mu]))
        })
        .with_breakpoints(|p| {
            let half = 0.5 * p.get_or("sigma", 1e-3);
            BreakpointPattern {
                period: 2.0,
                offsets: vec![0.0, half, 1.0 - half, 1.0, 1.0 + half, 2.0 - half],
            }
        })
        .nonautonomous();
    Arc::new(model)
}

/// Looks up a builtin model by name; `scalar_generic` requires the
/// expression argument.
pub fn builtin(name: &str, expr: Option<&str>) -> Result<Arc<NodeModel>> {
    match name {
        "fhn_voltage" => Ok(fhn_voltage()),
        "my_linear" => Ok(my_linear()),
        "switch_linear" => Ok(switch_linear()),
        "scalar_generic" => {
            let text = expr.ok_or_else(|| {
                Error::Assembly("scalar_generic requires an \"expr\" field".into())
            })?;
            scalar_generic(text)
        }
        other => Err(Error::Assembly(format!("unknown model \"{other}\""))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fhn_rhs_matches_the_displayed_equations() {
        let m = fhn_voltage();
        let p = Params::from_pairs([
            ("a", 0.25),
            ("b", 0.02),
            ("gamma", 0.05),
            ("I", 0.1),
            ("mu", 0.8),
        ]);
        let own = [0.3, 0.1];
        let upstream = [0.7, -0.2];
        let groups = [InputGroup { arrow_type: "syn", states: vec![&upstream] }];
        let mut out = [0.0, 0.0];
        m.eval(0.0, &own, &groups, &p, &mut out).unwrap();
        let v = 0.3_f64;
        assert!((out[0] - (v * (0.25 - v) * (v - 1.0) - 0.1 + 0.1 + 0.8 * 0.7)).abs() < 1e-15);
        assert!((out[1] - (0.02 * v - 0.05 * 0.1)).abs() < 1e-15);
        // Coupling enters the voltage only.
        let d = m.d_input(0.0, &own, &groups, &p, 0, 0).unwrap().unwrap();
        assert_eq!(d[(0, 0)], 0.8);
        assert_eq!(d[(1, 1)], 0.0);
    }

    #[test]
    fn my_matrix_has_constant_trace_and_det() {
        for k in 0..50 {
            let t = 0.13 * k as f64;
            let m = my_matrix(t);
            assert!((m.trace() + 0.5).abs() < 1e-14);
            let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
            assert!((det - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn switch_matrix_is_always_triangular() {
        let sigma = 1e-2;
        for k in 0..4000 {
            let t = 2.0 * k as f64 / 4000.0;
            let m = switch_matrix(t, sigma);
            assert!(
                m[(0, 1)].abs() * m[(1, 0)].abs() == 0.0,
                "both off-diagonals nonzero at t = {t}"
            );
        }
        // Plateaus reproduce the exact switching matrices.
        let b = switch_matrix(0.5, sigma);
        assert_eq!((b[(0, 1)], b[(1, 0)]), (2.0, 0.0));
        let a = switch_matrix(1.5, sigma);
        assert_eq!((a[(0, 1)], a[(1, 0)]), (0.0, 2.0));
    }

    #[test]
    fn scalar_generic_sums_inputs() {
        let m = scalar_generic("-u + v").unwrap();
        let x1 = [2.0];
        let x2 = [3.5];
        let groups = [InputGroup { arrow_type: "syn", states: vec![&x1, &x2] }];
        let mut out = [0.0];
        m.eval(0.0, &[1.0], &groups, &Params::new(), &mut out).unwrap();
        assert_eq!(out[0], 4.5);
    }
}
