//! Reverse-mode differentiation over a small, fixed primitive set.
//!
//! Scalar arithmetic is recorded on a [`Tape`] one node at a time. Network
//! evaluations are recorded as whole batches: the outputs (and optional
//! tangent outputs) become leaf nodes, and the batch keeps the forward
//! activations so the reverse sweep can push output adjoints through the
//! network in one batched pass. Adjoints of batch inputs flow back onto the
//! tape, which is how query points that depend on trainable PDE parameters
//! get their pathwise derivatives.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::net::{self, BatchCache, ParamVector};
use crate::special::{digamma_unchecked, ln_gamma_abs_unchecked};

const NONE: u32 = u32::MAX;

/// Scalar type the estimator formulas are generic over.
///
/// Implemented by `f64` (plain evaluation) and by [`Var`] (recorded).
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(&self) -> f64;
    /// A constant in the same recording context as `self`.
    fn lift(&self, c: f64) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn powi(self, n: i32) -> Self;
    /// `self^e` for a constant exponent.
    fn powf(self, e: f64) -> Self;
    /// `max(self, c)`; the derivative is zero on the clamped branch.
    fn max_const(self, c: f64) -> Self;
    /// `ln |Γ(self)|`, derivative `ψ(self)`.
    fn ln_gamma_abs(self) -> Self;

    fn relu(self) -> Self {
        self.max_const(0.0)
    }
    fn recip(self) -> Self {
        self.lift(1.0) / self
    }
    /// `c - self`
    fn rsub(self, c: f64) -> Self {
        -self + c
    }
}

impl Real for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn lift(&self, c: f64) -> Self {
        c
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn powf(self, e: f64) -> Self {
        f64::powf(self, e)
    }
    fn max_const(self, c: f64) -> Self {
        if self > c {
            self
        } else {
            c
        }
    }
    fn ln_gamma_abs(self) -> Self {
        ln_gamma_abs_unchecked(self)
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    a: u32,
    b: u32,
    da: f64,
    db: f64,
}

impl Node {
    const LEAF: Node = Node {
        a: NONE,
        b: NONE,
        da: 0.0,
        db: 0.0,
    };
}

struct NetBatch {
    first: u32,
    rows: usize,
    in_dim: usize,
    tangent: bool,
    inputs: Vec<u32>,
    directions: Vec<u32>,
    cache: BatchCache,
}

/// Recording of one composite scalar computation.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    params: RefCell<Vec<(u32, usize)>>,
    batches: RefCell<Vec<NetBatch>>,
}

/// A value on a [`Tape`], or a constant that never touches it.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
    val: f64,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.idx == NONE {
            write!(f, "Const({})", self.val)
        } else {
            write!(f, "Var#{}({})", self.idx, self.val)
        }
    }
}

/// Outputs of one recorded network batch.
pub struct NetOutputs<'t> {
    pub values: Vec<Var<'t>>,
    pub tangents: Option<Vec<Var<'t>>>,
}

/// Result of a reverse sweep.
pub struct Gradient {
    adjoints: Vec<f64>,
    /// Gradient with respect to every [`ParamVector`] entry.
    pub params: Vec<f64>,
}

impl Gradient {
    /// Adjoint of an arbitrary recorded value (zero for constants).
    pub fn wrt(&self, v: Var<'_>) -> f64 {
        if v.idx == NONE {
            0.0
        } else {
            self.adjoints[v.idx as usize]
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, node: Node) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len() as u32;
        assert!(idx != NONE, "tape overflow");
        nodes.push(node);
        idx
    }

    pub fn constant(&self, val: f64) -> Var<'_> {
        Var {
            tape: self,
            idx: NONE,
            val,
        }
    }

    /// An independent variable with no parameter slot.
    pub fn variable(&self, val: f64) -> Var<'_> {
        let idx = self.push(Node::LEAF);
        Var {
            tape: self,
            idx,
            val,
        }
    }

    /// Leaf bound to entry `slot` of the parameter vector.
    pub fn param(&self, params: &ParamVector, slot: usize) -> Var<'_> {
        let v = self.variable(params.values[slot]);
        self.params.borrow_mut().push((v.idx, slot));
        v
    }

    fn unary(&self, a: Var<'_>, val: f64, da: f64) -> Var<'_> {
        if a.idx == NONE {
            return self.constant(val);
        }
        let idx = self.push(Node {
            a: a.idx,
            b: NONE,
            da,
            db: 0.0,
        });
        Var {
            tape: self,
            idx,
            val,
        }
    }

    fn binary(&self, a: Var<'_>, b: Var<'_>, val: f64, da: f64, db: f64) -> Var<'_> {
        match (a.idx == NONE, b.idx == NONE) {
            (true, true) => self.constant(val),
            (false, true) => self.unary(a, val, da),
            (true, false) => self.unary(b, val, db),
            (false, false) => {
                let idx = self.push(Node {
                    a: a.idx,
                    b: b.idx,
                    da,
                    db,
                });
                Var {
                    tape: self,
                    idx,
                    val,
                }
            }
        }
    }

    /// Weighted sum `Σ w_k x_k` recorded as a chain of two-parent nodes.
    pub fn dot_const<'t>(&'t self, xs: &[Var<'t>], ws: &[f64]) -> Var<'t> {
        let mut acc = self.constant(0.0);
        for (x, w) in xs.iter().zip(ws) {
            acc = acc + *x * *w;
        }
        acc
    }

    /// Evaluate the network on a batch of inputs and record the outputs.
    ///
    /// When `directions` is given, each row also produces the directional
    /// derivative `direction · ∇_input forward(input)`, recorded so that
    /// its own parameter gradient is available (forward-over-reverse).
    pub fn eval_network<'t>(
        &'t self,
        params: &ParamVector,
        inputs: &[Vec<Var<'t>>],
        directions: Option<&[Vec<Var<'t>>]>,
    ) -> NetOutputs<'t> {
        let in_dim = params.layout.spec.input_dim;
        let rows = inputs.len();
        let mut x = Vec::with_capacity(rows * in_dim);
        let mut input_ids = Vec::with_capacity(rows * in_dim);
        for row in inputs {
            assert_eq!(row.len(), in_dim, "network input dimension mismatch");
            for v in row {
                x.push(v.val);
                input_ids.push(v.idx);
            }
        }
        let (dirs, dir_ids) = match directions {
            Some(ds) => {
                assert_eq!(ds.len(), rows, "one direction per input row");
                let mut dv = Vec::with_capacity(rows * in_dim);
                let mut di = Vec::with_capacity(rows * in_dim);
                for row in ds {
                    assert_eq!(row.len(), in_dim, "direction dimension mismatch");
                    for v in row {
                        dv.push(v.val);
                        di.push(v.idx);
                    }
                }
                (Some(dv), di)
            }
            None => (None, Vec::new()),
        };

        let fwd = net::forward_batch(params, &x, dirs.as_deref());

        let first = self.len() as u32;
        let values: Vec<Var<'t>> = fwd
            .outputs
            .iter()
            .map(|&val| self.variable(val))
            .collect();
        let tangents = fwd.tangents.as_ref().map(|ts| {
            ts.iter()
                .map(|&val| self.variable(val))
                .collect::<Vec<_>>()
        });
        if rows > 0 {
            self.batches.borrow_mut().push(NetBatch {
                first,
                rows,
                in_dim,
                tangent: tangents.is_some(),
                inputs: input_ids,
                directions: dir_ids,
                cache: fwd.cache,
            });
        }
        NetOutputs { values, tangents }
    }

    /// Reverse sweep from `output`. `params` must be the vector the
    /// network batches were evaluated with.
    pub fn gradient(&self, output: Var<'_>, params: Option<&ParamVector>) -> Gradient {
        let nodes = self.nodes.borrow();
        let batches = self.batches.borrow();
        let n = nodes.len();
        let mut adj = vec![0.0; n];
        let mut grad = vec![0.0; params.map_or(0, |p| p.values.len())];
        if output.idx == NONE {
            return Gradient {
                adjoints: adj,
                params: grad,
            };
        }
        adj[output.idx as usize] = 1.0;

        let mut next_batch = batches.len();
        for i in (0..=output.idx as usize).rev() {
            let g = adj[i];
            if g != 0.0 {
                let node = nodes[i];
                if node.a != NONE {
                    adj[node.a as usize] += g * node.da;
                }
                if node.b != NONE {
                    adj[node.b as usize] += g * node.db;
                }
            }
            while next_batch > 0 && batches[next_batch - 1].first as usize >= i {
                next_batch -= 1;
                let batch = &batches[next_batch];
                let params = params.expect("network batches need the parameter vector");
                backprop_batch(batch, params, &mut adj, &mut grad);
            }
        }
        for &(node, slot) in self.params.borrow().iter() {
            grad[slot] += adj[node as usize];
        }
        Gradient {
            adjoints: adj,
            params: grad,
        }
    }
}

fn backprop_batch(batch: &NetBatch, params: &ParamVector, adj: &mut [f64], grad: &mut [f64]) {
    let first = batch.first as usize;
    let out_adj = &adj[first..first + batch.rows];
    let tan_adj = if batch.tangent {
        Some(&adj[first + batch.rows..first + 2 * batch.rows])
    } else {
        None
    };
    let any_out = out_adj.iter().any(|&g| g != 0.0);
    let any_tan = tan_adj.is_some_and(|t| t.iter().any(|&g| g != 0.0));
    if !any_out && !any_tan {
        return;
    }
    let want_input = batch.inputs.iter().any(|&i| i != NONE);
    let want_dir = batch.directions.iter().any(|&i| i != NONE);
    let out_adj = out_adj.to_vec();
    let tan_adj = tan_adj.map(|t| t.to_vec());
    let back = net::backward_batch(
        params,
        &batch.cache,
        &out_adj,
        tan_adj.as_deref(),
        want_input,
        want_dir,
    );
    for (g, b) in grad.iter_mut().zip(&back.params) {
        *g += b;
    }
    if let Some(xbar) = back.inputs {
        for (k, &id) in batch.inputs.iter().enumerate() {
            if id != NONE {
                adj[id as usize] += xbar[k];
            }
        }
    }
    if let Some(dbar) = back.directions {
        for (k, &id) in batch.directions.iter().enumerate() {
            if id != NONE {
                adj[id as usize] += dbar[k];
            }
        }
    }
    debug_assert_eq!(batch.inputs.len(), batch.rows * batch.in_dim);
}

impl<'t> Real for Var<'t> {
    fn value(&self) -> f64 {
        self.val
    }
    fn lift(&self, c: f64) -> Self {
        self.tape.constant(c)
    }
    fn exp(self) -> Self {
        let v = self.val.exp();
        self.tape.unary(self, v, v)
    }
    fn ln(self) -> Self {
        self.tape.unary(self, self.val.ln(), 1.0 / self.val)
    }
    fn sqrt(self) -> Self {
        let v = self.val.sqrt();
        self.tape.unary(self, v, 0.5 / v)
    }
    fn powi(self, n: i32) -> Self {
        let v = self.val.powi(n);
        let d = if n == 0 {
            0.0
        } else {
            n as f64 * self.val.powi(n - 1)
        };
        self.tape.unary(self, v, d)
    }
    fn powf(self, e: f64) -> Self {
        let v = self.val.powf(e);
        self.tape.unary(self, v, e * self.val.powf(e - 1.0))
    }
    fn max_const(self, c: f64) -> Self {
        if self.val > c {
            self
        } else {
            self.tape.constant(c)
        }
    }
    fn ln_gamma_abs(self) -> Self {
        self.tape.unary(
            self,
            ln_gamma_abs_unchecked(self.val),
            digamma_unchecked(self.val),
        )
    }
}

impl<'t> Var<'t> {
    pub fn is_constant(&self) -> bool {
        self.idx == NONE
    }
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, o: Self) -> Self {
        self.tape.binary(self, o, self.val + o.val, 1.0, 1.0)
    }
}
impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, o: Self) -> Self {
        self.tape.binary(self, o, self.val - o.val, 1.0, -1.0)
    }
}
impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, o: Self) -> Self {
        self.tape.binary(self, o, self.val * o.val, o.val, self.val)
    }
}
impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, o: Self) -> Self {
        let q = self.val / o.val;
        self.tape.binary(self, o, q, 1.0 / o.val, -q / o.val)
    }
}
impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Self {
        self.tape.unary(self, -self.val, -1.0)
    }
}
impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, c: f64) -> Self {
        self.tape.unary(self, self.val + c, 1.0)
    }
}
impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, c: f64) -> Self {
        self.tape.unary(self, self.val - c, 1.0)
    }
}
impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, c: f64) -> Self {
        if c == 0.0 {
            return self.tape.constant(0.0);
        }
        self.tape.unary(self, self.val * c, c)
    }
}
impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, c: f64) -> Self {
        self.tape.unary(self, self.val / c, 1.0 / c)
    }
}
