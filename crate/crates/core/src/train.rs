//! Losses, Adam and the training loop.
//!
//! The equation loss multiplies two residual estimates built from
//! independent sample groups, so its expectation is the squared residual
//! even though each factor is noisy. Individual loss values can therefore
//! be negative.

use crate::autodiff::{Real, Tape, Var};
use crate::error::{domain, Error, Result};
use crate::estimator::{group_queries, sample_residuals, EstimatorConfig, Field, PdeCoefficients, SampleGroup, SharedValues};
use crate::net::{ParamVector, PdeParam};
use crate::problems::{make_sensor_data, record_ansatz, Ansatz, DataPoint, Family, ProblemSpec, TrainPoint};
use crate::rng::{domain as tags, RngKey};

/// How the two residual groups of a point are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    /// `(1/m) Σ_j R̂⁽¹⁾_j R̂⁽²⁾_j`
    Paired,
    /// `mean_j R̂⁽¹⁾_j · mean_j R̂⁽²⁾_j`
    GroupMean,
}

impl LossMode {
    pub fn name(&self) -> &'static str {
        match self {
            LossMode::Paired => "paired",
            LossMode::GroupMean => "group-mean",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "paired" => Ok(LossMode::Paired),
            "group-mean" => Ok(LossMode::GroupMean),
            _ => Err(Error::Config(format!("unknown loss mode '{s}'"))),
        }
    }

    fn combine<R: Real>(&self, r1: &[R], r2: &[R]) -> R {
        let m = r1.len() as f64;
        match self {
            LossMode::Paired => {
                let mut acc = r1[0] * r2[0];
                for j in 1..r1.len() {
                    acc = acc + r1[j] * r2[j];
                }
                acc / m
            }
            LossMode::GroupMean => {
                let s1 = r1[1..].iter().fold(r1[0], |a, &b| a + b);
                let s2 = r2[1..].iter().fold(r2[0], |a, &b| a + b);
                s1 * s2 / (m * m)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub equ: f64,
    pub g: f64,
    pub u: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { equ: 1.0, g: 1.0, u: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub estimator: EstimatorConfig,
    pub mode: LossMode,
    pub weights: LossWeights,
    pub seed: u64,
    /// Loss trace interval in epochs.
    pub trace_every: usize,
}

impl TrainConfig {
    /// 10⁴ epochs for forward problems, 4·10⁴ for inverse ones.
    pub fn for_problem(spec: &ProblemSpec, seed: u64) -> Self {
        let epochs = match spec.family {
            Family::InverseAde { .. } => 40_000,
            _ => 10_000,
        };
        Self {
            epochs,
            batch_size: 128,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            estimator: EstimatorConfig::default(),
            mode: LossMode::Paired,
            weights: LossWeights::default(),
            seed,
            trace_every: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config("lr must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("adam betas must lie in [0, 1)".into()));
        }
        let w = self.weights;
        if w.equ < 0.0 || w.g < 0.0 || w.u < 0.0 || w.equ + w.g + w.u == 0.0 {
            return Err(Error::Config("loss weights must be non-negative with one positive".into()));
        }
        if self.trace_every == 0 {
            return Err(Error::Config("trace_every must be at least 1".into()));
        }
        self.estimator.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Step decay: ×0.1 from 50% of the epochs, ×0.01 from 75%.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if 4 * epoch >= 3 * self.epochs {
            self.lr * 0.01
        } else if 2 * epoch >= self.epochs {
            self.lr * 0.1
        } else {
            self.lr
        }
    }
}

/// Fixed data sets: initial condition and sensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub initial: Vec<DataPoint>,
    pub observations: Vec<DataPoint>,
}

impl Dataset {
    pub fn for_problem(spec: &ProblemSpec, root: &RngKey) -> Result<Self> {
        let observations = match spec.family {
            Family::InverseAde { .. } => make_sensor_data(spec, root)?,
            _ => Vec::new(),
        };
        Ok(Self {
            initial: spec.initial_data(root),
            observations,
        })
    }
}

/// Residual points of one step with their two sample groups each.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub points: Vec<TrainPoint>,
    pub groups: Vec<[SampleGroup; 2]>,
}

impl Batch {
    /// Points from `(BATCH, epoch, i)`, groups from `(GROUPS, epoch, i, g)`.
    pub fn draw(spec: &ProblemSpec, n: usize, m: usize, root: &RngKey, epoch: usize) -> Result<Self> {
        let points = spec.sample_batch(n, &root.at(&[tags::BATCH, epoch as u64]))?;
        let gkey = root.at(&[tags::GROUPS, epoch as u64]);
        let d = spec.dim();
        let groups = (0..n as u64)
            .map(|i| {
                let draw = |g: u64| SampleGroup::draw(d, m, &mut gkey.at(&[i, g]).stream());
                [draw(0), draw(1)]
            })
            .collect();
        Ok(Self { points, groups })
    }
}

/// Loss components of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts {
    pub total: f64,
    pub equ: f64,
    pub g: f64,
    pub u: f64,
}

/// Evaluation counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalCounts {
    /// Surrogate queries made by the equation loss, exterior ones included.
    pub equation_queries: u64,
    /// Surrogate queries made by the data and initial losses.
    pub data_queries: u64,
    /// Rows that reached the network; exterior rows are exact zeros.
    pub network_rows: u64,
    pub residual_points: u64,
}

impl std::ops::AddAssign for EvalCounts {
    fn add_assign(&mut self, o: Self) {
        self.equation_queries += o.equation_queries;
        self.data_queries += o.data_queries;
        self.network_rows += o.network_rows;
        self.residual_points += o.residual_points;
    }
}

impl EvalCounts {
    /// Equation-loss surrogate queries per residual point.
    pub fn queries_per_point(&self) -> f64 {
        self.equation_queries as f64 / self.residual_points.max(1) as f64
    }
}

/// Everything the loss needs besides the parameters.
#[derive(Debug, Clone, Copy)]
pub struct LossContext<'a> {
    pub spec: &'a ProblemSpec,
    pub data: &'a Dataset,
    pub estimator: &'a EstimatorConfig,
    pub mode: LossMode,
    pub weights: LossWeights,
}

/// A recorded total loss.
pub struct RecordedLoss<'t> {
    pub total: Var<'t>,
    pub parts: LossParts,
    pub counts: EvalCounts,
}

fn pde_coefficients<'t>(tape: &'t Tape, spec: &ProblemSpec, params: &ParamVector) -> PdeCoefficients<Var<'t>> {
    spec.coefficients(tape.constant(0.0), |p: PdeParam| {
        params.layout.pde_slot(p).map(|slot| tape.param(params, slot))
    })
}

/// Recorded equation loss, `(1/N_b) Σ_i combine(R̂⁽¹⁾_i, R̂⁽²⁾_i)`.
pub fn equation_loss<'t>(
    tape: &'t Tape,
    params: &ParamVector,
    spec: &ProblemSpec,
    batch: &Batch,
    cfg: &EstimatorConfig,
    mode: LossMode,
) -> (Var<'t>, EvalCounts) {
    let coeffs = pde_coefficients(tape, spec, params);
    equation_loss_with(tape, params, spec, &coeffs, batch, cfg, mode)
}

fn equation_loss_with<'t>(
    tape: &'t Tape,
    params: &ParamVector,
    spec: &ProblemSpec,
    base: &PdeCoefficients<Var<'t>>,
    batch: &Batch,
    cfg: &EstimatorConfig,
    mode: LossMode,
) -> (Var<'t>, EvalCounts) {
    let d = spec.dim();
    let zero = tape.constant(0.0);
    let n = batch.points.len();
    let mut centers = Vec::with_capacity(n);
    let mut rows = Vec::new();
    let mut plans = Vec::with_capacity(n);
    for (tp, groups) in batch.points.iter().zip(&batch.groups) {
        let coeffs = spec.point_coefficients(base, &tp.point);
        centers.push(tp.point.center_row(zero));
        let initial_at = tp.point.initial_row(zero).map(|r| {
            rows.push(r);
            rows.len() - 1
        });
        let mut qs = Vec::with_capacity(2);
        for g in groups {
            let q = group_queries(&tp.point, &coeffs, cfg, g);
            let start = rows.len();
            rows.extend(q.rows.iter().cloned());
            qs.push((q, start));
        }
        plans.push((coeffs, initial_at, qs));
    }
    let dirs: Option<Vec<Vec<Var<'t>>>> = base.v.as_ref().map(|v| vec![v.clone(); n]);
    let (center_vals, advection, sent_c) = record_ansatz(tape, params, d, &centers, dirs.as_deref());
    let (vals, _, sent) = record_ansatz(tape, params, d, &rows, None);

    let mut total = zero;
    for (i, (tp, (coeffs, initial_at, qs))) in batch.points.iter().zip(&plans).enumerate() {
        let shared = SharedValues {
            center: center_vals[i],
            initial: initial_at.map(|k| vals[k]),
            advection: advection.as_ref().map(|a| a[i]),
        };
        let res: Vec<Vec<Var<'t>>> = qs
            .iter()
            .map(|(q, start)| {
                let v = &vals[*start..*start + q.rows.len()];
                sample_residuals(&tp.point, coeffs, cfg, q, v, &shared, tp.forcing)
            })
            .collect();
        total = total + mode.combine(&res[0], &res[1]);
    }
    let counts = EvalCounts {
        equation_queries: (centers.len() + rows.len()) as u64,
        data_queries: 0,
        network_rows: (sent_c + sent) as u64,
        residual_points: n as u64,
    };
    (total / n.max(1) as f64, counts)
}

/// Equation loss of a plain field on a fixed batch, same combination rule
/// as the recorded loss. `coeffs` are the operator coefficients.
pub fn equation_loss_field(
    u: &impl Field,
    spec: &ProblemSpec,
    coeffs: &PdeCoefficients<f64>,
    batch: &Batch,
    cfg: &EstimatorConfig,
    mode: LossMode,
) -> f64 {
    let mut total = 0.0;
    for (tp, groups) in batch.points.iter().zip(&batch.groups) {
        let c = spec.point_coefficients(coeffs, &tp.point);
        let center_row = tp.point.center_row(0.0);
        let shared = SharedValues {
            center: u.eval(&center_row),
            initial: tp.point.initial_row(0.0).map(|r| u.eval(&r)),
            advection: c.v.as_ref().map(|v| u.directional(&center_row, v)),
        };
        let res: Vec<Vec<f64>> = groups
            .iter()
            .map(|g| {
                let q = group_queries(&tp.point, &c, cfg, g);
                let vals: Vec<f64> = q.rows.iter().map(|r| u.eval(r)).collect();
                sample_residuals(&tp.point, &c, cfg, &q, &vals, &shared, tp.forcing)
            })
            .collect();
        total += mode.combine(&res[0], &res[1]);
    }
    total / batch.points.len().max(1) as f64
}

/// Recorded mean squared misfit; a constant zero for an empty set.
pub fn data_loss<'t>(tape: &'t Tape, params: &ParamVector, d: usize, points: &[DataPoint]) -> (Var<'t>, EvalCounts) {
    if points.is_empty() {
        return (tape.constant(0.0), EvalCounts::default());
    }
    let rows: Vec<Vec<Var<'t>>> = points
        .iter()
        .map(|p| p.input.iter().map(|&v| tape.constant(v)).collect())
        .collect();
    let (vals, _, sent) = record_ansatz(tape, params, d, &rows, None);
    let mut acc = tape.constant(0.0);
    for (v, p) in vals.iter().zip(points) {
        let r = *v - p.value;
        acc = acc + r * r;
    }
    let counts = EvalCounts {
        data_queries: points.len() as u64,
        network_rows: sent as u64,
        ..Default::default()
    };
    (acc / points.len() as f64, counts)
}

/// Initial-condition misfit; same form as [`data_loss`].
pub fn init_loss<'t>(tape: &'t Tape, params: &ParamVector, d: usize, points: &[DataPoint]) -> (Var<'t>, EvalCounts) {
    data_loss(tape, params, d, points)
}

/// `w_equ L_equ + w_g L_g + w_u L_u`, recorded end to end. Terms with zero
/// weight are not evaluated.
pub fn total_loss<'t>(tape: &'t Tape, params: &ParamVector, ctx: &LossContext<'_>, batch: &Batch) -> RecordedLoss<'t> {
    let d = ctx.spec.dim();
    let zero = tape.constant(0.0);
    let mut counts = EvalCounts::default();
    let mut parts = LossParts::default();
    let mut total = zero;
    let w = ctx.weights;
    if w.equ != 0.0 {
        let (l, c) = equation_loss(tape, params, ctx.spec, batch, ctx.estimator, ctx.mode);
        counts += c;
        parts.equ = l.value();
        total = total + l * w.equ;
    }
    if w.g != 0.0 {
        let (l, c) = init_loss(tape, params, d, &ctx.data.initial);
        counts += c;
        parts.g = l.value();
        total = total + l * w.g;
    }
    if w.u != 0.0 {
        let (l, c) = data_loss(tape, params, d, &ctx.data.observations);
        counts += c;
        parts.u = l.value();
        total = total + l * w.u;
    }
    parts.total = total.value();
    RecordedLoss { total, parts, counts }
}

/// Loss parts, gradient over the whole parameter vector, and counters.
pub fn loss_and_gradient(params: &ParamVector, ctx: &LossContext<'_>, batch: &Batch) -> (LossParts, Vec<f64>, EvalCounts) {
    let tape = Tape::new();
    let rec = total_loss(&tape, params, ctx, batch);
    let grad = tape.gradient(rec.total, Some(params));
    (rec.parts, grad.params, rec.counts)
}

/// First and second moments of Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub steps: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            steps: 0,
        }
    }
}

pub const ALPHA_BOUNDS: (f64, f64) = (0.05, 1.95);
pub const GAMMA_BOUNDS: (f64, f64) = (0.05, 0.95);

/// One bias-corrected Adam update followed by clamping of α and γ.
///
/// A non-finite gradient leaves `params` and `state` untouched.
pub fn adam_step(
    params: &mut ParamVector,
    state: &mut AdamState,
    grads: &[f64],
    lr: f64,
    cfg: &TrainConfig,
) -> Result<()> {
    assert_eq!(grads.len(), params.len(), "gradient must match the parameter vector");
    if let Some(k) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numerical {
            epoch: state.steps as usize,
            message: format!("non-finite gradient in slot {k}"),
        });
    }
    state.steps += 1;
    let t = state.steps as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (k, &g) in grads.iter().enumerate() {
        state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * g;
        state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * g * g;
        let mh = state.m[k] / c1;
        let vh = state.v[k] / c2;
        params.values[k] -= lr * mh / (vh.sqrt() + cfg.adam_eps);
    }
    if let Some(a) = params.pde_value(PdeParam::Alpha) {
        params.set_pde(PdeParam::Alpha, a.clamp(ALPHA_BOUNDS.0, ALPHA_BOUNDS.1));
    }
    if let Some(g) = params.pde_value(PdeParam::Gamma) {
        params.set_pde(PdeParam::Gamma, g.clamp(GAMMA_BOUNDS.0, GAMMA_BOUNDS.1));
    }
    Ok(())
}

/// `‖pred - exact‖ / ‖exact‖` over matching samples.
pub fn relative_l2(pred: &[f64], exact: &[f64]) -> Result<f64> {
    assert_eq!(pred.len(), exact.len(), "one prediction per exact value");
    let num: f64 = pred.iter().zip(exact).map(|(p, e)| (p - e) * (p - e)).sum();
    let den: f64 = exact.iter().map(|e| e * e).sum();
    if den == 0.0 {
        return domain("exact solution has zero norm on the test set");
    }
    Ok((num / den).sqrt())
}

/// Relative L2 error of the surrogate over `n` seeded test points.
pub fn solution_error(spec: &ProblemSpec, params: &ParamVector, n: usize, root: &RngKey) -> Result<Option<f64>> {
    let inputs = spec.test_inputs(n, root);
    if inputs.is_empty() {
        return Ok(None);
    }
    let exact: Vec<f64> = inputs.iter().map(|r| spec.exact(r).expect("test inputs imply an exact solution")).collect();
    let pred = Ansatz::new(params, spec.dim()).eval_rows(&inputs);
    relative_l2(&pred, &exact).map(Some)
}

/// One row of the loss trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub epoch: usize,
    pub parts: LossParts,
    pub lr: f64,
    /// Current coefficient values in [`coefficient_names`] order.
    pub coeffs: Vec<f64>,
}

/// Names of the operator coefficients traced for `spec`.
pub fn coefficient_names(spec: &ProblemSpec) -> Vec<String> {
    let c = spec.true_coefficients();
    let mut names = vec!["alpha".to_string()];
    if c.gamma.is_some() {
        names.push("gamma".into());
    }
    names.push("c".into());
    if let Some(v) = &c.v {
        names.extend((0..v.len()).map(|k| PdeParam::Velocity(k).name()));
    }
    names
}

fn coefficient_values(c: &PdeCoefficients<f64>) -> Vec<f64> {
    let mut out = vec![c.alpha];
    out.extend(c.gamma);
    out.push(c.c);
    if let Some(v) = &c.v {
        out.extend_from_slice(v);
    }
    out
}

/// Optimizer state and histories of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: ParamVector,
    pub adam: AdamState,
    pub epoch: usize,
    pub root: RngKey,
    pub loss_trace: Vec<TraceRow>,
    /// `(epoch, coefficients)` after every update of an inverse run,
    /// starting with the initial guess at epoch 0.
    pub param_trace: Vec<(usize, Vec<f64>)>,
    pub counts: EvalCounts,
}

impl TrainState {
    pub fn new(spec: &ProblemSpec, cfg: &TrainConfig) -> Self {
        let root = RngKey::new(cfg.seed);
        let params = spec.init_params(&root);
        Self::from_params(spec, params, root)
    }

    /// Fresh optimizer around existing parameters.
    pub fn from_params(spec: &ProblemSpec, params: ParamVector, root: RngKey) -> Self {
        let mut param_trace = Vec::new();
        if !spec.trainable().is_empty() {
            param_trace.push((0, coefficient_values(&spec.current_coefficients(&params))));
        }
        Self {
            adam: AdamState::new(params.len()),
            params,
            epoch: 0,
            root,
            loss_trace: Vec::new(),
            param_trace,
            counts: EvalCounts::default(),
        }
    }
}

/// Outcome of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: usize,
    pub final_loss: Option<LossParts>,
    pub relative_l2: Option<f64>,
    pub coefficients: Vec<f64>,
    pub counts: EvalCounts,
}

/// Runs the optimisation loop on `state` until `cfg.epochs`.
///
/// On a non-finite loss or gradient the error is returned and `state`
/// still holds the last parameters that produced finite values.
pub fn train(spec: &ProblemSpec, cfg: &TrainConfig, state: &mut TrainState) -> Result<TrainReport> {
    cfg.validate()?;
    spec.validate()?;
    let data = Dataset::for_problem(spec, &state.root)?;
    let ctx = LossContext {
        spec,
        data: &data,
        estimator: &cfg.estimator,
        mode: cfg.mode,
        weights: cfg.weights,
    };
    let inverse = !spec.trainable().is_empty();
    let mut last = None;
    // parameters and optimizer state that produced the previous finite loss
    let mut last_good: Option<(ParamVector, AdamState)> = None;
    while state.epoch < cfg.epochs {
        let epoch = state.epoch;
        let batch = Batch::draw(spec, cfg.batch_size, cfg.estimator.m, &state.root, epoch)?;
        let (parts, grad, counts) = loss_and_gradient(&state.params, &ctx, &batch);
        if !parts.total.is_finite() {
            if let Some((p, a)) = last_good {
                state.params = p;
                state.adam = a;
            }
            return Err(Error::Numerical {
                epoch,
                message: format!("non-finite loss {}", parts.total),
            });
        }
        let lr = cfg.lr_at(epoch);
        if epoch % cfg.trace_every == 0 || epoch + 1 == cfg.epochs {
            state.loss_trace.push(TraceRow {
                epoch,
                parts,
                lr,
                coeffs: coefficient_values(&spec.current_coefficients(&state.params)),
            });
        }
        last_good = Some((state.params.clone(), state.adam.clone()));
        adam_step(&mut state.params, &mut state.adam, &grad, lr, cfg).map_err(|e| match e {
            Error::Numerical { message, .. } => Error::Numerical { epoch, message },
            other => other,
        })?;
        state.counts += counts;
        state.epoch += 1;
        if inverse {
            state
                .param_trace
                .push((state.epoch, coefficient_values(&spec.current_coefficients(&state.params))));
        }
        last = Some(parts);
    }
    Ok(TrainReport {
        epochs: state.epoch,
        final_loss: last,
        relative_l2: solution_error(spec, &state.params, 1000, &state.root)?,
        coefficients: coefficient_values(&spec.current_coefficients(&state.params)),
        counts: state.counts,
    })
}
