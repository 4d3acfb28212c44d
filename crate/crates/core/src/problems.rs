//! Problem families on the unit ball, the boundary-enforcing ansatz and the
//! generation of residual, initial and sensor points.

use crate::autodiff::{Real, Tape, Var};
use crate::error::{domain, Result};
use crate::estimator::{residual_estimate, EstimatorConfig, Field, PdeCoefficients, ResidualPoint, SampleGroup};
use crate::net::{self, init_params, NetworkSpec, ParamVector, PdeParam};
use crate::oracle::{forcing_ade_profile, forcing_laplacian, Profile};
use crate::rng::{domain as tags, RngKey};
use crate::sampling::sample_unit_ball;

/// Forward advection-diffusion setup with solution `profile(x) e^{-t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdeSetup {
    pub d: usize,
    pub coeffs: PdeCoefficients<f64>,
    pub horizon: f64,
    pub profile: Profile,
}

impl AdeSetup {
    /// `α = 1.5, γ = 0.5, c = 0.1, v = (1, 0, ...)`, `T = 1`.
    pub fn standard(d: usize) -> Self {
        let mut v = vec![0.0; d];
        v[0] = 1.0;
        Self {
            d,
            coeffs: PdeCoefficients {
                alpha: 1.5,
                gamma: Some(0.5),
                c: 0.1,
                v: Some(v),
                mu: 0.0,
            },
            horizon: 1.0,
            profile: Profile::Fractional,
        }
    }
}

/// Unknown-coefficient settings for inverse runs.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseSetup {
    pub sensors: usize,
    pub alpha0: f64,
    pub gamma0: f64,
    pub c0: f64,
    /// Initial velocity components are drawn from `U[0, v0_max]`.
    pub v0_max: f64,
}

impl InverseSetup {
    pub fn standard(d: usize) -> Self {
        Self {
            sensors: default_sensor_count(d),
            alpha0: 1.7,
            gamma0: 0.9,
            c0: 0.5,
            v0_max: 0.1,
        }
    }
}

/// 20, 80 and 100 sensors for d = 1, 3, 5; `20 d` elsewhere.
pub fn default_sensor_count(d: usize) -> usize {
    match d {
        1 => 20,
        3 => 80,
        5 => 100,
        _ => 20 * d,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    ForwardLaplacian { d: usize, alpha: f64 },
    ForwardAde(AdeSetup),
    /// `truth` holds the hidden coefficients used for data and forcing.
    InverseAde { truth: AdeSetup, inverse: InverseSetup },
    ParametricDiffusion {
        d: usize,
        alpha_range: (f64, f64),
        mu_range: (f64, f64),
        alpha0: f64,
    },
}

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::ForwardLaplacian { .. } => "forward-laplacian",
            Family::ForwardAde(_) => "forward-ade",
            Family::InverseAde { .. } => "inverse-ade",
            Family::ParametricDiffusion { .. } => "parametric",
        }
    }
}

/// One input row with a known target value.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    pub input: Vec<f64>,
    pub value: f64,
}

/// A residual location with its forcing value.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainPoint {
    pub point: ResidualPoint,
    pub forcing: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub family: Family,
    pub network: NetworkSpec,
    /// Size of the fixed initial-condition set (time-dependent families).
    pub initial_points: usize,
}

impl ProblemSpec {
    /// Standard `[64; 4]` tanh body for the family.
    pub fn new(family: Family) -> Result<Self> {
        let mut spec = Self {
            network: NetworkSpec::standard(1),
            family,
            initial_points: 128,
        };
        spec.network = NetworkSpec::standard(spec.input_dim());
        spec.validate()?;
        Ok(spec)
    }

    pub fn forward_laplacian(d: usize, alpha: f64) -> Result<Self> {
        Self::new(Family::ForwardLaplacian { d, alpha })
    }

    pub fn inverse_ade(d: usize) -> Result<Self> {
        Self::new(Family::InverseAde {
            truth: AdeSetup::standard(d),
            inverse: InverseSetup::standard(d),
        })
    }

    pub fn parametric(d: usize) -> Result<Self> {
        Self::new(Family::ParametricDiffusion {
            d,
            alpha_range: (0.5, 1.5),
            mu_range: (-0.5, 0.5),
            alpha0: 1.0,
        })
    }

    pub fn with_hidden(mut self, hidden: Vec<usize>) -> Self {
        self.network = NetworkSpec::new(self.input_dim(), hidden);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return domain("dimension must be at least 1");
        }
        match &self.family {
            Family::ForwardLaplacian { alpha, .. } => PdeCoefficients::laplacian(*alpha).validate()?,
            Family::ForwardAde(s) | Family::InverseAde { truth: s, .. } => {
                s.coeffs.validate()?;
                if s.coeffs.gamma.is_none() {
                    return domain("advection-diffusion problems need gamma");
                }
                if s.coeffs.v.as_ref().is_some_and(|v| v.len() != d) {
                    return domain(format!("velocity must have {d} components"));
                }
                if !(s.horizon > 0.0) {
                    return domain("time horizon must be positive");
                }
            }
            Family::ParametricDiffusion {
                alpha_range, alpha0, ..
            } => {
                if !(alpha_range.0 > 0.0 && alpha_range.1 < 2.0 && alpha_range.0 <= alpha_range.1) {
                    return domain(format!("alpha range {alpha_range:?} must lie in (0, 2)"));
                }
                PdeCoefficients::laplacian(*alpha0).validate()?;
            }
        }
        if let Family::InverseAde { inverse, .. } = &self.family {
            if inverse.sensors == 0 {
                return domain("inverse runs need at least one sensor");
            }
        }
        if self.network.input_dim != self.input_dim() {
            return domain(format!(
                "network input dimension {} does not match the problem ({})",
                self.network.input_dim,
                self.input_dim()
            ));
        }
        self.network.validate()
    }

    pub fn dim(&self) -> usize {
        match &self.family {
            Family::ForwardLaplacian { d, .. } | Family::ParametricDiffusion { d, .. } => *d,
            Family::ForwardAde(s) | Family::InverseAde { truth: s, .. } => s.d,
        }
    }

    /// `T` for time-dependent families.
    pub fn horizon(&self) -> Option<f64> {
        match &self.family {
            Family::ForwardAde(s) | Family::InverseAde { truth: s, .. } => Some(s.horizon),
            _ => None,
        }
    }

    pub fn input_dim(&self) -> usize {
        let extra = match self.family {
            Family::ParametricDiffusion { .. } => 2,
            _ => 0,
        };
        self.dim() + usize::from(self.horizon().is_some()) + extra
    }

    /// Coefficients used to generate forcing and data.
    pub fn true_coefficients(&self) -> PdeCoefficients<f64> {
        match &self.family {
            Family::ForwardLaplacian { alpha, .. } => PdeCoefficients::laplacian(*alpha),
            Family::ForwardAde(s) | Family::InverseAde { truth: s, .. } => s.coeffs.clone(),
            Family::ParametricDiffusion { alpha0, .. } => PdeCoefficients::laplacian(*alpha0),
        }
    }

    /// PDE parameters appended to the parameter vector.
    pub fn trainable(&self) -> Vec<PdeParam> {
        match &self.family {
            Family::InverseAde { truth, .. } => {
                let mut p = vec![PdeParam::Alpha, PdeParam::Gamma, PdeParam::Diffusion];
                p.extend((0..truth.d).map(PdeParam::Velocity));
                p
            }
            _ => Vec::new(),
        }
    }

    /// Glorot network plus initial guesses for trainable coefficients.
    pub fn init_params(&self, key: &RngKey) -> ParamVector {
        let params = init_params(&self.network, &key.child(tags::INIT));
        match &self.family {
            Family::InverseAde { truth, inverse } => {
                let mut s = key.child(tags::PDE_INIT).stream();
                let mut pde = vec![
                    (PdeParam::Alpha, inverse.alpha0),
                    (PdeParam::Gamma, inverse.gamma0),
                    (PdeParam::Diffusion, inverse.c0),
                ];
                for k in 0..truth.d {
                    pde.push((PdeParam::Velocity(k), s.uniform_in(0.0, inverse.v0_max)));
                }
                params.with_pde(&pde)
            }
            _ => params,
        }
    }

    /// Coefficients of the trained operator. Trainable ones come from
    /// `resolve`, the rest are constants lifted next to `like`.
    pub fn coefficients<R: Real>(&self, like: R, resolve: impl Fn(PdeParam) -> Option<R>) -> PdeCoefficients<R> {
        let truth = self.true_coefficients();
        let get = |p: PdeParam, fallback: f64| resolve(p).unwrap_or_else(|| like.lift(fallback));
        PdeCoefficients {
            alpha: get(PdeParam::Alpha, truth.alpha),
            gamma: truth.gamma.map(|g| get(PdeParam::Gamma, g)),
            c: get(PdeParam::Diffusion, truth.c),
            v: truth.v.as_ref().map(|v| {
                v.iter()
                    .enumerate()
                    .map(|(k, &vk)| get(PdeParam::Velocity(k), vk))
                    .collect()
            }),
            mu: like.lift(truth.mu),
        }
    }

    /// Current coefficient values held in `params`.
    pub fn current_coefficients(&self, params: &ParamVector) -> PdeCoefficients<f64> {
        self.coefficients(0.0, |p| params.pde_value(p))
    }

    /// Per-point coefficients: parametric points carry their own (α, μ).
    pub fn point_coefficients<R: Real>(&self, base: &PdeCoefficients<R>, point: &ResidualPoint) -> PdeCoefficients<R> {
        match self.family {
            Family::ParametricDiffusion { .. } => PdeCoefficients {
                alpha: base.alpha.lift(point.extra[0]),
                mu: base.alpha.lift(point.extra[1]),
                ..base.clone()
            },
            _ => base.clone(),
        }
    }

    fn forcing(&self, x: &[f64], t: Option<f64>) -> Result<f64> {
        Ok(match &self.family {
            Family::ForwardLaplacian { alpha, .. } => forcing_laplacian(x, *alpha),
            Family::ForwardAde(s) | Family::InverseAde { truth: s, .. } => {
                forcing_ade_profile(s.profile, x, t.expect("time-dependent point"), &s.coeffs)?
            }
            Family::ParametricDiffusion { alpha0, .. } => forcing_laplacian(x, *alpha0),
        })
    }

    /// `n` residual points, point `i` drawn from `key.child(i)`.
    ///
    /// `x` is uniform in the ball, `t` uniform in `(T·1e-4, T]`, and
    /// parametric points draw `α` and `μ` from their ranges.
    pub fn sample_batch(&self, n: usize, key: &RngKey) -> Result<Vec<TrainPoint>> {
        let d = self.dim();
        (0..n as u64)
            .map(|i| {
                let mut s = key.child(i).stream();
                let x = sample_unit_ball(d, &mut s);
                let t = self.horizon().map(|h| {
                    let t_min = 1e-4 * h;
                    t_min + (h - t_min) * s.uniform_open_closed()
                });
                let extra = match &self.family {
                    Family::ParametricDiffusion {
                        alpha_range, mu_range, ..
                    } => vec![
                        s.uniform_in(alpha_range.0, alpha_range.1),
                        s.uniform_in(mu_range.0, mu_range.1),
                    ],
                    _ => Vec::new(),
                };
                let forcing = self.forcing(&x, t)?;
                Ok(TrainPoint {
                    point: ResidualPoint { x, t, extra },
                    forcing,
                })
            })
            .collect()
    }

    /// Exact solution at a full input row, when one is known in closed form.
    pub fn exact(&self, input: &[f64]) -> Option<f64> {
        let d = self.dim();
        let x = &input[..d];
        match &self.family {
            Family::ForwardLaplacian { alpha, .. } => Some(Profile::Fractional.value(x, *alpha)),
            Family::ForwardAde(s) | Family::InverseAde { truth: s, .. } => {
                Some(s.profile.value(x, s.coeffs.alpha) * (-input[d]).exp())
            }
            Family::ParametricDiffusion { .. } => None,
        }
    }

    /// `N_g` initial-condition points `(x, 0)` with targets `u(x, 0)`.
    pub fn initial_data(&self, key: &RngKey) -> Vec<DataPoint> {
        if self.horizon().is_none() {
            return Vec::new();
        }
        let d = self.dim();
        let mut s = key.child(tags::INITIAL_SET).stream();
        (0..self.initial_points)
            .map(|_| {
                let mut input = sample_unit_ball(d, &mut s);
                input.push(0.0);
                let value = self.exact(&input).expect("time-dependent families have exact solutions");
                DataPoint { input, value }
            })
            .collect()
    }

    /// Fixed test rows for the relative L2 error; empty when no exact
    /// solution is known.
    pub fn test_inputs(&self, n: usize, key: &RngKey) -> Vec<Vec<f64>> {
        if matches!(self.family, Family::ParametricDiffusion { .. }) {
            return Vec::new();
        }
        let d = self.dim();
        let mut s = key.child(tags::TEST_SET).stream();
        (0..n)
            .map(|_| {
                let mut input = sample_unit_ball(d, &mut s);
                if let Some(h) = self.horizon() {
                    input.push(h * s.uniform_open_closed());
                }
                input
            })
            .collect()
    }
}

/// Noiseless sensors at `t = T` for inverse runs.
pub fn make_sensor_data(spec: &ProblemSpec, key: &RngKey) -> Result<Vec<DataPoint>> {
    let (truth, inverse) = match &spec.family {
        Family::InverseAde { truth, inverse } => (truth, inverse),
        _ => return domain("sensor data is only defined for inverse problems"),
    };
    let mut s = key.child(tags::SENSORS).stream();
    Ok((0..inverse.sensors)
        .map(|_| {
            let mut input = sample_unit_ball(truth.d, &mut s);
            input.push(truth.horizon);
            let value = spec.exact(&input).expect("inverse problems have exact solutions");
            DataPoint { input, value }
        })
        .collect())
}

fn norm2<R: Real>(x: &[R], like: R) -> R {
    x.iter().fold(like.lift(0.0), |acc, &v| acc + v * v)
}

/// `u = relu(1 - |x|²) · ũ(x, ...)` over a plain parameter vector.
///
/// `d` is the number of leading spatial slots of each input row.
#[derive(Debug, Clone, Copy)]
pub struct Ansatz<'p> {
    pub params: &'p ParamVector,
    pub d: usize,
}

impl<'p> Ansatz<'p> {
    pub fn new(params: &'p ParamVector, d: usize) -> Self {
        Self { params, d }
    }

    fn multiplier(&self, input: &[f64]) -> f64 {
        1.0 - norm2(&input[..self.d], 0.0)
    }

    /// Batched evaluation; rows outside the ball never reach the network.
    pub fn eval_rows(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; rows.len()];
        let mut flat = Vec::new();
        let mut inside = Vec::new();
        for (k, r) in rows.iter().enumerate() {
            if self.multiplier(r) > 0.0 {
                flat.extend_from_slice(r);
                inside.push(k);
            }
        }
        if !inside.is_empty() {
            let fwd = net::forward_batch(self.params, &flat, None);
            for (&k, body) in inside.iter().zip(&fwd.outputs) {
                out[k] = self.multiplier(&rows[k]) * body;
            }
        }
        out
    }
}

impl Field for Ansatz<'_> {
    fn eval(&self, input: &[f64]) -> f64 {
        let m = self.multiplier(input);
        if m <= 0.0 {
            return 0.0;
        }
        m * net::forward(self.params, input)
    }

    fn directional(&self, input: &[f64], v: &[f64]) -> f64 {
        let m = self.multiplier(input);
        if m <= 0.0 {
            return 0.0;
        }
        let xv: f64 = input[..self.d].iter().zip(v).map(|(a, b)| a * b).sum();
        let mut dir = v.to_vec();
        dir.resize(input.len(), 0.0);
        let fwd = net::forward_batch(self.params, input, Some(&dir));
        let body = fwd.outputs[0];
        let tangent = fwd.tangents.expect("tangent requested")[0];
        -2.0 * xv * body + m * tangent
    }
}

/// Recorded ansatz evaluation of `rows`. With `directions`, also returns
/// `v · ∇_x u` for every row (`v` covers the spatial slots only).
///
/// Rows outside the ball are exact zeros and are left out of the network
/// batch; the returned count is the number of rows sent to the network.
pub fn record_ansatz<'t>(
    tape: &'t Tape,
    params: &ParamVector,
    d: usize,
    rows: &[Vec<Var<'t>>],
    directions: Option<&[Vec<Var<'t>>]>,
) -> (Vec<Var<'t>>, Option<Vec<Var<'t>>>, usize) {
    let zero = tape.constant(0.0);
    let mut values = vec![zero; rows.len()];
    let mut derivs = directions.map(|_| vec![zero; rows.len()]);
    let mut inside = Vec::new();
    let mut mults = Vec::new();
    for (k, r) in rows.iter().enumerate() {
        let m = norm2(&r[..d], zero).rsub(1.0);
        if m.value() > 0.0 {
            inside.push(k);
            mults.push(m);
        }
    }
    if inside.is_empty() {
        return (values, derivs, 0);
    }
    let in_rows: Vec<Vec<Var<'t>>> = inside.iter().map(|&k| rows[k].clone()).collect();
    let in_dim = rows[0].len();
    let padded: Option<Vec<Vec<Var<'t>>>> = directions.map(|ds| {
        inside
            .iter()
            .map(|&k| {
                let mut v = ds[k].clone();
                v.resize(in_dim, zero);
                v
            })
            .collect()
    });
    let out = tape.eval_network(params, &in_rows, padded.as_deref());
    for (i, &k) in inside.iter().enumerate() {
        values[k] = mults[i] * out.values[i];
    }
    if let (Some(derivs), Some(ds), Some(tans)) = (derivs.as_mut(), directions, out.tangents.as_ref()) {
        for (i, &k) in inside.iter().enumerate() {
            let xv = rows[k][..d]
                .iter()
                .zip(&ds[k])
                .fold(zero, |acc, (&a, &b)| acc + a * b);
            derivs[k] = xv * out.values[i] * -2.0 + mults[i] * tans[i];
        }
    }
    (values, derivs, inside.len())
}

/// Residual estimate of `(-Δ)^{α/2} u + μ u - f(x; α₀)` at a parametric
/// point `x ++ [α, μ]`, with radii derived at the point's own α.
pub fn parametric_residual(
    u: &impl Field,
    point: &ResidualPoint,
    alpha0: f64,
    cfg: &EstimatorConfig,
    g: &SampleGroup,
) -> Result<f64> {
    if point.extra.len() != 2 {
        return domain("parametric points carry (alpha, mu)");
    }
    let coeffs = PdeCoefficients {
        alpha: point.extra[0],
        gamma: None,
        c: 1.0,
        v: None,
        mu: point.extra[1],
    };
    residual_estimate(u, point, &coeffs, forcing_laplacian(&point.x, alpha0), cfg, g)
}
