//! Monte Carlo estimators of the fractional Laplacian, the Caputo derivative
//! and the full residual operator.
//!
//! Every estimator is split in two phases. [`group_queries`] lists the input
//! rows at which the field must be evaluated for one residual point and one
//! [`SampleGroup`]; [`sample_residuals`] combines the evaluated values into
//! one residual estimate per sample. Both are generic over [`Real`], so the
//! same code serves plain `f64` fields and recorded training passes where
//! the radii depend on trainable α and γ.

use crate::autodiff::Real;
use crate::error::{domain, Result};
use crate::rng::Stream;
use crate::sampling::sample_unit_sphere;
use crate::special::sphere_area;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// Samples per group.
    pub m: usize,
    /// Radius splitting the integral into inner ball and outer region.
    pub r0: f64,
    /// Lower clamp on inner radii.
    pub eps: f64,
    /// Lower clamp on Caputo step lengths.
    pub eps_t: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            m: 20,
            r0: 0.2,
            eps: 1e-3,
            eps_t: 1e-6,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return domain("estimator needs m >= 1");
        }
        if !(self.eps > 0.0 && self.eps < self.r0) {
            return domain(format!("need 0 < eps < r0, got eps={} r0={}", self.eps, self.r0));
        }
        if !(self.eps_t > 0.0) {
            return domain("eps_t must be positive");
        }
        Ok(())
    }
}

/// Raw uniforms and directions for `m` samples.
///
/// Radii and time fractions are not stored; they are re-derived from the
/// uniforms for whatever α and γ are current.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGroup {
    pub xi: Vec<Vec<f64>>,
    pub u_ri: Vec<f64>,
    pub u_ro: Vec<f64>,
    pub u_tau: Vec<f64>,
}

impl SampleGroup {
    pub fn draw(d: usize, m: usize, stream: &mut Stream) -> Self {
        let mut g = SampleGroup {
            xi: Vec::with_capacity(m),
            u_ri: Vec::with_capacity(m),
            u_ro: Vec::with_capacity(m),
            u_tau: Vec::with_capacity(m),
        };
        for _ in 0..m {
            g.xi.push(sample_unit_sphere(d, stream));
            g.u_ri.push(stream.uniform_open_closed());
            g.u_ro.push(stream.uniform_open_closed());
            g.u_tau.push(stream.uniform_open_closed());
        }
        g
    }

    pub fn m(&self) -> usize {
        self.xi.len()
    }

    pub fn dim(&self) -> usize {
        self.xi.first().map_or(0, Vec::len)
    }

    /// The `j`-th sample as a group of one.
    pub fn single(&self, j: usize) -> SampleGroup {
        SampleGroup {
            xi: vec![self.xi[j].clone()],
            u_ri: vec![self.u_ri[j]],
            u_ro: vec![self.u_ro[j]],
            u_tau: vec![self.u_tau[j]],
        }
    }

    /// `rI_j = r0 · U^{1/(2-α)}`
    pub fn inner_radii<R: Real>(&self, alpha: R, r0: f64) -> Vec<R> {
        let inv = alpha.rsub(2.0).recip();
        self.u_ri.iter().map(|&u| (inv * u.ln()).exp() * r0).collect()
    }

    /// `rO_j = r0 · U^{-1/α}`
    pub fn outer_radii<R: Real>(&self, alpha: R, r0: f64) -> Vec<R> {
        let inv = alpha.recip();
        self.u_ro.iter().map(|&u| (inv * (-u.ln())).exp() * r0).collect()
    }

    /// `τ_j = U^{1/(1-γ)}`
    pub fn time_fractions<R: Real>(&self, gamma: R) -> Vec<R> {
        let inv = gamma.rsub(1.0).recip();
        self.u_tau.iter().map(|&u| (inv * u.ln()).exp()).collect()
    }
}

/// Coefficients of `D_t^γ u + c (-Δ)^{α/2} u + v·∇u + μ u = f`.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeCoefficients<R> {
    pub alpha: R,
    pub gamma: Option<R>,
    pub c: R,
    pub v: Option<Vec<R>>,
    pub mu: R,
}

impl PdeCoefficients<f64> {
    /// Pure fractional Laplacian, `c = 1`.
    pub fn laplacian(alpha: f64) -> Self {
        Self {
            alpha,
            gamma: None,
            c: 1.0,
            v: None,
            mu: 0.0,
        }
    }
}

impl<R: Real> PdeCoefficients<R> {
    pub fn validate(&self) -> Result<()> {
        let a = self.alpha.value();
        if !(a > 0.0 && a < 2.0) {
            return domain(format!("alpha must lie in (0, 2), got {a}"));
        }
        if let Some(g) = self.gamma {
            let g = g.value();
            if !(g > 0.0 && g < 1.0) {
                return domain(format!("gamma must lie in (0, 1), got {g}"));
            }
        }
        Ok(())
    }
}

/// A residual location. The network input row is `x ++ [t] ++ extra`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPoint {
    pub x: Vec<f64>,
    pub t: Option<f64>,
    /// Additional network inputs such as (α, μ) for parametric surrogates.
    pub extra: Vec<f64>,
}

impl ResidualPoint {
    pub fn spatial(x: Vec<f64>) -> Self {
        Self {
            x,
            t: None,
            extra: Vec::new(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.x.len() + usize::from(self.t.is_some()) + self.extra.len()
    }

    fn row<R: Real>(&self, like: R, x: Option<&[R]>, t: Option<R>) -> Vec<R> {
        let mut row = Vec::with_capacity(self.input_dim());
        match x {
            Some(x) => row.extend_from_slice(x),
            None => row.extend(self.x.iter().map(|&v| like.lift(v))),
        }
        if let Some(t0) = self.t {
            row.push(t.unwrap_or_else(|| like.lift(t0)));
        }
        row.extend(self.extra.iter().map(|&v| like.lift(v)));
        row
    }

    pub fn center_row<R: Real>(&self, like: R) -> Vec<R> {
        self.row(like, None, None)
    }

    /// The point at time zero (time-dependent points only).
    pub fn initial_row<R: Real>(&self, like: R) -> Option<Vec<R>> {
        self.t.map(|_| self.row(like, None, Some(like.lift(0.0))))
    }
}

/// `C_{d,α} |S^{d-1}|` as a differentiable function of α.
pub fn laplacian_scale<R: Real>(d: usize, alpha: R) -> R {
    let df = d as f64;
    let ln_c = alpha * std::f64::consts::LN_2 + ((alpha + df) * 0.5).ln_gamma_abs()
        - (alpha * -0.5).ln_gamma_abs()
        - 0.5 * df * std::f64::consts::PI.ln();
    ln_c.exp() * sphere_area(d)
}

/// Rows to evaluate for one point and one group, plus the derived radii.
#[derive(Debug, Clone)]
pub struct GroupQueries<R> {
    /// For each sample: `x - rε ξ`, `x + rε ξ`, `x - rO ξ`, `x + rO ξ`;
    /// then, for time-dependent points, one `(x, t - h_j)` row per sample.
    pub rows: Vec<Vec<R>>,
    pub r_eps: Vec<R>,
    pub r_out: Vec<R>,
    /// Caputo step lengths `h_j = max(τ_j t, ε_t)`.
    pub steps: Vec<R>,
}

pub fn group_queries<R: Real>(
    point: &ResidualPoint,
    coeffs: &PdeCoefficients<R>,
    cfg: &EstimatorConfig,
    g: &SampleGroup,
) -> GroupQueries<R> {
    let alpha = coeffs.alpha;
    let d = point.x.len();
    let r_eps: Vec<R> = g
        .inner_radii(alpha, cfg.r0)
        .into_iter()
        .map(|r| r.max_const(cfg.eps))
        .collect();
    let r_out = g.outer_radii(alpha, cfg.r0);
    let m = g.m();
    let mut rows = Vec::with_capacity(4 * m + m);
    let shifted = |r: R, sign: f64, xi: &[f64]| -> Vec<R> {
        let x: Vec<R> = (0..d).map(|k| r * (sign * xi[k]) + point.x[k]).collect();
        point.row(alpha, Some(&x), None)
    };
    for j in 0..m {
        let xi = &g.xi[j];
        rows.push(shifted(r_eps[j], -1.0, xi));
        rows.push(shifted(r_eps[j], 1.0, xi));
        rows.push(shifted(r_out[j], -1.0, xi));
        rows.push(shifted(r_out[j], 1.0, xi));
    }
    let mut steps = Vec::new();
    if let (Some(gamma), Some(t)) = (coeffs.gamma, point.t) {
        steps = g
            .time_fractions(gamma)
            .into_iter()
            .map(|tau| (tau * t).max_const(cfg.eps_t))
            .collect();
        for h in &steps {
            rows.push(point.row(alpha, None, Some(-*h + t)));
        }
    }
    GroupQueries {
        rows,
        r_eps,
        r_out,
        steps,
    }
}

/// Field values shared by every sample of a residual point.
#[derive(Debug, Clone, Copy)]
pub struct SharedValues<R> {
    pub center: R,
    /// `u(x, 0)`, time-dependent points only.
    pub initial: Option<R>,
    /// `v · ∇u(x, t)`, when the problem has advection.
    pub advection: Option<R>,
}

/// Per-sample Laplacian terms `lap_j`; their mean is the m-sample estimate.
pub fn laplacian_terms<R: Real>(
    d: usize,
    alpha: R,
    cfg: &EstimatorConfig,
    q: &GroupQueries<R>,
    values: &[R],
    center: R,
) -> Vec<R> {
    let scale = laplacian_scale(d, alpha);
    let two_minus = alpha.rsub(2.0);
    let inner = scale * (two_minus * cfg.r0.ln()).exp() / (two_minus * 2.0);
    let outer = scale * (alpha * -cfg.r0.ln()).exp() / (alpha * 2.0);
    let c2 = center * 2.0;
    (0..q.r_eps.len())
        .map(|j| {
            let v = &values[4 * j..4 * j + 4];
            let r = q.r_eps[j];
            inner * (c2 - v[0] - v[1]) / (r * r) + outer * (c2 - v[2] - v[3])
        })
        .collect()
}

/// Per-sample Caputo terms, including the `1/Γ(1-γ)` prefactor.
pub fn caputo_terms<R: Real>(gamma: R, t: f64, q: &GroupQueries<R>, values: &[R], shared: &SharedValues<R>) -> Vec<R> {
    let m = q.steps.len();
    let past = &values[values.len() - m..];
    let one_minus = gamma.rsub(1.0);
    let pref = (-one_minus.ln_gamma_abs()).exp();
    let ln_t = t.ln();
    let a = gamma / one_minus * (one_minus * ln_t).exp();
    let u0 = shared.initial.expect("time-dependent point needs u(x, 0)");
    let jump = (shared.center - u0) / (gamma * ln_t).exp();
    (0..m)
        .map(|j| pref * (a * (shared.center - past[j]) / q.steps[j] + jump))
        .collect()
}

/// One residual estimate per sample, with the forcing value subtracted.
pub fn sample_residuals<R: Real>(
    point: &ResidualPoint,
    coeffs: &PdeCoefficients<R>,
    cfg: &EstimatorConfig,
    q: &GroupQueries<R>,
    values: &[R],
    shared: &SharedValues<R>,
    forcing: f64,
) -> Vec<R> {
    assert_eq!(values.len(), q.rows.len(), "one value per query row");
    let d = point.x.len();
    let lap = laplacian_terms(d, coeffs.alpha, cfg, q, values, shared.center);
    let mut local = shared.center * coeffs.mu - forcing;
    if let Some(adv) = shared.advection {
        local = local + adv;
    }
    let mut out: Vec<R> = lap.into_iter().map(|l| coeffs.c * l + local).collect();
    if let (Some(gamma), Some(t)) = (coeffs.gamma, point.t) {
        for (r, c) in out.iter_mut().zip(caputo_terms(gamma, t, q, values, shared)) {
            *r = *r + c;
        }
    }
    out
}

/// A scalar field evaluated on full network-style input rows.
pub trait Field {
    fn eval(&self, input: &[f64]) -> f64;

    /// `v · ∇_x` at `input`; `v` covers the spatial slots only. The default
    /// is a central difference with step `1e-6`.
    fn directional(&self, input: &[f64], v: &[f64]) -> f64 {
        let h = 1e-6;
        let mut plus = input.to_vec();
        let mut minus = input.to_vec();
        for (k, vk) in v.iter().enumerate() {
            plus[k] += h * vk;
            minus[k] -= h * vk;
        }
        (self.eval(&plus) - self.eval(&minus)) / (2.0 * h)
    }
}

impl<F: Fn(&[f64]) -> f64> Field for F {
    fn eval(&self, input: &[f64]) -> f64 {
        self(input)
    }
}

/// m-sample estimate of `(-Δ)^{α/2} u(x)`; makes exactly `4m + 1` calls to `u`.
pub fn mc_frac_laplacian(
    u: impl Fn(&[f64]) -> f64,
    x: &[f64],
    alpha: f64,
    cfg: &EstimatorConfig,
    g: &SampleGroup,
) -> Result<f64> {
    PdeCoefficients::laplacian(alpha).validate()?;
    let point = ResidualPoint::spatial(x.to_vec());
    let coeffs = PdeCoefficients::laplacian(alpha);
    let q = group_queries(&point, &coeffs, cfg, g);
    let center = u(x);
    let values: Vec<f64> = q.rows.iter().map(|r| u(r)).collect();
    let terms = laplacian_terms(x.len(), alpha, cfg, &q, &values, center);
    Ok(terms.iter().sum::<f64>() / terms.len() as f64)
}

/// m-sample estimate of the Caputo derivative of `u_t` at `t`.
pub fn mc_caputo(
    u_t: impl Fn(f64) -> f64,
    t: f64,
    gamma: f64,
    cfg: &EstimatorConfig,
    g: &SampleGroup,
) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("Caputo estimate needs t > 0, got {t}"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return domain(format!("gamma must lie in (0, 1), got {gamma}"));
    }
    let steps: Vec<f64> = g
        .time_fractions(gamma)
        .into_iter()
        .map(|tau| (tau * t).max(cfg.eps_t))
        .collect();
    let values: Vec<f64> = steps.iter().map(|h| u_t(t - h)).collect();
    let q = GroupQueries {
        rows: vec![Vec::new(); steps.len()],
        r_eps: Vec::new(),
        r_out: Vec::new(),
        steps,
    };
    let shared = SharedValues {
        center: u_t(t),
        initial: Some(u_t(0.0)),
        advection: None,
    };
    let terms = caputo_terms(gamma, t, &q, &values, &shared);
    Ok(terms.iter().sum::<f64>() / terms.len() as f64)
}

/// m-sample estimate of `L[u](x, t) - f` for an `f64` field.
pub fn residual_estimate(
    u: &impl Field,
    point: &ResidualPoint,
    coeffs: &PdeCoefficients<f64>,
    forcing: f64,
    cfg: &EstimatorConfig,
    g: &SampleGroup,
) -> Result<f64> {
    coeffs.validate()?;
    if let Some(t) = point.t {
        if !(t > 0.0) {
            return domain(format!("residual point needs t > 0, got {t}"));
        }
    }
    let q = group_queries(point, coeffs, cfg, g);
    let center_row = point.center_row(0.0);
    let shared = SharedValues {
        center: u.eval(&center_row),
        initial: point.initial_row(0.0).map(|r| u.eval(&r)),
        advection: coeffs.v.as_ref().map(|v| u.directional(&center_row, v)),
    };
    let values: Vec<f64> = q.rows.iter().map(|r| u.eval(r)).collect();
    let res = sample_residuals(point, coeffs, cfg, &q, &values, &shared, forcing);
    Ok(res.iter().sum::<f64>() / res.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use crate::rng::RngKey;
    use crate::special::FracConstants;
    use std::cell::Cell;

    fn bump(x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (-r2).exp()
    }

    #[test]
    fn constant_field_gives_exact_zero() {
        let cfg = EstimatorConfig::default();
        let mut s = RngKey::new(1).stream();
        for d in [1, 2, 5] {
            let g = SampleGroup::draw(d, cfg.m, &mut s);
            let x = vec![0.1; d];
            assert_eq!(mc_frac_laplacian(|_| 3.7, &x, 1.3, &cfg, &g).unwrap(), 0.0);
        }
        let g = SampleGroup::draw(1, cfg.m, &mut s);
        assert_eq!(mc_caputo(|_| -2.0, 0.4, 0.5, &cfg, &g).unwrap(), 0.0);
    }

    #[test]
    fn call_count_is_4m_plus_1() {
        let cfg = EstimatorConfig { m: 7, ..Default::default() };
        let g = SampleGroup::draw(3, 7, &mut RngKey::new(2).stream());
        let calls = Cell::new(0);
        let u = |x: &[f64]| {
            calls.set(calls.get() + 1);
            bump(x)
        };
        mc_frac_laplacian(u, &[0.1, 0.2, 0.3], 1.5, &cfg, &g).unwrap();
        assert_eq!(calls.get(), 4 * 7 + 1);
    }

    #[test]
    fn clamps_hold() {
        let cfg = EstimatorConfig::default();
        let mut s = RngKey::new(3).stream();
        for alpha in [0.1, 0.5, 1.0, 1.9] {
            let g = SampleGroup::draw(2, 200, &mut s);
            let point = ResidualPoint {
                x: vec![0.0, 0.3],
                t: Some(0.01),
                extra: Vec::new(),
            };
            let coeffs = PdeCoefficients {
                alpha,
                gamma: Some(0.7),
                c: 1.0,
                v: None,
                mu: 0.0,
            };
            let q = group_queries(&point, &coeffs, &cfg, &g);
            assert!(q.r_eps.iter().all(|&r| r >= cfg.eps && r <= cfg.r0));
            assert!(q.r_out.iter().all(|&r| r >= cfg.r0));
            assert!(q.steps.iter().all(|&h| h >= cfg.eps_t && h <= 0.01));
            assert_eq!(q.rows.len(), 5 * 200);
        }
    }

    #[test]
    fn radii_are_continuous_in_alpha() {
        let g = SampleGroup::draw(2, 50, &mut RngKey::new(4).stream());
        let base = g.inner_radii(1.2, 0.2);
        for delta in [1e-2, 1e-4, 1e-6, 1e-8] {
            let moved = g.inner_radii(1.2 + delta, 0.2);
            let dmax = base.iter().zip(&moved).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(dmax <= 10.0 * delta, "delta {delta}: {dmax}");
        }
    }

    #[test]
    fn scale_matches_constants() {
        for d in [1, 2, 3, 10] {
            for alpha in [0.3, 1.0, 1.5, 1.95] {
                let fc = FracConstants::new(d, alpha).unwrap();
                let s = laplacian_scale(d, alpha);
                assert!((s / fc.scale() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quadratic_inner_difference_is_exact() {
        // For u = |x|^2 the second difference is -2 r^2 for every direction,
        // so the inner-ball term is deterministic given the clamped radii.
        let cfg = EstimatorConfig { m: 5, ..Default::default() };
        let g = SampleGroup::draw(2, 5, &mut RngKey::new(5).stream());
        let point = ResidualPoint::spatial(vec![0.2, -0.1]);
        let coeffs = PdeCoefficients::laplacian(1.4);
        let q = group_queries(&point, &coeffs, &cfg, &g);
        let u = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let values: Vec<f64> = q.rows.iter().map(|r| u(r)).collect();
        for j in 0..5 {
            let (a, b) = (values[4 * j], values[4 * j + 1]);
            let r = q.r_eps[j];
            let second = 2.0 * u(&point.x) - a - b;
            assert!((second + 2.0 * r * r).abs() < 1e-14);
        }
    }

    #[test]
    fn alpha_gradient_matches_finite_difference() {
        let cfg = EstimatorConfig { m: 4, ..Default::default() };
        let g = SampleGroup::draw(2, 4, &mut RngKey::new(6).stream());
        let point = ResidualPoint {
            x: vec![0.3, 0.1],
            t: Some(0.6),
            extra: Vec::new(),
        };
        fn field<R: Real>(row: &[R]) -> R {
            // smooth, exterior-aware analytic field with time dependence
            let r2 = row[0] * row[0] + row[1] * row[1];
            let m = r2.rsub(1.0).relu();
            m * (row[2] * -1.0).exp() * (row[0] * 0.5 + 1.0)
        }
        fn estimate<R: Real>(alpha: R, gamma: R, point: &ResidualPoint, cfg: &EstimatorConfig, g: &SampleGroup) -> R {
            let coeffs = PdeCoefficients {
                alpha,
                gamma: Some(gamma),
                c: alpha.lift(0.7),
                v: None,
                mu: alpha.lift(0.0),
            };
            let q = group_queries(point, &coeffs, cfg, g);
            let values: Vec<R> = q.rows.iter().map(|r| field(r)).collect();
            let shared = SharedValues {
                center: field(&point.center_row(alpha)),
                initial: point.initial_row(alpha).map(|r| field(&r)),
                advection: None,
            };
            let res = sample_residuals(point, &coeffs, cfg, &q, &values, &shared, 0.25);
            res.iter().fold(alpha.lift(0.0), |a, &b| a + b * b)
        }
        let (a0, g0) = (1.3, 0.4);
        let tape = Tape::new();
        let a = tape.variable(a0);
        let gm = tape.variable(g0);
        let out = estimate(a, gm, &point, &cfg, &g);
        let grad = tape.gradient(out, None);
        let h = 1e-6;
        let fd_a = (estimate(a0 + h, g0, &point, &cfg, &g) - estimate(a0 - h, g0, &point, &cfg, &g)) / (2.0 * h);
        let fd_g = (estimate(a0, g0 + h, &point, &cfg, &g) - estimate(a0, g0 - h, &point, &cfg, &g)) / (2.0 * h);
        assert!(((grad.wrt(a) - fd_a) / fd_a).abs() < 1e-5, "{} vs {fd_a}", grad.wrt(a));
        assert!(((grad.wrt(gm) - fd_g) / fd_g).abs() < 1e-5, "{} vs {fd_g}", grad.wrt(gm));
        assert!((out.value() - estimate(a0, g0, &point, &cfg, &g)).abs() == 0.0);
    }

    #[test]
    fn zero_field_zero_forcing_gives_zero() {
        let cfg = EstimatorConfig::default();
        let g = SampleGroup::draw(3, cfg.m, &mut RngKey::new(7).stream());
        let point = ResidualPoint {
            x: vec![0.1, 0.2, 0.3],
            t: Some(0.5),
            extra: Vec::new(),
        };
        let coeffs = PdeCoefficients {
            alpha: 1.5,
            gamma: Some(0.5),
            c: 0.1,
            v: Some(vec![1.0, 0.0, 0.0]),
            mu: 0.0,
        };
        let zero = |_: &[f64]| 0.0;
        assert_eq!(residual_estimate(&zero, &point, &coeffs, 0.0, &cfg, &g).unwrap(), 0.0);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let cfg = EstimatorConfig::default();
        let g = SampleGroup::draw(1, cfg.m, &mut RngKey::new(8).stream());
        assert!(mc_frac_laplacian(bump, &[0.0], 2.0, &cfg, &g).is_err());
        assert!(mc_frac_laplacian(bump, &[0.0], 0.0, &cfg, &g).is_err());
        assert!(mc_caputo(|t| t, 0.0, 0.5, &cfg, &g).is_err());
        assert!(EstimatorConfig { eps: 0.3, ..cfg }.validate().is_err());
        assert!(EstimatorConfig { m: 0, ..cfg }.validate().is_err());
    }
}
