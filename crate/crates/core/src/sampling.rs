//! Instrumental-variable samplers: directions on the sphere, Beta(k, 1)
//! radii and time fractions, and points in the unit ball.

use crate::error::{domain, Result};
use crate::rng::Stream;

/// Uniform direction on `S^{d-1}` from normalised Gaussian draws.
pub fn sample_unit_sphere(d: usize, stream: &mut Stream) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| stream.normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// A Beta(k, 1) draw together with the uniform it was made from.
///
/// Keeping the uniform lets callers re-express the draw as `U^{1/k}` for a
/// different (or differentiable) `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaPowerDraw {
    pub uniform: f64,
    pub value: f64,
}

impl BetaPowerDraw {
    pub fn from_uniform(k: f64, uniform: f64) -> Result<Self> {
        if !(k > 0.0) {
            return domain(format!("Beta(k, 1) needs k > 0, got {k}"));
        }
        Ok(Self {
            uniform,
            value: beta_power_value(uniform, k),
        })
    }
}

#[inline]
pub(crate) fn beta_power_value(uniform: f64, k: f64) -> f64 {
    if k == 1.0 {
        uniform
    } else {
        uniform.powf(1.0 / k)
    }
}

/// Inverse-CDF draw from Beta(k, 1): `U^{1/k}` with `U` uniform on `(0, 1]`.
pub fn sample_beta_power(k: f64, stream: &mut Stream) -> Result<BetaPowerDraw> {
    if !(k > 0.0) {
        return domain(format!("Beta(k, 1) needs k > 0, got {k}"));
    }
    BetaPowerDraw::from_uniform(k, stream.uniform_open_closed())
}

/// Uniform point in the closed unit ball, `ξ · V^{1/d}`.
pub fn sample_unit_ball(d: usize, stream: &mut Stream) -> Vec<f64> {
    let dir = sample_unit_sphere(d, stream);
    let radius = stream.uniform().powf(1.0 / d as f64);
    dir.into_iter().map(|x| x * radius).collect()
}
