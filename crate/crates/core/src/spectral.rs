//! Radial spectral solver for `(-Δ)^{α/2} u + μ u = f(|x|)` on the unit ball
//! with zero exterior data.
//!
//! The functions `(1 - r²)^{α/2} P_n^{(α/2, d/2-1)}(2r² - 1)` are mapped by
//! the fractional Laplacian to `λ_n P_n^{(α/2, d/2-1)}(2r² - 1)`, so with the
//! ansatz `u = (1 - r²)^{α/2} Σ c_n P_n` the equation becomes a small dense
//! system after testing against `P_k r^{d-1}`. Used as the analytic family
//! behind the parametric diffusion problem.
//!
//! For `μ ≠ 0` the smooth factor of the solution is itself only finitely
//! smooth at the boundary, so convergence in the mode count is algebraic.

use nalgebra::{DMatrix, DVector};

use crate::error::{domain, Error, Result};
use crate::quadrature::gauss_legendre;
use crate::special::ln_gamma_abs;

/// `P_0 .. P_{n-1}` of the Jacobi family `(a, b)` at `z`.
pub fn jacobi_all(n: usize, a: f64, b: f64, z: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(n);
    if n == 0 {
        return p;
    }
    p.push(1.0);
    if n == 1 {
        return p;
    }
    p.push((a + 1.0) + (a + b + 2.0) * (z - 1.0) / 2.0);
    for k in 2..n {
        let kf = k as f64;
        let s = 2.0 * kf + a + b;
        let c1 = 2.0 * kf * (kf + a + b) * (s - 2.0);
        let c2 = (s - 1.0) * (s * (s - 2.0) * z + a * a - b * b);
        let c3 = 2.0 * (kf + a - 1.0) * (kf + b - 1.0) * s;
        p.push((c2 * p[k - 1] - c3 * p[k - 2]) / c1);
    }
    p
}

/// `λ_n = 2^α Γ(α/2 + n + 1) Γ((d+α)/2 + n) / (n! Γ(d/2 + n))`
pub fn eigenvalue(d: usize, alpha: f64, n: usize) -> Result<f64> {
    let (df, nf) = (d as f64, n as f64);
    let ln = alpha * std::f64::consts::LN_2 + ln_gamma_abs(alpha / 2.0 + nf + 1.0)? + ln_gamma_abs((df + alpha) / 2.0 + nf)?
        - ln_gamma_abs(nf + 1.0)?
        - ln_gamma_abs(df / 2.0 + nf)?;
    Ok(ln.exp())
}

/// `∫_0^1 (1-r²)^{α/2} P_n(2r²-1)² r^{d-1} dr`
fn weighted_norm(d: usize, alpha: f64, n: usize) -> Result<f64> {
    let (a, b, nf) = (alpha / 2.0, d as f64 / 2.0 - 1.0, n as f64);
    let ln_h = (a + b + 1.0) * std::f64::consts::LN_2 - (2.0 * nf + a + b + 1.0).ln()
        + ln_gamma_abs(nf + a + 1.0)?
        + ln_gamma_abs(nf + b + 1.0)?
        - ln_gamma_abs(nf + a + b + 1.0)?
        - ln_gamma_abs(nf + 1.0)?;
    Ok(ln_h.exp() * 2f64.powf(-a - d as f64 / 2.0 - 1.0))
}

/// Solution coefficients for one `(d, α, μ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSolution {
    pub d: usize,
    pub alpha: f64,
    pub coeffs: Vec<f64>,
}

impl RadialSolution {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        if r2 >= 1.0 {
            return 0.0;
        }
        let p = jacobi_all(self.coeffs.len(), self.alpha / 2.0, self.d as f64 / 2.0 - 1.0, 2.0 * r2 - 1.0);
        let s: f64 = p.iter().zip(&self.coeffs).map(|(p, c)| p * c).sum();
        (1.0 - r2).powf(self.alpha / 2.0) * s
    }
}

/// Solve with `modes` basis functions; `rhs` is a function of the radius.
pub fn solve_radial(d: usize, alpha: f64, mu: f64, modes: usize, rhs: impl Fn(f64) -> f64) -> Result<RadialSolution> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return domain(format!("alpha must lie in (0, 2), got {alpha}"));
    }
    if d == 0 || modes == 0 {
        return domain("need d >= 1 and at least one mode");
    }
    let (a, b) = (alpha / 2.0, d as f64 / 2.0 - 1.0);
    // Gauss–Legendre in r is exact for the polynomial Gram entries.
    let nq = 2 * modes + d + 8;
    let (zs, ws) = gauss_legendre(nq);
    let mut gram = DMatrix::<f64>::zeros(modes, modes);
    let mut load = DVector::<f64>::zeros(modes);
    for (z, w) in zs.iter().zip(&ws) {
        let r = 0.5 * (z + 1.0);
        let wr = 0.5 * w * r.powi(d as i32 - 1);
        let p = jacobi_all(modes, a, b, 2.0 * r * r - 1.0);
        let f = rhs(r);
        for k in 0..modes {
            load[k] += wr * f * p[k];
            for n in 0..modes {
                gram[(k, n)] += wr * p[k] * p[n];
            }
        }
    }
    let mut system = DMatrix::<f64>::zeros(modes, modes);
    for n in 0..modes {
        let lam = eigenvalue(d, alpha, n)?;
        for k in 0..modes {
            system[(k, n)] = gram[(k, n)] * lam;
        }
        system[(n, n)] += mu * weighted_norm(d, alpha, n)?;
    }
    let coeffs = system.lu().solve(&load).ok_or_else(|| Error::Numerical {
        epoch: 0,
        message: format!("singular spectral system for alpha={alpha}, mu={mu}"),
    })?;
    Ok(RadialSolution {
        d,
        alpha,
        coeffs: coeffs.iter().copied().collect(),
    })
}
