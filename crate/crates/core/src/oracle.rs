//! Deterministic reference values: quadrature for the fractional operators
//! in up to three dimensions, manufactured solutions and their forcings.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::estimator::PdeCoefficients;
use crate::quadrature::{gauss_legendre, integrate, QuadEstimate};
use crate::special::{frac_constants, gamma, ln_gamma_abs, mittag_leffler};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSpec {
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Upper end of the radial piece `[0, δ]` that is integrated from a
    /// series fit instead of by quadrature; shrunk near the boundary.
    pub near_zero: f64,
    /// Extra radial breakpoint.
    pub split: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            max_subdivisions: 1 << 14,
            near_zero: 1e-2,
            split: 0.2,
        }
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Radial integral `∫_0^∞ (2u(x) - u(x - rξ) - u(x + rξ)) r^{-1-α} dr`.
fn radial_integral(
    u: &impl Fn(&[f64]) -> f64,
    x: &[f64],
    ux: f64,
    xi: &[f64],
    alpha: f64,
    tol: f64,
    spec: &QuadSpec,
) -> Result<QuadEstimate> {
    let d = x.len();
    let mut buf_m = vec![0.0; d];
    let mut buf_p = vec![0.0; d];
    let mut g = |r: f64| -> f64 {
        for k in 0..d {
            buf_m[k] = x[k] - r * xi[k];
            buf_p[k] = x[k] + r * xi[k];
        }
        (2.0 * ux - u(&buf_m) - u(&buf_p)) * r.powf(-1.0 - alpha)
    };

    // Near zero the integrand is r^{1-α}(a + b r² + c r⁴ + ...); fit three
    // terms from samples at δ, δ/2, δ/4 and integrate them exactly.
    let dist = 1.0 - norm2(x).sqrt();
    let delta = spec.near_zero.min(dist / 4.0);
    let s: [f64; 3] = [delta * delta, delta * delta / 4.0, delta * delta / 16.0];
    let h: Vec<f64> = [delta, delta / 2.0, delta / 4.0]
        .iter()
        .map(|&r| g(r) * r.powf(alpha - 1.0))
        .collect();
    // quadratic through (s_i, h_i), coefficients of 1, s, s²
    let (a, b, c) = {
        let l = |i: usize, j: usize, k: usize| h[i] / ((s[i] - s[j]) * (s[i] - s[k]));
        let (l0, l1, l2) = (l(0, 1, 2), l(1, 0, 2), l(2, 0, 1));
        let c = l0 + l1 + l2;
        let b = -(l0 * (s[1] + s[2]) + l1 * (s[0] + s[2]) + l2 * (s[0] + s[1]));
        let a = l0 * s[1] * s[2] + l1 * s[0] * s[2] + l2 * s[0] * s[1];
        (a, b, c)
    };
    let near = a * delta.powf(2.0 - alpha) / (2.0 - alpha)
        + b * delta.powf(4.0 - alpha) / (4.0 - alpha)
        + c * delta.powf(6.0 - alpha) / (6.0 - alpha);

    let xd: f64 = x.iter().zip(xi).map(|(a, b)| a * b).sum();
    let q = (xd * xd + 1.0 - norm2(x)).max(0.0).sqrt();
    let (e1, e2) = ((-xd + q).min(xd + q), (-xd + q).max(xd + q));
    let mut breaks = vec![delta];
    for r in [spec.split, e1, e2] {
        if r > delta {
            breaks.push(r);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let pieces = (breaks.len() - 1).max(1) as f64;
    let mut total = QuadEstimate { value: near, error: 0.0 };
    for w in breaks.windows(2) {
        total = total + integrate(&mut g, w[0], w[1], tol / pieces, spec.max_subdivisions)?;
    }
    let rmax = *breaks.last().unwrap();
    total.value += 2.0 * ux * rmax.powf(-alpha) / alpha;
    Ok(total)
}

/// `(-Δ)^{α/2} u(x)` for a field supported in the closed unit ball, d ≤ 3.
pub fn quad_frac_laplacian(u: impl Fn(&[f64]) -> f64, x: &[f64], alpha: f64, spec: &QuadSpec) -> Result<QuadEstimate> {
    let d = x.len();
    if !(1..=3).contains(&d) {
        return domain(format!("quadrature oracle supports d <= 3, got {d}"));
    }
    if norm2(x) >= 1.0 {
        return domain("quadrature oracle needs an interior point");
    }
    let fc = frac_constants(d, alpha)?;
    let c = fc.c_d_alpha;
    let tol = spec.abs_tol / (5.0 * c * fc.sphere_area);
    let ux = u(x);
    let radial = |xi: &[f64]| radial_integral(&u, x, ux, xi, alpha, tol, spec);
    let not_converged = |estimate: f64| Error::Accuracy {
        message: "angular refinement did not converge".into(),
        estimate,
    };
    match d {
        1 => {
            let j = radial(&[1.0])?;
            Ok(QuadEstimate {
                value: c * j.value,
                error: c * j.error,
            })
        }
        2 => {
            // J(θ + π) = J(θ): trapezoid on [0, π), doubled until stable.
            let mut n = 8;
            let mut sum = 0.0;
            let mut rad_err: f64 = 0.0;
            for k in 0..n {
                let th = PI * k as f64 / n as f64;
                let j = radial(&[th.cos(), th.sin()])?;
                sum += j.value;
                rad_err = rad_err.max(j.error);
            }
            let mut prev = c * PI * sum / n as f64;
            while n < 1 << 14 {
                for k in 0..n {
                    let th = PI * (k as f64 + 0.5) / n as f64;
                    let j = radial(&[th.cos(), th.sin()])?;
                    sum += j.value;
                    rad_err = rad_err.max(j.error);
                }
                n *= 2;
                let cur = c * PI * sum / n as f64;
                if (cur - prev).abs() < spec.abs_tol {
                    return Ok(QuadEstimate {
                        value: cur,
                        error: (cur - prev).abs() + c * PI * rad_err,
                    });
                }
                prev = cur;
            }
            Err(not_converged(prev))
        }
        _ => {
            let level = |n: usize| -> Result<(f64, f64)> {
                let (zs, ws) = gauss_legendre(n);
                let nphi = 2 * n;
                let mut acc = 0.0;
                let mut err: f64 = 0.0;
                for (z, w) in zs.iter().zip(&ws) {
                    let s = (1.0 - z * z).sqrt();
                    for k in 0..nphi {
                        let ph = 2.0 * PI * k as f64 / nphi as f64;
                        let j = radial(&[s * ph.cos(), s * ph.sin(), *z])?;
                        acc += w * j.value;
                        err = err.max(j.error);
                    }
                }
                Ok((0.5 * c * acc * 2.0 * PI / nphi as f64, err))
            };
            let mut n = 8;
            let (mut prev, _) = level(n)?;
            while n < 256 {
                n *= 2;
                let (cur, err) = level(n)?;
                if (cur - prev).abs() < spec.abs_tol {
                    return Ok(QuadEstimate {
                        value: cur,
                        error: (cur - prev).abs() + 2.0 * PI * c * err,
                    });
                }
                prev = cur;
            }
            Err(not_converged(prev))
        }
    }
}

/// Caputo derivative `(1/Γ(1-γ)) ∫_0^t (t-s)^{-γ} u'(s) ds`.
///
/// `u'` is a central difference with step `1e-6`; the substitution
/// `σ = (t-s)^{1-γ}` removes the endpoint singularity.
pub fn quad_caputo(u_t: impl Fn(f64) -> f64, t: f64, gamma_order: f64, spec: &QuadSpec) -> Result<QuadEstimate> {
    if !(t > 0.0) {
        return domain(format!("Caputo oracle needs t > 0, got {t}"));
    }
    if !(gamma_order > 0.0 && gamma_order < 1.0) {
        return domain(format!("gamma must lie in (0, 1), got {gamma_order}"));
    }
    let h = 1e-6;
    let k = 1.0 - gamma_order;
    let pref = 1.0 / (gamma(k)? * k);
    let upper = t.powf(k);
    let r = integrate(
        |sigma| {
            let s = t - sigma.powf(1.0 / k);
            (u_t(s + h) - u_t(s - h)) / (2.0 * h)
        },
        0.0,
        upper,
        spec.abs_tol / pref,
        spec.max_subdivisions,
    )?;
    Ok(QuadEstimate {
        value: pref * r.value,
        error: pref * r.error,
    })
}

/// Gauss hypergeometric `₂F₁(a, b; c; z)` for `0 <= z < 1`.
///
/// Direct series, or the Euler-transformed series when that decays faster.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&z) {
        return domain(format!("hyp2f1 series needs 0 <= z < 1, got {z}"));
    }
    let (a, b, pre) = if a + b <= c {
        (a, b, 1.0)
    } else {
        (c - a, c - b, (1.0 - z).powf(c - a - b))
    };
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..50_000_000u64 {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        sum += term;
        if term == 0.0 || (term.abs() / (1.0 - z) < 1e-17 * sum.abs() && k > 2) {
            return Ok(pre * sum);
        }
    }
    Err(Error::Accuracy {
        message: format!("hyp2f1({a}, {b}; {c}; {z}) did not converge"),
        estimate: pre * sum,
    })
}

/// Spatial profile of the manufactured solutions, `(1 - |x|²)_+^p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// `p = 1 + α/2`, whose fractional Laplacian is a quadratic polynomial.
    Fractional,
    /// `p = 1`.
    Quadratic,
}

impl Profile {
    pub fn exponent(&self, alpha: f64) -> f64 {
        match self {
            Profile::Fractional => 1.0 + alpha / 2.0,
            Profile::Quadratic => 1.0,
        }
    }

    pub fn value(&self, x: &[f64], alpha: f64) -> f64 {
        let m = 1.0 - norm2(x);
        if m <= 0.0 {
            0.0
        } else {
            m.powf(self.exponent(alpha))
        }
    }

    /// `v · ∇_x` of the profile.
    pub fn directional(&self, x: &[f64], v: &[f64], alpha: f64) -> f64 {
        let m = 1.0 - norm2(x);
        if m <= 0.0 {
            return 0.0;
        }
        let p = self.exponent(alpha);
        let xv: f64 = x.iter().zip(v).map(|(a, b)| a * b).sum();
        -2.0 * p * m.powf(p - 1.0) * xv
    }

    /// `(-Δ)^{α/2}` of the profile inside the ball.
    pub fn frac_laplacian(&self, x: &[f64], alpha: f64) -> Result<f64> {
        match self {
            Profile::Fractional => Ok(forcing_laplacian(x, alpha)),
            Profile::Quadratic => power_profile_laplacian(x, alpha, 1.0),
        }
    }
}

/// `(-Δ)^{α/2} (1 - |x|²)_+^p` for `|x| < 1`:
/// `2^α Γ(p+1) Γ((d+α)/2) / (Γ(p+1-α/2) Γ(d/2)) · ₂F₁((d+α)/2, α/2-p; d/2; |x|²)`.
pub fn power_profile_laplacian(x: &[f64], alpha: f64, p: f64) -> Result<f64> {
    let d = x.len() as f64;
    let z = norm2(x);
    let ln_pref = alpha * std::f64::consts::LN_2 + ln_gamma_abs(p + 1.0)? + ln_gamma_abs((d + alpha) / 2.0)?
        - ln_gamma_abs(p + 1.0 - alpha / 2.0)?
        - ln_gamma_abs(d / 2.0)?;
    Ok(ln_pref.exp() * hyp2f1((d + alpha) / 2.0, alpha / 2.0 - p, d / 2.0, z)?)
}

/// `(-Δ)^{α/2}` of `(1 - |x|²)_+^{1+α/2}`:
/// `2^α Γ(α/2+2) Γ((α+d)/2) / Γ(d/2) · (1 - (1 + α/d)|x|²)`.
pub fn forcing_laplacian(x: &[f64], alpha: f64) -> f64 {
    let d = x.len() as f64;
    let ln_pref = alpha * std::f64::consts::LN_2
        + crate::special::ln_gamma_abs_unchecked(alpha / 2.0 + 2.0)
        + crate::special::ln_gamma_abs_unchecked((alpha + d) / 2.0)
        - crate::special::ln_gamma_abs_unchecked(d / 2.0);
    ln_pref.exp() * (1.0 - (1.0 + alpha / d) * norm2(x))
}

pub fn exact_solution_laplacian(x: &[f64], alpha: f64) -> f64 {
    Profile::Fractional.value(x, alpha)
}

pub fn exact_solution_ade(x: &[f64], t: f64, alpha: f64) -> f64 {
    Profile::Fractional.value(x, alpha) * (-t).exp()
}

/// Caputo derivative of `e^{-t}`: `-t^{1-γ} E_{1,2-γ}(-t)`.
pub fn caputo_exp_decay(t: f64, gamma_order: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(-t.powf(1.0 - gamma_order) * mittag_leffler(1.0, 2.0 - gamma_order, -t)?)
}

/// Forcing for `profile(x) e^{-t}` under the advection-diffusion operator.
pub fn forcing_ade_profile(profile: Profile, x: &[f64], t: f64, coeffs: &PdeCoefficients<f64>) -> Result<f64> {
    let alpha = coeffs.alpha;
    let decay = (-t).exp();
    let mut f = coeffs.c * decay * profile.frac_laplacian(x, alpha)?;
    if let Some(g) = coeffs.gamma {
        f += caputo_exp_decay(t, g)? * profile.value(x, alpha);
    }
    if let Some(v) = &coeffs.v {
        f += decay * profile.directional(x, v, alpha);
    }
    f += coeffs.mu * decay * profile.value(x, alpha);
    Ok(f)
}

pub fn forcing_ade(x: &[f64], t: f64, coeffs: &PdeCoefficients<f64>) -> Result<f64> {
    forcing_ade_profile(Profile::Fractional, x, t, coeffs)
}
