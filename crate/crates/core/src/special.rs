//! Special functions and fractional-operator constants.
//!
//! Gamma is evaluated with the Lanczos approximation (g = 7, nine
//! coefficients) and the reflection formula below 1/2. The logarithmic
//! variant and the digamma function share the same branch structure so
//! that gradients of the operator prefactors stay consistent with their
//! primal values.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn is_pole(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

fn lanczos_sum(x: f64) -> f64 {
    // x is the shifted argument (z - 1)
    let mut a = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    a
}

/// Gamma function, `Γ(x)`.
pub fn gamma(x: f64) -> Result<f64> {
    if is_pole(x) || x.is_nan() {
        return domain(format!("gamma has a pole at {x}"));
    }
    Ok(gamma_unchecked(x))
}

pub(crate) fn gamma_unchecked(x: f64) -> f64 {
    if x >= 1.0 && x <= 171.0 && x == x.floor() {
        // exact factorials for small integer arguments
        return (2..x as u32).fold(1.0, |acc, k| acc * k as f64);
    }
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma_unchecked(1.0 - x))
    } else {
        let z = x - 1.0;
        let t = z + LANCZOS_G + 0.5;
        (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * lanczos_sum(z)
    }
}

/// `ln |Γ(x)|`. Its derivative is [`digamma`] on both sides of zero.
pub fn ln_gamma_abs(x: f64) -> Result<f64> {
    if is_pole(x) || x.is_nan() {
        return domain(format!("ln_gamma has a pole at {x}"));
    }
    Ok(ln_gamma_abs_unchecked(x))
}

pub(crate) fn ln_gamma_abs_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        (PI / (PI * x).sin().abs()).ln() - ln_gamma_abs_unchecked(1.0 - x)
    } else {
        let z = x - 1.0;
        let t = z + LANCZOS_G + 0.5;
        0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln()
    }
}

/// Sign of `Γ(x)` away from the poles.
pub(crate) fn gamma_sign(x: f64) -> f64 {
    if x > 0.0 || (x.floor() as i64) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Digamma function `ψ(x) = Γ'(x)/Γ(x)`.
pub fn digamma(x: f64) -> Result<f64> {
    if is_pole(x) || x.is_nan() {
        return domain(format!("digamma has a pole at {x}"));
    }
    Ok(digamma_unchecked(x))
}

pub(crate) fn digamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        return digamma_unchecked(1.0 - x) - PI / (PI * x).tan();
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let f = 1.0 / (x * x);
    let series = f
        * (1.0 / 12.0
            - f * (1.0 / 120.0 - f * (1.0 / 252.0 - f * (1.0 / 240.0 - f * (1.0 / 132.0)))));
    acc + x.ln() - 0.5 / x - series
}

/// Two-parameter Mittag-Leffler function `E_{a,b}(t) = Σ t^k / Γ(ak + b)`.
///
/// Direct series only; the argument is restricted to `|t| <= 50`. Summation
/// stops once twenty consecutive terms fall below `1e-15` in magnitude.
pub fn mittag_leffler(a: f64, b: f64, t: f64) -> Result<f64> {
    if !(a > 0.0) {
        return domain(format!("mittag_leffler needs a > 0, got {a}"));
    }
    if !(t.abs() <= 50.0) {
        return domain(format!("mittag_leffler series regime needs |t| <= 50, got {t}"));
    }
    const TINY: f64 = 1e-15;
    const RUN: usize = 20;
    const MAX_TERMS: usize = 20_000;

    let ln_abs_t = t.abs().ln();
    let mut sum = 0.0;
    let mut small_run = 0;
    for k in 0..MAX_TERMS {
        let arg = a * k as f64 + b;
        let term = if is_pole(arg) {
            0.0
        } else if k == 0 {
            1.0 / gamma_unchecked(arg)
        } else if t == 0.0 {
            0.0
        } else {
            let sign_t = if t < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
            sign_t * gamma_sign(arg) * (k as f64 * ln_abs_t - ln_gamma_abs_unchecked(arg)).exp()
        };
        sum += term;
        if term.abs() < TINY {
            small_run += 1;
            if small_run >= RUN {
                return Ok(sum);
            }
        } else {
            small_run = 0;
        }
    }
    Err(Error::Accuracy {
        message: format!("mittag_leffler({a}, {b}, {t}) did not converge"),
        estimate: sum,
    })
}

/// Normalising constant of the integral fractional Laplacian and the
/// surface area of the unit sphere in `d` dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracConstants {
    pub d: usize,
    pub alpha: f64,
    /// `C_{d,α} = 2^α Γ((α+d)/2) / (π^{d/2} |Γ(-α/2)|)`
    pub c_d_alpha: f64,
    /// `|S^{d-1}| = 2 π^{d/2} / Γ(d/2)`
    pub sphere_area: f64,
}

impl FracConstants {
    pub fn new(d: usize, alpha: f64) -> Result<Self> {
        if d == 0 {
            return domain("dimension must be at least 1");
        }
        if !(alpha > 0.0 && alpha < 2.0) {
            return domain(format!("fractional order alpha must lie in (0, 2), got {alpha}"));
        }
        let half_d = d as f64 / 2.0;
        let c_d_alpha = 2f64.powf(alpha) * gamma_unchecked((alpha + d as f64) / 2.0)
            / (PI.powf(half_d) * gamma_unchecked(-alpha / 2.0).abs());
        Ok(Self {
            d,
            alpha,
            c_d_alpha,
            sphere_area: sphere_area(d),
        })
    }

    /// `C_{d,α} · |S^{d-1}|`, the factor shared by both halves of the
    /// ball-split estimator.
    pub fn scale(&self) -> f64 {
        self.c_d_alpha * self.sphere_area
    }
}

/// Surface area of the unit sphere `S^{d-1}`.
pub fn sphere_area(d: usize) -> f64 {
    let half_d = d as f64 / 2.0;
    2.0 * PI.powf(half_d) / gamma_unchecked(half_d)
}

pub fn frac_constants(d: usize, alpha: f64) -> Result<FracConstants> {
    FracConstants::new(d, alpha)
}
