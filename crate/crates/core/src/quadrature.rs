//! One-dimensional quadrature: adaptive Gauss–Kronrod (7/15) and
//! Gauss–Legendre nodes.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Integral value and an error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadEstimate {
    pub value: f64,
    pub error: f64,
}

impl std::ops::Add for QuadEstimate {
    type Output = QuadEstimate;
    fn add(self, o: Self) -> Self {
        QuadEstimate {
            value: self.value + o.value,
            error: self.error + o.error,
        }
    }
}

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for k in 0..7 {
        let dx = h * XGK[k];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[k] * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&o.error)
    }
}

/// Globally adaptive Gauss–Kronrod quadrature on a finite interval.
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate is below `abs_tol` or `max_subdivisions` pieces exist.
pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_subdivisions: usize,
) -> Result<QuadEstimate> {
    if a == b {
        return Ok(QuadEstimate { value: 0.0, error: 0.0 });
    }
    let (value, error) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value, error });
    let (mut total, mut err) = (value, error);
    while err > abs_tol || !err.is_finite() {
        if !total.is_finite() || !err.is_finite() {
            return Err(Error::Accuracy {
                message: format!("non-finite integrand on [{a}, {b}]"),
                estimate: total,
            });
        }
        if heap.len() >= max_subdivisions {
            return Err(Error::Accuracy {
                message: format!("quadrature on [{a}, {b}] reached {max_subdivisions} subdivisions (error {err:e})"),
                estimate: total,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval cannot be split further in floating point
            return Err(Error::Accuracy {
                message: format!("quadrature interval collapsed near {mid} (error {err:e})"),
                estimate: total,
            });
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.error;
        heap.push(Piece { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // re-sum to shed the drift of the running updates
    let value = heap.iter().map(|p| p.value).sum();
    let error = heap.iter().map(|p| p.error).sum();
    Ok(QuadEstimate { value, error })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_integrals() {
        let r = integrate(f64::sin, 0.0, std::f64::consts::PI, 1e-12, 1000).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        let r = integrate(|x| x.powi(5), -1.0, 2.0, 1e-12, 1000).unwrap();
        assert!((r.value - (64.0 - 1.0) / 6.0).abs() < 1e-11);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let r = integrate(|x| x.powf(-0.5), 0.0, 1.0, 1e-9, 1 << 14).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn budget_exhaustion_reports_estimate() {
        let e = integrate(|x| x.powf(-0.9), 0.0, 1.0, 1e-14, 8).unwrap_err();
        assert!(matches!(e, Error::Accuracy { .. }));
    }

    #[test]
    fn non_finite_integrand_is_an_error() {
        assert!(integrate(|x| 1.0 / x, 0.0, 1.0, 1e-9, 100).is_err());
        assert!(integrate(|_| f64::NAN, 0.0, 1.0, 1e-9, 100).is_err());
    }

    #[test]
    fn legendre_rules() {
        for n in [1, 2, 5, 16, 40] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            // exact for degree 2n - 1
            let deg = 2 * n - 2;
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((q - 2.0 / (deg + 1) as f64).abs() < 1e-13, "n={n}");
        }
    }
}
