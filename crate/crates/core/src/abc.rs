//! Rejection ABC over `(α, μ)` and Gaussian kernel density estimates.

use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::net::ParamVector;
use crate::oracle::{exact_solution_laplacian, forcing_laplacian};
use crate::problems::Ansatz;
use crate::rng::{domain as tags, RngKey};
use crate::spectral::solve_radial;

/// Sensor positions of the two-dimensional reproduction.
pub const SENSOR_POSITIONS: [[f64; 2]; 5] = [
    [-0.0120, -0.2170],
    [0.0321, 0.7628],
    [0.6677, 0.1095],
    [0.5411, 0.5840],
    [-0.2382, -0.7787],
];

/// Maps `(α, μ)` to predicted sensor values.
pub trait ForwardModel: Sync {
    fn predict(&self, alpha: f64, mu: f64, sensors: &[Vec<f64>]) -> Result<Vec<f64>>;
}

/// Solution family of `(-Δ)^{α/2} u + μ u = f(·; α₀)` computed by the
/// radial spectral solver.
#[derive(Debug, Clone, Copy)]
pub struct OracleModel {
    pub d: usize,
    pub alpha0: f64,
    pub modes: usize,
}

impl OracleModel {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            alpha0: 1.0,
            modes: 24,
        }
    }
}

impl ForwardModel for OracleModel {
    fn predict(&self, alpha: f64, mu: f64, sensors: &[Vec<f64>]) -> Result<Vec<f64>> {
        let d = self.d;
        let sol = solve_radial(d, alpha, mu, self.modes, |r| {
            let mut x = vec![0.0; d];
            x[0] = r;
            forcing_laplacian(&x, self.alpha0)
        })?;
        Ok(sensors.iter().map(|x| sol.eval(x)).collect())
    }
}

/// A trained parametric surrogate with inputs `(x, α, μ)`.
#[derive(Debug, Clone, Copy)]
pub struct SurrogateModel<'p> {
    pub params: &'p ParamVector,
    pub d: usize,
}

impl ForwardModel for SurrogateModel<'_> {
    fn predict(&self, alpha: f64, mu: f64, sensors: &[Vec<f64>]) -> Result<Vec<f64>> {
        let rows: Vec<Vec<f64>> = sensors
            .iter()
            .map(|x| {
                let mut r = x.clone();
                r.extend([alpha, mu]);
                r
            })
            .collect();
        Ok(Ansatz::new(self.params, self.d).eval_rows(&rows))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbcConfig {
    pub n_draws: usize,
    pub tolerance: f64,
    pub alpha_prior: (f64, f64),
    pub mu_prior: (f64, f64),
    pub sensors: Vec<Vec<f64>>,
    pub observations: Vec<f64>,
}

impl AbcConfig {
    /// Default priors and sensors, observations from the `α = 1, μ = 0`
    /// solution `(1 - |x|²)^{3/2}`.
    pub fn standard() -> Self {
        let sensors: Vec<Vec<f64>> = SENSOR_POSITIONS.iter().map(|p| p.to_vec()).collect();
        let observations = sensors.iter().map(|x| exact_solution_laplacian(x, 1.0)).collect();
        Self {
            n_draws: 100_000,
            tolerance: 2.5e-4,
            alpha_prior: (0.5, 1.5),
            mu_prior: (-0.5, 0.5),
            sensors,
            observations,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance >= 0.0) {
            return domain("ABC tolerance must be non-negative");
        }
        if self.sensors.len() != self.observations.len() || self.sensors.is_empty() {
            return domain("need one observation per sensor and at least one sensor");
        }
        let (a, b) = self.alpha_prior;
        if !(a > 0.0 && b < 2.0 && a <= b) {
            return domain(format!("alpha prior {:?} must lie in (0, 2)", self.alpha_prior));
        }
        if self.mu_prior.0 > self.mu_prior.1 {
            return domain("mu prior must be an ordered interval");
        }
        Ok(())
    }
}

/// One prior draw and its discrepancy `Σ_k (u(x_k | α, μ) - u_k)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    pub alpha: f64,
    pub mu: f64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    /// Accepted draws in draw order.
    pub accepted: Vec<Draw>,
    pub n_draws: usize,
    pub tolerance: f64,
}

impl Posterior {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted.len() as f64 / self.n_draws.max(1) as f64
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.accepted.iter().map(|d| d.alpha).collect()
    }

    pub fn mus(&self) -> Vec<f64> {
        self.accepted.iter().map(|d| d.mu).collect()
    }

    pub fn means(&self) -> Option<(f64, f64)> {
        if self.accepted.is_empty() {
            return None;
        }
        let n = self.accepted.len() as f64;
        Some((self.alphas().iter().sum::<f64>() / n, self.mus().iter().sum::<f64>() / n))
    }

    /// Hint for an empty posterior.
    pub fn diagnostic(&self) -> Option<String> {
        self.accepted.is_empty().then(|| {
            format!(
                "no draw out of {} met tolerance {:e}; try a larger tolerance",
                self.n_draws, self.tolerance
            )
        })
    }
}

/// Prior draws with their discrepancies, draw `i` from `(ABC, i)`.
pub fn simulate(model: &impl ForwardModel, cfg: &AbcConfig, root: &RngKey) -> Result<Vec<Draw>> {
    cfg.validate()?;
    let key = root.child(tags::ABC);
    (0..cfg.n_draws as u64)
        .into_par_iter()
        .map(|i| {
            let mut s = key.child(i).stream();
            let alpha = s.uniform_in(cfg.alpha_prior.0, cfg.alpha_prior.1);
            let mu = s.uniform_in(cfg.mu_prior.0, cfg.mu_prior.1);
            let pred = model.predict(alpha, mu, &cfg.sensors)?;
            let discrepancy = pred
                .iter()
                .zip(&cfg.observations)
                .map(|(p, o)| (p - o) * (p - o))
                .sum();
            Ok(Draw { alpha, mu, discrepancy })
        })
        .collect()
}

/// Keeps the draws whose discrepancy is at most `tolerance`.
pub fn accept(draws: &[Draw], tolerance: f64) -> Posterior {
    Posterior {
        accepted: draws.iter().copied().filter(|d| d.discrepancy <= tolerance).collect(),
        n_draws: draws.len(),
        tolerance,
    }
}

pub fn abc_rejection(model: &impl ForwardModel, cfg: &AbcConfig, root: &RngKey) -> Result<Posterior> {
    Ok(accept(&simulate(model, cfg, root)?, cfg.tolerance))
}

/// Scott's rule `n^{-1/5} · sd`, floored at `1e-4`.
pub fn scott_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return domain("kernel density estimate needs at least two samples");
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    Ok(((n as f64).powf(-0.2) * var.sqrt()).max(1e-4))
}

/// Evenly spaced grid covering the samples plus five bandwidths each side.
pub fn kde_grid(samples: &[f64], points: usize) -> Result<Vec<f64>> {
    let h = scott_bandwidth(samples)?;
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - 5.0 * h;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 5.0 * h;
    let step = (hi - lo) / (points.max(2) - 1) as f64;
    Ok((0..points.max(2)).map(|k| lo + step * k as f64).collect())
}

/// Gaussian kernel density estimate on `grid`.
pub fn kde_1d(samples: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    let h = scott_bandwidth(samples)?;
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    Ok(grid
        .par_iter()
        .map(|&g| {
            samples
                .iter()
                .map(|&s| {
                    let z = (g - s) / h;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect())
}

/// Trapezoid rule on a grid.
pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngKey;

    #[test]
    fn oracle_model_at_truth_matches_observations() {
        let cfg = AbcConfig::standard();
        let pred = OracleModel::new(2).predict(1.0, 0.0, &cfg.sensors).unwrap();
        for (p, o) in pred.iter().zip(&cfg.observations) {
            assert!((p - o).abs() < 1e-12);
        }
    }

    #[test]
    fn tolerance_extremes_and_monotonicity() {
        let mut cfg = AbcConfig::standard();
        cfg.n_draws = 2000;
        let model = OracleModel::new(2);
        let draws = simulate(&model, &cfg, &RngKey::new(1)).unwrap();
        assert_eq!(accept(&draws, 1e9).acceptance_rate(), 1.0);
        assert_eq!(accept(&draws, 0.0).acceptance_rate(), 0.0);
        assert!(accept(&draws, 0.0).diagnostic().is_some());
        let rates: Vec<f64> = [1e-4, 1e-3, 1e-2].iter().map(|&t| accept(&draws, t).acceptance_rate()).collect();
        assert!(rates[0] <= rates[1] && rates[1] <= rates[2]);
        let post = accept(&draws, 1e-2);
        for d in &post.accepted {
            let pred = model.predict(d.alpha, d.mu, &cfg.sensors).unwrap();
            let again: f64 = pred.iter().zip(&cfg.observations).map(|(p, o)| (p - o) * (p - o)).sum();
            assert!(again <= 1e-2);
            assert_eq!(again, d.discrepancy);
        }
    }

    #[test]
    fn kde_normal_and_uniform() {
        let mut s = RngKey::new(2).stream();
        let normal: Vec<f64> = (0..10_000).map(|_| s.normal()).collect();
        let grid = kde_grid(&normal, 801).unwrap();
        let dens = kde_1d(&normal, &grid).unwrap();
        assert!((trapezoid(&grid, &dens) - 1.0).abs() < 1e-3);
        let at0 = kde_1d(&normal, &[0.0]).unwrap()[0];
        assert!((at0 / (2.0 * std::f64::consts::PI).powf(-0.5) - 1.0).abs() < 0.15);
        let unif: Vec<f64> = (0..10_000).map(|_| s.uniform()).collect();
        let grid: Vec<f64> = (0..61).map(|k| 0.2 + 0.01 * k as f64).collect();
        for v in kde_1d(&unif, &grid).unwrap() {
            assert!((v - 1.0).abs() < 0.1, "{v}");
        }
    }

    #[test]
    fn kde_degenerate_inputs() {
        assert!(kde_1d(&[1.0], &[0.0]).is_err());
        let same = vec![0.3; 50];
        assert_eq!(scott_bandwidth(&same).unwrap(), 1e-4);
        let grid = kde_grid(&same, 1001).unwrap();
        let dens = kde_1d(&same, &grid).unwrap();
        let peak = grid[dens.iter().enumerate().fold(0, |b, (k, v)| if *v > dens[b] { k } else { b })];
        assert!((peak - 0.3).abs() < 2e-5);
        assert!((trapezoid(&grid, &dens) - 1.0).abs() < 1e-3);
    }
}
