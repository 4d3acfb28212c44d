//! Monte Carlo estimate of the fractional Laplacian of the manufactured
//! solution, compared with its closed form.
//!
//! cargo run --release --example frac_laplacian_mc

use mcpinn::estimator::{mc_frac_laplacian, EstimatorConfig, SampleGroup};
use mcpinn::oracle::{exact_solution_laplacian, forcing_laplacian};
use mcpinn::rng::RngKey;

fn main() -> mcpinn::Result<()> {
    let (alpha, x) = (1.2, [0.3, -0.2]);
    let u = |y: &[f64]| exact_solution_laplacian(y, alpha);
    let exact = forcing_laplacian(&x, alpha);
    let root = RngKey::new(11);
    println!("exact {exact:.6}");
    println!("{:>4} {:>12} {:>10} {:>8}", "m", "mean", "se", "z");
    for m in [1, 5, 20, 80] {
        let cfg = EstimatorConfig { m, ..Default::default() };
        let n = 20_000;
        let est: Vec<f64> = (0..n)
            .map(|i| {
                let g = SampleGroup::draw(2, m, &mut root.at(&[m as u64, i]).stream());
                mc_frac_laplacian(u, &x, alpha, &cfg, &g)
            })
            .collect::<mcpinn::Result<_>>()?;
        let mean = est.iter().sum::<f64>() / n as f64;
        let var = est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        println!("{m:>4} {mean:>12.6} {se:>10.2e} {:>8.2}", (mean - exact) / se);
    }
    Ok(())
}
