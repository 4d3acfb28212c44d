//! Paired and group-mean equation losses are both unbiased for the mean
//! squared residual; their spread differs.
//!
//! cargo run --release --example loss_modes

use mcpinn::estimator::{EstimatorConfig, PdeCoefficients};
use mcpinn::oracle::{forcing_laplacian, Profile};
use mcpinn::problems::ProblemSpec;
use mcpinn::rng::RngKey;
use mcpinn::train::{equation_loss_field, Batch, LossMode};

fn main() -> mcpinn::Result<()> {
    let alpha = 1.5;
    let spec = ProblemSpec::forward_laplacian(2, alpha)?;
    // not a solution: the quadratic profile instead of the manufactured one
    let u = |x: &[f64]| Profile::Quadratic.value(&x[..2], alpha);
    let coeffs = PdeCoefficients::laplacian(alpha);
    let root = RngKey::new(2);
    let batch0 = Batch::draw(&spec, 8, 1, &root, 0)?;
    let exact: f64 = batch0
        .points
        .iter()
        .map(|p| {
            let r = Profile::Quadratic.frac_laplacian(&p.point.x, alpha).unwrap() - forcing_laplacian(&p.point.x, alpha);
            r * r
        })
        .sum::<f64>()
        / 8.0;
    println!("mean squared residual {exact:.5}");
    for mode in [LossMode::Paired, LossMode::GroupMean] {
        for m in [1, 10] {
            let cfg = EstimatorConfig { m, ..Default::default() };
            let n = 4000;
            let vals: Vec<f64> = (0..n)
                .map(|k| {
                    let mut b = Batch::draw(&spec, 8, m, &root.child(k + 1), 0)?;
                    b.points = batch0.points.clone();
                    Ok(equation_loss_field(&u, &spec, &coeffs, &b, &cfg, mode))
                })
                .collect::<mcpinn::Result<_>>()?;
            let mean = vals.iter().sum::<f64>() / n as f64;
            let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            println!("{:>10} m={m:>2}: mean {mean:.5}  sd {sd:.4}", mode.name());
        }
    }
    Ok(())
}
