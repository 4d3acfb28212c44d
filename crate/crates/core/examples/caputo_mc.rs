//! Caputo derivative of `e^{-t}`: Monte Carlo against the Mittag-Leffler
//! closed form and the quadrature oracle.
//!
//! cargo run --release --example caputo_mc

use mcpinn::estimator::{mc_caputo, EstimatorConfig, SampleGroup};
use mcpinn::oracle::{caputo_exp_decay, quad_caputo, QuadSpec};
use mcpinn::rng::RngKey;

fn main() -> mcpinn::Result<()> {
    let cfg = EstimatorConfig { m: 10, ..Default::default() };
    let root = RngKey::new(5);
    let u = |t: f64| (-t).exp();
    for gamma in [0.3, 0.5, 0.8] {
        for t in [0.25, 1.0] {
            let closed = caputo_exp_decay(t, gamma)?;
            let quad = quad_caputo(u, t, gamma, &QuadSpec::default())?;
            let n = 20_000u64;
            let mut sum = 0.0;
            for i in 0..n {
                let g = SampleGroup::draw(1, cfg.m, &mut root.at(&[i]).stream());
                sum += mc_caputo(u, t, gamma, &cfg, &g)?;
            }
            println!(
                "gamma {gamma} t {t}: closed {closed:.6}  quadrature {:.6}  mc {:.6}",
                quad.value,
                sum / n as f64
            );
        }
    }
    Ok(())
}
