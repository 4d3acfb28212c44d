//! Recover α, γ, c and v of a 1D advection-diffusion equation from 20
//! sensors at the final time.
//!
//! cargo run --release --example inverse_ade -- [epochs]

use mcpinn::problems::ProblemSpec;
use mcpinn::train::{coefficient_names, train, TrainConfig, TrainState};

fn main() -> mcpinn::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let spec = ProblemSpec::inverse_ade(1)?.with_hidden(vec![32, 32, 32]);
    let mut cfg = TrainConfig {
        epochs,
        ..TrainConfig::for_problem(&spec, 7)
    };
    cfg.estimator.m = 30;
    cfg.estimator.r0 = 0.3;
    let mut state = TrainState::new(&spec, &cfg);
    let report = train(&spec, &cfg, &mut state)?;
    let names = coefficient_names(&spec);
    let truth = spec.true_coefficients();
    let want = [truth.alpha, truth.gamma.unwrap(), truth.c, truth.v.unwrap()[0]];
    for ((n, got), w) in names.iter().zip(&report.coefficients).zip(want) {
        println!("{n:>6}: {got:.4} (true {w})");
    }
    let every = (state.param_trace.len() / 5).max(1);
    for (epoch, c) in state.param_trace.iter().step_by(every) {
        println!("epoch {epoch:>6}: {c:.4?}");
    }
    println!("relative L2 {:.3e}", report.relative_l2.unwrap());
    Ok(())
}
