//! Time-fractional advection-diffusion, forward problem in 2D.
//!
//! cargo run --release --example forward_ade -- [epochs]

use mcpinn::problems::{AdeSetup, Family, ProblemSpec};
use mcpinn::train::{train, TrainConfig, TrainState};

fn main() -> mcpinn::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let spec = ProblemSpec::new(Family::ForwardAde(AdeSetup::standard(2)))?.with_hidden(vec![32, 32]);
    let cfg = TrainConfig {
        epochs,
        batch_size: 64,
        ..TrainConfig::for_problem(&spec, 1)
    };
    let mut state = TrainState::new(&spec, &cfg);
    let report = train(&spec, &cfg, &mut state)?;
    let last = report.final_loss.unwrap();
    println!(
        "equation {:.3e}  initial {:.3e}  relative L2 {:.3e}",
        last.equ,
        last.g,
        report.relative_l2.unwrap()
    );
    Ok(())
}
