//! Train a surrogate for `(-Δ)^{α/2} u = f` on the 2D unit ball and save a
//! checkpoint.
//!
//! cargo run --release --example forward_laplacian -- [epochs]

use mcpinn::net::save_checkpoint;
use mcpinn::problems::ProblemSpec;
use mcpinn::train::{train, TrainConfig, TrainState};

fn main() -> mcpinn::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let spec = ProblemSpec::forward_laplacian(2, 1.5)?.with_hidden(vec![32, 32, 32]);
    let cfg = TrainConfig {
        epochs,
        batch_size: 64,
        trace_every: epochs / 10,
        ..TrainConfig::for_problem(&spec, 42)
    };
    let mut state = TrainState::new(&spec, &cfg);
    let report = train(&spec, &cfg, &mut state)?;
    for row in &state.loss_trace {
        println!("epoch {:>6}  loss {:.4e}  lr {:.0e}", row.epoch, row.parts.total, row.lr);
    }
    println!("relative L2 {:.3e}", report.relative_l2.unwrap());
    println!("queries per residual point {}", report.counts.queries_per_point());
    let path = std::env::temp_dir().join("forward_laplacian.ckpt");
    save_checkpoint(&state.params, &path)?;
    println!("checkpoint written to {}", path.display());
    Ok(())
}
