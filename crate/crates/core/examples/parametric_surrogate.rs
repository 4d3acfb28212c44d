//! Train a surrogate over `(x, α, μ)` and use it as the ABC forward model.
//!
//! cargo run --release --example parametric_surrogate -- [epochs]

use mcpinn::abc::{abc_rejection, AbcConfig, ForwardModel, OracleModel, SurrogateModel};
use mcpinn::problems::ProblemSpec;
use mcpinn::rng::RngKey;
use mcpinn::train::{train, TrainConfig, TrainState};

fn main() -> mcpinn::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let spec = ProblemSpec::parametric(2)?.with_hidden(vec![32, 32, 32]);
    let cfg = TrainConfig {
        epochs,
        batch_size: 64,
        ..TrainConfig::for_problem(&spec, 9)
    };
    let mut state = TrainState::new(&spec, &cfg);
    train(&spec, &cfg, &mut state)?;

    let surrogate = SurrogateModel { params: &state.params, d: 2 };
    let oracle = OracleModel::new(2);
    let abc = AbcConfig {
        n_draws: 5000,
        tolerance: 1e-2,
        ..AbcConfig::standard()
    };
    for (alpha, mu) in [(0.7, -0.3), (1.0, 0.0), (1.3, 0.4)] {
        let s = surrogate.predict(alpha, mu, &abc.sensors)?;
        let o = oracle.predict(alpha, mu, &abc.sensors)?;
        let err = s.iter().zip(&o).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("alpha {alpha} mu {mu}: max sensor error {err:.3e}");
    }
    let post = abc_rejection(&surrogate, &abc, &RngKey::new(1))?;
    println!("surrogate ABC accepted {} draws, means {:?}", post.accepted.len(), post.means());
    Ok(())
}
