//! Posterior of `(α, μ)` from five noiseless sensors by rejection ABC with
//! the spectral solution family as forward model.
//!
//! cargo run --release --example abc_posterior -- [draws]

use mcpinn::abc::{abc_rejection, kde_1d, kde_grid, AbcConfig, OracleModel};
use mcpinn::rng::RngKey;

fn main() -> mcpinn::Result<()> {
    let draws = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let cfg = AbcConfig {
        n_draws: draws,
        ..AbcConfig::standard()
    };
    let post = abc_rejection(&OracleModel::new(2), &cfg, &RngKey::new(3))?;
    println!("accepted {} of {} (rate {:.2e})", post.accepted.len(), draws, post.acceptance_rate());
    let Some((a, m)) = post.means() else {
        println!("{}", post.diagnostic().unwrap());
        return Ok(());
    };
    println!("posterior means: alpha {a:.4}, mu {m:.4}");
    let alphas = post.alphas();
    let grid = kde_grid(&alphas, 9)?;
    for (g, d) in grid.iter().zip(kde_1d(&alphas, &grid)?) {
        println!("  p(alpha = {g:.3}) = {d:.3}");
    }
    Ok(())
}
