//! The radial spectral solver behind the parametric diffusion problem:
//! solutions of `(-Δ)^{α/2} u + μ u = f` for a few `(α, μ)`.
//!
//! cargo run --release --example spectral_family

use mcpinn::oracle::forcing_laplacian;
use mcpinn::spectral::solve_radial;

fn main() -> mcpinn::Result<()> {
    let rhs = |r: f64| forcing_laplacian(&[r, 0.0], 1.0);
    println!("{:>6} {:>6} {:>10} {:>10} {:>10}", "alpha", "mu", "u(0)", "u(0.5)", "u(0.9)");
    for (alpha, mu) in [(0.5, 0.0), (1.0, 0.0), (1.0, 0.5), (1.5, -0.5)] {
        let sol = solve_radial(2, alpha, mu, 24, rhs)?;
        let at = |r: f64| sol.eval(&[r, 0.0]);
        println!("{alpha:>6} {mu:>6} {:>10.6} {:>10.6} {:>10.6}", at(0.0), at(0.5), at(0.9));
    }
    Ok(())
}
