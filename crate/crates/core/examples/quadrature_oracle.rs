//! Deterministic reference values for a field without a closed form.
//!
//! cargo run --release --example quadrature_oracle

use mcpinn::oracle::{forcing_laplacian, quad_frac_laplacian, QuadSpec};

fn main() -> mcpinn::Result<()> {
    let spec = QuadSpec::default();
    // the cutoff bump has no closed-form fractional Laplacian
    let bump = |x: &[f64]| {
        let m = 1.0 - x.iter().map(|v| v * v).sum::<f64>();
        if m <= 0.0 {
            0.0
        } else {
            (1.0 - 1.0 / m).exp()
        }
    };
    for d in 1..=3 {
        let mut x = vec![0.0; d];
        x[0] = 0.4;
        let q = quad_frac_laplacian(bump, &x, 1.3, &spec)?;
        println!("bump d={d}: {:.10} (error estimate {:.1e})", q.value, q.error);
    }
    // cross-check on the manufactured solution
    let alpha = 0.7;
    let u = |x: &[f64]| mcpinn::oracle::exact_solution_laplacian(x, alpha);
    let x = [0.1, 0.5];
    let q = quad_frac_laplacian(u, &x, alpha, &spec)?;
    println!("manufactured: quadrature {:.10} closed form {:.10}", q.value, forcing_laplacian(&x, alpha));
    Ok(())
}
