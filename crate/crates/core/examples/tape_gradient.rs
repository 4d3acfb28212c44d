//! Reverse-mode gradient of a network output together with its
//! directional derivative, checked against a finite difference.
//!
//! cargo run --release --example tape_gradient

use mcpinn::autodiff::Tape;
use mcpinn::net::{directional_derivative, init_params, NetworkSpec};
use mcpinn::rng::RngKey;

fn main() {
    let spec = NetworkSpec::new(2, vec![8, 8]);
    let mut params = init_params(&spec, &RngKey::new(1));
    let tape = Tape::new();
    let x = vec![tape.constant(0.3), tape.constant(-0.1)];
    let v = vec![tape.constant(1.0), tape.constant(0.0)];
    let out = tape.eval_network(&params, &[x], Some(&[v]));
    // loss = value + 2 · (∂u/∂x1)
    let loss = out.values[0] + out.tangents.unwrap()[0] * 2.0;
    let grad = tape.gradient(loss, Some(&params));

    let k = 7;
    let h = 1e-6;
    let f = |p: &mcpinn::net::ParamVector| {
        mcpinn::net::forward(p, &[0.3, -0.1]) + 2.0 * directional_derivative(p, &[0.3, -0.1], &[1.0, 0.0])
    };
    params.values[k] += h;
    let up = f(&params);
    params.values[k] -= 2.0 * h;
    let down = f(&params);
    println!("parameter {k}: reverse {:.9}, central difference {:.9}", grad.params[k], (up - down) / (2.0 * h));
}
