//! Gauss–Hermite rules for `∫ f(x) e^{-x²} dx`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GhRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GhRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `Σ wᵢ f(xᵢ)`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }
}

/// Orthonormal Hermite recursion at `x`: returns `(p_n(x), p_{n-1}(x))`.
fn hermite_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p1 = std::f64::consts::PI.powf(-0.25);
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        p1 = x * (2.0 / j as f64).sqrt() * p2 - ((j - 1) as f64 / j as f64).sqrt() * p3;
    }
    (p1, p2)
}

/// Nodes (ascending) and weights of the `order`-point rule, found by Newton
/// iteration on the orthonormal Hermite polynomial.
pub fn gh_rule(order: usize) -> Result<GhRule> {
    if order == 0 || order > 200 {
        return Err(Error::InvalidParameter(format!(
            "quadrature order must lie in 1..=200, got {order}"
        )));
    }
    let n = order;
    let nf = n as f64;
    let m = n.div_ceil(2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let mut z = 0.0;
    for i in 0..m {
        // standard initial guesses for the largest roots, then extrapolation
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[n - 1],
            3 => 1.91 * z - 0.91 * nodes[n - 2],
            _ => 2.0 * z - nodes[n + 1 - i],
        };
        for _ in 0..100 {
            let (p, q) = hermite_pair(n, z);
            let step = p / ((2.0 * nf).sqrt() * q);
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        let deriv = (2.0 * nf).sqrt() * hermite_pair(n, z).1;
        nodes[n - 1 - i] = z;
        nodes[i] = -z;
        weights[i] = 2.0 / (deriv * deriv);
        weights[n - 1 - i] = weights[i];
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(GhRule { nodes, weights })
}
