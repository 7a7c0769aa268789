//! Fixed-order Gauss-Legendre quadrature.
//!
//! Nodes and weights are computed once per rule by Newton iteration on the
//! Legendre polynomial and reused across all panels.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Gauss-Legendre rule of a fixed order on the reference interval [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

impl GaussLegendre {
    pub fn new(order: usize) -> Result<Self> {
        if order < 1 {
            return Err(Error::invalid("quadrature order must be >= 1"));
        }
        if order == 1 {
            return Ok(GaussLegendre {
                nodes: vec![0.0],
                weights: vec![2.0],
            });
        }
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        // Roots come in +/- pairs; solve the positive half and mirror.
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-15 {
                    let (p, d) = legendre_with_derivative(n, x);
                    dp = d;
                    x -= p / d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // i = 0 finds the largest root; store ascending.
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = w;
            nodes[i] = -x;
            weights[i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(GaussLegendre { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrate `f` over [lo, hi].
    pub fn integrate<F: FnMut(f64) -> Complex64>(&self, lo: f64, hi: f64, mut f: F) -> Complex64 {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let mut acc = Complex64::new(0.0, 0.0);
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        half * acc
    }
}
