use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::Mat as DMatrix;

/// Largest supported rule (keeps per-call scratch on the stack).
pub const MAX_ORDER: usize = 255;

/// Gauss–Hermite rule for `∫ e^{−x²} g(x) dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    ln_weights: Vec<f64>,
}

impl GaussHermite {
    /// Nodes from the eigenvalues of the Jacobi matrix, polished by Newton
    /// steps on the orthonormal Hermite recurrence (which also yields the
    /// weights to full relative precision).
    ///
    /// # Panics
    /// If `order` is zero or exceeds [`MAX_ORDER`].
    pub fn new(order: usize) -> Self {
        assert!((1..=MAX_ORDER).contains(&order), "unsupported quadrature order {order}");
        let n = order;
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let mut guesses: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
        guesses.sort_by(|a, b| b.total_cmp(a));
        let pim4 = core::f64::consts::PI.powf(-0.25);
        // Orthonormal Hermite recurrence; returns (h_n(z), h_{n−1}(z)).
        let eval = |z: f64| {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            (p1, p2)
        };
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let mut ln_weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut z = guesses[i];
            for _ in 0..8 {
                let (p1, p2) = eval(z);
                let step = p1 / ((2.0 * n as f64).sqrt() * p2);
                z -= step;
                if step.abs() <= 1e-15 * (1.0 + z.abs()) {
                    break;
                }
            }
            let (_, p2) = eval(z);
            let pp = (2.0 * n as f64).sqrt() * p2;
            if n % 2 == 1 && i == n / 2 {
                z = 0.0;
            }
            // w = 2 / pp², kept in logs since pp overflows near e^{z²/2}.
            let lw = core::f64::consts::LN_2 - 2.0 * pp.abs().ln();
            for j in [i, n - 1 - i] {
                ln_weights[j] = lw;
                weights[j] = lw.exp();
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
        }
        GaussHermite {
            nodes,
            weights,
            ln_weights,
        }
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

    pub fn ln_weights(&self) -> &[f64] {
        &self.ln_weights
    }
}
