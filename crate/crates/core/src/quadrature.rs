//! Gauss–Legendre and Gauss–Laguerre rules by Newton iteration on the
//! three-term recurrences, plus node doubling until successive estimates agree.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn sum(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

const NEWTON_EPS: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> GaussRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..NEWTON_MAX_ITER {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= NEWTON_EPS {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    GaussRule { nodes, weights }
}

/// Laguerre nodes and weights for `∫_0^∞ f(x) e^{-x} dx`.
pub fn gauss_laguerre(n: usize) -> GaussRule {
    let mut nodes: Vec<f64> = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    let mut z = 0.0_f64;
    for i in 0..n {
        z = match i {
            0 => 3.0 / (1.0 + 2.4 * nf),
            1 => z + 15.0 / (1.0 + 2.5 * nf),
            _ => {
                let ai = (i - 1) as f64;
                z + (1.0 + 2.55 * ai) / (1.9 * ai) * (z - nodes[i - 2])
            }
        };
        let (mut p2, mut pp) = (0.0, 0.0);
        for _ in 0..NEWTON_MAX_ITER {
            let mut p1 = 1.0;
            p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0 - z) * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = (nf * p1 - nf * p2) / z;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= NEWTON_EPS * z.abs().max(1.0) {
                break;
            }
        }
        nodes[i] = z;
        weights[i] = -1.0 / (pp * nf * p2);
    }
    GaussRule { nodes, weights }
}

pub const START_NODES: usize = 16;
pub const MAX_DOUBLINGS: usize = 4;
pub const AGREEMENT: f64 = 1e-12;

/// Evaluates `estimate(m)` for `m = 16, 32, ...` until two successive values
/// agree to [`AGREEMENT`] relative, failing after [`MAX_DOUBLINGS`] doublings.
pub fn with_doubling(mut estimate: impl FnMut(usize) -> f64) -> Result<f64> {
    let mut m = START_NODES;
    let mut prev = estimate(m);
    for _ in 0..MAX_DOUBLINGS {
        m *= 2;
        let next = estimate(m);
        if (next - prev).abs() <= AGREEMENT * next.abs().max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Quadrature(format!(
        "no agreement after {MAX_DOUBLINGS} doublings (last {m} nodes gave {prev:e})"
    )))
}
