//! Gauss–Legendre rules and tensor-product integration over axis-aligned boxes.

use crate::{Error, Result};

/// Largest supported number of points per axis.
pub const MAX_ORDER: usize = 64;

/// Nodes and weights of the `order`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::QuadratureError(format!(
            "order {order} outside 1..={MAX_ORDER}"
        )));
    }
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// A tensor-product rule on `[lower, upper]`. Axes with zero extent are
/// treated as fixed coordinates, so a box with one collapsed axis integrates
/// against the `(N−1)`-dimensional Hausdorff measure of that face.
pub struct BoxRule {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl BoxRule {
    pub fn new(lower: &[f64], upper: &[f64], order: usize) -> Result<Self> {
        let (nodes, weights) = gauss_legendre(order)?;
        let n = lower.len();
        let mut points = vec![Vec::with_capacity(n)];
        let mut out_weights = vec![1.0];
        for axis in 0..n {
            let (lo, hi) = (lower[axis], upper[axis]);
            if lo.is_nan() || hi.is_nan() || hi < lo {
                return Err(Error::QuadratureError(format!(
                    "inverted box on axis {axis}: [{lo}, {hi}]"
                )));
            }
            if hi == lo {
                for p in &mut points {
                    p.push(lo);
                }
                continue;
            }
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            let mut next_points = Vec::with_capacity(points.len() * order);
            let mut next_weights = Vec::with_capacity(points.len() * order);
            for (p, w) in points.iter().zip(&out_weights) {
                for (x, wx) in nodes.iter().zip(&weights) {
                    let mut q = p.clone();
                    q.push(mid + half * x);
                    next_points.push(q);
                    next_weights.push(w * wx * half);
                }
            }
            points = next_points;
            out_weights = next_weights;
        }
        Ok(Self {
            points,
            weights: out_weights,
        })
    }

    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }
}

/// Reference rule on `[0, 1]^dims` reused by translating and scaling; avoids
/// rebuilding the node set for every sub-box of a uniform lattice.
pub struct UnitRule {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl UnitRule {
    pub fn new(dims: usize, order: usize) -> Result<Self> {
        let rule = BoxRule::new(&vec![0.0; dims], &vec![1.0; dims], order)?;
        Ok(Self {
            points: rule.points,
            weights: rule.weights,
        })
    }
}
