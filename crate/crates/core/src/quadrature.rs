//! Gauss–Legendre quadrature on truncated intervals and boxes.

use std::f64::consts::PI;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// `order`-point rule; nodes from Newton iteration on `P_order`.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let m = order.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(order, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.on_interval(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre: `panels` equal sub-intervals, each with the
/// same `order`-point rule.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    rule: GaussLegendre,
    panels: usize,
}

impl CompositeRule {
    pub fn new(panels: usize, order: usize) -> Self {
        assert!(panels >= 1);
        Self {
            rule: GaussLegendre::new(order),
            panels,
        }
    }

    pub fn points(&self) -> usize {
        self.panels * self.rule.order()
    }

    /// All `(node, weight)` pairs on `[a, b]`.
    pub fn nodes(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let h = (b - a) / self.panels as f64;
        (0..self.panels)
            .flat_map(|p| {
                let lo = a + p as f64 * h;
                self.rule.on_interval(lo, lo + h).collect::<Vec<_>>()
            })
            .collect()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.nodes(a, b).into_iter().map(|(x, w)| w * f(x)).sum()
    }

    /// Tensor-product integral over the box `[lo_0, hi_0] × … ` of `f(point)`.
    pub fn integrate_box<F: FnMut(&[f64]) -> f64>(&self, lo: &[f64], hi: &[f64], mut f: F) -> f64 {
        assert_eq!(lo.len(), hi.len());
        let axes: Vec<Vec<(f64, f64)>> =
            lo.iter().zip(hi).map(|(&a, &b)| self.nodes(a, b)).collect();
        let dim = axes.len();
        if dim == 0 {
            return f(&[]);
        }
        let len = axes[0].len();
        let mut idx = vec![0usize; dim];
        let mut point = vec![0.0; dim];
        let mut total = 0.0;
        loop {
            let mut w = 1.0;
            for d in 0..dim {
                let (x, wd) = axes[d][idx[d]];
                point[d] = x;
                w *= wd;
            }
            total += w * f(&point);
            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] < len {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d == dim {
                    return total;
                }
            }
        }
    }
}
