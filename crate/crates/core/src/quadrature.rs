//! Gauss–Legendre rules on panels and tensor grids.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on the reference interval [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess for the i-th largest root
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
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
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped affinely onto [a, b].
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.on(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Sorted, deduplicated panel edges covering [lo, hi], including any interior breakpoints.
pub fn panel_edges(lo: f64, hi: f64, breaks: &[f64]) -> Vec<f64> {
    let mut edges = vec![lo, hi];
    edges.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
    edges.sort_by(|a, b| a.total_cmp(b));
    edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
    edges
}

/// A composite Gauss–Legendre rule in one variable, panel by panel.
#[derive(Debug, Clone)]
pub struct PanelRule {
    pub edges: Vec<f64>,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Per-panel barycentric weights for interpolating through that panel's nodes.
    pub bary: Vec<f64>,
    pub per_panel: usize,
}

impl PanelRule {
    pub fn new(edges: Vec<f64>, per_panel: usize) -> Self {
        let gl = GaussLegendre::new(per_panel);
        let mut nodes = Vec::with_capacity(per_panel * (edges.len() - 1));
        let mut weights = Vec::with_capacity(nodes.capacity());
        for win in edges.windows(2) {
            for (x, w) in gl.on(win[0], win[1]) {
                nodes.push(x);
                weights.push(w);
            }
        }
        // Barycentric weights for Gauss–Legendre nodes: (-1)^i sqrt((1-x_i^2) w_i).
        let bary = gl
            .nodes
            .iter()
            .zip(&gl.weights)
            .enumerate()
            .map(|(i, (&x, &w))| {
                let s = ((1.0 - x * x) * w).sqrt();
                if i % 2 == 0 {
                    s
                } else {
                    -s
                }
            })
            .collect();
        Self {
            edges,
            nodes,
            weights,
            bary,
            per_panel,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn panels(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn panel_nodes(&self, p: usize) -> &[f64] {
        &self.nodes[p * self.per_panel..(p + 1) * self.per_panel]
    }

    /// Values of the Lagrange basis of panel `p` at `t`, written into `out`.
    pub fn lagrange_basis(&self, p: usize, t: f64, out: &mut [f64]) {
        let xs = self.panel_nodes(p);
        if let Some(i) = xs.iter().position(|&x| x == t) {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[i] = 1.0;
            return;
        }
        let mut denom = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let c = self.bary[i] / (t - x);
            out[i] = c;
            denom += c;
        }
        out.iter_mut().for_each(|v| *v /= denom);
    }
}

/// Tensor product of per-axis panel rules. Points are stored with the last axis fastest.
#[derive(Debug, Clone)]
pub struct TensorRule {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl TensorRule {
    pub fn new(axes: &[PanelRule]) -> Self {
        let mut points = vec![Vec::new()];
        let mut weights = vec![1.0];
        for axis in axes {
            let mut np = Vec::with_capacity(points.len() * axis.len());
            let mut nw = Vec::with_capacity(np.capacity());
            for (p, w) in points.iter().zip(&weights) {
                for (&x, &wx) in axis.nodes.iter().zip(&axis.weights) {
                    let mut q = p.clone();
                    q.push(x);
                    np.push(q);
                    nw.push(w * wx);
                }
            }
            points = np;
            weights = nw;
        }
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}
