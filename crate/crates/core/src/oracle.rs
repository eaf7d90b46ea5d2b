//! Brute-force reference eigensolver on a truncated cylinder.
//!
//! The operator `−Δ + W` on `Ω × (−L, L)` with Dirichlet ends is reduced to
//! the first `J` transverse modes and discretized in `x_n` by second-order
//! central differences. The resulting block-tridiagonal matrix has diagonal
//! blocks everywhere except on the support of the potential, so it is factored
//! from both ends toward a meeting node inside the support and the off-support
//! pivots stay diagonal.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::asymptotics::predict_auto;
use crate::cross_section::{CrossSection, TransverseMode};
use crate::error::{Error, Result};
use crate::potential::{ScaledPotential, DEFAULT_NODES};
use crate::quadrature::{panel_edges, GaussLegendre, PanelRule, TensorRule};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Decay lengths `15 / Re k` kept between the support and the Dirichlet ends.
pub const DECAY_LENGTHS: f64 = 15.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleConfig {
    /// Number of transverse modes `J` (modes `0..J`).
    pub modes: usize,
    pub half_length: Option<f64>,
    pub spacing: Option<f64>,
    /// Shift `σ < μ₀`; defaults to the predicted eigenvalue minus half the predicted gap.
    pub shift: Option<f64>,
    /// Transverse Gauss nodes per panel.
    pub nodes: usize,
    /// Longitudinal Gauss nodes per sub-panel for cell averages.
    pub cell_nodes: usize,
    pub max_iter: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            modes: 17,
            half_length: None,
            spacing: None,
            shift: None,
            nodes: DEFAULT_NODES,
            cell_nodes: 8,
            max_iter: 500,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.modes < 1 {
            return Err(Error::InvalidInput("oracle needs at least one transverse mode".into()));
        }
        for (name, v) in [("half_length", self.half_length), ("spacing", self.spacing)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if self.nodes < 2 || self.cell_nodes < 1 {
            return Err(Error::InvalidInput("quadrature node counts too small".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// A pivot block: diagonal off the support, dense on it.
#[derive(Debug, Clone)]
enum Block {
    Diag(Vec<Complex64>),
    Dense(DMatrix<Complex64>),
}

impl Block {
    fn apply(&self, v: &[Complex64], out: &mut [Complex64]) {
        match self {
            Block::Diag(d) => {
                for ((o, x), di) in out.iter_mut().zip(v).zip(d) {
                    *o = di * x;
                }
            }
            Block::Dense(m) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (0..v.len()).map(|j| m[(i, j)] * v[j]).sum();
                }
            }
        }
    }

    fn inverse(self) -> Option<Block> {
        match self {
            Block::Diag(d) => {
                if d.iter().any(|x| *x == ZERO || !x.is_finite()) {
                    return None;
                }
                Some(Block::Diag(d.iter().map(|x| 1.0 / x).collect()))
            }
            Block::Dense(m) => {
                let inv = m.try_inverse()?;
                inv.iter().all(|x| x.is_finite()).then_some(Block::Dense(inv))
            }
        }
    }

    /// `a − s² · self`, where `self` is an inverse pivot.
    fn schur(&self, a: Block, s2: f64) -> Block {
        match (a, self) {
            (Block::Diag(mut a), Block::Diag(p)) => {
                a.iter_mut().zip(p).for_each(|(x, y)| *x -= s2 * y);
                Block::Diag(a)
            }
            (a, p) => {
                let mut a = a.into_dense();
                match p {
                    Block::Diag(d) => {
                        for (i, di) in d.iter().enumerate() {
                            a[(i, i)] -= s2 * di;
                        }
                    }
                    Block::Dense(m) => a -= m * Complex64::new(s2, 0.0),
                }
                Block::Dense(a)
            }
        }
    }

    fn into_dense(self) -> DMatrix<Complex64> {
        match self {
            Block::Diag(d) => DMatrix::from_diagonal(&DVector::from_vec(d)),
            Block::Dense(m) => m,
        }
    }
}

/// The reduced, discretized operator on `Ω × (−L, L)`.
#[derive(Debug, Clone)]
pub struct TruncatedProblem {
    cs: CrossSection,
    potential: ScaledPotential,
    cfg: OracleConfig,
    modes: Vec<TransverseMode>,
    half_length: f64,
    spacing: f64,
    points: usize,
    /// First grid index whose cell meets the support, and the cell-averaged
    /// coupling blocks `W̄(m)` from there on.
    support_start: usize,
    coupling: Vec<DMatrix<Complex64>>,
    shift: f64,
    k_estimate: f64,
}

/// Predicted `(σ, Re k)` for sizing and shifting, with a fallback when no
/// positive root is predicted.
fn default_shift(cs: &CrossSection, p: &ScaledPotential) -> (f64, f64) {
    let mu0 = cs.threshold();
    let pred = p
        .base
        .moments(cs)
        .ok()
        .and_then(|m| predict_auto(p.h, p.alpha, cs, &m).ok())
        .filter(|pr| pr.k.re > 0.0);
    match pred {
        Some(pr) => {
            let gap = mu0 - pr.e.re;
            (pr.e.re - 0.5 * gap, pr.k.re)
        }
        None => (mu0 * (1.0 - 1e-3), 0.05),
    }
}

impl TruncatedProblem {
    pub fn new(cs: &CrossSection, potential: &ScaledPotential, cfg: OracleConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cs.dimension();
        let base = &potential.base;
        if base.dimension() != n {
            return Err(Error::InvalidInput(format!(
                "potential is {}-dimensional but the waveguide is {n}-dimensional",
                base.dimension()
            )));
        }
        base.check_inside(cs, potential.h)?;
        let (pred_shift, k_estimate) = default_shift(cs, potential);
        let shift = cfg.shift.unwrap_or(pred_shift);
        let mu0 = cs.threshold();
        if !(shift < mu0) {
            return Err(Error::InvalidInput(format!("shift {shift} must lie below μ₀ = {mu0}")));
        }

        let (lo, hi) = base.support()[n - 1];
        let h = potential.h;
        let spacing = cfg.spacing.unwrap_or_else(|| {
            let a = lo.abs().min(hi.abs());
            let a = if a > 0.0 { a } else { 0.5 * (hi - lo) };
            h * a / 10.0
        });
        let wanted = cfg.half_length.unwrap_or(DECAY_LENGTHS / k_estimate);
        let cells = (wanted / spacing).ceil().max(1.0) as usize;
        let half_length = cells as f64 * spacing;
        if h * lo <= -half_length || h * hi >= half_length {
            return Err(Error::Domain(format!(
                "support [{}, {}] exceeds the truncation ±{half_length}",
                h * lo,
                h * hi
            )));
        }
        let points = 2 * cells - 1;
        let modes = cs.modes(cfg.modes);

        let mut problem = Self {
            cs: cs.clone(),
            potential: potential.clone(),
            cfg,
            modes,
            half_length,
            spacing,
            points,
            support_start: 0,
            coupling: Vec::new(),
            shift,
            k_estimate,
        };
        problem.assemble();
        Ok(problem)
    }

    /// Rebuilds the problem at another size, keeping the potential and shift.
    pub fn resized(&self, spacing: f64, half_length: f64, modes: usize, shift: f64) -> Result<Self> {
        let cfg = OracleConfig {
            modes,
            half_length: Some(half_length),
            spacing: Some(spacing),
            shift: Some(shift),
            ..self.cfg.clone()
        };
        Self::new(&self.cs, &self.potential, cfg)
    }

    pub fn x(&self, m: usize) -> f64 {
        -self.half_length + (m + 1) as f64 * self.spacing
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn modes(&self) -> &[TransverseMode] {
        &self.modes
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn k_estimate(&self) -> f64 {
        self.k_estimate
    }

    /// Whether `L ≥ 15 / Re k_est`.
    pub fn sizing_ok(&self) -> bool {
        self.half_length * (1.0 + 1e-12) >= DECAY_LENGTHS / self.k_estimate
    }

    fn transverse_rule(&self) -> TensorRule {
        let n = self.cs.dimension();
        let axes: Vec<PanelRule> = (0..n - 1)
            .map(|q| self.potential.base.axis_rule(q, self.potential.h, self.cfg.nodes))
            .collect();
        TensorRule::new(&axes)
    }

    /// `W_ij(x_n) = h^{−α} ∫_Ω φ_i φ_j V(x′/h, x_n/h) dx′` at each `x_n`.
    pub fn project_potential(&self, xs: &[f64]) -> Vec<DMatrix<Complex64>> {
        let rule = self.transverse_rule();
        let phi: Vec<Vec<f64>> = self
            .modes
            .iter()
            .map(|m| rule.points.iter().map(|p| m.value(p)).collect())
            .collect();
        xs.iter().map(|&xn| self.project_at(xn, &rule, &phi)).collect()
    }

    fn project_at(&self, xn: f64, rule: &TensorRule, phi: &[Vec<f64>]) -> DMatrix<Complex64> {
        let nm = self.modes.len();
        let mut u = DMatrix::from_element(nm, nm, ZERO);
        let mut x = vec![0.0; self.cs.dimension()];
        for (t, (p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            x[..p.len()].copy_from_slice(p);
            x[p.len()] = xn;
            let v = self.potential.value(&x) * w;
            if v == ZERO {
                continue;
            }
            for i in 0..nm {
                let a = v * phi[i][t];
                for j in i..nm {
                    u[(i, j)] += a * phi[j][t];
                }
            }
        }
        for i in 0..nm {
            for j in 0..i {
                u[(i, j)] = u[(j, i)];
            }
        }
        u
    }

    /// Cell averages `(1/δ) ∫_{x_m−δ/2}^{x_m+δ/2} W(x) dx` over the support.
    fn assemble(&mut self) {
        let n = self.cs.dimension();
        let base = &self.potential.base;
        let h = self.potential.h;
        let (lo, hi) = base.support()[n - 1];
        let (lo, hi) = (h * lo, h * hi);
        let breaks: Vec<f64> = base.breaks()[n - 1].iter().map(|b| h * b).collect();
        let half = 0.5 * self.spacing;
        let first = (0..self.points).find(|&m| self.x(m) + half > lo);
        let Some(first) = first else {
            return;
        };
        let last = (0..self.points).rev().find(|&m| self.x(m) - half < hi).unwrap_or(first);
        if last < first {
            return;
        }
        let rule = self.transverse_rule();
        let phi: Vec<Vec<f64>> = self
            .modes
            .iter()
            .map(|m| rule.points.iter().map(|p| m.value(p)).collect())
            .collect();
        let gl = GaussLegendre::new(self.cfg.cell_nodes);
        let nm = self.modes.len();
        self.support_start = first;
        self.coupling = (first..=last)
            .map(|m| {
                let a = (self.x(m) - half).max(lo);
                let b = (self.x(m) + half).min(hi);
                let mut acc = DMatrix::from_element(nm, nm, ZERO);
                if b > a {
                    for w in panel_edges(a, b, &breaks).windows(2) {
                        for (xn, wx) in gl.on(w[0], w[1]) {
                            acc += self.project_at(xn, &rule, &phi) * Complex64::new(wx, 0.0);
                        }
                    }
                }
                acc / Complex64::new(self.spacing, 0.0)
            })
            .collect();
    }

    fn coupling_at(&self, m: usize) -> Option<&DMatrix<Complex64>> {
        m.checked_sub(self.support_start).and_then(|i| self.coupling.get(i))
    }

    /// Diagonal block `2/δ² + μ_j + W̄(m) − σ`.
    fn diag_block(&self, m: usize, sigma: f64) -> Block {
        let d = 2.0 / (self.spacing * self.spacing);
        match self.coupling_at(m) {
            Some(w) => {
                let mut b = w.clone();
                for (j, mode) in self.modes.iter().enumerate() {
                    b[(j, j)] += d + mode.mu - sigma;
                }
                Block::Dense(b)
            }
            None => Block::Diag(self.modes.iter().map(|md| Complex64::new(d + md.mu - sigma, 0.0)).collect()),
        }
    }

    /// True when every assembled block is symmetric (`W̄_ij = W̄_ji`).
    pub fn is_symmetric(&self) -> bool {
        self.coupling.iter().all(|w| {
            (0..w.nrows()).all(|i| (0..i).all(|j| w[(i, j)] == w[(j, i)]))
        })
    }

    /// Meeting node of the twisted factorization: the grid node nearest the
    /// middle of the support.
    fn meeting_node(&self) -> usize {
        if self.coupling.is_empty() {
            return self.points / 2;
        }
        (self.support_start + self.coupling.len() / 2).min(self.points - 1)
    }

    fn factor(&self, sigma: f64) -> Option<Factorization> {
        let s2 = 1.0 / self.spacing.powi(4);
        let c = self.meeting_node();
        let mut left: Vec<Block> = Vec::with_capacity(c);
        for m in 0..c {
            let a = self.diag_block(m, sigma);
            let p = match left.last() {
                Some(prev) => prev.schur(a, s2),
                None => a,
            };
            left.push(p.inverse()?);
        }
        let mut right: Vec<Block> = Vec::with_capacity(self.points - c - 1);
        for m in (c + 1..self.points).rev() {
            let a = self.diag_block(m, sigma);
            let q = match right.last() {
                Some(prev) => prev.schur(a, s2),
                None => a,
            };
            right.push(q.inverse()?);
        }
        let mut g = self.diag_block(c, sigma);
        if let Some(p) = left.last() {
            g = p.schur(g, s2);
        }
        if let Some(q) = right.last() {
            g = q.schur(g, s2);
        }
        let g = g.inverse()?;
        right.reverse();
        Some(Factorization {
            meet: c,
            left,
            right,
            center: g,
            off: -1.0 / (self.spacing * self.spacing),
            width: self.modes.len(),
        })
    }

    /// `(A − σ) x` for a stacked vector, `x[m·J + j]`.
    fn apply_shifted(&self, x: &[Complex64], sigma: f64) -> Vec<Complex64> {
        let nm = self.modes.len();
        let off = -1.0 / (self.spacing * self.spacing);
        let mut out = vec![ZERO; x.len()];
        for m in 0..self.points {
            let row = &mut out[m * nm..(m + 1) * nm];
            self.diag_block(m, sigma).apply(&x[m * nm..(m + 1) * nm], row);
            for j in 0..nm {
                if m > 0 {
                    row[j] += off * x[(m - 1) * nm + j];
                }
                if m + 1 < self.points {
                    row[j] += off * x[(m + 1) * nm + j];
                }
            }
        }
        out
    }

    /// Eigenvalue nearest the shift by shift-invert iteration.
    pub fn lowest_eigenvalue(&self) -> Result<OracleResult> {
        let mut sigma = self.shift;
        let mut fact = None;
        for attempt in 0..4 {
            fact = self.factor(sigma);
            if fact.is_some() {
                break;
            }
            sigma -= 1e-8 * self.cs.threshold() * (attempt + 1) as f64;
        }
        let fact = fact.ok_or_else(|| Error::SingularSystem(format!("block factorization singular near σ = {sigma}")))?;

        let nm = self.modes.len();
        let mut x: Vec<Complex64> = (0..self.points * nm)
            .map(|i| {
                if i % nm == 0 {
                    Complex64::new((-self.k_estimate * self.x(i / nm).abs()).exp(), 0.0)
                } else {
                    ZERO
                }
            })
            .collect();
        normalize(&mut x);
        let mu0 = self.cs.threshold();
        let mut lambda = Complex64::new(f64::NAN, 0.0);
        let mut trace = Vec::new();
        let mut change = f64::INFINITY;
        for it in 1..=self.cfg.max_iter {
            let mut y = fact.solve(&x);
            let nu: Complex64 = x.iter().zip(&y).map(|(a, b)| a.conj() * b).sum();
            let next = sigma + 1.0 / nu;
            normalize(&mut y);
            x = y;
            change = (next - lambda).norm();
            lambda = next;
            trace.push(lambda.re);
            if change < 1e-12 * mu0 {
                return Ok(self.finish(lambda, x, it, change, sigma));
            }
        }
        let _ = change;
        Err(Error::NoConvergence {
            iterations: self.cfg.max_iter,
            trace: trace.iter().rev().take(8).map(|v| format!("{v:.12e}")).collect::<Vec<_>>().join(", "),
        })
    }

    fn finish(&self, lambda: Complex64, mut x: Vec<Complex64>, iterations: usize, change: f64, sigma: f64) -> OracleResult {
        let nm = self.modes.len();
        let ax = self.apply_shifted(&x, sigma);
        let residual = ax
            .iter()
            .zip(&x)
            .map(|(a, v)| (a - (lambda - sigma) * v).norm_sqr())
            .sum::<f64>()
            .sqrt();
        // phase: positive real ground coefficient at the meeting node
        let c = self.meeting_node();
        let ph = x[c * nm];
        if ph != ZERO {
            let rot = ph.conj() / ph.norm();
            x.iter_mut().for_each(|v| *v *= rot);
        }
        let scale = 1.0 / self.spacing.sqrt();
        let profile: Vec<Complex64> = (0..self.points).map(|m| x[m * nm] * scale).collect();
        let mu0 = self.cs.threshold();
        let margin = 10.0 * change;
        let eigenvalue = (lambda.re < mu0 - margin).then_some(lambda);
        let mut result = OracleResult {
            eigenvalue,
            converged_value: lambda,
            mu0,
            margin,
            error_estimate: None,
            iterations,
            residual,
            shift: sigma,
            half_length: self.half_length,
            spacing: self.spacing,
            modes: nm,
            sizing_ok: self.sizing_ok(),
            decay_rate: None,
            profile,
        };
        result.decay_rate = result.fit_decay_rate();
        result
    }

    /// Re-solves at `(δ, 1.5L, J+4)` and `(δ/2, 1.5L, J+4)` and extrapolates in `δ²`.
    pub fn refine(&self, base: &OracleResult) -> Result<OracleResult> {
        let mu0 = self.cs.threshold();
        let shift = match base.eigenvalue {
            Some(e) => e.re - 0.1 * (mu0 - e.re),
            None => self.shift,
        };
        let l = 1.5 * self.half_length;
        let j = self.modes.len() + 4;
        let coarse = self.resized(self.spacing, l, j, shift)?.lowest_eigenvalue()?;
        let fine_problem = self.resized(0.5 * self.spacing, l, j, shift)?;
        let fine = fine_problem.lowest_eigenvalue()?;
        let extrapolated = (4.0 * fine.converged_value - coarse.converged_value) / 3.0;
        let change = (extrapolated - fine.converged_value).norm();
        let margin = 10.0 * change;
        let mut out = fine;
        out.converged_value = extrapolated;
        out.eigenvalue = (extrapolated.re < mu0 - margin).then_some(extrapolated);
        out.margin = margin;
        out.error_estimate = Some(change);
        out.decay_rate = out.fit_decay_rate();
        Ok(out)
    }
}

fn normalize(x: &mut [Complex64]) {
    let n = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
}

struct Factorization {
    meet: usize,
    /// Inverse pivots `P_m^{−1}` for `m < meet`.
    left: Vec<Block>,
    /// Inverse pivots `Q_m^{−1}` for `m > meet`, in increasing `m`.
    right: Vec<Block>,
    center: Block,
    off: f64,
    width: usize,
}

impl Factorization {
    fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let nm = self.width;
        let c = self.meet;
        let points = b.len() / nm;
        let s = self.off;
        let mut y = b.to_vec();
        let mut tmp = vec![ZERO; nm];
        // eliminate toward the meeting node from both ends
        for m in 1..c {
            self.left[m - 1].apply(&y[(m - 1) * nm..m * nm], &mut tmp);
            for j in 0..nm {
                y[m * nm + j] -= s * tmp[j];
            }
        }
        for m in (c + 1..points - 1).rev() {
            self.right[m + 1 - c - 1].apply(&y[(m + 1) * nm..(m + 2) * nm], &mut tmp);
            for j in 0..nm {
                y[m * nm + j] -= s * tmp[j];
            }
        }
        let mut rhs: Vec<Complex64> = y[c * nm..(c + 1) * nm].to_vec();
        if c > 0 {
            self.left[c - 1].apply(&y[(c - 1) * nm..c * nm], &mut tmp);
            rhs.iter_mut().zip(&tmp).for_each(|(r, t)| *r -= s * t);
        }
        if c + 1 < points {
            self.right[0].apply(&y[(c + 1) * nm..(c + 2) * nm], &mut tmp);
            rhs.iter_mut().zip(&tmp).for_each(|(r, t)| *r -= s * t);
        }
        let mut x = vec![ZERO; b.len()];
        self.center.apply(&rhs, &mut x[c * nm..(c + 1) * nm]);
        let mut work = vec![ZERO; nm];
        for m in (0..c).rev() {
            for j in 0..nm {
                work[j] = y[m * nm + j] - s * x[(m + 1) * nm + j];
            }
            self.left[m].apply(&work, &mut tmp);
            x[m * nm..(m + 1) * nm].copy_from_slice(&tmp);
        }
        for m in c + 1..points {
            for j in 0..nm {
                work[j] = y[m * nm + j] - s * x[(m - 1) * nm + j];
            }
            self.right[m - c - 1].apply(&work, &mut tmp);
            x[m * nm..(m + 1) * nm].copy_from_slice(&tmp);
        }
        x
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleResult {
    /// Lowest eigenvalue below `μ₀ − margin`, if any.
    pub eigenvalue: Option<Complex64>,
    pub converged_value: Complex64,
    pub mu0: f64,
    pub margin: f64,
    /// Size of the last refinement correction, after [`TruncatedProblem::refine`].
    pub error_estimate: Option<f64>,
    pub iterations: usize,
    /// `‖(A − λ)x‖` for the unit iterate.
    pub residual: f64,
    pub shift: f64,
    pub half_length: f64,
    pub spacing: f64,
    pub modes: usize,
    pub sizing_ok: bool,
    /// Fitted decay rate of `|c₀(x_n)|`.
    pub decay_rate: Option<f64>,
    /// `c₀` at the grid nodes, `L²`-normalized with the rest of the vector.
    #[serde(skip)]
    pub profile: Vec<Complex64>,
}

impl OracleResult {
    pub fn gap(&self) -> Option<f64> {
        self.eigenvalue.map(|e| self.mu0 - e.re)
    }

    pub fn x(&self, m: usize) -> f64 {
        -self.half_length + (m + 1) as f64 * self.spacing
    }

    /// Least-squares slope of `−log|c₀|` over `x_n ∈ [3/k, 8/k]`, `k = √(μ₀ − Re e)`.
    pub fn fit_decay_rate(&self) -> Option<f64> {
        let gap = self.mu0 - self.converged_value.re;
        if !(gap > 0.0) {
            return None;
        }
        let k = gap.sqrt();
        let (a, b) = (3.0 / k, (8.0 / k).min(0.6 * self.half_length));
        if !(b > a) {
            return None;
        }
        let pts: Vec<(f64, f64)> = (0..self.profile.len())
            .map(|m| (self.x(m), self.profile[m].norm()))
            .filter(|&(x, v)| x >= a && x <= b && v > 0.0)
            .map(|(x, v)| (x, v.ln()))
            .collect();
        if pts.len() < 3 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(-sxy / sxx)
    }

    /// `x_n, Re c₀, Im c₀, |c₀|` as CSV, every `stride`-th node.
    pub fn profile_csv(&self, stride: usize) -> String {
        let mut s = String::from("# schema=1\nx,re_c0,im_c0,abs_c0\n");
        for m in (0..self.profile.len()).step_by(stride.max(1)) {
            let c = self.profile[m];
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e},{:.16e}", self.x(m), c.re, c.im, c.norm());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialSpec;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sym() -> CrossSection {
        CrossSection::interval(-PI / 2.0, PI / 2.0).unwrap()
    }

    fn box_problem(amp: Complex64, h: f64, alpha: f64, cfg: OracleConfig) -> TruncatedProblem {
        let v = PotentialSpec::boxed(amp, &[0.5, 0.5]).unwrap();
        let p = ScaledPotential::new(v, h, alpha).unwrap();
        TruncatedProblem::new(&sym(), &p, cfg).unwrap()
    }

    fn small() -> OracleConfig {
        OracleConfig {
            modes: 4,
            nodes: 12,
            ..Default::default()
        }
    }

    #[test]
    fn zero_potential_has_zero_blocks_and_no_eigenvalue() {
        let v = PotentialSpec::zero(2).unwrap();
        let p = ScaledPotential::new(v, 0.3, 0.5).unwrap();
        let prob = TruncatedProblem::new(&sym(), &p, OracleConfig {
            half_length: Some(60.0),
            spacing: Some(0.05),
            ..small()
        })
        .unwrap();
        let w = prob.project_potential(&[0.0, 0.01, -0.1]);
        assert!(w.iter().all(|m| m.iter().all(|x| *x == ZERO)));
        let r = prob.lowest_eigenvalue().unwrap();
        assert!(r.eigenvalue.is_none());
        assert!(r.converged_value.re > 1.0);
    }

    #[test]
    fn box_ground_coupling_is_sine_integral() {
        let h = 0.3;
        let prob = box_problem(c(-1.0, 0.0), h, 0.0, small());
        let w = prob.project_potential(&[0.0, 0.2 * h, 0.6 * h]);
        // −∫_{−h/2}^{h/2} (2/π) cos² x dx = −(1/π)(h + sin h)
        let want = -(h + h.sin()) / PI;
        assert!((w[0][(0, 0)].re - want).abs() < 1e-14);
        assert!((w[1][(0, 0)].re - want).abs() < 1e-14);
        assert_eq!(w[2][(0, 0)], ZERO);
    }

    #[test]
    fn separable_coupling_factorizes() {
        let h = 0.2;
        let alpha = 0.5;
        let v = PotentialSpec::tensor(
            "sep",
            c(-1.0, 0.0),
            vec![
                crate::potential::AxisProfile {
                    pieces: vec![crate::potential::Piece { lo: -0.5, hi: 0.7, coeffs: vec![1.0, 0.3, -2.0] }],
                },
                crate::potential::AxisProfile {
                    pieces: vec![crate::potential::Piece { lo: -0.4, hi: 0.5, coeffs: vec![0.5, 1.0] }],
                },
            ],
        )
        .unwrap();
        let p = ScaledPotential::new(v, h, alpha).unwrap();
        let prob = TruncatedProblem::new(&sym(), &p, small()).unwrap();
        let xn = 0.05;
        let w = prob.project_potential(&[xn]);
        let gl = GaussLegendre::new(60);
        let tilde = 0.5 + xn / h;
        for i in 0..4 {
            for j in 0..4 {
                let f = gl.integrate(-0.5 * h, 0.7 * h, |x| {
                    let t = x / h;
                    prob.modes()[i].value(&[x]) * prob.modes()[j].value(&[x]) * (1.0 + 0.3 * t - 2.0 * t * t)
                });
                let want = -h.powf(-alpha) * tilde * f;
                assert!((w[0][(i, j)].re - want).abs() < 1e-12, "{i}{j}");
            }
        }
    }

    #[test]
    fn real_potential_gives_symmetric_blocks_and_real_eigenvalue() {
        let prob = box_problem(c(-1.0, 0.0), 0.3, 0.5, small());
        assert!(prob.is_symmetric());
        let r = prob.lowest_eigenvalue().unwrap();
        assert!(r.converged_value.im.abs() < 1e-12);
        assert!(r.eigenvalue.is_some());
        assert!(r.residual < 1e-8);
        assert!(r.sizing_ok);
    }

    #[test]
    fn twisted_solve_inverts_the_operator() {
        let prob = box_problem(c(-2.0, 0.7), 0.3, 0.5, OracleConfig {
            half_length: Some(5.0),
            ..small()
        });
        let sigma = 0.9;
        let f = prob.factor(sigma).unwrap();
        let nm = prob.modes().len();
        let b: Vec<Complex64> = (0..prob.points() * nm)
            .map(|i| c((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let x = f.solve(&b);
        let ax = prob.apply_shifted(&x, sigma);
        let err = ax.iter().zip(&b).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn repulsive_box_has_no_eigenvalue() {
        let prob = box_problem(c(1.0, 0.0), 0.3, 0.5, OracleConfig {
            shift: Some(0.999),
            half_length: Some(200.0),
            ..small()
        });
        assert!(prob.lowest_eigenvalue().unwrap().eigenvalue.is_none());
    }

    #[test]
    fn support_outside_truncation_is_domain_error() {
        let v = PotentialSpec::boxed(c(-1.0, 0.0), &[0.5, 0.5]).unwrap();
        let p = ScaledPotential::new(v, 0.3, 0.5).unwrap();
        let r = TruncatedProblem::new(&sym(), &p, OracleConfig {
            half_length: Some(0.1),
            spacing: Some(0.1),
            ..small()
        });
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn undersized_domain_is_flagged() {
        let prob = box_problem(c(-1.0, 0.0), 0.3, 0.5, OracleConfig {
            half_length: Some(50.0),
            ..small()
        });
        assert!(!prob.sizing_ok());
        assert!(!prob.lowest_eigenvalue().unwrap().sizing_ok);
    }

    #[test]
    fn second_order_in_spacing() {
        let prob = box_problem(c(-1.0, 0.0), 0.3, 0.5, OracleConfig {
            half_length: Some(300.0),
            ..small()
        });
        let d = prob.spacing();
        let shift = prob.shift();
        let e: Vec<f64> = [1.0, 0.5, 0.25]
            .iter()
            .map(|f| {
                prob.resized(d * f, 300.0, 4, shift).unwrap().lowest_eigenvalue().unwrap().converged_value.re
            })
            .collect();
        let ratio = (e[0] - e[1]) / (e[1] - e[2]);
        assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn profile_csv_has_schema_header() {
        let prob = box_problem(c(-1.0, 0.0), 0.3, 0.5, small());
        let r = prob.lowest_eigenvalue().unwrap();
        let csv = r.profile_csv(1000);
        assert!(csv.starts_with("# schema=1\nx,re_c0,im_c0,abs_c0\n"));
        assert!(csv.lines().count() > 3);
    }

    #[test]
    fn truncation_changes_decrease() {
        let prob = box_problem(c(-1.0, 0.0), 0.3, 0.5, OracleConfig {
            spacing: Some(0.03),
            ..small()
        });
        let (d, shift) = (prob.spacing(), prob.shift());
        let e = |l: f64, j: usize| {
            prob.resized(d, l, j, shift).unwrap().lowest_eigenvalue().unwrap().converged_value.re
        };
        // longitudinal: e^{−2kL} scale
        let (l1, l2, l3) = (e(100.0, 4), e(200.0, 4), e(400.0, 4));
        assert!((l3 - l2).abs() < (l2 - l1).abs());
        assert!((l3 - l2).abs() < 1e-10);
        // transverse: measured 1.3e-5 from 8 to 12 modes, then 2.9e-6, 3.3e-7
        let (j1, j2, j3) = (e(240.0, 8), e(240.0, 12), e(240.0, 16));
        assert!((j3 - j2).abs() < (j2 - j1).abs());
        assert!(j3 < j2 && j2 < j1);
    }
}
