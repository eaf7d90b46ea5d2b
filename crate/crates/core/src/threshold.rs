//! The scalar threshold equation `2k + εF_ε(k) = 0`.
//!
//! The free resolvent near the threshold is written as a transverse mode sum
//! (`A(k)`), its rank-one `1/(2k)` part is split off (`R̃(k)`), and the
//! remaining operator is discretized by Nyström's method on a panel-aligned
//! Gauss grid over the scaled support of the potential. Longitudinal kernels
//! `e^{−K|x−t|}` are integrated against the Lagrange interpolant of the
//! density (product integration), so the kink at `x = t` costs no accuracy.
//!
//! Because `R̃` factors through the projections onto the retained modes, the
//! linear system `(I + εT)c = 𝓛φ₀` is solved in mode-coefficient space:
//! unknowns `z_j(x_n)`, coupling `U_ij(x_n) = ∫ φ_i φ_j W dx′`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::cross_section::{dispersion, CrossSection, TransverseMode};
use crate::error::{Error, Result};
use crate::potential::{PotentialSpec, ScaledPotential, DEFAULT_NODES};
use crate::quadrature::{GaussLegendre, PanelRule, TensorRule};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    /// Neumann series truncated after `N` terms.
    Series(usize),
    /// Dense solve of `(I + εT) c = 𝓛φ₀`.
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscretizationConfig {
    /// Highest retained transverse mode index (modes `0..=j_max`).
    pub j_max: usize,
    /// Gauss–Legendre nodes per panel per axis.
    pub nodes: usize,
    pub mode: SolveMode,
    /// Root tolerance on `|2k + εF|`; `None` means `1e-14 · max(1, |k₀|)`.
    pub tol_k: Option<f64>,
    pub max_iter: usize,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        Self {
            j_max: 20,
            nodes: DEFAULT_NODES,
            mode: SolveMode::Direct,
            tol_k: None,
            max_iter: 60,
        }
    }
}

impl DiscretizationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.j_max < 1 {
            return Err(Error::InvalidInput("j_max must be at least 1".into()));
        }
        if self.nodes < 2 {
            return Err(Error::InvalidInput("need at least 2 nodes per panel".into()));
        }
        if let SolveMode::Series(0) = self.mode {
            return Err(Error::InvalidInput("series order must be at least 1".into()));
        }
        if let Some(t) = self.tol_k {
            if !(t > 0.0) {
                return Err(Error::InvalidInput("tol_k must be positive".into()));
            }
        }
        Ok(())
    }
}

/// A perturbation `W(x) = amplitude · V(x / length)` written as `ε 𝓛_ε`.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub base: PotentialSpec,
    pub length: f64,
    pub amplitude: f64,
    /// The small parameter multiplying `𝓛_ε`.
    pub epsilon: f64,
    /// Scale of the expected root, used for the initial guess.
    pub k_scale: f64,
}

impl Perturbation {
    /// `h^{−α} V(x/h)` with `ε = h^{−α} β_n(h)`.
    pub fn shrinking(p: &ScaledPotential) -> Self {
        let n = p.base.dimension() as f64;
        Self {
            base: p.base.clone(),
            length: p.h,
            amplitude: p.amplitude(),
            epsilon: p.epsilon(),
            k_scale: p.h.powf(n - p.alpha),
        }
    }

    /// The fixed-support weak coupling `h V(x)`.
    pub fn baseline(v: PotentialSpec, h: f64) -> Result<Self> {
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::InvalidInput(format!("h = {h} must lie in (0, 1)")));
        }
        Ok(Self {
            base: v,
            length: 1.0,
            amplitude: h,
            epsilon: h,
            k_scale: h,
        })
    }

    pub fn value(&self, x: &[f64]) -> Complex64 {
        let t: Vec<f64> = x.iter().map(|xi| xi / self.length).collect();
        self.base.value(&t) * self.amplitude
    }
}

/// Which longitudinal kernel to use for the ground mode.
#[derive(Debug, Clone, Copy, PartialEq)]
enum GroundKernel {
    /// `e^{−k|d|} / 2k`
    Full,
    /// `(e^{−k|d|} − 1) / 2k`, bounded as `k → 0`.
    Regularized,
}

/// Nodes of the Nyström grid over the scaled support.
#[derive(Debug, Clone)]
pub struct NystromGrid {
    pub transverse: TensorRule,
    pub longitudinal: PanelRule,
}

impl NystromGrid {
    pub fn len(&self) -> usize {
        self.transverse.len() * self.longitudinal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of node `(x′_t, x_n_l)`; the transverse index runs fastest.
    pub fn index(&self, l: usize, t: usize) -> usize {
        l * self.transverse.len() + t
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        let nt = self.transverse.len();
        let mut p = self.transverse.points[idx % nt].clone();
        p.push(self.longitudinal.nodes[idx / nt]);
        p
    }

    pub fn weight(&self, idx: usize) -> f64 {
        let nt = self.transverse.len();
        self.transverse.weights[idx % nt] * self.longitudinal.weights[idx / nt]
    }

    /// Samples `f` at every node.
    pub fn sample<F: Fn(&[f64]) -> Complex64>(&self, f: F) -> Vec<Complex64> {
        (0..self.len()).map(|i| f(&self.point(i))).collect()
    }
}

/// Result of applying a mode-sum operator to a grid field.
#[derive(Debug, Clone)]
pub struct ModeApplication {
    pub field: Vec<Complex64>,
    /// `components[j][l]`: the longitudinal coefficient of `φ_j` at node `l`.
    pub components: Vec<Vec<Complex64>>,
    /// Largest magnitude contributed by the last retained mode.
    pub tail_estimate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FEvaluation {
    /// `F_ε(k)`
    pub value: Complex64,
    /// `ε F_ε(k)`
    pub scaled: Complex64,
    /// Series terms `(−1)^j ε^{j+1}⟨φ₀ T^j 𝓛 φ₀⟩` (empty in direct mode).
    pub terms: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Exists,
    Absent,
    Indeterminate,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Exists => "exists",
            Verdict::Absent => "absent",
            Verdict::Indeterminate => "indeterminate",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdSolution {
    pub k: Complex64,
    pub verdict: Verdict,
    /// `μ₀ − k²` when the verdict is `exists`.
    pub eigenvalue: Option<Complex64>,
    pub mu0: f64,
    pub epsilon: f64,
    pub f_value: Complex64,
    pub residual: f64,
    pub tol_k: f64,
    pub tol_sign: f64,
    pub iterations: usize,
    pub mode: SolveMode,
}

/// Birman–Schwinger solver for one perturbation on one cross-section.
#[derive(Debug, Clone)]
pub struct ThresholdSolver {
    cs: CrossSection,
    pert: Perturbation,
    cfg: DiscretizationConfig,
    modes: Vec<TransverseMode>,
    grid: NystromGrid,
    /// `phi[j][t]`: mode `j` at transverse node `t`.
    phi: Vec<Vec<f64>>,
    /// `W` at every grid node.
    potential: Vec<Complex64>,
    /// `coupling[l]`: the `(J+1)²` matrix `U_ij(x_n = node l)`.
    coupling: Vec<DMatrix<Complex64>>,
}

impl ThresholdSolver {
    pub fn new(cs: &CrossSection, pert: Perturbation, cfg: DiscretizationConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cs.dimension();
        if pert.base.dimension() != n {
            return Err(Error::InvalidInput(format!(
                "potential is {}-dimensional but the waveguide is {n}-dimensional",
                pert.base.dimension()
            )));
        }
        pert.base.check_inside(cs, pert.length)?;
        let modes = cs.modes(cfg.j_max + 1);
        let trans_axes: Vec<PanelRule> = (0..n - 1)
            .map(|q| pert.base.axis_rule(q, pert.length, cfg.nodes))
            .collect();
        let grid = NystromGrid {
            transverse: TensorRule::new(&trans_axes),
            longitudinal: pert.base.axis_rule(n - 1, pert.length, cfg.nodes),
        };
        let phi: Vec<Vec<f64>> = modes
            .iter()
            .map(|m| grid.transverse.points.iter().map(|x| m.value(x)).collect())
            .collect();
        let potential = grid.sample(|x| pert.value(x));

        let nm = modes.len();
        let nt = grid.transverse.len();
        let coupling = (0..grid.longitudinal.len())
            .map(|l| {
                let mut u = DMatrix::from_element(nm, nm, ZERO);
                for t in 0..nt {
                    let wv = potential[grid.index(l, t)] * grid.transverse.weights[t];
                    if wv == ZERO {
                        continue;
                    }
                    for i in 0..nm {
                        let a = wv * phi[i][t];
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
            })
            .collect();

        Ok(Self {
            cs: cs.clone(),
            pert,
            cfg,
            modes,
            grid,
            phi,
            potential,
            coupling,
        })
    }

    pub fn cross_section(&self) -> &CrossSection {
        &self.cs
    }

    pub fn perturbation(&self) -> &Perturbation {
        &self.pert
    }

    pub fn config(&self) -> &DiscretizationConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &NystromGrid {
        &self.grid
    }

    pub fn modes(&self) -> &[TransverseMode] {
        &self.modes
    }

    pub fn mu0(&self) -> f64 {
        self.modes[0].mu
    }

    /// `U_ij(x_n)` at longitudinal node `l`.
    pub fn coupling(&self, l: usize) -> &DMatrix<Complex64> {
        &self.coupling[l]
    }

    fn decay_rates(&self, k: Complex64) -> Result<Vec<Complex64>> {
        let mu0 = self.mu0();
        let mut out = Vec::with_capacity(self.modes.len());
        out.push(k);
        for m in &self.modes[1..] {
            out.push(dispersion(m.mu - mu0, k)?);
        }
        Ok(out)
    }

    /// Product-integration matrices `L_j(a, b) = ∫ κ_j(x_a − t) ℓ_b(t) dt`.
    fn longitudinal_matrices(&self, k: Complex64, ground: GroundKernel) -> Result<Vec<DMatrix<Complex64>>> {
        let rates = self.decay_rates(k)?;
        let rule = &self.grid.longitudinal;
        let nl = rule.len();
        let pp = rule.per_panel;
        let kmax = rates.iter().map(|r| r.norm()).fold(0.0, f64::max);
        let sub = GaussLegendre::new(pp + 8);

        // quadrature points (t, weight, panel, basis) for each target node
        let mut mats = vec![DMatrix::from_element(nl, nl, ZERO); rates.len()];
        let mut basis = vec![0.0; pp];
        let mut samples: Vec<(f64, f64, usize, Vec<f64>)> = Vec::new();
        for a in 0..nl {
            let x = rule.nodes[a];
            samples.clear();
            for p in 0..rule.panels() {
                let (c, d) = (rule.edges[p], rule.edges[p + 1]);
                let mut cuts = vec![c];
                if x > c && x < d {
                    cuts.push(x);
                }
                cuts.push(d);
                for w in cuts.windows(2) {
                    let len = w[1] - w[0];
                    let pieces = ((kmax * len / 2.0).ceil() as usize).max(1);
                    let step = len / pieces as f64;
                    for s in 0..pieces {
                        let lo = w[0] + s as f64 * step;
                        for (t, wt) in sub.on(lo, lo + step) {
                            rule.lagrange_basis(p, t, &mut basis);
                            samples.push((t, wt, p, basis.clone()));
                        }
                    }
                }
            }
            for (j, mat) in mats.iter_mut().enumerate() {
                let r = rates[j];
                for (t, wt, p, b) in &samples {
                    let dist = (x - t).abs();
                    let kern = if j == 0 {
                        ground_kernel(r, dist, ground)
                    } else {
                        (-r * dist).exp() / (2.0 * r)
                    } * *wt;
                    for (i, &bv) in b.iter().enumerate() {
                        mat[(a, p * pp + i)] += kern * bv;
                    }
                }
            }
        }
        Ok(mats)
    }

    /// Projections `d_j(x_n) = ∫ φ_j(x′) g(x′, x_n) dx′`.
    fn project(&self, g: &[Complex64]) -> Vec<DVector<Complex64>> {
        let nt = self.grid.transverse.len();
        let nl = self.grid.longitudinal.len();
        self.phi
            .iter()
            .map(|pj| {
                DVector::from_fn(nl, |l, _| {
                    (0..nt)
                        .map(|t| g[self.grid.index(l, t)] * (pj[t] * self.grid.transverse.weights[t]))
                        .sum()
                })
            })
            .collect()
    }

    fn apply_modes(&self, g: &[Complex64], k: Complex64, ground: GroundKernel) -> Result<ModeApplication> {
        if g.len() != self.grid.len() {
            return Err(Error::InvalidInput(format!(
                "grid field has {} values, grid has {} nodes",
                g.len(),
                self.grid.len()
            )));
        }
        if ground == GroundKernel::Full && k == ZERO {
            return Err(Error::SingularArgument("A(k) at k = 0".into()));
        }
        let mats = self.longitudinal_matrices(k, ground)?;
        let proj = self.project(g);
        let components: Vec<Vec<Complex64>> = mats
            .iter()
            .zip(&proj)
            .map(|(m, d)| (m * d).iter().copied().collect())
            .collect();
        let nt = self.grid.transverse.len();
        let mut field = vec![ZERO; self.grid.len()];
        let last = components.len() - 1;
        let mut tail: f64 = 0.0;
        for (j, comp) in components.iter().enumerate() {
            for (l, &c) in comp.iter().enumerate() {
                for t in 0..nt {
                    let v = c * self.phi[j][t];
                    field[self.grid.index(l, t)] += v;
                    if j == last {
                        tail = tail.max(v.norm());
                    }
                }
            }
        }
        Ok(ModeApplication {
            field,
            components,
            tail_estimate: tail,
        })
    }

    /// The truncated mode-sum resolvent `A(k)` applied to a grid field.
    pub fn apply_a(&self, g: &[Complex64], k: Complex64) -> Result<ModeApplication> {
        self.apply_modes(g, k, GroundKernel::Full)
    }

    /// `R̃(k) g = A(k) g − φ₀(x′) ⟨g φ₀⟩ / 2k`.
    pub fn apply_r_tilde(&self, g: &[Complex64], k: Complex64) -> Result<ModeApplication> {
        self.apply_modes(g, k, GroundKernel::Regularized)
    }

    /// `T_ε(k) g = 𝓛_ε R̃(k) g`, with `𝓛_ε = W / ε`.
    pub fn apply_t(&self, g: &[Complex64], k: Complex64) -> Result<Vec<Complex64>> {
        let r = self.apply_r_tilde(g, k)?;
        let inv = 1.0 / self.pert.epsilon;
        Ok(r.field
            .iter()
            .zip(&self.potential)
            .map(|(v, w)| v * w * inv)
            .collect())
    }

    /// `⟨f φ₀⟩` for a grid field.
    pub fn pair_with_ground(&self, g: &[Complex64]) -> Complex64 {
        (0..self.grid.len())
            .map(|i| {
                let t = i % self.grid.transverse.len();
                g[i] * (self.phi[0][t] * self.grid.weight(i))
            })
            .sum()
    }

    /// `(U 𝕃 v)_i(a) = Σ_j U_ij(a) (L_j v_j)(a)`.
    fn coupled_apply(&self, mats: &[DMatrix<Complex64>], v: &[DVector<Complex64>]) -> Vec<DVector<Complex64>> {
        let nl = self.grid.longitudinal.len();
        let nm = self.modes.len();
        let lv: Vec<DVector<Complex64>> = mats.iter().zip(v).map(|(m, x)| m * x).collect();
        let mut out = vec![DVector::from_element(nl, ZERO); nm];
        for a in 0..nl {
            let u = &self.coupling[a];
            for i in 0..nm {
                let mut acc = ZERO;
                for j in 0..nm {
                    acc += u[(i, j)] * lv[j][a];
                }
                out[i][a] = acc;
            }
        }
        out
    }

    fn ground_pairing(&self, z0: &DVector<Complex64>) -> Complex64 {
        z0.iter()
            .zip(&self.grid.longitudinal.weights)
            .map(|(z, w)| z * *w)
            .sum()
    }

    /// `F_ε(k) = ⟨φ₀ (I + εT_ε(k))^{−1} 𝓛_ε φ₀⟩`.
    pub fn f_eps(&self, k: Complex64) -> Result<FEvaluation> {
        self.f_eps_with(k, self.cfg.mode)
    }

    pub fn f_eps_with(&self, k: Complex64, mode: SolveMode) -> Result<FEvaluation> {
        let mats = self.longitudinal_matrices(k, GroundKernel::Regularized)?;
        let nl = self.grid.longitudinal.len();
        let nm = self.modes.len();
        let rhs: Vec<DVector<Complex64>> = (0..nm)
            .map(|i| DVector::from_fn(nl, |a, _| self.coupling[a][(i, 0)]))
            .collect();
        let eps = self.pert.epsilon;
        match mode {
            SolveMode::Series(order) => {
                let mut terms = Vec::with_capacity(order);
                let mut v = rhs;
                terms.push(self.ground_pairing(&v[0]));
                for m in 1..order {
                    v = self.coupled_apply(&mats, &v);
                    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                    let t = self.ground_pairing(&v[0]) * sign;
                    if m >= 2 {
                        let prev = terms[m - 1].norm();
                        if prev > 0.0 && t.norm() >= prev {
                            return Err(Error::SeriesDivergence(format!(
                                "term {m} has magnitude {:.3e} >= {:.3e}",
                                t.norm(),
                                prev
                            )));
                        }
                    }
                    terms.push(t);
                }
                let scaled: Complex64 = terms.iter().sum();
                Ok(FEvaluation {
                    value: scaled / eps,
                    scaled,
                    terms,
                })
            }
            SolveMode::Direct => {
                let size = nm * nl;
                let mut a = DMatrix::from_element(size, size, ZERO);
                for i in 0..nm {
                    for ia in 0..nl {
                        let row = i * nl + ia;
                        let u = &self.coupling[ia];
                        for j in 0..nm {
                            let uij = u[(i, j)];
                            if uij == ZERO {
                                continue;
                            }
                            let lj = &mats[j];
                            for jb in 0..nl {
                                a[(row, j * nl + jb)] += uij * lj[(ia, jb)];
                            }
                        }
                        a[(row, row)] += 1.0;
                    }
                }
                let b = DVector::from_fn(size, |r, _| rhs[r / nl][r % nl]);
                let z = a
                    .lu()
                    .solve(&b)
                    .ok_or_else(|| Error::SingularSystem(format!("(I + εT) at k = {k}")))?;
                if z.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                    return Err(Error::SingularSystem(format!("non-finite solution at k = {k}")));
                }
                let z0 = DVector::from_fn(nl, |a, _| z[a]);
                let scaled = self.ground_pairing(&z0);
                Ok(FEvaluation {
                    value: scaled / eps,
                    scaled,
                    terms: Vec::new(),
                })
            }
        }
    }

    /// Solves `2k + εF_ε(k) = 0` by complex secant iteration.
    pub fn solve(&self) -> Result<ThresholdSolution> {
        let g = |k: Complex64| -> Result<(Complex64, FEvaluation)> {
            let f = self.f_eps(k)?;
            Ok((2.0 * k + f.scaled, f))
        };
        let k_star = Complex64::new(self.pert.k_scale, 0.0);
        let k0 = -0.5 * self.f_eps(k_star)?.scaled;
        let tol = self.cfg.tol_k.unwrap_or(1e-14 * k0.norm().max(1.0));
        let mut trace: Vec<(Complex64, f64)> = Vec::new();

        let (mut g0, mut f0) = g(k0)?;
        let mut kprev = k0;
        trace.push((k0, g0.norm()));
        let finish = |k: Complex64, gval: Complex64, f: FEvaluation, iters: usize| {
            self.finish(k, gval.norm(), f.value, tol, iters)
        };
        if g0.norm() < tol {
            return Ok(finish(k0, g0, f0, 0));
        }
        let mut kcur = k0 - 0.5 * g0;
        for it in 1..=self.cfg.max_iter {
            let (g1, f1) = g(kcur)?;
            trace.push((kcur, g1.norm()));
            if g1.norm() < tol {
                return Ok(finish(kcur, g1, f1, it));
            }
            let denom = g1 - g0;
            let step = if denom.norm() > 0.0 && denom.re.is_finite() && denom.im.is_finite() {
                g1 * (kcur - kprev) / denom
            } else {
                // damped fixed point k ← −εF(k)/2
                0.5 * g1
            };
            kprev = kcur;
            g0 = g1;
            f0 = f1;
            kcur -= step;
        }
        let _ = f0;
        let tail: Vec<String> = trace
            .iter()
            .rev()
            .take(5)
            .map(|(k, r)| format!("k={k:.6e} |G|={r:.3e}"))
            .collect();
        Err(Error::NoConvergence {
            iterations: self.cfg.max_iter,
            trace: tail.join("; "),
        })
    }

    fn finish(&self, k: Complex64, residual: f64, f_value: Complex64, tol: f64, iterations: usize) -> ThresholdSolution {
        let tol_sign = (10.0 * tol).max(1e-12);
        let verdict = if k.re > tol_sign {
            Verdict::Exists
        } else if k.re < -tol_sign {
            Verdict::Absent
        } else {
            Verdict::Indeterminate
        };
        let mu0 = self.mu0();
        ThresholdSolution {
            k,
            verdict,
            eigenvalue: (verdict == Verdict::Exists).then(|| mu0 - k * k),
            mu0,
            epsilon: self.pert.epsilon,
            f_value,
            residual,
            tol_k: tol,
            tol_sign,
            iterations,
            mode: self.cfg.mode,
        }
    }
}

/// `expm1(z)` for complex `z`, accurate near zero.
pub(crate) fn expm1(z: Complex64) -> Complex64 {
    let (x, y) = (z.re, z.im);
    let half = (0.5 * y).sin();
    Complex64::new(x.exp_m1() * y.cos() - 2.0 * half * half, x.exp() * y.sin())
}

fn ground_kernel(k: Complex64, dist: f64, kind: GroundKernel) -> Complex64 {
    match kind {
        GroundKernel::Full => (-k * dist).exp() / (2.0 * k),
        GroundKernel::Regularized if k == ZERO => Complex64::new(-0.5 * dist, 0.0),
        GroundKernel::Regularized => expm1(-k * dist) / (2.0 * k),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sym_strip() -> CrossSection {
        CrossSection::interval(-PI / 2.0, PI / 2.0).unwrap()
    }

    fn box_solver(amp: Complex64, h: f64, alpha: f64, cfg: DiscretizationConfig) -> ThresholdSolver {
        let v = PotentialSpec::boxed(amp, &[0.5, 0.5]).unwrap();
        let p = ScaledPotential::new(v, h, alpha).unwrap();
        ThresholdSolver::new(&sym_strip(), Perturbation::shrinking(&p), cfg).unwrap()
    }

    fn small_cfg() -> DiscretizationConfig {
        DiscretizationConfig {
            j_max: 6,
            nodes: 10,
            ..Default::default()
        }
    }

    #[test]
    fn expm1_small_and_large() {
        let z = c(1e-12, -2e-12);
        assert!((expm1(z) - z).norm() < 1e-23);
        let z = c(0.7, -1.3);
        assert!((expm1(z) - (z.exp() - 1.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_field_maps_to_zero() {
        let s = box_solver(c(-1.0, 0.0), 0.1, 0.0, small_cfg());
        let g = vec![ZERO; s.grid().len()];
        let a = s.apply_a(&g, c(0.05, 0.0)).unwrap();
        assert!(a.field.iter().all(|v| *v == ZERO));
        assert!(s.apply_t(&g, c(0.05, 0.0)).unwrap().iter().all(|v| *v == ZERO));
    }

    #[test]
    fn apply_a_rejects_zero_k() {
        let s = box_solver(c(-1.0, 0.0), 0.1, 0.0, small_cfg());
        let g = vec![c(1.0, 0.0); s.grid().len()];
        assert!(matches!(s.apply_a(&g, ZERO), Err(Error::SingularArgument(_))));
        // the regularized operator is fine at k = 0
        assert!(s.apply_r_tilde(&g, ZERO).is_ok());
    }

    #[test]
    fn r_tilde_equals_a_on_fields_orthogonal_to_ground() {
        let s = box_solver(c(-1.0, 0.0), 0.1, 0.0, small_cfg());
        // odd in x1 about 0 against even φ₀ on a symmetric grid: ⟨g φ₀⟩ = 0
        let g = s.grid().sample(|x| c(x[0] * (1.0 + x[1]), 0.0));
        assert!(s.pair_with_ground(&g).norm() < 1e-18);
        let k = c(0.05, 0.01);
        let a = s.apply_a(&g, k).unwrap();
        let r = s.apply_r_tilde(&g, k).unwrap();
        for (x, y) in a.field.iter().zip(&r.field) {
            assert!((x - y).norm() < 1e-15);
        }
    }

    #[test]
    fn rank_one_split_carries_ground_mode_factor() {
        let s = box_solver(c(-1.0, 0.0), 0.1, 0.0, small_cfg());
        let g = s.grid().sample(|x| c(1.0 + x[0] - 3.0 * x[1] * x[1], 0.2 * x[1]));
        let k = c(0.03, -0.01);
        let a = s.apply_a(&g, k).unwrap();
        let r = s.apply_r_tilde(&g, k).unwrap();
        let pair = s.pair_with_ground(&g);
        for i in 0..s.grid().len() {
            let x = s.grid().point(i);
            let want = s.modes()[0].value(&x[..1]) * pair / (2.0 * k);
            assert!((a.field[i] - r.field[i] - want).norm() < 1e-12 * want.norm().max(1e-3));
        }
    }

    #[test]
    fn regularized_kernel_limit() {
        let s = box_solver(c(-1.0, 0.0), 0.1, 0.0, small_cfg());
        let g = s.grid().sample(|x| c(1.0 + x[0], x[1]));
        let r_small = s.apply_r_tilde(&g, c(1e-6, 0.0)).unwrap();
        let r_zero = s.apply_r_tilde(&g, ZERO).unwrap();
        for (x, y) in r_small.components[0].iter().zip(&r_zero.components[0]) {
            assert!((x - y).norm() < 1e-4 * y.norm().max(1e-12) + 1e-12);
        }
    }

    #[test]
    fn single_node_mass_matches_independent_product_weights() {
        // J_max = 1: modes φ₀, φ₁. Value at a node from a unit mass at the same node.
        let cfg = DiscretizationConfig {
            j_max: 1,
            nodes: 6,
            ..Default::default()
        };
        let s = box_solver(c(-1.0, 0.0), 0.2, 0.0, cfg);
        let grid = s.grid();
        let l = 2;
        let t = 3;
        let idx = grid.index(l, t);
        let mut g = vec![ZERO; grid.len()];
        g[idx] = c(1.0, 0.0);
        let k = c(0.05, 0.0);
        let out = s.apply_a(&g, k).unwrap().field[idx];

        // independent: ∫ κ(x_l − s) ℓ_l(s) ds by composite Simpson on 20000 cells
        let rule = &grid.longitudinal;
        let x = rule.nodes[l];
        let (lo, hi) = (rule.edges[0], rule.edges[1]);
        let weight_for = |kap: &dyn Fn(f64) -> Complex64| -> Complex64 {
            let cells = 20000;
            let simpson = |a: f64, b: f64| -> Complex64 {
                let hh = (b - a) / cells as f64;
                let mut acc = ZERO;
                let mut basis = vec![0.0; 6];
                for i in 0..=cells {
                    let s = a + i as f64 * hh;
                    rule.lagrange_basis(0, s, &mut basis);
                    let wgt = if i == 0 || i == cells { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                    acc += kap((x - s).abs()) * basis[l] * wgt;
                }
                acc * (hh / 3.0)
            };
            simpson(lo, x) + simpson(x, hi)
        };
        let k1 = s.cross_section().kj(1, k).unwrap();
        let w0 = weight_for(&|d| (-k * d).exp() / (2.0 * k));
        let w1 = weight_for(&|d| (-k1 * d).exp() / (2.0 * k1));
        let xt = &grid.transverse.points[t];
        let wt = grid.transverse.weights[t];
        let p0 = s.modes()[0].value(xt);
        let p1 = s.modes()[1].value(xt);
        let want = p0 * p0 * wt * w0 + p1 * p1 * wt * w1;
        assert!((out - want).norm() < 1e-9 * want.norm(), "{out} vs {want}");
    }

    #[test]
    fn leading_term_of_f_is_weighted_moment() {
        let h = 0.1;
        let s = box_solver(c(-1.0, 0.0), h, 0.0, DiscretizationConfig {
            mode: SolveMode::Series(1),
            ..small_cfg()
        });
        let f = s.f_eps(c(0.003, 0.0)).unwrap();
        let v = PotentialSpec::boxed(c(-1.0, 0.0), &[0.5, 0.5]).unwrap();
        let m = v.weighted_moment_exact(&sym_strip(), h, 32).unwrap();
        let beta = crate::potential::beta(2, h).unwrap();
        assert!((f.value - m / beta).norm() < 1e-14);
    }

    #[test]
    fn zero_potential_gives_zero_root() {
        let v = PotentialSpec::zero(2).unwrap();
        let p = ScaledPotential::new(v, 0.1, 0.0).unwrap();
        let s = ThresholdSolver::new(&sym_strip(), Perturbation::shrinking(&p), small_cfg()).unwrap();
        assert_eq!(s.f_eps(c(0.01, 0.0)).unwrap().value, ZERO);
        let sol = s.solve().unwrap();
        assert_eq!(sol.k, ZERO);
        assert_eq!(sol.verdict, Verdict::Indeterminate);
        assert!(sol.eigenvalue.is_none());
    }

    #[test]
    fn attractive_box_binds_repulsive_does_not() {
        let s = box_solver(c(-1.0, 0.0), 0.1, 0.0, small_cfg());
        let sol = s.solve().unwrap();
        assert_eq!(sol.verdict, Verdict::Exists);
        assert!(sol.residual < sol.tol_k);
        let e = sol.eigenvalue.unwrap();
        assert!(e.re < 1.0);
        assert_eq!(e, 1.0 - sol.k * sol.k);

        let s = box_solver(c(1.0, 0.0), 0.1, 0.0, small_cfg());
        assert_eq!(s.solve().unwrap().verdict, Verdict::Absent);
    }

    #[test]
    fn series_divergence_is_reported() {
        // strong coupling: ε‖T‖ well above one
        let s = box_solver(c(-200.0, 0.0), 0.5, 0.9, DiscretizationConfig {
            mode: SolveMode::Series(8),
            ..small_cfg()
        });
        assert!(matches!(s.f_eps(c(0.3, 0.0)), Err(Error::SeriesDivergence(_))));
        assert!(s.f_eps_with(c(0.3, 0.0), SolveMode::Direct).is_ok());
    }

    #[test]
    fn config_validation() {
        let mut cfg = DiscretizationConfig::default();
        cfg.j_max = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = DiscretizationConfig::default();
        cfg.tol_k = Some(0.0);
        assert!(cfg.validate().is_err());
        let mut cfg = DiscretizationConfig::default();
        cfg.mode = SolveMode::Series(0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn direct_system_matches_dense_grid_nystrom() {
        // Reference: assemble (I + W R̃) on the full grid and solve there.
        let s = box_solver(c(-2.0, 0.5), 0.3, 0.5, small_cfg());
        let k = c(0.04, 0.01);
        let n = s.grid().len();
        let mut cols = Vec::with_capacity(n);
        for b in 0..n {
            let mut e = vec![ZERO; n];
            e[b] = c(1.0, 0.0);
            cols.push(s.apply_r_tilde(&e, k).unwrap().field);
        }
        let w = &s.potential;
        let mut m = DMatrix::from_element(n, n, ZERO);
        for b in 0..n {
            for a in 0..n {
                m[(a, b)] = w[a] * cols[b][a];
            }
            m[(b, b)] += 1.0;
        }
        let phi0 = s.grid().sample(|x| c(s.modes()[0].value(&x[..1]), 0.0));
        let rhs = DVector::from_fn(n, |a, _| w[a] * phi0[a]);
        let sol = m.lu().solve(&rhs).unwrap();
        let dense = s.pair_with_ground(sol.as_slice());
        let reduced = s.f_eps(k).unwrap().scaled;
        assert!((dense - reduced).norm() < 1e-12 * reduced.norm(), "{dense} vs {reduced}");
    }

    fn separable_box_solver(h: f64, cfg: DiscretizationConfig) -> ThresholdSolver {
        let v = PotentialSpec::separable_strip(
            "box",
            c(-1.0, 0.0),
            crate::potential::AxisProfile::indicator(-0.5, 0.5),
        )
        .unwrap();
        let p = ScaledPotential::new(v, h, 0.0).unwrap();
        ThresholdSolver::new(&sym_strip(), Perturbation::shrinking(&p), cfg).unwrap()
    }

    #[test]
    fn separable_strip_components_match_closed_form() {
        let h = 0.1;
        let k = c(0.05, 0.0);
        let s = separable_box_solver(h, DiscretizationConfig {
            j_max: 5,
            nodes: 16,
            ..Default::default()
        });
        let g = s.grid().sample(|x| s.perturbation().value(x) * s.modes()[0].value(&x[..1]));
        let r = s.apply_r_tilde(&g, k).unwrap();
        // ⟨φ_j v_h φ₀⟩′ by an independent 200-node rule on the smooth piece
        let gl = GaussLegendre::new(200);
        let pair = |j: usize| -> f64 {
            -gl.integrate(-h / 2.0, h / 2.0, |x| s.modes()[j].value(&[x]) * s.modes()[0].value(&[x]))
        };
        let xs = &s.grid().longitudinal.nodes;
        let m0 = pair(0);
        for (l, &x2) in xs.iter().enumerate() {
            let b0 = (((1.0 - (-k * h).exp() * (k * x2).cosh()) / k) - h) / k;
            assert!((r.components[0][l] - b0 * m0).norm() < 1e-10);
        }
        for j in 1..=5 {
            let kj = s.cross_section().kj(j, k).unwrap();
            let mj = pair(j);
            for (l, &x2) in xs.iter().enumerate() {
                let bj = 1.0 - (-kj * h).exp() * (kj * x2).cosh();
                assert!((r.components[j][l] - bj / (kj * kj) * mj).norm() < 1e-10, "j = {j}");
            }
        }
    }

    #[test]
    fn apply_a_ground_term_adds_back_rank_one_part() {
        let h = 0.1;
        let k = c(0.05, 0.02);
        let s = separable_box_solver(h, DiscretizationConfig {
            j_max: 2,
            nodes: 12,
            ..Default::default()
        });
        let g = s.grid().sample(|x| s.perturbation().value(x) * s.modes()[0].value(&x[..1]));
        let a = s.apply_a(&g, k).unwrap();
        let gl = GaussLegendre::new(200);
        let m0 = -gl.integrate(-h / 2.0, h / 2.0, |x| s.modes()[0].value(&[x]).powi(2));
        for (l, &x2) in s.grid().longitudinal.nodes.iter().enumerate() {
            let b0 = (((1.0 - (-k * h).exp() * (k * x2).cosh()) / k) - h) / k;
            assert!((a.components[0][l] - (b0 + h / k) * m0).norm() < 1e-10);
        }
    }

    fn fixture_f(j_max: usize, nodes: usize, mode: SolveMode) -> Complex64 {
        let s = box_solver(c(-1.0, 0.0), 0.1, 0.0, DiscretizationConfig {
            j_max,
            nodes,
            mode,
            ..Default::default()
        });
        s.f_eps(c(0.003, 0.0)).unwrap().value
    }

    #[test]
    fn nystrom_node_doubling_is_consistent() {
        let f1 = fixture_f(20, 32, SolveMode::Direct);
        let f2 = fixture_f(20, 64, SolveMode::Direct);
        assert!((f1 - f2).norm() <= 1e-8 * f2.norm(), "{f1} vs {f2}");
    }

    #[test]
    fn mode_truncation_change_decreases() {
        let f10 = fixture_f(10, 16, SolveMode::Direct);
        let f20 = fixture_f(20, 16, SolveMode::Direct);
        let f40 = fixture_f(40, 16, SolveMode::Direct);
        let d1 = (f20 - f10).norm();
        let d2 = (f40 - f20).norm();
        assert!(d2 < d1, "{d1} then {d2}");
        assert!(d2 < 1e-3 * f40.norm());
    }

    #[test]
    fn series_agrees_with_direct_at_fixture() {
        let s = box_solver(c(-1.0, 0.0), 0.1, 0.0, DiscretizationConfig::default());
        let k = c(0.003, 0.0);
        let series = s.f_eps_with(k, SolveMode::Series(4)).unwrap();
        let direct = s.f_eps_with(k, SolveMode::Direct).unwrap();
        assert!((series.value - direct.value).norm() <= 1e-6 * direct.value.norm());
        // the gap is below the first neglected term, estimated by the last two kept
        let t = &series.terms;
        let next = t[3].norm() * t[3].norm() / t[2].norm();
        assert!((series.scaled - direct.scaled).norm() <= 10.0 * next);
    }

    fn grid_norm_of_t(s: &ThresholdSolver, k: Complex64) -> f64 {
        // weighted L² operator norm: ‖D^{1/2} T D^{-1/2}‖₂
        let n = s.grid().len();
        let sw: Vec<f64> = (0..n).map(|i| s.grid().weight(i).sqrt()).collect();
        let mut m = DMatrix::from_element(n, n, ZERO);
        for b in 0..n {
            let mut e = vec![ZERO; n];
            e[b] = c(1.0 / sw[b], 0.0);
            let col = s.apply_t(&e, k).unwrap();
            for a in 0..n {
                m[(a, b)] = col[a] * sw[a];
            }
        }
        m.singular_values().max()
    }

    #[test]
    fn operator_norm_of_t_is_bounded_in_h() {
        let k = c(0.05, 0.0);
        let norms: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&h| grid_norm_of_t(&box_solver(c(-1.0, 0.0), h, 0.0, small_cfg()), k))
            .collect();
        // measured: about 2.2e-2, 1.2e-2, 5.8e-3
        for w in norms.windows(2) {
            assert!(w[1] <= 1.05 * w[0], "{norms:?}");
        }
        assert!(norms[0] < 1.0);
    }

    #[test]
    fn complex_potential_verdict_follows_real_part() {
        for &(amp, want) in &[(c(-1.0, 0.3), Verdict::Exists), (c(1.0, 0.3), Verdict::Absent)] {
            let sol = box_solver(amp, 0.1, 0.0, small_cfg()).solve().unwrap();
            assert_eq!(sol.verdict, want, "{amp}");
            assert!(sol.k.im != 0.0);
        }
    }
}
