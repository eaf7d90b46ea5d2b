//! Compactly supported perturbing potentials, their shrinking scaling and moments.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cross_section::CrossSection;
use crate::error::{Error, Result};
use crate::quadrature::{panel_edges, PanelRule, TensorRule};

/// Default Gauss–Legendre nodes per panel per axis.
pub const DEFAULT_NODES: usize = 32;

/// `β_n(h)`: `h sqrt|ln h|` in the strip, `h` for n ≥ 3.
pub fn beta(n: usize, h: f64) -> Result<f64> {
    check_h(h)?;
    Ok(match n {
        2 => h * h.ln().abs().sqrt(),
        _ => h,
    })
}

/// `ε(h) = h^{-α} β_n(h)`.
pub fn epsilon(n: usize, h: f64, alpha: f64) -> Result<f64> {
    Ok(h.powf(-alpha) * beta(n, h)?)
}

fn check_h(h: f64) -> Result<()> {
    if h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("h = {h} must lie in (0, 1)")))
    }
}

/// A polynomial `Σ c_i t^i` on the open interval `(lo, hi)`, zero elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub coeffs: Vec<f64>,
}

impl Piece {
    pub fn constant(lo: f64, hi: f64, value: f64) -> Self {
        Self {
            lo,
            hi,
            coeffs: vec![value],
        }
    }

    fn eval(&self, t: f64) -> f64 {
        if t > self.lo && t < self.hi {
            self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
        } else {
            0.0
        }
    }

    /// `∫ t^p · piece(t) dt`, exactly.
    fn moment(&self, p: i32) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let e = i as i32 + p + 1;
                c * (self.hi.powi(e) - self.lo.powi(e)) / e as f64
            })
            .sum()
    }
}

/// Piecewise-polynomial profile along one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisProfile {
    pub pieces: Vec<Piece>,
}

impl AxisProfile {
    pub fn indicator(lo: f64, hi: f64) -> Self {
        Self {
            pieces: vec![Piece::constant(lo, hi, 1.0)],
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.pieces.iter().map(|p| p.eval(t)).sum()
    }

    pub fn moment(&self, p: i32) -> f64 {
        self.pieces.iter().map(|pc| pc.moment(p)).sum()
    }

    fn support(&self) -> (f64, f64) {
        let lo = self.pieces.iter().map(|p| p.lo).fold(f64::INFINITY, f64::min);
        let hi = self.pieces.iter().map(|p| p.hi).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    fn breaks(&self) -> Vec<f64> {
        self.pieces.iter().flat_map(|p| [p.lo, p.hi]).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.pieces.is_empty() {
            return Err(Error::InvalidInput("axis profile has no pieces".into()));
        }
        for p in &self.pieces {
            if !(p.hi > p.lo) || !p.lo.is_finite() || !p.hi.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "piece ({}, {}) must be a bounded interval",
                    p.lo, p.hi
                )));
            }
        }
        Ok(())
    }
}

type Evaluator = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;

#[derive(Clone)]
enum Profile {
    /// Product of per-axis profiles; moments are exact.
    Tensor(Vec<AxisProfile>),
    Custom(Evaluator),
}

/// A bounded, compactly supported, possibly complex-valued profile on ℝⁿ.
///
/// The support box and the discontinuity lines are declared up front so that
/// quadrature panels can be aligned with them.
#[derive(Clone)]
pub struct PotentialSpec {
    name: String,
    amplitude: Complex64,
    profile: Profile,
    support: Vec<(f64, f64)>,
    breaks: Vec<Vec<f64>>,
}

impl fmt::Debug for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialSpec")
            .field("name", &self.name)
            .field("amplitude", &self.amplitude)
            .field("support", &self.support)
            .finish_non_exhaustive()
    }
}

impl PotentialSpec {
    /// `amplitude · Π_q profile_q(t_q)`.
    pub fn tensor(name: &str, amplitude: Complex64, axes: Vec<AxisProfile>) -> Result<Self> {
        if !(2..=3).contains(&axes.len()) {
            return Err(Error::InvalidInput(format!(
                "potential dimension must be 2 or 3, got {}",
                axes.len()
            )));
        }
        for a in &axes {
            a.validate()?;
        }
        let support = axes.iter().map(AxisProfile::support).collect();
        let breaks = axes.iter().map(AxisProfile::breaks).collect();
        Ok(Self {
            name: name.to_string(),
            amplitude,
            profile: Profile::Tensor(axes),
            support,
            breaks,
        })
    }

    /// Constant `amplitude` on the centred box `Π_q (−a_q, a_q)`.
    pub fn boxed(amplitude: Complex64, half_widths: &[f64]) -> Result<Self> {
        let axes = half_widths
            .iter()
            .map(|&a| AxisProfile::indicator(-a, a))
            .collect();
        Self::tensor("box", amplitude, axes)
    }

    /// Strip potential `v(t₁) ṽ(t₂)` with `ṽ` the indicator of `|t₂| < 1`.
    pub fn separable_strip(name: &str, amplitude: Complex64, v: AxisProfile) -> Result<Self> {
        Self::tensor(name, amplitude, vec![v, AxisProfile::indicator(-1.0, 1.0)])
    }

    /// `amplitude · t₁` on `|t₁| < a`, times the indicator of `|t₂| < b`.
    pub fn odd_linear(amplitude: Complex64, a: f64, b: f64) -> Result<Self> {
        let v = AxisProfile {
            pieces: vec![Piece {
                lo: -a,
                hi: a,
                coeffs: vec![0.0, 1.0],
            }],
        };
        Self::tensor("odd_linear", amplitude, vec![v, AxisProfile::indicator(-b, b)])
    }

    /// An arbitrary evaluator with a declared support box and discontinuity lines.
    pub fn custom<F>(
        name: &str,
        support: Vec<(f64, f64)>,
        breaks: Vec<Vec<f64>>,
        f: F,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> Complex64 + Send + Sync + 'static,
    {
        if !(2..=3).contains(&support.len()) || breaks.len() != support.len() {
            return Err(Error::InvalidInput(
                "custom potential needs 2 or 3 axes and one break list per axis".into(),
            ));
        }
        if support.iter().any(|&(lo, hi)| !(hi > lo)) {
            return Err(Error::InvalidInput("support box has an empty side".into()));
        }
        Ok(Self {
            name: name.to_string(),
            amplitude: Complex64::new(1.0, 0.0),
            profile: Profile::Custom(Arc::new(f)),
            support,
            breaks,
        })
    }

    pub fn zero(dim: usize) -> Result<Self> {
        Self::boxed(Complex64::new(0.0, 0.0), &vec![0.5; dim])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.support.len()
    }

    pub fn amplitude(&self) -> Complex64 {
        self.amplitude
    }

    /// The same profile multiplied by `c`.
    pub fn scaled(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        match &self.profile {
            Profile::Tensor(_) => out.amplitude *= c,
            Profile::Custom(f) => {
                let f = f.clone();
                out.profile = Profile::Custom(Arc::new(move |t: &[f64]| c * f(t)));
            }
        }
        out
    }

    pub fn support(&self) -> &[(f64, f64)] {
        &self.support
    }

    pub fn breaks(&self) -> &[Vec<f64>] {
        &self.breaks
    }

    pub fn value(&self, t: &[f64]) -> Complex64 {
        if t
            .iter()
            .zip(&self.support)
            .any(|(&x, &(lo, hi))| x < lo || x > hi)
        {
            return Complex64::new(0.0, 0.0);
        }
        match &self.profile {
            Profile::Tensor(axes) => {
                self.amplitude * axes.iter().zip(t).map(|(a, &x)| a.eval(x)).product::<f64>()
            }
            Profile::Custom(f) => f(t),
        }
    }

    pub fn is_real(&self) -> bool {
        match &self.profile {
            Profile::Tensor(_) => self.amplitude.im == 0.0,
            Profile::Custom(_) => false,
        }
    }

    /// `v` for strip potentials of the form `v(t₁) 1{|t₂| < 1}`, amplitude folded in.
    pub fn strip_factor(&self) -> Option<(Complex64, &AxisProfile)> {
        match &self.profile {
            Profile::Tensor(axes) if axes.len() == 2 => {
                let t2 = &axes[1];
                let unit = t2.pieces.len() == 1
                    && t2.pieces[0].lo == -1.0
                    && t2.pieces[0].hi == 1.0
                    && t2.pieces[0].coeffs == [1.0];
                unit.then_some((self.amplitude, &axes[0]))
            }
            _ => None,
        }
    }

    /// Panel-aligned tensor rule over `scale · Q̂`.
    pub fn support_rule(&self, scale: f64, nodes: usize) -> TensorRule {
        let axes: Vec<PanelRule> = (0..self.dimension()).map(|q| self.axis_rule(q, scale, nodes)).collect();
        TensorRule::new(&axes)
    }

    pub(crate) fn axis_rule(&self, q: usize, scale: f64, nodes: usize) -> PanelRule {
        let (lo, hi) = self.support[q];
        let breaks: Vec<f64> = self.breaks[q].iter().map(|b| scale * b).collect();
        PanelRule::new(panel_edges(scale * lo, scale * hi, &breaks), nodes)
    }

    /// `∫_{Q̂} V · weight` by panel-wise tensor Gauss–Legendre.
    pub fn quadrature_moment<W: Fn(&[f64]) -> f64>(&self, weight: W, nodes: usize) -> Complex64 {
        let rule = self.support_rule(1.0, nodes);
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(t, &w)| self.value(t) * (w * weight(t)))
            .sum()
    }

    /// The moments consumed by the asymptotic formulas. Exact for tensor profiles.
    pub fn moments(&self, cs: &CrossSection) -> Result<MomentSet> {
        let n = cs.dimension();
        if n != self.dimension() {
            return Err(Error::InvalidInput(format!(
                "potential is {}-dimensional but the waveguide is {n}-dimensional",
                self.dimension()
            )));
        }
        let (m0, first): (Complex64, Vec<Complex64>) = match &self.profile {
            Profile::Tensor(axes) => {
                let base: Vec<f64> = axes.iter().map(|a| a.moment(0)).collect();
                let m0 = self.amplitude * base.iter().product::<f64>();
                let first = (0..n - 1)
                    .map(|q| {
                        let prod: f64 = (0..n)
                            .map(|r| if r == q { axes[r].moment(1) } else { base[r] })
                            .product();
                        self.amplitude * prod
                    })
                    .collect();
                (m0, first)
            }
            Profile::Custom(_) => {
                let m0 = self.quadrature_moment(|_| 1.0, DEFAULT_NODES);
                let first = (0..n - 1)
                    .map(|q| self.quadrature_moment(|t| t[q], DEFAULT_NODES))
                    .collect();
                (m0, first)
            }
        };
        let grad = cs.linear_profile();
        let m1 = grad.coeffs.iter().zip(&first).map(|(g, f)| f * *g).sum();
        let strip = self.strip_factor().map(|(amp, v)| StripMoments {
            m0: amp * v.moment(0),
            m1: amp * v.moment(1),
        });
        Ok(MomentSet {
            m0,
            first,
            m1,
            strip,
        })
    }

    /// Checks that `h · Q̂` fits inside the cross-section.
    pub fn check_inside(&self, cs: &CrossSection, h: f64) -> Result<()> {
        for (q, &(lo, hi)) in cs.intervals().iter().enumerate() {
            let (a, b) = self.support[q];
            if !(h * a > lo && h * b < hi) {
                return Err(Error::Domain(format!(
                    "scaled support ({}, {}) leaves the cross-section ({lo}, {hi}) on axis {}",
                    h * a,
                    h * b,
                    q + 1
                )));
            }
        }
        Ok(())
    }

    /// `∫ V(x/h) φ₀²(x′) dx = hⁿ ∫ V(ξ) φ₀²(hξ′) dξ`.
    pub fn weighted_moment_exact(&self, cs: &CrossSection, h: f64, nodes: usize) -> Result<Complex64> {
        self.check_inside(cs, h)?;
        let n = cs.dimension();
        let phi0 = cs.mode(0);
        let integral = self.quadrature_moment(
            |t| {
                let v = phi0.value(&scaled_transverse(t, h, n)[..n - 1]);
                v * v
            },
            nodes,
        );
        Ok(integral * h.powi(n as i32))
    }

    /// `|⟨φ₀² V_h⟩ − (hⁿ φ₀²(0)⟨V⟩ + 2h^{n+1} φ₀(0)⟨Φ₀V⟩)|`.
    pub fn expansion_remainder(&self, cs: &CrossSection, h: f64, nodes: usize) -> Result<f64> {
        let exact = self.weighted_moment_exact(cs, h, nodes)?;
        let m = self.moments(cs)?;
        let n = cs.dimension() as i32;
        let p0 = cs.phi0_at_origin();
        let two_term = m.m0 * (h.powi(n) * p0 * p0) + m.m1 * (2.0 * h.powi(n + 1) * p0);
        Ok((exact - two_term).norm())
    }
}

fn scaled_transverse(t: &[f64], h: f64, n: usize) -> [f64; 2] {
    let mut out = [0.0; 2];
    for q in 0..n - 1 {
        out[q] = h * t[q];
    }
    out
}

/// Strip moments `⟨v⟩′` and `∫ v(t₁) t₁ dt₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StripMoments {
    pub m0: Complex64,
    pub m1: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSet {
    /// `⟨V⟩`
    pub m0: Complex64,
    /// `⟨t_q V⟩` for each transverse axis q.
    pub first: Vec<Complex64>,
    /// `⟨Φ₀ V⟩`
    pub m1: Complex64,
    pub strip: Option<StripMoments>,
}

/// `h^{-α} V(x/h)`.
#[derive(Debug, Clone)]
pub struct ScaledPotential {
    pub base: PotentialSpec,
    pub h: f64,
    pub alpha: f64,
}

impl ScaledPotential {
    pub fn new(base: PotentialSpec, h: f64, alpha: f64) -> Result<Self> {
        check_h(h)?;
        if !(alpha < 1.0) || !alpha.is_finite() {
            return Err(Error::OutOfScope(format!("alpha = {alpha} must be < 1")));
        }
        Ok(Self { base, h, alpha })
    }

    pub fn amplitude(&self) -> f64 {
        self.h.powf(-self.alpha)
    }

    pub fn value(&self, x: &[f64]) -> Complex64 {
        let t: Vec<f64> = x.iter().map(|xi| xi / self.h).collect();
        self.base.value(&t) * self.amplitude()
    }

    pub fn beta(&self) -> f64 {
        beta(self.base.dimension(), self.h).expect("h validated on construction")
    }

    pub fn epsilon(&self) -> f64 {
        self.amplitude() * self.beta()
    }
}

/// `(∫_{hQ̂} |u|²) / β_n²(h)` for `u = φ₀(x′) exp(−x_n²)`, the concentration
/// bound probed across shrinking `h`.
pub fn concentration_ratio(cs: &CrossSection, q_hat: &PotentialSpec, h: f64, nodes: usize) -> Result<f64> {
    q_hat.check_inside(cs, h)?;
    let n = cs.dimension();
    let phi0 = cs.mode(0);
    let rule = q_hat.support_rule(h, nodes);
    let integral: f64 = rule
        .points
        .iter()
        .zip(&rule.weights)
        .map(|(x, &w)| {
            let u = phi0.value(&x[..n - 1]) * (-x[n - 1] * x[n - 1]).exp();
            w * u * u
        })
        .sum();
    Ok(integral / beta(n, h)?.powi(2))
}
