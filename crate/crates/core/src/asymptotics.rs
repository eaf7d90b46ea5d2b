//! Closed-form predictions of the threshold root `k` and eigenvalue `μ₀ − k²`.
//!
//! All predictors use the sign convention `k = −εF/2` of the threshold
//! equation, so `Re k > 0` means a bound state below `μ₀`.

use std::fmt;

use num_complex::Complex64;
use serde::Serialize;

use crate::cross_section::CrossSection;
use crate::error::{Error, Result};
use crate::potential::{beta, MomentSet, PotentialSpec, DEFAULT_NODES};
use crate::threshold::Verdict;

/// Absolute tolerance for treating a quadrature-computed moment as zero.
pub const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Fixed-support weak coupling `−Δ + hV`.
    DeBaseline,
    Main,
    CriticalAlphaNeg,
    StripCritical,
}

impl Regime {
    pub fn tag(&self) -> &'static str {
        match self {
            Regime::DeBaseline => "de_baseline",
            Regime::Main => "main",
            Regime::CriticalAlphaNeg => "critical_alpha_neg",
            Regime::StripCritical => "strip_critical",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        [
            Regime::DeBaseline,
            Regime::Main,
            Regime::CriticalAlphaNeg,
            Regime::StripCritical,
        ]
        .into_iter()
        .find(|r| r.tag() == tag)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimePrediction {
    pub regime: Regime,
    pub h: f64,
    pub alpha: f64,
    pub k: Complex64,
    /// Always `μ₀ − k²`.
    pub e: Complex64,
    pub verdict: Verdict,
    /// Order of the relative remainder factor.
    pub remainder: String,
}

fn prediction(regime: Regime, h: f64, alpha: f64, mu0: f64, k: Complex64, remainder: &str) -> RegimePrediction {
    RegimePrediction {
        regime,
        h,
        alpha,
        k,
        e: mu0 - k * k,
        verdict: sign_verdict(k.re, 0.0),
        remainder: remainder.to_string(),
    }
}

fn sign_verdict(x: f64, tol: f64) -> Verdict {
    if x > tol {
        Verdict::Exists
    } else if x < -tol {
        Verdict::Absent
    } else {
        Verdict::Indeterminate
    }
}

/// Which rule decided a verdict in [`ConditionReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Sign of `Re⟨V⟩`.
    LeadingMoment,
    /// Sign of `φ₀(0) Re⟨Φ₀V⟩` when `Re⟨V⟩ = 0`.
    FirstMoment,
    /// Sign of `φ₀(0)φ₀′(0) ∫ v t₁` for strips with `⟨v⟩′ = 0`.
    StripFirstMoment,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub rule: Rule,
    /// The quantity whose sign is tested.
    pub quantity: f64,
    pub verdict: Verdict,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rule = match self.rule {
            Rule::LeadingMoment => "leading moment",
            Rule::FirstMoment => "first moment",
            Rule::StripFirstMoment => "strip first moment",
        };
        write!(f, "{} ({rule}: {:.6e})", self.verdict, self.quantity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    /// Decided by `Re⟨V⟩`; indeterminate in the critical case.
    pub leading: Condition,
    /// Present when `Re⟨V⟩ = 0`.
    pub first: Option<Condition>,
    /// Present for separable strip potentials with `⟨v⟩′ = 0`.
    pub strip: Option<Condition>,
}

impl ConditionReport {
    /// The most specific decided condition.
    pub fn decisive(&self) -> &Condition {
        if self.leading.verdict != Verdict::Indeterminate {
            return &self.leading;
        }
        match (&self.first, &self.strip) {
            (Some(c), _) if c.verdict != Verdict::Indeterminate => c,
            (_, Some(c)) => c,
            (Some(c), None) => c,
            (None, None) => &self.leading,
        }
    }
}

/// Sign conditions for existence/absence of the emerging eigenvalue.
pub fn check_conditions(moments: &MomentSet, cs: &CrossSection) -> ConditionReport {
    let p0 = cs.phi0_at_origin();
    let re0 = moments.m0.re;
    // eigenvalue exists when Re⟨V⟩ < 0
    let leading = Condition {
        rule: Rule::LeadingMoment,
        quantity: re0,
        verdict: sign_verdict(-re0, ZERO_TOL),
    };
    let critical = re0.abs() <= ZERO_TOL;
    let first = critical.then(|| {
        let q = p0 * moments.m1.re;
        Condition {
            rule: Rule::FirstMoment,
            quantity: q,
            verdict: sign_verdict(-q, ZERO_TOL),
        }
    });
    let strip = moments.strip.and_then(|s| {
        if s.m0.norm() > ZERO_TOL {
            return None;
        }
        let q = match strip_slope(cs) {
            Some(d0) => p0 * d0 * s.m1.re,
            None => 0.0,
        };
        Some(Condition {
            rule: Rule::StripFirstMoment,
            quantity: q,
            verdict: sign_verdict(-q, ZERO_TOL),
        })
    });
    ConditionReport {
        leading,
        first,
        strip,
    }
}

/// `φ₀′(0)` for a strip, or `None` when the strip is symmetric about the origin.
fn strip_slope(cs: &CrossSection) -> Option<f64> {
    if cs.dimension() != 2 {
        return None;
    }
    let (lo, hi) = cs.intervals()[0];
    if (lo + hi).abs() <= 1e-12 * (hi - lo) {
        None
    } else {
        Some(cs.linear_profile().coeffs[0])
    }
}

/// `(leading, second)` terms of `k = −½h^{n−α}(φ₀²(0)⟨V⟩ + 2hφ₀(0)⟨Φ₀V⟩)`.
pub fn two_term_k(h: f64, alpha: f64, cs: &CrossSection, moments: &MomentSet) -> (Complex64, Complex64) {
    let n = cs.dimension() as f64;
    let p0 = cs.phi0_at_origin();
    let scale = -0.5 * h.powf(n - alpha);
    (moments.m0 * (scale * p0 * p0), first_moment_term(h, alpha, cs, moments))
}

/// `−h^{n+1−α} φ₀(0)⟨Φ₀V⟩`, shared by the two-term law and the critical case.
fn first_moment_term(h: f64, alpha: f64, cs: &CrossSection, moments: &MomentSet) -> Complex64 {
    let n = cs.dimension() as f64;
    -moments.m1 * (h.powf(n + 1.0 - alpha) * cs.phi0_at_origin())
}

/// Baseline `−Δ + hV`: `e = μ₀ − (h²/4)⟨Vφ₀²⟩²`.
pub fn predict_de(h: f64, v: &PotentialSpec, cs: &CrossSection) -> Result<RegimePrediction> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidInput(format!("h = {h} must lie in (0, 1)")));
    }
    let m = v.weighted_moment_exact(cs, 1.0, DEFAULT_NODES)?;
    if m.re > ZERO_TOL {
        return Err(Error::NotApplicable(format!(
            "⟨Vφ₀²⟩ = {:.6e} is positive; no weakly bound state",
            m.re
        )));
    }
    let k = -0.5 * h * m;
    Ok(prediction(Regime::DeBaseline, h, 0.0, cs.threshold(), k, "O(h^3)"))
}

/// Two-term prediction for `Re⟨V⟩ ≠ 0`.
pub fn predict_main(h: f64, alpha: f64, cs: &CrossSection, moments: &MomentSet) -> Result<RegimePrediction> {
    if !(alpha < 1.0) {
        return Err(Error::OutOfScope(format!("alpha = {alpha} must be < 1")));
    }
    if moments.m0.re.abs() <= ZERO_TOL {
        return Err(Error::NotApplicable("Re⟨V⟩ = 0 is the critical case".into()));
    }
    let (lead, second) = two_term_k(h, alpha, cs, moments);
    Ok(prediction(
        Regime::Main,
        h,
        alpha,
        cs.threshold(),
        lead + second,
        "O(h + h^{-alpha} beta_n(h))",
    ))
}

/// Critical case `Re⟨V⟩ = 0` with `α < 0`: `k = −h^{n+1−α} φ₀(0)⟨Φ₀V⟩`.
pub fn predict_critical(h: f64, alpha: f64, cs: &CrossSection, moments: &MomentSet) -> Result<RegimePrediction> {
    if !(alpha < 0.0) {
        return Err(Error::NotApplicable(format!(
            "critical-case prediction needs alpha < 0, got {alpha}"
        )));
    }
    if moments.m0.re.abs() > ZERO_TOL {
        return Err(Error::NotApplicable("Re⟨V⟩ ≠ 0; not critical".into()));
    }
    let p0 = cs.phi0_at_origin();
    if (p0 * moments.m1.re).abs() <= ZERO_TOL {
        return Err(Error::NotApplicable("φ₀(0) Re⟨Φ₀V⟩ = 0; no conclusion".into()));
    }
    let k = first_moment_term(h, alpha, cs, moments);
    Ok(prediction(
        Regime::CriticalAlphaNeg,
        h,
        alpha,
        cs.threshold(),
        k,
        "O(h + h^{-1-alpha} beta_n(h))",
    ))
}

/// Strip critical case `⟨v⟩′ = 0`, `0 ≤ α < ½`: `k = −2h^{3−α} φ₀(0)φ₀′(0) ∫ v t₁`.
pub fn predict_strip_critical(h: f64, alpha: f64, cs: &CrossSection, moments: &MomentSet) -> Result<RegimePrediction> {
    if cs.dimension() != 2 {
        return Err(Error::NotApplicable("strip analysis needs n = 2".into()));
    }
    let s = moments
        .strip
        .ok_or_else(|| Error::NotApplicable("potential is not of the form v(t₁)1{|t₂|<1}".into()))?;
    if s.m0.norm() > ZERO_TOL {
        return Err(Error::NotApplicable(format!(
            "⟨v⟩′ = {:.6e} ≠ 0; not critical",
            s.m0.re
        )));
    }
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::NotApplicable(format!(
            "strip critical analysis needs 0 <= alpha < 1/2, got {alpha}"
        )));
    }
    let mu0 = cs.threshold();
    let remainder = "O(h^{1/2-alpha})";
    let Some(d0) = strip_slope(cs) else {
        let mut p = prediction(Regime::StripCritical, h, alpha, mu0, Complex64::new(0.0, 0.0), remainder);
        p.verdict = Verdict::Indeterminate;
        return Ok(p);
    };
    let p0 = cs.phi0_at_origin();
    let k = -2.0 * h.powf(3.0 - alpha) * p0 * d0 * s.m1;
    Ok(prediction(Regime::StripCritical, h, alpha, mu0, k, remainder))
}

/// The predictor that applies to these moments and `α`, if any.
pub fn predict_auto(h: f64, alpha: f64, cs: &CrossSection, moments: &MomentSet) -> Result<RegimePrediction> {
    if moments.m0.re.abs() > ZERO_TOL {
        return predict_main(h, alpha, cs, moments);
    }
    if alpha < 0.0 {
        return predict_critical(h, alpha, cs, moments);
    }
    predict_strip_critical(h, alpha, cs, moments)
}

/// `β_n(h)`-scaled remainder bound `h + h^{−α}β_n(h)` of the main law.
pub fn main_remainder_scale(n: usize, h: f64, alpha: f64) -> Result<f64> {
    Ok(h + h.powf(-alpha) * beta(n, h)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sym() -> CrossSection {
        CrossSection::interval(-PI / 2.0, PI / 2.0).unwrap()
    }

    fn asym() -> CrossSection {
        CrossSection::interval(-PI / 3.0, 2.0 * PI / 3.0).unwrap()
    }

    fn moments(v: &PotentialSpec, cs: &CrossSection) -> MomentSet {
        v.moments(cs).unwrap()
    }

    #[test]
    fn leading_condition() {
        let cs = sym();
        let neg = moments(&PotentialSpec::boxed(c(-1.0, 0.0), &[0.5, 0.5]).unwrap(), &cs);
        let pos = moments(&PotentialSpec::boxed(c(1.0, 0.0), &[0.5, 0.5]).unwrap(), &cs);
        assert_eq!(check_conditions(&neg, &cs).leading.verdict, Verdict::Exists);
        assert_eq!(check_conditions(&pos, &cs).leading.verdict, Verdict::Absent);
        assert!(check_conditions(&neg, &cs).first.is_none());
        let cplx = moments(&PotentialSpec::boxed(c(-1.0, 0.3), &[0.5, 0.5]).unwrap(), &cs);
        assert_eq!(check_conditions(&cplx, &cs).decisive().verdict, Verdict::Exists);
    }

    #[test]
    fn first_moment_condition() {
        let cs = asym();
        // V = t₁ on the unit box: ⟨V⟩ = 0, φ₀(0)⟨Φ₀V⟩ = φ₀φ₀′/12 > 0
        let v = PotentialSpec::odd_linear(c(1.0, 0.0), 0.5, 0.5).unwrap();
        let r = check_conditions(&moments(&v, &cs), &cs);
        assert_eq!(r.leading.verdict, Verdict::Indeterminate);
        let first = r.first.clone().unwrap();
        assert_eq!(first.verdict, Verdict::Absent);
        assert!((first.quantity - 0.690988298942671 * 0.398942280401433 / 12.0).abs() < 1e-14);
        let flipped = check_conditions(&moments(&v.scaled(c(-1.0, 0.0)), &cs), &cs);
        assert_eq!(flipped.decisive().verdict, Verdict::Exists);
    }

    #[test]
    fn strip_condition() {
        let cs = asym();
        let psi = PotentialSpec::odd_linear(c(1.0, 0.0), 0.5, 1.0).unwrap();
        let r = check_conditions(&moments(&psi, &cs), &cs);
        assert_eq!(r.strip.unwrap().verdict, Verdict::Absent);
        let r = check_conditions(&moments(&psi, &sym()), &sym());
        assert_eq!(r.strip.unwrap().verdict, Verdict::Indeterminate);
    }

    #[test]
    fn main_prediction_fixture() {
        let cs = sym();
        let m = moments(&PotentialSpec::boxed(c(-1.0, 0.0), &[0.5, 0.5]).unwrap(), &cs);
        let p = predict_main(0.1, 0.0, &cs, &m).unwrap();
        // k = ½ · 0.01 · (2/π), evaluated by mpmath: 0.0031830988618379067
        assert!((p.k.re - 0.0031830988618379067).abs() < 1e-17);
        assert!(p.k.im.abs() < 1e-18);
        assert!(((p.k * p.k).re - 1.0132118364233778e-5).abs() < 1e-20);
        assert!((1.0 - p.e.re - 1.0132118364233778e-5).abs() < 1e-15);
        assert_eq!(p.verdict, Verdict::Exists);
        assert_eq!(p.e, 1.0 - p.k * p.k);
        let m3 = moments(&PotentialSpec::boxed(c(-3.0, 0.0), &[0.5, 0.5]).unwrap(), &cs);
        let p3 = predict_main(0.1, 0.0, &cs, &m3).unwrap();
        assert!((p3.k - 3.0 * p.k).norm() < 1e-17);
        assert!(matches!(predict_main(0.1, 1.0, &cs, &m), Err(Error::OutOfScope(_))));
    }

    #[test]
    fn main_prediction_rectangle_exponent() {
        let cs = CrossSection::rectangle((-1.0, 2.0), (-0.8, 1.1)).unwrap();
        let m = moments(&PotentialSpec::boxed(c(-1.0, 0.0), &[0.5, 0.5, 0.5]).unwrap(), &cs);
        let alpha = 0.3;
        let (l1, _) = two_term_k(0.1, alpha, &cs, &m);
        let (l2, _) = two_term_k(0.05, alpha, &cs, &m);
        let gap_ratio = (l1 * l1).re / (l2 * l2).re;
        assert!((gap_ratio - 2f64.powf(2.0 * (3.0 - alpha))).abs() < 1e-9);
    }

    #[test]
    fn critical_prediction() {
        let cs = asym();
        let v = PotentialSpec::odd_linear(c(-1.0, 0.0), 0.5, 0.5).unwrap();
        let m = moments(&v, &cs);
        let p = predict_critical(0.1, -1.0, &cs, &m).unwrap();
        let want = 0.1f64.powi(4) * 0.690988298942671 * 0.398942280401433 / 12.0;
        assert!((p.k.re - want).abs() < 1e-18);
        assert_eq!(p.verdict, Verdict::Exists);
        let flipped = predict_critical(0.1, -1.0, &cs, &moments(&v.scaled(c(-1.0, 0.0)), &cs)).unwrap();
        assert_eq!(flipped.verdict, Verdict::Absent);
        assert!(matches!(predict_critical(0.1, 0.0, &cs, &m), Err(Error::NotApplicable(_))));
        let boxed = moments(&PotentialSpec::boxed(c(-1.0, 0.0), &[0.5, 0.5]).unwrap(), &cs);
        assert!(predict_critical(0.1, -1.0, &cs, &boxed).is_err());
    }

    #[test]
    fn critical_consistent_with_main_second_term() {
        let cs = asym();
        let m = moments(&PotentialSpec::odd_linear(c(-1.0, 0.0), 0.5, 0.5).unwrap(), &cs);
        for &(h, alpha) in &[(0.1, -1.0), (0.05, -0.5), (0.2, -2.0)] {
            let (lead, second) = two_term_k(h, alpha, &cs, &m);
            assert_eq!(lead, c(0.0, 0.0));
            let crit = predict_critical(h, alpha, &cs, &m).unwrap();
            assert_eq!(second, crit.k);
        }
    }

    #[test]
    fn strip_critical_prediction() {
        let cs = asym();
        let psi = PotentialSpec::odd_linear(c(1.0, 0.0), 0.5, 1.0).unwrap();
        let m = moments(&psi, &cs);
        let p = predict_strip_critical(0.05, 0.25, &cs, &m).unwrap();
        assert!(p.k.re < 0.0);
        assert_eq!(p.verdict, Verdict::Absent);
        let minus = predict_strip_critical(0.05, 0.25, &cs, &moments(&psi.scaled(c(-1.0, 0.0)), &cs)).unwrap();
        assert_eq!(minus.verdict, Verdict::Exists);
        let double = predict_strip_critical(0.05, 0.25, &cs, &moments(&psi.scaled(c(2.0, 0.0)), &cs)).unwrap();
        assert!((double.k - 2.0 * p.k).norm() < 1e-18);
        // agrees with the general two-term law for this separable potential
        let (lead, second) = two_term_k(0.05, 0.25, &cs, &m);
        assert!((lead + second - p.k).norm() < 1e-15 * p.k.norm());

        let sym_p = predict_strip_critical(0.05, 0.25, &sym(), &moments(&psi, &sym())).unwrap();
        assert_eq!(sym_p.verdict, Verdict::Indeterminate);
        assert!(predict_strip_critical(0.05, 0.5, &cs, &m).is_err());
        let boxm = moments(&PotentialSpec::separable_strip(
            "box", c(-1.0, 0.0), crate::potential::AxisProfile::indicator(-0.5, 0.5)).unwrap(), &cs);
        assert!(predict_strip_critical(0.05, 0.25, &cs, &boxm).is_err());
    }

    #[test]
    fn de_baseline_prediction() {
        let cs = sym();
        let v = PotentialSpec::boxed(c(-1.0, 0.0), &[0.5, 0.5]).unwrap();
        let p1 = predict_de(0.1, &v, &cs).unwrap();
        let p2 = predict_de(0.2, &v, &cs).unwrap();
        assert!(((1.0 - p2.e.re) / (1.0 - p1.e.re) - 4.0).abs() < 1e-12);
        // ⟨Vφ₀²⟩ = −(1/π)(1 + sin 1)
        let m = -(1.0 + 1f64.sin()) / PI;
        assert!((1.0 - p1.e.re - 0.01 / 4.0 * m * m).abs() < 1e-16);
        let zero = PotentialSpec::odd_linear(c(1.0, 0.0), 0.5, 0.5).unwrap();
        assert_eq!(predict_de(0.1, &zero, &cs).unwrap().e, c(1.0, 0.0));
        let rep = PotentialSpec::boxed(c(1.0, 0.0), &[0.5, 0.5]).unwrap();
        assert!(matches!(predict_de(0.1, &rep, &cs), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn regime_tags_round_trip() {
        for r in [Regime::DeBaseline, Regime::Main, Regime::CriticalAlphaNeg, Regime::StripCritical] {
            assert_eq!(Regime::from_tag(r.tag()), Some(r));
        }
        assert_eq!(Regime::from_tag("nope"), None);
    }
}
