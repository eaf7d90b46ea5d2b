//! Experiment configuration: a TOML file plus `section.key=value` overrides.

use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;

use wgbound::asymptotics::Regime;
use wgbound::oracle::OracleConfig;
use wgbound::potential::{AxisProfile, Piece, PotentialSpec};
use wgbound::threshold::{DiscretizationConfig, SolveMode};
use wgbound::CrossSection;

use crate::error::{CliError, Result};

/// A number, or a string such as `"-pi/2"`, `"2*pi/3"`, `"0.25"`.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Real {
    Num(f64),
    Expr(String),
}

impl Real {
    pub fn value(&self) -> Result<f64> {
        match self {
            Real::Num(x) => Ok(*x),
            Real::Expr(s) => parse_real(s),
        }
    }
}

/// Parses `[±][c[*]]pi[/d]` or a plain float.
pub fn parse_real(s: &str) -> Result<f64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if let Ok(x) = t.parse::<f64>() {
        return Ok(x);
    }
    let bad = || CliError::Config(format!("cannot read {s:?} as a number"));
    let (sign, rest) = match t.strip_prefix('-') {
        Some(r) => (-1.0, r),
        None => (1.0, t.strip_prefix('+').unwrap_or(&t)),
    };
    let (before, after) = rest.split_once("pi").ok_or_else(bad)?;
    let before = before.strip_suffix('*').unwrap_or(before);
    let coef = if before.is_empty() { 1.0 } else { before.parse::<f64>().map_err(|_| bad())? };
    let denom = match after {
        "" => 1.0,
        d => d.strip_prefix('/').ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?,
    };
    if denom == 0.0 {
        return Err(bad());
    }
    Ok(sign * coef * std::f64::consts::PI / denom)
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Amplitude {
    Real(f64),
    Complex([f64; 2]),
}

impl Amplitude {
    pub fn value(self) -> Complex64 {
        match self {
            Amplitude::Real(x) => Complex64::new(x, 0.0),
            Amplitude::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

impl Default for Amplitude {
    fn default() -> Self {
        Amplitude::Real(1.0)
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Box,
    OddLinear,
    Tensor,
    Zero,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceConfig {
    pub lo: f64,
    pub hi: f64,
    /// Polynomial coefficients in `t`, lowest degree first.
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveguideConfig {
    /// One interval for a strip, two for a rectangle.
    pub intervals: Vec<[Real; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub kind: PotentialKind,
    #[serde(default)]
    pub amplitude: Amplitude,
    pub half_widths: Option<Vec<f64>>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub axes: Option<Vec<Vec<PieceConfig>>>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum RegimeChoice {
    #[default]
    Auto,
    Main,
    DeBaseline,
    CriticalAlphaNeg,
    StripCritical,
}

impl RegimeChoice {
    pub fn fixed(self) -> Option<Regime> {
        match self {
            RegimeChoice::Auto => None,
            RegimeChoice::Main => Some(Regime::Main),
            RegimeChoice::DeBaseline => Some(Regime::DeBaseline),
            RegimeChoice::CriticalAlphaNeg => Some(Regime::CriticalAlphaNeg),
            RegimeChoice::StripCritical => Some(Regime::StripCritical),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HRange {
    pub start: f64,
    pub ratio: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    #[serde(default)]
    pub alpha: f64,
    pub h: Option<Vec<f64>>,
    pub h_range: Option<HRange>,
    #[serde(default)]
    pub regime: RegimeChoice,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModeChoice {
    #[default]
    Direct,
    Series,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub mode: ModeChoice,
    pub series_terms: usize,
    pub j_max: usize,
    pub nodes: usize,
    pub tol_k: Option<f64>,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = DiscretizationConfig::default();
        Self {
            mode: ModeChoice::Direct,
            series_terms: 4,
            j_max: d.j_max,
            nodes: d.nodes,
            tol_k: d.tol_k,
            max_iter: d.max_iter,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub enabled: bool,
    pub modes: usize,
    pub half_length: Option<f64>,
    pub spacing: Option<f64>,
    pub shift: Option<f64>,
    pub refine: bool,
    /// CSV path for the `c₀(x_n)` profile of the last oracle run.
    pub profile: Option<String>,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            enabled: false,
            modes: OracleConfig::default().modes,
            half_length: None,
            spacing: None,
            shift: None,
            refine: true,
            profile: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Emit {
    Json,
    #[default]
    Csv,
    Both,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Directory for `<stem>.csv` / `<stem>.jsonl`; stdout when absent.
    pub dir: Option<String>,
    pub stem: String,
    pub emit: Emit,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            stem: "wgbound".into(),
            emit: Emit::Csv,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub waveguide: WaveguideConfig,
    pub potential: PotentialConfig,
    pub scaling: ScalingConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_str_with(&text, overrides)
    }

    pub fn from_str_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(one_line(&e.to_string())))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(one_line(&e.to_string())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.cross_section()?;
        self.potential()?;
        self.h_values()?;
        if !(self.scaling.alpha < 1.0) || !self.scaling.alpha.is_finite() {
            return Err(CliError::Config(format!("alpha = {} must be < 1", self.scaling.alpha)));
        }
        self.discretization().validate()?;
        if self.oracle.enabled {
            self.oracle_config().validate()?;
        }
        Ok(())
    }

    pub fn cross_section(&self) -> Result<CrossSection> {
        let iv = self
            .waveguide
            .intervals
            .iter()
            .map(|[a, b]| Ok((a.value()?, b.value()?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(CrossSection::new(iv)?)
    }

    pub fn potential(&self) -> Result<PotentialSpec> {
        let p = &self.potential;
        let n = self.waveguide.intervals.len() + 1;
        let amp = p.amplitude.value();
        let unused = |names: &[(&str, bool)]| -> Result<()> {
            for (name, set) in names {
                if *set {
                    return Err(CliError::Config(format!(
                        "potential.{name} is not used by kind {:?}",
                        p.kind
                    )));
                }
            }
            Ok(())
        };
        let need = |name: &str| CliError::Config(format!("potential.{name} is required for kind {:?}", p.kind));
        let spec = match p.kind {
            PotentialKind::Box => {
                unused(&[("a", p.a.is_some()), ("b", p.b.is_some()), ("axes", p.axes.is_some())])?;
                let hw = p.half_widths.as_ref().ok_or_else(|| need("half_widths"))?;
                if hw.len() != n {
                    return Err(CliError::Config(format!(
                        "potential.half_widths needs {n} entries for this waveguide"
                    )));
                }
                PotentialSpec::boxed(amp, hw)?
            }
            PotentialKind::OddLinear => {
                unused(&[("half_widths", p.half_widths.is_some()), ("axes", p.axes.is_some())])?;
                if n != 2 {
                    return Err(CliError::Config("odd_linear is defined for strips only".into()));
                }
                PotentialSpec::odd_linear(amp, p.a.ok_or_else(|| need("a"))?, p.b.ok_or_else(|| need("b"))?)?
            }
            PotentialKind::Tensor => {
                unused(&[("half_widths", p.half_widths.is_some()), ("a", p.a.is_some()), ("b", p.b.is_some())])?;
                let axes = p.axes.as_ref().ok_or_else(|| need("axes"))?;
                if axes.len() != n {
                    return Err(CliError::Config(format!("potential.axes needs {n} entries")));
                }
                let axes = axes
                    .iter()
                    .map(|pieces| AxisProfile {
                        pieces: pieces
                            .iter()
                            .map(|q| Piece {
                                lo: q.lo,
                                hi: q.hi,
                                coeffs: q.coeffs.clone(),
                            })
                            .collect(),
                    })
                    .collect();
                PotentialSpec::tensor("tensor", amp, axes)?
            }
            PotentialKind::Zero => {
                unused(&[
                    ("half_widths", p.half_widths.is_some()),
                    ("a", p.a.is_some()),
                    ("b", p.b.is_some()),
                    ("axes", p.axes.is_some()),
                ])?;
                PotentialSpec::zero(n)?
            }
        };
        Ok(spec)
    }

    pub fn h_values(&self) -> Result<Vec<f64>> {
        let s = &self.scaling;
        let hs = match (&s.h, &s.h_range) {
            (Some(h), None) => h.clone(),
            (None, Some(r)) => {
                if !(r.ratio > 0.0) {
                    return Err(CliError::Config("scaling.h_range.ratio must be positive".into()));
                }
                (0..r.count).map(|i| r.start * r.ratio.powi(i as i32)).collect()
            }
            (Some(_), Some(_)) => {
                return Err(CliError::Config("give scaling.h or scaling.h_range, not both".into()))
            }
            (None, None) => return Err(CliError::Config("scaling.h is required".into())),
        };
        if hs.is_empty() {
            return Err(CliError::Config("the h list is empty".into()));
        }
        if let Some(h) = hs.iter().find(|h| !(**h > 0.0 && **h < 1.0)) {
            return Err(CliError::Config(format!("h = {h} must lie in (0, 1)")));
        }
        Ok(hs)
    }

    pub fn discretization(&self) -> DiscretizationConfig {
        let s = &self.solver;
        DiscretizationConfig {
            j_max: s.j_max,
            nodes: s.nodes,
            mode: match s.mode {
                ModeChoice::Direct => SolveMode::Direct,
                ModeChoice::Series => SolveMode::Series(s.series_terms),
            },
            tol_k: s.tol_k,
            max_iter: s.max_iter,
        }
    }

    pub fn oracle_config(&self) -> OracleConfig {
        let o = &self.oracle;
        OracleConfig {
            modes: o.modes,
            half_length: o.half_length,
            spacing: o.spacing,
            shift: o.shift,
            nodes: self.solver.nodes,
            ..OracleConfig::default()
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Applies `section.key=value`; the value is read as a TOML value, else as a string.
/// An empty value removes the key.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override {spec:?} is not of the form key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Usage(format!("override key {path:?} is malformed")));
    }
    let raw = raw.trim();
    if raw.is_empty() {
        let mut cur = Some(table);
        for k in &keys[..keys.len() - 1] {
            cur = cur.and_then(|t| t.get_mut(*k)).and_then(|v| v.as_table_mut());
        }
        if let Some(t) = cur {
            t.remove(keys[keys.len() - 1]);
        }
        return Ok(());
    }
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override {path:?}: {k} is not a section")))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn pi_expressions() {
        assert_eq!(parse_real("-pi/2").unwrap(), -PI / 2.0);
        assert_eq!(parse_real("2*pi/3").unwrap(), 2.0 * PI / 3.0);
        assert_eq!(parse_real("2pi/3").unwrap(), 2.0 * PI / 3.0);
        assert_eq!(parse_real("pi").unwrap(), PI);
        assert_eq!(parse_real(" 0.25 ").unwrap(), 0.25);
        assert!(parse_real("pi/0").is_err());
        assert!(parse_real("tau").is_err());
        assert!(parse_real("pi*2").is_err());
    }

    #[test]
    fn override_creates_nested_keys() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "solver.j_max=8").unwrap();
        apply_override(&mut t, "output.stem=run1").unwrap();
        assert_eq!(t["solver"]["j_max"].as_integer(), Some(8));
        assert_eq!(t["output"]["stem"].as_str(), Some("run1"));
        assert!(apply_override(&mut t, "novalue").is_err());
        assert!(apply_override(&mut t, "solver..x=1").is_err());
    }
}
