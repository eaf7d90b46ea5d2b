//! Experiment orchestration: one record per `h`, gathered into tables.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use wgbound::asymptotics::{
    check_conditions, predict_auto, predict_critical, predict_de, predict_main, predict_strip_critical, Regime,
    RegimePrediction,
};
use wgbound::oracle::{OracleConfig, OracleResult, TruncatedProblem};
use wgbound::potential::{beta, epsilon, PotentialSpec, ScaledPotential};
use wgbound::threshold::{DiscretizationConfig, Perturbation, ThresholdSolution, ThresholdSolver, Verdict};
use wgbound::CrossSection;

use crate::config::{ExperimentConfig, RegimeChoice};
use crate::emit::{cnum, fnum, opt, Table};
use crate::error::{CliError, Result};

#[derive(Debug, Clone)]
pub struct Experiment {
    pub cs: CrossSection,
    pub potential: PotentialSpec,
    pub alpha: f64,
    pub hs: Vec<f64>,
    pub regime: RegimeChoice,
    pub disc: DiscretizationConfig,
    pub oracle: Option<OracleConfig>,
    pub refine: bool,
}

impl Experiment {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(Self {
            cs: cfg.cross_section()?,
            potential: cfg.potential()?,
            alpha: cfg.scaling.alpha,
            hs: cfg.h_values()?,
            regime: cfg.scaling.regime,
            disc: cfg.discretization(),
            oracle: cfg.oracle.enabled.then(|| cfg.oracle_config()),
            refine: cfg.oracle.refine,
        })
    }

    fn baseline(&self) -> bool {
        self.regime == RegimeChoice::DeBaseline
    }

    pub fn epsilon(&self, h: f64) -> Result<f64> {
        if self.baseline() {
            Ok(h)
        } else {
            Ok(epsilon(self.cs.dimension(), h, self.alpha)?)
        }
    }

    pub fn perturbation(&self, h: f64) -> Result<Perturbation> {
        if self.baseline() {
            Ok(Perturbation::baseline(self.potential.clone(), h)?)
        } else {
            let p = ScaledPotential::new(self.potential.clone(), h, self.alpha)?;
            Ok(Perturbation::shrinking(&p))
        }
    }

    pub fn predict(&self, h: f64) -> Result<RegimePrediction> {
        if self.baseline() {
            return Ok(predict_de(h, &self.potential, &self.cs)?);
        }
        let m = self.potential.moments(&self.cs)?;
        let (cs, a) = (&self.cs, self.alpha);
        let p = match self.regime {
            RegimeChoice::Auto => predict_auto(h, a, cs, &m),
            RegimeChoice::Main => predict_main(h, a, cs, &m),
            RegimeChoice::CriticalAlphaNeg => predict_critical(h, a, cs, &m),
            RegimeChoice::StripCritical => predict_strip_critical(h, a, cs, &m),
            RegimeChoice::DeBaseline => unreachable!("handled above"),
        };
        Ok(p?)
    }

    pub fn solve(&self, h: f64) -> Result<ThresholdSolution> {
        let s = ThresholdSolver::new(&self.cs, self.perturbation(h)?, self.disc.clone())?;
        Ok(s.solve()?)
    }

    pub fn run_oracle(&self, h: f64) -> Result<OracleResult> {
        if self.baseline() {
            return Err(CliError::Config("the oracle is not set up for the fixed-support baseline".into()));
        }
        let cfg = self.oracle.clone().unwrap_or_default();
        let p = ScaledPotential::new(self.potential.clone(), h, self.alpha)?;
        let prob = TruncatedProblem::new(&self.cs, &p, cfg)?;
        let base = prob.lowest_eigenvalue()?;
        if self.refine {
            Ok(prob.refine(&base)?)
        } else {
            Ok(base)
        }
    }

    pub fn sweep_row(&self, h: f64) -> SweepRow {
        let mut failures = Vec::new();
        let mut note = |stage: &str, e: &CliError| failures.push(format!("{stage}: {}: {e}", e.kind()));
        let pred = self.predict(h).map_err(|e| note("predict", &e)).ok();
        let sol = self.solve(h).map_err(|e| note("solve", &e)).ok();
        let orc = if self.oracle.is_some() {
            self.run_oracle(h).map_err(|e| note("oracle", &e)).ok()
        } else {
            None
        };
        let k_asym = pred.as_ref().map(|p| p.k);
        let ratio = match (k_asym, sol.as_ref()) {
            (Some(ka), Some(s)) if ka != Complex64::new(0.0, 0.0) => Some(s.k / ka),
            _ => None,
        };
        SweepRow {
            h,
            alpha: self.alpha,
            epsilon: self.epsilon(h).unwrap_or(f64::NAN),
            beta: beta(self.cs.dimension(), h).unwrap_or(f64::NAN),
            regime: pred.as_ref().map(|p| p.regime),
            k_asym,
            e_asym: pred.as_ref().map(|p| p.e),
            verdict_asym: pred.as_ref().map(|p| p.verdict),
            k_bs: sol.as_ref().map(|s| s.k),
            e_bs: sol.as_ref().and_then(|s| s.eigenvalue),
            verdict_bs: sol.as_ref().map(|s| s.verdict),
            residual: sol.as_ref().map(|s| s.residual),
            iterations: sol.as_ref().map(|s| s.iterations),
            e_oracle: orc.as_ref().and_then(|o| o.eigenvalue),
            oracle_error: orc.as_ref().and_then(|o| o.error_estimate),
            ratio,
            status: if failures.is_empty() { "ok".into() } else { failures.join("; ") },
        }
    }

    /// Rows computed concurrently, returned in the order of the h list.
    pub fn sweep(&self) -> Vec<SweepRow> {
        self.hs.par_iter().map(|&h| self.sweep_row(h)).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub h: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub regime: Option<Regime>,
    pub k_asym: Option<Complex64>,
    pub e_asym: Option<Complex64>,
    pub verdict_asym: Option<Verdict>,
    pub k_bs: Option<Complex64>,
    pub e_bs: Option<Complex64>,
    pub verdict_bs: Option<Verdict>,
    pub residual: Option<f64>,
    pub iterations: Option<usize>,
    pub e_oracle: Option<Complex64>,
    pub oracle_error: Option<f64>,
    /// `k_bs / k_asym`, omitted when `k_asym = 0`.
    pub ratio: Option<Complex64>,
    pub status: String,
}

pub const SWEEP_COLUMNS: &[&str] = &[
    "h", "alpha", "epsilon", "beta", "regime", "k_asym_re", "k_asym_im", "e_asym_re", "e_asym_im",
    "verdict_asym", "k_bs_re", "k_bs_im", "e_bs_re", "e_bs_im", "verdict_bs", "residual", "iterations",
    "e_oracle_re", "e_oracle_im", "oracle_error", "ratio_re", "ratio_im", "status",
];

fn tag<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn sweep_table(rows: &[SweepRow]) -> Table {
    let mut t = Table::new(SWEEP_COLUMNS);
    for r in rows {
        let mut cells = vec![fnum(r.h), fnum(r.alpha), fnum(r.epsilon), fnum(r.beta), tag(r.regime)];
        cells.extend(cnum(r.k_asym));
        cells.extend(cnum(r.e_asym));
        cells.push(tag(r.verdict_asym));
        cells.extend(cnum(r.k_bs));
        cells.extend(cnum(r.e_bs));
        cells.push(tag(r.verdict_bs));
        cells.push(opt(r.residual));
        cells.push(tag(r.iterations));
        cells.extend(cnum(r.e_oracle));
        cells.push(opt(r.oracle_error));
        cells.extend(cnum(r.ratio));
        cells.push(r.status.clone());
        t.push(cells, serde_json::to_value(r).expect("row serializes"));
    }
    t
}

pub fn modes_table(cs: &CrossSection, count: usize) -> Table {
    let mut t = Table::new(&["index", "mu", "quantum", "phi_at_origin"]);
    let origin = vec![0.0; cs.transverse_dim()];
    for m in cs.modes(count) {
        let q: Vec<String> = m.quantum.iter().map(|v| v.to_string()).collect();
        let phi = m.value(&origin);
        t.push(
            vec![m.index.to_string(), fnum(m.mu), q.join(" "), fnum(phi)],
            json!({"record": "mode", "index": m.index, "mu": m.mu, "quantum": m.quantum, "phi_at_origin": phi}),
        );
    }
    t
}

pub fn moments_table(exp: &Experiment) -> Result<Table> {
    let m = exp.potential.moments(&exp.cs)?;
    let rep = check_conditions(&m, &exp.cs);
    let mut t = Table::new(&[
        "m0_re", "m0_im", "m1_re", "m1_im", "strip_m0_re", "strip_m0_im", "strip_m1_re", "strip_m1_im",
        "leading", "first", "strip", "decisive",
    ]);
    let mut cells = Vec::new();
    cells.extend(cnum(Some(m.m0)));
    cells.extend(cnum(Some(m.m1)));
    cells.extend(cnum(m.strip.map(|s| s.m0)));
    cells.extend(cnum(m.strip.map(|s| s.m1)));
    cells.push(rep.leading.verdict.to_string());
    cells.push(tag(rep.first.as_ref().map(|c| c.verdict)));
    cells.push(tag(rep.strip.as_ref().map(|c| c.verdict)));
    cells.push(rep.decisive().to_string());
    t.push(cells, json!({"record": "moments", "moments": m, "conditions": rep}));
    Ok(t)
}

pub fn predict_table(exp: &Experiment) -> Result<Table> {
    let mut t = Table::new(&["h", "alpha", "regime", "k_re", "k_im", "e_re", "e_im", "verdict", "remainder"]);
    for &h in &exp.hs {
        let p = exp.predict(h)?;
        let mut cells = vec![fnum(h), fnum(p.alpha), p.regime.to_string()];
        cells.extend(cnum(Some(p.k)));
        cells.extend(cnum(Some(p.e)));
        cells.push(p.verdict.to_string());
        cells.push(p.remainder.clone());
        t.push(cells, json!({"record": "prediction", "prediction": p}));
    }
    Ok(t)
}

pub fn solve_table(exp: &Experiment) -> Result<Table> {
    let mut t = Table::new(&[
        "h", "alpha", "epsilon", "k_re", "k_im", "e_re", "e_im", "verdict", "f_re", "f_im", "residual", "tol_k",
        "iterations",
    ]);
    let sols: Vec<Result<ThresholdSolution>> = exp.hs.par_iter().map(|&h| exp.solve(h)).collect();
    for (&h, sol) in exp.hs.iter().zip(sols) {
        let s = sol?;
        let mut cells = vec![fnum(h), fnum(exp.alpha), fnum(s.epsilon)];
        cells.extend(cnum(Some(s.k)));
        cells.extend(cnum(s.eigenvalue));
        cells.push(s.verdict.to_string());
        cells.extend(cnum(Some(s.f_value)));
        cells.extend([fnum(s.residual), fnum(s.tol_k), s.iterations.to_string()]);
        t.push(cells, json!({"record": "solution", "h": h, "alpha": exp.alpha, "solution": s}));
    }
    Ok(t)
}

pub fn oracle_table(exp: &Experiment, profile: Option<&str>) -> Result<Table> {
    let mut t = Table::new(&[
        "h", "alpha", "e_re", "e_im", "converged_re", "converged_im", "error_estimate", "margin", "iterations",
        "residual", "half_length", "spacing", "modes", "sizing_ok", "decay_rate",
    ]);
    let runs: Vec<Result<OracleResult>> = exp.hs.par_iter().map(|&h| exp.run_oracle(h)).collect();
    for (&h, run) in exp.hs.iter().zip(runs) {
        let r = run?;
        let mut cells = vec![fnum(h), fnum(exp.alpha)];
        cells.extend(cnum(r.eigenvalue));
        cells.extend(cnum(Some(r.converged_value)));
        cells.extend([
            opt(r.error_estimate),
            fnum(r.margin),
            r.iterations.to_string(),
            fnum(r.residual),
            fnum(r.half_length),
            fnum(r.spacing),
            r.modes.to_string(),
            r.sizing_ok.to_string(),
            opt(r.decay_rate),
        ]);
        if let Some(path) = profile {
            let path = path.replace("{h}", &format!("{h}"));
            std::fs::write(&path, r.profile_csv(1)).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
        }
        t.push(cells, json!({"record": "oracle", "h": h, "alpha": exp.alpha, "oracle": r}));
    }
    Ok(t)
}
