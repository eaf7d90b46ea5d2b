//! Built-in regime checks on fixed fixtures, run through the same config path as user experiments.

use rayon::prelude::*;

use wgbound::asymptotics::Regime;
use wgbound::potential::beta;
use wgbound::threshold::{SolveMode, Verdict};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::run::{Experiment, SweepRow};

#[derive(Debug, Clone)]
pub struct CheckLine {
    pub name: &'static str,
    pub pass: bool,
    pub measured: String,
}

impl CheckLine {
    pub fn line(&self) -> String {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        format!("[{tag}] {}: {}", self.name, self.measured)
    }
}

const SYM_STRIP: &str = "[waveguide]\nintervals = [[\"-pi/2\", \"pi/2\"]]\n";
const ASYM_STRIP: &str = "[waveguide]\nintervals = [[\"-pi/3\", \"2pi/3\"]]\n";
const STRIP_PSI: &str = "[potential]\nkind = \"tensor\"\naxes = [[{ lo = -0.5, hi = 0.5, coeffs = [0.0, 1.0] }], \
                         [{ lo = -1.0, hi = 1.0, coeffs = [1.0] }]]\n";

fn fixture(waveguide: &str, potential: &str, scaling: &str) -> Result<Experiment> {
    let text = format!("{waveguide}{potential}[scaling]\n{scaling}\n");
    Experiment::from_config(&ExperimentConfig::from_str_with(&text, &[])?)
}

fn box_potential(amp: &str) -> String {
    format!("[potential]\nkind = \"box\"\namplitude = {amp}\nhalf_widths = [0.5, 0.5]\n")
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn rows_ok(rows: &[SweepRow]) -> Result<()> {
    match rows.iter().find(|r| r.status != "ok") {
        Some(r) => Err(CliError::Check(format!("fixture row h = {} failed: {}", r.h, r.status))),
        None => Ok(()),
    }
}

fn identity(exp: &Experiment, rows: &[SweepRow]) -> CheckLine {
    let mu0 = exp.cs.threshold();
    let mut count = 0;
    let mut pass = true;
    for r in rows {
        if r.verdict_bs == Some(Verdict::Exists) {
            count += 1;
            let k = r.k_bs.expect("solved");
            pass &= r.e_bs == Some(mu0 - k * k);
        }
    }
    CheckLine {
        name: "eigenvalue identity",
        pass: pass && count > 0,
        measured: format!("{count} solves with verdict exists"),
    }
}

fn ratio_deviations(rows: &[SweepRow]) -> Vec<f64> {
    rows.iter()
        .map(|r| r.ratio.map(|q| (q.re - 1.0).abs()).unwrap_or(f64::INFINITY))
        .collect()
}

fn verify_main() -> Result<Vec<CheckLine>> {
    let mut out = Vec::new();
    let exp = fixture(SYM_STRIP, &box_potential("-1.0"), "alpha = 0.0\nh = [0.2, 0.1, 0.05]\nregime = \"main\"")?;
    let rows = exp.sweep();
    rows_ok(&rows)?;
    let dev = ratio_deviations(&rows);
    let bound = rows
        .iter()
        .zip(&dev)
        .all(|(r, d)| *d <= 3.0 * (r.h + beta(2, r.h).unwrap_or(f64::INFINITY)));
    out.push(CheckLine {
        name: "leading-order law",
        pass: bound && dev.windows(2).all(|w| w[1] < w[0]),
        measured: format!("|k/k_asym-1| = {}", fmt_list(&dev)),
    });
    out.push(identity(&exp, &rows));

    let cases = [("-1.0", Verdict::Exists), ("1.0", Verdict::Absent), ("[-1.0, 0.3]", Verdict::Exists), ("[1.0, 0.3]", Verdict::Absent)];
    let seen: Vec<Result<Verdict>> = cases
        .par_iter()
        .map(|(amp, _)| {
            let e = fixture(SYM_STRIP, &box_potential(amp), "alpha = 0.0\nh = [0.1]")?;
            Ok(e.solve(0.1)?.verdict)
        })
        .collect();
    let mut pass = true;
    let mut names = Vec::new();
    for ((_, want), got) in cases.iter().zip(seen) {
        let got = got?;
        pass &= got == *want;
        names.push(got.to_string());
    }
    out.push(CheckLine {
        name: "existence dichotomy",
        pass,
        measured: format!("verdicts {}", names.join(",")),
    });

    let mut series = exp.clone();
    series.disc.mode = SolveMode::Series(4);
    let (a, b) = (exp.solve(0.1)?, series.solve(0.1)?);
    let rel = (a.k - b.k).norm() / a.k.norm();
    out.push(CheckLine {
        name: "series/direct agreement",
        pass: rel <= 1e-6,
        measured: format!("relative k difference {rel:.3e}"),
    });

    let mut orc = fixture(SYM_STRIP, &box_potential("-1.0"), "alpha = 0.5\nh = [0.3]")?;
    orc.oracle = Some(Default::default());
    let sol = orc.solve(0.3)?;
    let o = orc.run_oracle(0.3)?;
    let e_bs = sol.eigenvalue.ok_or_else(|| CliError::Check("oracle fixture did not bind".into()))?;
    let rel = match o.eigenvalue {
        Some(e) => (e.re - e_bs.re).abs() / (sol.mu0 - e_bs.re),
        None => f64::INFINITY,
    };
    out.push(CheckLine {
        name: "oracle cross-validation",
        pass: rel <= 1e-3 && o.sizing_ok,
        measured: format!("relative gap error {rel:.3e}"),
    });
    Ok(out)
}

fn verify_de() -> Result<Vec<CheckLine>> {
    let exp = fixture(
        SYM_STRIP,
        &box_potential("-1.0"),
        "h = [0.2, 0.1, 0.05, 0.025]\nregime = \"de_baseline\"",
    )?;
    let rows = exp.sweep();
    rows_ok(&rows)?;
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let gaps: Vec<f64> = rows
        .iter()
        .map(|r| match (r.e_bs, r.e_asym) {
            (Some(a), Some(b)) => (a - b).norm(),
            _ => f64::NAN,
        })
        .collect();
    let order = fit_slope(&hs, &gaps);
    Ok(vec![
        CheckLine {
            name: "eigenvalue rate",
            pass: (2.5..=3.5).contains(&order),
            measured: format!("|e - e_asym| = {}, order {order:.3}", fmt_list(&gaps)),
        },
        CheckLine {
            name: "existence",
            pass: rows.iter().all(|r| r.verdict_bs == Some(Verdict::Exists)),
            measured: format!(
                "verdicts {}",
                rows.iter().map(|r| r.verdict_bs.map(|v| v.to_string()).unwrap_or_default()).collect::<Vec<_>>().join(",")
            ),
        },
        identity(&exp, &rows),
    ])
}

fn verify_critical() -> Result<Vec<CheckLine>> {
    let mut verdicts = Vec::new();
    let mut pass = true;
    let mut dev = Vec::new();
    for amp in ["1.0", "-1.0"] {
        let pot = format!("[potential]\nkind = \"odd_linear\"\namplitude = {amp}\na = 0.5\nb = 0.5\n");
        let exp = fixture(ASYM_STRIP, &pot, "alpha = -1.0\nh = [0.1, 0.05]\nregime = \"critical_alpha_neg\"")?;
        let rows = exp.sweep();
        rows_ok(&rows)?;
        let m = exp.potential.moments(&exp.cs)?;
        let want = if exp.cs.phi0_at_origin() * m.m1.re < 0.0 { Verdict::Exists } else { Verdict::Absent };
        for r in &rows {
            pass &= r.verdict_bs == Some(want);
            verdicts.push(r.verdict_bs.map(|v| v.to_string()).unwrap_or_default());
        }
        if want == Verdict::Exists {
            dev = ratio_deviations(&rows);
        }
    }
    pass &= dev.len() == 2 && dev[1] < dev[0];
    Ok(vec![CheckLine {
        name: "critical alpha < 0",
        pass,
        measured: format!("verdicts {}, |k/k_asym-1| = {}", verdicts.join(","), fmt_list(&dev)),
    }])
}

fn verify_strip() -> Result<Vec<CheckLine>> {
    let h: f64 = 0.05;
    let mut got = Vec::new();
    let mut pass = true;
    let mut dev = Vec::new();
    for amp in ["1.0", "-1.0"] {
        let pot = format!("{STRIP_PSI}amplitude = {amp}\n");
        let exp = fixture(ASYM_STRIP, &pot, "alpha = 0.25\nh = [0.05]\nregime = \"strip_critical\"")?;
        let rows = exp.sweep();
        rows_ok(&rows)?;
        let r = &rows[0];
        let (k, ka) = (r.k_bs.expect("solved"), r.k_asym.expect("predicted"));
        pass &= k.re.signum() == ka.re.signum();
        let d = (k.re / ka.re - 1.0).abs();
        pass &= d <= 3.0 * h.powf(0.25);
        dev.push(d);
        got.push(r.verdict_bs.unwrap_or(Verdict::Indeterminate));
    }
    pass &= got[0] != got[1] && !got.contains(&Verdict::Indeterminate);
    Ok(vec![CheckLine {
        name: "strip critical dichotomy",
        pass,
        measured: format!("psi {} / -psi {}, |k/k_asym-1| = {}", got[0], got[1], fmt_list(&dev)),
    }])
}

pub fn verify(regime: Regime) -> Result<Vec<CheckLine>> {
    match regime {
        Regime::Main => verify_main(),
        Regime::DeBaseline => verify_de(),
        Regime::CriticalAlphaNeg => verify_critical(),
        Regime::StripCritical => verify_strip(),
    }
}
