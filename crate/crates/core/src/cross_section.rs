//! Cross-sections of the waveguide and their Dirichlet eigenbasis.
//!
//! The waveguide is `Ω × ℝ`, with `Ω` an interval (planar strip, n = 2) or a
//! rectangle (n = 3). Eigenpairs are known in closed form, so every quantity
//! built on top of them can be checked independently.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    /// One `(lo, hi)` pair per transverse axis.
    intervals: Vec<(f64, f64)>,
}

impl CrossSection {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() || intervals.len() > 2 {
            return Err(Error::InvalidInput(format!(
                "cross-section needs 1 or 2 transverse intervals, got {}",
                intervals.len()
            )));
        }
        for &(lo, hi) in &intervals {
            if !(lo.is_finite() && hi.is_finite()) || !(hi > lo) {
                return Err(Error::InvalidInput(format!(
                    "interval ({lo}, {hi}) must have positive length"
                )));
            }
            if !(lo < 0.0 && 0.0 < hi) {
                return Err(Error::InvalidInput(format!(
                    "transverse origin must lie strictly inside ({lo}, {hi})"
                )));
            }
        }
        Ok(Self { intervals })
    }

    /// Planar strip `(lo, hi) × ℝ`.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![(lo, hi)])
    }

    pub fn rectangle(first: (f64, f64), second: (f64, f64)) -> Result<Self> {
        Self::new(vec![first, second])
    }

    /// Space dimension n of the waveguide.
    pub fn dimension(&self) -> usize {
        self.intervals.len() + 1
    }

    pub fn transverse_dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// Whether `x'` lies strictly inside Ω.
    pub fn contains(&self, xt: &[f64]) -> bool {
        xt.iter()
            .zip(&self.intervals)
            .all(|(&x, &(lo, hi))| lo < x && x < hi)
    }

    /// The first `count` Dirichlet eigenpairs in nondecreasing order of μ.
    pub fn modes(&self, count: usize) -> Vec<TransverseMode> {
        let lens: Vec<f64> = self.intervals.iter().map(|(lo, hi)| hi - lo).collect();
        let quanta: Vec<Vec<u32>> = match self.intervals.len() {
            1 => (1..=count as u32).map(|m| vec![m]).collect(),
            _ => {
                let top = count as u32;
                let mut all: Vec<(f64, Vec<u32>)> = (1..=top)
                    .flat_map(|p| (1..=top).map(move |q| vec![p, q]))
                    .map(|qn| (mode_energy(&qn, &lens), qn))
                    .collect();
                all.sort_by(|(ea, qa), (eb, qb)| {
                    if (ea - eb).abs() <= 1e-12 * ea.max(*eb) {
                        qa.cmp(qb)
                    } else {
                        ea.total_cmp(eb)
                    }
                });
                all.into_iter().take(count).map(|(_, q)| q).collect()
            }
        };
        quanta
            .into_iter()
            .enumerate()
            .map(|(index, quantum)| TransverseMode {
                index,
                mu: mode_energy(&quantum, &lens),
                quantum,
                intervals: self.intervals.clone(),
            })
            .collect()
    }

    /// The `j`-th eigenpair.
    pub fn mode(&self, j: usize) -> TransverseMode {
        self.modes(j + 1).pop().expect("at least one mode")
    }

    /// The threshold μ₀ of the essential spectrum.
    pub fn threshold(&self) -> f64 {
        self.mode(0).mu
    }

    /// `K_j(k) = sqrt(μ_j − μ₀ + k²)`, principal branch; `K_0(k) = k`.
    pub fn kj(&self, j: usize, k: Complex64) -> Result<Complex64> {
        if j == 0 {
            if k == Complex64::new(0.0, 0.0) {
                return Err(Error::SingularArgument("K_0 at k = 0".into()));
            }
            return Ok(k);
        }
        let modes = self.modes(j + 1);
        dispersion(modes[j].mu - modes[0].mu, k)
    }

    pub fn phi0_at_origin(&self) -> f64 {
        self.mode(0).value(&vec![0.0; self.transverse_dim()])
    }

    /// The linear part Φ₀ of φ₀ at the origin.
    pub fn linear_profile(&self) -> LinearProfile {
        LinearProfile {
            coeffs: self.mode(0).gradient_at_origin(),
        }
    }
}

/// `sqrt(gap + k²)` on the branch with positive real part.
pub fn dispersion(gap: f64, k: Complex64) -> Result<Complex64> {
    let kk = (k * k + gap).sqrt();
    if kk.re <= 0.0 {
        return Err(Error::Branch(format!(
            "Re K = {} is not positive for gap {gap}, k = {k}",
            kk.re
        )));
    }
    Ok(kk)
}

fn mode_energy(quantum: &[u32], lens: &[f64]) -> f64 {
    quantum
        .iter()
        .zip(lens)
        .map(|(&m, &l)| (m as f64 * PI / l).powi(2))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransverseMode {
    pub index: usize,
    pub mu: f64,
    /// Sine quantum number (≥ 1) along each transverse axis.
    pub quantum: Vec<u32>,
    #[serde(skip)]
    intervals: Vec<(f64, f64)>,
}

impl TransverseMode {
    /// φ_j(x′), normalized in L²(Ω).
    pub fn value(&self, xt: &[f64]) -> f64 {
        self.quantum
            .iter()
            .zip(&self.intervals)
            .zip(xt)
            .map(|((&m, &(lo, hi)), &x)| {
                let l = hi - lo;
                (2.0 / l).sqrt() * (m as f64 * PI * (x - lo) / l).sin()
            })
            .product()
    }

    /// ∇φ_j at the transverse origin.
    pub fn gradient_at_origin(&self) -> Vec<f64> {
        let factors: Vec<(f64, f64)> = self
            .quantum
            .iter()
            .zip(&self.intervals)
            .map(|(&m, &(lo, hi))| {
                let l = hi - lo;
                let w = m as f64 * PI / l;
                let a = (2.0 / l).sqrt();
                (a * (-w * lo).sin(), a * w * (-w * lo).cos())
            })
            .collect();
        (0..factors.len())
            .map(|q| {
                factors
                    .iter()
                    .enumerate()
                    .map(|(i, &(v, d))| if i == q { d } else { v })
                    .product()
            })
            .collect()
    }
}

/// Φ₀(ξ′) = Σ_q ∂φ₀/∂ξ_q(0) ξ_q.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearProfile {
    pub coeffs: Vec<f64>,
}

impl LinearProfile {
    pub fn eval(&self, xi: &[f64]) -> f64 {
        self.coeffs.iter().zip(xi).map(|(c, x)| c * x).sum()
    }
}
