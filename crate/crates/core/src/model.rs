//! Operators of the joint qudit ⊗ TLS system in the frame rotating at the
//! qudit base frequency.
//!
//! Basis ordering is `qudit ⊗ TLS_1 ⊗ … ⊗ TLS_nP`, so the joint index of
//! `|n, e_1 … e_nP⟩` is `n · 2^nP + Σ e_i · 2^(nP − i)` with `|g⟩ = 0` and
//! `|e⟩ = 1`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{commutator, fro_norm, CMatrix, C64};

/// How frequencies given in MHz are converted to internal rad/ns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FrequencyConvention {
    /// MHz values are ordinary frequencies: `ω = 2π · f · 10⁻³` rad/ns.
    #[default]
    Ordinary,
    /// MHz values are already angular: `ω = f · 10⁻³` rad/ns.
    Angular,
}

impl FrequencyConvention {
    pub fn mhz_to_rad_per_ns(self, mhz: f64) -> f64 {
        match self {
            FrequencyConvention::Ordinary => TAU * mhz * 1e-3,
            FrequencyConvention::Angular => mhz * 1e-3,
        }
    }

    pub fn rad_per_ns_to_mhz(self, w: f64) -> f64 {
        match self {
            FrequencyConvention::Ordinary => w / (TAU * 1e-3),
            FrequencyConvention::Angular => w * 1e3,
        }
    }
}

/// Anharmonic ladder. Frequencies in rad/ns, times in ns.
#[derive(Debug, Clone, PartialEq)]
pub struct QuditSpec {
    pub n_levels: usize,
    pub base_frequency: f64,
    pub anharmonicity: f64,
    /// Energy relaxation time; `f64::INFINITY` disables decay.
    pub t1: f64,
    pub t2_star: Option<f64>,
}

impl Default for QuditSpec {
    fn default() -> Self {
        QuditSpec {
            n_levels: 4,
            base_frequency: 0.0,
            anharmonicity: 0.0,
            t1: f64::INFINITY,
            t2_star: None,
        }
    }
}

/// A strongly coupled two-level defect.
#[derive(Debug, Clone, PartialEq)]
pub struct TlsSpec {
    /// `ω_Q − ω_i`; positive means the TLS lies below the qudit.
    pub detuning: f64,
    pub coupling: f64,
    pub t1: f64,
    pub t2_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelSpec {
    pub qudit: QuditSpec,
    pub tls: Vec<TlsSpec>,
    pub frequency_convention: FrequencyConvention,
}

impl ModelSpec {
    pub fn n_levels(&self) -> usize {
        self.qudit.n_levels
    }

    pub fn env_dim(&self) -> usize {
        1 << self.tls.len()
    }

    pub fn total_dim(&self) -> usize {
        self.n_levels() * self.env_dim()
    }

    pub fn validate(&self) -> Result<()> {
        let q = &self.qudit;
        if q.n_levels < 2 {
            return Err(Error::InvalidModel(format!(
                "qudit needs at least 2 levels, got {}",
                q.n_levels
            )));
        }
        if self.tls.len() > 8 {
            return Err(Error::InvalidModel("at most 8 TLS are supported".into()));
        }
        check_freq("qudit.base_frequency", q.base_frequency)?;
        check_freq("qudit.anharmonicity", q.anharmonicity)?;
        check_time("qudit.t1", q.t1)?;
        if let Some(t2) = q.t2_star {
            check_time("qudit.t2_star", t2)?;
        }
        for (i, t) in self.tls.iter().enumerate() {
            check_freq("tls.detuning", t.detuning)
                .map_err(|e| Error::InvalidModel(format!("tls {}: {e}", i + 1)))?;
            check_freq("tls.coupling", t.coupling)?;
            if t.coupling < 0.0 {
                return Err(Error::InvalidModel(format!(
                    "tls {}: coupling must be non-negative",
                    i + 1
                )));
            }
            check_time("tls.t1", t.t1)?;
            if let Some(t2) = t.t2_star {
                check_time("tls.t2_star", t2)?;
            }
        }
        Ok(())
    }
}

fn check_freq(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!("{name} must be finite, got {v}")))
    }
}

fn check_time(name: &str, v: f64) -> Result<()> {
    if v.is_nan() || v <= 0.0 || v == f64::NEG_INFINITY {
        Err(Error::InvalidModel(format!(
            "{name} must be positive or infinite, got {v}"
        )))
    } else {
        Ok(())
    }
}

/// Operators acting on the full `N · 2^nP` dimensional space.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub n_levels: usize,
    pub n_tls: usize,
    /// Rotating-frame `H_0`.
    pub drift: CMatrix,
    /// `D = Σ n |n⟩⟨n| ⊗ I`, so that `H(t) = H_0 + δ(t) D`.
    pub control_generator: CMatrix,
    pub collapse_ops: Vec<CMatrix>,
    pub excitation_number: CMatrix,
}

impl OperatorSet {
    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    pub fn env_dim(&self) -> usize {
        1 << self.n_tls
    }

    /// Qudit level of a joint basis index.
    pub fn qudit_index(&self, joint: usize) -> usize {
        joint / self.env_dim()
    }

    /// Environment configuration (bit pattern) of a joint basis index.
    pub fn env_index(&self, joint: usize) -> usize {
        joint % self.env_dim()
    }

    /// Total excitation count of a joint basis index.
    pub fn excitation(&self, joint: usize) -> usize {
        self.qudit_index(joint) + self.env_index(joint).count_ones() as usize
    }

    pub fn hamiltonian(&self, delta: f64) -> CMatrix {
        &self.drift + &self.control_generator * C64::new(delta, 0.0)
    }
}

fn tls_bit(i: usize, n_tls: usize) -> usize {
    1 << (n_tls - 1 - i)
}

/// Builds drift, control generator and collapse operators for `model`.
pub fn build_operators(model: &ModelSpec) -> Result<OperatorSet> {
    model.validate()?;
    let n = model.n_levels();
    let n_tls = model.tls.len();
    let env = model.env_dim();
    let dim = n * env;
    let idx = |level: usize, bits: usize| level * env + bits;
    let beta = model.qudit.anharmonicity;

    let mut drift = CMatrix::zeros(dim, dim);
    let mut control = CMatrix::zeros(dim, dim);
    let mut excitation = CMatrix::zeros(dim, dim);
    for level in 0..n {
        let ladder = beta * (level * (level + 1)) as f64 / 2.0;
        for bits in 0..env {
            let j = idx(level, bits);
            drift[(j, j)] += C64::new(ladder, 0.0);
            control[(j, j)] = C64::new(level as f64, 0.0);
            excitation[(j, j)] = C64::new((level + bits.count_ones() as usize) as f64, 0.0);
        }
    }
    for (i, tls) in model.tls.iter().enumerate() {
        let bit = tls_bit(i, n_tls);
        for level in 0..n {
            for bits in 0..env {
                if bits & bit != 0 {
                    let j = idx(level, bits);
                    drift[(j, j)] -= C64::new(tls.detuning, 0.0);
                }
            }
        }
        // (S/2)(a σ⁺ + a† σ⁻): |n−1, e⟩⟨n, g| + h.c. with amplitude (S/2)√n
        for level in 1..n {
            let amp = C64::new(tls.coupling / 2.0 * (level as f64).sqrt(), 0.0);
            for bits in 0..env {
                if bits & bit == 0 {
                    let from = idx(level, bits);
                    let to = idx(level - 1, bits | bit);
                    drift[(to, from)] += amp;
                    drift[(from, to)] += amp;
                }
            }
        }
    }

    let mut collapse_ops = Vec::new();
    let q = &model.qudit;
    if q.t1.is_finite() {
        for level in 1..n {
            let mut a = CMatrix::zeros(dim, dim);
            let amp = C64::new((level as f64 / q.t1).sqrt(), 0.0);
            for bits in 0..env {
                a[(idx(level - 1, bits), idx(level, bits))] = amp;
            }
            collapse_ops.push(a);
        }
    }
    for (i, tls) in model.tls.iter().enumerate() {
        if tls.t1.is_finite() {
            let bit = tls_bit(i, n_tls);
            let amp = C64::new((1.0 / tls.t1).sqrt(), 0.0);
            let mut a = CMatrix::zeros(dim, dim);
            for level in 0..n {
                for bits in 0..env {
                    if bits & bit != 0 {
                        a[(idx(level, bits & !bit), idx(level, bits))] = amp;
                    }
                }
            }
            collapse_ops.push(a);
        }
    }
    if let Some(t2) = q.t2_star.filter(|t| t.is_finite()) {
        let amp = (1.0 / (2.0 * t2)).sqrt();
        collapse_ops.push(&control * C64::new(amp, 0.0));
    }
    for (i, tls) in model.tls.iter().enumerate() {
        if let Some(t2) = tls.t2_star.filter(|t| t.is_finite()) {
            let bit = tls_bit(i, n_tls);
            let amp = (1.0 / (2.0 * t2)).sqrt();
            let mut a = CMatrix::zeros(dim, dim);
            for j in 0..dim {
                let sign = if (j % env) & bit != 0 { 1.0 } else { -1.0 };
                a[(j, j)] = C64::new(sign * amp, 0.0);
            }
            collapse_ops.push(a);
        }
    }

    Ok(OperatorSet {
        n_levels: n,
        n_tls,
        drift,
        control_generator: control,
        collapse_ops,
        excitation_number: excitation,
    })
}

const CONSERVATION_TOL: f64 = 1e-12;

/// Checks that drift and control commute with the total excitation number
/// and that every collapse operator lowers it by exactly one (or, for
/// dephasing operators, leaves it unchanged).
pub fn validate_excitation_conservation(ops: &OperatorSet) -> bool {
    let scale = |m: &CMatrix| fro_norm(m).max(1.0);
    let nt = &ops.excitation_number;
    if fro_norm(&commutator(&ops.drift, nt)) > CONSERVATION_TOL * scale(&ops.drift) {
        return false;
    }
    if fro_norm(&commutator(&ops.control_generator, nt))
        > CONSERVATION_TOL * scale(&ops.control_generator)
    {
        return false;
    }
    let dim = ops.dim();
    for a in &ops.collapse_ops {
        let tol = CONSERVATION_TOL * scale(a);
        let mut shift: Option<isize> = None;
        for c in 0..dim {
            for r in 0..dim {
                if a[(r, c)].norm() > tol {
                    let s = ops.excitation(r) as isize - ops.excitation(c) as isize;
                    match shift {
                        None => shift = Some(s),
                        Some(prev) if prev != s => return false,
                        _ => {}
                    }
                }
            }
        }
        let is_diagonal = (0..dim).all(|r| {
            (0..dim).all(|c| r == c || a[(r, c)].norm() <= tol)
        });
        match shift {
            Some(-1) | None => {}
            Some(0) if is_diagonal => {}
            _ => return false,
        }
    }
    true
}
