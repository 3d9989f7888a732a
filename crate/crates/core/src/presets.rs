//! Reference parameter sets used throughout tests, examples and the CLI.

use crate::linalg::{CMatrix, C64};
use crate::model::{FrequencyConvention, ModelSpec, QuditSpec, TlsSpec};

/// Converts ordinary MHz to rad/ns.
pub fn mhz(f: f64) -> f64 {
    FrequencyConvention::Ordinary.mhz_to_rad_per_ns(f)
}

/// Four-level ladder with β = 40 MHz, T1 = 5 µs and one TLS 550 MHz below
/// the qudit with S = 60 MHz and T1 = 1 µs.
pub fn single_tls_model() -> ModelSpec {
    ModelSpec {
        qudit: QuditSpec {
            n_levels: 4,
            base_frequency: 0.0,
            anharmonicity: mhz(40.0),
            t1: 5000.0,
            t2_star: None,
        },
        tls: vec![TlsSpec {
            detuning: mhz(550.0),
            coupling: mhz(60.0),
            t1: 1000.0,
            t2_star: None,
        }],
        frequency_convention: FrequencyConvention::Ordinary,
    }
}

/// [`single_tls_model`] plus a second TLS placed `spacing_mhz` below the
/// first.
pub fn two_tls_model(spacing_mhz: f64, coupling_mhz: f64, t1_ns: f64) -> ModelSpec {
    let mut m = single_tls_model();
    let first = m.tls[0].detuning;
    m.tls.push(TlsSpec {
        detuning: first + mhz(spacing_mhz),
        coupling: mhz(coupling_mhz),
        t1: t1_ns,
        t2_star: None,
    });
    m
}

/// `diag(1, −1, 1, …, 1)`.
pub fn u1_target(n: usize) -> CMatrix {
    let mut u = CMatrix::identity(n, n);
    u[(1, 1)] = C64::new(-1.0, 0.0);
    u
}

pub const GATE_TIME_NS: f64 = 40.0;
pub const SLICES_PER_NS: f64 = 4.0;
