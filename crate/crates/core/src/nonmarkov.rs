//! Determinant (state-space volume) witness of non-Markovian reduced
//! dynamics: a Markovian channel family can only shrink `|det Λ(t)|`.

use crate::error::{Error, Result};
use crate::lindblad::{channel_trace, PiecewiseControl};
use crate::model::OperatorSet;

/// Smallest forward increase of `|det Λ|` counted as back-flow.
pub const INCREASE_EPS: f64 = 1e-9;
pub const DEFAULT_SAMPLES: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct DeterminantTrace {
    /// Sample times in ns.
    pub times: Vec<f64>,
    pub det_abs: Vec<f64>,
    /// Maximal runs of consecutive increasing steps, as `(t_start, t_end)`.
    pub nonmarkovian_intervals: Vec<(f64, f64)>,
}

/// `|det Λ(t_m)|` at `n_samples` equally spaced times covering `[0, T]`.
pub fn determinant_trace(
    ops: &OperatorSet,
    control: &PiecewiseControl,
    n_samples: usize,
) -> Result<DeterminantTrace> {
    if n_samples < 2 {
        return Err(Error::InvalidControl(format!(
            "need at least 2 samples, got {n_samples}"
        )));
    }
    let total = control.total_time;
    let times: Vec<f64> = (0..n_samples)
        .map(|m| total * m as f64 / (n_samples - 1) as f64)
        .collect();
    let det_abs: Vec<f64> = channel_trace(ops, control, &times)?
        .iter()
        .map(|ch| ch.determinant().norm())
        .collect();
    if det_abs.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("channel determinant"));
    }
    let nonmarkovian_intervals = increasing_intervals(&times, &det_abs, INCREASE_EPS);
    Ok(DeterminantTrace {
        times,
        det_abs,
        nonmarkovian_intervals,
    })
}

/// Merged `[t_m, t_{m+1}]` intervals on which `values` rises by more than
/// `eps`.
pub fn increasing_intervals(times: &[f64], values: &[f64], eps: f64) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut open = false;
    for m in 0..values.len().saturating_sub(1) {
        if values[m + 1] - values[m] > eps {
            match (open, out.last_mut()) {
                (true, Some(last)) => last.1 = times[m + 1],
                _ => out.push((times[m], times[m + 1])),
            }
            open = true;
        } else {
            open = false;
        }
    }
    out
}

pub fn is_markovian(trace: &DeterminantTrace) -> bool {
    trace.nonmarkovian_intervals.is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cartan::haar_unitary;
    use crate::model::{build_operators, ModelSpec, QuditSpec};
    use crate::presets::single_tls_model;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn wiggly(n: usize) -> PiecewiseControl {
        let values = (0..n).map(|j| -3.0 + 2.0 * (0.4 * j as f64).sin()).collect();
        PiecewiseControl::new(40.0, values).unwrap()
    }

    #[test]
    fn unitary_dynamics_keep_unit_determinant() {
        let ops = build_operators(&ModelSpec::default()).unwrap();
        let tr = determinant_trace(&ops, &wiggly(40), 50).unwrap();
        assert!(tr.det_abs.iter().all(|d| (d - 1.0).abs() < 1e-10));
        assert!(is_markovian(&tr));
    }

    #[test]
    fn amplitude_damping_determinant() {
        let t1 = 30.0;
        let ops = build_operators(&ModelSpec {
            qudit: QuditSpec {
                n_levels: 2,
                t1,
                ..QuditSpec::default()
            },
            ..ModelSpec::default()
        })
        .unwrap();
        let tr = determinant_trace(&ops, &wiggly(40), 81).unwrap();
        assert!((tr.det_abs[0] - 1.0).abs() < 1e-10);
        for (t, d) in tr.times.iter().zip(&tr.det_abs) {
            assert!((d - (-2.0 * t / t1).exp()).abs() < 1e-10);
        }
        for w in tr.det_abs.windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!(is_markovian(&tr));
    }

    #[test]
    fn decoupled_tls_is_markovian() {
        let mut m = single_tls_model();
        m.tls[0].coupling = 0.0;
        let ops = build_operators(&m).unwrap();
        let tr = determinant_trace(&ops, &wiggly(160), 200).unwrap();
        assert!(is_markovian(&tr));
    }

    #[test]
    fn resonant_exchange_shows_backflow() {
        // parking the 1-2 transition on the TLS makes excitation swap back
        let m = single_tls_model();
        let ops = build_operators(&m).unwrap();
        let delta = -(m.tls[0].detuning + 2.0 * m.qudit.anharmonicity);
        let control = PiecewiseControl::constant(40.0, 160, delta).unwrap();
        let tr = determinant_trace(&ops, &control, 400).unwrap();
        assert!(!is_markovian(&tr));
        let dense = determinant_trace(&ops, &control, 800).unwrap();
        assert!(!is_markovian(&dense));
    }

    #[test]
    fn determinant_is_basis_independent() {
        let ops = build_operators(&single_tls_model()).unwrap();
        let ch = crate::lindblad::reduced_channel(&ops, &wiggly(160), 17.0).unwrap();
        let v = haar_unitary(16, &mut ChaCha8Rng::seed_from_u64(4));
        let similar = v.adjoint() * &ch.data * &v;
        let a = ch.determinant().norm();
        let b = similar.determinant().norm();
        assert!((a - b).abs() <= 1e-12 * a.max(1e-300) + 1e-14, "{a} vs {b}");
    }

    #[test]
    fn interval_merging() {
        let t = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let v = [1.0, 0.9, 0.95, 0.97, 0.5, 0.6];
        assert_eq!(increasing_intervals(&t, &v, 1e-9), vec![(1.0, 3.0), (4.0, 5.0)]);
        assert!(increasing_intervals(&t, &[1.0; 6], 1e-9).is_empty());
    }

    #[test]
    fn too_few_samples() {
        let ops = build_operators(&ModelSpec::default()).unwrap();
        assert!(determinant_trace(&ops, &wiggly(4), 1).is_err());
    }
}
