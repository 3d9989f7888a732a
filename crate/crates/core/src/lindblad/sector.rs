//! Propagation of the reduced-channel inputs without forming the full
//! `d² × d²` Liouvillian.
//!
//! Every Hamiltonian in the model conserves the total excitation number and
//! every collapse operator lowers it by one (or leaves it unchanged), so the
//! master equation never mixes density-matrix elements `ρ_rc` with different
//! excitation differences `exc(r) − exc(c)`. The channel inputs
//! `|k⟩⟨l| ⊗ |g…g⟩⟨g…g|` carry at most `N − 1` excitations, which can only
//! decrease, so states with more excitations are dropped. Each sector is then
//! evolved with a sparse generator and Taylor-series exponential actions.
//! The sector with difference `−s` is the elementwise conjugate of the one
//! with `s`, since `Λ(|l⟩⟨k|) = Λ(|k⟩⟨l|)†`, so only `s ≥ 0` is propagated.

use std::collections::HashMap;

use crate::linalg::{expmv, expmv_frechet, CMatrix, Csr, ShiftedGenerator, C64, I};
use crate::model::OperatorSet;

use super::Channel;

/// Per-row and per-column nonzero lists of a matrix.
type Nonzeros = (Vec<Vec<(usize, C64)>>, Vec<Vec<(usize, C64)>>);

#[derive(Debug, Clone)]
pub(crate) struct Sector {
    /// Joint-space `(row, col)` of each coordinate.
    pairs: Vec<(usize, usize)>,
    generator: Csr,
    adjoint: Csr,
    /// Diagonal of the superoperator `−i[D, ·]` in this sector.
    control_diag: Vec<C64>,
    /// Qudit `(k, l)` labels of the channel inputs living in this sector.
    inputs: Vec<(usize, usize)>,
    input_pos: Vec<usize>,
    /// `(coordinate, k, l)` for every coordinate that survives the partial
    /// trace, i.e. with equal environment configuration on both sides.
    trace_map: Vec<(usize, usize, usize)>,
    /// Also stands for its conjugate partner with the opposite difference.
    mirrored: bool,
}

impl Sector {
    pub(crate) fn dim(&self) -> usize {
        self.pairs.len()
    }

    pub(crate) fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    fn generator(&self, dt: f64, delta: f64) -> ShiftedGenerator<'_> {
        ShiftedGenerator {
            base: &self.generator,
            diag: self.control_diag.iter().map(|z| z * delta).collect(),
            dt,
        }
    }

    fn adjoint_generator(&self, dt: f64, delta: f64) -> ShiftedGenerator<'_> {
        ShiftedGenerator {
            base: &self.adjoint,
            diag: self.control_diag.iter().map(|z| z.conj() * delta).collect(),
            dt,
        }
    }
}

/// Sector-resolved propagator for the `N²` reduced-channel inputs.
#[derive(Debug, Clone)]
pub struct SectorEngine {
    n_levels: usize,
    sectors: Vec<Sector>,
}

/// Propagated channel inputs, one `dim × n_inputs` block per sector.
pub type SectorStates = Vec<CMatrix>;

impl SectorEngine {
    pub fn new(ops: &OperatorSet) -> Self {
        let n = ops.n_levels;
        let dim = ops.dim();
        let max_exc = n - 1;
        let kept: Vec<usize> = (0..dim).filter(|&j| ops.excitation(j) <= max_exc).collect();

        let nonzeros = |m: &CMatrix| -> Nonzeros {
            let mut rows = vec![Vec::new(); dim];
            let mut cols = vec![Vec::new(); dim];
            for c in 0..dim {
                for r in 0..dim {
                    let z = m[(r, c)];
                    if z != C64::new(0.0, 0.0) {
                        rows[r].push((c, z));
                        cols[c].push((r, z));
                    }
                }
            }
            (rows, cols)
        };
        let (h_rows, h_cols) = nonzeros(&ops.drift);
        let mut k = CMatrix::zeros(dim, dim);
        for a in &ops.collapse_ops {
            k += a.adjoint() * a;
        }
        let (k_rows, k_cols) = nonzeros(&k);
        let collapse: Vec<_> = ops.collapse_ops.iter().map(&nonzeros).collect();

        let env = ops.env_dim();
        let mut sectors = Vec::new();
        let span = max_exc as isize;
        for shift in 0..=span {
            let mut pairs = Vec::new();
            for &c in &kept {
                for &r in &kept {
                    if ops.excitation(r) as isize - ops.excitation(c) as isize == shift {
                        pairs.push((r, c));
                    }
                }
            }
            let index: HashMap<(usize, usize), usize> =
                pairs.iter().enumerate().map(|(p, &rc)| (rc, p)).collect();
            let mut trip = Vec::new();
            for (p, &(r, c)) in pairs.iter().enumerate() {
                let mut push = |src: (usize, usize), v: C64| {
                    if let Some(&q) = index.get(&src) {
                        trip.push((p, q, v));
                    }
                };
                for &(kk, h) in &h_rows[r] {
                    push((kk, c), -I * h);
                }
                for &(kk, h) in &h_cols[c] {
                    push((r, kk), I * h);
                }
                for &(kk, v) in &k_rows[r] {
                    push((kk, c), v * -0.5);
                }
                for &(kk, v) in &k_cols[c] {
                    push((r, kk), v * -0.5);
                }
                for (a_rows, _) in &collapse {
                    for &(kk, ark) in &a_rows[r] {
                        for &(ll, acl) in &a_rows[c] {
                            push((kk, ll), ark * acl.conj());
                        }
                    }
                }
            }
            let generator = Csr::from_triplets(pairs.len(), trip);
            let adjoint = generator.adjoint();
            let control_diag = pairs
                .iter()
                .map(|&(r, c)| {
                    -I * (ops.control_generator[(r, r)] - ops.control_generator[(c, c)])
                })
                .collect();
            let mut inputs = Vec::new();
            let mut input_pos = Vec::new();
            for l in 0..n {
                for kq in 0..n {
                    if kq as isize - l as isize == shift {
                        inputs.push((kq, l));
                        input_pos.push(index[&(kq * env, l * env)]);
                    }
                }
            }
            let trace_map = pairs
                .iter()
                .enumerate()
                .filter(|(_, &(r, c))| ops.env_index(r) == ops.env_index(c))
                .map(|(p, &(r, c))| (p, ops.qudit_index(r), ops.qudit_index(c)))
                .collect();
            sectors.push(Sector {
                pairs,
                generator,
                adjoint,
                control_diag,
                inputs,
                input_pos,
                trace_map,
                mirrored: shift > 0,
            });
        }
        SectorEngine {
            n_levels: n,
            sectors,
        }
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    /// Total number of tracked coordinates (at most `d²`).
    pub fn tracked_dim(&self) -> usize {
        self.sectors.iter().map(Sector::dim).sum()
    }

    #[cfg(test)]
    pub(crate) fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    /// The embedded inputs `|k⟩⟨l| ⊗ |g…g⟩⟨g…g|`.
    pub fn initial_states(&self) -> SectorStates {
        self.sectors
            .iter()
            .map(|s| {
                let mut m = CMatrix::zeros(s.dim(), s.n_inputs());
                for (col, &p) in s.input_pos.iter().enumerate() {
                    m[(p, col)] = C64::new(1.0, 0.0);
                }
                m
            })
            .collect()
    }

    /// `X ← exp((L₀ + δ L_D) dt) X` for every sector.
    pub fn step(&self, states: &mut SectorStates, dt: f64, delta: f64) {
        for (s, x) in self.sectors.iter().zip(states.iter_mut()) {
            if x.ncols() > 0 {
                expmv(&s.generator(dt, delta), x);
            }
        }
    }

    /// Like [`SectorEngine::step`] but also returns
    /// `∂/∂δ exp((L₀ + δ L_D) dt) X` evaluated before the step.
    pub fn step_with_derivative(
        &self,
        states: &mut SectorStates,
        dt: f64,
        delta: f64,
    ) -> SectorStates {
        self.sectors
            .iter()
            .zip(states.iter_mut())
            .map(|(s, x)| {
                let mut dx = CMatrix::zeros(x.nrows(), x.ncols());
                if x.ncols() > 0 {
                    expmv_frechet(&s.generator(dt, delta), &s.control_diag, x, &mut dx);
                }
                dx
            })
            .collect()
    }

    /// `B ← exp((L₀ + δ L_D) dt)† B`.
    pub fn step_adjoint(&self, costates: &mut SectorStates, dt: f64, delta: f64) {
        for (s, b) in self.sectors.iter().zip(costates.iter_mut()) {
            if b.ncols() > 0 {
                expmv(&s.adjoint_generator(dt, delta), b);
            }
        }
    }

    /// Vectorization-basis matrix of the reduced map.
    pub fn channel(&self, states: &SectorStates) -> Channel {
        let n = self.n_levels;
        let mut data = CMatrix::zeros(n * n, n * n);
        for (s, x) in self.sectors.iter().zip(states) {
            for (col, &(k, l)) in s.inputs.iter().enumerate() {
                let input = k + n * l;
                let mirror = l + n * k;
                for &(p, qr, qc) in &s.trace_map {
                    data[(qr + n * qc, input)] += x[(p, col)];
                    if s.mirrored {
                        data[(qc + n * qr, mirror)] += x[(p, col)].conj();
                    }
                }
            }
        }
        Channel {
            system_dim: n,
            data,
        }
    }

    /// Per-sector weights `W` such that
    /// `Σ_s Re⟨W_s, X_s⟩ = Σ_kl Re⟨U E_kl U†, Λ(E_kl)⟩`.
    pub fn fidelity_weights(&self, target: &CMatrix) -> SectorStates {
        self.sectors
            .iter()
            .map(|s| {
                let mut w = CMatrix::zeros(s.dim(), s.n_inputs());
                for (col, &(k, l)) in s.inputs.iter().enumerate() {
                    for &(p, qr, qc) in &s.trace_map {
                        w[(p, col)] = target[(qr, k)] * target[(qc, l)].conj();
                    }
                }
                w
            })
            .collect()
    }

    /// `Σ_s Re tr(W_s† X_s)`, mirrored sectors counted twice.
    pub fn overlap(&self, weights: &SectorStates, states: &SectorStates) -> f64 {
        self.sectors
            .iter()
            .zip(weights.iter().zip(states))
            .map(|(s, (w, x))| {
                let sum = w
                    .iter()
                    .zip(x.iter())
                    .map(|(a, b)| (a.conj() * b).re)
                    .sum::<f64>();
                if s.mirrored {
                    2.0 * sum
                } else {
                    sum
                }
            })
            .sum()
    }
}
