//! Master-equation propagation for piecewise-constant controls, reduced
//! qudit channels and average gate fidelity.
//!
//! Superoperators act on column-stacked density matrices,
//! `vec(ρ)[i + d·j] = ρ[i, j]`, so that `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`.

mod sector;

use nalgebra::DVector;

pub use sector::{SectorEngine, SectorStates};

use crate::error::{Error, Result};
use crate::grape::RampSpec;
use crate::linalg::{expm, fro_norm, identity, is_finite, kron, unitarity_defect, CMatrix, C64, I};
use crate::model::{ModelSpec, OperatorSet};

/// A density matrix on a `dim`-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub data: CMatrix,
}

impl DensityMatrix {
    pub fn new(data: CMatrix) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::DimensionMismatch("density matrix must be square".into()));
        }
        Ok(DensityMatrix { data })
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) state vector.
    pub fn pure(psi: &[C64]) -> Self {
        let v = DVector::from_column_slice(psi);
        let norm = v.norm();
        let v = v / C64::new(norm, 0.0);
        DensityMatrix {
            data: &v * v.adjoint(),
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        fro_norm(&(&self.data - self.data.adjoint()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.data + self.data.adjoint()) * C64::new(0.5, 0.0);
        herm.symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }

    pub fn purity(&self) -> f64 {
        (&self.data * &self.data).trace().re
    }
}

/// Piecewise-constant control `δ(t)` in rad/ns on `n_slices` equal slices.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseControl {
    pub total_time: f64,
    pub values: Vec<f64>,
    pub ramp: Option<RampSpec>,
}

impl PiecewiseControl {
    pub fn new(total_time: f64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidControl("at least one slice required".into()));
        }
        if !(total_time.is_finite() && total_time > 0.0) {
            return Err(Error::InvalidControl(format!(
                "total time must be positive, got {total_time}"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("control values"));
        }
        Ok(PiecewiseControl {
            total_time,
            values,
            ramp: None,
        })
    }

    pub fn constant(total_time: f64, n_slices: usize, value: f64) -> Result<Self> {
        Self::new(total_time, vec![value; n_slices])
    }

    pub fn with_ramp(mut self, ramp: RampSpec) -> Self {
        self.ramp = Some(ramp);
        self
    }

    pub fn n_slices(&self) -> usize {
        self.values.len()
    }

    pub fn dt(&self) -> f64 {
        self.total_time / self.values.len() as f64
    }

    /// Slice start times.
    pub fn times(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..self.n_slices()).map(|j| j as f64 * dt).collect()
    }

    /// `(duration, δ)` pieces covering `[0, t]`.
    pub fn segments_until(&self, t: f64) -> Result<Vec<(f64, f64)>> {
        if !(0.0..=self.total_time * (1.0 + 1e-12)).contains(&t) || t.is_nan() {
            return Err(Error::TimeOutOfRange {
                t,
                total: self.total_time,
            });
        }
        let dt = self.dt();
        let mut out = Vec::new();
        for (j, &v) in self.values.iter().enumerate() {
            let start = j as f64 * dt;
            if start >= t {
                break;
            }
            let end = ((j + 1) as f64 * dt).min(t);
            let len = if j + 1 == self.n_slices() && t >= self.total_time {
                dt
            } else {
                end - start
            };
            if len > 0.0 {
                out.push((len, v));
            }
        }
        Ok(out)
    }
}

/// Linear map on column-stacked `dim × dim` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    pub dim: usize,
    pub data: CMatrix,
}

impl Superoperator {
    pub fn identity(dim: usize) -> Self {
        Superoperator {
            dim,
            data: identity(dim * dim),
        }
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let v = &self.data * DVector::from_column_slice(rho.as_slice());
        CMatrix::from_column_slice(self.dim, self.dim, v.as_slice())
    }

    /// `‖vec(I)† S − vec(I)†‖` for a propagator, or `‖vec(I)† L‖` for a
    /// generator (pass `generator = true`).
    pub fn trace_defect(&self, generator: bool) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for col in 0..d * d {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..d {
                acc += self.data[(i + d * i, col)];
            }
            let want = if !generator && col % (d + 1) == 0 { 1.0 } else { 0.0 };
            worst = worst.max((acc - C64::new(want, 0.0)).norm());
        }
        worst
    }
}

/// Reduced qudit map `Λ` in the vectorization basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub system_dim: usize,
    pub data: CMatrix,
}

impl Channel {
    pub fn identity(n: usize) -> Self {
        Channel {
            system_dim: n,
            data: identity(n * n),
        }
    }

    /// `ρ ↦ U ρ U†`, represented as `Ū ⊗ U`.
    pub fn unitary(u: &CMatrix) -> Self {
        Channel {
            system_dim: u.nrows(),
            data: kron(&u.map(|z| z.conj()), u),
        }
    }

    /// `ρ ↦ tr(ρ) I / N`.
    pub fn completely_depolarizing(n: usize) -> Self {
        let mut data = CMatrix::zeros(n * n, n * n);
        for k in 0..n {
            for j in 0..n {
                data[(j + n * j, k + n * k)] = C64::new(1.0 / n as f64, 0.0);
            }
        }
        Channel {
            system_dim: n,
            data,
        }
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let n = self.system_dim;
        let v = &self.data * DVector::from_column_slice(rho.as_slice());
        CMatrix::from_column_slice(n, n, v.as_slice())
    }

    pub fn compose(&self, first: &Channel) -> Channel {
        Channel {
            system_dim: self.system_dim,
            data: &self.data * &first.data,
        }
    }

    /// Largest deviation of `tr Λ(|k⟩⟨l|)` from `δ_kl`.
    pub fn trace_defect(&self) -> f64 {
        let n = self.system_dim;
        let mut worst: f64 = 0.0;
        for k in 0..n {
            for l in 0..n {
                let col = k + n * l;
                let tr: C64 = (0..n).map(|i| self.data[(i + n * i, col)]).sum();
                let want = if k == l { 1.0 } else { 0.0 };
                worst = worst.max((tr - C64::new(want, 0.0)).norm());
            }
        }
        worst
    }

    /// Choi matrix `Σ_kl |k⟩⟨l| ⊗ Λ(|k⟩⟨l|)`.
    pub fn choi(&self) -> CMatrix {
        let n = self.system_dim;
        let mut c = CMatrix::zeros(n * n, n * n);
        for k in 0..n {
            for l in 0..n {
                let col = self.data.column(k + n * l);
                for i in 0..n {
                    for j in 0..n {
                        c[(k * n + i, l * n + j)] = col[i + n * j];
                    }
                }
            }
        }
        c
    }

    pub fn choi_min_eigenvalue(&self) -> f64 {
        let c = self.choi();
        let herm = (&c + c.adjoint()) * C64::new(0.5, 0.0);
        herm.symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }

    pub fn determinant(&self) -> C64 {
        self.data.clone().determinant()
    }
}

/// Liouvillian `−i[H, ·] + Σ_k D[A_k]` as a `d² × d²` matrix.
pub fn liouvillian(h: &CMatrix, collapse_ops: &[CMatrix]) -> Result<Superoperator> {
    let d = h.nrows();
    if h.ncols() != d {
        return Err(Error::DimensionMismatch("Hamiltonian must be square".into()));
    }
    for a in collapse_ops {
        if a.nrows() != d || a.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "collapse operator is {}×{}, Hamiltonian is {d}×{d}",
                a.nrows(),
                a.ncols()
            )));
        }
    }
    let id = identity(d);
    let mut l = (kron(&id, h) - kron(&h.transpose(), &id)) * (-I);
    for a in collapse_ops {
        let ada = a.adjoint() * a;
        l += kron(&a.map(|z| z.conj()), a);
        l -= kron(&id, &ada) * C64::new(0.5, 0.0);
        l -= kron(&ada.transpose(), &id) * C64::new(0.5, 0.0);
    }
    Ok(Superoperator { dim: d, data: l })
}

/// `exp(L dt)`.
pub fn propagate_slice(l: &Superoperator, dt: f64) -> Result<Superoperator> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidControl(format!("slice duration must be positive, got {dt}")));
    }
    if !is_finite(&l.data) {
        return Err(Error::NonFinite("Liouvillian"));
    }
    Ok(Superoperator {
        dim: l.dim,
        data: expm(&(&l.data * C64::new(dt, 0.0)))?,
    })
}

/// Full propagator `exp(L_n Δt) ⋯ exp(L_1 Δt)` on the joint space.
pub fn propagator(ops: &OperatorSet, control: &PiecewiseControl) -> Result<Superoperator> {
    propagator_until(ops, control, control.total_time)
}

pub fn propagator_until(
    ops: &OperatorSet,
    control: &PiecewiseControl,
    t: f64,
) -> Result<Superoperator> {
    let mut g = Superoperator::identity(ops.dim());
    for (dt, delta) in control.segments_until(t)? {
        let l = liouvillian(&ops.hamiltonian(delta), &ops.collapse_ops)?;
        let step = propagate_slice(&l, dt)?;
        g.data = &step.data * &g.data;
    }
    Ok(g)
}

/// Reduced qudit channel at time `t`, environment starting in `|g…g⟩`.
pub fn reduced_channel(ops: &OperatorSet, control: &PiecewiseControl, t: f64) -> Result<Channel> {
    let segments = control.segments_until(t)?;
    let engine = SectorEngine::new(ops);
    let mut states = engine.initial_states();
    for (dt, delta) in segments {
        engine.step(&mut states, dt, delta);
    }
    Ok(engine.channel(&states))
}

/// Reduced channels at each of the (sorted, non-decreasing) `times`.
pub fn channel_trace(
    ops: &OperatorSet,
    control: &PiecewiseControl,
    times: &[f64],
) -> Result<Vec<Channel>> {
    let engine = SectorEngine::new(ops);
    let mut states = engine.initial_states();
    let dt = control.dt();
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t < now - 1e-12 || t > control.total_time * (1.0 + 1e-12) || t.is_nan() {
            return Err(Error::TimeOutOfRange {
                t,
                total: control.total_time,
            });
        }
        while now < t - 1e-12 * control.total_time {
            let slice = ((now / dt + 1e-9).floor() as usize).min(control.n_slices() - 1);
            let slice_end = (slice + 1) as f64 * dt;
            let stop = slice_end.min(t);
            engine.step(&mut states, stop - now, control.values[slice]);
            now = if (stop - slice_end).abs() <= 1e-12 * control.total_time {
                slice_end
            } else {
                stop
            };
        }
        out.push(engine.channel(&states));
    }
    Ok(out)
}

/// Partial trace over the TLS factor of a joint `n·env` square matrix.
pub fn partial_trace(rho: &CMatrix, n: usize, env: usize) -> Result<CMatrix> {
    if rho.nrows() != n * env || rho.ncols() != n * env {
        return Err(Error::DimensionMismatch(format!(
            "expected {}×{} state, got {}×{}",
            n * env,
            n * env,
            rho.nrows(),
            rho.ncols()
        )));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| {
        (0..env).map(|e| rho[(i * env + e, j * env + e)]).sum()
    }))
}

pub fn partial_trace_env(rho: &DensityMatrix, model: &ModelSpec) -> Result<DensityMatrix> {
    Ok(DensityMatrix {
        data: partial_trace(&rho.data, model.n_levels(), model.env_dim())?,
    })
}

/// Average gate fidelity of `ch` with respect to the unitary `target`.
pub fn average_fidelity(ch: &Channel, target: &CMatrix) -> Result<f64> {
    let n = ch.system_dim;
    if target.nrows() != n || target.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "target is {}×{}, channel acts on dimension {n}",
            target.nrows(),
            target.ncols()
        )));
    }
    let defect = unitarity_defect(target);
    if defect > 1e-10 {
        return Err(Error::NonUnitaryTarget(defect));
    }
    Ok(fidelity_from_process(process_fidelity(ch, target), n))
}

/// `F_pro = N⁻² Σ_kl Re⟨U E_kl U†, Λ(E_kl)⟩`.
pub fn process_fidelity(ch: &Channel, target: &CMatrix) -> f64 {
    let n = ch.system_dim;
    let mut acc = 0.0;
    for k in 0..n {
        for l in 0..n {
            let col = ch.data.column(k + n * l);
            for i in 0..n {
                for j in 0..n {
                    let ideal = target[(i, k)] * target[(j, l)].conj();
                    acc += (ideal.conj() * col[i + n * j]).re;
                }
            }
        }
    }
    acc / (n * n) as f64
}

pub fn fidelity_from_process(f_pro: f64, n: usize) -> f64 {
    (n as f64 * f_pro + 1.0) / (n as f64 + 1.0)
}

#[cfg(test)]
mod tests;
