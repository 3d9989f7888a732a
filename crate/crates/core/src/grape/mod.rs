//! Gradient-based pulse optimization for diagonal target unitaries.
//!
//! The error `1 − F_avg` is linear in the propagated channel inputs, so its
//! derivative with respect to the level shift of slice `j` is
//! `Re⟨B_j, ∂G_j X_{j−1}⟩` with forward-propagated inputs `X`, adjoint-
//! propagated fidelity weights `B`, and `∂G_j X_{j−1}` taken from the
//! off-diagonal block of the exponential of `[[L_j Δt, L_D Δt], [0, L_j Δt]]`
//! acting on `[0; X_{j−1}]`.

mod lbfgs;

use std::f64::consts::TAU;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::{PiecewiseControl, SectorEngine, SectorStates};
use crate::linalg::{expm_frechet, identity, kron, unitarity_defect, CMatrix, C64, I};
use crate::model::{ModelSpec, OperatorSet};
use crate::presets::mhz;

/// Linear entry and exit ramps of the control.
#[derive(Debug, Clone, PartialEq)]
pub struct RampSpec {
    /// Duration of each ramp in ns.
    pub ramp_time: f64,
    /// Largest slope magnitude in rad/ns per ns.
    pub ramp_rate_cap: f64,
    /// When set, the ramp is sampled at slice starts so the first and last
    /// slice are exactly zero; otherwise at slice midpoints.
    pub endpoints_zero: bool,
}

impl Default for RampSpec {
    fn default() -> Self {
        RampSpec {
            ramp_time: 2.5,
            ramp_rate_cap: mhz(500.0) / 2.5,
            endpoints_zero: true,
        }
    }
}

impl RampSpec {
    pub fn n_slices(&self, dt: f64) -> usize {
        (self.ramp_time / dt).round() as usize
    }

    /// Ramp fraction `t / ramp_time` sampled for ramp slice `j`.
    fn weight(&self, j: usize, n_ramp: usize) -> f64 {
        let offset = if self.endpoints_zero { 0.0 } else { 0.5 };
        (j as f64 + offset) / n_ramp as f64
    }

    fn is_capped(&self, value: f64) -> bool {
        value.abs() / self.ramp_time > self.ramp_rate_cap
    }

    fn slope(&self, value: f64) -> f64 {
        value.signum() * (value.abs() / self.ramp_time).min(self.ramp_rate_cap)
    }
}

fn ramp_layout(ramp: &RampSpec, total_time: f64, n: usize) -> Result<usize> {
    if !(ramp.ramp_time >= 0.0 && ramp.ramp_rate_cap >= 0.0) {
        return Err(Error::InvalidControl("ramp parameters must be non-negative".into()));
    }
    if 2.0 * ramp.ramp_time >= total_time {
        return Err(Error::InvalidControl(format!(
            "ramp time {} ns must be shorter than half the gate time {} ns",
            ramp.ramp_time, total_time
        )));
    }
    let n_ramp = ramp.n_slices(total_time / n as f64);
    if 2 * n_ramp >= n {
        return Err(Error::InvalidControl("ramps leave no free slices".into()));
    }
    Ok(n_ramp)
}

/// Overwrites ramp slices from the adjacent free values and clips free
/// slices to `±delta_max`.
pub fn apply_constraints(
    control: &PiecewiseControl,
    ramp: Option<&RampSpec>,
    delta_max: f64,
) -> Result<PiecewiseControl> {
    if !(delta_max > 0.0) {
        return Err(Error::InvalidControl("amplitude bound must be positive".into()));
    }
    let n = control.n_slices();
    let mut values = control.values.clone();
    let n_ramp = match ramp {
        Some(r) => ramp_layout(r, control.total_time, n)?,
        None => 0,
    };
    for v in &mut values[n_ramp..n - n_ramp] {
        *v = v.clamp(-delta_max, delta_max);
    }
    if let Some(r) = ramp {
        if n_ramp > 0 {
            let first = values[n_ramp];
            let last = values[n - n_ramp - 1];
            let (s_in, s_out) = (r.slope(first), r.slope(last));
            for j in 0..n_ramp {
                let t = r.weight(j, n_ramp) * r.ramp_time;
                values[j] = s_in * t;
                values[n - 1 - j] = s_out * t;
            }
        }
    }
    Ok(PiecewiseControl {
        total_time: control.total_time,
        values,
        ramp: ramp.cloned(),
    })
}

/// Folds ramp-slice gradient components into the free boundary slices and
/// zeroes the ramp components.
fn fold_ramp_gradient(control: &PiecewiseControl, grad: &mut [f64]) -> Result<()> {
    let Some(r) = &control.ramp else {
        return Ok(());
    };
    let n = control.n_slices();
    let n_ramp = ramp_layout(r, control.total_time, n)?;
    if n_ramp == 0 {
        return Ok(());
    }
    let first = control.values[n_ramp];
    let last = control.values[n - n_ramp - 1];
    let mut into_first = 0.0;
    let mut into_last = 0.0;
    for j in 0..n_ramp {
        let w = r.weight(j, n_ramp);
        into_first += w * grad[j];
        into_last += w * grad[n - 1 - j];
        grad[j] = 0.0;
        grad[n - 1 - j] = 0.0;
    }
    if !r.is_capped(first) {
        grad[n_ramp] += into_first;
    }
    if !r.is_capped(last) {
        grad[n - n_ramp - 1] += into_last;
    }
    Ok(())
}

/// Cached propagation engine and fidelity weights for one target.
pub struct GrapeProblem {
    engine: SectorEngine,
    weights: SectorStates,
    n_levels: usize,
}

impl GrapeProblem {
    pub fn new(ops: &OperatorSet, target: &CMatrix) -> Result<Self> {
        let n = ops.n_levels;
        if target.nrows() != n || target.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "target must be {n}×{n}, got {}×{}",
                target.nrows(),
                target.ncols()
            )));
        }
        let defect = unitarity_defect(target);
        if defect > 1e-10 {
            return Err(Error::NonUnitaryTarget(defect));
        }
        let engine = SectorEngine::new(ops);
        let weights = engine.fidelity_weights(target);
        Ok(GrapeProblem {
            engine,
            weights,
            n_levels: n,
        })
    }

    fn error_from_overlap(&self, overlap: f64) -> f64 {
        let n = self.n_levels as f64;
        let f_pro = overlap / (n * n);
        n * (1.0 - f_pro) / (n + 1.0)
    }

    fn error_scale(&self) -> f64 {
        let n = self.n_levels as f64;
        -1.0 / (n * (n + 1.0))
    }

    pub fn error(&self, control: &PiecewiseControl) -> f64 {
        let mut x = self.engine.initial_states();
        let dt = control.dt();
        for &v in &control.values {
            self.engine.step(&mut x, dt, v);
        }
        self.error_from_overlap(self.engine.overlap(&self.weights, &x))
    }

    /// Error and its derivative with respect to every slice value, without
    /// ramp projection.
    pub fn error_and_raw_gradient(&self, control: &PiecewiseControl) -> (f64, Vec<f64>) {
        let dt = control.dt();
        let mut x = self.engine.initial_states();
        let derivs: Vec<SectorStates> = control
            .values
            .iter()
            .map(|&v| self.engine.step_with_derivative(&mut x, dt, v))
            .collect();
        let err = self.error_from_overlap(self.engine.overlap(&self.weights, &x));
        let mut b = self.weights.clone();
        let mut grad = vec![0.0; control.n_slices()];
        let scale = self.error_scale();
        for j in (0..control.n_slices()).rev() {
            grad[j] = scale * self.engine.overlap(&b, &derivs[j]);
            if j > 0 {
                self.engine.step_adjoint(&mut b, dt, control.values[j]);
            }
        }
        (err, grad)
    }

    /// Error and gradient with ramp-locked components folded into the free
    /// boundary slices and set to zero.
    pub fn error_and_gradient(&self, control: &PiecewiseControl) -> Result<(f64, Vec<f64>)> {
        let (err, mut grad) = self.error_and_raw_gradient(control);
        fold_ramp_gradient(control, &mut grad)?;
        Ok((err, grad))
    }
}

/// `1 − F_avg` of the reduced channel at the end of `control`.
pub fn objective(ops: &OperatorSet, control: &PiecewiseControl, target: &CMatrix) -> Result<f64> {
    Ok(GrapeProblem::new(ops, target)?.error(control))
}

/// Exact derivative of [`objective`] with respect to each slice value.
///
/// Ramp-locked slices report zero; their influence is carried by the free
/// slice that drives the ramp.
pub fn gradient(ops: &OperatorSet, control: &PiecewiseControl, target: &CMatrix) -> Result<Vec<f64>> {
    Ok(GrapeProblem::new(ops, target)?.error_and_gradient(control)?.1)
}

/// Reference gradient built from dense `d² × d²` propagators and full
/// block-triangular exponentials. Exponentially more expensive than
/// [`gradient`]; intended for cross-checks on small models.
pub fn gradient_dense(
    ops: &OperatorSet,
    control: &PiecewiseControl,
    target: &CMatrix,
) -> Result<Vec<f64>> {
    use crate::lindblad::{liouvillian, partial_trace, process_fidelity, Channel};
    let n = ops.n_levels;
    let d = ops.dim();
    let env = ops.env_dim();
    let dt = control.dt();
    let id = identity(d);
    let dl = (kron(&id, &ops.control_generator) - kron(&ops.control_generator.transpose(), &id))
        * (-I);
    let mut props = Vec::new();
    let mut derivs = Vec::new();
    for &v in &control.values {
        let l = liouvillian(&ops.hamiltonian(v), &ops.collapse_ops)?;
        let (g, dg) = expm_frechet(&(&l.data * C64::new(dt, 0.0)), &(&dl * C64::new(dt, 0.0)))?;
        props.push(g);
        derivs.push(dg);
    }
    let reduce = |m: &CMatrix| -> Result<Channel> {
        let mut data = CMatrix::zeros(n * n, n * n);
        for k in 0..n {
            for l in 0..n {
                let mut v = nalgebra::DVector::zeros(d * d);
                v[k * env + d * (l * env)] = C64::new(1.0, 0.0);
                let out = m * v;
                let rho = CMatrix::from_column_slice(d, d, out.as_slice());
                let red = partial_trace(&rho, n, env)?;
                data.column_mut(k + n * l).copy_from_slice(red.as_slice());
            }
        }
        Ok(Channel {
            system_dim: n,
            data,
        })
    };
    let mut prefix = vec![identity(d * d)];
    for g in &props {
        let next = g * prefix.last().unwrap();
        prefix.push(next);
    }
    let mut suffix = identity(d * d);
    let nn = n as f64;
    let mut grad = vec![0.0; control.n_slices()];
    for j in (0..control.n_slices()).rev() {
        let m = &suffix * &derivs[j] * &prefix[j];
        let f_pro = process_fidelity(&reduce(&m)?, target);
        grad[j] = -nn / (nn + 1.0) * f_pro;
        suffix = &suffix * &props[j];
    }
    fold_ramp_gradient(control, &mut grad)?;
    Ok(grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Lbfgs,
    GradientDescentBacktracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Error change stayed below `convergence_tol`.
    Converged,
    GradientSmall,
    MaxIterations,
    /// No descent step could be found.
    Stalled,
    /// The starting control already met the target.
    AlreadyOptimal,
}

/// Shape of the randomized initial pulses.
#[derive(Debug, Clone, PartialEq)]
pub struct GuessSpec {
    /// Constant offset in rad/ns.
    pub offset: f64,
    /// Overall amplitude of the Fourier component sum in rad/ns.
    pub amplitude: f64,
}

impl GuessSpec {
    /// Offset toward the `|2,g⟩ ↔ |1,e⟩` resonance with the first TLS and
    /// Fourier amplitude of half its detuning.
    pub fn for_model(model: &ModelSpec) -> Self {
        match model.tls.first() {
            Some(t) => GuessSpec {
                offset: -(t.detuning + 2.0 * model.qudit.anharmonicity),
                amplitude: t.detuning.abs() / 2.0,
            },
            None => GuessSpec {
                offset: 0.0,
                amplitude: mhz(100.0),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationConfig {
    pub target: CMatrix,
    pub total_time: f64,
    pub n_slices: usize,
    pub max_iterations: usize,
    pub convergence_tol: f64,
    pub amplitude_bound: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub n_starts: usize,
    pub guess: GuessSpec,
    /// Accept non-diagonal targets.
    pub allow_non_diagonal: bool,
    /// Use these slice values as the only starting point.
    pub initial_values: Option<Vec<f64>>,
}

impl OptimizationConfig {
    pub fn new(target: CMatrix, total_time: f64, n_slices: usize, guess: GuessSpec) -> Self {
        OptimizationConfig {
            target,
            total_time,
            n_slices,
            max_iterations: 300,
            convergence_tol: 1e-9,
            amplitude_bound: mhz(1000.0),
            seed: 0,
            optimizer: OptimizerKind::Lbfgs,
            n_starts: 5,
            guess,
            allow_non_diagonal: false,
            initial_values: None,
        }
    }

    pub fn validate(&self, n_levels: usize) -> Result<()> {
        if !(self.amplitude_bound > 0.0) {
            return Err(Error::config("amplitude_bound", "must be positive"));
        }
        if self.n_slices == 0 {
            return Err(Error::config("n_slices", "must be at least 1"));
        }
        if !(self.total_time > 0.0 && self.total_time.is_finite()) {
            return Err(Error::config("total_time", "must be positive"));
        }
        if self.n_starts == 0 {
            return Err(Error::config("n_starts", "must be at least 1"));
        }
        let t = &self.target;
        if t.nrows() != n_levels || t.ncols() != n_levels {
            return Err(Error::config("target", format!("must be {n_levels}×{n_levels}")));
        }
        let defect = unitarity_defect(t);
        if defect > 1e-10 {
            return Err(Error::NonUnitaryTarget(defect));
        }
        if !self.allow_non_diagonal {
            for r in 0..n_levels {
                for c in 0..n_levels {
                    if r != c && t[(r, c)].norm() > 1e-12 {
                        return Err(Error::config("target", "must be diagonal"));
                    }
                }
            }
        }
        if let Some(v) = &self.initial_values {
            if v.len() != self.n_slices {
                return Err(Error::config("initial_values", "length must equal n_slices"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub best_control: PiecewiseControl,
    /// Error after every accepted iterate of the winning start.
    pub error_history: Vec<f64>,
    pub final_error: f64,
    pub gradient_norm_final: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub best_start: usize,
    /// Final error of every start, in start order.
    pub start_errors: Vec<f64>,
    pub wall_time: f64,
}

/// Derives an independent stream seed from a base seed and an index.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Smooth random pulse: offset plus 3–6 sine components.
pub fn random_initial_guess(guess: &GuessSpec, total_time: f64, n_slices: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_modes = rng.random_range(3..=6usize);
    let offset = guess.offset * rng.random_range(0.8..1.0);
    let per_mode = guess.amplitude / (n_modes as f64).sqrt();
    let modes: Vec<(f64, f64, f64)> = (0..n_modes)
        .map(|_| {
            let freq = rng.random_range(1..=8u32) as f64;
            let amp = per_mode * rng.random_range(-1.0..1.0);
            let phase = rng.random_range(0.0..TAU);
            (freq, amp, phase)
        })
        .collect();
    let dt = total_time / n_slices as f64;
    (0..n_slices)
        .map(|j| {
            let t = (j as f64 + 0.5) * dt;
            offset
                + modes
                    .iter()
                    .map(|(f, a, p)| a * (std::f64::consts::PI * f * t / total_time + p).sin())
                    .sum::<f64>()
        })
        .collect()
}

/// Error below which a starting pulse is returned without iterating.
const ALREADY_OPTIMAL: f64 = 1e-12;

struct StartOutcome {
    control: PiecewiseControl,
    history: Vec<f64>,
    error: f64,
    gradient_norm: f64,
    iterations: usize,
    stop: StopReason,
}

fn run_start(
    problem: &GrapeProblem,
    config: &OptimizationConfig,
    ramp: Option<&RampSpec>,
    start_values: Vec<f64>,
) -> Result<StartOutcome> {
    let n = config.n_slices;
    let base = PiecewiseControl::new(config.total_time, start_values)?;
    let start = apply_constraints(&base, ramp, config.amplitude_bound)?;
    let n_ramp = match ramp {
        Some(r) => ramp_layout(r, config.total_time, n)?,
        None => 0,
    };
    let free = n_ramp..n - n_ramp;
    let to_control = |x: &[f64]| -> PiecewiseControl {
        let mut c = start.clone();
        c.values[free.clone()].copy_from_slice(x);
        // x is already inside the bounds, so this only refreshes the ramps
        apply_constraints(&c, ramp, config.amplitude_bound).expect("validated layout")
    };
    let settings = lbfgs::Settings {
        kind: config.optimizer,
        max_iterations: config.max_iterations,
        convergence_tol: config.convergence_tol,
        gradient_tol: 1e-10,
        memory: 10,
        initial_step: 0.05 * config.amplitude_bound,
    };
    let x0 = start.values[free.clone()].to_vec();
    let out = lbfgs::minimize(
        x0,
        config.amplitude_bound,
        |x| {
            let c = to_control(x);
            let (f, g) = problem
                .error_and_gradient(&c)
                .expect("validated ramp layout");
            (f, g[free.clone()].to_vec())
        },
        &settings,
    );
    Ok(StartOutcome {
        control: to_control(&out.x),
        history: out.history,
        error: out.f,
        gradient_norm: out.gradient_norm,
        iterations: out.iterations,
        stop: out.stop,
    })
}

/// Multi-start optimization of the slice values toward `config.target`.
///
/// Starts run concurrently on the current rayon pool; the winner is the
/// lowest final error, ties broken by start index.
pub fn optimize(
    ops: &OperatorSet,
    config: &OptimizationConfig,
    ramp: Option<&RampSpec>,
) -> Result<OptimizationResult> {
    let clock = Instant::now();
    config.validate(ops.n_levels)?;
    if let Some(r) = ramp {
        ramp_layout(r, config.total_time, config.n_slices)?;
    }
    let problem = GrapeProblem::new(ops, &config.target)?;

    let zero = apply_constraints(
        &PiecewiseControl::constant(config.total_time, config.n_slices, 0.0)?,
        ramp,
        config.amplitude_bound,
    )?;
    let zero_error = problem.error(&zero);
    if config.initial_values.is_none() && zero_error <= ALREADY_OPTIMAL {
        let (_, g) = problem.error_and_gradient(&zero)?;
        return Ok(OptimizationResult {
            best_control: zero,
            error_history: vec![zero_error],
            final_error: zero_error,
            gradient_norm_final: g.iter().fold(0.0, |a, b| a.max(b.abs())),
            iterations: 0,
            stop_reason: StopReason::AlreadyOptimal,
            best_start: 0,
            start_errors: vec![zero_error],
            wall_time: clock.elapsed().as_secs_f64(),
        });
    }

    let starts: Vec<Vec<f64>> = match &config.initial_values {
        Some(v) => vec![v.clone()],
        None => (0..config.n_starts)
            .map(|k| {
                random_initial_guess(
                    &config.guess,
                    config.total_time,
                    config.n_slices,
                    derive_seed(config.seed, k as u64),
                )
            })
            .collect(),
    };
    let outcomes: Vec<StartOutcome> = starts
        .into_par_iter()
        .map(|s| run_start(&problem, config, ramp, s))
        .collect::<Result<_>>()?;
    let start_errors: Vec<f64> = outcomes.iter().map(|o| o.error).collect();
    let (best_start, _) = start_errors
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, be), (i, &e)| if e < be { (i, e) } else { (bi, be) });
    let best = outcomes.into_iter().nth(best_start).expect("at least one start");
    Ok(OptimizationResult {
        best_control: best.control,
        final_error: best.error,
        error_history: best.history,
        gradient_norm_final: best.gradient_norm,
        iterations: best.iterations,
        stop_reason: best.stop,
        best_start,
        start_errors,
        wall_time: clock.elapsed().as_secs_f64(),
    })
}

/// `diag(e^{iφ_0}, …, e^{iφ_{N−1}})` with phases uniform in `[0, 2π)`.
pub fn random_diagonal_target(seed: u64, n: usize) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = CMatrix::zeros(n, n);
    for k in 0..n {
        let phi: f64 = rng.random_range(0.0..TAU);
        u[(k, k)] = C64::from_polar(1.0, phi);
    }
    u
}
