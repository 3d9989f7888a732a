//! Box-projected quasi-Newton minimizer with Armijo backtracking.

use std::collections::VecDeque;

use super::{OptimizerKind, StopReason};

pub(crate) struct Settings {
    pub kind: OptimizerKind,
    pub max_iterations: usize,
    pub convergence_tol: f64,
    pub gradient_tol: f64,
    pub memory: usize,
    /// Largest coordinate change attempted by a steepest-descent step.
    pub initial_step: f64,
}

pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub history: Vec<f64>,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub stop: StopReason,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACK: usize = 30;
/// Consecutive small improvements before declaring convergence.
const PATIENCE: usize = 3;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project(x: &mut [f64], bound: f64) {
    for v in x {
        *v = v.clamp(-bound, bound);
    }
}

/// Gradient with components that push against an active bound removed.
fn projected_gradient(x: &[f64], g: &[f64], bound: f64) -> Vec<f64> {
    x.iter()
        .zip(g)
        .map(|(&xi, &gi)| {
            let at_upper = xi >= bound && gi < 0.0;
            let at_lower = xi <= -bound && gi > 0.0;
            if at_upper || at_lower {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Two-loop recursion: returns `−H g`.
fn lbfgs_direction(g: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

pub(crate) fn minimize<F>(x0: Vec<f64>, bound: f64, mut eval: F, settings: &Settings) -> Outcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0;
    project(&mut x, bound);
    let (mut f, mut g) = eval(&x);
    let mut history = vec![f];
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut small_steps = 0;
    let mut iterations = 0;
    let mut stop = StopReason::MaxIterations;

    loop {
        let pg = projected_gradient(&x, &g, bound);
        let gnorm = inf_norm(&pg);
        if gnorm < settings.gradient_tol {
            stop = StopReason::GradientSmall;
            break;
        }
        if iterations >= settings.max_iterations {
            break;
        }

        let steepest = |pg: &[f64]| -> (Vec<f64>, f64) {
            let d: Vec<f64> = pg.iter().map(|v| -v).collect();
            let alpha = (settings.initial_step / inf_norm(pg)).min(1.0);
            (d, alpha)
        };
        let use_memory = settings.kind == OptimizerKind::Lbfgs && !memory.is_empty();
        let (mut d, mut alpha) = if use_memory {
            let d = lbfgs_direction(&pg, &memory);
            if dot(&d, &pg) < 0.0 {
                (d, 1.0)
            } else {
                memory.clear();
                steepest(&pg)
            }
        } else {
            steepest(&pg)
        };

        let mut accepted = None;
        for attempt in 0..2 {
            for _ in 0..MAX_BACKTRACK {
                let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
                project(&mut trial, bound);
                let step: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
                let decrease = dot(&g, &step);
                if inf_norm(&step) == 0.0 {
                    break;
                }
                let (ft, gt) = eval(&trial);
                if ft.is_finite() && ft <= f + ARMIJO * decrease.min(0.0) && ft <= f {
                    accepted = Some((trial, ft, gt, step));
                    break;
                }
                alpha *= 0.5;
            }
            if accepted.is_some() || attempt == 1 || !use_memory {
                break;
            }
            // quasi-Newton direction failed; retry along the gradient
            memory.clear();
            let (sd, sa) = steepest(&pg);
            d = sd;
            alpha = sa;
        }

        let Some((x_new, f_new, g_new, s)) = accepted else {
            stop = StopReason::Stalled;
            break;
        };
        iterations += 1;
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            memory.push_back((s, y, 1.0 / sy));
            if memory.len() > settings.memory {
                memory.pop_front();
            }
        }
        let improvement = f - f_new;
        x = x_new;
        f = f_new;
        g = g_new;
        history.push(f);
        if improvement < settings.convergence_tol {
            small_steps += 1;
            if small_steps >= PATIENCE {
                stop = StopReason::Converged;
                break;
            }
        } else {
            small_steps = 0;
        }
    }

    let gradient_norm = inf_norm(&projected_gradient(&x, &g, bound));
    Outcome {
        x,
        f,
        history,
        gradient_norm,
        iterations,
        stop,
    }
}
