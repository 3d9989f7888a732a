//! Dynamic Lie algebra of drift and control, and how many diagonal qudit
//! directions it reaches.
//!
//! Elements are anti-Hermitian matrices `iH` with the real inner product
//! `⟨A, B⟩ = Re tr(A†B)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{commutator, fro_norm, CMatrix, C64};
use crate::model::OperatorSet;

pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct LieClosure {
    /// Orthonormal anti-Hermitian basis.
    pub basis: Vec<CMatrix>,
    pub dimension: usize,
    /// The basis hit `max_dim` before closing.
    pub truncated: bool,
}

fn inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Growing orthonormal set with a relative acceptance tolerance and a size
/// cap.
struct Span {
    basis: Vec<CMatrix>,
    tol: f64,
    max_dim: usize,
    truncated: bool,
}

enum Added {
    Yes,
    No,
    Full,
}

impl Span {
    fn new(tol: f64, max_dim: usize) -> Self {
        Span {
            basis: Vec::new(),
            tol,
            max_dim,
            truncated: false,
        }
    }

    /// Adds the component of `m` orthogonal to the span when it is larger
    /// than `tol · ‖m‖`. Two Gram–Schmidt passes keep the basis orthonormal.
    fn try_add(&mut self, m: CMatrix) -> Added {
        let norm = fro_norm(&m);
        if norm == 0.0 || !norm.is_finite() {
            return Added::No;
        }
        let mut r = m;
        for _ in 0..2 {
            for b in &self.basis {
                let c = inner(b, &r);
                r -= b * C64::new(c, 0.0);
            }
        }
        let res = fro_norm(&r);
        if res <= self.tol * norm {
            return Added::No;
        }
        if self.basis.len() >= self.max_dim {
            self.truncated = true;
            return Added::Full;
        }
        // restore exact anti-Hermiticity lost to rounding
        let r = (&r - r.adjoint()) * C64::new(0.5 / res, 0.0);
        self.basis.push(r);
        Added::Yes
    }

    fn into_closure(self) -> LieClosure {
        LieClosure {
            dimension: self.basis.len(),
            basis: self.basis,
            truncated: self.truncated,
        }
    }
}

fn check_generators(generators: &[CMatrix]) -> Result<usize> {
    let first = generators
        .first()
        .ok_or_else(|| Error::DimensionMismatch("at least one generator required".into()))?;
    let d = first.nrows();
    for g in generators {
        if g.nrows() != d || g.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "generators must all be {d}×{d}, got {}×{}",
                g.nrows(),
                g.ncols()
            )));
        }
        if !g.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite("generator"));
        }
    }
    Ok(d)
}

fn anti_hermitian(h: &CMatrix) -> CMatrix {
    h * C64::new(0.0, 1.0)
}

/// Span of all nested commutators of `i·generators`.
pub fn lie_closure(generators: &[CMatrix], tol: f64, max_dim: usize) -> Result<LieClosure> {
    check_generators(generators)?;
    let mut span = Span::new(tol, max_dim);
    for g in generators {
        if let Added::Full = span.try_add(anti_hermitian(g)) {
            return Ok(span.into_closure());
        }
    }
    let mut a = 0;
    while a < span.basis.len() {
        for b in 0..a {
            let c = commutator(&span.basis[a], &span.basis[b]);
            if let Added::Full = span.try_add(c) {
                return Ok(span.into_closure());
            }
        }
        a += 1;
    }
    Ok(span.into_closure())
}

/// Ideal generated by `i·seeds` inside the algebra generated by
/// `i·generators`: the smallest subspace containing the seeds and invariant
/// under `ad` of every generator.
pub fn ideal_closure(
    seeds: &[CMatrix],
    generators: &[CMatrix],
    tol: f64,
    max_dim: usize,
) -> Result<LieClosure> {
    let all: Vec<CMatrix> = seeds.iter().chain(generators).cloned().collect();
    check_generators(&all)?;
    let gens: Vec<CMatrix> = generators.iter().map(anti_hermitian).collect();
    let mut span = Span::new(tol, max_dim);
    for s in seeds {
        if let Added::Full = span.try_add(anti_hermitian(s)) {
            return Ok(span.into_closure());
        }
    }
    let mut a = 0;
    while a < span.basis.len() {
        for g in &gens {
            let c = commutator(g, &span.basis[a]);
            if let Added::Full = span.try_add(c) {
                return Ok(span.into_closure());
            }
        }
        a += 1;
    }
    Ok(span.into_closure())
}

/// Rank of the traceless diagonal parts of `basis`, restricted to the qudit
/// levels with every TLS in its ground state.
pub fn diagonal_rank(basis: &[CMatrix], n_levels: usize, env_dim: usize, tol: f64) -> usize {
    if basis.is_empty() {
        return 0;
    }
    let rows = DMatrix::from_fn(basis.len(), n_levels, |r, k| basis[r][(k * env_dim, k * env_dim)].im);
    let rows = DMatrix::from_fn(basis.len(), n_levels, |r, k| {
        rows[(r, k)] - rows.row(r).mean()
    });
    rows.singular_values().iter().filter(|&&s| s > tol).count()
}

/// Number of independent traceless diagonal qudit directions that the
/// control adds to the dynamics; `N − 1` means every diagonal unitary is
/// reachable up to the free drift evolution.
///
/// These are the directions of the ideal generated by the control `D` in
/// the algebra of `{H_0, D}`. The drift itself only contributes a fixed
/// evolution for a given gate time, so it is not counted.
pub fn diagonal_reachability(ops: &OperatorSet) -> Result<usize> {
    let d = ops.dim();
    diagonal_reachability_with(ops, DEFAULT_TOL, d * d)
}

pub fn diagonal_reachability_with(ops: &OperatorSet, tol: f64, max_dim: usize) -> Result<usize> {
    let gens = [ops.drift.clone(), ops.control_generator.clone()];
    let ideal = ideal_closure(&gens[1..], &gens, tol, max_dim)?;
    if ideal.truncated {
        return Err(Error::Indeterminate(ideal.dimension));
    }
    Ok(diagonal_rank(&ideal.basis, ops.n_levels, ops.env_dim(), tol))
}
