//! Dense complex matrix helpers, the Padé matrix exponential and a small
//! CSR operator used for exponential actions on blocks of vectors.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type RMatrix = DMatrix<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Frobenius norm.
pub fn fro_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Induced 1-norm (maximum absolute column sum).
pub fn one_norm(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// `‖U†U − I‖_F`.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    fro_norm(&(u.adjoint() * u - identity(u.nrows())))
}

/// Column-stacking vectorization: `vec(ρ)[i + d·j] = ρ[i, j]`.
pub fn vectorize(m: &CMatrix) -> nalgebra::DVector<C64> {
    nalgebra::DVector::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &[C64], dim: usize) -> CMatrix {
    CMatrix::from_column_slice(dim, dim, v)
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Backward-error bounds for the [m/m] approximants in double precision.
const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.53939833006323e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068e0;
const THETA13: f64 = 5.371920351148152e0;

fn pade_low(a: &CMatrix, coeffs: &[f64]) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let a2 = a * a;
    let m = coeffs.len() - 1;
    // Even powers A^0, A^2, A^4, ...
    let mut powers = vec![identity(n), a2.clone()];
    while powers.len() * 2 <= m + 1 {
        let next = powers.last().unwrap() * &a2;
        powers.push(next);
    }
    let mut u = CMatrix::zeros(n, n);
    let mut v = CMatrix::zeros(n, n);
    for (k, &c) in coeffs.iter().enumerate() {
        let p = &powers[k / 2];
        if k % 2 == 0 {
            v += p * C64::new(c, 0.0);
        } else {
            u += p * C64::new(c, 0.0);
        }
    }
    (a * u, v)
}

fn pade13(a: &CMatrix) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let b = |k: usize| C64::new(PADE13[k], 0.0);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let id = identity(n);
    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &id * b(1);
    let u = a * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &id * b(0);
    (u, v)
}

/// Matrix exponential by scaling and squaring with a degree-adaptive Padé
/// approximant.
pub fn expm(a: &CMatrix) -> Result<CMatrix> {
    if !is_finite(a) {
        return Err(Error::NonFinite("matrix exponential argument"));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    let norm = one_norm(a);
    if norm == 0.0 {
        return Ok(identity(n));
    }
    let (u, v, squarings) = if norm <= THETA3 {
        let (u, v) = pade_low(a, &PADE3);
        (u, v, 0)
    } else if norm <= THETA5 {
        let (u, v) = pade_low(a, &PADE5);
        (u, v, 0)
    } else if norm <= THETA7 {
        let (u, v) = pade_low(a, &PADE7);
        (u, v, 0)
    } else if norm <= THETA9 {
        let (u, v) = pade_low(a, &PADE9);
        (u, v, 0)
    } else {
        let s = (norm / THETA13).log2().ceil().max(0.0) as i32;
        let scaled = a * C64::new(2f64.powi(-s), 0.0);
        let (u, v) = pade13(&scaled);
        (u, v, s)
    };
    let p = &v + &u;
    let q = &v - &u;
    let lu = q.lu();
    let mut r = lu
        .solve(&p)
        .ok_or(Error::NonFinite("singular Padé denominator"))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if !is_finite(&r) {
        return Err(Error::NonFinite("matrix exponential result"));
    }
    Ok(r)
}

/// Exponential of the block-triangular matrix `[[A, E], [0, A]]`.
///
/// Returns `(exp(A), Dexp(A)[E])`, where the second entry is the Fréchet
/// derivative of the exponential at `A` in direction `E`.
pub fn expm_frechet(a: &CMatrix, e: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let n = a.nrows();
    if a.ncols() != n || e.nrows() != n || e.ncols() != n {
        return Err(Error::DimensionMismatch(
            "Fréchet direction must match the generator".into(),
        ));
    }
    let mut big = CMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(a);
    big.view_mut((n, n), (n, n)).copy_from(a);
    big.view_mut((0, n), (n, n)).copy_from(e);
    let x = expm(&big)?;
    Ok((
        x.view((0, 0), (n, n)).into_owned(),
        x.view((0, n), (n, n)).into_owned(),
    ))
}

/// Compressed sparse row matrix over `C64` with the diagonal held
/// separately.
#[derive(Debug, Clone)]
pub struct Csr {
    pub dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
    diagonal: Vec<C64>,
    /// Column sums of `|a_rc|` over the off-diagonal entries.
    offdiag_col_norms: Vec<f64>,
}

impl Csr {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(dim: usize, mut trip: Vec<(usize, usize, C64)>) -> Self {
        trip.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(trip.len());
        for (r, c, v) in trip {
            match merged.last_mut() {
                Some(last) if (last.0, last.1) == (r, c) => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        let mut diagonal = vec![C64::new(0.0, 0.0); dim];
        let mut offdiag_col_norms = vec![0.0; dim];
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(merged.len());
        let mut vals = Vec::with_capacity(merged.len());
        for (r, c, v) in merged {
            if v.norm() == 0.0 {
                continue;
            }
            if r == c {
                diagonal[r] = v;
            } else {
                row_ptr[r + 1] += 1;
                cols.push(c);
                vals.push(v);
                offdiag_col_norms[c] += v.norm();
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr {
            dim,
            row_ptr,
            cols,
            vals,
            diagonal,
            offdiag_col_norms,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len() + self.diagonal.iter().filter(|z| z.norm() > 0.0).count()
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.diagonal));
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] += self.vals[k];
            }
        }
        m
    }

    pub fn adjoint(&self) -> Csr {
        let mut trip = Vec::with_capacity(self.nnz());
        for (r, d) in self.diagonal.iter().enumerate() {
            trip.push((r, r, d.conj()));
        }
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                trip.push((self.cols[k], r, self.vals[k].conj()));
            }
        }
        Csr::from_triplets(self.dim, trip)
    }

    pub fn one_norm(&self) -> f64 {
        self.diagonal
            .iter()
            .zip(&self.offdiag_col_norms)
            .map(|(d, o)| d.norm() + o)
            .fold(0.0, f64::max)
    }

    /// `y = scale · (offdiag + diag) x` for a single column.
    #[inline]
    fn apply_col(&self, diag: &[C64], scale: f64, x: &[C64], y: &mut [C64]) {
        for r in 0..self.dim {
            let mut acc = diag[r] * x[r];
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[r] = acc * scale;
        }
    }
}

/// Generator `A = dt · (base + diag(shift))` acting on blocks of column
/// vectors.
pub struct ShiftedGenerator<'a> {
    pub base: &'a Csr,
    pub diag: Vec<C64>,
    pub dt: f64,
}

/// `A − cI` with the scalar `c` chosen to center the diagonal, which leaves
/// `exp(A) = e^c exp(A − cI)` exact while shrinking the norm.
struct Centered<'a> {
    base: &'a Csr,
    /// Diagonal of `A − cI` divided by `dt`.
    diag: Vec<C64>,
    dt: f64,
    center: C64,
    norm: f64,
}

impl ShiftedGenerator<'_> {
    fn centered(&self) -> Centered<'_> {
        let total: Vec<C64> = self
            .base
            .diagonal
            .iter()
            .zip(&self.diag)
            .map(|(a, b)| a + b)
            .collect();
        let (mut re_lo, mut re_hi, mut im_lo, mut im_hi) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for z in &total {
            re_lo = re_lo.min(z.re);
            re_hi = re_hi.max(z.re);
            im_lo = im_lo.min(z.im);
            im_hi = im_hi.max(z.im);
        }
        let c = if total.is_empty() {
            C64::new(0.0, 0.0)
        } else {
            C64::new(0.5 * (re_lo + re_hi), 0.5 * (im_lo + im_hi))
        };
        let diag: Vec<C64> = total.iter().map(|z| z - c).collect();
        let norm = self.dt
            * diag
                .iter()
                .zip(&self.base.offdiag_col_norms)
                .map(|(d, o)| d.norm() + o)
                .fold(0.0, f64::max);
        Centered {
            base: self.base,
            diag,
            dt: self.dt,
            center: c * self.dt,
            norm,
        }
    }
}

impl Centered<'_> {
    fn apply(&self, x: &CMatrix, y: &mut CMatrix, scale: f64) {
        let d = self.base.dim;
        for (xc, yc) in x
            .as_slice()
            .chunks_exact(d)
            .zip(y.as_mut_slice().chunks_exact_mut(d))
        {
            self.base.apply_col(&self.diag, self.dt * scale, xc, yc);
        }
    }
}

const TAYLOR_TOL: f64 = 1.1e-16;
const TAYLOR_MAX_TERMS: usize = 60;
/// Largest norm handled by a single Taylor substep.
const STEP_NORM: f64 = 3.5;

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// In-place `x ← exp(A) x` by sub-stepped Taylor summation.
pub fn expmv(gen: &ShiftedGenerator<'_>, x: &mut CMatrix) {
    let a = gen.centered();
    let steps = (a.norm / STEP_NORM).ceil().max(1.0) as usize;
    let inv = 1.0 / steps as f64;
    let mut term = x.clone();
    let mut next = x.clone();
    for _ in 0..steps {
        term.copy_from(x);
        let threshold = TAYLOR_TOL * max_abs(x);
        let mut prev_norm = f64::INFINITY;
        for k in 1..=TAYLOR_MAX_TERMS {
            a.apply(&term, &mut next, inv / k as f64);
            std::mem::swap(&mut term, &mut next);
            *x += &term;
            let tn = max_abs(&term);
            if tn + prev_norm <= threshold {
                break;
            }
            prev_norm = tn;
        }
    }
    *x *= a.center.exp();
}

/// In-place action of `exp([[A, E], [0, A]])` on the stacked block
/// `[dx; x]`, where `E = dt · diag(direction)`.
///
/// Starting from `dx = 0` this yields `x ← exp(A) x` and
/// `dx ← Dexp(A)[E] x`.
pub fn expmv_frechet(
    gen: &ShiftedGenerator<'_>,
    direction: &[C64],
    x: &mut CMatrix,
    dx: &mut CMatrix,
) {
    let d = gen.base.dim;
    let a = gen.centered();
    let emax = direction.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let bound = a.norm + gen.dt * emax;
    let steps = (bound / STEP_NORM).ceil().max(1.0) as usize;
    let inv = 1.0 / steps as f64;
    let mut tx = x.clone();
    let mut tdx = dx.clone();
    let mut nx = x.clone();
    let mut ndx = dx.clone();
    for _ in 0..steps {
        tx.copy_from(x);
        tdx.copy_from(dx);
        let threshold = TAYLOR_TOL * max_abs(x).max(max_abs(dx));
        let mut prev_norm = f64::INFINITY;
        for k in 1..=TAYLOR_MAX_TERMS {
            let s = inv / k as f64;
            a.apply(&tx, &mut nx, s);
            a.apply(&tdx, &mut ndx, s);
            let es = gen.dt * s;
            for (col_t, col_n) in tx
                .as_slice()
                .chunks_exact(d)
                .zip(ndx.as_mut_slice().chunks_exact_mut(d))
            {
                for r in 0..d {
                    col_n[r] += direction[r] * col_t[r] * es;
                }
            }
            std::mem::swap(&mut tx, &mut nx);
            std::mem::swap(&mut tdx, &mut ndx);
            *x += &tx;
            *dx += &tdx;
            let tn = max_abs(&tx).max(max_abs(&tdx));
            if tn + prev_norm <= threshold {
                break;
            }
            prev_norm = tn;
        }
    }
    let factor = a.center.exp();
    *x *= factor;
    *dx *= factor;
}
