//! Fock-basis numerics: Hermite functions, quadrature-eigenstate overlaps,
//! homodyne densities, coherent states and a real parametrization of
//! Hermitian operators.
//!
//! Quadrature conventions are dimensionless: `⟨n|x_θ⟩ = ψ_n(x) e^{inθ}` with
//! `ψ_n(x) = π^{-1/4} (2^n n!)^{-1/2} H_n(x) e^{-x²/2}`, so the vacuum has
//! quadrature variance 1/2.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Largest order accepted by [`hermite_poly`].
pub const HERMITE_POLY_MAX_ORDER: usize = 40;
pub const HERMITICITY_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const EIGENVALUE_FLOOR: f64 = -1e-10;
/// Tolerance on the Hermiticity of generic operators (POVM elements etc.).
pub const OPERATOR_HERMITICITY_TOL: f64 = 1e-10;

/// Physicists' Hermite polynomial `H_n(x)`.
pub fn hermite_poly(n: usize, x: f64) -> Result<f64> {
    if n > HERMITE_POLY_MAX_ORDER {
        return Err(Error::HermiteOverflow(n));
    }
    let (mut prev, mut cur) = (1.0, 2.0 * x);
    if n == 0 {
        return Ok(prev);
    }
    for k in 1..n {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Normalized Hermite functions `ψ_0(x) ..= ψ_{n_max}(x)`.
///
/// Runs the normalized three-term recurrence on an unscaled seed and tracks
/// the exponent separately, so large orders far out on the real line neither
/// underflow nor overflow.
pub fn hermite_functions(n_max: usize, x: f64) -> Vec<f64> {
    const RESCALE: f64 = 1e150;
    let base = -0.5 * x * x - 0.25 * PI.ln();
    let mut raw = Vec::with_capacity(n_max + 1);
    let mut shifts = Vec::with_capacity(n_max + 1);
    let mut shift = 0.0;
    let (mut prev, mut cur) = (0.0f64, 1.0f64);
    raw.push(cur);
    shifts.push(shift);
    for n in 0..n_max {
        let nf = n as f64;
        let next = x * (2.0 / (nf + 1.0)).sqrt() * cur - (nf / (nf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            prev /= RESCALE;
            cur /= RESCALE;
            shift += RESCALE.ln();
        }
        raw.push(cur);
        shifts.push(shift);
    }
    raw.iter()
        .zip(&shifts)
        .map(|(&r, &s)| {
            if r == 0.0 {
                0.0
            } else {
                r.signum() * (r.abs().ln() + s + base).exp()
            }
        })
        .collect()
}

/// Normalized harmonic-oscillator eigenfunction `ψ_n(x)`.
pub fn hermite_function(n: usize, x: f64) -> f64 {
    hermite_functions(n, x)[n]
}

/// A point on a rotated quadrature axis.
///
/// The phase is kept in `[0, π)`; `(x, θ + π)` is the same eigenstate as
/// `(−x, θ)`, so reduction flips the sign of `x` when it crosses an odd
/// multiple of π.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraturePoint {
    x: f64,
    theta: f64,
}

impl QuadraturePoint {
    pub fn new(x: f64, theta: f64) -> Self {
        let turns = (theta / PI).floor();
        let mut reduced = theta - turns * PI;
        if reduced >= PI {
            reduced -= PI;
        }
        if reduced < 0.0 {
            reduced = 0.0;
        }
        let odd = (turns as i64).rem_euclid(2) == 1;
        Self {
            x: if odd { -x } else { x },
            theta: reduced,
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// `⟨n|x_θ⟩ = ψ_n(x) e^{inθ}`.
pub fn quadrature_amplitude(n: usize, point: QuadraturePoint) -> Complex64 {
    hermite_function(n, point.x) * phase_factor(n as f64 * point.theta)
}

/// Overlaps `⟨n|x_θ⟩` for every `n` in `indices`.
pub fn quadrature_amplitudes(indices: &[usize], point: QuadraturePoint) -> Vec<Complex64> {
    let n_max = indices.iter().copied().max().unwrap_or(0);
    let psi = hermite_functions(n_max, point.x);
    indices
        .iter()
        .map(|&n| psi[n] * phase_factor(n as f64 * point.theta))
        .collect()
}

fn phase_factor(angle: f64) -> Complex64 {
    let (s, c) = angle.sin_cos();
    Complex64::new(c, s)
}

/// Ket on the first `dim` Fock states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockVector {
    amplitudes: Vec<Complex64>,
}

impl FockVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::Empty("Fock vector"));
        }
        Ok(Self { amplitudes })
    }

    /// Number state `|n⟩` in a `dim`-dimensional space.
    pub fn basis(dim: usize, n: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::DimensionMismatch { expected: dim, found: n + 1 });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[n] = Complex64::new(1.0, 0.0);
        Self::new(amps)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= 1e-12
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm_sqr().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidDensityMatrix("cannot normalize a zero vector".into()));
        }
        Ok(Self {
            amplitudes: self.amplitudes.iter().map(|c| c / norm).collect(),
        })
    }
}

/// Largest entrywise deviation `max |A_kℓ − conj(A_ℓk)|`.
pub fn hermiticity_defect(op: &CMatrix) -> f64 {
    if !op.is_square() {
        return f64::INFINITY;
    }
    let n = op.nrows();
    let mut worst = 0.0f64;
    for k in 0..n {
        for l in k..n {
            worst = worst.max((op[(k, l)] - op[(l, k)].conj()).norm());
        }
    }
    worst
}

/// `(A + A^H) / 2`.
pub fn hermitian_part(op: &CMatrix) -> CMatrix {
    (op + op.adjoint()).scale(0.5)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(op: &CMatrix) -> Vec<f64> {
    let mut evs: Vec<f64> = SymmetricEigen::new(hermitian_part(op))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    evs.sort_by(|a, b| a.total_cmp(b));
    evs
}

/// Trace-one, positive semidefinite Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidDensityMatrix(format!(
                "shape {}x{} is not square and non-empty",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let defect = hermiticity_defect(&matrix);
        if defect > HERMITICITY_TOL {
            return Err(Error::NotHermitian(defect));
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {trace} differs from 1")));
        }
        let min_ev = hermitian_eigenvalues(&matrix)[0];
        if min_ev < EIGENVALUE_FLOOR {
            return Err(Error::InvalidDensityMatrix(format!(
                "smallest eigenvalue {min_ev:e} is negative"
            )));
        }
        Ok(Self { matrix })
    }

    /// Projector onto a (normalized on input) ket.
    pub fn from_pure(state: &FockVector) -> Result<Self> {
        let v = state.normalized()?;
        let col = nalgebra::DVector::from_column_slice(v.amplitudes());
        Self::new(&col * col.adjoint())
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Empty("density matrix dimension"));
        }
        Self::new(CMatrix::identity(dim, dim).unscale(dim as f64))
    }

    pub fn diagonal(probabilities: &[f64]) -> Result<Self> {
        let n = probabilities.len();
        Self::new(CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(probabilities[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.matrix)[0]
    }

    /// `R_φ ρ R_φ†` with `R_φ = diag(e^{inφ})`.
    pub fn phase_rotated(&self, phi: f64) -> Self {
        let d = self.dim();
        let m = CMatrix::from_fn(d, d, |k, l| {
            self.matrix[(k, l)] * phase_factor((k as f64 - l as f64) * phi)
        });
        Self { matrix: m }
    }
}

/// Homodyne probability density `p(x, θ) = ⟨x_θ|ρ|x_θ⟩`.
///
/// Validity of `rho` (Hermitian, unit trace, PSD) is enforced when the
/// [`DensityMatrix`] is built.
pub fn homodyne_pdf(rho: &DensityMatrix, point: QuadraturePoint) -> f64 {
    let d = rho.dim();
    let indices: Vec<usize> = (0..d).collect();
    let amps = quadrature_amplitudes(&indices, point);
    let m = rho.matrix();
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..d {
        let mut row = Complex64::new(0.0, 0.0);
        for l in 0..d {
            row += m[(k, l)] * amps[l];
        }
        acc += amps[k].conj() * row;
    }
    acc.re
}

/// Coherent state truncated to `n_cut` Fock states together with the
/// probability mass left outside.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedCoherent {
    pub state: FockVector,
    pub tail_mass: f64,
}

/// `c_n = e^{-|α|²/2} αⁿ / √(n!)` for `n < n_cut`.
pub fn coherent_amplitudes(alpha: Complex64, n_cut: usize) -> TruncatedCoherent {
    assert!(n_cut > 0, "n_cut must be positive");
    let mut amps = Vec::with_capacity(n_cut);
    let mut c = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    amps.push(c);
    for n in 1..n_cut {
        c = c * alpha / (n as f64).sqrt();
        amps.push(c);
    }
    let kept: f64 = amps.iter().map(|c| c.norm_sqr()).sum();
    let tail_mass = poisson_tail(alpha.norm_sqr(), n_cut).unwrap_or_else(|| (1.0 - kept).max(0.0));
    TruncatedCoherent {
        state: FockVector { amplitudes: amps },
        tail_mass,
    }
}

/// `Σ_{n ≥ start} e^{-λ} λⁿ/n!`, summed directly when it is small enough for
/// `1 − head` to lose precision. `None` means the complement is accurate.
fn poisson_tail(lambda: f64, start: usize) -> Option<f64> {
    if lambda == 0.0 {
        return Some(0.0);
    }
    if (start as f64) < lambda {
        return None;
    }
    let mut term = photon_number_probability_from_mean(lambda, start);
    let mut total = 0.0;
    let mut n = start;
    while term > 0.0 {
        total += term;
        n += 1;
        term *= lambda / n as f64;
        if term < total * 1e-18 {
            break;
        }
    }
    if total > 1e-3 {
        None
    } else {
        Some(total)
    }
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn photon_number_probability_from_mean(mean: f64, n: usize) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (-mean + n as f64 * mean.ln() - ln_factorial(n)).exp()
}

/// Photon-number statistics of a coherent state, `e^{-|α|²} |α|^{2n} / n!`.
///
/// Only `|α|²` enters the evaluation.
pub fn photon_number_probability(alpha: Complex64, n: usize) -> f64 {
    photon_number_probability_from_mean(alpha.norm_sqr(), n)
}

/// Real coordinates of a Hermitian operator in the orthonormal basis
/// `{E_kk}`, `{(E_kℓ + E_ℓk)/√2}`, `{i(E_kℓ − E_ℓk)/√2}` (`k < ℓ`), in that
/// order. The map is an isometry: `v(A)·v(B) = Tr(AB)`.
pub fn hermitian_to_real_vector(op: &CMatrix) -> Result<Vec<f64>> {
    let defect = hermiticity_defect(op);
    if defect > OPERATOR_HERMITICITY_TOL {
        return Err(Error::NotHermitian(defect));
    }
    Ok(real_coordinates(op))
}

pub(crate) fn real_coordinates(op: &CMatrix) -> Vec<f64> {
    let s = op.nrows();
    let mut out = Vec::with_capacity(s * s);
    out.extend((0..s).map(|k| op[(k, k)].re));
    let sqrt2 = std::f64::consts::SQRT_2;
    for k in 0..s {
        for l in k + 1..s {
            out.push(sqrt2 * 0.5 * (op[(k, l)].re + op[(l, k)].re));
        }
    }
    for k in 0..s {
        for l in k + 1..s {
            out.push(sqrt2 * 0.5 * (op[(k, l)].im - op[(l, k)].im));
        }
    }
    out
}

/// Inverse of [`hermitian_to_real_vector`].
pub fn real_vector_to_hermitian(v: &[f64]) -> Result<CMatrix> {
    let s = (v.len() as f64).sqrt().round() as usize;
    if s * s != v.len() || s == 0 {
        return Err(Error::DimensionMismatch { expected: s * s, found: v.len() });
    }
    let mut m = CMatrix::zeros(s, s);
    for k in 0..s {
        m[(k, k)] = Complex64::new(v[k], 0.0);
    }
    let pairs = s * (s - 1) / 2;
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    let mut idx = 0;
    for k in 0..s {
        for l in k + 1..s {
            let z = Complex64::new(v[s + idx] * inv, v[s + pairs + idx] * inv);
            m[(k, l)] = z;
            m[(l, k)] = z.conj();
            idx += 1;
        }
    }
    Ok(m)
}
