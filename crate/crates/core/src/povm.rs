//! Finite POVMs on truncated Fock subspaces: binned quadrature projectors
//! and displaced photon-number detectors.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{hermite_functions, hermitian_eigenvalues, hermiticity_defect, CMatrix, OPERATOR_HERMITICITY_TOL};
use crate::quadrature::{gauss_hermite, gauss_legendre, QuadratureRule};

/// Lowest eigenvalue tolerated in a POVM element.
pub const ELEMENT_EIGENVALUE_FLOOR: f64 = -1e-10;
/// Gauss–Legendre order used per bin segment.
pub const BIN_RULE_ORDER: usize = 32;
/// Adaptive bisection stops once no overlap entry moves by more than this.
pub const BIN_REFINE_TOL: f64 = 1e-12;

/// `√(4·dim + 8)`: past the classical turning point of `ψ_{dim−1}` with margin.
pub fn default_x_max(dim: usize) -> f64 {
    (4.0 * dim as f64 + 8.0).sqrt()
}

/// Equal-width bins over `[−x_max, x_max]`, optionally with tail bins.
///
/// With `include_overflow` the two half-lines beyond `±x_max` become extra
/// outcomes, unless `merge_overflow` folds them into the outermost bins
/// (same outcome count as `n_bins`, still a resolution of the identity).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinLayout {
    pub x_max: f64,
    pub n_bins: usize,
    pub include_overflow: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub merge_overflow: bool,
}

impl BinLayout {
    pub fn new(x_max: f64, n_bins: usize, include_overflow: bool) -> Result<Self> {
        let layout = Self {
            x_max,
            n_bins,
            include_overflow,
            merge_overflow: false,
        };
        layout.validate()?;
        Ok(layout)
    }

    /// Layout for a `dim`-level subspace with the default range and separate
    /// overflow bins.
    pub fn for_dim(dim: usize, n_bins: usize) -> Result<Self> {
        Self::new(default_x_max(dim), n_bins, true)
    }

    /// `n_bins` outcomes whose outer bins extend to ±∞.
    pub fn merged(x_max: f64, n_bins: usize) -> Result<Self> {
        let layout = Self {
            x_max,
            n_bins,
            include_overflow: true,
            merge_overflow: true,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_max.is_finite() && self.x_max > 0.0) {
            return Err(Error::InvalidLayout(format!("x_max must be positive and finite, got {}", self.x_max)));
        }
        if self.n_bins == 0 {
            return Err(Error::InvalidLayout("n_bins must be positive".into()));
        }
        if self.merge_overflow && !self.include_overflow {
            return Err(Error::InvalidLayout("merge_overflow requires include_overflow".into()));
        }
        Ok(())
    }

    /// Number of outcomes this layout produces.
    pub fn n_outcomes(&self) -> usize {
        if self.include_overflow && !self.merge_overflow {
            self.n_bins + 2
        } else {
            self.n_bins
        }
    }

    fn inner_edges(&self) -> Vec<f64> {
        let width = 2.0 * self.x_max / self.n_bins as f64;
        (0..=self.n_bins)
            .map(|k| if k == self.n_bins { self.x_max } else { -self.x_max + width * k as f64 })
            .collect()
    }

    /// Outcome intervals from left to right.
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        let mut edges = self.inner_edges();
        if self.merge_overflow {
            edges[0] = f64::NEG_INFINITY;
            *edges.last_mut().unwrap() = f64::INFINITY;
        }
        let mut out = Vec::with_capacity(self.n_outcomes());
        if self.include_overflow && !self.merge_overflow {
            out.push((f64::NEG_INFINITY, -self.x_max));
        }
        out.extend(edges.windows(2).map(|w| (w[0], w[1])));
        if self.include_overflow && !self.merge_overflow {
            out.push((self.x_max, f64::INFINITY));
        }
        out
    }

    /// Outcome index of a sample; `None` when it falls outside every bin.
    pub fn outcome_of(&self, x: f64) -> Option<usize> {
        if x.is_nan() {
            return None;
        }
        let width = 2.0 * self.x_max / self.n_bins as f64;
        let offset = usize::from(self.include_overflow && !self.merge_overflow);
        if x < -self.x_max {
            return self.include_overflow.then_some(0);
        }
        if x >= self.x_max {
            return match (self.include_overflow, self.merge_overflow) {
                (false, _) if x == self.x_max => Some(self.n_bins - 1),
                (false, _) => None,
                (true, true) => Some(self.n_bins - 1),
                (true, false) => Some(self.n_bins + 1),
            };
        }
        let k = (((x + self.x_max) / width).floor() as usize).min(self.n_bins - 1);
        Some(k + offset)
    }
}

/// A finite set of POVM elements on a `dim`-level subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmSet {
    dim: usize,
    elements: Vec<CMatrix>,
    deficit: f64,
    label: String,
}

impl PovmSet {
    /// Checks every element for Hermiticity and positivity and records the
    /// completeness deficit.
    pub fn new(dim: usize, elements: Vec<CMatrix>, label: impl Into<String>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::Empty("POVM element list"));
        }
        for e in &elements {
            if e.nrows() != dim || e.ncols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: e.nrows() });
            }
            let defect = hermiticity_defect(e);
            if defect > OPERATOR_HERMITICITY_TOL {
                return Err(Error::NotHermitian(defect));
            }
            let min_ev = hermitian_eigenvalues(e)[0];
            if min_ev < ELEMENT_EIGENVALUE_FLOOR {
                return Err(Error::InvalidSpec(format!("POVM element has eigenvalue {min_ev:e}")));
            }
        }
        let deficit = completeness_deficit(dim, &elements);
        Ok(Self {
            dim,
            elements,
            deficit,
            label: label.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn deficit(&self) -> f64 {
        self.deficit
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Born-rule probabilities `Tr(ρ E_j)`.
    pub fn probabilities(&self, rho: &CMatrix) -> Vec<f64> {
        self.elements.iter().map(|e| trace_product(rho, e)).collect()
    }
}

/// `Re Tr(A B)` without forming the product.
pub(crate) fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for k in 0..n {
        for l in 0..n {
            let (x, y) = (a[(k, l)], b[(l, k)]);
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

fn completeness_deficit(dim: usize, elements: &[CMatrix]) -> f64 {
    let mut residual = CMatrix::identity(dim, dim);
    for e in elements {
        residual -= e;
    }
    hermitian_eigenvalues(&residual)
        .into_iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Spectral norm of `1_d − Σ_j E_j`.
pub fn povm_deficit(set: &PovmSet) -> f64 {
    completeness_deficit(set.dim, &set.elements)
}

#[derive(Serialize, Deserialize)]
struct PovmSetRepr {
    dim: usize,
    label: String,
    deficit: f64,
    elements: Vec<Vec<[f64; 2]>>,
}

pub(crate) fn matrix_to_pairs(m: &CMatrix) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            out.push([z.re, z.im]);
        }
    }
    out
}

pub(crate) fn pairs_to_matrix(dim: usize, pairs: &[[f64; 2]]) -> Result<CMatrix> {
    if pairs.len() != dim * dim {
        return Err(Error::DimensionMismatch { expected: dim * dim, found: pairs.len() });
    }
    Ok(CMatrix::from_fn(dim, dim, |r, c| {
        let [re, im] = pairs[r * dim + c];
        Complex64::new(re, im)
    }))
}

impl Serialize for PovmSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        PovmSetRepr {
            dim: self.dim,
            label: self.label.clone(),
            deficit: self.deficit,
            elements: self.elements.iter().map(matrix_to_pairs).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PovmSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = PovmSetRepr::deserialize(deserializer)?;
        let elements = repr
            .elements
            .iter()
            .map(|p| pairs_to_matrix(repr.dim, p))
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        Ok(PovmSet {
            dim: repr.dim,
            elements,
            deficit: repr.deficit,
            label: repr.label,
        })
    }
}

/// Overlap integrals `∫_a^b ψ_k ψ_ℓ dx` for `k, ℓ < dim`, row-major.
fn finite_overlaps(a: f64, b: f64, dim: usize, rule: &QuadratureRule) -> Vec<f64> {
    fn panel(a: f64, b: f64, dim: usize, rule: &QuadratureRule) -> Vec<f64> {
        let mapped = rule.mapped(a, b);
        let mut acc = vec![0.0; dim * dim];
        for (&x, &w) in mapped.nodes.iter().zip(&mapped.weights) {
            let psi = hermite_functions(dim - 1, x);
            for k in 0..dim {
                let wk = w * psi[k];
                for l in k..dim {
                    acc[k * dim + l] += wk * psi[l];
                }
            }
        }
        for k in 0..dim {
            for l in 0..k {
                acc[k * dim + l] = acc[l * dim + k];
            }
        }
        acc
    }

    fn refine(a: f64, b: f64, dim: usize, rule: &QuadratureRule, whole: Vec<f64>, depth: u32) -> Vec<f64> {
        let mid = 0.5 * (a + b);
        let left = panel(a, mid, dim, rule);
        let right = panel(mid, b, dim, rule);
        let split: Vec<f64> = left.iter().zip(&right).map(|(l, r)| l + r).collect();
        let change = split
            .iter()
            .zip(&whole)
            .fold(0.0f64, |acc, (s, w)| acc.max((s - w).abs()));
        if change < BIN_REFINE_TOL || depth >= 30 {
            return split;
        }
        let l = refine(a, mid, dim, rule, left, depth + 1);
        let r = refine(mid, b, dim, rule, right, depth + 1);
        l.iter().zip(&r).map(|(l, r)| l + r).collect()
    }

    // Panels no wider than 2 so a single 32-point panel never straddles
    // many oscillations of ψ_{dim−1}.
    let pieces = ((b - a) / 2.0).ceil().max(1.0) as usize;
    let h = (b - a) / pieces as f64;
    let mut total = vec![0.0; dim * dim];
    for p in 0..pieces {
        let lo = a + h * p as f64;
        let hi = if p + 1 == pieces { b } else { lo + h };
        let whole = panel(lo, hi, dim, rule);
        for (t, v) in total.iter_mut().zip(refine(lo, hi, dim, rule, whole, 0)) {
            *t += v;
        }
    }
    total
}

fn full_line_overlaps(dim: usize) -> Vec<f64> {
    let rule = gauss_hermite(dim + 1);
    let mut acc = vec![0.0; dim * dim];
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let psi = hermite_functions(dim - 1, x);
        for k in 0..dim {
            for l in 0..dim {
                acc[k * dim + l] += w * psi[k] * psi[l];
            }
        }
    }
    acc
}

/// `∫_c^∞ ψ_k ψ_ℓ`.
fn upper_tail_overlaps(c: f64, dim: usize, rule: &QuadratureRule) -> Vec<f64> {
    if c < 0.0 {
        // full line minus the mirrored lower tail
        let full = full_line_overlaps(dim);
        let mirrored = upper_tail_overlaps(-c, dim, rule);
        return (0..dim * dim)
            .map(|i| {
                let parity = if (i / dim + i % dim).is_multiple_of(2) { 1.0 } else { -1.0 };
                full[i] - parity * mirrored[i]
            })
            .collect();
    }
    // ψ_k² beyond the turning point plus 12 is below e^{-140}.
    let far = c.max((2.0 * dim as f64 + 1.0).sqrt()) + 12.0;
    finite_overlaps(c, far, dim, rule)
}

/// Real overlap matrix `S_kℓ = ∫_a^b ψ_k ψ_ℓ dx`, row-major.
pub fn bin_overlaps(a: f64, b: f64, dim: usize) -> Result<Vec<f64>> {
    if a.partial_cmp(&b) != Some(std::cmp::Ordering::Less) {
        return Err(Error::InvalidInterval { a, b });
    }
    if dim == 0 {
        return Err(Error::Empty("subspace dimension"));
    }
    let rule = gauss_legendre(BIN_RULE_ORDER);
    let out = match (a.is_infinite(), b.is_infinite()) {
        (true, true) => full_line_overlaps(dim),
        (false, false) => finite_overlaps(a, b, dim, &rule),
        (false, true) => upper_tail_overlaps(a, dim, &rule),
        (true, false) => {
            let tail = upper_tail_overlaps(-b, dim, &rule);
            (0..dim * dim)
                .map(|i| if (i / dim + i % dim).is_multiple_of(2) { tail[i] } else { -tail[i] })
                .collect()
        }
    };
    Ok(out)
}

/// `M_kℓ = ∫_a^b ψ_k(x) ψ_ℓ(x) dx · e^{i(k−ℓ)θ}`: the quadrature projector
/// `|x_θ⟩⟨x_θ|` integrated over a bin and restricted to `dim` Fock levels.
pub fn quadrature_bin_operator(theta: f64, a: f64, b: f64, dim: usize) -> Result<CMatrix> {
    let overlaps = bin_overlaps(a, b, dim)?;
    Ok(phase_dress(&overlaps, theta, dim))
}

fn phase_dress(overlaps: &[f64], theta: f64, dim: usize) -> CMatrix {
    CMatrix::from_fn(dim, dim, |k, l| {
        let (s, c) = ((k as f64 - l as f64) * theta).sin_cos();
        Complex64::new(c, s) * overlaps[k * dim + l]
    })
}

/// One element per outcome of `layout`, in left-to-right order.
pub fn build_binned_quadrature_povm(theta: f64, layout: &BinLayout, dim: usize) -> Result<PovmSet> {
    layout.validate()?;
    let elements = layout
        .intervals()
        .into_par_iter()
        .map(|(a, b)| quadrature_bin_operator(theta, a, b, dim))
        .collect::<Result<Vec<_>>>()?;
    let label = format!(
        "quadrature theta={theta} bins={} x_max={} overflow={}{}",
        layout.n_bins,
        layout.x_max,
        layout.include_overflow,
        if layout.merge_overflow { " merged" } else { "" }
    );
    PovmSet::new(dim, elements, label)
}

/// `dim + 4⌈|β|²⌉ + 20`.
pub fn displacement_guard(beta: Complex64, dim: usize) -> usize {
    dim + 4 * beta.norm_sqr().ceil() as usize + 20
}

/// Displacement `D(β) = exp(β a† − β* a)` on a `work_dim`-level truncation.
///
/// The generator is anti-Hermitian, so the exponential is taken through the
/// eigendecomposition of `i(β a† − β* a)` and is unitary to rounding.
pub fn displacement_matrix(beta: Complex64, work_dim: usize) -> CMatrix {
    if beta == Complex64::new(0.0, 0.0) {
        return CMatrix::identity(work_dim, work_dim);
    }
    let i = Complex64::new(0.0, 1.0);
    // H = i(β a† − β* a); a†_{n+1,n} = √(n+1)
    let h = CMatrix::from_fn(work_dim, work_dim, |r, c| {
        if r == c + 1 {
            i * beta * (r as f64).sqrt()
        } else if c == r + 1 {
            -i * beta.conj() * (c as f64).sqrt()
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let eig = SymmetricEigen::new(h);
    let v = &eig.eigenvectors;
    let phases = CMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(0.0, -l).exp()));
    v * phases * v.adjoint()
}

fn check_guard(beta: Complex64, n: usize, dim: usize, work_dim: usize) -> Result<()> {
    let required = displacement_guard(beta, dim);
    if work_dim < required {
        return Err(Error::TruncationGuard { work_dim, required });
    }
    if n >= work_dim {
        return Err(Error::DimensionMismatch { expected: work_dim, found: n + 1 });
    }
    Ok(())
}

fn projected_column(d: &CMatrix, n: usize, dim: usize) -> CMatrix {
    let col = d.view((0, n), (dim, 1)).into_owned();
    &col * col.adjoint()
}

/// Top-left `dim × dim` block of `D(β)|n⟩⟨n|D(β)†`.
pub fn displaced_number_operator(beta: Complex64, n: usize, dim: usize, work_dim: usize) -> Result<CMatrix> {
    check_guard(beta, n, dim, work_dim)?;
    if beta == Complex64::new(0.0, 0.0) {
        let mut m = CMatrix::zeros(dim, dim);
        if n < dim {
            m[(n, n)] = Complex64::new(1.0, 0.0);
        }
        return Ok(m);
    }
    Ok(projected_column(&displacement_matrix(beta, work_dim), n, dim))
}

/// Displaced detector outcomes `n = 0 .. n_detect − 1` for one displacement,
/// sharing a single matrix exponential.
pub fn displaced_number_family(beta: Complex64, n_detect: usize, dim: usize, work_dim: usize) -> Result<Vec<CMatrix>> {
    check_guard(beta, n_detect.saturating_sub(1), dim, work_dim)?;
    let d = displacement_matrix(beta, work_dim);
    Ok((0..n_detect).map(|n| projected_column(&d, n, dim)).collect())
}

/// The displaced detector as a POVM set, with all `work_dim` outcomes so the
/// identity is resolved on the `dim`-level block.
pub fn build_displaced_counting_povm(beta: Complex64, dim: usize, work_dim: usize) -> Result<PovmSet> {
    let elements = displaced_number_family(beta, work_dim, dim, work_dim)?;
    PovmSet::new(dim, elements, format!("displaced counting beta={beta} work_dim={work_dim}"))
}
