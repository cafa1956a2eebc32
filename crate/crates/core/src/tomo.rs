//! Simulated homodyne data and maximum-likelihood reconstruction.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{hermitian_part, homodyne_pdf, CMatrix, DensityMatrix, QuadraturePoint};
use crate::povm::{build_binned_quadrature_povm, default_x_max, matrix_to_pairs, pairs_to_matrix, trace_product, BinLayout, PovmSet};

/// Points in the inverse-CDF sampling grid.
pub const SAMPLING_GRID_POINTS: usize = 4096;
pub const DEFAULT_DILUTION: f64 = 0.5;
pub const DEFAULT_MAX_ITERS: usize = 5000;
/// Iteration stops once one step improves the mean log-likelihood by less.
pub const LIKELIHOOD_GAIN_TOL: f64 = 1e-10;
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// Draws `n_samples` quadrature values from `p(x | θ)` on `[−x_max, x_max]`
/// with `x_max` the default for `rho`'s dimension.
pub fn sample_homodyne(rho: &DensityMatrix, theta: f64, n_samples: usize, seed: u64) -> Vec<f64> {
    sample_homodyne_in(rho, theta, default_x_max(rho.dim()), n_samples, seed)
}

/// Inverse-CDF sampling on a uniform grid; the CDF is the trapezoid
/// cumulative sum of the density and is interpolated linearly.
pub fn sample_homodyne_in(rho: &DensityMatrix, theta: f64, x_max: f64, n_samples: usize, seed: u64) -> Vec<f64> {
    let n = SAMPLING_GRID_POINTS;
    let h = 2.0 * x_max / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|i| -x_max + h * i as f64).collect();
    let pdf: Vec<f64> = grid
        .iter()
        .map(|&x| homodyne_pdf(rho, QuadraturePoint::new(x, theta)).max(0.0))
        .collect();
    let mut cdf = Vec::with_capacity(n);
    cdf.push(0.0);
    for i in 1..n {
        let prev = cdf[i - 1];
        cdf.push(prev + 0.5 * h * (pdf[i - 1] + pdf[i]));
    }
    let total = cdf[n - 1];
    for c in cdf.iter_mut() {
        *c /= total;
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..n_samples)
        .map(|_| {
            let u: f64 = rng.random();
            let hi = cdf.partition_point(|&c| c <= u).clamp(1, n - 1);
            let lo = hi - 1;
            let span = cdf[hi] - cdf[lo];
            let t = if span > 0.0 { (u - cdf[lo]) / span } else { 0.5 };
            grid[lo] + t * h
        })
        .collect()
}

/// Histogram over the outcomes of `layout`. Samples outside every bin (only
/// possible without overflow bins) are dropped.
pub fn bin_samples(samples: &[f64], layout: &BinLayout) -> Vec<u64> {
    let mut counts = vec![0u64; layout.n_outcomes()];
    for &x in samples {
        if let Some(k) = layout.outcome_of(x) {
            counts[k] += 1;
        }
    }
    counts
}

/// Binned homodyne counts for a list of settings.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementData {
    pub phases: Vec<f64>,
    pub layouts: Vec<BinLayout>,
    pub counts: Vec<Vec<u64>>,
    pub totals: Vec<u64>,
    pub seed: u64,
}

impl MeasurementData {
    pub fn new(phases: Vec<f64>, layouts: Vec<BinLayout>, counts: Vec<Vec<u64>>, seed: u64) -> Result<Self> {
        let totals = counts.iter().map(|c| c.iter().sum()).collect();
        let data = Self { phases, layouts, counts, totals, seed };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.phases.len();
        if n == 0 {
            return Err(Error::InvalidData("no settings".into()));
        }
        if self.layouts.len() != n || self.counts.len() != n || self.totals.len() != n {
            return Err(Error::InvalidData(format!(
                "{} phases but {} layouts, {} count vectors, {} totals",
                n,
                self.layouts.len(),
                self.counts.len(),
                self.totals.len()
            )));
        }
        for (i, ((layout, counts), &total)) in self.layouts.iter().zip(&self.counts).zip(&self.totals).enumerate() {
            layout.validate()?;
            if counts.len() != layout.n_outcomes() {
                return Err(Error::InvalidData(format!(
                    "setting {i}: {} counts for {} outcomes",
                    counts.len(),
                    layout.n_outcomes()
                )));
            }
            if counts.iter().sum::<u64>() != total || total == 0 {
                return Err(Error::InvalidData(format!("setting {i}: counts do not sum to a positive total {total}")));
            }
        }
        Ok(())
    }

    pub fn n_settings(&self) -> usize {
        self.phases.len()
    }

    /// Common per-setting total, when all settings share one.
    pub fn total_per_setting(&self) -> Option<u64> {
        let first = *self.totals.first()?;
        self.totals.iter().all(|&t| t == first).then_some(first)
    }
}

#[derive(Serialize, Deserialize)]
struct MeasurementDataRepr {
    settings: Vec<f64>,
    layouts: Vec<BinLayout>,
    counts: Vec<Vec<u64>>,
    seed: u64,
    totals: Vec<u64>,
}

impl Serialize for MeasurementData {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MeasurementDataRepr {
            settings: self.phases.clone(),
            layouts: self.layouts.clone(),
            counts: self.counts.clone(),
            seed: self.seed,
            totals: self.totals.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MeasurementData {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let r = MeasurementDataRepr::deserialize(deserializer)?;
        let data = MeasurementData {
            phases: r.settings,
            layouts: r.layouts,
            counts: r.counts,
            totals: r.totals,
            seed: r.seed,
        };
        data.validate().map_err(serde::de::Error::custom)?;
        Ok(data)
    }
}

/// Samples and bins every setting. Setting `i` uses seed `seed ^ i`, so the
/// result does not depend on how settings are scheduled across threads.
pub fn simulate_measurement(
    rho: &DensityMatrix,
    phases: &[f64],
    layout: &BinLayout,
    samples_per_setting: usize,
    seed: u64,
) -> Result<MeasurementData> {
    layout.validate()?;
    let counts: Vec<Vec<u64>> = phases
        .par_iter()
        .enumerate()
        .map(|(i, &theta)| {
            let samples = sample_homodyne_in(rho, theta, layout.x_max, samples_per_setting, seed ^ i as u64);
            bin_samples(&samples, layout)
        })
        .collect();
    MeasurementData::new(phases.to_vec(), vec![*layout; phases.len()], counts, seed)
}

/// Binned quadrature POVMs matching the settings of `data`.
pub fn povms_for(data: &MeasurementData, dim: usize) -> Result<Vec<PovmSet>> {
    data.phases
        .par_iter()
        .zip(&data.layouts)
        .map(|(&theta, layout)| build_binned_quadrature_povm(theta, layout, dim))
        .collect()
}

/// Multinomial log-likelihood of a flattened list of outcomes.
#[derive(Debug, Clone)]
pub struct Likelihood {
    elements: Vec<CMatrix>,
    frequencies: Vec<f64>,
    dim: usize,
}

impl Likelihood {
    /// `frequencies[j]` is the fraction of all events landing on `elements[j]`.
    pub fn new(dim: usize, elements: Vec<CMatrix>, frequencies: Vec<f64>) -> Result<Self> {
        if elements.len() != frequencies.len() {
            return Err(Error::InvalidData(format!(
                "{} elements but {} frequencies",
                elements.len(),
                frequencies.len()
            )));
        }
        if let Some(e) = elements.iter().find(|e| e.nrows() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: e.nrows() });
        }
        Ok(Self { elements, frequencies, dim })
    }

    pub fn from_data(data: &MeasurementData, povms: &[PovmSet], dim: usize) -> Result<Self> {
        data.validate()?;
        if povms.len() != data.n_settings() {
            return Err(Error::InvalidData(format!(
                "{} POVM sets for {} settings",
                povms.len(),
                data.n_settings()
            )));
        }
        let grand_total: u64 = data.totals.iter().sum();
        let mut elements = Vec::new();
        let mut frequencies = Vec::new();
        for (i, (set, counts)) in povms.iter().zip(&data.counts).enumerate() {
            if set.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: set.dim() });
            }
            if set.len() != counts.len() {
                return Err(Error::InvalidData(format!(
                    "setting {i}: {} POVM elements for {} count bins",
                    set.len(),
                    counts.len()
                )));
            }
            for (e, &n) in set.elements().iter().zip(counts) {
                elements.push(e.clone());
                frequencies.push(n as f64 / grand_total as f64);
            }
        }
        Self::new(dim, elements, frequencies)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn probabilities(&self, rho: &CMatrix) -> Vec<f64> {
        self.elements.iter().map(|e| trace_product(rho, e)).collect()
    }

    /// `Σ_j f_j ln p_j(ρ)`, with `p_j` floored at [`PROBABILITY_FLOOR`].
    pub fn log_likelihood(&self, rho: &CMatrix) -> f64 {
        self.probabilities(rho)
            .iter()
            .zip(&self.frequencies)
            .filter(|(_, &f)| f > 0.0)
            .map(|(&p, &f)| f * p.max(PROBABILITY_FLOOR).ln())
            .sum()
    }

    /// True when some outcome with events has zero predicted probability.
    pub fn is_singular_at(&self, rho: &CMatrix) -> bool {
        self.probabilities(rho)
            .iter()
            .zip(&self.frequencies)
            .any(|(&p, &f)| f > 0.0 && p <= 0.0)
    }

    /// `R(ρ) = Σ_j (f_j / p_j) E_j`.
    pub fn r_operator(&self, rho: &CMatrix) -> CMatrix {
        let mut r = CMatrix::zeros(self.dim, self.dim);
        for ((e, &f), p) in self.elements.iter().zip(&self.frequencies).zip(self.probabilities(rho)) {
            if f > 0.0 {
                r += e.scale(f / p.max(PROBABILITY_FLOOR));
            }
        }
        r
    }

    /// One diluted step `ρ ← N[(1−ε+εR) ρ (1−ε+εR)]`.
    pub fn diluted_step(&self, rho: &CMatrix, epsilon: f64) -> CMatrix {
        let r = self.r_operator(rho);
        let a = CMatrix::identity(self.dim, self.dim).scale(1.0 - epsilon) + r.scale(epsilon);
        let next = hermitian_part(&(&a * rho * a.adjoint()));
        let tr = next.trace().re;
        next.unscale(tr)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub estimate: DensityMatrix,
    /// Mean log-likelihood per event after each accepted step, starting with
    /// the initial state.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Some outcome with events had zero predicted probability at some step.
    pub singular: bool,
}

impl ReconstructionResult {
    pub fn final_log_likelihood(&self) -> f64 {
        *self.log_likelihood_trace.last().expect("trace holds the initial value")
    }
}

#[derive(Serialize, Deserialize)]
struct ReconstructionRepr {
    dim: usize,
    estimate: Vec<[f64; 2]>,
    iterations: usize,
    converged: bool,
    final_loglik: f64,
    #[serde(default)]
    log_likelihood_trace: Vec<f64>,
    #[serde(default)]
    singular: bool,
}

impl Serialize for ReconstructionResult {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ReconstructionRepr {
            dim: self.estimate.dim(),
            estimate: matrix_to_pairs(self.estimate.matrix()),
            iterations: self.iterations,
            converged: self.converged,
            final_loglik: self.final_log_likelihood(),
            log_likelihood_trace: self.log_likelihood_trace.clone(),
            singular: self.singular,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ReconstructionResult {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = ReconstructionRepr::deserialize(deserializer)?;
        let m = pairs_to_matrix(r.dim, &r.estimate).map_err(D::Error::custom)?;
        let estimate = DensityMatrix::new(m).map_err(D::Error::custom)?;
        let mut trace = r.log_likelihood_trace;
        if trace.is_empty() {
            trace.push(r.final_loglik);
        }
        Ok(ReconstructionResult {
            estimate,
            log_likelihood_trace: trace,
            iterations: r.iterations,
            converged: r.converged,
            singular: r.singular,
        })
    }
}

/// Maximum-likelihood estimate by the diluted RρR iteration, started from
/// the maximally mixed state.
pub fn ml_reconstruct(
    data: &MeasurementData,
    povms: &[PovmSet],
    dim: usize,
    max_iters: usize,
    epsilon: f64,
) -> Result<ReconstructionResult> {
    let likelihood = Likelihood::from_data(data, povms, dim)?;
    let start = DensityMatrix::maximally_mixed(dim)?;
    ml_iterate(&likelihood, &start, max_iters, epsilon)
}

/// Runs the diluted iteration from `start`.
///
/// A step that would lower the likelihood is retried with half the dilution
/// parameter (down to `ε·2⁻³⁰`); if none helps, the iteration has converged.
pub fn ml_iterate(
    likelihood: &Likelihood,
    start: &DensityMatrix,
    max_iters: usize,
    epsilon: f64,
) -> Result<ReconstructionResult> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidSpec(format!("dilution {epsilon} must lie in (0, 1]")));
    }
    if start.dim() != likelihood.dim() {
        return Err(Error::DimensionMismatch { expected: likelihood.dim(), found: start.dim() });
    }
    let mut rho = start.matrix().clone();
    let mut current = likelihood.log_likelihood(&rho);
    let mut singular = likelihood.is_singular_at(&rho);
    let mut trace = vec![current];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iters {
        let mut eps = epsilon;
        let mut accepted = None;
        for _ in 0..=30 {
            let candidate = likelihood.diluted_step(&rho, eps);
            let value = likelihood.log_likelihood(&candidate);
            if value >= current {
                accepted = Some((candidate, value));
                break;
            }
            eps *= 0.5;
        }
        iterations += 1;
        let Some((next, value)) = accepted else {
            converged = true;
            break;
        };
        let gain = value - current;
        rho = next;
        current = value;
        singular |= likelihood.is_singular_at(&rho);
        trace.push(current);
        if gain < LIKELIHOOD_GAIN_TOL {
            converged = true;
            break;
        }
    }

    Ok(ReconstructionResult {
        estimate: DensityMatrix::new(rho)?,
        log_likelihood_trace: trace,
        iterations,
        converged,
        singular,
    })
}

fn hermitian_sqrt(m: &CMatrix) -> CMatrix {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let roots = eig.eigenvalues.map(|l| Complex64::new(l.max(0.0).sqrt(), 0.0));
    &eig.eigenvectors * CMatrix::from_diagonal(&roots) * eig.eigenvectors.adjoint()
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: sigma.dim() });
    }
    let root = hermitian_sqrt(rho.matrix());
    let inner = hermitian_part(&(&root * sigma.matrix() * &root));
    let eig = SymmetricEigen::new(inner);
    let t: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    Ok(t * t)
}

/// `½ Tr |ρ − σ|`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: sigma.dim() });
    }
    let diff = rho.matrix() - sigma.matrix();
    let eig = SymmetricEigen::new(hermitian_part(&diff));
    Ok(0.5 * eig.eigenvalues.iter().map(|l| l.abs()).sum::<f64>())
}

/// Largest spread of predicted bin probabilities across `states`, over all
/// phases and outcomes of `layout`. Zero means the settings cannot tell the
/// states apart.
pub fn ambiguity_witness(states: &[DensityMatrix], phases: &[f64], layout: &BinLayout) -> Result<f64> {
    let first = states.first().ok_or(Error::Empty("state list"))?;
    let dim = first.dim();
    if let Some(s) = states.iter().find(|s| s.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: s.dim() });
    }
    let mut worst = 0.0f64;
    for &theta in phases {
        let povm = build_binned_quadrature_povm(theta, layout, dim)?;
        let probs: Vec<Vec<f64>> = states.iter().map(|s| povm.probabilities(s.matrix())).collect();
        for j in 0..povm.len() {
            let (lo, hi) = probs
                .iter()
                .map(|p| p[j])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            worst = worst.max(hi - lo);
        }
    }
    Ok(worst)
}
