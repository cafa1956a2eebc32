//! Counting linearly independent POVM elements.
//!
//! Every measurement outcome is a linear functional `ρ ↦ Tr(ρ E)` on the
//! Hermitian operators supported on a set of Fock levels. Writing each `E` in
//! the real coordinates of [`crate::fock::hermitian_to_real_vector`] turns a
//! set of settings into a real design matrix; its numerical rank is the
//! number of independent elements, and the settings are informationally
//! complete when that rank reaches `s²`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::ops::RangeInclusive;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{quadrature_amplitudes, real_coordinates, CMatrix, QuadraturePoint};
use crate::povm::{
    bin_overlaps, displaced_number_family, displacement_guard, BinLayout, PovmSet,
};
use crate::quadrature::gauss_hermite;
use crate::support::SupportSet;

/// Relative factor in the default rank threshold `max(rows, cols) · σ_max · ε`.
pub const RANK_RELATIVE_EPS: f64 = 1e-12;
/// Reports whose gap falls below this are flagged as ill-conditioned.
pub const ILL_CONDITIONED_GAP: f64 = 1e3;
/// Two phases closer than this (modulo π) count as the same setting.
pub const PHASE_DISTINCT_TOL: f64 = 1e-9;

/// `m(2d − m)` for `m < d`, `d²` otherwise.
pub fn predicted_rank(d: usize, m: usize) -> usize {
    if m < d {
        m * (2 * d - m)
    } else {
        d * d
    }
}

/// `Σ_{k=1}^{m} (2(d − k + 1) − 1)`: each extra quadrature contributes two
/// fewer new elements than the previous one.
pub fn incremental_rank_sum(d: u64, m: u64) -> u64 {
    (1..=m).map(|k| 2 * (d - k + 1) - 1).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum MeasurementMode {
    /// Point evaluations `p(x_i, θ_j)` at Gauss–Hermite nodes.
    ContinuousFunctional,
    /// Integrated bins of one layout per phase.
    BinnedPovm { layout: BinLayout },
}

/// Phases, support and sampling mode of a homodyne measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSpec {
    pub support: SupportSet,
    pub phases: Vec<f64>,
    pub x_nodes_per_phase: usize,
    pub mode: MeasurementMode,
}

/// Gauss–Hermite order used per phase: `2·max(support) + 2`.
pub fn default_x_nodes(support: &SupportSet) -> usize {
    2 * support.max() + 2
}

/// Default phase settings for `m` cuts.
///
/// Contiguous supports `{0..d−1}` use `θ_j = jπ/m`. Any other support can
/// alias: a difference `q` of Fock indices makes `e^{iqθ}` repeat, and
/// equispacing over `[0, π)` then lands several cuts on the same functional
/// (for `{0,4,8}` and `m = 2`, `θ = π/2` reproduces `θ = 0`). Those supports
/// use `θ_j = jπ/(m·q_max)` with `q_max = max − min`, which keeps every
/// `q(θ_j − θ_k)` strictly inside `(0, π)`.
pub fn default_phases(support: &SupportSet, m: usize) -> Vec<f64> {
    let denom = if support.is_contiguous_from_zero() {
        m as f64
    } else {
        (m * support.span().max(1)) as f64
    };
    (0..m).map(|j| j as f64 * PI / denom).collect()
}

fn phase_distance_mod_pi(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

impl MeasurementSpec {
    pub fn continuous(support: SupportSet, phases: Vec<f64>) -> Result<Self> {
        let spec = Self {
            x_nodes_per_phase: default_x_nodes(&support),
            support,
            phases,
            mode: MeasurementMode::ContinuousFunctional,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn binned(support: SupportSet, phases: Vec<f64>, layout: BinLayout) -> Result<Self> {
        let spec = Self {
            x_nodes_per_phase: default_x_nodes(&support),
            support,
            phases,
            mode: MeasurementMode::BinnedPovm { layout },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.phases.is_empty() {
            return Err(Error::InvalidSpec("at least one phase is required".into()));
        }
        if let Some(bad) = self.phases.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidSpec(format!("phase {bad} is not finite")));
        }
        for (i, &a) in self.phases.iter().enumerate() {
            for &b in &self.phases[i + 1..] {
                if phase_distance_mod_pi(a, b) < PHASE_DISTINCT_TOL {
                    return Err(Error::InvalidSpec(format!(
                        "phases {a} and {b} coincide modulo π"
                    )));
                }
            }
        }
        match self.mode {
            MeasurementMode::ContinuousFunctional => {
                let need = 2 * self.support.max() + 1;
                if self.x_nodes_per_phase < need {
                    return Err(Error::InvalidSpec(format!(
                        "{} nodes per phase cannot resolve degree {}; need at least {need}",
                        self.x_nodes_per_phase,
                        2 * self.support.max()
                    )));
                }
            }
            MeasurementMode::BinnedPovm { layout } => layout.validate()?,
        }
        Ok(())
    }
}

/// Real design matrix of a measurement: one row per outcome functional,
/// `s²` columns.
pub fn design_matrix(spec: &MeasurementSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let idx = spec.support.indices();
    let s = idx.len();
    let rows: Vec<Vec<f64>> = match spec.mode {
        MeasurementMode::ContinuousFunctional => {
            let rule = gauss_hermite(spec.x_nodes_per_phase);
            spec.phases
                .iter()
                .flat_map(|&theta| {
                    rule.nodes.iter().map(move |&x| {
                        let a = quadrature_amplitudes(idx, QuadraturePoint::new(x, theta));
                        let col = nalgebra::DVector::from_vec(a);
                        real_coordinates(&(&col * col.adjoint()))
                    })
                })
                .collect()
        }
        MeasurementMode::BinnedPovm { layout } => {
            let full_dim = spec.support.max() + 1;
            let overlaps = layout
                .intervals()
                .into_par_iter()
                .map(|(a, b)| bin_overlaps(a, b, full_dim))
                .collect::<Result<Vec<_>>>()?;
            spec.phases
                .iter()
                .flat_map(|&theta| {
                    overlaps.iter().map(move |ov| {
                        let sub = CMatrix::from_fn(s, s, |k, l| {
                            let (i, j) = (idx[k], idx[l]);
                            let (sn, cs) = ((i as f64 - j as f64) * theta).sin_cos();
                            Complex64::new(cs, sn) * ov[i * full_dim + j]
                        });
                        real_coordinates(&sub)
                    })
                })
                .collect()
        }
    };
    Ok(stack_rows(&rows, s * s))
}

fn stack_rows(rows: &[Vec<f64>], cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c])
}

/// Numerical rank with its singular spectrum and gap diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub numerical_rank: usize,
    pub predicted_rank: Option<usize>,
    /// Descending.
    pub singular_values: Vec<f64>,
    /// `σ_rank / σ_{rank+1}`; `+∞` when no singular value was cut.
    pub gap: f64,
    pub tolerance_used: f64,
}

impl RankReport {
    pub fn is_ill_conditioned(&self) -> bool {
        self.gap < ILL_CONDITIONED_GAP
    }

    /// Rank equals the number of real parameters, `s²`.
    pub fn is_complete(&self, s: usize) -> bool {
        self.numerical_rank == s * s
    }

    pub fn agrees_with_prediction(&self) -> Option<bool> {
        self.predicted_rank.map(|p| p == self.numerical_rank)
    }
}

#[derive(Serialize, Deserialize)]
struct RankReportRepr {
    rank: usize,
    predicted: Option<usize>,
    /// `null` encodes an exact (infinite) gap.
    gap: Option<f64>,
    tolerance: f64,
    singular_values: Vec<f64>,
}

impl Serialize for RankReport {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        RankReportRepr {
            rank: self.numerical_rank,
            predicted: self.predicted_rank,
            gap: self.gap.is_finite().then_some(self.gap),
            tolerance: self.tolerance_used,
            singular_values: self.singular_values.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RankReport {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let r = RankReportRepr::deserialize(deserializer)?;
        Ok(RankReport {
            numerical_rank: r.rank,
            predicted_rank: r.predicted,
            singular_values: r.singular_values,
            gap: r.gap.unwrap_or(f64::INFINITY),
            tolerance_used: r.tolerance,
        })
    }
}

/// Counts singular values above `tolerance`, or above
/// `max(rows, cols) · σ_max · 1e−12` when none is given.
pub fn numerical_rank(matrix: &DMatrix<f64>, tolerance: Option<f64>) -> Result<RankReport> {
    if matrix.is_empty() {
        return Err(Error::Empty("matrix"));
    }
    let mut sv: Vec<f64> = matrix.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let sigma_max = sv[0];
    let tol = tolerance
        .unwrap_or_else(|| matrix.nrows().max(matrix.ncols()) as f64 * sigma_max * RANK_RELATIVE_EPS);
    let rank = sv.iter().take_while(|&&s| s > tol).count();
    let gap = if rank == 0 || rank == sv.len() || sv[rank] == 0.0 {
        f64::INFINITY
    } else {
        sv[rank - 1] / sv[rank]
    };
    Ok(RankReport {
        numerical_rank: rank,
        predicted_rank: None,
        singular_values: sv,
        gap,
        tolerance_used: tol,
    })
}

/// Rank of the point functionals for explicit phases, optionally with a
/// user tolerance. Attaches the closed-form prediction for `{0..d−1}`.
pub fn rank_for_phases(support: &SupportSet, phases: &[f64], tolerance: Option<f64>) -> Result<RankReport> {
    let spec = MeasurementSpec::continuous(support.clone(), phases.to_vec())?;
    let mut report = numerical_rank(&design_matrix(&spec)?, tolerance)?;
    if support.is_contiguous_from_zero() {
        report.predicted_rank = Some(predicted_rank(support.len(), phases.len()));
    }
    Ok(report)
}

/// Rank induced by `m` default phase settings on `support`.
pub fn rank_for(support: &SupportSet, m: usize) -> RankReport {
    assert!(m >= 1, "at least one phase setting is required");
    rank_for_phases(support, &default_phases(support, m), None)
        .expect("default phases always form a valid spec")
}

/// Smallest `m ≤ m_max` whose default phases reach rank `s²`.
pub fn min_phases_for_completeness(support: &SupportSet, m_max: usize) -> Option<usize> {
    let full = support.len() * support.len();
    (1..=m_max).find(|&m| rank_for(support, m).numerical_rank == full)
}

/// Grid of rank reports over contiguous supports, rows by `d`, columns by `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub d_values: Vec<usize>,
    pub m_values: Vec<usize>,
    pub cells: Vec<Vec<RankReport>>,
}

/// A cell where the numerical rank differs from the closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Disagreement {
    pub d: usize,
    pub m: usize,
    pub numerical: usize,
    pub predicted: usize,
}

impl SweepTable {
    pub fn cell(&self, d: usize, m: usize) -> Option<&RankReport> {
        let r = self.d_values.iter().position(|&v| v == d)?;
        let c = self.m_values.iter().position(|&v| v == m)?;
        Some(&self.cells[r][c])
    }

    pub fn is_ic(&self, d: usize, m: usize) -> bool {
        self.cell(d, m).is_some_and(|c| c.numerical_rank == d * d)
    }

    pub fn disagreements(&self) -> Vec<Disagreement> {
        let mut out = Vec::new();
        for (r, &d) in self.d_values.iter().enumerate() {
            for (c, &m) in self.m_values.iter().enumerate() {
                let cell = &self.cells[r][c];
                let predicted = predicted_rank(d, m);
                if cell.numerical_rank != predicted {
                    out.push(Disagreement { d, m, numerical: cell.numerical_rank, predicted });
                }
            }
        }
        out
    }

    /// Smallest gap over all cells.
    pub fn min_gap(&self) -> f64 {
        self.cells.iter().flatten().map(|c| c.gap).fold(f64::INFINITY, f64::min)
    }

    /// `d,m=1,...,m=M` header, integer ranks, `*` marking complete cells.
    pub fn to_csv(&self) -> String {
        self.render_csv(|_, _, cell| cell.numerical_rank)
    }

    /// Same layout holding the closed-form values.
    pub fn predicted_csv(&self) -> String {
        self.render_csv(|d, m, _| predicted_rank(d, m))
    }

    fn render_csv(&self, value: impl Fn(usize, usize, &RankReport) -> usize) -> String {
        let mut out = String::from("d");
        for m in &self.m_values {
            let _ = write!(out, ",m={m}");
        }
        out.push('\n');
        for (r, &d) in self.d_values.iter().enumerate() {
            let _ = write!(out, "{d}");
            for (c, &m) in self.m_values.iter().enumerate() {
                let v = value(d, m, &self.cells[r][c]);
                let mark = if v == d * d { "*" } else { "" };
                let _ = write!(out, ",{v}{mark}");
            }
            out.push('\n');
        }
        out
    }
}

/// Rank of every `(d, m)` cell for contiguous supports with default phases.
/// Cells are computed in parallel and assembled in grid order.
pub fn sweep_table(d_range: RangeInclusive<usize>, m_range: RangeInclusive<usize>) -> Result<SweepTable> {
    let d_values: Vec<usize> = d_range.collect();
    let m_values: Vec<usize> = m_range.collect();
    if d_values.is_empty() || m_values.is_empty() {
        return Err(Error::Empty("sweep range"));
    }
    if d_values[0] == 0 || m_values[0] == 0 {
        return Err(Error::InvalidSpec("d and m must be positive".into()));
    }
    let grid: Vec<(usize, usize)> = d_values
        .iter()
        .flat_map(|&d| m_values.iter().map(move |&m| (d, m)))
        .collect();
    let flat: Vec<RankReport> = grid
        .par_iter()
        .map(|&(d, m)| rank_for(&SupportSet::contiguous(d).expect("d > 0"), m))
        .collect();
    let cells = flat.chunks(m_values.len()).map(<[RankReport]>::to_vec).collect();
    Ok(SweepTable { d_values, m_values, cells })
}

/// Rank of the real span of all elements of the given POVM sets.
pub fn povm_span_rank(sets: &[PovmSet]) -> Result<RankReport> {
    let first = sets.first().ok_or(Error::Empty("POVM set list"))?;
    let dim = first.dim();
    if let Some(bad) = sets.iter().find(|s| s.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: bad.dim() });
    }
    let rows: Vec<Vec<f64>> = sets
        .iter()
        .flat_map(|s| s.elements().iter().map(real_coordinates))
        .collect();
    numerical_rank(&stack_rows(&rows, dim * dim), None)
}

/// Rank of the displaced photon-counting elements `D(β)|n⟩⟨n|D(β)†`,
/// `n < n_detect`, over all listed displacements.
pub fn displaced_counting_rank(betas: &[Complex64], n_detect: usize, dim: usize) -> Result<RankReport> {
    if betas.is_empty() {
        return Err(Error::Empty("displacement list"));
    }
    if n_detect < dim {
        return Err(Error::InvalidSpec(format!("n_detect = {n_detect} must be at least dim = {dim}")));
    }
    let families = betas
        .par_iter()
        .map(|&beta| {
            let work_dim = displacement_guard(beta, dim.max(n_detect));
            displaced_number_family(beta, n_detect, dim, work_dim)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<f64>> = families.iter().flatten().map(real_coordinates).collect();
    numerical_rank(&stack_rows(&rows, dim * dim), None)
}

/// Outcome of checking the half-dimension phase count on a sparse support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseFinding {
    pub d: usize,
    pub support: SupportSet,
    /// `⌊d/2⌋ + 1`.
    pub claimed_min_phases: usize,
    pub observed_min_phases: Option<usize>,
    pub ranks: Vec<usize>,
    pub holds: bool,
}

/// Sweeps supports `{0, step, …, step·(d−1)}` for `d ≤ d_max`, comparing the
/// observed minimal number of phases with `⌊d/2⌋ + 1`. Deviations are
/// reported, not treated as errors.
pub fn sparse_support_sweep(d_max: usize, step: usize) -> Result<Vec<SparseFinding>> {
    (1..=d_max)
        .into_par_iter()
        .map(|d| {
            let support = SupportSet::arithmetic(d, step)?;
            let m_max = d.max(2);
            let ranks: Vec<usize> = (1..=m_max).map(|m| rank_for(&support, m).numerical_rank).collect();
            let observed = ranks.iter().position(|&r| r == d * d).map(|i| i + 1);
            let claimed = d / 2 + 1;
            Ok(SparseFinding {
                d,
                support,
                claimed_min_phases: claimed,
                observed_min_phases: observed,
                ranks,
                holds: observed == Some(claimed),
            })
        })
        .collect()
}
