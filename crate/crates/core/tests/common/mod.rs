#![allow(dead_code)]

use cvic::fock::{CMatrix, DensityMatrix, FockVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn gaussian(rng: &mut ChaCha20Rng) -> f64 {
    // Box–Muller
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Ginibre-distributed random state of the given rank.
pub fn random_density(rng: &mut ChaCha20Rng, dim: usize, rank: usize) -> DensityMatrix {
    let g = CMatrix::from_fn(dim, rank, |_, _| c(gaussian(rng), gaussian(rng)));
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    let m = m.unscale(tr);
    DensityMatrix::new((&m + m.adjoint()).scale(0.5)).unwrap()
}

pub fn random_hermitian(rng: &mut ChaCha20Rng, dim: usize) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| c(gaussian(rng), gaussian(rng)));
    (&g + g.adjoint()).scale(0.5)
}

pub fn pure(amps: &[Complex64]) -> DensityMatrix {
    DensityMatrix::from_pure(&FockVector::new(amps.to_vec()).unwrap()).unwrap()
}

/// The three d = 2 states with equal position statistics:
/// (|0⟩⟨0| + |1⟩⟨1|)/2 and (|0⟩ ± i|1⟩)/√2.
pub fn counterexample_states() -> Vec<DensityMatrix> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    vec![
        DensityMatrix::diagonal(&[0.5, 0.5]).unwrap(),
        pure(&[c(s, 0.0), c(0.0, s)]),
        pure(&[c(s, 0.0), c(0.0, -s)]),
    ]
}

pub fn max_entry_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// Rank by Gaussian elimination with full pivoting; an oracle independent
/// of the SVD path.
pub fn elimination_rank(rows: &[Vec<f64>], tol: f64) -> usize {
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    let n_rows = a.len();
    if n_rows == 0 {
        return 0;
    }
    let n_cols = a[0].len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut rank = 0;
    let mut col_used = vec![false; n_cols];
    for _ in 0..n_rows.min(n_cols) {
        let mut best = (0.0, 0, 0);
        for (r, row) in a.iter().enumerate().skip(rank) {
            for (cidx, &v) in row.iter().enumerate() {
                if !col_used[cidx] && v.abs() > best.0 {
                    best = (v.abs(), r, cidx);
                }
            }
        }
        if best.0 <= tol * scale {
            break;
        }
        let (_, pr, pc) = best;
        a.swap(rank, pr);
        col_used[pc] = true;
        let pivot = a[rank][pc];
        let prow = a[rank].clone();
        for row in a.iter_mut().skip(rank + 1) {
            let f = row[pc] / pivot;
            for (x, p) in row.iter_mut().zip(&prow) {
                *x -= f * p;
            }
        }
        rank += 1;
    }
    rank
}
