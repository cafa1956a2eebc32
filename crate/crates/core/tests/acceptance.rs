//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use cvic::completeness::*;
use cvic::fock::{
    coherent_amplitudes, hermitian_to_real_vector, homodyne_pdf, photon_number_probability, DensityMatrix,
    QuadraturePoint,
};
use cvic::povm::{build_binned_quadrature_povm, default_x_max, BinLayout};
use cvic::tomo::*;
use cvic::SupportSet;
use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

const TABLE_I: [[usize; 6]; 7] = [
    [3, 4, 4, 4, 4, 4],
    [5, 8, 9, 9, 9, 9],
    [7, 12, 15, 16, 16, 16],
    [9, 16, 21, 24, 25, 25],
    [11, 20, 27, 32, 35, 36],
    [13, 24, 33, 40, 45, 48],
    [15, 28, 39, 48, 55, 60],
];

struct Outcome {
    pass: bool,
    detail: String,
    notes: Vec<String>,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into(), notes: Vec::new() }
}

fn table_reproduction() -> Outcome {
    let start = Instant::now();
    let table = sweep_table(2..=8, 1..=6).expect("valid ranges");
    let elapsed = start.elapsed().as_secs_f64();
    let mut mismatches = Vec::new();
    for (i, row) in TABLE_I.iter().enumerate() {
        for (j, &want) in row.iter().enumerate() {
            let got = table.cell(i + 2, j + 1).unwrap().numerical_rank;
            if got != want {
                mismatches.push(format!("d={} m={}: {got} != {want}", i + 2, j + 1));
            }
        }
    }
    let gap = table.min_gap();
    let pass = mismatches.is_empty() && gap >= 1e6 && elapsed < 30.0;
    let mut o = outcome(
        pass,
        format!("42 cells, {} mismatches, min gap {gap:.2e}, {elapsed:.2} s", mismatches.len()),
    );
    o.notes = mismatches;
    o
}

fn random_phases(r: &mut impl Rng, m: usize) -> Vec<f64> {
    loop {
        let phases: Vec<f64> = (0..m).map(|_| r.random::<f64>() * PI).collect();
        let distinct = phases
            .iter()
            .enumerate()
            .all(|(i, a)| phases[i + 1..].iter().all(|b| (a - b).abs() > 1e-6));
        if distinct {
            return phases;
        }
    }
}

fn rank_formula_extension() -> Outcome {
    let mut r = rng(2718);
    let mut equispaced_bad = Vec::new();
    let mut random_bad = Vec::new();
    let mut draws = 0;
    for d in 1..=12 {
        let s = SupportSet::contiguous(d).unwrap();
        for m in 1..=12 {
            let want = predicted_rank(d, m);
            let got = rank_for(&s, m).numerical_rank;
            if got != want {
                equispaced_bad.push(format!("equispaced d={d} m={m}: {got} != {want}"));
            }
            for k in 0..20 {
                let phases = random_phases(&mut r, m);
                let rep = rank_for_phases(&s, &phases, None).unwrap();
                draws += 1;
                if rep.numerical_rank != want {
                    random_bad.push(format!(
                        "random d={d} m={m} draw {k}: {} != {want} (gap {:.2e})",
                        rep.numerical_rank, rep.gap
                    ));
                }
            }
        }
    }
    let pass = equispaced_bad.is_empty() && random_bad.is_empty();
    let mut o = outcome(
        pass,
        format!(
            "144 equispaced cells ({} exceptions), {draws} random draws ({} exceptions)",
            equispaced_bad.len(),
            random_bad.len()
        ),
    );
    o.notes = equispaced_bad.into_iter().chain(random_bad).collect();
    o
}

fn counterexample() -> Outcome {
    let states = counterexample_states();
    let mut spread = 0.0f64;
    for i in 0..512 {
        let x = -6.0 + 12.0 * i as f64 / 511.0;
        let p: Vec<f64> = states.iter().map(|s| homodyne_pdf(s, QuadraturePoint::new(x, 0.0))).collect();
        for v in &p[1..] {
            spread = spread.max((v - p[0]).abs());
        }
    }
    let layout = BinLayout::merged(default_x_max(2), 4).unwrap();
    let w0 = ambiguity_witness(&states, &[0.0], &layout).unwrap();
    let w1 = ambiguity_witness(&states, &[0.0, PI / 2.0], &layout).unwrap();
    outcome(
        spread < 1e-12 && w0 < 1e-12 && w1 > 0.1,
        format!("pdf spread {spread:.1e}, witness θ=0 {w0:.1e}, with θ=π/2 {w1:.3}"),
    )
}

fn sparse_support() -> Outcome {
    let s = SupportSet::new(vec![0, 4, 8]).unwrap();
    let r1 = rank_for(&s, 1).numerical_rank;
    let r2 = rank_for(&s, 2).numerical_rank;
    let m_star = min_phases_for_completeness(&s, 4);
    let mut o = outcome(
        r1 == 6 && r2 == 9 && m_star == Some(3 / 2 + 1),
        format!("{{0,4,8}}: m=1 rank {r1}, m=2 rank {r2}, m* = {m_star:?}"),
    );
    for f in sparse_support_sweep(5, 4).unwrap() {
        o.notes.push(format!(
            "finding d={} support {:?}: ranks {:?}, observed m* {:?}, ⌊d/2⌋+1 = {}{}",
            f.d,
            f.support.indices(),
            f.ranks,
            f.observed_min_phases,
            f.claimed_min_phases,
            if f.holds { "" } else { "  <- deviation" }
        ));
    }
    o
}

fn binning_cap() -> Outcome {
    let mut bad = Vec::new();
    let mut cells = 0;
    for d in 1..=6 {
        for n_bins in 1..=2 * d + 3 {
            let layout = BinLayout::new(default_x_max(d), n_bins, false).unwrap();
            let set = build_binned_quadrature_povm(0.37, &layout, d).unwrap();
            let rep = povm_span_rank(&[set]).unwrap();
            let want = layout.n_outcomes().min(2 * d - 1);
            cells += 1;
            if rep.numerical_rank != want {
                bad.push(format!("d={d} bins={n_bins}: {} != {want}", rep.numerical_rank));
            }
        }
    }
    let mut o = outcome(bad.is_empty(), format!("{cells} layouts, {} exceptions", bad.len()));
    o.notes = bad;
    o
}

fn ml_loop() -> Outcome {
    let start = Instant::now();
    let dim = 3;
    let t = coherent_amplitudes(Complex64::new(0.6, 0.4), dim);
    let truth = DensityMatrix::from_pure(&t.state.normalized().unwrap()).unwrap();
    let phases: Vec<f64> = (0..3).map(|j| j as f64 * PI / 3.0).collect();
    let layout = BinLayout::merged(default_x_max(dim), 2 * dim - 1).unwrap();
    let data = simulate_measurement(&truth, &phases, &layout, 100_000, 42).unwrap();
    let povms = povms_for(&data, dim).unwrap();
    let res = ml_reconstruct(&data, &povms, dim, DEFAULT_MAX_ITERS, DEFAULT_DILUTION).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let f = fidelity(&truth, &res.estimate).unwrap();
    let monotone = res.log_likelihood_trace.windows(2).all(|w| w[1] >= w[0] - 1e-10);
    let valid = DensityMatrix::new(res.estimate.matrix().clone()).is_ok();
    outcome(
        f >= 0.99 && monotone && valid && elapsed < 60.0,
        format!(
            "fidelity {f:.5}, {} iterations, monotone {monotone}, valid {valid}, {elapsed:.2} s",
            res.iterations
        ),
    )
}

fn photon_counting() -> Outcome {
    let mut worst_sum = 0.0f64;
    let mut exact = true;
    for i in 0..=30 {
        let r = 0.1 * i as f64;
        for k in 0..8 {
            let phi = k as f64 * PI / 4.0;
            let alpha = Complex64::from_polar(r, phi);
            let total: f64 = (0..=100).map(|n| photon_number_probability(alpha, n)).sum();
            worst_sum = worst_sum.max((total - 1.0).abs());
        }
        let a = Complex64::new(r, 0.0);
        for n in 0..=100 {
            let p = photon_number_probability(a, n);
            let turned = [a * Complex64::i(), -a, a * -Complex64::i(), a.conj()];
            exact &= turned.iter().all(|&b| photon_number_probability(b, n) == p);
        }
    }

    let dim = 2;
    let zero = Complex64::new(0.0, 0.0);
    let bare = displaced_counting_rank(&[zero], dim, dim).unwrap().numerical_rank;
    let betas = [zero, Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(1.0, 1.0)];
    let displaced = displaced_counting_rank(&betas, dim, dim).unwrap().numerical_rank;

    // D|0⟩ = |β⟩ and D|1⟩ = (a† − β*)|β⟩, built without any matrix exponential
    let mut rows = Vec::new();
    for &beta in &betas {
        let cf = coherent_amplitudes(beta, dim).state.amplitudes().to_vec();
        let one: Vec<Complex64> = (0..dim)
            .map(|k| {
                let up = if k > 0 { (k as f64).sqrt() * cf[k - 1] } else { zero };
                up - beta.conj() * cf[k]
            })
            .collect();
        for col in [cf, one] {
            let v = DVector::from_vec(col);
            rows.push(hermitian_to_real_vector(&(&v * v.adjoint())).unwrap());
        }
    }
    let oracle = elimination_rank(&rows, 1e-10);

    outcome(
        worst_sum < 1e-12 && exact && bare == dim && displaced == 4 && oracle == 4,
        format!(
            "max |Σp − 1| {worst_sum:.1e}, exact phase invariance {exact}, bare rank {bare}, \
             displaced rank {displaced} (oracle {oracle})"
        ),
    )
}

fn recursion_identity() -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    for d in 1..=50u64 {
        for m in 1..=d {
            checked += 1;
            let (lhs, rhs) = (incremental_rank_sum(d, m), m * (2 * d - m));
            if lhs != rhs {
                bad.push(format!("d={d} m={m}: {lhs} != {rhs}"));
            }
        }
    }
    let mut o = outcome(bad.is_empty(), format!("{checked} (d, m) pairs"));
    o.notes = bad;
    o
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("table reproduction", table_reproduction),
        ("rank formula d,m <= 12", rank_formula_extension),
        ("counterexample invariance", counterexample),
        ("sparse support", sparse_support),
        ("binning cap", binning_cap),
        ("ML reconstruction", ml_loop),
        ("photon counting", photon_counting),
        ("recursion identity", recursion_identity),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        println!("[{}] {}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        for note in &o.notes {
            println!("       {note}");
        }
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
