//! Gaussian quadrature rules.
//!
//! Gauss–Hermite rules are returned with *scaled* weights `w_i e^{x_i^2}`, so
//! they integrate `f(x)` directly when `f` already carries its own Gaussian
//! factor (products of Hermite functions do). This keeps large rules usable:
//! the raw weights underflow beyond a couple of hundred nodes, the scaled
//! ones never do.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::fock::hermite_functions;

/// A one-dimensional rule: `∫ f ≈ Σ weights[i] · f(nodes[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Gauss–Hermite rule of order `n` over the whole real line.
///
/// The returned weights are `w_i e^{x_i^2}`: the rule integrates
/// `p(x) e^{-x^2}` exactly for polynomials `p` of degree `≤ 2n − 1` when applied
/// to the full integrand `p(x) e^{-x^2}`.
pub fn gauss_hermite(n: usize) -> QuadratureRule {
    assert!(n > 0, "Gauss–Hermite rule needs at least one node");
    // Golub–Welsch start, Newton polish on the normalized Hermite function.
    let jacobi = DMatrix::<f64>::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.total_cmp(b));

    let nf = n as f64;
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..4 {
            let psi = hermite_functions(n, *x);
            // ψ_n' = √(2n) ψ_{n−1} − x ψ_n
            let deriv = (2.0 * nf).sqrt() * psi[n - 1] - *x * psi[n];
            if deriv == 0.0 {
                break;
            }
            let step = psi[n] / deriv;
            *x -= step;
            if step.abs() <= 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
        let psi = hermite_functions(n - 1, *x);
        weights.push(1.0 / (nf * psi[n - 1] * psi[n - 1]));
    }
    QuadratureRule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let deriv = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, deriv)
}

/// Gauss–Legendre rule of order `n` on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> QuadratureRule {
    assert!(n > 0, "Gauss–Legendre rule needs at least one node");
    let nf = n as f64;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let step = p / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    QuadratureRule { nodes, weights }
}

impl QuadratureRule {
    /// Affinely maps a rule on `[-1, 1]` onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> QuadratureRule {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        QuadratureRule {
            nodes: self.nodes.iter().map(|&t| mid + half * t).collect(),
            weights: self.weights.iter().map(|&w| half * w).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = gauss_legendre(32);
        // ∫_{-1}^{1} x^62 dx = 2/63
        let got = rule.integrate(|x| x.powi(62));
        assert!((got - 2.0 / 63.0).abs() < 1e-14, "{got}");
        assert!((rule.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn legendre_odd_order_has_center_node() {
        let rule = gauss_legendre(5);
        assert_eq!(rule.nodes[2], 0.0);
        assert!((rule.integrate(|x| x.powi(8)) - 2.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn hermite_small_rule_matches_known_nodes() {
        // H_2 roots ±1/√2, scaled weights √π/2 · e^{1/2}
        let rule = gauss_hermite(2);
        let r = 0.5f64.sqrt();
        assert!((rule.nodes[0] + r).abs() < 1e-15);
        assert!((rule.nodes[1] - r).abs() < 1e-15);
        let w = std::f64::consts::PI.sqrt() / 2.0 * 0.5f64.exp();
        assert!((rule.weights[0] - w).abs() < 1e-14);
    }

    #[test]
    fn hermite_gaussian_moments() {
        let rule = gauss_hermite(40);
        let pi = std::f64::consts::PI;
        let m0 = rule.integrate(|x| (-x * x).exp());
        let m4 = rule.integrate(|x| x.powi(4) * (-x * x).exp());
        assert!((m0 - pi.sqrt()).abs() < 1e-13);
        assert!((m4 - 0.75 * pi.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn large_hermite_rule_is_finite() {
        let rule = gauss_hermite(200);
        assert!(rule.weights.iter().all(|w| w.is_finite() && *w > 0.0));
        assert!(rule.nodes.windows(2).all(|p| p[0] < p[1]));
    }
}
