use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{domain, Result};

/// Exchange overlap I_{n,n'} = ∫e^{−2ξ²}H_n²H_{n'}² dξ / (2^{n+n'} n! n'!).
///
/// Evaluated from the positive series
/// I_{n,m} = (1/√2) Σ_{k=0}^{min(n,m)} a_{n−k} a_{m−k} h_k,
/// a_j = C(2j,j)/4^j, h_k = Γ(k+½)/k!, which follows from expanding L_n in
/// the Laguerre family of order −½. All terms are positive and bounded, so
/// no cancellation or overflow occurs at large indices.
pub fn overlap_coefficient(n: u32, n_prime: u32) -> f64 {
    OverlapSeries::new(n.max(n_prime)).coefficient(n, n_prime)
}

/// Pair interaction U_{n,n'} = u·I_{n,n'}/π.
///
/// I/π is the overlap of normalized Hermite-function densities ∫φ_n²φ_{n'}²dξ,
/// the factor that makes the thermal mean reproduce u√(π/40·ħω/k_BT).
pub fn pair_interaction(u: f64, n: u32, n_prime: u32) -> f64 {
    u * overlap_coefficient(n, n_prime) / PI
}

/// Cached series coefficients for repeated overlap evaluations.
#[derive(Debug, Clone)]
pub struct OverlapSeries {
    a: Vec<f64>,
    h: Vec<f64>,
}

impl OverlapSeries {
    pub fn new(max_index: u32) -> Self {
        let len = max_index as usize + 1;
        let mut a = Vec::with_capacity(len);
        let mut h = Vec::with_capacity(len);
        a.push(1.0);
        h.push(PI.sqrt());
        for j in 1..len {
            let jf = j as f64;
            a.push(a[j - 1] * (2.0 * jf - 1.0) / (2.0 * jf));
            h.push(h[j - 1] * (jf - 0.5) / jf);
        }
        Self { a, h }
    }

    pub fn max_index(&self) -> u32 {
        (self.a.len() - 1) as u32
    }

    pub fn coefficient(&self, n: u32, n_prime: u32) -> f64 {
        let (lo, hi) = if n <= n_prime { (n as usize, n_prime as usize) } else { (n_prime as usize, n as usize) };
        assert!(hi < self.a.len(), "overlap index {hi} beyond cached range");
        let mut sum = 0.0;
        for k in 0..=lo {
            sum += self.a[lo - k] * self.a[hi - k] * self.h[k];
        }
        sum * FRAC_1_SQRT_2
    }
}

/// ln|ψ_j(x)| for the normalized Hermite functions j = 0..=j_max, with signs.
fn hermite_function_logs(x: f64, j_max: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(j_max + 1);
    // running pair scaled by exp(log_scale)
    let mut log_scale = -x * x / 2.0 - 0.25 * PI.ln();
    let mut prev = 0.0;
    let mut cur = 1.0;
    out.push((log_scale, 1.0));
    for j in 0..j_max {
        let jf = j as f64;
        let next = (2.0 / (jf + 1.0)).sqrt() * x * cur - (jf / (jf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        let mag = cur.abs();
        if mag > 1e150 || (mag < 1e-150 && mag > 0.0) {
            let s = mag.ln();
            cur /= mag;
            prev /= mag;
            log_scale += s;
        }
        out.push(if cur == 0.0 { (f64::NEG_INFINITY, 0.0) } else { (cur.abs().ln() + log_scale, cur.signum()) });
    }
    out
}

/// Gauss–Hermite nodes and log-scaled weights ln(w_i e^{x_i²}) for weight e^{−x²}.
///
/// Golub–Welsch eigenvalues polished by Newton steps on ψ_K; weights from the
/// Christoffel sum of Hermite functions, kept in log form so large orders do
/// not underflow.
pub fn gauss_hermite(order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if order == 0 {
        return Err(domain("quadrature order must be positive"));
    }
    let mut jacobi = DMatrix::<f64>::zeros(order, order);
    for i in 1..order {
        let b = (i as f64 / 2.0).sqrt();
        jacobi[(i, i - 1)] = b;
        jacobi[(i - 1, i)] = b;
    }
    let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);
    let k = order as f64;
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let psi = hermite_function_logs(*x, order);
            let (lk, sk) = psi[order];
            let (lkm, skm) = psi[order - 1];
            // ψ_K' = √(2K) ψ_{K−1} − x ψ_K
            let ratio = sk * skm * (lk - lkm).exp();
            let step = ratio / ((2.0 * k).sqrt() - *x * ratio);
            *x -= step;
            if step.abs() < 1e-15 * x.abs().max(1.0) {
                break;
            }
        }
    }
    let log_weights = nodes
        .iter()
        .map(|&x| {
            let psi = hermite_function_logs(x, order - 1);
            let top = psi.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = psi.iter().map(|p| (2.0 * (p.0 - top)).exp()).sum();
            -(2.0 * top + sum.ln())
        })
        .collect();
    Ok((nodes, log_weights))
}

/// I_{n,n'} by Gauss–Hermite quadrature with the given node count.
///
/// With ξ = x/√2 the integrand is π ψ_n²(ξ)ψ_{n'}²(ξ) e^{x²} times the
/// Gauss weight, a polynomial of degree 2(n+n'); exact once nodes > n+n'.
pub fn overlap_coefficient_quadrature(n: u32, n_prime: u32, nodes: usize) -> Result<f64> {
    let (xs, log_w) = gauss_hermite(nodes)?;
    let top = n.max(n_prime) as usize;
    let mut sum = 0.0;
    for (&x, &lw) in xs.iter().zip(&log_w) {
        let psi = hermite_function_logs(x * FRAC_1_SQRT_2, top);
        let l = lw + 2.0 * psi[n as usize].0 + 2.0 * psi[n_prime as usize].0;
        sum += l.exp();
    }
    Ok(PI * FRAC_1_SQRT_2 * sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_low_orders() {
        let i00 = (PI / 2.0).sqrt();
        assert!((overlap_coefficient(0, 0) - i00).abs() < 1e-15);
        assert!((overlap_coefficient(0, 1) - i00 / 2.0).abs() < 1e-15);
        assert!((overlap_coefficient(1, 1) - 0.939_985_602_986_6).abs() < 1e-12);
    }

    #[test]
    fn gauss_hermite_low_order_exact() {
        let (x, lw) = gauss_hermite(2).unwrap();
        // nodes ±1/√2, weights √π/2
        assert!((x[1] - FRAC_1_SQRT_2).abs() < 1e-14);
        let w = (lw[1]).exp() * (-x[1] * x[1]).exp();
        assert!((w - PI.sqrt() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_hermite_weights_sum_to_root_pi() {
        for order in [5, 40, 160] {
            let (x, lw) = gauss_hermite(order).unwrap();
            let s: f64 = x.iter().zip(&lw).map(|(x, l)| (l - x * x).exp()).sum();
            assert!((s - PI.sqrt()).abs() < 1e-12, "order {order}: {s}");
        }
    }

    #[test]
    fn quadrature_matches_series() {
        for (n, m) in [(0, 0), (0, 1), (2, 5), (3, 3), (10, 20)] {
            let q = overlap_coefficient_quadrature(n, m, (n + m + 2) as usize).unwrap();
            let s = overlap_coefficient(n, m);
            assert!((q - s).abs() < 1e-12 * s, "({n},{m}) {q} vs {s}");
        }
    }

    #[test]
    fn known_values() {
        assert!((overlap_coefficient(2, 5) - 0.348_210_812_564_7).abs() < 1e-12);
        assert!((overlap_coefficient(3, 3) - 0.719_676_477_286_63).abs() < 1e-12);
        assert!((overlap_coefficient(10, 20) - 0.185_350_924_495).abs() < 1e-11);
    }

    #[test]
    fn pair_interaction_scales_with_u() {
        assert_eq!(pair_interaction(0.0, 3, 4), 0.0);
        let v = pair_interaction(2.0, 0, 0);
        assert!((v - 2.0 * (0.5 / PI).sqrt()).abs() < 1e-15);
    }
}
