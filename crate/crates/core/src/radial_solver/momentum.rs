//! Spin-½ radial system in the (rescaled) momentum representation and its ₂F₁ closed forms.
//!
//! With `φ₊ = iχ` the system is real:
//!
//! - `-(χ' - (2j+1)/(2p) χ) = 2k φ₋/(1+p²)`
//! - `φ₋' + (2j+1)/(2p) φ₋ = 2k χ/(1+p²)`

use super::{fd_derivatives, norm, FirstOrderSolution, TAIL_THRESHOLD};
use crate::error::{Error, Result};
use crate::quadrature::composite_gauss_legendre;
use crate::special_functions::gauss_2f1;

/// Upper end of the integrability test; the tail is its last decade.
pub const P_MAX: f64 = 1e8;

fn check_j(j: f64) -> Result<()> {
    let twice = 2.0 * j;
    if twice.fract() != 0.0 || (twice as i64) % 2 == 0 || j < 0.5 {
        return Err(Error::InvalidChannel(format!("momentum system needs half-integer j >= 1/2, got {j}")));
    }
    Ok(())
}

/// Closed-form `(φ₋, χ)` at momentum `p > 0`.
pub fn spin_half_momentum(j: f64, k: f64, p: f64) -> Result<(f64, f64)> {
    let z = -p * p;
    let pre = (1.0 + p * p).powf(-k);
    let f1 = gauss_2f1(1.0 - k, j + 1.0 - k, j + 2.0, z)?;
    let f2 = gauss_2f1(2.0 - k, 2.0 + j - k, 3.0 + j, z)?;
    let minus = 2.0 * k * (j + 1.0) * p.powf(j + 1.5) * pre * f1;
    let bracket = (p.powf(j + 2.5) + p.powf(j + 4.5)) * (k - 1.0) * (j + 1.0 - k) * f2
        + (j + 2.0) * ((j + 1.0 - k) * p.powf(j + 2.5) + (j + 1.0) * p.powf(j + 0.5)) * f1;
    let chi = 2.0 * (j + 1.0) / (j + 2.0) * pre * bracket;
    Ok((minus, chi))
}

/// `(∫_{P_MAX/10}^{P_MAX} + ∫_0^{P_MAX})` of `φ₋² + χ²` by Gauss–Legendre on decades.
fn momentum_norms(j: f64, k: f64) -> Result<(f64, f64)> {
    let density = |p: f64| spin_half_momentum(j, k, p).map(|(a, b)| a * a + b * b);
    let mut total = 0.0;
    let mut tail = 0.0;
    let mut lo = 0.0;
    for e in -6..8 {
        let hi = 10f64.powi(e + 1);
        let (xs, ws) = composite_gauss_legendre(lo, hi, 8, 16);
        let mut piece = 0.0;
        for (x, w) in xs.iter().zip(&ws) {
            piece += w * density(*x)?;
        }
        total += piece;
        if e == 7 {
            tail = piece;
        }
        lo = hi;
    }
    Ok((total, tail))
}

/// Evaluates the closed forms on `p_grid`, checks them against the first-order system by
/// five-point differences, and tests square integrability by the tail of the norm integral
/// over `[P_MAX/10, P_MAX]`.
///
/// Channels are `φ₋` and `χ = -iφ₊`.
pub fn solve_momentum_spin_half(j: f64, k: f64, p_grid: &[f64]) -> Result<FirstOrderSolution> {
    check_j(j)?;
    if !(k > 0.0) {
        return Err(Error::InvalidParameter(format!("k must be positive, got {k}")));
    }
    if p_grid.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
        return Err(Error::InvalidParameter("momentum grid must be positive".into()));
    }
    let eval = |p: f64| spin_half_momentum(j, k, p).map(|(a, b)| vec![a, b]);
    let mut residual: f64 = 0.0;
    let mut minus = Vec::with_capacity(p_grid.len());
    let mut chi = Vec::with_capacity(p_grid.len());
    let g = (2.0 * j + 1.0) / 2.0;
    for &p in p_grid {
        let hd = 1e-3 * p;
        let (v, d1, _) = fd_derivatives(eval, p, hd)?;
        let c = 2.0 * k / (1.0 + p * p);
        let r0 = -(d1[1] - g / p * v[1]) - c * v[0];
        let r1 = d1[0] + g / p * v[0] - c * v[1];
        let scale = norm(&d1).max(norm(&v) * g / p).max(norm(&v) * c).max(1e-300);
        residual = residual.max(norm(&[r0, r1]) / scale);
        minus.push(v[0]);
        chi.push(v[1]);
    }
    let (total, tail) = momentum_norms(j, k)?;
    let tail_fraction = tail / total;
    let normalizable = tail_fraction.is_finite() && tail_fraction < TAIL_THRESHOLD;
    Ok(FirstOrderSolution {
        twice_s: 1,
        j,
        k,
        grid: p_grid.to_vec(),
        labels: vec!["phi_minus".into(), "phi_plus_over_i".into()],
        channels: vec![minus, chi],
        provenance: vec![
            "gauss 2F1 closed forms in the rescaled momentum".into(),
            "tail test by Gauss-Legendre over decades up to 1e8".into(),
        ],
        first_order_residual: residual,
        second_order_residual: 0.0,
        tail_fraction,
        normalizable,
    })
}

/// `count` log-spaced momenta between `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn on_shell_ground_state() {
        let grid = log_grid(1e-2, 1e3, 200);
        for &j in &[0.5, 1.5, 2.5] {
            let sol = solve_momentum_spin_half(j, j + 1.0, &grid).unwrap();
            assert!(sol.first_order_residual < 1e-8, "j={j}: {}", sol.first_order_residual);
            assert!(sol.normalizable, "j={j}: {}", sol.tail_fraction);
        }
    }

    #[test]
    fn excited_and_off_shell() {
        let grid = log_grid(1e-2, 1e3, 200);
        let sol = solve_momentum_spin_half(0.5, 3.5, &grid).unwrap();
        assert!(sol.first_order_residual < 1e-8, "{}", sol.first_order_residual);
        assert!(sol.normalizable);
        let off = solve_momentum_spin_half(0.5, 0.5 + 1.37, &grid).unwrap();
        assert!(off.first_order_residual < 1e-8, "{}", off.first_order_residual);
        assert!(!off.normalizable, "{}", off.tail_fraction);
    }

    #[test]
    fn finite_at_unit_momentum() {
        let (a, b) = spin_half_momentum(0.5, 1.5, 1.0).unwrap();
        assert!(a.is_finite() && b.is_finite() && a != 0.0 && b != 0.0);
        assert!(solve_momentum_spin_half(1.0, 2.0, &[1.0]).is_err());
    }
}
