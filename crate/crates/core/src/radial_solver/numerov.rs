//! Numerov discretization of a single-channel physical system.
//!
//! With `f = 2m(V - E)ψ` the scheme `ψ_{i+1} - 2ψ_i + ψ_{i-1} = (h²/12)(f_{i+1} + 10 f_i + f_{i-1})`
//! gives the tridiagonal pencil `M(σ) = T + B(V - σ)`, `B = (1/12)[1, 10, 1]`, whose
//! eigenvalues are those of the symmetric `B⁻¹T + V`. The off-diagonal products of `M` are
//! positive on any usable grid, so Sturm counts come from the symmetrized tridiagonal.
//!
//! The origin sample `(Vψ)(0)` is not zero for `l ≤ 1`: with `ψ ≈ c r^{l+1}` it equals
//! `A₋₁ c` (`l = 0`) or `A₋₂ c` (`l = 1`), and `c` is taken from the first two samples.

use super::RadialSystem;
use crate::error::{Error, Result};

pub(super) struct Numerov {
    /// `M(0)` diagonal and its first super/sub-diagonals.
    diag: Vec<f64>,
    upper: Vec<f64>,
    lower: Vec<f64>,
}

impl Numerov {
    pub(super) fn new(sys: &RadialSystem, mass: f64, radii: &[f64], h: f64) -> Result<Self> {
        if sys.channels() != 1 {
            return Err(Error::InvalidParameter(format!(
                "the Numerov scheme handles single-channel systems, got {} channels",
                sys.channels()
            )));
        }
        let v: Vec<f64> = radii.iter().map(|&r| sys.coefficient_at(r)[(0, 0)]).collect();
        let b = -1.0 / (2.0 * mass * h * h);
        let mut diag: Vec<f64> = v.iter().map(|&vi| 1.0 / (mass * h * h) + 10.0 / 12.0 * vi).collect();
        let mut upper: Vec<f64> = v[1..].iter().map(|&vj| b + vj / 12.0).collect();
        let lower: Vec<f64> = v[..v.len() - 1].iter().map(|&vj| b + vj / 12.0).collect();
        // origin ghost: (Vψ)(0) = g1 ψ_1 + g2 ψ_2
        let (g1, g2) = match sys.orbital.first().copied().unwrap_or(0) {
            0 => (4.0 / (2.0 * h), -1.0 / (2.0 * h)),
            1 => (8.0 / (4.0 * h * h), -1.0 / (4.0 * h * h)),
            _ => (0.0, 0.0),
        };
        let lead = match sys.orbital.first().copied().unwrap_or(0) {
            0 => sys.a_m1[(0, 0)],
            1 => sys.a_m2[(0, 0)],
            _ => 0.0,
        };
        diag[0] += lead * g1 / 12.0;
        upper[0] += lead * g2 / 12.0;
        Ok(Numerov { diag, upper, lower })
    }

    pub(super) fn len(&self) -> usize {
        self.diag.len()
    }

    fn shifted(&self, sigma: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let d = self.diag.iter().map(|&x| x - 10.0 / 12.0 * sigma).collect();
        let u = self.upper.iter().map(|&x| x - sigma / 12.0).collect();
        let l = self.lower.iter().map(|&x| x - sigma / 12.0).collect();
        (d, u, l)
    }

    pub(super) fn count_below(&self, sigma: f64) -> usize {
        let (d, u, l) = self.shifted(sigma);
        let mut neg = 0;
        let mut piv = 0.0;
        for i in 0..d.len() {
            piv = if i == 0 { d[0] } else { d[i] - u[i - 1] * l[i - 1] / piv };
            if piv == 0.0 {
                piv = f64::MIN_POSITIVE;
            }
            if piv < 0.0 {
                neg += 1;
            }
        }
        neg
    }

    /// A shift below every eigenvalue.
    pub(super) fn lower_bound(&self) -> f64 {
        let mut lo = -1.0;
        while self.count_below(lo) > 0 {
            lo *= 2.0;
        }
        lo
    }

    /// Solves `M(σ) x = B y` by the Thomas algorithm.
    fn solve(&self, sigma: f64, y: &[f64]) -> Vec<f64> {
        let n = self.len();
        let (d, u, l) = self.shifted(sigma);
        let rhs: Vec<f64> = (0..n)
            .map(|i| {
                let left = if i > 0 { y[i - 1] } else { 0.0 };
                let right = if i + 1 < n { y[i + 1] } else { 0.0 };
                (left + 10.0 * y[i] + right) / 12.0
            })
            .collect();
        let mut c = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut piv = d[0];
        z[0] = rhs[0] / piv;
        for i in 1..n {
            c[i - 1] = u[i - 1] / piv;
            piv = d[i] - l[i - 1] * c[i - 1];
            if piv == 0.0 {
                piv = f64::MIN_POSITIVE;
            }
            z[i] = (rhs[i] - l[i - 1] * z[i - 1]) / piv;
        }
        for i in (0..n - 1).rev() {
            z[i] -= c[i] * z[i + 1];
        }
        z
    }

    /// Inverse iteration on the pencil, normalized to `h Σ ψ² = 1`, positive at its peak.
    pub(super) fn eigenvector(&self, energy: f64, h: f64) -> Vec<f64> {
        let sigma = energy - 1e-10 * energy.abs().max(1e-12);
        let mut x: Vec<f64> = (0..self.len()).map(|i| 1.0 + 0.25 * ((i * 7 % 17) as f64 / 17.0)).collect();
        for _ in 0..4 {
            x = self.solve(sigma, &x);
            let nrm = (x.iter().map(|v| v * v).sum::<f64>() * h).sqrt();
            x.iter_mut().for_each(|v| *v /= nrm);
        }
        let peak = x.iter().fold(0.0f64, |acc, &v| if v.abs() > acc.abs() { v } else { acc });
        let sign = peak.signum();
        x.iter_mut().for_each(|v| *v *= sign);
        x
    }
}
