//! Coupled-channel radial systems: construction, finite-difference bound states, and the
//! closed-form or shooting solutions of the first-order constraint systems.
//!
//! Second-order systems are written in one of two unit conventions:
//!
//! - physical: `-Φ''/(2m) + (L²/(2m r²))Φ - (α/r)Λ̃Φ = EΦ`, an attractive coupling for `α > 0`;
//! - rescaled: `Φ'' = (1 + L²/r² - (2k/r)Λ̃)Φ` with `r = sqrt(-2mE) x` and `k = α sqrt(m/(-2E))`.
//!
//! Channel order and phases follow [`crate::angular_basis::channel_basis`].

mod banded;
pub mod momentum;
mod numerov;
pub mod spin1;
pub mod spin32;

use serde::Serialize;

use crate::angular_basis::{channel_basis, reduce_l2_s_dot_j, reduce_lambda, AngularChannel, RMatrix};
use crate::error::{Error, Result};
use crate::spin_algebra::{Normalization, SpinValue};

pub use banded::{solve_bound_states, solve_bound_states_with, EigenResult, Level, Scheme};
pub use momentum::solve_momentum_spin_half;
pub use spin1::{solve_first_order_spin1, spin1_superpotential, spin1_w_residual};
pub use spin32::{solve_first_order_spin32, spin32_first_order, Spin32Branch, Spin32Diagnostics};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Physical { mass: f64, alpha: f64 },
    Rescaled { k: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    First,
    Second,
}

/// Coefficients of a radial system.
///
/// - Second order, physical: `H = -(1/2m) d²/dr² + A₋₂/r² + A₋₁/r + A₀`, eigenvalue `E`.
/// - Second order, rescaled: `Φ'' = (A₋₂/r² + A₋₁/r + A₀)Φ`.
/// - First order: `Φ' = (A₋₁/r + A₀ + A₊₁ r)Φ` (`A₋₂` is zero).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialSystem {
    pub s: SpinValue,
    pub j: f64,
    pub order: Order,
    pub units: Units,
    pub orbital: Vec<i64>,
    #[serde(skip)]
    pub a_m2: RMatrix,
    #[serde(skip)]
    pub a_m1: RMatrix,
    #[serde(skip)]
    pub a_0: RMatrix,
    #[serde(skip)]
    pub a_p1: Option<RMatrix>,
    pub branch: Option<String>,
}

impl RadialSystem {
    pub fn channels(&self) -> usize {
        self.a_0.nrows()
    }

    /// `A₋₂/r² + A₋₁/r + A₀ (+ A₊₁ r)`.
    pub fn coefficient_at(&self, r: f64) -> RMatrix {
        let mut m = &self.a_m2 / (r * r) + &self.a_m1 / r + &self.a_0;
        if let Some(p) = &self.a_p1 {
            m += p * r;
        }
        m
    }
}

/// Reduced `L²` and `Λ̃` (section form) of a channel block, in the channel order used by
/// every radial system.
pub fn channel_matrices(s: SpinValue, j: f64) -> Result<(Vec<i64>, RMatrix, RMatrix)> {
    if s.twice_s > 3 {
        return Err(Error::NotDerived(format!("radial systems for s = {s} (covered: 0, 1/2, 1, 3/2)")));
    }
    let ch = AngularChannel::new(s, j, j)?;
    let pb = channel_basis(s, j)?;
    let orb = ch.orbital();
    let orbital = pb.perm.iter().map(|&i| orb[i]).collect();
    let l2 = pb.transform(&reduce_l2_s_dot_j(s, j)?.0.matrix);
    let lam = pb.transform(&reduce_lambda(s, j, Normalization::Section)?.matrix);
    Ok((orbital, l2, lam))
}

/// Second-order radial system for `s ∈ {0, 1/2, 1, 3/2}` and admissible `j`.
pub fn build_system(s: SpinValue, j: f64, units: Units) -> Result<RadialSystem> {
    let (orbital, l2, lam) = channel_matrices(s, j)?;
    let c = l2.nrows();
    let (a_m2, a_m1, a_0) = match units {
        Units::Physical { mass, alpha } => {
            if !(mass > 0.0) {
                return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
            }
            (&l2 / (2.0 * mass), &lam * -alpha, RMatrix::zeros(c, c))
        }
        Units::Rescaled { k } => (l2, &lam * (-2.0 * k), RMatrix::identity(c, c)),
    };
    Ok(RadialSystem {
        s,
        j,
        order: Order::Second,
        units,
        orbital,
        a_m2,
        a_m1,
        a_0,
        a_p1: None,
        branch: None,
    })
}

/// Uniform grid `r_i = i h`, `i = 1..=points`, with `h = r_max/(points+1)`; Dirichlet
/// conditions hold at `r = 0` and `r = r_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub r_max: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(r_max: f64, points: usize) -> Result<Self> {
        if points < 100 {
            return Err(Error::InvalidParameter(format!("grid needs at least 100 points, got {points}")));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("r_max must be positive, got {r_max}")));
        }
        Ok(Grid { r_max, points })
    }

    /// `r_max = 40 N²/(mα)` for the highest targeted principal number `N`.
    pub fn for_levels(n_max: f64, mass: f64, alpha: f64, points: usize) -> Result<Self> {
        Self::new(40.0 * n_max * n_max / (mass * alpha), points)
    }

    pub fn spacing(&self) -> f64 {
        self.r_max / (self.points as f64 + 1.0)
    }

    pub fn radii(&self) -> Vec<f64> {
        let h = self.spacing();
        (1..=self.points).map(|i| i as f64 * h).collect()
    }

    /// Same `r_max`, half the points (spacing roughly doubled).
    pub fn halved(&self) -> Self {
        Grid {
            r_max: self.r_max,
            points: (self.points + 1) / 2 - 1,
        }
    }

    /// Same `r_max`, spacing exactly halved.
    pub fn doubled(&self) -> Self {
        Grid {
            r_max: self.r_max,
            points: 2 * self.points + 1,
        }
    }
}

/// Channel functions of a first-order (constraint) solution on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstOrderSolution {
    pub twice_s: u32,
    pub j: f64,
    pub k: f64,
    pub grid: Vec<f64>,
    pub labels: Vec<String>,
    pub channels: Vec<Vec<f64>>,
    /// Which reconstruction steps produced the channels.
    pub provenance: Vec<String>,
    /// Residual of the first-order system, relative to the local solution scale.
    pub first_order_residual: f64,
    /// Residual of the parent second-order system, relative to the local solution scale.
    pub second_order_residual: f64,
    /// Tail norm over the last tenth of the grid divided by the total norm.
    pub tail_fraction: f64,
    pub normalizable: bool,
}

/// Threshold on the tail fraction for square integrability.
pub const TAIL_THRESHOLD: f64 = 1e-6;

/// Five-point central first and second derivatives of `f` at `x` with step `h`.
pub(crate) fn fd_derivatives<F>(f: F, x: f64, h: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    let v0 = f(x)?;
    let p1 = f(x + h)?;
    let m1 = f(x - h)?;
    let p2 = f(x + 2.0 * h)?;
    let m2 = f(x - 2.0 * h)?;
    let c = v0.len();
    let d1 = (0..c).map(|i| (m2[i] - 8.0 * m1[i] + 8.0 * p1[i] - p2[i]) / (12.0 * h)).collect();
    let d2 = (0..c)
        .map(|i| (-m2[i] + 16.0 * m1[i] - 30.0 * v0[i] + 16.0 * p1[i] - p2[i]) / (12.0 * h * h))
        .collect();
    Ok((v0, d1, d2))
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn mat_vec(m: &RMatrix, v: &[f64]) -> Vec<f64> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|k| m[(i, k)] * v[k]).sum()).collect()
}

/// Trapezoidal `∫ Σ_c Φ_c² dr` over the grid and over its last tenth of points (the last
/// decade of a ten-decade logarithmic grid).
pub(crate) fn norm_and_tail(grid: &[f64], channels: &[Vec<f64>]) -> (f64, f64) {
    let dens: Vec<f64> = (0..grid.len()).map(|i| channels.iter().map(|c| c[i] * c[i]).sum()).collect();
    let start = grid.len() - grid.len() / 10;
    let mut total = 0.0;
    let mut tail = 0.0;
    for i in 1..grid.len() {
        let piece = 0.5 * (dens[i] + dens[i - 1]) * (grid[i] - grid[i - 1]);
        total += piece;
        if i > start {
            tail += piece;
        }
    }
    (total, tail)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_system_is_centrifugal() {
        let sys = build_system(SpinValue::new(0), 2.0, Units::Physical { mass: 1.0, alpha: 1.0 }).unwrap();
        assert_eq!(sys.channels(), 1);
        assert_eq!(sys.a_m2[(0, 0)], 3.0);
        assert_eq!(sys.a_m1[(0, 0)], -1.0);
    }

    #[test]
    fn spin1_lambda_is_one_minus_s1_squared() {
        let j = 1.0;
        let sys = build_system(SpinValue::new(2), j, Units::Rescaled { k: 1.0 }).unwrap();
        let mu = (j * (j + 1.0f64)).sqrt();
        let lam = -&sys.a_m1 / 2.0;
        let want = RMatrix::from_row_slice(3, 3, &[j, 0.0, -mu, 0.0, 0.0, 0.0, -mu, 0.0, j + 1.0]) / (2.0 * j + 1.0);
        assert!((lam - want).abs().max() < 1e-14);
    }

    #[test]
    fn spin32_half_matches_two_channel_form() {
        let k = 0.7;
        let sys = build_system(SpinValue::new(3), 0.5, Units::Rescaled { k }).unwrap();
        assert!((&sys.a_m2 - RMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![6.0, 2.0]))).abs().max() < 1e-13);
        let kt = 3.0 * k;
        let want = RMatrix::from_row_slice(2, 2, &[0.0, -2.0 * kt, -2.0 * kt, 0.0]);
        assert!((&sys.a_m1 - want).abs().max() < 1e-13);
    }

    #[test]
    fn uncovered_spin_rejected() {
        assert!(matches!(
            build_system(SpinValue::new(4), 2.0, Units::Rescaled { k: 1.0 }),
            Err(Error::NotDerived(_))
        ));
        assert!(build_system(SpinValue::new(2), 0.5, Units::Rescaled { k: 1.0 }).is_err());
    }

    #[test]
    fn grid_shapes() {
        let g = Grid::new(10.0, 199).unwrap();
        assert_eq!(g.spacing(), 0.05);
        assert_eq!(g.doubled().spacing(), 0.025);
        assert_eq!(g.doubled().halved(), g);
        assert!(Grid::new(10.0, 50).is_err());
    }
}
