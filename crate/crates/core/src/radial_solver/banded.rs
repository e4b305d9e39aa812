//! Finite-difference bound states of a physical second-order system.
//!
//! Central differences on a uniform grid give a symmetric block-tridiagonal matrix with
//! `c×c` diagonal blocks `D_i = (1/(m h²)) I + A₋₂/r_i² + A₋₁/r_i + A₀` and scalar
//! off-diagonal blocks `b I`, `b = -1/(2 m h²)`. Eigenvalues below a shift `σ` are counted
//! from the inertia of the block Schur complements `S_i = D_i - σ - b² S_{i-1}⁻¹`
//! (Haynsworth), located by bisection and paired with eigenvectors from inverse
//! iteration.

use serde::Serialize;

use super::numerov::Numerov;
use super::{Grid, RadialSystem, Units};
use crate::error::{Error, Result};

const MAXC: usize = 4;
type Block = [[f64; MAXC]; MAXC];

fn zero_block() -> Block {
    [[0.0; MAXC]; MAXC]
}

struct Discretization {
    c: usize,
    b: f64,
    diag: Vec<Block>,
}

impl Discretization {
    fn new(sys: &RadialSystem, grid: &Grid) -> Result<Self> {
        let mass = match sys.units {
            Units::Physical { mass, .. } => mass,
            Units::Rescaled { .. } => {
                return Err(Error::InvalidParameter(
                    "bound-state solve needs a physical-units system".into(),
                ))
            }
        };
        let c = sys.channels();
        if c > MAXC {
            return Err(Error::DimensionMismatch(format!("{c} channels exceed the supported {MAXC}")));
        }
        let h = grid.spacing();
        let kin = 1.0 / (mass * h * h);
        let diag = grid
            .radii()
            .iter()
            .map(|&r| {
                let m = sys.coefficient_at(r);
                let mut blk = zero_block();
                for a in 0..c {
                    for bb in 0..c {
                        blk[a][bb] = m[(a, bb)];
                    }
                    blk[a][a] += kin;
                }
                blk
            })
            .collect();
        Ok(Discretization {
            c,
            b: -0.5 * kin,
            diag,
        })
    }

    /// Smallest Gershgorin lower bound.
    fn lower_bound(&self) -> f64 {
        self.diag
            .iter()
            .map(|d| {
                (0..self.c)
                    .map(|a| d[a][a] - (0..self.c).filter(|&k| k != a).map(|k| d[a][k].abs()).sum::<f64>())
                    .fold(f64::INFINITY, f64::min)
                    - 2.0 * self.b.abs()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Number of eigenvalues strictly below `sigma`.
    fn count_below(&self, sigma: f64) -> usize {
        let c = self.c;
        let b2 = self.b * self.b;
        let mut inv_prev = zero_block();
        let mut count = 0;
        for (i, d) in self.diag.iter().enumerate() {
            let mut s = *d;
            for a in 0..c {
                s[a][a] -= sigma;
                if i > 0 {
                    for k in 0..c {
                        s[a][k] -= b2 * inv_prev[a][k];
                    }
                }
            }
            let (neg, inv) = ldl_inertia_inverse(&s, c);
            count += neg;
            inv_prev = inv;
        }
        count
    }

    /// Solves `(H - σ) x = rhs` by block elimination.
    fn solve_shifted(&self, sigma: f64, rhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let c = self.c;
        let n = self.diag.len();
        let b2 = self.b * self.b;
        let mut invs: Vec<Block> = Vec::with_capacity(n);
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut s = self.diag[i];
            for a in 0..c {
                s[a][a] -= sigma;
            }
            let mut zi = rhs[i].clone();
            if i > 0 {
                let prev = &invs[i - 1];
                for a in 0..c {
                    for k in 0..c {
                        s[a][k] -= b2 * prev[a][k];
                        zi[a] -= self.b * prev[a][k] * z[i - 1][k];
                    }
                }
            }
            invs.push(ldl_inertia_inverse(&s, c).1);
            z.push(zi);
        }
        let mut x = vec![vec![0.0; c]; n];
        for i in (0..n).rev() {
            let mut t = z[i].clone();
            if i + 1 < n {
                for a in 0..c {
                    t[a] -= self.b * x[i + 1][a];
                }
            }
            for a in 0..c {
                x[i][a] = (0..c).map(|k| invs[i][a][k] * t[k]).sum();
            }
        }
        x
    }
}

/// Inertia (number of negative pivots) and inverse of a small symmetric block via
/// `LDLᵀ`; tiny pivots are nudged off zero, which leaves the count unchanged generically.
fn ldl_inertia_inverse(s: &Block, c: usize) -> (usize, Block) {
    let scale = (0..c).flat_map(|a| (0..c).map(move |k| (a, k))).map(|(a, k)| s[a][k].abs()).fold(0.0, f64::max).max(1e-300);
    let mut l = zero_block();
    let mut d = [0.0; MAXC];
    let mut neg = 0;
    for a in 0..c {
        let mut v = s[a][a];
        for k in 0..a {
            v -= l[a][k] * l[a][k] * d[k];
        }
        if v.abs() < 1e-300f64.max(f64::EPSILON * 1e-3 * scale) {
            v = f64::EPSILON * scale;
        }
        d[a] = v;
        if v < 0.0 {
            neg += 1;
        }
        l[a][a] = 1.0;
        for row in a + 1..c {
            let mut w = s[row][a];
            for k in 0..a {
                w -= l[row][k] * l[a][k] * d[k];
            }
            l[row][a] = w / v;
        }
    }
    // S⁻¹ = L⁻ᵀ D⁻¹ L⁻¹, column by column.
    let mut inv = zero_block();
    for col in 0..c {
        let mut y = [0.0; MAXC];
        for a in 0..c {
            let mut v = if a == col { 1.0 } else { 0.0 };
            for k in 0..a {
                v -= l[a][k] * y[k];
            }
            y[a] = v;
        }
        for a in 0..c {
            y[a] /= d[a];
        }
        for a in (0..c).rev() {
            let mut v = y[a];
            for k in a + 1..c {
                v -= l[k][a] * inv[k][col];
            }
            inv[a][col] = v;
        }
    }
    (neg, inv)
}

/// One bound state: energy, L²-normalized channel functions on the grid, and a
/// grid-halving error estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Level {
    pub energy: f64,
    /// `channels[c][i]` is channel `c` at grid point `i`.
    pub channels: Vec<Vec<f64>>,
    /// Energy of the same level on the halved grid, if it is bound there.
    pub coarse_energy: Option<f64>,
    /// `|E_h - E_2h| / (2^p - 1)`, the Richardson estimate for a scheme of order `p`.
    pub error_estimate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenResult {
    pub grid: Grid,
    pub scheme: Scheme,
    pub levels: Vec<Level>,
    /// Number of negative eigenvalues of the discrete operator.
    pub bound_count: usize,
}

impl EigenResult {
    pub fn energies(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.energy).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// Second-order central differences (the default) or single-channel Numerov.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Central,
    Numerov,
}

impl Scheme {
    /// Leading order of the energy error in `h`.
    pub fn order(self) -> i32 {
        match self {
            Scheme::Central => 2,
            Scheme::Numerov => 4,
        }
    }
}

fn lowest_eigenvalues(disc: &Discretization, count: usize) -> Vec<f64> {
    bisect_levels(|s| disc.count_below(s), disc.lower_bound(), count)
}

fn bisect_levels<F: Fn(f64) -> usize>(count_below: F, lo0: f64, count: usize) -> Vec<f64> {
    let n_neg = count_below(0.0);
    let want = count.min(n_neg);
    (0..want)
        .map(|idx| {
            // idx-th eigenvalue (0-based) is the smallest σ with count_below(σ) > idx
            let (mut lo, mut hi) = (lo0, 0.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if count_below(mid) > idx {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo <= 4.0 * f64::EPSILON * hi.abs() {
                    break;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

fn eigenvector(disc: &Discretization, energy: f64, h: f64, seed: usize) -> Vec<Vec<f64>> {
    let n = disc.diag.len();
    let c = disc.c;
    let sigma = energy - 1e-10 * energy.abs().max(1e-12);
    let mut x: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..c).map(|a| 1.0 + 0.25 * (((i * 7 + a * 13 + seed * 31) % 17) as f64 / 17.0)).collect())
        .collect();
    for _ in 0..4 {
        x = disc.solve_shifted(sigma, &x);
        let nrm = (x.iter().flatten().map(|v| v * v).sum::<f64>() * h).sqrt();
        for row in &mut x {
            for v in row.iter_mut() {
                *v /= nrm;
            }
        }
    }
    // fix the overall sign by the largest component
    let (mut best, mut sign) = (0.0, 1.0);
    for v in x.iter().flatten() {
        if v.abs() > best {
            best = v.abs();
            sign = v.signum();
        }
    }
    (0..c).map(|a| x.iter().map(|row| sign * row[a]).collect()).collect()
}

/// Lowest `count` negative eigenvalues of a physical-units system by central differences.
/// Returns an empty result (not an error) when the discrete operator has no negative
/// eigenvalue.
pub fn solve_bound_states(sys: &RadialSystem, grid: Grid, count: usize) -> Result<EigenResult> {
    solve_bound_states_with(sys, grid, count, Scheme::Central)
}

/// [`solve_bound_states`] with an explicit discretization scheme.
pub fn solve_bound_states_with(sys: &RadialSystem, grid: Grid, count: usize, scheme: Scheme) -> Result<EigenResult> {
    if count == 0 {
        return Err(Error::InvalidParameter("count must be at least 1".into()));
    }
    let mass = match sys.units {
        Units::Physical { mass, .. } => mass,
        Units::Rescaled { .. } => {
            return Err(Error::InvalidParameter(
                "bound-state solve needs a physical-units system".into(),
            ))
        }
    };
    let h = grid.spacing();
    let coarse_grid = grid.halved();
    let (bound_count, energies, coarse, vectors) = match scheme {
        Scheme::Central => {
            let disc = Discretization::new(sys, &grid)?;
            let energies = lowest_eigenvalues(&disc, count);
            let coarse = if coarse_grid.points >= 100 {
                lowest_eigenvalues(&Discretization::new(sys, &coarse_grid)?, count)
            } else {
                Vec::new()
            };
            let vectors: Vec<_> = energies.iter().enumerate().map(|(i, &e)| eigenvector(&disc, e, h, i)).collect();
            (disc.count_below(0.0), energies, coarse, vectors)
        }
        Scheme::Numerov => {
            let num = Numerov::new(sys, mass, &grid.radii(), h)?;
            let energies = bisect_levels(|s| num.count_below(s), num.lower_bound(), count);
            let coarse = if coarse_grid.points >= 100 {
                let c = Numerov::new(sys, mass, &coarse_grid.radii(), coarse_grid.spacing())?;
                bisect_levels(|s| c.count_below(s), c.lower_bound(), count)
            } else {
                Vec::new()
            };
            let vectors: Vec<_> = energies.iter().map(|&e| vec![num.eigenvector(e, h)]).collect();
            (num.count_below(0.0), energies, coarse, vectors)
        }
    };
    let richardson = 2f64.powi(scheme.order()) - 1.0;
    let levels = energies
        .iter()
        .zip(vectors)
        .enumerate()
        .map(|(i, (&e, channels))| {
            let coarse_energy = coarse.get(i).copied();
            Level {
                energy: e,
                channels,
                coarse_energy,
                error_estimate: coarse_energy.map(|ec| (e - ec).abs() / richardson),
            }
        })
        .collect();
    Ok(EigenResult {
        grid,
        scheme,
        levels,
        bound_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial_solver::build_system;
    use crate::spin_algebra::SpinValue;
    use nalgebra::{DMatrix, SymmetricEigen};

    fn dense(disc: &Discretization) -> DMatrix<f64> {
        let (n, c) = (disc.diag.len(), disc.c);
        let mut m = DMatrix::zeros(n * c, n * c);
        for i in 0..n {
            for a in 0..c {
                for k in 0..c {
                    m[(i * c + a, i * c + k)] = disc.diag[i][a][k];
                }
                if i + 1 < n {
                    m[(i * c + a, (i + 1) * c + a)] = disc.b;
                    m[((i + 1) * c + a, i * c + a)] = disc.b;
                }
            }
        }
        m
    }

    #[test]
    fn inertia_matches_dense_eigensolve() {
        for twice_s in [0, 1, 2, 3] {
            let s = SpinValue::new(twice_s);
            let j = if twice_s == 3 { 1.5 } else { 1.0 + 0.5 * (twice_s % 2) as f64 };
            let sys = build_system(s, j, Units::Physical { mass: 1.0, alpha: 1.0 }).unwrap();
            let grid = Grid::new(30.0, 120).unwrap();
            let disc = Discretization::new(&sys, &grid).unwrap();
            let mut ev: Vec<f64> = SymmetricEigen::new(dense(&disc)).eigenvalues.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            for sigma in [-3.0, -0.5, -0.1, -0.01, 0.0, 2.0] {
                let want = ev.iter().filter(|&&e| e < sigma).count();
                assert_eq!(disc.count_below(sigma), want, "twice_s={twice_s} sigma={sigma}");
            }
            let got = lowest_eigenvalues(&disc, 3);
            for (g, w) in got.iter().zip(&ev) {
                assert!((g - w).abs() < 1e-10 * w.abs().max(1.0), "{g} vs {w}");
            }
        }
    }

    #[test]
    fn eigenvector_satisfies_discrete_equation() {
        let sys = build_system(SpinValue::new(1), 0.5, Units::Physical { mass: 1.0, alpha: 1.0 }).unwrap();
        let grid = Grid::new(40.0, 400).unwrap();
        let disc = Discretization::new(&sys, &grid).unwrap();
        let e = lowest_eigenvalues(&disc, 1)[0];
        let v = eigenvector(&disc, e, grid.spacing(), 0);
        let m = dense(&disc);
        let flat = DMatrix::from_fn(400 * 2, 1, |r, _| v[r % 2][r / 2]);
        let res = (&m * &flat - &flat * e).abs().max();
        assert!(res < 1e-8 * flat.abs().max(), "{res}");
    }

    #[test]
    fn rescaled_system_rejected() {
        let sys = build_system(SpinValue::new(0), 0.0, Units::Rescaled { k: 1.0 }).unwrap();
        assert!(solve_bound_states(&sys, Grid::new(10.0, 100).unwrap(), 1).is_err());
    }

    #[test]
    fn repulsive_system_is_empty() {
        let sys = build_system(SpinValue::new(0), 0.0, Units::Physical { mass: 1.0, alpha: -1.0 }).unwrap();
        let out = solve_bound_states(&sys, Grid::new(50.0, 500).unwrap(), 3).unwrap();
        assert!(out.is_empty());
        assert_eq!(out.bound_count, 0);
    }

    #[test]
    fn numerov_matches_dense_pencil_and_converges_faster() {
        let sys = build_system(SpinValue::new(0), 1.0, Units::Physical { mass: 1.0, alpha: 1.0 }).unwrap();
        let grid = Grid::new(30.0, 150).unwrap();
        let h = grid.spacing();
        let num = Numerov::new(&sys, 1.0, &grid.radii(), h).unwrap();
        // oracle: dense B⁻¹T + V with the same origin handling folded into row 0
        let n = grid.points;
        let t = DMatrix::from_fn(n, n, |a, b| match a.abs_diff(b) {
            0 => 1.0 / (h * h),
            1 => -0.5 / (h * h),
            _ => 0.0,
        });
        let bm = DMatrix::from_fn(n, n, |a, b| match a.abs_diff(b) {
            0 => 10.0 / 12.0,
            1 => 1.0 / 12.0,
            _ => 0.0,
        });
        let radii = grid.radii();
        let mut bv = DMatrix::from_fn(n, n, |a, b| bm[(a, b)] * (1.0 / (radii[b] * radii[b]) - 1.0 / radii[b]));
        bv[(0, 0)] += 1.0 * 8.0 / (4.0 * h * h) / 12.0;
        bv[(0, 1)] -= 1.0 / (4.0 * h * h) / 12.0;
        let pencil = bm.clone().try_inverse().unwrap() * (t + bv);
        let mut ev: Vec<f64> = pencil.complex_eigenvalues().iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        for sigma in [-0.2, -0.1, -0.05, -0.01] {
            assert_eq!(num.count_below(sigma), ev.iter().filter(|&&e| e < sigma).count(), "{sigma}");
        }
        let err = |points| {
            let out = solve_bound_states_with(&sys, Grid::new(60.0, points).unwrap(), 1, Scheme::Numerov).unwrap();
            (out.levels[0].energy + 0.125).abs()
        };
        assert!(err(1999) / err(3999) > 8.0);
        let s2 = build_system(SpinValue::new(1), 0.5, Units::Physical { mass: 1.0, alpha: 1.0 }).unwrap();
        assert!(solve_bound_states_with(&s2, grid, 1, Scheme::Numerov).is_err());
    }
}
