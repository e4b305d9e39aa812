//! Casimir labels, compatibility conditions and closed-form bound-state spectra.
//!
//! Energies use `E = -m α² / (2k²)` with the spectral parameter `k = α sqrt(m / -2E)`.
//! The interaction is in section form with an attractive coupling `α > 0`.

use nalgebra::{Matrix2, Matrix4};
use serde::Serialize;

use crate::angular_basis::{channel_basis, reduce_l2_s_dot_j, reduce_s_dot_n, reduce_s_dot_p_angular, RMatrix};
use crate::error::{Error, Result};
use crate::spin_algebra::{Normalization, SpinValue};

/// Tolerance on `‖K̂²‖` and `‖R²‖` for the nilpotency booleans.
pub const NILPOTENT_TOL: f64 = 1e-9;
/// Tolerance used by `nilpotency_check` (the spin-1 matrices are O(1)).
pub const SPIN1_NILPOTENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CasimirPair {
    pub q: f64,
    pub g: f64,
    pub c_minus: f64,
    pub c_plus: f64,
}

impl CasimirPair {
    pub fn new(q: f64, g: f64) -> Result<Self> {
        for (name, v) in [("q", q), ("g", g)] {
            if v < 0.0 || (2.0 * v - (2.0 * v).round()).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("{name} = {v} is not a non-negative half-integer")));
            }
        }
        Ok(CasimirPair {
            q,
            g,
            c_minus: 4.0 * q * (q + 1.0),
            c_plus: 4.0 * g * (g + 1.0),
        })
    }

    pub fn degeneracy(&self) -> u64 {
        ((2.0 * self.q + 1.0) * (2.0 * self.g + 1.0)).round() as u64
    }

    /// Gelfand–Tsetlin labels `(l₀, l₁) = (g - q, g + q + 1)`.
    pub fn gelfand_tsetlin(&self) -> (f64, f64) {
        (self.g - self.q, self.g + self.q + 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Hydrogen,
    SpinHalf,
    Coupled,
    Trivial,
    /// Spin 3/2, `k = n + 3/2`.
    A,
    /// Spin 3/2, `k = (n + 1/2)/3`.
    B,
}

impl Branch {
    pub fn tag(self) -> &'static str {
        match self {
            Branch::Hydrogen => "hydrogen",
            Branch::SpinHalf => "spin-half",
            Branch::Coupled => "coupled",
            Branch::Trivial => "trivial",
            Branch::A => "A",
            Branch::B => "B",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumEntry {
    pub twice_s: u32,
    pub branch: Branch,
    /// Branch counting number (`n = 2q + 1` where the branch defines it).
    pub n: u32,
    /// Principal number `N`.
    pub principal: f64,
    /// Admissible total angular momenta.
    pub j_values: Vec<f64>,
    pub k: f64,
    pub energy: f64,
    /// Representation label `D(l₀, l₁)`.
    pub rep: (f64, f64),
    pub casimir: CasimirPair,
    pub degeneracy: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumTable {
    pub twice_s: u32,
    pub mass: f64,
    pub alpha: f64,
    pub normalization: &'static str,
    pub entries: Vec<SpectrumEntry>,
    pub flags: Vec<String>,
}

fn check_params(mass: f64, alpha: f64) -> Result<()> {
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "coupling must be positive for bound states, got {alpha}"
        )));
    }
    Ok(())
}

fn energy(mass: f64, alpha: f64, k: f64) -> f64 {
    -mass * alpha * alpha / (2.0 * k * k)
}

fn half_range(lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut j = lo;
    while j <= hi + 1e-12 {
        out.push(j);
        j += 1.0;
    }
    out
}

/// `E_n = -mα²/(2n²)` with `q = g = (n-1)/2`.
pub fn hydrogen_spectrum(mass: f64, alpha: f64, levels: usize) -> Result<SpectrumTable> {
    check_params(mass, alpha)?;
    let entries = (1..=levels as u32)
        .map(|n| {
            let q = (n as f64 - 1.0) / 2.0;
            let cas = CasimirPair::new(q, q).expect("half-integer");
            SpectrumEntry {
                twice_s: 0,
                branch: Branch::Hydrogen,
                n,
                principal: n as f64,
                j_values: half_range(0.0, n as f64 - 1.0),
                k: n as f64,
                energy: energy(mass, alpha, n as f64),
                rep: cas.gelfand_tsetlin(),
                degeneracy: cas.degeneracy(),
                casimir: cas,
            }
        })
        .collect();
    Ok(SpectrumTable {
        twice_s: 0,
        mass,
        alpha,
        normalization: Normalization::Section.tag(),
        entries,
        flags: Vec::new(),
    })
}

/// Flag attached to spin-3/2 tables: branch B energies are linear in the mass.
pub const FLAG_BRANCH_B_MASS: &str = "branch-b-energy-linear-in-mass";
/// Flag attached to spin-3/2 tables: branch representation labels follow the documented
/// assignment, while degeneracies come from `(q, g)`.
pub const FLAG_REP_LABELS: &str = "spin32-rep-labels-as-documented";
/// Flag attached to spin-1 tables: the `q = 0` entry is algebraic only.
pub const FLAG_TRIVIAL: &str = "trivial-entry-has-no-normalizable-radial-solution";

/// Closed-form spectrum for `s ∈ {0, 1/2, 1, 3/2}`, merged over branches and sorted by
/// energy (ties broken by branch, then `N`), truncated to `levels` entries.
pub fn spectrum(s: SpinValue, mass: f64, alpha: f64, levels: usize) -> Result<SpectrumTable> {
    check_params(mass, alpha)?;
    let mut flags = Vec::new();
    let mut entries = match s.twice_s {
        0 => return hydrogen_spectrum(mass, alpha, levels),
        1 => (1..=levels as u32)
            .map(|n| {
                let cas = CasimirPair::new((n as f64 - 1.0) / 2.0, n as f64 / 2.0).expect("half-integer");
                let big_n = n as f64 + 0.5;
                SpectrumEntry {
                    twice_s: 1,
                    branch: Branch::SpinHalf,
                    n,
                    principal: big_n,
                    j_values: half_range(0.5, big_n - 1.0),
                    k: big_n,
                    energy: energy(mass, alpha, big_n),
                    rep: cas.gelfand_tsetlin(),
                    degeneracy: cas.degeneracy(),
                    casimir: cas,
                }
            })
            .collect::<Vec<_>>(),
        2 => {
            flags.push(FLAG_TRIVIAL.to_string());
            let trivial_cas = CasimirPair::new(0.0, 0.0).expect("zero");
            let mut v = vec![SpectrumEntry {
                twice_s: 2,
                branch: Branch::Trivial,
                n: 0,
                principal: 1.0,
                j_values: vec![0.0],
                k: 1.0,
                energy: energy(mass, alpha, 1.0),
                rep: trivial_cas.gelfand_tsetlin(),
                degeneracy: trivial_cas.degeneracy(),
                casimir: trivial_cas,
            }];
            // k = n + j + 1 = 2q + 1, admissible j = 1..=2q
            for big_n in 2..=(levels as u32 + 1) {
                let q = (big_n as f64 - 1.0) / 2.0;
                let cas = CasimirPair::new(q, q).expect("half-integer");
                v.push(SpectrumEntry {
                    twice_s: 2,
                    branch: Branch::Coupled,
                    n: big_n - 2,
                    principal: big_n as f64,
                    j_values: half_range(1.0, big_n as f64 - 1.0),
                    k: big_n as f64,
                    energy: energy(mass, alpha, big_n as f64),
                    rep: cas.gelfand_tsetlin(),
                    degeneracy: cas.degeneracy(),
                    casimir: cas,
                });
            }
            v
        }
        3 => {
            flags.push(FLAG_BRANCH_B_MASS.to_string());
            flags.push(FLAG_REP_LABELS.to_string());
            let mut v = Vec::new();
            for n in 1..=levels as u32 {
                let q = (n as f64 - 1.0) / 2.0;
                let nf = n as f64;
                let cas_a = CasimirPair::new(q, q + 1.5).expect("half-integer");
                let big_a = nf + 1.5;
                v.push(SpectrumEntry {
                    twice_s: 3,
                    branch: Branch::A,
                    n,
                    principal: big_a,
                    j_values: half_range(1.5, big_a - 1.0),
                    k: big_a,
                    energy: energy(mass, alpha, big_a),
                    rep: (0.5, big_a),
                    degeneracy: cas_a.degeneracy(),
                    casimir: cas_a,
                });
                let cas_b = CasimirPair::new(q, q + 0.5).expect("half-integer");
                let big_b = nf + 0.5;
                let k = big_b / 3.0;
                v.push(SpectrumEntry {
                    twice_s: 3,
                    branch: Branch::B,
                    n,
                    principal: big_b,
                    j_values: half_range(0.5, big_b - 1.0),
                    k,
                    energy: -9.0 * mass * alpha * alpha / (2.0 * big_b * big_b),
                    rep: (1.5, big_b),
                    degeneracy: cas_b.degeneracy(),
                    casimir: cas_b,
                });
            }
            v
        }
        _ => {
            return Err(Error::NotDerived(format!(
                "closed-form spectrum for s = {s} (covered: 0, 1/2, 1, 3/2)"
            )))
        }
    };
    entries.sort_by(|a, b| {
        a.energy
            .total_cmp(&b.energy)
            .then(a.branch.cmp(&b.branch))
            .then(a.principal.total_cmp(&b.principal))
    });
    entries.truncate(levels);
    Ok(SpectrumTable {
        twice_s: s.twice_s,
        mass,
        alpha,
        normalization: Normalization::Section.tag(),
        entries,
        flags,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NilpotencyResult {
    pub nilpotent: bool,
    /// `max |(K̂²)_ab|`.
    pub residual: f64,
}

/// Residual coefficient matrix `K̂` of the spin-1 superpotential
/// `W = M/r - kN + K̂ r`.
pub fn spin1_superpotential_k(j: u32, q: f64, k: f64) -> Matrix2<f64> {
    let jf = j as f64;
    let mu = (jf * (jf + 1.0)).sqrt();
    let a = 4.0 * q * (q + 1.0) / mu;
    let b = (k * k - 1.0) / (mu * (2.0 * jf + 1.0));
    Matrix2::new(0.0, -a, a, 0.0) + Matrix2::new(-mu, jf + 1.0, -jf, mu) * b
}

/// Spin-1 compatibility: `K̂² = 0` holds iff `k² = (2q+1)²` or `q = 0`.
pub fn nilpotency_check(j: u32, q: f64, k: f64) -> Result<NilpotencyResult> {
    if j < 1 {
        return Err(Error::InvalidChannel("spin-1 superpotential needs j >= 1".into()));
    }
    CasimirPair::new(q, q)?;
    let kk = spin1_superpotential_k(j, q, k);
    let residual = (kk * kk).abs().max();
    Ok(NilpotencyResult {
        nilpotent: residual < SPIN1_NILPOTENT_TOL,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OmegaSign {
    Plus,
    Minus,
}

/// `ω_+ = (2g+1)² - 2sk`, `ω_- = (2q+1)² + 2sk` (half-integer `s`); both `(2g+1)²` for
/// integer `s`.
pub fn omega(s: SpinValue, q: f64, g: f64, k: f64, sign: OmegaSign) -> f64 {
    if s.is_integer() {
        return (2.0 * g + 1.0).powi(2);
    }
    match sign {
        OmegaSign::Plus => (2.0 * g + 1.0).powi(2) - 2.0 * s.s() * k,
        OmegaSign::Minus => (2.0 * q + 1.0).powi(2) + 2.0 * s.s() * k,
    }
}

fn to4(m: &RMatrix) -> Matrix4<f64> {
    Matrix4::from_fn(|a, b| m[(a, b)])
}

/// Coefficient `R` of the linear term of the spin-3/2 first-order system, in the
/// four-channel basis `(λ = 3/2, -1/2, 1/2, -3/2)`.
///
/// Eliminating second derivatives between the radial equation and the Casimir equation
/// leaves `Φ' = (… + rR)Φ` with `R = {X, [X, Y]}⁻¹ (X² + k²Λ̂² - ω)`, where `X` is the
/// reduced `S·n`, `Y = S·J - s(s+1)` and `Λ̂` the section-form interaction.
pub fn spin32_r_matrix(j: f64, k: f64, omega: f64) -> Result<Matrix4<f64>> {
    let s = SpinValue::new(3);
    if j < 1.5 {
        return Err(Error::InvalidChannel(format!("four-channel spin-3/2 system needs j >= 3/2, got {j}")));
    }
    let pb = channel_basis(s, j)?;
    let x = to4(&pb.transform(&reduce_s_dot_n(s, j)?.matrix));
    let z = to4(&pb.transform(&reduce_s_dot_p_angular(s, j)?.matrix));
    // Λ̂_section = (4/3)(5X - 2X³); Λ̂² from the same polynomial
    let lam = (x * 5.0 - x * x * x * 2.0) * (4.0 / 3.0);
    let anti = x * z + z * x;
    let inv = anti
        .try_inverse()
        .ok_or_else(|| Error::NonConvergent(format!("singular anticommutator at j = {j}")))?;
    Ok(inv * (x * x + lam * lam * (k * k) - Matrix4::identity() * omega))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompatibilityResult {
    pub omega: f64,
    /// `max |(R²)_ab|`.
    pub r2_residual: f64,
    pub nilpotent: bool,
    /// `k² = ω - 9/4`.
    pub first_condition: bool,
    /// `(3k)² = ω - 1/4`.
    pub second_condition: bool,
}

impl CompatibilityResult {
    /// Numerical `R² = 0` agrees with the closed-form conditions.
    pub fn agrees(&self) -> bool {
        self.nilpotent == (self.first_condition || self.second_condition)
    }
}

pub fn spin32_compatibility(j: f64, q: f64, g: f64, k: f64, sign: OmegaSign) -> Result<CompatibilityResult> {
    CasimirPair::new(q, g)?;
    let w = omega(SpinValue::new(3), q, g, k, sign);
    let r = spin32_r_matrix(j, k, w)?;
    let r2_residual = (r * r).abs().max();
    let tol = 1e-9 * (1.0 + w.abs());
    Ok(CompatibilityResult {
        omega: w,
        r2_residual,
        nilpotent: r2_residual < NILPOTENT_TOL,
        first_condition: (k * k - (w - 2.25)).abs() < tol,
        second_condition: (9.0 * k * k - (w - 0.25)).abs() < tol,
    })
}

/// Spin-1/2 algebraic constraint: `(να - 1/2)² = (2q+1)²` and `(να + 1/2)² = (2g+1)²`
/// with `ν = sqrt(-m/(2E))`.
pub fn spin_half_constraint(mass: f64, alpha: f64, energy: f64, q: f64, g: f64) -> Result<bool> {
    if energy >= 0.0 {
        return Err(Error::InvalidParameter(format!("constraint needs E < 0, got {energy}")));
    }
    CasimirPair::new(q, g)?;
    let na = (-mass / (2.0 * energy)).sqrt() * alpha;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + b.abs());
    Ok(close((na - 0.5).powi(2), (2.0 * q + 1.0).powi(2)) && close((na + 0.5).powi(2), (2.0 * g + 1.0).powi(2)))
}

/// `L²` in the four-channel spin-3/2 basis, used by the radial solvers.
pub fn spin32_orbital(j: f64) -> Result<RMatrix> {
    let s = SpinValue::new(3);
    Ok(channel_basis(s, j)?.transform(&reduce_l2_s_dot_j(s, j)?.0.matrix))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hydrogen_levels() {
        let t = hydrogen_spectrum(1.0, 1.0, 3).unwrap();
        assert_eq!(t.entries[0].energy, -0.5);
        assert_eq!(t.entries[1].energy, -0.125);
        assert_eq!(t.entries[1].degeneracy, 4);
        assert!(hydrogen_spectrum(1.0, 0.0, 3).is_err());
        assert_eq!(spectrum(SpinValue::new(0), 1.0, 1.0, 3).unwrap(), t);
    }

    #[test]
    fn spin_half_balmer() {
        let t = spectrum(SpinValue::new(1), 1.0, 1.0, 3).unwrap();
        assert!((t.entries[0].energy + 2.0 / 9.0).abs() < 1e-15);
        assert_eq!(t.entries[0].rep, (0.5, 1.5));
    }

    #[test]
    fn spin1_levels() {
        let t = spectrum(SpinValue::new(2), 1.0, 1.0, 4).unwrap();
        assert_eq!(t.entries[0].branch, Branch::Trivial);
        assert_eq!(t.entries[0].energy, -0.5);
        assert_eq!(t.entries[1].k, 2.0);
        assert_eq!(t.entries[1].energy, -0.125);
        assert_eq!(t.entries[1].j_values, vec![1.0]);
    }

    #[test]
    fn spin32_branches() {
        let t = spectrum(SpinValue::new(3), 1.0, 1.0, 20).unwrap();
        let b1 = t.entries.iter().find(|e| e.branch == Branch::B && e.n == 1).unwrap();
        assert!((b1.k - 0.5).abs() < 1e-15);
        assert!((b1.energy + 2.0).abs() < 1e-15);
        assert!(t.entries.windows(2).all(|w| w[0].energy <= w[1].energy));
        assert!(t.flags.iter().any(|f| f == FLAG_BRANCH_B_MASS));
    }

    #[test]
    fn uncovered_spin() {
        assert!(matches!(spectrum(SpinValue::new(4), 1.0, 1.0, 3), Err(Error::NotDerived(_))));
    }

    #[test]
    fn spin1_nilpotency_examples() {
        assert!(nilpotency_check(1, 1.0, 3.0).unwrap().nilpotent);
        let off = nilpotency_check(1, 1.0, 2.0).unwrap();
        assert!(!off.nilpotent && off.residual > 0.1);
        assert!(nilpotency_check(3, 0.0, 1.7).unwrap().nilpotent);
    }

    #[test]
    fn spin32_examples() {
        for sign in [OmegaSign::Plus, OmegaSign::Minus] {
            let a = spin32_compatibility(1.5, 0.0, 1.5, 2.5, sign).unwrap();
            assert!(a.nilpotent && a.first_condition, "{a:?}");
            let b = spin32_compatibility(1.5, 0.0, 0.5, 0.5, sign).unwrap();
            assert!(b.nilpotent && b.second_condition, "{b:?}");
            let c = spin32_compatibility(1.5, 0.0, 1.5, 1.1, sign).unwrap();
            assert!(!c.nilpotent && c.agrees());
        }
    }

    #[test]
    fn spin_half_constraint_examples() {
        assert!(spin_half_constraint(1.0, 1.0, -2.0 / 9.0, 0.0, 0.5).unwrap());
        assert!(!spin_half_constraint(1.0, 1.0, -2.0 / 9.0, 0.5, 1.0).unwrap());
        assert!(spin_half_constraint(1.0, 1.0, -2.0 / 25.0, 0.5, 1.0).unwrap());
        for tq in 0..=20 {
            for tg in 0..=20 {
                assert!(!spin_half_constraint(1.0, 1.0, -0.5, tq as f64 / 2.0, tg as f64 / 2.0).unwrap());
            }
        }
    }
}
