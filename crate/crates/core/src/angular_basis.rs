//! Clebsch-Gordan coefficients, spherical harmonics, spherical spinors and the reduction
//! of rotation-invariant matrices to the orbital channel index.
//!
//! Half-integers are passed as `f64` and validated; internally everything is carried as
//! twice the value. Reduced matrices are indexed by `λ` in ascending order
//! `-s, -s+1, …`, and the orbital momentum of channel `λ` is `l = j - λ`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::spin_algebra::{build_spin_matrices, lambda_polynomial, CMatrix, Normalization, SpinValue};

pub type RMatrix = DMatrix<f64>;

fn twice(x: f64, what: &str) -> Result<i64> {
    let t = 2.0 * x;
    if (t - t.round()).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("{what} = {x} is not a half-integer")));
    }
    Ok(t.round() as i64)
}

fn factorial(n: i64) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Result of a Clebsch-Gordan evaluation. `allowed` is false when the selection rules
/// (triangle condition, `M = m1 + m2`) make the coefficient vanish.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CgValue {
    pub value: f64,
    pub allowed: bool,
}

/// `⟨j1 m1; j2 m2 | J M⟩` in the Condon-Shortley convention (Racah's closed formula).
///
/// Malformed quantum numbers (non-half-integers, `|m| > j`, `j - m` not an integer) are
/// an error; well-formed but forbidden combinations return zero with `allowed = false`.
pub fn clebsch_gordan(j1: f64, m1: f64, j2: f64, m2: f64, jj: f64, mm: f64) -> Result<CgValue> {
    let t = [
        twice(j1, "j1")?,
        twice(m1, "m1")?,
        twice(j2, "j2")?,
        twice(m2, "m2")?,
        twice(jj, "J")?,
        twice(mm, "M")?,
    ];
    for (j, m) in [(t[0], t[1]), (t[2], t[3]), (t[4], t[5])] {
        if j < 0 || m.abs() > j || (j - m) % 2 != 0 {
            return Err(Error::InvalidParameter(format!("invalid pair j = {}/2, m = {}/2", j, m)));
        }
    }
    Ok(cg_twice(t[0], t[1], t[2], t[3], t[4], t[5]))
}

/// Clebsch-Gordan coefficient with all arguments doubled; inputs assumed well formed.
pub fn cg_twice(j1: i64, m1: i64, j2: i64, m2: i64, jj: i64, mm: i64) -> CgValue {
    let forbidden = CgValue {
        value: 0.0,
        allowed: false,
    };
    if m1 + m2 != mm || jj < (j1 - j2).abs() || jj > j1 + j2 || (j1 + j2 + jj) % 2 != 0 {
        return forbidden;
    }
    let h = |x: i64| x / 2;
    let pre = ((jj + 1) as f64 * factorial(h(jj + j1 - j2)) * factorial(h(jj - j1 + j2)) * factorial(h(j1 + j2 - jj))
        / factorial(h(j1 + j2 + jj) + 1))
        .sqrt();
    let pre2 = (factorial(h(jj + mm))
        * factorial(h(jj - mm))
        * factorial(h(j1 - m1))
        * factorial(h(j1 + m1))
        * factorial(h(j2 - m2))
        * factorial(h(j2 + m2)))
    .sqrt();
    let mut sum = 0.0;
    let kmax = h(j1 + j2 - jj).min(h(j1 - m1)).min(h(j2 + m2));
    let kmin = 0.max(h(j2 - jj - m1)).max(h(j1 + m2 - jj));
    for k in kmin..=kmax {
        let den = factorial(k)
            * factorial(h(j1 + j2 - jj) - k)
            * factorial(h(j1 - m1) - k)
            * factorial(h(j2 + m2) - k)
            * factorial(h(jj - j2 + m1) + k)
            * factorial(h(jj - j1 - m2) + k);
        sum += if k % 2 == 0 { 1.0 } else { -1.0 } / den;
    }
    CgValue {
        value: pre * pre2 * sum,
        allowed: true,
    }
}

/// Spherical harmonic `Y_lm(θ, φ)` with the Condon-Shortley phase.
pub fn spherical_harmonic(l: i64, m: i64, theta: f64, phi: f64) -> Complex64 {
    if m.abs() > l || l < 0 {
        return Complex64::new(0.0, 0.0);
    }
    let am = m.abs();
    let x = theta.cos();
    let st = theta.sin();
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for i in 1..=am {
        pmm *= -((2 * i + 1) as f64 / (2 * i) as f64).sqrt() * st;
    }
    let p = if l == am {
        pmm
    } else {
        let mut p0 = pmm;
        let mut p1 = ((2 * am + 3) as f64).sqrt() * x * pmm;
        for ll in am + 2..=l {
            let lf = ll as f64;
            let mf = am as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            let p2 = a * (x * p1 - b * p0);
            p0 = p1;
            p1 = p2;
        }
        p1
    };
    let y = Complex64::from_polar(p, am as f64 * phi);
    if m >= 0 {
        y
    } else if am % 2 == 0 {
        y.conj()
    } else {
        -y.conj()
    }
}

/// A `(s, j, κ)` block of spherical spinors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AngularChannel {
    pub s: SpinValue,
    pub twice_j: i64,
    pub twice_kappa: i64,
}

impl AngularChannel {
    pub fn new(s: SpinValue, j: f64, kappa: f64) -> Result<Self> {
        let tj = twice(j, "j")?;
        let tk = twice(kappa, "kappa")?;
        let ts = s.twice_s as i64;
        if tj < 0 || tk.abs() > tj || (tj - tk) % 2 != 0 || (tj - ts) % 2 != 0 {
            return Err(Error::InvalidChannel(format!(
                "s = {s}, j = {j}, kappa = {kappa} is not admissible"
            )));
        }
        Ok(AngularChannel {
            s,
            twice_j: tj,
            twice_kappa: tk,
        })
    }

    pub fn j(&self) -> f64 {
        self.twice_j as f64 / 2.0
    }

    pub fn kappa(&self) -> f64 {
        self.twice_kappa as f64 / 2.0
    }

    /// Number of channels, `2 min(s, j) + 1`.
    pub fn count(&self) -> usize {
        (self.s.twice_s as i64).min(self.twice_j) as usize + 1
    }

    /// `λ = -s, …, -s + 2 min(s, j)` in ascending order.
    pub fn lambdas(&self) -> Vec<f64> {
        (0..self.count()).map(|i| -self.s.s() + i as f64).collect()
    }

    /// Orbital momenta `l = j - λ` in the same order as [`AngularChannel::lambdas`].
    pub fn orbital(&self) -> Vec<i64> {
        self.lambdas().iter().map(|lam| (self.j() - lam).round() as i64).collect()
    }
}

/// Spinor `Ω^s_{j,κ,λ}(θ, φ)`; component `μ` (ordered `s, s-1, …, -s` like the spin
/// matrices) equals `C_{j-λ, κ-μ; s, μ}^{j κ} Y_{j-λ, κ-μ}`.
pub fn spherical_spinor(ch: &AngularChannel, lambda: f64, theta: f64, phi: f64) -> Result<Vec<Complex64>> {
    let tl = twice(lambda, "lambda")?;
    let lams = ch.lambdas();
    if !lams.iter().any(|&v| (v - lambda).abs() < 1e-9) {
        return Err(Error::InvalidChannel(format!("lambda = {lambda} outside the channel")));
    }
    let tlorb = ch.twice_j - tl;
    let ts = ch.s.twice_s as i64;
    Ok((0..=ts)
        .map(|i| {
            let tmu = ts - 2 * i;
            let tml = ch.twice_kappa - tmu;
            if tml.abs() > tlorb {
                return Complex64::new(0.0, 0.0);
            }
            let c = cg_twice(tlorb, tml, ts, tmu, ch.twice_j, ch.twice_kappa).value;
            spherical_harmonic(tlorb / 2, tml / 2, theta, phi) * c
        })
        .collect())
}

/// Product quadrature on the sphere: Gauss-Legendre in `cos θ`, trapezoid in `φ`.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    pub points: Vec<(f64, f64, f64)>,
}

impl SphereQuadrature {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        let (xs, ws) = gauss_legendre(n_theta);
        let dphi = 2.0 * PI / n_phi as f64;
        let mut points = Vec::with_capacity(n_theta * n_phi);
        for (x, w) in xs.iter().zip(&ws) {
            for k in 0..n_phi {
                points.push((x.acos(), k as f64 * dphi, w * dphi));
            }
        }
        SphereQuadrature { points }
    }

    /// The default orders (64, 128).
    pub fn standard() -> Self {
        Self::new(64, 128)
    }
}

/// `∫ Ω_{λ'}† O(n) Ω_λ dω` over all channel pairs, for a matrix-valued function of `n`.
pub fn quadrature_reduce<F>(ch: &AngularChannel, quad: &SphereQuadrature, op: F) -> Result<CMatrix>
where
    F: Fn([f64; 3]) -> CMatrix,
{
    let lams = ch.lambdas();
    let c = lams.len();
    let mut out = CMatrix::zeros(c, c);
    for &(th, ph, w) in &quad.points {
        let n = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
        let o = op(n);
        let spinors: Vec<Vec<Complex64>> = lams
            .iter()
            .map(|&l| spherical_spinor(ch, l, th, ph))
            .collect::<Result<_>>()?;
        for (b, sb) in spinors.iter().enumerate() {
            let v = nalgebra::DVector::from_vec(sb.clone());
            let ov = &o * v;
            for (a, sa) in spinors.iter().enumerate() {
                let dot: Complex64 = sa.iter().zip(ov.iter()).map(|(x, y)| x.conj() * y).sum();
                out[(a, b)] += dot * w;
            }
        }
    }
    Ok(out)
}

/// Gram matrix `∫ Ω_{λ'}† Ω_λ dω` of a channel block.
pub fn gram_matrix(ch: &AngularChannel, quad: &SphereQuadrature) -> Result<CMatrix> {
    let d = ch.s.dim();
    quadrature_reduce(ch, quad, |_| CMatrix::identity(d, d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ReducedOperator {
    SDotN,
    SDotJ,
    L2,
    /// `[S·n, S·L]`, so that `S·p = -i (S·n) ∂_x + (i/x)[S·n, S·L]`.
    SDotPAngular,
    Lambda,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedMatrix {
    pub op: ReducedOperator,
    pub s: SpinValue,
    pub twice_j: i64,
    pub matrix: RMatrix,
}

fn channel(s: SpinValue, j: f64) -> Result<AngularChannel> {
    AngularChannel::new(s, j, j)
}

/// `A(μ) = sqrt(μ(2j+1-μ)(2s+1-μ)(2j+2s+2-μ) / ((2j+2s-2μ+1)(2j+2s-2μ+3)))`.
pub fn a_coefficient(s: f64, j: f64, mu: f64) -> f64 {
    let num = mu * (2.0 * j + 1.0 - mu) * (2.0 * s + 1.0 - mu) * (2.0 * j + 2.0 * s + 2.0 - mu);
    let den = (2.0 * j + 2.0 * s - 2.0 * mu + 1.0) * (2.0 * j + 2.0 * s - 2.0 * mu + 3.0);
    (num / den).sqrt()
}

/// Tridiagonal `S·n` in the ascending-λ basis; the entry coupling `λ` and `λ+1` is
/// `-A(s+λ+1)/2`.
pub fn reduce_s_dot_n(s: SpinValue, j: f64) -> Result<ReducedMatrix> {
    let ch = channel(s, j)?;
    let lams = ch.lambdas();
    let c = lams.len();
    let mut m = RMatrix::zeros(c, c);
    for i in 0..c.saturating_sub(1) {
        let v = -0.5 * a_coefficient(s.s(), j, s.s() + lams[i] + 1.0);
        m[(i, i + 1)] = v;
        m[(i + 1, i)] = v;
    }
    Ok(ReducedMatrix {
        op: ReducedOperator::SDotN,
        s,
        twice_j: ch.twice_j,
        matrix: m,
    })
}

/// `L² = diag((j-λ)(j-λ+1))` and `S·J = (j(j+1) + s(s+1) - L²)/2`.
pub fn reduce_l2_s_dot_j(s: SpinValue, j: f64) -> Result<(ReducedMatrix, ReducedMatrix)> {
    let ch = channel(s, j)?;
    let l2: Vec<f64> = ch.orbital().iter().map(|&l| (l * (l + 1)) as f64).collect();
    let sf = s.s();
    let sj: Vec<f64> = l2.iter().map(|v| 0.5 * (j * (j + 1.0) + sf * (sf + 1.0) - v)).collect();
    let mk = |op, d: Vec<f64>| ReducedMatrix {
        op,
        s,
        twice_j: ch.twice_j,
        matrix: RMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)),
    };
    Ok((mk(ReducedOperator::L2, l2), mk(ReducedOperator::SDotJ, sj)))
}

/// `[S·n, S·L]` with `S·L = S·J - s(s+1)`.
pub fn reduce_s_dot_p_angular(s: SpinValue, j: f64) -> Result<ReducedMatrix> {
    let x = reduce_s_dot_n(s, j)?.matrix;
    let (_, sj) = reduce_l2_s_dot_j(s, j)?;
    let g = &x * &sj.matrix - &sj.matrix * &x;
    Ok(ReducedMatrix {
        op: ReducedOperator::SDotPAngular,
        s,
        twice_j: sj.twice_j,
        matrix: g,
    })
}

/// Reduced `Λ̂`, obtained as the interpolating polynomial of `S·n` applied to the reduced
/// `S·n` (the channel block is invariant under `S·n`).
pub fn reduce_lambda(s: SpinValue, j: f64, norm: Normalization) -> Result<ReducedMatrix> {
    let x = reduce_s_dot_n(s, j)?;
    let coeffs = lambda_polynomial(s, norm)?;
    let c = x.matrix.nrows();
    let mut acc = RMatrix::zeros(c, c);
    let mut pow = RMatrix::identity(c, c);
    for a in coeffs {
        acc += &pow * a;
        pow = &pow * &x.matrix;
    }
    Ok(ReducedMatrix {
        op: ReducedOperator::Lambda,
        s,
        twice_j: x.twice_j,
        matrix: acc,
    })
}

/// Quadrature oracle for `S·n` (`Λ̂` when `lambda` is given a normalization).
pub fn quadrature_s_dot_n(s: SpinValue, j: f64, kappa: f64, quad: &SphereQuadrature) -> Result<CMatrix> {
    let ch = AngularChannel::new(s, j, kappa)?;
    let rep = build_spin_matrices(s);
    quadrature_reduce(&ch, quad, |n| rep.dot(n))
}

pub fn quadrature_lambda(s: SpinValue, j: f64, kappa: f64, norm: Normalization, quad: &SphereQuadrature) -> Result<CMatrix> {
    let ch = AngularChannel::new(s, j, kappa)?;
    let rep = build_spin_matrices(s);
    let coeffs = lambda_polynomial(s, norm)?;
    quadrature_reduce(&ch, quad, |n| {
        let sn = rep.dot(n);
        let mut acc = CMatrix::zeros(rep.dim(), rep.dim());
        let mut pow = rep.identity();
        for &a in &coeffs {
            acc += &pow * Complex64::from(a);
            pow = &pow * &sn;
        }
        acc
    })
}

/// Channel permutation and signs of the basis used for the explicit spin-1 and spin-3/2
/// radial systems: entry `i` of the result picks ascending-λ index `perm[i]` with sign
/// `sign[i]`.
///
/// - spin 1: `λ = 1, 0, -1` (orbital `j-1, j, j+1`), all signs positive.
/// - spin 3/2: `λ = 3/2, -1/2, 1/2, -3/2` with signs `+, +, -, -`; for `j = 1/2` only
///   `λ = -3/2, -1/2` exist, in that order, with signs `-, +`.
/// - other spins: ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelBasis {
    pub perm: Vec<usize>,
    pub sign: Vec<f64>,
}

pub fn channel_basis(s: SpinValue, j: f64) -> Result<ChannelBasis> {
    let ch = channel(s, j)?;
    let lams = ch.lambdas();
    let idx = |lam: f64| lams.iter().position(|&v| (v - lam).abs() < 1e-9);
    let (order, sign): (Vec<f64>, Vec<f64>) = match s.twice_s {
        2 => (lams.iter().rev().copied().collect(), vec![1.0; lams.len()]),
        3 if ch.count() == 4 => (vec![1.5, -0.5, 0.5, -1.5], vec![1.0, 1.0, -1.0, -1.0]),
        3 if ch.count() == 2 => (vec![-1.5, -0.5], vec![-1.0, 1.0]),
        _ => (lams.clone(), vec![1.0; lams.len()]),
    };
    let perm = order
        .iter()
        .map(|&l| idx(l).ok_or_else(|| Error::InvalidChannel(format!("lambda {l} missing"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(ChannelBasis { perm, sign })
}

impl ChannelBasis {
    /// `P M Pᵀ` with `P` the signed permutation.
    pub fn transform(&self, m: &RMatrix) -> RMatrix {
        let c = self.perm.len();
        RMatrix::from_fn(c, c, |a, b| self.sign[a] * self.sign[b] * m[(self.perm[a], self.perm[b])])
    }

    pub fn transform_complex(&self, m: &CMatrix) -> CMatrix {
        let c = self.perm.len();
        CMatrix::from_fn(c, c, |a, b| m[(self.perm[a], self.perm[b])] * (self.sign[a] * self.sign[b]))
    }
}

/// Reduced matrices in the channel basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelReduction {
    pub s_dot_n: RMatrix,
    pub l2: RMatrix,
    pub s_dot_j: RMatrix,
    pub lambda: RMatrix,
}

pub fn channel_reduction(s: SpinValue, j: f64, norm: Normalization) -> Result<ChannelReduction> {
    let pb = channel_basis(s, j)?;
    let x = reduce_s_dot_n(s, j)?;
    let (l2, sj) = reduce_l2_s_dot_j(s, j)?;
    let lam = reduce_lambda(s, j, norm)?;
    Ok(ChannelReduction {
        s_dot_n: pb.transform(&x.matrix),
        l2: pb.transform(&l2.matrix),
        s_dot_j: pb.transform(&sj.matrix),
        lambda: pb.transform(&lam.matrix),
    })
}

/// Constants `(μ, δ, a)` of the spin-3/2 radial system, read off the quadrature-derived
/// reduced `Λ̂` in the channel basis through `Λ̂_13 = √3 j/μ` and `Λ̂_14 = -δ/μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spin32Constants {
    pub mu: f64,
    pub delta: f64,
    pub a: f64,
}

pub fn derive_spin32_reduction_constants(j: f64, quad: &SphereQuadrature) -> Result<Spin32Constants> {
    let tj = twice(j, "j")?;
    if tj < 3 || tj % 2 == 0 {
        return Err(Error::InvalidChannel(format!(
            "spin-3/2 reduction constants need half-integer j >= 3/2 (j = 1/2 is the two-channel case), got {j}"
        )));
    }
    let s = SpinValue::new(3);
    let pb = channel_basis(s, j)?;
    let lam = pb.transform_complex(&quadrature_lambda(s, j, j, Normalization::Section, quad)?);
    let mu = 3f64.sqrt() * j / lam[(0, 2)].re;
    let delta = -mu * lam[(0, 3)].re;
    Ok(Spin32Constants {
        mu,
        delta,
        a: ((2.0 * j + 3.0) / (2.0 * j - 1.0)).sqrt(),
    })
}

/// Closed-form `Λ̂_section` of the spin-3/2 system in the channel basis: zero diagonal,
/// `Λ̂_13 = √3 j/μ`, `Λ̂_14 = -δ/μ`, `Λ̂_24 = √3 (j+1)/μ`, `Λ̂_23 = 0`.
pub fn spin32_lambda_closed(j: f64) -> RMatrix {
    let mu = (j * (j + 1.0)).sqrt();
    let delta = ((2.0 * j - 1.0) * (2.0 * j + 3.0)).sqrt();
    let r3 = 3f64.sqrt();
    let mut m = RMatrix::zeros(4, 4);
    let set = |m: &mut RMatrix, a: usize, b: usize, v: f64| {
        m[(a, b)] = v;
        m[(b, a)] = v;
    };
    set(&mut m, 0, 2, r3 * j / mu);
    set(&mut m, 0, 3, -delta / mu);
    set(&mut m, 1, 3, r3 * (j + 1.0) / mu);
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cmax(m: &CMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn rmax(m: &RMatrix) -> f64 {
        m.iter().map(|z| z.abs()).fold(0.0, f64::max)
    }

    #[test]
    fn cg_examples() {
        let v = clebsch_gordan(0.5, 0.5, 0.5, -0.5, 0.0, 0.0).unwrap();
        assert!((v.value - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15 && v.allowed);
        for (j1, j2) in [(0.5, 1.0), (2.0, 1.5), (3.0, 3.0)] {
            let v = clebsch_gordan(j1, j1, j2, j2, j1 + j2, j1 + j2).unwrap();
            assert!((v.value - 1.0).abs() < 1e-14);
        }
        let f = clebsch_gordan(1.0, 1.0, 1.0, 0.0, 1.0, 0.0).unwrap();
        assert!(!f.allowed && f.value == 0.0);
        let t = clebsch_gordan(1.0, 0.0, 1.0, 0.0, 3.0, 0.0).unwrap();
        assert!(!t.allowed);
        assert!(clebsch_gordan(1.0, 0.5, 1.0, 0.0, 1.0, 0.5).is_err());
        assert!(clebsch_gordan(0.3, 0.0, 1.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn spherical_harmonics_low_orders() {
        let (th, ph) = (0.8, 1.9);
        let y10 = spherical_harmonic(1, 0, th, ph);
        assert!((y10.re - (3.0 / (4.0 * PI)).sqrt() * th.cos()).abs() < 1e-15);
        let y11 = spherical_harmonic(1, 1, th, ph);
        let want = Complex64::from_polar(-(3.0 / (8.0 * PI)).sqrt() * th.sin(), ph);
        assert!((y11 - want).norm() < 1e-15);
        let y2m2 = spherical_harmonic(2, -2, th, ph);
        let want = Complex64::from_polar(0.25 * (15.0 / (2.0 * PI)).sqrt() * th.sin().powi(2), -2.0 * ph);
        assert!((y2m2 - want).norm() < 1e-15);
    }

    #[test]
    fn spin_half_spinors_match_explicit_forms() {
        let (th, ph) = (PI / 3.0, PI / 5.0);
        for tj in [1i64, 3, 5] {
            let j = tj as f64 / 2.0;
            for tk in (-tj..=tj).step_by(2) {
                let kappa = tk as f64 / 2.0;
                let ch = AngularChannel::new(SpinValue::new(1), j, kappa).unwrap();
                let lower = spherical_spinor(&ch, 0.5, th, ph).unwrap();
                let lo = (j - 0.5) as i64;
                let w0 = spherical_harmonic(lo, (kappa - 0.5).round() as i64, th, ph) * ((j + kappa) / (2.0 * j)).sqrt();
                let w1 = spherical_harmonic(lo, (kappa + 0.5).round() as i64, th, ph) * ((j - kappa) / (2.0 * j)).sqrt();
                assert!((lower[0] - w0).norm() < 1e-14 && (lower[1] - w1).norm() < 1e-14);
                let upper = spherical_spinor(&ch, -0.5, th, ph).unwrap();
                let hi = (j + 0.5) as i64;
                let u0 = spherical_harmonic(hi, (kappa - 0.5).round() as i64, th, ph) * -((j - kappa + 1.0) / (2.0 * j + 2.0)).sqrt();
                let u1 = spherical_harmonic(hi, (kappa + 0.5).round() as i64, th, ph) * ((j + kappa + 1.0) / (2.0 * j + 2.0)).sqrt();
                assert!((upper[0] - u0).norm() < 1e-14 && (upper[1] - u1).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn scalar_spinor_is_harmonic() {
        let ch = AngularChannel::new(SpinValue::new(0), 2.0, -1.0).unwrap();
        let v = spherical_spinor(&ch, 0.0, 0.4, 2.2).unwrap();
        assert_eq!(v.len(), 1);
        assert!((v[0] - spherical_harmonic(2, -1, 0.4, 2.2)).norm() < 1e-15);
    }

    #[test]
    fn gram_is_identity_spin1() {
        let ch = AngularChannel::new(SpinValue::new(2), 1.0, 0.0).unwrap();
        let g = gram_matrix(&ch, &SphereQuadrature::standard()).unwrap();
        assert!(cmax(&(g - CMatrix::identity(3, 3))) < 1e-10);
    }

    #[test]
    fn spin1_reduction_matches_printed_matrices() {
        for j in 1..6 {
            let jf = j as f64;
            let r = channel_reduction(SpinValue::new(2), jf, Normalization::Section).unwrap();
            let c = 1.0 / (2.0 * jf + 1.0).sqrt();
            let s1 = RMatrix::from_row_slice(
                3,
                3,
                &[0.0, -(jf + 1.0).sqrt() * c, 0.0, -(jf + 1.0).sqrt() * c, 0.0, -jf.sqrt() * c, 0.0, -jf.sqrt() * c, 0.0],
            );
            assert!(rmax(&(&r.s_dot_n - &s1)) < 1e-14, "j={j}");
            let l2 = RMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                jf * (jf - 1.0),
                jf * (jf + 1.0),
                (jf + 1.0) * (jf + 2.0),
            ]));
            assert!(rmax(&(&r.l2 - l2)) == 0.0);
            let mu = (jf * (jf + 1.0)).sqrt();
            let lt = RMatrix::from_row_slice(3, 3, &[jf, 0.0, -mu, 0.0, 0.0, 0.0, -mu, 0.0, jf + 1.0]) / (2.0 * jf + 1.0);
            assert!(rmax(&(&r.lambda - &lt)) < 1e-14);
            assert!(rmax(&(RMatrix::identity(3, 3) - &s1 * &s1 - lt)) < 1e-12);
        }
    }

    #[test]
    fn spin32_j_half_matches_two_channel_forms() {
        let r = channel_reduction(SpinValue::new(3), 0.5, Normalization::Section).unwrap();
        let s1 = RMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let s3 = RMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(rmax(&(&r.s_dot_n - &s1 * 0.5)) < 1e-14);
        assert!(rmax(&(&r.lambda - &s1 * 3.0)) < 1e-13);
        assert!(rmax(&(&r.l2 - (RMatrix::identity(2, 2) * 2.0 + &s3) * 2.0)) < 1e-14);
        assert!(rmax(&(&r.s_dot_j - (RMatrix::identity(2, 2) * 0.25 - &s3))) < 1e-14);
    }

    #[test]
    fn spin32_constants_from_quadrature() {
        let quad = SphereQuadrature::standard();
        for j in [1.5, 2.5, 3.5] {
            let c = derive_spin32_reduction_constants(j, &quad).unwrap();
            assert!((c.mu - (j * (j + 1.0)).sqrt()).abs() < 1e-10);
            assert!((c.delta - ((2.0 * j - 1.0) * (2.0 * j + 3.0)).sqrt()).abs() < 1e-10);
            let lam = channel_reduction(SpinValue::new(3), j, Normalization::Section).unwrap().lambda;
            assert!(rmax(&(lam - spin32_lambda_closed(j))) < 1e-12);
        }
        assert!((derive_spin32_reduction_constants(1.5, &quad).unwrap().a - 3f64.sqrt()).abs() < 1e-15);
        assert!(derive_spin32_reduction_constants(0.5, &quad).is_err());
    }

    #[test]
    fn spin_half_s_dot_n_constant() {
        for tj in [1, 3, 5, 7] {
            let x = reduce_s_dot_n(SpinValue::new(1), tj as f64 / 2.0).unwrap().matrix;
            assert!((x[(0, 1)].abs() - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn s_dot_j_scalar_case() {
        let (l2, sj) = reduce_l2_s_dot_j(SpinValue::new(0), 3.0).unwrap();
        assert_eq!(l2.matrix[(0, 0)], 12.0);
        assert_eq!(sj.matrix[(0, 0)], 0.0);
    }
}
