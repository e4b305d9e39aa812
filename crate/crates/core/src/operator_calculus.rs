//! Exactly differentiable spinor fields on ℝ³ \ {0} and the operators `p`, `L`, `S`,
//! `J`, `V̂`, `H`, `K̂` acting on them.
//!
//! A field is a finite sum of terms `c · x1^m1 x2^m2 x3^m3 · x^ρ · e^{-βx}` with spinor
//! coefficient `c`. Derivatives, multiplication by `x_a`, by powers of `x = |x|` and by
//! constant matrices all stay inside this family, and because `n_a = x_a/x` the
//! interaction matrix `Λ̂(n)` (a polynomial in `S·n`) does too. Terms are kept merged in a
//! canonical order with `m3 ≤ 1` (using `x3² = x² - x1² - x2²`), so fields that are equal
//! as functions have equal term lists up to rounding.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::parallel::{self, ExecMode};
use crate::spin_algebra::{
    build_spin_matrices, interpolating_polynomial, lambda_eigenvalue, norm3, section_factor, CMatrix,
    Normalization, PotentialCoefficients, SpinRepresentation, SpinValue,
};

/// Positive rational decay rate `β = num/den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Beta {
    num: u32,
    den: u32,
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Beta {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::InvalidParameter(format!("decay rate {num}/{den} must be positive")));
        }
        let g = gcd(num, den);
        Ok(Beta {
            num: num / g,
            den: den / g,
        })
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Structure of one term: monomial powers, `2ρ` and `β`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TermKey {
    pub m: [u16; 3],
    pub twice_rho: i32,
    pub beta: Beta,
}

/// A single scalar term attached to one spinor component, used to build fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisTerm {
    pub coeff: Complex64,
    pub m: [u16; 3],
    pub twice_rho: i32,
    pub beta: Beta,
    pub spinor_index: usize,
}

/// A spinor-valued field: canonical map from term structure to spinor coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    pub s: SpinValue,
    terms: BTreeMap<TermKey, Vec<Complex64>>,
}

impl SpinorField {
    pub fn zero(s: SpinValue) -> Self {
        SpinorField {
            s,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_terms(s: SpinValue, terms: &[BasisTerm]) -> Result<Self> {
        let mut f = SpinorField::zero(s);
        for t in terms {
            if t.spinor_index >= s.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "spinor index {} for spin {s}",
                    t.spinor_index
                )));
            }
            let mut v = vec![Complex64::new(0.0, 0.0); s.dim()];
            v[t.spinor_index] = t.coeff;
            f.insert(
                TermKey {
                    m: t.m,
                    twice_rho: t.twice_rho,
                    beta: t.beta,
                },
                &v,
            );
        }
        Ok(f)
    }

    /// `e^{-βx}` times the constant spinor `v`.
    pub fn exponential(s: SpinValue, beta: Beta, v: &[Complex64]) -> Self {
        let mut f = SpinorField::zero(s);
        f.insert(
            TermKey {
                m: [0, 0, 0],
                twice_rho: 0,
                beta,
            },
            v,
        );
        f
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &TermKey> {
        self.terms.keys()
    }

    fn insert(&mut self, key: TermKey, v: &[Complex64]) {
        if key.m[2] >= 2 {
            // x3² = x² - x1² - x2²
            let mut a = key;
            a.m[2] -= 2;
            a.twice_rho += 4;
            self.insert(a, v);
            let neg: Vec<Complex64> = v.iter().map(|z| -z).collect();
            for axis in 0..2 {
                let mut b = key;
                b.m[2] -= 2;
                b.m[axis] += 2;
                self.insert(b, &neg);
            }
            return;
        }
        let e = self
            .terms
            .entry(key)
            .or_insert_with(|| vec![Complex64::new(0.0, 0.0); v.len()]);
        for (a, b) in e.iter_mut().zip(v) {
            *a += b;
        }
    }

    fn map_terms<F>(&self, mut f: F) -> SpinorField
    where
        F: FnMut(&TermKey, &[Complex64], &mut SpinorField),
    {
        let mut out = SpinorField::zero(self.s);
        for (k, v) in &self.terms {
            f(k, v, &mut out);
        }
        out
    }

    pub fn add(&self, other: &SpinorField) -> SpinorField {
        let mut out = self.clone();
        for (k, v) in &other.terms {
            out.insert(*k, v);
        }
        out
    }

    pub fn sub(&self, other: &SpinorField) -> SpinorField {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> SpinorField {
        self.map_terms(|k, v, out| {
            let w: Vec<Complex64> = v.iter().map(|z| z * c).collect();
            out.insert(*k, &w);
        })
    }

    /// `∂/∂x_a`.
    pub fn deriv(&self, a: usize) -> SpinorField {
        self.map_terms(|k, v, out| {
            if k.m[a] > 0 {
                let mut t = *k;
                t.m[a] -= 1;
                let w: Vec<Complex64> = v.iter().map(|z| z * k.m[a] as f64).collect();
                out.insert(t, &w);
            }
            if k.twice_rho != 0 {
                let mut t = *k;
                t.m[a] += 1;
                t.twice_rho -= 4;
                let w: Vec<Complex64> = v.iter().map(|z| z * (k.twice_rho as f64 / 2.0)).collect();
                out.insert(t, &w);
            }
            let mut t = *k;
            t.m[a] += 1;
            t.twice_rho -= 2;
            let w: Vec<Complex64> = v.iter().map(|z| z * -k.beta.value()).collect();
            out.insert(t, &w);
        })
    }

    /// Multiplication by `x_a`.
    pub fn mul_coord(&self, a: usize) -> SpinorField {
        self.map_terms(|k, v, out| {
            let mut t = *k;
            t.m[a] += 1;
            out.insert(t, v);
        })
    }

    /// Multiplication by `x^{twice_rho/2}`.
    pub fn mul_radial(&self, twice_rho: i32) -> SpinorField {
        self.map_terms(|k, v, out| {
            let mut t = *k;
            t.twice_rho += twice_rho;
            out.insert(t, v);
        })
    }

    /// Multiplication by `n_a = x_a/x`.
    pub fn mul_n(&self, a: usize) -> SpinorField {
        self.mul_coord(a).mul_radial(-2)
    }

    /// Action of a constant matrix on the spinor index.
    pub fn mul_matrix(&self, m: &CMatrix) -> SpinorField {
        self.map_terms(|k, v, out| {
            let w: Vec<Complex64> = (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
                .collect();
            out.insert(*k, &w);
        })
    }

    /// Value at a point `x ≠ 0`.
    pub fn eval(&self, x: [f64; 3]) -> Vec<Complex64> {
        let r = norm3(x);
        let mut out = vec![Complex64::new(0.0, 0.0); self.s.dim()];
        for (k, v) in &self.terms {
            let w = x[0].powi(k.m[0] as i32)
                * x[1].powi(k.m[1] as i32)
                * x[2].powi(k.m[2] as i32)
                * r.powf(k.twice_rho as f64 / 2.0)
                * (-k.beta.value() * r).exp();
            for (o, c) in out.iter_mut().zip(v) {
                *o += c * w;
            }
        }
        out
    }

    /// True when every term satisfies the family invariants (`m3 ≤ 1`, `β > 0`).
    pub fn is_canonical(&self) -> bool {
        self.terms.keys().all(|k| k.m[2] <= 1 && k.beta.value() > 0.0)
            && self.terms.values().all(|v| v.len() == self.s.dim())
    }
}

fn vnorm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn vsub(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Operators acting on the field family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OperatorTag {
    H,
    J(usize),
    K(usize),
    L(usize),
    S(usize),
    P(usize),
    V,
    SDotN,
    JDotK,
    KDotJ,
    K2,
    J2,
    L2,
}

fn eps(a: usize, b: usize, c: usize) -> f64 {
    match (a, b, c) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// Spin, mass and potential shared by all operators. The potential is
/// `V̂ = (1/x) Σ_ν c_ν Λ_ν`, stored as the polynomial `Σ_k v_k (S·n)^k`.
#[derive(Debug, Clone)]
pub struct OperatorContext {
    pub rep: SpinRepresentation,
    pub alpha: f64,
    pub mass: f64,
    pub normalization: Option<Normalization>,
    v_poly: Vec<f64>,
    c_nu: Vec<f64>,
}

impl OperatorContext {
    /// `V̂ = (α/x) Λ̂` with the given normalization.
    pub fn new(s: SpinValue, alpha: f64, mass: f64, norm: Normalization) -> Result<Self> {
        let values = s
            .nus()
            .iter()
            .map(|&nu| lambda_eigenvalue(s, nu, norm).map(|v| alpha * v))
            .collect::<Result<Vec<_>>>()?;
        let mut ctx = Self::with_values(s, alpha, mass, &values)?;
        ctx.normalization = Some(norm);
        Ok(ctx)
    }

    /// `V̂ = (1/x) Σ c_ν Λ_ν` with arbitrary coefficients (used for negative controls).
    pub fn with_coefficients(s: SpinValue, coeffs: &PotentialCoefficients, mass: f64) -> Result<Self> {
        Self::with_values(s, coeffs.alpha, mass, &coeffs.c)
    }

    fn with_values(s: SpinValue, alpha: f64, mass: f64, values: &[f64]) -> Result<Self> {
        if values.len() != s.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for spin {s}",
                values.len()
            )));
        }
        if mass <= 0.0 {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
        }
        Ok(OperatorContext {
            rep: build_spin_matrices(s),
            alpha,
            mass,
            normalization: None,
            v_poly: interpolating_polynomial(s, values),
            c_nu: values.to_vec(),
        })
    }

    pub fn s(&self) -> SpinValue {
        self.rep.s
    }

    /// Coefficients `c_ν` for `ν = s, …, -s`.
    pub fn coefficients(&self) -> &[f64] {
        &self.c_nu
    }

    fn s_dot_n(&self, f: &SpinorField) -> SpinorField {
        (0..3).fold(SpinorField::zero(f.s), |acc, a| {
            acc.add(&f.mul_n(a).mul_matrix(&self.rep.mats[a]))
        })
    }

    fn potential(&self, f: &SpinorField) -> SpinorField {
        let mut acc = SpinorField::zero(f.s);
        let mut pow = f.clone();
        for (k, &c) in self.v_poly.iter().enumerate() {
            if k > 0 {
                pow = self.s_dot_n(&pow);
            }
            if c != 0.0 {
                acc = acc.add(&pow.scale(Complex64::from(c)));
            }
        }
        acc.mul_radial(-2)
    }

    fn p(&self, a: usize, f: &SpinorField) -> SpinorField {
        f.deriv(a).scale(Complex64::new(0.0, -1.0))
    }

    fn l(&self, a: usize, f: &SpinorField) -> SpinorField {
        let mut acc = SpinorField::zero(f.s);
        for b in 0..3 {
            for c in 0..3 {
                let e = eps(a, b, c);
                if e != 0.0 {
                    acc = acc.add(&self.p(c, f).mul_coord(b).scale(Complex64::from(e)));
                }
            }
        }
        acc
    }

    fn j(&self, a: usize, f: &SpinorField) -> SpinorField {
        self.l(a, f).add(&f.mul_matrix(&self.rep.mats[a]))
    }

    fn h(&self, f: &SpinorField) -> SpinorField {
        let lap = (0..3).fold(SpinorField::zero(f.s), |acc, a| acc.add(&f.deriv(a).deriv(a)));
        lap.scale(Complex64::from(-0.5 / self.mass)).add(&self.potential(f))
    }

    /// `K̂_a = (1/2m)(p×J - J×p)_a + x_a V̂`.
    fn k(&self, a: usize, f: &SpinorField) -> SpinorField {
        let mut acc = SpinorField::zero(f.s);
        for b in 0..3 {
            for c in 0..3 {
                let e = eps(a, b, c);
                if e != 0.0 {
                    let pj = self.p(b, &self.j(c, f));
                    let jp = self.j(b, &self.p(c, f));
                    acc = acc.add(&pj.sub(&jp).scale(Complex64::from(e / (2.0 * self.mass))));
                }
            }
        }
        acc.add(&self.potential(f).mul_coord(a))
    }

    fn check(&self, f: &SpinorField) -> Result<()> {
        if f.s != self.s() {
            return Err(Error::DimensionMismatch(format!(
                "field has spin {}, operators spin {}",
                f.s,
                self.s()
            )));
        }
        Ok(())
    }

    /// Exact image of `f` under `op` inside the field family.
    pub fn apply(&self, op: OperatorTag, f: &SpinorField) -> Result<SpinorField> {
        self.check(f)?;
        let axis = |a: usize| {
            if a < 3 {
                Ok(a)
            } else {
                Err(Error::InvalidParameter(format!("axis {a} out of range")))
            }
        };
        Ok(match op {
            OperatorTag::H => self.h(f),
            OperatorTag::J(a) => self.j(axis(a)?, f),
            OperatorTag::K(a) => self.k(axis(a)?, f),
            OperatorTag::L(a) => self.l(axis(a)?, f),
            OperatorTag::S(a) => f.mul_matrix(&self.rep.mats[axis(a)?]),
            OperatorTag::P(a) => self.p(axis(a)?, f),
            OperatorTag::V => self.potential(f),
            OperatorTag::SDotN => self.s_dot_n(f),
            OperatorTag::JDotK => (0..3).fold(SpinorField::zero(f.s), |acc, a| acc.add(&self.j(a, &self.k(a, f)))),
            OperatorTag::KDotJ => (0..3).fold(SpinorField::zero(f.s), |acc, a| acc.add(&self.k(a, &self.j(a, f)))),
            OperatorTag::K2 => (0..3).fold(SpinorField::zero(f.s), |acc, a| acc.add(&self.k(a, &self.k(a, f)))),
            OperatorTag::J2 => (0..3).fold(SpinorField::zero(f.s), |acc, a| acc.add(&self.j(a, &self.j(a, f)))),
            OperatorTag::L2 => (0..3).fold(SpinorField::zero(f.s), |acc, a| acc.add(&self.l(a, &self.l(a, f)))),
        })
    }

    /// `max(|f(x)|, |Hf(x)|, 1e-30)`.
    pub fn scale_at(&self, f: &SpinorField, hf: &SpinorField, x: [f64; 3]) -> f64 {
        vnorm(&f.eval(x)).max(vnorm(&hf.eval(x))).max(1e-30)
    }

    /// Max over points of `|g(x)| / scale(f, x)`.
    pub fn relative_max(&self, g: &SpinorField, f: &SpinorField, points: &[[f64; 3]]) -> Result<f64> {
        let hf = self.apply(OperatorTag::H, f)?;
        Ok(points
            .iter()
            .map(|&x| vnorm(&g.eval(x)) / self.scale_at(f, &hf, x))
            .fold(0.0, f64::max))
    }

    /// Right-hand side of `[A, B] f` from the so(4) commutation table.
    pub fn expected_commutator(&self, a: OperatorTag, b: OperatorTag, f: &SpinorField) -> Result<SpinorField> {
        use OperatorTag::*;
        let i = Complex64::i();
        let sum = |g: &dyn Fn(usize) -> Result<SpinorField>, x: usize, y: usize, coef: Complex64| -> Result<SpinorField> {
            let mut acc = SpinorField::zero(f.s);
            for c in 0..3 {
                let e = eps(x, y, c);
                if e != 0.0 {
                    acc = acc.add(&g(c)?.scale(coef * e));
                }
            }
            Ok(acc)
        };
        match (a, b) {
            (H, J(_)) | (J(_), H) | (H, K(_)) | (K(_), H) => Ok(SpinorField::zero(f.s)),
            (J(x), J(y)) => sum(&|c| self.apply(J(c), f), x, y, i),
            (L(x), L(y)) => sum(&|c| self.apply(L(c), f), x, y, i),
            (K(x), J(y)) | (J(x), K(y)) => sum(&|c| self.apply(K(c), f), x, y, i),
            (K(x), K(y)) => {
                let hf = self.apply(H, f)?;
                sum(&|c| self.apply(J(c), &hf), x, y, -2.0 * i / self.mass)
            }
            _ => Err(Error::InvalidParameter(format!("no commutation relation tabulated for {a:?}, {b:?}"))),
        }
    }

    /// Max over points of `|([A,B] - rhs) f(x)| / scale(f, x)`.
    pub fn commutator_residual(&self, a: OperatorTag, b: OperatorTag, f: &SpinorField, points: &[[f64; 3]]) -> Result<f64> {
        let ab = self.apply(a, &self.apply(b, f)?)?;
        let ba = self.apply(b, &self.apply(a, f)?)?;
        let rhs = self.expected_commutator(a, b, f)?;
        self.relative_max(&ab.sub(&ba).sub(&rhs), f, points)
    }

    /// Matrices `V̂(x)` and `∂_a V̂(x)`, the latter read off `[∂_a, V̂]` applied to
    /// `e^{-x} e_σ`.
    pub fn potential_and_gradient(&self, x: [f64; 3]) -> Result<(CMatrix, [CMatrix; 3])> {
        if norm3(x) == 0.0 {
            return Err(Error::SingularPoint);
        }
        let d = self.rep.dim();
        let beta = Beta::new(1, 1)?;
        let weight = (-norm3(x)).exp();
        let mut v = CMatrix::zeros(d, d);
        let mut grads = [CMatrix::zeros(d, d), CMatrix::zeros(d, d), CMatrix::zeros(d, d)];
        for sigma in 0..d {
            let mut e = vec![Complex64::new(0.0, 0.0); d];
            e[sigma] = Complex64::new(1.0, 0.0);
            let g = SpinorField::exponential(self.s(), beta, &e);
            let vg = self.potential(&g);
            for (row, z) in vg.eval(x).iter().enumerate() {
                v[(row, sigma)] = z / weight;
            }
            for (a, grad) in grads.iter_mut().enumerate() {
                let comm = vg.deriv(a).sub(&self.potential(&g.deriv(a)));
                for (row, z) in comm.eval(x).iter().enumerate() {
                    grad[(row, sigma)] = z / weight;
                }
            }
        }
        Ok((v, grads))
    }
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DeterminingEquation {
    /// `[V̂, J] = 0`
    Cond1,
    /// `x·∇V̂ + V̂ = 0`
    Cond2,
    /// `S×∇V̂ - ∇V̂×S = 0`
    Cond3,
}

/// Pointwise matrix-norm residual of a determining equation for the canonical potential.
pub fn determining_equation_residual(s: SpinValue, alpha: f64, which: DeterminingEquation, points: &[[f64; 3]]) -> Result<f64> {
    let ctx = OperatorContext::new(s, alpha, 1.0, Normalization::Canonical)?;
    determining_equation_residual_ctx(&ctx, which, points)
}

pub fn determining_equation_residual_ctx(ctx: &OperatorContext, which: DeterminingEquation, points: &[[f64; 3]]) -> Result<f64> {
    let rep = &ctx.rep;
    let i = Complex64::i();
    let mut worst: f64 = 0.0;
    for &x in points {
        let (v, g) = ctx.potential_and_gradient(x)?;
        let scale = max_abs(&v).max(1e-30);
        let res = match which {
            DeterminingEquation::Cond1 => {
                let mut m: f64 = 0.0;
                for a in 0..3 {
                    let mut c = &v * &rep.mats[a] - &rep.mats[a] * &v;
                    for b in 0..3 {
                        for cc in 0..3 {
                            let e = eps(a, b, cc);
                            if e != 0.0 {
                                c += &g[cc] * (i * e * x[b]);
                            }
                        }
                    }
                    m = m.max(max_abs(&c));
                }
                m
            }
            DeterminingEquation::Cond2 => {
                let e = &g[0] * Complex64::from(x[0]) + &g[1] * Complex64::from(x[1]) + &g[2] * Complex64::from(x[2]) + &v;
                max_abs(&e)
            }
            DeterminingEquation::Cond3 => {
                let mut m: f64 = 0.0;
                for a in 0..3 {
                    let mut c = CMatrix::zeros(rep.dim(), rep.dim());
                    for b in 0..3 {
                        for cc in 0..3 {
                            let e = eps(a, b, cc);
                            if e != 0.0 {
                                c += (&rep.mats[b] * &g[cc] - &g[b] * &rep.mats[cc]) * Complex64::from(e);
                            }
                        }
                    }
                    m = m.max(max_abs(&c));
                }
                m
            }
        };
        worst = worst.max(res / scale);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScalarIdentity {
    /// `J·K̂ = αs` (half-integer s) or `0` (integer s), for the section form.
    JDotK,
    /// Spin 0: `K² = α² + (L² + 1) 2H/m`.
    K2Hydrogen,
    /// Spin 1/2 with `V̂ = α σ·x/x²`: `K̂² = (2J² + 3/2) H/m + α²`.
    K2SpinHalf,
}

/// Normalization used by the scalar identities: the section form where it exists,
/// canonical otherwise.
pub fn identity_normalization(s: SpinValue) -> Normalization {
    if section_factor(s).is_ok() {
        Normalization::Section
    } else {
        Normalization::Canonical
    }
}

/// Value of `J·K̂` predicted for the context's potential: `α (S·n)Λ̂`, which is
/// `α κ` times the identity for half-integer spin and zero for integer spin.
pub fn expected_j_dot_k(ctx: &OperatorContext) -> Result<f64> {
    let s = ctx.s();
    if s.is_integer() {
        return Ok(0.0);
    }
    let norm = ctx
        .normalization
        .ok_or_else(|| Error::InvalidParameter("J·K̂ value needs a normalized potential".into()))?;
    Ok(ctx.alpha * s.s() * lambda_eigenvalue(s, s.s(), norm)?)
}

pub fn scalar_identity_residual(
    s: SpinValue,
    alpha: f64,
    mass: f64,
    which: ScalarIdentity,
    f: &SpinorField,
    points: &[[f64; 3]],
) -> Result<f64> {
    let ctx = OperatorContext::new(s, alpha, mass, identity_normalization(s))?;
    match which {
        ScalarIdentity::JDotK => {
            let jk = ctx.apply(OperatorTag::JDotK, f)?;
            let c = expected_j_dot_k(&ctx)?;
            ctx.relative_max(&jk.sub(&f.scale(Complex64::from(c))), f, points)
        }
        ScalarIdentity::K2Hydrogen => {
            if s.twice_s != 0 {
                return Err(Error::WrongSpin {
                    what: "hydrogen K² identity",
                    expected: 0,
                    got: s.twice_s,
                });
            }
            let k2 = ctx.apply(OperatorTag::K2, f)?;
            let hf = ctx.apply(OperatorTag::H, f)?;
            let rhs = ctx
                .apply(OperatorTag::L2, &hf)?
                .add(&hf)
                .scale(Complex64::from(2.0 / mass))
                .add(&f.scale(Complex64::from(alpha * alpha)));
            ctx.relative_max(&k2.sub(&rhs), f, points)
        }
        ScalarIdentity::K2SpinHalf => {
            if s.twice_s != 1 {
                return Err(Error::WrongSpin {
                    what: "spin-1/2 K̂² identity",
                    expected: 1,
                    got: s.twice_s,
                });
            }
            let k2 = ctx.apply(OperatorTag::K2, f)?;
            let hf = ctx.apply(OperatorTag::H, f)?;
            let rhs = ctx
                .apply(OperatorTag::J2, &hf)?
                .scale(Complex64::from(2.0))
                .add(&hf.scale(Complex64::from(1.5)))
                .scale(Complex64::from(1.0 / mass))
                .add(&f.scale(Complex64::from(alpha * alpha)));
            ctx.relative_max(&k2.sub(&rhs), f, points)
        }
    }
}

/// Residuals of the Casimir relations for `ν = sqrt(-m/2E)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CasimirResidual {
    /// `C_± = 4g²` or `4q²` built from `g, q = (J ± νK̂)/2` against
    /// `J² + ν²K̂² ± 2ν J·K̂`.
    pub construction: f64,
    /// `C_+ - C_- - 4ν (J·K̂ value)`: zero for integer spin, `4ναs`-shifted for half-integer.
    pub difference: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CasimirSign {
    Plus,
    Minus,
}

/// `C_± f` computed as `Σ_a (J_a ± νK̂_a)² f`.
pub fn casimir_apply(ctx: &OperatorContext, nu: f64, sign: CasimirSign, f: &SpinorField) -> Result<SpinorField> {
    let sg = match sign {
        CasimirSign::Plus => 1.0,
        CasimirSign::Minus => -1.0,
    };
    let half = |a: usize, g: &SpinorField| -> Result<SpinorField> {
        Ok(ctx
            .apply(OperatorTag::J(a), g)?
            .add(&ctx.apply(OperatorTag::K(a), g)?.scale(Complex64::from(sg * nu))))
    };
    let mut acc = SpinorField::zero(f.s);
    for a in 0..3 {
        acc = acc.add(&half(a, &half(a, f)?)?);
    }
    Ok(acc)
}

pub fn casimir_residual(
    s: SpinValue,
    alpha: f64,
    mass: f64,
    energy: f64,
    sign: CasimirSign,
    f: &SpinorField,
    points: &[[f64; 3]],
) -> Result<CasimirResidual> {
    if energy >= 0.0 {
        return Err(Error::InvalidParameter(format!("Casimir relations need E < 0, got {energy}")));
    }
    let ctx = OperatorContext::new(s, alpha, mass, identity_normalization(s))?;
    let nu = (-mass / (2.0 * energy)).sqrt();
    let sg = match sign {
        CasimirSign::Plus => 1.0,
        CasimirSign::Minus => -1.0,
    };
    let c = casimir_apply(&ctx, nu, sign, f)?;
    let j2 = ctx.apply(OperatorTag::J2, f)?;
    let k2 = ctx.apply(OperatorTag::K2, f)?;
    let jk = ctx.apply(OperatorTag::JDotK, f)?;
    let built = j2
        .add(&k2.scale(Complex64::from(nu * nu)))
        .add(&jk.scale(Complex64::from(2.0 * sg * nu)));
    let construction = ctx.relative_max(&c.sub(&built), f, points)?;
    let cp = casimir_apply(&ctx, nu, CasimirSign::Plus, f)?;
    let cm = casimir_apply(&ctx, nu, CasimirSign::Minus, f)?;
    let shift = 4.0 * nu * expected_j_dot_k(&ctx)?;
    let difference = ctx.relative_max(&cp.sub(&cm).sub(&f.scale(Complex64::from(shift))), f, points)?;
    Ok(CasimirResidual { construction, difference })
}

/// Points drawn uniformly (in volume) from the shell `0.3 ≤ |x| ≤ 3`.
pub fn sample_points(count: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (r0, r1) = (0.3f64, 3.0f64);
    (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            let r = (r0.powi(3) + u * (r1.powi(3) - r0.powi(3))).cbrt();
            let z: f64 = rng.random_range(-1.0..1.0);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let st = (1.0 - z * z).sqrt();
            [r * st * phi.cos(), r * st * phi.sin(), r * z]
        })
        .collect()
}

/// Random decaying field: a few terms with low monomial degree, `ρ ∈ {-1, 0, 1}` and
/// `β` from a fixed rational set in `[1/4, 4]`.
pub fn random_field(s: SpinValue, terms: usize, rng: &mut ChaCha8Rng) -> SpinorField {
    const BETAS: [(u32, u32); 6] = [(1, 4), (1, 2), (3, 4), (1, 1), (3, 2), (2, 1)];
    let mut out = SpinorField::zero(s);
    for _ in 0..terms {
        let (bn, bd) = BETAS[rng.random_range(0..BETAS.len())];
        let key = TermKey {
            m: [rng.random_range(0..3), rng.random_range(0..3), rng.random_range(0..2)],
            twice_rho: 2 * rng.random_range(-1..=1),
            beta: Beta::new(bn, bd).expect("nonzero"),
        };
        let v: Vec<Complex64> = (0..s.dim())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        out.insert(key, &v);
    }
    out
}

pub fn random_fields(s: SpinValue, count: usize, seed: u64) -> Vec<SpinorField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_field(s, 3, &mut rng)).collect()
}

/// The commutator pairs checked by the symmetry suite: `[H, J_a]`, `[H, K̂_a]`, and the
/// full `J`/`K̂` table.
pub fn symmetry_pairs() -> Vec<(OperatorTag, OperatorTag)> {
    use OperatorTag::*;
    let mut pairs = Vec::new();
    for a in 0..3 {
        pairs.push((H, J(a)));
        pairs.push((H, K(a)));
    }
    for a in 0..3 {
        for b in 0..3 {
            if a != b {
                pairs.push((J(a), J(b)));
                pairs.push((K(a), K(b)));
            }
            pairs.push((K(a), J(b)));
        }
    }
    pairs
}

/// Worst commutator residual over fields, points and pairs.
pub fn symmetry_sweep(
    ctx: &OperatorContext,
    fields: &[SpinorField],
    points: &[[f64; 3]],
    pairs: &[(OperatorTag, OperatorTag)],
    mode: ExecMode,
) -> Result<f64> {
    let per_field = parallel::map(mode, fields, |f| -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &(a, b) in pairs {
            worst = worst.max(ctx.commutator_residual(a, b, f, points)?);
        }
        Ok(worst)
    });
    per_field
        .into_iter()
        .try_fold(0.0f64, |acc, r| r.map(|v| acc.max(if v.is_nan() { f64::INFINITY } else { v })))
}

/// Pointwise difference of two fields, relative to the first field's scale.
pub fn field_distance(a: &SpinorField, b: &SpinorField, points: &[[f64; 3]]) -> f64 {
    points
        .iter()
        .map(|&x| {
            let va = a.eval(x);
            vnorm(&vsub(&va, &b.eval(x))) / vnorm(&va).max(1e-30)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(s: SpinValue) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); s.dim()];
        v[0] = Complex64::new(1.0, 0.0);
        v
    }

    #[test]
    fn momentum_of_exponential() {
        let s = SpinValue::new(0);
        let f = SpinorField::exponential(s, Beta::new(1, 1).unwrap(), &one(s));
        let ctx = OperatorContext::new(s, 1.0, 1.0, Normalization::Canonical).unwrap();
        let pf = ctx.apply(OperatorTag::P(2), &f).unwrap();
        let x = [0.3, -0.5, 0.8];
        let r = norm3(x);
        let want = Complex64::new(0.0, 1.0) * (x[2] / r) * (-r).exp();
        assert!((pf.eval(x)[0] - want).norm() < 1e-15);
    }

    #[test]
    fn l3_rotates() {
        let s = SpinValue::new(0);
        let beta = Beta::new(1, 1).unwrap();
        let f = SpinorField::from_terms(
            s,
            &[BasisTerm {
                coeff: Complex64::new(1.0, 0.0),
                m: [1, 0, 0],
                twice_rho: 0,
                beta,
                spinor_index: 0,
            }],
        )
        .unwrap();
        let ctx = OperatorContext::new(s, 1.0, 1.0, Normalization::Canonical).unwrap();
        let lf = ctx.apply(OperatorTag::L(2), &f).unwrap();
        let x = [0.7, 0.2, -0.4];
        let want = Complex64::new(0.0, 1.0) * x[1] * (-norm3(x)).exp();
        assert!((lf.eval(x)[0] - want).norm() < 1e-15);
    }

    #[test]
    fn hydrogen_ground_state() {
        // Attractive Coulomb potential -1/x is α = -1 in V̂ = (α/x)Λ̂.
        let s = SpinValue::new(0);
        let f = SpinorField::exponential(s, Beta::new(1, 1).unwrap(), &one(s));
        let ctx = OperatorContext::new(s, -1.0, 1.0, Normalization::Canonical).unwrap();
        let hf = ctx.apply(OperatorTag::H, &f).unwrap();
        let d = hf.sub(&f.scale(Complex64::from(-0.5)));
        for x in sample_points(10, 3) {
            assert!(vnorm(&d.eval(x)) < 1e-14);
        }
    }

    #[test]
    fn canonical_merging() {
        let s = SpinValue::new(1);
        let beta = Beta::new(1, 2).unwrap();
        let f = SpinorField::from_terms(
            s,
            &[BasisTerm {
                coeff: Complex64::new(1.0, 0.0),
                m: [0, 0, 4],
                twice_rho: 0,
                beta,
                spinor_index: 1,
            }],
        )
        .unwrap();
        assert!(f.is_canonical());
        let x: [f64; 3] = [0.4, 0.9, -1.3];
        let direct = x[2].powi(4) * (-0.5 * norm3(x)).exp();
        assert!((f.eval(x)[1].re - direct).abs() < 1e-13);
        let z = f.sub(&f);
        assert!(z.eval(x).iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn rotation_algebra() {
        let s = SpinValue::new(2);
        let ctx = OperatorContext::new(s, 1.0, 1.0, Normalization::Canonical).unwrap();
        let f = &random_fields(s, 1, 11)[0];
        let pts = sample_points(20, 5);
        let r = ctx.commutator_residual(OperatorTag::J(0), OperatorTag::J(1), f, &pts).unwrap();
        assert!(r < 1e-12, "{r}");
    }

    #[test]
    fn k_commutes_with_h_spin1() {
        let s = SpinValue::new(2);
        let ctx = OperatorContext::new(s, 1.0, 1.0, Normalization::Canonical).unwrap();
        let f = &random_fields(s, 1, 12)[0];
        let pts = sample_points(20, 6);
        let r = ctx.commutator_residual(OperatorTag::K(0), OperatorTag::H, f, &pts).unwrap();
        assert!(r < 1e-9, "{r}");
    }

    #[test]
    fn broken_coefficients_break_symmetry() {
        let s = SpinValue::new(1);
        let coeffs = PotentialCoefficients {
            alpha: 1.0,
            nus: s.nus(),
            c: vec![2.0, 2.0],
        };
        let ctx = OperatorContext::with_coefficients(s, &coeffs, 1.0).unwrap();
        let f = &random_fields(s, 1, 13)[0];
        let pts = sample_points(20, 7);
        let r = ctx.commutator_residual(OperatorTag::K(2), OperatorTag::H, f, &pts).unwrap();
        assert!(r > 1e-2, "{r}");
    }

    #[test]
    fn determining_equations_small_spins() {
        let pts = sample_points(10, 8);
        for which in [DeterminingEquation::Cond1, DeterminingEquation::Cond2, DeterminingEquation::Cond3] {
            assert_eq!(determining_equation_residual(SpinValue::new(0), 1.0, which, &pts).unwrap() < 1e-15, true);
        }
        assert!(determining_equation_residual(SpinValue::new(4), 1.0, DeterminingEquation::Cond2, &pts).unwrap() < 1e-10);
        assert!(determining_equation_residual(SpinValue::new(5), 1.0, DeterminingEquation::Cond3, &pts).unwrap() < 1e-10);
    }

    #[test]
    fn scalar_identities() {
        let pts = sample_points(10, 9);
        let f1 = &random_fields(SpinValue::new(2), 1, 14)[0];
        assert!(scalar_identity_residual(SpinValue::new(2), 1.0, 1.0, ScalarIdentity::JDotK, f1, &pts).unwrap() < 1e-10);
        let f0 = &random_fields(SpinValue::new(0), 1, 15)[0];
        assert!(scalar_identity_residual(SpinValue::new(0), 0.7, 1.3, ScalarIdentity::K2Hydrogen, f0, &pts).unwrap() < 1e-10);
        let fh = &random_fields(SpinValue::new(1), 1, 16)[0];
        assert!(scalar_identity_residual(SpinValue::new(1), 0.7, 1.3, ScalarIdentity::K2SpinHalf, fh, &pts).unwrap() < 1e-10);
        assert!(scalar_identity_residual(SpinValue::new(1), 0.7, 1.3, ScalarIdentity::K2Hydrogen, fh, &pts).is_err());
    }

    #[test]
    fn casimir_on_hydrogen_ground_state() {
        let s = SpinValue::new(0);
        let f = SpinorField::exponential(s, Beta::new(1, 1).unwrap(), &one(s));
        let ctx = OperatorContext::new(s, -1.0, 1.0, Normalization::Canonical).unwrap();
        let c = casimir_apply(&ctx, 1.0, CasimirSign::Plus, &f).unwrap();
        // q = g = 0 on the ground state
        for x in sample_points(10, 10) {
            assert!(vnorm(&c.eval(x)) < 1e-13 * vnorm(&f.eval(x)).max(1.0));
        }
    }

    #[test]
    fn wrong_dimension_rejected() {
        let ctx = OperatorContext::new(SpinValue::new(1), 1.0, 1.0, Normalization::Canonical).unwrap();
        let f = &random_fields(SpinValue::new(2), 1, 1)[0];
        assert!(matches!(ctx.apply(OperatorTag::H, f), Err(Error::DimensionMismatch(_))));
    }
}
