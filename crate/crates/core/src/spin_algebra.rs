//! Spin-s matrices, eigenprojectors of `S·n` and the interaction matrices `Λ̂`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

const UNIT_TOL: f64 = 1e-12;

/// Spin stored as `twice_s`, so `s = twice_s / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SpinValue {
    pub twice_s: u32,
}

impl SpinValue {
    pub const fn new(twice_s: u32) -> Self {
        SpinValue { twice_s }
    }

    pub fn s(self) -> f64 {
        self.twice_s as f64 / 2.0
    }

    pub fn dim(self) -> usize {
        self.twice_s as usize + 1
    }

    pub fn is_integer(self) -> bool {
        self.twice_s % 2 == 0
    }

    /// Eigenvalues of `S·n` in descending order `s, s-1, …, -s`.
    pub fn nus(self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.s() - i as f64).collect()
    }
}

impl std::fmt::Display for SpinValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.twice_s / 2)
        } else {
            write!(f, "{}/2", self.twice_s)
        }
    }
}

/// The three spin matrices in the basis `m = s, s-1, …, -s`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinRepresentation {
    pub s: SpinValue,
    pub mats: [CMatrix; 3],
}

impl SpinRepresentation {
    pub fn dim(&self) -> usize {
        self.s.dim()
    }

    /// `S·v` for an arbitrary real 3-vector.
    pub fn dot(&self, v: [f64; 3]) -> CMatrix {
        &self.mats[0] * Complex64::from(v[0])
            + &self.mats[1] * Complex64::from(v[1])
            + &self.mats[2] * Complex64::from(v[2])
    }

    pub fn identity(&self) -> CMatrix {
        CMatrix::identity(self.dim(), self.dim())
    }
}

/// Ladder-operator construction: `S3 = diag(m)`, `S± ` from `sqrt(s(s+1) - m(m±1))`,
/// `S1 = (S+ + S-)/2`, `S2 = (S+ - S-)/(2i)`.
pub fn build_spin_matrices(s: SpinValue) -> SpinRepresentation {
    let d = s.dim();
    let sf = s.s();
    let ms = s.nus();
    let mut sp = CMatrix::zeros(d, d);
    for i in 1..d {
        let m = ms[i];
        sp[(i - 1, i)] = Complex64::from((sf * (sf + 1.0) - m * (m + 1.0)).sqrt());
    }
    let sm = sp.adjoint();
    let s1 = (&sp + &sm) * Complex64::from(0.5);
    let s2 = (&sp - &sm) * Complex64::new(0.0, -0.5);
    let s3 = CMatrix::from_fn(d, d, |i, k| if i == k { Complex64::from(ms[i]) } else { Complex64::from(0.0) });
    SpinRepresentation { s, mats: [s1, s2, s3] }
}

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// A unit direction `n = x/|x|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction(pub [f64; 3]);

impl Direction {
    /// Accepts `n` only if it already has unit norm (within 1e-12).
    pub fn new(n: [f64; 3]) -> Result<Self> {
        let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::NonUnitDirection(norm));
        }
        Ok(Direction(n))
    }

    /// Normalizes a nonzero point.
    pub fn from_point(x: [f64; 3]) -> Result<Self> {
        let r = norm3(x);
        if r == 0.0 {
            return Err(Error::SingularPoint);
        }
        Ok(Direction([x[0] / r, x[1] / r, x[2] / r]))
    }
}

pub fn norm3(x: [f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// Eigenprojectors `Λ_ν` of `S·n`, stored for `ν = s, s-1, …, -s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorSet {
    pub n: Direction,
    pub s: SpinValue,
    pub nus: Vec<f64>,
    pub lambdas: Vec<CMatrix>,
}

impl ProjectorSet {
    /// `Λ_ν`, or `None` when `ν` is outside `-s..=s`.
    pub fn get(&self, nu: f64) -> Option<&CMatrix> {
        self.nus
            .iter()
            .position(|&v| (v - nu).abs() < 1e-9)
            .map(|i| &self.lambdas[i])
    }
}

/// Product formula `Λ_ν = Π_{ν'≠ν} (S·n - ν')/(ν - ν')`.
pub fn build_projectors(rep: &SpinRepresentation, n: &Direction) -> ProjectorSet {
    let sn = rep.dot(n.0);
    let nus = rep.s.nus();
    let id = rep.identity();
    let lambdas = nus
        .iter()
        .map(|&nu| {
            let mut acc = id.clone();
            for other in leja_order(nu, &nus) {
                acc = acc * ((&sn - &id * Complex64::from(other)) / Complex64::from(nu - other));
            }
            acc
        })
        .collect();
    ProjectorSet {
        n: *n,
        s: rep.s,
        nus,
        lambdas,
    }
}

/// The roots `nus \ {nu}` in Leja order about `nu`: each next root maximizes the product of
/// distances to `nu` and the roots already taken. Keeps the partial products bounded.
fn leja_order(nu: f64, nus: &[f64]) -> Vec<f64> {
    let mut rest: Vec<f64> = nus.iter().copied().filter(|&o| o != nu).collect();
    let mut taken = vec![nu];
    let mut out = Vec::with_capacity(rest.len());
    while !rest.is_empty() {
        let score = |x: f64| taken.iter().map(|t| (x - t).abs().ln()).sum::<f64>();
        let (idx, _) = rest
            .iter()
            .enumerate()
            .max_by(|a, b| score(*a.1).total_cmp(&score(*b.1)))
            .unwrap();
        let next = rest.swap_remove(idx);
        taken.push(next);
        out.push(next);
    }
    out
}

/// Residuals of the representation and projector invariants, each relative to the
/// norm of the reference matrix (or 1, whichever is larger).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlgebraResiduals {
    pub commutation: f64,
    pub casimir: f64,
    pub hermiticity: f64,
    pub idempotence: f64,
    pub completeness: f64,
    pub spectral: f64,
    pub projector_hermiticity: f64,
    pub trace: f64,
    /// `Λ̂·(S·n) - {0, I}` over `‖Λ̂‖ ‖S·n‖` (spectral norms).
    pub lambda_identity: f64,
}

impl AlgebraResiduals {
    pub fn max(&self) -> f64 {
        [
            self.commutation,
            self.casimir,
            self.hermiticity,
            self.idempotence,
            self.completeness,
            self.spectral,
            self.projector_hermiticity,
            self.trace,
            self.lambda_identity,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn rel(res: f64, scale: f64) -> f64 {
    res / scale.max(1.0)
}

/// Representation invariants that do not depend on a direction.
pub fn representation_residuals(rep: &SpinRepresentation) -> (f64, f64, f64) {
    let i = Complex64::i();
    let [s1, s2, s3] = &rep.mats;
    let scale = rep.s.s().max(1.0);
    let comm = [(s1, s2, s3), (s2, s3, s1), (s3, s1, s2)]
        .iter()
        .map(|(a, b, c)| max_abs(&((*a * *b - *b * *a) - *c * i)))
        .fold(0.0, f64::max);
    let sf = rep.s.s();
    let cas = max_abs(&(s1 * s1 + s2 * s2 + s3 * s3 - rep.identity() * Complex64::from(sf * (sf + 1.0))));
    let herm = rep.mats.iter().map(|m| max_abs(&(m - m.adjoint()))).fold(0.0, f64::max);
    (rel(comm, scale), rel(cas, scale * scale), rel(herm, scale))
}

/// All invariants for one direction.
pub fn algebra_residuals(rep: &SpinRepresentation, n: &Direction) -> Result<AlgebraResiduals> {
    let (commutation, casimir, hermiticity) = representation_residuals(rep);
    let p = build_projectors(rep, n);
    let id = rep.identity();
    let mut idempotence: f64 = 0.0;
    for (a, la) in p.lambdas.iter().enumerate() {
        for (b, lb) in p.lambdas.iter().enumerate() {
            let expect = if a == b { la.clone() } else { CMatrix::zeros(id.nrows(), id.ncols()) };
            idempotence = idempotence.max(max_abs(&(la * lb - expect)));
        }
    }
    let sum = p.lambdas.iter().fold(CMatrix::zeros(id.nrows(), id.ncols()), |acc, l| acc + l);
    let completeness = max_abs(&(sum - &id));
    let sn = rep.dot(n.0);
    let weighted = p
        .lambdas
        .iter()
        .zip(&p.nus)
        .fold(CMatrix::zeros(id.nrows(), id.ncols()), |acc, (l, nu)| acc + l * Complex64::from(*nu));
    let spectral = rel(max_abs(&(weighted - &sn)), rep.s.s());
    let projector_hermiticity = p.lambdas.iter().map(|l| max_abs(&(l - l.adjoint()))).fold(0.0, f64::max);
    let trace = p.lambdas.iter().map(|l| (l.trace() - Complex64::from(1.0)).norm()).fold(0.0, f64::max);
    let lam = interaction_matrix(rep, n, Normalization::Canonical)?;
    let target = if rep.s.is_integer() { CMatrix::zeros(id.nrows(), id.ncols()) } else { id.clone() };
    let lam_norm = rep
        .s
        .nus()
        .iter()
        .map(|&nu| lambda_eigenvalue(rep.s, nu, Normalization::Canonical).map(f64::abs))
        .try_fold(0.0, |m: f64, v| v.map(|v| m.max(v)))?;
    let lambda_identity = rel(max_abs(&(&lam.matrix * &sn - target)), lam_norm * rep.s.s());
    Ok(AlgebraResiduals {
        commutation,
        casimir,
        hermiticity,
        idempotence,
        completeness,
        spectral,
        projector_hermiticity,
        trace,
        lambda_identity,
    })
}

/// Coefficients `c_ν` of `V̂ = Σ (c_ν/x) Λ_ν`, keyed by `ν = s, …, -s`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialCoefficients {
    pub alpha: f64,
    pub nus: Vec<f64>,
    pub c: Vec<f64>,
}

impl PotentialCoefficients {
    pub fn get(&self, nu: f64) -> Option<f64> {
        self.nus.iter().position(|&v| (v - nu).abs() < 1e-9).map(|i| self.c[i])
    }

    /// Largest violation of `ν c_ν = (ν+1) c_{ν+1}`.
    pub fn recursion_residual(&self) -> f64 {
        self.nus
            .windows(2)
            .zip(self.c.windows(2))
            .map(|(nu, c)| (nu[1] * c[1] - nu[0] * c[0]).abs())
            .fold(0.0, f64::max)
    }
}

/// General solution of `ν c_ν = (ν+1) c_{ν+1}`: `c_0 = α` and zero elsewhere for integer
/// spin, `c_ν = α/ν` for half-integer spin.
pub fn solve_coefficient_recursion(s: SpinValue, alpha: f64) -> PotentialCoefficients {
    let nus = s.nus();
    let c = nus
        .iter()
        .map(|&nu| {
            if s.is_integer() {
                if nu == 0.0 {
                    alpha
                } else {
                    0.0
                }
            } else {
                alpha / nu
            }
        })
        .collect();
    PotentialCoefficients { alpha, nus, c }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// `Λ̂ = Λ_0` (integer s) or `Σ Λ_ν/ν` (half-integer s).
    Canonical,
    /// The closed forms used by the spectral formulas, `κ_s` times canonical.
    Section,
}

impl Normalization {
    pub fn tag(self) -> &'static str {
        match self {
            Normalization::Canonical => "canonical",
            Normalization::Section => "section",
        }
    }
}

/// Factor `κ_s` between section and canonical forms (defined for `s ≤ 3/2`).
pub fn section_factor(s: SpinValue) -> Result<f64> {
    match s.twice_s {
        0 | 2 => Ok(1.0),
        1 => Ok(0.5),
        3 => Ok(1.5),
        t => Err(Error::UnsupportedNormalization("section", t)),
    }
}

fn normalization_factor(s: SpinValue, norm: Normalization) -> Result<f64> {
    match norm {
        Normalization::Canonical => Ok(1.0),
        Normalization::Section => section_factor(s),
    }
}

/// Eigenvalue of `Λ̂` on the `ν` eigenspace of `S·n`.
pub fn lambda_eigenvalue(s: SpinValue, nu: f64, norm: Normalization) -> Result<f64> {
    let kappa = normalization_factor(s, norm)?;
    let canonical = if s.is_integer() {
        if nu == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 / nu
    };
    Ok(kappa * canonical)
}

/// Monomial coefficients `a_k` with `Λ̂ = Σ_k a_k (S·n)^k`, `k = 0..2s`.
pub fn lambda_polynomial(s: SpinValue, norm: Normalization) -> Result<Vec<f64>> {
    let values = s
        .nus()
        .iter()
        .map(|&nu| lambda_eigenvalue(s, nu, norm))
        .collect::<Result<Vec<_>>>()?;
    Ok(interpolating_polynomial(s, &values))
}

/// Monomial coefficients of the polynomial `p` with `p(ν) = values[i]` at the
/// eigenvalues `ν = s, s-1, …, -s` of `S·n`, so that `p(S·n) = Σ values[i] Λ_ν`.
pub fn interpolating_polynomial(s: SpinValue, values: &[f64]) -> Vec<f64> {
    let nus = s.nus();
    let mut total = vec![0.0; nus.len()];
    for (&nu, &f) in nus.iter().zip(values) {
        if f == 0.0 {
            continue;
        }
        let mut poly = vec![1.0];
        for &other in nus.iter().filter(|&&o| o != nu) {
            let d = nu - other;
            let mut next = vec![0.0; poly.len() + 1];
            for (k, c) in poly.iter().enumerate() {
                next[k + 1] += c / d;
                next[k] -= c * other / d;
            }
            poly = next;
        }
        for (t, c) in total.iter_mut().zip(poly) {
            *t += f * c;
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    pub s: SpinValue,
    pub n: Direction,
    pub matrix: CMatrix,
    pub normalization: Normalization,
}

/// `Λ̂(n)` assembled from the projectors.
pub fn interaction_matrix(rep: &SpinRepresentation, n: &Direction, norm: Normalization) -> Result<InteractionMatrix> {
    let p = build_projectors(rep, n);
    let d = rep.dim();
    let mut m = CMatrix::zeros(d, d);
    for (l, &nu) in p.lambdas.iter().zip(&p.nus) {
        let f = lambda_eigenvalue(rep.s, nu, norm)?;
        if f != 0.0 {
            m += l * Complex64::from(f);
        }
    }
    Ok(InteractionMatrix {
        s: rep.s,
        n: *n,
        matrix: m,
        normalization: norm,
    })
}

/// `V̂(x) = (α/x) Λ̂(n)`.
pub fn potential_matrix(rep: &SpinRepresentation, x: [f64; 3], alpha: f64, norm: Normalization) -> Result<CMatrix> {
    let n = Direction::from_point(x)?;
    let lam = interaction_matrix(rep, &n, norm)?;
    Ok(lam.matrix * Complex64::from(alpha / norm3(x)))
}

fn levi_civita(a: usize, b: usize, c: usize) -> f64 {
    match (a, b, c) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

fn projector_at(rep: &SpinRepresentation, x: [f64; 3], nu: f64) -> Result<CMatrix> {
    let n = Direction::from_point(x)?;
    let p = build_projectors(rep, &n);
    Ok(p.get(nu).cloned().unwrap_or_else(|| CMatrix::zeros(rep.dim(), rep.dim())))
}

/// Max-norm difference between a central-difference gradient of `Λ_ν` and the closed
/// gradient formula
/// `∇Λ_ν = (i/2x) n×S (2Λ_ν - Λ_{ν+1} - Λ_{ν-1}) - (1/2x)(S - n(S·n))(Λ_{ν+1} - Λ_{ν-1})`.
pub fn gradient_identity_residual(rep: &SpinRepresentation, nu: f64, x: [f64; 3], h: f64) -> Result<f64> {
    let r = norm3(x);
    if r == 0.0 {
        return Err(Error::SingularPoint);
    }
    let d = rep.dim();
    let n = Direction::from_point(x)?;
    let p = build_projectors(rep, &n);
    let zero = CMatrix::zeros(d, d);
    let lnu = p.get(nu).cloned().unwrap_or_else(|| zero.clone());
    let lup = p.get(nu + 1.0).cloned().unwrap_or_else(|| zero.clone());
    let ldn = p.get(nu - 1.0).cloned().unwrap_or_else(|| zero.clone());
    let sn = rep.dot(n.0);
    let i = Complex64::i();
    let mut worst: f64 = 0.0;
    for a in 0..3 {
        let at = |t: f64| {
            let mut y = x;
            y[a] += t;
            projector_at(rep, y, nu)
        };
        let fd = (at(-2.0 * h)? - at(-h)? * Complex64::from(8.0) + at(h)? * Complex64::from(8.0) - at(2.0 * h)?)
            / Complex64::from(12.0 * h);
        let mut nxs = zero.clone();
        for b in 0..3 {
            for c in 0..3 {
                let e = levi_civita(a, b, c);
                if e != 0.0 {
                    nxs += &rep.mats[c] * Complex64::from(e * n.0[b]);
                }
            }
        }
        let first = nxs * (&lnu * Complex64::from(2.0) - &lup - &ldn) * (i / (2.0 * r));
        let second = (&rep.mats[a] - &sn * Complex64::from(n.0[a])) * (&lup - &ldn) * Complex64::from(-1.0 / (2.0 * r));
        worst = worst.max(max_abs(&(fd - first - second)));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MultipoleForm {
    /// Spin 1: `Q̂_ab ∂F̂_a/∂x_b`.
    Quadrupole,
    /// Spin 3/2: `(2α/9) Q_abc ∂²F̃_a/∂x_b∂x_c`.
    Octupole,
}

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Quadrupole expression `Q̂_ab ∂_b F̂_a` with `Q̂_ab = (S_aS_b + S_bS_a - δ_ab)/2` and
/// field `F̂_a = α x_a/x`, so `∂_b F̂_a = α(δ_ab - n_a n_b)/x`.
pub fn quadrupole_potential(rep: &SpinRepresentation, x: [f64; 3], alpha: f64) -> CMatrix {
    let r = norm3(x);
    let n = [x[0] / r, x[1] / r, x[2] / r];
    let d = rep.dim();
    let mut v = CMatrix::zeros(d, d);
    for a in 0..3 {
        for b in 0..3 {
            let q = (&rep.mats[a] * &rep.mats[b] + &rep.mats[b] * &rep.mats[a] - rep.identity() * Complex64::from(delta(a, b)))
                * Complex64::from(0.5);
            let df = alpha * (delta(a, b) - n[a] * n[b]) / r;
            v += q * Complex64::from(df);
        }
    }
    v
}

/// Same potential written as traceless quadrupole plus Darwin term:
/// `½ Q_ab ∂_b F̂_a + (1/6) ∂_a F̂_a`, `Q_ab = S_aS_b + S_bS_a - (4/3)δ_ab`.
pub fn quadrupole_darwin_potential(rep: &SpinRepresentation, x: [f64; 3], alpha: f64) -> CMatrix {
    let r = norm3(x);
    let n = [x[0] / r, x[1] / r, x[2] / r];
    let d = rep.dim();
    let mut v = CMatrix::zeros(d, d);
    let mut div = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            let q = &rep.mats[a] * &rep.mats[b] + &rep.mats[b] * &rep.mats[a]
                - rep.identity() * Complex64::from(4.0 / 3.0 * delta(a, b));
            let df = alpha * (delta(a, b) - n[a] * n[b]) / r;
            v += q * Complex64::from(0.5 * df);
            if a == b {
                div += df;
            }
        }
    }
    v + rep.identity() * Complex64::from(div / 6.0)
}

/// Octupole tensor `Q_abc = Σ_P (S_aS_bS_c - (7/4) S_a δ_bc)` over permutations of `abc`.
pub fn octupole_tensor(rep: &SpinRepresentation, a: usize, b: usize, c: usize) -> CMatrix {
    let perms = [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]];
    let d = rep.dim();
    let mut q = CMatrix::zeros(d, d);
    for [p, u, w] in perms {
        q += &rep.mats[p] * &rep.mats[u] * &rep.mats[w] - &rep.mats[p] * Complex64::from(1.75 * delta(u, w));
    }
    q
}

/// `(2α/9) Q_abc ∂_b∂_c F̃_a` with `F̃_a = x_a ln x`.
pub fn octupole_potential(rep: &SpinRepresentation, x: [f64; 3], alpha: f64) -> CMatrix {
    let r = norm3(x);
    let n = [x[0] / r, x[1] / r, x[2] / r];
    let d = rep.dim();
    let mut v = CMatrix::zeros(d, d);
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                let d2 = (delta(a, c) * n[b] + delta(a, b) * n[c] + delta(b, c) * n[a] - 2.0 * n[a] * n[b] * n[c]) / r;
                if d2 != 0.0 {
                    v += octupole_tensor(rep, a, b, c) * Complex64::from(d2);
                }
            }
        }
    }
    v * Complex64::from(2.0 * alpha / 9.0)
}

fn require_spin(rep: &SpinRepresentation, what: &'static str, expected: u32) -> Result<()> {
    if rep.s.twice_s != expected {
        return Err(Error::WrongSpin {
            what,
            expected,
            got: rep.s.twice_s,
        });
    }
    Ok(())
}

/// Max-norm difference between `(α/x)Λ̂_section` and the multipole expression.
pub fn multipole_identity_residual(rep: &SpinRepresentation, x: [f64; 3], form: MultipoleForm, alpha: f64) -> Result<f64> {
    if norm3(x) == 0.0 {
        return Err(Error::SingularPoint);
    }
    let expr = match form {
        MultipoleForm::Quadrupole => {
            require_spin(rep, "quadrupole form", 2)?;
            quadrupole_potential(rep, x, alpha)
        }
        MultipoleForm::Octupole => {
            require_spin(rep, "octupole form", 3)?;
            octupole_potential(rep, x, alpha)
        }
    };
    let v = potential_matrix(rep, x, alpha, Normalization::Section)?;
    Ok(max_abs(&(v - expr)))
}

/// Nonlinear field forms with `F_a = x_a/x²`: `α(F² - (S·F)²)/|F|` for spin 1 and
/// `α(4/3)(5 S·F - 2(S·F)³/|F|²)` for spin 3/2, compared with `(α/x)Λ̂_section`.
pub fn nonlinear_field_residual(rep: &SpinRepresentation, x: [f64; 3], alpha: f64) -> Result<f64> {
    let r = norm3(x);
    if r == 0.0 {
        return Err(Error::SingularPoint);
    }
    let f = [x[0] / (r * r), x[1] / (r * r), x[2] / (r * r)];
    let f2 = f[0] * f[0] + f[1] * f[1] + f[2] * f[2];
    let sf = rep.dot(f);
    let expr = match rep.s.twice_s {
        2 => (rep.identity() * Complex64::from(f2) - &sf * &sf) * Complex64::from(alpha / f2.sqrt()),
        3 => (&sf * Complex64::from(5.0) - &sf * &sf * &sf * Complex64::from(2.0 / f2)) * Complex64::from(alpha * 4.0 / 3.0),
        t => {
            return Err(Error::WrongSpin {
                what: "nonlinear field form",
                expected: 2,
                got: t,
            })
        }
    };
    let v = potential_matrix(rep, x, alpha, Normalization::Section)?;
    Ok(max_abs(&(v - expr)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn spin_half_is_half_pauli() {
        let rep = build_spin_matrices(SpinValue::new(1));
        let s1 = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0.5, 0.), c(0.5, 0.), c(0., 0.)]);
        let s2 = CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -0.5), c(0., 0.5), c(0., 0.)]);
        let s3 = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.), c(0., 0.), c(0., 0.), c(-0.5, 0.)]);
        assert!(max_abs(&(&rep.mats[0] - s1)) < 1e-15);
        assert!(max_abs(&(&rep.mats[1] - s2)) < 1e-15);
        assert!(max_abs(&(&rep.mats[2] - s3)) < 1e-15);
    }

    #[test]
    fn spin_zero_is_trivial() {
        let rep = build_spin_matrices(SpinValue::new(0));
        assert!(rep.mats.iter().all(|m| m.nrows() == 1 && m[(0, 0)] == c(0.0, 0.0)));
    }

    #[test]
    fn spin_one_explicit() {
        let rep = build_spin_matrices(SpinValue::new(2));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s1 = CMatrix::from_row_slice(3, 3, &[c(0., 0.), c(h, 0.), c(0., 0.), c(h, 0.), c(0., 0.), c(h, 0.), c(0., 0.), c(h, 0.), c(0., 0.)]);
        let s2 = CMatrix::from_row_slice(
            3,
            3,
            &[c(0., 0.), c(0., -h), c(0., 0.), c(0., h), c(0., 0.), c(0., -h), c(0., 0.), c(0., h), c(0., 0.)],
        );
        assert!(max_abs(&(&rep.mats[0] - s1)) < 1e-15);
        assert!(max_abs(&(&rep.mats[1] - s2)) < 1e-15);
        let d: Vec<f64> = (0..3).map(|i| rep.mats[2][(i, i)].re).collect();
        assert_eq!(d, vec![1.0, 0.0, -1.0]);
        // The printed diag(1,0,1) would break [S1,S2] = iS3.
        let bad = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1., 0.), c(0., 0.), c(1., 0.)]));
        let comm = &rep.mats[0] * &rep.mats[1] - &rep.mats[1] * &rep.mats[0];
        assert!(max_abs(&(&comm - &bad * Complex64::i())) > 0.5);
    }

    #[test]
    fn projectors_along_z() {
        let rep = build_spin_matrices(SpinValue::new(1));
        let p = build_projectors(&rep, &Direction::new([0.0, 0.0, 1.0]).unwrap());
        assert_eq!(p.get(0.5).unwrap()[(0, 0)], c(1.0, 0.0));
        assert_eq!(p.get(-0.5).unwrap()[(1, 1)], c(1.0, 0.0));
        let rep1 = build_spin_matrices(SpinValue::new(2));
        let p1 = build_projectors(&rep1, &Direction::new([0.0, 0.0, 1.0]).unwrap());
        let l0 = p1.get(0.0).unwrap();
        for i in 0..3 {
            assert!((l0[(i, i)].re - if i == 1 { 1.0 } else { 0.0 }).abs() < 1e-15);
        }
    }

    #[test]
    fn non_unit_direction_rejected() {
        assert!(matches!(Direction::new([0.0, 0.0, 1.1]), Err(Error::NonUnitDirection(_))));
    }

    #[test]
    fn projectors_match_eigendecomposition() {
        // Oracle: numerical eigenvectors of σ-independent real form of S·n for n in the xz-plane.
        for twice_s in 1..=6 {
            let rep = build_spin_matrices(SpinValue::new(twice_s));
            let th: f64 = 0.7;
            let n = Direction::new([th.sin(), 0.0, th.cos()]).unwrap();
            let sn = rep.dot(n.0);
            let real = sn.map(|z| z.re);
            assert!(sn.iter().all(|z| z.im.abs() < 1e-15));
            let eig = SymmetricEigen::new(real);
            let p = build_projectors(&rep, &n);
            for (k, &val) in eig.eigenvalues.iter().enumerate() {
                let v = eig.eigenvectors.column(k);
                let proj = (&v * v.transpose()).map(Complex64::from);
                let ours = p.get(val.round_to_half()).unwrap();
                assert!(max_abs(&(ours - proj)) < 1e-11, "s={twice_s}/2 ν={val}");
            }
        }
    }

    trait RoundHalf {
        fn round_to_half(self) -> f64;
    }
    impl RoundHalf for f64 {
        fn round_to_half(self) -> f64 {
            (self * 2.0).round() / 2.0
        }
    }

    #[test]
    fn recursion_examples() {
        let c1 = solve_coefficient_recursion(SpinValue::new(2), 1.3);
        assert_eq!((c1.get(0.0), c1.get(1.0), c1.get(-1.0)), (Some(1.3), Some(0.0), Some(0.0)));
        let ch = solve_coefficient_recursion(SpinValue::new(1), 1.0);
        assert_eq!((ch.get(0.5), ch.get(-0.5)), (Some(2.0), Some(-2.0)));
        let c3 = solve_coefficient_recursion(SpinValue::new(3), 1.0);
        let want = [2.0 / 3.0, 2.0, -2.0, -2.0 / 3.0];
        for (got, want) in c3.c.iter().zip(want) {
            assert!((got - want).abs() < 1e-15);
        }
        for t in 0..=12 {
            assert!(solve_coefficient_recursion(SpinValue::new(t), 0.7).recursion_residual() < 1e-15);
        }
    }

    #[test]
    fn interaction_examples() {
        let rep1 = build_spin_matrices(SpinValue::new(2));
        let n = Direction::from_point([0.3, -0.4, 0.8]).unwrap();
        let lam = interaction_matrix(&rep1, &n, Normalization::Section).unwrap();
        let sn = rep1.dot(n.0);
        assert!(max_abs(&(&lam.matrix - (rep1.identity() - &sn * &sn))) < 1e-14);

        let rep32 = build_spin_matrices(SpinValue::new(3));
        let l32 = interaction_matrix(&rep32, &n, Normalization::Section).unwrap();
        let p = build_projectors(&rep32, &n);
        let on = |nu: f64| (p.get(nu).unwrap() * &l32.matrix).trace().re;
        assert!((on(1.5) - 1.0).abs() < 1e-13 && (on(0.5) - 3.0).abs() < 1e-13);
        let sn32 = rep32.dot(n.0);
        let closed = (&sn32 * Complex64::from(5.0) - &sn32 * &sn32 * &sn32 * Complex64::from(2.0)) * Complex64::from(4.0 / 3.0);
        assert!(max_abs(&(&l32.matrix - closed)) < 1e-13);

        let rh = build_spin_matrices(SpinValue::new(1));
        let lz = interaction_matrix(&rh, &Direction::new([0.0, 0.0, 1.0]).unwrap(), Normalization::Section).unwrap();
        assert!((lz.matrix[(0, 0)].re - 1.0).abs() < 1e-15 && (lz.matrix[(1, 1)].re + 1.0).abs() < 1e-15);
        assert!(matches!(
            section_factor(SpinValue::new(4)),
            Err(Error::UnsupportedNormalization(_, 4))
        ));
    }

    #[test]
    fn polynomial_matches_projectors() {
        for t in 0..=6 {
            let s = SpinValue::new(t);
            let rep = build_spin_matrices(s);
            let n = Direction::from_point([0.2, 0.9, -0.4]).unwrap();
            let sn = rep.dot(n.0);
            let coeffs = lambda_polynomial(s, Normalization::Canonical).unwrap();
            let mut acc = CMatrix::zeros(rep.dim(), rep.dim());
            let mut pow = rep.identity();
            for a in coeffs {
                acc += &pow * Complex64::from(a);
                pow = &pow * &sn;
            }
            let lam = interaction_matrix(&rep, &n, Normalization::Canonical).unwrap();
            assert!(max_abs(&(acc - lam.matrix)) < 1e-12, "twice_s={t}");
        }
    }

    #[test]
    fn gradient_examples() {
        let rep0 = build_spin_matrices(SpinValue::new(0));
        assert_eq!(gradient_identity_residual(&rep0, 0.0, [0.3, 0.2, 0.1], 1e-4).unwrap(), 0.0);
        let rep1 = build_spin_matrices(SpinValue::new(2));
        assert!(gradient_identity_residual(&rep1, 0.0, [0.0, 0.0, 1.3], 1e-4).unwrap() < 1e-7);
        assert!(matches!(
            gradient_identity_residual(&rep1, 0.0, [0.0; 3], 1e-4),
            Err(Error::SingularPoint)
        ));
    }

    #[test]
    fn multipole_examples() {
        let rep1 = build_spin_matrices(SpinValue::new(2));
        assert!(multipole_identity_residual(&rep1, [0.0, 0.0, 1.0], MultipoleForm::Quadrupole, 1.0).unwrap() < 1e-12);
        let x = [0.4, -1.1, 0.7];
        let two = max_abs(&(quadrupole_potential(&rep1, x, 0.8) - quadrupole_darwin_potential(&rep1, x, 0.8)));
        assert!(two < 1e-14);
        assert!(nonlinear_field_residual(&rep1, x, 0.8).unwrap() < 1e-13);
        let rep32 = build_spin_matrices(SpinValue::new(3));
        assert!(multipole_identity_residual(&rep32, x, MultipoleForm::Octupole, 1.0).unwrap() < 1e-12);
        assert!(nonlinear_field_residual(&rep32, x, 1.0).unwrap() < 1e-13);
        assert!(multipole_identity_residual(&rep32, x, MultipoleForm::Quadrupole, 1.0).is_err());
    }
}
