//! Hypergeometric series: Kummer `M`, Gauss `2F1` on the negative real axis and
//! generalized `pFq`, plus the closed-form spin-1 radial eigenfunctions built on them.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::composite_gauss_legendre;

const SERIES_TOL: f64 = 1e-15;
const MAX_TERMS: usize = 100_000;

/// Parameters of a generalized hypergeometric series `pFq(num; den; z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HypergeometricSpec {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
    pub z: f64,
}

/// Neumaier (improved Kahan) compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct NeumaierC {
    re: Neumaier,
    im: Neumaier,
}

impl NeumaierC {
    fn add(&mut self, v: Complex64) {
        self.re.add(v.re);
        self.im.add(v.im);
    }
    fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// Returns `Some(n)` when `a` is the non-positive integer `-n`.
pub fn nonpositive_integer(a: f64) -> Option<u64> {
    if a <= 0.0 && a == a.round() && a > -1e15 {
        Some((-a) as u64)
    } else {
        None
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function on the real line (Lanczos with reflection). Poles return infinity.
pub fn gamma(x: f64) -> f64 {
    if nonpositive_integer(x).is_some() {
        return f64::INFINITY;
    }
    if x < 0.5 {
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x));
    }
    if x == x.round() && x < 171.0 {
        return (1..x as u64).fold(1.0, |acc, k| acc * k as f64);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// `1/Γ(x)`, zero at the poles.
pub fn rgamma(x: f64) -> f64 {
    if nonpositive_integer(x).is_some() {
        0.0
    } else {
        1.0 / gamma(x)
    }
}

fn check_denominators(den: &[f64], terms: Option<u64>) -> Result<()> {
    for &b in den {
        if let Some(nb) = nonpositive_integer(b) {
            match terms {
                Some(n) if n < nb + 1 => {}
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "denominator parameter {b} hits a pole before the series terminates"
                    )))
                }
            }
        }
    }
    Ok(())
}

/// Generalized hypergeometric series with real parameters and argument.
///
/// A non-positive integer numerator parameter makes the series a polynomial, which is
/// summed exactly term by term. Otherwise the series is summed until the relative term
/// size drops below 1e-15 for several consecutive terms.
pub fn pfq(spec: &HypergeometricSpec) -> Result<f64> {
    let HypergeometricSpec { num, den, z } = spec;
    let z = *z;
    let terms = num.iter().filter_map(|&a| nonpositive_integer(a)).min();
    check_denominators(den, terms)?;
    if terms.is_none() && num.len() > den.len() + 1 && z != 0.0 {
        return Err(Error::NonConvergent(format!(
            "{}F{} diverges for z != 0",
            num.len(),
            den.len()
        )));
    }
    if terms.is_none() && num.len() == den.len() + 1 && z.abs() >= 1.0 {
        return Err(Error::NonConvergent(format!(
            "{}F{} requires |z| < 1, got {z}",
            num.len(),
            den.len()
        )));
    }
    let mut acc = Neumaier::default();
    let mut term = 1.0;
    acc.add(term);
    let limit = terms.map(|n| n as usize).unwrap_or(MAX_TERMS);
    let mut small = 0;
    for n in 0..limit {
        let nf = n as f64;
        let mut ratio = z / (nf + 1.0);
        for a in num {
            ratio *= a + nf;
        }
        for b in den {
            ratio /= b + nf;
        }
        term *= ratio;
        acc.add(term);
        if terms.is_none() {
            if term.abs() <= SERIES_TOL * acc.value().abs() || term == 0.0 {
                small += 1;
                if small >= 3 {
                    return Ok(acc.value());
                }
            } else {
                small = 0;
            }
        }
    }
    if terms.is_some() {
        Ok(acc.value())
    } else {
        Err(Error::NonConvergent(format!(
            "pFq did not converge in {MAX_TERMS} terms at z = {z}"
        )))
    }
}

/// Generalized hypergeometric series with complex parameters; returns the sum and the
/// number of terms used.
pub fn pfq_complex(num: &[Complex64], den: &[Complex64], z: Complex64) -> Result<(Complex64, usize)> {
    if num.len() > den.len() + 1 && z.norm() != 0.0 {
        return Err(Error::NonConvergent("pFq with p > q+1 diverges".into()));
    }
    if num.len() == den.len() + 1 && z.norm() >= 1.0 {
        return Err(Error::NonConvergent("pFq with p = q+1 requires |z| < 1".into()));
    }
    for b in den {
        if b.im == 0.0 && nonpositive_integer(b.re).is_some() {
            return Err(Error::InvalidParameter(format!("denominator pole at {b}")));
        }
    }
    let mut acc = NeumaierC::default();
    let mut term = Complex64::new(1.0, 0.0);
    acc.add(term);
    let mut small = 0;
    for n in 0..MAX_TERMS {
        let nf = n as f64;
        let mut ratio = z / (nf + 1.0);
        for a in num {
            ratio *= a + nf;
        }
        for b in den {
            ratio /= b + nf;
        }
        term *= ratio;
        acc.add(term);
        if term.norm() <= SERIES_TOL * acc.value().norm() || term.norm() == 0.0 {
            small += 1;
            if small >= 3 {
                return Ok((acc.value(), n + 2));
            }
        } else {
            small = 0;
        }
    }
    Err(Error::NonConvergent("complex pFq did not converge".into()))
}

/// Kummer's confluent hypergeometric function `M(a, b, z) = 1F1(a; b; z)`.
pub fn kummer_m(a: f64, b: f64, z: f64) -> Result<f64> {
    let terminating = nonpositive_integer(a);
    if terminating.is_none() && nonpositive_integer(b).is_some() {
        return Err(Error::InvalidParameter(format!("M({a}, {b}, z): b is a pole")));
    }
    if terminating.is_none() && z < 0.0 {
        // Kummer transformation avoids the alternating series for negative z.
        let m = pfq(&HypergeometricSpec {
            num: vec![b - a],
            den: vec![b],
            z: -z,
        })?;
        return Ok(z.exp() * m);
    }
    pfq(&HypergeometricSpec {
        num: vec![a],
        den: vec![b],
        z,
    })
}

/// Gauss hypergeometric function `2F1(a, b; c; z)` for real `z <= 0`.
///
/// Terminating series are Pfaff-transformed around the terminating parameter and summed
/// as a polynomial in `z/(z-1)`. Otherwise `-1 <= z <= 0` uses the Pfaff transformation
/// and the series in `w = z/(z-1)` in `[0, 1/2]`; `z < -1` uses the connection formula to
/// `1/z` with each resulting function Pfaff-transformed again.
pub fn gauss_2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if z > 0.0 {
        return Err(Error::InvalidParameter(format!("2F1 is only provided for z <= 0, got {z}")));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    let ta = nonpositive_integer(a);
    let tb = nonpositive_integer(b);
    if ta.is_some() || tb.is_some() {
        let (t, other) = match (ta, tb) {
            (Some(na), Some(nb)) if nb < na => (b, a),
            (Some(_), _) => (a, b),
            _ => (b, a),
        };
        return pfaff(t, other, c, z);
    }
    if nonpositive_integer(c).is_some() {
        return Err(Error::InvalidParameter(format!("2F1: c = {c} is a pole")));
    }
    if z >= -1.0 {
        return pfaff(a, b, c, z);
    }
    let diff = b - a;
    if (diff - diff.round()).abs() < 1e-12 {
        // Degenerate connection formula; the Pfaff series still converges, slowly.
        return pfaff(a, b, c, z);
    }
    let u = 1.0 / z;
    let mz = -z;
    let c1 = gamma(c) * gamma(b - a) * rgamma(b) * rgamma(c - a);
    let c2 = gamma(c) * gamma(a - b) * rgamma(a) * rgamma(c - b);
    let mut acc = Neumaier::default();
    if c1 != 0.0 {
        acc.add(c1 * mz.powf(-a) * pfaff(a, a - c + 1.0, a - b + 1.0, u)?);
    }
    if c2 != 0.0 {
        acc.add(c2 * mz.powf(-b) * pfaff(b, b - c + 1.0, b - a + 1.0, u)?);
    }
    Ok(acc.value())
}

/// `F(a,b;c;z) = (1-z)^(-a) F(a, c-b; c; z/(z-1))` summed directly.
fn pfaff(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let w = z / (z - 1.0);
    let s = pfq(&HypergeometricSpec {
        num: vec![a, c - b],
        den: vec![c],
        z: w,
    })?;
    Ok((1.0 - z).powf(-a) * s)
}

/// Unnormalized spin-1 radial profiles in the rescaled variable `r` for `k = j+1+n`:
/// returns `(Φ_-, Φ_+)` for the channels with orbital momentum `j-1` and `j+1`.
pub fn spin1_profiles(j: u32, n: u32, r: f64) -> Result<(f64, f64)> {
    spin1_profiles_k(j, j as f64 + 1.0 + n as f64, r)
}

/// Spin-1 profiles for an arbitrary spectral parameter `k`. Off the quantized values
/// `k = j+1+n` the Kummer functions do not terminate and the profiles grow like `e^r`.
pub fn spin1_profiles_k(j: u32, k: f64, r: f64) -> Result<(f64, f64)> {
    if j == 0 {
        return Err(Error::InvalidParameter("spin-1 closed forms need j >= 1".into()));
    }
    let jf = j as f64;
    let mu = (jf * (jf + 1.0)).sqrt();
    let a = jf + 1.0 - k;
    let pref = r.powi(j as i32) * (-r).exp();
    let m0 = kummer_m(a, 2.0 * jf + 2.0, 2.0 * r)?;
    let m1 = if a == 0.0 {
        0.0
    } else {
        kummer_m(a + 1.0, 2.0 * jf + 3.0, 2.0 * r)?
    };
    let tm = pref * m0;
    let tp = -(pref / mu) * ((jf + (k - 1.0) * r) * m0 + (a / (jf + 1.0)) * r * m1);
    let norm = (2.0 * jf + 1.0).sqrt();
    let minus = ((jf + 1.0).sqrt() * tm - jf.sqrt() * tp) / norm;
    let plus = (jf.sqrt() * tm + (jf + 1.0).sqrt() * tp) / norm;
    Ok((minus, plus))
}

/// Upper integration limit used to normalize the spin-1 profiles.
pub fn spin1_cutoff(j: u32, n: u32) -> f64 {
    40.0 + 4.0 * (j + n) as f64
}

/// Normalization constant making `∫ (Φ_-² + Φ_+²) dr = 1` over `[0, ∞)`, using a
/// 1024-point composite Gauss-Legendre rule (64 panels of 16 nodes) on `[0, r_cut]`.
pub fn spin1_norm(j: u32, n: u32) -> Result<f64> {
    let (xs, ws) = composite_gauss_legendre(0.0, spin1_cutoff(j, n), 64, 16);
    let mut acc = Neumaier::default();
    for (x, w) in xs.iter().zip(&ws) {
        let (a, b) = spin1_profiles(j, n, *x)?;
        acc.add(w * (a * a + b * b));
    }
    Ok(1.0 / acc.value().sqrt())
}

/// Normalized spin-1 eigenfunction channels `(ψ_{j,κ,-1}, ψ_{j,κ,0}, ψ_{j,κ,+1})` at the
/// rescaled radius `r`, ordered by orbital momentum `j-1, j, j+1`. The middle channel is
/// identically zero.
pub fn spin1_eigenfunction(j: u32, n: u32, r: f64) -> Result<[f64; 3]> {
    let c = spin1_norm(j, n)?;
    let (a, b) = spin1_profiles(j, n, r)?;
    Ok([c * a, 0.0, c * b])
}

/// Evaluates normalized spin-1 eigenfunctions on many radii with one normalization.
pub fn spin1_eigenfunction_grid(j: u32, n: u32, rs: &[f64]) -> Result<Vec<[f64; 3]>> {
    let c = spin1_norm(j, n)?;
    rs.iter()
        .map(|&r| spin1_profiles(j, n, r).map(|(a, b)| [c * a, 0.0, c * b]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn kummer_trivial_cases() {
        assert_eq!(kummer_m(0.0, 3.5, 7.0).unwrap(), 1.0);
        for z in [-3.0, 0.2, 5.0] {
            assert!(close(kummer_m(-1.0, 2.0, z).unwrap(), 1.0 - z / 2.0, 1e-15));
        }
    }

    #[test]
    fn kummer_terminating_matches_factorial_sum() {
        // M(-2, 4, 2) = 1 + (-2)(2)/(4) + (-2)(-1)(4)/(4*5*2)
        let direct = 1.0 - 2.0 * 2.0 / 4.0 + (2.0 * 4.0) / (4.0 * 5.0 * 2.0);
        assert!(close(kummer_m(-2.0, 4.0, 2.0).unwrap(), direct, 1e-15));
    }

    #[test]
    fn kummer_exponential() {
        for z in [-20.0, -1.0, 0.5, 10.0] {
            assert!(close(kummer_m(1.3, 1.3, z).unwrap(), f64::exp(z), 1e-13));
        }
    }

    #[test]
    fn gamma_values() {
        assert!(close(gamma(0.5), std::f64::consts::PI.sqrt(), 1e-14));
        assert!(close(gamma(5.0), 24.0, 1e-15));
        assert!(close(gamma(-0.5), -2.0 * std::f64::consts::PI.sqrt(), 1e-14));
        assert!(close(gamma(10.3), 716_430.689_062_376_5, 1e-13));
        assert_eq!(rgamma(-3.0), 0.0);
    }

    #[test]
    fn gauss_reductions() {
        for z in [-0.3, -1.0, -7.5, -250.0] {
            let lhs = gauss_2f1(0.7, 1.9, 1.9, z).unwrap();
            assert!(close(lhs, (1.0 - z).powf(-0.7), 1e-12), "z={z}: {lhs}");
            let lin = gauss_2f1(-1.0, 2.5, 3.5, z).unwrap();
            assert!(close(lin, 1.0 - 2.5 * z / 3.5, 1e-13));
        }
    }

    #[test]
    fn gauss_arctan() {
        // F(1/2, 1; 3/2; -x²) = atan(x)/x
        for x in [0.3f64, 1.0, 2.0, 30.0] {
            let f = gauss_2f1(0.5, 1.0, 1.5, -x * x).unwrap();
            assert!(close(f, x.atan() / x, 1e-13), "x={x}: {f}");
        }
    }

    #[test]
    fn gauss_rejects_positive_z() {
        assert!(gauss_2f1(1.0, 1.0, 2.0, 0.5).is_err());
    }

    #[test]
    fn pfq_exponential() {
        let e = pfq(&HypergeometricSpec {
            num: vec![],
            den: vec![],
            z: 1.0,
        })
        .unwrap();
        assert!(close(e, std::f64::consts::E, 1e-15));
    }

    #[test]
    fn pfq_divergent_rejected() {
        let r = pfq(&HypergeometricSpec {
            num: vec![1.0, 1.0, 1.0],
            den: vec![2.0],
            z: 0.1,
        });
        assert!(matches!(r, Err(Error::NonConvergent(_))));
    }

    #[test]
    fn complex_matches_real() {
        let (c, _) = pfq_complex(
            &[Complex64::new(0.3, 0.0)],
            &[Complex64::new(1.7, 0.0), Complex64::new(2.2, 0.0)],
            Complex64::new(-3.0, 0.0),
        )
        .unwrap();
        let r = pfq(&HypergeometricSpec {
            num: vec![0.3],
            den: vec![1.7, 2.2],
            z: -3.0,
        })
        .unwrap();
        assert!(close(c.re, r, 1e-14) && c.im == 0.0);
    }

    #[test]
    fn spin1_ground_profiles() {
        // j=1, n=0: Φ- ∝ -(√2/2) r (r+3) e^{-r}, Φ+ ∝ r² e^{-r} with a common factor.
        let (a, b) = spin1_profiles(1, 0, 0.7).unwrap();
        let r: f64 = 0.7;
        let ea = -(2f64.sqrt() / 2.0) * r * (r + 3.0) * (-r).exp();
        let eb = r * r * (-r).exp();
        assert!(close(a / b, ea / eb, 1e-14));
    }

    #[test]
    fn spin1_middle_channel_zero_and_normalized() {
        let (xs, ws) = composite_gauss_legendre(0.0, spin1_cutoff(2, 1), 64, 16);
        let psi = spin1_eigenfunction_grid(2, 1, &xs).unwrap();
        let norm: f64 = psi.iter().zip(&ws).map(|(p, w)| w * (p[0] * p[0] + p[2] * p[2])).sum();
        assert!(close(norm, 1.0, 1e-13));
        assert!(psi.iter().all(|p| p[1] == 0.0));
    }
}
