use lrl_core::operator_calculus::*;
use lrl_core::parallel::ExecMode;
use lrl_core::spin_algebra::{Normalization, PotentialCoefficients};
use lrl_core::SpinValue;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn field_strategy(twice_s: u32) -> impl Strategy<Value = SpinorField> {
    any::<u64>().prop_map(move |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_field(SpinValue::new(twice_s), 3, &mut rng)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn linearity(f in field_strategy(2), g in field_strategy(2), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let ctx = OperatorContext::new(SpinValue::new(2), 0.8, 1.1, Normalization::Section).unwrap();
        let pts = sample_points(8, 1);
        let (ca, cb) = (Complex64::from(a), Complex64::from(b));
        for op in [OperatorTag::H, OperatorTag::K(1), OperatorTag::J(2), OperatorTag::V, OperatorTag::SDotN] {
            let lhs = ctx.apply(op, &f.scale(ca).add(&g.scale(cb))).unwrap();
            let rhs = ctx.apply(op, &f).unwrap().scale(ca).add(&ctx.apply(op, &g).unwrap().scale(cb));
            prop_assert!(ctx.relative_max(&lhs.sub(&rhs), &f.add(&g), &pts).unwrap() < 1e-12);
        }
    }

    #[test]
    fn closure_is_structural(f in field_strategy(3)) {
        let ctx = OperatorContext::new(SpinValue::new(3), 1.0, 1.0, Normalization::Section).unwrap();
        for op in [OperatorTag::H, OperatorTag::K(0), OperatorTag::K2, OperatorTag::JDotK, OperatorTag::L2] {
            let g = ctx.apply(op, &f).unwrap();
            prop_assert!(g.is_canonical());
        }
    }

    #[test]
    fn derivative_matches_finite_difference(f in field_strategy(1), axis in 0usize..3) {
        let x = [0.9, -0.6, 1.2];
        let h = 1e-5;
        let mut xp = x;
        let mut xm = x;
        xp[axis] += h;
        xm[axis] -= h;
        let fd: Vec<Complex64> = f.eval(xp).iter().zip(f.eval(xm)).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let exact = f.deriv(axis).eval(x);
        let scale = exact.iter().map(|z| z.norm()).fold(1.0, f64::max);
        for (a, b) in fd.iter().zip(&exact) {
            prop_assert!((a - b).norm() < 1e-7 * scale);
        }
    }
}

#[test]
fn symmetry_holds_for_small_spins() {
    let pts = sample_points(6, 21);
    for twice_s in 0..=5 {
        let s = SpinValue::new(twice_s);
        let ctx = OperatorContext::new(s, 1.0, 1.0, identity_normalization(s)).unwrap();
        let fields = random_fields(s, 2, 100 + twice_s as u64);
        let r = symmetry_sweep(&ctx, &fields, &pts, &symmetry_pairs(), ExecMode::Parallel).unwrap();
        assert!(r < 1e-9, "twice_s={twice_s}: {r}");
    }
}

#[test]
fn perturbed_coefficient_breaks_k_conservation() {
    let s = SpinValue::new(3);
    let ctx = OperatorContext::new(s, 1.0, 1.0, Normalization::Section).unwrap();
    let pts = sample_points(10, 22);
    let f = &random_fields(s, 1, 23)[0];
    for idx in 0..s.dim() {
        let mut c = ctx.coefficients().to_vec();
        c[idx] *= 1.01;
        let broken = OperatorContext::with_coefficients(s, &PotentialCoefficients { alpha: 1.0, nus: s.nus(), c }, 1.0).unwrap();
        let r = broken.commutator_residual(OperatorTag::K(0), OperatorTag::H, f, &pts).unwrap();
        assert!(r > 1e-3, "index {idx}: {r}");
    }
}

#[test]
fn parallel_and_sequential_sweeps_agree() {
    let s = SpinValue::new(1);
    let ctx = OperatorContext::new(s, 1.0, 1.0, Normalization::Section).unwrap();
    let fields = random_fields(s, 4, 5);
    let pts = sample_points(5, 6);
    let pairs = symmetry_pairs();
    let a = symmetry_sweep(&ctx, &fields, &pts, &pairs, ExecMode::Parallel).unwrap();
    let b = symmetry_sweep(&ctx, &fields, &pts, &pairs, ExecMode::Sequential).unwrap();
    assert_eq!(a, b);
}
