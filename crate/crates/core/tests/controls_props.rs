use std::sync::Arc;

use proptest::prelude::*;

use lieflow::algebra::{GroupDescriptor, Mat, NormKind};
use lieflow::controls::{concat, lp_seminorm, pullback_affine, step_approximate, subdivide, Control, Exponent, PClass, SampledControl, StepControl};

fn step_from(g: &Arc<GroupDescriptor>, cuts: &[f64], coords: &[f64]) -> Control {
    let mut bps: Vec<f64> = cuts.to_vec();
    bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bps.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    bps.insert(0, 0.0);
    bps.push(1.0);
    let k = g.algebra_dim();
    let values: Vec<Mat> = (0..bps.len() - 1)
        .map(|j| g.from_coordinates(&coords[j * k..(j + 1) * k]).unwrap())
        .collect();
    Control::Step(StepControl::new(g, bps, values).unwrap())
}

fn gl2() -> Arc<GroupDescriptor> {
    GroupDescriptor::gl(2)
}

fn cuts() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..0.99, 1..5)
}

fn vals() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 24)
}

const NORMS: [NormKind; 3] = [NormKind::Op, NormKind::Frobenius, NormKind::Max];
const EXPONENTS: [Exponent; 3] = [Exponent::One, Exponent::Two, Exponent::Inf];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn seminorms_are_subadditive_and_homogeneous(c1 in cuts(), v1 in vals(), c2 in cuts(), v2 in vals(), s in -3.0f64..3.0) {
        let g = gl2();
        let (a, b) = (step_from(&g, &c1, &v1), step_from(&g, &c2, &v2));
        let sum = a.add(&b).unwrap();
        for p in EXPONENTS {
            for q in NORMS {
                let (na, nb) = (lp_seminorm(&a, p, q), lp_seminorm(&b, p, q));
                prop_assert!(lp_seminorm(&sum, p, q) <= na + nb + 1e-12);
                prop_assert!((lp_seminorm(&a.scale(s), p, q) - s.abs() * na).abs() <= 1e-12 * (1.0 + na));
            }
        }
    }

    #[test]
    fn subdivision_scales_norms(c in cuts(), v in vals(), e in 1u32..5) {
        let g = gl2();
        let gamma = step_from(&g, &c, &v);
        let n = 1usize << e;
        let pieces = subdivide(&gamma, n).unwrap();
        let linf = lp_seminorm(&gamma, Exponent::Inf, NormKind::Op);
        let l1 = lp_seminorm(&gamma, Exponent::One, NormKind::Op);
        let m = pieces.iter().map(|p| lp_seminorm(p, Exponent::Inf, NormKind::Op)).fold(0.0, f64::max);
        prop_assert_eq!(m, linf / n as f64);
        let s: f64 = pieces.iter().map(|p| lp_seminorm(p, Exponent::One, NormKind::Op)).sum();
        prop_assert!((s - l1).abs() < 1e-12);
    }

    #[test]
    fn concat_of_pullbacks_restores_control(c in cuts(), v in vals(), a in 0.1f64..0.45, b in 0.55f64..0.9) {
        let g = gl2();
        let gamma = step_from(&g, &c, &v);
        let part = [0.0, a, b, 1.0];
        let pieces: Vec<Control> = part.windows(2).map(|w| pullback_affine(&gamma, w[0], w[1]).unwrap()).collect();
        let back = concat(&pieces, &part).unwrap();
        prop_assert!(back.l1_distance(&gamma, NormKind::Max).unwrap() < 1e-12);
    }
}

#[test]
fn integral_is_additive_over_windows() {
    let g = GroupDescriptor::sl(2);
    let s = SampledControl::from_fn(&g, 64, PClass::L1, |t| g.from_coordinates(&[t, 1.0 - t, (3.0 * t).sin()]).unwrap()).unwrap();
    let gamma = Control::Sampled(s);
    let whole = gamma.integral_to(1.0);
    let split = gamma.integral_to(0.37) + gamma.integral_between(0.37, 1.0);
    assert!((whole - split).amax() < 1e-14);
}

#[test]
fn step_approximation_converges_at_first_order_in_l1() {
    let g = GroupDescriptor::sl(2);
    let s = SampledControl::from_fn(&g, 2048, PClass::Regulated, |t| {
        g.from_coordinates(&[(6.0 * t).sin(), 0.0, (6.0 * t).cos()]).unwrap()
    })
    .unwrap();
    let gamma = Control::Sampled(s.clone());
    let d = |m: usize| Control::Step(step_approximate(&s, m).unwrap()).l1_distance(&gamma, NormKind::Frobenius).unwrap();
    let ratio = d(32) / d(64);
    assert!((ratio - 2.0).abs() < 0.2, "{ratio}");
}
