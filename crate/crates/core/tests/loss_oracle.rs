mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use deim_core::losses::{evaluate, focal_loss, mal, varifocal_loss, LossParams, LossVariant};

#[test]
fn default_parameters_match_the_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..2000 {
        let p: f64 = rng.gen_range(1e-4..1.0 - 1e-4);
        let q: f64 = rng.gen_range(0.0..=1.0);
        let fl = LossParams::focal();
        let vfl = LossParams::varifocal();
        let m = LossParams::mal();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1e-300);
        assert!(close(
            focal_loss(p, true, &fl).unwrap().value,
            common::focal(p, 1, 0.25, 2.0)
        ));
        assert!(close(
            focal_loss(p, false, &fl).unwrap().value,
            common::focal(p, 0, 0.25, 2.0)
        ));
        assert!(close(
            varifocal_loss(p, q, &vfl).unwrap().value,
            common::varifocal(p, q, 0.75, 2.0)
        ));
        assert!(close(
            varifocal_loss(p, 0.0, &vfl).unwrap().value,
            common::varifocal(p, 0.0, 0.75, 2.0)
        ));
        assert!(close(
            mal(p, q, true, &m).unwrap().value,
            common::matchability(p, q, 1, 1.5)
        ));
        assert!(close(
            mal(p, 0.0, false, &m).unwrap().value,
            common::matchability(p, 0.0, 0, 1.5)
        ));
    }
}

#[test]
fn single_precision_tracks_double() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for i in 0..500 {
        let variant = [LossVariant::Focal, LossVariant::Varifocal, LossVariant::Mal][i % 3];
        let p: f64 = rng.gen_range(0.05..0.95);
        let q: f64 = rng.gen_range(0.05..1.0);
        let positive = rng.gen_bool(0.5);
        let want = evaluate(p, q, positive, &LossParams::<f64>::default_for(variant)).unwrap();
        let got = evaluate(p as f32, q as f32, positive, &LossParams::<f32>::default_for(variant)).unwrap();
        assert!((got.value as f64 - want.value).abs() <= 1e-4 * want.value.abs().max(1e-3));
        assert!((got.dvalue_dp as f64 - want.dvalue_dp).abs() <= 1e-3 * want.dvalue_dp.abs().max(1e-2));
    }
}

#[test]
fn derivatives_match_finite_differences_near_the_ends() {
    for variant in [LossVariant::Focal, LossVariant::Varifocal, LossVariant::Mal] {
        let params = LossParams::<f64>::default_for(variant);
        for &p in &[1e-3, 0.005, 0.995, 0.999] {
            for &(q, positive) in &[(0.3, true), (0.9, true), (0.0, false)] {
                let f = |x: f64| evaluate(x, q, positive, &params).unwrap().value;
                let numeric = common::central_difference(f, p, 1e-8);
                let analytic = evaluate(p, q, positive, &params).unwrap().dvalue_dp;
                assert!(common::rel_err(analytic, numeric, 1e-6) < 1e-5, "{variant} p {p} q {q}");
            }
        }
    }
}

#[test]
fn out_of_range_inputs_are_rejected() {
    let m = LossParams::mal();
    assert!(mal(1.2, 0.5, true, &m).is_err());
    assert!(mal(0.5, -0.1, true, &m).is_err());
    assert!(mal(0.5, 0.5, false, &m).is_err());
    assert!(evaluate(f64::NAN, 0.5, true, &m).is_err());
    // the clamp keeps the endpoints finite
    assert!(mal(0.0, 0.5, true, &m).unwrap().value.is_finite());
    assert!(mal(1.0, 0.0, false, &m).unwrap().value.is_finite());
}
