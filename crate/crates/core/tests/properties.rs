use nalgebra::{UnitQuaternion, Vector3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rescan_core::alpha_distributions::FailureDistribution;
use rescan_core::cost_model::{
    breakeven_precision, cost_ratio_at, cost_recursion_rhs, new_cost_at, original_cost_at,
    CostRates, FailureRate, PredictorProfile,
};
use rescan_core::kinematics::{
    apply_move, geodesic_angle, guidance_offset, GuidanceNoise, LearnerPolicy, ProbePose,
    SubjectAnatomy,
};
use rescan_core::predictor::{false_positive_rate, ConfusionPredictor};
use rescan_core::quadrature::QuadratureSpec;

/// `(α, p, r)` with `p > α·r`.
fn convergent() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.0..0.99f64, 0.01..=1.0f64, 0.0..=1.0f64).prop_filter("p > αr", |(a, p, r)| p - a * r > 1e-6)
}

fn rates() -> impl Strategy<Value = (f64, f64)> {
    (0.0..5.0f64, 0.01..100.0f64)
}

fn pose() -> impl Strategy<Value = ProbePose> {
    (
        prop::array::uniform3(-50.0..50.0f64),
        prop::array::uniform3(-3.0..3.0f64),
    )
        .prop_map(|(t, r)| {
            ProbePose::new(
                Vector3::from(t),
                UnitQuaternion::from_scaled_axis(Vector3::from(r)),
            )
        })
}

proptest! {
    #[test]
    fn closed_form_is_the_recursion_fixed_point(((a, p, r), (cs, cc)) in (convergent(), rates())) {
        let alpha = FailureRate::new(a).unwrap();
        let prof = PredictorProfile::new(p, r).unwrap();
        let rates = CostRates::new(cs, cc).unwrap();
        let c = new_cost_at(alpha, &prof, &rates).unwrap();
        let rhs = cost_recursion_rhs(c, alpha, &prof, &rates);
        // conditioning of the recursion grows like 1 / (1 − αr/p)
        let slack = 1e-12 * p / (p - a * r);
        prop_assert!((rhs - c).abs() <= slack * c.abs().max(f64::MIN_POSITIVE), "{} vs {}", rhs, c);
    }

    #[test]
    fn ratio_below_one_iff_precision_beats_breakeven((a, p, r) in convergent(), q in 0.0..2.0f64) {
        prop_assume!(a > 0.0 && r > 0.0);
        let alpha = FailureRate::new(a).unwrap();
        let h = cost_ratio_at(alpha, &PredictorProfile::new(p, r).unwrap(), q).unwrap();
        let b = breakeven_precision(alpha, q).unwrap();
        prop_assert_eq!(h.ratio < 1.0, p > b.bound);
        prop_assert_eq!(h.ratio > 1.0, p < b.bound);
        prop_assert!((h.reduction - (1.0 - h.ratio)).abs() < 1e-15);
    }

    #[test]
    fn ratio_increases_with_failure_rate((a, p, r) in convergent(), da in 0.0..0.5f64, q in 0.0..1.0f64) {
        let b = a + da;
        prop_assume!(a > 0.0 && b < 1.0 && p > b * r);
        let prof = PredictorProfile::new(p, r).unwrap();
        let lo = cost_ratio_at(FailureRate::new(a).unwrap(), &prof, q).unwrap().ratio;
        let hi = cost_ratio_at(FailureRate::new(b).unwrap(), &prof, q).unwrap().ratio;
        prop_assert!(hi >= lo * (1.0 - 1e-14));
    }

    #[test]
    fn costs_scale_with_units((a, p, r) in convergent(), (cs, cc) in rates(), k in 0.01..100.0f64) {
        let alpha = FailureRate::new(a).unwrap();
        let prof = PredictorProfile::new(p, r).unwrap();
        let base = new_cost_at(alpha, &prof, &CostRates::new(cs, cc).unwrap()).unwrap();
        let scaled = new_cost_at(alpha, &prof, &CostRates::new(k * cs, k * cc).unwrap()).unwrap();
        prop_assert!((scaled - k * base).abs() <= 1e-12 * (k * base).abs().max(1e-300));
        let orig = original_cost_at(alpha, &CostRates::new(k * cs, k * cc).unwrap());
        prop_assert!((orig - k * a * cc).abs() <= 1e-12 * orig.max(1e-300));
    }

    #[test]
    fn degenerate_profiles(a in 0.001..0.99f64, p in 0.01..=1.0f64, (cs, cc) in rates()) {
        let alpha = FailureRate::new(a).unwrap();
        let never = PredictorProfile::new(p, 0.0).unwrap();
        prop_assert_eq!(cost_ratio_at(alpha, &never, cs / cc).unwrap().ratio, 1.0);
        let perfect = PredictorProfile::new(1.0, 1.0).unwrap();
        let c = new_cost_at(alpha, &perfect, &CostRates::new(cs, cc).unwrap()).unwrap();
        let want = a * cs / (1.0 - a);
        prop_assert!((c - want).abs() <= 1e-12 * want.max(1e-300));
    }

    #[test]
    fn calibrated_false_positive_rate_reproduces_precision((a, p, r) in convergent()) {
        prop_assume!(a > 0.0 && r > 0.0);
        let alpha = FailureRate::new(a).unwrap();
        let prof = PredictorProfile::new(p, r).unwrap();
        match false_positive_rate(alpha, &prof) {
            Ok(q) => {
                prop_assert!((0.0..=1.0).contains(&q));
                // precision implied by the tallies' expectations
                let implied = a * r / (a * r + (1.0 - a) * q);
                prop_assert!((implied - p).abs() <= 1e-12);
                prop_assert!(ConfusionPredictor::calibrated(prof, alpha).is_ok());
            }
            Err(_) => {
                let (capped, saturated) = ConfusionPredictor::saturating(prof, alpha);
                prop_assert!(saturated);
                prop_assert_eq!(capped.false_positive_rate(), 1.0);
            }
        }
    }

    #[test]
    fn uniform_population_ratio_lies_between_endpoints(
        lo in 0.01..0.4f64,
        w in 0.01..0.4f64,
        q in 0.0..0.5f64,
    ) {
        let hi = lo + w;
        let prof = PredictorProfile::new(0.9, 0.8).unwrap();
        let d = FailureDistribution::uniform(lo, hi).unwrap();
        let pop = d.expected_cost_ratio(&prof, q, &QuadratureSpec::default()).unwrap().ratio;
        let at = |x: f64| cost_ratio_at(FailureRate::new(x).unwrap(), &prof, q).unwrap().ratio;
        prop_assert!(pop >= at(lo) - 1e-10 && pop <= at(hi) + 1e-10);
    }

    #[test]
    fn point_mass_collapses(a in 0.001..0.85f64, q in 0.0..1.0f64) {
        let prof = PredictorProfile::new(0.9, 0.95).unwrap();
        let d = FailureDistribution::point_mass(a).unwrap();
        let pop = d.expected_cost_ratio(&prof, q, &QuadratureSpec::default()).unwrap().ratio;
        let single = cost_ratio_at(FailureRate::new(a).unwrap(), &prof, q).unwrap().ratio;
        prop_assert!((pop - single).abs() <= 1e-10);
    }

    #[test]
    fn rotation_distance_is_symmetric_and_bounded(x in pose(), y in pose()) {
        let d = geodesic_angle(&x.orientation, &y.orientation);
        prop_assert!((d - geodesic_angle(&y.orientation, &x.orientation)).abs() <= 1e-12);
        prop_assert!((0.0..=std::f64::consts::PI + 1e-12).contains(&d));
        prop_assert!(geodesic_angle(&x.orientation, &x.orientation) <= 1e-7);
    }

    #[test]
    fn moves_preserve_unit_orientation(start in pose(), target in pose(), gain in 0.05..=1.0f64, seed: u64) {
        let subject = SubjectAnatomy::new(target, 10.0, 0.3, 0.5).unwrap();
        let noise = GuidanceNoise::new(3.0, 0.2).unwrap();
        let learner = LearnerPolicy::new(gain, 1.0, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cur = start;
        for _ in 0..20 {
            let off = guidance_offset(&cur, &subject, &noise, &mut rng);
            cur = apply_move(&cur, &off, &learner, &mut rng);
            prop_assert!(cur.orientation_norm_error() <= 1e-9);
        }
    }

    #[test]
    fn noiseless_partial_moves_contract(start in pose(), target in pose(), gain in 0.05..1.0f64) {
        let subject = SubjectAnatomy::new(target, 10.0, 0.3, 0.5).unwrap();
        let learner = LearnerPolicy::new(gain, 0.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let off = guidance_offset(&start, &subject, &GuidanceNoise::none(), &mut rng);
        let next = apply_move(&start, &off, &learner, &mut rng);
        let before = (start.position - target.position).norm();
        let after = (next.position - target.position).norm();
        prop_assert!((after - (1.0 - gain) * before).abs() <= 1e-9);
        let rb = geodesic_angle(&start.orientation, &target.orientation);
        let ra = geodesic_angle(&next.orientation, &target.orientation);
        prop_assert!((ra - (1.0 - gain) * rb).abs() <= 1e-7);
    }
}
