//! Per-subject and per-cohort simulation of the predict → flag → re-scan
//! loop.
//!
//! Abstract mode draws each scan's failure independently from the subject's
//! α, which is exactly the assumption behind the closed-form cost model.
//! Kinematic mode derives scan quality from the probe pose and moves the
//! probe along noisy 6D guidance between scans, so successive scans of a
//! subject are dependent.
//!
//! Accounting: the initial scan is free, each re-scan costs `c_s`, and the
//! finally accepted scan costs `c_c` if it truly failed. When the re-scan
//! budget runs out the last scan is accepted as is.

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alpha_distributions::FailureDistribution;
use crate::config::{
    ExperimentConfig, KinematicSpec, LoopPolicy, Mode, PredictorSpec, RunManifest,
};
use crate::cost_model::{CostRates, FailureRate, PredictorProfile};
use crate::error::{Error, Result};
use crate::kinematics::{
    apply_move, guidance_offset, image_quality, pose_error, random_rotation, uniform_orientation,
    GuidanceNoise, LearnerPolicy, ProbePose, SubjectAnatomy,
};
use crate::predictor::{Confusion, ConfusionPredictor, ScorePredictor};
use crate::quadrature::QuadratureSpec;
use crate::streams::StreamFactory;

/// Random streams of one subject.
#[derive(Debug, Clone)]
pub struct SubjectStreams {
    factory: StreamFactory,
    subject: u64,
}

impl SubjectStreams {
    pub fn new(factory: &StreamFactory, subject: u64) -> Self {
        Self {
            factory: factory.clone(),
            subject,
        }
    }

    pub fn from_seed(seed: u64, subject: u64) -> Self {
        Self::new(&StreamFactory::new(seed), subject)
    }

    pub fn subject_index(&self) -> u64 {
        self.subject
    }

    pub fn setup(&self) -> ChaCha8Rng {
        self.factory.subject(self.subject)
    }

    pub fn scan(&self, scan: u64) -> ChaCha8Rng {
        self.factory.scan(self.subject, scan)
    }
}

/// Outcome of one subject's acquisition loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub subject: u64,
    /// Abstract mode only.
    pub alpha: Option<f64>,
    /// Kinematic mode only: pose error of the initial scan.
    pub initial_translation_error_mm: Option<f64>,
    pub initial_rotation_error_rad: Option<f64>,
    pub scans: u32,
    pub rescans: u32,
    /// `true` when the last scan was not flagged; `false` when it was
    /// accepted only because the budget ran out.
    pub accepted: bool,
    pub final_true_fail: bool,
    pub correction_paid: bool,
    pub cost: f64,
    pub first_scan_failed: bool,
    pub first_scan_flagged: bool,
    /// Classification tallies over every scan of the subject.
    pub confusion: Confusion,
    /// The profile was unreachable at this α and the false-positive rate was
    /// capped at one.
    pub saturated: bool,
    /// Quality after every scan (kinematic mode).
    pub trajectory: Vec<f64>,
}

impl SubjectRecord {
    fn blank(subject: u64) -> Self {
        Self {
            subject,
            alpha: None,
            initial_translation_error_mm: None,
            initial_rotation_error_rad: None,
            scans: 0,
            rescans: 0,
            accepted: false,
            final_true_fail: false,
            correction_paid: false,
            cost: 0.0,
            first_scan_failed: false,
            first_scan_flagged: false,
            confusion: Confusion::default(),
            saturated: false,
            trajectory: Vec::new(),
        }
    }

    /// Cost the subject would have incurred without the predictor: the
    /// initial scan accepted as is.
    pub fn original_cost(&self, rates: &CostRates) -> f64 {
        if self.first_scan_failed {
            rates.correction_cost()
        } else {
            0.0
        }
    }

    fn close(&mut self, rescans: u32, accepted: bool, final_fail: bool, rates: &CostRates) {
        self.scans = rescans + 1;
        self.rescans = rescans;
        self.accepted = accepted;
        self.final_true_fail = final_fail;
        self.correction_paid = final_fail;
        self.cost = f64::from(rescans) * rates.rescan_cost()
            + if final_fail {
                rates.correction_cost()
            } else {
                0.0
            };
    }
}

/// Drives the loop given a per-scan `(true_fail, flagged)` oracle.
fn drive<F>(subject: u64, policy: &LoopPolicy, rates: &CostRates, mut scan: F) -> SubjectRecord
where
    F: FnMut(u64) -> (bool, bool),
{
    let mut rec = SubjectRecord::blank(subject);
    let mut rescans = 0u32;
    loop {
        let (fail, flagged) = scan(u64::from(rescans));
        rec.confusion.record(fail, flagged);
        if rescans == 0 {
            rec.first_scan_failed = fail;
            rec.first_scan_flagged = flagged;
        }
        if flagged && rescans < policy.max_rescans {
            rescans += 1;
            continue;
        }
        rec.close(rescans, !flagged, fail, rates);
        return rec;
    }
}

/// Abstract-mode subject with a confusion predictor calibrated at `alpha`.
pub fn run_subject_abstract(
    alpha: FailureRate,
    policy: &LoopPolicy,
    predictor: &ConfusionPredictor,
    rates: &CostRates,
    streams: &SubjectStreams,
) -> SubjectRecord {
    let a = alpha.value();
    let mut rec = drive(streams.subject_index(), policy, rates, |k| {
        let mut rng = streams.scan(k);
        let fail = rng.random::<f64>() < a;
        (fail, predictor.classify(fail, &mut rng))
    });
    rec.alpha = Some(a);
    rec
}

/// Abstract-mode subject with a score predictor. A failing scan's true
/// quality is uniform on `[0, cutoff)`, a passing scan's on `[cutoff, 1)`.
pub fn run_subject_abstract_scored(
    alpha: FailureRate,
    policy: &LoopPolicy,
    predictor: &ScorePredictor,
    failure_cutoff: f64,
    rates: &CostRates,
    streams: &SubjectStreams,
) -> SubjectRecord {
    let a = alpha.value();
    let predictor = effective_predictor(predictor, policy);
    let mut rec = drive(streams.subject_index(), policy, rates, |k| {
        let mut rng = streams.scan(k);
        let fail = rng.random::<f64>() < a;
        let u: f64 = rng.random();
        let quality = if fail {
            failure_cutoff * u
        } else {
            failure_cutoff + (1.0 - failure_cutoff) * u
        };
        let score = predictor.score(quality, &mut rng);
        (fail, predictor.flags(score))
    });
    rec.alpha = Some(a);
    rec
}

fn effective_predictor(predictor: &ScorePredictor, policy: &LoopPolicy) -> ScorePredictor {
    match policy.quality_threshold {
        Some(t) => predictor.with_threshold(t),
        None => *predictor,
    }
}

/// Kinematic-mode subject starting at `start`.
#[allow(clippy::too_many_arguments)]
pub fn run_subject_kinematic(
    subject: &SubjectAnatomy,
    start: ProbePose,
    policy: &LoopPolicy,
    score_pred: &ScorePredictor,
    guidance: &GuidanceNoise,
    learner: &LearnerPolicy,
    rates: &CostRates,
    streams: &SubjectStreams,
) -> SubjectRecord {
    let predictor = effective_predictor(score_pred, policy);
    let mut pose = start;
    let mut trajectory = Vec::new();
    let mut rec = drive(streams.subject_index(), policy, rates, |k| {
        let mut rng = streams.scan(k);
        let quality = image_quality(&pose, subject);
        trajectory.push(quality);
        let flagged = predictor.flags(predictor.score(quality, &mut rng));
        if flagged && k < u64::from(policy.max_rescans) {
            let offset = guidance_offset(&pose, subject, guidance, &mut rng);
            pose = apply_move(&pose, &offset, learner, &mut rng);
        }
        (subject.fails(quality), flagged)
    });
    let e = pose_error(&start, &subject.target);
    rec.initial_translation_error_mm = Some(e.translation);
    rec.initial_rotation_error_rad = Some(e.rotation);
    rec.trajectory = trajectory;
    rec
}

/// Draws the subject's anatomy and start pose from its setup stream.
pub fn draw_kinematic_subject(
    spec: &KinematicSpec,
    streams: &SubjectStreams,
) -> (SubjectAnatomy, ProbePose) {
    let mut rng = streams.setup();
    let target = ProbePose::new(Vector3::zeros(), uniform_orientation(&mut rng));
    let anatomy = SubjectAnatomy::new(
        target,
        spec.translation_scale_mm,
        spec.rotation_scale_rad,
        spec.failure_cutoff,
    )
    .expect("validated at parse time");
    let offset = Vector3::from(spec.start_offset_mm);
    let jitter = {
        let mut draw =
            || -> f64 { rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng) };
        Vector3::new(draw(), draw(), draw()) * spec.start_translation_sd_mm
    };
    let rot = random_rotation(&mut rng, spec.start_rotation_sd_rad);
    let start = ProbePose::new(target.position + offset + jitter, rot * target.orientation);
    (anatomy, start)
}

/// Sample mean with its standard error (absent below two observations).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub standard_error: Option<f64>,
}

impl Estimate {
    pub fn of(values: impl Iterator<Item = f64>) -> Option<Self> {
        let (mut n, mut mean, mut m2) = (0u64, 0.0, 0.0);
        for x in values {
            n += 1;
            let d = x - mean;
            mean += d / n as f64;
            m2 += d * (x - mean);
        }
        match n {
            0 => None,
            1 => Some(Self {
                mean,
                standard_error: None,
            }),
            _ => Some(Self {
                mean,
                standard_error: Some((m2 / (n - 1) as f64 / n as f64).sqrt()),
            }),
        }
    }

    pub fn z_against(&self, target: f64) -> Option<f64> {
        self.standard_error
            .filter(|se| *se > 0.0)
            .map(|se| (self.mean - target) / se)
    }
}

/// `Σ x / Σ y` over paired observations with a delta-method standard error.
pub fn ratio_estimate(pairs: impl Iterator<Item = (f64, f64)> + Clone) -> Option<Estimate> {
    let (mut n, mut sx, mut sy) = (0u64, 0.0, 0.0);
    for (x, y) in pairs.clone() {
        n += 1;
        sx += x;
        sy += y;
    }
    if n == 0 || sy == 0.0 {
        return None;
    }
    let ratio = sx / sy;
    if n == 1 {
        return Some(Estimate {
            mean: ratio,
            standard_error: None,
        });
    }
    let my = sy / n as f64;
    let resid: f64 = pairs.map(|(x, y)| (x - ratio * y).powi(2)).sum();
    let var = resid / (n - 1) as f64 / (my * my) / n as f64;
    Some(Estimate {
        mean: ratio,
        standard_error: Some(var.sqrt()),
    })
}

/// Cohort aggregates; every field is a function of the records alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub subjects: u64,
    pub mean_cost: Option<Estimate>,
    pub mean_original_cost: Option<Estimate>,
    pub mean_rescans: Option<f64>,
    /// Pooled over every scan.
    pub empirical_precision: Option<f64>,
    pub empirical_recall: Option<f64>,
    /// Mean cost over mean counterfactual (no-predictor) cost.
    pub empirical_cost_ratio: Option<Estimate>,
    pub budget_exhausted: u64,
    pub saturated_subjects: u64,
    pub mean_initial_quality: Option<f64>,
    pub mean_final_quality: Option<f64>,
}

impl Aggregates {
    pub fn from_records(records: &[SubjectRecord], rates: &CostRates) -> Self {
        let mut pooled = Confusion::default();
        for r in records {
            pooled.merge(&r.confusion);
        }
        let n = records.len();
        let mean = |f: &dyn Fn(&SubjectRecord) -> Option<f64>| -> Option<f64> {
            let vals: Vec<f64> = records.iter().filter_map(f).collect();
            if vals.is_empty() {
                None
            } else {
                Some(vals.iter().sum::<f64>() / vals.len() as f64)
            }
        };
        Self {
            subjects: n as u64,
            mean_cost: Estimate::of(records.iter().map(|r| r.cost)),
            mean_original_cost: Estimate::of(records.iter().map(|r| r.original_cost(rates))),
            mean_rescans: mean(&|r| Some(f64::from(r.rescans))),
            empirical_precision: pooled.precision(),
            empirical_recall: pooled.recall(),
            empirical_cost_ratio: ratio_estimate(
                records.iter().map(|r| (r.cost, r.original_cost(rates))),
            ),
            budget_exhausted: records.iter().filter(|r| !r.accepted).count() as u64,
            saturated_subjects: records.iter().filter(|r| r.saturated).count() as u64,
            mean_initial_quality: mean(&|r| r.trajectory.first().copied()),
            mean_final_quality: mean(&|r| r.trajectory.last().copied()),
        }
    }
}

/// Result of a cohort run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub manifest: RunManifest,
    pub config: serde_json::Value,
    pub mode: Mode,
    /// Which modelling assumption held for the scans.
    pub scan_model: String,
    pub aggregates: Aggregates,
    /// Closed-form population ratio for the same configuration, when defined.
    pub analytic_cost_ratio: Option<f64>,
    pub analytic_note: Option<String>,
    #[serde(skip)]
    pub records: Vec<SubjectRecord>,
}

fn simulate_one(cfg: &ExperimentConfig, factory: &StreamFactory, index: u64) -> SubjectRecord {
    let streams = SubjectStreams::new(factory, index);
    match cfg.mode {
        Mode::Abstract => {
            let dist = cfg
                .distribution
                .as_ref()
                .expect("abstract mode has a distribution");
            let alpha = dist.sample_alpha(&mut streams.setup());
            match cfg.predictor {
                PredictorSpec::Confusion(profile) => {
                    let (pred, saturated) = ConfusionPredictor::saturating(profile, alpha);
                    let mut rec =
                        run_subject_abstract(alpha, &cfg.policy, &pred, &cfg.rates, &streams);
                    rec.saturated = saturated;
                    rec
                }
                PredictorSpec::Score(s) => run_subject_abstract_scored(
                    alpha,
                    &cfg.policy,
                    &s,
                    cfg.kinematics.failure_cutoff,
                    &cfg.rates,
                    &streams,
                ),
            }
        }
        Mode::Kinematic => {
            let score = match cfg.predictor {
                PredictorSpec::Score(s) => s,
                PredictorSpec::Confusion(_) => unreachable!("rejected at parse time"),
            };
            let (anatomy, start) = draw_kinematic_subject(&cfg.kinematics, &streams);
            run_subject_kinematic(
                &anatomy,
                start,
                &cfg.policy,
                &score,
                &cfg.kinematics.guidance(),
                &cfg.kinematics.learner(),
                &cfg.rates,
                &streams,
            )
        }
    }
}

/// Simulates every subject and aggregates in subject order. Output is
/// identical for any `cfg.workers`.
pub fn run_cohort(cfg: &ExperimentConfig) -> Result<SimulationReport> {
    if cfg.mode == Mode::Abstract && cfg.distribution.is_none() {
        return Err(Error::config(
            "distribution",
            "abstract mode needs a [distribution] section",
        ));
    }
    if cfg.mode == Mode::Kinematic && !matches!(cfg.predictor, PredictorSpec::Score(_)) {
        return Err(Error::config(
            "predictor.kind",
            "kinematic mode needs kind = \"score\"",
        ));
    }
    let factory = StreamFactory::new(cfg.seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::config("cohort.workers", e.to_string()))?;
    let records: Vec<SubjectRecord> = pool.install(|| {
        (0..cfg.subjects)
            .into_par_iter()
            .map(|i| simulate_one(cfg, &factory, i))
            .collect()
    });

    let (analytic_cost_ratio, analytic_note) = analytic_ratio(cfg);
    Ok(SimulationReport {
        manifest: cfg.manifest(),
        config: cfg.echo(),
        mode: cfg.mode,
        scan_model: match cfg.mode {
            Mode::Abstract => "independent scans given per-subject alpha".into(),
            Mode::Kinematic => {
                "pose-dependent scans (independence across scans does not hold)".into()
            }
        },
        aggregates: Aggregates::from_records(&records, &cfg.rates),
        analytic_cost_ratio,
        analytic_note,
        records,
    })
}

fn analytic_ratio(cfg: &ExperimentConfig) -> (Option<f64>, Option<String>) {
    match (cfg.mode, &cfg.predictor, &cfg.distribution) {
        (Mode::Abstract, PredictorSpec::Confusion(profile), Some(dist)) => {
            match dist.expected_cost_ratio(
                profile,
                cfg.rates.quotient(),
                &QuadratureSpec::default(),
            ) {
                Ok(r) => (Some(r.ratio), None),
                Err(e) => (None, Some(e.to_string())),
            }
        }
        (Mode::Abstract, PredictorSpec::Score(_), _) => (
            None,
            Some("score predictor: operating point is empirical, see the sweep command".into()),
        ),
        _ => (
            None,
            Some("kinematic mode: closed form assumes independent scans".into()),
        ),
    }
}

/// Closed-form costs next to their simulated estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub analytic_original_cost: f64,
    pub analytic_new_cost: f64,
    pub analytic_cost_ratio: f64,
    pub empirical_original_cost: Option<Estimate>,
    pub empirical_new_cost: Option<Estimate>,
    pub empirical_cost_ratio: Option<Estimate>,
    pub z_original_cost: Option<f64>,
    pub z_new_cost: Option<f64>,
    pub z_cost_ratio: Option<f64>,
}

pub fn empirical_vs_analytic(
    report: &SimulationReport,
    dist: &FailureDistribution,
    profile: &PredictorProfile,
    rates: &CostRates,
) -> Result<Comparison> {
    if report.mode != Mode::Abstract {
        return Err(Error::ModeMismatch {
            expected: "abstract",
            found: report.mode.as_str(),
        });
    }
    let quad = QuadratureSpec::default();
    let original = rates.correction_cost() * dist.mean_alpha(&quad)?;
    let ratio = dist
        .expected_cost_ratio(profile, rates.quotient(), &quad)?
        .ratio;
    let new = original * ratio;
    let agg = &report.aggregates;
    let z = |e: &Option<Estimate>, t: f64| e.as_ref().and_then(|e| e.z_against(t));
    Ok(Comparison {
        analytic_original_cost: original,
        analytic_new_cost: new,
        analytic_cost_ratio: ratio,
        z_original_cost: z(&agg.mean_original_cost, original),
        z_new_cost: z(&agg.mean_cost, new),
        z_cost_ratio: z(&agg.empirical_cost_ratio, ratio),
        empirical_original_cost: agg.mean_original_cost,
        empirical_new_cost: agg.mean_cost,
        empirical_cost_ratio: agg.empirical_cost_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use nalgebra::UnitQuaternion;

    fn rates() -> CostRates {
        CostRates::new(0.1, 1.0).unwrap()
    }

    fn policy(max_rescans: u32) -> LoopPolicy {
        LoopPolicy {
            quality_threshold: None,
            max_rescans,
        }
    }

    fn check_accounting(r: &SubjectRecord, rates: &CostRates, cap: u32) {
        assert_eq!(r.scans, r.rescans + 1);
        assert!(r.rescans <= cap);
        let expected = f64::from(r.rescans) * rates.rescan_cost()
            + if r.correction_paid {
                rates.correction_cost()
            } else {
                0.0
            };
        assert_eq!(r.cost, expected);
        assert_eq!(r.confusion.total(), u64::from(r.scans));
    }

    #[test]
    fn zero_alpha_never_rescans() {
        let a = FailureRate::new(0.0).unwrap();
        let pred =
            ConfusionPredictor::calibrated(PredictorProfile::new(0.8, 0.8).unwrap(), a).unwrap();
        for i in 0..1000 {
            let r = run_subject_abstract(
                a,
                &policy(5),
                &pred,
                &rates(),
                &SubjectStreams::from_seed(1, i),
            );
            assert_eq!((r.scans, r.rescans, r.cost, r.accepted), (1, 0, 0.0, true));
        }
    }

    #[test]
    fn budget_exhaustion_accepts_last_scan() {
        let a = FailureRate::new(0.999).unwrap();
        let pred =
            ConfusionPredictor::calibrated(PredictorProfile::new(1.0, 1.0).unwrap(), a).unwrap();
        let mut exhausted = 0;
        for i in 0..1000 {
            let r = run_subject_abstract(
                a,
                &policy(3),
                &pred,
                &rates(),
                &SubjectStreams::from_seed(2, i),
            );
            check_accounting(&r, &rates(), 3);
            if r.scans == 4 && r.correction_paid {
                exhausted += 1;
                assert!(!r.accepted);
                assert!((r.cost - (0.3 + 1.0)).abs() < 1e-12);
            }
        }
        assert!(exhausted >= 990);
    }

    #[test]
    fn zero_budget_never_rescans() {
        let a = FailureRate::new(0.5).unwrap();
        let pred =
            ConfusionPredictor::calibrated(PredictorProfile::new(0.9, 0.9).unwrap(), a).unwrap();
        for i in 0..200 {
            let r = run_subject_abstract(
                a,
                &policy(0),
                &pred,
                &rates(),
                &SubjectStreams::from_seed(3, i),
            );
            assert_eq!(r.rescans, 0);
            check_accounting(&r, &rates(), 0);
        }
    }

    fn kinematic_subject() -> SubjectAnatomy {
        let target = ProbePose::new(
            Vector3::new(2.0, 1.0, -1.0),
            UnitQuaternion::from_euler_angles(0.1, 0.4, -0.3),
        );
        SubjectAnatomy::new(target, 10.0, 0.3, 0.5).unwrap()
    }

    #[test]
    fn kinematic_start_at_target_is_single_scan() {
        let s = kinematic_subject();
        let pred = ScorePredictor::new(0.0, 0.9).unwrap();
        let r = run_subject_kinematic(
            &s,
            s.target,
            &policy(10),
            &pred,
            &GuidanceNoise::none(),
            &LearnerPolicy::new(1.0, 0.0, 0.0).unwrap(),
            &rates(),
            &SubjectStreams::from_seed(0, 0),
        );
        assert_eq!(r.trajectory, vec![1.0]);
        assert_eq!((r.scans, r.cost), (1, 0.0));
    }

    #[test]
    fn kinematic_perfect_guidance_converges_in_one_move() {
        let s = kinematic_subject();
        let pred = ScorePredictor::new(0.0, 0.9).unwrap();
        let start = ProbePose::new(
            s.target.position + Vector3::new(8.0, -3.0, 2.0),
            UnitQuaternion::from_euler_angles(0.2, 0.0, 0.1) * s.target.orientation,
        );
        let r = run_subject_kinematic(
            &s,
            start,
            &policy(10),
            &pred,
            &GuidanceNoise::none(),
            &LearnerPolicy::new(1.0, 0.0, 0.0).unwrap(),
            &rates(),
            &SubjectStreams::from_seed(0, 0),
        );
        assert_eq!(r.rescans, 1);
        assert!(r.trajectory[0] < 0.9);
        assert!((1.0 - r.trajectory[1]).abs() < 1e-12);
        assert!(r.accepted && !r.correction_paid);
    }

    #[test]
    fn kinematic_half_gain_follows_contraction_curve() {
        let s = kinematic_subject();
        let d0 = 30.0;
        let start = ProbePose::new(
            s.target.position + Vector3::new(0.0, 0.0, d0),
            s.target.orientation,
        );
        let pred = ScorePredictor::new(0.0, 1.0).unwrap();
        let r = run_subject_kinematic(
            &s,
            start,
            &policy(5),
            &pred,
            &GuidanceNoise::none(),
            &LearnerPolicy::new(0.5, 0.0, 0.0).unwrap(),
            &rates(),
            &SubjectStreams::from_seed(0, 0),
        );
        assert_eq!(r.trajectory.len(), 6);
        for (k, q) in r.trajectory.iter().enumerate() {
            let d = d0 * 0.5f64.powi(k as i32) / 10.0;
            assert!((q - (-d * d).exp()).abs() < 1e-9, "k={k}");
        }
    }

    #[test]
    fn estimates_and_ratios() {
        assert_eq!(Estimate::of(std::iter::empty()), None);
        let one = Estimate::of([2.0].into_iter()).unwrap();
        assert_eq!((one.mean, one.standard_error), (2.0, None));
        let e = Estimate::of([1.0, 2.0, 3.0, 4.0].into_iter()).unwrap();
        assert!((e.mean - 2.5).abs() < 1e-15);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((e.standard_error.unwrap() - sd / 2.0).abs() < 1e-15);
        let r = ratio_estimate([(1.0, 2.0), (3.0, 2.0)].into_iter()).unwrap();
        assert_eq!(r.mean, 1.0);
        assert_eq!(ratio_estimate([(1.0, 0.0)].into_iter()), None);
    }

    const ABSTRACT: &str = r#"
[cohort]
subjects = 2000
seed = 5
[distribution]
family = "beta"
a = 2.0
b = 8.0
[predictor]
precision = 0.8
recall = 0.8
[costs]
rescan_cost = 0.1
correction_cost = 1.0
[policy]
max_rescans = 4
"#;

    #[test]
    fn cohort_records_satisfy_invariants() {
        let cfg = parse_config(ABSTRACT).unwrap();
        let rep = run_cohort(&cfg).unwrap();
        assert_eq!(rep.records.len(), 2000);
        for (i, r) in rep.records.iter().enumerate() {
            assert_eq!(r.subject, i as u64);
            check_accounting(r, &cfg.rates, 4);
        }
        assert_eq!(
            rep.aggregates,
            Aggregates::from_records(&rep.records, &cfg.rates)
        );
        assert!(rep.analytic_cost_ratio.is_some());
    }

    #[test]
    fn cohort_is_independent_of_worker_count() {
        let mut cfg = parse_config(ABSTRACT).unwrap();
        cfg.workers = 1;
        let a = run_cohort(&cfg).unwrap();
        cfg.workers = 7;
        let b = run_cohort(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_cohort() {
        let mut cfg = parse_config(ABSTRACT).unwrap();
        cfg.subjects = 0;
        let rep = run_cohort(&cfg).unwrap();
        assert!(rep.records.is_empty());
        assert_eq!(rep.aggregates.subjects, 0);
        assert_eq!(rep.aggregates.mean_cost, None);
        assert_eq!(rep.manifest.config_digest.len(), 64);
    }

    #[test]
    fn single_subject_comparison_has_no_standard_errors() {
        let mut cfg = parse_config(ABSTRACT).unwrap();
        cfg.subjects = 1;
        let rep = run_cohort(&cfg).unwrap();
        let profile = cfg.profile().unwrap();
        let cmp = empirical_vs_analytic(
            &rep,
            cfg.distribution.as_ref().unwrap(),
            &profile,
            &cfg.rates,
        )
        .unwrap();
        assert_eq!(cmp.z_new_cost, None);
        assert_eq!(cmp.empirical_new_cost.unwrap().standard_error, None);
    }

    #[test]
    fn never_flagging_predictor_has_unit_empirical_ratio() {
        let cfg = parse_config(&ABSTRACT.replace("recall = 0.8", "recall = 0.0")).unwrap();
        let rep = run_cohort(&cfg).unwrap();
        assert_eq!(rep.aggregates.empirical_cost_ratio.unwrap().mean, 1.0);
        assert_eq!(rep.aggregates.mean_rescans, Some(0.0));
    }

    #[test]
    fn comparison_rejects_kinematic_reports() {
        let doc = r#"
[cohort]
mode = "kinematic"
subjects = 3
[predictor]
kind = "score"
[costs]
rescan_cost = 0.1
correction_cost = 1.0
"#;
        let cfg = parse_config(doc).unwrap();
        let rep = run_cohort(&cfg).unwrap();
        let d = FailureDistribution::point_mass(0.2).unwrap();
        let p = PredictorProfile::new(0.8, 0.8).unwrap();
        assert!(matches!(
            empirical_vs_analytic(&rep, &d, &p, &cfg.rates),
            Err(Error::ModeMismatch { .. })
        ));
    }
}
