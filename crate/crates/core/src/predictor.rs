//! Synthetic quality predictors.
//!
//! [`ConfusionPredictor`] realizes a prescribed (precision, recall) pair at a
//! known failure base rate. [`ScorePredictor`] emits a noisy quality score and
//! flags scans whose score falls strictly below a threshold; sweeping the
//! threshold traces an operating-characteristic curve.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cost_model::{FailureRate, PredictorProfile};
use crate::error::{Error, Result};

/// Flag probability on passing scans that makes the marginal precision equal
/// `p` at base rate `α`: `q = α·r·(1 − p) / (p·(1 − α))`.
pub fn false_positive_rate(alpha: FailureRate, profile: &PredictorProfile) -> Result<f64> {
    let (a, p, r) = (alpha.value(), profile.precision(), profile.recall());
    let numerator = a * r * (1.0 - p);
    let denominator = p * (1.0 - a);
    if numerator > denominator {
        return Err(Error::InfeasibleOperatingPoint {
            alpha: a,
            precision: p,
            recall: r,
        });
    }
    Ok(numerator / denominator)
}

/// Predictor calibrated to a profile at a given base rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionPredictor {
    profile: PredictorProfile,
    base_rate: FailureRate,
    false_positive_rate: f64,
}

impl ConfusionPredictor {
    pub fn calibrated(profile: PredictorProfile, base_rate: FailureRate) -> Result<Self> {
        let q = false_positive_rate(base_rate, &profile)?;
        Ok(Self {
            profile,
            base_rate,
            false_positive_rate: q,
        })
    }

    /// Like [`calibrated`](Self::calibrated) but caps the false-positive rate
    /// at 1 when the profile is unreachable at this base rate. The second
    /// value reports whether the cap was applied.
    pub fn saturating(profile: PredictorProfile, base_rate: FailureRate) -> (Self, bool) {
        match Self::calibrated(profile, base_rate) {
            Ok(p) => (p, false),
            Err(_) => (
                Self {
                    profile,
                    base_rate,
                    false_positive_rate: 1.0,
                },
                true,
            ),
        }
    }

    pub fn profile(&self) -> &PredictorProfile {
        &self.profile
    }

    pub fn base_rate(&self) -> FailureRate {
        self.base_rate
    }

    pub fn false_positive_rate(&self) -> f64 {
        self.false_positive_rate
    }

    /// Returns `true` when the scan is flagged for a re-scan.
    pub fn classify<R: Rng + ?Sized>(&self, true_fail: bool, rng: &mut R) -> bool {
        let u: f64 = rng.random();
        if true_fail {
            u < self.profile.recall()
        } else {
            u < self.false_positive_rate
        }
    }
}

/// Noisy quality score thresholded at `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScorePredictor {
    noise_scale: f64,
    threshold: f64,
}

impl ScorePredictor {
    pub fn new(noise_scale: f64, threshold: f64) -> Result<Self> {
        if !(noise_scale >= 0.0 && noise_scale.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "noise_scale",
                value: noise_scale,
                constraint: "finite and >= 0",
            });
        }
        if !threshold.is_finite() {
            return Err(Error::InvalidParameter {
                name: "threshold",
                value: threshold,
                constraint: "finite",
            });
        }
        Ok(Self {
            noise_scale,
            threshold,
        })
    }

    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn with_threshold(self, threshold: f64) -> Self {
        Self { threshold, ..self }
    }

    /// `clamp(true_quality + ε, 0, 1)` with `ε ~ N(0, noise_scale²)`. One
    /// normal draw is consumed even when the noise scale is zero, so streams
    /// stay aligned across configurations.
    pub fn score<R: Rng + ?Sized>(&self, true_quality: f64, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        (true_quality + self.noise_scale * z).clamp(0.0, 1.0)
    }

    /// Ties at the threshold are not flagged, except that a threshold at
    /// the top of the score range flags everything, clamped scores of
    /// exactly 1 included.
    pub fn flags(&self, score: f64) -> bool {
        score < self.threshold || self.threshold >= 1.0
    }
}

/// Empirical operating characteristics of a thresholded predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub threshold: f64,
    /// Absent when nothing was flagged.
    pub precision: Option<f64>,
    /// Absent when the sample holds no true failures.
    pub recall: Option<f64>,
    pub flag_rate: f64,
}

/// Confusion-matrix tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: u64,
    pub false_positive: u64,
    pub false_negative: u64,
    pub true_negative: u64,
}

impl Confusion {
    pub fn record(&mut self, true_fail: bool, flagged: bool) {
        match (true_fail, flagged) {
            (true, true) => self.true_positive += 1,
            (false, true) => self.false_positive += 1,
            (true, false) => self.false_negative += 1,
            (false, false) => self.true_negative += 1,
        }
    }

    pub fn merge(&mut self, other: &Confusion) {
        self.true_positive += other.true_positive;
        self.false_positive += other.false_positive;
        self.false_negative += other.false_negative;
        self.true_negative += other.true_negative;
    }

    pub fn total(&self) -> u64 {
        self.true_positive + self.false_positive + self.false_negative + self.true_negative
    }

    pub fn flagged(&self) -> u64 {
        self.true_positive + self.false_positive
    }

    pub fn failures(&self) -> u64 {
        self.true_positive + self.false_negative
    }

    pub fn precision(&self) -> Option<f64> {
        match self.flagged() {
            0 => None,
            n => Some(self.true_positive as f64 / n as f64),
        }
    }

    pub fn recall(&self) -> Option<f64> {
        match self.failures() {
            0 => None,
            n => Some(self.true_positive as f64 / n as f64),
        }
    }

    pub fn flag_rate(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.flagged() as f64 / n as f64,
        }
    }

    pub fn operating_point(&self, threshold: f64) -> OperatingPoint {
        OperatingPoint {
            threshold,
            precision: self.precision(),
            recall: self.recall(),
            flag_rate: self.flag_rate(),
        }
    }
}

/// Scores every `(true_quality, true_fail)` pair and tallies
/// "flag when score < threshold".
pub fn operating_point<R: Rng + ?Sized>(
    predictor: &ScorePredictor,
    threshold: f64,
    cohort_sample: &[(f64, bool)],
    rng: &mut R,
) -> Result<OperatingPoint> {
    if cohort_sample.is_empty() {
        return Err(Error::InvalidParameter {
            name: "cohort_sample",
            value: 0.0,
            constraint: "nonempty",
        });
    }
    let predictor = predictor.with_threshold(threshold);
    let mut tally = Confusion::default();
    for &(quality, fail) in cohort_sample {
        let s = predictor.score(quality, rng);
        tally.record(fail, predictor.flags(s));
    }
    Ok(tally.operating_point(threshold))
}
