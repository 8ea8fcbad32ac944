//! Experiment configuration: a sectioned `key = value` document (TOML
//! syntax) with sections `[cohort]`, `[distribution]`, `[predictor]`,
//! `[costs]`, `[policy]`, `[kinematics]` and `[output]`.
//!
//! Parsing validates every value against the invariants of the type it
//! feeds and reports the offending key. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::alpha_distributions::FailureDistribution;
use crate::cost_model::{CostRates, PredictorProfile};
use crate::error::{Error, Result};
use crate::kinematics::{GuidanceNoise, LearnerPolicy};
use crate::predictor::ScorePredictor;

pub const ARTIFACT_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Scans fail independently with the subject's α.
    Abstract,
    /// Scan quality follows the probe pose.
    Kinematic,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Abstract => "abstract",
            Mode::Kinematic => "kinematic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PredictorSpec {
    Confusion(PredictorProfile),
    Score(ScorePredictor),
}

/// Re-scan budget and, for score predictors, the flag threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopPolicy {
    pub quality_threshold: Option<f64>,
    pub max_rescans: u32,
}

/// Pose model parameters shared by all subjects of a kinematic cohort.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicSpec {
    pub translation_scale_mm: f64,
    pub rotation_scale_rad: f64,
    pub failure_cutoff: f64,
    pub start_offset_mm: [f64; 3],
    pub start_translation_sd_mm: f64,
    pub start_rotation_sd_rad: f64,
    pub gain: f64,
    pub motor_noise_t_mm: f64,
    pub motor_noise_r_rad: f64,
    pub guidance_noise_t_mm: f64,
    pub guidance_noise_r_rad: f64,
}

impl Default for KinematicSpec {
    fn default() -> Self {
        Self {
            translation_scale_mm: 10.0,
            rotation_scale_rad: 0.3,
            failure_cutoff: 0.5,
            start_offset_mm: [0.0; 3],
            start_translation_sd_mm: 10.0,
            start_rotation_sd_rad: 0.3,
            gain: 1.0,
            motor_noise_t_mm: 0.0,
            motor_noise_r_rad: 0.0,
            guidance_noise_t_mm: 0.0,
            guidance_noise_r_rad: 0.0,
        }
    }
}

impl KinematicSpec {
    pub fn learner(&self) -> LearnerPolicy {
        LearnerPolicy::new(self.gain, self.motor_noise_t_mm, self.motor_noise_r_rad)
            .expect("validated at parse time")
    }

    pub fn guidance(&self) -> GuidanceNoise {
        GuidanceNoise::new(self.guidance_noise_t_mm, self.guidance_noise_r_rad)
            .expect("validated at parse time")
    }
}

/// Fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub subjects: u64,
    pub seed: u64,
    /// Execution only; never affects results.
    pub workers: usize,
    pub distribution: Option<FailureDistribution>,
    pub predictor: PredictorSpec,
    pub rates: CostRates,
    pub policy: LoopPolicy,
    pub threshold_grid: Vec<f64>,
    pub kinematics: KinematicSpec,
    pub output_dir: Option<PathBuf>,
}

pub const DEFAULT_SUBJECTS: u64 = 10_000;
pub const DEFAULT_MAX_RESCANS: u32 = 50;

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn default_grid() -> Vec<f64> {
    (0..=20).map(|i| f64::from(i) / 20.0).collect()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    #[serde(default)]
    cohort: RawCohort,
    distribution: Option<RawDistribution>,
    predictor: Option<RawPredictor>,
    costs: Option<RawCosts>,
    #[serde(default)]
    policy: RawPolicy,
    #[serde(default)]
    kinematics: RawKinematics,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCohort {
    mode: Option<String>,
    subjects: Option<i64>,
    seed: Option<u64>,
    workers: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDistribution {
    family: Option<String>,
    alpha: Option<f64>,
    lo: Option<f64>,
    hi: Option<f64>,
    a: Option<f64>,
    b: Option<f64>,
    mean: Option<f64>,
    sd: Option<f64>,
    histogram_csv: Option<String>,
    upper_edges: Option<Vec<f64>>,
    masses: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPredictor {
    kind: Option<String>,
    precision: Option<f64>,
    recall: Option<f64>,
    noise_scale: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCosts {
    rescan_cost: Option<f64>,
    correction_cost: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolicy {
    max_rescans: Option<i64>,
    threshold: Option<f64>,
    threshold_grid: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKinematics {
    translation_scale_mm: Option<f64>,
    rotation_scale_rad: Option<f64>,
    failure_cutoff: Option<f64>,
    start_offset_mm: Option<[f64; 3]>,
    start_translation_sd_mm: Option<f64>,
    start_rotation_sd_rad: Option<f64>,
    gain: Option<f64>,
    motor_noise_t_mm: Option<f64>,
    motor_noise_r_rad: Option<f64>,
    guidance_noise_t_mm: Option<f64>,
    guidance_noise_r_rad: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
}

fn require<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| Error::config(key, "required key is missing"))
}

fn check(ok: bool, key: &str, value: impl std::fmt::Display, constraint: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(
            key,
            format!("value {value} violates {constraint}"),
        ))
    }
}

fn prob_open_closed(v: f64, key: &str) -> Result<f64> {
    check(v > 0.0 && v <= 1.0, key, v, "the (0, 1] constraint")?;
    Ok(v)
}

fn prob_closed(v: f64, key: &str) -> Result<f64> {
    check((0.0..=1.0).contains(&v), key, v, "the [0, 1] constraint")?;
    Ok(v)
}

fn nonneg(v: f64, key: &str) -> Result<f64> {
    check(v >= 0.0 && v.is_finite(), key, v, "the constraint >= 0")?;
    Ok(v)
}

fn positive(v: f64, key: &str) -> Result<f64> {
    check(v > 0.0 && v.is_finite(), key, v, "the constraint > 0")?;
    Ok(v)
}

fn rekey(key: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Config { .. } => e,
        other => Error::config(key, other.to_string()),
    }
}

/// Parses a configuration document. Relative histogram paths resolve against
/// the current directory.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_at(text, Path::new("."))
}

/// Parses a configuration document whose relative paths resolve against
/// `base_dir`.
pub fn parse_config_at(text: &str, base_dir: &Path) -> Result<ExperimentConfig> {
    let raw: RawDocument =
        toml::from_str(text).map_err(|e| Error::config("document", e.message().to_string()))?;

    let mode = match raw.cohort.mode.as_deref().unwrap_or("abstract") {
        "abstract" => Mode::Abstract,
        "kinematic" => Mode::Kinematic,
        other => {
            return Err(Error::config(
                "cohort.mode",
                format!("unknown mode `{other}` (expected `abstract` or `kinematic`)"),
            ))
        }
    };
    let subjects = raw.cohort.subjects.unwrap_or(DEFAULT_SUBJECTS as i64);
    check(
        subjects >= 0,
        "cohort.subjects",
        subjects,
        "the constraint >= 0",
    )?;
    let workers = match raw.cohort.workers {
        Some(w) => {
            check(w >= 1, "cohort.workers", w, "the constraint >= 1")?;
            w as usize
        }
        None => default_workers(),
    };

    let distribution = match raw.distribution {
        Some(d) => Some(parse_distribution(d, base_dir)?),
        None => None,
    };
    if mode == Mode::Abstract && distribution.is_none() {
        return Err(Error::config(
            "distribution",
            "abstract mode needs a [distribution] section",
        ));
    }

    let kinematics = parse_kinematics(raw.kinematics)?;

    let raw_pred = require(raw.predictor, "predictor")?;
    let kind = raw_pred.kind.as_deref().unwrap_or("confusion");
    let threshold = raw.policy.threshold;
    if let Some(t) = threshold {
        check(t.is_finite(), "policy.threshold", t, "finiteness")?;
    }
    let predictor = match kind {
        "confusion" => {
            let p = prob_open_closed(
                require(raw_pred.precision, "predictor.precision")?,
                "predictor.precision",
            )?;
            let r = prob_closed(
                require(raw_pred.recall, "predictor.recall")?,
                "predictor.recall",
            )?;
            if raw_pred.noise_scale.is_some() {
                return Err(Error::config(
                    "predictor.noise_scale",
                    "only valid for kind = \"score\"",
                ));
            }
            PredictorSpec::Confusion(PredictorProfile::new(p, r).map_err(rekey("predictor"))?)
        }
        "score" => {
            for (v, k) in [
                (raw_pred.precision, "predictor.precision"),
                (raw_pred.recall, "predictor.recall"),
            ] {
                if v.is_some() {
                    return Err(Error::config(k, "only valid for kind = \"confusion\""));
                }
            }
            let noise = nonneg(raw_pred.noise_scale.unwrap_or(0.0), "predictor.noise_scale")?;
            let t = threshold.unwrap_or(kinematics.failure_cutoff);
            PredictorSpec::Score(ScorePredictor::new(noise, t).map_err(rekey("predictor"))?)
        }
        other => {
            return Err(Error::config(
                "predictor.kind",
                format!("unknown kind `{other}` (expected `confusion` or `score`)"),
            ))
        }
    };
    if mode == Mode::Kinematic && !matches!(predictor, PredictorSpec::Score(_)) {
        return Err(Error::config(
            "predictor.kind",
            "kinematic mode needs kind = \"score\"",
        ));
    }

    let costs = require(raw.costs, "costs")?;
    let cs = nonneg(
        require(costs.rescan_cost, "costs.rescan_cost")?,
        "costs.rescan_cost",
    )?;
    let cc = positive(
        require(costs.correction_cost, "costs.correction_cost")?,
        "costs.correction_cost",
    )?;
    let rates = CostRates::new(cs, cc).map_err(rekey("costs"))?;

    let max_rescans = raw
        .policy
        .max_rescans
        .unwrap_or(i64::from(DEFAULT_MAX_RESCANS));
    check(
        (0..=i64::from(u32::MAX)).contains(&max_rescans),
        "policy.max_rescans",
        max_rescans,
        "the constraint 0 <= max_rescans <= 2^32 - 1",
    )?;
    let quality_threshold = match predictor {
        PredictorSpec::Score(s) => Some(s.threshold()),
        PredictorSpec::Confusion(_) => {
            if threshold.is_some() {
                return Err(Error::config(
                    "policy.threshold",
                    "only valid with a score predictor",
                ));
            }
            None
        }
    };
    let policy = LoopPolicy {
        quality_threshold,
        max_rescans: max_rescans as u32,
    };
    let threshold_grid = raw.policy.threshold_grid.unwrap_or_else(default_grid);
    check(
        !threshold_grid.is_empty(),
        "policy.threshold_grid",
        "[]",
        "nonemptiness",
    )?;
    if let Some(t) = threshold_grid.iter().find(|t| !t.is_finite()) {
        return Err(Error::config(
            "policy.threshold_grid",
            format!("non-finite entry {t}"),
        ));
    }

    Ok(ExperimentConfig {
        mode,
        subjects: subjects as u64,
        seed: raw.cohort.seed.unwrap_or(0),
        workers,
        distribution,
        predictor,
        rates,
        policy,
        threshold_grid,
        kinematics,
        output_dir: raw.output.dir.map(PathBuf::from),
    })
}

fn parse_distribution(d: RawDistribution, base_dir: &Path) -> Result<FailureDistribution> {
    let family = require(d.family.clone(), "distribution.family")?;
    let allowed: &[&str] = match family.as_str() {
        "point_mass" => &["alpha"],
        "uniform" => &["lo", "hi"],
        "beta" => &["a", "b"],
        "truncated_normal" => &["mean", "sd", "lo", "hi"],
        "histogram" => &["histogram_csv", "upper_edges", "masses"],
        other => {
            return Err(Error::config(
                "distribution.family",
                format!(
                    "unknown family `{other}` (expected point_mass, uniform, beta, truncated_normal or histogram)"
                ),
            ))
        }
    };
    let present = [
        ("alpha", d.alpha.is_some()),
        ("lo", d.lo.is_some()),
        ("hi", d.hi.is_some()),
        ("a", d.a.is_some()),
        ("b", d.b.is_some()),
        ("mean", d.mean.is_some()),
        ("sd", d.sd.is_some()),
        ("histogram_csv", d.histogram_csv.is_some()),
        ("upper_edges", d.upper_edges.is_some()),
        ("masses", d.masses.is_some()),
    ];
    for (k, is_set) in present {
        if is_set && !allowed.contains(&k) {
            return Err(Error::config(
                format!("distribution.{k}"),
                format!("not a parameter of family `{family}`"),
            ));
        }
    }
    match family.as_str() {
        "point_mass" => {
            let a = require(d.alpha, "distribution.alpha")?;
            check(
                (0.0..1.0).contains(&a),
                "distribution.alpha",
                a,
                "the [0, 1) constraint",
            )?;
            FailureDistribution::point_mass(a).map_err(rekey("distribution.alpha"))
        }
        "uniform" => {
            let lo = require(d.lo, "distribution.lo")?;
            let hi = require(d.hi, "distribution.hi")?;
            check(lo < hi, "distribution.hi", hi, "support ordering lo < hi")?;
            check(lo >= 0.0, "distribution.lo", lo, "the constraint >= 0")?;
            check(hi < 1.0, "distribution.hi", hi, "the constraint < 1")?;
            FailureDistribution::uniform(lo, hi).map_err(rekey("distribution"))
        }
        "beta" => {
            let a = positive(require(d.a, "distribution.a")?, "distribution.a")?;
            let b = positive(require(d.b, "distribution.b")?, "distribution.b")?;
            FailureDistribution::beta(a, b).map_err(rekey("distribution"))
        }
        "truncated_normal" => {
            let mean = require(d.mean, "distribution.mean")?;
            let sd = positive(require(d.sd, "distribution.sd")?, "distribution.sd")?;
            let lo = require(d.lo, "distribution.lo")?;
            let hi = require(d.hi, "distribution.hi")?;
            check(lo < hi, "distribution.hi", hi, "support ordering lo < hi")?;
            FailureDistribution::truncated_normal(mean, sd, lo, hi).map_err(rekey("distribution"))
        }
        _ => {
            let (edges, masses) = match (d.histogram_csv, d.upper_edges, d.masses) {
                (Some(path), None, None) => {
                    let path = base_dir.join(path);
                    let text = std::fs::read_to_string(&path).map_err(|e| {
                        Error::config(
                            "distribution.histogram_csv",
                            format!("{}: {e}", path.display()),
                        )
                    })?;
                    read_histogram_csv(&text).map_err(rekey("distribution.histogram_csv"))?
                }
                (None, Some(e), Some(m)) => (e, m),
                _ => {
                    return Err(Error::config(
                        "distribution",
                        "histogram needs either histogram_csv or both upper_edges and masses",
                    ))
                }
            };
            FailureDistribution::histogram(edges, masses).map_err(rekey("distribution.histogram"))
        }
    }
}

/// Reads a `bin_upper_edge,mass` CSV with a header row.
pub fn read_histogram_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "bin_upper_edge" || &headers[1] != "mass" {
        return Err(Error::config(
            "histogram_csv",
            format!(
                "expected header `bin_upper_edge,mass`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let (mut edges, mut masses) = (Vec::new(), Vec::new());
    for (line, row) in reader.records().enumerate() {
        let row = row?;
        let parse = |i: usize| -> Result<f64> {
            row.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| {
                    Error::config("histogram_csv", format!("row {}: bad number", line + 1))
                })
        };
        edges.push(parse(0)?);
        masses.push(parse(1)?);
    }
    Ok((edges, masses))
}

fn parse_kinematics(k: RawKinematics) -> Result<KinematicSpec> {
    let d = KinematicSpec::default();
    let spec = KinematicSpec {
        translation_scale_mm: positive(
            k.translation_scale_mm.unwrap_or(d.translation_scale_mm),
            "kinematics.translation_scale_mm",
        )?,
        rotation_scale_rad: positive(
            k.rotation_scale_rad.unwrap_or(d.rotation_scale_rad),
            "kinematics.rotation_scale_rad",
        )?,
        failure_cutoff: {
            let v = k.failure_cutoff.unwrap_or(d.failure_cutoff);
            check(
                v > 0.0 && v < 1.0,
                "kinematics.failure_cutoff",
                v,
                "the (0, 1) constraint",
            )?;
            v
        },
        start_offset_mm: {
            let v = k.start_offset_mm.unwrap_or(d.start_offset_mm);
            check(
                v.iter().all(|x| x.is_finite()),
                "kinematics.start_offset_mm",
                format!("{v:?}"),
                "finiteness",
            )?;
            v
        },
        start_translation_sd_mm: nonneg(
            k.start_translation_sd_mm
                .unwrap_or(d.start_translation_sd_mm),
            "kinematics.start_translation_sd_mm",
        )?,
        start_rotation_sd_rad: nonneg(
            k.start_rotation_sd_rad.unwrap_or(d.start_rotation_sd_rad),
            "kinematics.start_rotation_sd_rad",
        )?,
        gain: {
            let v = k.gain.unwrap_or(d.gain);
            check(
                v > 0.0 && v <= 1.0,
                "kinematics.gain",
                v,
                "the (0, 1] constraint",
            )?;
            v
        },
        motor_noise_t_mm: nonneg(
            k.motor_noise_t_mm.unwrap_or(d.motor_noise_t_mm),
            "kinematics.motor_noise_t_mm",
        )?,
        motor_noise_r_rad: nonneg(
            k.motor_noise_r_rad.unwrap_or(d.motor_noise_r_rad),
            "kinematics.motor_noise_r_rad",
        )?,
        guidance_noise_t_mm: nonneg(
            k.guidance_noise_t_mm.unwrap_or(d.guidance_noise_t_mm),
            "kinematics.guidance_noise_t_mm",
        )?,
        guidance_noise_r_rad: nonneg(
            k.guidance_noise_r_rad.unwrap_or(d.guidance_noise_r_rad),
            "kinematics.guidance_noise_r_rad",
        )?,
    };
    Ok(spec)
}

impl ExperimentConfig {
    /// Every result-affecting key, defaults included, as a JSON object.
    /// Execution-only keys (`cohort.workers`, `output.dir`) are left out so
    /// reports do not depend on them.
    pub fn echo(&self) -> Value {
        let predictor = match self.predictor {
            PredictorSpec::Confusion(p) => json!({
                "kind": "confusion",
                "precision": p.precision(),
                "recall": p.recall(),
            }),
            PredictorSpec::Score(s) => json!({
                "kind": "score",
                "noise_scale": s.noise_scale(),
            }),
        };
        json!({
            "cohort": {
                "mode": self.mode.as_str(),
                "subjects": self.subjects,
                "seed": self.seed,
            },
            "distribution": self.distribution,
            "predictor": predictor,
            "costs": {
                "rescan_cost": self.rates.rescan_cost(),
                "correction_cost": self.rates.correction_cost(),
            },
            "policy": {
                "max_rescans": self.policy.max_rescans,
                "threshold": self.policy.quality_threshold,
                "threshold_grid": self.threshold_grid,
            },
            "kinematics": self.kinematics,
        })
    }

    /// SHA-256 of the canonical echo without the seed. Keys are emitted in
    /// sorted order, so the digest ignores key order in the source document.
    pub fn digest(&self) -> String {
        let mut echo = self.echo();
        if let Some(cohort) = echo.get_mut("cohort").and_then(Value::as_object_mut) {
            cohort.remove("seed");
        }
        let canonical = serde_json::to_string(&echo).expect("json values serialize");
        let hash = Sha256::digest(canonical.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn manifest(&self) -> RunManifest {
        RunManifest {
            master_seed: self.seed,
            config_digest: self.digest(),
            artifact_version: ARTIFACT_VERSION.to_string(),
            timestamp: std::env::var("SOURCE_DATE_EPOCH").ok(),
        }
    }

    pub fn profile(&self) -> Result<PredictorProfile> {
        match self.predictor {
            PredictorSpec::Confusion(p) => Ok(p),
            PredictorSpec::Score(_) => Err(Error::config(
                "predictor.kind",
                "this command needs kind = \"confusion\" with precision and recall",
            )),
        }
    }

    pub fn score_predictor(&self) -> Result<ScorePredictor> {
        match self.predictor {
            PredictorSpec::Score(s) => Ok(s),
            PredictorSpec::Confusion(_) => Err(Error::config(
                "predictor.kind",
                "this command needs kind = \"score\"",
            )),
        }
    }

    pub fn require_distribution(&self) -> Result<&FailureDistribution> {
        self.distribution.as_ref().ok_or_else(|| {
            Error::config(
                "distribution",
                "this command needs a [distribution] section",
            )
        })
    }
}

/// Provenance block attached to every report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub master_seed: u64,
    pub config_digest: String,
    pub artifact_version: String,
    /// Taken from `SOURCE_DATE_EPOCH` when set; absent otherwise so that
    /// repeated runs produce identical files.
    pub timestamp: Option<String>,
}
