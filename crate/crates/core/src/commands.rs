//! Experiment commands. Each returns an in-memory artifact that can be
//! rendered for the console and serialized into report files.

use serde::{Deserialize, Serialize};

use crate::acquisition::{run_cohort, Estimate, SimulationReport, SubjectRecord};
use crate::alpha_distributions::FailureDistribution;
use crate::config::{ExperimentConfig, Mode, RunManifest};
use crate::cost_model::{
    breakeven_precision, cost_reduction_table, FailureRate, PredictorProfile, TableRow,
    PUBLISHED_TABLE,
};
use crate::error::Result;
use crate::predictor::Confusion;
use crate::quadrature::QuadratureSpec;
use crate::report::{fmt_num, fmt_opt, to_json, CsvTable, OutputSet};

/// Deltas beyond this many percentage points are flagged.
pub const TABLE_DELTA_FLAG_POINTS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub alpha: f64,
    pub cost_quotient: f64,
    pub precision: f64,
    pub recall: f64,
    pub ratio: f64,
    pub reduction_pct: f64,
    pub published_pct: f64,
    pub delta_pct: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1 {
    pub rows: Vec<Table1Row>,
}

pub const TABLE1_COLUMNS: [&str; 9] = [
    "alpha",
    "cost_quotient",
    "precision",
    "recall",
    "ratio",
    "reduction_pct",
    "published_pct",
    "delta_pct",
    "flagged",
];

/// Evaluates the six published parameter columns.
pub fn table1() -> Table1 {
    let rows: Vec<TableRow> = PUBLISHED_TABLE.iter().map(|(r, _)| *r).collect();
    let ratios = cost_reduction_table(&rows).expect("published rows are valid");
    let rows = PUBLISHED_TABLE
        .iter()
        .zip(ratios)
        .map(|((row, published), ratio)| {
            let reduction_pct = 100.0 * ratio.reduction;
            let delta_pct = reduction_pct - published;
            Table1Row {
                alpha: row.alpha,
                cost_quotient: row.cost_quotient,
                precision: row.precision,
                recall: row.recall,
                ratio: ratio.ratio,
                reduction_pct,
                published_pct: *published,
                delta_pct,
                flagged: delta_pct.abs() > TABLE_DELTA_FLAG_POINTS,
            }
        })
        .collect();
    Table1 { rows }
}

impl Table1 {
    pub fn to_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&TABLE1_COLUMNS);
        for r in &self.rows {
            t.push(vec![
                fmt_num(r.alpha),
                fmt_num(r.cost_quotient),
                fmt_num(r.precision),
                fmt_num(r.recall),
                fmt_num(r.ratio),
                fmt_num(r.reduction_pct),
                fmt_num(r.published_pct),
                fmt_num(r.delta_pct),
                r.flagged.to_string(),
            ]);
        }
        t
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "{:>6} {:>8} {:>9} {:>6} {:>10} {:>10} {:>8}\n",
            "alpha", "cs/cc", "precision", "recall", "reduction", "published", "delta"
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{:>6.2} {:>8.2} {:>9.2} {:>6.2} {:>9.1}% {:>9.0}% {:>+7.1}{}\n",
                r.alpha,
                r.cost_quotient,
                r.precision,
                r.recall,
                r.reduction_pct,
                r.published_pct,
                r.delta_pct,
                if r.flagged {
                    "  <- differs from printed value"
                } else {
                    ""
                }
            ));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub manifest: RunManifest,
    pub config: serde_json::Value,
    pub mean_alpha: f64,
    /// Expected cost without the predictor.
    pub original_cost: f64,
    pub new_cost: f64,
    pub ratio: f64,
    pub reduction: f64,
    /// `E[α] + c_s/c_c`.
    pub breakeven_precision_at_mean_alpha: f64,
    /// `max α + c_s/c_c`.
    pub breakeven_precision_at_support_max: f64,
    /// Some realizable precision lowers cost at the mean α.
    pub breakeven_feasible: bool,
    /// The configured precision lowers cost for every α in the support.
    pub reduces_cost_everywhere: bool,
    /// The population ratio is below one.
    pub reduces_cost_on_average: bool,
    pub notes: Vec<String>,
}

pub fn ratio(cfg: &ExperimentConfig) -> Result<RatioReport> {
    let dist = cfg.require_distribution()?;
    let profile = cfg.profile()?;
    let quad = QuadratureSpec::default();
    let q = cfg.rates.quotient();
    let r = dist.expected_cost_ratio(&profile, q, &quad)?;
    let mean_alpha = dist.mean_alpha(&quad)?;
    let original = cfg.rates.correction_cost() * mean_alpha;
    let (_, hi) = dist.support();
    let at_mean = breakeven_precision(FailureRate::new(mean_alpha)?, q)?;
    let at_max = hi + q;
    let mut notes = Vec::new();
    if profile.recall() == 0.0 {
        notes.push("predictor never flags: recall is 0, so costs are unchanged".to_string());
    }
    if !at_mean.feasible {
        notes.push(
            "break-even precision at the mean alpha is >= 1: no precision can reduce cost".into(),
        );
    }
    Ok(RatioReport {
        manifest: cfg.manifest(),
        config: cfg.echo(),
        mean_alpha,
        original_cost: original,
        new_cost: original * r.ratio,
        ratio: r.ratio,
        reduction: r.reduction,
        breakeven_precision_at_mean_alpha: at_mean.bound,
        breakeven_precision_at_support_max: at_max,
        breakeven_feasible: at_mean.feasible,
        reduces_cost_everywhere: profile.recall() > 0.0 && profile.precision() > at_max,
        reduces_cost_on_average: r.ratio < 1.0,
        notes,
    })
}

impl RatioReport {
    pub fn render(&self) -> String {
        let mut s = format!(
            "C  (original cost) = {}\nC' (new cost)      = {}\nC'/C               = {}\nreduction          = {:.1}%\n\
             break-even precision at mean alpha = {} (feasible: {})\n\
             break-even precision at support max = {}\n\
             reduces cost everywhere: {}  on average: {}\n",
            fmt_num(self.original_cost),
            fmt_num(self.new_cost),
            fmt_num(self.ratio),
            100.0 * self.reduction,
            fmt_num(self.breakeven_precision_at_mean_alpha),
            self.breakeven_feasible,
            fmt_num(self.breakeven_precision_at_support_max),
            self.reduces_cost_everywhere,
            self.reduces_cost_on_average,
        );
        for n in &self.notes {
            s.push_str(&format!("note: {n}\n"));
        }
        s
    }
}

pub const SUBJECT_COLUMNS: [&str; 18] = [
    "subject",
    "alpha",
    "initial_translation_error_mm",
    "initial_rotation_error_rad",
    "scans",
    "rescans",
    "accepted",
    "final_true_fail",
    "correction_paid",
    "cost",
    "first_scan_failed",
    "first_scan_flagged",
    "true_positive",
    "false_positive",
    "false_negative",
    "true_negative",
    "saturated",
    "final_quality",
];

pub fn subject_table(records: &[SubjectRecord]) -> CsvTable {
    let mut t = CsvTable::new(&SUBJECT_COLUMNS);
    for r in records {
        let c = &r.confusion;
        t.push(vec![
            r.subject.to_string(),
            fmt_opt(r.alpha),
            fmt_opt(r.initial_translation_error_mm),
            fmt_opt(r.initial_rotation_error_rad),
            r.scans.to_string(),
            r.rescans.to_string(),
            r.accepted.to_string(),
            r.final_true_fail.to_string(),
            r.correction_paid.to_string(),
            fmt_num(r.cost),
            r.first_scan_failed.to_string(),
            r.first_scan_flagged.to_string(),
            c.true_positive.to_string(),
            c.false_positive.to_string(),
            c.false_negative.to_string(),
            c.true_negative.to_string(),
            r.saturated.to_string(),
            fmt_opt(r.trajectory.last().copied()),
        ]);
    }
    t
}

/// Runs the cohort and stages `report.json` and `subjects.csv`.
pub fn simulate(cfg: &ExperimentConfig) -> Result<(SimulationReport, OutputSet)> {
    let report = run_cohort(cfg)?;
    let mut out = OutputSet::new();
    out.add("report.json", to_json(&report));
    out.add(
        "subjects.csv",
        subject_table(&report.records).to_csv(Some(&report.manifest))?,
    );
    Ok((report, out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    /// First-scan operating point.
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub flag_rate: f64,
    /// Closed-form ratio with the empirical operating point plugged in.
    pub plugin_ratio: Option<f64>,
    pub simulated_mean_cost: Option<f64>,
    pub simulated_cost_ratio: Option<f64>,
    pub mean_rescans: Option<f64>,
    pub simulated_optimal: bool,
    pub plugin_optimal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub manifest: RunManifest,
    pub config: serde_json::Value,
    /// Failure fraction of initial scans, identical for every threshold.
    pub first_scan_failure_fraction: Option<f64>,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn simulated_optimum(&self) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.simulated_optimal)
    }

    pub fn plugin_optimum(&self) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.plugin_optimal)
    }

    pub fn to_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&[
            "threshold",
            "precision",
            "recall",
            "flag_rate",
            "plugin_ratio",
            "simulated_mean_cost",
            "simulated_cost_ratio",
            "mean_rescans",
            "simulated_optimal",
            "plugin_optimal",
        ]);
        for r in &self.rows {
            t.push(vec![
                fmt_num(r.threshold),
                fmt_opt(r.precision),
                fmt_opt(r.recall),
                fmt_num(r.flag_rate),
                fmt_opt(r.plugin_ratio),
                fmt_opt(r.simulated_mean_cost),
                fmt_opt(r.simulated_cost_ratio),
                fmt_opt(r.mean_rescans),
                r.simulated_optimal.to_string(),
                r.plugin_optimal.to_string(),
            ]);
        }
        t
    }
}

fn argmin(values: impl Iterator<Item = Option<f64>>) -> Option<usize> {
    values
        .enumerate()
        .filter_map(|(i, v)| v.filter(|x| x.is_finite()).map(|x| (i, x)))
        .fold(None, |best: Option<(usize, f64)>, (i, x)| match best {
            Some((_, b)) if b <= x => best,
            _ => Some((i, x)),
        })
        .map(|(i, _)| i)
}

/// Re-runs the cohort at every threshold of the grid with common random
/// numbers and compares simulated cost with the plug-in closed form.
pub fn sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    let base = cfg.score_predictor()?;
    let q = cfg.rates.quotient();
    let quad = QuadratureSpec::default();
    let mut rows = Vec::with_capacity(cfg.threshold_grid.len());
    let mut failure_fraction = None;
    for &tau in &cfg.threshold_grid {
        let mut c = cfg.clone();
        c.predictor = crate::config::PredictorSpec::Score(base.with_threshold(tau));
        c.policy.quality_threshold = Some(tau);
        let rep = run_cohort(&c)?;
        let mut first = Confusion::default();
        for r in &rep.records {
            first.record(r.first_scan_failed, r.first_scan_flagged);
        }
        let n = first.total();
        if n > 0 {
            failure_fraction = Some(first.failures() as f64 / n as f64);
        }
        let plugin_dist = match cfg.mode {
            Mode::Abstract => cfg.distribution.clone(),
            Mode::Kinematic => failure_fraction
                .filter(|f| *f < 1.0)
                .and_then(|f| FailureDistribution::point_mass(f).ok()),
        };
        let plugin_ratio = match (first.precision(), first.recall(), plugin_dist) {
            (Some(p), Some(r), Some(d)) if p > 0.0 => PredictorProfile::new(p, r)
                .and_then(|prof| d.expected_cost_ratio(&prof, q, &quad))
                .ok()
                .map(|x| x.ratio),
            _ => None,
        };
        rows.push(SweepRow {
            threshold: tau,
            precision: first.precision(),
            recall: first.recall(),
            flag_rate: first.flag_rate(),
            plugin_ratio,
            simulated_mean_cost: rep.aggregates.mean_cost.map(|e| e.mean),
            simulated_cost_ratio: rep.aggregates.empirical_cost_ratio.map(|e| e.mean),
            mean_rescans: rep.aggregates.mean_rescans,
            simulated_optimal: false,
            plugin_optimal: false,
        });
    }
    if let Some(i) = argmin(rows.iter().map(|r| r.simulated_mean_cost)) {
        rows[i].simulated_optimal = true;
    }
    if let Some(i) = argmin(rows.iter().map(|r| r.plugin_ratio)) {
        rows[i].plugin_optimal = true;
    }
    Ok(SweepReport {
        manifest: cfg.manifest(),
        config: cfg.echo(),
        first_scan_failure_fraction: failure_fraction,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceReport {
    pub manifest: RunManifest,
    pub config: serde_json::Value,
    pub subjects: u64,
    pub mean_initial_quality: Option<f64>,
    pub mean_final_quality: Option<f64>,
    /// Mean of `final − initial` quality with its standard error.
    pub improvement: Option<Estimate>,
    pub improvement_z: Option<f64>,
    /// `(scan index, mean quality)`; subjects that stopped carry their last
    /// quality forward.
    pub curve: Vec<(usize, f64)>,
    #[serde(skip)]
    pub trajectories: Vec<Vec<f64>>,
}

pub fn guidance(cfg: &ExperimentConfig) -> Result<GuidanceReport> {
    if cfg.mode != Mode::Kinematic {
        return Err(crate::error::Error::config(
            "cohort.mode",
            "guidance needs mode = \"kinematic\"",
        ));
    }
    let rep = run_cohort(cfg)?;
    let trajectories: Vec<Vec<f64>> = rep.records.into_iter().map(|r| r.trajectory).collect();
    let len = trajectories.iter().map(Vec::len).max().unwrap_or(0);
    let curve = (0..len)
        .map(|k| {
            let sum: f64 = trajectories
                .iter()
                .map(|t| t.get(k).or(t.last()).copied().unwrap_or(0.0))
                .sum();
            (k, sum / trajectories.len() as f64)
        })
        .collect();
    let improvement = Estimate::of(trajectories.iter().map(|t| t[t.len() - 1] - t[0]));
    Ok(GuidanceReport {
        manifest: rep.manifest,
        config: rep.config,
        subjects: trajectories.len() as u64,
        mean_initial_quality: rep.aggregates.mean_initial_quality,
        mean_final_quality: rep.aggregates.mean_final_quality,
        improvement_z: improvement.and_then(|e| e.z_against(0.0)),
        improvement,
        curve,
        trajectories,
    })
}

impl GuidanceReport {
    pub fn trajectory_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&["subject", "scan_index", "quality"]);
        for (s, traj) in self.trajectories.iter().enumerate() {
            for (k, q) in traj.iter().enumerate() {
                t.push(vec![s.to_string(), k.to_string(), fmt_num(*q)]);
            }
        }
        t
    }

    pub fn curve_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&["scan_index", "mean_quality"]);
        for (k, q) in &self.curve {
            t.push(vec![k.to_string(), fmt_num(*q)]);
        }
        t
    }

    pub fn outputs(&self) -> Result<OutputSet> {
        let mut out = OutputSet::new();
        out.add("guidance.json", to_json(self));
        out.add(
            "trajectories.csv",
            self.trajectory_table().to_csv(Some(&self.manifest))?,
        );
        out.add(
            "quality_curve.csv",
            self.curve_table().to_csv(Some(&self.manifest))?,
        );
        Ok(out)
    }
}
