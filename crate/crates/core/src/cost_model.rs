//! Closed-form expected cost of a threshold-gated re-scan loop at a single
//! failure probability α.
//!
//! A subject's scan fails (needs manual correction, cost `c_c`) with
//! probability α. A quality predictor with precision `p` and recall `r` flags
//! scans; each flagged scan is re-acquired at cost `c_s` and judged again.
//! The expected cost `C'` obeys the recursion
//!
//! ```text
//! C' = α(1 − r)·c_c + (α·r / p)·(c_s + C')
//! ```
//!
//! whose fixed point is `C' = α·(p·c_c − p·r·c_c + r·c_s) / (p − α·r)`.
//! Without the predictor the expected cost is `C = α·c_c`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Operating point of the quality predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorProfile {
    precision: f64,
    recall: f64,
}

impl PredictorProfile {
    pub fn new(precision: f64, recall: f64) -> Result<Self> {
        if !(precision > 0.0 && precision <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "precision",
                value: precision,
                constraint: "0 < precision <= 1",
            });
        }
        if !(0.0..=1.0).contains(&recall) {
            return Err(Error::InvalidParameter {
                name: "recall",
                value: recall,
                constraint: "0 <= recall <= 1",
            });
        }
        Ok(Self { precision, recall })
    }

    pub fn precision(&self) -> f64 {
        self.precision
    }

    pub fn recall(&self) -> f64 {
        self.recall
    }

    /// Largest α for which the loop still has a finite expected cost
    /// (`p / r`, infinite when the predictor never flags).
    pub fn pole(&self) -> f64 {
        if self.recall == 0.0 {
            f64::INFINITY
        } else {
            self.precision / self.recall
        }
    }
}

/// Per-event costs in abstract cost units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostRates {
    rescan_cost: f64,
    correction_cost: f64,
}

impl CostRates {
    pub fn new(rescan_cost: f64, correction_cost: f64) -> Result<Self> {
        if !(rescan_cost >= 0.0 && rescan_cost.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "rescan_cost",
                value: rescan_cost,
                constraint: "finite and >= 0",
            });
        }
        if !(correction_cost > 0.0 && correction_cost.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "correction_cost",
                value: correction_cost,
                constraint: "finite and > 0",
            });
        }
        Ok(Self {
            rescan_cost,
            correction_cost,
        })
    }

    pub fn rescan_cost(&self) -> f64 {
        self.rescan_cost
    }

    pub fn correction_cost(&self) -> f64 {
        self.correction_cost
    }

    /// `c_s / c_c`.
    pub fn quotient(&self) -> f64 {
        self.rescan_cost / self.correction_cost
    }
}

/// Per-subject probability that a scan's segmentation fails, in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FailureRate(f64);

impl FailureRate {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: alpha,
                constraint: "0 <= alpha < 1",
            });
        }
        Ok(Self(alpha))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// New-to-original cost ratio together with the implied reduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostRatio {
    pub ratio: f64,
    pub reduction: f64,
}

impl CostRatio {
    pub fn from_ratio(ratio: f64) -> Self {
        Self {
            ratio,
            reduction: 1.0 - ratio,
        }
    }
}

/// Minimum precision at which flagging pays off, `α + c_s/c_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakevenBound {
    pub bound: f64,
    /// `false` when the bound is at least 1, i.e. no realizable precision
    /// lowers the expected cost.
    pub feasible: bool,
}

fn check_quotient(cost_quotient: f64) -> Result<()> {
    if cost_quotient >= 0.0 && cost_quotient.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "cost_quotient",
            value: cost_quotient,
            constraint: "finite and >= 0",
        })
    }
}

fn check_convergent(alpha: FailureRate, profile: &PredictorProfile) -> Result<()> {
    let (a, p, r) = (alpha.value(), profile.precision, profile.recall);
    if p > a * r {
        Ok(())
    } else {
        Err(Error::DivergentLoop {
            alpha: a,
            precision: p,
            recall: r,
        })
    }
}

/// Expected correction cost without a predictor, `α·c_c`.
pub fn original_cost_at(alpha: FailureRate, rates: &CostRates) -> f64 {
    alpha.value() * rates.correction_cost
}

/// Expected cost of the re-scan loop at a fixed α.
pub fn new_cost_at(
    alpha: FailureRate,
    profile: &PredictorProfile,
    rates: &CostRates,
) -> Result<f64> {
    check_convergent(alpha, profile)?;
    let (a, p, r) = (alpha.value(), profile.precision, profile.recall);
    let (cs, cc) = (rates.rescan_cost, rates.correction_cost);
    Ok((p * a * cc - p * a * r * cc + a * r * cs) / (p - a * r))
}

/// Right-hand side of the cost recursion evaluated at `candidate`.
///
/// The closed form returned by [`new_cost_at`] is its unique fixed point.
pub fn cost_recursion_rhs(
    candidate: f64,
    alpha: FailureRate,
    profile: &PredictorProfile,
    rates: &CostRates,
) -> f64 {
    let (a, p, r) = (alpha.value(), profile.precision, profile.recall);
    a * (1.0 - r) * rates.correction_cost + (a * r / p) * (rates.rescan_cost + candidate)
}

/// Ratio `h(α) = C'_α / C_α = (p − p·r + r·c_s/c_c) / (p − α·r)`.
///
/// Evaluated as `1 + r·(α + c_s/c_c − p) / (p − α·r)`, which is the same
/// quantity but keeps the sign of `ratio − 1` tied exactly to the break-even
/// comparison `p > α + c_s/c_c` in floating point.
pub fn cost_ratio_at(
    alpha: FailureRate,
    profile: &PredictorProfile,
    cost_quotient: f64,
) -> Result<CostRatio> {
    check_quotient(cost_quotient)?;
    if alpha.value() == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    check_convergent(alpha, profile)?;
    Ok(CostRatio::from_ratio(ratio_unchecked(
        alpha.value(),
        profile,
        cost_quotient,
    )))
}

/// `h(α)` without validation; callers guarantee `p > α·r`.
pub(crate) fn ratio_unchecked(alpha: f64, profile: &PredictorProfile, cost_quotient: f64) -> f64 {
    let (p, r) = (profile.precision, profile.recall);
    let bound = alpha + cost_quotient;
    1.0 + r * (bound - p) / (p - alpha * r)
}

pub fn breakeven_precision(alpha: FailureRate, cost_quotient: f64) -> Result<BreakevenBound> {
    check_quotient(cost_quotient)?;
    let bound = alpha.value() + cost_quotient;
    Ok(BreakevenBound {
        bound,
        feasible: bound < 1.0,
    })
}

/// One parameter column of a cost-reduction table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub alpha: f64,
    pub cost_quotient: f64,
    pub precision: f64,
    pub recall: f64,
}

impl TableRow {
    pub const fn new(alpha: f64, cost_quotient: f64, precision: f64, recall: f64) -> Self {
        Self {
            alpha,
            cost_quotient,
            precision,
            recall,
        }
    }

    pub fn evaluate(&self) -> Result<CostRatio> {
        let alpha = FailureRate::new(self.alpha)?;
        let profile = PredictorProfile::new(self.precision, self.recall)?;
        cost_ratio_at(alpha, &profile, self.cost_quotient)
    }
}

/// The six published parameter columns together with their printed
/// reductions in percent.
pub const PUBLISHED_TABLE: [(TableRow, f64); 6] = [
    (TableRow::new(0.2, 0.1, 0.8, 0.8), 64.0),
    (TableRow::new(0.3, 0.1, 0.8, 0.8), 57.0),
    (TableRow::new(0.2, 0.2, 0.8, 0.8), 50.0),
    (TableRow::new(0.2, 0.1, 0.6, 0.6), 37.0),
    (TableRow::new(0.2, 0.1, 0.9, 0.7), 55.0),
    (TableRow::new(0.2, 0.1, 0.7, 0.9), 69.0),
];

/// Evaluates every row in order; the first failing row is reported with its
/// index.
pub fn cost_reduction_table(rows: &[TableRow]) -> Result<Vec<CostRatio>> {
    rows.iter()
        .enumerate()
        .map(|(index, row)| {
            row.evaluate().map_err(|e| Error::Row {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}
