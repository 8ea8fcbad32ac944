//! Population models for the per-subject failure probability α and the
//! population-averaged cost integrals
//!
//! ```text
//! C     = c_c · ∫ α f(α) dα
//! C'/C  = ∫ α f(α) h(α) dα / ∫ α f(α) dα
//! ```
//!
//! evaluated by adaptive quadrature, with a sampling estimator alongside for
//! cross-checks.

use rand::Rng;
use rand_distr::{Beta as BetaSampler, Distribution};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::ln_beta;

use crate::cost_model::{ratio_unchecked, CostRatio, FailureRate, PredictorProfile};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureSpec};

/// Largest representable value strictly below one.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// Density `f(α)` of the per-subject failure probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FailureDistribution {
    PointMass {
        alpha: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Beta(a, b) on the open interval (0, 1).
    Beta {
        a: f64,
        b: f64,
    },
    /// Normal(mean, sd) restricted to `[lo, hi]`.
    TruncatedNormal {
        mean: f64,
        sd: f64,
        lo: f64,
        hi: f64,
    },
    /// Piecewise-constant density; bin `i` spans
    /// `[upper_edges[i-1], upper_edges[i])` with the first bin starting at 0.
    Histogram {
        upper_edges: Vec<f64>,
        masses: Vec<f64>,
    },
}

fn invalid(name: &'static str, value: f64, constraint: &'static str) -> Error {
    Error::InvalidParameter {
        name,
        value,
        constraint,
    }
}

impl FailureDistribution {
    pub fn point_mass(alpha: f64) -> Result<Self> {
        FailureRate::new(alpha)?;
        Ok(Self::PointMass { alpha })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0) {
            return Err(invalid("uniform.lo", lo, ">= 0"));
        }
        if !(hi < 1.0) {
            return Err(invalid("uniform.hi", hi, "< 1"));
        }
        if !(lo < hi) {
            return Err(invalid("uniform.hi", hi, "> uniform.lo"));
        }
        Ok(Self::Uniform { lo, hi })
    }

    pub fn beta(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(invalid("beta.a", a, "finite and > 0"));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(invalid("beta.b", b, "finite and > 0"));
        }
        Ok(Self::Beta { a, b })
    }

    pub fn truncated_normal(mean: f64, sd: f64, lo: f64, hi: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(invalid("truncated_normal.mean", mean, "finite"));
        }
        if !(sd > 0.0 && sd.is_finite()) {
            return Err(invalid("truncated_normal.sd", sd, "finite and > 0"));
        }
        if !(lo >= 0.0) {
            return Err(invalid("truncated_normal.lo", lo, ">= 0"));
        }
        if !(hi < 1.0) {
            return Err(invalid("truncated_normal.hi", hi, "< 1"));
        }
        if !(lo < hi) {
            return Err(invalid("truncated_normal.hi", hi, "> truncated_normal.lo"));
        }
        let dist = Self::TruncatedNormal { mean, sd, lo, hi };
        if !(dist.normal_mass() > 0.0) {
            return Err(invalid(
                "truncated_normal.mean",
                mean,
                "nonzero probability mass inside [lo, hi]",
            ));
        }
        Ok(dist)
    }

    /// Builds a histogram from bin upper edges and bin masses. Masses must
    /// be nonnegative and sum to one within 1e-6; they are rescaled to sum
    /// to one exactly.
    pub fn histogram(upper_edges: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if upper_edges.is_empty() || upper_edges.len() != masses.len() {
            return Err(invalid(
                "histogram.bins",
                upper_edges.len() as f64,
                "at least one bin and one mass per edge",
            ));
        }
        let mut prev = 0.0;
        for &edge in &upper_edges {
            if !(edge > prev) {
                return Err(invalid(
                    "histogram.bin_upper_edge",
                    edge,
                    "strictly increasing and > 0",
                ));
            }
            prev = edge;
        }
        if !(prev < 1.0) {
            return Err(invalid("histogram.bin_upper_edge", prev, "< 1"));
        }
        if let Some(&m) = masses.iter().find(|m| !(**m >= 0.0 && m.is_finite())) {
            return Err(invalid("histogram.mass", m, "finite and >= 0"));
        }
        let total: f64 = masses.iter().sum();
        if !((total - 1.0).abs() <= 1e-6) {
            return Err(invalid("histogram.mass", total, "masses summing to 1"));
        }
        let masses = masses.into_iter().map(|m| m / total).collect();
        Ok(Self::Histogram {
            upper_edges,
            masses,
        })
    }

    /// Re-runs the constructor checks (used after deserialization).
    pub fn validated(self) -> Result<Self> {
        match self {
            Self::PointMass { alpha } => Self::point_mass(alpha),
            Self::Uniform { lo, hi } => Self::uniform(lo, hi),
            Self::Beta { a, b } => Self::beta(a, b),
            Self::TruncatedNormal { mean, sd, lo, hi } => Self::truncated_normal(mean, sd, lo, hi),
            Self::Histogram {
                upper_edges,
                masses,
            } => Self::histogram(upper_edges, masses),
        }
    }

    /// Closure of the support, `(lo, hi)`.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Self::PointMass { alpha } => (*alpha, *alpha),
            Self::Uniform { lo, hi } | Self::TruncatedNormal { lo, hi, .. } => (*lo, *hi),
            Self::Beta { .. } => (0.0, 1.0),
            Self::Histogram { upper_edges, .. } => (0.0, *upper_edges.last().unwrap()),
        }
    }

    fn normal_mass(&self) -> f64 {
        match self {
            Self::TruncatedNormal { mean, sd, lo, hi } => {
                let n = Normal::new(*mean, *sd).expect("validated normal");
                n.cdf(*hi) - n.cdf(*lo)
            }
            _ => 1.0,
        }
    }

    /// Density at `x` (zero outside the support). Not defined for a point
    /// mass, for which this returns zero everywhere.
    pub fn density(&self, x: f64) -> f64 {
        match self {
            Self::PointMass { .. } => 0.0,
            Self::Uniform { lo, hi } => {
                if x >= *lo && x <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Self::Beta { a, b } => {
                if x > 0.0 && x < 1.0 {
                    ((a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta(*a, *b)).exp()
                } else {
                    0.0
                }
            }
            Self::TruncatedNormal { mean, sd, lo, hi } => {
                if x >= *lo && x <= *hi {
                    let z = (x - mean) / sd;
                    (-0.5 * z * z).exp()
                        / (sd * (2.0 * std::f64::consts::PI).sqrt() * self.normal_mass())
                } else {
                    0.0
                }
            }
            Self::Histogram {
                upper_edges,
                masses,
            } => {
                if x < 0.0 {
                    return 0.0;
                }
                let i = upper_edges.partition_point(|&e| e <= x);
                if i >= masses.len() {
                    return 0.0;
                }
                let lower = if i == 0 { 0.0 } else { upper_edges[i - 1] };
                masses[i] / (upper_edges[i] - lower)
            }
        }
    }

    /// `∫ g(α) f(α) dα` over the support. `extra_breaks` are added to the
    /// family's own panel boundaries.
    pub fn expectation<G: Fn(f64) -> f64>(
        &self,
        g: G,
        extra_breaks: &[f64],
        quad: &QuadratureSpec,
    ) -> Result<f64> {
        match self {
            Self::PointMass { alpha } => Ok(g(*alpha)),
            Self::Uniform { lo, hi } => {
                let width = hi - lo;
                integrate(|x| g(x) / width, *lo, *hi, extra_breaks, quad).map(|i| i.value)
            }
            Self::TruncatedNormal { mean, sd, lo, hi } => {
                let mut breaks: Vec<f64> = [-4.0, -1.0, 0.0, 1.0, 4.0]
                    .iter()
                    .map(|k| mean + k * sd)
                    .collect();
                breaks.extend_from_slice(extra_breaks);
                integrate(|x| g(x) * self.density(x), *lo, *hi, &breaks, quad).map(|i| i.value)
            }
            Self::Histogram { upper_edges, .. } => {
                let mut breaks = upper_edges.clone();
                breaks.extend_from_slice(extra_breaks);
                let hi = *upper_edges.last().unwrap();
                integrate(|x| g(x) * self.density(x), 0.0, hi, &breaks, quad).map(|i| i.value)
            }
            Self::Beta { a, b } => beta_expectation(&g, *a, *b, extra_breaks, quad),
        }
    }

    /// `∫ α f(α) dα`.
    pub fn mean_alpha(&self, quad: &QuadratureSpec) -> Result<f64> {
        self.expectation(|x| x, &[], quad)
    }

    /// Population cost ratio `∫ α f h / ∫ α f`.
    pub fn expected_cost_ratio(
        &self,
        profile: &PredictorProfile,
        cost_quotient: f64,
        quad: &QuadratureSpec,
    ) -> Result<CostRatio> {
        if !(cost_quotient >= 0.0 && cost_quotient.is_finite()) {
            return Err(invalid("cost_quotient", cost_quotient, "finite and >= 0"));
        }
        self.check_support(profile)?;
        if let Self::PointMass { alpha } = self {
            if *alpha == 0.0 {
                return Err(Error::UndefinedRatio);
            }
            return Ok(CostRatio::from_ratio(ratio_unchecked(
                *alpha,
                profile,
                cost_quotient,
            )));
        }
        let mean = self.mean_alpha(quad)?;
        if !(mean > 0.0) {
            return Err(Error::UndefinedRatio);
        }
        if profile.recall() == 0.0 {
            return Ok(CostRatio::from_ratio(1.0));
        }
        let breaks = self.pole_breaks(profile.pole());
        let weighted = self.expectation(
            |x| x * ratio_unchecked(x, profile, cost_quotient),
            &breaks,
            quad,
        )?;
        Ok(CostRatio::from_ratio(weighted / mean))
    }

    /// Fails when `α·r` can reach `p` on the support.
    pub fn check_support(&self, profile: &PredictorProfile) -> Result<()> {
        let pole = profile.pole();
        let (_, upper) = self.support();
        let violated = match self {
            // open at 1: a pole exactly at 1 is integrable only when the
            // density vanishes there faster than linearly
            Self::Beta { b, .. } => pole < 1.0 || (pole == 1.0 && *b <= 1.0),
            _ => upper >= pole,
        };
        if violated {
            Err(Error::SupportViolation { upper, pole })
        } else {
            Ok(())
        }
    }

    /// Panel boundaries accumulating geometrically towards the support's
    /// upper end when the pole sits just beyond it.
    fn pole_breaks(&self, pole: f64) -> Vec<f64> {
        let (lo, hi) = self.support();
        if !pole.is_finite() || pole <= hi {
            return Vec::new();
        }
        let gap = pole - hi;
        (0..30)
            .map(|k| hi - gap * f64::powi(2.0, k))
            .take_while(|&x| x > lo)
            .collect()
    }

    /// Draws one α; deterministic given the stream state.
    pub fn sample_alpha<R: Rng + ?Sized>(&self, rng: &mut R) -> FailureRate {
        let x = match self {
            Self::PointMass { alpha } => *alpha,
            Self::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Self::Beta { a, b } => {
                let s = BetaSampler::new(*a, *b).expect("validated beta");
                s.sample(rng)
            }
            Self::TruncatedNormal { mean, sd, lo, hi } => {
                let n = Normal::new(*mean, *sd).expect("validated normal");
                let (cl, ch) = (n.cdf(*lo), n.cdf(*hi));
                let u = cl + (ch - cl) * rng.random::<f64>();
                n.inverse_cdf(u).clamp(*lo, *hi)
            }
            Self::Histogram {
                upper_edges,
                masses,
            } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut bin = masses.len() - 1;
                for (i, m) in masses.iter().enumerate() {
                    acc += m;
                    if u < acc {
                        bin = i;
                        break;
                    }
                }
                let lower = if bin == 0 { 0.0 } else { upper_edges[bin - 1] };
                lower + (upper_edges[bin] - lower) * rng.random::<f64>()
            }
        };
        FailureRate::new(x.clamp(0.0, BELOW_ONE)).expect("clamped into [0, 1)")
    }
}

fn beta_expectation<G: Fn(f64) -> f64>(
    g: &G,
    a: f64,
    b: f64,
    extra_breaks: &[f64],
    quad: &QuadratureSpec,
) -> Result<f64> {
    let ln_norm = ln_beta(a, b);
    let dens = |x: f64| ((a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_norm).exp();
    // a vanishing density wins over a pole of g at the open end
    let weighted = |x: f64| match dens(x) {
        0.0 => 0.0,
        d => g(x) * d,
    };
    let left_breaks: Vec<f64> = extra_breaks.iter().copied().filter(|&x| x < 0.5).collect();
    let right_breaks: Vec<f64> = extra_breaks.iter().copied().filter(|&x| x > 0.5).collect();

    // x^(a-1) dx = du / a with u = x^a removes an endpoint singularity at 0
    let left = if a < 1.0 {
        let coef = (-ln_norm).exp() / a;
        let breaks: Vec<f64> = left_breaks.iter().map(|x| x.powf(a)).collect();
        integrate(
            |u: f64| {
                let x = u.powf(1.0 / a);
                coef * g(x) * (1.0 - x).powf(b - 1.0)
            },
            0.0,
            0.5f64.powf(a),
            &breaks,
            quad,
        )?
    } else {
        integrate(weighted, 0.0, 0.5, &left_breaks, quad)?
    };
    // likewise (1-x)^(b-1) dx = dv / b with v = (1-x)^b at the upper end
    let right = if b < 1.0 {
        let coef = (-ln_norm).exp() / b;
        let breaks: Vec<f64> = right_breaks.iter().map(|x| (1.0 - x).powf(b)).collect();
        integrate(
            |v: f64| {
                let x = 1.0 - v.powf(1.0 / b);
                coef * g(x) * x.powf(a - 1.0)
            },
            0.0,
            0.5f64.powf(b),
            &breaks,
            quad,
        )?
    } else {
        integrate(weighted, 0.5, 1.0, &right_breaks, quad)?
    };
    Ok(left.value + right.value)
}

/// Sampling estimate of a population cost ratio with its delta-method
/// standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampledRatio {
    pub ratio: f64,
    pub standard_error: f64,
    pub samples: usize,
}

/// Estimates `E[α h(α)] / E[α]` from `samples` draws of α.
pub fn sampled_cost_ratio<R: Rng + ?Sized>(
    dist: &FailureDistribution,
    profile: &PredictorProfile,
    cost_quotient: f64,
    samples: usize,
    rng: &mut R,
) -> Result<SampledRatio> {
    dist.check_support(profile)?;
    let n = samples as f64;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..samples {
        let a = dist.sample_alpha(rng).value();
        // numerator sample α·h(α), denominator sample α
        let x = a * ratio_unchecked(a, profile, cost_quotient);
        let y = a;
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    let (mx, my) = (sx / n, sy / n);
    if !(my > 0.0) {
        return Err(Error::UndefinedRatio);
    }
    let ratio = mx / my;
    let vx = sxx / n - mx * mx;
    let vy = syy / n - my * my;
    let cxy = sxy / n - mx * my;
    let var = ((vx - 2.0 * ratio * cxy + ratio * ratio * vy) / (my * my)).max(0.0);
    Ok(SampledRatio {
        ratio,
        standard_error: (var / (n - 1.0).max(1.0)).sqrt(),
        samples,
    })
}
