//! C ABI over `rescan-core`.
//!
//! Every fallible function returns a [`RescanStatus`] and writes its result
//! through an out-pointer. The message of the most recent failure on the
//! calling thread is available from [`rescan_last_error`]. Objects cross the
//! boundary as opaque handles and are released with their `_free` function;
//! strings returned to the caller are released with [`rescan_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rescan_core::acquisition::SimulationReport;
use rescan_core::alpha_distributions::FailureDistribution;
use rescan_core::config::{parse_config, ExperimentConfig};
use rescan_core::cost_model::{
    breakeven_precision, cost_ratio_at, new_cost_at, CostRates, FailureRate, PredictorProfile,
};
use rescan_core::quadrature::QuadratureSpec;
use rescan_core::report::to_json;
use rescan_core::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RescanStatus {
    Ok = 0,
    /// Null pointer or non-UTF-8 string argument.
    NullArgument = 1,
    InvalidParameter = 2,
    DivergentLoop = 3,
    UndefinedRatio = 4,
    InfeasibleOperatingPoint = 5,
    SupportViolation = 6,
    QuadratureFailure = 7,
    ModeMismatch = 8,
    Config = 9,
    Io = 10,
    /// Absent value (e.g. an estimate over zero subjects).
    NoValue = 11,
    Panic = 12,
}

impl From<&Error> for RescanStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidParameter { .. } => Self::InvalidParameter,
            Error::DivergentLoop { .. } => Self::DivergentLoop,
            Error::UndefinedRatio => Self::UndefinedRatio,
            Error::Row { source, .. } => Self::from(source.as_ref()),
            Error::InfeasibleOperatingPoint { .. } => Self::InfeasibleOperatingPoint,
            Error::SupportViolation { .. } => Self::SupportViolation,
            Error::QuadratureFailure { .. } => Self::QuadratureFailure,
            Error::ModeMismatch { .. } => Self::ModeMismatch,
            Error::Config { .. } => Self::Config,
            Error::Io(_) => Self::Io,
        }
    }
}

/// Parsed experiment configuration.
pub struct RescanConfig(ExperimentConfig);

/// Population model of the failure rate.
pub struct RescanDistribution(FailureDistribution);

/// Result of a cohort simulation.
pub struct RescanReport(SimulationReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: RescanStatus, msg: impl Into<String>) -> RescanStatus {
    set_last_error(msg.into());
    status
}

fn guard<F>(f: F) -> RescanStatus
where
    F: FnOnce() -> Result<(), RescanStatus>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RescanStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(_) => fail(RescanStatus::Panic, "internal panic"),
    }
}

fn core_err(e: Error) -> RescanStatus {
    let status = RescanStatus::from(&e);
    fail(status, e.to_string())
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, RescanStatus> {
    if s.is_null() {
        return Err(fail(RescanStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(RescanStatus::NullArgument, format!("{what} is not UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), RescanStatus> {
    if out.is_null() {
        return Err(fail(RescanStatus::NullArgument, "output pointer is null"));
    }
    out.write(value);
    Ok(())
}

fn profile(precision: f64, recall: f64) -> Result<PredictorProfile, RescanStatus> {
    PredictorProfile::new(precision, recall).map_err(core_err)
}

fn alpha(a: f64) -> Result<FailureRate, RescanStatus> {
    FailureRate::new(a).map_err(core_err)
}

/// Message of the last failure on this thread, or null after a success.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn rescan_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rescan_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Expected cost of the re-scan loop at a fixed failure rate.
///
/// # Safety
/// `out` must be valid for a write of one `double`.
#[no_mangle]
pub unsafe extern "C" fn rescan_new_cost(
    alpha_value: f64,
    precision: f64,
    recall: f64,
    rescan_cost: f64,
    correction_cost: f64,
    out: *mut f64,
) -> RescanStatus {
    guard(|| {
        let rates = CostRates::new(rescan_cost, correction_cost).map_err(core_err)?;
        let c = new_cost_at(alpha(alpha_value)?, &profile(precision, recall)?, &rates)
            .map_err(core_err)?;
        write_out(out, c)
    })
}

/// New-to-original cost ratio at a fixed failure rate.
///
/// # Safety
/// `out_ratio` must be valid for a write of one `double`.
#[no_mangle]
pub unsafe extern "C" fn rescan_cost_ratio(
    alpha_value: f64,
    precision: f64,
    recall: f64,
    cost_quotient: f64,
    out_ratio: *mut f64,
) -> RescanStatus {
    guard(|| {
        let r = cost_ratio_at(
            alpha(alpha_value)?,
            &profile(precision, recall)?,
            cost_quotient,
        )
        .map_err(core_err)?;
        write_out(out_ratio, r.ratio)
    })
}

/// Minimum precision at which flagging lowers the expected cost.
/// `out_feasible` receives 0 when no precision in (0, 1] suffices.
///
/// # Safety
/// `out_bound` and `out_feasible` must be valid for one write each.
#[no_mangle]
pub unsafe extern "C" fn rescan_breakeven_precision(
    alpha_value: f64,
    cost_quotient: f64,
    out_bound: *mut f64,
    out_feasible: *mut i32,
) -> RescanStatus {
    guard(|| {
        let b = breakeven_precision(alpha(alpha_value)?, cost_quotient).map_err(core_err)?;
        if out_feasible.is_null() {
            return Err(fail(RescanStatus::NullArgument, "output pointer is null"));
        }
        write_out(out_bound, b.bound)?;
        write_out(out_feasible, i32::from(b.feasible))
    })
}

/// Builds a distribution from its JSON description, e.g.
/// `{"family": "beta", "a": 2, "b": 8}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rescan_distribution_from_json(
    json: *const c_char,
    out: *mut *mut RescanDistribution,
) -> RescanStatus {
    guard(|| {
        let text = read_str(json, "json")?;
        let dist: FailureDistribution = serde_json::from_str(text)
            .map_err(|e| fail(RescanStatus::InvalidParameter, e.to_string()))?;
        let dist = dist.validated().map_err(core_err)?;
        write_out(out, Box::into_raw(Box::new(RescanDistribution(dist))))
    })
}

/// # Safety
/// `dist` must be null or a handle from [`rescan_distribution_from_json`]
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn rescan_distribution_free(dist: *mut RescanDistribution) {
    if !dist.is_null() {
        drop(Box::from_raw(dist));
    }
}

/// Population-averaged cost ratio under `dist`.
///
/// # Safety
/// `dist` must be a live handle; `out_ratio` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rescan_distribution_cost_ratio(
    dist: *const RescanDistribution,
    precision: f64,
    recall: f64,
    cost_quotient: f64,
    out_ratio: *mut f64,
) -> RescanStatus {
    guard(|| {
        let dist = dist
            .as_ref()
            .ok_or_else(|| fail(RescanStatus::NullArgument, "distribution is null"))?;
        let r = dist
            .0
            .expected_cost_ratio(
                &profile(precision, recall)?,
                cost_quotient,
                &QuadratureSpec::default(),
            )
            .map_err(core_err)?;
        write_out(out_ratio, r.ratio)
    })
}

/// Parses a TOML experiment configuration. Relative file references are
/// resolved against the current directory.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rescan_config_parse(
    toml: *const c_char,
    out: *mut *mut RescanConfig,
) -> RescanStatus {
    guard(|| {
        let text = read_str(toml, "toml")?;
        let cfg = parse_config(text).map_err(core_err)?;
        write_out(out, Box::into_raw(Box::new(RescanConfig(cfg))))
    })
}

/// Overrides the master seed.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rescan_config_set_seed(cfg: *mut RescanConfig, seed: u64) -> RescanStatus {
    guard(|| {
        let cfg = cfg
            .as_mut()
            .ok_or_else(|| fail(RescanStatus::NullArgument, "config is null"))?;
        cfg.0.seed = seed;
        Ok(())
    })
}

/// Sets the worker count; results do not depend on it.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rescan_config_set_workers(
    cfg: *mut RescanConfig,
    workers: usize,
) -> RescanStatus {
    guard(|| {
        let cfg = cfg
            .as_mut()
            .ok_or_else(|| fail(RescanStatus::NullArgument, "config is null"))?;
        if workers == 0 {
            return Err(fail(RescanStatus::InvalidParameter, "workers must be >= 1"));
        }
        cfg.0.workers = workers;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle from [`rescan_config_parse`] that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn rescan_config_free(cfg: *mut RescanConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the cohort simulation described by `cfg`.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rescan_simulate(
    cfg: *const RescanConfig,
    out: *mut *mut RescanReport,
) -> RescanStatus {
    guard(|| {
        let cfg = cfg
            .as_ref()
            .ok_or_else(|| fail(RescanStatus::NullArgument, "config is null"))?;
        if out.is_null() {
            return Err(fail(RescanStatus::NullArgument, "output pointer is null"));
        }
        let report = rescan_core::acquisition::run_cohort(&cfg.0).map_err(core_err)?;
        write_out(out, Box::into_raw(Box::new(RescanReport(report))))
    })
}

/// Empirical cost ratio of a report and its standard error. The standard
/// error is NaN when it is not defined.
///
/// # Safety
/// `report` must be a live handle; both out-pointers must be valid for one
/// write each.
#[no_mangle]
pub unsafe extern "C" fn rescan_report_cost_ratio(
    report: *const RescanReport,
    out_ratio: *mut f64,
    out_standard_error: *mut f64,
) -> RescanStatus {
    guard(|| {
        let report = report
            .as_ref()
            .ok_or_else(|| fail(RescanStatus::NullArgument, "report is null"))?;
        if out_ratio.is_null() || out_standard_error.is_null() {
            return Err(fail(RescanStatus::NullArgument, "output pointer is null"));
        }
        let est = report
            .0
            .aggregates
            .empirical_cost_ratio
            .as_ref()
            .ok_or_else(|| {
                fail(
                    RescanStatus::NoValue,
                    "cost ratio undefined for this cohort",
                )
            })?;
        write_out(out_ratio, est.mean)?;
        write_out(out_standard_error, est.standard_error.unwrap_or(f64::NAN))
    })
}

/// Report as pretty-printed JSON. Release with [`rescan_string_free`].
///
/// # Safety
/// `report` must be a live handle; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn rescan_report_json(
    report: *const RescanReport,
    out: *mut *mut c_char,
) -> RescanStatus {
    guard(|| {
        let report = report
            .as_ref()
            .ok_or_else(|| fail(RescanStatus::NullArgument, "report is null"))?;
        let json = CString::new(to_json(&report.0)).expect("json has no nul bytes");
        write_out(out, json.into_raw())
    })
}

/// # Safety
/// `report` must be null or a handle from [`rescan_simulate`] that has not
/// been freed.
#[no_mangle]
pub unsafe extern "C" fn rescan_report_free(report: *mut RescanReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library that has not been
/// freed.
#[no_mangle]
pub unsafe extern "C" fn rescan_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
