//! C interface to the qdemon simulator.
//!
//! Every function returns a [`QdStatus`]; on failure a message for the calling
//! thread is available from [`qd_last_error`]. Handles are opaque and must be
//! released with their `_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qdemon::config::RunConfig;
use qdemon::master_eq::exact_outcome_distribution;
use qdemon::thermo::{lambda_fb_theory, EnsembleSummary, Estimates};
use qdemon::{
    ensemble_summary, run_ensemble, BinaryDist, Error, FeedbackErrorModel, InverseTemperature, Outcome,
    Protocol, ShotRecord, SummaryOptions,
};

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    ContractViolation = 4,
    IoError = 5,
    OutOfRange = 6,
    Panic = 7,
}

/// Run configuration handle.
pub struct QdConfig {
    inner: RunConfig,
}

/// Simulated ensemble handle.
pub struct QdEnsemble {
    protocol: Protocol,
    records: Vec<ShotRecord>,
}

/// One shot. Outcomes are 0 for g, 1 for e and −1 when the readout does not
/// exist in the protocol.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QdShot {
    pub x: i8,
    pub k: i8,
    pub y: i8,
    pub z: i8,
    /// Extracted work E(x) − E(z) in units of ħω_q.
    pub work: i8,
    pub n_jumps: u32,
}

/// Ensemble statistics; `se_*` are bootstrap standard errors (zero for exact
/// summaries).
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QdSummary {
    pub n_shots: u64,
    pub n_iqc_excluded: u64,
    pub beta_eps: f64,
    pub avg_exp_bw_minus_ish: f64,
    pub avg_exp_bw_minus_iqc: f64,
    pub avg_exp_bw: f64,
    pub mean_iqc: f64,
    pub mean_ish: f64,
    pub mean_bw: f64,
    pub lambda_fb: f64,
    pub eta: f64,
    pub second_law_margin: f64,
    pub se_avg_exp_bw_minus_ish: f64,
    pub se_avg_exp_bw_minus_iqc: f64,
    pub se_avg_exp_bw: f64,
    pub se_mean_iqc: f64,
    pub se_mean_ish: f64,
    pub se_mean_bw: f64,
    pub se_eta: f64,
    pub se_second_law_margin: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> QdStatus {
    match e {
        Error::InvalidInput(_) => QdStatus::InvalidArgument,
        Error::ContractViolation(_) => QdStatus::ContractViolation,
        Error::Config(_) | Error::Json(_) => QdStatus::ConfigError,
        Error::Io(_) | Error::Csv(_) => QdStatus::IoError,
    }
}

struct Fail(QdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Fail {
    Fail(QdStatus::NullPointer, format!("{name} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> QdStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QdStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            QdStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn deref_mut<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(name))
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn qd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default configuration.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qd_config_default(out: *mut *mut QdConfig) -> QdStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        *out = Box::into_raw(Box::new(QdConfig {
            inner: RunConfig::default(),
        }));
        Ok(())
    })
}

/// Configuration from a JSON document with the same schema as the CLI.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qd_config_from_json(json: *const c_char, out: *mut *mut QdConfig) -> QdStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Fail(QdStatus::InvalidArgument, format!("json is not UTF-8: {e}")))?;
        let inner = RunConfig::from_json(text)?;
        *out = Box::into_raw(Box::new(QdConfig { inner }));
        Ok(())
    })
}

/// Resolved configuration as JSON; release with [`qd_string_free`].
///
/// # Safety
/// `config` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qd_config_to_json(config: *const QdConfig, out: *mut *mut c_char) -> QdStatus {
    guard(|| {
        let cfg = deref(config, "config")?;
        let out = deref_mut(out, "out")?;
        *out = CString::new(cfg.inner.to_json()).expect("json has no nul").into_raw();
        Ok(())
    })
}

/// # Safety
/// `config` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qd_config_set_seed(config: *mut QdConfig, seed: u64) -> QdStatus {
    guard(|| {
        deref_mut(config, "config")?.inner.master_seed = seed;
        Ok(())
    })
}

/// # Safety
/// `config` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qd_config_set_shots(config: *mut QdConfig, n_shots: usize) -> QdStatus {
    guard(|| {
        if n_shots == 0 {
            return Err(Fail(QdStatus::InvalidArgument, "n_shots must be positive".into()));
        }
        deref_mut(config, "config")?.inner.n_shots = n_shots;
        Ok(())
    })
}

/// # Safety
/// `config` must be NULL or come from this library, and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn qd_config_free(config: *mut QdConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn qd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Simulates `n_shots` shots at the configured point with the configured seed.
///
/// # Safety
/// `config` must be valid and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qd_ensemble_run(config: *const QdConfig, out: *mut *mut QdEnsemble) -> QdStatus {
    guard(|| {
        let cfg = &deref(config, "config")?.inner;
        let out = deref_mut(out, "out")?;
        let setup = cfg.setup(None)?;
        let records = run_ensemble(&setup.experiment, cfg.n_shots, cfg.master_seed)?;
        *out = Box::into_raw(Box::new(QdEnsemble {
            protocol: cfg.protocol,
            records,
        }));
        Ok(())
    })
}

/// Number of shots, or 0 for NULL.
///
/// # Safety
/// `ensemble` must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn qd_ensemble_len(ensemble: *const QdEnsemble) -> usize {
    ensemble.as_ref().map_or(0, |e| e.records.len())
}

fn code(o: Option<Outcome>) -> i8 {
    o.map_or(-1, |o| o.index() as i8)
}

/// # Safety
/// `ensemble` must be valid and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qd_ensemble_get(ensemble: *const QdEnsemble, index: usize, out: *mut QdShot) -> QdStatus {
    guard(|| {
        let e = deref(ensemble, "ensemble")?;
        let out = deref_mut(out, "out")?;
        let r = e.records.get(index).ok_or_else(|| {
            Fail(
                QdStatus::OutOfRange,
                format!("shot {index} out of range for {} shots", e.records.len()),
            )
        })?;
        *out = QdShot {
            x: code(Some(r.x)),
            k: code(r.k),
            y: code(r.y),
            z: code(Some(r.z)),
            work: r.work,
            n_jumps: r.jumps.len() as u32,
        };
        Ok(())
    })
}

/// # Safety
/// `ensemble` must be NULL or come from this library, and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn qd_ensemble_free(ensemble: *mut QdEnsemble) {
    if !ensemble.is_null() {
        drop(Box::from_raw(ensemble));
    }
}

fn fill(est: &Estimates, out: &mut QdSummary) {
    out.beta_eps = est.beta_eps;
    out.avg_exp_bw_minus_ish = est.avg_exp_sigma_ish;
    out.avg_exp_bw_minus_iqc = est.avg_exp_sigma_iqc;
    out.avg_exp_bw = est.avg_exp_beta_w;
    out.mean_iqc = est.mean_iqc;
    out.mean_ish = est.mean_ish;
    out.mean_bw = est.mean_beta_w;
    out.lambda_fb = est.lambda_fb_theory;
    out.eta = est.eta;
    out.second_law_margin = est.second_law_margin;
}

fn to_c(s: &EnsembleSummary) -> QdSummary {
    let mut out = QdSummary {
        n_shots: s.n_shots,
        n_iqc_excluded: s.n_iqc_excluded,
        se_avg_exp_bw_minus_ish: s.stderr.avg_exp_sigma_ish,
        se_avg_exp_bw_minus_iqc: s.stderr.avg_exp_sigma_iqc,
        se_avg_exp_bw: s.stderr.avg_exp_beta_w,
        se_mean_iqc: s.stderr.mean_iqc,
        se_mean_ish: s.stderr.mean_ish,
        se_mean_bw: s.stderr.mean_beta_w,
        se_eta: s.stderr.eta,
        se_second_law_margin: s.stderr.second_law_margin,
        ..Default::default()
    };
    fill(&s.estimates, &mut out);
    out
}

/// Statistics of `ensemble` using the β source, bootstrap count and minimum
/// cell count of `config`.
///
/// # Safety
/// `config` and `ensemble` must be valid and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qd_ensemble_summary(
    config: *const QdConfig,
    ensemble: *const QdEnsemble,
    out: *mut QdSummary,
) -> QdStatus {
    guard(|| {
        let cfg = &deref(config, "config")?.inner;
        let e = deref(ensemble, "ensemble")?;
        let out = deref_mut(out, "out")?;
        let setup = cfg.setup(None)?;
        let opts = SummaryOptions {
            min_cell_count: cfg.min_cell_count,
            ..SummaryOptions::new(cfg.beta_source(setup.beta), setup.experiment.errors)
        }
        .with_bootstrap(cfg.bootstrap_resamples, cfg.master_seed);
        *out = to_c(&ensemble_summary(&e.records, e.protocol, &opts)?);
        Ok(())
    })
}

/// Exact expectations from the population oracle at the configured point.
///
/// # Safety
/// `config` must be valid and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qd_exact_summary(config: *const QdConfig, out: *mut QdSummary) -> QdStatus {
    guard(|| {
        let cfg = &deref(config, "config")?.inner;
        let out = deref_mut(out, "out")?;
        let setup = cfg.setup(None)?;
        let ex = &setup.experiment;
        let est = Estimates::exact(&exact_outcome_distribution(ex)?, setup.beta, &ex.errors);
        *out = QdSummary::default();
        fill(&est, out);
        Ok(())
    })
}

/// Closed-form probability of absolutely irreversible reversed events.
/// `p_k_e` and `p_y_e` are the probabilities of reading e in k and y.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qd_lambda_fb_theory(
    beta_eps: f64,
    e_given_g: f64,
    g_given_e: f64,
    p_k_e: f64,
    p_y_e: f64,
    out: *mut f64,
) -> QdStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        for p in [p_k_e, p_y_e] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Fail(QdStatus::InvalidArgument, format!("probability {p} outside [0, 1]")));
            }
        }
        if beta_eps.is_nan() {
            return Err(Fail(QdStatus::InvalidArgument, "beta_eps is NaN".into()));
        }
        let errors = FeedbackErrorModel::new(e_given_g, g_given_e)?;
        *out = lambda_fb_theory(
            InverseTemperature::new(beta_eps),
            &errors,
            BinaryDist::from_excited(p_k_e),
            BinaryDist::from_excited(p_y_e),
        );
        Ok(())
    })
}
