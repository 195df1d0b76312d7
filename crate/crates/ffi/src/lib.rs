//! C ABI over the ecm-lab engine.
//!
//! Every fallible function returns an [`EcmStatus`]; on failure the message
//! is kept per thread and can be fetched with [`ecm_last_error`]. Paths and
//! allocators are opaque handles released by their `_free` function.
//! Panics never cross the boundary; they surface as [`EcmStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use ecm_lab::io::{execute, Command, RunConfig};
use ecm_lab::kelly::{
    classical_kelly_lambda, discretize_jump_distribution, optimal_lambda_approx, DriftMode,
    EcoKelly, LambdaBounds, DEFAULT_JUMP_NODES, DEFAULT_TOL,
};
use ecm_lab::model::{generate_indexed_path, per_step_rate, per_step_vol};
use ecm_lab::strategy::{run_strategies, Allocator, SolverMode, StrategyId};
use ecm_lab::{EcmError, ModelParams, PricePath};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidParams = 3,
    Domain = 4,
    PathOverflow = 5,
    EmptyFeasibleInterval = 6,
    DegenerateApprox = 7,
    HorizonMismatch = 8,
    BufferTooSmall = 9,
    Config = 10,
    Io = 11,
    Panic = 12,
}

/// Model parameters in per-step units.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcmParams {
    pub r_d: f64,
    pub r_n: f64,
    pub sigma: f64,
    pub rho: f64,
    pub k_bar: f64,
    pub sigma_kappa: f64,
    pub r_f: f64,
    pub p0: f64,
}

impl From<ModelParams> for EcmParams {
    fn from(p: ModelParams) -> Self {
        EcmParams {
            r_d: p.r_d,
            r_n: p.r_n,
            sigma: p.sigma,
            rho: p.rho,
            k_bar: p.k_bar,
            sigma_kappa: p.sigma_kappa,
            r_f: p.r_f,
            p0: p.p0,
        }
    }
}

impl From<EcmParams> for ModelParams {
    fn from(p: EcmParams) -> Self {
        ModelParams {
            r_d: p.r_d,
            r_n: p.r_n,
            sigma: p.sigma,
            rho: p.rho,
            k_bar: p.k_bar,
            sigma_kappa: p.sigma_kappa,
            r_f: p.r_f,
            p0: p.p0,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcmStrategy {
    BuyAndHold = 0,
    SixtyForty = 1,
    CkBounded = 2,
    CkUnbounded = 3,
    EcoBounded = 4,
    EcoUnbounded = 5,
}

impl From<EcmStrategy> for StrategyId {
    fn from(s: EcmStrategy) -> Self {
        match s {
            EcmStrategy::BuyAndHold => StrategyId::BuyAndHold,
            EcmStrategy::SixtyForty => StrategyId::SixtyForty,
            EcmStrategy::CkBounded => StrategyId::CkBounded,
            EcmStrategy::CkUnbounded => StrategyId::CkUnbounded,
            EcmStrategy::EcoBounded => StrategyId::EcoBounded,
            EcmStrategy::EcoUnbounded => StrategyId::EcoUnbounded,
        }
    }
}

/// A generated price path.
pub struct EcmPath(PricePath);

/// Parameters plus a lazily filled allocation table. Not thread safe; use
/// one allocator per thread.
pub struct EcmAllocator(Allocator);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &EcmError) -> EcmStatus {
    match e {
        EcmError::Domain { .. } => EcmStatus::Domain,
        EcmError::InvalidParams(_) => EcmStatus::InvalidParams,
        EcmError::PathOverflow { .. } => EcmStatus::PathOverflow,
        EcmError::EmptyFeasibleInterval { .. } => EcmStatus::EmptyFeasibleInterval,
        EcmError::DegenerateApprox { .. } => EcmStatus::DegenerateApprox,
        EcmError::HorizonMismatch { .. } => EcmStatus::HorizonMismatch,
        EcmError::Config { .. } => EcmStatus::Config,
        EcmError::Io(_) => EcmStatus::Io,
    }
}

struct Fail(EcmStatus, String);

impl From<EcmError> for Fail {
    fn from(e: EcmError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(EcmStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any failure and converts it to a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> EcmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            EcmStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            EcmStatus::Panic
        }
    }
}

unsafe fn params_in(params: *const EcmParams) -> Result<ModelParams, Fail> {
    let p: ModelParams = params
        .as_ref()
        .ok_or_else(|| null("params"))?
        .to_owned()
        .into();
    p.validate()?;
    Ok(p)
}

unsafe fn out_ref<'a, T>(out: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    out.as_mut().ok_or_else(|| null(what))
}

/// Copies the current thread's last error message into `buf` (NUL
/// terminated, truncated to `len`) and returns the full message length in
/// bytes, excluding the terminator. `buf` may be null to query the length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ecm_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ecm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Writes the base parameter set to `out`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ecm_params_base(out: *mut EcmParams) -> EcmStatus {
    guard(|| {
        *out_ref(out, "out")? = ModelParams::base().into();
        Ok(())
    })
}

/// Builds per-step parameters from annual rates and volatility with the
/// 252-day convention: `r = ln(1 + annual) / 252`, `sigma = annual / sqrt(252)`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ecm_params_from_annual(
    drift: f64,
    normal_rate: f64,
    volatility: f64,
    rho: f64,
    k_bar: f64,
    sigma_kappa: f64,
    risk_free: f64,
    out: *mut EcmParams,
) -> EcmStatus {
    guard(|| {
        let p = ModelParams {
            r_d: per_step_rate(drift),
            r_n: per_step_rate(normal_rate),
            sigma: per_step_vol(volatility),
            rho,
            k_bar,
            sigma_kappa,
            r_f: per_step_rate(risk_free),
            p0: 1.0,
        };
        p.validate()?;
        *out_ref(out, "out")? = p.into();
        Ok(())
    })
}

/// Checks the parameter invariants.
///
/// # Safety
/// `params` must be null or point to a valid `EcmParams`.
#[no_mangle]
pub unsafe extern "C" fn ecm_params_validate(params: *const EcmParams) -> EcmStatus {
    guard(|| params_in(params).map(|_| ()))
}

/// Generates path `sim_index` of the ensemble addressed by `seed`.
///
/// # Safety
/// `params` must point to a valid `EcmParams`; `out` must be valid for writes.
/// The handle written to `out` must be released with [`ecm_path_free`].
#[no_mangle]
pub unsafe extern "C" fn ecm_path_generate(
    params: *const EcmParams,
    horizon: usize,
    seed: u64,
    sim_index: u64,
    out: *mut *mut EcmPath,
) -> EcmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = std::ptr::null_mut();
        let p = params_in(params)?;
        if horizon == 0 {
            return Err(Fail(
                EcmStatus::InvalidArgument,
                "horizon must be >= 1".into(),
            ));
        }
        let path = generate_indexed_path(&p, horizon, seed, sim_index)?;
        *out = Box::into_raw(Box::new(EcmPath(path)));
        Ok(())
    })
}

/// # Safety
/// `path` must be null or a handle from [`ecm_path_generate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ecm_path_free(path: *mut EcmPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Number of steps; the path holds `horizon + 1` states. Returns 0 for null.
///
/// # Safety
/// `path` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ecm_path_horizon(path: *const EcmPath) -> usize {
    path.as_ref().map_or(0, |p| p.0.horizon())
}

/// Which series [`ecm_path_copy`] extracts.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EcmSeries {
    Price = 0,
    NormalPrice = 1,
    /// Inverted mispricing, normal price over price.
    Q = 2,
    /// 1 where a correction occurred on the step into this state, else 0.
    Jump = 3,
}

/// Copies `horizon + 1` values of `series` into `buf`.
///
/// # Safety
/// `path` must be a live handle and `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ecm_path_copy(
    path: *const EcmPath,
    series: EcmSeries,
    buf: *mut f64,
    len: usize,
) -> EcmStatus {
    guard(|| {
        let path = &path.as_ref().ok_or_else(|| null("path"))?.0;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let n = path.steps.len();
        if len < n {
            return Err(Fail(
                EcmStatus::BufferTooSmall,
                format!("need {n} values, buffer holds {len}"),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(buf, n);
        for (d, s) in dst.iter_mut().zip(&path.steps) {
            *d = match series {
                EcmSeries::Price => s.price,
                EcmSeries::NormalPrice => s.normal_price,
                EcmSeries::Q => s.q,
                EcmSeries::Jump => f64::from(u8::from(s.kappa.is_some())),
            };
        }
        Ok(())
    })
}

/// Creates an allocator for `params` with default quadrature.
///
/// # Safety
/// `params` must point to a valid `EcmParams`; `out` must be valid for
/// writes. Release the handle with [`ecm_allocator_free`].
#[no_mangle]
pub unsafe extern "C" fn ecm_allocator_new(
    params: *const EcmParams,
    out: *mut *mut EcmAllocator,
) -> EcmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = std::ptr::null_mut();
        let p = params_in(params)?;
        *out = Box::into_raw(Box::new(EcmAllocator(Allocator::new(p)?)));
        Ok(())
    })
}

/// # Safety
/// `alloc` must be null or a handle from [`ecm_allocator_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ecm_allocator_free(alloc: *mut EcmAllocator) {
    if !alloc.is_null() {
        drop(Box::from_raw(alloc));
    }
}

/// Risky fraction of `strategy` at inverted mispricing `q`, using the
/// interpolated crash-aware solver and the discount-rate drift for the
/// classical Kelly strategies.
///
/// # Safety
/// `alloc` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ecm_allocator_lambda(
    alloc: *mut EcmAllocator,
    strategy: EcmStrategy,
    q: f64,
    out: *mut f64,
) -> EcmStatus {
    guard(|| {
        let alloc = &mut alloc.as_mut().ok_or_else(|| null("alloc"))?.0;
        let out = out_ref(out, "out")?;
        let spec = StrategyId::from(strategy).spec(DriftMode::default(), SolverMode::default());
        *out = alloc.allocate(&spec, q)?;
        Ok(())
    })
}

/// Runs `strategy` over `path` and writes `horizon + 1` wealth values into
/// `wealth` (starting at 1). `default_step` receives the first step with
/// zero wealth, or -1 if the strategy never defaulted.
///
/// # Safety
/// `alloc` and `path` must be live handles, `wealth` must point to `len`
/// writable doubles and `default_step` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ecm_run_strategy(
    alloc: *mut EcmAllocator,
    path: *const EcmPath,
    strategy: EcmStrategy,
    wealth: *mut f64,
    len: usize,
    default_step: *mut i64,
) -> EcmStatus {
    guard(|| {
        let alloc = &mut alloc.as_mut().ok_or_else(|| null("alloc"))?.0;
        let path = &path.as_ref().ok_or_else(|| null("path"))?.0;
        if wealth.is_null() {
            return Err(null("wealth"));
        }
        let n = path.steps.len();
        if len < n {
            return Err(Fail(
                EcmStatus::BufferTooSmall,
                format!("need {n} values, buffer holds {len}"),
            ));
        }
        let spec = StrategyId::from(strategy).spec(DriftMode::default(), SolverMode::default());
        let portfolio = run_strategies(&[spec], alloc, path)
            .pop()
            .expect("one strategy")?;
        std::slice::from_raw_parts_mut(wealth, n).copy_from_slice(&portfolio.wealth);
        if let Some(d) = default_step.as_mut() {
            *d = portfolio.default_step.map_or(-1, |s| s as i64);
        }
        Ok(())
    })
}

fn bounds(lo: f64, hi: f64) -> Result<LambdaBounds, Fail> {
    Ok(LambdaBounds::new(lo, hi)?)
}

/// Expected one-step log growth of fraction `lambda` at mispricing `q`;
/// `-inf` when some quadrature node ruins the investor.
///
/// # Safety
/// `params` must point to a valid `EcmParams`; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ecm_expected_log_growth(
    params: *const EcmParams,
    q: f64,
    lambda: f64,
    out: *mut f64,
) -> EcmStatus {
    guard(|| {
        let p = params_in(params)?;
        let out = out_ref(out, "out")?;
        *out = EcoKelly::with_defaults(&p)?.expected_log_growth(&p, q, lambda)?;
        Ok(())
    })
}

/// Crash-aware Kelly fraction by direct maximization within `[lo, hi]`.
/// Infinite bounds are allowed.
///
/// # Safety
/// `params` must point to a valid `EcmParams`; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ecm_kelly_numeric(
    params: *const EcmParams,
    q: f64,
    lo: f64,
    hi: f64,
    out: *mut f64,
) -> EcmStatus {
    guard(|| {
        let p = params_in(params)?;
        let out = out_ref(out, "out")?;
        *out = EcoKelly::with_defaults(&p)?.optimal_lambda(&p, q, bounds(lo, hi)?, DEFAULT_TOL)?;
        Ok(())
    })
}

/// Closed-form second-order approximation of the crash-aware fraction.
///
/// # Safety
/// `params` must point to a valid `EcmParams`; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ecm_kelly_approx(
    params: *const EcmParams,
    q: f64,
    lo: f64,
    hi: f64,
    out: *mut f64,
) -> EcmStatus {
    guard(|| {
        let p = params_in(params)?;
        let out = out_ref(out, "out")?;
        *out = optimal_lambda_approx(&p, q, bounds(lo, hi)?)?;
        Ok(())
    })
}

/// Classical Kelly fraction `(mu - r_f) / sigma^2` clipped to `[lo, hi]`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ecm_kelly_classical(
    mu: f64,
    r_f: f64,
    sigma: f64,
    lo: f64,
    hi: f64,
    out: *mut f64,
) -> EcmStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = classical_kelly_lambda(mu, r_f, sigma, bounds(lo, hi)?)?;
        Ok(())
    })
}

/// Writes the `count` jump sizes and probabilities of the discretized
/// correction distribution. Needs buffers of `count` doubles each.
///
/// # Safety
/// `kappa` and `eta` must point to `count` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ecm_jump_menu(
    k_bar: f64,
    sigma_kappa: f64,
    count: usize,
    kappa: *mut f64,
    eta: *mut f64,
) -> EcmStatus {
    guard(|| {
        if kappa.is_null() || eta.is_null() {
            return Err(null("kappa or eta"));
        }
        let menu = discretize_jump_distribution(k_bar, sigma_kappa, count)?;
        let (k, e) = (
            std::slice::from_raw_parts_mut(kappa, count),
            std::slice::from_raw_parts_mut(eta, count),
        );
        for (i, (ki, ei)) in menu.entries.iter().enumerate() {
            k[i] = *ki;
            e[i] = *ei;
        }
        Ok(())
    })
}

/// Default number of jump nodes used by the engine.
#[no_mangle]
pub extern "C" fn ecm_default_jump_nodes() -> usize {
    DEFAULT_JUMP_NODES
}

/// Runs a command line subcommand (`"paths"`, `"compare"`, `"sweep-window"`,
/// `"sweep-param"`, `"error-scan"`, `"sign-test"`) from a JSON config and
/// writes its files under `out_dir`, overriding the config's directory when
/// non-null.
///
/// # Safety
/// `command` and `config_json` must be NUL-terminated strings; `out_dir`
/// must be null or NUL terminated.
#[no_mangle]
pub unsafe extern "C" fn ecm_run_command(
    command: *const c_char,
    config_json: *const c_char,
    out_dir: *const c_char,
) -> EcmStatus {
    guard(|| {
        let text = |p: *const c_char, what: &str| -> Result<String, Fail> {
            if p.is_null() {
                return Err(null(what));
            }
            CStr::from_ptr(p)
                .to_str()
                .map(str::to_owned)
                .map_err(|_| Fail(EcmStatus::InvalidArgument, format!("{what} is not UTF-8")))
        };
        let name = text(command, "command")?;
        let cmd = Command::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| {
                Fail(
                    EcmStatus::InvalidArgument,
                    format!("unknown command `{name}`"),
                )
            })?;
        let mut cfg = RunConfig::from_json(&text(config_json, "config_json")?)?;
        if !out_dir.is_null() {
            cfg.output_dir = PathBuf::from(text(out_dir, "out_dir")?);
        }
        execute(cmd, &cfg)?;
        Ok(())
    })
}
