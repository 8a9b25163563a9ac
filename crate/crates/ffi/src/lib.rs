//! C ABI over `maxweight_lab`.
//!
//! Objects cross the boundary as opaque handles created by `*_new` /
//! `*_from_json` functions and released by the matching `*_free`. Every
//! fallible call returns an [`MwlStatus`]; on failure a message is kept per
//! thread and can be copied out with [`mwl_last_error_message`]. Panics never
//! unwind into C: they surface as `MWL_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use maxweight_lab::analysis::build_report;
use maxweight_lab::config::SimConfig;
use maxweight_lab::experiment::run_experiment;
use maxweight_lab::fluid::{fluid_burst, Emptier};
use maxweight_lab::region::{classify, QueueVerdict};
use maxweight_lab::report::to_json;
use maxweight_lab::sim::Simulator;
use maxweight_lab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MwlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Domain = 4,
    Runtime = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MwlQueueVerdict {
    DelayStable = 0,
    DelayUnstable = 1,
    Boundary = 2,
    NotApplicable = 3,
}

/// Analytic verdict for `λ = (λ₁, λ₂, λ₃)`. `mu12`/`mu3` are NaN when
/// unstable.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MwlRegionVerdict {
    pub stable: bool,
    pub threshold: f64,
    pub mu12: f64,
    pub mu3: f64,
    pub queue_verdicts: [MwlQueueVerdict; 3],
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MwlFluidTrajectory {
    pub b: f64,
    pub t1: f64,
    pub t2: f64,
    pub q1_t1: f64,
    pub q3_t1: f64,
    pub mu: [f64; 3],
    pub q2_growth_rate: f64,
    pub q2_peak: f64,
    /// 1 or 3: the queue that empties first in phase 2.
    pub phase2_emptier: u32,
    pub queue2_capped: bool,
}

/// Validated simulation configuration.
pub struct MwlConfig {
    inner: SimConfig,
}

/// One replication, advanced slot by slot.
pub struct MwlSimulator {
    inner: Simulator,
}

/// Finished simulation report, held as JSON.
pub struct MwlReport {
    json: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

type Fail = (MwlStatus, String);

fn from_error(e: Error) -> Fail {
    let status = match &e {
        Error::Domain(_) => MwlStatus::Domain,
        Error::Dimension { .. } | Error::Precondition(_) => MwlStatus::InvalidArgument,
        _ if e.is_config() => MwlStatus::Config,
        _ => MwlStatus::Runtime,
    };
    (status, e.to_string())
}

fn null(what: &str) -> Fail {
    (MwlStatus::NullPointer, format!("{what} is null"))
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> MwlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MwlStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MwlStatus::Panic
        }
    }
}

unsafe fn copy_out(
    s: &CStr,
    buf: *mut c_char,
    cap: usize,
    written: *mut usize,
) -> Result<(), Fail> {
    let bytes = s.to_bytes_with_nul();
    if !written.is_null() {
        *written = bytes.len();
    }
    if buf.is_null() || cap < bytes.len() {
        return Err((
            MwlStatus::BufferTooSmall,
            format!("buffer needs {} bytes", bytes.len()),
        ));
    }
    ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, bytes.len());
    Ok(())
}

unsafe fn rates<'a>(lambda: *const f64, n: usize) -> Result<&'a [f64], Fail> {
    if lambda.is_null() {
        return Err(null("lambda"));
    }
    Ok(std::slice::from_raw_parts(lambda, n))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mwl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies this thread's last error message into `buf`. `written` receives
/// the size needed, including the terminating NUL (1 when there is none).
///
/// # Safety
/// `buf` must be valid for `cap` bytes or null; `written` must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn mwl_last_error_message(
    buf: *mut c_char,
    cap: usize,
    written: *mut usize,
) -> MwlStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone()).unwrap_or_default();
    match copy_out(&msg, buf, cap, written) {
        Ok(()) => MwlStatus::Ok,
        Err((s, _)) => s,
    }
}

/// Parses and validates a JSON configuration.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mwl_config_from_json(
    json: *const c_char,
    out: *mut *mut MwlConfig,
) -> MwlStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|_| {
            (
                MwlStatus::InvalidArgument,
                "configuration is not UTF-8".to_string(),
            )
        })?;
        let inner = SimConfig::from_json(text).map_err(from_error)?;
        *out = Box::into_raw(Box::new(MwlConfig { inner }));
        Ok(())
    })
}

/// # Safety
/// `config` must come from [`mwl_config_from_json`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn mwl_config_free(config: *mut MwlConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mwl_config_set_seed(config: *mut MwlConfig, seed: u64) -> MwlStatus {
    guard(|| {
        let c = config.as_mut().ok_or_else(|| null("config"))?;
        c.inner.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mwl_config_set_horizon(config: *mut MwlConfig, horizon: u64) -> MwlStatus {
    guard(|| {
        let c = config.as_mut().ok_or_else(|| null("config"))?;
        let mut next = c.inner.clone();
        next.horizon = horizon;
        next.validate().map_err(from_error)?;
        c.inner = next;
        Ok(())
    })
}

/// Hex SHA-256 digest of the configuration (65 bytes with the NUL).
///
/// # Safety
/// `config` must be a live handle; `buf` valid for `cap` bytes or null;
/// `written` valid or null.
#[no_mangle]
pub unsafe extern "C" fn mwl_config_digest(
    config: *const MwlConfig,
    buf: *mut c_char,
    cap: usize,
    written: *mut usize,
) -> MwlStatus {
    guard(|| {
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        let digest = CString::new(c.inner.digest()).expect("hex digest");
        copy_out(&digest, buf, cap, written)
    })
}

/// Starts replication `replication` of `config` from its initial lengths.
///
/// # Safety
/// `config` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mwl_simulator_new(
    config: *const MwlConfig,
    replication: u32,
    out: *mut *mut MwlSimulator,
) -> MwlStatus {
    guard(|| {
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = Simulator::from_config(&c.inner, replication).map_err(from_error)?;
        *out = Box::into_raw(Box::new(MwlSimulator { inner }));
        Ok(())
    })
}

/// # Safety
/// `sim` must come from [`mwl_simulator_new`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn mwl_simulator_free(sim: *mut MwlSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Number of queues, or 0 for a null handle.
///
/// # Safety
/// `sim` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mwl_simulator_num_queues(sim: *const MwlSimulator) -> usize {
    sim.as_ref().map_or(0, |s| s.inner.num_queues())
}

/// Slots simulated so far, or 0 for a null handle.
///
/// # Safety
/// `sim` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mwl_simulator_slot(sim: *const MwlSimulator) -> u64 {
    sim.as_ref().map_or(0, |s| s.inner.slot())
}

/// Advances `slots` slots.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mwl_simulator_run(sim: *mut MwlSimulator, slots: u64) -> MwlStatus {
    guard(|| {
        let s = sim.as_mut().ok_or_else(|| null("sim"))?;
        for _ in 0..slots {
            s.inner.advance();
        }
        Ok(())
    })
}

/// Copies the current queue lengths into `lengths`, which must hold exactly
/// [`mwl_simulator_num_queues`] entries.
///
/// # Safety
/// `sim` must be a live handle; `lengths` valid for `n` writes.
#[no_mangle]
pub unsafe extern "C" fn mwl_simulator_lengths(
    sim: *const MwlSimulator,
    lengths: *mut u64,
    n: usize,
) -> MwlStatus {
    guard(|| {
        let s = sim.as_ref().ok_or_else(|| null("sim"))?;
        if lengths.is_null() {
            return Err(null("lengths"));
        }
        let q = s.inner.lengths();
        if n != q.len() {
            return Err(from_error(Error::Dimension {
                expected: q.len(),
                got: n,
            }));
        }
        ptr::copy_nonoverlapping(q.as_ptr(), lengths, n);
        Ok(())
    })
}

/// Runs every replication of `config` on `threads` workers (0 = all cores)
/// and builds the estimator report.
///
/// # Safety
/// `config` must be a live handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mwl_simulate(
    config: *const MwlConfig,
    threads: usize,
    out: *mut *mut MwlReport,
) -> MwlStatus {
    guard(|| {
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let result = run_experiment(&c.inner, threads, None).map_err(from_error)?;
        let json = to_json(&build_report(&c.inner, &result)).map_err(from_error)?;
        let json = CString::new(json).expect("JSON has no interior nul");
        *out = Box::into_raw(Box::new(MwlReport { json }));
        Ok(())
    })
}

/// The report as NUL-terminated JSON, owned by the handle; null for a null
/// handle.
///
/// # Safety
/// `report` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mwl_report_json(report: *const MwlReport) -> *const c_char {
    report.as_ref().map_or(ptr::null(), |r| r.json.as_ptr())
}

/// # Safety
/// `report` must come from [`mwl_simulate`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn mwl_report_free(report: *mut MwlReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

fn verdict(v: QueueVerdict) -> MwlQueueVerdict {
    match v {
        QueueVerdict::DelayStable => MwlQueueVerdict::DelayStable,
        QueueVerdict::DelayUnstable => MwlQueueVerdict::DelayUnstable,
        QueueVerdict::Boundary => MwlQueueVerdict::Boundary,
        QueueVerdict::NotApplicable => MwlQueueVerdict::NotApplicable,
    }
}

/// Stability and delay-stability verdicts, heavy traffic at queue 1.
///
/// # Safety
/// `lambda` must be valid for `n` reads; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mwl_region_classify(
    lambda: *const f64,
    n: usize,
    out: *mut MwlRegionVerdict,
) -> MwlStatus {
    guard(|| {
        let l = rates(lambda, n)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let v = classify(l, 1).map_err(from_error)?;
        *out = MwlRegionVerdict {
            stable: v.stable,
            threshold: v.threshold,
            mu12: v.witness.map_or(f64::NAN, |w| w.mu12),
            mu3: v.witness.map_or(f64::NAN, |w| w.mu3),
            queue_verdicts: v.queue_verdicts.map(verdict),
        };
        Ok(())
    })
}

/// Fluid trajectory of a burst of `b` packets at queue 1.
///
/// # Safety
/// `lambda` must be valid for `n` reads; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn mwl_fluid_burst(
    lambda: *const f64,
    n: usize,
    b: f64,
    out: *mut MwlFluidTrajectory,
) -> MwlStatus {
    guard(|| {
        let l = rates(lambda, n)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let f = fluid_burst(l, b).map_err(from_error)?;
        *out = MwlFluidTrajectory {
            b: f.b,
            t1: f.t1,
            t2: f.t2,
            q1_t1: f.q1_t1,
            q3_t1: f.q3_t1,
            mu: f.mu,
            q2_growth_rate: f.q2_growth_rate,
            q2_peak: f.q2_peak,
            phase2_emptier: match f.phase2_emptier {
                Emptier::Queue1 => 1,
                Emptier::Queue3 => 3,
            },
            queue2_capped: f.queue2_capped,
        };
        Ok(())
    })
}
