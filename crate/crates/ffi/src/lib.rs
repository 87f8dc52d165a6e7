//! C ABI over the `npcsma` library.
//!
//! Every function returns an [`NpcsmaStatus`]; results go through out
//! pointers. Simulations and their reports are opaque handles released with
//! the matching `_free` function. The message of the last failure on the
//! calling thread is available from [`npcsma_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use npcsma::channel::{attempt_rate_roots, max_throughput};
use npcsma::hol::{pk_mean_delay, service_moments, ServiceMoments};
use npcsma::params::minislots_for_ratio;
use npcsma::sim::{SimConfig, SimReport, Simulator};
use npcsma::stability::{stable_regions, StableInterval};
use npcsma::{Cutoff, Error, NetworkParams, Population, Scheme};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NpcsmaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NoStableRate = 3,
    NotErgodic = 4,
    UnboundedDelay = 5,
    Unstable = 6,
    NoFixedPoint = 7,
    Numerical = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NpcsmaScheme {
    /// K = 1.
    Geometric = 0,
    /// Finite K taken from `cap_k`.
    KExponential = 1,
    /// K = infinity.
    Exponential = 2,
}

/// Scenario description. `n == 0` stands for an infinite population, which
/// only `npcsma_stable_regions` accepts.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct NpcsmaParams {
    pub n: u32,
    /// Propagation-delay ratio; must be 1/M for an integer M.
    pub a: f64,
    pub lambda_hat: f64,
    pub q: f64,
    pub scheme: NpcsmaScheme,
    pub cap_k: u32,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct NpcsmaInterval {
    pub lo: f64,
    pub hi: f64,
    pub empty: bool,
    pub lo_clamped: bool,
    pub hi_clamped: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct NpcsmaRegions {
    pub g_small: f64,
    pub g_large: f64,
    pub g_hat_large: f64,
    pub region_i: NpcsmaInterval,
    pub region_ii: NpcsmaInterval,
    pub region_delay: NpcsmaInterval,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct NpcsmaMoments {
    pub mean: f64,
    /// Infinite when `divergent`.
    pub second: f64,
    pub divergent: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct NpcsmaSummary {
    pub throughput: f64,
    pub mean_delay: f64,
    pub service_mean: f64,
    pub service_second: f64,
    pub mean_backlog: f64,
    pub measured_attempt_rate: f64,
    pub arrived: u64,
    pub delivered: u64,
    pub final_backlog: u64,
    pub collisions: u64,
}

/// Opaque simulation handle.
pub struct NpcsmaSimulation {
    sim: Simulator,
}

/// Opaque report handle.
pub struct NpcsmaReport {
    report: SimReport,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> NpcsmaStatus {
    match e {
        Error::Domain(_) | Error::OutOfRange { .. } | Error::Config(_) => {
            NpcsmaStatus::InvalidArgument
        }
        Error::NoStableRate { .. } => NpcsmaStatus::NoStableRate,
        Error::NotErgodic { .. } => NpcsmaStatus::NotErgodic,
        Error::UnboundedDelay => NpcsmaStatus::UnboundedDelay,
        Error::Unstable { .. } => NpcsmaStatus::Unstable,
        Error::NoFixedPoint { .. } => NpcsmaStatus::NoFixedPoint,
        _ => NpcsmaStatus::Numerical,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Error>) -> NpcsmaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NpcsmaStatus::Ok,
        Ok(Err(e)) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            NpcsmaStatus::Panic
        }
    }
}

fn null_error(what: &str) -> Error {
    Error::Config(format!("{what} is null"))
}

/// # Safety
/// `ptr` must be null or valid for writes of `T`.
unsafe fn write_out<T>(ptr: *mut T, value: T, what: &str) -> Result<(), Error> {
    if ptr.is_null() {
        return Err(null_error(what));
    }
    ptr.write(value);
    Ok(())
}

fn scheme_of(scheme: NpcsmaScheme, cap_k: u32) -> Result<Scheme, Error> {
    match scheme {
        NpcsmaScheme::Geometric => Ok(Scheme::Geometric),
        NpcsmaScheme::Exponential => Ok(Scheme::Exponential),
        NpcsmaScheme::KExponential => Scheme::from_cutoff(Cutoff::Finite(cap_k)),
    }
}

fn population_of(n: u32) -> Population {
    if n == 0 {
        Population::Infinite
    } else {
        Population::Finite(n)
    }
}

fn interval(r: &StableInterval) -> NpcsmaInterval {
    NpcsmaInterval {
        lo: r.lo,
        hi: r.hi,
        empty: r.empty,
        lo_clamped: r.lo_clamped,
        hi_clamped: r.hi_clamped,
    }
}

fn moments_out(m: &ServiceMoments) -> NpcsmaMoments {
    NpcsmaMoments {
        mean: m.mean,
        second: m.second,
        divergent: m.divergent,
    }
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn npcsma_status_string(status: NpcsmaStatus) -> *const c_char {
    let s: &'static CStr = match status {
        NpcsmaStatus::Ok => c"ok",
        NpcsmaStatus::NullPointer => c"null pointer",
        NpcsmaStatus::InvalidArgument => c"invalid argument",
        NpcsmaStatus::NoStableRate => c"input rate exceeds the maximum throughput",
        NpcsmaStatus::NotErgodic => c"HOL chain is not positive recurrent",
        NpcsmaStatus::UnboundedDelay => c"second moment of service time diverges",
        NpcsmaStatus::Unstable => c"queue utilization is at least 1",
        NpcsmaStatus::NoFixedPoint => c"no attempt-rate fixed point",
        NpcsmaStatus::Numerical => c"numerical failure",
        NpcsmaStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns the full message length.
///
/// # Safety
/// `buf` must be null or valid for writes of `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn npcsma_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Maximum throughput at ratio `a` and the attempt rate achieving it.
///
/// # Safety
/// Out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn npcsma_max_throughput(
    a: f64,
    lambda_max: *mut f64,
    g_star: *mut f64,
) -> NpcsmaStatus {
    if lambda_max.is_null() || g_star.is_null() {
        return NpcsmaStatus::NullPointer;
    }
    guard(|| {
        let m = max_throughput(a)?;
        write_out(lambda_max, m.lambda_max, "lambda_max")?;
        write_out(g_star, m.g_star, "g_star")
    })
}

/// The two attempt rates whose throughput equals `lambda_hat`.
///
/// # Safety
/// Out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn npcsma_attempt_rate_roots(
    lambda_hat: f64,
    a: f64,
    g_small: *mut f64,
    g_large: *mut f64,
) -> NpcsmaStatus {
    if g_small.is_null() || g_large.is_null() {
        return NpcsmaStatus::NullPointer;
    }
    guard(|| {
        let r = attempt_rate_roots(lambda_hat, a)?;
        write_out(g_small, r.g_small, "g_small")?;
        write_out(g_large, r.g_large, "g_large")
    })
}

/// Stable throughput and bounded-delay regions of `q`. The `q` field of
/// `params` is ignored.
///
/// # Safety
/// `params` must be valid for reads and `out` for writes.
#[no_mangle]
pub unsafe extern "C" fn npcsma_stable_regions(
    params: *const NpcsmaParams,
    out: *mut NpcsmaRegions,
) -> NpcsmaStatus {
    if params.is_null() || out.is_null() {
        return NpcsmaStatus::NullPointer;
    }
    let p = *params;
    guard(|| {
        let scheme = scheme_of(p.scheme, p.cap_k)?;
        let r = stable_regions(population_of(p.n), p.lambda_hat, p.a, scheme)?;
        write_out(
            out,
            NpcsmaRegions {
                g_small: r.g_small,
                g_large: r.g_large,
                g_hat_large: r.g_hat_large,
                region_i: interval(&r.region_i),
                region_ii: interval(&r.region_ii),
                region_delay: interval(&r.region_delay),
            },
            "out",
        )
    })
}

/// First two moments of the HOL service time, in slots. `cap_k == 0` means
/// K = infinity; `minislots` is M = 1/a.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn npcsma_service_moments(
    p: f64,
    q: f64,
    cap_k: u32,
    minislots: u32,
    alpha: f64,
    out: *mut NpcsmaMoments,
) -> NpcsmaStatus {
    if out.is_null() {
        return NpcsmaStatus::NullPointer;
    }
    guard(|| {
        let cutoff = if cap_k == 0 {
            Cutoff::Infinite
        } else {
            Cutoff::Finite(cap_k)
        };
        let m = service_moments(p, q, cutoff, minislots, alpha)?;
        write_out(out, moments_out(&m), "out")
    })
}

/// Geo/G/1 mean delay for per-node rate `lambda` and the given moments.
///
/// # Safety
/// `moments` must be valid for reads and `mean_delay` for writes.
#[no_mangle]
pub unsafe extern "C" fn npcsma_pk_mean_delay(
    lambda: f64,
    moments: *const NpcsmaMoments,
    mean_delay: *mut f64,
) -> NpcsmaStatus {
    if moments.is_null() || mean_delay.is_null() {
        return NpcsmaStatus::NullPointer;
    }
    let m = *moments;
    guard(|| {
        let d = pk_mean_delay(
            lambda,
            &ServiceMoments {
                mean: m.mean,
                second: m.second,
                divergent: m.divergent,
            },
        )?;
        write_out(mean_delay, d.mean_delay, "mean_delay")
    })
}

/// Creates a simulation of `horizon` mini-slots. Statistics start after
/// `warmup`.
///
/// # Safety
/// `params` must be valid for reads and `out` for writes. The handle stored
/// in `*out` must be released with `npcsma_simulation_free`.
#[no_mangle]
pub unsafe extern "C" fn npcsma_simulation_new(
    params: *const NpcsmaParams,
    horizon: u64,
    warmup: u64,
    seed: u64,
    out: *mut *mut NpcsmaSimulation,
) -> NpcsmaStatus {
    if params.is_null() || out.is_null() {
        return NpcsmaStatus::NullPointer;
    }
    let p = *params;
    guard(|| {
        if p.n == 0 {
            return Err(Error::Config("simulation needs a finite node count".into()));
        }
        minislots_for_ratio(p.a)?;
        let scheme = scheme_of(p.scheme, p.cap_k)?;
        let params = NetworkParams::new(Population::Finite(p.n), p.a, p.lambda_hat, p.q, scheme)?;
        let config = SimConfig {
            horizon,
            warmup,
            seed,
            ..SimConfig::new(params)
        };
        let sim = Simulator::new(&config)?;
        write_out(
            out,
            Box::into_raw(Box::new(NpcsmaSimulation { sim })),
            "out",
        )
    })
}

/// Advances by up to `minislots`, stopping at the horizon.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn npcsma_simulation_advance(
    sim: *mut NpcsmaSimulation,
    minislots: u64,
) -> NpcsmaStatus {
    let Some(h) = sim.as_mut() else {
        return NpcsmaStatus::NullPointer;
    };
    guard(|| {
        let end = h
            .sim
            .now()
            .saturating_add(minislots)
            .min(h.sim.config().horizon);
        while h.sim.now() < end {
            h.sim.step();
        }
        Ok(())
    })
}

/// Current time and total backlog.
///
/// # Safety
/// `sim` must be a live handle; out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn npcsma_simulation_state(
    sim: *const NpcsmaSimulation,
    now: *mut u64,
    backlog: *mut u64,
) -> NpcsmaStatus {
    let Some(h) = sim.as_ref() else {
        return NpcsmaStatus::NullPointer;
    };
    if now.is_null() || backlog.is_null() {
        return NpcsmaStatus::NullPointer;
    }
    now.write(h.sim.now());
    backlog.write(h.sim.backlog());
    NpcsmaStatus::Ok
}

/// Runs to the horizon and returns a report handle. The simulation handle
/// stays valid and can still be freed or queried.
///
/// # Safety
/// `sim` must be a live handle and `out` valid for writes. The report must
/// be released with `npcsma_report_free`.
#[no_mangle]
pub unsafe extern "C" fn npcsma_simulation_finish(
    sim: *mut NpcsmaSimulation,
    out: *mut *mut NpcsmaReport,
) -> NpcsmaStatus {
    let Some(h) = sim.as_mut() else {
        return NpcsmaStatus::NullPointer;
    };
    if out.is_null() {
        return NpcsmaStatus::NullPointer;
    }
    guard(|| {
        while h.sim.now() < h.sim.config().horizon {
            h.sim.step();
        }
        let report = h.sim.report()?;
        write_out(out, Box::into_raw(Box::new(NpcsmaReport { report })), "out")
    })
}

/// # Safety
/// `sim` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn npcsma_simulation_free(sim: *mut NpcsmaSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// # Safety
/// `report` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn npcsma_report_summary(
    report: *const NpcsmaReport,
    out: *mut NpcsmaSummary,
) -> NpcsmaStatus {
    let Some(h) = report.as_ref() else {
        return NpcsmaStatus::NullPointer;
    };
    if out.is_null() {
        return NpcsmaStatus::NullPointer;
    }
    let r = &h.report;
    out.write(NpcsmaSummary {
        throughput: r.throughput,
        mean_delay: r.mean_delay,
        service_mean: r.service_mean,
        service_second: r.service_second,
        mean_backlog: r.mean_backlog,
        measured_attempt_rate: r.measured_attempt_rate,
        arrived: r.counts.arrived,
        delivered: r.counts.delivered,
        final_backlog: r.counts.final_backlog,
        collisions: r.counts.collisions,
    });
    NpcsmaStatus::Ok
}

/// Copies up to `capacity` backlog samples into the two arrays and stores
/// the total number of samples in `count`. Pass null arrays with capacity 0
/// to query the count.
///
/// # Safety
/// `report` must be a live handle; arrays must be valid for `capacity`
/// writes; `count` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn npcsma_report_backlog_trace(
    report: *const NpcsmaReport,
    minislots: *mut u64,
    backlogs: *mut u64,
    capacity: usize,
    count: *mut usize,
) -> NpcsmaStatus {
    let Some(h) = report.as_ref() else {
        return NpcsmaStatus::NullPointer;
    };
    if count.is_null() || (capacity > 0 && (minislots.is_null() || backlogs.is_null())) {
        return NpcsmaStatus::NullPointer;
    }
    let trace = &h.report.backlog_trace;
    for (i, s) in trace.iter().take(capacity).enumerate() {
        minislots.add(i).write(s.minislot);
        backlogs.add(i).write(s.backlog);
    }
    count.write(trace.len());
    NpcsmaStatus::Ok
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn npcsma_report_free(report: *mut NpcsmaReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
