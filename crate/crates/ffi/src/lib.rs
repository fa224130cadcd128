//! C interface to `safelearn`: evidence sets, scenario runs and their summaries.
//!
//! Every function returns an [`SlStatus`]; on failure the message is available
//! from [`sl_last_error`]. Handles are opaque and must be released with the
//! matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use safelearn::overapprox::{cover, estimate_g, DataPoint, EvidenceSet, LipschitzBounds, OverapproxError};
use safelearn::scenario::{Scenario, ScenarioConfig, ScenarioError};
use safelearn::sim::RunOutput;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlStatus {
    Ok = 0,
    NullPointer = -1,
    InvalidArgument = -2,
    Dimension = -3,
    /// The datapoint contradicts the evidence; nothing was changed.
    Inconsistent = -4,
    /// The datapoint was kept but the sweeps stopped before a fixpoint.
    NonTermination = -5,
    Parse = -6,
    Validation = -7,
    Simulation = -8,
    Io = -9,
    BufferTooSmall = -10,
    Panic = -99,
}

/// Evidence set over `n` dynamic rows and `m` inputs.
pub struct SlEvidence {
    inner: EvidenceSet,
}

/// A validated scenario.
pub struct SlScenario {
    inner: Scenario,
}

/// The outcome of a closed-loop run.
pub struct SlRun {
    inner: RunOutput,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SlSummary {
    pub steps: usize,
    pub measurements: usize,
    pub min_h: f64,
    pub min_h_v: f64,
    pub max_e2: f64,
    pub max_j: usize,
    pub drops: usize,
    pub restores: usize,
    pub violations: usize,
    pub safe: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: SlStatus, msg: impl Into<String>) -> SlStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> SlStatus) -> SlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(SlStatus::Panic, "internal panic"),
    }
}

fn overapprox_status(e: &OverapproxError) -> SlStatus {
    match e {
        OverapproxError::EmptyIntersection { .. } | OverapproxError::Contradiction { .. } => SlStatus::Inconsistent,
        OverapproxError::NonTermination { .. } => SlStatus::NonTermination,
        OverapproxError::Dimension(_) => SlStatus::Dimension,
        _ => SlStatus::InvalidArgument,
    }
}

fn scenario_status(e: &ScenarioError) -> SlStatus {
    match e {
        ScenarioError::Io { .. } => SlStatus::Io,
        ScenarioError::Parse(_) => SlStatus::Parse,
        ScenarioError::ValidationFailed(_) => SlStatus::Validation,
        ScenarioError::Sim(_) => SlStatus::Simulation,
    }
}

unsafe fn read<'a>(p: *const f64, len: usize) -> Option<&'a [f64]> {
    if len == 0 {
        Some(&[])
    } else if p.is_null() {
        None
    } else {
        Some(slice::from_raw_parts(p, len))
    }
}

unsafe fn write_out<'a>(p: *mut f64, len: usize) -> Option<&'a mut [f64]> {
    if p.is_null() {
        None
    } else {
        Some(slice::from_raw_parts_mut(p, len))
    }
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sl_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates evidence holding only the `[-M, M]` prior anchored at `anchor`
/// (length `2n`). `f_bar` has `n` entries, `g_bar` is row-major `n × m`.
///
/// # Safety
/// Pointers must reference arrays of the stated lengths; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sl_evidence_new(
    n: usize,
    m: usize,
    f_bar: *const f64,
    g_bar: *const f64,
    prior_magnitude: f64,
    anchor: *const f64,
    out: *mut *mut SlEvidence,
) -> SlStatus {
    guard(|| {
        if out.is_null() {
            return fail(SlStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let (Some(fb), Some(gb), Some(a)) = (read(f_bar, n), read(g_bar, n * m), read(anchor, 2 * n)) else {
            return fail(SlStatus::NullPointer, "null input array");
        };
        let g_rows = if m == 0 { vec![Vec::new(); n] } else { gb.chunks(m).map(<[f64]>::to_vec).collect() };
        let ev = LipschitzBounds::new(fb.to_vec(), g_rows)
            .and_then(|b| EvidenceSet::new(b, prior_magnitude, a.to_vec()));
        match ev {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SlEvidence { inner }));
                SlStatus::Ok
            }
            Err(e) => fail(overapprox_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `ev` must be null or a handle from [`sl_evidence_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sl_evidence_free(ev: *mut SlEvidence) {
    if !ev.is_null() {
        drop(Box::from_raw(ev));
    }
}

/// Number of entries including the prior.
///
/// # Safety
/// `ev` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sl_evidence_len(ev: *const SlEvidence) -> usize {
    ev.as_ref().map_or(0, |e| e.inner.len())
}

/// Ingests one measurement `(x, ẋ, u)` with `x`, `ẋ` of length `2n` and `u` of length `m`.
///
/// # Safety
/// `ev` must be live; arrays must have the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn sl_evidence_ingest(
    ev: *mut SlEvidence,
    x: *const f64,
    x_dot: *const f64,
    u: *const f64,
    t: f64,
) -> SlStatus {
    guard(|| {
        let Some(ev) = ev.as_mut() else { return fail(SlStatus::NullPointer, "evidence is null") };
        let (n, m) = (ev.inner.n(), ev.inner.m());
        let (Some(x), Some(xd), Some(u)) = (read(x, 2 * n), read(x_dot, 2 * n), read(u, m)) else {
            return fail(SlStatus::NullPointer, "null input array");
        };
        let d = DataPoint { x: x.to_vec(), x_dot: xd.to_vec(), u: u.to_vec(), t };
        match ev.inner.ingest(d) {
            Ok(_) => SlStatus::Ok,
            Err(e) => fail(overapprox_status(&e), e.to_string()),
        }
    })
}

/// Writes the cover `F(x)` (`n` bounds) and `G(x)` (row-major `n × m` bounds).
///
/// # Safety
/// `ev` must be live; `x` has `2n` entries; outputs have `n` and `n·m` entries.
#[no_mangle]
pub unsafe extern "C" fn sl_evidence_cover(
    ev: *const SlEvidence,
    x: *const f64,
    f_lo: *mut f64,
    f_hi: *mut f64,
    g_lo: *mut f64,
    g_hi: *mut f64,
) -> SlStatus {
    guard(|| {
        let Some(ev) = ev.as_ref() else { return fail(SlStatus::NullPointer, "evidence is null") };
        let (n, m) = (ev.inner.n(), ev.inner.m());
        let Some(x) = read(x, 2 * n) else { return fail(SlStatus::NullPointer, "x is null") };
        let (Some(fl), Some(fh), Some(gl), Some(gh)) =
            (write_out(f_lo, n), write_out(f_hi, n), write_out(g_lo, n * m), write_out(g_hi, n * m))
        else {
            return fail(SlStatus::NullPointer, "null output array");
        };
        match cover(x, &ev.inner) {
            Ok((f, g)) => {
                for k in 0..n {
                    fl[k] = f[k].lo();
                    fh[k] = f[k].hi();
                    for l in 0..m {
                        gl[k * m + l] = g.get(k, l).lo();
                        gh[k * m + l] = g.get(k, l).hi();
                    }
                }
                SlStatus::Ok
            }
            Err(e) => fail(overapprox_status(&e), e.to_string()),
        }
    })
}

/// Writes `ĝ(x)` row-major into `out` (`n · m` entries).
///
/// # Safety
/// `ev` must be live; `x` has `2n` entries and `out` has `n·m` entries.
#[no_mangle]
pub unsafe extern "C" fn sl_evidence_estimate_g(ev: *const SlEvidence, x: *const f64, theta: f64, out: *mut f64) -> SlStatus {
    guard(|| {
        let Some(ev) = ev.as_ref() else { return fail(SlStatus::NullPointer, "evidence is null") };
        let (n, m) = (ev.inner.n(), ev.inner.m());
        let (Some(x), Some(o)) = (read(x, 2 * n), write_out(out, n * m)) else {
            return fail(SlStatus::NullPointer, "null array");
        };
        if !(0.0..=1.0).contains(&theta) {
            return fail(SlStatus::InvalidArgument, format!("theta {theta} outside [0, 1]"));
        }
        match estimate_g(x, &ev.inner, theta) {
            Ok(g) => {
                for k in 0..n {
                    for l in 0..m {
                        o[k * m + l] = g[(k, l)];
                    }
                }
                SlStatus::Ok
            }
            Err(e) => fail(overapprox_status(&e), e.to_string()),
        }
    })
}

fn finish_scenario(res: Result<Scenario, ScenarioError>, out: *mut *mut SlScenario) -> SlStatus {
    match res {
        Ok(inner) => {
            // SAFETY: callers checked `out` for null.
            unsafe { *out = Box::into_raw(Box::new(SlScenario { inner })) };
            SlStatus::Ok
        }
        Err(e) => fail(scenario_status(&e), e.to_string()),
    }
}

/// Loads and validates a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sl_scenario_load(path: *const c_char, out: *mut *mut SlScenario) -> SlStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return fail(SlStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            return fail(SlStatus::InvalidArgument, "path is not UTF-8");
        };
        finish_scenario(Scenario::load(path), out)
    })
}

/// Parses and validates a scenario from TOML text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sl_scenario_from_toml(text: *const c_char, out: *mut *mut SlScenario) -> SlStatus {
    guard(|| {
        if text.is_null() || out.is_null() {
            return fail(SlStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        let Ok(text) = CStr::from_ptr(text).to_str() else {
            return fail(SlStatus::InvalidArgument, "text is not UTF-8");
        };
        finish_scenario(ScenarioConfig::from_toml(text).and_then(Scenario::build), out)
    })
}

/// # Safety
/// `sc` must be null or a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn sl_scenario_free(sc: *mut SlScenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

/// Runs the scenario to its horizon.
///
/// # Safety
/// `sc` must be live; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sl_scenario_run(sc: *const SlScenario, out: *mut *mut SlRun) -> SlStatus {
    guard(|| {
        let Some(sc) = sc.as_ref() else { return fail(SlStatus::NullPointer, "scenario is null") };
        if out.is_null() {
            return fail(SlStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        match sc.inner.run() {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SlRun { inner }));
                SlStatus::Ok
            }
            Err(e) => fail(SlStatus::Simulation, e.to_string()),
        }
    })
}

/// # Safety
/// `run` must be null or a live run handle.
#[no_mangle]
pub unsafe extern "C" fn sl_run_free(run: *mut SlRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `run` must be live; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sl_run_summary(run: *const SlRun, out: *mut SlSummary) -> SlStatus {
    guard(|| {
        let (Some(run), Some(out)) = (run.as_ref(), out.as_mut()) else {
            return fail(SlStatus::NullPointer, "null argument");
        };
        let s = &run.inner.summary;
        *out = SlSummary {
            steps: s.steps,
            measurements: s.measurements,
            min_h: s.min_h,
            min_h_v: s.min_h_v,
            max_e2: s.max_e2,
            max_j: s.max_j,
            drops: s.drops.values().sum(),
            restores: s.restores.values().sum(),
            violations: s.violations,
            safe: s.safe(),
        };
        SlStatus::Ok
    })
}

/// Copies the trajectory CSV into `buf` (NUL-terminated). `needed` receives
/// the required size including the NUL; `BufferTooSmall` if `len` is short.
///
/// # Safety
/// `run` must be live; `buf` null or `len` writable bytes; `needed` null or valid.
#[no_mangle]
pub unsafe extern "C" fn sl_run_trajectory_csv(run: *const SlRun, buf: *mut c_char, len: usize, needed: *mut usize) -> SlStatus {
    guard(|| {
        let Some(run) = run.as_ref() else { return fail(SlStatus::NullPointer, "run is null") };
        let csv = run.inner.log.to_csv();
        if let Some(n) = needed.as_mut() {
            *n = csv.len() + 1;
        }
        if buf.is_null() || len < csv.len() + 1 {
            return fail(SlStatus::BufferTooSmall, format!("need {} bytes", csv.len() + 1));
        }
        ptr::copy_nonoverlapping(csv.as_ptr().cast::<c_char>(), buf, csv.len());
        *buf.add(csv.len()) = 0;
        SlStatus::Ok
    })
}
