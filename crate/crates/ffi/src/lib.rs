//! C ABI over the hudtrust simulator, hazard model and signal tools.
//!
//! Every function returns an [`HtStatus`]. On failure the message is kept
//! per thread and can be read with [`ht_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::mem::ManuallyDrop;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hudtrust::hazard::{self, ReactionModel};
use hudtrust::physio::PhysioConfig;
use hudtrust::scenario::{load_scenario, bundled_scenario, ScenarioDef, ScenarioError};
use hudtrust::sim::Simulation;
use hudtrust::stats::mann_whitney_u;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    SimulationError = 4,
    Finished = 5,
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: HtStatus, msg: impl Into<String>) -> HtStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> HtStatus) -> HtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(HtStatus::Panic, "internal panic"),
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ht_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ht_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Opaque simulation handle.
pub struct HtSim {
    sim: ManuallyDrop<Simulation<'static>>,
    scenario: *mut ScenarioDef,
}

impl Drop for HtSim {
    fn drop(&mut self) {
        // SAFETY: `sim` is the only borrower of `scenario`, which came from
        // Box::into_raw in `into_handle`; it is dropped first and never again.
        unsafe {
            ManuallyDrop::drop(&mut self.sim);
            drop(Box::from_raw(self.scenario));
        }
    }
}

fn into_handle(mut scenario: ScenarioDef, seed: u64) -> *mut HtSim {
    scenario.rng_seed = seed;
    let raw = Box::into_raw(Box::new(scenario));
    // SAFETY: the box outlives the simulation, see Drop.
    let sim = ManuallyDrop::new(Simulation::new(unsafe { &*raw }));
    Box::into_raw(Box::new(HtSim { sim, scenario: raw }))
}

fn scenario_status(e: &ScenarioError) -> HtStatus {
    match e {
        ScenarioError::Parse { .. } => HtStatus::ParseError,
        _ => HtStatus::InvalidArgument,
    }
}

/// Ego and cue summary after one tick.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HtTick {
    pub t: f64,
    pub ego_x: f64,
    pub ego_y: f64,
    pub ego_heading: f64,
    pub ego_speed: f64,
    pub omn_cues: u32,
    pub sel_cues: u32,
    /// Objects whose predicted collision lies inside the warning distance.
    pub warnings: u32,
    pub fired_events: u32,
}

/// Creates a simulation of the bundled scenario.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ht_sim_new_bundled(seed: u64, out: *mut *mut HtSim) -> HtStatus {
    guard(|| {
        if out.is_null() {
            return fail(HtStatus::NullPointer, "out is NULL");
        }
        match bundled_scenario() {
            Ok(sc) => {
                *out = into_handle(sc, seed);
                HtStatus::Ok
            }
            Err(e) => fail(scenario_status(&e), e.to_string()),
        }
    })
}

/// Creates a simulation from scenario TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ht_sim_new_from_toml(
    toml: *const c_char,
    seed: u64,
    out: *mut *mut HtSim,
) -> HtStatus {
    guard(|| {
        if toml.is_null() || out.is_null() {
            return fail(HtStatus::NullPointer, "toml or out is NULL");
        }
        let Ok(text) = CStr::from_ptr(toml).to_str() else {
            return fail(HtStatus::InvalidArgument, "scenario text is not UTF-8");
        };
        match load_scenario(text) {
            Ok(sc) => {
                *out = into_handle(sc, seed);
                HtStatus::Ok
            }
            Err(e) => fail(scenario_status(&e), e.to_string()),
        }
    })
}

/// Frees a handle. NULL is ignored.
///
/// # Safety
/// `sim` must come from one of the constructors and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ht_sim_free(sim: *mut HtSim) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

fn tick_of(h: &HtSim, omn: usize, sel: usize, warnings: usize) -> HtTick {
    let w = &h.sim.world;
    HtTick {
        t: w.t,
        ego_x: w.ego.position.x,
        ego_y: w.ego.position.y,
        ego_heading: w.ego.heading,
        ego_speed: w.ego.speed,
        omn_cues: omn as u32,
        sel_cues: sel as u32,
        warnings: warnings as u32,
        fired_events: h.sim.fired_events().len() as u32,
    }
}

/// Advances one tick. Returns `Finished` once the scenario has ended.
///
/// # Safety
/// `sim` must be a live handle; `out` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn ht_sim_step(sim: *mut HtSim, out: *mut HtTick) -> HtStatus {
    guard(|| {
        let Some(h) = sim.as_mut() else {
            return fail(HtStatus::NullPointer, "sim is NULL");
        };
        if h.sim.finished() {
            return fail(HtStatus::Finished, "scenario has ended");
        }
        match h.sim.step() {
            Ok(o) => {
                if let Some(out) = out.as_mut() {
                    let warnings = o.assessments.iter().filter(|a| a.warning_active).count();
                    *out = tick_of(h, o.omn.cues.len(), o.sel.cues.len(), warnings);
                }
                HtStatus::Ok
            }
            Err(e) => fail(HtStatus::SimulationError, e.to_string()),
        }
    })
}

/// Steps until the end of the scenario and writes the tick count.
///
/// # Safety
/// `sim` must be a live handle; `ticks` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn ht_sim_run(sim: *mut HtSim, ticks: *mut u64) -> HtStatus {
    guard(|| {
        let Some(h) = sim.as_mut() else {
            return fail(HtStatus::NullPointer, "sim is NULL");
        };
        let mut n = 0u64;
        while !h.sim.finished() {
            if let Err(e) = h.sim.step() {
                return fail(HtStatus::SimulationError, e.to_string());
            }
            n += 1;
        }
        if let Some(t) = ticks.as_mut() {
            *t = n;
        }
        HtStatus::Ok
    })
}

/// Current state without stepping; cue counts are zero.
///
/// # Safety
/// `sim` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ht_sim_state(sim: *const HtSim, out: *mut HtTick) -> HtStatus {
    guard(|| match (sim.as_ref(), out.as_mut()) {
        (Some(h), Some(out)) => {
            *out = tick_of(h, 0, 0, 0);
            HtStatus::Ok
        }
        _ => fail(HtStatus::NullPointer, "sim or out is NULL"),
    })
}

/// 1 when the scenario has ended, 0 otherwise or for NULL.
///
/// # Safety
/// `sim` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ht_sim_finished(sim: *const HtSim) -> i32 {
    sim.as_ref().map_or(0, |h| h.sim.finished() as i32)
}

/// Distance travelled during the reaction time plus the braking distance.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ht_warning_distance(
    speed: f64,
    reaction_time_s: f64,
    decel: f64,
    out: *mut f64,
) -> HtStatus {
    guard(|| {
        let Some(out) = out.as_mut() else {
            return fail(HtStatus::NullPointer, "out is NULL");
        };
        let model = ReactionModel {
            reaction_time_s,
            assumed_decel: decel,
        };
        if let Err(m) = model.validate() {
            return fail(HtStatus::InvalidArgument, m);
        }
        if !speed.is_finite() {
            return fail(HtStatus::InvalidArgument, "speed must be finite");
        }
        *out = hazard::warning_distance(speed, &model);
        HtStatus::Ok
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ht_hazard_severity(distance: f64, d_warn: f64, out: *mut f64) -> HtStatus {
    guard(|| {
        let Some(out) = out.as_mut() else {
            return fail(HtStatus::NullPointer, "out is NULL");
        };
        match hazard::hazard_severity(distance, d_warn) {
            Ok(s) => {
                *out = s;
                HtStatus::Ok
            }
            Err(e) => fail(HtStatus::InvalidArgument, e.to_string()),
        }
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HtRgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

/// Green-to-red warning color for a severity in [0, 1].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ht_color_code(severity: f64, k: f64, out: *mut HtRgb) -> HtStatus {
    guard(|| {
        let Some(out) = out.as_mut() else {
            return fail(HtStatus::NullPointer, "out is NULL");
        };
        match hazard::color_code(severity, k) {
            Ok(c) => {
                *out = HtRgb {
                    r: c.0,
                    g: c.1,
                    b: c.2,
                };
                HtStatus::Ok
            }
            Err(e) => fail(HtStatus::InvalidArgument, e.to_string()),
        }
    })
}

unsafe fn slice<'a>(p: *const f64, n: usize) -> Option<&'a [f64]> {
    if n == 0 {
        Some(&[])
    } else if p.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(p, n))
    }
}

/// Zero-phase SCR band-pass with the default band and order at
/// `sample_rate` Hz. `out` receives `n` samples.
///
/// # Safety
/// `x` must hold `n` readable values and `out` room for `n` values.
#[no_mangle]
pub unsafe extern "C" fn ht_bandpass_scr(
    x: *const f64,
    n: usize,
    sample_rate: f64,
    out: *mut f64,
) -> HtStatus {
    guard(|| {
        let Some(x) = slice(x, n) else {
            return fail(HtStatus::NullPointer, "x is NULL");
        };
        if out.is_null() {
            return fail(HtStatus::NullPointer, "out is NULL");
        }
        let cfg = PhysioConfig {
            sample_rate_hz: sample_rate,
            ..PhysioConfig::default()
        };
        if let Err(m) = cfg.validate() {
            return fail(HtStatus::InvalidArgument, m);
        }
        let y = match cfg.scr_filter().and_then(|f| f.filtfilt(x)) {
            Ok(y) => y,
            Err(e) => return fail(HtStatus::InvalidArgument, e.to_string()),
        };
        ptr::copy_nonoverlapping(y.as_ptr(), out, n);
        HtStatus::Ok
    })
}

/// Two-sided Mann-Whitney U of `a` against `b`.
///
/// # Safety
/// `a` and `b` must hold `na` and `nb` values; `u` and `p` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ht_mann_whitney_u(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    u: *mut f64,
    p: *mut f64,
) -> HtStatus {
    guard(|| {
        let (Some(a), Some(b)) = (slice(a, na), slice(b, nb)) else {
            return fail(HtStatus::NullPointer, "sample pointer is NULL");
        };
        if u.is_null() || p.is_null() {
            return fail(HtStatus::NullPointer, "u or p is NULL");
        }
        match mann_whitney_u(a, b) {
            Ok(r) => {
                *u = r.statistic;
                *p = r.p;
                HtStatus::Ok
            }
            Err(e) => fail(HtStatus::InvalidArgument, e.to_string()),
        }
    })
}
