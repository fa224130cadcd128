use std::ffi::{c_char, CStr, CString};
use std::ptr;

use safelearn_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    unsafe { sl_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

// single row: f(x) = -0.5 v, g(x) = 2
fn true_f(x: &[f64]) -> f64 {
    -0.5 * x[1]
}

unsafe fn new_evidence() -> *mut SlEvidence {
    let mut ev = ptr::null_mut();
    let st = sl_evidence_new(1, 1, [0.5].as_ptr(), [0.0].as_ptr(), 100.0, [0.0, 0.0].as_ptr(), &mut ev);
    assert_eq!(st, SlStatus::Ok);
    assert!(!ev.is_null());
    ev
}

#[test]
fn evidence_round_trip() {
    unsafe {
        let ev = new_evidence();
        assert_eq!(sl_evidence_len(ev), 1);
        for (x, u) in [([0.1, 0.4], 1.0), ([-0.2, -0.3], -0.5)] {
            let xd = [x[1], true_f(&x) + 2.0 * u];
            assert_eq!(sl_evidence_ingest(ev, x.as_ptr(), xd.as_ptr(), [u].as_ptr(), 0.0), SlStatus::Ok);
        }
        assert_eq!(sl_evidence_len(ev), 3);

        let x = [0.0, 0.1];
        let (mut fl, mut fh, mut gl, mut gh) = (0.0, 0.0, 0.0, 0.0);
        assert_eq!(sl_evidence_cover(ev, x.as_ptr(), &mut fl, &mut fh, &mut gl, &mut gh), SlStatus::Ok);
        let f = true_f(&x);
        assert!(fl - 1e-9 <= f && f <= fh + 1e-9, "{fl} {f} {fh}");
        assert!(gl - 1e-9 <= 2.0 && 2.0 <= gh + 1e-9, "{gl} {gh}");

        let mut g = 0.0;
        assert_eq!(sl_evidence_estimate_g(ev, x.as_ptr(), 0.5, &mut g), SlStatus::Ok);
        assert!((g - 0.5 * (gl + gh)).abs() < 1e-12);
        assert_eq!(sl_evidence_estimate_g(ev, x.as_ptr(), 1.5, &mut g), SlStatus::InvalidArgument);
        sl_evidence_free(ev);
    }
}

#[test]
fn contradictory_datapoint_is_rejected() {
    unsafe {
        let ev = new_evidence();
        let x = [0.0, 0.0];
        assert_eq!(sl_evidence_ingest(ev, x.as_ptr(), [0.0, 1.0].as_ptr(), [0.0].as_ptr(), 0.0), SlStatus::Ok);
        // same state and input, different derivative
        let st = sl_evidence_ingest(ev, x.as_ptr(), [0.0, 3.0].as_ptr(), [0.0].as_ptr(), 0.1);
        assert_eq!(st, SlStatus::Inconsistent);
        assert!(!last_error().is_empty());
        assert_eq!(sl_evidence_len(ev), 2);
        sl_evidence_free(ev);
    }
}

#[test]
fn null_pointers_are_reported() {
    unsafe {
        assert_eq!(sl_evidence_new(1, 1, ptr::null(), [0.0].as_ptr(), 1.0, [0.0; 2].as_ptr(), &mut ptr::null_mut()), SlStatus::NullPointer);
        assert_eq!(sl_evidence_ingest(ptr::null_mut(), ptr::null(), ptr::null(), ptr::null(), 0.0), SlStatus::NullPointer);
        assert_eq!(sl_evidence_len(ptr::null()), 0);
        assert_eq!(sl_scenario_load(ptr::null(), &mut ptr::null_mut()), SlStatus::NullPointer);
        assert_eq!(sl_run_summary(ptr::null(), ptr::null_mut()), SlStatus::NullPointer);
        sl_evidence_free(ptr::null_mut());
        sl_scenario_free(ptr::null_mut());
        sl_run_free(ptr::null_mut());
    }
}

#[test]
fn bad_lipschitz_bounds() {
    unsafe {
        let mut ev = ptr::null_mut();
        let st = sl_evidence_new(1, 1, [-1.0].as_ptr(), [0.0].as_ptr(), 1.0, [0.0; 2].as_ptr(), &mut ev);
        assert_eq!(st, SlStatus::InvalidArgument);
        assert!(ev.is_null());
    }
}

#[test]
fn last_error_truncates() {
    unsafe {
        sl_evidence_ingest(ptr::null_mut(), ptr::null(), ptr::null(), ptr::null(), 0.0);
        let full = sl_last_error(ptr::null_mut(), 0);
        let mut buf = [1 as c_char; 4];
        assert_eq!(sl_last_error(buf.as_mut_ptr(), 4), full);
        assert_eq!(buf[3], 0);
    }
}

fn scenario_path(name: &str) -> CString {
    CString::new(format!("{}/../../scenarios/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn scenario_run_and_csv() {
    unsafe {
        let mut sc = ptr::null_mut();
        assert_eq!(sl_scenario_load(scenario_path("square_g.toml").as_ptr(), &mut sc), SlStatus::Ok, "{}", last_error());
        let mut run = ptr::null_mut();
        assert_eq!(sl_scenario_run(sc, &mut run), SlStatus::Ok, "{}", last_error());
        let mut s = SlSummary::default();
        assert_eq!(sl_run_summary(run, &mut s), SlStatus::Ok);
        assert!(s.safe && s.min_h > 0.0 && s.min_h_v > 0.0 && s.steps > 0);

        let mut needed = 0usize;
        assert_eq!(sl_run_trajectory_csv(run, ptr::null_mut(), 0, &mut needed), SlStatus::BufferTooSmall);
        let mut buf = vec![0 as c_char; needed];
        assert_eq!(sl_run_trajectory_csv(run, buf.as_mut_ptr(), needed, ptr::null_mut()), SlStatus::Ok);
        let csv = CStr::from_ptr(buf.as_ptr()).to_str().unwrap();
        assert!(csv.starts_with("t,x0,"));
        assert_eq!(csv.len() + 1, needed);
        sl_run_free(run);
        sl_scenario_free(sc);
    }
}

#[test]
fn scenario_errors() {
    unsafe {
        let mut sc = ptr::null_mut();
        let missing = CString::new("/nonexistent/x.toml").unwrap();
        assert_eq!(sl_scenario_load(missing.as_ptr(), &mut sc), SlStatus::Io);
        let garbage = CString::new("name = [").unwrap();
        assert_eq!(sl_scenario_from_toml(garbage.as_ptr(), &mut sc), SlStatus::Parse);
        assert!(sc.is_null());

        let text = std::fs::read_to_string(scenario_path("square_g.toml").to_str().unwrap()).unwrap();
        let bad = CString::new(text.replace("radius2 = 1.0", "radius2 = 0.0")).unwrap();
        assert_eq!(sl_scenario_from_toml(bad.as_ptr(), &mut sc), SlStatus::Validation, "{}", last_error());
    }
}
