use std::ffi::{c_char, CStr, CString};
use std::process::Command;
use std::ptr;

use maxweight_lab_ffi::*;

const CONFIG: &str = r#"{
    "schema_version": 1,
    "num_queues": 3,
    "arrivals": [
        {"law": {"kind": "bernoulli", "p": 0.2}},
        {"law": {"kind": "bernoulli", "p": 0.3}},
        {"law": {"kind": "bernoulli", "p": 0.3}}
    ],
    "horizon": 2000,
    "replications": 2,
    "seed": 7
}"#;

fn config() -> *mut MwlConfig {
    let text = CString::new(CONFIG).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(
        unsafe { mwl_config_from_json(text.as_ptr(), &mut cfg) },
        MwlStatus::Ok
    );
    assert!(!cfg.is_null());
    cfg
}

fn last_error() -> String {
    let mut need = 0usize;
    unsafe { mwl_last_error_message(ptr::null_mut(), 0, &mut need) };
    let mut buf = vec![0 as c_char; need];
    assert_eq!(
        unsafe { mwl_last_error_message(buf.as_mut_ptr(), need, ptr::null_mut()) },
        MwlStatus::Ok
    );
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(mwl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn bad_json_sets_config_status_and_message() {
    let text = CString::new("{\"schema_version\": 1, \"bogus\": 1}").unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(
        unsafe { mwl_config_from_json(text.as_ptr(), &mut cfg) },
        MwlStatus::Config
    );
    assert!(cfg.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn null_arguments_are_rejected() {
    let mut cfg = ptr::null_mut();
    assert_eq!(
        unsafe { mwl_config_from_json(ptr::null(), &mut cfg) },
        MwlStatus::NullPointer
    );
    assert_eq!(
        unsafe { mwl_simulator_run(ptr::null_mut(), 1) },
        MwlStatus::NullPointer
    );
    assert_eq!(unsafe { mwl_simulator_num_queues(ptr::null()) }, 0);
    assert!(unsafe { mwl_report_json(ptr::null()) }.is_null());
    unsafe {
        mwl_config_free(ptr::null_mut());
        mwl_simulator_free(ptr::null_mut());
        mwl_report_free(ptr::null_mut());
    }
}

#[test]
fn digest_copy_out_and_small_buffer() {
    let cfg = config();
    let mut need = 0usize;
    let mut small = [0 as c_char; 8];
    let s = unsafe { mwl_config_digest(cfg, small.as_mut_ptr(), small.len(), &mut need) };
    assert_eq!(s, MwlStatus::BufferTooSmall);
    assert_eq!(need, 65);
    let mut buf = vec![0 as c_char; need];
    assert_eq!(
        unsafe { mwl_config_digest(cfg, buf.as_mut_ptr(), need, &mut need) },
        MwlStatus::Ok
    );
    let hex = unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_str()
        .unwrap()
        .to_owned();
    assert_eq!(hex.len(), 64);

    assert_eq!(unsafe { mwl_config_set_seed(cfg, 8) }, MwlStatus::Ok);
    unsafe { mwl_config_digest(cfg, buf.as_mut_ptr(), need, ptr::null_mut()) };
    assert_ne!(
        unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap(),
        hex
    );

    assert_eq!(unsafe { mwl_config_set_horizon(cfg, 0) }, MwlStatus::Config);
    unsafe { mwl_config_free(cfg) };
}

#[test]
fn simulator_steps_are_reproducible() {
    let cfg = config();
    let run = || {
        let mut sim = ptr::null_mut();
        assert_eq!(
            unsafe { mwl_simulator_new(cfg, 0, &mut sim) },
            MwlStatus::Ok
        );
        assert_eq!(unsafe { mwl_simulator_num_queues(sim) }, 3);
        assert_eq!(unsafe { mwl_simulator_run(sim, 500) }, MwlStatus::Ok);
        assert_eq!(unsafe { mwl_simulator_slot(sim) }, 500);
        let mut q = [0u64; 3];
        assert_eq!(
            unsafe { mwl_simulator_lengths(sim, q.as_mut_ptr(), 3) },
            MwlStatus::Ok
        );
        assert_eq!(
            unsafe { mwl_simulator_lengths(sim, q.as_mut_ptr(), 2) },
            MwlStatus::InvalidArgument
        );
        unsafe { mwl_simulator_free(sim) };
        q
    };
    assert_eq!(run(), run());
    unsafe { mwl_config_free(cfg) };
}

#[test]
fn simulate_returns_report_json() {
    let cfg = config();
    let mut report = ptr::null_mut();
    assert_eq!(unsafe { mwl_simulate(cfg, 1, &mut report) }, MwlStatus::Ok);
    let json = unsafe { CStr::from_ptr(mwl_report_json(report)) }
        .to_str()
        .unwrap()
        .to_owned();
    assert!(json.contains("\"config_digest\""));
    assert!(json.contains("\"seed\": 7") || json.contains("\"seed\":7"));
    unsafe {
        mwl_report_free(report);
        mwl_config_free(cfg);
    }
}

#[test]
fn region_verdicts() {
    let lambda = [0.2, 0.6, 0.3];
    let mut v = MwlRegionVerdict {
        stable: false,
        threshold: 0.0,
        mu12: 0.0,
        mu3: 0.0,
        queue_verdicts: [MwlQueueVerdict::NotApplicable; 3],
    };
    assert_eq!(
        unsafe { mwl_region_classify(lambda.as_ptr(), 3, &mut v) },
        MwlStatus::Ok
    );
    assert!(v.stable);
    assert!((v.threshold - 0.45).abs() < 1e-12);
    assert_eq!(v.queue_verdicts[1], MwlQueueVerdict::DelayUnstable);

    let unstable = [0.2, 0.8, 0.3];
    assert_eq!(
        unsafe { mwl_region_classify(unstable.as_ptr(), 3, &mut v) },
        MwlStatus::Ok
    );
    assert!(!v.stable);
    assert!(v.mu12.is_nan());

    let bad = [0.2, -0.1, 0.3];
    assert_eq!(
        unsafe { mwl_region_classify(bad.as_ptr(), 3, &mut v) },
        MwlStatus::Domain
    );
    assert_eq!(
        unsafe { mwl_region_classify(lambda.as_ptr(), 2, &mut v) },
        MwlStatus::InvalidArgument
    );
}

#[test]
fn fluid_burst_growth_case() {
    let lambda = [0.2, 0.6, 0.3];
    let mut f = std::mem::MaybeUninit::<MwlFluidTrajectory>::uninit();
    assert_eq!(
        unsafe { mwl_fluid_burst(lambda.as_ptr(), 3, 1000.0, f.as_mut_ptr()) },
        MwlStatus::Ok
    );
    let f = unsafe { f.assume_init() };
    assert!(!f.queue2_capped);
    assert!(f.q2_growth_rate > 0.0);
    assert!(f.t2 > f.t1 && f.t1 > 0.0);
    assert!((f.mu[0] - f.mu[1]).abs() < 1e-12);

    let outside = [0.2, 0.9, 0.3];
    let mut g = std::mem::MaybeUninit::<MwlFluidTrajectory>::uninit();
    assert_eq!(
        unsafe { mwl_fluid_burst(outside.as_ptr(), 3, 1000.0, g.as_mut_ptr()) },
        MwlStatus::Domain
    );
}

#[test]
fn header_parses_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/maxweight_lab.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in [
        "mwl_config_from_json",
        "mwl_simulate",
        "mwl_fluid_burst",
        "MWL_STATUS_PANIC",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(out) = Command::new("cc")
        .args(["-fsyntax-only", "-x", "c", header])
        .output()
    else {
        eprintln!("no C compiler; skipping syntax check");
        return;
    };
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
