//! Exercises the C entry points end to end from Rust: handle lifecycles,
//! status codes, error messages, buffer contracts, and agreement with the
//! underlying library.

use std::ffi::{c_char, CStr, CString};

use dhwfs_ffi::*;

fn set(cfg: *mut DhwfsConfig, key: &str, value: &str) -> DhwfsStatus {
    let key = CString::new(key).unwrap();
    let value = CString::new(value).unwrap();
    unsafe { dhwfs_config_set(cfg, key.as_ptr(), value.as_ptr()) }
}

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    unsafe {
        dhwfs_last_error(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

#[test]
fn version_is_a_static_string() {
    let version = unsafe { CStr::from_ptr(dhwfs_version()) };
    assert_eq!(version.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn config_set_accepts_known_keys_and_rejects_unknown() {
    let cfg = dhwfs_config_new();
    assert!(!cfg.is_null());
    assert_eq!(set(cfg, "n", "32"), DhwfsStatus::Ok);
    assert_eq!(unsafe { dhwfs_config_n(cfg) }, 32);
    assert_eq!(set(cfg, "no_such_key", "1"), DhwfsStatus::Config);
    assert!(last_error().contains("no_such_key"), "{}", last_error());
    assert_eq!(set(cfg, "lambda", "not-a-number"), DhwfsStatus::Config);
    // Out-of-range values are stored here and rejected when a handle is
    // built from the configuration.
    assert_eq!(set(cfg, "lambda", "1.5"), DhwfsStatus::Ok);
    let rec = unsafe { dhwfs_reconstructor_new(cfg) };
    assert!(rec.is_null());
    assert!(last_error().contains("lambda"), "{}", last_error());
    unsafe { dhwfs_config_free(cfg) };
}

#[test]
fn null_handles_are_reported_not_dereferenced() {
    assert_eq!(
        set(std::ptr::null_mut(), "n", "32"),
        DhwfsStatus::NullArgument
    );
    assert_eq!(unsafe { dhwfs_config_n(std::ptr::null()) }, 0);
    assert_eq!(
        unsafe { dhwfs_reconstructor_process_frame(std::ptr::null_mut(), std::ptr::null(), 0) },
        DhwfsStatus::NullArgument
    );
    assert_eq!(
        unsafe { dhwfs_reconstructor_frame_index(std::ptr::null()) },
        0
    );
    unsafe {
        dhwfs_config_free(std::ptr::null_mut());
        dhwfs_simulator_free(std::ptr::null_mut());
        dhwfs_reconstructor_free(std::ptr::null_mut());
        dhwfs_strehl_meter_free(std::ptr::null_mut());
    }
}

#[test]
fn invalid_config_makes_null_simulator_with_message() {
    let cfg = dhwfs_config_new();
    assert_eq!(set(cfg, "n", "0"), DhwfsStatus::Ok);
    let sim = unsafe { dhwfs_simulator_new(cfg, 1) };
    assert!(sim.is_null());
    assert!(!last_error().is_empty());
    unsafe { dhwfs_config_free(cfg) };
}

#[test]
fn simulate_reconstruct_score_round_trip() {
    let cfg = dhwfs_config_new();
    for (key, value) in [("n", "32"), ("frames", "3"), ("seed", "5")] {
        assert_eq!(set(cfg, key, value), DhwfsStatus::Ok);
    }
    let n = unsafe { dhwfs_config_n(cfg) };
    let sim = unsafe { dhwfs_simulator_new(cfg, 5) };
    let rec = unsafe { dhwfs_reconstructor_new(cfg) };
    assert!(!sim.is_null() && !rec.is_null());

    let mut measurement = vec![0.0f64; 2 * n * n];
    let mut truth = vec![0.0f64; n * n];
    for _ in 0..3 {
        assert_eq!(
            unsafe {
                dhwfs_simulator_next_frame(
                    sim,
                    measurement.as_mut_ptr(),
                    measurement.len(),
                    truth.as_mut_ptr(),
                )
            },
            DhwfsStatus::Ok
        );
        assert_eq!(
            unsafe {
                dhwfs_reconstructor_process_frame(rec, measurement.as_ptr(), measurement.len())
            },
            DhwfsStatus::Ok
        );
    }
    assert_eq!(unsafe { dhwfs_reconstructor_frame_index(rec) }, 3);
    assert_eq!(
        unsafe { dhwfs_reconstructor_transform_count(rec) },
        3 * 3,
        "three transforms per frame at one EM pass"
    );

    let mut phase = vec![0.0f64; n * n];
    let mut reflectance = vec![0.0f64; n * n];
    assert_eq!(
        unsafe { dhwfs_reconstructor_phase(rec, phase.as_mut_ptr(), phase.len()) },
        DhwfsStatus::Ok
    );
    assert_eq!(
        unsafe {
            dhwfs_reconstructor_reflectance(rec, reflectance.as_mut_ptr(), reflectance.len())
        },
        DhwfsStatus::Ok
    );
    assert!(phase.iter().all(|v| v.is_finite()));
    assert!(reflectance.iter().all(|v| *v > 0.0));

    let meter = unsafe { dhwfs_strehl_meter_new(n, n as f64) };
    assert!(!meter.is_null());
    let mut strehl = 0.0f64;
    assert_eq!(
        unsafe {
            dhwfs_strehl(
                meter,
                phase.as_ptr(),
                truth.as_ptr(),
                phase.len(),
                &mut strehl,
            )
        },
        DhwfsStatus::Ok
    );
    assert!((0.0..=1.0001).contains(&strehl), "strehl {strehl}");
    let mut unity = 0.0f64;
    assert_eq!(
        unsafe { dhwfs_strehl(meter, truth.as_ptr(), truth.as_ptr(), truth.len(), &mut unity) },
        DhwfsStatus::Ok
    );
    assert!((unity - 1.0).abs() < 1e-9, "self-comparison gives {unity}");

    assert_eq!(unsafe { dhwfs_reconstructor_reset(rec) }, DhwfsStatus::Ok);
    assert_eq!(unsafe { dhwfs_reconstructor_transform_count(rec) }, 0);

    unsafe {
        dhwfs_strehl_meter_free(meter);
        dhwfs_reconstructor_free(rec);
        dhwfs_simulator_free(sim);
        dhwfs_config_free(cfg);
    }
}

#[test]
fn buffer_length_mismatches_are_dimension_errors() {
    let cfg = dhwfs_config_new();
    assert_eq!(set(cfg, "n", "32"), DhwfsStatus::Ok);
    let sim = unsafe { dhwfs_simulator_new(cfg, 1) };
    let rec = unsafe { dhwfs_reconstructor_new(cfg) };
    assert!(!sim.is_null() && !rec.is_null(), "{}", last_error());
    let mut short = vec![0.0f64; 7];
    assert_eq!(
        unsafe {
            dhwfs_simulator_next_frame(sim, short.as_mut_ptr(), short.len(), std::ptr::null_mut())
        },
        DhwfsStatus::Dimension
    );
    assert!(last_error().contains("2048"), "{}", last_error());
    assert_eq!(
        unsafe { dhwfs_reconstructor_phase(rec, short.as_mut_ptr(), short.len()) },
        DhwfsStatus::Dimension
    );
    unsafe {
        dhwfs_reconstructor_free(rec);
        dhwfs_simulator_free(sim);
        dhwfs_config_free(cfg);
    }
}

#[test]
fn degenerate_frame_is_skipped_with_index_advanced() {
    let cfg = dhwfs_config_new();
    assert_eq!(set(cfg, "n", "16"), DhwfsStatus::Ok);
    let rec = unsafe { dhwfs_reconstructor_new(cfg) };
    let zeros = vec![0.0f64; 2 * 16 * 16];
    let status =
        unsafe { dhwfs_reconstructor_process_frame(rec, zeros.as_ptr(), zeros.len()) };
    assert_eq!(status, DhwfsStatus::Ok, "constant frames are skipped");
    assert_eq!(unsafe { dhwfs_reconstructor_frame_index(rec) }, 1);
    assert_eq!(
        unsafe { dhwfs_reconstructor_transform_count(rec) },
        0,
        "no transforms spent on a skipped frame"
    );
    unsafe {
        dhwfs_reconstructor_free(rec);
        dhwfs_config_free(cfg);
    }
}

#[test]
fn generated_header_is_current_and_covers_the_surface() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/dhwfs.h");
    let text = std::fs::read_to_string(header).expect("header exists");
    for symbol in [
        "dhwfs_version",
        "dhwfs_last_error",
        "dhwfs_config_new",
        "dhwfs_config_set",
        "dhwfs_config_n",
        "dhwfs_config_free",
        "dhwfs_simulator_new",
        "dhwfs_simulator_next_frame",
        "dhwfs_simulator_free",
        "dhwfs_reconstructor_new",
        "dhwfs_reconstructor_process_frame",
        "dhwfs_reconstructor_phase",
        "dhwfs_reconstructor_reflectance",
        "dhwfs_reconstructor_frame_index",
        "dhwfs_reconstructor_transform_count",
        "dhwfs_reconstructor_reset",
        "dhwfs_reconstructor_free",
        "dhwfs_strehl_meter_new",
        "dhwfs_strehl",
        "dhwfs_strehl_meter_free",
        "DHWFS_STATUS_OK",
        "DHWFS_STATUS_PANIC",
    ] {
        assert!(text.contains(symbol), "header missing {symbol}");
    }
}
