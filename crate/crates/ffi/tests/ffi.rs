use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use entbound_ffi::*;

fn last_error() -> String {
    let p = eb_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn algebraic(n: usize, p: f64, amp: f64, b: f64) -> *mut EbModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { eb_model_new_algebraic(n, p, amp, b, &mut m) }, EbStatus::Ok);
    m
}

#[test]
fn ground_state_overlap_equals_negativity() {
    let m = algebraic(6, 1.0, -1.0, 0.8);
    let mut s = ptr::null_mut();
    let mut energy = 0.0;
    let mut degenerate = true;
    unsafe {
        assert_eq!(eb_ground_state(m, &mut s, &mut energy, &mut degenerate), EbStatus::Ok);
        assert!(!degenerate);
        assert!(energy < 0.0);
        let (mut e, mut o) = (0.0, 0.0);
        assert_eq!(eb_state_log_negativity(s, &mut e), EbStatus::Ok);
        assert_eq!(eb_state_bell_overlap(s, EbBranch::Ferro, &mut o), EbStatus::Ok);
        assert!((e - o).abs() < 1e-8, "{e} {o}");

        let (mut w, mut w0, mut w1) = (0.0, f64::NAN, f64::NAN);
        assert_eq!(
            eb_witness_optimize(m, s, true, EbBranch::Ferro, 60, &mut w, &mut w0, &mut w1),
            EbStatus::Ok
        );
        assert!(w <= e + 1e-8 && w > 0.0);
        assert!(w0.is_finite() && w1.is_finite());
        eb_state_free(s);
        eb_model_free(m);
    }
}

#[test]
fn model_queries() {
    let m = algebraic(4, 2.0, -1.0, 0.0);
    let mut j0 = 0.0;
    let mut d = EbDefiniteness::Indefinite;
    unsafe {
        assert_eq!(eb_model_j0(m, &mut j0), EbStatus::Ok);
        assert!((j0 - 1.0).abs() < 1e-15);
        assert_eq!(eb_cross_block_classify(m, &mut d), EbStatus::Ok);
        assert_eq!(d, EbDefiniteness::NegativeSemidefinite);
        eb_model_free(m);
    }

    // the same chain spelled out entry by entry
    let mut j = [0.0f64; 16];
    for a in 0..4usize {
        for b in 0..4usize {
            if a != b {
                j[4 * a + b] = -1.0 / (a.abs_diff(b) as f64).powi(2);
            }
        }
    }
    let mut e = ptr::null_mut();
    unsafe {
        assert_eq!(eb_model_new_explicit(4, j.as_ptr(), 0.0, &mut e), EbStatus::Ok);
        assert_eq!(eb_cross_block_classify(e, &mut d), EbStatus::Ok);
        assert_eq!(d, EbDefiniteness::NegativeSemidefinite);
        eb_model_free(e);
    }
}

#[test]
fn amplitudes_round_trip() {
    // Bell pair inside the first half: nothing crosses the cut
    let mut re = [0.0f64; 16];
    re[0] = 1.0;
    re[0b1100] = 1.0;
    let mut s = ptr::null_mut();
    let mut e = f64::NAN;
    unsafe {
        assert_eq!(eb_state_from_amplitudes(4, re.as_ptr(), ptr::null(), &mut s), EbStatus::Ok);
        assert_eq!(eb_state_log_negativity(s, &mut e), EbStatus::Ok);
        assert!(e.abs() < 1e-12);
        eb_state_free(s);

        // a single Bell pair across the cut
        let mut re = [0.0f64; 4];
        let im = [0.0, 0.0, 0.0, 3.0];
        re[0] = 3.0;
        assert_eq!(eb_state_from_amplitudes(2, re.as_ptr(), im.as_ptr(), &mut s), EbStatus::Ok);
        assert_eq!(eb_state_log_negativity(s, &mut e), EbStatus::Ok);
        assert!((e - 1.0).abs() < 1e-12);
        eb_state_free(s);
    }
}

#[test]
fn errors_are_reported() {
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(eb_model_new_algebraic(5, 1.0, 1.0, 0.0, &mut m), EbStatus::InvalidArgument);
        assert!(m.is_null());
        assert!(last_error().contains('5'));
        assert_eq!(eb_model_new_algebraic(4, 1.0, 1.0, 0.0, ptr::null_mut()), EbStatus::NullPointer);
        assert!(last_error().contains("out"));
        let mut x = 0.0;
        assert_eq!(eb_model_j0(ptr::null(), &mut x), EbStatus::NullPointer);
        assert_eq!(
            eb_state_from_amplitudes(2, [0.0; 4].as_ptr(), ptr::null(), &mut ptr::null_mut()),
            EbStatus::InvalidState
        );
        let j = [0.0, 1.0, 2.0, 0.0];
        assert_eq!(eb_model_new_explicit(2, j.as_ptr(), 0.0, &mut m), EbStatus::InvalidArgument);
        assert!(last_error().contains("symmetric"));
        eb_model_free(ptr::null_mut());
        eb_state_free(ptr::null_mut());
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(eb_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_and_links_from_c() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/entbound.h");
    assert!(header.exists());
    let text = std::fs::read_to_string(&header).unwrap();
    for f in [
        "eb_model_new_algebraic",
        "eb_model_new_explicit",
        "eb_model_free",
        "eb_model_j0",
        "eb_ground_state",
        "eb_state_free",
        "eb_state_log_negativity",
        "eb_state_bell_overlap",
        "eb_witness_optimize",
        "eb_cross_block_classify",
        "eb_state_from_amplitudes",
        "eb_last_error_message",
    ] {
        assert!(text.contains(&format!("{f}(")), "{f} missing from header");
    }

    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let check = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"])
        .arg("-I")
        .arg(dir.join("include"))
        .arg(dir.join("tests/c/smoke.c"))
        .status()
        .unwrap();
    assert!(check.success());

    // deps/<test binary> -> profile directory holding the static library
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().and_then(|p| p.parent()).map(|p| p.join("libentbound_ffi.a"));
    let Some(lib) = lib.filter(|l| l.exists()) else {
        eprintln!("static library not found; skipping link step");
        return;
    };
    let tmp = tempfile::tempdir().unwrap();
    let bin = tmp.path().join("smoke");
    let build = Command::new("cc")
        .arg("-I")
        .arg(dir.join("include"))
        .arg(dir.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(build.success());
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let value: f64 = String::from_utf8_lossy(&run.stdout).trim().parse().unwrap();
    assert!(value > 0.0 && value < 2.0);
}
