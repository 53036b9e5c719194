use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use portfolio_anneal::qubo::{exact_solve, QuboInstance};
use portfolio_anneal_ffi::*;

fn last_error() -> String {
    let p = pa_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn generated(n: usize) -> *mut PaQubo {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { pa_qubo_generate(n, 0, 11, &mut h) }, PA_OK);
    assert!(!h.is_null());
    h
}

#[test]
fn handle_lifecycle_and_solvers() {
    let h = generated(12);
    let mut n = 0;
    assert_eq!(unsafe { pa_qubo_n(h, &mut n) }, PA_OK);
    assert_eq!(n, 12);

    let mut bits = vec![0u8; n];
    let mut exact = 0.0;
    assert_eq!(
        unsafe { pa_solve_exact(h, 0, bits.as_mut_ptr(), n, &mut exact) },
        PA_OK
    );
    let mut check = 0.0;
    assert_eq!(
        unsafe { pa_qubo_evaluate(h, bits.as_ptr(), n, &mut check) },
        PA_OK
    );
    assert_eq!(check, exact);

    let mut greedy = 0.0;
    assert_eq!(
        unsafe { pa_solve_greedy(h, bits.as_mut_ptr(), n, &mut greedy) },
        PA_OK
    );
    assert!(greedy >= exact);

    let (mut ga, mut calls) = (0.0, 0u64);
    let rc = unsafe { pa_solve_ga(h, 3, 200, true, bits.as_mut_ptr(), n, &mut ga, &mut calls) };
    assert_eq!(rc, PA_OK);
    assert!(ga >= exact && ga <= greedy);
    assert!(calls > 0);

    // JSON round trip matches the Rust-side oracle
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { pa_qubo_to_json(h, &mut s) }, PA_OK);
    let json = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    let q = QuboInstance::from_json(&json).unwrap();
    assert_eq!(exact_solve(&q).unwrap().value, exact);
    let mut h2 = ptr::null_mut();
    assert_eq!(unsafe { pa_qubo_from_json(s, &mut h2) }, PA_OK);
    unsafe {
        pa_string_free(s);
        pa_qubo_free(h2);
        pa_qubo_free(h);
        pa_qubo_free(ptr::null_mut());
    }
}

#[test]
fn load_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.json");
    let mut q = QuboInstance::new(vec![1.0, -2.0, 3.0]);
    q.set_b(0, 1, -4.0);
    q.save(&path).unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { pa_qubo_load(c.as_ptr(), &mut h) }, PA_OK);
    let mut bits = [0u8; 3];
    let mut v = 0.0;
    assert_eq!(
        unsafe { pa_solve_exact(h, 0, bits.as_mut_ptr(), 3, &mut v) },
        PA_OK
    );
    // enumeration by hand: q=(1,1,0) gives 1 - 2 - 4 = -5
    assert_eq!((bits, v), ([1, 1, 0], -5.0));
    unsafe { pa_qubo_free(h) };

    let missing = CString::new(dir.path().join("none.json").to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { pa_qubo_load(missing.as_ptr(), &mut h) },
        PA_ERR_RUNTIME
    );
    assert!(last_error().contains("none.json"));
}

#[test]
fn error_codes() {
    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { pa_qubo_generate(70, 0, 0, &mut h) },
        PA_ERR_VALIDATION
    );
    assert!(last_error().contains("70"));
    assert_eq!(
        unsafe { pa_qubo_generate(8, 0, 0, ptr::null_mut()) },
        PA_ERR_NULL
    );

    let bad = CString::new("{\"n\": 2}").unwrap();
    assert_eq!(
        unsafe { pa_qubo_from_json(bad.as_ptr(), &mut h) },
        PA_ERR_VALIDATION
    );

    let h = generated(6);
    let mut bits = [0u8; 5];
    let mut v = 0.0;
    assert_eq!(
        unsafe { pa_solve_greedy(h, bits.as_mut_ptr(), 5, &mut v) },
        PA_ERR_BUFFER
    );
    assert_eq!(
        unsafe { pa_qubo_evaluate(h, bits.as_ptr(), 5, &mut v) },
        PA_ERR_VALIDATION
    );
    assert_eq!(
        unsafe { pa_solve_exact(h, 4, bits.as_mut_ptr(), 6, &mut v) },
        PA_ERR_VALIDATION
    );
    unsafe { pa_qubo_free(h) };

    // success clears the previous message
    let mut t = 0.0;
    assert_eq!(unsafe { pa_tts(0.5, 0.99, 1.0, &mut t) }, PA_OK);
    assert!(pa_last_error().is_null());
}

#[test]
fn tts_values() {
    let mut t = 0.0;
    assert_eq!(unsafe { pa_tts(0.5, 0.99, 1.0, &mut t) }, PA_OK);
    let expected = 0.01f64.ln() / 0.5f64.ln();
    assert!(((t - expected) / expected).abs() < 1e-9);
    assert_eq!(unsafe { pa_tts(0.995, 0.99, 2.0, &mut t) }, PA_OK);
    assert_eq!(t, 2.0);
    assert_eq!(unsafe { pa_tts(0.0, 0.99, 1.0, &mut t) }, PA_ERR_UNDEFINED);
    assert_eq!(unsafe { pa_tts(0.5, 1.5, 1.0, &mut t) }, PA_ERR_VALIDATION);
}

#[test]
fn embedding_validation() {
    let mut len = 0;
    for n in (4..=64).step_by(4) {
        assert_eq!(
            unsafe { pa_embedding_validate(n, 16, ptr::null(), 0, &mut len) },
            PA_OK
        );
        assert_eq!(len, n.div_ceil(4) + 1);
    }
    assert_eq!(
        unsafe { pa_embedding_validate(68, 16, ptr::null(), 0, &mut len) },
        PA_ERR_VALIDATION
    );
    // qubit 0 sits on the first chain of every layout
    let defects = [0usize];
    let rc = unsafe { pa_embedding_validate(8, 16, defects.as_ptr(), 1, &mut len) };
    assert_eq!(rc, PA_ERR_VALIDATION);
    let bogus = [5000usize];
    assert_eq!(
        unsafe { pa_embedding_validate(8, 16, bogus.as_ptr(), 1, &mut len) },
        PA_ERR_VALIDATION
    );
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/portfolio_anneal.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in [
        "pa_qubo_load",
        "pa_qubo_generate",
        "pa_qubo_free",
        "pa_solve_exact",
        "pa_solve_greedy",
        "pa_solve_ga",
        "pa_tts",
        "pa_embedding_validate",
        "pa_last_error",
        "typedef struct PaQubo PaQubo",
    ] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-x", "c", "-std=c99"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler; syntax check skipped");
        return;
    };
    assert!(status.success());
}
