use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use henon_radial_ffi::*;

fn params(n: u32, p: f64, q: f64, alpha: f64) -> *mut HenonParams {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { henon_params_new(n, p, q, alpha, &mut h) }, HenonStatus::Ok);
    assert!(!h.is_null());
    h
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(henon_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn invalid_params_set_status_and_message() {
    let mut h = ptr::null_mut();
    let st = unsafe { henon_params_new(3, 0.5, 4.0, 0.0, &mut h) };
    assert_eq!(st, HenonStatus::InvalidParams);
    assert!(h.is_null());
    assert!(last_error().contains("invalid parameters"));
    assert_eq!(
        unsafe { henon_params_new(3, 2.0, 4.0, 0.0, ptr::null_mut()) },
        HenonStatus::NullPointer
    );
}

#[test]
fn exponents_and_regime() {
    let h = params(3, 2.0, 4.0, 0.0);
    let mut e = std::mem::MaybeUninit::<HenonExponents>::uninit();
    assert_eq!(unsafe { henon_exponents(h, e.as_mut_ptr()) }, HenonStatus::Ok);
    let e = unsafe { e.assume_init() };
    assert!((e.lambda - 0.6057068642773799).abs() < 1e-12);
    assert!((e.delta - 2.0 / 3.0).abs() < 1e-15);
    let mut r = HenonRegime::Subcritical;
    assert_eq!(unsafe { henon_regime(h, &mut r) }, HenonStatus::Ok);
    assert_eq!(r, HenonRegime::Supercritical);
    unsafe { henon_params_free(h) };

    let h = params(3, 3.0, 4.0, 0.0);
    let mut e = std::mem::MaybeUninit::<HenonExponents>::uninit();
    assert_eq!(unsafe { henon_exponents(h, e.as_mut_ptr()) }, HenonStatus::Ok);
    assert!(unsafe { e.assume_init() }.beta.is_nan());
    unsafe { henon_params_free(h) };
}

#[test]
fn shoot_and_copy() {
    let h = params(3, 2.0, 3.0, 0.0);
    let mut tol = henon_tolerances_default();
    tol.samples = 501;
    let mut sol = ptr::null_mut();
    let mut info = HenonShootInfo {
        terminal: HenonTerminal::BlowUp,
        has_first_zero: false,
        first_zero: 0.0,
    };
    assert_eq!(
        unsafe { henon_shoot_regular(h, 1.0, 100.0, &tol, &mut sol, &mut info) },
        HenonStatus::Ok
    );
    assert_eq!(info.terminal, HenonTerminal::HitZero);
    assert!(info.has_first_zero);
    assert!((info.first_zero - 6.896848619377707).abs() < 1e-6);

    let n = unsafe { henon_solution_len(sol) };
    assert!(n > 10);
    let mut r = vec![0.0; n];
    let mut u = vec![0.0; n];
    assert_eq!(
        unsafe { henon_solution_copy(sol, r.as_mut_ptr(), u.as_mut_ptr(), ptr::null_mut(), n) },
        HenonStatus::Ok
    );
    assert!(u[0] > 0.99 && u[0] <= 1.0);
    assert_eq!(
        unsafe { henon_solution_copy(sol, r.as_mut_ptr(), ptr::null_mut(), ptr::null_mut(), n - 1) },
        HenonStatus::InvalidArgument
    );

    let mut id = HenonIdentity {
        radius: 0.0,
        residual: 0.0,
        relative_residual: 0.0,
    };
    for radius in [1.0, 3.0, 6.0] {
        assert_eq!(unsafe { henon_pohozaev(sol, radius, &mut id) }, HenonStatus::Ok);
        assert!(id.relative_residual < 1e-6);
        assert_eq!(unsafe { henon_energy(sol, radius, &mut id) }, HenonStatus::Ok);
        assert!(id.relative_residual < 1e-6);
    }
    unsafe {
        henon_solution_free(sol);
        henon_params_free(h);
    }
}

#[test]
fn singular_profile_classifies_with_lambda() {
    let h = params(3, 2.0, 4.0, 0.0);
    let mut sol = ptr::null_mut();
    assert_eq!(
        unsafe { henon_exact_singular(h, 1e-3, 10.0, 400, &mut sol) },
        HenonStatus::Ok
    );
    let mut c = std::mem::MaybeUninit::<HenonClassification>::uninit();
    assert_eq!(unsafe { henon_classify(sol, c.as_mut_ptr()) }, HenonStatus::Ok);
    let c = unsafe { c.assume_init() };
    assert_eq!(c.tag, HenonSingularityTag::SupercriticalRate);
    assert!((c.rate_constant - 0.6057068642773799).abs() < 1e-6);
    assert!(c.c.is_nan());

    let mut mass = 0.0;
    assert_eq!(unsafe { henon_dirac_mass(sol, &mut mass) }, HenonStatus::Numerical);
    unsafe {
        henon_solution_free(sol);
        henon_params_free(h);
    }
}

#[test]
fn caller_arrays_and_dirac_mass() {
    let h = params(3, 2.0, 4.0, 0.0);
    let r: Vec<f64> = (0..300).map(|i| 1e-4 * 10f64.powf(3.0 * i as f64 / 299.0)).collect();
    let mut mu = 0.0;
    let mut dmu = 0.0;
    let u: Vec<f64> = r
        .iter()
        .map(|&x| {
            unsafe { henon_fundamental_solution(h, x, &mut mu, &mut dmu) };
            2.0 * mu
        })
        .collect();
    let mut sol = ptr::null_mut();
    let st = unsafe { henon_solution_from_arrays(h, r.as_ptr(), u.as_ptr(), ptr::null(), r.len(), &mut sol) };
    assert_eq!(st, HenonStatus::Ok);
    let mut mass = 0.0;
    let st = unsafe { henon_dirac_mass(sol, &mut mass) };
    assert_eq!(st, HenonStatus::Ok, "{}", last_error());
    assert!((mass - 2.0).abs() < 1e-3, "{mass}");
    unsafe {
        henon_solution_free(sol);
        henon_params_free(h);
    }
}

#[test]
fn linearization_at_lambda() {
    let h = params(3, 2.0, 4.0, 0.0);
    let lambda = 0.6057068642773799;
    let mut lin = std::mem::MaybeUninit::<HenonLinearization>::uninit();
    assert_eq!(
        unsafe { henon_linearize(h, lambda, 0.0, 0.0, lin.as_mut_ptr()) },
        HenonStatus::Ok
    );
    let lin = unsafe { lin.assume_init() };
    assert_eq!(lin.stability, HenonStability::StableSpiral);
    let im = (2.0f64 / 3.0 - 1.0 / 36.0).sqrt();
    assert!((lin.eigen_re[0] + 1.0 / 6.0).abs() < 1e-6);
    assert!((lin.eigen_im[0].abs() - im).abs() < 1e-6);
    assert_eq!(
        unsafe { henon_linearize(h, 0.0, 0.0, 0.0, ptr::null_mut()) },
        HenonStatus::NullPointer
    );
    unsafe { henon_params_free(h) };
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(henon_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/henon_radial.h")).unwrap();
    for name in [
        "henon_params_new",
        "henon_params_free",
        "henon_exponents",
        "henon_regime",
        "henon_fundamental_solution",
        "henon_shoot_regular",
        "henon_exact_singular",
        "henon_solution_from_arrays",
        "henon_solution_len",
        "henon_solution_copy",
        "henon_solution_free",
        "henon_classify",
        "henon_dirac_mass",
        "henon_linearize",
        "henon_pohozaev",
        "henon_energy",
        "henon_last_error_message",
        "typedef struct HenonParams HenonParams;",
        "HENON_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}

const C_PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "henon_radial.h"

int main(void) {
    HenonParams *p = NULL;
    if (henon_params_new(3, 2.0, 4.0, 0.0, &p) != HENON_STATUS_OK) return 1;
    HenonExponents e;
    if (henon_exponents(p, &e) != HENON_STATUS_OK) return 2;
    if (fabs(e.lambda - 0.6057068642773799) > 1e-12) return 3;
    HenonSolution *s = NULL;
    if (henon_exact_singular(p, 1e-3, 10.0, 200, &s) != HENON_STATUS_OK) return 4;
    HenonClassification c;
    if (henon_classify(s, &c) != HENON_STATUS_OK) return 5;
    if (c.tag != HENON_SINGULARITY_TAG_SUPERCRITICAL_RATE) return 6;
    henon_solution_free(s);
    henon_params_free(p);
    HenonParams *bad = NULL;
    if (henon_params_new(3, 0.5, 4.0, 0.0, &bad) != HENON_STATUS_INVALID_PARAMS) return 7;
    if (henon_last_error_message() == NULL) return 8;
    printf("ok\n");
    return 0;
}
"#;

#[test]
fn c_program_links_against_static_library() {
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let profile_dir = tmp
        .parent()
        .unwrap()
        .join(if cfg!(debug_assertions) { "debug" } else { "release" });
    let lib = profile_dir.join("libhenon_radial_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let src = tmp.join("capi_smoke.c");
    let exe = tmp.join("capi_smoke");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg(format!("-I{}/include", env!("CARGO_MANIFEST_DIR")))
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "ok\n");
}
