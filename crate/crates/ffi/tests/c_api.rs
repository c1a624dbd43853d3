use std::ffi::CStr;
use std::ptr;

use fermi_ffi::*;

fn last_error() -> String {
    let p = fermi_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn family(s: f64, g: f64) -> *mut FermiRacket {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { fermi_racket_family(s, g, &mut h) }, FermiStatus::Ok);
    assert!(!h.is_null());
    h
}

#[test]
fn racket_matches_core() {
    let h = family(0.006, 2.0);
    let mut c = FermiCoefficients { a1: 0.0, b1: 0.0, a2: 0.0, b2: 0.0 };
    assert_eq!(unsafe { fermi_racket_coefficients(h, &mut c) }, FermiStatus::Ok);
    let core = fermi::family_coefficients::<f64>(&fermi::FamilyParams::new(0.006, 2.0).unwrap()).unwrap();
    assert_eq!([c.a1, c.b1, c.a2, c.b2], core.coefficients());

    let mut v = 0.0;
    assert_eq!(unsafe { fermi_racket_eval(h, 0.0, 1, &mut v) }, FermiStatus::Ok);
    assert!((v - 5.0 * 2.0 / 24.0).abs() < 1e-12);
    assert_eq!(unsafe { fermi_racket_eval(h, 0.0, 7, &mut v) }, FermiStatus::InvalidArgument);
    assert!(last_error().contains("order"));
    unsafe { fermi_racket_free(h) };
}

#[test]
fn invalid_inputs_are_reported() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { fermi_racket_family(0.0, -1.0, &mut h) }, FermiStatus::InvalidArgument);
    assert!(h.is_null());
    assert!(last_error().contains('g'));
    assert_eq!(unsafe { fermi_racket_family(0.0, 1.0, ptr::null_mut()) }, FermiStatus::NullPointer);
    let mut v = 0.0;
    assert_eq!(unsafe { fermi_racket_eval(ptr::null(), 0.0, 0, &mut v) }, FermiStatus::NullPointer);
    unsafe { fermi_racket_free(ptr::null_mut()) };
    unsafe { fermi_manifold_free(ptr::null_mut()) };
}

#[test]
fn success_clears_the_error() {
    let mut v = 0.0;
    assert_ne!(unsafe { fermi_derivative_bound(f64::NAN, &mut v) }, FermiStatus::Ok);
    assert!(!fermi_last_error().is_null());
    assert_eq!(unsafe { fermi_derivative_bound(0.0, &mut v) }, FermiStatus::Ok);
    assert!(fermi_last_error().is_null());
}

#[test]
fn optimum_of_the_bound() {
    let (mut s, mut v) = (0.0, 0.0);
    assert_eq!(unsafe { fermi_minimize_bound(0.0, 0.05, 1e-12, &mut s, &mut v) }, FermiStatus::Ok);
    assert!((s - fermi::OPTIMAL_S).abs() < 1e-9);
    let mut b = 0.0;
    assert_eq!(unsafe { fermi_derivative_bound(s, &mut b) }, FermiStatus::Ok);
    assert_eq!(b, v);
}

#[test]
fn steps_invert_each_other() {
    let h = family(fermi::OPTIMAL_S, 1.0);
    let x = FermiState { t: 0.1, v: 10.0 };
    let mut y = FermiState { t: 0.0, v: 0.0 };
    let mut z = y;
    assert_eq!(unsafe { fermi_step_forward(h, &x, &mut y) }, FermiStatus::Ok);
    assert!(y.t > x.t);
    assert_eq!(unsafe { fermi_step_backward(h, &y, &mut z) }, FermiStatus::Ok);
    assert!((z.t - x.t).abs() < 1e-9 && (z.v - x.v).abs() < 1e-9);

    let slow = FermiState { t: 0.0, v: 0.01 };
    assert_eq!(unsafe { fermi_step_forward(h, &slow, &mut y) }, FermiStatus::SolverFailure);
    unsafe { fermi_racket_free(h) };
}

#[test]
fn certificate_and_spectrum() {
    let mut c = FermiCertificate {
        certified: false,
        max_condition_residual: 1.0,
        max_integrality: 1.0,
        max_velocity_residual: 1.0,
        max_divdiff: 1.0,
    };
    assert_eq!(unsafe { fermi_certify(fermi::OPTIMAL_S, 1.0, 20, 40, &mut c) }, FermiStatus::Ok);
    assert!(c.certified);
    assert!(c.max_integrality < 1e-8);

    let mut sp = FermiSpectrum { trace: 0.0, hyperbolic: false, lambda_s: 0.0, lambda_u: 0.0 };
    assert_eq!(unsafe { fermi_cycle_spectrum(fermi::OPTIMAL_S, 1.0, 20, &mut sp) }, FermiStatus::Ok);
    assert!(sp.hyperbolic);
    assert!((sp.lambda_s * sp.lambda_u - 1.0).abs() < 1e-9);
    assert!((sp.lambda_s + sp.lambda_u - sp.trace).abs() < 1e-9);
}

#[test]
fn manifold_handle() {
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { fermi_manifold_compute(fermi::OPTIMAL_S, 1.0, 20, 2, 1e-3, 10, &mut m) },
        FermiStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { fermi_manifold_compute(fermi::OPTIMAL_S, 1.0, 20, 1, 1e-3, 10, &mut m) },
        FermiStatus::Ok
    );
    let (mut len, mut ls) = (0, 0.0);
    assert_eq!(unsafe { fermi_manifold_info(m, &mut len, &mut ls) }, FermiStatus::Ok);
    assert_eq!(len, 1);
    assert!(ls > 0.0 && ls < 1.0);
    let mut x = FermiManifoldSample { a: 1.0, t0: 1.0, v0: 0.0, theta_residual: 1.0, decay_ratio: 1.0, accepted: false };
    assert_eq!(unsafe { fermi_manifold_sample(m, 0, &mut x) }, FermiStatus::Ok);
    assert_eq!(x.a, 0.0);
    assert!(x.accepted);
    assert!(x.t0.abs() < 1e-12);
    assert_eq!(unsafe { fermi_manifold_sample(m, 1, &mut x) }, FermiStatus::InvalidArgument);
    unsafe { fermi_manifold_free(m) };
}

#[test]
fn header_declares_the_api() {
    let header = include_str!("../include/fermi.h");
    for name in [
        "fermi_last_error",
        "fermi_racket_family",
        "fermi_racket_new",
        "fermi_racket_free",
        "fermi_racket_eval",
        "fermi_step_forward",
        "fermi_step_backward",
        "fermi_certify",
        "fermi_cycle_spectrum",
        "fermi_manifold_compute",
        "fermi_manifold_free",
        "typedef struct FermiRacket FermiRacket",
        "FERMI_STATUS_SOLVER_FAILURE = 3",
    ] {
        assert!(header.contains(name), "{name}");
    }
}
