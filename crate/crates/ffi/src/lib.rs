//! C interface to `fermi`.
//!
//! Every function returns a [`FermiStatus`]. On failure a description is
//! kept per thread and can be read with [`fermi_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fermi::impact::{step_backward, step_forward, ImpactState, SolverConfig};
use fermi::linear::{cycle_matrix_at, spectral_split, trace_criterion};
use fermi::manifold::{manifold_at_n0, verify_continuum, ManifoldConfig, ManifoldContext};
use fermi::orbit::{build_n2_schedule, certify_unbounded};
use fermi::racket::{
    derivative_bound, family_coefficients, minimize_bound, true_max_derivative, Derivative, FamilyParams,
    TrigPoly2,
};
use fermi::{Error, Precise, Real};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FermiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SolverFailure = 3,
    NotHyperbolic = 4,
    Diverged = 5,
    Internal = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FermiStatus {
    if e.is_solver_failure() {
        return FermiStatus::SolverFailure;
    }
    match e.root() {
        Error::NotHyperbolic { .. } | Error::NotUnimodular { .. } => FermiStatus::NotHyperbolic,
        Error::DivergenceDetected { .. } | Error::TailTruncationTooCoarse { .. } => FermiStatus::Diverged,
        Error::InvalidParameter { .. } | Error::NoInteriorMinimum { .. } => FermiStatus::InvalidArgument,
        _ => FermiStatus::Internal,
    }
}

fn guard(body: impl FnOnce() -> Result<(), FermiStatus>) -> FermiStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FermiStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic".into());
            FermiStatus::Internal
        }
    }
}

fn fail(e: Error) -> FermiStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null(name: &str) -> FermiStatus {
    set_error(format!("`{name}` is null"));
    FermiStatus::NullPointer
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, FermiStatus> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn get<'a, T>(p: *const T, name: &str) -> Result<&'a T, FermiStatus> {
    p.as_ref().ok_or_else(|| null(name))
}

/// The message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn fermi_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FermiState {
    pub t: f64,
    pub v: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FermiCoefficients {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

/// Opaque racket: a two-harmonic trigonometric polynomial and gravity.
pub struct FermiRacket {
    poly: TrigPoly2<f64>,
    g: f64,
    solver: SolverConfig<f64>,
}

impl FermiRacket {
    fn boxed(poly: TrigPoly2<f64>, g: f64) -> *mut FermiRacket {
        let solver = SolverConfig::for_racket(&poly, &g);
        Box::into_raw(Box::new(FermiRacket { poly, g, solver }))
    }
}

fn check_finite(x: f64, name: &'static str) -> Result<(), FermiStatus> {
    if x.is_finite() {
        Ok(())
    } else {
        set_error(format!("`{name}` must be finite"));
        Err(FermiStatus::InvalidArgument)
    }
}

/// Creates the family member `p_s` for gravity `g`.
///
/// # Safety
/// `out_handle` must be valid for writes. The handle is released with [`fermi_racket_free`].
#[no_mangle]
pub unsafe extern "C" fn fermi_racket_family(s: f64, g: f64, out_handle: *mut *mut FermiRacket) -> FermiStatus {
    guard(|| {
        let slot = out(out_handle, "out_handle")?;
        let params = FamilyParams::new(s, g).map_err(fail)?;
        let poly = family_coefficients::<f64>(&params).map_err(fail)?;
        *slot = FermiRacket::boxed(poly, g);
        Ok(())
    })
}

/// Creates `a1 sin 2πt + b1 cos 2πt + a2 sin 4πt + b2 cos 4πt` for gravity `g`.
///
/// # Safety
/// `coefficients` must be readable and `out_handle` writable.
#[no_mangle]
pub unsafe extern "C" fn fermi_racket_new(
    coefficients: *const FermiCoefficients,
    g: f64,
    out_handle: *mut *mut FermiRacket,
) -> FermiStatus {
    guard(|| {
        let c = get(coefficients, "coefficients")?;
        let slot = out(out_handle, "out_handle")?;
        for (x, name) in [(c.a1, "a1"), (c.b1, "b1"), (c.a2, "a2"), (c.b2, "b2")] {
            check_finite(x, name)?;
        }
        if !(g.is_finite() && g > 0.0) {
            set_error("`g` must be positive".into());
            return Err(FermiStatus::InvalidArgument);
        }
        *slot = FermiRacket::boxed(TrigPoly2::new(c.a1, c.b1, c.a2, c.b2), g);
        Ok(())
    })
}

/// # Safety
/// `handle` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fermi_racket_free(handle: *mut FermiRacket) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// `handle` must be a live racket and `out_coefficients` writable.
#[no_mangle]
pub unsafe extern "C" fn fermi_racket_coefficients(
    handle: *const FermiRacket,
    out_coefficients: *mut FermiCoefficients,
) -> FermiStatus {
    guard(|| {
        let r = get(handle, "handle")?;
        let [a1, b1, a2, b2] = r.poly.coefficients();
        *out(out_coefficients, "out_coefficients")? = FermiCoefficients { a1, b1, a2, b2 };
        Ok(())
    })
}

/// Value (`order` 0) or derivative of order 1 to 3 of the racket at `t`.
///
/// # Safety
/// `handle` must be a live racket and `out_value` writable.
#[no_mangle]
pub unsafe extern "C" fn fermi_racket_eval(
    handle: *const FermiRacket,
    t: f64,
    order: u8,
    out_value: *mut f64,
) -> FermiStatus {
    guard(|| {
        let r = get(handle, "handle")?;
        let slot = out(out_value, "out_value")?;
        let order = Derivative::try_from(order).map_err(fail)?;
        *slot = r.poly.eval(&t, order);
        Ok(())
    })
}

/// Largest racket speed over a period.
///
/// # Safety
/// `handle` must be a live racket and `out_value` writable.
#[no_mangle]
pub unsafe extern "C" fn fermi_racket_max_speed(handle: *const FermiRacket, out_value: *mut f64) -> FermiStatus {
    guard(|| {
        let r = get(handle, "handle")?;
        *out(out_value, "out_value")? = true_max_derivative(&r.poly);
        Ok(())
    })
}

/// Upper bound on the speed of `p_s`, divided by `g`.
///
/// # Safety
/// `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fermi_derivative_bound(s: f64, out_value: *mut f64) -> FermiStatus {
    guard(|| {
        let slot = out(out_value, "out_value")?;
        *slot = derivative_bound(&FamilyParams::new(s, 1.0).map_err(fail)?).map_err(fail)?;
        Ok(())
    })
}

/// Minimizes the speed bound over `[s_lo, s_hi]`.
///
/// # Safety
/// `out_s` and `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fermi_minimize_bound(
    s_lo: f64,
    s_hi: f64,
    tol: f64,
    out_s: *mut f64,
    out_value: *mut f64,
) -> FermiStatus {
    guard(|| {
        let s_slot = out(out_s, "out_s")?;
        let v_slot = out(out_value, "out_value")?;
        let m = minimize_bound(s_lo, s_hi, tol).map_err(fail)?;
        *s_slot = m.s;
        *v_slot = m.value;
        Ok(())
    })
}

unsafe fn step(
    handle: *const FermiRacket,
    state: *const FermiState,
    out_state: *mut FermiState,
    forward: bool,
) -> FermiStatus {
    guard(|| {
        let r = get(handle, "handle")?;
        let s = get(state, "state")?;
        let slot = out(out_state, "out_state")?;
        check_finite(s.t, "t")?;
        check_finite(s.v, "v")?;
        let x = ImpactState::new(s.t, s.v);
        let next = if forward {
            step_forward(&r.poly, &x, &r.solver, &r.g)
        } else {
            step_backward(&r.poly, &x, &r.solver, &r.g)
        }
        .map_err(fail)?;
        *slot = FermiState { t: next.t, v: next.v };
        Ok(())
    })
}

/// One impact forward in double precision.
///
/// # Safety
/// `handle` must be a live racket, `state` readable and `out_state` writable.
#[no_mangle]
pub unsafe extern "C" fn fermi_step_forward(
    handle: *const FermiRacket,
    state: *const FermiState,
    out_state: *mut FermiState,
) -> FermiStatus {
    step(handle, state, out_state, true)
}

/// The unique preimage of `state` in double precision.
///
/// # Safety
/// `handle` must be a live racket, `state` readable and `out_state` writable.
#[no_mangle]
pub unsafe extern "C" fn fermi_step_backward(
    handle: *const FermiRacket,
    state: *const FermiState,
    out_state: *mut FermiState,
) -> FermiStatus {
    step(handle, state, out_state, false)
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FermiCertificate {
    pub certified: bool,
    pub max_condition_residual: f64,
    pub max_integrality: f64,
    pub max_velocity_residual: f64,
    pub max_divdiff: f64,
}

/// Certifies the period-two unbounded orbit of `p_s` with offset `k` by
/// following it for `horizon` impacts in extended precision.
///
/// # Safety
/// `out_certificate` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fermi_certify(
    s: f64,
    g: f64,
    k: u64,
    horizon: usize,
    out_certificate: *mut FermiCertificate,
) -> FermiStatus {
    guard(|| {
        let slot = out(out_certificate, "out_certificate")?;
        let f = family_coefficients::<Precise>(&FamilyParams::new(s, g).map_err(fail)?).map_err(fail)?;
        let gp = Precise::from_f64(g);
        let sched = build_n2_schedule(&gp, k).map_err(fail)?;
        let solver = SolverConfig::for_racket(&f, &gp);
        let (report, _) = certify_unbounded(&f, &sched, horizon, &solver, &gp).map_err(fail)?;
        let c = report.conditions;
        let orbit = report.orbit;
        *slot = FermiCertificate {
            certified: report.certified,
            max_condition_residual: [Some(c.c1), c.c2p, c.c3, c.c4p]
                .into_iter()
                .flatten()
                .fold(0.0, |m: f64, x| m.max(x.abs())),
            max_integrality: orbit.map_or(f64::NAN, |o| o.max_integrality),
            max_velocity_residual: orbit.map_or(f64::NAN, |o| o.max_velocity_residual),
            max_divdiff: orbit.map_or(f64::NAN, |o| o.max_divdiff),
        };
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FermiSpectrum {
    pub trace: f64,
    pub hyperbolic: bool,
    /// Zero unless hyperbolic.
    pub lambda_s: f64,
    pub lambda_u: f64,
}

/// Trace and eigenvalues of the cycle matrix of the period-two orbit.
///
/// # Safety
/// `out_spectrum` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fermi_cycle_spectrum(s: f64, g: f64, k: u64, out_spectrum: *mut FermiSpectrum) -> FermiStatus {
    guard(|| {
        let slot = out(out_spectrum, "out_spectrum")?;
        let f = family_coefficients::<f64>(&FamilyParams::new(s, g).map_err(fail)?).map_err(fail)?;
        let sched = build_n2_schedule(&g, k).map_err(fail)?;
        let a = cycle_matrix_at(&f, &sched, &g);
        let check = trace_criterion(&a).map_err(fail)?;
        let (lambda_s, lambda_u) = if check.hyperbolic {
            let split = spectral_split(&a).map_err(fail)?;
            (split.stable, split.unstable)
        } else {
            (0.0, 0.0)
        };
        *slot = FermiSpectrum {
            trace: check.trace,
            hyperbolic: check.hyperbolic,
            lambda_s,
            lambda_u,
        };
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FermiManifoldSample {
    pub a: f64,
    pub t0: f64,
    pub v0: f64,
    pub theta_residual: f64,
    pub decay_ratio: f64,
    pub accepted: bool,
}

/// Opaque set of stable-manifold samples.
pub struct FermiManifold {
    samples: Vec<FermiManifoldSample>,
    lambda_s: f64,
}

/// Samples the stable manifold of the period-two orbit at `samples` odd
/// parameters in `[-a_max, a_max]` and checks `cycles` cycles of each.
///
/// # Safety
/// `out_handle` must be writable. The handle is released with [`fermi_manifold_free`].
#[no_mangle]
pub unsafe extern "C" fn fermi_manifold_compute(
    s: f64,
    g: f64,
    k: u64,
    samples: usize,
    a_max: f64,
    cycles: usize,
    out_handle: *mut *mut FermiManifold,
) -> FermiStatus {
    guard(|| {
        let slot = out(out_handle, "out_handle")?;
        let f = family_coefficients::<Precise>(&FamilyParams::new(s, g).map_err(fail)?).map_err(fail)?;
        let gp = Precise::from_f64(g);
        let sched = build_n2_schedule(&gp, k).map_err(fail)?;
        let solver = SolverConfig::for_racket(&f, &gp);
        let cfg = ManifoldConfig {
            samples,
            a_max,
            ..ManifoldConfig::for_precision::<Precise>()
        };
        cfg.validate().map_err(fail)?;
        let table = cfg.horizon.max(cfg.decay_to).max(cycles);
        let ctx = ManifoldContext::new(f, sched, solver, table).map_err(fail)?;
        let run = manifold_at_n0(&ctx, &cfg).map_err(fail)?;
        let continuum = verify_continuum(&ctx, &run.samples, cycles);
        let lambda_s = ctx.split.stable.to_f64();
        let samples = run
            .samples
            .iter()
            .zip(&continuum.rows)
            .map(|(x, c)| FermiManifoldSample {
                a: x.a,
                t0: x.state.t.to_f64(),
                v0: x.state.v.to_f64(),
                theta_residual: x.theta_residual,
                decay_ratio: x.decay_ratio,
                accepted: x.accepted(lambda_s) && c.pass,
            })
            .collect();
        *slot = Box::into_raw(Box::new(FermiManifold { samples, lambda_s }));
        Ok(())
    })
}

/// # Safety
/// `handle` must be a live manifold; `out_len` and `out_lambda_s` writable.
#[no_mangle]
pub unsafe extern "C" fn fermi_manifold_info(
    handle: *const FermiManifold,
    out_len: *mut usize,
    out_lambda_s: *mut f64,
) -> FermiStatus {
    guard(|| {
        let m = get(handle, "handle")?;
        *out(out_len, "out_len")? = m.samples.len();
        *out(out_lambda_s, "out_lambda_s")? = m.lambda_s;
        Ok(())
    })
}

/// # Safety
/// `handle` must be a live manifold and `out_sample` writable.
#[no_mangle]
pub unsafe extern "C" fn fermi_manifold_sample(
    handle: *const FermiManifold,
    index: usize,
    out_sample: *mut FermiManifoldSample,
) -> FermiStatus {
    guard(|| {
        let m = get(handle, "handle")?;
        let slot = out(out_sample, "out_sample")?;
        let Some(x) = m.samples.get(index) else {
            set_error(format!("index {index} out of range ({} samples)", m.samples.len()));
            return Err(FermiStatus::InvalidArgument);
        };
        *slot = *x;
        Ok(())
    })
}

/// # Safety
/// `handle` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fermi_manifold_free(handle: *mut FermiManifold) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}
