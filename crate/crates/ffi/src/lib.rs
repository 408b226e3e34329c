//! C ABI over `henon-radial`.
//!
//! Handles (`HenonParams`, `HenonSolution`) are opaque and owned by the
//! caller once returned; release them with the matching `*_free`. Every
//! fallible call returns a `HenonStatus`; on failure the message is
//! available from `henon_last_error_message` on the same thread.
//! Quantities that do not exist for the given parameters are reported as NaN.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use henon_radial::classify::{classify_singularity, estimate_dirac_mass, SingularityTag};
use henon_radial::global::{energy_identity, pohozaev_terms};
use henon_radial::numeric::geometric_grid;
use henon_radial::params::{classify_regime, compute_exponents, fundamental_solution, DEFAULT_CRITICAL_TOL};
use henon_radial::phase::{default_h, linearize, PhaseState, Stability};
use henon_radial::radial::{exact_singular_solution, shoot_regular, SolveMeta};
use henon_radial::{HenonError, ProblemParams, RadialSolution, Regime, Terminal, ToleranceConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HenonStatus {
    Ok = 0,
    InvalidParams = 1,
    InvalidArgument = 2,
    InsufficientData = 3,
    Numerical = 4,
    SingularLocus = 5,
    Io = 6,
    NullPointer = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HenonRegime {
    Subcritical = 0,
    Critical = 1,
    Supercritical = 2,
    SupercriticalBeyondSobolev = 3,
    PEqualsN = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HenonTerminal {
    ReachedRMax = 0,
    HitZero = 1,
    BlowUp = 2,
    StepUnderflow = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HenonStability {
    StableNode = 0,
    StableSpiral = 1,
    UnstableNode = 2,
    UnstableSpiral = 3,
    Saddle = 4,
    Degenerate = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HenonSingularityTag {
    Removable = 0,
    FundamentalOrder = 1,
    CriticalLogRate = 2,
    SupercriticalRate = 3,
    Unclassified = 4,
}

/// Opaque problem parameters.
pub struct HenonParams(ProblemParams);

/// Opaque sampled radial profile.
pub struct HenonSolution(RadialSolution);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HenonTolerances {
    pub rtol: f64,
    pub atol: f64,
    pub samples: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HenonExponents {
    pub beta: f64,
    pub delta: f64,
    pub gamma: f64,
    pub q_serrin: f64,
    pub q_sobolev: f64,
    pub c1: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub lambda: f64,
    pub crit_log_const: f64,
    pub omega: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HenonShootInfo {
    pub terminal: HenonTerminal,
    pub has_first_zero: bool,
    pub first_zero: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HenonLinearization {
    pub jacobian: [f64; 4],
    pub eigen_re: [f64; 2],
    pub eigen_im: [f64; 2],
    pub stability: HenonStability,
    /// Distance between numerical and closed-form eigenvalues; NaN when
    /// no closed form applies.
    pub analytic_deviation: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HenonClassification {
    pub tag: HenonSingularityTag,
    pub c: f64,
    pub c_tilde: f64,
    pub rate_constant: f64,
    pub exponent: f64,
    pub log_exponent: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HenonIdentity {
    pub radius: f64,
    pub residual: f64,
    pub relative_residual: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &HenonError) -> HenonStatus {
    match err {
        HenonError::InvalidParams(_) => HenonStatus::InvalidParams,
        HenonError::InvalidArgument(_) => HenonStatus::InvalidArgument,
        HenonError::InsufficientData(_) => HenonStatus::InsufficientData,
        HenonError::Numerical(_) => HenonStatus::Numerical,
        HenonError::SingularLocus { .. } => HenonStatus::SingularLocus,
        HenonError::Io(_) => HenonStatus::Io,
    }
}

enum Fail {
    Lib(HenonError),
    Null(&'static str),
}

impl From<HenonError> for Fail {
    fn from(e: HenonError) -> Self {
        Fail::Lib(e)
    }
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> HenonStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => HenonStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            HenonStatus::NullPointer
        }
        Err(_) => {
            set_error("internal panic".into());
            HenonStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(ptr: *const T, what: &'static str) -> Result<&'a T, Fail> {
    ptr.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out<'a, T>(ptr: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    ptr.as_mut().ok_or(Fail::Null(what))
}

fn nan(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

fn terminal(t: Terminal) -> HenonTerminal {
    match t {
        Terminal::ReachedRMax => HenonTerminal::ReachedRMax,
        Terminal::HitZero => HenonTerminal::HitZero,
        Terminal::BlowUp => HenonTerminal::BlowUp,
        Terminal::StepUnderflow => HenonTerminal::StepUnderflow,
    }
}

fn box_solution(sol: RadialSolution) -> *mut HenonSolution {
    Box::into_raw(Box::new(HenonSolution(sol)))
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn henon_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn henon_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn henon_tolerances_default() -> HenonTolerances {
    let t = ToleranceConfig::default();
    HenonTolerances {
        rtol: t.rtol,
        atol: t.atol,
        samples: t.samples,
    }
}

/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn henon_params_new(
    n: u32,
    p: f64,
    q: f64,
    alpha: f64,
    out_params: *mut *mut HenonParams,
) -> HenonStatus {
    guard(|| {
        let slot = out(out_params, "out_params")?;
        let params = ProblemParams::new(n, p, q, alpha)?;
        *slot = Box::into_raw(Box::new(HenonParams(params)));
        Ok(())
    })
}

/// # Safety
/// `params` must be NULL or a handle from `henon_params_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn henon_params_free(params: *mut HenonParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// # Safety
/// `params` must be a live handle and `out_exponents` writable.
#[no_mangle]
pub unsafe extern "C" fn henon_exponents(
    params: *const HenonParams,
    out_exponents: *mut HenonExponents,
) -> HenonStatus {
    guard(|| {
        let params = &deref(params, "params")?.0;
        let slot = out(out_exponents, "out_exponents")?;
        let e = compute_exponents(params)?;
        *slot = HenonExponents {
            beta: nan(e.beta),
            delta: e.delta,
            gamma: nan(e.gamma),
            q_serrin: nan(e.q_serrin),
            q_sobolev: nan(e.q_sobolev),
            c1: e.c1,
            a1: e.a1,
            a2: e.a2,
            a3: e.a3,
            lambda: nan(e.lambda),
            crit_log_const: nan(e.crit_log_const),
            omega: e.omega,
        };
        Ok(())
    })
}

/// # Safety
/// `params` must be a live handle and `out_regime` writable.
#[no_mangle]
pub unsafe extern "C" fn henon_regime(params: *const HenonParams, out_regime: *mut HenonRegime) -> HenonStatus {
    guard(|| {
        let params = &deref(params, "params")?.0;
        let slot = out(out_regime, "out_regime")?;
        *slot = match classify_regime(params, DEFAULT_CRITICAL_TOL)? {
            Regime::Subcritical => HenonRegime::Subcritical,
            Regime::Critical => HenonRegime::Critical,
            Regime::Supercritical => HenonRegime::Supercritical,
            Regime::SupercriticalBeyondSobolev => HenonRegime::SupercriticalBeyondSobolev,
            Regime::PEqualsN => HenonRegime::PEqualsN,
        };
        Ok(())
    })
}

/// μ(r) and μ'(r).
///
/// # Safety
/// `params` must be a live handle; `out_mu` and `out_dmu` writable.
#[no_mangle]
pub unsafe extern "C" fn henon_fundamental_solution(
    params: *const HenonParams,
    r: f64,
    out_mu: *mut f64,
    out_dmu: *mut f64,
) -> HenonStatus {
    guard(|| {
        let params = &deref(params, "params")?.0;
        let (mu_slot, dmu_slot) = (out(out_mu, "out_mu")?, out(out_dmu, "out_dmu")?);
        let (mu, dmu) = fundamental_solution(params, r)?;
        *mu_slot = mu;
        *dmu_slot = dmu;
        Ok(())
    })
}

/// Regular solution with `u(0) = u0` on `(0, r_max]`. `tol` may be NULL
/// for the defaults. `out_info` may be NULL.
///
/// # Safety
/// `params` must be a live handle; `tol` NULL or readable; `out_solution`
/// writable; `out_info` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn henon_shoot_regular(
    params: *const HenonParams,
    u0: f64,
    r_max: f64,
    tol: *const HenonTolerances,
    out_solution: *mut *mut HenonSolution,
    out_info: *mut HenonShootInfo,
) -> HenonStatus {
    guard(|| {
        let params = &deref(params, "params")?.0;
        let slot = out(out_solution, "out_solution")?;
        let mut cfg = ToleranceConfig::default();
        if let Some(t) = tol.as_ref() {
            cfg.rtol = t.rtol;
            cfg.atol = t.atol;
            cfg.samples = t.samples;
        }
        let res = shoot_regular(params, u0, r_max, &cfg)?;
        if let Some(info) = out_info.as_mut() {
            *info = HenonShootInfo {
                terminal: terminal(res.terminal),
                has_first_zero: res.first_zero.is_some(),
                first_zero: nan(res.first_zero),
            };
        }
        *slot = box_solution(res.solution);
        Ok(())
    })
}

/// `λ r^{-δ}` on `points` geometrically spaced radii in `[r_min, r_max]`.
///
/// # Safety
/// `params` must be a live handle and `out_solution` writable.
#[no_mangle]
pub unsafe extern "C" fn henon_exact_singular(
    params: *const HenonParams,
    r_min: f64,
    r_max: f64,
    points: usize,
    out_solution: *mut *mut HenonSolution,
) -> HenonStatus {
    guard(|| {
        let params = &deref(params, "params")?.0;
        let slot = out(out_solution, "out_solution")?;
        if !(r_min > 0.0 && r_max > r_min && r_max.is_finite()) || points < 2 {
            return Err(HenonError::InvalidArgument(format!(
                "need 0 < r_min < r_max and points >= 2, got {r_min}, {r_max}, {points}"
            ))
            .into());
        }
        *slot = box_solution(exact_singular_solution(params, &geometric_grid(r_min, r_max, points))?);
        Ok(())
    })
}

/// Wraps caller samples. `flux` may be NULL, in which case it is derived
/// from `u` by finite differences (at least 5 samples required).
///
/// # Safety
/// `r`, `u` and (if non-NULL) `flux` must each point to `len` readable
/// doubles; `out_solution` must be writable.
#[no_mangle]
pub unsafe extern "C" fn henon_solution_from_arrays(
    params: *const HenonParams,
    r: *const f64,
    u: *const f64,
    flux: *const f64,
    len: usize,
    out_solution: *mut *mut HenonSolution,
) -> HenonStatus {
    guard(|| {
        let params = deref(params, "params")?.0;
        let slot = out(out_solution, "out_solution")?;
        if r.is_null() || u.is_null() {
            return Err(Fail::Null("r/u"));
        }
        let r = std::slice::from_raw_parts(r, len).to_vec();
        let u = std::slice::from_raw_parts(u, len).to_vec();
        let flux = if flux.is_null() {
            if len < 5 {
                return Err(HenonError::InsufficientData("need at least 5 samples to derive the flux".into()).into());
            }
            let n = params.dim();
            henon_radial::numeric::derivative5(&r, &u)
                .iter()
                .zip(&r)
                .map(|(du, x)| x.powf(n - 1.0) * henon_radial::params::phi(*du, params.p))
                .collect()
        } else {
            std::slice::from_raw_parts(flux, len).to_vec()
        };
        *slot = box_solution(RadialSolution::new(params, r, u, flux, SolveMeta::analytic("ffi"))?);
        Ok(())
    })
}

/// Number of samples, or 0 for NULL.
///
/// # Safety
/// `sol` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn henon_solution_len(sol: *const HenonSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.0.len())
}

/// Copies samples into caller buffers of capacity `cap`. Any of `r`, `u`,
/// `flux` may be NULL to skip that column.
///
/// # Safety
/// `sol` must be a live handle; each non-NULL buffer must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn henon_solution_copy(
    sol: *const HenonSolution,
    r: *mut f64,
    u: *mut f64,
    flux: *mut f64,
    cap: usize,
) -> HenonStatus {
    guard(|| {
        let sol = &deref(sol, "sol")?.0;
        if cap < sol.len() {
            return Err(HenonError::InvalidArgument(format!("buffer holds {cap} values, need {}", sol.len())).into());
        }
        for (dst, src) in [(r, &sol.r), (u, &sol.u), (flux, &sol.flux)] {
            if !dst.is_null() {
                std::ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
            }
        }
        Ok(())
    })
}

/// # Safety
/// `sol` must be NULL or a live handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn henon_solution_free(sol: *mut HenonSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Singularity class of a profile near its innermost radius.
///
/// # Safety
/// `sol` must be a live handle and `out_class` writable.
#[no_mangle]
pub unsafe extern "C" fn henon_classify(sol: *const HenonSolution, out_class: *mut HenonClassification) -> HenonStatus {
    guard(|| {
        let sol = &deref(sol, "sol")?.0;
        let slot = out(out_class, "out_class")?;
        let c = classify_singularity(sol, &sol.params)?;
        *slot = HenonClassification {
            tag: match c.tag {
                SingularityTag::Removable => HenonSingularityTag::Removable,
                SingularityTag::FundamentalOrder => HenonSingularityTag::FundamentalOrder,
                SingularityTag::CriticalLogRate => HenonSingularityTag::CriticalLogRate,
                SingularityTag::SupercriticalRate => HenonSingularityTag::SupercriticalRate,
                SingularityTag::Unclassified => HenonSingularityTag::Unclassified,
            },
            c: nan(c.c),
            c_tilde: nan(c.c_tilde),
            rate_constant: nan(c.rate_constant),
            exponent: c.fit.exponent,
            log_exponent: c.fit.log_exponent,
        };
        Ok(())
    })
}

/// # Safety
/// `sol` must be a live handle and `out_mass` writable.
#[no_mangle]
pub unsafe extern "C" fn henon_dirac_mass(sol: *const HenonSolution, out_mass: *mut f64) -> HenonStatus {
    guard(|| {
        let sol = &deref(sol, "sol")?.0;
        let slot = out(out_mass, "out_mass")?;
        *slot = estimate_dirac_mass(sol, &sol.params)?;
        Ok(())
    })
}

/// Linearization of the phase-plane field at `(w, dw)`. `h <= 0` selects
/// the default step.
///
/// # Safety
/// `params` must be a live handle and `out_lin` writable.
#[no_mangle]
pub unsafe extern "C" fn henon_linearize(
    params: *const HenonParams,
    w: f64,
    dw: f64,
    h: f64,
    out_lin: *mut HenonLinearization,
) -> HenonStatus {
    guard(|| {
        let params = &deref(params, "params")?.0;
        let slot = out(out_lin, "out_lin")?;
        let h = if h > 0.0 { h } else { default_h(params) };
        let rep = linearize(params, PhaseState::new(w, dw), h)?;
        let j = rep.jacobian;
        *slot = HenonLinearization {
            jacobian: [j[0][0], j[0][1], j[1][0], j[1][1]],
            eigen_re: [rep.eigenvalues[0].re, rep.eigenvalues[1].re],
            eigen_im: [rep.eigenvalues[0].im, rep.eigenvalues[1].im],
            stability: match rep.classification {
                Stability::StableNode => HenonStability::StableNode,
                Stability::StableSpiral => HenonStability::StableSpiral,
                Stability::UnstableNode => HenonStability::UnstableNode,
                Stability::UnstableSpiral => HenonStability::UnstableSpiral,
                Stability::Saddle => HenonStability::Saddle,
                Stability::Degenerate => HenonStability::Degenerate,
            },
            analytic_deviation: nan(rep.analytic_deviation),
        };
        Ok(())
    })
}

/// Pohozaev identity on the ball of radius `radius` for a regular profile.
///
/// # Safety
/// `sol` must be a live handle and `out_identity` writable.
#[no_mangle]
pub unsafe extern "C" fn henon_pohozaev(
    sol: *const HenonSolution,
    radius: f64,
    out_identity: *mut HenonIdentity,
) -> HenonStatus {
    guard(|| {
        let sol = &deref(sol, "sol")?.0;
        let slot = out(out_identity, "out_identity")?;
        let rep = pohozaev_terms(sol, &sol.params, radius)?;
        *slot = HenonIdentity {
            radius,
            residual: rep.residual,
            relative_residual: rep.relative_residual,
        };
        Ok(())
    })
}

/// Energy identity on the ball of radius `radius` for a regular profile.
///
/// # Safety
/// `sol` must be a live handle and `out_identity` writable.
#[no_mangle]
pub unsafe extern "C" fn henon_energy(
    sol: *const HenonSolution,
    radius: f64,
    out_identity: *mut HenonIdentity,
) -> HenonStatus {
    guard(|| {
        let sol = &deref(sol, "sol")?.0;
        let slot = out(out_identity, "out_identity")?;
        let rep = energy_identity(sol, &sol.params, radius)?;
        *slot = HenonIdentity {
            radius,
            residual: rep.residual,
            relative_residual: rep.relative_residual,
        };
        Ok(())
    })
}
