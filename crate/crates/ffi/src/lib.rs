//! C interface to `entbound`.
//!
//! Models and states are opaque handles created by `eb_*_new`-style calls and
//! released with the matching `eb_*_free`. Every fallible call returns an
//! [`EbStatus`]; on failure `eb_last_error_message` describes the error on the
//! calling thread. Results are written through out-pointers only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use entbound::model::{Definiteness, SpinModel};
use entbound::states::{log_negativity_pure, StateVector};
use entbound::witness::{bell_overlap, default_w1_interval, optimize_w1, Branch, WitnessData};
use entbound::Error;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// An iterative solver failed to converge.
    NotConverged = 3,
    InvalidState = 4,
    Internal = 5,
    Panic = 6,
}

/// Reference state of the overlap bound.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EbBranch {
    Ferro = 0,
    Antiferro = 1,
}

impl From<EbBranch> for Branch {
    fn from(b: EbBranch) -> Self {
        match b {
            EbBranch::Ferro => Branch::Ferro,
            EbBranch::Antiferro => Branch::Antiferro,
        }
    }
}

/// Definiteness of the cross-block coupling matrix.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EbDefiniteness {
    NegativeSemidefinite = 0,
    PositiveSemidefinite = 1,
    Indefinite = 2,
}

/// Spin chain: couplings and transverse field.
pub struct EbModel(SpinModel);

/// Normalized pure state of a chain.
pub struct EbState(StateVector);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> EbStatus {
    match e {
        Error::EigNotConverged { .. } | Error::EquilibriumNotConverged { .. } | Error::Lp(_) => {
            EbStatus::NotConverged
        }
        Error::InvalidState(_) | Error::TraceDrift { .. } => EbStatus::InvalidState,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => EbStatus::Internal,
        _ => EbStatus::InvalidArgument,
    }
}

/// Runs `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (EbStatus, String)>) -> EbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EbStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            EbStatus::Panic
        }
    }
}

fn lib<T>(r: entbound::Result<T>) -> Result<T, (EbStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (EbStatus, String) {
    (EbStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (EbStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(p: *mut T, v: T, what: &str) -> Result<(), (EbStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(v);
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn eb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn eb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Chain with couplings `amplitude / |i-j|^p` and field `field_b`.
///
/// # Safety
/// `out` must be a valid pointer to a model handle slot.
#[no_mangle]
pub unsafe extern "C" fn eb_model_new_algebraic(
    n_sites: usize,
    p: f64,
    amplitude: f64,
    field_b: f64,
    out: *mut *mut EbModel,
) -> EbStatus {
    guard(|| {
        let m = lib(SpinModel::algebraic(n_sites, p, amplitude, field_b))?;
        write(out, Box::into_raw(Box::new(EbModel(m))), "out")
    })
}

/// Chain with the row-major `n_sites x n_sites` coupling matrix `couplings`.
///
/// # Safety
/// `couplings` must point to `n_sites * n_sites` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn eb_model_new_explicit(
    n_sites: usize,
    couplings: *const f64,
    field_b: f64,
    out: *mut *mut EbModel,
) -> EbStatus {
    guard(|| {
        if couplings.is_null() {
            return Err(null("couplings"));
        }
        let len = n_sites
            .checked_mul(n_sites)
            .ok_or_else(|| (EbStatus::InvalidArgument, "n_sites overflows".to_string()))?;
        let data = std::slice::from_raw_parts(couplings, len);
        let j = DMatrix::from_row_slice(n_sites, n_sites, data);
        let m = lib(SpinModel::new(j, field_b))?;
        write(out, Box::into_raw(Box::new(EbModel(m))), "out")
    })
}

/// # Safety
/// `model` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn eb_model_free(model: *mut EbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Energy unit `J0` of the couplings.
///
/// # Safety
/// `model` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn eb_model_j0(model: *const EbModel, out: *mut f64) -> EbStatus {
    guard(|| {
        let m = deref(model, "model")?;
        write(out, m.0.j0(), "out")
    })
}

/// Definiteness of the couplings between mirrored halves.
///
/// # Safety
/// `model` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn eb_cross_block_classify(
    model: *const EbModel,
    out: *mut EbDefiniteness,
) -> EbStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let cb = lib(m.0.cross_block())?;
        let d = match cb.classification {
            Definiteness::NegativeSemidefinite => EbDefiniteness::NegativeSemidefinite,
            Definiteness::PositiveSemidefinite => EbDefiniteness::PositiveSemidefinite,
            Definiteness::Indefinite => EbDefiniteness::Indefinite,
        };
        write(out, d, "out")
    })
}

/// Ground state of the chain. `energy` and `degenerate` may be null.
///
/// # Safety
/// `model` must be a live handle, `out` valid, and the optional pointers
/// null or valid.
#[no_mangle]
pub unsafe extern "C" fn eb_ground_state(
    model: *const EbModel,
    out: *mut *mut EbState,
    energy: *mut f64,
    degenerate: *mut bool,
) -> EbStatus {
    guard(|| {
        let m = deref(model, "model")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let gs = lib(m.0.ground_state())?;
        if !energy.is_null() {
            energy.write(gs.energy);
        }
        if !degenerate.is_null() {
            degenerate.write(gs.degenerate);
        }
        write(out, Box::into_raw(Box::new(EbState(gs.state))), "out")
    })
}

/// State from `2^n_sites` amplitudes, normalized on input. `imag` may be null
/// for real amplitudes.
///
/// # Safety
/// `real` (and `imag` when non-null) must point to `2^n_sites` doubles.
#[no_mangle]
pub unsafe extern "C" fn eb_state_from_amplitudes(
    n_sites: usize,
    real: *const f64,
    imag: *const f64,
    out: *mut *mut EbState,
) -> EbStatus {
    guard(|| {
        if real.is_null() {
            return Err(null("real"));
        }
        if n_sites >= 8 * std::mem::size_of::<usize>() - 1 {
            return Err((EbStatus::InvalidArgument, format!("{n_sites} sites is too many")));
        }
        let dim = 1usize << n_sites;
        let re = std::slice::from_raw_parts(real, dim);
        let amps: Vec<Complex64> = if imag.is_null() {
            re.iter().map(|&x| Complex64::new(x, 0.0)).collect()
        } else {
            let im = std::slice::from_raw_parts(imag, dim);
            re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect()
        };
        let s = lib(StateVector::from_unnormalized(n_sites, amps))?;
        write(out, Box::into_raw(Box::new(EbState(s))), "out")
    })
}

/// # Safety
/// `state` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn eb_state_free(state: *mut EbState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Log-negativity (base 2) of the half/half cut.
///
/// # Safety
/// `state` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn eb_state_log_negativity(state: *const EbState, out: *mut f64) -> EbStatus {
    guard(|| {
        let s = deref(state, "state")?;
        write(out, lib(log_negativity_pure(&s.0))?, "out")
    })
}

/// Overlap lower bound in bits against the given reference.
///
/// # Safety
/// `state` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn eb_state_bell_overlap(
    state: *const EbState,
    branch: EbBranch,
    out: *mut f64,
) -> EbStatus {
    guard(|| {
        let s = deref(state, "state")?;
        let r = lib(bell_overlap(&s.0, branch.into()))?;
        write(out, r.bound_bits, "out")
    })
}

/// Witness bound built from `model` and evaluated on `state`, optimized over
/// `w1` with at most `budget` probes. `w0` and `w1` may be null.
///
/// # Safety
/// `model` and `state` must be live handles, `bound_bits` valid, and the
/// optional pointers null or valid.
#[no_mangle]
pub unsafe extern "C" fn eb_witness_optimize(
    model: *const EbModel,
    state: *const EbState,
    include_parity: bool,
    branch: EbBranch,
    budget: usize,
    bound_bits: *mut f64,
    w0: *mut f64,
    w1: *mut f64,
) -> EbStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let s = deref(state, "state")?;
        if bound_bits.is_null() {
            return Err(null("bound_bits"));
        }
        let data = lib(WitnessData::from_state(&m.0, &s.0))?;
        let opt = lib(optimize_w1(
            &m.0,
            &data,
            include_parity,
            branch.into(),
            default_w1_interval(&m.0),
            budget,
        ))?;
        if let entbound::witness::Certificate::Witness(p) = &opt.report.certificate {
            if !w0.is_null() {
                w0.write(p.w0);
            }
            if !w1.is_null() {
                w1.write(p.w1);
            }
        }
        bound_bits.write(opt.report.bound_bits);
        Ok(())
    })
}
