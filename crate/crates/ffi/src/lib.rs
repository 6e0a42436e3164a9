//! C ABI over the piezoshell pipelines.
//!
//! All objects cross the boundary as opaque handles created and destroyed by this
//! library. Every entry point returns a [`PsStatus`]; on failure the message is kept per
//! thread and read with [`ps_last_error_message`]. Panics never unwind into C.

use piezoshell::commands::{cmd_cell, cmd_homogenize, cmd_macro, cmd_validate};
use piezoshell::config::RunConfig;
use piezoshell::homogenize::{homogenize, spd_report, HomogenizedTensors};
use piezoshell::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    NullPointer = 1,
    /// Invalid configuration, geometry, material or shape.
    InvalidInput = 2,
    /// Singular or inaccurate solve, or missing boundary conditions.
    SolverFailure = 3,
    Io = 4,
    Internal = 5,
    Panic = 6,
    InvalidUtf8 = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsCommand {
    Cell = 0,
    Homogenize = 1,
    Macro = 2,
    Validate = 3,
}

/// Parsed and validated run configuration.
pub struct PsConfig {
    inner: RunConfig,
}

/// Homogenized tensors of one cell computation.
pub struct PsTensors {
    inner: HomogenizedTensors,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PsStatus {
    match e.root() {
        Error::Io(_) => PsStatus::Io,
        Error::Internal(_) => PsStatus::Internal,
        _ => match e.exit_code() {
            2 => PsStatus::InvalidInput,
            3 => PsStatus::SolverFailure,
            _ => PsStatus::Internal,
        },
    }
}

fn guard(f: impl FnOnce() -> Result<(), PsStatus>) -> PsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PsStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned());
            set_error(format!("panic: {}", msg.unwrap_or_else(|| "unknown".into())));
            PsStatus::Panic
        }
    }
}

fn lib<T>(r: piezoshell::Result<T>) -> Result<T, PsStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, PsStatus> {
    if p.is_null() {
        set_error(format!("{name} is null"));
        return Err(PsStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{name} is not valid UTF-8"));
        PsStatus::InvalidUtf8
    })
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, PsStatus> {
    p.as_ref().ok_or_else(|| {
        set_error(format!("{name} is null"));
        PsStatus::NullPointer
    })
}

fn out_ptr<T>(p: *mut T, name: &str) -> Result<(), PsStatus> {
    if p.is_null() {
        set_error(format!("{name} is null"));
        return Err(PsStatus::NullPointer);
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the next failing
/// call on the same thread.
#[no_mangle]
pub extern "C" fn ps_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn ps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse and validate a JSON configuration; on success `*out` owns a new handle.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_config_from_json(json: *const c_char, out: *mut *mut PsConfig) -> PsStatus {
    guard(|| {
        out_ptr(out, "out")?;
        *out = std::ptr::null_mut();
        let text = str_arg(json, "json")?;
        let cfg = lib(RunConfig::from_json(text))?;
        lib(cfg.validate())?;
        *out = Box::into_raw(Box::new(PsConfig { inner: cfg }));
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a handle from [`ps_config_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ps_config_free(config: *mut PsConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Run a CLI pipeline, writing its artifacts into `out_dir`.
///
/// # Safety
/// `config` must be a live handle and `out_dir` a nul-terminated path.
#[no_mangle]
pub unsafe extern "C" fn ps_run_command(config: *const PsConfig, command: PsCommand, out_dir: *const c_char) -> PsStatus {
    guard(|| {
        let cfg = handle(config, "config")?;
        let dir = Path::new(str_arg(out_dir, "out_dir")?);
        let run = match command {
            PsCommand::Cell => cmd_cell,
            PsCommand::Homogenize => cmd_homogenize,
            PsCommand::Macro => cmd_macro,
            PsCommand::Validate => cmd_validate,
        };
        lib(run(&cfg.inner, Some(dir)))?;
        Ok(())
    })
}

/// Solve all cell problems and evaluate the homogenized tensors.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_homogenize(config: *const PsConfig, out: *mut *mut PsTensors) -> PsStatus {
    guard(|| {
        out_ptr(out, "out")?;
        *out = std::ptr::null_mut();
        let cfg = &handle(config, "config")?.inner;
        let mesh = lib(cfg.cell_mesh())?;
        let material = lib(cfg.material_field())?;
        let t = lib(homogenize(&mesh, &material, &cfg.settings()))?;
        *out = Box::into_raw(Box::new(PsTensors { inner: t }));
        Ok(())
    })
}

/// # Safety
/// `tensors` must be null or a handle from [`ps_homogenize`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ps_tensors_free(tensors: *mut PsTensors) {
    if !tensors.is_null() {
        drop(Box::from_raw(tensors));
    }
}

unsafe fn copy_out(src: &[f64], dst: *mut f64) -> Result<(), PsStatus> {
    out_ptr(dst, "out")?;
    std::ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Membrane elasticity in row-major Voigt form (9 values).
///
/// # Safety
/// `tensors` must be a live handle and `out` point to 9 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ps_tensors_cbar(tensors: *const PsTensors, out: *mut f64) -> PsStatus {
    guard(|| copy_out(handle(tensors, "tensors")?.inner.cbar.to_voigt().as_flattened(), out))
}

/// Piezoelectric coupling, 2×3 row-major Voigt form (6 values).
///
/// # Safety
/// `tensors` must be a live handle and `out` point to 6 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ps_tensors_ebar(tensors: *const PsTensors, out: *mut f64) -> PsStatus {
    guard(|| copy_out(handle(tensors, "tensors")?.inner.ebar.to_voigt().as_flattened(), out))
}

/// Dielectric tensor, 2×2 row-major (4 values).
///
/// # Safety
/// `tensors` must be a live handle and `out` point to 4 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ps_tensors_dbar(tensors: *const PsTensors, out: *mut f64) -> PsStatus {
    guard(|| copy_out(handle(tensors, "tensors")?.inner.dbar.as_flattened(), out))
}

/// Bending stiffness in row-major Voigt form (9 values).
///
/// # Safety
/// `tensors` must be a live handle and `out` point to 9 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ps_tensors_bending(tensors: *const PsTensors, out: *mut f64) -> PsStatus {
    guard(|| copy_out(handle(tensors, "tensors")?.inner.bending.to_voigt().as_flattened(), out))
}

/// `|Y*|_a`, followed by the minimum eigenvalues of c̄, d̄ and C̄ (4 values).
///
/// # Safety
/// `tensors` must be a live handle and `out` point to 4 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ps_tensors_measures(tensors: *const PsTensors, out: *mut f64) -> PsStatus {
    guard(|| {
        let t = &handle(tensors, "tensors")?.inner;
        let r = spd_report(t);
        copy_out(&[t.ystar_measure, r.cbar_min, r.dbar_min, r.bending_min], out)
    })
}

/// Relative discrepancies between the two computation routes: c̄, d̄, C̄ direct vs
/// energy, ē vs f̄, and the asymmetries of the energy-route c̄ and C̄ (6 values).
///
/// # Safety
/// `tensors` must be a live handle and `out` point to 6 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ps_tensors_discrepancies(tensors: *const PsTensors, out: *mut f64) -> PsStatus {
    guard(|| {
        let d = handle(tensors, "tensors")?.inner.discrepancies();
        copy_out(
            &[
                d.cbar_direct_vs_energy,
                d.dbar_direct_vs_energy,
                d.bending_direct_vs_energy,
                d.ebar_vs_fbar,
                d.cbar_energy_asymmetry,
                d.bending_energy_asymmetry,
            ],
            out,
        )
    })
}
