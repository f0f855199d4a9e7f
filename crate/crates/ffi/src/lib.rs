//! C ABI over `primcodec`.
//!
//! Every fallible call returns a [`PcStatus`]; on failure the message is
//! available from [`pc_last_error`] on the same thread. Handles are opaque
//! and must be released with their `_free` function. Matrices are
//! row-major `double` buffers whose length the caller passes explicitly.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use primcodec::clustering::{cluster_latent, ClusterOptions, TauSelection};
use primcodec::mtrnn::{forward, load_model, MtrnnModel};
use primcodec::projection::{sample_projection, ProjectionMatrix};
use primcodec::training::{run_intra_experiment, TrainConfig};
use primcodec::trajectory::{
    load_dataset, resample_frequency_domain, save_dataset, GenerateConfig, MotionDataset, MotorMatrix,
};
use primcodec::{Error, ErrorClass};

/// Status of a call. The numeric values of the error classes match the
/// CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Numeric = 3,
    Io = 4,
    BufferSize = 5,
    Panic = 6,
}

/// Generated or loaded motion dataset.
pub struct PcDataset(MotionDataset);

/// Gaussian projection matrix.
pub struct PcProjection(ProjectionMatrix);

/// Trained decoder.
pub struct PcModel(MtrnnModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: PcStatus, msg: impl Into<String>) -> PcStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> PcStatus {
    let status = match e.class() {
        ErrorClass::Config => PcStatus::Config,
        ErrorClass::Numeric => PcStatus::Numeric,
        ErrorClass::Io => PcStatus::Io,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> Result<(), PcStatus>) -> PcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PcStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => fail(PcStatus::Panic, "internal panic"),
    }
}

trait OrStatus<T> {
    fn status(self) -> Result<T, PcStatus>;
}

impl<T> OrStatus<T> for primcodec::Result<T> {
    fn status(self) -> Result<T, PcStatus> {
        self.map_err(from_error)
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, PcStatus> {
    if p.is_null() {
        return Err(fail(PcStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(PcStatus::Config, format!("{name} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, PcStatus> {
    p.as_ref().ok_or_else(|| fail(PcStatus::NullPointer, format!("{name} is null")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], PcStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(PcStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, need: usize, name: &str) -> Result<&'a mut [T], PcStatus> {
    if len != need {
        return Err(fail(PcStatus::BufferSize, format!("{name} holds {len} values, {need} needed")));
    }
    if need == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(PcStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn write_out<T>(p: *mut T, v: T, name: &str) -> Result<(), PcStatus> {
    if p.is_null() {
        return Err(fail(PcStatus::NullPointer, format!("{name} is null")));
    }
    p.write(v);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn pc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by the library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a dataset from a JSON generation config.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_dataset_generate(config_json: *const c_char, out: *mut *mut PcDataset) -> PcStatus {
    guard(|| {
        let text = str_arg(config_json, "config_json")?;
        let cfg: GenerateConfig =
            serde_json::from_str(text).map_err(|e| fail(PcStatus::Config, format!("config: {e}")))?;
        let ds = cfg.generate().status()?;
        write_out(out, Box::into_raw(Box::new(PcDataset(ds))), "out")
    })
}

/// # Safety
/// `dir` must be a NUL-terminated path and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_dataset_load(dir: *const c_char, out: *mut *mut PcDataset) -> PcStatus {
    guard(|| {
        let dir = str_arg(dir, "dir")?;
        let ds = load_dataset(Path::new(dir)).status()?;
        write_out(out, Box::into_raw(Box::new(PcDataset(ds))), "out")
    })
}

/// # Safety
/// `ds` must be a live handle and `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn pc_dataset_save(ds: *const PcDataset, dir: *const c_char) -> PcStatus {
    guard(|| {
        let ds = ref_arg(ds, "ds")?;
        let dir = str_arg(dir, "dir")?;
        save_dataset(&ds.0, Path::new(dir)).status().map(|_| ())
    })
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pc_dataset_free(ds: *mut PcDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Sample count, steps `T`, joints `p`, pixels per frame and primitive
/// count. Any output pointer may be null.
///
/// # Safety
/// `ds` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_dataset_shape(
    ds: *const PcDataset,
    samples: *mut usize,
    steps: *mut usize,
    joints: *mut usize,
    pixels: *mut usize,
    primitives: *mut usize,
) -> PcStatus {
    guard(|| {
        let ds = &ref_arg(ds, "ds")?.0;
        for (p, v) in [
            (samples, ds.len()),
            (steps, ds.steps()),
            (joints, ds.joints()),
            (pixels, ds.pixels()),
            (primitives, ds.primitive_count()),
        ] {
            if !p.is_null() {
                p.write(v);
            }
        }
        Ok(())
    })
}

/// Copies the normalized `T × p` motor matrix of sample `index`.
///
/// # Safety
/// `ds` must be a live handle and `out` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pc_dataset_motor(ds: *const PcDataset, index: usize, out: *mut f64, len: usize) -> PcStatus {
    guard(|| {
        let ds = &ref_arg(ds, "ds")?.0;
        let s = ds
            .samples
            .get(index)
            .ok_or_else(|| fail(PcStatus::Config, format!("sample {index} out of range 0..{}", ds.len())))?;
        let src = s.motor.as_slice();
        out_slice(out, len, src.len(), "out")?.copy_from_slice(src);
        Ok(())
    })
}

/// Copies the primitive id of every sample.
///
/// # Safety
/// `ds` must be a live handle and `out` hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn pc_dataset_labels(ds: *const PcDataset, out: *mut usize, len: usize) -> PcStatus {
    guard(|| {
        let ds = &ref_arg(ds, "ds")?.0;
        let labels = ds.labels();
        out_slice(out, len, labels.len(), "out")?.copy_from_slice(&labels);
        Ok(())
    })
}

/// Draws a `q × k` matrix with entries from `N(0, 1/q)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_projection_new(k: usize, q: usize, seed: u64, out: *mut *mut PcProjection) -> PcStatus {
    guard(|| {
        let p = sample_projection(k, q, seed).status()?;
        write_out(out, Box::into_raw(Box::new(PcProjection(p))), "out")
    })
}

/// `out = P · v`.
///
/// # Safety
/// `p` must be a live handle, `v` hold `k` and `out` hold `q` doubles.
#[no_mangle]
pub unsafe extern "C" fn pc_projection_apply(
    p: *const PcProjection,
    v: *const f64,
    k: usize,
    out: *mut f64,
    q: usize,
) -> PcStatus {
    guard(|| {
        let p = &ref_arg(p, "p")?.0;
        let v = slice_arg(v, k, "v")?;
        let z = p.project(v).status()?;
        out_slice(out, q, z.len(), "out")?.copy_from_slice(&z);
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pc_projection_free(p: *mut PcProjection) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `path` must be a NUL-terminated path and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_model_load(path: *const c_char, out: *mut *mut PcModel) -> PcStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let m = load_model(Path::new(path)).status()?;
        write_out(out, Box::into_raw(Box::new(PcModel(m))), "out")
    })
}

/// # Safety
/// `m` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pc_model_free(m: *mut PcModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Latent size, steps and motor width. Any output pointer may be null.
///
/// # Safety
/// `m` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn pc_model_shape(
    m: *const PcModel,
    latent_dim: *mut usize,
    steps: *mut usize,
    motor_dim: *mut usize,
) -> PcStatus {
    guard(|| {
        let a = ref_arg(m, "m")?.0.arch();
        for (p, v) in [(latent_dim, a.latent_dim), (steps, a.steps), (motor_dim, a.motor_dim)] {
            if !p.is_null() {
                p.write(v);
            }
        }
        Ok(())
    })
}

/// Decodes latent `z` into a `T × p` motor sequence.
///
/// # Safety
/// `m` must be a live handle, `z` hold `q` and `out` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pc_model_generate(
    m: *const PcModel,
    z: *const f64,
    q: usize,
    out: *mut f64,
    len: usize,
) -> PcStatus {
    guard(|| {
        let m = &ref_arg(m, "m")?.0;
        let z = slice_arg(z, q, "z")?;
        let y = forward(m, z).status()?;
        let src = y.motor.as_slice();
        out_slice(out, len, src.len(), "out")?.copy_from_slice(src);
        Ok(())
    })
}

/// Frequency-domain resampling of a `steps × joints` matrix to `new_steps`
/// rows.
///
/// # Safety
/// `input` must hold `steps · joints` and `out` `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pc_resample(
    input: *const f64,
    steps: usize,
    joints: usize,
    new_steps: usize,
    out: *mut f64,
    out_len: usize,
) -> PcStatus {
    guard(|| {
        let n = steps
            .checked_mul(joints)
            .ok_or_else(|| fail(PcStatus::Config, "steps · joints overflows"))?;
        let data = slice_arg(input, n, "input")?.to_vec();
        let m = MotorMatrix::from_flat(steps, joints, data).status()?;
        let r = resample_frequency_domain(&m, new_steps).status()?;
        out_slice(out, out_len, r.as_slice().len(), "out")?.copy_from_slice(r.as_slice());
        Ok(())
    })
}

/// Affine (or linear) subspace clustering of `n` latent rows of width `q`.
/// `tau <= 0` selects the shrinkage automatically. `labels` receives `n`
/// values; `r_squared` and `tau_used` may be null.
///
/// # Safety
/// `z` must hold `n · q` doubles and `labels` `n` values.
#[no_mangle]
pub unsafe extern "C" fn pc_cluster(
    z: *const f64,
    n: usize,
    q: usize,
    k: usize,
    affine: bool,
    tau: f64,
    seed: u64,
    labels: *mut usize,
    r_squared: *mut f64,
    tau_used: *mut f64,
) -> PcStatus {
    guard(|| {
        let len = n.checked_mul(q).ok_or_else(|| fail(PcStatus::Config, "n · q overflows"))?;
        let data = slice_arg(z, len, "z")?.to_vec();
        let codes = primcodec::mtrnn::LatentCodes::from_flat(n, q, data).status()?;
        let opts = ClusterOptions {
            k,
            affine,
            tau: if tau > 0.0 { TauSelection::Fixed(tau) } else { TauSelection::Auto },
            seed,
        };
        let report = cluster_latent(&codes.to_columns(), &opts, None).status()?;
        out_slice(labels, n, report.labels.len(), "labels")?.copy_from_slice(&report.labels);
        if !r_squared.is_null() {
            r_squared.write(report.r_squared);
        }
        if !tau_used.is_null() {
            tau_used.write(report.tau);
        }
        Ok(())
    })
}

/// Runs the intra-primitive experiment with a JSON training config (null
/// for defaults) and returns the report as JSON in `report_json`, to be
/// released with [`pc_string_free`].
///
/// # Safety
/// `ds` must be a live handle, `config_json` null or NUL-terminated and
/// `report_json` writable.
#[no_mangle]
pub unsafe extern "C" fn pc_run_intra(
    ds: *const PcDataset,
    config_json: *const c_char,
    report_json: *mut *mut c_char,
) -> PcStatus {
    guard(|| {
        let ds = &ref_arg(ds, "ds")?.0;
        let cfg: TrainConfig = if config_json.is_null() {
            TrainConfig::default()
        } else {
            serde_json::from_str(str_arg(config_json, "config_json")?)
                .map_err(|e| fail(PcStatus::Config, format!("config: {e}")))?
        };
        let report = run_intra_experiment(ds, &cfg).status()?;
        let text = serde_json::to_string(&report).map_err(|e| fail(PcStatus::Io, e.to_string()))?;
        let c = CString::new(text).map_err(|_| fail(PcStatus::Io, "report contains NUL"))?;
        write_out(report_json, c.into_raw(), "report_json")
    })
}
