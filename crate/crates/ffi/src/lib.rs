//! C ABI over `lorita`.
//!
//! Every function returns a [`LoritaStatus`]; on failure the message is kept
//! per thread and can be read with [`lorita_last_error`]. Models are opaque
//! handles released with their `_free` function. Matrices cross the
//! boundary as row-major `double` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use lorita::checkpoint::{Checkpoint, CheckpointKind};
use lorita::compress::{apply_plan, gsvt, lsvt, CompressedModel, Decomposition, RankRule};
use lorita::linalg::{schatten_from_values, svd, Mat};
use lorita::metrics::{count_flops, count_params, resnet20, vgg16};
use lorita::nn::Mlp;
use lorita::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoritaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Io = 4,
    Format = 5,
    Numeric = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Trained (factorized or collapsed) network.
pub struct LoritaModel {
    inner: Mlp,
}

/// Network of rank-`r` factor pairs.
pub struct LoritaCompressed {
    inner: CompressedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> LoritaStatus {
    match err {
        Error::DimensionMismatch { .. } | Error::InvalidShape(_) | Error::RankOutOfRange { .. } => LoritaStatus::Shape,
        Error::Io { .. } => LoritaStatus::Io,
        Error::BadMagic { .. } | Error::Truncated { .. } | Error::Checkpoint(_) | Error::Config(_) => {
            LoritaStatus::Format
        }
        Error::NoConvergence { .. } | Error::NonFinite(_) | Error::NonFiniteLoss { .. } => LoritaStatus::Numeric,
        _ => LoritaStatus::InvalidArgument,
    }
}

/// Runs `f`, turning errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), (LoritaStatus, String)>) -> LoritaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            LoritaStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            LoritaStatus::Panic
        }
    }
}

fn lib<T>(r: lorita::Result<T>) -> Result<T, (LoritaStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (LoritaStatus, String) {
    (LoritaStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, (LoritaStatus, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (LoritaStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
    Ok(Path::new(s))
}

unsafe fn matrix_arg(data: *const f64, rows: usize, cols: usize) -> Result<Mat, (LoritaStatus, String)> {
    if data.is_null() {
        return Err(null("matrix data"));
    }
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| (LoritaStatus::Shape, "matrix size overflows".to_string()))?;
    lib(Mat::from_vec(
        rows,
        cols,
        std::slice::from_raw_parts(data, len).to_vec(),
    ))
}

unsafe fn write_out(src: &[f64], out: *mut f64, out_len: usize) -> Result<(), (LoritaStatus, String)> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if out_len < src.len() {
        return Err((
            LoritaStatus::BufferTooSmall,
            format!("output needs {} values, buffer holds {out_len}", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn lorita_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Randomly initialized network with widths `dims[0..n_dims]` and `depth`
/// factors per layer.
///
/// # Safety
/// `dims` must point to `n_dims` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lorita_model_init(
    dims: *const usize,
    n_dims: usize,
    depth: usize,
    seed: u64,
    out: *mut *mut LoritaModel,
) -> LoritaStatus {
    guard(|| {
        if dims.is_null() {
            return Err(null("dims"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let dims = std::slice::from_raw_parts(dims, n_dims);
        let inner = lib(Mlp::init(dims, depth, seed))?;
        *out = Box::into_raw(Box::new(LoritaModel { inner }));
        Ok(())
    })
}

/// Loads a factorized or collapsed checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lorita_model_load(path: *const c_char, out: *mut *mut LoritaModel) -> LoritaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ckpt = lib(Checkpoint::load(path_arg(path)?))?;
        if ckpt.kind == CheckpointKind::Compressed {
            return Err((
                LoritaStatus::Format,
                "checkpoint is compressed; use lorita_compressed_load".into(),
            ));
        }
        *out = Box::into_raw(Box::new(LoritaModel {
            inner: ckpt.into_model(),
        }));
        Ok(())
    })
}

/// Writes the model as a factorized checkpoint.
///
/// # Safety
/// `model` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn lorita_model_save(model: *const LoritaModel, path: *const c_char, seed: u64) -> LoritaStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        lib(Checkpoint::factorized(m.inner.clone(), seed).save(path_arg(path)?))
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lorita_model_free(model: *mut LoritaModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input width, output width, layer count and stored parameter count.
///
/// # Safety
/// `model` must come from this library; the out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn lorita_model_shape(
    model: *const LoritaModel,
    in_dim: *mut usize,
    out_dim: *mut usize,
    num_layers: *mut usize,
    params: *mut usize,
) -> LoritaStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.inner;
        for (p, v) in [
            (in_dim, m.in_dim()),
            (out_dim, m.out_dim()),
            (num_layers, m.num_layers()),
            (params, m.param_count()),
        ] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Logits for `rows` inputs of width `in_dim`, written to `out`
/// (`rows × out_dim` values).
///
/// # Safety
/// `x` must hold `rows·cols` values and `out` `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn lorita_model_logits(
    model: *const LoritaModel,
    x: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
    out_len: usize,
) -> LoritaStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.inner;
        let logits = lib(m.logits(&matrix_arg(x, rows, cols)?))?;
        write_out(logits.as_slice(), out, out_len)
    })
}

/// Global truncation keeping `keep` of the pooled normalized spectrum.
///
/// # Safety
/// `model` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn lorita_compress_gsvt(
    model: *const LoritaModel,
    keep: f64,
    out: *mut *mut LoritaCompressed,
) -> LoritaStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let dec = lib(Decomposition::of(m))?;
        let inner = lib(apply_plan(&dec, &lib(gsvt(&dec, keep))?))?;
        *out = Box::into_raw(Box::new(LoritaCompressed { inner }));
        Ok(())
    })
}

/// Local truncation to the same `rank` in every layer.
///
/// # Safety
/// `model` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn lorita_compress_lsvt(
    model: *const LoritaModel,
    rank: usize,
    out: *mut *mut LoritaCompressed,
) -> LoritaStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let dec = lib(Decomposition::of(m))?;
        let inner = lib(apply_plan(&dec, &lib(lsvt(&dec, RankRule::Rank(rank)))?))?;
        *out = Box::into_raw(Box::new(LoritaCompressed { inner }));
        Ok(())
    })
}

/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lorita_compressed_load(path: *const c_char, out: *mut *mut LoritaCompressed) -> LoritaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = lib(lib(Checkpoint::load(path_arg(path)?))?.compressed_model())?;
        *out = Box::into_raw(Box::new(LoritaCompressed { inner }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn lorita_compressed_save(
    model: *const LoritaCompressed,
    path: *const c_char,
    seed: u64,
) -> LoritaStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        lib(Checkpoint::compressed(m.inner.clone(), seed).save(path_arg(path)?))
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lorita_compressed_free(model: *mut LoritaCompressed) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Per-layer ranks into `ranks` (one per layer) and the deployed parameter
/// count, `Σ min(mn, (m+n)r)`.
///
/// # Safety
/// `ranks` must hold `ranks_len` values; `params` may be null.
#[no_mangle]
pub unsafe extern "C" fn lorita_compressed_ranks(
    model: *const LoritaCompressed,
    ranks: *mut usize,
    ranks_len: usize,
    params: *mut usize,
) -> LoritaStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.inner;
        let r = m.ranks();
        if ranks.is_null() {
            return Err(null("ranks"));
        }
        if ranks_len < r.len() {
            return Err((
                LoritaStatus::BufferTooSmall,
                format!("{} layers, buffer holds {ranks_len}", r.len()),
            ));
        }
        ptr::copy_nonoverlapping(r.as_ptr(), ranks, r.len());
        if let Some(p) = params.as_mut() {
            *p = m.deployed_params();
        }
        Ok(())
    })
}

/// # Safety
/// As [`lorita_model_logits`].
#[no_mangle]
pub unsafe extern "C" fn lorita_compressed_logits(
    model: *const LoritaCompressed,
    x: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
    out_len: usize,
) -> LoritaStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.inner;
        let logits = lib(m.logits(&matrix_arg(x, rows, cols)?))?;
        write_out(logits.as_slice(), out, out_len)
    })
}

/// Singular values of a row-major `rows × cols` matrix, descending, into
/// `out` (`min(rows, cols)` values).
///
/// # Safety
/// `a` must hold `rows·cols` values and `out` `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn lorita_singular_values(
    a: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
    out_len: usize,
) -> LoritaStatus {
    guard(|| {
        let s = lib(svd(&matrix_arg(a, rows, cols)?))?;
        write_out(s.s(), out, out_len)
    })
}

/// Schatten `p` (quasi-)norm `(Σ sᵢᵖ)^{1/p}`.
///
/// # Safety
/// `a` must hold `rows·cols` values and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn lorita_schatten_norm(
    a: *const f64,
    rows: usize,
    cols: usize,
    p: f64,
    out: *mut f64,
) -> LoritaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if p.is_nan() || p <= 0.0 {
            return Err((LoritaStatus::InvalidArgument, format!("p must be positive, got {p}")));
        }
        let s = lib(svd(&matrix_arg(a, rows, cols)?))?;
        *out = schatten_from_values(s.s(), p);
        Ok(())
    })
}

/// Parameter and multiply–accumulate counts of `"resnet20"` or `"vgg16"`.
///
/// # Safety
/// `name` must be NUL-terminated; the out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn lorita_count_arch(name: *const c_char, params: *mut u64, flops: *mut u64) -> LoritaStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        let arch = match CStr::from_ptr(name).to_bytes() {
            b"resnet20" => resnet20(),
            b"vgg16" => vgg16(),
            other => {
                return Err((
                    LoritaStatus::InvalidArgument,
                    format!("unknown architecture {:?}", String::from_utf8_lossy(other)),
                ))
            }
        };
        if let Some(p) = params.as_mut() {
            *p = count_params(&arch);
        }
        if let Some(f) = flops.as_mut() {
            *f = count_flops(&arch);
        }
        Ok(())
    })
}
