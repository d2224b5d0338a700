//! C ABI for `nmsysid`.
//!
//! Every fallible function returns an [`NmsStatus`] and writes results
//! through out-pointers. On failure the message is available from
//! [`nms_last_error_message`] on the same thread. Handles are opaque and
//! released with the matching `*_free` function; strings returned by the
//! library are released with [`nms_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nalgebra::DMatrix;
use nmsysid::constraints::{ConstraintSpec, Mask};
use nmsysid::dmdc::{dmdc_fit, dmdc_rank_scan, FitSelection};
use nmsysid::io::{
    load_dataset, load_model, parse_json, save_dataset, save_model, to_json_string, ConstraintSpecJson, DatasetJson,
    GraphJson, ModelJson,
};
use nmsysid::kernel::CausalBandKernel;
use nmsysid::model::{relative_reconstruction_error, resimulate, StateSpaceModel, Trajectory};
use nmsysid::objective::{loss, Dataset, ParamPoint};
use nmsysid::pgd::{pgd_fit, FitReport, PgdConfig};
use nmsysid::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NmsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Shape = 4,
    Domain = 5,
    NotConverged = 6,
    Numerical = 7,
    Rank = 8,
    Io = 9,
    Parse = 10,
    Panic = 11,
}

/// Trajectory dataset handle.
pub struct NmsDataset(Dataset);

/// Model handle `(A, B, D)`.
pub struct NmsModel(StateSpaceModel);

/// Result of a projected-gradient fit.
pub struct NmsFitReport(FitReport);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmsDatasetShape {
    pub trajectories: usize,
    pub state_dim: usize,
    pub input_dim: usize,
    pub m: usize,
    pub q: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmsModelShape {
    pub state_dim: usize,
    pub input_dim: usize,
    pub m: usize,
    pub q: usize,
    pub bandwidth: usize,
}

/// Solver settings; obtain defaults from [`nms_fit_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmsFitOptions {
    pub t0: f64,
    pub eta: f64,
    pub max_steps: usize,
    /// Kernel bandwidth; 0 selects `q + 1`.
    pub bandwidth: usize,
}

struct Failure {
    status: NmsStatus,
    message: String,
}

impl Failure {
    fn new(status: NmsStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Shape { .. } | Error::Length { .. } => NmsStatus::Shape,
            Error::Config(_) => NmsStatus::InvalidArgument,
            Error::Domain(_) => NmsStatus::Domain,
            Error::Convergence { .. } => NmsStatus::NotConverged,
            Error::BacktrackUnderflow { .. } | Error::NonFinite { .. } => NmsStatus::Numerical,
            Error::Rank { .. } => NmsStatus::Rank,
            Error::Io { .. } => NmsStatus::Io,
            Error::Json { .. } | Error::Csv(_) => NmsStatus::Parse,
        };
        Failure::new(status, e.to_string())
    }
}

type FfiResult<T> = Result<T, Failure>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> NmsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NmsStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            NmsStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref()
        .ok_or_else(|| Failure::new(NmsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    p.as_mut()
        .ok_or_else(|| Failure::new(NmsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn string_arg<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Failure::new(NmsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(NmsStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> FfiResult<&'a [f64]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::new(NmsStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn into_c_string(s: String) -> FfiResult<*mut c_char> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::new(NmsStatus::InvalidArgument, "string contains a NUL byte"))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Copies `src` into a caller buffer of `capacity` values; `written`
/// receives the required length in every case.
unsafe fn copy_out(src: &[f64], out: *mut f64, capacity: usize, written: *mut usize) -> FfiResult<()> {
    *out_ptr(written, "written")? = src.len();
    if out.is_null() {
        return if capacity == 0 {
            Ok(())
        } else {
            Err(Failure::new(NmsStatus::NullPointer, "out is null"))
        };
    }
    if capacity < src.len() {
        return Err(Failure::new(
            NmsStatus::InvalidArgument,
            format!("buffer holds {capacity} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nms_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn nms_clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nms_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn nms_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a dataset from `count` equally sized trajectories.
///
/// `states` holds `count` column-major `state_dim x num_states` blocks and
/// `inputs` holds `count` column-major `input_dim x num_inputs` blocks.
///
/// # Safety
/// The arrays must hold the stated number of values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nms_dataset_new(
    q: usize,
    m: usize,
    count: usize,
    state_dim: usize,
    num_states: usize,
    states: *const f64,
    input_dim: usize,
    num_inputs: usize,
    inputs: *const f64,
    out: *mut *mut NmsDataset,
) -> NmsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let xs = state_dim * num_states;
        let us = input_dim * num_inputs;
        let states = slice_arg(states, count * xs, "states")?;
        let inputs = slice_arg(inputs, count * us, "inputs")?;
        let trajs = (0..count)
            .map(|i| {
                Trajectory::new(
                    DMatrix::from_column_slice(state_dim, num_states, &states[i * xs..(i + 1) * xs]),
                    DMatrix::from_column_slice(input_dim, num_inputs, &inputs[i * us..(i + 1) * us]),
                )
            })
            .collect::<nmsysid::Result<Vec<_>>>()?;
        *out = boxed(NmsDataset(Dataset::new(q, m, trajs)?));
        Ok(())
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nms_dataset_from_json(json: *const c_char, out: *mut *mut NmsDataset) -> NmsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let text = string_arg(json, "json")?;
        *out = boxed(NmsDataset(parse_json::<DatasetJson>(text, "dataset JSON")?.into_dataset()?));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nms_dataset_load(path: *const c_char, out: *mut *mut NmsDataset) -> NmsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = boxed(NmsDataset(load_dataset(Path::new(string_arg(path, "path")?))?));
        Ok(())
    })
}

/// # Safety
/// `data` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn nms_dataset_save(data: *const NmsDataset, path: *const c_char) -> NmsStatus {
    guard(|| {
        save_dataset(Path::new(string_arg(path, "path")?), &deref(data, "data")?.0)?;
        Ok(())
    })
}

/// # Safety
/// `data` must be a live handle; `out` must be writable. Free the result
/// with [`nms_string_free`].
#[no_mangle]
pub unsafe extern "C" fn nms_dataset_to_json(data: *const NmsDataset, out: *mut *mut c_char) -> NmsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = into_c_string(to_json_string(&DatasetJson::from(&deref(data, "data")?.0))?)?;
        Ok(())
    })
}

/// # Safety
/// `data` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nms_dataset_shape(data: *const NmsDataset, out: *mut NmsDatasetShape) -> NmsStatus {
    guard(|| {
        let d = &deref(data, "data")?.0;
        *out_ptr(out, "out")? = NmsDatasetShape {
            trajectories: d.len(),
            state_dim: d.state_dim(),
            input_dim: d.input_dim(),
            m: d.m(),
            q: d.q(),
        };
        Ok(())
    })
}

/// Copies every state of trajectory `index` (column-major).
///
/// # Safety
/// `data` must be a live handle; `out` must hold `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn nms_dataset_states(
    data: *const NmsDataset,
    index: usize,
    out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> NmsStatus {
    guard(|| {
        let d = &deref(data, "data")?.0;
        let t = d.trajectories().get(index).ok_or_else(|| {
            Failure::new(
                NmsStatus::InvalidArgument,
                format!("trajectory {index} out of range for {}", d.len()),
            )
        })?;
        copy_out(t.states().as_slice(), out, capacity, written)
    })
}

/// # Safety
/// `data` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn nms_dataset_free(data: *mut NmsDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Builds a model from column-major `A` (`n x n`), `B` (`n x k`) and the
/// kernel coefficients `c_1 .. c_{Q-1}`.
///
/// # Safety
/// The arrays must hold the stated number of values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nms_model_new(
    state_dim: usize,
    input_dim: usize,
    a: *const f64,
    b: *const f64,
    m: usize,
    q: usize,
    bandwidth: usize,
    coeffs: *const f64,
    out: *mut *mut NmsModel,
) -> NmsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let a = slice_arg(a, state_dim * state_dim, "a")?;
        let b = slice_arg(b, state_dim * input_dim, "b")?;
        let coeffs = slice_arg(coeffs, bandwidth.saturating_sub(1), "coeffs")?;
        let kernel = CausalBandKernel::new(m, q, bandwidth, coeffs.to_vec())?;
        let model = StateSpaceModel::new(
            DMatrix::from_column_slice(state_dim, state_dim, a),
            DMatrix::from_column_slice(state_dim, input_dim, b),
            kernel,
        )?;
        *out = boxed(NmsModel(model));
        Ok(())
    })
}

/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nms_model_from_json(json: *const c_char, out: *mut *mut NmsModel) -> NmsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let text = string_arg(json, "json")?;
        *out = boxed(NmsModel(parse_json::<ModelJson>(text, "model JSON")?.into_model()?));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nms_model_load(path: *const c_char, out: *mut *mut NmsModel) -> NmsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = boxed(NmsModel(load_model(Path::new(string_arg(path, "path")?))?));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn nms_model_save(model: *const NmsModel, path: *const c_char) -> NmsStatus {
    guard(|| {
        save_model(Path::new(string_arg(path, "path")?), &deref(model, "model")?.0)?;
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `out` must be writable. Free the result
/// with [`nms_string_free`].
#[no_mangle]
pub unsafe extern "C" fn nms_model_to_json(model: *const NmsModel, out: *mut *mut c_char) -> NmsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = into_c_string(to_json_string(&ModelJson::from(&deref(model, "model")?.0))?)?;
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nms_model_shape(model: *const NmsModel, out: *mut NmsModelShape) -> NmsStatus {
    guard(|| {
        let md = &deref(model, "model")?.0;
        *out_ptr(out, "out")? = NmsModelShape {
            state_dim: md.state_dim(),
            input_dim: md.input_dim(),
            m: md.kernel().m(),
            q: md.kernel().q(),
            bandwidth: md.kernel().bandwidth(),
        };
        Ok(())
    })
}

/// Copies `A` (column-major).
///
/// # Safety
/// `model` must be a live handle; `out` must hold `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn nms_model_a(model: *const NmsModel, out: *mut f64, capacity: usize, written: *mut usize) -> NmsStatus {
    guard(|| copy_out(deref(model, "model")?.0.a().as_slice(), out, capacity, written))
}

/// Copies `B` (column-major).
///
/// # Safety
/// `model` must be a live handle; `out` must hold `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn nms_model_b(model: *const NmsModel, out: *mut f64, capacity: usize, written: *mut usize) -> NmsStatus {
    guard(|| copy_out(deref(model, "model")?.0.b().as_slice(), out, capacity, written))
}

/// Copies the kernel coefficients `c_1 .. c_{Q-1}`.
///
/// # Safety
/// `model` must be a live handle; `out` must hold `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn nms_model_coeffs(
    model: *const NmsModel,
    out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> NmsStatus {
    guard(|| copy_out(deref(model, "model")?.0.kernel().coeffs(), out, capacity, written))
}

/// # Safety
/// `model` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn nms_model_free(model: *mut NmsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

#[no_mangle]
pub extern "C" fn nms_fit_options_default() -> NmsFitOptions {
    let d = PgdConfig::default();
    NmsFitOptions {
        t0: d.t0,
        eta: d.eta,
        max_steps: d.max_steps,
        bandwidth: 0,
    }
}

fn constraint_spec(constraints: &str, graph: Option<Mask>, data: &Dataset, bandwidth: usize) -> FfiResult<ConstraintSpec> {
    let q = data.q();
    let need = |g: Option<Mask>| {
        g.ok_or_else(|| Failure::new(NmsStatus::InvalidArgument, format!("constraints \"{constraints}\" need a graph")))
    };
    Ok(match constraints.trim() {
        "a1b" => ConstraintSpec::a1b(need(graph)?, q, bandwidth),
        "a2b" => ConstraintSpec::a2b(need(graph)?, q, bandwidth),
        "none" => ConstraintSpec::unconstrained(q, bandwidth),
        text => parse_json::<ConstraintSpecJson>(text, "constraint JSON")?.resolve(graph.as_ref(), data.state_dim())?,
    })
}

/// Fits `(A, B, D)` by projected gradient descent.
///
/// `constraints` is `"a1b"`, `"a2b"`, `"none"` or a constraint-spec JSON
/// document. `graph_json` is a graph document supplying the sparsity mask;
/// it may be null when no constraint refers to the graph. `options` may be
/// null for defaults.
///
/// # Safety
/// Pointers must be live handles or NUL-terminated strings as described;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nms_fit(
    data: *const NmsDataset,
    constraints: *const c_char,
    graph_json: *const c_char,
    options: *const NmsFitOptions,
    out: *mut *mut NmsFitReport,
) -> NmsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let data = &deref(data, "data")?.0;
        let constraints = string_arg(constraints, "constraints")?;
        let graph = if graph_json.is_null() {
            None
        } else {
            Some(parse_json::<GraphJson>(string_arg(graph_json, "graph_json")?, "graph JSON")?.mask()?)
        };
        let opts = options.as_ref().copied().unwrap_or_else(|| nms_fit_options_default());
        let bandwidth = if opts.bandwidth == 0 { data.q() + 1 } else { opts.bandwidth };
        let spec = constraint_spec(constraints, graph, data, bandwidth)?;
        let cfg = PgdConfig {
            t0: opts.t0,
            eta: opts.eta,
            max_steps: opts.max_steps,
            ..PgdConfig::default()
        };
        *out = boxed(NmsFitReport(pgd_fit(data, &spec, &cfg)?));
        Ok(())
    })
}

/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nms_fit_report_model(report: *const NmsFitReport, out: *mut *mut NmsModel) -> NmsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = boxed(NmsModel(deref(report, "report")?.0.theta.to_model()?));
        Ok(())
    })
}

/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nms_fit_report_steps(report: *const NmsFitReport, out: *mut usize) -> NmsStatus {
    guard(|| {
        *out_ptr(out, "out")? = deref(report, "report")?.0.steps();
        Ok(())
    })
}

/// Copies the loss at every iterate, starting with the initial point.
///
/// # Safety
/// `report` must be a live handle; `out` must hold `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn nms_fit_report_losses(
    report: *const NmsFitReport,
    out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> NmsStatus {
    guard(|| copy_out(&deref(report, "report")?.0.loss_curve, out, capacity, written))
}

/// Copies the accepted stepsize of each iteration.
///
/// # Safety
/// `report` must be a live handle; `out` must hold `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn nms_fit_report_stepsizes(
    report: *const NmsFitReport,
    out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> NmsStatus {
    guard(|| copy_out(&deref(report, "report")?.0.stepsize_curve, out, capacity, written))
}

/// # Safety
/// `report` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn nms_fit_report_free(report: *mut NmsFitReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Markovian DMDc fit. `rank == 0` scans all ranks on the training set;
/// `pooled != 0` fits on every trajectory, otherwise on `fit_index`. The
/// rank used is written to `rank_used` when it is non-null.
///
/// # Safety
/// `data` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nms_dmdc(
    data: *const NmsDataset,
    rank: usize,
    pooled: i32,
    fit_index: usize,
    out: *mut *mut NmsModel,
    rank_used: *mut usize,
) -> NmsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let data = &deref(data, "data")?.0;
        let selection = if pooled != 0 {
            FitSelection::Pooled
        } else {
            FitSelection::Single(fit_index)
        };
        let rank = if rank == 0 {
            dmdc_rank_scan(data, selection)?.best_rank
        } else {
            rank
        };
        let (a, b) = dmdc_fit(data, selection, rank)?;
        *out = boxed(NmsModel(StateSpaceModel::markovian(a, b, data.m())?));
        if let Some(r) = rank_used.as_mut() {
            *r = rank;
        }
        Ok(())
    })
}

/// Re-simulates every trajectory of `data` from its initial states and
/// inputs.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nms_simulate(
    model: *const NmsModel,
    data: *const NmsDataset,
    out: *mut *mut NmsDataset,
) -> NmsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let model = &deref(model, "model")?.0;
        let data = &deref(data, "data")?.0;
        let preds = data
            .trajectories()
            .iter()
            .map(|t| resimulate(model, t))
            .collect::<nmsysid::Result<Vec<_>>>()?;
        *out = boxed(NmsDataset(Dataset::new(data.q(), data.m(), preds)?));
        Ok(())
    })
}

/// Training loss of `model` on `data`, with the kernel resized to `data`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nms_loss(model: *const NmsModel, data: *const NmsDataset, out: *mut f64) -> NmsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let model = &deref(model, "model")?.0;
        let data = &deref(data, "data")?.0;
        *out = loss(&ParamPoint::from_model(model, data.m())?, data)?;
        Ok(())
    })
}

/// Mean relative reconstruction error over the trajectories of `data`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nms_mean_relative_error(
    model: *const NmsModel,
    data: *const NmsDataset,
    out: *mut f64,
) -> NmsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let model = &deref(model, "model")?.0;
        let data = &deref(data, "data")?.0;
        let mut sum = 0.0;
        for t in data.trajectories() {
            sum += relative_reconstruction_error(model, t)?;
        }
        *out = sum / data.len() as f64;
        Ok(())
    })
}
