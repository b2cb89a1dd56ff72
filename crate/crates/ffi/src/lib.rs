//! C ABI over the similarity model and the reward shaper.
//!
//! Conventions:
//! - Every fallible function returns an [`MgStatus`]; results go through out
//!   pointers, which are left untouched on failure.
//! - [`mg_last_error`] returns a message for the most recent failure on the
//!   calling thread.
//! - Handles ([`MgModel`], [`MgMask`]) are opaque, created by `*_load` or
//!   `*_new`, and released with the matching `*_free`. Passing NULL to a
//!   `*_free` function is a no-op.
//! - A model handle may be shared across threads for reads; a mask handle
//!   must not be used from two threads at once.
//! - Panics never cross the boundary; they surface as `MG_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use moe_guide::moe::MoEModel;
use moe_guide::shaping::{
    map_loss, shaped_bonus, DecayMode, DecaySchedule, Discretizer, Falloff, MappingConfig, NoveltyMask,
};
use moe_guide::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MgStatus {
    MgOk = 0,
    MgNullPointer = 1,
    MgInvalidArgument = 2,
    MgShapeMismatch = 3,
    MgIo = 4,
    MgParse = 5,
    MgNonFinite = 6,
    MgInvalidState = 7,
    MgPanic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MgFalloff {
    MgExponential = 0,
    MgLinear = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgMappingConfig {
    pub l_min: f64,
    pub l_max: f64,
    pub steepness: f64,
    pub scale: f64,
    pub falloff: MgFalloff,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MgDecayMode {
    /// `beta0 * decay^t`.
    MgPerStep = 0,
    /// `beta0 * exp(-decay * t)`.
    MgExponentialRate = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgDecay {
    pub beta0: f64,
    pub decay: f64,
    pub mode: MgDecayMode,
}

/// Opaque trained mixture.
pub struct MgModel(MoEModel);

/// Opaque episodic novelty mask.
pub struct MgMask(NoveltyMask);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> MgStatus {
    match e {
        Error::Shape { .. } => MgStatus::MgShapeMismatch,
        Error::InvalidConfig { .. } | Error::InvalidAction { .. } => MgStatus::MgInvalidArgument,
        Error::Io { .. } => MgStatus::MgIo,
        Error::Parse { .. } => MgStatus::MgParse,
        Error::NonFiniteGradient { .. } | Error::NonFiniteLoss { .. } | Error::NonFiniteQ { .. } => {
            MgStatus::MgNonFinite
        }
        Error::EmptyDemos | Error::UnfittedNormalizer | Error::Generation { .. } => MgStatus::MgInvalidState,
    }
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

/// Runs `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            MgStatus::MgOk
        }
        Ok(Err(Fail::Null(what))) => {
            set_last_error(&format!("null pointer: {what}"));
            MgStatus::MgNullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_last_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic");
            MgStatus::MgPanic
        }
    }
}

unsafe fn non_null<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(p: *mut T, v: T, what: &'static str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    p.write(v);
    Ok(())
}

unsafe fn copy_out(src: &[f64], dst: *mut f64, cap: usize) -> Result<(), Fail> {
    if cap < src.len() {
        return Err(Fail::Core(Error::Shape {
            context: "output buffer",
            expected: src.len(),
            got: cap,
        }));
    }
    if src.is_empty() {
        return Ok(());
    }
    if dst.is_null() {
        return Err(Fail::Null("out"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

impl From<MgMappingConfig> for MappingConfig {
    fn from(c: MgMappingConfig) -> Self {
        MappingConfig {
            l_min: c.l_min,
            l_max: c.l_max,
            steepness: c.steepness,
            scale: c.scale,
            falloff: match c.falloff {
                MgFalloff::MgExponential => Falloff::Exponential,
                MgFalloff::MgLinear => Falloff::Linear,
            },
        }
    }
}

impl From<MgDecay> for DecaySchedule {
    fn from(d: MgDecay) -> Self {
        DecaySchedule {
            beta0: d.beta0,
            mode: match d.mode {
                MgDecayMode::MgPerStep => DecayMode::PerStepMultiplicative(d.decay),
                MgDecayMode::MgExponentialRate => DecayMode::ExponentialRate(d.decay),
            },
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failure on this thread ("" after a success). The
/// pointer stays valid until the next call into this library on the thread.
#[no_mangle]
pub extern "C" fn mg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a model file written by `moe-guide train-moe`.
#[no_mangle]
pub unsafe extern "C" fn mg_model_load(path: *const c_char, out: *mut *mut MgModel) -> MgStatus {
    guard(|| {
        if path.is_null() {
            return Err(Fail::Null("path"));
        }
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|_| Error::InvalidConfig {
            key: "path".into(),
            reason: "not valid UTF-8".into(),
        })?;
        let model = MoEModel::load(Path::new(path))?;
        out.write(Box::into_raw(Box::new(MgModel(model))));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn mg_model_free(model: *mut MgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// State dimension, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn mg_model_state_dim(model: *const MgModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.state_dim())
}

/// Number of experts, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn mg_model_num_experts(model: *const MgModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.num_experts())
}

/// Reconstruction loss of a raw state.
#[no_mangle]
pub unsafe extern "C" fn mg_model_loss(
    model: *const MgModel,
    state: *const f64,
    len: usize,
    out: *mut f64,
) -> MgStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let s = slice(state, len, "state")?;
        let loss = m.0.loss(s)?;
        write_out(out, loss, "out")
    })
}

/// Normalized state's reconstruction (`state_dim` values) and gate weights
/// (`num_experts` values). Either output may be NULL with capacity 0.
#[no_mangle]
pub unsafe extern "C" fn mg_model_reconstruct(
    model: *const MgModel,
    state: *const f64,
    len: usize,
    out_recon: *mut f64,
    recon_cap: usize,
    out_weights: *mut f64,
    weights_cap: usize,
) -> MgStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let s = slice(state, len, "state")?;
        let x = m.0.normalize_state(s)?;
        let (recon, weights) = m.0.reconstruct(&x)?;
        if recon_cap > 0 || !out_recon.is_null() {
            copy_out(&recon, out_recon, recon_cap)?;
        }
        if weights_cap > 0 || !out_weights.is_null() {
            copy_out(&weights, out_weights, weights_cap)?;
        }
        Ok(())
    })
}

/// Defaults: l_min 0.01, l_max 0.1, steepness 20, scale 1, exponential.
#[no_mangle]
pub extern "C" fn mg_mapping_default() -> MgMappingConfig {
    let d = MappingConfig::default();
    MgMappingConfig {
        l_min: d.l_min,
        l_max: d.l_max,
        steepness: d.steepness,
        scale: d.scale,
        falloff: MgFalloff::MgExponential,
    }
}

/// Maps a loss to a reward in `[0, scale]`.
#[no_mangle]
pub unsafe extern "C" fn mg_map_loss(loss: f64, config: *const MgMappingConfig, out: *mut f64) -> MgStatus {
    guard(|| {
        let cfg: MappingConfig = (*non_null(config, "config")?).into();
        let r = map_loss(loss, &cfg)?;
        write_out(out, r, "out")
    })
}

/// Bonus weight at step `t`.
#[no_mangle]
pub unsafe extern "C" fn mg_beta_at(decay: *const MgDecay, t: u64, out: *mut f64) -> MgStatus {
    guard(|| {
        let sched: DecaySchedule = (*non_null(decay, "decay")?).into();
        sched.validate()?;
        write_out(out, sched.beta_at(t), "out")
    })
}

/// Empty mask that rounds each coordinate to a multiple of `pitch`.
#[no_mangle]
pub unsafe extern "C" fn mg_mask_new(pitch: f64, out: *mut *mut MgMask) -> MgStatus {
    guard(|| {
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(Error::InvalidConfig {
                key: "pitch".into(),
                reason: "must be positive".into(),
            }
            .into());
        }
        let mask = Box::new(MgMask(NoveltyMask::new(Discretizer::Grid { pitch })));
        write_out(out, Box::into_raw(mask), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn mg_mask_reset(mask: *mut MgMask) -> MgStatus {
    guard(|| {
        let m = mask.as_mut().ok_or(Fail::Null("mask"))?;
        m.0.reset();
        Ok(())
    })
}

/// Number of states marked this episode, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn mg_mask_len(mask: *const MgMask) -> usize {
    mask.as_ref().map_or(0, |m| m.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn mg_mask_free(mask: *mut MgMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

/// `beta_t * g(L(state))`. With a non-NULL mask, a state already marked
/// this episode earns 0 and a new state is marked.
#[no_mangle]
pub unsafe extern "C" fn mg_shaped_bonus(
    model: *const MgModel,
    config: *const MgMappingConfig,
    decay: *const MgDecay,
    mask: *mut MgMask,
    state: *const f64,
    len: usize,
    t: u64,
    out: *mut f64,
) -> MgStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let cfg: MappingConfig = (*non_null(config, "config")?).into();
        let sched: DecaySchedule = (*non_null(decay, "decay")?).into();
        sched.validate()?;
        let s = slice(state, len, "state")?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let mask = mask.as_mut().map(|m| &mut m.0);
        let b = shaped_bonus(&m.0, &cfg, &sched, mask, s, t)?;
        write_out(out, b, "out")
    })
}
