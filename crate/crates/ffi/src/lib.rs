//! C ABI over the `mctspo` crate.
//!
//! Every fallible call returns an [`MctspoStatus`]; on failure a message is
//! available from [`mctspo_last_error`] on the same thread. Objects are
//! opaque handles that must be released with their `_free` function.
//! Strings returned through out-pointers are owned by the caller and must be
//! released with [`mctspo_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mctspo::harness::{self, ExperimentConfig};
use mctspo::{EnvKind, EnvSpec, Error, Genome, RunResult};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MctspoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    DimensionMismatch = 3,
    Contract = 4,
    DegenerateDirection = 5,
    CandidateGenerationFailed = 6,
    BudgetExhausted = 7,
    Config = 8,
    Io = 9,
    Parse = 10,
    OutOfRange = 11,
    Panic = 12,
}

impl From<&Error> for MctspoStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::DimensionMismatch { .. } => MctspoStatus::DimensionMismatch,
            Error::Contract(_) => MctspoStatus::Contract,
            Error::DegenerateDirection { .. } => MctspoStatus::DegenerateDirection,
            Error::CandidateGenerationFailed { .. } => MctspoStatus::CandidateGenerationFailed,
            Error::BudgetExhausted { .. } => MctspoStatus::BudgetExhausted,
            Error::Config(_) => MctspoStatus::Config,
            Error::Io { .. } => MctspoStatus::Io,
            Error::Parse { .. } => MctspoStatus::Parse,
        }
    }
}

/// A search genome: network shape plus its action sequence.
pub struct MctspoGenome {
    inner: Genome,
}

/// Result of one search or GA run.
pub struct MctspoRun {
    inner: RunResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(MctspoStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(MctspoStatus::from(&e), e.to_string())
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Runs `f`, turning errors and panics into a status code plus last-error
/// message.
fn guard(f: impl FnOnce() -> Outcome<()>) -> MctspoStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MctspoStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MctspoStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(MctspoStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Outcome<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(MctspoStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Outcome<&'a mut T> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Outcome<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

fn parse_env(text: &str) -> Outcome<EnvSpec> {
    if text.trim_start().starts_with('{') {
        let spec: EnvSpec = serde_json::from_str(text).map_err(|source| Error::Parse {
            what: "task settings".into(),
            source,
        })?;
        spec.validate()?;
        Ok(spec)
    } else {
        Ok(EnvSpec::for_kind(text.parse::<EnvKind>()?))
    }
}

/// Message for the most recent failed call on this thread, or null. The
/// pointer stays valid until the next call into this library on the thread.
#[no_mangle]
pub extern "C" fn mctspo_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mctspo_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a genome JSON file.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mctspo_genome_load(path: *const c_char, out: *mut *mut MctspoGenome) -> MctspoStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let genome = Genome::load(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(MctspoGenome { inner: genome }));
        Ok(())
    })
}

/// Parses a genome from JSON text.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mctspo_genome_from_json(json: *const c_char, out: *mut *mut MctspoGenome) -> MctspoStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let genome = Genome::from_json(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(MctspoGenome { inner: genome }));
        Ok(())
    })
}

/// Serializes a genome; free the string with [`mctspo_string_free`].
///
/// # Safety
/// `genome` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mctspo_genome_to_json(genome: *const MctspoGenome, out: *mut *mut c_char) -> MctspoStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let json = handle(genome, "genome")?.inner.to_json()?;
        *out = CString::new(json).expect("JSON has no nul bytes").into_raw();
        Ok(())
    })
}

/// Number of actions in the genome; 0 for a null handle.
///
/// # Safety
/// `genome` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mctspo_genome_depth(genome: *const MctspoGenome) -> usize {
    genome.as_ref().map_or(0, |g| g.inner.depth())
}

/// # Safety
/// `genome` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mctspo_genome_free(genome: *mut MctspoGenome) {
    if !genome.is_null() {
        drop(Box::from_raw(genome));
    }
}

/// Rolls the genome's policy out once. `env` is a task name
/// (`sparse-mountain-car`, `sparse-acrobot`) or a JSON task object.
///
/// # Safety
/// `genome` must be a live handle, `env` a nul-terminated string, and the
/// out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn mctspo_replay(
    genome: *const MctspoGenome,
    env: *const c_char,
    out_return: *mut f64,
    out_reached_goal: *mut bool,
) -> MctspoStatus {
    guard(|| {
        let genome = handle(genome, "genome")?;
        let spec = parse_env(str_arg(env, "env")?)?;
        let out_return = out_arg(out_return, "out_return")?;
        let out_reached = out_arg(out_reached_goal, "out_reached_goal")?;
        let outcome = harness::replay_genome(&genome.inner, &spec)?;
        *out_return = outcome.total_return;
        *out_reached = outcome.reached_goal;
        Ok(())
    })
}

/// Runs one trial in memory from an experiment config (JSON text). The
/// config's seed list and output directory are ignored; nothing is written.
///
/// # Safety
/// `config_json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mctspo_run(config_json: *const c_char, seed: u64, out: *mut *mut MctspoRun) -> MctspoStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let text = str_arg(config_json, "config_json")?;
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|source| Error::Parse {
            what: "experiment config".into(),
            source,
        })?;
        config.validate()?;
        let result = harness::run_trial(&config, seed)?;
        *out = Box::into_raw(Box::new(MctspoRun { inner: result }));
        Ok(())
    })
}

/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mctspo_run_best_return(run: *const MctspoRun, out: *mut f64) -> MctspoStatus {
    guard(|| {
        *out_arg(out, "out")? = handle(run, "run")?.inner.best_return;
        Ok(())
    })
}

/// Environment calls the run consumed; 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mctspo_run_env_calls(run: *const MctspoRun) -> u64 {
    run.as_ref().map_or(0, |r| r.inner.env_calls)
}

/// Number of learning-curve points; 0 for a null handle.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mctspo_run_curve_len(run: *const MctspoRun) -> usize {
    run.as_ref().map_or(0, |r| r.inner.curve.len())
}

/// Reads curve point `index`.
///
/// # Safety
/// `run` must be a live handle and the out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn mctspo_run_curve_point(
    run: *const MctspoRun,
    index: usize,
    out_env_calls: *mut u64,
    out_best_return: *mut f64,
) -> MctspoStatus {
    guard(|| {
        let curve = &handle(run, "run")?.inner.curve;
        let calls = out_arg(out_env_calls, "out_env_calls")?;
        let best = out_arg(out_best_return, "out_best_return")?;
        let p = curve.get(index).ok_or_else(|| {
            Failure(
                MctspoStatus::OutOfRange,
                format!("curve index {index} out of range (len {})", curve.len()),
            )
        })?;
        *calls = p.env_calls;
        *best = p.best_return;
        Ok(())
    })
}

/// Copies the run's best genome into a new handle.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mctspo_run_best_genome(run: *const MctspoRun, out: *mut *mut MctspoGenome) -> MctspoStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let genome = handle(run, "run")?.inner.best_genome.clone();
        *out = Box::into_raw(Box::new(MctspoGenome { inner: genome }));
        Ok(())
    })
}

/// # Safety
/// `run` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mctspo_run_free(run: *mut MctspoRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

#[cfg(test)]
mod tests;
