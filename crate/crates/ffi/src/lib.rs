//! C ABI over the toolkit: opaque handles, integer status codes, and
//! UTF-8 strings.
//!
//! Conventions:
//! - every `char*` returned through an out-parameter is owned by the
//!   caller and released with [`egovqa_string_free`];
//! - handles from `_ingest`/`_open` pair with [`egovqa_store_free`];
//! - any call that does not return [`EgoStatus::Ok`] leaves a message
//!   readable via [`egovqa_last_error_message`] on the same thread, valid
//!   until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use egovqa_core::conceptnet::{
    load_assertions, AssertionStore, ConceptId, RelationSet, DEFAULT_N_QUANTILES,
};
use egovqa_core::knowledge::{
    build_graph, default_reference_sentences, extract_paths, filter_paths, score_paths,
    HashEncoder, DEFAULT_GRAPH_DEPTH, DEFAULT_MAX_PATHS, DEFAULT_PATH_CAP,
};
use egovqa_core::media::{gaze_window, plan_segments, temporal_divisor};
use egovqa_core::mllm::{extract_choice, ChoiceSet};
use egovqa_core::scene::parse_scene_graph;

/// Result of an FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EgoStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Parse = 5,
    Internal = 6,
}

/// Assertion store behind an opaque pointer.
pub struct EgoStore {
    inner: AssertionStore,
}

/// Temporal subsampling decision for one video.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoTemporalPlan {
    /// Playback acceleration factor; 1 means no subsampling.
    pub divisor: u32,
    /// Video length in seconds after subsampling, floored at 1.
    pub effective_duration_s: f64,
}

/// Closed time window in seconds.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoTimeInterval {
    pub start: f64,
    pub end: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = Some(CString::new(sanitized).expect("NUL bytes stripped"));
    });
}

fn guarded<F: FnOnce() -> EgoStatus>(f: F) -> EgoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic".to_string());
            EgoStatus::Internal
        }
    }
}

/// # Safety
/// `ptr` must be null or a NUL-terminated string.
unsafe fn read_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, EgoStatus> {
    if ptr.is_null() {
        set_error(format!("{name} is null"));
        return Err(EgoStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(format!("{name} is not valid UTF-8"));
        EgoStatus::InvalidUtf8
    })
}

/// JSON output never holds interior NUL bytes, so the conversion cannot
/// fail in practice.
unsafe fn write_string(out: *mut *mut c_char, text: String) -> EgoStatus {
    if out.is_null() {
        set_error("output pointer is null".to_string());
        return EgoStatus::NullArgument;
    }
    match CString::new(text) {
        Ok(s) => {
            *out = s.into_raw();
            EgoStatus::Ok
        }
        Err(_) => {
            set_error("output holds an interior NUL byte".to_string());
            EgoStatus::Internal
        }
    }
}

unsafe fn write_store(out: *mut *mut EgoStore, store: AssertionStore) -> EgoStatus {
    if out.is_null() {
        set_error("output pointer is null".to_string());
        return EgoStatus::NullArgument;
    }
    *out = Box::into_raw(Box::new(EgoStore { inner: store }));
    EgoStatus::Ok
}

/// Library version as a static string; never freed by the caller.
#[no_mangle]
pub extern "C" fn egovqa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message from the last failing call on this thread, or null. Owned by
/// the library; valid until the next failing call.
#[no_mangle]
pub extern "C" fn egovqa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned through an out-parameter. Null is a no-op.
///
/// # Safety
/// `s` must have come from this library and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn egovqa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Ingests an assertion dump (TSV, optionally gzipped), fits the weight
/// transform, and returns a normalized store. `n_quantiles` of 0 selects
/// the default landmark count.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out_store` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn egovqa_store_ingest(
    dump_path: *const c_char,
    language: *const c_char,
    n_quantiles: usize,
    out_store: *mut *mut EgoStore,
) -> EgoStatus {
    guarded(|| {
        let path = match read_str(dump_path, "dump_path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let language = match read_str(language, "language") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let relations = RelationSet::default_whitelist();
        let (assertions, _stats) = match load_assertions(Path::new(path), language, &relations) {
            Ok(v) => v,
            Err(e) => {
                set_error(e.to_string());
                return EgoStatus::Io;
            }
        };
        let mut store = match AssertionStore::from_assertions(language, relations, assertions) {
            Ok(s) => s,
            Err(e) => {
                set_error(e.to_string());
                return EgoStatus::InvalidArgument;
            }
        };
        let n = if n_quantiles == 0 {
            DEFAULT_N_QUANTILES
        } else {
            n_quantiles
        };
        match store.fit_quantile_transform(n) {
            Ok(qt) => store.normalize_weights(qt),
            Err(e) => {
                set_error(e.to_string());
                return EgoStatus::InvalidArgument;
            }
        }
        write_store(out_store, store)
    })
}

/// Opens a store file previously written by `egovqa_store_save` (or the
/// CLI `ingest` command).
///
/// # Safety
/// `path` must be null or NUL-terminated; `out_store` must be valid.
#[no_mangle]
pub unsafe extern "C" fn egovqa_store_open(
    path: *const c_char,
    out_store: *mut *mut EgoStore,
) -> EgoStatus {
    guarded(|| {
        let path = match read_str(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match AssertionStore::load_from_path(Path::new(path)) {
            Ok(store) => write_store(out_store, store),
            Err(e) => {
                set_error(e.to_string());
                EgoStatus::Io
            }
        }
    })
}

/// Writes the store to `path` in the line-delimited store format.
///
/// # Safety
/// `store` must be a live handle; `path` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn egovqa_store_save(
    store: *const EgoStore,
    path: *const c_char,
) -> EgoStatus {
    guarded(|| {
        let Some(store) = store.as_ref() else {
            set_error("store is null".to_string());
            return EgoStatus::NullArgument;
        };
        let path = match read_str(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match store.inner.save_to_path(Path::new(path)) {
            Ok(()) => EgoStatus::Ok,
            Err(e) => {
                set_error(e.to_string());
                EgoStatus::Io
            }
        }
    })
}

/// Number of assertions held by the store; 0 for a null handle.
///
/// # Safety
/// `store` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn egovqa_store_assertion_count(store: *const EgoStore) -> u64 {
    store.as_ref().map_or(0, |s| s.inner.len() as u64)
}

/// Releases a store handle. Null is a no-op.
///
/// # Safety
/// `store` must have come from this library and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn egovqa_store_free(store: *mut EgoStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Builds the knowledge graph rooted at `root` (a concept URI or a bare
/// label in the store's language), ranks its rendered paths against the
/// built-in reference sentences, and returns the kept paths as a JSON
/// array of `{"root", "text", "score"}` objects. A `depth` of 0 and a
/// `max_paths` of 0 select the defaults.
///
/// # Safety
/// `store` must be a live handle; `root` null or NUL-terminated;
/// `out_json` valid.
#[no_mangle]
pub unsafe extern "C" fn egovqa_store_paths_json(
    store: *const EgoStore,
    root: *const c_char,
    depth: usize,
    threshold: f64,
    max_paths: usize,
    out_json: *mut *mut c_char,
) -> EgoStatus {
    guarded(|| {
        let Some(store) = store.as_ref() else {
            set_error("store is null".to_string());
            return EgoStatus::NullArgument;
        };
        let root = match read_str(root, "root") {
            Ok(s) => s,
            Err(status) => return status,
        };
        if !threshold.is_finite() {
            set_error(format!("threshold {threshold} is not finite"));
            return EgoStatus::InvalidArgument;
        }
        let root = if root.starts_with("/c/") {
            ConceptId::new(root)
        } else {
            ConceptId::from_label(store.inner.language(), root)
        };
        let root = match root {
            Ok(id) => id,
            Err(e) => {
                set_error(e.to_string());
                return EgoStatus::InvalidArgument;
            }
        };
        let depth = if depth == 0 {
            DEFAULT_GRAPH_DEPTH
        } else {
            depth
        };
        let max_paths = if max_paths == 0 {
            DEFAULT_MAX_PATHS
        } else {
            max_paths
        };

        let graph = match build_graph(&store.inner, &root, depth, threshold) {
            Ok(g) => g,
            Err(e) => {
                set_error(e.to_string());
                return EgoStatus::InvalidArgument;
            }
        };
        let mut paths = extract_paths(&graph, DEFAULT_PATH_CAP);
        let references = default_reference_sentences();
        if let Err(e) = score_paths(&mut paths, &references, &HashEncoder::new(384)) {
            set_error(e.to_string());
            return EgoStatus::Internal;
        }
        let kept = filter_paths(paths, max_paths);

        let rows: Vec<serde_json::Value> = kept
            .iter()
            .map(|p| {
                serde_json::json!({
                    "root": p.root.to_string(),
                    "text": p.text,
                    "score": p.score,
                })
            })
            .collect();
        match serde_json::to_string(&rows) {
            Ok(json) => write_string(out_json, json),
            Err(e) => {
                set_error(e.to_string());
                EgoStatus::Internal
            }
        }
    })
}

/// Total scene-graph check: the number of rule violations in `raw`
/// (0 means the text is a valid graph), or -1 on a bad argument.
///
/// # Safety
/// `raw` must be null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn egovqa_scene_violation_count(raw: *const c_char) -> i64 {
    let raw = match read_str(raw, "raw") {
        Ok(s) => s,
        Err(_) => return -1,
    };
    match catch_unwind(AssertUnwindSafe(|| parse_scene_graph(raw))) {
        Ok(egovqa_core::scene::ParseOutcome::Parsed(_)) => 0,
        Ok(egovqa_core::scene::ParseOutcome::Rejected { violations, .. }) => {
            violations.len() as i64
        }
        Err(_) => {
            set_error("internal panic".to_string());
            -1
        }
    }
}

/// Parses `raw` and returns a JSON report:
/// `{"parsed": bool, "violations": [{"rule", "element", "message"}]}`.
///
/// # Safety
/// `raw` must be null or NUL-terminated; `out_json` valid.
#[no_mangle]
pub unsafe extern "C" fn egovqa_scene_diagnostics_json(
    raw: *const c_char,
    out_json: *mut *mut c_char,
) -> EgoStatus {
    guarded(|| {
        let raw = match read_str(raw, "raw") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let (parsed, violations) = match parse_scene_graph(raw) {
            egovqa_core::scene::ParseOutcome::Parsed(_) => (true, Vec::new()),
            egovqa_core::scene::ParseOutcome::Rejected { violations, .. } => (false, violations),
        };
        let report = serde_json::json!({
            "parsed": parsed,
            "violations": violations,
        });
        match serde_json::to_string(&report) {
            Ok(json) => write_string(out_json, json),
            Err(e) => {
                set_error(e.to_string());
                EgoStatus::Internal
            }
        }
    })
}

/// Tiles `duration_s` into processing segments and returns them as a
/// JSON array of `{"index", "start_s", "end_s"}` objects.
///
/// # Safety
/// `out_json` must be valid.
#[no_mangle]
pub unsafe extern "C" fn egovqa_plan_segments_json(
    duration_s: f64,
    out_json: *mut *mut c_char,
) -> EgoStatus {
    guarded(|| {
        let segments = match plan_segments(duration_s) {
            Ok(s) => s,
            Err(e) => {
                set_error(e.to_string());
                return EgoStatus::InvalidArgument;
            }
        };
        match serde_json::to_string(&segments) {
            Ok(json) => write_string(out_json, json),
            Err(e) => {
                set_error(e.to_string());
                EgoStatus::Internal
            }
        }
    })
}

/// Temporal subsampling plan for a video of `duration_s` seconds. Total:
/// nonpositive durations get the identity plan.
#[no_mangle]
pub extern "C" fn egovqa_temporal_divisor(duration_s: f64) -> EgoTemporalPlan {
    let plan = temporal_divisor(duration_s);
    EgoTemporalPlan {
        divisor: plan.divisor,
        effective_duration_s: plan.effective_duration_s,
    }
}

/// Look-back window ending at `t`, clamped at zero.
#[no_mangle]
pub extern "C" fn egovqa_gaze_window(t: f64) -> EgoTimeInterval {
    let w = gaze_window(t);
    EgoTimeInterval {
        start: w.start,
        end: w.end,
    }
}

/// Extracts a multiple-choice answer from a model response.
/// `options_json` is a JSON array of the choice texts. Returns the
/// 0-based choice index, -1 for an abstention, or -2 on a bad argument.
///
/// # Safety
/// Both arguments must be null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn egovqa_extract_choice(
    response: *const c_char,
    options_json: *const c_char,
) -> i32 {
    let (response, options_json) = match (
        read_str(response, "response"),
        read_str(options_json, "options_json"),
    ) {
        (Ok(r), Ok(o)) => (r, o),
        _ => return -2,
    };
    let options: Vec<String> = match serde_json::from_str(options_json) {
        Ok(v) => v,
        Err(e) => {
            set_error(format!("options_json: {e}"));
            return -2;
        }
    };
    let choices = match ChoiceSet::new(options) {
        Ok(c) => c,
        Err(e) => {
            set_error(e.to_string());
            return -2;
        }
    };
    match catch_unwind(AssertUnwindSafe(|| extract_choice(response, &choices))) {
        Ok(Some(index)) => index as i32,
        Ok(None) => -1,
        Err(_) => {
            set_error("internal panic".to_string());
            -2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cstr(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    #[test]
    fn version_is_a_static_string() {
        let v = unsafe { CStr::from_ptr(egovqa_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn null_arguments_set_the_error_message() {
        let mut out: *mut EgoStore = ptr::null_mut();
        let status = unsafe { egovqa_store_open(ptr::null(), &mut out) };
        assert_eq!(status, EgoStatus::NullArgument);
        let msg = unsafe { CStr::from_ptr(egovqa_last_error_message()) };
        assert_eq!(msg.to_str().unwrap(), "path is null");
        assert!(out.is_null());
    }

    #[test]
    fn choice_extraction_crosses_the_boundary() {
        let options = cstr(r#"["red", "green", "blue"]"#);
        let response = cstr("Answer: B");
        assert_eq!(
            unsafe { egovqa_extract_choice(response.as_ptr(), options.as_ptr()) },
            1
        );
        let shrug = cstr("no idea");
        assert_eq!(
            unsafe { egovqa_extract_choice(shrug.as_ptr(), options.as_ptr()) },
            -1
        );
        let bad = cstr("not json");
        assert_eq!(
            unsafe { egovqa_extract_choice(shrug.as_ptr(), bad.as_ptr()) },
            -2
        );
    }

    #[test]
    fn media_helpers_return_plain_structs() {
        let plan = egovqa_temporal_divisor(4800.0);
        assert_eq!(plan.divisor, 2);
        assert_eq!(plan.effective_duration_s, 2400.0);
        let window = egovqa_gaze_window(98.5);
        assert_eq!(window.start, 0.0);
        assert_eq!(window.end, 98.5);
    }
}
