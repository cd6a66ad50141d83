//! C ABI over `cfkgr`.
//!
//! Objects are opaque handles created by `*_load` functions and released by
//! the matching `*_free`. Every fallible call returns a [`CfkgrStatus`]; on
//! failure, [`cfkgr_last_error`] describes the error on the calling thread.
//! Handles may be shared across threads for reading; none of
//! the functions here mutate a handle.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use cfkgr::calibration::ThresholdSet;
use cfkgr::kg::{load_kg, KgPaths};
use cfkgr::{checkpoint, EmbeddingModel, Error, KnowledgeGraph, Triple};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CfkgrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    NotFound = 3,
    Io = 4,
    Parse = 5,
    UnknownSymbol = 6,
    OutOfRange = 7,
    Checkpoint = 8,
    InvalidInput = 9,
    Panic = 10,
}

/// A triple of entity and relation ids.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CfkgrTriple {
    pub head: u32,
    pub relation: u32,
    pub tail: u32,
}

impl From<CfkgrTriple> for Triple {
    fn from(t: CfkgrTriple) -> Self {
        Triple::new(t.head, t.relation, t.tail)
    }
}

/// A loaded knowledge graph.
pub struct CfkgrKg(KnowledgeGraph);

/// A trained embedding model.
pub struct CfkgrModel(EmbeddingModel);

/// Per-relation classification thresholds.
pub struct CfkgrThresholds(ThresholdSet);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

struct Failure(CfkgrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => CfkgrStatus::NotFound,
            Error::Io { .. } => CfkgrStatus::Io,
            Error::Parse { .. } | Error::Json(_) => CfkgrStatus::Parse,
            Error::UnknownEntity(_) | Error::UnknownRelation(_) => CfkgrStatus::UnknownSymbol,
            Error::OutOfRange { .. } => CfkgrStatus::OutOfRange,
            Error::Checkpoint(_) => CfkgrStatus::Checkpoint,
            _ => CfkgrStatus::InvalidInput,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CfkgrStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording its error and converting panics.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CfkgrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CfkgrStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CfkgrStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(CfkgrStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_out<'a, T>(p: *mut T, n: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

/// Error message of the last call on this thread; empty when that call
/// succeeded. The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn cfkgr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cfkgr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads `train.txt`, `valid.txt`, `test.txt` and optional side files from
/// `dir`.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cfkgr_kg_load(dir: *const c_char, out: *mut *mut CfkgrKg) -> CfkgrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let dir = Path::new(str_arg(dir, "dir")?);
        if !dir.is_dir() {
            return Err(Failure(CfkgrStatus::NotFound, format!("{}: no such directory", dir.display())));
        }
        let kg = load_kg(&KgPaths::from_dir(dir))?;
        *out = Box::into_raw(Box::new(CfkgrKg(kg)));
        Ok(())
    })
}

/// # Safety
/// `kg` must come from [`cfkgr_kg_load`] and not be used afterwards. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn cfkgr_kg_free(kg: *mut CfkgrKg) {
    if !kg.is_null() {
        drop(Box::from_raw(kg));
    }
}

/// # Safety
/// `kg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cfkgr_kg_num_entities(kg: *const CfkgrKg, out: *mut usize) -> CfkgrStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(kg, "kg")?.0.num_entities();
        Ok(())
    })
}

/// # Safety
/// `kg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cfkgr_kg_num_relations(kg: *const CfkgrKg, out: *mut usize) -> CfkgrStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(kg, "kg")?.0.num_relations();
        Ok(())
    })
}

/// Looks up the id of an entity label.
///
/// # Safety
/// `kg` must be a live handle, `label` NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cfkgr_kg_entity_id(kg: *const CfkgrKg, label: *const c_char, out: *mut u32) -> CfkgrStatus {
    guard(|| {
        let kg = &ref_arg(kg, "kg")?.0;
        let label = str_arg(label, "label")?;
        *out_arg(out, "out")? = kg
            .entities()
            .id(label)
            .ok_or_else(|| Error::UnknownEntity(label.to_owned()))?;
        Ok(())
    })
}

/// Looks up the id of a relation label.
///
/// # Safety
/// `kg` must be a live handle, `label` NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cfkgr_kg_relation_id(kg: *const CfkgrKg, label: *const c_char, out: *mut u32) -> CfkgrStatus {
    guard(|| {
        let kg = &ref_arg(kg, "kg")?.0;
        let label = str_arg(label, "label")?;
        *out_arg(out, "out")? = kg
            .relations()
            .id(label)
            .ok_or_else(|| Error::UnknownRelation(label.to_owned()))?;
        Ok(())
    })
}

/// Writes 1 to `out` if the triple is a fact of any split, else 0.
///
/// # Safety
/// `kg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cfkgr_kg_is_fact(kg: *const CfkgrKg, triple: CfkgrTriple, out: *mut u8) -> CfkgrStatus {
    guard(|| {
        let kg = &ref_arg(kg, "kg")?.0;
        let t = Triple::from(triple);
        kg.check(t)?;
        *out_arg(out, "out")? = kg.is_fact(t) as u8;
        Ok(())
    })
}

/// Loads a checkpoint written by `cfkgr train`.
///
/// # Safety
/// `path` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cfkgr_model_load(path: *const c_char, out: *mut *mut CfkgrModel) -> CfkgrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let m = checkpoint::load(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(CfkgrModel(m)));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`cfkgr_model_load`] and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn cfkgr_model_free(model: *mut CfkgrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Scores `n` triples in evaluation mode into `scores`.
///
/// # Safety
/// `model` must be a live handle; `triples` and `scores` must hold `n`
/// elements each.
#[no_mangle]
pub unsafe extern "C" fn cfkgr_model_score(
    model: *const CfkgrModel,
    triples: *const CfkgrTriple,
    n: usize,
    scores: *mut f64,
) -> CfkgrStatus {
    guard(|| {
        let m = &ref_arg(model, "model")?.0;
        let triples = slice_arg(triples, n, "triples")?;
        let scores = slice_out(scores, n, "scores")?;
        for (&t, s) in triples.iter().zip(scores.iter_mut()) {
            *s = m.score(t.into(), cfkgr::models::Mode::Eval)?;
        }
        Ok(())
    })
}

/// Loads a thresholds JSON file; relation labels resolve against `kg`.
///
/// # Safety
/// `path` must be NUL-terminated, `kg` a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cfkgr_thresholds_load(
    path: *const c_char,
    kg: *const CfkgrKg,
    out: *mut *mut CfkgrThresholds,
) -> CfkgrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let kg = &ref_arg(kg, "kg")?.0;
        let th = ThresholdSet::read(Path::new(str_arg(path, "path")?), kg.relations())?;
        *out = Box::into_raw(Box::new(CfkgrThresholds(th)));
        Ok(())
    })
}

/// # Safety
/// `th` must come from [`cfkgr_thresholds_load`] and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn cfkgr_thresholds_free(th: *mut CfkgrThresholds) {
    if !th.is_null() {
        drop(Box::from_raw(th));
    }
}

/// Threshold applied to `relation`; infinities are returned as such.
///
/// # Safety
/// `th` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cfkgr_thresholds_lookup(th: *const CfkgrThresholds, relation: u32, out: *mut f64) -> CfkgrStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(th, "thresholds")?.0.lookup(relation);
        Ok(())
    })
}

/// Writes 1 for each triple whose score reaches its relation's threshold,
/// else 0.
///
/// # Safety
/// `model` and `th` must be live handles; `triples` and `labels` must hold
/// `n` elements each.
#[no_mangle]
pub unsafe extern "C" fn cfkgr_classify(
    model: *const CfkgrModel,
    th: *const CfkgrThresholds,
    triples: *const CfkgrTriple,
    n: usize,
    labels: *mut u8,
) -> CfkgrStatus {
    guard(|| {
        let m = &ref_arg(model, "model")?.0;
        let th = &ref_arg(th, "thresholds")?.0;
        let triples: Vec<Triple> = slice_arg(triples, n, "triples")?.iter().map(|&t| t.into()).collect();
        let out = slice_out(labels, n, "labels")?;
        out.copy_from_slice(&cfkgr::calibration::classify(m, th, &triples)?);
        Ok(())
    })
}
