//! C ABI over the `interference` crate.
//!
//! Models and designs are opaque handles created by `itf_*_new_*` functions
//! and released with the matching `*_free`. Every fallible call returns an
//! [`ItfStatus`]; on failure, [`itf_last_error`] describes what went wrong
//! on the calling thread. Unit indices are 0-based throughout this API.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use interference::estimands::{compute_estimands, EstimandOptions, Method};
use interference::estimators::{ht_ade, ht_aie};
use interference::zoo;
use interference::{
    BernoulliDesign, Design, Error, ExperimentRealization, InterferenceGraph, OutcomeModel, ProbabilityVector,
    TreatmentVector, TwoStageClusteredDesign,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ItfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The requested method cannot handle this model and design.
    Infeasible = 3,
    /// A Rust panic was caught at the boundary.
    Internal = 4,
}

/// Values accepted by the `method` argument of [`itf_estimands`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ItfMethod {
    Auto = 0,
    Exact = 1,
    Binomial = 2,
    MonteCarlo = 3,
}

/// Opaque outcome model.
pub struct ItfModel(Box<dyn OutcomeModel>);

/// Opaque treatment design.
pub struct ItfDesign(Design);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ItfEstimands {
    pub ade: f64,
    pub aie: f64,
    pub aoe: f64,
    /// Meaningful only when `has_inf` is true.
    pub inf: f64,
    pub has_inf: bool,
    pub se_ade: f64,
    pub se_aie: f64,
    pub se_inf: f64,
    pub replications: u64,
    /// The method actually used, as an `ItfMethod` value.
    pub method: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> ItfStatus {
    match err {
        Error::Infeasible(_) | Error::SupportTooLarge { .. } | Error::NonBernoulliDesign(_) => ItfStatus::Infeasible,
        _ => ItfStatus::InvalidArgument,
    }
}

/// Runs `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (ItfStatus, String)>) -> ItfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            ItfStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            ItfStatus::Internal
        }
    }
}

fn lib_err(e: Error) -> (ItfStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (ItfStatus, String) {
    (ItfStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: impl Into<String>) -> (ItfStatus, String) {
    (ItfStatus::InvalidArgument, message.into())
}

/// # Safety
/// `ptr` must be null or point to `len` readable values.
unsafe fn input<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], (ItfStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `out` must be null or valid for a write.
unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), (ItfStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the most recent failure on this thread, or an empty string.
/// The pointer stays valid until the next call into this library from the
/// same thread.
#[no_mangle]
pub extern "C" fn itf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn itf_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    VERSION.as_ptr()
}

// ---------------------------------------------------------------------------
// models

/// Linear-in-means model `Y_i = β1 + β2·w_i + β3·(treated share of
/// neighbors)` on a circulant graph with `half_width` neighbors per side.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn itf_model_new_linear_in_means(
    n: usize,
    half_width: usize,
    beta1: f64,
    beta2: f64,
    beta3: f64,
    out: *mut *mut ItfModel,
) -> ItfStatus {
    guard(|| {
        let graph = InterferenceGraph::circulant(n, half_width).map_err(lib_err)?;
        let model = zoo::make_linear_in_means(zoo::LinearInMeansSpec {
            graph,
            beta1,
            beta2,
            beta3,
        })
        .map_err(lib_err)?;
        store(out, ItfModel(Box::new(model)))
    })
}

/// Figure-1 structural setting (1, 2 or 3) on a circulant graph.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn itf_model_new_fig1(
    setting: u8,
    n: usize,
    half_width: usize,
    out: *mut *mut ItfModel,
) -> ItfStatus {
    guard(|| {
        let graph = InterferenceGraph::circulant(n, half_width).map_err(lib_err)?;
        let model = zoo::make_fig1_setting(zoo::Fig1SettingSpec { setting, graph }).map_err(lib_err)?;
        store(out, ItfModel(Box::new(model)))
    })
}

/// `Y_i = (Σ_j w_j − nπ0)/√(nπ0(1−π0))` for every unit.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn itf_model_new_diverging(n: usize, pi0: f64, out: *mut *mut ItfModel) -> ItfStatus {
    guard(|| {
        let model = zoo::make_diverging_anonymous(zoo::DivergingAnonymousSpec { pi0 }, n).map_err(lib_err)?;
        store(out, ItfModel(Box::new(model)))
    })
}

/// Saturated linear model `Y_i = α_i + β_i·w_i + Σ_j ν_ij·w_j`. `nu` is
/// row-major `n × n` with a zero diagonal.
///
/// # Safety
/// `alpha` and `beta` must point to `n` values, `nu` to `n·n` values, and
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn itf_model_new_saturated_linear(
    n: usize,
    alpha: *const f64,
    beta: *const f64,
    nu: *const f64,
    out: *mut *mut ItfModel,
) -> ItfStatus {
    guard(|| {
        let len = n.checked_mul(n).ok_or_else(|| invalid("n·n overflows"))?;
        let alpha = input(alpha, n, "alpha")?.to_vec();
        let beta = input(beta, n, "beta")?.to_vec();
        let nu = input(nu, len, "nu")?.chunks(n.max(1)).map(<[f64]>::to_vec).collect();
        let model = zoo::make_saturated_linear(zoo::SaturatedLinearSpec { alpha, beta, nu }).map_err(lib_err)?;
        store(out, ItfModel(Box::new(model)))
    })
}

/// Number of units, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn itf_model_units(model: *const ItfModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.n())
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn itf_model_free(model: *mut ItfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

// ---------------------------------------------------------------------------
// designs

/// Bernoulli design with per-unit probabilities in (0, 1).
///
/// # Safety
/// `pi` must point to `n` values and `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn itf_design_new_bernoulli(n: usize, pi: *const f64, out: *mut *mut ItfDesign) -> ItfStatus {
    guard(|| {
        let pi = ProbabilityVector::new(input(pi, n, "pi")?.to_vec()).map_err(lib_err)?;
        store(out, ItfDesign(BernoulliDesign::new(pi).into()))
    })
}

/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn itf_design_new_bernoulli_constant(n: usize, pi: f64, out: *mut *mut ItfDesign) -> ItfStatus {
    guard(|| {
        let d = BernoulliDesign::constant(n, pi).map_err(lib_err)?;
        store(out, ItfDesign(d.into()))
    })
}

/// Two-stage design on contiguous clusters of size `m`: `ρ·n/m` clusters
/// are treated, one unit in each.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn itf_design_new_two_stage(
    n: usize,
    m: usize,
    rho: f64,
    out: *mut *mut ItfDesign,
) -> ItfStatus {
    guard(|| {
        let d = TwoStageClusteredDesign::new(n, m, rho).map_err(lib_err)?;
        store(out, ItfDesign(d.into()))
    })
}

/// # Safety
/// `design` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn itf_design_free(design: *mut ItfDesign) {
    if !design.is_null() {
        drop(Box::from_raw(design));
    }
}

// ---------------------------------------------------------------------------
// estimands and estimators

fn method_of(raw: u32) -> Option<Method> {
    Some(match raw {
        0 => Method::Auto,
        1 => Method::Exact,
        2 => Method::Binomial,
        3 => Method::MonteCarlo,
        _ => return None,
    })
}

fn method_code(m: Method) -> u32 {
    match m {
        Method::Auto => ItfMethod::Auto as u32,
        Method::Exact => ItfMethod::Exact as u32,
        Method::Binomial => ItfMethod::Binomial as u32,
        Method::MonteCarlo => ItfMethod::MonteCarlo as u32,
    }
}

/// ADE, AIE, AOE and INF of `model` under `design`. `method` is an
/// `ItfMethod` value; `replications` and `seed` are used by Monte Carlo.
///
/// # Safety
/// `model` and `design` must be live handles and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn itf_estimands(
    model: *const ItfModel,
    design: *const ItfDesign,
    method: u32,
    replications: u64,
    seed: u64,
    out: *mut ItfEstimands,
) -> ItfStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let design = design.as_ref().ok_or_else(|| null("design"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let method = method_of(method).ok_or_else(|| invalid(format!("unknown method code {method}")))?;
        let options = EstimandOptions {
            replications: usize::try_from(replications).map_err(|_| invalid("replications too large"))?,
            seed,
            ..EstimandOptions::default()
        };
        let r = compute_estimands(&model.0, &design.0, method, &options).map_err(lib_err)?;
        *out = ItfEstimands {
            ade: r.ade,
            aie: r.aie,
            aoe: r.aoe,
            inf: r.inf.unwrap_or(f64::NAN),
            has_inf: r.inf.is_some(),
            se_ade: r.se_ade,
            se_aie: r.se_aie,
            se_inf: r.se_inf,
            replications: r.replications as u64,
            method: method_code(r.method),
        };
        Ok(())
    })
}

/// # Safety
/// See [`itf_ht_ade`] and [`itf_ht_aie`].
unsafe fn realization(
    n: usize,
    w: *const u8,
    y: *const f64,
    pi: *const f64,
    graph: InterferenceGraph,
) -> Result<ExperimentRealization, (ItfStatus, String)> {
    let w = TreatmentVector::from_bits(input(w, n, "w")?).map_err(lib_err)?;
    let y = input(y, n, "y")?.to_vec();
    let pi = ProbabilityVector::new(input(pi, n, "pi")?.to_vec()).map_err(lib_err)?;
    ExperimentRealization::new(w, y, pi, graph).map_err(lib_err)
}

/// Horvitz–Thompson direct-effect estimate from one Bernoulli experiment.
/// `w` holds 0/1 bytes.
///
/// # Safety
/// `w`, `y` and `pi` must point to `n` values and `out` must be valid for a
/// write.
#[no_mangle]
pub unsafe extern "C" fn itf_ht_ade(
    n: usize,
    w: *const u8,
    y: *const f64,
    pi: *const f64,
    out: *mut f64,
) -> ItfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let real = realization(n, w, y, pi, InterferenceGraph::empty(n))?;
        *out = ht_ade(&real);
        Ok(())
    })
}

/// Horvitz–Thompson indirect-effect estimate. The analyst graph is given in
/// compressed form: the neighbors of unit `j` (units whose treatment may
/// affect `Y_j`) are `neighbors[offsets[j] .. offsets[j + 1]]`.
///
/// # Safety
/// `w`, `y` and `pi` must point to `n` values, `offsets` to `n + 1`
/// values, `neighbors` to `offsets[n]` values, and `out` must be valid for
/// a write.
#[no_mangle]
pub unsafe extern "C" fn itf_ht_aie(
    n: usize,
    w: *const u8,
    y: *const f64,
    pi: *const f64,
    offsets: *const usize,
    neighbors: *const usize,
    out: *mut f64,
) -> ItfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let offsets = input(offsets, n + 1, "offsets")?;
        if offsets[0] != 0 || offsets.windows(2).any(|p| p[0] > p[1]) {
            return Err(invalid("offsets must start at 0 and be non-decreasing"));
        }
        let flat = input(neighbors, offsets[n], "neighbors")?;
        let lists = offsets.windows(2).map(|p| flat[p[0]..p[1]].to_vec()).collect();
        let graph = InterferenceGraph::new(lists).map_err(lib_err)?;
        let real = realization(n, w, y, pi, graph)?;
        *out = ht_aie(&real);
        Ok(())
    })
}
