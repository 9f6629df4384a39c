//! C ABI over `interference_lab`.
//!
//! Every fallible call returns an [`IlStatus`] and writes its result through
//! an out-pointer. On failure, [`il_last_error_message`] describes the error
//! on the calling thread. Handles are opaque and must be released with the
//! matching `*_free` function; passing NULL to a `*_free` is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use interference_lab::er::{self, ErSpec, TablePolicy, VarianceMethod};
use interference_lab::exact::{exact_moments, ht_variance_for_index, mse_adversary};
use interference_lab::feasibility::{default_witness_family, unbiased_feasibility};
use interference_lab::{
    Assignment, Design, Estimand, Estimator, Graph, InterferenceStructure, LabError, PotentialOutcomeTable,
};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IlStatus {
    Ok = 0,
    InvalidArgument = 1,
    InvalidDesign = 2,
    Capacity = 3,
    Unsupported = 4,
    Incomplete = 5,
    NumericallyAmbiguous = 6,
    Parse = 7,
    Io = 8,
    NullPointer = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IlEstimator {
    DiffMeans = 0,
    /// Needs a k-local table; the neighborhoods come from its graph.
    HorvitzThompson = 1,
    AdditiveUnbiased = 2,
    PrimaryUnbiased = 3,
    /// Always returns the `constant` argument.
    Constant = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IlEstimand {
    Ate = 0,
    PrimaryEffect = 1,
}

/// Opaque assignment design.
pub struct IlDesign(Design);
/// Opaque undirected graph.
pub struct IlGraph(Graph);
/// Opaque potential-outcome table.
pub struct IlTable(PotentialOutcomeTable);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IlMoments {
    pub expectation: f64,
    pub variance: f64,
    pub mse: f64,
    pub estimand: f64,
    pub bias: f64,
    pub support_size: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IlHtVariance {
    pub v_a: f64,
    pub v_b: f64,
    pub cov: f64,
    pub total: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IlFeasibility {
    pub feasible: bool,
    pub residual: f64,
    pub family_size: u64,
    pub unknowns: u64,
    pub rank: u64,
    pub condition: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IlAdversary {
    pub mse: f64,
    pub estimand: f64,
    pub bound: f64,
    pub bound_holds: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IlMcEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub accepted: u64,
    pub rejected: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

enum Failure {
    Lab(LabError),
    Null(&'static str),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        Failure::Lab(e)
    }
}

fn status_of(e: &LabError) -> IlStatus {
    match e {
        LabError::InvalidArgument(_) => IlStatus::InvalidArgument,
        LabError::InvalidDesign(_) => IlStatus::InvalidDesign,
        LabError::Capacity(_) => IlStatus::Capacity,
        LabError::UnsupportedDesign(_) | LabError::UnsupportedEstimand(_) => IlStatus::Unsupported,
        LabError::IncompleteTable(_) | LabError::IncompleteEstimator(_) => IlStatus::Incomplete,
        LabError::NumericallyAmbiguous(_) => IlStatus::NumericallyAmbiguous,
        LabError::Parse(_) => IlStatus::Parse,
        LabError::Io(_) => IlStatus::Io,
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> IlStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => IlStatus::Ok,
        Ok(Err(Failure::Lab(e))) => {
            let status = status_of(&e);
            set_last_error(e.to_string());
            status
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("{what} is NULL"));
            IlStatus::NullPointer
        }
        Err(_) => {
            set_last_error("internal panic".into());
            IlStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or(Failure::Null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    unsafe { out.write(value) };
    Ok(())
}

unsafe fn put_handle<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    unsafe { put(out, Box::into_raw(Box::new(value)), "out") }
}

unsafe fn c_str<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure::Lab(LabError::Parse(format!("{what} is not UTF-8"))))
}

unsafe fn f64s<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(unsafe { slice::from_raw_parts(p, len) })
}

/// Message for the last failure on this thread, or NULL if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn il_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn il_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---- designs ----

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn il_design_crd(n: usize, n_a: usize, out: *mut *mut IlDesign) -> IlStatus {
    guard(|| unsafe { put_handle(out, IlDesign(Design::crd(n, n_a)?)) })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn il_design_bd(n: usize, out: *mut *mut IlDesign) -> IlStatus {
    guard(|| unsafe { put_handle(out, IlDesign(Design::bd(n)?)) })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn il_design_cbd(n: usize, out: *mut *mut IlDesign) -> IlStatus {
    guard(|| unsafe { put_handle(out, IlDesign(Design::cbd(n)?)) })
}

/// # Safety
/// `design` must be NULL or a handle from an `il_design_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn il_design_free(design: *mut IlDesign) {
    if !design.is_null() {
        drop(unsafe { Box::from_raw(design) });
    }
}

/// Probability of the assignment whose bit `i` is set when unit `i` is on B.
///
/// # Safety
/// `design` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn il_design_pmf(design: *const IlDesign, bits: u64, out: *mut f64) -> IlStatus {
    guard(|| unsafe {
        let d = &get(design, "design")?.0;
        let z = Assignment::from_bits(d.n(), bits)?;
        put(out, d.pmf(&z)?, "out")
    })
}

/// Draws one assignment; bit `i` of the result is set when unit `i` is on B.
///
/// # Safety
/// `design` must be a live handle and `out_bits` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn il_design_sample(design: *const IlDesign, seed: u64, out_bits: *mut u64) -> IlStatus {
    guard(|| unsafe {
        let d = &get(design, "design")?.0;
        put(out_bits, d.sample(seed).bits(), "out_bits")
    })
}

// ---- graphs ----

/// Builds a graph from `edge_count` pairs stored flat in `edges`
/// (`edges[2k]`, `edges[2k+1]`).
///
/// # Safety
/// `edges` must point to `2 * edge_count` readable values (or be NULL when
/// `edge_count` is 0) and `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn il_graph_new(n: usize, edges: *const usize, edge_count: usize, out: *mut *mut IlGraph) -> IlStatus {
    guard(|| unsafe {
        let flat: &[usize] = if edge_count == 0 {
            &[]
        } else if edges.is_null() {
            return Err(Failure::Null("edges"));
        } else {
            slice::from_raw_parts(edges, 2 * edge_count)
        };
        let pairs: Vec<(usize, usize)> = flat.chunks_exact(2).map(|c| (c[0], c[1])).collect();
        put_handle(out, IlGraph(Graph::new(n, &pairs)?))
    })
}

/// Parses the text format: the node count on the first line, then one
/// `u v` edge per line.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn il_graph_parse(text: *const c_char, out: *mut *mut IlGraph) -> IlStatus {
    guard(|| unsafe { put_handle(out, IlGraph(Graph::parse(c_str(text, "text")?)?)) })
}

/// # Safety
/// `graph` must be NULL or a handle from `il_graph_new`/`il_graph_parse`.
#[no_mangle]
pub unsafe extern "C" fn il_graph_free(graph: *mut IlGraph) {
    if !graph.is_null() {
        drop(unsafe { Box::from_raw(graph) });
    }
}

/// Size of the closed `k`-step neighborhood of node `i`.
///
/// # Safety
/// `graph` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn il_graph_neighborhood_size(graph: *const IlGraph, k: usize, i: usize, out: *mut usize) -> IlStatus {
    guard(|| unsafe {
        let g = &get(graph, "graph")?.0;
        put(out, g.k_step_neighborhood(i, k)?.len(), "out")
    })
}

// ---- tables ----

/// Table with `Y_i(A) = y_a[i]`, `Y_i(B) = y_b[i]` and no interference.
///
/// # Safety
/// `y_a` and `y_b` must each point to `n` readable values; `out` must be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn il_table_no_interference(y_a: *const f64, y_b: *const f64, n: usize, out: *mut *mut IlTable) -> IlStatus {
    guard(|| unsafe {
        let t = PotentialOutcomeTable::no_interference(f64s(y_a, n, "y_a")?, f64s(y_b, n, "y_b")?)?;
        put_handle(out, IlTable(t))
    })
}

/// Random k-local table, uniform on `(lower, upper)` per unit and effective
/// treatment.
///
/// # Safety
/// `graph` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn il_table_random_k_local(
    graph: *const IlGraph,
    k: usize,
    lower: f64,
    upper: f64,
    seed: u64,
    out: *mut *mut IlTable,
) -> IlStatus {
    guard(|| unsafe {
        let g = get(graph, "graph")?.0.clone();
        let t = PotentialOutcomeTable::generate_random(InterferenceStructure::k_local(g, k), lower, upper, seed)?;
        put_handle(out, IlTable(t))
    })
}

/// Reads an arbitrary-interference table (`assignment,unit,outcome` CSV).
///
/// # Safety
/// `csv` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn il_table_from_csv(csv: *const c_char, out: *mut *mut IlTable) -> IlStatus {
    guard(|| unsafe { put_handle(out, IlTable(PotentialOutcomeTable::from_csv(c_str(csv, "csv")?)?)) })
}

/// Reads a table in the per-unit JSON format.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn il_table_from_json(json: *const c_char, out: *mut *mut IlTable) -> IlStatus {
    guard(|| unsafe { put_handle(out, IlTable(PotentialOutcomeTable::from_json(c_str(json, "json")?)?)) })
}

/// # Safety
/// `table` must be NULL or a handle from an `il_table_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn il_table_free(table: *mut IlTable) {
    if !table.is_null() {
        drop(unsafe { Box::from_raw(table) });
    }
}

/// # Safety
/// `table` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn il_table_n(table: *const IlTable, out: *mut usize) -> IlStatus {
    guard(|| unsafe { put(out, get(table, "table")?.0.n(), "out") })
}

// ---- exact analysis ----

fn estimand_of(e: IlEstimand) -> Estimand {
    match e {
        IlEstimand::Ate => Estimand::Ate,
        IlEstimand::PrimaryEffect => Estimand::PrimaryEffect,
    }
}

fn estimator_of(kind: IlEstimator, constant: f64, estimand: &Estimand, n: usize, table: Option<&PotentialOutcomeTable>) -> Result<Estimator, LabError> {
    Ok(match kind {
        IlEstimator::DiffMeans => Estimator::DiffMeans,
        IlEstimator::HorvitzThompson => {
            let index = table.and_then(|t| t.structure().index()).ok_or_else(|| {
                LabError::InvalidArgument("horvitz-thompson needs a k-local table".into())
            })?;
            Estimator::HorvitzThompson { index: index.clone() }
        }
        IlEstimator::AdditiveUnbiased => Estimator::additive_unbiased_for(estimand, n)?,
        IlEstimator::PrimaryUnbiased => Estimator::PrimaryUnbiased,
        IlEstimator::Constant => Estimator::Constant(constant),
    })
}

/// Exact moments of an estimator by enumerating the design's support.
///
/// # Safety
/// `design` and `table` must be live handles and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn il_exact_moments(
    design: *const IlDesign,
    table: *const IlTable,
    estimator: IlEstimator,
    constant: f64,
    estimand: IlEstimand,
    out: *mut IlMoments,
) -> IlStatus {
    guard(|| unsafe {
        let d = &get(design, "design")?.0;
        let t = &get(table, "table")?.0;
        let estimand = estimand_of(estimand);
        let est = estimator_of(estimator, constant, &estimand, d.n(), Some(t))?;
        let r = exact_moments(&est, d, t, &estimand)?;
        let m = IlMoments {
            expectation: r.expectation,
            variance: r.variance,
            mse: r.mse_vs_estimand,
            estimand: r.estimand,
            bias: r.bias,
            support_size: r.support_size as u64,
        };
        put(out, m, "out")
    })
}

/// Closed-form Horvitz–Thompson variance under Bernoulli assignment.
///
/// # Safety
/// `table` must be a live k-local table handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn il_ht_variance(table: *const IlTable, out: *mut IlHtVariance) -> IlStatus {
    guard(|| unsafe {
        let t = &get(table, "table")?.0;
        let index = t
            .structure()
            .index()
            .ok_or_else(|| LabError::InvalidArgument("closed-form HT variance needs a k-local table".into()))?;
        let v = ht_variance_for_index(index, t)?;
        put(out, IlHtVariance { v_a: v.v_a, v_b: v.v_b, cov: v.cov, total: v.total }, "out")
    })
}

/// Decides whether an unbiased estimator exists over the default witness
/// family built from `grid`.
///
/// # Safety
/// `design` must be a live handle, `grid` must point to `grid_len` values and
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn il_feasibility(
    design: *const IlDesign,
    estimand: IlEstimand,
    grid: *const f64,
    grid_len: usize,
    out: *mut IlFeasibility,
) -> IlStatus {
    guard(|| unsafe {
        let d = &get(design, "design")?.0;
        let estimand = estimand_of(estimand);
        let family = default_witness_family(d.n(), &estimand, f64s(grid, grid_len, "grid")?)?;
        let c = unbiased_feasibility(d, &estimand, &family)?;
        let f = IlFeasibility {
            feasible: c.is_feasible(),
            residual: c.residual,
            family_size: c.family_size as u64,
            unknowns: c.unknowns as u64,
            rank: c.rank as u64,
            condition: c.condition,
        };
        put(out, f, "out")
    })
}

/// Worst-case MSE over tables bounded in `(0, m)`, for the ATE.
///
/// # Safety
/// `design` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn il_mse_adversary(
    design: *const IlDesign,
    estimator: IlEstimator,
    constant: f64,
    m: f64,
    out: *mut IlAdversary,
) -> IlStatus {
    guard(|| unsafe {
        let d = &get(design, "design")?.0;
        let est = estimator_of(estimator, constant, &Estimand::Ate, d.n(), None)?;
        let r = mse_adversary(&est, d, &Estimand::Ate, m)?;
        put(out, IlAdversary { mse: r.mse, estimand: r.estimand, bound: r.bound, bound_holds: r.bound_holds }, "out")
    })
}

// ---- Erdős–Rényi formulas ----

fn er_value(n: u64, p: f64, out: *mut f64, f: impl FnOnce(&ErSpec) -> Result<f64, LabError>) -> IlStatus {
    guard(|| unsafe {
        let spec = ErSpec::new(n, p)?;
        put(out, f(&spec)?, "out")
    })
}

/// `E_G[2^{|N_i|}]`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn il_er_moment_two_pow_nbhd(n: u64, p: f64, out: *mut f64) -> IlStatus {
    er_value(n, p, out, |s| Ok(er::moment_two_pow_nbhd(s)))
}

/// `E_G[2^{|N_i ∩ N_j|}]` for `i ≠ j`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn il_er_moment_two_pow_shared(n: u64, p: f64, out: *mut f64) -> IlStatus {
    er_value(n, p, out, er::moment_two_pow_shared)
}

/// `P_G(N_i ∩ N_j = ∅)` for `i ≠ j`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn il_er_prob_no_common(n: u64, p: f64, out: *mut f64) -> IlStatus {
    er_value(n, p, out, er::prob_no_common)
}

/// Finite-N upper bound `h_N(c, p)` on the expected HT variance.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn il_er_h_bound(c: f64, n: u64, p: f64, out: *mut f64) -> IlStatus {
    er_value(n, p, out, |s| er::h_bound(c, s))
}

/// Exact expected HT variance for a table whose outcomes all equal `c`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn il_er_expected_variance_constant(c: f64, n: u64, p: f64, out: *mut f64) -> IlStatus {
    er_value(n, p, out, |s| er::expected_variance_constant(c, s))
}

/// `E_G[E_i] = 2(1 + p)^{N−1}`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn il_er_expected_effective_treatments(n: u64, p: f64, out: *mut f64) -> IlStatus {
    er_value(n, p, out, |s| Ok(er::expected_effective_treatments(s)))
}

/// `E_G[F_i] = (1/2)(1 − p/2)^{N−1}`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn il_er_expected_informative_fraction(n: u64, p: f64, out: *mut f64) -> IlStatus {
    er_value(n, p, out, |s| Ok(er::expected_informative_fraction(s)))
}

/// Dense-regime lower bound `4 e^{(N−1)/√N} k² / N`.
#[no_mangle]
pub extern "C" fn il_er_dense_lower_bound(n: u64, k: f64) -> f64 {
    er::dense_lower_bound(n, k)
}

/// Monte Carlo estimate of the graph-averaged HT variance with 1-step
/// neighborhoods and outcomes uniform on `(lower, upper)`. Pass
/// `lower == upper` for a constant table.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn il_er_mc_expected_variance(
    n: u64,
    p: f64,
    lower: f64,
    upper: f64,
    reps: usize,
    seed: u64,
    out: *mut IlMcEstimate,
) -> IlStatus {
    guard(|| unsafe {
        let spec = ErSpec::new(n, p)?;
        let policy = if lower == upper { TablePolicy::Constant(lower) } else { TablePolicy::Uniform { lower, upper } };
        let mc = interference_lab::parallel::install(|| {
            er::mc_expected_variance(&spec, 1, policy, VarianceMethod::ClosedForm, reps, seed)
        })?;
        let est = IlMcEstimate { mean: mc.mean, stderr: mc.stderr, accepted: mc.accepted as u64, rejected: mc.rejected as u64 };
        put(out, est, "out")
    })
}
