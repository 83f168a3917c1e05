//! Design-level estimands.
//!
//! For an outcome model and a design, the average direct effect is
//!
//! ```text
//! ADE = (1/n) Σ_i E[ Y_i(w_i = 1; W_−i) − Y_i(w_i = 0; W_−i) ]
//! ```
//!
//! and the average indirect effect is
//!
//! ```text
//! AIE = (1/n) Σ_i Σ_{j ≠ i} E[ Y_j(w_i = 1; W_−i) − Y_j(w_i = 0; W_−i) ]
//! ```
//!
//! where the inner sum only needs the units `j` with `i ∈ dep(j)`. The
//! overall effect is their sum, and under a Bernoulli(π) design it equals
//! the infinitesimal policy effect `INF = 1ᵀ∇_π E_π[(1/n) Σ Y_i]`.
//!
//! Three evaluation routes are offered: exact enumeration of the design
//! support, a binomial fast path for anonymous models under constant-π
//! Bernoulli designs, and Monte Carlo.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Discrete};

use crate::design::{BernoulliDesign, Design, DesignSupport};
use crate::error::{Error, Result};
use crate::model::{dependents, regular_degree, OutcomeModel};
use crate::rng;
use crate::summation::{mean_and_sd, CompensatedSum};
use crate::treatment::{ProbabilityVector, TreatmentVector};

/// Default central-difference step for INF.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

const CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// exact → binomial → mc, first one that applies
    #[default]
    Auto,
    Exact,
    #[serde(alias = "anonymous_binomial")]
    Binomial,
    #[serde(rename = "mc", alias = "monte_carlo")]
    MonteCarlo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Auto => "auto",
            Method::Exact => "exact",
            Method::Binomial => "anonymous_binomial",
            Method::MonteCarlo => "monte_carlo",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "auto" => Ok(Method::Auto),
            "exact" => Ok(Method::Exact),
            "binomial" | "anonymous_binomial" => Ok(Method::Binomial),
            "mc" | "monte_carlo" => Ok(Method::MonteCarlo),
            other => Err(format!("unknown method `{other}` (auto|exact|mc|binomial)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimandReport {
    pub ade: f64,
    pub aie: f64,
    /// Always `ade + aie`.
    pub aoe: f64,
    /// `None` where INF is undefined (non-Bernoulli designs) or the
    /// finite-difference step would leave (0, 1).
    pub inf: Option<f64>,
    pub method: Method,
    /// Monte Carlo draws; 0 for the exact routes.
    pub replications: usize,
    pub se_ade: f64,
    pub se_aie: f64,
    pub se_inf: f64,
}

impl EstimandReport {
    fn exact(ade: f64, aie: f64, inf: Option<f64>, method: Method) -> Self {
        Self {
            ade,
            aie,
            aoe: ade + aie,
            inf,
            method,
            replications: 0,
            se_ade: 0.0,
            se_aie: 0.0,
            se_inf: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimandOptions {
    pub replications: usize,
    pub seed: u64,
    pub fd_step: f64,
}

impl Default for EstimandOptions {
    fn default() -> Self {
        Self {
            replications: 10_000,
            seed: 0,
            fd_step: DEFAULT_FD_STEP,
        }
    }
}

fn check_dims<M: OutcomeModel + ?Sized>(model: &M, n: usize) -> Result<()> {
    if model.n() != n {
        return Err(Error::DimensionMismatch {
            expected: model.n(),
            actual: n,
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Per-assignment contrasts

/// Sums of the direct and indirect unit contrasts at one assignment:
/// `Σ_i [Y_i(w_i=1) − Y_i(w_i=0)]` and `Σ_i Σ_{j: i∈dep(j)} [Y_j(w_i=1) − Y_j(w_i=0)]`.
fn contrast_sums<M: OutcomeModel + ?Sized>(
    model: &M,
    dependents: &[Vec<usize>],
    w: &TreatmentVector,
    scratch: &mut TreatmentVector,
) -> (f64, f64) {
    scratch.clone_from(w);
    let mut direct = CompensatedSum::new();
    let mut indirect = CompensatedSum::new();
    for (i, touched) in dependents.iter().enumerate() {
        let original = w.get(i);
        scratch.set(i, true);
        let own1 = model.outcome(i, scratch);
        let others1: CompensatedSum = touched.iter().map(|&j| model.outcome(j, scratch)).collect();
        scratch.set(i, false);
        let own0 = model.outcome(i, scratch);
        let others0: CompensatedSum = touched.iter().map(|&j| model.outcome(j, scratch)).collect();
        scratch.set(i, original);
        direct.add(own1 - own0);
        indirect.add(others1.value() - others0.value());
    }
    (direct.value(), indirect.value())
}

fn mean_outcome<M: OutcomeModel + ?Sized>(model: &M, w: &TreatmentVector) -> f64 {
    let s: CompensatedSum = (0..model.n()).map(|i| model.outcome(i, w)).collect();
    s.value() / model.n() as f64
}

/// `Σ_w p(w)·f(w)` for each of `K` functionals, over the design support.
/// Chunks are fixed-size and merged in order, so the result does not depend
/// on the rayon pool size.
fn expect_over<const K: usize, F>(support: &DesignSupport, f: F) -> [f64; K]
where
    F: Fn(&TreatmentVector, &mut TreatmentVector) -> [f64; K] + Sync,
{
    let n = support.entries.first().map_or(0, |e| e.0.len());
    let partials: Vec<[CompensatedSum; K]> = support
        .entries
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut scratch = TreatmentVector::zeros(n);
            let mut acc = [CompensatedSum::new(); K];
            for (w, p) in chunk {
                let vals = f(w, &mut scratch);
                for k in 0..K {
                    acc[k].add(p * vals[k]);
                }
            }
            acc
        })
        .collect();
    let mut total = [CompensatedSum::new(); K];
    for part in &partials {
        for k in 0..K {
            total[k].merge(&part[k]);
        }
    }
    total.map(|t| t.value())
}

// ---------------------------------------------------------------------------
// Exact enumeration

/// `(ADE, AIE)` by enumeration of the design support.
pub fn estimands_exact<M: OutcomeModel + ?Sized>(model: &M, design: &Design) -> Result<(f64, f64)> {
    check_dims(model, design.n())?;
    let support = design.enumerate_support()?;
    let deps = dependents(model);
    let n = model.n() as f64;
    let [direct, indirect] = expect_over(&support, |w, scratch| {
        let (d, i) = contrast_sums(model, &deps, w, scratch);
        [d, i]
    });
    Ok((direct / n, indirect / n))
}

pub fn ade_exact<M: OutcomeModel + ?Sized>(model: &M, design: &Design) -> Result<f64> {
    estimands_exact(model, design).map(|(ade, _)| ade)
}

pub fn aie_exact<M: OutcomeModel + ?Sized>(model: &M, design: &Design) -> Result<f64> {
    estimands_exact(model, design).map(|(_, aie)| aie)
}

/// `V(π) = E_π[(1/n) Σ_i Y_i]` under Bernoulli(π), by enumeration.
pub fn expected_mean_outcome_exact<M: OutcomeModel + ?Sized>(
    model: &M,
    pi: &ProbabilityVector,
) -> Result<f64> {
    check_dims(model, pi.len())?;
    let design = Design::Bernoulli(BernoulliDesign::new(pi.clone()));
    let support = design.enumerate_support()?;
    let [v] = expect_over(&support, |w, _| [mean_outcome(model, w)]);
    Ok(v)
}

// ---------------------------------------------------------------------------
// Binomial fast path

fn binomial_pmf(d: usize, p: f64) -> Vec<f64> {
    let dist = Binomial::new(p, d as u64).expect("p validated in (0, 1)");
    (0..=d as u64).map(|b| dist.pmf(b)).collect()
}

struct AnonymousSetup {
    d: usize,
    pmf_d: Vec<f64>,
    pmf_d1: Vec<f64>,
}

fn anonymous_setup<M: OutcomeModel + ?Sized>(model: &M, pi0: f64) -> Result<AnonymousSetup> {
    if !model.is_anonymous() {
        return Err(Error::Infeasible(
            "binomial path needs an anonymous-interference model".into(),
        ));
    }
    let d = regular_degree(model).ok_or_else(|| {
        Error::Infeasible("binomial path needs every unit to share one degree".into())
    })?;
    if !(pi0 > 0.0 && pi0 < 1.0) {
        return Err(Error::ProbabilityOutOfRange { index: 0, value: pi0 });
    }
    Ok(AnonymousSetup {
        d,
        pmf_d: binomial_pmf(d, pi0),
        pmf_d1: if d > 0 { binomial_pmf(d - 1, pi0) } else { Vec::new() },
    })
}

/// Per-unit response table `[f_i(0, b), f_i(1, b)]` for `b = 0..=d`.
fn response_table<M: OutcomeModel + ?Sized>(model: &M, unit: usize, d: usize) -> Vec<[f64; 2]> {
    (0..=d)
        .map(|b| {
            [
                model.anonymous_response(unit, false, b),
                model.anonymous_response(unit, true, b),
            ]
        })
        .collect()
}

/// Binomial-path quantities at constant `π0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnonymousValues {
    pub ade: f64,
    pub aie: f64,
    /// `V(π0)`
    pub mean_outcome: f64,
    /// `dV/dπ` at `π0`, from differentiating the binomial weights.
    pub derivative: f64,
}

/// Exact estimands for an anonymous model with common degree `d` under
/// Bernoulli(π0), using `f_i(x, b)` with `b ~ Binomial(d, π0)`.
pub fn anonymous_binomial_values<M: OutcomeModel + ?Sized>(model: &M, pi0: f64) -> Result<AnonymousValues> {
    let setup = anonymous_setup(model, pi0)?;
    let d = setup.d;
    let n = model.n();
    let per_unit: Vec<[f64; 4]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let f = response_table(model, i, d);
            let mut direct = CompensatedSum::new();
            let mut level = CompensatedSum::new();
            let mut slope = CompensatedSum::new();
            for b in 0..=d {
                let [f0, f1] = f[b];
                let mix = pi0 * f1 + (1.0 - pi0) * f0;
                direct.add(setup.pmf_d[b] * (f1 - f0));
                level.add(setup.pmf_d[b] * mix);
                // d/dπ of the Binomial(d, π) pmf is d·(pmf_{d−1}(b−1) − pmf_{d−1}(b))
                let lower = if b > 0 { setup.pmf_d1[b - 1] } else { 0.0 };
                let upper = if b < d { setup.pmf_d1[b] } else { 0.0 };
                slope.add(d as f64 * (lower - upper) * mix);
                slope.add(setup.pmf_d[b] * (f1 - f0));
            }
            let mut spill = CompensatedSum::new();
            for b in 0..d {
                let [f0, f1] = f[b];
                let [g0, g1] = f[b + 1];
                spill.add(setup.pmf_d1[b] * (pi0 * (g1 - f1) + (1.0 - pi0) * (g0 - f0)));
            }
            [direct.value(), d as f64 * spill.value(), level.value(), slope.value()]
        })
        .collect();
    let mut sums = [CompensatedSum::new(); 4];
    for row in &per_unit {
        for k in 0..4 {
            sums[k].add(row[k]);
        }
    }
    let nf = n as f64;
    Ok(AnonymousValues {
        ade: sums[0].value() / nf,
        aie: sums[1].value() / nf,
        mean_outcome: sums[2].value() / nf,
        derivative: sums[3].value() / nf,
    })
}

pub fn estimands_anonymous_binomial<M: OutcomeModel + ?Sized>(model: &M, pi0: f64) -> Result<EstimandReport> {
    let v = anonymous_binomial_values(model, pi0)?;
    Ok(EstimandReport::exact(v.ade, v.aie, Some(v.derivative), Method::Binomial))
}

fn binomial_applicable<M: OutcomeModel + ?Sized>(model: &M, design: &Design) -> Option<f64> {
    let pi0 = design.as_bernoulli()?.pi().constant_value()?;
    (model.is_anonymous() && regular_degree(model).is_some()).then_some(pi0)
}

// ---------------------------------------------------------------------------
// Monte Carlo

/// Per-replication draw: `(direct, indirect, inf)` contrasts.
fn mc_draw<M: OutcomeModel + ?Sized>(
    model: &M,
    deps: &[Vec<usize>],
    design: &Design,
    fd_step: f64,
    rng: &mut rng::StreamRng,
) -> (f64, f64, Option<f64>) {
    let n = model.n();
    let mut scratch = TreatmentVector::zeros(n);
    match design {
        Design::Bernoulli(b) => {
            let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let pi = b.pi().as_slice();
            let threshold = |delta: f64| {
                let bits: Vec<bool> = u.iter().zip(pi).map(|(&x, &p)| x < p + delta).collect();
                TreatmentVector::from_bools(&bits)
            };
            let w = threshold(0.0);
            let (d, i) = contrast_sums(model, deps, &w, &mut scratch);
            let inf = (fd_step > 0.0).then(|| {
                let up = mean_outcome(model, &threshold(fd_step));
                let down = mean_outcome(model, &threshold(-fd_step));
                (up - down) / (2.0 * fd_step)
            });
            (d / n as f64, i / n as f64, inf)
        }
        Design::TwoStage(_) => {
            let w = design.sample_assignment(rng);
            let (d, i) = contrast_sums(model, deps, &w, &mut scratch);
            (d / n as f64, i / n as f64, None)
        }
    }
}

fn fd_step_valid(design: &Design, h: f64) -> bool {
    h > 0.0
        && design
        .as_bernoulli()
        .is_some_and(|b| b.pi().shifted(h).is_ok() && b.pi().shifted(-h).is_ok())
}

/// Monte Carlo estimands. Replication `r` uses stream `r` of `seed`. For
/// Bernoulli designs each draw's uniforms are reused at `π ± h` to estimate
/// INF with common random numbers.
pub fn estimands_monte_carlo<M: OutcomeModel + ?Sized>(
    model: &M,
    design: &Design,
    replications: usize,
    seed: u64,
    fd_step: f64,
) -> Result<EstimandReport> {
    check_dims(model, design.n())?;
    if replications < 2 {
        return Err(Error::Infeasible(format!(
            "Monte Carlo needs at least 2 replications, got {replications}"
        )));
    }
    let deps = dependents(model);
    let h = if fd_step_valid(design, fd_step) { fd_step } else { 0.0 };
    let draws: Vec<(f64, f64, Option<f64>)> = (0..replications)
        .into_par_iter()
        .map(|r| mc_draw(model, &deps, design, h, &mut rng::stream(seed, r as u64)))
        .collect();
    let direct: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let indirect: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let inf: Option<Vec<f64>> = draws.iter().map(|d| d.2).collect();
    let root = (replications as f64).sqrt();
    let (ade, sd_ade) = mean_and_sd(&direct);
    let (aie, sd_aie) = mean_and_sd(&indirect);
    let (inf, se_inf) = match inf {
        Some(v) => {
            let (m, sd) = mean_and_sd(&v);
            (Some(m), sd / root)
        }
        None => (None, 0.0),
    };
    Ok(EstimandReport {
        ade,
        aie,
        aoe: ade + aie,
        inf,
        method: Method::MonteCarlo,
        replications,
        se_ade: sd_ade / root,
        se_aie: sd_aie / root,
        se_inf,
    })
}

// ---------------------------------------------------------------------------
// Infinitesimal policy effect

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FdMode {
    Exact,
    MonteCarlo { replications: usize, seed: u64 },
}

/// Central difference `[V(π + h·1) − V(π − h·1)] / 2h`.
///
/// In Monte Carlo mode both sides threshold the same uniforms, so the
/// difference only sees units whose uniform falls inside `[π − h, π + h)`.
pub fn inf_finite_difference<M: OutcomeModel + ?Sized>(
    model: &M,
    pi: &ProbabilityVector,
    h: f64,
    mode: FdMode,
) -> Result<f64> {
    check_dims(model, pi.len())?;
    if !(h > 0.0) {
        return Err(Error::Infeasible(format!("finite-difference step must be positive, got {h}")));
    }
    let up = pi.shifted(h)?;
    let down = pi.shifted(-h)?;
    match mode {
        FdMode::Exact => {
            let v_up = expected_mean_outcome_exact(model, &up)?;
            let v_down = expected_mean_outcome_exact(model, &down)?;
            Ok((v_up - v_down) / (2.0 * h))
        }
        FdMode::MonteCarlo { replications, seed } => {
            if replications < 1 {
                return Err(Error::Infeasible("Monte Carlo needs at least one replication".into()));
            }
            let n = model.n();
            let diffs: Vec<f64> = (0..replications)
                .into_par_iter()
                .map(|r| {
                    let mut rng = rng::stream(seed, r as u64);
                    let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                    let at = |p: &ProbabilityVector| {
                        let bits: Vec<bool> = u.iter().zip(p.as_slice()).map(|(&x, &q)| x < q).collect();
                        mean_outcome(model, &TreatmentVector::from_bools(&bits))
                    };
                    at(&up) - at(&down)
                })
                .collect();
            let (mean, _) = mean_and_sd(&diffs);
            Ok(mean / (2.0 * h))
        }
    }
}

/// INF from the derivative identity `∂V/∂π_k = E_π[Σ_i (Y_i(w_k=1) − Y_i(w_k=0))]/n`,
/// summed over `k`. Own-unit and cross-unit terms are accumulated separately,
/// so the result is exactly `ADE + AIE` as computed by the same route.
pub fn inf_analytic<M: OutcomeModel + ?Sized>(model: &M, design: &Design) -> Result<f64> {
    let bernoulli = design
        .as_bernoulli()
        .ok_or(Error::NonBernoulliDesign("the infinitesimal policy effect"))?;
    if design.is_enumerable() {
        let (own, cross) = estimands_exact(model, design)?;
        return Ok(own + cross);
    }
    match bernoulli.pi().constant_value() {
        Some(pi0) => {
            let v = anonymous_binomial_values(model, pi0)?;
            Ok(v.ade + v.aie)
        }
        None => Err(Error::Infeasible(
            "analytic INF needs an enumerable design or a constant-π anonymous model".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// Contrast estimands

/// `(1/n) Σ_i { E[Y_i | W_i = 1] − E[Y_i | W_i = 0] }`, exact.
pub fn hh_de<M: OutcomeModel + ?Sized>(model: &M, design: &Design) -> Result<f64> {
    check_dims(model, design.n())?;
    let n = model.n();
    for i in 0..n {
        let p = design.marginal_treatment_probability(i)?;
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::DegenerateProbability { index: i, probability: p });
        }
    }
    let support = design.enumerate_support()?;
    // per unit: Σ p·y over W_i = 1, Σ p·y over W_i = 0, Σ p over W_i = 1
    let partials: Vec<Vec<[CompensatedSum; 3]>> = support
        .entries
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![[CompensatedSum::new(); 3]; n];
            for (w, p) in chunk {
                for (i, slot) in acc.iter_mut().enumerate() {
                    let y = model.outcome(i, w);
                    if w.get(i) {
                        slot[0].add(p * y);
                        slot[2].add(*p);
                    } else {
                        slot[1].add(p * y);
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = vec![[CompensatedSum::new(); 3]; n];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            for k in 0..3 {
                t[k].merge(&p[k]);
            }
        }
    }
    let contrast: CompensatedSum = total
        .iter()
        .map(|t| {
            let p1 = t[2].value();
            t[0].value() / p1 - t[1].value() / (1.0 - p1)
        })
        .collect();
    Ok(contrast.value() / n as f64)
}

/// `(1/n) Σ_i E_π[Y_i(w_i = 0; W_−i)]`.
fn untreated_mean<M: OutcomeModel + ?Sized>(model: &M, pi: &ProbabilityVector) -> Result<f64> {
    let design = Design::Bernoulli(BernoulliDesign::new(pi.clone()));
    let n = model.n();
    if design.is_enumerable() {
        let support = design.enumerate_support()?;
        let [v] = expect_over(&support, |w, scratch| {
            scratch.clone_from(w);
            let mut s = CompensatedSum::new();
            for i in 0..n {
                let orig = w.get(i);
                scratch.set(i, false);
                s.add(model.outcome(i, scratch));
                scratch.set(i, orig);
            }
            [s.value() / n as f64]
        });
        return Ok(v);
    }
    let pi0 = pi.constant_value().ok_or_else(|| {
        Error::Infeasible("indirect contrast needs enumeration or a constant π".into())
    })?;
    let setup = anonymous_setup(model, pi0)?;
    let s: CompensatedSum = (0..n)
        .map(|i| {
            (0..=setup.d)
                .map(|b| setup.pmf_d[b] * model.anonymous_response(i, false, b))
                .collect::<CompensatedSum>()
                .value()
        })
        .collect();
    Ok(s.value() / n as f64)
}

/// `(1/n) Σ_i [E_{π′}{Y_i(w_i=0; W_−i)} − E_π{Y_i(w_i=0; W_−i)}]`.
pub fn ie_two_bernoulli<M: OutcomeModel + ?Sized>(
    model: &M,
    pi: &ProbabilityVector,
    pi_prime: &ProbabilityVector,
) -> Result<f64> {
    check_dims(model, pi.len())?;
    check_dims(model, pi_prime.len())?;
    if pi == pi_prime {
        return Ok(0.0);
    }
    Ok(untreated_mean(model, pi_prime)? - untreated_mean(model, pi)?)
}

// ---------------------------------------------------------------------------

/// Resolves `method` and computes the full report.
pub fn compute_estimands<M: OutcomeModel + ?Sized>(
    model: &M,
    design: &Design,
    method: Method,
    options: &EstimandOptions,
) -> Result<EstimandReport> {
    check_dims(model, design.n())?;
    let resolved = match method {
        Method::Auto if design.is_enumerable() => Method::Exact,
        Method::Auto if binomial_applicable(model, design).is_some() => Method::Binomial,
        Method::Auto => Method::MonteCarlo,
        other => other,
    };
    match resolved {
        Method::Exact => {
            if !design.is_enumerable() {
                return Err(Error::Infeasible(format!(
                    "exact enumeration of {} assignments is beyond the limit",
                    design.support_size()
                )));
            }
            let (ade, aie) = estimands_exact(model, design)?;
            let inf = match design {
                Design::Bernoulli(b) if fd_step_valid(design, options.fd_step) => Some(
                    inf_finite_difference(model, b.pi(), options.fd_step, FdMode::Exact)?,
                ),
                _ => None,
            };
            Ok(EstimandReport::exact(ade, aie, inf, Method::Exact))
        }
        Method::Binomial => {
            let pi0 = design
                .as_bernoulli()
                .and_then(|b| b.pi().constant_value())
                .ok_or_else(|| {
                    Error::Infeasible("binomial path needs a constant-π Bernoulli design".into())
                })?;
            estimands_anonymous_binomial(model, pi0)
        }
        Method::MonteCarlo => {
            estimands_monte_carlo(model, design, options.replications, options.seed, options.fd_step)
        }
        Method::Auto => unreachable!("auto is resolved above"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::TwoStageClusteredDesign;
    use crate::graph::InterferenceGraph;
    use crate::model::CustomModel;
    use crate::zoo::*;

    fn bern(n: usize, p: f64) -> Design {
        BernoulliDesign::constant(n, p).unwrap().into()
    }

    fn identity_model(n: usize) -> CustomModel {
        CustomModel::new(vec![vec![]; n], true, |i, w| f64::from(u8::from(w.get(i)))).unwrap()
    }

    #[test]
    fn identity_outcome_has_unit_direct_effect() {
        let m = identity_model(4);
        for d in [bern(4, 0.3), TwoStageClusteredDesign::new(4, 2, 0.5).unwrap().into()] {
            let (ade, aie) = estimands_exact(&m, &d).unwrap();
            assert!((ade - 1.0).abs() < 1e-12);
            assert_eq!(aie, 0.0);
        }
    }

    #[test]
    fn saturated_pair() {
        let model = make_saturated_linear(SaturatedLinearSpec {
            alpha: vec![0.0; 2],
            beta: vec![0.0; 2],
            nu: vec![vec![0.0, 0.5], vec![0.5, 0.0]],
        })
        .unwrap();
        assert!((aie_exact(&model, &bern(2, 0.3)).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn saturated_direct_mean() {
        let model = make_saturated_linear(SaturatedLinearSpec {
            alpha: vec![0.0; 3],
            beta: vec![1.0, 2.0, 3.0],
            nu: vec![vec![0.0; 3]; 3],
        })
        .unwrap();
        let d = bern(3, 0.6);
        assert!((ade_exact(&model, &d).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(aie_exact(&model, &d).unwrap(), 0.0);
    }

    #[test]
    fn diverging_small() {
        let model = make_diverging_anonymous(DivergingAnonymousSpec { pi0: 0.5 }, 4).unwrap();
        let (ade, aie) = estimands_exact(&model, &bern(4, 0.5)).unwrap();
        assert!((ade - 1.0).abs() < 1e-12);
        assert!((aie - 3.0).abs() < 1e-12);
        assert!((inf_analytic(&model, &bern(4, 0.5)).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn linear_in_means_under_two_stage() {
        let g = InterferenceGraph::new(vec![vec![1], vec![0], vec![3], vec![2]]).unwrap();
        let model = make_linear_in_means(LinearInMeansSpec {
            graph: g,
            beta1: 1.0,
            beta2: 0.7,
            beta3: 0.3,
        })
        .unwrap();
        let d: Design = TwoStageClusteredDesign::new(4, 2, 0.5).unwrap().into();
        let (ade, aie) = estimands_exact(&model, &d).unwrap();
        assert!((ade - 0.7).abs() < 1e-15);
        assert!((aie - 0.3).abs() < 1e-15);
    }

    #[test]
    fn inf_analytic_is_ade_plus_aie_bitwise() {
        let g = InterferenceGraph::circulant(7, 2).unwrap();
        let model = make_fig1_setting(Fig1SettingSpec { setting: 2, graph: g }).unwrap();
        let pi = ProbabilityVector::new(vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]).unwrap();
        let d: Design = BernoulliDesign::new(pi).into();
        let (ade, aie) = estimands_exact(&model, &d).unwrap();
        assert_eq!(inf_analytic(&model, &d).unwrap(), ade + aie);
        let two: Design = TwoStageClusteredDesign::new(6, 2, 1.0 / 3.0).unwrap().into();
        assert!(matches!(inf_analytic(&identity_model(6), &two), Err(Error::NonBernoulliDesign(_))));
    }

    #[test]
    fn constant_model_has_zero_inf() {
        let model = CustomModel::new(vec![vec![1], vec![0], vec![]], false, |_, _| 2.5).unwrap();
        let pi = ProbabilityVector::constant(3, 0.4).unwrap();
        assert_eq!(inf_finite_difference(&model, &pi, 1e-4, FdMode::Exact).unwrap(), 0.0);
        assert_eq!(hh_de(&model, &bern(3, 0.4)).unwrap(), 0.0);
    }

    #[test]
    fn finite_difference_step_must_stay_inside() {
        let model = identity_model(2);
        let pi = ProbabilityVector::new(vec![0.5, 0.99995]).unwrap();
        assert!(inf_finite_difference(&model, &pi, 1e-4, FdMode::Exact).is_err());
        assert!(inf_finite_difference(&model, &pi, 0.0, FdMode::Exact).is_err());
    }

    #[test]
    fn saturated_affine_value_function() {
        let model = make_saturated_linear(SaturatedLinearSpec {
            alpha: vec![0.3, -0.2, 0.0, 1.0],
            beta: vec![1.0, 0.5, -0.25, 2.0],
            nu: vec![
                vec![0.0, 0.2, 0.0, 0.1],
                vec![0.4, 0.0, -0.3, 0.0],
                vec![0.0, 0.0, 0.0, 0.7],
                vec![0.05, 0.05, 0.05, 0.0],
            ],
        })
        .unwrap();
        let cf = model.closed_form().unwrap();
        let pi = ProbabilityVector::new(vec![0.2, 0.4, 0.6, 0.8]).unwrap();
        for h in [1e-4, 1e-2, 0.1] {
            let inf = inf_finite_difference(&model, &pi, h, FdMode::Exact).unwrap();
            assert!((inf - (cf.ade + cf.aie)).abs() < 1e-10, "h = {h}");
        }
    }

    #[test]
    fn monte_carlo_constant_contrast_has_zero_se() {
        let model = make_saturated_linear(SaturatedLinearSpec {
            alpha: vec![0.0; 3],
            beta: vec![1.0, 2.0, 3.0],
            nu: vec![vec![0.0, 0.5, 0.0], vec![0.0; 3], vec![0.25, 0.0, 0.0]],
        })
        .unwrap();
        let r = estimands_monte_carlo(&model, &bern(3, 0.5), 2, 1, 1e-4).unwrap();
        assert_eq!(r.se_ade, 0.0);
        assert_eq!(r.se_aie, 0.0);
        assert!((r.ade - 2.0).abs() < 1e-15);
        assert!((r.aie - 0.25).abs() < 1e-15);
        assert!(estimands_monte_carlo(&model, &bern(3, 0.5), 1, 1, 1e-4).is_err());
    }

    #[test]
    fn monte_carlo_is_reproducible_across_pool_sizes() {
        let g = InterferenceGraph::circulant(30, 3).unwrap();
        let model = make_fig1_setting(Fig1SettingSpec { setting: 3, graph: g }).unwrap();
        let d = bern(30, 0.4);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimands_monte_carlo(&model, &d, 500, 17, 1e-4).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn binomial_requires_anonymous_regular_model() {
        let sat = make_saturated_linear(SaturatedLinearSpec {
            alpha: vec![0.0; 2],
            beta: vec![0.0; 2],
            nu: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        })
        .unwrap();
        assert!(matches!(estimands_anonymous_binomial(&sat, 0.5), Err(Error::Infeasible(_))));
        let g = InterferenceGraph::new(vec![vec![1], vec![0, 2], vec![1]]).unwrap();
        let irregular = make_fig1_setting(Fig1SettingSpec { setting: 2, graph: g }).unwrap();
        assert!(matches!(estimands_anonymous_binomial(&irregular, 0.5), Err(Error::Infeasible(_))));
    }

    #[test]
    fn binomial_setting2_five_term_sum() {
        // treated-vs-untreated contrast is (1 − B/4)²/2, B ~ Binomial(4, 1/2)
        let g = InterferenceGraph::circulant(6, 2).unwrap();
        let model = make_fig1_setting(Fig1SettingSpec { setting: 2, graph: g }).unwrap();
        let weights = [1.0, 4.0, 6.0, 4.0, 1.0];
        let expected: f64 = (0..5)
            .map(|b| weights[b] / 16.0 * (1.0 - b as f64 / 4.0).powi(2) / 2.0)
            .sum();
        let r = estimands_anonymous_binomial(&model, 0.5).unwrap();
        assert!((r.ade - expected).abs() < 1e-14);
        let (ade, aie) = estimands_exact(&model, &bern(6, 0.5)).unwrap();
        assert!((r.ade - ade).abs() < 1e-12);
        assert!((r.aie - aie).abs() < 1e-12);
    }

    #[test]
    fn hh_de_rejects_degenerate_design() {
        let d: Design = TwoStageClusteredDesign::new(4, 2, 0.0).unwrap().into();
        assert!(matches!(
            hh_de(&identity_model(4), &d),
            Err(Error::DegenerateProbability { .. })
        ));
    }

    #[test]
    fn ie_contrast_basics() {
        let pi = ProbabilityVector::constant(4, 0.3).unwrap();
        let pi2 = ProbabilityVector::constant(4, 0.6).unwrap();
        let model = identity_model(4);
        assert_eq!(ie_two_bernoulli(&model, &pi, &pi).unwrap(), 0.0);
        assert_eq!(ie_two_bernoulli(&model, &pi, &pi2).unwrap(), 0.0);
    }

    #[test]
    fn method_resolution() {
        let g = InterferenceGraph::circulant(30, 2).unwrap();
        let model = make_fig1_setting(Fig1SettingSpec { setting: 1, graph: g }).unwrap();
        let opts = EstimandOptions::default();
        let r = compute_estimands(&model, &bern(30, 0.5), Method::Auto, &opts).unwrap();
        assert_eq!(r.method, Method::Binomial);
        assert!(matches!(
            compute_estimands(&model, &bern(30, 0.5), Method::Exact, &opts),
            Err(Error::Infeasible(_))
        ));
        let small = identity_model(3);
        let r = compute_estimands(&small, &bern(3, 0.5), Method::Auto, &opts).unwrap();
        assert_eq!(r.method, Method::Exact);
        assert_eq!(r.aoe, r.ade + r.aie);
    }
}
