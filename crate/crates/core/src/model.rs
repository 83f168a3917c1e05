//! Potential-outcome models.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::treatment::TreatmentVector;

/// Design-free closed-form estimands carried by models that have them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForm {
    pub ade: f64,
    pub aie: f64,
}

/// A deterministic map `(unit, w) → Y_i(w)` together with the units whose
/// treatment can reach each unit.
///
/// `dependencies(i)` must never contain `i` itself. Two assignments that
/// agree on `{i} ∪ dependencies(i)` must give unit `i` the same outcome.
pub trait OutcomeModel: Send + Sync {
    fn n(&self) -> usize;

    fn outcome(&self, unit: usize, w: &TreatmentVector) -> f64;

    fn dependencies(&self, unit: usize) -> &[usize];

    /// True when `outcome(i, w)` depends on `w` only through `w_i` and the
    /// number of treated units in `dependencies(i)`.
    fn is_anonymous(&self) -> bool {
        false
    }

    /// `f_i(own, treated)` for anonymous models: the outcome of `unit` when
    /// its own treatment is `own` and `treated` of its dependencies are
    /// treated. The default builds such an assignment and evaluates it.
    fn anonymous_response(&self, unit: usize, own: bool, treated: usize) -> f64 {
        let mut w = TreatmentVector::zeros(self.n());
        w.set(unit, own);
        for &j in self.dependencies(unit).iter().take(treated) {
            w.set(j, true);
        }
        self.outcome(unit, &w)
    }

    fn closed_form(&self) -> Option<ClosedForm> {
        None
    }

    fn name(&self) -> String {
        "custom".to_string()
    }
}

impl<M: OutcomeModel + ?Sized> OutcomeModel for Box<M> {
    fn n(&self) -> usize {
        (**self).n()
    }
    fn outcome(&self, unit: usize, w: &TreatmentVector) -> f64 {
        (**self).outcome(unit, w)
    }
    fn dependencies(&self, unit: usize) -> &[usize] {
        (**self).dependencies(unit)
    }
    fn is_anonymous(&self) -> bool {
        (**self).is_anonymous()
    }
    fn anonymous_response(&self, unit: usize, own: bool, treated: usize) -> f64 {
        (**self).anonymous_response(unit, own, treated)
    }
    fn closed_form(&self) -> Option<ClosedForm> {
        (**self).closed_form()
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

/// For each unit `i`, the units `j` with `i ∈ dependencies(j)`: the only
/// outcomes that treating `i` can move.
pub fn dependents<M: OutcomeModel + ?Sized>(model: &M) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); model.n()];
    for j in 0..model.n() {
        for &i in model.dependencies(j) {
            out[i].push(j);
        }
    }
    out
}

/// The common dependency-set size, if all units share one.
pub fn regular_degree<M: OutcomeModel + ?Sized>(model: &M) -> Option<usize> {
    let d = model.dependencies(0).len();
    (1..model.n())
        .all(|i| model.dependencies(i).len() == d)
        .then_some(d)
}

type OutcomeFn = dyn Fn(usize, &TreatmentVector) -> f64 + Send + Sync;

/// A model defined by a closure and explicit dependency sets.
pub struct CustomModel {
    dependencies: Vec<Vec<usize>>,
    anonymous: bool,
    outcome: Box<OutcomeFn>,
}

impl CustomModel {
    pub fn new(
        dependencies: Vec<Vec<usize>>,
        anonymous: bool,
        outcome: impl Fn(usize, &TreatmentVector) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let n = dependencies.len();
        for (i, deps) in dependencies.iter().enumerate() {
            if deps.iter().any(|&j| j >= n || j == i) {
                return Err(Error::InvalidModel(format!(
                    "dependency set of unit {} must hold other units in range",
                    i + 1
                )));
            }
        }
        Ok(Self {
            dependencies,
            anonymous,
            outcome: Box::new(outcome),
        })
    }
}

impl OutcomeModel for CustomModel {
    fn n(&self) -> usize {
        self.dependencies.len()
    }
    fn outcome(&self, unit: usize, w: &TreatmentVector) -> f64 {
        (self.outcome)(unit, w)
    }
    fn dependencies(&self, unit: usize) -> &[usize] {
        &self.dependencies[unit]
    }
    fn is_anonymous(&self) -> bool {
        self.anonymous
    }
}

/// Additive noise on observed outcomes. Independent of `W`, mean zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum NoiseSpec {
    #[default]
    None,
    Gaussian { sigma: f64 },
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "noise sigma must be finite and non-negative, got {sigma}"
            )));
        }
        Ok(NoiseSpec::Gaussian { sigma })
    }
}

/// Observed outcomes `Y_i(w) + ε_i`.
pub fn evaluate_outcomes<M, R>(
    model: &M,
    w: &TreatmentVector,
    noise: NoiseSpec,
    rng: &mut R,
) -> Result<Vec<f64>>
where
    M: OutcomeModel + ?Sized,
    R: Rng + ?Sized,
{
    if model.n() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: model.n(),
            actual: w.len(),
        });
    }
    let mut y: Vec<f64> = (0..model.n()).map(|i| model.outcome(i, w)).collect();
    if let NoiseSpec::Gaussian { sigma } = noise {
        if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma)
                .map_err(|e| Error::InvalidModel(format!("noise: {e}")))?;
            for v in &mut y {
                *v += normal.sample(rng);
            }
        }
    }
    Ok(y)
}

#[derive(Debug, Clone, PartialEq)]
pub enum LocalityViolation {
    /// Flipping `other`, which is outside `{unit} ∪ dep(unit)`, moved `unit`.
    Dependency {
        unit: usize,
        other: usize,
        w: TreatmentVector,
    },
    /// Permuting treatments within `dep(unit)` moved `unit` on a model
    /// flagged anonymous.
    Anonymity {
        unit: usize,
        w: TreatmentVector,
        permuted: TreatmentVector,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalityReport {
    pub probes: usize,
    pub violation: Option<LocalityViolation>,
}

impl LocalityReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

fn same(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Random probes of the dependency-set contract (and of permutation
/// invariance for anonymous models). Stops at the first violation.
pub fn check_locality<M, R>(model: &M, probes: usize, rng: &mut R) -> LocalityReport
where
    M: OutcomeModel + ?Sized,
    R: Rng + ?Sized,
{
    let n = model.n();
    let mut report = LocalityReport {
        probes: 0,
        violation: None,
    };
    if n == 0 {
        return report;
    }
    for _ in 0..probes.max(1) {
        report.probes += 1;
        let bits: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        let w = TreatmentVector::from_bools(&bits);
        let unit = rng.random_range(0..n);
        let deps = model.dependencies(unit);

        let outside: Vec<usize> = (0..n)
            .filter(|&j| j != unit && !deps.contains(&j))
            .collect();
        if let Some(&other) = outside.get(rng.random_range(0..outside.len().max(1))) {
            let mut w0 = w.clone();
            w0.set(other, false);
            let mut w1 = w.clone();
            w1.set(other, true);
            if !same(model.outcome(unit, &w0), model.outcome(unit, &w1)) {
                report.violation = Some(LocalityViolation::Dependency { unit, other, w });
                return report;
            }
        }

        if model.is_anonymous() && deps.len() > 1 {
            let mut values: Vec<bool> = deps.iter().map(|&j| w.get(j)).collect();
            values.shuffle(rng);
            let mut permuted = w.clone();
            for (&j, &v) in deps.iter().zip(&values) {
                permuted.set(j, v);
            }
            if !same(model.outcome(unit, &w), model.outcome(unit, &permuted)) {
                report.violation = Some(LocalityViolation::Anonymity { unit, w, permuted });
                return report;
            }
        }
    }
    report
}
