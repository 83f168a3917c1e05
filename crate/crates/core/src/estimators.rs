//! Horvitz–Thompson estimators of the direct and indirect effects from one
//! Bernoulli experiment, and harnesses checking their unbiasedness.

use rayon::prelude::*;
use serde::Serialize;

use crate::design::Design;
use crate::error::{Error, Result};
use crate::estimands::{compute_estimands, EstimandOptions, Method};
use crate::graph::InterferenceGraph;
use crate::model::{check_locality, evaluate_outcomes, NoiseSpec, OutcomeModel};
use crate::rng;
use crate::summation::{mean_and_sd, CompensatedSum};
use crate::treatment::{ProbabilityVector, TreatmentVector};

/// One realized experiment as seen by the analyst.
#[derive(Debug, Clone)]
pub struct ExperimentRealization {
    pub w: TreatmentVector,
    pub y: Vec<f64>,
    pub pi: ProbabilityVector,
    /// `neighbors(j)` are the units whose treatment the analyst allows to
    /// affect `Y_j`.
    pub graph: InterferenceGraph,
}

impl ExperimentRealization {
    pub fn new(w: TreatmentVector, y: Vec<f64>, pi: ProbabilityVector, graph: InterferenceGraph) -> Result<Self> {
        let n = w.len();
        for len in [y.len(), pi.len(), graph.n()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, actual: len });
            }
        }
        Ok(Self { w, y, pi, graph })
    }
}

/// Signed inverse-probability weight of unit `i`'s treatment.
#[inline]
fn weight(w: &TreatmentVector, pi: &ProbabilityVector, i: usize) -> f64 {
    let p = pi.get(i);
    if w.get(i) {
        1.0 / p
    } else {
        -1.0 / (1.0 - p)
    }
}

fn direct_estimate(w: &TreatmentVector, y: &[f64], pi: &ProbabilityVector) -> f64 {
    let s: CompensatedSum = (0..w.len()).map(|i| weight(w, pi, i) * y[i]).collect();
    s.value() / w.len() as f64
}

fn indirect_estimate(w: &TreatmentVector, y: &[f64], pi: &ProbabilityVector, graph: &InterferenceGraph) -> f64 {
    let s: CompensatedSum = (0..w.len())
        .flat_map(|j| graph.neighbors(j).iter().map(move |&i| weight(w, pi, i) * y[j]))
        .collect();
    s.value() / w.len() as f64
}

/// `(1/n) Σ_i { W_i Y_i/π_i − (1 − W_i) Y_i/(1 − π_i) }`
pub fn ht_ade(real: &ExperimentRealization) -> f64 {
    direct_estimate(&real.w, &real.y, &real.pi)
}

/// `(1/n) Σ_i Σ_{j ≠ i : i → j} { W_i Y_j/π_i − (1 − W_i) Y_j/(1 − π_i) }`,
/// pairing the treatment of `i` with the outcome of every `j` that lists
/// `i` as a neighbor.
pub fn ht_aie(real: &ExperimentRealization) -> f64 {
    indirect_estimate(&real.w, &real.y, &real.pi, &real.graph)
}

/// Whether `graph` contains every declared dependency of `model`.
pub fn graph_covers_dependencies<M: OutcomeModel + ?Sized>(model: &M, graph: &InterferenceGraph) -> bool {
    graph.n() == model.n()
        && (0..model.n()).all(|j| model.dependencies(j).iter().all(|&i| graph.contains(j, i)))
}

/// `E[τ̂_ADE]` and `E[τ̂_AIE]` by total expectation over the design support,
/// with noiseless outcomes.
pub fn ht_expectation_exact<M: OutcomeModel + ?Sized>(
    model: &M,
    design: &Design,
    graph: &InterferenceGraph,
) -> Result<(f64, f64)> {
    let pi = design
        .as_bernoulli()
        .ok_or(Error::NonBernoulliDesign("Horvitz–Thompson expectation"))?
        .pi()
        .clone();
    if model.n() != graph.n() || model.n() != design.n() {
        return Err(Error::DimensionMismatch { expected: model.n(), actual: graph.n() });
    }
    let support = design.enumerate_support()?;
    let mut ade = CompensatedSum::new();
    let mut aie = CompensatedSum::new();
    for (w, p) in &support.entries {
        let y: Vec<f64> = (0..model.n()).map(|i| model.outcome(i, w)).collect();
        ade.add(p * direct_estimate(w, &y, &pi));
        aie.add(p * indirect_estimate(w, &y, &pi, graph));
    }
    Ok((ade.value(), aie.value()))
}

pub mod warning {
    /// The analyst graph misses a declared dependency, or a locality probe
    /// found an undeclared one.
    pub const GRAPH_NOT_SUPERSET: &str = "analyst_graph_not_superset";
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationReport {
    pub replication_count: usize,
    pub seed: u64,
    pub target_ade: f64,
    pub mean_ade: f64,
    pub sd_ade: f64,
    pub se_ade: f64,
    pub target_aie: f64,
    pub mean_aie: f64,
    pub sd_aie: f64,
    pub se_aie: f64,
    pub design: String,
    pub model: String,
    pub warning_flags: String,
}

impl ReplicationReport {
    pub fn warnings(&self) -> impl Iterator<Item = &str> {
        self.warning_flags.split(';').filter(|s| !s.is_empty())
    }
}

/// Targets: attached closed form, else exact or binomial estimands.
fn targets<M: OutcomeModel + ?Sized>(model: &M, design: &Design, seed: u64) -> Result<(f64, f64)> {
    if let Some(cf) = model.closed_form() {
        return Ok((cf.ade, cf.aie));
    }
    let opts = EstimandOptions {
        replications: 100_000,
        seed,
        fd_step: 0.0,
    };
    let r = compute_estimands(model, design, Method::Auto, &opts)?;
    Ok((r.ade, r.aie))
}

/// Runs `replications` independent experiments: draw `W`, observe noisy
/// outcomes, compute both estimators. Replication `r` uses stream `r` of
/// `seed`, so the report does not depend on thread count.
pub fn replicate_unbiasedness<M: OutcomeModel + ?Sized>(
    model: &M,
    noise: NoiseSpec,
    design: &Design,
    graph: &InterferenceGraph,
    replications: usize,
    seed: u64,
) -> Result<ReplicationReport> {
    let bernoulli = design
        .as_bernoulli()
        .ok_or(Error::NonBernoulliDesign("the Horvitz–Thompson unbiasedness harness"))?;
    if replications < 2 {
        return Err(Error::Infeasible(format!(
            "replication harness needs at least 2 replications, got {replications}"
        )));
    }
    let n = model.n();
    for len in [design.n(), graph.n()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, actual: len });
        }
    }

    let mut flags = Vec::new();
    let covered = graph_covers_dependencies(model, graph) && {
        // undeclared dependencies outside the analyst graph
        let mut rng = rng::stream(seed, u64::MAX);
        check_locality(&GraphRestricted { model, graph }, 1000, &mut rng).passed()
    };
    if !covered {
        flags.push(warning::GRAPH_NOT_SUPERSET);
    }

    let (target_ade, target_aie) = targets(model, design, seed)?;
    let pi = bernoulli.pi();
    let draws: Vec<Result<(f64, f64)>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, r as u64);
            let w = design.sample_assignment(&mut rng);
            let y = evaluate_outcomes(model, &w, noise, &mut rng)?;
            Ok((direct_estimate(&w, &y, pi), indirect_estimate(&w, &y, pi, graph)))
        })
        .collect();
    let draws = draws.into_iter().collect::<Result<Vec<_>>>()?;
    let ade: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let aie: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let (mean_ade, sd_ade) = mean_and_sd(&ade);
    let (mean_aie, sd_aie) = mean_and_sd(&aie);
    let root = (replications as f64).sqrt();
    Ok(ReplicationReport {
        replication_count: replications,
        seed,
        target_ade,
        mean_ade,
        sd_ade,
        se_ade: sd_ade / root,
        target_aie,
        mean_aie,
        sd_aie,
        se_aie: sd_aie / root,
        design: design.describe(),
        model: model.name(),
        warning_flags: flags.join(";"),
    })
}

/// View of a model whose declared dependencies are replaced by the analyst
/// graph, so locality probes test the analyst's claim.
struct GraphRestricted<'a, M: ?Sized> {
    model: &'a M,
    graph: &'a InterferenceGraph,
}

impl<M: OutcomeModel + ?Sized> OutcomeModel for GraphRestricted<'_, M> {
    fn n(&self) -> usize {
        self.model.n()
    }
    fn outcome(&self, unit: usize, w: &TreatmentVector) -> f64 {
        self.model.outcome(unit, w)
    }
    fn dependencies(&self, unit: usize) -> &[usize] {
        self.graph.neighbors(unit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{BernoulliDesign, TwoStageClusteredDesign};
    use crate::model::CustomModel;
    use crate::zoo::NoInterference;

    fn tv(bits: &[u8]) -> TreatmentVector {
        TreatmentVector::from_bits(bits).unwrap()
    }

    fn real(w: &[u8], y: &[f64], pi: &[f64], graph: InterferenceGraph) -> ExperimentRealization {
        ExperimentRealization::new(tv(w), y.to_vec(), ProbabilityVector::new(pi.to_vec()).unwrap(), graph)
            .unwrap()
    }

    #[test]
    fn ht_ade_by_substitution() {
        let r = real(&[1, 0], &[1.0, 0.0], &[0.5, 0.5], InterferenceGraph::empty(2));
        assert_eq!(ht_ade(&r), 1.0);
        let r = real(&[1], &[3.0], &[0.75], InterferenceGraph::empty(1));
        assert_eq!(ht_ade(&r), 4.0);
        let r = real(&[1, 0, 1], &[0.0; 3], &[0.2, 0.5, 0.9], InterferenceGraph::empty(3));
        assert_eq!(ht_ade(&r), 0.0);
    }

    #[test]
    fn ht_aie_by_substitution() {
        let r = real(&[1, 0], &[5.0, -1.0], &[0.3, 0.6], InterferenceGraph::empty(2));
        assert_eq!(ht_aie(&r), 0.0);
        let r = real(&[1, 0], &[2.0, 4.0], &[0.5, 0.5], InterferenceGraph::complete(2));
        assert_eq!(ht_aie(&r), 2.0);
        let r = real(&[1, 0], &[1.0, 1.0], &[0.5, 0.5], InterferenceGraph::complete(2));
        assert_eq!(ht_aie(&r), 0.0);
    }

    #[test]
    fn ht_aie_uses_influence_direction() {
        // unit 1 influences unit 0 only
        let g = InterferenceGraph::new(vec![vec![1], vec![]]).unwrap();
        let r = real(&[0, 1], &[3.0, 100.0], &[0.5, 0.25], g);
        assert_eq!(ht_aie(&r), 3.0 / 0.25 / 2.0);
    }

    #[test]
    fn realization_checks_dimensions() {
        let pi = ProbabilityVector::constant(2, 0.5).unwrap();
        assert!(ExperimentRealization::new(tv(&[1, 0]), vec![1.0], pi, InterferenceGraph::empty(2)).is_err());
    }

    #[test]
    fn harness_refuses_two_stage() {
        let model = NoInterference::constant(4, 0.0, 1.0);
        let d: Design = TwoStageClusteredDesign::new(4, 2, 0.5).unwrap().into();
        let err = replicate_unbiasedness(&model, NoiseSpec::None, &d, &InterferenceGraph::empty(4), 10, 1);
        assert!(matches!(err, Err(Error::NonBernoulliDesign(_))));
    }

    #[test]
    fn harness_flags_missing_edges() {
        let model = CustomModel::new(vec![vec![1], vec![0]], false, |i, w| {
            f64::from(u8::from(w.get(1 - i)))
        })
        .unwrap();
        let d: Design = BernoulliDesign::constant(2, 0.5).unwrap().into();
        let report =
            replicate_unbiasedness(&model, NoiseSpec::None, &d, &InterferenceGraph::empty(2), 100, 3).unwrap();
        assert_eq!(report.warnings().collect::<Vec<_>>(), vec![warning::GRAPH_NOT_SUPERSET]);
        let ok = replicate_unbiasedness(&model, NoiseSpec::None, &d, &InterferenceGraph::complete(2), 100, 3)
            .unwrap();
        assert_eq!(ok.warnings().count(), 0);
    }

    #[test]
    fn harness_is_deterministic() {
        let model = NoInterference::constant(6, 1.0, 2.0);
        let d: Design = BernoulliDesign::constant(6, 0.3).unwrap().into();
        let noise = NoiseSpec::gaussian(1.0).unwrap();
        let g = InterferenceGraph::complete(6);
        let a = replicate_unbiasedness(&model, noise, &d, &g, 200, 9).unwrap();
        let b = replicate_unbiasedness(&model, noise, &d, &g, 200, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.target_ade, 2.0);
        assert_eq!(a.target_aie, 0.0);
    }
}
