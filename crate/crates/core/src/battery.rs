//! Randomized battery checking `ADE + AIE = INF` on small enumerable
//! instances with heterogeneous treatment probabilities.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::design::{BernoulliDesign, Design};
use crate::error::{Error, Result};
use crate::estimands::{estimands_exact, expected_mean_outcome_exact, inf_finite_difference, FdMode};
use crate::graph::InterferenceGraph;
use crate::model::{CustomModel, OutcomeModel};
use crate::rng;
use crate::treatment::ProbabilityVector;
use crate::zoo::{self, AnonymousTable, Fig1SettingSpec, SaturatedLinearSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    SaturatedLinear,
    AnonymousTable,
    HerdImmunity,
    NonAnonymous,
}

impl InstanceKind {
    pub const ALL: [InstanceKind; 4] = [
        InstanceKind::SaturatedLinear,
        InstanceKind::AnonymousTable,
        InstanceKind::HerdImmunity,
        InstanceKind::NonAnonymous,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InstanceKind::SaturatedLinear => "saturated_linear",
            InstanceKind::AnonymousTable => "anonymous_table",
            InstanceKind::HerdImmunity => "herd_immunity",
            InstanceKind::NonAnonymous => "non_anonymous",
        }
    }
}

/// How the battery computes the INF side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfRoute {
    /// Central difference along the all-ones direction.
    AllOnes,
    /// Central difference along the first coordinate only. A deliberately
    /// wrong route that the battery must reject.
    FirstCoordinate,
}

#[derive(Debug, Clone)]
pub struct BatteryOptions {
    pub instances: usize,
    pub min_n: usize,
    pub max_n: usize,
    pub edge_probability: f64,
    pub fd_step: f64,
    pub tolerance: f64,
    pub seed: u64,
    /// Instance kinds, cycled in order.
    pub kinds: Vec<InstanceKind>,
    pub route: InfRoute,
}

impl Default for BatteryOptions {
    fn default() -> Self {
        Self {
            instances: 24,
            min_n: 4,
            max_n: 10,
            edge_probability: 0.35,
            fd_step: 1e-4,
            tolerance: 1e-6,
            seed: 0,
            kinds: InstanceKind::ALL.to_vec(),
            route: InfRoute::AllOnes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceResult {
    pub index: usize,
    pub kind: InstanceKind,
    pub n: usize,
    pub edges: usize,
    pub ade: f64,
    pub aie: f64,
    pub aoe: f64,
    pub inf: f64,
    pub residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatteryReport {
    pub tolerance: f64,
    pub instances: Vec<InstanceResult>,
}

impl BatteryReport {
    pub fn max_residual(&self) -> f64 {
        self.instances.iter().map(|r| r.residual).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        !self.instances.is_empty() && self.instances.iter().all(|r| r.passed)
    }
}

/// A random graph in which every unit has at least its ring predecessor as
/// a neighbor.
fn random_connected_graph<R: Rng>(n: usize, p: f64, rng: &mut R) -> InterferenceGraph {
    let base = InterferenceGraph::random(n, p, rng);
    let neighbors = (0..n)
        .map(|i| {
            let mut v = base.neighbors(i).to_vec();
            v.push((i + n - 1) % n);
            v
        })
        .collect();
    InterferenceGraph::new(neighbors).expect("ring plus random edges is a valid graph")
}

/// Builds instance `index` of the battery. Instances depend only on
/// `(seed, index)`.
pub fn battery_instance(
    kind: InstanceKind,
    options: &BatteryOptions,
    index: usize,
) -> Result<(Box<dyn OutcomeModel>, ProbabilityVector)> {
    let mut rng = rng::stream(options.seed, index as u64);
    let n = rng.random_range(options.min_n..=options.max_n);
    let graph = random_connected_graph(n, options.edge_probability, &mut rng);
    let pi = ProbabilityVector::new((0..n).map(|_| rng.random_range(0.15..0.85)).collect())?;
    let model: Box<dyn OutcomeModel> = match kind {
        InstanceKind::SaturatedLinear => {
            let mut nu = vec![vec![0.0; n]; n];
            for (i, row) in nu.iter_mut().enumerate() {
                for &j in graph.neighbors(i) {
                    row[j] = rng.random_range(-1.0..1.0);
                }
            }
            Box::new(zoo::make_saturated_linear(SaturatedLinearSpec {
                alpha: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
                beta: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
                nu,
            })?)
        }
        InstanceKind::AnonymousTable => {
            let table = (0..n)
                .map(|i| {
                    let d = graph.degree(i);
                    let c: [f64; 6] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
                    (0..=d)
                        .map(|b| {
                            let e = b as f64 / d as f64;
                            let f0 = c[0] + c[1] * e + c[2] * (3.0 * e).sin();
                            let f1 = f0 + c[3] + c[4] * e * e + c[5] * (2.0 * e).exp() / 4.0;
                            [f0, f1]
                        })
                        .collect()
                })
                .collect();
            Box::new(AnonymousTable::new(graph, table)?)
        }
        InstanceKind::HerdImmunity => Box::new(zoo::make_fig1_setting(Fig1SettingSpec { setting: 2, graph })?),
        InstanceKind::NonAnonymous => {
            let deps: Vec<Vec<usize>> = (0..n).map(|i| graph.neighbors(i).to_vec()).collect();
            let weights: Vec<Vec<f64>> = deps
                .iter()
                .map(|d| d.iter().map(|_| rng.random_range(-1.5..1.5)).collect())
                .collect();
            let own: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let deps_closure = deps.clone();
            Box::new(CustomModel::new(deps, false, move |i, w| {
                let d = &deps_closure[i];
                let lin: f64 = d.iter().zip(&weights[i]).filter(|(&j, _)| w.get(j)).map(|(_, c)| c).sum();
                let first_pair = d.len() >= 2 && w.get(d[0]) && w.get(d[1]);
                let own_term = if w.get(i) { own[i] } else { 0.0 };
                let pair = if first_pair { 0.5 * (1.0 + own_term) } else { 0.0 };
                (lin + own_term).tanh() + pair
            })?)
        }
    };
    Ok((model, pi))
}

fn run_instance(index: usize, kind: InstanceKind, options: &BatteryOptions) -> Result<InstanceResult> {
    let (model, pi) = battery_instance(kind, options, index)?;
    let design: Design = BernoulliDesign::new(pi.clone()).into();
    let (ade, aie) = estimands_exact(&model, &design)?;
    let h = options.fd_step;
    let inf = match options.route {
        InfRoute::AllOnes => inf_finite_difference(&model, &pi, h, FdMode::Exact)?,
        InfRoute::FirstCoordinate => {
            let mut up = pi.as_slice().to_vec();
            let mut down = up.clone();
            up[0] += h;
            down[0] -= h;
            let v_up = expected_mean_outcome_exact(&model, &ProbabilityVector::new(up)?)?;
            let v_down = expected_mean_outcome_exact(&model, &ProbabilityVector::new(down)?)?;
            (v_up - v_down) / (2.0 * h)
        }
    };
    let aoe = ade + aie;
    let residual = (aoe - inf).abs();
    Ok(InstanceResult {
        index,
        kind,
        n: model.n(),
        edges: (0..model.n()).map(|i| model.dependencies(i).len()).sum(),
        ade,
        aie,
        aoe,
        inf,
        residual,
        passed: residual <= options.tolerance,
    })
}

/// Runs the battery. Instances run in parallel; results come back in index
/// order.
pub fn run_battery(options: &BatteryOptions) -> Result<BatteryReport> {
    if options.kinds.is_empty() {
        return Err(Error::Infeasible("battery needs at least one instance kind".into()));
    }
    if options.min_n < 2 || options.max_n < options.min_n || options.max_n > 12 {
        return Err(Error::Infeasible(format!(
            "battery sizes must satisfy 2 ≤ min_n ≤ max_n ≤ 12, got {}..={}",
            options.min_n, options.max_n
        )));
    }
    let instances = (0..options.instances)
        .into_par_iter()
        .map(|k| run_instance(k, options.kinds[k % options.kinds.len()], options))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(BatteryReport {
        tolerance: options.tolerance,
        instances,
    })
}
