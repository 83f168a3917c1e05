//! Concrete outcome models: linear-in-means, the saturated linear model,
//! the four-type exposure model, the three Figure-1 structural settings, a
//! diverging anonymous model, tabulated anonymous responses and a
//! no-interference baseline.

use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::InterferenceGraph;
use crate::model::{ClosedForm, OutcomeModel};
use crate::summation::compensated_sum;
use crate::treatment::TreatmentVector;

fn require_neighbors(graph: &InterferenceGraph) -> Result<()> {
    match graph.isolated_unit() {
        Some(i) => Err(Error::InvalidModel(format!(
            "unit {} has no neighbors; the treated-neighbor fraction is undefined",
            i + 1
        ))),
        None => Ok(()),
    }
}

fn bit(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

// ---------------------------------------------------------------------------
// Linear in means

#[derive(Debug, Clone)]
pub struct LinearInMeansSpec {
    pub graph: InterferenceGraph,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
}

/// `Y_i = β1 + β2·w_i + β3·(treated neighbors / neighbors)`.
#[derive(Debug, Clone)]
pub struct LinearInMeans {
    spec: LinearInMeansSpec,
}

pub fn make_linear_in_means(spec: LinearInMeansSpec) -> Result<LinearInMeans> {
    require_neighbors(&spec.graph)?;
    Ok(LinearInMeans { spec })
}

impl LinearInMeans {
    pub fn graph(&self) -> &InterferenceGraph {
        &self.spec.graph
    }
}

impl OutcomeModel for LinearInMeans {
    fn n(&self) -> usize {
        self.spec.graph.n()
    }

    fn outcome(&self, unit: usize, w: &TreatmentVector) -> f64 {
        let nbrs = self.spec.graph.neighbors(unit);
        self.anonymous_response(unit, w.get(unit), w.count_treated_in(nbrs))
    }

    fn dependencies(&self, unit: usize) -> &[usize] {
        self.spec.graph.neighbors(unit)
    }

    fn is_anonymous(&self) -> bool {
        true
    }

    fn anonymous_response(&self, unit: usize, own: bool, treated: usize) -> f64 {
        let frac = treated as f64 / self.spec.graph.degree(unit) as f64;
        self.spec.beta1 + self.spec.beta2 * bit(own) + self.spec.beta3 * frac
    }

    fn closed_form(&self) -> Option<ClosedForm> {
        Some(ClosedForm {
            ade: self.spec.beta2,
            aie: self.spec.beta3,
        })
    }

    fn name(&self) -> String {
        "linear_in_means".into()
    }
}

// ---------------------------------------------------------------------------
// Saturated linear

#[derive(Debug, Clone)]
pub struct SaturatedLinearSpec {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// `nu[i][j]`: effect of `w_j` on `Y_i`. The diagonal must be zero.
    pub nu: Vec<Vec<f64>>,
}

/// `Y_i = α_i + β_i·w_i + Σ_{j≠i} ν_ij·w_j`.
#[derive(Debug, Clone)]
pub struct SaturatedLinear {
    spec: SaturatedLinearSpec,
    deps: Vec<Vec<usize>>,
}

pub fn make_saturated_linear(spec: SaturatedLinearSpec) -> Result<SaturatedLinear> {
    let n = spec.alpha.len();
    if spec.beta.len() != n || spec.nu.len() != n {
        return Err(Error::InvalidModel(format!(
            "saturated model needs alpha, beta and nu rows of one length (got {}, {}, {})",
            n,
            spec.beta.len(),
            spec.nu.len()
        )));
    }
    let mut deps = Vec::with_capacity(n);
    for (i, row) in spec.nu.iter().enumerate() {
        if row.len() != n {
            return Err(Error::InvalidModel(format!(
                "nu row {} has {} entries, expected {n}",
                i + 1,
                row.len()
            )));
        }
        if row[i] != 0.0 {
            return Err(Error::InvalidModel(format!(
                "nu has nonzero diagonal entry at unit {}",
                i + 1
            )));
        }
        deps.push((0..n).filter(|&j| row[j] != 0.0).collect());
    }
    Ok(SaturatedLinear { spec, deps })
}

impl SaturatedLinear {
    pub fn spec(&self) -> &SaturatedLinearSpec {
        &self.spec
    }

    pub fn load_csv(path: &Path) -> Result<SaturatedLinear> {
        let rows = read_unit_csv(path, None)?;
        let n = rows.len();
        let mut spec = SaturatedLinearSpec {
            alpha: Vec::with_capacity(n),
            beta: Vec::with_capacity(n),
            nu: Vec::with_capacity(n),
        };
        for (unit, row) in rows.iter().enumerate() {
            if row.len() != n + 2 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    message: format!(
                        "unit {} needs alpha, beta and {n} nu columns, found {} values",
                        unit + 1,
                        row.len()
                    ),
                });
            }
            spec.alpha.push(row[0]);
            spec.beta.push(row[1]);
            spec.nu.push(row[2..].to_vec());
        }
        make_saturated_linear(spec)
    }
}

impl OutcomeModel for SaturatedLinear {
    fn n(&self) -> usize {
        self.spec.alpha.len()
    }

    fn outcome(&self, unit: usize, w: &TreatmentVector) -> f64 {
        let row = &self.spec.nu[unit];
        let spill: f64 = self.deps[unit]
            .iter()
            .filter(|&&j| w.get(j))
            .map(|&j| row[j])
            .sum();
        self.spec.alpha[unit] + self.spec.beta[unit] * bit(w.get(unit)) + spill
    }

    fn dependencies(&self, unit: usize) -> &[usize] {
        &self.deps[unit]
    }

    fn closed_form(&self) -> Option<ClosedForm> {
        let n = self.n() as f64;
        Some(ClosedForm {
            ade: compensated_sum(self.spec.beta.iter().copied()) / n,
            aie: compensated_sum(self.spec.nu.iter().flatten().copied()) / n,
        })
    }

    fn name(&self) -> String {
        "saturated_linear".into()
    }
}

// ---------------------------------------------------------------------------
// Four-type exposure

/// The four potential outcomes of one unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExposureOutcomes {
    pub treated_exposed: f64,
    pub treated: f64,
    pub exposed: f64,
    pub none: f64,
}

#[derive(Debug, Clone)]
pub struct FourTypeExposureSpec {
    pub cluster_size: usize,
    /// Explicit partition (0-indexed units). `None` means contiguous blocks.
    pub clusters: Option<Vec<Vec<usize>>>,
    pub outcomes: Vec<ExposureOutcomes>,
}

/// Average self-treatment and spillover effects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExposureEffects {
    pub self_exposed: f64,
    pub self_unexposed: f64,
    pub spill_treated: f64,
    pub spill_untreated: f64,
}

/// Each unit's outcome is picked by its own treatment and whether any
/// cluster mate is treated.
#[derive(Debug, Clone)]
pub struct FourTypeExposure {
    cluster_size: usize,
    clusters: Vec<Vec<usize>>,
    mates: Vec<Vec<usize>>,
    outcomes: Vec<ExposureOutcomes>,
}

/// Checks that `clusters` partitions `0..n` into blocks of size `m`.
pub(crate) fn validate_partition(n: usize, m: usize, clusters: &[Vec<usize>]) -> Result<()> {
    let mut seen = vec![false; n];
    for (c, members) in clusters.iter().enumerate() {
        if members.len() != m {
            return Err(Error::InvalidDesign(format!(
                "cluster {} has {} units, expected {m}",
                c + 1,
                members.len()
            )));
        }
        for &u in members {
            if u >= n || std::mem::replace(&mut seen[u], true) {
                return Err(Error::InvalidDesign(format!(
                    "unit {} is out of range or appears in two clusters",
                    u + 1
                )));
            }
        }
    }
    if let Some(u) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidDesign(format!("unit {} is in no cluster", u + 1)));
    }
    Ok(())
}

pub(crate) fn contiguous_clusters(n: usize, m: usize) -> Vec<Vec<usize>> {
    (0..n / m).map(|c| (c * m..(c + 1) * m).collect()).collect()
}

pub fn make_four_type_exposure(spec: FourTypeExposureSpec) -> Result<FourTypeExposure> {
    let n = spec.outcomes.len();
    let m = spec.cluster_size;
    if m < 2 {
        return Err(Error::InvalidModel(format!("cluster size must be at least 2, got {m}")));
    }
    if n == 0 || !n.is_multiple_of(m) {
        return Err(Error::InvalidModel(format!(
            "cluster size {m} does not divide the unit count {n}"
        )));
    }
    if spec
        .outcomes
        .iter()
        .any(|o| ![o.treated_exposed, o.treated, o.exposed, o.none].iter().all(|v| v.is_finite()))
    {
        return Err(Error::InvalidModel("four-type outcomes must be finite".into()));
    }
    let clusters = spec.clusters.unwrap_or_else(|| contiguous_clusters(n, m));
    validate_partition(n, m, &clusters).map_err(|e| Error::InvalidModel(e.to_string()))?;
    let mut mates = vec![Vec::new(); n];
    for members in &clusters {
        for &u in members {
            let mut others: Vec<usize> = members.iter().copied().filter(|&v| v != u).collect();
            others.sort_unstable();
            mates[u] = others;
        }
    }
    Ok(FourTypeExposure {
        cluster_size: m,
        clusters,
        mates,
        outcomes: spec.outcomes,
    })
}

impl FourTypeExposure {
    pub fn cluster_size(&self) -> usize {
        self.cluster_size
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn outcomes(&self) -> &[ExposureOutcomes] {
        &self.outcomes
    }

    pub fn exposure_effects(&self) -> ExposureEffects {
        let n = self.outcomes.len() as f64;
        let mean = |f: fn(&ExposureOutcomes) -> f64| compensated_sum(self.outcomes.iter().map(f)) / n;
        ExposureEffects {
            self_exposed: mean(|o| o.treated_exposed - o.exposed),
            self_unexposed: mean(|o| o.treated - o.none),
            spill_treated: mean(|o| o.treated_exposed - o.treated),
            spill_untreated: mean(|o| o.exposed - o.none),
        }
    }

    /// Estimands under the two-stage clustered design with treated-cluster
    /// fraction `rho`, written in terms of the self and spillover effects.
    pub fn two_stage_closed_form(&self, rho: f64) -> ClosedForm {
        let m = self.cluster_size as f64;
        let e = self.exposure_effects();
        let untreated_mates = 1.0 - rho + rho / m;
        ClosedForm {
            ade: (rho - rho / m) * e.self_exposed + untreated_mates * e.self_unexposed,
            aie: (m - 1.0) * (rho / m * e.spill_treated + untreated_mates * e.spill_untreated),
        }
    }

    pub fn load_csv(path: &Path, cluster_size: usize, clusters: Option<Vec<Vec<usize>>>) -> Result<Self> {
        let rows = read_unit_csv(path, Some(4))?;
        let outcomes = rows
            .into_iter()
            .map(|r| ExposureOutcomes {
                treated_exposed: r[0],
                treated: r[1],
                exposed: r[2],
                none: r[3],
            })
            .collect();
        make_four_type_exposure(FourTypeExposureSpec {
            cluster_size,
            clusters,
            outcomes,
        })
    }
}

impl OutcomeModel for FourTypeExposure {
    fn n(&self) -> usize {
        self.outcomes.len()
    }

    fn outcome(&self, unit: usize, w: &TreatmentVector) -> f64 {
        let exposed = self.mates[unit].iter().any(|&j| w.get(j));
        self.anonymous_response(unit, w.get(unit), usize::from(exposed))
    }

    fn dependencies(&self, unit: usize) -> &[usize] {
        &self.mates[unit]
    }

    fn is_anonymous(&self) -> bool {
        true
    }

    fn anonymous_response(&self, unit: usize, own: bool, treated: usize) -> f64 {
        let o = &self.outcomes[unit];
        match (own, treated > 0) {
            (true, true) => o.treated_exposed,
            (true, false) => o.treated,
            (false, true) => o.exposed,
            (false, false) => o.none,
        }
    }

    fn name(&self) -> String {
        "four_type_exposure".into()
    }
}

// ---------------------------------------------------------------------------
// Figure-1 structural settings

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fig1Variant {
    /// `Y_i = (treated neighbors)/300 + 2w_i/3`
    Linear,
    /// `Y_i = 1 − (1 − e_i)²(1 − w_i/2)`
    HerdImmunity,
    /// `Y_i = w_i{e_i − 3(e_i − 1/2)³}`
    Cubic,
}

impl Fig1Variant {
    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Self::Linear),
            2 => Ok(Self::HerdImmunity),
            3 => Ok(Self::Cubic),
            other => Err(Error::InvalidModel(format!(
                "setting must be 1, 2 or 3, got {other}"
            ))),
        }
    }

    pub fn id(self) -> u8 {
        match self {
            Self::Linear => 1,
            Self::HerdImmunity => 2,
            Self::Cubic => 3,
        }
    }

    /// Response given own treatment, treated-neighbor count and degree.
    pub fn response(self, own: bool, treated: usize, degree: usize) -> f64 {
        let e = treated as f64 / degree as f64;
        let w = bit(own);
        match self {
            Self::Linear => treated as f64 / 300.0 + 2.0 * w / 3.0,
            Self::HerdImmunity => 1.0 - (1.0 - e).powi(2) * (1.0 - w / 2.0),
            Self::Cubic => w * (e - 3.0 * (e - 0.5).powi(3)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fig1SettingSpec {
    pub setting: u8,
    pub graph: InterferenceGraph,
}

#[derive(Debug, Clone)]
pub struct Fig1Setting {
    variant: Fig1Variant,
    graph: InterferenceGraph,
}

pub fn make_fig1_setting(spec: Fig1SettingSpec) -> Result<Fig1Setting> {
    let variant = Fig1Variant::from_id(spec.setting)?;
    require_neighbors(&spec.graph)?;
    Ok(Fig1Setting {
        variant,
        graph: spec.graph,
    })
}

impl Fig1Setting {
    pub fn variant(&self) -> Fig1Variant {
        self.variant
    }

    pub fn graph(&self) -> &InterferenceGraph {
        &self.graph
    }
}

impl OutcomeModel for Fig1Setting {
    fn n(&self) -> usize {
        self.graph.n()
    }

    fn outcome(&self, unit: usize, w: &TreatmentVector) -> f64 {
        let treated = w.count_treated_in(self.graph.neighbors(unit));
        self.anonymous_response(unit, w.get(unit), treated)
    }

    fn dependencies(&self, unit: usize) -> &[usize] {
        self.graph.neighbors(unit)
    }

    fn is_anonymous(&self) -> bool {
        true
    }

    fn anonymous_response(&self, unit: usize, own: bool, treated: usize) -> f64 {
        self.variant.response(own, treated, self.graph.degree(unit))
    }

    fn closed_form(&self) -> Option<ClosedForm> {
        // Setting 1 is the saturated linear model with β_i = 2/3, ν_ij = E_ij/300.
        (self.variant == Fig1Variant::Linear).then(|| ClosedForm {
            ade: 2.0 / 3.0,
            aie: self.graph.edge_count() as f64 / 300.0 / self.n() as f64,
        })
    }

    fn name(&self) -> String {
        format!("fig1_setting{}", self.variant.id())
    }
}

// ---------------------------------------------------------------------------
// Diverging anonymous model

#[derive(Debug, Clone, Copy)]
pub struct DivergingAnonymousSpec {
    pub pi0: f64,
}

/// `Y_i(w) = (Σ_j w_j − nπ0)/√(nπ0(1−π0))` for every unit.
#[derive(Debug, Clone)]
pub struct DivergingAnonymous {
    n: usize,
    pi0: f64,
    scale: f64,
    deps: Vec<Vec<usize>>,
}

pub fn make_diverging_anonymous(spec: DivergingAnonymousSpec, n: usize) -> Result<DivergingAnonymous> {
    let pi0 = spec.pi0;
    if !(pi0 > 0.0 && pi0 < 1.0) {
        return Err(Error::InvalidModel(format!("pi0 must lie in (0, 1), got {pi0}")));
    }
    if n < 2 {
        return Err(Error::InvalidModel("diverging model needs at least 2 units".into()));
    }
    let nf = n as f64;
    Ok(DivergingAnonymous {
        n,
        pi0,
        scale: (nf * pi0 * (1.0 - pi0)).sqrt(),
        deps: (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect(),
    })
}

impl DivergingAnonymous {
    pub fn pi0(&self) -> f64 {
        self.pi0
    }
}

impl OutcomeModel for DivergingAnonymous {
    fn n(&self) -> usize {
        self.n
    }

    fn outcome(&self, _unit: usize, w: &TreatmentVector) -> f64 {
        (w.count_treated() as f64 - self.n as f64 * self.pi0) / self.scale
    }

    fn dependencies(&self, unit: usize) -> &[usize] {
        &self.deps[unit]
    }

    fn is_anonymous(&self) -> bool {
        true
    }

    fn anonymous_response(&self, _unit: usize, own: bool, treated: usize) -> f64 {
        (bit(own) + treated as f64 - self.n as f64 * self.pi0) / self.scale
    }

    fn closed_form(&self) -> Option<ClosedForm> {
        Some(ClosedForm {
            ade: 1.0 / self.scale,
            aie: (self.n as f64 - 1.0) / self.scale,
        })
    }

    fn name(&self) -> String {
        "diverging_anonymous".into()
    }
}

// ---------------------------------------------------------------------------
// Tabulated anonymous responses

/// Anonymous model given by an explicit table `f_i(own, treated)` per unit,
/// with `treated` ranging over `0..=degree(i)`.
#[derive(Debug, Clone)]
pub struct AnonymousTable {
    graph: InterferenceGraph,
    /// `table[i][b] = [f_i(0, b), f_i(1, b)]`
    table: Vec<Vec<[f64; 2]>>,
}

impl AnonymousTable {
    pub fn new(graph: InterferenceGraph, table: Vec<Vec<[f64; 2]>>) -> Result<Self> {
        if table.len() != graph.n() {
            return Err(Error::DimensionMismatch {
                expected: graph.n(),
                actual: table.len(),
            });
        }
        for (i, row) in table.iter().enumerate() {
            if row.len() != graph.degree(i) + 1 {
                return Err(Error::InvalidModel(format!(
                    "unit {} needs {} table rows, got {}",
                    i + 1,
                    graph.degree(i) + 1,
                    row.len()
                )));
            }
        }
        Ok(Self { graph, table })
    }
}

impl OutcomeModel for AnonymousTable {
    fn n(&self) -> usize {
        self.graph.n()
    }

    fn outcome(&self, unit: usize, w: &TreatmentVector) -> f64 {
        let treated = w.count_treated_in(self.graph.neighbors(unit));
        self.table[unit][treated][usize::from(w.get(unit))]
    }

    fn dependencies(&self, unit: usize) -> &[usize] {
        self.graph.neighbors(unit)
    }

    fn is_anonymous(&self) -> bool {
        true
    }

    fn anonymous_response(&self, unit: usize, own: bool, treated: usize) -> f64 {
        self.table[unit][treated][usize::from(own)]
    }

    fn name(&self) -> String {
        "anonymous_table".into()
    }
}

// ---------------------------------------------------------------------------
// No interference

/// `Y_i = α_i + β_i·w_i`.
#[derive(Debug, Clone)]
pub struct NoInterference {
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl NoInterference {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(Error::DimensionMismatch {
                expected: alpha.len(),
                actual: beta.len(),
            });
        }
        Ok(Self { alpha, beta })
    }

    pub fn constant(n: usize, alpha: f64, beta: f64) -> Self {
        Self {
            alpha: vec![alpha; n],
            beta: vec![beta; n],
        }
    }
}

impl OutcomeModel for NoInterference {
    fn n(&self) -> usize {
        self.alpha.len()
    }

    fn outcome(&self, unit: usize, w: &TreatmentVector) -> f64 {
        self.alpha[unit] + self.beta[unit] * bit(w.get(unit))
    }

    fn dependencies(&self, _unit: usize) -> &[usize] {
        &[]
    }

    fn is_anonymous(&self) -> bool {
        true
    }

    fn closed_form(&self) -> Option<ClosedForm> {
        Some(ClosedForm {
            ade: compensated_sum(self.beta.iter().copied()) / self.n() as f64,
            aie: 0.0,
        })
    }

    fn name(&self) -> String {
        "no_interference".into()
    }
}

// ---------------------------------------------------------------------------

/// Reads a CSV with a header row whose first column is a 1-indexed unit id.
/// Rows are returned in unit order, without the unit column.
pub(crate) fn read_unit_csv(path: &Path, width: Option<usize>) -> Result<Vec<Vec<f64>>> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Option<Vec<f64>>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let unit: usize = record
            .get(0)
            .and_then(|s| s.parse().ok())
            .filter(|&u| u >= 1)
            .ok_or_else(|| parse_err(format!("row {}: first column must be a 1-indexed unit", line + 1)))?;
        let values = record
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(format!("row {}: {e}", line + 1)))?;
        if let Some(w) = width {
            if values.len() != w {
                return Err(parse_err(format!(
                    "row {}: expected {w} value columns, found {}",
                    line + 1,
                    values.len()
                )));
            }
        }
        if rows.len() < unit {
            rows.resize(unit, None);
        }
        if rows[unit - 1].replace(values).is_some() {
            return Err(parse_err(format!("unit {unit} appears twice")));
        }
    }
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| r.ok_or_else(|| parse_err(format!("unit {} is missing", i + 1))))
        .collect()
}
