//! Randomized designs: Bernoulli trials and the two-stage clustered design.

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::treatment::{ProbabilityVector, TreatmentVector};
use crate::zoo::{contiguous_clusters, validate_partition};

/// Largest Bernoulli design that is enumerated exactly (2^20 assignments).
pub const MAX_BERNOULLI_UNITS: usize = 20;
/// Largest two-stage support that is enumerated exactly.
pub const MAX_TWO_STAGE_SUPPORT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliDesign {
    pi: ProbabilityVector,
}

impl BernoulliDesign {
    pub fn new(pi: ProbabilityVector) -> Self {
        Self { pi }
    }

    pub fn constant(n: usize, p: f64) -> Result<Self> {
        Ok(Self::new(ProbabilityVector::constant(n, p)?))
    }

    pub fn pi(&self) -> &ProbabilityVector {
        &self.pi
    }

    /// Probability of the assignment encoded by `mask`.
    pub(crate) fn mask_probability(&self, mask: u64) -> f64 {
        self.pi
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, &p)| if (mask >> i) & 1 == 1 { p } else { 1.0 - p })
            .product()
    }
}

/// `ρ·n/m` clusters are treated, completely at random; inside each treated
/// cluster exactly one unit, chosen uniformly, is treated.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageClusteredDesign {
    n: usize,
    m: usize,
    rho: f64,
    treated_clusters: usize,
    clusters: Vec<Vec<usize>>,
}

impl TwoStageClusteredDesign {
    /// Contiguous clusters `{0..m}, {m..2m}, …`.
    pub fn new(n: usize, m: usize, rho: f64) -> Result<Self> {
        if m == 0 || n == 0 || !n.is_multiple_of(m) {
            return Err(Error::InvalidDesign(format!(
                "cluster size {m} must divide the unit count {n}"
            )));
        }
        Self::with_clusters(n, m, rho, contiguous_clusters(n, m))
    }

    pub fn with_clusters(n: usize, m: usize, rho: f64, mut clusters: Vec<Vec<usize>>) -> Result<Self> {
        if m == 0 || n == 0 || !n.is_multiple_of(m) {
            return Err(Error::InvalidDesign(format!(
                "cluster size {m} must divide the unit count {n}"
            )));
        }
        validate_partition(n, m, &clusters)?;
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidDesign(format!("rho must lie in [0, 1], got {rho}")));
        }
        let count = n / m;
        let target = rho * count as f64;
        let treated_clusters = target.round();
        if (target - treated_clusters).abs() > 1e-9 {
            return Err(Error::InvalidDesign(format!(
                "rho·n/m = {target} is not an integer number of clusters"
            )));
        }
        for c in &mut clusters {
            c.sort_unstable();
        }
        Ok(Self {
            n,
            m,
            rho,
            treated_clusters: treated_clusters as usize,
            clusters,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cluster_size(&self) -> usize {
        self.m
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn treated_clusters(&self) -> usize {
        self.treated_clusters
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    fn cluster_of(&self, unit: usize) -> &[usize] {
        self.clusters
            .iter()
            .find(|c| c.contains(&unit))
            .expect("partition covers every unit")
    }

    /// `C(n/m, k) · m^k`.
    pub fn support_size(&self) -> f64 {
        let c = self.clusters.len() as f64;
        let k = self.treated_clusters as f64;
        let mut choose = 1.0;
        for t in 0..self.treated_clusters {
            choose *= (c - t as f64) / (t as f64 + 1.0);
        }
        choose.round() * (self.m as f64).powf(k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Design {
    Bernoulli(BernoulliDesign),
    TwoStage(TwoStageClusteredDesign),
}

impl From<BernoulliDesign> for Design {
    fn from(d: BernoulliDesign) -> Self {
        Design::Bernoulli(d)
    }
}

impl From<TwoStageClusteredDesign> for Design {
    fn from(d: TwoStageClusteredDesign) -> Self {
        Design::TwoStage(d)
    }
}

/// Every assignment with positive probability, with its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSupport {
    pub entries: Vec<(TreatmentVector, f64)>,
}

impl DesignSupport {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_probability(&self) -> f64 {
        crate::summation::compensated_sum(self.entries.iter().map(|e| e.1))
    }
}

/// Law of the treatments of a unit's cluster mates under the two-stage design.
#[derive(Debug, Clone, PartialEq)]
pub struct MateLaw {
    /// Cluster mates, in the order used by the outcome vectors below.
    pub mates: Vec<usize>,
    /// `(mate treatments, probability)`: the all-zero vector first, then
    /// each single-treated-mate vector `e_1, …, e_{m−1}`.
    pub outcomes: Vec<(TreatmentVector, f64)>,
}

impl Design {
    pub fn n(&self) -> usize {
        match self {
            Design::Bernoulli(d) => d.pi.len(),
            Design::TwoStage(d) => d.n,
        }
    }

    pub fn as_bernoulli(&self) -> Option<&BernoulliDesign> {
        match self {
            Design::Bernoulli(d) => Some(d),
            Design::TwoStage(_) => None,
        }
    }

    /// Short text tag used in reports.
    pub fn describe(&self) -> String {
        match self {
            Design::Bernoulli(d) => match d.pi.constant_value() {
                Some(p) => format!("bernoulli(pi={p})"),
                None => "bernoulli(pi=heterogeneous)".to_string(),
            },
            Design::TwoStage(d) => format!("two_stage(m={},rho={})", d.m, d.rho),
        }
    }

    pub fn sample_assignment<R: Rng + ?Sized>(&self, rng: &mut R) -> TreatmentVector {
        match self {
            Design::Bernoulli(d) => {
                let mut w = TreatmentVector::zeros(d.pi.len());
                for (i, &p) in d.pi.as_slice().iter().enumerate() {
                    w.set(i, rng.random::<f64>() < p);
                }
                w
            }
            Design::TwoStage(d) => {
                let mut w = TreatmentVector::zeros(d.n);
                for c in index::sample(rng, d.clusters.len(), d.treated_clusters) {
                    let members = &d.clusters[c];
                    w.set(members[rng.random_range(0..d.m)], true);
                }
                w
            }
        }
    }

    pub fn support_size(&self) -> f64 {
        match self {
            Design::Bernoulli(d) => 2f64.powi(d.pi.len() as i32),
            Design::TwoStage(d) => d.support_size(),
        }
    }

    pub fn is_enumerable(&self) -> bool {
        match self {
            Design::Bernoulli(d) => d.pi.len() <= MAX_BERNOULLI_UNITS,
            Design::TwoStage(d) => d.support_size() <= MAX_TWO_STAGE_SUPPORT,
        }
    }

    pub fn enumerate_support(&self) -> Result<DesignSupport> {
        if !self.is_enumerable() {
            let limit = match self {
                Design::Bernoulli(_) => 2f64.powi(MAX_BERNOULLI_UNITS as i32),
                Design::TwoStage(_) => MAX_TWO_STAGE_SUPPORT,
            };
            return Err(Error::SupportTooLarge {
                size: self.support_size(),
                limit,
            });
        }
        let entries = match self {
            Design::Bernoulli(d) => {
                let n = d.pi.len();
                (0..1u64 << n)
                    .map(|mask| (TreatmentVector::from_mask(n, mask), d.mask_probability(mask)))
                    .collect()
            }
            Design::TwoStage(d) => enumerate_two_stage(d),
        };
        Ok(DesignSupport { entries })
    }

    /// `P(W_i = 1)`.
    pub fn marginal_treatment_probability(&self, i: usize) -> Result<f64> {
        let n = self.n();
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        Ok(match self {
            Design::Bernoulli(d) => d.pi.get(i),
            Design::TwoStage(d) => d.treated_clusters as f64 / d.clusters.len() as f64 / d.m as f64,
        })
    }
}

fn enumerate_two_stage(d: &TwoStageClusteredDesign) -> Vec<(TreatmentVector, f64)> {
    let c = d.clusters.len();
    let k = d.treated_clusters;
    let prob = 1.0 / d.support_size();
    let mut out = Vec::new();
    // lexicographic k-subsets of 0..c
    let mut combo: Vec<usize> = (0..k).collect();
    let picks = d.m.pow(k as u32);
    loop {
        // one unit per chosen cluster, as the base-m digits of `code`
        for code in 0..picks {
            let mut w = TreatmentVector::zeros(d.n);
            let mut rest = code;
            for &cl in &combo {
                w.set(d.clusters[cl][rest % d.m], true);
                rest /= d.m;
            }
            out.push((w, prob));
        }
        // next combination
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if combo[i] < c - k + i {
                combo[i] += 1;
                for j in i + 1..k {
                    combo[j] = combo[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// The law of `W` restricted to the cluster mates of unit `i`:
/// all-untreated with probability `1 − ρ + ρ/m`, each single treated mate
/// with probability `ρ/m`.
pub fn neighbor_marginal_law(design: &TwoStageClusteredDesign, i: usize) -> Result<MateLaw> {
    if i >= design.n {
        return Err(Error::IndexOutOfRange { index: i, n: design.n });
    }
    let m = design.m as f64;
    let rho = design.treated_clusters as f64 / design.clusters.len() as f64;
    let mates: Vec<usize> = design.cluster_of(i).iter().copied().filter(|&u| u != i).collect();
    let k = mates.len();
    let mut outcomes = vec![(TreatmentVector::zeros(k), 1.0 - rho + rho / m)];
    for j in 0..k {
        let mut e = TreatmentVector::zeros(k);
        e.set(j, true);
        outcomes.push((e, rho / m));
    }
    Ok(MateLaw { mates, outcomes })
}
