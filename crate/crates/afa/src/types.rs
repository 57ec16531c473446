//! Domain types shared by every module: instances, masks, acquisition
//! states, costs, predictions and per-step side information.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Tolerance used when validating that class probabilities sum to one.
pub const PROB_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("feature index {0} out of range (d = {1})")]
    IndexOutOfRange(usize, usize),
    #[error("feature {0} already observed")]
    AlreadyObserved(usize),
    #[error("episode terminated")]
    Terminated,
    #[error("probability vector sums to {0}, expected 1")]
    BadProbabilities(f64),
    #[error("negative standard deviation {0}")]
    NegativeStd(f64),
    #[error("cost must be non-negative, got {0}")]
    NegativeCost(f64),
}

/// What the episode is trying to predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    /// Discrete label in {0..K-1}.
    Classification,
    /// Real-valued target vector.
    Regression,
    /// The target is the unobserved remainder of the feature vector itself.
    Imputation,
}

/// Ground-truth target of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Class(usize),
    Continuous(Vec<f64>),
    /// Imputation task: the features themselves are the target.
    Unsupervised,
}

/// A single data record: feature vector plus target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub features: Vec<f64>,
    pub target: Target,
    /// Per-feature "value unavailable in the source data" flags.
    pub missing: Option<Vec<bool>>,
}

impl Instance {
    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn is_missing(&self, index: usize) -> bool {
        self.missing.as_ref().is_some_and(|m| m[index])
    }
}

/// The set of observed feature indices o ⊆ {0..d-1}.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMask {
    d: usize,
    observed: BTreeSet<usize>,
}

impl FeatureMask {
    pub fn empty(d: usize) -> Self {
        Self {
            d,
            observed: BTreeSet::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn observed(&self) -> impl Iterator<Item = usize> + '_ {
        self.observed.iter().copied()
    }

    pub fn observed_vec(&self) -> Vec<usize> {
        self.observed.iter().copied().collect()
    }

    /// Complement u = {0..d-1} \ o.
    pub fn unobserved_vec(&self) -> Vec<usize> {
        (0..self.d).filter(|i| !self.observed.contains(i)).collect()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.observed.contains(&index)
    }

    pub fn num_observed(&self) -> usize {
        self.observed.len()
    }

    pub fn max_observed(&self) -> Option<usize> {
        self.observed.iter().next_back().copied()
    }

    fn insert(&mut self, index: usize) {
        self.observed.insert(index);
    }
}

/// Constraint on which unobserved features are legal next acquisitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionConstraint {
    #[default]
    None,
    /// Time-series rule: the next index must be strictly greater than
    /// every already-observed index.
    Chronological,
}

/// MDP state s = [o, x_o]: the observed subset and its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionState {
    mask: FeatureMask,
    values: BTreeMap<usize, f64>,
    step: usize,
    terminated: bool,
}

impl AcquisitionState {
    pub fn empty(d: usize) -> Self {
        Self {
            mask: FeatureMask::empty(d),
            values: BTreeMap::new(),
            step: 0,
            terminated: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.mask.dim()
    }

    pub fn mask(&self) -> &FeatureMask {
        &self.mask
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn terminated(&self) -> bool {
        self.terminated
    }

    pub fn value(&self, index: usize) -> Option<f64> {
        self.values.get(&index).copied()
    }

    /// Observed (index, value) pairs in ascending index order.
    pub fn observed_pairs(&self) -> Vec<(usize, f64)> {
        self.values.iter().map(|(&i, &v)| (i, v)).collect()
    }

    /// Dense rendering: observed values in place, 0 elsewhere.
    pub fn dense_values(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (&i, &v) in &self.values {
            out[i] = v;
        }
        out
    }

    /// Marks the state terminated. Further acquisitions are rejected.
    pub fn into_terminated(mut self) -> Self {
        self.terminated = true;
        self
    }
}

/// Returns the legal action ids at `state`: unobserved indices satisfying
/// `constraint`, plus the termination action encoded as id d.
///
/// An exhausted candidate set (only termination left) is legal.
pub fn candidate_actions(state: &AcquisitionState, constraint: ActionConstraint) -> Vec<usize> {
    debug_assert!(!state.terminated(), "candidate_actions on terminated state");
    let d = state.dim();
    let lower = match constraint {
        ActionConstraint::None => 0,
        ActionConstraint::Chronological => state.mask.max_observed().map_or(0, |m| m + 1),
    };
    let mut actions: Vec<usize> = (lower..d).filter(|i| !state.mask.contains(*i)).collect();
    actions.push(terminate_action(d));
    actions
}

/// Action id of the termination action φ for a d-dimensional problem.
pub const fn terminate_action(d: usize) -> usize {
    d
}

/// Acquires feature `index` with value `value`, returning the successor
/// state. The input state is unchanged.
pub fn apply_acquisition(
    state: &AcquisitionState,
    index: usize,
    value: f64,
) -> Result<AcquisitionState, CoreError> {
    if state.terminated {
        return Err(CoreError::Terminated);
    }
    if index >= state.dim() {
        return Err(CoreError::IndexOutOfRange(index, state.dim()));
    }
    if state.mask.contains(index) {
        return Err(CoreError::AlreadyObserved(index));
    }
    let mut next = state.clone();
    next.mask.insert(index);
    next.values.insert(index, value);
    next.step += 1;
    Ok(next)
}

/// Per-feature acquisition costs and the cost/performance trade-off α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    costs: Vec<f64>,
    pub alpha: f64,
}

impl CostModel {
    /// Uniform cost 1/d per feature, so acquiring everything costs 1.
    pub fn uniform(d: usize, alpha: f64) -> Self {
        Self {
            costs: vec![1.0 / d as f64; d],
            alpha,
        }
    }

    pub fn new(costs: Vec<f64>, alpha: f64) -> Result<Self, CoreError> {
        if let Some(&c) = costs.iter().find(|c| **c < 0.0 || !c.is_finite()) {
            return Err(CoreError::NegativeCost(c));
        }
        Ok(Self { costs, alpha })
    }

    pub fn cost(&self, index: usize) -> f64 {
        self.costs[index]
    }

    /// C(o) = Σ_{i∈o} c_i.
    pub fn total<I: IntoIterator<Item = usize>>(&self, observed: I) -> f64 {
        observed.into_iter().map(|i| self.costs[i]).sum()
    }

    pub fn dim(&self) -> usize {
        self.costs.len()
    }
}

/// Model output at termination time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Prediction {
    /// Probability vector over K classes.
    Classification { probs: Vec<f64> },
    /// Mean and per-dimension standard deviation of the target.
    Regression { mean: Vec<f64>, std: Vec<f64> },
}

impl Prediction {
    pub fn classification(probs: Vec<f64>) -> Result<Self, CoreError> {
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL || probs.iter().any(|p| *p < 0.0 || *p > 1.0 + PROB_SUM_TOL) {
            return Err(CoreError::BadProbabilities(sum));
        }
        Ok(Self::Classification { probs })
    }

    pub fn regression(mean: Vec<f64>, std: Vec<f64>) -> Result<Self, CoreError> {
        if let Some(&s) = std.iter().find(|s| **s < 0.0) {
            return Err(CoreError::NegativeStd(s));
        }
        Ok(Self::Regression { mean, std })
    }

    pub fn probs(&self) -> Option<&[f64]> {
        match self {
            Self::Classification { probs } => Some(probs),
            Self::Regression { .. } => None,
        }
    }

    /// Entropy of the categorical distribution, in nats. 0 for regression.
    pub fn entropy(&self) -> f64 {
        match self {
            Self::Classification { probs } => categorical_entropy(probs),
            Self::Regression { .. } => 0.0,
        }
    }
}

/// Entropy of a categorical distribution in nats; 0·log 0 treated as 0.
pub fn categorical_entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

/// KL divergence between two categorical distributions, in nats.
pub fn categorical_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi.ln() - qi.max(f64::MIN_POSITIVE).ln()))
        .sum()
}

/// Per-step auxiliary bundle the surrogate hands the agent: imputations,
/// uncertainties, candidate utilities and the current prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideInfo {
    /// d-vector; entries at observed indices echo the observed values.
    pub imputed_mean: Vec<f64>,
    /// d-vector; 0 at observed indices.
    pub imputed_std: Vec<f64>,
    /// d-vector; 0 at observed and constraint-invalid indices.
    pub utility: Vec<f64>,
    pub prediction: Prediction,
    /// step / d.
    pub step_fraction: f64,
}
