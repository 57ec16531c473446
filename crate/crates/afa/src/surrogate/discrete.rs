//! Exact joint probability table over a handful of categorical features and
//! a class label. Every conditional, entropy and mutual information is
//! computed by direct enumeration, making this the ground-truth oracle for
//! the sampling-based estimators and for micro-MDP solvers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SurrogateError;
use crate::types::{categorical_entropy, categorical_kl};

/// Joint table P(y, x_0..x_{d-1}) with small categorical features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteExactSurrogate {
    /// Number of levels per feature (each ≥ 2, typically ≤ 3).
    levels: Vec<usize>,
    num_classes: usize,
    /// Flattened probabilities: index = y · Πlevels + feature code.
    table: Vec<f64>,
}

impl DiscreteExactSurrogate {
    pub fn new(
        levels: Vec<usize>,
        num_classes: usize,
        table: Vec<f64>,
    ) -> Result<Self, SurrogateError> {
        let cells: usize = levels.iter().product::<usize>() * num_classes;
        if table.len() != cells {
            return Err(SurrogateError::BadTable(format!(
                "table has {} entries, expected {}",
                table.len(),
                cells
            )));
        }
        if table.iter().any(|p| *p < 0.0 || !p.is_finite()) {
            return Err(SurrogateError::BadTable("negative or non-finite entry".into()));
        }
        let sum: f64 = table.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SurrogateError::BadTable(format!("entries sum to {sum}")));
        }
        Ok(Self {
            levels,
            num_classes,
            table,
        })
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn num_feature_codes(&self) -> usize {
        self.levels.iter().product()
    }

    fn strides(&self) -> Vec<usize> {
        let d = self.dim();
        let mut strides = vec![1usize; d];
        for i in (0..d.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.levels[i + 1];
        }
        strides
    }

    /// Decodes a flat feature code into per-feature levels.
    pub fn decode(&self, mut code: usize) -> Vec<usize> {
        let strides = self.strides();
        (0..self.dim())
            .map(|i| {
                let v = code / strides[i];
                code %= strides[i];
                v
            })
            .collect()
    }

    pub fn level_of_value(&self, index: usize, value: f64) -> Result<usize, SurrogateError> {
        let lvl = value.round();
        if lvl < 0.0 || lvl >= self.levels[index] as f64 {
            return Err(SurrogateError::BadTable(format!(
                "value {value} is not a level of feature {index}"
            )));
        }
        Ok(lvl as usize)
    }

    fn consistent(&self, assignment: &[usize], observed: &[(usize, usize)]) -> bool {
        observed.iter().all(|&(i, v)| assignment[i] == v)
    }

    /// Iterates (y, assignment, probability) over all cells.
    fn cells(&self) -> impl Iterator<Item = (usize, Vec<usize>, f64)> + '_ {
        let codes = self.num_feature_codes();
        (0..self.num_classes).flat_map(move |y| {
            (0..codes).map(move |c| (y, self.decode(c), self.table[y * codes + c]))
        })
    }

    /// P(x_o): marginal probability of the observed assignment.
    pub fn prob_observed(&self, observed: &[(usize, usize)]) -> f64 {
        self.cells()
            .filter(|(_, a, _)| self.consistent(a, observed))
            .map(|(_, _, p)| p)
            .sum()
    }

    /// P(y | x_o) by direct table normalization.
    pub fn posterior(&self, observed: &[(usize, usize)]) -> Result<Vec<f64>, SurrogateError> {
        let mut mass = vec![0.0; self.num_classes];
        for (y, a, p) in self.cells() {
            if self.consistent(&a, observed) {
                mass[y] += p;
            }
        }
        let total: f64 = mass.iter().sum();
        if total <= 0.0 {
            return Err(SurrogateError::ZeroProbabilityEvidence);
        }
        Ok(mass.into_iter().map(|m| m / total).collect())
    }

    /// p(x_i | x_o), marginalizing the label.
    pub fn feature_conditional(
        &self,
        observed: &[(usize, usize)],
        index: usize,
    ) -> Result<Vec<f64>, SurrogateError> {
        let mut mass = vec![0.0; self.levels[index]];
        for (_, a, p) in self.cells() {
            if self.consistent(&a, observed) {
                mass[a[index]] += p;
            }
        }
        let total: f64 = mass.iter().sum();
        if total <= 0.0 {
            return Err(SurrogateError::ZeroProbabilityEvidence);
        }
        Ok(mass.into_iter().map(|m| m / total).collect())
    }

    /// p(x_i | y, x_o).
    pub fn feature_class_conditional(
        &self,
        observed: &[(usize, usize)],
        index: usize,
        class: usize,
    ) -> Result<Vec<f64>, SurrogateError> {
        let mut mass = vec![0.0; self.levels[index]];
        for (y, a, p) in self.cells() {
            if y == class && self.consistent(&a, observed) {
                mass[a[index]] += p;
            }
        }
        let total: f64 = mass.iter().sum();
        if total <= 0.0 {
            return Err(SurrogateError::ZeroProbabilityEvidence);
        }
        Ok(mass.into_iter().map(|m| m / total).collect())
    }

    /// H(y | x_o) in nats.
    pub fn label_entropy(&self, observed: &[(usize, usize)]) -> Result<f64, SurrogateError> {
        Ok(categorical_entropy(&self.posterior(observed)?))
    }

    /// Exact conditional mutual information I(x_i; y | x_o) in the
    /// "label-side" form: H(y|x_o) − E_{x_i} H(y|x_i,x_o).
    pub fn exact_mi_label_form(
        &self,
        observed: &[(usize, usize)],
        index: usize,
    ) -> Result<f64, SurrogateError> {
        let base = self.posterior(observed)?;
        let p_i = self.feature_conditional(observed, index)?;
        let mut expected = 0.0;
        for (v, pv) in p_i.iter().enumerate() {
            if *pv <= 0.0 {
                continue;
            }
            let mut obs2 = observed.to_vec();
            obs2.push((index, v));
            expected += pv * categorical_entropy(&self.posterior(&obs2)?);
        }
        Ok(categorical_entropy(&base) - expected)
    }

    /// The same quantity in the "feature-side" form of the utility
    /// definition: H(x_i|x_o) − E_y H(x_i|y,x_o).
    pub fn exact_mi_feature_form(
        &self,
        observed: &[(usize, usize)],
        index: usize,
    ) -> Result<f64, SurrogateError> {
        let post = self.posterior(observed)?;
        let p_i = self.feature_conditional(observed, index)?;
        let mut expected = 0.0;
        for (y, w) in post.iter().enumerate() {
            if *w <= 0.0 {
                continue;
            }
            expected += w * categorical_entropy(&self.feature_class_conditional(observed, index, y)?);
        }
        Ok(categorical_entropy(&p_i) - expected)
    }

    /// Equivalent KL form used by the sampling estimator:
    /// E_{x_i|x_o} KL[P(y|x_i,x_o) ‖ P(y|x_o)], summed exactly.
    pub fn exact_mi_kl_form(
        &self,
        observed: &[(usize, usize)],
        index: usize,
    ) -> Result<f64, SurrogateError> {
        let base = self.posterior(observed)?;
        let p_i = self.feature_conditional(observed, index)?;
        let mut total = 0.0;
        for (v, pv) in p_i.iter().enumerate() {
            if *pv <= 0.0 {
                continue;
            }
            let mut obs2 = observed.to_vec();
            obs2.push((index, v));
            total += pv * categorical_kl(&self.posterior(&obs2)?, &base);
        }
        Ok(total)
    }

    /// log p(x_u = target levels | x_o), marginalizing the label. Used by
    /// the imputation-reward analogue.
    pub fn log_prob_features_given(
        &self,
        targets: &[(usize, usize)],
        observed: &[(usize, usize)],
    ) -> Result<f64, SurrogateError> {
        let denom = self.prob_observed(observed);
        if denom <= 0.0 {
            return Err(SurrogateError::ZeroProbabilityEvidence);
        }
        let mut joint: Vec<(usize, usize)> = observed.to_vec();
        joint.extend_from_slice(targets);
        let num = self.prob_observed(&joint);
        if num <= 0.0 {
            return Err(SurrogateError::ZeroProbabilityEvidence);
        }
        Ok(num.ln() - denom.ln())
    }

    /// Draws (class, feature levels) from the joint table.
    pub fn sample_cell<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, Vec<usize>) {
        let mut u: f64 = rng.random();
        let codes = self.num_feature_codes();
        for (idx, p) in self.table.iter().enumerate() {
            u -= p;
            if u <= 0.0 {
                return (idx / codes, self.decode(idx % codes));
            }
        }
        (
            self.num_classes - 1,
            self.decode(codes - 1),
        )
    }

    /// Draws a level of x_i from p(x_i | x_o).
    pub fn sample_feature<R: Rng + ?Sized>(
        &self,
        observed: &[(usize, usize)],
        index: usize,
        rng: &mut R,
    ) -> Result<usize, SurrogateError> {
        let probs = self.feature_conditional(observed, index)?;
        let mut u: f64 = rng.random();
        for (v, p) in probs.iter().enumerate() {
            u -= p;
            if u <= 0.0 {
                return Ok(v);
            }
        }
        Ok(probs.len() - 1)
    }

    /// Builds a random strictly-positive joint table. All cells get mass,
    /// so every (o, x_o) combination is reachable.
    pub fn random<R: Rng + ?Sized>(
        levels: Vec<usize>,
        num_classes: usize,
        rng: &mut R,
        concentration: f64,
    ) -> Self {
        let cells: usize = levels.iter().product::<usize>() * num_classes;
        let gamma = rand_distr::Gamma::new(concentration, 1.0).expect("positive concentration");
        let mut table: Vec<f64> = (0..cells)
            .map(|_| rand_distr::Distribution::sample(&gamma, rng).max(1e-6))
            .collect();
        let sum: f64 = table.iter().sum();
        for p in &mut table {
            *p /= sum;
        }
        Self::new(levels, num_classes, table).expect("normalized table is valid")
    }
}

/// Converts observed (index, value) pairs with f64 level values into the
/// integer pairs the table operates on.
pub fn observed_levels(
    surrogate: &DiscreteExactSurrogate,
    pairs: &[(usize, f64)],
) -> Result<Vec<(usize, usize)>, SurrogateError> {
    pairs
        .iter()
        .map(|&(i, v)| surrogate.level_of_value(i, v).map(|lvl| (i, lvl)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// XOR of two fair bits plus an independent noisy third bit.
    fn xor_table() -> DiscreteExactSurrogate {
        let levels = vec![2, 2, 2];
        let mut table = vec![0.0; 2 * 8];
        for b0 in 0..2usize {
            for b1 in 0..2usize {
                for b2 in 0..2usize {
                    let y = b0 ^ b1;
                    let p = 0.25 * 0.5;
                    let code = b0 * 4 + b1 * 2 + b2;
                    table[y * 8 + code] += p;
                }
            }
        }
        DiscreteExactSurrogate::new(levels, 2, table).unwrap()
    }

    #[test]
    fn posterior_is_direct_normalization() {
        let t = xor_table();
        // Before any evidence both classes equally likely.
        assert_eq!(t.posterior(&[]).unwrap(), vec![0.5, 0.5]);
        // One XOR bit alone says nothing.
        let p = t.posterior(&[(0, 1)]).unwrap();
        assert_relative_eq!(p[0], 0.5, epsilon = 1e-12);
        // Both bits are decisive.
        let p = t.posterior(&[(0, 1), (1, 1)]).unwrap();
        assert_relative_eq!(p[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn xor_has_zero_marginal_and_positive_pairwise_mi() {
        let t = xor_table();
        for i in 0..3 {
            assert_relative_eq!(t.exact_mi_label_form(&[], i).unwrap(), 0.0, epsilon = 1e-12);
        }
        let mi = t.exact_mi_label_form(&[(0, 0)], 1).unwrap();
        assert_relative_eq!(mi, std::f64::consts::LN_2, epsilon = 1e-12);
        // The noise bit stays useless.
        let mi_noise = t.exact_mi_label_form(&[(0, 0)], 2).unwrap();
        assert_relative_eq!(mi_noise, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn mi_forms_agree() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        use rand::SeedableRng;
        let t = DiscreteExactSurrogate::random(vec![2, 3, 2], 2, &mut rng, 0.7);
        for i in 0..3 {
            let a = t.exact_mi_label_form(&[], i).unwrap();
            let b = t.exact_mi_feature_form(&[], i).unwrap();
            let c = t.exact_mi_kl_form(&[], i).unwrap();
            assert_relative_eq!(a, b, epsilon = 1e-12);
            assert_relative_eq!(a, c, epsilon = 1e-12);
        }
        let obs = [(1usize, 2usize)];
        let a = t.exact_mi_label_form(&obs, 2).unwrap();
        let b = t.exact_mi_feature_form(&obs, 2).unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn log_prob_features_matches_hand_enumeration() {
        let t = xor_table();
        // p(x_1 = 1 | x_0 = 1) marginalizing y: bits independent, so 0.5.
        let lp = t.log_prob_features_given(&[(1, 1)], &[(0, 1)]).unwrap();
        assert_relative_eq!(lp, 0.5_f64.ln(), epsilon = 1e-12);
        // Joint of the two free bits given nothing: 0.25.
        let lp = t.log_prob_features_given(&[(1, 1), (2, 0)], &[]).unwrap();
        assert_relative_eq!(lp, 0.25_f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn sampling_matches_table_frequencies() {
        use rand::SeedableRng;
        let t = xor_table();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 20_000;
        let mut count_y1 = 0;
        for _ in 0..n {
            let (y, x) = t.sample_cell(&mut rng);
            assert_eq!(y, x[0] ^ x[1]);
            count_y1 += y;
        }
        let freq = count_y1 as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.02, "freq {freq}");
    }
}
