use serde::{Deserialize, Serialize};

/// Bernoulli naive Bayes over features binarized at `x > 0`, with additive
/// smoothing `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliNb {
    pub alpha: f64,
    log_prior: Vec<f64>,
    /// Per class: `sum_f ln(1 - p_cf)`.
    base: Vec<f64>,
    /// Per class and feature: `ln p_cf - ln(1 - p_cf)`.
    delta: Vec<Vec<f64>>,
}

impl BernoulliNb {
    pub fn new(alpha: f64) -> Self {
        BernoulliNb {
            alpha,
            log_prior: Vec::new(),
            base: Vec::new(),
            delta: Vec::new(),
        }
    }

    pub fn fit(&mut self, x: &[Vec<f64>], y: &[usize], n_classes: usize) {
        let d = x.first().map_or(0, Vec::len);
        let mut count = vec![0usize; n_classes];
        let mut on = vec![vec![0usize; d]; n_classes];
        for (row, &c) in x.iter().zip(y) {
            count[c] += 1;
            for (f, &v) in row.iter().enumerate() {
                if v > 0.0 {
                    on[c][f] += 1;
                }
            }
        }
        let n = x.len().max(1) as f64;
        self.log_prior = count.iter().map(|&c| (c as f64 / n).ln()).collect();
        self.base = vec![0.0; n_classes];
        self.delta = vec![vec![0.0; d]; n_classes];
        for c in 0..n_classes {
            for f in 0..d {
                let p = (on[c][f] as f64 + self.alpha) / (count[c] as f64 + 2.0 * self.alpha);
                self.base[c] += (1.0 - p).ln();
                self.delta[c][f] = p.ln() - (1.0 - p).ln();
            }
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let jll: Vec<f64> = (0..self.base.len())
            .map(|c| {
                let mut s = self.log_prior[c] + self.base[c];
                for (f, &v) in x.iter().enumerate() {
                    if v > 0.0 {
                        s += self.delta[c][f];
                    }
                }
                s
            })
            .collect();
        crate::nn::softmax(&jll)
    }
}
