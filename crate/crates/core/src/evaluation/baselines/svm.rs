use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// RBF kernel width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gamma {
    /// `1 / n_features`.
    Auto,
    Value(f64),
}

fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d).exp()
}

/// One binary soft-margin machine: support vectors with `alpha_i y_i` and
/// the offset `rho`, so that `f(x) = sum coef_i K(sv_i, x) - rho`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct BinaryMachine {
    support: Vec<usize>,
    coef: Vec<f64>,
    rho: f64,
}

const TAU: f64 = 1e-12;

/// Sequential minimal optimization with maximal-violating-pair selection
/// on the dual `min 1/2 a'Qa - e'a`, `0 <= a <= c`, `y'a = 0`.
fn solve(k: &[Vec<f64>], y: &[f64], c: f64, eps: f64, max_iter: usize) -> BinaryMachine {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut g = vec![-1.0; n];
    let q = |i: usize, j: usize| y[i] * y[j] * k[i][j];
    let up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);
    for _ in 0..max_iter {
        let (mut i, mut gmax) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut gmin) = (usize::MAX, f64::INFINITY);
        for t in 0..n {
            let v = -y[t] * g[t];
            if up(alpha[t], y[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if low(alpha[t], y[t]) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < eps {
            break;
        }
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        if y[i] != y[j] {
            let quad = (k[i][i] + k[j][j] + 2.0 * q(i, j)).max(TAU);
            let delta = (-g[i] - g[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = (k[i][i] + k[j][j] - 2.0 * q(i, j)).max(TAU);
            let delta = (g[i] - g[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            g[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * g[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            free_sum += yg;
        }
    }
    let rho = if n_free > 0 { free_sum / n_free as f64 } else { (ub + lb) / 2.0 };
    let support: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    let coef = support.iter().map(|&t| alpha[t] * y[t]).collect();
    BinaryMachine { support, coef, rho }
}

/// RBF support vector classifier, one machine per class against the rest
/// (a single machine for two classes). Scores pass the decision values
/// through a logistic (binary) or softmax (multi-class) squashing; they rank
/// correctly but are not calibrated probabilities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Svm {
    pub c: f64,
    pub gamma: Gamma,
    pub tolerance: f64,
    rows: Vec<Vec<f64>>,
    gamma_value: f64,
    machines: Vec<BinaryMachine>,
}

impl Svm {
    pub fn new(c: f64, gamma: Gamma) -> Self {
        Svm {
            c,
            gamma,
            tolerance: 1e-3,
            rows: Vec::new(),
            gamma_value: 0.0,
            machines: Vec::new(),
        }
    }

    pub fn fit(&mut self, x: &[Vec<f64>], y: &[usize], n_classes: usize) {
        let d = x.first().map_or(1, Vec::len).max(1);
        self.gamma_value = match self.gamma {
            Gamma::Auto => 1.0 / d as f64,
            Gamma::Value(g) => g,
        };
        let gamma = self.gamma_value;
        let k: Vec<Vec<f64>> = x
            .par_iter()
            .map(|a| x.iter().map(|b| rbf(gamma, a, b)).collect())
            .collect();
        let positives: Vec<usize> = if n_classes == 2 { vec![1] } else { (0..n_classes).collect() };
        let max_iter = (100 * x.len()).max(10_000_000);
        self.machines = positives
            .par_iter()
            .map(|&p| {
                let ys: Vec<f64> = y.iter().map(|&c| if c == p { 1.0 } else { -1.0 }).collect();
                solve(&k, &ys, self.c, self.tolerance, max_iter)
            })
            .collect();
        self.rows = x.to_vec();
    }

    pub fn decision(&self, x: &[f64]) -> Vec<f64> {
        self.machines
            .iter()
            .map(|m| {
                m.support
                    .iter()
                    .zip(&m.coef)
                    .map(|(&s, &a)| a * rbf(self.gamma_value, &self.rows[s], x))
                    .sum::<f64>()
                    - m.rho
            })
            .collect()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let f = self.decision(x);
        if f.len() == 1 {
            let p = crate::nn::sigmoid(f[0]);
            vec![1.0 - p, p]
        } else {
            crate::nn::softmax(&f)
        }
    }

    pub fn n_support(&self) -> usize {
        self.machines.iter().map(|m| m.support.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_two_clusters() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let t = i as f64 * 0.05;
            x.push(vec![t, 0.0]);
            y.push(0);
            x.push(vec![t, 2.0]);
            y.push(1);
        }
        let mut s = Svm::new(10.0, Gamma::Value(0.5));
        s.fit(&x, &y, 2);
        assert!(s.decision(&[0.5, 2.0])[0] > 0.0);
        assert!(s.decision(&[0.5, 0.0])[0] < 0.0);
        assert!(s.n_support() < x.len());
    }

    #[test]
    fn kkt_conditions_hold_on_a_small_problem() {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![(i as f64).sin(), (i as f64 * 0.7).cos()]).collect();
        let y: Vec<f64> = (0..12).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let k: Vec<Vec<f64>> = x.iter().map(|a| x.iter().map(|b| rbf(1.0, a, b)).collect()).collect();
        let c = 10.0;
        let m = solve(&k, &y, c, 1e-6, 1_000_000);
        let mut alpha = vec![0.0; 12];
        for (s, a) in m.support.iter().zip(&m.coef) {
            alpha[*s] = a * y[*s];
        }
        let sum: f64 = alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        assert!(sum.abs() < 1e-9);
        for t in 0..12 {
            let f: f64 = (0..12).map(|s| alpha[s] * y[s] * k[s][t]).sum::<f64>() - m.rho;
            let margin = y[t] * f;
            if alpha[t] < 1e-9 {
                assert!(margin >= 1.0 - 1e-3, "{t}: {margin}");
            } else if alpha[t] > c - 1e-9 {
                assert!(margin <= 1.0 + 1e-3);
            } else {
                assert!((margin - 1.0).abs() < 1e-3);
            }
        }
    }
}
