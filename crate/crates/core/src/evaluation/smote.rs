use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// One synthetic sample: `row = rows[base] + gap * (rows[neighbor] - rows[base])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Synthetic {
    pub label: usize,
    pub base: usize,
    pub neighbor: usize,
    pub gap: f64,
    pub row: Vec<f64>,
}

impl Synthetic {
    /// The source sample the synthetic point lies closer to.
    pub fn nearer(&self) -> usize {
        if self.gap <= 0.5 {
            self.base
        } else {
            self.neighbor
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices (into `members`) of the `k` nearest other members of `members[i]`.
fn nearest(rows: &[Vec<f64>], members: &[usize], i: usize, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = members
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, &m)| (sq_dist(&rows[members[i]], &rows[m]), j))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Synthetic samples that bring every class up to the majority count.
///
/// Each sample interpolates a uniformly drawn class member towards one of
/// its `k` nearest same-class neighbours. A class with a single member is
/// duplicated instead.
pub fn smote(rows: &[Vec<f64>], labels: &[usize], k: usize, seed: u64) -> Vec<Synthetic> {
    let mut by: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &y) in labels.iter().enumerate() {
        by.entry(y).or_default().push(i);
    }
    let majority = by.values().map(Vec::len).max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x736d_6f74);
    let mut out = Vec::new();
    for (&label, members) in &by {
        let need = majority - members.len();
        if need == 0 {
            continue;
        }
        if members.len() == 1 {
            log::warn!("class {label} has a single sample; duplicating it {need} times");
            let m = members[0];
            out.extend((0..need).map(|_| Synthetic {
                label,
                base: m,
                neighbor: m,
                gap: 0.0,
                row: rows[m].clone(),
            }));
            continue;
        }
        let k_eff = k.clamp(1, members.len() - 1);
        let neighbors: Vec<Vec<usize>> = (0..members.len()).map(|i| nearest(rows, members, i, k_eff)).collect();
        for _ in 0..need {
            let i = rng.gen_range(0..members.len());
            let j = neighbors[i][rng.gen_range(0..k_eff)];
            let gap: f64 = rng.gen();
            let (a, b) = (&rows[members[i]], &rows[members[j]]);
            let row = a.iter().zip(b).map(|(x, y)| x + gap * (y - x)).collect();
            out.push(Synthetic {
                label,
                base: members[i],
                neighbor: members[j],
                gap,
                row,
            });
        }
    }
    out
}

/// Original rows and labels followed by the SMOTE samples.
pub fn smote_balance(rows: &[Vec<f64>], labels: &[usize], k: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let synth = smote(rows, labels, k, seed);
    let mut r = rows.to_vec();
    let mut l = labels.to_vec();
    for s in synth {
        r.push(s.row);
        l.push(s.label);
    }
    (r, l)
}
