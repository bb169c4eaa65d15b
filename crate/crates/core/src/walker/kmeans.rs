use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::tokenize_and_stem;
use crate::nn::train::mix_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordCluster {
    pub id: usize,
    /// Assigned afterwards from a mapping file.
    pub name: Option<String>,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KmeansOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for KmeansOptions {
    fn default() -> Self {
        KmeansOptions {
            restarts: 10,
            max_iter: 300,
            seed: 0,
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    centroids
        .iter()
        .enumerate()
        .map(|(j, c)| (j, sq_dist(p, c)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// Within-cluster sum of squared distances to the cluster means.
pub fn sse(points: &[Vec<f64>], assign: &[usize], k: usize) -> f64 {
    let centroids = means(points, assign, k);
    points.iter().zip(assign).map(|(p, &a)| sq_dist(p, &centroids[a])).sum()
}

fn means(points: &[Vec<f64>], assign: &[usize], k: usize) -> Vec<Vec<f64>> {
    let d = points.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assign) {
        counts[a] += 1;
        for (s, x) in sums[a].iter_mut().zip(p) {
            *s += x;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    sums
}

/// k-means++ seeding.
fn init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut c = vec![points[rng.gen_range(0..points.len())].clone()];
    while c.len() < k {
        let d: Vec<f64> = points.iter().map(|p| nearest(p, &c).1).collect();
        let total: f64 = d.iter().sum();
        let pick = if total <= 0.0 {
            rng.gen_range(0..points.len())
        } else {
            let mut r = rng.gen::<f64>() * total;
            d.iter()
                .position(|&w| {
                    r -= w;
                    r <= 0.0
                })
                .unwrap_or(points.len() - 1)
        };
        c.push(points[pick].clone());
    }
    c
}

fn lloyd(points: &[Vec<f64>], k: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64) {
    let mut centroids = init(points, k, rng);
    let mut assign = vec![usize::MAX; points.len()];
    for _ in 0..max_iter {
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids).0).collect();
        if next == assign {
            break;
        }
        assign = next;
        centroids = means(points, &assign, k);
        // Re-seed empty clusters with the point farthest from its centroid.
        for j in 0..k {
            if !assign.contains(&j) {
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        sq_dist(&points[a], &centroids[assign[a]]).total_cmp(&sq_dist(&points[b], &centroids[assign[b]]))
                    })
                    .expect("non-empty input");
                assign[far] = j;
                centroids = means(points, &assign, k);
            }
        }
    }
    let cost = points.iter().zip(&assign).map(|(p, &a)| sq_dist(p, &centroids[a])).sum();
    (assign, cost)
}

/// Lloyd's algorithm with k-means++ seeding, keeping the lowest-cost run of
/// `opts.restarts`. Cluster ids are renumbered in order of first appearance.
pub fn kmeans(points: &[Vec<f64>], k: usize, opts: &KmeansOptions) -> Result<Vec<usize>> {
    if k == 0 || k > points.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must lie between 1 and the number of points ({})",
            points.len()
        )));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for r in 0..opts.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[opts.seed, r as u64]));
        let (assign, cost) = lloyd(points, k, opts.max_iter, &mut rng);
        if best.as_ref().is_none_or(|(_, c)| cost < *c - 1e-12) {
            best = Some((assign, cost));
        }
    }
    let (assign, _) = best.expect("at least one restart");
    let mut renumber = BTreeMap::new();
    Ok(assign
        .into_iter()
        .map(|a| {
            let next = renumber.len();
            *renumber.entry(a).or_insert(next)
        })
        .collect())
}

/// Cluster keywords on stem term-frequency vectors.
pub fn cluster_keywords<S: AsRef<str>>(keywords: &[S], k: usize, opts: &KmeansOptions) -> Result<Vec<KeywordCluster>> {
    let docs: Vec<Vec<String>> = keywords.iter().map(|k| tokenize_and_stem(k.as_ref())).collect();
    let mut vocab = BTreeMap::new();
    for d in &docs {
        for t in d {
            let next = vocab.len();
            vocab.entry(t.clone()).or_insert(next);
        }
    }
    let points: Vec<Vec<f64>> = docs
        .iter()
        .map(|d| {
            let mut v = vec![0.0; vocab.len()];
            for t in d {
                v[vocab[t]] += 1.0;
            }
            v
        })
        .collect();
    let assign = kmeans(&points, k, opts)?;
    let mut clusters: Vec<KeywordCluster> = (0..k)
        .map(|id| KeywordCluster {
            id,
            name: None,
            members: Vec::new(),
        })
        .collect();
    for (kw, a) in keywords.iter().zip(assign) {
        clusters[a].members.push(kw.as_ref().to_string());
    }
    Ok(clusters)
}

/// Attach names from `cluster_id<TAB>name` lines.
pub fn apply_cluster_names(clusters: &mut [KeywordCluster], mapping: &str) -> Result<()> {
    for (i, line) in mapping.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, name) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(format!("cluster names line {}", i + 1), "expected cluster_id<TAB>name"))?;
        let id: usize = id
            .trim()
            .parse()
            .map_err(|e| Error::parse(format!("cluster names line {}", i + 1), e))?;
        let c = clusters
            .iter_mut()
            .find(|c| c.id == id)
            .ok_or_else(|| Error::parse(format!("cluster names line {}", i + 1), format!("no cluster {id}")))?;
        c.name = Some(name.trim().to_string());
    }
    Ok(())
}
