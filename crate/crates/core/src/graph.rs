//! The labelled recommendation graph: prevalence of inappropriate videos per
//! collection subset and counts of transitions between label classes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{BinaryLabel, Dataset, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphOptions {
    /// Out-degree above which a node is reported as a crawl breach.
    pub max_out_degree: usize,
    pub include_self_loops: bool,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions {
            max_out_degree: 10,
            include_self_loops: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecGraph {
    pub labels: BTreeMap<String, BinaryLabel>,
    /// Deduplicated edges whose endpoints are both labelled.
    pub edges: BTreeSet<(String, String)>,
    /// Edges with an unlabelled endpoint.
    pub quarantined: BTreeSet<(String, String)>,
    /// Edges pointing at a video whose metadata was never fetched.
    pub unfetched_destinations: usize,
    pub self_loops_dropped: usize,
    /// Nodes with more raw out-edges than the crawl allows, with their degree.
    pub fanout_breaches: BTreeMap<String, usize>,
}

impl RecGraph {
    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn unlabeled_nodes(&self) -> BTreeSet<&str> {
        self.quarantined
            .iter()
            .flat_map(|(a, b)| [a.as_str(), b.as_str()])
            .filter(|n| !self.labels.contains_key(*n))
            .collect()
    }
}

/// Build the graph from raw `(from, to)` pairs. Duplicates collapse to one
/// edge; `unfetched` lists destinations without metadata.
pub fn build_graph_from_edges<'a>(
    edges: impl IntoIterator<Item = (&'a str, &'a str)>,
    labels: &BTreeMap<String, BinaryLabel>,
    unfetched: &BTreeSet<String>,
    opts: GraphOptions,
) -> RecGraph {
    let mut g = RecGraph {
        labels: labels.clone(),
        ..RecGraph::default()
    };
    let mut raw_degree: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (from, to) in edges {
        raw_degree.entry(from).or_default().insert(to);
        if unfetched.contains(to) {
            g.unfetched_destinations += 1;
            continue;
        }
        if from == to && !opts.include_self_loops {
            g.self_loops_dropped += 1;
            continue;
        }
        let e = (from.to_string(), to.to_string());
        if labels.contains_key(from) && labels.contains_key(to) {
            g.edges.insert(e);
        } else {
            g.quarantined.insert(e);
        }
    }
    for (node, outs) in raw_degree {
        if outs.len() > opts.max_out_degree {
            log::warn!("{node} has {} recommendations, above the crawl fanout", outs.len());
            g.fanout_breaches.insert(node.to_string(), outs.len());
        }
    }
    if !g.quarantined.is_empty() {
        log::info!("{} edges quarantined for unlabelled endpoints", g.quarantined.len());
    }
    g
}

pub fn build_graph(d: &Dataset, labels: &BTreeMap<String, BinaryLabel>, opts: GraphOptions) -> RecGraph {
    let edges: Vec<_> = d.edges().collect();
    build_graph_from_edges(
        edges.iter().map(|e| (e.from.as_str(), e.to.as_str())),
        labels,
        d.unfetched(),
        opts,
    )
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub aa: usize,
    pub ai: usize,
    pub ia: usize,
    pub ii: usize,
}

impl TransitionMatrix {
    pub fn total(&self) -> usize {
        self.aa + self.ai + self.ia + self.ii
    }

    pub fn get(&self, from: BinaryLabel, to: BinaryLabel) -> usize {
        use BinaryLabel::*;
        match (from, to) {
            (Appropriate, Appropriate) => self.aa,
            (Appropriate, Inappropriate) => self.ai,
            (Inappropriate, Appropriate) => self.ia,
            (Inappropriate, Inappropriate) => self.ii,
        }
    }

    fn bump(&mut self, from: BinaryLabel, to: BinaryLabel) {
        use BinaryLabel::*;
        *match (from, to) {
            (Appropriate, Appropriate) => &mut self.aa,
            (Appropriate, Inappropriate) => &mut self.ai,
            (Inappropriate, Appropriate) => &mut self.ia,
            (Inappropriate, Inappropriate) => &mut self.ii,
        } += 1;
    }

    /// Share of edges leaving class `from` that land in `to`, or `None` when
    /// `from` has no outgoing edges.
    pub fn row_fraction(&self, from: BinaryLabel, to: BinaryLabel) -> Option<f64> {
        let row = self.get(from, BinaryLabel::Appropriate) + self.get(from, BinaryLabel::Inappropriate);
        (row > 0).then(|| self.get(from, to) as f64 / row as f64)
    }

    /// Share of all edges in the cell.
    pub fn fraction(&self, from: BinaryLabel, to: BinaryLabel) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.get(from, to) as f64 / t as f64,
        }
    }
}

fn count_edges<'a>(g: &'a RecGraph, edges: impl Iterator<Item = &'a (String, String)>) -> TransitionMatrix {
    let mut m = TransitionMatrix::default();
    for (a, b) in edges {
        m.bump(g.labels[a], g.labels[b]);
    }
    m
}

pub fn transitions(g: &RecGraph) -> TransitionMatrix {
    count_edges(g, g.edges.iter())
}

/// Transitions restricted to edges whose source entered the crawl through
/// each seed strategy.
pub fn transitions_by_subset(g: &RecGraph, d: &Dataset) -> BTreeMap<Strategy, TransitionMatrix> {
    Strategy::ALL
        .iter()
        .map(|&s| {
            let edges = g
                .edges
                .iter()
                .filter(|(a, _)| d.get(a).is_some_and(|r| r.origins.contains(&s)));
            (s, count_edges(g, edges))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceRow {
    pub subset: String,
    pub appropriate: usize,
    pub inappropriate: usize,
}

impl PrevalenceRow {
    pub fn count<'a>(subset: impl Into<String>, labels: impl IntoIterator<Item = &'a BinaryLabel>) -> Self {
        let mut row = PrevalenceRow {
            subset: subset.into(),
            appropriate: 0,
            inappropriate: 0,
        };
        for l in labels {
            match l {
                BinaryLabel::Appropriate => row.appropriate += 1,
                BinaryLabel::Inappropriate => row.inappropriate += 1,
            }
        }
        row
    }

    pub fn total(&self) -> usize {
        self.appropriate + self.inappropriate
    }

    /// `(appropriate, inappropriate)` fractions; zeros for an empty subset.
    pub fn fractions(&self) -> (f64, f64) {
        match self.total() {
            0 => (0.0, 0.0),
            t => (self.appropriate as f64 / t as f64, self.inappropriate as f64 / t as f64),
        }
    }
}

/// Label counts per seed strategy, then over every labelled video.
pub fn prevalence(d: &Dataset, labels: &BTreeMap<String, BinaryLabel>) -> Vec<PrevalenceRow> {
    let mut rows: Vec<PrevalenceRow> = Strategy::ALL
        .iter()
        .map(|s| {
            PrevalenceRow::count(
                s.as_str(),
                d.videos()
                    .filter(|r| r.origins.contains(s))
                    .filter_map(|r| labels.get(&r.video_id)),
            )
        })
        .collect();
    rows.push(PrevalenceRow::count(
        "all",
        d.video_ids().filter_map(|id| labels.get(id)),
    ));
    rows
}

pub fn prevalence_tsv(rows: &[PrevalenceRow]) -> String {
    let mut s = String::from("subset\tappropriate\tinappropriate\tappropriate_pct\tinappropriate_pct\n");
    for r in rows {
        let (a, i) = r.fractions();
        s.push_str(&format!(
            "{}\t{}\t{}\t{:.2}\t{:.2}\n",
            r.subset,
            r.appropriate,
            r.inappropriate,
            100.0 * a,
            100.0 * i
        ));
    }
    s
}

/// Rows are source→destination pairs; columns are subsets, each cell
/// `count (percent of the subset's edges)`.
pub fn transitions_tsv(by_subset: &[(String, TransitionMatrix)]) -> String {
    use BinaryLabel::*;
    let mut s = String::from("source\tdestination");
    for (name, _) in by_subset {
        s.push('\t');
        s.push_str(name);
    }
    s.push('\n');
    for (from, to) in [
        (Appropriate, Appropriate),
        (Appropriate, Inappropriate),
        (Inappropriate, Appropriate),
        (Inappropriate, Inappropriate),
    ] {
        s.push_str(&format!("{from}\t{to}"));
        for (_, m) in by_subset {
            s.push_str(&format!("\t{} ({:.2}%)", m.get(from, to), 100.0 * m.fraction(from, to)));
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use BinaryLabel::*;

    fn labels(pairs: &[(&str, BinaryLabel)]) -> BTreeMap<String, BinaryLabel> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn worked_transition_example() {
        let l = labels(&[("A1", Appropriate), ("A2", Appropriate), ("I1", Inappropriate)]);
        let g = build_graph_from_edges(
            [("A1", "A2"), ("A1", "I1"), ("I1", "A2")],
            &l,
            &BTreeSet::new(),
            GraphOptions::default(),
        );
        let m = transitions(&g);
        assert_eq!(m, TransitionMatrix { aa: 1, ai: 1, ia: 1, ii: 0 });
        assert_eq!(m.row_fraction(Appropriate, Inappropriate), Some(0.5));
        assert_eq!(m.row_fraction(Inappropriate, Appropriate), Some(1.0));
    }

    #[test]
    fn duplicates_collapse_and_breaches_are_flagged() {
        let l = labels(&[("a", Appropriate), ("b", Appropriate)]);
        let g = build_graph_from_edges([("a", "b"), ("a", "b")], &l, &BTreeSet::new(), GraphOptions::default());
        assert_eq!(g.edge_count(), 1);

        let targets: Vec<String> = (0..12).map(|i| format!("t{i}")).collect();
        let g = build_graph_from_edges(
            targets.iter().map(|t| ("a", t.as_str())),
            &l,
            &BTreeSet::new(),
            GraphOptions::default(),
        );
        assert_eq!(g.fanout_breaches.get("a"), Some(&12));
        assert_eq!(g.quarantined.len(), 12);
        assert_eq!(g.unlabeled_nodes().len(), 12);
    }

    #[test]
    fn self_loops_and_unfetched_destinations() {
        let l = labels(&[("a", Inappropriate), ("b", Appropriate)]);
        let unfetched: BTreeSet<String> = ["gone".to_string()].into();
        let edges = [("a", "a"), ("a", "b"), ("b", "gone")];
        let g = build_graph_from_edges(edges, &l, &unfetched, GraphOptions::default());
        assert_eq!(transitions(&g).ii, 1);
        assert_eq!(g.unfetched_destinations, 1);
        let opts = GraphOptions {
            include_self_loops: false,
            ..GraphOptions::default()
        };
        let g = build_graph_from_edges(edges, &l, &unfetched, opts);
        assert_eq!(transitions(&g).total(), 1);
        assert_eq!(g.self_loops_dropped, 1);
    }

    #[test]
    fn prevalence_counts() {
        let mut row = PrevalenceRow::count("x", [Appropriate; 7].iter().chain(&[Inappropriate; 3]));
        assert_eq!(row.fractions(), (0.7, 0.3));
        row = PrevalenceRow::count("empty", []);
        assert_eq!((row.total(), row.fractions()), (0, (0.0, 0.0)));
    }

    proptest! {
        #[test]
        fn transitions_are_order_free_and_conserve_edges(
            n in 1usize..30,
            raw in prop::collection::vec((0usize..30, 0usize..30), 0..120),
            bits in prop::collection::vec(any::<bool>(), 30),
            seed: u64,
        ) {
            let l: BTreeMap<String, BinaryLabel> = (0..n)
                .map(|i| (format!("v{i}"), if bits[i] { Inappropriate } else { Appropriate }))
                .collect();
            let names: Vec<(String, String)> = raw.iter().map(|(a, b)| (format!("v{}", a % n), format!("v{}", b % n))).collect();
            let g = build_graph_from_edges(names.iter().map(|(a, b)| (a.as_str(), b.as_str())), &l, &BTreeSet::new(), GraphOptions { max_out_degree: usize::MAX, include_self_loops: true });
            let m = transitions(&g);
            prop_assert_eq!(m.total(), g.edge_count());

            let mut shuffled = names.clone();
            use rand::{seq::SliceRandom, SeedableRng};
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let g2 = build_graph_from_edges(shuffled.iter().map(|(a, b)| (a.as_str(), b.as_str())), &l, &BTreeSet::new(), GraphOptions { max_out_degree: usize::MAX, include_self_loops: true });
            prop_assert_eq!(transitions(&g2), m);
            for from in [Appropriate, Inappropriate] {
                if let Some(x) = m.row_fraction(from, Appropriate) {
                    let y = m.row_fraction(from, Inappropriate).unwrap();
                    prop_assert!((0.0..=1.0).contains(&x));
                    prop_assert!((x + y - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
