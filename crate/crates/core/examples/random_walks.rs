//! Keyword-seeded random walks. The first part checks the walker against a
//! graph with a known per-hop hit probability; the second runs a small
//! campaign on the demo world and reports hit rates per keyword cluster.

use vidsafe::features::Dictionary;
use vidsafe::synthetic::{calibration_world, demo_world, CALIBRATION_KEYWORD};
use vidsafe::walker::{
    cluster_keywords, groups_from_clusters, hop_report, hop_report_tsv, random_walk, run_campaign, sanitize_keywords,
    KmeansOptions, WalkOptions,
};

fn main() -> vidsafe::Result<()> {
    let (f, oracle) = calibration_world(200, 20, 0);
    let opts = WalkOptions::default();
    let n = 2000;
    let hits = (0..n as u64)
        .filter(|&s| random_walk(CALIBRATION_KEYWORD, &opts, &f, &oracle, s).first_hit.is_some())
        .count();
    println!(
        "calibration: {:.4} of walks hit within 10 hops (expected {:.4})",
        hits as f64 / n as f64,
        1.0 - 0.9f64.powi(10)
    );

    let w = demo_world(400, 7);
    let raw: Vec<String> = w
        .elsagate_keywords
        .iter()
        .chain(&w.child_keywords)
        .cloned()
        .chain(["spiderman kill".to_string()])
        .collect();
    let clean = sanitize_keywords(&raw, &Dictionary::from_terms(["kill"]));
    println!("keywords after sanitizing: {:?}", clean.keywords);
    let traces = run_campaign(&clean.keywords, 25, &opts, &w.provider, &w.labels, 42, None)?;
    let clusters = cluster_keywords(&clean.keywords, 2, &KmeansOptions::default())?;
    let mut groups = vec![("all".to_string(), clean.keywords.iter().cloned().collect())];
    groups.extend(groups_from_clusters(&clusters));
    print!("{}", hop_report_tsv(&hop_report(&traces, &groups, 10)));
    Ok(())
}
