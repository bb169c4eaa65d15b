//! Prevalence of inappropriate videos per seed strategy and the counts of
//! class transitions along recommendation edges.

use vidsafe::graph::{build_graph, prevalence, prevalence_tsv, transitions, transitions_by_subset, transitions_tsv, GraphOptions};
use vidsafe::ingestion::{collect_seeds, snowball, CrawlPlan};
use vidsafe::synthetic::demo_world;

fn main() -> vidsafe::Result<()> {
    let w = demo_world(500, 2);
    let plan = CrawlPlan {
        elsagate_keywords: w.elsagate_keywords.clone(),
        child_keywords: w.child_keywords.clone(),
        random_count: 20,
        popular_regions: w.regions.clone(),
        depth: 2,
        ..CrawlPlan::default()
    };
    let seeds = collect_seeds(&plan, &w.provider)?;
    let d = snowball(&seeds.dataset, &plan, &w.provider)?.dataset;
    let labels = &w.labels.0;

    print!("{}\n", prevalence_tsv(&prevalence(&d, labels)));
    let g = build_graph(&d, labels, GraphOptions::default());
    let mut subsets = vec![("all".to_string(), transitions(&g))];
    subsets.extend(transitions_by_subset(&g, &d).into_iter().map(|(s, t)| (s.as_str().to_string(), t)));
    print!("{}", transitions_tsv(&subsets));
    Ok(())
}
