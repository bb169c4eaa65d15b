//! Seed collection, a three-hop snowball through recommendations and an
//! availability audit, all against an in-memory replay fixture.

use chrono::{TimeZone, Utc};
use vidsafe::ingestion::{audit_availability, audit_tsv, collect_seeds, snowball, CrawlPlan};
use vidsafe::synthetic::{demo_world, ground_truth_from_binary};
use vidsafe::Strategy;

fn main() -> vidsafe::Result<()> {
    let w = demo_world(600, 1);
    let plan = CrawlPlan {
        elsagate_keywords: w.elsagate_keywords.clone(),
        elsagate_channels: w.channels.clone(),
        child_keywords: w.child_keywords.clone(),
        random_count: 20,
        popular_regions: w.regions.clone(),
        ..CrawlPlan::default()
    };
    let seeds = collect_seeds(&plan, &w.provider)?;
    println!("seed videos: {}", seeds.dataset.len());
    for s in Strategy::ALL {
        let n = seeds.dataset.videos().filter(|v| v.origins.contains(&s)).count();
        println!("  {:<20} {n}", s.as_str());
    }
    let crawl = snowball(&seeds.dataset, &plan, &w.provider)?;
    let mut d = crawl.dataset;
    println!(
        "after snowball: {} videos, {} edges, {} unfetched, {} failed requests",
        d.len(),
        d.edge_count(),
        d.unfetched().len(),
        crawl.failures.len()
    );
    println!(
        "most fetches of a single video: {}",
        w.provider.fetch_counts().values().max().copied().unwrap_or(0)
    );

    ground_truth_from_binary(&mut d, &w.labels.0);
    let audit = audit_availability(&d, &w.provider, Utc.with_ymd_and_hms(2019, 1, 1, 0, 0, 0).unwrap())?;
    print!("\n{}", audit_tsv(&audit));
    Ok(())
}
