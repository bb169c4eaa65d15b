//! Write a small replayable world to disk: a provider fixture, binary
//! labels for every video, and the keyword, channel and region files the
//! `collect` and `walk` commands take.
//!
//! ```text
//! cargo run --example demo_world -- /tmp/demo
//! vidsafe collect --fixtures /tmp/demo/fixtures \
//!     --elsagate-keywords /tmp/demo/elsagate.txt --child-keywords /tmp/demo/child.txt \
//!     --regions /tmp/demo/regions.txt --random 20 --out /tmp/demo/crawl
//! ```

use std::path::PathBuf;

use vidsafe::io::atomic_write;
use vidsafe::synthetic::demo_world;

fn main() -> vidsafe::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "demo".into()));
    let w = demo_world(400, 7);
    w.provider.save_dir(dir.join("fixtures"))?;
    let labels: String = w
        .labels
        .0
        .iter()
        .map(|(id, l)| format!("{id}\t{}\n", l.as_str()))
        .collect();
    atomic_write(dir.join("labels.tsv"), labels.as_bytes())?;
    for (name, lines) in [
        ("elsagate.txt", &w.elsagate_keywords),
        ("child.txt", &w.child_keywords),
        ("channels.txt", &w.channels),
        ("regions.txt", &w.regions),
    ] {
        atomic_write(dir.join(name), (lines.join("\n") + "\n").as_bytes())?;
    }
    let keywords: Vec<String> = w.elsagate_keywords.iter().chain(&w.child_keywords).cloned().collect();
    atomic_write(dir.join("keywords.txt"), (keywords.join("\n") + "\n").as_bytes())?;
    println!("wrote {} videos to {}", w.labels.0.len(), dir.display());
    Ok(())
}
