//! On-disk formats.
//!
//! A dataset directory holds:
//!
//! * `videos.jsonl` - one [`VideoRecord`] JSON object per line;
//! * `edges.tsv` - `from_id<TAB>to_id<TAB>hop` lines;
//! * `unfetched.txt` - ids of edge endpoints whose metadata could not be fetched;
//! * `ground_truth.jsonl` - optional, one [`GroundTruthEntry`] per line.
//!
//! All writes go through [`atomic_write`] (temp file and rename).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{BinaryLabel, Dataset, GroundTruthEntry, VideoRecord};

pub const VIDEOS_FILE: &str = "videos.jsonl";
pub const EDGES_FILE: &str = "edges.tsv";
pub const UNFETCHED_FILE: &str = "unfetched.txt";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.jsonl";

/// Write `contents` to a sibling temp file, then rename it over `path`.
pub fn atomic_write(path: impl AsRef<Path>, contents: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = path.with_file_name(format!(".{file_name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(contents).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_to_string(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn read_bytes(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Non-empty, trimmed lines; lines starting with `#` are comments.
pub fn read_lines(path: impl AsRef<Path>) -> Result<Vec<String>> {
    Ok(parse_lines(&read_to_string(path)?))
}

pub fn parse_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

pub fn to_jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> Result<String> {
    let mut out = String::new();
    for item in items {
        let line = serde_json::to_string(&item)
            .map_err(|e| Error::parse("serialization", e))?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: impl IntoIterator<Item = T>) -> Result<()> {
    atomic_write(path, to_jsonl(items)?.as_bytes())
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(line)
            .map_err(|e| Error::parse(format!("{}:{}", path.display(), i + 1), e))?;
        out.push(item);
    }
    Ok(out)
}

/// A line of `videos.jsonl` that could not be turned into a record.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedLine {
    pub line: usize,
    pub video_id: Option<String>,
    pub reason: String,
}

/// Parse `videos.jsonl`, collecting malformed lines instead of failing.
pub fn read_videos_lenient(path: impl AsRef<Path>) -> Result<(Vec<VideoRecord>, Vec<SkippedLine>)> {
    let text = read_to_string(path)?;
    let mut ok = Vec::new();
    let mut skipped = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<VideoRecord>(line) {
            Ok(r) => ok.push(r),
            Err(e) => {
                let video_id = serde_json::from_str::<serde_json::Value>(line)
                    .ok()
                    .and_then(|v| v.get("video_id").and_then(|x| x.as_str()).map(str::to_string));
                skipped.push(SkippedLine {
                    line: i + 1,
                    video_id,
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok((ok, skipped))
}

pub fn edges_to_tsv(d: &Dataset) -> String {
    let mut out = String::new();
    for e in d.edges() {
        out.push_str(&format!("{}\t{}\t{}\n", e.from, e.to, e.hop));
    }
    out
}

fn parse_edges(text: &str, location: &Path, d: &mut Dataset) -> Result<()> {
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let loc = || format!("{}:{}", location.display(), i + 1);
        if fields.len() != 3 {
            return Err(Error::parse(loc(), "expected from<TAB>to<TAB>hop"));
        }
        let hop: u32 = fields[2]
            .trim()
            .parse()
            .map_err(|e| Error::parse(loc(), e))?;
        d.add_edge(fields[0], fields[1], hop);
    }
    Ok(())
}

pub fn write_dataset(dir: impl AsRef<Path>, d: &Dataset) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_jsonl(dir.join(VIDEOS_FILE), d.videos())?;
    atomic_write(dir.join(EDGES_FILE), edges_to_tsv(d).as_bytes())?;
    let mut unfetched = String::new();
    for id in d.unfetched() {
        unfetched.push_str(id);
        unfetched.push('\n');
    }
    atomic_write(dir.join(UNFETCHED_FILE), unfetched.as_bytes())?;
    if let Some(gt) = d.ground_truth() {
        write_jsonl(dir.join(GROUND_TRUTH_FILE), gt.values())?;
    }
    Ok(())
}

pub fn read_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let mut d = Dataset::new();
    for r in read_jsonl::<VideoRecord>(dir.join(VIDEOS_FILE))? {
        d.upsert(r);
    }
    let unfetched = dir.join(UNFETCHED_FILE);
    if unfetched.exists() {
        for id in read_lines(&unfetched)? {
            d.mark_unfetched(id);
        }
    }
    let edges = dir.join(EDGES_FILE);
    if edges.exists() {
        parse_edges(&read_to_string(&edges)?, &edges, &mut d)?;
    }
    let gt = dir.join(GROUND_TRUTH_FILE);
    if gt.exists() {
        d.set_ground_truth(read_jsonl::<GroundTruthEntry>(&gt)?);
    }
    Ok(d)
}

/// Parse a `video_id<TAB>label` file. Extra columns are ignored, so the
/// output of batch classification can be read back directly.
pub fn read_label_file(path: impl AsRef<Path>) -> Result<BTreeMap<String, BinaryLabel>> {
    let path = path.as_ref();
    let mut out = BTreeMap::new();
    for (i, line) in read_to_string(path)?.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(id), Some(label)) = (fields.next(), fields.next()) else {
            return Err(Error::parse(
                format!("{}:{}", path.display(), i + 1),
                "expected video_id<TAB>label",
            ));
        };
        let label = label
            .parse::<BinaryLabel>()
            .map_err(|e| Error::parse(format!("{}:{}", path.display(), i + 1), e))?;
        out.insert(id.trim().to_string(), label);
    }
    Ok(out)
}

pub fn ensure_dir(path: impl AsRef<Path>) -> Result<PathBuf> {
    let path = path.as_ref();
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Label, Strategy, Verdict};
    use chrono::{TimeZone, Utc};

    #[test]
    fn dataset_roundtrip_preserves_everything() {
        let t = Utc.with_ymd_and_hms(2018, 11, 18, 12, 0, 0).unwrap();
        let mut d = Dataset::new();
        let mut a = VideoRecord::new("a", "Peppa pig \"song\"\tfun", t);
        a.tags = vec!["peppa".into(), "pig".into()];
        a.origins.insert(Strategy::ElsagateRelated);
        a.thumbnail_ref = Some("thumbs/a.png".into());
        a.views = 12;
        a.duration_s = 61.5;
        d.upsert(a);
        d.upsert(VideoRecord::new("b", "other", t));
        d.add_edge("a", "b", 1);
        d.add_edge("b", "c", 2);
        d.mark_unfetched("c");
        d.set_ground_truth(vec![GroundTruthEntry {
            video_id: "a".into(),
            rater_labels: vec![Label::Suitable; 3],
            verdict: Verdict::Agreed(Label::Suitable),
        }]);
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &d).unwrap();
        let back = read_dataset(dir.path()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn lenient_reader_skips_bad_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.jsonl");
        let t = Utc.with_ymd_and_hms(2018, 11, 18, 12, 0, 0).unwrap();
        let good = serde_json::to_string(&VideoRecord::new("a", "x", t)).unwrap();
        fs::write(&p, format!("{good}\n{{\"video_id\":\"b\"}}\n")).unwrap();
        let (ok, skipped) = read_videos_lenient(&p).unwrap();
        assert_eq!(ok.len(), 1);
        assert_eq!(skipped.len(), 1);
        assert_eq!(skipped[0].video_id.as_deref(), Some("b"));
    }

    #[test]
    fn label_file_accepts_both_taxonomies() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.tsv");
        fs::write(&p, "a\tappropriate\nb\tdisturbing\t0.9\nc\tirrelevant\n").unwrap();
        let m = read_label_file(&p).unwrap();
        assert_eq!(m["a"], BinaryLabel::Appropriate);
        assert_eq!(m["b"], BinaryLabel::Inappropriate);
        assert_eq!(m["c"], BinaryLabel::Appropriate);
    }
}
