use std::sync::{Arc, Mutex};

use serde_json::{json, Value};
use vidsafe::annotation::{serve, AnnotationStore};
use vidsafe::synthetic::random_record;
use vidsafe::{Label, Verdict};

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().into()
}

fn store(n: usize, annotators: &[&str]) -> Arc<Mutex<AnnotationStore>> {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
    let mut s = AnnotationStore::new((0..n).map(|i| random_record(format!("v{i}"), &mut rng)));
    for a in annotators {
        s.register(a).unwrap();
    }
    Arc::new(Mutex::new(s))
}

fn next(agent: &ureq::Agent, base: &str, annotator: &str) -> (u16, Value) {
    let mut resp = agent.get(format!("{base}/tasks/next")).query("annotator", annotator).call().unwrap();
    (resp.status().as_u16(), resp.body_mut().read_json().unwrap())
}

fn vote(agent: &ureq::Agent, base: &str, video: &str, annotator: &str, label: Label) -> (u16, Value) {
    let mut resp = agent
        .post(format!("{base}/annotations"))
        .send_json(json!({ "video_id": video, "annotator_id": annotator, "label": label }))
        .unwrap();
    (resp.status().as_u16(), resp.body_mut().read_json().unwrap())
}

#[test]
fn three_annotators_reach_majority_and_split_votes_are_excluded() {
    let s = store(2, &["a", "b", "c"]);
    let server = serve(s.clone(), "127.0.0.1:0").unwrap();
    let base = server.url();
    let agent = agent();

    let (status, body) = next(&agent, &base, "a");
    assert_eq!(status, 200);
    let task = &body["task"];
    assert!(task["video_id"].as_str().unwrap().starts_with('v'));
    assert_eq!(task["labels"].as_array().unwrap().len(), 4);

    let plan = [
        ("v0", [Label::Disturbing, Label::Disturbing, Label::Suitable]),
        ("v1", [Label::Suitable, Label::Restricted, Label::Irrelevant]),
    ];
    for (video, labels) in plan {
        for (annotator, label) in ["a", "b", "c"].into_iter().zip(labels) {
            let (status, body) = vote(&agent, &base, video, annotator, label);
            assert_eq!(status, 201);
            assert_eq!(body["status"], "created");
        }
    }
    let (_, body) = next(&agent, &base, "a");
    assert!(body["task"].is_null());
    assert_eq!(body["completed"], 2);

    let mut resp = agent.get(format!("{base}/export")).call().unwrap();
    let text = resp.body_mut().read_to_string().unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["final"], "disturbing");
    assert_eq!(lines[1]["final"], "excluded");
    server.shutdown();

    let export = s.lock().unwrap().export();
    assert_eq!(export.entries[0].verdict, Verdict::Agreed(Label::Disturbing));
    assert_eq!(export.excluded.len(), 1);
    assert_eq!(export.pending, 0);
}

#[test]
fn resubmission_replaces_the_earlier_vote() {
    let s = store(1, &["a"]);
    let server = serve(s.clone(), "127.0.0.1:0").unwrap();
    let base = server.url();
    let agent = agent();
    assert_eq!(vote(&agent, &base, "v0", "a", Label::Suitable).1["status"], "created");
    assert_eq!(vote(&agent, &base, "v0", "a", Label::Restricted).1["status"], "replaced");
    let mut resp = agent.get(format!("{base}/progress")).call().unwrap();
    let progress: Value = resp.body_mut().read_json().unwrap();
    assert_eq!(progress["votes"], 1);
    server.shutdown();
    let store = s.lock().unwrap();
    let votes = store.votes_for("v0");
    assert_eq!(votes.len(), 1);
    assert_eq!(votes[0].label, Label::Restricted);
}

#[test]
fn bad_requests_are_rejected() {
    let s = store(1, &["a"]);
    let server = serve(s, "127.0.0.1:0").unwrap();
    let base = server.url();
    let agent = agent();
    assert_eq!(next(&agent, &base, "stranger").0, 404);
    assert_eq!(vote(&agent, &base, "v0", "stranger", Label::Suitable).0, 404);
    assert_eq!(vote(&agent, &base, "nope", "a", Label::Suitable).0, 422);
    let resp = agent.post(format!("{base}/annotations")).send("not json").unwrap();
    assert_eq!(resp.status().as_u16(), 400);
    let resp = agent.get(format!("{base}/tasks/next")).call().unwrap();
    assert_eq!(resp.status().as_u16(), 400);
    let resp = agent.get(format!("{base}/missing")).call().unwrap();
    assert_eq!(resp.status().as_u16(), 404);
}
