//! Three annotators label videos through the HTTP annotation server; the
//! votes are then aggregated by majority and their agreement measured.

use std::sync::{Arc, Mutex};

use serde_json::{json, Value};
use vidsafe::annotation::{serve, AnnotationStore};
use vidsafe::synthetic::random_record;
use vidsafe::Label;

fn main() -> vidsafe::Result<()> {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
    let videos: Vec<_> = (0..6).map(|i| random_record(format!("v{i}"), &mut rng)).collect();
    let mut store = AnnotationStore::new(videos);
    for a in ["ann", "bo", "cy"] {
        store.register(a)?;
    }
    let store = Arc::new(Mutex::new(store));
    let server = serve(store.clone(), "127.0.0.1:0")?;
    let base = server.url();
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();

    // Each annotator keeps asking for work until none is left. The third
    // annotator disagrees with the others on every other video.
    for (k, annotator) in ["ann", "bo", "cy"].into_iter().enumerate() {
        loop {
            let mut resp = agent
                .get(format!("{base}/tasks/next"))
                .query("annotator", annotator)
                .call()
                .expect("server reachable");
            let body: Value = resp.body_mut().read_json().expect("json");
            let Some(task) = body.get("task").filter(|t| !t.is_null()) else { break };
            let id = task["video_id"].as_str().expect("id").to_string();
            let n: usize = id[1..].parse().expect("numbered id");
            let label = match (k, n % 2) {
                (2, 1) => Label::Restricted,
                _ => Label::from_index(n % 4).expect("index"),
            };
            let resp = agent
                .post(format!("{base}/annotations"))
                .send_json(json!({ "video_id": id, "annotator_id": annotator, "label": label }))
                .expect("server reachable");
            assert_eq!(resp.status().as_u16(), 201);
        }
    }

    let mut resp = agent.get(format!("{base}/progress")).call().expect("server reachable");
    println!("progress: {}", resp.body_mut().read_to_string().expect("body"));
    let mut resp = agent.get(format!("{base}/export")).call().expect("server reachable");
    println!("export:\n{}", resp.body_mut().read_to_string().expect("body"));
    server.shutdown();

    let store = store.lock().expect("lock");
    println!("fleiss kappa over {} videos: {:.4}", store.rating_matrix(3)?.0.items(), store.kappa(3)?);
    Ok(())
}
