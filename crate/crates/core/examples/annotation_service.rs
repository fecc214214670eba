//! Starts the annotation HTTP API on a free local port and walks one post
//! through a dispute with plain HTTP requests.
//!
//! Usage: `cargo run --example annotation_service`

use std::sync::Arc;

use hatelab::annotation::{serve, AnnotationConfig, AnnotationStore};
use hatelab::corpus::Post;
use serde_json::{json, Value};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let posts = vec![Post::new("a", "first placeholder"), Post::new("b", "second placeholder")];
    let store = Arc::new(AnnotationStore::new(posts, AnnotationConfig::default())?);

    let runtime = tokio::runtime::Runtime::new()?;
    let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))?;
    let base = format!("http://{}", listener.local_addr()?);
    runtime.spawn(serve(listener, store));
    println!("serving on {base}");

    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .into();
    let get = |path: &str| -> Result<(u16, Value), ureq::Error> {
        let mut r = agent.get(&format!("{base}{path}")).call()?;
        Ok((r.status().as_u16(), r.body_mut().read_json()?))
    };
    let post = |body: Value| -> Result<(u16, Value), ureq::Error> {
        let mut r = agent.post(&format!("{base}/score")).send_json(body)?;
        Ok((r.status().as_u16(), r.body_mut().read_json()?))
    };

    println!("GET /queue?role=Primary1 -> {:?}", get("/queue?role=Primary1")?);
    println!("GET /posts/a -> {:?}", get("/posts/a")?);
    for (role, score) in [("Primary1", 8), ("Primary2", 2)] {
        let (status, body) = post(json!({"post_id": "a", "role": role, "score": score}))?;
        println!("POST /score {role}={score} -> {status} state={}", body["state"]);
    }
    println!("GET /queue?role=ThirdReviewer -> {:?}", get("/queue?role=ThirdReviewer")?);
    let (status, body) = post(json!({"post_id": "a", "role": "ThirdReviewer", "score": 7}))?;
    println!("POST /score ThirdReviewer=7 -> {status} final_label={}", body["final_label"]);

    let (status, body) = post(json!({"post_id": "a", "role": "Primary1", "score": 4}))?;
    println!("repeat submission -> {status} {}", body["error"]);
    let (status, body) = post(json!({"post_id": "b", "role": "Primary1", "score": 11}))?;
    println!("score 11 -> {status} {}", body["error"]);
    let (status, body) = post(json!({"post_id": "zz", "role": "Primary1", "score": 1}))?;
    println!("unknown post -> {status} {}", body["error"]);

    println!("GET /export -> {}", get("/export")?.1);
    Ok(())
}
