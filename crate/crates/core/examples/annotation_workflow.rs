//! Dual annotation with a dispute, persisted to an event log, replayed after a
//! restart and exported as a labeled corpus.
//!
//! Usage: `cargo run --example annotation_workflow`

use hatelab::annotation::{annotate_labels_batch, AnnotationConfig, AnnotationStore, RecordState, Role};
use hatelab::corpus::Post;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let posts = vec![
        Post::new("p1", "placeholder post one"),
        Post::new("p2", "placeholder post two"),
        Post::new("p3", "placeholder post three"),
    ];
    let config = AnnotationConfig::default();
    let dir = tempfile_dir()?;
    let log = dir.join("events.jsonl");

    let store = AnnotationStore::open(posts.clone(), config, &log)?;
    println!("theta = {}, primary 1 queue: {:?}", config.theta, store.pending_queue(Role::Primary1));

    // p1: both primaries agree it is hateful.
    store.submit_score("p1", Role::Primary1, 8)?;
    store.submit_score("p1", Role::Primary2, 9)?;
    // p2: they disagree, so it goes to the third reviewer.
    store.submit_score("p2", Role::Primary1, 7)?;
    let disputed = store.submit_score("p2", Role::Primary2, 3)?;
    println!("p2 after two scores: {:?}", disputed.state);
    println!("third reviewer queue: {:?}", store.pending_queue(Role::ThirdReviewer));
    // p3: only one score so far.
    store.submit_score("p3", Role::Primary2, 2)?;

    match store.submit_score("p1", Role::Primary1, 5) {
        Err(e) => println!("second score from the same role is refused: {e}"),
        Ok(_) => unreachable!(),
    }
    drop(store);

    // A restart replays the log.
    let store = AnnotationStore::open(posts, config, &log)?;
    println!("replayed {} events", store.events().len());
    let resolved = store.submit_score("p2", Role::ThirdReviewer, 6)?;
    println!(
        "p2 resolved by {:?} with label {:?}",
        resolved.resolved_by, resolved.final_label
    );
    for state in [RecordState::PendingFirst, RecordState::PendingSecond, RecordState::Disputed, RecordState::Resolved] {
        println!("{state:?}: {}", store.count_by_state(state));
    }

    let labeled = store.export_labels();
    for (p, y) in labeled.posts.iter().zip(&labeled.labels) {
        println!("export {} -> {}", p.id, *y as u8);
    }

    // The same rule without a store.
    let labels = annotate_labels_batch(&[(6, 6, None), (7, 3, None), (7, 3, Some(5))], &config)?;
    println!("batch labels: {labels:?}");
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

fn tempfile_dir() -> std::io::Result<std::path::PathBuf> {
    let dir = std::env::temp_dir().join(format!("hatelab-annotation-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}
