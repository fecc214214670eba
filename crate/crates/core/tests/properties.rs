//! Property tests over randomly generated inputs.

mod support;

use std::collections::{BTreeMap, HashSet};

use hatelab::annotation::{AnnotationConfig, AnnotationRecord, AnnotationStore, RecordState, Role};
use hatelab::classifiers::{
    knn_fit, logreg_fit, nb_fit, rf_fit, svm_fit, Dataset, ForestParams, LogRegParams, Node, SvmParams, TrainedModel,
};
use hatelab::corpus::{export_jsonl, load_jsonl, normalize, split_stratified, LabeledCorpus, Post};
use hatelab::eval::{
    confusion, fit_vectorizer, grid_split, metrics, run_grid, ConfusionMatrix, EmbeddingSpec, GridCell, GridOptions,
    ModelSpec,
};
use hatelab::features::{
    embed_mean, fit_count, idf, transform_hashing, transform_tfidf, DenseVector, EmbeddingTable, FeatureVector,
};
use hatelab::microformer::{init_model, LoraConfig, TransformerClassifier};
use proptest::prelude::*;
use proptest::sample::SizeRange;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn text() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        "[a-zA-Z0-9]{1,8}",
        "@[a-z_]{1,6}",
        "#[A-Za-z]{1,6}",
        "https?://[a-z]{1,5}\\.(com|org)/[a-z0-9]{0,4}",
        "www\\.[a-z]{1,5}\\.net",
        "[ \\t\\n.,!?'\"-]{1,3}",
        "\\PC{1,4}",
    ];
    prop::collection::vec(piece, 0..12).prop_map(|v| v.concat())
}

fn word() -> impl Strategy<Value = String> {
    "[a-f]{1,2}"
}

fn doc(len: impl Into<SizeRange>) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(word(), len)
}

fn labeled(n: impl Into<SizeRange>) -> impl Strategy<Value = LabeledCorpus> {
    prop::collection::vec((text(), any::<bool>()), n).prop_map(|rows| {
        let (posts, labels) = rows
            .into_iter()
            .enumerate()
            .map(|(i, (t, y))| (Post::new(format!("p{i}"), t), y))
            .unzip();
        LabeledCorpus::new(posts, labels).unwrap()
    })
}

fn role() -> impl Strategy<Value = Role> {
    prop::sample::select(Role::ALL.to_vec())
}

fn dataset(rows: usize, dim: usize, nonneg: bool) -> impl Strategy<Value = Dataset> {
    let value = if nonneg { 0.0..3.0 } else { -2.0..2.0 };
    prop::collection::vec((prop::collection::vec(value, dim), any::<bool>()), rows).prop_filter_map(
        "both classes",
        |rows| {
            let (x, y): (Vec<Vec<f64>>, Vec<bool>) = rows.into_iter().unzip();
            (y.iter().any(|&l| l) && y.iter().any(|&l| !l)).then(|| Dataset::from_rows(&x, y).unwrap())
        },
    )
}

// corpus

proptest! {
    #[test]
    fn normalize_is_idempotent(t in text()) {
        let once = normalize(&t);
        prop_assert_eq!(normalize(&once.join(" ")), once);
    }

    #[test]
    fn split_is_deterministic_and_stratified(c in labeled(1..60), f in 0.05f64..0.95, seed in any::<u64>()) {
        let (train, test) = split_stratified(&c, f, seed).unwrap();
        prop_assert_eq!(split_stratified(&c, f, seed).unwrap(), (train.clone(), test.clone()));
        prop_assert_eq!(train.len() + test.len(), c.len());
        for class in [false, true] {
            let n = c.labels.iter().filter(|&&y| y == class).count();
            let in_test = test.labels.iter().filter(|&&y| y == class).count();
            prop_assert_eq!(in_test, (n as f64 * f).round() as usize);
        }
        let ids: HashSet<&str> = train.posts.iter().chain(&test.posts).map(|p| p.id.as_str()).collect();
        prop_assert_eq!(ids.len(), c.len());
    }

    #[test]
    fn jsonl_export_round_trips(texts in prop::collection::vec((text(), prop::collection::btree_map("[a-z]{1,4}", "\\PC{0,6}", 0..3)), 0..20)) {
        let posts: Vec<Post> = texts
            .into_iter()
            .enumerate()
            .map(|(i, (t, meta))| Post::new(format!("id-{i}"), t).with_meta(meta))
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("posts.jsonl");
        export_jsonl(&path, &posts).unwrap();
        prop_assert_eq!(load_jsonl(&path).unwrap(), posts);
    }
}

// annotation

#[test]
fn store_agrees_with_batch_rule_exhaustively() {
    for theta in 0..=10u8 {
        let config = AnnotationConfig::new(theta).unwrap();
        let mut cases = Vec::new();
        for s1 in 0..=10i64 {
            for s2 in 0..=10i64 {
                for s3 in 0..=10i64 {
                    cases.push((s1, s2, s3));
                }
            }
        }
        let posts: Vec<Post> = (0..cases.len()).map(|i| Post::new(i.to_string(), "x")).collect();
        let store = AnnotationStore::new(posts, config).unwrap();
        for (i, &(s1, s2, s3)) in cases.iter().enumerate() {
            let id = i.to_string();
            store.submit_score(&id, Role::Primary1, s1).unwrap();
            let r = store.submit_score(&id, Role::Primary2, s2).unwrap();
            if r.state == RecordState::Disputed {
                store.submit_score(&id, Role::ThirdReviewer, s3).unwrap();
            }
        }
        let batch = hatelab::annotation::annotate_labels_batch(
            &cases.iter().map(|&(a, b, c)| (a, b, Some(c))).collect::<Vec<_>>(),
            &config,
        )
        .unwrap();
        let labels: Vec<Option<bool>> = store.records().iter().map(|r| r.final_label).collect();
        assert_eq!(labels, batch, "theta {theta}");
    }
}

proptest! {
    #[test]
    fn consensus_label_is_monotone_in_first_score(s1 in 0u8..=10, bump in 0u8..=10, s2 in 0u8..=10, theta in 0u8..=10) {
        let config = AnnotationConfig::new(theta).unwrap();
        let hi = (s1 + bump).min(10);
        let label = |s: u8| {
            let mut r = AnnotationRecord::new("p");
            r.apply(Role::Primary1, s as i64, &config).unwrap();
            r.apply(Role::Primary2, s2 as i64, &config).unwrap();
            (r.state == RecordState::Resolved).then(|| r.final_label.unwrap())
        };
        if let (Some(lo), Some(hi)) = (label(s1), label(hi)) {
            prop_assert!(hi >= lo);
        }
    }

    #[test]
    fn records_never_regress(steps in prop::collection::vec((role(), -2i64..13), 0..12), theta in 0u8..=10) {
        let config = AnnotationConfig::new(theta).unwrap();
        let mut r = AnnotationRecord::new("p");
        for (role, score) in steps {
            let before = r.clone();
            match r.apply(role, score, &config) {
                Ok(()) => {
                    prop_assert!(r.state > before.state, "{:?} -> {:?}", before.state, r.state);
                    prop_assert!(!(before.state == RecordState::PendingFirst && r.state == RecordState::Disputed));
                }
                Err(_) => prop_assert_eq!(&r, &before),
            }
            prop_assert!(r.is_consistent(&config));
            if before.state == RecordState::Resolved {
                prop_assert_eq!(&r, &before);
            }
        }
    }

    #[test]
    fn store_state_survives_reopen(steps in prop::collection::vec((0usize..4, role(), 0i64..=10), 0..24)) {
        let posts: Vec<Post> = (0..4).map(|i| Post::new(format!("p{i}"), "text")).collect();
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("events.jsonl");
        let config = AnnotationConfig::default();
        let store = AnnotationStore::open(posts.clone(), config, &log).unwrap();
        for (post, role, score) in steps {
            let _ = store.submit_score(&format!("p{post}"), role, score);
        }
        let (records, events) = (store.records(), store.events());
        drop(store);
        let reopened = AnnotationStore::open(posts, config, &log).unwrap();
        prop_assert_eq!(reopened.records(), records);
        prop_assert_eq!(reopened.events(), events);
    }

    #[test]
    fn views_hide_other_scores_until_resolved(steps in prop::collection::vec((role(), 0i64..=10), 0..6)) {
        let config = AnnotationConfig::default();
        let mut r = AnnotationRecord::new("p");
        for (role, score) in steps {
            let _ = r.apply(role, score, &config);
            if r.state != RecordState::Resolved {
                prop_assert!(r.view_for(Role::Primary2).score1.is_none());
                prop_assert!(r.view_for(Role::Primary1).score2.is_none());
                let third = r.view_for(Role::ThirdReviewer);
                prop_assert!(third.score1.is_none() && third.score2.is_none());
            } else {
                prop_assert_eq!(&r.view_for(Role::Primary2), &r);
            }
        }
    }
}

// features

proptest! {
    #[test]
    fn tfidf_norm_is_zero_or_one(docs in prop::collection::vec(doc(0..15), 1..30), query in doc(0..15)) {
        let vocab = fit_count(&docs).unwrap();
        for d in docs.iter().chain([&query]) {
            let n = transform_tfidf(&vocab, d).norm();
            prop_assert!(n == 0.0 || (n - 1.0).abs() < 1e-9, "norm {}", n);
        }
    }

    #[test]
    fn hashing_ignores_the_rest_of_the_corpus(target in doc(0..20), a in labeled(2..10), b in labeled(2..10)) {
        let opts = GridOptions { hash_dim: 1 << 10, ..Default::default() };
        let va = fit_vectorizer(EmbeddingSpec::Hashing, &a, &opts).unwrap();
        let vb = fit_vectorizer(EmbeddingSpec::Hashing, &b, &opts).unwrap();
        let alone = transform_hashing(&target, 1 << 10).unwrap();
        prop_assert_eq!(va.transform(&target).unwrap(), FeatureVector::Sparse(alone.clone()));
        prop_assert_eq!(vb.transform(&target).unwrap(), FeatureVector::Sparse(alone));
    }

    #[test]
    fn idf_decreases_with_document_frequency(docs in prop::collection::vec(doc(0..10), 1..40)) {
        let vocab = fit_count(&docs).unwrap();
        for i in 0..vocab.len() {
            for j in 0..vocab.len() {
                if vocab.doc_freq(i) < vocab.doc_freq(j) {
                    prop_assert!(vocab.idf(i) > vocab.idf(j));
                }
            }
        }
    }

    #[test]
    fn idf_formula_is_monotone(n in 1u64..10_000, a in 0u64..10_000, b in 0u64..10_000) {
        let (lo, hi) = (a.min(b) % (n + 1), a.max(b) % (n + 1));
        if lo < hi {
            prop_assert!(idf(n, lo) > idf(n, hi));
        }
    }

    #[test]
    fn embed_mean_ignores_token_order(d in doc(0..20), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut table = EmbeddingTable::new(3);
        for w in ["a", "b", "c", "ab", "cd", "ef"] {
            table.insert(w, (0..3).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect()).unwrap();
        }
        let mut shuffled = d.clone();
        shuffled.shuffle(&mut rng);
        let (x, y) = (embed_mean(&table, &d), embed_mean(&table, &shuffled));
        prop_assert!(x.0.iter().zip(&y.0).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}

// classifiers

fn fit_all(data: &Dataset, seed: u64) -> Vec<TrainedModel> {
    vec![
        TrainedModel::NaiveBayes(nb_fit(data, 1.0).unwrap()),
        TrainedModel::LogisticRegression(logreg_fit(data, &LogRegParams { seed, epochs: 5, ..Default::default() }).unwrap()),
        TrainedModel::LinearSvm(svm_fit(data, &SvmParams { seed, epochs: 5, ..Default::default() }).unwrap()),
        TrainedModel::RandomForest(
            rf_fit(data, &ForestParams { seed, n_trees: 5, max_depth: 4, ..Default::default() }).unwrap(),
        ),
        knn_fit(data.clone(), 1).unwrap(),
    ]
}

/// True when every split of `shallow` is mirrored, node for node, in `deep`.
fn refines(shallow: &[Node], deep: &[Node], i: usize, j: usize) -> bool {
    match (&shallow[i], &deep[j]) {
        (Node::Leaf { .. }, _) => true,
        (
            Node::Split { feature: f1, threshold: t1, left: l1, right: r1 },
            Node::Split { feature: f2, threshold: t2, left: l2, right: r2 },
        ) => f1 == f2 && t1.to_bits() == t2.to_bits() && refines(shallow, deep, *l1, *l2) && refines(shallow, deep, *r1, *r2),
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fits_are_reproducible_and_serialize_exactly(data in dataset(12, 4, true), seed in any::<u64>()) {
        let first = fit_all(&data, seed);
        prop_assert_eq!(&first, &fit_all(&data, seed));
        for model in first {
            let back = TrainedModel::from_json(&model.to_json()).unwrap();
            prop_assert_eq!(&back, &model);
            for x in data.features() {
                prop_assert_eq!(back.predict(x).unwrap(), model.predict(x).unwrap());
            }
        }
    }

    #[test]
    fn deeper_forests_refine_shallower_ones(data in dataset(30, 3, false), seed in any::<u64>(), depth in 0usize..5) {
        let params = ForestParams { seed, n_trees: 3, max_depth: depth, ..Default::default() };
        let shallow = rf_fit(&data, &params).unwrap();
        let deep = rf_fit(&data, &ForestParams { max_depth: depth + 1, ..params }).unwrap();
        for (s, d) in shallow.trees().iter().zip(deep.trees()) {
            prop_assert!(s.depth() <= depth);
            prop_assert!(refines(s.nodes(), d.nodes(), 0, 0));
        }
    }

    #[test]
    fn single_tree_training_accuracy_grows_with_depth(data in dataset(30, 3, false), seed in any::<u64>()) {
        let mut last = 0;
        for depth in 0..8 {
            let params = ForestParams { seed, n_trees: 1, max_depth: depth, bootstrap: false, ..Default::default() };
            let forest = rf_fit(&data, &params).unwrap();
            let correct = data
                .features()
                .iter()
                .zip(data.labels())
                .filter(|(x, &y)| forest.predict(x) == y)
                .count();
            prop_assert!(correct >= last, "depth {}: {} < {}", depth, correct, last);
            last = correct;
        }
    }
}

// evaluation

proptest! {
    #[test]
    fn metric_identities(tp in 0u64..50, fp in 0u64..50, fn_ in 0u64..50, tn in 0u64..50) {
        let cm = ConfusionMatrix { tp, fp, fn_, tn };
        prop_assume!(cm.total() > 0);
        let m = metrics(&cm).unwrap();
        prop_assert!((m.accuracy - (tp + tn) as f64 / cm.total() as f64).abs() < 1e-15);
        if m.precision + m.recall > 0.0 {
            let h = 2.0 * m.precision * m.recall / (m.precision + m.recall);
            prop_assert!((m.f1 - h).abs() < 1e-12);
        } else {
            prop_assert_eq!(m.f1, 0.0);
        }
        for v in [m.accuracy, m.precision, m.recall, m.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn confusion_counts_add_up(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..100)) {
        let (pred, truth): (Vec<bool>, Vec<bool>) = pairs.iter().copied().unzip();
        let cm = confusion(&pred, &truth).unwrap();
        prop_assert_eq!(cm.total() as usize, pairs.len());
        prop_assert_eq!(cm.tp as usize, pairs.iter().filter(|&&(p, t)| p && t).count());
        prop_assert_eq!(cm.tn as usize, pairs.iter().filter(|&&(p, t)| !p && !t).count());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn grid_fits_never_see_test_terms(c in labeled(10..40), seed in any::<u64>()) {
        prop_assume!(c.labels.iter().filter(|&&y| y).count() >= 3 && c.labels.iter().filter(|&&y| !y).count() >= 3);
        let opts = GridOptions { seed, ..Default::default() };
        let (train, test) = grid_split(&c, &opts).unwrap();
        let train_terms: HashSet<&String> = train.posts.iter().flat_map(|p| &p.tokens).collect();
        let test_only: HashSet<String> =
            test.posts.iter().flat_map(|p| &p.tokens).filter(|t| !train_terms.contains(t)).cloned().collect();
        for spec in [EmbeddingSpec::Count, EmbeddingSpec::Tfidf] {
            let v = fit_vectorizer(spec, &train, &opts).unwrap();
            let vocab = v.vocabulary().unwrap();
            prop_assert_eq!(vocab.n_docs() as usize, train.len());
            prop_assert!(test_only.iter().all(|t| !vocab.contains(t)));
        }
        // Renaming the test-only terms cannot change any grid result.
        let mut renamed = c.clone();
        let test_ids: HashSet<&str> = test.posts.iter().map(|p| p.id.as_str()).collect();
        for post in renamed.posts.iter_mut().filter(|p| test_ids.contains(p.id.as_str())) {
            for t in post.tokens.iter_mut().filter(|t| test_only.contains(t.as_str())) {
                *t = format!("zz{t}");
            }
        }
        let grid = [
            GridCell::new(ModelSpec::LogisticRegression, EmbeddingSpec::Tfidf),
            GridCell::new(ModelSpec::NaiveBayes, EmbeddingSpec::Count),
        ];
        let small = GridOptions { logreg: LogRegParams { epochs: 3, ..Default::default() }, ..opts };
        let a = run_grid(&c, &grid, &small).unwrap();
        let b = run_grid(&renamed, &grid, &small).unwrap();
        prop_assert_eq!(a.rows, b.rows);
    }
}

// transformer

fn tiny_model(seed: u64) -> TransformerClassifier {
    init_model(&support::tiny_config(), seed).unwrap()
}

fn ids() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0usize..12, 1..=6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn attention_rows_and_layer_norms_are_normalized(x in ids(), seed in any::<u64>()) {
        let trace = tiny_model(seed).forward_trace(&x).unwrap();
        let t = x.len();
        for head in trace.attention.iter().flatten() {
            for row in head.chunks(t) {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
        let d = support::tiny_config().d_model;
        for xhat in &trace.normalized {
            for pos in xhat.chunks(d) {
                let mean = pos.iter().sum::<f64>() / d as f64;
                let var = pos.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
                prop_assert!(mean.abs() < 1e-7, "mean {}", mean);
                prop_assert!((var - 1.0).abs() < 1e-6, "variance {}", var);
            }
        }
    }

    #[test]
    fn fresh_adapters_are_the_identity(x in ids(), seed in any::<u64>()) {
        let base = tiny_model(seed);
        let adapted = base.attach_lora(&LoraConfig { rank: 2, ..Default::default() }, seed ^ 1).unwrap();
        let (a, b) = (base.forward(&x).unwrap(), adapted.forward(&x).unwrap());
        prop_assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
    }

    #[test]
    fn without_positions_the_encoder_ignores_order(x in ids(), seed in any::<u64>()) {
        let mut model = tiny_model(seed);
        model.pos_emb.data.iter_mut().for_each(|v| *v = 0.0);
        let mut rev = x.clone();
        rev.reverse();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shuffled = x.clone();
        shuffled.shuffle(&mut rng);
        let base = model.forward(&x).unwrap();
        for other in [rev, shuffled] {
            let y = model.forward(&other).unwrap();
            prop_assert!((base[0] - y[0]).abs() < 1e-12 && (base[1] - y[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn merge_matches_adapted_model(x in ids(), seed in any::<u64>()) {
        let mut adapted = tiny_model(seed).attach_lora(&LoraConfig { rank: 2, ..Default::default() }, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for name in adapted.tensor_names() {
            if name.ends_with("lora_b") {
                for v in &mut adapted.tensor_mut(&name).unwrap().data {
                    *v = rand::Rng::random_range(&mut rng, -0.5..0.5);
                }
            }
        }
        let merged = adapted.merge_lora().unwrap();
        let (a, m) = (adapted.forward(&x).unwrap(), merged.forward(&x).unwrap());
        for k in 0..2 {
            prop_assert!((a[k] - m[k]).abs() <= 1e-9 * a[k].abs().max(m[k].abs()).max(1e-12));
        }
    }
}

#[test]
fn logits_have_two_entries_for_every_length() {
    let model = init_model(&Default::default(), 3).unwrap();
    let counts: BTreeMap<usize, usize> = (1..=64)
        .map(|len| (len, model.forward(&vec![5; len]).unwrap().len()))
        .collect();
    assert!(counts.values().all(|&n| n == 2));
    assert!(model.forward(&vec![5; 65]).is_err());
    assert!(model.forward(&[]).is_err());
    assert!(model.forward(&[8193]).is_err());
}

#[test]
fn dense_features_work_across_models() {
    let x: Vec<FeatureVector> = (0..8)
        .map(|i| FeatureVector::Dense(DenseVector(vec![i as f64, (8 - i) as f64])))
        .collect();
    let y: Vec<bool> = (0..8).map(|i| i >= 4).collect();
    let data = Dataset::new(x.clone(), y.clone()).unwrap();
    for model in fit_all(&data, 1) {
        let correct = x.iter().zip(&y).filter(|(x, &y)| model.predict(x).unwrap() == y).count();
        assert!(correct >= 6, "{:?} got {correct} of 8", model.kind());
    }
}
