use super::*;
use crate::gmm::Covariances;
use crate::manifest_io::Embedding;
use crate::rng::rng_from;
use rand::Rng;

fn record(id: &str, n: usize, label: Label, split: Split) -> VideoRecord {
    VideoRecord {
        video_id: id.into(),
        subject_id: format!("s-{id}"),
        label,
        frame_paths: (0..n).map(|i| PathBuf::from(format!("{id}/{i}.png"))).collect(),
        landmark_path: PathBuf::from(format!("{id}.txt")),
        split,
    }
}

fn random_store(records: &[VideoRecord], dim: usize, seed: u64) -> EmbeddingStore {
    let mut rng = rng_from(seed);
    let mut store = EmbeddingStore::new(dim).unwrap();
    for r in records {
        for f in 0..r.n_frames() as u32 {
            let v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            store.insert(r.video_id.clone(), f, Embedding::new(v).unwrap()).unwrap();
        }
    }
    store
}

fn unit_model(dim: usize) -> GmmModel {
    GmmModel::new(vec![0.3, 0.7], vec![vec![0.1; dim], vec![-0.2; dim]], Covariances::Diagonal(vec![vec![0.5; dim], vec![2.0; dim]]))
        .unwrap()
}

#[test]
fn constant_video_scores_the_origin() {
    let r = record("c", 40, Label::Real, Split::Test);
    let mut store = EmbeddingStore::new(4).unwrap();
    for f in 0..40 {
        store.insert("c", f, Embedding::new(vec![0.25, -1.0, 3.0, 0.0]).unwrap()).unwrap();
    }
    let model = unit_model(4);
    let cfg = InferConfig { combine: CombinationMode::Sub, ..InferConfig::default() };
    let s = score_video(&r, &store, &model, &cfg).unwrap();
    assert_eq!(s.score, -model.log_density(&[0.0; 4]).unwrap());
    assert_eq!(s.n_pairs, 30);
}

#[test]
fn video_score_is_the_mean_of_pair_scores() {
    let r = record("v", 40, Label::Fake, Split::Test);
    let store = random_store(std::slice::from_ref(&r), 6, 1);
    let model = unit_model(6);
    let cfg = InferConfig::default();
    let s = score_video(&r, &store, &model, &cfg).unwrap();
    let pairs = sample_inference_pairs(&r, 30, cfg.min_gap, cfg.seed).unwrap();
    let mut by_hand = 0.0;
    for p in &pairs {
        let a = store.get("v", p.frame_i).unwrap().as_slice();
        let b = store.get("v", p.frame_j).unwrap().as_slice();
        let x: Vec<f64> = a.iter().zip(b).map(|(x, y)| (f64::from(*x) - f64::from(*y)).powi(2)).collect();
        by_hand += -model.log_density(&x).unwrap();
    }
    by_hand /= 30.0;
    assert!((s.score - by_hand).abs() < 1e-12 * by_hand.abs().max(1.0));

    let mut reversed = pairs.clone();
    reversed.reverse();
    let fwd = exact_mean(&score_pairs(&pairs, &store, &model, cfg.combine).unwrap());
    let rev = exact_mean(&score_pairs(&reversed, &store, &model, cfg.combine).unwrap());
    assert!((fwd - rev).abs() < 1e-12 * fwd.abs().max(1.0));
}

#[test]
fn missing_embeddings_are_named() {
    let r = record("m", 40, Label::Real, Split::Test);
    let mut store = random_store(std::slice::from_ref(&r), 3, 2);
    let mut short = EmbeddingStore::new(3).unwrap();
    for (v, f, e) in store.iter().filter(|(_, f, _)| *f != 7) {
        short.insert(v, f, e.clone()).unwrap();
    }
    store = short;
    let cfg = InferConfig { min_gap: 1, n_pairs: 500, ..InferConfig::default() };
    match score_video(&r, &store, &unit_model(3), &cfg) {
        Err(PipelineError::MissingEmbedding { video_id, frame }) => assert_eq!((video_id.as_str(), frame), ("m", 7)),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn store_and_model_dims_must_agree() {
    let r = record("d", 10, Label::Real, Split::Test);
    let store = random_store(std::slice::from_ref(&r), 5, 3);
    assert!(matches!(
        score_video(&r, &store, &unit_model(4), &InferConfig::default()),
        Err(PipelineError::DimMismatch { store: 5, model: 4 })
    ));
}

#[test]
fn training_requires_real_videos() {
    let fake = record("f", 40, Label::Fake, Split::Train);
    let store = random_store(std::slice::from_ref(&fake), 3, 4);
    assert!(matches!(train_model(&[], &store, &TrainConfig::default()), Err(PipelineError::NoTrainingVideos)));
    assert!(matches!(
        train_model(std::slice::from_ref(&fake), &store, &TrainConfig::default()),
        Err(PipelineError::FakeInTraining { .. })
    ));
    assert!(training_records(&[fake.clone(), record("t", 4, Label::Real, Split::Test)]).is_empty());
}

#[test]
fn real_only_guard_checks_provenance() {
    let real = record("r", 20, Label::Real, Split::Train);
    let fake = record("f", 20, Label::Fake, Split::Train);
    let records = vec![real.clone(), fake.clone()];
    let store = random_store(&records, 3, 5);
    let mut feats = training_features(std::slice::from_ref(&real), &store, &TrainConfig::default()).unwrap();
    ensure_real_only(&feats, &records).unwrap();
    let leaked = PairSample { video_id: "f".into(), frame_i: 0, frame_j: 9, gap: 9 };
    feats.push(combine_pair(&store, &leaked, CombinationMode::Sub2).unwrap());
    assert!(matches!(ensure_real_only(&feats, &records), Err(PipelineError::FakeInTraining { video_id }) if video_id == "f"));
    let mut untagged = feats[0].clone();
    untagged.pair = None;
    assert!(ensure_real_only(&[untagged], &records).is_err());
}

#[test]
fn training_is_deterministic_and_reports_counts() {
    let records: Vec<_> = (0..5).map(|i| record(&format!("r{i}"), 40, Label::Real, Split::Train)).collect();
    let store = random_store(&records, 8, 6);
    let cfg = TrainConfig::seeded(11);
    let (a, ra) = train_model(&records, &store, &cfg).unwrap();
    let (b, rb) = train_model(&records, &store, &cfg).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert_eq!(ra, rb);
    assert_eq!((ra.n_videos, ra.n_pairs, ra.dim, ra.n_components), (5, 300, 8, 3));
}

#[test]
fn score_table_round_trips() {
    let scores = vec![
        VideoScore { video_id: "a".into(), label: Some(Label::Real), score: 0.1 + 0.2, n_pairs: 30 },
        VideoScore { video_id: "b".into(), label: Some(Label::Fake), score: -1e-300, n_pairs: 3 },
        VideoScore { video_id: "c".into(), label: None, score: 12345.678, n_pairs: 30 },
    ];
    let text = format_score_table(&scores);
    assert!(text.starts_with("video_id\tlabel\tscore\tn_pairs\n"));
    assert_eq!(parse_score_table(&text).unwrap(), scores);
    assert_eq!(format_score_table(&[]), "video_id\tlabel\tscore\tn_pairs\n");
    assert!(parse_score_table("id\tscore\n").is_err());
    assert!(matches!(
        parse_score_table("video_id\tlabel\tscore\tn_pairs\na\treal\tx\t3\n"),
        Err(PipelineError::Table { line: 2, .. })
    ));
    assert!(to_scored_samples(&scores).is_err());
    let labeled = to_scored_samples(&scores[..2]).unwrap();
    assert_eq!((labeled[0].label, labeled[1].label), (0, 1));
}
