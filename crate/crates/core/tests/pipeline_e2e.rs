use std::path::Path;

use diffad::features::{extract_all, ExtractorSpec, TOY_DIM};
use diffad::manifest_io::{load_manifest, write_embeddings, write_manifest, Embedding, EmbeddingStore, Split};
use diffad::pipeline::{read_score_table, run_infer, run_train, test_records, InferConfig, PipelineError, TrainConfig, SCORE_TABLE_HEADER};
use diffad::synthetic::{write_corpus, CorpusSpec};

fn corpus(dir: &Path, train: usize, test_real: usize, test_fake: usize, frames: usize) -> std::path::PathBuf {
    let spec = CorpusSpec { n_train_real: train, n_test_real: test_real, n_test_fake: test_fake, n_frames: frames, seed: 5, ..CorpusSpec::default() };
    write_corpus(dir, &spec).unwrap()
}

#[test]
fn training_on_ten_real_videos() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 10, 0, 0, 40);
    let cfg = TrainConfig::seeded(1);
    let a = dir.path().join("a.gmm");
    let b = dir.path().join("b.gmm");
    let report = run_train(&manifest, &ExtractorSpec::toy(), &cfg, &a).unwrap();
    assert_eq!((report.n_videos, report.n_pairs, report.dim, report.n_components), (10, 600, TOY_DIM, 3));
    let model = diffad::gmm::load_model(&a).unwrap();
    assert_eq!((model.dim(), model.n_components()), (448, 3));
    run_train(&manifest, &ExtractorSpec::toy(), &cfg, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn training_without_real_videos_fails() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 0, 1, 1, 8);
    let err = run_train(&manifest, &ExtractorSpec::toy(), &TrainConfig::default(), &dir.path().join("m.gmm")).unwrap_err();
    assert!(matches!(err, PipelineError::NoTrainingVideos));
    assert!(!dir.path().join("m.gmm").exists());
}

#[test]
fn inference_writes_one_row_per_test_video() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 3, 2, 2, 12);
    let model = dir.path().join("m.gmm");
    let tcfg = TrainConfig { min_gap: 2, k_pairs: 20, ..TrainConfig::seeded(2) };
    run_train(&manifest, &ExtractorSpec::toy(), &tcfg, &model).unwrap();
    let icfg = InferConfig { min_gap: 2, seed: 2, ..InferConfig::default() };
    let t1 = dir.path().join("s1.tsv");
    let t2 = dir.path().join("s2.tsv");
    let scores = run_infer(&manifest, &ExtractorSpec::toy(), &model, &icfg, &t1).unwrap();
    assert_eq!(scores.len(), 4);
    assert!(scores.iter().all(|s| s.n_pairs == 30 && s.score.is_finite()));
    assert_eq!(read_score_table(&t1).unwrap(), scores);
    run_infer(&manifest, &ExtractorSpec::toy(), &model, &icfg, &t2).unwrap();
    assert_eq!(std::fs::read(&t1).unwrap(), std::fs::read(&t2).unwrap());

    // No test videos: header only.
    let train_only: Vec<_> = load_manifest(&manifest).unwrap().into_iter().filter(|r| r.split == Split::Train).collect();
    let m2 = dir.path().join("train_only.jsonl");
    write_manifest(&train_only, &m2).unwrap();
    let t3 = dir.path().join("s3.tsv");
    assert!(run_infer(&m2, &ExtractorSpec::toy(), &model, &icfg, &t3).unwrap().is_empty());
    assert_eq!(std::fs::read_to_string(&t3).unwrap(), format!("{SCORE_TABLE_HEADER}\n"));
}

#[test]
fn toy_extraction_covers_every_frame() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 1, 0, 1, 40);
    let records = load_manifest(&manifest).unwrap();
    let store = extract_all(&records, dir.path(), &ExtractorSpec::toy()).unwrap();
    assert_eq!((store.len(), store.dim()), (80, 448));
}

#[test]
fn external_embeddings_of_any_width_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path(), 2, 1, 1, 10);
    let records = load_manifest(&manifest).unwrap();
    let mut store = EmbeddingStore::new(1792).unwrap();
    for r in &records {
        for f in 0..r.n_frames() as u32 {
            let v = (0..1792).map(|k| ((k as f32 + f as f32) * 0.37).sin() + r.video_id.len() as f32 * 0.01).collect();
            store.insert(r.video_id.clone(), f, Embedding::new(v).unwrap()).unwrap();
        }
    }
    let emb = dir.path().join("ext.daem");
    write_embeddings(&store, &emb).unwrap();
    let spec = ExtractorSpec::external(&emb, Some(1792));
    let model = dir.path().join("m.gmm");
    let tcfg = TrainConfig { min_gap: 2, k_pairs: 10, gmm: diffad::gmm::GmmConfig { n_components: 1, ..Default::default() }, ..TrainConfig::default() };
    let report = run_train(&manifest, &spec, &tcfg, &model).unwrap();
    assert_eq!(report.dim, 1792);
    let icfg = InferConfig { min_gap: 2, ..InferConfig::default() };
    let scores = run_infer(&manifest, &spec, &model, &icfg, &dir.path().join("s.tsv")).unwrap();
    assert_eq!(scores.len(), test_records(&records).len());

    let wrong = ExtractorSpec::external(&emb, Some(2048));
    assert!(run_train(&manifest, &wrong, &tcfg, &model).is_err());
}
