use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use diffad::diffcomb::CombinationMode;
use diffad::eval::{auc, auc_pairwise, evaluate, render_report, ConfigEcho};
use diffad::features::{extract_all, validate_store, ExtractorSpec};
use diffad::gmm::{load_model, save_model, CovarianceType, GmmConfig};
use diffad::manifest_io::manifest::{manifest_dir, resolve};
use diffad::manifest_io::{load_landmarks, load_manifest, read_embeddings, write_embeddings, Label, VideoRecord};
use diffad::pipeline::{
    read_score_table, score_videos, test_records, to_scored_samples, train_model, training_records, write_score_table,
    InferConfig, TrainConfig, DEFAULT_MIN_GAP, DEFAULT_TRAIN_PAIRS, INFERENCE_PAIRS,
};
use diffad::synth::{prepare_frame, synthesize_video, FaceImage, SchemeChoice, TransformConfig};
use diffad::synthetic::{write_corpus, CorpusSpec};

/// Largest input for which `eval --oracle-check` runs the quadratic check.
const ORACLE_LIMIT: usize = 10_000;

#[derive(Parser)]
#[command(name = "diffad", version, about = "Pair-difference anomaly detection for face-swap videos")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args)]
struct Global {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Video manifest (JSON lines).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

impl Global {
    fn manifest(&self) -> Result<&Path> {
        self.manifest.as_deref().context("--manifest is required")
    }

    fn out(&self) -> Result<&Path> {
        self.out.as_deref().context("--out is required")
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write pseudo-fakes of every real frame, with a JSON provenance sidecar each.
    Synth(SynthArgs),
    /// Write the embedding file for every frame in the manifest.
    Extract(ExtractArgs),
    /// Fit the mixture on real training pairs and write the model file.
    FitAdm(FitArgs),
    /// Score the test videos and write the score table.
    Score(ScoreArgs),
    /// AUC report over one or more score tables.
    Eval(EvalArgs),
    /// Write a procedurally drawn corpus with a manifest.
    GenCorpus(CorpusArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// full-face, eye-region, mouth-nose-jaw, jawline-nose, or `all` for a
    /// random scheme per sample.
    #[arg(long, default_value = "all")]
    scheme: SchemeChoice,
    /// Pseudo-fakes per frame.
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Also write each blend mask as an 8-bit grayscale PNG.
    #[arg(long)]
    dump_masks: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExtractorArg {
    Toy,
    External,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long, value_enum, default_value_t = ExtractorArg::Toy)]
    extractor: ExtractorArg,
    /// Embedding file written by an outside extractor.
    #[arg(long, required_if_eq("extractor", "external"))]
    external_file: Option<PathBuf>,
    /// Expected embedding length for external files.
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Args)]
struct FitArgs {
    /// Embedding file covering the training videos.
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, default_value_t = CombinationMode::Sub2)]
    combine: CombinationMode,
    #[arg(long, default_value_t = 3)]
    components: usize,
    #[arg(long, default_value_t = CovarianceType::Diagonal)]
    covariance: CovarianceType,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Smallest frame gap of a training pair.
    #[arg(long, default_value_t = DEFAULT_MIN_GAP)]
    min_gap: usize,
    /// Training pairs drawn per video.
    #[arg(long, default_value_t = DEFAULT_TRAIN_PAIRS)]
    k_pairs: usize,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    /// Embedding file covering the test videos.
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, default_value_t = CombinationMode::Sub2)]
    combine: CombinationMode,
    #[arg(long, default_value_t = DEFAULT_MIN_GAP)]
    min_gap: usize,
    /// Pairs averaged per video.
    #[arg(long, default_value_t = INFERENCE_PAIRS)]
    n_pairs: usize,
}

#[derive(Args)]
struct EvalArgs {
    /// Score tables; each one is a dataset named after its file stem.
    #[arg(required = true)]
    tables: Vec<PathBuf>,
    /// Row label of the report.
    #[arg(long, default_value = "score")]
    label: String,
    /// Cross-check every AUC against the quadratic pairwise count.
    #[arg(long)]
    oracle_check: bool,
}

#[derive(Args)]
struct CorpusArgs {
    #[arg(long, default_value_t = 10)]
    train_real: usize,
    #[arg(long, default_value_t = 10)]
    test_real: usize,
    #[arg(long, default_value_t = 10)]
    test_fake: usize,
    #[arg(long, default_value_t = 40)]
    frames: usize,
    /// Mask scheme of the fake test videos, or `all`.
    #[arg(long, default_value = "all")]
    scheme: SchemeChoice,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let g = &cli.global;
    match &cli.command {
        Command::Synth(a) => synth(g, a),
        Command::Extract(a) => extract(g, a),
        Command::FitAdm(a) => fit_adm(g, a),
        Command::Score(a) => score(g, a),
        Command::Eval(a) => eval(g, a),
        Command::GenCorpus(a) => gen_corpus(g, a),
    }
}

fn load_frames(record: &VideoRecord, base: &Path) -> Result<Vec<(FaceImage, diffad::manifest_io::LandmarkSet)>> {
    let lms = load_landmarks(&resolve(base, &record.landmark_path), record.n_frames())?;
    record
        .frame_paths
        .iter()
        .zip(&lms)
        .map(|(p, lm)| {
            let raw = FaceImage::load(&resolve(base, p)).with_context(|| format!("loading {}", p.display()))?;
            Ok(prepare_frame(&raw, lm)?)
        })
        .collect()
}

fn synth(g: &Global, a: &SynthArgs) -> Result<()> {
    ensure!(a.count > 0, "--count must be positive");
    let manifest = g.manifest()?;
    let out = g.out()?;
    let base = manifest_dir(manifest);
    let cfg = TransformConfig::default();
    let mut written = 0;
    for record in load_manifest(manifest)?.iter().filter(|r| r.label == Label::Real) {
        let frames = load_frames(record, &base)?;
        let fakes = synthesize_video(&record.video_id, &frames, a.scheme, &cfg, a.count, g.seed)?;
        let dir = out.join(&record.video_id);
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        for (i, pf) in fakes.iter().enumerate() {
            let stem = format!("f{:03}_k{:02}", i / a.count, i % a.count);
            pf.image.save_png(&dir.join(format!("{stem}.png")))?;
            let json = serde_json::to_string_pretty(&pf.provenance)?;
            std::fs::write(dir.join(format!("{stem}.json")), json + "\n")?;
            if a.dump_masks {
                pf.mask_used.to_gray_image().save(dir.join(format!("{stem}_mask.png")))?;
            }
        }
        written += fakes.len();
    }
    log::info!("wrote {written} pseudo-fakes to {}", out.display());
    Ok(())
}

fn extract(g: &Global, a: &ExtractArgs) -> Result<()> {
    let manifest = g.manifest()?;
    let out = g.out()?;
    let records = load_manifest(manifest)?;
    let spec = match a.extractor {
        ExtractorArg::Toy => {
            ensure!(a.dim.is_none(), "--dim only applies to external embeddings");
            ExtractorSpec::toy()
        }
        ExtractorArg::External => ExtractorSpec::external(a.external_file.clone().expect("required by clap"), a.dim),
    };
    let store = extract_all(&records, &manifest_dir(manifest), &spec)?;
    write_embeddings(&store, out)?;
    log::info!("wrote {} embeddings of dim {} to {}", store.len(), store.dim(), out.display());
    Ok(())
}

fn fit_adm(g: &Global, a: &FitArgs) -> Result<()> {
    let records = training_records(&load_manifest(g.manifest()?)?);
    let out = g.out()?;
    let store = read_embeddings(&a.embeddings)?;
    validate_store(&store, &records, None)?;
    let cfg = TrainConfig {
        combine: a.combine,
        gmm: GmmConfig {
            n_components: a.components,
            covariance: a.covariance,
            tol: a.tol,
            max_iter: a.max_iter,
            seed: g.seed,
            ..GmmConfig::default()
        },
        k_pairs: a.k_pairs,
        min_gap: a.min_gap,
        seed: g.seed,
    };
    let (model, report) = train_model(&records, &store, &cfg)?;
    save_model(&model, out)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn score(g: &Global, a: &ScoreArgs) -> Result<()> {
    let records = test_records(&load_manifest(g.manifest()?)?);
    let out = g.out()?;
    let model = load_model(&a.model)?;
    let cfg = InferConfig { combine: a.combine, n_pairs: a.n_pairs, min_gap: a.min_gap, seed: g.seed };
    let scores = if records.is_empty() {
        Vec::new()
    } else {
        let store = read_embeddings(&a.embeddings)?;
        validate_store(&store, &records, Some(model.dim()))?;
        score_videos(&records, &store, &model, &cfg)?
    };
    write_score_table(&scores, out)?;
    log::info!("scored {} videos into {}", scores.len(), out.display());
    Ok(())
}

fn eval(g: &Global, a: &EvalArgs) -> Result<()> {
    let mut reports = Vec::new();
    for path in &a.tables {
        let name = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        let samples = to_scored_samples(&read_score_table(path)?)?;
        if a.oracle_check {
            if samples.len() < ORACLE_LIMIT {
                let (fast, slow) = (auc(&samples)?, auc_pairwise(&samples)?);
                if (fast - slow).abs() > 1e-12 {
                    bail!("{name}: AUC {fast} disagrees with the pairwise count {slow}");
                }
                log::info!("{name}: AUC matches the pairwise count");
            } else {
                log::warn!("{name}: {} samples, oracle check skipped", samples.len());
            }
        }
        let echo = ConfigEcho { seed: Some(g.seed), ..ConfigEcho::labeled(a.label.clone()) };
        reports.push(evaluate(name, &samples, echo)?);
    }
    let text = render_report(&reports);
    match &g.out {
        Some(p) => std::fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn gen_corpus(g: &Global, a: &CorpusArgs) -> Result<()> {
    let out = g.out()?;
    let spec = CorpusSpec {
        n_train_real: a.train_real,
        n_test_real: a.test_real,
        n_test_fake: a.test_fake,
        n_frames: a.frames,
        seed: g.seed,
        fake_scheme: a.scheme,
        transforms: TransformConfig::default(),
    };
    let manifest = write_corpus(out, &spec)?;
    println!("{}", manifest.display());
    Ok(())
}
