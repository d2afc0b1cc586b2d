//! Command line surface of the `egovqa` binary.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::conceptnet::{AssertionStore, ConceptId, RelationSet, DEFAULT_N_QUANTILES};
use crate::eval::{
    emit_submission, load_predictions_from_path, load_questions_from_path, load_report, run_all,
    save_predictions_to_path, save_report, score, select_ensemble, InferenceConfig,
    MethodAssignment, Mode, Prediction, RunResources,
};
use crate::knowledge::{
    build_graph, extract_paths, filter_paths, parse_reference_sentences, score_paths,
    EmbeddingBackend, HashEncoder, HttpEncoder, DEFAULT_GRAPH_DEPTH, DEFAULT_MAX_PATHS,
    DEFAULT_PATH_CAP, DEFAULT_WEIGHT_THRESHOLD,
};
use crate::media::{frame_manifest, plan_segments, temporal_divisor};
use crate::mllm::{FixtureBackend, HttpBackend, HttpModelConfig, MllmBackend};
use crate::scene::{
    merge_segments, parse_scene_graph, ParseOutcome, SceneBundle, SceneGraphDocument,
};

#[derive(Parser)]
#[command(
    name = "egovqa",
    version,
    about = "Commonsense knowledge graphs, video scene graphs, and multiple-choice \
             VQA evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest an assertion dump (TSV, optionally gzipped) into a store
    /// with quantile-normalized weights.
    Ingest {
        /// Dump file; gzip is detected from the content.
        #[arg(long)]
        dump: PathBuf,
        /// Concept language to retain.
        #[arg(long, default_value = "en")]
        lang: String,
        /// Relation whitelist config; the built-in set when omitted.
        #[arg(long)]
        relations: Option<PathBuf>,
        /// Landmark count for the weight transform.
        #[arg(long, default_value_t = DEFAULT_N_QUANTILES)]
        n_quantiles: usize,
        /// Store file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a knowledge graph per root concept and write its ranked,
    /// rendered paths as JSON lines.
    BuildKg {
        /// Store file produced by `ingest`.
        #[arg(long)]
        store: PathBuf,
        /// Root concept, as a concept URI or a bare label in the store's
        /// language. Repeatable.
        #[arg(long, required = true)]
        root: Vec<String>,
        /// Expansion depth in hops.
        #[arg(long, default_value_t = DEFAULT_GRAPH_DEPTH)]
        depth: usize,
        /// Strict lower bound on normalized edge weights.
        #[arg(long, default_value_t = DEFAULT_WEIGHT_THRESHOLD)]
        threshold: f64,
        /// Reference sentence file for ranking; the built-in set when
        /// omitted.
        #[arg(long)]
        refs: Option<PathBuf>,
        /// Text encoder used for similarity ranking.
        #[arg(long, value_enum, default_value_t = EncoderKind::Hash)]
        encoder: EncoderKind,
        /// Embedding service endpoint (required with --encoder http).
        #[arg(long)]
        endpoint: Option<String>,
        /// Top-ranked paths kept per root.
        #[arg(long, default_value_t = DEFAULT_MAX_PATHS)]
        max_paths: usize,
        /// Hard cap on enumerated paths per graph.
        #[arg(long, default_value_t = DEFAULT_PATH_CAP)]
        path_cap: usize,
        /// Output JSON-lines file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a scene graph JSON file; exits nonzero and lists the
    /// violations when it does not conform.
    ValidateSg {
        /// Scene graph document to check.
        file: PathBuf,
    },
    /// Print segmentation and subsampling plans for a video duration and
    /// optionally write its frame manifest.
    Plan {
        /// Video duration in seconds.
        #[arg(long)]
        duration: f64,
        /// Video id used in manifest entries.
        #[arg(long, default_value = "video")]
        video_id: String,
        /// Frame manifest file to write (a JSON list of frames).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse raw per-segment model outputs, globalize their timestamps
    /// and merge them into a bundle file.
    Bundle {
        /// Video id recorded in the bundle.
        #[arg(long)]
        video_id: String,
        /// JSON list of {segment_start, segment_duration, raw_file};
        /// relative raw_file paths resolve against this file's directory.
        #[arg(long)]
        segments: PathBuf,
        /// Bundle file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Answer benchmark questions under one inference configuration.
    Run {
        /// Inference mode: video, snet, knet, snet+knet or knet-from-snet.
        #[arg(long)]
        mode: Mode,
        /// Question file (JSON lines).
        #[arg(long)]
        questions: PathBuf,
        /// Predictions file to write (JSON lines).
        #[arg(long)]
        out: PathBuf,
        /// Scene graph bundle file, keyed by its video id. Repeatable.
        #[arg(long)]
        bundle: Vec<PathBuf>,
        /// Ranked path file from `build-kg`.
        #[arg(long)]
        paths: Option<PathBuf>,
        /// Fixture directory of {prompt hash}.txt responses.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// HTTP model config file (endpoint, model, api_key_env).
        #[arg(long)]
        http_config: Option<PathBuf>,
        /// Include the video in prompts; auto follows the mode's default.
        #[arg(long, value_enum, default_value_t = VideoChoice::Auto)]
        include_video: VideoChoice,
        /// Worker threads; output order never depends on this.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Score predictions against gold answers into a category report.
    Score {
        /// Predictions file (JSON lines).
        #[arg(long)]
        preds: PathBuf,
        /// Question file with gold answers (JSON lines).
        #[arg(long)]
        gold: PathBuf,
        /// Report file to write; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pick the best configuration per micro-category from report files.
    Ensemble {
        /// Directory of report JSON files.
        #[arg(long)]
        reports: PathBuf,
        /// Assignment file to write; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assemble the submission CSV from an assignment and per-config
    /// prediction files.
    Submit {
        /// Assignment file from `ensemble`.
        #[arg(long)]
        assignment: PathBuf,
        /// Directory of prediction JSON-lines files.
        #[arg(long)]
        preds: PathBuf,
        /// Question file whose ids the submission must cover exactly.
        #[arg(long)]
        gold: Option<PathBuf>,
        /// CSV file to write; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EncoderKind {
    /// Deterministic offline hash-projection encoder.
    Hash,
    /// HTTP embedding service.
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VideoChoice {
    Auto,
    Yes,
    No,
}

/// Embedding width of the offline hash encoder.
const HASH_ENCODER_DIM: usize = 384;

pub fn main() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Ingest {
            dump,
            lang,
            relations,
            n_quantiles,
            out,
        } => cmd_ingest(&dump, &lang, relations.as_deref(), n_quantiles, &out),
        Command::BuildKg {
            store,
            root,
            depth,
            threshold,
            refs,
            encoder,
            endpoint,
            max_paths,
            path_cap,
            out,
        } => cmd_build_kg(BuildKgArgs {
            store,
            roots: root,
            depth,
            threshold,
            refs,
            encoder,
            endpoint,
            max_paths,
            path_cap,
            out,
        }),
        Command::ValidateSg { file } => return cmd_validate_sg(&file),
        Command::Plan {
            duration,
            video_id,
            out,
        } => cmd_plan(duration, &video_id, out.as_deref()),
        Command::Bundle {
            video_id,
            segments,
            out,
        } => cmd_bundle(&video_id, &segments, &out),
        Command::Run {
            mode,
            questions,
            out,
            bundle,
            paths,
            fixtures,
            http_config,
            include_video,
            jobs,
        } => cmd_run(RunArgs {
            mode,
            questions,
            out,
            bundles: bundle,
            paths,
            fixtures,
            http_config,
            include_video,
            jobs,
        }),
        Command::Score { preds, gold, out } => cmd_score(&preds, &gold, out.as_deref()),
        Command::Ensemble { reports, out } => cmd_ensemble(&reports, out.as_deref()),
        Command::Submit {
            assignment,
            preds,
            gold,
            out,
        } => cmd_submit(&assignment, &preds, gold.as_deref(), out.as_deref()),
    }
    .map(|()| ExitCode::SUCCESS)
}

fn write_text(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_ingest(
    dump: &Path,
    lang: &str,
    relations: Option<&Path>,
    n_quantiles: usize,
    out: &Path,
) -> anyhow::Result<()> {
    let relations = match relations {
        Some(path) => RelationSet::from_config_file(path)
            .with_context(|| format!("reading relation config {}", path.display()))?,
        None => RelationSet::default_whitelist(),
    };
    let (assertions, stats) = crate::conceptnet::load_assertions(dump, lang, &relations)
        .with_context(|| format!("ingesting {}", dump.display()))?;
    let mut store = AssertionStore::from_assertions(lang, relations, assertions)?;
    let transform = store
        .fit_quantile_transform(n_quantiles)
        .context("fitting the weight transform (is the dump empty?)")?;
    store.normalize_weights(transform);
    store
        .save_to_path(out)
        .with_context(|| format!("writing {}", out.display()))?;
    println!("{}", serde_json::to_string(&stats)?);
    Ok(())
}

struct BuildKgArgs {
    store: PathBuf,
    roots: Vec<String>,
    depth: usize,
    threshold: f64,
    refs: Option<PathBuf>,
    encoder: EncoderKind,
    endpoint: Option<String>,
    max_paths: usize,
    path_cap: usize,
    out: PathBuf,
}

/// One ranked path on the wire: the root, the alternating node/relation
/// element list, the rendered sentence and its similarity score.
#[derive(Debug, Serialize, Deserialize)]
struct PathRow {
    root: String,
    path_elements: Vec<String>,
    text: String,
    score: f64,
}

fn resolve_root(store: &AssertionStore, raw: &str) -> anyhow::Result<ConceptId> {
    let id = if raw.starts_with("/c/") {
        ConceptId::new(raw)?
    } else {
        ConceptId::from_label(store.language(), raw)?
    };
    Ok(id)
}

fn cmd_build_kg(args: BuildKgArgs) -> anyhow::Result<()> {
    let store = AssertionStore::load_from_path(&args.store)
        .with_context(|| format!("loading store {}", args.store.display()))?;
    let references = match &args.refs {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let refs = parse_reference_sentences(&text);
            if refs.is_empty() {
                bail!("reference file {} holds no sentences", path.display());
            }
            refs
        }
        None => crate::knowledge::default_reference_sentences(),
    };
    let encoder: Box<dyn EmbeddingBackend> = match args.encoder {
        EncoderKind::Hash => Box::new(HashEncoder::new(HASH_ENCODER_DIM)),
        EncoderKind::Http => {
            let endpoint = args
                .endpoint
                .as_deref()
                .context("--encoder http requires --endpoint")?;
            Box::new(HttpEncoder::new(endpoint))
        }
    };

    let file = std::fs::File::create(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let mut w = std::io::BufWriter::new(file);
    for raw_root in &args.roots {
        let root = resolve_root(&store, raw_root)?;
        let graph = build_graph(&store, &root, args.depth, args.threshold)?;
        let mut paths = extract_paths(&graph, args.path_cap);
        score_paths(&mut paths, &references, encoder.as_ref())?;
        let kept = filter_paths(paths, args.max_paths);
        for p in &kept {
            let row = PathRow {
                root: root.as_str().to_string(),
                path_elements: p.elements(),
                text: p.text.clone().expect("ranked paths are rendered"),
                score: p.score.expect("ranked paths are scored"),
            };
            use std::io::Write;
            serde_json::to_writer(&mut w, &row)?;
            w.write_all(b"\n")?;
        }
        println!(
            "{}: {} nodes, {} edges, {} paths kept",
            root.as_str(),
            graph.node_count(),
            graph.edge_count(),
            kept.len()
        );
    }
    Ok(())
}

fn cmd_validate_sg(file: &Path) -> anyhow::Result<ExitCode> {
    let raw =
        std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    match parse_scene_graph(&raw) {
        ParseOutcome::Parsed(g) => {
            println!(
                "ok: {} nodes, {} edges, {} actions",
                g.nodes.len(),
                g.binary_edges.len(),
                g.actions.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        ParseOutcome::Rejected { violations, .. } => {
            for v in &violations {
                match &v.element {
                    Some(e) => eprintln!("{}: {} ({e})", v.rule, v.message),
                    None => eprintln!("{}: {}", v.rule, v.message),
                }
            }
            Ok(ExitCode::FAILURE)
        }
    }
}

fn cmd_plan(duration: f64, video_id: &str, out: Option<&Path>) -> anyhow::Result<()> {
    let segments = plan_segments(duration)?;
    let temporal = temporal_divisor(duration);
    let manifest = frame_manifest(video_id, duration)?;
    let summary = serde_json::json!({
        "video_id": video_id,
        "duration_s": duration,
        "divisor": temporal.divisor,
        "effective_duration_s": temporal.effective_duration_s,
        "segments": segments,
        "frame_count": manifest.frames.len(),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    if let Some(path) = out {
        let mut text = serde_json::to_string_pretty(&manifest.frames)?;
        text.push('\n');
        write_text(Some(path), &text)?;
    }
    Ok(())
}

/// One entry of the `bundle` segment manifest.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentSource {
    segment_start: f64,
    segment_duration: f64,
    raw_file: PathBuf,
}

fn cmd_bundle(video_id: &str, segments: &Path, out: &Path) -> anyhow::Result<()> {
    let manifest_text = std::fs::read_to_string(segments)
        .with_context(|| format!("reading {}", segments.display()))?;
    let sources: Vec<SegmentSource> = serde_json::from_str(&manifest_text)
        .with_context(|| format!("parsing {}", segments.display()))?;
    let base = segments.parent().unwrap_or_else(|| Path::new("."));

    let mut docs = Vec::new();
    let mut quarantined = 0usize;
    for source in &sources {
        let raw_path = if source.raw_file.is_relative() {
            base.join(&source.raw_file)
        } else {
            source.raw_file.clone()
        };
        let raw = std::fs::read_to_string(&raw_path)
            .with_context(|| format!("reading {}", raw_path.display()))?;
        let mut doc =
            SceneGraphDocument::from_raw(source.segment_start, source.segment_duration, &raw);
        if !doc.is_parsed() {
            quarantined += 1;
        }
        doc.globalize();
        docs.push(doc);
    }
    let bundle = merge_segments(video_id, docs)?;
    bundle
        .save_to_path(out)
        .with_context(|| format!("writing {}", out.display()))?;
    println!(
        "{video_id}: {} segments ({} quarantined)",
        bundle.segments.len(),
        quarantined
    );
    Ok(())
}

struct RunArgs {
    mode: Mode,
    questions: PathBuf,
    out: PathBuf,
    bundles: Vec<PathBuf>,
    paths: Option<PathBuf>,
    fixtures: Option<PathBuf>,
    http_config: Option<PathBuf>,
    include_video: VideoChoice,
    jobs: usize,
}

fn load_path_texts(path: &Path) -> anyhow::Result<Vec<String>> {
    use std::io::BufRead;
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut texts = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: PathRow =
            serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        texts.push(row.text);
    }
    Ok(texts)
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let questions = load_questions_from_path(&args.questions)
        .with_context(|| format!("loading {}", args.questions.display()))?;

    let include_video = match args.include_video {
        VideoChoice::Auto => args.mode.default_include_video(),
        VideoChoice::Yes => true,
        VideoChoice::No => false,
    };
    let cfg = InferenceConfig::new(args.mode, include_video)?;

    let backend: Box<dyn MllmBackend> = match (&args.fixtures, &args.http_config) {
        (Some(dir), None) => Box::new(FixtureBackend::new(dir)),
        (None, Some(config)) => Box::new(HttpBackend::new(HttpModelConfig::from_file(config)?)?),
        _ => bail!("choose exactly one backend: --fixtures or --http-config"),
    };

    let mut bundles: BTreeMap<String, SceneBundle> = BTreeMap::new();
    for path in &args.bundles {
        let bundle = SceneBundle::load_from_path(path)
            .with_context(|| format!("loading {}", path.display()))?;
        if bundles.insert(bundle.video_id.clone(), bundle).is_some() {
            bail!("two bundles share a video id ({})", path.display());
        }
    }
    let path_texts = args.paths.as_deref().map(load_path_texts).transpose()?;

    let resources = RunResources {
        backend: backend.as_ref(),
        bundles: (!bundles.is_empty()).then_some(&bundles),
        path_texts: path_texts.as_deref(),
    };
    let predictions = run_all(&questions, cfg, &resources, args.jobs)?;
    save_predictions_to_path(&args.out, &predictions)
        .with_context(|| format!("writing {}", args.out.display()))?;
    let answered = predictions.iter().filter(|p| p.answer.is_some()).count();
    println!(
        "{cfg}: {} questions, {} answered, {} abstained",
        predictions.len(),
        answered,
        predictions.len() - answered
    );
    Ok(())
}

fn cmd_score(preds: &Path, gold: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let predictions = load_predictions_from_path(preds)
        .with_context(|| format!("loading {}", preds.display()))?;
    let questions =
        load_questions_from_path(gold).with_context(|| format!("loading {}", gold.display()))?;
    let report = score(&predictions, &questions)?;
    match out {
        Some(path) => {
            save_report(path, &report)?;
            println!(
                "{}: overall {:.2}% ({}/{})",
                report.config,
                report.overall.accuracy_pct,
                report.overall.correct,
                report.overall.total
            );
        }
        None => {
            let mut text = serde_json::to_string_pretty(&report)?;
            text.push('\n');
            print!("{text}");
        }
    }
    Ok(())
}

fn sorted_files(dir: &Path, extension: &str) -> anyhow::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading directory {}", dir.display()))?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|entry| entry.path())
        .filter(|p| p.extension().is_some_and(|e| e == extension))
        .collect();
    files.sort();
    Ok(files)
}

fn cmd_ensemble(reports_dir: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let files = sorted_files(reports_dir, "json")?;
    let mut reports = Vec::new();
    for path in &files {
        reports.push(load_report(path).with_context(|| format!("loading {}", path.display()))?);
    }
    let assignment = select_ensemble(&reports)?;
    match out {
        Some(path) => {
            assignment.save(path)?;
            println!(
                "assigned {} micro-categories from {} reports",
                assignment.assignments.len(),
                reports.len()
            );
        }
        None => {
            let mut text = serde_json::to_string_pretty(&assignment)?;
            text.push('\n');
            print!("{text}");
        }
    }
    Ok(())
}

fn cmd_submit(
    assignment: &Path,
    preds_dir: &Path,
    gold: Option<&Path>,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let assignment = MethodAssignment::load(assignment)?;
    let mut by_config: BTreeMap<InferenceConfig, Vec<Prediction>> = BTreeMap::new();
    for path in sorted_files(preds_dir, "jsonl")? {
        let predictions = load_predictions_from_path(&path)
            .with_context(|| format!("loading {}", path.display()))?;
        for p in predictions {
            by_config.entry(p.config()).or_default().push(p);
        }
    }
    let predictions_by_config: Vec<(InferenceConfig, Vec<Prediction>)> =
        by_config.into_iter().collect();

    let required_ids: Option<BTreeSet<String>> = match gold {
        Some(path) => Some(
            load_questions_from_path(path)
                .with_context(|| format!("loading {}", path.display()))?
                .into_iter()
                .map(|q| q.id)
                .collect(),
        ),
        None => None,
    };
    let csv = emit_submission(&assignment, &predictions_by_config, required_ids.as_ref())?;
    write_text(out, &csv)
}
