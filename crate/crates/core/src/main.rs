use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use activesg::error::Error;
use activesg::evaluation::{compute_metrics, match_objects, truth_objects, MatchThresholds, PredictedObject};
use activesg::exploration::PlannerKind;
use activesg::geometry::Vec3;
use activesg::harness::{aggregate_dirs, run_experiment, write_report_csv, ExperimentConfig, ExternalCameras};
use activesg::scene_model::{Embedder, GraphExport, SemanticEmbedding, DEFAULT_EMBEDDING_DIM};
use activesg::simulator::{generate_scene, SceneSpec, SceneTemplate, Vocabulary};

#[derive(Parser)]
#[command(name = "activesg", version, about = "Active RGB-only 3D scene graph experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scene from a template and write it as JSON.
    GenScene {
        /// apartment or furnished-room
        template: SceneTemplate,
        seed: u64,
        out: PathBuf,
    },
    /// Run one exploration experiment.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides experiment_seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        planner: Option<PlannerKind>,
        #[arg(long)]
        steps: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Preset name (overhead-1 .. overhead-4) or a JSON file of poses.
        #[arg(long)]
        external_cams: Option<String>,
        #[arg(long)]
        remote_sampler: Option<String>,
    },
    /// Score an exported graph against a ground-truth scene.
    Eval {
        graph: PathBuf,
        scene: PathBuf,
        #[arg(long, default_value_t = MatchThresholds::default().min_semantic)]
        min_semantic: f64,
        #[arg(long, default_value_t = MatchThresholds::default().max_centroid_dist)]
        max_centroid_dist: f64,
        /// Experiment seed the graph was produced with (embedding seed).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_EMBEDDING_DIM)]
        embedding_dim: usize,
    },
    /// Aggregate steps.csv files under the given directories.
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure with the process exit code it maps to.
struct Failure(u8, Error);

fn config_err(e: Error) -> Failure {
    Failure(2, e)
}

fn scene_err(e: Error) -> Failure {
    Failure(3, e)
}

fn classify(e: Error) -> Failure {
    match e {
        Error::Configuration(_) | Error::Parse { .. } | Error::InvalidArgument(_) => config_err(e),
        Error::SceneUnnavigable | Error::GenerationFailure(_) => scene_err(e),
        other => Failure(1, other),
    }
}

#[allow(clippy::too_many_arguments)]
fn run(
    config: Option<PathBuf>,
    seed: Option<u64>,
    planner: Option<PlannerKind>,
    steps: Option<usize>,
    out: Option<PathBuf>,
    external_cams: Option<String>,
    remote_sampler: Option<String>,
) -> Result<(), Failure> {
    let mut cfg = match config {
        Some(p) => ExperimentConfig::load(p).map_err(config_err)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.experiment_seed = s;
    }
    if let Some(p) = planner {
        cfg.planner.planner = p;
    }
    if let Some(s) = steps {
        cfg.steps = s;
    }
    if out.is_some() {
        cfg.output_dir = out;
    }
    if let Some(a) = external_cams {
        cfg.external_cameras = ExternalCameras::from_arg(&a).map_err(config_err)?;
    }
    if remote_sampler.is_some() {
        cfg.remote_sampler = remote_sampler;
    }
    cfg.validate().map_err(config_err)?;
    let vocabulary = cfg.load_vocabulary().map_err(config_err)?;
    let scene = cfg.scene.load(&vocabulary).map_err(scene_err)?;
    scene.validate(&vocabulary).map_err(scene_err)?;

    let result = run_experiment(&cfg).map_err(classify)?;
    if let Some(reason) = &result.stopped_early {
        log::info!("run stopped early: {reason}");
    }
    println!("{}", activesg::evaluation::STEPS_CSV_HEADER);
    for r in &result.records {
        println!("{}", r.csv_row());
    }
    Ok(())
}

/// Node embedding reconstructed from the exported label votes.
fn vote_embedding(
    votes: &std::collections::BTreeMap<String, u32>,
    embedder: &mut Embedder,
) -> Result<SemanticEmbedding, Error> {
    let mut acc = vec![0.0; embedder.dim()];
    for (label, &n) in votes {
        let e = embedder.embed(label)?;
        for (a, v) in acc.iter_mut().zip(e.values()) {
            *a += n as f64 * v;
        }
    }
    SemanticEmbedding::from_unnormalized(acc)
}

fn eval(graph: PathBuf, scene: PathBuf, th: MatchThresholds, seed: u64, embedding_dim: usize) -> Result<(), Failure> {
    th.validate().map_err(config_err)?;
    let text = std::fs::read_to_string(&graph).map_err(|e| config_err(Error::io(&graph, e)))?;
    let export: GraphExport = serde_json::from_str(&text).map_err(|e| config_err(Error::parse(&graph, &text, e)))?;
    let gt = SceneSpec::load(&scene, &Vocabulary::builtin()).map_err(scene_err)?;
    let mut embedder = Embedder::new(embedding_dim, seed);
    let pred = export
        .nodes
        .iter()
        .map(|n| {
            Ok(PredictedObject {
                id: n.id,
                embedding: vote_embedding(&n.label_votes, &mut embedder)?,
                center: Vec3::from(n.bbox.center),
            })
        })
        .collect::<Result<Vec<_>, Error>>()
        .map_err(config_err)?;
    let truth = truth_objects(&gt, &mut embedder).map_err(config_err)?;
    let matched = match_objects(&pred, &truth, &th).map_err(config_err)?;
    let m = compute_metrics(matched.len(), pred.len(), truth.len()).map_err(config_err)?;
    println!(
        "{}",
        serde_json::json!({
            "nodes_pred": pred.len(),
            "nodes_gt": truth.len(),
            "matched": matched.len(),
            "precision": m.precision,
            "recall": m.recall,
            "f1": m.f1,
        })
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::GenScene { template, seed, out } => generate_scene(template, seed)
            .and_then(|s| s.save(&out))
            .map_err(classify),
        Command::Run {
            config,
            seed,
            planner,
            steps,
            out,
            external_cams,
            remote_sampler,
        } => run(config, seed, planner, steps, out, external_cams, remote_sampler),
        Command::Eval {
            graph,
            scene,
            min_semantic,
            max_centroid_dist,
            seed,
            embedding_dim,
        } => eval(
            graph,
            scene,
            MatchThresholds {
                min_semantic,
                max_centroid_dist,
            },
            seed,
            embedding_dim,
        ),
        Command::Report { dirs, out } => aggregate_dirs(&dirs).map_err(config_err).and_then(|rows| {
            let written = match &out {
                Some(p) => std::fs::File::create(p).and_then(|f| write_report_csv(std::io::BufWriter::new(f), &rows)),
                None => write_report_csv(std::io::stdout().lock(), &rows),
            };
            written.map_err(|e| Failure(1, Error::io(out.as_deref().unwrap_or("<stdout>".as_ref()), e)))
        }),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, e)) => {
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}
