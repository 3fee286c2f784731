use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rankflow::config::{Provenance, RunConfig};
use rankflow::gtgen::{discrepancy_offsets_with, threshold_grid, GtMethod};
use rankflow::ingest::{read_ranking, write_ranking};
use rankflow::metrics::evaluate;
use rankflow::pipeline;
use rankflow::scorer::{read_model, write_model};
use rankflow::synth::{generate_dataset, Allocation};
use rankflow::{exec, Error, Execution, Result};

#[derive(Parser)]
#[command(
    name = "rankflow",
    version,
    about = "Object saliency ranking from fixation data"
)]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "RANKFLOW_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic dataset.
    Synth(SynthArgs),
    /// Filter proposals and extract features.
    Preprocess(PreprocessArgs),
    /// Generate ground-truth rankings.
    GtGen(GtGenArgs),
    /// Ranking offsets between consecutive GT thresholds.
    GtDiscrepancy(DiscrepancyArgs),
    /// Train the window scorer.
    Train(TrainArgs),
    /// Rank proposals with a trained scorer.
    Rank(RankArgs),
    /// Rank proposals from saliency maps.
    MapRank(MapRankArgs),
    /// Compare predicted and ground-truth rankings.
    Eval(EvalArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    scenes: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Objects per scene as MIN:MAX (inclusive).
    #[arg(long, value_parser = parse_range)]
    objects: Option<(usize, usize)>,
    #[arg(long)]
    fixations: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    salient_fraction: Option<f64>,
    /// Draw object fixations multinomially instead of proportionally.
    #[arg(long)]
    multinomial: bool,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GtArgs {
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args)]
struct GtGenArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// fixpoints | mapmax | mapavg | binmap | rasrgt
    #[arg(long)]
    method: Option<GtMethod>,
    #[command(flatten)]
    gt: GtArgs,
}

#[derive(Args)]
struct DiscrepancyArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    start: f64,
    #[arg(long, default_value_t = 1.0)]
    end: f64,
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Preprocessed dataset directory.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Feature directory (default: IN/features).
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Args)]
struct RankArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    window: Option<usize>,
}

#[derive(Args)]
struct MapRankArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    maps: PathBuf,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn parse_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or("expected MIN:MAX")?;
    let lo = a.trim().parse::<usize>().map_err(|e| e.to_string())?;
    let hi = b.trim().parse::<usize>().map_err(|e| e.to_string())?;
    Ok((lo, hi))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.into(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let par = Execution::Parallel;
    match cli.command {
        Command::Synth(a) => {
            let s = &mut cfg.synth;
            s.seed = a.seed.unwrap_or(s.seed);
            s.n_scenes = a.scenes.unwrap_or(s.n_scenes);
            s.objects = a.objects.unwrap_or(s.objects);
            s.fixations = a.fixations.unwrap_or(s.fixations);
            s.noise_fraction = a.noise.unwrap_or(s.noise_fraction);
            s.salient_fraction = a.salient_fraction.unwrap_or(s.salient_fraction);
            if a.multinomial {
                s.allocation = Allocation::Multinomial;
            }
            cfg.validate()?;
            let m = generate_dataset(&cfg.synth, &cfg.gt, &a.out, par)?;
            log::info!("wrote {} scenes to {}", m.scenes.len(), a.out.display());
            Provenance::new("synth", &cfg, Some(cfg.synth.seed)).write_for_dir(&a.out)
        }
        Command::Preprocess(a) => {
            cfg.validate()?;
            let n = pipeline::preprocess_dir(&a.input, &a.out, &cfg.filter, par)?;
            log::info!("preprocessed {n} scenes into {}", a.out.display());
            Provenance::new("preprocess", &cfg, None).write_for_dir(&a.out)
        }
        Command::GtGen(a) => {
            cfg.gt.method = a.method.unwrap_or(cfg.gt.method);
            cfg.gt.gamma = a.gt.gamma.unwrap_or(cfg.gt.gamma);
            cfg.gt.beta = a.gt.beta.unwrap_or(cfg.gt.beta);
            cfg.validate()?;
            let scenes = pipeline::load_scenes(&a.input, par)?;
            let gt = pipeline::gt_rankings(&scenes, &cfg.gt, par)?;
            write_ranking(&gt, &a.out)?;
            log::info!("wrote GT for {} scenes to {}", gt.len(), a.out.display());
            Provenance::new("gt-gen", &cfg, None).write_for_file(&a.out)
        }
        Command::GtDiscrepancy(a) => {
            cfg.gt.beta = a.beta.unwrap_or(cfg.gt.beta);
            cfg.validate()?;
            let grid = threshold_grid(a.start, a.end, a.step)?;
            let scenes = pipeline::load_scenes(&a.input, par)?;
            let offsets = discrepancy_offsets_with(&scenes, &cfg.gt, &grid, par)?;
            write_text(&a.out, &pipeline::discrepancy_csv(&offsets))?;
            Provenance::new("gt-discrepancy", &cfg, None).write_for_file(&a.out)
        }
        Command::Train(a) => {
            let t = &mut cfg.train;
            t.epochs = a.epochs.unwrap_or(t.epochs);
            t.seed = a.seed.unwrap_or(t.seed);
            t.alpha = a.alpha.unwrap_or(t.alpha);
            t.lr = a.lr.unwrap_or(t.lr);
            cfg.window = a.window.unwrap_or(cfg.window);
            cfg.validate()?;
            let scenes = pipeline::load_scenes(&a.input, par)?;
            let fdir = a.features.unwrap_or_else(|| a.input.join("features"));
            let features = pipeline::load_features(&fdir, &scenes, par)?;
            let gt = read_ranking(&a.gt)?;
            let out = pipeline::train_scorer(&scenes, &features, &gt, cfg.window, &cfg.train, par)?;
            for (i, l) in out.epoch_losses.iter().enumerate() {
                log::info!("epoch {} mean loss {l:.6}", i + 1);
            }
            write_model(&out.model, &a.out)?;
            Provenance::new("train", &cfg, Some(cfg.train.seed)).write_for_file(&a.out)
        }
        Command::Rank(a) => {
            cfg.window = a.window.unwrap_or(cfg.window);
            cfg.validate()?;
            let model = read_model(&a.model)?;
            if model.window() != cfg.window {
                return Err(Error::ShapeMismatch(format!(
                    "model was trained for windows of {}, not {}",
                    model.window(),
                    cfg.window
                )));
            }
            let scenes = pipeline::load_scenes(&a.input, par)?;
            let fdir = a.features.unwrap_or_else(|| a.input.join("features"));
            let features = pipeline::load_features(&fdir, &scenes, par)?;
            let ranked = pipeline::rank_with_model(&scenes, &features, &model, par)?;
            write_ranking(&ranked, &a.out)?;
            Provenance::new("rank", &cfg, None).write_for_file(&a.out)
        }
        Command::MapRank(a) => {
            cfg.lambda = a.lambda.unwrap_or(cfg.lambda);
            cfg.validate()?;
            let scenes = pipeline::load_scenes(&a.input, par)?;
            let ranked = pipeline::map_rankings(&scenes, &a.maps, cfg.lambda, par)?;
            write_ranking(&ranked, &a.out)?;
            Provenance::new("map-rank", &cfg, None).write_for_file(&a.out)
        }
        Command::Eval(a) => {
            cfg.validate()?;
            let report = evaluate(&read_ranking(&a.pred)?, &read_ranking(&a.gt)?)?;
            let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
            text.push('\n');
            write_text(&a.out, &text)?;
            log::info!(
                "mean SRCC {:?}, mean F1 {:?}, skipped {}",
                report.mean_srcc,
                report.mean_f1,
                report.skipped
            );
            Provenance::new("eval", &cfg, None).write_for_file(&a.out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let jobs = cli.jobs.unwrap_or(0);
    match exec::with_jobs(jobs, || run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(2)
        }
    }
}
