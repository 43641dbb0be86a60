use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use snipmine::annotation::{build_sampling_plan, to_jsonl, AnnotationStore, FIXED_SET_SIZE, SAMPLED_SET_SIZE};
use snipmine::corr::Direction;
use snipmine::pipeline::{artifact::write_atomic, Pipeline, PipelineConfig, ValidatorKind};
use snipmine::synth::{generate, Flavor, SynthConfig};
use snipmine::{Error, Result};
use snipmine_annotate::AppState;

#[derive(Parser)]
#[command(name = "snipmine", version, about = "Mine intent/snippet pairs from Stack Exchange dumps")]
struct Cli {
    /// Pipeline configuration (TOML). Relative paths inside it resolve
    /// against the file's directory.
    #[arg(long, global = true, default_value = "snipmine.toml")]
    config: PathBuf,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the stages that parallelize.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Accept upstream artifacts written under a different config hash.
    #[arg(long, global = true)]
    force: bool,
    /// External validator; `{file}` is replaced by the snippet's temp file.
    #[arg(long, global = true)]
    validator_cmd: Option<String>,
    #[arg(long, global = true)]
    embed_dim: Option<usize>,
    #[arg(long, global = true)]
    hidden_dim: Option<usize>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    I2s,
    S2i,
}

#[derive(Clone, Copy, ValueEnum)]
enum FlavorArg {
    #[value(alias = "python")]
    A,
    #[value(alias = "java")]
    B,
}

#[derive(Subcommand)]
enum Command {
    /// Parse Posts.xml into question threads.
    Ingest,
    /// Build the title/code corpus for the correspondence model.
    Corpus,
    /// Enumerate and validate candidate snippets.
    Candidates,
    /// Train the correspondence model(s).
    TrainCorr {
        /// Train one direction only.
        #[arg(long, value_enum)]
        direction: Option<DirectionArg>,
    },
    /// Score every candidate with the correspondence models.
    ScoreCorr,
    /// Extract structural features.
    Featurize,
    /// Cross-validate and fit the pair classifiers.
    Train,
    /// Write ranked intent/snippet pairs.
    Mine {
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        min_prob: Option<f64>,
    },
    /// Compare systems and baselines against gold annotations.
    Evaluate,
    /// Apply a classifier trained on another language.
    Transfer {
        /// Classifier file from the source language's `train`.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Configuration of the target language; defaults to --config.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Serve the annotation HTTP API on 127.0.0.1.
    ServeAnnotation {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Annotation log; defaults to paths.annotations.
        #[arg(long)]
        store_path: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        plan_seed: u64,
    },
    /// Every stage from ingest through evaluate.
    Run,
    /// Write a synthetic dump, its gold annotations and a configuration.
    /// The generator seed is --seed (default 1).
    Synth {
        #[arg(long, value_enum, default_value = "a")]
        flavor: FlavorArg,
        #[arg(long)]
        out: PathBuf,
    },
}

impl Cli {
    fn pipeline(&self, config_path: &Path) -> Result<Pipeline> {
        let text = std::fs::read_to_string(config_path).map_err(|source| Error::File {
            path: config_path.to_path_buf(),
            source,
        })?;
        let mut cfg = PipelineConfig::from_toml(&text)?;
        if let Some(seed) = self.seed {
            cfg.set_seed(seed);
        }
        if let Some(cmd) = &self.validator_cmd {
            cfg.validator.kind = ValidatorKind::Command;
            cfg.validator.command = Some(cmd.clone());
        }
        if let Some(v) = self.embed_dim {
            cfg.corr.embed_dim = v;
        }
        if let Some(v) = self.hidden_dim {
            cfg.corr.hidden_dim = v;
        }
        if let Some(v) = self.epochs {
            cfg.corr.max_epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.corr.batch_size = v;
        }
        if let Command::Mine { top_k, min_prob } = &self.command {
            if top_k.is_some() {
                cfg.mine.top_k = *top_k;
            }
            if let Some(p) = min_prob {
                cfg.mine.min_prob = *p;
            }
        }
        cfg.check()?;
        let base = config_path.parent().unwrap_or(Path::new("."));
        let mut p = Pipeline::new(cfg, base);
        if let Some(j) = self.jobs {
            p = p.with_jobs(j);
        }
        p.force = self.force;
        Ok(p)
    }
}

fn synth(flavor: FlavorArg, seed: u64, out: &Path) -> Result<()> {
    let flavor = match flavor {
        FlavorArg::A => Flavor::A,
        FlavorArg::B => Flavor::B,
    };
    let fx = generate(&SynthConfig::new(flavor, seed));
    let mut cfg = PipelineConfig::new(fx.language.as_str());
    cfg.corr.embed_dim = 32;
    cfg.corr.hidden_dim = 64;
    cfg.corr.max_epochs = 10;
    write_atomic(&out.join("Posts.xml"), fx.dump_xml.as_bytes())?;
    write_atomic(&out.join("annotations.jsonl"), to_jsonl(&fx.gold).as_bytes())?;
    write_atomic(&out.join("snipmine.toml"), cfg.to_toml().as_bytes())?;
    println!(
        "synth: {} threads, {} gold annotations in {}",
        fx.threads.len(),
        fx.gold.len(),
        out.display()
    );
    Ok(())
}

fn serve_annotation(p: &Pipeline, port: u16, store_path: Option<&Path>, plan_seed: u64) -> Result<()> {
    let threads = p.howto_threads()?;
    let plan = build_sampling_plan(&threads, plan_seed, FIXED_SET_SIZE, SAMPLED_SET_SIZE);
    let store_path = store_path.unwrap_or(&p.paths.annotations);
    let store = AnnotationStore::open(store_path)?;
    log::info!(
        "serving {} threads, plan of {}, {} stored annotations",
        threads.len(),
        plan.fixed.len() + plan.sampled.len(),
        store.len()
    );
    let state = Arc::new(AppState::new(threads, plan, store));
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], port))).await?;
        println!("listening on http://{}", listener.local_addr()?);
        tokio::select! {
            r = snipmine_annotate::serve(listener, state) => r,
            _ = tokio::signal::ctrl_c() => Ok(()),
        }
    })?;
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Command::Synth { flavor, out } = &cli.command {
        return synth(*flavor, cli.seed.unwrap_or(1), out);
    }
    if let Command::Transfer { model, data } = &cli.command {
        let p = cli.pipeline(data.as_deref().unwrap_or(&cli.config))?;
        let r = p.transfer(model.as_deref())?;
        println!("transfer: {} predictions -> {}", r.predictions, p.transfer_predictions_path().display());
        if let Some(e) = &r.evaluation {
            for (name, s) in &e.systems {
                println!("  {name:<20} AUC {:.4}", s.auc);
            }
        }
        return Ok(());
    }
    let p = cli.pipeline(&cli.config)?;
    match &cli.command {
        Command::Ingest => {
            let s = p.ingest()?;
            println!("ingest: {} threads", s.questions);
        }
        Command::Corpus => println!("corpus: {} pairs", p.corpus()?),
        Command::Candidates => println!("candidates: {} kept", p.candidates_stage()?),
        Command::TrainCorr { direction } => {
            let d = direction.map(|d| match d {
                DirectionArg::I2s => Direction::IntentToSnippet,
                DirectionArg::S2i => Direction::SnippetToIntent,
            });
            for r in p.train_corr(d)? {
                println!("{}", serde_json::to_string(&r).unwrap_or_default());
            }
        }
        Command::ScoreCorr => println!("score-corr: {} candidates", p.score_corr()?),
        Command::Featurize => println!("featurize: {} candidates", p.featurize()?),
        Command::Train => {
            p.train()?;
            println!("train: models in {}", p.paths.models_dir.display());
        }
        Command::Mine { .. } => {
            let mined = p.mine()?;
            println!("mine: {} pairs -> {}", mined.len(), p.mined_path().display());
        }
        Command::Evaluate | Command::Run => {
            let report = if matches!(cli.command, Command::Run) {
                p.run_all()?
            } else {
                p.evaluate()?
            };
            println!("{} positives, {} negatives", report.positives, report.negatives);
            for (name, s) in &report.systems {
                println!("  {name:<20} AUC {:.4}", s.auc);
            }
        }
        Command::ServeAnnotation {
            port,
            store_path,
            plan_seed,
        } => serve_annotation(&p, *port, store_path.as_deref(), *plan_seed)?,
        Command::Synth { .. } | Command::Transfer { .. } => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors are user errors; --help and --version are not errors
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() { 1 } else { 2 })
        }
    }
}
