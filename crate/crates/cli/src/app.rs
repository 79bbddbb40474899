use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{ArgGroup, Args, Parser, Subcommand};
use fishbone_core::render::{RenderFormat, RenderOptions};

use crate::config::PipelineConfig;
use crate::error::CliError;
use crate::fsutil::{write_atomic, OutputLock};
use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::stages::{self, Context, RenderTarget, StageOutput};

#[derive(Debug, Parser)]
#[command(
    name = "fishbone",
    version,
    about = "Bird's-eye fish-bone surveys from paper introductions"
)]
pub struct Cli {
    /// Log more (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Pipeline config (TOML).
    #[arg(short, long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["pred", "model"])))]
pub struct EvalArgs {
    /// Predicted labels, same TSV layout as the gold file.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Trained model to score on the gold sentences.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Gold annotations (TSV).
    #[arg(long)]
    pub data: PathBuf,
    /// Write the JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Config for the embedder; also records the run in its manifest.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Diagram JSON; defaults to the one `build` wrote.
    #[arg(long)]
    pub diagram: Option<PathBuf>,
    /// json, dot or svg. Defaults to the extension of --out, or to every
    /// format in the config.
    #[arg(long)]
    pub format: Option<RenderFormat>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load the corpus and keep papers mentioning the topic.
    Ingest(ConfigArg),
    /// Split each introduction into sentences.
    Segment(ConfigArg),
    /// Fit the issue classifier on the annotations.
    Train(ConfigArg),
    /// Score predictions or a model against gold labels.
    Eval(EvalArgs),
    /// Label every sentence.
    Classify(ConfigArg),
    /// Group papers into tasks and issues into fine-bones.
    Cluster(ConfigArg),
    /// Name, link and summarize into a diagram.
    Build(ConfigArg),
    /// Draw the diagram as JSON, DOT or SVG.
    Render(RenderArgs),
    /// Run every stage in order.
    Pipeline(ConfigArg),
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest(a) => single(&a.config, "ingest", stages::ingest),
        Command::Segment(a) => single(&a.config, "segment", stages::segment),
        Command::Train(a) => single(&a.config, "train", stages::train),
        Command::Classify(a) => single(&a.config, "classify", stages::classify),
        Command::Cluster(a) => single(&a.config, "cluster", stages::cluster),
        Command::Build(a) => single(&a.config, "build", stages::build),
        Command::Eval(a) => eval(a),
        Command::Render(a) => render(a),
        Command::Pipeline(a) => {
            let ctx = Context::new(PipelineConfig::load(&a.config)?)?;
            let _lock = OutputLock::acquire(ctx.out_dir())?;
            let m = stages::pipeline(&ctx)?;
            for (name, digest) in &m.outputs {
                println!("{digest}  {name}");
            }
            println!("manifest: {}", ctx.out_dir().join(MANIFEST_FILE).display());
            Ok(())
        }
    }
}

/// One stage under the output lock, recorded into the existing manifest.
fn single(
    config: &Path,
    name: &str,
    stage: impl FnOnce(&Context) -> Result<StageOutput, CliError>,
) -> Result<(), CliError> {
    let ctx = Context::new(PipelineConfig::load(config)?)?;
    let _lock = OutputLock::acquire(ctx.out_dir())?;
    let mut manifest = RunManifest::resume(ctx.out_dir(), &ctx.config_hash)?;
    let result = stages::run_stage(&ctx, &mut manifest, name, stage);
    manifest.write(ctx.out_dir())?;
    result
}

fn eval(a: EvalArgs) -> Result<(), CliError> {
    let gold = stages::read_gold(&a.data)?;
    let score = |ctx: Option<&Context>| -> Result<stages::LabeledReport, CliError> {
        if let Some(p) = &a.pred {
            return stages::eval_predictions(&stages::read_gold(p)?, &gold);
        }
        let path = a.model.as_ref().expect("clap requires --pred or --model");
        let model = stages::load_model(path)?;
        match ctx {
            Some(ctx) => stages::eval_model(&model, ctx.embedder.as_ref(), &gold),
            None => stages::eval_model(&model, &stages::embedder_for_model(&model)?, &gold),
        }
    };
    let show = |r: &stages::LabeledReport| {
        print!("{}", r.report.to_table());
        println!("accuracy {:.4} over {} sentences", r.report.accuracy, r.items);
    };

    let Some(config) = &a.config else {
        let report = score(None)?;
        show(&report);
        if let Some(p) = &a.report {
            write_atomic(p, &json_bytes(&report))?;
        }
        return Ok(());
    };
    single(config, "eval", |ctx| {
        let report = score(Some(ctx))?;
        show(&report);
        let mut out = StageOutput::default();
        let path = a
            .report
            .clone()
            .unwrap_or_else(|| ctx.out_dir().join(stages::EVAL_REPORT));
        out.outputs.insert(
            path.strip_prefix(ctx.out_dir()).unwrap_or(&path).display().to_string(),
            crate::fsutil::sha256_hex(&json_bytes(&report)),
        );
        write_atomic(&path, &json_bytes(&report))?;
        Ok(out)
    })
}

fn json_bytes<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

fn infer_format(out: &Path) -> Result<RenderFormat, CliError> {
    let ext = out.extension().and_then(|e| e.to_str()).unwrap_or("");
    ext.parse().map_err(|_| {
        CliError::Usage(format!(
            "cannot tell the format of {}; pass --format json|dot|svg",
            out.display()
        ))
    })
}

fn render(a: RenderArgs) -> Result<(), CliError> {
    let format = match (a.format, &a.out) {
        (Some(f), _) => Some(f),
        (None, Some(out)) => Some(infer_format(out)?),
        (None, None) => None,
    };
    let target = RenderTarget {
        diagram: a.diagram.clone(),
        format,
        out: a.out.clone(),
    };
    match &a.config {
        Some(config) => single(config, "render", |ctx| stages::render_stage(ctx, &target)),
        None => {
            let (Some(diagram), Some(out), Some(format)) = (&a.diagram, &a.out, format) else {
                return Err(CliError::Usage(
                    "without --config, render needs --diagram and --out".into(),
                ));
            };
            let text = std::fs::read_to_string(diagram).map_err(|e| CliError::io(diagram, e))?;
            let d = fishbone_core::render::from_json(&text)
                .map_err(|e| CliError::Data(format!("{}: {e}", diagram.display())))?;
            let body = fishbone_core::render::render(&d, format, &RenderOptions::default())?;
            write_atomic(out, body.as_bytes())
        }
    }
}
