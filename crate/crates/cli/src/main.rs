use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use uie_cli::commands::{self, ConvertOptions, FilterOptions, Outcome, PredictionSource, ReportFormat};
use uie_cli::RunConfig;
use uie_core::codec::Strictness;
use uie_core::ingest::SourceFormat;
use uie_core::model::{Language, TaskKind};

/// Universal information extraction toolchain.
///
/// Exit codes: 0 success, 1 validation or usage error, 2 partial failure
/// (some records failed).
#[derive(Parser)]
#[command(name = "uie", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Run configuration (JSON)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the sampling seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the endpoint concurrency limit
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Only accept model outputs that are valid JSON as a whole
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Convert dataset files to canonical JSONL
    Convert {
        inputs: Vec<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        format: Option<String>,
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        task: Option<String>,
        #[arg(long)]
        lang: Option<String>,
    },
    /// Build the SFT corpus and augmented gold file from the config's datasets
    BuildSft {
        /// Defaults to the config's output_dir
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Replace label options in canonical JSONL with gold labels plus negatives
    SampleNegatives {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        min: Option<usize>,
        #[arg(long)]
        max: Option<usize>,
    },
    /// Run inference over a built SFT corpus
    Infer {
        #[arg(long)]
        run_dir: Option<PathBuf>,
        #[arg(long)]
        sft: Option<PathBuf>,
        #[arg(long)]
        gold: Option<PathBuf>,
    },
    /// Finish an interrupted or partially failed run
    Resume {
        #[arg(long)]
        run_dir: Option<PathBuf>,
    },
    /// Parse the raw outputs of a run into predictions
    Parse {
        #[arg(long)]
        run_dir: Option<PathBuf>,
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Score a run (or prediction files) against gold
    Eval {
        #[arg(long)]
        run_dir: Option<PathBuf>,
        #[arg(long, conflicts_with = "run_dir")]
        predictions: Option<PathBuf>,
        /// Additional run directories shown side by side
        #[arg(long)]
        compare: Vec<PathBuf>,
        /// Column names for the primary run followed by each --compare run
        #[arg(long)]
        label: Vec<String>,
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Re-render saved report.json files
    Report {
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "md")]
        format: Format,
    },
    /// Clean and deduplicate a dialogue corpus
    FilterDialogue {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Write the filter report here instead of stdout
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        keywords: Option<PathBuf>,
        #[arg(long)]
        check_sensitive: bool,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        shingle: Option<usize>,
        #[arg(long)]
        min_output_chars: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Md,
    Csv,
    Json,
}

fn parse_opt<T: std::str::FromStr>(v: Option<String>) -> Result<Option<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    v.map(|s| s.parse::<T>().map_err(anyhow::Error::from)).transpose()
}

impl Global {
    fn load_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.sampling.run_seed = seed;
        }
        if let Some(jobs) = self.jobs {
            if let Some(e) = &mut cfg.endpoint {
                e.concurrency = jobs;
            }
        }
        if self.strict {
            cfg.strictness = Strictness::Strict;
        }
        Ok(cfg)
    }

    fn require_config(&self) -> Result<RunConfig> {
        if self.config.is_none() {
            bail!("--config is required for this command");
        }
        self.load_config()
    }
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting async runtime")
}

fn or_default(given: Option<PathBuf>, fallback: impl FnOnce() -> PathBuf) -> PathBuf {
    given.unwrap_or_else(fallback)
}

fn run(cli: Cli) -> Result<Outcome> {
    let g = &cli.global;
    match cli.command {
        Command::Convert { inputs, out, format, dataset, task, lang } => {
            let opts = ConvertOptions {
                format: parse_opt::<SourceFormat>(format)?,
                dataset,
                task: parse_opt::<TaskKind>(task)?,
                lang: parse_opt::<Language>(lang)?,
            };
            let (records, warnings) = commands::cmd_convert(&inputs, &opts, &out)?;
            eprintln!("converted {records} records with {warnings} warnings");
        }
        Command::BuildSft { out_dir } => {
            let cfg = g.require_config()?;
            let out_dir = or_default(out_dir, || cfg.output_dir.clone());
            commands::cmd_build_sft(&cfg, &out_dir)?;
            eprintln!("wrote {}", out_dir.display());
        }
        Command::SampleNegatives { input, out, min, max } => {
            let mut policy = g.load_config()?.sampling;
            if let Some(m) = min {
                policy.min_negatives = m;
            }
            if let Some(m) = max {
                policy.max_negatives = m;
            }
            policy.validate()?;
            let n = commands::cmd_sample_negatives(&input, &policy, &out)?;
            eprintln!("augmented {n} records");
        }
        Command::Infer { run_dir, sft, gold } => {
            let cfg = g.require_config()?;
            let sft = or_default(sft, || cfg.output_dir.join(commands::SFT_FILE));
            let gold = or_default(gold, || cfg.output_dir.join(commands::GOLD_FILE));
            let run_dir = or_default(run_dir, || cfg.run_dir());
            let requests = commands::build_requests(&sft, &gold)?;
            let endpoint = cfg.endpoint()?.clone();
            return runtime()?.block_on(commands::cmd_infer(requests, &endpoint, &run_dir));
        }
        Command::Resume { run_dir } => {
            let cfg = g.require_config()?;
            let run_dir = or_default(run_dir, || cfg.run_dir());
            let endpoint = cfg.endpoint()?.clone();
            return runtime()?.block_on(commands::cmd_resume(&run_dir, &endpoint));
        }
        Command::Parse { run_dir, gold, out } => {
            let cfg = g.load_config()?;
            let run_dir = or_default(run_dir, || cfg.run_dir());
            let gold = or_default(gold, || cfg.output_dir.join(commands::GOLD_FILE));
            let (n, failed) = commands::cmd_parse(&run_dir, &gold, cfg.strictness, &out)?;
            eprintln!("parsed {n} outputs, {failed} unparseable");
        }
        Command::Eval { run_dir, predictions, compare, label, gold, out } => {
            let cfg = g.load_config()?;
            let gold = or_default(gold, || cfg.output_dir.join(commands::GOLD_FILE));
            let primary = match predictions {
                Some(p) => PredictionSource::File(p),
                None => PredictionSource::RunDir(or_default(run_dir, || cfg.run_dir())),
            };
            let sources: Vec<PredictionSource> = std::iter::once(primary)
                .chain(compare.into_iter().map(PredictionSource::RunDir))
                .collect();
            if label.len() > sources.len() {
                bail!("{} labels given for {} runs", label.len(), sources.len());
            }
            let labelled: Vec<(Option<String>, PredictionSource)> = sources
                .into_iter()
                .enumerate()
                .map(|(i, s)| (label.get(i).cloned(), s))
                .collect();
            let out = or_default(out, || cfg.output_dir.join("eval"));
            let reports = commands::cmd_eval(&labelled, &gold, cfg.strictness, &out)?;
            print!("{}", commands::summary_lines(&reports[0]));
        }
        Command::Report { inputs, format } => {
            let format = match format {
                Format::Md => ReportFormat::Markdown,
                Format::Csv => ReportFormat::Csv,
                Format::Json => ReportFormat::Json,
            };
            print!("{}", commands::cmd_report(&inputs, format)?);
        }
        Command::FilterDialogue {
            input,
            out,
            report,
            keywords,
            check_sensitive,
            threshold,
            shingle,
            min_output_chars,
        } => {
            let opts = FilterOptions {
                keywords,
                check_sensitive,
                jaccard_threshold: threshold,
                shingle_n: shingle,
                min_output_chars,
            };
            let r = commands::cmd_filter_dialogue(&input, &opts, &out)?;
            let json = commands::filter_report_json(&r);
            match report {
                Some(p) => write_report(&p, &json)?,
                None => print!("{json}"),
            }
        }
    }
    Ok(Outcome::Success)
}

fn write_report(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
