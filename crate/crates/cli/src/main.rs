use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use subseg_core::annotate::{AnnotatedSentence, Grammar};
use subseg_core::batch::Execution;
use subseg_core::constraints::ConstraintProfile;
use subseg_core::eval::evaluate_with;
use subseg_core::pipeline::{
    build_corpus_from_files, format_corpus, parse_corpus, read_file, reannotate, stats, write_file, PipelineConfig,
};
use subseg_core::segment::{
    fine_tune, segment_count_char_batch, segment_learned_batch, train, DecodeMode, LinearSegmenterModel,
};
use subseg_core::srt::load_segments_metadata;

/// Subtitle segmentation: corpus building, training, segmentation and scoring.
#[derive(Parser)]
#[command(name = "subseg", version)]
struct Cli {
    /// Seed for every random choice (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Constraint profile file (`key = value` lines).
    #[arg(long, global = true)]
    profile: Option<PathBuf>,
    /// Pipeline config file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Align sentences with .srt files and write the annotated corpus.
    BuildCorpus {
        /// Directory of `<talk_id>.srt` files.
        #[arg(long)]
        srt_dir: Option<PathBuf>,
        /// `talk_id<TAB>sentence` lines.
        #[arg(long)]
        sentences: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the alignment log (default: stderr).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Train a model from scratch on an annotated corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Continue training a model on the corpus sentences that contain `<eol>`.
    FineTune {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Insert breaks into sentences, one per line.
    Segment {
        /// Learned model; without it the count-char baseline is used.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        beam: Option<usize>,
        /// Keep existing `<eob>`s and only add `<eol>`s.
        #[arg(long)]
        eol_only: bool,
    },
    /// Score a segmented file against a reference.
    Evaluate {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Corpus counts and constraint conformity.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        /// Segment durations, paired with sentences by position.
        #[arg(long)]
        metadata: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Re-segment sentences with overlong lines and fine-tune on the results.
    Reannotate(ReannotateArgs),
}

#[derive(Args)]
struct ReannotateArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Base model, fine-tuned afresh each round.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Model for the first round's segmentation (default: the base model).
    #[arg(long)]
    initial: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the last fine-tuned model.
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Table,
}

/// A missing or inconsistent argument found after clap has parsed.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<Usage>() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(path) = &cli.profile {
        config.profile = ConstraintProfile::load(path)?;
    }
    if let Some(seed) = cli.seed {
        config.set_seed(seed);
    }
    Ok(config)
}

fn pick(arg: Option<PathBuf>, fallback: &Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    arg.or_else(|| fallback.clone())
        .ok_or_else(|| usage(format!("--{flag} is required (or set it in --config)")))
}

/// The explicit path, else `name` inside the configured output directory.
fn output_path(arg: Option<PathBuf>, config: &PipelineConfig, name: &str) -> Option<PathBuf> {
    arg.or_else(|| config.output_dir.as_ref().map(|d| d.join(name)))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => Ok(write_file(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_model(path: &Path) -> Result<LinearSegmenterModel> {
    let text = read_file(path)?;
    LinearSegmenterModel::from_text(&text).with_context(|| format!("{}", path.display()))
}

fn load_corpus(path: &Path, grammar: Grammar) -> Result<Vec<AnnotatedSentence>> {
    Ok(parse_corpus(&read_file(path)?, grammar, &path.display().to_string())?)
}

fn run(cli: Cli) -> Result<()> {
    let mut config = load_config(&cli)?;
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    match cli.command {
        Command::BuildCorpus {
            srt_dir,
            sentences,
            out,
            log,
        } => {
            let srt_dir = pick(srt_dir, &config.srt_dir, "srt-dir")?;
            let sentences = pick(sentences, &config.sentences, "sentences")?;
            let build = build_corpus_from_files(&srt_dir, &sentences, exec)?;
            let log_text: String = build.log.iter().map(|e| format!("{e}\n")).collect();
            match log {
                Some(p) => write_file(&p, &log_text)?,
                None => eprint!("{log_text}"),
            }
            emit(output_path(out, &config, "corpus.txt").as_deref(), &format_corpus(&build.corpus))?;
        }
        Command::Train { corpus, out, epochs } => {
            let out = pick(out, &config.model, "out")?;
            if let Some(e) = epochs {
                config.training.epochs = e;
            }
            let corpus = load_corpus(&corpus, Grammar::Strict)?;
            let model = train(&corpus, &config.training, &config.profile)?;
            write_file(&out, &model.to_text())?;
        }
        Command::FineTune {
            model,
            corpus,
            out,
            epochs,
        } => {
            let base = load_model(&pick(model, &config.model, "model")?)?;
            if let Some(e) = epochs {
                config.fine_tuning.epochs = e;
            }
            let subset: Vec<AnnotatedSentence> = load_corpus(&corpus, Grammar::Strict)?
                .into_iter()
                .filter(AnnotatedSentence::has_eol)
                .collect();
            if subset.is_empty() {
                bail!("{}: no sentence contains <eol>", corpus.display());
            }
            let tuned = fine_tune(&base, &subset, &config.fine_tuning, &config.profile)?;
            write_file(&out, &tuned.to_text())?;
        }
        Command::Segment {
            model,
            input,
            out,
            beam,
            eol_only,
        } => {
            let model = model.or_else(|| config.model.clone());
            if let Some(b) = beam {
                if b == 0 {
                    return Err(usage("--beam must be at least 1"));
                }
                config.decode.beam_width = b;
            }
            if eol_only {
                config.decode.mode = DecodeMode::EolOnly;
            }
            let text = read_file(&input)?;
            let lines: Vec<String> = text.lines().filter(|l| !l.trim().is_empty()).map(String::from).collect();
            let segmented: Vec<AnnotatedSentence> = match model {
                Some(path) => {
                    let model = load_model(&path)?;
                    let inputs = parse_corpus(&text, Grammar::Lenient, &input.display().to_string())?;
                    segment_learned_batch(&model, &inputs, &config.profile, &config.decode, exec)
                }
                None if eol_only => return Err(usage("--eol-only needs --model")),
                None => segment_count_char_batch(&lines, &config.profile, config.seed, exec)
                    .into_iter()
                    .collect::<Result<_, _>>()?,
            };
            emit(output_path(out, &config, "segmented.txt").as_deref(), &format_corpus(&segmented))?;
        }
        Command::Evaluate {
            hyp,
            reference,
            format,
        } => {
            let hyps = load_corpus(&hyp, Grammar::Lenient)?;
            let refs = load_corpus(&reference, Grammar::Lenient)?;
            if hyps.len() != refs.len() {
                bail!("{} has {} sentences, {} has {}", hyp.display(), hyps.len(), reference.display(), refs.len());
            }
            let pairs: Vec<_> = hyps.into_iter().zip(refs).collect();
            let report = evaluate_with(&pairs, &config.profile, exec)?;
            match format {
                Format::Json => println!("{}", report.to_json()),
                Format::Table => print!("{report}"),
            }
        }
        Command::Stats {
            corpus,
            metadata,
            format,
        } => {
            let corpus = load_corpus(&corpus, Grammar::Lenient)?;
            let metadata = match metadata.or_else(|| config.metadata.clone()) {
                Some(p) => Some(load_segments_metadata(&read_file(&p)?).with_context(|| format!("{}", p.display()))?),
                None => None,
            };
            let s = stats(&corpus, metadata.as_deref(), &config.profile, exec);
            match format {
                Format::Json => println!("{}", s.to_json()),
                Format::Table => print!("{s}"),
            }
        }
        Command::Reannotate(args) => {
            let base = load_model(&pick(args.model, &config.model, "model")?)?;
            let initial = args.initial.as_deref().map(load_model).transpose()?;
            if let Some(n) = args.iterations {
                config.iterations = n;
            }
            let corpus = load_corpus(&args.corpus, Grammar::Strict)?;
            let result = reannotate(&corpus, &base, initial.as_ref(), &config, exec)?;
            for r in &result.reports {
                println!("{}", serde_json::to_string(r)?);
            }
            match output_path(args.out, &config, "reannotated.txt") {
                Some(p) => write_file(&p, &format_corpus(&result.corpus))?,
                None => return Err(usage("--out is required (or set output_dir in --config)")),
            }
            if let Some(p) = args.model_out {
                write_file(&p, &result.model.to_text())?;
            }
        }
    }
    Ok(())
}
