//! Corpus construction, re-annotation and corpus statistics.
//!
//! [`build_corpus`] rebuilds annotated sentences from per-talk subtitle files
//! and a list of sentences. [`reannotate`] repeatedly re-segments the
//! sentences whose lines are too long, keeps the outputs that pass a filter,
//! and fine-tunes the base model on the growing pool of accepted sentences.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::annotate::{
    align_sentence, build_index, restore_eol_from_double_space, AnnotateError, AnnotatedSentence, Grammar,
};
use crate::batch::{self, Execution};
use crate::constraints::{check_cpl, check_cps, conformity_stats_with, ConformityReport, ConstraintProfile};
use crate::segment::{
    fine_tune, segment_learned_batch, DecodeMode, DecodeOptions, LinearSegmenterModel, SegmentError, TrainingConfig,
};
use crate::srt::{parse_srt, SegmentDuration, SrtError, Subtitle, SubtitleDocument};

#[derive(Debug, Clone, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: Arc<std::io::Error>,
    },
    #[error("{path}: {source}")]
    Srt {
        path: String,
        #[source]
        source: SrtError,
    },
    #[error("{path}:{line}: {reason}")]
    Input { path: String, line: usize, reason: String },
    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },
    #[error(transparent)]
    Annotate(#[from] AnnotateError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |e| PipelineError::Io {
        path: path.display().to_string(),
        source: Arc::new(e),
    }
}

pub fn read_file(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), PipelineError> {
    std::fs::write(path, contents).map_err(io_err(path))
}

/// Everything a pipeline run needs, read from `key = value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub profile: ConstraintProfile,
    pub training: TrainingConfig,
    pub fine_tuning: TrainingConfig,
    pub decode: DecodeOptions,
    pub srt_dir: Option<PathBuf>,
    pub sentences: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            profile: ConstraintProfile::default(),
            training: TrainingConfig::base(0),
            fine_tuning: TrainingConfig::fine_tune(0),
            decode: DecodeOptions::default(),
            srt_dir: None,
            sentences: None,
            metadata: None,
            model: None,
            output_dir: None,
            iterations: 3,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Keys: the constraint profile keys, `epochs`, `fine_tune_epochs`,
    /// `learning_rate`, `shuffle`, `beam_width`, `iterations`, `seed`,
    /// `srt_dir`, `sentences`, `metadata`, `model`, `output_dir`.
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let mut c = PipelineConfig::default();
        for (line, key, value) in crate::kv::entries(text) {
            let err = |reason: String| PipelineError::Config { line, reason };
            let key = key.map_err(|e| err(e.to_string()))?;
            if c.profile.set(key, value).map_err(err)? {
                continue;
            }
            let bad = || err(format!("bad value {value:?} for {key}"));
            match key {
                "epochs" => c.training.epochs = value.parse().map_err(|_| bad())?,
                "fine_tune_epochs" => c.fine_tuning.epochs = value.parse().map_err(|_| bad())?,
                "learning_rate" => {
                    let lr = value.parse().map_err(|_| bad())?;
                    c.training.learning_rate = lr;
                    c.fine_tuning.learning_rate = lr;
                }
                "shuffle" => {
                    let s = value.parse().map_err(|_| bad())?;
                    c.training.shuffle = s;
                    c.fine_tuning.shuffle = s;
                }
                "beam_width" => c.decode.beam_width = value.parse().map_err(|_| bad())?,
                "iterations" => c.iterations = value.parse().map_err(|_| bad())?,
                "seed" => c.seed = value.parse().map_err(|_| bad())?,
                "srt_dir" => c.srt_dir = Some(value.into()),
                "sentences" => c.sentences = Some(value.into()),
                "metadata" => c.metadata = Some(value.into()),
                "model" => c.model = Some(value.into()),
                "output_dir" => c.output_dir = Some(value.into()),
                _ => return Err(err(format!("unknown key {key:?}"))),
            }
        }
        c.profile
            .validate()
            .map_err(|reason| PipelineError::Config { line: 0, reason })?;
        if c.training.epochs == 0 || c.fine_tuning.epochs == 0 {
            return Err(PipelineError::Config {
                line: 0,
                reason: "epochs must be at least 1".into(),
            });
        }
        if c.decode.beam_width == 0 {
            return Err(PipelineError::Config {
                line: 0,
                reason: "beam_width must be at least 1".into(),
            });
        }
        c.set_seed(c.seed);
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let mut c = Self::parse(&read_file(path)?)?;
        c.resolve(path.parent().unwrap_or(Path::new(".")));
        Ok(c)
    }

    /// Seeds every random choice of the run.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.training.seed = seed;
        self.fine_tuning.seed = seed;
    }

    /// Makes relative paths relative to `base`.
    pub fn resolve(&mut self, base: &Path) {
        for p in [
            &mut self.srt_dir,
            &mut self.sentences,
            &mut self.metadata,
            &mut self.model,
            &mut self.output_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

/// A sentence and the talk it comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TalkSentence {
    pub talk_id: String,
    pub text: String,
}

/// Reads `talk_id<TAB>sentence` lines; blank lines are skipped.
pub fn parse_talk_sentences(text: &str, path: &str) -> Result<Vec<TalkSentence>, PipelineError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (talk_id, sentence) = line.split_once('\t').ok_or_else(|| PipelineError::Input {
            path: path.to_string(),
            line: i + 1,
            reason: "expected talk_id<TAB>sentence".into(),
        })?;
        out.push(TalkSentence {
            talk_id: talk_id.trim().to_string(),
            text: sentence.to_string(),
        });
    }
    Ok(out)
}

/// One note about the corpus build.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub talk_id: String,
    /// 1-based position in the sentence list, for alignment notes.
    pub sentence: Option<usize>,
    pub message: String,
}

impl fmt::Display for LogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sentence {
            Some(n) => write!(f, "{}\tsentence {}\t{}", self.talk_id, n, self.message),
            None => write!(f, "{}\t-\t{}", self.talk_id, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusBuild {
    /// Aligned sentences in input order; failures are left out.
    pub corpus: Vec<AnnotatedSentence>,
    pub log: Vec<LogEntry>,
}

/// Splits single-line cues at an interior double space, restoring the
/// line break lost when the two lines were merged.
fn restore_eols(doc: SubtitleDocument, log: &mut Vec<LogEntry>) -> SubtitleDocument {
    let talk_id = doc.talk_id.clone();
    let subtitles = doc
        .subtitles
        .into_iter()
        .map(|sub| {
            if sub.lines().len() != 1 {
                return sub;
            }
            let (lines, extra) = restore_eol_from_double_space(&sub.lines()[0]);
            if let Some(extra) = extra {
                log.push(LogEntry {
                    talk_id: talk_id.clone(),
                    sentence: None,
                    message: format!("cue {}: {} further double spaces left as is", sub.index(), extra.ignored),
                });
            }
            if lines.len() == 1 {
                return sub;
            }
            Subtitle::new(sub.index(), sub.start(), sub.end(), lines).unwrap_or(sub)
        })
        .collect();
    SubtitleDocument { talk_id, subtitles }
}

/// Aligns every sentence against its talk's cues.
pub fn build_corpus(
    docs: Vec<SubtitleDocument>,
    sentences: &[TalkSentence],
    exec: Execution,
) -> Result<CorpusBuild, PipelineError> {
    let mut log = Vec::new();
    let docs: Vec<SubtitleDocument> = docs.into_iter().map(|d| restore_eols(d, &mut log)).collect();
    let index = build_index(docs)?;
    let aligned = batch::map(exec, sentences, |s| align_sentence(&s.text, &s.talk_id, &index));
    let mut corpus = Vec::with_capacity(sentences.len());
    for (i, (s, r)) in sentences.iter().zip(aligned).enumerate() {
        match r {
            Ok(a) => corpus.push(a),
            Err(e) => log.push(LogEntry {
                talk_id: s.talk_id.clone(),
                sentence: Some(i + 1),
                message: e.to_string(),
            }),
        }
    }
    Ok(CorpusBuild { corpus, log })
}

/// Reads every `<talk_id>.srt` in `dir`, in file-name order.
pub fn read_srt_dir(dir: &Path, log: &mut Vec<LogEntry>) -> Result<Vec<SubtitleDocument>, PipelineError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .map(|e| e.map(|e| e.path()).map_err(io_err(dir)))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "srt"));
    paths.sort();
    let mut docs = Vec::with_capacity(paths.len());
    for path in paths {
        let talk_id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let parsed = parse_srt(&read_file(&path)?).map_err(|source| PipelineError::Srt {
            path: path.display().to_string(),
            source,
        })?;
        for w in parsed.warnings {
            log.push(LogEntry {
                talk_id: talk_id.clone(),
                sentence: None,
                message: w.to_string(),
            });
        }
        docs.push(parsed.document.with_talk_id(talk_id));
    }
    Ok(docs)
}

pub fn build_corpus_from_files(
    srt_dir: &Path,
    sentences: &Path,
    exec: Execution,
) -> Result<CorpusBuild, PipelineError> {
    let mut log = Vec::new();
    let docs = read_srt_dir(srt_dir, &mut log)?;
    let list = parse_talk_sentences(&read_file(sentences)?, &sentences.display().to_string())?;
    let mut build = build_corpus(docs, &list, exec)?;
    log.append(&mut build.log);
    build.log = log;
    Ok(build)
}

/// Parses one annotated sentence per non-blank line.
pub fn parse_corpus(text: &str, grammar: Grammar, path: &str) -> Result<Vec<AnnotatedSentence>, PipelineError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            AnnotatedSentence::parse(l, grammar).map_err(|e| PipelineError::Input {
                path: path.to_string(),
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

pub fn format_corpus(corpus: &[AnnotatedSentence]) -> String {
    let mut out = String::new();
    for s in corpus {
        out.push_str(&s.to_string());
        out.push('\n');
    }
    out
}

/// What one re-annotation round did.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationReport {
    pub iteration: usize,
    /// Sentences with a line over the limit, sent to the segmenter.
    pub selected: usize,
    pub accepted: usize,
    /// Fraction of lines within the limit.
    pub conformity_before: f64,
    pub conformity_after: f64,
    pub pool_size: usize,
    /// Always true: each round fine-tunes the base model afresh.
    pub fine_tuned_from_base: bool,
}

#[derive(Debug, Clone)]
pub struct Reannotation {
    pub corpus: Vec<AnnotatedSentence>,
    /// The last fine-tuned model, or the segmenting model if none was made.
    pub model: LinearSegmenterModel,
    pub reports: Vec<IterationReport>,
}

/// Whether a re-segmented sentence may replace the original: every line
/// fits, it has an `<eol>`, and no block holds two.
pub fn accept_reannotation(s: &AnnotatedSentence, profile: &ConstraintProfile) -> bool {
    check_cpl(s, profile).conforming && s.has_eol() && s.is_strict()
}

fn line_conformity(corpus: &[AnnotatedSentence], profile: &ConstraintProfile, exec: Execution) -> f64 {
    conformity_stats_with(corpus, profile, exec).line_conformity()
}

/// Iterative re-annotation.
///
/// Each round re-segments the sentences with an over-long line in
/// `<eol>`-only mode (their `<eob>`s stay put) with the current model,
/// keeps the outputs that pass [`accept_reannotation`], adds them to the
/// pool (which starts as the corpus sentences that already have an
/// `<eol>`), and fine-tunes `base` on the pool to get the next model. The
/// first round segments with `initial`, or `base` if none is given. The
/// loop stops early when nothing is selected or accepted.
pub fn reannotate(
    corpus: &[AnnotatedSentence],
    base: &LinearSegmenterModel,
    initial: Option<&LinearSegmenterModel>,
    config: &PipelineConfig,
    exec: Execution,
) -> Result<Reannotation, PipelineError> {
    let profile = &config.profile;
    let opts = DecodeOptions {
        mode: DecodeMode::EolOnly,
        ..config.decode
    };
    let mut corpus = corpus.to_vec();
    let mut pool: Vec<AnnotatedSentence> = corpus.iter().filter(|s| s.has_eol() && s.is_strict()).cloned().collect();
    let mut model = initial.unwrap_or(base).clone();
    let mut reports = Vec::new();
    for iteration in 1..=config.iterations {
        let before = line_conformity(&corpus, profile, exec);
        let selected: Vec<usize> = (0..corpus.len())
            .filter(|&i| !check_cpl(&corpus[i], profile).conforming)
            .collect();
        let inputs: Vec<AnnotatedSentence> = selected.iter().map(|&i| corpus[i].clone()).collect();
        let outputs = segment_learned_batch(&model, &inputs, profile, &opts, exec);
        let mut accepted = 0;
        for (&i, out) in selected.iter().zip(outputs) {
            if accept_reannotation(&out, profile) {
                corpus[i] = out.clone();
                pool.push(out);
                accepted += 1;
            }
        }
        if accepted > 0 {
            model = fine_tune(base, &pool, &config.fine_tuning, profile)?;
        }
        reports.push(IterationReport {
            iteration,
            selected: selected.len(),
            accepted,
            conformity_before: before,
            conformity_after: line_conformity(&corpus, profile, exec),
            pool_size: pool.len(),
            fine_tuned_from_base: true,
        });
        if accepted == 0 {
            break;
        }
    }
    Ok(Reannotation { corpus, model, reports })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpsSummary {
    /// Sentences paired with a duration entry.
    pub checked: usize,
    pub conforming: usize,
    /// Entries whose duration was not positive.
    pub invalid: usize,
    pub mean_cps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub sentences: usize,
    /// Words, break symbols excluded.
    pub words: usize,
    pub conformity: ConformityReport,
    /// Share of sentences with at least one `<eol>`; 0 for an empty corpus.
    pub eol_fraction: f64,
    pub cps: Option<CpsSummary>,
}

impl CorpusStats {
    pub fn to_json(&self) -> serde_json::Value {
        let mut conformity = self.conformity.to_json();
        conformity["line_conformity"] = self.conformity.line_conformity().into();
        serde_json::json!({
            "sentences": self.sentences,
            "words": self.words,
            "eol_fraction": self.eol_fraction,
            "conformity": conformity,
            "cps": self.cps,
        })
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "sentences = {}", self.sentences)?;
        writeln!(f, "words = {}", self.words)?;
        writeln!(f, "eol_fraction = {:.4}", self.eol_fraction)?;
        write!(f, "{}", self.conformity)?;
        if let Some(c) = &self.cps {
            writeln!(f, "cps_checked = {}", c.checked)?;
            writeln!(f, "cps_conforming = {}", c.conforming)?;
            writeln!(f, "cps_invalid = {}", c.invalid)?;
            writeln!(f, "cps_mean = {:.2}", c.mean_cps)?;
        }
        Ok(())
    }
}

/// Counts and conformity for a corpus. Duration entries pair with
/// sentences by position; extra entries on either side are ignored.
pub fn stats(
    corpus: &[AnnotatedSentence],
    metadata: Option<&[SegmentDuration]>,
    profile: &ConstraintProfile,
    exec: Execution,
) -> CorpusStats {
    let conformity = conformity_stats_with(corpus, profile, exec);
    let cps = metadata.map(|meta| {
        let mut summary = CpsSummary {
            checked: 0,
            conforming: 0,
            invalid: 0,
            mean_cps: 0.0,
        };
        let mut sum = 0.0;
        for (s, w) in corpus.iter().zip(meta) {
            match check_cps(s, w, profile) {
                Ok(c) => {
                    summary.checked += 1;
                    summary.conforming += usize::from(c.conforming);
                    sum += c.cps;
                }
                Err(_) => summary.invalid += 1,
            }
        }
        if summary.checked > 0 {
            summary.mean_cps = sum / summary.checked as f64;
        }
        summary
    });
    CorpusStats {
        sentences: corpus.len(),
        words: corpus.iter().map(|s| s.len()).sum(),
        eol_fraction: if corpus.is_empty() {
            0.0
        } else {
            conformity.sentences_with_eol as f64 / corpus.len() as f64
        },
        conformity,
        cps,
    }
}
