//! SubRip (`.srt`) documents and the per-sentence duration sidecar.
//!
//! Parsing is lenient where real TED files are sloppy (stray text after the
//! end timestamp, out-of-order cues) and strict about everything the rest of
//! the toolkit depends on: timestamps, non-empty text, and the exact line
//! content including internal double spaces.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SrtError {
    #[error("malformed timestamp {0:?}")]
    MalformedTimestamp(String),
    #[error("cue block {block}: {reason}")]
    MalformedCue { block: usize, reason: String },
    #[error("invalid subtitle: {0}")]
    InvalidSubtitle(String),
    #[error("metadata line {line}: {reason}")]
    MalformedMetadata { line: usize, reason: String },
}

/// Non-fatal findings collected while parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SrtWarning {
    /// Cue `block` starts before the cue preceding it in the file.
    NonMonotonicTiming { block: usize },
    /// Cue `block` carries an index not greater than its predecessor's.
    NonIncreasingIndex { block: usize, index: u32 },
}

impl fmt::Display for SrtWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SrtWarning::NonMonotonicTiming { block } => {
                write!(f, "cue block {block}: starts before the previous cue")
            }
            SrtWarning::NonIncreasingIndex { block, index } => {
                write!(f, "cue block {block}: index {index} does not increase")
            }
        }
    }
}

/// Milliseconds since the start of the video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(u64);

impl Timestamp {
    pub const fn from_millis(millis: u64) -> Self {
        Timestamp(millis)
    }

    pub const fn millis(self) -> u64 {
        self.0
    }

    /// Rounds to the nearest millisecond; negative or non-finite input clamps to zero.
    pub fn from_secs_f64(secs: f64) -> Self {
        if secs.is_finite() && secs > 0.0 {
            Timestamp((secs * 1000.0).round() as u64)
        } else {
            Timestamp(0)
        }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ms = self.0 % 1000;
        let total_secs = self.0 / 1000;
        let s = total_secs % 60;
        let m = (total_secs / 60) % 60;
        let h = total_secs / 3600;
        write!(f, "{h:02}:{m:02}:{s:02},{ms:03}")
    }
}

impl FromStr for Timestamp {
    type Err = SrtError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_timestamp(s)
    }
}

/// Parses exactly `HH:MM:SS,mmm`.
pub fn parse_timestamp(text: &str) -> Result<Timestamp, SrtError> {
    let bad = || SrtError::MalformedTimestamp(text.to_string());
    let b = text.as_bytes();
    if b.len() != 12 || b[2] != b':' || b[5] != b':' || b[8] != b',' {
        return Err(bad());
    }
    let field = |range: std::ops::Range<usize>| -> Result<u64, SrtError> {
        let digits = &b[range];
        if !digits.iter().all(u8::is_ascii_digit) {
            return Err(bad());
        }
        Ok(digits.iter().fold(0u64, |acc, d| acc * 10 + u64::from(d - b'0')))
    };
    let (h, m, s, ms) = (field(0..2)?, field(3..5)?, field(6..8)?, field(9..12)?);
    if m >= 60 || s >= 60 {
        return Err(bad());
    }
    Ok(Timestamp(((h * 60 + m) * 60 + s) * 1000 + ms))
}

/// One timed cue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subtitle {
    index: u32,
    start: Timestamp,
    end: Timestamp,
    lines: Vec<String>,
}

impl Subtitle {
    /// Trailing whitespace is trimmed from every line, matching what the parser keeps.
    pub fn new<S: Into<String>>(
        index: u32,
        start: Timestamp,
        end: Timestamp,
        lines: impl IntoIterator<Item = S>,
    ) -> Result<Self, SrtError> {
        if index == 0 {
            return Err(SrtError::InvalidSubtitle("index must be positive".into()));
        }
        if start >= end {
            return Err(SrtError::InvalidSubtitle(format!(
                "cue {index}: start {start} is not before end {end}"
            )));
        }
        let mut kept = Vec::new();
        for line in lines {
            let mut line: String = line.into();
            if line.contains(['\n', '\r']) {
                return Err(SrtError::InvalidSubtitle(format!(
                    "cue {index}: line contains a line break"
                )));
            }
            line.truncate(line.trim_end().len());
            if line.is_empty() {
                return Err(SrtError::InvalidSubtitle(format!("cue {index}: empty line")));
            }
            kept.push(line);
        }
        if kept.is_empty() {
            return Err(SrtError::InvalidSubtitle(format!("cue {index}: no text")));
        }
        Ok(Subtitle {
            index,
            start,
            end,
            lines: kept,
        })
    }

    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    pub fn end(&self) -> Timestamp {
        self.end
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }
}

/// The cues of one talk, in file order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SubtitleDocument {
    pub talk_id: String,
    pub subtitles: Vec<Subtitle>,
}

impl SubtitleDocument {
    pub fn new(talk_id: impl Into<String>, subtitles: Vec<Subtitle>) -> Self {
        SubtitleDocument {
            talk_id: talk_id.into(),
            subtitles,
        }
    }

    pub fn with_talk_id(mut self, talk_id: impl Into<String>) -> Self {
        self.talk_id = talk_id.into();
        self
    }
}

/// A parsed document plus whatever the parser noticed but tolerated.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedSrt {
    pub document: SubtitleDocument,
    pub warnings: Vec<SrtWarning>,
}

/// Parses SubRip text. The returned document has an empty `talk_id`.
pub fn parse_srt(text: &str) -> Result<ParsedSrt, SrtError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut parsed = ParsedSrt::default();
    let mut lines = text.lines().map(str::trim_end).peekable();
    let mut block = 0usize;
    let mut prev: Option<(u32, Timestamp)> = None;

    loop {
        while lines.peek().is_some_and(|l| l.is_empty()) {
            lines.next();
        }
        let Some(index_line) = lines.next() else {
            break;
        };
        block += 1;
        let cue_err = |reason: String| SrtError::MalformedCue { block, reason };

        let index: u32 = index_line
            .trim()
            .parse()
            .ok()
            .filter(|&i| i > 0)
            .ok_or_else(|| cue_err(format!("expected a positive cue index, found {index_line:?}")))?;

        let timing = match lines.next() {
            Some(l) if !l.is_empty() => l,
            _ => return Err(cue_err("missing timing line".into())),
        };
        let (start, end) = parse_timing_line(timing).ok_or_else(|| {
            cue_err(format!("expected `start --> end`, found {timing:?}"))
        })?;
        let start = parse_timestamp(start)?;
        let end = parse_timestamp(end)?;
        if start >= end {
            return Err(cue_err(format!("start {start} is not before end {end}")));
        }

        let mut text_lines = Vec::new();
        while let Some(l) = lines.next_if(|l| !l.is_empty()) {
            text_lines.push(l.to_string());
        }
        if text_lines.is_empty() {
            return Err(cue_err("empty text".into()));
        }

        if let Some((prev_index, prev_start)) = prev {
            if start < prev_start {
                parsed.warnings.push(SrtWarning::NonMonotonicTiming { block });
            }
            if index <= prev_index {
                parsed
                    .warnings
                    .push(SrtWarning::NonIncreasingIndex { block, index });
            }
        }
        prev = Some((index, start));

        let subtitle = Subtitle::new(index, start, end, text_lines)
            .map_err(|e| cue_err(e.to_string()))?;
        parsed.document.subtitles.push(subtitle);
    }
    Ok(parsed)
}

/// Splits `start --> end [anything]`, ignoring whatever follows the end stamp.
fn parse_timing_line(line: &str) -> Option<(&str, &str)> {
    let (start, rest) = line.split_once("-->")?;
    let end = rest.split_whitespace().next()?;
    Some((start.trim(), end))
}

/// Canonical SubRip text: one blank line after every cue, `\n` line endings.
pub fn serialize_srt(doc: &SubtitleDocument) -> String {
    let mut out = String::new();
    for sub in &doc.subtitles {
        write_cue(&mut out, sub);
    }
    out
}

pub(crate) fn write_cue(out: &mut String, sub: &Subtitle) {
    use std::fmt::Write;
    let _ = writeln!(out, "{}\n{} --> {}", sub.index, sub.start, sub.end);
    for line in &sub.lines {
        out.push_str(line);
        out.push('\n');
    }
    out.push('\n');
}

/// Utterance window of one corpus sentence, in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentDuration {
    pub audio_id: String,
    pub offset: f64,
    pub duration: f64,
}

impl SegmentDuration {
    pub fn new(audio_id: impl Into<String>, offset: f64, duration: f64) -> Result<Self, SrtError> {
        if !(offset.is_finite() && offset >= 0.0) {
            return Err(SrtError::InvalidSubtitle(format!("offset {offset} must be >= 0")));
        }
        if !(duration.is_finite() && duration > 0.0) {
            return Err(SrtError::InvalidSubtitle(format!("duration {duration} must be > 0")));
        }
        Ok(SegmentDuration {
            audio_id: audio_id.into(),
            offset,
            duration,
        })
    }

    pub fn start(&self) -> Timestamp {
        Timestamp::from_secs_f64(self.offset)
    }

    pub fn end(&self) -> Timestamp {
        Timestamp::from_secs_f64(self.offset + self.duration)
    }
}

/// Reads a list of flow mappings such as
/// `- {duration: 1.456, offset: 537.02, wav: talk1.wav}`.
///
/// Comment lines, blank lines and a bare `[]` are skipped. Keys other than
/// `wav`/`audio`, `offset` and `duration` are ignored.
pub fn load_segments_metadata(text: &str) -> Result<Vec<SegmentDuration>, SrtError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |reason: &str| SrtError::MalformedMetadata {
            line: line_no,
            reason: reason.to_string(),
        };
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line == "[]" || line == "---" {
            continue;
        }
        let body = line
            .strip_prefix('-')
            .map(str::trim)
            .and_then(|l| l.strip_prefix('{'))
            .and_then(|l| l.strip_suffix('}'))
            .ok_or_else(|| err("expected `- {key: value, ...}`"))?;

        let (mut audio, mut offset, mut duration) = (None, None, None);
        for pair in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = pair
                .split_once(':')
                .ok_or_else(|| err("expected `key: value`"))?;
            let value = unquote(value.trim());
            match key.trim() {
                "wav" | "audio" => audio = Some(value.to_string()),
                "offset" => {
                    offset = Some(value.parse::<f64>().map_err(|_| err("non-numeric offset"))?)
                }
                "duration" => {
                    duration =
                        Some(value.parse::<f64>().map_err(|_| err("non-numeric duration"))?)
                }
                _ => {}
            }
        }
        let audio = audio.ok_or_else(|| err("missing `wav`"))?;
        let offset = offset.ok_or_else(|| err("missing `offset`"))?;
        let duration = duration.ok_or_else(|| err("missing `duration`"))?;
        let seg = SegmentDuration::new(audio, offset, duration).map_err(|e| err(&e.to_string()))?;
        out.push(seg);
    }
    Ok(out)
}

fn unquote(v: &str) -> &str {
    for q in ['"', '\''] {
        if let Some(inner) = v.strip_prefix(q).and_then(|s| s.strip_suffix(q)) {
            return inner;
        }
    }
    v
}

/// Inverse of [`load_segments_metadata`], one mapping per line.
pub fn format_segments_metadata(segments: &[SegmentDuration]) -> String {
    if segments.is_empty() {
        return "[]\n".to_string();
    }
    segments
        .iter()
        .map(|s| {
            format!(
                "- {{duration: {}, offset: {}, wav: {}}}\n",
                s.duration, s.offset, s.audio_id
            )
        })
        .collect()
}
