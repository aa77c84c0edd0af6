//! Subtitling constraints: characters per line, lines per block, reading
//! speed and line balance, plus corpus-level conformity counts.
//!
//! Lengths count Unicode scalar values of the rendered line: words joined by
//! single spaces. Break symbols and the spaces around them never count.

use std::fmt;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::annotate::AnnotatedSentence;
use crate::batch::{self, Execution};
use crate::srt::SegmentDuration;

#[derive(Debug, Clone, Error)]
pub enum ConstraintError {
    #[error("window duration {0} is not positive")]
    NonPositiveDuration(f64),
    #[error("profile line {line}: {reason}")]
    Profile { line: usize, reason: String },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::sync::Arc<std::io::Error>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintProfile {
    pub cpl_limit: usize,
    pub cps_limit: f64,
    pub max_lines_per_block: usize,
    pub orphan_threshold: usize,
}

impl Default for ConstraintProfile {
    fn default() -> Self {
        ConstraintProfile {
            cpl_limit: 42,
            cps_limit: 21.0,
            max_lines_per_block: 2,
            orphan_threshold: 5,
        }
    }
}

impl ConstraintProfile {
    pub fn validate(&self) -> Result<(), String> {
        if self.cpl_limit == 0 {
            return Err("cpl_limit must be positive".into());
        }
        if !(self.cps_limit.is_finite() && self.cps_limit > 0.0) {
            return Err("cps_limit must be positive".into());
        }
        if self.max_lines_per_block == 0 {
            return Err("max_lines_per_block must be positive".into());
        }
        if self.orphan_threshold == 0 {
            return Err("orphan_threshold must be positive".into());
        }
        Ok(())
    }

    /// Reads `key = value` lines; `#` starts a comment. Unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self, ConstraintError> {
        let mut p = ConstraintProfile::default();
        for (line, key, value) in crate::kv::entries(text) {
            let err = |reason: String| ConstraintError::Profile { line, reason };
            let key = key.map_err(|e| err(e.to_string()))?;
            if !p.set(key, value).map_err(err)? {
                return Err(err(format!("unknown key {key:?}")));
            }
        }
        p.validate().map_err(|reason| ConstraintError::Profile { line: 0, reason })?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, ConstraintError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConstraintError::Io {
            path: path.display().to_string(),
            source: e.into(),
        })?;
        Self::parse(&text)
    }

    /// Applies one `key = value` setting; `Ok(false)` for keys this type does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, String> {
        let bad = || format!("bad value {value:?} for {key}");
        match key {
            "cpl_limit" | "cpl" => self.cpl_limit = value.parse().map_err(|_| bad())?,
            "cps_limit" | "cps" => self.cps_limit = value.parse().map_err(|_| bad())?,
            "max_lines_per_block" | "max_lines" => {
                self.max_lines_per_block = value.parse().map_err(|_| bad())?
            }
            "orphan_threshold" => self.orphan_threshold = value.parse().map_err(|_| bad())?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// Character length of every line, in order.
pub fn line_lengths(s: &AnnotatedSentence) -> Vec<usize> {
    s.blocks()
        .into_iter()
        .flatten()
        .map(|r| s.span_chars(r))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CplCheck {
    pub line_lengths: Vec<usize>,
    pub conforming: bool,
}

pub fn check_cpl(s: &AnnotatedSentence, profile: &ConstraintProfile) -> CplCheck {
    let line_lengths = line_lengths(s);
    let conforming = line_lengths.iter().all(|&l| l <= profile.cpl_limit);
    CplCheck {
        line_lengths,
        conforming,
    }
}

/// Every block, its lines joined by one space, fits in `limit` characters.
pub fn check_block_cpl(s: &AnnotatedSentence, limit: usize) -> bool {
    s.blocks().into_iter().all(|lines| {
        let span = lines[0].start..lines[lines.len() - 1].end;
        s.span_chars(span) <= limit
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpsCheck {
    pub cps: f64,
    pub conforming: bool,
}

pub fn check_cps(
    s: &AnnotatedSentence,
    window: &SegmentDuration,
    profile: &ConstraintProfile,
) -> Result<CpsCheck, ConstraintError> {
    if !(window.duration.is_finite() && window.duration > 0.0) {
        return Err(ConstraintError::NonPositiveDuration(window.duration));
    }
    let chars = s.span_chars(0..s.len()) as f64;
    let cps = chars / window.duration;
    Ok(CpsCheck {
        cps,
        conforming: cps <= profile.cps_limit,
    })
}

pub fn check_lines(s: &AnnotatedSentence, profile: &ConstraintProfile) -> bool {
    s.blocks()
        .iter()
        .all(|lines| lines.len() <= profile.max_lines_per_block)
}

/// Shortest over longest line of each block; 1.0 for single-line blocks.
pub fn line_balance(s: &AnnotatedSentence) -> Vec<f64> {
    s.blocks()
        .into_iter()
        .map(|lines| {
            let lens: Vec<usize> = lines.into_iter().map(|r| s.span_chars(r)).collect();
            let max = lens.iter().copied().max().unwrap_or(0);
            let min = lens.iter().copied().min().unwrap_or(0);
            if max == 0 {
                1.0
            } else {
                min as f64 / max as f64
            }
        })
        .collect()
}

/// Lines shorter than the orphan threshold.
pub fn orphan_lines(s: &AnnotatedSentence, profile: &ConstraintProfile) -> usize {
    line_lengths(s)
        .into_iter()
        .filter(|&l| l < profile.orphan_threshold)
        .count()
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ConformityReport {
    pub cpl_limit: usize,
    pub total_sentences: usize,
    /// Every line within `cpl_limit`.
    pub conforming_sentences: usize,
    /// Every block within `2 * cpl_limit`.
    pub conforming_block_sentences: usize,
    pub total_lines: usize,
    pub conforming_lines: usize,
    pub sentences_with_eol: usize,
    /// Longest line of each sentence, in corpus order.
    pub worst_line_lengths: Vec<usize>,
}

impl ConformityReport {
    /// Fraction of lines within the limit; 1.0 for an empty corpus.
    pub fn line_conformity(&self) -> f64 {
        ratio(self.conforming_lines, self.total_lines)
    }

    pub fn sentence_conformity(&self) -> f64 {
        ratio(self.conforming_sentences, self.total_sentences)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "cpl_limit": self.cpl_limit,
            "totals": {
                "sentences": self.total_sentences,
                "lines": self.total_lines,
            },
            "conforming_42": self.conforming_sentences,
            "conforming_84": self.conforming_block_sentences,
            "conforming_lines": self.conforming_lines,
            "with_eol": self.sentences_with_eol,
        })
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

impl fmt::Display for ConformityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cpl_limit = {}", self.cpl_limit)?;
        writeln!(f, "sentences = {}", self.total_sentences)?;
        writeln!(f, "conforming_sentences = {}", self.conforming_sentences)?;
        writeln!(f, "conforming_block_sentences = {}", self.conforming_block_sentences)?;
        writeln!(f, "lines = {}", self.total_lines)?;
        writeln!(f, "conforming_lines = {}", self.conforming_lines)?;
        writeln!(f, "line_conformity = {:.4}", self.line_conformity())?;
        writeln!(f, "sentences_with_eol = {}", self.sentences_with_eol)
    }
}

pub fn conformity_stats(corpus: &[AnnotatedSentence], profile: &ConstraintProfile) -> ConformityReport {
    conformity_stats_with(corpus, profile, Execution::default())
}

pub fn conformity_stats_with(
    corpus: &[AnnotatedSentence],
    profile: &ConstraintProfile,
    exec: Execution,
) -> ConformityReport {
    let limit = profile.cpl_limit;
    let per_sentence = batch::map(exec, corpus, |s| {
        let lens = line_lengths(s);
        (
            lens.iter().all(|&l| l <= limit),
            check_block_cpl(s, 2 * limit),
            lens.len(),
            lens.iter().filter(|&&l| l <= limit).count(),
            s.has_eol(),
            lens.iter().copied().max().unwrap_or(0),
        )
    });
    let mut report = ConformityReport {
        cpl_limit: limit,
        total_sentences: corpus.len(),
        ..Default::default()
    };
    for (ok, block_ok, lines, ok_lines, eol, worst) in per_sentence {
        report.conforming_sentences += usize::from(ok);
        report.conforming_block_sentences += usize::from(block_ok);
        report.total_lines += lines;
        report.conforming_lines += ok_lines;
        report.sentences_with_eol += usize::from(eol);
        report.worst_line_lengths.push(worst);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::Grammar;
    use proptest::prelude::*;

    fn sent(s: &str) -> AnnotatedSentence {
        AnnotatedSentence::parse(s, Grammar::Lenient).unwrap()
    }

    const FIGURE: &str = "I wanted to challenge the idea <eob> that design is but a tool <eol> to create function and beauty. <eob>";

    /// Words of `len` characters built from `x`, e.g. `line_of(43)` is one 43-char line.
    fn line_of(len: usize) -> String {
        "x".repeat(len)
    }

    #[test]
    fn cpl() {
        let p = ConstraintProfile::default();
        let cue165 = sent("that design is but a tool <eol> to create function and beauty. <eob>");
        assert_eq!(
            check_cpl(&cue165, &p),
            CplCheck {
                line_lengths: vec![25, 30],
                conforming: true
            }
        );
        assert_eq!(
            check_cpl(&sent(""), &p),
            CplCheck {
                line_lengths: vec![],
                conforming: true
            }
        );
        let long = sent(&format!("{} <eob>", "abcd ".repeat(8) + "abc"));
        assert_eq!(check_cpl(&long, &p).line_lengths, vec![43]);
        assert!(!check_cpl(&long, &p).conforming);
        let exact = sent(&format!("{} <eob>", line_of(42)));
        assert!(check_cpl(&exact, &p).conforming);
    }

    #[test]
    fn block_cpl() {
        let cue165 = sent("that design is but a tool <eol> to create function and beauty. <eob>");
        assert!(check_block_cpl(&cue165, 84));
        assert!(!check_block_cpl(&cue165, 55));
        assert!(check_block_cpl(&cue165, 56));
        assert!(check_block_cpl(&sent(""), 84));
        let over = sent(&format!("{} <eol> {} <eob>", line_of(42), line_of(42)));
        assert!(!check_block_cpl(&over, 84));
        let at = sent(&format!("{} <eol> {} <eob>", line_of(42), line_of(41)));
        assert!(check_block_cpl(&at, 84));
    }

    #[test]
    fn cps() {
        let p = ConstraintProfile::default();
        let cue164 = sent("I wanted to challenge the idea <eob>");
        let w = SegmentDuration::new("t", 537.020, 1.456).unwrap();
        let c = check_cps(&cue164, &w, &p).unwrap();
        assert!((c.cps - 20.604).abs() < 0.01, "{}", c.cps);
        assert!(c.conforming);

        let empty = check_cps(&sent(""), &SegmentDuration::new("t", 0.0, 1.0).unwrap(), &p).unwrap();
        assert_eq!(empty.cps, 0.0);
        assert!(empty.conforming);

        let fast = sent(&format!("{} <eob>", line_of(43)));
        let c = check_cps(&fast, &SegmentDuration::new("t", 0.0, 1.0).unwrap(), &p).unwrap();
        assert_eq!(c.cps, 43.0);
        assert!(!c.conforming);

        let zero = SegmentDuration {
            audio_id: "t".into(),
            offset: 0.0,
            duration: 0.0,
        };
        assert!(matches!(
            check_cps(&fast, &zero, &p),
            Err(ConstraintError::NonPositiveDuration(_))
        ));
    }

    #[test]
    fn lines_and_balance() {
        let p = ConstraintProfile::default();
        let fig = sent(FIGURE);
        assert!(check_lines(&fig, &p));
        assert!(check_lines(&sent("a b c"), &p));
        assert!(!check_lines(&sent("a <eol> b <eol> c <eob>"), &p));

        let bal = line_balance(&fig);
        assert_eq!(bal[0], 1.0);
        assert!((bal[1] - 25.0 / 30.0).abs() < 1e-12);
        let ten_forty = sent(&format!("{} <eol> {} <eob>", line_of(10), line_of(40)));
        assert_eq!(line_balance(&ten_forty), vec![0.25]);
    }

    #[test]
    fn orphans() {
        let p = ConstraintProfile::default();
        assert_eq!(orphan_lines(&sent("a whole line <eol> ok <eob>"), &p), 1);
        assert_eq!(orphan_lines(&sent(FIGURE), &p), 0);
    }

    #[test]
    fn corpus_stats() {
        let p = ConstraintProfile::default();
        let r = conformity_stats(&[sent(FIGURE)], &p);
        assert_eq!(r.total_sentences, 1);
        assert_eq!(r.conforming_sentences, 1);
        assert_eq!(r.conforming_block_sentences, 1);
        assert_eq!(r.sentences_with_eol, 1);
        assert_eq!(r.total_lines, 3);
        assert_eq!(r.worst_line_lengths, vec![30]);

        let empty = conformity_stats(&[], &p);
        assert_eq!(empty.total_sentences, 0);
        assert_eq!(empty.conforming_sentences, 0);
        assert_eq!(empty.line_conformity(), 1.0);

        let mut corpus: Vec<_> = (0..7).map(|_| sent("short line <eob>")).collect();
        corpus.extend((0..3).map(|_| sent(&format!("{} <eob>", line_of(50)))));
        let r = conformity_stats(&corpus, &p);
        assert_eq!((r.conforming_sentences, r.total_sentences), (7, 10));
        assert_eq!(r.conforming_block_sentences, 10);
        assert_eq!(
            conformity_stats_with(&corpus, &p, Execution::Sequential),
            conformity_stats_with(&corpus, &p, Execution::Parallel)
        );
        let json = r.to_json();
        assert_eq!(json["conforming_42"], 7);
        assert_eq!(json["totals"]["sentences"], 10);
    }

    #[test]
    fn profile_file() {
        let p = ConstraintProfile::parse("# comment\ncpl_limit = 37\ncps_limit=17.5\n\n").unwrap();
        assert_eq!(p.cpl_limit, 37);
        assert_eq!(p.cps_limit, 17.5);
        assert_eq!(p.max_lines_per_block, 2);
        assert!(matches!(
            ConstraintProfile::parse("cpl_limit = 0"),
            Err(ConstraintError::Profile { .. })
        ));
        assert!(matches!(
            ConstraintProfile::parse("bogus = 1"),
            Err(ConstraintError::Profile { line: 1, .. })
        ));
        assert!(ConstraintProfile::parse("cpl_limit").is_err());
    }

    fn arb_sentence() -> impl Strategy<Value = AnnotatedSentence> {
        prop::collection::vec(("[a-z]{1,12}", 0u8..5), 1..25).prop_map(|items| {
            let n = items.len();
            let mut line = Vec::new();
            for (i, (w, r)) in items.into_iter().enumerate() {
                line.push(w);
                if i + 1 == n || r == 0 {
                    line.push("<eob>".to_string());
                } else if r == 1 {
                    line.push("<eol>".to_string());
                }
            }
            AnnotatedSentence::parse(&line.join(" "), Grammar::Lenient).unwrap()
        })
    }

    proptest! {
        #[test]
        fn raising_limit_is_monotone(corpus in prop::collection::vec(arb_sentence(), 0..20), limit in 5usize..60) {
            let lo = ConstraintProfile { cpl_limit: limit, ..Default::default() };
            let hi = ConstraintProfile { cpl_limit: limit + 1, ..Default::default() };
            for s in &corpus {
                if check_cpl(s, &lo).conforming {
                    prop_assert!(check_cpl(s, &hi).conforming);
                }
            }
            prop_assert!(conformity_stats(&corpus, &hi).conforming_sentences
                >= conformity_stats(&corpus, &lo).conforming_sentences);
        }

        #[test]
        fn line_limit_implies_block_limit(s in arb_sentence(), limit in 5usize..60) {
            let p = ConstraintProfile { cpl_limit: limit, ..Default::default() };
            if check_cpl(&s, &p).conforming && check_lines(&s, &p) {
                prop_assert!(check_block_cpl(&s, 2 * limit + 1));
            }
        }

        #[test]
        fn cps_scales_linearly(s in arb_sentence(), d in 0.1f64..100.0) {
            let p = ConstraintProfile::default();
            let one = check_cps(&s, &SegmentDuration::new("a", 0.0, d).unwrap(), &p).unwrap();
            let two = check_cps(&s, &SegmentDuration::new("a", 0.0, 2.0 * d).unwrap(), &p).unwrap();
            prop_assert_eq!(two.cps * 2.0, one.cps);
        }

        #[test]
        fn breaks_never_count(s in arb_sentence()) {
            let plain = AnnotatedSentence::plain(&crate::annotate::strip_breaks(&s)).unwrap();
            let total: usize = line_lengths(&s).iter().sum();
            let lines = line_lengths(&s).len();
            prop_assert_eq!(total + lines - 1, line_lengths(&plain)[0]);
        }
    }
}
