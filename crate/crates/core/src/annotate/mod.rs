//! Sentences annotated with `<eol>` / `<eob>` break symbols.
//!
//! An [`AnnotatedSentence`] stores its words and, for every inter-word gap
//! (including the gap after the last word), an optional break. This makes
//! "no adjacent breaks" and "no leading break" true by construction; the
//! remaining grammar rules are checked by [`AnnotatedSentence::check_strict`].

mod index;
mod render;

use std::fmt;

use thiserror::Error;

pub use index::{align_sentence, build_index, InvertedIndex};
pub use render::render_srt;

pub const EOL: &str = "<eol>";
pub const EOB: &str = "<eob>";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnnotateError {
    #[error("invalid gap {gap} for a sentence of {words} words")]
    InvalidGap { gap: usize, words: usize },
    #[error("grammar violation: {0}")]
    GrammarViolation(String),
    #[error("invalid word {0:?}")]
    InvalidWord(String),
    #[error("no alignment: {0}")]
    NoAlignment(String),
    #[error("duplicate talk id {0:?}")]
    DuplicateTalkId(String),
    #[error("render window: {0}")]
    Window(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BreakToken {
    Eol,
    Eob,
}

impl BreakToken {
    pub fn surface(self) -> &'static str {
        match self {
            BreakToken::Eol => EOL,
            BreakToken::Eob => EOB,
        }
    }

    pub fn from_surface(s: &str) -> Option<Self> {
        match s {
            EOL => Some(BreakToken::Eol),
            EOB => Some(BreakToken::Eob),
            _ => None,
        }
    }
}

impl fmt::Display for BreakToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.surface())
    }
}

/// Borrowed view of one item of an annotated sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Token<'a> {
    Word(&'a str),
    Break(BreakToken),
}

/// A break placed after the `gap`-th word (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BreakPosition {
    pub gap: usize,
    pub kind: BreakToken,
}

impl BreakPosition {
    pub fn new(gap: usize, kind: BreakToken) -> Self {
        BreakPosition { gap, kind }
    }
}

/// Which grammar rules a constructor enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Grammar {
    /// Final `<eob>` and at most one `<eol>` per block.
    #[default]
    Strict,
    /// Only the structural rules: no leading or adjacent breaks.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct AnnotatedSentence {
    words: Vec<String>,
    gaps: Vec<Option<BreakToken>>,
}

impl AnnotatedSentence {
    /// Parses the corpus line format: whitespace-separated tokens, with
    /// `<eol>` and `<eob>` written literally.
    pub fn parse(line: &str, grammar: Grammar) -> Result<Self, AnnotateError> {
        let mut words: Vec<String> = Vec::new();
        let mut gaps: Vec<Option<BreakToken>> = Vec::new();
        for tok in line.split_whitespace() {
            match BreakToken::from_surface(tok) {
                Some(kind) => match gaps.last_mut() {
                    None => {
                        return Err(AnnotateError::GrammarViolation(format!(
                            "sentence starts with {kind}"
                        )))
                    }
                    Some(Some(prev)) => {
                        return Err(AnnotateError::GrammarViolation(format!(
                            "adjacent breaks {prev} {kind}"
                        )))
                    }
                    Some(slot) => *slot = Some(kind),
                },
                None => {
                    words.push(tok.to_string());
                    gaps.push(None);
                }
            }
        }
        let s = AnnotatedSentence { words, gaps };
        if grammar == Grammar::Strict {
            s.check_strict()?;
        }
        Ok(s)
    }

    /// A sentence with no breaks at all.
    pub fn plain(text: &str) -> Result<Self, AnnotateError> {
        let words: Vec<String> = text.split_whitespace().map(str::to_string).collect();
        if let Some(w) = words.iter().find(|w| BreakToken::from_surface(w).is_some()) {
            return Err(AnnotateError::InvalidWord(w.clone()));
        }
        let gaps = vec![None; words.len()];
        Ok(AnnotatedSentence { words, gaps })
    }

    /// Builds from words and one label per gap. Words must already be valid.
    pub(crate) fn from_parts(words: Vec<String>, gaps: Vec<Option<BreakToken>>) -> Self {
        debug_assert_eq!(words.len(), gaps.len());
        AnnotatedSentence { words, gaps }
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Break after each word; index `i` is gap `i + 1`.
    pub fn gaps(&self) -> &[Option<BreakToken>] {
        &self.gaps
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn items(&self) -> impl Iterator<Item = Token<'_>> + '_ {
        self.words.iter().zip(&self.gaps).flat_map(|(w, g)| {
            std::iter::once(Token::Word(w.as_str())).chain(g.map(Token::Break))
        })
    }

    pub fn break_count(&self) -> usize {
        self.gaps.iter().flatten().count()
    }

    pub fn has_eol(&self) -> bool {
        self.gaps.contains(&Some(BreakToken::Eol))
    }

    pub fn has_eob(&self) -> bool {
        self.gaps.contains(&Some(BreakToken::Eob))
    }

    pub fn check_strict(&self) -> Result<(), AnnotateError> {
        if self.gaps.last() != Some(&Some(BreakToken::Eob)) {
            return Err(AnnotateError::GrammarViolation(
                "sentence does not end with <eob>".into(),
            ));
        }
        let mut eol_in_block = false;
        for (i, g) in self.gaps.iter().enumerate() {
            match g {
                Some(BreakToken::Eol) if eol_in_block => {
                    return Err(AnnotateError::GrammarViolation(format!(
                        "second <eol> in one block at gap {}",
                        i + 1
                    )))
                }
                Some(BreakToken::Eol) => eol_in_block = true,
                Some(BreakToken::Eob) => eol_in_block = false,
                None => {}
            }
        }
        Ok(())
    }

    pub fn is_strict(&self) -> bool {
        self.check_strict().is_ok()
    }

    /// Word-index ranges of the lines, grouped by block. Trailing words
    /// after the last break form a final block of their own.
    pub fn blocks(&self) -> Vec<Vec<std::ops::Range<usize>>> {
        let mut blocks = Vec::new();
        let mut lines = Vec::new();
        let mut line_start = 0;
        for (i, g) in self.gaps.iter().enumerate() {
            if let Some(kind) = g {
                lines.push(line_start..i + 1);
                line_start = i + 1;
                if *kind == BreakToken::Eob {
                    blocks.push(std::mem::take(&mut lines));
                }
            }
        }
        if line_start < self.words.len() {
            lines.push(line_start..self.words.len());
        }
        if !lines.is_empty() {
            blocks.push(lines);
        }
        blocks
    }

    /// Character count (Unicode scalars) of `words[range]` joined by single spaces.
    pub fn span_chars(&self, range: std::ops::Range<usize>) -> usize {
        if range.is_empty() {
            return 0;
        }
        let n = range.len();
        self.words[range].iter().map(|w| w.chars().count()).sum::<usize>() + n - 1
    }

    pub fn span_text(&self, range: std::ops::Range<usize>) -> String {
        self.words[range].join(" ")
    }

    /// Drops every `<eol>`, keeping `<eob>`s.
    pub fn without_eols(&self) -> Self {
        let gaps = self
            .gaps
            .iter()
            .map(|g| g.filter(|k| *k == BreakToken::Eob))
            .collect();
        AnnotatedSentence {
            words: self.words.clone(),
            gaps,
        }
    }
}

impl fmt::Display for AnnotatedSentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for item in self.items() {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            match item {
                Token::Word(w) => f.write_str(w)?,
                Token::Break(b) => f.write_str(b.surface())?,
            }
        }
        Ok(())
    }
}

/// Collapses whitespace runs to one space and trims the ends.
pub fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn strip_breaks(s: &AnnotatedSentence) -> String {
    s.words.join(" ")
}

pub fn extract_breaks(s: &AnnotatedSentence) -> Vec<BreakPosition> {
    s.gaps
        .iter()
        .enumerate()
        .filter_map(|(i, g)| g.map(|kind| BreakPosition::new(i + 1, kind)))
        .collect()
}

pub fn apply_breaks(
    text: &str,
    breaks: &[BreakPosition],
    grammar: Grammar,
) -> Result<AnnotatedSentence, AnnotateError> {
    let mut s = AnnotatedSentence::plain(text)?;
    let n = s.words.len();
    let mut last = 0;
    for b in breaks {
        if b.gap == 0 || b.gap > n || b.gap <= last {
            return Err(AnnotateError::InvalidGap { gap: b.gap, words: n });
        }
        s.gaps[b.gap - 1] = Some(b.kind);
        last = b.gap;
    }
    if grammar == Grammar::Strict {
        s.check_strict()?;
    }
    Ok(s)
}

/// Non-fatal note from [`restore_eol_from_double_space`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtraDoubleSpaces {
    /// Double-space runs left in place after the first split.
    pub ignored: usize,
}

/// Splits a subtitle line at its first interior run of two or more spaces.
///
/// Runs touching either end of the line are not split points. At most two
/// lines come back; further runs stay verbatim in the second line and are
/// reported.
pub fn restore_eol_from_double_space(line: &str) -> (Vec<String>, Option<ExtraDoubleSpaces>) {
    let runs = double_space_runs(line);
    let Some(&(start, end)) = runs.first() else {
        return (vec![line.to_string()], None);
    };
    let lines = vec![line[..start].to_string(), line[end..].to_string()];
    let warning = (runs.len() > 1).then(|| ExtraDoubleSpaces {
        ignored: runs.len() - 1,
    });
    (lines, warning)
}

fn double_space_runs(line: &str) -> Vec<(usize, usize)> {
    let bytes = line.as_bytes();
    let mut runs = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b' ' {
            let start = i;
            while i < bytes.len() && bytes[i] == b' ' {
                i += 1;
            }
            if i - start >= 2 && start > 0 && i < bytes.len() {
                runs.push((start, i));
            }
        } else {
            i += 1;
        }
    }
    runs
}
