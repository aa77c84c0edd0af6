use super::GapLabel;
use crate::constraints::ConstraintProfile;

/// Decoder state visible to the features at one gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GapContext {
    /// Length of the current line, including the word before the gap.
    pub chars_since_break: usize,
    /// Kind of the most recent break; `Eob` at the start of a sentence.
    pub prev_break: GapLabel,
    /// Length of the current block so far, lines joined by one space.
    pub block_chars: usize,
}

impl GapContext {
    pub fn sentence_start() -> Self {
        GapContext {
            chars_since_break: 0,
            prev_break: GapLabel::Eob,
            block_chars: 0,
        }
    }

    /// Context for the gap after a word of `len` characters, given the
    /// state left by the previous gap.
    pub(crate) fn advance(self, len: usize) -> Self {
        let grow = |n: usize| if n == 0 { len } else { n + 1 + len };
        GapContext {
            chars_since_break: grow(self.chars_since_break),
            prev_break: self.prev_break,
            block_chars: grow(self.block_chars),
        }
    }

    /// State after taking `label` at this gap.
    pub(crate) fn after(self, label: GapLabel) -> Self {
        match label {
            GapLabel::NoBreak => self,
            GapLabel::Eol => GapContext {
                chars_since_break: 0,
                prev_break: GapLabel::Eol,
                block_chars: self.block_chars,
            },
            GapLabel::Eob => GapContext::sentence_start(),
        }
    }
}

/// Feature strings for the gap after word `gap` (1-based).
///
/// # Panics
///
/// If `gap` is 0 or greater than `words.len()`.
pub fn extract_features(
    words: &[String],
    gap: usize,
    ctx: &GapContext,
    profile: &ConstraintProfile,
) -> Vec<String> {
    assert!(gap >= 1 && gap <= words.len(), "gap {gap} out of range");
    let sf = SentenceFeatures::new(words, profile);
    let mut out = sf.fixed[gap - 1].clone();
    sf.contextual(gap - 1, ctx, profile, &mut out);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Punct {
    None,
    Clause,
    Sentence,
}

impl Punct {
    fn of(word: &str) -> Self {
        let last = word
            .chars()
            .rev()
            .find(|c| !matches!(c, '"' | '\'' | ')' | ']' | '»' | '”' | '’'));
        match last {
            Some('.' | '!' | '?' | '…') => Punct::Sentence,
            Some(',' | ';' | ':') => Punct::Clause,
            _ => Punct::None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Punct::None => "none",
            Punct::Clause => "clause",
            Punct::Sentence => "sent",
        }
    }
}

/// Per-sentence feature material: the history-independent features of each
/// gap, computed once, plus what the history-dependent ones need.
#[derive(Debug, Clone)]
pub(crate) struct SentenceFeatures {
    pub(crate) fixed: Vec<Vec<String>>,
    pub(crate) lens: Vec<usize>,
    punct: Vec<Punct>,
}

const LEN_CAP: usize = 15;

impl SentenceFeatures {
    pub(crate) fn new(words: &[String], profile: &ConstraintProfile) -> Self {
        let n = words.len();
        let cpl = profile.cpl_limit.max(1);
        let lens: Vec<usize> = words.iter().map(|w| w.chars().count()).collect();
        let punct: Vec<Punct> = words.iter().map(|w| Punct::of(w)).collect();
        // suffix[i]: characters of words[i..] joined by spaces.
        let mut suffix = vec![0usize; n + 1];
        for i in (0..n).rev() {
            suffix[i] = lens[i] + if i + 1 < n { 1 + suffix[i + 1] } else { 0 };
        }
        let fixed = (0..n)
            .map(|i| {
                let mut f = Vec::with_capacity(12);
                f.push("bias".to_string());
                f.push(format!("w={}", words[i].to_lowercase()));
                f.push(format!("wl={}", lens[i].min(LEN_CAP)));
                f.push(format!("punct={}", punct[i] != Punct::None));
                f.push(format!("pc={}", punct[i].name()));
                f.push(format!("pos={}", (i + 1) * 10 / n));
                f.push(format!("end={}", (suffix[i + 1] * 4 / cpl).min(12)));
                if i + 1 < n {
                    f.push(format!("nw={}", words[i + 1].to_lowercase()));
                    f.push(format!("nwl={}", lens[i + 1].min(LEN_CAP)));
                    f.push(format!("pc*nwl={}|{}", punct[i].name(), lens[i + 1].min(LEN_CAP)));
                } else {
                    f.push("nw=</s>".to_string());
                    f.push("eos=1".to_string());
                }
                f
            })
            .collect();
        SentenceFeatures { fixed, lens, punct }
    }

    pub(crate) fn len(&self) -> usize {
        self.lens.len()
    }

    /// Appends the features that depend on the decoding history.
    pub(crate) fn contextual(
        &self,
        i: usize,
        ctx: &GapContext,
        profile: &ConstraintProfile,
        out: &mut Vec<String>,
    ) {
        let cpl = profile.cpl_limit.max(1);
        let since = ctx.chars_since_break;
        let prev = ctx.prev_break.name();
        let pc = self.punct[i].name();
        let over = match self.lens.get(i + 1) {
            Some(next) => if since + 1 + next > cpl { "1" } else { "0" },
            None => "eos",
        };
        let since_b = (since / 2).min(cpl / 2 + 6);
        let blk_b = (ctx.block_chars * 8 / cpl).min(24);
        out.push(format!("prev={prev}"));
        out.push(format!("since={since_b}"));
        out.push(format!("over={over}"));
        out.push(format!("blk={blk_b}"));
        out.push(format!("prev*over={prev}|{over}"));
        out.push(format!("prev*pc={prev}|{pc}"));
        out.push(format!("over*pc={over}|{pc}"));
        out.push(format!("since*pc={since_b}|{pc}"));
        out.push(format!("prev*since={prev}|{since_b}"));
        out.push(format!("prev*over*pc={prev}|{over}|{pc}"));
    }
}
