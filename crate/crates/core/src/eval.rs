//! Break-level precision, recall and F1, BLEU, and line-length conformity.
//!
//! A hypothesis break is correct when the reference has a break of the same
//! kind after the same word. Corpus scores are micro-averaged.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::annotate::{extract_breaks, AnnotatedSentence, Token};
use crate::batch::{self, Execution};
use crate::constraints::{line_lengths, ConstraintProfile};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("sentence {index}: hypothesis and reference texts differ")]
    TextMismatch { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct BreakCounts {
    pub correct_breaks: usize,
    pub hyp_breaks: usize,
    pub ref_breaks: usize,
}

impl BreakCounts {
    pub fn merge(self, other: BreakCounts) -> BreakCounts {
        BreakCounts {
            correct_breaks: self.correct_breaks + other.correct_breaks,
            hyp_breaks: self.hyp_breaks + other.hyp_breaks,
            ref_breaks: self.ref_breaks + other.ref_breaks,
        }
    }

    /// Correct over hypothesis breaks; 1 when neither side has any, 0 when
    /// only the reference does.
    pub fn precision(&self) -> f64 {
        ratio(self.correct_breaks, self.hyp_breaks, self.ref_breaks == 0)
    }

    /// Correct over reference breaks, with the mirrored 0/0 convention.
    pub fn recall(&self) -> f64 {
        ratio(self.correct_breaks, self.ref_breaks, self.hyp_breaks == 0)
    }

    /// Equals the harmonic mean of precision and recall, computed from the
    /// counts as 2 * correct / (hyp + ref) so it is exact up to one rounding.
    pub fn f1(&self) -> f64 {
        match self.hyp_breaks + self.ref_breaks {
            0 => 1.0,
            total => 2.0 * self.correct_breaks as f64 / total as f64,
        }
    }

    pub fn prf(&self) -> Prf {
        Prf {
            precision: self.precision(),
            recall: self.recall(),
            f1: self.f1(),
        }
    }
}

fn ratio(num: usize, den: usize, other_empty: bool) -> f64 {
    match den {
        0 if other_empty => 1.0,
        0 => 0.0,
        _ => num as f64 / den as f64,
    }
}

/// Harmonic mean, 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn same_text(hyp: &AnnotatedSentence, reference: &AnnotatedSentence) -> bool {
    hyp.words() == reference.words()
}

/// Break counts for one pair.
pub fn break_counts(hyp: &AnnotatedSentence, reference: &AnnotatedSentence) -> Result<BreakCounts, EvalError> {
    if !same_text(hyp, reference) {
        return Err(EvalError::TextMismatch { index: 0 });
    }
    let h = extract_breaks(hyp);
    let r = extract_breaks(reference);
    // Both lists are sorted by gap with at most one break per gap.
    let (mut i, mut j, mut correct) = (0, 0, 0);
    while i < h.len() && j < r.len() {
        match h[i].gap.cmp(&r[j].gap) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                correct += usize::from(h[i].kind == r[j].kind);
                i += 1;
                j += 1;
            }
        }
    }
    Ok(BreakCounts {
        correct_breaks: correct,
        hyp_breaks: h.len(),
        ref_breaks: r.len(),
    })
}

pub fn break_prf(hyp: &AnnotatedSentence, reference: &AnnotatedSentence) -> Result<(Prf, BreakCounts), EvalError> {
    let c = break_counts(hyp, reference)?;
    Ok((c.prf(), c))
}

fn corpus_counts(
    pairs: &[(AnnotatedSentence, AnnotatedSentence)],
    exec: Execution,
) -> Result<BreakCounts, EvalError> {
    let per = batch::map_indexed(exec, pairs, |index, (h, r)| {
        break_counts(h, r).map_err(|_| EvalError::TextMismatch { index })
    });
    per.into_iter()
        .try_fold(BreakCounts::default(), |acc, c| Ok(acc.merge(c?)))
}

/// Micro-averaged scores. An empty corpus scores 1.
pub fn corpus_prf(pairs: &[(AnnotatedSentence, AnnotatedSentence)]) -> Result<Prf, EvalError> {
    Ok(corpus_counts(pairs, Execution::default())?.prf())
}

/// Clipped n-gram matches and totals for n = 1..=4, plus lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BleuStats {
    pub matches: [usize; 4],
    pub totals: [usize; 4],
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    pub fn new<S: AsRef<str>>(hyp: &[S], reference: &[S]) -> Self {
        let mut st = BleuStats {
            hyp_len: hyp.len(),
            ref_len: reference.len(),
            ..Default::default()
        };
        for n in 1..=4 {
            let mut ref_counts: HashMap<Vec<&str>, usize> = HashMap::new();
            for g in reference.windows(n) {
                *ref_counts.entry(g.iter().map(AsRef::as_ref).collect()).or_default() += 1;
            }
            let mut hyp_counts: HashMap<Vec<&str>, usize> = HashMap::new();
            for g in hyp.windows(n) {
                *hyp_counts.entry(g.iter().map(AsRef::as_ref).collect()).or_default() += 1;
            }
            st.totals[n - 1] = hyp.len().saturating_sub(n - 1);
            st.matches[n - 1] = hyp_counts
                .iter()
                .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
                .sum();
        }
        st
    }

    pub fn merge(mut self, other: BleuStats) -> BleuStats {
        for n in 0..4 {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
        self
    }

    /// BLEU in [0, 100]: geometric mean of the four precisions, unigram
    /// unsmoothed and higher orders as (matches + 1) / (totals + 1), times
    /// the brevity penalty.
    pub fn score(&self) -> f64 {
        if self.hyp_len == 0 {
            return if self.ref_len == 0 { 100.0 } else { 0.0 };
        }
        if self.matches[0] == 0 {
            return 0.0;
        }
        let mut log_sum = (self.matches[0] as f64 / self.totals[0] as f64).ln();
        for n in 1..4 {
            log_sum += ((self.matches[n] + 1) as f64 / (self.totals[n] + 1) as f64).ln();
        }
        let bp = if self.hyp_len >= self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        };
        100.0 * bp * (log_sum / 4.0).exp()
    }
}

pub fn bleu<S: AsRef<str>>(hyp: &[S], reference: &[S]) -> f64 {
    BleuStats::new(hyp, reference).score()
}

/// Words and break symbols, in order.
pub fn tokens_with_breaks(s: &AnnotatedSentence) -> Vec<&str> {
    s.items()
        .map(|t| match t {
            Token::Word(w) => w,
            Token::Break(b) => b.surface(),
        })
        .collect()
}

pub fn tokens_without_breaks(s: &AnnotatedSentence) -> Vec<&str> {
    s.words().iter().map(String::as_str).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub bleu_with_breaks: f64,
    pub bleu_no_breaks: f64,
    pub cpl_conformity_pct: f64,
    pub counts: BreakCounts,
}

impl EvalReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "bleu_breaks": self.bleu_with_breaks,
            "bleu_text": self.bleu_no_breaks,
            "cpl_conformity": self.cpl_conformity_pct,
            "counts": self.counts,
        })
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = [
            ("precision", format!("{:.4}", self.precision)),
            ("recall", format!("{:.4}", self.recall)),
            ("f1", format!("{:.4}", self.f1)),
            ("bleu (breaks)", format!("{:.2}", self.bleu_with_breaks)),
            ("bleu (text)", format!("{:.2}", self.bleu_no_breaks)),
            ("cpl conformity %", format!("{:.2}", self.cpl_conformity_pct)),
            ("correct breaks", self.counts.correct_breaks.to_string()),
            ("hyp breaks", self.counts.hyp_breaks.to_string()),
            ("ref breaks", self.counts.ref_breaks.to_string()),
        ];
        for (k, v) in rows {
            writeln!(f, "{k:<18} {v:>10}")?;
        }
        Ok(())
    }
}

pub fn evaluate(
    pairs: &[(AnnotatedSentence, AnnotatedSentence)],
    profile: &ConstraintProfile,
) -> Result<EvalReport, EvalError> {
    evaluate_with(pairs, profile, Execution::default())
}

pub fn evaluate_with(
    pairs: &[(AnnotatedSentence, AnnotatedSentence)],
    profile: &ConstraintProfile,
    exec: Execution,
) -> Result<EvalReport, EvalError> {
    let counts = corpus_counts(pairs, exec)?;
    let per = batch::map(exec, pairs, |(h, r)| {
        let lines = line_lengths(h);
        let ok = lines.iter().filter(|&&l| l <= profile.cpl_limit).count();
        (
            BleuStats::new(&tokens_with_breaks(h), &tokens_with_breaks(r)),
            BleuStats::new(&tokens_without_breaks(h), &tokens_without_breaks(r)),
            ok,
            lines.len(),
        )
    });
    let (mut with, mut without, mut ok, mut lines) = (BleuStats::default(), BleuStats::default(), 0, 0);
    for (a, b, o, l) in per {
        with = with.merge(a);
        without = without.merge(b);
        ok += o;
        lines += l;
    }
    let prf = counts.prf();
    Ok(EvalReport {
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
        bleu_with_breaks: with.score(),
        bleu_no_breaks: without.score(),
        cpl_conformity_pct: if lines == 0 { 100.0 } else { 100.0 * ok as f64 / lines as f64 },
        counts,
    })
}
