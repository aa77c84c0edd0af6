//! Seeded synthetic corpora for tests and benchmarks.
//!
//! Sentences are drawn from a made-up vocabulary with a skewed word
//! distribution and occasional commas. [`gold_segment`] annotates them with
//! a fixed rule that mixes length and punctuation: a break goes after a
//! punctuated word once the line holds at least [`PUNCT_MIN_LINE`]
//! characters, and wherever the next word would overflow the line limit.
//! The break is `<eob>` after punctuation or after an `<eol>`, else `<eol>`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annotate::{AnnotatedSentence, BreakToken};
use crate::constraints::ConstraintProfile;

pub const PUNCT_MIN_LINE: usize = 16;

const ONSETS: [&str; 16] = ["b", "c", "d", "f", "g", "l", "m", "n", "p", "r", "s", "t", "v", "ch", "st", "pr"];
const NUCLEI: [&str; 6] = ["a", "e", "i", "o", "u", "ou"];
const FUNCTION_WORDS: [&str; 16] = [
    "a", "I", "the", "to", "of", "and", "in", "is", "it", "that", "we", "you", "so", "on", "for", "but",
];

fn vocabulary(rng: &mut ChaCha8Rng, size: usize) -> Vec<String> {
    let mut words: Vec<String> = FUNCTION_WORDS.iter().map(|w| w.to_string()).collect();
    while words.len() < size {
        let syllables = rng.random_range(1..=4);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
            w.push_str(NUCLEI[rng.random_range(0..NUCLEI.len())]);
        }
        if rng.random_bool(0.3) {
            w.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
        }
        words.push(w);
    }
    words
}

/// `n` plain sentences of 3 to 40 words, each ending in a full stop.
pub fn sentences(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = vocabulary(&mut rng, 3000);
    (0..n)
        .map(|_| {
            let len = rng.random_range(3..=40);
            let mut words = Vec::with_capacity(len);
            for i in 0..len {
                // Squaring skews draws towards the front of the vocabulary.
                let u: f64 = rng.random();
                let mut w = vocab[(u * u * vocab.len() as f64) as usize].clone();
                if i + 1 == len {
                    w.push('.');
                } else if i > 0 && rng.random_bool(0.09) {
                    w.push(',');
                }
                words.push(w);
            }
            words.join(" ")
        })
        .collect()
}

fn punctuated(word: &str) -> bool {
    word.ends_with([',', '.', '!', '?', ';', ':'])
}

/// Gold annotation of a plain sentence under the rule described above.
///
/// # Panics
///
/// If the sentence is empty.
pub fn gold_segment(text: &str, profile: &ConstraintProfile) -> AnnotatedSentence {
    let s = AnnotatedSentence::plain(text).expect("plain text");
    assert!(!s.is_empty(), "empty sentence");
    let words = s.words();
    let n = words.len();
    let limit = profile.cpl_limit;
    let mut gaps = vec![None; n];
    let mut prev = BreakToken::Eob;
    let mut line = 0usize;
    for i in 0..n {
        let len = words[i].chars().count();
        line = if line == 0 { len } else { line + 1 + len };
        if i + 1 == n {
            break;
        }
        let next = words[i + 1].chars().count();
        let punct = punctuated(&words[i]);
        if (punct && line >= PUNCT_MIN_LINE) || line + 1 + next > limit {
            let kind = if punct || prev == BreakToken::Eol {
                BreakToken::Eob
            } else {
                BreakToken::Eol
            };
            gaps[i] = Some(kind);
            prev = kind;
            line = 0;
        }
    }
    gaps[n - 1] = Some(BreakToken::Eob);
    AnnotatedSentence::from_parts(words.to_vec(), gaps)
}

pub fn gold_corpus(n: usize, seed: u64, profile: &ConstraintProfile) -> Vec<AnnotatedSentence> {
    sentences(n, seed).iter().map(|t| gold_segment(t, profile)).collect()
}

/// Removes the `<eol>`s of roughly `fraction` of the sentences, emulating
/// lines that were merged when the subtitles were made.
pub fn collapse_eols(corpus: &[AnnotatedSentence], fraction: f64, seed: u64) -> Vec<AnnotatedSentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    corpus
        .iter()
        .map(|s| if rng.random_bool(fraction) { s.without_eols() } else { s.clone() })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::check_cpl;

    #[test]
    fn deterministic() {
        assert_eq!(sentences(50, 3), sentences(50, 3));
        assert_ne!(sentences(50, 3), sentences(50, 4));
    }

    #[test]
    fn gold_is_strict_and_conforming() {
        let p = ConstraintProfile::default();
        for s in gold_corpus(2000, 1, &p) {
            assert!(s.is_strict(), "{s}");
            assert!(check_cpl(&s, &p).conforming, "{s}");
        }
    }

    #[test]
    fn rule_trace() {
        let p = ConstraintProfile::default();
        // "alpha beta gamma delta," is 23 chars and punctuated: <eob>.
        let s = gold_segment("alpha beta gamma delta, epsilon zeta.", &p);
        assert_eq!(s.to_string(), "alpha beta gamma delta, <eob> epsilon zeta. <eob>");
        // A comma on a short line is not a break.
        let s = gold_segment("so, it goes.", &p);
        assert_eq!(s.to_string(), "so, it goes. <eob>");
        // Overflow without punctuation after <eob> gives <eol>, then <eob>.
        let text = ["abcdefghi"; 12].join(" ");
        let s = gold_segment(&text, &p);
        let kinds: Vec<_> = crate::annotate::extract_breaks(&s).iter().map(|b| (b.gap, b.kind)).collect();
        assert_eq!(
            kinds,
            vec![(4, BreakToken::Eol), (8, BreakToken::Eob), (12, BreakToken::Eob)]
        );
    }

    #[test]
    fn collapse_keeps_text_and_eobs() {
        let p = ConstraintProfile::default();
        let gold = gold_corpus(200, 2, &p);
        let collapsed = collapse_eols(&gold, 1.0, 0);
        for (g, c) in gold.iter().zip(&collapsed) {
            assert!(!c.has_eol());
            assert_eq!(g.without_eols(), *c);
        }
        assert_eq!(collapse_eols(&gold, 0.0, 0), gold);
    }
}
