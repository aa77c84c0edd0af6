use std::collections::{HashMap, HashSet};

use super::{normalize, AnnotateError, AnnotatedSentence, BreakToken};
use crate::srt::{Subtitle, SubtitleDocument};

#[derive(Debug, Clone)]
struct IndexedCue {
    subtitle: Subtitle,
    /// Whitespace-split words of each line.
    lines: Vec<Vec<String>>,
}

impl IndexedCue {
    fn new(subtitle: Subtitle) -> Self {
        let lines = subtitle
            .lines()
            .iter()
            .map(|l| l.split_whitespace().map(str::to_string).collect())
            .collect();
        IndexedCue { subtitle, lines }
    }

    fn word_count(&self) -> usize {
        self.lines.iter().map(Vec::len).sum()
    }

    fn words(&self) -> impl Iterator<Item = &str> {
        self.lines.iter().flatten().map(String::as_str)
    }

    fn first_word(&self) -> Option<&str> {
        self.words().next()
    }
}

#[derive(Debug, Clone, Default)]
struct TalkCues {
    cues: Vec<IndexedCue>,
    by_first_word: HashMap<String, Vec<usize>>,
}

/// Subtitles of every ingested talk, keyed by talk id, with a first-word
/// posting list per talk for containment search.
#[derive(Debug, Clone, Default)]
pub struct InvertedIndex {
    talks: HashMap<String, TalkCues>,
}

impl InvertedIndex {
    /// Total number of indexed cues.
    pub fn len(&self) -> usize {
        self.talks.values().map(|t| t.cues.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn talk_count(&self) -> usize {
        self.talks.len()
    }

    /// The cues of a talk in index order; empty for unknown talks.
    pub fn subtitles(&self, talk_id: &str) -> Vec<&Subtitle> {
        self.talks
            .get(talk_id)
            .map(|t| t.cues.iter().map(|c| &c.subtitle).collect())
            .unwrap_or_default()
    }

    /// Cues of `talk_id` whose whitespace-normalized text occurs in `query`.
    pub fn contained_in(&self, talk_id: &str, query: &str) -> Vec<&Subtitle> {
        let query = normalize(query);
        let Some(talk) = self.talks.get(talk_id) else {
            return Vec::new();
        };
        talk.cues
            .iter()
            .filter(|c| query.contains(&normalize(&c.subtitle.lines().join(" "))))
            .map(|c| &c.subtitle)
            .collect()
    }
}

pub fn build_index(docs: impl IntoIterator<Item = SubtitleDocument>) -> Result<InvertedIndex, AnnotateError> {
    let mut index = InvertedIndex::default();
    for doc in docs {
        if index.talks.contains_key(&doc.talk_id) {
            return Err(AnnotateError::DuplicateTalkId(doc.talk_id));
        }
        let mut talk = TalkCues::default();
        for sub in doc.subtitles {
            let cue = IndexedCue::new(sub);
            if let Some(first) = cue.first_word() {
                talk.by_first_word
                    .entry(first.to_string())
                    .or_default()
                    .push(talk.cues.len());
            }
            talk.cues.push(cue);
        }
        index.talks.insert(doc.talk_id, talk);
    }
    Ok(index)
}

/// Rebuilds `sentence` as a left-to-right tiling of its talk's cues.
///
/// Cues must appear in index order and match whole words exactly. Among
/// several tilings the one choosing the lowest-index cue at each step wins.
pub fn align_sentence(
    sentence: &str,
    talk_id: &str,
    index: &InvertedIndex,
) -> Result<AnnotatedSentence, AnnotateError> {
    let words: Vec<&str> = sentence.split_whitespace().collect();
    if words.is_empty() {
        return Err(AnnotateError::NoAlignment("empty sentence".into()));
    }
    let talk = index
        .talks
        .get(talk_id)
        .ok_or_else(|| AnnotateError::NoAlignment(format!("unknown talk {talk_id:?}")))?;

    let mut failed = HashSet::new();
    let mut chosen = Vec::new();
    if !tile(talk, &words, 0, 0, &mut failed, &mut chosen) {
        return Err(AnnotateError::NoAlignment(format!(
            "no in-order tiling of talk {talk_id:?} cues reconstructs the sentence"
        )));
    }

    let mut out_words = Vec::with_capacity(words.len());
    let mut gaps = Vec::with_capacity(words.len());
    for &ci in &chosen {
        let cue = &talk.cues[ci];
        let last_line = cue.lines.len() - 1;
        for (li, line) in cue.lines.iter().enumerate() {
            for (wi, w) in line.iter().enumerate() {
                out_words.push(w.clone());
                let end_of_line = wi + 1 == line.len();
                gaps.push(match (end_of_line, li == last_line) {
                    (true, true) => Some(BreakToken::Eob),
                    (true, false) => Some(BreakToken::Eol),
                    _ => None,
                });
            }
        }
    }
    Ok(AnnotatedSentence::from_parts(out_words, gaps))
}

fn tile(
    talk: &TalkCues,
    words: &[&str],
    pos: usize,
    min_cue: usize,
    failed: &mut HashSet<(usize, usize)>,
    chosen: &mut Vec<usize>,
) -> bool {
    if pos == words.len() {
        return true;
    }
    if failed.contains(&(pos, min_cue)) {
        return false;
    }
    if let Some(postings) = talk.by_first_word.get(words[pos]) {
        let start = postings.partition_point(|&c| c < min_cue);
        for &ci in &postings[start..] {
            let cue = &talk.cues[ci];
            let n = cue.word_count();
            if pos + n > words.len() || !cue.words().eq(words[pos..pos + n].iter().copied()) {
                continue;
            }
            chosen.push(ci);
            if tile(talk, words, pos + n, ci + 1, failed, chosen) {
                return true;
            }
            chosen.pop();
        }
    }
    failed.insert((pos, min_cue));
    false
}
