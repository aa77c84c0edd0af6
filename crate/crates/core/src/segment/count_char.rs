use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SegmentError;
use crate::annotate::{AnnotatedSentence, BreakToken};
use crate::batch::{self, Execution};
use crate::constraints::ConstraintProfile;

/// Character-counting baseline.
///
/// Words are consumed while the line stays within `cpl_limit`; a break goes
/// after the last word that fit. After an `<eob>` (and at the start of the
/// sentence) the break kind is a coin flip between `<eol>` and `<eob>`;
/// after an `<eol>` it is always `<eob>`. The last break is `<eob>`.
pub fn segment_count_char(
    sentence: &str,
    profile: &ConstraintProfile,
    seed: u64,
) -> Result<AnnotatedSentence, SegmentError> {
    segment_with_rng(sentence, profile, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Segments every sentence; sentence `i` draws from stream `i` of the
/// seeded generator, so output does not depend on scheduling.
pub fn segment_count_char_batch(
    sentences: &[String],
    profile: &ConstraintProfile,
    seed: u64,
    exec: Execution,
) -> Vec<Result<AnnotatedSentence, SegmentError>> {
    batch::map_indexed(exec, sentences, |i, s| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        segment_with_rng(s, profile, &mut rng)
    })
}

fn segment_with_rng(
    sentence: &str,
    profile: &ConstraintProfile,
    rng: &mut ChaCha8Rng,
) -> Result<AnnotatedSentence, SegmentError> {
    let mut s = AnnotatedSentence::plain(sentence).map_err(|_| SegmentError::EmptySentence)?;
    if s.is_empty() {
        return Err(SegmentError::EmptySentence);
    }
    let limit = profile.cpl_limit;
    let lens: Vec<usize> = s.words().iter().map(|w| w.chars().count()).collect();
    if let Some(i) = lens.iter().position(|&l| l > limit) {
        return Err(SegmentError::WordTooLong {
            word: s.words()[i].clone(),
            limit,
        });
    }

    let n = lens.len();
    let mut gaps = vec![None; n];
    let mut prev = BreakToken::Eob;
    let mut line = lens[0];
    for i in 1..n {
        if line + 1 + lens[i] <= limit {
            line += 1 + lens[i];
            continue;
        }
        let kind = match prev {
            BreakToken::Eol => BreakToken::Eob,
            BreakToken::Eob if rng.random_bool(0.5) => BreakToken::Eol,
            BreakToken::Eob => BreakToken::Eob,
        };
        gaps[i - 1] = Some(kind);
        prev = kind;
        line = lens[i];
    }
    // The final <eob> closes at most the second line of a block, since an
    // <eol> is always followed by <eob>.
    gaps[n - 1] = Some(BreakToken::Eob);
    s = AnnotatedSentence::from_parts(s.words().to_vec(), gaps);
    debug_assert!(s.is_strict());
    Ok(s)
}
