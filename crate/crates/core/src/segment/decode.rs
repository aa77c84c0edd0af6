use std::cmp::Ordering;

use super::features::{GapContext, SentenceFeatures};
use super::{GapLabel, LinearSegmenterModel};
use crate::annotate::{AnnotateError, AnnotatedSentence, BreakToken, Grammar};
use crate::batch::{self, Execution};
use crate::constraints::ConstraintProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeMode {
    /// Decide `<eol>` and `<eob>` everywhere not already broken.
    #[default]
    Full,
    /// Keep the input's blocks; only `<eol>`s may be added inside them.
    EolOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeOptions {
    pub beam_width: usize,
    pub mode: DecodeMode,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            beam_width: 4,
            mode: DecodeMode::Full,
        }
    }
}

impl DecodeOptions {
    pub fn eol_only(beam_width: usize) -> Self {
        DecodeOptions {
            beam_width,
            mode: DecodeMode::EolOnly,
        }
    }
}

/// A decoded sentence and its summed per-gap label log-probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub sentence: AnnotatedSentence,
    pub score: f64,
}

/// Labels the grammar permits at gap `i` given the state before it.
///
/// `fixed` gaps keep their label, except that an `<eol>` opening a third
/// line becomes `<eob>`. The last gap is always `<eob>`.
/// No `<eol>` is added when the next input break is an `<eol>`
/// (`eol_ahead`), since that would force the input break to change.
/// Around a word longer than the line limit a break is forced when one is
/// permitted, so the word sits on a line of its own.
pub(crate) fn allowed_labels(
    sf: &SentenceFeatures,
    i: usize,
    ctx: GapContext,
    fixed: Option<GapLabel>,
    eol_ahead: bool,
    mode: DecodeMode,
    profile: &ConstraintProfile,
) -> Vec<GapLabel> {
    if i + 1 == sf.len() {
        return vec![GapLabel::Eob];
    }
    let eol_open = ctx.prev_break == GapLabel::Eol;
    match fixed {
        Some(GapLabel::Eol) if eol_open => return vec![GapLabel::Eob],
        Some(label) => return vec![label],
        None => {}
    }
    let mut labels = vec![GapLabel::NoBreak];
    if !eol_open && !eol_ahead {
        labels.push(GapLabel::Eol);
    }
    if mode == DecodeMode::Full {
        labels.push(GapLabel::Eob);
    }
    let cpl = profile.cpl_limit;
    if labels.len() > 1 && (sf.lens[i] > cpl || sf.lens[i + 1] > cpl) {
        labels.remove(0);
    }
    labels
}

#[derive(Clone)]
struct Hyp {
    ctx: GapContext,
    score: f64,
    labels: Vec<GapLabel>,
}

struct Scorer<'a> {
    model: &'a LinearSegmenterModel,
    sf: SentenceFeatures,
    profile: &'a ConstraintProfile,
    buf: Vec<String>,
}

impl<'a> Scorer<'a> {
    fn new(model: &'a LinearSegmenterModel, input: &AnnotatedSentence, profile: &'a ConstraintProfile) -> Self {
        Scorer {
            model,
            sf: SentenceFeatures::new(input.words(), profile),
            profile,
            buf: Vec::new(),
        }
    }

    fn fixed_scores(&self, i: usize) -> [f64; 3] {
        self.model.score(&self.sf.fixed[i])
    }

    fn scores(&mut self, i: usize, fixed: [f64; 3], ctx: &GapContext) -> [f64; 3] {
        self.buf.clear();
        self.sf.contextual(i, ctx, self.profile, &mut self.buf);
        let dynamic = self.model.score(&self.buf);
        log_softmax([fixed[0] + dynamic[0], fixed[1] + dynamic[1], fixed[2] + dynamic[2]])
    }
}

/// Per-gap label log-probabilities. Raw perceptron scores are not
/// comparable across different histories, so paths are ranked by summed
/// log-probabilities instead; the argmax at each gap is unchanged.
pub(crate) fn log_softmax(s: [f64; 3]) -> [f64; 3] {
    let max = s[0].max(s[1]).max(s[2]);
    let log_z = max + s.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    [s[0] - log_z, s[1] - log_z, s[2] - log_z]
}

/// Which gaps the decoder may not choose freely.
///
/// Input breaks are always kept. In full mode an input that already has
/// breaks is taken as segmented and no new break is added.
fn fixed_gaps(input: &AnnotatedSentence, mode: DecodeMode) -> Vec<Option<GapLabel>> {
    let passthrough = mode == DecodeMode::Full && input.break_count() > 0;
    input
        .gaps()
        .iter()
        .map(|g| match g {
            Some(_) => Some(GapLabel::from(*g)),
            None if passthrough => Some(GapLabel::NoBreak),
            None => None,
        })
        .collect()
}

/// For each gap, whether the next input break after it is an `<eol>`.
fn eol_ahead(input: &AnnotatedSentence) -> Vec<bool> {
    let mut out = vec![false; input.len()];
    let mut next = false;
    for (i, g) in input.gaps().iter().enumerate().rev() {
        out[i] = next;
        if let Some(k) = g {
            next = *k == BreakToken::Eol;
        }
    }
    out
}

fn assemble(input: &AnnotatedSentence, labels: &[GapLabel]) -> AnnotatedSentence {
    AnnotatedSentence::from_parts(
        input.words().to_vec(),
        labels.iter().map(|l| l.as_break()).collect(),
    )
}

/// Plain left-to-right beam search of the given width.
pub fn raw_beam_search(
    model: &LinearSegmenterModel,
    input: &AnnotatedSentence,
    profile: &ConstraintProfile,
    beam_width: usize,
    mode: DecodeMode,
) -> Decoded {
    let width = beam_width.max(1);
    let mut scorer = Scorer::new(model, input, profile);
    let ahead = eol_ahead(input);
    let fixed = fixed_gaps(input, mode);
    let mut beam = vec![Hyp {
        ctx: GapContext::sentence_start(),
        score: 0.0,
        labels: Vec::with_capacity(input.len()),
    }];
    for i in 0..input.len() {
        let base = scorer.fixed_scores(i);
        let mut next = Vec::with_capacity(beam.len() * 3);
        for h in &beam {
            let ctx = h.ctx.advance(scorer.sf.lens[i]);
            let scores = scorer.scores(i, base, &ctx);
            for label in allowed_labels(&scorer.sf, i, ctx, fixed[i], ahead[i], mode, profile) {
                let mut labels = h.labels.clone();
                labels.push(label);
                next.push(Hyp {
                    ctx: ctx.after(label),
                    score: h.score + scores[label.index()],
                    labels,
                });
            }
        }
        next.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal));
        next.truncate(width);
        beam = next;
    }
    let best = beam.swap_remove(0);
    Decoded {
        sentence: assemble(input, &best.labels),
        score: best.score,
    }
}

/// Takes the best-scoring allowed label at every gap.
pub fn greedy_decode(
    model: &LinearSegmenterModel,
    input: &AnnotatedSentence,
    profile: &ConstraintProfile,
    mode: DecodeMode,
) -> Decoded {
    let mut scorer = Scorer::new(model, input, profile);
    let ahead = eol_ahead(input);
    let fixed = fixed_gaps(input, mode);
    let mut ctx = GapContext::sentence_start();
    let mut total = 0.0;
    let mut labels = Vec::with_capacity(input.len());
    for i in 0..input.len() {
        let base = scorer.fixed_scores(i);
        ctx = ctx.advance(scorer.sf.lens[i]);
        let scores = scorer.scores(i, base, &ctx);
        let allowed = allowed_labels(&scorer.sf, i, ctx, fixed[i], ahead[i], mode, profile);
        let mut best = allowed[0];
        for &l in &allowed[1..] {
            if scores[l.index()] > scores[best.index()] {
                best = l;
            }
        }
        total += scores[best.index()];
        labels.push(best);
        ctx = ctx.after(best);
    }
    Decoded {
        sentence: assemble(input, &labels),
        score: total,
    }
}

/// Constrained beam decode.
///
/// Returns the best result over beam widths `1..=beam_width`, so widening
/// the beam never lowers the score. Width 1 is exactly [`greedy_decode`].
pub fn decode(
    model: &LinearSegmenterModel,
    input: &AnnotatedSentence,
    profile: &ConstraintProfile,
    opts: &DecodeOptions,
) -> Decoded {
    if input.is_empty() {
        return Decoded {
            sentence: AnnotatedSentence::default(),
            score: 0.0,
        };
    }
    let mut best = raw_beam_search(model, input, profile, 1, opts.mode);
    for width in 2..=opts.beam_width {
        let d = raw_beam_search(model, input, profile, width, opts.mode);
        if d.score > best.score {
            best = d;
        }
    }
    best
}

/// Segments a sentence, keeping any breaks it already has.
pub fn segment_learned(
    model: &LinearSegmenterModel,
    input: &AnnotatedSentence,
    profile: &ConstraintProfile,
    opts: &DecodeOptions,
) -> AnnotatedSentence {
    decode(model, input, profile, opts).sentence
}

/// Parses `text` (plain, or with break symbols) and segments it.
pub fn segment_text(
    model: &LinearSegmenterModel,
    text: &str,
    profile: &ConstraintProfile,
    opts: &DecodeOptions,
) -> Result<AnnotatedSentence, AnnotateError> {
    let input = AnnotatedSentence::parse(text, Grammar::Lenient)?;
    Ok(segment_learned(model, &input, profile, opts))
}

pub fn segment_learned_batch(
    model: &LinearSegmenterModel,
    inputs: &[AnnotatedSentence],
    profile: &ConstraintProfile,
    opts: &DecodeOptions,
    exec: Execution,
) -> Vec<AnnotatedSentence> {
    batch::map(exec, inputs, |s| segment_learned(model, s, profile, opts))
}
