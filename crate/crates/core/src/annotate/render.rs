use super::{AnnotateError, AnnotatedSentence};
use crate::srt::{SegmentDuration, Subtitle, Timestamp};

/// Turns a strict sentence into cues, one per block, sharing `window`
/// in proportion to each block's character count.
///
/// Block boundaries are rounded to the millisecond from cumulative shares,
/// so the cues exactly cover the window and never overlap.
pub fn render_srt(
    s: &AnnotatedSentence,
    window: &SegmentDuration,
    start_index: u32,
) -> Result<Vec<Subtitle>, AnnotateError> {
    s.check_strict()?;
    if !(window.duration.is_finite() && window.duration > 0.0) {
        return Err(AnnotateError::Window(format!(
            "duration {} must be positive",
            window.duration
        )));
    }
    if start_index == 0 {
        return Err(AnnotateError::Window("cue indices start at 1".into()));
    }
    let blocks = s.blocks();
    let start = window.start().millis();
    let total = (window.duration * 1000.0).round() as u64;
    if total < blocks.len() as u64 {
        return Err(AnnotateError::Window(format!(
            "{total} ms cannot hold {} cues",
            blocks.len()
        )));
    }

    let block_chars: Vec<u64> = blocks
        .iter()
        .map(|lines| {
            let span = lines[0].start..lines[lines.len() - 1].end;
            s.span_chars(span) as u64
        })
        .collect();
    let all: u64 = block_chars.iter().sum();

    // bounds[k] is the end of block k relative to the window start.
    let mut bounds = Vec::with_capacity(blocks.len());
    let mut cum = 0u64;
    for &c in &block_chars {
        cum += c;
        bounds.push(((total as u128 * cum as u128 + all as u128 / 2) / all as u128) as u64);
    }
    let n = bounds.len();
    bounds[n - 1] = total;
    for k in 0..n {
        let floor = if k == 0 { 1 } else { bounds[k - 1] + 1 };
        bounds[k] = bounds[k].max(floor);
    }
    for k in (0..n - 1).rev() {
        bounds[k] = bounds[k].min(bounds[k + 1] - 1);
    }

    let mut cues = Vec::with_capacity(n);
    let mut from = 0;
    for (k, lines) in blocks.iter().enumerate() {
        let text = lines.iter().map(|r| s.span_text(r.clone()));
        let cue = Subtitle::new(
            start_index + k as u32,
            Timestamp::from_millis(start + from),
            Timestamp::from_millis(start + bounds[k]),
            text,
        )
        .map_err(|e| AnnotateError::Window(e.to_string()))?;
        cues.push(cue);
        from = bounds[k];
    }
    Ok(cues)
}
