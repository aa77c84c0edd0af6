//! `key = value` line files shared by profiles and pipeline configs.

/// Yields `(line_number, key, value)` for every non-blank, non-comment line.
/// A line without `=` yields an error in the key slot.
pub(crate) fn entries(text: &str) -> impl Iterator<Item = (usize, Result<&str, &'static str>, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            return None;
        }
        Some(match line.split_once('=') {
            Some((k, v)) => (i + 1, Ok(k.trim()), v.trim()),
            None => (i + 1, Err("expected `key = value`"), ""),
        })
    })
}
