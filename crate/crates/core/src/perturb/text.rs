//! Line-oriented helpers for span-based source edits.

use crate::model::Span;

pub fn line_start(src: &str, pos: usize) -> usize {
    src[..pos].rfind('\n').map_or(0, |i| i + 1)
}

/// Position just past the newline ending the line that contains `pos`
/// (or the end of the text).
pub fn line_end_inclusive(src: &str, pos: usize) -> usize {
    src[pos..].find('\n').map_or(src.len(), |i| pos + i + 1)
}

/// 1-based line number of `pos`.
pub fn line_number(src: &str, pos: usize) -> usize {
    src[..pos].bytes().filter(|&b| b == b'\n').count() + 1
}

pub fn column(src: &str, pos: usize) -> usize {
    pos - line_start(src, pos)
}

/// True when the span sits alone on its line(s), allowing a trailing
/// comment.
pub fn occupies_own_lines(src: &str, span: Span) -> bool {
    let before = &src[line_start(src, span.start)..span.start];
    let after_end = src[span.end..].find('\n').map_or(src.len(), |i| span.end + i);
    let after = src[span.end..after_end].trim_start();
    before.trim().is_empty() && (after.is_empty() || after.starts_with('#'))
}

/// Applies non-overlapping replacements given as (span, text).
pub fn splice(src: &str, mut edits: Vec<(Span, String)>) -> String {
    edits.sort_by_key(|(s, _)| (s.start, s.end));
    let mut out = String::with_capacity(src.len() + 16);
    let mut cursor = 0;
    for (span, text) in edits {
        debug_assert!(span.start >= cursor, "overlapping edits");
        out.push_str(&src[cursor..span.start]);
        out.push_str(&text);
        cursor = span.end;
    }
    out.push_str(&src[cursor..]);
    out
}
