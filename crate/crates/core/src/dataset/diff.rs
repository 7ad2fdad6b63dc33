//! Modified-token annotation between an original and a counterfactual.
//!
//! Texts are split into lexical tokens (comments included, whitespace
//! ignored). A longest common subsequence weighted by token length aligns
//! them; counterfactual tokens left unmatched are the modified ones.

use crate::model::lexer::lexical_tokens;
use crate::model::Span;

/// Byte spans of the diff tokens of `text`. Falls back to maximal
/// non-whitespace runs when the text does not tokenize.
pub fn diff_tokens(text: &str) -> Vec<Span> {
    match lexical_tokens(text) {
        Ok(toks) => toks.into_iter().map(|t| t.span).collect(),
        Err(_) => {
            let mut out = Vec::new();
            let mut start = None;
            for (i, c) in text.char_indices() {
                match (c.is_whitespace(), start) {
                    (true, Some(s)) => {
                        out.push(Span::new(s, i));
                        start = None;
                    }
                    (false, None) => start = Some(i),
                    _ => {}
                }
            }
            if let Some(s) = start {
                out.push(Span::new(s, text.len()));
            }
            out
        }
    }
}

fn weight(text: &str, s: Span) -> usize {
    text[s.start..s.end].chars().count()
}

/// Indices of counterfactual tokens matched by a maximum-weight common
/// subsequence.
fn matched(original: &str, a: &[Span], counterfactual: &str, b: &[Span]) -> Vec<bool> {
    let (n, m) = (a.len(), b.len());
    let at = |i: usize| &original[a[i].start..a[i].end];
    let bt = |j: usize| &counterfactual[b[j].start..b[j].end];
    // dp[i][j]: best weight aligning a[i..] with b[j..].
    let w = m + 1;
    let mut dp = vec![0usize; (n + 1) * (m + 1)];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            let mut best = dp[(i + 1) * w + j].max(dp[i * w + j + 1]);
            if at(i) == bt(j) {
                best = best.max(dp[(i + 1) * w + j + 1] + weight(counterfactual, b[j]));
            }
            dp[i * w + j] = best;
        }
    }
    let mut keep = vec![false; m];
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if at(i) == bt(j) && dp[i * w + j] == dp[(i + 1) * w + j + 1] + weight(counterfactual, b[j]) {
            keep[j] = true;
            i += 1;
            j += 1;
        } else if dp[i * w + j] == dp[(i + 1) * w + j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    keep
}

/// Character ranges of `counterfactual` covering its modified tokens.
/// Adjacent modified tokens merge only when they touch in the text.
pub fn annotate_diff(original: &str, counterfactual: &str) -> Vec<Span> {
    let a = diff_tokens(original);
    let b = diff_tokens(counterfactual);
    let keep = matched(original, &a, counterfactual, &b);
    let mut byte_spans: Vec<Span> = Vec::new();
    for (tok, kept) in b.iter().zip(keep) {
        if kept {
            continue;
        }
        match byte_spans.last_mut() {
            Some(last) if last.end == tok.start => last.end = tok.end,
            _ => byte_spans.push(*tok),
        }
    }
    byte_spans.into_iter().map(|s| to_char_span(counterfactual, s)).collect()
}

fn to_char_span(text: &str, s: Span) -> Span {
    let start = text[..s.start].chars().count();
    Span::new(start, start + text[s.start..s.end].chars().count())
}

/// Total characters covered by `spans`.
pub fn covered(spans: &[Span]) -> usize {
    spans.iter().map(Span::len).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(src: &str, spans: &[Span]) -> Vec<String> {
        spans.iter().map(|s| src.chars().skip(s.start).take(s.len()).collect()).collect()
    }

    #[test]
    fn identical_texts_have_no_spans() {
        assert!(annotate_diff("x = 1\nreturn x", "x = 1\nreturn x").is_empty());
        assert!(annotate_diff("x = 1", "x  =  1 ").is_empty());
    }

    #[test]
    fn renamed_identifier_occurrences_are_marked() {
        let cf = "y = 1\nreturn y";
        let spans = annotate_diff("x = 1\nreturn x", cf);
        assert_eq!(spans, vec![Span::new(0, 1), Span::new(13, 14)]);
    }

    #[test]
    fn flip_marks_negation_and_moved_body() {
        let o = "if x > 0:\n    r = 1\nelse:\n    r = 2\n";
        let cf = "if not (x > 0):\n    r = 2\nelse:\n    r = 1\n";
        let spans = annotate_diff(o, cf);
        let t = texts(cf, &spans);
        assert_eq!(t[0], "not");
        assert!(t.contains(&"(".to_string()) && t.contains(&")".to_string()));
        // The branch bodies only differ in their literals.
        assert_eq!(t, vec!["not", "(", ")", "2", "1"]);
        assert_eq!(covered(&spans), 7);
    }

    #[test]
    fn offsets_are_characters() {
        let spans = annotate_diff("s = 'é'\nx = 1", "s = 'é'\ny = 1");
        assert_eq!(spans, vec![Span::new(8, 9)]);
    }
}
