//! Python 3 tokenizer with byte spans.
//!
//! Two entry points share one scanner: [`tokenize`] produces the layout-aware
//! stream (NEWLINE / INDENT / DEDENT) the parser consumes, and
//! [`lexical_tokens`] produces a flat list of significant tokens for diffing,
//! tolerating inconsistent indentation.

use serde::{Deserialize, Serialize};

/// Half-open byte range into a source string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn cover(self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }

    pub fn contains(&self, other: Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokKind {
    Name,
    Number,
    Str,
    Op,
    Comment,
    Newline,
    Indent,
    Dedent,
    EndMarker,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokKind,
    pub span: Span,
}

impl Token {
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.span.start..self.span.end]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message} at byte {pos}")]
pub struct LexError {
    pub pos: usize,
    pub message: String,
}

fn lex_err<T>(pos: usize, message: impl Into<String>) -> Result<T, LexError> {
    Err(LexError { pos, message: message.into() })
}

const OPERATORS: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", "<<", ">>", "<=", ">=", "==", "!=", "+=", "-=", "*=",
    "/=", "%=", "&=", "|=", "^=", "@=", "+", "-", "*", "/", "%", "@", "&", "|", "^", "~", "<", ">", "(", ")", "[", "]",
    "{", "}", ",", ":", ";", ".", "=",
];

pub const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue", "def", "del",
    "elif", "else", "except", "finally", "for", "from", "global", "if", "import", "in", "is", "lambda", "nonlocal",
    "not", "or", "pass", "raise", "return", "try", "while", "with", "yield",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

fn is_ident_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

struct Scanner<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Scanner<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(offset)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    /// Length in bytes of a string prefix (`r`, `b`, `f`, `rb`, ...) if the
    /// text at the cursor starts a string literal.
    fn string_prefix_len(&self) -> Option<usize> {
        let rest = self.rest().as_bytes();
        let mut i = 0;
        while i < rest.len() && i < 2 && matches!(rest[i], b'r' | b'R' | b'b' | b'B' | b'u' | b'U' | b'f' | b'F') {
            i += 1;
        }
        if i < rest.len() && (rest[i] == b'\'' || rest[i] == b'"') {
            Some(i)
        } else {
            None
        }
    }

    fn scan_string(&mut self, prefix_len: usize) -> Result<(), LexError> {
        let start = self.pos;
        self.pos += prefix_len;
        let quote = self.bump().unwrap();
        let triple = self.peek() == Some(quote) && self.peek_at(1) == Some(quote);
        if triple {
            self.bump();
            self.bump();
        }
        loop {
            match self.bump() {
                None => return lex_err(start, "unterminated string literal"),
                // Raw strings still cannot end on an escaped quote.
                Some('\\') => {
                    if self.bump().is_none() {
                        return lex_err(start, "unterminated string literal");
                    }
                }
                Some('\n') if !triple => return lex_err(start, "unterminated string literal"),
                Some(c) if c == quote => {
                    if !triple {
                        return Ok(());
                    }
                    if self.peek() == Some(quote) && self.peek_at(1) == Some(quote) {
                        self.bump();
                        self.bump();
                        return Ok(());
                    }
                }
                Some(_) => {}
            }
        }
    }

    fn scan_number(&mut self) -> Result<(), LexError> {
        let start = self.pos;
        let rest = self.rest().as_bytes();
        if rest.len() > 1 && rest[0] == b'0' && matches!(rest[1], b'x' | b'X' | b'o' | b'O' | b'b' | b'B') {
            self.pos += 2;
            while let Some(c) = self.peek() {
                if c.is_ascii_hexdigit() || c == '_' {
                    self.bump();
                } else {
                    break;
                }
            }
            if self.pos == start + 2 {
                return lex_err(start, "invalid number literal");
            }
            return Ok(());
        }
        let digits = |s: &mut Self| {
            while let Some(c) = s.peek() {
                if c.is_ascii_digit() || c == '_' {
                    s.bump();
                } else {
                    break;
                }
            }
        };
        digits(self);
        if self.peek() == Some('.') {
            self.bump();
            digits(self);
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let save = self.pos;
            self.bump();
            if matches!(self.peek(), Some('+' | '-')) {
                self.bump();
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                digits(self);
            } else {
                self.pos = save;
            }
        }
        if matches!(self.peek(), Some('j' | 'J')) {
            self.bump();
        }
        if matches!(self.peek(), Some(c) if is_ident_start(c)) {
            return lex_err(self.pos, "invalid character in number literal");
        }
        Ok(())
    }

    /// Scans one significant token at the cursor (no whitespace, no layout).
    fn scan_token(&mut self) -> Result<TokKind, LexError> {
        let c = self.peek().expect("scan_token at end of input");
        if c == '#' {
            while let Some(c) = self.peek() {
                if c == '\n' || c == '\r' {
                    break;
                }
                self.bump();
            }
            return Ok(TokKind::Comment);
        }
        if let Some(p) = self.string_prefix_len() {
            self.scan_string(p)?;
            return Ok(TokKind::Str);
        }
        if c.is_ascii_digit() || (c == '.' && matches!(self.peek_at(1), Some(d) if d.is_ascii_digit())) {
            self.scan_number()?;
            return Ok(TokKind::Number);
        }
        if is_ident_start(c) {
            while matches!(self.peek(), Some(c) if is_ident_continue(c)) {
                self.bump();
            }
            return Ok(TokKind::Name);
        }
        for op in OPERATORS {
            if self.rest().starts_with(op) {
                self.pos += op.len();
                return Ok(TokKind::Op);
            }
        }
        lex_err(self.pos, format!("unexpected character {c:?}"))
    }
}

/// Layout-aware tokenization following Python's logical-line rules.
pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let mut s = Scanner { src, pos: 0 };
    let mut out = Vec::new();
    let mut indents: Vec<usize> = vec![0];
    let mut depth: usize = 0;
    let mut at_line_start = true;

    loop {
        if at_line_start && depth == 0 {
            // Measure indentation; skip blank and comment-only lines.
            let line_start = s.pos;
            let mut col = 0usize;
            while let Some(c) = s.peek() {
                match c {
                    ' ' => col += 1,
                    '\t' => col = (col / 8 + 1) * 8,
                    '\x0c' => col = 0,
                    _ => break,
                }
                s.bump();
            }
            match s.peek() {
                None => break,
                Some('\n') | Some('\r') => {
                    eat_newline(&mut s);
                    continue;
                }
                Some('#') => {
                    let st = s.pos;
                    s.scan_token()?;
                    out.push(Token { kind: TokKind::Comment, span: Span::new(st, s.pos) });
                    continue;
                }
                Some('\\') if matches!(s.peek_at(1), Some('\n' | '\r')) => {
                    s.bump();
                    eat_newline(&mut s);
                    continue;
                }
                _ => {}
            }
            let cur = *indents.last().unwrap();
            if col > cur {
                indents.push(col);
                out.push(Token { kind: TokKind::Indent, span: Span::new(line_start, s.pos) });
            } else if col < cur {
                while col < *indents.last().unwrap() {
                    indents.pop();
                    out.push(Token { kind: TokKind::Dedent, span: Span::new(s.pos, s.pos) });
                }
                if col != *indents.last().unwrap() {
                    return lex_err(s.pos, "unindent does not match any outer indentation level");
                }
            }
            at_line_start = false;
        }

        let Some(c) = s.peek() else { break };
        match c {
            ' ' | '\t' | '\x0c' => {
                s.bump();
            }
            '\\' if matches!(s.peek_at(1), Some('\n' | '\r')) => {
                s.bump();
                eat_newline(&mut s);
            }
            '\n' | '\r' => {
                let st = s.pos;
                eat_newline(&mut s);
                if depth == 0 {
                    out.push(Token { kind: TokKind::Newline, span: Span::new(st, s.pos) });
                    at_line_start = true;
                }
            }
            _ => {
                let st = s.pos;
                let kind = s.scan_token()?;
                let span = Span::new(st, s.pos);
                if kind == TokKind::Op {
                    match &src[st..s.pos] {
                        "(" | "[" | "{" => depth += 1,
                        ")" | "]" | "}" => {
                            if depth == 0 {
                                return lex_err(st, "unmatched closing bracket");
                            }
                            depth -= 1;
                        }
                        _ => {}
                    }
                }
                out.push(Token { kind, span });
            }
        }
    }
    // Unclosed brackets are left for the parser to report where the
    // expression breaks.
    let end = src.len();
    if !at_line_start {
        out.push(Token { kind: TokKind::Newline, span: Span::new(end, end) });
    }
    while indents.len() > 1 {
        indents.pop();
        out.push(Token { kind: TokKind::Dedent, span: Span::new(end, end) });
    }
    out.push(Token { kind: TokKind::EndMarker, span: Span::new(end, end) });
    Ok(out)
}

fn eat_newline(s: &mut Scanner<'_>) {
    if s.peek() == Some('\r') {
        s.bump();
    }
    if s.peek() == Some('\n') {
        s.bump();
    }
}

/// Significant tokens only: identifiers, keywords, numbers, strings,
/// operators, punctuation and comments. Whitespace and layout are dropped
/// but every token keeps its byte span.
pub fn lexical_tokens(src: &str) -> Result<Vec<Token>, LexError> {
    let mut s = Scanner { src, pos: 0 };
    let mut out = Vec::new();
    while let Some(c) = s.peek() {
        if c.is_whitespace() || (c == '\\' && matches!(s.peek_at(1), Some('\n' | '\r'))) {
            s.bump();
            continue;
        }
        let st = s.pos;
        let kind = s.scan_token()?;
        out.push(Token { kind, span: Span::new(st, s.pos) });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn layout_tokens_for_a_function() {
        use TokKind::*;
        let k = kinds("def f(x):\n    return x\n");
        assert_eq!(k, vec![Name, Name, Op, Name, Op, Op, Newline, Indent, Name, Name, Newline, Dedent, EndMarker]);
    }

    #[test]
    fn brackets_join_lines() {
        let toks = tokenize("x = (1,\n     2)\n").unwrap();
        let newlines = toks.iter().filter(|t| t.kind == TokKind::Newline).count();
        assert_eq!(newlines, 1);
    }

    #[test]
    fn strings_and_numbers() {
        let src = "s = r'a\\'b' + \"\"\"x\ny\"\"\" + f'{v}'\nn = 0x1F + 1.5e-3 + .5 + 3j\n";
        let toks = lexical_tokens(src).unwrap();
        let strs: Vec<_> = toks.iter().filter(|t| t.kind == TokKind::Str).map(|t| t.text(src)).collect();
        assert_eq!(strs, vec!["r'a\\'b'", "\"\"\"x\ny\"\"\"", "f'{v}'"]);
        let nums: Vec<_> = toks.iter().filter(|t| t.kind == TokKind::Number).map(|t| t.text(src)).collect();
        assert_eq!(nums, vec!["0x1F", "1.5e-3", ".5", "3j"]);
    }

    #[test]
    fn bad_dedent_is_an_error() {
        assert!(tokenize("if x:\n        a\n    b\n").is_err());
    }

    #[test]
    fn unterminated_string() {
        assert!(tokenize("x = 'abc\n").is_err());
    }

    #[test]
    fn comments_are_kept_with_spans() {
        let src = "x = 1  # note\n";
        let toks = tokenize(src).unwrap();
        let c = toks.iter().find(|t| t.kind == TokKind::Comment).unwrap();
        assert_eq!(c.text(src), "# note");
    }
}
