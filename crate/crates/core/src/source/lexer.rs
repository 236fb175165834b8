//! Token-level scanner for C and the checked-pointer dialect.
//!
//! Comments and whitespace are skipped; every token keeps its byte range so
//! callers can slice the original text back out. Preprocessor lines become a
//! single [`TokKind::Directive`] token.

use std::ops::Range;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokKind {
    Ident,
    Number,
    Str,
    Char,
    Punct,
    Directive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokKind,
    pub start: usize,
    pub end: usize,
    /// Zero-based line of the first byte.
    pub line: usize,
}

impl Token {
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.start..self.end]
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("unterminated comment starting on line {}", .line + 1)]
    UnterminatedComment { line: usize },
    #[error("unterminated string literal on line {}", .line + 1)]
    UnterminatedString { line: usize },
    #[error("unterminated character literal on line {}", .line + 1)]
    UnterminatedChar { line: usize },
}

impl LexError {
    /// One-based line for diagnostics.
    pub fn line(&self) -> usize {
        match self {
            LexError::UnterminatedComment { line }
            | LexError::UnterminatedString { line }
            | LexError::UnterminatedChar { line } => line + 1,
        }
    }
}

const PUNCT3: &[&str] = &["<<=", ">>=", "..."];
const PUNCT2: &[&str] = &[
    "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=", "*=", "/=", "%=",
    "&=", "|=", "^=", "##",
];

struct Scanner<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    /// True while only whitespace has been seen since the last newline.
    at_line_start: bool,
}

impl<'a> Scanner<'a> {
    fn peek(&self, off: usize) -> Option<u8> {
        self.bytes.get(self.pos + off).copied()
    }

    fn bump(&mut self) {
        if self.bytes[self.pos] == b'\n' {
            self.line += 1;
        }
        self.pos += 1;
    }

    fn skip_block_comment(&mut self) -> Result<(), LexError> {
        let start_line = self.line;
        self.pos += 2;
        loop {
            match self.peek(0) {
                None => return Err(LexError::UnterminatedComment { line: start_line }),
                Some(b'*') if self.peek(1) == Some(b'/') => {
                    self.pos += 2;
                    return Ok(());
                }
                Some(_) => self.bump(),
            }
        }
    }

    fn skip_line_comment(&mut self) {
        while let Some(c) = self.peek(0) {
            if c == b'\n' {
                break;
            }
            self.pos += 1;
        }
    }

    fn quoted(&mut self, quote: u8) -> Result<(), LexError> {
        let line = self.line;
        self.pos += 1;
        loop {
            match self.peek(0) {
                None | Some(b'\n') => {
                    return Err(if quote == b'"' {
                        LexError::UnterminatedString { line }
                    } else {
                        LexError::UnterminatedChar { line }
                    })
                }
                Some(b'\\') => {
                    self.pos += 1;
                    if self.peek(0).is_some() {
                        self.bump();
                    }
                }
                Some(c) if c == quote => {
                    self.pos += 1;
                    return Ok(());
                }
                Some(_) => self.pos += 1,
            }
        }
    }

    fn directive(&mut self) -> Result<(), LexError> {
        loop {
            match self.peek(0) {
                None | Some(b'\n') => return Ok(()),
                Some(b'\\') if self.peek(1) == Some(b'\n') => {
                    self.pos += 1;
                    self.bump();
                }
                Some(b'\\') if self.peek(1) == Some(b'\r') && self.peek(2) == Some(b'\n') => {
                    self.pos += 2;
                    self.bump();
                }
                Some(b'/') if self.peek(1) == Some(b'*') => self.skip_block_comment()?,
                Some(b'/') if self.peek(1) == Some(b'/') => {
                    self.skip_line_comment();
                    return Ok(());
                }
                Some(q @ (b'"' | b'\'')) => {
                    // Unbalanced quotes in directives (e.g. #error don't) are tolerated.
                    let save = (self.pos, self.line);
                    if self.quoted(q).is_err() {
                        self.pos = save.0 + 1;
                        self.line = save.1;
                    }
                }
                Some(_) => self.pos += 1,
            }
        }
    }
}

fn is_ident_start(c: u8) -> bool {
    c.is_ascii_alphabetic() || c == b'_'
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

/// Scans `src` into tokens.
pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let mut s = Scanner {
        bytes: src.as_bytes(),
        pos: 0,
        line: 0,
        at_line_start: true,
    };
    let mut out = Vec::new();
    while let Some(c) = s.peek(0) {
        let start = s.pos;
        let line = s.line;
        match c {
            b'\n' => {
                s.bump();
                s.at_line_start = true;
                continue;
            }
            b' ' | b'\t' | b'\r' | 0x0b | 0x0c => {
                s.pos += 1;
                continue;
            }
            b'\\' if s.peek(1) == Some(b'\n') => {
                s.pos += 1;
                s.bump();
                continue;
            }
            b'/' if s.peek(1) == Some(b'*') => {
                s.skip_block_comment()?;
                continue;
            }
            b'/' if s.peek(1) == Some(b'/') => {
                s.skip_line_comment();
                continue;
            }
            b'#' if s.at_line_start => {
                s.directive()?;
                out.push(Token {
                    kind: TokKind::Directive,
                    start,
                    end: trim_end(src, start, s.pos),
                    line,
                });
                continue;
            }
            _ => {}
        }
        s.at_line_start = false;
        let kind = if is_ident_start(c) {
            while s.peek(0).is_some_and(is_ident_char) {
                s.pos += 1;
            }
            // String/char prefixes such as L"..." or u8"...".
            match s.peek(0) {
                Some(q @ (b'"' | b'\''))
                    if matches!(&src[start..s.pos], "L" | "u" | "U" | "u8") =>
                {
                    s.quoted(q)?;
                    if q == b'"' {
                        TokKind::Str
                    } else {
                        TokKind::Char
                    }
                }
                _ => TokKind::Ident,
            }
        } else if c.is_ascii_digit() || (c == b'.' && s.peek(1).is_some_and(|d| d.is_ascii_digit()))
        {
            s.pos += 1;
            while let Some(d) = s.peek(0) {
                // Exponent signs belong to the number: 1e+5, 0x1p-3.
                let exponent_sign = matches!(d, b'+' | b'-')
                    && matches!(s.bytes[s.pos - 1], b'e' | b'E' | b'p' | b'P');
                if is_ident_char(d) || d == b'.' || exponent_sign {
                    s.pos += 1;
                } else {
                    break;
                }
            }
            TokKind::Number
        } else if c == b'"' {
            s.quoted(b'"')?;
            TokKind::Str
        } else if c == b'\'' {
            s.quoted(b'\'')?;
            TokKind::Char
        } else {
            let rest = &src[s.pos..];
            let len = PUNCT3
                .iter()
                .chain(PUNCT2.iter())
                .find(|p| rest.starts_with(**p))
                .map(|p| p.len())
                .unwrap_or_else(|| rest.chars().next().map_or(1, char::len_utf8));
            s.pos += len;
            TokKind::Punct
        };
        out.push(Token {
            kind,
            start,
            end: s.pos,
            line,
        });
    }
    Ok(out)
}

fn trim_end(src: &str, start: usize, end: usize) -> usize {
    start + src[start..end].trim_end().len()
}

/// Body text of a directive with the leading `#name` removed.
pub fn directive_name(text: &str) -> &str {
    let rest = text.trim_start().trim_start_matches('#').trim_start();
    let end = rest
        .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .unwrap_or(rest.len());
    &rest[..end]
}
