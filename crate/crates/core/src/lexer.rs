//! Lenient tokenizer for Dafny-style source.
//!
//! The similarity metric has to work on incomplete or broken programs, so
//! lexing never fails: unknown characters come out as single-character
//! punctuation tokens and unterminated literals run to the end of the line.
//! Comments are stripped; string and character literals are kept as single
//! `Literal` tokens; multi-character operators are matched maximal-munch.

use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

/// Built-in reserved-word list, shipped as a data file so the
/// identifier/keyword split stays reproducible.
pub const DEFAULT_KEYWORD_TABLE: &str = include_str!("../data/dafny_keywords.txt");

static DEFAULT_KEYWORDS: Lazy<KeywordTable> =
    Lazy::new(|| KeywordTable::parse(DEFAULT_KEYWORD_TABLE));

/// Multi-character operators, longest first so maximal munch falls out of a
/// linear scan.
const MULTI_OPERATORS: &[&str] = &[
    "<==>", "==>", "<==", "::", ":=", ":|", "==", "!=", "<=", ">=", "&&", "||", "..", "->", "=>",
];

const SINGLE_OPERATORS: &str = "+-*/%<>!&|=^~";

/// A keyword table: one word per line, `#` starts a comment line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordTable {
    words: BTreeSet<String>,
}

impl KeywordTable {
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_owned)
            .collect();
        KeywordTable { words }
    }

    pub fn load(path: &Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// The frozen default table used by [`tokenize`] and [`tokenize_context`].
pub fn default_keywords() -> &'static KeywordTable {
    &DEFAULT_KEYWORDS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Identifier,
    Keyword,
    Operator,
    Literal,
    Punctuation,
}

/// One lexical unit: classification plus the verbatim lexeme.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
}

impl Token {
    pub fn new(kind: TokenKind, text: impl Into<String>) -> Self {
        Token {
            kind,
            text: text.into(),
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// One physical source line with its (in-context) token list.
///
/// `tokens` is the lexing of `raw` given the surrounding state: a line
/// covered by a block comment opened earlier lexes to an empty list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceLine {
    pub tokens: Vec<Token>,
    pub raw: String,
    /// 1-based.
    pub line_number: usize,
}

/// Tokenizes a single line. Never fails; comments are stripped.
pub fn tokenize(line: &str) -> Vec<Token> {
    let mut depth = 0usize;
    scan_line(line, &mut depth, default_keywords())
}

/// Tokenizes a whole source text, one [`SourceLine`] per physical line.
/// Block comments may span lines; covered lines get empty token lists.
pub fn tokenize_context(source: &str) -> Vec<SourceLine> {
    let mut depth = 0usize;
    let table = default_keywords();
    source
        .lines()
        .enumerate()
        .map(|(i, raw)| SourceLine {
            tokens: scan_line(raw, &mut depth, table),
            raw: raw.to_owned(),
            line_number: i + 1,
        })
        .collect()
}

fn scan_line(line: &str, comment_depth: &mut usize, table: &KeywordTable) -> Vec<Token> {
    let chars: Vec<char> = line.chars().collect();
    let n = chars.len();
    let mut tokens = Vec::new();
    let mut i = 0;

    while i < n {
        if *comment_depth > 0 {
            // Inside a block comment; Dafny block comments nest.
            if chars[i] == '*' && i + 1 < n && chars[i + 1] == '/' {
                *comment_depth -= 1;
                i += 2;
            } else if chars[i] == '/' && i + 1 < n && chars[i + 1] == '*' {
                *comment_depth += 1;
                i += 2;
            } else {
                i += 1;
            }
            continue;
        }

        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '/' && i + 1 < n && chars[i + 1] == '/' {
            break; // line comment
        }
        if c == '/' && i + 1 < n && chars[i + 1] == '*' {
            *comment_depth += 1;
            i += 2;
            continue;
        }
        if c == '"' {
            let end = scan_string(&chars, i);
            tokens.push(literal(&chars[i..end]));
            i = end;
            continue;
        }
        if c == '@' && i + 1 < n && chars[i + 1] == '"' {
            let end = scan_verbatim_string(&chars, i);
            tokens.push(literal(&chars[i..end]));
            i = end;
            continue;
        }
        if c == '\'' {
            if let Some(end) = scan_char_literal(&chars, i) {
                tokens.push(literal(&chars[i..end]));
                i = end;
                continue;
            }
            tokens.push(Token::new(TokenKind::Punctuation, "'"));
            i += 1;
            continue;
        }
        if c.is_ascii_digit() {
            let end = scan_number(&chars, i);
            tokens.push(literal(&chars[i..end]));
            i = end;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let end = scan_identifier(&chars, i);
            let text: String = chars[i..end].iter().collect();
            let kind = if table.contains(&text) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            };
            tokens.push(Token::new(kind, text));
            i = end;
            continue;
        }
        if let Some(op) = match_multi_operator(&chars, i) {
            tokens.push(Token::new(TokenKind::Operator, op));
            i += op.len();
            continue;
        }
        if c.is_ascii() && SINGLE_OPERATORS.contains(c) {
            tokens.push(Token::new(TokenKind::Operator, c.to_string()));
            i += 1;
            continue;
        }
        // Anything else, known delimiter or not, is single-char punctuation.
        tokens.push(Token::new(TokenKind::Punctuation, c.to_string()));
        i += 1;
    }

    tokens
}

fn literal(chars: &[char]) -> Token {
    Token::new(TokenKind::Literal, chars.iter().collect::<String>())
}

fn match_multi_operator(chars: &[char], i: usize) -> Option<&'static str> {
    MULTI_OPERATORS
        .iter()
        .copied()
        .find(|op| chars[i..].starts_with(&op.chars().collect::<Vec<_>>()[..]))
}

/// `"..."` with backslash escapes; unterminated runs to end of line.
fn scan_string(chars: &[char], start: usize) -> usize {
    let mut i = start + 1;
    while i < chars.len() {
        match chars[i] {
            '\\' => i += 2,
            '"' => return i + 1,
            _ => i += 1,
        }
    }
    chars.len()
}

/// `@"..."` verbatim string, `""` escapes the quote.
fn scan_verbatim_string(chars: &[char], start: usize) -> usize {
    let mut i = start + 2;
    while i < chars.len() {
        if chars[i] == '"' {
            if i + 1 < chars.len() && chars[i + 1] == '"' {
                i += 2;
            } else {
                return i + 1;
            }
        } else {
            i += 1;
        }
    }
    chars.len()
}

/// `'c'` or `'\x'` (plus `'\uXXXX'`); returns None when the apostrophe does
/// not open a character literal (it may instead continue an identifier, which
/// the caller handles by treating it as punctuation here). A raw space is not
/// accepted as content: `' '` must lex the same whether or not the tokens
/// around it were re-joined with spaces, so a space character has to be
/// written as an escape for the literal to survive as one token.
fn scan_char_literal(chars: &[char], start: usize) -> Option<usize> {
    let n = chars.len();
    let mut i = start + 1;
    if i >= n || chars[i] == ' ' {
        return None;
    }
    if chars[i] == '\\' {
        i += 1;
        if i < n && chars[i] == 'u' {
            i += 1;
            while i < n && chars[i].is_ascii_hexdigit() {
                i += 1;
            }
        } else {
            i += 1;
        }
    } else if chars[i] == '\'' {
        return None;
    } else {
        i += 1;
    }
    if i < n && chars[i] == '\'' {
        Some(i + 1)
    } else {
        None
    }
}

/// Digit run with `_` separators; `0x` hex; a `.` continues the literal only
/// when followed by a digit, so `0..` lexes as `0` then the range operator.
fn scan_number(chars: &[char], start: usize) -> usize {
    let n = chars.len();
    let mut i = start;
    if chars[i] == '0' && i + 1 < n && (chars[i + 1] == 'x' || chars[i + 1] == 'X') {
        i += 2;
        while i < n && (chars[i].is_ascii_hexdigit() || chars[i] == '_') {
            i += 1;
        }
        return i;
    }
    while i < n && (chars[i].is_ascii_digit() || chars[i] == '_') {
        i += 1;
    }
    if i + 1 < n && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
        i += 1;
        while i < n && (chars[i].is_ascii_digit() || chars[i] == '_') {
            i += 1;
        }
    }
    i
}

fn scan_identifier(chars: &[char], start: usize) -> usize {
    let mut i = start + 1;
    while i < chars.len()
        && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'')
    {
        i += 1;
    }
    i
}
