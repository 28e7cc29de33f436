//! Proof contexts and lemma discovery.
//!
//! A [`ProofContext`] is a lemma rendered as its source lines with exactly one
//! assertion placeholder. It is the unit both of similarity comparison and of
//! prompting: the rendered form (with the marker line) is what goes into a
//! prompt, and substituting a candidate assertion for the marker yields the
//! code handed back to the verifier.

use crate::lexer::{self, Token};
use crate::{Error, Result};
use once_cell::sync::OnceCell;
use serde::{Deserialize, Serialize};

/// The literal placeholder marker spliced at a candidate location.
pub const PLACEHOLDER_MARKER: &str = "<assertion> Insert the assertion here </assertion>";

/// A lemma with one placeholder position.
///
/// `lines` holds the lemma source without the marker; the marker sits before
/// `lines[placeholder_at]` (or at the very end when `placeholder_at ==
/// lines.len()`), indented by `indent` spaces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProofContext {
    lines: Vec<String>,
    placeholder_at: usize,
    indent: usize,
    #[serde(skip)]
    token_cache: OnceCell<Vec<Vec<Token>>>,
}

impl PartialEq for ProofContext {
    fn eq(&self, other: &Self) -> bool {
        self.lines == other.lines
            && self.placeholder_at == other.placeholder_at
            && self.indent == other.indent
    }
}
impl Eq for ProofContext {}

impl ProofContext {
    pub fn new(lines: Vec<String>, placeholder_at: usize, indent: usize) -> Result<Self> {
        if placeholder_at > lines.len() {
            return Err(Error::LocationOutOfRange {
                line: placeholder_at + 1,
                len: lines.len(),
            });
        }
        if lines.iter().any(|l| l.contains(PLACEHOLDER_MARKER)) {
            return Err(Error::PlaceholderConflict);
        }
        Ok(ProofContext {
            lines,
            placeholder_at,
            indent,
            token_cache: OnceCell::new(),
        })
    }

    /// Builds the context for a lemma with the assertion at `assert_line`
    /// (0-based index into `lemma_lines`) removed; the placeholder takes the
    /// assertion's former position and indentation.
    pub fn from_removed_assertion(lemma_lines: &[String], assert_line: usize) -> Result<Self> {
        if assert_line >= lemma_lines.len() {
            return Err(Error::LocationOutOfRange {
                line: assert_line + 1,
                len: lemma_lines.len(),
            });
        }
        let indent = indent_width(&lemma_lines[assert_line]);
        let mut lines = lemma_lines.to_vec();
        lines.remove(assert_line);
        Self::new(lines, assert_line, indent)
    }

    /// Parses a rendered context back: the text must contain exactly one
    /// marker line.
    pub fn from_rendered(text: &str) -> Result<Self> {
        let rendered: Vec<&str> = text.lines().collect();
        let marker_positions: Vec<usize> = rendered
            .iter()
            .enumerate()
            .filter(|(_, l)| l.contains(PLACEHOLDER_MARKER))
            .map(|(i, _)| i)
            .collect();
        if marker_positions.len() != 1 {
            return Err(Error::PlaceholderCount(marker_positions.len()));
        }
        let at = marker_positions[0];
        let indent = indent_width(rendered[at]);
        let lines = rendered
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != at)
            .map(|(_, l)| (*l).to_owned())
            .collect();
        Self::new(lines, at, indent)
    }

    /// Lemma source lines without the marker (the broken code).
    pub fn source_lines(&self) -> &[String] {
        &self.lines
    }

    pub fn source(&self) -> String {
        self.lines.join("\n")
    }

    /// 0-based index the marker line occupies in the rendered form.
    pub fn placeholder_at(&self) -> usize {
        self.placeholder_at
    }

    pub fn indent(&self) -> usize {
        self.indent
    }

    fn marker_line(&self) -> String {
        format!("{}{}", " ".repeat(self.indent), PLACEHOLDER_MARKER)
    }

    /// Lines with the marker inserted.
    pub fn rendered_lines(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.lines.len() + 1);
        out.extend_from_slice(&self.lines[..self.placeholder_at]);
        out.push(self.marker_line());
        out.extend_from_slice(&self.lines[self.placeholder_at..]);
        out
    }

    pub fn render(&self) -> String {
        self.rendered_lines().join("\n")
    }

    /// The rendered form with `assertion` in place of the marker, at the
    /// marker's indentation. This is the only difference between the broken
    /// lemma and the candidate handed to the verifier.
    pub fn substitute(&self, assertion: &str) -> String {
        let mut out = self.rendered_lines();
        out[self.placeholder_at] = format!("{}{}", " ".repeat(self.indent), assertion.trim());
        out.join("\n")
    }

    /// Tokenized rendered lines, cached; this is what the hierarchical
    /// similarity runs on.
    pub fn token_lines(&self) -> &[Vec<Token>] {
        self.token_cache.get_or_init(|| {
            lexer::tokenize_context(&self.render())
                .into_iter()
                .map(|l| l.tokens)
                .collect()
        })
    }
}

/// Width of the leading whitespace of a line (tabs count as one column).
pub fn indent_width(line: &str) -> usize {
    line.chars().take_while(|c| c.is_whitespace()).count()
}

/// A lemma or method declaration located in a source file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaSpan {
    pub name: String,
    /// 1-based line of the declaration keyword.
    pub start_line: usize,
    /// 1-based line of the body's closing brace.
    pub end_line: usize,
}

impl LemmaSpan {
    pub fn extract_lines(&self, source: &str) -> Vec<String> {
        source
            .lines()
            .skip(self.start_line - 1)
            .take(self.end_line - self.start_line + 1)
            .map(str::to_owned)
            .collect()
    }

    pub fn text(&self, source: &str) -> String {
        self.extract_lines(source).join("\n")
    }

    pub fn contains_line(&self, line: usize) -> bool {
        (self.start_line..=self.end_line).contains(&line)
    }
}

const DECL_MODIFIERS: &[&str] = &["ghost", "static", "abstract", "twostate", "opaque"];

/// Name of the lemma/method a line declares, if any.
fn decl_name(tokens: &[Token]) -> Option<String> {
    use crate::lexer::TokenKind::*;
    let mut it = tokens.iter().peekable();
    while let Some(t) = it.peek() {
        if t.kind == Keyword && DECL_MODIFIERS.contains(&t.text.as_str()) {
            it.next();
        } else {
            break;
        }
    }
    match it.next() {
        Some(t) if t.kind == Keyword && (t.text == "lemma" || t.text == "method") => {}
        _ => return None,
    }
    // Skip an attribute group like {:induction false} between keyword and name.
    let rest: Vec<&Token> = it.collect();
    let mut i = 0;
    if rest.first().map(|t| t.text.as_str()) == Some("{") {
        let mut depth = 0;
        while i < rest.len() {
            match rest[i].text.as_str() {
                "{" => depth += 1,
                "}" => {
                    depth -= 1;
                    if depth == 0 {
                        i += 1;
                        break;
                    }
                }
                _ => {}
            }
            i += 1;
        }
    }
    rest[i..]
        .iter()
        .find(|t| t.kind == Identifier)
        .map(|t| t.text.clone())
}

/// Unmatched braces of a line after pairing groups that open and close within
/// the line. The unmatched sequence of any line is closes-then-opens.
pub(crate) fn net_braces(tokens: &[Token]) -> (usize, usize) {
    let mut closes = 0usize;
    let mut opens = 0usize;
    for t in tokens {
        match t.text.as_str() {
            "{" => opens += 1,
            "}" => {
                if opens > 0 {
                    opens -= 1;
                } else {
                    closes += 1;
                }
            }
            _ => {}
        }
    }
    (closes, opens)
}

/// True when a line carries a whole body within itself: either it starts with
/// `{`, or it trails off with a `{...}` group whose open brace follows a
/// value-like token (which distinguishes a body from a set display such as
/// `requires ys != {}`).
pub(crate) fn single_line_body(tokens: &[Token]) -> bool {
    use crate::lexer::TokenKind::*;
    if tokens.is_empty() {
        return false;
    }
    if tokens[0].text == "{" {
        return true;
    }
    if tokens[tokens.len() - 1].text != "}" {
        return false;
    }
    // Find the `{` matching the final `}`.
    let mut depth = 0i32;
    let mut open_idx = None;
    for (idx, t) in tokens.iter().enumerate().rev() {
        match t.text.as_str() {
            "}" => depth += 1,
            "{" => {
                depth -= 1;
                if depth == 0 {
                    open_idx = Some(idx);
                    break;
                }
            }
            _ => {}
        }
    }
    let Some(open_idx) = open_idx else {
        return false;
    };
    match tokens.get(open_idx.wrapping_sub(1)) {
        None => false,
        Some(prev) => match prev.kind {
            Identifier | Literal => true,
            Punctuation => prev.text == ")" || prev.text == "]",
            Keyword => !matches!(prev.text.as_str(), "in" | "is"),
            Operator => false,
        },
    }
}

/// Finds every lemma/method declaration in `source` together with the extent
/// of its body. Declarations without a body (trait signatures) are skipped.
pub fn find_lemmas(source: &str) -> Vec<LemmaSpan> {
    let lines = lexer::tokenize_context(source);
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let Some(name) = decl_name(&lines[i].tokens) else {
            i += 1;
            continue;
        };
        let mut depth = 0usize;
        let mut body_seen = false;
        let mut end = None;
        let mut j = i;
        while j < lines.len() {
            if j > i && !body_seen && decl_name(&lines[j].tokens).is_some() {
                break; // previous declaration had no body
            }
            let toks = &lines[j].tokens;
            let (closes, opens) = net_braces(toks);
            if !body_seen && (closes, opens) == (0, 0) && single_line_body(toks) {
                end = Some(j);
                break;
            }
            depth = depth.saturating_sub(closes);
            if body_seen && depth == 0 && closes > 0 {
                end = Some(j);
                break;
            }
            if opens > 0 && !body_seen && depth == 0 {
                body_seen = true;
            }
            depth += opens;
            j += 1;
        }
        match end {
            Some(e) => {
                out.push(LemmaSpan {
                    name,
                    start_line: i + 1,
                    end_line: e + 1,
                });
                i = e + 1;
            }
            None => i = j.max(i + 1),
        }
    }
    out
}

/// Finds one lemma by name.
pub fn find_lemma(source: &str, name: &str) -> Result<LemmaSpan> {
    find_lemmas(source)
        .into_iter()
        .find(|l| l.name == name)
        .ok_or_else(|| Error::LemmaNotFound(name.to_owned()))
}
