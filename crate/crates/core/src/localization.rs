//! Localizing where a missing assertion belongs.
//!
//! Three steps: parse the verifier's error output into [`Violation`]s, model
//! the lemma body as a tree of brace-delimited blocks, then work out candidate
//! placeholder positions. The placement rules:
//!
//! 1. as close as possible before the violation;
//! 2. also at the end of every block on a path from entry to the violation
//!    that introduces extra assumptions (calls, assumes) or local variables,
//!    since an assertion there can use them;
//! 3. when the error names a faulty branch, only positions inside that branch
//!    survive.
//!
//! Postcondition violations anchor at the lemma exit (postconditions are
//! checked on return), so every block that completes before the exit counts
//! as being on a path to it.

use crate::context::{indent_width, ProofContext};
use crate::lexer::{self, Token, TokenKind};
use crate::{Error, Result};
use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourcePos {
    /// 1-based.
    pub line: usize,
    /// 1-based.
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailingKind {
    Postcondition,
    AssertFailed,
    PreconditionAtCall,
    Other(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelatedLocation {
    pub line: usize,
    pub column: usize,
    pub excerpt: String,
}

/// One unprovable proof obligation reported by the verifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub failing_location: SourcePos,
    pub failing_kind: FailingKind,
    pub related_location: Option<RelatedLocation>,
    pub faulty_branch: Option<SourcePos>,
}

/// Violations plus everything that could not be parsed into one.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedErrors {
    pub violations: Vec<Violation>,
    pub diagnostics: Vec<String>,
}

static LOCATED: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"^(?P<path>.*?)\((?P<line>\d+),(?P<col>\d+)\)\s*:\s*(?P<label>Error|Related location)\s*:\s*(?P<msg>.*)$")
        .expect("LOCATED regex is valid")
});

static STYLIZED: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"^\s*(?P<label>Error|Related location)\s*:\s*(?P<msg>.*)$")
        .expect("STYLIZED regex is valid")
});

static SNIPPET_LINE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^\s*\d*\s*\|(?P<content>.*)$").expect("SNIPPET_LINE regex is valid"));

struct Event {
    related: bool,
    pos: Option<SourcePos>,
    path: Option<String>,
    msg: String,
    excerpt: Option<String>,
}

fn is_scaffolding(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.chars().all(|c| c == '^' || c == '|' || c.is_whitespace())
}

fn collect_events(output: &str) -> Vec<Event> {
    let mut events: Vec<Event> = Vec::new();
    for line in output.lines() {
        if line.contains("program verifier finished") {
            continue;
        }
        if let Some(caps) = LOCATED.captures(line) {
            events.push(Event {
                related: &caps["label"] == "Related location",
                pos: Some(SourcePos {
                    line: caps["line"].parse().unwrap_or(0),
                    column: caps["col"].parse().unwrap_or(0),
                }),
                path: Some(caps["path"].trim().to_owned()),
                msg: caps["msg"].to_owned(),
                excerpt: None,
            });
            continue;
        }
        if let Some(caps) = STYLIZED.captures(line) {
            events.push(Event {
                related: &caps["label"] == "Related location",
                pos: None,
                path: None,
                msg: caps["msg"].to_owned(),
                excerpt: None,
            });
            continue;
        }
        // Anything else is excerpt material for the preceding event.
        let Some(event) = events.last_mut() else {
            continue;
        };
        if event.excerpt.is_some() || is_scaffolding(line) {
            continue;
        }
        let content = match SNIPPET_LINE.captures(line) {
            Some(caps) => caps["content"].to_owned(),
            None => line.to_owned(),
        };
        if !content.trim().is_empty() {
            event.excerpt = Some(content);
        }
    }
    events
}

fn classify(msg: &str) -> FailingKind {
    let lower = msg.to_lowercase();
    if lower.contains("postcondition") {
        FailingKind::Postcondition
    } else if lower.contains("precondition") {
        FailingKind::PreconditionAtCall
    } else if lower.contains("assertion") || lower.starts_with("assert") {
        FailingKind::AssertFailed
    } else {
        FailingKind::Other(msg.to_owned())
    }
}

/// First source line whose trimmed text equals the trimmed excerpt.
fn resolve_excerpt(source: &str, excerpt: &str) -> Option<SourcePos> {
    let needle = excerpt.trim();
    if needle.is_empty() {
        return None;
    }
    source.lines().enumerate().find_map(|(i, l)| {
        (l.trim() == needle).then(|| SourcePos {
            line: i + 1,
            column: indent_width(l) + 1,
        })
    })
}

fn is_branch_line(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with("if ")
        || t.starts_with("if(")
        || t.starts_with("} else")
        || t.starts_with("else")
        || t.starts_with("while ")
        || t.starts_with("while(")
        || t.starts_with("match ")
}

/// Parses verifier output against a source file. Understands both located
/// diagnostics (`file(8,4): Error: ...`) and bare `Error:` lines whose
/// following source excerpt is matched back against the file. Never fails:
/// unattributable content lands in `diagnostics`.
pub fn parse_errors_in(output: &str, file_name: &str, source: &str) -> ParsedErrors {
    let mut parsed = ParsedErrors::default();
    let source_lines: Vec<&str> = source.lines().collect();
    let target = Path::new(file_name).file_name().map(|n| n.to_owned());

    for event in collect_events(output) {
        if let (Some(path), Some(expect)) = (&event.path, &target) {
            let matches_file = Path::new(path)
                .file_name()
                .map(|n| n == expect.as_os_str())
                .unwrap_or(false);
            if !matches_file {
                parsed
                    .diagnostics
                    .push(format!("skipped diagnostic for other file: {path}"));
                continue;
            }
        }
        let pos = event.pos.or_else(|| {
            event
                .excerpt
                .as_deref()
                .and_then(|e| resolve_excerpt(source, e))
        });
        let Some(pos) = pos else {
            parsed.diagnostics.push(format!(
                "could not locate {} message: {}",
                if event.related { "related" } else { "error" },
                event.msg
            ));
            continue;
        };

        if event.related {
            if let Some(violation) = parsed.violations.last_mut() {
                violation.related_location = Some(RelatedLocation {
                    line: pos.line,
                    column: pos.column,
                    excerpt: event
                        .excerpt
                        .map(|e| e.trim().to_owned())
                        .unwrap_or_else(|| event.msg.clone()),
                });
            } else {
                parsed.diagnostics.push(format!(
                    "related location without a preceding error: {}",
                    event.msg
                ));
            }
            continue;
        }

        let failing_line_text = source_lines
            .get(pos.line.wrapping_sub(1))
            .copied()
            .unwrap_or("");
        let faulty_branch = is_branch_line(failing_line_text).then_some(pos);
        parsed.violations.push(Violation {
            failing_location: pos,
            failing_kind: classify(&event.msg),
            related_location: None,
            faulty_branch,
        });
    }

    parsed.violations.sort_by_key(|v| {
        (
            v.failing_location.line,
            v.failing_location.column,
            v.related_location.as_ref().map(|r| r.line).unwrap_or(0),
        )
    });
    if parsed.violations.is_empty() && !output.trim().is_empty() && output.contains("Error") {
        parsed
            .diagnostics
            .push(format!("unparsed verifier output:\n{output}"));
    }
    parsed
}

/// [`parse_errors_in`] against a file on disk.
pub fn parse_errors(output: &str, file: &Path) -> ParsedErrors {
    match std::fs::read_to_string(file) {
        Ok(source) => parse_errors_in(output, &file.display().to_string(), &source),
        Err(e) => {
            let mut parsed = parse_errors_in(output, &file.display().to_string(), "");
            parsed.diagnostics.push(format!(
                "could not read {} for excerpt resolution: {e}",
                file.display()
            ));
            parsed
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Body,
    ThenBranch,
    ElseBranch,
    LoopBody,
    MatchArm,
}

/// One brace-delimited block of a lemma body.
#[derive(Debug, Clone, Serialize)]
pub struct Block {
    pub kind: BlockKind,
    /// 1-based line whose trailing `{` opens the block.
    pub header_line: usize,
    /// 1-based line of the matching `}`.
    pub close_line: usize,
    /// Block directly declares local variables (or is guarded by a binding
    /// such-that condition).
    pub introduces_bindings: bool,
    /// Block directly contains a call or assume statement, whose
    /// postconditions become assumptions for everything after it.
    pub introduces_assumptions: bool,
    /// Indentation used for a statement inserted at the end of this block.
    pub stmt_indent: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// The nesting structure of one lemma body; node 0 is the body itself.
#[derive(Debug, Clone, Serialize)]
pub struct BlockTree {
    blocks: Vec<Block>,
    line_count: usize,
}

impl BlockTree {
    pub fn root(&self) -> usize {
        0
    }

    pub fn block(&self, id: usize) -> &Block {
        &self.blocks[id]
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Interior span of a block: the lines strictly after its header through
    /// its closing brace line. Sibling spans are disjoint and children nest
    /// strictly inside parents.
    pub fn span(&self, id: usize) -> (usize, usize) {
        let b = &self.blocks[id];
        (b.header_line + 1, b.close_line)
    }

    pub fn span_contains(&self, id: usize, line: usize) -> bool {
        let (start, end) = self.span(id);
        (start..=end).contains(&line)
    }

    /// Deepest block whose span contains the line, if any.
    pub fn enclosing(&self, line: usize) -> Option<usize> {
        let mut found = None;
        let mut depth = 0usize;
        for (id, _) in self.blocks.iter().enumerate() {
            if self.span_contains(id, line) {
                let d = self.depth(id);
                if found.is_none() || d >= depth {
                    found = Some(id);
                    depth = d;
                }
            }
        }
        found
    }

    fn depth(&self, id: usize) -> usize {
        let mut d = 0;
        let mut cur = self.blocks[id].parent;
        while let Some(p) = cur {
            d += 1;
            cur = self.blocks[p].parent;
        }
        d
    }
}

enum Entity {
    Block(usize),
    Expr,
}

fn line_guard_binds(tokens: &[Token]) -> bool {
    tokens
        .iter()
        .any(|t| t.kind == TokenKind::Operator && t.text == ":|")
}

/// Kind of block a line opens, or None when its trailing `{` belongs to a
/// multi-line expression (a set or map display continued across lines).
fn classify_block_line(tokens: &[Token]) -> Option<(BlockKind, bool)> {
    let first = tokens.iter().find(|t| t.text != "}")?;
    match (&first.kind, first.text.as_str()) {
        (TokenKind::Keyword, "if") => Some((BlockKind::ThenBranch, line_guard_binds(tokens))),
        (TokenKind::Keyword, "else") => Some((BlockKind::ElseBranch, line_guard_binds(tokens))),
        (TokenKind::Keyword, "while") | (TokenKind::Keyword, "for") => {
            Some((BlockKind::LoopBody, false))
        }
        (TokenKind::Keyword, "match") => Some((BlockKind::Body, false)),
        (TokenKind::Keyword, "case") => Some((BlockKind::MatchArm, false)),
        (TokenKind::Keyword, "forall") | (TokenKind::Keyword, "calc") => {
            Some((BlockKind::Body, false))
        }
        (TokenKind::Keyword, "assert") | (TokenKind::Keyword, "assume") => {
            Some((BlockKind::Body, false))
        }
        (TokenKind::Punctuation, "{") => Some((BlockKind::Body, false)),
        _ => None,
    }
}

fn is_call_shape(tokens: &[Token]) -> bool {
    if tokens.first().map(|t| t.kind) != Some(TokenKind::Identifier) {
        return false;
    }
    let mut i = 0;
    while i + 2 < tokens.len() && tokens[i + 1].text == "." {
        if tokens[i + 2].kind != TokenKind::Identifier {
            return false;
        }
        i += 2;
    }
    tokens.get(i + 1).map(|t| t.text.as_str()) == Some("(")
}

/// (introduces_bindings, introduces_assumptions) contribution of one
/// statement line.
fn stmt_flags(tokens: &[Token]) -> (bool, bool) {
    let mut toks = tokens;
    // Strip `label L:` and `ghost` prefixes.
    if toks.first().map(|t| t.text.as_str()) == Some("label") && toks.len() > 2 {
        toks = &toks[3.min(toks.len())..];
    }
    if toks.first().map(|t| t.text.as_str()) == Some("ghost") {
        toks = &toks[1..];
    }
    let Some(first) = toks.first() else {
        return (false, false);
    };
    match (&first.kind, first.text.as_str()) {
        (TokenKind::Keyword, "var") => {
            let rhs_call = toks
                .iter()
                .position(|t| t.text == ":=")
                .map(|i| is_call_shape(&toks[i + 1..]))
                .unwrap_or(false);
            (true, rhs_call)
        }
        (TokenKind::Keyword, "assume") => (false, true),
        (TokenKind::Identifier, _) => {
            if is_call_shape(toks) {
                (false, true)
            } else if let Some(i) = toks.iter().position(|t| t.text == ":=") {
                (false, is_call_shape(&toks[i + 1..]))
            } else {
                (false, false)
            }
        }
        _ => (false, false),
    }
}

/// Builds the block tree of a lemma. The lemma body must have balanced
/// braces; the error names the offending line otherwise.
pub fn build_block_tree(lemma_source: &str) -> Result<BlockTree> {
    let lines = lexer::tokenize_context(lemma_source);

    // Balance check over the whole lemma text.
    let mut open_stack: Vec<usize> = Vec::new();
    for line in &lines {
        for tok in &line.tokens {
            match tok.text.as_str() {
                "{" => open_stack.push(line.line_number),
                "}" if open_stack.pop().is_none() => {
                    return Err(Error::UnbalancedBrace {
                        line: line.line_number,
                    });
                }
                _ => {}
            }
        }
    }
    if let Some(line) = open_stack.pop() {
        return Err(Error::UnbalancedBrace { line });
    }

    // Locate the body: the first line where an unmatched `{` appears at
    // depth zero (or a whole single-line body).
    let mut body_open = None;
    let mut depth = 0usize;
    for (j, line) in lines.iter().enumerate() {
        let (closes, opens) = crate::context::net_braces(&line.tokens);
        depth = depth.saturating_sub(closes);
        if depth == 0 && opens > 0 {
            body_open = Some(j);
            break;
        }
        if depth == 0 && (closes, opens) == (0, 0) && crate::context::single_line_body(&line.tokens)
        {
            // Single-line body such as `lemma F() ensures P {}`.
            let header_indent = indent_width(&line.raw);
            let block = Block {
                kind: BlockKind::Body,
                header_line: line.line_number,
                close_line: line.line_number,
                introduces_bindings: false,
                introduces_assumptions: false,
                stmt_indent: header_indent + 4,
                parent: None,
                children: vec![],
            };
            return Ok(BlockTree {
                blocks: vec![block],
                line_count: lines.len(),
            });
        }
        depth += opens;
    }
    let Some(body_open) = body_open else {
        return Err(Error::UnbalancedBrace { line: 1 });
    };

    let header_indent = indent_width(&lines[body_open].raw);
    let mut blocks = vec![Block {
        kind: BlockKind::Body,
        header_line: lines[body_open].line_number,
        close_line: lines[body_open].line_number,
        introduces_bindings: false,
        introduces_assumptions: false,
        stmt_indent: usize::MAX,
        parent: None,
        children: vec![],
    }];
    let mut indents: Vec<usize> = vec![header_indent];
    let mut stack: Vec<Entity> = Vec::new();

    for line in &lines[body_open..] {
        let toks = &line.tokens;
        let mut line_local = 0usize;
        let mut closed_any = false;
        for tok in toks {
            match tok.text.as_str() {
                "{" => line_local += 1,
                "}" => {
                    if line_local > 0 {
                        line_local -= 1;
                    } else {
                        closed_any = true;
                        match stack.pop() {
                            Some(Entity::Block(id)) => blocks[id].close_line = line.line_number,
                            Some(Entity::Expr) | None => {}
                        }
                    }
                }
                _ => {}
            }
        }

        // Pending opens become blocks or expression groups.
        for slot in 0..line_local {
            let is_first_entity = blocks.len() == 1 && stack.is_empty();
            if is_first_entity {
                stack.push(Entity::Block(0));
                continue;
            }
            let entity = if slot == 0 {
                match classify_block_line(toks) {
                    Some((kind, guard_binds)) => {
                        let parent = stack
                            .iter()
                            .rev()
                            .find_map(|e| match e {
                                Entity::Block(id) => Some(*id),
                                Entity::Expr => None,
                            })
                            .unwrap_or(0);
                        let id = blocks.len();
                        blocks.push(Block {
                            kind,
                            header_line: line.line_number,
                            close_line: line.line_number,
                            introduces_bindings: guard_binds,
                            introduces_assumptions: false,
                            stmt_indent: usize::MAX,
                            parent: Some(parent),
                            children: vec![],
                        });
                        indents.push(indent_width(&line.raw));
                        blocks[parent].children.push(id);
                        Entity::Block(id)
                    }
                    None => Entity::Expr,
                }
            } else {
                Entity::Expr
            };
            stack.push(entity);
        }

        // A plain statement line contributes flags to its enclosing block.
        if line_local == 0 && !closed_any && !toks.is_empty() {
            if let Some(Entity::Block(id)) = stack.last() {
                let (binds, assumes) = stmt_flags(toks);
                let block = &mut blocks[*id];
                block.introduces_bindings |= binds;
                block.introduces_assumptions |= assumes;
                if block.stmt_indent == usize::MAX {
                    block.stmt_indent = indent_width(&line.raw);
                }
            }
        }

        if stack.is_empty() && blocks[0].close_line > blocks[0].header_line {
            break; // body closed
        }
    }

    for (block, header_indent) in blocks.iter_mut().zip(indents) {
        if block.stmt_indent == usize::MAX {
            block.stmt_indent = header_indent + 4;
        }
    }

    Ok(BlockTree {
        blocks,
        line_count: lines.len(),
    })
}

/// A place to put the assertion placeholder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaceholderLocation {
    /// 1-based line the marker is inserted before (lemma-relative).
    pub line: usize,
    /// Leading spaces for the marker line.
    pub indent: usize,
    /// Block the position belongs to.
    pub block: usize,
}

/// How a faulty-branch excerpt pointing at an `if` line is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchReading {
    #[default]
    ThenOnIfLine,
    ElseOnIfLine,
}

/// Candidate placeholder locations plus resolution diagnostics.
#[derive(Debug, Clone, Default)]
pub struct CandidateSet {
    pub locations: Vec<PlaceholderLocation>,
    pub diagnostics: Vec<String>,
}

fn end_of(tree: &BlockTree, id: usize) -> PlaceholderLocation {
    let b = tree.block(id);
    PlaceholderLocation {
        line: b.close_line,
        indent: b.stmt_indent,
        block: id,
    }
}

fn resolve_branch_block(tree: &BlockTree, line: usize, reading: BranchReading) -> Option<usize> {
    let headed: Vec<usize> = (0..tree.blocks().len())
        .filter(|&id| id != tree.root() && tree.block(id).header_line == line)
        .collect();
    if let Some(&then_id) = headed
        .iter()
        .find(|&&id| tree.block(id).kind == BlockKind::ThenBranch)
    {
        return match reading {
            BranchReading::ThenOnIfLine => Some(then_id),
            BranchReading::ElseOnIfLine => {
                let close = tree.block(then_id).close_line;
                (0..tree.blocks().len())
                    .find(|&id| {
                        tree.block(id).kind == BlockKind::ElseBranch
                            && tree.block(id).header_line == close
                    })
                    .or(Some(then_id))
            }
        };
    }
    if let Some(&id) = headed.first() {
        return Some(id);
    }
    tree.enclosing(line)
}

/// Candidate placeholder locations for one violation, nearest to the
/// violation first.
pub fn candidate_locations(
    tree: &BlockTree,
    violation: &Violation,
    reading: BranchReading,
    lemma_source: &str,
) -> CandidateSet {
    let mut out = CandidateSet::default();
    let root = tree.root();
    let is_post = violation.failing_kind == FailingKind::Postcondition;
    let anchor = if is_post {
        tree.block(root).close_line
    } else {
        violation.failing_location.line
    };
    if !is_post && !tree.span_contains(root, anchor) {
        out.diagnostics.push(format!(
            "violation at line {anchor} is outside the lemma body"
        ));
        return out;
    }

    // Rule 2: ends of flagged blocks on some entry-to-violation path.
    for id in 0..tree.blocks().len() {
        let b = tree.block(id);
        if !(b.introduces_bindings || b.introduces_assumptions) {
            continue;
        }
        let on_path = b.close_line <= anchor || tree.span_contains(id, anchor);
        if !on_path {
            continue;
        }
        let pos = end_of(tree, id);
        if pos.line > anchor || (pos.line == anchor && !(is_post && id == root)) {
            continue;
        }
        out.locations.push(pos);
    }

    // Rule 1: immediately before the violation. For postconditions this is
    // the lemma end, which only enters when rule 2 produced nothing (the
    // flagged-block ends are already the closest useful positions).
    if !is_post {
        let lines: Vec<&str> = lemma_source.lines().collect();
        let indent = lines.get(anchor - 1).map(|l| indent_width(l)).unwrap_or(0);
        let block = tree.enclosing(anchor).unwrap_or(root);
        out.locations.push(PlaceholderLocation {
            line: anchor,
            indent,
            block,
        });
    } else if out.locations.is_empty() {
        out.locations.push(end_of(tree, root));
    }

    out.locations.sort_by(|a, b| {
        b.line.cmp(&a.line).then_with(|| {
            tree.block(b.block)
                .header_line
                .cmp(&tree.block(a.block).header_line)
        })
    });
    out.locations.dedup_by_key(|p| (p.line, p.block));

    // Rule 3: restrict to the faulty branch when named.
    if let Some(fb) = violation.faulty_branch {
        match resolve_branch_block(tree, fb.line, reading) {
            Some(branch) => {
                let kept: Vec<PlaceholderLocation> = out
                    .locations
                    .iter()
                    .copied()
                    .filter(|p| tree.span_contains(branch, p.line))
                    .collect();
                out.locations = if kept.is_empty() {
                    vec![end_of(tree, branch)]
                } else {
                    kept
                };
            }
            None => out.diagnostics.push(format!(
                "faulty branch at line {} resolves to no block; filter skipped",
                fb.line
            )),
        }
    }

    out
}

/// Inserts the placeholder marker at a location, yielding the proof context.
/// The marker goes on its own line with the location's indentation; removing
/// it restores the source byte for byte.
pub fn splice_placeholder(lemma_source: &str, loc: &PlaceholderLocation) -> Result<ProofContext> {
    let lines: Vec<String> = lemma_source.lines().map(str::to_owned).collect();
    if loc.line == 0 || loc.line > lines.len() + 1 {
        return Err(Error::LocationOutOfRange {
            line: loc.line,
            len: lines.len(),
        });
    }
    ProofContext::new(lines, loc.line - 1, loc.indent)
}
