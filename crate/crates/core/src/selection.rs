//! Example bank construction and in-context example selection.
//!
//! A demonstration example is a (proof context, assertion) pair mined from a
//! codebase: the enclosing lemma with one assertion removed and a placeholder
//! at its former position. Selection ranks the bank against a target context
//! by proof similarity (the default), TF-IDF cosine similarity, or a seeded
//! uniform sample, and returns the examples in prompt order.

use crate::context::{find_lemmas, ProofContext};
use crate::extraction::find_assertions;
use crate::similarity::proof_sim;
use crate::{Error, Result};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Where an example came from. Ordering is lexicographic on
/// (file, lemma, line, column), which is the deterministic tie-break used
/// everywhere ranking scores are equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExampleOrigin {
    pub file: String,
    pub lemma: String,
    /// 1-based line of the assertion in its file.
    pub line: usize,
    /// 1-based column of the assertion statement.
    pub column: usize,
}

impl ExampleOrigin {
    /// Identity for exclusion purposes: one source position holds at most one
    /// bank entry.
    pub fn same_position(&self, other: &ExampleOrigin) -> bool {
        self.file == other.file && self.line == other.line
    }
}

/// One in-context example: a context with the assertion that repairs it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemonstrationExample {
    pub context: ProofContext,
    pub assertion: String,
    pub origin: ExampleOrigin,
}

/// The codebase-wide collection selection draws from.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExampleBank {
    pub examples: Vec<DemonstrationExample>,
    pub codebase_id: String,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl ExampleBank {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// How examples are picked for a target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    ProofSimilarity,
    TfIdf,
    Random { seed: u64 },
}

/// Order of the returned examples, which is also prompt order. The default
/// puts the least similar example first so the most similar one sits right
/// next to the query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleOrder {
    #[default]
    AscendingSimilarity,
    DescendingSimilarity,
}

/// Scores every example against the target; output index-aligned with input.
pub fn score_examples_sequential(
    target: &ProofContext,
    examples: &[&DemonstrationExample],
) -> Vec<f64> {
    examples
        .iter()
        .map(|e| proof_sim(target, &e.context))
        .collect()
}

#[cfg(feature = "parallel")]
pub fn score_examples_parallel(
    target: &ProofContext,
    examples: &[&DemonstrationExample],
) -> Vec<f64> {
    examples
        .par_iter()
        .map(|e| proof_sim(target, &e.context))
        .collect()
}

fn score_examples(target: &ProofContext, examples: &[&DemonstrationExample]) -> Vec<f64> {
    #[cfg(feature = "parallel")]
    {
        score_examples_parallel(target, examples)
    }
    #[cfg(not(feature = "parallel"))]
    {
        score_examples_sequential(target, examples)
    }
}

fn sort_ranked(mut ranked: Vec<(&DemonstrationExample, f64)>) -> Vec<(&DemonstrationExample, f64)> {
    ranked.sort_by(|(ea, sa), (eb, sb)| {
        sb.partial_cmp(sa)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| ea.origin.cmp(&eb.origin))
    });
    ranked
}

/// All bank entries ranked by descending proof similarity to the target.
pub fn proof_sim_rank<'a>(
    target: &ProofContext,
    bank: &'a ExampleBank,
) -> Vec<(&'a DemonstrationExample, f64)> {
    rank_refs_proof_sim(target, bank.examples.iter().collect())
}

fn rank_refs_proof_sim<'a>(
    target: &ProofContext,
    refs: Vec<&'a DemonstrationExample>,
) -> Vec<(&'a DemonstrationExample, f64)> {
    let scores = score_examples(target, &refs);
    sort_ranked(refs.into_iter().zip(scores).collect())
}

/// All bank entries ranked by descending TF-IDF cosine similarity.
///
/// Documents are the multiset of token texts of a context's source lines
/// (identifiers kept distinct, the placeholder marker line left out so that
/// contexts sharing no source token score 0). Term frequency is the raw
/// count; idf is `ln(N / (1 + df)) + 1` over the bank plus the target.
pub fn tfidf_rank<'a>(
    target: &ProofContext,
    bank: &'a ExampleBank,
) -> Vec<(&'a DemonstrationExample, f64)> {
    rank_refs_tfidf(target, bank.examples.iter().collect())
}

fn term_counts(context: &ProofContext) -> BTreeMap<String, f64> {
    let mut counts = BTreeMap::new();
    for line in context.source_lines() {
        for token in crate::lexer::tokenize(line) {
            *counts.entry(token.text).or_insert(0.0) += 1.0;
        }
    }
    counts
}

fn cosine(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let dot: f64 = a
        .iter()
        .filter_map(|(term, wa)| b.get(term).map(|wb| wa * wb))
        .sum();
    let na: f64 = a.values().map(|w| w * w).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|w| w * w).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

fn rank_refs_tfidf<'a>(
    target: &ProofContext,
    refs: Vec<&'a DemonstrationExample>,
) -> Vec<(&'a DemonstrationExample, f64)> {
    let target_tf = term_counts(target);
    let example_tfs: Vec<BTreeMap<String, f64>> =
        refs.iter().map(|e| term_counts(&e.context)).collect();

    let n_docs = refs.len() as f64 + 1.0;
    let mut df: BTreeMap<&str, f64> = BTreeMap::new();
    for doc in example_tfs.iter().chain(std::iter::once(&target_tf)) {
        for term in doc.keys() {
            *df.entry(term.as_str()).or_insert(0.0) += 1.0;
        }
    }
    let idf = |term: &str| (n_docs / (1.0 + df.get(term).copied().unwrap_or(0.0))).ln() + 1.0;
    let weigh = |tf: &BTreeMap<String, f64>| -> BTreeMap<String, f64> {
        tf.iter().map(|(t, c)| (t.clone(), c * idf(t))).collect()
    };

    let target_vec = weigh(&target_tf);
    let scored = refs
        .into_iter()
        .zip(example_tfs.iter())
        .map(|(e, tf)| (e, cosine(&target_vec, &weigh(tf))))
        .collect();
    sort_ranked(scored)
}

/// Selects at most `m` in-context examples for `target`, in prompt order.
///
/// `exclude` drops the bank entry at that origin (the target's own assertion
/// during benchmarks). An empty bank after exclusion yields an empty list.
pub fn select_examples<'a>(
    target: &ProofContext,
    bank: &'a ExampleBank,
    m: usize,
    strategy: &SelectionStrategy,
    exclude: Option<&ExampleOrigin>,
    order: ExampleOrder,
) -> Vec<&'a DemonstrationExample> {
    let candidates: Vec<&DemonstrationExample> = bank
        .examples
        .iter()
        .filter(|e| exclude.is_none_or(|x| !e.origin.same_position(x)))
        .collect();
    if candidates.is_empty() || m == 0 {
        return Vec::new();
    }
    match strategy {
        SelectionStrategy::Random { seed } => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(*seed);
            let picked =
                rand::seq::index::sample(&mut rng, candidates.len(), m.min(candidates.len()));
            picked.iter().map(|i| candidates[i]).collect()
        }
        ranked_strategy => {
            let ranked = match ranked_strategy {
                SelectionStrategy::ProofSimilarity => rank_refs_proof_sim(target, candidates),
                SelectionStrategy::TfIdf => rank_refs_tfidf(target, candidates),
                SelectionStrategy::Random { .. } => unreachable!(),
            };
            let mut top: Vec<&DemonstrationExample> =
                ranked.into_iter().take(m).map(|(e, _)| e).collect();
            if order == ExampleOrder::AscendingSimilarity {
                top.reverse();
            }
            top
        }
    }
}

/// Scans a codebase for single-line assertions inside lemma/method bodies and
/// turns each into a demonstration example. Within one lemma, assertions whose
/// exact text occurs more than once are excluded entirely. Unreadable files
/// are skipped with a warning record.
pub fn build_bank(codebase_root: &Path) -> Result<ExampleBank> {
    let codebase_id = codebase_root
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| codebase_root.display().to_string());
    let mut bank = ExampleBank {
        codebase_id,
        ..Default::default()
    };

    for file in source_files(codebase_root) {
        let rel = file
            .strip_prefix(codebase_root)
            .unwrap_or(&file)
            .to_string_lossy()
            .into_owned();
        let source = match std::fs::read_to_string(&file) {
            Ok(s) => s,
            Err(e) => {
                bank.warnings
                    .push(format!("skipped unreadable file {rel}: {e}"));
                continue;
            }
        };
        for lemma in find_lemmas(&source) {
            let lemma_lines = lemma.extract_lines(&source);
            let lemma_text = lemma_lines.join("\n");
            for found in non_duplicate_assertions(&lemma_text) {
                let context = ProofContext::from_removed_assertion(&lemma_lines, found.line - 1)?;
                bank.examples.push(DemonstrationExample {
                    context,
                    assertion: found.text.clone(),
                    origin: ExampleOrigin {
                        file: rel.clone(),
                        lemma: lemma.name.clone(),
                        line: lemma.start_line + found.line - 1,
                        column: found.column,
                    },
                });
            }
        }
    }
    Ok(bank)
}

/// Assertions of a lemma with the within-lemma exact-duplicate filter applied.
pub(crate) fn non_duplicate_assertions(lemma_text: &str) -> Vec<crate::extraction::FoundAssertion> {
    let found = find_assertions(lemma_text);
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for f in &found {
        *counts.entry(f.text.as_str()).or_insert(0) += 1;
    }
    found
        .iter()
        .filter(|f| counts[f.text.as_str()] == 1)
        .cloned()
        .collect()
}

/// All `.dfy` files under a root, in sorted order.
pub(crate) fn source_files(root: &Path) -> Vec<std::path::PathBuf> {
    let mut files: Vec<_> = walkdir::WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| p.extension().is_some_and(|x| x == "dfy"))
        .collect();
    files.sort();
    files
}

/// JSON-lines record shared by example banks and extraction tasks.
#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct ExampleRecord {
    pub file: String,
    pub lemma: String,
    pub line: usize,
    pub column: usize,
    pub assertion: String,
    pub context_lines: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codebase_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub necessary: Option<bool>,
}

impl ExampleRecord {
    pub fn from_example(e: &DemonstrationExample, codebase_id: &str) -> Self {
        ExampleRecord {
            file: e.origin.file.clone(),
            lemma: e.origin.lemma.clone(),
            line: e.origin.line,
            column: e.origin.column,
            assertion: e.assertion.clone(),
            context_lines: e.context.rendered_lines(),
            codebase_id: Some(codebase_id.to_owned()),
            necessary: None,
        }
    }

    pub fn into_example(self) -> Result<(DemonstrationExample, Option<String>)> {
        let context = ProofContext::from_rendered(&self.context_lines.join("\n"))?;
        Ok((
            DemonstrationExample {
                context,
                assertion: self.assertion,
                origin: ExampleOrigin {
                    file: self.file,
                    lemma: self.lemma,
                    line: self.line,
                    column: self.column,
                },
            },
            self.codebase_id,
        ))
    }
}

/// Writes the bank as JSON lines, one record per example.
pub fn save_bank(bank: &ExampleBank, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for example in &bank.examples {
        let record = ExampleRecord::from_example(example, &bank.codebase_id);
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a bank back; records at an already-seen (file, line) are dropped
/// with a warning so the in-memory bank keeps its uniqueness invariant.
pub fn load_bank(path: &Path) -> Result<ExampleBank> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut bank = ExampleBank::default();
    let mut seen = std::collections::BTreeSet::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ExampleRecord = serde_json::from_str(&line)?;
        let (example, codebase_id) = record.into_example()?;
        if let Some(id) = codebase_id {
            if bank.codebase_id.is_empty() {
                bank.codebase_id = id;
            }
        }
        if !seen.insert((example.origin.file.clone(), example.origin.line)) {
            bank.warnings.push(format!(
                "dropped duplicate bank record at {}:{}",
                example.origin.file, example.origin.line
            ));
            continue;
        }
        bank.examples.push(example);
    }
    Ok(bank)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example(
        file: &str,
        line: usize,
        assertion: &str,
        context_text: &str,
    ) -> DemonstrationExample {
        DemonstrationExample {
            context: ProofContext::from_rendered(context_text).unwrap(),
            assertion: assertion.to_owned(),
            origin: ExampleOrigin {
                file: file.to_owned(),
                lemma: "L".to_owned(),
                line,
                column: 3,
            },
        }
    }

    fn marker_ctx(lines: &[&str]) -> String {
        let mut v: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
        v.insert(
            lines.len().min(2),
            format!("  {}", crate::context::PLACEHOLDER_MARKER),
        );
        v.join("\n")
    }

    fn tiny_bank() -> ExampleBank {
        ExampleBank {
            examples: vec![
                example(
                    "a.dfy",
                    4,
                    "assert p == q;",
                    &marker_ctx(&["lemma A(p: int, q: int)", "{", "  F(p, q);", "}"]),
                ),
                example(
                    "b.dfy",
                    9,
                    "assert x in s;",
                    &marker_ctx(&[
                        "lemma B(x: int, s: set<int>)",
                        "{",
                        "  if x > 0 {",
                        "  }",
                        "}",
                    ]),
                ),
                example(
                    "c.dfy",
                    2,
                    "assert true;",
                    &marker_ctx(&["lemma C()", "{", "}"]),
                ),
            ],
            codebase_id: "tiny".to_owned(),
            warnings: vec![],
        }
    }

    #[test]
    fn identical_target_ranks_first_with_score_one() {
        let bank = tiny_bank();
        let target = bank.examples[1].context.clone();
        let ranked = proof_sim_rank(&target, &bank);
        assert_eq!(ranked[0].0.origin.file, "b.dfy");
        assert_eq!(ranked[0].1, 1.0);
        let tf = tfidf_rank(&target, &bank);
        assert_eq!(tf[0].0.origin.file, "b.dfy");
        assert!((tf[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_bank_returns_everything_sorted() {
        let bank = tiny_bank();
        let target = bank.examples[0].context.clone();
        let picked = select_examples(
            &target,
            &bank,
            6,
            &SelectionStrategy::ProofSimilarity,
            None,
            ExampleOrder::AscendingSimilarity,
        );
        assert_eq!(picked.len(), 3);
        // Ascending similarity: the most similar (the target itself) is last.
        assert_eq!(picked[2].origin.file, "a.dfy");
    }

    #[test]
    fn exclusion_removes_the_origin() {
        let bank = tiny_bank();
        let target = bank.examples[0].context.clone();
        let exclude = bank.examples[0].origin.clone();
        let picked = select_examples(
            &target,
            &bank,
            6,
            &SelectionStrategy::ProofSimilarity,
            Some(&exclude),
            ExampleOrder::AscendingSimilarity,
        );
        assert_eq!(picked.len(), 2);
        assert!(picked.iter().all(|e| !e.origin.same_position(&exclude)));
    }

    #[test]
    fn random_is_reproducible_per_seed() {
        let bank = tiny_bank();
        let target = bank.examples[0].context.clone();
        let pick = |seed| {
            select_examples(
                &target,
                &bank,
                2,
                &SelectionStrategy::Random { seed },
                None,
                ExampleOrder::AscendingSimilarity,
            )
            .iter()
            .map(|e| e.origin.file.clone())
            .collect::<Vec<_>>()
        };
        assert_eq!(pick(7), pick(7));
        assert_eq!(pick(7).len(), 2);
    }

    #[test]
    fn tfidf_scores_match_an_independent_hand_calculation() {
        // Three tiny documents, weights worked out separately with raw tf,
        // idf = ln(N/(1+df)) + 1 over bank-plus-target (N = 3), and cosine:
        //   idf(df=2) = 1.0, idf(df=1) = 1.4054651081081644
        //   cos(target, d1) = 0.7731076272598562, cos(target, d2) = 0.0
        let bank = ExampleBank {
            examples: vec![
                example(
                    "d1.dfy",
                    1,
                    "assert x == x;",
                    &marker_ctx(&["assert x == x;"]),
                ),
                example("d2.dfy", 1, "assert foo bar;", &marker_ctx(&["foo bar"])),
            ],
            codebase_id: "toy".into(),
            warnings: vec![],
        };
        let target = ProofContext::from_rendered(&marker_ctx(&["assert x == y;"])).unwrap();
        let ranked = tfidf_rank(&target, &bank);
        assert_eq!(ranked[0].0.origin.file, "d1.dfy");
        assert!((ranked[0].1 - 0.7731076272598562).abs() < 1e-12);
        assert_eq!(ranked[1].0.origin.file, "d2.dfy");
        assert_eq!(ranked[1].1, 0.0);
    }

    #[test]
    fn unreadable_files_are_skipped_with_a_warning() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("bad.dfy"), [0xff, 0xfe, 0x00]).unwrap();
        std::fs::write(
            dir.path().join("good.dfy"),
            "lemma G(x: int) ensures x == x
{
  assert x >= x;
}
",
        )
        .unwrap();
        let bank = build_bank(dir.path()).unwrap();
        assert_eq!(bank.len(), 1);
        assert_eq!(bank.warnings.len(), 1);
        assert!(bank.warnings[0].contains("bad.dfy"));
    }

    #[test]
    fn orthogonal_contexts_score_zero_under_tfidf() {
        let bank = ExampleBank {
            examples: vec![example(
                "z.dfy",
                1,
                "assert zz9 qq8;",
                &marker_ctx(&["zz9 qq8"]),
            )],
            codebase_id: "t".into(),
            warnings: vec![],
        };
        let target =
            ProofContext::from_rendered(&marker_ctx(&["totally different words"])).unwrap();
        let ranked = tfidf_rank(&target, &bank);
        assert_eq!(ranked[0].1, 0.0);
    }

    #[test]
    fn duplicated_assertions_never_enter_the_bank() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("dup.dfy"),
            "lemma D(x: int) ensures x == x\n{\n  assert x >= x;\n  G(x);\n  assert x >= x;\n}\n",
        )
        .unwrap();
        std::fs::write(
            dir.path().join("ok.dfy"),
            "lemma K(x: int) ensures x == x\n{\n  assert x >= x;\n}\n",
        )
        .unwrap();
        let bank = build_bank(dir.path()).unwrap();
        // Neither duplicate occurrence survives; the other lemma's single
        // assertion does.
        assert_eq!(bank.len(), 1);
        assert_eq!(bank.examples[0].origin.lemma, "K");
    }

    #[test]
    fn bank_round_trips_through_jsonl() {
        let bank = tiny_bank();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bank.jsonl");
        save_bank(&bank, &path).unwrap();
        let loaded = load_bank(&path).unwrap();
        assert_eq!(loaded.codebase_id, bank.codebase_id);
        assert_eq!(loaded.examples, bank.examples);
    }
}
