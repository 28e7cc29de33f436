//! Hierarchical sequence similarity.
//!
//! The core is a Wagner–Fischer style dynamic program over two sequences and
//! an element-similarity function `sigma`: it finds the monotone matching
//! (index pairs strictly increasing on both sides) maximizing the summed
//! element similarity, then normalizes by the longer length. Scores live in
//! `[0, 1]`; `1` means identical, `0` no commonality.
//!
//! Because the score itself is a valid `sigma`, the metric stacks: token
//! similarity scores lines ([`line_sim`]), and line similarity scores whole
//! proof contexts ([`proof_sim`]). Token similarity treats all identifiers as
//! equal to each other and every other token as equal only to itself, which
//! makes the whole stack invariant under identifier renaming.

use crate::context::ProofContext;
use crate::lexer::{Token, TokenKind};

/// Maximal monotone-matching score between `s1` and `s2` under `sigma`,
/// normalized by `max(|s1|, |s2|)`.
///
/// Conventions: two empty sequences score 1.0 (identical inputs), one empty
/// sequence scores 0.0. `sigma` is evaluated at most `|s1| * |s2|` times.
pub fn seq_sim<T, F>(s1: &[T], s2: &[T], mut sigma: F) -> f64
where
    F: FnMut(&T, &T) -> f64,
{
    let (n, m) = (s1.len(), s2.len());
    if n == 0 && m == 0 {
        return 1.0;
    }
    if n == 0 || m == 0 {
        return 0.0;
    }
    let mut prev = vec![0.0f64; m + 1];
    let mut curr = vec![0.0f64; m + 1];
    for a in s1 {
        curr[0] = 0.0;
        for (j, b) in s2.iter().enumerate() {
            let diag = prev[j] + sigma(a, b);
            curr[j + 1] = prev[j + 1].max(curr[j]).max(diag);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[m] / n.max(m) as f64
}

/// The degenerate element similarity: 1 on equality, 0 otherwise.
pub fn exact_equality<T: PartialEq>(a: &T, b: &T) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Identifiers all count as equal; any other token is equal only to itself
/// (kind and text both).
pub fn token_sim(a: &Token, b: &Token) -> f64 {
    let both_identifiers = a.kind == TokenKind::Identifier && b.kind == TokenKind::Identifier;
    if both_identifiers || (a.kind == b.kind && a.text == b.text) {
        1.0
    } else {
        0.0
    }
}

/// Similarity of two lines, as token sequences under [`token_sim`].
pub fn line_sim(l1: &[Token], l2: &[Token]) -> f64 {
    seq_sim(l1, l2, token_sim)
}

/// Similarity of two proof contexts, as line sequences under [`line_sim`].
///
/// Contexts compare in rendered form, placeholder line included; blank and
/// comment-only lines participate as empty token sequences.
pub fn proof_sim(c1: &ProofContext, c2: &ProofContext) -> f64 {
    seq_sim(c1.token_lines(), c2.token_lines(), |a, b| {
        line_sim(a.as_slice(), b.as_slice())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::ProofContext;
    use crate::lexer::tokenize;

    fn ctx(text: &str) -> ProofContext {
        ProofContext::from_rendered(text).unwrap()
    }

    /// Independent oracle for small alphabets under exact equality: the best
    /// monotone matching is the longest common subsequence, found here by
    /// enumerating every subsequence of `s1` and greedily checking it against
    /// `s2`. Deliberately not the DP code path.
    fn brute_lcs_sim(s1: &[u8], s2: &[u8]) -> f64 {
        if s1.is_empty() && s2.is_empty() {
            return 1.0;
        }
        if s1.is_empty() || s2.is_empty() {
            return 0.0;
        }
        let mut best = 0usize;
        for mask in 0u32..(1 << s1.len()) {
            let picked: Vec<u8> = (0..s1.len())
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| s1[i])
                .collect();
            let mut it = s2.iter();
            if picked.iter().all(|c| it.any(|d| d == c)) {
                best = best.max(picked.len());
            }
        }
        best as f64 / s1.len().max(s2.len()) as f64
    }

    #[test]
    fn identity_scores_one() {
        let s = *b"abc";
        assert_eq!(seq_sim(&s, &s, exact_equality), 1.0);
    }

    #[test]
    fn one_substitution_in_three() {
        let expected = brute_lcs_sim(b"abc", b"abd");
        assert_eq!(expected, 2.0 / 3.0);
        assert!((seq_sim(b"abc", b"abd", exact_equality) - expected).abs() < 1e-12);
    }

    #[test]
    fn empty_conventions() {
        let empty: [u8; 0] = [];
        assert_eq!(seq_sim(&empty, b"ab", exact_equality), 0.0);
        assert_eq!(seq_sim(b"ab", &empty, exact_equality), 0.0);
        assert_eq!(seq_sim(&empty, &empty, exact_equality), 1.0);
    }

    #[test]
    fn sigma_evaluation_is_bounded_by_the_product_of_lengths() {
        let mut calls = 0usize;
        let _ = seq_sim(b"abcd", b"xyz", |a, b| {
            calls += 1;
            exact_equality(a, b)
        });
        assert!(calls <= 12);
    }

    #[test]
    fn identifiers_are_all_equal_other_tokens_only_to_themselves() {
        let t = |s: &str| tokenize(s).remove(0);
        assert_eq!(token_sim(&t("xs"), &t("foo")), 1.0);
        assert_eq!(token_sim(&t("+"), &t("+")), 1.0);
        assert_eq!(token_sim(&t("+"), &t("==")), 0.0);
        assert_eq!(token_sim(&t("assert"), &t("assert")), 1.0);
        // Same text, different kind: a keyword is not an identifier.
        assert_eq!(token_sim(&t("assert"), &t("assert_x")), 0.0);
        // Distinct literals are distinct alphabet symbols.
        assert_eq!(token_sim(&t("1"), &t("2")), 0.0);
    }

    #[test]
    fn lines_differing_only_in_identifiers_match_fully() {
        let l1 = tokenize("assert x == y;");
        let l2 = tokenize("assert a == b;");
        assert_eq!(line_sim(&l1, &l2), 1.0);
        assert_eq!(line_sim(&l1, &l1), 1.0);
    }

    #[test]
    fn proof_sim_is_reflexive_and_symmetric() {
        let a = ctx(
            "lemma F(x: int)\n{\n  <assertion> Insert the assertion here </assertion>\n  G(x);\n}",
        );
        let b = ctx("lemma H(y: int)\n  ensures y >= 0\n{\n  <assertion> Insert the assertion here </assertion>\n}");
        assert_eq!(proof_sim(&a, &a), 1.0);
        assert!((proof_sim(&a, &b) - proof_sim(&b, &a)).abs() < 1e-12);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn seqs() -> impl Strategy<Value = Vec<u8>> {
            proptest::collection::vec(0u8..3, 0..7)
        }

        proptest! {
            #[test]
            fn matches_the_brute_force_oracle(s1 in seqs(), s2 in seqs()) {
                let got = seq_sim(&s1, &s2, exact_equality);
                let want = brute_lcs_sim(&s1, &s2);
                prop_assert!((got - want).abs() < 1e-12);
            }

            #[test]
            fn range_and_symmetry(s1 in seqs(), s2 in seqs()) {
                let a = seq_sim(&s1, &s2, exact_equality);
                let b = seq_sim(&s2, &s1, exact_equality);
                prop_assert!((0.0..=1.0).contains(&a));
                prop_assert!((a - b).abs() < 1e-12);
            }

            #[test]
            fn reflexive_when_sigma_is(s in seqs()) {
                prop_assert_eq!(seq_sim(&s, &s, exact_equality), 1.0);
            }
        }
    }
}
