//! Chat prompt assembly and completion parsing.
//!
//! Prompts are built from versioned template files under `templates/` so the
//! exact wording is pinned by golden tests rather than scattered through
//! code. A prompt is: one system message, a User/Assistant pair per
//! in-context example, and a final User turn carrying the target lemma
//! (wrapped in `<method>` delimiters when it contains a placeholder), with
//! the verifier error optionally attached under an `Error:` heading.

use crate::context::{ProofContext, PLACEHOLDER_MARKER};
use crate::selection::DemonstrationExample;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const SYSTEM_STANDARD: &str = include_str!("../templates/system_standard.txt");
const SYSTEM_ENHANCED: &str = include_str!("../templates/system_enhanced.txt");
const SYSTEM_COT: &str = include_str!("../templates/system_cot.txt");
const USER_TURN: &str = include_str!("../templates/user_turn.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemStyle {
    #[default]
    Standard,
    Enhanced,
    ChainOfThought,
}

impl SystemStyle {
    pub fn template(self) -> &'static str {
        let raw = match self {
            SystemStyle::Standard => SYSTEM_STANDARD,
            SystemStyle::Enhanced => SYSTEM_ENHANCED,
            SystemStyle::ChainOfThought => SYSTEM_COT,
        };
        raw.trim_end_matches('\n')
    }
}

fn user_turn_header() -> &'static str {
    USER_TURN.trim_end_matches('\n')
}

/// Whether the error text goes before or after the lemma in the final turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorPosition {
    Before,
    #[default]
    After,
}

/// In-context examples for one prompt.
#[derive(Debug, Clone, Default)]
pub enum PromptExamples<'a> {
    #[default]
    None,
    Provided(Vec<&'a DemonstrationExample>),
}

impl PromptExamples<'_> {
    fn as_slice(&self) -> &[&DemonstrationExample] {
        match self {
            PromptExamples::None => &[],
            PromptExamples::Provided(v) => v,
        }
    }
}

/// One prompting configuration: placeholder on/off, error on/off, examples,
/// and the system prompt flavor.
#[derive(Debug, Clone, Default)]
pub struct PromptVariant<'a> {
    pub placeholder: bool,
    pub include_error: bool,
    pub examples: PromptExamples<'a>,
    pub system_style: SystemStyle,
    pub error_position: ErrorPosition,
}

/// The lemma the prompt asks about: either a context carrying a placeholder
/// or raw lemma source.
#[derive(Debug, Clone, Copy)]
pub enum PromptTarget<'a> {
    Context(&'a ProofContext),
    Raw(&'a str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    fn heading(self) -> &'static str {
        match self {
            Role::System => "SYSTEM",
            Role::User => "USER",
            Role::Assistant => "ASSISTANT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatPrompt {
    pub messages: Vec<Message>,
}

impl ChatPrompt {
    /// Flat transcript form: `# ROLE` headings separated by blank lines.
    /// This rendering is what golden tests pin, what the CLI prints, and
    /// what prompt fingerprints (and therefore mock LLM keys) hash.
    pub fn transcript(&self) -> String {
        self.messages
            .iter()
            .map(|m| format!("# {}\n{}", m.role.heading(), m.content))
            .collect::<Vec<_>>()
            .join("\n\n\n")
    }

    /// Hex SHA-256 of the transcript.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.transcript().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn target_text(target: &PromptTarget, placeholder: bool) -> Result<String> {
    match (target, placeholder) {
        (PromptTarget::Context(ctx), true) => Ok(ctx.render()),
        (PromptTarget::Context(ctx), false) => Ok(ctx.source()),
        (PromptTarget::Raw(text), true) => {
            let markers = text.matches(PLACEHOLDER_MARKER).count();
            if markers != 1 {
                return Err(Error::PlaceholderCount(markers));
            }
            Ok((*text).to_owned())
        }
        (PromptTarget::Raw(text), false) => Ok((*text).to_owned()),
    }
}

/// Builds the full chat prompt for a variant. With `m` examples the result
/// has exactly `2m + 2` messages.
pub fn build_prompt(
    target: &PromptTarget,
    variant: &PromptVariant,
    error_text: Option<&str>,
) -> Result<ChatPrompt> {
    if variant.include_error && error_text.is_none() {
        return Err(Error::MissingErrorText);
    }

    let mut messages = vec![Message {
        role: Role::System,
        content: variant.system_style.template().to_owned(),
    }];

    for example in variant.examples.as_slice() {
        messages.push(Message {
            role: Role::User,
            content: format!("{}\n{}", user_turn_header(), example.context.render()),
        });
        messages.push(Message {
            role: Role::Assistant,
            content: example.assertion.clone(),
        });
    }

    let lemma = target_text(target, variant.placeholder)?;
    let body = if variant.placeholder {
        format!("<method>\n{lemma}\n</method>")
    } else {
        lemma
    };
    let content = match (variant.include_error, variant.error_position) {
        (false, _) => format!("{}\n{}", user_turn_header(), body),
        (true, ErrorPosition::After) => format!(
            "{}\n{}\n\nError:\n{}",
            user_turn_header(),
            body,
            error_text.unwrap_or_default()
        ),
        (true, ErrorPosition::Before) => format!(
            "{}\nError:\n{}\n\n{}",
            user_turn_header(),
            error_text.unwrap_or_default(),
            body
        ),
    };
    messages.push(Message {
        role: Role::User,
        content,
    });

    Ok(ChatPrompt { messages })
}

/// Extracts the one assertion from an LLM completion: the first line that
/// starts with the `assert` keyword, code fences and surrounding prose
/// stripped, with a terminating semicolon guaranteed. `None` means no
/// assertion was found, which costs the attempt but is not a crash.
pub fn parse_completion(llm_output: &str) -> Option<String> {
    for line in llm_output.lines() {
        let trimmed = line.trim();
        if trimmed.starts_with("```") {
            continue;
        }
        let trimmed = trimmed.trim_start_matches('`').trim();
        if !starts_with_assert(trimmed) {
            continue;
        }
        let mut assertion = trimmed.trim_end_matches('`').trim_end().to_owned();
        if !assertion.ends_with(';') {
            assertion.push(';');
        }
        return Some(assertion);
    }
    None
}

fn starts_with_assert(line: &str) -> bool {
    match line.strip_prefix("assert") {
        Some(rest) => rest
            .chars()
            .next()
            .map(|c| !c.is_ascii_alphanumeric() && c != '_' && c != '\'')
            .unwrap_or(false),
        None => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::ExampleOrigin;

    fn ctx() -> ProofContext {
        ProofContext::from_rendered(&format!(
            "lemma F(x: int)\n  ensures x >= x\n{{\n  {PLACEHOLDER_MARKER}\n}}"
        ))
        .unwrap()
    }

    fn example() -> DemonstrationExample {
        DemonstrationExample {
            context: ctx(),
            assertion: "assert x + 0 == x;".to_owned(),
            origin: ExampleOrigin {
                file: "f.dfy".into(),
                lemma: "F".into(),
                line: 4,
                column: 3,
            },
        }
    }

    #[test]
    fn placeholder_prompt_without_examples_has_two_messages() {
        let target = ctx();
        let prompt = build_prompt(
            &PromptTarget::Context(&target),
            &PromptVariant {
                placeholder: true,
                ..Default::default()
            },
            None,
        )
        .unwrap();
        assert_eq!(prompt.messages.len(), 2);
        assert_eq!(prompt.messages[0].role, Role::System);
        assert_eq!(prompt.messages[1].role, Role::User);
        assert!(prompt.messages[1].content.contains("<method>"));
        assert!(prompt.messages[1].content.contains(PLACEHOLDER_MARKER));
    }

    #[test]
    fn message_count_is_two_m_plus_two() {
        let target = ctx();
        let ex = example();
        for m in [0usize, 1, 6] {
            let examples: Vec<&DemonstrationExample> = vec![&ex; m];
            let prompt = build_prompt(
                &PromptTarget::Context(&target),
                &PromptVariant {
                    placeholder: true,
                    examples: PromptExamples::Provided(examples),
                    ..Default::default()
                },
                None,
            )
            .unwrap();
            assert_eq!(prompt.messages.len(), 2 * m + 2);
        }
    }

    #[test]
    fn baseline_with_error_is_raw_lemma_plus_error() {
        let prompt = build_prompt(
            &PromptTarget::Raw("lemma G()\n{\n}"),
            &PromptVariant {
                placeholder: false,
                include_error: true,
                ..Default::default()
            },
            Some("Error: a postcondition could not be proved on this return path"),
        )
        .unwrap();
        assert_eq!(prompt.messages.len(), 2);
        let user = &prompt.messages[1].content;
        assert!(!user.contains("<method>"));
        assert!(user.contains("lemma G()"));
        assert!(user.contains("\n\nError:\n"));
        assert!(user.find("lemma G()").unwrap() < user.find("Error:").unwrap());
    }

    #[test]
    fn error_position_flag_flips_the_order() {
        let prompt = build_prompt(
            &PromptTarget::Raw("lemma G()\n{\n}"),
            &PromptVariant {
                placeholder: false,
                include_error: true,
                error_position: ErrorPosition::Before,
                ..Default::default()
            },
            Some("boom"),
        )
        .unwrap();
        let user = &prompt.messages[1].content;
        assert!(user.find("Error:").unwrap() < user.find("lemma G()").unwrap());
    }

    #[test]
    fn missing_error_text_is_a_structured_error() {
        let target = ctx();
        let err = build_prompt(
            &PromptTarget::Context(&target),
            &PromptVariant {
                placeholder: true,
                include_error: true,
                ..Default::default()
            },
            None,
        );
        assert!(matches!(err, Err(Error::MissingErrorText)));
    }

    #[test]
    fn raw_target_with_wrong_marker_count_is_rejected() {
        let err = build_prompt(
            &PromptTarget::Raw("lemma G()\n{\n}"),
            &PromptVariant {
                placeholder: true,
                ..Default::default()
            },
            None,
        );
        assert!(matches!(err, Err(Error::PlaceholderCount(0))));
    }

    #[test]
    fn identical_inputs_build_identical_prompts() {
        let target = ctx();
        let variant = PromptVariant {
            placeholder: true,
            ..Default::default()
        };
        let a = build_prompt(&PromptTarget::Context(&target), &variant, None).unwrap();
        let b = build_prompt(&PromptTarget::Context(&target), &variant, None).unwrap();
        assert_eq!(a.transcript(), b.transcript());
        assert_eq!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn completion_passthrough_and_fence_stripping() {
        assert_eq!(
            parse_completion("assert xs[1..] + ys == (xs + ys)[1..];").as_deref(),
            Some("assert xs[1..] + ys == (xs + ys)[1..];")
        );
        assert_eq!(
            parse_completion("```\nassert a == b;\n```").as_deref(),
            Some("assert a == b;")
        );
        assert_eq!(
            parse_completion("Sure! Here is the fix:\n```dafny\nassert x > 0\n```\nHope it helps.")
                .as_deref(),
            Some("assert x > 0;")
        );
    }

    #[test]
    fn prompt_lemma_text_relexes_to_the_context_tokens() {
        let target = ctx();
        let prompt = build_prompt(
            &PromptTarget::Context(&target),
            &PromptVariant {
                placeholder: true,
                ..Default::default()
            },
            None,
        )
        .unwrap();
        let user = &prompt.messages[1].content;
        let start = user.find("<method>\n").unwrap() + "<method>\n".len();
        let end = user.find("\n</method>").unwrap();
        let embedded = &user[start..end];
        let embedded_tokens: Vec<Vec<crate::lexer::Token>> =
            crate::lexer::tokenize_context(embedded)
                .into_iter()
                .map(|l| l.tokens)
                .collect();
        assert_eq!(embedded_tokens, target.token_lines());
    }

    #[test]
    fn prose_without_assert_yields_none() {
        assert_eq!(
            parse_completion("I think the postcondition is wrong."),
            None
        );
        // `assertion` as a word is not the assert keyword.
        assert_eq!(parse_completion("assertion needed here"), None);
    }
}
