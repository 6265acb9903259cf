//! Prompt assembly and candidate generation.
//!
//! Prompts have three parts: a background paragraph describing meta-paths,
//! a few-shot block of scored examples drawn from the replay buffer, and a
//! requirement paragraph constraining the target relation, the rendered
//! word count and the candidate vocabularies. Each part can be toggled off
//! for ablations.

mod provider;
pub mod stub;

pub use provider::{build_provider, GenerationProvider, HttpProvider, MutationProvider, ProviderConfig};

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{EvoPathError, Result};

/// Background paragraph of the prompt.
pub const BACKGROUND: &str = "Within Heterogeneous Information Networks (HINs), a meta-path \
represents a defined sequence of relations among multiple entity types in the network. Each \
meta-path should start and end with an entity type, involving a series of interactions between \
types and relations.";

const FEW_SHOT_HEADER: &str = "Here are some example meta-paths and their scores for {relation}:";

const REQUIREMENT: &str = "Please generate as many meta-paths as possible to explain relation \
{relation}. You need to generate meta-paths with {word_count} words in total. Relations and \
types in the meta-paths must be selected from {relations} and {types} separately. Do not \
return any explanation.";

/// One few-shot line: a rendered meta-path plus its scores.
#[derive(Debug, Clone, PartialEq)]
pub struct FewShotExample {
    pub rendering: String,
    pub coverage: f64,
    pub confidence: f64,
    /// Optional natural-language gloss, shown when descriptions are enabled.
    pub description: Option<String>,
}

/// Everything needed to instantiate the prompt template.
#[derive(Debug, Clone)]
pub struct PromptSpec {
    pub background: String,
    pub few_shot: Vec<FewShotExample>,
    pub target_relation: String,
    pub max_length: usize,
    pub candidate_relations: Vec<String>,
    pub candidate_types: Vec<String>,
    pub include_scores: bool,
    pub include_few_shot: bool,
    pub include_background: bool,
    pub include_descriptions: bool,
}

impl PromptSpec {
    pub fn new(target_relation: &str, max_length: usize) -> PromptSpec {
        PromptSpec {
            background: BACKGROUND.to_owned(),
            few_shot: Vec::new(),
            target_relation: target_relation.to_owned(),
            max_length,
            candidate_relations: Vec::new(),
            candidate_types: Vec::new(),
            include_scores: true,
            include_few_shot: true,
            include_background: true,
            include_descriptions: false,
        }
    }
}

/// Instantiate the prompt. Pure: identical specs yield identical bytes.
pub fn build_prompt(spec: &PromptSpec) -> Result<String> {
    if spec.include_few_shot && spec.few_shot.is_empty() {
        return Err(EvoPathError::Config(
            "few-shot examples required when the few-shot block is enabled".into(),
        ));
    }
    let mut parts: Vec<String> = Vec::new();
    if spec.include_background {
        parts.push(spec.background.clone());
    }
    if spec.include_few_shot {
        let mut block = FEW_SHOT_HEADER.replace("{relation}", &spec.target_relation);
        for ex in &spec.few_shot {
            block.push('\n');
            block.push_str(&ex.rendering);
            if spec.include_scores {
                block.push_str(&format!(
                    " (coverage={:.4}, confidence={:.4})",
                    ex.coverage, ex.confidence
                ));
            }
            if spec.include_descriptions {
                if let Some(desc) = &ex.description {
                    block.push_str(" - ");
                    block.push_str(desc);
                }
            }
        }
        parts.push(block);
    }
    let requirement = REQUIREMENT
        .replace("{relation}", &spec.target_relation)
        .replace(
            "{word_count}",
            &format!("{}", spec.max_length * 2 + 1),
        )
        .replace("{relations}", &bracket_list(&spec.candidate_relations))
        .replace("{types}", &bracket_list(&spec.candidate_types));
    parts.push(requirement);

    let prompt = parts.join("\n\n");
    for placeholder in ["{relation}", "{word_count}", "{relations}", "{types}"] {
        if prompt.contains(placeholder) {
            return Err(EvoPathError::TemplatePlaceholder(placeholder.to_owned()));
        }
    }
    Ok(prompt)
}

fn bracket_list(items: &[String]) -> String {
    format!("[{}]", items.join(", "))
}

/// Raw provider output, preserved verbatim for audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawGeneration {
    pub text: String,
    pub latency: Duration,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

impl RawGeneration {
    pub fn from_text(text: String) -> RawGeneration {
        RawGeneration {
            text,
            latency: Duration::ZERO,
            prompt_tokens: None,
            completion_tokens: None,
        }
    }
}

/// Parsed provider output: candidate token sequences plus the number of
/// lines that did not look like meta-paths.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedGeneration {
    pub sequences: Vec<Vec<String>>,
    pub dropped_lines: usize,
}

/// Split provider text into candidate token sequences.
///
/// Lines are tokenized on the rendering punctuation (`-[`, `]->`, stray
/// arrows and brackets) and whitespace; list markers and trailing
/// parenthesized scores are stripped. Only lines with an odd token count of
/// at least three, all tokens label-like, are kept; everything else counts
/// as dropped. Labels are not validated here — that is the cleaner's job.
pub fn parse_generation(raw: &RawGeneration) -> ParsedGeneration {
    let mut parsed = ParsedGeneration::default();
    for line in raw.text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match parse_candidate_line(line) {
            Some(tokens) => parsed.sequences.push(tokens),
            None => parsed.dropped_lines += 1,
        }
    }
    parsed
}

/// Tokenize one line; `None` when it does not look like a meta-path.
pub fn parse_candidate_line(line: &str) -> Option<Vec<String>> {
    let line = strip_list_marker(line.trim());
    let line = strip_trailing_parenthetical(line);
    let cleaned = line
        .replace("-[", " ")
        .replace("]->", " ")
        .replace("->", " ")
        .replace(['[', ']', '→'], " ");
    let tokens: Vec<String> = cleaned
        .split_whitespace()
        .filter(|t| !t.chars().all(|c| matches!(c, '-' | '>' | '*' | '•' | '=')))
        .map(str::to_owned)
        .collect();
    if tokens.len() < 3 || tokens.len() % 2 == 0 {
        return None;
    }
    if !tokens.iter().all(|t| plausible_label(t)) {
        return None;
    }
    Some(tokens)
}

fn strip_list_marker(line: &str) -> &str {
    let trimmed = line.trim_start();
    // "1. ", "2) ", "- ", "* "
    if let Some(rest) = trimmed.strip_prefix(['-', '*', '•']) {
        if rest.starts_with(' ') {
            return rest.trim_start();
        }
    }
    let digits = trimmed.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let rest = &trimmed[digits..];
        if let Some(rest) = rest.strip_prefix(['.', ')', ':']) {
            return rest.trim_start();
        }
    }
    trimmed
}

fn strip_trailing_parenthetical(line: &str) -> &str {
    let trimmed = line.trim_end();
    if trimmed.ends_with(')') {
        if let Some(open) = trimmed.rfind('(') {
            return trimmed[..open].trim_end();
        }
    }
    trimmed
}

fn plausible_label(token: &str) -> bool {
    !token.ends_with(':')
        && token
            .chars()
            .all(|c| c.is_alphanumeric() || matches!(c, '_' | '^' | '-' | ':' | '.' | '\''))
        && token.chars().any(|c| c.is_alphanumeric())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> PromptSpec {
        let mut s = PromptSpec::new("isCitizenOf", 3);
        s.few_shot = vec![FewShotExample {
            rendering: "Person -[livesIn]-> Country".into(),
            coverage: 0.138,
            confidence: 0.366,
            description: Some("A Person that livesIn a Country.".into()),
        }];
        s.candidate_relations = vec!["livesIn".into(), "bornIn".into()];
        s.candidate_types = vec!["Person".into(), "Country".into()];
        s
    }

    #[test]
    fn prompt_contains_the_three_parts() {
        let prompt = build_prompt(&spec()).unwrap();
        assert!(prompt.starts_with(BACKGROUND));
        assert!(prompt.contains("Here are some example meta-paths and their scores for isCitizenOf:"));
        assert!(prompt.contains("Person -[livesIn]-> Country (coverage=0.1380, confidence=0.3660)"));
        assert!(prompt.contains("7 words in total"));
        assert!(prompt.contains("[livesIn, bornIn]"));
        assert!(prompt.contains("Do not return any explanation."));
    }

    #[test]
    fn background_toggle_removes_only_that_paragraph() {
        let mut s = spec();
        s.include_background = false;
        let prompt = build_prompt(&s).unwrap();
        assert!(!prompt.contains("Within Heterogeneous"));
        assert!(prompt.contains("Here are some example meta-paths"));
    }

    #[test]
    fn scores_toggle_removes_the_parenthetical() {
        let mut s = spec();
        s.include_scores = false;
        let prompt = build_prompt(&s).unwrap();
        assert!(prompt.contains("Person -[livesIn]-> Country\n"));
        assert!(!prompt.contains("coverage="));
    }

    #[test]
    fn descriptions_append_after_the_rendering() {
        let mut s = spec();
        s.include_descriptions = true;
        let prompt = build_prompt(&s).unwrap();
        assert!(prompt.contains("- A Person that livesIn a Country."));
    }

    #[test]
    fn empty_few_shot_requires_the_toggle_off() {
        let mut s = spec();
        s.few_shot.clear();
        assert!(build_prompt(&s).is_err());
        s.include_few_shot = false;
        assert!(build_prompt(&s).is_ok());
    }

    #[test]
    fn word_count_substitution_uses_twice_length_plus_one() {
        let mut s = spec();
        s.max_length = 4;
        let prompt = build_prompt(&s).unwrap();
        assert!(prompt.contains("9 words in total"));
    }

    #[test]
    fn parse_simple_line() {
        let raw = RawGeneration::from_text("Person -[livesIn]-> Country".into());
        let parsed = parse_generation(&raw);
        assert_eq!(parsed.sequences, vec![vec!["Person", "livesIn", "Country"]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>()]);
        assert_eq!(parsed.dropped_lines, 0);
    }

    #[test]
    fn parse_strips_numbering_and_scores() {
        let raw = RawGeneration::from_text(
            "1. Person -[bornIn]-> City -[locatedIn]-> Country (coverage=0.1, confidence=0.2)"
                .into(),
        );
        let parsed = parse_generation(&raw);
        assert_eq!(parsed.sequences.len(), 1);
        assert_eq!(parsed.sequences[0].len(), 5);
        assert_eq!(parsed.sequences[0][0], "Person");
        assert_eq!(parsed.sequences[0][4], "Country");
    }

    #[test]
    fn parse_drops_prose_lines() {
        let raw = RawGeneration::from_text(
            "Sure! Here are some meta-paths:\nPerson -[livesIn]-> Country\n\nThanks".into(),
        );
        let parsed = parse_generation(&raw);
        assert_eq!(parsed.sequences.len(), 1);
        assert_eq!(parsed.dropped_lines, 2);
    }

    #[test]
    fn parse_keeps_inverse_suffixes_intact() {
        let raw = RawGeneration::from_text("Country -[hasCapital^-1]-> Person".into());
        let parsed = parse_generation(&raw);
        assert_eq!(
            parsed.sequences[0],
            vec!["Country", "hasCapital^-1", "Person"]
        );
    }

    #[test]
    fn parse_handles_loose_arrow_spellings() {
        let raw = RawGeneration::from_text("Person - [livesIn] -> Country".into());
        let parsed = parse_generation(&raw);
        assert_eq!(parsed.sequences[0], vec!["Person", "livesIn", "Country"]);
    }
}
