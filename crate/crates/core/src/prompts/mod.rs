//! Prompt templates and output parsers.
//!
//! Templates are plain UTF-8 files, one per name, with `${NAME}` placeholders.
//! A copy of every shipped template is compiled in; [`PromptRegistry::from_dir`]
//! overlays files from a directory so wording can change without a rebuild.

mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use thiserror::Error;

pub use parse::{
    extract_confidence, parse_follow_up, parse_premises, parse_rating, parse_revision,
    parse_stance, parse_yes_no, AuxRatings, ParsedRating, ParsedStance, Premise, RatingLevel,
    Revision,
};

/// Template names.
pub mod names {
    pub const STANCE_GENERATION: &str = "stance_generation";
    pub const ARGUMENT_GENERATION: &str = "argument_generation";
    pub const ARGUMENT_RATING: &str = "argument_rating";
    pub const CONFIDENCE_RATIONALE: &str = "confidence_rationale";
    pub const FINAL_CONFIDENCE: &str = "final_confidence";
    pub const JUDGE_EQUIVALENCE: &str = "judge_equivalence";
    pub const PREMISE_EXTRACTION: &str = "premise_extraction";
    pub const PREMISE_VERIFICATION: &str = "premise_verification";
    pub const COT: &str = "cot";
    pub const POT: &str = "pot";
    pub const SELF_ASK: &str = "self_ask";
    pub const SELF_ASK_ANSWER: &str = "self_ask_answer";
    pub const GENREAD: &str = "genread";
    pub const GENREAD_READ: &str = "genread_read";
}

const BUILTIN: &[(&str, &str)] = &[
    (names::STANCE_GENERATION, include_str!("../../prompts/stance_generation.txt")),
    (names::ARGUMENT_GENERATION, include_str!("../../prompts/argument_generation.txt")),
    (names::ARGUMENT_RATING, include_str!("../../prompts/argument_rating.txt")),
    (names::CONFIDENCE_RATIONALE, include_str!("../../prompts/confidence_rationale.txt")),
    (names::FINAL_CONFIDENCE, include_str!("../../prompts/final_confidence.txt")),
    (names::JUDGE_EQUIVALENCE, include_str!("../../prompts/judge_equivalence.txt")),
    (names::PREMISE_EXTRACTION, include_str!("../../prompts/premise_extraction.txt")),
    (names::PREMISE_VERIFICATION, include_str!("../../prompts/premise_verification.txt")),
    (names::COT, include_str!("../../prompts/cot.txt")),
    (names::POT, include_str!("../../prompts/pot.txt")),
    (names::SELF_ASK, include_str!("../../prompts/self_ask.txt")),
    (names::SELF_ASK_ANSWER, include_str!("../../prompts/self_ask_answer.txt")),
    (names::GENREAD, include_str!("../../prompts/genread.txt")),
    (names::GENREAD_READ, include_str!("../../prompts/genread_read.txt")),
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PromptError {
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("template `{template}` needs variable `{name}`")]
    MissingPlaceholder { template: String, name: String },
    #[error("malformed rating: {0}")]
    MalformedRating(String),
    #[error("cannot load templates from {path}: {message}")]
    Load { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    pub name: String,
    pub body: String,
    pub required_placeholders: BTreeSet<String>,
}

enum Segment<'a> {
    Literal(&'a str),
    Placeholder(&'a str),
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

/// Splits a body into literal runs and `${NAME}` placeholders. An unterminated
/// or empty `${` stays literal.
fn segments(body: &str) -> Vec<Segment<'_>> {
    let mut out = Vec::new();
    let mut rest = body;
    while let Some(start) = rest.find("${") {
        let after = &rest[start + 2..];
        let name_len = after.find(|c: char| !is_name_char(c)).unwrap_or(after.len());
        if name_len > 0 && after[name_len..].starts_with('}') {
            if start > 0 {
                out.push(Segment::Literal(&rest[..start]));
            }
            out.push(Segment::Placeholder(&after[..name_len]));
            rest = &after[name_len + 1..];
        } else {
            out.push(Segment::Literal(&rest[..start + 2]));
            rest = after;
        }
    }
    if !rest.is_empty() {
        out.push(Segment::Literal(rest));
    }
    out
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, body: impl Into<String>) -> Self {
        let body = body.into();
        let required_placeholders = segments(&body)
            .into_iter()
            .filter_map(|s| match s {
                Segment::Placeholder(n) => Some(n.to_string()),
                Segment::Literal(_) => None,
            })
            .collect();
        Self { name: name.into(), body, required_placeholders }
    }

    /// Substitutes every placeholder verbatim. Substituted text is never
    /// rescanned, so answers containing `${...}` pass through untouched.
    pub fn render(&self, variables: &BTreeMap<String, String>) -> Result<String, PromptError> {
        if let Some(missing) = self.required_placeholders.iter().find(|n| !variables.contains_key(*n)) {
            return Err(PromptError::MissingPlaceholder {
                template: self.name.clone(),
                name: missing.clone(),
            });
        }
        let mut out = String::with_capacity(self.body.len());
        for seg in segments(&self.body) {
            match seg {
                Segment::Literal(s) => out.push_str(s),
                Segment::Placeholder(n) => out.push_str(&variables[n]),
            }
        }
        Ok(out)
    }
}

/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct PromptRegistry {
    templates: BTreeMap<String, PromptTemplate>,
}

impl Default for PromptRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptRegistry {
    pub fn builtin() -> Self {
        let templates = BUILTIN
            .iter()
            .map(|(name, body)| (name.to_string(), PromptTemplate::new(*name, body.trim_end())))
            .collect();
        Self { templates }
    }

    /// Built-in templates overlaid with every `<name>.txt` file in `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self, PromptError> {
        let load_err = |message: String| PromptError::Load { path: dir.display().to_string(), message };
        let mut registry = Self::builtin();
        let entries = fs::read_dir(dir).map_err(|e| load_err(e.to_string()))?;
        for entry in entries {
            let path = entry.map_err(|e| load_err(e.to_string()))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let Some(name) = path.file_stem().and_then(|s| s.to_str()) else { continue };
            let body = fs::read_to_string(&path).map_err(|e| load_err(format!("{}: {e}", path.display())))?;
            registry.templates.insert(name.to_string(), PromptTemplate::new(name, body.trim_end()));
        }
        Ok(registry)
    }

    pub fn with_template(mut self, template: PromptTemplate) -> Self {
        self.templates.insert(template.name.clone(), template);
        self
    }

    pub fn get(&self, name: &str) -> Result<&PromptTemplate, PromptError> {
        self.templates.get(name).ok_or_else(|| PromptError::UnknownTemplate(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn render(&self, name: &str, variables: &BTreeMap<String, String>) -> Result<String, PromptError> {
        self.get(name)?.render(variables)
    }
}

/// Builds a variable map from `(name, value)` pairs.
pub fn vars<K: Into<String>, V: Into<String>>(pairs: impl IntoIterator<Item = (K, V)>) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect()
}
