//! Lenient parsers for the structured replies the templates ask for.

use serde::{Deserialize, Serialize};

use super::PromptError;
use crate::text::normalize_answer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatingLevel {
    Bad,
    Modest,
    Good,
    Excellent,
}

impl RatingLevel {
    pub const ALL: [RatingLevel; 4] = [Self::Bad, Self::Modest, Self::Good, Self::Excellent];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Bad => "bad",
            Self::Modest => "modest",
            Self::Good => "good",
            Self::Excellent => "excellent",
        }
    }

    /// Position on the scale mapped to [0, 1].
    pub fn score(self) -> f64 {
        match self {
            Self::Bad => 0.0,
            Self::Modest => 1.0 / 3.0,
            Self::Good => 2.0 / 3.0,
            Self::Excellent => 1.0,
        }
    }

    fn from_word(word: &str) -> Option<Self> {
        match word.to_ascii_lowercase().as_str() {
            "bad" => Some(Self::Bad),
            "modest" => Some(Self::Modest),
            "good" => Some(Self::Good),
            "excellent" => Some(Self::Excellent),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxRatings {
    pub ambiguity: f64,
    pub complexity: f64,
    pub ability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedStance {
    pub answer: String,
    /// Verbalized confidence in [0, 1], absent when the reply stated none.
    pub confidence: Option<f64>,
    pub abstained: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux_ratings: Option<AuxRatings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedRating {
    pub consistency: RatingLevel,
    pub clarity: RatingLevel,
    pub conciseness: RatingLevel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factuality_notes: Option<String>,
}

impl ParsedRating {
    pub fn uniform(level: RatingLevel) -> Self {
        Self { consistency: level, clarity: level, conciseness: level, factuality_notes: None }
    }

    /// Substitute for an unparseable rating.
    pub fn neutral() -> Self {
        Self::uniform(RatingLevel::Modest)
    }

    pub fn minimum() -> Self {
        Self::uniform(RatingLevel::Bad)
    }

    pub fn mean_score(&self) -> f64 {
        (self.consistency.score() + self.clarity.score() + self.conciseness.score()) / 3.0
    }

    pub fn format_line(&self) -> String {
        format!(
            "Consistency: {}, Clarity: {}, Conciseness: {}",
            self.consistency.as_str(),
            self.clarity.as_str(),
            self.conciseness.as_str()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Revision {
    pub answer: String,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Premise {
    pub text: String,
    pub sure: bool,
}

/// Byte offset just past `label:` (case-insensitive, optional spaces before
/// the colon), searching from `from`. Labels must start at a word boundary.
fn find_label(text: &str, label: &str, from: usize) -> Option<(usize, usize)> {
    let lower = text.to_ascii_lowercase();
    let mut pos = from;
    while let Some(rel) = lower.get(pos..)?.find(label) {
        let start = pos + rel;
        let boundary = start == 0
            || !lower[..start].chars().next_back().is_some_and(|c| c.is_ascii_alphanumeric());
        let mut end = start + label.len();
        while lower[end..].starts_with([' ', '\t']) {
            end += 1;
        }
        if boundary && lower[end..].starts_with(':') {
            return Some((start, end + 1));
        }
        pos = start + label.len();
    }
    None
}

fn clean_value(s: &str) -> String {
    let mut v = s.trim();
    loop {
        let next = v
            .trim_matches(|c: char| matches!(c, '"' | '\'' | '<' | '>' | '`' | '*'))
            .trim_end_matches(['.', ',', ';'])
            .trim();
        if next == v {
            return v.to_string();
        }
        v = next;
    }
}

/// Reads a number at the start of `s` (after quotes or brackets), mapping a
/// trailing `%` to a fraction.
fn leading_number(s: &str) -> Option<f64> {
    let s = s.trim_start_matches(|c: char| c.is_whitespace() || matches!(c, '"' | '\'' | '<' | '*'));
    let len = s
        .char_indices()
        .find(|&(i, c)| !(c.is_ascii_digit() || c == '.' || (i == 0 && (c == '-' || c == '+'))))
        .map_or(s.len(), |(i, _)| i);
    let value: f64 = s[..len].parse().ok()?;
    if !value.is_finite() {
        return None;
    }
    let percent = s[len..].trim_start().starts_with('%');
    Some(if percent { value / 100.0 } else { value })
}

/// Value of the first `Confidence:` field, percent-normalized and clamped to
/// [0, 1].
pub fn extract_confidence(text: &str) -> Option<f64> {
    let mut from = 0;
    while let Some((_, end)) = find_label(text, "confidence", from) {
        if let Some(v) = leading_number(&text[end..]) {
            return Some(v.clamp(0.0, 1.0));
        }
        from = end;
    }
    None
}

fn labelled_number(text: &str, label: &str) -> Option<f64> {
    let (_, end) = find_label(text, label, 0)?;
    leading_number(&text[end..]).map(|v| v.clamp(0.0, 1.0))
}

fn is_abstention(answer: &str) -> bool {
    // raw emptiness only: normalization would erase a bare "A"
    let n = normalize_answer(answer);
    answer.trim().is_empty()
        || matches!(
            n.as_str(),
            "abstain" | "unknown" | "none" | "n a" | "no answer" | "i don t know" | "i do not know" | "cannot answer"
        )
}

/// Extracts `Answer:` and `Confidence:` from a stance reply. Text without a
/// usable answer is an abstention.
pub fn parse_stance(text: &str) -> ParsedStance {
    let aux = match (
        labelled_number(text, "ambiguity"),
        labelled_number(text, "complexity"),
        labelled_number(text, "ability"),
    ) {
        (Some(ambiguity), Some(complexity), Some(ability)) => Some(AuxRatings { ambiguity, complexity, ability }),
        _ => None,
    };
    let abstain = |confidence| ParsedStance { answer: String::new(), confidence, abstained: true, aux_ratings: aux };

    let Some((_, start)) = find_label(text, "answer", 0) else {
        return abstain(None);
    };
    let line_end = text[start..].find('\n').map_or(text.len(), |i| start + i);
    let conf_start = find_label(text, "confidence", start).map(|(s, _)| s);
    let end = conf_start.map_or(line_end, |c| c.min(line_end));
    let answer = clean_value(&text[start..end]);
    let confidence = extract_confidence(&text[start..]);
    if is_abstention(&answer) {
        return abstain(None);
    }
    ParsedStance { answer, confidence, abstained: false, aux_ratings: aux }
}

fn rating_field(text: &str, label: &str) -> Option<RatingLevel> {
    let mut from = 0;
    while let Some((_, end)) = find_label(text, label, from) {
        let rest = text[end..].trim_start_matches(|c: char| c.is_whitespace() || matches!(c, '"' | '\'' | '<' | '*'));
        let word: String = rest.chars().take_while(|c| c.is_ascii_alphabetic()).collect();
        if let Some(level) = RatingLevel::from_word(&word) {
            return Some(level);
        }
        from = end;
    }
    None
}

/// Parses `Consistency: <r>, Clarity: <r>, Conciseness: <r>`.
pub fn parse_rating(text: &str) -> Result<ParsedRating, PromptError> {
    let field = |label: &str| {
        rating_field(text, label).ok_or_else(|| PromptError::MalformedRating(format!("no `{label}` rating in {text:?}")))
    };
    Ok(ParsedRating {
        consistency: field("consistency")?,
        clarity: field("clarity")?,
        conciseness: field("conciseness")?,
        factuality_notes: None,
    })
}

/// Parses `Answer: <answer> Rationales: <rationales>`.
pub fn parse_revision(text: &str) -> Option<Revision> {
    let (_, start) = find_label(text, "answer", 0)?;
    let rationale_label = find_label(text, "rationales", start).or_else(|| find_label(text, "rationale", start));
    let line_end = text[start..].find('\n').map_or(text.len(), |i| start + i);
    let (answer_end, rationale) = match rationale_label {
        Some((s, e)) => (s.min(line_end), text[e..].trim().to_string()),
        None => (line_end, text[line_end..].trim().to_string()),
    };
    let answer = clean_value(&text[start..answer_end]);
    if is_abstention(&answer) {
        return None;
    }
    Some(Revision { answer, rationale })
}

/// First word of the reply read as yes/no.
pub fn parse_yes_no(text: &str) -> Option<bool> {
    let word: String = text
        .trim_start_matches(|c: char| !c.is_ascii_alphabetic())
        .chars()
        .take_while(|c| c.is_ascii_alphabetic())
        .collect::<String>()
        .to_ascii_lowercase();
    match word.as_str() {
        "yes" | "true" => Some(true),
        "no" | "false" => Some(false),
        _ => None,
    }
}

/// Lines of the form `Premise: <text> | sure|unsure`. A missing marker counts
/// as unsure so the premise still gets checked.
pub fn parse_premises(text: &str) -> Vec<Premise> {
    text.lines()
        .filter_map(|line| {
            let (_, start) = find_label(line, "premise", 0)?;
            let body = &line[start..];
            let (claim, marker) = match body.rfind('|') {
                Some(i) => (&body[..i], body[i + 1..].trim().to_ascii_lowercase()),
                None => (body, String::new()),
            };
            let claim = clean_value(claim);
            if claim.is_empty() || normalize_answer(&claim) == "none" {
                return None;
            }
            let sure = marker.starts_with("sure");
            Some(Premise { text: claim, sure })
        })
        .collect()
}

/// Text after `Follow up:` on its line.
pub fn parse_follow_up(text: &str) -> Option<String> {
    let (_, start) = find_label(text, "follow up", 0).or_else(|| find_label(text, "follow-up", 0))?;
    let end = text[start..].find('\n').map_or(text.len(), |i| start + i);
    let q = clean_value(&text[start..end]);
    (!q.is_empty()).then_some(q)
}
