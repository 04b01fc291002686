//! Seeded simulated provider.
//!
//! Each reply is a pure function of `(seed, seed_namespace, question_id,
//! agent_id, call_kind)` plus the prompt variables carried in the request's
//! [`CallTag`]. Nothing depends on wall-clock time or call order, so a run
//! produces the same transcript on one thread or many.
//!
//! The simulated agents follow a simple policy:
//! * stance: gold answer with probability `accuracy`, otherwise one of a few
//!   shared decoys; confidence `accuracy + confidence_bias ± confidence_noise`.
//! * rating: a discerning rater (probability `accuracy`) rates arguments for
//!   correct stances good/excellent and others bad/modest; otherwise random.
//! * verify: the search results are authoritative, so a premise claiming a
//!   non-gold answer is contradicted.
//! * revise: switches to the opposing stance with probability
//!   `persuadability` when the opposing argument scored strictly better, and
//!   writes a rationale ending in a suggested confidence: the prior moved in
//!   log-odds by how much of the group backs the chosen answer and by how far
//!   its feedback beats the alternative's.
//! * posterior: blends the prior with the suggested confidence; the
//!   suggestion gets weight `0.5 + 0.5 * persuadability`.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BackendError, CallKind, CallTag, CompletionRequest, CompletionResponse, Provider};
use crate::dataset::ReferenceAnswerSet;
use crate::prompts::{extract_confidence, RatingLevel};
use crate::seed::rng_for;
use crate::text::{format_prob, normalize_answer};

/// Behaviour of one simulated agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimAgentParams {
    #[serde(default = "default_accuracy")]
    pub accuracy: f64,
    #[serde(default)]
    pub confidence_bias: f64,
    #[serde(default)]
    pub confidence_noise: f64,
    #[serde(default)]
    pub persuadability: f64,
    #[serde(default)]
    pub seed_namespace: String,
}

fn default_accuracy() -> f64 {
    0.6
}

impl Default for SimAgentParams {
    fn default() -> Self {
        Self {
            accuracy: default_accuracy(),
            confidence_bias: 0.0,
            confidence_noise: 0.0,
            persuadability: 0.0,
            seed_namespace: String::new(),
        }
    }
}

impl SimAgentParams {
    pub fn validate(&self) -> Result<(), String> {
        let check = |name: &str, v: f64, lo: f64, hi: f64| {
            if v.is_finite() && (lo..=hi).contains(&v) {
                Ok(())
            } else {
                Err(format!("{name} = {v} outside [{lo}, {hi}]"))
            }
        };
        check("accuracy", self.accuracy, 0.0, 1.0)?;
        check("confidence_bias", self.confidence_bias, -1.0, 1.0)?;
        check("confidence_noise", self.confidence_noise, 0.0, f64::MAX)?;
        check("persuadability", self.persuadability, 0.0, 1.0)
    }
}

/// Token probabilities the simulator attaches when they are requested.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum SimLogprobs {
    /// No logprob support; requesting them is a capability error.
    #[default]
    None,
    Fixed(Vec<f64>),
    /// Two tokens whose geometric mean equals the stated confidence.
    FromConfidence,
}

/// Decoy answers shared across agents so wrong votes can form real stances.
const DECOY_WEIGHTS: [f64; 3] = [0.6, 0.25, 0.15];

pub fn decoy_answer(index: usize) -> String {
    format!("wrong answer {}", index + 1)
}

fn noise(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    if scale > 0.0 {
        rng.gen_range(-scale..=scale)
    } else {
        0.0
    }
}

fn var<'a>(tag: &'a CallTag, name: &str) -> &'a str {
    tag.var(name).unwrap_or("")
}

/// Mean rating score in a feedback summary minus a penalty when it flags an
/// unfactual premise. No ratings reads as the neutral level.
fn feedback_score(feedback: &str) -> f64 {
    let lower = feedback.to_ascii_lowercase();
    let (ratings_part, factuality_part) = match lower.find("factuality:") {
        Some(i) => (&lower[..i], &lower[i..]),
        None => (lower.as_str(), ""),
    };
    let levels: Vec<f64> = ratings_part
        .split(|c: char| !c.is_ascii_alphabetic())
        .filter_map(|w| RatingLevel::ALL.iter().find(|l| l.as_str() == w).map(|l| l.score()))
        .collect();
    let quality = if levels.is_empty() {
        RatingLevel::Modest.score()
    } else {
        levels.iter().sum::<f64>() / levels.len() as f64
    };
    let flagged = factuality_part.contains("unfactual");
    quality - if flagged { 0.5 } else { 0.0 }
}

fn stance_text(rng: &mut ChaCha8Rng, params: &SimAgentParams, gold: &ReferenceAnswerSet) -> (String, f64) {
    let correct = !gold.is_empty() && rng.gen_bool(params.accuracy);
    let answer = if correct {
        gold.answers()[rng.gen_range(0..gold.answers().len())].clone()
    } else {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let idx = DECOY_WEIGHTS
            .iter()
            .position(|w| {
                acc += w;
                u < acc
            })
            .unwrap_or(DECOY_WEIGHTS.len() - 1);
        decoy_answer(idx)
    };
    let confidence =
        (params.accuracy + params.confidence_bias + noise(rng, params.confidence_noise)).clamp(0.0, 1.0);
    let (amb, cpx, abl): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let text = format!(
        "Ambiguity: {} Complexity: {} Ability: {}\nAnswer: {} Confidence: {}",
        format_prob(amb),
        format_prob(cpx),
        format_prob(abl),
        answer,
        format_prob(confidence)
    );
    (text, confidence)
}

fn rating_text(rng: &mut ChaCha8Rng, params: &SimAgentParams, gold: &ReferenceAnswerSet, tag: &CallTag) -> String {
    let stance_correct = gold.matches_normalized(var(tag, "STANCE"));
    let discerning = rng.gen_bool(params.accuracy);
    let mut pick = || {
        let i = if discerning {
            let hi = rng.gen_bool(0.5) as usize;
            if stance_correct { 2 + hi } else { hi }
        } else {
            rng.gen_range(0..4)
        };
        RatingLevel::ALL[i].as_str()
    };
    let (a, b, c) = (pick(), pick(), pick());
    format!("Consistency: {a}, Clarity: {b}, Conciseness: {c}")
}

fn revise_text(rng: &mut ChaCha8Rng, params: &SimAgentParams, tag: &CallTag) -> String {
    let own = var(tag, "STANCE").to_string();
    let opposing = tag.var("OPPOSING-STANCE").filter(|s| !s.is_empty()).map(str::to_string);
    let supporting: u32 = var(tag, "NUMBER-SUPPORTING").trim().parse().unwrap_or(0);
    let against: u32 = var(tag, "NUMBER-AGAINST").trim().parse().unwrap_or(0);
    let score_for = feedback_score(var(tag, "FEEDBACK-SUPPORTING"));
    let score_against = opposing.as_ref().map(|_| feedback_score(var(tag, "FEEDBACK-AGAINST")));
    let roll: f64 = rng.gen();

    let switch = matches!(score_against, Some(s) if s > score_for) && roll < params.persuadability;
    let opposing_support: u32 = tag.var("OPPOSING-SUPPORT").and_then(|v| v.trim().parse().ok()).unwrap_or(against);
    let (answer, agreeing, score, rival) = match (&opposing, switch) {
        (Some(opp), true) => (opp.clone(), opposing_support, score_against.unwrap_or(0.0), Some(score_for)),
        _ => (own, supporting + 1, score_for, score_against),
    };
    let total = (supporting + against + 1) as f64;
    let consensus = f64::from(agreeing) / total;
    // An unopposed answer has nothing counting against it.
    let margin = score - rival.unwrap_or(0.0);
    let prior = extract_confidence(&format!("confidence: {}", var(tag, "ORIGINAL-CONFIDENCE")))
        .unwrap_or(0.5)
        .clamp(0.01, 0.99);
    // Log-odds update of the prior: group agreement moves it most, the
    // feedback margin over the alternative a little.
    let log_odds = (prior / (1.0 - prior)).ln() + 1.5 * (2.0 * consensus - 1.0) + 0.25 * margin;
    let suggested = 1.0 / (1.0 + (-log_odds).exp());
    let move_word = if switch { "switch to" } else { "keep" };
    format!(
        "Answer: {answer} Rationales: I {move_word} this answer. About {} of the group backs it and peer \
         feedback favours its argument over the alternative by {}. Suggested confidence: {}",
        format_prob(consensus),
        format_prob(margin),
        format_prob(suggested)
    )
}

fn posterior_text(rng: &mut ChaCha8Rng, params: &SimAgentParams, tag: &CallTag) -> String {
    let prior = extract_confidence(&format!("confidence: {}", var(tag, "ORIGINAL-CONFIDENCE"))).unwrap_or(0.5);
    let suggested = extract_confidence(var(tag, "CONFIDENCE-RATIONALE")).unwrap_or(prior);
    let w = 0.5 + 0.5 * params.persuadability;
    let value = ((1.0 - w) * prior + w * suggested + noise(rng, params.confidence_noise * 0.5)).clamp(0.0, 1.0);
    format!("Confidence: {}", format_prob(value))
}

fn verify_text(gold: &ReferenceAnswerSet, tag: &CallTag) -> &'static str {
    let premise = var(tag, "PREMISE");
    let claimed = premise
        .to_ascii_lowercase()
        .find(" is the correct answer")
        .map_or(premise, |i| &premise[..i]);
    if gold.matches_normalized(claimed) {
        "no"
    } else {
        "yes"
    }
}

fn judge_text(gold: &ReferenceAnswerSet, tag: &CallTag) -> &'static str {
    let (a, b) = (var(tag, "ANSWER-A"), var(tag, "ANSWER-B"));
    let same = normalize_answer(a) == normalize_answer(b)
        || (gold.matches_normalized(a) && gold.matches_normalized(b));
    if same {
        "yes"
    } else {
        "no"
    }
}

/// The simulated reply for one call. Total: every call kind has a reply.
pub fn sim_decide(seed: u64, tag: &CallTag, params: &SimAgentParams, gold: &ReferenceAnswerSet) -> CompletionResponse {
    let mut rng = rng_for(
        seed,
        &[&params.seed_namespace, &tag.question_id, &tag.agent_id, tag.kind.as_str()],
    );
    let text = match tag.kind {
        CallKind::Stance => stance_text(&mut rng, params, gold).0,
        CallKind::Scaffold => match tag.template.as_str() {
            "genread" => "Background: the question concerns a well documented fact.".to_string(),
            _ => "Follow up: What is the key fact behind this question?".to_string(),
        },
        CallKind::Argument => {
            let stance = var(tag, "STANCE");
            format!(
                "{stance} is the correct answer to this question. Known facts about the question point to {stance}."
            )
        }
        CallKind::Premise => {
            let argument = var(tag, "ARGUMENT");
            let first = argument.split_inclusive('.').next().unwrap_or("").trim().trim_end_matches('.');
            if first.is_empty() {
                "Premise: none".to_string()
            } else {
                format!("Premise: {first} | unsure")
            }
        }
        CallKind::Verify => verify_text(gold, tag).to_string(),
        CallKind::Rating => rating_text(&mut rng, params, gold, tag),
        CallKind::Revise => revise_text(&mut rng, params, tag),
        CallKind::Posterior => posterior_text(&mut rng, params, tag),
        CallKind::Judge => judge_text(gold, tag).to_string(),
    };
    let mut meta = BTreeMap::new();
    meta.insert("provider".to_string(), "sim".to_string());
    meta.insert("call_kind".to_string(), tag.kind.as_str().to_string());
    CompletionResponse { text, token_probs: None, provider_meta: meta }
}

/// Gold answers per question id: the simulated world's ground truth.
pub type SimWorld = HashMap<String, ReferenceAnswerSet>;

pub struct SimProvider {
    name: String,
    seed: u64,
    default_params: SimAgentParams,
    /// `(agent_id prefix, params)`; the longest matching prefix wins.
    overrides: Vec<(String, SimAgentParams)>,
    world: Arc<SimWorld>,
    logprobs: SimLogprobs,
}

impl SimProvider {
    pub fn new(name: impl Into<String>, seed: u64, default_params: SimAgentParams, world: Arc<SimWorld>) -> Self {
        Self {
            name: name.into(),
            seed,
            default_params,
            overrides: Vec::new(),
            world,
            logprobs: SimLogprobs::None,
        }
    }

    pub fn with_override(mut self, agent_prefix: impl Into<String>, params: SimAgentParams) -> Self {
        self.overrides.push((agent_prefix.into(), params));
        self
    }

    pub fn with_logprobs(mut self, logprobs: SimLogprobs) -> Self {
        self.logprobs = logprobs;
        self
    }

    pub fn params_for(&self, agent_id: &str) -> &SimAgentParams {
        self.overrides
            .iter()
            .filter(|(prefix, _)| agent_id.starts_with(prefix.as_str()))
            .max_by_key(|(prefix, _)| prefix.len())
            .map_or(&self.default_params, |(_, p)| p)
    }
}

impl Provider for SimProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn supports_token_probs(&self) -> bool {
        !matches!(self.logprobs, SimLogprobs::None)
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let tag = request
            .tag
            .as_ref()
            .ok_or_else(|| BackendError::InvalidRequest("simulated provider needs a call tag".into()))?;
        let params = self.params_for(&tag.agent_id);
        let empty = ReferenceAnswerSet::default();
        let gold = self.world.get(&tag.question_id).unwrap_or(&empty);
        let mut response = sim_decide(self.seed, tag, params, gold);
        if request.want_token_probs {
            response.token_probs = match &self.logprobs {
                SimLogprobs::None => None,
                SimLogprobs::Fixed(p) => Some(p.clone()),
                SimLogprobs::FromConfidence => {
                    let c = extract_confidence(&response.text).unwrap_or(1.0).max(1e-6);
                    Some(vec![c, c])
                }
            };
        }
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{complete, Message};
    use crate::prompts::parse_stance;

    fn world() -> Arc<SimWorld> {
        let mut w = SimWorld::new();
        w.insert("q1".into(), ReferenceAnswerSet::new(["neon"]));
        Arc::new(w)
    }

    fn request(kind: CallKind, agent: &str) -> CompletionRequest {
        let mut r = CompletionRequest::new("sim", vec![Message::user("prompt")]);
        r.tag = Some(CallTag::new("q1", agent, kind, "stance_generation"));
        r
    }

    #[test]
    fn identical_requests_identical_responses() {
        let p = SimProvider::new("s", 11, SimAgentParams { confidence_noise: 0.2, ..Default::default() }, world());
        let a = complete(&request(CallKind::Stance, "a/cot/0"), &p).unwrap();
        let b = complete(&request(CallKind::Stance, "a/cot/0"), &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fixed_token_probs() {
        let p = SimProvider::new("s", 1, SimAgentParams::default(), world()).with_logprobs(SimLogprobs::Fixed(vec![0.5, 0.5]));
        let mut r = request(CallKind::Stance, "a");
        r.want_token_probs = true;
        assert_eq!(complete(&r, &p).unwrap().token_probs, Some(vec![0.5, 0.5]));
    }

    #[test]
    fn no_logprobs_is_capability_error() {
        let p = SimProvider::new("s", 1, SimAgentParams::default(), world());
        let mut r = request(CallKind::Stance, "a");
        r.want_token_probs = true;
        assert!(matches!(complete(&r, &p), Err(BackendError::Capability(_))));
    }

    #[test]
    fn degenerate_params_always_gold_and_certain() {
        let params = SimAgentParams { accuracy: 1.0, ..Default::default() };
        let gold = ReferenceAnswerSet::new(["neon"]);
        for i in 0..50 {
            let tag = CallTag::new(&format!("q{i}"), "agent", CallKind::Stance, "cot");
            let p = parse_stance(&sim_decide(3, &tag, &params, &gold).text);
            assert_eq!(p.answer, "neon");
            assert_eq!(p.confidence, Some(1.0));
        }
    }

    #[test]
    fn monte_carlo_accuracy_and_overconfidence() {
        // Oracle: draw 1000 synthetic questions and measure the empirical rates.
        let params = SimAgentParams { accuracy: 0.6, confidence_bias: 0.3, ..Default::default() };
        let mut correct = 0usize;
        let mut conf = 0.0;
        for i in 0..1000 {
            let gold = ReferenceAnswerSet::new([format!("gold {i}")]);
            let tag = CallTag::new(&format!("syn-{i}"), "agent", CallKind::Stance, "cot");
            let p = parse_stance(&sim_decide(2024, &tag, &params, &gold).text);
            correct += gold.matches_normalized(&p.answer) as usize;
            conf += p.confidence.unwrap();
        }
        let acc = correct as f64 / 1000.0;
        assert!((acc - 0.6).abs() <= 0.04, "accuracy {acc}");
        assert!((conf / 1000.0 - 0.9).abs() < 1e-9);
    }

    #[test]
    fn overrides_use_longest_prefix() {
        let p = SimProvider::new("s", 1, SimAgentParams::default(), world())
            .with_override("gpt", SimAgentParams { accuracy: 0.1, ..Default::default() })
            .with_override("gpt/pot", SimAgentParams { accuracy: 0.9, ..Default::default() });
        assert_eq!(p.params_for("gpt/pot/0").accuracy, 0.9);
        assert_eq!(p.params_for("gpt/cot/0").accuracy, 0.1);
        assert_eq!(p.params_for("other").accuracy, 0.6);
    }

    #[test]
    fn judge_merges_gold_aliases() {
        let gold = ReferenceAnswerSet::new(["neon", "Ne"]);
        let mut tag = CallTag::new("q", "judge", CallKind::Judge, "judge_equivalence");
        tag.variables.insert("ANSWER-A".into(), "Neon".into());
        tag.variables.insert("ANSWER-B".into(), "ne".into());
        assert_eq!(sim_decide(0, &tag, &SimAgentParams::default(), &gold).text, "yes");
        tag.variables.insert("ANSWER-B".into(), "argon".into());
        assert_eq!(sim_decide(0, &tag, &SimAgentParams::default(), &gold).text, "no");
    }

    #[test]
    fn verify_flags_non_gold_claims() {
        let gold = ReferenceAnswerSet::new(["neon"]);
        let mut tag = CallTag::new("q", "v", CallKind::Verify, "premise_verification");
        tag.variables.insert("PREMISE".into(), "wrong answer 1 is the correct answer to this question".into());
        assert_eq!(sim_decide(0, &tag, &SimAgentParams::default(), &gold).text, "yes");
        tag.variables.insert("PREMISE".into(), "Neon is the correct answer to this question".into());
        assert_eq!(sim_decide(0, &tag, &SimAgentParams::default(), &gold).text, "no");
    }

    #[test]
    fn feedback_scoring() {
        assert!((feedback_score("Rating 1: Consistency: excellent, Clarity: excellent, Conciseness: excellent. Factuality: no issues flagged.") - 1.0).abs() < 1e-12);
        let flagged = feedback_score("Rating 1: Consistency: bad, Clarity: bad, Conciseness: bad. Factuality: Unfactual premise: \"x\"");
        assert!((flagged + 0.5).abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(SimAgentParams::default().validate().is_ok());
        assert!(SimAgentParams { accuracy: 1.2, ..Default::default() }.validate().is_err());
        assert!(SimAgentParams { confidence_bias: -1.5, ..Default::default() }.validate().is_err());
    }
}
