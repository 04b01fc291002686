//! Independent expert voting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{AgentProfile, EnsembleError, Skill};
use crate::backend::CallKind;
use crate::confidence::{perplexity_confidence, RawConfidence};
use crate::dataset::Question;
use crate::prompts::{names, parse_follow_up, parse_stance, ParsedStance};
use crate::runtime::{Call, CallError, Runtime};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage1Record {
    pub agent_id: String,
    pub backbone: String,
    pub skill: Skill,
    pub stance: ParsedStance,
    /// Absent for abstentions.
    pub confidence: Option<RawConfidence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Stage1Record {
    pub fn answered(&self) -> bool {
        !self.stance.abstained && self.confidence.is_some()
    }

    pub fn confidence_value(&self) -> f64 {
        self.confidence.map_or(0.0, |c| c.value)
    }
}

/// Runs the agent's prompting strategy and returns its stance with a raw
/// confidence. Logit-capable backbones are asked for token probabilities and
/// their sequence confidence wins over any verbalized value; otherwise the
/// verbalized value is used. No usable confidence means abstention.
pub fn run_skill(rt: &Runtime, agent: &AgentProfile, question: &Question) -> Result<(ParsedStance, Option<RawConfidence>), CallError> {
    let backbone = rt.backbone(&agent.backbone)?;
    let want_probs = backbone.supports_token_probs();
    let stance_format = rt.prompts.get(names::STANCE_GENERATION)?.body.clone();
    let temperature = rt.decoding.stance_temperature;
    let bb = agent.backbone.as_str();
    let (qid, aid) = (question.id.as_str(), agent.agent_id.as_str());
    let q = question.text.as_str();

    let final_call = match agent.skill {
        Skill::Cot | Skill::Pot | Skill::General => {
            let template = match agent.skill {
                Skill::Cot => names::COT,
                Skill::Pot => names::POT,
                _ => names::COT,
            };
            Call::new(bb, qid, aid, CallKind::Stance, template).var("QUERY", q)
        }
        Skill::SelfAsk => {
            let first = rt.invoke(
                Call::new(bb, qid, aid, CallKind::Scaffold, names::SELF_ASK).var("QUERY", q).temperature(temperature),
            )?;
            let follow_up = parse_follow_up(&first.text).unwrap_or_else(|| q.to_string());
            let intermediate = match rt.search.search(qid, &follow_up) {
                Ok(hits) if !hits.is_empty() => hits
                    .iter()
                    .map(|h| format!("{}: {}", h.title, h.snippet))
                    .collect::<Vec<_>>()
                    .join(" "),
                Ok(_) => "no search results".to_string(),
                Err(e) => {
                    warn!(question = %qid, agent = %aid, error = %e, "self-ask search failed");
                    "search unavailable".to_string()
                }
            };
            Call::new(bb, qid, aid, CallKind::Stance, names::SELF_ASK_ANSWER)
                .var("QUERY", q)
                .var("FOLLOW-UP", follow_up)
                .var("INTERMEDIATE", intermediate)
        }
        Skill::GenRead => {
            let doc = rt.invoke(
                Call::new(bb, qid, aid, CallKind::Scaffold, names::GENREAD).var("QUERY", q).temperature(temperature),
            )?;
            Call::new(bb, qid, aid, CallKind::Stance, names::GENREAD_READ)
                .var("QUERY", q)
                .var("DOCUMENT", doc.text.trim())
        }
    };

    let resp = rt.invoke(final_call.suffix(stance_format).temperature(temperature).token_probs(want_probs))?;
    let mut stance = parse_stance(&resp.text);
    if stance.abstained {
        return Ok((stance, None));
    }
    let confidence = match resp.token_probs.as_deref() {
        Some(probs) => perplexity_confidence(probs).ok(),
        None => None,
    }
    .or_else(|| stance.confidence.map(RawConfidence::verbalized));
    if confidence.is_none() {
        stance.abstained = true;
    }
    Ok((stance, confidence))
}

/// Every agent votes independently; the calls fan out concurrently and the
/// result keeps agent order. Failed agents are recorded as abstentions.
pub fn collect_stage1(rt: &Runtime, question: &Question, agents: &[AgentProfile]) -> Result<Vec<Stage1Record>, EnsembleError> {
    if agents.is_empty() {
        return Err(EnsembleError::NoAgents);
    }
    let records: Vec<Stage1Record> = agents
        .par_iter()
        .map(|agent| {
            let (stance, confidence, error) = match run_skill(rt, agent, question) {
                Ok((stance, confidence)) => (stance, confidence, None),
                Err(e) => {
                    warn!(question = %question.id, agent = %agent.agent_id, error = %e, "stage-1 agent failed; abstaining");
                    let abstain = ParsedStance { answer: String::new(), confidence: None, abstained: true, aux_ratings: None };
                    (abstain, None, Some(e.to_string()))
                }
            };
            Stage1Record {
                agent_id: agent.agent_id.clone(),
                backbone: agent.backbone.clone(),
                skill: agent.skill,
                stance,
                confidence,
                error,
            }
        })
        .collect();
    if records.iter().any(Stage1Record::answered) {
        Ok(records)
    } else {
        Err(EnsembleError::AllAbstained)
    }
}
