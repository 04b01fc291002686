//! Premise checking for arguments.
//!
//! The verifier lists an argument's premises, marking each sure or unsure.
//! Unsure premises are looked up through the search hook and, when results
//! come back, the verifier decides whether they contradict the premise.
//! Contradicted premises are quoted in the returned notes.

use tracing::warn;

use super::Argument;
use crate::backend::CallKind;
use crate::dataset::Question;
use crate::prompts::{names, parse_premises, parse_yes_no};
use crate::runtime::{Call, Runtime};

/// A search-augmented agent. `backbone: None` means offline.
#[derive(Debug, Clone, PartialEq)]
pub struct Verifier {
    pub backbone: Option<String>,
    pub agent_id: String,
}

impl Verifier {
    pub fn new(backbone: impl Into<String>) -> Self {
        Self { backbone: Some(backbone.into()), agent_id: "verifier".into() }
    }

    pub fn offline() -> Self {
        Self { backbone: None, agent_id: "verifier".into() }
    }
}

pub fn format_unfactual(premise: &str) -> String {
    format!("Unfactual premise: \"{premise}\"")
}

/// Best-effort: any failure yields empty notes and a warning.
pub fn verify_factuality(rt: &Runtime, question: &Question, argument: &Argument, verifier: &Verifier) -> String {
    if argument.placeholder {
        return String::new();
    }
    let Some(backbone) = verifier.backbone.as_deref() else {
        warn!(question = %question.id, "verifier unavailable; skipping factuality check");
        return String::new();
    };
    let temperature = rt.decoding.judge_temperature;
    // Distinct per argument so simulated streams never collide.
    let agent_id = format!("{}:{}", verifier.agent_id, argument.author_id);
    let extraction = Call::new(backbone, &question.id, &agent_id, CallKind::Premise, names::PREMISE_EXTRACTION)
        .var("ARGUMENT", argument.text.as_str())
        .temperature(temperature);
    let premises = match rt.invoke(extraction) {
        Ok(resp) => parse_premises(&resp.text),
        Err(e) => {
            warn!(question = %question.id, error = %e, "verifier unavailable; skipping factuality check");
            return String::new();
        }
    };

    let mut flagged = Vec::new();
    for premise in premises.iter().filter(|p| !p.sure) {
        let hits = match rt.search.search(&question.id, &premise.text) {
            Ok(hits) if !hits.is_empty() => hits,
            Ok(_) => continue,
            Err(e) => {
                warn!(question = %question.id, error = %e, "search unavailable during verification");
                continue;
            }
        };
        let evidence = hits.iter().map(|h| format!("- {}: {}", h.title, h.snippet)).collect::<Vec<_>>().join("\n");
        let check = Call::new(backbone, &question.id, &agent_id, CallKind::Verify, names::PREMISE_VERIFICATION)
            .var("PREMISE", premise.text.as_str())
            .var("EVIDENCE", evidence)
            .temperature(temperature);
        match rt.invoke(check).map(|r| parse_yes_no(&r.text)) {
            Ok(Some(true)) => flagged.push(format_unfactual(&premise.text)),
            Ok(_) => {}
            Err(e) => warn!(question = %question.id, error = %e, "premise verification call failed"),
        }
    }
    flagged.join("; ")
}
