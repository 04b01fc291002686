use rayon::prelude::*;
use tracing::warn;

use super::{Argument, Assignment, NO_ARGUMENT};
use crate::backend::CallKind;
use crate::dataset::Question;
use crate::ensemble::Stance;
use crate::prompts::names;
use crate::runtime::{Call, Runtime};

/// Strips a leading "Argument:" label the model may echo back.
fn clean(text: &str) -> &str {
    let t = text.trim();
    match t.get(..9) {
        Some(head) if head.eq_ignore_ascii_case("argument:") => t[9..].trim(),
        _ => t,
    }
}

/// One argument per deliberator, defending its assigned stance. Failures and
/// empty replies become the placeholder argument.
pub fn generate_arguments(
    rt: &Runtime,
    question: &Question,
    stances: &[Stance],
    assignment: &[Assignment],
    backbone: &str,
) -> Vec<Argument> {
    assignment
        .par_iter()
        .map(|a| {
            let stance = stances.iter().find(|s| s.stance_id == a.stance_id).map_or("", |s| s.representative_answer.as_str());
            let call = Call::new(backbone, &question.id, &a.agent_id, CallKind::Argument, names::ARGUMENT_GENERATION)
                .var("QUERY", question.text.as_str())
                .var("STANCE", stance)
                .temperature(rt.decoding.deliberation_temperature);
            let text = match rt.invoke(call) {
                Ok(resp) => clean(&resp.text).to_string(),
                Err(e) => {
                    warn!(question = %question.id, agent = %a.agent_id, error = %e, "argument generation failed");
                    String::new()
                }
            };
            let placeholder = text.is_empty();
            Argument {
                author_id: a.agent_id.clone(),
                stance_id: a.stance_id,
                text: if placeholder { NO_ARGUMENT.to_string() } else { text },
                placeholder,
            }
        })
        .collect()
}
