//! Answer normalization shared by clustering, evaluation and the simulator.

/// Lowercases, drops punctuation and the articles `a`, `an`, `the`, and
/// collapses whitespace.
pub fn normalize_answer(answer: &str) -> String {
    let lowered = answer.to_lowercase();
    let cleaned: String = lowered
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect();
    cleaned
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Formats a probability with at most four decimals and no trailing zeros.
pub fn format_prob(value: f64) -> String {
    let s = format!("{value:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}
