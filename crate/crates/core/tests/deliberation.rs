mod common;

use std::sync::Arc;

use collabcal::backend::sim::{SimAgentParams, SimProvider, SimWorld};
use collabcal::backend::{Backbone, BackendError, CallKind, CompletionResponse};
use collabcal::dataset::{Question, ReferenceAnswerSet};
use collabcal::deliberation::{
    assign_stances, deliberate, deliberator_profiles, final_verdict, format_unfactual, generate_arguments,
    largest_remainder, pair_arguments, posterior_confidence, rate_arguments, revise, verify_factuality, Argument,
    Assignment, DeliberationRecord, DeliberationSettings, Feedback, RevisionInput, Verifier, NO_ARGUMENT,
    NO_DISSENT, REVISION_FAILED,
};
use collabcal::ensemble::{AgentProfile, Stance};
use collabcal::prompts::ParsedRating;
use collabcal::runtime::Runtime;
use collabcal::search::StubSearch;
use collabcal::seed::rng_for;
use common::{params, runtime_with, Scripted};
use proptest::prelude::*;

fn question() -> Question {
    Question { id: "q1".into(), text: "Who discovered element X?".into() }
}

fn stance(id: usize, answer: &str, freq: usize, conf: f64) -> Stance {
    Stance {
        stance_id: id,
        representative_answer: answer.into(),
        member_answers: vec![answer.into(); freq],
        supporters: (0..freq).map(|i| format!("e{id}-{i}")).collect(),
        frequency: freq,
        mean_confidence: conf,
    }
}

fn dels(n: usize) -> Vec<AgentProfile> {
    (0..n).map(|i| AgentProfile::deliberator("g", i)).collect()
}

fn counts(assignment: &[Assignment], stances: usize) -> Vec<usize> {
    (0..stances).map(|s| assignment.iter().filter(|a| a.stance_id == s).count()).collect()
}

#[test]
fn apportionment_examples() {
    let s = [stance(0, "A", 4, 0.9), stance(1, "B", 2, 0.8)];
    assert_eq!(counts(&assign_stances(&s, &dels(6)), 2), [4, 2]);
    let s = [stance(0, "A", 3, 0.9), stance(1, "B", 2, 0.8), stance(2, "C", 1, 0.7)];
    assert_eq!(counts(&assign_stances(&s, &dels(6)), 3), [3, 2, 1]);
    let s = [stance(0, "A", 5, 0.9), stance(1, "B", 1, 0.8)];
    assert_eq!(counts(&assign_stances(&s, &dels(3)), 2), [3, 0]);
    assert_eq!(largest_remainder(&[5, 1], 3), [3, 0]);
}

proptest! {
    #[test]
    fn apportionment_conserves_and_favours_top(mut freqs in prop::collection::vec(1usize..8, 1..6), seats in 1usize..12) {
        freqs.sort_unstable_by(|a, b| b.cmp(a));
        let c = largest_remainder(&freqs, seats);
        prop_assert_eq!(c.iter().sum::<usize>(), seats);
        prop_assert!(c[0] >= 1);
        let total: usize = freqs.iter().sum();
        for (f, n) in freqs.iter().zip(&c) {
            // within one seat of the exact quota
            let quota = (*f * seats) as f64 / total as f64;
            prop_assert!((*n as f64 - quota).abs() < 1.0 + 1e-9);
        }
    }
}

fn sim_runtime(seed: u64, default: SimAgentParams) -> Runtime {
    let mut world = SimWorld::new();
    world.insert("q1".into(), ReferenceAnswerSet::new(["Marie Curie"]));
    let provider = SimProvider::new("g", seed, default, Arc::new(world));
    let search = StubSearch::new().with_hit("q1", "encyclopedia", "Marie Curie discovered element X.");
    Runtime::new([Backbone { name: "g".into(), model_id: "g".into(), provider: Arc::new(provider) }], seed)
        .with_search(Arc::new(search))
}

fn assignment(stance_ids: &[usize]) -> Vec<Assignment> {
    stance_ids
        .iter()
        .enumerate()
        .map(|(i, &s)| Assignment { agent_id: format!("g/general/{i}"), stance_id: s })
        .collect()
}

#[test]
fn one_argument_per_deliberator_and_stable() {
    let rt = sim_runtime(5, params(0.6, 0.0, 0.0, 0.5));
    let stances = [stance(0, "Marie Curie", 4, 0.9), stance(1, "Niels Bohr", 2, 0.8)];
    let a = assignment(&[0, 0, 0, 0, 1, 1]);
    let args = generate_arguments(&rt, &question(), &stances, &a, "g");
    assert_eq!(args.len(), 6);
    assert!(args.iter().all(|x| !x.text.is_empty() && !x.placeholder));
    assert_eq!(args, generate_arguments(&rt, &question(), &stances, &a, "g"));
    let single = generate_arguments(&rt, &question(), &stances[..1], &assignment(&[0, 0, 0]), "g");
    assert!(single.iter().all(|x| x.stance_id == 0));
}

#[test]
fn failed_generation_yields_placeholder_with_minimum_ratings() {
    let provider = Scripted::new(|req| {
        let (agent, kind) = common::who(req);
        if kind == CallKind::Argument.as_str() && agent == "g/general/0" {
            return Err(BackendError::Transport("timeout".into()));
        }
        Ok(CompletionResponse::text(match kind.as_str() {
            "argument" => "Argument: it fits the evidence.",
            "rating" => "Consistency: good, Clarity: good, Conciseness: good",
            _ => "Premise: none",
        }))
    });
    let rt = runtime_with("g", provider);
    let stances = [stance(0, "A", 3, 0.9)];
    let a = assignment(&[0, 0, 0]);
    let args = generate_arguments(&rt, &question(), &stances, &a, "g");
    assert_eq!(args[0].text, NO_ARGUMENT);
    assert!(args[0].placeholder);
    assert_eq!(args[1].text, "it fits the evidence.");
    let fb = rate_arguments(&rt, &question(), &stances, &a, &dels(3), &args, 2, &Verifier::new("g"));
    assert!(fb[0].ratings.iter().all(|r| *r == ParsedRating::minimum()));
    assert!(fb[1].ratings.iter().all(|r| r.mean_score() > 0.6));
}

#[test]
fn verification_examples() {
    let arg = Argument {
        author_id: "g/general/0".into(),
        stance_id: 0,
        text: "X was discovered in 1900. Therefore B.".into(),
        placeholder: false,
    };
    // zero premises
    let rt = runtime_with("g", Scripted::constant("Premise: none"));
    assert_eq!(verify_factuality(&rt, &question(), &arg, &Verifier::new("g")), "");
    // stub search contradicting the premise
    let provider = Scripted::new(|req| {
        let (_, kind) = common::who(req);
        Ok(CompletionResponse::text(if kind == CallKind::Premise.as_str() {
            "Premise: X was discovered in 1900 | unsure\nPremise: B follows | sure"
        } else {
            "yes"
        }))
    });
    let search = StubSearch::new().with_hit("q1", "history", "X was discovered in 1898.");
    let rt = runtime_with("g", provider.clone()).with_search(Arc::new(search));
    let notes = verify_factuality(&rt, &question(), &arg, &Verifier::new("g"));
    assert_eq!(notes, format_unfactual("X was discovered in 1900"));
    assert!(notes.contains("X was discovered in 1900"));
    let verify_calls: Vec<_> =
        provider.requests().into_iter().filter(|r| r.tag.as_ref().unwrap().kind == CallKind::Verify).collect();
    assert_eq!(verify_calls.len(), 1, "sure premises are not searched");
    // offline verifier
    assert_eq!(verify_factuality(&rt, &question(), &arg, &Verifier::offline()), "");
}

#[test]
fn rating_counts_and_degradation() {
    let rt = sim_runtime(5, params(0.6, 0.0, 0.0, 0.5));
    let stances = [stance(0, "Marie Curie", 4, 0.9), stance(1, "Niels Bohr", 2, 0.8)];
    let a = assignment(&[0, 0, 0, 0, 1, 1]);
    let args = generate_arguments(&rt, &question(), &stances, &a, "g");
    let fb = rate_arguments(&rt, &question(), &stances, &a, &dels(6), &args, 2, &Verifier::new("g"));
    for (f, arg) in fb.iter().zip(&args) {
        assert_eq!(f.ratings.len(), 2);
        assert!(!f.raters.contains(&arg.author_id));
        assert!(f.summarized.starts_with("Rating 1: "));
    }
    // the wrong stance's arguments are flagged by the stub search
    assert!(fb[4].factuality_notes.contains("Niels Bohr"));
    assert!(fb[0].factuality_notes.is_empty());
    assert_eq!(fb, rate_arguments(&rt, &question(), &stances, &a, &dels(6), &args, 2, &Verifier::new("g")));

    let a2 = assignment(&[0, 1]);
    let args2 = generate_arguments(&rt, &question(), &stances, &a2, "g");
    let fb2 = rate_arguments(&rt, &question(), &stances, &a2, &dels(2), &args2, 2, &Verifier::new("g"));
    assert!(fb2.iter().all(|f| f.ratings.len() == 1));
}

#[test]
fn pairing_reproducible() {
    let args: Vec<Argument> = [0, 0, 1, 1, 2]
        .iter()
        .enumerate()
        .map(|(i, &s)| Argument { author_id: format!("a{i}"), stance_id: s, text: "t".into(), placeholder: false })
        .collect();
    let p1 = pair_arguments(0, &args, &mut rng_for(9, &["pairing", "q1", "a0"]));
    let p2 = pair_arguments(0, &args, &mut rng_for(9, &["pairing", "q1", "a0"]));
    assert_eq!(p1, p2);
    let p = p1.unwrap();
    assert_eq!(args[p.supporting].stance_id, 0);
    assert_ne!(args[p.opposing.unwrap()].stance_id, 0);
}

fn feedback(arg: &Argument, summary: &str) -> Feedback {
    Feedback {
        argument_ref: collabcal::deliberation::ArgumentRef { author_id: arg.author_id.clone(), stance_id: arg.stance_id },
        raters: vec![],
        ratings: vec![],
        factuality_notes: String::new(),
        summarized: summary.into(),
    }
}

fn arg(author: &str, stance: usize, text: &str) -> Argument {
    Argument { author_id: author.into(), stance_id: stance, text: text.into(), placeholder: false }
}

const STRONG: &str = "Rating 1: Consistency: excellent, Clarity: excellent, Conciseness: excellent. Factuality: no issues flagged.";
const WEAK: &str = "Rating 1: Consistency: bad, Clarity: bad, Conciseness: bad. Factuality: no issues flagged.";

#[test]
fn revision_policy_examples() {
    let own = arg("g/general/1", 0, "A is right.");
    let other = arg("g/general/5", 1, "B is right.");
    let (fo, fx) = (feedback(&own, WEAK), feedback(&other, STRONG));
    let input = |opposing| RevisionInput {
        agent_id: "g/general/0",
        prior_answer: "A",
        prior_confidence: 0.8,
        supporting: (&own, &fo),
        opposing,
        opposing_support: 1,
        number_supporting: 4,
        number_against: 1,
    };
    // stubborn agent keeps its answer even against a stronger argument
    let rt = sim_runtime(5, params(0.6, 0.0, 0.0, 0.0));
    assert_eq!(revise(&rt, &question(), "g", &input(Some((&other, &fx, "B")))).answer, "A");
    // fully persuadable agent follows the strictly better argument
    let rt = sim_runtime(5, params(0.6, 0.0, 0.0, 1.0));
    assert_eq!(revise(&rt, &question(), "g", &input(Some((&other, &fx, "B")))).answer, "B");
    // unanimous stance, strong own feedback
    let fs = feedback(&own, STRONG);
    let unanimous = RevisionInput { supporting: (&own, &fs), opposing: None, number_against: 0, ..input(None) };
    assert_eq!(revise(&rt, &question(), "g", &unanimous).answer, "A");
}

#[test]
fn missing_opposition_renders_filler() {
    let provider = Scripted::constant("Answer: A Rationales: nothing against it.");
    let rt = runtime_with("g", provider.clone());
    let own = arg("g/general/1", 0, "A is right.");
    let fo = feedback(&own, STRONG);
    let input = RevisionInput {
        agent_id: "g/general/0",
        prior_answer: "A",
        prior_confidence: 0.8,
        supporting: (&own, &fo),
        opposing: None,
        opposing_support: 0,
        number_supporting: 2,
        number_against: 0,
    };
    let r = revise(&rt, &question(), "g", &input);
    assert_eq!((r.answer.as_str(), r.rationale.as_str()), ("A", "nothing against it."));
    let prompt = &provider.requests()[0].messages[0].content;
    assert!(prompt.contains(&format!("An argument from the opposing side is \"{NO_DISSENT}\"")));
    assert!(prompt.contains("Note that 2 other people also agreed with you."));

    let rt = runtime_with("g", Scripted::constant("no idea"));
    let r = revise(&rt, &question(), "g", &input);
    assert_eq!((r.answer.as_str(), r.rationale.as_str()), ("A", REVISION_FAILED));
}

#[test]
fn posterior_examples() {
    let post = |reply: &'static str, prior| {
        let rt = runtime_with("g", Scripted::constant(reply));
        posterior_confidence(&rt, &question(), "g", "g/general/0", prior, "because")
    };
    assert_eq!(post("Confidence: 0.85", 0.5), 0.85);
    assert_eq!(post("I would rather not say.", 0.6), 0.6);
    assert_eq!(post("Confidence: 1.7", 0.5), 1.0);
}

fn record(agent: &str, answer: &str, c_post: f64) -> DeliberationRecord {
    let a = arg(agent, 0, "t");
    DeliberationRecord {
        agent_id: agent.into(),
        assigned_stance_id: 0,
        prior_answer: answer.into(),
        prior_confidence: 0.5,
        supporting_argument: a,
        opposing_argument: None,
        revised_answer: answer.into(),
        confidence_rationale: String::new(),
        posterior_confidence: c_post,
    }
}

fn exact(a: &str, b: &str) -> bool {
    a == b
}

#[test]
fn verdict_examples() {
    let rs = [
        record("a", "A", 0.9),
        record("b", "A", 0.8),
        record("c", "A", 0.8),
        record("d", "A", 0.9),
        record("e", "B", 0.99),
        record("f", "B", 0.99),
    ];
    let v = final_verdict(&rs, &exact).unwrap();
    assert_eq!(v.final_answer, "A");
    assert!((v.final_confidence - 0.85).abs() < 1e-12);
    assert_eq!(v.vote_counts.get("A"), Some(&4));
    assert_eq!(v.supporting_records, ["a", "b", "c", "d"]);

    let tie = [
        record("a", "A", 0.5),
        record("b", "A", 0.5),
        record("c", "A", 0.5),
        record("d", "B", 0.7),
        record("e", "B", 0.7),
        record("f", "B", 0.7),
    ];
    assert_eq!(final_verdict(&tie, &exact).unwrap().final_answer, "B");

    let one = final_verdict(&[record("a", "X", 0.4)], &exact).unwrap();
    assert_eq!((one.final_answer.as_str(), one.final_confidence), ("X", 0.4));
    assert!(final_verdict(&[], &exact).is_none());
}

proptest! {
    #[test]
    fn verdict_properties(
        votes in prop::collection::vec((0usize..3, 0.0f64..=1.0), 1..10),
        factor in 0.01f64..=1.0,
    ) {
        let names = ["A", "B", "C"];
        let rs: Vec<DeliberationRecord> = votes
            .iter()
            .enumerate()
            .map(|(i, &(k, c))| record(&format!("r{i}"), names[k], c))
            .collect();
        let v = final_verdict(&rs, &exact).unwrap();
        let winners: Vec<f64> = rs.iter().filter(|r| v.supporting_records.contains(&r.agent_id)).map(|r| r.posterior_confidence).collect();
        let lo = winners.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = winners.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(v.final_confidence >= lo - 1e-12 && v.final_confidence <= hi + 1e-12);
        let max_votes = *v.vote_counts.values().max().unwrap();
        prop_assert_eq!(v.vote_counts[&v.final_answer], max_votes);

        let untied = v.vote_counts.values().filter(|&&n| n == max_votes).count() == 1;
        if untied {
            let scaled: Vec<DeliberationRecord> = rs
                .iter()
                .map(|r| DeliberationRecord { posterior_confidence: r.posterior_confidence * factor, ..r.clone() })
                .collect();
            prop_assert_eq!(final_verdict(&scaled, &exact).unwrap().final_answer, v.final_answer.clone());
        }
    }
}

#[test]
fn full_round_conserves_records_and_is_deterministic() {
    let rt = sim_runtime(5, params(0.6, 0.3, 0.1, 0.5));
    let stances = [stance(0, "Niels Bohr", 3, 0.9), stance(1, "Marie Curie", 2, 0.85), stance(2, "Ada", 1, 0.95)];
    let settings =
        DeliberationSettings { backbone: "g".into(), deliberators: 6, feedback_per_argument: 2, verifier: Verifier::new("g") };
    let out = deliberate(&rt, &question(), &stances, &settings, &exact).unwrap();
    assert_eq!(out.records.len(), 6);
    assert_eq!(out.arguments.len(), 6);
    assert!(out.records.iter().all(|r| (0.0..=1.0).contains(&r.posterior_confidence) && !r.revised_answer.is_empty()));
    assert!(out.records.iter().all(|r| r.opposing_argument.is_some()));
    assert_eq!(out, deliberate(&rt, &question(), &stances, &settings, &exact).unwrap());
    assert_eq!(deliberator_profiles(&settings).len(), 6);
}

#[test]
fn unanimous_stubborn_round_preserves_answer() {
    let rt = sim_runtime(5, params(0.6, 0.3, 0.1, 0.0));
    let stances = [stance(0, "Niels Bohr", 6, 0.9)];
    let settings =
        DeliberationSettings { backbone: "g".into(), deliberators: 6, feedback_per_argument: 2, verifier: Verifier::new("g") };
    let out = deliberate(&rt, &question(), &stances, &settings, &exact).unwrap();
    assert_eq!(out.verdict.final_answer, "Niels Bohr");
    assert!(out.records.iter().all(|r| r.opposing_argument.is_none()));
    let mean = out.records.iter().map(|r| r.posterior_confidence).sum::<f64>() / 6.0;
    assert!((out.verdict.final_confidence - mean).abs() < 1e-12);
}
