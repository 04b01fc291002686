#![allow(dead_code)]

use collabcal::backend::sim::SimAgentParams;
use collabcal::config::RunConfig;
use collabcal::dataset::{DatasetRecord, Split};

pub fn record(id: &str, split: Split) -> DatasetRecord {
    DatasetRecord {
        id: id.to_string(),
        question: format!("Synthetic question {id}?"),
        reference_answers: vec![format!("answer {id}"), format!("the answer {id}")],
        split,
        metadata: Default::default(),
    }
}

/// `validation` validation records followed by `test` test records.
pub fn synthetic(validation: usize, test: usize) -> Vec<DatasetRecord> {
    (0..validation)
        .map(|i| record(&format!("v{i:03}"), Split::Validation))
        .chain((0..test).map(|i| record(&format!("t{i:03}"), Split::Test)))
        .collect()
}

pub fn params(accuracy: f64, bias: f64, noise: f64, persuadability: f64) -> SimAgentParams {
    SimAgentParams {
        accuracy,
        confidence_bias: bias,
        confidence_noise: noise,
        persuadability,
        seed_namespace: String::new(),
    }
}

pub fn sim_config(seed: u64, agents: SimAgentParams) -> RunConfig {
    let mut c = RunConfig::default();
    c.seed = seed;
    c.sim.default = agents;
    c
}

pub fn to_jsonl(records: &[DatasetRecord]) -> String {
    records.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect()
}

use std::sync::{Arc, Mutex};

use collabcal::backend::{Backbone, BackendError, CompletionRequest, CompletionResponse, Provider};
use collabcal::runtime::Runtime;

type Script = dyn Fn(&CompletionRequest) -> Result<CompletionResponse, BackendError> + Send + Sync;

/// Replies via a closure and records every request it sees.
pub struct Scripted {
    pub logprobs: bool,
    pub script: Box<Script>,
    pub seen: Mutex<Vec<CompletionRequest>>,
}

impl Scripted {
    pub fn new(script: impl Fn(&CompletionRequest) -> Result<CompletionResponse, BackendError> + Send + Sync + 'static) -> Arc<Self> {
        Arc::new(Self { logprobs: false, script: Box::new(script), seen: Mutex::new(Vec::new()) })
    }

    pub fn with_logprobs(
        script: impl Fn(&CompletionRequest) -> Result<CompletionResponse, BackendError> + Send + Sync + 'static,
    ) -> Arc<Self> {
        Arc::new(Self { logprobs: true, script: Box::new(script), seen: Mutex::new(Vec::new()) })
    }

    pub fn constant(text: &'static str) -> Arc<Self> {
        Self::new(move |_| Ok(CompletionResponse::text(text)))
    }

    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.seen.lock().unwrap().clone()
    }
}

impl Provider for Scripted {
    fn name(&self) -> &str {
        "scripted"
    }

    fn supports_token_probs(&self) -> bool {
        self.logprobs
    }

    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        self.seen.lock().unwrap().push(request.clone());
        (self.script)(request)
    }
}

pub fn runtime_with(name: &str, provider: Arc<dyn Provider>) -> Runtime {
    Runtime::new([Backbone { name: name.to_string(), model_id: "m".into(), provider }], 7)
}

/// Agent id and call kind of a request.
pub fn who(request: &CompletionRequest) -> (String, String) {
    let tag = request.tag.as_ref().expect("runtime calls are tagged");
    (tag.agent_id.clone(), tag.kind.as_str().to_string())
}
