//! Candidate generation backends: a chat-completion HTTP client for real
//! models and a deterministic schema-guided mutation generator for offline
//! and CI operation.

use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{parse_candidate_line, RawGeneration};
use crate::atoms::AtomCatalog;
use crate::error::{EvoPathError, Result};
use crate::hin::{Hin, RelationId, SchemaGraph, TypeId};
use crate::metapath::MetaPath;

fn default_temperature() -> f64 {
    0.7
}
fn default_max_tokens() -> u32 {
    512
}
fn default_timeout_secs() -> u64 {
    30
}
fn default_retries() -> u32 {
    2
}
fn default_max_candidates() -> usize {
    20
}

/// Provider selection and wire settings. Secrets are only ever named by
/// environment variable, never stored.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderConfig {
    HttpChat {
        endpoint: String,
        model: String,
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default = "default_temperature")]
        temperature: f64,
        #[serde(default = "default_max_tokens")]
        max_tokens: u32,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: u64,
        #[serde(default = "default_retries")]
        retries: u32,
    },
    Mutation {
        #[serde(default = "default_max_candidates")]
        max_candidates: usize,
    },
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig::Mutation {
            max_candidates: default_max_candidates(),
        }
    }
}

pub trait GenerationProvider {
    fn generate(&self, prompt: &str, rng: &mut ChaCha8Rng) -> Result<RawGeneration>;
    fn name(&self) -> &'static str;
}

/// Build a provider from its config. The mutation provider needs the graph
/// context; the HTTP provider resolves its API key from the environment at
/// construction so misconfiguration fails at startup.
pub fn build_provider<'a>(
    cfg: &ProviderConfig,
    hin: &'a Hin,
    schema: &'a SchemaGraph,
    catalog: &'a AtomCatalog,
    target: RelationId,
    max_length: usize,
) -> Result<Box<dyn GenerationProvider + 'a>> {
    match cfg {
        ProviderConfig::HttpChat {
            endpoint,
            model,
            api_key_env,
            temperature,
            max_tokens,
            timeout_secs,
            retries,
        } => {
            let api_key = match api_key_env {
                Some(var) => Some(std::env::var(var).map_err(|_| {
                    EvoPathError::Config(format!(
                        "api key environment variable '{var}' is not set"
                    ))
                })?),
                None => None,
            };
            Ok(Box::new(HttpProvider {
                endpoint: endpoint.trim_end_matches('/').to_owned(),
                model: model.clone(),
                api_key,
                temperature: *temperature,
                max_tokens: *max_tokens,
                timeout: Duration::from_secs(*timeout_secs),
                retries: *retries,
            }))
        }
        ProviderConfig::Mutation { max_candidates } => Ok(Box::new(MutationProvider {
            hin,
            schema,
            catalog,
            target,
            max_length,
            max_candidates: *max_candidates,
        })),
    }
}

/// Blocking chat-completion client. One user message per request; the
/// assistant text of the first choice is the generation.
pub struct HttpProvider {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    temperature: f64,
    max_tokens: u32,
    timeout: Duration,
    retries: u32,
}

impl HttpProvider {
    fn request_once(&self, agent: &ureq::Agent, prompt: &str) -> std::result::Result<RawGeneration, (Option<u16>, String)> {
        let started = Instant::now();
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        });
        let url = format!("{}/chat/completions", self.endpoint);
        let mut request = agent.post(&url).header("content-type", "application/json");
        if let Some(key) = &self.api_key {
            request = request.header("authorization", &format!("Bearer {key}"));
        }
        let mut response = match request.send_json(&body) {
            Ok(r) => r,
            Err(ureq::Error::StatusCode(code)) => {
                return Err((Some(code), format!("chat endpoint returned status {code}")))
            }
            Err(e) => return Err((None, e.to_string())),
        };
        let value: serde_json::Value = response
            .body_mut()
            .read_json()
            .map_err(|e| (None, format!("unreadable response body: {e}")))?;
        let text = value
            .get("choices")
            .and_then(|c| c.get(0))
            .and_then(|c| c.get("message"))
            .and_then(|m| m.get("content"))
            .and_then(|t| t.as_str())
            .unwrap_or("")
            .to_owned();
        let usage = value.get("usage");
        Ok(RawGeneration {
            text,
            latency: started.elapsed(),
            prompt_tokens: usage
                .and_then(|u| u.get("prompt_tokens"))
                .and_then(|v| v.as_u64()),
            completion_tokens: usage
                .and_then(|u| u.get("completion_tokens"))
                .and_then(|v| v.as_u64()),
        })
    }
}

impl GenerationProvider for HttpProvider {
    fn generate(&self, prompt: &str, _rng: &mut ChaCha8Rng) -> Result<RawGeneration> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let mut last = (None, String::from("no attempt made"));
        for _ in 0..=self.retries {
            match self.request_once(&agent, prompt) {
                Ok(raw) => return Ok(raw),
                Err(err) => last = err,
            }
        }
        Err(EvoPathError::Provider {
            status: last.0,
            message: last.1,
        })
    }

    fn name(&self) -> &'static str {
        "http_chat"
    }
}

/// Deterministic offline generator: parses the few-shot meta-paths out of
/// the prompt and emits schema-valid single edits of them.
///
/// Its defining contract is closure: every emitted candidate uses catalog
/// atoms only, every step is a schema edge, length stays within the bound
/// and the bare target relation is never restated, so the cleaner accepts
/// its entire output.
pub struct MutationProvider<'a> {
    hin: &'a Hin,
    schema: &'a SchemaGraph,
    catalog: &'a AtomCatalog,
    target: RelationId,
    max_length: usize,
    max_candidates: usize,
}

impl<'a> MutationProvider<'a> {
    pub fn new(
        hin: &'a Hin,
        schema: &'a SchemaGraph,
        catalog: &'a AtomCatalog,
        target: RelationId,
        max_length: usize,
        max_candidates: usize,
    ) -> Self {
        MutationProvider {
            hin,
            schema,
            catalog,
            target,
            max_length,
            max_candidates,
        }
    }

    fn parse_examples(&self, prompt: &str) -> Vec<MetaPath> {
        let mut examples = Vec::new();
        for line in prompt.lines() {
            let Some(tokens) = parse_candidate_line(line) else {
                continue;
            };
            if let Ok(m) = MetaPath::resolve(self.hin, &tokens) {
                examples.push(m);
            }
        }
        examples
    }

    fn relation_alternatives(&self, m: &MetaPath, pos: usize) -> Vec<RelationId> {
        let (t1, t2) = (m.types()[pos], m.types()[pos + 1]);
        let single_hop = m.relations().len() == 1;
        let mut alts: Vec<RelationId> = self
            .catalog
            .relations()
            .filter(|&r| r != m.relations()[pos])
            .filter(|&r| !(single_hop && r == self.target))
            .filter(|&r| self.schema.has_edge(t1, r, t2))
            .collect();
        alts.sort_unstable();
        alts
    }

    fn type_alternatives(&self, m: &MetaPath, slot: usize) -> Vec<TypeId> {
        let last = m.types().len() - 1;
        let mut alts: Vec<TypeId> = self
            .catalog
            .types()
            .filter(|&t| t != m.types()[slot])
            .filter(|&t| {
                let left_ok = slot == 0
                    || self
                        .schema
                        .has_edge(m.types()[slot - 1], m.relations()[slot - 1], t);
                let right_ok = slot == last
                    || self.schema.has_edge(t, m.relations()[slot], m.types()[slot + 1]);
                left_ok && right_ok
            })
            .collect();
        alts.sort_unstable();
        alts
    }

    fn extension_alternatives(&self, m: &MetaPath) -> Vec<(RelationId, TypeId)> {
        if m.types().len() >= self.max_length {
            return Vec::new();
        }
        let last = *m.types().last().expect("non-empty");
        self.schema
            .out_edges(last)
            .iter()
            .copied()
            .filter(|&(r, t)| self.catalog.contains_relation(r) && self.catalog.contains_type(t))
            .collect()
    }

    fn emit(&self, candidates: &mut Vec<MetaPath>, seen: &mut std::collections::HashSet<MetaPath>, m: MetaPath) {
        if m.is_trivial_for(self.target) {
            return;
        }
        if seen.insert(m.clone()) {
            candidates.push(m);
        }
    }
}

impl GenerationProvider for MutationProvider<'_> {
    fn generate(&self, prompt: &str, rng: &mut ChaCha8Rng) -> Result<RawGeneration> {
        let examples = self.parse_examples(prompt);
        let mut candidates = Vec::new();
        let mut seen = std::collections::HashSet::new();

        for m in &examples {
            for pos in 0..m.relations().len() {
                let alts = self.relation_alternatives(m, pos);
                if !alts.is_empty() {
                    let pick = alts[rng.random_range(0..alts.len())];
                    let mut relations = m.relations().to_vec();
                    relations[pos] = pick;
                    let mutant = MetaPath::new(m.types().to_vec(), relations)
                        .expect("same arity");
                    self.emit(&mut candidates, &mut seen, mutant);
                }
            }
            for slot in 0..m.types().len() {
                let alts = self.type_alternatives(m, slot);
                if !alts.is_empty() {
                    let pick = alts[rng.random_range(0..alts.len())];
                    let mut types = m.types().to_vec();
                    types[slot] = pick;
                    let mutant = MetaPath::new(types, m.relations().to_vec())
                        .expect("same arity");
                    self.emit(&mut candidates, &mut seen, mutant);
                }
            }
            let extensions = self.extension_alternatives(m);
            if !extensions.is_empty() {
                let (r, t) = extensions[rng.random_range(0..extensions.len())];
                let mut types = m.types().to_vec();
                let mut relations = m.relations().to_vec();
                types.push(t);
                relations.push(r);
                let mutant = MetaPath::new(types, relations).expect("arity grows together");
                self.emit(&mut candidates, &mut seen, mutant);
            }
            if m.relations().len() >= 2 {
                let types = m.types()[..m.types().len() - 1].to_vec();
                let relations = m.relations()[..m.relations().len() - 1].to_vec();
                let mutant = MetaPath::new(types, relations).expect("arity shrinks together");
                self.emit(&mut candidates, &mut seen, mutant);
            }
        }

        candidates.truncate(self.max_candidates);
        let text = candidates
            .iter()
            .map(|m| m.render(self.hin))
            .collect::<Vec<_>>()
            .join("\n");
        Ok(RawGeneration::from_text(text))
    }

    fn name(&self) -> &'static str {
        "mutation"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atoms::build_catalog;
    use crate::rng::{stream_rng, StreamDomain};

    fn context() -> (Hin, SchemaGraph) {
        let hin = Hin::builder()
            .fact("a", "livesIn", "c")
            .fact("a", "bornIn", "c")
            .fact("c", "partOf", "r")
            .typed("a", "Person")
            .typed("c", "City")
            .typed("r", "Region")
            .build()
            .unwrap();
        let schema = SchemaGraph::build(&hin);
        (hin, schema)
    }

    #[test]
    fn mutation_provider_is_deterministic() {
        let (hin, schema) = context();
        let seed = MetaPath::from_labels(
            &hin,
            &["Person".into(), "City".into()],
            &["livesIn".into()],
        )
        .unwrap();
        let catalog = build_catalog(&hin, &[seed.clone()], 3, 0.0);
        let rq = hin.relation_id("bornIn").unwrap();
        let provider = MutationProvider::new(&hin, &schema, &catalog, rq, 3, 20);
        let prompt = format!("Here are some examples:\n{}", seed.render(&hin));
        let a = provider
            .generate(&prompt, &mut stream_rng(1, StreamDomain::Provider, 0))
            .unwrap();
        let b = provider
            .generate(&prompt, &mut stream_rng(1, StreamDomain::Provider, 0))
            .unwrap();
        assert_eq!(a.text, b.text);
        assert!(!a.text.is_empty());
    }

    #[test]
    fn mutation_provider_never_restates_the_target() {
        let (hin, schema) = context();
        let seed = MetaPath::from_labels(
            &hin,
            &["Person".into(), "City".into()],
            &["livesIn".into()],
        )
        .unwrap();
        let catalog = build_catalog(&hin, &[seed.clone()], 5, 0.0);
        let rq = hin.relation_id("bornIn").unwrap();
        let provider = MutationProvider::new(&hin, &schema, &catalog, rq, 3, 50);
        let prompt = seed.render(&hin);
        let out = provider
            .generate(&prompt, &mut stream_rng(2, StreamDomain::Provider, 0))
            .unwrap();
        for line in out.text.lines() {
            let tokens = parse_candidate_line(line).unwrap();
            let m = MetaPath::resolve(&hin, &tokens).unwrap();
            assert!(!m.is_trivial_for(rq), "trivial candidate: {line}");
        }
    }

    #[test]
    fn provider_config_round_trips_through_json() {
        let cfg = ProviderConfig::HttpChat {
            endpoint: "http://localhost:8000/v1".into(),
            model: "m".into(),
            api_key_env: None,
            temperature: 0.7,
            max_tokens: 512,
            timeout_secs: 30,
            retries: 2,
        };
        let json = serde_json::to_string(&cfg).unwrap();
        let back: ProviderConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn missing_api_key_env_fails_at_startup() {
        let (hin, schema) = context();
        let catalog = AtomCatalog::default();
        let rq = hin.relation_id("bornIn").unwrap();
        let cfg = ProviderConfig::HttpChat {
            endpoint: "http://localhost:1".into(),
            model: "m".into(),
            api_key_env: Some("EVOPATH_TEST_MISSING_KEY".into()),
            temperature: 0.7,
            max_tokens: 16,
            timeout_secs: 1,
            retries: 0,
        };
        let err = build_provider(&cfg, &hin, &schema, &catalog, rq, 3).err().unwrap();
        assert!(err.to_string().contains("EVOPATH_TEST_MISSING_KEY"));
    }
}
