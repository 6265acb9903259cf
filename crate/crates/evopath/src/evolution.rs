//! The evolutionary discovery loop: sample few-shot examples, build the
//! prompt, generate, parse, clean, score, insert; per-round statistics;
//! stagnation-based termination; resumable run directories.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::atoms::{build_catalog, AtomCatalog};
use crate::buffer::{BufferConfig, ReplayBuffer, ScoredMetaPath};
use crate::cleaner::{clean, CleanOptions, CleanReport, CorrectionScope, RejectCounts};
use crate::error::{AtomKind, EvoPathError, Result};
use crate::generator::{
    build_prompt, build_provider, parse_generation, FewShotExample, PromptSpec, ProviderConfig,
};
use crate::hin::{unknown_atom, FactSet, Hin, RelationId, SchemaGraph};
use crate::matcher::{batch_score_opts, MatchOptions};
use crate::metapath::MetaPath;
use crate::rng::{stream_rng, StreamDomain};
use crate::sampler::{sample_paths, summarize, WalkConfig};

fn default_max_rounds() -> u32 {
    30
}
fn default_stagnation() -> u32 {
    5
}
fn default_expand_top_k() -> usize {
    3
}
fn default_min_similarity() -> f64 {
    0.5
}
fn default_summarize_cap() -> usize {
    8
}
fn default_max_provider_failures() -> u32 {
    3
}
fn default_true() -> bool {
    true
}

/// Which prompt sections are rendered; the three toggles cover the prompt
/// ablation variants.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PromptFlags {
    #[serde(default = "default_true")]
    pub include_scores: bool,
    #[serde(default = "default_true")]
    pub include_few_shot: bool,
    #[serde(default = "default_true")]
    pub include_background: bool,
    #[serde(default)]
    pub include_descriptions: bool,
}

impl Default for PromptFlags {
    fn default() -> Self {
        PromptFlags {
            include_scores: true,
            include_few_shot: true,
            include_background: true,
            include_descriptions: false,
        }
    }
}

/// Full configuration of one discovery run for one target relation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub target_relation: String,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: u32,
    #[serde(default = "default_stagnation")]
    pub stagnation_rounds: u32,
    #[serde(default)]
    pub walk: WalkConfig,
    #[serde(default)]
    pub buffer: BufferConfig,
    #[serde(default)]
    pub provider: ProviderConfig,
    #[serde(default = "default_expand_top_k")]
    pub expand_top_k: usize,
    #[serde(default = "default_min_similarity")]
    pub min_similarity: f64,
    #[serde(default = "default_summarize_cap")]
    pub summarize_cap: usize,
    #[serde(default = "default_max_provider_failures")]
    pub max_provider_failures: u32,
    #[serde(default)]
    pub refresh_catalog: bool,
    #[serde(default)]
    pub step_cap: Option<usize>,
    #[serde(default)]
    pub prompt: PromptFlags,
    #[serde(default)]
    pub rng_seed: u64,
}

impl RunConfig {
    pub fn new(target_relation: &str) -> RunConfig {
        RunConfig {
            target_relation: target_relation.to_owned(),
            max_rounds: default_max_rounds(),
            stagnation_rounds: default_stagnation(),
            walk: WalkConfig::default(),
            buffer: BufferConfig::default(),
            provider: ProviderConfig::default(),
            expand_top_k: default_expand_top_k(),
            min_similarity: default_min_similarity(),
            summarize_cap: default_summarize_cap(),
            max_provider_failures: default_max_provider_failures(),
            refresh_catalog: false,
            step_cap: None,
            prompt: PromptFlags::default(),
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_relation.is_empty() {
            return Err(EvoPathError::Config("target_relation is required".into()));
        }
        if self.max_rounds < 1 {
            return Err(EvoPathError::Config("max_rounds must be >= 1".into()));
        }
        if self.stagnation_rounds < 1 {
            return Err(EvoPathError::Config("stagnation_rounds must be >= 1".into()));
        }
        if self.summarize_cap < 1 {
            return Err(EvoPathError::Config("summarize_cap must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.min_similarity) {
            return Err(EvoPathError::Config(
                "min_similarity must be in [0, 1]".into(),
            ));
        }
        self.walk.validate()?;
        self.buffer.validate()
    }

    /// The walk seed follows the top-level seed unless set explicitly.
    pub fn resolve_seeds(&mut self) {
        if self.walk.rng_seed == 0 {
            self.walk.rng_seed = self.rng_seed;
        }
    }
}

/// Serializable digest of a [`CleanReport`].
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct CleanSummary {
    pub accepted: usize,
    pub corrected: usize,
    pub rejected: RejectCounts,
    pub error_rate: f64,
}

impl From<&CleanReport> for CleanSummary {
    fn from(report: &CleanReport) -> Self {
        CleanSummary {
            accepted: report.accepted_count,
            corrected: report.corrected_count,
            rejected: report.rejected,
            error_rate: report.error_rate(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundStats {
    pub round: u32,
    pub prompts_issued: u32,
    pub candidates_parsed: usize,
    pub dropped_lines: usize,
    #[serde(default)]
    pub clean: CleanSummary,
    pub score_failures: usize,
    pub new_metapaths: usize,
    pub best_sum_score: f64,
    pub seconds: f64,
    #[serde(default)]
    pub provider_failed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StopReason {
    MaxRounds,
    Stagnation { at_round: u32 },
    /// Consecutive provider failures exceeded the budget; the run aborted
    /// with partial results persisted.
    ProviderFailures { at_round: u32 },
}

#[derive(Debug)]
pub struct RunOutcome {
    pub buffer: ReplayBuffer,
    pub catalog: AtomCatalog,
    pub rounds: Vec<RoundStats>,
    pub stop: StopReason,
}

/// One discovery engine per target relation.
pub struct Evolution<'a> {
    hin: &'a Hin,
    schema: SchemaGraph,
    cfg: RunConfig,
    target: RelationId,
    excluded: FactSet,
    run_dir: Option<PathBuf>,
}

impl<'a> Evolution<'a> {
    pub fn new(hin: &'a Hin, mut cfg: RunConfig) -> Result<Evolution<'a>> {
        cfg.validate()?;
        cfg.resolve_seeds();
        let target = hin
            .relation_id(&cfg.target_relation)
            .ok_or_else(|| unknown_atom(AtomKind::Relation, &cfg.target_relation))?;
        Ok(Evolution {
            hin,
            schema: SchemaGraph::build(hin),
            cfg,
            target,
            excluded: FactSet::new(),
            run_dir: None,
        })
    }

    /// Facts masked during every scoring call (held-out test facts).
    pub fn with_excluded_facts(mut self, excluded: FactSet) -> Self {
        self.excluded = excluded;
        self
    }

    /// Persist state under this directory; enables resuming.
    pub fn with_run_dir(mut self, dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir.join("prompts"))?;
        self.run_dir = Some(dir.to_owned());
        Ok(self)
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn schema(&self) -> &SchemaGraph {
        &self.schema
    }

    pub fn target(&self) -> RelationId {
        self.target
    }

    fn excluded_opt(&self) -> Option<&FactSet> {
        if self.excluded.is_empty() {
            None
        } else {
            Some(&self.excluded)
        }
    }

    fn match_opts(&self) -> MatchOptions {
        MatchOptions {
            step_cap: self.cfg.step_cap,
        }
    }

    /// Seed the buffer: walk, summarize, score and insert, and build the
    /// atom catalog from the seed meta-paths.
    pub fn bootstrap(&self) -> Result<(ReplayBuffer, AtomCatalog)> {
        let instances = sample_paths(self.hin, self.target, &self.cfg.walk)?;
        if instances.is_empty() {
            return Err(EvoPathError::NoSeedInstances);
        }
        let mut seeds = summarize(self.hin, &instances, self.cfg.summarize_cap);
        // One-hop restatements of the target are banned everywhere.
        seeds.retain(|m| !m.is_trivial_for(self.target));
        if seeds.is_empty() {
            return Err(EvoPathError::NoSeedInstances);
        }
        let catalog = build_catalog(
            self.hin,
            &seeds,
            self.cfg.expand_top_k,
            self.cfg.min_similarity,
        );
        let scored = self.score_new(&seeds, 0)?;
        if scored.is_empty() {
            return Err(EvoPathError::NoSeedInstances);
        }
        let mut buffer = ReplayBuffer::new(self.cfg.buffer);
        buffer.insert(scored);
        Ok((buffer, catalog))
    }

    fn score_new(&self, metapaths: &[MetaPath], round: u32) -> Result<Vec<ScoredMetaPath>> {
        let results = batch_score_opts(
            self.hin,
            metapaths,
            self.target,
            self.excluded_opt(),
            self.match_opts(),
        );
        let mut scored = Vec::with_capacity(metapaths.len());
        for (m, result) in metapaths.iter().zip(results) {
            match result {
                Ok(score) => scored.push(ScoredMetaPath {
                    metapath: m.clone(),
                    score,
                    target_relation: self.target,
                    generation_round: round,
                }),
                Err(EvoPathError::NoRelationSupport { relation }) => {
                    return Err(EvoPathError::NoRelationSupport { relation })
                }
                Err(_) => {} // per-item failure (e.g. step cap); drop the item
            }
        }
        Ok(scored)
    }

    /// Run the loop until max rounds, stagnation or provider abort. Resumes
    /// from the run directory when it already holds a persisted buffer.
    pub fn run(&self) -> Result<RunOutcome> {
        let mut rounds: Vec<RoundStats> = Vec::new();
        let mut buffer;
        let mut catalog;

        let resumed = match &self.run_dir {
            Some(dir) if dir.join("buffer.jsonl").exists() => {
                buffer = ReplayBuffer::load_jsonl(self.hin, &dir.join("buffer.jsonl"), self.cfg.buffer)?;
                rounds = load_rounds(&dir.join("rounds.jsonl"))?;
                let seed_paths: Vec<MetaPath> = buffer
                    .entries()
                    .iter()
                    .filter(|e| e.generation_round == 0)
                    .map(|e| e.metapath.clone())
                    .collect();
                catalog = build_catalog(
                    self.hin,
                    &seed_paths,
                    self.cfg.expand_top_k,
                    self.cfg.min_similarity,
                );
                true
            }
            _ => {
                let started = Instant::now();
                let (b, c) = self.bootstrap()?;
                buffer = b;
                catalog = c;
                rounds.push(RoundStats {
                    round: 0,
                    prompts_issued: 0,
                    candidates_parsed: buffer.len(),
                    dropped_lines: 0,
                    clean: CleanSummary::default(),
                    score_failures: 0,
                    new_metapaths: buffer.len(),
                    best_sum_score: buffer.best_by_sum().map(|e| e.score.sum()).unwrap_or(0.0),
                    seconds: started.elapsed().as_secs_f64(),
                    provider_failed: false,
                });
                false
            }
        };

        let _ = resumed;
        if let Some(dir) = &self.run_dir {
            std::fs::write(dir.join("run.json"), serde_json::to_string_pretty(&self.cfg)?)?;
            std::fs::write(dir.join("catalog.tsv"), catalog.dump(self.hin))?;
            self.persist(dir, &buffer, &rounds, true)?;
        }

        let clean_opts = CleanOptions {
            max_length: self.cfg.walk.max_length,
            min_similarity: self.cfg.min_similarity,
            scope: CorrectionScope::Catalog,
        };

        let mut streak = trailing_stagnation(&rounds);
        let mut consecutive_failures = 0u32;
        let next_round = rounds.iter().map(|r| r.round).max().unwrap_or(0) + 1;
        let mut stop = StopReason::MaxRounds;

        for round in next_round..=self.cfg.max_rounds {
            if streak >= self.cfg.stagnation_rounds {
                stop = StopReason::Stagnation { at_round: round };
                break;
            }
            let started = Instant::now();

            if self.cfg.refresh_catalog {
                let paths: Vec<MetaPath> =
                    buffer.entries().iter().map(|e| e.metapath.clone()).collect();
                catalog = build_catalog(
                    self.hin,
                    &paths,
                    self.cfg.expand_top_k,
                    self.cfg.min_similarity,
                );
            }

            let mut sample_rng = stream_rng(self.cfg.rng_seed, StreamDomain::BufferSample, round as u64);
            let few_shot = buffer.sample_few_shot(&mut sample_rng);
            let mut spec = PromptSpec::new(&self.cfg.target_relation, self.cfg.walk.max_length);
            spec.include_scores = self.cfg.prompt.include_scores;
            spec.include_few_shot = self.cfg.prompt.include_few_shot;
            spec.include_background = self.cfg.prompt.include_background;
            spec.include_descriptions = self.cfg.prompt.include_descriptions;
            spec.candidate_relations = catalog.relation_labels(self.hin);
            spec.candidate_types = catalog.type_labels(self.hin);
            spec.few_shot = few_shot
                .iter()
                .map(|e| FewShotExample {
                    rendering: e.metapath.render(self.hin),
                    coverage: e.score.coverage,
                    confidence: e.score.confidence,
                    description: Some(e.metapath.describe(self.hin)),
                })
                .collect();
            let prompt = build_prompt(&spec)?;

            let mut provider_rng = stream_rng(self.cfg.rng_seed, StreamDomain::Provider, round as u64);
            let generation = {
                let provider = build_provider(
                    &self.cfg.provider,
                    self.hin,
                    &self.schema,
                    &catalog,
                    self.target,
                    self.cfg.walk.max_length,
                )?;
                provider.generate(&prompt, &mut provider_rng)
            };

            let stats = match generation {
                Err(err) => {
                    consecutive_failures += 1;
                    let stats = RoundStats {
                        round,
                        prompts_issued: 1,
                        candidates_parsed: 0,
                        dropped_lines: 0,
                        clean: CleanSummary::default(),
                        score_failures: 0,
                        new_metapaths: 0,
                        best_sum_score: buffer.best_by_sum().map(|e| e.score.sum()).unwrap_or(0.0),
                        seconds: started.elapsed().as_secs_f64(),
                        provider_failed: true,
                    };
                    rounds.push(stats);
                    if let Some(dir) = &self.run_dir {
                        save_prompt(dir, round, &prompt, &format!("<provider error: {err}>"))?;
                        self.persist(dir, &buffer, &rounds, true)?;
                    }
                    if consecutive_failures > self.cfg.max_provider_failures {
                        return Ok(RunOutcome {
                            buffer,
                            catalog,
                            rounds,
                            stop: StopReason::ProviderFailures { at_round: round },
                        });
                    }
                    streak += 1;
                    continue;
                }
                Ok(raw) => {
                    consecutive_failures = 0;
                    let parsed = parse_generation(&raw);
                    let report = clean(
                        self.hin,
                        &self.schema,
                        &catalog,
                        &parsed.sequences,
                        self.target,
                        &clean_opts,
                    );
                    let fresh: Vec<MetaPath> = report
                        .accepted
                        .iter()
                        .filter(|m| !buffer.contains(m, self.target))
                        .cloned()
                        .collect();
                    let scored = self.score_new(&fresh, round)?;
                    let score_failures = fresh.len() - scored.len();
                    let inserted = buffer.insert(scored);
                    if let Some(dir) = &self.run_dir {
                        save_prompt(dir, round, &prompt, &raw.text)?;
                    }
                    RoundStats {
                        round,
                        prompts_issued: 1,
                        candidates_parsed: parsed.sequences.len(),
                        dropped_lines: parsed.dropped_lines,
                        clean: CleanSummary::from(&report),
                        score_failures,
                        new_metapaths: inserted,
                        best_sum_score: buffer.best_by_sum().map(|e| e.score.sum()).unwrap_or(0.0),
                        seconds: started.elapsed().as_secs_f64(),
                        provider_failed: false,
                    }
                }
            };

            streak = if stats.new_metapaths == 0 { streak + 1 } else { 0 };
            rounds.push(stats);
            if let Some(dir) = &self.run_dir {
                self.persist(dir, &buffer, &rounds, true)?;
            }
        }

        Ok(RunOutcome {
            buffer,
            catalog,
            rounds,
            stop,
        })
    }

    fn persist(
        &self,
        dir: &Path,
        buffer: &ReplayBuffer,
        rounds: &[RoundStats],
        rewrite_rounds: bool,
    ) -> Result<()> {
        let tmp = dir.join("buffer.jsonl.tmp");
        buffer.save_jsonl(self.hin, &tmp)?;
        std::fs::rename(&tmp, dir.join("buffer.jsonl"))?;
        if rewrite_rounds {
            let mut w = File::create(dir.join("rounds.jsonl"))?;
            for r in rounds {
                serde_json::to_writer(&mut w, r)?;
                w.write_all(b"\n")?;
            }
        }
        Ok(())
    }
}

fn save_prompt(dir: &Path, round: u32, prompt: &str, response: &str) -> Result<()> {
    let prompts = dir.join("prompts");
    std::fs::write(prompts.join(format!("round_{round:04}.prompt.txt")), prompt)?;
    std::fs::write(prompts.join(format!("round_{round:04}.response.txt")), response)?;
    Ok(())
}

fn load_rounds(path: &Path) -> Result<Vec<RoundStats>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut rounds = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            rounds.push(serde_json::from_str(&line)?);
        }
    }
    Ok(rounds)
}

fn trailing_stagnation(rounds: &[RoundStats]) -> u32 {
    rounds
        .iter()
        .rev()
        .take_while(|r| r.round > 0 && r.new_metapaths == 0)
        .count() as u32
}
