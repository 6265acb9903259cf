//! Deduplicated store of scored meta-paths with stochastic prioritized
//! sampling of few-shot examples.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hin::{Hin, RelationId};
use crate::matcher::MetaPathScore;
use crate::metapath::MetaPath;

/// Floor applied to direct priorities so zero-score paths keep a non-zero
/// chance of being sampled.
pub const PRIORITY_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Priority is the score itself (floored at [`PRIORITY_EPSILON`]).
    Direct,
    /// Priority is `1 / rank` after sorting by score, ties by insertion.
    Rank,
    /// Uniform baseline.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    Confidence,
    Coverage,
    Sum,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BufferConfig {
    pub strategy: Strategy,
    pub score_mode: ScoreMode,
    /// `None` keeps the buffer unbounded.
    pub capacity: Option<usize>,
    pub few_shot_n: usize,
}

impl Default for BufferConfig {
    fn default() -> Self {
        BufferConfig {
            strategy: Strategy::Rank,
            score_mode: ScoreMode::Sum,
            capacity: None,
            few_shot_n: 30,
        }
    }
}

impl BufferConfig {
    pub fn validate(&self) -> Result<()> {
        if self.few_shot_n < 1 {
            return Err(crate::error::EvoPathError::Config(
                "few_shot_n must be >= 1".into(),
            ));
        }
        if self.capacity == Some(0) {
            return Err(crate::error::EvoPathError::Config(
                "capacity must be >= 1 when bounded".into(),
            ));
        }
        Ok(())
    }
}

/// A meta-path with its plausibility score for one target relation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredMetaPath {
    pub metapath: MetaPath,
    pub score: MetaPathScore,
    pub target_relation: RelationId,
    pub generation_round: u32,
}

impl ScoredMetaPath {
    fn mode_value(&self, mode: ScoreMode) -> f64 {
        match mode {
            ScoreMode::Confidence => self.score.confidence,
            ScoreMode::Coverage => self.score.coverage,
            ScoreMode::Sum => self.score.sum(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReplayBuffer {
    cfg: BufferConfig,
    entries: Vec<ScoredMetaPath>,
    index: HashMap<(MetaPath, RelationId), usize>,
}

impl ReplayBuffer {
    pub fn new(cfg: BufferConfig) -> ReplayBuffer {
        ReplayBuffer {
            cfg,
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn config(&self) -> &BufferConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ScoredMetaPath] {
        &self.entries
    }

    pub fn contains(&self, metapath: &MetaPath, target: RelationId) -> bool {
        self.index.contains_key(&(metapath.clone(), target))
    }

    /// Highest entry by combined score, ties broken by insertion order.
    pub fn best_by_sum(&self) -> Option<&ScoredMetaPath> {
        self.entries
            .iter()
            .reduce(|best, e| if e.score.sum() > best.score.sum() { e } else { best })
    }

    /// Insert new entries, dropping duplicates (the existing entry wins) and
    /// evicting lowest-priority entries when a capacity is set. Returns the
    /// number of entries actually inserted.
    pub fn insert(&mut self, items: Vec<ScoredMetaPath>) -> usize {
        let mut inserted = 0;
        for item in items {
            let key = (item.metapath.clone(), item.target_relation);
            if self.index.contains_key(&key) {
                continue;
            }
            self.index.insert(key, self.entries.len());
            self.entries.push(item);
            inserted += 1;
        }
        if let Some(cap) = self.cfg.capacity {
            while self.entries.len() > cap {
                let min_idx = self
                    .entries
                    .iter()
                    .enumerate()
                    .min_by(|(ia, a), (ib, b)| {
                        let va = a.mode_value(self.cfg.score_mode);
                        let vb = b.mode_value(self.cfg.score_mode);
                        // Evict the lowest score; among ties, the newest.
                        va.partial_cmp(&vb).unwrap().then(ib.cmp(ia))
                    })
                    .map(|(i, _)| i)
                    .expect("non-empty");
                self.entries.remove(min_idx);
            }
            self.index = self
                .entries
                .iter()
                .enumerate()
                .map(|(i, e)| ((e.metapath.clone(), e.target_relation), i))
                .collect();
        }
        inserted
    }

    /// Normalized sampling probabilities under the configured strategy.
    pub fn priorities(&self) -> Vec<f64> {
        let n = self.entries.len();
        if n == 0 {
            return Vec::new();
        }
        let raw: Vec<f64> = match self.cfg.strategy {
            Strategy::Direct => self
                .entries
                .iter()
                .map(|e| e.mode_value(self.cfg.score_mode).max(PRIORITY_EPSILON))
                .collect(),
            Strategy::Rank => {
                let mut order: Vec<usize> = (0..n).collect();
                // Stable sort: ties keep insertion order (older first).
                order.sort_by(|&a, &b| {
                    self.entries[b]
                        .mode_value(self.cfg.score_mode)
                        .partial_cmp(&self.entries[a].mode_value(self.cfg.score_mode))
                        .unwrap()
                });
                let mut p = vec![0.0; n];
                for (rank, &idx) in order.iter().enumerate() {
                    p[idx] = 1.0 / (rank + 1) as f64;
                }
                p
            }
            Strategy::Random => vec![1.0; n],
        };
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|p| p / total).collect()
    }

    /// Draw up to `few_shot_n` distinct entries without replacement by
    /// iterated renormalized priority sampling. Returns everything (in
    /// insertion order) when the buffer is small enough.
    pub fn sample_few_shot(&self, rng: &mut ChaCha8Rng) -> Vec<ScoredMetaPath> {
        let n = self.entries.len();
        if n <= self.cfg.few_shot_n {
            return self.entries.clone();
        }
        let mut weights = self.priorities();
        let mut alive: Vec<usize> = (0..n).collect();
        let mut picked = Vec::with_capacity(self.cfg.few_shot_n);
        for _ in 0..self.cfg.few_shot_n {
            let total: f64 = alive.iter().map(|&i| weights[i]).sum();
            let mut target = rng.random::<f64>() * total;
            let mut chosen = alive.len() - 1;
            for (pos, &i) in alive.iter().enumerate() {
                target -= weights[i];
                if target <= 0.0 {
                    chosen = pos;
                    break;
                }
            }
            let idx = alive.remove(chosen);
            picked.push(self.entries[idx].clone());
        }
        picked
    }

    /// Persist as line-delimited JSON records, one meta-path per line.
    pub fn save_jsonl(&self, hin: &Hin, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for e in &self.entries {
            let (types, relations) = e.metapath.labels(hin);
            let record = BufferRecord {
                types,
                relations,
                coverage: e.score.coverage,
                confidence: e.score.confidence,
                support_both: e.score.support_both,
                support_rq: e.score.support_rq,
                support_m: e.score.support_m,
                target_relation: hin.relation_label(e.target_relation).to_owned(),
                round: e.generation_round,
            };
            serde_json::to_writer(&mut w, &record)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reload a persisted buffer. Records are re-interned against `hin`;
    /// insertion order is the file order.
    pub fn load_jsonl(hin: &Hin, path: &Path, cfg: BufferConfig) -> Result<ReplayBuffer> {
        let mut buffer = ReplayBuffer::new(cfg);
        let file = File::open(path)?;
        let mut items = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: BufferRecord = serde_json::from_str(&line)?;
            let metapath = MetaPath::from_labels(hin, &record.types, &record.relations)?;
            let target_relation = hin
                .relation_id(&record.target_relation)
                .ok_or_else(|| crate::hin::unknown_atom(
                    crate::error::AtomKind::Relation,
                    &record.target_relation,
                ))?;
            items.push(ScoredMetaPath {
                metapath,
                score: MetaPathScore {
                    coverage: record.coverage,
                    confidence: record.confidence,
                    support_both: record.support_both,
                    support_rq: record.support_rq,
                    support_m: record.support_m,
                },
                target_relation,
                generation_round: record.round,
            });
        }
        buffer.insert(items);
        Ok(buffer)
    }
}

#[derive(Serialize, Deserialize)]
struct BufferRecord {
    types: Vec<String>,
    relations: Vec<String>,
    coverage: f64,
    confidence: f64,
    support_both: u64,
    support_rq: u64,
    support_m: u64,
    target_relation: String,
    round: u32,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, StreamDomain};

    fn entry(tag: u32, coverage: f64, confidence: f64) -> ScoredMetaPath {
        use crate::hin::TypeId;
        ScoredMetaPath {
            metapath: MetaPath::new(
                vec![TypeId(tag), TypeId(tag + 1)],
                vec![RelationId(0)],
            )
            .unwrap(),
            score: MetaPathScore {
                coverage,
                confidence,
                support_both: 0,
                support_rq: 1,
                support_m: 1,
            },
            target_relation: RelationId(0),
            generation_round: 0,
        }
    }

    #[test]
    fn duplicate_insert_returns_zero() {
        let mut buffer = ReplayBuffer::new(BufferConfig::default());
        assert_eq!(buffer.insert(vec![entry(0, 0.5, 0.5)]), 1);
        assert_eq!(buffer.insert(vec![entry(0, 0.9, 0.9)]), 0);
        assert_eq!(buffer.len(), 1);
        // The existing entry wins.
        assert_eq!(buffer.entries()[0].score.coverage, 0.5);
    }

    #[test]
    fn capacity_evicts_the_lowest_priority_entry() {
        let cfg = BufferConfig {
            capacity: Some(2),
            ..BufferConfig::default()
        };
        let mut buffer = ReplayBuffer::new(cfg);
        buffer.insert(vec![
            entry(0, 0.5, 0.4), // sum 0.9
            entry(2, 0.3, 0.2), // sum 0.5
            entry(4, 0.05, 0.05), // sum 0.1
        ]);
        assert_eq!(buffer.len(), 2);
        let sums: Vec<f64> = buffer.entries().iter().map(|e| e.score.sum()).collect();
        assert!(sums.iter().all(|&s| s > 0.2));
    }

    #[test]
    fn direct_priorities_match_normalized_scores() {
        let cfg = BufferConfig {
            strategy: Strategy::Direct,
            score_mode: ScoreMode::Sum,
            ..BufferConfig::default()
        };
        let mut buffer = ReplayBuffer::new(cfg);
        buffer.insert(vec![
            entry(0, 0.3, 0.3),
            entry(2, 0.15, 0.15),
            entry(4, 0.05, 0.05),
        ]);
        let p = buffer.priorities();
        assert_eq!(p, vec![0.6, 0.3, 0.1]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_priorities_follow_one_over_rank() {
        let cfg = BufferConfig {
            strategy: Strategy::Rank,
            score_mode: ScoreMode::Sum,
            ..BufferConfig::default()
        };
        let mut buffer = ReplayBuffer::new(cfg);
        buffer.insert(vec![
            entry(0, 0.3, 0.3),
            entry(2, 0.15, 0.15),
            entry(4, 0.05, 0.05),
        ]);
        let p = buffer.priorities();
        let expected = [6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0];
        for (got, want) in p.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn random_priorities_are_uniform() {
        let cfg = BufferConfig {
            strategy: Strategy::Random,
            ..BufferConfig::default()
        };
        let mut buffer = ReplayBuffer::new(cfg);
        buffer.insert(vec![entry(0, 0.9, 0.9), entry(2, 0.0, 0.0)]);
        assert_eq!(buffer.priorities(), vec![0.5, 0.5]);
    }

    #[test]
    fn small_buffer_returns_everything() {
        let mut buffer = ReplayBuffer::new(BufferConfig::default());
        buffer.insert(vec![entry(0, 0.1, 0.1), entry(2, 0.2, 0.2)]);
        let mut rng = stream_rng(0, StreamDomain::BufferSample, 0);
        let picked = buffer.sample_few_shot(&mut rng);
        assert_eq!(picked.len(), 2);
        let mut rng = stream_rng(0, StreamDomain::BufferSample, 0);
        assert_eq!(buffer.sample_few_shot(&mut rng), picked);
    }

    #[test]
    fn sampling_without_replacement_has_no_duplicates() {
        let cfg = BufferConfig {
            few_shot_n: 4,
            ..BufferConfig::default()
        };
        let mut buffer = ReplayBuffer::new(cfg);
        for i in 0..10u32 {
            buffer.insert(vec![entry(i * 2, 0.01 * i as f64, 0.02 * i as f64)]);
        }
        let mut rng = stream_rng(5, StreamDomain::BufferSample, 1);
        let picked = buffer.sample_few_shot(&mut rng);
        assert_eq!(picked.len(), 4);
        let mut seen = std::collections::HashSet::new();
        for p in &picked {
            assert!(seen.insert(p.metapath.clone()));
        }
    }

    #[test]
    fn direct_floor_keeps_zero_scores_sampleable() {
        let cfg = BufferConfig {
            strategy: Strategy::Direct,
            ..BufferConfig::default()
        };
        let mut buffer = ReplayBuffer::new(cfg);
        buffer.insert(vec![entry(0, 0.0, 0.0), entry(2, 0.5, 0.5)]);
        let p = buffer.priorities();
        assert!(p[0] > 0.0);
    }
}
