//! N+1-way K-shot episode construction.
//!
//! An episode holds `N` positive clusters followed by one NULL cluster (class
//! index `N`), each with `K` support mentions, plus `queries_per_class`
//! labelled queries per class. NULL instances are synthesized from tokens that
//! carry no trigger annotation.

use std::collections::{BTreeMap, HashSet};
use std::sync::Arc;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{EventMention, EventType, MentionKey, Sentence, SplitSide};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SamplerConfig {
    pub n: usize,
    pub k: usize,
    pub queries_per_class: usize,
    /// Positive classes drawn per training iteration before picking `n` of
    /// them. `None` uses every available type.
    pub class_pool_size: Option<usize>,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { n: 5, k: 5, queries_per_class: 1, class_pool_size: Some(20), seed: 0 }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 || self.queries_per_class == 0 {
            return Err(Error::Config("sampler n, k and queriesPerClass must be >= 1".into()));
        }
        if let Some(p) = self.class_pool_size {
            if p < self.n {
                return Err(Error::Config(format!("classPoolSize {p} is smaller than n = {}", self.n)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    /// `support[i]` holds the K mentions of episode class `i`; the last
    /// cluster is NULL.
    pub support: Vec<Vec<EventMention>>,
    pub queries: Vec<(EventMention, usize)>,
    pub class_map: Vec<EventType>,
}

impl Episode {
    pub fn num_classes(&self) -> usize {
        self.class_map.len()
    }

    pub fn null_index(&self) -> usize {
        self.class_map.len() - 1
    }

    pub fn to_json(&self) -> EpisodeJson {
        EpisodeJson {
            class_map: self
                .class_map
                .iter()
                .enumerate()
                .map(|(index, t)| ClassJson { index, event_type: t.name.clone(), parent_type: t.parent_type.clone() })
                .collect(),
            support: self
                .support
                .iter()
                .enumerate()
                .map(|(class, ms)| SupportJson { class, mentions: ms.iter().map(MentionJson::from).collect() })
                .collect(),
            queries: self
                .queries
                .iter()
                .map(|(m, label)| QueryJson { label: *label, mention: MentionJson::from(m) })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EpisodeJson {
    pub class_map: Vec<ClassJson>,
    pub support: Vec<SupportJson>,
    pub queries: Vec<QueryJson>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ClassJson {
    pub index: usize,
    #[serde(rename = "type")]
    pub event_type: String,
    pub parent_type: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SupportJson {
    pub class: usize,
    pub mentions: Vec<MentionJson>,
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryJson {
    pub label: usize,
    pub mention: MentionJson,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MentionJson {
    pub doc_id: String,
    pub sent_id: String,
    pub tokens: Vec<String>,
    pub dep_heads: Vec<i64>,
    pub anchor: usize,
    #[serde(rename = "type")]
    pub event_type: String,
}

impl From<&EventMention> for MentionJson {
    fn from(m: &EventMention) -> Self {
        Self {
            doc_id: m.sentence.doc_id.clone(),
            sent_id: m.sentence.sent_id.clone(),
            tokens: m.sentence.tokens.iter().map(|t| t.text.clone()).collect(),
            dep_heads: m.sentence.heads(),
            anchor: m.anchor,
            event_type: m.label.name.clone(),
        }
    }
}

/// Draws a non-event instance: a uniformly chosen token of `sentence` whose
/// position is not in `trigger_anchors`.
pub fn synthesize_null_mention(
    sentence: &Arc<Sentence>,
    trigger_anchors: &[usize],
    rng: &mut impl Rng,
) -> Result<EventMention> {
    let candidates: Vec<usize> = (0..sentence.len()).filter(|i| !trigger_anchors.contains(i)).collect();
    let anchor = *candidates.choose(rng).ok_or_else(|| {
        Error::Sampler(format!(
            "{}/{}: every token is a trigger, no NULL instance available",
            sentence.doc_id, sentence.sent_id
        ))
    })?;
    Ok(EventMention { sentence: sentence.clone(), anchor, label: EventType::null() })
}

/// Indexes one split side for episode sampling.
#[derive(Debug, Clone)]
pub struct EpisodeSampler {
    by_type: BTreeMap<String, Vec<EventMention>>,
    null_pool: Vec<Arc<Sentence>>,
    null_capacity: usize,
    cfg: SamplerConfig,
}

impl EpisodeSampler {
    pub fn new(side: &SplitSide, cfg: &SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        let mut by_type: BTreeMap<String, Vec<EventMention>> = BTreeMap::new();
        for m in &side.mentions {
            by_type.entry(m.label.name.clone()).or_default().push(m.clone());
        }
        let need = cfg.k + cfg.queries_per_class;
        for (name, ms) in &by_type {
            if ms.len() < need {
                return Err(Error::Sampler(format!(
                    "type {name} has {} mentions, needs at least K + queriesPerClass = {need}",
                    ms.len()
                )));
            }
        }
        if by_type.len() < cfg.n {
            return Err(Error::Sampler(format!(
                "N = {} exceeds the {} available event types",
                cfg.n,
                by_type.len()
            )));
        }

        let mut seen = HashSet::new();
        let mut null_pool = Vec::new();
        let sentences = side.mentions.iter().map(|m| &m.sentence).chain(side.background.iter());
        for s in sentences {
            let key = (s.doc_id.as_str(), s.sent_id.as_str(), s.len());
            if seen.insert(key) && s.trigger_anchors.len() < s.len() {
                null_pool.push(s.clone());
            }
        }
        let null_capacity: usize = null_pool.iter().map(|s| s.len() - s.trigger_anchors.len()).sum();
        if null_capacity < need {
            return Err(Error::Sampler(format!(
                "only {null_capacity} non-trigger tokens available, NULL cluster needs {need}"
            )));
        }
        Ok(Self { by_type, null_pool, null_capacity, cfg: cfg.clone() })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    pub fn types(&self) -> impl Iterator<Item = &str> {
        self.by_type.keys().map(String::as_str)
    }

    pub fn num_types(&self) -> usize {
        self.by_type.len()
    }

    /// One episode whose positive classes are drawn from every available type.
    pub fn sample(&self, rng: &mut impl Rng) -> Result<Episode> {
        let all: Vec<&str> = self.types().collect();
        self.sample_from(&all, rng)
    }

    /// One episode whose `n` positive classes are drawn from `pool`.
    pub fn sample_from(&self, pool: &[&str], rng: &mut impl Rng) -> Result<Episode> {
        let SamplerConfig { n, k, queries_per_class: q, .. } = self.cfg;
        if pool.len() < n {
            return Err(Error::Sampler(format!("N = {n} exceeds the class pool of {}", pool.len())));
        }
        let chosen: Vec<&str> = index::sample(rng, pool.len(), n).into_iter().map(|i| pool[i]).collect();

        let mut support = Vec::with_capacity(n + 1);
        let mut queries = Vec::with_capacity((n + 1) * q);
        let mut class_map = Vec::with_capacity(n + 1);
        for (class, name) in chosen.iter().enumerate() {
            let ms = self
                .by_type
                .get(*name)
                .ok_or_else(|| Error::Sampler(format!("unknown event type {name} in class pool")))?;
            let picks = index::sample(rng, ms.len(), k + q).into_vec();
            support.push(picks[..k].iter().map(|&i| ms[i].clone()).collect());
            queries.extend(picks[k..].iter().map(|&i| (ms[i].clone(), class)));
            class_map.push(ms[0].label.clone());
        }

        let nulls = self.sample_nulls(k + q, rng)?;
        let null_class = n;
        support.push(nulls[..k].to_vec());
        queries.extend(nulls[k..].iter().map(|m| (m.clone(), null_class)));
        class_map.push(EventType::null());

        Ok(Episode { support, queries, class_map })
    }

    fn sample_nulls(&self, count: usize, rng: &mut impl Rng) -> Result<Vec<EventMention>> {
        let mut keys: HashSet<MentionKey> = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        let max_attempts = 100 * count + self.null_capacity;
        for _ in 0..max_attempts {
            if out.len() == count {
                break;
            }
            let sentence = self.null_pool.choose(rng).expect("nonempty NULL pool");
            let m = synthesize_null_mention(sentence, &sentence.trigger_anchors, rng)?;
            if keys.insert(m.key()) {
                out.push(m);
            }
        }
        if out.len() < count {
            return Err(Error::Sampler(format!("could not draw {count} distinct NULL instances")));
        }
        Ok(out)
    }

    /// Deterministic stream of `iterations` training episodes; each iteration
    /// first draws a class pool, then an episode from that pool.
    pub fn stream(&self, iterations: usize) -> EpisodeStream<'_> {
        EpisodeStream {
            sampler: self,
            rng: ChaCha8Rng::seed_from_u64(self.cfg.seed),
            remaining: iterations,
        }
    }
}

pub struct EpisodeStream<'a> {
    sampler: &'a EpisodeSampler,
    rng: ChaCha8Rng,
    remaining: usize,
}

impl EpisodeStream<'_> {
    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }
}

impl Iterator for EpisodeStream<'_> {
    type Item = Result<Episode>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let types: Vec<&str> = self.sampler.types().collect();
        let pool_size = self.sampler.cfg.class_pool_size.unwrap_or(types.len()).min(types.len());
        let pool: Vec<&str> = index::sample(&mut self.rng, types.len(), pool_size)
            .into_iter()
            .map(|i| types[i])
            .collect();
        Some(self.sampler.sample_from(&pool, &mut self.rng))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}
