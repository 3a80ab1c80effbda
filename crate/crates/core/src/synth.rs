//! Synthetic corpora with separable event types.
//!
//! Every type owns a disjoint set of trigger words whose embeddings share a
//! type-specific direction; every other token is drawn from a common filler
//! vocabulary. Each annotated sentence carries exactly one trigger.
//! Distractor sentences carry none and feed the NULL cluster.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::SplitParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TriggerPlacement {
    /// Any position.
    #[default]
    Uniform,
    /// The middle token.
    Middle,
}

/// ACE-2005 event inventory: parent type and its subtypes.
pub const ACE_INVENTORY: [(&str, &[&str]); 8] = [
    ("Business", &["Start-Org", "Merge-Org", "Declare-Bankruptcy", "End-Org"]),
    ("Contact", &["Meet", "Phone-Write"]),
    ("Conflict", &["Attack", "Demonstrate"]),
    (
        "Justice",
        &[
            "Arrest-Jail",
            "Release-Parole",
            "Trial-Hearing",
            "Charge-Indict",
            "Sue",
            "Convict",
            "Sentence",
            "Fine",
            "Execute",
            "Extradite",
            "Acquit",
            "Appeal",
            "Pardon",
        ],
    ),
    ("Life", &["Be-Born", "Marry", "Divorce", "Injure", "Die"]),
    ("Movement", &["Transport"]),
    ("Personnel", &["Start-Position", "End-Position", "Nominate", "Elect"]),
    ("Transaction", &["Transfer-Ownership", "Transfer-Money"]),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_types: usize,
    pub types_per_parent: usize,
    /// Parents `P0 .. P{trainParents-1}` hold the training types.
    pub train_parents: usize,
    pub mentions_per_type: usize,
    /// Trigger words per type.
    pub vocab_per_type: usize,
    pub filler_vocab: usize,
    pub min_sentence_length: usize,
    pub max_sentence_length: usize,
    pub trigger_placement: TriggerPlacement,
    pub embedding_dim: usize,
    pub distractor_sentences: usize,
    pub sentences_per_doc: usize,
    /// Norm of the shared type direction in trigger embeddings.
    pub trigger_scale: f64,
    /// Per-coordinate noise standard deviation, times `1/sqrt(dim)`.
    pub noise: f64,
    /// Use the ACE-2005 type inventory with uneven per-type counts instead of
    /// `numTypes` generic types.
    pub ace_like: bool,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_types: 12,
            types_per_parent: 4,
            train_parents: 2,
            mentions_per_type: 60,
            vocab_per_type: 5,
            filler_vocab: 300,
            min_sentence_length: 8,
            max_sentence_length: 16,
            trigger_placement: TriggerPlacement::Uniform,
            embedding_dim: 50,
            distractor_sentences: 400,
            sentences_per_doc: 10,
            trigger_scale: 1.0,
            noise: 0.3,
            ace_like: false,
            seed: 0,
        }
    }
}

/// One generated event type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthType {
    pub name: String,
    pub parent: String,
    pub mentions: usize,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    /// JSON-Lines corpus text.
    pub corpus: String,
    /// Embedding text file, with a `count dim` header.
    pub embeddings: String,
    pub types: Vec<SynthType>,
    pub train_parents: BTreeSet<String>,
}

impl SyntheticCorpus {
    /// Split parameters that put the training parents on the train side.
    pub fn split_params(&self, seed: u64) -> SplitParams {
        SplitParams { train_parent_types: self.train_parents.clone(), seed, ..SplitParams::default() }
    }

    pub fn mention_count(&self) -> usize {
        self.types.iter().map(|t| t.mentions).sum()
    }

    /// Writes `corpus.jsonl` and `embeddings.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let corpus = dir.join("corpus.jsonl");
        let emb = dir.join("embeddings.txt");
        fs::write(&corpus, &self.corpus).map_err(|e| Error::io(&corpus, e))?;
        fs::write(&emb, &self.embeddings).map_err(|e| Error::io(&emb, e))?;
        Ok((corpus, emb))
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct OutSentence<'a> {
    doc_id: String,
    sent_id: String,
    tokens: Vec<&'a str>,
    dep_heads: Vec<i64>,
    dep_labels: Vec<&'a str>,
    events: Vec<OutEvent<'a>>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct OutEvent<'a> {
    anchor: usize,
    #[serde(rename = "type")]
    event_type: &'a str,
    parent_type: &'a str,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("synthetic spec: {m}")));
        if !self.ace_like && (self.num_types == 0 || self.types_per_parent == 0) {
            return bad("numTypes and typesPerParent must be >= 1".into());
        }
        if !self.ace_like && self.train_parents >= self.num_types.div_ceil(self.types_per_parent) {
            return bad("trainParents must leave at least one parent for dev/test".into());
        }
        if self.vocab_per_type == 0 || self.filler_vocab == 0 || self.embedding_dim == 0 || self.sentences_per_doc == 0 {
            return bad("vocabPerType, fillerVocab, embeddingDim and sentencesPerDoc must be >= 1".into());
        }
        if self.min_sentence_length < 2 || self.min_sentence_length > self.max_sentence_length {
            return bad(format!(
                "sentence length range {}..={} must satisfy 2 <= min <= max",
                self.min_sentence_length, self.max_sentence_length
            ));
        }
        if !(self.trigger_scale > 0.0 && self.noise >= 0.0) {
            return bad("triggerScale must be positive and noise non-negative".into());
        }
        Ok(())
    }

    fn inventory(&self, rng: &mut ChaCha8Rng) -> (Vec<SynthType>, BTreeSet<String>) {
        if self.ace_like {
            let mut types = Vec::new();
            for (parent, subs) in ACE_INVENTORY {
                for name in subs {
                    // uneven counts; a few fall under the default 15-mention filter
                    let lo = (self.mentions_per_type / 6).max(1);
                    let hi = self.mentions_per_type * 2;
                    types.push(SynthType { name: name.to_string(), parent: parent.to_string(), mentions: rng.gen_range(lo..=hi) });
                }
            }
            let train = SplitParams::ace().train_parent_types;
            return (types, train);
        }
        let types = (0..self.num_types)
            .map(|i| SynthType {
                name: format!("T{i:02}"),
                parent: format!("P{}", i / self.types_per_parent),
                mentions: self.mentions_per_type,
            })
            .collect();
        let train = (0..self.train_parents).map(|p| format!("P{p}")).collect();
        (types, train)
    }
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, std: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            std * z
        })
        .collect()
}

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v = gaussian(rng, dim, 1.0);
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Random dependency tree: a random permutation is attached node by node to
/// an already attached node.
fn random_tree(len: usize, rng: &mut ChaCha8Rng) -> Vec<i64> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(rng);
    let mut heads = vec![-1i64; len];
    for i in 1..len {
        heads[order[i]] = order[rng.gen_range(0..i)] as i64;
    }
    heads
}

/// Generates the corpus and embeddings. Output is a pure function of `spec`.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (types, train_parents) = spec.inventory(&mut rng);
    let dim = spec.embedding_dim;
    let noise_std = spec.noise / (dim as f64).sqrt();

    let mut embeddings = String::new();
    let trigger_words: Vec<Vec<String>> = types
        .iter()
        .enumerate()
        .map(|(t, _)| (0..spec.vocab_per_type).map(|j| format!("trig{t:02}_{j}")).collect())
        .collect();
    let filler: Vec<String> = (0..spec.filler_vocab).map(|j| format!("w{j:03}")).collect();
    writeln!(embeddings, "{} {dim}", types.len() * spec.vocab_per_type + filler.len()).expect("string write");
    let mut emit = |word: &str, v: &[f64]| {
        embeddings.push_str(word);
        for x in v {
            write!(embeddings, " {x:.6}").expect("string write");
        }
        embeddings.push('\n');
    };
    for words in &trigger_words {
        let dir = unit(&mut rng, dim);
        for w in words {
            let n = gaussian(&mut rng, dim, noise_std);
            let v: Vec<f64> = dir.iter().zip(&n).map(|(d, e)| spec.trigger_scale * d + e).collect();
            emit(w, &v);
        }
    }
    for w in &filler {
        let v = gaussian(&mut rng, dim, 1.0 / (dim as f64).sqrt());
        emit(w, &v);
    }

    // (type index or None for distractor) per sentence, shuffled into documents
    let mut plan: Vec<Option<usize>> = Vec::new();
    for (t, ty) in types.iter().enumerate() {
        plan.extend(std::iter::repeat_n(Some(t), ty.mentions));
    }
    plan.extend(std::iter::repeat_n(None, spec.distractor_sentences));
    plan.shuffle(&mut rng);

    let mut corpus = String::new();
    for (i, item) in plan.iter().enumerate() {
        let len = rng.gen_range(spec.min_sentence_length..=spec.max_sentence_length);
        let mut tokens: Vec<&str> = (0..len).map(|_| filler.choose(&mut rng).expect("filler").as_str()).collect();
        let heads = random_tree(len, &mut rng);
        let mut events = Vec::new();
        if let Some(t) = *item {
            let anchor = match spec.trigger_placement {
                TriggerPlacement::Uniform => rng.gen_range(0..len),
                TriggerPlacement::Middle => len / 2,
            };
            tokens[anchor] = trigger_words[t].choose(&mut rng).expect("trigger").as_str();
            events.push(OutEvent { anchor, event_type: &types[t].name, parent_type: &types[t].parent });
        }
        let labels = heads.iter().map(|&h| if h < 0 { "root" } else { "dep" }).collect();
        let s = OutSentence {
            doc_id: format!("syn{:04}", i / spec.sentences_per_doc),
            sent_id: format!("{}", i % spec.sentences_per_doc),
            tokens,
            dep_heads: heads,
            dep_labels: labels,
            events,
        };
        corpus.push_str(&serde_json::to_string(&s)?);
        corpus.push('\n');
    }
    Ok(SyntheticCorpus { corpus, embeddings, types, train_parents })
}
