//! Corpus + embeddings + split, ready for training.

use std::collections::HashSet;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{derive_seed, streams, DataConfig};
use crate::corpus::{load_corpus, make_split, truncate_around, Corpus, CorpusSplit, LoadOptions, Sentence};
use crate::embedding::{load_pretrained_embeddings, PositionTable, Vocabulary};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct PreparedData {
    pub corpus: Corpus,
    pub split: CorpusSplit,
    pub vocab: Vocabulary,
}

pub fn position_table(cfg: &DataConfig) -> PositionTable {
    PositionTable { max_dist: cfg.max_sentence_length, dim: cfg.position_dim }
}

/// Loads the configured corpus and embeddings and splits the corpus.
pub fn prepare(cfg: &DataConfig, seed: u64) -> Result<PreparedData> {
    let (corpus, split) = load_and_split(cfg)?;
    let vocab = build_vocabulary(cfg, &corpus, seed)?;
    Ok(PreparedData { corpus, split, vocab })
}

/// Like [`prepare`] without the embeddings.
pub fn load_and_split(cfg: &DataConfig) -> Result<(Corpus, CorpusSplit)> {
    let path = cfg.corpus.as_ref().ok_or_else(|| Error::Config("data.corpus is not set".into()))?;
    let corpus = load_corpus(
        path,
        &LoadOptions { max_sentence_length: cfg.max_sentence_length, ..LoadOptions::default() },
    )?;
    let split = split_corpus(&corpus, cfg)?;
    Ok((corpus, split))
}

pub fn split_corpus(corpus: &Corpus, cfg: &DataConfig) -> Result<CorpusSplit> {
    let background: Vec<Arc<Sentence>> = corpus
        .event_free_sentences()
        .into_iter()
        .map(|s| if s.len() > cfg.max_sentence_length { truncate_around(&s, s.len() / 2, cfg.max_sentence_length).0 } else { s })
        .collect();
    make_split(&corpus.mentions, &background, &cfg.split)
}

/// Pretrained vectors restricted to the corpus vocabulary, or seeded random
/// vectors when no embedding file is configured.
pub fn build_vocabulary(cfg: &DataConfig, corpus: &Corpus, seed: u64) -> Result<Vocabulary> {
    let words = corpus.vocabulary();
    match &cfg.embeddings {
        Some(path) => {
            let keep: HashSet<String> = words.into_iter().collect();
            let vocab = load_pretrained_embeddings(path, cfg.embedding_dim, Some(&keep))?;
            if vocab.is_empty() {
                log::warn!("no corpus token found in {}; every token maps to UNK", path.display());
            }
            Ok(vocab)
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, streams::VOCAB));
            Ok(Vocabulary::random(&words, cfg.embedding_dim, &mut rng))
        }
    }
}
