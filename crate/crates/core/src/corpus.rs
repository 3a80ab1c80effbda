//! Corpus ingestion, validation and label-disjoint splitting.
//!
//! Corpora are UTF-8 JSON Lines, one sentence per line:
//!
//! ```text
//! {"docId": "d1", "sentId": "s3", "tokens": ["He", "was", "hired"],
//!  "depHeads": [2, 2, -1], "depLabels": ["nsubj", "aux", "root"],
//!  "events": [{"anchor": 2, "type": "Start-Position", "parentType": "Personnel"}]}
//! ```
//!
//! Only positive triggers are annotated; non-event instances are drawn later
//! by the episode sampler from tokens that are not triggers.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reserved label of the non-event class.
pub const NULL_LABEL: &str = "NULL";

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    /// Index of the syntactic head, `-1` for the root.
    pub dep_head: i64,
    pub dep_label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub doc_id: String,
    pub sent_id: String,
    pub tokens: Vec<Token>,
    /// Every annotated trigger position in this sentence, regardless of type.
    pub trigger_anchors: Vec<usize>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn heads(&self) -> Vec<i64> {
        self.tokens.iter().map(|t| t.dep_head).collect()
    }

    pub fn is_trigger(&self, index: usize) -> bool {
        self.trigger_anchors.contains(&index)
    }

    /// Token positions that carry no trigger annotation.
    pub fn non_trigger_positions(&self) -> Vec<usize> {
        (0..self.len()).filter(|i| !self.is_trigger(*i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EventType {
    pub name: String,
    pub parent_type: String,
    pub is_null: bool,
}

impl EventType {
    pub fn positive(name: impl Into<String>, parent_type: impl Into<String>) -> Self {
        Self { name: name.into(), parent_type: parent_type.into(), is_null: false }
    }

    pub fn null() -> Self {
        Self { name: NULL_LABEL.to_string(), parent_type: NULL_LABEL.to_string(), is_null: true }
    }
}

/// A `(sentence, anchor, type)` triple.
#[derive(Debug, Clone, PartialEq)]
pub struct EventMention {
    pub sentence: Arc<Sentence>,
    pub anchor: usize,
    pub label: EventType,
}

/// Identity of a mention across episodes and splits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MentionKey {
    pub doc_id: String,
    pub sent_id: String,
    pub anchor: usize,
}

impl EventMention {
    pub fn key(&self) -> MentionKey {
        MentionKey {
            doc_id: self.sentence.doc_id.clone(),
            sent_id: self.sentence.sent_id.clone(),
            anchor: self.anchor,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CorpusStats {
    pub sentences: usize,
    pub mentions: usize,
    pub per_type: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub sentences: Vec<Arc<Sentence>>,
    pub mentions: Vec<EventMention>,
    pub stats: CorpusStats,
}

impl Corpus {
    /// Sentences without any trigger annotation.
    pub fn event_free_sentences(&self) -> Vec<Arc<Sentence>> {
        self.sentences.iter().filter(|s| s.trigger_anchors.is_empty()).cloned().collect()
    }

    /// Every distinct token string, in first-seen order.
    pub fn vocabulary(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for s in &self.sentences {
            for t in &s.tokens {
                if seen.insert(t.text.as_str()) {
                    out.push(t.text.clone());
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct LoadOptions {
    pub schema_version: String,
    pub max_sentence_length: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { schema_version: SCHEMA_VERSION.to_string(), max_sentence_length: 80 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawSentence {
    doc_id: String,
    sent_id: String,
    tokens: Vec<String>,
    dep_heads: Vec<i64>,
    #[serde(default)]
    dep_labels: Vec<String>,
    #[serde(default)]
    events: Vec<RawEvent>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RawEvent {
    anchor: i64,
    #[serde(rename = "type")]
    event_type: String,
    parent_type: String,
}

pub fn load_corpus(path: &Path, opts: &LoadOptions) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(BufReader::new(file), opts).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_corpus(reader: impl BufRead, opts: &LoadOptions) -> Result<Corpus> {
    if opts.schema_version != SCHEMA_VERSION {
        return Err(Error::Config(format!(
            "unsupported corpus schema version {} (supported: {SCHEMA_VERSION})",
            opts.schema_version
        )));
    }
    if opts.max_sentence_length == 0 {
        return Err(Error::Config("maxSentenceLength must be positive".into()));
    }
    let mut corpus = Corpus::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<corpus>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawSentence = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        add_sentence(&mut corpus, raw, opts.max_sentence_length)?;
    }
    corpus.stats.sentences = corpus.sentences.len();
    corpus.stats.mentions = corpus.mentions.len();
    for m in &corpus.mentions {
        *corpus.stats.per_type.entry(m.label.name.clone()).or_default() += 1;
    }
    Ok(corpus)
}

fn add_sentence(corpus: &mut Corpus, raw: RawSentence, max_len: usize) -> Result<()> {
    let invalid = |message: String| Error::InvalidSentence {
        doc_id: raw.doc_id.clone(),
        sent_id: raw.sent_id.clone(),
        message,
    };
    let len = raw.tokens.len();
    if len == 0 {
        return Err(invalid("sentence has no tokens".into()));
    }
    if raw.dep_heads.len() != len {
        return Err(invalid(format!("{} tokens but {} depHeads", len, raw.dep_heads.len())));
    }
    if !raw.dep_labels.is_empty() && raw.dep_labels.len() != len {
        return Err(invalid(format!("{} tokens but {} depLabels", len, raw.dep_labels.len())));
    }
    validate_tree(&raw.dep_heads).map_err(invalid)?;

    let mut anchors = Vec::with_capacity(raw.events.len());
    for ev in &raw.events {
        if ev.anchor < 0 || ev.anchor as usize >= len {
            return Err(invalid(format!("anchor {} out of range for {len} tokens", ev.anchor)));
        }
        if ev.event_type == NULL_LABEL {
            return Err(invalid(format!("event type `{NULL_LABEL}` is reserved")));
        }
        if ev.event_type.is_empty() || ev.parent_type.is_empty() {
            return Err(invalid("event type and parentType must be nonempty".into()));
        }
        anchors.push(ev.anchor as usize);
    }
    let mut trigger_anchors = anchors.clone();
    trigger_anchors.sort_unstable();
    trigger_anchors.dedup();

    let tokens: Vec<Token> = raw
        .tokens
        .iter()
        .enumerate()
        .map(|(i, text)| Token {
            text: text.clone(),
            dep_head: raw.dep_heads[i],
            dep_label: raw.dep_labels.get(i).cloned().unwrap_or_default(),
        })
        .collect();
    let full = Arc::new(Sentence {
        doc_id: raw.doc_id.clone(),
        sent_id: raw.sent_id.clone(),
        tokens,
        trigger_anchors,
    });
    corpus.sentences.push(full.clone());

    for (ev, &anchor) in raw.events.iter().zip(&anchors) {
        let label = EventType::positive(&ev.event_type, &ev.parent_type);
        let (sentence, anchor) = if full.len() > max_len {
            truncate_around(&full, anchor, max_len)
        } else {
            (full.clone(), anchor)
        };
        corpus.mentions.push(EventMention { sentence, anchor, label });
    }
    Ok(())
}

/// Checks that `heads` describes a single-rooted, acyclic dependency tree.
pub fn validate_tree(heads: &[i64]) -> std::result::Result<(), String> {
    let n = heads.len();
    let mut roots = 0;
    for (i, &h) in heads.iter().enumerate() {
        if h == -1 {
            roots += 1;
        } else if h < -1 || h as usize >= n {
            return Err(format!("depHead {h} of token {i} out of range"));
        } else if h as usize == i {
            return Err(format!("token {i} is its own head"));
        }
    }
    if roots != 1 {
        return Err(format!("dependency heads have {roots} roots, expected 1"));
    }
    for start in 0..n {
        let mut cur = start;
        let mut steps = 0;
        while heads[cur] != -1 {
            cur = heads[cur] as usize;
            steps += 1;
            if steps > n {
                return Err(format!("dependency cycle through token {start}"));
            }
        }
    }
    Ok(())
}

/// Cuts `sentence` to a window of at most `max_len` tokens centred on
/// `anchor`. Tokens whose head falls outside the window are attached to their
/// nearest in-window ancestor; remaining orphans hang off a single root.
pub fn truncate_around(sentence: &Sentence, anchor: usize, max_len: usize) -> (Arc<Sentence>, usize) {
    let n = sentence.len();
    let half = max_len / 2;
    let start = anchor.saturating_sub(half).min(n - max_len);
    let end = start + max_len;
    let heads = sentence.heads();

    let nearest_inside = |mut i: usize| -> Option<usize> {
        while heads[i] != -1 {
            i = heads[i] as usize;
            if (start..end).contains(&i) {
                return Some(i);
            }
        }
        None
    };

    let mut new_heads: Vec<i64> = (start..end)
        .map(|i| match nearest_inside(i) {
            Some(h) => (h - start) as i64,
            None => -1,
        })
        .collect();
    let root = new_heads.iter().position(|&h| h == -1).expect("window has a root");
    for h in new_heads.iter_mut().skip(root + 1) {
        if *h == -1 {
            *h = root as i64;
        }
    }

    let tokens = sentence.tokens[start..end]
        .iter()
        .zip(&new_heads)
        .map(|(t, &h)| Token { text: t.text.clone(), dep_head: h, dep_label: t.dep_label.clone() })
        .collect();
    let trigger_anchors = sentence
        .trigger_anchors
        .iter()
        .filter(|&&a| (start..end).contains(&a))
        .map(|a| a - start)
        .collect();
    let truncated = Sentence {
        doc_id: sentence.doc_id.clone(),
        sent_id: sentence.sent_id.clone(),
        tokens,
        trigger_anchors,
    };
    (Arc::new(truncated), anchor - start)
}

/// Granularity of the dev/test halving.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SplitUnit {
    #[default]
    Mention,
    Document,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SplitParams {
    pub train_parent_types: BTreeSet<String>,
    pub min_per_type: usize,
    pub seed: u64,
    pub unit: SplitUnit,
    /// Fewest positive types each side must retain.
    pub min_types_per_side: usize,
}

impl Default for SplitParams {
    fn default() -> Self {
        Self {
            train_parent_types: BTreeSet::new(),
            min_per_type: 15,
            seed: 0,
            unit: SplitUnit::Mention,
            min_types_per_side: 1,
        }
    }
}

impl SplitParams {
    pub fn ace() -> Self {
        Self {
            train_parent_types: ["Business", "Contact", "Conflict", "Justice"]
                .into_iter()
                .map(String::from)
                .collect(),
            ..Self::default()
        }
    }
}

/// Mentions plus event-free sentences assigned to one side of a split.
#[derive(Debug, Clone, Default)]
pub struct SplitSide {
    pub mentions: Vec<EventMention>,
    pub background: Vec<Arc<Sentence>>,
}

impl SplitSide {
    pub fn types(&self) -> BTreeSet<String> {
        self.mentions.iter().map(|m| m.label.name.clone()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.mentions.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct CorpusSplit {
    pub train: SplitSide,
    pub dev: SplitSide,
    pub test: SplitSide,
    pub train_types: BTreeSet<String>,
    pub dev_test_types: BTreeSet<String>,
    pub dropped_types: BTreeSet<String>,
    pub params: SplitParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Dev,
    Test,
}

impl CorpusSplit {
    pub fn side(&self, name: SplitName) -> &SplitSide {
        match name {
            SplitName::Train => &self.train,
            SplitName::Dev => &self.dev,
            SplitName::Test => &self.test,
        }
    }

    pub fn manifest(&self) -> SplitManifest {
        let mut rows = Vec::new();
        for (name, side) in
            [(SplitName::Train, &self.train), (SplitName::Dev, &self.dev), (SplitName::Test, &self.test)]
        {
            for m in &side.mentions {
                rows.push(ManifestRow {
                    doc_id: m.sentence.doc_id.clone(),
                    sent_id: m.sentence.sent_id.clone(),
                    anchor: m.anchor,
                    event_type: m.label.name.clone(),
                    split: name,
                });
            }
        }
        SplitManifest {
            seed: self.params.seed,
            min_per_type: self.params.min_per_type,
            train_parent_types: self.params.train_parent_types.clone(),
            unit: self.params.unit,
            dropped_types: self.dropped_types.clone(),
            rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ManifestRow {
    pub doc_id: String,
    pub sent_id: String,
    pub anchor: usize,
    #[serde(rename = "type")]
    pub event_type: String,
    pub split: SplitName,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SplitManifest {
    pub seed: u64,
    pub min_per_type: usize,
    pub train_parent_types: BTreeSet<String>,
    pub unit: SplitUnit,
    pub dropped_types: BTreeSet<String>,
    pub rows: Vec<ManifestRow>,
}

/// Splits mentions into label-disjoint train and dev/test sides.
///
/// Types whose parent is in `train_parent_types` go to train; all others are
/// halved per type between dev and test, odd counts giving dev the extra
/// mention. Types with fewer than `min_per_type` mentions are dropped.
/// Event-free sentences are dealt to train/dev/test in a 2:1:1 rotation.
pub fn make_split(
    mentions: &[EventMention],
    background: &[Arc<Sentence>],
    params: &SplitParams,
) -> Result<CorpusSplit> {
    if params.train_parent_types.is_empty() {
        return Err(Error::Split("trainParentTypes must be nonempty".into()));
    }
    let mut by_type: BTreeMap<&str, Vec<&EventMention>> = BTreeMap::new();
    for m in mentions {
        by_type.entry(m.label.name.as_str()).or_default().push(m);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut split = CorpusSplit {
        train: SplitSide::default(),
        dev: SplitSide::default(),
        test: SplitSide::default(),
        train_types: BTreeSet::new(),
        dev_test_types: BTreeSet::new(),
        dropped_types: BTreeSet::new(),
        params: params.clone(),
    };

    for (name, group) in by_type {
        let parents: BTreeSet<&str> = group.iter().map(|m| m.label.parent_type.as_str()).collect();
        if parents.len() != 1 {
            return Err(Error::Split(format!("type {name} has several parent types: {parents:?}")));
        }
        if group.len() < params.min_per_type {
            split.dropped_types.insert(name.to_string());
            continue;
        }
        if params.train_parent_types.contains(group[0].label.parent_type.as_str()) {
            split.train_types.insert(name.to_string());
            split.train.mentions.extend(group.into_iter().cloned());
            continue;
        }
        split.dev_test_types.insert(name.to_string());
        let (dev, test) = match params.unit {
            SplitUnit::Mention => halve_mentions(group, &mut rng),
            SplitUnit::Document => halve_documents(group, &mut rng),
        };
        split.dev.mentions.extend(dev);
        split.test.mentions.extend(test);
    }

    for (side, count) in [("train", split.train_types.len()), ("dev/test", split.dev_test_types.len())] {
        if count < params.min_types_per_side {
            return Err(Error::Split(format!(
                "{side} side keeps {count} event types after filtering (minPerType {}), \
                 fewer than the required {}; any N+1-way setting with N > {count} is unsatisfiable",
                params.min_per_type, params.min_types_per_side
            )));
        }
    }

    let mut bg: Vec<Arc<Sentence>> = background.to_vec();
    bg.shuffle(&mut rng);
    for (i, s) in bg.into_iter().enumerate() {
        match i % 4 {
            0 | 1 => split.train.background.push(s),
            2 => split.dev.background.push(s),
            _ => split.test.background.push(s),
        }
    }
    Ok(split)
}

fn halve_mentions(
    mut group: Vec<&EventMention>,
    rng: &mut ChaCha8Rng,
) -> (Vec<EventMention>, Vec<EventMention>) {
    group.shuffle(rng);
    let dev_count = group.len().div_ceil(2);
    let dev = group[..dev_count].iter().map(|m| (*m).clone()).collect();
    let test = group[dev_count..].iter().map(|m| (*m).clone()).collect();
    (dev, test)
}

fn halve_documents(
    group: Vec<&EventMention>,
    rng: &mut ChaCha8Rng,
) -> (Vec<EventMention>, Vec<EventMention>) {
    let mut docs: BTreeMap<&str, Vec<&EventMention>> = BTreeMap::new();
    for m in group {
        docs.entry(m.sentence.doc_id.as_str()).or_default().push(m);
    }
    let mut docs: Vec<Vec<&EventMention>> = docs.into_values().collect();
    docs.shuffle(rng);
    let (mut dev, mut test) = (Vec::new(), Vec::new());
    for doc in docs {
        let target = if dev.len() <= test.len() { &mut dev } else { &mut test };
        target.extend(doc.into_iter().cloned());
    }
    (dev, test)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(doc: &str, sent: &str, n: usize, events: &[(usize, &str, &str)]) -> String {
        let tokens: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let heads: Vec<i64> = (0..n).map(|i| if i == 0 { -1 } else { 0 }).collect();
        let events: Vec<_> = events
            .iter()
            .map(|(a, t, p)| serde_json::json!({"anchor": a, "type": t, "parentType": p}))
            .collect();
        serde_json::json!({
            "docId": doc, "sentId": sent, "tokens": tokens, "depHeads": heads, "events": events
        })
        .to_string()
    }

    fn mentions(types: &[(&str, &str, usize)]) -> Vec<EventMention> {
        let mut out = Vec::new();
        for (name, parent, count) in types {
            for i in 0..*count {
                let s = Arc::new(Sentence {
                    doc_id: format!("doc{}", i % 7),
                    sent_id: format!("{name}-{i}"),
                    tokens: vec![Token { text: "x".into(), dep_head: -1, dep_label: String::new() }],
                    trigger_anchors: vec![0],
                });
                out.push(EventMention { sentence: s, anchor: 0, label: EventType::positive(*name, *parent) });
            }
        }
        out
    }

    #[test]
    fn empty_file_gives_empty_corpus() {
        let c = parse_corpus("".as_bytes(), &LoadOptions::default()).unwrap();
        assert!(c.mentions.is_empty());
        assert_eq!(c.stats, CorpusStats::default());
    }

    #[test]
    fn one_annotation_one_mention() {
        let text = line("d", "s", 5, &[(3, "Attack", "Conflict")]);
        let c = parse_corpus(text.as_bytes(), &LoadOptions::default()).unwrap();
        assert_eq!(c.mentions.len(), 1);
        assert_eq!(c.mentions[0].anchor, 3);
        assert_eq!(c.stats.per_type["Attack"], 1);
        assert_eq!(c.sentences[0].trigger_anchors, vec![3]);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = format!("{}\n{{not json\n", line("d", "s", 2, &[]));
        match parse_corpus(text.as_bytes(), &LoadOptions::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn anchor_out_of_range_names_sentence() {
        let text = line("docX", "sentY", 3, &[(3, "Attack", "Conflict")]);
        let err = parse_corpus(text.as_bytes(), &LoadOptions::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("docX") && msg.contains("sentY"), "{msg}");
    }

    #[test]
    fn non_tree_heads_rejected() {
        assert!(validate_tree(&[-1, 0, 1]).is_ok());
        assert!(validate_tree(&[-1, -1]).is_err());
        assert!(validate_tree(&[1, 2, 1]).is_err());
        assert!(validate_tree(&[-1, 1]).is_err());
        assert!(validate_tree(&[-1, 5]).is_err());
        let bad = r#"{"docId":"d","sentId":"s","tokens":["a","b"],"depHeads":[1,0],"events":[]}"#;
        assert!(matches!(
            parse_corpus(bad.as_bytes(), &LoadOptions::default()),
            Err(Error::InvalidSentence { .. })
        ));
    }

    #[test]
    fn null_label_reserved() {
        let text = line("d", "s", 3, &[(1, "NULL", "X")]);
        assert!(parse_corpus(text.as_bytes(), &LoadOptions::default()).is_err());
    }

    #[test]
    fn long_sentence_truncated_around_anchor() {
        let n = 20;
        let tokens: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        // chain: i -> i+1, last is root
        let heads: Vec<i64> = (0..n).map(|i| if i == n - 1 { -1 } else { i as i64 + 1 }).collect();
        let text = serde_json::json!({
            "docId": "d", "sentId": "s", "tokens": tokens, "depHeads": heads,
            "events": [{"anchor": 15, "type": "Die", "parentType": "Life"}]
        })
        .to_string();
        let opts = LoadOptions { max_sentence_length: 8, ..LoadOptions::default() };
        let c = parse_corpus(text.as_bytes(), &opts).unwrap();
        let m = &c.mentions[0];
        assert_eq!(m.sentence.len(), 8);
        assert_eq!(m.sentence.tokens[m.anchor].text, "w15");
        assert!(validate_tree(&m.sentence.heads()).is_ok());
        assert_eq!(m.sentence.trigger_anchors, vec![m.anchor]);
    }

    #[test]
    fn default_parent_split() {
        let mut spec = Vec::new();
        for p in ["Business", "Contact", "Conflict", "Justice", "Life", "Movement", "Personnel", "Transaction"] {
            spec.push((format!("{p}-A"), p, 20));
        }
        let owned: Vec<(&str, &str, usize)> = spec.iter().map(|(n, p, c)| (n.as_str(), *p, *c)).collect();
        let ms = mentions(&owned);
        let split = make_split(&ms, &[], &SplitParams::ace()).unwrap();
        let parents: BTreeSet<String> =
            split.dev.mentions.iter().map(|m| m.label.parent_type.clone()).collect();
        let expected: BTreeSet<String> =
            ["Life", "Movement", "Personnel", "Transaction"].into_iter().map(String::from).collect();
        assert_eq!(parents, expected);
        assert!(split.train_types.is_disjoint(&split.dev_test_types));
    }

    #[test]
    fn small_types_dropped_everywhere() {
        let ms = mentions(&[("A", "Business", 20), ("B", "Business", 14), ("C", "Life", 20), ("D", "Life", 14)]);
        let split = make_split(&ms, &[], &SplitParams::ace()).unwrap();
        for side in [&split.train, &split.dev, &split.test] {
            assert!(!side.types().contains("B"));
            assert!(!side.types().contains("D"));
        }
        assert_eq!(split.dropped_types.len(), 2);
    }

    #[test]
    fn odd_count_favours_dev() {
        let ms = mentions(&[("A", "Business", 20), ("C", "Life", 31)]);
        let split = make_split(&ms, &[], &SplitParams::ace()).unwrap();
        assert_eq!(split.dev.mentions.len(), 16);
        assert_eq!(split.test.mentions.len(), 15);
    }

    #[test]
    fn unsatisfiable_side_is_an_error() {
        let ms = mentions(&[("A", "Business", 20), ("C", "Life", 31)]);
        let params = SplitParams { min_types_per_side: 2, ..SplitParams::ace() };
        let err = make_split(&ms, &[], &params).unwrap_err();
        assert!(err.to_string().contains("unsatisfiable"));
    }

    #[test]
    fn document_unit_keeps_documents_together() {
        let ms = mentions(&[("A", "Business", 20), ("C", "Life", 40)]);
        let params = SplitParams { unit: SplitUnit::Document, ..SplitParams::ace() };
        let split = make_split(&ms, &[], &params).unwrap();
        let dev_docs: BTreeSet<_> = split.dev.mentions.iter().map(|m| m.sentence.doc_id.clone()).collect();
        let test_docs: BTreeSet<_> = split.test.mentions.iter().map(|m| m.sentence.doc_id.clone()).collect();
        assert!(dev_docs.is_disjoint(&test_docs));
        assert_eq!(split.dev.mentions.len() + split.test.mentions.len(), 40);
    }

    #[test]
    fn manifest_serializes_rows_and_params() {
        let ms = mentions(&[("A", "Business", 15), ("C", "Life", 15)]);
        let split = make_split(&ms, &[], &SplitParams::ace()).unwrap();
        let manifest = split.manifest();
        assert_eq!(manifest.rows.len(), 30);
        let json = serde_json::to_value(&manifest).unwrap();
        assert_eq!(json["minPerType"], 15);
        assert!(json["rows"][0]["type"].is_string());
    }
}
