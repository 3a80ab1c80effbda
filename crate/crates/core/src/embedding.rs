//! Word and relative-position embeddings: `m_i = [e_i, p_i]`.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::Array2;
use rand::Rng;

use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::graph::{Graph, ParamId, ParamStore, Var};

pub const UNK: &str = "<unk>";
pub const PAD: &str = "<pad>";

/// Token-to-row map plus the initial embedding matrix. Rows `0..n` are
/// ordinary tokens, row `n` is UNK and row `n + 1` is PAD.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Array2<f64>,
}

impl Vocabulary {
    /// Builds a vocabulary from `(token, vector)` rows. UNK is the mean of
    /// all rows, PAD is zero.
    pub fn from_rows(rows: Vec<(String, Vec<f64>)>, dim: usize) -> Self {
        let n = rows.len();
        let mut matrix = Array2::zeros((n + 2, dim));
        let mut tokens = Vec::with_capacity(n);
        let mut index = HashMap::with_capacity(n);
        for (i, (tok, vec)) in rows.into_iter().enumerate() {
            debug_assert_eq!(vec.len(), dim);
            for (j, x) in vec.into_iter().enumerate() {
                matrix[[i, j]] = x;
            }
            index.entry(tok.clone()).or_insert(i);
            tokens.push(tok);
        }
        if n > 0 {
            let mean = matrix.slice(ndarray::s![..n, ..]).mean_axis(ndarray::Axis(0)).expect("nonempty");
            matrix.row_mut(n).assign(&mean);
        }
        Self { tokens, index, matrix }
    }

    /// Random uniform(-0.1, 0.1) vectors for `tokens`.
    pub fn random(tokens: &[String], dim: usize, rng: &mut impl Rng) -> Self {
        let rows = tokens
            .iter()
            .map(|t| (t.clone(), (0..dim).map(|_| rng.gen_range(-0.1..0.1)).collect()))
            .collect();
        Self::from_rows(rows, dim)
    }

    /// Rebuilds a vocabulary around an existing matrix (checkpoint restore).
    pub fn with_matrix(tokens: Vec<String>, matrix: Array2<f64>) -> Result<Self> {
        if matrix.nrows() != tokens.len() + 2 {
            return Err(Error::Checkpoint(format!(
                "vocabulary of {} tokens does not match a {}-row embedding matrix",
                tokens.len(),
                matrix.nrows()
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            index.entry(t.clone()).or_insert(i);
        }
        Ok(Self { tokens, index, matrix })
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn unk(&self) -> usize {
        self.tokens.len()
    }

    pub fn pad(&self) -> usize {
        self.tokens.len() + 1
    }

    /// Exact match, then lowercase, then UNK.
    pub fn lookup(&self, token: &str) -> usize {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        let lower = token.to_lowercase();
        self.index.get(&lower).copied().unwrap_or(self.unk())
    }
}

pub fn load_pretrained_embeddings(
    path: &Path,
    dim: usize,
    keep: Option<&HashSet<String>>,
) -> Result<Vocabulary> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(BufReader::new(file), dim, keep).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses whitespace-separated `token v1 .. v_dim` lines. A leading
/// `count dim` header line is skipped. When `keep` is given, tokens outside it
/// (and their lowercase forms) are not retained.
pub fn parse_embeddings(
    reader: impl BufRead,
    dim: usize,
    keep: Option<&HashSet<String>>,
) -> Result<Vocabulary> {
    let keep_lower: Option<HashSet<String>> = keep.map(|k| k.iter().map(|t| t.to_lowercase()).collect());
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<embeddings>", e))?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values: Vec<&str> = fields.collect();
        if line_no == 1 && values.len() == 1 && token.parse::<usize>().is_ok() && values[0].parse::<usize>().is_ok() {
            continue;
        }
        if values.len() != dim {
            return Err(Error::EmbeddingDim { line: line_no, expected: dim, found: values.len() });
        }
        if let (Some(k), Some(kl)) = (keep, &keep_lower) {
            if !k.contains(token) && !kl.contains(token) {
                continue;
            }
        }
        let vec = values
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        rows.push((token.to_string(), vec));
    }
    Ok(Vocabulary::from_rows(rows, dim))
}

/// Relative-distance lookup: distances are clamped into `[-max_dist, max_dist]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PositionTable {
    pub max_dist: usize,
    pub dim: usize,
}

impl PositionTable {
    pub fn rows(&self) -> usize {
        2 * self.max_dist + 1
    }

    pub fn row_for(&self, distance: i64) -> usize {
        let m = self.max_dist as i64;
        (distance.clamp(-m, m) + m) as usize
    }

    pub fn init(&self, rng: &mut impl Rng) -> Array2<f64> {
        Array2::from_shape_fn((self.rows(), self.dim), |_| rng.gen_range(-0.1..0.1))
    }
}

/// Trainable embedding layer registered in a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Embedder {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    unk: usize,
    pad: usize,
    pub positions: PositionTable,
    pub word: ParamId,
    pub position: ParamId,
}

impl Embedder {
    pub fn new(vocab: &Vocabulary, positions: PositionTable, store: &mut ParamStore, rng: &mut impl Rng) -> Self {
        let word = store.add("embedding.word", vocab.matrix().clone());
        let position = store.add("embedding.position", positions.init(rng));
        Self {
            tokens: vocab.tokens().to_vec(),
            index: vocab.index.clone(),
            unk: vocab.unk(),
            pad: vocab.pad(),
            positions,
            word,
            position,
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn word_dim(&self, store: &ParamStore) -> usize {
        store.get(self.word).ncols()
    }

    pub fn output_dim(&self, store: &ParamStore) -> usize {
        self.word_dim(store) + self.positions.dim
    }

    pub fn lookup(&self, token: &str) -> usize {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        self.index.get(&token.to_lowercase()).copied().unwrap_or(self.unk)
    }

    pub fn pad(&self) -> usize {
        self.pad
    }

    /// `L x (u + v)` matrix for `sentence` relative to `anchor`.
    pub fn embed(&self, g: &mut Graph, sentence: &Sentence, anchor: usize) -> Var {
        self.embed_padded(g, sentence, anchor, sentence.len())
    }

    /// As [`Embedder::embed`], followed by PAD rows up to `total_rows`.
    pub fn embed_padded(&self, g: &mut Graph, sentence: &Sentence, anchor: usize, total_rows: usize) -> Var {
        assert!(anchor < sentence.len(), "anchor {anchor} out of range");
        let n = sentence.len().max(total_rows);
        let word_rows = (0..n)
            .map(|i| Some(sentence.tokens.get(i).map_or(self.pad, |t| self.lookup(&t.text))))
            .collect();
        let pos_rows = (0..n).map(|i| Some(self.positions.row_for(i as i64 - anchor as i64))).collect();
        let w = g.param(self.word);
        let p = g.param(self.position);
        let words = g.gather_rows(w, word_rows);
        let pos = g.gather_rows(p, pos_rows);
        g.hcat(&[words, pos])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Token;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sentence(words: &[&str]) -> Sentence {
        Sentence {
            doc_id: "d".into(),
            sent_id: "s".into(),
            tokens: words
                .iter()
                .enumerate()
                .map(|(i, w)| Token { text: w.to_string(), dep_head: if i == 0 { -1 } else { 0 }, dep_label: String::new() })
                .collect(),
            trigger_anchors: vec![],
        }
    }

    #[test]
    fn two_tokens_give_four_rows() {
        let v = parse_embeddings("a 1 2 3\nb 3 4 5\n".as_bytes(), 3, None).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(v.lookup("zzz"), v.unk());
        // UNK = mean of loaded rows: ([1,2,3] + [3,4,5]) / 2
        assert_eq!(v.matrix().row(v.unk()).to_vec(), vec![2.0, 3.0, 4.0]);
        assert_eq!(v.matrix().row(v.pad()).to_vec(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_reports_line() {
        match parse_embeddings("a 1 2 3\nb 3 4\n".as_bytes(), 3, None) {
            Err(Error::EmbeddingDim { line: 2, expected: 3, found: 2 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_line_skipped_and_case_folding() {
        let v = parse_embeddings("2 2\nthe 1 0\nhired 0 1\n".as_bytes(), 2, None).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(v.lookup("Hired"), v.lookup("hired"));
        assert_ne!(v.lookup("Hired"), v.unk());
    }

    #[test]
    fn keep_filter_restricts_rows() {
        let keep: HashSet<String> = ["b".to_string()].into_iter().collect();
        let v = parse_embeddings("a 1 2\nb 3 4\n".as_bytes(), 2, Some(&keep)).unwrap();
        assert_eq!(v.tokens(), ["b".to_string()]);
    }

    #[test]
    fn position_clamping() {
        let t = PositionTable { max_dist: 2, dim: 1 };
        assert_eq!(t.row_for(0), 2);
        assert_eq!(t.row_for(-7), 0);
        assert_eq!(t.row_for(9), 4);
    }

    #[test]
    fn embed_matches_hand_concatenation() {
        let vocab = parse_embeddings("x 1 2 3\ny 4 5 6\nz 7 8 9\n".as_bytes(), 3, None).unwrap();
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let emb = Embedder::new(&vocab, PositionTable { max_dist: 1, dim: 2 }, &mut store, &mut rng);
        *store.get_mut(emb.position) = array![[-1.0, -1.5], [0.0, 0.5], [1.0, 1.5]];
        let s = sentence(&["z", "x", "y"]);
        let mut g = Graph::new(&store);
        let e = emb.embed(&mut g, &s, 2);
        // distances -2 -> clamp -1, -1, 0
        let expected = array![
            [7.0, 8.0, 9.0, -1.0, -1.5],
            [1.0, 2.0, 3.0, -1.0, -1.5],
            [4.0, 5.0, 6.0, 0.0, 0.5]
        ];
        assert_eq!(g.value(e), &expected);
    }

    #[test]
    fn anchor_row_uses_distance_zero() {
        let vocab = parse_embeddings("x 1 2\n".as_bytes(), 2, None).unwrap();
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let emb = Embedder::new(&vocab, PositionTable { max_dist: 4, dim: 3 }, &mut store, &mut rng);
        let s = sentence(&["x", "x", "x", "x"]);
        let mut g = Graph::new(&store);
        let e = emb.embed(&mut g, &s, 1);
        let zero = store.get(emb.position).row(4).to_vec();
        assert_eq!(g.value(e).row(1).slice(ndarray::s![2..]).to_vec(), zero);
    }
}
