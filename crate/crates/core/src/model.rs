//! Assembles embedder, encoder, prototype strategy and distance into a
//! trainable few-shot model.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classifier::{builtin_distances, builtin_families, Distance, DistanceFactory, FamilySpec};
use crate::corpus::EventMention;
use crate::embedding::{Embedder, PositionTable, Vocabulary};
use crate::encoders::{builtin_encoders, Encoder, EncoderConfig, EncoderFactory, EncoderInput};
use crate::error::Result;
use crate::graph::{Graph, ParamStore, Var};
use crate::losses::{combine, intra_loss, inter_loss, query_loss, LossBreakdown, LossConfig};
use crate::prototypes::{builtin_prototypes, mean_prototypes, PrototypeFactory, PrototypeStrategy};
use crate::registry::Registry;
use crate::sampler::Episode;

/// Every strategy registry a model is assembled from. Callers may register
/// additional encoders, distances, prototype strategies or families.
#[derive(Debug, Clone)]
pub struct ModelBuilder {
    pub encoders: Registry<EncoderFactory>,
    pub distances: Registry<DistanceFactory>,
    pub prototypes: Registry<PrototypeFactory>,
    pub families: Registry<FamilySpec>,
}

impl Default for ModelBuilder {
    fn default() -> Self {
        Self {
            encoders: builtin_encoders(),
            distances: builtin_distances(),
            prototypes: builtin_prototypes(),
            families: builtin_families(),
        }
    }
}

impl ModelBuilder {
    /// Builds a freshly initialized model. Initialization is a pure function
    /// of the arguments.
    pub fn build(
        &self,
        family: &str,
        encoder_cfg: &EncoderConfig,
        vocab: &Vocabulary,
        positions: PositionTable,
        seed: u64,
    ) -> Result<FewShotModel> {
        encoder_cfg.validate()?;
        let spec = self.families.get(family)?;
        let encoder_factory = self.encoders.get(&encoder_cfg.kind)?;
        let distance_factory = self.distances.get(spec.distance)?;
        let prototype_factory = self.prototypes.get(spec.prototype)?;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let embedder = Embedder::new(vocab, positions, &mut store, &mut rng);
        let input_dim = embedder.output_dim(&store);
        let encoder = encoder_factory(encoder_cfg, input_dim, &mut store, &mut rng)?;
        let distance = distance_factory(encoder.output_dim(), &mut store, &mut rng);
        Ok(FewShotModel {
            family: spec,
            store,
            embedder,
            encoder,
            prototypes: prototype_factory(),
            distance,
            dropout: encoder_cfg.dropout,
        })
    }
}

#[derive(Debug)]
pub struct FewShotModel {
    pub family: FamilySpec,
    pub store: ParamStore,
    pub embedder: Embedder,
    pub encoder: Box<dyn Encoder>,
    pub prototypes: Box<dyn PrototypeStrategy>,
    pub distance: Box<dyn Distance>,
    pub dropout: f64,
}

/// Graph nodes produced by one episode forward pass.
#[derive(Debug, Clone)]
pub struct EpisodeOutput {
    /// `K x d` support vectors per class, NULL last.
    pub support: Vec<Var>,
    pub queries: Vec<Var>,
    /// `Q x (N + 1)` logits.
    pub logits: Var,
    /// Mean prototypes regardless of family; used by the inter-cluster term.
    pub mean_prototypes: Var,
    pub gold: Vec<usize>,
}

impl FewShotModel {
    pub fn output_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    /// `1 x d` instance vector. With `rng`, dropout is applied.
    pub fn encode_mention(&self, g: &mut Graph, m: &EventMention, rng: Option<&mut ChaCha8Rng>) -> Var {
        let emb = self.embedder.embed(g, &m.sentence, m.anchor);
        let heads = m.sentence.heads();
        let v = self.encoder.encode(g, &EncoderInput { emb, len: m.sentence.len(), anchor: m.anchor, heads: &heads });
        match rng {
            Some(rng) if self.dropout > 0.0 => {
                let keep = 1.0 - self.dropout;
                let mask = Array2::from_shape_fn(g.shape(v), |_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 });
                g.mask_mul(v, mask)
            }
            _ => v,
        }
    }

    pub fn forward_episode(&self, g: &mut Graph, ep: &Episode, mut rng: Option<&mut ChaCha8Rng>) -> EpisodeOutput {
        let support: Vec<Var> = ep
            .support
            .iter()
            .map(|cluster| {
                let rows: Vec<Var> = cluster.iter().map(|m| self.encode_mention(g, m, rng.as_deref_mut())).collect();
                g.vcat(&rows)
            })
            .collect();
        let queries: Vec<Var> = ep.queries.iter().map(|(m, _)| self.encode_mention(g, m, rng.as_deref_mut())).collect();
        let gold = ep.queries.iter().map(|(_, c)| *c).collect();

        let mean = mean_prototypes(g, &support);
        let rows: Vec<Var> = queries
            .iter()
            .map(|&q| {
                let protos = if self.prototypes.query_dependent() {
                    self.prototypes.prototypes(g, &support, q)
                } else {
                    mean
                };
                self.distance.logits(g, q, protos)
            })
            .collect();
        let logits = g.vcat(&rows);
        EpisodeOutput { support, queries, logits, mean_prototypes: mean, gold }
    }

    /// Full episode objective. Returns the scalar loss node, its breakdown and
    /// the forward outputs.
    pub fn episode_loss(
        &self,
        g: &mut Graph,
        ep: &Episode,
        cfg: &LossConfig,
        rng: Option<&mut ChaCha8Rng>,
    ) -> (Var, LossBreakdown, EpisodeOutput) {
        let out = self.forward_episode(g, ep, rng);
        let q = query_loss(g, out.logits, &out.gold);
        if !cfg.auxiliary {
            let (total, breakdown) = combine(g, q, None, None, cfg);
            return (total, breakdown, out);
        }
        let classes = if cfg.include_null { out.support.len() } else { out.support.len() - 1 };
        let intra = intra_loss(g, &out.support[..classes]);
        let protos = if cfg.include_null {
            out.mean_prototypes
        } else {
            g.gather_rows(out.mean_prototypes, (0..classes).map(Some).collect())
        };
        let inter = inter_loss(g, protos, cfg.inter_mode);
        let (total, breakdown) = combine(g, q, Some(intra), Some((inter, cfg.inter_mode)), cfg);
        (total, breakdown, out)
    }

    /// Predicted episode class per query, without dropout.
    pub fn predict_episode(&self, ep: &Episode) -> Vec<usize> {
        let mut g = Graph::new(&self.store);
        let out = self.forward_episode(&mut g, ep, None);
        g.value(out.logits).rows().into_iter().map(|r| crate::classifier::argmax(r.as_slice().expect("contiguous"))).collect()
    }

    /// Query logits without dropout, row per query.
    pub fn episode_logits(&self, ep: &Episode) -> Array2<f64> {
        let mut g = Graph::new(&self.store);
        let out = self.forward_episode(&mut g, ep, None);
        g.value(out.logits).clone()
    }
}
