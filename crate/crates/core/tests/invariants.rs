use std::collections::HashSet;

use fsed_core::checkpoint::Checkpoint;
use fsed_core::classifier::ClassDistribution;
use fsed_core::config::{DataConfig, RunConfig};
use fsed_core::corpus::{parse_corpus, Corpus, LoadOptions, SplitParams, SplitUnit};
use fsed_core::data::{build_vocabulary, split_corpus};
use fsed_core::losses::{InterMode, ScalingMode};
use fsed_core::metrics::MicroF1;
use fsed_core::optim::step_decay;
use fsed_core::prototypes::compute_attention_prototypes;
use fsed_core::sampler::{EpisodeSampler, SamplerConfig};
use fsed_core::synth::{generate_synthetic_corpus, SyntheticCorpus, SyntheticSpec};
use fsed_core::trainer::Trainer;
use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

fn fixture() -> &'static (SyntheticCorpus, Corpus) {
    static F: OnceLock<(SyntheticCorpus, Corpus)> = OnceLock::new();
    F.get_or_init(|| {
        let synth = generate_synthetic_corpus(&SyntheticSpec {
            ace_like: true,
            mentions_per_type: 24,
            distractor_sentences: 60,
            embedding_dim: 4,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let corpus = parse_corpus(synth.corpus.as_bytes(), &LoadOptions::default()).unwrap();
        (synth, corpus)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn episodes_are_pure_and_leak_free(n in 1usize..6, k in 1usize..5, q in 1usize..3, seed: u64) {
        let (synth, corpus) = fixture();
        let split = split_corpus(corpus, &DataConfig { split: synth.split_params(0), ..DataConfig::default() }).unwrap();
        let side = &split.train;
        let sampler = EpisodeSampler::new(side, &SamplerConfig { n, k, queries_per_class: q, class_pool_size: None, seed: 0 });
        // some types are too small for large k + q; the sampler must say so
        let Ok(sampler) = sampler else { return Ok(()) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ep = sampler.sample(&mut rng).unwrap();
        prop_assert_eq!(ep.num_classes(), n + 1);
        prop_assert!(ep.class_map[n].is_null);
        let mut support = HashSet::new();
        for (i, cluster) in ep.support.iter().enumerate() {
            prop_assert_eq!(cluster.len(), k);
            for m in cluster {
                prop_assert_eq!(&m.label, &ep.class_map[i]);
                prop_assert!(support.insert(m.key()));
            }
        }
        prop_assert_eq!(ep.queries.len(), (n + 1) * q);
        for (m, c) in &ep.queries {
            prop_assert_eq!(&m.label, &ep.class_map[*c]);
            prop_assert!(!support.contains(&m.key()));
        }
    }

    #[test]
    fn splits_are_disjoint_filtered_and_balanced(seed: u64, min in 5usize..30, by_doc: bool) {
        let (synth, corpus) = fixture();
        let params = SplitParams {
            min_per_type: min,
            seed,
            unit: if by_doc { SplitUnit::Document } else { SplitUnit::Mention },
            ..synth.split_params(seed)
        };
        let Ok(split) = split_corpus(corpus, &DataConfig { split: params, ..DataConfig::default() }) else {
            return Ok(());
        };
        prop_assert!(split.train_types.is_disjoint(&split.dev_test_types));
        for (t, &count) in &corpus.stats.per_type {
            let kept = split.train_types.contains(t) || split.dev_test_types.contains(t);
            prop_assert_eq!(kept, count >= min);
        }
        if !by_doc {
            for t in &split.dev_test_types {
                let dev = split.dev.mentions.iter().filter(|m| &m.label.name == t).count();
                let test = split.test.mentions.iter().filter(|m| &m.label.name == t).count();
                prop_assert!(dev.abs_diff(test) <= 1);
            }
        }
    }

    #[test]
    fn attention_weights_lie_on_the_simplex(
        k in 1usize..7,
        d in 1usize..9,
        values in prop::collection::vec(-50.0f64..50.0, 64),
    ) {
        let support = Array2::from_shape_fn((k, d), |(r, c)| values[(r * d + c) % values.len()]);
        let query: Vec<f64> = (0..d).map(|c| values[(c * 7 + 3) % values.len()]).collect();
        let p = compute_attention_prototypes(&[support.clone()], &query).unwrap();
        let alpha = &p.weights[0];
        prop_assert!(alpha.iter().all(|&a| (0.0..=1.0).contains(&a)));
        prop_assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // a convex combination stays inside the support's bounding box
        for c in 0..d {
            let col = support.column(c);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let v = p.vectors[[0, c]];
            prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
        }
    }

    #[test]
    fn softmax_is_normalized_even_for_extreme_logits(logits in prop::collection::vec(-1e6f64..1e6, 1..12)) {
        let d = ClassDistribution::from_logits(logits.clone());
        prop_assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let best = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(logits[d.argmax()], best);
    }

    #[test]
    fn micro_f1_is_bounded_and_merge_is_additive(
        preds in prop::collection::vec((0usize..4, 0usize..4), 1..60),
        cut in 0usize..60,
    ) {
        let names = ["a", "b", "c"].map(String::from).to_vec();
        let label = |c: usize| (c < 3).then(|| names[c].as_str());
        let mut all = MicroF1::new();
        let mut left = MicroF1::new();
        let mut right = MicroF1::new();
        for (i, &(g, p)) in preds.iter().enumerate() {
            all.add(label(g), label(p));
            if i < cut { left.add(label(g), label(p)) } else { right.add(label(g), label(p)) }
        }
        left.merge(&right);
        let (a, b) = (all.report(), left.report());
        prop_assert_eq!(&a, &b);
        prop_assert!((0.0..=1.0).contains(&a.f1));
        let c = a.counts;
        let expected = if 2 * c.tp + c.fp + c.fn_ == 0 { 0.0 } else { 2.0 * c.tp as f64 / (2 * c.tp + c.fp + c.fn_) as f64 };
        prop_assert!((a.f1 - expected).abs() < 1e-12);
    }

    #[test]
    fn run_config_round_trips_through_json(
        seed: u64,
        n in 1usize..20,
        k in 1usize..20,
        beta in 0.0f64..1.0,
        gamma in 0.0f64..1.0,
        literal: bool,
        query_match: bool,
        lr in 1e-4f64..1.0,
        clip in prop::option::of(0.1f64..10.0),
    ) {
        let mut cfg = RunConfig { seed, initial_lr: lr, clip_norm: clip, ..RunConfig::default() };
        cfg.sampler.n = n;
        cfg.sampler.k = k;
        cfg.sampler.class_pool_size = Some(n.max(20));
        cfg.loss.beta = beta;
        cfg.loss.gamma = gamma;
        cfg.loss.inter_mode = if literal { InterMode::Literal } else { InterMode::Separation };
        cfg.loss.scaling = if query_match { ScalingMode::QueryMatch } else { ScalingMode::PairMean };
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn step_decay_never_increases(initial in 1e-4f64..1.0, factor in 0.0f64..=1.0, every in 1usize..50, t in 0usize..500) {
        let a = step_decay(initial, factor, every, t);
        let b = step_decay(initial, factor, every, t + 1);
        prop_assert!(b <= a);
        prop_assert!(a <= initial);
    }
}

#[test]
fn checkpoint_bytes_round_trip_and_reject_truncation() {
    let (synth, corpus) = fixture();
    let mut cfg = RunConfig::default();
    cfg.data.split = synth.split_params(0);
    cfg.data.embedding_dim = 4;
    cfg.encoder.output_dim = 6;
    cfg.encoder.filters_per_size = 3;
    let vocab = build_vocabulary(&cfg.data, corpus, 1).unwrap();
    let trainer = Trainer::default();
    let model = trainer.build_model(&cfg, &vocab).unwrap();
    let ck = Checkpoint::capture(&model, &cfg, 7, "sgd");
    let bytes = ck.to_bytes();
    let back = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(back.to_bytes(), bytes);
    assert_eq!(back.iteration, 7);
    assert_eq!(back.run_config, cfg);
    let restored = back.restore(&trainer.builder).unwrap();
    for id in model.store.ids() {
        assert_eq!(model.store.get(id), restored.store.get(id));
    }
    for cut in [0, 8, 20, bytes.len() / 2, bytes.len() - 1] {
        let err = Checkpoint::from_bytes(&bytes[..cut]).unwrap_err();
        assert!(!err.is_validation(), "{err}");
    }
}

#[test]
fn malformed_corpus_lines_are_validation_errors() {
    for bad in [
        "{not json",
        r#"{"docId":"d","sentId":"s","tokens":["a","b"],"depHeads":[0],"depLabels":["x","y"],"events":[]}"#,
        r#"{"docId":"d","sentId":"s","tokens":["a"],"depHeads":[0],"depLabels":["root"],"events":[{"anchor":3,"type":"T","parentType":"P"}]}"#,
    ] {
        let err = parse_corpus(bad.as_bytes(), &LoadOptions::default()).unwrap_err();
        assert!(err.is_validation(), "{err}");
    }
}
