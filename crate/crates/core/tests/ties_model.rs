use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ties::model::{
    load_model, load_model_as, model_init, save_model, ActionVocab, EncoderKind, EntityTables,
    FeatureSpec, ModelConfig, PoolingKind, SequenceExample, TiesModel, MANIFEST_FILE,
};
use ties::nn::{
    grad_check_report, sigmoid, weighted_bce, weighted_bce_logit_grad, GradCheckConfig, Module,
    Objective, Parameter, Tensor2D,
};
use ties::Error;

fn tiny_spec() -> FeatureSpec {
    // 2 + 1 + 2 + Δt = 6 columns
    FeatureSpec::new(2, 1, 2)
}

fn tiny_config(kind: EncoderKind) -> ModelConfig {
    let mut c = ModelConfig::new(kind, tiny_spec());
    c.hidden = 4;
    c.head_hidden = 5;
    c.deepset_hidden = 5;
    c.cnn_width = 3;
    c.max_len = 4;
    c
}

fn vocab() -> ActionVocab {
    ActionVocab::from_actions(["a", "b", "c"])
}

fn tiny_model(kind: EncoderKind, seed: u64) -> TiesModel {
    model_init(tiny_config(kind), vocab(), EntityTables::empty(2, 1), seed).unwrap()
}

fn random_example(spec: &FeatureSpec, mask: &[bool], rng: &mut ChaCha8Rng) -> SequenceExample {
    let t = mask.len();
    let mut features = Tensor2D::zeros(t, spec.input_dim());
    let mut actions = vec![0; t];
    for r in 0..t {
        if !mask[r] {
            continue;
        }
        for (c, v) in features.row_mut(r).iter_mut().enumerate() {
            let in_action = (spec.action_offset()..spec.delta_offset()).contains(&c);
            if !in_action {
                *v = rng.random_range(-1.0..1.0);
            }
        }
        actions[r] = rng.random_range(1..4);
    }
    SequenceExample {
        features,
        actions,
        mask: mask.to_vec(),
        label: Some(1),
        source_id: "x".into(),
    }
}

/// Weighted BCE of one example as a function of every model parameter.
struct ExampleLoss {
    model: TiesModel,
    ex: SequenceExample,
    label: u8,
    training: bool,
}

impl Module for ExampleLoss {
    fn params(&self) -> Vec<&Parameter> {
        self.model.params()
    }
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.model.params_mut()
    }
}

impl ExampleLoss {
    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(77)
    }
}

impl Objective for ExampleLoss {
    fn loss(&self) -> f64 {
        let (out, _) = self.model.forward(&self.ex, self.training, &mut Self::rng()).unwrap();
        weighted_bce(sigmoid(out.logit), self.label, 2.0)
    }

    fn loss_and_grad(&mut self) -> f64 {
        let (out, cache) = self.model.forward(&self.ex, self.training, &mut Self::rng()).unwrap();
        let dlogit = weighted_bce_logit_grad(out.logit, self.label, 2.0);
        self.model.backward(&self.ex, &cache, dlogit);
        weighted_bce(sigmoid(out.logit), self.label, 2.0)
    }
}

fn check_full_model(kind: EncoderKind, pooling: PoolingKind, training: bool, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = tiny_model(kind, 5);
    model.config.pooling = pooling;
    let ex = random_example(&tiny_spec(), &[false, true, true, true], &mut rng);
    let mut obj = ExampleLoss { model, ex, label: 1, training };
    let cfg = GradCheckConfig {
        samples: 16,
        ..GradCheckConfig::default()
    };
    let report = grad_check_report(&mut obj, &cfg);
    assert!(
        cfg.passes(report.max_rel_error),
        "{kind:?}/{pooling:?} training={training}: {report:?}"
    );
}

#[test]
fn full_model_gradients_rnn() {
    check_full_model(EncoderKind::Rnn, PoolingKind::Mean, false, 21);
    check_full_model(EncoderKind::Rnn, PoolingKind::Sum, true, 21);
}

#[test]
fn full_model_gradients_cnn() {
    check_full_model(EncoderKind::Cnn, PoolingKind::Mean, false, 21);
    check_full_model(EncoderKind::Cnn, PoolingKind::Max, true, 23);
    check_full_model(EncoderKind::Cnn, PoolingKind::Sum, true, 23);
}

#[test]
fn full_model_gradients_deepset() {
    check_full_model(EncoderKind::DeepSet, PoolingKind::Mean, false, 21);
    check_full_model(EncoderKind::DeepSet, PoolingKind::Mean, true, 21);
}

#[test]
fn deepset_is_permutation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut cfg = tiny_config(EncoderKind::DeepSet);
    cfg.max_len = 12;
    let model = model_init(cfg, vocab(), EntityTables::empty(2, 1), 3).unwrap();
    let mut mask = vec![true; 12];
    mask[..3].fill(false);
    let ex = random_example(&tiny_spec(), &mask, &mut rng);
    let base = model.score(&ex).unwrap();
    for _ in 0..20 {
        let mut order: Vec<usize> = (0..9).collect();
        order.shuffle(&mut rng);
        let out = model.score(&ex.permute_active(&order)).unwrap();
        for (a, b) in base.embedding.iter().zip(&out.embedding) {
            assert!((a - b).abs() <= 1e-9);
        }
    }
}

#[test]
fn rnn_is_order_sensitive() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let model = tiny_model(EncoderKind::Rnn, 1);
    let ex = random_example(&tiny_spec(), &[true; 4], &mut rng);
    let base = model.score(&ex).unwrap().score;
    let flipped = model.score(&ex.permute_active(&[3, 2, 1, 0])).unwrap().score;
    assert!((base - flipped).abs() > 1e-9, "{base} vs {flipped}");
}

#[test]
fn padding_never_changes_the_score() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for kind in EncoderKind::ALL {
        for pooling in [PoolingKind::Mean, PoolingKind::Max, PoolingKind::Sum] {
            let mut model = tiny_model(kind, 4);
            model.config.pooling = pooling;
            let ex = random_example(&tiny_spec(), &[false, true, true, true], &mut rng);
            let a = model.score(&ex).unwrap().score;
            let b = model.score(&ex.with_extra_padding(7)).unwrap().score;
            assert!((a - b).abs() <= 1e-9, "{kind:?}/{pooling:?}: {a} vs {b}");
        }
    }
}

#[test]
fn mean_pooling_of_identical_rows() {
    use ties::model::pool;
    let z = Tensor2D::from_rows(&[vec![0.5, -2.0], vec![0.5, -2.0], vec![0.5, -2.0]]).unwrap();
    let (p, _) = pool(&z, &[true, true, true], PoolingKind::Mean).unwrap();
    assert_eq!(p.data(), &[0.5, -2.0]);
}

#[test]
fn scores_are_strictly_inside_unit_interval_and_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for kind in EncoderKind::ALL {
        let model = tiny_model(kind, 9);
        for _ in 0..20 {
            let mut ex = random_example(&tiny_spec(), &[false, true, true, true], &mut rng);
            for v in ex.features.data_mut() {
                *v *= 50.0;
            }
            let a = model.score(&ex).unwrap();
            let b = model.score(&ex).unwrap();
            assert_eq!(a, b);
            assert!(a.score > 0.0 && a.score < 1.0);
            assert!(a.embedding.iter().all(|v| v.is_finite()));
        }
    }
}

#[test]
fn init_is_seeded_and_bounded() {
    for kind in EncoderKind::ALL {
        assert_eq!(tiny_model(kind, 3), tiny_model(kind, 3));
        assert_ne!(tiny_model(kind, 3), tiny_model(kind, 4));
        let m = tiny_model(kind, 3);
        assert!(m.actions.value.row(0).iter().all(|&v| v == 0.0));
        assert!(m.actions.value.data().iter().all(|v| v.abs() <= 0.05));
        for (name, p) in m.named_params() {
            if name == "actions" {
                continue;
            }
            // every weight matrix and bias row is bounded by 1/sqrt(fan_in)
            let (rows, _) = p.shape();
            let bound_rows = if rows == 1 { None } else { Some(rows) };
            if let Some(fan_in) = bound_rows {
                let bound = 1.0 / (fan_in as f64).sqrt();
                assert!(
                    p.value.data().iter().all(|v| v.abs() <= bound + 1e-15),
                    "{name}"
                );
            }
        }
    }
}

#[test]
fn mismatched_features_are_shape_errors() {
    let model = tiny_model(EncoderKind::Cnn, 0);
    let ex = SequenceExample {
        features: Tensor2D::zeros(4, 5),
        actions: vec![0; 4],
        mask: vec![true; 4],
        label: None,
        source_id: "x".into(),
    };
    assert!(matches!(model.score(&ex), Err(Error::Shape { .. })));
}

#[test]
fn checkpoint_round_trip_scores_identically() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let dir = tempfile::tempdir().unwrap();
    for kind in EncoderKind::ALL {
        let mut entities = EntityTables::empty(2, 1);
        entities.sources.insert("u1", &[0.25, -1.5]).unwrap();
        entities.targets.insert("v1", &[3.0]).unwrap();
        let model = model_init(tiny_config(kind), vocab(), entities, 12).unwrap();
        let path = dir.path().join(kind.as_str());
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, model);
        for _ in 0..100 {
            let ex = random_example(&tiny_spec(), &[false, false, true, true], &mut rng);
            let a = model.score(&ex).unwrap().score;
            let b = back.score(&ex).unwrap().score;
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn corrupted_checkpoints_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let model = tiny_model(EncoderKind::Cnn, 2);
    save_model(&model, dir.path()).unwrap();
    let blob = dir.path().join("head_0.f64");
    let original = std::fs::read(&blob).unwrap();

    let mut flipped = original.clone();
    flipped[3] ^= 0x40;
    std::fs::write(&blob, &flipped).unwrap();
    assert!(matches!(load_model(dir.path()), Err(Error::Integrity(_))));

    std::fs::write(&blob, &original[..original.len() - 8]).unwrap();
    assert!(matches!(load_model(dir.path()), Err(Error::Integrity(_))));

    std::fs::write(&blob, &original).unwrap();
    assert!(load_model(dir.path()).is_ok());
    assert!(matches!(
        load_model_as(dir.path(), EncoderKind::Rnn),
        Err(Error::KindMismatch { .. })
    ));

    let manifest = dir.path().join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&manifest).unwrap();
    std::fs::write(&manifest, text.replace("format_version = 1", "format_version = 9")).unwrap();
    assert!(matches!(
        load_model(dir.path()),
        Err(Error::Version { found: 9, expected: 1 })
    ));
}
