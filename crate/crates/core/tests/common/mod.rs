//! Helpers shared by the integration tests.
#![allow(dead_code)]

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ties::graph::{margin_loss, score_edge, edge_loss_and_grad, Edge, GraphEmbeddings};
use ties::model::{
    model_init, pool, pool_backward, ActionVocab, Attention, EncoderKind, EntityTables,
    FeatureSpec, ModelConfig, PoolingKind, SequenceExample, TiesModel,
};
use ties::nn::{
    affine, affine_backward, lstm_cell, lstm_cell_backward, sigmoid, weighted_bce,
    weighted_bce_logit_grad, BiLstm, ConvStack, LstmWeights, Mlp, Module, Objective, Parameter,
    Tensor2D,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- models

/// 2 source + 1 target + 2 action columns + Δt.
pub fn tiny_spec() -> FeatureSpec {
    FeatureSpec::new(2, 1, 2)
}

pub fn tiny_config(kind: EncoderKind, hidden: usize) -> ModelConfig {
    let mut c = ModelConfig::new(kind, tiny_spec());
    c.hidden = hidden;
    c.head_hidden = 5;
    c.deepset_hidden = 5;
    c.cnn_width = 3;
    c.max_len = 8;
    c
}

pub fn tiny_vocab() -> ActionVocab {
    ActionVocab::from_actions(["a", "b", "c"])
}

pub fn tiny_model(kind: EncoderKind, hidden: usize, seed: u64) -> TiesModel {
    model_init(tiny_config(kind, hidden), tiny_vocab(), EntityTables::empty(2, 1), seed).unwrap()
}

/// Random example over `tiny_spec` with the given mask.
pub fn random_example(mask: &[bool], rng: &mut ChaCha8Rng) -> SequenceExample {
    let spec = tiny_spec();
    let t = mask.len();
    let mut features = Tensor2D::zeros(t, spec.input_dim());
    let mut actions = vec![0; t];
    for r in (0..t).filter(|&r| mask[r]) {
        for (c, v) in features.row_mut(r).iter_mut().enumerate() {
            if !(spec.action_offset()..spec.delta_offset()).contains(&c) {
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

/// Random left-padded mask of length `t` with between 1 and `t` real steps.
pub fn random_mask(t: usize, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let real = rng.random_range(1..=t);
    (0..t).map(|i| i >= t - real).collect()
}

// ---------------------------------------------------------------- objectives

/// `Σ probe ⊙ f(x)` for a layer `f`, with `x` itself a parameter.
pub struct Probed<L> {
    pub layer: L,
    pub x: Parameter,
    pub probe: Tensor2D,
    pub forward: fn(&L, &Tensor2D) -> Tensor2D,
    pub backward: fn(&mut L, &Tensor2D, &Tensor2D) -> Tensor2D,
}

impl<L: Module> Module for Probed<L> {
    fn params(&self) -> Vec<&Parameter> {
        let mut p = self.layer.params();
        p.push(&self.x);
        p
    }
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = self.layer.params_mut();
        p.push(&mut self.x);
        p
    }
}

impl<L: Module> Objective for Probed<L> {
    fn loss(&self) -> f64 {
        (self.forward)(&self.layer, &self.x.value).hadamard(&self.probe).sum()
    }
    fn loss_and_grad(&mut self) -> f64 {
        let y = (self.forward)(&self.layer, &self.x.value);
        let dx = (self.backward)(&mut self.layer, &self.x.value, &self.probe);
        self.x.grad.add_assign(&dx);
        y.hadamard(&self.probe).sum()
    }
}

pub struct AffineLayer {
    pub w: Parameter,
    pub b: Parameter,
}

impl Module for AffineLayer {
    fn params(&self) -> Vec<&Parameter> {
        vec![&self.w, &self.b]
    }
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.w, &mut self.b]
    }
}

pub fn affine_objective(seed: u64) -> Probed<AffineLayer> {
    let mut r = rng(seed);
    Probed {
        layer: AffineLayer {
            w: Parameter::new(Tensor2D::uniform(3, 4, 1.0, &mut r)),
            b: Parameter::new(Tensor2D::uniform(1, 4, 1.0, &mut r)),
        },
        x: Parameter::new(Tensor2D::uniform(5, 3, 1.0, &mut r)),
        probe: Tensor2D::uniform(5, 4, 1.0, &mut r),
        forward: |l, x| affine(x, &l.w, &l.b).unwrap(),
        backward: |l, x, dy| affine_backward(x, dy, &mut l.w, &mut l.b),
    }
}

pub fn mlp_objective(seed: u64) -> Probed<Mlp> {
    let mut r = rng(seed);
    Probed {
        layer: Mlp::new(&[3, 6, 2], &mut r).unwrap(),
        x: Parameter::new(Tensor2D::uniform(4, 3, 1.0, &mut r)),
        probe: Tensor2D::uniform(4, 2, 1.0, &mut r),
        forward: |l, x| l.forward(x).unwrap().0,
        backward: |l, x, dy| {
            let (_, cache) = l.forward(x).unwrap();
            l.backward(&cache, dy)
        },
    }
}

pub const SEQ_MASK: [bool; 5] = [false, true, true, true, true];

pub fn bilstm_objective(seed: u64) -> Probed<BiLstm> {
    let mut r = rng(seed);
    Probed {
        layer: BiLstm::new(3, 4, 2, &mut r).unwrap(),
        x: Parameter::new(Tensor2D::uniform(5, 3, 1.0, &mut r)),
        probe: Tensor2D::uniform(5, 4, 1.0, &mut r),
        forward: |l, x| l.forward(x, &SEQ_MASK).unwrap().0,
        backward: |l, x, dy| {
            let (_, cache) = l.forward(x, &SEQ_MASK).unwrap();
            l.backward(&cache, dy)
        },
    }
}

pub fn conv_objective(seed: u64) -> Probed<ConvStack> {
    let mut r = rng(seed);
    Probed {
        layer: ConvStack::new(3, 4, 2, 3, &mut r).unwrap(),
        x: Parameter::new(Tensor2D::uniform(5, 3, 1.0, &mut r)),
        probe: Tensor2D::uniform(5, 4, 1.0, &mut r),
        forward: |l, x| l.forward(x, &SEQ_MASK).unwrap().0,
        backward: |l, x, dy| {
            let (_, cache) = l.forward(x, &SEQ_MASK).unwrap();
            l.backward(&cache, dy)
        },
    }
}

pub fn attention_objective(seed: u64) -> Probed<Attention> {
    let mut r = rng(seed);
    Probed {
        layer: Attention::new(4, &mut r),
        x: Parameter::new(Tensor2D::uniform(5, 4, 1.0, &mut r)),
        probe: Tensor2D::uniform(5, 4, 1.0, &mut r),
        forward: |l, x| l.forward(x, &SEQ_MASK).unwrap().0,
        backward: |l, x, dy| {
            let (_, cache) = l.forward(x, &SEQ_MASK).unwrap();
            l.backward(&cache, dy)
        },
    }
}

/// One LSTM step with both states as inputs; loss `Σ a⊙h + Σ b⊙c`.
pub struct CellObjective {
    pub w: LstmWeights,
    pub x: Parameter,
    pub h: Parameter,
    pub c: Parameter,
    pub probe_h: Vec<f64>,
    pub probe_c: Vec<f64>,
}

impl CellObjective {
    pub fn new(seed: u64) -> Self {
        let mut r = rng(seed);
        Self {
            w: LstmWeights::new(3, 4, &mut r),
            x: Parameter::new(Tensor2D::uniform(1, 3, 1.0, &mut r)),
            h: Parameter::new(Tensor2D::uniform(1, 4, 1.0, &mut r)),
            c: Parameter::new(Tensor2D::uniform(1, 4, 1.0, &mut r)),
            probe_h: Tensor2D::uniform(1, 4, 1.0, &mut r).into_vec(),
            probe_c: Tensor2D::uniform(1, 4, 1.0, &mut r).into_vec(),
        }
    }

    fn value(&self, h: &[f64], c: &[f64]) -> f64 {
        h.iter().zip(&self.probe_h).map(|(a, b)| a * b).sum::<f64>()
            + c.iter().zip(&self.probe_c).map(|(a, b)| a * b).sum::<f64>()
    }
}

impl Module for CellObjective {
    fn params(&self) -> Vec<&Parameter> {
        let mut p = self.w.params();
        p.extend([&self.x, &self.h, &self.c]);
        p
    }
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = self.w.params_mut();
        p.extend([&mut self.x, &mut self.h, &mut self.c]);
        p
    }
}

impl Objective for CellObjective {
    fn loss(&self) -> f64 {
        let (h, c, _) =
            lstm_cell(self.x.value.row(0), self.h.value.row(0), self.c.value.row(0), &self.w).unwrap();
        self.value(&h, &c)
    }
    fn loss_and_grad(&mut self) -> f64 {
        let (h, c, step) =
            lstm_cell(self.x.value.row(0), self.h.value.row(0), self.c.value.row(0), &self.w).unwrap();
        let (dx, dh, dc) = lstm_cell_backward(&step, &self.probe_h, &self.probe_c, &mut self.w);
        self.x.grad.add_assign(&Tensor2D::row_vector(&dx));
        self.h.grad.add_assign(&Tensor2D::row_vector(&dh));
        self.c.grad.add_assign(&Tensor2D::row_vector(&dc));
        self.value(&h, &c)
    }
}

/// Pooling followed by the scoring head and weighted BCE.
pub struct PoolHeadObjective {
    pub head: Mlp,
    pub z: Parameter,
    pub mask: Vec<bool>,
    pub kind: PoolingKind,
}

impl PoolHeadObjective {
    pub fn new(kind: PoolingKind, seed: u64) -> Self {
        let mut r = rng(seed);
        Self {
            head: Mlp::new(&[4, 6, 1], &mut r).unwrap(),
            z: Parameter::new(Tensor2D::uniform(5, 4, 1.0, &mut r)),
            mask: SEQ_MASK.to_vec(),
            kind,
        }
    }
}

impl Module for PoolHeadObjective {
    fn params(&self) -> Vec<&Parameter> {
        let mut p = self.head.params();
        p.push(&self.z);
        p
    }
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        let mut p = self.head.params_mut();
        p.push(&mut self.z);
        p
    }
}

impl Objective for PoolHeadObjective {
    fn loss(&self) -> f64 {
        let (pooled, _) = pool(&self.z.value, &self.mask, self.kind).unwrap();
        let (logit, _) = self.head.forward(&pooled).unwrap();
        weighted_bce(sigmoid(logit.get(0, 0)), 1, 3.0)
    }
    fn loss_and_grad(&mut self) -> f64 {
        let (pooled, pc) = pool(&self.z.value, &self.mask, self.kind).unwrap();
        let (logit, hc) = self.head.forward(&pooled).unwrap();
        let l = logit.get(0, 0);
        let dl = weighted_bce_logit_grad(l, 1, 3.0);
        let dp = self.head.backward(&hc, &Tensor2D::row_vector(&[dl]));
        self.z.grad.add_assign(&pool_backward(&pc, &dp));
        weighted_bce(sigmoid(l), 1, 3.0)
    }
}

/// Margin loss of one edge against fixed negatives.
pub struct MarginObjective {
    pub nodes: Parameter,
    pub rels: Parameter,
    pub edge: Edge,
    pub negatives: Vec<Edge>,
    pub margin: f64,
}

impl MarginObjective {
    /// A large margin keeps every hinge active, away from the kink.
    pub fn new(seed: u64) -> Self {
        let mut r = rng(seed);
        Self {
            nodes: Parameter::new(Tensor2D::uniform(5, 4, 1.0, &mut r)),
            rels: Parameter::new(Tensor2D::uniform(2, 4, 1.0, &mut r)),
            edge: Edge { src: 0, rel: 1, dst: 2 },
            negatives: vec![
                Edge { src: 3, rel: 1, dst: 2 },
                Edge { src: 0, rel: 1, dst: 4 },
                Edge { src: 1, rel: 1, dst: 2 },
            ],
            margin: 5.0,
        }
    }
}

impl Module for MarginObjective {
    fn params(&self) -> Vec<&Parameter> {
        vec![&self.nodes, &self.rels]
    }
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.nodes, &mut self.rels]
    }
}

impl Objective for MarginObjective {
    fn loss(&self) -> f64 {
        let n = &self.nodes.value;
        let r = &self.rels.value;
        let f = |e: Edge| score_edge(n.row(e.src), r.row(e.rel), n.row(e.dst)).unwrap();
        let negs: Vec<f64> = self.negatives.iter().map(|&e| f(e)).collect();
        margin_loss(f(self.edge), &negs, self.margin)
    }
    fn loss_and_grad(&mut self) -> f64 {
        edge_loss_and_grad(
            &self.nodes.value,
            &self.rels.value,
            self.edge,
            &self.negatives,
            self.margin,
            1.0,
            &mut self.nodes.grad,
            &mut self.rels.grad,
        )
    }
}

/// Weighted BCE of one example through the whole classifier.
pub struct ModelObjective {
    pub model: TiesModel,
    pub ex: SequenceExample,
    pub training: bool,
}

impl ModelObjective {
    pub fn new(kind: EncoderKind, pooling: PoolingKind, training: bool, seed: u64) -> Self {
        let mut model = tiny_model(kind, 4, 5);
        model.config.pooling = pooling;
        model.config.max_len = 4;
        let ex = random_example(&[false, true, true, true], &mut rng(seed));
        Self { model, ex, training }
    }

    fn dropout_rng() -> ChaCha8Rng {
        rng(77)
    }
}

impl Module for ModelObjective {
    fn params(&self) -> Vec<&Parameter> {
        self.model.params()
    }
    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        self.model.params_mut()
    }
}

impl Objective for ModelObjective {
    fn loss(&self) -> f64 {
        let (out, _) = self.model.forward(&self.ex, self.training, &mut Self::dropout_rng()).unwrap();
        weighted_bce(sigmoid(out.logit), 1, 2.0)
    }
    fn loss_and_grad(&mut self) -> f64 {
        let (out, cache) = self.model.forward(&self.ex, self.training, &mut Self::dropout_rng()).unwrap();
        self.model.backward(&self.ex, &cache, weighted_bce_logit_grad(out.logit, 1, 2.0));
        weighted_bce(sigmoid(out.logit), 1, 2.0)
    }
}

// ---------------------------------------------------------------- metrics

/// Average precision by direct integration of the step-wise PR curve in
/// exact rational arithmetic. Each item's rank is counted from scratch:
/// items with a higher score come first, equal scores keep input order.
pub fn average_precision_oracle(scores: &[f64], labels: &[u8]) -> Ratio<i64> {
    let n = scores.len();
    let mut ranked = vec![0usize; n];
    for i in 0..n {
        let rank = (0..n)
            .filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && j < i))
            .count();
        ranked[rank] = i;
    }
    let positives = labels.iter().filter(|&&l| l == 1).count() as i64;
    let mut area = Ratio::from_integer(0);
    let mut prev_recall = Ratio::from_integer(0);
    for k in 1..=n {
        let tp = ranked[..k].iter().filter(|&&i| labels[i] == 1).count() as i64;
        let precision = Ratio::new(tp, k as i64);
        let recall = Ratio::new(tp, positives);
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    area
}

pub fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

// ---------------------------------------------------------------- graphs

/// Mean score over every ordered intra-clique and cross-clique node pair of
/// the two-clique fixture.
pub fn clique_pair_means(emb: &GraphEmbeddings) -> (f64, f64) {
    let ids: Vec<String> = ["a", "b"]
        .iter()
        .flat_map(|p| (0..4).map(move |i| format!("{p}{i}")))
        .collect();
    let (mut intra, mut n_intra, mut cross, mut n_cross) = (0.0, 0, 0.0, 0);
    for s in &ids {
        for d in ids.iter().filter(|d| *d != s) {
            let score = emb.score(s, "link", d).unwrap();
            if s[..1] == d[..1] {
                intra += score;
                n_intra += 1;
            } else {
                cross += score;
                n_cross += 1;
            }
        }
    }
    (intra / n_intra as f64, cross / n_cross as f64)
}

// ---------------------------------------------------------------- pipelines

/// Vocabulary, entity tables and assembled examples for generated data.
pub fn synth_examples(
    data: &ties::data::SyntheticData,
    spec: &FeatureSpec,
    max_len: usize,
) -> (ActionVocab, EntityTables, Vec<SequenceExample>) {
    let vocab = ActionVocab::from_actions(data.action_names.iter().map(String::as_str));
    let entities = EntityTables::new(data.sources.clone(), data.targets.clone());
    let (examples, _) =
        ties::model::assemble_dataset(&data.dataset, &entities, &vocab, spec, max_len).unwrap();
    (vocab, entities, examples)
}

/// Bytes of every file under `dir`, keyed by file name.
pub fn dir_bytes(dir: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}
