//! End-to-end acceptance checks, one line per check.
//!
//! Runs as a plain binary (`cargo test --test acceptance`) and exits non-zero
//! if any check fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;

use common::*;
use ties::data::{
    centroid_separation, export_pca_projection, generate_synthetic, write_synthetic, SynthConfig,
    SyntheticData,
};
use ties::graph::{train_graph, two_clique_graph, EmbeddingTable, GraphTrainConfig, NegativeSampleConfig};
use ties::model::{
    load_model, model_init, save_model, EncoderKind, FeatureSpec, ModelConfig, PoolingKind,
    SequenceExample, TiesModel,
};
use ties::nn::{grad_check_report, GradCheckConfig, Objective, Tensor2D};
use ties::train::{
    hybrid_row_name, pr_auc, run_protocol, solo_row_name, split_indices, train, ProtocolConfig,
    SplitSpec, TrainConfig,
};
use ties::Error;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, started: Instant, detail: String) -> Outcome {
    let took = started.elapsed();
    ensure(took <= limit, format!("{detail}, {:.1}s (limit {}s)", took.as_secs_f64(), limit.as_secs()))
}

// ---------------------------------------------------------------- gradients

fn check<O: Objective>(name: &str, obj: &mut O, worst: &mut Vec<String>) -> f64 {
    let cfg = GradCheckConfig {
        samples: 64,
        ..GradCheckConfig::new(1e-3, 1e-4)
    };
    let report = grad_check_report(obj, &cfg);
    if !cfg.passes(report.max_rel_error) {
        worst.push(format!("{name}: {:.2e}", report.max_rel_error));
    }
    report.max_rel_error
}

fn gradient_integrity() -> Outcome {
    let started = Instant::now();
    let mut failures = Vec::new();
    let mut max_err: f64 = 0.0;
    let mut record = |e: f64| max_err = max_err.max(e);
    record(check("affine", &mut affine_objective(1), &mut failures));
    record(check("lstm cell", &mut CellObjective::new(2), &mut failures));
    record(check("bilstm", &mut bilstm_objective(3), &mut failures));
    record(check("conv stack", &mut conv_objective(4), &mut failures));
    record(check("mlp", &mut mlp_objective(5), &mut failures));
    record(check("attention", &mut attention_objective(6), &mut failures));
    for (i, kind) in [PoolingKind::Mean, PoolingKind::Max, PoolingKind::Sum].into_iter().enumerate() {
        record(check(&format!("{kind:?} pool + head"), &mut PoolHeadObjective::new(kind, 7 + i as u64), &mut failures));
    }
    record(check("margin loss", &mut MarginObjective::new(10), &mut failures));
    for kind in EncoderKind::ALL {
        for training in [false, true] {
            let seed = if kind == EncoderKind::Cnn { 23 } else { 21 };
            let name = format!("{kind} classifier (dropout {training})");
            record(check(&name, &mut ModelObjective::new(kind, PoolingKind::Mean, training, seed), &mut failures));
        }
    }
    if !failures.is_empty() {
        return Err(failures.join("; "));
    }
    within(Duration::from_secs(60), started, format!("max relative error {max_err:.2e}"))
}

// ---------------------------------------------------------------- invariances

fn order_behaviour() -> Outcome {
    let started = Instant::now();
    let mut r = rng(100);
    let deepset = tiny_model(EncoderKind::DeepSet, 8, 1);
    let rnn = tiny_model(EncoderKind::Rnn, 8, 1);
    let mut worst: f64 = 0.0;
    let mut order_sensitive = 0;
    for _ in 0..100 {
        let ex = random_example(&[false, false, true, true, true, true, true, true], &mut r);
        let base = deepset.score(&ex).map_err(|e| e.to_string())?;
        for _ in 0..10 {
            let mut order: Vec<usize> = (0..ex.active_len()).collect();
            order.shuffle(&mut r);
            let out = deepset.score(&ex.permute_active(&order)).map_err(|e| e.to_string())?;
            for (a, b) in base.embedding.iter().zip(&out.embedding) {
                worst = worst.max((a - b).abs());
            }
            worst = worst.max((base.score - out.score).abs());
        }
        let mut order: Vec<usize> = (0..ex.active_len()).collect();
        while order.iter().enumerate().all(|(i, &o)| i == o) {
            order.shuffle(&mut r);
        }
        let a = rnn.score(&ex).map_err(|e| e.to_string())?.score;
        let b = rnn.score(&ex.permute_active(&order)).map_err(|e| e.to_string())?.score;
        if (a - b).abs() > 1e-6 {
            order_sensitive += 1;
        }
    }
    if worst > 1e-9 || order_sensitive < 95 {
        return Err(format!("deepset drift {worst:.2e}, rnn changed on {order_sensitive}/100"));
    }
    within(
        Duration::from_secs(30),
        started,
        format!("deepset drift {worst:.2e}, rnn changed on {order_sensitive}/100"),
    )
}

fn padding_neutrality() -> Outcome {
    let mut r = rng(200);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for kind in EncoderKind::ALL {
        for pooling in [PoolingKind::Mean, PoolingKind::Max, PoolingKind::Sum] {
            let mut model = tiny_model(kind, 6, 3);
            model.config.pooling = pooling;
            model.config.max_len = 32;
            for _ in 0..20 {
                let mask = random_mask(8, &mut r);
                let ex = random_example(&mask, &mut r);
                let a = model.score(&ex).map_err(|e| e.to_string())?.score;
                let b = model
                    .score(&ex.with_extra_padding(ex.len()))
                    .map_err(|e| e.to_string())?
                    .score;
                worst = worst.max((a - b).abs());
                cases += 1;
            }
        }
    }
    ensure(worst <= 1e-9, format!("{cases} examples, max score change {worst:.2e}"))
}

// ---------------------------------------------------------------- metrics

fn label_patterns(n: usize) -> impl Iterator<Item = Vec<u8>> {
    (0u32..1 << n).map(move |bits| (0..n).map(|i| ((bits >> i) & 1) as u8).collect())
}

fn pr_auc_exactness() -> Outcome {
    let mut r = rng(300);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let mut compare = |scores: &[f64], labels: &[u8]| -> Result<(), String> {
        let has_both = labels.contains(&0) && labels.contains(&1);
        match pr_auc(scores, labels) {
            Ok(v) if has_both => {
                worst = worst.max((v - ratio_to_f64(average_precision_oracle(scores, labels))).abs());
                cases += 1;
                Ok(())
            }
            Err(Error::Metric(_)) if !has_both => Ok(()),
            other => Err(format!("{scores:?} {labels:?}: {other:?}")),
        }
    };
    for n in 1..=8usize {
        let mut lists: Vec<Vec<f64>> = vec![(0..n).map(|i| i as f64).collect()];
        for _ in 0..3 {
            let mut distinct: Vec<f64> = (0..n).map(|i| i as f64 * 0.1).collect();
            distinct.shuffle(&mut r);
            lists.push(distinct);
        }
        let tied = if n <= 6 { 3 } else { 12 };
        for _ in 0..tied {
            lists.push((0..n).map(|_| (rand::Rng::random_range(&mut r, 0..3)) as f64).collect());
        }
        lists.push(vec![0.5; n]);
        for scores in &lists {
            for labels in label_patterns(n) {
                compare(scores, &labels)?;
            }
        }
    }
    let perfect = pr_auc(&[0.9, 0.8, 0.3, 0.1], &[1, 1, 0, 0]).map_err(|e| e.to_string())?;
    ensure(
        worst <= 1e-12 && perfect == 1.0,
        format!("{cases} score/label cases, max deviation {worst:.2e}, perfect ranking {perfect}"),
    )
}

// ---------------------------------------------------------------- graph embeddings

fn clique_separation() -> Outcome {
    let started = Instant::now();
    let g = two_clique_graph();
    let mut margins = Vec::new();
    for seed in 0..10 {
        let cfg = GraphTrainConfig {
            dim: 8,
            margin: 0.5,
            lr: 0.1,
            epochs: 50,
            batch_size: 4,
            negatives: NegativeSampleConfig {
                negatives_per_edge: 4,
                rng_seed: seed,
            },
        };
        let trained = train_graph(&g, &cfg).map_err(|e| e.to_string())?;
        let (intra, cross) = clique_pair_means(&trained.embeddings);
        if intra <= cross {
            return Err(format!("seed {seed}: intra {intra:.3} <= cross {cross:.3}"));
        }
        margins.push(intra - cross);
    }
    let smallest = margins.iter().copied().fold(f64::INFINITY, f64::min);
    within(Duration::from_secs(10), started, format!("10/10 seeds, smallest gap {smallest:.3}"))
}

// ---------------------------------------------------------------- learning

struct Pipeline {
    data: SyntheticData,
    examples: Vec<SequenceExample>,
    train_idx: Vec<usize>,
    test_idx: Vec<usize>,
    model: TiesModel,
    test_ap: f64,
    elapsed: Duration,
}

fn deepset_config(spec: FeatureSpec) -> ModelConfig {
    let mut c = ModelConfig::new(EncoderKind::DeepSet, spec);
    c.hidden = 32;
    c.max_len = 64;
    c
}

fn pipeline() -> &'static Result<Pipeline, String> {
    static CELL: OnceLock<Result<Pipeline, String>> = OnceLock::new();
    CELL.get_or_init(|| {
        let started = Instant::now();
        let data = generate_synthetic(&SynthConfig::default()).map_err(|e| e.to_string())?;
        let spec = FeatureSpec::new(16, 16, 32);
        let (vocab, entities, examples) = synth_examples(&data, &spec, 64);
        let [a, b, test_idx] =
            split_indices(examples.len(), &SplitSpec::new([0.7, 0.1, 0.2], 1)).map_err(|e| e.to_string())?;
        let train_idx: Vec<usize> = a.into_iter().chain(b).collect();
        let train_set: Vec<SequenceExample> = train_idx.iter().map(|&i| examples[i].clone()).collect();
        let mut model = model_init(deepset_config(spec), vocab, entities, 0).map_err(|e| e.to_string())?;
        let cfg = TrainConfig {
            track_pr_auc: false,
            ..TrainConfig::default()
        };
        train(&mut model, &train_set, &cfg).map_err(|e| e.to_string())?;
        let test: Vec<SequenceExample> = test_idx.iter().map(|&i| examples[i].clone()).collect();
        let scores: Vec<f64> = model
            .score_all(&test)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|o| o.score)
            .collect();
        let labels: Vec<u8> = test.iter().map(|e| e.label.unwrap()).collect();
        let test_ap = pr_auc(&scores, &labels).map_err(|e| e.to_string())?;
        Ok(Pipeline {
            data,
            examples,
            train_idx,
            test_idx,
            model,
            test_ap,
            elapsed: started.elapsed(),
        })
    })
}

fn end_to_end_learning() -> Outcome {
    let p = pipeline().as_ref().map_err(Clone::clone)?;
    let detail = format!(
        "deepset on {} train / {} held-out sequences, held-out PR-AUC {:.4}, {:.1}s",
        p.train_idx.len(),
        p.test_idx.len(),
        p.test_ap,
        p.elapsed.as_secs_f64()
    );
    ensure(p.test_ap >= 0.9 && p.elapsed <= Duration::from_secs(300), detail)
}

fn hybrid_gain() -> Outcome {
    let data = generate_synthetic(&SynthConfig {
        n_normal: 600,
        n_bad: 200,
        stealth_fraction: 0.5,
        mean_seq_len: 30,
        seed: 11,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let entities = ties::model::EntityTables::new(data.sources.clone(), data.targets.clone());
    let mut mc = ModelConfig::new(EncoderKind::Cnn, FeatureSpec::new(16, 16, 16));
    mc.hidden = 16;
    mc.max_len = 48;
    mc.head_hidden = 32;
    mc.deepset_hidden = 32;
    let mut pc = ProtocolConfig::new(mc);
    pc.fractions = [0.6, 0.2, 0.2];
    pc.train.epochs = 5;
    pc.seed = 3;
    let report = run_protocol(&data.dataset, &entities, &data.baseline, &pc).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    let mut ok = true;
    for kind in EncoderKind::ALL {
        let solo = report.row(&solo_row_name(kind)).ok_or("missing solo row")?.median_gap;
        let hybrid = report.row(&hybrid_row_name(kind)).ok_or("missing hybrid row")?.median_gap;
        ok &= solo < 0.0 && hybrid >= 0.03;
        parts.push(format!("{kind}: solo {solo:+.3} hybrid {hybrid:+.3}"));
    }
    ensure(ok, parts.join(", "))
}

fn warm_start_advantage() -> Outcome {
    let p = pipeline().as_ref().map_err(Clone::clone)?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ckpt = dir.path().join("pretrained");
    save_model(&p.model, &ckpt).map_err(|e| e.to_string())?;
    // overlapping data: the second half of the training indices plus held-out sequences
    let overlap: Vec<SequenceExample> = p.train_idx[p.train_idx.len() / 2..]
        .iter()
        .chain(&p.test_idx)
        .map(|&i| p.examples[i].clone())
        .collect();
    let first_epoch_loss = |warm: bool| -> Result<f64, String> {
        let mut model = model_init(p.model.config.clone(), p.model.vocab.clone(), p.model.entities.clone(), 9)
            .map_err(|e| e.to_string())?;
        let cfg = TrainConfig {
            epochs: 1,
            seed: 4,
            track_pr_auc: false,
            warm_start: warm.then(|| ckpt.clone()),
            ..TrainConfig::default()
        };
        Ok(train(&mut model, &overlap, &cfg).map_err(|e| e.to_string())?.epochs[0].loss)
    };
    let cold = first_epoch_loss(false)?;
    let warm = first_epoch_loss(true)?;
    ensure(warm <= cold, format!("first-epoch loss warm {warm:.4} vs cold {cold:.4}"))
}

// ---------------------------------------------------------------- persistence

fn determinism_and_persistence() -> Outcome {
    let err = |e: Error| e.to_string();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = generate_synthetic(&SynthConfig {
        n_normal: 80,
        n_bad: 40,
        mean_seq_len: 12,
        ..Default::default()
    })
    .map_err(err)?;
    let spec = FeatureSpec::new(16, 16, 8);
    let (vocab, entities, examples) = synth_examples(&data, &spec, 16);

    // synthetic files
    for run in ["synth_a", "synth_b"] {
        let again = generate_synthetic(&SynthConfig {
            n_normal: 80,
            n_bad: 40,
            mean_seq_len: 12,
            ..Default::default()
        })
        .map_err(err)?;
        write_synthetic(&again, &dir.path().join(run)).map_err(err)?;
    }
    if dir_bytes(&dir.path().join("synth_a")) != dir_bytes(&dir.path().join("synth_b")) {
        return Err("synthetic files differ between identical runs".into());
    }

    // checkpoints of two identical training runs, per encoder
    let mut trained = Vec::new();
    for kind in EncoderKind::ALL {
        let mut mc = ModelConfig::new(kind, spec.clone());
        mc.hidden = 8;
        mc.max_len = 16;
        mc.head_hidden = 8;
        mc.deepset_hidden = 8;
        let cfg = TrainConfig {
            epochs: 2,
            seed: 5,
            ..TrainConfig::default()
        };
        let mut bytes = Vec::new();
        for run in ["a", "b"] {
            let mut model = model_init(mc.clone(), vocab.clone(), entities.clone(), 2).map_err(err)?;
            train(&mut model, &examples, &cfg).map_err(err)?;
            let path = dir.path().join(format!("{kind}_{run}"));
            save_model(&model, &path).map_err(err)?;
            bytes.push(dir_bytes(&path));
            if run == "a" {
                trained.push((model, path));
            }
        }
        if bytes[0] != bytes[1] {
            return Err(format!("{kind} checkpoints differ between identical runs"));
        }
    }

    // round trip
    let mut worst: f64 = 0.0;
    for (model, path) in &trained {
        let back = load_model(path).map_err(err)?;
        for (a, b) in model.score_all(&examples).map_err(err)?.iter().zip(back.score_all(&examples).map_err(err)?) {
            worst = worst.max((a.score - b.score).abs());
        }
    }
    if worst > 1e-12 {
        return Err(format!("reloaded scores drift by {worst:.2e}"));
    }

    // corruption of any single byte is detected
    let (_, path) = &trained[0];
    let mut detected = 0;
    let mut probed = 0;
    for name in dir_bytes(path).keys() {
        let file = path.join(name);
        let original = std::fs::read(&file).map_err(|e| e.to_string())?;
        for pos in [0, original.len() / 2, original.len() - 1] {
            let mut bad = original.clone();
            bad[pos] ^= 0x20;
            std::fs::write(&file, &bad).map_err(|e| e.to_string())?;
            probed += 1;
            if load_model(path).is_err() {
                detected += 1;
            }
        }
        std::fs::write(&file, &original).map_err(|e| e.to_string())?;
    }
    if detected != probed {
        return Err(format!("only {detected}/{probed} corruptions detected"));
    }

    // protocol report independent of run and worker count
    let mut mc = ModelConfig::new(EncoderKind::Cnn, spec.clone());
    mc.hidden = 8;
    mc.max_len = 16;
    mc.head_hidden = 8;
    mc.deepset_hidden = 8;
    let mut pc = ProtocolConfig::new(mc);
    pc.n_splits = 3;
    pc.fractions = [0.6, 0.2, 0.2];
    pc.train.epochs = 1;
    let mut reports = Vec::new();
    for threads in [1, 4, 4] {
        pc.threads = Some(threads);
        let r = run_protocol(&data.dataset, &entities, &data.baseline, &pc).map_err(err)?;
        reports.push((r.to_json(), r.to_table()));
    }
    ensure(
        reports.iter().all(|r| *r == reports[0]),
        format!("identical synth files, checkpoints and reports; round trip {worst:.1e}; {detected}/{probed} corruptions caught"),
    )
}

// ---------------------------------------------------------------- projection

fn embedding_projection() -> Outcome {
    let p = pipeline().as_ref().map_err(Clone::clone)?;
    let outs = p.model.score_all(&p.examples).map_err(|e| e.to_string())?;
    let ids: Vec<String> = p.examples.iter().map(|e| e.source_id.clone()).collect();
    let labels: Vec<u8> = p.examples.iter().map(|e| e.label.unwrap()).collect();
    let rows: Vec<Vec<f64>> = outs.into_iter().map(|o| o.embedding).collect();
    let table = EmbeddingTable::from_parts(ids, Tensor2D::from_rows(&rows).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let proj = export_pca_projection(&table, &p.data.dataset.labels, &dir.path().join("proj.tsv"))
        .map_err(|e| e.to_string())?;
    let sep = centroid_separation(&proj, &labels);
    ensure(sep >= 3.0, format!("{} sequences, centroid separation {sep:.2}", labels.len()))
}

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Outcome); 10] = [
        ("gradient integrity", gradient_integrity),
        ("order invariance and sensitivity", order_behaviour),
        ("padding neutrality", padding_neutrality),
        ("PR-AUC exactness", pr_auc_exactness),
        ("graph embedding clique separation", clique_separation),
        ("end-to-end learning on synthetic data", end_to_end_learning),
        ("hybrid gain over the reference", hybrid_gain),
        ("warm start advantage", warm_start_advantage),
        ("determinism and persistence", determinism_and_persistence),
        ("embedding projection separation", embedding_projection),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>().map(String::as_str).or(p.downcast_ref::<&str>().copied()))));
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({detail})", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
