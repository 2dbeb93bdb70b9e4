use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::data::{
    build_dataset, centroid_separation, export_pca_projection, generate_synthetic,
    group_by_source, parse_interactions, read_labels, read_scores, write_scores,
    write_synthetic, InteractionRecord, LabeledDataset, SynthConfig,
};
use crate::error::{Error, Result};
use crate::graph::{
    export_embeddings, train_graph, EmbeddingTable, GraphTrainConfig, MultiRelationGraph,
    NegativeSampleConfig,
};
use crate::model::{
    assemble_dataset, assemble_features, load_model, model_init, save_model, ActionVocab,
    AssemblyWarnings, EncoderKind, EntityTables, FeatureSpec, ModelConfig,
};
use crate::train::{run_protocol, train_with, PosWeight, ProtocolConfig, TrainConfig};

use super::args::{
    DataArgs, InferArgs, ModelArgs, OptimArgs, ProjectArgs, ProtocolArgs, SynthArgs, TrainArgs,
    TrainGraphArgs,
};

pub fn train_graph_cmd(a: &TrainGraphArgs) -> Result<()> {
    let graph = MultiRelationGraph::read_edge_list(&a.edges)?;
    let cfg = GraphTrainConfig {
        dim: a.dim,
        margin: a.margin,
        lr: a.lr,
        epochs: a.epochs,
        batch_size: a.batch_size,
        negatives: NegativeSampleConfig {
            negatives_per_edge: a.negatives,
            rng_seed: a.seed,
        },
    };
    let trained = train_graph(&graph, &cfg)?;
    export_embeddings(&trained.embeddings, &a.out)?;
    match trained.epoch_losses.last() {
        Some(l) => println!("final mean margin loss: {l}"),
        None => println!("no epochs run; embeddings left at initialisation"),
    }
    Ok(())
}

fn load_records(path: &Path) -> Result<Vec<InteractionRecord>> {
    let log = parse_interactions(path)?;
    if let Some(first) = log.malformed.first() {
        eprintln!(
            "warning: skipped {} malformed line(s) in {}; first at line {}: {}",
            log.malformed.len(),
            path.display(),
            first.line,
            first.reason
        );
    }
    Ok(log.records)
}

fn load_dataset(d: &DataArgs) -> Result<(LabeledDataset, EntityTables)> {
    let records = load_records(&d.interactions)?;
    let labels = read_labels(&d.labels)?;
    let (dataset, stats) = build_dataset(records, &labels);
    if stats.unlabeled_records > 0 || stats.labeled_without_records > 0 {
        eprintln!(
            "note: dropped {} record(s) of {} unlabelled source(s) and {} label(s) without records",
            stats.unlabeled_records, stats.unlabeled_sources, stats.labeled_without_records
        );
    }
    if dataset.is_empty() {
        return Err(Error::Data("no labelled sequences to work with".into()));
    }
    let entities = EntityTables::new(
        EmbeddingTable::read_tsv(&d.src_emb)?,
        EmbeddingTable::read_tsv(&d.tgt_emb)?,
    );
    Ok((dataset, entities))
}

fn model_config(encoder: EncoderKind, m: &ModelArgs, o: &OptimArgs, entities: &EntityTables) -> ModelConfig {
    let mut spec = FeatureSpec::new(entities.sources.dim(), entities.targets.dim(), m.d_act);
    spec.misc_keys = m.misc_keys.clone();
    ModelConfig {
        encoder,
        hidden: m.hidden,
        pooling: m.pooling,
        spec,
        max_len: m.max_len,
        rnn_layers: m.rnn_layers,
        cnn_layers: m.cnn_layers,
        cnn_width: m.cnn_width,
        deepset_hidden: m.deepset_hidden,
        head_hidden: m.head_hidden,
        dropout: o.dropout,
    }
}

fn train_config(o: &OptimArgs, warm_start: Option<PathBuf>) -> Result<TrainConfig> {
    let pos_weight = match o.pos_weight.trim() {
        "auto" | "AUTO" => PosWeight::Auto,
        v => PosWeight::Fixed(v.parse().map_err(|_| {
            Error::Config(format!("pos-weight must be `auto` or a number, got {v:?}"))
        })?),
    };
    let cfg = TrainConfig {
        lr: o.lr,
        clip: o.clip,
        dropout_p: o.dropout,
        epochs: o.epochs,
        batch_size: o.batch_size,
        seed: o.seed,
        warm_start,
        pos_weight,
        track_pr_auc: true,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn report_warnings(w: AssemblyWarnings) {
    if w.total() > 0 {
        eprintln!(
            "warning: {} unknown entity lookup(s) fell back to zero vectors ({} source, {} target)",
            w.total(),
            w.unknown_sources,
            w.unknown_targets
        );
    }
}

pub fn train_cmd(a: &TrainArgs) -> Result<()> {
    let (dataset, entities) = load_dataset(&a.data)?;
    let config = model_config(a.encoder, &a.model, &a.optim, &entities);
    let tcfg = train_config(&a.optim, a.warm_start.clone())?;
    let vocab = match &a.warm_start {
        // keep the checkpoint's vocabulary so its action rows line up
        Some(path) => load_model(path)?.vocab,
        None => ActionVocab::from_actions(dataset.all_records().map(|r| r.action.as_str())),
    };
    let (examples, warnings) = assemble_dataset(&dataset, &entities, &vocab, &config.spec, config.max_len)?;
    report_warnings(warnings);
    let mut model = model_init(config, vocab, entities, a.optim.seed)?;
    let report = train_with(&mut model, &examples, &tcfg, |e| {
        println!(
            "epoch {}\tloss {:.6}\ttrain_pr_auc {:.6}",
            e.epoch,
            e.loss,
            e.train_pr_auc.unwrap_or(f64::NAN)
        );
    })?;
    eprintln!("positive-class weight {}", report.pos_weight);
    save_model(&model, &a.out)?;
    if let Some(path) = &a.scores_out {
        let outs = model.score_all(&examples)?;
        write_scores(
            path,
            examples.iter().zip(&outs).map(|(e, o)| (e.source_id.as_str(), o.score)),
        )?;
    }
    Ok(())
}

pub fn infer_cmd(a: &InferArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let groups = group_by_source(load_records(&a.interactions)?);
    let spec = &model.config.spec;
    let mut warnings = AssemblyWarnings::default();
    let mut examples = Vec::with_capacity(groups.len());
    for records in groups.values() {
        let (ex, w) = assemble_features(records, &model.entities, &model.vocab, spec, model.config.max_len, None)?;
        warnings.absorb(w);
        examples.push(ex);
    }
    report_warnings(warnings);
    let outs = model.score_all(&examples)?;
    write_scores(
        &a.out,
        examples.iter().zip(&outs).map(|(e, o)| (e.source_id.as_str(), o.score)),
    )?;
    if let Some(path) = &a.emit_embeddings {
        let mut table = EmbeddingTable::new(model.config.hidden);
        for (e, o) in examples.iter().zip(&outs) {
            table.insert(e.source_id.clone(), &o.embedding)?;
        }
        table.write_tsv(path)?;
    }
    eprintln!("scored {} source(s)", examples.len());
    Ok(())
}

fn parse_encoders(s: &str) -> Result<Vec<EncoderKind>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(EncoderKind::ALL.to_vec());
    }
    s.split(',').map(|k| k.trim().parse()).collect()
}

pub fn protocol_cmd(a: &ProtocolArgs) -> Result<()> {
    let baseline = read_scores(&a.baseline_scores)?;
    let (dataset, entities) = load_dataset(&a.data)?;
    let fractions: [f64; 3] = a.fractions.as_slice().try_into().map_err(|_| {
        Error::Config(format!("expected three fractions, got {:?}", a.fractions))
    })?;
    let mut train = train_config(&a.optim, None)?;
    train.track_pr_auc = false;
    let cfg = ProtocolConfig {
        encoders: parse_encoders(&a.encoders)?,
        n_splits: a.splits,
        fractions,
        seed: a.optim.seed,
        model: model_config(EncoderKind::Rnn, &a.model, &a.optim, &entities),
        train,
        threads: None,
    };
    let report = run_protocol(&dataset, &entities, &baseline, &cfg)?;
    let table = report.to_table();
    print!("{table}");
    let json_path = a.out_report.with_extension("json");
    let table_path = if json_path == a.out_report {
        a.out_report.with_extension("txt")
    } else {
        a.out_report.clone()
    };
    fs::write(&table_path, table).map_err(|e| Error::io(&table_path, e))?;
    fs::write(&json_path, report.to_json()).map_err(|e| Error::io(&json_path, e))?;
    Ok(())
}

pub fn synth_cmd(a: &SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        n_normal: a.normal,
        n_bad: a.bad,
        action_count: a.actions,
        mean_seq_len: a.mean_len,
        bad_burst_factor: a.burst,
        bad_target_pool: a.farm,
        normal_target_pool: a.target_pool,
        embedding_dim: a.dim,
        embedding_overlap: a.overlap,
        stealth_fraction: a.stealth,
        seed: a.seed,
        ..SynthConfig::default()
    };
    let data = generate_synthetic(&cfg)?;
    write_synthetic(&data, &a.out_dir)?;
    eprintln!(
        "wrote {} sources ({} bad) to {}",
        data.dataset.len(),
        data.dataset.num_positive(),
        a.out_dir.display()
    );
    Ok(())
}

pub fn project_cmd(a: &ProjectArgs) -> Result<()> {
    let table = EmbeddingTable::read_tsv(&a.embeddings)?;
    let labels = match &a.labels {
        Some(p) => read_labels(p)?,
        None => BTreeMap::new(),
    };
    let proj = export_pca_projection(&table, &labels, &a.out)?;
    let (mut rows, mut ls) = (Vec::new(), Vec::new());
    for (i, id) in table.ids().iter().enumerate() {
        if let Some(&l) = labels.get(id) {
            rows.push(proj.row(i).to_vec());
            ls.push(l);
        }
    }
    if ls.contains(&0) && ls.contains(&1) {
        let labelled = crate::nn::Tensor2D::from_rows(&rows)?;
        println!("centroid separation: {:.4}", centroid_separation(&labelled, &ls));
    }
    Ok(())
}
