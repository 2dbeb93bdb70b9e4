//! Multi-relation graph embeddings trained with a margin ranking loss.
//!
//! Edges `(s, r, d)` are scored with a diagonal relation operator and a
//! dot-product comparator, `f = Σ θs[i]·θr[i]·θd[i]`. Each training edge is
//! contrasted with corrupted copies whose source or destination is replaced by
//! a uniformly sampled node; the hinge `max(f(e') - f(e) + λ, 0)` pushes true
//! edges above their corruptions by at least `λ`.

mod table;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use table::EmbeddingTable;

use crate::error::{Error, Result};
use crate::nn::Tensor2D;

/// Edge expressed as indices into a [`MultiRelationGraph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub src: usize,
    pub rel: usize,
    pub dst: usize,
}

#[derive(Clone, Debug, Default)]
pub struct MultiRelationGraph {
    nodes: Vec<String>,
    node_index: HashMap<String, usize>,
    relations: Vec<String>,
    relation_index: HashMap<String, usize>,
    edges: Vec<Edge>,
}

impl MultiRelationGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, id: &str) -> usize {
        if let Some(&i) = self.node_index.get(id) {
            return i;
        }
        self.nodes.push(id.to_string());
        self.node_index.insert(id.to_string(), self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    pub fn add_relation(&mut self, name: &str) -> usize {
        if let Some(&i) = self.relation_index.get(name) {
            return i;
        }
        self.relations.push(name.to_string());
        self.relation_index
            .insert(name.to_string(), self.relations.len() - 1);
        self.relations.len() - 1
    }

    /// Adds an edge, registering unseen endpoints and relations.
    /// Duplicates are kept as repeated observations.
    pub fn add_edge(&mut self, src: &str, rel: &str, dst: &str) -> Edge {
        let edge = Edge {
            src: self.add_node(src),
            rel: self.add_relation(rel),
            dst: self.add_node(dst),
        };
        self.edges.push(edge);
        edge
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn relations(&self) -> &[String] {
        &self.relations
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    /// Reads `source<TAB>relation<TAB>dest` lines; `#` lines are comments.
    pub fn read_edge_list(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_edge_list(&text, path)
    }

    pub fn parse_edge_list(text: &str, path: &Path) -> Result<Self> {
        let mut g = Self::new();
        for (n, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: n + 1,
                    msg: format!("expected source<TAB>relation<TAB>dest, got {line:?}"),
                });
            }
            g.add_edge(fields[0], fields[1], fields[2]);
        }
        Ok(g)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphEmbeddings {
    pub nodes: EmbeddingTable,
    pub relations: EmbeddingTable,
}

impl GraphEmbeddings {
    pub fn dim(&self) -> usize {
        self.nodes.dim()
    }

    /// Score of `(src, rel, dst)` looked up by id.
    pub fn score(&self, src: &str, rel: &str, dst: &str) -> Result<f64> {
        score_edge(
            self.nodes.get(src)?,
            self.relations.get(rel)?,
            self.nodes.get(dst)?,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NegativeSampleConfig {
    pub negatives_per_edge: usize,
    pub rng_seed: u64,
}

impl Default for NegativeSampleConfig {
    fn default() -> Self {
        Self {
            negatives_per_edge: 4,
            rng_seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphTrainConfig {
    pub dim: usize,
    pub margin: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub negatives: NegativeSampleConfig,
}

impl Default for GraphTrainConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            margin: 0.5,
            lr: 0.1,
            epochs: 50,
            batch_size: 32,
            negatives: NegativeSampleConfig::default(),
        }
    }
}

/// `Σ_i s[i]·r[i]·d[i]`
pub fn score_edge(src: &[f64], rel: &[f64], dst: &[f64]) -> Result<f64> {
    if src.len() != rel.len() || src.len() != dst.len() {
        return Err(Error::shape(
            "score_edge",
            (src.len(), rel.len()),
            (dst.len(), dst.len()),
        ));
    }
    Ok(src
        .iter()
        .zip(rel)
        .zip(dst)
        .map(|((s, r), d)| s * r * d)
        .sum())
}

/// `Σ_neg max(neg - pos + λ, 0)`
pub fn margin_loss(pos_score: f64, neg_scores: &[f64], margin: f64) -> f64 {
    neg_scores
        .iter()
        .map(|n| (n - pos_score + margin).max(0.0))
        .sum()
}

/// `⌈B/2⌉` source corruptions followed by `⌊B/2⌋` destination corruptions.
/// A replacement node is uniform over all nodes except the one it replaces.
pub fn sample_negatives<R: Rng + ?Sized>(
    edge: Edge,
    num_nodes: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Edge>> {
    if num_nodes < 2 {
        return Err(Error::Config(format!(
            "negative sampling needs at least 2 nodes, graph has {num_nodes}"
        )));
    }
    if count == 0 {
        return Err(Error::Config("negatives_per_edge must be at least 1".into()));
    }
    let mut replace = |orig: usize| {
        let r = rng.random_range(0..num_nodes - 1);
        if r >= orig {
            r + 1
        } else {
            r
        }
    };
    let n_src = count.div_ceil(2);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        if i < n_src {
            out.push(Edge {
                src: replace(edge.src),
                ..edge
            });
        } else {
            out.push(Edge {
                dst: replace(edge.dst),
                ..edge
            });
        }
    }
    Ok(out)
}

fn row_score(nodes: &Tensor2D, rels: &Tensor2D, e: Edge) -> f64 {
    nodes
        .row(e.src)
        .iter()
        .zip(rels.row(e.rel))
        .zip(nodes.row(e.dst))
        .map(|((s, r), d)| s * r * d)
        .sum()
}

fn add_score_grad(
    nodes: &Tensor2D,
    rels: &Tensor2D,
    e: Edge,
    coef: f64,
    node_grad: &mut Tensor2D,
    rel_grad: &mut Tensor2D,
) {
    let dim = nodes.cols();
    for i in 0..dim {
        let s = nodes.get(e.src, i);
        let r = rels.get(e.rel, i);
        let d = nodes.get(e.dst, i);
        node_grad.set(e.src, i, node_grad.get(e.src, i) + coef * r * d);
        rel_grad.set(e.rel, i, rel_grad.get(e.rel, i) + coef * s * d);
        node_grad.set(e.dst, i, node_grad.get(e.dst, i) + coef * s * r);
    }
}

/// Margin loss of one positive edge against its negatives; adds
/// `weight · ∂loss` into the gradient tables. Returns the unweighted loss.
#[allow(clippy::too_many_arguments)]
pub fn edge_loss_and_grad(
    nodes: &Tensor2D,
    rels: &Tensor2D,
    edge: Edge,
    negatives: &[Edge],
    margin: f64,
    weight: f64,
    node_grad: &mut Tensor2D,
    rel_grad: &mut Tensor2D,
) -> f64 {
    let pos = row_score(nodes, rels, edge);
    let mut loss = 0.0;
    for &neg in negatives {
        let hinge = row_score(nodes, rels, neg) - pos + margin;
        if hinge > 0.0 {
            loss += hinge;
            add_score_grad(nodes, rels, neg, weight, node_grad, rel_grad);
            add_score_grad(nodes, rels, edge, -weight, node_grad, rel_grad);
        }
    }
    loss
}

/// Embeddings plus the mean per-edge margin loss of every epoch.
#[derive(Clone, Debug)]
pub struct TrainedGraph {
    pub embeddings: GraphEmbeddings,
    pub epoch_losses: Vec<f64>,
}

/// Initial tables: nodes uniform in `±0.5/√D`, relation operators all ones.
pub fn init_embeddings(graph: &MultiRelationGraph, dim: usize, seed: u64) -> Result<GraphEmbeddings> {
    if dim == 0 {
        return Err(Error::Config("embedding dimension must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = 0.5 / (dim as f64).sqrt();
    let nodes = EmbeddingTable::from_parts(
        graph.nodes.clone(),
        Tensor2D::uniform(graph.nodes.len(), dim, bound, &mut rng),
    )?;
    let relations = EmbeddingTable::from_parts(
        graph.relations.clone(),
        Tensor2D::filled(graph.relations.len(), dim, 1.0),
    )?;
    Ok(GraphEmbeddings { nodes, relations })
}

/// Mini-batch SGD over shuffled edges. Deterministic for a given
/// `cfg.negatives.rng_seed`.
pub fn train_graph(graph: &MultiRelationGraph, cfg: &GraphTrainConfig) -> Result<TrainedGraph> {
    if graph.edges.is_empty() {
        return Err(Error::Config("graph has no edges".into()));
    }
    if cfg.batch_size == 0 || cfg.margin < 0.0 || cfg.lr <= 0.0 {
        return Err(Error::Config(format!(
            "invalid graph training config: batch_size {}, margin {}, lr {}",
            cfg.batch_size, cfg.margin, cfg.lr
        )));
    }
    let seed = cfg.negatives.rng_seed;
    let mut emb = init_embeddings(graph, cfg.dim, seed)?;
    let n_nodes = graph.nodes.len();
    if n_nodes < 2 {
        return Err(Error::Config("graph needs at least 2 nodes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..graph.edges.len()).collect();
    let mut node_grad = Tensor2D::zeros(n_nodes, cfg.dim);
    let mut rel_grad = Tensor2D::zeros(graph.relations.len(), cfg.dim);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let weight = 1.0 / batch.len() as f64;
            let mut touched_nodes = Vec::with_capacity(batch.len() * 4);
            let mut touched_rels = Vec::with_capacity(batch.len());
            for &ei in batch {
                let edge = graph.edges[ei];
                let negs = sample_negatives(edge, n_nodes, cfg.negatives.negatives_per_edge, &mut rng)?;
                total += edge_loss_and_grad(
                    emb.nodes.values(),
                    emb.relations.values(),
                    edge,
                    &negs,
                    cfg.margin,
                    weight,
                    &mut node_grad,
                    &mut rel_grad,
                );
                touched_rels.push(edge.rel);
                touched_nodes.extend([edge.src, edge.dst]);
                touched_nodes.extend(negs.iter().flat_map(|n| [n.src, n.dst]));
            }
            touched_nodes.sort_unstable();
            touched_nodes.dedup();
            touched_rels.sort_unstable();
            touched_rels.dedup();
            apply_sgd(emb.nodes.values_mut(), &mut node_grad, &touched_nodes, cfg.lr);
            apply_sgd(emb.relations.values_mut(), &mut rel_grad, &touched_rels, cfg.lr);
        }
        epoch_losses.push(total / graph.edges.len() as f64);
    }
    Ok(TrainedGraph {
        embeddings: emb,
        epoch_losses,
    })
}

fn apply_sgd(values: &mut Tensor2D, grad: &mut Tensor2D, rows: &[usize], lr: f64) {
    for &r in rows {
        let g = grad.row_mut(r);
        values
            .row_mut(r)
            .iter_mut()
            .zip(g.iter_mut())
            .for_each(|(v, g)| {
                *v -= lr * *g;
                *g = 0.0;
            });
    }
}

/// Path of the relation table written next to a node table.
pub fn relations_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".relations");
    PathBuf::from(s)
}

/// Writes the node table to `path` and the relation table to
/// `<path>.relations`, both in the embedding TSV format.
pub fn export_embeddings(emb: &GraphEmbeddings, path: &Path) -> Result<()> {
    emb.nodes.write_tsv(path)?;
    emb.relations.write_tsv(&relations_path(path))
}

/// Reads a node table and, if present, its relation sidecar.
pub fn import_embeddings(path: &Path) -> Result<GraphEmbeddings> {
    let nodes = EmbeddingTable::read_tsv(path)?;
    let rel_path = relations_path(path);
    let relations = if rel_path.exists() {
        EmbeddingTable::read_tsv(&rel_path)?
    } else {
        EmbeddingTable::new(nodes.dim())
    };
    Ok(GraphEmbeddings { nodes, relations })
}

/// Two disjoint 4-node cliques (`a0..a3`, `b0..b3`) with every ordered
/// intra-clique pair as an edge, joined by one bridge edge in each direction.
pub fn two_clique_graph() -> MultiRelationGraph {
    let mut g = MultiRelationGraph::new();
    for prefix in ["a", "b"] {
        for i in 0..4 {
            g.add_node(&format!("{prefix}{i}"));
        }
    }
    for prefix in ["a", "b"] {
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    g.add_edge(&format!("{prefix}{i}"), "link", &format!("{prefix}{j}"));
                }
            }
        }
    }
    g.add_edge("a0", "link", "b0");
    g.add_edge("b0", "link", "a0");
    g
}
