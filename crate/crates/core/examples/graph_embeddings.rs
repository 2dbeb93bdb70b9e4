//! Train graph embeddings on two 4-node cliques and compare pair scores.

use std::error::Error;

use ties::graph::{export_embeddings, train_graph, two_clique_graph, GraphTrainConfig, NegativeSampleConfig};

/// Returns the mean intra-clique and cross-clique scores.
pub fn run_example() -> Result<(f64, f64), Box<dyn Error>> {
    let graph = two_clique_graph();
    let cfg = GraphTrainConfig {
        dim: 8,
        batch_size: 4,
        negatives: NegativeSampleConfig {
            negatives_per_edge: 4,
            rng_seed: 0,
        },
        ..GraphTrainConfig::default()
    };
    let trained = train_graph(&graph, &cfg)?;
    let emb = &trained.embeddings;

    let (mut intra, mut cross) = (Vec::new(), Vec::new());
    for s in graph.nodes() {
        for d in graph.nodes().iter().filter(|d| *d != s) {
            let score = emb.score(s, "link", d)?;
            if s[..1] == d[..1] {
                intra.push(score);
            } else {
                cross.push(score);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("loss: {:.4} -> {:.4}", trained.epoch_losses[0], trained.epoch_losses.last().unwrap());
    println!("mean intra-clique score {:.3}, cross-clique {:.3}", mean(&intra), mean(&cross));

    let dir = std::env::temp_dir().join("ties-graph-example");
    std::fs::create_dir_all(&dir)?;
    export_embeddings(emb, &dir.join("nodes.tsv"))?;
    println!("embeddings written to {}", dir.display());
    Ok((mean(&intra), mean(&cross)))
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
