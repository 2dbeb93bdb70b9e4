//! Generate a synthetic labelled dataset and summarise what separates the
//! two classes.

use std::error::Error;

use ties::data::{gaps, generate_synthetic, write_synthetic, SynthConfig, ABUSE_ACTIONS};
use ties::train::median;

pub struct Summary {
    pub sources: usize,
    pub bad: usize,
    pub median_gap: [f64; 2],
    pub abuse_share: [f64; 2],
}

pub fn run_example() -> Result<Summary, Box<dyn Error>> {
    let cfg = SynthConfig {
        n_normal: 400,
        n_bad: 100,
        ..SynthConfig::default()
    };
    let data = generate_synthetic(&cfg)?;
    let abuse: Vec<&String> = data.action_names[cfg.action_count - ABUSE_ACTIONS..].iter().collect();

    let mut median_gap = [0.0; 2];
    let mut abuse_share = [0.0; 2];
    for label in [0u8, 1] {
        let seqs: Vec<_> = data.dataset.iter().filter(|(_, _, l)| *l == label).map(|(_, s, _)| s).collect();
        let all_gaps: Vec<f64> = seqs.iter().flat_map(|s| gaps(s)).collect();
        median_gap[label as usize] = median(&all_gaps);
        let (hits, total) = seqs.iter().flat_map(|s| s.iter()).fold((0, 0), |(h, t), r| {
            (h + usize::from(abuse.contains(&&r.action)), t + 1)
        });
        abuse_share[label as usize] = hits as f64 / total as f64;
    }
    println!("{} sources, {} bad", data.dataset.len(), data.dataset.num_positive());
    println!("median gap: normal {:.0}s, bad {:.0}s", median_gap[0], median_gap[1]);
    println!("abuse-action share: normal {:.3}, bad {:.3}", abuse_share[0], abuse_share[1]);

    let dir = std::env::temp_dir().join("ties-synth-example");
    write_synthetic(&data, &dir)?;
    println!("files written to {}", dir.display());
    Ok(Summary {
        sources: data.dataset.len(),
        bad: data.dataset.num_positive(),
        median_gap,
        abuse_share,
    })
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
