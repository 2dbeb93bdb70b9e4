use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::EmbeddingTable;
use crate::nn::Tensor2D;

const POWER_ITERS: usize = 10_000;
const POWER_TOL: f64 = 1e-13;

/// Projects the rows of `points` onto their top two principal components
/// (mean-centred, power iteration with deflation). Returns `n × 2`.
pub fn pca_2d(points: &Tensor2D) -> Result<Tensor2D> {
    let (n, d) = points.shape();
    if n < 3 || d < 2 {
        return Err(Error::Config(format!(
            "projection needs at least 3 points of dimension >= 2, got {n} x {d}"
        )));
    }
    let mut mean = vec![0.0; d];
    for r in 0..n {
        mean.iter_mut().zip(points.row(r)).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut centred = points.clone();
    for r in 0..n {
        centred
            .row_mut(r)
            .iter_mut()
            .zip(&mean)
            .for_each(|(v, m)| *v -= m);
    }
    let mut cov = centred.tmm(&centred);
    cov.scale(1.0 / n as f64);
    let trace: f64 = (0..d).map(|i| cov.get(i, i)).sum();
    if trace <= f64::EPSILON * d as f64 {
        return Err(Error::Data("degenerate (rank-0) point set cannot be projected".into()));
    }

    let first = power_iteration(&cov, &[]);
    let second = power_iteration(&cov, &[first.clone()]);
    let basis = Tensor2D::from_vec(
        d,
        2,
        first.iter().zip(&second).flat_map(|(a, b)| [*a, *b]).collect(),
    )?;
    Ok(centred.mm(&basis))
}

/// Dominant unit eigenvector of `cov` orthogonal to `against`.
fn power_iteration(cov: &Tensor2D, against: &[Vec<f64>]) -> Vec<f64> {
    let d = cov.rows();
    // deterministic, not aligned with any axis
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + 0.1 * (i as f64 + 1.0).sin()).collect();
    orthonormalise(&mut v, against);
    for _ in 0..POWER_ITERS {
        let mut w: Vec<f64> = (0..d)
            .map(|r| cov.row(r).iter().zip(&v).map(|(a, b)| a * b).sum())
            .collect();
        if !orthonormalise(&mut w, against) {
            // no variance left in the complement; any orthogonal direction works
            return fallback_direction(d, against);
        }
        let delta: f64 = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = w;
        if delta < POWER_TOL {
            break;
        }
    }
    v
}

fn orthonormalise(v: &mut [f64], against: &[Vec<f64>]) -> bool {
    for u in against {
        let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
        v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
    }
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm < 1e-300 {
        return false;
    }
    v.iter_mut().for_each(|a| *a /= norm);
    true
}

fn fallback_direction(d: usize, against: &[Vec<f64>]) -> Vec<f64> {
    for axis in 0..d {
        let mut e = vec![0.0; d];
        e[axis] = 1.0;
        if orthonormalise(&mut e, against) {
            return e;
        }
    }
    unreachable!("d >= 2 leaves an orthogonal direction")
}

/// Writes `id<TAB>x<TAB>y<TAB>label` for every row of `table`; ids without a
/// label get `-`.
pub fn export_pca_projection(
    table: &EmbeddingTable,
    labels: &BTreeMap<String, u8>,
    path: &Path,
) -> Result<Tensor2D> {
    let proj = pca_2d(table.values())?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (i, id) in table.ids().iter().enumerate() {
        let label = labels
            .get(id)
            .map_or_else(|| "-".to_string(), u8::to_string);
        writeln!(
            w,
            "{id}\t{:.16e}\t{:.16e}\t{label}",
            proj.get(i, 0),
            proj.get(i, 1)
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(proj)
}

/// Distance between the class centroids of a 2-D projection divided by the
/// mean within-class RMS spread.
pub fn centroid_separation(proj: &Tensor2D, labels: &[u8]) -> f64 {
    let mut sums = [[0.0f64; 2]; 2];
    let mut counts = [0usize; 2];
    for (r, &l) in labels.iter().enumerate() {
        let l = l as usize;
        counts[l] += 1;
        sums[l][0] += proj.get(r, 0);
        sums[l][1] += proj.get(r, 1);
    }
    let centroid = |l: usize| [sums[l][0] / counts[l] as f64, sums[l][1] / counts[l] as f64];
    let c = [centroid(0), centroid(1)];
    let mut spread = [0.0f64; 2];
    for (r, &l) in labels.iter().enumerate() {
        let l = l as usize;
        spread[l] += (proj.get(r, 0) - c[l][0]).powi(2) + (proj.get(r, 1) - c[l][1]).powi(2);
    }
    let std = |l: usize| (spread[l] / counts[l] as f64).sqrt();
    let dist = ((c[0][0] - c[1][0]).powi(2) + (c[0][1] - c[1][1]).powi(2)).sqrt();
    dist / (0.5 * (std(0) + std(1)))
}
