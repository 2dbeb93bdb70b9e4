use crate::error::{Error, Result};
use crate::nn::{active_rows, Tensor2D};

use super::config::PoolingKind;

/// Which row each output column came from (max pooling) or how many rows
/// were averaged.
#[derive(Clone, Debug)]
pub struct PoolCache {
    kind: PoolingKind,
    active: Vec<usize>,
    argmax: Vec<usize>,
    rows: usize,
}

/// Collapses the unmasked rows of `z` into one `1 × h` vector.
pub fn pool(z: &Tensor2D, mask: &[bool], kind: PoolingKind) -> Result<(Tensor2D, PoolCache)> {
    if mask.len() != z.rows() {
        return Err(Error::shape("pool mask", z.shape(), (mask.len(), 1)));
    }
    let active = active_rows(mask);
    if active.is_empty() {
        return Err(Error::Contract("pooling over a fully masked sequence".into()));
    }
    let h = z.cols();
    let mut out = vec![0.0; h];
    let mut argmax = Vec::new();
    match kind {
        PoolingKind::Mean | PoolingKind::Sum => {
            for &r in &active {
                out.iter_mut().zip(z.row(r)).for_each(|(o, v)| *o += v);
            }
            if kind == PoolingKind::Mean {
                let n = active.len() as f64;
                out.iter_mut().for_each(|o| *o /= n);
            }
        }
        PoolingKind::Max => {
            argmax = vec![active[0]; h];
            out.copy_from_slice(z.row(active[0]));
            for &r in &active[1..] {
                for (c, &v) in z.row(r).iter().enumerate() {
                    if v > out[c] {
                        out[c] = v;
                        argmax[c] = r;
                    }
                }
            }
        }
    }
    Ok((
        Tensor2D::row_vector(&out),
        PoolCache {
            kind,
            active,
            argmax,
            rows: z.rows(),
        },
    ))
}

/// Spreads d(loss)/d(pooled) back over the rows of `z`.
pub fn pool_backward(cache: &PoolCache, dpooled: &Tensor2D) -> Tensor2D {
    let g = dpooled.row(0);
    let mut dz = Tensor2D::zeros(cache.rows, g.len());
    match cache.kind {
        PoolingKind::Mean | PoolingKind::Sum => {
            let k = if cache.kind == PoolingKind::Mean {
                1.0 / cache.active.len() as f64
            } else {
                1.0
            };
            for &r in &cache.active {
                dz.row_mut(r).iter_mut().zip(g).for_each(|(d, v)| *d = k * v);
            }
        }
        PoolingKind::Max => {
            for (c, &r) in cache.argmax.iter().enumerate() {
                dz.set(r, c, g[c]);
            }
        }
    }
    dz
}
