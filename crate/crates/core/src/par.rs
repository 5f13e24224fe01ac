//! Deterministic parallel reductions.
//!
//! Partial sums are taken over fixed-size blocks and combined sequentially in
//! block order, so results do not depend on the rayon worker count.

use rayon::prelude::*;
use std::ops::{Add, Range};

pub(crate) const BLOCK: usize = 1 << 14;

pub(crate) fn blocked_sum<T, F>(len: usize, zero: T, f: F) -> T
where
    T: Send + Copy + Add<Output = T>,
    F: Fn(Range<usize>) -> T + Sync,
{
    let n_blocks = len.div_ceil(BLOCK);
    let partials: Vec<T> = (0..n_blocks)
        .into_par_iter()
        .map(|b| f(b * BLOCK..((b + 1) * BLOCK).min(len)))
        .collect();
    partials.into_iter().fold(zero, |acc, x| acc + x)
}

/// Element-wise vector accumulation, same blocking contract as [`blocked_sum`].
pub(crate) fn blocked_sum_vec<F>(len: usize, width: usize, f: F) -> Vec<f64>
where
    F: Fn(Range<usize>, &mut [f64]) + Sync,
{
    let n_blocks = len.div_ceil(BLOCK);
    let partials: Vec<Vec<f64>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![0.0; width];
            f(b * BLOCK..((b + 1) * BLOCK).min(len), &mut acc);
            acc
        })
        .collect();
    let mut out = vec![0.0; width];
    for p in partials {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    out
}
