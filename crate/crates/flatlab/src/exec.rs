//! Deterministic data-parallel execution.
//!
//! All hot loops (energy double sums, field sweeps, perfectness scans) run
//! over fixed-size tiles. Tiles are processed in parallel when the
//! `parallel` feature is enabled, each tile is reduced sequentially, and the
//! per-tile results are combined in tile order with pairwise summation.
//! Results are therefore bit-identical regardless of the thread schedule,
//! and identical between the parallel and sequential builds.

use std::ops::Range;
use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Fixed tile size for all reductions. Not auto-tuned: changing it changes
/// the grouping of floating-point sums, so it is a compile-time constant.
pub const TILE: usize = 4096;

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Force tile loops onto the current thread even in parallel builds.
/// Used by the benchmark suite to compare the two execution modes in one
/// process; results are identical either way.
pub fn set_sequential(seq: bool) {
    FORCE_SEQUENTIAL.store(seq, Ordering::SeqCst);
}

pub fn is_sequential() -> bool {
    if cfg!(not(feature = "parallel")) {
        return true;
    }
    FORCE_SEQUENTIAL.load(Ordering::SeqCst)
}

fn tile_ranges(n: usize, tile: usize) -> Vec<Range<usize>> {
    let tile = tile.max(1);
    let mut out = Vec::with_capacity(n / tile + 1);
    let mut start = 0;
    while start < n {
        let end = (start + tile).min(n);
        out.push(start..end);
        start = end;
    }
    out
}

/// Map every tile of `0..n` through `f`, preserving tile order in the output.
pub fn map_tiles<T, F>(n: usize, tile: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    let ranges = tile_ranges(n, tile);
    #[cfg(feature = "parallel")]
    {
        if !is_sequential() {
            return ranges.into_par_iter().map(f).collect();
        }
    }
    ranges.into_iter().map(f).collect()
}

/// Pairwise (tree) summation; deterministic and more accurate than a
/// left-to-right fold for long inputs.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Tiled sum of `f(i)` for `i in 0..n`: sequential within tiles, pairwise
/// across tiles.
pub fn sum_tiled<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let partials = map_tiles(n, TILE, |range| {
        let mut acc = 0.0;
        for i in range {
            acc += f(i);
        }
        acc
    });
    pairwise_sum(&partials)
}
