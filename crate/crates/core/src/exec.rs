//! Chunked execution with deterministic per-chunk random streams.
//!
//! Stochastic work is split into fixed-size chunks. Chunk `i` draws from a
//! ChaCha8 generator seeded with the root seed and switched to stream `i`,
//! so results depend only on `(seed, chunk index)` and never on how many
//! worker threads happen to run the chunks. Without the `parallel` feature
//! [`Exec::Parallel`] silently runs sequentially.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Number of draws handled by one chunk.
pub const CHUNK_SIZE: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

/// Generator for chunk `chunk` under root seed `seed`.
pub fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Sizes of the chunks covering `n` draws.
pub(crate) fn chunk_lengths(n: usize) -> Vec<usize> {
    let full = n / CHUNK_SIZE;
    let mut out = vec![CHUNK_SIZE; full];
    if !n.is_multiple_of(CHUNK_SIZE) {
        out.push(n % CHUNK_SIZE);
    }
    out
}

/// Maps `f` over chunk indices, returning results in chunk order.
pub(crate) fn map_chunks<T, F>(exec: Exec, n_chunks: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            (0..n_chunks).into_par_iter().map(f).collect()
        }
        _ => (0..n_chunks).map(f).collect(),
    }
}

/// Runs `draw` for each of `n` draws and concatenates results in draw order.
/// `draw` receives the chunk's generator, the chunk index and the offset of
/// the draw inside its chunk.
pub(crate) fn run_draws<T, F>(exec: Exec, seed: u64, n: usize, draw: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize, usize) -> T + Sync + Send,
{
    let lengths = chunk_lengths(n);
    let chunks = map_chunks(exec, lengths.len(), |c| {
        let mut rng = chunk_rng(seed, c);
        (0..lengths[c])
            .map(|k| draw(&mut rng, c, k))
            .collect::<Vec<T>>()
    });
    chunks.into_iter().flatten().collect()
}
