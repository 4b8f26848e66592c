//! Deterministic trial execution.
//!
//! Every Monte Carlo operation in this crate maps a closure over trial
//! indices `0..trials`. Each trial gets its own ChaCha stream keyed by
//! `(master seed, trial index)`, so the result of trial `k` never depends on
//! scheduling. With the `parallel` feature (default) the map runs on the
//! rayon pool; without it the same code runs sequentially. Outputs are
//! collected in index order either way, which keeps reductions and emitted
//! files byte-identical across worker counts.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// RNG stream for one trial. Stream 0 of a seed is reserved for
/// non-trial draws (setup, quadrature), trials use streams `1 + index`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 + trial);
    rng
}

/// RNG for one-off draws outside the trial map.
pub fn setup_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

/// Maps `f` over trial indices, parallel when the `parallel` feature is on.
/// Results come back in trial order.
pub fn run_trials<T, F>(trials: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..trials).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..trials).map(f).collect()
    }
}

/// Sequential reference path, always available. The benchmark suite compares
/// this against [`run_trials`]; tests use it to assert scheduling
/// independence.
pub fn run_trials_seq<T, F>(trials: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (0..trials).map(f).collect()
}
