//! Shared fixtures for the benchmarks.

use spexcon::{synthesize_eeg, Scenario, SyntheticData};

/// Low-change scenario data with `n_blocks` blocks of 512 samples.
pub fn fixture(n_blocks: usize) -> SyntheticData {
    let mut config = Scenario::LowChange.config(1);
    config.n_blocks = n_blocks;
    synthesize_eeg(&config).expect("fixture config is valid")
}
