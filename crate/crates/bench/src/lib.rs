//! Shared fixtures for the criterion benchmarks.

use iadof_core::benchmark::sample_rayleigh;
use iadof_core::{ChannelRealization, SystemConfig};

/// Symmetric configurations swept by the feasibility benchmarks.
pub fn symmetric_sweep() -> Vec<SystemConfig> {
    let mut out = Vec::new();
    for k in 2..=6 {
        for m in 2..=6 {
            for d in 1..=2 {
                if m % d == 0 {
                    out.push(SystemConfig::symmetric(k, m, m, d).expect("valid sweep entry"));
                }
            }
        }
    }
    out
}

/// Seeded Rayleigh channel for `cfg`.
pub fn channel_for(cfg: &SystemConfig, seed: u64) -> ChannelRealization {
    sample_rayleigh(cfg.tx(), cfg.rx(), seed).expect("valid antenna counts")
}
