//! Shared fixtures for the criterion benches.

use dime_core::synthgen::{generate_pair, SynthConfig};
use dime_core::AlignedPair;

/// A generated aligned pair with `users` mature users and default
/// generator settings otherwise.
pub fn pair(users: usize) -> AlignedPair {
    let cfg = SynthConfig {
        n_users: users,
        seed: 11,
        ..SynthConfig::default()
    };
    generate_pair(&cfg).expect("bench generator config is valid").pair
}
