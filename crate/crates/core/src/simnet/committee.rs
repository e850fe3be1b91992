use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::seeds::derive_seed;
use super::{Result, SimError};
use crate::ledger::PeerId;

/// Seeded sample without replacement of `size` peers for `round`.
pub fn elect_committee(
    peers: &[PeerId],
    size: usize,
    round: u64,
    seed: u64,
) -> Result<BTreeSet<PeerId>> {
    if size == 0 || size > peers.len() {
        return Err(SimError::InvalidSpec(format!(
            "committee of {size} from {} peers",
            peers.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "elect", &[round]));
    Ok(rand::seq::index::sample(&mut rng, peers.len(), size)
        .into_iter()
        .map(|i| peers[i])
        .collect())
}
