//! Per-agent random streams.
//!
//! Every draw is taken from a ChaCha8 stream keyed by `(root seed, purpose,
//! agent id, tick)`. No stream is shared between agents, so results do not
//! depend on iteration order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Placement = 1,
    Move = 2,
}

/// Independent stream for one agent at one tick.
pub fn agent_stream(root: u64, purpose: Purpose, agent_id: u32, tick: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&root.to_le_bytes());
    key[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
    key[16..24].copy_from_slice(&u64::from(agent_id).to_le_bytes());
    key[24..].copy_from_slice(&tick.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
