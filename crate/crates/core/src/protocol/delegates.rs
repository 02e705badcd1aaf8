use sha2::{Digest, Sha256};

use super::ProtocolError;
use crate::pcn::NodeId;

/// Deterministic byte stream: SHA-256(seed || counter) for counter = 0, 1, ..
/// with the counter encoded as 8 big-endian bytes.
struct SeedStream {
    seed: [u8; 32],
    counter: u64,
    block: [u8; 32],
    pos: usize,
}

impl SeedStream {
    fn new(seed: [u8; 32]) -> Self {
        SeedStream { seed, counter: 0, block: [0; 32], pos: 32 }
    }

    fn next_u32(&mut self) -> u32 {
        let mut word = [0u8; 4];
        for b in &mut word {
            if self.pos == 32 {
                let mut h = Sha256::new();
                h.update(self.seed);
                h.update(self.counter.to_be_bytes());
                self.block = h.finalize().into();
                self.counter += 1;
                self.pos = 0;
            }
            *b = self.block[self.pos];
            self.pos += 1;
        }
        u32::from_be_bytes(word)
    }

    /// Uniform in `0..n` by rejection of the top partial bucket.
    fn below(&mut self, n: u32) -> u32 {
        let limit = (1u64 << 32) / u64::from(n) * u64::from(n);
        loop {
            let x = u64::from(self.next_u32());
            if x < limit {
                return (x % u64::from(n)) as u32;
            }
        }
    }
}

/// First `k` hubs of a partial Fisher-Yates shuffle driven by `seed`.
pub fn select_delegates(
    hubs: &[NodeId],
    k: usize,
    seed: &[u8; 32],
) -> Result<Vec<NodeId>, ProtocolError> {
    if k == 0 || k > hubs.len() {
        return Err(ProtocolError::BadK { k, hubs: hubs.len() });
    }
    let mut order = hubs.to_vec();
    let mut stream = SeedStream::new(*seed);
    let n = order.len();
    for i in 0..k {
        let j = i + stream.below((n - i) as u32) as usize;
        order.swap(i, j);
    }
    order.truncate(k);
    Ok(order)
}
