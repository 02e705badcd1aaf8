//! Additive `(k, k)` sharing over the ring of 64-bit words.
//!
//! A user's padded input is serialized to bytes, packed little-endian into
//! words (the first word holds the byte length) and split into `k` payloads
//! that sum to it word by word, modulo 2^64.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::ProtocolError;
use crate::pcn::{Amount, NodeId, Transaction};

/// One slot of a padded submission. `Zero` is a zero-value placeholder that
/// the committee discards after reconstruction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Slot {
    Payment(Transaction),
    Zero,
}

/// What one user hands to the committee: its outgoing transactions padded to
/// the public length, plus the balances it holds next to its own channel.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserInput {
    pub user: NodeId,
    pub slots: Vec<Slot>,
    /// `(cap_out, cap_in)` for a client, `None` for a hub.
    pub channel: Option<(Amount, Amount)>,
    /// Own factory balance for a hub, `None` for a client.
    pub factory_balance: Option<Amount>,
}

impl UserInput {
    pub fn payments(&self) -> impl Iterator<Item = &Transaction> {
        self.slots.iter().filter_map(|s| match s {
            Slot::Payment(t) => Some(t),
            Slot::Zero => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Share {
    pub owner: NodeId,
    /// 1-based position among `total` shares.
    pub index: usize,
    pub total: usize,
    pub payload: Vec<u64>,
}

fn encode(input: &UserInput) -> Vec<u64> {
    let bytes = serde_json::to_vec(input).expect("inputs always serialize");
    let mut words = vec![bytes.len() as u64];
    words.extend(bytes.chunks(8).map(|c| {
        let mut w = [0u8; 8];
        w[..c.len()].copy_from_slice(c);
        u64::from_le_bytes(w)
    }));
    words
}

fn decode(words: &[u64]) -> Result<UserInput, ProtocolError> {
    let (&len, body) = words.split_first().ok_or(ProtocolError::LengthMismatch)?;
    let len = usize::try_from(len).map_err(|_| ProtocolError::LengthMismatch)?;
    if body.len() != len.div_ceil(8) {
        return Err(ProtocolError::LengthMismatch);
    }
    let mut bytes: Vec<u8> = body.iter().flat_map(|w| w.to_le_bytes()).collect();
    bytes.truncate(len);
    serde_json::from_slice(&bytes).map_err(|e| ProtocolError::Decode(e.to_string()))
}

/// Split `input` into `k` additive shares. The first `k - 1` payloads are
/// uniform; the last one closes the sum.
pub fn share_input(
    input: &UserInput,
    k: usize,
    rng: &mut impl RngCore,
) -> Result<Vec<Share>, ProtocolError> {
    if k == 0 {
        return Err(ProtocolError::BadK { k, hubs: 0 });
    }
    let secret = encode(input);
    let mut last = secret.clone();
    let mut shares = Vec::with_capacity(k);
    for index in 1..k {
        let payload: Vec<u64> = secret.iter().map(|_| rng.next_u64()).collect();
        for (acc, r) in last.iter_mut().zip(&payload) {
            *acc = acc.wrapping_sub(*r);
        }
        shares.push(Share { owner: input.user.clone(), index, total: k, payload });
    }
    shares.push(Share { owner: input.user.clone(), index: k, total: k, payload: last });
    Ok(shares)
}

/// Sum all shares of one owner. Every index `1..=total` must be present.
pub fn reconstruct(shares: &[Share]) -> Result<UserInput, ProtocolError> {
    let first = shares.first().ok_or(ProtocolError::MissingShare { index: 1 })?;
    let (total, width) = (first.total, first.payload.len());
    let mut seen = vec![false; total];
    for s in shares {
        if s.owner != first.owner || s.total != total || s.payload.len() != width {
            return Err(ProtocolError::LengthMismatch);
        }
        if s.index == 0 || s.index > total || std::mem::replace(&mut seen[s.index - 1], true) {
            return Err(ProtocolError::LengthMismatch);
        }
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(ProtocolError::MissingShare { index: missing + 1 });
    }
    let mut words = vec![0u64; width];
    for s in shares {
        for (acc, w) in words.iter_mut().zip(&s.payload) {
            *acc = acc.wrapping_add(*w);
        }
    }
    decode(&words)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    use super::*;
    use crate::pcn::fixtures::tx;

    fn input() -> UserInput {
        UserInput {
            user: NodeId::new("c1"),
            slots: vec![Slot::Payment(tx("t1", "c1", "c2", 7)), Slot::Zero, Slot::Zero],
            channel: Some((10, 4)),
            factory_balance: None,
        }
    }

    #[test]
    fn single_share_is_the_encoding() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let shares = share_input(&input(), 1, &mut rng).unwrap();
        assert_eq!(shares.len(), 1);
        assert_eq!(shares[0].payload, encode(&input()));
        assert_eq!(reconstruct(&shares).unwrap(), input());
    }

    #[test]
    fn three_shares_round_trip_and_threshold() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let shares = share_input(&input(), 3, &mut rng).unwrap();
        assert_eq!(reconstruct(&shares).unwrap(), input());
        for skip in 0..3 {
            let partial: Vec<Share> = shares
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, s)| s.clone())
                .collect();
            assert_eq!(
                reconstruct(&partial).unwrap_err(),
                ProtocolError::MissingShare { index: skip + 1 }
            );
        }
    }

    #[test]
    fn truncated_payload_is_a_length_mismatch() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut shares = share_input(&input(), 2, &mut rng).unwrap();
        shares[1].payload.pop();
        assert_eq!(reconstruct(&shares).unwrap_err(), ProtocolError::LengthMismatch);
    }

    #[test]
    fn duplicate_index_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let mut shares = share_input(&input(), 2, &mut rng).unwrap();
        shares[1].index = 1;
        assert_eq!(reconstruct(&shares).unwrap_err(), ProtocolError::LengthMismatch);
    }

    #[test]
    fn payloads_vary_with_fresh_randomness() {
        let a = share_input(&input(), 2, &mut ChaCha20Rng::seed_from_u64(5)).unwrap();
        let b = share_input(&input(), 2, &mut ChaCha20Rng::seed_from_u64(6)).unwrap();
        assert_ne!(a[0].payload, b[0].payload);
        assert_ne!(a[1].payload, b[1].payload);
    }

    #[test]
    fn low_bits_of_a_share_look_uniform() {
        // chi-square over the low byte of the first share's first word
        let mut counts = [0u32; 16];
        let runs = 4096;
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..runs {
            let shares = share_input(&input(), 3, &mut rng).unwrap();
            counts[(shares[2].payload[1] & 0xf) as usize] += 1;
        }
        let expected = runs as f64 / 16.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 15 degrees of freedom, p = 0.001
        assert!(chi2 < 37.7, "chi2 = {chi2}");
    }
}
