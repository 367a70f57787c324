//! Bernoulli erasure channel from the local to the remote controller.
//!
//! The remote controller acknowledges every received packet, so both
//! controllers read the same [`ChannelOutput`].

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelOutput {
    Received(DVector<f64>),
    Dropped,
}

impl ChannelOutput {
    pub fn is_received(&self) -> bool {
        matches!(self, ChannelOutput::Received(_))
    }
}

pub fn transmit(x: &DVector<f64>, gamma: bool) -> ChannelOutput {
    if gamma {
        ChannelOutput::Received(x.clone())
    } else {
        ChannelOutput::Dropped
    }
}

/// Success indicator: `true` with probability `1 - p`.
pub fn sample_gamma(rng: &mut impl Rng, p: f64) -> Result<bool> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::BadProbability(p));
    }
    // random::<f64>() is in [0, 1), so p = 0 always succeeds and p = 1 never does.
    Ok(rng.random::<f64>() >= p)
}

/// Labels of the independent random substreams used by one episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Substream {
    Init = 1,
    Channel = 2,
    Noise = 3,
    Perturbation = 4,
}

/// Deterministic substream for `(master_seed, index, label)`.
pub fn substream(master_seed: u64, index: u64, label: Substream) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&index.to_le_bytes());
    seed[16..24].copy_from_slice(&(label as u64).to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}
