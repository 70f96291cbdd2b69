use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Independent random streams within one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stream {
    Calibration,
    Production,
    DofScaling,
    Test,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Calibration => 0x63616c69,
            Stream::Production => 0x70726f64,
            Stream::DofScaling => 0x646f6673,
            Stream::Test => 0x74657374,
        }
    }
}

/// Coordinates of one random draw: equal paths give equal samples, distinct paths independent ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedPath {
    pub seed: u64,
    pub level: u32,
    pub sample: u64,
    pub replica: u32,
    pub stream: Stream,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl SeedPath {
    pub fn new(seed: u64, level: u32, sample: u64, replica: u32, stream: Stream) -> Self {
        Self { seed, level, sample, replica, stream }
    }

    pub fn with_level(self, level: u32) -> Self {
        Self { level, ..self }
    }

    pub fn with_sample(self, sample: u64) -> Self {
        Self { sample, ..self }
    }

    /// Generator keyed on the whole tuple.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut h = splitmix(self.seed);
        for part in [self.stream.tag(), self.level as u64, self.sample, self.replica as u64] {
            h = splitmix(h ^ part);
        }
        let mut key = [0u8; 32];
        for (k, chunk) in key.chunks_mut(8).enumerate() {
            h = splitmix(h.wrapping_add(k as u64));
            chunk.copy_from_slice(&h.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}
