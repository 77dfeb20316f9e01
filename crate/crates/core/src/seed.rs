//! Reproducible random streams.
//!
//! A [`Seed`] names one ChaCha8 stream: the root seeds the key and the
//! instance index selects the stream, so every `(root, index)` pair is an
//! independent sequence and no stream depends on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Seed {
    pub root: u64,
    pub index: u64,
}

impl Seed {
    pub const fn new(root: u64, index: u64) -> Self {
        Seed { root, index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.root);
        rng.set_stream(self.index);
        rng
    }
}

impl std::fmt::Display for Seed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.root, self.index)
    }
}

impl std::str::FromStr for Seed {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (root, index) = s
            .split_once(':')
            .ok_or_else(|| format!("seed `{s}` is not of the form root:index"))?;
        Ok(Seed {
            root: root.parse().map_err(|e| format!("seed root `{root}`: {e}"))?,
            index: index.parse().map_err(|e| format!("seed index `{index}`: {e}"))?,
        })
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child root from a parent root and a path of words.
pub fn derive_root(root: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(root), |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

/// Stable 64-bit tag for a short label, used as a path word.
pub fn tag(label: &str) -> u64 {
    // FNV-1a
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}
