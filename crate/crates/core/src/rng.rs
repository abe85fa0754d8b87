//! Deterministic, splittable random streams.
//!
//! A stream is identified by a root seed and a path of labels. The key of
//! the underlying ChaCha8 generator is the SHA-256 digest of
//!
//! ```text
//! "percsim-rng/1" || seed (u64, little endian) || for each label: len (u64 LE) || utf-8 bytes
//! ```
//!
//! so `derive(derive(s, "a"), "b")` (path `["a", "b"]`) and `derive(s, "ab")`
//! (path `["ab"]`) are different streams. ChaCha is a counter-mode cipher,
//! which makes streams with different keys independent for all practical
//! purposes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
    path: Vec<String>,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            path: Vec::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path(&self) -> &[String] {
        &self.path
    }

    pub fn derive(&self, label: &str) -> RngStream {
        let mut path = self.path.clone();
        path.push(label.to_owned());
        RngStream {
            seed: self.seed,
            path,
        }
    }

    /// Child stream for replicate `i`.
    pub fn replicate(&self, i: usize) -> RngStream {
        self.derive(&format!("#{i}"))
    }

    fn key(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"percsim-rng/1");
        h.update(self.seed.to_le_bytes());
        for label in &self.path {
            h.update((label.len() as u64).to_le_bytes());
            h.update(label.as_bytes());
        }
        let digest = h.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        key
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.key())
    }
}
