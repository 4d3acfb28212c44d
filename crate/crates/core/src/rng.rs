//! Path-keyed random streams.
//!
//! A [`RngKey`] names a stream by a root seed and a path of indices such as
//! `(epoch, point, group)`. The key is hashed into a ChaCha8 seed, so the
//! draws for a given path never depend on how many other streams were
//! consumed before it or on which worker consumes it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Identifier of one reproducible random stream.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RngKey {
    pub root_seed: u64,
    pub path: Vec<u64>,
}

// Well-known domain tags so sibling subsystems never share a stream.
pub mod domain {
    pub const INIT: u64 = 0x1;
    pub const BATCH: u64 = 0x2;
    pub const GROUPS: u64 = 0x3;
    pub const SENSORS: u64 = 0x4;
    pub const INITIAL_SET: u64 = 0x5;
    pub const TEST_SET: u64 = 0x6;
    pub const PDE_INIT: u64 = 0x7;
    pub const ABC: u64 = 0x8;
    pub const ESTIMATE: u64 = 0x9;
}

const fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngKey {
    pub fn new(root_seed: u64) -> Self {
        Self {
            root_seed,
            path: Vec::new(),
        }
    }

    /// Key one level deeper in the path.
    pub fn child(&self, index: u64) -> Self {
        let mut path = Vec::with_capacity(self.path.len() + 1);
        path.extend_from_slice(&self.path);
        path.push(index);
        Self {
            root_seed: self.root_seed,
            path,
        }
    }

    pub fn at(&self, indices: &[u64]) -> Self {
        let mut path = self.path.clone();
        path.extend_from_slice(indices);
        Self {
            root_seed: self.root_seed,
            path,
        }
    }

    fn seed_bytes(&self) -> [u8; 32] {
        let mut h = splitmix(self.root_seed ^ 0x6d63_7069_6e6e_0001);
        // Length is absorbed so that (1) and (1, 0) differ.
        h = splitmix(h ^ self.path.len() as u64);
        for &p in &self.path {
            h = splitmix(h ^ splitmix(p.wrapping_add(0x2545_f491_4f6c_dd1d)));
        }
        let mut out = [0u8; 32];
        let mut s = h;
        for chunk in out.chunks_mut(8) {
            s = splitmix(s);
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        out
    }

    /// Fresh stream positioned at the start of this key's sequence.
    pub fn stream(&self) -> Stream {
        Stream {
            rng: ChaCha8Rng::from_seed(self.seed_bytes()),
        }
    }
}

/// Sequential draws from one keyed stream.
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform on `(0, 1]`.
    pub fn uniform_open_closed(&mut self) -> f64 {
        1.0 - self.rng.random::<f64>()
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random::<u64>()
    }
}
