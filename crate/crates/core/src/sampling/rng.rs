use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

/// Position of a reproducible random stream: a ChaCha key derived from
/// `seed`, and `stream_id` as the cipher's stream (nonce) word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngState {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngState { seed, stream_id }
    }

    /// Stream for the `index`-th sub-task; same key, scrambled stream word.
    pub fn child(&self, index: u64) -> RngState {
        RngState {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(index.wrapping_add(1))),
        }
    }

    pub fn stream(&self) -> Stream {
        Stream::new(*self)
    }
}

/// Generator positioned at the start of an [`RngState`].
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
    redraws: u64,
}

impl Stream {
    pub fn new(state: RngState) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(state.seed);
        rng.set_stream(state.stream_id);
        Stream { rng, redraws: 0 }
    }

    /// Uniform on the open interval (0, 1), on the grid `(k + 1/2) 2^-53`.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by inversion of the CDF.
    pub fn gaussian(&mut self) -> f64 {
        let u = self.uniform();
        -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * u)
    }

    /// Standard Cauchy by inversion of the CDF.
    pub fn cauchy(&mut self) -> f64 {
        (std::f64::consts::PI * (self.uniform() - 0.5)).tan()
    }

    pub(crate) fn count_redraw(&mut self) {
        self.redraws += 1;
    }

    /// Draws discarded because they hit a probability-zero event.
    pub fn redraws(&self) -> u64 {
        self.redraws
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_states_identical_draws() {
        let mut a = RngState::new(7, 3).stream();
        let mut b = RngState::new(7, 3).stream();
        for _ in 0..100 {
            assert_eq!(a.gaussian().to_bits(), b.gaussian().to_bits());
        }
    }

    #[test]
    fn distinct_streams_differ() {
        let mut a = RngState::new(7, 3).stream();
        let mut b = RngState::new(7, 4).stream();
        let same = (0..100).filter(|_| a.uniform() == b.uniform()).count();
        assert_eq!(same, 0);
        assert_ne!(RngState::new(1, 0).child(0), RngState::new(1, 0).child(1));
    }

    #[test]
    fn uniform_open_interval_and_moments() {
        let mut s = RngState::new(11, 0).stream();
        let n = 200_000;
        let (mut m1, mut m2) = (0.0, 0.0);
        for _ in 0..n {
            let g = s.gaussian();
            m1 += g;
            m2 += g * g;
            let u = s.uniform();
            assert!(u > 0.0 && u < 1.0);
        }
        m1 /= n as f64;
        m2 /= n as f64;
        assert!(m1.abs() < 0.01 && (m2 - 1.0).abs() < 0.01, "{m1} {m2}");
    }
}
