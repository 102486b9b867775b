//! Seeded randomness. Every consumer draws from its own ChaCha8 stream keyed by
//! `(seed, purpose, index)`, so results do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::chart::{ChartPoint, MetricModel, TangentVector};

/// Stream purposes; each owns a disjoint block of stream ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Purpose {
    Points = 1,
    Vectors = 2,
    Fields = 3,
    Shooting = 4,
    SelfTest = 5,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedSource {
    pub seed: u64,
}

impl SeedSource {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Generator for item `index` of `purpose`.
    pub fn stream(&self, purpose: Purpose, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((purpose as u64) << 48) | index);
        rng
    }

    /// `count` points from the model's sampling shell, point `i` from its own stream.
    pub fn points(&self, model: &MetricModel, count: usize) -> Vec<ChartPoint> {
        (0..count).map(|i| model.random_point(&mut self.stream(Purpose::Points, i as u64))).collect()
    }

    /// Uniform coordinates in `[-1, 1]^{2n}`, rejecting the near-zero ball.
    pub fn vector(&self, n: usize, index: u64) -> TangentVector {
        use rand::Rng;
        let mut rng = self.stream(Purpose::Vectors, index);
        loop {
            let x: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            if crate::linalg::norm(&x) > 1e-2 {
                return TangentVector::from_real(x);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::model_from_str;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let s = SeedSource::new(7);
        let m = model_from_str("hopf(2)").unwrap();
        assert_eq!(s.points(&m, 5), s.points(&m, 5));
        assert_ne!(s.vector(2, 0), s.vector(2, 1));
        assert_ne!(SeedSource::new(8).vector(2, 0), s.vector(2, 0));
        // Point 3 does not depend on how many points were drawn before it.
        assert_eq!(s.points(&m, 4)[3], s.points(&m, 9)[3]);
    }
}
