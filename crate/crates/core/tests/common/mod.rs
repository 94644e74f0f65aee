//! Shared helpers for the integration suites: a tiny deterministic RNG
//! (so the randomized criteria are reproducible bit-for-bit) and
//! generators for random networks, regions, and queries.

use std::path::{Path, PathBuf};

use nnverify_core::exact::Interval;
use nnverify_core::net::{Activation, Convention, Layer, Network};
use nnverify_core::numeric::Rational;
use nnverify_core::query::{Expectation, Norm, RobustnessQuery};

/// xorshift64* — deterministic, seedable, no dependencies. Good enough
/// for fuzzing test instances; never used in library code.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> TestRng {
        TestRng(if seed == 0 { 0x9E37_79B9_7F4A_7C15 } else { seed })
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform in `0..n` (n > 0).
    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }

    /// Uniform integer in `lo..=hi`.
    pub fn range(&mut self, lo: i64, hi: i64) -> i64 {
        lo + self.below((hi - lo + 1) as u64) as i64
    }

    /// Uniform rational with numerator in `-max_numer..=max_numer` over
    /// the given denominator.
    pub fn rational(&mut self, max_numer: i64, denom: i64) -> Rational {
        Rational::new(self.range(-max_numer, max_numer), denom)
    }
}

/// Absolute path of a file under the workspace `fixtures/` directory.
pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

/// Random single-output threshold perceptron with `dim` inputs.
pub fn random_threshold_net(rng: &mut TestRng, dim: usize) -> Network {
    let weights = vec![(0..dim).map(|_| rng.rational(20, 10)).collect::<Vec<_>>()];
    let bias = vec![rng.rational(30, 10)];
    let theta = rng.rational(10, 10);
    let layer = Layer::new(0, weights, bias, Activation::Threshold(theta)).unwrap();
    Network::new(vec![layer], Convention::SignedBias).unwrap()
}

/// Random finite box: each side starts at a multiple of 1/10 and spans a
/// width of 0..=20 tenths (zero-width sides are legal intervals).
pub fn random_finite_region(rng: &mut TestRng, dim: usize) -> Vec<Interval> {
    (0..dim)
        .map(|_| {
            let lo = rng.rational(15, 10);
            let width = Rational::new(rng.range(0, 20), 10);
            let hi = &lo + &width;
            Interval::finite(lo, hi).unwrap()
        })
        .collect()
}

/// Random gridded query over a single-layer instance: finite box, a step
/// from a small menu of tenths/twentieths, and a binary class target.
pub fn random_gridded_query(rng: &mut TestRng, dim: usize) -> RobustnessQuery {
    let region = random_finite_region(rng, dim);
    let step = match rng.below(3) {
        0 => Rational::new(1, 10),
        1 => Rational::new(1, 20),
        _ => Rational::new(3, 20),
    };
    RobustnessQuery {
        region,
        grid_step: Some(step),
        grid_cap: None,
        expect: Expectation::Class(rng.below(2) as usize),
        norm: Norm::Inf,
        anchor: None,
    }
}

/// Random feed-forward net of 1..=max_layers layers, widths 1..=3, with
/// ReLU on hidden layers and ReLU or Identity on the last.
pub fn random_relu_net(rng: &mut TestRng, max_layers: u64) -> Network {
    let n_layers = 1 + rng.below(max_layers) as usize;
    let mut dims = Vec::with_capacity(n_layers + 1);
    for _ in 0..=n_layers {
        dims.push(1 + rng.below(3) as usize);
    }
    let mut layers = Vec::with_capacity(n_layers);
    for l in 0..n_layers {
        let (din, dout) = (dims[l], dims[l + 1]);
        let weights = (0..dout)
            .map(|_| (0..din).map(|_| rng.rational(20, 10)).collect::<Vec<_>>())
            .collect::<Vec<_>>();
        let bias = (0..dout).map(|_| rng.rational(20, 10)).collect::<Vec<_>>();
        let act = if l + 1 < n_layers || rng.below(2) == 0 {
            Activation::Relu
        } else {
            Activation::Identity
        };
        layers.push(Layer::new(l, weights, bias, act).unwrap());
    }
    Network::new(layers, Convention::SignedBias).unwrap()
}

/// A point inside the box: per dimension `lo + (k/16) * width` for a
/// random `k` in 0..=16.
pub fn random_point_in(rng: &mut TestRng, region: &[Interval]) -> Vec<Rational> {
    region
        .iter()
        .map(|iv| {
            let (lo, hi) = iv.as_finite().expect("finite region");
            let t = Rational::new(rng.range(0, 16), 16);
            lo + &(&t * &(hi - lo))
        })
        .collect()
}
