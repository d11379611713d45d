//! Randomly shifted Korobov rank-1 lattice rules.
//!
//! Point `k` of an `n`-point rule with multiplier `a` has coordinates
//! `frac(k * a^j / n)`, j = 0, 1, ... . The table below pairs primes just
//! under successive powers of two with a multiplier picked by minimising
//! the weighted P2 criterion (weights 1/j, ten dimensions) over a candidate
//! set; [`p2_criterion`] reproduces the figure of merit.

use super::rng::SplitMix64;

/// (points, multiplier) in increasing size.
pub const KOROBOV_TABLE: [(usize, u64); 18] = [
    (31, 7),
    (61, 7),
    (127, 44),
    (251, 37),
    (509, 132),
    (1021, 331),
    (2039, 922),
    (4093, 149),
    (8191, 1527),
    (16381, 6711),
    (32749, 9999),
    (65521, 17868),
    (131071, 50104),
    (262139, 16193),
    (524287, 101671),
    (1048573, 285911),
    (2097143, 327547),
    (4194301, 976357),
];

/// Korobov generating vector (1, a, a^2, ...) mod n.
pub fn generating_vector(n: usize, multiplier: u64, dim: usize) -> Vec<u64> {
    let n = n as u64;
    let mut z = Vec::with_capacity(dim);
    let mut g = 1u64;
    for _ in 0..dim {
        z.push(g);
        g = (g * multiplier) % n;
    }
    z
}

/// Weighted P2 worst-case error of the unshifted rule (weights 1/(j+1)).
pub fn p2_criterion(n: usize, z: &[u64]) -> f64 {
    let two_pi_sq = 2.0 * std::f64::consts::PI.powi(2);
    let mut total = 0.0;
    for k in 0..n as u64 {
        let mut prod = 1.0;
        for (j, &zj) in z.iter().enumerate() {
            let x = ((k * zj) % n as u64) as f64 / n as f64;
            prod *= 1.0 + two_pi_sq * (x * x - x + 1.0 / 6.0) / (j as f64 + 1.0);
        }
        total += prod;
    }
    total / n as f64 - 1.0
}

/// One randomly shifted copy of a lattice rule.
#[derive(Clone, Debug)]
pub struct ShiftedLattice {
    n: usize,
    z: Vec<u64>,
    shift: Vec<f64>,
}

impl ShiftedLattice {
    pub fn new(n: usize, multiplier: u64, dim: usize, rng: &mut SplitMix64) -> Self {
        let shift = (0..dim).map(|_| rng.next_f64()).collect();
        Self { n, z: generating_vector(n, multiplier, dim), shift }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Writes the baker-transformed point `k` into `out`, each coordinate in (0, 1).
    pub fn point(&self, k: usize, out: &mut [f64]) {
        let n = self.n as u64;
        let k = k as u64;
        for ((o, &zj), &dj) in out.iter_mut().zip(&self.z).zip(&self.shift) {
            let base = ((k * zj) % n) as f64 / n as f64;
            let x = (base + dj).fract();
            let w = 1.0 - (2.0 * x - 1.0).abs();
            *o = w.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
        }
    }
}
