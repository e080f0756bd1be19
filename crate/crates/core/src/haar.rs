//! Haar-random unitaries and Monte-Carlo integration over U(d).

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64, ONE};

/// Seeded, splittable randomness source.
///
/// The pair `(seed, stream)` fully determines the draw sequence. Child streams
/// produced by [`RngStream::split`] are distinct ChaCha streams of the same
/// key, so they never overlap.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Independent child stream number `index`. Does not advance `self`.
    pub fn split(&self, index: u64) -> Self {
        Self::new(self.seed, splitmix64(splitmix64(self.stream) ^ splitmix64(!index)))
    }

    pub fn uniform(&mut self) -> f64 {
        // 53 random mantissa bits.
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn bit(&mut self) -> u8 {
        (self.rng.next_u32() & 1) as u8
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A Monte-Carlo mean with its standard error.
///
/// `stderr` is the larger of the real and imaginary sample standard
/// deviations divided by `sqrt(samples)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: Complex64,
    pub stderr: f64,
    pub samples: usize,
}

impl McEstimate {
    pub fn from_values(values: &[C64]) -> Self {
        let mut acc = Accumulator::default();
        for &v in values {
            acc.push(v);
        }
        acc.finish()
    }

    /// `|mean - target|` measured in standard errors (infinite when the
    /// estimate is exact but misses the target).
    pub fn z_score(&self, target: C64) -> f64 {
        let miss = (self.mean - target).norm();
        if miss <= 1e-12 * target.norm().max(1.0) {
            0.0
        } else if self.stderr > 0.0 {
            miss / self.stderr
        } else {
            f64::INFINITY
        }
    }

    pub fn within(&self, target: C64, sigmas: f64) -> bool {
        self.z_score(target) <= sigmas
    }
}

/// Welford accumulator for complex samples, mergeable in a fixed order.
#[derive(Clone, Copy, Debug, Default)]
pub struct Accumulator {
    n: usize,
    mean: C64,
    m2_re: f64,
    m2_im: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: C64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        let delta2 = x - self.mean;
        self.m2_re += delta.re * delta2.re;
        self.m2_im += delta.im * delta2.im;
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = (self.n + other.n) as f64;
        let delta = other.mean - self.mean;
        let w = self.n as f64 * other.n as f64 / n;
        self.m2_re += other.m2_re + delta.re * delta.re * w;
        self.m2_im += other.m2_im + delta.im * delta.im * w;
        self.mean += delta * (other.n as f64 / n);
        self.n += other.n;
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn finish(&self) -> McEstimate {
        let n = self.n;
        let stderr = if n >= 2 {
            let var_re = (self.m2_re / (n - 1) as f64).max(0.0);
            let var_im = (self.m2_im / (n - 1) as f64).max(0.0);
            var_re.max(var_im).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        McEstimate {
            mean: self.mean,
            stderr,
            samples: n,
        }
    }
}

/// Samples per work unit. Fixed so that results do not depend on the number
/// of worker threads.
const CHUNK: usize = 1024;

/// Runs `n` independent trials in parallel and merges them in index order.
///
/// Trial `k` receives its own child stream `rng.split(k)`, so the result is
/// bit-identical regardless of scheduling.
pub fn monte_carlo<F>(n: usize, rng: &RngStream, trial: F) -> Result<McEstimate>
where
    F: Fn(usize, &mut RngStream) -> Result<C64> + Sync,
{
    let chunks: Vec<Result<Accumulator>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = Accumulator::default();
            for k in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let mut sub = rng.split(k as u64);
                let value = trial(k, &mut sub).map_err(|source| Error::Evaluation {
                    sample: k,
                    seed: sub.seed(),
                    stream: sub.stream(),
                    source: Box::new(source),
                })?;
                acc.push(value);
            }
            Ok(acc)
        })
        .collect();
    let mut total = Accumulator::default();
    for chunk in chunks {
        total.merge(&chunk?);
    }
    Ok(total.finish())
}

/// Draws a Haar-random element of U(d).
///
/// Ginibre matrix, QR, then each column of `Q` is multiplied by the phase of
/// the matching diagonal entry of `R`; without that correction the result is
/// not Haar distributed.
pub fn sample_haar(d: usize, rng: &mut RngStream) -> Result<ComplexMatrix> {
    if d == 0 {
        return Err(Error::InvalidArgument("Haar sampling needs d >= 1".into()));
    }
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let ginibre = nalgebra::DMatrix::from_fn(d, d, |_, _| {
        C64::new(rng.normal() * scale, rng.normal() * scale)
    });
    let qr = ginibre.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { ONE };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    Ok(ComplexMatrix::from_inner(q))
}

/// Uniformly random unit vector in C^dim.
pub fn random_state(dim: usize, rng: &mut RngStream) -> Vec<C64> {
    let v: Vec<C64> = (0..dim).map(|_| C64::new(rng.normal(), rng.normal())).collect();
    let norm = crate::linalg::vec_norm(&v);
    v.into_iter().map(|z| z / norm).collect()
}

/// Monte-Carlo estimate of `∫ f(g) dg` over `n` Haar draws on U(d).
pub fn mc_integrate<F>(f: F, d: usize, n: usize, rng: &RngStream) -> Result<McEstimate>
where
    F: Fn(&ComplexMatrix) -> Result<C64> + Sync,
{
    if n < 2 {
        return Err(Error::InvalidArgument("Monte-Carlo integration needs n >= 2".into()));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("U(0) is empty".into()));
    }
    monte_carlo(n, rng, |_, sub| {
        let g = sample_haar(d, sub)?;
        f(&g)
    })
}

/// `∫ |g_11|^{2α} dg = α!(d-1)!/(α+d-1)!`.
///
/// The first row of a Haar unitary is uniform on the unit sphere of C^d, so
/// `|g_11|^2` is Beta(1, d-1) distributed; its α-th moment is the product
/// below.
pub fn moment_g(alpha: u32, d: usize) -> f64 {
    assert!(d >= 1, "moment_g needs d >= 1");
    (1..=alpha).fold(1.0, |acc, k| acc * k as f64 / (k as f64 + d as f64 - 1.0))
}
