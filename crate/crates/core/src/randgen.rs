//! Seeded random generation: dropout masks, fixed designs and streaming samples.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_probability, Error, Result};
use crate::inference::ppnd16;
use crate::linalg::{Matrix, Vector};

/// A reproducible random stream keyed by `(seed, stream_id)`.
///
/// Streams are counter based, so every replication owns an independent
/// sequence that does not depend on how replications are scheduled.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw on the open interval (0, 1) with 53 bits of resolution.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw by inverting the normal CDF at a uniform.
    pub fn standard_normal(&mut self) -> f64 {
        ppnd16(self.uniform())
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

/// A Bernoulli(p) dropout mask: the diagonal of the dropout matrix `D`.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMask {
    retained: Vec<bool>,
    p: f64,
}

impl DropoutMask {
    pub fn new(retained: Vec<bool>, p: f64) -> Result<Self> {
        check_probability(p)?;
        if retained.is_empty() {
            return Err(Error::Dimension("mask must cover at least one coordinate".into()));
        }
        Ok(Self { retained, p })
    }

    pub fn all(d: usize, p: f64) -> Result<Self> {
        Self::new(vec![true; d], p)
    }

    pub fn none(d: usize, p: f64) -> Result<Self> {
        Self::new(vec![false; d], p)
    }

    pub fn dim(&self) -> usize {
        self.retained.len()
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn retained(&self) -> &[bool] {
        &self.retained
    }

    pub fn is_retained(&self, i: usize) -> bool {
        self.retained[i]
    }

    pub fn count_retained(&self) -> usize {
        self.retained.iter().filter(|&&b| b).count()
    }

    /// The diagonal 0/1 matrix `D`.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_diag(&self.retained.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect::<Vec<_>>())
    }

    /// Redraws every entry in place.
    pub fn resample(&mut self, rng: &mut RngStream) {
        let p = self.p;
        for r in &mut self.retained {
            *r = rng.bernoulli(p);
        }
    }
}

pub fn sample_dropout(d: usize, p: f64, rng: &mut RngStream) -> Result<DropoutMask> {
    check_probability(p)?;
    if d == 0 {
        return Err(Error::Dimension("mask dimension must be positive".into()));
    }
    let retained = (0..d).map(|_| rng.bernoulli(p)).collect();
    Ok(DropoutMask { retained, p })
}

/// Fixed-design regression data `y = X beta* + eps`.
#[derive(Clone, Debug)]
pub struct FixedDesignData {
    pub x: Matrix,
    pub y: Vector,
    pub beta_star: Vector,
}

/// Gaussian design and Gaussian noise; any all-zero column is redrawn.
pub fn gen_fixed_design(n: usize, beta_star: &Vector, rng: &mut RngStream) -> Result<FixedDesignData> {
    let d = beta_star.dim();
    if n < d {
        return Err(Error::Parameter(format!("need n >= d, got n={n}, d={d}")));
    }
    let mut x = Matrix::from_fn(n, d, |_, _| rng.standard_normal());
    for j in 0..d {
        while (0..n).all(|i| x[(i, j)] == 0.0) {
            for i in 0..n {
                x[(i, j)] = rng.standard_normal();
            }
        }
    }
    let signal = x.matvec(beta_star)?;
    let y = Vector::from_fn(n, |i| signal[i] + rng.standard_normal());
    Ok(FixedDesignData { x, y, beta_star: beta_star.clone() })
}

/// One observation `(y_k, x_k)` of the streaming model.
#[derive(Clone, Debug)]
pub struct StreamSample {
    pub y: f64,
    pub x: Vector,
}

impl StreamSample {
    pub fn zeros(d: usize) -> Self {
        Self { y: 0.0, x: Vector::zeros(d) }
    }

    /// Overwrites this sample with a fresh draw: isotropic Gaussian `x` and
    /// `y = x^T beta* + eps` with standard normal noise.
    pub fn redraw(&mut self, beta_star: &Vector, rng: &mut RngStream) {
        debug_assert_eq!(self.x.dim(), beta_star.dim());
        let mut signal = 0.0;
        for (xi, b) in self.x.as_mut_slice().iter_mut().zip(beta_star.iter()) {
            *xi = rng.standard_normal();
            signal += *xi * b;
        }
        self.y = signal + rng.standard_normal();
    }
}

pub fn stream_sample(beta_star: &Vector, rng: &mut RngStream) -> StreamSample {
    let mut s = StreamSample::zeros(beta_star.dim());
    s.redraw(beta_star, rng);
    s
}
