//! Streaming SGD with dropout, Ruppert-Polyak averaging and multi-rate runs.

use crate::error::{check_probability, Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::randgen::{DropoutMask, RngStream, StreamSample};

/// Minimum number of design draws accepted by [`lr_admissible_q2`].
pub const MIN_ADMISSIBILITY_DRAWS: usize = 1000;

#[derive(Clone, Debug)]
pub struct SgdConfig {
    pub p: f64,
    pub alpha: f64,
    /// Regression vector used to simulate the stream.
    pub beta_star: Vector,
}

impl SgdConfig {
    pub fn new(p: f64, alpha: f64, beta_star: Vector) -> Result<Self> {
        check_probability(p)?;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Parameter(format!("learning rate must be positive, got {alpha}")));
        }
        Ok(Self { p, alpha, beta_star })
    }

    pub fn dim(&self) -> usize {
        self.beta_star.dim()
    }
}

/// Current SGD dropout iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct SgdState {
    pub beta: Vector,
    pub step: u64,
}

impl SgdState {
    pub fn zeros(d: usize) -> Self {
        Self { beta: Vector::zeros(d), step: 0 }
    }

    pub fn from_initial(beta: Vector) -> Self {
        Self { beta, step: 0 }
    }

    /// `beta <- beta + alpha D x (y - x^T D beta)`.
    pub fn step(&mut self, alpha: f64, sample: &StreamSample, mask: &DropoutMask) -> Result<()> {
        let d = self.beta.dim();
        if sample.x.dim() != d || mask.dim() != d {
            return Err(Error::Dimension(format!(
                "state has dimension {d}, sample {} and mask {}",
                sample.x.dim(),
                mask.dim()
            )));
        }
        let keep = mask.retained();
        let x = sample.x.as_slice();
        let beta = self.beta.as_mut_slice();
        let mut fitted = 0.0;
        for i in 0..d {
            if keep[i] {
                fitted += x[i] * beta[i];
            }
        }
        let scaled = alpha * (sample.y - fitted);
        for i in 0..d {
            if keep[i] {
                beta[i] += scaled * x[i];
            }
        }
        self.step += 1;
        Ok(())
    }
}

pub fn sgd_step(config: &SgdConfig, state: &SgdState, sample: &StreamSample, mask: &DropoutMask) -> Result<SgdState> {
    let mut next = state.clone();
    next.step(config.alpha, sample, mask)?;
    Ok(next)
}

/// Ruppert-Polyak running mean of the iterates.
#[derive(Clone, Debug, PartialEq)]
pub struct AsgdState {
    mean: Vector,
    count: u64,
}

impl AsgdState {
    pub fn new(d: usize) -> Self {
        Self { mean: Vector::zeros(d), count: 0 }
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// `mean <- (n mean + beta) / (n + 1)`, written as an increment.
    pub fn update(&mut self, beta: &Vector) -> Result<()> {
        if beta.dim() != self.mean.dim() {
            return Err(Error::Dimension(format!(
                "average has dimension {}, iterate {}",
                self.mean.dim(),
                beta.dim()
            )));
        }
        self.count += 1;
        let w = 1.0 / self.count as f64;
        for (m, b) in self.mean.as_mut_slice().iter_mut().zip(beta.iter()) {
            *m += (b - *m) * w;
        }
        Ok(())
    }
}

pub fn asgd_update(avg: &AsgdState, beta: &Vector) -> Result<AsgdState> {
    let mut next = avg.clone();
    next.update(beta)?;
    Ok(next)
}

/// Solves `E[X_{1,p}] beta = E[y x]` for the dropout-regularized target.
pub fn l2_minimizer_sgd(ex_gram_p: &Matrix, ex_yx: &Vector) -> Result<Vector> {
    ex_gram_p.solve(ex_yx)
}

/// Outcome of the second-moment learning-rate check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admissibility {
    /// Largest learning rate for which the estimated `E[2 DXD - a DXDXD]` stays positive definite.
    pub threshold: f64,
    /// Whether the configured learning rate lies below the threshold.
    pub admissible: bool,
    /// Whether the stronger sufficient condition `E[2X - a X^2]_p > 0` holds at the configured rate.
    pub sufficient_pd: bool,
}

/// Accumulates `p X_p` and `p X_p X_p + p^2(1-p) Diag(Xbar X)` for `X = x x^T`,
/// i.e. the dropout expectations of `DXD` and `DXDXD`, averaged over draws.
fn dropout_gram_moments(p: f64, draws: &[Vector]) -> (Matrix, Matrix, Matrix, Matrix) {
    let d = draws[0].dim();
    let mut first = Matrix::zeros(d, d);
    let mut second = Matrix::zeros(d, d);
    let mut gram = Matrix::zeros(d, d);
    let mut gram_sq = Matrix::zeros(d, d);
    let mut gp = Matrix::zeros(d, d);
    for x in draws {
        let sq: f64 = x.iter().map(|v| v * v).sum();
        for i in 0..d {
            for j in 0..d {
                let g = x[i] * x[j];
                gp[(i, j)] = if i == j { g } else { p * g };
                gram[(i, j)] += g;
                gram_sq[(i, j)] += g * sq;
            }
        }
        for i in 0..d {
            for j in 0..d {
                first[(i, j)] += p * gp[(i, j)];
                let mut acc = 0.0;
                for k in 0..d {
                    acc += gp[(i, k)] * gp[(k, j)];
                }
                second[(i, j)] += p * acc;
            }
            // Diag(Xbar X)_ii = sum_{k != i} x_i^2 x_k^2
            second[(i, i)] += p * p * (1.0 - p) * x[i] * x[i] * (sq - x[i] * x[i]);
        }
    }
    let inv = 1.0 / draws.len() as f64;
    (first.scale(inv), second.scale(inv), gram.scale(inv), gram_sq.scale(inv))
}

/// Learning-rate admissibility at `q = 2`, with the dropout marginalized
/// exactly and the design law replaced by the empirical law of `draws`.
pub fn lr_admissible_q2(config: &SgdConfig, draws: &[Vector]) -> Result<Admissibility> {
    if draws.len() < MIN_ADMISSIBILITY_DRAWS {
        return Err(Error::Contract(format!(
            "need at least {MIN_ADMISSIBILITY_DRAWS} design draws, got {}",
            draws.len()
        )));
    }
    let d = config.dim();
    if draws.iter().any(|x| x.dim() != d) {
        return Err(Error::Dimension("design draw dimension differs from the configuration".into()));
    }
    let (first, second, gram, gram_sq) = dropout_gram_moments(config.p, draws);
    let lambda_min_at = |a: f64| (&first.scale(2.0) - &second.scale(a)).lambda_min();

    if lambda_min_at(0.0)? <= 0.0 {
        return Err(Error::Singular("estimated E[DXD] is not positive definite".into()));
    }
    let mut hi = 1.0;
    while lambda_min_at(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Contract("no finite admissibility threshold".into()));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-6 * hi {
        let mid = 0.5 * (lo + hi);
        if lambda_min_at(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let threshold = 0.5 * (lo + hi);
    let admissible = lambda_min_at(config.alpha)? > 0.0;
    let sufficient = (&gram.scale(2.0) - &gram_sq.scale(config.alpha)).p_rescale(config.p)?;
    Ok(Admissibility { threshold, admissible, sufficient_pd: sufficient.lambda_min()? > 0.0 })
}

/// Several SGD chains with different learning rates driven by one shared
/// sample-and-mask sequence.
#[derive(Clone, Debug)]
pub struct MultiRateRun {
    rates: Vec<f64>,
    states: Vec<SgdState>,
    averages: Vec<AsgdState>,
}

impl MultiRateRun {
    pub fn new(rates: &[f64], d: usize) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::Contract("need at least one learning rate".into()));
        }
        if let Some(a) = rates.iter().find(|a| !(**a > 0.0)) {
            return Err(Error::Parameter(format!("learning rates must be positive, got {a}")));
        }
        Ok(Self {
            rates: rates.to_vec(),
            states: vec![SgdState::zeros(d); rates.len()],
            averages: vec![AsgdState::new(d); rates.len()],
        })
    }

    /// Advances every chain with the same observation and mask.
    pub fn advance(&mut self, sample: &StreamSample, mask: &DropoutMask) -> Result<()> {
        for ((alpha, state), avg) in self.rates.iter().zip(&mut self.states).zip(&mut self.averages) {
            state.step(*alpha, sample, mask)?;
            avg.update(&state.beta)?;
        }
        Ok(())
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn states(&self) -> &[SgdState] {
        &self.states
    }

    pub fn averages(&self) -> &[AsgdState] {
        &self.averages
    }

    /// `vec(beta_bar(a_1), ..., beta_bar(a_s))`, of dimension `d s`.
    pub fn stacked(&self) -> Vector {
        let data: Vec<f64> = self.averages.iter().flat_map(|a| a.mean().iter().copied()).collect();
        Vector::new(data).expect("averages are finite")
    }

    /// Stacked current iterates, the input for a long-run covariance estimate in `d s` dimensions.
    pub fn stacked_iterates(&self) -> Vector {
        let data: Vec<f64> = self.states.iter().flat_map(|s| s.beta.iter().copied()).collect();
        Vector::new(data).expect("iterates are finite")
    }
}

/// Runs `n` lockstep steps over freshly simulated data.
pub fn parallel_run(rates: &[f64], config: &SgdConfig, n: u64, rng: &mut RngStream) -> Result<MultiRateRun> {
    let d = config.dim();
    let mut run = MultiRateRun::new(rates, d)?;
    let mut sample = StreamSample::zeros(d);
    let mut mask = DropoutMask::all(d, config.p)?;
    for _ in 0..n {
        sample.redraw(&config.beta_star, rng);
        mask.resample(rng);
        run.advance(&sample, &mask)?;
    }
    Ok(run)
}

/// Two SGD chains from `beta0` and `beta0p` sharing every observation and
/// mask. Returns `ln ||beta_k - beta'_k||` for `k = 1..=steps`; the difference
/// `Delta_k = (I - alpha D_k x_k x_k^T D_k) Delta_{k-1}` is propagated
/// directly and renormalized, so the noise terms cancel exactly.
pub fn coupled_sgd_run(
    config: &SgdConfig,
    beta0: &Vector,
    beta0p: &Vector,
    steps: usize,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let d = config.dim();
    if beta0.dim() != d || beta0p.dim() != d {
        return Err(Error::Dimension(format!("initial points must have dimension {d}")));
    }
    let mut delta = beta0 - beta0p;
    let mut log_scale = delta.norm().ln();
    if log_scale.is_finite() {
        delta = delta.scale(1.0 / delta.norm());
    }
    let mut sample = StreamSample::zeros(d);
    let mut mask = DropoutMask::all(d, config.p)?;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        sample.redraw(&config.beta_star, rng);
        mask.resample(rng);
        if log_scale.is_finite() {
            let keep = mask.retained();
            let x = sample.x.as_slice();
            let proj: f64 = (0..d).filter(|&i| keep[i]).map(|i| x[i] * delta[i]).sum();
            for i in 0..d {
                if keep[i] {
                    delta[i] -= config.alpha * x[i] * proj;
                }
            }
            let norm = delta.norm();
            log_scale += norm.ln();
            if norm > 0.0 {
                delta = delta.scale(1.0 / norm);
            }
        }
        out.push(log_scale);
    }
    Ok(out)
}
