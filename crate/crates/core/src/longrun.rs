//! Non-overlapping batch-means (NBM) estimation of the long-run covariance
//! of an iterate sequence, online in O(1) memory, with the offline
//! definition kept alongside as a reference.
//!
//! Blocks are `B_m = {eta_m, ..., eta_{m+1} - 1}` with `eta_m = floor(c m^zeta)`.
//! The first block always starts at index 1.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::sgd::AsgdState;

/// Eigenvalues of the finalized estimate above `-NEGATIVE_EIGEN_TOLERANCE * scale` count as zero.
const NEGATIVE_EIGEN_TOLERANCE: f64 = 1e-10;

/// Block boundaries `eta_m = floor(c m^zeta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSchedule {
    c: f64,
    zeta: f64,
}

impl BlockSchedule {
    /// Validates `c > 0`, `zeta > 1` and that every block is nonempty.
    pub fn new(c: f64, zeta: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Parameter(format!("block scale c must be positive, got {c}")));
        }
        if !(zeta > 1.0 && zeta.is_finite()) {
            return Err(Error::Parameter(format!("block exponent zeta must exceed 1, got {zeta}")));
        }
        let schedule = Self { c, zeta };
        // Increments c zeta m^(zeta-1) exceed 1 beyond this m, so checking up
        // to it covers every possible repeat.
        let settled = (1.0 / (c * zeta)).powf(1.0 / (zeta - 1.0)).ceil().max(1.0) as u64 + 2;
        if schedule.eta(2) <= 1 {
            return Err(Error::Parameter(format!("eta_2 = {} leaves the first block empty", schedule.eta(2))));
        }
        for m in 2..=settled.min(1 << 20) {
            if schedule.eta(m + 1) <= schedule.eta(m) {
                return Err(Error::Parameter(format!(
                    "eta_{} = eta_{m} = {}: block {m} would be empty",
                    m + 1,
                    schedule.eta(m)
                )));
            }
        }
        Ok(schedule)
    }

    /// `eta_m = m^2`: `floor(sqrt(n))` blocks after `n` steps.
    pub fn squares() -> Self {
        Self { c: 1.0, zeta: 2.0 }
    }

    /// `eta_m = floor(m^{3/2})`, the rate-optimal choice.
    pub fn three_halves() -> Self {
        Self { c: 1.0, zeta: 1.5 }
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    /// `floor(c m^zeta)`, with values within 1e-9 of an integer snapped to it.
    pub fn eta(&self, m: u64) -> u64 {
        let x = self.c * (m as f64).powf(self.zeta);
        let r = x.round();
        if (x - r).abs() <= 1e-9 * r.max(1.0) {
            r as u64
        } else {
            x.floor() as u64
        }
    }

    /// First index of block `m`; block 1 starts at 1 regardless of `eta_1`.
    pub fn block_start(&self, m: u64) -> u64 {
        if m <= 1 {
            1
        } else {
            self.eta(m)
        }
    }

    /// `psi(n)`: the block containing index `n >= 1`.
    pub fn block_of(&self, n: u64) -> u64 {
        let mut m = 1;
        while self.block_start(m + 1) <= n {
            m += 1;
        }
        m
    }
}

pub fn eta(m: u64, schedule: &BlockSchedule) -> u64 {
    schedule.eta(m)
}

/// Accumulators of the online estimator.
///
/// With `S_m` the sum over block `m`, `R_n` the running tail sum and
/// `delta = n - eta_psi + 1` the tail length:
///
/// * `V_n = sum_{m < psi} S_m S_m^T + R_n R_n^T`
/// * `K_n = sum_{m < psi} |B_m|^2 + delta^2`
/// * `H_n = sum_{m < psi} |B_m| S_m + delta R_n`
///
/// and `Sigma_n = (V_n + K_n b b^T - H_n b^T - b H_n^T) / n` with `b` the
/// running mean. The completed-block part of `V_n` is stored separately
/// from the tail term, so a step inside a block costs O(d).
#[derive(Debug, Clone)]
pub struct CovState {
    schedule: BlockSchedule,
    n: u64,
    psi: u64,
    next_start: u64,
    delta: u64,
    tail: Vec<f64>,
    closed_v: Vec<f64>,
    closed_k: f64,
    closed_h: Vec<f64>,
    mean: AsgdState,
}

impl CovState {
    pub fn new(d: usize, schedule: BlockSchedule) -> Self {
        Self {
            schedule,
            n: 0,
            psi: 0,
            next_start: 1,
            delta: 0,
            tail: vec![0.0; d],
            closed_v: vec![0.0; d * d],
            closed_k: 0.0,
            closed_h: vec![0.0; d],
            mean: AsgdState::new(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.tail.len()
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    /// `psi(n)`.
    pub fn block_index(&self) -> u64 {
        self.psi
    }

    /// `delta_eta(n)`.
    pub fn tail_len(&self) -> u64 {
        self.delta
    }

    pub fn schedule(&self) -> &BlockSchedule {
        &self.schedule
    }

    pub fn mean(&self) -> &Vector {
        self.mean.mean()
    }

    pub fn average(&self) -> &AsgdState {
        &self.mean
    }

    /// `R_n`.
    pub fn tail_sum(&self) -> Vector {
        Vector::new(self.tail.clone()).expect("finite accumulators")
    }

    /// `V_n`.
    pub fn v(&self) -> Matrix {
        let d = self.dim();
        Matrix::from_fn(d, d, |i, j| self.closed_v[i * d + j] + self.tail[i] * self.tail[j])
    }

    /// `K_n`.
    pub fn k(&self) -> f64 {
        self.closed_k + (self.delta as f64).powi(2)
    }

    /// `H_n`.
    pub fn h(&self) -> Vector {
        let delta = self.delta as f64;
        Vector::from_fn(self.dim(), |i| self.closed_h[i] + delta * self.tail[i])
    }

    /// Consumes the next iterate: updates the running mean, then either
    /// extends the tail block or closes it and opens a new one.
    pub fn update(&mut self, beta: &Vector) -> Result<()> {
        let d = self.dim();
        if beta.dim() != d {
            return Err(Error::Dimension(format!("estimator has dimension {d}, iterate {}", beta.dim())));
        }
        self.mean.update(beta)?;
        self.n += 1;
        if self.n < self.next_start {
            for (r, b) in self.tail.iter_mut().zip(beta.iter()) {
                *r += b;
            }
            self.delta += 1;
        } else {
            if self.psi > 0 {
                let len = self.delta as f64;
                for i in 0..d {
                    let ti = self.tail[i];
                    self.closed_h[i] += len * ti;
                    for j in 0..d {
                        self.closed_v[i * d + j] += ti * self.tail[j];
                    }
                }
                self.closed_k += len * len;
            }
            self.psi += 1;
            self.next_start = self.schedule.block_start(self.psi + 1);
            self.tail.copy_from_slice(beta.as_slice());
            self.delta = 1;
        }
        Ok(())
    }

    /// The estimate `Sigma_n`, symmetrized, with tiny negative eigenvalues
    /// from rounding clamped to zero.
    pub fn finalize(&self) -> Result<Matrix> {
        if self.n == 0 {
            return Err(Error::Contract("no iterates consumed yet".into()));
        }
        let d = self.dim();
        let b = self.mean.mean();
        let h = self.h();
        let k = self.k();
        let v = self.v();
        let n = self.n as f64;
        let raw = Matrix::from_fn(d, d, |i, j| {
            (v[(i, j)] + k * b[i] * b[j] - h[i] * b[j] - b[i] * h[j]) / n
        });
        clamp_psd(raw.symmetrize()?, v.max_abs() / n)
    }
}

/// Drops eigenvalues in `[-1e-10 * scale, 0)`, where `scale` is the size of
/// the accumulated terms; larger negative ones are reported.
fn clamp_psd(m: Matrix, scale: f64) -> Result<Matrix> {
    if m.max_abs() == 0.0 {
        return Ok(m);
    }
    let low = m.lambda_min()?;
    if low >= 0.0 {
        return Ok(m);
    }
    if low < -NEGATIVE_EIGEN_TOLERANCE * scale {
        return Err(Error::Contract(format!("estimate has eigenvalue {low:e}")));
    }
    // Shift by the (negligible) negative part so the result is PSD.
    Ok(&m + &Matrix::identity(m.rows()).scale(-low))
}

pub fn cov_update(state: &CovState, beta: &Vector) -> Result<CovState> {
    let mut next = state.clone();
    next.update(beta)?;
    Ok(next)
}

pub fn cov_finalize(state: &CovState) -> Result<Matrix> {
    state.finalize()
}

/// NBM estimate recomputed from the full stored sequence.
pub fn offline_nbm(betas: &[Vector], schedule: &BlockSchedule) -> Result<Matrix> {
    let n = betas.len();
    if n == 0 {
        return Err(Error::Contract("offline estimate needs at least one iterate".into()));
    }
    let d = betas[0].dim();
    if betas.iter().any(|b| b.dim() != d) {
        return Err(Error::Dimension("iterates have differing dimensions".into()));
    }
    let mean: Vec<f64> = (0..d).map(|j| betas.iter().map(|b| b[j]).sum::<f64>() / n as f64).collect();
    let mut out = Matrix::zeros(d, d);
    let mut m = 1;
    loop {
        let start = schedule.block_start(m) as usize;
        if start > n {
            break;
        }
        let end = (schedule.block_start(m + 1) as usize - 1).min(n);
        let centered: Vec<f64> = (0..d)
            .map(|j| (start..=end).map(|k| betas[k - 1][j] - mean[j]).sum())
            .collect();
        for i in 0..d {
            for j in 0..d {
                out[(i, j)] += centered[i] * centered[j];
            }
        }
        m += 1;
    }
    Ok(out.scale(1.0 / n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randgen::RngStream;

    #[test]
    fn eta_values() {
        let s = BlockSchedule::new(1.0, 1.5).unwrap();
        let got: Vec<u64> = (1..=5).map(|m| eta(m, &s)).collect();
        assert_eq!(got, vec![1, 2, 5, 8, 11]);
        assert_eq!(BlockSchedule::new(1.0, 2.0).unwrap().eta(3), 9);
        let sq = BlockSchedule::squares();
        assert!((1..2000).all(|m| sq.eta(m) == m * m));
    }

    #[test]
    fn schedule_validation() {
        assert!(BlockSchedule::new(0.0, 1.5).is_err());
        assert!(BlockSchedule::new(1.0, 1.0).is_err());
        // c = 0.3, zeta = 1.5: eta = 0, 0, 1, 2, ... repeats
        assert!(BlockSchedule::new(0.3, 1.5).is_err());
        assert!(BlockSchedule::new(2.0, 1.5).is_ok());
        let s = BlockSchedule::new(3.0, 2.0).unwrap();
        assert_eq!(s.block_start(1), 1);
        assert_eq!(s.block_start(2), 12);
        assert_eq!(s.block_of(11), 1);
        assert_eq!(s.block_of(12), 2);
    }

    #[test]
    fn single_observation_is_zero() {
        let mut st = CovState::new(2, BlockSchedule::squares());
        assert!(st.finalize().is_err());
        st.update(&Vector::new(vec![3.0, -1.0]).unwrap()).unwrap();
        assert_eq!(st.finalize().unwrap(), Matrix::zeros(2, 2));
    }

    #[test]
    fn constant_input_is_zero() {
        let c = Vector::new(vec![1.5, -2.0, 0.25]).unwrap();
        let mut st = CovState::new(3, BlockSchedule::three_halves());
        let betas = vec![c.clone(); 300];
        for b in &betas {
            st.update(b).unwrap();
        }
        assert!(st.finalize().unwrap().max_abs() < 1e-10);
        assert!(offline_nbm(&betas, &BlockSchedule::three_halves()).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn tail_only_before_second_block() {
        let s = BlockSchedule::new(1.0, 2.0).unwrap();
        let betas: Vec<Vector> = [1.0, 2.0, 6.0].iter().map(|&v| Vector::new(vec![v]).unwrap()).collect();
        // n = 3 < eta_2 = 4: one partial block whose centered sum is zero
        assert_eq!(offline_nbm(&betas, &s).unwrap()[(0, 0)], 0.0);
        let four: Vec<Vector> = [1.0, 2.0, 3.0, 6.0].iter().map(|&v| Vector::new(vec![v]).unwrap()).collect();
        // mean 3: block {1,2,3} centers to -3, tail {4} to 3
        assert!((offline_nbm(&four, &s).unwrap()[(0, 0)] - 4.5).abs() < 1e-14);
        assert!(offline_nbm(&[], &s).is_err());
    }

    #[test]
    fn accumulators_match_definitions() {
        let schedule = BlockSchedule::three_halves();
        let d = 2;
        let mut rng = RngStream::new(6, 0);
        let mut st = CovState::new(d, schedule);
        let mut betas = Vec::new();
        for n in 1..=200u64 {
            let b = Vector::from_fn(d, |_| rng.standard_normal());
            betas.push(b.clone());
            st.update(&b).unwrap();

            let psi = schedule.block_of(n);
            assert_eq!(st.block_index(), psi);
            assert_eq!(st.tail_len(), n - schedule.block_start(psi) + 1);
            let (mut v, mut k, mut h) = (Matrix::zeros(d, d), 0.0, Vector::zeros(d));
            for m in 1..=psi {
                let start = schedule.block_start(m);
                let end = if m == psi { n } else { schedule.block_start(m + 1) - 1 };
                let mut s = Vector::zeros(d);
                for idx in start..=end {
                    s = &s + &betas[idx as usize - 1];
                }
                let len = (end - start + 1) as f64;
                v = &v + &s.outer(&s);
                k += len * len;
                h = &h + &s.scale(len);
                if m == psi {
                    assert!((&st.tail_sum() - &s).max_abs() < 1e-12);
                }
            }
            assert!((&st.v() - &v).max_abs() < 1e-10 * v.max_abs().max(1.0));
            assert_eq!(st.k(), k);
            assert!((&st.h() - &h).max_abs() < 1e-10 * h.max_abs().max(1.0));
        }
    }

    #[test]
    fn online_matches_offline_on_a_trace() {
        let schedule = BlockSchedule::three_halves();
        let mut rng = RngStream::new(10, 0);
        let mut st = CovState::new(3, schedule);
        let mut betas = Vec::new();
        let mut prev = [0.0; 3];
        for _ in 0..1000 {
            for p in prev.iter_mut() {
                *p = 0.8 * *p + rng.standard_normal();
            }
            let b = Vector::new(prev.to_vec()).unwrap();
            betas.push(b.clone());
            st.update(&b).unwrap();
            let online = st.finalize().unwrap();
            let offline = offline_nbm(&betas, &schedule).unwrap();
            let scale = offline.max_abs().max(1e-300);
            assert!((&online - &offline).max_abs() <= 1e-10 * scale);
        }
        let sigma = st.finalize().unwrap();
        assert!(sigma.is_symmetric(0.0));
        assert!(sigma.lambda_min().unwrap() >= 0.0);
    }

    #[test]
    fn iid_input_recovers_marginal_covariance() {
        let d = 3;
        let mut rng = RngStream::new(21, 0);
        let mut st = CovState::new(d, BlockSchedule::three_halves());
        for _ in 0..100_000 {
            st.update(&Vector::from_fn(d, |_| rng.standard_normal())).unwrap();
        }
        let err = (&st.finalize().unwrap() - &Matrix::identity(d)).operator_norm();
        assert!(err < 0.15, "operator-norm error {err}");
    }

    #[test]
    fn functional_forms() {
        let st = CovState::new(1, BlockSchedule::squares());
        let st = cov_update(&st, &Vector::new(vec![1.0]).unwrap()).unwrap();
        let st = cov_update(&st, &Vector::new(vec![3.0]).unwrap()).unwrap();
        assert_eq!(st.count(), 2);
        let betas = [Vector::new(vec![1.0]).unwrap(), Vector::new(vec![3.0]).unwrap()];
        assert_eq!(cov_finalize(&st).unwrap(), offline_nbm(&betas, &BlockSchedule::squares()).unwrap());
        assert!(cov_update(&st, &Vector::zeros(2)).is_err());
    }
}
