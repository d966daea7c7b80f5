//! Quantile functions, the three online confidence constructions and
//! coverage tallying.

use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

const UNIT_NORM_TOLERANCE: f64 = 1e-10;

fn check_open_unit(u: f64) -> Result<()> {
    if u > 0.0 && u < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("probability must lie in (0, 1), got {u}")))
    }
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile `Phi^{-1}(u)`.
pub fn inv_norm_cdf(u: f64) -> Result<f64> {
    check_open_unit(u)?;
    Ok(ppnd16(u))
}

/// Wichura's AS 241 (PPND16). Relative accuracy about 1e-16 over (0, 1).
/// Callers guarantee `0 < u < 1`.
pub(crate) fn ppnd16(u: f64) -> f64 {
    let q = u - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2509.0809287301226727 * r + 33430.575583588128105) * r
            + 67265.770927008700853)
            * r
            + 45921.953931549871457)
            * r
            + 13731.693765509461125)
            * r
            + 1971.5909503065514427)
            * r
            + 133.14166789178437745)
            * r
            + 3.387132872796366608;
        let den = ((((((5226.495278852545925 * r + 28729.085735721942674) * r
            + 39307.89580009271061)
            * r
            + 21213.794301586595867)
            * r
            + 5394.1960214247511077)
            * r
            + 687.1870074920579083)
            * r
            + 42.313330701600911252)
            * r
            + 1.0;
        return q * num / den;
    }
    let tail = if q < 0.0 { u } else { 1.0 - u };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r
            + 0.24178072517745061177)
            * r
            + 1.27045825245236838258)
            * r
            + 3.64784832476320460504)
            * r
            + 5.7694972214606914055)
            * r
            + 4.6303378461565452959)
            * r
            + 1.42343711074968357734;
        let den = ((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r
            + 0.0151986665636164571966)
            * r
            + 0.14810397642748007459)
            * r
            + 0.68976733498510000455)
            * r
            + 1.6763848301838038494)
            * r
            + 2.05319162663775882187)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
            + 0.0012426609473880784386)
            * r
            + 0.026532189526576123093)
            * r
            + 0.29656057182850489123)
            * r
            + 1.7848265399172913358)
            * r
            + 5.4637849111641143699)
            * r
            + 6.6579046435011037772;
        let den = ((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r
            + 1.8463183175100546818e-5)
            * r
            + 7.868691311456132591e-4)
            * r
            + 0.0148753612908506148525)
            * r
            + 0.13692988092273580531)
            * r
            + 0.59983220655588793769)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// CDF of the chi-square distribution with `dof` degrees of freedom.
pub fn chi2_cdf(dof: usize, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        gamma_lr(dof as f64 / 2.0, x / 2.0)
    }
}

fn chi2_log_pdf(dof: usize, x: f64) -> f64 {
    let a = dof as f64 / 2.0;
    (a - 1.0) * x.ln() - x / 2.0 - a * std::f64::consts::LN_2 - ln_gamma(a)
}

/// Chi-square quantile: Wilson-Hilferty starting point, then safeguarded
/// Newton iterations on the regularized lower incomplete gamma function.
pub fn chi2_quantile(dof: usize, u: f64) -> Result<f64> {
    if dof == 0 {
        return Err(Error::Parameter("chi-square needs at least one degree of freedom".into()));
    }
    check_open_unit(u)?;
    let k = dof as f64;
    let z = ppnd16(u);
    let h = 2.0 / (9.0 * k);
    let mut x = k * (1.0 - h + z * h.sqrt()).powi(3);
    if !(x > 0.0) {
        x = k * 1e-3;
    }
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for _ in 0..200 {
        let f = chi2_cdf(dof, x) - u;
        if f > 0.0 {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        let step = f / chi2_log_pdf(dof, x).exp();
        let mut next = x - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * x.max(lo) };
        }
        if (next - x).abs() <= 1e-15 * x.abs() {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Which chi-square percentile bounds the joint region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JointThreshold {
    /// The `1 - omega/2` percentile, as printed in the original construction.
    #[default]
    HalfOmega,
    /// The conventional `1 - omega` percentile.
    Conventional,
}

impl JointThreshold {
    pub fn quantile(self, dof: usize, omega: f64) -> Result<f64> {
        match self {
            JointThreshold::HalfOmega => chi2_quantile(dof, 1.0 - omega / 2.0),
            JointThreshold::Conventional => chi2_quantile(dof, 1.0 - omega),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    /// Nominal level `1 - omega`.
    pub level: f64,
}

impl ConfidenceInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
}

fn symmetric_interval(center: f64, variance: f64, n: u64, omega: f64) -> Result<ConfidenceInterval> {
    if n == 0 {
        return Err(Error::Contract("confidence interval needs n >= 1".into()));
    }
    if !(variance >= 0.0) {
        return Err(Error::Contract(format!("negative variance estimate {variance}")));
    }
    check_open_unit(omega)?;
    let z = ppnd16(1.0 - omega / 2.0);
    let half = z * (variance / n as f64).sqrt();
    Ok(ConfidenceInterval { lower: center - half, upper: center + half, level: 1.0 - omega })
}

/// `mean_j +- z_{1-omega/2} sqrt(sigma_jj / n)`.
pub fn ci_coordinate(mean_j: f64, sigma_jj: f64, n: u64, omega: f64) -> Result<ConfidenceInterval> {
    symmetric_interval(mean_j, sigma_jj, n, omega)
}

/// Interval for the projection `v^T beta` along a unit direction `v`.
pub fn ci_projection(
    mean: &Vector,
    sigma: &Matrix,
    n: u64,
    omega: f64,
    v: &Vector,
) -> Result<ConfidenceInterval> {
    if (v.norm() - 1.0).abs() > UNIT_NORM_TOLERANCE {
        return Err(Error::Parameter(format!("direction must have unit norm, got {}", v.norm())));
    }
    if mean.dim() != v.dim() || sigma.rows() != v.dim() || sigma.cols() != v.dim() {
        return Err(Error::Dimension("projection direction does not match the estimate".into()));
    }
    let var = sigma.quadratic_form(v)?;
    symmetric_interval(v.dot(mean), var, n, omega)
}

/// Ellipsoidal confidence region `{b : n (center - b)^T scale^{-1} (center - b) <= threshold}`.
#[derive(Debug, Clone)]
pub struct JointRegion {
    pub center: Vector,
    pub scale: Matrix,
    pub n: u64,
    pub threshold: f64,
}

impl JointRegion {
    pub fn new(
        center: Vector,
        scale: Matrix,
        n: u64,
        omega: f64,
        rule: JointThreshold,
    ) -> Result<Self> {
        if scale.rows() != center.dim() || scale.cols() != center.dim() {
            return Err(Error::Dimension("scale matrix does not match the center".into()));
        }
        if n == 0 {
            return Err(Error::Contract("joint region needs n >= 1".into()));
        }
        check_open_unit(omega)?;
        let threshold = rule.quantile(center.dim(), omega)?;
        Ok(Self { center, scale, n, threshold })
    }

    /// Returns whether `beta` lies in the region, with the Mahalanobis statistic.
    pub fn contains(&self, beta: &Vector) -> Result<(bool, f64)> {
        if beta.dim() != self.center.dim() {
            return Err(Error::Dimension("point does not match the region dimension".into()));
        }
        let diff = &self.center - beta;
        let w = self.scale.solve(&diff)?;
        let statistic = self.n as f64 * diff.dot(&w);
        Ok((statistic <= self.threshold, statistic))
    }
}

/// Free-function form of [`JointRegion::contains`].
pub fn joint_region_contains(region: &JointRegion, beta: &Vector) -> Result<(bool, f64)> {
    region.contains(beta)
}

/// Empirical coverage rate and its binomial standard error.
pub fn coverage_tally(indicators: &[bool]) -> Result<(f64, f64)> {
    if indicators.is_empty() {
        return Err(Error::Contract("coverage needs at least one indicator".into()));
    }
    let r = indicators.len() as f64;
    let rate = indicators.iter().filter(|&&b| b).count() as f64 / r;
    Ok((rate, (rate * (1.0 - rate) / r).sqrt()))
}
