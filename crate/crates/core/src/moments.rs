//! Exact expectations of products with a Bernoulli dropout matrix `D`.
//!
//! The closed forms below are computed from matrix products and the
//! `Diag` / off-diagonal / p-rescale calculus only; [`enumerate_expectation`]
//! sums over all `2^d` masks and serves as the brute-force cross-check.

use crate::error::{check_probability, Error, Result};
use crate::linalg::Matrix;
use crate::randgen::DropoutMask;

/// Largest dimension accepted by the exhaustive enumeration.
pub const MAX_ENUMERATION_DIM: usize = 20;

/// Which product of dropout matrices an expectation is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentOrder {
    /// `E[D A D]`
    Dad,
    /// `E[D A D B D]`
    Dadbd,
    /// `E[D A D B D C D]`
    Dadbdcd,
}

fn check_square_family(ms: &[&Matrix]) -> Result<usize> {
    let d = ms[0].rows();
    if ms.iter().any(|m| m.rows() != d || m.cols() != d) {
        return Err(Error::Dimension("dropout moments need square matrices of one size".into()));
    }
    Ok(d)
}

/// `E[DAD] = p A_p`.
pub fn e_dad(a: &Matrix, p: f64) -> Result<Matrix> {
    check_square_family(&[a])?;
    check_probability(p)?;
    Ok(a.p_rescale(p)?.scale(p))
}

/// `E[DADBD] = p A_p B_p + p^2 (1-p) Diag(Abar B)`.
pub fn e_dadbd(a: &Matrix, b: &Matrix, p: f64) -> Result<Matrix> {
    check_square_family(&[a, b])?;
    check_probability(p)?;
    let ap = a.p_rescale(p)?;
    let bp = b.p_rescale(p)?;
    let corr = (&a.off_diag()? * b).diag_part()?;
    Ok(&(p * &(&ap * &bp)) + &(p * p * (1.0 - p) * &corr))
}

/// `E[DADBDCD] = p A_p B_p C_p + p^2 (1-p) [Diag(Abar B_p Cbar) + A_p Diag(Bbar C)
///   + Diag(A Bbar) C_p + (1-p) A (.) Bbar^T (.) C]`.
pub fn e_dadbdcd(a: &Matrix, b: &Matrix, c: &Matrix, p: f64) -> Result<Matrix> {
    check_square_family(&[a, b, c])?;
    check_probability(p)?;
    let (ap, bp, cp) = (a.p_rescale(p)?, b.p_rescale(p)?, c.p_rescale(p)?);
    let (abar, bbar, cbar) = (a.off_diag()?, b.off_diag()?, c.off_diag()?);
    let main = &(&ap * &bp) * &cp;
    let t1 = (&(&abar * &bp) * &cbar).diag_part()?;
    let t2 = &ap * &(&bbar * c).diag_part()?;
    let t3 = &(a * &bbar).diag_part()? * &cp;
    let t4 = a.hadamard(&bbar.transpose())?.hadamard(c)?.scale(1.0 - p);
    let bracket = &(&(&t1 + &t2) + &t3) + &t4;
    Ok(&(p * &main) + &(p * p * (1.0 - p) * &bracket))
}

/// Dispatches on [`MomentOrder`]; `factors` must hold 1, 2 or 3 matrices.
pub fn dropout_moment(order: MomentOrder, factors: &[&Matrix], p: f64) -> Result<Matrix> {
    match (order, factors) {
        (MomentOrder::Dad, [a]) => e_dad(a, p),
        (MomentOrder::Dadbd, [a, b]) => e_dadbd(a, b, p),
        (MomentOrder::Dadbdcd, [a, b, c]) => e_dadbdcd(a, b, c, p),
        _ => Err(Error::Contract(format!("{order:?} got {} factors", factors.len()))),
    }
}

/// Exact expectation of `f(D)` by summing over every one of the `2^d` masks,
/// each weighted by `p^#retained (1-p)^#dropped`.
pub fn enumerate_expectation<F>(mut f: F, d: usize, p: f64) -> Result<Matrix>
where
    F: FnMut(&DropoutMask) -> Matrix,
{
    check_probability(p)?;
    if d == 0 {
        return Err(Error::Dimension("mask dimension must be positive".into()));
    }
    if d > MAX_ENUMERATION_DIM {
        return Err(Error::Resource(format!(
            "enumeration over 2^{d} masks exceeds the 2^{MAX_ENUMERATION_DIM} cap"
        )));
    }
    let mut total: Option<Matrix> = None;
    for bits in 0u32..(1u32 << d) {
        let retained: Vec<bool> = (0..d).map(|i| bits >> i & 1 == 1).collect();
        let k = bits.count_ones() as i32;
        let weight = p.powi(k) * (1.0 - p).powi(d as i32 - k);
        if weight == 0.0 {
            continue;
        }
        let mask = DropoutMask::new(retained, p)?;
        let term = f(&mask).scale(weight);
        total = Some(match total {
            None => term,
            Some(acc) => &acc + &term,
        });
    }
    Ok(total.expect("p > 0 gives the all-retained mask positive weight"))
}
