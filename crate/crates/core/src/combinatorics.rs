//! Stirling numbers and the moment polynomials built from them.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `n` accepted by the exact Stirling tables.
pub const STIRLING_MAX: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StirlingKind {
    /// Unsigned numbers of the first kind: permutations by cycle count.
    FirstUnsigned,
    /// Numbers of the second kind: set partitions by block count.
    Second,
}

/// Which moment polynomial to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolyKind {
    /// Rising factorial `x (x+1) ... (x+k-1)`.
    First = 1,
    /// Touchard polynomial, the `k`-th moment of a Poisson variable.
    Second = 2,
}

impl PolyKind {
    pub fn from_number(k: u8) -> Result<Self> {
        match k {
            1 => Ok(Self::First),
            2 => Ok(Self::Second),
            _ => Err(Error::Parameter(format!("polynomial kind must be 1 or 2, got {k}"))),
        }
    }

    fn stirling(self) -> StirlingKind {
        match self {
            Self::First => StirlingKind::FirstUnsigned,
            Self::Second => StirlingKind::Second,
        }
    }
}

/// Full triangle `T[n][k]` for `0 <= k <= n <= n_max`.
pub fn stirling_table(kind: StirlingKind, n_max: usize) -> Result<Vec<Vec<BigUint>>> {
    if n_max > STIRLING_MAX {
        return Err(Error::Range(format!("n = {n_max} exceeds {STIRLING_MAX}")));
    }
    let mut t: Vec<Vec<BigUint>> = Vec::with_capacity(n_max + 1);
    t.push(vec![BigUint::one()]);
    for n in 1..=n_max {
        let prev = &t[n - 1];
        let mut row = vec![BigUint::zero(); n + 1];
        for k in 1..=n {
            let left = &prev[k - 1];
            let stay = if k < n { prev[k].clone() } else { BigUint::zero() };
            let factor = match kind {
                StirlingKind::FirstUnsigned => BigUint::from(n - 1),
                StirlingKind::Second => BigUint::from(k),
            };
            row[k] = left + factor * stay;
        }
        t.push(row);
    }
    Ok(t)
}

/// Single Stirling number.
pub fn stirling(kind: StirlingKind, n: usize, k: usize) -> Result<BigUint> {
    if k > n {
        return Err(Error::Range(format!("k = {k} exceeds n = {n}")));
    }
    Ok(stirling_table(kind, n)?[n][k].clone())
}

/// Integer coefficients of the closed-form polynomial, lowest degree first.
pub fn f_poly_coefficients(kind: PolyKind, k: usize) -> Result<Vec<BigUint>> {
    Ok(stirling_table(kind.stirling(), k)?.swap_remove(k))
}

/// Coefficients obtained by iterating the integral recurrence
/// `f_k(x) = ∫_0^x Σ_{m=1}^k C(k,m) w_m f_{k-m}(s) ds`,
/// with `w_m = (m-1)!` for the first kind and `w_m = 1` for the second.
pub fn f_poly_recurrence(kind: PolyKind, k_max: usize) -> Vec<Vec<BigRational>> {
    let int = |v: u64| BigRational::from_integer(BigInt::from(v));
    let mut polys: Vec<Vec<BigRational>> = vec![vec![int(1)]];
    for k in 1..=k_max {
        let mut integrand = vec![BigRational::zero(); k];
        let mut binom = BigInt::one();
        let mut fact = BigInt::one();
        for m in 1..=k {
            binom = binom * BigInt::from(k - m + 1) / BigInt::from(m);
            if m > 1 {
                fact *= BigInt::from(m - 1);
            }
            let w = match kind {
                PolyKind::First => &binom * &fact,
                PolyKind::Second => binom.clone(),
            };
            let w = BigRational::from_integer(w);
            for (j, c) in polys[k - m].iter().enumerate() {
                integrand[j] += &w * c;
            }
        }
        let mut f = vec![BigRational::zero(); k + 1];
        for (j, c) in integrand.into_iter().enumerate() {
            f[j + 1] = c / int(j as u64 + 1);
        }
        polys.push(f);
    }
    polys
}

/// Evaluates `f_k^{(kind)}(x)` in floating point.
pub fn f_poly(kind: PolyKind, k: usize, x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("f_poly needs finite x >= 0, got {x}")));
    }
    match kind {
        PolyKind::First => Ok((0..k).map(|j| x + j as f64).product()),
        PolyKind::Second => {
            let coeffs = f_poly_coefficients(kind, k)?;
            Ok(horner(&coeffs, x))
        }
    }
}

/// Natural logarithm of `f_k(x)`, robust for large `k` or `x`.
pub fn ln_f_poly(kind: PolyKind, k: usize, x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("f_poly needs finite x >= 0, got {x}")));
    }
    if k == 0 {
        return Ok(0.0);
    }
    if x == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    match kind {
        PolyKind::First => Ok((0..k).map(|j| (x + j as f64).ln()).sum()),
        PolyKind::Second => {
            let coeffs = f_poly_coefficients(kind, k)?;
            let terms: Vec<f64> = coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(j, c)| ln_big(c) + j as f64 * x.ln())
                .collect();
            Ok(log_sum_exp(&terms))
        }
    }
}

fn horner(coeffs: &[BigUint], x: f64) -> f64 {
    coeffs
        .iter()
        .rev()
        .fold(0.0, |acc, c| acc * x + c.to_f64().unwrap_or(f64::INFINITY))
}

pub(crate) fn ln_big(v: &BigUint) -> f64 {
    let bits = v.bits();
    if bits < 1000 {
        return v.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 60;
    let top = (v >> shift).to_f64().unwrap_or(1.0);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
