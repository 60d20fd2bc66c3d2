//! Closed-form leakage bounds, Markov and Chernoff minima, and nested
//! commutators with their norm bounds.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::combinatorics::{ln_f_poly, PolyKind};
use crate::error::{Error, Result};
use crate::pauli::{commutator, OperatorSum};

pub use crate::combinatorics::{
    f_poly, f_poly_coefficients, f_poly_recurrence, stirling, stirling_table, StirlingKind,
};

/// Largest order accepted by [`nested_commutator`].
pub const NESTED_MAX_ORDER: usize = 6;
/// Largest number of sites accepted by [`nested_commutator`].
pub const NESTED_MAX_SITES: usize = 8;
/// Default ceiling on intermediate term counts.
pub const NESTED_TERM_CAP: usize = 1 << 16;

/// Energy quantum `2 q M`.
pub fn delta_q(q: f64, m_bound: f64) -> f64 {
    2.0 * q * m_bound
}

/// Inputs of a leakage bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum BoundSpec {
    /// Extensive form with per-site variation `lambda` and window `d`.
    Density { lambda: f64, delta: f64, d: f64, n: usize },
    /// General scaling with total variation `Lambda` and window `D`.
    General {
        #[serde(rename = "Lambda")]
        big_lambda: f64,
        #[serde(rename = "Delta")]
        delta: f64,
        #[serde(rename = "D")]
        big_d: f64,
    },
}

impl BoundSpec {
    pub fn density(lambda: f64, delta: f64, d: f64, n: usize) -> Self {
        Self::Density { lambda, delta, d, n }
    }

    pub fn general(big_lambda: f64, delta: f64, big_d: f64) -> Self {
        Self::General {
            big_lambda,
            delta,
            big_d,
        }
    }

    /// `(Lambda, Delta, D)` in absolute energy units.
    fn absolute(&self) -> (f64, f64, f64) {
        match *self {
            Self::Density { lambda, delta, d, n } => (lambda * n as f64, delta, d * n as f64),
            Self::General {
                big_lambda,
                delta,
                big_d,
            } => (big_lambda, delta, big_d),
        }
    }

    fn validate(&self) -> Result<()> {
        let (l, delta, d) = self.absolute();
        if let Self::Density { n, .. } = *self {
            if n == 0 {
                return Err(Error::Parameter("n must be at least 1".into()));
            }
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Parameter(format!("Delta must be positive, got {delta}")));
        }
        if !(l >= 0.0) || !l.is_finite() {
            return Err(Error::Parameter(format!("variation must be >= 0, got {l}")));
        }
        if !(d >= 0.0) || !d.is_finite() {
            return Err(Error::Parameter(format!("window must be >= 0, got {d}")));
        }
        Ok(())
    }
}

/// A bound value held both directly and as its natural logarithm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogValue {
    pub value: f64,
    pub ln: f64,
}

impl LogValue {
    fn from_ln(ln: f64) -> Self {
        let ln = ln.min(0.0);
        Self { value: ln.exp(), ln }
    }

    fn one() -> Self {
        Self { value: 1.0, ln: 0.0 }
    }
}

/// Evaluated leakage bounds with the inputs that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub spec: BoundSpec,
    /// True when the window does not exceed the variation; every bound is 1.
    pub trivial: bool,
    /// Moment order used by the Gamma-ratio bound.
    pub k_d: Option<u64>,
    pub epsilon1_finite: Option<LogValue>,
    pub epsilon1_asymptotic: Option<LogValue>,
    pub epsilon2: Option<LogValue>,
    pub xi1: LogValue,
    pub xi2: LogValue,
}

/// Natural logs of the Gamma-ratio and Poisson-type bounds for
/// `x = Lambda / Delta`, `y = D / Delta` with `y > x`.
fn ln_xi(x: f64, y: f64) -> (u64, f64, f64, f64) {
    let k = (y - x).ceil().max(1.0);
    if x == 0.0 {
        return (k as u64, f64::NEG_INFINITY, -y, f64::NEG_INFINITY);
    }
    let ln_ratio = (y / x).ln();
    let xi1 = -k * y.ln() + ln_gamma(x + k) - ln_gamma(x);
    let asym = -(y - x - x * ln_ratio);
    let xi2 = y - x - y * ln_ratio;
    (k as u64, xi1, asym, xi2)
}

/// Evaluates every bound that applies to `spec`.
pub fn leakage_bound(spec: BoundSpec) -> Result<BoundReport> {
    spec.validate()?;
    let (l, delta, d) = spec.absolute();
    let density = matches!(spec, BoundSpec::Density { .. });
    if d <= l {
        let one = density.then_some(LogValue::one());
        return Ok(BoundReport {
            spec,
            trivial: true,
            k_d: None,
            epsilon1_finite: one,
            epsilon1_asymptotic: one,
            epsilon2: one,
            xi1: LogValue::one(),
            xi2: LogValue::one(),
        });
    }
    let (k, xi1, asym, xi2) = ln_xi(l / delta, d / delta);
    let xi1 = LogValue::from_ln(xi1);
    let xi2 = LogValue::from_ln(xi2);
    Ok(BoundReport {
        spec,
        trivial: false,
        k_d: Some(k),
        epsilon1_finite: density.then_some(xi1),
        epsilon1_asymptotic: density.then_some(LogValue::from_ln(asym)),
        epsilon2: density.then_some(xi2),
        xi1,
        xi2,
    })
}

/// Convenience wrapper returning the bound used for a given polynomial
/// kind: the Gamma-ratio form for the first kind and the Poisson form for
/// the second.
pub fn leakage_value(kind: PolyKind, lambda_total: f64, delta: f64, window: f64) -> Result<f64> {
    let r = leakage_bound(BoundSpec::general(lambda_total, delta, window))?;
    Ok(match kind {
        PolyKind::First => r.xi1.value,
        PolyKind::Second => r.xi2.value,
    })
}

/// Minimum over `k` of the moment bound `f_k(x) / y^k` for `k = 1..=k_max`.
pub fn best_moment_bound(kind: PolyKind, x: f64, y: f64, k_max: usize) -> Result<(usize, f64)> {
    if !(y > 0.0) {
        return Err(Error::Parameter("window must be positive".into()));
    }
    if k_max == 0 {
        return Err(Error::Empty("no moment orders requested".into()));
    }
    let mut best = (1, f64::INFINITY);
    for k in 1..=k_max {
        let v = ln_f_poly(kind, k, x)? - k as f64 * y.ln();
        if v < best.1 {
            best = (k, v);
        }
    }
    Ok((best.0, best.1.exp()))
}

/// Result of minimizing a Markov bound over moment orders.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovMin {
    pub k_star: usize,
    pub bound: f64,
}

/// `min_k sqrt(G_{2k}) / D^k` over the supplied moments.
///
/// `moments[i]` holds `G_{2k}` for `k = i + 1`. Ties keep the smallest `k`.
pub fn markov_min_k(moments: &[f64], window: f64) -> Result<MarkovMin> {
    if moments.is_empty() {
        return Err(Error::Empty("no moments supplied".into()));
    }
    if !(window > 0.0) {
        return Err(Error::Parameter(format!("window must be positive, got {window}")));
    }
    let mut best = MarkovMin {
        k_star: 1,
        bound: f64::INFINITY,
    };
    for (i, &g) in moments.iter().enumerate() {
        if !(g >= 0.0) {
            return Err(Error::Parameter(format!("moment {} is negative", i + 1)));
        }
        let k = i + 1;
        let ln = 0.5 * g.ln() - k as f64 * window.ln();
        let b = ln.exp();
        if b < best.bound {
            best = MarkovMin { k_star: k, bound: b };
        }
    }
    Ok(best)
}

/// `inf_{τ >= 0} exp(x (e^τ - 1) - y τ)` in closed form.
pub fn chernoff_poisson(x: f64, y: f64) -> f64 {
    if y <= x {
        return 1.0;
    }
    if x <= 0.0 {
        return 0.0;
    }
    (y - x - y * (y / x).ln()).exp()
}

/// Growth regime of nested commutators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum Regime {
    /// `H + V` is strictly `k`-local.
    Strict { k: f64 },
    /// `H` has mutually commuting terms and `V` is `q`-local.
    CommutingCore { q: f64 },
    /// `H` has mutually commuting terms and `V` is quasi-local with scale `q_star`.
    QuasiLocal { q_star: f64 },
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Strict { .. } => "strict",
            Regime::CommutingCore { .. } => "commuting",
            Regime::QuasiLocal { .. } => "quasi-local",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::Strict { k } => write!(f, "strict:{k}"),
            Regime::CommutingCore { q } => write!(f, "commuting:{q}"),
            Regime::QuasiLocal { q_star } => write!(f, "quasi-local:{q_star}"),
        }
    }
}

impl FromStr for Regime {
    type Err = Error;

    /// Parses `name:value`, e.g. `strict:2` or `quasi-local:1.5`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, value) = s
            .split_once(':')
            .ok_or_else(|| Error::Parameter(format!("regime '{s}' lacks ':<locality>'")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Parameter(format!("bad locality in '{s}'")))?;
        match name.trim() {
            "strict" => Ok(Regime::Strict { k: v }),
            "commuting" => Ok(Regime::CommutingCore { q: v }),
            "quasi-local" | "quasi_local" => Ok(Regime::QuasiLocal { q_star: v }),
            other => Err(Error::Parameter(format!("unknown regime '{other}'"))),
        }
    }
}

/// Upper bound on `‖ad_H^m(V)‖` given `M` and the matching norm of `V`.
///
/// `v_norm` is `‖V‖_X` for the strict and commuting regimes and
/// `‖V‖_{q*-X}` for the quasi-local one.
pub fn nested_commutator_bound(regime: Regime, m: usize, m_bound: f64, v_norm: f64) -> Result<f64> {
    if !(m_bound >= 0.0) || !(v_norm >= 0.0) {
        return Err(Error::Parameter("M and the norm of V must be non-negative".into()));
    }
    let (q, factorial) = match regime {
        Regime::Strict { k } => (k, true),
        Regime::CommutingCore { q } => (q, false),
        Regime::QuasiLocal { q_star } => (q_star, true),
    };
    if !(q > 0.0) {
        return Err(Error::Parameter(format!("locality must be positive in {regime}")));
    }
    let delta = delta_q(q, m_bound);
    let fact: f64 = if factorial {
        (1..=m).map(|j| j as f64).product()
    } else {
        1.0
    };
    Ok(fact * delta.powi(m as i32) * v_norm)
}

/// `ad_H^m(V)` computed exactly in the Pauli algebra.
pub fn nested_commutator(h: &OperatorSum, v: &OperatorSum, m: usize) -> Result<OperatorSum> {
    nested_commutator_capped(h, v, m, NESTED_TERM_CAP)
}

pub fn nested_commutator_capped(h: &OperatorSum, v: &OperatorSum, m: usize, term_cap: usize) -> Result<OperatorSum> {
    if m > NESTED_MAX_ORDER {
        return Err(Error::Resource(format!("order {m} exceeds {NESTED_MAX_ORDER}")));
    }
    if h.n_sites() > NESTED_MAX_SITES {
        return Err(Error::Resource(format!(
            "{} sites exceeds {NESTED_MAX_SITES}",
            h.n_sites()
        )));
    }
    let mut cur = v.clone();
    for _ in 0..m {
        if h.len().saturating_mul(cur.len()) > term_cap.saturating_mul(64) {
            return Err(Error::TermExplosion { limit: term_cap });
        }
        cur = commutator(h, &cur)?;
        if cur.len() > term_cap {
            return Err(Error::TermExplosion { limit: term_cap });
        }
        if cur.is_empty() {
            break;
        }
    }
    Ok(cur)
}
