//! Drivers that run a model family end to end and log every bound they test.
//!
//! Each driver takes a plain config struct (all fields defaulted, so partial
//! configs deserialize) and returns a [`RunRecord`] holding the config echo,
//! sampled observables as tables, and every inequality with both sides.

mod commutators;
mod landscape;
mod record;
mod spectral;

pub use commutators::{commutator_sweep, CommutatorConfig};
pub use landscape::{
    build_landscape, dynamical_localization, eigenstate_localization, freezing, gibbs_bottleneck, mis_symmetry,
    DynamicalConfig, EigenlocConfig, FreezingConfig, GibbsConfig, Landscape, LandscapeSpec, MisConfig,
};
pub use record::{format_number, InequalityCheck, RunRecord, Table, CHECK_SLACK};
pub use spectral::{
    case3, fig1, moment_inequality, static_reduction, Case3Config, Fig1Config, MomentConfig, StaticConfig,
};

use crate::combinatorics::{ln_f_poly, PolyKind};
use crate::error::Result;

/// `count` equally spaced times in `(0, t_final]`.
pub(crate) fn sample_times(t_final: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|i| t_final * i as f64 / count as f64).collect()
}

/// `Δ^k f_k(variation / Δ)`, the moment bound for `g_k`.
pub fn moment_bound(kind: PolyKind, k: usize, variation: f64, delta: f64) -> Result<f64> {
    if variation <= 0.0 {
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    Ok((k as f64 * delta.ln() + ln_f_poly(kind, k, variation / delta)?).exp())
}
