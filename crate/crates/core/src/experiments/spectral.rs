//! Experiments on the instantaneous spectrum of a driven system: the
//! energy-space spreading picture, the moment inequality in both its general
//! and commuting-core forms, and the static reduction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::record::{InequalityCheck, RunRecord, Table};
use super::{moment_bound, sample_times};
use crate::bounds::{delta_q, leakage_value};
use crate::clusters::parse_bitstring;
use crate::combinatorics::PolyKind;
use crate::dynamics::{
    central_moments, evolve, expand_in_basis, leakage_profile, spectral_decompose, EvolveOptions, ProfileBound,
    ProfileConfig, StateVector, Trajectory,
};
use crate::error::{Error, Result};
use crate::models::{
    commuting_core_model, random_two_local_schedule, transverse_field, CoreKind, StrengthProfile, TransverseRamp,
};
use crate::schedule::{NormKind, Schedule};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Fig1Config {
    pub n: usize,
    pub seed: u64,
    pub profile: StrengthProfile,
    pub samples: usize,
    /// Width of the energy bins of the heat map and the tail profile.
    pub bin_width: f64,
    /// The heat map covers `[E0 - half_range, E0 + half_range]`.
    /// Energy resolution of the heat map table.
    pub heat_bin_width: f64,
    pub half_range: f64,
    /// Weight allowed outside `[E0 - Λ(t), E0 + Λ(t)]`.
    pub outside_tolerance: f64,
    /// Minimum number of decreasing tail bins beyond `Λ(t)`.
    pub min_tail_bins: usize,
    /// Tail bins at or below this weight end the monotone run.
    pub weight_floor: f64,
    pub evolve_tolerance: f64,
    /// Index of the initial eigenstate of `H(0)`; the middle of the spectrum by default.
    pub initial_index: Option<usize>,
}

impl Default for Fig1Config {
    fn default() -> Self {
        Self {
            n: 8,
            seed: 1,
            profile: StrengthProfile {
                m_bound: 1.0,
                lambda_total: 0.01,
                segments: 4,
                duration: 4.0,
            },
            samples: 12,
            bin_width: 0.1,
            heat_bin_width: 0.025,
            half_range: 1.0,
            outside_tolerance: 0.05,
            min_tail_bins: 4,
            weight_floor: 1e-24,
            evolve_tolerance: 1e-9,
            initial_index: None,
        }
    }
}

fn evolve_opts(tolerance: f64) -> EvolveOptions {
    EvolveOptions {
        tolerance,
        ..EvolveOptions::default()
    }
}

/// Random 2-local drive started in a mid-spectrum eigenstate; records the
/// spectral weight around `E0` in the instantaneous eigenbasis.
pub fn fig1(cfg: &Fig1Config) -> Result<RunRecord> {
    if cfg.samples == 0 || !(cfg.bin_width > 0.0) || !(cfg.heat_bin_width > 0.0) || !(cfg.half_range > 0.0) {
        return Err(Error::Parameter(
            "fig1 needs samples > 0 and positive bin width and range".into(),
        ));
    }
    let mut rec = RunRecord::new("fig1", cfg.seed, cfg)?;
    let s = random_two_local_schedule(cfg.n, cfg.seed, &cfg.profile)?;
    let dec0 = spectral_decompose(&s.evaluate(0.0)?)?;
    let dim = dec0.energies.len();
    let idx = cfg.initial_index.unwrap_or(dim / 2);
    if idx >= dim {
        return Err(Error::Range(format!("initial index {idx} outside dimension {dim}")));
    }
    let psi0 = StateVector::eigenvector(&dec0, idx)?;
    let e0 = dec0.energies[idx];
    rec.scalar("e0", e0);
    rec.scalar("spectral_width", dec0.energies[dim - 1] - dec0.energies[0]);
    rec.scalar(
        "variation_total",
        s.total_variation(NormKind::X, 0.0, s.final_time())?.value,
    );

    let times = sample_times(s.final_time(), cfg.samples);
    let traj = evolve(&s, &psi0, &times, &evolve_opts(cfg.evolve_tolerance))?;
    rec.scalar("achieved_tolerance", traj.achieved_tolerance);

    let n_signed = (2.0 * cfg.half_range / cfg.heat_bin_width).ceil() as usize;
    struct Slice {
        t: f64,
        big_lambda: f64,
        mean: f64,
        outside: f64,
        signed: Vec<f64>,
        tail: Vec<f64>,
    }
    let slices = traj
        .samples
        .par_iter()
        .map(|(t, psi)| -> Result<Slice> {
            let dec = spectral_decompose(&s.evaluate(*t)?)?;
            let w: Vec<f64> = expand_in_basis(psi, &dec)?.iter().map(|a| a.norm_sqr()).collect();
            let big_lambda = s.total_variation(NormKind::X, 0.0, *t)?.value;
            let mut signed = vec![0.0; n_signed];
            let n_tail = ((cfg.half_range - big_lambda).max(0.0) / cfg.bin_width).ceil() as usize;
            let mut tail = vec![0.0; n_tail];
            let mut outside = 0.0;
            let mut mean = 0.0;
            for (e, &p) in dec.energies.iter().zip(&w) {
                let diff = e - e0;
                mean += e * p;
                let si = ((diff + cfg.half_range) / cfg.heat_bin_width).floor();
                if si >= 0.0 && (si as usize) < n_signed {
                    signed[si as usize] += p;
                }
                if diff.abs() > big_lambda {
                    outside += p;
                }
                if diff.abs() >= big_lambda {
                    let ti = ((diff.abs() - big_lambda) / cfg.bin_width).floor() as usize;
                    if ti < n_tail {
                        tail[ti] += p;
                    }
                }
            }
            Ok(Slice {
                t: *t,
                big_lambda,
                mean,
                outside,
                signed,
                tail,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut heat = Table::new("heatmap", &["time", "variation", "energy_left", "weight"]);
    let mut tail_t = Table::new("tail", &["time", "distance_left", "weight"]);
    let mut summary = Table::new(
        "samples",
        &[
            "time",
            "variation",
            "mean_energy",
            "outside_weight",
            "tail_run",
            "worst_tail_ratio",
        ],
    );
    for sl in &slices {
        for (i, &p) in sl.signed.iter().enumerate() {
            heat.push(vec![
                sl.t,
                sl.big_lambda,
                -cfg.half_range + i as f64 * cfg.heat_bin_width,
                p,
            ]);
        }
        for (i, &p) in sl.tail.iter().enumerate() {
            tail_t.push(vec![sl.t, sl.big_lambda + i as f64 * cfg.bin_width, p]);
        }
        let run = sl.tail.iter().take_while(|&&p| p > cfg.weight_floor).count();
        let worst = sl.tail[..run].windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
        let ctx = format!("t={}", sl.t);
        rec.check(InequalityCheck::strict("outside_weight", ctx.clone(), sl.outside, cfg.outside_tolerance).at(sl.t));
        rec.check(InequalityCheck::new("tail_bins", ctx.clone(), cfg.min_tail_bins as f64, run as f64).at(sl.t));
        rec.check(InequalityCheck::strict("tail_monotone", ctx, worst, 1.0).at(sl.t));
        summary.push(vec![sl.t, sl.big_lambda, sl.mean, sl.outside, run as f64, worst]);
    }
    rec.tables = vec![summary, heat, tail_t];
    Ok(rec.finish())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MomentConfig {
    pub n_values: Vec<usize>,
    /// Schedule seeds are `seed, seed + 1, ...`.
    pub seed: u64,
    pub schedules: usize,
    pub k_max: usize,
    pub samples: usize,
    /// Locality of every knot.
    pub q: f64,
    pub profile: StrengthProfile,
    pub evolve_tolerance: f64,
}

impl Default for MomentConfig {
    fn default() -> Self {
        Self {
            n_values: vec![4, 5, 6],
            seed: 0,
            schedules: 20,
            k_max: 6,
            samples: 6,
            q: 2.0,
            profile: StrengthProfile::default(),
            evolve_tolerance: 1e-10,
        }
    }
}

/// Moments `g_k(t)` against `Δ^k f_k(λ_t n / Δ)` along a trajectory.
fn moment_rows(
    s: &Schedule,
    traj: &Trajectory,
    e0: f64,
    kind: PolyKind,
    delta: f64,
    k_max: usize,
    tag: &str,
) -> Result<(Vec<InequalityCheck>, Vec<Vec<f64>>)> {
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    for (t, psi) in &traj.samples {
        let h = s.evaluate(*t)?;
        let m = central_moments(psi, &h, e0, k_max)?;
        let var = s.total_variation(NormKind::X, 0.0, *t)?.value;
        for k in 1..=k_max {
            let rhs = moment_bound(kind, k, var, delta)?;
            checks.push(InequalityCheck::new("moment", format!("{tag} k={k}"), m.g[k], rhs).at(*t));
            rows.push(vec![*t, var, k as f64, m.g[k], rhs]);
        }
    }
    Ok((checks, rows))
}

/// Moment inequality on random general-case schedules started in a
/// mid-spectrum eigenstate.
pub fn moment_inequality(cfg: &MomentConfig) -> Result<RunRecord> {
    if cfg.n_values.is_empty() || cfg.schedules == 0 || cfg.samples == 0 || cfg.k_max == 0 {
        return Err(Error::Empty(
            "moment run needs sizes, schedules, samples and k_max".into(),
        ));
    }
    let mut rec = RunRecord::new("moment_inequality", cfg.seed, cfg)?;
    let delta = delta_q(cfg.q, cfg.profile.m_bound);
    rec.scalar("delta", delta);
    let jobs: Vec<(usize, u64)> = cfg
        .n_values
        .iter()
        .flat_map(|&n| (0..cfg.schedules as u64).map(move |i| (n, cfg.seed + i)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(n, seed)| {
            let s = random_two_local_schedule(n, seed, &cfg.profile)?;
            s.verify_case(crate::schedule::CaseTag::General, cfg.q, cfg.profile.m_bound)?;
            let dec = spectral_decompose(&s.evaluate(0.0)?)?;
            let idx = dec.energies.len() / 2;
            let psi0 = StateVector::eigenvector(&dec, idx)?;
            let times = sample_times(s.final_time(), cfg.samples);
            let traj = evolve(&s, &psi0, &times, &evolve_opts(cfg.evolve_tolerance))?;
            let tag = format!("n={n} seed={seed}");
            let (c, rows) = moment_rows(&s, &traj, dec.energies[idx], PolyKind::First, delta, cfg.k_max, &tag)?;
            Ok((n, seed, c, rows, traj.achieved_tolerance))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new("moments", &["n", "seed", "time", "variation", "k", "g_k", "bound"]);
    let mut worst_tol: f64 = 0.0;
    for (n, seed, checks, rows, tol) in results {
        worst_tol = worst_tol.max(tol);
        rec.checks.extend(checks);
        for r in rows {
            let mut row = vec![n as f64, seed as f64];
            row.extend(r);
            table.push(row);
        }
    }
    rec.scalar("achieved_tolerance", worst_tol);
    rec.tables.push(table);
    Ok(rec.finish())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Case3Config {
    pub n_values: Vec<usize>,
    /// Final transverse strength of the ramp.
    pub lambda: f64,
    pub duration: f64,
    pub k_max: usize,
    pub samples: usize,
    pub d_grid: Vec<f64>,
    /// Initial computational basis state, site 0 first; all zeros by default.
    pub initial: Option<String>,
    pub evolve_tolerance: f64,
}

impl Default for Case3Config {
    fn default() -> Self {
        Self {
            n_values: vec![4, 6, 8],
            lambda: 0.3,
            duration: 2.0,
            k_max: 6,
            samples: 6,
            d_grid: vec![0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.6, 0.8, 1.0],
            initial: None,
            evolve_tolerance: 1e-9,
        }
    }
}

fn initial_basis_state(n: usize, initial: &Option<String>) -> Result<u64> {
    match initial {
        None => Ok(0),
        Some(b) => {
            if b.len() != n {
                return Err(Error::Dimension(format!("initial state `{b}` is not {n} sites long")));
            }
            parse_bitstring(b)
        }
    }
}

/// Ising chain under a transverse ramp: commuting-core moment bound and the
/// matching finite-n leakage bound on the d-grid.
pub fn case3(cfg: &Case3Config) -> Result<RunRecord> {
    if cfg.n_values.is_empty() || cfg.samples == 0 || cfg.k_max == 0 {
        return Err(Error::Empty("case-3 run needs sizes, samples and k_max".into()));
    }
    let mut rec = RunRecord::new("case3", 0, cfg)?;
    let results = cfg
        .n_values
        .par_iter()
        .map(|&n| {
            let ramp = TransverseRamp {
                lambda: cfg.lambda,
                duration: cfg.duration,
            };
            let s = commuting_core_model(n, &CoreKind::IsingChain, ramp)?;
            let core = s.core_at(0.0)?;
            let delta = delta_q(1.0, core.loc_norm());
            let z0 = initial_basis_state(n, &cfg.initial)?;
            let e0 = core.diagonal_energies()?[z0 as usize];
            let psi0 = StateVector::basis(n, z0 as usize)?;
            let times = sample_times(s.final_time(), cfg.samples);
            let traj = evolve(&s, &psi0, &times, &evolve_opts(cfg.evolve_tolerance))?;
            let tag = format!("n={n}");
            let (mut checks, rows) = moment_rows(&s, &traj, e0, PolyKind::Second, delta, cfg.k_max, &tag)?;
            let prof = leakage_profile(
                &traj,
                &s,
                e0,
                &cfg.d_grid,
                &ProfileConfig {
                    bin_width: 0.5,
                    half_range: 2.0 * n as f64,
                    bound: Some(ProfileBound {
                        kind: PolyKind::Second,
                        delta,
                        norm: NormKind::X,
                    }),
                },
            )?;
            let mut leak_rows = Vec::new();
            for smp in &prof.samples {
                let bounds = smp.bounds.as_ref().expect("profile built with a bound");
                for ((&d, &lhs), &rhs) in cfg.d_grid.iter().zip(&smp.leakage).zip(bounds) {
                    leak_rows.push(vec![smp.time, smp.lambda_t, d, lhs, rhs]);
                    if d > smp.lambda_t {
                        checks.push(InequalityCheck::new("leakage", format!("{tag} d={d}"), lhs, rhs).at(smp.time));
                    }
                }
            }
            Ok((n, delta, checks, rows, leak_rows))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut mt = Table::new("moments", &["n", "time", "variation", "k", "g_k", "bound"]);
    let mut lt = Table::new("leakage", &["n", "time", "lambda_t", "d", "leakage", "bound"]);
    for (n, delta, checks, rows, leak) in results {
        rec.scalar(&format!("delta_n{n}"), delta);
        rec.checks.extend(checks);
        for r in rows {
            mt.push([vec![n as f64], r].concat());
        }
        for r in leak {
            lt.push([vec![n as f64], r].concat());
        }
    }
    rec.tables = vec![mt, lt];
    Ok(rec.finish())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StaticConfig {
    pub n_values: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub d_grid: Vec<f64>,
}

impl Default for StaticConfig {
    fn default() -> Self {
        Self {
            n_values: (4..=10).collect(),
            lambdas: vec![0.05, 0.1, 0.2],
            d_grid: vec![0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5, 0.75, 1.0],
        }
    }
}

/// Every eigenstate of `H0 + λ Σ X` with `H0` the Ising chain, measured in
/// the basis of `H0` against the commuting-core window bound. One check is
/// logged per `(λ, n, d)` with the worst eigenstate on the left.
pub fn static_reduction(cfg: &StaticConfig) -> Result<RunRecord> {
    if cfg.n_values.is_empty() || cfg.lambdas.is_empty() || cfg.d_grid.is_empty() {
        return Err(Error::Empty("static run needs sizes, strengths and a d-grid".into()));
    }
    let mut rec = RunRecord::new("static_reduction", 0, cfg)?;
    let jobs: Vec<(f64, usize)> = cfg
        .lambdas
        .iter()
        .flat_map(|&l| cfg.n_values.iter().map(move |&n| (l, n)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(lambda, n)| {
            let h0 = CoreKind::IsingChain.hamiltonian(n)?;
            let v0 = transverse_field(n, lambda)?;
            let delta = delta_q(1.0, h0.loc_norm());
            let diag = h0.diagonal_energies()?;
            let dec = spectral_decompose(&h0.add(&v0)?)?;
            let dim = diag.len();
            let nf = n as f64;
            let mut out = Vec::new();
            for &d in cfg.d_grid.iter().filter(|&&d| d > lambda) {
                let mut worst = (0.0, 0usize);
                for (j, &ej) in dec.energies.iter().enumerate() {
                    let w: f64 = (0..dim)
                        .filter(|&z| (diag[z] - ej).abs() >= d * nf)
                        .map(|z| dec.vectors[(z, j)].norm_sqr())
                        .sum();
                    if w > worst.0 {
                        worst = (w, j);
                    }
                }
                let rhs = leakage_value(PolyKind::Second, v0.x_norm(), delta, d * nf)?;
                out.push((d, worst.0.sqrt(), worst.1, rhs));
            }
            Ok((lambda, n, out))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new("static", &["lambda", "n", "d", "max_leakage", "argmax", "bound"]);
    for (lambda, n, out) in results {
        for (d, lhs, j, rhs) in out {
            rec.check(InequalityCheck::new(
                "window_leakage",
                format!("lambda={lambda} n={n} d={d} eigenstate={j}"),
                lhs,
                rhs,
            ));
            t.push(vec![lambda, n as f64, d, lhs, j as f64, rhs]);
        }
    }
    rec.tables.push(t);
    Ok(rec.finish())
}
