//! Drivers built on a diagonal cluster landscape.

use faer::{Mat, Side};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::record::{InequalityCheck, RunRecord, Table};
use super::sample_times;
use crate::bounds::{delta_q, leakage_value};
use crate::clusters::{
    bitstring, cluster_gap_delta_w, cluster_weights, find_clusters, mountain_pass_energy, parse_bitstring,
    ClusterPartition,
};
use crate::combinatorics::PolyKind;
use crate::dynamics::{evolve, spectral_decompose, EvolveOptions, StateVector};
use crate::error::{Error, Result};
use crate::models::{
    detuning_field, mis_model, parity_check_code, pspin_model, random_ldpc_checks, random_regular_graph,
    repetition_checks, rng_from_seed, tail_schedule, tail_variation, transverse_field, Check,
};
use crate::pauli::{OperatorSum, C64};
use crate::schedule::{NormKind, Schedule};

/// Diagonal landscape families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LandscapeSpec {
    /// Repetition code with a check `Z_a Z_b` on every edge of a random regular graph.
    GraphRepetition { degree: usize },
    /// Repetition code on an open chain or a ring, with checks `Z_i Z_{i+k}` for `k = 1..=range`.
    RepetitionChain {
        ring: bool,
        #[serde(default = "unit_range")]
        range: usize,
    },
    /// Random classical LDPC code.
    Ldpc { col_weight: usize, row_weight: usize },
    /// p-spin glass on a random regular hypergraph.
    PSpin { p_degree: usize, q_body: usize },
    /// Explicit `Z` checks.
    Checks { checks: Vec<Vec<usize>> },
}

fn unit_range() -> usize {
    1
}

impl Default for LandscapeSpec {
    fn default() -> Self {
        Self::RepetitionChain { ring: true, range: 1 }
    }
}

fn ranged_repetition_checks(n: usize, ring: bool, range: usize) -> Result<Vec<Check>> {
    if range == 0 || range >= n || (ring && 2 * range >= n) {
        return Err(Error::Parameter(format!("check range {range} does not fit {n} sites")));
    }
    if range == 1 {
        return Ok(repetition_checks(n, ring));
    }
    let mut checks = Vec::new();
    for k in 1..=range {
        let last = if ring { n } else { n - k };
        checks.extend((0..last).map(|i| Check::z(vec![i, (i + k) % n])));
    }
    Ok(checks)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Landscape {
    pub n: usize,
    pub h_c: OperatorSum,
    pub energies: Vec<f64>,
    pub e_g: f64,
    /// Global minima in increasing order.
    pub ground_states: Vec<u64>,
}

const GROUND_TOL: f64 = 1e-9;

pub fn build_landscape(spec: &LandscapeSpec, n: usize, seed: u64) -> Result<Landscape> {
    let mut rng = rng_from_seed(seed);
    let h_c = match spec {
        LandscapeSpec::GraphRepetition { degree } => {
            let edges = random_regular_graph(n, *degree, &mut rng)?;
            let checks = edges.iter().map(|&(a, b)| Check::z(vec![a, b])).collect();
            parity_check_code(n, checks)?.1
        }
        LandscapeSpec::RepetitionChain { ring, range } => {
            parity_check_code(n, ranged_repetition_checks(n, *ring, *range)?)?.1
        }
        LandscapeSpec::Ldpc { col_weight, row_weight } => {
            parity_check_code(n, random_ldpc_checks(n, *col_weight, *row_weight, &mut rng)?)?.1
        }
        LandscapeSpec::PSpin { p_degree, q_body } => pspin_model(n, *p_degree, *q_body, seed)?.1,
        LandscapeSpec::Checks { checks } => {
            parity_check_code(n, checks.iter().map(|c| Check::z(c.clone())).collect())?.1
        }
    };
    if !h_c.is_diagonal() {
        return Err(Error::Domain("landscape Hamiltonian is not diagonal".into()));
    }
    let energies = h_c.diagonal_energies()?;
    let e_g = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let ground_states = (0..energies.len() as u64)
        .filter(|&z| energies[z as usize] <= e_g + GROUND_TOL)
        .collect();
    Ok(Landscape {
        n,
        h_c,
        energies,
        e_g,
        ground_states,
    })
}

/// The cluster holding the initial state together with the barrier data.
struct Basin {
    partition: ClusterPartition,
    z0: u64,
    w0: usize,
    e_b: f64,
    b: f64,
    eps0: f64,
}

fn parse_initial(n: usize, initial: &Option<String>) -> Result<Option<u64>> {
    initial
        .as_ref()
        .map(|s| {
            if s.len() != n {
                return Err(Error::Dimension(format!("initial state `{s}` is not {n} sites long")));
            }
            parse_bitstring(s)
        })
        .transpose()
}

impl Landscape {
    /// Lowest mountain-pass energy from `z0` to another global minimum.
    pub fn mountain_pass(&self, z0: u64) -> Result<f64> {
        let mut best: Option<f64> = None;
        for &g in self.ground_states.iter().filter(|&&g| g != z0) {
            let e = mountain_pass_energy(self.n, &self.energies, z0, g)?;
            best = Some(best.map_or(e, |b: f64| b.min(e)));
        }
        best.ok_or_else(|| Error::Undefined("no second minimum to place an automatic barrier; set `barrier`".into()))
    }
}

fn basin(land: &Landscape, initial: &Option<String>, barrier: Option<f64>, hop: u32) -> Result<Basin> {
    let z0 = parse_initial(land.n, initial)?.unwrap_or(land.ground_states[0]);
    let e_b = match barrier {
        Some(e) => e,
        None => land.mountain_pass(z0)?,
    };
    let partition = find_clusters(land.n, &land.energies, e_b, hop)?;
    let w0 = partition.cluster_of(z0).ok_or_else(|| {
        Error::Parameter(format!(
            "initial state {} has energy {} at or above the barrier {e_b}",
            bitstring(land.n, z0),
            land.energies[z0 as usize]
        ))
    })?;
    let nf = land.n as f64;
    Ok(Basin {
        z0,
        w0,
        e_b,
        b: (e_b - land.e_g) / nf,
        eps0: (land.energies[z0 as usize] - land.e_g) / nf,
        partition,
    })
}

fn record_basin(rec: &mut RunRecord, land: &Landscape, bs: &Basin) {
    rec.scalar("e_g", land.e_g);
    rec.scalar("e_b", bs.e_b);
    rec.scalar("b", bs.b);
    rec.scalar("eps0", bs.eps0);
    rec.scalar("clusters", bs.partition.clusters.len() as f64);
    rec.scalar("nu1", bs.partition.metrics.nu1 as f64);
    if let Some(nu2) = bs.partition.metrics.nu2 {
        rec.scalar("nu2", nu2 as f64);
    }
    rec.note(format!("initial state {}", bitstring(land.n, bs.z0)));
}

/// Bounds applied at each sample of a driven trajectory inside a basin.
struct Tracker<'a> {
    basin: &'a Basin,
    delta: f64,
    /// `E_B - E(z0)`.
    window: f64,
    /// `max_t ‖V(t)‖_X`.
    v_max: f64,
    /// Extended variation `‖V(0)‖_X + ∫‖V'‖_X` at the final sample.
    ext_final: f64,
    vacuous_all: bool,
}

struct TrackRow {
    checks: Vec<InequalityCheck>,
    row: Vec<f64>,
}

impl Tracker<'_> {
    fn sample(&self, s: &Schedule, v0_norm: f64, e_init: f64, t: f64, psi: &StateVector) -> Result<TrackRow> {
        let w = cluster_weights(psi, &self.basin.partition)?;
        let p_w0 = w.clusters[self.basin.w0];
        let p_high = w.outside;
        let others = (w.total() - p_w0 - p_high).max(0.0);
        let tv = s.total_variation(NormKind::X, 0.0, t)?.value;
        let ext = v0_norm + tv;
        let energy = psi.expectation(&s.evaluate(t)?.compile());
        let high_rhs = leakage_value(PolyKind::Second, 2.0 * ext, self.delta, self.window)?;
        let leak_rhs =
            2.0 * self.v_max * t * leakage_value(PolyKind::Second, 2.0 * self.ext_final, self.delta, self.window)?;
        let ctx = format!("t={t}");
        let checks = vec![
            InequalityCheck::new("high_energy", ctx.clone(), p_high.sqrt(), high_rhs)
                .at(t)
                .vacuous_if(self.vacuous_all || high_rhs >= 1.0),
            InequalityCheck::new("cluster_leakage", ctx.clone(), (1.0 - p_w0).max(0.0), leak_rhs)
                .at(t)
                .vacuous_if(self.vacuous_all || leak_rhs >= 1.0),
            InequalityCheck::new("energy_drift", ctx, (energy - e_init).abs(), tv).at(t),
        ];
        Ok(TrackRow {
            checks,
            row: vec![t, ext, p_w0, p_high, others, energy, high_rhs, leak_rhs],
        })
    }
}

const TRACK_COLUMNS: [&str; 8] = [
    "time",
    "extended_variation",
    "p_w0",
    "p_high",
    "p_other_clusters",
    "energy",
    "high_energy_bound",
    "cluster_leakage_bound",
];

fn track_all(
    rec: &mut RunRecord,
    tracker: &Tracker<'_>,
    s: &Schedule,
    psi0: &StateVector,
    times: &[f64],
    tolerance: f64,
) -> Result<()> {
    let v0_norm = s.perturbation_at(0.0)?.x_norm();
    let e_init = psi0.expectation(&s.evaluate(0.0)?.compile());
    let opts = EvolveOptions {
        tolerance,
        ..EvolveOptions::default()
    };
    let traj = evolve(s, psi0, times, &opts)?;
    rec.scalar("achieved_tolerance", traj.achieved_tolerance);
    let rows = traj
        .samples
        .par_iter()
        .map(|(t, psi)| tracker.sample(s, v0_norm, e_init, *t, psi))
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new("trajectory", &TRACK_COLUMNS);
    for r in rows {
        rec.checks.extend(r.checks);
        table.push(r.row);
    }
    rec.tables.push(table);
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicalConfig {
    pub n: usize,
    pub seed: u64,
    pub landscape: LandscapeSpec,
    /// Barrier energy `E_B`; the lowest mountain pass to another minimum by default.
    pub barrier: Option<f64>,
    pub initial: Option<String>,
    /// Strength of the transverse drive `λ Σ X`.
    pub lambda: f64,
    /// Linear ramp-up time of the drive; zero gives a sudden quench.
    pub ramp_time: f64,
    /// Time horizons in units of `1/(λ n)`.
    pub horizons: Vec<f64>,
    pub samples_per_horizon: usize,
    /// Run even when the premises fail, flagging every bound vacuous.
    pub exploratory: bool,
    pub evolve_tolerance: f64,
}

impl Default for DynamicalConfig {
    fn default() -> Self {
        Self {
            n: 8,
            seed: 7,
            landscape: LandscapeSpec::default(),
            barrier: None,
            initial: None,
            lambda: 0.02,
            ramp_time: 0.0,
            horizons: vec![1.0, 10.0, 100.0],
            samples_per_horizon: 4,
            exploratory: false,
            evolve_tolerance: 1e-7,
        }
    }
}

fn horizon_times(horizons: &[f64], unit: f64, per: usize) -> Vec<f64> {
    let mut times: Vec<f64> = horizons.iter().flat_map(|&h| sample_times(h * unit, per)).collect();
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    times
}

/// Transverse drive on a cluster landscape started in a basis state of the
/// initial cluster. Logs the high-energy weight and the cluster leakage
/// against their bounds at every sample.
pub fn dynamical_localization(cfg: &DynamicalConfig) -> Result<RunRecord> {
    if cfg.horizons.is_empty() || cfg.samples_per_horizon == 0 {
        return Err(Error::Empty("dynamical run needs horizons and samples".into()));
    }
    if !(cfg.lambda >= 0.0) || !(cfg.ramp_time >= 0.0) {
        return Err(Error::Parameter("λ and the ramp time must be non-negative".into()));
    }
    let mut rec = RunRecord::new("dynamical_localization", cfg.seed, cfg)?;
    let land = build_landscape(&cfg.landscape, cfg.n, cfg.seed)?;
    let n = land.n;
    let nf = n as f64;
    let v = transverse_field(n, cfg.lambda)?;
    let bs = basin(&land, &cfg.initial, cfg.barrier, v.max_flip_weight().max(1))?;
    record_basin(&mut rec, &land, &bs);
    let q = v.max_locality().max(land.h_c.max_locality()) as f64;
    let delta = delta_q(q, land.h_c.loc_norm());
    let lambda_eff = v.x_norm() / nf;
    let threshold = (bs.b - bs.eps0) / 2.0;
    rec.scalar("delta", delta);
    rec.scalar("lambda", lambda_eff);
    rec.scalar("lambda_threshold", threshold);

    let mut premise = Vec::new();
    if lambda_eff >= threshold {
        premise.push(format!(
            "λ = {lambda_eff} is not below (b - ε0)/2 = {threshold}; the bounds are vacuous"
        ));
    }
    if !bs.partition.separated_by_flip_weight(&v) {
        premise.push("the drive flips at least ν2 sites and can couple clusters directly".to_string());
    }
    if !premise.is_empty() && !cfg.exploratory {
        return Err(Error::Parameter(format!(
            "{} (set exploratory = true to run anyway)",
            premise.join("; ")
        )));
    }
    for p in &premise {
        rec.note(format!("exploratory: {p}"));
    }

    let unit = if cfg.lambda > 0.0 { 1.0 / (lambda_eff * nf) } else { 1.0 };
    let times = horizon_times(&cfg.horizons, unit, cfg.samples_per_horizon);
    let t_max = *times.last().expect("nonempty grid");
    let knots = if cfg.ramp_time > 0.0 && cfg.ramp_time < t_max {
        vec![
            (0.0, land.h_c.clone(), OperatorSum::zero(n)),
            (cfg.ramp_time, land.h_c.clone(), v.clone()),
            (t_max, land.h_c.clone(), v.clone()),
        ]
    } else if cfg.ramp_time > 0.0 {
        return Err(Error::Parameter(
            "ramp time must be shorter than the longest horizon".into(),
        ));
    } else {
        vec![(0.0, land.h_c.clone(), v.clone()), (t_max, land.h_c.clone(), v.clone())]
    };
    let s = Schedule::new_split(knots)?;
    let ext_final = s.perturbation_at(0.0)?.x_norm() + s.total_variation(NormKind::X, 0.0, t_max)?.value;
    let window = bs.e_b - land.energies[bs.z0 as usize];
    let tracker = Tracker {
        basin: &bs,
        delta,
        window,
        v_max: v.x_norm(),
        ext_final,
        vacuous_all: !premise.is_empty(),
    };
    rec.scalar(
        "high_energy_bound",
        leakage_value(PolyKind::Second, 2.0 * ext_final, delta, window)?,
    );
    let psi0 = StateVector::basis(n, bs.z0 as usize)?;
    track_all(&mut rec, &tracker, &s, &psi0, &times, cfg.evolve_tolerance)?;
    Ok(rec.finish())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigenlocConfig {
    pub n_values: Vec<usize>,
    pub seed: u64,
    pub landscape: LandscapeSpec,
    pub barrier: Option<f64>,
    pub lambda: f64,
    /// Add the random diagonal detuning that splits degenerate clusters.
    pub detuning: bool,
    pub d_grid: Vec<f64>,
}

impl Default for EigenlocConfig {
    fn default() -> Self {
        Self {
            n_values: vec![6, 8],
            seed: 7,
            landscape: LandscapeSpec::default(),
            barrier: None,
            lambda: 0.05,
            detuning: true,
            d_grid: vec![0.1, 0.2, 0.3, 0.5, 0.75, 1.0],
        }
    }
}

struct EigenlocSize {
    n: usize,
    delta_w: Option<f64>,
    checks: Vec<InequalityCheck>,
    rows: Vec<Vec<f64>>,
    applicable: usize,
    below: usize,
    notes: Vec<String>,
}

fn eigenloc_size(cfg: &EigenlocConfig, n: usize) -> Result<EigenlocSize> {
    let land = build_landscape(&cfg.landscape, n, cfg.seed)?;
    let bs = basin(&land, &None, cfg.barrier, 1)?;
    let p = &bs.partition;
    let nf = n as f64;
    let h_d = if cfg.detuning {
        detuning_field(n, cfg.seed)?
    } else {
        OperatorSum::zero(n)
    };
    let h0 = land.h_c.add(&h_d)?;
    let v0 = transverse_field(n, cfg.lambda)?;
    let h = h0.add(&v0)?;
    let delta = delta_q(1.0, h0.loc_norm());
    let lam_n = v0.x_norm();
    let hd_x = h_d.x_norm();
    let diag0 = h0.diagonal_energies()?;
    let dec = spectral_decompose(&h)?;
    let dim = diag0.len();
    let mut notes = Vec::new();

    let coupled = p.coupled_clusters(&v0)?;
    let delta_w = if coupled.is_some() {
        notes.push(format!(
            "n={n}: the drive couples clusters directly; the gap argument is skipped"
        ));
        None
    } else if p.clusters.len() < 2 {
        notes.push(format!("n={n}: a single cluster; the gap argument is skipped"));
        None
    } else {
        Some(cluster_gap_delta_w(&p.block_spectra(&h)?)?)
    };

    let inside: Vec<bool> = (0..dim as u64).map(|z| p.cluster_of(z).is_some()).collect();
    let v_op = v0.compile();
    let d_checked: Vec<f64> = cfg.d_grid.iter().copied().filter(|&d| d > cfg.lambda).collect();
    let mut worst_window = vec![(0.0f64, 0usize); d_checked.len()];
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    let mut applicable = 0;
    let mut below = 0;
    let mut out = vec![C64::new(0.0, 0.0); dim];
    for (j, &ej) in dec.energies.iter().enumerate() {
        if ej >= bs.e_b {
            break;
        }
        below += 1;
        let col: Vec<C64> = (0..dim).map(|z| dec.vectors[(z, j)]).collect();
        for (slot, &d) in worst_window.iter_mut().zip(&d_checked) {
            let w: f64 = (0..dim)
                .filter(|&z| (diag0[z] - ej).abs() >= d * nf)
                .map(|z| col[z].norm_sqr())
                .sum();
            if w > slot.0 {
                *slot = (w, j);
            }
        }
        let p_high: f64 = (0..dim).filter(|&z| !inside[z]).map(|z| col[z].norm_sqr()).sum();
        let p_low = (1.0 - p_high).max(0.0);
        let big_d = bs.e_b - hd_x - ej;
        let high_rhs = if big_d > 0.0 {
            leakage_value(PolyKind::Second, lam_n, delta, big_d)?
        } else {
            1.0
        };
        let ctx = format!("n={n} eigenstate={j}");
        checks.push(
            InequalityCheck::new("high_energy", ctx.clone(), p_high.sqrt(), high_rhs).vacuous_if(high_rhs >= 1.0),
        );

        let above: Vec<C64> = (0..dim)
            .map(|z| if inside[z] { C64::new(0.0, 0.0) } else { col[z] })
            .collect();
        v_op.apply(&above, &mut out);
        let resid: f64 = (0..dim)
            .filter(|&z| inside[z])
            .map(|z| out[z].norm_sqr())
            .sum::<f64>()
            .sqrt();
        let eps_meas = if p_low > 0.0 {
            resid / p_low.sqrt()
        } else {
            f64::INFINITY
        };
        let eps_bound = 2.0 * lam_n * high_rhs;
        let small = high_rhs * high_rhs < 0.75;
        checks.push(InequalityCheck::new("residual", ctx.clone(), eps_meas, eps_bound).vacuous_if(!small));

        let weights = cluster_weights(&StateVector::from_amplitudes(n, col)?, p)?;
        let (w_star, w_max) = weights
            .clusters
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (c, &x)| if x > acc.1 { (c, x) } else { acc });
        let mut rhs_c = f64::NAN;
        if let Some(dw) = delta_w {
            if small && dw > eps_bound {
                applicable += 1;
                let r = eps_bound / (dw - eps_bound);
                rhs_c = high_rhs * high_rhs + r * r;
                checks.push(
                    InequalityCheck::new("cluster_leakage", ctx, (1.0 - w_max).max(0.0), rhs_c)
                        .vacuous_if(rhs_c >= 1.0),
                );
            }
        }
        rows.push(vec![
            n as f64,
            j as f64,
            ej,
            p_high.sqrt(),
            high_rhs,
            eps_meas,
            eps_bound,
            w_max,
            w_star as f64,
            rhs_c,
        ]);
    }
    for (&d, &(w, j)) in d_checked.iter().zip(&worst_window) {
        let rhs = leakage_value(PolyKind::Second, lam_n, delta, d * nf)?;
        checks.push(InequalityCheck::new(
            "window_leakage",
            format!("n={n} d={d} eigenstate={j}"),
            w.sqrt(),
            rhs,
        ));
    }
    if delta_w.is_some() && applicable == 0 && below > 0 {
        notes.push(format!(
            "n={n}: the inter-cluster gap never exceeds the residual bound; only the leakage trend is reported"
        ));
    }
    Ok(EigenlocSize {
        n,
        delta_w,
        checks,
        rows,
        applicable,
        below,
        notes,
    })
}

/// Full diagonalization of `H_C + V0 + H_d` with every eigenstate below the
/// barrier checked for window leakage, high-energy weight, and localization
/// in a single cluster where the gap argument applies.
pub fn eigenstate_localization(cfg: &EigenlocConfig) -> Result<RunRecord> {
    if cfg.n_values.is_empty() {
        return Err(Error::Empty("no system sizes".into()));
    }
    let mut rec = RunRecord::new("eigenstate_localization", cfg.seed, cfg)?;
    let sizes = cfg
        .n_values
        .par_iter()
        .map(|&n| eigenloc_size(cfg, n))
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(
        "eigenstates",
        &[
            "n",
            "index",
            "energy",
            "high_weight_norm",
            "high_energy_bound",
            "residual",
            "residual_bound",
            "max_cluster_weight",
            "max_cluster",
            "cluster_leakage_bound",
        ],
    );
    let mut trend = Table::new(
        "trend",
        &[
            "n",
            "delta_w",
            "below_barrier",
            "gap_applicable",
            "max_high_weight_norm",
        ],
    );
    for sz in sizes {
        let max_high = sz.rows.iter().map(|r| r[3]).fold(0.0, f64::max);
        trend.push(vec![
            sz.n as f64,
            sz.delta_w.unwrap_or(f64::NAN),
            sz.below as f64,
            sz.applicable as f64,
            max_high,
        ]);
        rec.checks.extend(sz.checks);
        rec.notes.extend(sz.notes);
        for r in sz.rows {
            t.push(r);
        }
    }
    rec.tables = vec![trend, t];
    Ok(rec.finish())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GibbsConfig {
    pub n: usize,
    pub seed: u64,
    pub landscape: LandscapeSpec,
    pub barrier: Option<f64>,
    pub beta: f64,
    /// Scale of the random diagonal field `λ Σ g_j Z_j`, `g_j` uniform in `[-1, 1]`.
    pub field: f64,
    /// Largest size for the dense spectral gap.
    pub gap_max_sites: usize,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            n: 12,
            seed: 7,
            landscape: LandscapeSpec::RepetitionChain { ring: true, range: 2 },
            barrier: None,
            beta: 2.0,
            field: 0.05,
            gap_max_sites: 12,
        }
    }
}

const STATIONARY_TOL: f64 = 1e-10;

fn ln_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn random_diagonal_field(n: usize, scale: f64, seed: u64) -> Result<OperatorSum> {
    use rand::RngExt;
    let mut rng = rng_from_seed(seed ^ 0x6a09_e667_f3bc_c908);
    let mut op = OperatorSum::zero(n);
    for j in 0..n {
        let g: f64 = rng.random_range(-1.0..=1.0);
        op = op.add(&OperatorSum::single(n, j, 'Z', scale * g)?)?;
    }
    Ok(op)
}

/// Single-spin-flip Metropolis chain on `H_C + V0` with diagonal `V0`:
/// exact bottleneck ratio of the initial cluster, the bound chain that
/// controls it, and the spectral gap of the transition matrix.
pub fn gibbs_bottleneck(cfg: &GibbsConfig) -> Result<RunRecord> {
    if !(cfg.beta > 0.0) {
        return Err(Error::Parameter(format!("β must be positive, got {}", cfg.beta)));
    }
    let mut rec = RunRecord::new("gibbs_bottleneck", cfg.seed, cfg)?;
    let land = build_landscape(&cfg.landscape, cfg.n, cfg.seed)?;
    let n = land.n;
    let nf = n as f64;
    let bs = basin(&land, &None, cfg.barrier, 1)?;
    record_basin(&mut rec, &land, &bs);
    let v0 = random_diagonal_field(n, cfg.field, cfg.seed)?;
    let lambda = v0.x_norm() / nf;
    let delta = delta_q(1.0, land.h_c.loc_norm());
    let e: Vec<f64> = land.h_c.add(&v0)?.diagonal_energies()?;
    let dim = e.len();
    let beta = cfg.beta;
    rec.scalar("lambda", lambda);
    rec.scalar("delta", delta);

    let ln_z = ln_sum_exp(e.iter().map(|x| -beta * x));
    let ln_a = ln_sum_exp(
        bs.partition.clusters[bs.w0]
            .states
            .iter()
            .map(|&z| -beta * e[z as usize]),
    );
    let ln_b = ln_sum_exp(
        (0..dim)
            .filter(|&z| bs.partition.cluster_of(z as u64).is_none())
            .map(|z| -beta * e[z]),
    );
    let pi: Vec<f64> = e.iter().map(|x| (-beta * x - ln_z).exp()).collect();
    let pi_a = (ln_a - ln_z).exp();
    let pi_b = (ln_b - ln_z).exp();
    let ln_eps_m = 10f64.ln() + 0.5 * (ln_b - ln_z) - (ln_a - ln_z);
    let eps_m = ln_eps_m.exp();
    rec.scalar("ln_partition", ln_z);
    rec.scalar("pi_cluster", pi_a);
    rec.scalar("pi_high", pi_b);
    rec.scalar("epsilon_m", eps_m);

    let e_g = land.e_g;
    let d = bs.b / 4.0;
    let premise = d > lambda;
    if !premise {
        rec.note(format!(
            "d = b/4 = {d} does not exceed λ = {lambda}; the high-energy chain is flagged vacuous"
        ));
    }
    let eps2 = leakage_value(PolyKind::Second, lambda * nf, delta, d * nf)?;
    let ln_tail = ((-beta * (bs.b - d) * nf).exp() + eps2).ln();
    rec.check(InequalityCheck::new(
        "partition_bound",
        "ln Z",
        ln_z,
        nf * 2f64.ln() - beta * (e_g - lambda * nf),
    ));
    rec.check(InequalityCheck::new(
        "cluster_weight_bound",
        "ln tr(P_w e^{-βH})",
        -beta * (e_g + lambda * nf),
        ln_a,
    ));
    rec.check(
        InequalityCheck::new(
            "high_energy_bound",
            "ln tr(P_> e^{-βH})",
            ln_b,
            nf * 2f64.ln() - beta * e_g + ln_tail,
        )
        .vacuous_if(!premise),
    );
    let ln_chain = 10f64.ln() + 0.5 * (nf * (2.0 * 2f64.ln() + 3.0 * beta * lambda) + ln_tail);
    rec.scalar("epsilon_m_bound", ln_chain.exp());
    rec.check(InequalityCheck::new("epsilon_m_chain", "ln ε_M", ln_eps_m, ln_chain).vacuous_if(!premise));

    // Metropolis moves z -> z ^ (1 << j) with probability min(1, e^{-βΔE}) / n.
    let rate = |z: usize, y: usize| (1.0f64).min((-beta * (e[y] - e[z])).exp()) / nf;
    let mut db = 0.0f64;
    let mut stat = 0.0f64;
    let mut flow_out = 0.0;
    let in_a: Vec<bool> = (0..dim)
        .map(|z| bs.partition.cluster_of(z as u64) == Some(bs.w0))
        .collect();
    for y in 0..dim {
        let mut stay = 1.0;
        let mut inflow = 0.0;
        for j in 0..n {
            let z = y ^ (1 << j);
            let out = rate(y, z);
            stay -= out;
            inflow += pi[z] * rate(z, y);
            db = db.max((pi[y] * out - pi[z] * rate(z, y)).abs());
            if in_a[y] && !in_a[z] {
                flow_out += pi[y] * out;
            }
        }
        stat = stat.max((pi[y] * stay + inflow - pi[y]).abs());
    }
    rec.check(InequalityCheck::exact(
        "detailed_balance",
        "max |π_x P_xy - π_y P_yx|",
        db,
        STATIONARY_TOL,
    ));
    rec.check(InequalityCheck::exact(
        "stationarity",
        "max |(πP - π)_x|",
        stat,
        STATIONARY_TOL,
    ));
    let tv = 2.0 * flow_out / pi_a;
    rec.scalar("restricted_state_drift", tv);
    rec.check(InequalityCheck::new("bottleneck_lemma", "‖P ρ_A - ρ_A‖_1", tv, eps_m));

    let ceiling = 1.0 / (2.0 * (1.0 - pi_a));
    rec.scalar("gap_constant", ceiling);
    if n <= cfg.gap_max_sites {
        let s = Mat::<f64>::from_fn(dim, dim, |x, y| {
            if x == y {
                1.0 - (0..n).map(|j| rate(x, x ^ (1 << j))).sum::<f64>()
            } else if (x ^ y).count_ones() == 1 {
                (pi[x] / pi[y]).sqrt() * rate(x, y)
            } else {
                0.0
            }
        });
        let mut ev: Vec<f64> = s
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Domain(format!("eigenvalue solver failed: {e:?}")))?
            .into_iter()
            .collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        let gap = 1.0 - ev[1];
        rec.scalar("spectral_gap", gap);
        rec.scalar("relaxation_time", 1.0 / gap);
        rec.scalar("bottleneck_time", 1.0 / eps_m);
        rec.check(InequalityCheck::new(
            "spectral_gap",
            "gap <= C ε_M",
            gap,
            ceiling * eps_m,
        ));
    } else {
        rec.note(format!(
            "n = {n} exceeds gap_max_sites; the spectral gap is not computed"
        ));
    }
    Ok(rec.finish())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FreezingConfig {
    pub n: usize,
    pub seed: u64,
    pub landscape: LandscapeSpec,
    pub barrier: Option<f64>,
    pub initial: Option<String>,
    /// Start of the annealing tail.
    pub s_star: f64,
    /// Mixer `H_M = -mixer Σ X`.
    pub mixer: f64,
    pub duration: f64,
    pub samples: usize,
    pub exploratory: bool,
    pub evolve_tolerance: f64,
}

impl Default for FreezingConfig {
    fn default() -> Self {
        Self {
            n: 12,
            seed: 7,
            landscape: LandscapeSpec::PSpin { p_degree: 3, q_body: 4 },
            barrier: None,
            initial: None,
            s_star: 0.995,
            mixer: 1.0,
            duration: 10.0,
            samples: 8,
            exploratory: false,
            evolve_tolerance: 1e-7,
        }
    }
}

/// Annealing tail `s★ → 1` started from a basis state of one cluster.
pub fn freezing(cfg: &FreezingConfig) -> Result<RunRecord> {
    if cfg.samples == 0 {
        return Err(Error::Empty("no samples".into()));
    }
    let mut rec = RunRecord::new("freezing", cfg.seed, cfg)?;
    let land = build_landscape(&cfg.landscape, cfg.n, cfg.seed)?;
    let n = land.n;
    let h_m = transverse_field(n, -cfg.mixer)?;
    let big_lambda = tail_variation(cfg.s_star, &h_m)?;
    let bs = basin(&land, &cfg.initial, cfg.barrier, 1)?;
    record_basin(&mut rec, &land, &bs);
    let e0 = land.energies[bs.z0 as usize];
    let big_b = bs.e_b - land.e_g;
    rec.scalar("tail_variation", big_lambda);
    let mut premise = Vec::new();
    if e0 >= bs.e_b - 2.0 * big_lambda {
        premise.push(format!(
            "initial energy {e0} is not below E_B - 2Λ = {}",
            bs.e_b - 2.0 * big_lambda
        ));
    }
    if big_lambda >= big_b / 2.0 {
        premise.push(format!("Λ = {big_lambda} is not below B/2 = {}", big_b / 2.0));
    }
    if !premise.is_empty() && !cfg.exploratory {
        return Err(Error::Parameter(format!(
            "{} (set exploratory = true to run anyway)",
            premise.join("; ")
        )));
    }
    for p in &premise {
        rec.note(format!("exploratory: {p}"));
    }
    let s = tail_schedule(&land.h_c, &h_m, cfg.s_star, cfg.duration)?;
    let q = h_m.max_locality().max(land.h_c.max_locality()).max(1) as f64;
    let delta = delta_q(q, land.h_c.loc_norm());
    rec.scalar("delta", delta);
    let v0 = s.perturbation_at(0.0)?.x_norm();
    let ext_final = v0 + s.total_variation(NormKind::X, 0.0, s.final_time())?.value;
    let tracker = Tracker {
        basin: &bs,
        delta,
        window: bs.e_b - e0,
        v_max: v0,
        ext_final,
        vacuous_all: !premise.is_empty(),
    };
    let times = sample_times(s.final_time(), cfg.samples);
    let psi0 = StateVector::basis(n, bs.z0 as usize)?;
    track_all(&mut rec, &tracker, &s, &psi0, &times, cfg.evolve_tolerance)?;
    Ok(rec.finish())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MisConfig {
    pub graphs: usize,
    pub n: usize,
    pub degree: usize,
    pub seed: u64,
    pub lambda: f64,
    /// Length of the driven run from a maximum independent set; zero skips it.
    pub evolve_time: f64,
}

impl Default for MisConfig {
    fn default() -> Self {
        Self {
            graphs: 5,
            n: 10,
            degree: 3,
            seed: 0,
            lambda: 1.0,
            evolve_time: 2.0,
        }
    }
}

/// Weight a drive may leak out of the independent-set subspace by rounding.
const SUBSPACE_TOL: f64 = 1e-20;

/// PXP drive on random regular graphs: the cross-block norm out of the
/// independent-set subspace must vanish exactly, and a driven run from a
/// maximum independent set must stay inside that subspace.
pub fn mis_symmetry(cfg: &MisConfig) -> Result<RunRecord> {
    if cfg.graphs == 0 {
        return Err(Error::Empty("no graphs".into()));
    }
    let mut rec = RunRecord::new("mis_symmetry", cfg.seed, cfg)?;
    let results = (0..cfg.graphs as u64)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.seed + i;
            let mut rng = rng_from_seed(seed);
            let edges = random_regular_graph(cfg.n, cfg.degree, &mut rng)?;
            let m = mis_model(cfg.n, &edges)?;
            let cross = m.cross_block_norm(cfg.lambda)?;
            let mut leak = None;
            if cfg.evolve_time > 0.0 {
                let size = m.max_independent_set_size()?;
                let z0 = (0..1u64 << cfg.n)
                    .find(|&z| m.is_independent(z) && z.count_ones() == size)
                    .expect("a maximum independent set exists");
                let h = m.h_v.scale(-1.0).add(&m.v_pxp(cfg.lambda))?;
                let s = Schedule::new(vec![(0.0, h.clone()), (cfg.evolve_time, h)])?;
                let psi0 = StateVector::basis(cfg.n, z0 as usize)?;
                let traj = evolve(&s, &psi0, &sample_times(cfg.evolve_time, 4), &EvolveOptions::default())?;
                let worst = traj
                    .samples
                    .iter()
                    .map(|(_, psi)| {
                        psi.probabilities()
                            .iter()
                            .enumerate()
                            .filter(|(z, _)| !m.is_independent(*z as u64))
                            .map(|(_, p)| p)
                            .sum::<f64>()
                    })
                    .fold(0.0, f64::max);
                leak = Some(worst);
            }
            Ok((seed, edges.len(), cross, leak))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new("graphs", &["seed", "edges", "cross_block_norm", "subspace_leakage"]);
    for (seed, edges, cross, leak) in results {
        let ctx = format!("graph seed={seed}");
        rec.check(InequalityCheck::exact("cross_block_norm", ctx.clone(), cross, 0.0));
        if let Some(l) = leak {
            rec.check(InequalityCheck::exact("subspace_leakage", ctx, l, SUBSPACE_TOL));
        }
        t.push(vec![seed as f64, edges as f64, cross, leak.unwrap_or(f64::NAN)]);
    }
    rec.tables.push(t);
    Ok(rec.finish())
}
