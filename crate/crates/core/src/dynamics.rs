//! State vectors, unitary evolution under schedules, and spectral analysis
//! of evolved states.

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::leakage_value;
use crate::combinatorics::PolyKind;
use crate::error::{Error, Result};
use crate::linalg;
use crate::pauli::{check_dense, CompiledOperator, OperatorSum, C64, DENSE_LIMIT};
use crate::schedule::{NormKind, Schedule};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Normalized state on `n_sites` qubits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    n_sites: usize,
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// Computational basis state `|index>`.
    pub fn basis(n_sites: usize, index: usize) -> Result<Self> {
        check_dense(n_sites, 30)?;
        let dim = 1usize << n_sites;
        if index >= dim {
            return Err(Error::Dimension(format!("basis index {index} outside dimension {dim}")));
        }
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(Self { n_sites, amplitudes })
    }

    /// Wraps amplitudes, rescaling them to unit norm.
    pub fn from_amplitudes(n_sites: usize, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != 1usize << n_sites {
            return Err(Error::Dimension(format!(
                "{} amplitudes for {n_sites} sites",
                amplitudes.len()
            )));
        }
        let nrm = l2(&amplitudes);
        if !(nrm > 0.0) || !nrm.is_finite() {
            return Err(Error::Domain("state has zero or non-finite norm".into()));
        }
        Ok(Self {
            n_sites,
            amplitudes: amplitudes.into_iter().map(|a| a / nrm).collect(),
        })
    }

    /// Column `j` of a spectral decomposition.
    pub fn eigenvector(basis: &SpectralDecomposition, j: usize) -> Result<Self> {
        let dim = basis.energies.len();
        if j >= dim {
            return Err(Error::Dimension(format!("eigenvector {j} outside {dim}")));
        }
        Self::from_amplitudes(basis.n_sites, (0..dim).map(|i| basis.vectors[(i, j)]).collect())
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        l2(&self.amplitudes)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension("state dimensions differ".into()));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `‖self - other‖`.
    pub fn distance(&self, other: &StateVector) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension("state dimensions differ".into()));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    /// Probability of each computational basis state.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `<psi|A|psi>` for a compiled Hermitian operator.
    pub fn expectation(&self, op: &CompiledOperator) -> f64 {
        let mut out = vec![ZERO; self.dim()];
        op.apply(&self.amplitudes, &mut out);
        self.amplitudes.iter().zip(&out).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

fn l2(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Full eigendecomposition with ascending energies.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub n_sites: usize,
    pub energies: Vec<f64>,
    pub vectors: Mat<C64>,
}

pub fn spectral_decompose(op: &OperatorSum) -> Result<SpectralDecomposition> {
    let (energies, vectors) = linalg::eigh(op, DENSE_LIMIT)?;
    Ok(SpectralDecomposition {
        n_sites: op.n_sites(),
        energies,
        vectors,
    })
}

/// Coefficients `a_j = <phi_j|psi>`.
pub fn expand_in_basis(psi: &StateVector, basis: &SpectralDecomposition) -> Result<Vec<C64>> {
    let dim = basis.energies.len();
    if psi.dim() != dim {
        return Err(Error::Dimension(format!(
            "state of dimension {} against basis of {dim}",
            psi.dim()
        )));
    }
    Ok((0..dim)
        .map(|j| (0..dim).map(|i| basis.vectors[(i, j)].conj() * psi.amplitudes[i]).sum())
        .collect())
}

/// Which short-time propagator to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Propagator {
    /// Dense diagonalization of each stage Hamiltonian.
    DenseEigen,
    /// Lanczos approximation of each stage exponential.
    Krylov,
    /// Dense up to [`EvolveOptions::dense_max_sites`], Krylov above.
    Auto,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Initial step; `None` picks one from the local norm of the knots.
    pub initial_dt: Option<f64>,
    /// Required change of each sample under one step halving.
    pub tolerance: f64,
    pub max_halvings: usize,
    pub propagator: Propagator,
    pub dense_max_sites: usize,
    /// Per-step error target of the Lanczos exponential.
    pub krylov_tolerance: f64,
    pub krylov_max_dim: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            initial_dt: None,
            tolerance: 1e-6,
            max_halvings: 12,
            propagator: Propagator::Auto,
            dense_max_sites: 6,
            krylov_tolerance: 1e-12,
            krylov_max_dim: 40,
        }
    }
}

/// Sampled states together with integration statistics.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<(f64, StateVector)>,
    pub steps: usize,
    pub halvings: usize,
    /// Largest sample change under the final halving.
    pub achieved_tolerance: f64,
}

struct CompiledSchedule<'a> {
    schedule: &'a Schedule,
    knots: Vec<CompiledOperator>,
}

impl<'a> CompiledSchedule<'a> {
    fn new(schedule: &'a Schedule) -> Self {
        let knots = schedule.knots().iter().map(|k| k.hamiltonian().compile()).collect();
        Self { schedule, knots }
    }

    /// `out = H(t) psi`.
    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        let i = self.schedule.segment_of(t);
        let w = self.schedule.weight(i, t);
        out.iter_mut().for_each(|v| *v = ZERO);
        if 1.0 - w > 0.0 {
            self.knots[i].apply_add(psi, out, C64::new(1.0 - w, 0.0));
        }
        if w > 0.0 {
            self.knots[i + 1].apply_add(psi, out, C64::new(w, 0.0));
        }
    }
}

/// Evolves `psi0` under `s` and records the state at each sample time.
///
/// Each step applies `exp(-i H(t + 5dt/6) dt/2) exp(-i H(t + dt/6) dt/2)`,
/// the fourth-order commutator-free Magnus step for a Hamiltonian that is
/// linear within the step. Steps never straddle a knot. The run is repeated
/// with the step halved until no sample moves by more than `opts.tolerance`.
pub fn evolve(s: &Schedule, psi0: &StateVector, sample_times: &[f64], opts: &EvolveOptions) -> Result<Trajectory> {
    if psi0.n_sites() != s.n_sites() {
        return Err(Error::Dimension("state and schedule differ in n_sites".into()));
    }
    if (psi0.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Domain("initial state is not normalized".into()));
    }
    check_dense(s.n_sites(), DENSE_LIMIT)?;
    let tf = s.final_time();
    for w in sample_times.windows(2) {
        if w[1] < w[0] {
            return Err(Error::Parameter("sample times must be sorted".into()));
        }
    }
    if let Some(&t) = sample_times.iter().find(|&&t| !(t >= 0.0 && t <= tf + 1e-12)) {
        return Err(Error::Range(format!("sample time {t} outside [0, {tf}]")));
    }
    let dense = match opts.propagator {
        Propagator::DenseEigen => true,
        Propagator::Krylov => false,
        Propagator::Auto => s.n_sites() <= opts.dense_max_sites,
    };
    let dt0 = opts.initial_dt.unwrap_or_else(|| {
        let m = s.knots().iter().map(|k| k.hamiltonian().loc_norm()).fold(0.0, f64::max);
        if m > 0.0 {
            0.25 / m
        } else {
            1.0
        }
    });
    let compiled = CompiledSchedule::new(s);
    let mut dt = dt0;
    let mut prev = run_fixed(&compiled, psi0, sample_times, dt, dense, opts)?;
    let mut halvings = 0;
    loop {
        if halvings >= opts.max_halvings {
            return Err(Error::Integration(format!(
                "no convergence after {halvings} step halvings"
            )));
        }
        dt *= 0.5;
        halvings += 1;
        let next = run_fixed(&compiled, psi0, sample_times, dt, dense, opts)?;
        let mut worst = 0.0f64;
        for ((_, a), (_, b)) in prev.0.iter().zip(&next.0) {
            worst = worst.max(a.distance(b)?);
        }
        if worst < opts.tolerance {
            return Ok(Trajectory {
                samples: next.0,
                steps: next.1,
                halvings,
                achieved_tolerance: worst,
            });
        }
        prev = next;
    }
}

type FixedRun = (Vec<(f64, StateVector)>, usize);

/// `(time offset, duration)` of each exponential in one step, both in units of the step.
const CF4_STAGES: [(f64, f64); 2] = [(1.0 / 6.0, 0.5), (5.0 / 6.0, 0.5)];

fn run_fixed(
    cs: &CompiledSchedule,
    psi0: &StateVector,
    sample_times: &[f64],
    dt: f64,
    dense: bool,
    opts: &EvolveOptions,
) -> Result<FixedRun> {
    let s = cs.schedule;
    let mut marks: Vec<f64> = s.knot_times();
    marks.extend_from_slice(sample_times);
    marks.sort_by(|a, b| a.total_cmp(b));
    marks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut psi = psi0.amplitudes.clone();
    let mut t = 0.0;
    let mut steps = 0;
    let mut samples = Vec::with_capacity(sample_times.len());
    let mut next_sample = 0;
    let record = |t: f64, psi: &[C64], next: &mut usize, out: &mut Vec<(f64, StateVector)>| {
        while *next < sample_times.len() && (sample_times[*next] - t).abs() < 1e-12 {
            out.push((
                sample_times[*next],
                StateVector {
                    n_sites: psi0.n_sites,
                    amplitudes: psi.to_vec(),
                },
            ));
            *next += 1;
        }
    };
    record(t, &psi, &mut next_sample, &mut samples);
    let mut scratch = vec![ZERO; psi.len()];
    for &mark in marks.iter().filter(|&&m| m > 1e-12) {
        let len = mark - t;
        if len <= 0.0 {
            continue;
        }
        let seg = s.segment_of(t + 0.5 * len);
        let constant = s.segment_slope(seg).is_empty();
        let n = if constant {
            1
        } else {
            (len / dt).ceil().max(1.0) as usize
        };
        let h = len / n as f64;
        // A constant segment needs a single exact exponential.
        let stages: &[(f64, f64)] = if constant { &[(0.5, 1.0)] } else { &CF4_STAGES };
        for j in 0..n {
            let t0 = t + j as f64 * h;
            for &(offset, weight) in stages {
                let tm = t0 + offset * h;
                if dense {
                    dense_step(s, tm, weight * h, &mut psi)?;
                } else {
                    let op = |x: &[C64], y: &mut [C64]| cs.apply(tm, x, y);
                    psi = krylov_expm(
                        &op,
                        &psi,
                        weight * h,
                        opts.krylov_tolerance,
                        opts.krylov_max_dim,
                        &mut scratch,
                    )?;
                }
            }
            let nrm = l2(&psi);
            psi.iter_mut().for_each(|a| *a /= nrm);
            steps += 1;
        }
        t = mark;
        record(t, &psi, &mut next_sample, &mut samples);
    }
    if samples.len() != sample_times.len() {
        return Err(Error::Integration("sample times were not reached".into()));
    }
    Ok((samples, steps))
}

fn dense_step(s: &Schedule, tm: f64, h: f64, psi: &mut [C64]) -> Result<()> {
    let hm = s.evaluate(tm)?;
    let (e, u) = linalg::eigh(&hm, DENSE_LIMIT)?;
    let dim = e.len();
    let coeffs: Vec<C64> = (0..dim)
        .map(|j| {
            let a: C64 = (0..dim).map(|i| u[(i, j)].conj() * psi[i]).sum();
            a * C64::from_polar(1.0, -e[j] * h)
        })
        .collect();
    for (i, p) in psi.iter_mut().enumerate() {
        *p = (0..dim).map(|j| u[(i, j)] * coeffs[j]).sum();
    }
    Ok(())
}

/// `exp(-i H dt) psi` from a Lanczos basis, with internal sub-stepping
/// whenever the basis is too small for the full step.
pub fn krylov_expm<F>(
    apply: &F,
    psi: &[C64],
    dt: f64,
    tol: f64,
    max_dim: usize,
    scratch: &mut Vec<C64>,
) -> Result<Vec<C64>>
where
    F: Fn(&[C64], &mut [C64]),
{
    let dim = psi.len();
    let max_dim = max_dim.max(2).min(dim.max(1));
    scratch.resize(dim, ZERO);
    let mut cur = psi.to_vec();
    let mut remaining = dt;
    let mut h = dt;
    let mut guard = 0usize;
    while remaining > 1e-15 * dt.abs().max(1.0) {
        guard += 1;
        if guard > 1_000_000 {
            return Err(Error::Integration("Lanczos sub-stepping did not finish".into()));
        }
        let beta0 = l2(&cur);
        if beta0 == 0.0 {
            return Ok(cur);
        }
        let mut basis: Vec<Vec<C64>> = vec![cur.iter().map(|a| a / beta0).collect()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut accepted: Option<(f64, Vec<C64>)> = None;
        h = h.min(remaining);
        for j in 0..max_dim {
            apply(&basis[j], scratch);
            let w = &mut *scratch;
            let a: f64 = basis[j].iter().zip(w.iter()).map(|(v, x)| (v.conj() * x).re).sum();
            for _ in 0..2 {
                for v in &basis {
                    let c: C64 = v.iter().zip(w.iter()).map(|(v, x)| v.conj() * x).sum();
                    w.iter_mut().zip(v).for_each(|(x, v)| *x -= c * v);
                }
            }
            alpha.push(a);
            let b = l2(w);
            let last = j + 1 == max_dim;
            let breakdown = b <= 1e-13 * (1.0 + a.abs());
            if breakdown {
                let y = small_expm(&alpha, &beta, h)?;
                accepted = Some((h, y));
                break;
            }
            let y = small_expm(&alpha, &beta, h)?;
            let err = b * y.last().map(|c| c.norm()).unwrap_or(0.0);
            if err <= tol {
                accepted = Some((h, y));
                break;
            }
            if last {
                let mut hh = h;
                for _ in 0..60 {
                    hh *= 0.5;
                    let y = small_expm(&alpha, &beta, hh)?;
                    if b * y.last().map(|c| c.norm()).unwrap_or(0.0) <= tol {
                        accepted = Some((hh, y));
                        break;
                    }
                }
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
        let (used, y) = accepted.ok_or_else(|| Error::Integration("Lanczos step failed to converge".into()))?;
        let mut next = vec![ZERO; dim];
        for (c, v) in y.iter().zip(&basis) {
            let c = c * beta0;
            next.iter_mut().zip(v).for_each(|(x, v)| *x += c * v);
        }
        cur = next;
        remaining -= used;
        h = if used < h { used * 1.5 } else { h };
    }
    Ok(cur)
}

/// `exp(-i h T) e_1` for the symmetric tridiagonal `T`.
fn small_expm(alpha: &[f64], beta: &[f64], h: f64) -> Result<Vec<C64>> {
    let m = alpha.len();
    let t = Mat::<f64>::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let (e, q) = linalg::eigh_real(&t)?;
    Ok((0..m)
        .map(|i| (0..m).map(|k| C64::from_polar(q[(0, k)] * q[(i, k)], -e[k] * h)).sum())
        .collect())
}

/// Central moments `g_k = ‖(H - E0)^k psi‖` and `G_{2k} = g_k^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    /// `g_k` for `k = 0..=k_max`.
    pub g: Vec<f64>,
    /// `ln g_k`, finite even where `g_k` would overflow.
    pub ln_g: Vec<f64>,
    /// `G_{2k}` for `k = 0..=k_max`.
    pub big_g: Vec<f64>,
}

pub fn central_moments(psi: &StateVector, h: &OperatorSum, e0: f64, k_max: usize) -> Result<Moments> {
    if psi.n_sites() != h.n_sites() {
        return Err(Error::Dimension("state and operator differ in n_sites".into()));
    }
    let shifted = h.axpy(-e0, &OperatorSum::identity(h.n_sites(), 1.0))?;
    let op = shifted.compile();
    let mut cur = psi.amplitudes.clone();
    let mut next = vec![ZERO; cur.len()];
    let mut ln_g = vec![psi.norm().ln()];
    let mut ln_acc = ln_g[0];
    for _ in 0..k_max {
        op.apply(&cur, &mut next);
        let nrm = l2(&next);
        if nrm == 0.0 {
            ln_g.push(f64::NEG_INFINITY);
            ln_acc = f64::NEG_INFINITY;
            cur.iter_mut().for_each(|x| *x = ZERO);
            continue;
        }
        ln_acc += nrm.ln();
        ln_g.push(ln_acc);
        std::mem::swap(&mut cur, &mut next);
        cur.iter_mut().for_each(|x| *x /= nrm);
    }
    let g: Vec<f64> = ln_g.iter().map(|l| l.exp()).collect();
    let big_g = ln_g.iter().map(|l| (2.0 * l).exp()).collect();
    Ok(Moments { g, ln_g, big_g })
}

/// Bound attached to a leakage profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileBound {
    pub kind: PolyKind,
    pub delta: f64,
    pub norm: NormKind,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub bin_width: f64,
    /// Signed histogram spans `[-half_range, half_range]` around `E0`.
    pub half_range: f64,
    pub bound: Option<ProfileBound>,
}

/// Per-sample spectral weights around the initial energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub time: f64,
    /// Cumulative X-norm variation divided by `n`.
    pub lambda_t: f64,
    /// Cumulative variation in the bound's norm.
    pub variation: f64,
    pub mean_energy: f64,
    /// Signed histogram of `|a_j|^2` over `E_j - E0`.
    pub signed_weights: Vec<f64>,
    /// Histogram of `|a_j|^2` over `|E_j - E0|`.
    pub abs_weights: Vec<f64>,
    pub total_weight: f64,
    /// `ε_t(d)` on the d-grid.
    pub leakage: Vec<f64>,
    pub bounds: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageProfile {
    pub n_sites: usize,
    pub e0: f64,
    pub bin_width: f64,
    /// Left edges of the signed bins.
    pub signed_edges: Vec<f64>,
    pub d_grid: Vec<f64>,
    pub samples: Vec<ProfileSample>,
}

impl LeakageProfile {
    /// Number of bins in the absolute-difference histogram.
    pub fn abs_bins(&self) -> usize {
        self.samples.first().map(|s| s.abs_weights.len()).unwrap_or(0)
    }
}

/// Decomposes `H(t)` at every sample and measures leakage on `d_grid`.
pub fn leakage_profile(
    traj: &Trajectory,
    s: &Schedule,
    e0: f64,
    d_grid: &[f64],
    cfg: &ProfileConfig,
) -> Result<LeakageProfile> {
    if !(cfg.bin_width > 0.0) || !(cfg.half_range > 0.0) {
        return Err(Error::Parameter("bin width and range must be positive".into()));
    }
    let n = s.n_sites();
    let nf = n as f64;
    let n_signed = (2.0 * cfg.half_range / cfg.bin_width).ceil() as usize;
    let n_abs = (cfg.half_range / cfg.bin_width).ceil() as usize;
    let samples = traj
        .samples
        .par_iter()
        .map(|(t, psi)| -> Result<ProfileSample> {
            let h = s.evaluate(*t)?;
            let dec = spectral_decompose(&h)?;
            let a = expand_in_basis(psi, &dec)?;
            let w: Vec<f64> = a.iter().map(|c| c.norm_sqr()).collect();
            let mut signed = vec![0.0; n_signed];
            let mut abs = vec![0.0; n_abs];
            for (e, &p) in dec.energies.iter().zip(&w) {
                let diff = e - e0;
                let si = ((diff + cfg.half_range) / cfg.bin_width).floor();
                let si = (si.max(0.0) as usize).min(n_signed - 1);
                signed[si] += p;
                let ai = ((diff.abs() / cfg.bin_width).floor() as usize).min(n_abs - 1);
                abs[ai] += p;
            }
            let leakage = d_grid
                .iter()
                .map(|&d| {
                    dec.energies
                        .iter()
                        .zip(&w)
                        .filter(|(e, _)| (*e - e0).abs() >= d * nf)
                        .map(|(_, p)| p)
                        .sum::<f64>()
                        .sqrt()
                })
                .collect();
            let mean_energy = dec.energies.iter().zip(&w).map(|(e, p)| e * p).sum();
            let lambda_t = s.total_variation(NormKind::X, 0.0, *t)?.lambda;
            let (variation, bounds) = match cfg.bound {
                Some(b) => {
                    let var = s.total_variation(b.norm, 0.0, *t)?.value;
                    let vals = d_grid
                        .iter()
                        .map(|&d| leakage_value(b.kind, var, b.delta, d * nf))
                        .collect::<Result<Vec<f64>>>()?;
                    (var, Some(vals))
                }
                None => (lambda_t * nf, None),
            };
            Ok(ProfileSample {
                time: *t,
                lambda_t,
                variation,
                mean_energy,
                signed_weights: signed,
                abs_weights: abs,
                total_weight: w.iter().sum(),
                leakage,
                bounds,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LeakageProfile {
        n_sites: n,
        e0,
        bin_width: cfg.bin_width,
        signed_edges: (0..n_signed)
            .map(|i| -cfg.half_range + i as f64 * cfg.bin_width)
            .collect(),
        d_grid: d_grid.to_vec(),
        samples,
    })
}
