//! Hamiltonian families: random 2-local schedules, commuting cores with a
//! transverse drive, parity-check codes, p-spin hypergraphs, the MIS/PXP
//! construction, detuning fields and annealing paths.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{check_dense, OperatorSum, PauliTerm, C64};
use crate::schedule::{CaseTag, Schedule};

/// Generator used by every seeded routine in the crate.
pub type ModelRng = Xoshiro256StarStar;

pub fn rng_from_seed(seed: u64) -> ModelRng {
    ModelRng::seed_from_u64(seed)
}

const GROUPING_ATTEMPTS: usize = 2000;
const CODEWORD_LIMIT: usize = 20;
const PXP_CHECK_LIMIT: usize = 16;

fn check_site(n: usize, s: usize) -> Result<()> {
    if s >= n {
        return Err(Error::Dimension(format!("site {s} outside 0..{n}")));
    }
    Ok(())
}

fn z_string(n: usize, sites: &[usize], c: f64) -> Result<OperatorSum> {
    let f: Vec<(usize, char)> = sites.iter().map(|&s| (s, 'Z')).collect();
    OperatorSum::string(n, &f, c)
}

fn mask_of(sites: &[usize]) -> u64 {
    sites.iter().fold(0u64, |m, &s| m | (1u64 << s))
}

/// Random operator with all single-site and all two-site Pauli terms,
/// coefficients uniform in `[-1, 1]`.
pub fn random_two_local_operator(n: usize, rng: &mut ModelRng) -> Result<OperatorSum> {
    let mut op = OperatorSum::zero(n);
    const P: [char; 3] = ['X', 'Y', 'Z'];
    for i in 0..n {
        for a in P {
            let c: f64 = rng.random_range(-1.0..=1.0);
            op = op.add(&OperatorSum::single(n, i, a, c)?)?;
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            for a in P {
                for b in P {
                    let c: f64 = rng.random_range(-1.0..=1.0);
                    op = op.add(&OperatorSum::string(n, &[(i, a), (j, b)], c)?)?;
                }
            }
        }
    }
    Ok(op)
}

/// Parameters of [`random_two_local_schedule`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrengthProfile {
    /// Local-norm bound `M` of every knot.
    pub m_bound: f64,
    /// Requested variation density `λ_T = Λ_T / n` before the local-norm cap.
    pub lambda_total: f64,
    /// Number of linear segments.
    pub segments: usize,
    /// Final time `T`.
    pub duration: f64,
}

impl Default for StrengthProfile {
    fn default() -> Self {
        Self {
            m_bound: 1.0,
            lambda_total: 0.5,
            segments: 4,
            duration: 1.0,
        }
    }
}

/// Random all-to-all 2-local schedule tagged as the general case.
///
/// `H(0)` is a random 2-local operator scaled to local norm `M`. Each segment
/// adds an independent random 2-local increment of termwise norm
/// `λ_T n / segments`. If any knot then exceeds local norm `M`, all knots are
/// scaled down together so the largest equals `M`; the realized variation is
/// read back from the schedule.
pub fn random_two_local_schedule(n: usize, seed: u64, profile: &StrengthProfile) -> Result<Schedule> {
    if n < 2 {
        return Err(Error::Parameter(format!("need n >= 2, got {n}")));
    }
    if !(profile.m_bound > 0.0) || !(profile.lambda_total >= 0.0) || !(profile.duration > 0.0) {
        return Err(Error::Parameter("profile needs M > 0, λ_T >= 0, T > 0".into()));
    }
    if profile.segments == 0 {
        return Err(Error::Parameter("profile needs at least one segment".into()));
    }
    let mut rng = rng_from_seed(seed);
    let g0 = random_two_local_operator(n, &mut rng)?;
    let mut h = g0.scale(profile.m_bound / g0.loc_norm());
    let step = profile.lambda_total * n as f64 / profile.segments as f64;
    let mut hams = vec![h.clone()];
    for _ in 0..profile.segments {
        let g = random_two_local_operator(n, &mut rng)?;
        let inc = g.scale(step / g.x_norm());
        h = h.add(&inc)?;
        hams.push(h.clone());
    }
    let peak = hams.iter().map(OperatorSum::loc_norm).fold(0.0, f64::max);
    let shrink = if peak > profile.m_bound {
        profile.m_bound / peak
    } else {
        1.0
    };
    let dt = profile.duration / profile.segments as f64;
    let knots = hams
        .into_iter()
        .enumerate()
        .map(|(i, h)| (i as f64 * dt, h.scale(shrink)))
        .collect();
    Schedule::new(knots)?.with_case(CaseTag::General, 2.0, profile.m_bound)
}

/// Mutually commuting cores for [`commuting_core_model`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CoreKind {
    /// `Σ_j Z_j Z_{j+1}` on an open chain.
    IsingChain,
    /// `Σ_{i<j} Z_i Z_j`.
    IsingAllPairs,
    /// `-Σ_c Π_{j∈c} Z_j` over the listed checks.
    DiagonalCode { checks: Vec<Vec<usize>> },
}

impl CoreKind {
    pub fn hamiltonian(&self, n: usize) -> Result<OperatorSum> {
        let mut h = OperatorSum::zero(n);
        match self {
            Self::IsingChain => {
                for j in 0..n.saturating_sub(1) {
                    h = h.add(&z_string(n, &[j, j + 1], 1.0)?)?;
                }
            }
            Self::IsingAllPairs => {
                for i in 0..n {
                    for j in i + 1..n {
                        h = h.add(&z_string(n, &[i, j], 1.0)?)?;
                    }
                }
            }
            Self::DiagonalCode { checks } => {
                for c in checks {
                    h = h.add(&z_string(n, c, -1.0)?)?;
                }
            }
        }
        Ok(h)
    }
}

/// Linear transverse ramp `V(t) = (λ t / T) Σ_j X_j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransverseRamp {
    pub lambda: f64,
    pub duration: f64,
}

pub fn transverse_field(n: usize, strength: f64) -> Result<OperatorSum> {
    let mut v = OperatorSum::zero(n);
    for j in 0..n {
        v = v.add(&OperatorSum::single(n, j, 'X', strength)?)?;
    }
    Ok(v)
}

/// Commuting core plus a transverse ramp, tagged as the commuting-core case
/// with `q = 1` and `M = loc(H_C)`.
pub fn commuting_core_model(n: usize, core: &CoreKind, drive: TransverseRamp) -> Result<Schedule> {
    if n < 2 {
        return Err(Error::Parameter(format!("need n >= 2, got {n}")));
    }
    commuting_core_schedule(core.hamiltonian(n)?, drive)
}

/// Same as [`commuting_core_model`] for an arbitrary core operator.
pub fn commuting_core_schedule(core: OperatorSum, drive: TransverseRamp) -> Result<Schedule> {
    if !core.terms_mutually_commute() {
        return Err(Error::Case("core terms do not commute".into()));
    }
    if !(drive.duration > 0.0) || !drive.lambda.is_finite() {
        return Err(Error::Parameter("ramp needs T > 0 and finite λ".into()));
    }
    let n = core.n_sites();
    let m = core.loc_norm();
    Schedule::new_split(vec![
        (0.0, core.clone(), OperatorSum::zero(n)),
        (drive.duration, core, transverse_field(n, drive.lambda)?),
    ])?
    .with_case(CaseTag::CommutingCore, 1.0, m)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CheckKind {
    X,
    Z,
}

/// One parity check: a product of `X` or `Z` over `sites`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Check {
    pub kind: CheckKind,
    pub sites: Vec<usize>,
}

impl Check {
    pub fn z(sites: Vec<usize>) -> Self {
        Self {
            kind: CheckKind::Z,
            sites,
        }
    }

    pub fn x(sites: Vec<usize>) -> Self {
        Self {
            kind: CheckKind::X,
            sites,
        }
    }

    pub fn mask(&self) -> u64 {
        mask_of(&self.sites)
    }
}

/// A stabilizer-type code defined by its checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodeInstance {
    pub n: usize,
    pub checks: Vec<Check>,
    /// Largest number of checks acting on one site.
    pub p_c: usize,
    /// Largest check weight.
    pub q_c: usize,
    /// Zero-violation bitstrings, listed for classical codes with `n <= 20`.
    pub codewords: Option<Vec<u64>>,
}

impl CodeInstance {
    pub fn is_classical(&self) -> bool {
        self.checks.iter().all(|c| c.kind == CheckKind::Z)
    }

    /// Number of violated `Z` checks on bitstring `z`.
    pub fn violations(&self, z: u64) -> usize {
        self.checks
            .iter()
            .filter(|c| c.kind == CheckKind::Z && (c.mask() & z).count_ones() % 2 == 1)
            .count()
    }

    /// Minimum Hamming distance between distinct codewords.
    pub fn distance(&self) -> Option<u32> {
        let cw = self.codewords.as_ref()?;
        let mut best: Option<u32> = None;
        for (i, a) in cw.iter().enumerate() {
            for b in &cw[i + 1..] {
                let d = (a ^ b).count_ones();
                best = Some(best.map_or(d, |x| x.min(d)));
            }
        }
        best
    }

    /// `H_C = -Σ_c Π_{j∈c} P_j`.
    pub fn hamiltonian(&self) -> Result<OperatorSum> {
        let mut h = OperatorSum::zero(self.n);
        for c in &self.checks {
            let mask = c.mask();
            let (x, z) = match c.kind {
                CheckKind::X => (mask, 0),
                CheckKind::Z => (0, mask),
            };
            h.add_term(PauliTerm::new(self.n, x, z, C64::new(-1.0, 0.0))?)?;
        }
        Ok(h)
    }
}

/// Builds a code from its checks and returns it with `H_C`.
pub fn parity_check_code(n: usize, checks: Vec<Check>) -> Result<(CodeInstance, OperatorSum)> {
    check_dense(n, 64)?;
    let mut per_site = vec![0usize; n];
    for c in &checks {
        if c.sites.is_empty() {
            return Err(Error::Parameter("empty check".into()));
        }
        let distinct: BTreeSet<usize> = c.sites.iter().copied().collect();
        if distinct.len() != c.sites.len() {
            return Err(Error::Parameter(format!("check {:?} repeats a site", c.sites)));
        }
        for &s in &c.sites {
            check_site(n, s)?;
            per_site[s] += 1;
        }
    }
    for (i, a) in checks.iter().enumerate() {
        for b in &checks[i + 1..] {
            if a.kind != b.kind && (a.mask() & b.mask()).count_ones() % 2 == 1 {
                return Err(Error::Case(format!(
                    "checks {:?} and {:?} overlap on an odd number of sites",
                    a.sites, b.sites
                )));
            }
        }
    }
    let mut code = CodeInstance {
        n,
        p_c: per_site.iter().copied().max().unwrap_or(0),
        q_c: checks.iter().map(|c| c.sites.len()).max().unwrap_or(0),
        checks,
        codewords: None,
    };
    if code.is_classical() && n <= CODEWORD_LIMIT {
        code.codewords = Some((0..1u64 << n).filter(|&z| code.violations(z) == 0).collect());
    }
    let h = code.hamiltonian()?;
    Ok((code, h))
}

/// `Z_j Z_{j+1}` checks on an open chain, or a ring when `ring` is set.
pub fn repetition_checks(n: usize, ring: bool) -> Vec<Check> {
    let mut v: Vec<Check> = (0..n.saturating_sub(1)).map(|j| Check::z(vec![j, j + 1])).collect();
    if ring && n > 2 {
        v.push(Check::z(vec![n - 1, 0]));
    }
    v
}

/// Random regular bipartite matching of `degree` stubs per site into groups of
/// `group` distinct sites, rejecting repeated groups. Returns the groups and
/// whether every stub was used.
fn stub_grouping(n: usize, degree: usize, group: usize, rng: &mut ModelRng) -> Result<(Vec<Vec<usize>>, bool)> {
    if group == 0 || group > n {
        return Err(Error::Parameter(format!(
            "group size {group} incompatible with n = {n}"
        )));
    }
    let total = n * degree;
    let exact = total.is_multiple_of(group);
    let used = total - total % group;
    let mut stubs: Vec<usize> = (0..n).flat_map(|s| std::iter::repeat_n(s, degree)).collect();
    for _ in 0..GROUPING_ATTEMPTS {
        stubs.shuffle(rng);
        let mut seen = BTreeSet::new();
        let mut groups = Vec::with_capacity(used / group);
        let ok = stubs[..used].chunks(group).all(|ch| {
            let mut g = ch.to_vec();
            g.sort_unstable();
            let distinct = g.windows(2).all(|w| w[0] != w[1]);
            let fresh = distinct && seen.insert(g.clone());
            groups.push(g);
            fresh
        });
        if ok {
            groups.sort();
            return Ok((groups, exact));
        }
    }
    Err(Error::Parameter(format!(
        "no simple {group}-uniform grouping with degree {degree} on {n} sites found"
    )))
}

/// Random `(column weight, row weight)` classical LDPC checks.
pub fn random_ldpc_checks(n: usize, col_weight: usize, row_weight: usize, rng: &mut ModelRng) -> Result<Vec<Check>> {
    if !(n * col_weight).is_multiple_of(row_weight) {
        return Err(Error::Parameter(format!(
            "n * column weight = {} is not divisible by row weight {row_weight}",
            n * col_weight
        )));
    }
    let (groups, _) = stub_grouping(n, col_weight, row_weight, rng)?;
    Ok(groups.into_iter().map(Check::z).collect())
}

/// Random simple `degree`-regular graph as a sorted edge list.
pub fn random_regular_graph(n: usize, degree: usize, rng: &mut ModelRng) -> Result<Vec<(usize, usize)>> {
    if !(n * degree).is_multiple_of(2) || degree >= n {
        return Err(Error::Parameter(format!(
            "no simple {degree}-regular graph on {n} vertices"
        )));
    }
    let (groups, _) = stub_grouping(n, degree, 2, rng)?;
    Ok(groups.into_iter().map(|g| (g[0], g[1])).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperedge {
    pub sites: Vec<usize>,
    pub coupling: i8,
}

/// Weighted `q`-uniform hypergraph for `H_L = Σ J Z...Z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypergraphInstance {
    pub n: usize,
    pub q_body: usize,
    pub p_degree: usize,
    pub hyperedges: Vec<Hyperedge>,
    /// False when `n p` is not divisible by `q` and some sites have degree `p - 1`.
    pub exact_regular: bool,
}

impl HypergraphInstance {
    pub fn new(n: usize, hyperedges: Vec<Hyperedge>) -> Result<Self> {
        let q_body = hyperedges.first().map_or(0, |h| h.sites.len());
        let mut deg = vec![0usize; n];
        for h in &hyperedges {
            if h.sites.len() != q_body {
                return Err(Error::Parameter("hyperedges have mixed sizes".into()));
            }
            if h.coupling != 1 && h.coupling != -1 {
                return Err(Error::Parameter(format!("coupling {} is not ±1", h.coupling)));
            }
            let distinct: BTreeSet<usize> = h.sites.iter().copied().collect();
            if distinct.len() != h.sites.len() {
                return Err(Error::Parameter(format!("hyperedge {:?} repeats a site", h.sites)));
            }
            for &s in &h.sites {
                check_site(n, s)?;
                deg[s] += 1;
            }
        }
        let p_degree = deg.iter().copied().max().unwrap_or(0);
        let exact_regular = deg.iter().all(|&d| d == p_degree);
        Ok(Self {
            n,
            q_body,
            p_degree,
            hyperedges,
            exact_regular,
        })
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for h in &self.hyperedges {
            for &s in &h.sites {
                deg[s] += 1;
            }
        }
        deg
    }

    pub fn hamiltonian(&self) -> Result<OperatorSum> {
        let mut op = OperatorSum::zero(self.n);
        for h in &self.hyperedges {
            op = op.add(&z_string(self.n, &h.sites, h.coupling as f64)?)?;
        }
        Ok(op)
    }
}

/// Random `p`-regular `q`-uniform hypergraph with `±1` couplings.
pub fn pspin_model(n: usize, p_degree: usize, q_body: usize, seed: u64) -> Result<(HypergraphInstance, OperatorSum)> {
    if q_body < 4 {
        log::warn!("p-spin landscape with q = {q_body} < 4 may not cluster");
    }
    let mut rng = rng_from_seed(seed);
    let (groups, exact) = stub_grouping(n, p_degree, q_body, &mut rng)?;
    if !exact {
        log::warn!(
            "n p = {} not divisible by q = {q_body}; using a nearest-regular hypergraph",
            n * p_degree
        );
    }
    let edges = groups
        .into_iter()
        .map(|sites| Hyperedge {
            sites,
            coupling: if rng.random::<bool>() { 1 } else { -1 },
        })
        .collect();
    let mut inst = HypergraphInstance::new(n, edges)?;
    inst.p_degree = p_degree;
    inst.q_body = q_body;
    inst.exact_regular = exact;
    let h = inst.hamiltonian()?;
    Ok((inst, h))
}

/// Maximum-independent-set encoding on a simple graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MisModel {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    /// `Σ_j Z_j`.
    pub h_v: OperatorSum,
    /// `Σ_{ij} (1 - Z_i)(1 - Z_j)`.
    pub h_e: OperatorSum,
    /// `Σ_i Π_{j~i} (1 + Z_j)/2 X_i`, to be scaled by `λ`.
    pub pxp_unit: OperatorSum,
}

pub fn validate_simple_graph(n: usize, edges: &[(usize, usize)]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for &(a, b) in edges {
        check_site(n, a)?;
        check_site(n, b)?;
        if a == b {
            return Err(Error::Parameter(format!("self-loop at {a}")));
        }
        if !seen.insert((a.min(b), a.max(b))) {
            return Err(Error::Parameter(format!("repeated edge ({a}, {b})")));
        }
    }
    Ok(())
}

pub fn mis_model(n: usize, edges: &[(usize, usize)]) -> Result<MisModel> {
    validate_simple_graph(n, edges)?;
    let mut h_v = OperatorSum::zero(n);
    for j in 0..n {
        h_v = h_v.add(&OperatorSum::single(n, j, 'Z', 1.0)?)?;
    }
    let mut h_e = OperatorSum::zero(n);
    let mut nbrs = vec![Vec::new(); n];
    for &(a, b) in edges {
        h_e = h_e
            .add(&OperatorSum::identity(n, 1.0))?
            .sub(&z_string(n, &[a], 1.0)?)?
            .sub(&z_string(n, &[b], 1.0)?)?
            .add(&z_string(n, &[a, b], 1.0)?)?;
        nbrs[a].push(b);
        nbrs[b].push(a);
    }
    let mut pxp = OperatorSum::zero(n);
    for (i, nb) in nbrs.iter().enumerate() {
        let weight = 0.5f64.powi(nb.len() as i32);
        for subset in 0..1u64 << nb.len() {
            let z = nb
                .iter()
                .enumerate()
                .filter(|(k, _)| subset >> k & 1 == 1)
                .fold(0u64, |m, (_, &j)| m | 1 << j);
            pxp.add_term(PauliTerm::new(n, 1 << i, z, C64::new(weight, 0.0))?)?;
        }
    }
    Ok(MisModel {
        n,
        edges: edges.to_vec(),
        h_v,
        h_e,
        pxp_unit: pxp,
    })
}

impl MisModel {
    pub fn v_pxp(&self, lambda: f64) -> OperatorSum {
        self.pxp_unit.scale(lambda)
    }

    /// Whether bitstring `z` (bit set = vertex chosen) is an independent set.
    pub fn is_independent(&self, z: u64) -> bool {
        self.edges.iter().all(|&(a, b)| !(z >> a & 1 == 1 && z >> b & 1 == 1))
    }

    /// Largest independent set size by exhaustive search.
    pub fn max_independent_set_size(&self) -> Result<u32> {
        check_dense(self.n, 26)?;
        Ok((0..1u64 << self.n)
            .filter(|&z| self.is_independent(z))
            .map(u64::count_ones)
            .max()
            .unwrap_or(0))
    }

    /// Frobenius norm of `(1 - P_0) V P_0`, where `P_0` projects onto the
    /// `H_E = 0` subspace, computed by applying the unit-strength `V` to every
    /// independent set so the dyadic coefficients cancel exactly.
    pub fn cross_block_norm(&self, lambda: f64) -> Result<f64> {
        check_dense(self.n, PXP_CHECK_LIMIT)?;
        let v = self.pxp_unit.compile();
        let dim = 1usize << self.n;
        let mut e = vec![C64::new(0.0, 0.0); dim];
        let mut out = vec![C64::new(0.0, 0.0); dim];
        let mut acc = 0.0;
        for z in 0..dim {
            if !self.is_independent(z as u64) {
                continue;
            }
            e[z] = C64::new(1.0, 0.0);
            v.apply(&e, &mut out);
            e[z] = C64::new(0.0, 0.0);
            acc += out
                .iter()
                .enumerate()
                .filter(|(y, _)| !self.is_independent(*y as u64))
                .map(|(_, a)| a.norm_sqr())
                .sum::<f64>();
        }
        Ok(lambda.abs() * acc.sqrt())
    }
}

/// Standard normal draws `h_j` behind [`detuning_field`].
pub fn detuning_coefficients(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// `(1/n^2) Σ_j h_j Z_j` with standard normal `h_j`.
pub fn detuning_field(n: usize, seed: u64) -> Result<OperatorSum> {
    detuning_from(&detuning_coefficients(n, seed))
}

pub fn detuning_from(h: &[f64]) -> Result<OperatorSum> {
    let n = h.len();
    let scale = 1.0 / (n * n).max(1) as f64;
    let mut op = OperatorSum::zero(n);
    for (j, &c) in h.iter().enumerate() {
        op = op.add(&OperatorSum::single(n, j, 'Z', c * scale)?)?;
    }
    Ok(op)
}

/// Interpolation `H(t_i) = s_i H_L + (1 - s_i) H_M` through `(t_i, s_i)` knots.
pub fn adiabatic_schedule(h_l: &OperatorSum, h_m: &OperatorSum, knots: &[(f64, f64)]) -> Result<Schedule> {
    if h_l.n_sites() != h_m.n_sites() {
        return Err(Error::Dimension("H_L and H_M act on different sizes".into()));
    }
    for &(_, s) in knots {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Parameter(format!("s = {s} outside [0, 1]")));
        }
    }
    if knots.windows(2).any(|w| w[1].1 < w[0].1) {
        return Err(Error::Parameter("s knots must be non-decreasing".into()));
    }
    let ks = knots
        .iter()
        .map(|&(t, s)| Ok((t, h_l.scale(s).add(&h_m.scale(1.0 - s))?)))
        .collect::<Result<Vec<_>>>()?;
    Schedule::new(ks)
}

/// `Λ = ((1 - s★)/s★) ‖H_M‖_X`, the variation of `H/s` from `s★` to 1.
pub fn tail_variation(s_star: f64, h_m: &OperatorSum) -> Result<f64> {
    if !(s_star > 0.0 && s_star <= 1.0) {
        return Err(Error::Parameter(format!("s★ = {s_star} outside (0, 1]")));
    }
    Ok((1.0 - s_star) / s_star * h_m.x_norm())
}

/// Rescaled tail `H_L + λ(t) H_M` with `λ` falling linearly from
/// `(1 - s★)/s★` to 0 over `duration`, split as core `H_L` and perturbation
/// `λ(t) H_M`.
pub fn tail_schedule(h_l: &OperatorSum, h_m: &OperatorSum, s_star: f64, duration: f64) -> Result<Schedule> {
    tail_variation(s_star, h_m)?;
    if !(duration > 0.0) {
        return Err(Error::Parameter("tail duration must be positive".into()));
    }
    let lam = (1.0 - s_star) / s_star;
    Schedule::new_split(vec![
        (0.0, h_l.clone(), h_m.scale(lam)),
        (duration, h_l.clone(), OperatorSum::zero(h_l.n_sites())),
    ])
}

fn meaningful_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_header(line: &str) -> Option<&str> {
    let rest = line.strip_prefix('n')?.trim_start();
    Some(rest.strip_prefix('=')?.trim())
}

fn parse_usize(lineno: usize, tok: &str) -> Result<usize> {
    tok.parse()
        .map_err(|_| Error::parse(lineno, format!("expected a site index, found `{tok}`")))
}

/// Tokens of each meaningful line, keyed by line number.
type Rows = Vec<(usize, Vec<String>)>;

/// Reads an optional `n = <sites>` header followed by lines of integers.
fn parse_rows(text: &str) -> Result<(Option<usize>, Rows)> {
    let mut n = None;
    let mut rows = Vec::new();
    for (lineno, line) in meaningful_lines(text) {
        if let Some(v) = parse_header(line) {
            if n.is_some() || !rows.is_empty() {
                return Err(Error::parse(lineno, "header must come first"));
            }
            n = Some(parse_usize(lineno, v)?);
            continue;
        }
        rows.push((lineno, line.split_whitespace().map(str::to_owned).collect()));
    }
    Ok((n, rows))
}

fn infer_n(n: Option<usize>, max_site: Option<usize>) -> usize {
    n.unwrap_or_else(|| max_site.map_or(0, |m| m + 1))
}

/// Edge list: optional `n = N` header, then one `i j` pair per line.
pub fn parse_edge_list(text: &str) -> Result<(usize, Vec<(usize, usize)>)> {
    let (n, rows) = parse_rows(text)?;
    let mut edges = Vec::new();
    for (lineno, toks) in rows {
        if toks.len() != 2 {
            return Err(Error::parse(lineno, "an edge needs exactly two endpoints"));
        }
        edges.push((parse_usize(lineno, &toks[0])?, parse_usize(lineno, &toks[1])?));
    }
    let n = infer_n(n, edges.iter().map(|&(a, b)| a.max(b)).max());
    validate_simple_graph(n, &edges)?;
    Ok((n, edges))
}

pub fn format_edge_list(n: usize, edges: &[(usize, usize)]) -> String {
    let mut s = format!("n = {n}\n");
    for (a, b) in edges {
        let _ = writeln!(s, "{a} {b}");
    }
    s
}

/// Check list: optional `n = N` header, then `X i j ...` or `Z i j ...` per
/// line; a line of bare indices is a `Z` check.
pub fn parse_check_list(text: &str) -> Result<(usize, Vec<Check>)> {
    let (n, rows) = parse_rows(text)?;
    let mut checks = Vec::new();
    for (lineno, toks) in rows {
        let (kind, rest) = match toks[0].as_str() {
            "X" | "x" => (CheckKind::X, &toks[1..]),
            "Z" | "z" => (CheckKind::Z, &toks[1..]),
            _ => (CheckKind::Z, &toks[..]),
        };
        if rest.is_empty() {
            return Err(Error::parse(lineno, "check has no sites"));
        }
        let sites = rest.iter().map(|t| parse_usize(lineno, t)).collect::<Result<_>>()?;
        checks.push(Check { kind, sites });
    }
    let n = infer_n(n, checks.iter().flat_map(|c| c.sites.iter().copied()).max());
    Ok((n, checks))
}

pub fn format_check_list(n: usize, checks: &[Check]) -> String {
    let mut s = format!("n = {n}\n");
    for c in checks {
        let k = match c.kind {
            CheckKind::X => 'X',
            CheckKind::Z => 'Z',
        };
        let sites: Vec<String> = c.sites.iter().map(usize::to_string).collect();
        let _ = writeln!(s, "{k} {}", sites.join(" "));
    }
    s
}

/// Hyperedge list: optional `n = N` header, then `J i1 ... iq` per line with
/// `J` equal to `+1` or `-1`.
pub fn parse_hyperedge_list(text: &str) -> Result<HypergraphInstance> {
    let (n, rows) = parse_rows(text)?;
    let mut edges = Vec::new();
    for (lineno, toks) in rows {
        let coupling: i8 = toks[0]
            .trim_start_matches('+')
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad coupling `{}`", toks[0])))?;
        if toks.len() < 2 {
            return Err(Error::parse(lineno, "hyperedge has no sites"));
        }
        let sites = toks[1..]
            .iter()
            .map(|t| parse_usize(lineno, t))
            .collect::<Result<_>>()?;
        edges.push(Hyperedge { sites, coupling });
    }
    let n = infer_n(n, edges.iter().flat_map(|e| e.sites.iter().copied()).max());
    HypergraphInstance::new(n, edges)
}

pub fn format_hyperedge_list(h: &HypergraphInstance) -> String {
    let mut s = format!("n = {}\n", h.n);
    for e in &h.hyperedges {
        let sites: Vec<String> = e.sites.iter().map(usize::to_string).collect();
        let _ = writeln!(s, "{:+} {}", e.coupling, sites.join(" "));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::NormKind;
    use proptest::prelude::*;

    #[test]
    fn two_local_schedule_is_reproducible_and_tagged() {
        let p = StrengthProfile::default();
        let a = random_two_local_schedule(5, 7, &p).unwrap();
        let b = random_two_local_schedule(5, 7, &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.case(), Some(CaseTag::General));
        for k in a.knots() {
            assert!(k.core.max_locality() <= 2);
            assert!(k.core.loc_norm() <= 1.0 + 1e-12);
        }
        let peak = a.knots().iter().map(|k| k.core.loc_norm()).fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 1e-12);
        assert_ne!(a, random_two_local_schedule(5, 8, &p).unwrap());
    }

    #[test]
    fn zero_strength_is_constant() {
        let p = StrengthProfile {
            lambda_total: 0.0,
            ..Default::default()
        };
        let s = random_two_local_schedule(4, 1, &p).unwrap();
        let tv = s.total_variation(NormKind::X, 0.0, s.final_time()).unwrap();
        assert_eq!(tv.value, 0.0);
        assert!((s.knots()[0].core.loc_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uncapped_increments_give_requested_variation() {
        let p = StrengthProfile {
            m_bound: 50.0,
            lambda_total: 0.1,
            segments: 3,
            duration: 2.0,
        };
        let s = random_two_local_schedule(4, 3, &p).unwrap();
        let tv = s.total_variation(NormKind::X, 0.0, 2.0).unwrap();
        assert!((tv.value - 0.4).abs() < 1e-10, "{}", tv.value);
    }

    #[test]
    fn ising_ramp_variation() {
        let s = commuting_core_model(
            4,
            &CoreKind::IsingChain,
            TransverseRamp {
                lambda: 0.2,
                duration: 1.0,
            },
        )
        .unwrap();
        assert_eq!(s.case(), Some(CaseTag::CommutingCore));
        let tv = s.total_variation(NormKind::X, 0.0, 1.0).unwrap();
        assert!((tv.value - 0.8).abs() < 1e-12);
        let all = commuting_core_model(
            4,
            &CoreKind::IsingAllPairs,
            TransverseRamp {
                lambda: 0.1,
                duration: 1.0,
            },
        )
        .unwrap();
        assert!((all.knots()[0].core.loc_norm() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn non_commuting_core_is_rejected() {
        let core = OperatorSum::from_label("XI", 1.0)
            .unwrap()
            .add(&OperatorSum::from_label("ZI", 1.0).unwrap())
            .unwrap();
        let r = commuting_core_schedule(
            core,
            TransverseRamp {
                lambda: 0.1,
                duration: 1.0,
            },
        );
        assert!(matches!(r, Err(Error::Case(_))));
    }

    #[test]
    fn repetition_code_words() {
        let (code, h) = parity_check_code(4, repetition_checks(4, false)).unwrap();
        assert_eq!(code.codewords.as_deref(), Some(&[0b0000u64, 0b1111][..]));
        assert_eq!(code.p_c, 2);
        assert_eq!(code.q_c, 2);
        assert!(h.is_diagonal());
        assert!(h.loc_norm() <= code.p_c as f64);
        assert_eq!(code.distance(), Some(4));
    }

    #[test]
    fn single_check_counts_odd_states() {
        let (code, h) = parity_check_code(2, vec![Check::z(vec![0, 1])]).unwrap();
        let e = h.diagonal_energies().unwrap();
        for z in 0..4u64 {
            let odd = z.count_ones() % 2 == 1;
            assert_eq!(code.violations(z), odd as usize);
            assert_eq!(e[z as usize], if odd { 1.0 } else { -1.0 });
        }
        assert_eq!(code.codewords.as_deref(), Some(&[0u64, 3][..]));
    }

    #[test]
    fn css_commutation_is_checked() {
        let ok = parity_check_code(
            4,
            vec![
                Check::z(vec![0, 1, 2, 3]),
                Check::x(vec![0, 1, 2, 3]),
                Check::x(vec![0, 1]),
            ],
        );
        let (code, h) = ok.unwrap();
        assert!(!code.is_classical());
        assert!(code.codewords.is_none());
        assert!(h.terms_mutually_commute());
        let bad = parity_check_code(3, vec![Check::z(vec![0, 1]), Check::x(vec![1, 2])]);
        assert!(matches!(bad, Err(Error::Case(_))));
        assert!(parity_check_code(3, vec![Check::z(vec![0, 0])]).is_err());
        assert!(parity_check_code(3, vec![Check::z(vec![0, 5])]).is_err());
    }

    #[test]
    fn ldpc_construction_is_regular() {
        let mut rng = rng_from_seed(11);
        let checks = random_ldpc_checks(12, 3, 4, &mut rng).unwrap();
        assert_eq!(checks.len(), 9);
        let (code, h) = parity_check_code(12, checks).unwrap();
        assert_eq!(code.p_c, 3);
        assert_eq!(code.q_c, 4);
        assert!(h.is_diagonal());
        let cw = code.codewords.unwrap();
        assert!(cw.contains(&0));
        for &w in &cw {
            for &u in &cw {
                assert!(cw.contains(&(w ^ u)));
            }
        }
        assert!(random_ldpc_checks(10, 3, 4, &mut rng).is_err());
    }

    #[test]
    fn regular_graph_degrees() {
        let mut rng = rng_from_seed(5);
        let g = random_regular_graph(10, 3, &mut rng).unwrap();
        assert_eq!(g.len(), 15);
        let mut deg = [0; 10];
        for &(a, b) in &g {
            assert!(a < b);
            deg[a] += 1;
            deg[b] += 1;
        }
        assert!(deg.iter().all(|&d| d == 3));
        validate_simple_graph(10, &g).unwrap();
        assert!(random_regular_graph(5, 3, &mut rng).is_err());
    }

    #[test]
    fn pspin_instance() {
        let (inst, h) = pspin_model(12, 3, 4, 9).unwrap();
        assert!(inst.exact_regular);
        assert_eq!(inst.hyperedges.len(), 9);
        assert!(inst.degrees().iter().all(|&d| d == 3));
        assert!(h.is_diagonal());
        assert!((h.loc_norm() - 3.0).abs() < 1e-12);
        assert_eq!(pspin_model(12, 3, 4, 9).unwrap().0, inst);
        let (odd, _) = pspin_model(10, 3, 4, 2).unwrap();
        assert!(!odd.exact_regular);
        assert!(odd.degrees().iter().all(|&d| d == 2 || d == 3));
    }

    #[test]
    fn chain_couplings_set_ground_order() {
        let chain = |j: i8| {
            let e = (0..3)
                .map(|i| Hyperedge {
                    sites: vec![i, i + 1],
                    coupling: j,
                })
                .collect();
            HypergraphInstance::new(4, e).unwrap().hamiltonian().unwrap()
        };
        let ferro = chain(-1).diagonal_energies().unwrap();
        let min = ferro.iter().copied().fold(f64::INFINITY, f64::min);
        let ground: Vec<usize> = (0..16).filter(|&z| ferro[z] == min).collect();
        assert_eq!(ground, vec![0, 15]);
        let anti = chain(1).diagonal_energies().unwrap();
        let min = anti.iter().copied().fold(f64::INFINITY, f64::min);
        let ground: Vec<usize> = (0..16).filter(|&z| anti[z] == min).collect();
        assert_eq!(ground, vec![0b0101, 0b1010]);
    }

    #[test]
    fn mis_single_edge() {
        let m = mis_model(2, &[(0, 1)]).unwrap();
        let e = m.h_e.diagonal_energies().unwrap();
        assert_eq!(e, vec![0.0, 0.0, 0.0, 4.0]);
        let independent: Vec<u64> = (0..4).filter(|&z| m.is_independent(z)).collect();
        assert_eq!(independent, vec![0, 1, 2]);
        assert_eq!(m.max_independent_set_size().unwrap(), 1);
        assert_eq!(m.cross_block_norm(1.0).unwrap(), 0.0);
    }

    #[test]
    fn mis_edgeless() {
        let m = mis_model(3, &[]).unwrap();
        assert!(m.h_e.is_empty());
        assert_eq!(m.max_independent_set_size().unwrap(), 3);
        assert!((m.pxp_unit.x_norm() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn mis_matches_restricted_ground_energy() {
        let mut rng = rng_from_seed(21);
        let g = random_regular_graph(10, 3, &mut rng).unwrap();
        let m = mis_model(10, &g).unwrap();
        let hv = m.h_v.diagonal_energies().unwrap();
        let he = m.h_e.diagonal_energies().unwrap();
        let restricted = (0..1usize << 10)
            .filter(|&z| he[z] == 0.0)
            .map(|z| hv[z])
            .fold(f64::INFINITY, f64::min);
        let mut best = 0;
        for z in 0u64..1 << 10 {
            let ok = g.iter().all(|&(a, b)| z >> a & 1 == 0 || z >> b & 1 == 0);
            if ok {
                best = best.max(z.count_ones());
            }
        }
        assert_eq!(m.max_independent_set_size().unwrap(), best);
        assert_eq!(restricted, 10.0 - 2.0 * best as f64);
        assert_eq!(m.cross_block_norm(0.7).unwrap(), 0.0);
    }

    #[test]
    fn plain_x_drive_leaves_the_independent_sets() {
        let m = mis_model(2, &[(0, 1)]).unwrap();
        let plain = MisModel {
            pxp_unit: transverse_field(2, 1.0).unwrap(),
            ..m
        };
        assert!(plain.cross_block_norm(1.0).unwrap() > 0.5);
    }

    #[test]
    fn detuning_statistics() {
        assert!(detuning_from(&[0.0; 4]).unwrap().is_empty());
        assert_eq!(detuning_field(4, 3).unwrap(), detuning_field(4, 3).unwrap());
        let h = detuning_coefficients(10_000, 17);
        let mean = h.iter().sum::<f64>() / h.len() as f64;
        let var = h.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (h.len() - 1) as f64;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
        let f = detuning_from(&[1.0, -2.0, 0.5]).unwrap();
        assert!((f.x_norm() - 3.5 / 9.0).abs() < 1e-15);
        assert!(f.is_diagonal());
    }

    #[test]
    fn adiabatic_paths() {
        let hl = z_string(3, &[0, 1], 1.0)
            .unwrap()
            .add(&z_string(3, &[1, 2], -1.0).unwrap())
            .unwrap();
        let hm = transverse_field(3, 1.0).unwrap();
        let frozen = adiabatic_schedule(&hl, &hm, &[(0.0, 1.0), (1.0, 1.0)]).unwrap();
        assert_eq!(frozen.evaluate(0.4).unwrap(), hl);
        let lin = adiabatic_schedule(&hl, &hm, &[(0.0, 0.0), (0.5, 0.5), (1.0, 1.0)]).unwrap();
        let tv = lin.total_variation(NormKind::X, 0.0, 1.0).unwrap().value;
        assert!((tv - hl.sub(&hm).unwrap().x_norm()).abs() < 1e-12);
        assert!(adiabatic_schedule(&hl, &hm, &[(0.0, 0.5), (1.0, 0.2)]).is_err());
        let n = 9;
        let big = transverse_field(n, 1.0).unwrap();
        assert!((tail_variation(0.9, &big).unwrap() - n as f64 / 9.0).abs() < 1e-12);
        let tail = tail_schedule(&OperatorSum::zero(n), &big, 0.9, 2.0).unwrap();
        let tv = tail.total_variation(NormKind::X, 0.0, 2.0).unwrap().value;
        assert!((tv - 1.0).abs() < 1e-12);
    }

    #[test]
    fn text_formats_round_trip() {
        let edges = vec![(0, 1), (1, 2), (0, 3)];
        let t = format_edge_list(5, &edges);
        assert_eq!(parse_edge_list(&t).unwrap(), (5, edges));
        assert_eq!(parse_edge_list("# tri\n0 1\n1 2\n2 0\n").unwrap().0, 3);
        assert!(parse_edge_list("0 1\n1 1\n").is_err());
        match parse_edge_list("0 1\n2\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let checks = vec![Check::z(vec![0, 1]), Check::x(vec![2, 3, 4])];
        let t = format_check_list(6, &checks);
        assert_eq!(parse_check_list(&t).unwrap(), (6, checks));
        assert_eq!(parse_check_list("0 1 2\n").unwrap().1, vec![Check::z(vec![0, 1, 2])]);
        let (inst, _) = pspin_model(8, 2, 4, 4).unwrap();
        assert_eq!(parse_hyperedge_list(&format_hyperedge_list(&inst)).unwrap(), inst);
        assert!(parse_hyperedge_list("2 0 1\n").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn generated_ldpc_codes_are_diagonal(seed in 0u64..1000) {
            let mut rng = rng_from_seed(seed);
            let checks = random_ldpc_checks(8, 3, 4, &mut rng).unwrap();
            let (code, h) = parity_check_code(8, checks).unwrap();
            prop_assert!(h.is_diagonal());
            prop_assert!(h.loc_norm() <= code.p_c as f64 + 1e-12);
            let e = h.diagonal_energies().unwrap();
            let eg = -(code.checks.len() as f64);
            for z in 0..256u64 {
                prop_assert_eq!(e[z as usize], eg + 2.0 * code.violations(z) as f64);
            }
        }

        #[test]
        fn pxp_preserves_independent_sets(seed in 0u64..1000) {
            let mut rng = rng_from_seed(seed);
            let g = random_regular_graph(8, 3, &mut rng).unwrap();
            let m = mis_model(8, &g).unwrap();
            prop_assert_eq!(m.cross_block_norm(1.0).unwrap(), 0.0);
        }

        #[test]
        fn random_schedules_satisfy_their_tag(seed in 0u64..1000, lam in 0.0f64..2.0) {
            let p = StrengthProfile { lambda_total: lam, ..Default::default() };
            let s = random_two_local_schedule(3, seed, &p).unwrap();
            prop_assert!(s.verify_case(CaseTag::General, 2.0, 1.0).is_ok());
        }
    }
}
