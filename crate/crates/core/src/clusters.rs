//! Cluster geometry of diagonal energy landscapes.
//!
//! States below a cutoff energy are joined whenever their Hamming distance is
//! at most a hop radius; the connected components are the clusters.

use faer::{Mat, Side};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::StateVector;
use crate::error::{Error, Result};
use crate::pauli::{i_pow, OperatorSum, C64};

/// Largest system size accepted by the exhaustive landscape scan.
pub const SCAN_LIMIT: usize = 24;
const PAIRWISE_LIMIT: usize = 1 << 13;
const BLOCK_LIMIT: usize = 1 << 12;
const NO_LABEL: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Member bitstrings in increasing order.
    pub states: Vec<u64>,
    /// Representative codeword, when one was assigned.
    pub anchor: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterMetrics {
    /// Largest Hamming diameter of a single cluster.
    pub nu1: u32,
    /// Smallest Hamming distance between different clusters; `None` with one cluster.
    pub nu2: Option<u32>,
    /// Global minimum of the landscape.
    pub e_g: f64,
    /// Barrier density `(E_B - E_g)/n`; `None` for an infinite cutoff.
    pub b: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterPartition {
    pub n: usize,
    pub cutoff: f64,
    pub hop_radius: u32,
    /// Sub-cutoff states in increasing order.
    pub states: Vec<u64>,
    pub energies: Vec<f64>,
    /// Cluster index of each entry of `states`.
    pub labels: Vec<usize>,
    /// Clusters ordered by their smallest member.
    pub clusters: Vec<Cluster>,
    pub metrics: ClusterMetrics,
}

struct UnionFind(Vec<u32>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n as u32).collect())
    }

    fn find(&mut self, mut a: u32) -> u32 {
        while self.0[a as usize] != a {
            let up = self.0[self.0[a as usize] as usize];
            self.0[a as usize] = up;
            a = up;
        }
        a
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.0[hi as usize] = lo;
        }
    }
}

/// Visits every mask of weight `k` among the low `n` bits.
fn for_each_weight<F: FnMut(u64) -> bool>(n: usize, k: u32, mut f: F) {
    if k as usize > n {
        return;
    }
    if k == 0 {
        f(0);
        return;
    }
    let limit = 1u64 << n;
    let mut m = (1u64 << k) - 1;
    while m < limit {
        if !f(m) {
            return;
        }
        let c = m & m.wrapping_neg();
        let r = m + c;
        m = (((r ^ m) >> 2) / c) | r;
    }
}

/// Clusters of a diagonal operator's landscape.
pub fn find_clusters_for(op: &OperatorSum, cutoff: f64, hop_radius: u32) -> Result<ClusterPartition> {
    if !op.is_diagonal() {
        return Err(Error::Domain("cluster scans need a diagonal Hamiltonian".into()));
    }
    if op.n_sites() > SCAN_LIMIT {
        return Err(Error::Resource(format!(
            "{} sites exceeds the scan limit {SCAN_LIMIT}",
            op.n_sites()
        )));
    }
    find_clusters(op.n_sites(), &op.diagonal_energies()?, cutoff, hop_radius)
}

/// Clusters of the states with energy strictly below `cutoff`, connected at
/// Hamming distance `<= hop_radius`.
pub fn find_clusters(n: usize, energies: &[f64], cutoff: f64, hop_radius: u32) -> Result<ClusterPartition> {
    if n > SCAN_LIMIT {
        return Err(Error::Resource(format!(
            "{n} sites exceeds the scan limit {SCAN_LIMIT}"
        )));
    }
    if energies.len() != 1usize << n {
        return Err(Error::Dimension(format!("{} energies for {n} sites", energies.len())));
    }
    if hop_radius == 0 {
        return Err(Error::Parameter("hop radius must be at least 1".into()));
    }
    let e_g = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let states: Vec<u64> = (0..energies.len() as u64)
        .filter(|&z| energies[z as usize] < cutoff)
        .collect();
    if states.is_empty() {
        return Err(Error::Empty(format!("no state lies below the cutoff {cutoff}")));
    }
    let mut index = vec![NO_LABEL; energies.len()];
    for (i, &s) in states.iter().enumerate() {
        index[s as usize] = i as u32;
    }
    let mut uf = UnionFind::new(states.len());
    let radius = hop_radius.min(n as u32);
    for (i, &s) in states.iter().enumerate() {
        for k in 1..=radius {
            for_each_weight(n, k, |flip| {
                let j = index[(s ^ flip) as usize];
                if j != NO_LABEL && (j as usize) > i {
                    uf.union(i as u32, j);
                }
                true
            });
        }
    }
    let mut root_to_cluster = std::collections::BTreeMap::new();
    let mut labels = Vec::with_capacity(states.len());
    let mut clusters: Vec<Cluster> = Vec::new();
    for (i, &s) in states.iter().enumerate() {
        let r = uf.find(i as u32);
        let c = *root_to_cluster.entry(r).or_insert_with(|| {
            clusters.push(Cluster {
                states: Vec::new(),
                anchor: None,
            });
            clusters.len() - 1
        });
        clusters[c].states.push(s);
        labels.push(c);
    }
    let nu1 = clusters.iter().map(|cl| diameter(n, &cl.states)).max().unwrap_or(0);
    let nu2 = if clusters.len() > 1 {
        Some(min_separation(n, &states, &labels))
    } else {
        None
    };
    let b = cutoff.is_finite().then(|| (cutoff - e_g) / n as f64);
    Ok(ClusterPartition {
        n,
        cutoff,
        hop_radius,
        energies: states.iter().map(|&s| energies[s as usize]).collect(),
        states,
        labels,
        clusters,
        metrics: ClusterMetrics { nu1, nu2, e_g, b },
    })
}

/// Breadth-first search on the hypercube from labelled sources. Returns the
/// distance to the nearest source and that source's label for every state.
fn hypercube_bfs(n: usize, sources: impl Iterator<Item = (u64, u32)>) -> (Vec<u8>, Vec<u32>) {
    let dim = 1usize << n;
    let mut dist = vec![u8::MAX; dim];
    let mut label = vec![NO_LABEL; dim];
    let mut frontier = Vec::new();
    for (s, l) in sources {
        dist[s as usize] = 0;
        label[s as usize] = l;
        frontier.push(s);
    }
    let mut d = 0u8;
    while !frontier.is_empty() {
        d += 1;
        let mut next = Vec::new();
        for &s in &frontier {
            for j in 0..n {
                let t = (s ^ (1 << j)) as usize;
                if dist[t] == u8::MAX {
                    dist[t] = d;
                    label[t] = label[s as usize];
                    next.push(t as u64);
                }
            }
        }
        frontier = next;
    }
    (dist, label)
}

fn diameter(n: usize, members: &[u64]) -> u32 {
    if members.len() <= PAIRWISE_LIMIT {
        return members
            .par_iter()
            .enumerate()
            .map(|(i, a)| members[i + 1..].iter().map(|b| (a ^ b).count_ones()).max().unwrap_or(0))
            .max()
            .unwrap_or(0);
    }
    let full = (1u64 << n) - 1;
    let (dist, _) = hypercube_bfs(n, members.iter().map(|&s| (s, 0)));
    let nearest_to_antipode = members.iter().map(|&s| dist[(!s & full) as usize]).min().unwrap_or(0);
    n as u32 - nearest_to_antipode as u32
}

fn min_separation(n: usize, states: &[u64], labels: &[usize]) -> u32 {
    if states.len() <= PAIRWISE_LIMIT {
        return states
            .par_iter()
            .enumerate()
            .map(|(i, a)| {
                states[i + 1..]
                    .iter()
                    .zip(&labels[i + 1..])
                    .filter(|(_, &l)| l != labels[i])
                    .map(|(b, _)| (a ^ b).count_ones())
                    .min()
                    .unwrap_or(u32::MAX)
            })
            .min()
            .unwrap_or(u32::MAX);
    }
    // Along a shortest path between two differently labelled sources some edge
    // joins states of different nearest-source labels.
    let (dist, label) = hypercube_bfs(n, states.iter().zip(labels).map(|(&s, &l)| (s, l as u32)));
    (0..1usize << n)
        .into_par_iter()
        .map(|u| {
            (0..n)
                .map(|j| u ^ (1 << j))
                .filter(|&v| label[v] != label[u])
                .map(|v| dist[u] as u32 + dist[v] as u32 + 1)
                .min()
                .unwrap_or(u32::MAX)
        })
        .min()
        .unwrap_or(u32::MAX)
}

impl ClusterPartition {
    /// Cluster containing bitstring `z`, if it lies below the cutoff.
    pub fn cluster_of(&self, z: u64) -> Option<usize> {
        self.states.binary_search(&z).ok().map(|i| self.labels[i])
    }

    /// Assigns each cluster the member codeword of smallest index, or failing
    /// that the codeword nearest to the cluster's lowest-energy state.
    pub fn assign_anchors(&mut self, codewords: &[u64]) {
        if codewords.is_empty() {
            return;
        }
        for (c, cl) in self.clusters.iter_mut().enumerate() {
            let inside = codewords
                .iter()
                .copied()
                .filter(|w| cl.states.binary_search(w).is_ok())
                .min();
            cl.anchor = inside.or_else(|| {
                let best = self
                    .states
                    .iter()
                    .zip(&self.labels)
                    .zip(&self.energies)
                    .filter(|((_, &l), _)| l == c)
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .map(|((&s, _), _)| s)?;
                codewords.iter().copied().min_by_key(|w| ((w ^ best).count_ones(), *w))
            });
        }
    }

    /// Whether some Pauli term of `v` links two different clusters.
    /// Returns the first offending pair of cluster indices.
    pub fn coupled_clusters(&self, v: &OperatorSum) -> Result<Option<(usize, usize)>> {
        if v.n_sites() != self.n {
            return Err(Error::Dimension("operator size differs from the partition".into()));
        }
        let flips: std::collections::BTreeSet<u64> = v.terms().map(|t| t.x_mask).filter(|&x| x != 0).collect();
        for (&s, &l) in self.states.iter().zip(&self.labels) {
            for &x in &flips {
                if let Some(o) = self.cluster_of(s ^ x) {
                    if o != l {
                        return Ok(Some((l.min(o), l.max(o))));
                    }
                }
            }
        }
        Ok(None)
    }

    /// Sufficient condition for block diagonality: every term flips fewer than
    /// `ν₂` sites.
    pub fn separated_by_flip_weight(&self, v: &OperatorSum) -> bool {
        match self.metrics.nu2 {
            Some(nu2) => v.max_flip_weight() < nu2,
            None => true,
        }
    }

    /// Spectra of `P_w H P_w` for each cluster.
    pub fn block_spectra(&self, h: &OperatorSum) -> Result<Vec<Vec<f64>>> {
        if h.n_sites() != self.n {
            return Err(Error::Dimension("operator size differs from the partition".into()));
        }
        if !h.is_hermitian() {
            return Err(Error::Domain("block spectra need a Hermitian operator".into()));
        }
        let terms: Vec<_> = h.terms().collect();
        self.clusters
            .par_iter()
            .map(|cl| {
                let m = cl.states.len();
                if m > BLOCK_LIMIT {
                    return Err(Error::Resource(format!("cluster of {m} states exceeds {BLOCK_LIMIT}")));
                }
                let mut a = Mat::<C64>::zeros(m, m);
                for (j, &s) in cl.states.iter().enumerate() {
                    for t in &terms {
                        let Ok(i) = cl.states.binary_search(&(s ^ t.x_mask)) else {
                            continue;
                        };
                        let sign = if (t.z_mask & s).count_ones() % 2 == 1 {
                            -1.0
                        } else {
                            1.0
                        };
                        a[(i, j)] += t.coeff * i_pow((t.x_mask & t.z_mask).count_ones()) * sign;
                    }
                }
                let ev = a
                    .self_adjoint_eigenvalues(Side::Lower)
                    .map_err(|e| Error::Domain(format!("eigen solver failed: {e:?}")))?;
                let mut ev: Vec<f64> = ev.into_iter().collect();
                ev.sort_by(f64::total_cmp);
                Ok(ev)
            })
            .collect()
    }
}

/// Empirical soundness of a clustered code landscape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Soundness {
    pub nu1: u32,
    pub nu2: Option<u32>,
    pub b: Option<f64>,
    /// `min violations / distance-to-anchor` over sub-cutoff states away from their anchor.
    pub alpha_hat: Option<f64>,
    /// State achieving `alpha_hat`.
    pub alpha_witness: Option<u64>,
    /// `max distance-to-anchor / n`.
    pub gamma_hat: f64,
}

/// Computes `alpha_hat` and `gamma_hat` from `violations(z)`.
pub fn cluster_metrics<F: Fn(u64) -> f64 + Sync>(p: &ClusterPartition, violations: F) -> Result<Soundness> {
    let anchors: Vec<u64> = p
        .clusters
        .iter()
        .enumerate()
        .map(|(c, cl)| {
            cl.anchor
                .ok_or_else(|| Error::Undefined(format!("cluster {c} has no anchor")))
        })
        .collect::<Result<_>>()?;
    let mut alpha: Option<(f64, u64)> = None;
    let mut far = 0u32;
    for (&s, &l) in p.states.iter().zip(&p.labels) {
        let d = (s ^ anchors[l]).count_ones();
        far = far.max(d);
        if d > 0 {
            let r = violations(s) / d as f64;
            if alpha.is_none_or(|(a, _)| r < a) {
                alpha = Some((r, s));
            }
        }
    }
    Ok(Soundness {
        nu1: p.metrics.nu1,
        nu2: p.metrics.nu2,
        b: p.metrics.b,
        alpha_hat: alpha.map(|a| a.0),
        alpha_witness: alpha.map(|a| a.1),
        gamma_hat: far as f64 / p.n as f64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterWeights {
    pub clusters: Vec<f64>,
    /// Weight on states above the cutoff.
    pub outside: f64,
}

impl ClusterWeights {
    pub fn total(&self) -> f64 {
        self.clusters.iter().sum::<f64>() + self.outside
    }
}

pub fn cluster_weights(psi: &StateVector, p: &ClusterPartition) -> Result<ClusterWeights> {
    if psi.n_sites() != p.n {
        return Err(Error::Dimension(format!(
            "state on {} sites, partition on {}",
            psi.n_sites(),
            p.n
        )));
    }
    let probs = psi.probabilities();
    let mut clusters = vec![0.0; p.clusters.len()];
    let mut inside = 0.0;
    for (&s, &l) in p.states.iter().zip(&p.labels) {
        clusters[l] += probs[s as usize];
        inside += probs[s as usize];
    }
    let total: f64 = probs.iter().sum();
    Ok(ClusterWeights {
        clusters,
        outside: (total - inside).max(0.0),
    })
}

/// Smallest gap between levels of different blocks.
pub fn cluster_gap_delta_w(blocks: &[Vec<f64>]) -> Result<f64> {
    let nonempty = blocks.iter().filter(|b| !b.is_empty()).count();
    if nonempty < 2 {
        return Err(Error::Undefined(
            "the inter-cluster gap needs at least two clusters".into(),
        ));
    }
    let mut all: Vec<(f64, usize)> = blocks
        .iter()
        .enumerate()
        .flat_map(|(c, b)| b.iter().map(move |&e| (e, c)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut best = f64::INFINITY;
    let mut last: Vec<Option<f64>> = vec![None; blocks.len()];
    for &(e, c) in &all {
        for (o, prev) in last.iter().enumerate() {
            if o != c {
                if let Some(p) = prev {
                    best = best.min(e - p);
                }
            }
        }
        last[c] = Some(e);
    }
    Ok(best)
}

/// Inter-cluster gap compared with the leakage scale it must dominate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub delta_w: f64,
    pub epsilon_out: f64,
    pub ratio: f64,
    /// Whether `δ_W > ε_>`.
    pub applicable: bool,
}

pub fn gap_report(blocks: &[Vec<f64>], epsilon_out: f64) -> Result<GapReport> {
    let delta_w = cluster_gap_delta_w(blocks)?;
    Ok(GapReport {
        delta_w,
        epsilon_out,
        ratio: delta_w / epsilon_out,
        applicable: delta_w > epsilon_out,
    })
}

/// Bitstring label of `z` with site 0 leftmost.
pub fn bitstring(n: usize, z: u64) -> String {
    (0..n).map(|j| if z >> j & 1 == 1 { '1' } else { '0' }).collect()
}

pub fn parse_bitstring(s: &str) -> Result<u64> {
    if s.len() > 64 {
        return Err(Error::Range(format!("bitstring of length {} exceeds 64", s.len())));
    }
    s.chars().enumerate().try_fold(0u64, |acc, (j, c)| match c {
        '0' => Ok(acc),
        '1' => Ok(acc | 1 << j),
        _ => Err(Error::Parameter(format!("bad bitstring character `{c}`"))),
    })
}

/// Lowest energy `E` such that `a` and `b` are joined by a path of single
/// flips through states of energy at most `E`.
///
/// Clusters built with `cutoff = E` and hop radius 1 therefore separate `a`
/// from `b`, because the scan keeps only states strictly below the cutoff.
pub fn mountain_pass_energy(n: usize, energies: &[f64], a: u64, b: u64) -> Result<f64> {
    if n > SCAN_LIMIT {
        return Err(Error::Resource(format!(
            "{n} sites exceeds the scan limit {SCAN_LIMIT}"
        )));
    }
    let dim = 1usize << n;
    if energies.len() != dim {
        return Err(Error::Dimension(format!("{} energies for {n} sites", energies.len())));
    }
    if a as usize >= dim || b as usize >= dim {
        return Err(Error::Range("endpoint outside the state space".into()));
    }
    if a == b {
        return Ok(energies[a as usize]);
    }
    let mut order: Vec<u32> = (0..dim as u32).collect();
    order.sort_by(|&x, &y| energies[x as usize].total_cmp(&energies[y as usize]).then(x.cmp(&y)));
    let mut uf = UnionFind::new(dim);
    let mut added = vec![false; dim];
    for &z in &order {
        added[z as usize] = true;
        for j in 0..n {
            let y = z ^ (1 << j);
            if added[y as usize] {
                uf.union(z, y);
            }
        }
        if added[a as usize] && added[b as usize] && uf.find(a as u32) == uf.find(b as u32) {
            return Ok(energies[z as usize]);
        }
    }
    Err(Error::Undefined("endpoints never joined".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterJson {
    pub states: Vec<String>,
    pub energies: Vec<f64>,
    pub anchor: Option<String>,
}

/// Serialized partition: clusters as bitstring lists plus the metrics block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionJson {
    pub n: usize,
    /// `None` stands for an infinite cutoff.
    pub cutoff: Option<f64>,
    pub hop_radius: u32,
    pub clusters: Vec<ClusterJson>,
    pub metrics: ClusterMetrics,
}

impl ClusterPartition {
    pub fn to_json(&self) -> PartitionJson {
        let clusters = self
            .clusters
            .iter()
            .map(|cl| ClusterJson {
                states: cl.states.iter().map(|&s| bitstring(self.n, s)).collect(),
                energies: cl
                    .states
                    .iter()
                    .map(|s| self.energies[self.states.binary_search(s).expect("member state")])
                    .collect(),
                anchor: cl.anchor.map(|a| bitstring(self.n, a)),
            })
            .collect();
        PartitionJson {
            n: self.n,
            cutoff: self.cutoff.is_finite().then_some(self.cutoff),
            hop_radius: self.hop_radius,
            clusters,
            metrics: self.metrics.clone(),
        }
    }

    pub fn from_json(j: &PartitionJson) -> Result<Self> {
        let mut entries = Vec::new();
        let mut clusters = Vec::with_capacity(j.clusters.len());
        for (c, cl) in j.clusters.iter().enumerate() {
            if cl.states.len() != cl.energies.len() {
                return Err(Error::Parameter(format!(
                    "cluster {c}: states and energies differ in length"
                )));
            }
            let mut states = Vec::with_capacity(cl.states.len());
            for (s, &e) in cl.states.iter().zip(&cl.energies) {
                if s.len() != j.n {
                    return Err(Error::Dimension(format!("bitstring `{s}` is not {} long", j.n)));
                }
                let z = parse_bitstring(s)?;
                states.push(z);
                entries.push((z, e, c));
            }
            states.sort_unstable();
            let anchor = cl.anchor.as_deref().map(parse_bitstring).transpose()?;
            clusters.push(Cluster { states, anchor });
        }
        entries.sort_by_key(|e| e.0);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Parameter("a state appears in two clusters".into()));
        }
        Ok(Self {
            n: j.n,
            cutoff: j.cutoff.unwrap_or(f64::INFINITY),
            hop_radius: j.hop_radius,
            states: entries.iter().map(|e| e.0).collect(),
            energies: entries.iter().map(|e| e.1).collect(),
            labels: entries.iter().map(|e| e.2).collect(),
            clusters,
            metrics: j.metrics.clone(),
        })
    }
}
