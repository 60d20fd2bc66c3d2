//! Pauli-string algebra on up to 64 qubits.
//!
//! A term with masks `(x, z)` denotes the Hermitian string
//! `i^{|x & z|} X^x Z^z`, so a site with both bits set carries a `Y`.
//! Qubit `j` corresponds to bit `j` of a computational-basis index, and in
//! text labels the leftmost character is qubit 0.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

pub type C64 = Complex64;

/// Coefficients with modulus at or below this value are dropped.
pub const PRUNE_TOL: f64 = 1e-14;
/// Default ceiling on the number of qubits for dense matrices.
pub const DENSE_LIMIT: usize = 14;
/// Hard ceiling imposed by the 64-bit masks.
pub const MAX_SITES: usize = 64;

const I_POW: [C64; 4] = [
    C64 { re: 1.0, im: 0.0 },
    C64 { re: 0.0, im: 1.0 },
    C64 { re: -1.0, im: 0.0 },
    C64 { re: 0.0, im: -1.0 },
];

#[inline]
pub(crate) fn i_pow(k: u32) -> C64 {
    I_POW[(k & 3) as usize]
}

#[inline]
fn site_mask(n_sites: usize) -> u64 {
    if n_sites >= 64 {
        u64::MAX
    } else {
        (1u64 << n_sites) - 1
    }
}

/// A single weighted Pauli string.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub n_sites: usize,
    pub x_mask: u64,
    pub z_mask: u64,
    pub coeff: C64,
}

impl PauliTerm {
    pub fn new(n_sites: usize, x_mask: u64, z_mask: u64, coeff: C64) -> Result<Self> {
        if n_sites > MAX_SITES {
            return Err(Error::Resource(format!("{n_sites} sites exceeds {MAX_SITES}")));
        }
        let m = site_mask(n_sites);
        if x_mask & !m != 0 || z_mask & !m != 0 {
            return Err(Error::Dimension(format!("mask bits beyond {n_sites} sites")));
        }
        Ok(Self {
            n_sites,
            x_mask,
            z_mask,
            coeff,
        })
    }

    pub fn identity(n_sites: usize, coeff: C64) -> Self {
        Self {
            n_sites,
            x_mask: 0,
            z_mask: 0,
            coeff,
        }
    }

    /// Builds a term from a label such as `"XIZY"`.
    pub fn from_label(label: &str, coeff: C64) -> Result<Self> {
        let (x, z) = parse_label(label).map_err(Error::Parameter)?;
        Self::new(label.chars().count(), x, z, coeff)
    }

    pub fn support(&self) -> u64 {
        self.x_mask | self.z_mask
    }

    pub fn locality(&self) -> u32 {
        self.support().count_ones()
    }

    pub fn label(&self) -> String {
        label_of(self.n_sites, self.x_mask, self.z_mask)
    }

    /// Two strings commute exactly when their symplectic product is even.
    pub fn commutes_with(&self, other: &PauliTerm) -> bool {
        strings_commute(self.x_mask, self.z_mask, other.x_mask, other.z_mask)
    }
}

pub(crate) fn strings_commute(x1: u64, z1: u64, x2: u64, z2: u64) -> bool {
    ((x1 & z2).count_ones() + (z1 & x2).count_ones()).is_multiple_of(2)
}

/// Phase `p` such that `P(x1,z1) P(x2,z2) = p P(x1^x2, z1^z2)`.
#[inline]
pub(crate) fn product_phase(x1: u64, z1: u64, x2: u64, z2: u64) -> C64 {
    let a1 = (x1 & z1).count_ones();
    let a2 = (x2 & z2).count_ones();
    let a3 = ((x1 ^ x2) & (z1 ^ z2)).count_ones();
    let k = a1 + a2 + 2 * (z1 & x2).count_ones() + 4 * 64 - a3;
    i_pow(k)
}

fn parse_label(label: &str) -> std::result::Result<(u64, u64), String> {
    let n = label.chars().count();
    if n > MAX_SITES {
        return Err(format!("label longer than {MAX_SITES} sites"));
    }
    let mut x = 0u64;
    let mut z = 0u64;
    for (j, c) in label.chars().enumerate() {
        match c {
            'I' | 'i' | '_' => {}
            'X' | 'x' => x |= 1 << j,
            'Z' | 'z' => z |= 1 << j,
            'Y' | 'y' => {
                x |= 1 << j;
                z |= 1 << j;
            }
            other => return Err(format!("unknown Pauli letter '{other}'")),
        }
    }
    Ok((x, z))
}

fn label_of(n_sites: usize, x: u64, z: u64) -> String {
    (0..n_sites)
        .map(|j| match ((x >> j) & 1, (z >> j) & 1) {
            (0, 0) => 'I',
            (1, 0) => 'X',
            (0, 1) => 'Z',
            _ => 'Y',
        })
        .collect()
}

/// Product of two Pauli terms with the exact phase.
pub fn mul_terms(a: &PauliTerm, b: &PauliTerm) -> Result<PauliTerm> {
    if a.n_sites != b.n_sites {
        return Err(Error::Dimension(format!("{} vs {} sites", a.n_sites, b.n_sites)));
    }
    let phase = product_phase(a.x_mask, a.z_mask, b.x_mask, b.z_mask);
    Ok(PauliTerm {
        n_sites: a.n_sites,
        x_mask: a.x_mask ^ b.x_mask,
        z_mask: a.z_mask ^ b.z_mask,
        coeff: a.coeff * b.coeff * phase,
    })
}

/// Linear combination of Pauli strings stored in canonical form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSum {
    n_sites: usize,
    terms: BTreeMap<(u64, u64), C64>,
}

/// The three termwise norms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermwiseNorms {
    pub x_norm: f64,
    pub loc_norm: f64,
    pub qx_norm: Option<f64>,
}

impl OperatorSum {
    pub fn zero(n_sites: usize) -> Self {
        Self {
            n_sites,
            terms: BTreeMap::new(),
        }
    }

    pub fn identity(n_sites: usize, coeff: f64) -> Self {
        let mut s = Self::zero(n_sites);
        s.add_raw(0, 0, C64::new(coeff, 0.0));
        s
    }

    pub fn from_terms<I: IntoIterator<Item = PauliTerm>>(n_sites: usize, terms: I) -> Result<Self> {
        let mut s = Self::zero(n_sites);
        for t in terms {
            s.add_term(t)?;
        }
        Ok(s)
    }

    /// Single term given by a label and real coefficient.
    pub fn from_label(label: &str, coeff: f64) -> Result<Self> {
        let t = PauliTerm::from_label(label, C64::new(coeff, 0.0))?;
        Self::from_terms(t.n_sites, [t])
    }

    /// Single-site operator `coeff * P_site` with `P` one of `X`, `Y`, `Z`.
    pub fn single(n_sites: usize, site: usize, pauli: char, coeff: f64) -> Result<Self> {
        if site >= n_sites {
            return Err(Error::Dimension(format!("site {site} outside {n_sites}")));
        }
        Self::string(n_sites, &[(site, pauli)], coeff)
    }

    /// Product of single-site Paulis on distinct sites.
    pub fn string(n_sites: usize, factors: &[(usize, char)], coeff: f64) -> Result<Self> {
        let mut x = 0u64;
        let mut z = 0u64;
        for &(site, p) in factors {
            if site >= n_sites {
                return Err(Error::Dimension(format!("site {site} outside {n_sites}")));
            }
            let bit = 1u64 << site;
            if (x | z) & bit != 0 {
                return Err(Error::Parameter(format!("site {site} repeated")));
            }
            match p {
                'X' => x |= bit,
                'Z' => z |= bit,
                'Y' => {
                    x |= bit;
                    z |= bit
                }
                other => return Err(Error::Parameter(format!("unknown Pauli '{other}'"))),
            }
        }
        let t = PauliTerm::new(n_sites, x, z, C64::new(coeff, 0.0))?;
        Self::from_terms(n_sites, [t])
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = PauliTerm> + '_ {
        self.terms.iter().map(move |(&(x, z), &c)| PauliTerm {
            n_sites: self.n_sites,
            x_mask: x,
            z_mask: z,
            coeff: c,
        })
    }

    pub fn coeff(&self, x_mask: u64, z_mask: u64) -> C64 {
        self.terms.get(&(x_mask, z_mask)).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn add_term(&mut self, t: PauliTerm) -> Result<()> {
        if t.n_sites != self.n_sites {
            return Err(Error::Dimension(format!(
                "term on {} sites added to sum on {}",
                t.n_sites, self.n_sites
            )));
        }
        let m = site_mask(self.n_sites);
        if (t.x_mask | t.z_mask) & !m != 0 {
            return Err(Error::Dimension("mask bits beyond n_sites".into()));
        }
        self.add_raw(t.x_mask, t.z_mask, t.coeff);
        Ok(())
    }

    pub(crate) fn add_raw(&mut self, x: u64, z: u64, c: C64) {
        use std::collections::btree_map::Entry;
        match self.terms.entry((x, z)) {
            Entry::Vacant(v) => {
                if c.norm() > PRUNE_TOL {
                    v.insert(c);
                }
            }
            Entry::Occupied(mut o) => {
                let s = *o.get() + c;
                if s.norm() > PRUNE_TOL {
                    *o.get_mut() = s;
                } else {
                    o.remove();
                }
            }
        }
    }

    fn check_same(&self, other: &OperatorSum) -> Result<()> {
        if self.n_sites != other.n_sites {
            return Err(Error::Dimension(format!("{} vs {} sites", self.n_sites, other.n_sites)));
        }
        Ok(())
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &OperatorSum) -> Result<OperatorSum> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (&(x, z), &c) in &other.terms {
            out.add_raw(x, z, c * alpha);
        }
        Ok(out)
    }

    pub fn add(&self, other: &OperatorSum) -> Result<OperatorSum> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &OperatorSum) -> Result<OperatorSum> {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, alpha: f64) -> OperatorSum {
        self.scale_complex(C64::new(alpha, 0.0))
    }

    pub fn scale_complex(&self, alpha: C64) -> OperatorSum {
        let mut out = OperatorSum::zero(self.n_sites);
        for (&(x, z), &c) in &self.terms {
            out.add_raw(x, z, c * alpha);
        }
        out
    }

    /// Operator product, merged canonically.
    pub fn mul(&self, other: &OperatorSum) -> Result<OperatorSum> {
        self.check_same(other)?;
        let mut out = OperatorSum::zero(self.n_sites);
        for (&(x1, z1), &c1) in &self.terms {
            for (&(x2, z2), &c2) in &other.terms {
                let ph = product_phase(x1, z1, x2, z2);
                out.add_raw(x1 ^ x2, z1 ^ z2, c1 * c2 * ph);
            }
        }
        Ok(out)
    }

    /// True when all coefficients are real, which for Pauli strings is
    /// equivalent to Hermiticity.
    pub fn is_hermitian(&self) -> bool {
        self.terms.values().all(|c| c.im.abs() <= 1e-12 * (1.0 + c.re.abs()))
    }

    /// True when every term is built from `I` and `Z` only.
    pub fn is_diagonal(&self) -> bool {
        self.terms.keys().all(|&(x, _)| x == 0)
    }

    pub fn max_locality(&self) -> u32 {
        self.terms.keys().map(|&(x, z)| (x | z).count_ones()).max().unwrap_or(0)
    }

    /// Largest number of `X` or `Y` factors in any term.
    pub fn max_flip_weight(&self) -> u32 {
        self.terms.keys().map(|&(x, _)| x.count_ones()).max().unwrap_or(0)
    }

    /// Union of all term supports.
    pub fn support(&self) -> u64 {
        self.terms.keys().fold(0, |acc, &(x, z)| acc | x | z)
    }

    /// Returns true when every pair of terms commutes.
    pub fn terms_mutually_commute(&self) -> bool {
        let keys: Vec<_> = self.terms.keys().copied().collect();
        for (i, &(x1, z1)) in keys.iter().enumerate() {
            for &(x2, z2) in &keys[i + 1..] {
                if !strings_commute(x1, z1, x2, z2) {
                    return false;
                }
            }
        }
        true
    }

    /// Returns true when every term of `self` commutes with every term of `other`.
    pub fn termwise_commutes_with(&self, other: &OperatorSum) -> bool {
        self.terms
            .keys()
            .all(|&(x1, z1)| other.terms.keys().all(|&(x2, z2)| strings_commute(x1, z1, x2, z2)))
    }

    /// Coefficient of the identity string.
    pub fn trace_part(&self) -> f64 {
        self.coeff(0, 0).re
    }

    /// Energies of all computational basis states for a diagonal operator.
    pub fn diagonal_energies(&self) -> Result<Vec<f64>> {
        if !self.is_diagonal() {
            return Err(Error::Domain("operator has off-diagonal terms".into()));
        }
        check_dense(self.n_sites, 26)?;
        let dim = 1usize << self.n_sites;
        let terms: Vec<(u64, f64)> = self.terms.iter().map(|(&(_, z), c)| (z, c.re)).collect();
        Ok((0..dim as u64)
            .map(|b| {
                terms
                    .iter()
                    .map(|&(z, c)| if (z & b).count_ones() % 2 == 0 { c } else { -c })
                    .sum()
            })
            .collect())
    }

    /// Serializes to one `coeff  label` line per term.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in self.terms() {
            let c = if t.coeff.im == 0.0 {
                format!("{:.16e}", t.coeff.re)
            } else {
                format!("({:.16e},{:.16e})", t.coeff.re, t.coeff.im)
            };
            let _ = writeln!(s, "{c}  {}", t.label());
        }
        s
    }

    /// Parses the text format written by [`OperatorSum::to_text`].
    ///
    /// Blank lines and `#` comments are ignored. `n_sites` fixes the label
    /// length; every label must have exactly that many characters.
    pub fn from_text(n_sites: usize, text: &str) -> Result<OperatorSum> {
        Self::from_lines(n_sites, text.lines().enumerate().map(|(i, l)| (i + 1, l)))
    }

    pub(crate) fn from_lines<'a, I>(n_sites: usize, lines: I) -> Result<OperatorSum>
    where
        I: IntoIterator<Item = (usize, &'a str)>,
    {
        let mut out = OperatorSum::zero(n_sites);
        for (lineno, raw) in lines {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let c = parts
                .next()
                .ok_or_else(|| Error::parse(lineno, "missing coefficient"))?;
            let label = parts
                .next()
                .ok_or_else(|| Error::parse(lineno, "missing Pauli label"))?;
            if parts.next().is_some() {
                return Err(Error::parse(lineno, "trailing tokens"));
            }
            let coeff = parse_coeff(c).ok_or_else(|| Error::parse(lineno, format!("bad coefficient '{c}'")))?;
            if label.chars().count() != n_sites {
                return Err(Error::parse(
                    lineno,
                    format!("label '{label}' does not have {n_sites} sites"),
                ));
            }
            let (x, z) = parse_label(label).map_err(|m| Error::parse(lineno, m))?;
            out.add_raw(x, z, coeff);
        }
        Ok(out)
    }

    /// Dense matrix with the default size limit.
    pub fn to_dense(&self) -> Result<Mat<C64>> {
        self.to_dense_with_limit(DENSE_LIMIT)
    }

    pub fn to_dense_with_limit(&self, max_sites: usize) -> Result<Mat<C64>> {
        check_dense(self.n_sites, max_sites)?;
        let dim = 1usize << self.n_sites;
        let mut m = Mat::<C64>::zeros(dim, dim);
        for (&(x, z), &c) in &self.terms {
            let base = c * i_pow((x & z).count_ones());
            for b in 0..dim as u64 {
                let v = if (z & b).count_ones() % 2 == 0 { base } else { -base };
                m[((b ^ x) as usize, b as usize)] += v;
            }
        }
        Ok(m)
    }

    /// Dense real matrix, available when every entry is real.
    pub fn to_dense_real(&self, max_sites: usize) -> Result<Option<Mat<f64>>> {
        check_dense(self.n_sites, max_sites)?;
        if !self.has_real_matrix() {
            return Ok(None);
        }
        let dim = 1usize << self.n_sites;
        let mut m = Mat::<f64>::zeros(dim, dim);
        for (&(x, z), &c) in &self.terms {
            let base = (c * i_pow((x & z).count_ones())).re;
            for b in 0..dim as u64 {
                let v = if (z & b).count_ones() % 2 == 0 { base } else { -base };
                m[((b ^ x) as usize, b as usize)] += v;
            }
        }
        Ok(Some(m))
    }

    /// True when the computational-basis matrix has only real entries.
    pub fn has_real_matrix(&self) -> bool {
        self.terms.iter().all(|(&(x, z), &c)| {
            let v = c * i_pow((x & z).count_ones());
            v.im.abs() <= PRUNE_TOL
        })
    }

    /// Termwise norms; `q` must be positive when supplied.
    pub fn termwise_norms(&self, q: Option<f64>) -> Result<TermwiseNorms> {
        termwise_norms(self, q)
    }

    pub fn x_norm(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).sum()
    }

    pub fn loc_norm(&self) -> f64 {
        let mut per_site = vec![0.0f64; self.n_sites];
        for (&(x, z), c) in &self.terms {
            let mut s = x | z;
            while s != 0 {
                let j = s.trailing_zeros() as usize;
                per_site[j] += c.norm();
                s &= s - 1;
            }
        }
        per_site.into_iter().fold(0.0, f64::max)
    }

    pub fn qx_norm(&self, q: f64) -> Result<f64> {
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::Parameter(format!("q must be positive, got {q}")));
        }
        Ok(self
            .terms
            .iter()
            .map(|(&(x, z), c)| (q + 1.0) * ((x | z).count_ones() as f64 / q).exp() * c.norm())
            .sum())
    }

    /// Prepares a fast matrix-free action on state vectors.
    pub fn compile(&self) -> CompiledOperator {
        CompiledOperator::new(self)
    }
}

fn parse_coeff(s: &str) -> Option<C64> {
    if let Some(inner) = s.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
        let (a, b) = inner.split_once(',')?;
        Some(C64::new(a.trim().parse().ok()?, b.trim().parse().ok()?))
    } else {
        Some(C64::new(s.parse().ok()?, 0.0))
    }
}

pub(crate) fn check_dense(n_sites: usize, max_sites: usize) -> Result<()> {
    if n_sites > max_sites {
        return Err(Error::Resource(format!(
            "{n_sites} sites exceeds the dense limit of {max_sites}"
        )));
    }
    Ok(())
}

/// `[A, B] = AB - BA`.
pub fn commutator(a: &OperatorSum, b: &OperatorSum) -> Result<OperatorSum> {
    a.check_same(b)?;
    let mut out = OperatorSum::zero(a.n_sites);
    for (&(x1, z1), &c1) in &a.terms {
        for (&(x2, z2), &c2) in &b.terms {
            if strings_commute(x1, z1, x2, z2) {
                continue;
            }
            let ph = product_phase(x1, z1, x2, z2);
            out.add_raw(x1 ^ x2, z1 ^ z2, c1 * c2 * ph * 2.0);
        }
    }
    Ok(out)
}

/// The `X`, local and (optionally) termwise-`q` norms.
pub fn termwise_norms(a: &OperatorSum, q: Option<f64>) -> Result<TermwiseNorms> {
    let qx_norm = match q {
        Some(q) => Some(a.qx_norm(q)?),
        None => None,
    };
    Ok(TermwiseNorms {
        x_norm: a.x_norm(),
        loc_norm: a.loc_norm(),
        qx_norm,
    })
}

/// Spectral norm of a Hermitian operator.
pub fn operator_norm(a: &OperatorSum) -> Result<f64> {
    if !a.is_hermitian() {
        return Err(Error::Domain("operator norm requires a Hermitian operator".into()));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    if a.is_diagonal() {
        check_dense(a.n_sites, DENSE_LIMIT)?;
        return Ok(a.diagonal_energies()?.into_iter().fold(0.0, |m, e| m.max(e.abs())));
    }
    let ev = linalg::eigenvalues(a, DENSE_LIMIT)?;
    Ok(ev.iter().fold(0.0, |m, e| m.max(e.abs())))
}

/// Spectral norm of an arbitrary Pauli sum via `‖A‖² = ‖A†A‖`.
pub fn general_operator_norm(a: &OperatorSum) -> Result<f64> {
    if a.is_hermitian() {
        return operator_norm(a);
    }
    let adj = a.adjoint();
    let g = adj.mul(a)?;
    let ev = linalg::eigenvalues(&hermitian_part(&g), DENSE_LIMIT)?;
    Ok(ev.iter().fold(0.0f64, |m, e| m.max(*e)).max(0.0).sqrt())
}

fn hermitian_part(a: &OperatorSum) -> OperatorSum {
    let mut out = OperatorSum::zero(a.n_sites);
    for (&(x, z), c) in &a.terms {
        out.add_raw(x, z, C64::new(c.re, 0.0));
    }
    out
}

impl OperatorSum {
    /// Hermitian conjugate; Pauli strings are self-adjoint so only the
    /// coefficients are conjugated.
    pub fn adjoint(&self) -> OperatorSum {
        let mut out = OperatorSum::zero(self.n_sites);
        for (&(x, z), c) in &self.terms {
            out.add_raw(x, z, c.conj());
        }
        out
    }
}

/// Matrix-free action of an [`OperatorSum`] on state vectors.
///
/// Terms are grouped by their `X` mask; each group stores its diagonal
/// factor over the basis so that one application costs a single pass per
/// group.
#[derive(Clone, Debug)]
pub struct CompiledOperator {
    n_sites: usize,
    groups: Vec<(u64, Vec<C64>)>,
}

impl CompiledOperator {
    fn new(op: &OperatorSum) -> Self {
        let dim = 1usize << op.n_sites;
        let mut by_x: BTreeMap<u64, Vec<(u64, C64)>> = BTreeMap::new();
        for (&(x, z), &c) in &op.terms {
            by_x.entry(x).or_default().push((z, c * i_pow((x & z).count_ones())));
        }
        let groups = by_x
            .into_iter()
            .map(|(x, zs)| {
                let diag = (0..dim as u64)
                    .map(|b| {
                        zs.iter().fold(C64::new(0.0, 0.0), |acc, &(z, c)| {
                            if (z & b).count_ones() % 2 == 0 {
                                acc + c
                            } else {
                                acc - c
                            }
                        })
                    })
                    .collect();
                (x, diag)
            })
            .collect();
        Self {
            n_sites: op.n_sites,
            groups,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_sites
    }

    /// `out = A psi`.
    pub fn apply(&self, psi: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        self.apply_add(psi, out, C64::new(1.0, 0.0));
    }

    /// `out += alpha * A psi`.
    pub fn apply_add(&self, psi: &[C64], out: &mut [C64], alpha: C64) {
        debug_assert_eq!(psi.len(), self.dim());
        for (x, diag) in &self.groups {
            let x = *x as usize;
            for (b, (&p, &d)) in psi.iter().zip(diag.iter()).enumerate() {
                out[b ^ x] += alpha * d * p;
            }
        }
    }
}
