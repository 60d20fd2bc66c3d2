//! Piecewise-linear time-dependent Hamiltonians.
//!
//! A schedule is an ordered list of knots. Between knots every Pauli
//! coefficient is interpolated linearly, so slopes are constant on each
//! segment and total variations are exact finite sums.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{commutator, OperatorSum, PauliTerm, C64};

const TIME_TOL: f64 = 1e-12;
const NORM_TOL: f64 = 1e-9;

/// Structural class of a schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseTag {
    /// General `q`-local schedule with bounded local norm.
    General = 1,
    /// Split `H_C + V` with `[V, H'] = 0`.
    CommutingDrive = 2,
    /// Mutually commuting core plus a drive with `[V, H'] = 0`.
    CommutingCore = 3,
    /// As the commuting-core case but with a quasi-local drive.
    QuasiLocalCore = 4,
}

impl CaseTag {
    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn from_number(k: u8) -> Result<Self> {
        match k {
            1 => Ok(Self::General),
            2 => Ok(Self::CommutingDrive),
            3 => Ok(Self::CommutingCore),
            4 => Ok(Self::QuasiLocalCore),
            _ => Err(Error::Parameter(format!("unknown case tag {k}"))),
        }
    }

    /// Whether the sharper Poisson-type bound applies.
    pub fn uses_second_kind(self) -> bool {
        self == Self::CommutingCore
    }
}

/// Norm used to measure total variation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum NormKind {
    X,
    QX(f64),
}

impl NormKind {
    pub fn eval(self, op: &OperatorSum) -> Result<f64> {
        match self {
            NormKind::X => Ok(op.x_norm()),
            NormKind::QX(q) => op.qx_norm(q),
        }
    }
}

/// Knot of a schedule: `H(time) = core + perturbation`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub time: f64,
    pub core: OperatorSum,
    pub perturbation: OperatorSum,
}

impl Knot {
    pub fn hamiltonian(&self) -> OperatorSum {
        self.core.add(&self.perturbation).expect("knot parts share n_sites")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    n_sites: usize,
    knots: Vec<Knot>,
    split: bool,
    case: Option<CaseTag>,
}

/// Total variation over a window together with its per-site density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variation {
    pub value: f64,
    pub lambda: f64,
}

impl Schedule {
    /// Unsplit schedule from `(time, H)` pairs.
    pub fn new(knots: Vec<(f64, OperatorSum)>) -> Result<Self> {
        let n = knots
            .first()
            .map(|k| k.1.n_sites())
            .ok_or_else(|| Error::Empty("schedule needs at least one knot".into()))?;
        let knots = knots
            .into_iter()
            .map(|(time, h)| Knot {
                time,
                perturbation: OperatorSum::zero(h.n_sites()),
                core: h,
            })
            .collect();
        Self::build(n, knots, false, None)
    }

    /// Split schedule from `(time, H_C, V)` triples.
    pub fn new_split(knots: Vec<(f64, OperatorSum, OperatorSum)>) -> Result<Self> {
        let n = knots
            .first()
            .map(|k| k.1.n_sites())
            .ok_or_else(|| Error::Empty("schedule needs at least one knot".into()))?;
        let knots = knots
            .into_iter()
            .map(|(time, core, perturbation)| Knot {
                time,
                core,
                perturbation,
            })
            .collect();
        Self::build(n, knots, true, None)
    }

    fn build(n_sites: usize, knots: Vec<Knot>, split: bool, case: Option<CaseTag>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Empty("schedule needs at least one knot".into()));
        }
        if knots[0].time.abs() > TIME_TOL {
            return Err(Error::Parameter(format!(
                "first knot must sit at t = 0, found {}",
                knots[0].time
            )));
        }
        for w in knots.windows(2) {
            if !(w[1].time > w[0].time) {
                return Err(Error::Parameter("knot times must increase strictly".into()));
            }
        }
        for k in &knots {
            if !k.time.is_finite() {
                return Err(Error::Parameter("knot time is not finite".into()));
            }
            if k.core.n_sites() != n_sites || k.perturbation.n_sites() != n_sites {
                return Err(Error::Dimension("knots disagree on n_sites".into()));
            }
        }
        let mut knots = knots;
        knots[0].time = 0.0;
        Ok(Self {
            n_sites,
            knots,
            split,
            case,
        })
    }

    /// Attaches a case tag after checking its preconditions.
    pub fn with_case(mut self, case: CaseTag, q: f64, m_bound: f64) -> Result<Self> {
        self.verify_case(case, q, m_bound)?;
        self.case = Some(case);
        Ok(self)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    pub fn is_split(&self) -> bool {
        self.split
    }

    pub fn case(&self) -> Option<CaseTag> {
        self.case
    }

    pub fn final_time(&self) -> f64 {
        self.knots.last().map(|k| k.time).unwrap_or(0.0)
    }

    pub fn knot_times(&self) -> Vec<f64> {
        self.knots.iter().map(|k| k.time).collect()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let tf = self.final_time();
        if !(t >= -TIME_TOL && t <= tf + TIME_TOL) {
            return Err(Error::Range(format!("time {t} outside [0, {tf}]")));
        }
        Ok(())
    }

    /// Index `i` of the segment `[t_i, t_{i+1})` holding `t`; the last
    /// segment also owns the final time.
    pub fn segment_of(&self, t: f64) -> usize {
        let nseg = self.knots.len().saturating_sub(1);
        if nseg == 0 {
            return 0;
        }
        let idx = self.knots.partition_point(|k| k.time <= t);
        idx.saturating_sub(1).min(nseg - 1)
    }

    /// Interpolation weight of the right knot for time `t` in segment `i`.
    pub(crate) fn weight(&self, i: usize, t: f64) -> f64 {
        if i + 1 >= self.knots.len() {
            return 0.0;
        }
        let (a, b) = (self.knots[i].time, self.knots[i + 1].time);
        ((t - a) / (b - a)).clamp(0.0, 1.0)
    }

    fn interpolate<F>(&self, t: f64, part: F) -> Result<OperatorSum>
    where
        F: Fn(&Knot) -> OperatorSum,
    {
        self.check_time(t)?;
        if self.knots.len() == 1 {
            return Ok(part(&self.knots[0]));
        }
        let i = self.segment_of(t);
        let w = self.weight(i, t);
        let a = part(&self.knots[i]);
        let b = part(&self.knots[i + 1]);
        a.scale(1.0 - w).axpy(w, &b)
    }

    pub fn evaluate(&self, t: f64) -> Result<OperatorSum> {
        self.interpolate(t, Knot::hamiltonian)
    }

    pub fn core_at(&self, t: f64) -> Result<OperatorSum> {
        self.interpolate(t, |k| k.core.clone())
    }

    pub fn perturbation_at(&self, t: f64) -> Result<OperatorSum> {
        self.interpolate(t, |k| k.perturbation.clone())
    }

    /// Slope of segment `i`.
    pub fn segment_slope(&self, i: usize) -> OperatorSum {
        if i + 1 >= self.knots.len() {
            return OperatorSum::zero(self.n_sites);
        }
        let (a, b) = (&self.knots[i], &self.knots[i + 1]);
        b.hamiltonian()
            .sub(&a.hamiltonian())
            .expect("same n_sites")
            .scale(1.0 / (b.time - a.time))
    }

    /// `dH/dt` at `t`, using the right derivative at interior knots.
    pub fn derivative(&self, t: f64) -> Result<OperatorSum> {
        self.check_time(t)?;
        Ok(self.segment_slope(self.segment_of(t)))
    }

    /// Exact `∫ ‖H'(t)‖ dt` over `[ta, tb]`.
    pub fn total_variation(&self, norm: NormKind, ta: f64, tb: f64) -> Result<Variation> {
        self.check_time(ta)?;
        self.check_time(tb)?;
        if tb < ta {
            return Err(Error::Range(format!("window [{ta}, {tb}] is reversed")));
        }
        let mut value = 0.0;
        for i in 0..self.knots.len().saturating_sub(1) {
            let (a, b) = (self.knots[i].time, self.knots[i + 1].time);
            let lo = a.max(ta);
            let hi = b.min(tb);
            if hi <= lo {
                continue;
            }
            let jump = self.knots[i + 1].hamiltonian().sub(&self.knots[i].hamiltonian())?;
            value += norm.eval(&jump)? * (hi - lo) / (b - a);
        }
        Ok(Variation {
            value,
            lambda: value / self.n_sites as f64,
        })
    }

    /// Cumulative X-norm variation from 0 to `t`.
    pub fn variation_to(&self, t: f64) -> Result<f64> {
        Ok(self.total_variation(NormKind::X, 0.0, t)?.value)
    }

    /// Same knot Hamiltonians placed at new times.
    pub fn retimed(&self, times: &[f64]) -> Result<Schedule> {
        if times.len() != self.knots.len() {
            return Err(Error::Dimension("one time per knot required".into()));
        }
        let knots = self
            .knots
            .iter()
            .zip(times)
            .map(|(k, &t)| Knot { time: t, ..k.clone() })
            .collect();
        Self::build(self.n_sites, knots, self.split, self.case)
    }

    /// Scales all knot times by `factor`.
    pub fn stretched(&self, factor: f64) -> Result<Schedule> {
        if !(factor > 0.0) {
            return Err(Error::Parameter("stretch factor must be positive".into()));
        }
        let t: Vec<f64> = self.knots.iter().map(|k| k.time * factor).collect();
        self.retimed(&t)
    }

    /// Checks the machine-verifiable preconditions of a case tag.
    ///
    /// `q` is the locality bound (for the quasi-local case it is only used by
    /// the caller's norm choice) and `m_bound` bounds the local norm of the
    /// full Hamiltonian (general case) or of the core (split cases).
    pub fn verify_case(&self, case: CaseTag, q: f64, m_bound: f64) -> Result<()> {
        let fail = |m: String| Err(Error::Case(m));
        let mtol = m_bound * (1.0 + NORM_TOL) + NORM_TOL;
        if case != CaseTag::General && !self.split {
            return fail(format!("case {} needs a core/perturbation split", case.number()));
        }
        for (idx, k) in self.knots.iter().enumerate() {
            let h = k.hamiltonian();
            match case {
                CaseTag::General | CaseTag::CommutingDrive => {
                    if h.max_locality() as f64 > q + NORM_TOL {
                        return fail(format!("knot {idx}: locality {} exceeds q = {q}", h.max_locality()));
                    }
                }
                CaseTag::CommutingCore | CaseTag::QuasiLocalCore => {}
            }
            let ln = if case == CaseTag::General {
                h.loc_norm()
            } else {
                k.core.loc_norm()
            };
            if ln > mtol {
                return fail(format!("knot {idx}: local norm {ln} exceeds M = {m_bound}"));
            }
        }
        for i in 0..self.knots.len().saturating_sub(1) {
            let slope = self.segment_slope(i);
            if case == CaseTag::CommutingCore && slope.max_locality() as f64 > q + NORM_TOL {
                return fail(format!(
                    "segment {i}: derivative locality {} exceeds q = {q}",
                    slope.max_locality()
                ));
            }
            if matches!(case, CaseTag::CommutingCore | CaseTag::QuasiLocalCore) {
                let union = OperatorSum::from_terms(
                    self.n_sites,
                    self.knots[i]
                        .core
                        .terms()
                        .chain(self.knots[i + 1].core.terms())
                        .map(|t| PauliTerm {
                            coeff: C64::new(1.0, 0.0),
                            ..t
                        }),
                )?;
                if !union.terms_mutually_commute() {
                    return fail(format!("segment {i}: core terms do not commute"));
                }
            }
            if case != CaseTag::General {
                for k in [&self.knots[i], &self.knots[i + 1]] {
                    let c = commutator(&k.perturbation, &slope)?;
                    if c.x_norm() > NORM_TOL {
                        return fail(format!(
                            "segment {i}: perturbation does not commute with the derivative"
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Serializes to the knot-block text format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n_sites = {}", self.n_sites);
        if let Some(c) = self.case {
            let _ = writeln!(s, "case = {}", c.number());
        }
        for k in &self.knots {
            let _ = writeln!(s, "\n[knot]\ntime = {:.17e}", k.time);
            if self.split {
                let _ = write!(s, "[core]\n{}", k.core.to_text());
                let _ = write!(s, "[perturbation]\n{}", k.perturbation.to_text());
            } else {
                s.push_str(&k.core.to_text());
            }
        }
        s
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Block {
    Bare,
    Core,
    Perturbation,
}

struct PendingKnot<'a> {
    line: usize,
    time: Option<f64>,
    bare: Vec<(usize, &'a str)>,
    core: Vec<(usize, &'a str)>,
    pert: Vec<(usize, &'a str)>,
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut n_sites: Option<usize> = None;
        let mut case: Option<CaseTag> = None;
        let mut knots: Vec<PendingKnot> = Vec::new();
        let mut block = Block::Bare;
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line {
                "[knot]" => {
                    knots.push(PendingKnot {
                        line: lineno,
                        time: None,
                        bare: Vec::new(),
                        core: Vec::new(),
                        pert: Vec::new(),
                    });
                    block = Block::Bare;
                    continue;
                }
                "[core]" | "[perturbation]" => {
                    if knots.is_empty() {
                        return Err(Error::parse(lineno, "operator block outside a knot"));
                    }
                    block = if line == "[core]" {
                        Block::Core
                    } else {
                        Block::Perturbation
                    };
                    continue;
                }
                _ => {}
            }
            if let Some((key, value)) = line.split_once('=') {
                let (key, value) = (key.trim(), value.trim());
                let bad = |what: &str| Error::parse(lineno, format!("invalid {what} '{value}'"));
                match (key, knots.last_mut()) {
                    ("n_sites", None) => n_sites = Some(value.parse().map_err(|_| bad("n_sites"))?),
                    ("case", None) => {
                        let k: u8 = value.parse().map_err(|_| bad("case"))?;
                        case = Some(CaseTag::from_number(k).map_err(|_| bad("case"))?);
                    }
                    ("time", Some(k)) => k.time = Some(value.parse().map_err(|_| bad("time"))?),
                    _ => return Err(Error::parse(lineno, format!("unexpected key '{key}'"))),
                }
                continue;
            }
            let k = knots
                .last_mut()
                .ok_or_else(|| Error::parse(lineno, "operator line outside a knot"))?;
            match block {
                Block::Bare => k.bare.push((lineno, raw)),
                Block::Core => k.core.push((lineno, raw)),
                Block::Perturbation => k.pert.push((lineno, raw)),
            }
        }
        let n = n_sites.ok_or_else(|| Error::parse(1, "missing n_sites"))?;
        if knots.is_empty() {
            return Err(Error::Empty("schedule file has no knots".into()));
        }
        let split = knots.iter().any(|k| !k.core.is_empty() || !k.pert.is_empty());
        let mut built = Vec::with_capacity(knots.len());
        for k in knots {
            let time = k.time.ok_or_else(|| Error::parse(k.line, "knot without time"))?;
            if split && !k.bare.is_empty() {
                return Err(Error::parse(k.bare[0].0, "bare operator line in a split schedule"));
            }
            let (core, pert) = if split { (k.core, k.pert) } else { (k.bare, Vec::new()) };
            built.push(Knot {
                time,
                core: OperatorSum::from_lines(n, core)?,
                perturbation: OperatorSum::from_lines(n, pert)?,
            });
        }
        Self::build(n, built, split, case)
    }
}

/// Quench schedule `(0, H0 + V0) -> (1, H0)` whose variation equals `‖V0‖`.
pub fn make_static_quench(h0: &OperatorSum, v0: &OperatorSum) -> Result<Schedule> {
    if h0.n_sites() != v0.n_sites() {
        return Err(Error::Dimension("H0 and V0 differ in n_sites".into()));
    }
    Schedule::new_split(vec![
        (0.0, h0.clone(), v0.clone()),
        (1.0, h0.clone(), OperatorSum::zero(h0.n_sites())),
    ])
}

/// Extended evolution used for leakage accounting up to `t1`.
///
/// The result starts from the bare core, ramps the perturbation on over one
/// time unit, follows `s` on `[0, t1]` shifted by one unit, then ramps the
/// perturbation off over a final unit.
pub fn extend_evolution(s: &Schedule, t1: f64) -> Result<Schedule> {
    if !s.split {
        return Err(Error::Case("extension needs a core/perturbation split".into()));
    }
    s.check_time(t1)?;
    let n = s.n_sites;
    let zero = OperatorSum::zero(n);
    let mut knots = vec![(0.0, s.knots[0].core.clone(), zero.clone())];
    for k in s.knots.iter().filter(|k| k.time < t1 - TIME_TOL) {
        knots.push((1.0 + k.time, k.core.clone(), k.perturbation.clone()));
    }
    knots.push((1.0 + t1, s.core_at(t1)?, s.perturbation_at(t1)?));
    knots.push((2.0 + t1, s.core_at(t1)?, zero));
    Schedule::new_split(knots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn op(label: &str, c: f64) -> OperatorSum {
        OperatorSum::from_label(label, c).unwrap()
    }

    fn simple() -> Schedule {
        Schedule::new(vec![
            (0.0, op("Z", 1.0)),
            (1.0, op("Z", 1.0).add(&op("X", 0.3)).unwrap()),
        ])
        .unwrap()
    }

    #[test]
    fn evaluate_and_derivative() {
        let s = simple();
        let mid = s.evaluate(0.5).unwrap();
        assert_eq!(mid, op("Z", 1.0).add(&op("X", 0.15)).unwrap());
        let d = s.derivative(0.3).unwrap();
        assert!((d.coeff(1, 0).re - 0.3).abs() < 1e-15 && d.len() == 1);
        let c = Schedule::new(vec![(0.0, op("Z", 1.0))]).unwrap();
        assert!(c.derivative(0.0).unwrap().is_empty());
        assert!(matches!(s.evaluate(1.5), Err(Error::Range(_))));
    }

    #[test]
    fn right_derivative_at_interior_knot() {
        let s = Schedule::new(vec![(0.0, op("Z", 0.0)), (1.0, op("Z", 1.0)), (2.0, op("Z", 3.0))]).unwrap();
        assert!((s.derivative(1.0).unwrap().coeff(0, 1).re - 2.0).abs() < 1e-15);
        assert!((s.derivative(2.0).unwrap().coeff(0, 1).re - 2.0).abs() < 1e-15);
    }

    #[test]
    fn variation_examples() {
        let s = simple();
        let v = s.total_variation(NormKind::X, 0.0, 1.0).unwrap();
        assert!((v.value - 0.3).abs() < 1e-15);
        assert!((v.lambda - 0.3).abs() < 1e-15);

        let h0 = op("ZZ", 1.0);
        let vv = op("XI", 0.4).add(&op("IY", -0.2)).unwrap();
        let round = Schedule::new(vec![(0.0, h0.clone()), (1.0, h0.add(&vv).unwrap()), (2.0, h0.clone())]).unwrap();
        let tv = round.total_variation(NormKind::X, 0.0, 2.0).unwrap().value;
        assert!((tv - 2.0 * vv.x_norm()).abs() < 1e-14);
        let half = round.total_variation(NormKind::X, 0.5, 1.5).unwrap().value;
        assert!((half - vv.x_norm()).abs() < 1e-14);
    }

    #[test]
    fn quench_variations() {
        let h0 = op("ZZII", 1.0)
            .add(&op("IZZI", 1.0))
            .unwrap()
            .add(&op("IIZZ", 1.0))
            .unwrap();
        let v0 = ["XIII", "IXII", "IIXI", "IIIX"]
            .iter()
            .fold(OperatorSum::zero(4), |acc, l| acc.add(&op(l, 0.2)).unwrap());
        let s = make_static_quench(&h0, &v0).unwrap();
        let tv = s.total_variation(NormKind::X, 0.0, 1.0).unwrap().value;
        assert!((tv - 0.8).abs() < 1e-14);
        assert_eq!(s.evaluate(1.0).unwrap(), h0);

        let zero = make_static_quench(&h0, &OperatorSum::zero(4)).unwrap();
        assert_eq!(zero.total_variation(NormKind::X, 0.0, 1.0).unwrap().value, 0.0);

        let q = make_static_quench(&h0, &op("XXII", 0.1)).unwrap();
        let tq = q.total_variation(NormKind::QX(1.0), 0.0, 1.0).unwrap().value;
        assert!((tq - 0.2 * 1f64.exp().powi(2)).abs() < 1e-14);
    }

    #[test]
    fn extension_variations() {
        let core = op("ZZ", 1.0);
        let v0 = op("XI", 0.5).add(&op("IX", 0.25)).unwrap();
        let zero = OperatorSum::zero(2);

        let none = Schedule::new_split(vec![
            (0.0, core.clone(), zero.clone()),
            (2.0, core.clone(), zero.clone()),
        ])
        .unwrap();
        let e = extend_evolution(&none, 2.0).unwrap();
        assert_eq!(e.total_variation(NormKind::X, 0.0, e.final_time()).unwrap().value, 0.0);

        let constant =
            Schedule::new_split(vec![(0.0, core.clone(), v0.clone()), (3.0, core.clone(), v0.clone())]).unwrap();
        let e = extend_evolution(&constant, 3.0).unwrap();
        let tv = e.total_variation(NormKind::X, 0.0, e.final_time()).unwrap().value;
        assert!((tv - 2.0 * v0.x_norm()).abs() < 1e-14);

        let ramp = Schedule::new_split(vec![(0.0, core.clone(), zero), (3.0, core.clone(), v0.clone())]).unwrap();
        let e = extend_evolution(&ramp, 3.0).unwrap();
        let tv = e.total_variation(NormKind::X, 0.0, e.final_time()).unwrap().value;
        assert!((tv - 2.0 * v0.x_norm()).abs() < 1e-14);

        let mid = extend_evolution(&ramp, 1.5).unwrap();
        let tv = mid.total_variation(NormKind::X, 0.0, mid.final_time()).unwrap().value;
        assert!((tv - v0.x_norm()).abs() < 1e-14);

        assert!(matches!(extend_evolution(&simple(), 0.5), Err(Error::Case(_))));
    }

    #[test]
    fn case_verification() {
        let core = op("ZZI", 1.0).add(&op("IZZ", 1.0)).unwrap();
        let drive = op("XII", 1.0)
            .add(&op("IXI", 1.0))
            .unwrap()
            .add(&op("IIX", 1.0))
            .unwrap();
        let s = Schedule::new_split(vec![
            (0.0, core.clone(), OperatorSum::zero(3)),
            (1.0, core.clone(), drive.scale(0.1)),
        ])
        .unwrap();
        assert!(s.verify_case(CaseTag::CommutingCore, 1.0, 2.0).is_ok());
        assert!(matches!(
            s.verify_case(CaseTag::CommutingCore, 1.0, 1.5),
            Err(Error::Case(_))
        ));
        let bad_core = core.add(&op("XII", 1.0)).unwrap();
        let s2 = Schedule::new_split(vec![
            (0.0, bad_core.clone(), OperatorSum::zero(3)),
            (1.0, bad_core, drive.scale(0.1)),
        ])
        .unwrap();
        assert!(s2.verify_case(CaseTag::CommutingCore, 1.0, 3.0).is_err());
        let twisted =
            Schedule::new_split(vec![(0.0, core.clone(), op("ZII", 0.1)), (1.0, core, drive.scale(0.1))]).unwrap();
        assert!(twisted.verify_case(CaseTag::CommutingCore, 1.0, 2.0).is_err());
        assert!(simple().verify_case(CaseTag::General, 1.0, 1.3).is_ok());
        assert!(simple().verify_case(CaseTag::General, 1.0, 1.2).is_err());
    }

    #[test]
    fn text_round_trip() {
        let s = simple();
        let back: Schedule = s.to_text().parse().unwrap();
        assert_eq!(back, s);
        let core = op("ZZ", 1.0);
        let split = Schedule::new_split(vec![
            (0.0, core.clone(), OperatorSum::zero(2)),
            (0.75, core, op("XI", 0.2)),
        ])
        .unwrap()
        .with_case(CaseTag::CommutingCore, 1.0, 1.0)
        .unwrap();
        let back: Schedule = split.to_text().parse().unwrap();
        assert_eq!(back, split);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!("n_sites = 1\n[knot]\n1.0 Z".parse::<Schedule>().is_err());
        assert!("n_sites = 1\n[knot]\ntime = 0\nfoo = 2".parse::<Schedule>().is_err());
        assert!("n_sites = 1\n[knot]\ntime = 1\n1.0 Z".parse::<Schedule>().is_err());
        assert!("[knot]\ntime = 0\n1.0 Z".parse::<Schedule>().is_err());
    }

    fn arb_schedule() -> impl Strategy<Value = Schedule> {
        let labels = ["XI", "ZZ", "IY", "XZ", "YY"];
        prop::collection::vec((0.1f64..2.0, prop::collection::vec(-1.0f64..1.0, 5)), 1..5).prop_map(move |ks| {
            let mut t = 0.0;
            let knots = ks
                .into_iter()
                .enumerate()
                .map(|(i, (dt, cs))| {
                    if i > 0 {
                        t += dt;
                    }
                    let h = labels
                        .iter()
                        .zip(cs)
                        .fold(OperatorSum::zero(2), |acc, (l, c)| acc.add(&op(l, c)).unwrap());
                    (t, h)
                })
                .collect();
            Schedule::new(knots).unwrap()
        })
    }

    proptest! {
        #[test]
        fn variation_is_additive(s in arb_schedule(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let tf = s.final_time();
            let (lo, hi) = if a < b { (a * tf, b * tf) } else { (b * tf, a * tf) };
            let mid = 0.5 * (lo + hi);
            let whole = s.total_variation(NormKind::X, lo, hi).unwrap().value;
            let parts = s.total_variation(NormKind::X, lo, mid).unwrap().value
                + s.total_variation(NormKind::X, mid, hi).unwrap().value;
            prop_assert!((whole - parts).abs() <= 1e-12 * (1.0 + whole));
        }

        #[test]
        fn variation_is_retiming_invariant(s in arb_schedule(), scale in 0.1f64..10.0, warp in 0.2f64..3.0) {
            let times: Vec<f64> = s.knot_times().iter().map(|t| scale * t.powf(warp)).collect();
            let r = s.retimed(&times).unwrap();
            let a = s.total_variation(NormKind::X, 0.0, s.final_time()).unwrap().value;
            let b = r.total_variation(NormKind::X, 0.0, r.final_time()).unwrap().value;
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
        }

        #[test]
        fn local_norm_bounded_by_knots(s in arb_schedule(), f in 0.0f64..1.0) {
            let t = f * s.final_time();
            let max_knot = s.knots().iter().map(|k| k.hamiltonian().loc_norm()).fold(0.0, f64::max);
            prop_assert!(s.evaluate(t).unwrap().loc_norm() <= max_knot + 1e-12);
        }
    }
}
