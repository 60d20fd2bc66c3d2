use rand::seq::SliceRandom;
use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::record::{InequalityCheck, RunRecord, Table};
use crate::bounds::{nested_commutator, nested_commutator_bound, Regime};
use crate::error::{Error, Result};
use crate::models::{rng_from_seed, ModelRng};
use crate::pauli::{general_operator_norm, OperatorSum};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CommutatorConfig {
    pub instances: usize,
    pub seed: u64,
    pub n_max: usize,
    pub m_max: usize,
    /// Locality of `H + V` in the strict regime.
    pub strict_k: usize,
    /// Locality of `V` against a commuting core.
    pub commuting_q: usize,
    /// Decay scale of the quasi-local perturbation.
    pub quasi_q_star: f64,
    /// Largest locality of the diagonal core terms.
    pub core_locality: usize,
    pub max_terms: usize,
}

impl Default for CommutatorConfig {
    fn default() -> Self {
        Self {
            instances: 200,
            seed: 0,
            n_max: 5,
            m_max: 4,
            strict_k: 2,
            commuting_q: 2,
            quasi_q_star: 1.0,
            core_locality: 3,
            max_terms: 6,
        }
    }
}

fn random_string(n: usize, k: usize, paulis: &[char], coeff: f64, rng: &mut ModelRng) -> Result<OperatorSum> {
    let mut sites: Vec<usize> = (0..n).collect();
    sites.shuffle(rng);
    let factors: Vec<(usize, char)> = sites[..k]
        .iter()
        .map(|&s| (s, paulis[rng.random_range(0..paulis.len())]))
        .collect();
    OperatorSum::string(n, &factors, coeff)
}

fn random_sum(
    n: usize,
    max_k: usize,
    paulis: &[char],
    terms: usize,
    weight: impl Fn(usize) -> f64,
    rng: &mut ModelRng,
) -> Result<OperatorSum> {
    let mut op = OperatorSum::zero(n);
    for _ in 0..terms {
        let k = rng.random_range(1..=max_k.min(n));
        let c: f64 = rng.random_range(-1.0..=1.0);
        op = op.add(&random_string(n, k, paulis, c * weight(k), rng)?)?;
    }
    Ok(op)
}

const ALL: [char; 3] = ['X', 'Y', 'Z'];

struct Instance {
    n: usize,
    m: usize,
    h: OperatorSum,
    v: OperatorSum,
    regime: Regime,
    v_norm: f64,
}

fn instance(cfg: &CommutatorConfig, regime_idx: usize, rng: &mut ModelRng) -> Result<Instance> {
    let n = rng.random_range(2..=cfg.n_max);
    let m = rng.random_range(1..=cfg.m_max);
    let t_h = rng.random_range(1..=cfg.max_terms);
    let t_v = rng.random_range(1..=cfg.max_terms);
    Ok(match regime_idx {
        0 => {
            let h = random_sum(n, cfg.strict_k, &ALL, t_h, |_| 1.0, rng)?;
            let v = random_sum(n, cfg.strict_k, &ALL, t_v, |_| 1.0, rng)?;
            let k = h.max_locality().max(v.max_locality()).max(1) as f64;
            let v_norm = v.x_norm();
            Instance {
                n,
                m,
                h,
                v,
                regime: Regime::Strict { k },
                v_norm,
            }
        }
        1 => {
            let h = random_sum(n, cfg.core_locality, &['Z'], t_h, |_| 1.0, rng)?;
            let v = random_sum(n, cfg.commuting_q, &ALL, t_v, |_| 1.0, rng)?;
            let q = v.max_locality().max(1) as f64;
            let v_norm = v.x_norm();
            Instance {
                n,
                m,
                h,
                v,
                regime: Regime::CommutingCore { q },
                v_norm,
            }
        }
        _ => {
            let h = random_sum(n, cfg.core_locality, &['Z'], t_h, |_| 1.0, rng)?;
            let qs = cfg.quasi_q_star;
            let v = random_sum(n, n, &ALL, t_v, |k| (-(k as f64) / qs).exp(), rng)?;
            let v_norm = v.qx_norm(qs)?;
            Instance {
                n,
                m,
                h,
                v,
                regime: Regime::QuasiLocal { q_star: qs },
                v_norm,
            }
        }
    })
}

/// Exact `‖ad_H^m(V)‖` against the regime bound on random small instances.
pub fn commutator_sweep(cfg: &CommutatorConfig) -> Result<RunRecord> {
    if cfg.instances == 0 || cfg.n_max < 2 || cfg.m_max == 0 || cfg.max_terms == 0 {
        return Err(Error::Parameter(
            "sweep needs instances, n_max >= 2, m_max >= 1 and terms".into(),
        ));
    }
    if cfg.strict_k == 0 || cfg.commuting_q == 0 || cfg.core_locality == 0 || !(cfg.quasi_q_star > 0.0) {
        return Err(Error::Parameter("localities must be positive".into()));
    }
    let mut rec = RunRecord::new("commutator_sweep", cfg.seed, cfg)?;
    let jobs: Vec<(usize, usize)> = (0..3).flat_map(|r| (0..cfg.instances).map(move |i| (r, i))).collect();
    let results = jobs
        .par_iter()
        .map(|&(r, i)| {
            let mut rng = rng_from_seed(cfg.seed.wrapping_add(((r as u64) << 32) | i as u64));
            let inst = instance(cfg, r, &mut rng)?;
            let m_bound = inst.h.loc_norm();
            let lhs = general_operator_norm(&nested_commutator(&inst.h, &inst.v, inst.m)?)?;
            let rhs = nested_commutator_bound(inst.regime, inst.m, m_bound, inst.v_norm)?;
            Ok((r, i, inst, m_bound, lhs, rhs))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(
        "instances",
        &["regime", "instance", "n", "m", "M", "v_norm", "exact_norm", "bound"],
    );
    for (r, i, inst, m_bound, lhs, rhs) in results {
        rec.check(InequalityCheck::new(
            inst.regime.name(),
            format!("{} instance={i} n={} m={}", inst.regime, inst.n, inst.m),
            lhs,
            rhs,
        ));
        t.push(vec![
            r as f64,
            i as f64,
            inst.n as f64,
            inst.m as f64,
            m_bound,
            inst.v_norm,
            lhs,
            rhs,
        ]);
    }
    rec.tables.push(t);
    Ok(rec.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sweep_passes_and_covers_each_regime() {
        let cfg = CommutatorConfig {
            instances: 15,
            ..CommutatorConfig::default()
        };
        let r = commutator_sweep(&cfg).unwrap();
        assert!(r.passed, "{:?}", r.checks.iter().find(|c| c.violated()));
        for name in ["strict", "commuting", "quasi-local"] {
            assert_eq!(r.checks_of(name).count(), 15);
        }
    }

    #[test]
    fn commuting_instances_have_diagonal_cores() {
        let cfg = CommutatorConfig::default();
        let mut rng = rng_from_seed(3);
        for _ in 0..20 {
            let inst = instance(&cfg, 1, &mut rng).unwrap();
            assert!(inst.h.is_diagonal() && inst.h.terms_mutually_commute());
            assert!(inst.v.max_locality() as usize <= cfg.commuting_q);
        }
    }

    #[test]
    fn quasi_local_weights_decay_with_locality() {
        let cfg = CommutatorConfig {
            quasi_q_star: 0.5,
            ..CommutatorConfig::default()
        };
        let mut rng = rng_from_seed(9);
        let inst = instance(&cfg, 2, &mut rng).unwrap();
        for t in inst.v.terms() {
            assert!(t.coeff.norm() <= (-(t.locality() as f64) / 0.5).exp() + 1e-15);
        }
    }

    #[test]
    fn zero_instances_are_rejected() {
        let cfg = CommutatorConfig {
            instances: 0,
            ..CommutatorConfig::default()
        };
        assert!(commutator_sweep(&cfg).is_err());
    }
}
