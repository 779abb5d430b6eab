//! Blockwise Katětov reductions between density ideals and the Φ operator.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use super::reduction::ReductionTable;
use super::transport::{transport, verify_transport, UniformTransport};
use crate::blocks::{check_phi_function, Block, BlockGenerator};
use crate::error::{Error, Result};
use crate::expr::{Expr, SeqFn};
use crate::measure::NonNegMeasure;
use crate::rational::{ceil_to_int, qi, Q};
use crate::sampling::Coverage;

/// Longest tabulated initial segment of an emitted reduction.
pub const TABLE_LIMIT: u64 = 1 << 20;

/// `Φ(f)`: block `n ≥ 1` has `n·f(n)` points of weight `1/f(n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiIdeal {
    pub f: SeqFn,
}

impl PhiIdeal {
    pub fn new(f: SeqFn) -> PhiIdeal {
        PhiIdeal { f }
    }

    pub fn generator(&self) -> BlockGenerator {
        BlockGenerator::phi(self.f.clone())
    }

    pub fn check(&self, horizon: u64) -> Result<()> {
        check_phi_function(&self.f, horizon)
    }

    pub fn blocks(&self, horizon: u64) -> Result<Vec<Block>> {
        self.check(horizon)?;
        self.generator().blocks(1, horizon)
    }
}

pub fn phi_ideal(f: SeqFn) -> PhiIdeal {
    PhiIdeal::new(f)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomViolation {
    pub n: u64,
    #[serde(with = "crate::rational::canon")]
    pub at_plus: Q,
    #[serde(with = "crate::rational::canon")]
    pub limit: Q,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum BlockMethod {
    /// Both blocks are the same measure.
    Identity,
    Uniform(UniformTransport),
    Greedy {
        parts: usize,
        leftover: usize,
        #[serde(with = "crate::rational::canon")]
        leftover_mass: Q,
        parts_ok: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockCertificate {
    pub n: u64,
    #[serde(with = "crate::rational::canon")]
    pub eps: Q,
    #[serde(with = "crate::rational::big")]
    pub targets: BigInt,
    #[serde(with = "crate::rational::big")]
    pub atoms: BigInt,
    pub method: BlockMethod,
    /// Largest `|λ_n(C) − μ_n(f⁻¹[C])|` over the checked subsets.
    #[serde(with = "crate::rational::canon")]
    pub checked_error: Q,
    pub coverage: Coverage,
    pub subsets: usize,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionCertificate {
    pub horizon: u64,
    /// Blocks below this index are sent to 0.
    pub threshold: u64,
    pub atom_violations: Vec<AtomViolation>,
    pub blocks: Vec<BlockCertificate>,
    pub table_len: u64,
}

impl ReductionCertificate {
    pub fn holds(&self) -> bool {
        self.blocks.iter().all(|b| b.holds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReduction {
    pub table: ReductionTable,
    pub certificate: ReductionCertificate,
}

enum Mapper {
    Identity,
    Uniform { t: UniformTransport, a_start: BigInt },
    Greedy(Vec<(u64, u64)>),
}

fn block_work(lams: &BlockGenerator, mus: &BlockGenerator, n: u64, identical: bool, seed: u64) -> Result<(BlockCertificate, Mapper)> {
    let eps = Q::new(BigInt::one(), BigInt::from(n));
    let (a, b) = (lams.block(n)?, mus.block(n)?);
    let seed = seed.wrapping_add(n);
    let cert = |method, checked_error: Q, coverage, subsets| BlockCertificate {
        n,
        eps: eps.clone(),
        targets: a.len.clone(),
        atoms: b.len.clone(),
        holds: checked_error <= eps,
        method,
        checked_error,
        coverage,
        subsets,
    };
    if identical {
        return Ok((cert(BlockMethod::Identity, Q::zero(), Coverage::Exhaustive, 0), Mapper::Identity));
    }
    if let (Some(lw), Some(mw)) = (lams.uniform_weight(n)?, mus.uniform_weight(n)?) {
        let t = UniformTransport::new(a.len.clone(), &lw, b.len.clone(), &mw, &eps)?;
        let (err, coverage, subsets) = match t.sampled_error(seed) {
            Some(found) => found,
            None => return Err(Error::TooLarge(format!("block {n} has {} targets", a.len))),
        };
        if err > t.worst_error {
            return Err(Error::Validation(format!("block {n} exceeds its closed-form error")));
        }
        let c = cert(BlockMethod::Uniform(t.clone()), err, coverage, subsets);
        return Ok((c, Mapper::Uniform { t, a_start: a.start }));
    }
    let (lam, mu) = (lams.materialize(n)?, mus.materialize(n)?);
    let t = transport(&lam, &mu, &eps)?;
    let check = verify_transport(&lam, &mu, &t, &eps, seed)?;
    let method = BlockMethod::Greedy {
        parts: t.parts.len(),
        leftover: t.leftover.len(),
        leftover_mass: t.leftover_mass.clone(),
        parts_ok: check.parts_ok,
    };
    let mut c = cert(method, check.worst_error, check.coverage, check.subsets);
    c.holds &= check.parts_ok;
    Ok((c, Mapper::Greedy(t.map)))
}

/// Blockwise reduction `exh(sup λ_n) ≤_K exh(sup μ_n)`: block `n` of `μ`
/// is transported onto block `n` of `λ` with `ε = 1/n` from the threshold on.
pub fn build_reduction_density(lams: &BlockGenerator, mus: &BlockGenerator, horizon: u64, seed: u64) -> Result<DensityReduction> {
    if horizon == 0 {
        return Err(Error::Validation("horizon must be ≥ 1".into()));
    }
    let identical = lams == mus;
    let mut violations = Vec::new();
    for n in 1..=horizon {
        let want = qi(n);
        if lams.norm(n)? != want || mus.norm(n)? != want {
            return Err(Error::NormMismatch(n));
        }
        if identical {
            continue;
        }
        let (at_plus, _) = mus.atoms_range(n)?;
        let (_, at_minus) = lams.atoms_range(n)?;
        let limit = at_minus / qi(2 * n * n);
        if at_plus > limit {
            violations.push(AtomViolation { n, at_plus, limit });
        }
    }
    if violations.last().is_some_and(|v| v.n == horizon) {
        return Err(Error::AtomConditionFails(violations.iter().map(|v| v.n).collect()));
    }
    let threshold = violations.last().map_or(1, |v| v.n + 1);
    let work: Vec<(BlockCertificate, Mapper)> = (threshold..=horizon)
        .into_par_iter()
        .map(|n| block_work(lams, mus, n, identical, seed))
        .collect::<Result<_>>()?;

    let last = mus.block(horizon)?;
    let table_len = last.end().to_u64().map_or(TABLE_LIMIT, |e| e.min(TABLE_LIMIT));
    let mut table = vec![0u64; table_len as usize];
    for ((_, mapper), n) in work.iter().zip(threshold..) {
        let b = mus.block(n)?;
        let Some(start) = b.start.to_u64().filter(|s| *s < table_len) else {
            break;
        };
        let end = b.end().to_u64().map_or(table_len, |e| e.min(table_len));
        match mapper {
            Mapper::Identity => (start..end).for_each(|x| table[x as usize] = x),
            Mapper::Uniform { t, a_start } => {
                for x in start..end {
                    let y = a_start + t.image(&BigInt::from(x - start));
                    table[x as usize] = y.to_u64().ok_or_else(|| Error::TooLarge(format!("image of {x}")))?;
                }
            }
            Mapper::Greedy(map) => {
                for (x, y) in map {
                    if *x < table_len {
                        table[*x as usize] = *y;
                    }
                }
            }
        }
    }
    let fto = matches!(
        mus,
        BlockGenerator::Phi { .. } | BlockGenerator::AsymptoticDensity | BlockGenerator::Rule { start: None, .. }
    );
    let table = ReductionTable::new(table, None, fto)?
        .with_provenance(format!("blockwise transport, ε = 1/n from block {threshold}"));
    let certificate = ReductionCertificate {
        horizon,
        threshold,
        atom_violations: violations,
        blocks: work.into_iter().map(|(c, _)| c).collect(),
        table_len,
    };
    Ok(DensityReduction { table, certificate })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominationCheck {
    pub n: u64,
    #[serde(with = "crate::rational::big")]
    pub lhs: BigInt,
    #[serde(with = "crate::rational::big")]
    pub rhs: BigInt,
    pub holds: bool,
}

/// `2n²·g(n) ≤ h(n)` on `[1, horizon]`.
pub fn domination_table(g: &SeqFn, h: &SeqFn, horizon: u64) -> Result<Vec<DominationCheck>> {
    (1..=horizon)
        .map(|n| {
            let lhs = g.eval_int(n)? * (2 * n * n);
            let rhs = h.eval_int(n)?;
            Ok(DominationCheck { n, holds: lhs <= rhs, lhs, rhs })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominationReduction {
    pub checks: Vec<DominationCheck>,
    pub reduction: DensityReduction,
}

/// `Φ(g) ≤_K Φ(h)` when `2n²·g(n) ≤ h(n)` from some point on.
pub fn domination_reduction(g: &SeqFn, h: &SeqFn, horizon: u64, seed: u64) -> Result<DominationReduction> {
    check_phi_function(g, horizon)?;
    check_phi_function(h, horizon)?;
    let checks = domination_table(g, h, horizon)?;
    if let Some(bad) = checks.iter().rev().find(|c| !c.holds) {
        if bad.n == horizon {
            return Err(Error::DominationFails(bad.n));
        }
    }
    let reduction = build_reduction_density(&BlockGenerator::phi(g.clone()), &BlockGenerator::phi(h.clone()), horizon, seed)?;
    Ok(DominationReduction { checks, reduction })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiReduction {
    /// Block indices of the input used as `λ_0, λ_1, ...`.
    pub selected: Vec<u64>,
    /// `(n, f(n))` for `1 ≤ n ≤ horizon`.
    pub f_table: Vec<(u64, String)>,
    /// Closed form of `f` when it is `2c·n^(d+2)` on the whole table.
    pub f: Option<SeqFn>,
    pub nu: Vec<NonNegMeasure>,
    pub reduction: DensityReduction,
}

fn select_norms(lams: &BlockGenerator, horizon: u64) -> Result<Vec<u64>> {
    let window = lams.first() + 8 * horizon + 64;
    let mut out = Vec::new();
    let mut next = lams.first();
    for k in 0..horizon {
        let need = qi(k + 1);
        let found = (next..=window)
            .take_while(|j| lams.has_block(*j))
            .map(|j| lams.norm(j).map(|v| (j, v)))
            .find(|r| r.as_ref().map_or(true, |(_, v)| *v >= need))
            .transpose()?;
        let Some((j, _)) = found else {
            return Err(Error::NormTooSmall(k));
        };
        out.push(j);
        next = j + 1;
    }
    Ok(out)
}

/// `2c·n^(d+2)` matching `f(n)` for every tabulated `n`, with `d ≤ 8`.
fn monomial_fit(f_vals: &[BigInt]) -> Option<SeqFn> {
    let c = f_vals.first()? / 2;
    (0..=8u32).find_map(|d| {
        let fits = f_vals.iter().enumerate().all(|(k, v)| *v == &c * 2 * BigInt::from(k as u64 + 1).pow(d + 2));
        fits.then(|| SeqFn::plain(Expr::mul(Expr::constant(Q::from_integer(&c * 2)), Expr::pow(Expr::N, d as i64 + 2))))
    })
}

/// `I ≤_K Φ(f)` with `f(n) = 2n²·⌈1/at⁻(ν_n)⌉`, where `ν_n` rescales the
/// `(n−1)`-th selected block to norm `n`.
pub fn reduce_to_phi(lams: &BlockGenerator, horizon: u64, seed: u64) -> Result<PhiReduction> {
    let selected = select_norms(lams, horizon)?;
    let mut nu = Vec::new();
    let mut f_vals: Vec<BigInt> = Vec::new();
    for (k, &j) in selected.iter().enumerate() {
        let n = k as u64 + 1;
        let lam = lams.materialize(j)?;
        let scale = qi(n) / lam.inner().norm();
        let v = NonNegMeasure::new(lam.inner().scale(&scale))?;
        let (_, at_minus) = v.atoms_range()?;
        f_vals.push(ceil_to_int(&at_minus.recip()) * (2 * n * n));
        nu.push(v);
    }
    let mut first_end = 0u64;
    let mut blocks = Vec::new();
    for (k, v) in f_vals.iter().enumerate() {
        let n = k as u64 + 1;
        let len = (v * n).to_u64().filter(|l| *l <= crate::blocks::MATERIALIZE_LIMIT).ok_or_else(|| Error::TooLarge(format!("Φ(f) block {n}")))?;
        let w = Q::new(BigInt::one(), v.clone());
        blocks.push(NonNegMeasure::uniform(first_end..first_end + len, &w)?.into_inner());
        first_end += len;
    }
    let f = monomial_fit(&f_vals);
    let nu_gen = BlockGenerator::Explicit { first: 1, blocks: nu.iter().map(|m| m.inner().clone()).collect() };
    let phi_gen = match &f {
        Some(f) => BlockGenerator::phi(f.clone()),
        None => BlockGenerator::Explicit { first: 1, blocks },
    };
    let reduction = build_reduction_density(&nu_gen, &phi_gen, horizon, seed)?;
    let f_table = f_vals.iter().enumerate().map(|(k, v)| (k as u64 + 1, v.to_string())).collect();
    Ok(PhiReduction { selected, f_table, f, nu, reduction })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TukeyMap {
    pub phi: PhiReduction,
    /// `(n, 2n²·f(n))`.
    pub psi_table: Vec<(u64, String)>,
    pub psi: Option<SeqFn>,
}

/// `Ψ(I) = n ↦ 2n²·f(n)` for the `f` of [`reduce_to_phi`].
pub fn tukey_map(lams: &BlockGenerator, horizon: u64, seed: u64) -> Result<TukeyMap> {
    let phi = reduce_to_phi(lams, horizon, seed)?;
    let psi_table = phi
        .f_table
        .iter()
        .map(|(n, v)| {
            let v: BigInt = v.parse().expect("decimal");
            (*n, (v * (2 * n * n)).to_string())
        })
        .collect();
    let psi = phi.f.as_ref().map(|f| {
        SeqFn::plain(Expr::mul(Expr::mul(Expr::int(2), Expr::pow(Expr::N, 2)), f.body().clone()))
    });
    Ok(TukeyMap { phi, psi_table, psi })
}

impl TukeyMap {
    /// For `h ≥ Ψ` on `[1, horizon]`, replays `Φ(f) ≤_K Φ(h)`.
    pub fn replay(&self, h: &SeqFn, horizon: u64, seed: u64) -> Result<DominationReduction> {
        let f = self.phi.f.clone().ok_or_else(|| Error::Precondition("f has no closed form".into()))?;
        for (n, v) in &self.psi_table {
            if *n > horizon {
                break;
            }
            if h.eval_int(*n)? < v.parse::<BigInt>().expect("decimal") {
                return Err(Error::DominationFails(*n));
            }
        }
        domination_reduction(&f, h, horizon, seed)
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn f(s: &str) -> SeqFn {
        SeqFn::parse(s).unwrap()
    }

    #[test]
    fn phi_blocks() {
        let p = phi_ideal(f("n"));
        let b = p.blocks(3).unwrap();
        assert_eq!((b[0].start.clone(), b[0].len.clone()), (0.into(), 1.into()));
        assert_eq!((b[1].start.clone(), b[1].len.clone()), (1.into(), 4.into()));
        assert_eq!((b[2].start.clone(), b[2].len.clone()), (5.into(), 9.into()));
    }

    #[test]
    fn cubic_domination() {
        let r = domination_reduction(&f("n"), &f("(mul 2 (pow n 3))"), 6, 0).unwrap();
        assert!(r.checks.iter().all(|c| c.holds));
        let cert = &r.reduction.certificate;
        assert_eq!(cert.threshold, 1);
        assert!(cert.holds());
        for b in &cert.blocks {
            assert!(b.checked_error <= q(1, b.n as i64));
        }
        // block 2 of Φ(2n³) is [2, 34), sent onto block 2 of Φ(n), [1, 5)
        let t = &r.reduction.table;
        assert_eq!(t.image(0), Some(0));
        assert_eq!((2..34).map(|x| t.image(x).unwrap()).collect::<std::collections::BTreeSet<_>>().len(), 4);
        assert!((2..34).all(|x| (1..5).contains(&t.image(x).unwrap())));
    }

    #[test]
    fn domination_failures() {
        assert!(matches!(domination_reduction(&f("(add n 1)"), &f("(add n 1)"), 5, 0), Err(Error::DominationFails(5))));
        assert!(domination_reduction(&f("1"), &f("(mul 2 (pow n 2))"), 5, 0).is_ok());
    }

    #[test]
    fn identical_generators() {
        let g = BlockGenerator::phi(f("n"));
        let r = build_reduction_density(&g, &g, 5, 0).unwrap();
        assert_eq!(r.table.table(), (0..r.table.domain_len()).collect::<Vec<_>>());
    }

    #[test]
    fn single_atom_targets() {
        // λ_n = n·δ_n against Φ(2n²)
        let lams = BlockGenerator::Rule {
            start: Some(f("n")),
            length: f("1"),
            weight: f("n"),
            first: 1,
        };
        let r = build_reduction_density(&lams, &BlockGenerator::phi(f("(mul 2 (pow n 2))")), 5, 0).unwrap();
        assert!(r.certificate.blocks.iter().all(|b| b.checked_error == Q::zero()));
        let t = &r.table;
        assert_eq!(t.image(5), Some(2));
        assert_eq!(t.image(20), Some(3));
    }

    #[test]
    fn phi_recipe() {
        let lams = BlockGenerator::Rule {
            start: Some(f("n")),
            length: f("1"),
            weight: f("(add n 1)"),
            first: 0,
        };
        let r = reduce_to_phi(&lams, 6, 0).unwrap();
        assert_eq!(r.selected, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(r.f.as_ref().unwrap().eval_int(5).unwrap(), BigInt::from(50));
        assert!(r.reduction.certificate.holds());
        let t = tukey_map(&lams, 6, 0).unwrap();
        assert_eq!(t.psi.as_ref().unwrap().eval_int(3).unwrap(), BigInt::from(4 * 81));
        assert!(t.replay(&t.psi.clone().unwrap(), 6, 0).is_ok());
    }

    #[test]
    fn ceiling_of_two_thirds() {
        use crate::measure::{FinMeasure, Point};
        // ν_2 = λ_1 rescaled to norm 2 has atoms 2/3 and 4/3
        let lams = BlockGenerator::Explicit {
            first: 0,
            blocks: vec![
                FinMeasure::dirac(Point::Nat(0), q(1, 1)),
                FinMeasure::from_atoms([(Point::Nat(1), q(1, 1)), (Point::Nat(2), q(2, 1))]),
            ],
        };
        let r = reduce_to_phi(&lams, 2, 0).unwrap();
        assert_eq!(r.f_table[1], (2, "16".to_string()));
    }
}
