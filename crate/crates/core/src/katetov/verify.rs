//! Checking candidate Katětov reductions and upgrading them to finite-to-one maps.

use std::collections::BTreeMap;

use num_traits::Signed;
use serde::Serialize;

use super::reduction::ReductionTable;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::ideal::{block_values, membership, IdealSpec, MembershipVerdict};
use crate::rational::{qi, Q};
use crate::setspec::SetSpec;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KbUpgrade {
    pub table: ReductionTable,
    pub certificate: MembershipVerdict,
    /// `(m, |g⁻¹({m})|)` for fibers with more than one point.
    pub large_fibers: Vec<(u64, usize)>,
    pub max_fiber: usize,
    /// `g(x) = f(x)` or `x ∈ A` for every tabulated `x`.
    pub invariant_holds: bool,
}

/// A fiber spread from the first quarter into the last half of the domain
/// is treated as unbounded.
fn spreads(fiber: &[u64], domain: u64) -> bool {
    fiber.len() >= 2 && fiber[0] < domain / 4 && *fiber.last().expect("non-empty") >= domain / 2
}

/// `g(n) = n` on the pseudo-union `A`, `g(n) = f(n)` elsewhere.
pub fn kb_upgrade(f: &ReductionTable, target: &IdealSpec, a: &SetSpec, horizon: u64, tolerance: &Q) -> Result<KbUpgrade> {
    let certificate = membership(target, a, horizon, tolerance)?;
    if !certificate.is_in() {
        return Err(Error::Precondition("the pseudo-union is not certified to lie in the ideal".into()));
    }
    let mut off_a: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    let mut table = Vec::with_capacity(horizon as usize);
    let mut invariant_holds = true;
    for x in 0..horizon {
        let y = f.image(x).ok_or(Error::DomainTooSmall)?;
        let in_a = a.contains(x)?;
        if !in_a {
            off_a.entry(y).or_default().push(x);
        }
        let g = if in_a { x } else { y };
        invariant_holds &= g == y || in_a;
        table.push(g);
    }
    if let Some((m, _)) = off_a.iter().find(|(_, fib)| spreads(fib, horizon)) {
        return Err(Error::NotPseudoUnion(*m));
    }
    let table = ReductionTable::new(table, None, true)?.with_provenance("identity on the pseudo-union, f elsewhere");
    let fibers = table.fibers();
    let large_fibers = fibers.iter().filter(|(_, v)| v.len() > 1).map(|(m, v)| (*m, v.len())).collect();
    let max_fiber = table.max_fiber();
    Ok(KbUpgrade { table, certificate, large_fibers, max_fiber, invariant_holds })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionRow {
    pub test: usize,
    pub source: MembershipVerdict,
    /// `None` when the test is not certified in the source ideal.
    pub preimage: Option<MembershipVerdict>,
    /// `n·|λ_n(A) − μ_n(f⁻¹[A])|` per block, for block-structured ideals.
    #[serde(with = "crate::rational::canon_trace")]
    pub scaled_gaps: Vec<(u64, Q)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ReductionVerdict {
    Refuted { test: usize },
    NoCounterexample { horizon: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionReport {
    pub rows: Vec<ReductionRow>,
    pub verdict: ReductionVerdict,
}

fn is_identity(f: &ReductionTable) -> bool {
    f.rule().is_some_and(|r| *r.body() == Expr::N)
}

/// Tests `f⁻¹[A] ∈ J` for each test set `A ∈ I`.
pub fn verify_reduction(
    f: &ReductionTable,
    source: &IdealSpec,
    target: &IdealSpec,
    tests: &[SetSpec],
    horizon: u64,
    tolerance: &Q,
) -> Result<ReductionReport> {
    let mut rows = Vec::new();
    let mut refuted = None;
    for (i, a) in tests.iter().enumerate() {
        let src = membership(source, a, horizon, tolerance)?;
        if !src.is_in() {
            rows.push(ReductionRow { test: i, source: src, preimage: None, scaled_gaps: vec![] });
            continue;
        }
        let pre = if is_identity(f) { a.clone() } else { SetSpec::preimage(f.clone(), a.clone()) };
        let verdict = membership(target, &pre, horizon, tolerance)?;
        if verdict.is_not_in() && refuted.is_none() {
            refuted = Some(i);
        }
        let scaled_gaps = block_gaps(source, target, a, &pre, f, horizon).unwrap_or_default();
        rows.push(ReductionRow { test: i, source: src, preimage: Some(verdict), scaled_gaps });
    }
    let verdict = match refuted {
        Some(test) => ReductionVerdict::Refuted { test },
        None => ReductionVerdict::NoCounterexample { horizon },
    };
    Ok(ReductionReport { rows, verdict })
}

fn block_gaps(source: &IdealSpec, target: &IdealSpec, a: &SetSpec, pre: &SetSpec, f: &ReductionTable, horizon: u64) -> Option<Vec<(u64, Q)>> {
    let tg = target.generator()?;
    let covered = (1..=horizon)
        .take_while(|n| tg.block(*n).is_ok_and(|b| b.end() <= f.domain_len().into()))
        .last()?;
    let lam = block_values(source, a, covered).ok()?;
    let mu = block_values(target, pre, covered).ok()?;
    let mu: BTreeMap<u64, Q> = mu.into_iter().collect();
    Some(
        lam.into_iter()
            .filter_map(|(n, l)| mu.get(&n).map(|m| (n, (l - m).abs() * qi(n))))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::BlockGenerator;
    use crate::expr::SeqFn;
    use crate::katetov::density::domination_reduction;
    use crate::rational::q;
    use crate::setspec::SelectMode;

    fn tol() -> Q {
        q(1, 1_000_000)
    }

    #[test]
    fn upgrade_geometric_collapse() {
        // f sends powers of two to 0 and fixes everything else
        let table: Vec<u64> = (0..256u64).map(|k| if k.is_power_of_two() { 0 } else { k }).collect();
        let f = ReductionTable::from_table(table);
        let z = IdealSpec::Exh { submeasure: crate::submeasure::SubmeasureSpec::AsymptoticDensity };
        let s = SetSpec::rule_intervals(SeqFn::parse("(exp2 n)").unwrap(), SeqFn::parse("1").unwrap(), 0);
        let a = SetSpec::union(vec![s.clone(), SetSpec::finite(vec![0])]);
        let up = kb_upgrade(&f, &z, &a, 256, &tol()).unwrap();
        assert!(up.invariant_holds);
        assert_eq!(up.max_fiber, 1);
        assert_eq!(up.table.image(64), Some(64));
        assert!(matches!(kb_upgrade(&f, &z, &SetSpec::empty(), 256, &tol()), Err(Error::NotPseudoUnion(0))));

        let halves = ReductionTable::from_table((0..64).map(|k| k / 2).collect());
        let up = kb_upgrade(&halves, &z, &SetSpec::empty(), 64, &tol()).unwrap();
        assert_eq!(up.table, halves.clone().with_finite_to_one(true).with_provenance("identity on the pseudo-union, f elsewhere"));
        assert_eq!(up.max_fiber, 2);
    }

    #[test]
    fn identity_from_fin() {
        let f = ReductionTable::identity(64);
        let z = IdealSpec::Exh { submeasure: crate::submeasure::SubmeasureSpec::AsymptoticDensity };
        let r = verify_reduction(&f, &IdealSpec::Fin, &z, &[SetSpec::finite(vec![1, 5, 9])], 16, &tol()).unwrap();
        assert_eq!(r.verdict, ReductionVerdict::NoCounterexample { horizon: 16 });
    }

    #[test]
    fn transfer_on_domination_output() {
        let (g, h) = (SeqFn::parse("n").unwrap(), SeqFn::parse("(mul 2 (pow n 3))").unwrap());
        let red = domination_reduction(&g, &h, 6, 0).unwrap().reduction;
        let source = IdealSpec::Phi { f: g.clone() };
        let target = IdealSpec::Phi { f: h };
        let tests = vec![SetSpec::block_select(BlockGenerator::phi(g), SeqFn::parse("1").unwrap(), SelectMode::First)];
        let r = verify_reduction(&red.table, &source, &target, &tests, 6, &tol()).unwrap();
        assert_eq!(r.verdict, ReductionVerdict::NoCounterexample { horizon: 6 });
        let gaps = &r.rows[0].scaled_gaps;
        assert_eq!(gaps.len(), 6);
        assert!(gaps.iter().all(|(_, v)| *v <= qi(2)));
    }
}
