//! Greedy interval extraction of dominated measures from an unbounded
//! lower semicontinuous submeasure.

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{FinMeasure, NonNegMeasure, Point};
use crate::rational::{qi, Q};
use crate::sampling::{subset_family_with, Coverage};
use crate::setspec::SetSpec;
use crate::submeasure::SubmeasureSpec;

/// Subsets of interval supports up to this size are checked exhaustively.
pub const DOMINATION_EXHAUSTIVE: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalEntry {
    pub k: usize,
    /// The closed interval `[lo, hi]`.
    pub lo: u64,
    pub hi: u64,
    #[serde(with = "crate::rational::canon")]
    pub bound: Q,
    #[serde(with = "crate::rational::canon")]
    pub value: Q,
    #[serde(with = "crate::rational::canon")]
    pub mass: Q,
    /// Block whose restriction was used, for density submeasures.
    pub block: Option<u64>,
    pub coverage: Coverage,
    pub subsets_checked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extraction {
    pub cuts: Vec<u64>,
    pub intervals: Vec<IntervalEntry>,
    pub measures: Vec<NonNegMeasure>,
}

/// A measure `μ ≤ φ` supported on `[lo, hi]` with `μ([lo, hi]) = φ([lo, hi])`.
fn dominated(phi: &SubmeasureSpec, lo: u64, hi: u64) -> Result<(FinMeasure, Option<u64>)> {
    match phi {
        SubmeasureSpec::Summable { weight } => {
            let mut atoms = Vec::new();
            for x in lo..=hi {
                atoms.push((Point::Nat(x), weight.eval_u(x)?));
            }
            Ok((FinMeasure::from_atoms(atoms), None))
        }
        SubmeasureSpec::MaxMerge { left, right } => {
            if left.eval_interval(lo, hi)? >= right.eval_interval(lo, hi)? {
                dominated(left, lo, hi)
            } else {
                dominated(right, lo, hi)
            }
        }
        SubmeasureSpec::FiniteTable(_) => {
            Err(Error::Precondition("extraction needs a summable or density submeasure".into()))
        }
        _ => {
            let g = phi.generator().expect("density type");
            let (s, e) = (BigInt::from(lo), BigInt::from(hi) + 1u32);
            let window = SetSpec::intervals(vec![(lo, hi + 1)]);
            let mut best: Option<(Q, u64)> = None;
            for b in g.blocks_meeting(&s, &e)? {
                let v = g.mass_in(b.n, &window)?;
                if best.as_ref().is_none_or(|(w, _)| v > *w) {
                    best = Some((v, b.n));
                }
            }
            let Some((_, n)) = best else {
                return Ok((FinMeasure::empty(), None));
            };
            let b = g.block(n)?;
            let from = b.start.clone().max(s).to_u64().expect("inside the window");
            let to = b.end().min(e).to_u64().expect("inside the window");
            let m = match g.uniform_weight(n)? {
                Some(w) => NonNegMeasure::uniform(from..to, &w)?.into_inner(),
                None => g.materialize(n)?.into_inner().restrict_where(|p| matches!(p, Point::Nat(x) if (from..to).contains(&x))),
            };
            Ok((m, Some(n)))
        }
    }
}

/// Checks `μ(B) ≤ φ(B)` for subsets `B` of the support of `μ`.
fn check_domination(phi: &SubmeasureSpec, m: &FinMeasure, seed: u64) -> Result<(Coverage, usize)> {
    let pts: Vec<(u64, Q)> = m.atoms().filter_map(|(p, w)| p.nat().map(|x| (x, w.clone()))).collect();
    let (family, coverage) = subset_family_with(pts.len(), seed, DOMINATION_EXHAUSTIVE);
    for idx in &family {
        let set: Vec<u64> = idx.iter().map(|&i| pts[i].0).collect();
        let mass: Q = idx.iter().map(|&i| &pts[i].1).sum();
        let value = phi.eval(&set)?;
        if mass > value {
            return Err(Error::Validation(format!("dominated measure exceeds φ on {set:?}: {mass} > {value}")));
        }
    }
    Ok((coverage, family.len()))
}

/// Builds `0 = n_0 < n_1 < ...` with `φ([n_k, n_{k+1}]) > k + 2` and a
/// measure `μ_k ≤ φ` on each interval, for `k < count`. Each cut is searched
/// up to `search_limit`.
pub fn submeasure_to_an(phi: &SubmeasureSpec, count: usize, search_limit: u64, seed: u64) -> Result<Extraction> {
    let mut cuts = vec![0u64];
    let mut intervals = Vec::new();
    let mut measures = Vec::new();
    for k in 0..count {
        let lo = *cuts.last().expect("n_0");
        let bound = qi(k as u64 + 2);
        let Some(m) = phi.first_exceeding(lo, &bound, search_limit)? else {
            return Err(Error::BoundedSubmeasure { from: lo, bound, horizon: search_limit });
        };
        let hi = m.max(lo + 1);
        if hi > search_limit {
            return Err(Error::BoundedSubmeasure { from: lo, bound, horizon: search_limit });
        }
        let value = phi.eval_interval(lo, hi)?;
        let (mu, block) = dominated(phi, lo, hi)?;
        let mass = mu.total();
        if mass <= qi(k as u64) || mass.is_zero() {
            return Err(Error::Validation(format!("interval {k} carries mass {mass}")));
        }
        let (coverage, subsets_checked) = check_domination(phi, &mu, seed.wrapping_add(k as u64))?;
        intervals.push(IntervalEntry { k, lo, hi, bound, value, mass, block, coverage, subsets_checked });
        measures.push(NonNegMeasure::new(mu)?);
        cuts.push(hi);
    }
    Ok(Extraction { cuts, intervals, measures })
}
