//! Symbolic subsets of ω (with an optional PF flag for clopen sets of N_F).
//!
//! Every set is evaluated on a window `[s, e)` as a sorted list of disjoint
//! half-open segments, so counting inside huge blocks never enumerates points.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::blocks::BlockGenerator;
use crate::error::{Error, Result};
use crate::expr::SeqFn;
use crate::katetov::reduction::ReductionTable;
use crate::measure::Point;

/// Iteration cap for rule-generated families and preimage enumeration.
pub const ENUM_LIMIT: u64 = 1 << 22;

pub type Segs = Vec<(BigInt, BigInt)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectMode {
    First,
    Last,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetBody {
    /// ω itself.
    All,
    Finite { points: Vec<u64> },
    /// Union of `[a, b)`.
    Intervals { intervals: Vec<(u64, u64)> },
    /// `∪_{k ≥ from} [start(k), start(k) + length(k))`, starts increasing.
    RuleIntervals {
        start: SeqFn,
        length: SeqFn,
        #[serde(default)]
        from: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        to: Option<u64>,
    },
    /// `min(count(n), |block n|)` points from each block of `generator`.
    BlockSelect {
        generator: BlockGenerator,
        count: SeqFn,
        mode: SelectMode,
    },
    Complement { set: Box<SetSpec> },
    Union { sets: Vec<SetSpec> },
    Intersect { sets: Vec<SetSpec> },
    /// `map⁻¹[set]`, evaluated on the map's domain.
    Preimage { map: ReductionTable, set: Box<SetSpec> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSpec {
    #[serde(flatten)]
    pub body: SetBody,
    /// Whether PF belongs to the set (clopen sets of N_F).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub pf: bool,
}

fn coalesce(mut v: Segs) -> Segs {
    v.retain(|(a, b)| a < b);
    v.sort();
    let mut out: Segs = Vec::with_capacity(v.len());
    for (a, b) in v {
        match out.last_mut() {
            Some((_, pb)) if a <= *pb => {
                if b > *pb {
                    *pb = b;
                }
            }
            _ => out.push((a, b)),
        }
    }
    out
}

fn complement_in(v: &Segs, s: &BigInt, e: &BigInt) -> Segs {
    let mut out = Vec::new();
    let mut cur = s.clone();
    for (a, b) in v {
        if *a > cur {
            out.push((cur.clone(), a.clone()));
        }
        if *b > cur {
            cur = b.clone();
        }
    }
    if cur < *e {
        out.push((cur, e.clone()));
    }
    out
}

fn intersect(x: &Segs, y: &Segs) -> Segs {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < x.len() && j < y.len() {
        let a = (&x[i].0).max(&y[j].0);
        let b = (&x[i].1).min(&y[j].1);
        if a < b {
            out.push((a.clone(), b.clone()));
        }
        if x[i].1 < y[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

fn clip(a: BigInt, b: BigInt, s: &BigInt, e: &BigInt) -> Option<(BigInt, BigInt)> {
    let a = a.max(s.clone());
    let b = b.min(e.clone());
    (a < b).then_some((a, b))
}

fn total(v: &Segs) -> BigInt {
    v.iter().map(|(a, b)| b - a).sum()
}

impl SetSpec {
    pub fn new(body: SetBody) -> SetSpec {
        SetSpec { body, pf: false }
    }

    pub fn all() -> SetSpec {
        SetSpec::new(SetBody::All)
    }

    pub fn empty() -> SetSpec {
        SetSpec::finite(vec![])
    }

    pub fn finite(points: Vec<u64>) -> SetSpec {
        SetSpec::new(SetBody::Finite { points })
    }

    pub fn intervals(intervals: Vec<(u64, u64)>) -> SetSpec {
        SetSpec::new(SetBody::Intervals { intervals })
    }

    pub fn rule_intervals(start: SeqFn, length: SeqFn, from: u64) -> SetSpec {
        SetSpec::new(SetBody::RuleIntervals { start, length, from, to: None })
    }

    pub fn block_select(generator: BlockGenerator, count: SeqFn, mode: SelectMode) -> SetSpec {
        SetSpec::new(SetBody::BlockSelect { generator, count, mode })
    }

    pub fn complement(self) -> SetSpec {
        SetSpec {
            pf: !self.pf,
            body: SetBody::Complement { set: Box::new(self) },
        }
    }

    pub fn union(sets: Vec<SetSpec>) -> SetSpec {
        let pf = sets.iter().any(|s| s.pf);
        SetSpec { body: SetBody::Union { sets }, pf }
    }

    pub fn intersect(sets: Vec<SetSpec>) -> SetSpec {
        let pf = !sets.is_empty() && sets.iter().all(|s| s.pf);
        SetSpec { body: SetBody::Intersect { sets }, pf }
    }

    pub fn preimage(map: ReductionTable, set: SetSpec) -> SetSpec {
        SetSpec::new(SetBody::Preimage { map, set: Box::new(set) })
    }

    pub fn with_pf(mut self, pf: bool) -> SetSpec {
        self.pf = pf;
        self
    }

    /// Exclusive upper bound on the elements of a finite-form set.
    fn finite_bound(&self) -> Option<u64> {
        match &self.body {
            SetBody::Finite { points } => Some(points.iter().max().map_or(0, |m| m + 1)),
            SetBody::Intervals { intervals } => Some(intervals.iter().map(|(_, b)| *b).max().unwrap_or(0)),
            SetBody::RuleIntervals { start, length, to: Some(t), from } => (*from..=*t)
                .map(|k| Some(start.eval_int(k).ok()? + length.eval_int(k).ok()?))
                .try_fold(BigInt::zero(), |acc, v| Some(acc.max(v?)))
                .and_then(|b| b.to_u64()),
            SetBody::Intersect { sets } => sets.iter().filter_map(|s| s.finite_bound()).min(),
            SetBody::Union { sets } => sets.iter().map(|s| s.finite_bound()).try_fold(0, |a, b| Some(a.max(b?))),
            _ => None,
        }
    }

    pub fn is_finite_form(&self) -> bool {
        self.finite_bound().is_some()
    }

    /// Largest element of a finite-form set (`None` when empty or not finite form).
    pub fn finite_max(&self) -> Option<u64> {
        let hi = self.finite_bound()?;
        let segs = self.segments(&BigInt::zero(), &BigInt::from(hi)).ok()?;
        segs.last().and_then(|(_, b)| (b - 1u32).to_u64())
    }

    /// The set within `[s, e)` as sorted disjoint segments.
    pub fn segments(&self, s: &BigInt, e: &BigInt) -> Result<Segs> {
        if s >= e {
            return Ok(vec![]);
        }
        Ok(match &self.body {
            SetBody::All => vec![(s.clone(), e.clone())],
            SetBody::Finite { points } => {
                let pts: BTreeSet<u64> = points.iter().copied().collect();
                coalesce(
                    pts.into_iter()
                        .map(BigInt::from)
                        .filter(|x| x >= s && x < e)
                        .map(|x| {
                            let y = &x + 1u32;
                            (x, y)
                        })
                        .collect(),
                )
            }
            SetBody::Intervals { intervals } => coalesce(
                intervals
                    .iter()
                    .filter_map(|(a, b)| clip(BigInt::from(*a), BigInt::from(*b), s, e))
                    .collect(),
            ),
            SetBody::RuleIntervals { start, length, from, to } => {
                let mut out = Vec::new();
                let mut prev: Option<BigInt> = None;
                let mut k = *from;
                loop {
                    if to.is_some_and(|t| k > t) {
                        break;
                    }
                    if k - from > ENUM_LIMIT {
                        return Err(Error::TooLarge("rule interval family".into()));
                    }
                    let a = start.eval_int(k)?;
                    if prev.as_ref().is_some_and(|p| a < *p) {
                        return Err(Error::Validation("rule interval starts must increase".into()));
                    }
                    if a >= *e {
                        break;
                    }
                    let len = length.eval_int(k)?;
                    if let Some(seg) = clip(a.clone(), &a + len, s, e) {
                        out.push(seg);
                    }
                    prev = Some(a);
                    k += 1;
                }
                coalesce(out)
            }
            SetBody::BlockSelect { generator, count, mode } => {
                let mut out = Vec::new();
                for b in generator.blocks_meeting(s, e)? {
                    let c = count.eval_int(b.n)?.max(BigInt::zero()).min(b.len.clone());
                    let (a, z) = match mode {
                        SelectMode::First => (b.start.clone(), &b.start + &c),
                        SelectMode::Last => (b.end() - &c, b.end()),
                    };
                    if let Some(seg) = clip(a, z, s, e) {
                        out.push(seg);
                    }
                }
                coalesce(out)
            }
            SetBody::Complement { set } => complement_in(&set.segments(s, e)?, s, e),
            SetBody::Union { sets } => {
                let mut all = Vec::new();
                for x in sets {
                    all.extend(x.segments(s, e)?);
                }
                coalesce(all)
            }
            SetBody::Intersect { sets } => {
                let mut acc = vec![(s.clone(), e.clone())];
                for x in sets {
                    acc = intersect(&acc, &x.segments(s, e)?);
                    if acc.is_empty() {
                        break;
                    }
                }
                acc
            }
            SetBody::Preimage { map, set } => {
                let (Some(lo), Some(hi)) = (s.to_u64(), e.to_u64()) else {
                    return Err(Error::TooLarge("preimage window".into()));
                };
                if hi - lo > ENUM_LIMIT {
                    return Err(Error::TooLarge("preimage window".into()));
                }
                let mut out = Vec::new();
                for x in lo..hi {
                    let y = map.image(x).ok_or(Error::UndefinedAt(x))?;
                    if set.contains(y)? {
                        out.push((BigInt::from(x), BigInt::from(x) + 1u32));
                    }
                }
                coalesce(out)
            }
        })
    }

    /// `|set ∩ [s, e)|`.
    pub fn count_in(&self, s: &BigInt, e: &BigInt) -> Result<BigInt> {
        Ok(total(&self.segments(s, e)?))
    }

    pub fn contains(&self, x: u64) -> Result<bool> {
        let bx = BigInt::from(x);
        Ok(self.count_in(&bx, &(&bx + 1u32))?.is_one())
    }

    pub fn contains_point(&self, p: Point) -> Result<bool> {
        match p {
            Point::PF => Ok(self.pf),
            Point::Nat(x) => self.contains(x),
        }
    }

    /// Elements in `[s, e)`, failing when there are more than `cap`.
    pub fn points_in(&self, s: &BigInt, e: &BigInt, cap: u64) -> Result<Vec<u64>> {
        let segs = self.segments(s, e)?;
        if total(&segs) > BigInt::from(cap) {
            return Err(Error::TooLarge(format!("more than {cap} points to enumerate")));
        }
        let mut out = Vec::new();
        for (a, b) in segs {
            let (a, b) = (
                a.to_u64().ok_or_else(|| Error::TooLarge("point beyond u64".into()))?,
                b.to_u64().ok_or_else(|| Error::TooLarge("point beyond u64".into()))?,
            );
            out.extend(a..b);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x: u64) -> BigInt {
        BigInt::from(x)
    }

    #[test]
    fn boolean_combinations() {
        let evens = SetSpec::rule_intervals(SeqFn::parse("(mul 2 n)").unwrap(), SeqFn::parse("1").unwrap(), 0);
        assert_eq!(evens.count_in(&b(0), &b(10)).unwrap(), b(5));
        let odds = evens.clone().complement();
        assert!(odds.contains(7).unwrap());
        assert!(!odds.contains(4).unwrap());
        let u = SetSpec::union(vec![SetSpec::finite(vec![4, 5, 30]), SetSpec::intervals(vec![(5, 9)])]);
        assert_eq!(u.count_in(&b(0), &b(100)).unwrap(), b(6));
        let i = SetSpec::intersect(vec![u, evens]);
        assert_eq!(i.points_in(&b(0), &b(100), 10).unwrap(), vec![4, 6, 8, 30]);
        assert_eq!(i.finite_max(), Some(30));
    }

    #[test]
    fn block_select_counts_without_enumeration() {
        let g = BlockGenerator::phi(SeqFn::parse("(exp2 (pow n 2))").unwrap());
        let first_one = SetSpec::block_select(g.clone(), SeqFn::parse("1").unwrap(), SelectMode::First);
        let blk = g.block(12).unwrap();
        assert_eq!(first_one.count_in(&blk.start, &blk.end()).unwrap(), b(1));
        let last_half = SetSpec::block_select(g, SeqFn::parse("(exp2 (pow n 2))").unwrap(), SelectMode::Last);
        assert_eq!(last_half.count_in(&blk.start, &blk.end()).unwrap(), BigInt::one() << 144);
    }

    #[test]
    fn pf_flag_tracks_complement() {
        let s = SetSpec::finite(vec![1]).with_pf(true);
        assert!(s.contains_point(Point::PF).unwrap());
        assert!(!s.complement().contains_point(Point::PF).unwrap());
    }
}
