//! Lower semicontinuous submeasures given symbolically, and their exact
//! evaluation on finite sets and intervals.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::blocks::BlockGenerator;
use crate::error::{Error, Result};
use crate::expr::SeqFn;
use crate::lp;
use crate::rational::{max_q, Q};
use crate::setspec::SetSpec;

/// Largest ground set accepted by [`FiniteTable`].
pub const TABLE_GROUND_LIMIT: usize = 12;

/// Longest interval summed point by point for summable submeasures.
pub const SUM_LIMIT: u64 = 1 << 24;

/// A submeasure on a finite ground set, one value per subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable", into = "RawTable")]
pub struct FiniteTable {
    ground: Vec<u64>,
    /// Indexed by bitmask over `ground`.
    values: Vec<Q>,
}

#[derive(Serialize, Deserialize)]
struct RawTable {
    ground: Vec<u64>,
    values: Vec<Entry>,
}

#[derive(Serialize, Deserialize)]
struct Entry(Vec<u64>, #[serde(with = "crate::rational::canon")] Q);

impl TryFrom<RawTable> for FiniteTable {
    type Error = Error;

    fn try_from(raw: RawTable) -> Result<FiniteTable> {
        let mut ground = raw.ground.clone();
        ground.sort_unstable();
        ground.dedup();
        if ground.len() != raw.ground.len() {
            return Err(Error::Validation("ground has repeated points".into()));
        }
        if ground.len() > TABLE_GROUND_LIMIT {
            return Err(Error::GroundTooLarge { size: ground.len(), bound: TABLE_GROUND_LIMIT });
        }
        let mut values: Vec<Option<Q>> = vec![None; 1 << ground.len()];
        for Entry(set, v) in raw.values {
            let mask = mask_of(&ground, &set)?;
            if values[mask].replace(v).is_some() {
                return Err(Error::Validation(format!("subset {set:?} listed twice")));
            }
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(m, v)| v.ok_or_else(|| Error::Validation(format!("no value for subset mask {m}"))))
            .collect::<Result<Vec<_>>>()?;
        FiniteTable::new(ground, values)
    }
}

impl From<FiniteTable> for RawTable {
    fn from(t: FiniteTable) -> RawTable {
        let values = t
            .values
            .iter()
            .enumerate()
            .map(|(m, v)| Entry(t.subset(m), v.clone()))
            .collect();
        RawTable { ground: t.ground, values }
    }
}

fn mask_of(ground: &[u64], set: &[u64]) -> Result<usize> {
    let mut mask = 0usize;
    for x in set {
        let i = ground.binary_search(x).map_err(|_| Error::OutOfGround)?;
        mask |= 1 << i;
    }
    Ok(mask)
}

impl FiniteTable {
    /// Validates `φ(∅) = 0`, monotonicity and subadditivity exhaustively.
    pub fn new(ground: Vec<u64>, values: Vec<Q>) -> Result<FiniteTable> {
        if ground.len() > TABLE_GROUND_LIMIT {
            return Err(Error::GroundTooLarge { size: ground.len(), bound: TABLE_GROUND_LIMIT });
        }
        if !ground.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Validation("ground must be strictly increasing".into()));
        }
        let k = ground.len();
        if values.len() != 1 << k {
            return Err(Error::Validation("one value per subset is required".into()));
        }
        if !values[0].is_zero() {
            return Err(Error::Validation("value of the empty set must be 0".into()));
        }
        let full = (1usize << k) - 1;
        for m in 1..=full {
            for i in 0..k {
                if m & (1 << i) != 0 && values[m & !(1 << i)] > values[m] {
                    return Err(Error::Validation(format!("not monotone at {:?}", subset(&ground, m))));
                }
            }
        }
        // with monotonicity, disjoint pairs suffice
        for x in 1..=full {
            let rest = full & !x;
            let mut y = rest;
            while y > 0 {
                if y > x && values[x | y] > &values[x] + &values[y] {
                    return Err(Error::Validation(format!(
                        "not subadditive at {:?} and {:?}",
                        subset(&ground, x),
                        subset(&ground, y)
                    )));
                }
                y = (y - 1) & rest;
            }
        }
        Ok(FiniteTable { ground, values })
    }

    pub fn ground(&self) -> &[u64] {
        &self.ground
    }

    pub fn value(&self, set: &[u64]) -> Result<Q> {
        Ok(self.values[mask_of(&self.ground, set)?].clone())
    }

    pub fn subset(&self, mask: usize) -> Vec<u64> {
        subset(&self.ground, mask)
    }

    pub fn value_mask(&self, mask: usize) -> &Q {
        &self.values[mask]
    }
}

fn subset(ground: &[u64], mask: usize) -> Vec<u64> {
    ground
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, x)| *x)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubmeasureSpec {
    /// `sup_n μ_n` over the blocks of a generator.
    Density { generator: BlockGenerator },
    /// `Σ_{n∈A} f(n)`.
    Summable { weight: SeqFn },
    /// `φ_d`, block averages over `[2^n, 2^{n+1})`.
    AsymptoticDensity,
    MaxMerge {
        left: Box<SubmeasureSpec>,
        right: Box<SubmeasureSpec>,
    },
    FiniteTable(FiniteTable),
}

impl SubmeasureSpec {
    pub fn density(generator: BlockGenerator) -> SubmeasureSpec {
        SubmeasureSpec::Density { generator }
    }

    pub fn summable(weight: SeqFn) -> SubmeasureSpec {
        SubmeasureSpec::Summable { weight }
    }

    pub fn max_merge(left: SubmeasureSpec, right: SubmeasureSpec) -> SubmeasureSpec {
        SubmeasureSpec::MaxMerge { left: Box::new(left), right: Box::new(right) }
    }

    /// Block generator of density-type submeasures.
    pub fn generator(&self) -> Option<BlockGenerator> {
        match self {
            SubmeasureSpec::Density { generator } => Some(generator.clone()),
            SubmeasureSpec::AsymptoticDensity => Some(BlockGenerator::AsymptoticDensity),
            _ => None,
        }
    }

    fn summable_weight(f: &SeqFn, x: u64) -> Result<Q> {
        let v = f.eval_u(x)?;
        if v.is_negative() {
            return Err(Error::Validation(format!("summable weight is negative at {x}")));
        }
        Ok(v)
    }

    /// `φ(a)` for a finite set `a`.
    pub fn eval(&self, a: &[u64]) -> Result<Q> {
        match self {
            SubmeasureSpec::Summable { weight } => {
                let mut pts = a.to_vec();
                pts.sort_unstable();
                pts.dedup();
                pts.iter().try_fold(Q::zero(), |acc, x| Ok(acc + Self::summable_weight(weight, *x)?))
            }
            SubmeasureSpec::MaxMerge { left, right } => {
                Ok(max_q(&left.eval(a)?, &right.eval(a)?).clone())
            }
            SubmeasureSpec::FiniteTable(t) => t.value(a),
            _ => {
                let g = self.generator().expect("density type");
                let mut by_block: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
                for x in a {
                    if let Some(n) = g.block_of(*x)? {
                        by_block.entry(n).or_default().push(*x);
                    }
                }
                let mut best = Q::zero();
                for (n, pts) in by_block {
                    let v = g.mass_in(n, &SetSpec::finite(pts))?;
                    if v > best {
                        best = v;
                    }
                }
                Ok(best)
            }
        }
    }

    /// `φ([lo, hi])`.
    pub fn eval_interval(&self, lo: u64, hi: u64) -> Result<Q> {
        if lo > hi {
            return Ok(Q::zero());
        }
        match self {
            SubmeasureSpec::Summable { weight } => {
                if hi - lo >= SUM_LIMIT {
                    return Err(Error::TooLarge(format!("sum over [{lo}, {hi}]")));
                }
                (lo..=hi).try_fold(Q::zero(), |acc, x| Ok(acc + Self::summable_weight(weight, x)?))
            }
            SubmeasureSpec::MaxMerge { left, right } => {
                Ok(max_q(&left.eval_interval(lo, hi)?, &right.eval_interval(lo, hi)?).clone())
            }
            SubmeasureSpec::FiniteTable(t) => {
                let pts: Vec<u64> = t.ground().iter().copied().filter(|x| (lo..=hi).contains(x)).collect();
                t.value(&pts)
            }
            _ => {
                let g = self.generator().expect("density type");
                let (s, e) = (BigInt::from(lo), BigInt::from(hi) + 1u32);
                let window = SetSpec::intervals(vec![(lo, hi + 1)]);
                let mut best = Q::zero();
                for b in g.blocks_meeting(&s, &e)? {
                    let v = if b.start >= s && b.end() <= e {
                        g.norm(b.n)?
                    } else {
                        g.mass_in(b.n, &window)?
                    };
                    if v > best {
                        best = v;
                    }
                }
                Ok(best)
            }
        }
    }

    /// Least `m ∈ [from, horizon]` with `φ([from, m]) > bound`.
    pub fn first_exceeding(&self, from: u64, bound: &Q, horizon: u64) -> Result<Option<u64>> {
        if from > horizon {
            return Ok(None);
        }
        match self {
            SubmeasureSpec::Summable { weight } => {
                let mut acc = Q::zero();
                for m in from..=horizon {
                    acc += Self::summable_weight(weight, m)?;
                    if acc > *bound {
                        return Ok(Some(m));
                    }
                }
                Ok(None)
            }
            SubmeasureSpec::MaxMerge { left, right } => {
                let l = left.first_exceeding(from, bound, horizon)?;
                let r = right.first_exceeding(from, bound, horizon)?;
                Ok(match (l, r) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                })
            }
            _ => {
                // φ([from, m]) is non-decreasing in m
                if self.eval_interval(from, horizon)? <= *bound {
                    return Ok(None);
                }
                let (mut lo, mut hi) = (from, horizon);
                while lo < hi {
                    let mid = lo + (hi - lo) / 2;
                    if self.eval_interval(from, mid)? > *bound {
                        hi = mid;
                    } else {
                        lo = mid + 1;
                    }
                }
                Ok(Some(lo))
            }
        }
    }

    /// The table of `φ` on all subsets of `ground`.
    pub fn truncate(&self, ground: &[u64]) -> Result<FiniteTable> {
        let mut g = ground.to_vec();
        g.sort_unstable();
        g.dedup();
        if g.len() > TABLE_GROUND_LIMIT {
            return Err(Error::GroundTooLarge { size: g.len(), bound: TABLE_GROUND_LIMIT });
        }
        let values = (0..1usize << g.len())
            .map(|m| self.eval(&subset(&g, m)))
            .collect::<Result<Vec<_>>>()?;
        FiniteTable::new(g, values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Unboundedness {
    /// `φ([0, end]) > bound`, with `end` least.
    Found {
        end: u64,
        #[serde(with = "crate::rational::canon")]
        value: Q,
    },
    NotFoundUpTo { horizon: u64 },
}

/// Searches the least prefix `[0, m]`, `m ≤ horizon`, with `φ([0, m]) > bound`.
pub fn unboundedness_check(phi: &SubmeasureSpec, bound: &Q, horizon: u64) -> Result<Unboundedness> {
    Ok(match phi.first_exceeding(0, bound, horizon)? {
        Some(end) => Unboundedness::Found { end, value: phi.eval_interval(0, end)? },
        None => Unboundedness::NotFoundUpTo { horizon },
    })
}

/// Default ground bound for [`nonpathology_defect`].
pub const LP_GROUND_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Defect {
    #[serde(with = "crate::rational::canon")]
    pub lp_value: Q,
    #[serde(with = "crate::rational::canon")]
    pub phi_value: Q,
    #[serde(with = "crate::rational::canon")]
    pub defect: Q,
    /// Optimal measure on `a`, as `(point, weight)`.
    pub measure: Vec<(u64, String)>,
}

/// `max{μ(a) : μ ≥ 0, μ ≤ φ}` against `φ(a)`, solved exactly.
pub fn nonpathology_defect(table: &FiniteTable, a: &[u64]) -> Result<Defect> {
    nonpathology_defect_bounded(table, a, LP_GROUND_LIMIT)
}

pub fn nonpathology_defect_bounded(table: &FiniteTable, a: &[u64], bound: usize) -> Result<Defect> {
    if table.ground().len() > bound {
        return Err(Error::GroundTooLarge { size: table.ground().len(), bound });
    }
    let mut pts = a.to_vec();
    pts.sort_unstable();
    pts.dedup();
    let amask = mask_of(table.ground(), &pts)?;
    let phi_value = table.value_mask(amask).clone();
    // Mass off `a` never helps and constraints on S reduce to S ∩ a, which
    // dominate by monotonicity; so only subsets of `a` matter.
    let k = pts.len();
    let idx: Vec<usize> = (0..table.ground().len()).filter(|i| amask & (1 << i) != 0).collect();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for sub in 1..(1usize << k) {
        let mut m = 0usize;
        let row: Vec<Q> = (0..k)
            .map(|j| {
                if sub & (1 << j) != 0 {
                    m |= 1 << idx[j];
                    Q::from_integer(1.into())
                } else {
                    Q::zero()
                }
            })
            .collect();
        rows.push(row);
        rhs.push(table.value_mask(m).clone());
    }
    let c = vec![Q::from_integer(1.into()); k];
    let sol = lp::maximize(&c, &rows, &rhs)?;
    let measure = pts
        .iter()
        .zip(&sol.x)
        .filter(|(_, w)| !w.is_zero())
        .map(|(p, w)| (*p, crate::rational::to_canonical(w)))
        .collect();
    Ok(Defect {
        defect: &phi_value - &sol.value,
        lp_value: sol.value,
        phi_value,
        measure,
    })
}
