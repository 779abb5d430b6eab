//! Block generators: sequences of non-negative measures with pairwise
//! disjoint interval supports, addressed arithmetically.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::SeqFn;
use crate::measure::{FinMeasure, NonNegMeasure, Point};
use crate::rational::{qi, Q};
use crate::setspec::SetSpec;

/// Blocks longer than this are never materialized point by point.
pub const MATERIALIZE_LIMIT: u64 = 1 << 22;

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlockGenerator {
    /// Blocks of length `n·f(n)` from 0, uniform weight `1/f(n)`.
    Phi { f: SeqFn },
    /// `[2^n, 2^{n+1})` with weight `2^{-n}`, `n ≥ 0`.
    AsymptoticDensity,
    /// Blocks `[start(n), start(n)+length(n))` with `weight(n, i)` at the
    /// `i`-th point. Without `start` the blocks are consecutive from 0.
    Rule {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start: Option<SeqFn>,
        length: SeqFn,
        weight: SeqFn,
        #[serde(default = "one")]
        first: u64,
    },
    /// A finite list of measures with increasing disjoint supports.
    Explicit {
        #[serde(default = "one")]
        first: u64,
        blocks: Vec<FinMeasure>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub n: u64,
    pub start: BigInt,
    pub len: BigInt,
}

impl Block {
    pub fn end(&self) -> BigInt {
        &self.start + &self.len
    }

    pub fn contains(&self, x: &BigInt) -> bool {
        *x >= self.start && *x < self.end()
    }
}

fn to_int(v: Q, what: &str) -> Result<BigInt> {
    if !v.is_integer() {
        return Err(Error::Validation(format!("{what} must be an integer")));
    }
    Ok(v.to_integer())
}

impl BlockGenerator {
    pub fn phi(f: SeqFn) -> BlockGenerator {
        BlockGenerator::Phi { f }
    }

    pub fn first(&self) -> u64 {
        match self {
            BlockGenerator::Phi { .. } => 1,
            BlockGenerator::AsymptoticDensity => 0,
            BlockGenerator::Rule { first, .. } | BlockGenerator::Explicit { first, .. } => *first,
        }
    }

    /// Last block index for finite generators.
    pub fn last(&self) -> Option<u64> {
        match self {
            BlockGenerator::Explicit { first, blocks } => {
                (!blocks.is_empty()).then(|| first + blocks.len() as u64 - 1)
            }
            _ => None,
        }
    }

    pub fn has_block(&self, n: u64) -> bool {
        n >= self.first() && self.last().is_none_or(|l| n <= l)
    }

    fn explicit(&self, n: u64) -> Result<&FinMeasure> {
        match self {
            BlockGenerator::Explicit { first, blocks } => n
                .checked_sub(*first)
                .and_then(|k| blocks.get(k as usize))
                .ok_or_else(|| Error::Validation(format!("block {n} is not defined"))),
            _ => unreachable!("explicit generators only"),
        }
    }

    pub fn len(&self, n: u64) -> Result<BigInt> {
        if !self.has_block(n) {
            return Err(Error::Validation(format!("block {n} is not defined")));
        }
        match self {
            BlockGenerator::Phi { f } => {
                let v = to_int(f.eval_u(n)?, "f(n)")?;
                if !v.is_positive() {
                    return Err(Error::NonPositiveValue(n));
                }
                Ok(v * n)
            }
            BlockGenerator::AsymptoticDensity => Ok(BigInt::one() << n),
            BlockGenerator::Rule { length, .. } => {
                let v = to_int(length.eval_u(n)?, "block length")?;
                if !v.is_positive() {
                    return Err(Error::Validation(format!("block {n} has length {v}")));
                }
                Ok(v)
            }
            BlockGenerator::Explicit { .. } => {
                let m = self.explicit(n)?;
                match (m.min_nat(), m.max_nat()) {
                    (Some(lo), Some(hi)) => Ok(BigInt::from(hi - lo + 1)),
                    _ => Ok(BigInt::zero()),
                }
            }
        }
    }

    /// Blocks `from..=to` with their start points.
    pub fn blocks(&self, from: u64, to: u64) -> Result<Vec<Block>> {
        let from = from.max(self.first());
        let to = self.last().map_or(to, |l| to.min(l));
        let mut out = Vec::new();
        if from > to {
            return Ok(out);
        }
        match self {
            BlockGenerator::Phi { .. } | BlockGenerator::Rule { start: None, .. } => {
                let mut start = BigInt::zero();
                for n in self.first()..=to {
                    let len = self.len(n)?;
                    if n >= from {
                        out.push(Block { n, start: start.clone(), len: len.clone() });
                    }
                    start += len;
                }
            }
            _ => {
                for n in from..=to {
                    out.push(self.block(n)?);
                }
            }
        }
        Ok(out)
    }

    pub fn block(&self, n: u64) -> Result<Block> {
        match self {
            BlockGenerator::AsymptoticDensity => Ok(Block {
                n,
                start: BigInt::one() << n,
                len: BigInt::one() << n,
            }),
            BlockGenerator::Rule { start: Some(s), .. } => {
                let start = to_int(s.eval_u(n)?, "block start")?;
                if start.is_negative() {
                    return Err(Error::Validation(format!("block {n} starts below 0")));
                }
                Ok(Block { n, start, len: self.len(n)? })
            }
            BlockGenerator::Explicit { .. } => {
                let m = self.explicit(n)?;
                Ok(Block {
                    n,
                    start: BigInt::from(m.min_nat().unwrap_or(0)),
                    len: self.len(n)?,
                })
            }
            _ => self
                .blocks(n, n)?
                .pop()
                .ok_or_else(|| Error::Validation(format!("block {n} is not defined"))),
        }
    }

    /// Blocks meeting `[s, e)`, in index order.
    pub fn blocks_meeting(&self, s: &BigInt, e: &BigInt) -> Result<Vec<Block>> {
        let mut out = Vec::new();
        if s >= e {
            return Ok(out);
        }
        if let BlockGenerator::AsymptoticDensity = self {
            let lo = if s.is_positive() { s.bits() - 1 } else { 0 };
            let hi = (e - 1u32).bits().saturating_sub(1);
            return (lo..=hi).map(|n| self.block(n)).filter(|b| b.as_ref().map_or(true, |b| b.end() > *s && b.start < *e)).collect();
        }
        let mut n = self.first();
        let mut batch = 16u64;
        loop {
            if !self.has_block(n) {
                return Ok(out);
            }
            if n - self.first() > MATERIALIZE_LIMIT {
                return Err(Error::TooLarge("block scan".into()));
            }
            let bs = self.blocks(n, n + batch - 1)?;
            if bs.is_empty() {
                return Ok(out);
            }
            batch = (batch * 2).min(1 << 12);
            for b in bs {
                n = b.n + 1;
                if b.start >= *e {
                    return Ok(out);
                }
                if b.end() > *s {
                    out.push(b);
                }
            }
        }
    }

    /// Atom weight when block `n` is uniform over its whole interval.
    pub fn uniform_weight(&self, n: u64) -> Result<Option<Q>> {
        Ok(match self {
            BlockGenerator::Phi { f } => {
                let v = f.eval_u(n)?;
                if !v.is_positive() {
                    return Err(Error::NonPositiveValue(n));
                }
                Some(v.recip())
            }
            BlockGenerator::AsymptoticDensity => Some(Q::new(BigInt::one(), BigInt::one() << n)),
            BlockGenerator::Rule { weight, .. } if !weight.body().mentions_i() => {
                let w = weight.eval2(&qi(n), &Q::zero())?;
                if !w.is_positive() {
                    return Err(Error::NonPositiveValue(n));
                }
                Some(w)
            }
            BlockGenerator::Rule { .. } => None,
            BlockGenerator::Explicit { .. } => {
                let m = self.explicit(n)?;
                let mut ws = m.atoms().map(|(_, w)| w);
                let w0 = ws.next().cloned();
                match w0 {
                    Some(w0) if ws.all(|w| *w == w0) && BigInt::from(m.len()) == self.len(n)? => Some(w0),
                    _ => None,
                }
            }
        })
    }

    /// `μ_n` as an explicit measure.
    pub fn materialize(&self, n: u64) -> Result<NonNegMeasure> {
        if let BlockGenerator::Explicit { .. } = self {
            return NonNegMeasure::new(self.explicit(n)?.clone());
        }
        let b = self.block(n)?;
        let len = b.len.to_u64().filter(|l| *l <= MATERIALIZE_LIMIT);
        let start = b.start.to_u64();
        let (Some(len), Some(start)) = (len, start) else {
            return Err(Error::TooLarge(format!("block {n} has {} points", b.len)));
        };
        if start.checked_add(len).is_none() {
            return Err(Error::TooLarge(format!("block {n} lies beyond u64")));
        }
        if let Some(w) = self.uniform_weight(n)? {
            return NonNegMeasure::uniform(start..start + len, &w);
        }
        let BlockGenerator::Rule { weight, .. } = self else {
            unreachable!("non-uniform blocks come from rules")
        };
        let nq = qi(n);
        let mut atoms = Vec::with_capacity(len as usize);
        for i in 0..len {
            let w = weight.eval2(&nq, &qi(i))?;
            if !w.is_positive() {
                return Err(Error::NotNonNegative(Point::Nat(start + i)));
            }
            atoms.push((Point::Nat(start + i), w));
        }
        NonNegMeasure::new(FinMeasure::from_atoms(atoms))
    }

    pub fn norm(&self, n: u64) -> Result<Q> {
        match self.uniform_weight(n)? {
            Some(w) => Ok(w * Q::from_integer(self.len(n)?)),
            None => Ok(self.materialize(n)?.norm()),
        }
    }

    /// `(at⁺(μ_n), at⁻(μ_n))`.
    pub fn atoms_range(&self, n: u64) -> Result<(Q, Q)> {
        match self.uniform_weight(n)? {
            Some(w) => Ok((w.clone(), w)),
            None => self.materialize(n)?.atoms_range(),
        }
    }

    /// `μ_n(x)`, by counting when the block is uniform.
    pub fn mass_in(&self, n: u64, x: &SetSpec) -> Result<Q> {
        if let Some(w) = self.uniform_weight(n)? {
            let b = self.block(n)?;
            return Ok(w * Q::from_integer(x.count_in(&b.start, &b.end())?));
        }
        if let BlockGenerator::Explicit { .. } = self {
            return self.explicit(n)?.mass(x);
        }
        let BlockGenerator::Rule { weight, .. } = self else {
            unreachable!("non-uniform blocks come from rules")
        };
        let b = self.block(n)?;
        let nq = qi(n);
        let mut total = Q::zero();
        for x in x.points_in(&b.start, &b.end(), MATERIALIZE_LIMIT)? {
            total += weight.eval2(&nq, &Q::from_integer(BigInt::from(x) - &b.start))?;
        }
        Ok(total)
    }

    /// Index of the block containing `x`, if any.
    pub fn block_of(&self, x: u64) -> Result<Option<u64>> {
        match self {
            BlockGenerator::AsymptoticDensity => Ok((x > 0).then(|| 63 - x.leading_zeros() as u64)),
            BlockGenerator::Explicit { first, blocks } => Ok(blocks
                .iter()
                .position(|m| m.weight(Point::Nat(x)).is_positive())
                .map(|k| first + k as u64)),
            _ => {
                let bx = BigInt::from(x);
                let mut n = self.first();
                let mut start = match self {
                    BlockGenerator::Rule { start: Some(_), .. } => None,
                    _ => Some(BigInt::zero()),
                };
                loop {
                    let b = match &start {
                        Some(s) => Block { n, start: s.clone(), len: self.len(n)? },
                        None => self.block(n)?,
                    };
                    if b.contains(&bx) {
                        return Ok(Some(n));
                    }
                    if b.start > bx {
                        return Ok(None);
                    }
                    if let Some(s) = &mut start {
                        *s += &b.len;
                    }
                    n += 1;
                    if n - self.first() > MATERIALIZE_LIMIT {
                        return Err(Error::TooLarge(format!("block search for {x}")));
                    }
                }
            }
        }
    }

    /// Checks disjointness and positivity of blocks `first..=horizon`.
    pub fn validate(&self, horizon: u64) -> Result<()> {
        let mut prev_end: Option<BigInt> = None;
        let to = self.last().map_or(horizon, |l| l.min(horizon));
        for b in self.blocks(self.first(), to)? {
            if let Some(e) = &prev_end {
                if b.start < *e {
                    return Err(Error::Validation(format!("block {} overlaps its predecessor", b.n)));
                }
            }
            if let BlockGenerator::Explicit { .. } = self {
                let m = self.explicit(b.n)?;
                if m.charges_pf() || !m.is_nonnegative() {
                    return Err(Error::Validation(format!(
                        "block {} must be a non-negative measure on ω",
                        b.n
                    )));
                }
            } else {
                self.atoms_range_checked(b.n)?;
            }
            prev_end = Some(b.end());
        }
        Ok(())
    }

    fn atoms_range_checked(&self, n: u64) -> Result<()> {
        if self.uniform_weight(n)?.is_none() && self.len(n)? <= BigInt::from(MATERIALIZE_LIMIT) {
            self.materialize(n)?;
        }
        Ok(())
    }
}

/// `f(n) ≥ 1` on `[1, horizon]`.
pub fn check_phi_function(f: &SeqFn, horizon: u64) -> Result<()> {
    for n in 1..=horizon {
        if f.eval_u(n)? < Q::one() {
            return Err(Error::NonPositiveValue(n));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn phi_of_identity_blocks() {
        let g = BlockGenerator::phi(SeqFn::parse("n").unwrap());
        let bs = g.blocks(1, 3).unwrap();
        let spans: Vec<(i64, i64)> = bs
            .iter()
            .map(|b| (b.start.to_i64().unwrap(), b.len.to_i64().unwrap()))
            .collect();
        assert_eq!(spans, vec![(0, 1), (1, 4), (5, 9)]);
        assert_eq!(g.atoms_range(3).unwrap(), (q(1, 3), q(1, 3)));
        assert_eq!(g.norm(3).unwrap(), q(3, 1));
    }

    #[test]
    fn density_blocks_skip_zero() {
        let g = BlockGenerator::AsymptoticDensity;
        assert_eq!(g.block_of(0).unwrap(), None);
        assert_eq!(g.block_of(5).unwrap(), Some(2));
        assert_eq!(g.norm(7).unwrap(), q(1, 1));
    }

    #[test]
    fn rule_blocks_materialize() {
        let g = BlockGenerator::Rule {
            start: None,
            length: SeqFn::parse("2").unwrap(),
            weight: SeqFn::parse("(add i 1)").unwrap(),
            first: 1,
        };
        let m = g.materialize(2).unwrap();
        assert_eq!(m.weight(Point::Nat(2)), q(1, 1));
        assert_eq!(m.weight(Point::Nat(3)), q(2, 1));
        assert_eq!(g.block_of(3).unwrap(), Some(2));
    }
}
