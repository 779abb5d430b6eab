//! Searching for a set `X ∉ Φ(f)` with `φ[X] ∈ Φ(g)`, `g(n) = n·f(f(n))`,
//! which shows that a given finite-to-one `φ` is not a reduction `Φ(g) ≤_K Φ(f)`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use super::reduction::ReductionTable;
use super::successor::{check_hypotheses, successor_fn, Hypotheses};
use crate::blocks::{Block, BlockGenerator};
use crate::error::{Error, Result};
use crate::expr::SeqFn;
use crate::rational::{qi, Q};

/// Blocks `A_i` of `Φ(g)` up to the one containing a given bound.
struct Targets {
    gen: BlockGenerator,
    blocks: Vec<Block>,
}

impl Targets {
    fn new(g: &SeqFn, upto: u64) -> Result<Targets> {
        let gen = BlockGenerator::phi(g.clone());
        let mut blocks = Vec::new();
        let mut start = BigInt::zero();
        let top = BigInt::from(upto);
        for n in 1.. {
            let b = Block { n, start: start.clone(), len: gen.len(n)? };
            start = b.end();
            blocks.push(b);
            if start > top {
                break;
            }
        }
        Ok(Targets { gen, blocks })
    }

    fn index_of(&self, y: u64) -> u64 {
        let y = BigInt::from(y);
        let k = self.blocks.partition_point(|b| b.end() <= y);
        self.blocks[k].n
    }

    fn block(&self, i: u64) -> &Block {
        &self.blocks[(i - 1) as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchRow {
    pub n: u64,
    pub f_n: String,
    /// `|T_n|`: points of `B_n` sent into blocks `A_i` with `f(i) ≥ n`.
    pub t_size: u64,
    pub case1: bool,
    /// Case 2 data when Case 1 fails at `n`.
    pub i_n: Option<u64>,
    #[serde(with = "crate::rational::canon")]
    pub e_mass: Q,
    /// `μ_n(E_n)² ≥ n − 1`.
    pub e_mass_ok: bool,
    pub j_n: Option<u64>,
    #[serde(with = "crate::rational::canon")]
    pub d_mass: Q,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaValue {
    pub m: u64,
    #[serde(with = "crate::rational::canon")]
    pub value: Q,
    #[serde(with = "crate::rational::canon")]
    pub bound: Q,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefutationWitness {
    pub case: u8,
    pub indices: Vec<u64>,
    /// `F_k` (Case 1) or `D_{n_k}` (Case 2).
    pub sets: Vec<Vec<u64>>,
    pub x: Vec<u64>,
    /// `μ_{n_k}(X)`.
    #[serde(with = "crate::rational::canon_vec")]
    pub mu_values: Vec<Q>,
    pub lambda_values: Vec<LambdaValue>,
    /// Fewer than two indices were found below the horizon.
    pub partial: bool,
    pub checks_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Refutation {
    pub hypotheses: Hypotheses,
    pub rows: Vec<SearchRow>,
    pub case1: Option<RefutationWitness>,
    pub case2: Option<RefutationWitness>,
    /// 1 or 2; `None` when neither case produced a witness.
    pub chosen: Option<u8>,
}

struct RowData {
    row: SearchRow,
    f_set: Option<Vec<u64>>,
    d_set: Option<Vec<u64>>,
}

fn search_n(n: u64, f: &SeqFn, phi: &ReductionTable, b: &Block, targets: &Targets) -> Result<RowData> {
    let fv = f.eval_int(n)?;
    let w = Q::new(1.into(), fv.clone());
    let lo = b.start.to_u64().expect("tabulated");
    let hi = b.end().to_u64().expect("tabulated");
    let mut t = Vec::new();
    let mut rest: BTreeMap<u64, Vec<(u64, u64)>> = BTreeMap::new();
    for x in lo..hi {
        let y = phi.image(x).ok_or(Error::DomainTooSmall)?;
        let i = targets.index_of(y);
        if f.eval_int(i)? >= BigInt::from(n) {
            t.push(x);
        } else {
            rest.entry(i).or_default().push((x, y));
        }
    }
    let case1 = BigInt::from(t.len()) >= fv;
    let mut row = SearchRow {
        n,
        f_n: fv.to_string(),
        t_size: t.len() as u64,
        case1,
        i_n: None,
        e_mass: Q::zero(),
        e_mass_ok: false,
        j_n: None,
        d_mass: Q::zero(),
    };
    if case1 {
        let k = fv.to_usize().expect("fits");
        return Ok(RowData { row, f_set: Some(t[..k].to_vec()), d_set: None });
    }
    // the most massive single target block among those with f(i) < n
    let Some((&i, e)) = rest.iter().max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(a.0))) else {
        return Ok(RowData { row, f_set: None, d_set: None });
    };
    let e_mass = &w * qi(e.len() as u64);
    row.e_mass_ok = &e_mass * &e_mass >= qi(n - 1);
    row.i_n = Some(i);
    row.e_mass = e_mass;
    // A_i splits into i² runs of f(f(i)) points, each of λ_i-mass 1/i
    let a = targets.block(i);
    let run = &a.len / (i * i);
    let mut by_run: BTreeMap<BigInt, Vec<u64>> = BTreeMap::new();
    for (x, y) in e {
        let j = (BigInt::from(*y) - &a.start) / &run + 1u32;
        by_run.entry(j).or_default().push(*x);
    }
    let (j, d) = by_run
        .iter()
        .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(a.0)))
        .expect("E_n is non-empty");
    row.j_n = j.to_u64();
    row.d_mass = &w * qi(d.len() as u64);
    Ok(RowData { row, f_set: None, d_set: Some(d.clone()) })
}

fn lambda_values(phi: &ReductionTable, x: &[u64], targets: &Targets, bound: impl Fn(u64) -> Q) -> Result<Vec<LambdaValue>> {
    let mut counts: BTreeMap<u64, std::collections::BTreeSet<u64>> = BTreeMap::new();
    for p in x {
        let y = phi.image(*p).ok_or(Error::DomainTooSmall)?;
        counts.entry(targets.index_of(y)).or_default().insert(y);
    }
    counts
        .into_iter()
        .map(|(m, ys)| {
            let g = targets.gen.uniform_weight(m)?.expect("uniform");
            let value = g * qi(ys.len() as u64);
            let bound = bound(m);
            Ok(LambdaValue { m, holds: value <= bound, value, bound })
        })
        .collect()
}

/// Runs both case searches on blocks `B_1..B_horizon` of `Φ(f)`.
pub fn refute_reduction(f: &SeqFn, phi: &ReductionTable, horizon: u64) -> Result<Refutation> {
    if !phi.finite_to_one() {
        return Err(Error::NotFiniteToOne);
    }
    let hypotheses = check_hypotheses(f, horizon)?;
    let src = BlockGenerator::phi(f.clone());
    let blocks = src.blocks(1, horizon)?;
    let need = blocks.last().map(|b| b.end()).unwrap_or_default();
    if phi.domain_len() == 0 || BigInt::from(phi.domain_len()) < need {
        return Err(Error::DomainTooSmall);
    }
    let top = phi.table().iter().copied().max().unwrap_or(0);
    let g = successor_fn(f)?;
    let targets = Targets::new(&g, top)?;
    let data: Vec<RowData> = blocks
        .par_iter()
        .map(|b| search_n(b.n, f, phi, b, &targets))
        .collect::<Result<_>>()?;

    let mu = |n: u64, set: &[u64]| -> Result<Q> {
        Ok(qi(set.len() as u64) / Q::from_integer(f.eval_int(n)?))
    };

    let c1: Vec<&RowData> = data.iter().filter(|d| d.f_set.is_some()).collect();
    let case1 = if c1.is_empty() {
        None
    } else {
        let sets: Vec<Vec<u64>> = c1.iter().map(|d| d.f_set.clone().expect("filtered")).collect();
        let x: Vec<u64> = sets.concat();
        let mu_values = c1.iter().zip(&sets).map(|(d, s)| mu(d.row.n, s)).collect::<Result<Vec<_>>>()?;
        let lambda_values = lambda_values(phi, &x, &targets, |m| Q::new(2.into(), m.into()))?;
        let checks_pass = mu_values.iter().all(|v| *v == qi(1)) && lambda_values.iter().all(|l| l.holds);
        Some(RefutationWitness {
            case: 1,
            indices: c1.iter().map(|d| d.row.n).collect(),
            partial: sets.len() < 2,
            sets,
            x,
            mu_values,
            lambda_values,
            checks_pass,
        })
    };

    let mut picked: Vec<&RowData> = Vec::new();
    for d in data.iter().filter(|d| d.d_set.is_some()) {
        if picked.last().is_none_or(|p| p.row.i_n < d.row.i_n) {
            picked.push(d);
        }
    }
    let case2 = if picked.is_empty() {
        None
    } else {
        let sets: Vec<Vec<u64>> = picked.iter().map(|d| d.d_set.clone().expect("filtered")).collect();
        let x: Vec<u64> = sets.concat();
        let mu_values = picked.iter().zip(&sets).map(|(d, s)| mu(d.row.n, s)).collect::<Result<Vec<_>>>()?;
        let lambda_values = lambda_values(phi, &x, &targets, |m| Q::new(1.into(), m.into()))?;
        let checks_pass = mu_values.iter().all(|v| *v >= qi(1)) && lambda_values.iter().all(|l| l.holds);
        Some(RefutationWitness {
            case: 2,
            indices: picked.iter().map(|d| d.row.n).collect(),
            partial: sets.len() < 2,
            sets,
            x,
            mu_values,
            lambda_values,
            checks_pass,
        })
    };

    let last_is_case1 = data.last().is_some_and(|d| d.row.case1);
    let chosen = match (&case1, &case2) {
        (Some(_), _) if last_is_case1 => Some(1),
        (_, Some(_)) => Some(2),
        (Some(_), None) => Some(1),
        (None, None) => None,
    };
    Ok(Refutation { hypotheses, rows: data.into_iter().map(|d| d.row).collect(), case1, case2, chosen })
}

/// `φ` sending every `B_n` onto the least point of `A_1`.
pub fn collapsing_table(f: &SeqFn, horizon: u64) -> Result<ReductionTable> {
    let end = BlockGenerator::phi(f.clone()).block(horizon)?.end();
    let len = end.to_u64().ok_or_else(|| Error::TooLarge("domain".into()))?;
    Ok(ReductionTable::new(vec![0; len as usize], None, true)?.with_provenance("every block onto A_1"))
}

/// `φ` sending `B_n` injectively into `A_n` (so `f(n) ≥ n` puts it in Case 1).
pub fn spreading_table(f: &SeqFn, horizon: u64) -> Result<ReductionTable> {
    let src = BlockGenerator::phi(f.clone());
    let dst = BlockGenerator::phi(successor_fn(f)?);
    let mut table = Vec::new();
    for n in 1..=horizon {
        let (b, a) = (src.block(n)?, dst.block(n)?);
        if b.len > a.len {
            return Err(Error::Validation(format!("A_{n} is smaller than B_{n}")));
        }
        let a0 = a.start.to_u64().ok_or_else(|| Error::TooLarge(format!("A_{n}")))?;
        for k in 0..b.len.to_u64().expect("tabulated") {
            table.push(a0 + k);
        }
    }
    Ok(ReductionTable::new(table, None, true)?.with_provenance("B_n into A_n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> SeqFn {
        SeqFn::parse("(pow n 2)").unwrap()
    }

    #[test]
    fn collapsing_map_lands_in_case_two() {
        let r = refute_reduction(&toy(), &collapsing_table(&toy(), 5).unwrap(), 5).unwrap();
        assert!(!r.hypotheses.hold());
        assert!(r.rows[0].case1);
        assert!(r.rows[1..].iter().all(|row| row.i_n == Some(1) && row.e_mass_ok));
        let w = r.case2.unwrap();
        assert_eq!(w.indices, vec![2]);
        assert!(w.partial && w.checks_pass);
        // B_2 = [1, 9), all eight points, mass 2
        assert_eq!(w.sets[0], (1..9).collect::<Vec<_>>());
        assert_eq!(w.mu_values[0], qi(2));
        assert_eq!(r.chosen, Some(2));
    }

    #[test]
    fn spreading_map_lands_in_case_one() {
        let r = refute_reduction(&toy(), &spreading_table(&toy(), 5).unwrap(), 5).unwrap();
        assert!(r.rows.iter().all(|row| row.case1));
        let w = r.case1.unwrap();
        assert_eq!(w.indices, vec![1, 2, 3, 4, 5]);
        assert!(w.mu_values.iter().all(|v| *v == qi(1)));
        assert_eq!(w.sets[1].len(), 4);
        assert!(w.checks_pass);
        assert_eq!(r.chosen, Some(1));
    }

    #[test]
    fn empty_domain() {
        let t = ReductionTable::from_table(vec![]).with_finite_to_one(true);
        assert_eq!(refute_reduction(&toy(), &t, 3).unwrap_err(), Error::DomainTooSmall);
        assert_eq!(refute_reduction(&toy(), &ReductionTable::from_table(vec![0]), 3).unwrap_err(), Error::NotFiniteToOne);
    }
}
