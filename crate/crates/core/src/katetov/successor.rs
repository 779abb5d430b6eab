//! The successor `g(n) = n·f(f(n))` with `Φ(f) <_K Φ(g)`.

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use super::density::TABLE_LIMIT;
use super::reduction::ReductionTable;
use super::transport::UniformTransport;
use crate::blocks::BlockGenerator;
use crate::bound::{eval_at, mag_le, Mag};
use crate::error::{Error, Result};
use crate::expr::{Expr, SeqFn};
use crate::rational::Q;
use crate::sampling::Coverage;

pub const QUARTIC: &str = "f(n) >= n^4";
pub const SUPERSUM: &str = "f(n) >= sum_{i<n} f(i)";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hypotheses {
    pub horizon: u64,
    /// First `(n, hypothesis)` that fails on `[1, horizon]`.
    pub first_failure: Option<(u64, String)>,
    pub quartic_from: Option<u64>,
    pub supersum_from: Option<u64>,
}

impl Hypotheses {
    pub fn hold(&self) -> bool {
        self.first_failure.is_none()
    }
}

/// Both standing hypotheses on `[1, horizon]`, exactly.
pub fn check_hypotheses(f: &SeqFn, horizon: u64) -> Result<Hypotheses> {
    let mut first_failure = None;
    let mut sum = f.eval_int(0)?;
    let (mut quartic_fail, mut supersum_fail) = (None, None);
    for n in 1..=horizon {
        let v = f.eval_int(n)?;
        let q_ok = v >= BigInt::from(n).pow(4);
        let s_ok = v >= sum;
        if !q_ok {
            quartic_fail = Some(n);
        }
        if !s_ok {
            supersum_fail = Some(n);
        }
        if first_failure.is_none() && !(q_ok && s_ok) {
            first_failure = Some((n, if q_ok { SUPERSUM } else { QUARTIC }.to_string()));
        }
        sum += v;
    }
    Ok(Hypotheses {
        horizon,
        first_failure,
        quartic_from: Some(quartic_fail.map_or(1, |n| n + 1)).filter(|n| *n <= horizon),
        supersum_from: Some(supersum_fail.map_or(1, |n| n + 1)).filter(|n| *n <= horizon),
    })
}

/// `n·f(f(n))` as an expression calling `f`.
pub fn successor_fn(f: &SeqFn) -> Result<SeqFn> {
    let prog = f.as_def("f")?;
    SeqFn::new(Expr::mul(Expr::N, Expr::call("f", Expr::call("f", Expr::N))), prog)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominationRow {
    pub n: u64,
    /// `2n²·f(n)`.
    pub lhs: String,
    /// `g(n)`, exact or as a lower bound.
    pub rhs: String,
    /// Decided through the lower-bound evaluator.
    pub direct: Option<bool>,
    /// `f(n)³ ≥ 2n` together with `f(f(n)) ≥ f(n)⁴`.
    pub cube_route: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ForwardMethod {
    Exact(UniformTransport),
    /// Error below `n·f(n)/g(n) ≤ 1/(2n)` from the domination row.
    Symbolic { bound: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForwardBlock {
    pub n: u64,
    pub method: ForwardMethod,
    pub coverage: Option<Coverage>,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Successor {
    pub f: SeqFn,
    pub g: SeqFn,
    pub hypotheses: Hypotheses,
    pub domination: Vec<DominationRow>,
    pub forward: Vec<ForwardBlock>,
    pub table: ReductionTable,
}

impl Successor {
    pub fn certificate_holds(&self) -> bool {
        self.forward.iter().all(|b| b.holds)
            && self.domination.iter().filter(|r| r.n >= 2).all(|r| r.direct == Some(true) || r.cube_route)
    }
}

fn describe(m: &Mag) -> String {
    m.describe()
}

/// Builds `g`, checks the hypotheses and the domination `2n²·f(n) ≤ g(n)`
/// for `2 ≤ n ≤ horizon`, and certifies `Φ(f) ≤_K Φ(g)` blockwise.
pub fn successor(f: &SeqFn, horizon: u64, seed: u64) -> Result<Successor> {
    let hypotheses = check_hypotheses(f, horizon)?;
    if let Some((n, which)) = &hypotheses.first_failure {
        return Err(Error::HypothesisFails { n: *n, which: which.clone() });
    }
    let g = successor_fn(f)?;
    let mut domination = Vec::new();
    for n in 1..=horizon {
        let fnv = f.eval_int(n)?;
        let lhs = &fnv * (2 * n * n);
        let rhs = eval_at(&g, n)?;
        let direct = mag_le(&Mag::Exact(Q::from_integer(lhs.clone())), &rhs);
        let cube_route = n >= 2 && fnv.pow(3) >= BigInt::from(2 * n);
        domination.push(DominationRow { n, lhs: lhs.to_string(), rhs: describe(&rhs), direct, cube_route });
    }
    let threshold = domination
        .iter()
        .rev()
        .find(|r| !(r.direct == Some(true) || r.cube_route))
        .map_or(1, |r| r.n + 1);
    if threshold > horizon {
        return Err(Error::DominationFails(horizon));
    }

    let lam_gen = BlockGenerator::phi(f.clone());
    let mu_gen = BlockGenerator::phi(g.clone());
    let mut forward = Vec::new();
    for n in threshold..=horizon {
        let eps = Q::new(BigInt::one(), BigInt::from(n));
        let exact = match (f.eval_int(n), g.eval_int(n)) {
            (Ok(fv), Ok(gv)) => Some((fv, gv)),
            (_, Err(Error::TooLarge(_))) => None,
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        let block = match exact {
            Some((fv, gv)) => {
                let t = UniformTransport::new(
                    &fv * n,
                    &Q::new(BigInt::one(), fv.clone()),
                    &gv * n,
                    &Q::new(BigInt::one(), gv.clone()),
                    &eps,
                )?;
                let sampled = t.sampled_error(seed.wrapping_add(n));
                let holds = t.worst_error <= eps && sampled.as_ref().is_none_or(|(e, _, _)| *e <= t.worst_error);
                ForwardBlock { n, coverage: sampled.map(|s| s.1), method: ForwardMethod::Exact(t), holds }
            }
            None => {
                let row = &domination[(n - 1) as usize];
                ForwardBlock {
                    n,
                    method: ForwardMethod::Symbolic { bound: format!("< n*f(n)/g(n) <= 1/(2n), g(n) {}", row.rhs) },
                    coverage: None,
                    holds: row.direct == Some(true) || row.cube_route,
                }
            }
        };
        forward.push(block);
    }

    let mut table = Vec::new();
    for fb in &forward {
        let ForwardMethod::Exact(t) = &fb.method else { break };
        let (a, b) = (lam_gen.block(fb.n)?, mu_gen.block(fb.n)?);
        let Some(start) = b.start.to_u64().filter(|s| *s < TABLE_LIMIT) else { break };
        table.resize(start as usize, 0);
        let end = b.end().to_u64().map_or(TABLE_LIMIT, |e| e.min(TABLE_LIMIT));
        for x in start..end {
            let y = &a.start + t.image(&BigInt::from(x - start));
            table.push(y.to_u64().ok_or_else(|| Error::TooLarge(format!("image of {x}")))?);
        }
        if end == TABLE_LIMIT {
            break;
        }
    }
    let table = ReductionTable::new(table, None, true)?
        .with_provenance(format!("blockwise transport from Φ(g) onto Φ(f), from block {threshold}"));
    Ok(Successor { f: f.clone(), g, hypotheses, domination, forward, table })
}

/// `Σ_{i<n} f(i)` against `f(n)`: the first `n` where the sum wins.
pub fn supersum_failure(f: &SeqFn, horizon: u64) -> Result<Option<u64>> {
    let mut sum = BigInt::zero();
    for n in 0..=horizon {
        let v = f.eval_int(n)?;
        if n >= 1 && v < sum {
            return Ok(Some(n));
        }
        sum += v;
    }
    Ok(None)
}
