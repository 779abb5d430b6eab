//! Lower-bound evaluation for values too large to materialize.
//!
//! A [`Mag`] is either an exact rational or the statement "value ≥ 2^L" with
//! `L` itself a `Mag`. Only expressions that are syntactically non-decreasing
//! in `n` and non-negative may be bounded this way, so substituting a lower
//! bound for the argument yields a lower bound for the result.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::expr::{exp2_q, pow_q, Expr, Program, SeqFn, EXACT_BITS};
use crate::rational::{qi, Q};

#[derive(Debug, Clone, PartialEq)]
pub enum Mag {
    Exact(Q),
    /// value ≥ 2^inner
    AtLeastPow2(Box<Mag>),
}

impl Mag {
    pub fn exact(&self) -> Option<&Q> {
        match self {
            Mag::Exact(q) => Some(q),
            Mag::AtLeastPow2(_) => None,
        }
    }

    fn pow2(inner: Mag) -> Mag {
        Mag::AtLeastPow2(Box::new(inner))
    }

    pub fn describe(&self) -> String {
        match self {
            Mag::Exact(q) if q.numer().bits() <= 128 => format!("{}", q),
            Mag::Exact(q) => format!("<{}-bit integer>", q.numer().bits()),
            Mag::AtLeastPow2(inner) => format!("≥ 2^({})", inner.describe()),
        }
    }
}

/// `floor(log2(x))` lower bound for `x ≥ 1`, as an exact value.
fn log2_floor(x: &Q) -> Option<Q> {
    if *x < Q::one() {
        return None;
    }
    let bits = x.to_integer().bits();
    Some(qi(bits.saturating_sub(1)))
}

/// Certified comparison `a ≤ b`; `None` when the bounds do not decide it.
pub fn mag_le(a: &Mag, b: &Mag) -> Option<bool> {
    match (a, b) {
        (Mag::Exact(x), Mag::Exact(y)) => Some(x <= y),
        (Mag::Exact(x), Mag::AtLeastPow2(l)) => {
            if !x.is_positive() {
                return Some(true);
            }
            // x < 2^bits(ceil x) ≤ 2^L
            let bits = qi(x.ceil().to_integer().bits());
            match mag_le(&Mag::Exact(bits), l) {
                Some(true) => Some(true),
                _ => None,
            }
        }
        (Mag::AtLeastPow2(l), Mag::Exact(y)) => {
            if !y.is_positive() {
                return Some(false);
            }
            let bits = qi(y.floor().to_integer().bits());
            // y < 2^bits ≤ 2^L ≤ value
            match mag_le(&Mag::Exact(bits), l) {
                Some(true) => Some(false),
                _ => None,
            }
        }
        _ => None,
    }
}

/// True when `e` is built only from non-negative constants, `n`, `add`,
/// `mul`, `pow` with a constant non-negative integer exponent, `exp2`,
/// `ceil`/`floor`, `max`/`min`, division by positive constants and calls to
/// functions with the same property.
pub fn is_monotone(e: &Expr, prog: &Program) -> bool {
    monotone_depth(e, prog, 0)
}

fn monotone_depth(e: &Expr, prog: &Program, depth: usize) -> bool {
    if depth > 32 {
        return false;
    }
    let m = |x: &Expr| monotone_depth(x, prog, depth);
    match e {
        Expr::Const(c) => !c.is_negative(),
        Expr::N => true,
        Expr::I => false,
        Expr::Add(xs) | Expr::Mul(xs) => xs.iter().all(m),
        Expr::Pow(a, k) => {
            matches!(&**k, Expr::Const(c) if c.is_integer() && !c.is_negative()) && m(a)
        }
        Expr::Exp2(a) | Expr::Ceil(a) | Expr::Floor(a) => m(a),
        Expr::Max(a, c) | Expr::Min(a, c) => m(a) && m(c),
        Expr::Div(a, c) | Expr::FloorDiv(a, c) => {
            matches!(&**c, Expr::Const(d) if d.is_positive()) && m(a)
        }
        Expr::Call(name, a) => {
            m(a) && prog
                .def(name)
                .map(|body| monotone_depth(body, prog, depth + 1))
                .unwrap_or(false)
        }
        Expr::Sub(..) | Expr::Neg(_) | Expr::PrefixSum(..) => false,
    }
}

fn too_big(x: &Q) -> bool {
    x.numer().bits() > EXACT_BITS || x.denom().bits() > EXACT_BITS
}

/// Evaluates `f` at an argument given as a `Mag`, falling back to lower
/// bounds once exact values would exceed [`EXACT_BITS`].
pub fn eval_mag(f: &SeqFn, n: &Mag) -> Result<Mag> {
    if !is_monotone(f.body(), f.program()) {
        return Err(Error::Expr(format!("`{f}` is not syntactically monotone")));
    }
    eval_node(f.program(), f.body(), n, 0)
}

fn eval_node(prog: &Program, e: &Expr, n: &Mag, depth: usize) -> Result<Mag> {
    if depth > 64 {
        return Err(Error::Expr("call depth exceeded".into()));
    }
    let ev = |x: &Expr| eval_node(prog, x, n, depth);
    let unsupported = || Error::Expr(format!("cannot bound `{e}` from below"));
    Ok(match e {
        Expr::Const(c) => Mag::Exact(c.clone()),
        Expr::N => n.clone(),
        Expr::Add(xs) => {
            let vals = xs.iter().map(ev).collect::<Result<Vec<_>>>()?;
            if let Some(h) = vals.iter().find(|v| v.exact().is_none()) {
                h.clone()
            } else {
                Mag::Exact(vals.iter().map(|v| v.exact().unwrap().clone()).sum())
            }
        }
        Expr::Mul(xs) => {
            let vals = xs.iter().map(ev).collect::<Result<Vec<_>>>()?;
            if vals.iter().any(|v| matches!(v, Mag::Exact(z) if z.is_zero())) {
                return Ok(Mag::Exact(Q::zero()));
            }
            let huge: Vec<&Mag> = vals.iter().filter(|v| v.exact().is_none()).collect();
            let exacts: Vec<&Q> = vals.iter().filter_map(|v| v.exact()).collect();
            if huge.is_empty() {
                let bits: u64 = exacts.iter().map(|x| x.numer().bits()).sum();
                if bits <= EXACT_BITS {
                    return Ok(Mag::Exact(exacts.into_iter().product()));
                }
                let mut lb = Q::zero();
                for x in exacts {
                    lb += log2_floor(x).ok_or_else(unsupported)?;
                }
                Mag::pow2(Mag::Exact(lb))
            } else {
                if exacts.iter().any(|x| **x < Q::one()) {
                    return Err(unsupported());
                }
                huge[0].clone()
            }
        }
        Expr::Pow(a, k) => {
            let k = match &**k {
                Expr::Const(c) => c.to_integer(),
                _ => return Err(unsupported()),
            };
            if k.is_zero() {
                return Ok(Mag::Exact(Q::one()));
            }
            match ev(a)? {
                Mag::Exact(x) => match pow_q(&x, &k) {
                    Ok(v) => Mag::Exact(v),
                    Err(Error::TooLarge(_)) => {
                        let lb = log2_floor(&x).ok_or_else(unsupported)?;
                        Mag::pow2(Mag::Exact(lb * Q::from_integer(k)))
                    }
                    Err(err) => return Err(err),
                },
                Mag::AtLeastPow2(l) => match *l {
                    Mag::Exact(lv) => Mag::pow2(Mag::Exact(lv * Q::from_integer(k))),
                    other => Mag::pow2(other),
                },
            }
        }
        Expr::Exp2(a) => match ev(a)? {
            Mag::Exact(x) => {
                if x.is_integer() && x.numer().to_u64().is_some_and(|v| v <= EXACT_BITS) {
                    Mag::Exact(exp2_q(&x)?)
                } else if x.is_negative() {
                    return Err(unsupported());
                } else {
                    Mag::pow2(Mag::Exact(x.floor()))
                }
            }
            huge => Mag::pow2(huge),
        },
        Expr::Ceil(a) | Expr::Floor(a) => match ev(a)? {
            Mag::Exact(x) => Mag::Exact(if matches!(e, Expr::Ceil(_)) {
                x.ceil()
            } else {
                x.floor()
            }),
            // floor(v) ≥ v/2 for v ≥ 1: 2^(L-1)
            Mag::AtLeastPow2(l) => match *l {
                Mag::Exact(lv) if lv >= Q::one() => Mag::pow2(Mag::Exact(lv - Q::one())),
                _ => return Err(unsupported()),
            },
        },
        Expr::Max(a, c) => {
            let (x, y) = (ev(a)?, ev(c)?);
            match (&x, &y) {
                (Mag::Exact(p), Mag::Exact(q)) => Mag::Exact(if p >= q { p.clone() } else { q.clone() }),
                (Mag::AtLeastPow2(_), _) => x,
                _ => y,
            }
        }
        Expr::Min(a, c) => match (ev(a)?, ev(c)?) {
            (Mag::Exact(p), Mag::Exact(q)) => Mag::Exact(if p <= q { p } else { q }),
            _ => return Err(unsupported()),
        },
        Expr::Div(a, c) | Expr::FloorDiv(a, c) => {
            let d = match &**c {
                Expr::Const(d) if d.is_positive() => d.clone(),
                _ => return Err(unsupported()),
            };
            match ev(a)? {
                Mag::Exact(x) => {
                    let v = x / d;
                    Mag::Exact(if matches!(e, Expr::FloorDiv(..)) { v.floor() } else { v })
                }
                Mag::AtLeastPow2(l) => match *l {
                    Mag::Exact(lv) => {
                        // v/d ≥ 2^(L - bits(ceil d)), and floor costs one more bit.
                        let shift = qi(d.ceil().to_integer().bits() + 1);
                        if lv < shift {
                            return Err(unsupported());
                        }
                        Mag::pow2(Mag::Exact(lv - shift))
                    }
                    _ => return Err(unsupported()),
                },
            }
        }
        Expr::Call(name, a) => {
            let arg = ev(a)?;
            let body = prog.def(name)?;
            eval_node(prog, body, &arg, depth + 1)?
        }
        Expr::I | Expr::Sub(..) | Expr::Neg(_) | Expr::PrefixSum(..) => return Err(unsupported()),
    })
}

/// Exact value when materializable, otherwise a certified lower bound.
pub fn eval_at(f: &SeqFn, n: u64) -> Result<Mag> {
    match f.eval_u(n) {
        Ok(v) if !too_big(&v) => Ok(Mag::Exact(v)),
        Ok(_) | Err(Error::TooLarge(_)) => eval_mag(f, &Mag::Exact(qi(n))),
        Err(e) => Err(e),
    }
}

pub fn bigint_mag(x: BigInt) -> Mag {
    Mag::Exact(Q::from_integer(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tower_lower_bounds_decide_domination() {
        let f = SeqFn::parse("(exp2 (pow n 2))").unwrap();
        let g = SeqFn::with_defs("(mul n (call f (call f n)))", &[("f", "(exp2 (pow n 2))")]).unwrap();
        for n in 2..=16u64 {
            let lhs = Mag::Exact(qi(2 * n * n) * f.eval_u(n).unwrap());
            let rhs = eval_at(&g, n).unwrap();
            assert_eq!(mag_le(&lhs, &rhs), Some(true), "n = {n}");
        }
    }

    #[test]
    fn undecided_comparisons_are_none() {
        let a = Mag::pow2(Mag::Exact(qi(10)));
        let b = Mag::pow2(Mag::Exact(qi(20)));
        assert_eq!(mag_le(&a, &b), None);
        assert_eq!(mag_le(&Mag::Exact(qi(5000)), &a), None);
        assert_eq!(mag_le(&a, &Mag::Exact(qi(100))), Some(false));
    }

    #[test]
    fn monotonicity_is_syntactic() {
        let p = Program::empty();
        assert!(is_monotone(&Expr::parse("(mul 2 (pow n 2))").unwrap(), &p));
        assert!(!is_monotone(&Expr::parse("(sub n 1)").unwrap(), &p));
        assert!(!is_monotone(&Expr::parse("(div 1 n)").unwrap(), &p));
    }
}
