//! Closed-form limit rules.
//!
//! An [`Expansion`] describes a sequence as a finite sum of monomials
//! `c · n^d · 2^{P(n)}` (with `P` an integer polynomial without constant
//! term) plus an error term of known order. The rule table covers ratios of
//! polynomial-exponential terms, geometric tails and p-series; anything else
//! yields `None` and callers report the result as undetermined.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::expr::{exp2_q, Expr, Program, SeqFn};
use crate::rational::{qi, Q};

/// Growth order `n^deg · 2^{P(n)}`; `exp[k]` is the coefficient of `n^(k+1)` in `P`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Order {
    exp: Vec<BigInt>,
    deg: i64,
}

impl Order {
    pub fn one() -> Order {
        Order { exp: vec![], deg: 0 }
    }

    pub fn poly(deg: i64) -> Order {
        Order { exp: vec![], deg }
    }

    fn trimmed(mut exp: Vec<BigInt>, deg: i64) -> Order {
        while exp.last().is_some_and(|c| c.is_zero()) {
            exp.pop();
        }
        Order { exp, deg }
    }

    pub fn mul(&self, o: &Order) -> Order {
        let len = self.exp.len().max(o.exp.len());
        let exp = (0..len)
            .map(|k| {
                self.exp.get(k).cloned().unwrap_or_default() + o.exp.get(k).cloned().unwrap_or_default()
            })
            .collect();
        Order::trimmed(exp, self.deg + o.deg)
    }

    pub fn inv(&self) -> Order {
        Order {
            exp: self.exp.iter().map(|c| -c).collect(),
            deg: -self.deg,
        }
    }

    /// Sign of the leading coefficient of `P` (0 when there is no exponential part).
    pub fn exp_sign(&self) -> i32 {
        match self.exp.last() {
            Some(c) if c.is_positive() => 1,
            Some(_) => -1,
            None => 0,
        }
    }

    pub fn exp_degree(&self) -> usize {
        self.exp.len()
    }

    pub fn deg(&self) -> i64 {
        self.deg
    }

    pub fn is_polynomial(&self) -> bool {
        self.exp.is_empty()
    }

    pub fn describe(&self) -> String {
        let mut s = format!("n^{}", self.deg);
        if !self.exp.is_empty() {
            let p: Vec<String> = self
                .exp
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(k, c)| format!("{c}n^{}", k + 1))
                .collect();
            s.push_str(&format!("·2^({})", p.join("+")));
        }
        s
    }
}

impl PartialOrd for Order {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Order {
    fn cmp(&self, other: &Self) -> Ordering {
        let d = self.mul(&other.inv());
        match d.exp_sign() {
            1 => Ordering::Greater,
            -1 => Ordering::Less,
            _ => d.deg.cmp(&0),
        }
    }
}

/// `Σ terms + O(err)`, terms sorted by decreasing order and all above `err`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    terms: Vec<(Order, Q)>,
    err: Option<Order>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Limit {
    Zero,
    Finite(Q),
    PosInfinity,
    NegInfinity,
}

impl Expansion {
    pub fn zero() -> Expansion {
        Expansion { terms: vec![], err: None }
    }

    pub fn constant(c: Q) -> Expansion {
        Expansion::monomial(Order::one(), c)
    }

    pub fn monomial(o: Order, c: Q) -> Expansion {
        if c.is_zero() {
            return Expansion::zero();
        }
        Expansion {
            terms: vec![(o, c)],
            err: None,
        }
    }

    fn normalize(mut terms: Vec<(Order, Q)>, err: Option<Order>) -> Expansion {
        terms.sort_by(|a, b| b.0.cmp(&a.0));
        let mut merged: Vec<(Order, Q)> = Vec::new();
        for (o, c) in terms {
            match merged.last_mut() {
                Some((lo, lc)) if *lo == o => *lc += c,
                _ => merged.push((o, c)),
            }
        }
        merged.retain(|(o, c)| !c.is_zero() && err.as_ref().is_none_or(|e| o > e));
        Expansion { terms: merged, err }
    }

    pub fn leading(&self) -> Option<&(Order, Q)> {
        self.terms.first()
    }

    pub fn is_exact(&self) -> bool {
        self.err.is_none()
    }

    /// Order of the largest term (or of the error when there are no terms).
    pub fn top(&self) -> Option<Order> {
        self.terms
            .first()
            .map(|(o, _)| o.clone())
            .or_else(|| self.err.clone())
    }

    /// Order of everything below the leading term.
    fn second(&self) -> Option<Order> {
        match (self.terms.get(1), &self.err) {
            (Some((o, _)), _) => Some(o.clone()),
            (None, e) => e.clone(),
        }
    }

    fn max_err(a: Option<Order>, b: Option<Order>) -> Option<Order> {
        match (a, b) {
            (Some(x), Some(y)) => Some(x.max(y)),
            (x, None) => x,
            (None, y) => y,
        }
    }

    pub fn add(&self, o: &Expansion) -> Expansion {
        let terms = self.terms.iter().chain(o.terms.iter()).cloned().collect();
        Expansion::normalize(terms, Expansion::max_err(self.err.clone(), o.err.clone()))
    }

    pub fn neg(&self) -> Expansion {
        Expansion {
            terms: self.terms.iter().map(|(o, c)| (o.clone(), -c)).collect(),
            err: self.err.clone(),
        }
    }

    pub fn mul(&self, o: &Expansion) -> Expansion {
        if (self.terms.is_empty() && self.err.is_none()) || (o.terms.is_empty() && o.err.is_none()) {
            return Expansion::zero();
        }
        let mut terms = Vec::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &o.terms {
                terms.push((a.mul(b), ca * cb));
            }
        }
        let e1 = self.err.as_ref().zip(o.top()).map(|(e, t)| e.mul(&t));
        let e2 = o.err.as_ref().zip(self.top()).map(|(e, t)| e.mul(&t));
        Expansion::normalize(terms, Expansion::max_err(e1, e2))
    }

    pub fn recip(&self) -> Option<Expansion> {
        let (lo, lc) = self.leading()?.clone();
        let inv = lo.inv();
        let lead = Expansion::monomial(inv.clone(), lc.recip());
        match self.second() {
            None => Some(lead),
            Some(s) => {
                // 1/(t(1+r)) = (1/t)(1 + O(r)) with r of order s/t
                let err = inv.mul(&s).mul(&inv);
                Some(Expansion::normalize(lead.terms, Some(err)))
            }
        }
    }

    pub fn pow(&self, k: i64) -> Option<Expansion> {
        if k.unsigned_abs() > 64 {
            return None;
        }
        let mut acc = Expansion::constant(Q::one());
        for _ in 0..k.unsigned_abs() {
            acc = acc.mul(self);
        }
        if k < 0 {
            acc.recip()
        } else {
            Some(acc)
        }
    }

    /// `2^self`, defined when `self` is an exact integer polynomial.
    pub fn exp2(&self) -> Option<Expansion> {
        if !self.is_exact() {
            return None;
        }
        let mut exp: Vec<BigInt> = Vec::new();
        let mut c0 = Q::zero();
        for (o, c) in &self.terms {
            if !o.is_polynomial() || o.deg < 0 || !c.is_integer() {
                return None;
            }
            if o.deg == 0 {
                c0 = c.clone();
            } else {
                let k = (o.deg - 1) as usize;
                if exp.len() <= k {
                    exp.resize(k + 1, BigInt::zero());
                }
                exp[k] = c.to_integer();
            }
        }
        if c0.abs() > qi(1 << 20) {
            return None;
        }
        let coef = exp2_q(&c0).ok()?;
        Some(Expansion::monomial(Order::trimmed(exp, 0), coef))
    }

    /// Adds an `O(1)` error, as incurred by `floor`/`ceil`.
    pub fn with_unit_error(&self) -> Expansion {
        Expansion::normalize(
            self.terms.clone(),
            Expansion::max_err(self.err.clone(), Some(Order::one())),
        )
    }

    /// Sign of the sequence for large `n`: 0 when eventually identically zero.
    pub fn eventual_sign(&self) -> Option<i32> {
        match self.leading() {
            Some((_, c)) => Some(if c.is_positive() { 1 } else { -1 }),
            None if self.err.is_none() => Some(0),
            None => None,
        }
    }

    pub fn limit(&self) -> Option<Limit> {
        match self.leading() {
            None => match &self.err {
                None => Some(Limit::Zero),
                Some(e) if *e < Order::one() => Some(Limit::Zero),
                Some(_) => None,
            },
            Some((o, c)) => Some(match o.cmp(&Order::one()) {
                Ordering::Greater if c.is_positive() => Limit::PosInfinity,
                Ordering::Greater => Limit::NegInfinity,
                Ordering::Equal => Limit::Finite(c.clone()),
                Ordering::Less => Limit::Zero,
            }),
        }
    }

    /// For an eventually non-negative sequence: `Some(true)` when `Σ a(n)`
    /// converges (geometric or p-series with p > 1), `Some(false)` when it
    /// diverges, `None` outside the rule table.
    pub fn series_converges(&self) -> Option<bool> {
        let harmonic = Order::poly(-1);
        match self.leading() {
            None => match &self.err {
                None => Some(true),
                Some(e) if *e < harmonic => Some(true),
                Some(_) => None,
            },
            Some((o, c)) => {
                if *o < harmonic {
                    Some(true)
                } else if c.is_positive() {
                    Some(false)
                } else {
                    None
                }
            }
        }
    }

    pub fn describe(&self) -> String {
        let mut parts: Vec<String> = self
            .terms
            .iter()
            .map(|(o, c)| format!("{}/{}·{}", c.numer(), c.denom(), o.describe()))
            .collect();
        if let Some(e) = &self.err {
            parts.push(format!("O({})", e.describe()));
        }
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" + ")
        }
    }
}

/// Expands `f(n)` for large `n`.
pub fn expand(f: &SeqFn) -> Option<Expansion> {
    expand_expr(f.body(), f.program(), 0)
}

pub fn expand_expr(e: &Expr, prog: &Program, depth: usize) -> Option<Expansion> {
    if depth > 24 {
        return None;
    }
    let ex = |x: &Expr| expand_expr(x, prog, depth + 1);
    match e {
        Expr::Const(c) => Some(Expansion::constant(c.clone())),
        Expr::N => Some(Expansion::monomial(Order::poly(1), Q::one())),
        Expr::I => None,
        Expr::Add(xs) => xs
            .iter()
            .try_fold(Expansion::zero(), |acc, x| Some(acc.add(&ex(x)?))),
        Expr::Mul(xs) => xs
            .iter()
            .try_fold(Expansion::constant(Q::one()), |acc, x| Some(acc.mul(&ex(x)?))),
        Expr::Neg(a) => Some(ex(a)?.neg()),
        Expr::Sub(a, c) => {
            let d = ex(a)?.add(&ex(c)?.neg());
            match d.eventual_sign()? {
                1 => Some(d),
                0 | -1 => Some(Expansion::zero()),
                _ => None,
            }
        }
        Expr::Div(a, c) => Some(ex(a)?.mul(&ex(c)?.recip()?)),
        Expr::FloorDiv(a, c) => Some(ex(a)?.mul(&ex(c)?.recip()?).with_unit_error()),
        Expr::Pow(a, k) => {
            let k = match &**k {
                Expr::Const(c) if c.is_integer() => c.to_integer().to_i64()?,
                _ => return None,
            };
            ex(a)?.pow(k)
        }
        Expr::Exp2(a) => ex(a)?.exp2(),
        Expr::Ceil(a) | Expr::Floor(a) => Some(ex(a)?.with_unit_error()),
        Expr::Min(a, c) | Expr::Max(a, c) => {
            let (x, y) = (ex(a)?, ex(c)?);
            let s = x.add(&y.neg()).eventual_sign()?;
            let take_x = match e {
                Expr::Min(..) => s <= 0,
                _ => s >= 0,
            };
            Some(if take_x { x } else { y })
        }
        Expr::Call(name, a) => {
            let body = prog.def(name).ok()?;
            expand_expr(&body.substitute(a), prog, depth + 1)
        }
        Expr::PrefixSum(name, a) => {
            if **a != Expr::N {
                return None;
            }
            prefix_sum_expansion(prog.def(name).ok()?, prog, depth + 1)
        }
    }
}

fn shifted(body: &Expr, by: i64) -> Expr {
    body.substitute(&Expr::Add(vec![Expr::N, Expr::int(-by)]))
}

/// `S(n) = Σ_{j<n} f(j)` for growing `f`.
fn prefix_sum_expansion(body: &Expr, prog: &Program, depth: usize) -> Option<Expansion> {
    let f = expand_expr(body, prog, depth)?;
    let (lo, lc) = f.leading()?.clone();
    if !lc.is_positive() {
        return None;
    }
    let n_order = Order::poly(1);
    let rest = f.second().map(|s| s.mul(&n_order));
    match lo.exp_sign() {
        0 => {
            if lo.deg < 0 {
                return None;
            }
            let d = lo.deg;
            let lead = Expansion::monomial(Order::poly(d + 1), lc / qi(d + 1));
            let err = Expansion::max_err(Some(Order::poly(d)), rest);
            Some(Expansion::normalize(lead.terms, err))
        }
        1 if lo.exp_degree() == 1 => {
            // Σ j^d 2^{cj} = 2^{cn} n^d / (2^c - 1) · (1 + O(1/n)), plus O(1)
            let c = lo.exp[0].to_i64()?;
            let base = exp2_q(&qi(c)).ok()?;
            let lead = Expansion::monomial(lo.clone(), lc / (base - Q::one()));
            let own = if lo.deg == 0 {
                Order::one()
            } else {
                lo.mul(&Order::poly(-1)).max(Order::one())
            };
            Some(Expansion::normalize(lead.terms, Expansion::max_err(Some(own), rest)))
        }
        1 => {
            // super-geometric: S(n) = f(n-1)(1 + O(n f(n-2)/f(n-1)))
            let last = expand_expr(&shifted(body, 1), prog, depth)?;
            let prev = expand_expr(&shifted(body, 2), prog, depth)?;
            let (plo, plc) = last.leading()?.clone();
            let err = prev.top()?.mul(&n_order);
            let err = Expansion::max_err(Some(err), last.second());
            let err = Expansion::max_err(err, rest);
            Some(Expansion::normalize(vec![(plo, plc)], err))
        }
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Constant,
    NonDecreasing,
    NonIncreasing,
}

impl Direction {
    fn flip(self) -> Direction {
        match self {
            Direction::NonDecreasing => Direction::NonIncreasing,
            Direction::NonIncreasing => Direction::NonDecreasing,
            Direction::Constant => Direction::Constant,
        }
    }

    fn join(self, o: Direction) -> Option<Direction> {
        match (self, o) {
            (Direction::Constant, x) | (x, Direction::Constant) => Some(x),
            (x, y) if x == y => Some(x),
            _ => None,
        }
    }

    fn compose(outer: Direction, inner: Direction) -> Direction {
        match (outer, inner) {
            (Direction::Constant, _) | (_, Direction::Constant) => Direction::Constant,
            (Direction::NonDecreasing, x) => x,
            (Direction::NonIncreasing, x) => x.flip(),
        }
    }
}

/// Syntactic monotonicity on `n ≥ 0` for positive-valued expressions built
/// from non-negative constants.
pub fn direction(e: &Expr, prog: &Program) -> Option<Direction> {
    direction_depth(e, prog, 0)
}

fn direction_depth(e: &Expr, prog: &Program, depth: usize) -> Option<Direction> {
    if depth > 32 {
        return None;
    }
    let d = |x: &Expr| direction_depth(x, prog, depth + 1);
    match e {
        Expr::Const(c) => (!c.is_negative()).then_some(Direction::Constant),
        Expr::N => Some(Direction::NonDecreasing),
        Expr::I | Expr::Neg(_) | Expr::PrefixSum(..) => None,
        Expr::Add(xs) | Expr::Mul(xs) => xs
            .iter()
            .try_fold(Direction::Constant, |acc, x| acc.join(d(x)?)),
        Expr::Min(a, c) | Expr::Max(a, c) => d(a)?.join(d(c)?),
        Expr::Sub(a, c) => d(a)?.join(d(c)?.flip()),
        Expr::Div(a, c) | Expr::FloorDiv(a, c) => d(a)?.join(d(c)?.flip()),
        Expr::Pow(a, k) => match &**k {
            Expr::Const(c) if c.is_integer() && !c.is_negative() => d(a),
            Expr::Const(c) if c.is_integer() => d(a).map(Direction::flip),
            _ => None,
        },
        Expr::Exp2(a) | Expr::Ceil(a) | Expr::Floor(a) => d(a),
        Expr::Call(name, a) => {
            let outer = direction_depth(prog.def(name).ok()?, prog, depth + 1)?;
            Some(Direction::compose(outer, d(a)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn lim(src: &str) -> Option<Limit> {
        expand(&SeqFn::parse(src).unwrap())?.limit()
    }

    #[test]
    fn polynomial_exponential_limits() {
        assert_eq!(lim("(div 1 (exp2 n))"), Some(Limit::Zero));
        assert_eq!(lim("(div (fdiv (exp2 n) 2) (exp2 n))"), Some(Limit::Finite(q(1, 2))));
        assert_eq!(lim("(div (fdiv (exp2 n) n) (exp2 n))"), Some(Limit::Zero));
        assert_eq!(lim("(mul n (div 1 n))"), Some(Limit::Finite(q(1, 1))));
        assert_eq!(lim("(add (mul n 1) (neg n))"), Some(Limit::Zero));
        assert_eq!(lim("(div (pow n 3) (exp2 n))"), Some(Limit::Zero));
        assert_eq!(lim("(div (exp2 (pow n 2)) (exp2 n))"), Some(Limit::PosInfinity));
    }

    #[test]
    fn series_rules() {
        let conv = |s: &str| expand(&SeqFn::parse(s).unwrap()).unwrap().series_converges();
        assert_eq!(conv("(div 1 (add n 1))"), Some(false));
        assert_eq!(conv("(div 1 (pow (add n 1) 2))"), Some(true));
        assert_eq!(conv("(div 1 (exp2 n))"), Some(true));
        assert_eq!(conv("1"), Some(false));
    }

    #[test]
    fn prefix_sum_ratio_for_fast_growth() {
        // f(n)/Σ_{i<n} f(i) → ∞ for f = 2^(n²); → 2 for f = n
        let r = SeqFn::with_defs("(div (call f n) (psum f n))", &[("f", "(exp2 (pow n 2))")]).unwrap();
        assert_eq!(expand(&r).unwrap().limit(), Some(Limit::PosInfinity));
        let r = SeqFn::with_defs("(div (call f n) (psum f n))", &[("f", "n")]).unwrap();
        assert_eq!(expand(&r).unwrap().limit(), Some(Limit::Zero));
    }

    #[test]
    fn directions() {
        let p = Program::empty();
        let dir = |s: &str| direction(&Expr::parse(s).unwrap(), &p);
        assert_eq!(dir("(div 1 (add n 1))"), Some(Direction::NonIncreasing));
        assert_eq!(dir("(exp2 (pow n 2))"), Some(Direction::NonDecreasing));
        assert_eq!(dir("(add n (div 1 n))"), None);
    }
}
