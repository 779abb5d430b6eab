//! Integer/rational sequence expressions in the variable `n` (and `i` for
//! per-atom weight rules), written as s-expressions:
//!
//! ```text
//! n  i  7  1/3
//! (add a b ...)  (mul a b ...)  (sub a b)   ; sub is truncated at 0
//! (neg a)  (div a b)  (fdiv a b)  (pow a k)  (exp2 a)
//! (ceil a)  (floor a)  (min a b)  (max a b)
//! (call f a)  (psum f a)                     ; psum f a = Σ_{j<a} f(j)
//! ```
//!
//! Named functions live in a [`Program`]; prefix sums are memoized per
//! program behind a mutex so concurrent readers see identical values.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rational::{as_u64, parse_q, qi, Q};

/// Largest bit length materialized by exact evaluation.
pub const EXACT_BITS: u64 = 1 << 22;
/// Largest argument accepted by `psum`.
pub const PSUM_LIMIT: u64 = 1 << 24;
const MAX_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(Q),
    N,
    I,
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    FloorDiv(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Exp2(Box<Expr>),
    Ceil(Box<Expr>),
    Floor(Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
    Call(String, Box<Expr>),
    PrefixSum(String, Box<Expr>),
}

fn b(e: Expr) -> Box<Expr> {
    Box::new(e)
}

impl Expr {
    pub fn int(v: i64) -> Expr {
        Expr::Const(qi(v))
    }
    pub fn constant(v: Q) -> Expr {
        Expr::Const(v)
    }
    pub fn add(a: Expr, c: Expr) -> Expr {
        Expr::Add(vec![a, c])
    }
    pub fn mul(a: Expr, c: Expr) -> Expr {
        Expr::Mul(vec![a, c])
    }
    /// `a − c` without truncation.
    pub fn sub_raw(a: Expr, c: Expr) -> Expr {
        Expr::Add(vec![a, Expr::Neg(Box::new(c))])
    }

    pub fn sub(a: Expr, c: Expr) -> Expr {
        Expr::Sub(b(a), b(c))
    }
    pub fn div(a: Expr, c: Expr) -> Expr {
        Expr::Div(b(a), b(c))
    }
    pub fn fdiv(a: Expr, c: Expr) -> Expr {
        Expr::FloorDiv(b(a), b(c))
    }
    pub fn pow(a: Expr, k: i64) -> Expr {
        Expr::Pow(b(a), b(Expr::int(k)))
    }
    pub fn exp2(a: Expr) -> Expr {
        Expr::Exp2(b(a))
    }
    pub fn ceil(a: Expr) -> Expr {
        Expr::Ceil(b(a))
    }
    pub fn min(a: Expr, c: Expr) -> Expr {
        Expr::Min(b(a), b(c))
    }
    pub fn call(name: &str, a: Expr) -> Expr {
        Expr::Call(name.to_string(), b(a))
    }
    pub fn psum(name: &str, a: Expr) -> Expr {
        Expr::PrefixSum(name.to_string(), b(a))
    }

    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src);
        let mut pos = 0;
        let e = parse_tokens(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(Error::Parse(format!("trailing input in `{src}`")));
        }
        Ok(e)
    }

    pub fn mentions_i(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| found |= matches!(e, Expr::I));
        found
    }

    pub fn mentions_n(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| found |= matches!(e, Expr::N));
        found
    }

    pub fn called_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |e| match e {
            Expr::Call(f, _) | Expr::PrefixSum(f, _) => out.push(f.clone()),
            _ => {}
        });
        out
    }

    fn visit<F: FnMut(&Expr)>(&self, f: &mut F) {
        f(self);
        match self {
            Expr::Const(_) | Expr::N | Expr::I => {}
            Expr::Add(xs) | Expr::Mul(xs) => xs.iter().for_each(|x| x.visit(f)),
            Expr::Neg(a) | Expr::Exp2(a) | Expr::Ceil(a) | Expr::Floor(a) => a.visit(f),
            Expr::Call(_, a) | Expr::PrefixSum(_, a) => a.visit(f),
            Expr::Sub(a, c)
            | Expr::Div(a, c)
            | Expr::FloorDiv(a, c)
            | Expr::Pow(a, c)
            | Expr::Min(a, c)
            | Expr::Max(a, c) => {
                a.visit(f);
                c.visit(f);
            }
        }
    }

    /// Replaces `n` by `arg`.
    pub fn substitute(&self, arg: &Expr) -> Expr {
        let s = |e: &Expr| Box::new(e.substitute(arg));
        match self {
            Expr::N => arg.clone(),
            Expr::Const(_) | Expr::I => self.clone(),
            Expr::Add(xs) => Expr::Add(xs.iter().map(|x| x.substitute(arg)).collect()),
            Expr::Mul(xs) => Expr::Mul(xs.iter().map(|x| x.substitute(arg)).collect()),
            Expr::Sub(a, c) => Expr::Sub(s(a), s(c)),
            Expr::Neg(a) => Expr::Neg(s(a)),
            Expr::Div(a, c) => Expr::Div(s(a), s(c)),
            Expr::FloorDiv(a, c) => Expr::FloorDiv(s(a), s(c)),
            Expr::Pow(a, c) => Expr::Pow(s(a), s(c)),
            Expr::Exp2(a) => Expr::Exp2(s(a)),
            Expr::Ceil(a) => Expr::Ceil(s(a)),
            Expr::Floor(a) => Expr::Floor(s(a)),
            Expr::Min(a, c) => Expr::Min(s(a), s(c)),
            Expr::Max(a, c) => Expr::Max(s(a), s(c)),
            Expr::Call(f, a) => Expr::Call(f.clone(), s(a)),
            Expr::PrefixSum(f, a) => Expr::PrefixSum(f.clone(), s(a)),
        }
    }
}

fn tokenize(src: &str) -> Vec<String> {
    src.replace('(', " ( ")
        .replace(')', " ) ")
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

fn parse_tokens(tokens: &[String], pos: &mut usize) -> Result<Expr> {
    let tok = tokens
        .get(*pos)
        .ok_or_else(|| Error::Parse("unexpected end of expression".into()))?;
    *pos += 1;
    match tok.as_str() {
        "(" => {
            let head = tokens
                .get(*pos)
                .ok_or_else(|| Error::Parse("missing operator".into()))?
                .clone();
            *pos += 1;
            let mut args = Vec::new();
            let mut names = Vec::new();
            let takes_name = matches!(head.as_str(), "call" | "psum");
            loop {
                match tokens.get(*pos).map(String::as_str) {
                    None => return Err(Error::Parse("unbalanced parentheses".into())),
                    Some(")") => {
                        *pos += 1;
                        break;
                    }
                    Some(t) if takes_name && names.is_empty() && args.is_empty() => {
                        if t == "(" {
                            return Err(Error::Parse(format!("`{head}` expects a function name")));
                        }
                        names.push(t.to_string());
                        *pos += 1;
                    }
                    Some(_) => args.push(parse_tokens(tokens, pos)?),
                }
            }
            build(&head, names, args)
        }
        ")" => Err(Error::Parse("unexpected `)`".into())),
        "n" => Ok(Expr::N),
        "i" => Ok(Expr::I),
        t => parse_q(t)
            .map(Expr::Const)
            .map_err(|_| Error::Parse(format!("unknown atom `{t}`"))),
    }
}

fn build(head: &str, names: Vec<String>, mut args: Vec<Expr>) -> Result<Expr> {
    let arity = |k: usize, args: &Vec<Expr>| {
        if args.len() == k {
            Ok(())
        } else {
            Err(Error::Parse(format!("`{head}` takes {k} argument(s), got {}", args.len())))
        }
    };
    let two = |mut args: Vec<Expr>| {
        let c = args.pop().unwrap();
        let a = args.pop().unwrap();
        (b(a), b(c))
    };
    Ok(match head {
        "add" | "mul" => {
            if args.is_empty() {
                return Err(Error::Parse(format!("`{head}` needs arguments")));
            }
            if head == "add" {
                Expr::Add(args)
            } else {
                Expr::Mul(args)
            }
        }
        "sub" | "div" | "fdiv" | "pow" | "min" | "max" => {
            arity(2, &args)?;
            let (a, c) = two(args);
            match head {
                "sub" => Expr::Sub(a, c),
                "div" => Expr::Div(a, c),
                "fdiv" => Expr::FloorDiv(a, c),
                "pow" => Expr::Pow(a, c),
                "min" => Expr::Min(a, c),
                _ => Expr::Max(a, c),
            }
        }
        "neg" | "exp2" | "ceil" | "floor" => {
            arity(1, &args)?;
            let a = b(args.pop().unwrap());
            match head {
                "neg" => Expr::Neg(a),
                "exp2" => Expr::Exp2(a),
                "ceil" => Expr::Ceil(a),
                _ => Expr::Floor(a),
            }
        }
        "call" | "psum" => {
            arity(1, &args)?;
            let name = names
                .into_iter()
                .next()
                .ok_or_else(|| Error::Parse(format!("`{head}` expects a function name")))?;
            let a = b(args.pop().unwrap());
            if head == "call" {
                Expr::Call(name, a)
            } else {
                Expr::PrefixSum(name, a)
            }
        }
        other => return Err(Error::Parse(format!("unknown operator `{other}`"))),
    })
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, op: &str, xs: &[&Expr]| {
            write!(f, "({op}")?;
            for x in xs {
                write!(f, " {x}")?;
            }
            f.write_str(")")
        };
        match self {
            Expr::Const(c) if c.is_integer() => write!(f, "{}", c.numer()),
            Expr::Const(c) => write!(f, "{}/{}", c.numer(), c.denom()),
            Expr::N => f.write_str("n"),
            Expr::I => f.write_str("i"),
            Expr::Add(xs) => list(f, "add", &xs.iter().collect::<Vec<_>>()),
            Expr::Mul(xs) => list(f, "mul", &xs.iter().collect::<Vec<_>>()),
            Expr::Sub(a, c) => list(f, "sub", &[a, c]),
            Expr::Neg(a) => list(f, "neg", &[a]),
            Expr::Div(a, c) => list(f, "div", &[a, c]),
            Expr::FloorDiv(a, c) => list(f, "fdiv", &[a, c]),
            Expr::Pow(a, c) => list(f, "pow", &[a, c]),
            Expr::Exp2(a) => list(f, "exp2", &[a]),
            Expr::Ceil(a) => list(f, "ceil", &[a]),
            Expr::Floor(a) => list(f, "floor", &[a]),
            Expr::Min(a, c) => list(f, "min", &[a, c]),
            Expr::Max(a, c) => list(f, "max", &[a, c]),
            Expr::Call(name, a) => write!(f, "(call {name} {a})"),
            Expr::PrefixSum(name, a) => write!(f, "(psum {name} {a})"),
        }
    }
}

/// Named single-variable functions plus the prefix-sum memo.
#[derive(Debug, Default)]
pub struct Program {
    defs: BTreeMap<String, Expr>,
    psums: Mutex<HashMap<String, Vec<Q>>>,
}

impl Program {
    pub fn new(defs: BTreeMap<String, Expr>) -> Result<Arc<Program>> {
        for (name, body) in &defs {
            if body.mentions_i() {
                return Err(Error::Validation(format!("function `{name}` mentions `i`")));
            }
            for callee in body.called_names() {
                if !defs.contains_key(&callee) {
                    return Err(Error::Validation(format!("unknown function `{callee}`")));
                }
            }
        }
        Ok(Arc::new(Program {
            defs,
            psums: Mutex::new(HashMap::new()),
        }))
    }

    /// Union of two programs; a name bound to different bodies is an error.
    pub fn merge(a: &Arc<Program>, b: &Arc<Program>) -> Result<Arc<Program>> {
        if b.defs.is_empty() || Arc::ptr_eq(a, b) {
            return Ok(a.clone());
        }
        if a.defs.is_empty() {
            return Ok(b.clone());
        }
        let mut defs = a.defs.clone();
        for (name, body) in &b.defs {
            match defs.get(name) {
                Some(existing) if existing != body => {
                    return Err(Error::Validation(format!("function `{name}` defined twice")));
                }
                _ => {
                    defs.insert(name.clone(), body.clone());
                }
            }
        }
        Program::new(defs)
    }

    pub fn empty() -> Arc<Program> {
        Arc::new(Program::default())
    }

    pub fn defs(&self) -> &BTreeMap<String, Expr> {
        &self.defs
    }

    pub fn def(&self, name: &str) -> Result<&Expr> {
        self.defs
            .get(name)
            .ok_or_else(|| Error::Expr(format!("unknown function `{name}`")))
    }

    fn prefix_sum(&self, name: &str, upto: u64, depth: usize) -> Result<Q> {
        if upto > PSUM_LIMIT {
            return Err(Error::TooLarge(format!("psum {name} at {upto}")));
        }
        let body = self.def(name)?;
        let upto = upto as usize;
        {
            let cache = self.psums.lock().unwrap();
            if let Some(v) = cache.get(name) {
                if v.len() > upto {
                    return Ok(v[upto].clone());
                }
            }
        }
        // Computed outside the lock; `body` may itself need other prefix sums.
        let (mut acc, start) = {
            let cache = self.psums.lock().unwrap();
            match cache.get(name) {
                Some(v) => (v.clone(), v.len()),
                None => (vec![Q::zero()], 1),
            }
        };
        for k in start..=upto {
            let term = eval_in(self, body, &qi((k - 1) as u64), None, depth + 1)?;
            let next = &acc[k - 1] + term;
            acc.push(next);
        }
        let result = acc[upto].clone();
        let mut cache = self.psums.lock().unwrap();
        let slot = cache.entry(name.to_string()).or_default();
        if slot.len() < acc.len() {
            *slot = acc;
        }
        Ok(result)
    }
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.defs == other.defs
    }
}

fn want_int(x: &Q, what: &str) -> Result<BigInt> {
    if x.is_integer() {
        Ok(x.to_integer())
    } else {
        Err(Error::Expr(format!("{what} must be an integer, got {x}")))
    }
}

pub fn pow_q(base: &Q, k: &BigInt) -> Result<Q> {
    let kk = k
        .abs()
        .to_u64()
        .ok_or_else(|| Error::TooLarge(format!("exponent {k}")))?;
    let bits = base.numer().bits().max(base.denom().bits());
    if bits.saturating_mul(kk) > EXACT_BITS {
        return Err(Error::TooLarge(format!("pow with exponent {k}")));
    }
    let kk = kk as u32;
    let v = Q::new(base.numer().pow(kk), base.denom().pow(kk));
    if k.is_negative() {
        if v.is_zero() {
            return Err(Error::Expr("zero to a negative power".into()));
        }
        Ok(v.recip())
    } else {
        Ok(v)
    }
}

pub fn exp2_q(x: &Q) -> Result<Q> {
    let k = want_int(x, "exp2 argument")?;
    let kk = k
        .abs()
        .to_u64()
        .filter(|v| *v <= EXACT_BITS)
        .ok_or_else(|| Error::TooLarge(format!("exp2 {k}")))?;
    let v = Q::from_integer(BigInt::one() << kk);
    Ok(if k.is_negative() { v.recip() } else { v })
}

fn eval_in(prog: &Program, e: &Expr, n: &Q, i: Option<&Q>, depth: usize) -> Result<Q> {
    if depth > MAX_DEPTH {
        return Err(Error::Expr("call depth exceeded".into()));
    }
    let ev = |x: &Expr| eval_in(prog, x, n, i, depth);
    Ok(match e {
        Expr::Const(c) => c.clone(),
        Expr::N => n.clone(),
        Expr::I => i
            .cloned()
            .ok_or_else(|| Error::Expr("`i` is unbound here".into()))?,
        Expr::Add(xs) => {
            let mut acc = Q::zero();
            for x in xs {
                acc += ev(x)?;
            }
            acc
        }
        Expr::Mul(xs) => {
            let mut acc = Q::one();
            for x in xs {
                acc *= ev(x)?;
                if (acc.numer().bits() + acc.denom().bits()) > 2 * EXACT_BITS {
                    return Err(Error::TooLarge("product".into()));
                }
            }
            acc
        }
        Expr::Sub(a, c) => {
            let v = ev(a)? - ev(c)?;
            if v.is_negative() {
                Q::zero()
            } else {
                v
            }
        }
        Expr::Neg(a) => -ev(a)?,
        Expr::Div(a, c) => {
            let d = ev(c)?;
            if d.is_zero() {
                return Err(Error::Expr(format!("division by zero in {e}")));
            }
            ev(a)? / d
        }
        Expr::FloorDiv(a, c) => {
            let d = ev(c)?;
            if d.is_zero() {
                return Err(Error::Expr(format!("division by zero in {e}")));
            }
            (ev(a)? / d).floor()
        }
        Expr::Pow(a, k) => {
            let k = want_int(&ev(k)?, "exponent")?;
            pow_q(&ev(a)?, &k)?
        }
        Expr::Exp2(a) => exp2_q(&ev(a)?)?,
        Expr::Ceil(a) => ev(a)?.ceil(),
        Expr::Floor(a) => ev(a)?.floor(),
        Expr::Min(a, c) => {
            let (x, y) = (ev(a)?, ev(c)?);
            if x <= y {
                x
            } else {
                y
            }
        }
        Expr::Max(a, c) => {
            let (x, y) = (ev(a)?, ev(c)?);
            if x >= y {
                x
            } else {
                y
            }
        }
        Expr::Call(name, a) => {
            let arg = ev(a)?;
            eval_in(prog, prog.def(name)?, &arg, None, depth + 1)?
        }
        Expr::PrefixSum(name, a) => {
            let arg = ev(a)?;
            let upto = as_u64(&arg)
                .ok_or_else(|| Error::Expr(format!("psum bound must be a natural, got {arg}")))?;
            prog.prefix_sum(name, upto, depth)?
        }
    })
}

/// An expression together with the named functions it may call.
#[derive(Debug, Clone)]
pub struct SeqFn {
    body: Expr,
    prog: Arc<Program>,
}

impl PartialEq for SeqFn {
    fn eq(&self, other: &Self) -> bool {
        self.body == other.body && *self.prog == *other.prog
    }
}

impl SeqFn {
    pub fn new(body: Expr, prog: Arc<Program>) -> Result<SeqFn> {
        for callee in body.called_names() {
            prog.def(&callee)
                .map_err(|_| Error::Validation(format!("unknown function `{callee}`")))?;
        }
        Ok(SeqFn { body, prog })
    }

    pub fn plain(body: Expr) -> SeqFn {
        SeqFn {
            body,
            prog: Program::empty(),
        }
    }

    pub fn parse(src: &str) -> Result<SeqFn> {
        SeqFn::new(Expr::parse(src)?, Program::empty())
    }

    pub fn with_defs(src: &str, defs: &[(&str, &str)]) -> Result<SeqFn> {
        let mut map = BTreeMap::new();
        for (name, body) in defs {
            map.insert(name.to_string(), Expr::parse(body)?);
        }
        SeqFn::new(Expr::parse(src)?, Program::new(map)?)
    }

    pub fn body(&self) -> &Expr {
        &self.body
    }

    pub fn program(&self) -> &Arc<Program> {
        &self.prog
    }

    /// A function sharing this one's program but with a different body.
    pub fn derive(&self, body: Expr) -> Result<SeqFn> {
        SeqFn::new(body, self.prog.clone())
    }

    /// The program extended with this function under `name`, so other
    /// bodies can `(call name ...)` it.
    pub fn as_def(&self, name: &str) -> Result<Arc<Program>> {
        let mut defs = self.prog.defs.clone();
        defs.insert(name.to_string(), self.body.clone());
        Program::new(defs)
    }

    pub fn eval(&self, n: &Q) -> Result<Q> {
        eval_in(&self.prog, &self.body, n, None, 0)
    }

    pub fn eval_u(&self, n: u64) -> Result<Q> {
        self.eval(&qi(n))
    }

    pub fn eval2(&self, n: &Q, i: &Q) -> Result<Q> {
        eval_in(&self.prog, &self.body, n, Some(i), 0)
    }

    pub fn eval_expr(&self, e: &Expr, n: &Q) -> Result<Q> {
        eval_in(&self.prog, e, n, None, 0)
    }

    /// Integer value at `n`, rejecting non-integers.
    pub fn eval_int(&self, n: u64) -> Result<BigInt> {
        want_int(&self.eval_u(n)?, "value")
    }

    pub fn to_sexpr(&self) -> String {
        self.body.to_string()
    }
}

impl fmt::Display for SeqFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.body)
    }
}

/// JSON form: either a bare s-expression string, or
/// `{"expr": "...", "defs": {"f": "..."}}`.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SeqFnRepr {
    Bare(String),
    WithDefs {
        expr: String,
        #[serde(default)]
        defs: BTreeMap<String, String>,
    },
}

impl Serialize for SeqFn {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.prog.defs.is_empty() {
            SeqFnRepr::Bare(self.to_sexpr()).serialize(s)
        } else {
            SeqFnRepr::WithDefs {
                expr: self.to_sexpr(),
                defs: self
                    .prog
                    .defs
                    .iter()
                    .map(|(k, v)| (k.clone(), v.to_string()))
                    .collect(),
            }
            .serialize(s)
        }
    }
}

impl<'de> Deserialize<'de> for SeqFn {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = SeqFnRepr::deserialize(d)?;
        let built = match repr {
            SeqFnRepr::Bare(src) => SeqFn::parse(&src),
            SeqFnRepr::WithDefs { expr, defs } => (|| {
                let mut map = BTreeMap::new();
                for (k, v) in defs {
                    map.insert(k, Expr::parse(&v)?);
                }
                SeqFn::new(Expr::parse(&expr)?, Program::new(map)?)
            })(),
        };
        built.map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn parse_print_round_trip() {
        for src in [
            "(mul 2 (pow n 2))",
            "(sub n 3)",
            "(div 1 (add n 1))",
            "(call f (call f n))",
            "(psum f n)",
            "(exp2 (pow n 2))",
            "1/3",
        ] {
            let e = Expr::parse(src).unwrap();
            assert_eq!(e.to_string(), src);
        }
        assert!(Expr::parse("(mul 2").is_err());
        assert!(Expr::parse("(frob n)").is_err());
        assert!(Expr::parse("(sub n)").is_err());
    }

    #[test]
    fn evaluation_is_exact() {
        let f = SeqFn::parse("(div 1 (add n 1))").unwrap();
        assert_eq!(f.eval_u(3).unwrap(), q(1, 4));
        let t = SeqFn::parse("(sub 2 n)").unwrap();
        assert_eq!(t.eval_u(5).unwrap(), qi(0));
        let fd = SeqFn::parse("(fdiv (exp2 n) n)").unwrap();
        assert_eq!(fd.eval_u(5).unwrap(), qi(6));
    }

    #[test]
    fn named_calls_and_prefix_sums() {
        let g = SeqFn::with_defs("(mul n (call f (call f n)))", &[("f", "(exp2 (pow n 2))")]).unwrap();
        // g(2) = 2 * f(16) = 2 * 2^256
        assert_eq!(g.eval_u(2).unwrap(), Q::from_integer(BigInt::from(2) << 256u32));
        let s = SeqFn::with_defs("(psum f n)", &[("f", "(pow n 4)")]).unwrap();
        assert_eq!(s.eval_u(4).unwrap(), qi(1 + 16 + 81));
        assert_eq!(s.eval_u(2).unwrap(), qi(1));
    }

    #[test]
    fn unknown_function_is_rejected() {
        assert!(SeqFn::parse("(call f n)").is_err());
    }

    #[test]
    fn oversized_values_error_instead_of_allocating() {
        let f = SeqFn::parse("(exp2 (exp2 n))").unwrap();
        assert!(matches!(f.eval_u(40), Err(Error::TooLarge(_))));
    }
}
