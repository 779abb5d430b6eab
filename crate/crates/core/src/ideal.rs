//! Ideals on ω and the three-valued membership oracle.

use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::asymptotic::{direction, expand, Direction, Limit};
use crate::blocks::BlockGenerator;
use crate::error::{Error, Result};
use crate::expr::{Expr, Program, SeqFn};
use crate::rational::{q, to_canonical, Q};
use crate::setspec::{SelectMode, SetBody, SetSpec, ENUM_LIMIT};
use crate::submeasure::SubmeasureSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IdealSpec {
    /// Finite sets.
    Fin,
    Exh { submeasure: SubmeasureSpec },
    /// `Φ(f)`.
    Phi { f: SeqFn },
    /// `Z_g` for the step function `g` built from `f`, equal to `Φ(f)` when
    /// `f` passes the simple density check.
    SimpleDensity { f: SeqFn },
    /// `I_f = {A : Σ_{n∈A} f(n) < ∞}`.
    Summable { f: SeqFn },
}

impl IdealSpec {
    pub fn exh(submeasure: SubmeasureSpec) -> IdealSpec {
        IdealSpec::Exh { submeasure }
    }

    /// The block generator whose `lim μ_n(X) = 0` decides membership.
    pub fn generator(&self) -> Option<BlockGenerator> {
        match self {
            IdealSpec::Exh { submeasure } => submeasure.generator(),
            IdealSpec::Phi { f } | IdealSpec::SimpleDensity { f } => Some(BlockGenerator::phi(f.clone())),
            _ => None,
        }
    }

    pub fn submeasure(&self) -> Option<SubmeasureSpec> {
        match self {
            IdealSpec::Fin => None,
            IdealSpec::Exh { submeasure } => Some(submeasure.clone()),
            IdealSpec::Summable { f } => Some(SubmeasureSpec::summable(f.clone())),
            _ => self.generator().map(SubmeasureSpec::density),
        }
    }

    fn summable_weight(&self) -> Option<SeqFn> {
        match self {
            IdealSpec::Summable { f } => Some(f.clone()),
            IdealSpec::Exh { submeasure: SubmeasureSpec::Summable { weight } } => Some(weight.clone()),
            _ => None,
        }
    }
}

/// `μ_n(x)` for `1 ≤ n ≤ horizon`.
pub fn block_values(ideal: &IdealSpec, x: &SetSpec, horizon: u64) -> Result<Vec<(u64, Q)>> {
    let g = ideal.generator().ok_or(Error::NotBlockStructured)?;
    generator_values(&g, x, horizon)
}

pub fn generator_values(g: &BlockGenerator, x: &SetSpec, horizon: u64) -> Result<Vec<(u64, Q)>> {
    let mut out = Vec::new();
    for n in g.first().max(1)..=horizon {
        if !g.has_block(n) {
            break;
        }
        out.push((n, g.mass_in(n, x)?));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InEvidence {
    /// Every finite set is in every ideal considered here.
    Finite { max: Option<u64>, tail_certified: bool },
    /// `μ_n(x)` has a closed form whose limit is 0.
    ClosedForm {
        value: String,
        expansion: String,
        #[serde(with = "crate::rational::canon_trace")]
        trace: Vec<(u64, Q)>,
    },
    /// Segment sums are dominated by a convergent geometric or p-series.
    Convergent {
        bound: String,
        expansion: String,
        #[serde(with = "crate::rational::canon_trace")]
        trace: Vec<(u64, Q)>,
    },
    /// Derived from verdicts on parts (finite unions, subsets).
    Combined { rule: String, parts: Vec<MembershipVerdict> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NotInWitness {
    /// `μ_n(x) ≥ eps` at the listed indices, recurring by the closed form.
    Recurring {
        #[serde(with = "crate::rational::canon")]
        eps: Q,
        indices: Vec<u64>,
        #[serde(with = "crate::rational::canon_vec")]
        values: Vec<Q>,
        value: String,
        expansion: String,
    },
    /// Segment sums dominate a divergent series.
    Divergent {
        bound: String,
        expansion: String,
        #[serde(with = "crate::rational::canon_trace")]
        trace: Vec<(u64, Q)>,
    },
    Combined { rule: String, part: Box<MembershipVerdict> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum MembershipVerdict {
    In { evidence: InEvidence },
    NotIn { witness: NotInWitness },
    Undetermined {
        #[serde(with = "crate::rational::canon_trace")]
        trace: Vec<(u64, Q)>,
        /// First index from which the trace stays at or below the tolerance.
        below_tolerance_from: Option<u64>,
        note: String,
    },
}

impl MembershipVerdict {
    pub fn is_in(&self) -> bool {
        matches!(self, MembershipVerdict::In { .. })
    }

    pub fn is_not_in(&self) -> bool {
        matches!(self, MembershipVerdict::NotIn { .. })
    }

    /// `In` carrying only closed-form certificates.
    pub fn is_closed_form(&self) -> bool {
        match self {
            MembershipVerdict::In { evidence } => match evidence {
                InEvidence::Finite { .. } | InEvidence::ClosedForm { .. } | InEvidence::Convergent { .. } => true,
                InEvidence::Combined { parts, .. } => parts.iter().all(|p| p.is_closed_form()),
            },
            _ => false,
        }
    }

    fn undetermined(trace: Vec<(u64, Q)>, tolerance: &Q, note: impl Into<String>) -> MembershipVerdict {
        let mut from = None;
        for (n, v) in trace.iter().rev() {
            if v > tolerance {
                break;
            }
            from = Some(*n);
        }
        MembershipVerdict::Undetermined { trace, below_tolerance_from: from, note: note.into() }
    }
}

/// An expression in `n` with the functions it calls.
#[derive(Clone)]
struct Sym {
    e: Expr,
    p: Arc<Program>,
}

impl Sym {
    fn of(f: &SeqFn) -> Sym {
        Sym { e: f.body().clone(), p: f.program().clone() }
    }

    fn plain(e: Expr) -> Sym {
        Sym { e, p: Program::empty() }
    }

    fn join(a: Sym, b: Sym, op: impl FnOnce(Expr, Expr) -> Expr) -> Option<Sym> {
        let p = Program::merge(&a.p, &b.p).ok()?;
        Some(Sym { e: op(a.e, b.e), p })
    }

    /// `self(arg(n))`.
    fn compose(&self, arg: Sym) -> Option<Sym> {
        let p = Program::merge(&self.p, &arg.p).ok()?;
        Some(Sym { e: self.e.substitute(&arg.e), p })
    }

    fn seq(self) -> Option<SeqFn> {
        SeqFn::new(self.e, self.p).ok()
    }
}

/// Closed forms of a generator's block start, length and uniform weight.
struct BlockForms {
    start: Option<Sym>,
    len: Sym,
    weight: Sym,
}

fn block_forms(g: &BlockGenerator) -> Option<BlockForms> {
    match g {
        BlockGenerator::Phi { f } => Some(BlockForms {
            start: None,
            len: Sym { e: Expr::Mul(vec![Expr::N, f.body().clone()]), p: f.program().clone() },
            weight: Sym { e: Expr::div(Expr::int(1), f.body().clone()), p: f.program().clone() },
        }),
        BlockGenerator::AsymptoticDensity => Some(BlockForms {
            start: Some(Sym::plain(Expr::exp2(Expr::N))),
            len: Sym::plain(Expr::exp2(Expr::N)),
            weight: Sym::plain(Expr::div(Expr::int(1), Expr::exp2(Expr::N))),
        }),
        BlockGenerator::Rule { start, length, weight, .. } if !weight.body().mentions_i() => Some(BlockForms {
            start: start.as_ref().map(Sym::of),
            len: Sym::of(length),
            weight: Sym::of(weight),
        }),
        _ => None,
    }
}

fn eventually_nonneg(s: &Sym) -> bool {
    s.clone()
        .seq()
        .and_then(|f| expand(&f))
        .and_then(|x| x.eventual_sign())
        .is_some_and(|sg| sg >= 0)
}

/// Rule intervals whose `k`-th interval lies inside block `k`.
fn aligned(g: &BlockGenerator, forms: &BlockForms, start: &SeqFn, length: &SeqFn, from: u64, horizon: u64) -> bool {
    let Some(bs) = &forms.start else { return false };
    let lo = Sym::join(Sym::of(start), bs.clone(), Expr::sub_raw);
    let hi_block = Sym::join(bs.clone(), forms.len.clone(), |a, b| Expr::Add(vec![a, b]));
    let hi_rule = Sym::join(Sym::of(start), Sym::of(length), |a, b| Expr::Add(vec![a, b]));
    let hi = hi_block.zip(hi_rule).and_then(|(a, b)| Sym::join(a, b, Expr::sub_raw));
    if !lo.is_some_and(|s| eventually_nonneg(&s)) || !hi.is_some_and(|s| eventually_nonneg(&s)) {
        return false;
    }
    let first = from.max(g.first()).max(1);
    (first..=horizon.min(first + 64)).all(|k| {
        let (Ok(b), Ok(a), Ok(l)) = (g.block(k), start.eval_int(k), length.eval_int(k)) else {
            return false;
        };
        a >= b.start && &a + &l <= b.end()
    }) && from <= first
}

/// `|x ∩ block n|` as a closed form valid for large `n`.
fn count_form(g: &BlockGenerator, forms: &BlockForms, x: &SetSpec, horizon: u64) -> Option<Sym> {
    if x.is_finite_form() {
        return Some(Sym::plain(Expr::int(0)));
    }
    match &x.body {
        SetBody::All => Some(forms.len.clone()),
        SetBody::BlockSelect { generator, count, .. } if generator == g => {
            Sym::join(Sym::of(count), forms.len.clone(), |a, b| Expr::Min(Box::new(a), Box::new(b)))
        }
        SetBody::Complement { set } => {
            let inner = count_form(g, forms, set, horizon)?;
            Sym::join(forms.len.clone(), inner, Expr::sub)
        }
        SetBody::RuleIntervals { start, length, from, to: None }
            if aligned(g, forms, start, length, *from, horizon) =>
        {
            Some(Sym::of(length))
        }
        _ => None,
    }
}

/// Decides `x ∈ I` by the closed-form rule table, falling back to a trace.
pub fn membership(ideal: &IdealSpec, x: &SetSpec, horizon: u64, tolerance: &Q) -> Result<MembershipVerdict> {
    if horizon == 0 || !tolerance.is_positive() {
        return Err(Error::Validation("horizon must be ≥ 1 and tolerance > 0".into()));
    }
    if x.is_finite_form() {
        return Ok(MembershipVerdict::In {
            evidence: InEvidence::Finite { max: x.finite_max(), tail_certified: true },
        });
    }
    match &x.body {
        SetBody::Union { sets } => {
            let parts = sets
                .iter()
                .map(|s| membership(ideal, s, horizon, tolerance))
                .collect::<Result<Vec<_>>>()?;
            if let Some(bad) = parts.iter().find(|p| p.is_not_in()) {
                return Ok(MembershipVerdict::NotIn {
                    witness: NotInWitness::Combined { rule: "superset of a non-member".into(), part: Box::new(bad.clone()) },
                });
            }
            if parts.iter().all(|p| p.is_in()) {
                return Ok(MembershipVerdict::In {
                    evidence: InEvidence::Combined { rule: "finite union of members".into(), parts },
                });
            }
        }
        SetBody::Intersect { sets } => {
            for s in sets {
                let v = membership(ideal, s, horizon, tolerance)?;
                if v.is_in() {
                    return Ok(MembershipVerdict::In {
                        evidence: InEvidence::Combined { rule: "subset of a member".into(), parts: vec![v] },
                    });
                }
            }
        }
        _ => {}
    }
    match ideal {
        IdealSpec::Fin => Ok(MembershipVerdict::undetermined(vec![], tolerance, "infinite set form; Fin membership not certified")),
        IdealSpec::Exh { submeasure: SubmeasureSpec::MaxMerge { left, right } } => {
            let l = membership(&IdealSpec::exh((**left).clone()), x, horizon, tolerance)?;
            let r = membership(&IdealSpec::exh((**right).clone()), x, horizon, tolerance)?;
            Ok(if l.is_in() && r.is_in() {
                MembershipVerdict::In {
                    evidence: InEvidence::Combined { rule: "member of both merged ideals".into(), parts: vec![l, r] },
                }
            } else if l.is_not_in() || r.is_not_in() {
                let bad = if l.is_not_in() { l } else { r };
                MembershipVerdict::NotIn {
                    witness: NotInWitness::Combined { rule: "max-merge dominates a component".into(), part: Box::new(bad) },
                }
            } else {
                MembershipVerdict::undetermined(vec![], tolerance, "components undetermined")
            })
        }
        IdealSpec::Exh { submeasure: SubmeasureSpec::FiniteTable(_) } => {
            Err(Error::NotAnIdeal("exhaustive family of a finite table contains ω".into()))
        }
        _ => {
            if let Some(f) = ideal.summable_weight() {
                return summable_membership(&f, x, horizon, tolerance);
            }
            let g = ideal.generator().ok_or(Error::NotBlockStructured)?;
            density_membership(&g, x, horizon, tolerance)
        }
    }
}

fn density_membership(g: &BlockGenerator, x: &SetSpec, horizon: u64, tolerance: &Q) -> Result<MembershipVerdict> {
    let trace = generator_values(g, x, horizon)?;
    let Some(forms) = block_forms(g) else {
        return Ok(MembershipVerdict::undetermined(trace, tolerance, "generator has no closed form"));
    };
    let Some(value) = count_form(g, &forms, x, horizon)
        .and_then(|c| Sym::join(c, forms.weight.clone(), |a, b| Expr::Mul(vec![a, b])))
        .and_then(Sym::seq)
    else {
        return Ok(MembershipVerdict::undetermined(trace, tolerance, "set has no closed-form block count"));
    };
    // the closed form must reproduce the tail of the exact trace
    let tail = trace.len().saturating_sub(3);
    for (n, v) in &trace[tail..] {
        if value.eval_u(*n).ok().as_ref() != Some(v) {
            return Ok(MembershipVerdict::undetermined(trace, tolerance, "closed form disagrees with the trace"));
        }
    }
    let Some(exp) = expand(&value) else {
        return Ok(MembershipVerdict::undetermined(trace, tolerance, "closed form outside the limit rule table"));
    };
    let lim = exp.limit();
    let positive = match &lim {
        Some(Limit::Zero) => {
            return Ok(MembershipVerdict::In {
                evidence: InEvidence::ClosedForm { value: value.to_string(), expansion: exp.describe(), trace },
            })
        }
        Some(Limit::Finite(l)) if l.is_positive() => l.clone(),
        Some(Limit::PosInfinity) => Q::one(),
        _ => return Ok(MembershipVerdict::undetermined(trace, tolerance, "limit not decided by the rule table")),
    };
    for eps in [positive.clone(), positive / q(2, 1)] {
        let hits: Vec<&(u64, Q)> = trace.iter().filter(|(_, v)| *v >= eps).collect();
        if hits.len() >= 3 {
            let last = &hits[hits.len() - 3..];
            return Ok(MembershipVerdict::NotIn {
                witness: NotInWitness::Recurring {
                    eps,
                    indices: last.iter().map(|(n, _)| *n).collect(),
                    values: last.iter().map(|(_, v)| v.clone()).collect(),
                    value: value.to_string(),
                    expansion: exp.describe(),
                },
            });
        }
    }
    Ok(MembershipVerdict::undetermined(trace, tolerance, "positive limit but fewer than 3 witnesses below the horizon"))
}

/// Segment structure `k ↦ [s(k), s(k) + l(k))` of a set, with its first index.
fn segment_forms(x: &SetSpec) -> Option<(Sym, Sym, u64)> {
    match &x.body {
        SetBody::All => Some((Sym::plain(Expr::N), Sym::plain(Expr::int(1)), 0)),
        SetBody::RuleIntervals { start, length, from, to: None } => Some((Sym::of(start), Sym::of(length), *from)),
        SetBody::BlockSelect { generator, count, mode } => {
            let forms = block_forms(generator)?;
            let bs = forms.start?;
            let l = Sym::join(Sym::of(count), forms.len.clone(), |a, b| Expr::Min(Box::new(a), Box::new(b)))?;
            let s = match mode {
                SelectMode::First => bs,
                SelectMode::Last => {
                    let end = Sym::join(bs, forms.len, |a, b| Expr::Add(vec![a, b]))?;
                    Sym::join(end, l.clone(), Expr::sub_raw)?
                }
            };
            Some((s, l, generator.first().max(1)))
        }
        _ => None,
    }
}

/// Points summed exactly across one segment-sum trace; exact partial sums
/// of slowly decaying weights grow denominators quickly.
pub const TRACE_POINTS: u64 = 1 << 9;

fn segment_sums(f: &SeqFn, x: &SetSpec, horizon: u64) -> Result<Vec<(u64, Q)>> {
    let mut out = Vec::new();
    let mut budget = TRACE_POINTS;
    let mut dyadic = |m: u64| -> Result<Option<Q>> {
        let (s, e) = (num_bigint::BigInt::one() << (m - 1), num_bigint::BigInt::one() << m);
        let pts = match x.points_in(&s, &e, budget) {
            Ok(p) => p,
            Err(Error::TooLarge(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        budget -= pts.len() as u64;
        let mut acc = Q::zero();
        for p in pts {
            acc += f.eval_u(p)?;
        }
        Ok(Some(acc))
    };
    if let SetBody::RuleIntervals { start, length, from, .. } = &x.body {
        for k in *from..=horizon.max(*from) {
            let (a, l) = (start.eval_int(k)?, length.eval_int(k)?);
            let (Some(a), Some(l)) = (num_traits::ToPrimitive::to_u64(&a), num_traits::ToPrimitive::to_u64(&l)) else {
                break;
            };
            if l > budget {
                break;
            }
            budget -= l;
            let mut acc = Q::zero();
            for p in a..a + l {
                acc += f.eval_u(p)?;
            }
            out.push((k, acc));
        }
        return Ok(out);
    }
    for m in 1..=horizon.min(24) {
        match dyadic(m)? {
            Some(v) => out.push((m, v)),
            None => break,
        }
    }
    Ok(out)
}

fn summable_membership(f: &SeqFn, x: &SetSpec, horizon: u64, tolerance: &Q) -> Result<MembershipVerdict> {
    let trace = segment_sums(f, x, horizon)?;
    let Some((s, l, _)) = segment_forms(x) else {
        return Ok(MembershipVerdict::undetermined(trace, tolerance, "set has no closed-form segment structure"));
    };
    let fs = Sym::of(f);
    let Some(dir) = direction(f.body(), f.program()) else {
        return Ok(MembershipVerdict::undetermined(trace, tolerance, "weight is not syntactically monotone"));
    };
    let last = Sym::join(
        Sym::join(s.clone(), l.clone(), |a, b| Expr::Add(vec![a, b])).expect("merged above"),
        Sym::plain(Expr::int(-1)),
        |a, b| Expr::Add(vec![a, b]),
    );
    let (Some(at_first), Some(at_last)) = (fs.compose(s.clone()), last.and_then(|e| fs.compose(e))) else {
        return Ok(MembershipVerdict::undetermined(trace, tolerance, "incompatible function definitions"));
    };
    let (big, small) = match dir {
        Direction::NonIncreasing => (at_first, at_last),
        Direction::NonDecreasing => (at_last, at_first),
        Direction::Constant => (at_first.clone(), at_first),
    };
    let times_len = |t: Sym| Sym::join(l.clone(), t, |a, b| Expr::Mul(vec![a, b])).and_then(Sym::seq);
    if let Some(upper) = times_len(big) {
        if let Some(exp) = expand(&upper) {
            if exp.series_converges() == Some(true) {
                return Ok(MembershipVerdict::In {
                    evidence: InEvidence::Convergent { bound: upper.to_string(), expansion: exp.describe(), trace },
                });
            }
        }
    }
    if let Some(lower) = times_len(small) {
        if let Some(exp) = expand(&lower) {
            if exp.series_converges() == Some(false) {
                return Ok(MembershipVerdict::NotIn {
                    witness: NotInWitness::Divergent { bound: lower.to_string(), expansion: exp.describe(), trace },
                });
            }
        }
    }
    Ok(MembershipVerdict::undetermined(trace, tolerance, "segment sums outside the series rule table"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    pub test: usize,
    pub psi: MembershipVerdict,
    pub phi: MembershipVerdict,
    pub merged: MembershipVerdict,
}

/// Membership in `Exh(ψ)`, `Exh(φ)` and `Exh(max(ψ, φ))` for each test set,
/// checking `In(ψ) ∧ In(φ) ⇒ In(φ′)` and `In(φ′) ⇒ In(ψ), In(φ)`.
pub fn max_merge_exh_probe(
    psi: &SubmeasureSpec,
    phi: &SubmeasureSpec,
    tests: &[SetSpec],
    horizon: u64,
    tolerance: &Q,
) -> Result<Vec<ProbeRow>> {
    let merged = IdealSpec::exh(SubmeasureSpec::max_merge(psi.clone(), phi.clone()));
    let mut rows = Vec::new();
    for (i, t) in tests.iter().enumerate() {
        let a = membership(&IdealSpec::exh(psi.clone()), t, horizon, tolerance)?;
        let b = membership(&IdealSpec::exh(phi.clone()), t, horizon, tolerance)?;
        let m = membership(&merged, t, horizon, tolerance)?;
        if a.is_in() && b.is_in() && m.is_not_in() {
            return Err(Error::InconsistentVerdicts(format!("test {i}: both components In but merge NotIn")));
        }
        if m.is_in() && (a.is_not_in() || b.is_not_in()) {
            return Err(Error::InconsistentVerdicts(format!("test {i}: merge In but a component NotIn")));
        }
        rows.push(ProbeRow { test: i, psi: a, phi: b, merged: m });
    }
    Ok(rows)
}

/// Canonical string for a verdict's headline, used in text reports.
pub fn verdict_label(v: &MembershipVerdict) -> String {
    match v {
        MembershipVerdict::In { .. } => "In".into(),
        MembershipVerdict::NotIn { witness: NotInWitness::Recurring { eps, .. } } => {
            format!("NotIn (eps = {})", to_canonical(eps))
        }
        MembershipVerdict::NotIn { .. } => "NotIn".into(),
        MembershipVerdict::Undetermined { trace, .. } => format!("Undetermined ({} trace points)", trace.len()),
    }
}

/// Enumeration cap re-exported for callers building preimages.
pub const PREIMAGE_LIMIT: u64 = ENUM_LIMIT;
