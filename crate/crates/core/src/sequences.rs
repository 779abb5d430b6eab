//! Sequences of finitely supported measures on N_F and the AN-sequence test.

use num_traits::{Signed, Zero};
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

use crate::asymptotic::{expand, Expansion, Limit};
use crate::blocks::BlockGenerator;
use crate::error::{Error, Result};
use crate::expr::{Expr, SeqFn};
use crate::ideal::{membership, IdealSpec, MembershipVerdict};
use crate::measure::{FinMeasure, NonNegMeasure, Point};
use crate::rational::{as_u64, Q};
use crate::setspec::{SelectMode, SetSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum PointForm {
    PF,
    Nat(SeqFn),
}

/// `n ↦ Σ_i w_i(n)·δ_{p_i(n)}`, written `(measure-seq (atom p w) ...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    atoms: Vec<(PointForm, SeqFn)>,
}

/// Splits `(head a b ...)` into its head and top-level children.
fn sexpr_children(src: &str) -> Result<(String, Vec<String>)> {
    let s = src.trim();
    let inner = s
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| Error::Parse(format!("expected a parenthesized form: {s}")))?;
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in inner.chars() {
        match c {
            '(' => {
                depth += 1;
                cur.push(c);
            }
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return Err(Error::Parse("unbalanced parentheses".into()));
                }
                cur.push(c);
            }
            c if c.is_whitespace() && depth == 0 => {
                if !cur.is_empty() {
                    parts.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if depth != 0 {
        return Err(Error::Parse("unbalanced parentheses".into()));
    }
    if !cur.is_empty() {
        parts.push(cur);
    }
    if parts.is_empty() {
        return Err(Error::Parse("empty form".into()));
    }
    let head = parts.remove(0);
    Ok((head, parts))
}

impl Descriptor {
    pub fn parse(src: &str) -> Result<Descriptor> {
        let (head, items) = sexpr_children(src)?;
        if head != "measure-seq" {
            return Err(Error::Parse(format!("expected measure-seq, found {head}")));
        }
        let mut atoms = Vec::new();
        for it in items {
            let (h, args) = sexpr_children(&it)?;
            if h != "atom" || args.len() != 2 {
                return Err(Error::Parse(format!("expected (atom point weight): {it}")));
            }
            let p = if args[0] == "PF" { PointForm::PF } else { PointForm::Nat(SeqFn::parse(&args[0])?) };
            atoms.push((p, SeqFn::parse(&args[1])?));
        }
        Ok(Descriptor { atoms })
    }

    pub fn atoms(&self) -> &[(PointForm, SeqFn)] {
        &self.atoms
    }

    pub fn at(&self, n: u64) -> Result<FinMeasure> {
        let mut out = Vec::with_capacity(self.atoms.len());
        for (p, w) in &self.atoms {
            let point = match p {
                PointForm::PF => Point::PF,
                PointForm::Nat(f) => {
                    let v = f.eval_u(n)?;
                    Point::Nat(as_u64(&v).ok_or_else(|| Error::Validation(format!("atom point {v} at n = {n}")))?)
                }
            };
            out.push((point, w.eval_u(n)?));
        }
        Ok(FinMeasure::from_atoms(out))
    }

    /// Expansion of `Σ_{i∈S} |w_i(n)|` for the atoms selected by `keep`,
    /// assuming their points are eventually distinct.
    fn abs_sum(&self, keep: impl Fn(&PointForm) -> bool) -> Option<Expansion> {
        let mut acc = Expansion::zero();
        for (p, w) in self.atoms.iter().filter(|(p, _)| keep(p)) {
            let e = expand(w)?;
            acc = match e.eventual_sign()? {
                -1 => acc.add(&e.neg()),
                _ => acc.add(&e),
            };
            let _ = p;
        }
        Some(acc)
    }

    fn total(&self) -> Option<Expansion> {
        self.atoms
            .iter()
            .try_fold(Expansion::zero(), |acc, (_, w)| Some(acc.add(&expand(w)?)))
    }

    /// Whether all points are pairwise eventually distinct.
    fn points_separate(&self) -> bool {
        let pts: Vec<&PointForm> = self.atoms.iter().map(|(p, _)| p).collect();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                match (pts[i], pts[j]) {
                    (PointForm::PF, PointForm::PF) => return false,
                    (PointForm::Nat(a), PointForm::Nat(b)) => {
                        let d = a.derive(Expr::sub_raw(a.body().clone(), b.body().clone()));
                        let sep = d.ok().and_then(|d| expand(&d)).and_then(|e| e.eventual_sign());
                        if !matches!(sep, Some(1) | Some(-1)) {
                            return false;
                        }
                    }
                    _ => {}
                }
            }
        }
        true
    }
}

impl std::fmt::Display for Descriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("(measure-seq")?;
        for (p, w) in &self.atoms {
            match p {
                PointForm::PF => write!(f, " (atom PF {w})")?,
                PointForm::Nat(x) => write!(f, " (atom {x} {w})")?,
            }
        }
        f.write_str(")")
    }
}

/// A measure sequence given by an explicit prefix, a descriptor, or both.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasureSeq {
    prefix: Vec<FinMeasure>,
    descriptor: Option<Descriptor>,
}

impl MeasureSeq {
    pub fn explicit(prefix: Vec<FinMeasure>) -> MeasureSeq {
        MeasureSeq { prefix, descriptor: None }
    }

    pub fn from_descriptor(d: Descriptor) -> MeasureSeq {
        MeasureSeq { prefix: vec![], descriptor: Some(d) }
    }

    pub fn parse_descriptor(src: &str) -> Result<MeasureSeq> {
        Ok(MeasureSeq::from_descriptor(Descriptor::parse(src)?))
    }

    pub fn descriptor(&self) -> Option<&Descriptor> {
        self.descriptor.as_ref()
    }

    /// Elements `0..horizon` (fewer when only a shorter explicit prefix exists).
    pub fn prefix(&self, horizon: u64) -> Result<Vec<FinMeasure>> {
        let mut out: Vec<FinMeasure> = self.prefix.iter().take(horizon as usize).cloned().collect();
        if let Some(d) = &self.descriptor {
            for n in out.len() as u64..horizon {
                out.push(d.at(n)?);
            }
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SeqRepr {
    Array(Vec<FinMeasure>),
    Object {
        #[serde(default)]
        measures: Vec<FinMeasure>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        descriptor: Option<String>,
    },
}

impl Serialize for MeasureSeq {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SeqRepr::Object {
            measures: self.prefix.clone(),
            descriptor: self.descriptor.as_ref().map(|d| d.to_string()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MeasureSeq {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(match SeqRepr::deserialize(d)? {
            SeqRepr::Array(prefix) => MeasureSeq::explicit(prefix),
            SeqRepr::Object { measures, descriptor } => MeasureSeq {
                prefix: measures,
                descriptor: descriptor.map(|s| Descriptor::parse(&s)).transpose().map_err(de::Error::custom)?,
            },
        })
    }
}

/// The dual filter of an ideal, probed through sampled members `X`; the
/// filter sets tested are `A = ω ∖ X`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterContext {
    pub ideal: IdealSpec,
    pub samples: Vec<SetSpec>,
    pub certificates: Vec<MembershipVerdict>,
}

impl FilterContext {
    /// Certifies each sample as a member of the ideal; uncertified samples are an error.
    pub fn new(ideal: IdealSpec, samples: Vec<SetSpec>, horizon: u64, tolerance: &Q) -> Result<FilterContext> {
        let mut certificates = Vec::new();
        for (i, s) in samples.iter().enumerate() {
            let v = membership(&ideal, s, horizon, tolerance)?;
            if !v.is_in() {
                return Err(Error::Precondition(format!("sample {i} is not certified to lie in the ideal")));
            }
            certificates.push(v);
        }
        Ok(FilterContext { ideal, samples, certificates })
    }

    /// Default samples: initial segments, plus one point per block for
    /// block-structured ideals when that set is certified.
    pub fn with_defaults(ideal: IdealSpec, mut extra: Vec<SetSpec>, horizon: u64, tolerance: &Q) -> Result<FilterContext> {
        let mut samples = vec![
            SetSpec::finite(vec![0]),
            SetSpec::intervals(vec![(0, 4)]),
            SetSpec::intervals(vec![(0, 16)]),
        ];
        if let Some(g) = ideal.generator() {
            let s = SetSpec::block_select(g, SeqFn::parse("1").expect("constant"), SelectMode::First);
            if membership(&ideal, &s, horizon, tolerance)?.is_in() {
                samples.push(s);
            }
        }
        samples.append(&mut extra);
        FilterContext::new(ideal, samples, horizon, tolerance)
    }

    /// Fréchet filter: the dual of Fin.
    pub fn frechet(horizon: u64, tolerance: &Q) -> Result<FilterContext> {
        FilterContext::with_defaults(IdealSpec::Fin, vec![], horizon, tolerance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Condition {
    /// Proved by the closed-form rule table.
    Certified { rule: String },
    PassAtHorizon { horizon: u64 },
    Fail {
        index: u64,
        #[serde(with = "crate::rational::canon")]
        value: Q,
        reason: String,
    },
    Inconclusive { reason: String },
}

impl Condition {
    pub fn is_fail(&self) -> bool {
        matches!(self, Condition::Fail { .. })
    }

    pub fn is_pass(&self) -> bool {
        matches!(self, Condition::Certified { .. } | Condition::PassAtHorizon { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ANReport {
    pub horizon: u64,
    #[serde(with = "crate::rational::canon_vec")]
    pub norms: Vec<Q>,
    #[serde(with = "crate::rational::canon_vec")]
    pub masses: Vec<Q>,
    /// `‖μ_n↾X‖` per sample `X = ω ∖ A`.
    pub variations: Vec<VariationTrace>,
    pub norms_unbounded: Condition,
    pub mass_vanishes: Condition,
    pub tails_vanish: Vec<Condition>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationTrace {
    pub sample: usize,
    #[serde(with = "crate::rational::canon_vec")]
    pub values: Vec<Q>,
}

impl ANReport {
    pub fn any_fail(&self) -> bool {
        self.norms_unbounded.is_fail() || self.mass_vanishes.is_fail() || self.tails_vanish.iter().any(|c| c.is_fail())
    }

    pub fn all_pass(&self) -> bool {
        self.norms_unbounded.is_pass() && self.mass_vanishes.is_pass() && self.tails_vanish.iter().all(|c| c.is_pass())
    }
}

fn trend_to_infinity(trace: &[Q], horizon: u64) -> Condition {
    let half = &trace[trace.len() / 2..];
    let grows = half.windows(2).all(|w| w[0] <= w[1]);
    match (trace.first(), trace.last()) {
        (Some(a), Some(b)) if grows && b > a => Condition::PassAtHorizon { horizon },
        _ => Condition::Inconclusive { reason: "norm trace shows no growth".into() },
    }
}

fn trend_to_zero(trace: &[Q], horizon: u64) -> Condition {
    let abs: Vec<Q> = trace.iter().map(|v| v.abs()).collect();
    let quarter = &abs[abs.len() - abs.len().div_ceil(4).min(abs.len())..];
    if !quarter.is_empty() && quarter.iter().all(|v| v.is_zero()) {
        return Condition::PassAtHorizon { horizon };
    }
    let half = &abs[abs.len() / 2..];
    if half.len() >= 2 && half.windows(2).all(|w| w[0] >= w[1]) && half.last() < half.first() {
        return Condition::PassAtHorizon { horizon };
    }
    Condition::Inconclusive { reason: "trace does not decrease towards 0".into() }
}

fn last_index(trace: &[Q]) -> (u64, Q) {
    let i = trace.len().saturating_sub(1);
    (i as u64, trace.get(i).cloned().unwrap_or_default())
}

/// Conditions (1)–(3) of the AN characterization on `0..horizon`.
pub fn verify_an(seq: &MeasureSeq, ctx: &FilterContext, horizon: u64) -> Result<ANReport> {
    if horizon == 0 {
        return Err(Error::Validation("horizon must be ≥ 1".into()));
    }
    let prefix = seq.prefix(horizon)?;
    let norms: Vec<Q> = prefix.iter().map(|m| m.norm()).collect();
    let masses: Vec<Q> = prefix.iter().map(|m| m.total()).collect();
    let mut variations = Vec::new();
    for (i, x) in ctx.samples.iter().enumerate() {
        let x = x.clone().with_pf(false);
        let values = prefix.iter().map(|m| m.variation(&x)).collect::<Result<Vec<_>>>()?;
        variations.push(VariationTrace { sample: i, values });
    }
    let desc = seq.descriptor().filter(|d| d.points_separate() && seq.prefix.is_empty());

    let norms_unbounded = match desc.and_then(|d| d.abs_sum(|_| true)).and_then(|e| e.limit()) {
        Some(Limit::PosInfinity) => Condition::Certified { rule: "closed-form norm tends to infinity".into() },
        Some(_) => {
            let (index, value) = last_index(&norms);
            Condition::Fail { index, value, reason: "closed-form norm stays bounded".into() }
        }
        None => trend_to_infinity(&norms, horizon),
    };
    let mass_vanishes = match desc.and_then(|d| d.total()).and_then(|e| e.limit()) {
        Some(Limit::Zero) => Condition::Certified { rule: "closed-form total mass tends to 0".into() },
        Some(_) => {
            let (index, value) = last_index(&masses);
            Condition::Fail { index, value, reason: "closed-form total mass does not vanish".into() }
        }
        None => trend_to_zero(&masses, horizon),
    };
    let mut tails_vanish = Vec::new();
    for (x, tr) in ctx.samples.iter().zip(&variations) {
        tails_vanish.push(tail_condition(desc, x, &tr.values, horizon));
    }
    Ok(ANReport { horizon, norms, masses, variations, norms_unbounded, mass_vanishes, tails_vanish })
}

fn tail_condition(desc: Option<&Descriptor>, x: &SetSpec, trace: &[Q], horizon: u64) -> Condition {
    let closed = desc.filter(|_| x.is_finite_form()).and_then(|d| {
        // every moving point must leave the finite set for good
        for (p, _) in d.atoms() {
            if let PointForm::Nat(f) = p {
                if f.body().mentions_n() && expand(f)?.limit()? != Limit::PosInfinity {
                    return None;
                }
            }
        }
        let inside = |p: &PointForm| match p {
            PointForm::Nat(f) if !f.body().mentions_n() => {
                f.eval_u(0).ok().and_then(|v| as_u64(&v)).is_some_and(|c| x.contains(c).unwrap_or(false))
            }
            _ => false,
        };
        d.abs_sum(inside)?.limit()
    });
    match closed {
        Some(Limit::Zero) => Condition::Certified { rule: "moving atoms leave the finite set".into() },
        Some(_) => {
            let (index, value) = last_index(trace);
            Condition::Fail { index, value, reason: "closed-form variation does not vanish".into() }
        }
        None => trend_to_zero(trace, horizon),
    }
}

/// `ν_n = μ_n(ω)·δ_PF − μ_n`.
pub fn positive_to_an(seq: &MeasureSeq, horizon: u64) -> Result<MeasureSeq> {
    let mut prefix = Vec::new();
    for m in seq.prefix(horizon)? {
        if m.charges_pf() {
            return Err(Error::HasPFAtom);
        }
        let m = NonNegMeasure::new(m)?.into_inner();
        prefix.push(crate::measure::combine(&Q::zero(), &FinMeasure::empty(), &-Q::from_integer(1.into()), &m).add_pf(m.total()));
    }
    let descriptor = match seq.descriptor() {
        Some(d) if seq.prefix.is_empty() => {
            if d.atoms().iter().any(|(p, _)| *p == PointForm::PF) {
                return Err(Error::HasPFAtom);
            }
            let total = Expr::Add(d.atoms().iter().map(|(_, w)| w.body().clone()).collect());
            let mut atoms = vec![(PointForm::PF, SeqFn::plain(total))];
            for (p, w) in d.atoms() {
                atoms.push((p.clone(), w.derive(Expr::Neg(Box::new(w.body().clone())))?));
            }
            Some(Descriptor { atoms })
        }
        _ => None,
    };
    Ok(match descriptor {
        Some(d) => MeasureSeq::from_descriptor(d),
        None => MeasureSeq::explicit(prefix),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Normalized {
    pub measures: Vec<FinMeasure>,
    /// Original index of each output element.
    pub kept: Vec<u64>,
}

/// `λ_n = μ_n / ‖μ_n‖`, dropping zero elements.
pub fn bjn_normalize(seq: &MeasureSeq, horizon: u64) -> Result<Normalized> {
    let mut measures = Vec::new();
    let mut kept = Vec::new();
    for (i, m) in seq.prefix(horizon)?.into_iter().enumerate() {
        if m.is_empty() {
            continue;
        }
        measures.push(m.scale(&m.norm().recip()));
        kept.push(i as u64);
    }
    if measures.is_empty() {
        return Err(Error::AllZeroPrefix);
    }
    Ok(Normalized { measures, kept })
}

/// Blocks of an explicit generator built from measures with increasing supports.
pub fn explicit_generator(blocks: Vec<NonNegMeasure>) -> BlockGenerator {
    BlockGenerator::Explicit { first: 0, blocks: blocks.into_iter().map(NonNegMeasure::into_inner).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn tol() -> Q {
        q(1, 1_000_000)
    }

    #[test]
    fn descriptor_round_trip() {
        let s = "(measure-seq (atom PF n) (atom n (neg n)))";
        let d = Descriptor::parse(s).unwrap();
        assert_eq!(d.to_string(), s);
        let m = d.at(3).unwrap();
        assert_eq!(m.weight(Point::PF), q(3, 1));
        assert_eq!(m.weight(Point::Nat(3)), q(-3, 1));
        assert!(d.at(0).unwrap().is_empty());
    }

    #[test]
    fn frechet_examples() {
        let ctx = FilterContext::frechet(16, &tol()).unwrap();
        let nu = MeasureSeq::parse_descriptor("(measure-seq (atom PF n) (atom n (neg n)))").unwrap();
        let r = verify_an(&nu, &ctx, 32).unwrap();
        assert!(r.all_pass(), "{r:?}");
        assert_eq!(r.norms[5], q(10, 1));
        assert!(r.masses.iter().all(|m| m.is_zero()));

        let dirac = MeasureSeq::parse_descriptor("(measure-seq (atom n 1))").unwrap();
        assert!(verify_an(&dirac, &ctx, 16).unwrap().norms_unbounded.is_fail());

        let stuck = MeasureSeq::parse_descriptor("(measure-seq (atom 0 n))").unwrap();
        let r = verify_an(&stuck, &ctx, 16).unwrap();
        assert!(r.tails_vanish[0].is_fail());
    }

    #[test]
    fn positive_translation() {
        let mu = MeasureSeq::parse_descriptor("(measure-seq (atom n n))").unwrap();
        let nu = positive_to_an(&mu, 8).unwrap();
        for (n, m) in nu.prefix(8).unwrap().iter().enumerate() {
            assert!(m.total().is_zero());
            assert_eq!(m.norm(), q(2 * n as i64, 1));
        }
        let half = MeasureSeq::explicit(vec![FinMeasure::from_atoms([(Point::Nat(0), q(1, 2)), (Point::Nat(1), q(1, 2))])]);
        let v = positive_to_an(&half, 1).unwrap().prefix(1).unwrap();
        assert_eq!(v[0].weight(Point::PF), q(1, 1));
        assert_eq!(v[0].norm(), q(2, 1));
    }

    #[test]
    fn normalization() {
        let nu = MeasureSeq::parse_descriptor("(measure-seq (atom PF n) (atom n (neg n)))").unwrap();
        let out = bjn_normalize(&nu, 6).unwrap();
        assert_eq!(out.kept, vec![1, 2, 3, 4, 5]);
        assert!(out.measures.iter().all(|m| m.norm() == q(1, 1)));
        assert_eq!(out.measures[2].weight(Point::PF), q(1, 2));
        let zero = MeasureSeq::explicit(vec![FinMeasure::empty()]);
        assert_eq!(bjn_normalize(&zero, 1), Err(Error::AllZeroPrefix));
    }
}
