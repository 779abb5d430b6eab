//! Deciding membership in AN for density and summable ideals.

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::asymptotic::{direction, expand, Direction, Limit};
use crate::blocks::BlockGenerator;
use crate::error::{Error, Result};
use crate::expr::{Expr, Program, SeqFn};
use crate::rational::{qi, Q};
use crate::submeasure::{unboundedness_check, SubmeasureSpec, Unboundedness};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    InAN,
    NotInAN,
    Undetermined,
}

/// Reason codes; part of the serialized contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Reason {
    UnboundedNorms,
    AtomsDoNotVanish,
    BothConditionsHold,
    SummableAlwaysAN,
    UnboundedSubmeasure,
}

/// A closed form for a block statistic and what the rule table says of it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormLimit {
    pub form: String,
    pub expansion: Option<String>,
    /// `"0"`, `"p/q"`, `"+inf"` or `null` when outside the rule table.
    pub limit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub n: u64,
    #[serde(with = "crate::rational::canon")]
    pub norm: Q,
    #[serde(with = "crate::rational::canon")]
    pub at_plus: Q,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub reason: Option<Reason>,
    pub norms: Option<FormLimit>,
    pub atoms: Option<FormLimit>,
    pub trace: Vec<TraceRow>,
    /// Statements equivalent to the verdict for density ideals; not computed.
    pub implied: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evidence: Option<Unboundedness>,
}

fn limit_label(l: &Limit) -> String {
    match l {
        Limit::Zero => "0".into(),
        Limit::Finite(c) => crate::rational::to_canonical(c),
        Limit::PosInfinity => "+inf".into(),
        Limit::NegInfinity => "-inf".into(),
    }
}

fn analyse(f: &SeqFn) -> (FormLimit, Option<Limit>) {
    let exp = expand(f);
    let limit = exp.as_ref().and_then(|e| e.limit());
    let out = FormLimit {
        form: f.to_string(),
        expansion: exp.map(|e| e.describe()),
        limit: limit.as_ref().map(limit_label),
    };
    (out, limit)
}

fn product(a: &SeqFn, b: &SeqFn) -> Option<SeqFn> {
    let p = Program::merge(a.program(), b.program()).ok()?;
    SeqFn::new(Expr::mul(a.body().clone(), b.body().clone()), p).ok()
}

/// Closed forms of `‖μ_n‖` and `at⁺(μ_n)`.
fn forms(g: &BlockGenerator) -> Option<(SeqFn, SeqFn)> {
    match g {
        BlockGenerator::Phi { f } => Some((SeqFn::plain(Expr::N), f.derive(Expr::div(Expr::int(1), f.body().clone())).ok()?)),
        BlockGenerator::AsymptoticDensity => {
            Some((SeqFn::plain(Expr::int(1)), SeqFn::plain(Expr::div(Expr::int(1), Expr::exp2(Expr::N)))))
        }
        BlockGenerator::Rule { length, weight, .. } if !weight.body().mentions_i() => {
            Some((product(length, weight)?, weight.clone()))
        }
        _ => None,
    }
}

const IN_AN: &[&str] = &[
    "not isomorphic to an Erdős–Ulam ideal",
    "lacks the Bolzano–Weierstrass property",
    "P(ω)/I has no countable splitting family",
    "not totally bounded",
    "not Katětov equivalent to Z",
    "the dual filter lacks the Nikodym property",
];

const NOT_IN_AN: &[&str] = &[
    "isomorphic to an Erdős–Ulam ideal",
    "has the Bolzano–Weierstrass property",
    "P(ω)/I has a countable splitting family",
    "totally bounded",
    "Katětov equivalent to Z",
    "the dual filter has the Nikodym property",
];

fn trace(g: &BlockGenerator, horizon: u64) -> Vec<TraceRow> {
    let mut out = Vec::new();
    let mut n = g.first();
    while n <= horizon && g.has_block(n) {
        let (Ok(norm), Ok((at_plus, _))) = (g.norm(n), g.atoms_range(n)) else { break };
        out.push(TraceRow { n, norm, at_plus });
        n += 1;
    }
    out
}

/// Classifies the density ideal of `gen` by the norm and atom conditions.
pub fn classify_density(gen: &BlockGenerator, horizon: u64) -> Result<Classification> {
    let trace = trace(gen, horizon);
    let Some((norm_f, atom_f)) = forms(gen) else {
        return Ok(Classification {
            verdict: Verdict::Undetermined,
            reason: None,
            norms: None,
            atoms: None,
            trace,
            implied: vec![],
            evidence: None,
        });
    };
    // forms must agree with the materialized blocks
    for row in &trace {
        if norm_f.eval_u(row.n)? != row.norm || atom_f.eval_u(row.n)? != row.at_plus {
            return Err(Error::Validation(format!("closed forms disagree with block {}", row.n)));
        }
    }
    let (norms, nl) = analyse(&norm_f);
    let (atoms, al) = analyse(&atom_f);
    let unbounded = nl == Some(Limit::PosInfinity);
    let bounded = matches!(nl, Some(Limit::Zero | Limit::Finite(_)));
    let vanish = al == Some(Limit::Zero);
    let persist = matches!(al, Some(Limit::PosInfinity)) || matches!(&al, Some(Limit::Finite(c)) if c.is_positive());
    let (verdict, reason) = if unbounded {
        (Verdict::InAN, Some(Reason::UnboundedNorms))
    } else if bounded && persist {
        (Verdict::InAN, Some(Reason::AtomsDoNotVanish))
    } else if bounded && vanish {
        (Verdict::NotInAN, Some(Reason::BothConditionsHold))
    } else {
        (Verdict::Undetermined, None)
    };
    let implied = match verdict {
        Verdict::InAN => IN_AN,
        Verdict::NotInAN => NOT_IN_AN,
        Verdict::Undetermined => &[],
    };
    Ok(Classification {
        verdict,
        reason,
        norms: Some(norms),
        atoms: Some(atoms),
        trace,
        implied: implied.iter().map(|s| s.to_string()).collect(),
        evidence: None,
    })
}

/// Classifies the summable ideal of `f`, which must diverge certifiably.
pub fn classify_summable(f: &SeqFn, horizon: u64) -> Result<Classification> {
    for n in 0..=horizon {
        if f.eval_u(n)?.is_negative() {
            return Err(Error::NotAnIdeal(format!("f({n}) < 0")));
        }
    }
    let exp = expand(f).ok_or_else(|| Error::NotAnIdeal("divergence of Σ f(n) is not certified".into()))?;
    if exp.eventual_sign().is_none_or(|s| s < 0) {
        return Err(Error::NotAnIdeal("f is not eventually non-negative".into()));
    }
    match exp.series_converges() {
        Some(false) => {}
        Some(true) => return Err(Error::NotAnIdeal(format!("Σ f(n) converges ({})", exp.describe()))),
        None => return Err(Error::NotAnIdeal("divergence of Σ f(n) is not certified".into())),
    }
    let evidence = unboundedness_check(&SubmeasureSpec::summable(f.clone()), &qi(2), horizon)?;
    Ok(Classification {
        verdict: Verdict::InAN,
        reason: Some(Reason::SummableAlwaysAN),
        norms: None,
        atoms: Some(FormLimit { form: f.to_string(), expansion: Some(exp.describe()), limit: None }),
        trace: vec![],
        implied: vec!["not totally bounded".into(), "the dual filter lacks the Nikodym property".into()],
        evidence: Some(evidence),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Check {
    Certified { rule: String },
    CheckedToHorizon { horizon: u64, inconclusive: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRow {
    pub n: u64,
    pub start: String,
    pub end: String,
    pub value: String,
}

/// `Φ(f) = Z_g` with `g` constant `f(n)` on the support of block `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimpleDensity {
    pub monotone: Check,
    pub ratio: Check,
    pub g: String,
    pub steps: Vec<StepRow>,
}

/// Checks `f` non-decreasing with `f(n) / Σ_{i<n} f(i) → ∞`.
pub fn simple_density_check(f: &SeqFn, horizon: u64) -> Result<SimpleDensity> {
    let vals: Vec<Q> = (0..=horizon).map(|n| f.eval_u(n)).collect::<Result<_>>()?;
    if let Some(n) = (1..vals.len()).find(|&n| vals[n] < vals[n - 1]) {
        return Err(Error::ConditionFails(n as u64));
    }
    let monotone = match direction(f.body(), f.program()) {
        Some(Direction::NonDecreasing | Direction::Constant) => Check::Certified { rule: "syntactic monotonicity".into() },
        _ => Check::CheckedToHorizon { horizon, inconclusive: false },
    };
    // ratios where the prefix sum is positive
    let mut sum = Q::zero();
    let mut ratios: Vec<(u64, Q)> = Vec::new();
    for (n, v) in vals.iter().enumerate() {
        if sum.is_positive() {
            ratios.push((n as u64, v / &sum));
        }
        sum += v;
    }
    let first_drop = ratios.windows(2).find(|w| w[1].1 <= w[0].1).map(|w| w[1].0);
    let r = f
        .as_def("f")
        .and_then(|p| SeqFn::new(Expr::div(Expr::call("f", Expr::N), Expr::psum("f", Expr::N)), p))?;
    let limit = expand(&r).and_then(|e| e.limit().map(|l| (e, l)));
    let ratio = match limit {
        Some((e, Limit::PosInfinity)) => Check::Certified { rule: format!("ratio ~ {}", e.describe()) },
        Some(_) => return Err(Error::ConditionFails(first_drop.unwrap_or(horizon))),
        None => Check::CheckedToHorizon { horizon, inconclusive: true },
    };
    if let (Check::CheckedToHorizon { .. }, Some(n)) = (&ratio, first_drop) {
        return Err(Error::ConditionFails(n));
    }
    let gen = BlockGenerator::phi(f.clone());
    let steps = gen
        .blocks(1, horizon.min(16))?
        .into_iter()
        .map(|b| {
            Ok(StepRow { n: b.n, start: b.start.to_string(), end: b.end().to_string(), value: f.eval_int(b.n)?.to_string() })
        })
        .collect::<Result<_>>()?;
    Ok(SimpleDensity {
        monotone,
        ratio,
        g: format!("g(k) = f(n) for k in block n of Φ(f), f = {f}"),
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi(src: &str) -> BlockGenerator {
        BlockGenerator::phi(SeqFn::parse(src).unwrap())
    }

    #[test]
    fn density_verdicts() {
        let z = classify_density(&BlockGenerator::AsymptoticDensity, 8).unwrap();
        assert_eq!((z.verdict, z.reason), (Verdict::NotInAN, Some(Reason::BothConditionsHold)));
        for f in ["1", "n", "(mul 2 (pow n 2))", "(exp2 (pow n 2))"] {
            let c = classify_density(&phi(f), 8).unwrap();
            assert_eq!((c.verdict, c.reason), (Verdict::InAN, Some(Reason::UnboundedNorms)), "{f}");
        }
        let delta = BlockGenerator::Rule {
            start: Some(SeqFn::parse("n").unwrap()),
            length: SeqFn::parse("1").unwrap(),
            weight: SeqFn::parse("1").unwrap(),
            first: 0,
        };
        let c = classify_density(&delta, 8).unwrap();
        assert_eq!((c.verdict, c.reason), (Verdict::InAN, Some(Reason::AtomsDoNotVanish)));
    }

    #[test]
    fn summable_verdicts() {
        let h = classify_summable(&SeqFn::parse("(div 1 (add n 1))").unwrap(), 64).unwrap();
        assert_eq!(h.evidence, Some(Unboundedness::Found { end: 3, value: Q::new(25.into(), 12.into()) }));
        let c = classify_summable(&SeqFn::parse("1").unwrap(), 64).unwrap();
        assert_eq!(c.evidence, Some(Unboundedness::Found { end: 2, value: qi(3) }));
        assert!(matches!(
            classify_summable(&SeqFn::parse("(div 1 (exp2 n))").unwrap(), 64),
            Err(Error::NotAnIdeal(_))
        ));
    }

    #[test]
    fn simple_density() {
        let ok = simple_density_check(&SeqFn::parse("(exp2 (pow n 2))").unwrap(), 16).unwrap();
        assert!(matches!(ok.ratio, Check::Certified { .. }));
        assert_eq!(ok.steps[1].value, "16");
        assert_eq!(simple_density_check(&SeqFn::parse("n").unwrap(), 16), Err(Error::ConditionFails(3)));
        assert_eq!(simple_density_check(&SeqFn::parse("1").unwrap(), 16), Err(Error::ConditionFails(2)));
    }
}
