//! Disjointification of AN-sequences and the translations to positive
//! measures and density submeasures.

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::blocks::BlockGenerator;
use crate::error::{Error, Result};
use crate::ideal::{membership, IdealSpec, MembershipVerdict};
use crate::measure::{combine, FinMeasure, NonNegMeasure, Point};
use crate::rational::Q;
use crate::sequences::{verify_an, ANReport, FilterContext, MeasureSeq};
use crate::submeasure::SubmeasureSpec;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Step1Pick {
    pub k: usize,
    pub index: u64,
    /// `A_k = [0, a_end]`; `None` for the empty set.
    pub a_end: Option<u64>,
    #[serde(with = "crate::rational::canon")]
    pub variation_on_a: Q,
    #[serde(with = "crate::rational::canon")]
    pub norm_mu: Q,
    #[serde(with = "crate::rational::canon")]
    pub norm_theta: Q,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum Step2 {
    /// PF masses bounded by `bound` on a subsequence; outputs are pairwise differences.
    Bounded {
        #[serde(with = "crate::rational::canon")]
        bound: Q,
        picks: Vec<usize>,
    },
    /// PF masses strictly increasing in absolute value along `picks`.
    Unbounded {
        picks: Vec<usize>,
        #[serde(with = "crate::rational::canon_vec")]
        alphas: Vec<Q>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisjointLog {
    pub horizon: u64,
    pub precondition: ANReport,
    pub step1: Vec<Step1Pick>,
    /// `θ_k(PF)` for every Step-1 output.
    #[serde(with = "crate::rational::canon_vec")]
    pub pf_values: Vec<Q>,
    pub decision: String,
    pub step2: Step2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Disjointified {
    pub measures: Vec<FinMeasure>,
    pub log: DisjointLog,
}

fn nat_max(m: &FinMeasure) -> Option<u64> {
    m.max_nat()
}

fn step1(prefix: &[FinMeasure]) -> Result<(Vec<FinMeasure>, Vec<Step1Pick>)> {
    let mut thetas = Vec::new();
    let mut picks = Vec::new();
    let Some(first) = prefix.first() else {
        return Ok((thetas, picks));
    };
    thetas.push(first.clone());
    picks.push(Step1Pick {
        k: 0,
        index: 0,
        a_end: None,
        variation_on_a: Q::zero(),
        norm_mu: first.norm(),
        norm_theta: first.norm(),
    });
    let mut a_end = nat_max(first);
    let mut last = 0usize;
    loop {
        let k = thetas.len();
        let bound = Q::new(1.into(), (k as i64).into());
        let inside = |p: Point, e: Option<u64>| matches!((p, e), (Point::Nat(x), Some(e)) if x <= e);
        let found = (last + 1..prefix.len()).find(|&i| prefix[i].variation_where(|p| inside(p, a_end)) < bound);
        let Some(i) = found else {
            if last + 1 < prefix.len() && thetas.len() < 2 {
                return Err(Error::HorizonExhausted { k });
            }
            break;
        };
        let mu = &prefix[i];
        let var = mu.variation_where(|p| inside(p, a_end));
        let theta = mu.restrict_where(|p| !inside(p, a_end));
        picks.push(Step1Pick {
            k,
            index: i as u64,
            a_end,
            variation_on_a: var,
            norm_mu: mu.norm(),
            norm_theta: theta.norm(),
        });
        a_end = match (a_end, nat_max(mu)) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        thetas.push(theta);
        last = i;
    }
    Ok((thetas, picks))
}

/// Bisects the value range, keeping the half with more later candidates.
fn cauchy_subsequence(p: &[Q], cands: Vec<usize>, bound: &Q) -> Vec<usize> {
    let (mut lo, mut hi) = (-bound.clone(), bound.clone());
    let mut picks: Vec<usize> = Vec::new();
    let mut rest = cands;
    while let Some(&i) = rest.first() {
        picks.push(i);
        rest.retain(|&j| j > i);
        let mid = (&lo + &hi) / Q::from_integer(2.into());
        let lower = rest.iter().filter(|&&j| p[j] <= mid).count();
        if lower >= rest.len() - lower {
            rest.retain(|&j| p[j] <= mid);
            hi = mid;
        } else {
            rest.retain(|&j| p[j] > mid);
            lo = mid;
        }
    }
    picks
}

/// Turns an AN-sequence into a disjointly supported one on `ω` with the
/// same filter behaviour.
pub fn disjointify(seq: &MeasureSeq, ctx: &FilterContext, horizon: u64) -> Result<Disjointified> {
    let report = verify_an(seq, ctx, horizon)?;
    if report.any_fail() {
        return Err(Error::Precondition("input fails an AN condition at the horizon".into()));
    }
    let prefix = seq.prefix(horizon)?;
    let (thetas, step1) = step1(&prefix)?;
    let p: Vec<Q> = thetas.iter().map(|t| t.weight(Point::PF)).collect();

    let half = p.len() / 2;
    let m = p[..half].iter().map(|v| v.abs()).max().unwrap_or_default();
    let limit = &m + Q::one();
    let late = &p[half..];
    let bounded_late = late.iter().filter(|v| v.abs() <= limit).count();
    let bounded = late.is_empty() || 2 * bounded_late >= late.len();
    let decision = format!(
        "max |θ(PF)| on first {half} of {} is {m}; {bounded_late} of {} later values within {limit}",
        p.len(),
        late.len(),
    );

    let mut measures = Vec::new();
    let step2 = if bounded {
        let cands = (0..p.len()).filter(|&i| p[i].abs() <= limit).collect();
        let picks = cauchy_subsequence(&p, cands, &limit);
        for pair in picks.chunks_exact(2) {
            let d = combine(&Q::one(), &thetas[pair[0]], &-Q::one(), &thetas[pair[1]]);
            measures.push(d.restrict_omega());
        }
        Step2::Bounded { bound: limit, picks }
    } else {
        let mut picks: Vec<usize> = Vec::new();
        for (i, v) in p.iter().enumerate() {
            let grows = match picks.last() {
                None => !v.is_zero(),
                Some(&j) => v.abs() > p[j].abs(),
            };
            if grows {
                picks.push(i);
            }
        }
        let mut alphas = Vec::new();
        for pair in picks.chunks_exact(2) {
            let alpha = &p[pair[0]] / &p[pair[1]];
            if alpha.abs() >= Q::one() {
                return Err(Error::Validation(format!("|α| = {} is not below 1", alpha.abs())));
            }
            let d = combine(&Q::one(), &thetas[pair[0]], &-alpha.clone(), &thetas[pair[1]]);
            measures.push(d.restrict_omega());
            alphas.push(alpha);
        }
        Step2::Unbounded { picks, alphas }
    };
    if p.len() == 1 {
        measures = vec![thetas[0].restrict_omega()];
    }
    Ok(Disjointified {
        measures,
        log: DisjointLog { horizon, precondition: report, step1, pf_values: p, decision, step2 },
    })
}

/// Whether the supports of `ms` are pairwise disjoint.
pub fn pairwise_disjoint(ms: &[FinMeasure]) -> bool {
    ms.iter().enumerate().all(|(i, a)| ms[i + 1..].iter().all(|b| a.disjoint_from(b)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Positive {
    pub measures: Vec<NonNegMeasure>,
    pub log: DisjointLog,
}

/// `μ_n = |θ_n|` after disjointification.
pub fn an_to_positive(seq: &MeasureSeq, ctx: &FilterContext, horizon: u64) -> Result<Positive> {
    let d = disjointify(seq, ctx, horizon)?;
    Ok(Positive { measures: d.measures.iter().map(|m| m.abs()).collect(), log: d.log })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InclusionProbe {
    pub sample: usize,
    pub verdict: MembershipVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityPackage {
    pub submeasure: SubmeasureSpec,
    /// Positions in the positive sequence used as blocks.
    pub kept: Vec<usize>,
    pub probes: Vec<InclusionProbe>,
    pub probe_pass: bool,
}

/// Packages the positive sequence as blocks of a density submeasure and
/// probes that every sampled ideal member is exhaustive for it.
pub fn an_to_density(seq: &MeasureSeq, ctx: &FilterContext, horizon: u64, tolerance: &Q) -> Result<DensityPackage> {
    let pos = an_to_positive(seq, ctx, horizon)?;
    let mut blocks: Vec<NonNegMeasure> = Vec::new();
    let mut kept = Vec::new();
    let mut top: Option<u64> = None;
    for (i, m) in pos.measures.iter().enumerate() {
        let (Some(lo), Some(hi)) = (m.inner().min_nat(), m.inner().max_nat()) else {
            continue;
        };
        if top.is_some_and(|t| lo <= t) {
            continue;
        }
        blocks.push(m.clone());
        kept.push(i);
        top = Some(hi);
    }
    let generator = BlockGenerator::Explicit {
        first: 0,
        blocks: blocks.into_iter().map(NonNegMeasure::into_inner).collect(),
    };
    let submeasure = SubmeasureSpec::density(generator);
    let ideal = IdealSpec::exh(submeasure.clone());
    let mut probes = Vec::new();
    for (i, x) in ctx.samples.iter().enumerate() {
        let verdict = membership(&ideal, x, horizon, tolerance)?;
        probes.push(InclusionProbe { sample: i, verdict });
    }
    let probe_pass = probes.iter().all(|p| p.verdict.is_in());
    Ok(DensityPackage { submeasure, kept, probes, probe_pass })
}
