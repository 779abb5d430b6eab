//! Moving a measure on a finite set `B` onto a measure on a finite set `A`
//! so that every subset of `A` is matched up to `ε`.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{NonNegMeasure, Point};
use crate::rational::{floor_to_int, Q};
use crate::sampling::{subset_family, Coverage};

/// Uniform blocks larger than this are only certified symbolically.
pub const SAMPLE_GROUND_LIMIT: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Part {
    pub target: u64,
    pub points: Vec<u64>,
    #[serde(with = "crate::rational::canon")]
    pub mass: Q,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transport {
    /// `(b, f(b))` for every point of `B`, ascending in `b`.
    pub map: Vec<(u64, u64)>,
    pub parts: Vec<Part>,
    /// `Y`, sent to `a0`.
    pub leftover: Vec<u64>,
    #[serde(with = "crate::rational::canon")]
    pub leftover_mass: Q,
    pub a0: u64,
}

fn nat_atoms(m: &NonNegMeasure, side: &str) -> Result<Vec<(u64, Q)>> {
    m.inner()
        .atoms()
        .map(|(p, w)| match p {
            Point::Nat(x) => Ok((*x, w.clone())),
            Point::PF => Err(Error::Validation(format!("{side} must live on ω"))),
        })
        .collect()
}

fn check_pre(lam: &NonNegMeasure, mu: &NonNegMeasure, eps: &Q) -> Result<Q> {
    if !eps.is_positive() {
        return Err(Error::Validation("ε must be positive".into()));
    }
    if lam.inner().is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let (lt, mt) = (lam.inner().total(), mu.inner().total());
    if lt != mt {
        return Err(Error::MassMismatch(lt, mt));
    }
    let limit = eps / Q::from_integer(BigInt::from(2 * lam.inner().len()));
    if let Ok((top, _)) = mu.atoms_range() {
        if top > limit {
            return Err(Error::AtomTooLarge { atom: top, limit });
        }
    }
    Ok(limit)
}

/// Greedy transport: targets and atoms in ascending order, each part filled
/// while it stays within `λ({a})`; the rest goes to the least target.
pub fn transport(lam: &NonNegMeasure, mu: &NonNegMeasure, eps: &Q) -> Result<Transport> {
    check_pre(lam, mu, eps)?;
    let targets = nat_atoms(lam, "λ")?;
    let atoms = nat_atoms(mu, "μ")?;
    let a0 = targets[0].0;
    let mut parts = Vec::with_capacity(targets.len());
    let mut map = Vec::with_capacity(atoms.len());
    let mut it = atoms.iter().peekable();
    for (a, cap) in &targets {
        let mut part = Part { target: *a, points: Vec::new(), mass: Q::zero() };
        while let Some((b, w)) = it.peek() {
            if &part.mass + w > *cap {
                break;
            }
            part.mass += w;
            part.points.push(*b);
            map.push((*b, *a));
            it.next();
        }
        parts.push(part);
    }
    let mut leftover = Vec::new();
    let mut leftover_mass = Q::zero();
    for (b, w) in it {
        leftover.push(*b);
        leftover_mass += w;
        map.push((*b, a0));
    }
    map.sort_unstable();
    Ok(Transport { map, parts, leftover, leftover_mass, a0 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportCheck {
    #[serde(with = "crate::rational::canon")]
    pub worst_error: Q,
    pub coverage: Coverage,
    pub subsets: usize,
    /// Part bounds `λ({a}) − ε/2|A| < μ(X_a) ≤ λ({a})` and `μ(Y) < ε/2`.
    pub parts_ok: bool,
    pub within: bool,
}

/// Checks `|λ(C) − μ(f⁻¹[C])| ≤ ε` over all subsets `C ⊆ A` (sampled when
/// `|A|` exceeds the exhaustive limit).
pub fn verify_transport(lam: &NonNegMeasure, mu: &NonNegMeasure, t: &Transport, eps: &Q, seed: u64) -> Result<TransportCheck> {
    let targets = nat_atoms(lam, "λ")?;
    let weights: std::collections::BTreeMap<u64, Q> = nat_atoms(mu, "μ")?.into_iter().collect();
    let mut pushed: Vec<Q> = vec![Q::zero(); targets.len()];
    for (b, a) in &t.map {
        let i = targets
            .binary_search_by(|(x, _)| x.cmp(a))
            .map_err(|_| Error::Validation(format!("{b} is sent outside A")))?;
        pushed[i] += &weights[b];
    }
    let diffs: Vec<Q> = targets.iter().zip(&pushed).map(|((_, l), p)| l - p).collect();
    let (worst_error, coverage, subsets) = worst_subset_error(&diffs, seed);
    let slack = eps / Q::from_integer(BigInt::from(2 * targets.len()));
    let exhausted = t.leftover.is_empty() && t.map.len() == weights.len();
    let parts_ok = t.parts.iter().zip(&targets).all(|(p, (_, l))| {
        p.mass <= *l && (p.mass > l - &slack || exhausted)
    }) && t.leftover_mass < eps / Q::from_integer(2.into());
    Ok(TransportCheck { within: worst_error <= *eps, worst_error, coverage, subsets, parts_ok })
}

/// Largest `|Σ_{i∈C} d_i|` over the subset family of `0..d.len()`.
pub fn worst_subset_error(d: &[Q], seed: u64) -> (Q, Coverage, usize) {
    if d.len() > crate::sampling::EXHAUSTIVE_LIMIT {
        // the positive and negative parts are the extremal subsets
        let pos: Q = d.iter().filter(|x| x.is_positive()).sum();
        let neg: Q = d.iter().filter(|x| x.is_negative()).sum();
        let (family, coverage) = subset_family(d.len(), seed);
        let mut worst = pos.clone().max(-neg);
        for c in &family {
            let s: Q = c.iter().map(|&i| &d[i]).sum();
            worst = worst.max(s.abs());
        }
        return (worst, coverage, family.len() + 2);
    }
    let (family, coverage) = subset_family(d.len(), seed);
    let worst = family
        .iter()
        .map(|c| c.iter().map(|&i| &d[i]).sum::<Q>().abs())
        .max()
        .unwrap_or_default();
    (worst, coverage, family.len())
}

/// Greedy transport between uniform measures, described without listing points:
/// `|A|` targets of weight `λ_w`, `|B|` atoms of weight `μ_w`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformTransport {
    #[serde(with = "crate::rational::big")]
    pub targets: BigInt,
    #[serde(with = "crate::rational::big")]
    pub atoms: BigInt,
    /// Atoms per part.
    #[serde(with = "crate::rational::big")]
    pub per_part: BigInt,
    /// Per-target deficit `λ_w − q·μ_w`.
    #[serde(with = "crate::rational::canon")]
    pub deficit: Q,
    #[serde(with = "crate::rational::canon")]
    pub leftover_mass: Q,
    /// `(|A| − 1)·deficit`, attained by the subsets avoiding `a0`.
    #[serde(with = "crate::rational::canon")]
    pub worst_error: Q,
}

impl UniformTransport {
    pub fn new(targets: BigInt, lam_w: &Q, atoms: BigInt, mu_w: &Q, eps: &Q) -> Result<UniformTransport> {
        if !eps.is_positive() || !targets.is_positive() {
            return Err(Error::Validation("ε and |A| must be positive".into()));
        }
        let (lt, mt) = (lam_w * Q::from_integer(targets.clone()), mu_w * Q::from_integer(atoms.clone()));
        if lt != mt {
            return Err(Error::MassMismatch(lt, mt));
        }
        let limit = eps / Q::from_integer(&targets * 2);
        if *mu_w > limit {
            return Err(Error::AtomTooLarge { atom: mu_w.clone(), limit });
        }
        let per_part = floor_to_int(&(lam_w / mu_w));
        let deficit = lam_w - mu_w * Q::from_integer(per_part.clone());
        let leftover_mass = &deficit * Q::from_integer(targets.clone());
        let worst_error = &deficit * Q::from_integer(&targets - BigInt::one());
        Ok(UniformTransport { targets, atoms, per_part, deficit, leftover_mass, worst_error })
    }

    /// Target offset of the atom at offset `i`.
    pub fn image(&self, i: &BigInt) -> BigInt {
        let part = i / &self.per_part;
        if part < self.targets {
            part
        } else {
            BigInt::zero()
        }
    }

    /// The same deficits, checked subset by subset.
    pub fn sampled_error(&self, seed: u64) -> Option<(Q, Coverage, usize)> {
        let n = self.targets.to_usize().filter(|&n| n <= SAMPLE_GROUND_LIMIT)?;
        let mut d = vec![self.deficit.clone(); n];
        d[0] = &self.deficit - &self.leftover_mass;
        Some(worst_subset_error(&d, seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::FinMeasure;
    use crate::rational::q;

    fn nn(atoms: &[(u64, Q)]) -> NonNegMeasure {
        NonNegMeasure::new(FinMeasure::from_atoms(atoms.iter().map(|(x, w)| (Point::Nat(*x), w.clone())))).unwrap()
    }

    fn uniform(from: u64, n: u64, w: Q) -> NonNegMeasure {
        NonNegMeasure::uniform(from..from + n, &w).unwrap()
    }

    #[test]
    fn single_target() {
        let lam = nn(&[(0, q(1, 1))]);
        let mu = uniform(10, 4, q(1, 4));
        let t = transport(&lam, &mu, &q(1, 2)).unwrap();
        assert!(t.map.iter().all(|(_, a)| *a == 0));
        assert_eq!(verify_transport(&lam, &mu, &t, &q(1, 2), 0).unwrap().worst_error, q(0, 1));
    }

    #[test]
    fn two_thirds_one_third() {
        let lam = nn(&[(0, q(2, 3)), (1, q(1, 3))]);
        let mu = uniform(10, 8, q(1, 8));
        let t = transport(&lam, &mu, &q(1, 2)).unwrap();
        assert_eq!(t.parts[0].points.len(), 5);
        assert_eq!(t.parts[1].points.len(), 2);
        assert_eq!(t.leftover, vec![17]);
        assert_eq!(t.leftover_mass, q(1, 8));
        let c = verify_transport(&lam, &mu, &t, &q(1, 2), 0).unwrap();
        assert_eq!(c.worst_error, q(1, 12));
        assert!(c.parts_ok && c.within);
    }

    #[test]
    fn preconditions() {
        let lam = nn(&[(0, q(1, 1))]);
        assert!(matches!(transport(&lam, &uniform(0, 2, q(1, 4)), &q(1, 2)), Err(Error::MassMismatch(..))));
        assert!(matches!(transport(&lam, &uniform(0, 2, q(1, 2)), &q(1, 2)), Err(Error::AtomTooLarge { .. })));
    }

    #[test]
    fn uniform_closed_form_matches_greedy() {
        let lam = uniform(0, 3, q(1, 3));
        let mu = uniform(100, 20, q(1, 20));
        let t = transport(&lam, &mu, &q(1, 1)).unwrap();
        let u = UniformTransport::new(3.into(), &q(1, 3), 20.into(), &q(1, 20), &q(1, 1)).unwrap();
        assert_eq!(u.per_part, BigInt::from(6));
        assert_eq!(u.leftover_mass, t.leftover_mass);
        for (b, a) in &t.map {
            assert_eq!(u.image(&BigInt::from(b - 100)), BigInt::from(*a));
        }
        let c = verify_transport(&lam, &mu, &t, &q(1, 1), 0).unwrap();
        assert_eq!(c.worst_error, u.worst_error);
        assert_eq!(u.sampled_error(0).unwrap().0, u.worst_error);
    }
}
