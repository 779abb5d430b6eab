//! Finitely supported signed measures on `ω ∪ {PF}` with exact weights.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::katetov::reduction::ReductionTable;
use crate::rational::{parse_q, to_canonical, Q};
use crate::setspec::SetSpec;

/// A point of `N_F`: a natural index or the distinguished limit point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Point {
    Nat(u64),
    PF,
}

impl Point {
    pub fn nat(self) -> Option<u64> {
        match self {
            Point::Nat(n) => Some(n),
            Point::PF => None,
        }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Nat(n) => write!(f, "{n}"),
            Point::PF => f.write_str("PF"),
        }
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Point::Nat(n) => s.serialize_u64(*n),
            Point::PF => s.serialize_str("PF"),
        }
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Number(n) => n
                .as_u64()
                .map(Point::Nat)
                .ok_or_else(|| de::Error::custom("point must be a non-negative integer")),
            serde_json::Value::String(s) if s == "PF" => Ok(Point::PF),
            other => Err(de::Error::custom(format!("invalid point {other}"))),
        }
    }
}

/// Finite signed combination of point masses. Zero weights are never stored,
/// so the key set is the support and structural equality is canonical.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FinMeasure {
    atoms: BTreeMap<Point, Q>,
}

impl FinMeasure {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn dirac(p: Point, w: Q) -> Self {
        Self::from_atoms([(p, w)])
    }

    /// Builds a measure, summing repeated points and dropping zeros.
    pub fn from_atoms<I: IntoIterator<Item = (Point, Q)>>(atoms: I) -> Self {
        let mut map: BTreeMap<Point, Q> = BTreeMap::new();
        for (p, w) in atoms {
            *map.entry(p).or_insert_with(Q::zero) += w;
        }
        map.retain(|_, w| !w.is_zero());
        FinMeasure { atoms: map }
    }

    /// Strict constructor used by deserialization: no zeros, no duplicates.
    pub fn try_from_atoms(atoms: Vec<(Point, Q)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (p, w) in atoms {
            if w.is_zero() {
                return Err(Error::Validation(format!("zero weight at point {p}")));
            }
            if map.insert(p, w).is_some() {
                return Err(Error::Validation(format!("duplicate point {p}")));
            }
        }
        Ok(FinMeasure { atoms: map })
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&Point, &Q)> {
        self.atoms.iter()
    }

    pub fn weight(&self, p: Point) -> Q {
        self.atoms.get(&p).cloned().unwrap_or_else(Q::zero)
    }

    pub fn support(&self) -> impl Iterator<Item = Point> + '_ {
        self.atoms.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn charges_pf(&self) -> bool {
        self.atoms.contains_key(&Point::PF)
    }

    pub fn max_nat(&self) -> Option<u64> {
        self.atoms.keys().rev().find_map(|p| p.nat())
    }

    pub fn min_nat(&self) -> Option<u64> {
        self.atoms.keys().find_map(|p| p.nat())
    }

    /// `‖μ‖`, the sum of absolute weights.
    pub fn norm(&self) -> Q {
        self.atoms.values().map(|w| w.abs()).sum()
    }

    /// Signed total mass `μ(N_F)`.
    pub fn total(&self) -> Q {
        self.atoms.values().sum()
    }

    pub fn mass_where<F: FnMut(Point) -> bool>(&self, mut keep: F) -> Q {
        self.atoms
            .iter()
            .filter(|(p, _)| keep(**p))
            .map(|(_, w)| w.clone())
            .sum()
    }

    pub fn variation_where<F: FnMut(Point) -> bool>(&self, mut keep: F) -> Q {
        self.atoms
            .iter()
            .filter(|(p, _)| keep(**p))
            .map(|(_, w)| w.abs())
            .sum()
    }

    pub fn restrict_where<F: FnMut(Point) -> bool>(&self, mut keep: F) -> FinMeasure {
        FinMeasure {
            atoms: self
                .atoms
                .iter()
                .filter(|(p, _)| keep(**p))
                .map(|(p, w)| (*p, w.clone()))
                .collect(),
        }
    }

    /// `|μ|(s)`.
    pub fn variation(&self, s: &SetSpec) -> Result<Q> {
        let mut total = Q::zero();
        for (p, w) in &self.atoms {
            if s.contains_point(*p)? {
                total += w.abs();
            }
        }
        Ok(total)
    }

    /// `μ(s)`.
    pub fn mass(&self, s: &SetSpec) -> Result<Q> {
        let mut total = Q::zero();
        for (p, w) in &self.atoms {
            if s.contains_point(*p)? {
                total += w;
            }
        }
        Ok(total)
    }

    /// `μ↾s`.
    pub fn restrict(&self, s: &SetSpec) -> Result<FinMeasure> {
        let mut atoms = BTreeMap::new();
        for (p, w) in &self.atoms {
            if s.contains_point(*p)? {
                atoms.insert(*p, w.clone());
            }
        }
        Ok(FinMeasure { atoms })
    }

    /// `μ↾ω`.
    pub fn restrict_omega(&self) -> FinMeasure {
        self.restrict_where(|p| p != Point::PF)
    }

    pub fn scale(&self, c: &Q) -> FinMeasure {
        if c.is_zero() {
            return FinMeasure::empty();
        }
        FinMeasure {
            atoms: self.atoms.iter().map(|(p, w)| (*p, w * c)).collect(),
        }
    }

    /// The variation measure `|μ|`.
    pub fn abs(&self) -> NonNegMeasure {
        NonNegMeasure(FinMeasure {
            atoms: self.atoms.iter().map(|(p, w)| (*p, w.abs())).collect(),
        })
    }

    pub fn is_nonnegative(&self) -> bool {
        self.atoms.values().all(|w| w.is_positive())
    }

    pub fn disjoint_from(&self, other: &FinMeasure) -> bool {
        self.atoms.keys().all(|p| !other.atoms.contains_key(p))
    }

    /// `μ + w·δ_PF`.
    pub fn add_pf(&self, w: Q) -> FinMeasure {
        combine(&Q::one(), self, &Q::one(), &FinMeasure::dirac(Point::PF, w))
    }

    /// `Σ μ({x})·δ_{f(x)}`.
    pub fn pushforward(&self, f: &ReductionTable) -> Result<FinMeasure> {
        if self.charges_pf() {
            return Err(Error::HasPFAtom);
        }
        let mut out = Vec::with_capacity(self.atoms.len());
        for (p, w) in &self.atoms {
            let x = p.nat().expect("PF excluded above");
            let y = f.image(x).ok_or(Error::UndefinedAt(x))?;
            out.push((Point::Nat(y), w.clone()));
        }
        Ok(FinMeasure::from_atoms(out))
    }
}

/// `a·m1 + b·m2` with zero atoms removed.
pub fn combine(a: &Q, m1: &FinMeasure, b: &Q, m2: &FinMeasure) -> FinMeasure {
    FinMeasure::from_atoms(
        m1.atoms
            .iter()
            .map(|(p, w)| (*p, w * a))
            .chain(m2.atoms.iter().map(|(p, w)| (*p, w * b))),
    )
}

/// A measure with strictly positive weights.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NonNegMeasure(FinMeasure);

impl NonNegMeasure {
    pub fn new(m: FinMeasure) -> Result<Self> {
        if let Some((p, _)) = m.atoms.iter().find(|(_, w)| !w.is_positive()) {
            return Err(Error::NotNonNegative(*p));
        }
        Ok(NonNegMeasure(m))
    }

    pub fn uniform<I: IntoIterator<Item = u64>>(points: I, w: &Q) -> Result<Self> {
        Self::new(FinMeasure::from_atoms(
            points.into_iter().map(|p| (Point::Nat(p), w.clone())),
        ))
    }

    pub fn inner(&self) -> &FinMeasure {
        &self.0
    }

    pub fn into_inner(self) -> FinMeasure {
        self.0
    }

    /// `(at⁺, at⁻)`: largest and smallest atom weight.
    pub fn atoms_range(&self) -> Result<(Q, Q)> {
        let mut it = self.0.atoms.values();
        let first = it.next().ok_or(Error::EmptyMeasure)?;
        let (mut hi, mut lo) = (first.clone(), first.clone());
        for w in it {
            if *w > hi {
                hi = w.clone();
            }
            if *w < lo {
                lo = w.clone();
            }
        }
        Ok((hi, lo))
    }
}

impl std::ops::Deref for NonNegMeasure {
    type Target = FinMeasure;
    fn deref(&self) -> &FinMeasure {
        &self.0
    }
}

#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    atoms: Vec<(Point, String)>,
}

impl Serialize for FinMeasure {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MeasureRepr {
            atoms: self
                .atoms
                .iter()
                .map(|(p, w)| (*p, to_canonical(w)))
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FinMeasure {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = MeasureRepr::deserialize(d)?;
        let atoms = repr
            .atoms
            .into_iter()
            .map(|(p, w)| parse_q(&w).map(|w| (p, w)))
            .collect::<Result<Vec<_>>>()
            .map_err(de::Error::custom)?;
        FinMeasure::try_from_atoms(atoms).map_err(de::Error::custom)
    }
}

impl Serialize for NonNegMeasure {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl fmt::Display for FinMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str("0");
        }
        for (i, (p, w)) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "({})δ_{}", to_canonical(w), p)?;
        }
        Ok(())
    }
}
