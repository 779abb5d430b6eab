//! Maps ω → ω given by a table on an initial segment plus an optional rule.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::expr::SeqFn;
use crate::rational::as_u64;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReductionTable {
    table: Vec<u64>,
    rule: Option<SeqFn>,
    finite_to_one: bool,
    provenance: Option<String>,
}

impl ReductionTable {
    /// `table[x]` is the image of `x`; the rule, when present, must agree with it.
    pub fn new(table: Vec<u64>, rule: Option<SeqFn>, finite_to_one: bool) -> Result<ReductionTable> {
        if let Some(r) = &rule {
            for (x, y) in table.iter().enumerate() {
                let v = r.eval_u(x as u64)?;
                if as_u64(&v) != Some(*y) {
                    return Err(Error::Validation(format!("rule disagrees with the table at {x}")));
                }
            }
        }
        Ok(ReductionTable { table, rule, finite_to_one, provenance: None })
    }

    pub fn from_table(table: Vec<u64>) -> ReductionTable {
        ReductionTable { table, ..Default::default() }
    }

    pub fn identity(len: u64) -> ReductionTable {
        ReductionTable {
            table: (0..len).collect(),
            rule: Some(SeqFn::parse("n").expect("valid expression")),
            finite_to_one: true,
            provenance: Some("identity".into()),
        }
    }

    pub fn with_provenance(mut self, p: impl Into<String>) -> ReductionTable {
        self.provenance = Some(p.into());
        self
    }

    pub fn with_finite_to_one(mut self, flag: bool) -> ReductionTable {
        self.finite_to_one = flag;
        self
    }

    pub fn image(&self, x: u64) -> Option<u64> {
        if let Some(y) = self.table.get(x as usize) {
            return Some(*y);
        }
        let v = self.rule.as_ref()?.eval_u(x).ok()?;
        as_u64(&v)
    }

    /// Size of the tabulated initial segment.
    pub fn domain_len(&self) -> u64 {
        self.table.len() as u64
    }

    pub fn table(&self) -> &[u64] {
        &self.table
    }

    pub fn rule(&self) -> Option<&SeqFn> {
        self.rule.as_ref()
    }

    pub fn finite_to_one(&self) -> bool {
        self.finite_to_one
    }

    pub fn provenance(&self) -> Option<&str> {
        self.provenance.as_deref()
    }

    /// Fibers over the tabulated segment.
    pub fn fibers(&self) -> BTreeMap<u64, Vec<u64>> {
        let mut out: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for (x, y) in self.table.iter().enumerate() {
            out.entry(*y).or_default().push(x as u64);
        }
        out
    }

    pub fn max_fiber(&self) -> usize {
        self.fibers().values().map(Vec::len).max().unwrap_or(0)
    }
}

#[derive(Serialize, Deserialize)]
struct Raw {
    table: Vec<(u64, u64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rule: Option<SeqFn>,
    #[serde(default)]
    finite_to_one: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<String>,
}

impl Serialize for ReductionTable {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        Raw {
            table: self.table.iter().enumerate().map(|(x, y)| (x as u64, *y)).collect(),
            rule: self.rule.clone(),
            finite_to_one: self.finite_to_one,
            provenance: self.provenance.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ReductionTable {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = Raw::deserialize(d)?;
        let mut pairs = raw.table;
        pairs.sort();
        for (k, (x, _)) in pairs.iter().enumerate() {
            if *x != k as u64 {
                return Err(D::Error::custom("table must cover an initial segment [0, N] exactly once"));
            }
        }
        let t = ReductionTable::new(pairs.into_iter().map(|(_, y)| y).collect(), raw.rule, raw.finite_to_one)
            .map_err(D::Error::custom)?;
        Ok(ReductionTable { provenance: raw.provenance, ..t })
    }
}
