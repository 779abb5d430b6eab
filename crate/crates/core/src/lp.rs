//! Exact rational simplex for `max c·x` subject to `A x ≤ b`, `x ≥ 0`, `b ≥ 0`.
//!
//! Dictionary form with Bland's rule, so it terminates without cycling and
//! every intermediate value is exact.

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::Q;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: Q,
    pub x: Vec<Q>,
}

pub fn maximize(c: &[Q], a: &[Vec<Q>], b: &[Q]) -> Result<LpSolution> {
    let n = c.len();
    let m = a.len();
    if b.len() != m || a.iter().any(|row| row.len() != n) {
        return Err(Error::Validation("LP dimensions disagree".into()));
    }
    if b.iter().any(|v| v.is_negative()) {
        return Err(Error::Validation("LP right-hand side must be non-negative".into()));
    }
    // Variables 0..n are structural, n..n+m are slacks. Row r reads
    // basis[r] = rhs[r] - Σ_j t[r][j]·nonbasic[j].
    let mut nonbasic: Vec<usize> = (0..n).collect();
    let mut basis: Vec<usize> = (n..n + m).collect();
    let mut t: Vec<Vec<Q>> = a.to_vec();
    let mut rhs: Vec<Q> = b.to_vec();
    let mut obj: Vec<Q> = c.to_vec();
    let mut value = Q::zero();

    loop {
        let entering = (0..n)
            .filter(|&j| obj[j].is_positive())
            .min_by_key(|&j| nonbasic[j]);
        let Some(e) = entering else { break };
        let mut leave: Option<(usize, Q)> = None;
        for r in 0..m {
            if t[r][e].is_positive() {
                let ratio = &rhs[r] / &t[r][e];
                let better = match &leave {
                    None => true,
                    Some((lr, lv)) => ratio < *lv || (ratio == *lv && basis[r] < basis[*lr]),
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let Some((l, _)) = leave else {
            return Err(Error::Validation("LP is unbounded".into()));
        };
        let piv = t[l][e].clone();
        // Solve row l for the entering variable.
        let row: Vec<Q> = t[l]
            .iter()
            .enumerate()
            .map(|(j, v)| if j == e { piv.recip() } else { v / &piv })
            .collect();
        let r_rhs = &rhs[l] / &piv;
        for r in 0..m {
            if r == l || t[r][e].is_zero() {
                continue;
            }
            let k = t[r][e].clone();
            for j in 0..n {
                t[r][j] = if j == e { -(&k * &row[j]) } else { &t[r][j] - &k * &row[j] };
            }
            rhs[r] = &rhs[r] - &k * &r_rhs;
        }
        let k = obj[e].clone();
        for j in 0..n {
            obj[j] = if j == e { -(&k * &row[j]) } else { &obj[j] - &k * &row[j] };
        }
        value += &k * &r_rhs;
        t[l] = row;
        rhs[l] = r_rhs;
        std::mem::swap(&mut basis[l], &mut nonbasic[e]);
    }
    let mut x = vec![Q::zero(); n];
    for (r, var) in basis.iter().enumerate() {
        if *var < n {
            x[*var] = rhs[r].clone();
        }
    }
    Ok(LpSolution { value, x })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn textbook_instance() {
        // max 3x + 2y, x + y ≤ 4, x + 3y ≤ 6, x ≤ 3
        let c = vec![q(3, 1), q(2, 1)];
        let a = vec![vec![q(1, 1), q(1, 1)], vec![q(1, 1), q(3, 1)], vec![q(1, 1), q(0, 1)]];
        let b = vec![q(4, 1), q(6, 1), q(3, 1)];
        let s = maximize(&c, &a, &b).unwrap();
        assert_eq!(s.value, q(11, 1));
        assert_eq!(s.x, vec![q(3, 1), q(1, 1)]);
    }

    #[test]
    fn degenerate_instance_terminates() {
        let c = vec![q(1, 1), q(1, 1), q(1, 1)];
        let a = vec![
            vec![q(1, 1), q(1, 1), q(0, 1)],
            vec![q(0, 1), q(1, 1), q(1, 1)],
            vec![q(1, 1), q(0, 1), q(1, 1)],
            vec![q(1, 1), q(1, 1), q(1, 1)],
        ];
        let b = vec![q(1, 1), q(1, 1), q(1, 1), q(2, 1)];
        assert_eq!(maximize(&c, &a, &b).unwrap().value, q(3, 2));
    }
}
