use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use proptest::prelude::*;

use nikodym::blocks::BlockGenerator;
use nikodym::classify::{classify_density, classify_summable, Reason, Verdict};
use nikodym::disjoint::{disjointify, pairwise_disjoint};
use nikodym::expr::SeqFn;
use nikodym::extract::submeasure_to_an;
use nikodym::katetov::reduction::ReductionTable;
use nikodym::katetov::refute::{collapsing_table, refute_reduction, spreading_table};
use nikodym::katetov::transport::{transport, verify_transport, UniformTransport};
use nikodym::measure::{combine, FinMeasure, NonNegMeasure, Point};
use nikodym::rational::{parse_q, q, qi, to_canonical};
use nikodym::sequences::{verify_an, FilterContext, MeasureSeq};
use nikodym::setspec::SetSpec;
use nikodym::submeasure::{nonpathology_defect, FiniteTable, SubmeasureSpec};
use nikodym::{Error, Q};

fn rational() -> impl Strategy<Value = Q> {
    (-200i64..200, 1i64..64).prop_map(|(p, d)| q(p, d))
}

fn positive() -> impl Strategy<Value = Q> {
    (1i64..64, 1i64..64).prop_map(|(p, d)| q(p, d))
}

fn signed_measure() -> impl Strategy<Value = FinMeasure> {
    prop::collection::vec((0u64..40, rational()), 0..12)
        .prop_map(|atoms| FinMeasure::from_atoms(atoms.into_iter().map(|(p, w)| (Point::Nat(p), w))))
}

fn points_in(m: &FinMeasure, s: &[u64]) -> Q {
    m.mass_where(|p| p.nat().is_some_and(|x| s.contains(&x)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_strings_round_trip(x in rational()) {
        let s = to_canonical(&x);
        prop_assert_eq!(parse_q(&s).unwrap(), x.clone());
        let (p, d) = s.split_once('/').unwrap();
        prop_assert!(d.parse::<u64>().unwrap() >= 1);
        prop_assert_eq!(Q::new(p.parse().unwrap(), d.parse().unwrap()), x);
    }

    #[test]
    fn measure_norms_and_restrictions(m in signed_measure(), cut in 0u64..40) {
        let lo: Vec<u64> = (0..cut).collect();
        let hi: Vec<u64> = (cut..40).collect();
        prop_assert!(m.norm() >= m.total().abs());
        prop_assert_eq!(points_in(&m, &lo) + points_in(&m, &hi), m.total());
        let v = |s: &[u64]| m.variation_where(|p| p.nat().is_some_and(|x| s.contains(&x)));
        prop_assert_eq!(v(&lo) + v(&hi), m.norm());
        prop_assert_eq!(m.abs().inner().norm(), m.norm());
        prop_assert!(m.atoms().all(|(_, w)| !w.is_zero()));
    }

    #[test]
    fn pushforward_preserves_mass(m in signed_measure(), table in prop::collection::vec(0u64..10, 40)) {
        let t = ReductionTable::from_table(table);
        let push = m.pushforward(&t).unwrap();
        prop_assert_eq!(push.total(), m.total());
        prop_assert!(push.norm() <= m.norm());
        let c: Vec<u64> = (0..5).collect();
        let pre: Vec<u64> = (0..40).filter(|x| t.image(*x).is_some_and(|y| y < 5)).collect();
        prop_assert_eq!(points_in(&push, &c), points_in(&m, &pre));
    }

    #[test]
    fn combination_is_linear(a in rational(), b in rational(), m1 in signed_measure(), m2 in signed_measure()) {
        let c = combine(&a, &m1, &b, &m2);
        prop_assert_eq!(c.total(), &a * m1.total() + &b * m2.total());
    }

    #[test]
    fn transport_subset_errors(
        lam in prop::collection::vec(1i64..6, 1..6),
        extra in prop::collection::vec(1i64..3, 0..20),
        seed in 0u64..1000,
    ) {
        // μ carries the same total as λ in unit atoms plus a few halves
        let total: i64 = lam.iter().sum::<i64>() * 2;
        let halves: i64 = extra.iter().sum::<i64>().min(total) / 2 * 2;
        let mut mu_atoms: Vec<Q> = vec![q(1, 2); halves as usize];
        let rest = total - halves;
        mu_atoms.extend(std::iter::repeat(qi(1)).take((rest / 2) as usize));
        let lam_m = NonNegMeasure::new(FinMeasure::from_atoms(lam.iter().enumerate().map(|(i, w)| (Point::Nat(i as u64), qi(*w))))).unwrap();
        let mu_m = NonNegMeasure::new(FinMeasure::from_atoms(mu_atoms.iter().enumerate().map(|(j, w)| (Point::Nat(100 + j as u64), w.clone())))).unwrap();
        let eps = qi(2 * lam.len() as i64);
        let t = transport(&lam_m, &mu_m, &eps).unwrap();
        let check = verify_transport(&lam_m, &mu_m, &t, &eps, seed).unwrap();
        prop_assert!(check.within && check.parts_ok);
        for mask in 0usize..1 << lam.len() {
            let c: Vec<u64> = (0..lam.len() as u64).filter(|i| mask & (1 << i) != 0).collect();
            let pre: Vec<u64> = t.map.iter().filter(|(_, y)| c.contains(y)).map(|(x, _)| *x).collect();
            prop_assert!((points_in(lam_m.inner(), &c) - points_in(mu_m.inner(), &pre)).abs() <= eps);
        }
    }

    #[test]
    fn uniform_transport_matches_closed_form(targets in 1u64..6, lam_d in 1i64..8, atoms_per in 1u64..40) {
        let lam_w = q(1, lam_d);
        let atoms = targets * atoms_per;
        let mu_w = Q::from_integer(BigInt::from(targets)) * &lam_w / Q::from_integer(BigInt::from(atoms));
        let eps = &mu_w * qi(2 * targets as i64);
        let u = UniformTransport::new(BigInt::from(targets), &lam_w, BigInt::from(atoms), &mu_w, &eps).unwrap();
        prop_assert!(u.worst_error <= eps);
        prop_assert!(u.deficit.is_zero());
        for i in 0..atoms {
            let img = u.image(&BigInt::from(i));
            prop_assert!(img < BigInt::from(targets));
        }
    }

    #[test]
    fn phi_blocks_tile_with_norm_n(c in 1i64..5, k in 0i64..4) {
        let f = SeqFn::parse(&format!("(mul {c} (pow n {k}))")).unwrap();
        let g = BlockGenerator::phi(f);
        let mut end = BigInt::zero();
        for n in 1..=10u64 {
            let b = g.block(n).unwrap();
            prop_assert_eq!(&b.start, &end);
            prop_assert_eq!(g.norm(n).unwrap(), qi(n as i64));
            let w = q(1, c * (n as i64).pow(k as u32));
            prop_assert_eq!(g.atoms_range(n).unwrap(), (w.clone(), w));
            end = b.end();
        }
    }

    #[test]
    fn phi_always_in_an(c in 1i64..5, k in 0i64..4, exp in any::<bool>()) {
        let src = if exp { format!("(mul {c} (exp2 n))") } else { format!("(mul {c} (pow n {k}))") };
        let g = BlockGenerator::phi(SeqFn::parse(&src).unwrap());
        let v = classify_density(&g, 12).unwrap();
        prop_assert_eq!((v.verdict, v.reason), (Verdict::InAN, Some(Reason::UnboundedNorms)));
    }

    #[test]
    fn summable_never_not_in_an(c in 1i64..5, k in 0i64..2, shift in 1i64..4) {
        let f = SeqFn::parse(&format!("(div {c} (pow (add n {shift}) {k}))")).unwrap();
        match classify_summable(&f, 32) {
            Ok(v) => prop_assert_eq!(v.verdict, Verdict::InAN),
            Err(Error::NotAnIdeal(_)) => prop_assert!(false, "divergent weights rejected"),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn density_tables_are_non_pathological(
        weights in prop::collection::vec(positive(), 1..7),
        split in 1usize..6,
        mask in 0u32..128,
    ) {
        let n = weights.len();
        let split = split.min(n);
        let atoms = |r: std::ops::Range<usize>| {
            FinMeasure::from_atoms(r.map(|i| (Point::Nat(i as u64), weights[i].clone())))
        };
        let mut blocks = vec![atoms(0..split)];
        if split < n {
            blocks.push(atoms(split..n));
        }
        let gen = BlockGenerator::Explicit { first: 1, blocks };
        let ground: Vec<u64> = (0..n as u64).collect();
        let table = SubmeasureSpec::density(gen).truncate(&ground).unwrap();
        let a: Vec<u64> = ground.iter().copied().filter(|i| mask & (1 << i) != 0).collect();
        let d = nonpathology_defect(&table, &a).unwrap();
        prop_assert!(d.defect.is_zero());
    }

    #[test]
    fn lp_value_never_exceeds_table(values in prop::collection::vec(0i64..6, 7)) {
        // make the table monotone by taking running maxima over subsets
        let mut v: Vec<Q> = std::iter::once(Q::zero()).chain(values.iter().map(|x| qi(*x))).collect();
        for m in 1..8usize {
            for s in 0..m {
                if s & m == s {
                    let lower = v[s].clone();
                    if v[m] < lower {
                        v[m] = lower;
                    }
                }
            }
        }
        let Ok(table) = FiniteTable::new(vec![0, 1, 2], v) else { return Ok(()) };
        for mask in 0..8usize {
            let a: Vec<u64> = (0..3).filter(|i| mask & (1 << i) != 0).collect();
            let d = nonpathology_defect(&table, &a).unwrap();
            prop_assert!(d.lp_value <= d.phi_value);
            prop_assert!(!d.defect.is_negative());
        }
    }

    #[test]
    fn refuter_witnesses_check(k in 2u32..4, collapse in any::<bool>()) {
        let f = SeqFn::parse(&format!("(pow n {k})")).unwrap();
        let horizon = if k == 2 { 5 } else { 3 };
        let table = if collapse { collapsing_table(&f, horizon) } else { spreading_table(&f, horizon) }.unwrap();
        let r = refute_reduction(&f, &table, horizon).unwrap();
        let w = match r.chosen {
            Some(1) => r.case1.clone(),
            Some(_) => r.case2.clone(),
            None => None,
        };
        prop_assert!(w.is_some_and(|w| w.checks_pass));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn disjointified_sequences_are_disjoint(a in 1i64..4, b in 1i64..4) {
        let src = format!("(measure-seq (atom n (mul {a} n)) (atom (add n 1) (neg (mul {a} n))) (atom (add (mul 2 n) 50) (mul {b} n)) (atom (add (mul 2 n) 51) (neg (mul {b} n))))");
        let seq = MeasureSeq::parse_descriptor(&src).unwrap();
        let ctx = FilterContext::frechet(24, &q(1, 1_000_000)).unwrap();
        prop_assume!(verify_an(&seq, &ctx, 24).unwrap().all_pass());
        let out = disjointify(&seq, &ctx, 24).unwrap();
        prop_assert!(pairwise_disjoint(&out.measures));
        prop_assert!(out.measures.iter().all(|m| !m.charges_pf()));
    }

    /// `classify_density` says unbounded norms exactly when extraction succeeds.
    #[test]
    fn classification_agrees_with_extraction(choice in 0usize..4, c in 1i64..3) {
        let gen = match choice {
            0 => BlockGenerator::phi(SeqFn::parse(&format!("(mul {c} n)")).unwrap()),
            1 => BlockGenerator::phi(SeqFn::parse(&format!("{c}")).unwrap()),
            2 => BlockGenerator::AsymptoticDensity,
            _ => BlockGenerator::Rule {
                start: Some(SeqFn::parse("n").unwrap()),
                length: SeqFn::parse("1").unwrap(),
                weight: SeqFn::parse(&format!("{c}")).unwrap(),
                first: 0,
            },
        };
        let unbounded = classify_density(&gen, 16).unwrap().reason == Some(Reason::UnboundedNorms);
        let extracted = submeasure_to_an(&SubmeasureSpec::density(gen), 2, 1 << 10, 0);
        match extracted {
            Ok(_) => prop_assert!(unbounded),
            Err(Error::BoundedSubmeasure { .. }) => prop_assert!(!unbounded),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn finite_sets_are_members(points in prop::collection::btree_set(0u64..500, 0..10)) {
        let s = SetSpec::finite(points.into_iter().collect());
        for ideal in [
            nikodym::ideal::IdealSpec::Phi { f: SeqFn::parse("n").unwrap() },
            nikodym::ideal::IdealSpec::Summable { f: SeqFn::parse("1").unwrap() },
        ] {
            prop_assert!(nikodym::ideal::membership(&ideal, &s, 16, &q(1, 100)).unwrap().is_in());
        }
    }
}
