//! The ten acceptance criteria, each checked against an independent oracle.
//! Runs without the libtest harness so every criterion prints one line.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nikodym::blocks::BlockGenerator;
use nikodym::classify::{classify_density, classify_summable, Reason, Verdict};
use nikodym::expr::SeqFn;
use nikodym::extract::submeasure_to_an;
use nikodym::ideal::{InEvidence, IdealSpec, MembershipVerdict, NotInWitness};
use nikodym::katetov::density::build_reduction_density;
use nikodym::katetov::reduction::ReductionTable;
use nikodym::katetov::refute::{collapsing_table, refute_reduction, spreading_table, RefutationWitness};
use nikodym::katetov::successor::{check_hypotheses, successor, SUPERSUM};
use nikodym::katetov::transport::transport;
use nikodym::katetov::verify::{verify_reduction, ReductionVerdict};
use nikodym::measure::{FinMeasure, NonNegMeasure, Point};
use nikodym::rational::{q, qi};
use nikodym::sampling::Coverage;
use nikodym::setspec::SetSpec;
use nikodym::submeasure::{nonpathology_defect, FiniteTable, SubmeasureSpec};
use nikodym::{Error, Q};

type Outcome = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn f(src: &str) -> SeqFn {
    SeqFn::parse(src).unwrap()
}

fn measure(atoms: &[(u64, Q)]) -> NonNegMeasure {
    NonNegMeasure::new(FinMeasure::from_atoms(atoms.iter().map(|(p, w)| (Point::Nat(*p), w.clone())))).unwrap()
}

// ---------------------------------------------------------------------------

fn transport_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7a5);
    for instance in 0..500 {
        // common denominator d keeps every weight at denominator ≤ 64
        let d: i64 = rng.gen_range(1..=64);
        let b: usize = rng.gen_range(1..=64);
        let mu_num: Vec<i64> = (0..b).map(|_| rng.gen_range(1..=3)).collect();
        let total: i64 = mu_num.iter().sum();
        let a: usize = rng.gen_range(1..=8.min(total as usize));
        // split the total into a positive parts
        let mut cuts: Vec<i64> = (1..total).collect();
        for i in (1..cuts.len()).rev() {
            cuts.swap(i, rng.gen_range(0..=i));
        }
        let mut cuts: Vec<i64> = cuts.into_iter().take(a - 1).collect();
        cuts.sort();
        cuts.insert(0, 0);
        cuts.push(total);
        let lam_w: Vec<Q> = cuts.windows(2).map(|w| q(w[1] - w[0], d)).collect();
        let a_pts: Vec<u64> = (0..a as u64).map(|i| 3 * i + rng.gen_range(0..3)).collect();
        let b_pts: Vec<u64> = (0..b as u64).map(|j| 1000 + 2 * j).collect();
        let lam = measure(&a_pts.iter().copied().zip(lam_w.iter().cloned()).collect::<Vec<_>>());
        let mu = measure(&b_pts.iter().copied().zip(mu_num.iter().map(|&y| q(y, d))).collect::<Vec<_>>());
        let max_atom = q(*mu_num.iter().max().unwrap(), d);
        let eps = max_atom * qi(2 * a as i64) * qi(rng.gen_range(1..=3));
        let t = transport(&lam, &mu, &eps).map_err(|e| format!("instance {instance}: {e}"))?;
        ensure!(t.map.len() == b, "instance {instance}: map does not cover B");
        for mask in 0u32..1 << a {
            let c: Vec<u64> = (0..a).filter(|i| mask & (1 << i) != 0).map(|i| a_pts[i]).collect();
            let lam_c: Q = c.iter().map(|p| lam.weight(Point::Nat(*p))).sum();
            let mu_pre: Q = t.map.iter().filter(|(_, y)| c.contains(y)).map(|(x, _)| mu.weight(Point::Nat(*x))).sum();
            ensure!((&lam_c - &mu_pre).abs() <= eps, "instance {instance}, subset {mask:b}: error exceeds eps");
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------

/// `(start, len)` of block `n` of `Φ(f)`, from `f` evaluated by `value`.
fn phi_block(value: impl Fn(u64) -> BigInt, n: u64) -> (BigInt, BigInt) {
    let mut start = BigInt::zero();
    for k in 1..n {
        start += value(k) * k;
    }
    (start.clone(), value(n) * n)
}

fn blockwise_certificate() -> Outcome {
    let (src, dst) = (f("n"), f("(mul 2 (pow n 3))"));
    let red = build_reduction_density(&BlockGenerator::phi(src), &BlockGenerator::phi(dst), 12, 0).map_err(|e| e.to_string())?;
    let table = &red.table;
    let mut rng = ChaCha8Rng::seed_from_u64(0x55);
    for n in 1..=12u64 {
        let cert = red.certificate.blocks.iter().find(|b| b.n == n).ok_or(format!("no certificate for block {n}"))?;
        ensure!(cert.holds && cert.checked_error <= q(1, n as i64), "block {n}: certificate error too large");
        let (a0, alen) = phi_block(|k| BigInt::from(k), n);
        let (b0, blen) = phi_block(|k| BigInt::from(2 * k * k * k), n);
        let (a0, alen, b0, blen) = (a0.to_u64().unwrap(), alen.to_u64().unwrap(), b0.to_u64().unwrap(), blen.to_u64().unwrap());
        // how many points of B_n land on each point of A_n
        let mut hits = vec![0i64; alen as usize];
        for x in b0..b0 + blen {
            let y = table.image(x).ok_or(format!("table misses {x}"))?;
            ensure!((a0..a0 + alen).contains(&y), "block {n}: {x} leaves A_n");
            hits[(y - a0) as usize] += 1;
        }
        let mu_w = q(1, 2 * (n * n * n) as i64);
        let lam_w = q(1, n as i64);
        let error = |c: &[usize]| -> Q {
            let l = &lam_w * qi(c.len() as i64);
            let m = &mu_w * qi(c.iter().map(|i| hits[*i]).sum::<i64>());
            (l - m).abs()
        };
        let bound = q(1, n as i64);
        if alen <= 12 {
            ensure!(cert.coverage == Coverage::Exhaustive, "block {n}: expected exhaustive coverage");
            for mask in 0usize..1 << alen {
                let c: Vec<usize> = (0..alen as usize).filter(|i| mask & (1 << i) != 0).collect();
                ensure!(error(&c) <= bound, "block {n}: subset {mask:b} violates 1/n");
            }
        } else {
            ensure!(cert.coverage == Coverage::Sampled && cert.subsets >= 256, "block {n}: expected 256 samples");
            for _ in 0..256 {
                let c: Vec<usize> = (0..alen as usize).filter(|_| rng.gen_bool(0.5)).collect();
                ensure!(error(&c) <= bound, "block {n}: sampled subset violates 1/n");
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------

fn phi_invariants() -> Outcome {
    let cases: [(&str, fn(u64) -> BigInt); 4] = [
        ("1", |_| BigInt::one()),
        ("n", BigInt::from),
        ("(mul 2 (pow n 2))", |n| BigInt::from(2 * n * n)),
        ("(exp2 (pow n 2))", |n| BigInt::one() << (n * n)),
    ];
    for (src, oracle) in cases {
        let g = BlockGenerator::phi(f(src));
        let mut prev_end = BigInt::zero();
        for n in 1..=16u64 {
            let b = g.block(n).map_err(|e| e.to_string())?;
            let v = oracle(n);
            ensure!(b.start == prev_end, "{src}: block {n} does not start at the previous end");
            ensure!(b.len == &v * n, "{src}: block {n} has the wrong length");
            ensure!(g.norm(n).unwrap() == qi(n as i64), "{src}: norm of block {n} is not n");
            let w = Q::new(BigInt::one(), v);
            ensure!(g.atoms_range(n).unwrap() == (w.clone(), w), "{src}: at± of block {n} is not 1/f(n)");
            prev_end = b.end();
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------

fn lp_nonpathology() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x19);
    for t in 0..100 {
        let size: u64 = rng.gen_range(1..=8);
        // disjoint consecutive blocks covering the ground
        let mut blocks = Vec::new();
        let mut at = 0u64;
        while at < size {
            let len = rng.gen_range(1..=size - at);
            let atoms: Vec<(Point, Q)> = (at..at + len).map(|p| (Point::Nat(p), q(rng.gen_range(1..=6), rng.gen_range(1..=6)))).collect();
            blocks.push(FinMeasure::from_atoms(atoms));
            at += len;
        }
        let gen = BlockGenerator::Explicit { first: 1, blocks: blocks.clone() };
        let ground: Vec<u64> = (0..size).collect();
        let table = SubmeasureSpec::density(gen).truncate(&ground).map_err(|e| e.to_string())?;
        let a: Vec<u64> = ground.iter().copied().filter(|_| rng.gen_bool(0.7)).collect();
        let d = nonpathology_defect(&table, &a).map_err(|e| e.to_string())?;
        ensure!(d.defect.is_zero(), "table {t}: defect {} on {a:?}", d.defect);
        // the best single generating measure already attains φ(a)
        let best = blocks.iter().map(|m| m.mass_where(|p| p.nat().is_some_and(|x| a.contains(&x)))).max().unwrap_or_default();
        ensure!(d.phi_value == best.max(Q::zero()), "table {t}: φ(a) is not the largest block mass");
    }
    let mut values = vec![qi(1); 8];
    values[0] = qi(0);
    values[7] = qi(2);
    let patho = FiniteTable::new(vec![0, 1, 2], values).map_err(|e| e.to_string())?;
    let d = nonpathology_defect(&patho, &[0, 1, 2]).map_err(|e| e.to_string())?;
    ensure!(d.defect == q(1, 2) && d.lp_value == q(3, 2), "pathological defect is {}", d.defect);
    Ok(())
}

// ---------------------------------------------------------------------------

fn dividing_line() -> Outcome {
    let harmonic = SubmeasureSpec::summable(f("(div 1 (add n 1))"));
    let ex = submeasure_to_an(&harmonic, 2, 1 << 12, 0).map_err(|e| e.to_string())?;
    ensure!(ex.cuts[1] == 3, "harmonic n_1 = {}", ex.cuts[1]);
    // oracle: least m with 1 + 1/2 + ... + 1/(m+1) > 2
    let mut s = Q::zero();
    let m = (0u64..).find(|m| {
        s += q(1, *m as i64 + 1);
        s > qi(2)
    });
    ensure!(m == Some(3), "oracle disagrees on n_1");

    let phi_n = SubmeasureSpec::density(BlockGenerator::phi(f("n")));
    let ex = submeasure_to_an(&phi_n, 3, 1 << 12, 0).map_err(|e| e.to_string())?;
    for (k, entry) in ex.intervals.iter().enumerate() {
        ensure!(entry.mass > qi(k as i64 + 1), "Φ(n) interval {} has mass {}", k + 1, entry.mass);
    }
    match submeasure_to_an(&SubmeasureSpec::AsymptoticDensity, 2, 1 << 12, 0) {
        Err(Error::BoundedSubmeasure { .. }) => Ok(()),
        other => Err(format!("φ_d: expected BoundedSubmeasure, got {other:?}")),
    }
}

// ---------------------------------------------------------------------------

fn classification() -> Outcome {
    let c = classify_density(&BlockGenerator::AsymptoticDensity, 16).map_err(|e| e.to_string())?;
    ensure!(c.verdict == Verdict::NotInAN, "φ_d: {:?}", c.verdict);
    for src in ["1", "n", "(mul 2 (pow n 2))", "(exp2 (pow n 2))"] {
        let c = classify_density(&BlockGenerator::phi(f(src)), 16).map_err(|e| e.to_string())?;
        ensure!((c.verdict, c.reason) == (Verdict::InAN, Some(Reason::UnboundedNorms)), "Φ({src}): {:?}", c.reason);
    }
    let delta = BlockGenerator::Rule { start: Some(f("n")), length: f("1"), weight: f("1"), first: 0 };
    let c = classify_density(&delta, 16).map_err(|e| e.to_string())?;
    ensure!((c.verdict, c.reason) == (Verdict::InAN, Some(Reason::AtomsDoNotVanish)), "δ_n: {:?}", c.reason);
    for src in ["(div 1 (add n 1))", "1"] {
        let c = classify_summable(&f(src), 64).map_err(|e| e.to_string())?;
        ensure!(c.verdict == Verdict::InAN, "summable {src}: {:?}", c.verdict);
    }
    match classify_summable(&f("(div 1 (exp2 n))"), 64) {
        Err(Error::NotAnIdeal(_)) => Ok(()),
        other => Err(format!("2^-n: expected NotAnIdeal, got {other:?}")),
    }
}

// ---------------------------------------------------------------------------

fn known_non_reduction() -> Outcome {
    let x = SetSpec::rule_intervals(f("(exp2 n)"), f("(fdiv (exp2 n) n)"), 1);
    let z = IdealSpec::Exh { submeasure: SubmeasureSpec::AsymptoticDensity };
    let target = IdealSpec::Summable { f: f("(div 1 n)") };
    let id = ReductionTable::identity(1 << 12);
    let r = verify_reduction(&id, &z, &target, &[x.clone()], 10, &q(1, 1_000_000)).map_err(|e| e.to_string())?;
    ensure!(r.verdict == ReductionVerdict::Refuted { test: 0 }, "verdict {:?}", r.verdict);
    let row = &r.rows[0];
    let MembershipVerdict::In { evidence: InEvidence::ClosedForm { trace, .. } } = &row.source else {
        return Err(format!("X is not certified in Z: {:?}", row.source));
    };
    for (k, v) in trace {
        // block k of φ_d is [2^k, 2^(k+1)); X meets it in ⌊2^k/k⌋ points
        let want = if *k == 0 { Q::zero() } else { Q::new(BigInt::from((1u64 << k) / k), BigInt::one() << k) };
        ensure!(*v == want, "block value at {k} is {v}");
    }
    match &row.preimage {
        Some(MembershipVerdict::NotIn { witness: NotInWitness::Divergent { trace, .. } }) => {
            for (k, s) in trace.iter().take(6) {
                let oracle: Q = (1u64 << k..(1u64 << k) + (1u64 << k) / k).map(|p| q(1, p as i64)).sum();
                ensure!(*s == oracle, "segment sum at {k} is {s}");
            }
            Ok(())
        }
        other => Err(format!("preimage not refuted by divergence: {other:?}")),
    }
}

// ---------------------------------------------------------------------------

fn successor_machinery() -> Outcome {
    let fast = f("(exp2 (pow n 2))");
    let h = check_hypotheses(&fast, 16).map_err(|e| e.to_string())?;
    ensure!(h.hold(), "hypotheses fail for 2^(n²): {:?}", h.first_failure);
    let s = successor(&fast, 16, 0).map_err(|e| e.to_string())?;
    for n in 2..=16u64 {
        let row = s.domination.iter().find(|r| r.n == n).ok_or(format!("no domination row {n}"))?;
        ensure!(row.direct == Some(true) || row.cube_route, "domination row {n} not certified");
        // 2n²·2^(n²) < 2^(n² + 2 log n + 2) and n·f(f(n)) ≥ 2^(2^(2n²))
        let lhs_bits = n * n + 2 * (64 - n.leading_zeros() as u64) + 2;
        ensure!(BigInt::from(lhs_bits) <= BigInt::one() << (2 * n * n), "oracle: domination fails at {n}");
    }
    ensure!(s.certificate_holds(), "forward certificate does not validate");
    let quartic = f("(pow n 4)");
    // oracle: first n ≥ 1 with n⁴ < Σ_{i<n} i⁴
    let oracle = (1u64..).find(|n| n.pow(4) < (0..*n).map(|i| i.pow(4)).sum::<u64>()).unwrap();
    match successor(&quartic, 16, 0) {
        Err(Error::HypothesisFails { n, which }) if n == oracle && which == SUPERSUM => Ok(()),
        other => Err(format!("n⁴: expected failure at {oracle}, got {other:?}")),
    }
}

// ---------------------------------------------------------------------------

/// Independent check of a refuter witness for `f(n) = n²`, `g(n) = n⁵`.
fn check_witness(w: &RefutationWitness, table: &ReductionTable, lambda_bound: i64) -> Outcome {
    let b_block = |n: u64| phi_block(|k| BigInt::from(k * k), n);
    let a_ends: Vec<BigInt> = (1..=64u64).map(|m| {
        let (s, l) = phi_block(|k| BigInt::from(k.pow(5)), m);
        s + l
    }).collect();
    for (set, n) in w.sets.iter().zip(&w.indices) {
        let (s, l) = b_block(*n);
        ensure!(set.iter().all(|x| BigInt::from(*x) >= s && BigInt::from(*x) < &s + &l), "witness set leaves B_{n}");
        let mass = q(set.len() as i64, (n * n) as i64);
        match w.case {
            1 => ensure!(mass == qi(1), "Case 1 mass at {n} is {mass}"),
            _ => ensure!(mass >= qi(1), "Case 2 mass at {n} is {mass}"),
        }
    }
    let mut per_block = std::collections::BTreeMap::<u64, std::collections::BTreeSet<u64>>::new();
    for x in &w.x {
        let y = table.image(*x).ok_or("image undefined")?;
        let m = a_ends.iter().position(|e| BigInt::from(y) < *e).ok_or("image beyond tabulated blocks")? as u64 + 1;
        per_block.entry(m).or_default().insert(y);
    }
    for (m, ys) in per_block {
        let value = q(ys.len() as i64, m.pow(5) as i64);
        ensure!(value <= q(lambda_bound, m as i64), "λ_{m}(φ[X]) = {value} exceeds {lambda_bound}/{m}");
    }
    ensure!(w.checks_pass, "library value checks disagree");
    Ok(())
}

fn refuter_sanity() -> Outcome {
    let toy = f("(pow n 2)");
    let spread = spreading_table(&toy, 5).map_err(|e| e.to_string())?;
    let r = refute_reduction(&toy, &spread, 5).map_err(|e| e.to_string())?;
    ensure!(!r.hypotheses.hold(), "toy f should violate the hypotheses");
    check_witness(r.case1.as_ref().ok_or("no Case 1 witness")?, &spread, 2)?;
    let collapse = collapsing_table(&toy, 5).map_err(|e| e.to_string())?;
    let r = refute_reduction(&toy, &collapse, 5).map_err(|e| e.to_string())?;
    ensure!(r.hypotheses.first_failure.is_some(), "toy f should report a hypothesis failure");
    check_witness(r.case2.as_ref().ok_or("no Case 2 witness")?, &collapse, 1)
}

// ---------------------------------------------------------------------------

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn nikwb() -> Result<PathBuf, String> {
    let exe = std::env::current_exe().map_err(|e| e.to_string())?;
    let profile = exe.parent().and_then(Path::parent).ok_or("no profile directory")?;
    let bin = profile.join(format!("nikwb{}", std::env::consts::EXE_SUFFIX));
    if !bin.exists() {
        let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
        let status = Command::new(cargo)
            .args(["build", "-q", "-p", "nikodym-cli"])
            .current_dir(workspace())
            .status()
            .map_err(|e| e.to_string())?;
        ensure!(status.success(), "building the CLI failed");
    }
    Ok(bin)
}

fn cli_determinism() -> Outcome {
    let bin = nikwb()?;
    let cli = workspace().join("crates/cli/tests");
    let cases: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(cli.join("golden/cases.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    for case in cases.as_array().ok_or("cases.json is not an array")? {
        let name = case["name"].as_str().unwrap_or_default();
        let args: Vec<&str> = case["args"].as_array().into_iter().flatten().filter_map(|a| a.as_str()).collect();
        let run = |threads: &str| {
            Command::new(&bin).args(&args).current_dir(cli.join("fixtures")).env("RAYON_NUM_THREADS", threads).output()
        };
        let outs: Vec<Vec<u8>> = ["1", "1", "4", "8"]
            .iter()
            .map(|t| run(t).map(|o| o.stdout))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        ensure!(outs.windows(2).all(|w| w[0] == w[1]), "{name}: output varies across runs or thread counts");
        let golden = std::fs::read(cli.join(format!("golden/{name}.out"))).map_err(|e| format!("{name}: {e}"))?;
        ensure!(outs[0] == golden, "{name}: output differs from the golden file");
    }
    Ok(())
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("transport oracle, 500 instances, exhaustive subsets", transport_oracle, Duration::from_secs(10)),
        ("blockwise reduction Φ(n) vs Φ(2n³) to horizon 12", blockwise_certificate, Duration::from_secs(30)),
        ("Φ(f) block invariants for four f, n ≤ 16", phi_invariants, Duration::from_secs(1)),
        ("LP non-pathology defects", lp_nonpathology, Duration::from_secs(30)),
        ("AN extraction dividing line", dividing_line, Duration::from_secs(5)),
        ("classification concordance", classification, Duration::from_secs(1)),
        ("identity map Z to I_1/n refuted", known_non_reduction, Duration::from_secs(5)),
        ("successor hypotheses, domination and certificate", successor_machinery, Duration::from_secs(10)),
        ("refuter witnesses on toy f = n²", refuter_sanity, Duration::from_secs(60)),
        ("CLI golden determinism", cli_determinism, Duration::from_secs(600)),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let took = start.elapsed();
        let result = result.and_then(|()| {
            if took > *budget {
                Err(format!("took {took:?}, budget {budget:?}"))
            } else {
                Ok(())
            }
        });
        match result {
            Ok(()) => println!("criterion {:>2} PASS  {name} ({:.2}s)", i + 1, took.as_secs_f64()),
            Err(e) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({:.2}s): {e}", i + 1, took.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
