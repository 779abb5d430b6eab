//! The `nikwb` workbench: every command reads JSON or s-expression inputs,
//! runs one library operation and prints a deterministic report.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use nikodym::blocks::BlockGenerator;
use nikodym::classify::{classify_density, classify_summable, simple_density_check, Verdict};
use nikodym::disjoint::{an_to_density, an_to_positive, disjointify};
use nikodym::expr::SeqFn;
use nikodym::extract::submeasure_to_an;
use nikodym::ideal::{max_merge_exh_probe, membership, IdealSpec, MembershipVerdict};
use nikodym::katetov::density::{build_reduction_density, domination_reduction, reduce_to_phi, tukey_map};
use nikodym::katetov::reduction::ReductionTable;
use nikodym::katetov::refute::{collapsing_table, refute_reduction, spreading_table};
use nikodym::katetov::successor::successor;
use nikodym::katetov::transport::{transport, verify_transport};
use nikodym::katetov::verify::{verify_reduction, ReductionVerdict};
use nikodym::rational::{parse_q, to_canonical};
use nikodym::sequences::{verify_an, FilterContext, MeasureSeq};
use nikodym::setspec::SetSpec;
use nikodym::submeasure::{nonpathology_defect, FiniteTable, SubmeasureSpec};
use nikodym::{Error, FinMeasure, NonNegMeasure, Q};

/// Arrays longer than this are shortened in reports unless `--full` is given.
pub const ELIDE_LEN: usize = 256;
const ELIDE_HEAD: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Args)]
pub struct Config {
    #[arg(long, global = true, default_value_t = 64)]
    pub horizon: u64,
    #[arg(long, global = true, default_value = "1/1000000")]
    pub tolerance: String,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Keep long arrays in the report.
    #[arg(long, global = true)]
    pub full: bool,
}

#[derive(Debug, Parser)]
#[command(name = "nikwb", version, about = "Exact workbench for density ideals, AN-sequences and Katětov reductions")]
pub struct Cli {
    #[command(flatten)]
    pub config: Config,
    #[command(subcommand)]
    pub command: Command,
}

/// Inputs are file paths, `-` for stdin, or inline JSON.
#[derive(Debug, Subcommand)]
pub enum Command {
    /// Greedy transport from λ to μ with the subset-error check.
    Transport {
        #[arg(long)]
        lambda: String,
        #[arg(long)]
        mu: String,
        /// Defaults to the tolerance.
        #[arg(long)]
        eps: Option<String>,
    },
    /// Density reduction between generators, by domination of `g` and `h`,
    /// or a check of a given map against test sets.
    Reduce {
        #[arg(long, requires = "mu")]
        lambda: Option<String>,
        #[arg(long)]
        mu: Option<String>,
        #[arg(long, requires = "h")]
        g: Option<String>,
        #[arg(long)]
        h: Option<String>,
        #[arg(long, requires_all = ["source", "target"])]
        map: Option<String>,
        #[arg(long)]
        source: Option<String>,
        #[arg(long)]
        target: Option<String>,
        #[arg(long = "test")]
        tests: Vec<String>,
    },
    /// A map from the density ideal of the generator onto some Φ(f).
    Phi {
        #[arg(long)]
        generator: String,
    },
    /// Checks the AN conditions on a measure sequence.
    VerifyAn {
        #[arg(long)]
        seq: String,
        #[arg(long)]
        ideal: Option<String>,
        #[arg(long = "sample")]
        samples: Vec<String>,
    },
    /// Disjointly supported (or positive, or density) AN-sequence.
    Disjointify {
        #[arg(long)]
        seq: String,
        #[arg(long)]
        ideal: Option<String>,
        #[arg(long = "sample")]
        samples: Vec<String>,
        #[arg(long, value_enum, default_value_t = Mode::Disjoint)]
        mode: Mode,
    },
    /// AN-sequence from an unbounded submeasure.
    ExtractAn {
        #[arg(long)]
        submeasure: String,
        #[arg(long, default_value_t = 2)]
        count: usize,
        /// Largest right end tried when searching each interval.
        #[arg(long, default_value_t = 1 << 16)]
        search_limit: u64,
    },
    /// Whether an ideal or generator yields an AN-sequence.
    Classify {
        #[arg(long, conflicts_with = "generator")]
        ideal: Option<String>,
        #[arg(long)]
        generator: Option<String>,
    },
    /// Membership of a set in an ideal, with a witness.
    Membership {
        #[arg(long)]
        ideal: String,
        #[arg(long)]
        set: String,
    },
    /// Witness search against a finite-to-one map into Φ(f).
    Refute {
        #[arg(long)]
        f: String,
        /// A table, or `collapse` / `spread` for the built-in maps.
        #[arg(long)]
        map: String,
    },
    /// LP non-pathology defect of a finite submeasure table.
    Nonpath {
        #[arg(long)]
        table: String,
        #[arg(long)]
        set: Option<String>,
    },
    /// Successor construction for f with hypothesis checks and a certificate.
    Successor {
        #[arg(long)]
        f: String,
    },
    /// Tukey map from a density ideal into some Φ(f), optionally replayed against Φ(h).
    Tukey {
        #[arg(long)]
        generator: String,
        /// Replays the domination step against this function.
        #[arg(long)]
        h: Option<String>,
    },
    /// Probes the max-merge of two ideals on test sets.
    MergeProbe {
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        #[arg(long = "test")]
        tests: Vec<String>,
    },
    /// Re-runs a saved JSON report and compares the results.
    Replay {
        #[arg(long)]
        report: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Disjoint,
    Positive,
    Density,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Disjoint => "disjoint",
            Mode::Positive => "positive",
            Mode::Density => "density",
        }
    }
}

/// A command with its inputs resolved to JSON; reports embed it verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub command: String,
    pub input: Map<String, Value>,
    pub horizon: u64,
    pub tolerance: Q,
    pub seed: u64,
}

#[derive(Debug)]
pub enum Failure {
    Input(String),
    /// Well-formed input that violates a construction invariant.
    Validation(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome = Result<(u8, Value), Failure>;

fn load_text(arg: &str) -> Result<String, Failure> {
    let t = arg.trim_start();
    if t.starts_with('{') || t.starts_with('[') || t.starts_with('"') {
        return Ok(arg.to_string());
    }
    if arg == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| Failure::Input(format!("stdin: {e}")))?;
        return Ok(s);
    }
    std::fs::read_to_string(arg).map_err(|e| Failure::Input(format!("{arg}: {e}")))
}

fn load_json(arg: &str) -> Result<Value, Failure> {
    let text = load_text(arg)?;
    serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{arg}: line {} column {}: {e}", e.line(), e.column())))
}

fn typed<T: serde::de::DeserializeOwned>(input: &Map<String, Value>, key: &str) -> Result<T, Failure> {
    let v = input.get(key).ok_or_else(|| Failure::Input(format!("missing input `{key}`")))?;
    serde_json::from_value(v.clone()).map_err(|e| Failure::Validation(format!("{key}: {e}")))
}

fn typed_opt<T: serde::de::DeserializeOwned>(input: &Map<String, Value>, key: &str) -> Result<Option<T>, Failure> {
    match input.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(_) => typed(input, key).map(Some),
    }
}

fn expr(input: &Map<String, Value>, key: &str) -> Result<SeqFn, Failure> {
    let s: String = typed(input, key)?;
    Ok(SeqFn::parse(&s)?)
}

fn nonneg(input: &Map<String, Value>, key: &str) -> Result<NonNegMeasure, Failure> {
    let m: FinMeasure = typed(input, key)?;
    Ok(NonNegMeasure::new(m)?)
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

impl Request {
    pub fn from_cli(cli: &Cli) -> Result<Request, Failure> {
        let c = &cli.config;
        if c.horizon == 0 {
            return Err(Failure::Input("horizon must be at least 1".into()));
        }
        let tolerance = parse_q(&c.tolerance).map_err(|e| Failure::Input(format!("tolerance: {e}")))?;
        if tolerance <= Q::from_integer(0.into()) {
            return Err(Failure::Input("tolerance must be positive".into()));
        }
        let mut input = Map::new();
        fn put_json(input: &mut Map<String, Value>, k: &str, v: &Option<String>) -> Result<(), Failure> {
            if let Some(v) = v {
                input.insert(k.into(), load_json(v)?);
            }
            Ok(())
        }
        let name = match &cli.command {
            Command::Transport { lambda, mu, eps } => {
                put_json(&mut input, "lambda", &Some(lambda.clone()))?;
                put_json(&mut input, "mu", &Some(mu.clone()))?;
                if let Some(e) = eps {
                    input.insert("eps".into(), json!(e));
                }
                "transport"
            }
            Command::Reduce { lambda, mu, g, h, map, source, target, tests } => {
                put_json(&mut input, "lambda", lambda)?;
                put_json(&mut input, "mu", mu)?;
                put_json(&mut input, "map", map)?;
                put_json(&mut input, "source", source)?;
                put_json(&mut input, "target", target)?;
                for (k, v) in [("g", g), ("h", h)] {
                    if let Some(v) = v {
                        input.insert(k.into(), json!(v));
                    }
                }
                if !tests.is_empty() {
                    input.insert("tests".into(), Value::Array(tests.iter().map(|t| load_json(t)).collect::<Result<_, _>>()?));
                }
                "reduce"
            }
            Command::Phi { generator } => {
                put_json(&mut input, "generator", &Some(generator.clone()))?;
                "phi"
            }
            Command::VerifyAn { seq, ideal, samples } | Command::Disjointify { seq, ideal, samples, .. } => {
                put_json(&mut input, "seq", &Some(seq.clone()))?;
                put_json(&mut input, "ideal", ideal)?;
                if !samples.is_empty() {
                    input.insert("samples".into(), Value::Array(samples.iter().map(|t| load_json(t)).collect::<Result<_, _>>()?));
                }
                if let Command::Disjointify { mode, .. } = &cli.command {
                    input.insert("mode".into(), json!(mode.name()));
                    "disjointify"
                } else {
                    "verify-an"
                }
            }
            Command::ExtractAn { submeasure, count, search_limit } => {
                put_json(&mut input, "submeasure", &Some(submeasure.clone()))?;
                input.insert("count".into(), json!(count));
                input.insert("search_limit".into(), json!(search_limit));
                "extract-an"
            }
            Command::Classify { ideal, generator } => {
                if ideal.is_none() && generator.is_none() {
                    return Err(Failure::Input("classify needs --ideal or --generator".into()));
                }
                put_json(&mut input, "ideal", ideal)?;
                put_json(&mut input, "generator", generator)?;
                "classify"
            }
            Command::Membership { ideal, set } => {
                put_json(&mut input, "ideal", &Some(ideal.clone()))?;
                put_json(&mut input, "set", &Some(set.clone()))?;
                "membership"
            }
            Command::Refute { f, map } => {
                input.insert("f".into(), json!(f));
                match map.as_str() {
                    "collapse" | "spread" => {
                        input.insert("map".into(), json!(map));
                    }
                    _ => put_json(&mut input, "map", &Some(map.clone()))?,
                }
                "refute"
            }
            Command::Nonpath { table, set } => {
                put_json(&mut input, "table", &Some(table.clone()))?;
                put_json(&mut input, "set", set)?;
                "nonpath"
            }
            Command::Successor { f } => {
                input.insert("f".into(), json!(f));
                "successor"
            }
            Command::Tukey { generator, h } => {
                put_json(&mut input, "generator", &Some(generator.clone()))?;
                if let Some(h) = h {
                    input.insert("h".into(), json!(h));
                }
                "tukey"
            }
            Command::MergeProbe { left, right, tests } => {
                put_json(&mut input, "left", &Some(left.clone()))?;
                put_json(&mut input, "right", &Some(right.clone()))?;
                input.insert("tests".into(), Value::Array(tests.iter().map(|t| load_json(t)).collect::<Result<_, _>>()?));
                "merge-probe"
            }
            Command::Replay { report } => {
                input.insert("report".into(), load_json(report)?);
                "replay"
            }
        };
        Ok(Request { command: name.into(), input, horizon: c.horizon, tolerance, seed: c.seed })
    }

    /// Rebuilds a request from the header of a saved report.
    pub fn from_report(report: &Value) -> Result<Request, Failure> {
        let bad = |what: &str| Failure::Input(format!("report: missing or malformed `{what}`"));
        let command = report.get("command").and_then(Value::as_str).ok_or_else(|| bad("command"))?;
        let cfg = report.get("config").ok_or_else(|| bad("config"))?;
        let horizon = cfg.get("horizon").and_then(Value::as_u64).ok_or_else(|| bad("config.horizon"))?;
        let seed = cfg.get("seed").and_then(Value::as_u64).ok_or_else(|| bad("config.seed"))?;
        let tol = cfg.get("tolerance").and_then(Value::as_str).ok_or_else(|| bad("config.tolerance"))?;
        let tolerance = parse_q(tol).map_err(|_| bad("config.tolerance"))?;
        let input = report.get("input").and_then(Value::as_object).ok_or_else(|| bad("input"))?.clone();
        if command == "replay" {
            return Err(Failure::Input("a replay report cannot be replayed".into()));
        }
        Ok(Request { command: command.into(), input, horizon, tolerance, seed })
    }

    fn context(&self) -> Result<FilterContext, Failure> {
        let samples: Vec<SetSpec> = typed_opt(&self.input, "samples")?.unwrap_or_default();
        Ok(match typed_opt::<IdealSpec>(&self.input, "ideal")? {
            Some(ideal) => FilterContext::with_defaults(ideal, samples, self.horizon, &self.tolerance)?,
            None if samples.is_empty() => FilterContext::frechet(self.horizon, &self.tolerance)?,
            None => FilterContext::new(IdealSpec::Fin, samples, self.horizon, &self.tolerance)?,
        })
    }

    pub fn execute(&self) -> Outcome {
        let (h, tol, seed, inp) = (self.horizon, &self.tolerance, self.seed, &self.input);
        match self.command.as_str() {
            "transport" => {
                let (lam, mu) = (nonneg(inp, "lambda")?, nonneg(inp, "mu")?);
                let eps = match typed_opt::<String>(inp, "eps")? {
                    Some(e) => parse_q(&e).map_err(|e| Failure::Input(format!("eps: {e}")))?,
                    None => tol.clone(),
                };
                let t = transport(&lam, &mu, &eps)?;
                let check = verify_transport(&lam, &mu, &t, &eps, seed)?;
                let code = if check.within && check.parts_ok { 0 } else { 1 };
                Ok((code, json!({ "eps": to_canonical(&eps), "transport": to_value(&t), "check": to_value(&check) })))
            }
            "reduce" => {
                if inp.contains_key("map") {
                    let map: ReductionTable = typed(inp, "map")?;
                    let source: IdealSpec = typed(inp, "source")?;
                    let target: IdealSpec = typed(inp, "target")?;
                    let tests: Vec<SetSpec> = typed_opt(inp, "tests")?.unwrap_or_default();
                    let r = verify_reduction(&map, &source, &target, &tests, h, tol)?;
                    let code = match r.verdict {
                        ReductionVerdict::Refuted { .. } => 1,
                        ReductionVerdict::NoCounterexample { .. } => 2,
                    };
                    return Ok((code, to_value(&r)));
                }
                if inp.contains_key("g") {
                    let r = domination_reduction(&expr(inp, "g")?, &expr(inp, "h")?, h, seed)?;
                    let code = if r.reduction.certificate.holds() { 0 } else { 1 };
                    return Ok((code, to_value(&r)));
                }
                let lam: BlockGenerator = typed(inp, "lambda")?;
                let mu: BlockGenerator = typed(inp, "mu")?;
                let r = build_reduction_density(&lam, &mu, h, seed)?;
                Ok((if r.certificate.holds() { 0 } else { 1 }, to_value(&r)))
            }
            "phi" => {
                let r = reduce_to_phi(&typed(inp, "generator")?, h, seed)?;
                Ok((if r.reduction.certificate.holds() { 0 } else { 1 }, to_value(&r)))
            }
            "verify-an" => {
                let seq: MeasureSeq = typed(inp, "seq")?;
                let r = verify_an(&seq, &self.context()?, h)?;
                let code = if r.all_pass() {
                    0
                } else if r.any_fail() {
                    1
                } else {
                    2
                };
                Ok((code, to_value(&r)))
            }
            "disjointify" => {
                let seq: MeasureSeq = typed(inp, "seq")?;
                let ctx = self.context()?;
                let mode: String = typed(inp, "mode")?;
                Ok((
                    0,
                    match mode.as_str() {
                        "disjoint" => to_value(&disjointify(&seq, &ctx, h)?),
                        "positive" => to_value(&an_to_positive(&seq, &ctx, h)?),
                        "density" => to_value(&an_to_density(&seq, &ctx, h, tol)?),
                        m => return Err(Failure::Input(format!("unknown mode `{m}`"))),
                    },
                ))
            }
            "extract-an" => {
                let phi: SubmeasureSpec = typed(inp, "submeasure")?;
                let count: usize = typed(inp, "count")?;
                let limit: u64 = typed(inp, "search_limit")?;
                Ok((0, to_value(&submeasure_to_an(&phi, count, limit, seed)?)))
            }
            "classify" => {
                let verdict_code = |v: Verdict| match v {
                    Verdict::InAN => 0,
                    Verdict::NotInAN => 1,
                    Verdict::Undetermined => 2,
                };
                if let Some(g) = typed_opt::<BlockGenerator>(inp, "generator")? {
                    let c = classify_density(&g, h)?;
                    return Ok((verdict_code(c.verdict), to_value(&c)));
                }
                let ideal: IdealSpec = typed(inp, "ideal")?;
                match &ideal {
                    IdealSpec::Summable { f } | IdealSpec::Exh { submeasure: SubmeasureSpec::Summable { weight: f } } => {
                        let c = classify_summable(f, h)?;
                        Ok((verdict_code(c.verdict), to_value(&c)))
                    }
                    IdealSpec::SimpleDensity { f } => {
                        let s = simple_density_check(f, h)?;
                        let c = classify_density(&BlockGenerator::phi(f.clone()), h)?;
                        Ok((verdict_code(c.verdict), json!({ "simple_density": to_value(&s), "classification": to_value(&c) })))
                    }
                    _ => {
                        let g = match ideal.submeasure() {
                            Some(SubmeasureSpec::AsymptoticDensity) => Some(BlockGenerator::AsymptoticDensity),
                            _ => ideal.generator(),
                        };
                        let g = g.ok_or(Error::NotBlockStructured)?;
                        let c = classify_density(&g, h)?;
                        Ok((verdict_code(c.verdict), to_value(&c)))
                    }
                }
            }
            "membership" => {
                let v = membership(&typed(inp, "ideal")?, &typed(inp, "set")?, h, tol)?;
                let code = match v {
                    MembershipVerdict::In { .. } => 0,
                    MembershipVerdict::NotIn { .. } => 1,
                    MembershipVerdict::Undetermined { .. } => 2,
                };
                Ok((code, to_value(&v)))
            }
            "refute" => {
                let f = expr(inp, "f")?;
                let map = match inp.get("map").and_then(Value::as_str) {
                    Some("collapse") => collapsing_table(&f, h)?,
                    Some("spread") => spreading_table(&f, h)?,
                    Some(other) => return Err(Failure::Input(format!("unknown built-in map `{other}`"))),
                    None => typed(inp, "map")?,
                };
                let r = refute_reduction(&f, &map, h)?;
                let found = match r.chosen {
                    Some(1) => r.case1.as_ref(),
                    Some(_) => r.case2.as_ref(),
                    None => None,
                };
                let code = if found.is_some_and(|w| w.checks_pass) { 1 } else { 2 };
                Ok((code, to_value(&r)))
            }
            "nonpath" => {
                let table: FiniteTable = typed(inp, "table")?;
                let set: Vec<u64> = typed_opt(inp, "set")?.unwrap_or_else(|| table.ground().to_vec());
                let d = nonpathology_defect(&table, &set)?;
                Ok((if d.defect == Q::from_integer(0.into()) { 0 } else { 1 }, to_value(&d)))
            }
            "successor" => {
                let s = successor(&expr(inp, "f")?, h, seed)?;
                Ok((if s.certificate_holds() { 0 } else { 1 }, to_value(&s)))
            }
            "tukey" => {
                let t = tukey_map(&typed(inp, "generator")?, h, seed)?;
                let mut out = json!({ "map": to_value(&t) });
                let mut code = if t.phi.reduction.certificate.holds() { 0 } else { 1 };
                if inp.contains_key("h") {
                    let r = t.replay(&expr(inp, "h")?, h, seed)?;
                    if !r.reduction.certificate.holds() {
                        code = 1;
                    }
                    out["replay"] = to_value(&r);
                }
                Ok((code, out))
            }
            "merge-probe" => {
                let tests: Vec<SetSpec> = typed(inp, "tests")?;
                let rows = max_merge_exh_probe(&typed(inp, "left")?, &typed(inp, "right")?, &tests, h, tol)?;
                Ok((0, to_value(&rows)))
            }
            "replay" => {
                let saved = inp.get("report").cloned().unwrap_or(Value::Null);
                let req = Request::from_report(&saved)?;
                let fresh = req.report(req.execute());
                let mut short = fresh.clone();
                elide(&mut short);
                let same = fresh == saved || short == saved;
                Ok((if same { 0 } else { 1 }, json!({ "command": req.command, "identical": same })))
            }
            other => Err(Failure::Input(format!("unknown command `{other}`"))),
        }
    }

    /// The full report for an outcome (before array elision).
    pub fn report(&self, outcome: Outcome) -> Value {
        let mut r = Map::new();
        r.insert("command".into(), json!(self.command));
        r.insert(
            "config".into(),
            json!({ "horizon": self.horizon, "tolerance": to_canonical(&self.tolerance), "seed": self.seed }),
        );
        r.insert("input".into(), Value::Object(self.input.clone()));
        match outcome {
            Ok((code, result)) => {
                r.insert("exit_code".into(), json!(code));
                r.insert("status".into(), json!(status_name(code)));
                r.insert("result".into(), result);
            }
            Err(f) => {
                let (code, kind, message) = failure_parts(&f);
                r.insert("exit_code".into(), json!(code));
                r.insert("status".into(), json!(status_name(code)));
                r.insert("error".into(), json!({ "kind": kind, "message": message }));
            }
        }
        Value::Object(r)
    }
}

fn status_name(code: u8) -> &'static str {
    match code {
        0 => "positive",
        1 => "negative",
        2 => "inconclusive",
        _ => "error",
    }
}

fn error_kind(e: &Error) -> String {
    let d = format!("{e:?}");
    d.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default().to_string()
}

/// Exit code, error kind and message. Errors that are mathematical
/// verdicts count as negative outcomes rather than input errors.
fn failure_parts(f: &Failure) -> (u8, String, String) {
    match f {
        Failure::Input(m) => (3, "ParseError".into(), m.clone()),
        Failure::Validation(m) => (3, "ValidationError".into(), m.clone()),
        Failure::Core(e) => {
            let code = match e {
                Error::BoundedSubmeasure { .. }
                | Error::HypothesisFails { .. }
                | Error::ConditionFails(_)
                | Error::NotAnIdeal(_)
                | Error::AtomConditionFails(_)
                | Error::DominationFails(_)
                | Error::NormTooSmall(_)
                | Error::NotPseudoUnion(_)
                | Error::InconsistentVerdicts(_) => 1,
                Error::HorizonExhausted { .. } => 2,
                _ => 3,
            };
            (code, error_kind(e), e.to_string())
        }
    }
}

fn elide(v: &mut Value) {
    match v {
        Value::Array(xs) if xs.len() > ELIDE_LEN => {
            let len = xs.len();
            let mut head: Vec<Value> = xs.drain(..ELIDE_HEAD).collect();
            head.iter_mut().for_each(elide);
            *v = json!({ "elided_array": { "len": len, "head": head } });
        }
        Value::Array(xs) => xs.iter_mut().for_each(elide),
        Value::Object(m) => m.values_mut().for_each(elide),
        _ => {}
    }
}

fn render_text(v: &Value, path: &str, out: &mut BTreeMap<usize, String>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                render_text(x, &p, out);
            }
        }
        Value::Array(xs) if xs.is_empty() => {
            out.insert(out.len(), format!("{path} = []"));
        }
        Value::Array(xs) => {
            for (i, x) in xs.iter().enumerate() {
                render_text(x, &format!("{path}[{i}]"), out);
            }
        }
        Value::String(s) => {
            out.insert(out.len(), format!("{path} = {s}"));
        }
        other => {
            out.insert(out.len(), format!("{path} = {other}"));
        }
    }
}

/// Runs the command line and returns the exit code with the rendered report.
pub fn run(cli: &Cli) -> (u8, String) {
    let (code, mut report) = match Request::from_cli(cli) {
        Ok(req) => {
            let rep = req.report(req.execute());
            let code = rep["exit_code"].as_u64().unwrap_or(3) as u8;
            (code, rep)
        }
        Err(f) => {
            let (code, kind, message) = failure_parts(&f);
            (code, json!({ "exit_code": code, "status": status_name(code), "error": { "kind": kind, "message": message } }))
        }
    };
    if !cli.config.full {
        elide(&mut report);
    }
    let text = match cli.config.format {
        Format::Json => serde_json::to_string_pretty(&report).expect("reports serialize") + "\n",
        Format::Text => {
            let mut lines = BTreeMap::new();
            render_text(&report, "", &mut lines);
            lines.into_values().collect::<Vec<_>>().join("\n") + "\n"
        }
    };
    (code, text)
}

pub fn emit(cli: &Cli, text: &str) -> std::io::Result<()> {
    match &cli.config.out {
        Some(p) => std::fs::write(p, text),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes())
        }
    }
}
