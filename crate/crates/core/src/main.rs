use std::io::Read;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde_json::{json, Value};

use unitprod::error::{Error, Result};
use unitprod::exactnum::{fmt_rational, GroupSpec};
use unitprod::leinartas::{exact_identity, leinartas_decompose, UnitProductRational};
use unitprod::oracle::{compare, expand_sum, hadamard_product, hadamard_subinverse, Truncation, TruncatedSeries};
use unitprod::parse::{parse, parse_with_dim, RationalExpr};
use unitprod::pipeline::{analyze, exit_code_for, AnalyzeOptions, EXIT_CERTIFIED, EXIT_STRUCTURAL};
use unitprod::polyexp::{canonicalize, term_to_pieces, to_partition, PiecewisePolyExp};
use unitprod::precursive::{check_solution, evaluate, vanishing_propagate, PRecursiveSystem, VanishingVerdict};
use unitprod::semilin::{self, SimpleLinearSet};
use unitprod::skewgeom::{restrict_to, subinverse_unambiguous, SkewGeomSum, SkewGeometric};

#[derive(Parser)]
#[command(name = "unitprod", version, about = "Exact analysis of rational series with unit-product denominators")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Total-degree bound for expansions and oracle checks
    #[arg(long, global = true, default_value_t = 12)]
    bound: i64,
    /// Group generators, e.g. "-1,2,3"
    #[arg(long, global = true)]
    group: Option<String>,
    /// Emit JSON on stdout
    #[arg(long, global = true)]
    json: bool,
    /// Run exact rational-identity checks
    #[arg(long, global = true, default_value_t = true, action = ArgAction::Set)]
    exact_verify: bool,
}

/// Expressions are given inline, as `@path`, or as `-` for stdin.
#[derive(Subcommand)]
enum Command {
    /// Power-series coefficients up to the bound
    Expand { expr: String },
    /// Decomposition into terms with independent denominator blocks
    Decompose { expr: String },
    /// Piecewise polynomial-exponential coefficient form
    CoeffForm { expr: String },
    /// Full pipeline with structure verdict and attestations
    #[command(alias = "analyze")]
    Certify {
        expr: String,
        /// Bézivin length to check against
        #[arg(long)]
        r: Option<usize>,
        /// Report zero coefficients up to this total degree
        #[arg(long)]
        zeros: Option<i64>,
    },
    /// Hadamard operations
    Hadamard {
        #[command(subcommand)]
        op: HadamardOp,
    },
    /// Restrict a skew-geometric fraction to a simple linear subset of its support
    Restrict {
        expr: String,
        /// Set literal "offset ; period ; ...", e.g. "0,0 ; 1,1"
        #[arg(long)]
        set: String,
    },
    /// Simple linear set operations
    Sets {
        #[command(subcommand)]
        op: SetsOp,
    },
    /// P-recursive systems given as JSON files
    Prec {
        #[command(subcommand)]
        op: PrecOp,
    },
    /// First coefficient where two expressions differ
    OracleCompare { lhs: String, rhs: String },
}

#[derive(Subcommand)]
enum HadamardOp {
    /// Coefficientwise product up to the bound
    Product { lhs: String, rhs: String },
    /// Coefficientwise reciprocal (0 stays 0)
    Subinverse { expr: String },
}

#[derive(Subcommand)]
enum SetsOp {
    Member {
        set: String,
        #[arg(value_delimiter = ',', allow_hyphen_values = true)]
        point: Vec<i64>,
    },
    Intersect { lhs: String, rhs: String },
    Overlap { sets: Vec<String> },
}

#[derive(Subcommand)]
enum PrecOp {
    /// Value of the system's solution at a point
    Eval {
        system: String,
        #[arg(value_delimiter = ',')]
        point: Vec<i64>,
    },
    /// First recursion instance violated by an expression's coefficients
    Check { system: String, expr: String },
    /// Vanishing propagation from hypothesis strips
    Vanish {
        system: String,
        expr: String,
        #[arg(long)]
        c: i64,
        #[arg(long, value_delimiter = ',')]
        strips: Vec<i64>,
    },
}

struct Output {
    code: i32,
    json: Value,
    text: String,
}

impl Output {
    fn ok(json: Value, text: impl Into<String>) -> Self {
        Output {
            code: EXIT_CERTIFIED,
            json,
            text: text.into(),
        }
    }
}

fn read_source(arg: &str) -> Result<String> {
    if arg == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| Error::input(format!("cannot read stdin: {e}")))?;
        Ok(s)
    } else if let Some(path) = arg.strip_prefix('@') {
        std::fs::read_to_string(path).map_err(|e| Error::input(format!("cannot read {path}: {e}")))
    } else {
        Ok(arg.to_string())
    }
}

fn read_expr(arg: &str) -> Result<RationalExpr> {
    parse(&read_source(arg)?)
}

fn read_pair(lhs: &str, rhs: &str) -> Result<(RationalExpr, RationalExpr)> {
    let (lt, rt) = (read_source(lhs)?, read_source(rhs)?);
    let d = parse(&lt)?.dim.max(parse(&rt)?.dim);
    Ok((parse_with_dim(&lt, d)?, parse_with_dim(&rt, d)?))
}

fn read_system(arg: &str) -> Result<PRecursiveSystem> {
    let text = std::fs::read_to_string(arg).or_else(|_| read_source(arg))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Error::input(format!("system JSON: {e}")))?;
    PRecursiveSystem::from_json(&v)
}

fn series_output(s: &TruncatedSeries) -> Output {
    let text = s.table().unwrap_or_else(|| {
        s.coeffs()
            .iter()
            .map(|(n, c)| format!("{n:?}  {}\n", fmt_rational(c)))
            .collect()
    });
    Output::ok(json!({"coefficients": s.to_json()}), text)
}

fn expand(e: &RationalExpr, bound: i64) -> TruncatedSeries {
    expand_sum(&e.terms, e.dim, &Truncation::total(bound))
}

fn coeff_form(e: &RationalExpr) -> Result<(PiecewisePolyExp, Option<String>)> {
    let mut parts = Vec::new();
    for t in &e.terms {
        for dt in leinartas_decompose(t)? {
            parts.push(term_to_pieces(&dt)?);
        }
    }
    Ok(to_partition(&canonicalize(&PiecewisePolyExp::sum(e.dim, parts))))
}

/// The single skew-geometric fraction an expression denotes.
fn as_skew(e: &RationalExpr) -> Result<SkewGeometric> {
    let [t] = e.terms.as_slice() else {
        return Err(Error::input("expected a single fraction"));
    };
    skew_of(t)
}

fn skew_of(t: &UnitProductRational) -> Result<SkewGeometric> {
    let num = t.numerator();
    if num.len() != 1 || t.blocks().iter().any(|b| b.mult != 1) {
        return Err(Error::input(format!("{t} is not skew-geometric: needs a monomial numerator and simple factors")));
    }
    let (u0, c0) = num.terms().iter().next().expect("one term");
    SkewGeometric::new(
        c0.clone(),
        u0.clone(),
        t.blocks().iter().map(|b| (b.c.clone(), b.e.clone())).collect(),
    )
}

fn run(cli: Cli) -> Result<Output> {
    let g = &cli.global;
    let group = g.group.as_deref().map(GroupSpec::parse).transpose()?;
    Ok(match cli.command {
        Command::Expand { expr } => series_output(&expand(&read_expr(&expr)?, g.bound)),
        Command::Decompose { expr } => {
            let e = read_expr(&expr)?;
            let mut terms = Vec::new();
            for t in &e.terms {
                terms.extend(leinartas_decompose(t)?);
            }
            let rationals: Vec<UnitProductRational> = terms.iter().map(|t| t.rational.clone()).collect();
            let identity = g.exact_verify.then(|| exact_identity(e.dim, &e.terms, &rationals));
            let mut text: String = rationals.iter().map(|r| format!("{r}\n")).collect();
            if let Some(ok) = identity {
                text.push_str(&format!("exact identity: {}\n", if ok { "passed" } else { "FAILED" }));
            }
            let mut out = Output::ok(
                json!({
                    "terms": terms.iter().map(|t| json!({"rational": t.rational.to_json(), "text": t.rational.to_string(), "independent_verified": t.independent_verified})).collect::<Vec<_>>(),
                    "exact_identity": identity,
                }),
                text,
            );
            if identity == Some(false) {
                out.code = EXIT_STRUCTURAL;
            }
            out
        }
        Command::CoeffForm { expr } => {
            let e = read_expr(&expr)?;
            let (p, note) = coeff_form(&e)?;
            let mut text = p.to_string();
            if let Some(n) = &note {
                text.push_str(&format!("note: {n}\n"));
            }
            Output::ok(json!({"form": p.to_json(), "note": note}), text)
        }
        Command::Certify { expr, r, zeros } => {
            let e = read_expr(&expr)?;
            let opts = AnalyzeOptions {
                bound: g.bound,
                group,
                r,
                exact_verify: g.exact_verify,
                zero_scan: zeros,
            };
            let rep = analyze(&e, &opts);
            let mut text = format!("verdict: {}\n", rep.verdict);
            for a in &rep.attestations {
                text.push_str(&format!("  [{}] {}: {}\n", if a.passed { "ok" } else { "FAIL" }, a.stage, a.check));
            }
            if let Some(z) = &rep.zeros {
                text.push_str(&format!("zeros: {z:?}\n"));
            }
            for n in &rep.notes {
                text.push_str(&format!("note: {n}\n"));
            }
            Output {
                code: rep.exit_code,
                json: rep.json,
                text,
            }
        }
        Command::Hadamard { op } => match op {
            HadamardOp::Product { lhs, rhs } => {
                let (a, b) = read_pair(&lhs, &rhs)?;
                series_output(&hadamard_product(&expand(&a, g.bound), &expand(&b, g.bound)))
            }
            HadamardOp::Subinverse { expr } => {
                let e = read_expr(&expr)?;
                let summands = e.terms.iter().map(skew_of).collect::<Result<Vec<_>>>()?;
                let inv = subinverse_unambiguous(&SkewGeomSum::classified(e.dim, summands)?)?;
                let rationals: Vec<UnitProductRational> = inv.summands.iter().map(SkewGeometric::to_rational).collect();
                let t = Truncation::total(g.bound);
                let agrees = compare(&expand_sum(&rationals, e.dim, &t), &hadamard_subinverse(&expand(&e, g.bound))).is_none();
                if !agrees {
                    return Err(Error::verification("sub-inverse disagrees with the oracle"));
                }
                let text = RationalExpr {
                    dim: e.dim,
                    spans: vec![],
                    terms: rationals,
                }
                .to_string();
                Output::ok(json!({"result": inv.to_json(), "text": text, "oracle_agrees": agrees}), text + "\n")
            }
        },
        Command::Restrict { expr, set } => {
            let f = as_skew(&read_expr(&expr)?)?;
            let s = SimpleLinearSet::parse(&set)?;
            if s.dim() != f.dim() {
                return Err(Error::input("set dimension differs from the expression's"));
            }
            let r = restrict_to(&f, &s)?;
            Output::ok(json!({"result": r.to_json(), "text": r.to_string()}), format!("{r}\n"))
        }
        Command::Sets { op } => match op {
            SetsOp::Member { set, point } => {
                let s = SimpleLinearSet::parse(&set)?;
                if point.len() != s.dim() {
                    return Err(Error::input("point dimension differs from the set's"));
                }
                let m = s.member_coords(&point);
                let text = match &m {
                    Some(m) => format!("member, coordinates {m:?}\n"),
                    None => "not a member\n".into(),
                };
                Output::ok(json!({"member": m.is_some(), "coords": m}), text)
            }
            SetsOp::Intersect { lhs, rhs } => {
                let (a, b) = (SimpleLinearSet::parse(&lhs)?, SimpleLinearSet::parse(&rhs)?);
                let i = semilin::intersect_simple(&a, &b)?;
                let text: String = if i.is_empty() {
                    "empty\n".into()
                } else {
                    i.components.iter().map(|c| format!("{c}\n")).collect()
                };
                Output::ok(
                    json!({"components": i.components.iter().map(|c| c.literal()).collect::<Vec<_>>()}),
                    text,
                )
            }
            SetsOp::Overlap { sets } => {
                let sets = sets.iter().map(|s| SimpleLinearSet::parse(s)).collect::<Result<Vec<_>>>()?;
                let (r, idx) = semilin::max_overlap(&sets)?;
                Output::ok(json!({"r": r, "sets": idx}), format!("max overlap {r} at sets {idx:?}\n"))
            }
        },
        Command::Prec { op } => match op {
            PrecOp::Eval { system, point } => {
                let v = evaluate(&read_system(&system)?, &point)?;
                Output::ok(json!({"value": fmt_rational(&v)}), format!("{}\n", fmt_rational(&v)))
            }
            PrecOp::Check { system, expr } => {
                let sys = read_system(&system)?;
                let e = parse_with_dim(&read_source(&expr)?, sys.dim())?;
                let v = check_solution(&sys, &expand(&e, g.bound), g.bound);
                let mut out = Output::ok(
                    json!({"violation": v.as_ref().map(|(j, n)| json!({"recursion": j + 1, "n": n}))}),
                    match &v {
                        None => format!("no violation up to total degree {}\n", g.bound),
                        Some((j, n)) => format!("recursion {} violated at {n:?}\n", j + 1),
                    },
                );
                if v.is_some() {
                    out.code = EXIT_STRUCTURAL;
                }
                out
            }
            PrecOp::Vanish { system, expr, c, strips } => {
                let sys = read_system(&system)?;
                let e = parse_with_dim(&read_source(&expr)?, sys.dim())?;
                let f = expand(&e, g.bound + sys.k());
                let v = vanishing_propagate(&sys, &f, c, &strips, g.bound)?;
                let code = match v {
                    VanishingVerdict::Propagates { .. } => EXIT_CERTIFIED,
                    _ => EXIT_STRUCTURAL,
                };
                let j = v.to_json();
                Output {
                    code,
                    text: format!("{j}\n"),
                    json: j,
                }
            }
        },
        Command::OracleCompare { lhs, rhs } => {
            let (a, b) = read_pair(&lhs, &rhs)?;
            let diff = compare(&expand(&a, g.bound), &expand(&b, g.bound));
            let mut out = Output::ok(
                json!({"difference": diff.as_ref().map(|(n, x, y)| json!({"n": n, "lhs": fmt_rational(x), "rhs": fmt_rational(y)}))}),
                match &diff {
                    None => format!("equal up to total degree {}\n", g.bound),
                    Some((n, x, y)) => format!("differ at {n:?}: {} vs {}\n", fmt_rational(x), fmt_rational(y)),
                },
            );
            if diff.is_some() {
                out.code = EXIT_STRUCTURAL;
            }
            out
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json_mode = cli.global.json;
    match run(cli) {
        Ok(out) => {
            if json_mode {
                println!("{}", serde_json::to_string_pretty(&out.json).expect("serializable"));
            } else {
                print!("{}", out.text);
            }
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            if json_mode {
                println!("{}", json!({"error": e.to_string(), "exit_code": exit_code_for(&e)}));
            }
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
