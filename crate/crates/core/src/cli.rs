//! The `dx` command line.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 precondition violated,
//! 3 budget exceeded, 4 `compare` found a disagreement.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::chase::canonical_solution;
use crate::corelib::{atom_blocks, block_is_packed, blocks_packed, bs, core_solution, is_core};
use crate::error::{Error, Precondition};
use crate::gcwa::{answers_for_mapping, answers_gcwa_star_universal_general, answers_owa_homclosed};
use crate::gen::{Corpus, DEFAULT_SEED};
use crate::logic::{FOQuery, TupleSet};
use crate::minrep::{enum_min_C, enum_min_C_block, BLOCK_CAP};
use crate::model::{Instance, SchemaMapping, Value};
use crate::oracle::{Budget, EmptyCert, Oracle, Semantics};
use crate::textio::{instance_to_string, mapping_to_string, parse_instance, parse_mapping, parse_queries, query_to_string, AnswerDoc, SourceText, TextError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PRECONDITION: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_DISAGREE: i32 = 4;

/// Environment variable holding the seed for `compare --random`.
pub const SEED_VAR: &str = "DX_SEED";

#[derive(Parser, Debug)]
#[command(name = "dx", version, about = "Data exchange: chase, cores, minimal representatives and closed-world query answering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the canonical solution.
    Chase(Exchange),
    /// Print the core solution.
    Core(Exchange),
    /// Print the atom blocks of the core with a packedness report.
    Blocks(CoreInput),
    /// Print the minimal representatives of the core, or of one block.
    Minrep(MinrepArgs),
    /// Answer queries and print one JSON document.
    Eval(EvalArgs),
    /// Check the fast path against the general evaluator and the oracle.
    Compare(CompareArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Exchange {
    /// Mapping file.
    #[arg(short, long)]
    pub mapping: PathBuf,
    /// Source instance file.
    #[arg(short, long)]
    pub source: PathBuf,
    /// Write to this file instead of stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Either a source whose core is taken, or a target instance used as is.
#[derive(Args, Debug, Clone)]
pub struct CoreInput {
    /// Mapping file; supplies the schemas.
    #[arg(short, long)]
    pub mapping: PathBuf,
    /// Source instance file.
    #[arg(short, long, required_unless_present = "target", conflicts_with = "target")]
    pub source: Option<PathBuf>,
    /// Target instance file, possibly with nulls.
    #[arg(short, long)]
    pub target: Option<PathBuf>,
    /// Write to this file instead of stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MinrepArgs {
    #[command(flatten)]
    pub io: CoreInput,
    /// 1-based index of a block as listed by `dx blocks`.
    #[arg(long)]
    pub block: Option<usize>,
    /// Comma-separated constants kept apart from the nulls' images.
    #[arg(long, value_delimiter = ',')]
    pub consts: Vec<String>,
}

#[derive(Args, Debug, Clone)]
pub struct OracleFlags {
    /// Fresh constants in the oracle's universe.
    #[arg(long, default_value_t = Budget::default().fresh_constants)]
    pub budget_fresh: usize,
    /// Largest solution the oracle enumerates.
    #[arg(long, default_value_t = Budget::default().max_atoms)]
    pub budget_atoms: usize,
    /// Closure rounds for target constraints.
    #[arg(long, default_value_t = Budget::default().max_fixpoint_rounds)]
    pub budget_rounds: usize,
}

impl OracleFlags {
    fn budget(&self) -> Budget {
        Budget { fresh_constants: self.budget_fresh, max_atoms: self.budget_atoms, max_fixpoint_rounds: self.budget_rounds }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum EmptyCertArg {
    /// No tuple is certain over an empty family.
    None,
    /// Every candidate tuple is certain over an empty family.
    All,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub io: Exchange,
    /// Query file; every query in it is answered.
    #[arg(short, long)]
    pub query: PathBuf,
    #[arg(long, default_value = "gcwa-star", value_parser = parse_semantics)]
    pub semantics: Semantics,
    /// Allow the brute-force oracle.
    #[arg(long)]
    pub oracle: bool,
    /// Use the oracle even where a polynomial path applies.
    #[arg(long)]
    pub force_oracle: bool,
    /// Fail instead of falling back to the general evaluator.
    #[arg(long)]
    pub no_fallback: bool,
    #[arg(long, value_enum, default_value_t = EmptyCertArg::None)]
    pub empty_cert: EmptyCertArg,
    #[command(flatten)]
    pub budget: OracleFlags,
    /// Add wall-clock times to the metadata.
    #[arg(long)]
    pub timings: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(short, long, required_unless_present = "random")]
    pub mapping: Option<PathBuf>,
    #[arg(short, long, required_unless_present = "random")]
    pub source: Option<PathBuf>,
    #[arg(short, long, required_unless_present = "random")]
    pub query: Option<PathBuf>,
    /// Compare on generated settings seeded from DX_SEED.
    #[arg(long, conflicts_with_all = ["mapping", "source", "query"])]
    pub random: bool,
    /// Number of generated settings.
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    #[command(flatten)]
    pub budget: OracleFlags,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn parse_semantics(s: &str) -> Result<Semantics, String> {
    s.parse()
}

/// A failure with its exit code; the message goes to stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure { code: EXIT_USAGE, message: message.into() }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::UnsupportedSemantics(_) => EXIT_USAGE,
        Error::BudgetExceeded(_) | Error::BlockTooLarge { .. } | Error::FixpointNotReached(_) => EXIT_BUDGET,
        _ => EXIT_PRECONDITION,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure { code: exit_code(&e), message: format!("error: {e}") }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn text_failure(src: &SourceText, e: TextError) -> Failure {
    let e = e.in_file(&src.name);
    let mut message = format!("error: {e}");
    if let Some(x) = src.excerpt(&e) {
        message += &format!("\n{x}");
    }
    Failure::usage(message)
}

fn read(path: &Path) -> Outcome<SourceText> {
    SourceText::read(path).map_err(|e| Failure::usage(format!("error: cannot read {}: {e}", path.display())))
}

fn load_mapping(path: &Path) -> Outcome<SchemaMapping> {
    let src = read(path)?;
    parse_mapping(&src.text).map_err(|e| text_failure(&src, e))
}

fn load_source(path: &Path, m: &SchemaMapping) -> Outcome<Instance> {
    let src = read(path)?;
    let s = parse_instance(&src.text, &m.source).map_err(|e| text_failure(&src, e))?;
    if let Some(n) = s.nulls().into_iter().next() {
        return Err(Error::NotGround(n).into());
    }
    Ok(s)
}

fn load_queries(path: &Path, m: &SchemaMapping) -> Outcome<Vec<FOQuery>> {
    let src = read(path)?;
    let qs = parse_queries(&src.text, &m.target).map_err(|e| text_failure(&src, e))?;
    if qs.is_empty() {
        return Err(Failure::usage(format!("error: {}: no query", src.name)));
    }
    Ok(qs)
}

fn emit(output: &Option<PathBuf>, text: &str, out: &mut dyn Write) -> Outcome<()> {
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::usage(format!("error: cannot write {}: {e}", p.display()))),
        None => out.write_all(text.as_bytes()).map_err(|e| Failure::usage(format!("error: {e}"))),
    }
}

fn tuples_text(ts: &TupleSet) -> String {
    let items: Vec<String> = ts
        .iter()
        .map(|t| format!("({})", t.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")))
        .collect();
    format!("{{{}}}", items.join(", "))
}

fn blocks_report(core: &Instance, m: &SchemaMapping) -> String {
    let p = atom_blocks(core);
    let mut out = String::new();
    for (k, b) in p.blocks.iter().enumerate() {
        let packed = if block_is_packed(b) { "packed" } else { "not packed" };
        out += &format!("# block {} ({} nulls, {packed})\n{}", k + 1, p.null_counts[k], instance_to_string(b));
    }
    out += &format!(
        "# blocks: {}, max nulls per block: {}, bs: {}, packed: {}, core: {}\n",
        p.len(),
        p.max_nulls(),
        bs(m),
        blocks_packed(core),
        is_core(core)
    );
    out
}

/// The mapping and the instance `blocks` and `minrep` work on.
fn load_core(a: &CoreInput) -> Outcome<(SchemaMapping, Instance)> {
    let m = load_mapping(&a.mapping)?;
    let t = match (&a.source, &a.target) {
        (Some(sp), _) => core_solution(&m, &load_source(sp, &m)?)?,
        (None, Some(tp)) => {
            let src = read(tp)?;
            parse_instance(&src.text, &m.target).map_err(|e| text_failure(&src, e))?
        }
        (None, None) => return Err(Failure::usage("error: pass a source (-s) or a target instance (-t)")),
    };
    Ok((m, t))
}

fn minrep(a: &MinrepArgs, out: &mut dyn Write) -> Outcome<()> {
    let (_, core) = load_core(&a.io)?;
    let c: BTreeSet<Value> = a.consts.iter().map(|n| Value::c(n)).collect();
    let set = match a.block {
        None => enum_min_C(&core, &c)?,
        Some(k) => {
            let blocks = atom_blocks(&core).blocks;
            let b = k
                .checked_sub(1)
                .and_then(|i| blocks.get(i))
                .ok_or_else(|| Failure::usage(format!("error: block {k} does not exist, the core has {} blocks", blocks.len())))?;
            enum_min_C_block(&core, b, &c, BLOCK_CAP)?
        }
    };
    let mut text = String::new();
    for (k, r) in set.reps.iter().enumerate() {
        text += &format!("# representative {}\n{}", k + 1, instance_to_string(r));
    }
    emit(&a.io.output, &text, out)
}

/// How a set of answers was obtained.
struct Answered {
    answers: TupleSet,
    path: &'static str,
    budget: Option<Budget>,
    diagnostics: Vec<String>,
}

fn fast_or_general(m: &SchemaMapping, s: &Instance, q: &FOQuery, no_fallback: bool, err: &mut dyn Write) -> Outcome<Answered> {
    match answers_for_mapping(m, s, q) {
        Ok(answers) => Ok(Answered { answers, path: "fast", budget: None, diagnostics: Vec::new() }),
        Err(e @ (Error::PreconditionViolated(Precondition::NotPacked | Precondition::NotCore) | Error::BlockTooLarge { .. }))
            if !no_fallback =>
        {
            let note = format!("fast path not applicable ({e}); using the general evaluator");
            let _ = writeln!(err, "warning: {note}");
            let answers = answers_gcwa_star_universal_general(m, s, q)?;
            Ok(Answered { answers, path: "general", budget: None, diagnostics: vec![note] })
        }
        Err(e) => Err(e.into()),
    }
}

fn answer(a: &EvalArgs, m: &SchemaMapping, s: &Instance, q: &FOQuery, err: &mut dyn Write) -> Outcome<Answered> {
    let use_oracle = a.force_oracle || (a.oracle && !(a.semantics == Semantics::GcwaStar && q.is_universal() && m.is_st_tgd_only()));
    if !use_oracle {
        if a.semantics != Semantics::GcwaStar {
            return Err(Failure::usage(format!("error: semantics {} needs --oracle", a.semantics)));
        }
        if !m.is_st_tgd_only() {
            return Err(Failure::usage("error: the mapping has egds or constraints; gcwa-star needs --oracle"));
        }
        if q.is_universal() {
            return fast_or_general(m, s, q, a.no_fallback, err);
        }
        if q.is_ucq() {
            let answers = answers_owa_homclosed(&core_solution(m, s)?, q)?;
            return Ok(Answered { answers, path: "homclosed", budget: None, diagnostics: Vec::new() });
        }
        return Err(Failure::usage(format!("error: query {} is neither universal nor a union of conjunctive queries; pass --oracle", q.name)));
    }
    let empty = match a.empty_cert {
        EmptyCertArg::None => EmptyCert::Empty,
        EmptyCertArg::All => EmptyCert::All,
    };
    let budget = a.budget.budget();
    let r = Oracle::new(m, s, budget, &q.dom()).answers(q, a.semantics, empty)?;
    Ok(Answered { answers: r.answers, path: "oracle", budget: Some(budget), diagnostics: r.diagnostics })
}

fn budget_json(b: &Budget) -> serde_json::Value {
    json!({"fresh_constants": b.fresh_constants, "max_atoms": b.max_atoms, "max_fixpoint_rounds": b.max_fixpoint_rounds})
}

fn eval(a: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> Outcome<()> {
    let m = load_mapping(&a.io.mapping)?;
    let s = load_source(&a.io.source, &m)?;
    let qs = load_queries(&a.query, &m)?;
    let mut docs = Vec::new();
    let mut text = String::new();
    for q in &qs {
        let start = Instant::now();
        let r = answer(a, &m, &s, q, err)?;
        let mut meta = json!({"path": r.path});
        if let Some(b) = &r.budget {
            meta["budget"] = budget_json(b);
        }
        if !r.diagnostics.is_empty() {
            meta["diagnostics"] = json!(r.diagnostics);
        }
        if a.timings {
            meta["timings"] = json!({"seconds": start.elapsed().as_secs_f64()});
        }
        match a.format {
            Format::Json => {
                docs.push(AnswerDoc::new(&q.name, a.semantics.name(), &r.answers, &meta));
            }
            Format::Text => {
                text += &format!("{} [{}, {}]: {}\n", q.name, a.semantics, r.path, tuples_text(&r.answers));
                for d in &r.diagnostics {
                    text += &format!("  note: {d}\n");
                }
            }
        }
    }
    if a.format == Format::Json {
        text = if docs.len() == 1 {
            serde_json::to_string_pretty(&docs[0])
        } else {
            serde_json::to_string_pretty(&docs)
        }
        .expect("answer documents serialize")
            + "\n";
    }
    emit(&a.io.output, &text, out)
}

/// Outcome of one comparison. Errors are rendered as text.
fn compare_one(m: &SchemaMapping, s: &Instance, q: &FOQuery, base: Budget) -> (String, bool) {
    let show = |r: &Result<TupleSet, Error>| match r {
        Ok(ts) => tuples_text(ts),
        Err(e) => format!("error: {e}"),
    };
    let fast = answers_for_mapping(m, s, q);
    let general = answers_gcwa_star_universal_general(m, s, q);
    let oracle = core_solution(m, s).and_then(|core| {
        let b = base.for_query(q, &core);
        Oracle::new(m, s, b, &q.dom()).answers(q, Semantics::GcwaStar, EmptyCert::Empty).map(|a| a.answers)
    });
    let results: Vec<&TupleSet> = [&fast, &general, &oracle].into_iter().filter_map(|r| r.as_ref().ok()).collect();
    let agree = results.len() >= 2 && results.windows(2).all(|w| w[0] == w[1]);
    let text = format!("fast: {}\ngeneral: {}\noracle: {}\n", show(&fast), show(&general), show(&oracle));
    (text, agree)
}

fn compare(a: &CompareArgs, out: &mut dyn Write) -> Outcome<i32> {
    let base = a.budget.budget();
    let mut report = String::new();
    let mut all_agree = true;
    if a.random {
        let seed = match std::env::var(SEED_VAR) {
            Ok(v) => v.trim().parse::<u64>().map_err(|_| Failure::usage(format!("error: {SEED_VAR} must be an unsigned integer, got {v:?}")))?,
            Err(_) => DEFAULT_SEED,
        };
        let mut corpus = Corpus::new(seed);
        let mut agreed = 0;
        for k in 0..a.count {
            let t = corpus.universal_triple();
            let (text, agree) = compare_one(&t.mapping, &t.source, &t.query, base);
            if agree {
                agreed += 1;
            } else {
                all_agree = false;
                report += &format!(
                    "# setting {k}\n{}{}{}{text}\n",
                    mapping_to_string(&t.mapping),
                    instance_to_string(&t.source),
                    query_to_string(&t.query)
                );
            }
        }
        report += &format!("seed: {seed}\nsettings: {}\nagreed: {agreed}\nagree: {all_agree}\n", a.count);
    } else {
        let (mp, sp, qp) = (a.mapping.as_ref(), a.source.as_ref(), a.query.as_ref());
        let (Some(mp), Some(sp), Some(qp)) = (mp, sp, qp) else {
            return Err(Failure::usage("error: compare needs -m, -s and -q, or --random"));
        };
        let m = load_mapping(mp)?;
        let s = load_source(sp, &m)?;
        for q in load_queries(qp, &m)? {
            if !q.is_universal() {
                return Err(Error::PreconditionViolated(Precondition::NotUniversal).into());
            }
            let (text, agree) = compare_one(&m, &s, &q, base);
            all_agree &= agree;
            report += &format!("query: {}\n{text}", q.name);
        }
        report += &format!("agree: {all_agree}\n");
    }
    emit(&a.output, &report, out)?;
    Ok(if all_agree { EXIT_OK } else { EXIT_DISAGREE })
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Outcome<i32> {
    match &cli.command {
        Command::Chase(a) => {
            let m = load_mapping(&a.mapping)?;
            let s = load_source(&a.source, &m)?;
            emit(&a.output, &instance_to_string(&canonical_solution(&m, &s)?), out)?;
        }
        Command::Core(a) => {
            let m = load_mapping(&a.mapping)?;
            let s = load_source(&a.source, &m)?;
            emit(&a.output, &instance_to_string(&core_solution(&m, &s)?), out)?;
        }
        Command::Blocks(a) => {
            let (m, t) = load_core(a)?;
            emit(&a.output, &blocks_report(&t, &m), out)?;
        }
        Command::Minrep(a) => minrep(a, out)?,
        Command::Eval(a) => eval(a, out, err)?,
        Command::Compare(a) => return compare(a, out),
    }
    Ok(EXIT_OK)
}

/// Runs `dx` with the given arguments (program name first).
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(rendered.as_bytes()) } else { out.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "{}", f.message);
            f.code
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn dx(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_with(std::iter::once("dx").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    fn scratch_dir(tag: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("dx-cli-unit-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&d).unwrap();
        d
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes_by_error() {
        assert_eq!(exit_code(&Error::BudgetExceeded("x".into())), EXIT_BUDGET);
        assert_eq!(exit_code(&Error::BlockTooLarge { nulls: 9, limit: 8 }), EXIT_BUDGET);
        assert_eq!(exit_code(&Error::PreconditionViolated(Precondition::NotPacked)), EXIT_PRECONDITION);
        assert_eq!(exit_code(&Error::UnsupportedSemantics("pws".into())), EXIT_USAGE);
    }

    #[test]
    fn copy_eval_and_parse_error() {
        let d = scratch_dir("copy");
        let m = write(&d, "copy.dx", "source R/2. target Rp/2. tgd R(x,y) -> Rp(x,y).");
        let s = write(&d, "s.inst", "R(a,b).");
        let q = write(&d, "q.q", "q(x,y) := Rp(x,y) /\\ forall z: Rp(x,z) -> z = y.");
        let (code, out, _) = dx(&["eval", "-m", m.to_str().unwrap(), "-s", s.to_str().unwrap(), "-q", q.to_str().unwrap()]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["answers"], json!([["a", "b"]]));
        assert_eq!(v["meta"]["path"], "fast");

        let bad = write(&d, "bad.inst", "R(a).");
        let (code, _, err) = dx(&["core", "-m", m.to_str().unwrap(), "-s", bad.to_str().unwrap()]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("arity mismatch"), "{err}");
        assert!(err.contains("R(a)."), "{err}");
    }

    #[test]
    fn usage_errors() {
        assert_eq!(dx(&[]).0, EXIT_USAGE);
        assert_eq!(dx(&["eval", "-m", "x"]).0, EXIT_USAGE);
        assert_eq!(dx(&["--help"]).0, EXIT_OK);
    }
}
