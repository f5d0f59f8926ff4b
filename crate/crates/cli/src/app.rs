use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use acwb_core::compiler::{compile_certificate, CompileError};
use acwb_core::handles::{
    build_handle_structure, enumerate_choices, sticky_end, surface_invariants, AttachmentChoice, HandleStructure,
};
use acwb_core::moves::{canonical_form, normal_form, normal_form_relabeled, verify_certificate, Certificate};
use acwb_core::recognizer::{recognize, Exhaustion, OracleConfig, VerdictKind};
use acwb_core::search::{scramble, trivialization_search_with_cancel, SearchBounds, SearchOutcome, Strategy};
use acwb_core::topology::Invariants;
use acwb_core::{abelianization_matrix, parse_presentation, smith_normal_form, IntegerMatrix, Presentation};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::corpus;
use crate::report;

static INTERRUPTED: AtomicBool = AtomicBool::new(false);

#[derive(Debug, Parser)]
#[command(
    name = "acwb",
    version,
    about = "Andrews-Curtis workbench: presentations, handle structures, search and recognition"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

/// Presentation arguments are literal `<...>` text, a corpus entry name, or
/// a path to a file holding the presentation.
#[derive(Debug, Args)]
struct GlobalArgs {
    /// Maximum search depth [default: 12]
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Maximum relator length during search [default: 14]
    #[arg(long, global = true)]
    maxlen: Option<usize>,
    /// Maximum number of visited states [default: 1000000]
    #[arg(long, global = true)]
    max_states: Option<usize>,
    /// Memory budget for search, e.g. 512M or 2G [default: 1G]
    #[arg(long, global = true)]
    mem: Option<String>,
    /// Worker threads [default: all cores]
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for scrambling [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of attachment choices to try or list [default: 8]
    #[arg(long, global = true)]
    choices: Option<usize>,
    /// Oracles used by the recognizer [default: both]
    #[arg(long, global = true, value_enum)]
    oracle: Option<OracleArg>,
    /// Write the report here instead of standard output
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Include wall-clock times in reports
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleArg {
    Cert,
    Greedy,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Bfs,
    Iddfs,
    Bidirectional,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a presentation and print its structure
    Parse { input: String },
    /// Print the canonical normal form
    Normalize {
        input: String,
        /// Also minimize over signed generator relabelings
        #[arg(long)]
        relabel: bool,
    },
    /// Euler characteristics of the total space and the sticky end
    Invariants {
        input: String,
        /// One-based index into the enumerated attachment choices
        #[arg(long)]
        choice: Option<usize>,
    },
    /// Build handle structures or list attachment choices
    Handle {
        #[command(subcommand)]
        command: HandleCommand,
    },
    /// Search for a trivializing certificate
    Search {
        input: String,
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
        /// Deduplicate states up to signed relabeling of generators
        #[arg(long)]
        relabel: bool,
        /// Write the certificate here when one is found
        #[arg(long)]
        cert: Option<PathBuf>,
    },
    /// Apply random AC steps
    Scramble {
        input: String,
        /// Number of steps
        #[arg(long, default_value_t = 5)]
        steps: usize,
    },
    /// Compile a certificate into topology operations and check them
    Compile { certificate: PathBuf },
    /// Replay a certificate and compare its end with a presentation
    VerifyCert {
        certificate: PathBuf,
        /// Expected end [default: the standard presentation of the same rank]
        #[arg(long)]
        expected: Option<String>,
    },
    /// Run the restricted recognizer
    Recognize {
        input: String,
        /// Write the witness certificate here
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// List the built-in presentations
    Corpus,
}

#[derive(Debug, Subcommand)]
enum HandleCommand {
    /// Print the handle structure in its line format
    Build {
        input: String,
        /// One-based index into the enumerated attachment choices
        #[arg(long)]
        choice: Option<usize>,
    },
    /// List attachment choices
    Choices { input: String },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Exhausted,
    Inconsistent,
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Exhausted => 2,
            Failure::Inconsistent => 3,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

enum Output {
    Json(Value),
    Text(String),
}

/// Runs the command line and returns the exit code: 0 when the command
/// completed, 1 on usage or input errors, 2 when a resource limit stopped
/// the work, 3 on an internal consistency failure.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() { write!(stderr, "{e}") } else { write!(stdout, "{e}") };
            return code;
        }
    };
    let result = match cli.global.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => Err(usage(e)),
        },
        None => execute(&cli),
    };
    let result = result.and_then(|(text, status)| {
        match &cli.global.out {
            Some(path) => write_file(path, &text)?,
            None => stdout.write_all(text.as_bytes()).map_err(usage)?,
        }
        status
    });
    match result {
        Ok(()) => 0,
        Err(f) => {
            if let Failure::Usage(msg) = &f {
                let _ = writeln!(stderr, "error: {msg}");
            }
            f.code()
        }
    }
}

/// Produces the report text and the status to exit with once it is written.
fn execute(cli: &Cli) -> Result<(String, Result<(), Failure>), Failure> {
    let g = &cli.global;
    let (output, status) = match &cli.command {
        Command::Parse { input } => (Output::Json(parse_report(&load(input)?)), Ok(())),
        Command::Normalize { input, relabel } => (Output::Json(normalize_report(&load(input)?, *relabel)), Ok(())),
        Command::Invariants { input, choice } => {
            let p = load(input)?;
            let h = structure(&p, *choice)?;
            (Output::Json(invariants_report(&p, &h)), Ok(()))
        }
        Command::Handle { command: HandleCommand::Build { input, choice } } => {
            (Output::Text(structure(&load(input)?, *choice)?.to_text()), Ok(()))
        }
        Command::Handle { command: HandleCommand::Choices { input } } => {
            let p = load(input)?;
            (Output::Json(choices_report(&p, g.choices.unwrap_or(8))), Ok(()))
        }
        Command::Search { input, strategy, relabel, cert } => {
            let p = load(input)?;
            let mut bounds = bounds(g)?;
            bounds.relabel = *relabel;
            if let Some(s) = strategy {
                bounds.strategy = match s {
                    StrategyArg::Bfs => Strategy::Bfs,
                    StrategyArg::Iddfs => Strategy::Iddfs,
                    StrategyArg::Bidirectional => Strategy::Bidirectional,
                };
            }
            INTERRUPTED.store(false, Ordering::SeqCst);
            let _ = ctrlc::set_handler(|| INTERRUPTED.store(true, Ordering::SeqCst));
            let r = trivialization_search_with_cancel(&p, &bounds, &INTERRUPTED).map_err(usage)?;
            if let (SearchOutcome::Trivialized(c), Some(path)) = (&r.outcome, cert) {
                write_file(path, &c.to_text())?;
            }
            let status = match r.outcome {
                SearchOutcome::Aborted(_) => Err(Failure::Exhausted),
                _ => Ok(()),
            };
            (Output::Json(report::search(&p, &bounds, &r, g.timing)), status)
        }
        Command::Scramble { input, steps } => {
            let p = load(input)?;
            let cap = g.maxlen.unwrap_or(SearchBounds::default().max_relator_length);
            let (q, c) = scramble(&p, *steps, g.seed.unwrap_or(0), cap);
            let v = json!({
                "kind": "scramble",
                "start": p.to_string(),
                "result": q.to_string(),
                "steps": c.steps.len(),
                "seed": g.seed.unwrap_or(0),
                "certificate": c.to_text(),
            });
            (Output::Json(v), Ok(()))
        }
        Command::Compile { certificate } => {
            let c = load_certificate(certificate)?;
            let h = build_handle_structure(&c.start, None).map_err(usage)?;
            match compile_certificate(&c, &h) {
                Ok(comp) => {
                    let pass = comp.replayed == comp.direct;
                    let v = json!({
                        "kind": "compile",
                        "start": c.start.to_string(),
                        "steps": comp.traces.iter().map(|t| json!({
                            "source": t.source.to_string(),
                            "ops": t.ops.iter().map(|o| o.to_string()).collect::<Vec<_>>(),
                        })).collect::<Vec<_>>(),
                        "start_invariants": invariants_json(&comp.start),
                        "replayed": invariants_json(&comp.replayed),
                        "direct": invariants_json(&comp.direct),
                        "pass": pass,
                    });
                    (Output::Json(v), if pass { Ok(()) } else { Err(Failure::Inconsistent) })
                }
                Err(CompileError::Inconsistent(r)) => {
                    let v = json!({
                        "kind": "compile",
                        "start": c.start.to_string(),
                        "steps": [],
                        "start_invariants": invariants_json(&Invariants::of_handle_structure(&h)),
                        "replayed": invariants_json(&r.trace),
                        "direct": invariants_json(&r.direct),
                        "pass": false,
                        "mismatches": r.mismatches,
                    });
                    (Output::Json(v), Err(Failure::Inconsistent))
                }
                Err(e) => return Err(usage(e)),
            }
        }
        Command::VerifyCert { certificate, expected } => {
            let c = load_certificate(certificate)?;
            let expected = match expected {
                Some(e) => load(e)?,
                None => Presentation::standard(c.start.generators),
            };
            let v = match verify_certificate(&c, &expected) {
                Ok(valid) => json!({
                    "kind": "verify",
                    "valid": valid,
                    "end": c.replay().map(|p| p.to_string()).ok(),
                    "expected": expected.to_string(),
                    "error": null,
                }),
                Err(e) => json!({
                    "kind": "verify",
                    "valid": false,
                    "end": null,
                    "expected": expected.to_string(),
                    "error": e.to_string(),
                }),
            };
            (Output::Json(v), Ok(()))
        }
        Command::Recognize { input, witness } => {
            let p = load(input)?;
            let cfg = OracleConfig {
                use_certificate_oracle: g.oracle != Some(OracleArg::Greedy),
                use_greedy_oracle: g.oracle != Some(OracleArg::Cert),
                search_bounds: bounds(g)?,
            };
            let verdict = recognize(&p, &cfg, g.choices.unwrap_or(8)).map_err(usage)?;
            if let (VerdictKind::SphereLike(w), Some(path)) = (&verdict.kind, witness) {
                write_file(path, &w.certificate.to_text())?;
            }
            let status = match verdict.kind {
                VerdictKind::Unknown(Exhaustion::ResourceLimit(_)) => Err(Failure::Exhausted),
                _ => Ok(()),
            };
            (Output::Json(report::verdict(&p, &verdict, witness.as_deref(), g.timing)), status)
        }
        Command::Corpus => {
            let entries: Vec<Value> = corpus::corpus()
                .into_iter()
                .map(|e| json!({ "name": e.name, "presentation": e.presentation.to_string() }))
                .collect();
            (Output::Json(json!({ "kind": "corpus", "entries": entries })), Ok(()))
        }
    };
    let text = match output {
        Output::Json(v) => serde_json::to_string_pretty(&v).expect("serializable") + "\n",
        Output::Text(t) => t,
    };
    Ok((text, status))
}

fn load(arg: &str) -> Result<Presentation, Failure> {
    if arg.trim_start().starts_with('<') {
        return parse_presentation(arg).map_err(usage);
    }
    if let Some(p) = corpus::lookup(arg) {
        return Ok(p);
    }
    let text = std::fs::read_to_string(arg).map_err(|e| usage(format!("{arg}: {e}")))?;
    parse_presentation(text.trim()).map_err(|e| usage(format!("{arg}: {e}")))
}

fn load_certificate(path: &Path) -> Result<Certificate, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Certificate::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn structure(p: &Presentation, choice: Option<usize>) -> Result<HandleStructure, Failure> {
    let choice: Option<AttachmentChoice> = match choice {
        None => None,
        Some(k) => {
            let all = enumerate_choices(p, k);
            let picked = k.checked_sub(1).and_then(|i| all.choices.get(i)).cloned();
            Some(picked.ok_or_else(|| usage(format!("choice {k} out of range (there are {})", all.total)))?)
        }
    };
    build_handle_structure(p, choice.as_ref()).map_err(usage)
}

fn parse_size(text: &str) -> Result<usize, Failure> {
    let t = text.trim();
    let (digits, scale) = match t.chars().last().map(|c| c.to_ascii_uppercase()) {
        Some('K') => (&t[..t.len() - 1], 1usize << 10),
        Some('M') => (&t[..t.len() - 1], 1 << 20),
        Some('G') => (&t[..t.len() - 1], 1 << 30),
        _ => (t, 1),
    };
    digits
        .parse::<usize>()
        .ok()
        .and_then(|v| v.checked_mul(scale))
        .ok_or_else(|| usage(format!("bad memory size {text:?}")))
}

fn bounds(g: &GlobalArgs) -> Result<SearchBounds, Failure> {
    let mut b = SearchBounds::default();
    if let Some(d) = g.depth {
        b.max_depth = d;
    }
    if let Some(l) = g.maxlen {
        b.max_relator_length = l;
    }
    if let Some(s) = g.max_states {
        b.max_states = s;
    }
    if let Some(m) = &g.mem {
        b.max_memory_bytes = parse_size(m)?;
    }
    Ok(b)
}

fn parse_report(p: &Presentation) -> Value {
    json!({
        "kind": "parse",
        "presentation": p.to_string(),
        "generators": p.generators,
        "relators": p.relators.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
        "balanced": p.is_balanced(),
        "total_length": p.total_length(),
    })
}

fn normalize_report(p: &Presentation, relabel: bool) -> Value {
    let nf = if relabel { normal_form_relabeled(p).0 } else { normal_form(p) };
    json!({
        "kind": "normalize",
        "presentation": p.to_string(),
        "normal_form": nf.to_string(),
        "relabel": relabel,
        "key": canonical_form(p, relabel).to_hex(),
    })
}

fn invariants_json(i: &Invariants) -> Value {
    json!({
        "euler_M": i.euler_m,
        "euler_S": i.euler_s,
        "components": i.components,
        "boundary_circles": i.boundary_circles,
    })
}

fn invariants_report(p: &Presentation, h: &HandleStructure) -> Value {
    let inv = Invariants::of_handle_structure(h);
    let surface = surface_invariants(&sticky_end(h));
    let m: IntegerMatrix = abelianization_matrix(p);
    let snf = smith_normal_form(&m).expect("arbitrary precision");
    json!({
        "kind": "invariants",
        "presentation": p.to_string(),
        "euler_M": inv.euler_m,
        "euler_S": inv.euler_s,
        "total_space_components": h.total_space_components().0,
        "surface": surface.description(),
        "sticky": {
            "components": surface.components,
            "boundary_circles": surface.boundary_circles,
            "orientable": surface.orientable,
            "per_component": surface.per_component.iter().map(|c| json!({
                "name": c.name(),
                "islands": c.islands,
                "euler": c.euler,
                "boundary_circles": c.boundary_circles,
                "orientable": c.orientable,
                "genus": c.genus,
            })).collect::<Vec<_>>(),
        },
        "abelianization": {
            "diagonal": snf.diagonal.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
            "free_rank": p.generators - snf.rank(),
        },
        "structure": h.to_text(),
    })
}

fn choices_report(p: &Presentation, limit: usize) -> Value {
    let all = enumerate_choices(p, limit);
    let choices: Vec<Vec<String>> = all
        .choices
        .iter()
        .map(|c| c.orders.iter().map(|o| o.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(" ")).collect())
        .collect();
    json!({
        "kind": "choices",
        "presentation": p.to_string(),
        "total": all.total,
        "truncated": all.truncated,
        "choices": choices,
    })
}
