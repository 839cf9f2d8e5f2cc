//! `clhavoc`: batch driver for parsing, analysing, reducing and checking
//! `.clsys` systems.
//!
//! Exit codes: 0 positive verdict, 1 counterexample, 2 unknown or gated,
//! 3 input error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cl_havoc::analysis::{degree_sample, render_analysis};
use cl_havoc::frontend::{parse_system, render, render_config, Query, SystemFile};
use cl_havoc::oracle::{
    cross_validate_reduction, entails_bounded, havoc_invariant_bounded, EntailVerdict, HavocVerdict, Model,
};
use cl_havoc::reduction::{reduce_havoc_to_entailment, ReduceOptions, ReductionResult};
use cl_havoc::{Error, Name};

#[derive(Parser)]
#[command(name = "clhavoc", version, about = "Havoc invariance for inductively defined component configurations")]
struct Cli {
    /// Worker threads for the parallel oracle loops.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a file and print it in canonical form.
    Parse(Common),
    /// Profile, PCR flags and metrics of the rules.
    Analyze(Common),
    /// Emit the derived system with one entailment per target, and a
    /// manifest next to it.
    Reduce(Common),
    /// Decide invariance up to the depth bound through the reduction.
    Check(Common),
    /// Print every configuration reachable from a `config` block.
    Simulate(SimulateArgs),
    /// Direct bounded invariance check and cross-validation of the reduction.
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    input: PathBuf,
    /// Predicate to work on; defaults to the first `query invariant`.
    #[arg(long)]
    pred: Option<String>,
    #[arg(long, default_value_t = 4)]
    depth: usize,
    #[arg(long)]
    assume_tight: bool,
    /// Print each image transition with the rewrites that produced it.
    #[arg(long)]
    trace_transducer: bool,
    #[arg(short = 'o')]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    input: PathBuf,
    #[arg(long)]
    config: String,
    #[arg(short = 'o')]
    output: Option<PathBuf>,
}

/// Errors that end a run early, one per exit code.
enum Failure {
    Input(String),
    Gated(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.to_string())
    }
}

const POSITIVE: u8 = 0;
const NEGATIVE: u8 = 1;
const UNKNOWN: u8 = 2;
const INPUT: u8 = 3;

fn load(path: &Path) -> Result<SystemFile, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    parse_system(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn target_pred(file: &SystemFile, args: &Common) -> Result<Name, Failure> {
    let name = match &args.pred {
        Some(p) => Name::new(p),
        None => file
            .queries
            .iter()
            .find_map(|q| if let Query::Invariant(a) = q { Some(a.clone()) } else { None })
            .ok_or_else(|| Failure::Input("no --pred given and no invariant query in the file".into()))?,
    };
    if file.sid.arity(&name).is_none() {
        return Err(Failure::Input(format!("undefined predicate {name}")));
    }
    Ok(name)
}

fn emit(output: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn describe_model(title: &str, m: &Model) -> String {
    let mut out = render_config(&Name::new(title), &m.config);
    if !m.store.is_empty() {
        let binds: Vec<String> = m.store.iter().map(|(v, c)| format!("{v} = {c}")).collect();
        let _ = writeln!(out, "store {}", binds.join(", "));
    }
    out
}

fn try_reduce(sid: &cl_havoc::logic::Sid, pred: &Name, args: &Common) -> Result<ReductionResult, Failure> {
    reduce_havoc_to_entailment(sid, pred, ReduceOptions { assume_tight: args.assume_tight }).map_err(|e| match e {
        cl_havoc::error::ReductionError::TightnessNotEstablished(_) => {
            Failure::Gated(format!("{e}; rerun with --assume-tight to skip the check"))
        }
        other => Failure::Input(other.to_string()),
    })
}

fn cmd_parse(args: &Common) -> Result<u8, Failure> {
    let file = load(&args.input)?;
    emit(&args.output, &render(&file))?;
    Ok(POSITIVE)
}

fn cmd_analyze(args: &Common) -> Result<u8, Failure> {
    let file = load(&args.input)?;
    let mut out = render_analysis(&file.sid);
    if let Some(p) = &args.pred {
        let pred = target_pred(&file, args)?;
        let d = degree_sample(&file.sid, &pred, args.depth).map_err(Error::from)?;
        let _ = writeln!(out, "degree {p} (depth {}): {d}", args.depth);
    }
    emit(&args.output, &out)?;
    Ok(POSITIVE)
}

fn default_reduced_path(input: &Path) -> PathBuf {
    let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    input.with_file_name(format!("{stem}.reduced.clsys"))
}

fn manifest_path(reduced: &Path) -> PathBuf {
    let name = reduced.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = name.strip_suffix(".reduced.clsys").or_else(|| name.strip_suffix(".clsys")).unwrap_or(&name);
    reduced.with_file_name(format!("{stem}.manifest.json"))
}

fn cmd_reduce(args: &Common) -> Result<u8, Failure> {
    let file = load(&args.input)?;
    let pred = target_pred(&file, args)?;
    let red = try_reduce(&file.sid, &pred, args)?;
    if args.trace_transducer {
        eprint!("{}", red.trace());
    }
    let out = args.output.clone().unwrap_or_else(|| default_reduced_path(&args.input));
    let manifest = manifest_path(&out);
    emit(&Some(out.clone()), &red.render())?;
    let json = serde_json::to_string_pretty(&red.manifest()).expect("manifest serializes");
    emit(&Some(manifest.clone()), &format!("{json}\n"))?;
    println!(
        "{pred}: {} derived rules, {} targets -> {}, {}",
        red.derived.rules().len(),
        red.targets.len(),
        out.display(),
        manifest.display()
    );
    Ok(POSITIVE)
}

enum Verdict {
    Invariant(String),
    Counterexample(String),
}

fn oracle_verdict(sid: &cl_havoc::logic::Sid, pred: &Name, depth: usize) -> Result<Verdict, Failure> {
    Ok(match havoc_invariant_bounded(sid, pred, depth).map_err(Error::from)? {
        HavocVerdict::InvariantUpToDepth { models, successors } => {
            Verdict::Invariant(format!("{models} models, {successors} successors checked"))
        }
        HavocVerdict::Counterexample(c) => {
            let mut s = describe_model("before", &c.model);
            let _ = writeln!(s, "fire {}", c.interaction);
            s.push_str(&render_config(&Name::new("after"), &c.successor));
            Verdict::Counterexample(s)
        }
    })
}

fn reduction_verdict(red: &ReductionResult, depth: usize) -> Result<Verdict, Failure> {
    let mut models = 0;
    for (l, r) in red.entailments() {
        match entails_bounded(&red.combined, &l, &r, depth).map_err(Error::from)? {
            EntailVerdict::HoldsUpToDepth { models: n } => models += n,
            EntailVerdict::Counterexample(m) => {
                let mut s = format!("{l} |= {r} fails on\n");
                s.push_str(&describe_model("successor", &m));
                return Ok(Verdict::Counterexample(s));
            }
        }
    }
    Ok(Verdict::Invariant(format!("{} entailments over {models} models", red.targets.len())))
}

fn report(pred: &Name, depth: usize, v: &Verdict) -> u8 {
    match v {
        Verdict::Invariant(note) => {
            println!("{pred}: InvariantUpToDepth {depth} ({note})");
            POSITIVE
        }
        Verdict::Counterexample(s) => {
            println!("{pred}: Counterexample");
            print!("{s}");
            NEGATIVE
        }
    }
}

fn cmd_check(args: &Common) -> Result<u8, Failure> {
    let file = load(&args.input)?;
    let pred = target_pred(&file, args)?;
    let red = match try_reduce(&file.sid, &pred, args) {
        Ok(r) => r,
        Err(Failure::Gated(msg)) => {
            eprintln!("{msg}; falling back to the direct bounded check");
            let v = oracle_verdict(&file.sid, &pred, args.depth)?;
            return Ok(report(&pred, args.depth, &v));
        }
        Err(e) => return Err(e),
    };
    if args.trace_transducer {
        eprint!("{}", red.trace());
    }
    let via_reduction = reduction_verdict(&red, args.depth)?;
    let direct = oracle_verdict(&file.sid, &pred, args.depth)?;
    match (&via_reduction, &direct) {
        (Verdict::Invariant(_), Verdict::Invariant(_)) | (Verdict::Counterexample(_), Verdict::Counterexample(_)) => {
            Ok(report(&pred, args.depth, &via_reduction))
        }
        _ => {
            println!("{pred}: Unknown (reduction and direct check disagree at depth {})", args.depth);
            Ok(UNKNOWN)
        }
    }
}

fn cmd_oracle(args: &Common) -> Result<u8, Failure> {
    let file = load(&args.input)?;
    let pred = target_pred(&file, args)?;
    let v = oracle_verdict(&file.sid, &pred, args.depth)?;
    let code = report(&pred, args.depth, &v);
    match try_reduce(&file.sid, &pred, args) {
        Ok(red) => {
            let cv = cross_validate_reduction(&file.sid, &red, args.depth).map_err(Error::from)?;
            println!(
                "cross-validation at depth {}: {} successors, {} derived models, {} missing, {} extra",
                args.depth,
                cv.successors.len(),
                cv.derived.len(),
                cv.missing().len(),
                cv.extra().len()
            );
            if !cv.is_equal() {
                return Ok(UNKNOWN);
            }
        }
        Err(Failure::Gated(msg)) => eprintln!("cross-validation skipped: {msg}"),
        Err(e) => return Err(e),
    }
    Ok(code)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<u8, Failure> {
    let file = load(&args.input)?;
    let g = file.config(&args.config).ok_or_else(|| Failure::Input(format!("no config block {}", args.config)))?;
    let reach = g.reachable(file.sid.behavior());
    let mut out = String::new();
    for (k, h) in reach.iter().enumerate() {
        out.push_str(&render_config(&Name::from(format!("{}_{k}", args.config)), h));
    }
    emit(&args.output, &out)?;
    eprintln!("{} configurations reachable from {}", reach.len(), args.config);
    Ok(POSITIVE)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("--jobs: {e}");
            return ExitCode::from(INPUT);
        }
    }
    let res = match &cli.command {
        Command::Parse(a) => cmd_parse(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Reduce(a) => cmd_reduce(a),
        Command::Check(a) => cmd_check(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(INPUT)
        }
        Err(Failure::Gated(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(UNKNOWN)
        }
    }
}
