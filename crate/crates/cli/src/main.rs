//! `crossprob`: batch driver emitting JSON reports on standard output.
//!
//! Exit codes: 0 success, 1 a verdict came out false, 2 bad input.

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Map, Value};

use crossprob::crossedalg::CrossedElement;
use crossprob::freeprob::{self, FreenessOptions, MonomialElement};
use crossprob::nclattice::{enumerate_nc, NcLattice, NcPartition};
use crossprob::scenario::{Scenario, BUNDLED};
use crossprob::verify::{self, Section};
use crossprob::Error;

const THREADS_ENV: &str = "CROSSPROB_THREADS";

#[derive(Parser)]
#[command(name = "crossprob", version, about = "Operator-valued free probability over crossed products")]
struct Cli {
    /// Worker threads (default: $CROSSPROB_THREADS, else all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate NC(n)
    Nc {
        #[arg(long)]
        n: usize,
    },
    /// Möbius values mu(pi, 1_n); --full lists every comparable pair
    Mobius {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        full: bool,
    },
    /// Partition-dependent moments of the scenario's element tuples
    Moments {
        #[arg(long)]
        scenario: String,
    },
    /// Cumulants of the scenario's element tuples
    Cumulants {
        #[arg(long)]
        scenario: String,
    },
    /// Sample mixed cumulants between factor subsets
    CheckFreeness {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_order: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Replay every identity of the model on seeded inputs
    VerifyPaper {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// verify-paper over every bundled fixture
    Selftest {
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Report key of each verification section.
fn section_key(s: Section) -> String {
    match s {
        Section::Lattice => "lattice",
        Section::UnitaryRelations => "(0.1)",
        Section::MonomialProduct => "(0.2)",
        Section::Adjoint => "(0.3)",
        Section::Covariance => "(0.4)",
        Section::Embedding => "(1.2)",
        Section::Expectation => "(1.3)",
        Section::UnitaryMoments => "(2.3)",
        Section::MonomialMoments => "(2.4)",
        Section::Commutation => "(2.6)",
        Section::PartitionedMoments => "(2.7)",
        Section::NestedExample => "Example2.1",
        Section::CumulantFactorization => "(2.8)",
        Section::TraceCumulantExpansion => "Example2.2",
        Section::RoundTrip => "round-trip",
        Section::Multilinearity => "multilinearity",
        Section::AlternatingOracle => "oracle",
        Section::FreeProductFreeness => "Thm3.1",
        Section::FreeGroupSplitting => "Cor3.2",
    }
    .to_string()
}

fn error_json(kind: &str, message: &str) -> Value {
    json!({ "error": { "kind": kind, "message": message } })
}

fn print(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn run_nc(n: usize) -> Result<Value, Error> {
    let parts = enumerate_nc(n)?;
    Ok(json!({
        "command": "nc",
        "n": n,
        "count": parts.len(),
        "partitions": parts.iter().map(ToString::to_string).collect::<Vec<_>>(),
    }))
}

fn run_mobius(n: usize, full: bool) -> Result<Value, Error> {
    let lat = NcLattice::get(n)?;
    let to_top = lat.mobius_to_top();
    let bottom = lat.index_of(&NcPartition::singletons(n))?;
    let mut out = json!({
        "command": "mobius",
        "n": n,
        "count": lat.len(),
        "mu_bottom_top": to_top[bottom],
        "to_top": lat
            .elements()
            .iter()
            .zip(to_top)
            .map(|(p, m)| json!({ "partition": p.to_string(), "mu": m }))
            .collect::<Vec<_>>(),
    });
    if full {
        let mut pairs = Vec::new();
        for i in 0..lat.len() {
            let row = lat.mobius_row(i);
            for j in 0..lat.len() {
                if lat.leq_idx(i, j) {
                    pairs.push(json!({
                        "lower": lat.elements()[i].to_string(),
                        "upper": lat.elements()[j].to_string(),
                        "mu": row[j],
                    }));
                }
            }
        }
        out["intervals"] = Value::Array(pairs);
    }
    Ok(out)
}

fn run_moments(sc: &Scenario) -> Result<Value, Error> {
    let mut rows = Vec::new();
    for tuple in &sc.tuples {
        let xs = sc.tuple_elements(tuple);
        let n = xs.len();
        let mut parts: Vec<NcPartition> = sc.partitions.iter().filter(|p| p.n() == n).cloned().collect();
        if parts.is_empty() {
            parts.push(NcPartition::full(n));
        }
        for pi in parts {
            let value = freeprob::partitioned_moment(&xs, &pi)?;
            rows.push(json!({
                "tuple": sc.tuple_label(tuple),
                "partition": pi.to_string(),
                "value": value.to_json(),
            }));
        }
    }
    Ok(json!({ "command": "moments", "scenario": sc.name, "moments": rows }))
}

fn as_monomial(x: &CrossedElement) -> Option<MonomialElement> {
    match x.terms().iter().collect::<Vec<_>>().as_slice() {
        [(w, m)] => Some(MonomialElement::new((*m).clone(), (*w).clone())),
        _ => None,
    }
}

fn run_cumulants(sc: &Scenario) -> Result<Value, Error> {
    let mut table = Map::new();
    let mut factorized = Map::new();
    for tuple in &sc.tuples {
        let xs = sc.tuple_elements(tuple);
        let key = format!("k({})", sc.tuple_label(tuple));
        table.insert(key.clone(), freeprob::cumulant(&xs)?.to_json());
        if let Some(ms) = xs.iter().map(as_monomial).collect::<Option<Vec<_>>>() {
            factorized.insert(key, freeprob::cumulant_factorized(&sc.space, &ms)?.to_json());
        }
    }
    Ok(json!({
        "command": "cumulants",
        "scenario": sc.name,
        "cumulants": table,
        "factorized": factorized,
    }))
}

fn run_check_freeness(
    sc: &Scenario,
    seed: u64,
    max_order: Option<usize>,
    trials: Option<usize>,
) -> Result<(Value, bool), Error> {
    let splits = sc.splits();
    if splits.is_empty() {
        return Err(Error::Config("scenario has a single factor; nothing to split".into()));
    }
    let mut reports = Vec::new();
    let mut verdict = true;
    for (k, split) in splits.iter().enumerate() {
        let opts = FreenessOptions {
            max_order: max_order.unwrap_or(sc.freeness.max_order),
            trials: trials.unwrap_or(sc.freeness.trials),
            seed: seed ^ k as u64,
            tol: sc.tolerance,
            ..FreenessOptions::default()
        };
        let report = freeprob::check_freeness(&sc.space, &split.a, &split.b, &opts)?;
        verdict &= report.verdict;
        reports.push(serde_json::to_value(&report).expect("plain data"));
    }
    Ok((
        json!({
            "command": "check-freeness",
            "scenario": sc.name,
            "seed": seed,
            "reports": reports,
            "verdict": verdict,
        }),
        verdict,
    ))
}

fn run_verify(sc: &Scenario, seed: u64) -> Result<(Value, bool), Error> {
    let report = verify::verify_paper(sc, seed)?;
    Ok((report.to_json_with(section_key), report.verdict))
}

fn run_selftest(seed: Option<u64>) -> Result<(Value, bool), Error> {
    let mut fixtures = Map::new();
    let mut verdict = true;
    for (name, _) in BUNDLED {
        let sc = Scenario::load(name)?;
        let report = verify::verify_paper(&sc, seed.unwrap_or(sc.seed))?;
        verdict &= report.verdict;
        let failed: Vec<String> = report
            .sections
            .iter()
            .filter(|(_, r)| !r.passed)
            .map(|(s, _)| section_key(*s))
            .collect();
        fixtures.insert(
            name.to_string(),
            json!({ "verdict": report.verdict, "failed_sections": failed }),
        );
    }
    Ok((json!({ "command": "selftest", "fixtures": fixtures, "verdict": verdict }), verdict))
}

fn dispatch(command: Command) -> Result<(Value, bool), Error> {
    match command {
        Command::Nc { n } => run_nc(n).map(|v| (v, true)),
        Command::Mobius { n, full } => run_mobius(n, full).map(|v| (v, true)),
        Command::Moments { scenario } => run_moments(&Scenario::load(&scenario)?).map(|v| (v, true)),
        Command::Cumulants { scenario } => run_cumulants(&Scenario::load(&scenario)?).map(|v| (v, true)),
        Command::CheckFreeness {
            scenario,
            seed,
            max_order,
            trials,
        } => {
            let sc = Scenario::load(&scenario)?;
            run_check_freeness(&sc, seed.unwrap_or(sc.seed), max_order, trials)
        }
        Command::VerifyPaper { scenario, seed } => {
            let sc = Scenario::load(&scenario)?;
            run_verify(&sc, seed.unwrap_or(sc.seed))
        }
        Command::Selftest { seed } => run_selftest(seed),
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, String> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| format!("{THREADS_ENV} must be a nonnegative integer, got {s:?}")),
        Err(_) => Ok(None),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            print(&error_json("usage", e.to_string().trim()));
            return ExitCode::from(2);
        }
    };
    let threads = match thread_count(cli.threads) {
        Ok(t) => t,
        Err(msg) => {
            print(&error_json("config", &msg));
            return ExitCode::from(2);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            print(&error_json("config", &e.to_string()));
            return ExitCode::from(2);
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok((report, verdict)) => {
            print(&report);
            if verdict {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            print(&error_json(e.kind(), &e.to_string()));
            ExitCode::from(2)
        }
    }
}
