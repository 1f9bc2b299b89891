use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde_json::{json, Value};

use lll::apps::{
    break_into_elementary, cnf_to_instance, hypergraph_to_instance, CnfFormula, Hypergraph,
};
use lll::criteria::{
    check_x_condition, resample_budget, symmetric_x, ConditionReport, XAssignment,
};
use lll::derand::{derandomized_solve, DEFAULT_TREE_CAP};
use lll::io::{emit_sample_table, parse_dimacs, parse_hypergraph, parse_x_file};
use lll::model::{
    build_dependency_graph, build_lopsidependency_graph, violated_events, DependencyGraph,
    ProblemInstance,
};
use lll::parallel::{solve_parallel, MisPolicy};
use lll::sample::SampleStream;
use lll::sequential::{default_max_steps, solve_sequential, SelectionPolicy, SolveResult};
use lll::witness::build_witness_tree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Sequential,
    Parallel,
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GraphChoice {
    Standard,
    Lopsided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyChoice {
    LowestId,
    RandomUniform,
}

/// Resampling solver for bad-event constraint systems (DIMACS CNF or
/// hypergraph 2-coloring inputs).
#[derive(Debug, Parser)]
#[command(name = "lll", version)]
struct Args {
    /// Input file; format auto-detected by header token (`p cnf` vs `h`).
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Sequential)]
    mode: Mode,
    #[arg(long, value_enum, default_value_t = GraphChoice::Standard)]
    graph: GraphChoice,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = PolicyChoice::LowestId)]
    policy: PolicyChoice,
    /// Slack in the event-probability condition (required > 0 for
    /// deterministic mode).
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// File of per-event weights; the symmetric 1/(d+1) default otherwise.
    #[arg(long)]
    x_file: Option<PathBuf>,
    /// 0 means the budget-derived default.
    #[arg(long, default_value_t = 0)]
    max_steps: usize,
    /// 0 means unlimited.
    #[arg(long, default_value_t = 0)]
    max_rounds: usize,
    /// Stats are printed to stdout when no path is given.
    #[arg(long)]
    stats_out: Option<PathBuf>,
    /// Run even when the weight condition fails (no guarantees apply).
    #[arg(long)]
    override_check: bool,
    /// Replace each event by its elementary events before solving.
    #[arg(long)]
    elementary: bool,
}

enum Input {
    Cnf(CnfFormula),
    Hyper(Hypergraph),
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

fn detect_and_parse(text: &str) -> Result<Input, String> {
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with("p cnf") || line.starts_with('p') {
            return parse_dimacs(text).map(Input::Cnf).map_err(|e| e.to_string());
        }
        if line.starts_with('h') {
            return parse_hypergraph(text).map(Input::Hyper).map_err(|e| e.to_string());
        }
        return Err(format!("unrecognized header line '{line}'"));
    }
    Err("empty input".to_string())
}

fn condition_report_json(report: &ConditionReport) -> Value {
    let entries: Vec<Value> = report
        .entries
        .iter()
        .map(|e| {
            json!({
                "event": e.event,
                "prob_bound": e.prob_bound,
                "threshold": e.threshold,
                "pass": e.pass,
            })
        })
        .collect();
    json!({ "pass": report.pass, "epsilon": report.epsilon, "per_event": entries })
}

fn depth_histogram(
    result: &SolveResult,
    graph: &DependencyGraph,
) -> BTreeMap<String, usize> {
    let mut hist = BTreeMap::new();
    for t in 0..result.log.len() {
        let d = build_witness_tree(&result.log, t, graph).depth();
        *hist.entry(d.to_string()).or_insert(0) += 1;
    }
    hist
}

fn write_stats(path: &Option<PathBuf>, stats: &Value) -> Result<(), String> {
    let text = format!("{}\n", serde_json::to_string_pretty(stats).expect("serializable"));
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| e.to_string()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();

    let text = match std::fs::read_to_string(&args.input) {
        Ok(t) => t,
        Err(e) => return fail(format!("cannot read {}: {e}", args.input.display())),
    };
    let input = match detect_and_parse(&text) {
        Ok(i) => i,
        Err(e) => return fail(e),
    };

    if args.mode == Mode::Parallel && args.graph == GraphChoice::Lopsided {
        return fail("the lopsided graph is not supported in parallel mode");
    }
    if args.mode == Mode::Deterministic && args.epsilon <= 0.0 {
        return fail("deterministic mode requires --epsilon > 0");
    }

    let (instance, conflicts): (ProblemInstance, Option<Vec<(usize, usize)>>) = match &input {
        Input::Cnf(f) => {
            let (inst, conflicts) = cnf_to_instance(f);
            (inst, Some(conflicts))
        }
        Input::Hyper(hg) => (hypergraph_to_instance(hg), None),
    };
    let instance = if args.elementary {
        match break_into_elementary(&instance) {
            Ok(i) => i,
            Err(e) => return fail(e),
        }
    } else {
        instance
    };
    // the per-clause conflict list no longer applies after the breakup
    let conflicts = if args.elementary { None } else { conflicts };

    let graph = match args.graph {
        GraphChoice::Standard => build_dependency_graph(&instance),
        GraphChoice::Lopsided => {
            let result = match &conflicts {
                Some(c) => build_lopsidependency_graph(&instance, Some(c)),
                None => build_lopsidependency_graph(&instance, None),
            };
            match result {
                Ok(g) => g,
                Err(e) => return fail(e),
            }
        }
    };

    let (x, x_source, x_clamped) = match &args.x_file {
        Some(path) => {
            let xt = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => return fail(format!("cannot read {}: {e}", path.display())),
            };
            let values = match parse_x_file(&xt) {
                Ok(v) => v,
                Err(e) => return fail(e),
            };
            match XAssignment::for_instance(values, &instance) {
                Ok(x) => (x, "file", false),
                Err(e) => return fail(e),
            }
        }
        None => {
            let sym = symmetric_x(&instance, &graph);
            (sym.x, "auto-symmetric", sym.clamped)
        }
    };

    let report = check_x_condition(&instance, &graph, &x, args.epsilon);
    if !report.pass && !args.override_check {
        eprintln!("weight condition fails (use --override-check to run anyway):");
        for e in report.entries.iter().filter(|e| !e.pass) {
            eprintln!(
                "  event {}: prob_bound {} > threshold {}",
                e.event, e.prob_bound, e.threshold
            );
        }
        let stats = json!({
            "condition": condition_report_json(&report),
            "refused": true,
        });
        let _ = write_stats(&args.stats_out, &stats);
        return ExitCode::from(1);
    }

    let budget = resample_budget(&x);
    let max_steps = if args.max_steps == 0 { default_max_steps(budget) } else { args.max_steps };

    let mut stats = serde_json::Map::new();
    stats.insert("budget".into(), json!(budget));
    stats.insert("condition".into(), condition_report_json(&report));
    stats.insert("epsilon".into(), json!(args.epsilon));
    stats.insert(
        "graph".into(),
        json!(match args.graph {
            GraphChoice::Standard => "standard",
            GraphChoice::Lopsided => "lopsided",
        }),
    );
    stats.insert(
        "mode".into(),
        json!(match args.mode {
            Mode::Sequential => "sequential",
            Mode::Parallel => "parallel",
            Mode::Deterministic => "deterministic",
        }),
    );
    stats.insert("override_check".into(), json!(args.override_check && !report.pass));
    stats.insert("seed".into(), json!(args.seed));
    stats.insert("x_clamped".into(), json!(x_clamped));
    stats.insert("x_source".into(), json!(x_source));

    let result: SolveResult = match args.mode {
        Mode::Sequential => {
            let stream = SampleStream::new(&instance, args.seed);
            let policy = match args.policy {
                PolicyChoice::LowestId => SelectionPolicy::LowestId,
                PolicyChoice::RandomUniform => SelectionPolicy::random_uniform(args.seed),
            };
            match solve_sequential(&instance, &stream, policy, max_steps) {
                Ok(r) => r,
                Err(e) => return fail(e),
            }
        }
        Mode::Parallel => {
            let stream = SampleStream::new(&instance, args.seed);
            let run = match solve_parallel(
                &instance,
                &graph,
                &stream,
                MisPolicy::Greedy,
                args.seed,
                args.max_rounds,
            ) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            stats.insert("rounds".into(), json!(run.rounds.len()));
            stats.insert("depth_histogram".into(), json!(depth_histogram(&run.result, &graph)));
            run.result
        }
        Mode::Deterministic => {
            let (r, derand) =
                match derandomized_solve(&instance, &graph, &x, args.epsilon, DEFAULT_TREE_CAP) {
                    Ok(v) => v,
                    Err(e) => return fail(e),
                };
            stats.insert("tree_list_size".into(), json!(derand.tree_list_size));
            stats.insert("tree_size_threshold".into(), json!(derand.threshold));
            stats.insert(
                "sample_table".into(),
                json!(emit_sample_table(&derand.table).lines().collect::<Vec<_>>()),
            );
            r
        }
    };

    stats.insert("per_event_resamples".into(), json!(result.log.per_event_counts));
    stats.insert("terminated".into(), json!(result.terminated));
    stats.insert("total_steps".into(), json!(result.steps_used));

    if !result.terminated {
        if let Err(e) = write_stats(&args.stats_out, &Value::Object(stats)) {
            return fail(e);
        }
        eprintln!("step limit exceeded without finding a valid assignment");
        return ExitCode::from(2);
    }

    // Independent verification straight from the raw input text: no solver
    // state is consulted.
    let verified = match detect_and_parse(&text) {
        Ok(Input::Cnf(f)) => {
            let bools: Vec<bool> = result.assignment.values.iter().map(|&v| v == 1).collect();
            f.satisfied_by(&bools)
        }
        Ok(Input::Hyper(hg)) => {
            let colors: Vec<bool> = result.assignment.values.iter().map(|&v| v == 1).collect();
            hg.properly_colored(&colors)
        }
        Err(e) => return fail(e),
    };
    stats.insert("verified".into(), json!(verified));

    if let Err(e) = write_stats(&args.stats_out, &Value::Object(stats)) {
        return fail(e);
    }

    if !verified {
        eprintln!("internal error: solver output failed independent verification");
        return ExitCode::from(1);
    }
    debug_assert!(violated_events(&instance, &result.assignment).is_empty());

    // model line on stderr-free stdout only when stats go to a file
    if args.stats_out.is_some() {
        let model: Vec<String> = result
            .assignment
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if v == 1 {
                    format!("{}", i + 1)
                } else {
                    format!("-{}", i as i64 + 1)
                }
            })
            .collect();
        println!("v {} 0", model.join(" "));
    }
    ExitCode::SUCCESS
}
