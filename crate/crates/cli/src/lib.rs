//! Command implementations behind the `rwpt` binary.

pub mod predicate;

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use rwpt::fms::{faulty_net, fms_initial, fms_rules, FmsParams, Line};
use rwpt::statespace::{
    build_lts, check_invariant, expand, explore, EdgeLabel, ExploreOptions, InvariantOutcome, Limits, SearchMode,
    SearchResult, StatePredicate,
};
use rwpt::structural::{covered_by_p_semiflows, incidence, p_semiflows, t_semiflows, Semiflow};
use rwpt::{emit_net, parse_net, RewriteRule, SystemState, UndefinedPolicy};

use crate::predicate::parse_predicate;

#[derive(Debug, Parser)]
#[command(name = "rwpt", version, about = "Rewritable Place/Transition nets: search, semiflows, simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Breadth-first search over firings and rewrite rules.
    Search(SearchArgs),
    /// Minimal P- or T-semiflows of a net.
    Semiflows(SemiflowArgs),
    /// Seeded random walk over firings and rule applications.
    Simulate(SimulateArgs),
    /// Graphviz export of the reachability graph.
    Rg(RgArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Fms,
    #[value(name = "fms-faulty-1")]
    FmsFaulty1,
    #[value(name = "fms-faulty-2")]
    FmsFaulty2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Error,
    Filter,
}

impl From<PolicyArg> for UndefinedPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Error => UndefinedPolicy::Error,
            PolicyArg::Filter => UndefinedPolicy::Filter,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Built-in model pack; supplies the rules and (without --net) the initial state.
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    /// Half the number of raw pieces in the FMS model.
    #[arg(short = 'M', default_value_t = 3)]
    pub m: u64,
    /// Include the loader-blocking rule r3.
    #[arg(long)]
    pub enable_r3: bool,
    /// Net file giving the initial state (firing only unless --model is also given).
    #[arg(long)]
    pub net: Option<PathBuf>,
}

impl ModelArgs {
    fn params(&self) -> FmsParams {
        FmsParams::new(self.m).with_r3(self.enable_r3)
    }

    pub fn load(&self) -> Result<(SystemState, Vec<RewriteRule>)> {
        let rules = if self.model.is_some() {
            fms_rules(self.params())
        } else {
            Vec::new()
        };
        let state = match (&self.net, self.model) {
            (Some(path), _) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                parse_net(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            (None, Some(model)) => model_state(model, self.params())?,
            (None, None) => bail!("give --model or --net"),
        };
        Ok((state, rules))
    }
}

fn model_state(model: Model, params: FmsParams) -> Result<SystemState> {
    let nominal = fms_initial(params)?;
    Ok(match model {
        Model::Fms => nominal,
        Model::FmsFaulty1 => SystemState::new(faulty_net(Line::One), nominal.marking().clone()),
        Model::FmsFaulty2 => SystemState::new(faulty_net(Line::Two), nominal.marking().clone()),
    })
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// States without successors (`=>!`).
    #[arg(long, group = "mode")]
    pub r#final: bool,
    /// Reachable states satisfying --pred (`=>*`).
    #[arg(long, group = "mode", requires = "pred")]
    pub reach: bool,
    /// dead | live | welldef | linear constraint such as "p0 + p8 <= 1".
    #[arg(long)]
    pub pred: Option<String>,
    /// Distinct one-step successors (`=>1`).
    #[arg(long, group = "mode")]
    pub one_step: bool,
    /// Every state within k steps.
    #[arg(long, group = "mode", value_name = "K")]
    pub max_depth: Option<usize>,
    /// Check that a predicate holds on every reachable state.
    #[arg(long, group = "mode", value_name = "PRED")]
    pub invariant: Option<String>,
    /// Restrict --invariant to states whose net is this model's net.
    #[arg(long, value_enum, requires = "invariant", value_name = "MODEL")]
    pub on_net: Option<Model>,
    #[arg(long, default_value_t = 10_000_000)]
    pub max_states: usize,
    #[arg(long)]
    pub max_solutions: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, value_enum, default_value_t = PolicyArg::Error)]
    pub undefined_policy: PolicyArg,
    #[arg(long)]
    pub json: bool,
}

impl SearchArgs {
    fn limits(&self) -> Limits {
        Limits {
            max_states: self.max_states,
            max_depth: None,
            max_solutions: self.max_solutions,
        }
    }

    fn options(&self) -> ExploreOptions {
        ExploreOptions {
            policy: self.undefined_policy.into(),
            threads: self.threads.max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    P,
    T,
}

#[derive(Debug, Clone, Args)]
pub struct SemiflowArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = KindArg::P)]
    pub kind: KindArg,
    /// Also report whether every place is covered by a P-semiflow.
    #[arg(long)]
    pub check_coverage: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = PolicyArg::Filter)]
    pub undefined_policy: PolicyArg,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RgArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Include rule applications (the full transition system).
    #[arg(long)]
    pub with_rules: bool,
    #[arg(long, default_value_t = 100_000)]
    pub max_states: usize,
    #[arg(long, value_enum, default_value_t = PolicyArg::Filter)]
    pub undefined_policy: PolicyArg,
    /// Write the DOT text here instead of stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Process exit status of a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Completed = 0,
    Truncated = 1,
    Undefined = 2,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<Status> {
    match cli.command {
        Command::Search(args) => search(&args, out),
        Command::Semiflows(args) => semiflows(&args, out),
        Command::Simulate(args) => simulate_cmd(&args, out),
        Command::Rg(args) => rg(&args, out),
    }
}

#[derive(Debug, Serialize)]
struct JsonSolution {
    ordinal: usize,
    depth: usize,
    marking: String,
    state: String,
}

#[derive(Debug, Serialize)]
struct JsonUndefined {
    rule: String,
    binding: String,
    source: usize,
    state: String,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct JsonSearch {
    mode: &'static str,
    solutions: Vec<JsonSolution>,
    states: usize,
    edges: usize,
    truncated: bool,
    elapsed_ms: f64,
    undefined_states: Vec<JsonUndefined>,
}

fn status_of(truncated: bool, undefined: bool) -> Status {
    if undefined {
        Status::Undefined
    } else if truncated {
        Status::Truncated
    } else {
        Status::Completed
    }
}

fn search(args: &SearchArgs, out: &mut dyn Write) -> Result<Status> {
    let (initial, rules) = args.model.load()?;
    let (limits, options) = (args.limits(), args.options());
    if let Some(inv) = &args.invariant {
        let mut pred = parse_predicate(inv)?;
        if let Some(model) = args.on_net {
            let net = model_state(model, args.model.params())?.net().clone();
            let inner = pred;
            pred = std::sync::Arc::new(move |s: &SystemState| s.net() != &net || inner(s));
        }
        return invariant(args, inv, &*pred, &initial, &rules, out);
    }
    let pred = args.pred.as_deref().map(parse_predicate).transpose()?;
    let (mode, name) = if args.reach {
        let pred: &StatePredicate = pred.as_deref().expect("clap requires --pred");
        (SearchMode::Reachable(pred), "reach")
    } else if args.one_step {
        (SearchMode::OneStep, "one-step")
    } else if let Some(k) = args.max_depth {
        (SearchMode::BoundedDepth(k), "max-depth")
    } else {
        (SearchMode::FinalStates, "final")
    };
    let result = explore(&initial, &rules, mode, limits, options)?;
    report_search(&result, name, args.json, out)?;
    Ok(status_of(result.truncated, !result.undefined_states.is_empty()))
}

fn report_search(result: &SearchResult, mode: &'static str, json: bool, out: &mut dyn Write) -> Result<()> {
    let mut sols: Vec<_> = result.solutions.iter().collect();
    sols.sort_by_cached_key(|s| s.state.key());
    if json {
        let doc = JsonSearch {
            mode,
            solutions: sols
                .iter()
                .map(|s| JsonSolution {
                    ordinal: s.ordinal,
                    depth: s.depth,
                    marking: s.state.marking().to_string(),
                    state: emit_net(&s.state),
                })
                .collect(),
            states: result.states_visited,
            edges: result.edges,
            truncated: result.truncated,
            elapsed_ms: result.elapsed.as_secs_f64() * 1e3,
            undefined_states: result
                .undefined_states
                .iter()
                .map(|u| JsonUndefined {
                    rule: u.rule.clone(),
                    binding: u.binding.to_string(),
                    source: u.source,
                    state: u.state.to_string(),
                })
                .collect(),
        };
        serde_json::to_writer_pretty(&mut *out, &doc)?;
        writeln!(out)?;
        return Ok(());
    }
    if sols.is_empty() {
        writeln!(out, "No solution.")?;
    }
    for (i, s) in sols.iter().enumerate() {
        writeln!(out, "Solution {} (state {}, depth {})", i + 1, s.ordinal, s.depth)?;
        write!(out, "{}", emit_net(&s.state))?;
        writeln!(out)?;
    }
    for u in &result.undefined_states {
        writeln!(
            out,
            "undefined state: rule {} ({}) from state {} gives {}",
            u.rule, u.binding, u.source, u.state
        )?;
    }
    writeln!(
        out,
        "states: {}  edges: {}  elapsed: {:.1}ms{}",
        result.states_visited,
        result.edges,
        result.elapsed.as_secs_f64() * 1e3,
        if result.truncated { "  (truncated)" } else { "" }
    )?;
    Ok(())
}

fn invariant(
    args: &SearchArgs,
    text: &str,
    pred: &StatePredicate,
    initial: &SystemState,
    rules: &[RewriteRule],
    out: &mut dyn Write,
) -> Result<Status> {
    let json = args.json;
    let outcome = check_invariant(initial, rules, pred, args.limits(), args.options())?;
    let (verdict, states, path) = match &outcome {
        InvariantOutcome::Holds { states_visited } => ("holds", *states_visited, None),
        InvariantOutcome::Violated { path, states_visited } => ("violated", *states_visited, Some(path)),
        InvariantOutcome::Unknown { states_visited } => ("unknown", *states_visited, None),
    };
    if json {
        let trace: Vec<_> = path
            .into_iter()
            .flatten()
            .map(|(label, s)| {
                serde_json::json!({
                    "label": label.as_ref().map(|l| l.to_string()),
                    "marking": s.marking().to_string(),
                })
            })
            .collect();
        let doc = serde_json::json!({ "invariant": text, "verdict": verdict, "states": states, "counterexample": trace });
        serde_json::to_writer_pretty(&mut *out, &doc)?;
        writeln!(out)?;
    } else {
        writeln!(out, "invariant {text}: {verdict} (states: {states})")?;
        if let Some(path) = path {
            for (i, (label, s)) in path.iter().enumerate() {
                match label {
                    None => writeln!(out, "  {i}: {}", s.marking())?,
                    Some(l) => writeln!(out, "  {i}: --{l}--> {}", s.marking())?,
                }
            }
            if let Some((_, last)) = path.last() {
                writeln!(out, "violating state:\n{}", emit_net(last))?;
            }
        }
    }
    Ok(match outcome {
        InvariantOutcome::Unknown { .. } => Status::Truncated,
        _ => Status::Completed,
    })
}

fn semiflows(args: &SemiflowArgs, out: &mut dyn Write) -> Result<Status> {
    let (state, _) = args.model.load()?;
    let q = incidence(state.net());
    let (flows, prefix): (Vec<Semiflow>, &str) = match args.kind {
        KindArg::P => (p_semiflows(&q)?, "pin"),
        KindArg::T => (t_semiflows(&q)?, "tin"),
    };
    let covered = if args.check_coverage {
        Some(covered_by_p_semiflows(state.net())?)
    } else {
        None
    };
    if args.json {
        let list: Vec<_> = flows
            .iter()
            .map(|f| {
                let weights: serde_json::Map<String, serde_json::Value> =
                    f.weights.iter().map(|(n, w)| (n.to_string(), (*w).into())).collect();
                serde_json::json!({ "text": f.to_string(), "weights": weights })
            })
            .collect();
        let kind = match args.kind {
            KindArg::P => "p",
            KindArg::T => "t",
        };
        let mut doc = serde_json::json!({ "kind": kind, "semiflows": list });
        if let Some(c) = covered {
            doc["covered"] = c.into();
        }
        serde_json::to_writer_pretty(&mut *out, &doc)?;
        writeln!(out)?;
    } else {
        if flows.is_empty() {
            writeln!(out, "no semiflows")?;
        }
        let width = format!("{prefix}{}", flows.len()).len();
        for (i, f) in flows.iter().enumerate() {
            writeln!(out, "{:<width$}  {}", format!("{prefix}{}", i + 1), f)?;
        }
        match covered {
            Some(true) => writeln!(out, "covered by P-semiflows: structurally bounded")?,
            Some(false) => writeln!(out, "not covered by P-semiflows")?,
            None => {}
        }
    }
    Ok(Status::Completed)
}

/// A simulated run.
#[derive(Debug, Clone)]
pub struct Trace {
    pub initial: SystemState,
    pub steps: Vec<(EdgeLabel, SystemState)>,
    /// The run stopped early because no successor existed.
    pub halted: bool,
}

impl Trace {
    pub fn final_state(&self) -> &SystemState {
        self.steps.last().map_or(&self.initial, |(_, s)| s)
    }
}

/// Uniform random walk; identical seeds give identical traces.
pub fn simulate(
    initial: &SystemState,
    rules: &[RewriteRule],
    steps: usize,
    seed: u64,
    policy: UndefinedPolicy,
) -> Result<Trace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trace = Trace {
        initial: initial.clone(),
        steps: Vec::new(),
        halted: false,
    };
    for _ in 0..steps {
        let exp = expand(trace.final_state(), rules, policy)?;
        if let Some((rule, binding, state)) = exp.undefined.first() {
            bail!("rule {rule} ({binding}) produced an undefined state: {state}");
        }
        if exp.edges.is_empty() {
            trace.halted = true;
            break;
        }
        let pick = rng.gen_range(0..exp.edges.len());
        let edge = exp.edges.into_iter().nth(pick).expect("index in range");
        trace.steps.push(edge);
    }
    Ok(trace)
}

fn simulate_cmd(args: &SimulateArgs, out: &mut dyn Write) -> Result<Status> {
    let (initial, rules) = args.model.load()?;
    let trace = simulate(&initial, &rules, args.steps, args.seed, args.undefined_policy.into())?;
    if args.json {
        let steps: Vec<_> = trace
            .steps
            .iter()
            .map(|(l, s)| serde_json::json!({ "label": l.to_string(), "marking": s.marking().to_string() }))
            .collect();
        let doc = serde_json::json!({
            "seed": args.seed,
            "steps": steps,
            "halted": trace.halted,
            "final": emit_net(trace.final_state()),
        });
        serde_json::to_writer_pretty(&mut *out, &doc)?;
        writeln!(out)?;
    } else {
        writeln!(out, "initial: {}", initial.marking())?;
        for (i, (label, s)) in trace.steps.iter().enumerate() {
            writeln!(out, "{:>4}: {label} -> {}", i + 1, s.marking())?;
        }
        if trace.halted {
            writeln!(out, "halted after {} steps: dead state, no rule applies", trace.steps.len())?;
        }
        writeln!(out, "final state:")?;
        write!(out, "{}", emit_net(trace.final_state()))?;
    }
    Ok(Status::Completed)
}

fn rg(args: &RgArgs, out: &mut dyn Write) -> Result<Status> {
    let (initial, rules) = args.model.load()?;
    let rules: &[RewriteRule] = if args.with_rules { &rules } else { &[] };
    let options = ExploreOptions {
        policy: args.undefined_policy.into(),
        threads: 1,
    };
    let lts = build_lts(&initial, rules, args.max_states, options)?;
    let dot = lts.to_dot();
    match &args.output {
        Some(path) => fs::write(path, dot).with_context(|| format!("writing {}", path.display()))?,
        None => out.write_all(dot.as_bytes())?,
    }
    Ok(status_of(lts.truncated, !lts.undefined_states.is_empty()))
}
