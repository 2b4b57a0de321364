//! Breadth-first construction and search of the labelled transition system
//! generated by firing plus a set of rewrite rules.
//!
//! Exploration is level synchronous. The successors of a whole frontier are
//! computed (optionally in parallel) and then merged into the visited set in
//! frontier order, so results never depend on the thread count.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::firing::{fire, firing_successors, FireError};
use crate::net::{StateKey, SystemState, TranId};
use crate::rewrite::{Binding, RewriteError, RewriteRule, UndefinedPolicy};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error(transparent)]
    Fire(#[from] FireError),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error("could not start worker pool: {0}")]
    ThreadPool(String),
    #[error("initial state is not well-defined (empty net)")]
    UndefinedInitial,
}

/// Label of an edge: a firing or a rule application.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum EdgeLabel {
    Firing(TranId),
    Rule { rule: Arc<str>, binding: Binding },
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeLabel::Firing(tr) => write!(f, "firing({tr})"),
            EdgeLabel::Rule { rule, binding } if binding.is_empty() => write!(f, "{rule}"),
            EdgeLabel::Rule { rule, binding } => write!(f, "{rule}({binding})"),
        }
    }
}

pub type StatePredicate<'a> = dyn Fn(&SystemState) -> bool + Send + Sync + 'a;

/// What a search returns as solutions.
#[derive(Clone, Copy)]
pub enum SearchMode<'a> {
    /// States without successors of any kind.
    FinalStates,
    /// Every visited state satisfying the predicate.
    Reachable(&'a StatePredicate<'a>),
    /// The distinct successors of the initial state.
    OneStep,
    /// Every state reachable in at most `n` steps.
    BoundedDepth(usize),
}

impl fmt::Debug for SearchMode<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SearchMode::FinalStates => f.write_str("FinalStates"),
            SearchMode::Reachable(_) => f.write_str("Reachable(..)"),
            SearchMode::OneStep => f.write_str("OneStep"),
            SearchMode::BoundedDepth(n) => write!(f, "BoundedDepth({n})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_states: usize,
    pub max_depth: Option<usize>,
    pub max_solutions: Option<usize>,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_states: 10_000_000,
            max_depth: None,
            max_solutions: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExploreOptions {
    pub policy: UndefinedPolicy,
    /// Worker threads for frontier expansion; 1 expands sequentially.
    pub threads: usize,
}

impl Default for ExploreOptions {
    fn default() -> Self {
        ExploreOptions {
            policy: UndefinedPolicy::Error,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub state: SystemState,
    pub depth: usize,
    pub ordinal: usize,
}

/// An undefined state produced by a rule under [`UndefinedPolicy::Error`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndefinedState {
    pub rule: String,
    pub binding: Binding,
    pub source: usize,
    pub state: SystemState,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub solutions: Vec<Solution>,
    /// Distinct states seen, including the initial one.
    pub states_visited: usize,
    pub edges: usize,
    pub truncated: bool,
    pub undefined_states: Vec<UndefinedState>,
    pub elapsed: Duration,
}

/// Successors of one state, firings first (in transition order) then rule
/// applications (in rule order).
#[derive(Debug, Clone, Default)]
pub struct Expansion {
    pub edges: Vec<(EdgeLabel, SystemState)>,
    pub undefined: Vec<(String, Binding, SystemState)>,
}

pub fn expand(
    state: &SystemState,
    rules: &[RewriteRule],
    policy: UndefinedPolicy,
) -> Result<Expansion, SearchError> {
    let mut out = Expansion::default();
    for (tr, next) in firing_successors(state)? {
        out.edges.push((EdgeLabel::Firing(tr), next));
    }
    for rule in rules {
        for app in rule.applications(state)? {
            if app.target.is_well_defined() {
                out.edges.push((
                    EdgeLabel::Rule {
                        rule: app.rule,
                        binding: app.binding,
                    },
                    app.target,
                ));
            } else if policy == UndefinedPolicy::Error {
                out.undefined.push((rule.name().to_string(), app.binding, app.target));
            }
        }
    }
    Ok(out)
}

/// Re-applies an edge label to its source state.
pub fn apply_label(
    state: &SystemState,
    label: &EdgeLabel,
    rules: &[RewriteRule],
) -> Result<Option<SystemState>, SearchError> {
    match label {
        EdgeLabel::Firing(tr) => match fire(state, *tr) {
            Ok(next) => Ok(Some(next)),
            Err(FireError::Disabled(_) | FireError::UnknownTransition(_)) => Ok(None),
            Err(e) => Err(e.into()),
        },
        EdgeLabel::Rule { rule, binding } => {
            let Some(r) = rules.iter().find(|r| r.name() == &**rule) else {
                return Ok(None);
            };
            Ok(r
                .applications(state)?
                .into_iter()
                .find(|a| &a.binding == binding)
                .map(|a| a.target))
        }
    }
}

struct Engine<'r> {
    rules: &'r [RewriteRule],
    options: ExploreOptions,
    states: Vec<SystemState>,
    depth: Vec<usize>,
    index: HashMap<StateKey, usize>,
    parents: Option<Vec<Option<(usize, EdgeLabel)>>>,
    lts_edges: Option<Vec<(usize, EdgeLabel, usize)>>,
    edges: usize,
    undefined: Vec<UndefinedState>,
}

struct Step {
    edges: Vec<(EdgeLabel, SystemState, StateKey)>,
    undefined: Vec<(String, Binding, SystemState)>,
}

impl<'r> Engine<'r> {
    fn new(initial: &SystemState, rules: &'r [RewriteRule], options: ExploreOptions) -> Result<Self, SearchError> {
        if !initial.is_well_defined() {
            return Err(SearchError::UndefinedInitial);
        }
        let mut index = HashMap::new();
        index.insert(initial.key(), 0);
        Ok(Engine {
            rules,
            options,
            states: vec![initial.clone()],
            depth: vec![0],
            index,
            parents: None,
            lts_edges: None,
            edges: 0,
            undefined: Vec::new(),
        })
    }

    fn expand_one(&self, ordinal: usize) -> Result<Step, SearchError> {
        let exp = expand(&self.states[ordinal], self.rules, self.options.policy)?;
        Ok(Step {
            edges: exp
                .edges
                .into_iter()
                .map(|(label, s)| {
                    let key = s.key();
                    (label, s, key)
                })
                .collect(),
            undefined: exp.undefined,
        })
    }

    fn expand_frontier(&self, frontier: &[usize], pool: Option<&rayon::ThreadPool>) -> Result<Vec<Step>, SearchError> {
        match pool {
            Some(pool) => pool.install(|| frontier.par_iter().map(|&o| self.expand_one(o)).collect()),
            None => frontier.iter().map(|&o| self.expand_one(o)).collect(),
        }
    }

    /// Inserts `state` if unseen; returns its ordinal and whether it is new.
    fn insert(&mut self, state: SystemState, key: StateKey, depth: usize, parent: Option<(usize, &EdgeLabel)>) -> (usize, bool) {
        if let Some(&o) = self.index.get(&key) {
            return (o, false);
        }
        let o = self.states.len();
        self.index.insert(key, o);
        self.states.push(state);
        self.depth.push(depth);
        if let Some(parents) = self.parents.as_mut() {
            parents.push(parent.map(|(src, l)| (src, l.clone())));
        }
        (o, true)
    }

    /// Runs BFS. `on_new` is called for every newly discovered state and
    /// `on_expanded` for every expanded one with its successor count; either
    /// may return `false` to stop.
    fn run(
        &mut self,
        limits: Limits,
        mut on_new: impl FnMut(&Self, usize) -> bool,
        mut on_expanded: impl FnMut(&Self, usize, usize) -> bool,
    ) -> Result<bool, SearchError> {
        let pool = if self.options.threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(self.options.threads)
                    .build()
                    .map_err(|e| SearchError::ThreadPool(e.to_string()))?,
            )
        } else {
            None
        };
        if !on_new(self, 0) {
            return Ok(false);
        }
        let mut frontier = vec![0usize];
        let mut level = 0usize;
        while !frontier.is_empty() {
            if limits.max_depth.is_some_and(|d| level >= d) {
                // anything left unexpanded means the bound cut the search
                let pending = self.expand_frontier(&frontier, pool.as_ref())?;
                return Ok(pending.iter().any(|s| !s.edges.is_empty()));
            }
            let steps = self.expand_frontier(&frontier, pool.as_ref())?;
            let mut next = Vec::new();
            for (&src, step) in frontier.iter().zip(steps) {
                self.edges += step.edges.len();
                for (rule, binding, state) in step.undefined {
                    self.undefined.push(UndefinedState {
                        rule,
                        binding,
                        source: src,
                        state,
                    });
                }
                if !on_expanded(self, src, step.edges.len()) {
                    return Ok(false);
                }
                for (label, state, key) in step.edges {
                    let (dst, fresh) = self.insert(state, key, level + 1, Some((src, &label)));
                    if let Some(edges) = self.lts_edges.as_mut() {
                        edges.push((src, label, dst));
                    }
                    if fresh {
                        next.push(dst);
                        if !on_new(self, dst) {
                            return Ok(false);
                        }
                        if self.states.len() >= limits.max_states {
                            return Ok(true);
                        }
                    }
                }
            }
            frontier = next;
            level += 1;
        }
        Ok(false)
    }

    fn solution(&self, ordinal: usize) -> Solution {
        Solution {
            state: self.states[ordinal].clone(),
            depth: self.depth[ordinal],
            ordinal,
        }
    }

    fn path_to(&self, ordinal: usize) -> Vec<(Option<EdgeLabel>, SystemState)> {
        let parents = self.parents.as_ref().expect("parents recorded");
        let mut path = Vec::new();
        let mut cur = ordinal;
        loop {
            match &parents[cur] {
                Some((src, label)) => {
                    path.push((Some(label.clone()), self.states[cur].clone()));
                    cur = *src;
                }
                None => {
                    path.push((None, self.states[cur].clone()));
                    break;
                }
            }
        }
        path.reverse();
        path
    }
}

/// Breadth-first search from `initial` over firings and `rules`.
pub fn explore(
    initial: &SystemState,
    rules: &[RewriteRule],
    mode: SearchMode<'_>,
    limits: Limits,
    options: ExploreOptions,
) -> Result<SearchResult, SearchError> {
    let started = Instant::now();
    let mut engine = Engine::new(initial, rules, options)?;
    let max_solutions = limits.max_solutions.unwrap_or(usize::MAX);
    let mut solutions: Vec<usize> = Vec::new();
    let truncated = match mode {
        SearchMode::OneStep => {
            let step = engine.expand_one(0)?;
            engine.edges = step.edges.len();
            for (rule, binding, state) in step.undefined {
                engine.undefined.push(UndefinedState {
                    rule,
                    binding,
                    source: 0,
                    state,
                });
            }
            let mut seen = std::collections::HashSet::new();
            let mut hit_limit = false;
            for (_, state, key) in step.edges {
                if !seen.insert(key.clone()) {
                    continue;
                }
                if solutions.len() >= max_solutions {
                    hit_limit = true;
                    break;
                }
                let (o, _) = engine.insert(state, key, 1, None);
                solutions.push(o);
            }
            hit_limit
        }
        SearchMode::FinalStates => engine.run(
            limits,
            |_, _| true,
            |_, src, succ| {
                if succ == 0 {
                    solutions.push(src);
                }
                solutions.len() < max_solutions
            },
        )?,
        SearchMode::Reachable(pred) => engine.run(
            limits,
            |e, o| {
                if pred(&e.states[o]) {
                    solutions.push(o);
                }
                solutions.len() < max_solutions
            },
            |_, _, _| true,
        )?,
        SearchMode::BoundedDepth(n) => {
            let bounded = Limits {
                max_depth: Some(limits.max_depth.map_or(n, |d| d.min(n))),
                ..limits
            };
            let cut = engine.run(
                bounded,
                |_, o| {
                    solutions.push(o);
                    solutions.len() < max_solutions
                },
                |_, _, _| true,
            )?;
            // reaching the requested depth is the point, not a truncation
            cut && limits.max_depth.is_some_and(|d| d < n) || engine.states.len() >= limits.max_states
        }
    };
    Ok(SearchResult {
        solutions: solutions.into_iter().map(|o| engine.solution(o)).collect(),
        states_visited: engine.states.len(),
        edges: engine.edges,
        truncated,
        undefined_states: engine.undefined,
        elapsed: started.elapsed(),
    })
}

/// Result of checking a state invariant over the reachable states.
#[derive(Debug, Clone)]
pub enum InvariantOutcome {
    Holds { states_visited: usize },
    /// Shortest path from the initial state to a violating state.
    Violated {
        path: Vec<(Option<EdgeLabel>, SystemState)>,
        states_visited: usize,
    },
    /// Limits were hit before a violation was found.
    Unknown { states_visited: usize },
}

impl InvariantOutcome {
    pub fn holds(&self) -> Option<bool> {
        match self {
            InvariantOutcome::Holds { .. } => Some(true),
            InvariantOutcome::Violated { .. } => Some(false),
            InvariantOutcome::Unknown { .. } => None,
        }
    }
}

pub fn check_invariant(
    initial: &SystemState,
    rules: &[RewriteRule],
    invariant: &StatePredicate<'_>,
    limits: Limits,
    options: ExploreOptions,
) -> Result<InvariantOutcome, SearchError> {
    let mut engine = Engine::new(initial, rules, options)?;
    engine.parents = Some(vec![None]);
    let mut violation = None;
    let truncated = engine.run(
        limits,
        |e, o| {
            if invariant(&e.states[o]) {
                true
            } else {
                violation = Some(o);
                false
            }
        },
        |_, _, _| true,
    )?;
    let states_visited = engine.states.len();
    Ok(match violation {
        Some(o) => InvariantOutcome::Violated {
            path: engine.path_to(o),
            states_visited,
        },
        None if truncated => InvariantOutcome::Unknown { states_visited },
        None => InvariantOutcome::Holds { states_visited },
    })
}

/// An explicit labelled transition system.
#[derive(Debug, Clone)]
pub struct Lts {
    pub states: Vec<SystemState>,
    /// `(source, label, target)` ordinals; every generated edge is kept.
    pub edges: Vec<(usize, EdgeLabel, usize)>,
    pub truncated: bool,
    pub undefined_states: Vec<UndefinedState>,
}

/// Materializes the whole transition system (at most `max_states` states).
pub fn build_lts(
    initial: &SystemState,
    rules: &[RewriteRule],
    max_states: usize,
    options: ExploreOptions,
) -> Result<Lts, SearchError> {
    let mut engine = Engine::new(initial, rules, options)?;
    engine.lts_edges = Some(Vec::new());
    let limits = Limits {
        max_states,
        ..Limits::default()
    };
    let truncated = engine.run(limits, |_, _| true, |_, _, _| true)?;
    Ok(Lts {
        states: engine.states,
        edges: engine.lts_edges.unwrap_or_default(),
        truncated,
        undefined_states: engine.undefined,
    })
}

/// The classical reachability graph: firing only.
pub fn reachability_graph(initial: &SystemState, max_states: usize) -> Result<Lts, SearchError> {
    build_lts(initial, &[], max_states, ExploreOptions::default())
}

impl Lts {
    /// Graphviz rendering; states are labelled by their marking, plus the
    /// net when it differs from the initial one.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph lts {\n  node [shape=box];\n");
        let initial_net = self.states.first().map(|s| s.net().clone());
        for (i, s) in self.states.iter().enumerate() {
            let mut label = format!("s{i}\\n{}", s.marking());
            if initial_net.as_ref() != Some(s.net()) {
                label.push_str(&format!("\\n{}", s.net()));
            }
            let style = if i == 0 { ", style=bold" } else { "" };
            out.push_str(&format!("  s{i} [label=\"{}\"{style}];\n", escape(&label)));
        }
        for (src, label, dst) in &self.edges {
            out.push_str(&format!("  s{src} -> s{dst} [label=\"{}\"];\n", escape(&label.to_string())));
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('"', "\\\"")
}
