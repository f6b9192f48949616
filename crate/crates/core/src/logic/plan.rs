//! Query plans: user-declared locality decompositions of formulas.
//!
//! A plan tells a labeling scheme *how* to answer a query: which
//! quantifier-free / bounded / local / scattered shape it has and how the
//! answer combines component formulas. Plans are inputs, never inferred;
//! [`validate_plan`] compares a plan's prediction against direct oracle
//! evaluation of the formula it claims to decompose and reports any
//! disagreement with a witness.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{ColoredGraph, Vertex};

use super::ast::{Formula, SetVar, Var};
use super::eval::{distance_type, eval_oracle_named, scattered_exists, LogicError};
use super::parse::{parse_formula, print_formula, FormulaParseError};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("plan parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("plan structure error: {0}")]
    Structure(String),
    #[error("no delta case declared for distance type {0:?}")]
    MissingDelta(Vec<(usize, usize)>),
    #[error("plan kind mismatch: expected {expected}, got {got}")]
    KindMismatch { expected: &'static str, got: &'static str },
    #[error(transparent)]
    Formula(#[from] FormulaParseError),
    #[error(transparent)]
    Logic(#[from] LogicError),
}

// ---------------------------------------------------------------------------
// Boolean combinations
// ---------------------------------------------------------------------------

/// Boolean combination over leaves of type `L`, evaluated lazily so
/// expensive leaves short-circuit away.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoolComb<L> {
    Leaf(L),
    Const(bool),
    Not(Box<BoolComb<L>>),
    And(Box<BoolComb<L>>, Box<BoolComb<L>>),
    Or(Box<BoolComb<L>>, Box<BoolComb<L>>),
}

impl<L> BoolComb<L> {
    pub fn try_eval<E>(
        &self,
        leaf: &mut impl FnMut(&L) -> Result<bool, E>,
    ) -> Result<bool, E> {
        match self {
            BoolComb::Leaf(l) => leaf(l),
            BoolComb::Const(b) => Ok(*b),
            BoolComb::Not(inner) => Ok(!inner.try_eval(leaf)?),
            BoolComb::And(a, b) => Ok(a.try_eval(leaf)? && b.try_eval(leaf)?),
            BoolComb::Or(a, b) => Ok(a.try_eval(leaf)? || b.try_eval(leaf)?),
        }
    }

    pub fn leaves(&self) -> Vec<&L> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a L>) {
        match self {
            BoolComb::Leaf(l) => out.push(l),
            BoolComb::Const(_) => {}
            BoolComb::Not(i) => i.collect_leaves(out),
            BoolComb::And(a, b) | BoolComb::Or(a, b) => {
                a.collect_leaves(out);
                b.collect_leaves(out);
            }
        }
    }

    pub fn map_leaves<M, F: Fn(&L) -> M>(&self, f: &F) -> BoolComb<M> {
        match self {
            BoolComb::Leaf(l) => BoolComb::Leaf(f(l)),
            BoolComb::Const(b) => BoolComb::Const(*b),
            BoolComb::Not(i) => BoolComb::Not(Box::new(i.map_leaves(f))),
            BoolComb::And(a, b) => {
                BoolComb::And(Box::new(a.map_leaves(f)), Box::new(b.map_leaves(f)))
            }
            BoolComb::Or(a, b) => {
                BoolComb::Or(Box::new(a.map_leaves(f)), Box::new(b.map_leaves(f)))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Plan shapes
// ---------------------------------------------------------------------------

/// Quantifier-free query: the formula itself is the plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QfPlan {
    pub formula: Formula,
}

/// One basic bounded part: truth is witnessed inside some induced subgraph
/// of at most `p` vertices containing the arguments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicBounded {
    pub name: String,
    pub p: usize,
    pub vars: Vec<Var>,
    pub formula: Formula,
}

/// Boolean combination of basic bounded parts with overall bound `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundedPlan {
    pub p: usize,
    pub vars: Vec<Var>,
    pub set_vars: Vec<SetVar>,
    pub basics: Vec<BasicBounded>,
    pub expr: BoolComb<usize>,
}

/// Component formula of a delta case; its free FO variables must lie inside
/// one connected component of the distance type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanComponent {
    pub name: String,
    pub vars: Vec<Var>,
    pub formula: Formula,
}

/// The combination to use when the argument tuple has a given t-distance
/// type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaCase {
    /// 0-based pairs `(i, j)`, `i < j`, over the plan variable positions
    pub edges: BTreeSet<(usize, usize)>,
    pub components: Vec<PlanComponent>,
    pub expr: BoolComb<usize>,
}

/// A t-local query around the declared tuple, given by one combination per
/// distance type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalPlan {
    pub t: usize,
    pub vars: Vec<Var>,
    pub set_vars: Vec<SetVar>,
    pub deltas: Vec<DeltaCase>,
}

/// A basic (t,s)-local sentence: `s` pairwise (> 2t)-scattered witnesses,
/// each satisfying the t-local condition `psi` around its single free
/// variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScatteredPlan {
    pub t: usize,
    pub s: usize,
    pub set_vars: Vec<SetVar>,
    pub psi: Formula,
}

/// Basic local sentence appearing inside a general plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePart {
    pub name: String,
    pub t: usize,
    pub s: usize,
    pub psi: Formula,
}

/// A t-local part of a general plan: the formula is used directly when
/// validating; schemes additionally need the per-delta decomposition when
/// the part has two or more variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalPart {
    pub name: String,
    pub t: usize,
    pub vars: Vec<Var>,
    pub formula: Formula,
    pub deltas: Vec<DeltaCase>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneralLeaf {
    Local(usize),
    Sentence(usize),
}

/// Boolean combination of t-local parts and basic local sentences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneralPlan {
    pub vars: Vec<Var>,
    pub set_vars: Vec<SetVar>,
    pub locals: Vec<LocalPart>,
    pub sentences: Vec<SentencePart>,
    pub expr: BoolComb<GeneralLeaf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryPlan {
    QuantifierFree(QfPlan),
    Bounded(BoundedPlan),
    Local(LocalPlan),
    Scattered(ScatteredPlan),
    General(GeneralPlan),
}

impl QueryPlan {
    pub fn kind_name(&self) -> &'static str {
        match self {
            QueryPlan::QuantifierFree(_) => "qf",
            QueryPlan::Bounded(_) => "bounded",
            QueryPlan::Local(_) => "local",
            QueryPlan::Scattered(_) => "scattered",
            QueryPlan::General(_) => "general",
        }
    }

    /// The FO argument tuple, in binding order.
    pub fn vars(&self) -> Vec<Var> {
        match self {
            QueryPlan::QuantifierFree(p) => p.formula.free_fo_vars(),
            QueryPlan::Bounded(p) => p.vars.clone(),
            QueryPlan::Local(p) => p.vars.clone(),
            QueryPlan::Scattered(_) => Vec::new(),
            QueryPlan::General(p) => p.vars.clone(),
        }
    }

    /// The set-argument tuple, in binding order.
    pub fn set_vars(&self) -> Vec<SetVar> {
        match self {
            QueryPlan::QuantifierFree(p) => p.formula.free_set_vars(),
            QueryPlan::Bounded(p) => p.set_vars.clone(),
            QueryPlan::Local(p) => p.set_vars.clone(),
            QueryPlan::Scattered(p) => p.set_vars.clone(),
            QueryPlan::General(p) => p.set_vars.clone(),
        }
    }

    /// Structural validation: component variables inside delta components,
    /// declared arities consistent, unique names.
    pub fn validate(&self) -> Result<(), PlanError> {
        match self {
            QueryPlan::QuantifierFree(p) => {
                if !p.formula.is_quantifier_free() {
                    return Err(PlanError::Structure(
                        "qf plan formula contains a quantifier".into(),
                    ));
                }
                Ok(())
            }
            QueryPlan::Bounded(p) => {
                let mut names = BTreeSet::new();
                for b in &p.basics {
                    if !names.insert(b.name.as_str()) {
                        return Err(PlanError::Structure(format!("duplicate name {:?}", b.name)));
                    }
                    if b.p > p.p {
                        return Err(PlanError::Structure(format!(
                            "basic part {:?} has p={} above the plan bound {}",
                            b.name, b.p, p.p
                        )));
                    }
                    check_subset(&b.vars, &p.vars, &b.name)?;
                    check_subset(&b.formula.free_fo_vars(), &b.vars, &b.name)?;
                    check_subset(&b.formula.free_set_vars(), &p.set_vars, &b.name)?;
                }
                check_leaf_indices(&p.expr, p.basics.len())
            }
            QueryPlan::Local(p) => validate_local(p),
            QueryPlan::Scattered(p) => {
                let free = p.psi.free_fo_vars();
                if free.len() != 1 {
                    return Err(PlanError::Structure(format!(
                        "scattered psi must have exactly one free FO variable, found {free:?}"
                    )));
                }
                if p.s == 0 {
                    return Err(PlanError::Structure("scattered plan needs s >= 1".into()));
                }
                check_subset(&p.psi.free_set_vars(), &p.set_vars, "psi")?;
                Ok(())
            }
            QueryPlan::General(p) => {
                let mut names = BTreeSet::new();
                for l in &p.locals {
                    if !names.insert(l.name.as_str()) {
                        return Err(PlanError::Structure(format!("duplicate name {:?}", l.name)));
                    }
                    check_subset(&l.vars, &p.vars, &l.name)?;
                    check_subset(&l.formula.free_fo_vars(), &l.vars, &l.name)?;
                    check_subset(&l.formula.free_set_vars(), &p.set_vars, &l.name)?;
                    if !l.deltas.is_empty() {
                        let as_local = LocalPlan {
                            t: l.t,
                            vars: l.vars.clone(),
                            set_vars: p.set_vars.clone(),
                            deltas: l.deltas.clone(),
                        };
                        validate_local(&as_local)?;
                    }
                }
                for s in &p.sentences {
                    if !names.insert(s.name.as_str()) {
                        return Err(PlanError::Structure(format!("duplicate name {:?}", s.name)));
                    }
                    if s.psi.free_fo_vars().len() != 1 {
                        return Err(PlanError::Structure(format!(
                            "sentence part {:?} psi must have one free FO variable",
                            s.name
                        )));
                    }
                    check_subset(&s.psi.free_set_vars(), &p.set_vars, &s.name)?;
                }
                for leaf in p.expr.leaves() {
                    match *leaf {
                        GeneralLeaf::Local(i) if i >= p.locals.len() => {
                            return Err(PlanError::Structure("local leaf out of range".into()))
                        }
                        GeneralLeaf::Sentence(i) if i >= p.sentences.len() => {
                            return Err(PlanError::Structure("sentence leaf out of range".into()))
                        }
                        _ => {}
                    }
                }
                Ok(())
            }
        }
    }
}

fn check_subset(sub: &[String], sup: &[String], owner: &str) -> Result<(), PlanError> {
    for v in sub {
        if !sup.contains(v) {
            return Err(PlanError::Structure(format!(
                "{owner}: variable {v:?} is not declared in the enclosing plan"
            )));
        }
    }
    Ok(())
}

fn check_leaf_indices(expr: &BoolComb<usize>, len: usize) -> Result<(), PlanError> {
    for leaf in expr.leaves() {
        if *leaf >= len {
            return Err(PlanError::Structure("expression leaf out of range".into()));
        }
    }
    Ok(())
}

fn validate_local(p: &LocalPlan) -> Result<(), PlanError> {
    let m = p.vars.len();
    if m == 0 {
        return Err(PlanError::Structure("local plan needs at least one variable".into()));
    }
    let mut seen_edges = BTreeSet::new();
    for case in &p.deltas {
        for &(i, j) in &case.edges {
            if i >= j || j >= m {
                return Err(PlanError::Structure(format!(
                    "delta edge ({i},{j}) out of range for m={m}"
                )));
            }
        }
        if !seen_edges.insert(case.edges.clone()) {
            return Err(PlanError::Structure("duplicate delta case".into()));
        }
        let delta = super::DistanceType { m, t: p.t, edges: case.edges.clone() };
        let comps = delta.components();
        let mut names = BTreeSet::new();
        for comp in &case.components {
            if !names.insert(comp.name.as_str()) {
                return Err(PlanError::Structure(format!("duplicate name {:?}", comp.name)));
            }
            check_subset(&comp.vars, &p.vars, &comp.name)?;
            check_subset(&comp.formula.free_fo_vars(), &comp.vars, &comp.name)?;
            check_subset(&comp.formula.free_set_vars(), &p.set_vars, &comp.name)?;
            let idxs: Vec<usize> = comp
                .vars
                .iter()
                .map(|v| p.vars.iter().position(|pv| pv == v).unwrap())
                .collect();
            let inside_one = comps.iter().any(|c| idxs.iter().all(|i| c.contains(i)));
            if !inside_one {
                return Err(PlanError::Structure(format!(
                    "component {:?} spans more than one delta component",
                    comp.name
                )));
            }
        }
        check_leaf_indices(&case.expr, case.components.len())?;
    }
    Ok(())
}

impl LocalPlan {
    pub fn case_for(&self, edges: &BTreeSet<(usize, usize)>) -> Option<&DeltaCase> {
        self.deltas.iter().find(|c| &c.edges == edges)
    }
}

// ---------------------------------------------------------------------------
// plan-route oracle evaluation
// ---------------------------------------------------------------------------

fn bind_named<'a>(
    vars: &'a [Var],
    args: &[Vertex],
) -> Result<Vec<(String, Vertex)>, PlanError> {
    if vars.len() != args.len() {
        return Err(PlanError::Structure(format!(
            "plan takes {} arguments, got {}",
            vars.len(),
            args.len()
        )));
    }
    Ok(vars.iter().cloned().zip(args.iter().copied()).collect())
}

fn eval_component(
    graph: &ColoredGraph,
    formula: &Formula,
    bindings: &[(String, Vertex)],
    sets: &[(String, &BTreeSet<Vertex>)],
) -> Result<bool, PlanError> {
    let free = formula.free_fo_vars();
    let args: Vec<(String, Vertex)> = free
        .iter()
        .map(|v| {
            bindings
                .iter()
                .find(|(n, _)| n == v)
                .cloned()
                .ok_or_else(|| PlanError::Structure(format!("unbound plan variable {v:?}")))
        })
        .collect::<Result<_, _>>()?;
    Ok(eval_oracle_named(graph, formula, &args, sets)?)
}

/// Truth of a basic (t,s)-local sentence per its definition: witnesses
/// evaluated on their radius-t balls, scatteredness checked at distance
/// threshold 2t.
pub(crate) fn eval_basic_local_sentence(
    graph: &ColoredGraph,
    t: usize,
    s: usize,
    psi: &Formula,
    sets: &[(String, &BTreeSet<Vertex>)],
) -> Result<bool, PlanError> {
    let satisfied = vertices_satisfying_locally(graph, t, psi, sets)?;
    Ok(scattered_exists(graph, &satisfied, s, 2 * t)?)
}

/// The set `P = { a : G[N^t(a)] |= psi(a, W cap N^t(a)) }`, ascending.
pub(crate) fn vertices_satisfying_locally(
    graph: &ColoredGraph,
    t: usize,
    psi: &Formula,
    sets: &[(String, &BTreeSet<Vertex>)],
) -> Result<Vec<Vertex>, PlanError> {
    let free = psi.free_fo_vars();
    if free.len() != 1 {
        return Err(PlanError::Structure(
            "basic local sentence psi must have one free FO variable".into(),
        ));
    }
    let var = &free[0];
    let mut out = Vec::new();
    for a in 0..graph.n() {
        let ball = graph.ball_of(a, t).map_err(LogicError::from)?;
        let (piece, map) = graph.induced_subgraph(&ball).map_err(LogicError::from)?;
        let local_a = map.binary_search(&a).expect("center lies in its own ball");
        let clipped: Vec<(String, BTreeSet<Vertex>)> = sets
            .iter()
            .map(|(name, w)| {
                let local: BTreeSet<Vertex> = w
                    .iter()
                    .filter_map(|g| map.binary_search(g).ok())
                    .collect();
                (name.clone(), local)
            })
            .collect();
        let clipped_refs: Vec<(String, &BTreeSet<Vertex>)> =
            clipped.iter().map(|(n, w)| (n.clone(), w)).collect();
        if eval_oracle_named(&piece, psi, &[(var.clone(), local_a)], &clipped_refs)? {
            out.push(a);
        }
    }
    Ok(out)
}

fn eval_local_plan_oracle(
    graph: &ColoredGraph,
    plan: &LocalPlan,
    bindings: &[(String, Vertex)],
    sets: &[(String, &BTreeSet<Vertex>)],
) -> Result<bool, PlanError> {
    let tuple: Vec<Vertex> = plan
        .vars
        .iter()
        .map(|v| {
            bindings
                .iter()
                .find(|(n, _)| n == v)
                .map(|&(_, a)| a)
                .ok_or_else(|| PlanError::Structure(format!("unbound plan variable {v:?}")))
        })
        .collect::<Result<_, _>>()?;
    let delta = distance_type(graph, &tuple, plan.t)?;
    let case = plan
        .case_for(&delta.edges)
        .ok_or_else(|| PlanError::MissingDelta(delta.key()))?;
    case.expr.try_eval(&mut |&idx: &usize| {
        eval_component(graph, &case.components[idx].formula, bindings, sets)
    })
}

/// Evaluates the plan's prediction on a concrete instance, components
/// resolved by the brute-force oracle. This is the reference reading used by
/// [`validate_plan`]; scheme decoders must agree with it from labels alone.
pub fn eval_plan_oracle(
    graph: &ColoredGraph,
    plan: &QueryPlan,
    args: &[Vertex],
    sets: &[&BTreeSet<Vertex>],
) -> Result<bool, PlanError> {
    let set_vars = plan.set_vars();
    if set_vars.len() != sets.len() {
        return Err(PlanError::Structure(format!(
            "plan takes {} set arguments, got {}",
            set_vars.len(),
            sets.len()
        )));
    }
    let named_sets: Vec<(String, &BTreeSet<Vertex>)> =
        set_vars.into_iter().zip(sets.iter().copied()).collect();
    match plan {
        QueryPlan::QuantifierFree(p) => {
            let bindings = bind_named(&p.formula.free_fo_vars(), args)?;
            eval_component(graph, &p.formula, &bindings, &named_sets)
        }
        QueryPlan::Bounded(p) => {
            let bindings = bind_named(&p.vars, args)?;
            p.expr.try_eval(&mut |&idx: &usize| {
                eval_component(graph, &p.basics[idx].formula, &bindings, &named_sets)
            })
        }
        QueryPlan::Local(p) => {
            let bindings = bind_named(&p.vars, args)?;
            eval_local_plan_oracle(graph, p, &bindings, &named_sets)
        }
        QueryPlan::Scattered(p) => {
            if !args.is_empty() {
                return Err(PlanError::Structure("scattered plans take no FO arguments".into()));
            }
            eval_basic_local_sentence(graph, p.t, p.s, &p.psi, &named_sets)
        }
        QueryPlan::General(p) => {
            let bindings = bind_named(&p.vars, args)?;
            p.expr.try_eval(&mut |leaf: &GeneralLeaf| match *leaf {
                GeneralLeaf::Local(i) => {
                    eval_component(graph, &p.locals[i].formula, &bindings, &named_sets)
                }
                GeneralLeaf::Sentence(i) => {
                    let s = &p.sentences[i];
                    eval_basic_local_sentence(graph, s.t, s.s, &s.psi, &named_sets)
                }
            })
        }
    }
}

// ---------------------------------------------------------------------------
// empirical plan validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, serde::Serialize)]
pub struct PlanDisagreement {
    pub graph_index: usize,
    pub args: Vec<Vertex>,
    pub sets: Vec<Vec<Vertex>>,
    pub formula_truth: bool,
    pub plan_truth: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct PlanReport {
    pub samples: usize,
    pub disagreements: Vec<PlanDisagreement>,
}

impl PlanReport {
    pub fn passed(&self) -> bool {
        self.disagreements.is_empty()
    }
}

/// Samples `(args, sets)` instances on each graph and compares direct oracle
/// evaluation of `formula` against the plan's prediction. The formula's
/// free variables are bound by name to the plan's variables.
pub fn validate_plan(
    plan: &QueryPlan,
    formula: &Formula,
    graphs: &[ColoredGraph],
    samples_per_graph: usize,
    seed: u64,
) -> Result<PlanReport, PlanError> {
    plan.validate()?;
    let vars = plan.vars();
    let set_vars = plan.set_vars();
    check_subset(&formula.free_fo_vars(), &vars, "formula")?;
    check_subset(&formula.free_set_vars(), &set_vars, "formula")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = 0;
    let mut disagreements = Vec::new();
    for (graph_index, graph) in graphs.iter().enumerate() {
        if graph.n() == 0 {
            continue;
        }
        for _ in 0..samples_per_graph {
            let args: Vec<Vertex> = (0..vars.len()).map(|_| rng.gen_range(0..graph.n())).collect();
            let sets: Vec<BTreeSet<Vertex>> = (0..set_vars.len())
                .map(|_| (0..graph.n()).filter(|_| rng.gen_bool(0.3)).collect())
                .collect();
            let set_refs: Vec<&BTreeSet<Vertex>> = sets.iter().collect();
            let bindings: Vec<(String, Vertex)> =
                vars.iter().cloned().zip(args.iter().copied()).collect();
            let named_sets: Vec<(String, &BTreeSet<Vertex>)> =
                set_vars.iter().cloned().zip(set_refs.iter().copied()).collect();
            let formula_truth = eval_component(graph, formula, &bindings, &named_sets)?;
            let plan_truth = eval_plan_oracle(graph, plan, &args, &set_refs)?;
            samples += 1;
            if formula_truth != plan_truth {
                disagreements.push(PlanDisagreement {
                    graph_index,
                    args,
                    sets: sets.iter().map(|s| s.iter().copied().collect()).collect(),
                    formula_truth,
                    plan_truth,
                });
            }
        }
    }
    Ok(PlanReport { samples, disagreements })
}

// ---------------------------------------------------------------------------
// text format
// ---------------------------------------------------------------------------

fn parse_expr_names(text: &str, line: usize) -> Result<BoolComb<String>, PlanError> {
    struct P<'a> {
        bytes: &'a [u8],
        pos: usize,
        line: usize,
    }
    impl<'a> P<'a> {
        fn err(&self, m: &str) -> PlanError {
            PlanError::Parse { line: self.line, message: m.to_owned() }
        }
        fn skip(&mut self) {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
        }
        fn peek(&mut self) -> Option<u8> {
            self.skip();
            self.bytes.get(self.pos).copied()
        }
        fn or(&mut self) -> Result<BoolComb<String>, PlanError> {
            let mut acc = self.and()?;
            while self.peek() == Some(b'|') {
                self.pos += 1;
                acc = BoolComb::Or(Box::new(acc), Box::new(self.and()?));
            }
            Ok(acc)
        }
        fn and(&mut self) -> Result<BoolComb<String>, PlanError> {
            let mut acc = self.unary()?;
            while self.peek() == Some(b'&') {
                self.pos += 1;
                acc = BoolComb::And(Box::new(acc), Box::new(self.unary()?));
            }
            Ok(acc)
        }
        fn unary(&mut self) -> Result<BoolComb<String>, PlanError> {
            match self.peek() {
                Some(b'!') => {
                    self.pos += 1;
                    Ok(BoolComb::Not(Box::new(self.unary()?)))
                }
                Some(b'(') => {
                    self.pos += 1;
                    let inner = self.or()?;
                    if self.peek() != Some(b')') {
                        return Err(self.err("expected ')'"));
                    }
                    self.pos += 1;
                    Ok(inner)
                }
                Some(c) if c.is_ascii_alphanumeric() || c == b'_' => {
                    let start = self.pos;
                    while self.pos < self.bytes.len()
                        && (self.bytes[self.pos].is_ascii_alphanumeric()
                            || self.bytes[self.pos] == b'_')
                    {
                        self.pos += 1;
                    }
                    let name = String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned();
                    match name.as_str() {
                        "true" => Ok(BoolComb::Const(true)),
                        "false" => Ok(BoolComb::Const(false)),
                        _ => Ok(BoolComb::Leaf(name)),
                    }
                }
                _ => Err(self.err("expected a name, '!', '(' or constant")),
            }
        }
    }
    let mut p = P { bytes: text.as_bytes(), pos: 0, line };
    let expr = p.or()?;
    p.skip();
    if p.pos != p.bytes.len() {
        return Err(p.err("trailing input in expression"));
    }
    Ok(expr)
}

fn resolve_expr(
    expr: &BoolComb<String>,
    names: &BTreeMap<String, usize>,
    line: usize,
) -> Result<BoolComb<usize>, PlanError> {
    for leaf in expr.leaves() {
        if !names.contains_key(leaf) {
            return Err(PlanError::Parse { line, message: format!("unknown part name {leaf:?}") });
        }
    }
    Ok(expr.map_leaves(&|name: &String| names[name]))
}

fn parse_vars_list(s: &str) -> Vec<String> {
    let trimmed = s.trim();
    if trimmed.is_empty() || trimmed == "none" {
        return Vec::new();
    }
    trimmed.split(',').map(|v| v.trim().to_owned()).filter(|v| !v.is_empty()).collect()
}

fn parse_delta_edges(s: &str, line: usize) -> Result<BTreeSet<(usize, usize)>, PlanError> {
    let trimmed = s.trim();
    if trimmed == "none" || trimmed.is_empty() {
        return Ok(BTreeSet::new());
    }
    let mut edges = BTreeSet::new();
    for part in trimmed.split(',') {
        let mut it = part.trim().split('-');
        let parse = |tok: Option<&str>| -> Result<usize, PlanError> {
            tok.and_then(|t| t.trim().parse::<usize>().ok())
                .filter(|&v| v >= 1)
                .ok_or(PlanError::Parse {
                    line,
                    message: "delta edges are 1-based pairs like 1-2,1-3".into(),
                })
        };
        let i = parse(it.next())?;
        let j = parse(it.next())?;
        if it.next().is_some() || i == j {
            return Err(PlanError::Parse { line, message: "bad delta edge".into() });
        }
        edges.insert((i.min(j) - 1, i.max(j) - 1));
    }
    Ok(edges)
}

struct Lines<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, raw)| (i + 1, raw.split('#').next().unwrap_or("").trim_end()))
            .filter(|(_, l)| !l.trim().is_empty())
            .collect();
        Lines { lines, pos: 0 }
    }

    fn peek(&self) -> Option<(usize, &'a str)> {
        self.lines.get(self.pos).copied()
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        let item = self.peek();
        if item.is_some() {
            self.pos += 1;
        }
        item
    }
}

/// Splits `head :: formula-text`, returning the head tokens and the parsed
/// formula.
fn split_head_formula(line: &str, line_no: usize) -> Result<(Vec<String>, Formula), PlanError> {
    let (head, tail) = line.split_once("::").ok_or(PlanError::Parse {
        line: line_no,
        message: "expected `:: <formula>`".into(),
    })?;
    let tokens = head.split_whitespace().map(|s| s.to_owned()).collect();
    let formula = parse_formula(tail.trim())?;
    Ok((tokens, formula))
}

fn key_value<'a>(tokens: &'a [String], key: &str) -> Option<&'a str> {
    tokens
        .iter()
        .position(|t| t == key)
        .and_then(|i| tokens.get(i + 1))
        .map(String::as_str)
}

fn parse_delta_blocks(
    lines: &mut Lines,
    stop_words: &[&str],
) -> Result<Vec<DeltaCase>, PlanError> {
    let mut deltas = Vec::new();
    while let Some((line_no, raw)) = lines.peek() {
        let line = raw.trim();
        let first = line.split_whitespace().next().unwrap_or("");
        if stop_words.contains(&first) {
            break;
        }
        if first != "delta" {
            return Err(PlanError::Parse {
                line: line_no,
                message: format!("expected `delta ...`, got {first:?}"),
            });
        }
        lines.next();
        let edges = parse_delta_edges(line.trim_start_matches("delta"), line_no)?;
        let mut components = Vec::new();
        let expr = loop {
            let Some((no, raw)) = lines.peek() else {
                return Err(PlanError::Parse {
                    line: line_no,
                    message: "delta block missing `expr` line".into(),
                });
            };
            let line = raw.trim();
            let first = line.split_whitespace().next().unwrap_or("");
            match first {
                "comp" => {
                    lines.next();
                    let (tokens, formula) = split_head_formula(line, no)?;
                    let name = tokens.get(1).cloned().ok_or(PlanError::Parse {
                        line: no,
                        message: "comp needs a name".into(),
                    })?;
                    let vars = parse_vars_list(key_value(&tokens, "vars").unwrap_or(""));
                    components.push(PlanComponent { name, vars, formula });
                }
                "expr" => {
                    lines.next();
                    break parse_expr_names(line.trim_start_matches("expr"), no)?;
                }
                _ => {
                    return Err(PlanError::Parse {
                        line: no,
                        message: format!("expected comp/expr inside delta block, got {first:?}"),
                    })
                }
            }
        };
        let names: BTreeMap<String, usize> =
            components.iter().enumerate().map(|(i, c)| (c.name.clone(), i)).collect();
        let expr = resolve_expr(&expr, &names, line_no)?;
        deltas.push(DeltaCase { edges, components, expr });
    }
    Ok(deltas)
}

/// Parses the structured plan text format. See the crate README for the
/// grammar; `print_plan` emits the same dialect.
pub fn parse_plan(text: &str) -> Result<QueryPlan, PlanError> {
    let mut lines = Lines::new(text);
    let (kind_line, kind) = {
        let (no, line) = lines.next().ok_or(PlanError::Parse {
            line: 0,
            message: "empty plan".into(),
        })?;
        let mut it = line.split_whitespace();
        if it.next() != Some("kind") {
            return Err(PlanError::Parse { line: no, message: "first line must be `kind ...`".into() });
        }
        (no, it.next().unwrap_or("").to_owned())
    };

    let mut vars: Vec<String> = Vec::new();
    let mut set_vars: Vec<String> = Vec::new();
    let mut t: Option<usize> = None;
    let mut s: Option<usize> = None;
    let mut p: Option<usize> = None;

    // shared header lines
    while let Some((no, raw)) = lines.peek() {
        let line = raw.trim();
        let mut it = line.split_whitespace();
        match it.next().unwrap_or("") {
            "vars" => {
                vars = parse_vars_list(line.trim_start_matches("vars"));
                lines.next();
            }
            "setvars" => {
                set_vars = parse_vars_list(line.trim_start_matches("setvars"));
                lines.next();
            }
            "t" => {
                t = Some(it.next().and_then(|v| v.parse().ok()).ok_or(PlanError::Parse {
                    line: no,
                    message: "bad t".into(),
                })?);
                lines.next();
            }
            "s" => {
                s = Some(it.next().and_then(|v| v.parse().ok()).ok_or(PlanError::Parse {
                    line: no,
                    message: "bad s".into(),
                })?);
                lines.next();
            }
            "p" => {
                p = Some(it.next().and_then(|v| v.parse().ok()).ok_or(PlanError::Parse {
                    line: no,
                    message: "bad p".into(),
                })?);
                lines.next();
            }
            _ => break,
        }
    }

    let plan = match kind.as_str() {
        "qf" => {
            let (no, line) = lines.next().ok_or(PlanError::Parse {
                line: kind_line,
                message: "qf plan needs a `formula ::` line".into(),
            })?;
            let (tokens, formula) = split_head_formula(line, no)?;
            if tokens.first().map(String::as_str) != Some("formula") {
                return Err(PlanError::Parse { line: no, message: "expected `formula ::`".into() });
            }
            QueryPlan::QuantifierFree(QfPlan { formula })
        }
        "local" => {
            let t = t.ok_or(PlanError::Parse { line: kind_line, message: "local plan needs t".into() })?;
            let deltas = parse_delta_blocks(&mut lines, &[])?;
            QueryPlan::Local(LocalPlan { t, vars, set_vars, deltas })
        }
        "scattered" => {
            let t = t.ok_or(PlanError::Parse { line: kind_line, message: "scattered plan needs t".into() })?;
            let s = s.ok_or(PlanError::Parse { line: kind_line, message: "scattered plan needs s".into() })?;
            let (no, line) = lines.next().ok_or(PlanError::Parse {
                line: kind_line,
                message: "scattered plan needs a `psi ::` line".into(),
            })?;
            let (tokens, psi) = split_head_formula(line, no)?;
            if tokens.first().map(String::as_str) != Some("psi") {
                return Err(PlanError::Parse { line: no, message: "expected `psi ::`".into() });
            }
            let set_vars = if set_vars.is_empty() { psi.free_set_vars() } else { set_vars };
            QueryPlan::Scattered(ScatteredPlan { t, s, set_vars, psi })
        }
        "bounded" => {
            let p = p.ok_or(PlanError::Parse { line: kind_line, message: "bounded plan needs p".into() })?;
            let mut basics = Vec::new();
            let mut expr = None;
            while let Some((no, raw)) = lines.next() {
                let line = raw.trim();
                let first = line.split_whitespace().next().unwrap_or("");
                match first {
                    "basic" => {
                        let (tokens, formula) = split_head_formula(line, no)?;
                        let name = tokens.get(1).cloned().ok_or(PlanError::Parse {
                            line: no,
                            message: "basic needs a name".into(),
                        })?;
                        let part_p = key_value(&tokens, "p")
                            .and_then(|v| v.parse().ok())
                            .unwrap_or(p);
                        let part_vars = parse_vars_list(key_value(&tokens, "vars").unwrap_or(""));
                        basics.push(BasicBounded { name, p: part_p, vars: part_vars, formula });
                    }
                    "expr" => {
                        expr = Some((no, parse_expr_names(line.trim_start_matches("expr"), no)?));
                        break;
                    }
                    _ => {
                        return Err(PlanError::Parse {
                            line: no,
                            message: format!("expected basic/expr, got {first:?}"),
                        })
                    }
                }
            }
            let (expr_line, expr) = expr.ok_or(PlanError::Parse {
                line: kind_line,
                message: "bounded plan missing expr".into(),
            })?;
            let names: BTreeMap<String, usize> =
                basics.iter().enumerate().map(|(i, b)| (b.name.clone(), i)).collect();
            let expr = resolve_expr(&expr, &names, expr_line)?;
            if set_vars.is_empty() {
                for b in &basics {
                    for sv in b.formula.free_set_vars() {
                        if !set_vars.contains(&sv) {
                            set_vars.push(sv);
                        }
                    }
                }
            }
            QueryPlan::Bounded(BoundedPlan { p, vars, set_vars, basics, expr })
        }
        "general" => {
            let mut locals: Vec<LocalPart> = Vec::new();
            let mut sentences: Vec<SentencePart> = Vec::new();
            let mut expr = None;
            while let Some((no, raw)) = lines.next() {
                let line = raw.trim();
                let first = line.split_whitespace().next().unwrap_or("");
                match first {
                    "local" => {
                        let (tokens, formula) = split_head_formula(line, no)?;
                        let name = tokens.get(1).cloned().ok_or(PlanError::Parse {
                            line: no,
                            message: "local part needs a name".into(),
                        })?;
                        let part_t = key_value(&tokens, "t")
                            .and_then(|v| v.parse().ok())
                            .ok_or(PlanError::Parse { line: no, message: "local part needs t".into() })?;
                        let part_vars = parse_vars_list(key_value(&tokens, "vars").unwrap_or(""));
                        let deltas = parse_delta_blocks(&mut lines, &["end"])?;
                        match lines.next() {
                            Some((_, l)) if l.trim() == "end" => {}
                            other => {
                                return Err(PlanError::Parse {
                                    line: other.map(|(n, _)| n).unwrap_or(no),
                                    message: "local part must close with `end`".into(),
                                })
                            }
                        }
                        locals.push(LocalPart { name, t: part_t, vars: part_vars, formula, deltas });
                    }
                    "sentence" => {
                        let (tokens, psi) = split_head_formula(line, no)?;
                        let name = tokens.get(1).cloned().ok_or(PlanError::Parse {
                            line: no,
                            message: "sentence part needs a name".into(),
                        })?;
                        let part_t = key_value(&tokens, "t")
                            .and_then(|v| v.parse().ok())
                            .ok_or(PlanError::Parse { line: no, message: "sentence needs t".into() })?;
                        let part_s = key_value(&tokens, "s")
                            .and_then(|v| v.parse().ok())
                            .ok_or(PlanError::Parse { line: no, message: "sentence needs s".into() })?;
                        sentences.push(SentencePart { name, t: part_t, s: part_s, psi });
                    }
                    "expr" => {
                        expr = Some((no, parse_expr_names(line.trim_start_matches("expr"), no)?));
                        break;
                    }
                    _ => {
                        return Err(PlanError::Parse {
                            line: no,
                            message: format!("expected local/sentence/expr, got {first:?}"),
                        })
                    }
                }
            }
            let (expr_line, expr) = expr.ok_or(PlanError::Parse {
                line: kind_line,
                message: "general plan missing expr".into(),
            })?;
            let mut names: BTreeMap<String, GeneralLeaf> = BTreeMap::new();
            for (i, l) in locals.iter().enumerate() {
                names.insert(l.name.clone(), GeneralLeaf::Local(i));
            }
            for (i, s) in sentences.iter().enumerate() {
                names.insert(s.name.clone(), GeneralLeaf::Sentence(i));
            }
            for leaf in expr.leaves() {
                if !names.contains_key(leaf) {
                    return Err(PlanError::Parse {
                        line: expr_line,
                        message: format!("unknown part name {leaf:?}"),
                    });
                }
            }
            let expr = expr.map_leaves(&|name: &String| names[name]);
            if set_vars.is_empty() {
                for f in locals
                    .iter()
                    .map(|l| &l.formula)
                    .chain(sentences.iter().map(|s| &s.psi))
                {
                    for sv in f.free_set_vars() {
                        if !set_vars.contains(&sv) {
                            set_vars.push(sv);
                        }
                    }
                }
            }
            QueryPlan::General(GeneralPlan { vars, set_vars, locals, sentences, expr })
        }
        other => {
            return Err(PlanError::Parse {
                line: kind_line,
                message: format!("unknown plan kind {other:?}"),
            })
        }
    };
    if let Some((no, line)) = lines.next() {
        return Err(PlanError::Parse {
            line: no,
            message: format!("unexpected trailing line {:?}", line.trim()),
        });
    }
    plan.validate()?;
    Ok(plan)
}

fn print_expr<L, F: Fn(&L) -> String>(expr: &BoolComb<L>, name: &F, out: &mut String) {
    match expr {
        BoolComb::Leaf(l) => out.push_str(&name(l)),
        BoolComb::Const(b) => out.push_str(if *b { "true" } else { "false" }),
        BoolComb::Not(i) => {
            out.push_str("!(");
            print_expr(i, name, out);
            out.push(')');
        }
        BoolComb::And(a, b) => {
            out.push('(');
            print_expr(a, name, out);
            out.push_str(" & ");
            print_expr(b, name, out);
            out.push(')');
        }
        BoolComb::Or(a, b) => {
            out.push('(');
            print_expr(a, name, out);
            out.push_str(" | ");
            print_expr(b, name, out);
            out.push(')');
        }
    }
}

fn print_vars(vars: &[String]) -> String {
    if vars.is_empty() {
        "none".to_owned()
    } else {
        vars.join(",")
    }
}

fn print_delta_blocks(deltas: &[DeltaCase], out: &mut String) {
    for case in deltas {
        if case.edges.is_empty() {
            out.push_str("delta none\n");
        } else {
            let edges: Vec<String> =
                case.edges.iter().map(|&(i, j)| format!("{}-{}", i + 1, j + 1)).collect();
            writeln!(out, "delta {}", edges.join(",")).unwrap();
        }
        for comp in &case.components {
            writeln!(
                out,
                "comp {} vars {} :: {}",
                comp.name,
                print_vars(&comp.vars),
                print_formula(&comp.formula)
            )
            .unwrap();
        }
        out.push_str("expr ");
        print_expr(&case.expr, &|&i: &usize| case.components[i].name.clone(), out);
        out.push('\n');
    }
}

/// Canonical plan text; `parse_plan(print_plan(p))` reproduces `p`.
pub fn print_plan(plan: &QueryPlan) -> String {
    let mut out = String::new();
    match plan {
        QueryPlan::QuantifierFree(p) => {
            out.push_str("kind qf\n");
            writeln!(out, "formula :: {}", print_formula(&p.formula)).unwrap();
        }
        QueryPlan::Local(p) => {
            out.push_str("kind local\n");
            writeln!(out, "vars {}", print_vars(&p.vars)).unwrap();
            writeln!(out, "setvars {}", print_vars(&p.set_vars)).unwrap();
            writeln!(out, "t {}", p.t).unwrap();
            print_delta_blocks(&p.deltas, &mut out);
        }
        QueryPlan::Scattered(p) => {
            out.push_str("kind scattered\n");
            writeln!(out, "setvars {}", print_vars(&p.set_vars)).unwrap();
            writeln!(out, "t {}", p.t).unwrap();
            writeln!(out, "s {}", p.s).unwrap();
            writeln!(out, "psi :: {}", print_formula(&p.psi)).unwrap();
        }
        QueryPlan::Bounded(p) => {
            out.push_str("kind bounded\n");
            writeln!(out, "vars {}", print_vars(&p.vars)).unwrap();
            writeln!(out, "setvars {}", print_vars(&p.set_vars)).unwrap();
            writeln!(out, "p {}", p.p).unwrap();
            for b in &p.basics {
                writeln!(
                    out,
                    "basic {} p {} vars {} :: {}",
                    b.name,
                    b.p,
                    print_vars(&b.vars),
                    print_formula(&b.formula)
                )
                .unwrap();
            }
            out.push_str("expr ");
            print_expr(&p.expr, &|&i: &usize| p.basics[i].name.clone(), &mut out);
            out.push('\n');
        }
        QueryPlan::General(p) => {
            out.push_str("kind general\n");
            writeln!(out, "vars {}", print_vars(&p.vars)).unwrap();
            writeln!(out, "setvars {}", print_vars(&p.set_vars)).unwrap();
            for l in &p.locals {
                writeln!(
                    out,
                    "local {} t {} vars {} :: {}",
                    l.name,
                    l.t,
                    print_vars(&l.vars),
                    print_formula(&l.formula)
                )
                .unwrap();
                print_delta_blocks(&l.deltas, &mut out);
                out.push_str("end\n");
            }
            for s in &p.sentences {
                writeln!(out, "sentence {} t {} s {} :: {}", s.name, s.t, s.s, print_formula(&s.psi))
                    .unwrap();
            }
            out.push_str("expr ");
            print_expr(
                &p.expr,
                &|leaf: &GeneralLeaf| match *leaf {
                    GeneralLeaf::Local(i) => p.locals[i].name.clone(),
                    GeneralLeaf::Sentence(i) => p.sentences[i].name.clone(),
                },
                &mut out,
            );
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete_graph, cycle_graph, path_graph};
    use crate::logic::ast::common_neighbor_formula;

    const LOCAL_PLAN: &str = "
# two-variable 1-local plan
kind local
vars x,y
setvars Y
t 1
delta none
comp c1 vars x :: E z. (edge(x,z) & z in Y)
comp c2 vars y :: E z. (edge(y,z) & z in Y)
expr c1 & c2
delta 1-2
comp c12 vars x,y :: dist(x,y)<=3 & (E z. (edge(x,z) & z in Y)) & (E z. (edge(y,z) & z in Y))
expr c12
";

    #[test]
    fn parse_and_round_trip_local() {
        let plan = parse_plan(LOCAL_PLAN).unwrap();
        assert_eq!(plan.kind_name(), "local");
        assert_eq!(plan.vars(), vec!["x".to_owned(), "y".to_owned()]);
        let printed = print_plan(&plan);
        assert_eq!(parse_plan(&printed).unwrap(), plan);
    }

    #[test]
    fn local_plan_matches_formula() {
        // formula: both x and y have a neighbor in Y (component-wise, so the
        // delta split is exact)
        let formula =
            parse_formula("(E z. (edge(x,z) & z in Y)) & (E z. (edge(y,z) & z in Y))").unwrap();
        let plan = parse_plan(LOCAL_PLAN).unwrap();
        let graphs = vec![path_graph(9), cycle_graph(8), complete_graph(5)];
        let report = validate_plan(&plan, &formula, &graphs, 60, 11).unwrap();
        assert!(report.passed(), "disagreements: {:?}", report.disagreements);
    }

    #[test]
    fn wrong_plan_is_flagged() {
        // deliberately wrong: delta 1-2 case answers false always
        let bad = "
kind local
vars x,y
setvars Y
t 1
delta none
comp c1 vars x :: E z. (edge(x,z) & z in Y)
comp c2 vars y :: E z. (edge(y,z) & z in Y)
expr c1 & c2
delta 1-2
comp c12 vars x,y :: x != x
expr c12
";
        let formula =
            parse_formula("(E z. (edge(x,z) & z in Y)) & (E z. (edge(y,z) & z in Y))").unwrap();
        let plan = parse_plan(bad).unwrap();
        let graphs = vec![path_graph(9)];
        let report = validate_plan(&plan, &formula, &graphs, 80, 5).unwrap();
        assert!(!report.passed());
        let w = &report.disagreements[0];
        assert_ne!(w.formula_truth, w.plan_truth);
    }

    #[test]
    fn trivial_general_wrap_agrees() {
        let formula = common_neighbor_formula();
        let plan = QueryPlan::General(GeneralPlan {
            vars: vec!["x".into(), "y".into()],
            set_vars: vec![],
            locals: vec![LocalPart {
                name: "whole".into(),
                t: 1,
                vars: vec!["x".into(), "y".into()],
                formula: formula.clone(),
                deltas: vec![],
            }],
            sentences: vec![],
            expr: BoolComb::Leaf(GeneralLeaf::Local(0)),
        });
        let graphs = vec![path_graph(7), cycle_graph(6)];
        let report = validate_plan(&plan, &formula, &graphs, 60, 3).unwrap();
        assert!(report.passed());
        let printed = print_plan(&plan);
        assert_eq!(parse_plan(&printed).unwrap(), plan);
    }

    #[test]
    fn scattered_plan_round_trip_and_eval() {
        let text = "
kind scattered
t 1
s 2
psi :: E z. (edge(x,z) & z in Y)
";
        let plan = parse_plan(text).unwrap();
        assert_eq!(parse_plan(&print_plan(&plan)).unwrap(), plan);
        // P10 with Y = {0, 9}: vertices 1 and 8 satisfy psi, d(1,8) = 7 > 2
        let g = path_graph(10);
        let w: BTreeSet<usize> = [0, 9].into();
        assert!(eval_plan_oracle(&g, &plan, &[], &[&w]).unwrap());
        // Y = {0}: only vertex 1 qualifies, no scattered pair
        let w: BTreeSet<usize> = [0].into();
        assert!(!eval_plan_oracle(&g, &plan, &[], &[&w]).unwrap());
    }

    #[test]
    fn bounded_plan_round_trip() {
        let text = "
kind bounded
vars x,y
p 3
basic b1 p 3 vars x,y :: x != y & E z. (z != x & z != y & edge(x,z) & edge(z,y))
basic b2 p 2 vars x,y :: edge(x,y)
expr b1 | b2
";
        let plan = parse_plan(text).unwrap();
        assert_eq!(parse_plan(&print_plan(&plan)).unwrap(), plan);
        let g = path_graph(5);
        assert!(eval_plan_oracle(&g, &plan, &[0, 2], &[]).unwrap());
        assert!(eval_plan_oracle(&g, &plan, &[0, 1], &[]).unwrap());
        assert!(!eval_plan_oracle(&g, &plan, &[0, 4], &[]).unwrap());
    }

    #[test]
    fn structural_validation_rejects_bad_plans() {
        // component spans two delta components
        let bad = "
kind local
vars x,y
t 1
delta none
comp c vars x,y :: edge(x,y)
expr c
";
        assert!(matches!(parse_plan(bad), Err(PlanError::Structure(_))));

        // missing delta at evaluation
        let partial = "
kind local
vars x,y
t 1
delta 1-2
comp c vars x,y :: edge(x,y)
expr c
";
        let plan = parse_plan(partial).unwrap();
        let g = path_graph(10);
        assert!(matches!(
            eval_plan_oracle(&g, &plan, &[0, 9], &[]),
            Err(PlanError::MissingDelta(_))
        ));
    }
}
