//! Empirical validators for declared locality and boundedness.
//!
//! Declarations ("this formula is t-local", "this formula is basic bounded
//! with bound p") are never trusted: these checks sample instances and
//! compare the declared reading against direct evaluation, reporting
//! witnesses for any violation found.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{ColoredGraph, Vertex};

use super::ast::Formula;
use super::eval::{eval_oracle_named, LogicError};

#[derive(Debug, Clone, serde::Serialize)]
pub struct ValidationWitness {
    pub graph_index: usize,
    pub args: Vec<Vertex>,
    pub sets: Vec<Vec<Vertex>>,
    pub global_truth: bool,
    pub restricted_truth: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ValidationReport {
    pub property: String,
    pub samples: usize,
    pub violations: Vec<ValidationWitness>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn clip_sets_to<'a>(
    sets: &[(String, &'a BTreeSet<Vertex>)],
    map: &[Vertex],
) -> Vec<(String, BTreeSet<Vertex>)> {
    sets.iter()
        .map(|(name, w)| {
            let local: BTreeSet<Vertex> =
                w.iter().filter_map(|g| map.binary_search(g).ok()).collect();
            (name.clone(), local)
        })
        .collect()
}

/// Truth of `formula(args, sets)` inside `G[keep]`, with arguments mapped to
/// local ids and sets clipped.
pub fn eval_on_induced(
    graph: &ColoredGraph,
    keep: &BTreeSet<Vertex>,
    formula: &Formula,
    args: &[(String, Vertex)],
    sets: &[(String, &BTreeSet<Vertex>)],
) -> Result<bool, LogicError> {
    let (piece, map) = graph.induced_subgraph(keep)?;
    let local_args: Vec<(String, Vertex)> = args
        .iter()
        .map(|(name, v)| {
            let local = map
                .binary_search(v)
                .map_err(|_| LogicError::UnboundVar(format!("{name} not inside the window")))?;
            Ok::<_, LogicError>((name.clone(), local))
        })
        .collect::<Result<_, _>>()?;
    let clipped = clip_sets_to(sets, &map);
    let clipped_refs: Vec<(String, &BTreeSet<Vertex>)> =
        clipped.iter().map(|(n, w)| (n.clone(), w)).collect();
    eval_oracle_named(&piece, formula, &local_args, &clipped_refs)
}

/// Checks the t-locality equivalence on sampled instances: truth on `G`
/// equals truth on the induced ball `G[N^t(args)]` with sets clipped.
pub fn validate_locality(
    formula: &Formula,
    t: usize,
    graphs: &[ColoredGraph],
    samples_per_graph: usize,
    seed: u64,
) -> Result<ValidationReport, LogicError> {
    let fo = formula.free_fo_vars();
    let set_vars = formula.free_set_vars();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = 0;
    let mut violations = Vec::new();
    for (graph_index, graph) in graphs.iter().enumerate() {
        if graph.n() == 0 {
            continue;
        }
        for _ in 0..samples_per_graph {
            let args: Vec<Vertex> = (0..fo.len()).map(|_| rng.gen_range(0..graph.n())).collect();
            let sets: Vec<BTreeSet<Vertex>> = (0..set_vars.len())
                .map(|_| (0..graph.n()).filter(|_| rng.gen_bool(0.3)).collect())
                .collect();
            let named_args: Vec<(String, Vertex)> =
                fo.iter().cloned().zip(args.iter().copied()).collect();
            let named_sets: Vec<(String, &BTreeSet<Vertex>)> =
                set_vars.iter().cloned().zip(sets.iter()).collect();
            let global = eval_oracle_named(graph, formula, &named_args, &named_sets)?;
            let ball = graph.ball(&args.iter().copied().collect(), t)?;
            let restricted = eval_on_induced(graph, &ball, formula, &named_args, &named_sets)?;
            samples += 1;
            if global != restricted {
                violations.push(ValidationWitness {
                    graph_index,
                    args,
                    sets: sets.iter().map(|s| s.iter().copied().collect()).collect(),
                    global_truth: global,
                    restricted_truth: restricted,
                });
            }
        }
    }
    Ok(ValidationReport { property: format!("{t}-local"), samples, violations })
}

/// Bound on graph size accepted by [`validate_boundedness`]; witness-set
/// enumeration is exponential in `p`.
pub const BOUNDEDNESS_MAX_N: usize = 24;

/// Checks Definition-style basic boundedness on sampled instances: truth on
/// `G` iff truth on some induced `G[X]` with `args ⊆ X`, `|X| <= p`,
/// enumerating all candidate windows.
pub fn validate_boundedness(
    formula: &Formula,
    p: usize,
    graphs: &[ColoredGraph],
    samples_per_graph: usize,
    seed: u64,
) -> Result<ValidationReport, LogicError> {
    let fo = formula.free_fo_vars();
    let set_vars = formula.free_set_vars();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = 0;
    let mut violations = Vec::new();
    for (graph_index, graph) in graphs.iter().enumerate() {
        if graph.n() == 0 {
            continue;
        }
        assert!(
            graph.n() <= BOUNDEDNESS_MAX_N,
            "boundedness validation enumerates subsets; graph too large ({} > {})",
            graph.n(),
            BOUNDEDNESS_MAX_N
        );
        for _ in 0..samples_per_graph {
            let args: Vec<Vertex> = (0..fo.len()).map(|_| rng.gen_range(0..graph.n())).collect();
            let sets: Vec<BTreeSet<Vertex>> = (0..set_vars.len())
                .map(|_| (0..graph.n()).filter(|_| rng.gen_bool(0.3)).collect())
                .collect();
            let named_args: Vec<(String, Vertex)> =
                fo.iter().cloned().zip(args.iter().copied()).collect();
            let named_sets: Vec<(String, &BTreeSet<Vertex>)> =
                set_vars.iter().cloned().zip(sets.iter()).collect();
            let global = eval_oracle_named(graph, formula, &named_args, &named_sets)?;
            let witnessed =
                witness_window_exists(graph, formula, &named_args, &named_sets, p)?;
            samples += 1;
            if global != witnessed {
                violations.push(ValidationWitness {
                    graph_index,
                    args,
                    sets: sets.iter().map(|s| s.iter().copied().collect()).collect(),
                    global_truth: global,
                    restricted_truth: witnessed,
                });
            }
        }
    }
    Ok(ValidationReport { property: format!("basic bounded p={p}"), samples, violations })
}

fn witness_window_exists(
    graph: &ColoredGraph,
    formula: &Formula,
    args: &[(String, Vertex)],
    sets: &[(String, &BTreeSet<Vertex>)],
    p: usize,
) -> Result<bool, LogicError> {
    let base: BTreeSet<Vertex> = args.iter().map(|&(_, v)| v).collect();
    if base.len() > p {
        return Ok(false);
    }
    let rest: Vec<Vertex> = (0..graph.n()).filter(|v| !base.contains(v)).collect();
    let budget = p - base.len();
    // enumerate extensions of every size up to the budget
    fn extend(
        graph: &ColoredGraph,
        formula: &Formula,
        args: &[(String, Vertex)],
        sets: &[(String, &BTreeSet<Vertex>)],
        base: &BTreeSet<Vertex>,
        rest: &[Vertex],
        start: usize,
        budget: usize,
        window: &mut BTreeSet<Vertex>,
    ) -> Result<bool, LogicError> {
        if eval_on_induced(graph, window, formula, args, sets)? {
            return Ok(true);
        }
        if budget == 0 {
            return Ok(false);
        }
        for idx in start..rest.len() {
            window.insert(rest[idx]);
            if extend(graph, formula, args, sets, base, rest, idx + 1, budget - 1, window)? {
                return Ok(true);
            }
            window.remove(&rest[idx]);
        }
        Ok(false)
    }
    let mut window = base.clone();
    extend(graph, formula, args, sets, &base, &rest, 0, budget, &mut window)
}

/// Spot check of the boundedness monotonicity consequence: once a witness
/// window `X` validates the formula, every superset window does too.
pub fn check_bounded_monotonicity(
    formula: &Formula,
    graph: &ColoredGraph,
    args: &[(String, Vertex)],
    sets: &[(String, &BTreeSet<Vertex>)],
    window: &BTreeSet<Vertex>,
    seed: u64,
) -> Result<bool, LogicError> {
    if !eval_on_induced(graph, window, formula, args, sets)? {
        return Ok(true); // nothing to propagate
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10 {
        let mut bigger = window.clone();
        for v in 0..graph.n() {
            if rng.gen_bool(0.5) {
                bigger.insert(v);
            }
        }
        if !eval_on_induced(graph, &bigger, formula, args, sets)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Named-binding convenience used by tests: positional args and sets.
pub fn to_named<'a>(
    formula: &Formula,
    args: &[Vertex],
    sets: &'a [&'a BTreeSet<Vertex>],
) -> (Vec<(String, Vertex)>, Vec<(String, &'a BTreeSet<Vertex>)>) {
    let named_args = formula.free_fo_vars().into_iter().zip(args.iter().copied()).collect();
    let named_sets = formula.free_set_vars().into_iter().zip(sets.iter().copied()).collect();
    (named_args, named_sets)
}

/// Global-to-local id translation helper for windows produced by
/// `induced_subgraph`.
pub fn local_ids(map: &[Vertex]) -> BTreeMap<Vertex, Vertex> {
    map.iter().enumerate().map(|(l, &g)| (g, l)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete_graph, cycle_graph, path_graph};
    use crate::logic::ast::common_neighbor_formula;
    use crate::logic::parse::parse_formula;

    #[test]
    fn one_local_formulas_validate() {
        let graphs = vec![path_graph(10), cycle_graph(7), complete_graph(4)];
        let f = common_neighbor_formula();
        let report = validate_locality(&f, 1, &graphs, 40, 1).unwrap();
        assert!(report.passed(), "{:?}", report.violations);

        // dist(x,y)<=2 is 1-local
        let f = parse_formula("dist(x,y)<=2").unwrap();
        let report = validate_locality(&f, 1, &graphs, 40, 2).unwrap();
        assert!(report.passed());
    }

    #[test]
    fn nonlocal_formula_is_caught() {
        // "some vertex is adjacent to y" is not 0-local around x alone... use
        // a connectivity-flavored formula with t too small
        let f = parse_formula("dist(x,y)<=4").unwrap();
        let graphs = vec![path_graph(12)];
        let report = validate_locality(&f, 1, &graphs, 120, 3).unwrap();
        assert!(!report.passed());
    }

    #[test]
    fn common_neighbor_is_bounded_with_p3() {
        let graphs = vec![path_graph(9), cycle_graph(6)];
        let f = common_neighbor_formula();
        let report = validate_boundedness(&f, 3, &graphs, 25, 4).unwrap();
        assert!(report.passed(), "{:?}", report.violations);
    }

    #[test]
    fn too_small_p_is_caught() {
        let graphs = vec![path_graph(9)];
        let f = common_neighbor_formula();
        // p = 2 cannot host x, y and the middle vertex
        let report = validate_boundedness(&f, 2, &graphs, 60, 9).unwrap();
        assert!(!report.passed());
    }

    #[test]
    fn dist_le_bound_is_r_plus_one() {
        let f = parse_formula("dist(x,y)<=2").unwrap();
        let graphs = vec![path_graph(10)];
        let ok = validate_boundedness(&f, 3, &graphs, 40, 7).unwrap();
        assert!(ok.passed());
        let bad = validate_boundedness(&f, 2, &graphs, 60, 8).unwrap();
        assert!(!bad.passed());
    }

    #[test]
    fn monotonicity_spot_check() {
        let g = path_graph(8);
        let f = common_neighbor_formula();
        let (args, sets) = to_named(&f, &[0, 2], &[]);
        let window: BTreeSet<usize> = [0, 1, 2].into();
        assert!(check_bounded_monotonicity(&f, &g, &args, &sets, &window, 5).unwrap());
    }
}
