//! Brute-force evaluation and counting oracles.
//!
//! Quantifiers expand over all vertices; `dist` atoms are resolved through a
//! per-evaluation BFS cache. The oracle's job is trust, not speed.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::graph::{ColoredGraph, GraphError, Vertex};

use super::ast::Formula;
use super::DistanceType;

#[derive(Debug, Error)]
pub enum LogicError {
    #[error("argument arity mismatch: formula takes {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("unbound variable {0:?}")]
    UnboundVar(String),
    #[error("unbound set variable {0:?}")]
    UnboundSetVar(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Memoized single-source undirected distances, shared across the atoms of
/// one evaluation.
pub struct DistCache<'g> {
    graph: &'g ColoredGraph,
    rows: RefCell<BTreeMap<Vertex, std::rc::Rc<Vec<Option<usize>>>>>,
}

impl<'g> DistCache<'g> {
    pub fn new(graph: &'g ColoredGraph) -> Self {
        DistCache { graph, rows: RefCell::new(BTreeMap::new()) }
    }

    pub fn distance(&self, u: Vertex, v: Vertex) -> Result<Option<usize>, GraphError> {
        if u == v {
            // still validates the id
            return self.graph.distance(u, v);
        }
        let row = {
            let mut rows = self.rows.borrow_mut();
            if let Some(row) = rows.get(&u) {
                row.clone()
            } else {
                let row = std::rc::Rc::new(self.graph.distances_from(u)?);
                rows.insert(u, row.clone());
                row
            }
        };
        if v >= row.len() {
            return Err(GraphError::VertexOutOfRange(v, row.len()));
        }
        Ok(row[v])
    }
}

struct EvalCtx<'g, 'a> {
    graph: &'g ColoredGraph,
    dist: &'a DistCache<'g>,
    sets: &'a [(String, &'a BTreeSet<Vertex>)],
}

fn eval_rec(
    ctx: &EvalCtx,
    env: &mut Vec<(String, Vertex)>,
    formula: &Formula,
) -> Result<bool, LogicError> {
    let lookup = |env: &Vec<(String, Vertex)>, name: &str| -> Result<Vertex, LogicError> {
        env.iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|&(_, v)| v)
            .ok_or_else(|| LogicError::UnboundVar(name.to_owned()))
    };
    match formula {
        Formula::Eq(x, y) => Ok(lookup(env, x)? == lookup(env, y)?),
        Formula::Edge(c, x, y) => {
            Ok(ctx.graph.has_edge(lookup(env, x)?, lookup(env, y)?, *c))
        }
        Formula::Col(c, x) => Ok(ctx.graph.has_vertex_color(lookup(env, x)?, *c)),
        Formula::In(x, set) => {
            let v = lookup(env, x)?;
            let w = ctx
                .sets
                .iter()
                .find(|(n, _)| n == set)
                .map(|(_, w)| *w)
                .ok_or_else(|| LogicError::UnboundSetVar(set.clone()))?;
            Ok(w.contains(&v))
        }
        Formula::DistLe(x, y, k) => {
            let d = ctx.dist.distance(lookup(env, x)?, lookup(env, y)?)?;
            Ok(matches!(d, Some(d) if d <= *k))
        }
        Formula::Not(f) => Ok(!eval_rec(ctx, env, f)?),
        Formula::And(a, b) => Ok(eval_rec(ctx, env, a)? && eval_rec(ctx, env, b)?),
        Formula::Or(a, b) => Ok(eval_rec(ctx, env, a)? || eval_rec(ctx, env, b)?),
        Formula::Implies(a, b) => Ok(!eval_rec(ctx, env, a)? || eval_rec(ctx, env, b)?),
        Formula::Exists(v, f) => {
            for candidate in 0..ctx.graph.n() {
                env.push((v.clone(), candidate));
                let holds = eval_rec(ctx, env, f)?;
                env.pop();
                if holds {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Formula::Forall(v, f) => {
            for candidate in 0..ctx.graph.n() {
                env.push((v.clone(), candidate));
                let holds = eval_rec(ctx, env, f)?;
                env.pop();
                if !holds {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

/// Exhaustive model checking with named bindings.
pub fn eval_oracle_named(
    graph: &ColoredGraph,
    formula: &Formula,
    args: &[(String, Vertex)],
    sets: &[(String, &BTreeSet<Vertex>)],
) -> Result<bool, LogicError> {
    for &(_, v) in args {
        if v >= graph.n() {
            return Err(GraphError::VertexOutOfRange(v, graph.n()).into());
        }
    }
    let dist = DistCache::new(graph);
    let ctx = EvalCtx { graph, dist: &dist, sets };
    let mut env: Vec<(String, Vertex)> = args.to_vec();
    eval_rec(&ctx, &mut env, formula)
}

/// Exhaustive model checking: `args` bind positionally to the free FO
/// variables in occurrence order, `sets` to the free set variables likewise.
pub fn eval_oracle(
    graph: &ColoredGraph,
    formula: &Formula,
    args: &[Vertex],
    sets: &[&BTreeSet<Vertex>],
) -> Result<bool, LogicError> {
    let fo = formula.free_fo_vars();
    if fo.len() != args.len() {
        return Err(LogicError::ArityMismatch { expected: fo.len(), got: args.len() });
    }
    let set_vars = formula.free_set_vars();
    if set_vars.len() != sets.len() {
        return Err(LogicError::ArityMismatch { expected: set_vars.len(), got: sets.len() });
    }
    let named_args: Vec<(String, Vertex)> = fo.into_iter().zip(args.iter().copied()).collect();
    let named_sets: Vec<(String, &BTreeSet<Vertex>)> =
        set_vars.into_iter().zip(sets.iter().copied()).collect();
    eval_oracle_named(graph, formula, &named_args, &named_sets)
}

/// `|{ tuples a : G |= phi(a, W) }|` by full enumeration. For sentences
/// (no free FO variables) the count is the truth value as 0 or 1.
pub fn count_oracle(
    graph: &ColoredGraph,
    formula: &Formula,
    sets: &[&BTreeSet<Vertex>],
) -> Result<u64, LogicError> {
    let fo = formula.free_fo_vars();
    let set_vars = formula.free_set_vars();
    if set_vars.len() != sets.len() {
        return Err(LogicError::ArityMismatch { expected: set_vars.len(), got: sets.len() });
    }
    let named_sets: Vec<(String, &BTreeSet<Vertex>)> =
        set_vars.into_iter().zip(sets.iter().copied()).collect();
    let dist = DistCache::new(graph);
    let ctx = EvalCtx { graph, dist: &dist, sets: &named_sets };
    let m = fo.len();
    if m == 0 {
        return Ok(u64::from(eval_rec(&ctx, &mut Vec::new(), formula)?));
    }
    let n = graph.n();
    let mut count = 0u64;
    let mut tuple = vec![0usize; m];
    'outer: loop {
        let mut env: Vec<(String, Vertex)> =
            fo.iter().cloned().zip(tuple.iter().copied()).collect();
        if eval_rec(&ctx, &mut env, formula)? {
            count += 1;
        }
        // odometer over V^m
        for slot in (0..m).rev() {
            tuple[slot] += 1;
            if tuple[slot] < n {
                continue 'outer;
            }
            tuple[slot] = 0;
        }
        break;
    }
    Ok(count)
}

/// The t-distance type of a tuple: edge `(i,j)` iff `d(a_i, a_j) <= 2t+1`.
pub fn distance_type(
    graph: &ColoredGraph,
    tuple: &[Vertex],
    t: usize,
) -> Result<DistanceType, LogicError> {
    let cache = DistCache::new(graph);
    let mut edges = BTreeSet::new();
    for i in 0..tuple.len() {
        for j in i + 1..tuple.len() {
            if matches!(cache.distance(tuple[i], tuple[j])?, Some(d) if d <= 2 * t + 1) {
                edges.insert((i, j));
            }
        }
    }
    Ok(DistanceType { m: tuple.len(), t, edges })
}

/// The formula `rho_{t,Delta}`: a tuple satisfies it exactly when its
/// t-distance type equals `delta`. Variables are named `x1..xm`.
pub fn rho_formula(delta: &DistanceType) -> Formula {
    assert!(delta.m >= 1, "rho formula needs arity >= 1");
    let var = |i: usize| format!("x{}", i + 1);
    let mut parts = Vec::new();
    for i in 0..delta.m {
        for j in i + 1..delta.m {
            let atom = Formula::DistLe(var(i), var(j), 2 * delta.t + 1);
            parts.push(if delta.has_edge(i, j) { atom } else { Formula::not(atom) });
        }
    }
    if parts.is_empty() {
        Formula::Eq(var(0), var(0))
    } else {
        Formula::and_all(parts)
    }
}

/// Decides whether `candidates` contains `s` vertices that are pairwise at
/// distance strictly greater than `threshold`: greedy first, exact
/// branch-and-bound fallback. Exactness is the contract.
pub fn scattered_exists(
    graph: &ColoredGraph,
    candidates: &[Vertex],
    s: usize,
    threshold: usize,
) -> Result<bool, LogicError> {
    if s == 0 {
        return Ok(true);
    }
    if candidates.len() < s {
        return Ok(false);
    }
    let cache = DistCache::new(graph);
    let far = |a: Vertex, b: Vertex| -> Result<bool, LogicError> {
        Ok(!matches!(cache.distance(a, b)?, Some(d) if d <= threshold))
    };
    // greedy in ascending id order
    let mut chosen: Vec<Vertex> = Vec::new();
    'next: for &v in candidates {
        for &c in &chosen {
            if !far(v, c)? {
                continue 'next;
            }
        }
        chosen.push(v);
        if chosen.len() >= s {
            return Ok(true);
        }
    }
    // exact search over candidate order with suffix pruning
    fn search(
        candidates: &[Vertex],
        start: usize,
        chosen: &mut Vec<Vertex>,
        s: usize,
        far: &dyn Fn(Vertex, Vertex) -> Result<bool, LogicError>,
    ) -> Result<bool, LogicError> {
        if chosen.len() == s {
            return Ok(true);
        }
        if chosen.len() + (candidates.len() - start) < s {
            return Ok(false);
        }
        for idx in start..candidates.len() {
            let v = candidates[idx];
            let mut ok = true;
            for &c in chosen.iter() {
                if !far(v, c)? {
                    ok = false;
                    break;
                }
            }
            if ok {
                chosen.push(v);
                if search(candidates, idx + 1, chosen, s, far)? {
                    return Ok(true);
                }
                chosen.pop();
            }
        }
        Ok(false)
    }
    search(candidates, 0, &mut Vec::new(), s, &|a, b| far(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete_graph, path_graph, ColoredGraph, EColor, VColor};
    use crate::logic::ast::common_neighbor_formula;
    use crate::logic::parse::parse_formula;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_graph(n: usize, p: f64, seed: u64) -> ColoredGraph {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(p) {
                    edges.push((u, v, EColor(0)));
                    edges.push((v, u, EColor(0)));
                }
            }
        }
        ColoredGraph::new(n, [], edges).unwrap()
    }

    #[test]
    fn reflexivity_atom() {
        let f = parse_formula("x = x").unwrap();
        let g = random_graph(5, 0.3, 1);
        for v in 0..5 {
            assert!(eval_oracle(&g, &f, &[v], &[]).unwrap());
        }
    }

    #[test]
    fn common_neighbor_on_path() {
        let g = path_graph(3);
        let f = common_neighbor_formula();
        assert!(eval_oracle(&g, &f, &[0, 2], &[]).unwrap());
        assert!(!eval_oracle(&g, &f, &[0, 1], &[]).unwrap());
    }

    #[test]
    fn set_atom_matches_neighborhood_check() {
        let f = parse_formula("E z. (z in Y & edge(x,z))").unwrap();
        let mut rng = StdRng::seed_from_u64(5);
        let g = random_graph(8, 0.3, 99);
        for _ in 0..50 {
            let a = rng.gen_range(0..8);
            let w: BTreeSet<usize> = (0..8).filter(|_| rng.gen_bool(0.4)).collect();
            let expected = g.und_neighbors(a).iter().any(|z| w.contains(z));
            assert_eq!(eval_oracle(&g, &f, &[a], &[&w]).unwrap(), expected);
        }
    }

    #[test]
    fn arity_and_binding_errors() {
        let f = parse_formula("edge(x,y)").unwrap();
        let g = path_graph(3);
        assert!(matches!(
            eval_oracle(&g, &f, &[0], &[]),
            Err(LogicError::ArityMismatch { .. })
        ));
        let f = parse_formula("x in Y").unwrap();
        assert!(matches!(
            eval_oracle(&g, &f, &[0], &[]),
            Err(LogicError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn count_examples() {
        let g = random_graph(9, 0.4, 3);
        let f = parse_formula("x = x").unwrap();
        assert_eq!(count_oracle(&g, &f, &[]).unwrap(), 9);

        let k4 = complete_graph(4);
        let f = parse_formula("edge(x,y)").unwrap();
        assert_eq!(count_oracle(&k4, &f, &[]).unwrap(), 12);

        // ordered pairs at distance exactly 2 on P4, cross-checked by hand
        let p4 = path_graph(4);
        let f = common_neighbor_formula();
        assert_eq!(count_oracle(&p4, &f, &[]).unwrap(), 4);
        let mut by_enumeration = 0;
        for a in 0..4 {
            for b in 0..4 {
                if p4.distance(a, b).unwrap() == Some(2) {
                    by_enumeration += 1;
                }
            }
        }
        assert_eq!(by_enumeration, 4);

        // sentence: count is truth as 0/1
        let sentence = parse_formula("E x. E y. edge(x,y)").unwrap();
        assert_eq!(count_oracle(&p4, &sentence, &[]).unwrap(), 1);
        let empty = ColoredGraph::new(3, [], []).unwrap();
        assert_eq!(count_oracle(&empty, &sentence, &[]).unwrap(), 0);
    }

    #[test]
    fn distance_type_examples() {
        let g = path_graph(10);
        let d = distance_type(&g, &[0], 1).unwrap();
        assert_eq!(d.m, 1);
        assert!(d.edges.is_empty());

        let d = distance_type(&g, &[4, 4], 1).unwrap();
        assert!(d.has_edge(0, 1));

        let d = distance_type(&g, &[0, 9], 1).unwrap();
        assert!(d.edges.is_empty());
    }

    #[test]
    fn rho_formula_agrees_with_distance_type() {
        let mut rng = StdRng::seed_from_u64(12);
        for round in 0..100 {
            let g = random_graph(10, 0.25, round);
            let m = rng.gen_range(1..=3);
            let t = rng.gen_range(0..=1);
            let tuple: Vec<usize> = (0..m).map(|_| rng.gen_range(0..10)).collect();
            let actual = distance_type(&g, &tuple, t).unwrap();
            for delta in crate::logic::all_distance_types(m, t) {
                let rho = rho_formula(&delta);
                let holds = eval_oracle(&g, &rho, &tuple, &[]).unwrap();
                assert_eq!(holds, delta.edges == actual.edges, "delta {:?}", delta.edges);
            }
        }
    }

    #[test]
    fn rho_formula_trivial_cases() {
        // complete type on a clique triple
        let k4 = complete_graph(4);
        let full = DistanceType::new(3, 1, [(0, 1), (0, 2), (1, 2)]);
        assert!(eval_oracle(&k4, &rho_formula(&full), &[0, 1, 2], &[]).unwrap());
        // empty type fails inside one small component
        let empty_type = DistanceType::new(2, 1, []);
        assert!(!eval_oracle(&k4, &rho_formula(&empty_type), &[0, 1], &[]).unwrap());
    }

    #[test]
    fn dist_atom_agrees_with_fo_chain() {
        // dist(x,y)<=k versus an existential chain of edges, k <= 3
        let chain2 = parse_formula(
            "x=y | edge(x,y) | edge(y,x) | E z. ((edge(x,z)|edge(z,x)) & (edge(z,y)|edge(y,z)))",
        )
        .unwrap();
        for seed in 0..8 {
            let g = random_graph(14, 0.2, seed + 100);
            let dist2 = parse_formula("dist(x,y)<=2").unwrap();
            for a in 0..g.n() {
                for b in 0..g.n() {
                    assert_eq!(
                        eval_oracle(&g, &dist2, &[a, b], &[]).unwrap(),
                        eval_oracle(&g, &chain2, &[a, b], &[]).unwrap(),
                    );
                }
            }
        }
    }

    #[test]
    fn hole_semantics_match_color_marking() {
        let hole = VColor(999);
        let mut rng = StdRng::seed_from_u64(77);
        let formulas = [
            common_neighbor_formula(),
            parse_formula("E z. (edge(x,z) & z in Y)").unwrap(),
            parse_formula("A z. (edge(x,z) -> !(z = y))").unwrap(),
        ];
        for round in 0..20 {
            let g = random_graph(9, 0.35, round);
            let deleted: BTreeSet<usize> = (0..9).filter(|_| rng.gen_bool(0.25)).collect();
            let keep: Vec<usize> = (0..9).filter(|v| !deleted.contains(v)).collect();
            if keep.len() < 3 {
                continue;
            }
            // marked variant: same graph with hole color on deleted vertices
            let marked = ColoredGraph::new(
                9,
                deleted.iter().map(|&v| (v, hole)),
                g.edges(),
            )
            .unwrap();
            let (removed, map) = g.remove_vertices(&deleted).unwrap();
            let global_to_local: BTreeMap<usize, usize> =
                map.iter().enumerate().map(|(l, &gv)| (gv, l)).collect();
            for f in &formulas {
                let fo = f.free_fo_vars();
                let args_global: Vec<usize> =
                    (0..fo.len()).map(|i| keep[(round as usize + i) % keep.len()]).collect();
                let args_local: Vec<usize> =
                    args_global.iter().map(|v| global_to_local[v]).collect();
                let w_global: BTreeSet<usize> =
                    keep.iter().copied().filter(|_| rng.gen_bool(0.3)).collect();
                let w_local: BTreeSet<usize> =
                    w_global.iter().map(|v| global_to_local[v]).collect();
                let sets_g: Vec<&BTreeSet<usize>> =
                    f.free_set_vars().iter().map(|_| &w_global).collect();
                let sets_l: Vec<&BTreeSet<usize>> =
                    f.free_set_vars().iter().map(|_| &w_local).collect();
                let direct = eval_oracle(&removed, f, &args_local, &sets_l).unwrap();
                let rel = f.relativize_to_unmarked(hole).unwrap();
                let marked_eval = eval_oracle(&marked, &rel, &args_global, &sets_g).unwrap();
                assert_eq!(direct, marked_eval);
            }
        }
    }

    #[test]
    fn scattered_exists_small_cases() {
        let p10 = path_graph(10);
        let all: Vec<usize> = (0..10).collect();
        assert!(scattered_exists(&p10, &all, 1, 2).unwrap());
        assert!(scattered_exists(&p10, &all, 2, 2).unwrap());
        assert!(!scattered_exists(&p10, &[0, 1, 2], 2, 5).unwrap());
        // greedy in given order picks 4 and blocks both ends; the exact
        // fallback still finds {0, 9}
        assert!(scattered_exists(&p10, &[4, 0, 9], 2, 5).unwrap());
        // s = 0 is vacuous
        assert!(scattered_exists(&p10, &[], 0, 3).unwrap());
    }
}
