//! First-order formulas, brute-force oracles, distance types and query
//! plans.
//!
//! The oracle evaluators here are the trust anchors of the crate: they
//! expand quantifiers over the whole vertex set with no optimization, and
//! every labeling scheme is validated against them. Locality radii, bounds
//! and plan decompositions are declared by the caller, never inferred;
//! [`validate`] hosts the empirical checks that guard wrong declarations.

mod ast;
mod eval;
mod parse;
mod plan;
pub mod validate;

pub use ast::{common_neighbor_formula, Formula, SetVar, Var};
pub use eval::{
    count_oracle, distance_type, eval_oracle, eval_oracle_named, rho_formula, scattered_exists,
    DistCache, LogicError,
};
pub use parse::{parse_formula, print_formula, random_qf_formula};
pub use plan::{
    eval_plan_oracle, parse_plan, print_plan, validate_plan, BasicBounded, BoolComb, BoundedPlan,
    DeltaCase, GeneralLeaf, GeneralPlan, LocalPart, LocalPlan, PlanComponent, PlanDisagreement,
    PlanError, PlanReport, QfPlan, QueryPlan, ScatteredPlan, SentencePart,
};
pub(crate) use plan::vertices_satisfying_locally;

use std::collections::BTreeSet;

/// The t-distance type of an m-tuple: an undirected graph on the argument
/// positions with an edge where the tuple entries are at undirected
/// distance at most `2t+1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DistanceType {
    pub m: usize,
    pub t: usize,
    /// pairs `(i, j)` with `i < j`, 0-based positions
    pub edges: BTreeSet<(usize, usize)>,
}

impl DistanceType {
    pub fn new(m: usize, t: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let edges = edges
            .into_iter()
            .map(|(i, j)| if i < j { (i, j) } else { (j, i) })
            .filter(|(i, j)| i != j)
            .collect();
        DistanceType { m, t, edges }
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        let key = if i < j { (i, j) } else { (j, i) };
        self.edges.contains(&key)
    }

    /// Connected components of the type graph, each sorted, ordered by
    /// smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut comp = vec![usize::MAX; self.m];
        let mut count = 0;
        for start in 0..self.m {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = count;
            count += 1;
            let mut stack = vec![start];
            comp[start] = id;
            while let Some(v) = stack.pop() {
                for u in 0..self.m {
                    if u != v && comp[u] == usize::MAX && self.has_edge(v, u) {
                        comp[u] = id;
                        stack.push(u);
                    }
                }
            }
        }
        let mut out = vec![Vec::new(); count];
        for (v, &c) in comp.iter().enumerate() {
            out[c].push(v);
        }
        out
    }

    /// Canonical key used to look distance types up in plans.
    pub fn key(&self) -> Vec<(usize, usize)> {
        self.edges.iter().copied().collect()
    }
}

/// Every distance type on `m` positions (all `2^(m(m-1)/2)` edge subsets),
/// in a fixed enumeration order.
pub fn all_distance_types(m: usize, t: usize) -> Vec<DistanceType> {
    let pairs: Vec<(usize, usize)> =
        (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    let total = 1usize << pairs.len();
    (0..total)
        .map(|mask| {
            DistanceType::new(
                m,
                t,
                pairs
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| mask >> b & 1 == 1)
                    .map(|(_, &p)| p),
            )
        })
        .collect()
}
