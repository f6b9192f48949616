//! Formula AST over colored graphs.

use crate::graph::{EColor, VColor};

/// First-order variable (lowercase identifiers in the text syntax).
pub type Var = String;
/// Set variable (uppercase-initial identifiers in the text syntax).
pub type SetVar = String;

/// FO formula over colored graphs. Set variables are free only; there is no
/// set quantification. `dist(x,y)<=k` is a built-in atom with undirected,
/// color-blind semantics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    Eq(Var, Var),
    Edge(EColor, Var, Var),
    Col(VColor, Var),
    In(Var, SetVar),
    DistLe(Var, Var, usize),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Exists(Var, Box<Formula>),
    Forall(Var, Box<Formula>),
}

impl Formula {
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn exists(v: impl Into<Var>, f: Formula) -> Formula {
        Formula::Exists(v.into(), Box::new(f))
    }

    pub fn forall(v: impl Into<Var>, f: Formula) -> Formula {
        Formula::Forall(v.into(), Box::new(f))
    }

    /// Conjunction of a non-empty list.
    pub fn and_all(mut parts: Vec<Formula>) -> Formula {
        let mut acc = parts.pop().expect("and_all of empty list");
        while let Some(p) = parts.pop() {
            acc = Formula::and(p, acc);
        }
        acc
    }

    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Formula::Eq(..)
            | Formula::Edge(..)
            | Formula::Col(..)
            | Formula::In(..)
            | Formula::DistLe(..) => true,
            Formula::Not(f) => f.is_quantifier_free(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.is_quantifier_free() && b.is_quantifier_free()
            }
            Formula::Exists(..) | Formula::Forall(..) => false,
        }
    }

    fn walk_free(
        &self,
        bound: &mut Vec<Var>,
        fo: &mut Vec<Var>,
        sets: &mut Vec<SetVar>,
    ) {
        let note_fo = |name: &Var, bound: &Vec<Var>, fo: &mut Vec<Var>| {
            if !bound.contains(name) && !fo.contains(name) {
                fo.push(name.clone());
            }
        };
        match self {
            Formula::Eq(x, y) | Formula::DistLe(x, y, _) | Formula::Edge(_, x, y) => {
                note_fo(x, bound, fo);
                note_fo(y, bound, fo);
            }
            Formula::Col(_, x) => note_fo(x, bound, fo),
            Formula::In(x, set) => {
                note_fo(x, bound, fo);
                if !sets.contains(set) {
                    sets.push(set.clone());
                }
            }
            Formula::Not(f) => f.walk_free(bound, fo, sets),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.walk_free(bound, fo, sets);
                b.walk_free(bound, fo, sets);
            }
            Formula::Exists(v, f) | Formula::Forall(v, f) => {
                bound.push(v.clone());
                f.walk_free(bound, fo, sets);
                bound.pop();
            }
        }
    }

    /// Free FO variables in order of first occurrence (the tuple order used
    /// for positional argument binding).
    pub fn free_fo_vars(&self) -> Vec<Var> {
        let mut fo = Vec::new();
        let mut sets = Vec::new();
        self.walk_free(&mut Vec::new(), &mut fo, &mut sets);
        fo
    }

    /// Free set variables in order of first occurrence.
    pub fn free_set_vars(&self) -> Vec<SetVar> {
        let mut fo = Vec::new();
        let mut sets = Vec::new();
        self.walk_free(&mut Vec::new(), &mut fo, &mut sets);
        sets
    }

    /// Renames every *free* occurrence of `from` to `to`.
    pub fn rename_free_var(&self, from: &str, to: &str) -> Formula {
        let ren = |v: &Var| if v == from { to.to_owned() } else { v.clone() };
        match self {
            Formula::Eq(x, y) => Formula::Eq(ren(x), ren(y)),
            Formula::Edge(c, x, y) => Formula::Edge(*c, ren(x), ren(y)),
            Formula::Col(c, x) => Formula::Col(*c, ren(x)),
            Formula::In(x, s) => Formula::In(ren(x), s.clone()),
            Formula::DistLe(x, y, k) => Formula::DistLe(ren(x), ren(y), *k),
            Formula::Not(f) => Formula::not(f.rename_free_var(from, to)),
            Formula::And(a, b) => {
                Formula::and(a.rename_free_var(from, to), b.rename_free_var(from, to))
            }
            Formula::Or(a, b) => {
                Formula::or(a.rename_free_var(from, to), b.rename_free_var(from, to))
            }
            Formula::Implies(a, b) => {
                Formula::implies(a.rename_free_var(from, to), b.rename_free_var(from, to))
            }
            Formula::Exists(v, f) if v != from => {
                Formula::exists(v.clone(), f.rename_free_var(from, to))
            }
            Formula::Forall(v, f) if v != from => {
                Formula::forall(v.clone(), f.rename_free_var(from, to))
            }
            shadowing => shadowing.clone(),
        }
    }

    /// True when the formula mentions a `dist` atom.
    pub fn uses_dist(&self) -> bool {
        match self {
            Formula::DistLe(..) => true,
            Formula::Eq(..) | Formula::Edge(..) | Formula::Col(..) | Formula::In(..) => false,
            Formula::Not(f) | Formula::Exists(_, f) | Formula::Forall(_, f) => f.uses_dist(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.uses_dist() || b.uses_dist()
            }
        }
    }

    /// Relativizes quantifiers to vertices *not* carrying `hole`, so that
    /// evaluating the result on a graph whose deleted set is marked with
    /// `hole` equals evaluating `self` on the graph with those vertices
    /// removed. Rejects formulas with `dist` atoms (marked vertices would
    /// still shorten paths).
    pub fn relativize_to_unmarked(&self, hole: VColor) -> Option<Formula> {
        if self.uses_dist() {
            return None;
        }
        Some(self.relativize_inner(hole))
    }

    fn relativize_inner(&self, hole: VColor) -> Formula {
        match self {
            Formula::Exists(v, f) => Formula::exists(
                v.clone(),
                Formula::and(
                    Formula::not(Formula::Col(hole, v.clone())),
                    f.relativize_inner(hole),
                ),
            ),
            Formula::Forall(v, f) => Formula::forall(
                v.clone(),
                Formula::or(Formula::Col(hole, v.clone()), f.relativize_inner(hole)),
            ),
            Formula::Not(f) => Formula::not(f.relativize_inner(hole)),
            Formula::And(a, b) => {
                Formula::and(a.relativize_inner(hole), b.relativize_inner(hole))
            }
            Formula::Or(a, b) => Formula::or(a.relativize_inner(hole), b.relativize_inner(hole)),
            Formula::Implies(a, b) => {
                Formula::implies(a.relativize_inner(hole), b.relativize_inner(hole))
            }
            atom => atom.clone(),
        }
    }
}

/// The path-of-length-2 query: `x != y && exists z (z != x && z != y &&
/// edge(x,z) && edge(z,y))`. Used across the test suites as the canonical
/// quantified query that adjacency labels cannot answer.
pub fn common_neighbor_formula() -> Formula {
    Formula::and(
        Formula::not(Formula::Eq("x".into(), "y".into())),
        Formula::exists(
            "z",
            Formula::and_all(vec![
                Formula::not(Formula::Eq("z".into(), "x".into())),
                Formula::not(Formula::Eq("z".into(), "y".into())),
                Formula::Edge(EColor(0), "x".into(), "z".into()),
                Formula::Edge(EColor(0), "z".into(), "y".into()),
            ]),
        ),
    )
}
