//! Terms over the clique-width signature and their evaluation.
//!
//! A term is built from constants `const[i]{colors}` (one vertex with
//! algebra label `i` and the given vertex colors / colored loops), disjoint
//! union `oplus(a,b)`, edge insertion `eta[c,i,j](t)` (adds `c`-colored
//! edges from every label-`i` vertex to every distinct label-`j` vertex, as
//! a relation, so repeats are no-ops) and relabeling `rho[i,j](t)`.
//!
//! Terms act as clique-width *certificates*: no width computation or
//! approximation is attempted here.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::{ColoredGraph, EColor, VColor, Vertex};

/// Color token appearing in a constant's color set: a vertex color or an
/// edge color (the latter yields a colored loop on the constant's vertex).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ConstColor {
    Vertex(VColor),
    Edge(EColor),
}

/// Algebra label, 1-based as in `[k]`.
pub type AlgLabel = u16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CwdTerm {
    Const { label: AlgLabel, colors: BTreeSet<ConstColor> },
    Oplus(Box<CwdTerm>, Box<CwdTerm>),
    Eta { color: EColor, from: AlgLabel, to: AlgLabel, arg: Box<CwdTerm> },
    Rho { from: AlgLabel, to: AlgLabel, arg: Box<CwdTerm> },
}

#[derive(Debug, Error)]
pub enum TermError {
    #[error("labels must be >= 1")]
    ZeroLabel,
    #[error("eta/rho require distinct labels, got {0}")]
    EqualLabels(AlgLabel),
    #[error("clique term needs n >= 1")]
    EmptyClique,
    #[error("term parse error at byte {at}: {message}")]
    Parse { at: usize, message: String },
}

impl CwdTerm {
    pub fn constant(label: AlgLabel, colors: impl IntoIterator<Item = ConstColor>) -> Self {
        CwdTerm::Const { label, colors: colors.into_iter().collect() }
    }

    pub fn oplus(a: CwdTerm, b: CwdTerm) -> Self {
        CwdTerm::Oplus(Box::new(a), Box::new(b))
    }

    pub fn eta(color: EColor, from: AlgLabel, to: AlgLabel, arg: CwdTerm) -> Self {
        CwdTerm::Eta { color, from, to, arg: Box::new(arg) }
    }

    pub fn rho(from: AlgLabel, to: AlgLabel, arg: CwdTerm) -> Self {
        CwdTerm::Rho { from, to, arg: Box::new(arg) }
    }

    /// Structural validity: labels >= 1 and `i != j` at every eta/rho node.
    pub fn validate(&self) -> Result<(), TermError> {
        match self {
            CwdTerm::Const { label, .. } => {
                if *label == 0 {
                    return Err(TermError::ZeroLabel);
                }
            }
            CwdTerm::Oplus(a, b) => {
                a.validate()?;
                b.validate()?;
            }
            CwdTerm::Eta { from, to, arg, .. } | CwdTerm::Rho { from, to, arg } => {
                if *from == 0 || *to == 0 {
                    return Err(TermError::ZeroLabel);
                }
                if from == to {
                    return Err(TermError::EqualLabels(*from));
                }
                arg.validate()?;
            }
        }
        Ok(())
    }

    /// Number of leaves, i.e. vertices of the value graph.
    pub fn leaf_count(&self) -> usize {
        match self {
            CwdTerm::Const { .. } => 1,
            CwdTerm::Oplus(a, b) => a.leaf_count() + b.leaf_count(),
            CwdTerm::Eta { arg, .. } | CwdTerm::Rho { arg, .. } => arg.leaf_count(),
        }
    }

    /// Smallest `k` such that every label used lies in `[k]`.
    pub fn k(&self) -> AlgLabel {
        match self {
            CwdTerm::Const { label, .. } => *label,
            CwdTerm::Oplus(a, b) => a.k().max(b.k()),
            CwdTerm::Eta { from, to, arg, .. } | CwdTerm::Rho { from, to, arg } => {
                arg.k().max(*from).max(*to)
            }
        }
    }
}

/// Value of a term: the colored graph plus the final algebra labeling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermValue {
    pub graph: ColoredGraph,
    pub lab: Vec<AlgLabel>,
}

struct EvalState {
    colors: Vec<(Vertex, VColor)>,
    edges: BTreeSet<(Vertex, Vertex, EColor)>,
    lab: Vec<AlgLabel>,
}

fn eval_into(term: &CwdTerm, state: &mut EvalState) -> Vec<Vertex> {
    match term {
        CwdTerm::Const { label, colors } => {
            let v = state.lab.len();
            state.lab.push(*label);
            for c in colors {
                match c {
                    ConstColor::Vertex(vc) => state.colors.push((v, *vc)),
                    ConstColor::Edge(ec) => {
                        state.edges.insert((v, v, *ec));
                    }
                }
            }
            vec![v]
        }
        CwdTerm::Oplus(a, b) => {
            let mut vs = eval_into(a, state);
            vs.extend(eval_into(b, state));
            vs
        }
        CwdTerm::Eta { color, from, to, arg } => {
            let vs = eval_into(arg, state);
            let sources: Vec<Vertex> = vs.iter().copied().filter(|&v| state.lab[v] == *from).collect();
            let targets: Vec<Vertex> = vs.iter().copied().filter(|&v| state.lab[v] == *to).collect();
            for &x in &sources {
                for &y in &targets {
                    if x != y {
                        state.edges.insert((x, y, *color));
                    }
                }
            }
            vs
        }
        CwdTerm::Rho { from, to, arg } => {
            let vs = eval_into(arg, state);
            for &v in &vs {
                if state.lab[v] == *from {
                    state.lab[v] = *to;
                }
            }
            vs
        }
    }
}

/// Evaluates a well-formed term bottom-up. Vertices are numbered by leaf
/// order, left to right.
pub fn eval_term(term: &CwdTerm) -> Result<TermValue, TermError> {
    term.validate()?;
    let mut state = EvalState { colors: Vec::new(), edges: BTreeSet::new(), lab: Vec::new() };
    eval_into(term, &mut state);
    let n = state.lab.len();
    let graph = ColoredGraph::new(n, state.colors, state.edges)
        .expect("term evaluation produces in-range vertices");
    Ok(TermValue { graph, lab: state.lab })
}

/// A width-2 term whose value is the complete graph `K_n` (undirected,
/// modeled as symmetric edge pairs of color 0).
pub fn clique_term(n: usize) -> Result<CwdTerm, TermError> {
    if n == 0 {
        return Err(TermError::EmptyClique);
    }
    let mut term = CwdTerm::constant(1, []);
    for _ in 1..n {
        let joined = CwdTerm::eta(
            EColor(0),
            2,
            1,
            CwdTerm::eta(EColor(0), 1, 2, CwdTerm::oplus(term, CwdTerm::constant(2, []))),
        );
        term = CwdTerm::rho(2, 1, joined);
    }
    Ok(term)
}

/// Which reading of the cross-edge family `E2` to build in [`hnm_graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum E2Mode {
    /// The display taken literally: same-row edges `v(i,j) ~ v(l,j)` for
    /// `l = i+1..=m`, clipped to existing columns.
    #[default]
    Strict,
    /// Consecutive-column staircase: `v(i,j) ~ v(i+1,l)` for `l = 1..=j`.
    Consecutive,
}

/// The graph `H_{n,m}`: `n` columns of `m` vertices; every column induces a
/// clique and columns are linked by the `E2` family in the chosen reading.
/// Vertex `(i, j)` (1-based column i, row j) has id `(i-1)*m + (j-1)`.
pub fn hnm_graph(n: usize, m: usize, mode: E2Mode) -> ColoredGraph {
    let id = |i: usize, j: usize| (i - 1) * m + (j - 1);
    let mut edges = BTreeSet::new();
    let mut add = |a: Vertex, b: Vertex| {
        if a != b {
            edges.insert((a, b, EColor(0)));
            edges.insert((b, a, EColor(0)));
        }
    };
    for i in 1..=n {
        for j in 1..=m {
            for l in j + 1..=m {
                add(id(i, j), id(i, l));
            }
        }
    }
    match mode {
        E2Mode::Strict => {
            for i in 1..n {
                for j in 1..=m {
                    for l in i + 1..=m.min(n) {
                        add(id(i, j), id(l, j));
                    }
                }
            }
        }
        E2Mode::Consecutive => {
            for i in 1..n {
                for j in 1..=m {
                    for l in 1..=j {
                        add(id(i, j), id(i + 1, l));
                    }
                }
            }
        }
    }
    ColoredGraph::new(n * m, [], edges).expect("hnm construction")
}

// ---------------------------------------------------------------------------
// concrete syntax
// ---------------------------------------------------------------------------

pub fn print_term(term: &CwdTerm) -> String {
    let mut out = String::new();
    print_into(term, &mut out);
    out
}

fn print_into(term: &CwdTerm, out: &mut String) {
    match term {
        CwdTerm::Const { label, colors } => {
            write!(out, "const[{label}]{{").unwrap();
            for (i, c) in colors.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match c {
                    ConstColor::Vertex(vc) => write!(out, "v{}", vc.0).unwrap(),
                    ConstColor::Edge(ec) => write!(out, "e{}", ec.0).unwrap(),
                }
            }
            out.push('}');
        }
        CwdTerm::Oplus(a, b) => {
            out.push_str("oplus(");
            print_into(a, out);
            out.push(',');
            print_into(b, out);
            out.push(')');
        }
        CwdTerm::Eta { color, from, to, arg } => {
            write!(out, "eta[e{},{from},{to}](", color.0).unwrap();
            print_into(arg, out);
            out.push(')');
        }
        CwdTerm::Rho { from, to, arg } => {
            write!(out, "rho[{from},{to}](").unwrap();
            print_into(arg, out);
            out.push(')');
        }
    }
}

struct TermParser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> TermParser<'a> {
    fn err(&self, message: impl Into<String>) -> TermError {
        TermError::Parse { at: self.pos, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expect(&mut self, ch: u8) -> Result<(), TermError> {
        if self.peek() == Some(ch) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected '{}'", ch as char)))
        }
    }

    fn number(&mut self) -> Result<u64, TermError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a number"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| self.err("number too large"))
    }

    fn keyword(&mut self) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned()
    }

    fn edge_color(&mut self) -> Result<EColor, TermError> {
        if self.peek() == Some(b'e') {
            self.pos += 1;
        }
        Ok(EColor(self.number()? as u16))
    }

    fn term(&mut self) -> Result<CwdTerm, TermError> {
        match self.keyword().as_str() {
            "oplus" => {
                self.expect(b'(')?;
                let a = self.term()?;
                self.expect(b',')?;
                let b = self.term()?;
                self.expect(b')')?;
                Ok(CwdTerm::oplus(a, b))
            }
            "eta" => {
                self.expect(b'[')?;
                let color = self.edge_color()?;
                self.expect(b',')?;
                let from = self.number()? as AlgLabel;
                self.expect(b',')?;
                let to = self.number()? as AlgLabel;
                self.expect(b']')?;
                self.expect(b'(')?;
                let arg = self.term()?;
                self.expect(b')')?;
                Ok(CwdTerm::eta(color, from, to, arg))
            }
            "rho" => {
                self.expect(b'[')?;
                let from = self.number()? as AlgLabel;
                self.expect(b',')?;
                let to = self.number()? as AlgLabel;
                self.expect(b']')?;
                self.expect(b'(')?;
                let arg = self.term()?;
                self.expect(b')')?;
                Ok(CwdTerm::rho(from, to, arg))
            }
            "const" => {
                self.expect(b'[')?;
                let label = self.number()? as AlgLabel;
                self.expect(b']')?;
                self.expect(b'{')?;
                let mut colors = BTreeSet::new();
                loop {
                    match self.peek() {
                        Some(b'}') => {
                            self.pos += 1;
                            break;
                        }
                        Some(b'v') => {
                            self.pos += 1;
                            colors.insert(ConstColor::Vertex(VColor(self.number()? as u16)));
                        }
                        Some(b'e') => {
                            self.pos += 1;
                            colors.insert(ConstColor::Edge(EColor(self.number()? as u16)));
                        }
                        _ => return Err(self.err("expected color token or '}'")),
                    }
                    if self.peek() == Some(b',') {
                        self.pos += 1;
                    }
                }
                Ok(CwdTerm::Const { label, colors })
            }
            other => Err(self.err(format!("unknown operator {other:?}"))),
        }
    }
}

/// Parses the concrete syntax `oplus(a,b)`, `eta[c,i,j](t)`, `rho[i,j](t)`,
/// `const[i]{colors}` with color tokens `v<n>` / `e<n>`.
pub fn parse_term(text: &str) -> Result<CwdTerm, TermError> {
    let mut parser = TermParser { bytes: text.as_bytes(), pos: 0 };
    let term = parser.term()?;
    parser.skip_ws();
    if parser.pos != parser.bytes.len() {
        return Err(parser.err("trailing input after term"));
    }
    term.validate()?;
    Ok(term)
}

fn random_const<R: rand::Rng>(rng: &mut R, k: AlgLabel) -> CwdTerm {
    let mut colors = BTreeSet::new();
    if rng.gen_ratio(1, 3) {
        colors.insert(ConstColor::Vertex(VColor(rng.gen_range(0..3))));
    }
    if rng.gen_ratio(1, 6) {
        colors.insert(ConstColor::Edge(EColor(rng.gen_range(0..2))));
    }
    CwdTerm::Const { label: rng.gen_range(1..=k), colors }
}

/// Seeded random well-formed term over `k` labels; used by round-trip and
/// invariant suites.
pub fn random_term<R: rand::Rng>(rng: &mut R, k: AlgLabel, size: usize) -> CwdTerm {
    assert!(k >= 1);
    if size <= 1 {
        return random_const(rng, k);
    }
    match rng.gen_range(0..4u8) {
        0 => {
            let left = rng.gen_range(1..size);
            CwdTerm::oplus(random_term(rng, k, left), random_term(rng, k, size - left))
        }
        1 if k >= 2 => {
            let from = rng.gen_range(1..=k);
            let to = loop {
                let t = rng.gen_range(1..=k);
                if t != from {
                    break t;
                }
            };
            CwdTerm::eta(EColor(rng.gen_range(0..2)), from, to, random_term(rng, k, size - 1))
        }
        2 if k >= 2 => {
            let from = rng.gen_range(1..=k);
            let to = loop {
                let t = rng.gen_range(1..=k);
                if t != from {
                    break t;
                }
            };
            CwdTerm::rho(from, to, random_term(rng, k, size - 1))
        }
        _ => {
            let left = 1.max(size / 2);
            CwdTerm::oplus(random_term(rng, k, left), random_term(rng, k, size - left))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::complete_graph;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn two_isolated_vertices() {
        let t = CwdTerm::oplus(CwdTerm::constant(1, []), CwdTerm::constant(1, []));
        let v = eval_term(&t).unwrap();
        assert_eq!(v.graph.n(), 2);
        assert_eq!(v.graph.edge_count(), 0);
        assert_eq!(v.lab, vec![1, 1]);
    }

    #[test]
    fn eta_adds_single_directed_edge() {
        let t = CwdTerm::eta(
            EColor(5),
            1,
            2,
            CwdTerm::oplus(CwdTerm::constant(1, []), CwdTerm::constant(2, [])),
        );
        let v = eval_term(&t).unwrap();
        assert_eq!(v.graph.edges().collect::<Vec<_>>(), vec![(0, 1, EColor(5))]);
    }

    #[test]
    fn staircase_triangle() {
        // eta both ways at each step builds symmetric K3 with labels {1,2}
        let t = clique_term(3).unwrap();
        let v = eval_term(&t).unwrap();
        let k3 = complete_graph(3);
        assert_eq!(v.graph.edges().collect::<BTreeSet<_>>(), k3.edges().collect());
    }

    #[test]
    fn clique_terms_match_direct_construction() {
        for n in [1usize, 2, 7] {
            let t = clique_term(n).unwrap();
            assert_eq!(t.k(), if n == 1 { 1 } else { 2 });
            let v = eval_term(&t).unwrap();
            assert_eq!(v.graph.n(), n);
            let expected = complete_graph(n);
            assert_eq!(v.graph.edges().collect::<BTreeSet<_>>(), expected.edges().collect());
            assert!(v.lab.iter().all(|&l| l == 1));
        }
        assert!(clique_term(0).is_err());
    }

    #[test]
    fn constants_carry_colors_and_loops() {
        let t = CwdTerm::constant(1, [ConstColor::Vertex(VColor(4)), ConstColor::Edge(EColor(2))]);
        let v = eval_term(&t).unwrap();
        assert!(v.graph.has_vertex_color(0, VColor(4)));
        assert!(v.graph.has_edge(0, 0, EColor(2)));
    }

    #[test]
    fn eta_idempotent_rho_preserves_edges() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..60 {
            let inner = random_term(&mut rng, 3, 8);
            let once = CwdTerm::eta(EColor(0), 1, 2, inner.clone());
            let twice = CwdTerm::eta(EColor(0), 1, 2, once.clone());
            assert_eq!(eval_term(&once).unwrap(), eval_term(&twice).unwrap());

            let relabeled = CwdTerm::rho(1, 3, inner.clone());
            let v0 = eval_term(&inner).unwrap();
            let v1 = eval_term(&relabeled).unwrap();
            assert_eq!(v0.graph, v1.graph);
            assert!(v0
                .lab
                .iter()
                .zip(&v1.lab)
                .all(|(&a, &b)| if a == 1 { b == 3 } else { a == b }));
        }
    }

    #[test]
    fn leaf_count_is_vertex_count() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..40 {
            let t = random_term(&mut rng, 4, 12);
            assert_eq!(eval_term(&t).unwrap().graph.n(), t.leaf_count());
        }
    }

    #[test]
    fn induced_subgraphs_of_cliques_are_cliques() {
        let v = eval_term(&clique_term(8).unwrap()).unwrap();
        let keep: BTreeSet<usize> = [0, 2, 5, 7].into();
        let (sub, _) = v.graph.induced_subgraph(&keep).unwrap();
        let expected = complete_graph(4);
        assert_eq!(sub.edges().collect::<BTreeSet<_>>(), expected.edges().collect());
    }

    #[test]
    fn parse_print_examples() {
        let t = parse_term("const[1]{}").unwrap();
        let v = eval_term(&t).unwrap();
        assert_eq!(v.graph.n(), 1);
        assert!(v.graph.vertex_colors(0).is_empty());

        let t = parse_term("oplus(const[1]{},const[1]{})").unwrap();
        assert_eq!(eval_term(&t).unwrap().graph.n(), 2);

        let t = parse_term("eta[e1,1,2]( oplus( const[1]{v0} , const[2]{e1,v2} ) )").unwrap();
        assert_eq!(parse_term(&print_term(&t)).unwrap(), t);

        assert!(parse_term("eta[e0,1,1](const[1]{})").is_err());
        assert!(parse_term("rho[0,1](const[1]{})").is_err());
        assert!(parse_term("oplus(const[1]{})").is_err());
        assert!(parse_term("const[1]{} trailing").is_err());
    }

    #[test]
    fn round_trip_100_random_terms() {
        let mut rng = StdRng::seed_from_u64(2024);
        for _ in 0..100 {
            let t = random_term(&mut rng, 4, 15);
            let printed = print_term(&t);
            assert_eq!(parse_term(&printed).unwrap(), t, "round trip failed for {printed}");
        }
    }

    #[test]
    fn hnm_single_column_is_clique() {
        for mode in [E2Mode::Strict, E2Mode::Consecutive] {
            let g = hnm_graph(1, 5, mode);
            let k5 = complete_graph(5);
            assert_eq!(g.edges().collect::<BTreeSet<_>>(), k5.edges().collect());
        }
    }

    #[test]
    fn hnm_columns_induce_cliques() {
        for mode in [E2Mode::Strict, E2Mode::Consecutive] {
            let g = hnm_graph(4, 4, mode);
            assert_eq!(g.n(), 16);
            for col in 0..4usize {
                let keep: BTreeSet<usize> = (0..4).map(|j| col * 4 + j).collect();
                let (sub, _) = g.induced_subgraph(&keep).unwrap();
                assert_eq!(sub.edge_count(), 12, "column {col} not a clique under {mode:?}");
            }
        }
    }

    #[test]
    fn hnm_single_row_follows_the_display() {
        // m = 1: strict E2 has l in i+1..=1, an empty range, so no edges
        let g = hnm_graph(6, 1, E2Mode::Strict);
        assert_eq!(g.edge_count(), 0);
        // consecutive-column reading gives the path over column heads
        let g = hnm_graph(6, 1, E2Mode::Consecutive);
        assert_eq!(g.und_degree(0), 1);
        assert_eq!(g.distance(0, 5).unwrap(), Some(5));
    }

    #[test]
    fn hnm_strict_matches_literal_display() {
        // independent evaluation of the displayed edge family
        let n = 5;
        let m = 3;
        let g = hnm_graph(n, m, E2Mode::Strict);
        let id = |i: usize, j: usize| (i - 1) * m + (j - 1);
        let mut expected = BTreeSet::new();
        for i in 1..=n {
            for j in 1..=m {
                for l in 1..=m {
                    if j != l {
                        expected.insert((id(i, j), id(i, l)));
                    }
                }
            }
        }
        for i in 1..=n - 1 {
            for j in 1..=m {
                for l in i + 1..=m {
                    if l <= n {
                        expected.insert((id(i, j), id(l, j)));
                        expected.insert((id(l, j), id(i, j)));
                    }
                }
            }
        }
        let actual: BTreeSet<(usize, usize)> = g.edges().map(|(u, v, _)| (u, v)).collect();
        assert_eq!(actual, expected);
    }
}
