//! Counting queries over covers (scheme 0x06).
//!
//! Two pipelines:
//!
//! * t-connected formulas (every satisfying tuple is clustered and its
//!   truth localizes to the joint ball): color a radius-2t cover's
//!   intersection graph properly, give each vertex the smallest color whose
//!   piece 2t-kernel holds it, and count per color class — the classes
//!   partition the satisfying tuples and each count transfers to the union
//!   graph of its color.
//! * t-local formulas already in scattered-conjunctive form (groups of
//!   variables pairwise more than 2t+1 apart, each group satisfying a
//!   connected component formula): sum per ordered tuple of kernel colors
//!   over union graphs of a nice cover with radius `m(2t+1)` and a
//!   distance-m coloring.
//!
//! Counting within a union is brute-force enumeration bounded by union
//! size; the per-union work is honest desk-scale arithmetic, with the
//! label/catalog split reported as everywhere else. With a modulus all
//! arithmetic is reduced mod s.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{read_varint, scheme_id, write_varint, Catalog, LabelBundle};
use crate::cover::{build_ball_cover, kernel_coloring, validate_cover, Cover};
use crate::graph::{ColoredGraph, VColor, Vertex};
use crate::labeler::PieceLabeler;
use crate::logic::validate::eval_on_induced;
use crate::logic::{
    eval_oracle_named, parse_formula, print_formula, Formula, LogicError, Var,
};
use crate::scheme::local::labeler_by_name;
use crate::scheme::SchemeError;

// ---------------------------------------------------------------------------
// t-connectedness validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct TConnectedWitness {
    pub graph_index: usize,
    pub args: Vec<Vertex>,
    pub sets: Vec<Vec<Vertex>>,
    pub global_truth: bool,
    pub connected_reading: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TConnectedReport {
    pub t: usize,
    pub samples: usize,
    pub violations: Vec<TConnectedWitness>,
}

impl TConnectedReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Samples instances and checks the t-connectedness equivalence: truth
/// forces pairwise distance at most `t` among the arguments and localizes
/// to the induced joint ball. Also spot-checks the ball-around-the-first-
/// argument consequence.
pub fn validate_t_connected(
    formula: &Formula,
    t: usize,
    graphs: &[ColoredGraph],
    samples_per_graph: usize,
    seed: u64,
) -> Result<TConnectedReport, SchemeError> {
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
            let global = eval_oracle_named(graph, formula, &named_args, &named_sets)
                .map_err(SchemeError::Logic)?;
            // right-hand side of the definition
            let pairwise_close = (0..args.len()).all(|i| {
                (i + 1..args.len()).all(|j| {
                    matches!(
                        graph.distance(args[i], args[j]).ok().flatten(),
                        Some(d) if d <= t
                    ) || args[i] == args[j]
                })
            });
            let connected_reading = if pairwise_close {
                let ball = graph
                    .ball(&args.iter().copied().collect(), t)
                    .map_err(LogicError::from)?;
                eval_on_induced(graph, &ball, formula, &named_args, &named_sets)
                    .map_err(SchemeError::Logic)?
            } else {
                false
            };
            samples += 1;
            if global != connected_reading {
                violations.push(TConnectedWitness {
                    graph_index,
                    args: args.clone(),
                    sets: sets.iter().map(|s| s.iter().copied().collect()).collect(),
                    global_truth: global,
                    connected_reading,
                });
            }
            // consequence: for m >= 1 the truth localizes to N^{2t}(a1)
            if global && !args.is_empty() {
                let ball = graph.ball_of(args[0], 2 * t).map_err(LogicError::from)?;
                if args.iter().all(|a| ball.contains(a)) {
                    let on_ball = eval_on_induced(graph, &ball, formula, &named_args, &named_sets)
                        .map_err(SchemeError::Logic)?;
                    if !on_ball {
                        violations.push(TConnectedWitness {
                            graph_index,
                            args,
                            sets: sets.iter().map(|s| s.iter().copied().collect()).collect(),
                            global_truth: global,
                            connected_reading: on_ball,
                        });
                    }
                }
            }
        }
    }
    Ok(TConnectedReport { t, samples, violations })
}

// ---------------------------------------------------------------------------
// shared pieces
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct CountingMeta {
    pipeline: String,
    t: usize,
    labeler: String,
    pbase: u16,
    color_count: usize,
    /// declared modulus, if the scheme was built for modulo counting
    modulus: Option<u64>,
    /// per union id: the color set it aggregates
    union_colors: Vec<Vec<usize>>,
    /// per union id: whether the union was nonempty and labeled
    built: Vec<bool>,
    /// ordered color tuples to sum over (tuple, union id); for the
    /// t-connected pipeline this is one singleton tuple per color
    terms: Vec<(Vec<usize>, usize)>,
    /// group structure: variable names per group (t-connected pipeline has
    /// one group holding every variable)
    groups: Vec<Vec<Var>>,
    formula_texts: Vec<String>,
}

fn augment_with_kernel_colors(
    graph: &ColoredGraph,
    vertex_color: &[usize],
    pbase: u16,
) -> Result<ColoredGraph, SchemeError> {
    let mut colors: Vec<(Vertex, VColor)> = Vec::new();
    for v in 0..graph.n() {
        for c in graph.vertex_colors(v) {
            colors.push((v, *c));
        }
        colors.push((v, VColor(pbase + vertex_color[v] as u16)));
    }
    Ok(ColoredGraph::new(graph.n(), colors, graph.edges())?)
}

fn encode_counting_labels(
    n: usize,
    vertex_color: &[usize],
    vertex_entries: &[Vec<(u64, Vec<u8>)>],
) -> Result<LabelBundle, SchemeError> {
    let mut labels = Vec::with_capacity(n);
    for v in 0..n {
        let mut label = Vec::new();
        write_varint(&mut label, v as u64);
        write_varint(&mut label, vertex_color[v] as u64);
        write_varint(&mut label, vertex_entries[v].len() as u64);
        for (uid, sublabel) in &vertex_entries[v] {
            write_varint(&mut label, *uid);
            write_varint(&mut label, sublabel.len() as u64);
            label.extend_from_slice(sublabel);
        }
        labels.push(label);
    }
    Ok(LabelBundle::new(scheme_id::COUNTING, labels)?)
}

// ---------------------------------------------------------------------------
// pipeline 1: t-connected formulas
// ---------------------------------------------------------------------------

/// Builds a counting scheme for a t-connected formula. Unless `force` is
/// set, t-connectedness is first validated empirically on the input graph
/// and the build is rejected on any violation.
pub fn build_counting_scheme(
    graph: &ColoredGraph,
    formula: &Formula,
    t: usize,
    labeler: &dyn PieceLabeler,
    modulus: Option<u64>,
    cover: Option<Cover>,
    force: bool,
) -> Result<(LabelBundle, Catalog), SchemeError> {
    if formula.free_fo_vars().is_empty() {
        return Err(SchemeError::UnsupportedQuery(
            "counting needs at least one free FO variable".into(),
        ));
    }
    if let Some(s) = modulus {
        if s < 2 {
            return Err(SchemeError::UnsupportedQuery("modulus must be >= 2".into()));
        }
    }
    if !force {
        let report =
            validate_t_connected(formula, t, std::slice::from_ref(graph), 40, 0x715)?;
        if !report.passed() {
            return Err(SchemeError::UnsupportedQuery(format!(
                "formula failed {t}-connectedness validation with witness {:?}; \
                 pass force to build anyway",
                report.violations[0]
            )));
        }
    }
    let cover = match cover {
        Some(c) => c,
        None => build_ball_cover(graph, 2 * t)?,
    };
    if cover.r() < 2 * t {
        return Err(SchemeError::CoverDefect(format!(
            "cover has radius {}, counting needs {}",
            cover.r(),
            2 * t
        )));
    }
    let report = validate_cover(graph, &cover)?;
    if !report.passed() {
        return Err(SchemeError::CoverDefect(format!(
            "condition (1) fails at vertices {:?}",
            report.condition1_witnesses
        )));
    }
    let kc = kernel_coloring(graph, &cover, 2 * t, 1)?;
    let pbase = graph.vertex_palette().iter().map(|c| c.0 + 1).max().unwrap_or(0);
    let colored = augment_with_kernel_colors(graph, &kc.vertex_color, pbase)?;

    let mut sections: Vec<(String, Vec<u8>)> = Vec::new();
    let mut vertex_entries: Vec<Vec<(u64, Vec<u8>)>> = vec![Vec::new(); graph.n()];
    let mut union_colors = Vec::new();
    let mut built = Vec::new();
    let mut terms = Vec::new();
    for color in 0..kc.color_count {
        let members: BTreeSet<Vertex> = (0..graph.n())
            .filter(|&v| {
                cover
                    .pieces_of(v)
                    .iter()
                    .any(|&p| kc.piece_color[p] == color)
            })
            .collect();
        union_colors.push(vec![color]);
        sections.push((
            format!("color/{color}"),
            serde_json::to_vec(&serde_json::json!({ "id": color, "size": members.len() }))
                .expect("color meta serializes"),
        ));
        terms.push((vec![color], color));
        built.push(!members.is_empty());
        if members.is_empty() {
            continue;
        }
        let (piece, map) = colored.induced_subgraph(&members)?;
        let built = labeler.build(color as u64, &piece, &map)?;
        sections.extend(built.sections.iter().cloned());
        for (local, &v) in map.iter().enumerate() {
            vertex_entries[v].push((color as u64, built.sublabels[local].clone()));
        }
    }

    let meta = CountingMeta {
        pipeline: "t-connected".into(),
        t,
        labeler: labeler.name().to_owned(),
        pbase,
        color_count: kc.color_count,
        modulus,
        union_colors,
        built,
        terms,
        groups: vec![formula.free_fo_vars()],
        formula_texts: vec![print_formula(formula)],
    };
    let bundle = encode_counting_labels(graph.n(), &kc.vertex_color, &vertex_entries)?;
    let mut catalog = Catalog::new(scheme_id::COUNTING);
    for (name, bytes) in sections {
        catalog.insert(name, bytes)?;
    }
    catalog.insert("meta", serde_json::to_vec(&meta).expect("meta serializes"))?;
    Ok((bundle, catalog))
}

// ---------------------------------------------------------------------------
// pipeline 2: t-local formulas in scattered-conjunctive form
// ---------------------------------------------------------------------------

/// A t-local counting query already in the conjunctive shape the pipeline
/// accepts: variable groups pairwise more than `2t+1` apart, each group
/// constrained by its own connected component formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScatteredConjunctiveForm {
    pub t: usize,
    pub groups: Vec<(Vec<Var>, Formula)>,
}

impl ScatteredConjunctiveForm {
    pub fn arity(&self) -> usize {
        self.groups.iter().map(|(vars, _)| vars.len()).sum()
    }

    pub fn all_vars(&self) -> Vec<Var> {
        self.groups.iter().flat_map(|(vars, _)| vars.clone()).collect()
    }

    pub fn set_vars(&self) -> Vec<Var> {
        let mut out: Vec<Var> = Vec::new();
        for (_, f) in &self.groups {
            for sv in f.free_set_vars() {
                if !out.contains(&sv) {
                    out.push(sv);
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), SchemeError> {
        if self.groups.is_empty() {
            return Err(SchemeError::UnsupportedQuery("empty conjunctive form".into()));
        }
        let vars = self.all_vars();
        let distinct: BTreeSet<&Var> = vars.iter().collect();
        if distinct.len() != vars.len() {
            return Err(SchemeError::UnsupportedQuery("group variables must be distinct".into()));
        }
        for (gvars, f) in &self.groups {
            if gvars.is_empty() {
                return Err(SchemeError::UnsupportedQuery("empty variable group".into()));
            }
            for v in f.free_fo_vars() {
                if !gvars.contains(&v) {
                    return Err(SchemeError::UnsupportedQuery(format!(
                        "component variable {v:?} escapes its group"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The plain FO formula this form denotes, for oracle comparison:
    /// cross-group distance constraints conjoined with the components.
    pub fn to_formula(&self) -> Formula {
        let mut parts = Vec::new();
        for i in 0..self.groups.len() {
            for j in i + 1..self.groups.len() {
                for a in &self.groups[i].0 {
                    for b in &self.groups[j].0 {
                        parts.push(Formula::not(Formula::DistLe(
                            a.clone(),
                            b.clone(),
                            2 * self.t + 1,
                        )));
                    }
                }
            }
        }
        for (_, f) in &self.groups {
            parts.push(f.clone());
        }
        Formula::and_all(parts)
    }

    /// Line format: `t <t>` then one `group <vars> :: <formula>` per group.
    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        writeln!(out, "t {}", self.t).unwrap();
        for (vars, f) in &self.groups {
            writeln!(out, "group {} :: {}", vars.join(","), print_formula(f)).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SchemeError> {
        let mut t = None;
        let mut groups = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("t ") {
                t = rest.trim().parse().ok();
            } else if let Some(rest) = line.strip_prefix("group ") {
                let (head, tail) = rest.split_once("::").ok_or_else(|| {
                    SchemeError::MalformedLabel(format!("line {}: expected `::`", idx + 1))
                })?;
                let vars: Vec<Var> =
                    head.trim().split(',').map(|v| v.trim().to_owned()).collect();
                let formula = parse_formula(tail.trim())
                    .map_err(|e| SchemeError::MalformedLabel(format!("line {}: {e}", idx + 1)))?;
                groups.push((vars, formula));
            } else {
                return Err(SchemeError::MalformedLabel(format!(
                    "line {}: unknown directive",
                    idx + 1
                )));
            }
        }
        let form = ScatteredConjunctiveForm {
            t: t.ok_or_else(|| SchemeError::MalformedLabel("missing t".into()))?,
            groups,
        };
        form.validate()?;
        Ok(form)
    }
}

/// All ordered tuples of `len` colors out of `0..colors`.
fn ordered_tuples(colors: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::with_capacity(out.len() * colors);
        for prefix in &out {
            for c in 0..colors {
                let mut extended = prefix.clone();
                extended.push(c);
                next.push(extended);
            }
        }
        out = next;
    }
    out
}

/// The per-tuple formula: the conjunctive form plus kernel-color
/// constraints on the first variable of each group.
fn tuple_count_formula(form: &ScatteredConjunctiveForm, tuple: &[usize], pbase: u16) -> Formula {
    let mut f = form.to_formula();
    for (l, (gvars, _)) in form.groups.iter().enumerate() {
        f = Formula::and(f, Formula::Col(VColor(pbase + tuple[l] as u16), gvars[0].clone()));
    }
    f
}

/// Builds the counting scheme for a t-local query in scattered-conjunctive
/// form over a nice cover of radius `m(2t+1)`.
pub fn build_tlocal_counting(
    graph: &ColoredGraph,
    form: &ScatteredConjunctiveForm,
    labeler: &dyn PieceLabeler,
    modulus: Option<u64>,
    cover: Cover,
) -> Result<(LabelBundle, Catalog), SchemeError> {
    form.validate()?;
    if let Some(s) = modulus {
        if s < 2 {
            return Err(SchemeError::UnsupportedQuery("modulus must be >= 2".into()));
        }
    }
    if !cover.is_nice() {
        return Err(SchemeError::CoverNotNice);
    }
    let t = form.t;
    let m = form.arity();
    let r = m * (2 * t + 1);
    if cover.r() < r {
        return Err(SchemeError::CoverDefect(format!(
            "cover has radius {}, this form needs {r}",
            cover.r()
        )));
    }
    let report = validate_cover(graph, &cover)?;
    if !report.passed() {
        return Err(SchemeError::CoverDefect(format!(
            "condition (1) fails at vertices {:?}",
            report.condition1_witnesses
        )));
    }
    let kc = kernel_coloring(graph, &cover, r, m)?;
    let pbase = graph.vertex_palette().iter().map(|c| c.0 + 1).max().unwrap_or(0);
    let colored = augment_with_kernel_colors(graph, &kc.vertex_color, pbase)?;

    // union graphs per color set, then terms per ordered tuple
    let tuples = ordered_tuples(kc.color_count, form.groups.len());
    let mut union_ids: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    let mut union_colors: Vec<Vec<usize>> = Vec::new();
    let mut built: Vec<bool> = Vec::new();
    let mut sections: Vec<(String, Vec<u8>)> = Vec::new();
    let mut vertex_entries: Vec<Vec<(u64, Vec<u8>)>> = vec![Vec::new(); graph.n()];
    let mut terms = Vec::new();
    for tuple in &tuples {
        let colors: Vec<usize> = {
            let set: BTreeSet<usize> = tuple.iter().copied().collect();
            set.into_iter().collect()
        };
        let uid = match union_ids.get(&colors) {
            Some(&uid) => uid,
            None => {
                let uid = union_colors.len();
                union_ids.insert(colors.clone(), uid);
                union_colors.push(colors.clone());
                let members: BTreeSet<Vertex> = (0..graph.n())
                    .filter(|&v| {
                        cover
                            .pieces_of(v)
                            .iter()
                            .any(|&p| colors.contains(&kc.piece_color[p]))
                    })
                    .collect();
                sections.push((
                    format!(
                        "ctuple/{}",
                        colors.iter().map(usize::to_string).collect::<Vec<_>>().join("-")
                    ),
                    serde_json::to_vec(
                        &serde_json::json!({ "id": uid, "colors": colors, "size": members.len() }),
                    )
                    .expect("ctuple meta serializes"),
                ));
                built.push(!members.is_empty());
                if !members.is_empty() {
                    let (piece, map) = colored.induced_subgraph(&members)?;
                    let built = labeler.build(uid as u64, &piece, &map)?;
                    sections.extend(built.sections.iter().cloned());
                    for (local, &v) in map.iter().enumerate() {
                        vertex_entries[v].push((uid as u64, built.sublabels[local].clone()));
                    }
                }
                uid
            }
        };
        terms.push((tuple.clone(), uid));
    }

    let meta = CountingMeta {
        pipeline: "t-local".into(),
        t,
        labeler: labeler.name().to_owned(),
        pbase,
        color_count: kc.color_count,
        modulus,
        union_colors,
        built,
        terms,
        groups: form.groups.iter().map(|(vars, _)| vars.clone()).collect(),
        formula_texts: vec![form.to_text()],
    };
    let bundle = encode_counting_labels(graph.n(), &kc.vertex_color, &vertex_entries)?;
    let mut catalog = Catalog::new(scheme_id::COUNTING);
    for (name, bytes) in sections {
        catalog.insert(name, bytes)?;
    }
    catalog.insert("meta", serde_json::to_vec(&meta).expect("meta serializes"))?;
    Ok((bundle, catalog))
}

// ---------------------------------------------------------------------------
// decoder
// ---------------------------------------------------------------------------

enum CountingQuery {
    TConnected(Formula),
    TLocal(ScatteredConjunctiveForm),
}

/// Pure counting decoder for scheme 0x06; sums per-term counts computed by
/// the piece labeler on catalog-backed unions.
pub struct CountingDecoder<'a> {
    catalog: &'a Catalog,
    labeler: Box<dyn PieceLabeler>,
    meta: CountingMeta,
    query: CountingQuery,
}

impl<'a> CountingDecoder<'a> {
    pub fn new(bundle: &LabelBundle, catalog: &'a Catalog) -> Result<Self, SchemeError> {
        if bundle.scheme_id() != scheme_id::COUNTING {
            return Err(SchemeError::WrongScheme {
                expected: scheme_id::COUNTING,
                got: bundle.scheme_id(),
            });
        }
        let meta: CountingMeta = {
            let bytes = catalog
                .section("meta")
                .ok_or_else(|| SchemeError::MalformedLabel("catalog missing meta".into()))?;
            serde_json::from_slice(bytes)
                .map_err(|e| SchemeError::MalformedLabel(format!("bad meta: {e}")))?
        };
        let labeler = labeler_by_name(&meta.labeler)?;
        let query = match meta.pipeline.as_str() {
            "t-connected" => CountingQuery::TConnected(
                parse_formula(&meta.formula_texts[0])
                    .map_err(|e| SchemeError::MalformedLabel(format!("bad formula: {e}")))?,
            ),
            "t-local" => {
                CountingQuery::TLocal(ScatteredConjunctiveForm::from_text(&meta.formula_texts[0])?)
            }
            other => {
                return Err(SchemeError::MalformedLabel(format!("unknown pipeline {other:?}")))
            }
        };
        Ok(CountingDecoder { catalog, labeler, meta, query })
    }

    pub fn declared_modulus(&self) -> Option<u64> {
        self.meta.modulus
    }

    fn parse_label(&self, bytes: &[u8]) -> Result<Vec<(u64, Vec<u8>)>, SchemeError> {
        let mut pos = 0;
        let _id = read_varint(bytes, &mut pos)?;
        let _color = read_varint(bytes, &mut pos)?;
        let count = read_varint(bytes, &mut pos)? as usize;
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let uid = read_varint(bytes, &mut pos)?;
            let len = read_varint(bytes, &mut pos)? as usize;
            let end = pos
                .checked_add(len)
                .filter(|&e| e <= bytes.len())
                .ok_or_else(|| SchemeError::MalformedLabel("truncated sublabel".into()))?;
            entries.push((uid, bytes[pos..end].to_vec()));
            pos = end;
        }
        Ok(entries)
    }

    /// The counting query: number of satisfying tuples for the given set
    /// arguments, reduced mod `modulus` when given.
    pub fn count(
        &self,
        set_label_sets: &[Vec<&[u8]>],
        modulus: Option<u64>,
    ) -> Result<u64, SchemeError> {
        let set_count = match &self.query {
            CountingQuery::TConnected(f) => f.free_set_vars().len(),
            CountingQuery::TLocal(form) => form.set_vars().len(),
        };
        if set_label_sets.len() != set_count {
            return Err(SchemeError::UnsupportedQuery(format!(
                "query takes {set_count} set arguments, got {}",
                set_label_sets.len()
            )));
        }
        // per set variable: union id -> member sublabels
        let unions = self.meta.union_colors.len();
        let mut per_union: Vec<Vec<Vec<Vec<u8>>>> =
            vec![vec![Vec::new(); set_label_sets.len()]; unions];
        for (si, family) in set_label_sets.iter().enumerate() {
            for bytes in family {
                for (uid, sub) in self.parse_label(bytes)? {
                    let uid = uid as usize;
                    if uid >= unions {
                        return Err(SchemeError::MalformedLabel("union id out of range".into()));
                    }
                    per_union[uid][si].push(sub);
                }
            }
        }
        let mut total: u64 = 0;
        for (tuple, uid) in &self.meta.terms {
            let formula = match &self.query {
                CountingQuery::TConnected(f) => {
                    // phi_i = phi /\ p_i(x1)
                    let first = self.meta.groups[0][0].clone();
                    Formula::and(
                        f.clone(),
                        Formula::Col(VColor(self.meta.pbase + tuple[0] as u16), first),
                    )
                }
                CountingQuery::TLocal(form) => {
                    tuple_count_formula(form, tuple, self.meta.pbase)
                }
            };
            // order clipped families by the formula's set order
            let plan_sets = match &self.query {
                CountingQuery::TConnected(f) => f.free_set_vars(),
                CountingQuery::TLocal(form) => form.set_vars(),
            };
            let families: Vec<Vec<Vec<u8>>> = formula
                .free_set_vars()
                .iter()
                .map(|sv| {
                    let si = plan_sets
                        .iter()
                        .position(|v| v == sv)
                        .expect("set variables preserved by construction");
                    per_union[*uid][si].clone()
                })
                .collect();
            // empty unions were never built; they contribute nothing
            if !self.meta.built.get(*uid).copied().unwrap_or(false) {
                continue;
            }
            let c = self
                .labeler
                .count(self.catalog, *uid as u64, &formula, &families, modulus)?;
            total = match modulus {
                Some(s) => (total + c) % s,
                None => total + c,
            };
        }
        Ok(total)
    }
}
