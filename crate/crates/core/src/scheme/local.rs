//! t-local queries with set arguments over a cover (scheme 0x03).
//!
//! Build: cover the graph with radius `r = m(2t+1)` pieces, label every
//! piece with the chosen piece labeler, and store per vertex its piece
//! memberships with three inclusion flags (`N^t`, `N^{2t+1}`, `N^r` inside
//! the piece) plus the per-piece sublabel.
//!
//! Query: recover the t-distance type of the argument tuple from labels
//! (distance tests inside a piece that swallows the whole `N^{2t+1}` ball
//! are exact), split the tuple into type components, pick for each
//! component a piece containing its `N^t` ball, evaluate the plan's
//! component formulas there with set arguments clipped to the piece, and
//! combine per the plan's expression for that distance type.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::codec::{read_varint, scheme_id, write_varint, Catalog, LabelBundle};
use crate::cover::{build_ball_cover, validate_cover, Cover};
use crate::graph::{ColoredGraph, Vertex};
use crate::labeler::{PieceBuild, PieceLabeler};
use crate::logic::{
    parse_plan, print_plan, DistanceType, LocalPlan, PlanError, QueryPlan,
};

use super::SchemeError;

pub(crate) const FLAG_BALL_T: u8 = 1 << 0;
pub(crate) const FLAG_BALL_2T1: u8 = 1 << 1;
pub(crate) const FLAG_BALL_R: u8 = 1 << 2;

/// One piece membership of a vertex, as decoded from its label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct PieceEntry {
    pub piece: u64,
    pub flags: u8,
    pub sublabel: Vec<u8>,
}

impl PieceEntry {
    pub fn has(&self, flag: u8) -> bool {
        self.flags & flag != 0
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct CoverMeta {
    pub t: usize,
    pub m: usize,
    pub r: usize,
    pub ell: usize,
    pub pieces: usize,
    pub labeler: String,
}

/// Cover plus per-piece labeler outputs, shared between the local and
/// general builders.
pub(crate) struct CoverLabeling {
    pub cover: Cover,
    pub builds: Vec<PieceBuild>,
}

pub(crate) fn build_cover_labeling(
    graph: &ColoredGraph,
    cover: Cover,
    labeler: &dyn PieceLabeler,
) -> Result<(CoverLabeling, Vec<(String, Vec<u8>)>), SchemeError> {
    let mut builds = Vec::with_capacity(cover.pieces().len());
    let mut sections = Vec::new();
    for (i, piece) in cover.pieces().iter().enumerate() {
        let (sub, map) = graph.induced_subgraph(piece)?;
        let built = labeler.build(i as u64, &sub, &map)?;
        sections.extend(built.sections.iter().cloned());
        builds.push(built);
    }
    Ok((CoverLabeling { cover, builds }, sections))
}

/// Encodes the flagged piece entries of one vertex: entry count, then per
/// entry piece id, flags byte, sublabel length and bytes.
pub(crate) fn encode_vertex_entries(
    graph: &ColoredGraph,
    labeling: &CoverLabeling,
    v: Vertex,
    t: usize,
    r: usize,
    out: &mut Vec<u8>,
) -> Result<(), SchemeError> {
    let ball_t = graph.ball_of(v, t)?;
    let ball_2t1 = graph.ball_of(v, 2 * t + 1)?;
    let ball_r = graph.ball_of(v, r)?;
    let memberships = labeling.cover.pieces_of(v);
    write_varint(out, memberships.len() as u64);
    for &piece_id in memberships {
        let piece = labeling.cover.piece(piece_id);
        let mut flags = 0u8;
        if ball_t.is_subset(piece) {
            flags |= FLAG_BALL_T;
        }
        if ball_2t1.is_subset(piece) {
            flags |= FLAG_BALL_2T1;
        }
        if ball_r.is_subset(piece) {
            flags |= FLAG_BALL_R;
        }
        let local = piece
            .iter()
            .position(|&w| w == v)
            .expect("membership index consistent with piece");
        let sublabel = &labeling.builds[piece_id].sublabels[local];
        write_varint(out, piece_id as u64);
        out.push(flags);
        write_varint(out, sublabel.len() as u64);
        out.extend_from_slice(sublabel);
    }
    Ok(())
}

pub(crate) fn decode_entries(
    bytes: &[u8],
    pos: &mut usize,
) -> Result<Vec<PieceEntry>, SchemeError> {
    let count = read_varint(bytes, pos)? as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let piece = read_varint(bytes, pos)?;
        let flags = *bytes
            .get(*pos)
            .ok_or_else(|| SchemeError::MalformedLabel("truncated entry flags".into()))?;
        *pos += 1;
        let len = read_varint(bytes, pos)? as usize;
        let end = pos
            .checked_add(len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| SchemeError::MalformedLabel("truncated sublabel".into()))?;
        let sublabel = bytes[*pos..end].to_vec();
        *pos = end;
        entries.push(PieceEntry { piece, flags, sublabel });
    }
    Ok(entries)
}

fn require_local(plan: &QueryPlan) -> Result<&LocalPlan, SchemeError> {
    match plan {
        QueryPlan::Local(p) => Ok(p),
        other => Err(SchemeError::PlanKindMismatch {
            expected: "local",
            got: other.kind_name(),
        }),
    }
}

/// Builds the cover (a ball cover of radius `m(2t+1)` unless one is
/// supplied), validates condition (1) at that radius, labels the pieces and
/// assembles the bundle and catalog.
pub fn build_local_scheme(
    graph: &ColoredGraph,
    plan: &QueryPlan,
    labeler: &dyn PieceLabeler,
    cover: Option<Cover>,
) -> Result<(LabelBundle, Catalog), SchemeError> {
    let local = require_local(plan)?;
    plan.validate()?;
    let m = local.vars.len();
    let r = m * (2 * local.t + 1);
    let cover = match cover {
        Some(c) => c,
        None => build_ball_cover(graph, r)?,
    };
    if cover.r() < r {
        return Err(SchemeError::CoverDefect(format!(
            "cover has radius {}, plan needs {r}",
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
    let meta = CoverMeta {
        t: local.t,
        m,
        r,
        ell: cover.ell(),
        pieces: cover.pieces().len(),
        labeler: labeler.name().to_owned(),
    };
    let (labeling, sections) = build_cover_labeling(graph, cover, labeler)?;
    let mut labels = Vec::with_capacity(graph.n());
    for v in 0..graph.n() {
        let mut label = Vec::new();
        write_varint(&mut label, v as u64);
        encode_vertex_entries(graph, &labeling, v, local.t, r, &mut label)?;
        labels.push(label);
    }
    let mut catalog = Catalog::new(scheme_id::LOCAL);
    for (name, bytes) in sections {
        catalog.insert(name, bytes)?;
    }
    catalog.insert("plan", print_plan(plan).into_bytes())?;
    catalog.insert("cover/meta", serde_json::to_vec(&meta).expect("meta serializes"))?;
    let bundle = LabelBundle::new(scheme_id::LOCAL, labels)?;
    Ok((bundle, catalog))
}

/// Pure decoder for scheme 0x03: everything it needs lives in the catalog
/// and the labels passed per query.
pub struct LocalDecoder<'a> {
    catalog: &'a Catalog,
    labeler: Box<dyn PieceLabeler>,
    plan: LocalPlan,
    meta: CoverMeta,
}

pub(crate) fn read_meta(catalog: &Catalog, section: &str) -> Result<CoverMeta, SchemeError> {
    let bytes = catalog
        .section(section)
        .ok_or_else(|| SchemeError::MalformedLabel(format!("catalog missing {section}")))?;
    serde_json::from_slice(bytes)
        .map_err(|e| SchemeError::MalformedLabel(format!("bad {section}: {e}")))
}

pub(crate) fn read_plan(catalog: &Catalog) -> Result<QueryPlan, SchemeError> {
    let bytes = catalog
        .section("plan")
        .ok_or_else(|| SchemeError::MalformedLabel("catalog missing plan".into()))?;
    let text = std::str::from_utf8(bytes)
        .map_err(|_| SchemeError::MalformedLabel("plan is not utf-8".into()))?;
    Ok(parse_plan(text)?)
}

pub(crate) fn labeler_by_name(name: &str) -> Result<Box<dyn PieceLabeler>, SchemeError> {
    crate::labeler::LabelerKind::parse(name)
        .map(|k| k.instantiate())
        .ok_or_else(|| SchemeError::MalformedLabel(format!("unknown labeler {name:?}")))
}

impl<'a> LocalDecoder<'a> {
    pub fn new(bundle: &LabelBundle, catalog: &'a Catalog) -> Result<Self, SchemeError> {
        if bundle.scheme_id() != scheme_id::LOCAL {
            return Err(SchemeError::WrongScheme {
                expected: scheme_id::LOCAL,
                got: bundle.scheme_id(),
            });
        }
        let meta = read_meta(catalog, "cover/meta")?;
        let plan = match read_plan(catalog)? {
            QueryPlan::Local(p) => p,
            other => {
                return Err(SchemeError::PlanKindMismatch {
                    expected: "local",
                    got: other.kind_name(),
                })
            }
        };
        let labeler = labeler_by_name(&meta.labeler)?;
        Ok(LocalDecoder { catalog, labeler, plan, meta })
    }

    fn parse_label(&self, bytes: &[u8]) -> Result<(Vertex, Vec<PieceEntry>), SchemeError> {
        let mut pos = 0;
        let id = read_varint(bytes, &mut pos)? as Vertex;
        let entries = decode_entries(bytes, &mut pos)?;
        if pos != bytes.len() {
            return Err(SchemeError::MalformedLabel("trailing bytes".into()));
        }
        Ok((id, entries))
    }

    /// Recovers the t-distance type of the argument tuple from labels only.
    pub fn decode_distance_type(&self, arg_labels: &[&[u8]]) -> Result<DistanceType, SchemeError> {
        let parsed: Vec<(Vertex, Vec<PieceEntry>)> = arg_labels
            .iter()
            .map(|bytes| self.parse_label(bytes))
            .collect::<Result<_, _>>()?;
        decode_distance_type_from(
            self.catalog,
            self.labeler.as_ref(),
            &parsed,
            self.plan.t,
        )
    }

    /// Answers the planned query from argument labels and per-set label
    /// families.
    pub fn eval(
        &self,
        arg_labels: &[&[u8]],
        set_label_sets: &[Vec<&[u8]>],
    ) -> Result<bool, SchemeError> {
        if arg_labels.len() != self.meta.m {
            return Err(SchemeError::UnsupportedQuery(format!(
                "plan takes {} arguments, got {}",
                self.meta.m,
                arg_labels.len()
            )));
        }
        let parsed: Vec<(Vertex, Vec<PieceEntry>)> = arg_labels
            .iter()
            .map(|bytes| self.parse_label(bytes))
            .collect::<Result<_, _>>()?;
        let sets: Vec<Vec<PieceEntry>> = parse_set_entries(self, set_label_sets)?;
        eval_local_from_labels(
            self.catalog,
            self.labeler.as_ref(),
            &self.plan,
            &parsed,
            &sets,
        )
    }
}

fn parse_set_entries(
    dec: &LocalDecoder,
    set_label_sets: &[Vec<&[u8]>],
) -> Result<Vec<Vec<PieceEntry>>, SchemeError> {
    set_label_sets
        .iter()
        .map(|family| {
            let mut entries = Vec::new();
            for bytes in family {
                let (_, mut es) = dec.parse_label(bytes)?;
                entries.append(&mut es);
            }
            Ok(entries)
        })
        .collect()
}

/// Distance-type recovery shared with the general scheme. For each pair,
/// pick the smallest piece swallowing the first argument's `N^{2t+1}` ball;
/// the pair is within `2t+1` iff the second argument lies in that piece at
/// piece-distance at most `2t+1`.
pub(crate) fn decode_distance_type_from(
    catalog: &Catalog,
    labeler: &dyn PieceLabeler,
    parsed: &[(Vertex, Vec<PieceEntry>)],
    t: usize,
) -> Result<DistanceType, SchemeError> {
    let m = parsed.len();
    let mut edges = BTreeSet::new();
    for i in 0..m {
        for j in i + 1..m {
            if parsed[i].0 == parsed[j].0 {
                edges.insert((i, j));
                continue;
            }
            let (_, entries_i) = &parsed[i];
            let anchor = entries_i
                .iter()
                .filter(|e| e.has(FLAG_BALL_2T1))
                .min_by_key(|e| e.piece)
                .ok_or_else(|| {
                    SchemeError::CoverDefect(
                        "no piece contains the argument's (2t+1)-ball".into(),
                    )
                })?;
            let other = parsed[j].1.iter().find(|e| e.piece == anchor.piece);
            let within = match other {
                None => false,
                Some(e) => matches!(
                    labeler.dist(catalog, &anchor.sublabel, &e.sublabel)?,
                    Some(d) if d <= (2 * t + 1) as u64
                ),
            };
            if within {
                edges.insert((i, j));
            }
        }
    }
    Ok(DistanceType { m, t, edges })
}

/// Component evaluation shared with the general scheme.
pub(crate) fn eval_local_from_labels(
    catalog: &Catalog,
    labeler: &dyn PieceLabeler,
    plan: &LocalPlan,
    parsed: &[(Vertex, Vec<PieceEntry>)],
    set_entries: &[Vec<PieceEntry>],
) -> Result<bool, SchemeError> {
    let delta = decode_distance_type_from(catalog, labeler, parsed, plan.t)?;
    let case = plan
        .case_for(&delta.edges)
        .ok_or_else(|| SchemeError::Plan(PlanError::MissingDelta(delta.key())))?;
    let components = delta.components();

    // pick one covering piece per distance-type component: a piece whose
    // r-ball flag is set on the anchor and that holds every member
    let mut component_piece: Vec<Option<u64>> = vec![None; components.len()];
    for (ci, comp) in components.iter().enumerate() {
        let anchor = comp[0];
        let candidates: Vec<u64> = parsed[anchor]
            .1
            .iter()
            .filter(|e| e.has(FLAG_BALL_R))
            .map(|e| e.piece)
            .collect();
        let chosen = candidates
            .into_iter()
            .find(|&p| {
                comp.iter()
                    .all(|&pos| parsed[pos].1.iter().any(|e| e.piece == p))
            })
            .ok_or_else(|| {
                SchemeError::CoverDefect(format!(
                    "no piece covers distance-type component {comp:?}"
                ))
            })?;
        component_piece[ci] = Some(chosen);
    }

    let position_of = |name: &str| -> Result<usize, SchemeError> {
        plan.vars
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| SchemeError::MalformedLabel(format!("unknown plan variable {name:?}")))
    };

    let result = case.expr.try_eval(&mut |&idx: &usize| {
        let comp = &case.components[idx];
        // the delta component this formula lives in; variable-free
        // components evaluate in the first component's piece
        let ci = match comp.vars.first() {
            Some(name) => {
                let pos = position_of(name)?;
                components
                    .iter()
                    .position(|c| c.contains(&pos))
                    .expect("positions partition into components")
            }
            None => 0,
        };
        let piece = component_piece[ci].expect("component piece chosen above");
        let arg_bytes: Vec<&[u8]> = comp
            .formula
            .free_fo_vars()
            .iter()
            .map(|name| {
                let pos = position_of(name)?;
                parsed[pos]
                    .1
                    .iter()
                    .find(|e| e.piece == piece)
                    .map(|e| e.sublabel.as_slice())
                    .ok_or_else(|| {
                        SchemeError::CoverDefect(format!(
                            "argument {name:?} missing from chosen piece"
                        ))
                    })
            })
            .collect::<Result<_, _>>()?;
        let sets: Vec<Vec<Vec<u8>>> = comp
            .formula
            .free_set_vars()
            .iter()
            .map(|sv| {
                let si = plan
                    .set_vars
                    .iter()
                    .position(|v| v == sv)
                    .ok_or_else(|| {
                        SchemeError::MalformedLabel(format!("unknown set variable {sv:?}"))
                    })?;
                Ok(set_entries[si]
                    .iter()
                    .filter(|e| e.piece == piece)
                    .map(|e| e.sublabel.clone())
                    .collect())
            })
            .collect::<Result<_, SchemeError>>()?;
        Ok::<bool, SchemeError>(labeler.eval(catalog, piece, &comp.formula, &arg_bytes, &sets)?)
    })?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{bounded_degree, random_forest_union, unit_interval};
    use crate::labeler::{CatalogLabeler, CentroidLabeler};
    use crate::logic::{distance_type, eval_plan_oracle, validate_plan, parse_formula};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    const NEIGHBOR_IN_Y_PLAN: &str = "
kind local
vars x,y
setvars Y
t 1
delta none
comp c1 vars x :: E z. (edge(x,z) & z in Y)
comp c2 vars y :: E z. (edge(y,z) & z in Y)
expr c1 & c2
delta 1-2
comp c12 vars x,y :: (E z. (edge(x,z) & z in Y)) & (E z. (edge(y,z) & z in Y))
expr c12
";

    const SINGLE_VAR_PLAN: &str = "
kind local
vars x
setvars Y
t 1
delta none
comp c vars x :: E z. (edge(x,z) & z in Y)
expr c
";

    fn labels_of<'b>(bundle: &'b LabelBundle, set: &BTreeSet<usize>) -> Vec<&'b [u8]> {
        set.iter().map(|&v| bundle.label(v)).collect()
    }

    #[test]
    fn single_variable_plan_reduces_to_one_piece() {
        let (g, _) = unit_interval(60, 1.0, 5);
        let plan = parse_plan(SINGLE_VAR_PLAN).unwrap();
        let (bundle, catalog) = build_local_scheme(&g, &plan, &CatalogLabeler, None).unwrap();
        let dec = LocalDecoder::new(&bundle, &catalog).unwrap();
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..100 {
            let a = rng.gen_range(0..g.n());
            let w: BTreeSet<usize> = (0..g.n()).filter(|_| rng.gen_bool(0.2)).collect();
            let got = dec.eval(&[bundle.label(a)], &[labels_of(&bundle, &w)]).unwrap();
            let want = eval_plan_oracle(&g, &plan, &[a], &[&w]).unwrap();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn unit_interval_two_var_plan_matches_oracle() {
        let plan = parse_plan(NEIGHBOR_IN_Y_PLAN).unwrap();
        let formula =
            parse_formula("(E z. (edge(x,z) & z in Y)) & (E z. (edge(y,z) & z in Y))").unwrap();
        let mut rng = StdRng::seed_from_u64(77);
        for seed in 0..5 {
            let (g, _) = unit_interval(50, 1.0, seed);
            // the plan really decomposes the formula
            let report = validate_plan(&plan, &formula, std::slice::from_ref(&g), 20, seed).unwrap();
            assert!(report.passed());
            let (bundle, catalog) =
                build_local_scheme(&g, &plan, &CatalogLabeler, None).unwrap();
            let dec = LocalDecoder::new(&bundle, &catalog).unwrap();
            for _ in 0..60 {
                let a = rng.gen_range(0..g.n());
                let b = rng.gen_range(0..g.n());
                let w: BTreeSet<usize> = (0..g.n()).filter(|_| rng.gen_bool(0.25)).collect();
                let got = dec
                    .eval(&[bundle.label(a), bundle.label(b)], &[labels_of(&bundle, &w)])
                    .unwrap();
                let want = crate::logic::eval_oracle(&g, &formula, &[a, b], &[&w]).unwrap();
                assert_eq!(got, want, "seed {seed} args ({a},{b})");
            }
        }
    }

    #[test]
    fn distance_type_recovery_matches_oracle() {
        let mut rng = StdRng::seed_from_u64(3);
        for seed in 0..6 {
            let g = bounded_degree(60, 4, seed);
            let plan = parse_plan(NEIGHBOR_IN_Y_PLAN).unwrap();
            let (bundle, catalog) =
                build_local_scheme(&g, &plan, &CatalogLabeler, None).unwrap();
            let dec = LocalDecoder::new(&bundle, &catalog).unwrap();
            for _ in 0..80 {
                let a = rng.gen_range(0..g.n());
                let b = rng.gen_range(0..g.n());
                let decoded = dec
                    .decode_distance_type(&[bundle.label(a), bundle.label(b)])
                    .unwrap();
                let direct = distance_type(&g, &[a, b], 1).unwrap();
                assert_eq!(decoded.edges, direct.edges, "args ({a},{b})");
            }
        }
    }

    #[test]
    fn equal_arguments_give_complete_type() {
        let (g, _) = unit_interval(40, 1.0, 2);
        let plan = parse_plan(NEIGHBOR_IN_Y_PLAN).unwrap();
        let (bundle, catalog) = build_local_scheme(&g, &plan, &CatalogLabeler, None).unwrap();
        let dec = LocalDecoder::new(&bundle, &catalog).unwrap();
        let delta = dec
            .decode_distance_type(&[bundle.label(7), bundle.label(7)])
            .unwrap();
        assert!(delta.has_edge(0, 1));
        assert_eq!(delta.components().len(), 1);
    }

    #[test]
    fn empty_sets_behave_like_no_set() {
        let (g, _) = unit_interval(40, 1.0, 9);
        let plan = parse_plan(NEIGHBOR_IN_Y_PLAN).unwrap();
        let (bundle, catalog) = build_local_scheme(&g, &plan, &CatalogLabeler, None).unwrap();
        let dec = LocalDecoder::new(&bundle, &catalog).unwrap();
        for a in [0, 5, 20] {
            let got = dec
                .eval(&[bundle.label(a), bundle.label(a)], &[Vec::new()])
                .unwrap();
            // no neighbor can be in an empty Y
            assert!(!got);
        }
    }

    #[test]
    fn interface_law_between_labelers() {
        // distance-expressible plan over forest pieces: both labelers agree
        let plan_text = "
kind local
vars x,y
t 1
delta none
comp far vars x :: x = x
expr !far
delta 1-2
comp near vars x,y :: dist(x,y)<=2
expr near
";
        let plan = parse_plan(plan_text).unwrap();
        let g = random_forest_union(50, 1, 20);
        let (b1, c1) = build_local_scheme(&g, &plan, &CatalogLabeler, None).unwrap();
        let (b2, c2) = build_local_scheme(&g, &plan, &CentroidLabeler, None).unwrap();
        let d1 = LocalDecoder::new(&b1, &c1).unwrap();
        let d2 = LocalDecoder::new(&b2, &c2).unwrap();
        let mut rng = StdRng::seed_from_u64(4);
        for _ in 0..120 {
            let a = rng.gen_range(0..g.n());
            let b = rng.gen_range(0..g.n());
            let r1 = d1.eval(&[b1.label(a), b1.label(b)], &[]).unwrap();
            let r2 = d2.eval(&[b2.label(a), b2.label(b)], &[]).unwrap();
            assert_eq!(r1, r2, "labelers disagree on ({a},{b})");
            let want = matches!(g.distance(a, b).unwrap(), Some(d) if d <= 2);
            assert_eq!(r1, want);
        }
        // centroid pieces carry no catalog sections beyond plan and meta
        assert_eq!(c2.section_names().count(), 2);
    }

    #[test]
    fn wrong_plan_kind_rejected() {
        let (g, _) = unit_interval(20, 1.0, 3);
        let plan = parse_plan("kind qf\nformula :: edge(x,y)").unwrap();
        assert!(matches!(
            build_local_scheme(&g, &plan, &CatalogLabeler, None),
            Err(SchemeError::PlanKindMismatch { .. })
        ));
    }

    #[test]
    fn undersized_cover_rejected() {
        let (g, _) = unit_interval(30, 1.0, 6);
        let plan = parse_plan(NEIGHBOR_IN_Y_PLAN).unwrap();
        // m=2, t=1 needs r = 6; offer an r=1 cover
        let cover = build_ball_cover(&g, 1).unwrap();
        assert!(matches!(
            build_local_scheme(&g, &plan, &CatalogLabeler, Some(cover)),
            Err(SchemeError::CoverDefect(_))
        ));
    }
}
