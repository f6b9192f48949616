//! FO queries without set arguments over a cover (scheme 0x04).
//!
//! The plan is a Boolean combination of t-local parts and basic
//! (t',s)-local sentences. Sentences are decided once at build time with
//! the checker from [`crate::cover::basic_local_check`] and stored as a bit
//! vector both in every label and in the catalog; local parts embed the
//! scheme-0x03 machinery per part over one shared cover.

use crate::codec::{read_varint, scheme_id, write_varint, Catalog, LabelBundle};
use crate::cover::{basic_local_check, build_ball_cover, validate_cover, Cover};
use crate::graph::{ColoredGraph, Vertex};
use crate::labeler::PieceLabeler;
use crate::logic::{
    print_plan, BoolComb, DeltaCase, GeneralLeaf, GeneralPlan, LocalPlan, PlanComponent,
    PlanError, QueryPlan,
};

use super::local::{
    build_cover_labeling, decode_entries, encode_vertex_entries, eval_local_from_labels,
    labeler_by_name, read_meta, read_plan, CoverMeta, PieceEntry,
};
use super::SchemeError;

fn require_general(plan: &QueryPlan) -> Result<&GeneralPlan, SchemeError> {
    match plan {
        QueryPlan::General(p) => Ok(p),
        other => Err(SchemeError::PlanKindMismatch {
            expected: "general",
            got: other.kind_name(),
        }),
    }
}

/// The per-delta decomposition a local part runs on: the declared one, or
/// the trivial single-case decomposition for one-variable parts.
fn part_deltas(part: &crate::logic::LocalPart) -> Result<Vec<DeltaCase>, SchemeError> {
    if !part.deltas.is_empty() {
        return Ok(part.deltas.clone());
    }
    if part.vars.len() <= 1 {
        return Ok(vec![DeltaCase {
            edges: Default::default(),
            components: vec![PlanComponent {
                name: part.name.clone(),
                vars: part.vars.clone(),
                formula: part.formula.clone(),
            }],
            expr: BoolComb::Leaf(0),
        }]);
    }
    Err(SchemeError::Plan(PlanError::Structure(format!(
        "local part {:?} has {} variables and needs a per-delta decomposition",
        part.name,
        part.vars.len()
    ))))
}

/// Builds labels for a general plan without set arguments. Sentence parts
/// are evaluated now; local parts share one cover of radius
/// `max_i m_i (2 t_i + 1)`.
pub fn build_fo_scheme_no_sets(
    graph: &ColoredGraph,
    plan: &QueryPlan,
    labeler: &dyn PieceLabeler,
    cover: Option<Cover>,
) -> Result<(LabelBundle, Catalog), SchemeError> {
    let general = require_general(plan)?;
    plan.validate()?;
    if !general.set_vars.is_empty() {
        return Err(SchemeError::UnsupportedQuery(
            "this scheme takes no set arguments; use the scattered scheme".into(),
        ));
    }
    for part in &general.locals {
        part_deltas(part)?;
    }

    // sentence truth bits, computed on the graph at build time
    let mut bits = vec![0u8; general.sentences.len().div_ceil(8)];
    for (i, s) in general.sentences.iter().enumerate() {
        if basic_local_check(graph, &s.psi, s.t, s.s)? {
            bits[i / 8] |= 1 << (i % 8);
        }
    }

    let r_max = general
        .locals
        .iter()
        .map(|p| p.vars.len() * (2 * p.t + 1))
        .max()
        .unwrap_or(0);
    let cover = match cover {
        Some(c) => c,
        None => build_ball_cover(graph, r_max.max(1))?,
    };
    if cover.r() < r_max {
        return Err(SchemeError::CoverDefect(format!(
            "cover has radius {}, plan needs {r_max}",
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
        t: 0,
        m: general.vars.len(),
        r: r_max,
        ell: cover.ell(),
        pieces: cover.pieces().len(),
        labeler: labeler.name().to_owned(),
    };
    let (labeling, sections) = build_cover_labeling(graph, cover, labeler)?;

    let mut labels = Vec::with_capacity(graph.n());
    for v in 0..graph.n() {
        let mut label = Vec::new();
        write_varint(&mut label, v as u64);
        write_varint(&mut label, general.locals.len() as u64);
        for part in &general.locals {
            let r_part = part.vars.len() * (2 * part.t + 1);
            let mut body = Vec::new();
            encode_vertex_entries(graph, &labeling, v, part.t, r_part, &mut body)?;
            write_varint(&mut label, body.len() as u64);
            label.extend_from_slice(&body);
        }
        write_varint(&mut label, general.sentences.len() as u64);
        label.extend_from_slice(&bits);
        labels.push(label);
    }

    let mut catalog = Catalog::new(scheme_id::GENERAL);
    for (name, bytes) in sections {
        catalog.insert(name, bytes)?;
    }
    catalog.insert("plan", print_plan(plan).into_bytes())?;
    catalog.insert("cover/meta", serde_json::to_vec(&meta).expect("meta serializes"))?;
    catalog.insert("bits/b", bits)?;
    let bundle = LabelBundle::new(scheme_id::GENERAL, labels)?;
    Ok((bundle, catalog))
}

struct ParsedGeneralLabel {
    id: Vertex,
    part_entries: Vec<Vec<PieceEntry>>,
    bits: Vec<u8>,
}

/// Pure decoder for scheme 0x04.
pub struct GeneralDecoder<'a> {
    catalog: &'a Catalog,
    labeler: Box<dyn PieceLabeler>,
    plan: GeneralPlan,
}

impl<'a> GeneralDecoder<'a> {
    pub fn new(bundle: &LabelBundle, catalog: &'a Catalog) -> Result<Self, SchemeError> {
        if bundle.scheme_id() != scheme_id::GENERAL {
            return Err(SchemeError::WrongScheme {
                expected: scheme_id::GENERAL,
                got: bundle.scheme_id(),
            });
        }
        let meta = read_meta(catalog, "cover/meta")?;
        let plan = match read_plan(catalog)? {
            QueryPlan::General(p) => p,
            other => {
                return Err(SchemeError::PlanKindMismatch {
                    expected: "general",
                    got: other.kind_name(),
                })
            }
        };
        let labeler = labeler_by_name(&meta.labeler)?;
        Ok(GeneralDecoder { catalog, labeler, plan })
    }

    fn parse_label(&self, bytes: &[u8]) -> Result<ParsedGeneralLabel, SchemeError> {
        let mut pos = 0;
        let id = read_varint(bytes, &mut pos)? as Vertex;
        let part_count = read_varint(bytes, &mut pos)? as usize;
        if part_count != self.plan.locals.len() {
            return Err(SchemeError::MalformedLabel(format!(
                "label has {part_count} local parts, plan has {}",
                self.plan.locals.len()
            )));
        }
        let mut part_entries = Vec::with_capacity(part_count);
        for _ in 0..part_count {
            let len = read_varint(bytes, &mut pos)? as usize;
            let end = pos
                .checked_add(len)
                .filter(|&e| e <= bytes.len())
                .ok_or_else(|| SchemeError::MalformedLabel("truncated part body".into()))?;
            let mut body_pos = pos;
            let entries = decode_entries(bytes, &mut body_pos)?;
            if body_pos != end {
                return Err(SchemeError::MalformedLabel("part body length mismatch".into()));
            }
            pos = end;
            part_entries.push(entries);
        }
        let h = read_varint(bytes, &mut pos)? as usize;
        let bit_bytes = h.div_ceil(8);
        if bytes.len() < pos + bit_bytes {
            return Err(SchemeError::MalformedLabel("truncated sentence bits".into()));
        }
        let bits = bytes[pos..pos + bit_bytes].to_vec();
        pos += bit_bytes;
        if pos != bytes.len() {
            return Err(SchemeError::MalformedLabel("trailing bytes".into()));
        }
        Ok(ParsedGeneralLabel { id, part_entries, bits })
    }

    fn sentence_bit(&self, parsed: &[ParsedGeneralLabel], idx: usize) -> Result<bool, SchemeError> {
        let bits: &[u8] = match parsed.first() {
            Some(label) => &label.bits,
            None => self
                .catalog
                .section("bits/b")
                .ok_or_else(|| SchemeError::MalformedLabel("catalog missing bits/b".into()))?,
        };
        let byte = bits
            .get(idx / 8)
            .ok_or_else(|| SchemeError::MalformedLabel("sentence bit out of range".into()))?;
        Ok(byte >> (idx % 8) & 1 == 1)
    }

    /// Answers the planned query from argument labels alone (the plan has
    /// no set arguments).
    pub fn eval(&self, arg_labels: &[&[u8]]) -> Result<bool, SchemeError> {
        if arg_labels.len() != self.plan.vars.len() {
            return Err(SchemeError::UnsupportedQuery(format!(
                "plan takes {} arguments, got {}",
                self.plan.vars.len(),
                arg_labels.len()
            )));
        }
        let parsed: Vec<ParsedGeneralLabel> = arg_labels
            .iter()
            .map(|bytes| self.parse_label(bytes))
            .collect::<Result<_, _>>()?;
        let result = self.plan.expr.try_eval(&mut |leaf: &GeneralLeaf| match *leaf {
            GeneralLeaf::Sentence(i) => self.sentence_bit(&parsed, i),
            GeneralLeaf::Local(i) => {
                let part = &self.plan.locals[i];
                let as_local = LocalPlan {
                    t: part.t,
                    vars: part.vars.clone(),
                    set_vars: Vec::new(),
                    deltas: part_deltas(part)?,
                };
                // restrict the argument tuple to the part's variables
                let tuple: Vec<(Vertex, Vec<PieceEntry>)> = part
                    .vars
                    .iter()
                    .map(|name| {
                        let pos = self
                            .plan
                            .vars
                            .iter()
                            .position(|v| v == name)
                            .expect("validated: part vars are plan vars");
                        (parsed[pos].id, parsed[pos].part_entries[i].clone())
                    })
                    .collect();
                eval_local_from_labels(self.catalog, self.labeler.as_ref(), &as_local, &tuple, &[])
            }
        })?;
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::bounded_degree;
    use crate::labeler::CatalogLabeler;
    use crate::logic::{eval_oracle, eval_plan_oracle, parse_plan};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    const SENTENCES_ONLY: &str = "
kind general
vars none
sentence s1 t 1 s 2 :: E z. edge(x,z)
sentence s2 t 0 s 4 :: x = x
expr s1 & s2
";

    // x has a neighbor, and somewhere two scattered vertices of degree >= 2
    const MIXED_PLAN: &str = "
kind general
vars x
local loc t 1 vars x :: E z. edge(x,z)
end
sentence far_pair t 1 s 2 :: E u. E v. (edge(x,u) & edge(x,v) & !(u = v))
expr loc & far_pair
";

    #[test]
    fn sentence_only_plan_is_a_bit_lookup() {
        let plan = parse_plan(SENTENCES_ONLY).unwrap();
        for seed in 0..8 {
            let g = bounded_degree(40, 3, seed);
            let (bundle, catalog) =
                build_fo_scheme_no_sets(&g, &plan, &CatalogLabeler, None).unwrap();
            let dec = GeneralDecoder::new(&bundle, &catalog).unwrap();
            let want = eval_plan_oracle(&g, &plan, &[], &[]).unwrap();
            // with no argument labels the bits come from the catalog
            assert_eq!(dec.eval(&[]).unwrap(), want);
            // and from any label when arguments exist
            let plan2 = parse_plan(MIXED_PLAN).unwrap();
            let (b2, c2) = build_fo_scheme_no_sets(&g, &plan2, &CatalogLabeler, None).unwrap();
            let dec2 = GeneralDecoder::new(&b2, &c2).unwrap();
            for a in 0..g.n() {
                let got = dec2.eval(&[b2.label(a)]).unwrap();
                let want = eval_plan_oracle(&g, &plan2, &[a], &[]).unwrap();
                assert_eq!(got, want, "seed {seed} vertex {a}");
            }
        }
    }

    #[test]
    fn mixed_plan_matches_full_formula_oracle() {
        // the equivalent plain formula, evaluated directly
        let formula_text = "(E z. edge(x,z)) & (E a. E b. (dist(a,b)>2 \
            & (E u. E v. (edge(a,u) & edge(a,v) & !(u = v))) \
            & (E u. E v. (edge(b,u) & edge(b,v) & !(u = v)))))";
        let formula = crate::logic::parse_formula(formula_text).unwrap();
        let plan_text = "
kind general
vars x
local loc t 1 vars x :: E z. edge(x,z)
end
sentence deg2_pair t 1 s 2 :: E u. E v. (edge(x,u) & edge(x,v) & !(u = v))
expr loc & deg2_pair
";
        let plan = parse_plan(plan_text).unwrap();
        let mut rng = StdRng::seed_from_u64(11);
        let mut checked = 0;
        for seed in 0..25 {
            let g = bounded_degree(30, 4, 100 + seed);
            let (bundle, catalog) =
                build_fo_scheme_no_sets(&g, &plan, &CatalogLabeler, None).unwrap();
            let dec = GeneralDecoder::new(&bundle, &catalog).unwrap();
            for _ in 0..8 {
                let a = rng.gen_range(0..g.n());
                let got = dec.eval(&[bundle.label(a)]).unwrap();
                let want = eval_oracle(&g, &formula, &[a], &[]).unwrap();
                assert_eq!(got, want, "seed {seed} vertex {a}");
                checked += 1;
            }
        }
        assert!(checked >= 200);
    }

    #[test]
    fn two_variable_local_part_with_deltas() {
        let plan_text = "
kind general
vars x,y
local near t 1 vars x,y :: dist(x,y)<=3
delta none
comp no vars x :: !(x = x)
expr no
delta 1-2
comp yes vars x,y :: dist(x,y)<=3
expr yes
end
expr near
";
        let plan = parse_plan(plan_text).unwrap();
        let mut rng = StdRng::seed_from_u64(9);
        for seed in 0..5 {
            let g = bounded_degree(40, 3, seed);
            let (bundle, catalog) =
                build_fo_scheme_no_sets(&g, &plan, &CatalogLabeler, None).unwrap();
            let dec = GeneralDecoder::new(&bundle, &catalog).unwrap();
            for _ in 0..60 {
                let a = rng.gen_range(0..g.n());
                let b = rng.gen_range(0..g.n());
                let got = dec.eval(&[bundle.label(a), bundle.label(b)]).unwrap();
                let want = matches!(g.distance(a, b).unwrap(), Some(d) if d <= 3);
                assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn multi_variable_part_without_deltas_rejected() {
        let plan_text = "
kind general
vars x,y
local broken t 1 vars x,y :: dist(x,y)<=3
end
expr broken
";
        let plan = parse_plan(plan_text).unwrap();
        let g = bounded_degree(10, 2, 1);
        assert!(matches!(
            build_fo_scheme_no_sets(&g, &plan, &CatalogLabeler, None),
            Err(SchemeError::Plan(PlanError::Structure(_)))
        ));
    }

    #[test]
    fn set_arguments_rejected() {
        let plan_text = "
kind general
vars x
setvars Y
local loc t 1 vars x :: E z. (edge(x,z) & z in Y)
end
expr loc
";
        let plan = parse_plan(plan_text).unwrap();
        let g = bounded_degree(10, 2, 1);
        assert!(matches!(
            build_fo_scheme_no_sets(&g, &plan, &CatalogLabeler, None),
            Err(SchemeError::UnsupportedQuery(_))
        ));
    }

    #[test]
    fn corrupted_catalog_detected_by_checksum() {
        let plan = parse_plan(SENTENCES_ONLY).unwrap();
        let g = bounded_degree(20, 3, 2);
        let (_, catalog) = build_fo_scheme_no_sets(&g, &plan, &CatalogLabeler, None).unwrap();
        let mut bytes = catalog.to_bytes();
        // flip one bit inside the sentence-bit section payload
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x01;
        assert!(matches!(
            Catalog::from_bytes(&bytes),
            Err(crate::codec::CodecError::ChecksumMismatch { .. })
        ));
    }
}
