//! Quantifier-free queries from adjacency labels (scheme 0x01).
//!
//! Labels store the degeneracy-oriented out-list of each vertex plus its
//! vertex-color bitvector; any quantifier-free query is answered by
//! reconstructing the induced substructure on the mentioned vertices. The
//! catalog is empty: this scheme is fully label-pure.
//!
//! The scheme is *correct* on every graph and *compact* on sparse ones:
//! label bits stay within
//! `8 * (varbytes(n) * (1 + E) + 4 + ceil(|C1|/8))` where `E` is the
//! vertex's out-entry count (at most `2 * |C2| * degeneracy`), asserted at
//! build time. Quantified formulas and `dist` atoms are rejected rather
//! than wrongly answered.

use std::collections::{BTreeMap, BTreeSet};

use crate::codec::{read_varint, scheme_id, varbytes, write_varint, Catalog, LabelBundle};
use crate::graph::{ColoredGraph, EColor, VColor, Vertex};
use crate::logic::{eval_oracle, Formula};

use super::SchemeError;

/// Parsed form of one label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArboricityLabel {
    pub id: Vertex,
    /// edge color space: colors are `0..color_space`
    pub color_space: u64,
    /// vertex colors as a bitvector over `0..c1_size`
    pub c1_size: usize,
    pub color_bits: Vec<u8>,
    /// out entries `(neighbor, color, toward_neighbor)`
    pub entries: Vec<(Vertex, EColor, bool)>,
}

impl ArboricityLabel {
    pub fn has_color(&self, c: VColor) -> bool {
        let i = c.0 as usize;
        i < self.c1_size && self.color_bits[i / 8] >> (i % 8) & 1 == 1
    }

    pub fn colors(&self) -> impl Iterator<Item = VColor> + '_ {
        (0..self.c1_size)
            .filter(|&i| self.color_bits[i / 8] >> (i % 8) & 1 == 1)
            .map(|i| VColor(i as u16))
    }
}

fn bytelen_256(value: u64) -> usize {
    std::cmp::max(1, (64 - value.leading_zeros() as usize).div_ceil(8))
}

/// Builds the label bundle; the catalog is empty by construction.
pub fn build(graph: &ColoredGraph) -> Result<(LabelBundle, Catalog), SchemeError> {
    let orientation = graph.degeneracy_orientation();
    let n = graph.n();
    let color_space = graph
        .edge_palette()
        .iter()
        .map(|c| u64::from(c.0) + 1)
        .max()
        .unwrap_or(1);
    let c1_size = graph
        .vertex_palette()
        .iter()
        .map(|c| usize::from(c.0) + 1)
        .max()
        .unwrap_or(0);
    // fixed entry width: enough bytes for the largest packed entry
    let max_packed = if n == 0 { 1 } else { ((n as u64 - 1) * color_space + (color_space - 1)) * 2 + 1 };
    let width = bytelen_256(max_packed);

    let mut labels = Vec::with_capacity(n);
    for v in 0..n {
        let mut label = Vec::new();
        write_varint(&mut label, v as u64);
        write_varint(&mut label, color_space);
        write_varint(&mut label, c1_size as u64);
        let mut bits = vec![0u8; c1_size.div_ceil(8)];
        for c in graph.vertex_colors(v) {
            let i = c.0 as usize;
            bits[i / 8] |= 1 << (i % 8);
        }
        label.extend_from_slice(&bits);
        let entries = orientation.out_list(v);
        write_varint(&mut label, entries.len() as u64);
        label.push(width as u8);
        for e in entries {
            let packed = (e.neighbor as u64 * color_space + u64::from(e.color.0)) * 2
                + u64::from(!e.toward_neighbor);
            label.extend_from_slice(&packed.to_le_bytes()[..width]);
        }
        // documented size budget, checked on every build
        let budget = varbytes(n) * (1 + entries.len()) + 4 + c1_size.div_ceil(8);
        assert!(
            label.len() <= budget,
            "label for {v} is {} bytes, budget {budget}",
            label.len()
        );
        labels.push(label);
    }
    let bundle = LabelBundle::new(scheme_id::ARBORICITY, labels)?;
    Ok((bundle, Catalog::new(scheme_id::ARBORICITY)))
}

pub fn parse_label(bytes: &[u8]) -> Result<ArboricityLabel, SchemeError> {
    let mut pos = 0;
    let id = read_varint(bytes, &mut pos)? as Vertex;
    let color_space = read_varint(bytes, &mut pos)?;
    if color_space == 0 {
        return Err(SchemeError::MalformedLabel("zero color space".into()));
    }
    let c1_size = read_varint(bytes, &mut pos)? as usize;
    let bit_bytes = c1_size.div_ceil(8);
    if bytes.len() < pos + bit_bytes {
        return Err(SchemeError::MalformedLabel("truncated color bitvector".into()));
    }
    let color_bits = bytes[pos..pos + bit_bytes].to_vec();
    pos += bit_bytes;
    let count = read_varint(bytes, &mut pos)? as usize;
    let width = *bytes
        .get(pos)
        .ok_or_else(|| SchemeError::MalformedLabel("missing entry width".into()))?
        as usize;
    pos += 1;
    if width == 0 || width > 8 {
        return Err(SchemeError::MalformedLabel(format!("bad entry width {width}")));
    }
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        if bytes.len() < pos + width {
            return Err(SchemeError::MalformedLabel("truncated entries".into()));
        }
        let mut raw = [0u8; 8];
        raw[..width].copy_from_slice(&bytes[pos..pos + width]);
        pos += width;
        let packed = u64::from_le_bytes(raw);
        let toward_neighbor = packed & 1 == 0;
        let rest = packed >> 1;
        let neighbor = (rest / color_space) as Vertex;
        let color = EColor((rest % color_space) as u16);
        entries.push((neighbor, color, toward_neighbor));
    }
    if pos != bytes.len() {
        return Err(SchemeError::MalformedLabel("trailing bytes".into()));
    }
    Ok(ArboricityLabel { id, color_space, c1_size, color_bits, entries })
}

/// Decode-side statistics; `pair_checks` counts the substructure
/// reconstruction work, bounded by `(|args| + |W|)^2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DecodeStats {
    pub pair_checks: usize,
}

/// Pure decoder over an arboricity bundle: holds nothing but the scheme id
/// check; all inputs arrive as labels.
pub struct ArboricityDecoder;

impl ArboricityDecoder {
    pub fn for_bundle(bundle: &LabelBundle) -> Result<Self, SchemeError> {
        if bundle.scheme_id() != scheme_id::ARBORICITY {
            return Err(SchemeError::WrongScheme {
                expected: scheme_id::ARBORICITY,
                got: bundle.scheme_id(),
            });
        }
        Ok(ArboricityDecoder)
    }

    /// Answers a quantifier-free query from argument labels and set label
    /// families alone.
    pub fn decode_eval(
        &self,
        formula: &Formula,
        arg_labels: &[&[u8]],
        set_label_sets: &[Vec<&[u8]>],
    ) -> Result<bool, SchemeError> {
        self.decode_eval_with_stats(formula, arg_labels, set_label_sets).map(|(b, _)| b)
    }

    pub fn decode_eval_with_stats(
        &self,
        formula: &Formula,
        arg_labels: &[&[u8]],
        set_label_sets: &[Vec<&[u8]>],
    ) -> Result<(bool, DecodeStats), SchemeError> {
        if !formula.is_quantifier_free() {
            return Err(SchemeError::UnsupportedQuery(
                "arboricity labels answer quantifier-free queries only".into(),
            ));
        }
        if formula.uses_dist() {
            return Err(SchemeError::UnsupportedQuery(
                "dist atoms are not quantifier-free over the edge relations".into(),
            ));
        }
        let mut stats = DecodeStats::default();

        // gather the mentioned universe: arguments then set members
        let mut universe: BTreeMap<Vertex, ArboricityLabel> = BTreeMap::new();
        let mut arg_ids = Vec::with_capacity(arg_labels.len());
        for bytes in arg_labels {
            let label = parse_label(bytes)?;
            arg_ids.push(label.id);
            universe.entry(label.id).or_insert(label);
        }
        let mut set_ids: Vec<Vec<Vertex>> = Vec::with_capacity(set_label_sets.len());
        for family in set_label_sets {
            let mut ids = Vec::with_capacity(family.len());
            for bytes in family {
                let label = parse_label(bytes)?;
                ids.push(label.id);
                universe.entry(label.id).or_insert(label);
            }
            set_ids.push(ids);
        }

        // reconstruct the induced substructure on the mentioned vertices
        let ids: Vec<Vertex> = universe.keys().copied().collect();
        let local: BTreeMap<Vertex, usize> =
            ids.iter().enumerate().map(|(l, &g)| (g, l)).collect();
        let mut edges: BTreeSet<(usize, usize, EColor)> = BTreeSet::new();
        for (&u, label) in &universe {
            for &(neighbor, color, toward) in &label.entries {
                stats.pair_checks += 1;
                if let Some(&ln) = local.get(&neighbor) {
                    let lu = local[&u];
                    if toward {
                        edges.insert((lu, ln, color));
                    } else {
                        edges.insert((ln, lu, color));
                    }
                }
            }
        }
        let colors: Vec<(usize, VColor)> = universe
            .values()
            .flat_map(|label| {
                let l = local[&label.id];
                label.colors().map(move |c| (l, c)).collect::<Vec<_>>()
            })
            .collect();
        let substructure = ColoredGraph::new(ids.len(), colors, edges)
            .map_err(SchemeError::Graph)?;

        let args: Vec<usize> = arg_ids.iter().map(|v| local[v]).collect();
        let sets: Vec<BTreeSet<usize>> = set_ids
            .iter()
            .map(|ids| ids.iter().map(|v| local[v]).collect())
            .collect();
        let set_refs: Vec<&BTreeSet<usize>> = sets.iter().collect();
        stats.pair_checks += ids.len() * ids.len();
        let truth = eval_oracle(&substructure, formula, &args, &set_refs)?;
        Ok((truth, stats))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{random_forest_union, random_gnp, subdivided_clique};
    use crate::graph::complete_graph;
    use crate::logic::{parse_formula, random_qf_formula};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn forest_labels_have_at_most_one_entry() {
        // single-direction forest edges, 1-degenerate
        let forest = random_forest_union(40, 1, 3);
        let (bundle, catalog) = build(&forest).unwrap();
        assert!(catalog.is_empty());
        assert_eq!(catalog.payload_bytes(), 0);
        for v in 0..forest.n() {
            let label = parse_label(bundle.label(v)).unwrap();
            assert!(label.entries.len() <= 1, "vertex {v}");
        }
    }

    #[test]
    fn subdivided_clique_labels_stay_small() {
        let g = subdivided_clique(12); // 78 subdivision vertices
        let (bundle, _) = build(&g).unwrap();
        for v in 0..g.n() {
            let label = parse_label(bundle.label(v)).unwrap();
            let distinct: BTreeSet<Vertex> =
                label.entries.iter().map(|&(w, _, _)| w).collect();
            assert!(distinct.len() <= 3, "out-degree {} at {v}", distinct.len());
        }
    }

    #[test]
    fn adjacency_reconstruction_matches_oracle() {
        let mut rng = StdRng::seed_from_u64(5);
        let g = random_gnp(40, 0.15, 17);
        let (bundle, _) = build(&g).unwrap();
        let dec = ArboricityDecoder::for_bundle(&bundle).unwrap();
        let f = parse_formula("edge(x,y)").unwrap();
        for _ in 0..1000 {
            let a = rng.gen_range(0..40);
            let b = rng.gen_range(0..40);
            let got = dec
                .decode_eval(&f, &[bundle.label(a), bundle.label(b)], &[])
                .unwrap();
            assert_eq!(got, g.has_edge(a, b, EColor(0)), "pair ({a},{b})");
        }
    }

    #[test]
    fn membership_and_colors() {
        let g = random_forest_union(30, 2, 9);
        let (bundle, _) = build(&g).unwrap();
        let dec = ArboricityDecoder::for_bundle(&bundle).unwrap();
        let f = parse_formula("x in Y").unwrap();
        let w: Vec<usize> = vec![3, 7, 20];
        let w_labels: Vec<&[u8]> = w.iter().map(|&v| bundle.label(v)).collect();
        assert!(dec.decode_eval(&f, &[bundle.label(7)], &[w_labels.clone()]).unwrap());
        assert!(!dec.decode_eval(&f, &[bundle.label(8)], &[w_labels]).unwrap());

        let f = parse_formula("col[1](x)").unwrap();
        for v in 0..30 {
            let got = dec.decode_eval(&f, &[bundle.label(v)], &[]).unwrap();
            assert_eq!(got, g.has_vertex_color(v, VColor(1)));
        }
    }

    #[test]
    fn quantified_queries_rejected() {
        let g = subdivided_clique(6);
        let (bundle, _) = build(&g).unwrap();
        let dec = ArboricityDecoder::for_bundle(&bundle).unwrap();
        let phi0 = crate::logic::common_neighbor_formula();
        let err = dec.decode_eval(&phi0, &[bundle.label(0), bundle.label(1)], &[]);
        assert!(matches!(err, Err(SchemeError::UnsupportedQuery(_))));
        let dist = parse_formula("dist(x,y)<=2").unwrap();
        assert!(matches!(
            dec.decode_eval(&dist, &[bundle.label(0), bundle.label(1)], &[]),
            Err(SchemeError::UnsupportedQuery(_))
        ));
    }

    #[test]
    fn random_qf_formulas_match_oracle() {
        let mut rng = StdRng::seed_from_u64(2025);
        for round in 0..40 {
            let g = if round % 2 == 0 {
                random_forest_union(25, 2, round)
            } else {
                random_gnp(20, 0.2, round)
            };
            let (bundle, _) = build(&g).unwrap();
            let dec = ArboricityDecoder::for_bundle(&bundle).unwrap();
            let f = random_qf_formula(
                &mut rng,
                &["x", "y"],
                &["Y"],
                &[EColor(0)],
                &[VColor(0), VColor(1)],
            );
            for _ in 0..10 {
                let a = rng.gen_range(0..g.n());
                let b = rng.gen_range(0..g.n());
                let w: BTreeSet<usize> = (0..g.n()).filter(|_| rng.gen_bool(0.2)).collect();
                let expected = eval_oracle(&g, &f, &[a, b], &[&w]).unwrap();
                let w_labels: Vec<&[u8]> = w.iter().map(|&v| bundle.label(v)).collect();
                let got = dec
                    .decode_eval(&f, &[bundle.label(a), bundle.label(b)], &[w_labels])
                    .unwrap();
                assert_eq!(got, expected);
            }
        }
    }

    #[test]
    fn ops_bounded_by_square_of_mentioned() {
        let g = complete_graph(30);
        let (bundle, _) = build(&g).unwrap();
        let dec = ArboricityDecoder::for_bundle(&bundle).unwrap();
        let f = parse_formula("edge(x,y) | x in Y").unwrap();
        let w: Vec<usize> = (0..10).collect();
        let w_labels: Vec<&[u8]> = w.iter().map(|&v| bundle.label(v)).collect();
        let (_, stats) = dec
            .decode_eval_with_stats(&f, &[bundle.label(0), bundle.label(15)], &[w_labels])
            .unwrap();
        let k = 2 + w.len();
        // each mentioned vertex contributes its entries (<= degeneracy bound
        // = k for a clique... entries per vertex <= n) plus the k^2 pair scan
        assert!(stats.pair_checks <= k * k + k * g.n());
    }

    #[test]
    fn directed_multicolor_round_trip() {
        // orientation-preserving: directed colored edges decode exactly
        let g = ColoredGraph::new(
            5,
            [(0, VColor(2))],
            [
                (0, 1, EColor(0)),
                (1, 0, EColor(3)),
                (2, 3, EColor(1)),
                (4, 4, EColor(0)),
            ],
        )
        .unwrap();
        let (bundle, _) = build(&g).unwrap();
        let dec = ArboricityDecoder::for_bundle(&bundle).unwrap();
        for c in 0..4u16 {
            for a in 0..5 {
                for b in 0..5 {
                    let f = Formula::Edge(EColor(c), "x".into(), "y".into());
                    let got = dec
                        .decode_eval(&f, &[bundle.label(a), bundle.label(b)], &[])
                        .unwrap();
                    assert_eq!(got, g.has_edge(a, b, EColor(c)), "({a},{b},{c})");
                }
            }
        }
    }
}
