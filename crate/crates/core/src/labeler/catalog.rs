//! Catalog-backed general-FO piece oracle.
//!
//! The sublabel is just `(piece id, local id)`; the piece subgraph itself is
//! serialized into the catalog under `piece/<id>` and queries run the
//! brute-force oracle on the decoded piece. This trades the per-formula
//! label machinery for shared catalog bytes, which every report accounts
//! separately.

use std::collections::BTreeSet;

use crate::codec::{read_varint, write_varint, Catalog};
use crate::graph::{ColoredGraph, Vertex};
use crate::logic::{count_oracle, eval_oracle, Formula};

use super::{LabelerError, PieceBuild, PieceLabeler};

pub struct CatalogLabeler;

pub(crate) fn piece_section_name(piece_id: u64) -> String {
    format!("piece/{piece_id}")
}

fn parse_sublabel(bytes: &[u8]) -> Result<(u64, usize), LabelerError> {
    let mut pos = 0;
    let piece = read_varint(bytes, &mut pos)?;
    let local = read_varint(bytes, &mut pos)? as usize;
    if pos != bytes.len() {
        return Err(LabelerError::Malformed("trailing bytes in catalog sublabel".into()));
    }
    Ok((piece, local))
}

fn load_piece(catalog: &Catalog, piece_id: u64) -> Result<ColoredGraph, LabelerError> {
    let name = piece_section_name(piece_id);
    let bytes = catalog
        .section(&name)
        .ok_or(LabelerError::MissingSection(name))?;
    Ok(ColoredGraph::from_binary(bytes)?)
}

/// Set sublabels clipped to the target piece and mapped to local ids.
fn clip_sets(
    sets: &[Vec<Vec<u8>>],
    piece_id: u64,
) -> Result<Vec<BTreeSet<Vertex>>, LabelerError> {
    sets.iter()
        .map(|labels| {
            let mut local = BTreeSet::new();
            for bytes in labels {
                let (pid, l) = parse_sublabel(bytes)?;
                if pid == piece_id {
                    local.insert(l);
                }
            }
            Ok(local)
        })
        .collect()
}

impl PieceLabeler for CatalogLabeler {
    fn name(&self) -> &'static str {
        "catalog"
    }

    fn build(
        &self,
        piece_id: u64,
        piece: &ColoredGraph,
        _local_to_global: &[Vertex],
    ) -> Result<PieceBuild, LabelerError> {
        if piece.n() == 0 {
            return Err(LabelerError::EmptyPiece);
        }
        let sublabels = (0..piece.n())
            .map(|v| {
                let mut out = Vec::new();
                write_varint(&mut out, piece_id);
                write_varint(&mut out, v as u64);
                out
            })
            .collect();
        let sections = vec![(piece_section_name(piece_id), piece.to_binary())];
        Ok(PieceBuild { sublabels, sections })
    }

    fn dist(&self, catalog: &Catalog, a: &[u8], b: &[u8]) -> Result<Option<u64>, LabelerError> {
        let (pa, la) = parse_sublabel(a)?;
        let (pb, lb) = parse_sublabel(b)?;
        if pa != pb {
            return Err(LabelerError::WrongPiece { expected: pa, got: pb });
        }
        let piece = load_piece(catalog, pa)?;
        Ok(piece.distance(la, lb)?.map(|d| d as u64))
    }

    fn eval(
        &self,
        catalog: &Catalog,
        piece_id: u64,
        formula: &Formula,
        args: &[&[u8]],
        sets: &[Vec<Vec<u8>>],
    ) -> Result<bool, LabelerError> {
        let piece = load_piece(catalog, piece_id)?;
        let mut locals = Vec::with_capacity(args.len());
        for bytes in args {
            let (pid, local) = parse_sublabel(bytes)?;
            if pid != piece_id {
                return Err(LabelerError::WrongPiece { expected: piece_id, got: pid });
            }
            locals.push(local);
        }
        let clipped = clip_sets(sets, piece_id)?;
        let refs: Vec<&BTreeSet<Vertex>> = clipped.iter().collect();
        Ok(eval_oracle(&piece, formula, &locals, &refs)?)
    }

    fn count(
        &self,
        catalog: &Catalog,
        piece_id: u64,
        formula: &Formula,
        sets: &[Vec<Vec<u8>>],
        modulus: Option<u64>,
    ) -> Result<u64, LabelerError> {
        let piece = load_piece(catalog, piece_id)?;
        let clipped = clip_sets(sets, piece_id)?;
        let refs: Vec<&BTreeSet<Vertex>> = clipped.iter().collect();
        let count = count_oracle(&piece, formula, &refs)?;
        Ok(match modulus {
            Some(s) => count % s,
            None => count,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::random_gnp;
    use crate::graph::complete_graph;
    use crate::logic::parse_formula;

    fn build_with_catalog(piece_id: u64, piece: &ColoredGraph) -> (PieceBuild, Catalog) {
        let ids: Vec<usize> = (0..piece.n()).collect();
        let built = CatalogLabeler.build(piece_id, piece, &ids).unwrap();
        let mut catalog = Catalog::new(0x00);
        for (name, bytes) in &built.sections {
            catalog.insert(name.clone(), bytes.clone()).unwrap();
        }
        (built, catalog)
    }

    #[test]
    fn piece_round_trips_through_catalog() {
        let k3 = complete_graph(3);
        let (_, catalog) = build_with_catalog(4, &k3);
        let back = load_piece(&catalog, 4).unwrap();
        assert_eq!(back, k3);

        for seed in 0..100 {
            let g = random_gnp(8, 0.3, seed);
            let (_, catalog) = build_with_catalog(seed, &g);
            assert_eq!(load_piece(&catalog, seed).unwrap(), g);
        }
    }

    #[test]
    fn empty_piece_rejected() {
        let empty = ColoredGraph::new(0, [], []).unwrap();
        assert!(matches!(
            CatalogLabeler.build(0, &empty, &[]),
            Err(LabelerError::EmptyPiece)
        ));
    }

    #[test]
    fn eval_matches_direct_oracle_on_piece() {
        let one = ColoredGraph::new(1, [], []).unwrap();
        let (built, catalog) = build_with_catalog(0, &one);
        let f = parse_formula("x = x").unwrap();
        assert!(CatalogLabeler.eval(&catalog, 0, &f, &[&built.sublabels[0]], &[]).unwrap());

        let g = random_gnp(10, 0.35, 77);
        let (built, catalog) = build_with_catalog(1, &g);
        let f = parse_formula("E z. (edge(x,z) & z in Y)").unwrap();
        for a in 0..10 {
            let w: BTreeSet<usize> = [0, 3, 7].into();
            let w_labels: Vec<Vec<u8>> = w.iter().map(|&v| built.sublabels[v].clone()).collect();
            let got = CatalogLabeler
                .eval(&catalog, 1, &f, &[&built.sublabels[a]], &[w_labels.clone()])
                .unwrap();
            let want = eval_oracle(&g, &f, &[a], &[&w]).unwrap();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn cross_piece_arguments_error_and_sets_clip() {
        let g1 = random_gnp(6, 0.4, 1);
        let g2 = random_gnp(6, 0.4, 2);
        let ids: Vec<usize> = (0..6).collect();
        let b1 = CatalogLabeler.build(1, &g1, &ids).unwrap();
        let b2 = CatalogLabeler.build(2, &g2, &ids).unwrap();
        let mut catalog = Catalog::new(0x00);
        for (name, bytes) in b1.sections.iter().chain(b2.sections.iter()) {
            catalog.insert(name.clone(), bytes.clone()).unwrap();
        }
        let f = parse_formula("x = x").unwrap();
        assert!(matches!(
            CatalogLabeler.eval(&catalog, 1, &f, &[&b2.sublabels[0]], &[]),
            Err(LabelerError::WrongPiece { expected: 1, got: 2 })
        ));
        // set entries from the other piece are clipped away
        let f = parse_formula("E z. z in Y").unwrap();
        let foreign: Vec<Vec<u8>> = b2.sublabels.clone();
        assert!(!CatalogLabeler.eval(&catalog, 1, &f, &[], &[foreign]).unwrap());
    }

    #[test]
    fn count_matches_oracle_with_modulus() {
        let g = random_gnp(7, 0.4, 9);
        let (_, catalog) = build_with_catalog(3, &g);
        let f = parse_formula("edge(x,y)").unwrap();
        let direct = crate::logic::count_oracle(&g, &f, &[]).unwrap();
        assert_eq!(CatalogLabeler.count(&catalog, 3, &f, &[], None).unwrap(), direct);
        assert_eq!(CatalogLabeler.count(&catalog, 3, &f, &[], Some(5)).unwrap(), direct % 5);
    }
}
