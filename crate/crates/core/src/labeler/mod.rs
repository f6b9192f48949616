//! Per-piece labelers: the pluggable unit the cover and partition schemes
//! delegate to.
//!
//! A [`PieceLabeler`] builds one sublabel per piece vertex (plus optional
//! catalog sections) and later answers distance, truth and counting queries
//! from sublabels and catalog alone. Two implementations ship:
//!
//! * [`CentroidLabeler`] — label-pure exact distances on forest pieces; no
//!   catalog sections at all.
//! * [`CatalogLabeler`] — stores each piece subgraph in the catalog and
//!   answers arbitrary FO queries by running the oracle on the decoded
//!   piece. Sublabels stay `O(log n)`; the piece bytes are accounted to the
//!   catalog, never to labels.

mod catalog;
mod centroid;

pub use catalog::CatalogLabeler;
pub use centroid::{
    centroid_decompose, centroid_dist, CentroidEntry, CentroidLabeler, CentroidList,
};

use thiserror::Error;

use crate::codec::{Catalog, CodecError};
use crate::graph::{ColoredGraph, GraphError, Vertex};
use crate::logic::{Formula, LogicError};

#[derive(Debug, Error)]
pub enum LabelerError {
    #[error("unsupported query: {0}")]
    UnsupportedQuery(String),
    #[error("sublabel belongs to piece {got}, expected piece {expected}")]
    WrongPiece { expected: u64, got: u64 },
    #[error("empty piece rejected")]
    EmptyPiece,
    #[error("piece is not a forest")]
    CyclicPiece,
    #[error("catalog section {0:?} missing")]
    MissingSection(String),
    #[error("malformed sublabel: {0}")]
    Malformed(String),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Output of building one piece: a sublabel per local vertex plus catalog
/// sections keyed by name.
#[derive(Debug, Clone)]
pub struct PieceBuild {
    pub sublabels: Vec<Vec<u8>>,
    pub sections: Vec<(String, Vec<u8>)>,
}

/// Builder/answerer pair for one piece of a cover or partition.
///
/// Answer calls depend only on their declared inputs (sublabels, catalog);
/// implementations hold no reference to the source graph.
pub trait PieceLabeler {
    fn name(&self) -> &'static str;

    /// Labels the piece. `local_to_global[v]` is the graph-level id of the
    /// piece vertex `v`; sublabels are indexed by local id.
    fn build(
        &self,
        piece_id: u64,
        piece: &ColoredGraph,
        local_to_global: &[Vertex],
    ) -> Result<PieceBuild, LabelerError>;

    /// Undirected distance inside the piece both sublabels belong to
    /// (`None` = unreachable). Errors if the sublabels name different
    /// pieces.
    fn dist(&self, catalog: &Catalog, a: &[u8], b: &[u8]) -> Result<Option<u64>, LabelerError>;

    /// Truth of `formula` evaluated inside piece `piece_id`. FO arguments
    /// bind positionally to the formula's free FO variables and must carry
    /// sublabels of that piece; set sublabels from other pieces are clipped
    /// away.
    fn eval(
        &self,
        catalog: &Catalog,
        piece_id: u64,
        formula: &Formula,
        args: &[&[u8]],
        sets: &[Vec<Vec<u8>>],
    ) -> Result<bool, LabelerError>;

    /// Number of tuples satisfying `formula` inside piece `piece_id`
    /// (reduced modulo `modulus` when given).
    fn count(
        &self,
        catalog: &Catalog,
        piece_id: u64,
        formula: &Formula,
        sets: &[Vec<Vec<u8>>],
        modulus: Option<u64>,
    ) -> Result<u64, LabelerError>;
}

/// Which shipped labeler to use; the CLI and harness select by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LabelerKind {
    Centroid,
    Catalog,
}

impl LabelerKind {
    pub fn instantiate(self) -> Box<dyn PieceLabeler> {
        match self {
            LabelerKind::Centroid => Box::new(CentroidLabeler),
            LabelerKind::Catalog => Box::new(CatalogLabeler),
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "centroid" => Some(LabelerKind::Centroid),
            "catalog" => Some(LabelerKind::Catalog),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::Catalog;
    use crate::gen::random_forest_union;
    use crate::logic::parse_formula;

    #[test]
    fn labelers_agree_on_forest_distances() {
        // the interface law at the labeler level: both labelers answer the
        // same distances on the same forest pieces
        let mut catalog = Catalog::new(0x00);
        let forest = random_forest_union(60, 1, 0xfeed);
        let ids: Vec<usize> = (0..forest.n()).collect();
        let cen = CentroidLabeler.build(5, &forest, &ids).unwrap();
        let cat = CatalogLabeler.build(5, &forest, &ids).unwrap();
        for (name, bytes) in cen.sections.iter().chain(cat.sections.iter()) {
            catalog.insert(name.clone(), bytes.clone()).unwrap();
        }
        assert!(cen.sections.is_empty(), "centroid labeler must stay label-pure");
        for u in 0..forest.n() {
            for v in 0..forest.n() {
                let d1 = CentroidLabeler
                    .dist(&catalog, &cen.sublabels[u], &cen.sublabels[v])
                    .unwrap();
                let d2 = CatalogLabeler
                    .dist(&catalog, &cat.sublabels[u], &cat.sublabels[v])
                    .unwrap();
                assert_eq!(d1, d2, "disagree on ({u},{v})");
                assert_eq!(d1, forest.distance(u, v).unwrap().map(|d| d as u64));
            }
        }
    }

    #[test]
    fn centroid_eval_supports_distance_combinations_only() {
        let mut catalog = Catalog::new(0x00);
        let forest = random_forest_union(30, 1, 7);
        let ids: Vec<usize> = (0..forest.n()).collect();
        let built = CentroidLabeler.build(0, &forest, &ids).unwrap();
        for (name, bytes) in built.sections {
            catalog.insert(name, bytes).unwrap();
        }
        let f = parse_formula("dist(x,y)<=2 & !(x = y)").unwrap();
        for (u, v) in [(0, 1), (3, 9), (5, 5)] {
            let got = CentroidLabeler
                .eval(&catalog, 0, &f, &[&built.sublabels[u], &built.sublabels[v]], &[])
                .unwrap();
            let want = crate::logic::eval_oracle(&forest, &f, &[u, v], &[]).unwrap();
            assert_eq!(got, want);
        }
        let quantified = parse_formula("E z. edge(x,z)").unwrap();
        assert!(matches!(
            CentroidLabeler.eval(&catalog, 0, &quantified, &[&built.sublabels[0]], &[]),
            Err(LabelerError::UnsupportedQuery(_))
        ));
    }
}
