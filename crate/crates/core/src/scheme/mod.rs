//! The labeling pipelines: builders that turn a graph into a
//! `(LabelBundle, Catalog)` pair and pure decoders that answer queries from
//! that pair alone.
//!
//! | scheme id | module | query class |
//! |-----------|--------------|-------------------------------------------|
//! | 0x01 | [`arboricity`] | quantifier-free, any graph (compact on sparse) |
//! | 0x02 | [`expansion`] | bounded FO, graphs with an expansion partition |
//! | 0x03 | [`local`] | t-local with set arguments, covered graphs |
//! | 0x04 | [`general`] | FO without set arguments, covered graphs |
//! | 0x05 | [`scattered`] | basic (t,s)-local sentences with set arguments |

pub mod arboricity;
pub mod expansion;
pub mod general;
pub mod local;
pub mod scattered;

use thiserror::Error;

use crate::codec::CodecError;
use crate::graph::GraphError;
use crate::labeler::LabelerError;
use crate::logic::{LogicError, PlanError};

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("unsupported query: {0}")]
    UnsupportedQuery(String),
    #[error("plan kind mismatch: this scheme needs a {expected} plan, got {got}")]
    PlanKindMismatch { expected: &'static str, got: &'static str },
    #[error("cover defect: {0}")]
    CoverDefect(String),
    #[error("scheme requires a cover flagged nice")]
    CoverNotNice,
    #[error("partition too coarse: {parts} parts would enumerate {windows} windows (budget {budget})")]
    PartitionTooCoarse { parts: usize, windows: u128, budget: u128 },
    #[error("bundle was built by scheme {got:#04x}, expected {expected:#04x}")]
    WrongScheme { expected: u8, got: u8 },
    #[error("malformed label: {0}")]
    MalformedLabel(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Labeler(#[from] LabelerError),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

impl SchemeError {
    /// Harness/CLI exit code classification: 3 for unsupported queries,
    /// 2 for everything else (input or structural errors).
    pub fn exit_code(&self) -> i32 {
        match self {
            SchemeError::UnsupportedQuery(_) => 3,
            SchemeError::Labeler(LabelerError::UnsupportedQuery(_)) => 3,
            _ => 2,
        }
    }
}
