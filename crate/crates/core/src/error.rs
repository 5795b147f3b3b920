use thiserror::Error;

use crate::index_space::{IndexBox, IndexType, IntVect};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index type mismatch: {0} vs {1}")]
    IndexTypeMismatch(IndexType, IndexType),
    #[error("box is already nodal in direction {0}")]
    AlreadyNodal(usize),
    #[error("operation requires a non-empty box")]
    EmptyBox,
    #[error("box {0} is not cell-centered")]
    NotCellCentered(IndexBox),
    #[error("invalid tile size {0:?}: every extent must be at least 1")]
    InvalidTileSize([usize; 3]),
    #[error("index {point} component {comp} is outside {abox} with {ncomp} components")]
    OutOfBounds {
        point: IntVect,
        comp: usize,
        abox: IndexBox,
        ncomp: usize,
    },
    #[error("region {region} is not contained in {container}")]
    NotContained {
        region: IndexBox,
        container: IndexBox,
    },
    #[error("box extents differ: {0} vs {1}")]
    ExtentMismatch(IndexBox, IndexBox),
    #[error("component range {start}..{end} exceeds {ncomp} components")]
    ComponentRange {
        start: usize,
        end: usize,
        ncomp: usize,
    },
    #[error("grids {0} and {1} overlap")]
    OverlappingGrids(usize, usize),
    #[error("grid {grid} lies outside the problem domain {domain}")]
    OutsideDomain { grid: IndexBox, domain: IndexBox },
    #[error("box array is empty")]
    EmptyBoxArray,
    #[error("need {needed} ghost cells but only {available} are allocated")]
    InsufficientGhost { needed: usize, available: usize },
    #[error("tile cursor is exhausted")]
    CursorExhausted,
    #[error("multifabs are not compatible: {0}")]
    Incompatible(&'static str),
    #[error("worker {worker} arena is in use by another worker")]
    ArenaContention { worker: usize },
    #[error("worker id {worker} out of range for {count} workers")]
    WorkerOutOfRange { worker: usize, count: usize },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
