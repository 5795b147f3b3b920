//! Runs over a list of tile settings or worker counts.

use crate::config::{RunConfig, TileSetting};
use crate::error::BenchError;
use crate::run::{run, RunReport};

use tilemesh::TilingMode;

#[derive(Clone, Debug, PartialEq)]
pub enum SweepAxis {
    Tiles(Vec<TileSetting>),
    Threads(Vec<usize>),
}

impl SweepAxis {
    pub fn len(&self) -> usize {
        match self {
            SweepAxis::Tiles(v) => v.len(),
            SweepAxis::Threads(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn variants(&self, base: &RunConfig) -> Vec<RunConfig> {
        match self {
            SweepAxis::Tiles(tiles) => tiles.iter().map(|&tile| RunConfig { tile, ..base.clone() }).collect(),
            SweepAxis::Threads(ws) => ws.iter().map(|&workers| RunConfig { workers, ..base.clone() }).collect(),
        }
    }
}

/// Every variant of `base` along `axis`, in order. Only the first variant
/// runs the verification gate; the rest share its initialization.
pub fn sweep(base: &RunConfig, axis: &SweepAxis) -> Result<Vec<RunReport>, BenchError> {
    if axis.is_empty() {
        return Err(BenchError::Usage("sweep axis is empty".into()));
    }
    let mut reports = Vec::with_capacity(axis.len());
    for (i, cfg) in axis.variants(base).into_iter().enumerate() {
        let cfg = RunConfig {
            verify: cfg.verify && i == 0,
            ..cfg
        };
        log::info!("sweep variant {}/{}", i + 1, axis.len());
        reports.push(run(&cfg)?);
    }
    Ok(reports)
}

/// Total time of the first report divided by each report's total time.
pub fn speedups(reports: &[RunReport]) -> Vec<f64> {
    let Some(first) = reports.first() else {
        return Vec::new();
    };
    reports.iter().map(|r| first.total_seconds / r.total_seconds).collect()
}

/// Speedups against the one-worker untiled report, when the list has one.
pub fn anchored_speedups(reports: &[RunReport]) -> Option<Vec<f64>> {
    let anchor = reports
        .iter()
        .find(|r| r.config.workers == 1 && r.config.tiling_mode() == TilingMode::Off)?;
    Some(reports.iter().map(|r| anchor.total_seconds / r.total_seconds).collect())
}
