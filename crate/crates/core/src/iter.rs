//! Tiled iteration over a MultiFab and static tile-level scheduling.
//!
//! A [`TileSchedule`] flattens the (grid, tile) loop nest into one ordered
//! list. Workers take contiguous slices of that list (see
//! [`crate::exec::partition`]), which is what "static scheduling" over tiles
//! means here: the assignment depends only on the list length and the
//! worker count.

use crate::error::{Error, Result};
use crate::exec::{partition, try_run_workers, Arena, ArenaPool};
use crate::index_space::{decompose, IndexBox, IntVect, TileSize, SPACEDIM};
use crate::level::MultiFab;

/// Tile size used by [`TilingMode::Default`] unless configured otherwise.
/// The huge x extent keeps the unit-stride direction untiled.
pub const DEFAULT_TILE_SIZE: [usize; SPACEDIM] = [1_048_576, 8, 8];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TilingMode {
    /// One tile per grid.
    Off,
    /// Tiles of the configured default size.
    Default,
    Explicit(TileSize),
}

/// Runtime knobs for tiling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IterConfig {
    pub default_tile_size: TileSize,
}

impl Default for IterConfig {
    fn default() -> Self {
        IterConfig {
            default_tile_size: TileSize::from_array(DEFAULT_TILE_SIZE).unwrap(),
        }
    }
}

/// One iteration of the flattened loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TileEntry {
    pub grid: usize,
    /// Storage unit (see [`crate::level::Unit`]) holding the tile.
    pub unit: usize,
    pub tile: IndexBox,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TileSchedule {
    entries: Vec<TileEntry>,
    grids: Vec<IndexBox>,
    nghost: usize,
}

impl TileSchedule {
    pub fn build(mf: &MultiFab, mode: TilingMode) -> Result<Self> {
        Self::build_with(mf, mode, &IterConfig::default())
    }

    pub fn build_with(mf: &MultiFab, mode: TilingMode, config: &IterConfig) -> Result<Self> {
        let ts = match mode {
            TilingMode::Off => None,
            TilingMode::Default => Some(config.default_tile_size),
            TilingMode::Explicit(ts) => Some(ts),
        };
        let mut entries = Vec::new();
        for (u, unit) in mf.units().iter().enumerate() {
            let tiles = match ts {
                None => vec![unit.valid],
                Some(ts) => decompose(&unit.valid, ts)?,
            };
            entries.extend(tiles.into_iter().map(|tile| TileEntry {
                grid: unit.grid,
                unit: u,
                tile,
            }));
        }
        Ok(TileSchedule {
            entries,
            grids: mf.boxarray().boxes().to_vec(),
            nghost: mf.nghost(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[TileEntry] {
        &self.entries
    }

    pub fn nghost(&self) -> usize {
        self.nghost
    }

    pub fn tile(&self, index: usize) -> TileRef<'_> {
        TileRef {
            schedule: self,
            index,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = TileRef<'_>> {
        (0..self.len()).map(|i| self.tile(i))
    }

    /// Positions of the schedule assigned to `worker`.
    pub fn worker_range(&self, workers: usize, worker: usize) -> std::ops::Range<usize> {
        partition(self.len(), workers, worker)
    }

    pub fn cursor(&self, workers: usize, worker: usize) -> TileCursor<'_> {
        let range = self.worker_range(workers, worker);
        TileCursor {
            schedule: self,
            pos: range.start,
            end: range.end,
            worker,
            workers,
        }
    }
}

/// A tile of a schedule plus the boxes derived from it.
#[derive(Clone, Copy, Debug)]
pub struct TileRef<'a> {
    schedule: &'a TileSchedule,
    index: usize,
}

impl<'a> TileRef<'a> {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn entry(&self) -> TileEntry {
        self.schedule.entries[self.index]
    }

    pub fn grid(&self) -> usize {
        self.entry().grid
    }

    pub fn unit(&self) -> usize {
        self.entry().unit
    }

    pub fn tilebox(&self) -> IndexBox {
        self.entry().tile
    }

    /// The grid this tile belongs to.
    pub fn validbox(&self) -> IndexBox {
        self.schedule.grids[self.grid()]
    }

    /// The tile grown by `ng` on each face that lies on the grid boundary.
    /// Tiles of one grid stay disjoint.
    pub fn growntilebox(&self, ng: usize) -> Result<IndexBox> {
        if ng > self.schedule.nghost {
            return Err(Error::InsufficientGhost {
                needed: ng,
                available: self.schedule.nghost,
            });
        }
        let (t, g) = (self.tilebox(), self.validbox());
        let ng = ng as i32;
        let mut lo = t.lo();
        let mut hi = t.hi();
        for d in 0..SPACEDIM {
            if t.lo()[d] == g.lo()[d] {
                lo[d] -= ng;
            }
            if t.hi()[d] == g.hi()[d] {
                hi[d] += ng;
            }
        }
        Ok(IndexBox::new(lo, hi))
    }

    /// Faces normal to `dir` owned by this tile: the tile's high face is
    /// left to the neighbouring tile unless it is the grid's high face.
    pub fn nodaltilebox(&self, dir: usize) -> Result<IndexBox> {
        let (t, g) = (self.tilebox(), self.validbox());
        let faces = t.to_face(dir)?;
        if t.hi()[dir] == g.hi()[dir] {
            Ok(faces)
        } else {
            Ok(faces.with_hi(dir, t.hi()[dir]))
        }
    }

    /// All faces of the tile normal to `dir`, shared ones included.
    pub fn facebox(&self, dir: usize) -> Result<IndexBox> {
        self.tilebox().to_face(dir)
    }

    pub fn lo(&self) -> IntVect {
        self.tilebox().lo()
    }
}

/// A worker's walk over its share of a schedule, in ascending order.
#[derive(Clone, Debug)]
pub struct TileCursor<'a> {
    schedule: &'a TileSchedule,
    pos: usize,
    end: usize,
    worker: usize,
    workers: usize,
}

impl<'a> TileCursor<'a> {
    pub fn is_valid(&self) -> bool {
        self.pos < self.end
    }

    pub fn worker(&self) -> usize {
        self.worker
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn current(&self) -> Result<TileRef<'a>> {
        if self.is_valid() {
            Ok(self.schedule.tile(self.pos))
        } else {
            Err(Error::CursorExhausted)
        }
    }

    pub fn advance(&mut self) {
        if self.pos < self.end {
            self.pos += 1;
        }
    }

    pub fn tilebox(&self) -> Result<IndexBox> {
        self.current().map(|t| t.tilebox())
    }

    pub fn validbox(&self) -> Result<IndexBox> {
        self.current().map(|t| t.validbox())
    }

    pub fn growntilebox(&self, ng: usize) -> Result<IndexBox> {
        self.current()?.growntilebox(ng)
    }

    pub fn nodaltilebox(&self, dir: usize) -> Result<IndexBox> {
        self.current()?.nodaltilebox(dir)
    }
}

impl<'a> Iterator for TileCursor<'a> {
    type Item = TileRef<'a>;

    fn next(&mut self) -> Option<TileRef<'a>> {
        let t = self.current().ok()?;
        self.advance();
        Some(t)
    }
}

/// Runs `body` once per schedule entry; worker `w` handles
/// `partition(len, workers, w)` in ascending order. The first error (in
/// worker order) is returned after every worker has stopped.
pub fn parallel_for_tiles<E, F>(schedule: &TileSchedule, workers: usize, body: F) -> std::result::Result<(), E>
where
    E: Send,
    F: Fn(TileRef<'_>, usize) -> std::result::Result<(), E> + Sync,
{
    let workers = workers.max(1);
    try_run_workers(workers, |w| {
        for tile in schedule.cursor(workers, w) {
            body(tile, w)?;
        }
        Ok(())
    })
}

/// [`parallel_for_tiles`] with the worker's scratch arena, reset before each tile.
pub fn parallel_for_tiles_with_arena<E, F>(
    schedule: &TileSchedule,
    workers: usize,
    arenas: &mut ArenaPool,
    body: F,
) -> std::result::Result<(), E>
where
    E: Send + From<Error>,
    F: Fn(TileRef<'_>, &mut Arena) -> std::result::Result<(), E> + Sync,
{
    let workers = workers.max(1);
    arenas.ensure(workers);
    let arenas = &*arenas;
    try_run_workers(workers, |w| {
        let mut arena = arenas.arena(w)?;
        for tile in schedule.cursor(workers, w) {
            arena.reset();
            body(tile, &mut arena)?;
        }
        arena.reset();
        Ok(())
    })
}
