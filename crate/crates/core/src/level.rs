//! A single mesh level: disjoint grids, their data, ghost exchange and reductions.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::exec::{partition, run_workers};
use crate::fab::{FArrayBox, SharedFab};
use crate::index_space::{decompose, IndexBox, IntVect, TileSize, SPACEDIM};

/// Copy tags larger than this many cells are split before threading.
pub const COPY_SPLIT_CELLS: usize = 4096;

/// Ordered list of pairwise disjoint, cell-centered grids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxArray {
    boxes: Vec<IndexBox>,
}

impl BoxArray {
    pub fn new(boxes: Vec<IndexBox>) -> Result<Self> {
        for b in &boxes {
            if b.is_empty() {
                return Err(Error::EmptyBox);
            }
            if !b.index_type().is_cell() {
                return Err(Error::NotCellCentered(*b));
            }
        }
        for (i, a) in boxes.iter().enumerate() {
            for (j, b) in boxes.iter().enumerate().skip(i + 1) {
                if a.intersects(b) {
                    return Err(Error::OverlappingGrids(i, j));
                }
            }
        }
        Ok(BoxArray { boxes })
    }

    /// Chops `domain` into grids no larger than `max_grid_size` per dimension.
    pub fn chop(domain: &IndexBox, max_grid_size: [usize; SPACEDIM]) -> Result<Self> {
        let ts = TileSize::from_array(max_grid_size)?;
        Ok(BoxArray {
            boxes: decompose(domain, ts)?,
        })
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn get(&self, i: usize) -> IndexBox {
        self.boxes[i]
    }

    pub fn boxes(&self) -> &[IndexBox] {
        &self.boxes
    }

    pub fn num_cells(&self) -> usize {
        self.boxes.iter().map(IndexBox::num_points).sum()
    }
}

/// Problem domain, periodicity and mesh spacing.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    domain: IndexBox,
    periodic: [bool; SPACEDIM],
    dx: [f64; SPACEDIM],
}

impl Geometry {
    pub fn new(domain: IndexBox, periodic: [bool; SPACEDIM], dx: [f64; SPACEDIM]) -> Result<Self> {
        if domain.is_empty() || !domain.index_type().is_cell() {
            return Err(Error::InvalidGeometry(format!("bad domain {domain}")));
        }
        if dx.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidGeometry(format!("bad spacing {dx:?}")));
        }
        Ok(Geometry { domain, periodic, dx })
    }

    /// Domain mapped onto the unit cube, so `dx[d] = 1 / n[d]`.
    pub fn unit_cube(domain: IndexBox, periodic: [bool; SPACEDIM]) -> Result<Self> {
        let dx = std::array::from_fn(|d| 1.0 / domain.length(d).max(1) as f64);
        Self::new(domain, periodic, dx)
    }

    pub fn domain(&self) -> IndexBox {
        self.domain
    }

    pub fn periodic(&self) -> [bool; SPACEDIM] {
        self.periodic
    }

    pub fn is_periodic(&self, d: usize) -> bool {
        self.periodic[d]
    }

    pub fn dx(&self) -> [f64; SPACEDIM] {
        self.dx
    }

    /// Cell-center coordinate of index `i` along `d`, with the domain's low
    /// face at zero.
    pub fn cell_center(&self, d: usize, i: i32) -> f64 {
        (f64::from(i - self.domain.lo()[d]) + 0.5) * self.dx[d]
    }

    pub fn check(&self, ba: &BoxArray) -> Result<()> {
        for b in ba.boxes() {
            if !self.domain.contains_box(b) {
                return Err(Error::OutsideDomain {
                    grid: *b,
                    domain: self.domain,
                });
            }
        }
        Ok(())
    }

    /// Periodic shift vectors able to bring valid data within `ng` cells of
    /// the domain. The zero shift comes first.
    pub fn periodic_shifts(&self, ng: usize) -> Vec<IntVect> {
        let reach: [i32; SPACEDIM] = std::array::from_fn(|d| {
            if self.periodic[d] {
                ng.div_ceil(self.domain.length(d)) as i32
            } else {
                0
            }
        });
        let mut shifts = vec![IntVect::ZERO];
        for nz in -reach[2]..=reach[2] {
            for ny in -reach[1]..=reach[1] {
                for nx in -reach[0]..=reach[0] {
                    let n = [nx, ny, nz];
                    if n == [0; SPACEDIM] {
                        continue;
                    }
                    shifts.push(IntVect(std::array::from_fn(|d| {
                        n[d] * self.domain.length(d) as i32
                    })));
                }
            }
        }
        shifts
    }
}

/// Memory layout of a [`MultiFab`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    /// One allocation per grid.
    Contiguous,
    /// Each grid is cut into regions of at most this size, each with its own
    /// allocation and ghost ring.
    Regional(TileSize),
}

/// One separately allocated block of a [`MultiFab`]: a whole grid in the
/// contiguous layout, a region of a grid in the regional layout.
#[derive(Clone, Debug)]
pub struct Unit {
    pub grid: usize,
    pub valid: IndexBox,
    pub fab: FArrayBox,
}

#[derive(Clone, Debug)]
pub struct MultiFab {
    ba: BoxArray,
    ncomp: usize,
    nghost: usize,
    layout: Layout,
    units: Vec<Unit>,
    grid_units: Vec<Range<usize>>,
}

impl MultiFab {
    pub fn new(ba: &BoxArray, ncomp: usize, nghost: usize, layout: Layout) -> Result<Self> {
        let ng = IntVect::splat(nghost as i32);
        let mut units = Vec::new();
        let mut grid_units = Vec::with_capacity(ba.len());
        for (g, grid) in ba.boxes().iter().enumerate() {
            let start = units.len();
            let valids = match layout {
                Layout::Contiguous => vec![*grid],
                Layout::Regional(rs) => decompose(grid, rs)?,
            };
            for valid in valids {
                units.push(Unit {
                    grid: g,
                    valid,
                    fab: FArrayBox::new(valid.grow(ng), ncomp)?,
                });
            }
            grid_units.push(start..units.len());
        }
        Ok(MultiFab {
            ba: ba.clone(),
            ncomp,
            nghost,
            layout,
            units,
            grid_units,
        })
    }

    /// A new zeroed MultiFab with the same grids, components, ghosts and layout.
    pub fn like(other: &MultiFab) -> Result<Self> {
        Self::new(&other.ba, other.ncomp, other.nghost, other.layout)
    }

    pub fn boxarray(&self) -> &BoxArray {
        &self.ba
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn nghost(&self) -> usize {
        self.nghost
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn unit(&self, u: usize) -> &Unit {
        &self.units[u]
    }

    pub fn unit_mut(&mut self, u: usize) -> &mut Unit {
        &mut self.units[u]
    }

    pub fn grid_units(&self, g: usize) -> Range<usize> {
        self.grid_units[g].clone()
    }

    pub fn same_structure(&self, other: &MultiFab) -> bool {
        self.ba == other.ba
            && self.ncomp == other.ncomp
            && self.nghost == other.nghost
            && self.layout == other.layout
    }

    /// Shared write handles for every unit, indexed like [`units`](Self::units).
    pub fn shared_units(&mut self) -> Vec<SharedFab<'_>> {
        self.units.iter_mut().map(|u| u.fab.shared()).collect()
    }

    /// Sets every valid cell from `f(point, component)`.
    pub fn set_valid<F: Fn(IntVect, usize) -> f64>(&mut self, f: F) {
        for unit in &mut self.units {
            for c in 0..self.ncomp {
                for p in unit.valid.points() {
                    let o = unit.fab.offset_unchecked(p, c);
                    unit.fab.data_mut()[o] = f(p, c);
                }
            }
        }
    }

    pub fn set_all(&mut self, v: f64) {
        for unit in &mut self.units {
            unit.fab.fill_all(v);
        }
    }

    /// Sets every cell outside its unit's valid box.
    pub fn set_ghost(&mut self, v: f64) {
        for unit in &mut self.units {
            let valid = unit.valid;
            for c in 0..self.ncomp {
                for p in unit.fab.abox().points() {
                    if !valid.contains(p) {
                        let o = unit.fab.offset_unchecked(p, c);
                        unit.fab.data_mut()[o] = v;
                    }
                }
            }
        }
    }

    /// Value of a valid cell of grid `g`.
    pub fn valid_value(&self, g: usize, p: IntVect, c: usize) -> Option<f64> {
        self.units[self.grid_units(g)]
            .iter()
            .find(|u| u.valid.contains(p))
            .and_then(|u| u.fab.at(p, c).ok())
    }

    /// Copy of grid `g` over its grown box, assembled from its units. Ghost
    /// cells come from the first unit that allocates them.
    pub fn grid_fab(&self, g: usize) -> Result<FArrayBox> {
        let gbox = self.ba.get(g).grow_all(self.nghost as i32);
        let mut out = FArrayBox::new(gbox, self.ncomp)?;
        let units = &self.units[self.grid_units(g)];
        for u in units.iter().rev() {
            let a = u.fab.abox();
            out.copy_region(&a, &u.fab, &a, 0, self.ncomp)?;
        }
        for u in units {
            out.copy_region(&u.valid, &u.fab, &u.valid, 0, self.ncomp)?;
        }
        Ok(out)
    }

    fn check_comp(&self, c: usize) -> Result<()> {
        if self.ba.is_empty() {
            return Err(Error::EmptyBoxArray);
        }
        if c >= self.ncomp {
            return Err(Error::ComponentRange {
                start: c,
                end: c + 1,
                ncomp: self.ncomp,
            });
        }
        Ok(())
    }

    fn unit_fold(&self, c: usize, workers: usize, init: f64, op: fn(f64, f64) -> f64) -> Result<f64> {
        self.check_comp(c)?;
        let workers = workers.max(1);
        let partials: Vec<std::sync::Mutex<f64>> =
            (0..workers).map(|_| std::sync::Mutex::new(init)).collect();
        run_workers(workers, |w| {
            let mut acc = init;
            for unit in &self.units[partition(self.units.len(), workers, w)] {
                let nx = unit.valid.length(0);
                let lo = unit.valid.lo();
                let hi = unit.valid.hi();
                for k in lo.z()..=hi.z() {
                    for j in lo.y()..=hi.y() {
                        let o = unit.fab.offset_unchecked(IntVect::new(lo.x(), j, k), c);
                        acc = unit.fab.data()[o..o + nx].iter().fold(acc, |a, &v| op(a, v));
                    }
                }
            }
            *partials[w].lock().unwrap() = acc;
        });
        Ok(partials
            .into_iter()
            .map(|m| m.into_inner().unwrap())
            .fold(init, op))
    }

    /// Maximum over valid cells of component `c`.
    pub fn reduce_max(&self, c: usize, workers: usize) -> Result<f64> {
        self.unit_fold(c, workers, f64::NEG_INFINITY, f64::max)
    }

    pub fn reduce_min(&self, c: usize, workers: usize) -> Result<f64> {
        self.unit_fold(c, workers, f64::INFINITY, f64::min)
    }

    /// Sum over valid cells of component `c`, accumulated serially in grid
    /// order and x-fastest cell order whatever the layout, so the result is
    /// bit-identical across layouts.
    pub fn reduce_sum(&self, c: usize) -> Result<f64> {
        self.check_comp(c)?;
        let mut acc = 0.0;
        for (g, grid) in self.ba.boxes().iter().enumerate() {
            let units = &self.units[self.grid_units(g)];
            let (lo, hi) = (grid.lo(), grid.hi());
            for k in lo.z()..=hi.z() {
                for j in lo.y()..=hi.y() {
                    // units of a grid are stored x-fastest, so the segments
                    // of a row come out in increasing x
                    for u in units {
                        let v = u.valid;
                        if j < v.lo().y() || j > v.hi().y() || k < v.lo().z() || k > v.hi().z() {
                            continue;
                        }
                        let o = u.fab.offset_unchecked(IntVect::new(v.lo().x(), j, k), c);
                        for &x in &u.fab.data()[o..o + v.length(0)] {
                            acc += x;
                        }
                    }
                }
            }
        }
        Ok(acc)
    }
}

/// One ghost-fill copy: `dst_box` of unit `dst` receives the valid cells
/// `dst_box - shift` of unit `src`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CopyTag {
    pub dst: usize,
    pub dst_box: IndexBox,
    pub src: usize,
    pub shift: IntVect,
}

impl CopyTag {
    pub fn src_box(&self) -> IndexBox {
        self.dst_box.shift(-self.shift)
    }
}

/// Precomputed ghost-cell exchange for one MultiFab structure and geometry.
#[derive(Clone, Debug)]
pub struct FillPlan {
    tags: Vec<CopyTag>,
    work: Vec<CopyTag>,
    nunits: usize,
    ncomp: usize,
}

/// Halves `b` along its longest non-x dimension until pieces have at most
/// `limit` cells or cannot be split further.
fn split_for_threads(b: IndexBox, limit: usize, out: &mut Vec<IndexBox>) {
    let dir = if b.length(2) > b.length(1) { 2 } else { 1 };
    if b.num_points() <= limit || b.length(dir) < 2 {
        out.push(b);
        return;
    }
    let mid = b.lo()[dir] + b.length(dir) as i32 / 2;
    split_for_threads(b.with_hi(dir, mid - 1), limit, out);
    split_for_threads(b.with_lo(dir, mid), limit, out);
}

impl FillPlan {
    pub fn build(mf: &MultiFab, geom: &Geometry) -> Result<Self> {
        geom.check(mf.boxarray())?;
        let ng = IntVect::splat(mf.nghost as i32);
        let shifts = geom.periodic_shifts(mf.nghost);
        let mut tags = Vec::new();
        if mf.nghost > 0 {
            for (d, dunit) in mf.units.iter().enumerate() {
                let grown = dunit.valid.grow(ng);
                for (s, sunit) in mf.units.iter().enumerate() {
                    for &shift in &shifts {
                        if s == d && shift == IntVect::ZERO {
                            continue;
                        }
                        let isect = grown.intersect(&sunit.valid.shift(shift))?;
                        if !isect.is_empty() {
                            tags.push(CopyTag {
                                dst: d,
                                dst_box: isect,
                                src: s,
                                shift,
                            });
                        }
                    }
                }
            }
        }
        let mut work = Vec::with_capacity(tags.len());
        let mut pieces = Vec::new();
        for t in &tags {
            pieces.clear();
            split_for_threads(t.dst_box, COPY_SPLIT_CELLS, &mut pieces);
            work.extend(pieces.iter().map(|&b| CopyTag { dst_box: b, ..*t }));
        }
        Ok(FillPlan {
            tags,
            work,
            nunits: mf.units.len(),
            ncomp: mf.ncomp,
        })
    }

    pub fn tags(&self) -> &[CopyTag] {
        &self.tags
    }

    /// Tags after splitting for threading.
    pub fn work_items(&self) -> &[CopyTag] {
        &self.work
    }

    pub fn num_ghost_cells(&self) -> usize {
        self.tags.iter().map(|t| t.dst_box.num_points()).sum()
    }

    /// Copies valid data into every planned ghost cell using `workers` threads.
    pub fn fill_boundary(&self, mf: &mut MultiFab, workers: usize) -> Result<()> {
        if mf.units.len() != self.nunits || mf.ncomp != self.ncomp {
            return Err(Error::Incompatible("fill plan built for a different MultiFab"));
        }
        let ncomp = mf.ncomp;
        let fabs = mf.shared_units();
        let work = &self.work;
        let workers = workers.max(1);
        run_workers(workers, |w| {
            for tag in &work[partition(work.len(), workers, w)] {
                let dst = &fabs[tag.dst];
                let src = &fabs[tag.src];
                let db = tag.dst_box;
                let nx = db.length(0);
                for c in 0..ncomp {
                    for k in db.lo().z()..=db.hi().z() {
                        for j in db.lo().y()..=db.hi().y() {
                            let dp = IntVect::new(db.lo().x(), j, k);
                            // SAFETY: destination rows are ghost cells owned by
                            // exactly one work item; source rows are valid
                            // cells, never written during the fill.
                            unsafe {
                                let s = src.row(dp - tag.shift, c, nx);
                                dst.row_mut(dp, c, nx).copy_from_slice(s);
                            }
                        }
                    }
                }
            }
        });
        Ok(())
    }
}
