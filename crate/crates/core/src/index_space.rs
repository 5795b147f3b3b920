//! Index-space algebra: integer vectors, centered boxes and tile decomposition.
//!
//! Everything here is a small `Copy` value; nothing allocates except
//! [`decompose`], which returns the tile list.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Neg, Sub};

use crate::error::{Error, Result};

/// Number of spatial dimensions. Fixed at three.
pub const SPACEDIM: usize = 3;

/// A point (or per-dimension extent) in index space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct IntVect(pub [i32; SPACEDIM]);

impl IntVect {
    pub const ZERO: IntVect = IntVect([0; SPACEDIM]);
    pub const UNIT: IntVect = IntVect([1; SPACEDIM]);

    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        IntVect([x, y, z])
    }

    pub const fn splat(v: i32) -> Self {
        IntVect([v; SPACEDIM])
    }

    /// Unit vector along `dir`, scaled by `len`.
    pub fn basis(dir: usize, len: i32) -> Self {
        let mut v = IntVect::ZERO;
        v[dir] = len;
        v
    }

    pub fn x(&self) -> i32 {
        self.0[0]
    }
    pub fn y(&self) -> i32 {
        self.0[1]
    }
    pub fn z(&self) -> i32 {
        self.0[2]
    }

    pub fn min(self, other: Self) -> Self {
        IntVect(std::array::from_fn(|d| self.0[d].min(other.0[d])))
    }

    pub fn max(self, other: Self) -> Self {
        IntVect(std::array::from_fn(|d| self.0[d].max(other.0[d])))
    }

    /// True if every component is `<=` the matching component of `other`.
    pub fn all_le(&self, other: &Self) -> bool {
        (0..SPACEDIM).all(|d| self.0[d] <= other.0[d])
    }
}

impl Index<usize> for IntVect {
    type Output = i32;
    fn index(&self, d: usize) -> &i32 {
        &self.0[d]
    }
}

impl IndexMut<usize> for IntVect {
    fn index_mut(&mut self, d: usize) -> &mut i32 {
        &mut self.0[d]
    }
}

impl Add for IntVect {
    type Output = IntVect;
    fn add(self, rhs: IntVect) -> IntVect {
        IntVect(std::array::from_fn(|d| self.0[d] + rhs.0[d]))
    }
}

impl Sub for IntVect {
    type Output = IntVect;
    fn sub(self, rhs: IntVect) -> IntVect {
        IntVect(std::array::from_fn(|d| self.0[d] - rhs.0[d]))
    }
}

impl Neg for IntVect {
    type Output = IntVect;
    fn neg(self) -> IntVect {
        IntVect(self.0.map(|v| -v))
    }
}

impl fmt::Display for IntVect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.0[0], self.0[1], self.0[2])
    }
}

/// Per-dimension centering of a box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Centering {
    Cell,
    Node,
}

/// Centering flags, one per dimension. A box that is `Node` in direction `d`
/// and `Cell` elsewhere holds the faces normal to `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct IndexType(pub [Centering; SPACEDIM]);

impl IndexType {
    pub const CELL: IndexType = IndexType([Centering::Cell; SPACEDIM]);

    pub fn face(dir: usize) -> Self {
        let mut t = Self::CELL;
        t.0[dir] = Centering::Node;
        t
    }

    pub fn is_cell(&self) -> bool {
        *self == Self::CELL
    }

    pub fn is_node(&self, dir: usize) -> bool {
        self.0[dir] == Centering::Node
    }
}

impl Default for IndexType {
    fn default() -> Self {
        Self::CELL
    }
}

impl fmt::Display for IndexType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.0 {
            f.write_str(match c {
                Centering::Cell => "C",
                Centering::Node => "N",
            })?;
        }
        Ok(())
    }
}

/// A rectangular region of index space, inclusive on both ends.
///
/// An empty box is stored in canonical form (`lo = 0`, `hi = -1` in every
/// dimension) so that all empty boxes of a given type compare equal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct IndexBox {
    lo: IntVect,
    hi: IntVect,
    typ: IndexType,
}

impl IndexBox {
    /// Cell-centered box; yields the canonical empty box if `hi < lo` anywhere.
    pub fn new(lo: IntVect, hi: IntVect) -> Self {
        Self::with_type(lo, hi, IndexType::CELL)
    }

    pub fn with_type(lo: IntVect, hi: IntVect, typ: IndexType) -> Self {
        if (0..SPACEDIM).any(|d| hi[d] < lo[d]) {
            Self::empty(typ)
        } else {
            IndexBox { lo, hi, typ }
        }
    }

    /// Cell-centered box `[lo, hi]` in every dimension.
    pub fn cube(lo: i32, hi: i32) -> Self {
        Self::new(IntVect::splat(lo), IntVect::splat(hi))
    }

    pub fn empty(typ: IndexType) -> Self {
        IndexBox {
            lo: IntVect::ZERO,
            hi: IntVect::splat(-1),
            typ,
        }
    }

    pub fn lo(&self) -> IntVect {
        self.lo
    }

    pub fn hi(&self) -> IntVect {
        self.hi
    }

    pub fn index_type(&self) -> IndexType {
        self.typ
    }

    pub fn is_empty(&self) -> bool {
        (0..SPACEDIM).any(|d| self.hi[d] < self.lo[d])
    }

    /// Number of points along `d` (zero for empty boxes).
    pub fn length(&self, d: usize) -> usize {
        if self.is_empty() {
            0
        } else {
            (self.hi[d] - self.lo[d] + 1) as usize
        }
    }

    pub fn extents(&self) -> [usize; SPACEDIM] {
        std::array::from_fn(|d| self.length(d))
    }

    pub fn num_points(&self) -> usize {
        self.extents().iter().product()
    }

    pub fn contains(&self, p: IntVect) -> bool {
        !self.is_empty() && self.lo.all_le(&p) && p.all_le(&self.hi)
    }

    /// True if `other` lies inside `self`. Empty boxes are contained everywhere.
    pub fn contains_box(&self, other: &IndexBox) -> bool {
        other.is_empty()
            || (!self.is_empty() && self.lo.all_le(&other.lo) && other.hi.all_le(&self.hi))
    }

    pub fn same_extents(&self, other: &IndexBox) -> bool {
        self.extents() == other.extents()
    }

    /// Largest box contained in both.
    pub fn intersect(&self, other: &IndexBox) -> Result<IndexBox> {
        if self.typ != other.typ {
            return Err(Error::IndexTypeMismatch(self.typ, other.typ));
        }
        if self.is_empty() || other.is_empty() {
            return Ok(Self::empty(self.typ));
        }
        Ok(Self::with_type(
            self.lo.max(other.lo),
            self.hi.min(other.hi),
            self.typ,
        ))
    }

    pub fn intersects(&self, other: &IndexBox) -> bool {
        self.intersect(other).map(|b| !b.is_empty()).unwrap_or(false)
    }

    /// Grows by `ng[d]` on both sides in every dimension.
    pub fn grow(&self, ng: IntVect) -> IndexBox {
        if self.is_empty() {
            return *self;
        }
        Self::with_type(self.lo - ng, self.hi + ng, self.typ)
    }

    pub fn grow_all(&self, ng: i32) -> IndexBox {
        self.grow(IntVect::splat(ng))
    }

    pub fn shift(&self, v: IntVect) -> IndexBox {
        if self.is_empty() {
            return *self;
        }
        IndexBox {
            lo: self.lo + v,
            hi: self.hi + v,
            typ: self.typ,
        }
    }

    /// Converts a cell-centered direction to face centering (`hi += 1`).
    pub fn to_face(&self, dir: usize) -> Result<IndexBox> {
        if self.typ.is_node(dir) {
            return Err(Error::AlreadyNodal(dir));
        }
        let mut typ = self.typ;
        typ.0[dir] = Centering::Node;
        if self.is_empty() {
            return Ok(Self::empty(typ));
        }
        let mut hi = self.hi;
        hi[dir] += 1;
        Ok(IndexBox { lo: self.lo, hi, typ })
    }

    pub fn with_lo(&self, d: usize, v: i32) -> IndexBox {
        let mut lo = self.lo;
        lo[d] = v;
        Self::with_type(lo, self.hi, self.typ)
    }

    pub fn with_hi(&self, d: usize, v: i32) -> IndexBox {
        let mut hi = self.hi;
        hi[d] = v;
        Self::with_type(self.lo, hi, self.typ)
    }

    /// Points of the box in x-fastest order.
    pub fn points(&self) -> impl Iterator<Item = IntVect> + '_ {
        let (lo, hi) = (self.lo, self.hi);
        let empty = self.is_empty();
        (lo.z()..=hi.z())
            .flat_map(move |k| (lo.y()..=hi.y()).map(move |j| (j, k)))
            .flat_map(move |(j, k)| (lo.x()..=hi.x()).map(move |i| IntVect::new(i, j, k)))
            .filter(move |_| !empty)
    }
}

impl fmt::Display for IndexBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}[{}]", self.lo, self.hi, self.typ)
    }
}

/// Tile extents in cells, each at least one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TileSize([usize; SPACEDIM]);

impl TileSize {
    pub fn new(x: usize, y: usize, z: usize) -> Result<Self> {
        Self::from_array([x, y, z])
    }

    pub fn from_array(ts: [usize; SPACEDIM]) -> Result<Self> {
        if ts.contains(&0) {
            return Err(Error::InvalidTileSize(ts));
        }
        Ok(TileSize(ts))
    }

    pub fn get(&self, d: usize) -> usize {
        self.0[d]
    }

    pub fn as_array(&self) -> [usize; SPACEDIM] {
        self.0
    }
}

impl fmt::Display for TileSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.0[0], self.0[1], self.0[2])
    }
}

/// Splits `[lo, lo+len)` into `ceil(len / ts)` nearly equal pieces, larger first.
/// Returns inclusive `(lo, hi)` pairs.
pub(crate) fn split_range(lo: i32, len: usize, ts: usize) -> Vec<(i32, i32)> {
    let n = len.div_ceil(ts);
    let base = len / n;
    let extra = len % n;
    let mut out = Vec::with_capacity(n);
    let mut start = lo;
    for t in 0..n {
        let w = (base + usize::from(t < extra)) as i32;
        out.push((start, start + w - 1));
        start += w;
    }
    out
}

/// Chops a cell-centered box into tiles of at most `ts` (up to even-split
/// rounding) in x-fastest order.
pub fn decompose(b: &IndexBox, ts: TileSize) -> Result<Vec<IndexBox>> {
    if b.is_empty() {
        return Err(Error::EmptyBox);
    }
    if !b.index_type().is_cell() {
        return Err(Error::NotCellCentered(*b));
    }
    let ranges: [Vec<(i32, i32)>; SPACEDIM] =
        std::array::from_fn(|d| split_range(b.lo()[d], b.length(d), ts.get(d)));
    let mut tiles = Vec::with_capacity(ranges.iter().map(Vec::len).product());
    for &(zl, zh) in &ranges[2] {
        for &(yl, yh) in &ranges[1] {
            for &(xl, xh) in &ranges[0] {
                tiles.push(IndexBox::new(
                    IntVect::new(xl, yl, zl),
                    IntVect::new(xh, yh, zh),
                ));
            }
        }
    }
    Ok(tiles)
}
