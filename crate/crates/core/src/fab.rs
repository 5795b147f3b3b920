//! `FArrayBox`: multi-component `f64` storage over one box.
//!
//! Data is a single contiguous array, x fastest, component slowest, so a
//! component of a box is laid out exactly like a Fortran array
//! `a(lo.x:hi.x, lo.y:hi.y, lo.z:hi.z)`.

use std::io::{Read, Write};
use std::marker::PhantomData;

use crate::error::{Error, Result};
use crate::index_space::{IndexBox, IntVect};

const FAB_MAGIC: &[u8; 4] = b"FAB1";

#[derive(Clone, Debug, PartialEq)]
pub struct FArrayBox {
    abox: IndexBox,
    ncomp: usize,
    strides: [usize; 4],
    data: Vec<f64>,
}

fn strides_for(abox: &IndexBox) -> [usize; 4] {
    let [nx, ny, nz] = abox.extents();
    [1, nx, nx * ny, nx * ny * nz]
}

impl FArrayBox {
    /// Zero-initialized storage over `abox`.
    pub fn new(abox: IndexBox, ncomp: usize) -> Result<Self> {
        if abox.is_empty() {
            return Err(Error::EmptyBox);
        }
        if ncomp == 0 {
            return Err(Error::ComponentRange {
                start: 0,
                end: 0,
                ncomp,
            });
        }
        let strides = strides_for(&abox);
        Ok(FArrayBox {
            abox,
            ncomp,
            strides,
            data: vec![0.0; strides[3] * ncomp],
        })
    }

    /// The allocated region, ghost cells included.
    pub fn abox(&self) -> IndexBox {
        self.abox
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    /// `[1, nx, nx*ny, nx*ny*nz]`: the offset steps in x, y, z and component.
    pub fn strides(&self) -> [usize; 4] {
        self.strides
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Flat offset without range checks. Only meaningful for points in `abox`.
    #[inline(always)]
    pub fn offset_unchecked(&self, p: IntVect, c: usize) -> usize {
        let lo = self.abox.lo();
        let s = &self.strides;
        (p[0] - lo[0]) as usize
            + s[1] * (p[1] - lo[1]) as usize
            + s[2] * (p[2] - lo[2]) as usize
            + s[3] * c
    }

    pub fn offset(&self, p: IntVect, c: usize) -> Result<usize> {
        if !self.abox.contains(p) || c >= self.ncomp {
            return Err(Error::OutOfBounds {
                point: p,
                comp: c,
                abox: self.abox,
                ncomp: self.ncomp,
            });
        }
        Ok(self.offset_unchecked(p, c))
    }

    pub fn at(&self, p: IntVect, c: usize) -> Result<f64> {
        self.offset(p, c).map(|o| self.data[o])
    }

    pub fn set_at(&mut self, p: IntVect, c: usize, v: f64) -> Result<()> {
        let o = self.offset(p, c)?;
        self.data[o] = v;
        Ok(())
    }

    fn check_comps(&self, c0: usize, nc: usize) -> Result<()> {
        if c0 + nc > self.ncomp {
            return Err(Error::ComponentRange {
                start: c0,
                end: c0 + nc,
                ncomp: self.ncomp,
            });
        }
        Ok(())
    }

    fn check_inside(&self, region: &IndexBox) -> Result<()> {
        if region.index_type() != self.abox.index_type() {
            return Err(Error::IndexTypeMismatch(
                region.index_type(),
                self.abox.index_type(),
            ));
        }
        if !self.abox.contains_box(region) {
            return Err(Error::NotContained {
                region: *region,
                container: self.abox,
            });
        }
        Ok(())
    }

    /// Offsets of the first cell of every x-row of `region`, for component `c`.
    fn row_starts(&self, region: IndexBox, c: usize) -> impl Iterator<Item = usize> + '_ {
        let (lo, hi) = (region.lo(), region.hi());
        (lo.z()..=hi.z())
            .flat_map(move |k| (lo.y()..=hi.y()).map(move |j| (j, k)))
            .map(move |(j, k)| self.offset_unchecked(IntVect::new(lo.x(), j, k), c))
    }

    pub fn fill(&mut self, region: &IndexBox, c: usize, v: f64) -> Result<()> {
        self.check_inside(region)?;
        self.check_comps(c, 1)?;
        if region.is_empty() {
            return Ok(());
        }
        let nx = region.length(0);
        let starts: Vec<usize> = self.row_starts(*region, c).collect();
        for s in starts {
            self.data[s..s + nx].fill(v);
        }
        Ok(())
    }

    pub fn fill_all(&mut self, v: f64) {
        self.data.fill(v);
    }

    /// Copies `nc` components starting at `c0` from `src` over `sbox` into
    /// `self` over `dbox`, matching cells by position within the boxes.
    pub fn copy_region(
        &mut self,
        dbox: &IndexBox,
        src: &FArrayBox,
        sbox: &IndexBox,
        c0: usize,
        nc: usize,
    ) -> Result<()> {
        self.check_copy(dbox, src, sbox, c0, nc)?;
        if nc == 0 || dbox.is_empty() {
            return Ok(());
        }
        let nx = dbox.length(0);
        for c in c0..c0 + nc {
            for (d, s) in self.row_starts(*dbox, c).zip(src.row_starts(*sbox, c)).collect::<Vec<_>>() {
                self.data[d..d + nx].copy_from_slice(&src.data[s..s + nx]);
            }
        }
        Ok(())
    }

    /// Same as [`copy_region`](Self::copy_region) with `self` as the source.
    pub fn copy_within(&mut self, dbox: &IndexBox, sbox: &IndexBox, c0: usize, nc: usize) -> Result<()> {
        self.check_copy(dbox, self, sbox, c0, nc)?;
        if nc == 0 || dbox.is_empty() {
            return Ok(());
        }
        let nx = dbox.length(0);
        for c in c0..c0 + nc {
            let pairs: Vec<_> = self.row_starts(*dbox, c).zip(self.row_starts(*sbox, c)).collect();
            for (d, s) in pairs {
                self.data.copy_within(s..s + nx, d);
            }
        }
        Ok(())
    }

    fn check_copy(&self, dbox: &IndexBox, src: &FArrayBox, sbox: &IndexBox, c0: usize, nc: usize) -> Result<()> {
        if !dbox.same_extents(sbox) {
            return Err(Error::ExtentMismatch(*dbox, *sbox));
        }
        self.check_inside(dbox)?;
        src.check_inside(sbox)?;
        self.check_comps(c0, nc)?;
        src.check_comps(c0, nc)
    }

    /// Binary dump: magic, abox lo/hi as six little-endian `i64`, `ncomp` as
    /// `u64`, then the raw data in layout order as little-endian `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(FAB_MAGIC)?;
        for v in self.abox.lo().0.iter().chain(self.abox.hi().0.iter()) {
            w.write_all(&(*v as i64).to_le_bytes())?;
        }
        w.write_all(&(self.ncomp as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != FAB_MAGIC {
            return Err(Error::Format("bad fab magic".into()));
        }
        let mut word = [0u8; 8];
        let mut ints = [0i64; 6];
        for v in &mut ints {
            r.read_exact(&mut word)?;
            *v = i64::from_le_bytes(word);
        }
        r.read_exact(&mut word)?;
        let ncomp = u64::from_le_bytes(word) as usize;
        let to_iv = |s: &[i64]| IntVect::new(s[0] as i32, s[1] as i32, s[2] as i32);
        let abox = IndexBox::new(to_iv(&ints[..3]), to_iv(&ints[3..]));
        let mut fab = FArrayBox::new(abox, ncomp)?;
        let mut raw = vec![0u8; fab.data.len() * 8];
        r.read_exact(&mut raw)?;
        for (v, chunk) in fab.data.iter_mut().zip(raw.chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(fab)
    }

    /// Raw handle for concurrent writes to disjoint cells of this fab.
    pub fn shared(&mut self) -> SharedFab<'_> {
        SharedFab {
            ptr: self.data.as_mut_ptr(),
            len: self.data.len(),
            abox: self.abox,
            strides: self.strides,
            _marker: PhantomData,
        }
    }
}

/// Aliasable view of a mutably borrowed [`FArrayBox`].
///
/// Several workers may hold copies at once. Callers must guarantee that no
/// cell is written by one worker while any other worker reads or writes it.
#[derive(Clone, Copy, Debug)]
pub struct SharedFab<'a> {
    ptr: *mut f64,
    len: usize,
    abox: IndexBox,
    strides: [usize; 4],
    _marker: PhantomData<&'a mut [f64]>,
}

// SAFETY: access goes through unsafe methods whose contract forbids racing
// on the same cell.
unsafe impl Send for SharedFab<'_> {}
unsafe impl Sync for SharedFab<'_> {}

impl<'a> SharedFab<'a> {
    pub fn abox(&self) -> IndexBox {
        self.abox
    }

    #[inline(always)]
    pub fn offset(&self, p: IntVect, c: usize) -> usize {
        let lo = self.abox.lo();
        let s = &self.strides;
        (p[0] - lo[0]) as usize
            + s[1] * (p[1] - lo[1]) as usize
            + s[2] * (p[2] - lo[2]) as usize
            + s[3] * c
    }

    /// Mutable x-row of `len` cells starting at `p`.
    ///
    /// # Safety
    /// The row must lie in `abox` and no other live reference may overlap it.
    #[inline(always)]
    pub unsafe fn row_mut(&self, p: IntVect, c: usize, len: usize) -> &'a mut [f64] {
        let o = self.offset(p, c);
        debug_assert!(o + len <= self.len);
        std::slice::from_raw_parts_mut(self.ptr.add(o), len)
    }

    /// Shared x-row of `len` cells starting at `p`.
    ///
    /// # Safety
    /// The row must lie in `abox` and must not be written concurrently.
    #[inline(always)]
    pub unsafe fn row(&self, p: IntVect, c: usize, len: usize) -> &'a [f64] {
        let o = self.offset(p, c);
        debug_assert!(o + len <= self.len);
        std::slice::from_raw_parts(self.ptr.add(o), len)
    }
}
