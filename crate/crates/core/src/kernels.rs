//! Benchmark stencil kernels.
//!
//! * Heat equation, forward Euler, flux form: three face-flux loops
//!   followed by a divergence loop. The loops are deliberately not fused.
//! * `wide4`: an 8th-order, 9-point-per-direction Laplacian update that
//!   needs four ghost cells.
//!
//! Each kernel has a tile-level driver (whole tiles per worker, scratch
//! from the worker's arena) and a loop-level driver (one tile per grid,
//! every loop split over z across workers). Both evaluate the same
//! per-cell expression in the same order, so results are bitwise
//! identical across drivers, tile sizes, worker counts and layouts.

use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::exec::{partition, run_workers, ArenaPool};
use crate::fab::{FArrayBox, SharedFab};
use crate::index_space::{IndexBox, IndexType, IntVect, SPACEDIM};
use crate::iter::{parallel_for_tiles_with_arena, TileSchedule};
use crate::level::MultiFab;

/// Forward-Euler parameters shared by both kernels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeatParams {
    pub diffusivity: f64,
    pub dt: f64,
    pub dx: [f64; SPACEDIM],
}

impl HeatParams {
    pub fn new(diffusivity: f64, dt: f64, dx: [f64; SPACEDIM]) -> Result<Self> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(diffusivity) || !ok(dt) || !dx.iter().all(|&h| ok(h)) {
            return Err(Error::InvalidGeometry(format!(
                "diffusivity {diffusivity}, dt {dt} and spacing {dx:?} must be positive"
            )));
        }
        Ok(HeatParams { diffusivity, dt, dx })
    }

    /// Parameters with `dt = safety * stable_dt` for the given operator.
    pub fn with_stable_dt(diffusivity: f64, dx: [f64; SPACEDIM], op: Operator, safety: f64) -> Result<Self> {
        Self::new(diffusivity, safety * op.stable_dt(diffusivity, dx), dx)
    }

    pub fn is_stable(&self, op: Operator) -> bool {
        self.dt <= op.stable_dt(self.diffusivity, self.dx) * (1.0 + 1e-12)
    }
}

/// Second-derivative weights for offsets `0, ±1, .., ±4`, unit spacing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StencilCoeffs8(pub [f64; 5]);

impl StencilCoeffs8 {
    pub fn weight(&self, offset: i32) -> f64 {
        self.0[offset.unsigned_abs() as usize]
    }

    /// All nine weights for offsets -4..=4.
    pub fn full(&self) -> [f64; 9] {
        std::array::from_fn(|n| self.weight(n as i32 - 4))
    }

    /// `sum_m w_m cos(m theta)`: the operator's response to a Fourier mode.
    pub fn symbol(&self, theta: f64) -> f64 {
        (1..5).fold(self.0[0], |s, m| s + 2.0 * self.0[m] * (m as f64 * theta).cos())
    }
}

/// Solves the Taylor-moment conditions for a symmetric 9-point second
/// derivative: weights annihilate 1, x^4, x^6, x^8 and give 2 on x^2.
pub fn derive_coeffs8() -> StencilCoeffs8 {
    // rows: even moments p = 0, 2, 4, 6, 8; columns: c0, c1..c4
    let mut a = [[0.0f64; 6]; 5];
    for (row, p) in [0u32, 2, 4, 6, 8].into_iter().enumerate() {
        a[row][0] = if p == 0 { 1.0 } else { 0.0 };
        for (m, v) in a[row].iter_mut().enumerate().take(5).skip(1) {
            *v = 2.0 * (m as f64).powi(p as i32);
        }
        a[row][5] = if p == 2 { 2.0 } else { 0.0 };
    }
    // Gaussian elimination with partial pivoting
    for col in 0..5 {
        let piv = (col..5)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        let pivot = a[col];
        for r in a.iter_mut().skip(col + 1) {
            let f = r[col] / pivot[col];
            for (x, y) in r[col..].iter_mut().zip(&pivot[col..]) {
                *x -= f * y;
            }
        }
    }
    let mut c = [0.0; 5];
    for row in (0..5).rev() {
        let s: f64 = (row + 1..5).map(|k| a[row][k] * c[k]).sum();
        c[row] = (a[row][5] - s) / a[row][row];
    }
    StencilCoeffs8(c)
}

/// Which spatial operator a step applies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Operator {
    /// Second-order flux-form Laplacian.
    Heat,
    /// 8th-order 9-point Laplacian.
    Wide4(StencilCoeffs8),
}

impl Operator {
    pub fn wide4() -> Self {
        Operator::Wide4(derive_coeffs8())
    }

    pub fn ghost_width(&self) -> usize {
        match self {
            Operator::Heat => 1,
            Operator::Wide4(_) => 4,
        }
    }

    /// Discrete second-derivative response at angle `theta`, unit spacing.
    pub fn symbol(&self, theta: f64) -> f64 {
        match self {
            Operator::Heat => -2.0 + 2.0 * theta.cos(),
            Operator::Wide4(c) => c.symbol(theta),
        }
    }

    /// Largest stable forward-Euler step: the most negative eigenvalue
    /// (at theta = pi) times `dt` must stay within -2.
    pub fn stable_dt(&self, diffusivity: f64, dx: [f64; SPACEDIM]) -> f64 {
        let rho = -self.symbol(std::f64::consts::PI);
        let s: f64 = dx.iter().map(|h| rho / (h * h)).sum();
        2.0 / (diffusivity * s)
    }

    /// Per-step amplification of the mode with phase advance `theta[d]`
    /// per cell in each direction.
    pub fn amplification(&self, params: &HeatParams, theta: [f64; SPACEDIM]) -> f64 {
        let s: f64 = (0..SPACEDIM)
            .map(|d| self.symbol(theta[d]) / (params.dx[d] * params.dx[d]))
            .sum();
        1.0 + params.dt * params.diffusivity * s
    }
}

/// Face fluxes of one direction over `fbox`, x fastest.
#[derive(Clone, Copy, Debug)]
pub struct FluxView<'a> {
    pub fbox: IndexBox,
    pub data: &'a [f64],
}

fn check_flux_box(u: &FArrayBox, face_box: &IndexBox, dir: usize) -> Result<()> {
    if face_box.index_type() != IndexType::face(dir) {
        return Err(Error::IndexTypeMismatch(face_box.index_type(), IndexType::face(dir)));
    }
    // cells on both sides of every face
    let cells = IndexBox::new(face_box.lo() - IntVect::basis(dir, 1), face_box.hi());
    if !u.abox().contains_box(&cells) {
        return Err(Error::NotContained {
            region: cells,
            container: u.abox(),
        });
    }
    Ok(())
}

/// `F(face) = (u(high cell) - u(low cell)) * (1 / dx)` for every face of
/// `face_box` (normal to `dir`), written x-fastest into `out`.
pub fn heat_flux(u: &FArrayBox, face_box: &IndexBox, dir: usize, dx: f64, out: &mut [f64]) -> Result<()> {
    check_flux_box(u, face_box, dir)?;
    if out.len() != face_box.num_points() {
        return Err(Error::Incompatible("flux buffer length does not match face box"));
    }
    flux_rows(u, face_box, dir, dx, out);
    Ok(())
}

fn flux_rows(u: &FArrayBox, fb: &IndexBox, dir: usize, dx: f64, out: &mut [f64]) {
    let n = fb.length(0);
    let step = u.strides()[dir];
    let data = u.data();
    let (lo, hi) = (fb.lo(), fb.hi());
    let inv = 1.0 / dx;
    let mut rows = out.chunks_exact_mut(n);
    for k in lo.z()..=hi.z() {
        for j in lo.y()..=hi.y() {
            let o = u.offset_unchecked(IntVect::new(lo.x(), j, k), 0);
            let high = &data[o..o + n];
            let low = &data[o - step..o - step + n];
            let row = rows.next().unwrap();
            for ((f, h), l) in row.iter_mut().zip(high).zip(low) {
                *f = (h - l) * inv;
            }
        }
    }
}

fn check_fluxes(tile: &IndexBox, fluxes: &[FluxView<'_>; 3]) -> Result<()> {
    for (d, f) in fluxes.iter().enumerate() {
        let need = tile.to_face(d)?;
        if !f.fbox.contains_box(&need) || f.data.len() != f.fbox.num_points() {
            return Err(Error::NotContained {
                region: need,
                container: f.fbox,
            });
        }
    }
    Ok(())
}

/// `u_new = u_old + dt D sum_d (F_d(high) - F_d(low)) * (1 / dx_d)` over `tile`.
pub fn heat_divergence_update(
    u_new: &mut FArrayBox,
    u_old: &FArrayBox,
    fluxes: &[FluxView<'_>; 3],
    tile: &IndexBox,
    params: &HeatParams,
) -> Result<()> {
    check_fluxes(tile, fluxes)?;
    for fab in [&*u_new, u_old] {
        if !fab.abox().contains_box(tile) {
            return Err(Error::NotContained {
                region: *tile,
                container: fab.abox(),
            });
        }
    }
    let out = u_new.shared();
    // SAFETY: exclusive borrow of u_new; nothing else aliases it.
    unsafe { divergence_rows(&out, u_old, fluxes, tile, params) };
    Ok(())
}

/// # Safety
/// No other thread may access the cells of `tile` in `out` concurrently.
unsafe fn divergence_rows(
    out: &SharedFab<'_>,
    u_old: &FArrayBox,
    fluxes: &[FluxView<'_>; 3],
    tile: &IndexBox,
    params: &HeatParams,
) {
    let n = tile.length(0);
    let dtd = params.dt * params.diffusivity;
    let [idx, idy, idz] = params.dx.map(|h| 1.0 / h);
    let [fx, fy, fz] = fluxes;
    let fstr = |f: &FluxView<'_>| {
        let [nx, ny, _] = f.fbox.extents();
        (nx, nx * ny)
    };
    let off = |f: &FluxView<'_>, p: IntVect| {
        let (sy, sz) = fstr(f);
        let lo = f.fbox.lo();
        (p.x() - lo.x()) as usize + sy * (p.y() - lo.y()) as usize + sz * (p.z() - lo.z()) as usize
    };
    let (sy_y, _) = fstr(fy);
    let (_, sz_z) = fstr(fz);
    let old = u_old.data();
    for k in tile.lo().z()..=tile.hi().z() {
        for j in tile.lo().y()..=tile.hi().y() {
            let p = IntVect::new(tile.lo().x(), j, k);
            let ox = off(fx, p);
            let oy = off(fy, p);
            let oz = off(fz, p);
            let xl = &fx.data[ox..ox + n];
            let xh = &fx.data[ox + 1..ox + 1 + n];
            let yl = &fy.data[oy..oy + n];
            let yh = &fy.data[oy + sy_y..oy + sy_y + n];
            let zl = &fz.data[oz..oz + n];
            let zh = &fz.data[oz + sz_z..oz + sz_z + n];
            let ou = u_old.offset_unchecked(p, 0);
            let uo = &old[ou..ou + n];
            let un = out.row_mut(p, 0, n);
            for i in 0..n {
                un[i] = uo[i] + dtd * ((xh[i] - xl[i]) * idx + (yh[i] - yl[i]) * idy + (zh[i] - zl[i]) * idz);
            }
        }
    }
}

/// Worker count and per-worker scratch for stepping.
#[derive(Debug)]
pub struct StepContext {
    workers: usize,
    arenas: ArenaPool,
}

impl StepContext {
    pub fn new(workers: usize) -> Self {
        let workers = workers.max(1);
        StepContext {
            workers,
            arenas: ArenaPool::new(workers),
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn arenas(&mut self) -> &mut ArenaPool {
        &mut self.arenas
    }

    /// Sum of every worker's scratch high-water mark.
    pub fn arena_high_water_bytes(&mut self) -> usize {
        self.arenas.total_high_water_bytes()
    }
}

fn check_step(new: &MultiFab, old: &MultiFab, op: Operator) -> Result<()> {
    if !new.same_structure(old) {
        return Err(Error::Incompatible("old and new MultiFabs differ in structure"));
    }
    if old.ncomp() != 1 {
        return Err(Error::Incompatible("kernels operate on single-component data"));
    }
    if old.nghost() < op.ghost_width() {
        return Err(Error::InsufficientGhost {
            needed: op.ghost_width(),
            available: old.nghost(),
        });
    }
    Ok(())
}

fn check_schedule(mf: &MultiFab, schedule: &TileSchedule) -> Result<()> {
    let ok = schedule.entries().iter().all(|e| {
        e.unit < mf.units().len() && mf.unit(e.unit).valid.contains_box(&e.tile)
    });
    if ok {
        Ok(())
    } else {
        Err(Error::Incompatible("schedule was built for a different MultiFab"))
    }
}

/// One forward-Euler heat step with tile-level threading. Reads `old`
/// (ghosts must be filled), writes the valid cells of `new`.
pub fn heat_step(
    new: &mut MultiFab,
    old: &MultiFab,
    params: &HeatParams,
    schedule: &TileSchedule,
    ctx: &mut StepContext,
) -> Result<()> {
    check_step(new, old, Operator::Heat)?;
    check_schedule(old, schedule)?;
    let outs = new.shared_units();
    let workers = ctx.workers;
    parallel_for_tiles_with_arena::<Error, _>(schedule, workers, &mut ctx.arenas, |tile, arena| {
        let t = tile.tilebox();
        let u = &old.unit(tile.unit()).fab;
        let fb = [t.to_face(0)?, t.to_face(1)?, t.to_face(2)?];
        let [fx, fy, fz] = arena.acquire_many(fb.map(|b| b.num_points()));
        flux_rows(u, &fb[0], 0, params.dx[0], fx);
        flux_rows(u, &fb[1], 1, params.dx[1], fy);
        flux_rows(u, &fb[2], 2, params.dx[2], fz);
        let views = [
            FluxView { fbox: fb[0], data: fx },
            FluxView { fbox: fb[1], data: fy },
            FluxView { fbox: fb[2], data: fz },
        ];
        // SAFETY: tiles of a schedule are disjoint, so no other worker
        // touches these cells of the destination unit.
        unsafe { divergence_rows(&outs[tile.unit()], u, &views, &t, params) };
        Ok(())
    })
}

/// Splits `buf` into consecutive pieces of the given lengths.
fn split_lengths(mut buf: &mut [f64], lens: impl Iterator<Item = usize>) -> Vec<Mutex<&mut [f64]>> {
    lens.map(|len| {
        let (head, tail) = std::mem::take(&mut buf).split_at_mut(len);
        buf = tail;
        Mutex::new(head)
    })
    .collect()
}

/// Box restricted to z-planes `range` (relative to its low z).
fn z_slab(b: &IndexBox, range: std::ops::Range<usize>) -> IndexBox {
    let z0 = b.lo().z();
    b.with_lo(2, z0 + range.start as i32)
        .with_hi(2, z0 + range.end as i32 - 1)
}

/// One heat step with loop-level threading: each unit is processed whole,
/// and each of its four loops is split over z planes across workers.
pub fn heat_step_loop_level(new: &mut MultiFab, old: &MultiFab, params: &HeatParams, ctx: &mut StepContext) -> Result<()> {
    check_step(new, old, Operator::Heat)?;
    let workers = ctx.workers;
    ctx.arenas.ensure(1);
    let outs = new.shared_units();
    let mut arena = ctx.arenas.arena(0)?;
    for (u, unit) in old.units().iter().enumerate() {
        let t = unit.valid;
        let fb = [t.to_face(0)?, t.to_face(1)?, t.to_face(2)?];
        arena.reset();
        let [fx, fy, fz] = arena.acquire_many(fb.map(|b| b.num_points()));
        for (d, flux) in [fx, fy, fz].into_iter().enumerate() {
            let plane = fb[d].length(0) * fb[d].length(1);
            let nplanes = fb[d].length(2);
            let ranges: Vec<_> = (0..workers).map(|w| partition(nplanes, workers, w)).collect();
            let chunks = split_lengths(flux, ranges.iter().map(|r| r.len() * plane));
            run_workers(workers, |w| {
                if ranges[w].is_empty() {
                    return;
                }
                let mut chunk = chunks[w].lock().unwrap();
                flux_rows(&unit.fab, &z_slab(&fb[d], ranges[w].clone()), d, params.dx[d], &mut chunk);
            });
        }
        // re-borrow the three flux arrays immutably for the divergence loop
        let total: usize = fb.iter().map(|b| b.num_points()).sum();
        let all = arena.acquire(total);
        let (fx, rest) = all.split_at(fb[0].num_points());
        let (fy, fz) = rest.split_at(fb[1].num_points());
        let views = [
            FluxView { fbox: fb[0], data: fx },
            FluxView { fbox: fb[1], data: fy },
            FluxView { fbox: fb[2], data: fz },
        ];
        let out = &outs[u];
        let nz = t.length(2);
        run_workers(workers, |w| {
            let r = partition(nz, workers, w);
            if r.is_empty() {
                return;
            }
            // SAFETY: z-slabs assigned to different workers are disjoint.
            unsafe { divergence_rows(out, &unit.fab, &views, &z_slab(&t, r), params) };
        });
    }
    arena.reset();
    Ok(())
}

/// `u_new = u_old + dt D sum_d (sum_m w_m u(x + m e_d)) / dx_d^2` over `tile`.
///
/// # Safety
/// No other thread may access the cells of `tile` in `out` concurrently.
unsafe fn wide4_rows(out: &SharedFab<'_>, u: &FArrayBox, tile: &IndexBox, params: &HeatParams, c: &StencilCoeffs8) {
    let n = tile.length(0);
    let dtd = params.dt * params.diffusivity;
    let inv = params.dx.map(|h| 1.0 / (h * h));
    let [c0, c1, c2, c3, c4] = c.0;
    let st = u.strides();
    let data = u.data();
    let row = |o: usize| &data[o..o + n];
    for k in tile.lo().z()..=tile.hi().z() {
        for j in tile.lo().y()..=tile.hi().y() {
            let p = IntVect::new(tile.lo().x(), j, k);
            let o = u.offset_unchecked(p, 0);
            let u0 = row(o);
            // neighbours at distance m along each direction
            let nb = |s: usize, m: usize| (row(o - m * s), row(o + m * s));
            let (xm1, xp1) = nb(st[0], 1);
            let (xm2, xp2) = nb(st[0], 2);
            let (xm3, xp3) = nb(st[0], 3);
            let (xm4, xp4) = nb(st[0], 4);
            let (ym1, yp1) = nb(st[1], 1);
            let (ym2, yp2) = nb(st[1], 2);
            let (ym3, yp3) = nb(st[1], 3);
            let (ym4, yp4) = nb(st[1], 4);
            let (zm1, zp1) = nb(st[2], 1);
            let (zm2, zp2) = nb(st[2], 2);
            let (zm3, zp3) = nb(st[2], 3);
            let (zm4, zp4) = nb(st[2], 4);
            let un = out.row_mut(p, 0, n);
            for i in 0..n {
                let lx = c0 * u0[i]
                    + c1 * (xm1[i] + xp1[i])
                    + c2 * (xm2[i] + xp2[i])
                    + c3 * (xm3[i] + xp3[i])
                    + c4 * (xm4[i] + xp4[i]);
                let ly = c0 * u0[i]
                    + c1 * (ym1[i] + yp1[i])
                    + c2 * (ym2[i] + yp2[i])
                    + c3 * (ym3[i] + yp3[i])
                    + c4 * (ym4[i] + yp4[i]);
                let lz = c0 * u0[i]
                    + c1 * (zm1[i] + zp1[i])
                    + c2 * (zm2[i] + zp2[i])
                    + c3 * (zm3[i] + zp3[i])
                    + c4 * (zm4[i] + zp4[i]);
                un[i] = u0[i] + dtd * (lx * inv[0] + ly * inv[1] + lz * inv[2]);
            }
        }
    }
}

/// One forward-Euler step of the 8th-order Laplacian with tile-level threading.
pub fn wide4_step(
    new: &mut MultiFab,
    old: &MultiFab,
    params: &HeatParams,
    coeffs: &StencilCoeffs8,
    schedule: &TileSchedule,
    ctx: &mut StepContext,
) -> Result<()> {
    check_step(new, old, Operator::Wide4(*coeffs))?;
    check_schedule(old, schedule)?;
    let outs = new.shared_units();
    crate::iter::parallel_for_tiles::<Error, _>(schedule, ctx.workers, |tile, _| {
        let t = tile.tilebox();
        // SAFETY: tiles of a schedule are disjoint.
        unsafe { wide4_rows(&outs[tile.unit()], &old.unit(tile.unit()).fab, &t, params, coeffs) };
        Ok(())
    })
}

/// Loop-level variant of [`wide4_step`]: units in turn, z planes split over workers.
pub fn wide4_step_loop_level(
    new: &mut MultiFab,
    old: &MultiFab,
    params: &HeatParams,
    coeffs: &StencilCoeffs8,
    ctx: &mut StepContext,
) -> Result<()> {
    check_step(new, old, Operator::Wide4(*coeffs))?;
    let workers = ctx.workers;
    let outs = new.shared_units();
    for (u, unit) in old.units().iter().enumerate() {
        let t = unit.valid;
        let out = &outs[u];
        run_workers(workers, |w| {
            let r = partition(t.length(2), workers, w);
            if r.is_empty() {
                return;
            }
            // SAFETY: z-slabs assigned to different workers are disjoint.
            unsafe { wide4_rows(out, &unit.fab, &z_slab(&t, r), params, coeffs) };
        });
    }
    Ok(())
}

/// How a step is threaded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Threading {
    /// Whole tiles per worker.
    Tile,
    /// Outer spatial loop split per worker, no tiling.
    Loop,
}

/// Dispatches one step of `op` with the requested threading.
pub fn step(
    op: &Operator,
    threading: Threading,
    new: &mut MultiFab,
    old: &MultiFab,
    params: &HeatParams,
    schedule: &TileSchedule,
    ctx: &mut StepContext,
) -> Result<()> {
    match (op, threading) {
        (Operator::Heat, Threading::Tile) => heat_step(new, old, params, schedule, ctx),
        (Operator::Heat, Threading::Loop) => heat_step_loop_level(new, old, params, ctx),
        (Operator::Wide4(c), Threading::Tile) => wide4_step(new, old, params, c, schedule, ctx),
        (Operator::Wide4(c), Threading::Loop) => wide4_step_loop_level(new, old, params, c, ctx),
    }
}
