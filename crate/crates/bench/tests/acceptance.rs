//! Acceptance suite: one PASS/FAIL/SKIP line per criterion, nonzero exit on
//! any failure. Run with `cargo test -p tilemesh-bench --test acceptance`.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tilemesh::kernels::{self, StepContext};
use tilemesh::{
    available_workers, derive_coeffs8, BoxArray, FillPlan, Geometry, HeatParams, IndexBox, IntVect, Layout,
    MultiFab, Operator, TileSchedule, TileSize, Threading, TilingMode,
};
use tilemesh_bench::{csv_row, csv_string, emit_csv, run, Kernel, RunConfig, RunReport, TileSetting, CSV_HEADER};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Outcome;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn within(limit: Duration, elapsed: Duration, outcome: Outcome) -> Outcome {
    match outcome {
        Outcome::Pass(d) if elapsed > limit => {
            Outcome::Fail(format!("{d}; took {:.1}s, limit {}s", elapsed.as_secs_f64(), limit.as_secs()))
        }
        o => o,
    }
}

fn bx(lo: [i32; 3], hi: [i32; 3]) -> IndexBox {
    IndexBox::new(IntVect(lo), IntVect(hi))
}

fn ts(x: usize, y: usize, z: usize) -> TileSize {
    TileSize::new(x, y, z).unwrap()
}

// 1
fn scheduling_example() -> Outcome {
    let ba = BoxArray::new(vec![
        bx([0, 0, 0], [7, 7, 3]),
        bx([8, 0, 0], [15, 3, 3]),
        bx([16, 0, 0], [23, 3, 3]),
        bx([24, 0, 0], [31, 7, 3]),
    ])
    .unwrap();
    let mf = MultiFab::new(&ba, 1, 1, Layout::Contiguous).unwrap();
    let sched = TileSchedule::build(&mf, TilingMode::Explicit(ts(4, 4, 4))).unwrap();
    let per_grid: Vec<usize> = (0..4).map(|g| sched.entries().iter().filter(|e| e.grid == g).count()).collect();
    if per_grid != [4, 2, 2, 4] {
        return Outcome::Fail(format!("tile counts per grid {per_grid:?}"));
    }
    let got: Vec<Vec<usize>> = (0..4).map(|w| sched.cursor(4, w).map(|t| t.grid()).collect()).collect();
    let want = vec![vec![0, 0, 0], vec![0, 1, 1], vec![2, 2, 3], vec![3, 3, 3]];
    ensure(got == want, format!("grids per worker {got:?}"))
}

// 2
fn tile_cover() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2024);
    let cases = 1200;
    for case in 0..cases {
        let grid = support::random_box_within(&mut rng, 16);
        let tile = TileSize::from_array(std::array::from_fn(|_| rng.gen_range(1..=17))).unwrap();
        let ng = rng.gen_range(0..=2usize);
        let mf = MultiFab::new(&BoxArray::new(vec![grid]).unwrap(), 1, ng, Layout::Contiguous).unwrap();
        let sched = TileSchedule::build(&mf, TilingMode::Explicit(tile)).unwrap();
        let fail = |what: &str, e: String| Outcome::Fail(format!("case {case} grid {grid} tile {tile:?} ng {ng}: {what}: {e}"));
        let tiles: Vec<_> = sched.iter().map(|t| t.tilebox()).collect();
        if let Err(e) = support::check_disjoint_cover(&tiles, &grid) {
            return fail("tilebox", e);
        }
        let grown: Vec<_> = sched.iter().map(|t| t.growntilebox(ng).unwrap()).collect();
        if let Err(e) = support::check_disjoint_cover(&grown, &grid.grow_all(ng as i32)) {
            return fail("growntilebox", e);
        }
        for dir in 0..3 {
            let faces: Vec<_> = sched.iter().map(|t| t.nodaltilebox(dir).unwrap()).collect();
            if let Err(e) = support::check_disjoint_cover(&faces, &grid.to_face(dir).unwrap()) {
                return fail(&format!("nodaltilebox({dir})"), e);
            }
        }
    }
    Outcome::Pass(format!("{cases} random grid/tile-size pairs, zero failures"))
}

// 3
fn ghost_fill_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(33);
    let cases = 240;
    let mut cells = 0;
    for case in 0..cases {
        let ext = IntVect(std::array::from_fn(|_| rng.gen_range(1..=16)));
        let domain = IndexBox::new(IntVect::ZERO, ext - IntVect::UNIT);
        let periodic = std::array::from_fn(|_| rng.gen_bool(0.5));
        let geom = Geometry::unit_cube(domain, periodic).unwrap();
        let ba = support::random_boxarray(&mut rng, &domain, 0.8);
        let nghost = [1, 2, 4][case % 3];
        let layout = if rng.gen_bool(0.3) {
            Layout::Regional(TileSize::from_array(std::array::from_fn(|_| rng.gen_range(2..=8))).unwrap())
        } else {
            Layout::Contiguous
        };
        let mut before = MultiFab::new(&ba, 2, nghost, layout).unwrap();
        before.set_all(-7.5);
        before.set_valid(support::tag_value);
        let plan = FillPlan::build(&before, &geom).unwrap();
        let mut after = before.clone();
        plan.fill_boundary(&mut after, 1 + case % 4).unwrap();
        if let Err(e) = support::check_ghost_fill(&before, &after, &geom) {
            return Outcome::Fail(format!("case {case} ({} grids, periodic {periodic:?}, ng {nghost}): {e}", ba.len()));
        }
        cells += plan.num_ghost_cells();
    }
    Outcome::Pass(format!("{cases} random BoxArrays, {cells} filled ghost cells, zero failures"))
}

struct Level {
    geom: Geometry,
    old: MultiFab,
    new: MultiFab,
    plan: FillPlan,
}

fn level(n: i32, max_grid: usize, ng: usize, init: impl Fn(&Geometry, IntVect) -> f64) -> Level {
    let domain = IndexBox::cube(0, n - 1);
    let geom = Geometry::unit_cube(domain, [true; 3]).unwrap();
    let ba = BoxArray::chop(&domain, [max_grid; 3]).unwrap();
    let mut old = MultiFab::new(&ba, 1, ng, Layout::Contiguous).unwrap();
    old.set_valid(|p, _| init(&geom, p));
    let new = MultiFab::like(&old).unwrap();
    let plan = FillPlan::build(&old, &geom).unwrap();
    Level { geom, old, new, plan }
}

fn advance(l: &mut Level, op: &Operator, params: &HeatParams, mode: TilingMode, workers: usize, steps: usize) {
    let sched = TileSchedule::build(&l.old, mode).unwrap();
    let mut ctx = StepContext::new(workers);
    for _ in 0..steps {
        l.plan.fill_boundary(&mut l.old, workers).unwrap();
        kernels::step(op, Threading::Tile, &mut l.new, &l.old, params, &sched, &mut ctx).unwrap();
        std::mem::swap(&mut l.old, &mut l.new);
    }
}

fn cosine_mode(geom: &Geometry, p: IntVect) -> f64 {
    (0..3).map(|d| (2.0 * PI * geom.cell_center(d, p[d])).cos()).product()
}

fn grid_values(mf: &MultiFab) -> Vec<f64> {
    (0..mf.boxarray().len())
        .flat_map(|g| {
            let grid = mf.boxarray().get(g);
            grid.points().map(move |p| mf.valid_value(g, p, 0).unwrap()).collect::<Vec<_>>()
        })
        .collect()
}

// 4
fn heat_correctness() -> Outcome {
    let mut l = level(32, 16, 1, cosine_mode);
    let u0 = grid_values(&l.old);
    let params = HeatParams::with_stable_dt(1.0, l.geom.dx(), Operator::Heat, 0.9).unwrap();
    // discrete symbol of the 3-point second difference, per direction
    let h = l.geom.dx()[0];
    let g = 1.0 - 3.0 * (2.0 * params.diffusivity * params.dt / (h * h)) * (1.0 - (2.0 * PI * h).cos());
    advance(&mut l, &Operator::Heat, &params, TilingMode::Explicit(ts(32, 4, 4)), available_workers(), 10);
    let g10 = g.powi(10);
    let got = grid_values(&l.old);
    let scale = u0.iter().fold(0.0f64, |m, v| m.max((g10 * v).abs()));
    let err = u0.iter().zip(&got).fold(0.0f64, |m, (a, b)| m.max((g10 * a - b).abs())) / scale;

    let mut rng = StdRng::seed_from_u64(4);
    let noise: Vec<f64> = (0..32 * 32 * 32).map(|_| rng.gen_range(0.0..0.5)).collect();
    let mut c = level(32, 16, 1, |geom, p| {
        2.0 + cosine_mode(geom, p) + noise[(p.x() + 32 * (p.y() + 32 * p.z())) as usize]
    });
    let mut drift = 0.0f64;
    for _ in 0..10 {
        let before = c.old.reduce_sum(0).unwrap();
        advance(&mut c, &Operator::Heat, &params, TilingMode::Default, available_workers(), 1);
        let after = c.old.reduce_sum(0).unwrap();
        drift = drift.max((after - before).abs() / before.abs());
    }
    ensure(
        err <= 1e-13 && drift <= 1e-11,
        format!("max relative error vs g^10 {err:.3e} (limit 1e-13); max relative sum change per step {drift:.3e} (limit 1e-11)"),
    )
}

/// Exact weights of the 9-point second-derivative stencil from the full
/// moment system `sum_m w_m m^p = 2 [p == 2]`, p = 0..8, by rational
/// Gauss-Jordan elimination.
fn exact_weights() -> Vec<Ratio<i128>> {
    let n = 9;
    let mut a: Vec<Vec<Ratio<i128>>> = (0..n)
        .map(|p| {
            let mut row: Vec<_> = (0..n).map(|m| Ratio::from_integer((m as i128 - 4).pow(p as u32))).collect();
            row.push(Ratio::from_integer(if p == 2 { 2 } else { 0 }));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| a[r][col] != Ratio::from_integer(0)).expect("nonsingular");
        a.swap(col, piv);
        let inv = a[col][col].recip();
        for v in a[col].iter_mut() {
            *v *= inv;
        }
        for r in 0..n {
            if r != col && a[r][col] != Ratio::from_integer(0) {
                let f = a[r][col];
                let pivot_row = a[col].clone();
                for (v, pv) in a[r].iter_mut().zip(pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    a.into_iter().map(|row| row[n]).collect()
}

fn wide4_laplacian_error(n: i32) -> f64 {
    let mut l = level(n, n as usize, 4, cosine_mode);
    let u0 = grid_values(&l.old);
    // D dt = 1: one step adds exactly the discrete Laplacian
    let params = HeatParams::new(1.0, 1.0, l.geom.dx()).unwrap();
    advance(&mut l, &Operator::wide4(), &params, TilingMode::Off, 1, 1);
    let k2 = 3.0 * (2.0 * PI).powi(2);
    let got = grid_values(&l.old);
    u0.iter().zip(&got).fold(0.0f64, |m, (u, v)| m.max((v - u + k2 * u).abs())) / k2
}

// 5
fn wide_stencil_order() -> Outcome {
    let exact = exact_weights();
    let derived = derive_coeffs8().full();
    let coeff_err = derived
        .iter()
        .zip(&exact)
        .fold(0.0f64, |m, (d, e)| m.max((d - *e.numer() as f64 / *e.denom() as f64).abs()));
    let (coarse, fine) = (wide4_laplacian_error(16), wide4_laplacian_error(32));
    let order = (coarse / fine).log2();
    ensure(
        coeff_err <= 1e-12 && order >= 7.5,
        format!("coefficient error {coeff_err:.2e} (limit 1e-12); order {order:.2} (limit 7.5) from {coarse:.2e} -> {fine:.2e}"),
    )
}

// 6
fn transparency() -> Outcome {
    let max = available_workers();
    let mut workers = vec![1, 4, max];
    workers.sort_unstable();
    workers.dedup();
    let tiles = [TileSetting::Off, TileSetting::Size(ts(128, 4, 4)), TileSetting::Size(ts(32, 8, 8))];
    let layouts = [Layout::Contiguous, Layout::Regional(ts(64, 64, 64)), Layout::Regional(ts(32, 32, 64))];
    let mut runs = 0;
    for kernel in [Kernel::Heat, Kernel::Wide4] {
        let base = RunConfig {
            extents: [64; 3],
            max_grid_size: 64,
            steps: 20,
            kernel,
            seed: 6,
            ..RunConfig::default()
        };
        let mut reference: Option<(f64, String)> = None;
        let mut variants = Vec::new();
        for &layout in &layouts {
            for &w in &workers {
                for &tile in &tiles {
                    variants.push(RunConfig { layout, workers: w, tile, threading: Threading::Tile, ..base.clone() });
                }
                variants.push(RunConfig { layout, workers: w, tile: TileSetting::Off, threading: Threading::Loop, ..base.clone() });
            }
        }
        for cfg in variants {
            let sum = run(&cfg).unwrap().checksum;
            runs += 1;
            let label = format!("{cfg:?}");
            match &reference {
                None => reference = Some((sum, label)),
                Some((r, first)) if r.to_bits() != sum.to_bits() => {
                    return Outcome::Fail(format!("{} checksum {sum:e} differs from {r:e}\n  {label}\n  vs {first}", kernel.name()));
                }
                Some(_) => {}
            }
        }
    }
    Outcome::Pass(format!("{runs} runs, workers {workers:?}, checksums bitwise identical per kernel"))
}

fn kernel_seconds(tile: TileSetting, threading: Threading, workers: usize) -> f64 {
    let cfg = RunConfig {
        extents: [128; 3],
        max_grid_size: 128,
        steps: 1000,
        kernel: Kernel::Heat,
        tile,
        threading,
        workers,
        ..RunConfig::default()
    };
    run(&cfg).unwrap().kernel_seconds
}

// 7
fn serial_tiling_benefit() -> Outcome {
    let untiled = kernel_seconds(TileSetting::Off, Threading::Tile, 1);
    let tiled = kernel_seconds(TileSetting::Size(ts(128, 4, 4)), Threading::Tile, 1);
    let ratio = untiled / tiled;
    ensure(
        ratio >= 1.2,
        format!("untiled {untiled:.2}s / tiled 128x4x4 {tiled:.2}s = {ratio:.2}x (gate 1.2x)"),
    )
}

// 8
fn thread_scaling_benefit() -> Outcome {
    let cores = available_workers();
    if cores < 8 {
        return Outcome::Skip(format!("needs at least 8 cores, found {cores}"));
    }
    let tile = TileSetting::Size(ts(128, 4, 4));
    let one = kernel_seconds(tile, Threading::Tile, 1);
    let eight = kernel_seconds(tile, Threading::Tile, 8);
    let looped = kernel_seconds(TileSetting::Off, Threading::Loop, 8);
    ensure(
        one / eight >= 4.0 && eight <= looped,
        format!("8-worker tiled speedup {:.2}x (gate 4x); 8-worker tiled {eight:.2}s vs loop-level {looped:.2}s", one / eight),
    )
}

// 9
fn csv_reporting() -> Outcome {
    let report = RunReport {
        config: RunConfig {
            tile: TileSetting::Size(ts(128, 4, 4)),
            workers: 12,
            ..RunConfig::default()
        },
        kernel_seconds: 12.3456789,
        fill_seconds: 0.000123456789,
        total_seconds: 12.5,
        kernel_calls: 1000,
        fill_calls: 1000,
        checksum: 0.1,
        arena_bytes: 50688,
        verification: Vec::new(),
    };
    let loop_report = RunReport {
        config: RunConfig {
            tile: TileSetting::Off,
            threading: Threading::Loop,
            layout: Layout::Regional(ts(64, 64, 64)),
            kernel: Kernel::Wide4,
            workers: 1,
            steps: 20,
            ..RunConfig::default()
        },
        kernel_seconds: 1234567.0,
        fill_seconds: 2.0,
        total_seconds: 1234570.0,
        checksum: -1.0 / 3.0,
        arena_bytes: 0,
        ..report.clone()
    };
    let golden = "kernel,layout,threading,threads,tile_x,tile_y,tile_z,steps,kernel_seconds,fill_seconds,total_seconds,checksum,arena_bytes\n\
heat,contiguous,tile,12,128,4,4,1000,12.3457,0.000123457,12.5,0.10000000000000001,50688\n\
wide4,regional,loop,1,0,0,0,20,1.23457e+06,2,1.23457e+06,-0.33333333333333331,0\n";
    let text = csv_string(&[report, loop_report]).unwrap();
    if text != golden {
        return Outcome::Fail(format!("CSV bytes differ:\n{text}"));
    }
    if csv_string(&[]).is_ok() {
        return Outcome::Fail("empty report list accepted".into());
    }

    // a real run written to disk must expose both timing columns
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    let cfg = RunConfig { extents: [16; 3], max_grid_size: 8, steps: 3, workers: 2, ..RunConfig::default() };
    let r = run(&cfg).unwrap();
    emit_csv(std::slice::from_ref(&r), &path).unwrap();
    let written = std::fs::read_to_string(&path).unwrap();
    let mut lines = written.lines();
    let header: Vec<_> = lines.next().unwrap().split(',').collect();
    let row: Vec<_> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| -> f64 { row[header.iter().position(|h| *h == name).unwrap()].parse().unwrap() };
    let (fill, kern) = (col("fill_seconds"), col("kernel_seconds"));
    let fraction = fill / (fill + kern);
    ensure(
        header.join(",") == CSV_HEADER
            && lines.next().is_none()
            && written.ends_with(&format!("{}\n", csv_row(&r)))
            && (0.0..=1.0).contains(&fraction),
        format!("golden bytes match; fill fraction of a 16^3 run {fraction:.3}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Check, Option<u64>); 9] = [
        ("scheduling example", scheduling_example, Some(1)),
        ("tile-cover properties", tile_cover, Some(30)),
        ("ghost-fill oracle", ghost_fill_oracle, Some(60)),
        ("heat correctness", heat_correctness, Some(5)),
        ("wide-stencil order", wide_stencil_order, Some(10)),
        ("tiling/threading/layout transparency", transparency, Some(60)),
        ("serial tiling benefit", serial_tiling_benefit, None),
        ("thread-scaling benefit", thread_scaling_benefit, None),
        ("fill-time fraction reporting", csv_reporting, Some(1)),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.into_iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::Fail(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match limit {
            Some(s) => within(Duration::from_secs(s), elapsed, outcome),
            None => outcome,
        };
        let secs = elapsed.as_secs_f64();
        match outcome {
            Outcome::Pass(d) => println!("criterion {n} ({name}): PASS [{secs:.2}s] {d}"),
            Outcome::Skip(d) => println!("criterion {n} ({name}): SKIP [{secs:.2}s] {d}"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("criterion {n} ({name}): FAIL [{secs:.2}s] {d}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
