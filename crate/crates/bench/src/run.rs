//! Building, stepping and timing a single configuration.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tilemesh::kernels::{self, StepContext};
use tilemesh::{BoxArray, FillPlan, Geometry, HeatParams, IndexBox, IntVect, MultiFab, TileSchedule};

use crate::config::{Kernel, RunConfig};
use crate::error::BenchError;

/// Fraction of the stability bound used for the time step.
pub const DT_SAFETY: f64 = 0.9;
pub const VERIFY_EXTENT: usize = 32;
pub const VERIFY_STEPS: usize = 10;
/// Amplitude of the seeded perturbation added to the cosine mode.
pub const NOISE_AMPLITUDE: f64 = 1e-3;

pub fn verify_tolerance(kernel: Kernel) -> f64 {
    match kernel {
        Kernel::Heat => 1e-13,
        Kernel::Wide4 => 1e-12,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyResult {
    pub kernel: Kernel,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl VerifyResult {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub config: RunConfig,
    pub kernel_seconds: f64,
    pub fill_seconds: f64,
    pub total_seconds: f64,
    pub kernel_calls: usize,
    pub fill_calls: usize,
    pub checksum: f64,
    pub arena_bytes: usize,
    pub verification: Vec<VerifyResult>,
}

impl RunReport {
    /// Share of the stepping time spent filling ghost cells.
    pub fn fill_fraction(&self) -> f64 {
        let busy = self.fill_seconds + self.kernel_seconds;
        if busy > 0.0 {
            self.fill_seconds / busy
        } else {
            0.0
        }
    }
}

struct State {
    old: MultiFab,
    new: MultiFab,
    plan: FillPlan,
    schedule: TileSchedule,
    params: HeatParams,
    ctx: StepContext,
}

impl State {
    fn build(cfg: &RunConfig) -> Result<Self, BenchError> {
        if cfg.extents.contains(&0) || cfg.max_grid_size == 0 || cfg.workers == 0 {
            return Err(BenchError::Usage("extents, max grid size and workers must be positive".into()));
        }
        let hi = IntVect(cfg.extents.map(|n| n as i32 - 1));
        let domain = IndexBox::new(IntVect::ZERO, hi);
        let geom = Geometry::unit_cube(domain, cfg.periodic)?;
        let ba = BoxArray::chop(&domain, [cfg.max_grid_size; 3])?;
        let op = cfg.kernel.operator();
        let mut old = MultiFab::new(&ba, 1, op.ghost_width(), cfg.layout)?;
        let noise = (cfg.seed != 0).then(|| {
            let mut rng = StdRng::seed_from_u64(cfg.seed);
            (0..domain.num_points())
                .map(|_| NOISE_AMPLITUDE * rng.gen_range(-1.0..1.0))
                .collect::<Vec<f64>>()
        });
        let [nx, ny, _] = cfg.extents;
        old.set_valid(|p, _| {
            let mode = cosine_mode(&geom, p);
            match &noise {
                Some(n) => mode + n[p.x() as usize + nx * (p.y() as usize + ny * p.z() as usize)],
                None => mode,
            }
        });
        let new = MultiFab::like(&old)?;
        let plan = FillPlan::build(&old, &geom)?;
        let schedule = TileSchedule::build_with(&old, cfg.tiling_mode(), &cfg.iter_config())?;
        let params = HeatParams::with_stable_dt(1.0, geom.dx(), op, DT_SAFETY)?;
        if !params.is_stable(op) {
            log::warn!("time step {} exceeds the stability bound", params.dt);
        }
        Ok(State {
            old,
            new,
            plan,
            schedule,
            params,
            ctx: StepContext::new(cfg.workers),
        })
    }

    fn step(&mut self, cfg: &RunConfig, fill: &mut Duration, kernel: &mut Duration) -> Result<(), BenchError> {
        let t = Instant::now();
        self.plan.fill_boundary(&mut self.old, cfg.workers)?;
        *fill += t.elapsed();
        let t = Instant::now();
        kernels::step(
            &cfg.kernel.operator(),
            cfg.threading,
            &mut self.new,
            &self.old,
            &self.params,
            &self.schedule,
            &mut self.ctx,
        )?;
        *kernel += t.elapsed();
        std::mem::swap(&mut self.old, &mut self.new);
        Ok(())
    }
}

/// Product of one cosine period in each direction.
pub fn cosine_mode(geom: &Geometry, p: IntVect) -> f64 {
    (0..3).map(|d| (2.0 * PI * geom.cell_center(d, p[d])).cos()).product()
}

/// Runs `kernel` on a fully periodic 32^3 cosine mode with the threading,
/// tiling and layout of `cfg`, and compares against the closed-form
/// amplification factor raised to the step count.
pub fn verify_kernel(cfg: &RunConfig, kernel: Kernel) -> Result<VerifyResult, BenchError> {
    let vcfg = RunConfig {
        extents: [VERIFY_EXTENT; 3],
        steps: VERIFY_STEPS,
        kernel,
        periodic: [true; 3],
        seed: 0,
        verify: false,
        csv: None,
        ..cfg.clone()
    };
    let mut state = State::build(&vcfg)?;
    let u0 = state.old.clone();
    let (mut fill, mut kern) = (Duration::ZERO, Duration::ZERO);
    for _ in 0..vcfg.steps {
        state.step(&vcfg, &mut fill, &mut kern)?;
    }
    let h = state.params.dx;
    let theta = std::array::from_fn(|d| 2.0 * PI * h[d]);
    let g = kernel.operator().amplification(&state.params, theta);
    let gn = g.powi(vcfg.steps as i32);
    let (mut err, mut scale) = (0.0f64, 0.0f64);
    for gi in 0..u0.boxarray().len() {
        for p in u0.boxarray().get(gi).points() {
            let expect = gn * u0.valid_value(gi, p, 0).expect("point lies in its grid");
            let got = state.old.valid_value(gi, p, 0).expect("point lies in its grid");
            err = err.max((got - expect).abs());
            scale = scale.max(expect.abs());
        }
    }
    Ok(VerifyResult {
        kernel,
        max_rel_error: err / scale,
        tolerance: verify_tolerance(kernel),
    })
}

/// Builds, initializes and steps `cfg`. With `cfg.verify` set both kernels
/// are checked first and a failure aborts before any timing.
pub fn run(cfg: &RunConfig) -> Result<RunReport, BenchError> {
    let mut verification = Vec::new();
    if cfg.verify {
        for kernel in [Kernel::Heat, Kernel::Wide4] {
            let v = verify_kernel(cfg, kernel)?;
            log::info!("verify {}: max relative error {:e}", kernel.name(), v.max_rel_error);
            if !v.passed() {
                return Err(BenchError::Verification {
                    kernel: kernel.name(),
                    max_error: v.max_rel_error,
                    tolerance: v.tolerance,
                });
            }
            verification.push(v);
        }
    }

    let mut state = State::build(cfg)?;
    let (mut fill, mut kern) = (Duration::ZERO, Duration::ZERO);
    let start = Instant::now();
    for _ in 0..cfg.steps {
        state.step(cfg, &mut fill, &mut kern)?;
    }
    let total = start.elapsed();

    Ok(RunReport {
        config: cfg.clone(),
        kernel_seconds: kern.as_secs_f64(),
        fill_seconds: fill.as_secs_f64(),
        total_seconds: total.as_secs_f64(),
        kernel_calls: cfg.steps,
        fill_calls: cfg.steps,
        checksum: state.old.reduce_sum(0)?,
        arena_bytes: state.ctx.arena_high_water_bytes(),
        verification,
    })
}
