//! Fixed-size worker teams and per-worker scratch arenas.
//!
//! With the `parallel` feature, `run_workers` fans out onto a rayon pool
//! sized to the requested worker count (pools are cached per size). Without
//! it, workers run one after another on the calling thread. Either way the
//! work assigned to a worker id is the same, so results do not depend on
//! the backend.

use std::sync::{Mutex, MutexGuard, TryLockError};

use crate::error::{Error, Result};

#[cfg(feature = "parallel")]
mod pool {
    use std::collections::HashMap;
    use std::sync::{Arc, Mutex, OnceLock};

    use rayon::{ThreadPool, ThreadPoolBuilder};

    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<ThreadPool>>>> = OnceLock::new();

    pub(super) fn get(workers: usize) -> Arc<ThreadPool> {
        let mut pools = POOLS.get_or_init(Default::default).lock().unwrap();
        pools
            .entry(workers)
            .or_insert_with(|| {
                Arc::new(
                    ThreadPoolBuilder::new()
                        .num_threads(workers)
                        .thread_name(move |i| format!("tilemesh-{workers}-{i}"))
                        .build()
                        .expect("failed to build worker pool"),
                )
            })
            .clone()
    }
}

/// Runs `body(worker_id)` once for every id in `0..workers` and joins.
/// A panic in any worker is re-raised after all workers finish.
pub fn run_workers<F>(workers: usize, body: F)
where
    F: Fn(usize) + Sync,
{
    let workers = workers.max(1);
    if workers == 1 {
        body(0);
        return;
    }
    #[cfg(feature = "parallel")]
    {
        let pool = pool::get(workers);
        let body = &body;
        pool.scope(|s| {
            for w in 0..workers {
                s.spawn(move |_| body(w));
            }
        });
    }
    #[cfg(not(feature = "parallel"))]
    for w in 0..workers {
        body(w);
    }
}

/// Like [`run_workers`], returning the first error in worker-id order.
pub fn try_run_workers<E, F>(workers: usize, body: F) -> std::result::Result<(), E>
where
    E: Send,
    F: Fn(usize) -> std::result::Result<(), E> + Sync,
{
    let workers = workers.max(1);
    let results: Vec<Mutex<Option<E>>> = (0..workers).map(|_| Mutex::new(None)).collect();
    run_workers(workers, |w| {
        if let Err(e) = body(w) {
            *results[w].lock().unwrap() = Some(e);
        }
    });
    match results.into_iter().find_map(|m| m.into_inner().unwrap()) {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Number of hardware threads, at least one.
pub fn available_workers() -> usize {
    std::thread::available_parallelism().map(usize::from).unwrap_or(1)
}

/// Static contiguous split of `n` items over `workers`; the first
/// `n % workers` workers get one extra item.
pub fn partition(n: usize, workers: usize, worker: usize) -> std::ops::Range<usize> {
    assert!(workers >= 1 && worker < workers, "worker {worker} of {workers}");
    let base = n / workers;
    let extra = n % workers;
    let start = worker * base + worker.min(extra);
    let len = base + usize::from(worker < extra);
    start..start + len
}

/// Reusable scratch memory owned by one worker.
///
/// `acquire` hands out the front of a buffer that only ever grows, so a
/// steady sequence of same-sized requests stops allocating after the first.
#[derive(Debug, Default)]
pub struct Arena {
    buf: Vec<f64>,
    in_use: usize,
    high_water: usize,
    grows: usize,
}

impl Arena {
    pub fn new() -> Self {
        Self::default()
    }

    /// Scratch slice of `len` values. Contents are unspecified.
    pub fn acquire(&mut self, len: usize) -> &mut [f64] {
        if len > self.buf.len() {
            self.buf.resize(len, 0.0);
            self.grows += 1;
        }
        self.in_use = len;
        self.high_water = self.high_water.max(len);
        &mut self.buf[..len]
    }

    /// Several disjoint scratch slices carved from one acquisition.
    pub fn acquire_many<const N: usize>(&mut self, lens: [usize; N]) -> [&mut [f64]; N] {
        let total = lens.iter().sum();
        let mut rest = self.acquire(total);
        lens.map(|len| {
            let (head, tail) = std::mem::take(&mut rest).split_at_mut(len);
            rest = tail;
            head
        })
    }

    pub fn reset(&mut self) {
        self.in_use = 0;
    }

    pub fn in_use_bytes(&self) -> usize {
        self.in_use * std::mem::size_of::<f64>()
    }

    pub fn high_water_bytes(&self) -> usize {
        self.high_water * std::mem::size_of::<f64>()
    }

    pub fn capacity_bytes(&self) -> usize {
        self.buf.len() * std::mem::size_of::<f64>()
    }

    /// How many times the backing buffer had to grow.
    pub fn grow_count(&self) -> usize {
        self.grows
    }
}

/// One [`Arena`] per worker id.
#[derive(Debug, Default)]
pub struct ArenaPool {
    arenas: Vec<Mutex<Arena>>,
}

impl ArenaPool {
    pub fn new(workers: usize) -> Self {
        ArenaPool {
            arenas: (0..workers.max(1)).map(|_| Mutex::new(Arena::new())).collect(),
        }
    }

    pub fn workers(&self) -> usize {
        self.arenas.len()
    }

    /// Grows the pool to at least `workers` arenas.
    pub fn ensure(&mut self, workers: usize) {
        while self.arenas.len() < workers {
            self.arenas.push(Mutex::new(Arena::new()));
        }
    }

    /// Exclusive access to the arena of `worker`. Fails if another holder
    /// is active, which means the arena escaped its owning worker.
    pub fn arena(&self, worker: usize) -> Result<MutexGuard<'_, Arena>> {
        let slot = self.arenas.get(worker).ok_or(Error::WorkerOutOfRange {
            worker,
            count: self.arenas.len(),
        })?;
        match slot.try_lock() {
            Ok(g) => Ok(g),
            Err(TryLockError::Poisoned(p)) => Ok(p.into_inner()),
            Err(TryLockError::WouldBlock) => Err(Error::ArenaContention { worker }),
        }
    }

    pub fn reset(&self, worker: usize) -> Result<()> {
        self.arena(worker)?.reset();
        Ok(())
    }

    pub fn reset_all(&mut self) {
        for a in &mut self.arenas {
            a.get_mut().unwrap_or_else(|p| p.into_inner()).reset();
        }
    }

    /// Largest high-water mark of any single worker.
    pub fn max_high_water_bytes(&mut self) -> usize {
        self.arenas
            .iter_mut()
            .map(|a| a.get_mut().unwrap_or_else(|p| p.into_inner()).high_water_bytes())
            .max()
            .unwrap_or(0)
    }

    /// Sum of all workers' high-water marks.
    pub fn total_high_water_bytes(&mut self) -> usize {
        self.arenas
            .iter_mut()
            .map(|a| a.get_mut().unwrap_or_else(|p| p.into_inner()).high_water_bytes())
            .sum()
    }
}
