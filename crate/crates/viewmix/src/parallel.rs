use rayon::prelude::*;
use viewmix_core::multiview::generate_batch_on;
use viewmix_core::{Dataset, Executor, MultiViewConfig, ViewBatch};

use crate::error::{Error, Result};

/// [`Executor`] backed by a dedicated rayon pool of fixed size.
pub struct RayonExecutor {
    pool: rayon::ThreadPool,
    threads: usize,
}

impl RayonExecutor {
    pub fn new(threads: usize) -> Result<Self> {
        if threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Other(format!("cannot start thread pool: {e}")))?;
        Ok(Self { pool, threads })
    }

    pub fn threads(&self) -> usize {
        self.threads
    }
}

impl Executor for RayonExecutor {
    fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..len).into_par_iter().map(f).collect())
    }
}

pub fn generate_batch_parallel(
    exec: &RayonExecutor,
    dataset: &Dataset,
    indices: &[usize],
    cfg: &MultiViewConfig,
    seed: u64,
    step: u64,
) -> Result<Vec<ViewBatch>> {
    Ok(generate_batch_on(exec, dataset, indices, cfg, seed, step)?)
}
