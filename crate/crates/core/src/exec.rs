//! Execution policy for embarrassingly parallel sweeps.
//!
//! Work items are addressed by index and every item derives its own random
//! stream from that index, so results never depend on the schedule.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// `workers = None` uses the global rayon pool.
    Parallel { workers: Option<usize> },
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel { workers: None }
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    pub fn with_workers(workers: usize) -> Self {
        if workers <= 1 {
            Exec::Sequential
        } else {
            Exec::Parallel { workers: Some(workers) }
        }
    }

    /// Evaluate `f(0..n)` and return results in index order.
    pub fn map_indexed<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..n).map(f).collect(),
            Exec::Parallel { workers } => parallel_map(workers, n, f),
        }
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(workers: Option<usize>, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    match workers {
        None => (0..n).into_par_iter().map(f).collect(),
        Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
            Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
            Err(e) => {
                log::warn!("thread pool unavailable ({e}); running sequentially");
                (0..n).map(f).collect()
            }
        },
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(_workers: Option<usize>, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules_agree() {
        let f = |i: usize| (i * i) as u64 % 17;
        let a = Exec::Sequential.map_indexed(1000, f);
        let b = Exec::with_workers(4).map_indexed(1000, f);
        assert_eq!(a, b);
    }
}
