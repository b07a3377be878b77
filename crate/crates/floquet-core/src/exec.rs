//! Replicate-level execution: data-parallel over seeds via rayon when the
//! `parallel` feature is on, plain sequential otherwise. Results come back
//! in seed order either way, so aggregation is deterministic.

use crate::error::Result;

/// Run one closure per seed, preserving input order.
///
/// `workers` picks the rayon pool size; `None` uses the global pool. The
/// sequential build ignores `workers`.
#[cfg(feature = "parallel")]
pub fn run_replicates<T, F>(seeds: &[u64], workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    use rayon::prelude::*;
    match workers {
        Some(w) if w > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .expect("failed to build worker pool");
            pool.install(|| seeds.par_iter().map(|&s| f(s)).collect())
        }
        _ => seeds.par_iter().map(|&s| f(s)).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn run_replicates<T, F>(seeds: &[u64], _workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    seeds.iter().map(|&s| f(s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_seed_order() {
        let seeds: Vec<u64> = (0..64).collect();
        let out = run_replicates(&seeds, Some(4), |s| Ok(s * 2)).unwrap();
        assert_eq!(out, seeds.iter().map(|s| s * 2).collect::<Vec<_>>());
    }

    #[test]
    fn propagates_errors() {
        let seeds = [1u64, 2, 3];
        let res: Result<Vec<u64>> = run_replicates(&seeds, None, |s| {
            if s == 2 {
                Err(crate::CoreError::ZeroVector)
            } else {
                Ok(s)
            }
        });
        assert!(res.is_err());
    }
}
