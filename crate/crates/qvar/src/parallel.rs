//! Replicate-parallel Monte Carlo.
//!
//! Each replicate owns its random stream, and rayon's indexed `collect`
//! keeps replicate order, so the output does not depend on the number of
//! worker threads.

use qvar_core::montecarlo::{sample_replicate, Factor};
use rayon::prelude::*;

use crate::{AppError, AppResult};

/// `replicates` values of `V`, in replicate order. `threads = None` uses
/// the global rayon pool.
pub fn sample_v(factor: &Factor, seed: u64, replicates: usize, threads: Option<usize>) -> AppResult<Vec<f64>> {
    let run = || (0..replicates as u64).into_par_iter().map(|r| sample_replicate(factor, seed, r)).collect();
    match threads {
        None => Ok(run()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| AppError::config(format!("thread pool: {e}")))?;
            Ok(pool.install(run))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qvar_core::montecarlo::{factorize, sample_v_replicates, McConfig};
    use qvar_core::CovMatrix;

    #[test]
    fn matches_sequential_for_any_pool() {
        let g = CovMatrix::new(3, vec![2.0, 0.5, 0.1, 0.5, 1.0, 0.2, 0.1, 0.2, 0.5]).unwrap();
        let cfg = McConfig::new(300, 77).unwrap();
        let sequential = sample_v_replicates(&g, &cfg).unwrap();
        let f = factorize(&g, cfg.jitter).unwrap();
        for t in [1, 2, 5] {
            let par = sample_v(&f, 77, 300, Some(t)).unwrap();
            assert!(par.iter().zip(&sequential).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
