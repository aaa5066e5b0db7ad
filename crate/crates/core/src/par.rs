//! Row-parallel loops. Every kernel writes disjoint rows, so results do not
//! depend on the number of worker threads. Reductions stay sequential.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Calls `f(j, row)` for each `row_len`-sized chunk of `out`.
pub fn rows_mut<F>(out: &mut [f64], row_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    out.par_chunks_mut(row_len)
        .enumerate()
        .with_min_len(8)
        .for_each(|(j, row)| f(j, row));
    #[cfg(not(feature = "parallel"))]
    out.chunks_mut(row_len)
        .enumerate()
        .for_each(|(j, row)| f(j, row));
}

/// Fills `out[k] = f(k)` elementwise.
pub fn fill<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    out.par_iter_mut()
        .with_min_len(512)
        .enumerate()
        .for_each(|(k, o)| *o = f(k));
    #[cfg(not(feature = "parallel"))]
    out.iter_mut().enumerate().for_each(|(k, o)| *o = f(k));
}

/// Runs `f` on a pool capped at `threads` workers (0 means the default pool).
pub fn with_threads<R: Send, F: FnOnce() -> R + Send>(threads: usize, f: F) -> R {
    #[cfg(feature = "parallel")]
    {
        if threads > 0 {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                return pool.install(f);
            }
        }
        f()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

/// Thread cap from the `NEMEL_THREADS` environment variable, 0 when unset.
pub fn threads_from_env() -> usize {
    std::env::var("NEMEL_THREADS")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(0)
}

/// Sequential dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Compensated (Neumaier) sum in index order.
pub fn sum_compensated(a: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for &x in a {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}
