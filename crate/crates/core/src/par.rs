//! Row-parallel helpers. With the `parallel` feature the closures run on the
//! rayon pool; without it, or when `parallel == false`, they run in order.
//! Every row is written by exactly one closure call, so results do not
//! depend on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Calls `f(i, row_i)` for each `width`-sized row of `data`.
pub(crate) fn for_each_row<F>(data: &mut [f64], width: usize, parallel: bool, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if width == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    if parallel {
        data.par_chunks_mut(width)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
        return;
    }
    let _ = parallel;
    data.chunks_mut(width)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
}

/// Calls `f(k, segment_k)` where segment `k` is
/// `data[offsets[k]..offsets[k + 1]]`.
pub(crate) fn for_each_segment<F>(data: &mut [f64], offsets: &[usize], parallel: bool, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    let mut segments = Vec::with_capacity(offsets.len().saturating_sub(1));
    let mut rest = data;
    for w in offsets.windows(2) {
        let (head, tail) = rest.split_at_mut(w[1] - w[0]);
        segments.push(head);
        rest = tail;
    }
    #[cfg(feature = "parallel")]
    if parallel {
        segments
            .into_par_iter()
            .enumerate()
            .for_each(|(k, seg)| f(k, seg));
        return;
    }
    let _ = parallel;
    segments
        .into_iter()
        .enumerate()
        .for_each(|(k, seg)| f(k, seg));
}

/// `(0..n).map(f).collect()`, in parallel when enabled. Output order is
/// always index order.
pub fn map_indices<T, F>(n: usize, parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = parallel;
    (0..n).map(f).collect()
}

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "LOWRANK_THREADS";

/// Sizes the global pool from [`THREADS_ENV`] if it is set. Has no effect
/// once the pool is running, or without the `parallel` feature.
pub fn configure_threads_from_env() -> crate::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        crate::Error::InvalidConfig(format!(
            "{THREADS_ENV} must be a positive integer, got `{raw}`"
        ))
    })?;
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let _ = threads;
    Ok(())
}
