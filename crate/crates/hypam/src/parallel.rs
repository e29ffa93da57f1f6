//! Replicate-range parallelism. Each replicate draws from its own (seed, index)
//! stream, so splitting `0..n` into contiguous chunks and concatenating the chunk
//! results in order gives the same answer for any worker count.

use std::ops::Range;
use std::thread;

/// Splits `0..n` into at most `workers` contiguous ranges.
pub fn chunks(n: u64, workers: usize) -> Vec<Range<u64>> {
    let w = (workers.max(1) as u64).min(n.max(1));
    let base = n / w;
    let extra = n % w;
    let mut out = Vec::with_capacity(w as usize);
    let mut lo = 0;
    for i in 0..w {
        let len = base + u64::from(i < extra);
        out.push(lo..lo + len);
        lo += len;
    }
    out
}

/// Runs `f` on each chunk of `0..n` on its own thread; results come back in chunk order.
pub fn map_chunks<T, F>(n: u64, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<u64>) -> T + Sync,
{
    let parts = chunks(n, workers);
    if parts.len() == 1 {
        return parts.into_iter().map(&f).collect();
    }
    thread::scope(|s| {
        let handles: Vec<_> = parts.into_iter().map(|r| s.spawn(|| f(r))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

/// Concatenates per-chunk vectors (fallible).
pub fn collect_chunks<T, E, F>(n: u64, workers: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(Range<u64>) -> Result<Vec<T>, E> + Sync,
{
    let mut out = Vec::with_capacity(n as usize);
    for part in map_chunks(n, workers, f) {
        out.extend(part?);
    }
    Ok(out)
}

pub fn default_workers() -> usize {
    thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_cover_in_order() {
        for (n, w) in [(10, 3), (2, 8), (0, 4), (7, 1)] {
            let c = chunks(n, w);
            assert_eq!(c.first().unwrap().start, 0);
            assert_eq!(c.last().unwrap().end, n);
            assert!(c.windows(2).all(|p| p[0].end == p[1].start));
        }
    }

    #[test]
    fn results_independent_of_workers() {
        let f = |r: Range<u64>| -> Result<Vec<u64>, ()> { Ok(r.map(|k| k * k).collect()) };
        assert_eq!(
            collect_chunks(100, 1, f).unwrap(),
            collect_chunks(100, 7, f).unwrap()
        );
    }
}
