//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the helpers dispatch to rayon unless
//! sequential mode has been requested at runtime through [`set_sequential`].
//! Without the feature everything runs on the calling thread.
//!
//! Every helper writes each output element from exactly one closure call and
//! never reduces across workers, so results are bit-identical for any worker
//! count.

use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Forces (or releases) sequential execution for all helpers in this module.
pub fn set_sequential(sequential: bool) {
    FORCE_SEQUENTIAL.store(sequential, Ordering::SeqCst);
}

/// Whether helpers currently dispatch to the rayon pool.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::Relaxed)
}

/// Runs `f` with the given mode, restoring the previous mode afterwards.
pub fn with_sequential<R>(sequential: bool, f: impl FnOnce() -> R) -> R {
    let previous = FORCE_SEQUENTIAL.swap(sequential, Ordering::SeqCst);
    let out = f();
    FORCE_SEQUENTIAL.store(previous, Ordering::SeqCst);
    out
}

/// Configures the global worker pool. Returns `false` when the pool was
/// already initialised (or the crate is built without `parallel`).
pub fn init_threads(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        false
    }
}

/// Calls `f(row, chunk)` for every `width`-sized chunk of `data`.
pub fn rows_mut<F>(data: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if width == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        data.par_chunks_mut(width)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
        return;
    }
    data.chunks_mut(width)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
}

/// Splits `data` at the given CSR-style offsets and calls `f(i, segment)` for
/// every segment `offsets[i]..offsets[i + 1]`.
pub fn segments_mut<T, F>(data: &mut [T], offsets: &[usize], f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let mut parts = Vec::with_capacity(offsets.len().saturating_sub(1));
    let mut rest = data;
    for w in offsets.windows(2) {
        let (head, tail) = rest.split_at_mut(w[1] - w[0]);
        parts.push(head);
        rest = tail;
    }
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        parts
            .into_par_iter()
            .enumerate()
            .for_each(|(i, seg)| f(i, seg));
        return;
    }
    parts.into_iter().enumerate().for_each(|(i, seg)| f(i, seg));
}

/// Calls `f(i, row, segment)` with the `i`-th `width`-sized chunk of `rows`
/// and the `i`-th CSR segment of `segs`.
pub fn rows_segments_mut<F>(
    rows: &mut [f64],
    width: usize,
    segs: &mut [f64],
    offsets: &[usize],
    f: F,
) where
    F: Fn(usize, &mut [f64], &mut [f64]) + Sync + Send,
{
    let count = offsets.len().saturating_sub(1);
    assert_eq!(rows.len(), count * width, "row count matches segment count");
    let mut parts = Vec::with_capacity(count);
    let mut rest = segs;
    let mut row_iter = rows.chunks_mut(width.max(1));
    for w in offsets.windows(2) {
        let (head, tail) = rest.split_at_mut(w[1] - w[0]);
        let row: &mut [f64] = if width == 0 {
            &mut []
        } else {
            row_iter.next().expect("row")
        };
        parts.push((row, head));
        rest = tail;
    }
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        parts
            .into_par_iter()
            .enumerate()
            .for_each(|(i, (row, seg))| f(i, row, seg));
        return;
    }
    parts
        .into_iter()
        .enumerate()
        .for_each(|(i, (row, seg))| f(i, row, seg));
}

/// Order-preserving parallel map.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_cover_offsets() {
        let mut data = vec![0usize; 6];
        segments_mut(&mut data, &[0, 1, 1, 4, 6], |i, seg| {
            for x in seg.iter_mut() {
                *x = i;
            }
        });
        assert_eq!(data, vec![0, 2, 2, 2, 3, 3]);
    }

    #[test]
    fn modes_agree() {
        let items: Vec<u64> = (0..100).collect();
        let a = with_sequential(true, || map(&items, |x| x * x));
        let b = with_sequential(false, || map(&items, |x| x * x));
        assert_eq!(a, b);
    }
}
