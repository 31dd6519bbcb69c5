//! Deterministic index-parallel map used by the batch samplers.
//!
//! Work is split by index stride across a bounded number of threads and
//! results are reassembled in index order, so the output is identical
//! for any thread count. Errors are reported for the smallest failing
//! index to keep failures deterministic too.

use crate::error::Result;

pub(crate) fn parallel_map_indexed<T, F>(n: usize, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let workers = threads.max(1).min(n.max(1));
    if workers <= 1 {
        return (0..n).map(f).collect();
    }

    let mut slots: Vec<Option<Result<T>>> = (0..n).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|wid| {
                let f = &f;
                s.spawn(move || {
                    let mut out = Vec::new();
                    let mut i = wid;
                    while i < n {
                        out.push((i, f(i)));
                        i += workers;
                    }
                    out
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("sampler worker panicked") {
                slots[i] = Some(r);
            }
        }
    });

    let mut out = Vec::with_capacity(n);
    for slot in slots {
        out.push(slot.expect("all indices filled")?);
    }
    Ok(out)
}
