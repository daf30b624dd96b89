//! Deterministic fan-out for Monte Carlo batches. Work items are keyed by
//! index and results are collected back in index order, so the output is
//! identical for every worker count.

/// Worker count from the SGNS_WORKERS environment variable (default 1).
pub fn workers() -> usize {
    std::env::var("SGNS_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&w| w >= 1)
        .unwrap_or(1)
}

/// Maps `f` over `0..n` on a strided worker pool; the result vector is
/// ordered by index regardless of scheduling.
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let w = workers().min(n.max(1));
    if w <= 1 {
        return (0..n).map(f).collect();
    }
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    let chunks: Vec<(usize, &mut [Option<T>])> = {
        // contiguous blocks keep the borrow checker happy and the
        // reduction order fixed
        let mut rest: &mut [Option<T>] = &mut slots;
        let mut out = Vec::new();
        let base = n / w;
        let extra = n % w;
        let mut start = 0usize;
        for i in 0..w {
            let len = base + usize::from(i < extra);
            let (head, tail) = rest.split_at_mut(len);
            out.push((start, head));
            start += len;
            rest = tail;
        }
        out
    };
    std::thread::scope(|scope| {
        for (start, chunk) in chunks {
            let f = &f;
            scope.spawn(move || {
                for (off, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(f(start + off));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("worker filled slot")).collect()
}
