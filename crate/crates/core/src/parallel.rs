use rayon::prelude::*;

/// Items per work unit. Partial sums are formed per chunk and combined in
/// chunk order, so results do not depend on the number of worker threads.
pub(crate) const CHUNK: usize = 256;

/// Sums per-item vector contributions of length `len` over `0..count`.
///
/// `init` builds per-chunk scratch space; `f(scratch, i, acc)` adds item `i`
/// into `acc`.
pub(crate) fn sum_items<S, I, F>(count: usize, len: usize, init: I, f: F) -> Vec<f64>
where
    I: Fn() -> S + Sync,
    F: Fn(&mut S, usize, &mut [f64]) + Sync,
{
    let chunks = count.div_ceil(CHUNK);
    let partials: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut scratch = init();
            let mut acc = vec![0.0; len];
            for i in c * CHUNK..((c + 1) * CHUNK).min(count) {
                f(&mut scratch, i, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; len];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}
