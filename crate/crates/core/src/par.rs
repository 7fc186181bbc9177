//! Data-parallel loop helpers.
//!
//! Every helper has identical semantics with and without the `parallel`
//! feature: outputs are written to disjoint regions (or reduced with an
//! exact, order-independent combiner), so results are bitwise identical
//! for any thread count. The `*_seq` variants are always compiled; they
//! back the sequential fallback and the benchmark comparison.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Apply `f(chunk_index, chunk)` over disjoint mutable chunks of `data`.
pub fn for_each_chunk_mut_seq<T, F>(data: &mut [T], chunk: usize, f: F)
where
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    for (i, c) in data.chunks_mut(chunk).enumerate() {
        f(i, c);
    }
}

#[cfg(feature = "parallel")]
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    data.par_chunks_mut(chunk)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    for_each_chunk_mut_seq(data, chunk, f);
}

/// Collect `f(0), f(1), ..., f(n-1)` in index order.
pub fn map_collect_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_collect_seq(n, f)
}

fn min_combine(a: (f64, usize), b: (f64, usize)) -> (f64, usize) {
    // Exact lexicographic minimum: no floating arithmetic, so the reduce
    // order cannot change the result.
    if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

/// Deterministic argmin of `f` over `0..n`. `f` must return finite values.
pub fn argmin_seq<F>(n: usize, f: F) -> (f64, usize)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    (0..n)
        .map(|i| (f(i), i))
        .fold((f64::INFINITY, usize::MAX), min_combine)
}

#[cfg(feature = "parallel")]
pub fn argmin<F>(n: usize, f: F) -> (f64, usize)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .map(|i| (f(i), i))
        .reduce(|| (f64::INFINITY, usize::MAX), min_combine)
}

#[cfg(not(feature = "parallel"))]
pub fn argmin<F>(n: usize, f: F) -> (f64, usize)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    argmin_seq(n, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_map_matches_sequential() {
        let mut a: Vec<f64> = (0..97).map(|i| i as f64).collect();
        let mut b = a.clone();
        for_each_chunk_mut(&mut a, 10, |i, c| {
            for x in c.iter_mut() {
                *x += i as f64;
            }
        });
        for_each_chunk_mut_seq(&mut b, 10, |i, c| {
            for x in c.iter_mut() {
                *x += i as f64;
            }
        });
        assert_eq!(a, b);
    }

    #[test]
    fn argmin_is_deterministic_on_ties() {
        let vals = [3.0, 1.0, 1.0, 2.0];
        let (v, i) = argmin(vals.len(), |k| vals[k]);
        assert_eq!((v, i), (1.0, 1));
        assert_eq!(argmin_seq(vals.len(), |k| vals[k]), (1.0, 1));
    }
}
