//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) the maps fan out over the
//! global rayon pool. Results are always collected in input order and reduced
//! sequentially afterwards, so scheduling never changes a single bit of the
//! output. The `_seq` variants bypass the pool unconditionally; the benches
//! use them to compare both paths on identical workloads.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, preserving order.
pub fn map_collect<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Sequential twin of [`map_collect`].
pub fn map_collect_seq<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Build a `Vec` of length `n` whose `i`-th entry is `f(i)`.
pub fn fill_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential twin of [`fill_indexed`].
pub fn fill_indexed_seq<R, F>(n: usize, f: F) -> Vec<R>
where
    F: Fn(usize) -> R,
{
    (0..n).map(f).collect()
}

/// Order-stable sum; pairs with the collectors above so that reductions do
/// not depend on thread scheduling.
pub fn sum_stable(xs: &[f64]) -> f64 {
    // Kahan compensation: the panel sums span many magnitudes.
    let mut sum = 0.0;
    let mut c = 0.0;
    for &x in xs {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let items: Vec<f64> = (0..10_000).map(|i| (i as f64).sin() * 1e-3).collect();
        let a = map_collect(&items, |x| x * x + 1.0 / (1.0 + x.abs()));
        let b = map_collect_seq(&items, |x| x * x + 1.0 / (1.0 + x.abs()));
        assert_eq!(a, b);
        assert_eq!(sum_stable(&a).to_bits(), sum_stable(&b).to_bits());
    }
}
