//! Batch helpers that run on rayon when the `parallel` feature is enabled and
//! fall back to plain iterators otherwise.
//!
//! Results are always returned in input order, so batch outputs are identical
//! whichever backend produced them.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub fn map_seq<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_par<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_par(items, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_seq(items, f)
    }
}

pub fn count_seq<F>(n: u64, pred: F) -> u64
where
    F: Fn(u64) -> bool,
{
    (0..n).filter(|&i| pred(i)).count() as u64
}

#[cfg(feature = "parallel")]
pub fn count_par<F>(n: u64, pred: F) -> u64
where
    F: Fn(u64) -> bool + Sync + Send,
{
    (0..n).into_par_iter().filter(|&i| pred(i)).count() as u64
}

/// Number of indices in `0..n` satisfying `pred`.
pub fn count<F>(n: u64, pred: F) -> u64
where
    F: Fn(u64) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        count_par(n, pred)
    }
    #[cfg(not(feature = "parallel"))]
    {
        count_seq(n, pred)
    }
}
