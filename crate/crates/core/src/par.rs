//! Data-parallel helpers.
//!
//! With the `parallel` feature (on by default) these dispatch to rayon.
//! Without it every helper degrades to the equivalent sequential iterator,
//! producing identical results: all reductions here are order-independent
//! or preserve input order.

/// Whether this build runs the helpers on a thread pool.
#[inline]
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

/// Map over a slice, preserving order.
#[cfg(feature = "parallel")]
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Map over `0..count`, preserving order.
#[cfg(feature = "parallel")]
pub fn map_indexed<U, F>(count: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<U, F>(count: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..count).map(f).collect()
}

/// Evaluate `f` on `0..count` and keep the minimum under `Ord`.
///
/// `Ord` must be total over distinct indices for the result to be
/// independent of scheduling; callers fold the index into the key.
#[cfg(feature = "parallel")]
pub fn min_indexed<K, F>(count: usize, f: F) -> Option<K>
where
    K: Ord + Send,
    F: Fn(usize) -> Option<K> + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().filter_map(f).min()
}

#[cfg(not(feature = "parallel"))]
pub fn min_indexed<K, F>(count: usize, f: F) -> Option<K>
where
    K: Ord,
    F: Fn(usize) -> Option<K>,
{
    (0..count).filter_map(f).min()
}

/// Run `f` on a pool of `threads` workers (0 = library default).
///
/// Sequential builds ignore the thread count.
#[cfg(feature = "parallel")]
pub fn with_threads<R, F>(threads: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(err) => {
            log::warn!("could not build a {threads}-thread pool ({err}); using the global pool");
            f()
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_threads<R, F>(_threads: usize, f: F) -> R
where
    F: FnOnce() -> R,
{
    f()
}
