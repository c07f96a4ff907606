//! Index-parallel map with deterministic output order.
//!
//! With the `parallel` feature the work is spread over the current rayon pool;
//! without it every call runs sequentially. Either way, result `i` always lands
//! in slot `i`.

use crate::{Error, Result};

/// How a batch of independent evaluations is executed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Falls back to sequential when the crate is built without `parallel`.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

pub fn map_indices<R, F>(n: usize, exec: Execution, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel => (0..n).map(f).collect(),
    }
}

/// Fallible variant of [`map_indices`]. The reported error is always the one
/// with the lowest index, wrapped so that it names that index.
pub fn try_map_indices<R, F>(n: usize, exec: Execution, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(usize) -> Result<R> + Sync + Send,
{
    let results = map_indices(n, exec, f);
    let mut out = Vec::with_capacity(n);
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => out.push(v),
            Err(e) => {
                return Err(Error::Sample {
                    index,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(out)
}

/// Runs `f` with the worker pool capped at `threads` workers.
#[cfg(feature = "parallel")]
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        Some(k) if k > 0 => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
            Ok(pool) => pool.install(f),
            Err(e) => {
                log::warn!("could not build a {k}-thread pool ({e}); using the global pool");
                f()
            }
        },
        _ => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_threads<T: Send>(_threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let seq = map_indices(1000, Execution::Sequential, |i| i * i);
        let par = map_indices(1000, Execution::Parallel, |i| i * i);
        assert_eq!(seq, par);
    }

    #[test]
    fn first_error_wins() {
        let r = try_map_indices(100, Execution::Parallel, |i| {
            if i % 30 == 7 {
                Err(Error::Empty("x"))
            } else {
                Ok(i)
            }
        });
        match r {
            Err(Error::Sample { index, .. }) => assert_eq!(index, 7),
            other => panic!("unexpected {other:?}"),
        }
    }
}
