//! Data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature the mapped closures run on the rayon pool;
//! without it, or through [`map_sequential`], they run in order on the
//! calling thread. Output order always matches input order, and every task
//! is independent, so the two paths give bit-identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, in parallel when the `parallel` feature is on.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
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

/// Always-sequential counterpart of [`map`].
pub fn map_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Whether [`map`] fans out.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

/// Worker threads [`map`] would use right now.
pub fn current_workers() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_preserved() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = map(&xs, |x| x * x + 1);
        let b = map_sequential(&xs, |x| x * x + 1);
        assert_eq!(a, b);
    }
}
