//! Data-parallel helpers. With the `parallel` feature disabled every
//! execution mode runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How batch evaluations (factor linearization, benchmark trials) run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True if this build can actually run work in parallel.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map_indexed<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        return items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let _ = exec;
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<R, F>(n: usize, exec: Execution, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree() {
        let v: Vec<u64> = (0..1000).collect();
        let a = map_indexed(&v, Execution::Sequential, |i, x| x * x + i as u64);
        let b = map_indexed(&v, Execution::Parallel, |i, x| x * x + i as u64);
        assert_eq!(a, b);
        assert_eq!(map_range(10, Execution::Parallel, |i| i * 2), map_range(10, Execution::Sequential, |i| i * 2));
    }
}
