//! Execution strategy for batch work.
//!
//! With the `parallel` feature (default) `Exec::Parallel` fans work out on
//! the current rayon pool. Without it both variants run sequentially. Either
//! way results come back in input order, so outputs do not depend on the
//! strategy or the thread count.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    pub fn threads(self) -> usize {
        match self {
            Exec::Sequential => 1,
            #[cfg(feature = "parallel")]
            Exec::Parallel => rayon::current_num_threads(),
            #[cfg(not(feature = "parallel"))]
            Exec::Parallel => 1,
        }
    }
}

/// Chunk length giving a few chunks per worker.
pub fn chunk_size(n: usize, exec: Exec) -> usize {
    let workers = exec.threads();
    if workers <= 1 {
        n.max(1)
    } else {
        n.div_ceil(workers * 4).max(1)
    }
}

/// Ordered map over `items`; `f` also receives the item index.
pub fn map<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
        }
        _ => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_preserved() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = map(Exec::Sequential, &xs, |i, x| x * 3 + i as u64);
        let b = map(Exec::Parallel, &xs, |i, x| x * 3 + i as u64);
        assert_eq!(a, b);
    }

    #[test]
    fn chunk_sizes() {
        assert_eq!(chunk_size(10, Exec::Sequential), 10);
        assert_eq!(chunk_size(0, Exec::Sequential), 1);
        assert!(chunk_size(1000, Exec::Parallel) >= 1);
    }
}
