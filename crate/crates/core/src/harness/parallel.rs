//! Order-preserving map over independent jobs.

/// How independent jobs are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// Rayon work stealing when the `parallel` feature is enabled, else sequential.
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// Applies `f` to every item; output order always matches input order.
    pub fn map<T, U, F>(self, items: Vec<T>, f: F) -> Vec<U>
    where
        T: Send,
        U: Send,
        F: Fn(T) -> U + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.into_par_iter().map(f).collect()
            }
            _ => items.into_iter().map(f).collect(),
        }
    }
}
