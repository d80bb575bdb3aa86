use fring_core::optimize::Executor;
use rayon::prelude::*;

/// Runs tasks on the global rayon pool. Output order follows the task
/// index, so results match [`fring_core::optimize::Sequential`] exactly.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rayon;

impl Executor for Rayon {
    fn map<T, F>(&self, count: usize, task: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..count).into_par_iter().map(task).collect()
    }
}

/// Sizes the global pool; `None` keeps rayon's default.
pub fn init_threads(threads: Option<usize>) {
    if let Some(k) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use fring_core::optimize::{qaoa_rand, QaoaSettings, Sequential};
    use fring_core::RingModel;

    #[test]
    fn matches_sequential() {
        let m = RingModel::new(7).unwrap();
        let s = QaoaSettings::default();
        let a = qaoa_rand(&m, 4, 6, 9, &s, &Sequential).unwrap();
        let b = qaoa_rand(&m, 4, 6, 9, &s, &Rayon).unwrap();
        assert_eq!(a, b);
    }
}
