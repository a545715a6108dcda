//! Data-parallel helpers. With the `parallel` feature the work is spread
//! over the rayon pool; without it every helper runs sequentially. Results
//! never depend on the schedule: each chunk is written by exactly one task
//! and reductions happen afterwards in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

pub fn chunks_mut<T, F>(exec: Exec, data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    if chunk == 0 {
        return;
    }
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => data
            .par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c)),
        _ => data
            .chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c)),
    }
}

pub fn zip_chunks_mut<A, B, F>(exec: Exec, a: &mut [A], ca: usize, b: &mut [B], cb: usize, f: F)
where
    A: Send,
    B: Send,
    F: Fn(usize, &mut [A], &mut [B]) + Send + Sync,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => a
            .par_chunks_mut(ca)
            .zip(b.par_chunks_mut(cb))
            .enumerate()
            .for_each(|(i, (x, y))| f(i, x, y)),
        _ => a
            .chunks_mut(ca)
            .zip(b.chunks_mut(cb))
            .enumerate()
            .for_each(|(i, (x, y))| f(i, x, y)),
    }
}

/// Ordered map over `0..n`.
pub fn map_range<O, F>(exec: Exec, n: usize, f: F) -> Vec<O>
where
    O: Send,
    F: Fn(usize) -> O + Send + Sync,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let seq = map_range(Exec::Sequential, 100, |i| (i as f64).sqrt());
        let par = map_range(Exec::Parallel, 100, |i| (i as f64).sqrt());
        assert_eq!(seq, par);
        let mut a = vec![0usize; 12];
        chunks_mut(Exec::Parallel, &mut a, 4, |i, c| c.fill(i));
        assert_eq!(a, vec![0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2]);
    }
}
