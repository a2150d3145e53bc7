use std::cmp::Ordering;
use std::fmt::Debug;
use std::ops::Range;

use rayon::prelude::*;

/// Rows per chunk for the parallel strategy. Fixed so chunked float
/// reductions are reproducible run to run.
pub const CHUNK_LEN: usize = 4096;

/// How a kernel walks its row space.
pub trait Strategy: Default + Debug + Send + Sync + 'static {
    const NAME: &'static str;

    /// Splits `0..n` into the ranges this strategy processes independently.
    fn ranges(&self, n: usize) -> Vec<Range<usize>>;

    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;

    /// Applies `f` to every range from [`Strategy::ranges`], results in range order.
    fn map_ranges<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Range<usize>) -> T + Sync + Send;

    /// Fills disjoint output windows; `windows[i]` is written by `f(i, slice)`.
    fn fill_windows<T, F>(&self, out: &mut [T], windows: &[Range<usize>], f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send;

    /// Sorts by `cmp`, which must be a total order with no ties, so the
    /// result does not depend on the algorithm.
    fn sort_by_total<T, F>(&self, v: &mut [T], cmp: F)
    where
        T: Send,
        F: Fn(&T, &T) -> Ordering + Sync;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl Strategy for Sequential {
    const NAME: &'static str = "reference";

    fn ranges(&self, n: usize) -> Vec<Range<usize>> {
        vec![0..n]
    }

    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }

    fn map_ranges<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Range<usize>) -> T + Sync + Send,
    {
        self.ranges(n).into_iter().map(f).collect()
    }

    fn fill_windows<T, F>(&self, out: &mut [T], windows: &[Range<usize>], f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        for (i, w) in windows.iter().enumerate() {
            f(i, &mut out[w.clone()]);
        }
    }

    fn sort_by_total<T, F>(&self, v: &mut [T], cmp: F)
    where
        T: Send,
        F: Fn(&T, &T) -> Ordering + Sync,
    {
        v.sort_by(cmp);
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Chunked;

impl Strategy for Chunked {
    const NAME: &'static str = "parallel";

    fn ranges(&self, n: usize) -> Vec<Range<usize>> {
        if n == 0 {
            return vec![0..0];
        }
        (0..n)
            .step_by(CHUNK_LEN)
            .map(|s| s..(s + CHUNK_LEN).min(n))
            .collect()
    }

    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).into_par_iter().with_min_len(1024).map(f).collect()
    }

    fn map_ranges<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Range<usize>) -> T + Sync + Send,
    {
        self.ranges(n).into_par_iter().map(f).collect()
    }

    fn fill_windows<T, F>(&self, out: &mut [T], windows: &[Range<usize>], f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        // Windows are contiguous and ordered, so split the buffer in place.
        let mut slices = Vec::with_capacity(windows.len());
        let mut rest = out;
        let mut pos = 0;
        for w in windows {
            debug_assert_eq!(w.start, pos);
            let (head, tail) = rest.split_at_mut(w.end - w.start);
            slices.push(head);
            rest = tail;
            pos = w.end;
        }
        slices
            .into_par_iter()
            .enumerate()
            .for_each(|(i, s)| f(i, s));
    }

    fn sort_by_total<T, F>(&self, v: &mut [T], cmp: F)
    where
        T: Send,
        F: Fn(&T, &T) -> Ordering + Sync,
    {
        v.par_sort_unstable_by(cmp);
    }
}
