//! Rank queries over the values a path has visited so far.
//!
//! All path values are sorted once; a Fenwick tree indexed by sorted
//! position then answers "how many (or what sum of) already inserted values
//! lie in `[a, b]`" in `O(log n)`.

use std::ops::{AddAssign, Sub};

use crate::Scalar;

/// Binary indexed tree over `0..len` with prefix sums.
#[derive(Clone, Debug)]
pub struct Fenwick<V> {
    tree: Vec<V>,
}

impl<V: Copy + Default + AddAssign + Sub<Output = V>> Fenwick<V> {
    pub fn new(len: usize) -> Self {
        Fenwick {
            tree: vec![V::default(); len + 1],
        }
    }

    pub fn len(&self) -> usize {
        self.tree.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn add(&mut self, index: usize, delta: V) {
        let mut i = index + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over `0..end`.
    pub fn prefix(&self, end: usize) -> V {
        let mut acc = V::default();
        let mut i = end;
        while i > 0 {
            acc += self.tree[i];
            i &= i - 1;
        }
        acc
    }

    /// Sum over `start..end`.
    pub fn range(&self, start: usize, end: usize) -> V {
        if end <= start {
            return V::default();
        }
        self.prefix(end) - self.prefix(start)
    }
}

/// Path values in sorted order plus each sample's sorted position.
#[derive(Clone, Debug)]
pub struct SortedValues<T> {
    sorted: Vec<T>,
    position: Vec<usize>,
}

impl<T: Scalar> SortedValues<T> {
    pub fn new(values: &[T]) -> Self {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_unstable_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
        let mut position = vec![0; values.len()];
        for (rank, &k) in order.iter().enumerate() {
            position[k] = rank;
        }
        let sorted = order.iter().map(|&k| values[k]).collect();
        SortedValues { sorted, position }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Sorted position of sample `k`.
    pub fn position(&self, k: usize) -> usize {
        self.position[k]
    }

    /// First sorted position holding a value `>= x`.
    pub fn lower_bound(&self, x: T) -> usize {
        self.sorted.partition_point(|&v| v < x)
    }

    /// First sorted position holding a value `> x`.
    pub fn upper_bound(&self, x: T) -> usize {
        self.sorted.partition_point(|&v| v <= x)
    }

    /// Sorted positions of the values equal to sample `k`'s value.
    pub fn ties(&self, k: usize) -> (usize, usize) {
        let p = self.position[k];
        let x = self.sorted[p];
        let mut lo = p;
        while lo > 0 && self.sorted[lo - 1] == x {
            lo -= 1;
        }
        let mut hi = p + 1;
        while hi < self.sorted.len() && self.sorted[hi] == x {
            hi += 1;
        }
        (lo, hi)
    }

    /// [`Self::lower_bound`] by exponential search outward from `hint`,
    /// cheap when the answer is near the hint.
    pub fn lower_bound_from(&self, x: T, hint: usize) -> usize {
        self.search_from(hint, |v| v < x)
    }

    /// [`Self::upper_bound`] by exponential search outward from `hint`.
    pub fn upper_bound_from(&self, x: T, hint: usize) -> usize {
        self.search_from(hint, |v| v <= x)
    }

    /// Partition point of the monotone predicate `below`, starting at `hint`.
    fn search_from(&self, hint: usize, below: impl Fn(T) -> bool) -> usize {
        let n = self.sorted.len();
        let hint = hint.min(n);
        let (lo, hi) = if hint < n && below(self.sorted[hint]) {
            // answer in (hint, n]
            let mut step = 1;
            let mut lo = hint + 1;
            loop {
                let probe = hint + step;
                if probe >= n {
                    break (lo, n);
                }
                if !below(self.sorted[probe]) {
                    break (lo, probe);
                }
                lo = probe + 1;
                step *= 2;
            }
        } else {
            // answer in [0, hint]
            let mut step = 1;
            let mut hi = hint;
            loop {
                if step > hint {
                    break (0, hi);
                }
                let probe = hint - step;
                if below(self.sorted[probe]) {
                    break (probe + 1, hi);
                }
                hi = probe;
                step *= 2;
            }
        };
        lo + self.sorted[lo..hi].partition_point(|&v| below(v))
    }
}
