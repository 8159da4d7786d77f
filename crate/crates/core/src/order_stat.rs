//! Rank/select over a shrinking subset of `{1, ..., n}`.
//!
//! Backed by a binary indexed tree over presence flags. `select` walks the
//! implicit tree top-down (binary lifting), so both `select` and `remove`
//! are `O(log n)`; construction is linear.

#[derive(Debug, Clone)]
pub struct RankSelect {
    /// 1-based Fenwick array; `tree[0]` unused.
    tree: Vec<u32>,
    present: Vec<bool>,
    len: usize,
    top_bit: usize,
}

impl RankSelect {
    /// All of `{1, ..., n}` present.
    pub fn full(n: usize) -> Self {
        let mut tree = vec![0u32; n + 1];
        for i in 1..=n {
            tree[i] += 1;
            let parent = i + lowbit(i);
            if parent <= n {
                tree[parent] += tree[i];
            }
        }
        let top_bit = if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) };
        Self {
            tree,
            present: vec![true; n + 1],
            len: n,
            top_bit,
        }
    }

    pub fn capacity(&self) -> usize {
        self.tree.len() - 1
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, value: usize) -> bool {
        value >= 1 && value < self.present.len() && self.present[value]
    }

    /// Number of present values `<= value`.
    pub fn rank(&self, value: usize) -> usize {
        let mut i = value.min(self.capacity());
        let mut acc = 0usize;
        while i > 0 {
            acc += self.tree[i] as usize;
            i -= lowbit(i);
        }
        acc
    }

    /// The `rank`-th smallest present value (1-based), if it exists.
    pub fn select(&self, rank: usize) -> Option<usize> {
        if rank == 0 || rank > self.len {
            return None;
        }
        let n = self.capacity();
        let mut pos = 0usize;
        let mut remaining = rank;
        let mut step = self.top_bit;
        while step > 0 {
            let next = pos + step;
            if next <= n && (self.tree[next] as usize) < remaining {
                pos = next;
                remaining -= self.tree[next] as usize;
            }
            step >>= 1;
        }
        Some(pos + 1)
    }

    /// Removes `value`; returns whether it was present.
    pub fn remove(&mut self, value: usize) -> bool {
        if !self.contains(value) {
            return false;
        }
        self.present[value] = false;
        self.len -= 1;
        let mut i = value;
        while i <= self.capacity() {
            self.tree[i] -= 1;
            i += lowbit(i);
        }
        true
    }

    pub fn select_remove(&mut self, rank: usize) -> Option<usize> {
        let v = self.select(rank)?;
        self.remove(v);
        Some(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (1..self.present.len()).filter(move |&v| self.present[v])
    }
}

#[inline]
fn lowbit(i: usize) -> usize {
    i & i.wrapping_neg()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn select_on_full_is_identity() {
        for n in [1usize, 2, 3, 7, 8, 9, 64, 100] {
            let rs = RankSelect::full(n);
            for r in 1..=n {
                assert_eq!(rs.select(r), Some(r));
                assert_eq!(rs.rank(r), r);
            }
            assert_eq!(rs.select(n + 1), None);
            assert_eq!(rs.select(0), None);
        }
    }

    #[test]
    fn remove_then_select() {
        let mut rs = RankSelect::full(5);
        assert!(rs.remove(2));
        assert!(!rs.remove(2));
        assert_eq!(rs.iter().collect::<Vec<_>>(), vec![1, 3, 4, 5]);
        assert_eq!(rs.select(2), Some(3));
        assert_eq!(rs.select_remove(4), Some(5));
        assert_eq!(rs.len(), 3);
        assert_eq!(rs.rank(5), 3);
    }

    #[test]
    fn empty_set() {
        let rs = RankSelect::full(0);
        assert!(rs.is_empty());
        assert_eq!(rs.select(1), None);
    }

    proptest! {
        #[test]
        fn matches_sorted_vec(n in 1usize..200, ops in prop::collection::vec(any::<u32>(), 0..200)) {
            let mut rs = RankSelect::full(n);
            let mut model: Vec<usize> = (1..=n).collect();
            for op in ops {
                if model.is_empty() { break; }
                let r = (op as usize % model.len()) + 1;
                prop_assert_eq!(rs.select(r), Some(model[r - 1]));
                let v = model.remove(r - 1);
                prop_assert!(rs.remove(v));
                prop_assert_eq!(rs.len(), model.len());
            }
            let left: Vec<usize> = rs.iter().collect();
            prop_assert_eq!(left, model);
        }
    }
}
