//! Points in the 2^p model space.

use std::fmt;
use std::hash::{Hash, Hasher};

use crate::data::CenteredDesign;
use crate::linear_gaussian::GramFactor;

/// Inclusion pattern over the `p` candidate covariates.
///
/// Besides the bitset, the indicator keeps unordered lists of included and
/// excluded positions so a uniformly random member of either set is O(1).
#[derive(Clone)]
pub struct ModelIndicator {
    words: Vec<u64>,
    p: usize,
    included: Vec<usize>,
    excluded: Vec<usize>,
    // position of covariate j inside `included` or `excluded`
    slot: Vec<usize>,
}

impl ModelIndicator {
    /// The intercept-only model.
    pub fn empty(p: usize) -> Self {
        ModelIndicator {
            words: vec![0; p.div_ceil(64)],
            p,
            included: Vec::new(),
            excluded: (0..p).collect(),
            slot: (0..p).collect(),
        }
    }

    pub fn full(p: usize) -> Self {
        Self::from_indices(p, &(0..p).collect::<Vec<_>>())
    }

    /// # Panics
    /// If an index is `>= p`.
    pub fn from_indices(p: usize, idx: &[usize]) -> Self {
        let mut m = Self::empty(p);
        for &j in idx {
            assert!(j < p, "covariate index {j} out of range for p = {p}");
            if !m.contains(j) {
                m.add(j);
            }
        }
        m
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let idx: Vec<usize> = bits
            .iter()
            .enumerate()
            .filter_map(|(j, &b)| b.then_some(j))
            .collect();
        Self::from_indices(bits.len(), &idx)
    }

    /// Parses a `0`/`1` string such as `"0110"`.
    pub fn from_bit_string(s: &str) -> Option<Self> {
        let bits: Option<Vec<bool>> = s
            .chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect();
        bits.filter(|b| !b.is_empty()).map(|b| Self::from_bools(&b))
    }

    /// Number of candidate covariates.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of included covariates, `p_k`.
    pub fn size(&self) -> usize {
        self.included.len()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.words[j / 64] >> (j % 64) & 1 == 1
    }

    /// Included positions in unspecified order.
    pub fn included(&self) -> &[usize] {
        &self.included
    }

    /// Excluded positions in unspecified order.
    pub fn excluded(&self) -> &[usize] {
        &self.excluded
    }

    /// Included positions in increasing order.
    pub fn included_sorted(&self) -> Vec<usize> {
        (0..self.p).filter(|&j| self.contains(j)).collect()
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.p).map(|j| self.contains(j)).collect()
    }

    pub fn bit_string(&self) -> String {
        (0..self.p)
            .map(|j| if self.contains(j) { '1' } else { '0' })
            .collect()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// # Panics
    /// If `j` is already included.
    pub fn add(&mut self, j: usize) {
        assert!(!self.contains(j), "covariate {j} already included");
        Self::take(&mut self.excluded, &mut self.slot, j);
        self.slot[j] = self.included.len();
        self.included.push(j);
        self.words[j / 64] |= 1 << (j % 64);
    }

    /// # Panics
    /// If `j` is not included.
    pub fn remove(&mut self, j: usize) {
        assert!(self.contains(j), "covariate {j} not included");
        Self::take(&mut self.included, &mut self.slot, j);
        self.slot[j] = self.excluded.len();
        self.excluded.push(j);
        self.words[j / 64] &= !(1 << (j % 64));
    }

    fn take(list: &mut Vec<usize>, slot: &mut [usize], j: usize) {
        let pos = slot[j];
        debug_assert_eq!(list[pos], j);
        list.swap_remove(pos);
        if let Some(&moved) = list.get(pos) {
            slot[moved] = pos;
        }
    }
}

impl PartialEq for ModelIndicator {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.words == other.words
    }
}

impl Eq for ModelIndicator {}

impl Hash for ModelIndicator {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.p.hash(state);
        self.words.hash(state);
    }
}

impl PartialOrd for ModelIndicator {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ModelIndicator {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.bit_string().cmp(&other.bit_string())
    }
}

impl fmt::Debug for ModelIndicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ModelIndicator({})", self.bit_string())
    }
}

impl fmt::Display for ModelIndicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.bit_string())
    }
}

/// Whether `(1 : X_k)` has full column rank.
///
/// Equivalent to `p_k < n` plus a successful factorization of the centered
/// `X_k'X_k` with every pivot above `1e-10` times its average diagonal.
pub fn rank_ok(model: &ModelIndicator, design: &CenteredDesign) -> bool {
    if model.size() == 0 {
        return design.n() >= 2;
    }
    GramFactor::new(design, &model.included_sorted()).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::center_design;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    #[test]
    fn add_remove_keeps_lists_consistent() {
        let mut m = ModelIndicator::empty(70);
        for j in [3, 65, 0, 69] {
            m.add(j);
        }
        m.remove(65);
        assert_eq!(m.size(), 3);
        assert_eq!(m.included_sorted(), vec![0, 3, 69]);
        assert_eq!(m.excluded().len(), 67);
        assert!(!m.contains(65));
        assert_eq!(m, ModelIndicator::from_indices(70, &[69, 0, 3]));
    }

    #[test]
    fn bit_string_round_trip() {
        let m = ModelIndicator::from_bit_string("01101").unwrap();
        assert_eq!(m.size(), 3);
        assert_eq!(m.bit_string(), "01101");
        assert!(ModelIndicator::from_bit_string("01x").is_none());
    }

    fn design(n: usize, p: usize, seed: u64) -> CenteredDesign {
        let mut s = seed;
        let x = DMatrix::from_fn(n, p, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        });
        center_design(&x)
    }

    #[test]
    fn null_model_always_full_rank() {
        assert!(rank_ok(&ModelIndicator::empty(3), &design(2, 3, 1)));
    }

    #[test]
    fn duplicated_column_is_rank_deficient() {
        let mut x = DMatrix::from_fn(10, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 + i as f64 * 0.1 * j as f64);
        let c0 = x.column(0).clone_owned();
        x.set_column(2, &c0);
        let d = center_design(&x);
        assert!(rank_ok(&ModelIndicator::from_indices(3, &[0, 1]), &d));
        assert!(!rank_ok(&ModelIndicator::from_indices(3, &[0, 2]), &d));
    }

    #[test]
    fn model_as_large_as_n_is_rank_deficient() {
        let d = design(4, 6, 7);
        assert!(rank_ok(&ModelIndicator::from_indices(6, &[0, 1, 2]), &d));
        assert!(!rank_ok(&ModelIndicator::from_indices(6, &[0, 1, 2, 3]), &d));
    }

    proptest! {
        #[test]
        fn insertion_order_irrelevant(mut idx in proptest::collection::vec(0usize..40, 0..20)) {
            let a = ModelIndicator::from_indices(40, &idx);
            idx.reverse();
            let b = ModelIndicator::from_indices(40, &idx);
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.size(), a.bit_string().matches('1').count());
            prop_assert!(a.size() <= a.p());
        }

        #[test]
        fn rank_ok_ignores_column_order(seed in 0u64..500, k in 1usize..6) {
            let d = design(8, 6, seed);
            let idx: Vec<usize> = (0..k).collect();
            let mut rev = idx.clone();
            rev.reverse();
            prop_assert_eq!(
                rank_ok(&ModelIndicator::from_indices(6, &idx), &d),
                rank_ok(&ModelIndicator::from_indices(6, &rev), &d)
            );
        }
    }
}
