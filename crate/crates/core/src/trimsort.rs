//! Partial incremental sorting around a fixed percentile boundary.
//!
//! The score array is kept between iterations of a trim-fitting loop. Each
//! call only re-establishes the partition property at position `k`: every
//! entry left of `k` is no larger than every entry at or right of `k`. The
//! sides themselves stay unsorted. Alongside the partition a [`SwapJournal`]
//! reports which ids entered or left the retained side, so accumulators over
//! the retained set can be patched instead of recomputed.
//!
//! Entries are ordered by `(score, id)`, which makes the order total and the
//! retained set deterministic under ties.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// One element of the residual score array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredEntry {
    pub score: f64,
    pub id: usize,
}

impl ScoredEntry {
    pub fn new(score: f64, id: usize) -> Self {
        Self { score, id }
    }

    /// Total order used by the sorter: by score, ties by ascending id.
    #[inline]
    pub fn cmp_key(&self, other: &Self) -> Ordering {
        match self.score.partial_cmp(&other.score) {
            Some(Ordering::Equal) | None => self.id.cmp(&other.id),
            Some(ord) => ord,
        }
    }

    #[inline]
    fn less(&self, other: &Self) -> bool {
        self.score < other.score || (self.score == other.score && self.id < other.id)
    }
}

/// Build the identity-ordered score array `[(scores[0], 0), (scores[1], 1), ...]`.
pub fn entries_from_scores(scores: &[f64]) -> Vec<ScoredEntry> {
    scores
        .iter()
        .enumerate()
        .map(|(id, &score)| ScoredEntry { score, id })
        .collect()
}

/// Net moves across the percentile boundary produced by one re-sort.
///
/// `plus` holds ids that entered the retained side, `minus` ids that left it.
/// Both lists are sorted ascending and disjoint.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SwapJournal {
    pub plus: Vec<usize>,
    pub minus: Vec<usize>,
}

impl SwapJournal {
    pub fn is_empty(&self) -> bool {
        self.plus.is_empty() && self.minus.is_empty()
    }

    /// Number of accumulator term applications needed to replay the journal.
    pub fn len(&self) -> usize {
        self.plus.len() + self.minus.len()
    }

    /// Number of non-redundant cross-boundary swaps (`|plus| == |minus|`).
    pub fn swap_count(&self) -> usize {
        self.plus.len()
    }

    /// The journal that undoes this one.
    pub fn reversed(&self) -> SwapJournal {
        SwapJournal {
            plus: self.minus.clone(),
            minus: self.plus.clone(),
        }
    }

    /// Replay the journal on a membership mask indexed by id.
    pub fn apply_to_mask(&self, mask: &mut [bool]) {
        for &id in &self.minus {
            mask[id] = false;
        }
        for &id in &self.plus {
            mask[id] = true;
        }
    }
}

/// Retained-sample count `k` for an array of `n` scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrimBoundary {
    k: usize,
    n: usize,
}

impl TrimBoundary {
    /// Requires `1 <= k < n`.
    pub fn new(k: usize, n: usize) -> Result<Self> {
        if k == 0 || k >= n {
            return Err(Error::invalid(format!("trim boundary k={k} out of range for n={n}")));
        }
        Ok(Self { k, n })
    }

    /// `k = floor(percent / 100 * n)`.
    pub fn from_percentile(percent: f64, n: usize) -> Result<Self> {
        if !(percent > 0.0 && percent < 100.0) {
            return Err(Error::invalid(format!("percentile {percent} not in (0, 100)")));
        }
        Self::new((percent / 100.0 * n as f64).floor() as usize, n)
    }

    /// The 50th percentile boundary, `k = floor(n / 2)`.
    pub fn median(n: usize) -> Result<Self> {
        Self::new(n / 2, n)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

const INSIDE_BEFORE: u8 = 1;
const INSIDE_AFTER: u8 = 2;
const SEEN: u8 = 4;

/// Reusable sorter; keeps a per-id scratch mask between calls to avoid
/// reallocating it on every iteration.
#[derive(Debug, Default, Clone)]
pub struct TrimSorter {
    marks: Vec<u8>,
}

impl TrimSorter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Partially sort `entries` so the partition property holds at
    /// `boundary.k()` and return the journal of net boundary crossings.
    pub fn quicksort4trim(&mut self, entries: &mut [ScoredEntry], boundary: TrimBoundary) -> Result<SwapJournal> {
        self.mark_before(entries, boundary)?;
        let target = boundary.k() - 1;
        let (mut lo, mut hi) = (0, entries.len() - 1);
        while lo < hi {
            let p = partition(entries, lo, hi);
            match p.cmp(&target) {
                Ordering::Equal => break,
                Ordering::Greater => hi = p - 1,
                Ordering::Less => lo = p + 1,
            }
        }
        Ok(self.collect_journal(entries, boundary.k()))
    }

    /// Reference path: full sort of the array, same journal semantics.
    pub fn full_sort(&mut self, entries: &mut [ScoredEntry], boundary: TrimBoundary) -> Result<SwapJournal> {
        self.mark_before(entries, boundary)?;
        entries.sort_unstable_by(ScoredEntry::cmp_key);
        Ok(self.collect_journal(entries, boundary.k()))
    }

    fn mark_before(&mut self, entries: &[ScoredEntry], boundary: TrimBoundary) -> Result<()> {
        let n = entries.len();
        if n == 0 {
            return Err(Error::invalid("empty score array"));
        }
        if boundary.n() != n {
            return Err(Error::invalid(format!(
                "boundary built for n={} but array has {n} entries",
                boundary.n()
            )));
        }
        self.marks.clear();
        self.marks.resize(n, 0);
        for (pos, e) in entries.iter().enumerate() {
            if !e.score.is_finite() || e.score < 0.0 {
                return Err(Error::invalid(format!(
                    "score {} of id {} is not a finite non-negative number",
                    e.score, e.id
                )));
            }
            let Some(mark) = self.marks.get_mut(e.id) else {
                return Err(Error::invalid(format!("id {} out of range 0..{n}", e.id)));
            };
            if *mark & SEEN != 0 {
                return Err(Error::invalid(format!("duplicate id {}", e.id)));
            }
            *mark |= SEEN;
            if pos < boundary.k() {
                *mark |= INSIDE_BEFORE;
            }
        }
        Ok(())
    }

    fn collect_journal(&mut self, entries: &[ScoredEntry], k: usize) -> SwapJournal {
        let mut journal = SwapJournal::default();
        for e in &entries[..k] {
            let mark = &mut self.marks[e.id];
            *mark |= INSIDE_AFTER;
            if *mark & INSIDE_BEFORE == 0 {
                journal.plus.push(e.id);
            }
        }
        for e in &entries[k..] {
            if self.marks[e.id] & INSIDE_BEFORE != 0 {
                journal.minus.push(e.id);
            }
        }
        journal.plus.sort_unstable();
        journal.minus.sort_unstable();
        journal
    }
}

/// Partition `entries[lo..=hi]` around a median-of-three pivot and return the
/// pivot's final position.
fn partition(e: &mut [ScoredEntry], lo: usize, hi: usize) -> usize {
    let mid = lo + (hi - lo) / 2;
    if e[mid].less(&e[lo]) {
        e.swap(mid, lo);
    }
    if e[hi].less(&e[lo]) {
        e.swap(hi, lo);
    }
    if e[hi].less(&e[mid]) {
        e.swap(hi, mid);
    }
    e.swap(mid, hi);
    let pivot = e[hi];

    // [lo, i) < pivot, [j, hi) > pivot
    let (mut i, mut j) = (lo, hi);
    loop {
        while i < j && e[i].less(&pivot) {
            i += 1;
        }
        while i < j && pivot.less(&e[j - 1]) {
            j -= 1;
        }
        if i >= j {
            break;
        }
        e.swap(i, j - 1);
        i += 1;
        j -= 1;
    }
    e.swap(i, hi);
    i
}

/// Partially sort around `boundary` and return the net crossing journal.
///
/// Convenience wrapper around [`TrimSorter::quicksort4trim`] that allocates
/// fresh scratch space.
pub fn quicksort4trim(entries: &mut [ScoredEntry], boundary: TrimBoundary) -> Result<SwapJournal> {
    TrimSorter::new().quicksort4trim(entries, boundary)
}

/// Largest retained score, i.e. the score at position `k - 1`.
///
/// Only meaningful after the array has been partitioned at `boundary`.
pub fn percentile_score(entries: &[ScoredEntry], boundary: TrimBoundary) -> Result<f64> {
    if boundary.n() != entries.len() {
        return Err(Error::invalid(format!(
            "boundary built for n={} but array has {} entries",
            boundary.n(),
            entries.len()
        )));
    }
    Ok(entries[boundary.k() - 1].score)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    /// k smallest ids by full sort under the (score, id) order.
    fn oracle_retained(scores: &[f64], k: usize) -> BTreeSet<usize> {
        let mut idx: Vec<usize> = (0..scores.len()).collect();
        idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));
        idx[..k].iter().copied().collect()
    }

    fn retained(entries: &[ScoredEntry], k: usize) -> BTreeSet<usize> {
        entries[..k].iter().map(|e| e.id).collect()
    }

    fn assert_partitioned(entries: &[ScoredEntry], k: usize) {
        let left_max = entries[..k].iter().map(|e| e.score).fold(f64::MIN, f64::max);
        let right_min = entries[k..].iter().map(|e| e.score).fold(f64::MAX, f64::min);
        assert!(left_max <= right_min, "{left_max} > {right_min}");
    }

    #[test]
    fn five_element_example() {
        let mut e = entries_from_scores(&[5.0, 1.0, 4.0, 2.0, 3.0]);
        let j = quicksort4trim(&mut e, TrimBoundary::new(2, 5).unwrap()).unwrap();
        assert_eq!(retained(&e, 2), BTreeSet::from([1, 3]));
        assert_eq!(j.plus, vec![3]);
        assert_eq!(j.minus, vec![0]);
        assert_eq!(percentile_score(&e, TrimBoundary::new(2, 5).unwrap()).unwrap(), 2.0);
    }

    #[test]
    fn already_partitioned_gives_empty_journal() {
        let mut e = entries_from_scores(&[1.0, 2.0, 3.0, 4.0]);
        let b = TrimBoundary::new(2, 4).unwrap();
        assert!(quicksort4trim(&mut e, b).unwrap().is_empty());
        assert_eq!(percentile_score(&e, b).unwrap(), 2.0);
    }

    #[test]
    fn equal_scores_use_id_tiebreak() {
        let mut e: Vec<_> = (0..9).rev().map(|id| ScoredEntry::new(3.5, id)).collect();
        let b = TrimBoundary::new(4, 9).unwrap();
        quicksort4trim(&mut e, b).unwrap();
        assert_eq!(retained(&e, 4), BTreeSet::from([0, 1, 2, 3]));
        assert_eq!(percentile_score(&e, b).unwrap(), 3.5);
    }

    #[test]
    fn median_of_101_matches_full_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let scores: Vec<f64> = (0..101).map(|_| rng.random_range(0.0..50.0)).collect();
        let mut sorted = scores.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut e = entries_from_scores(&scores);
        let b = TrimBoundary::new(51, 101).unwrap();
        quicksort4trim(&mut e, b).unwrap();
        assert_eq!(percentile_score(&e, b).unwrap(), sorted[50]);
    }

    #[test]
    fn rejects_bad_input() {
        let b = TrimBoundary::new(1, 2).unwrap();
        assert!(quicksort4trim(&mut [], b).is_err());
        let mut nan = entries_from_scores(&[f64::NAN, 1.0]);
        assert!(quicksort4trim(&mut nan, b).is_err());
        let mut neg = entries_from_scores(&[-1.0, 1.0]);
        assert!(quicksort4trim(&mut neg, b).is_err());
        let mut dup = vec![ScoredEntry::new(1.0, 0), ScoredEntry::new(2.0, 0)];
        assert!(quicksort4trim(&mut dup, b).is_err());
        let mut wrong_n = entries_from_scores(&[1.0, 2.0, 3.0]);
        assert!(quicksort4trim(&mut wrong_n, b).is_err());
        assert!(TrimBoundary::new(0, 4).is_err());
        assert!(TrimBoundary::new(4, 4).is_err());
        assert!(TrimBoundary::from_percentile(150.0, 4).is_err());
        assert_eq!(TrimBoundary::from_percentile(50.0, 7).unwrap().k(), 3);
    }

    #[test]
    fn random_arrays_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut sorter = TrimSorter::new();
        for _ in 0..1000 {
            let n = rng.random_range(2..400);
            let k = rng.random_range(1..n);
            // coarse values force plenty of ties
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..40) as f64 * 0.5).collect();
            let mut e = entries_from_scores(&scores);
            sorter.quicksort4trim(&mut e, TrimBoundary::new(k, n).unwrap()).unwrap();
            assert_eq!(retained(&e, k), oracle_retained(&scores, k));
            assert_partitioned(&e, k);
        }
    }

    #[test]
    fn full_sort_agrees_with_partial() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let scores: Vec<f64> = (0..500).map(|_| rng.random_range(0.0..1.0)).collect();
        let b = TrimBoundary::median(500).unwrap();
        let mut a = entries_from_scores(&scores);
        let mut c = a.clone();
        let ja = quicksort4trim(&mut a, b).unwrap();
        let jc = TrimSorter::new().full_sort(&mut c, b).unwrap();
        assert_eq!(ja, jc);
        assert!(c.windows(2).all(|w| w[0].cmp_key(&w[1]) == Ordering::Less));
    }

    fn scores_strategy() -> impl Strategy<Value = (Vec<f64>, usize)> {
        (2usize..200).prop_flat_map(|n| (proptest::collection::vec(0.0f64..100.0, n), 1..n))
    }

    proptest! {
        #[test]
        fn journal_replays_partition((scores, k) in scores_strategy(), seed in any::<u64>()) {
            let b = TrimBoundary::new(k, scores.len()).unwrap();
            let mut e = entries_from_scores(&scores);
            let mut sorter = TrimSorter::new();
            sorter.quicksort4trim(&mut e, b).unwrap();

            // perturb and re-sort; the journal must map the old retained set onto the new one
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut mask = vec![false; scores.len()];
            for x in &e[..k] { mask[x.id] = true; }
            for x in e.iter_mut() { x.score += rng.random_range(0.0..10.0); }
            let j = sorter.quicksort4trim(&mut e, b).unwrap();

            prop_assert_eq!(j.plus.len(), j.minus.len());
            prop_assert!(j.plus.iter().all(|id| !j.minus.contains(id)));
            j.apply_to_mask(&mut mask);
            let replayed: BTreeSet<usize> = (0..scores.len()).filter(|&i| mask[i]).collect();
            prop_assert_eq!(&replayed, &retained(&e, k));

            let left_max = e[..k].iter().map(|x| x.score).fold(f64::MIN, f64::max);
            let right_min = e[k..].iter().map(|x| x.score).fold(f64::MAX, f64::min);
            prop_assert!(left_max <= right_min);

            // idempotence
            prop_assert!(sorter.quicksort4trim(&mut e, b).unwrap().is_empty());
        }

        #[test]
        fn swaps_bounded_by_threshold_crossings(
            (scores, k) in scores_strategy(),
            noise in proptest::collection::vec(-5.0f64..5.0, 200),
        ) {
            let n = scores.len();
            let b = TrimBoundary::new(k, n).unwrap();
            let mut e = entries_from_scores(&scores);
            let mut sorter = TrimSorter::new();
            sorter.quicksort4trim(&mut e, b).unwrap();
            let tau = percentile_score(&e, b).unwrap();
            let inside: Vec<bool> = {
                let mut m = vec![false; n];
                for x in &e[..k] { m[x.id] = true; }
                m
            };
            for x in e.iter_mut() { x.score = (x.score + noise[x.id]).max(0.0); }
            let crossings = e
                .iter()
                .filter(|x| if inside[x.id] { x.score > tau } else { x.score <= tau })
                .count();
            let j = sorter.quicksort4trim(&mut e, b).unwrap();
            prop_assert!(j.swap_count() <= crossings, "{} > {}", j.swap_count(), crossings);
        }
    }
}
