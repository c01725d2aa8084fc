//! Accumulators over the retained sample set, patched from a [`SwapJournal`].
//!
//! An [`Accumulator`] holds `sum_{i in S} term(i)` for the current retained
//! set `S`. Per-sample terms are computed once up front and passed in as a
//! slice indexed by sample id; replaying a journal then costs
//! `|plus| + |minus|` term applications instead of `|S|`.

use nalgebra::SMatrix;

use crate::error::{Error, Result};
use crate::trimsort::SwapJournal;

/// Rebuild cadence used by `Accumulator::default()`.
pub const DEFAULT_REBUILD_EVERY: usize = 32;

/// Additive per-sample contribution.
pub trait Term: Clone {
    fn zero() -> Self;
    fn add_assign(&mut self, other: &Self);
    fn sub_assign(&mut self, other: &Self);
    /// Restore exact symmetry where the term type has it. No-op by default.
    fn symmetrize(&mut self) {}
}

impl Term for f64 {
    fn zero() -> Self {
        0.0
    }
    fn add_assign(&mut self, other: &Self) {
        *self += other;
    }
    fn sub_assign(&mut self, other: &Self) {
        *self -= other;
    }
}

impl<const R: usize, const C: usize> Term for SMatrix<f64, R, C> {
    fn zero() -> Self {
        Self::zeros()
    }
    fn add_assign(&mut self, other: &Self) {
        *self += other;
    }
    fn sub_assign(&mut self, other: &Self) {
        *self -= other;
    }
    fn symmetrize(&mut self) {
        if R != C {
            return;
        }
        for i in 0..R {
            for j in (i + 1)..C {
                let m = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = m;
                self[(j, i)] = m;
            }
        }
    }
}

/// Running sum of per-sample terms over the retained set.
#[derive(Debug, Clone)]
pub struct Accumulator<T: Term> {
    value: T,
    journals_since_rebuild: usize,
    rebuild_every: usize,
    term_ops: u64,
}

impl<T: Term> Default for Accumulator<T> {
    fn default() -> Self {
        Self::new(DEFAULT_REBUILD_EVERY)
    }
}

impl<T: Term> Accumulator<T> {
    /// `rebuild_every` is the number of applied journals after which
    /// [`Accumulator::needs_rebuild`] reports true. Zero disables it.
    pub fn new(rebuild_every: usize) -> Self {
        Self {
            value: T::zero(),
            journals_since_rebuild: 0,
            rebuild_every,
            term_ops: 0,
        }
    }

    pub fn read(&self) -> &T {
        &self.value
    }

    /// Total number of term additions/subtractions performed so far.
    pub fn term_ops(&self) -> u64 {
        self.term_ops
    }

    pub fn journals_since_rebuild(&self) -> usize {
        self.journals_since_rebuild
    }

    pub fn needs_rebuild(&self) -> bool {
        self.rebuild_every > 0 && self.journals_since_rebuild >= self.rebuild_every
    }

    pub fn add(&mut self, id: usize, terms: &[T]) -> Result<()> {
        self.value.add_assign(term(terms, id)?);
        self.term_ops += 1;
        Ok(())
    }

    pub fn remove(&mut self, id: usize, terms: &[T]) -> Result<()> {
        self.value.sub_assign(term(terms, id)?);
        self.term_ops += 1;
        Ok(())
    }

    /// Subtract the terms of `journal.minus`, then add those of `journal.plus`.
    ///
    /// Ids are validated before anything is touched, so on error the
    /// accumulator is unchanged.
    pub fn apply_journal(&mut self, journal: &SwapJournal, terms: &[T]) -> Result<()> {
        self.apply_journal_with(journal, terms.len(), |id| terms[id].clone())
    }

    /// As [`Accumulator::apply_journal`], with terms produced on demand for ids below `n`.
    pub fn apply_journal_with<F>(&mut self, journal: &SwapJournal, n: usize, term_of: F) -> Result<()>
    where
        F: Fn(usize) -> T,
    {
        if let Some(&bad) = journal.minus.iter().chain(&journal.plus).find(|&&id| id >= n) {
            return Err(Error::invalid(format!("journal id {bad} has no term (have {n})")));
        }
        for &id in &journal.minus {
            self.value.sub_assign(&term_of(id));
        }
        for &id in &journal.plus {
            self.value.add_assign(&term_of(id));
        }
        self.term_ops += journal.len() as u64;
        self.journals_since_rebuild += 1;
        Ok(())
    }

    /// Recompute the sum from scratch over `ids`.
    pub fn rebuild<I>(&mut self, ids: I, terms: &[T]) -> Result<()>
    where
        I: IntoIterator<Item = usize>,
    {
        self.rebuild_with(ids, terms.len(), |id| terms[id].clone())
    }

    /// As [`Accumulator::rebuild`], with terms produced on demand for ids below `n`.
    pub fn rebuild_with<I, F>(&mut self, ids: I, n: usize, term_of: F) -> Result<()>
    where
        I: IntoIterator<Item = usize>,
        F: Fn(usize) -> T,
    {
        let mut value = T::zero();
        let mut ops = 0u64;
        for id in ids {
            if id >= n {
                return Err(Error::invalid(format!("id {id} has no term (have {n})")));
            }
            value.add_assign(&term_of(id));
            ops += 1;
        }
        value.symmetrize();
        self.value = value;
        self.term_ops += ops;
        self.journals_since_rebuild = 0;
        Ok(())
    }

    /// Apply `journal`, or rebuild over `retained` when the cadence is due.
    pub fn update<I>(&mut self, journal: &SwapJournal, retained: I, terms: &[T]) -> Result<()>
    where
        I: IntoIterator<Item = usize>,
    {
        self.update_with(journal, retained, terms.len(), |id| terms[id].clone())
    }

    pub fn update_with<I, F>(&mut self, journal: &SwapJournal, retained: I, n: usize, term_of: F) -> Result<()>
    where
        I: IntoIterator<Item = usize>,
        F: Fn(usize) -> T,
    {
        if self.needs_rebuild() {
            self.rebuild_with(retained, n, term_of)
        } else {
            self.apply_journal_with(journal, n, term_of)
        }
    }
}

fn term<T>(terms: &[T], id: usize) -> Result<&T> {
    terms
        .get(id)
        .ok_or_else(|| Error::invalid(format!("id {id} has no term (have {})", terms.len())))
}

pub type Matrix12 = SMatrix<f64, 12, 12>;

/// The REPPnP normal matrix accumulator, `sum D_i^T D_i`.
pub type NormalAccumulator12 = Accumulator<Matrix12>;

/// `D^T D` for a 2x12 block.
pub fn normal_term(d: &SMatrix<f64, 2, 12>) -> Matrix12 {
    d.tr_mul(d)
}

/// Relative Frobenius distance `|a - b| / max(|b|, tiny)`.
pub fn relative_frobenius<const R: usize, const C: usize>(a: &SMatrix<f64, R, C>, b: &SMatrix<f64, R, C>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
