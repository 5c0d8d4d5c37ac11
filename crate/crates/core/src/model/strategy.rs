use std::fmt;

use crate::error::{Error, Result};

/// Default bound on `|R|` for any enumeration over restricted strategies.
pub const DEFAULT_ENUMERATION_CAP: usize = 4096;

/// A Markov feedback rule over the player's own state: one action per `(t, x)`.
///
/// The derived order is lexicographic over the table flattened `t`-major,
/// which coincides with [`enumerate_strategies`] order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RestrictedStrategy {
    n_states: usize,
    table: Vec<usize>,
}

impl RestrictedStrategy {
    /// `table[t * n_states + x]` is the action at `(t, x)`.
    pub fn new(n_states: usize, table: Vec<usize>) -> Result<Self> {
        if n_states == 0 || !table.len().is_multiple_of(n_states) {
            return Err(Error::invalid(format!(
                "strategy table of length {} does not tile {n_states} states",
                table.len()
            )));
        }
        Ok(RestrictedStrategy { n_states, table })
    }

    pub fn from_fn(horizon: usize, n_states: usize, mut f: impl FnMut(usize, usize) -> usize) -> Self {
        let table = (0..horizon)
            .flat_map(|t| (0..n_states).map(move |x| (t, x)))
            .map(|(t, x)| f(t, x))
            .collect();
        RestrictedStrategy { n_states, table }
    }

    pub fn constant(horizon: usize, n_states: usize, action: usize) -> Self {
        Self::from_fn(horizon, n_states, |_, _| action)
    }

    pub fn action(&self, t: usize, x: usize) -> usize {
        self.table[t * self.n_states + x]
    }

    pub fn horizon(&self) -> usize {
        self.table.len() / self.n_states
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    /// Position in [`enumerate_strategies`] order for `n_actions` actions.
    pub fn index(&self, n_actions: usize) -> usize {
        self.table.iter().fold(0, |acc, &a| acc * n_actions + a)
    }

    pub fn from_index(index: usize, horizon: usize, n_states: usize, n_actions: usize) -> Self {
        let len = horizon * n_states;
        let mut table = vec![0; len];
        let mut rest = index;
        for slot in table.iter_mut().rev() {
            *slot = rest % n_actions;
            rest /= n_actions;
        }
        RestrictedStrategy { n_states, table }
    }

    /// Cells `(t, x)` where the two strategies prescribe different actions.
    pub fn differing_cells(&self, other: &RestrictedStrategy) -> Vec<(usize, usize)> {
        self.table
            .iter()
            .zip(&other.table)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(k, _)| (k / self.n_states, k % self.n_states))
            .collect()
    }

    pub(crate) fn check(&self, horizon: usize, n_states: usize, n_actions: usize) -> Result<()> {
        if self.n_states != n_states || self.table.len() != horizon * n_states {
            return Err(Error::invalid(format!(
                "strategy shape {}x{} does not match game {horizon}x{n_states}",
                self.horizon(),
                self.n_states
            )));
        }
        if let Some(a) = self.table.iter().find(|&&a| a >= n_actions) {
            return Err(Error::invalid(format!("action index {a} out of range")));
        }
        Ok(())
    }
}

impl fmt::Display for RestrictedStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (t, row) in self.table.chunks(self.n_states).enumerate() {
            if t > 0 {
                f.write_str("|")?;
            }
            for a in row {
                write!(f, "{a}")?;
            }
        }
        Ok(())
    }
}

/// `|Γ|^(T |X|)`, or `None` on overflow.
pub fn strategy_count(horizon: usize, n_states: usize, n_actions: usize) -> Option<u128> {
    let exp = u32::try_from(horizon.checked_mul(n_states)?).ok()?;
    (n_actions as u128).checked_pow(exp)
}

/// All restricted strategies in lexicographic order, refusing more than `cap`.
pub fn enumerate_strategies(
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    cap: usize,
) -> Result<Vec<RestrictedStrategy>> {
    let count = strategy_count(horizon, n_states, n_actions).unwrap_or(u128::MAX);
    if count > cap as u128 {
        return Err(Error::capacity("restricted strategy enumeration", count, cap as u128));
    }
    Ok((0..count as usize)
        .map(|i| RestrictedStrategy::from_index(i, horizon, n_states, n_actions))
        .collect())
}
