use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Running cost `f(t,x,m,a) = base + sum_y coef[y] m(y)` and terminal cost
/// `F(x,m) = base_F + sum_y coef_F[y] m(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineCost<S> {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    running_base: Vec<S>,
    running_coef: Vec<Vec<S>>,
    terminal_base: Vec<S>,
    terminal_coef: Vec<Vec<S>>,
}

impl<S: Scalar> AffineCost<S> {
    /// Running tables are flattened `t`-major, then `x`, then `a`.
    pub fn new(
        horizon: usize,
        n_states: usize,
        n_actions: usize,
        running_base: Vec<S>,
        running_coef: Vec<Vec<S>>,
        terminal_base: Vec<S>,
        terminal_coef: Vec<Vec<S>>,
    ) -> Result<Self> {
        let cells = horizon * n_states * n_actions;
        if running_base.len() != cells || running_coef.len() != cells {
            return Err(Error::invalid(format!(
                "running cost tables need {cells} entries"
            )));
        }
        if running_coef.iter().any(|r| r.len() != n_states) {
            return Err(Error::invalid("running cost coefficient rows must have one entry per state"));
        }
        if terminal_base.len() != n_states
            || terminal_coef.len() != n_states
            || terminal_coef.iter().any(|r| r.len() != n_states)
        {
            return Err(Error::invalid("terminal cost tables must be sized by the state count"));
        }
        let all = running_base
            .iter()
            .chain(running_coef.iter().flatten())
            .chain(terminal_base.iter())
            .chain(terminal_coef.iter().flatten());
        for v in all {
            if !v.is_finite() {
                return Err(Error::invalid("cost coefficients must be finite"));
            }
        }
        Ok(AffineCost {
            horizon,
            n_states,
            n_actions,
            running_base,
            running_coef,
            terminal_base,
            terminal_coef,
        })
    }

    pub fn from_fn(
        horizon: usize,
        n_states: usize,
        n_actions: usize,
        mut running: impl FnMut(usize, usize, usize) -> (S, Vec<S>),
        mut terminal: impl FnMut(usize) -> (S, Vec<S>),
    ) -> Result<Self> {
        let mut rb = Vec::new();
        let mut rc = Vec::new();
        for t in 0..horizon {
            for x in 0..n_states {
                for a in 0..n_actions {
                    let (b, c) = running(t, x, a);
                    rb.push(b);
                    rc.push(c);
                }
            }
        }
        let (tb, tc): (Vec<S>, Vec<Vec<S>>) = (0..n_states).map(&mut terminal).unzip();
        Self::new(horizon, n_states, n_actions, rb, rc, tb, tc)
    }

    pub fn zero(horizon: usize, n_states: usize, n_actions: usize) -> Self {
        let cells = horizon * n_states * n_actions;
        AffineCost {
            horizon,
            n_states,
            n_actions,
            running_base: vec![S::zero(); cells],
            running_coef: vec![vec![S::zero(); n_states]; cells],
            terminal_base: vec![S::zero(); n_states],
            terminal_coef: vec![vec![S::zero(); n_states]; n_states],
        }
    }

    fn cell(&self, t: usize, x: usize, a: usize) -> usize {
        (t * self.n_states + x) * self.n_actions + a
    }

    pub fn running(&self, t: usize, x: usize, m: &[S], a: usize) -> S {
        let k = self.cell(t, x, a);
        affine(&self.running_base[k], &self.running_coef[k], m)
    }

    pub fn terminal(&self, x: usize, m: &[S]) -> S {
        affine(&self.terminal_base[x], &self.terminal_coef[x], m)
    }

    pub fn running_base(&self, t: usize, x: usize, a: usize) -> &S {
        &self.running_base[self.cell(t, x, a)]
    }

    pub fn running_coef(&self, t: usize, x: usize, a: usize) -> &[S] {
        &self.running_coef[self.cell(t, x, a)]
    }

    pub fn terminal_base(&self, x: usize) -> &S {
        &self.terminal_base[x]
    }

    pub fn terminal_coef(&self, x: usize) -> &[S] {
        &self.terminal_coef[x]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn convert<T: Scalar>(&self) -> AffineCost<T> {
        let cv = |s: &S| T::from_rational(&s.to_rational());
        let cvv = |r: &Vec<S>| r.iter().map(cv).collect::<Vec<T>>();
        AffineCost {
            horizon: self.horizon,
            n_states: self.n_states,
            n_actions: self.n_actions,
            running_base: self.running_base.iter().map(cv).collect(),
            running_coef: self.running_coef.iter().map(cvv).collect(),
            terminal_base: self.terminal_base.iter().map(cv).collect(),
            terminal_coef: self.terminal_coef.iter().map(cvv).collect(),
        }
    }
}

fn affine<S: Scalar>(base: &S, coef: &[S], m: &[S]) -> S {
    coef.iter()
        .zip(m)
        .fold(base.clone(), |acc, (c, w)| acc + c.clone() * w)
}
