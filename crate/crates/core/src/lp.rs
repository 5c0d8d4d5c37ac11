//! Exact rational linear programming: a dense two-phase simplex with Bland's
//! rule, and a transportation simplex for optimal transport between finite
//! distributions.

use std::collections::VecDeque;
use std::fmt::{self, Write as _};

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::scalar::{format_rational, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Ge,
    Eq,
    Le,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Ge => ">=",
            Relation::Eq => "=",
            Relation::Le => "<=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coefs: Vec<Rational>,
    pub relation: Relation,
    pub rhs: Rational,
}

/// `minimize objective . x` subject to the constraints and `x >= 0`.
/// Without an objective the program is a feasibility problem.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub labels: Vec<String>,
    pub constraints: Vec<Constraint>,
    pub objective: Option<Vec<Rational>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<Rational>, value: Rational },
    Infeasible,
    Unbounded,
}

impl LinearProgram {
    pub fn new(labels: Vec<String>) -> Self {
        LinearProgram {
            labels,
            constraints: Vec::new(),
            objective: None,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.labels.len()
    }

    pub fn push(&mut self, coefs: Vec<Rational>, relation: Relation, rhs: Rational) -> Result<()> {
        if coefs.len() != self.n_vars() {
            return Err(Error::invalid(format!(
                "constraint has {} coefficients for {} variables",
                coefs.len(),
                self.n_vars()
            )));
        }
        self.constraints.push(Constraint {
            coefs,
            relation,
            rhs,
        });
        Ok(())
    }

    pub fn set_objective(&mut self, c: Vec<Rational>) -> Result<()> {
        if c.len() != self.n_vars() {
            return Err(Error::invalid("objective length differs from variable count"));
        }
        self.objective = Some(c);
        Ok(())
    }

    /// Whether `x` satisfies every constraint and sign restriction exactly.
    pub fn is_feasible(&self, x: &[Rational]) -> bool {
        x.len() == self.n_vars()
            && x.iter().all(|v| !v.is_negative())
            && self.constraints.iter().all(|c| {
                let lhs: Rational = c.coefs.iter().zip(x).map(|(a, v)| a * v).sum();
                match c.relation {
                    Relation::Ge => lhs >= c.rhs,
                    Relation::Eq => lhs == c.rhs,
                    Relation::Le => lhs <= c.rhs,
                }
            })
    }

    /// Text listing of the matrix with rational entries, one constraint per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "variables {}", self.n_vars());
        for (j, l) in self.labels.iter().enumerate() {
            let _ = writeln!(out, "x{j} {l}");
        }
        if let Some(c) = &self.objective {
            let _ = writeln!(out, "minimize {}", render_row(c));
        }
        let _ = writeln!(out, "constraints {}", self.constraints.len());
        for c in &self.constraints {
            let _ = writeln!(
                out,
                "{} {} {}",
                render_row(&c.coefs),
                c.relation,
                format_rational(&c.rhs)
            );
        }
        out
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        Tableau::build(self).solve(self.objective.as_deref())
    }
}

fn render_row(row: &[Rational]) -> String {
    let terms: Vec<String> = row
        .iter()
        .enumerate()
        .filter(|(_, a)| !a.is_zero())
        .map(|(j, a)| format!("{}*x{j}", format_rational(a)))
        .collect();
    if terms.is_empty() {
        "0".to_string()
    } else {
        terms.join(" + ")
    }
}

struct Tableau {
    /// Rows `[a | b]`.
    rows: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    n_orig: usize,
    /// Columns at or beyond this index are artificial.
    first_artificial: usize,
    n_cols: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.n_vars();
        let mut normalized = Vec::with_capacity(lp.constraints.len());
        for c in &lp.constraints {
            let (mut coefs, mut rel, mut rhs) = (c.coefs.clone(), c.relation, c.rhs.clone());
            if rhs.is_negative() {
                coefs.iter_mut().for_each(|a| *a = -a.clone());
                rhs = -rhs;
                rel = match rel {
                    Relation::Ge => Relation::Le,
                    Relation::Le => Relation::Ge,
                    Relation::Eq => Relation::Eq,
                };
            }
            // a x >= 0 is -a x + s = 0 with s basic at zero
            if rel == Relation::Ge && rhs.is_zero() {
                coefs.iter_mut().for_each(|a| *a = -a.clone());
                rel = Relation::Le;
            }
            normalized.push((coefs, rel, rhs));
        }
        let n_slack = normalized
            .iter()
            .filter(|(_, r, _)| *r != Relation::Eq)
            .count();
        let n_art = normalized
            .iter()
            .filter(|(_, r, _)| *r != Relation::Le)
            .count();
        let first_artificial = n + n_slack;
        let n_cols = first_artificial + n_art;
        let mut rows = Vec::with_capacity(normalized.len());
        let mut basis = Vec::with_capacity(normalized.len());
        let (mut s, mut a) = (n, first_artificial);
        for (coefs, rel, rhs) in normalized {
            let mut row = coefs;
            row.resize(n_cols + 1, Rational::zero());
            match rel {
                Relation::Le => {
                    row[s] = Rational::one();
                    basis.push(s);
                    s += 1;
                }
                Relation::Ge => {
                    row[s] = -Rational::one();
                    s += 1;
                    row[a] = Rational::one();
                    basis.push(a);
                    a += 1;
                }
                Relation::Eq => {
                    row[a] = Rational::one();
                    basis.push(a);
                    a += 1;
                }
            }
            row[n_cols] = rhs;
            rows.push(row);
        }
        Tableau {
            rows,
            basis,
            n_orig: n,
            first_artificial,
            n_cols,
        }
    }

    fn pivot(&mut self, r: usize, col: usize, z: &mut [Rational]) {
        let p = self.rows[r][col].clone();
        if !p.is_one() {
            for v in self.rows[r].iter_mut() {
                if !v.is_zero() {
                    *v = &*v / &p;
                }
            }
        }
        let pivot_row = self.rows[r].clone();
        let nz: Vec<usize> = (0..pivot_row.len())
            .filter(|&j| !pivot_row[j].is_zero())
            .collect();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[col].is_zero() {
                continue;
            }
            let f = row[col].clone();
            for &j in &nz {
                row[j] -= &f * &pivot_row[j];
            }
        }
        if !z[col].is_zero() {
            let f = z[col].clone();
            for &j in &nz {
                z[j] -= &f * &pivot_row[j];
            }
        }
        self.basis[r] = col;
    }

    /// Reduced-cost row for costs `c` over the first `c.len()` columns.
    fn reduced_costs(&self, c: &[Rational]) -> Vec<Rational> {
        let mut z = vec![Rational::zero(); self.n_cols + 1];
        z[..c.len()].clone_from_slice(c);
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            if b < c.len() && !c[b].is_zero() {
                let f = c[b].clone();
                for (zj, v) in z.iter_mut().zip(row) {
                    if !v.is_zero() {
                        *zj -= &f * v;
                    }
                }
            }
        }
        z
    }

    /// Bland's rule over columns `< limit`. Returns false when unbounded.
    fn optimize(&mut self, z: &mut [Rational], limit: usize) -> bool {
        loop {
            let Some(col) = (0..limit).find(|&j| z[j].is_negative()) else {
                return true;
            };
            let rhs = self.n_cols;
            let mut leave: Option<(usize, Rational)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[col].is_positive() {
                    let ratio = &row[rhs] / &row[col];
                    let better = match &leave {
                        None => true,
                        Some((k, best)) => {
                            ratio < *best || (ratio == *best && self.basis[i] < self.basis[*k])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, col, z),
                None => return false,
            }
        }
    }

    fn solve(mut self, objective: Option<&[Rational]>) -> Result<LpOutcome> {
        let rhs = self.n_cols;
        if self.first_artificial < self.n_cols {
            let mut c1 = vec![Rational::zero(); self.n_cols];
            c1[self.first_artificial..].iter_mut().for_each(|v| *v = Rational::one());
            let mut z = self.reduced_costs(&c1);
            if !self.optimize(&mut z, self.n_cols) {
                return Err(Error::Internal("phase one is unbounded".into()));
            }
            let infeasibility: Rational = self
                .rows
                .iter()
                .zip(&self.basis)
                .filter(|(_, &b)| b >= self.first_artificial)
                .map(|(row, _)| row[rhs].clone())
                .sum();
            if infeasibility.is_positive() {
                return Ok(LpOutcome::Infeasible);
            }
            self.expel_artificials(&mut z);
        }
        let limit = self.first_artificial;
        let value = match objective {
            Some(c) => {
                let mut z = self.reduced_costs(c);
                if !self.optimize(&mut z, limit) {
                    return Ok(LpOutcome::Unbounded);
                }
                -z[rhs].clone()
            }
            None => Rational::zero(),
        };
        let mut x = vec![Rational::zero(); self.n_orig];
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            if b < self.n_orig {
                x[b] = row[rhs].clone();
            }
        }
        Ok(LpOutcome::Optimal { x, value })
    }

    /// Pivots zero-valued artificials out of the basis; drops redundant rows.
    fn expel_artificials(&mut self, z: &mut [Rational]) {
        let mut i = 0;
        while i < self.rows.len() {
            if self.basis[i] >= self.first_artificial {
                match (0..self.first_artificial).find(|&j| !self.rows[i][j].is_zero()) {
                    Some(col) => {
                        self.pivot(i, col, z);
                        i += 1;
                    }
                    None => {
                        self.rows.remove(i);
                        self.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
    }
}

/// Optimal plan of a balanced transportation problem.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub cost: Rational,
    /// Positive entries `(i, j, mass)`.
    pub flows: Vec<(usize, usize, Rational)>,
}

/// Minimizes `sum c_ij x_ij` with row sums `supply` and column sums `demand`.
///
/// Transportation simplex over exact rationals: northwest-corner start,
/// potentials on the basis tree, Bland's rule for entering and leaving cells.
pub fn transport(supply: &[Rational], demand: &[Rational], cost: &[Vec<Rational>]) -> Result<TransportPlan> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 {
        return Err(Error::invalid("transport needs non-empty marginals"));
    }
    if cost.len() != m || cost.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("cost matrix does not match marginals"));
    }
    if supply.iter().chain(demand).any(|w| w.is_negative()) {
        return Err(Error::invalid("marginals must be nonnegative"));
    }
    let total_a: Rational = supply.iter().sum();
    let total_b: Rational = demand.iter().sum();
    if total_a != total_b {
        return Err(Error::invalid(format!(
            "unbalanced marginals: {total_a} vs {total_b}"
        )));
    }

    let mut x: Vec<Vec<Option<Rational>>> = vec![vec![None; n]; m];
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (supply[0].clone(), demand[0].clone());
    while i < m && j < n {
        let q = if ra < rb { ra.clone() } else { rb.clone() };
        ra -= &q;
        rb -= &q;
        x[i][j] = Some(q);
        if ra.is_zero() && i + 1 < m {
            i += 1;
            ra = supply[i].clone();
        } else {
            j += 1;
            if j < n {
                rb = demand[j].clone();
            }
        }
    }

    loop {
        let (u, v) = potentials(&x, cost);
        let entering = (0..m)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .find(|&(i, j)| x[i][j].is_none() && (&cost[i][j] - &u[i] - &v[j]).is_negative());
        let Some((ei, ej)) = entering else { break };
        let path = tree_path(&x, ei, ej);
        // path alternates: cells at odd positions lose mass
        let minus: Vec<(usize, usize)> = path.iter().copied().step_by(2).collect();
        let theta = minus
            .iter()
            .map(|&(a, b)| x[a][b].clone().expect("basic cell"))
            .min()
            .expect("cycle has a decreasing cell");
        let leaving = *minus
            .iter()
            .filter(|&&(a, b)| x[a][b].as_ref() == Some(&theta))
            .min()
            .expect("minimum is attained");
        for (k, &(a, b)) in path.iter().enumerate() {
            let cell = x[a][b].as_mut().expect("basic cell");
            if k % 2 == 0 {
                *cell -= &theta;
            } else {
                *cell += &theta;
            }
        }
        x[ei][ej] = Some(theta);
        x[leaving.0][leaving.1] = None;
    }

    let mut total = Rational::zero();
    let mut flows = Vec::new();
    for (i, row) in x.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            if let Some(q) = cell {
                if q.is_positive() {
                    total += q * &cost[i][j];
                    flows.push((i, j, q.clone()));
                }
            }
        }
    }
    Ok(TransportPlan { cost: total, flows })
}

/// Solves `u_i + v_j = c_ij` on basic cells with `u_0 = 0`.
fn potentials(x: &[Vec<Option<Rational>>], cost: &[Vec<Rational>]) -> (Vec<Rational>, Vec<Rational>) {
    let (m, n) = (x.len(), x[0].len());
    let mut u: Vec<Option<Rational>> = vec![None; m];
    let mut v: Vec<Option<Rational>> = vec![None; n];
    u[0] = Some(Rational::zero());
    let mut queue = VecDeque::from([(true, 0usize)]);
    while let Some((is_row, k)) = queue.pop_front() {
        if is_row {
            let ui = u[k].clone().expect("visited");
            for j in 0..n {
                if x[k][j].is_some() && v[j].is_none() {
                    v[j] = Some(&cost[k][j] - &ui);
                    queue.push_back((false, j));
                }
            }
        } else {
            let vj = v[k].clone().expect("visited");
            for i in 0..m {
                if x[i][k].is_some() && u[i].is_none() {
                    u[i] = Some(&cost[i][k] - &vj);
                    queue.push_back((true, i));
                }
            }
        }
    }
    let fill = |p: Vec<Option<Rational>>| p.into_iter().map(|q| q.expect("spanning basis")).collect();
    (fill(u), fill(v))
}

/// Basic cells on the tree path from column `ej` to row `ei`, starting at column `ej`.
fn tree_path(x: &[Vec<Option<Rational>>], ei: usize, ej: usize) -> Vec<(usize, usize)> {
    let (m, n) = (x.len(), x[0].len());
    // nodes: rows 0..m, columns m..m+n
    let mut parent: Vec<Option<usize>> = vec![None; m + n];
    let start = m + ej;
    parent[start] = Some(start);
    let mut queue = VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == ei {
            break;
        }
        let next: Vec<usize> = if node < m {
            (0..n).filter(|&j| x[node][j].is_some()).map(|j| m + j).collect()
        } else {
            (0..m).filter(|&i| x[i][node - m].is_some()).collect()
        };
        for nb in next {
            if parent[nb].is_none() {
                parent[nb] = Some(node);
                queue.push_back(nb);
            }
        }
    }
    let mut cells = Vec::new();
    let mut node = ei;
    while node != start {
        let p = parent[node].expect("tree connects entering cell");
        let cell = if node < m { (node, p - m) } else { (p, node - m) };
        cells.push(cell);
        node = p;
    }
    cells.reverse();
    cells
}
