//! Dense two-phase simplex with Bland's rule.

use std::fmt;

const EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LpError {
    Infeasible,
    Unbounded,
    PivotLimit,
}

impl fmt::Display for LpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpError::Infeasible => write!(f, "linear program is infeasible"),
            LpError::Unbounded => write!(f, "linear program is unbounded"),
            LpError::PivotLimit => write!(f, "simplex pivot limit reached"),
        }
    }
}

impl std::error::Error for LpError {}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        self.rows[r].iter_mut().for_each(|x| *x /= p);
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    for (x, y) in row.iter_mut().zip(&pivot_row) {
                        *x -= f * y;
                    }
                }
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes `cost` over the current basis, entering only `allowed` columns.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool]) -> Result<(), LpError> {
        for _ in 0..MAX_PIVOTS {
            let entering = (0..self.width).find(|&j| {
                allowed[j] && !self.basis.contains(&j) && {
                    let d: f64 = cost[j]
                        - self
                            .rows
                            .iter()
                            .zip(&self.basis)
                            .map(|(row, &b)| cost[b] * row[j])
                            .sum::<f64>();
                    d < -EPS
                }
            });
            let Some(j) = entering else { return Ok(()) };
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][j];
                if a > EPS {
                    let ratio = self.rhs(i) / a;
                    let better = match best {
                        None => true,
                        Some((r, _, b)) => ratio < r - EPS || (ratio <= r + EPS && self.basis[i] < b),
                    };
                    if better {
                        best = Some((ratio, i, self.basis[i]));
                    }
                }
            }
            let Some((_, i, _)) = best else { return Err(LpError::Unbounded) };
            self.pivot(i, j);
        }
        Err(LpError::PivotLimit)
    }
}

/// Minimizes `c x` subject to `A x = b`, `x >= 0` (`a` is row-major).
pub fn minimize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution, LpError> {
    let n = c.len();
    let m = b.len();
    let width = n + m;
    let mut rows = Vec::with_capacity(m);
    for (i, (row, &bi)) in a.iter().zip(b).enumerate() {
        let sign = if bi < 0.0 { -1.0 } else { 1.0 };
        let mut r: Vec<f64> = row.iter().map(|x| sign * x).collect();
        r.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
        r.push(sign * bi);
        rows.push(r);
    }
    let mut t = Tableau {
        rows,
        basis: (n..width).collect(),
        width,
    };
    let phase1: Vec<f64> = (0..width).map(|j| if j >= n { 1.0 } else { 0.0 }).collect();
    t.optimize(&phase1, &vec![true; width])?;
    let infeasibility: f64 = (0..m).filter(|&i| t.basis[i] >= n).map(|i| t.rhs(i)).sum();
    if infeasibility > 1e-9 {
        return Err(LpError::Infeasible);
    }
    // drive leftover artificials out; rows with no usable column are redundant
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= n {
            match (0..n).find(|&j| t.rows[i][j].abs() > 1e-9) {
                Some(j) => t.pivot(i, j),
                None => {
                    t.rows.remove(i);
                    t.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }
    let mut cost = c.to_vec();
    cost.extend(std::iter::repeat_n(0.0, m));
    let allowed: Vec<bool> = (0..width).map(|j| j < n).collect();
    t.optimize(&cost, &allowed)?;
    let mut x = vec![0.0; n];
    for (i, &bv) in t.basis.iter().enumerate() {
        if bv < n {
            x[bv] = t.rhs(i);
        }
    }
    let value = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    Ok(LpSolution { x, value })
}

/// `min_rho sum c rho + sum |rho - rho_e|` over the simplex, posed with
/// `rho = rho_e + up - down`.
pub fn conservative_occupancy(c: &[f64], rho_e: &[f64]) -> Result<Vec<f64>, LpError> {
    let k = c.len();
    // columns: up (k), down (k), slack (k)
    let mut cost = Vec::with_capacity(3 * k);
    cost.extend(c.iter().map(|ci| ci + 1.0));
    cost.extend(c.iter().map(|ci| 1.0 - ci));
    cost.extend(std::iter::repeat_n(0.0, k));
    let mut a = Vec::with_capacity(k + 1);
    let mut b = Vec::with_capacity(k + 1);
    for i in 0..k {
        // down - up + slack = rho_e keeps rho nonnegative
        let mut row = vec![0.0; 3 * k];
        row[k + i] = 1.0;
        row[i] = -1.0;
        row[2 * k + i] = 1.0;
        a.push(row);
        b.push(rho_e[i]);
    }
    let mut mass = vec![0.0; 3 * k];
    mass[..k].iter_mut().for_each(|x| *x = 1.0);
    mass[k..2 * k].iter_mut().for_each(|x| *x = -1.0);
    a.push(mass);
    b.push(0.0);
    let sol = minimize(&cost, &a, &b)?;
    Ok((0..k).map(|i| (rho_e[i] + sol.x[i] - sol.x[k + i]).max(0.0)).collect())
}

/// `sum c rho + sum |rho - rho_e|`.
pub fn conservative_objective(c: &[f64], rho_e: &[f64], rho: &[f64]) -> f64 {
    c.iter()
        .zip(rho)
        .zip(rho_e)
        .map(|((ci, r), e)| ci * r + (r - e).abs())
        .sum()
}
