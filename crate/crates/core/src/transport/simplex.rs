//! Transportation-problem network simplex: Vogel start, MODI pricing,
//! Bland's rule during degenerate stretches.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Optimal flows of a balanced transportation problem, as `(i, j, flow)` with flow > 0.
pub(crate) struct Solution<T> {
    pub flows: Vec<(usize, usize, T)>,
}

struct Basis<T> {
    m: usize,
    n: usize,
    cells: Vec<(usize, usize)>,
    flow: Vec<T>,
    /// Basic cell indices touching each node; rows are `0..m`, columns `m..m+n`.
    adj: Vec<Vec<usize>>,
}

impl<T: Real> Basis<T> {
    fn new(m: usize, n: usize) -> Self {
        Self {
            m,
            n,
            cells: Vec::with_capacity(m + n - 1),
            flow: Vec::with_capacity(m + n - 1),
            adj: vec![Vec::new(); m + n],
        }
    }

    fn push(&mut self, i: usize, j: usize, f: T) {
        let k = self.cells.len();
        self.cells.push((i, j));
        self.flow.push(f);
        self.adj[i].push(k);
        self.adj[self.m + j].push(k);
    }

    fn replace(&mut self, k: usize, i: usize, j: usize, f: T) {
        let (oi, oj) = self.cells[k];
        let m = self.m;
        self.adj[oi].retain(|&c| c != k);
        self.adj[m + oj].retain(|&c| c != k);
        self.cells[k] = (i, j);
        self.flow[k] = f;
        self.adj[i].push(k);
        self.adj[m + j].push(k);
    }

    fn other_end(&self, k: usize, node: usize) -> usize {
        let (i, j) = self.cells[k];
        if node == i {
            self.m + j
        } else {
            i
        }
    }

    /// Dual potentials with `u_0 = 0`.
    fn potentials(&self, cost: &[T]) -> (Vec<T>, Vec<T>) {
        let (m, n) = (self.m, self.n);
        let mut pot = vec![T::zero(); m + n];
        let mut seen = vec![false; m + n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(node) = queue.pop_front() {
            for &k in &self.adj[node] {
                let other = self.other_end(k, node);
                if seen[other] {
                    continue;
                }
                let (i, j) = self.cells[k];
                let c = cost[i * n + j];
                pot[other] = c - pot[node];
                seen[other] = true;
                queue.push_back(other);
            }
        }
        let v = pot.split_off(m);
        (pot, v)
    }

    /// Basic cells on the tree path from `from` to `to`.
    fn path(&self, from: usize, to: usize) -> Vec<usize> {
        let total = self.m + self.n;
        let mut via = vec![usize::MAX; total];
        let mut seen = vec![false; total];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(node) = queue.pop_front() {
            if node == to {
                break;
            }
            for &k in &self.adj[node] {
                let other = self.other_end(k, node);
                if !seen[other] {
                    seen[other] = true;
                    via[other] = k;
                    queue.push_back(other);
                }
            }
        }
        let mut out = Vec::new();
        let mut node = to;
        while node != from {
            let k = via[node];
            out.push(k);
            node = self.other_end(k, node);
        }
        out.reverse();
        out
    }
}

/// Vogel's approximation. Each allocation retires exactly one line (the last
/// retires two), so the result is a spanning tree of `m + n − 1` cells.
fn vogel<T: Real>(supply: &[T], demand: &[T], cost: &[T]) -> Basis<T> {
    let (m, n) = (supply.len(), demand.len());
    let mut basis = Basis::new(m, n);
    let mut s = supply.to_vec();
    let mut d = demand.to_vec();
    let mut row_live = vec![true; m];
    let mut col_live = vec![true; n];
    let (mut rows_left, mut cols_left) = (m, n);

    let penalty = |vals: &mut dyn Iterator<Item = T>| -> (T, T) {
        let (mut lo, mut lo2) = (T::infinity(), T::infinity());
        for c in vals {
            if c < lo {
                lo2 = lo;
                lo = c;
            } else if c < lo2 {
                lo2 = c;
            }
        }
        let pen = if lo2.is_finite() { lo2 - lo } else { lo };
        (pen, lo)
    };

    while rows_left > 0 && cols_left > 0 {
        if rows_left == 1 || cols_left == 1 {
            // Remaining lines are forced.
            let rows: Vec<usize> = (0..m).filter(|&i| row_live[i]).collect();
            let cols: Vec<usize> = (0..n).filter(|&j| col_live[j]).collect();
            if rows.len() == 1 {
                let i = rows[0];
                for &j in &cols {
                    basis.push(i, j, d[j]);
                }
            } else {
                let j = cols[0];
                for &i in &rows {
                    basis.push(i, j, s[i]);
                }
            }
            break;
        }
        // Line with the largest penalty; ties to the lowest row, then column.
        let mut best: Option<(T, bool, usize)> = None;
        for i in (0..m).filter(|&i| row_live[i]) {
            let (pen, _) = penalty(&mut (0..n).filter(|&j| col_live[j]).map(|j| cost[i * n + j]));
            if best.is_none_or(|(p, _, _)| pen > p) {
                best = Some((pen, true, i));
            }
        }
        for j in (0..n).filter(|&j| col_live[j]) {
            let (pen, _) = penalty(&mut (0..m).filter(|&i| row_live[i]).map(|i| cost[i * n + j]));
            if best.is_none_or(|(p, _, _)| pen > p) {
                best = Some((pen, false, j));
            }
        }
        let (_, is_row, line) = best.expect("live lines remain");
        let (i, j) = if is_row {
            let j = (0..n)
                .filter(|&j| col_live[j])
                .min_by(|&a, &b| cost[line * n + a].total_cmp_real(&cost[line * n + b]))
                .expect("live column");
            (line, j)
        } else {
            let i = (0..m)
                .filter(|&i| row_live[i])
                .min_by(|&a, &b| cost[a * n + line].total_cmp_real(&cost[b * n + line]))
                .expect("live row");
            (i, line)
        };
        if s[i] <= d[j] {
            basis.push(i, j, s[i]);
            d[j] = d[j] - s[i];
            s[i] = T::zero();
            row_live[i] = false;
            rows_left -= 1;
        } else {
            basis.push(i, j, d[j]);
            s[i] = s[i] - d[j];
            d[j] = T::zero();
            col_live[j] = false;
            cols_left -= 1;
        }
    }
    basis
}

trait TotalCmp {
    fn total_cmp_real(&self, other: &Self) -> std::cmp::Ordering;
}

impl<T: Real> TotalCmp for T {
    fn total_cmp_real(&self, other: &Self) -> std::cmp::Ordering {
        self.partial_cmp(other).unwrap_or(std::cmp::Ordering::Equal)
    }
}

/// Solve `min Σ c_ij μ_ij` s.t. row sums `supply`, column sums `demand`, `μ ≥ 0`.
/// `cost` is row-major `m × n`; supplies and demands must be positive and balanced.
pub(crate) fn solve<T: Real>(supply: &[T], demand: &[T], cost: &[T]) -> Result<Solution<T>> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 || cost.len() != m * n {
        return Err(Error::Dimension(format!(
            "transport problem {m} x {n} with {} costs",
            cost.len()
        )));
    }
    let mut basis = vogel(supply, demand, cost);
    debug_assert_eq!(basis.cells.len(), m + n - 1);

    let cmax = cost.iter().fold(T::zero(), |a, &c| a.max(c.abs()));
    let tol = T::epsilon() * T::lit(64.0) * cmax.max(T::one());
    let max_pivots = 50 * (m + n) * (m + n) + 1000;
    let mut in_basis = vec![false; m * n];
    for &(i, j) in &basis.cells {
        in_basis[i * n + j] = true;
    }
    let mut degenerate = false;

    for _ in 0..max_pivots {
        let (u, v) = basis.potentials(cost);
        // Dantzig pricing; Bland's first-improving rule after a degenerate pivot.
        let mut entering: Option<(usize, T)> = None;
        for idx in 0..m * n {
            if in_basis[idx] {
                continue;
            }
            let (i, j) = (idx / n, idx % n);
            let r = cost[idx] - u[i] - v[j];
            if r < -tol {
                if degenerate {
                    entering = Some((idx, r));
                    break;
                }
                if entering.is_none_or(|(_, best)| r < best) {
                    entering = Some((idx, r));
                }
            }
        }
        let Some((idx, _)) = entering else {
            let flows = basis
                .cells
                .iter()
                .zip(&basis.flow)
                .filter(|(_, &f)| f > T::zero())
                .map(|(&(i, j), &f)| (i, j, f))
                .collect();
            return Ok(Solution { flows });
        };
        let (ei, ej) = (idx / n, idx % n);
        let path = basis.path(m + ej, ei);
        // Cells at even positions along the path from the entering column lose flow.
        let mut leave: Option<usize> = None;
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let better = match leave {
                    None => true,
                    Some(l) => {
                        let (fk, fl) = (basis.flow[k], basis.flow[l]);
                        let (ck, cl) = (basis.cells[k], basis.cells[l]);
                        fk < fl || (fk == fl && ck.0 * n + ck.1 < cl.0 * n + cl.1)
                    }
                };
                if better {
                    leave = Some(k);
                }
            }
        }
        let leave = leave.expect("cycle has a decreasing cell");
        let theta = basis.flow[leave];
        degenerate = theta <= T::zero();
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis.flow[k] = (basis.flow[k] - theta).max(T::zero());
            } else {
                basis.flow[k] = basis.flow[k] + theta;
            }
        }
        let (li, lj) = basis.cells[leave];
        in_basis[li * n + lj] = false;
        in_basis[idx] = true;
        basis.replace(leave, ei, ej, theta);
    }
    Err(Error::Numerical(format!(
        "network simplex exceeded {max_pivots} pivots"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total(sol: &Solution<f64>, cost: &[f64], n: usize) -> f64 {
        sol.flows.iter().map(|&(i, j, f)| f * cost[i * n + j]).sum()
    }

    #[test]
    fn textbook_instance() {
        // Classic 3 x 4 instance with optimum 743 (supplies 7, 9, 18; demands 5, 8, 7, 14).
        let supply = [7.0, 9.0, 18.0];
        let demand = [5.0, 8.0, 7.0, 14.0];
        let cost = [19.0, 30.0, 50.0, 10.0, 70.0, 30.0, 40.0, 60.0, 40.0, 8.0, 70.0, 20.0];
        let sol = solve(&supply, &demand, &cost).unwrap();
        assert!((total(&sol, &cost, 4) - 743.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_square_assignment() {
        let w = [0.25; 4];
        let cost: Vec<f64> = (0..16).map(|k| (((k / 4) as f64) - ((k % 4) as f64)).powi(2)).collect();
        let sol = solve(&w, &w, &cost).unwrap();
        assert!(total(&sol, &cost, 4).abs() < 1e-15);
        assert_eq!(sol.flows.len(), 4);
    }

    #[test]
    fn single_row() {
        let sol = solve(&[1.0], &[0.2, 0.3, 0.5], &[1.0, 2.0, 3.0]).unwrap();
        assert!((total(&sol, &[1.0, 2.0, 3.0], 3) - 2.3).abs() < 1e-12);
    }
}
