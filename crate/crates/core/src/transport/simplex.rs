//! Exact transportation simplex.
//!
//! Solves `min sum c_ij x_ij` subject to row sums = supply, column sums =
//! demand, `x >= 0`, on a dense cost matrix. The basis is a spanning tree
//! over the bipartite node set; pivots enter the arc with the most negative
//! reduced cost found by a wrapping block scan, push flow around the unique
//! tree cycle, and drop the blocking arc. No approximation anywhere: the
//! returned flows are a true optimal basic solution.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimplexError {
    #[error("supply and demand totals differ by {imbalance}")]
    Unbalanced { imbalance: f64 },
    #[error("pivoting did not converge within {0} iterations")]
    DidNotConverge(usize),
}

#[derive(Debug, Clone, Copy)]
struct BasicArc {
    row: usize,
    col: usize,
    flow: f64,
}

/// Optimal transportation plan between `supply` and `demand` under `cost`
/// (row-major, `supply.len() x demand.len()`). Returns the optimal cost and
/// the positive flows `(row, col, flow)`.
pub(crate) fn solve_transportation(
    supply: &[f64],
    demand: &[f64],
    cost: &[f64],
) -> Result<(f64, Vec<(usize, usize, f64)>), SimplexError> {
    let m = supply.len();
    let n = demand.len();
    if m == 0 || n == 0 {
        return Ok((0.0, Vec::new()));
    }
    debug_assert_eq!(cost.len(), m * n);
    let total_supply: f64 = supply.iter().sum();
    let total_demand: f64 = demand.iter().sum();
    let imbalance = total_supply - total_demand;
    if imbalance.abs() > 1e-9 * total_supply.max(total_demand).max(1.0) {
        return Err(SimplexError::Unbalanced { imbalance });
    }

    let mut state = Tree::northwest_corner(supply, demand);
    let max_cost = cost.iter().cloned().fold(0.0, f64::max);
    let eps = 1e-10 * max_cost.max(1.0);

    // Wrapping block scan for the entering arc: cheap per pivot, and the
    // most-negative-in-block rule keeps the pivot count low.
    let block = ((m * n) as f64).sqrt().ceil() as usize * 2;
    let block = block.clamp(64, 8192).min(m * n);
    let max_pivots = 200 * (m + n) + 20_000;

    let mut cursor = 0usize;
    let mut pivots = 0usize;
    loop {
        state.compute_duals(cost, n);

        // Bland-style first-negative rule after a generous budget, as a
        // degeneracy safety net.
        let blands = pivots > max_pivots / 2;
        let mut best: Option<(usize, f64)> = None;
        let mut scanned = 0usize;
        let total = m * n;
        while scanned < total {
            let cell = cursor;
            cursor = (cursor + 1) % total;
            scanned += 1;
            let (i, j) = (cell / n, cell % n);
            let reduced = cost[cell] - state.u[i] - state.v[j];
            if reduced < -eps {
                match best {
                    Some((_, r)) if r <= reduced => {}
                    _ => best = Some((cell, reduced)),
                }
                if blands {
                    break;
                }
            }
            if best.is_some() && scanned >= block {
                break;
            }
        }

        let Some((cell, _)) = best else {
            break; // No improving arc anywhere: optimal.
        };

        state.pivot(cell / n, cell % n);
        pivots += 1;
        if pivots > max_pivots {
            return Err(SimplexError::DidNotConverge(max_pivots));
        }
    }

    let mut objective = 0.0;
    let mut flows = Vec::new();
    for arc in &state.arcs {
        if arc.flow > 0.0 {
            objective += arc.flow * cost[arc.row * n + arc.col];
            flows.push((arc.row, arc.col, arc.flow));
        }
    }
    flows.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    Ok((objective, flows))
}

/// Spanning-tree basis over nodes `0..m` (rows) and `m..m+n` (columns).
struct Tree {
    m: usize,
    arcs: Vec<BasicArc>,
    /// Node -> incident basic arc ids.
    adjacency: Vec<Vec<usize>>,
    u: Vec<f64>,
    v: Vec<f64>,
    // BFS scratch, reused across pivots.
    visited: Vec<u32>,
    stamp: u32,
    parent_arc: Vec<usize>,
    queue: Vec<usize>,
}

impl Tree {
    /// Northwest-corner start: exactly m+n-1 basic arcs forming a staircase
    /// spanning tree, degenerate zero flows included.
    fn northwest_corner(supply: &[f64], demand: &[f64]) -> Self {
        let m = supply.len();
        let n = demand.len();
        let mut rem_s = supply.to_vec();
        let mut rem_d = demand.to_vec();
        let mut arcs = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let q = rem_s[i].min(rem_d[j]);
            arcs.push(BasicArc {
                row: i,
                col: j,
                flow: q,
            });
            rem_s[i] -= q;
            rem_d[j] -= q;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if rem_s[i] <= 0.0 && i < m - 1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        debug_assert_eq!(arcs.len(), m + n - 1);

        let mut adjacency = vec![Vec::new(); m + n];
        for (id, arc) in arcs.iter().enumerate() {
            adjacency[arc.row].push(id);
            adjacency[m + arc.col].push(id);
        }
        Tree {
            m,
            arcs,
            adjacency,
            u: vec![0.0; m],
            v: vec![0.0; n],
            visited: vec![0; m + n],
            stamp: 0,
            parent_arc: vec![usize::MAX; m + n],
            queue: Vec::with_capacity(m + n),
        }
    }

    /// Dual prices from the basis tree: u[i] + v[j] = c[i][j] on basic arcs.
    fn compute_duals(&mut self, cost: &[f64], n: usize) {
        self.stamp += 1;
        self.queue.clear();
        self.queue.push(0);
        self.visited[0] = self.stamp;
        self.u[0] = 0.0;
        let mut head = 0;
        while head < self.queue.len() {
            let node = self.queue[head];
            head += 1;
            for &arc_id in &self.adjacency[node] {
                let arc = self.arcs[arc_id];
                let other = if node < self.m {
                    self.m + arc.col
                } else {
                    arc.row
                };
                if self.visited[other] == self.stamp {
                    continue;
                }
                self.visited[other] = self.stamp;
                let c = cost[arc.row * n + arc.col];
                if other >= self.m {
                    self.v[arc.col] = c - self.u[arc.row];
                } else {
                    self.u[arc.row] = c - self.v[arc.col];
                }
                self.queue.push(other);
            }
        }
    }

    /// Bring arc (row, col) into the basis, push flow around the cycle it
    /// closes, and drop the arc that hits zero first.
    fn pivot(&mut self, row: usize, col: usize) {
        // Tree path from the row node to the column node.
        let src = row;
        let dst = self.m + col;
        self.stamp += 1;
        self.queue.clear();
        self.queue.push(src);
        self.visited[src] = self.stamp;
        self.parent_arc[src] = usize::MAX;
        let mut head = 0;
        while head < self.queue.len() {
            let node = self.queue[head];
            head += 1;
            if node == dst {
                break;
            }
            for &arc_id in &self.adjacency[node] {
                let arc = self.arcs[arc_id];
                let other = if node < self.m {
                    self.m + arc.col
                } else {
                    arc.row
                };
                if self.visited[other] == self.stamp {
                    continue;
                }
                self.visited[other] = self.stamp;
                self.parent_arc[other] = arc_id;
                self.queue.push(other);
            }
        }
        debug_assert_eq!(self.visited[dst], self.stamp, "basis must span all nodes");

        // Walk back dst -> src. Path arcs alternate signs starting with -,
        // because the arc sharing the entering column must give flow up.
        let mut path = Vec::new();
        let mut node = dst;
        while node != src {
            let arc_id = self.parent_arc[node];
            path.push(arc_id);
            let arc = self.arcs[arc_id];
            node = if node >= self.m { arc.row } else { self.m + arc.col };
        }

        let mut theta = f64::INFINITY;
        let mut leaving: Option<usize> = None;
        for (pos, &arc_id) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let flow = self.arcs[arc_id].flow;
                if flow < theta {
                    theta = flow;
                    leaving = Some(arc_id);
                }
            }
        }
        let leaving = leaving.expect("cycle always has a giving arc");

        for (pos, &arc_id) in path.iter().enumerate() {
            if pos % 2 == 0 {
                self.arcs[arc_id].flow -= theta;
            } else {
                self.arcs[arc_id].flow += theta;
            }
        }

        // Replace the leaving arc in place; adjacency follows.
        let old = self.arcs[leaving];
        self.detach(old.row, leaving);
        self.detach(self.m + old.col, leaving);
        self.arcs[leaving] = BasicArc {
            row,
            col,
            flow: theta,
        };
        self.adjacency[row].push(leaving);
        self.adjacency[self.m + col].push(leaving);
    }

    fn detach(&mut self, node: usize, arc_id: usize) {
        let list = &mut self.adjacency[node];
        let pos = list.iter().position(|&a| a == arc_id).expect("arc incident to node");
        list.swap_remove(pos);
    }
}
