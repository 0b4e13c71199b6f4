//! Independent oracles shared by the integration suites. Everything here
//! recomputes results through a different algorithmic route than the
//! library: min-cost flow instead of the transportation simplex, dense LU
//! solves instead of Cholesky, quadrature instead of closed forms.

#![allow(dead_code)]

use ilc_core::embedding::{BinnedPdf, GridSpec};

/// Exact minimum transport cost by successive shortest paths on the
/// bipartite flow network (Bellman-Ford on the residual graph).
pub fn min_cost_flow_emd(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> f64 {
    let m = supply.len();
    let n = demand.len();
    let source = m + n;
    let sink = m + n + 1;
    let n_nodes = m + n + 2;

    #[derive(Clone)]
    struct Edge {
        to: usize,
        cap: f64,
        cost: f64,
        rev: usize,
    }
    let mut graph: Vec<Vec<Edge>> = vec![Vec::new(); n_nodes];
    let add_edge = |graph: &mut Vec<Vec<Edge>>, from: usize, to: usize, cap: f64, cost: f64| {
        let rev_from = graph[to].len();
        let rev_to = graph[from].len();
        graph[from].push(Edge { to, cap, cost, rev: rev_from });
        graph[to].push(Edge { to: from, cap: 0.0, cost: -cost, rev: rev_to });
    };
    for (i, &s) in supply.iter().enumerate() {
        add_edge(&mut graph, source, i, s, 0.0);
    }
    for (j, &d) in demand.iter().enumerate() {
        add_edge(&mut graph, m + j, sink, d, 0.0);
    }
    for i in 0..m {
        for j in 0..n {
            add_edge(&mut graph, i, m + j, f64::INFINITY, cost[i][j]);
        }
    }

    let total: f64 = supply.iter().sum();
    let mut shipped = 0.0;
    let mut objective = 0.0;
    while shipped + 1e-9 < total {
        // Bellman-Ford from source on the residual graph.
        let mut dist = vec![f64::INFINITY; n_nodes];
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; n_nodes];
        dist[source] = 0.0;
        for _ in 0..n_nodes {
            let mut improved = false;
            for u in 0..n_nodes {
                if !dist[u].is_finite() {
                    continue;
                }
                for (ei, e) in graph[u].iter().enumerate() {
                    if e.cap > 1e-12 && dist[u] + e.cost < dist[e.to] - 1e-15 {
                        dist[e.to] = dist[u] + e.cost;
                        prev[e.to] = Some((u, ei));
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        assert!(dist[sink].is_finite(), "flow network must stay feasible");

        // Bottleneck along the path.
        let mut push = total - shipped;
        let mut node = sink;
        while let Some((u, ei)) = prev[node] {
            push = push.min(graph[u][ei].cap);
            node = u;
        }
        let mut node = sink;
        while let Some((u, ei)) = prev[node] {
            graph[u][ei].cap -= push;
            let rev = graph[u][ei].rev;
            let to = graph[u][ei].to;
            graph[to][rev].cap += push;
            objective += push * graph[u][ei].cost;
            node = u;
        }
        shipped += push;
    }
    objective
}

/// Exhaustive minimum over all non-negative integer transport matrices with
/// the given margins. Only viable for tiny instances; validates the flow
/// oracle itself.
pub fn brute_force_emd(supply: &[usize], demand: &[usize], cost: &[Vec<f64>]) -> f64 {
    fn recurse(
        supply_left: &mut Vec<usize>,
        demand_left: &mut Vec<usize>,
        cost: &[Vec<f64>],
        cell: usize,
        acc: f64,
        best: &mut f64,
    ) {
        let m = supply_left.len();
        let n = demand_left.len();
        if acc >= *best {
            return;
        }
        if cell == m * n {
            if supply_left.iter().all(|&s| s == 0) && demand_left.iter().all(|&d| d == 0) {
                *best = acc;
            }
            return;
        }
        let (i, j) = (cell / n, cell % n);
        let max_here = supply_left[i].min(demand_left[j]);
        // In the last column the row total must close; in the last row the
        // column total must close.
        let forced_min = if j == n - 1 { supply_left[i] } else { 0 };
        let forced_min = forced_min.max(if i == m - 1 { demand_left[j] } else { 0 });
        if forced_min > max_here {
            return;
        }
        for q in forced_min..=max_here {
            supply_left[i] -= q;
            demand_left[j] -= q;
            recurse(supply_left, demand_left, cost, cell + 1, acc + q as f64 * cost[i][j], best);
            supply_left[i] += q;
            demand_left[j] += q;
        }
    }

    let mut best = f64::INFINITY;
    recurse(
        &mut supply.to_vec(),
        &mut demand.to_vec(),
        cost,
        0,
        0.0,
        &mut best,
    );
    best
}

/// Cell-center Euclidean costs between the occupied cells of two
/// distributions, plus their supplies/demands: the LP view of an EMD
/// instance.
pub fn emd_instance(f: &BinnedPdf, g: &BinnedPdf) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let grid = &f.grid;
    let sources: Vec<(usize, usize, f64)> = f.occupied().collect();
    let sinks: Vec<(usize, usize, f64)> = g.occupied().collect();
    let supply: Vec<f64> = sources.iter().map(|s| s.2).collect();
    let demand: Vec<f64> = sinks.iter().map(|s| s.2).collect();
    let cost: Vec<Vec<f64>> = sources
        .iter()
        .map(|&(sx, sy, _)| {
            let cs = grid.center(sx, sy);
            sinks
                .iter()
                .map(|&(tx, ty, _)| {
                    let ct = grid.center(tx, ty);
                    ((cs[0] - ct[0]).powi(2) + (cs[1] - ct[1]).powi(2)).sqrt()
                })
                .collect()
        })
        .collect();
    (supply, demand, cost)
}

/// Random equal-mass histogram pair on a shared grid.
pub fn random_histogram_pair(
    rng: &mut impl rand::Rng,
    bins: usize,
    total_mass: usize,
) -> (BinnedPdf, BinnedPdf) {
    let grid = GridSpec::new(
        [0.0, 0.0],
        [bins as f64 * 1.5, bins as f64],
        [bins, bins],
    )
    .unwrap();
    let make = |rng: &mut dyn rand::RngCore| {
        let mut counts = vec![0.0; grid.n_cells()];
        for _ in 0..total_mass {
            let cell = (rng.next_u64() % grid.n_cells() as u64) as usize;
            counts[cell] += 1.0;
        }
        BinnedPdf {
            grid,
            counts,
            total_mass: total_mass as f64,
        }
    };
    (make(rng), make(rng))
}

pub mod gp {
    use ilc_core::surrogate::{Hyperparams, Matern52, Observation, ParamSpace};
    use nalgebra::{DMatrix, DVector};

    /// Posterior mean/stddev by forming the full kernel matrix and solving
    /// with LU decomposition (not Cholesky). Same kernel, independent
    /// linear algebra.
    pub fn dense_posterior(
        observations: &[Observation],
        space: &ParamSpace,
        hypers: &Hyperparams,
        query: &[f64],
    ) -> (f64, f64) {
        let n = observations.len();
        let x: Vec<Vec<f64>> = observations.iter().map(|o| space.normalize(&o.params)).collect();
        let y: Vec<f64> = observations.iter().map(|o| o.objective).collect();
        let mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let scale = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        let y_std = DVector::from_iterator(n, y.iter().map(|v| (v - mean) / scale));

        let kern = Matern52 {
            length_scales: hypers.length_scales.clone(),
            signal_var: hypers.signal_var,
        };
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] = kern.eval(&x[i], &x[j]);
            }
            k[(i, i)] += hypers.noise_var;
        }
        let lu = k.lu();
        let qn = space.normalize(query);
        let k_star = DVector::from_iterator(n, x.iter().map(|xi| kern.eval(xi, &qn)));
        let alpha = lu.solve(&y_std).expect("kernel matrix invertible");
        let v = lu.solve(&k_star).expect("kernel matrix invertible");
        let mu_std = k_star.dot(&alpha);
        let var_std = (hypers.signal_var - k_star.dot(&v)).max(0.0);
        (mean + scale * mu_std, scale * var_std.sqrt())
    }

    /// E[max(f_best - xi - Y, 0)] for Y ~ N(mu, sigma^2) by Simpson
    /// quadrature over the improvement region.
    pub fn ei_quadrature(mu: f64, sigma: f64, f_best: f64, xi: f64) -> f64 {
        if sigma <= 0.0 {
            return 0.0;
        }
        let t = f_best - xi;
        let lower = (mu - 14.0 * sigma).min(t - 14.0 * sigma);
        let upper = t;
        if upper <= lower {
            return 0.0;
        }
        let steps = 40_000usize; // even
        let h = (upper - lower) / steps as f64;
        let pdf = |y: f64| {
            let z = (y - mu) / sigma;
            (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
        };
        let integrand = |y: f64| (t - y) * pdf(y);
        let mut sum = integrand(lower) + integrand(upper);
        for k in 1..steps {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * integrand(lower + k as f64 * h);
        }
        sum * h / 3.0
    }
}
