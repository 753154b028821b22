//! Transportation feasibility on a fixed support, decided by max-flow.

use std::collections::VecDeque;

use ndarray::{Array1, Array2};

struct FlowNetwork {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
}

impl FlowNetwork {
    fn new(nodes: usize) -> Self {
        Self {
            adj: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
        }
    }

    fn add_edge(&mut self, u: usize, v: usize, c: f64) {
        self.adj[u].push(self.to.len());
        self.to.push(v);
        self.cap.push(c);
        self.adj[v].push(self.to.len());
        self.to.push(u);
        self.cap.push(0.0);
    }

    fn levels(&self, s: usize, eps: f64) -> Vec<Option<usize>> {
        let mut level = vec![None; self.adj.len()];
        level[s] = Some(0);
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if self.cap[e] > eps && level[v].is_none() {
                    level[v] = Some(level[u].unwrap() + 1);
                    queue.push_back(v);
                }
            }
        }
        level
    }

    fn push(
        &mut self,
        u: usize,
        t: usize,
        limit: f64,
        eps: f64,
        level: &[Option<usize>],
        next: &mut [usize],
    ) -> f64 {
        if u == t {
            return limit;
        }
        while next[u] < self.adj[u].len() {
            let e = self.adj[u][next[u]];
            let v = self.to[e];
            if self.cap[e] > eps && level[v] == level[u].map(|l| l + 1) {
                let pushed = self.push(v, t, limit.min(self.cap[e]), eps, level, next);
                if pushed > 0.0 {
                    self.cap[e] -= pushed;
                    self.cap[e ^ 1] += pushed;
                    return pushed;
                }
            }
            next[u] += 1;
        }
        0.0
    }

    /// Dinic's algorithm.
    fn max_flow(&mut self, s: usize, t: usize, eps: f64) -> f64 {
        let mut total = 0.0;
        loop {
            let level = self.levels(s, eps);
            if level[t].is_none() {
                return total;
            }
            let mut next = vec![0; self.adj.len()];
            loop {
                let pushed = self.push(s, t, f64::INFINITY, eps, &level, &mut next);
                if pushed <= 0.0 {
                    break;
                }
                total += pushed;
            }
        }
    }
}

/// Whether some nonnegative matrix supported on `kernel > 0` has row sums
/// `rows` and column sums `cols`.
pub fn transport_feasible(kernel: &Array2<f64>, rows: &Array1<f64>, cols: &Array1<f64>) -> bool {
    let (n, m) = kernel.dim();
    let total = rows.sum();
    if (total - cols.sum()).abs() > 1e-9 * total.max(1.0) {
        return false;
    }
    let source = n + m;
    let sink = source + 1;
    let mut net = FlowNetwork::new(n + m + 2);
    for i in 0..n {
        if rows[i] > 0.0 {
            net.add_edge(source, i, rows[i]);
        }
    }
    for j in 0..m {
        if cols[j] > 0.0 {
            net.add_edge(n + j, sink, cols[j]);
        }
    }
    for ((i, j), &k) in kernel.indexed_iter() {
        if k > 0.0 && rows[i] > 0.0 && cols[j] > 0.0 {
            net.add_edge(i, n + j, f64::INFINITY);
        }
    }
    let eps = 1e-14 * total.max(1.0);
    let flow = net.max_flow(source, sink, eps);
    flow >= total * (1.0 - 1e-9)
}
