//! Dinic max-flow on real capacities, used for the max-weight-closure step.

use std::collections::VecDeque;

pub(crate) struct FlowGraph {
    head: Vec<usize>,
    to: Vec<usize>,
    cap: Vec<f64>,
    next: Vec<usize>,
    eps: f64,
}

const NONE: usize = usize::MAX;

impl FlowGraph {
    /// Residual capacities at or below `eps` count as saturated.
    pub fn new(nodes: usize, eps: f64) -> Self {
        FlowGraph {
            head: vec![NONE; nodes],
            to: Vec::new(),
            cap: Vec::new(),
            next: Vec::new(),
            eps,
        }
    }

    pub fn add_edge(&mut self, u: usize, v: usize, c: f64) {
        for (a, b, w) in [(u, v, c), (v, u, 0.0)] {
            self.to.push(b);
            self.cap.push(w);
            self.next.push(self.head[a]);
            self.head[a] = self.to.len() - 1;
        }
    }

    fn levels(&self, s: usize) -> Vec<usize> {
        let mut level = vec![NONE; self.head.len()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            let mut e = self.head[u];
            while e != NONE {
                let v = self.to[e];
                if self.cap[e] > self.eps && level[v] == NONE {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
                e = self.next[e];
            }
        }
        level
    }

    fn augment(&mut self, u: usize, t: usize, pushed: f64, level: &[usize], iter: &mut [usize]) -> f64 {
        if u == t {
            return pushed;
        }
        while iter[u] != NONE {
            let e = iter[u];
            let v = self.to[e];
            if self.cap[e] > self.eps && level[v] == level[u] + 1 {
                let got = self.augment(v, t, pushed.min(self.cap[e]), level, iter);
                if got > 0.0 {
                    self.cap[e] -= got;
                    self.cap[e ^ 1] += got;
                    return got;
                }
            }
            iter[u] = self.next[e];
        }
        0.0
    }

    /// Runs max-flow and returns the nodes reachable from `s` in the residual graph.
    pub fn min_cut_source_side(&mut self, s: usize, t: usize) -> Vec<bool> {
        loop {
            let level = self.levels(s);
            if level[t] == NONE {
                return level.iter().map(|&l| l != NONE).collect();
            }
            let mut iter = self.head.clone();
            loop {
                let f = self.augment(s, t, f64::INFINITY, &level, &mut iter);
                if f <= 0.0 {
                    break;
                }
            }
        }
    }
}
