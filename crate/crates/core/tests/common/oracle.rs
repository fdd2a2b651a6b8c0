//! Straightforward re-implementation of CAEA learning used as a test oracle.
//! Everything is rebuilt from scratch each step: plain vectors, an edge list,
//! full sorts for winner search.

#![allow(clippy::manual_div_ceil, clippy::manual_is_multiple_of)]

#[derive(Debug, Clone)]
pub struct NaiveCaea {
    pub lambda: usize,
    pub age_max: u32,
    pub weights: Vec<Vec<f64>>,
    pub sigmas: Vec<f64>,
    pub counts: Vec<u64>,
    /// `(a, b, age)` with `a < b`.
    pub edges: Vec<(usize, usize, u32)>,
    pub threshold: Option<f64>,
    pub history: Vec<Vec<f64>>,
    pub seen: usize,
}

fn std_population(window: &[Vec<f64>], j: usize) -> f64 {
    let n = window.len() as f64;
    let mut mean = 0.0;
    for p in window {
        mean += p[j];
    }
    mean /= n;
    let mut ss = 0.0;
    for p in window {
        let dv = p[j] - mean;
        ss += dv * dv;
    }
    (ss / n).sqrt()
}

pub fn naive_sigma(window: &[Vec<f64>]) -> f64 {
    if window.is_empty() {
        return 1e-6;
    }
    let d = window[0].len();
    let df = d as f64;
    let c = (4.0 / (2.0 + df)).powf(1.0 / (4.0 + df));
    let s = (window.len() as f64).powf(-1.0 / (4.0 + df));
    let mut per: Vec<f64> = (0..d).map(|j| c * std_population(window, j) * s).collect();
    per.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = if d % 2 == 1 {
        per[d / 2]
    } else {
        (per[d / 2 - 1] + per[d / 2]) / 2.0
    };
    if m > 0.0 {
        m
    } else {
        1e-6
    }
}

pub fn naive_cim(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    let mut k = 0.0;
    for i in 0..x.len() {
        let diff = x[i] - y[i];
        k += (-(diff * diff) / (2.0 * sigma * sigma)).exp();
    }
    let c = k / x.len() as f64;
    (1.0 - c).max(0.0).sqrt()
}

impl NaiveCaea {
    pub fn new(lambda: usize, age_max: u32) -> Self {
        NaiveCaea {
            lambda,
            age_max,
            weights: vec![],
            sigmas: vec![],
            counts: vec![],
            edges: vec![],
            threshold: None,
            history: vec![],
            seen: 0,
        }
    }

    fn init_size(&self) -> usize {
        (self.lambda + 1) / 2
    }

    fn window(&self) -> Vec<Vec<f64>> {
        let m = self.init_size();
        let start = self.history.len().saturating_sub(m);
        self.history[start..].to_vec()
    }

    fn neighbours(&self, k: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b, _)| {
                if a == k {
                    Some(b)
                } else if b == k {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort();
        out
    }

    pub fn step(&mut self, x: &[f64]) {
        self.seen += 1;
        let m = self.init_size();
        if self.weights.len() < m {
            let s = naive_sigma(&self.window());
            self.weights.push(x.to_vec());
            self.sigmas.push(s);
            self.counts.push(1);
            self.history.push(x.to_vec());
            if self.threshold.is_none() && self.weights.len() == m {
                let s = naive_sigma(&self.window());
                for v in self.sigmas.iter_mut() {
                    *v = s;
                }
                let mut total = 0.0;
                for i in 0..m {
                    let mut best = f64::INFINITY;
                    for j in 0..m {
                        if i != j {
                            let v = naive_cim(&self.weights[i], &self.weights[j], s);
                            if v < best {
                                best = v;
                            }
                        }
                    }
                    total += best;
                }
                self.threshold = Some(total / m as f64);
            }
        } else {
            let vt = self.threshold.unwrap();
            let mut sum = 0.0;
            for s in &self.sigmas {
                sum += s;
            }
            let sigma = sum / self.sigmas.len() as f64;
            let mut ranked: Vec<(f64, usize)> = self
                .weights
                .iter()
                .enumerate()
                .map(|(i, w)| (naive_cim(x, w, sigma), i))
                .collect();
            ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let (v1, k1) = ranked[0];
            let second = ranked.get(1).copied();

            let mut kept = Vec::new();
            for &(a, b, age) in &self.edges {
                let age = if a == k1 || b == k1 { age + 1 } else { age };
                if age <= self.age_max {
                    kept.push((a, b, age));
                }
            }
            self.edges = kept;

            if v1 > vt {
                let s = naive_sigma(&self.window());
                self.weights.push(x.to_vec());
                self.sigmas.push(s);
                self.counts.push(1);
            } else {
                let mk = self.counts[k1] as f64;
                let w: Vec<f64> = self.weights[k1]
                    .iter()
                    .zip(x)
                    .map(|(y, xi)| y + (xi - y) / mk)
                    .collect();
                self.weights[k1] = w;
                self.counts[k1] += 1;
                if let Some((v2, k2)) = second {
                    if v2 <= vt {
                        for j in self.neighbours(k1) {
                            let mj = self.counts[j] as f64;
                            let w: Vec<f64> = self.weights[j]
                                .iter()
                                .zip(x)
                                .map(|(y, xi)| y + (xi - y) / (10.0 * mj))
                                .collect();
                            self.weights[j] = w;
                        }
                        let (a, b) = if k1 < k2 { (k1, k2) } else { (k2, k1) };
                        self.edges.retain(|&(p, q, _)| (p, q) != (a, b));
                        self.edges.push((a, b, 0));
                    }
                }
            }
            self.history.push(x.to_vec());
        }

        if self.seen % self.lambda == 0 {
            let n = self.weights.len();
            let connected: Vec<bool> = (0..n)
                .map(|i| self.edges.iter().any(|&(a, b, _)| a == i || b == i))
                .collect();
            let mut new_index = vec![usize::MAX; n];
            let mut next = 0;
            for i in 0..n {
                if connected[i] {
                    new_index[i] = next;
                    next += 1;
                }
            }
            let (w, s, c) = (
                self.weights.clone(),
                self.sigmas.clone(),
                self.counts.clone(),
            );
            self.weights = (0..n)
                .filter(|&i| connected[i])
                .map(|i| w[i].clone())
                .collect();
            self.sigmas = (0..n).filter(|&i| connected[i]).map(|i| s[i]).collect();
            self.counts = (0..n).filter(|&i| connected[i]).map(|i| c[i]).collect();
            self.edges = self
                .edges
                .iter()
                .map(|&(a, b, age)| (new_index[a], new_index[b], age))
                .collect();
        }
    }

    /// Edges sorted as `(a, b, age)` with `a < b`.
    pub fn edge_set(&self) -> Vec<(usize, usize, u32)> {
        let mut e = self.edges.clone();
        e.sort();
        e
    }
}
