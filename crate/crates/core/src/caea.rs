//! CIM-based ART with Edge and Age (CAEA): an online topological clusterer.
//!
//! Each input is compared with the prototype nodes through the CIM, using the
//! mean of the per-node bandwidths. The two closest nodes and a vigilance
//! threshold estimated from the first `init_size` inputs decide whether the
//! input spawns a node (Case I), moves the winner (Case II), or moves the
//! winner and its neighbours and links the two winners (Case III). Every
//! `lambda` inputs the nodes without edges are dropped as noise.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::bandwidth::{estimate_sigma, DEGENERATE_SIGMA};
use crate::error::{Error, Result};
use crate::similarity::{cim_raw, Bandwidth};

pub type ClassId = usize;

/// Where edge aging happens relative to the vigilance test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgingPolicy {
    /// Age the first winner's edges right after winner selection, on every
    /// case including node creation.
    #[default]
    Algorithm1,
    /// Age only when the input resonates (Cases II and III).
    Prose,
}

impl std::str::FromStr for AgingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "algorithm1" => Ok(AgingPolicy::Algorithm1),
            "prose" => Ok(AgingPolicy::Prose),
            other => Err(Error::Config(format!("unknown aging policy '{other}'"))),
        }
    }
}

impl std::fmt::Display for AgingPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AgingPolicy::Algorithm1 => f.write_str("algorithm1"),
            AgingPolicy::Prose => f.write_str("prose"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaeaParams {
    /// Interval for bandwidth adaptation and isolated-node deletion.
    pub lambda: usize,
    /// Edges whose age exceeds this are removed.
    pub age_max: u32,
    #[serde(default)]
    pub aging_policy: AgingPolicy,
    /// Replaces the estimated vigilance threshold when set. Required for
    /// `lambda < 4`.
    #[serde(default)]
    pub v_threshold_override: Option<f64>,
}

impl CaeaParams {
    pub fn new(lambda: usize, age_max: u32) -> Result<Self> {
        let params = CaeaParams {
            lambda,
            age_max,
            aging_policy: AgingPolicy::default(),
            v_threshold_override: None,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_aging_policy(mut self, policy: AgingPolicy) -> Self {
        self.aging_policy = policy;
        self
    }

    pub fn with_v_threshold(mut self, v: f64) -> Result<Self> {
        self.v_threshold_override = Some(v);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda < 2 {
            return Err(Error::Config(format!(
                "lambda must be >= 2, got {}",
                self.lambda
            )));
        }
        if self.lambda < 4 && self.v_threshold_override.is_none() {
            return Err(Error::Config(format!(
                "lambda = {} leaves fewer than two initial nodes; use lambda >= 4 or set an explicit vigilance threshold",
                self.lambda
            )));
        }
        if self.age_max == 0 {
            return Err(Error::Config("age_max must be positive".into()));
        }
        if let Some(v) = self.v_threshold_override {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!(
                    "vigilance threshold must lie in [0, 1), got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn init_size(&self) -> usize {
        init_size(self.lambda)
    }
}

/// `lambda / 2` rounded half up.
pub fn init_size(lambda: usize) -> usize {
    lambda.div_ceil(2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub weight: Vec<f64>,
    pub sigma: Bandwidth,
    /// Number of inputs accumulated by this node (`M`).
    pub win_count: u64,
    #[serde(default)]
    pub label_histogram: BTreeMap<ClassId, u64>,
}

impl Node {
    fn new(weight: Vec<f64>, sigma: Bandwidth, label: Option<ClassId>) -> Self {
        let mut node = Node {
            weight,
            sigma,
            win_count: 1,
            label_histogram: BTreeMap::new(),
        };
        node.record(label);
        node
    }

    fn record(&mut self, label: Option<ClassId>) {
        if let Some(c) = label {
            *self.label_histogram.entry(c).or_insert(0) += 1;
        }
    }

    /// Majority class; ties go to the smallest class id.
    pub fn majority_class(&self) -> Option<ClassId> {
        let mut best: Option<(ClassId, u64)> = None;
        for (&c, &n) in &self.label_histogram {
            if best.is_none_or(|(_, bn)| n > bn) {
                best = Some((c, n));
            }
        }
        best.map(|(c, _)| c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub a: usize,
    pub b: usize,
    pub age: u32,
}

/// Undirected edges with ages. Each pair is stored once as `(min, max)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<EdgeRecord>", into = "Vec<EdgeRecord>")]
pub struct EdgeStore {
    ages: BTreeMap<(usize, usize), u32>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl EdgeStore {
    pub fn len(&self) -> usize {
        self.ages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ages.is_empty()
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.ages.contains_key(&key(a, b))
    }

    pub fn age(&self, a: usize, b: usize) -> Option<u32> {
        self.ages.get(&key(a, b)).copied()
    }

    /// Creates the edge or resets its age.
    pub fn set(&mut self, a: usize, b: usize, age: u32) -> Result<()> {
        if a == b {
            return Err(Error::InvalidArgument(format!("self-loop on node {a}")));
        }
        self.ages.insert(key(a, b), age);
        Ok(())
    }

    pub fn remove(&mut self, a: usize, b: usize) -> Option<u32> {
        self.ages.remove(&key(a, b))
    }

    /// Neighbours of `k` in ascending order.
    pub fn neighbors(&self, k: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .ages
            .keys()
            .filter_map(|&(a, b)| {
                if a == k {
                    Some(b)
                } else if b == k {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn degree(&self, k: usize) -> usize {
        self.ages.keys().filter(|&&(a, b)| a == k || b == k).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = EdgeRecord> + '_ {
        self.ages
            .iter()
            .map(|(&(a, b), &age)| EdgeRecord { a, b, age })
    }

    /// Increments the age of every edge incident to `k`, then drops those
    /// older than `age_max`. Returns the number of edges removed.
    fn age_incident(&mut self, k: usize, age_max: u32) -> usize {
        let mut removed = 0;
        self.ages.retain(|&(a, b), age| {
            if a == k || b == k {
                *age += 1;
                if *age > age_max {
                    removed += 1;
                    return false;
                }
            }
            true
        });
        removed
    }

    /// Rewrites endpoints through `remap` (old index -> new index). Every
    /// endpoint must map to a surviving node.
    fn reindex(&mut self, remap: &[Option<usize>]) {
        let old = std::mem::take(&mut self.ages);
        for ((a, b), age) in old {
            if let (Some(na), Some(nb)) = (remap[a], remap[b]) {
                self.ages.insert(key(na, nb), age);
            }
        }
    }
}

impl TryFrom<Vec<EdgeRecord>> for EdgeStore {
    type Error = Error;

    fn try_from(records: Vec<EdgeRecord>) -> Result<Self> {
        let mut store = EdgeStore::default();
        for r in records {
            if store.contains(r.a, r.b) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate edge ({}, {})",
                    r.a, r.b
                )));
            }
            store.set(r.a, r.b, r.age)?;
        }
        Ok(store)
    }
}

impl From<EdgeStore> for Vec<EdgeRecord> {
    fn from(store: EdgeStore) -> Self {
        store.iter().collect()
    }
}

/// Mean over each node of its minimum CIM to any other node.
pub fn compute_vigilance_threshold<P: AsRef<[f64]>>(
    init_nodes: &[P],
    sigma: Bandwidth,
) -> Result<f64> {
    let m = init_nodes.len();
    if m < 2 {
        return Err(Error::InvalidState(format!(
            "vigilance threshold needs at least two nodes, got {m}"
        )));
    }
    let d = init_nodes[0].as_ref().len();
    if let Some(bad) = init_nodes.iter().find(|p| p.as_ref().len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.as_ref().len(),
        });
    }
    let mut total = 0.0;
    for (i, yi) in init_nodes.iter().enumerate() {
        let mut min = f64::INFINITY;
        for (j, yj) in init_nodes.iter().enumerate() {
            if i != j {
                min = min.min(cim_raw(yi.as_ref(), yj.as_ref(), sigma.value()));
            }
        }
        total += min;
    }
    Ok(total / m as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Winners {
    pub first: usize,
    pub first_cim: f64,
    pub second: Option<(usize, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VigilanceCase {
    /// No node is similar enough: create one.
    CaseI,
    /// Only the first winner resonates.
    CaseII,
    /// Both winners resonate.
    CaseIII,
}

pub fn vigilance_case(v1: f64, v2: Option<f64>, v_threshold: f64) -> VigilanceCase {
    if v1 > v_threshold {
        VigilanceCase::CaseI
    } else {
        match v2 {
            Some(v2) if v2 <= v_threshold => VigilanceCase::CaseIII,
            _ => VigilanceCase::CaseII,
        }
    }
}

/// What a single [`CaeaModel::learn_one`] call did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepKind {
    /// Node created during initialization.
    Init {
        node: usize,
    },
    CaseI {
        node: usize,
    },
    CaseII {
        winner: usize,
    },
    CaseIII {
        winner: usize,
        second: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub kind: StepKind,
    /// Isolated nodes removed by the periodic sweep (indices before the
    /// sweep are what `kind` refers to).
    pub swept: usize,
    pub edges_expired: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub node: usize,
    pub class: Option<ClassId>,
    pub cluster: usize,
    pub cim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaeaModel {
    params: CaeaParams,
    dim: Option<usize>,
    nodes: Vec<Node>,
    edges: EdgeStore,
    v_threshold: Option<f64>,
    recent_window: VecDeque<Vec<f64>>,
    input_count: u64,
}

impl CaeaModel {
    pub fn new(params: CaeaParams) -> Result<Self> {
        params.validate()?;
        Ok(CaeaModel {
            params,
            dim: None,
            nodes: Vec::new(),
            edges: EdgeStore::default(),
            v_threshold: None,
            recent_window: VecDeque::new(),
            input_count: 0,
        })
    }

    pub fn params(&self) -> &CaeaParams {
        &self.params
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edges(&self) -> &EdgeStore {
        &self.edges
    }

    pub fn v_threshold(&self) -> Option<f64> {
        self.v_threshold
    }

    pub fn input_count(&self) -> u64 {
        self.input_count
    }

    pub fn recent_window(&self) -> impl Iterator<Item = &[f64]> {
        self.recent_window.iter().map(Vec::as_slice)
    }

    /// Mean of the node bandwidths, used for every winner search.
    pub fn mean_sigma(&self) -> Option<f64> {
        if self.nodes.is_empty() {
            return None;
        }
        let sum: f64 = self.nodes.iter().map(|n| n.sigma.value()).sum();
        Some(sum / self.nodes.len() as f64)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if let Some(d) = self.dim {
            if x.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: x.len(),
                });
            }
        } else if x.is_empty() {
            return Err(Error::InvalidArgument("zero-dimensional input".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite input".into()));
        }
        Ok(())
    }

    /// The two nodes with the smallest CIM to `x`. Ties go to the lower index.
    pub fn select_winners(&self, x: &[f64]) -> Result<Winners> {
        if self.nodes.is_empty() {
            return Err(Error::InvalidState("model has no nodes".into()));
        }
        self.check_input(x)?;
        let sigma = self.mean_sigma().unwrap_or(DEGENERATE_SIGMA);
        let mut first = (usize::MAX, f64::INFINITY);
        let mut second: Option<(usize, f64)> = None;
        for (i, node) in self.nodes.iter().enumerate() {
            let v = cim_raw(x, &node.weight, sigma);
            if v < first.1 {
                if first.0 != usize::MAX {
                    second = Some(first);
                }
                first = (i, v);
            } else if second.is_none_or(|(_, s)| v < s) {
                second = Some((i, v));
            }
        }
        Ok(Winners {
            first: first.0,
            first_cim: first.1,
            second,
        })
    }

    fn window_sigma(&self) -> Bandwidth {
        let est = if self.recent_window.is_empty() {
            DEGENERATE_SIGMA
        } else {
            let window: Vec<&[f64]> = self.recent_window.iter().map(Vec::as_slice).collect();
            estimate_sigma(&window)
                .map(|e| e.usable())
                .unwrap_or(DEGENERATE_SIGMA)
        };
        Bandwidth::new(est).unwrap_or(Bandwidth::new(DEGENERATE_SIGMA).expect("positive"))
    }

    fn push_window(&mut self, x: &[f64]) {
        self.recent_window.push_back(x.to_vec());
        while self.recent_window.len() > self.params.init_size() {
            self.recent_window.pop_front();
        }
    }

    /// Presents one input.
    pub fn learn_one(&mut self, x: &[f64], label: Option<ClassId>) -> Result<Step> {
        self.check_input(x)?;
        if self.dim.is_none() {
            self.dim = Some(x.len());
        }
        self.input_count += 1;
        let init = self.params.init_size();
        let mut edges_expired = 0;

        let kind = if self.nodes.len() < init {
            // Bandwidth from the inputs preceding x.
            let sigma = self.window_sigma();
            self.nodes.push(Node::new(x.to_vec(), sigma, label));
            let node = self.nodes.len() - 1;
            self.push_window(x);
            if self.v_threshold.is_none() && self.nodes.len() == init {
                self.finish_initialization()?;
            }
            StepKind::Init { node }
        } else {
            let v_threshold = self.v_threshold.ok_or_else(|| {
                Error::InvalidState("vigilance threshold missing after initialization".into())
            })?;
            let w = self.select_winners(x)?;
            let k1 = w.first;
            if self.params.aging_policy == AgingPolicy::Algorithm1 {
                edges_expired += self.edges.age_incident(k1, self.params.age_max);
            }
            let case = vigilance_case(w.first_cim, w.second.map(|s| s.1), v_threshold);
            let kind = match case {
                VigilanceCase::CaseI => {
                    let sigma = self.window_sigma();
                    self.nodes.push(Node::new(x.to_vec(), sigma, label));
                    StepKind::CaseI {
                        node: self.nodes.len() - 1,
                    }
                }
                VigilanceCase::CaseII | VigilanceCase::CaseIII => {
                    if self.params.aging_policy == AgingPolicy::Prose {
                        edges_expired += self.edges.age_incident(k1, self.params.age_max);
                    }
                    let winner = &mut self.nodes[k1];
                    let m = winner.win_count as f64;
                    for (y, xi) in winner.weight.iter_mut().zip(x) {
                        *y += (xi - *y) / m;
                    }
                    winner.win_count += 1;
                    winner.record(label);

                    if case == VigilanceCase::CaseIII {
                        let (k2, _) = w.second.expect("case III has a second winner");
                        for j in self.edges.neighbors(k1) {
                            let neighbor = &mut self.nodes[j];
                            let m = neighbor.win_count as f64;
                            for (y, xi) in neighbor.weight.iter_mut().zip(x) {
                                *y += (xi - *y) / (10.0 * m);
                            }
                        }
                        self.edges.set(k1, k2, 0)?;
                        StepKind::CaseIII {
                            winner: k1,
                            second: k2,
                        }
                    } else {
                        StepKind::CaseII { winner: k1 }
                    }
                }
            };
            self.push_window(x);
            kind
        };

        let swept = if self.input_count.is_multiple_of(self.params.lambda as u64) {
            self.remove_isolated()
        } else {
            0
        };

        Ok(Step {
            kind,
            swept,
            edges_expired,
        })
    }

    /// Gives every initial node the common bandwidth of the initial window and
    /// fixes the vigilance threshold.
    fn finish_initialization(&mut self) -> Result<()> {
        let window: Vec<&[f64]> = self.recent_window.iter().map(Vec::as_slice).collect();
        let sigma = Bandwidth::new(estimate_sigma(&window)?.usable())?;
        for node in &mut self.nodes {
            node.sigma = sigma;
        }
        let v = match self.params.v_threshold_override {
            Some(v) => v,
            None => {
                let weights: Vec<&[f64]> = self.nodes.iter().map(|n| n.weight.as_slice()).collect();
                compute_vigilance_threshold(&weights, sigma)?
            }
        };
        self.v_threshold = Some(v);
        Ok(())
    }

    /// Deletes every node without edges. Returns how many were removed.
    fn remove_isolated(&mut self) -> usize {
        let mut degree = vec![0usize; self.nodes.len()];
        for e in self.edges.iter() {
            degree[e.a] += 1;
            degree[e.b] += 1;
        }
        if degree.iter().all(|&d| d > 0) {
            return 0;
        }
        let mut remap = vec![None; self.nodes.len()];
        let mut next = 0;
        for (i, &d) in degree.iter().enumerate() {
            if d > 0 {
                remap[i] = Some(next);
                next += 1;
            }
        }
        let removed = self.nodes.len() - next;
        let mut i = 0;
        self.nodes.retain(|_| {
            let keep = degree[i] > 0;
            i += 1;
            keep
        });
        self.edges.reindex(&remap);
        removed
    }

    /// Presents a stream of inputs once, in order.
    pub fn fit<'a, I>(&mut self, stream: I) -> Result<()>
    where
        I: IntoIterator<Item = (&'a [f64], Option<ClassId>)>,
    {
        for (x, label) in stream {
            self.learn_one(x, label)?;
        }
        Ok(())
    }

    /// Connected component id of each node. Components are numbered in order
    /// of their lowest node index.
    pub fn components(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let mut adjacency = vec![Vec::new(); n];
        for e in self.edges.iter() {
            adjacency[e.a].push(e.b);
            adjacency[e.b].push(e.a);
        }
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                for &v in &adjacency[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn component_count(&self) -> usize {
        self.components().into_iter().max().map_or(0, |m| m + 1)
    }

    /// Nearest node, its majority class, and its connected component.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let w = self.select_winners(x)?;
        let comps = self.components();
        Ok(Prediction {
            node: w.first,
            class: self.nodes[w.first].majority_class(),
            cluster: comps[w.first],
            cim: w.first_cim,
        })
    }

    /// Class of the nearest node only; skips the component traversal.
    pub fn predict_class(&self, x: &[f64]) -> Result<Option<ClassId>> {
        let w = self.select_winners(x)?;
        Ok(self.nodes[w.first].majority_class())
    }

    /// Checks the structural invariants of the model.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Invariant(m));
        for e in self.edges.iter() {
            if e.a == e.b {
                return fail(format!("self-loop on {}", e.a));
            }
            if e.a >= self.nodes.len() || e.b >= self.nodes.len() {
                return fail(format!("edge ({}, {}) has a dangling endpoint", e.a, e.b));
            }
            if e.age > self.params.age_max {
                return fail(format!(
                    "edge ({}, {}) has age {} > age_max",
                    e.a, e.b, e.age
                ));
            }
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if n.win_count < 1 {
                return fail(format!("node {i} has win count 0"));
            }
            if n.sigma.value() <= 0.0 {
                return fail(format!("node {i} has non-positive bandwidth"));
            }
            let labelled: u64 = n.label_histogram.values().sum();
            if labelled > n.win_count {
                return fail(format!("node {i} has more labels than wins"));
            }
            if Some(n.weight.len()) != self.dim {
                return fail(format!("node {i} has the wrong dimension"));
            }
        }
        let expected_window = (self.input_count as usize).min(self.params.init_size());
        if self.recent_window.len() != expected_window {
            return fail(format!(
                "recent window holds {} points, expected {expected_window}",
                self.recent_window.len()
            ));
        }
        if let Some(v) = self.v_threshold {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("vigilance threshold {v} outside [0, 1]"));
            }
        }
        if self.nodes.len() as u64 > self.input_count {
            return fail("more nodes than inputs".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: CaeaModel = serde_json::from_str(s)?;
        model.params.validate()?;
        model.check_invariants()?;
        Ok(model)
    }
}
