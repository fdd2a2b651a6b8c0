//! Divisive hierarchical CAEA (HCAEA).
//!
//! A CAEA model is trained on the node's input, the input is split among the
//! final prototypes by nearest CIM, and each sufficiently large cell trains
//! its own child model. Prediction descends through nearest prototypes until
//! it reaches one without a child.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::caea::{CaeaModel, CaeaParams, ClassId};
use crate::error::{Error, Result};

pub const DEFAULT_RECURSE_MIN_K: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyParams {
    pub caea: CaeaParams,
    /// A layer is split further only if its model has at least this many
    /// prototypes.
    pub recurse_min_k: usize,
}

impl HierarchyParams {
    pub fn new(caea: CaeaParams) -> Self {
        HierarchyParams {
            caea,
            recurse_min_k: DEFAULT_RECURSE_MIN_K,
        }
    }

    pub fn with_recurse_min_k(mut self, k: usize) -> Result<Self> {
        self.recurse_min_k = k;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.caea.validate()?;
        if self.recurse_min_k < 2 {
            return Err(Error::Config(format!(
                "recurse_min_k must be >= 2, got {}",
                self.recurse_min_k
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HcaeaNode {
    pub model: CaeaModel,
    /// Training indices owned by each prototype of `model`.
    pub subsets: Vec<Vec<usize>>,
    /// Child trees keyed by prototype index.
    pub children: BTreeMap<usize, HcaeaNode>,
}

impl HcaeaNode {
    fn depth(&self) -> usize {
        1 + self
            .children
            .values()
            .map(HcaeaNode::depth)
            .max()
            .unwrap_or(0)
    }

    fn prototype_count(&self) -> usize {
        self.model.len()
            + self
                .children
                .values()
                .map(HcaeaNode::prototype_count)
                .sum::<usize>()
    }

    fn leaf_count(&self) -> usize {
        (self.model.len() - self.children.len())
            + self
                .children
                .values()
                .map(HcaeaNode::leaf_count)
                .sum::<usize>()
    }

    fn inputs(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.subsets.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreePrediction {
    pub class: Option<ClassId>,
    /// Prototype index chosen at each layer, root first.
    pub path: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HcaeaTree {
    params: HierarchyParams,
    root: HcaeaNode,
    depth: usize,
    points: Vec<Vec<f64>>,
    labels: Vec<Option<ClassId>>,
}

/// Assigns each point to its nearest prototype of `model` (CIM with the mean
/// node bandwidth). Cell `k` lists the positions in `data` owned by
/// prototype `k`; cells may be empty.
pub fn partition_training_data<P: AsRef<[f64]>>(
    model: &CaeaModel,
    data: &[P],
) -> Result<Vec<Vec<usize>>> {
    partition_indices(model, data, &(0..data.len()).collect::<Vec<_>>())
}

fn partition_indices<P: AsRef<[f64]>>(
    model: &CaeaModel,
    data: &[P],
    indices: &[usize],
) -> Result<Vec<Vec<usize>>> {
    if model.is_empty() {
        return Err(Error::InvalidState(
            "cannot partition with an empty model".into(),
        ));
    }
    let mut cells = vec![Vec::new(); model.len()];
    for &i in indices {
        let w = model.select_winners(data[i].as_ref())?;
        cells[w.first].push(i);
    }
    Ok(cells)
}

fn build_node(
    points: &[Vec<f64>],
    labels: &[Option<ClassId>],
    indices: &[usize],
    params: &HierarchyParams,
) -> Result<HcaeaNode> {
    let mut model = CaeaModel::new(params.caea.clone())?;
    for &i in indices {
        model.learn_one(&points[i], labels[i])?;
    }
    if model.is_empty() {
        return Ok(HcaeaNode {
            model,
            subsets: Vec::new(),
            children: BTreeMap::new(),
        });
    }
    let subsets = partition_indices(&model, points, indices)?;
    let children = build_children(
        points,
        labels,
        indices.len(),
        &model,
        &subsets,
        params,
        None,
    )?;
    Ok(HcaeaNode {
        model,
        subsets,
        children,
    })
}

/// Trains a child for every cell that passes the recursion guards. When
/// `reuse` holds earlier children keyed by their input set, matching cells
/// keep the old subtree.
fn build_children(
    points: &[Vec<f64>],
    labels: &[Option<ClassId>],
    parent_len: usize,
    model: &CaeaModel,
    subsets: &[Vec<usize>],
    params: &HierarchyParams,
    reuse: Option<&mut BTreeMap<Vec<usize>, HcaeaNode>>,
) -> Result<BTreeMap<usize, HcaeaNode>> {
    let mut children = BTreeMap::new();
    if model.v_threshold().is_none() || model.len() < params.recurse_min_k {
        return Ok(children);
    }
    let lambda = params.caea.lambda;
    let eligible: Vec<usize> = subsets
        .iter()
        .enumerate()
        .filter(|(_, cell)| cell.len() >= lambda && cell.len() < parent_len)
        .map(|(k, _)| k)
        .collect();

    let mut pending = Vec::new();
    match reuse {
        Some(old) => {
            for k in eligible {
                // Cells are built in ascending index order, as are stored inputs.
                match old.remove(&subsets[k]) {
                    Some(child) => {
                        children.insert(k, child);
                    }
                    None => pending.push(k),
                }
            }
        }
        None => pending = eligible,
    }

    let built: Vec<(usize, HcaeaNode)> = pending
        .par_iter()
        .map(|&k| build_node(points, labels, &subsets[k], params).map(|node| (k, node)))
        .collect::<Result<Vec<_>>>()?;
    for (k, node) in built {
        if !node.model.is_empty() {
            children.insert(k, node);
        }
    }
    Ok(children)
}

fn collect_children(node: HcaeaNode) -> BTreeMap<Vec<usize>, HcaeaNode> {
    node.children
        .into_values()
        .map(|child| (child.inputs(), child))
        .collect()
}

/// Trains a hierarchy on `points` presented in the given order.
pub fn fit_hierarchy(
    points: &[Vec<f64>],
    labels: &[Option<ClassId>],
    params: HierarchyParams,
) -> Result<HcaeaTree> {
    params.validate()?;
    if points.is_empty() {
        return Err(Error::InvalidArgument("no training data".into()));
    }
    if labels.len() != points.len() {
        return Err(Error::InvalidArgument(format!(
            "{} points but {} labels",
            points.len(),
            labels.len()
        )));
    }
    let indices: Vec<usize> = (0..points.len()).collect();
    let root = build_node(points, labels, &indices, &params)?;
    let depth = root.depth();
    Ok(HcaeaTree {
        params,
        root,
        depth,
        points: points.to_vec(),
        labels: labels.to_vec(),
    })
}

impl HcaeaTree {
    pub fn params(&self) -> &HierarchyParams {
        &self.params
    }

    pub fn root(&self) -> &HcaeaNode {
        &self.root
    }

    /// Number of layers on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn prototype_count(&self) -> usize {
        self.root.prototype_count()
    }

    /// Prototypes without a child, i.e. the ones that classify.
    pub fn leaf_count(&self) -> usize {
        self.root.leaf_count()
    }

    pub fn training_len(&self) -> usize {
        self.points.len()
    }

    pub fn predict_tree(&self, x: &[f64]) -> Result<TreePrediction> {
        if self.root.model.is_empty() {
            return Err(Error::InvalidState("tree has no prototypes".into()));
        }
        let mut node = &self.root;
        let mut path = Vec::new();
        loop {
            let w = node.model.select_winners(x)?;
            path.push(w.first);
            match node.children.get(&w.first) {
                Some(child) => node = child,
                None => {
                    return Ok(TreePrediction {
                        class: node.model.nodes()[w.first].majority_class(),
                        path,
                    })
                }
            }
        }
    }

    /// Continues training with more data: the root model learns the new
    /// points, the root partition is recomputed over all data, and only the
    /// children whose input changed are retrained.
    pub fn fit_more(&mut self, points: &[Vec<f64>], labels: &[Option<ClassId>]) -> Result<()> {
        if labels.len() != points.len() {
            return Err(Error::InvalidArgument(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        if points.is_empty() {
            return Ok(());
        }
        for (x, &label) in points.iter().zip(labels) {
            self.root.model.learn_one(x, label)?;
        }
        self.points.extend(points.iter().cloned());
        self.labels.extend_from_slice(labels);

        let all: Vec<usize> = (0..self.points.len()).collect();
        let model = self.root.model.clone();
        let old = std::mem::replace(
            &mut self.root,
            HcaeaNode {
                model,
                subsets: Vec::new(),
                children: BTreeMap::new(),
            },
        );
        let mut reusable = collect_children(old);
        if self.root.model.is_empty() {
            self.depth = 1;
            return Ok(());
        }
        self.root.subsets = partition_indices(&self.root.model, &self.points, &all)?;
        self.root.children = build_children(
            &self.points,
            &self.labels,
            all.len(),
            &self.root.model,
            &self.root.subsets,
            &self.params,
            Some(&mut reusable),
        )?;
        self.depth = self.root.depth();
        Ok(())
    }

    /// Partition and structure checks over the whole tree.
    pub fn check_invariants(&self) -> Result<()> {
        let all: Vec<usize> = (0..self.points.len()).collect();
        check_node(&self.root, &all, &self.params)?;
        if self.depth != self.root.depth() {
            return Err(Error::Invariant("stored depth is stale".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let tree: HcaeaTree = serde_json::from_str(s)?;
        tree.params.validate()?;
        tree.check_invariants()?;
        Ok(tree)
    }
}

fn check_node(node: &HcaeaNode, input: &[usize], params: &HierarchyParams) -> Result<()> {
    node.model.check_invariants()?;
    if node.model.is_empty() {
        if !node.subsets.is_empty() || !node.children.is_empty() {
            return Err(Error::Invariant(
                "empty model with subsets or children".into(),
            ));
        }
        return Ok(());
    }
    if node.subsets.len() != node.model.len() {
        return Err(Error::Invariant(format!(
            "{} subsets for {} prototypes",
            node.subsets.len(),
            node.model.len()
        )));
    }
    let mut seen = std::collections::BTreeSet::new();
    for cell in &node.subsets {
        for &i in cell {
            if !seen.insert(i) {
                return Err(Error::Invariant(format!("index {i} in two cells")));
            }
        }
    }
    if !seen.iter().copied().eq(input.iter().copied()) {
        return Err(Error::Invariant("cells do not cover the node input".into()));
    }
    for (&k, child) in &node.children {
        let cell = node
            .subsets
            .get(k)
            .ok_or_else(|| Error::Invariant(format!("child key {k} is not a prototype")))?;
        if cell.is_empty() {
            return Err(Error::Invariant(format!("child {k} has an empty cell")));
        }
        if cell.len() >= input.len() || cell.len() < params.caea.lambda {
            return Err(Error::Invariant(format!(
                "child {k} violates a recursion guard"
            )));
        }
        check_node(child, cell, params)?;
    }
    Ok(())
}
