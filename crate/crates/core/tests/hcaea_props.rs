mod common;

use std::collections::BTreeSet;

use caea::hcaea::HcaeaNode;
use caea::similarity::{cim, Bandwidth};
use caea::{fit_hierarchy, CaeaParams, HcaeaTree, HierarchyParams};
use proptest::prelude::*;

/// Nearest prototype by evaluating the CIM against every node; ties go to
/// the lower index.
fn brute_force_nearest(node: &HcaeaNode, x: &[f64]) -> usize {
    let sigma = Bandwidth::new(node.model.mean_sigma().unwrap()).unwrap();
    let mut best = (f64::INFINITY, 0);
    for (k, n) in node.model.nodes().iter().enumerate() {
        let v = cim(x, &n.weight, sigma).unwrap();
        if v < best.0 {
            best = (v, k);
        }
    }
    best.1
}

/// Independent walk over the tree: every internal node's cells must be
/// pairwise disjoint, cover exactly the node's input, and hold only points
/// whose nearest prototype is the cell's own.
fn check_partition(
    pts: &[Vec<f64>],
    node: &HcaeaNode,
    input: &BTreeSet<usize>,
    lambda: usize,
) -> Result<usize, String> {
    if node.model.is_empty() {
        return Ok(1);
    }
    let mut union = BTreeSet::new();
    let mut total = 0;
    for (k, cell) in node.subsets.iter().enumerate() {
        total += cell.len();
        union.extend(cell.iter().copied());
        if let Some(&i) = cell
            .iter()
            .find(|&&i| brute_force_nearest(node, &pts[i]) != k)
        {
            return Err(format!("point {i} is not nearest to prototype {k}"));
        }
    }
    if total != union.len() {
        return Err("cells overlap".into());
    }
    if &union != input {
        return Err("cells do not cover the input".into());
    }
    let mut depth = 0;
    for (&k, child) in &node.children {
        let cell: BTreeSet<usize> = node.subsets[k].iter().copied().collect();
        if cell.len() < lambda || cell.len() >= input.len() {
            return Err(format!("child {k} should not exist"));
        }
        depth = depth.max(check_partition(pts, child, &cell, lambda)?);
    }
    Ok(depth + 1)
}

fn dataset(seed: u64) -> (Vec<Vec<f64>>, Vec<Option<usize>>, usize) {
    let mut rng = common::rng(seed);
    let n = 1 + (seed as usize * 37) % 400;
    let d = 1 + (seed as usize) % 4;
    let pts = common::blob_stream(&mut rng, n, d);
    let labels = (0..n).map(|i| Some(i % 3)).collect();
    let lambda = 4 + (seed as usize * 13) % 30;
    (pts, labels, lambda)
}

fn check_tree(pts: &[Vec<f64>], tree: &HcaeaTree) -> Result<(), String> {
    tree.check_invariants().map_err(|e| e.to_string())?;
    let all: BTreeSet<usize> = (0..pts.len()).collect();
    let depth = check_partition(pts, tree.root(), &all, tree.params().caea.lambda)?;
    if depth != tree.depth() {
        return Err(format!("depth {} but walked {depth}", tree.depth()));
    }
    let json = tree.to_json().map_err(|e| e.to_string())?;
    let back = HcaeaTree::from_json(&json).map_err(|e| e.to_string())?;
    if &back != tree || back.to_json().unwrap() != json {
        return Err("serialization is lossy".into());
    }
    Ok(())
}

#[test]
fn random_datasets_give_valid_trees() {
    let mut deep = 0;
    for seed in 0..100 {
        let (pts, labels, lambda) = dataset(seed);
        let params = HierarchyParams::new(CaeaParams::new(lambda, 10).unwrap());
        let tree = fit_hierarchy(&pts, &labels, params).unwrap();
        if let Err(e) = check_tree(&pts, &tree) {
            panic!("seed {seed}: {e}");
        }
        if tree.depth() > 1 {
            deep += 1;
        }
    }
    println!("{deep} of 100 trees recursed");
    assert!(deep > 10);
}

#[test]
fn lower_recursion_bound_still_terminates() {
    for seed in 0..30 {
        let (pts, labels, lambda) = dataset(500 + seed);
        let params = HierarchyParams::new(CaeaParams::new(lambda, 10).unwrap())
            .with_recurse_min_k(2)
            .unwrap();
        let tree = fit_hierarchy(&pts, &labels, params).unwrap();
        check_tree(&pts, &tree).unwrap();
    }
}

#[test]
fn tiny_input_gives_a_single_layer() {
    let pts = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 0.5]];
    let labels = vec![Some(0), Some(1), Some(0)];
    let tree = fit_hierarchy(
        &pts,
        &labels,
        HierarchyParams::new(CaeaParams::new(4, 10).unwrap()),
    )
    .unwrap();
    assert_eq!(tree.depth(), 1);
    assert!(tree.root().children.is_empty());
}

#[test]
fn separated_blobs_recurse_within_each_blob() {
    let (pts, blob) = common::two_blobs(&mut common::rng(0), 200);
    let labels: Vec<Option<usize>> = blob.iter().map(|&b| Some(b)).collect();
    let tree = fit_hierarchy(
        &pts,
        &labels,
        HierarchyParams::new(CaeaParams::new(10, 10).unwrap()),
    )
    .unwrap();
    check_tree(&pts, &tree).unwrap();
    assert!(tree.depth() >= 2);
    let root = tree.root();
    assert!(!root.children.is_empty());
    // Each child refines points drawn from one blob only.
    for k in root.children.keys() {
        let owners: BTreeSet<usize> = root.subsets[*k].iter().map(|&i| blob[i]).collect();
        assert_eq!(owners.len(), 1, "cell {k} mixes blobs");
    }
    // A point sitting on a second-layer prototype is won there at CIM zero.
    let mut checked = 0;
    for (&k, child) in &root.children {
        for n in child.model.nodes() {
            if root.model.select_winners(&n.weight).unwrap().first != k {
                continue;
            }
            let w = child.model.select_winners(&n.weight).unwrap();
            assert_eq!(w.first_cim, 0.0);
            assert_eq!(child.model.nodes()[w.first].weight, n.weight);
            assert_eq!(tree.predict_tree(&n.weight).unwrap().path[1], w.first);
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn fit_more_keeps_the_tree_consistent() {
    let mut rng = common::rng(42);
    let pts = common::blob_stream(&mut rng, 300, 2);
    let labels: Vec<Option<usize>> = (0..300).map(|i| Some(i % 2)).collect();
    let params = HierarchyParams::new(CaeaParams::new(12, 10).unwrap());
    let mut tree = fit_hierarchy(&pts[..200], &labels[..200], params).unwrap();
    tree.fit_more(&pts[200..], &labels[200..]).unwrap();
    assert_eq!(tree.training_len(), 300);
    check_tree(&pts, &tree).unwrap();
    // Nothing new: every child is reused, so the tree is unchanged.
    let before = tree.clone();
    tree.fit_more(&[], &[]).unwrap();
    assert_eq!(tree, before);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arbitrary_small_datasets(
        pts in (1usize..=3).prop_flat_map(|d| {
            prop::collection::vec(prop::collection::vec(-5.0f64..5.0, d), 1..120)
        }),
        lambda in 4usize..=16,
    ) {
        let labels: Vec<Option<usize>> = (0..pts.len()).map(|i| Some(i % 2)).collect();
        let params = HierarchyParams::new(CaeaParams::new(lambda, 10).unwrap());
        let tree = fit_hierarchy(&pts, &labels, params).unwrap();
        prop_assert_eq!(check_tree(&pts, &tree), Ok(()));
    }
}
