//! Random tree construction and the variation operators.
//!
//! All functions are pure in the RNG stream: the same seed yields the same
//! trees, which the evolution engine relies on for reproducible runs.

use super::{Expr, FunctionSet, Op, Variable};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Ephemeral random constants are drawn uniformly from this symmetric range.
pub const CONST_RANGE: f64 = 10.0;

/// Relative share of each mutation kind; they need not sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MutationWeights {
    /// Replace a uniformly chosen subtree with a fresh random one.
    pub subtree: f64,
    /// Swap one primitive for another of the same arity.
    pub point: f64,
    /// Perturb one constant: `c <- c*(1 + N(0, 0.1)) + N(0, 0.1)`.
    pub constant: f64,
}

impl Default for MutationWeights {
    fn default() -> Self {
        MutationWeights {
            subtree: 0.35,
            point: 0.15,
            constant: 0.5,
        }
    }
}

fn random_leaf<R: Rng>(rng: &mut R) -> Expr {
    if rng.gen::<bool>() {
        Expr::Var(Variable::ALL[rng.gen_range(0..Variable::ALL.len())])
    } else {
        Expr::Const(rng.gen_range(-CONST_RANGE..CONST_RANGE))
    }
}

fn random_op<R: Rng>(fs: &FunctionSet, rng: &mut R) -> Op {
    fs.ops()[rng.gen_range(0..fs.ops().len())]
}

fn build<R: Rng>(fs: &FunctionSet, min_left: usize, max_left: usize, full: bool, rng: &mut R) -> Expr {
    if max_left <= 1 {
        return random_leaf(rng);
    }
    // In grow mode a node may stop early once the minimum depth is met.
    if min_left <= 1 && !full && rng.gen::<bool>() {
        return random_leaf(rng);
    }
    let op = random_op(fs, rng);
    match op.arity() {
        1 => Expr::unary(op, build(fs, min_left.saturating_sub(1), max_left - 1, full, rng)),
        2 => {
            // One child carries the remaining minimum-depth obligation.
            let deep_left = rng.gen::<bool>();
            let (min_a, min_b) = if deep_left {
                (min_left.saturating_sub(1), 1)
            } else {
                (1, min_left.saturating_sub(1))
            };
            let a = build(fs, min_a, max_left - 1, full, rng);
            let b = build(fs, min_b, max_left - 1, full, rng);
            Expr::binary(op, a, b)
        }
        _ => unreachable!(),
    }
}

/// Ramped half-and-half generation: the target depth is uniform in
/// `[depth_min, depth_max]` and the tree is built by the grow or the full
/// method with equal probability. A depth of 1 is a single leaf.
pub fn random_tree<R: Rng>(
    fs: &FunctionSet,
    depth_min: usize,
    depth_max: usize,
    rng: &mut R,
) -> Expr {
    assert!(depth_min >= 1, "depth_min must be at least 1");
    assert!(depth_min <= depth_max, "depth_min must not exceed depth_max");
    let target = rng.gen_range(depth_min..=depth_max);
    let full = rng.gen::<bool>();
    build(fs, target, target, full, rng)
}

/// Subtree crossover: replaces a uniformly chosen subtree of `a` with a
/// uniformly chosen subtree of `b`. Children deeper than `depth_max` are
/// rejected and redrawn up to 8 times; after that `a` is returned unchanged.
pub fn crossover<R: Rng>(a: &Expr, b: &Expr, depth_max: usize, rng: &mut R) -> Expr {
    for _ in 0..8 {
        let i = rng.gen_range(0..a.node_count());
        let j = rng.gen_range(0..b.node_count());
        let graft = b.subtree(j).expect("index within node count").clone();
        let child = a.with_replaced(i, graft);
        if child.depth() <= depth_max {
            return child;
        }
    }
    a.clone()
}

fn walk_ops(expr: &Expr, idx: &mut usize, out: &mut Vec<(usize, Op)>) {
    match expr {
        Expr::Const(_) | Expr::Var(_) => {
            *idx += 1;
        }
        Expr::Unary(op, a) => {
            out.push((*idx, *op));
            *idx += 1;
            walk_ops(a, idx, out);
        }
        Expr::Binary(op, a, b) => {
            out.push((*idx, *op));
            *idx += 1;
            walk_ops(a, idx, out);
            walk_ops(b, idx, out);
        }
    }
}

fn walk_consts(expr: &Expr, idx: &mut usize, out: &mut Vec<(usize, f64)>) {
    match expr {
        Expr::Const(c) => {
            out.push((*idx, *c));
            *idx += 1;
        }
        Expr::Var(_) => {
            *idx += 1;
        }
        Expr::Unary(_, a) => {
            *idx += 1;
            walk_consts(a, idx, out);
        }
        Expr::Binary(_, a, b) => {
            *idx += 1;
            walk_consts(a, idx, out);
            walk_consts(b, idx, out);
        }
    }
}

fn subtree_replacement<R: Rng>(t: &Expr, fs: &FunctionSet, depth_max: usize, rng: &mut R) -> Expr {
    let i = rng.gen_range(0..t.node_count());
    let budget = (depth_max + 1).saturating_sub(t.depth_at(i).expect("valid index"));
    let replacement = random_tree(fs, 1, budget.clamp(1, 4), rng);
    t.with_replaced(i, replacement)
}

/// Applies one mutation, chosen by `weights`. Point and constant mutation
/// fall back to subtree replacement when the tree offers no applicable site.
pub fn mutate<R: Rng>(
    t: &Expr,
    fs: &FunctionSet,
    weights: &MutationWeights,
    depth_max: usize,
    rng: &mut R,
) -> Expr {
    let total = weights.subtree + weights.point + weights.constant;
    assert!(total > 0.0, "mutation weights must not all be zero");
    let r = rng.gen::<f64>() * total;
    if r < weights.subtree {
        return subtree_replacement(t, fs, depth_max, rng);
    }
    if r < weights.subtree + weights.point {
        let mut sites = Vec::new();
        walk_ops(t, &mut 0, &mut sites);
        let candidates: Vec<(usize, Op, Vec<Op>)> = sites
            .into_iter()
            .filter_map(|(idx, op)| {
                let alts: Vec<Op> = fs
                    .ops()
                    .iter()
                    .copied()
                    .filter(|alt| alt.arity() == op.arity() && *alt != op)
                    .collect();
                if alts.is_empty() {
                    None
                } else {
                    Some((idx, op, alts))
                }
            })
            .collect();
        if candidates.is_empty() {
            return subtree_replacement(t, fs, depth_max, rng);
        }
        let (idx, _, alts) = &candidates[rng.gen_range(0..candidates.len())];
        let new_op = alts[rng.gen_range(0..alts.len())];
        let node = t.subtree(*idx).expect("valid index");
        let swapped = match node {
            Expr::Unary(_, a) => Expr::Unary(new_op, a.clone()),
            Expr::Binary(_, a, b) => Expr::Binary(new_op, a.clone(), b.clone()),
            _ => unreachable!("op sites are internal nodes"),
        };
        return t.with_replaced(*idx, swapped);
    }
    // Constant perturbation: jitter every constant in the tree.
    let mut consts = Vec::new();
    walk_consts(t, &mut 0, &mut consts);
    if consts.is_empty() {
        return subtree_replacement(t, fs, depth_max, rng);
    }
    let noise = Normal::new(0.0, 0.1).expect("valid std");
    let mut out = t.clone();
    for (idx, c) in consts {
        let scaled = c * (1.0 + noise.sample(rng)) + noise.sample(rng);
        let new_c = if scaled.is_finite() { scaled } else { c };
        out = out.with_replaced(idx, Expr::Const(new_c));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn depth_one_always_yields_a_leaf() {
        let fs = FunctionSet::baseline();
        let mut r = rng(7);
        for _ in 0..200 {
            let t = random_tree(&fs, 1, 1, &mut r);
            assert_eq!(t.node_count(), 1);
        }
    }

    #[test]
    fn generated_trees_respect_depth_bounds() {
        let fs = FunctionSet::baseline();
        let mut r = rng(11);
        for _ in 0..500 {
            let t = random_tree(&fs, 2, 5, &mut r);
            assert!(t.depth() >= 2 && t.depth() <= 5, "depth {}", t.depth());
        }
    }

    #[test]
    fn crossover_of_two_leaves_returns_a_leaf() {
        let a = Expr::Var(Variable::Mst);
        let b = Expr::Const(3.0);
        let mut r = rng(3);
        let child = crossover(&a, &b, 12, &mut r);
        assert!(child == a || child == b);
    }

    #[test]
    fn crossover_respects_depth_cap() {
        let fs = FunctionSet::baseline();
        let mut r = rng(5);
        for _ in 0..200 {
            let a = random_tree(&fs, 2, 6, &mut r);
            let b = random_tree(&fs, 2, 6, &mut r);
            let child = crossover(&a, &b, 6, &mut r);
            assert!(child.depth() <= 6);
        }
    }

    #[test]
    fn same_seed_gives_identical_offspring() {
        let fs = FunctionSet::baseline();
        let mut r1 = rng(99);
        let mut r2 = rng(99);
        let a = random_tree(&fs, 2, 6, &mut r1);
        let a2 = random_tree(&fs, 2, 6, &mut r2);
        assert_eq!(a, a2);
        let b = random_tree(&fs, 2, 6, &mut r1);
        let b2 = random_tree(&fs, 2, 6, &mut r2);
        let c1 = crossover(&a, &b, 12, &mut r1);
        let c2 = crossover(&a2, &b2, 12, &mut r2);
        assert_eq!(c1, c2);
        let m1 = mutate(&c1, &fs, &MutationWeights::default(), 12, &mut r1);
        let m2 = mutate(&c2, &fs, &MutationWeights::default(), 12, &mut r2);
        assert_eq!(m1, m2);
    }

    #[test]
    fn mutate_keeps_trees_within_depth() {
        let fs = FunctionSet::baseline();
        let mut r = rng(13);
        let weights = MutationWeights::default();
        for _ in 0..300 {
            let t = random_tree(&fs, 2, 8, &mut r);
            let m = mutate(&t, &fs, &weights, 8, &mut r);
            assert!(m.depth() <= 8, "depth {}", m.depth());
        }
    }

    #[test]
    fn constant_mutation_on_constantless_tree_falls_back() {
        let fs = FunctionSet::baseline();
        let weights = MutationWeights {
            subtree: 0.0,
            point: 0.0,
            constant: 1.0,
        };
        let t = Expr::Var(Variable::Mst);
        let mut r = rng(21);
        // Must not panic; the fallback replaces a subtree instead.
        let m = mutate(&t, &fs, &weights, 12, &mut r);
        assert!(m.depth() <= 12);
    }
}
