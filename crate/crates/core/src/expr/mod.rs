//! Expression trees over the seasonal feature variables.
//!
//! Trees are immutable values: evaluation is strict IEEE-754 arithmetic
//! (division by zero, log of a non-positive number, or overflow propagate
//! as non-finite results rather than being masked by "protected" variants),
//! and every tree carries a weighted complexity used by the Pareto archive.

mod compiled;
mod parse;
mod random;

pub use compiled::CompiledExpr;
pub use parse::{parse, ParseError};
pub use random::{crossover, mutate, random_tree, MutationWeights};

use std::collections::BTreeSet;
use std::fmt;

/// Input variables a formula may reference, in feature-vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variable {
    Year,
    Season,
    Mst,
    Msdmt,
    MsdmtMin,
    Myt,
    Msr,
    Nsrd,
}

impl Variable {
    pub const ALL: [Variable; 8] = [
        Variable::Year,
        Variable::Season,
        Variable::Mst,
        Variable::Msdmt,
        Variable::MsdmtMin,
        Variable::Myt,
        Variable::Msr,
        Variable::Nsrd,
    ];

    /// Position in the feature-vector input order.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Variable::Year => "Y",
            Variable::Season => "S",
            Variable::Mst => "MST",
            Variable::Msdmt => "MSDMT",
            Variable::MsdmtMin => "MSDmT",
            Variable::Myt => "MYT",
            Variable::Msr => "MSR",
            Variable::Nsrd => "NSRD",
        }
    }

    pub fn from_name(name: &str) -> Option<Variable> {
        Variable::ALL.iter().copied().find(|v| v.name() == name)
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Primitive operations available to formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Min,
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Logistic,
    Tanh,
    Gaussian,
}

impl Op {
    pub const ALL: [Op; 13] = [
        Op::Add,
        Op::Sub,
        Op::Mul,
        Op::Div,
        Op::Min,
        Op::Sin,
        Op::Cos,
        Op::Tan,
        Op::Exp,
        Op::Ln,
        Op::Logistic,
        Op::Tanh,
        Op::Gaussian,
    ];

    pub fn arity(self) -> usize {
        match self {
            Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Min => 2,
            _ => 1,
        }
    }

    /// Weighted node cost. Leaves cost 1; `min` is the priciest primitive.
    pub fn complexity_weight(self) -> u32 {
        match self {
            Op::Add | Op::Sub | Op::Mul => 1,
            Op::Div => 2,
            Op::Min => 4,
            _ => 3,
        }
    }

    /// Function-call name, for ops printed as `name(args)`.
    pub fn name(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Div => "/",
            Op::Min => "min",
            Op::Sin => "sin",
            Op::Cos => "cos",
            Op::Tan => "tan",
            Op::Exp => "exp",
            Op::Ln => "ln",
            Op::Logistic => "logistic",
            Op::Tanh => "tanh",
            Op::Gaussian => "gaussian",
        }
    }

    fn apply1(self, a: f64) -> f64 {
        match self {
            Op::Sin => a.sin(),
            Op::Cos => a.cos(),
            Op::Tan => a.tan(),
            Op::Exp => a.exp(),
            Op::Ln => a.ln(),
            Op::Logistic => 1.0 / (1.0 + (-a).exp()),
            Op::Tanh => a.tanh(),
            Op::Gaussian => (-(a * a)).exp(),
            _ => unreachable!("binary op applied to one argument"),
        }
    }

    fn apply2(self, a: f64, b: f64) -> f64 {
        match self {
            Op::Add => a + b,
            Op::Sub => a - b,
            Op::Mul => a * b,
            Op::Div => a / b,
            // f64::min would swallow a NaN operand; strict evaluation must not.
            Op::Min => {
                if a.is_nan() || b.is_nan() {
                    f64::NAN
                } else {
                    a.min(b)
                }
            }
            _ => unreachable!("unary op applied to two arguments"),
        }
    }
}

/// Source of variable values for evaluation.
///
/// Returning `None` reports the variable as unavailable, which surfaces as
/// [`EvalError::MissingVariable`] — a genuine error, distinct from a
/// non-finite arithmetic result.
pub trait VarSource {
    fn get(&self, var: Variable) -> Option<f64>;
}

impl VarSource for [f64; 8] {
    fn get(&self, var: Variable) -> Option<f64> {
        Some(self[var.index()])
    }
}

impl<S: VarSource + ?Sized> VarSource for &S {
    fn get(&self, var: Variable) -> Option<f64> {
        (**self).get(var)
    }
}

impl VarSource for std::collections::BTreeMap<Variable, f64> {
    fn get(&self, var: Variable) -> Option<f64> {
        self.get(&var).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("variable {0} is not available in the input")]
    MissingVariable(Variable),
}

/// An expression tree node. Arity is enforced by construction.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Variable),
    Unary(Op, Box<Expr>),
    Binary(Op, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn unary(op: Op, a: Expr) -> Expr {
        debug_assert_eq!(op.arity(), 1);
        Expr::Unary(op, Box::new(a))
    }

    pub fn binary(op: Op, a: Expr, b: Expr) -> Expr {
        debug_assert_eq!(op.arity(), 2);
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    /// Strict evaluation. Non-finite intermediate results (division by
    /// zero, `ln` of a non-positive value, overflow) propagate through to
    /// the returned value; only a missing variable is an error.
    pub fn evaluate<S: VarSource>(&self, src: &S) -> Result<f64, EvalError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(v) => src.get(*v).ok_or(EvalError::MissingVariable(*v)),
            Expr::Unary(op, a) => Ok(op.apply1(a.evaluate(src)?)),
            Expr::Binary(op, a, b) => Ok(op.apply2(a.evaluate(src)?, b.evaluate(src)?)),
        }
    }

    /// Weighted size: leaves count 1, applications count their primitive's
    /// weight, and the total covers every node in the tree.
    pub fn complexity(&self) -> u32 {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Unary(op, a) => op.complexity_weight() + a.complexity(),
            Expr::Binary(op, a, b) => op.complexity_weight() + a.complexity() + b.complexity(),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Unary(_, a) => 1 + a.node_count(),
            Expr::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    /// Height of the tree; a single leaf has depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Unary(_, a) => 1 + a.depth(),
            Expr::Binary(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Variables referenced anywhere in the tree, in canonical order.
    pub fn variables(&self) -> BTreeSet<Variable> {
        let mut set = BTreeSet::new();
        self.collect_variables(&mut set);
        set
    }

    fn collect_variables(&self, set: &mut BTreeSet<Variable>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                set.insert(*v);
            }
            Expr::Unary(_, a) => a.collect_variables(set),
            Expr::Binary(_, a, b) => {
                a.collect_variables(set);
                b.collect_variables(set);
            }
        }
    }

    /// Subtree at preorder index `idx` (0 is the root).
    pub fn subtree(&self, idx: usize) -> Option<&Expr> {
        if idx == 0 {
            return Some(self);
        }
        match self {
            Expr::Const(_) | Expr::Var(_) => None,
            Expr::Unary(_, a) => a.subtree(idx - 1),
            Expr::Binary(_, a, b) => {
                let left = a.node_count();
                if idx - 1 < left {
                    a.subtree(idx - 1)
                } else {
                    b.subtree(idx - 1 - left)
                }
            }
        }
    }

    /// Depth (from the root, root = 1) of the node at preorder index `idx`.
    pub fn depth_at(&self, idx: usize) -> Option<usize> {
        if idx == 0 {
            return Some(1);
        }
        match self {
            Expr::Const(_) | Expr::Var(_) => None,
            Expr::Unary(_, a) => a.depth_at(idx - 1).map(|d| d + 1),
            Expr::Binary(_, a, b) => {
                let left = a.node_count();
                if idx - 1 < left {
                    a.depth_at(idx - 1).map(|d| d + 1)
                } else {
                    b.depth_at(idx - 1 - left).map(|d| d + 1)
                }
            }
        }
    }

    /// Copy of the tree with the subtree at preorder index `idx` replaced.
    pub fn with_replaced(&self, idx: usize, replacement: Expr) -> Expr {
        if idx == 0 {
            return replacement;
        }
        match self {
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Unary(op, a) => Expr::Unary(*op, Box::new(a.with_replaced(idx - 1, replacement))),
            Expr::Binary(op, a, b) => {
                let left = a.node_count();
                if idx - 1 < left {
                    Expr::Binary(
                        *op,
                        Box::new(a.with_replaced(idx - 1, replacement)),
                        b.clone(),
                    )
                } else {
                    Expr::Binary(
                        *op,
                        a.clone(),
                        Box::new(b.with_replaced(idx - 1 - left, replacement)),
                    )
                }
            }
        }
    }

    /// Collapse subtrees whose leaves are all constants into a single
    /// constant node. The only simplification this library performs.
    pub fn fold_constants(&self) -> Expr {
        match self {
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Unary(op, a) => {
                let a = a.fold_constants();
                if let Expr::Const(ca) = a {
                    Expr::Const(op.apply1(ca))
                } else {
                    Expr::Unary(*op, Box::new(a))
                }
            }
            Expr::Binary(op, a, b) => {
                let a = a.fold_constants();
                let b = b.fold_constants();
                if let (Expr::Const(ca), Expr::Const(cb)) = (&a, &b) {
                    Expr::Const(op.apply2(*ca, *cb))
                } else {
                    Expr::Binary(*op, Box::new(a), Box::new(b))
                }
            }
        }
    }
}

/// Prints the fully parenthesized canonical form; `parse` inverts it.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{}", c),
            Expr::Var(v) => write!(f, "{}", v),
            Expr::Unary(op, a) => write!(f, "{}({})", op.name(), a),
            Expr::Binary(Op::Min, a, b) => write!(f, "min({}, {})", a, b),
            Expr::Binary(op, a, b) => write!(f, "({} {} {})", a, op.name(), b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FunctionSetError {
    #[error("function set must contain at least one primitive")]
    Empty,
}

/// The primitives evolution may draw from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSet {
    ops: Vec<Op>,
}

impl FunctionSet {
    /// Arithmetic four, the trigonometric trio, `exp`, `ln`, `logistic`,
    /// `tanh`, and `min` — everything except the Gaussian.
    pub fn baseline() -> FunctionSet {
        let ops = Op::ALL
            .iter()
            .copied()
            .filter(|op| *op != Op::Gaussian)
            .collect();
        FunctionSet { ops }
    }

    /// Baseline extended with the Gaussian bump.
    pub fn baseline_with_gaussian() -> FunctionSet {
        FunctionSet {
            ops: Op::ALL.to_vec(),
        }
    }

    /// Arbitrary non-empty primitive subset, mainly for experiments that
    /// deliberately restrict the search space.
    pub fn custom(ops: &[Op]) -> Result<FunctionSet, FunctionSetError> {
        if ops.is_empty() {
            return Err(FunctionSetError::Empty);
        }
        let mut sorted = ops.to_vec();
        sorted.sort();
        sorted.dedup();
        Ok(FunctionSet { ops: sorted })
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    pub fn gaussian_enabled(&self) -> bool {
        self.ops.contains(&Op::Gaussian)
    }

    pub fn unary_ops(&self) -> Vec<Op> {
        self.ops.iter().copied().filter(|o| o.arity() == 1).collect()
    }

    pub fn binary_ops(&self) -> Vec<Op> {
        self.ops.iter().copied().filter(|o| o.arity() == 2).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::collections::BTreeMap;

    fn inputs(mst: f64, msdmt: f64) -> [f64; 8] {
        let mut x = [0.0; 8];
        x[Variable::Mst.index()] = mst;
        x[Variable::Msdmt.index()] = msdmt;
        x
    }

    #[test]
    fn evaluates_difference_with_cosine() {
        let tree = parse("MST - cos(MSDMT)").unwrap();
        let y = tree.evaluate(&inputs(20.0, 0.0)).unwrap();
        assert_relative_eq!(y, 19.0, max_relative = 1e-12);
    }

    #[test]
    fn evaluates_affine_form() {
        let tree = parse("0.51 + 0.96*MST").unwrap();
        let y = tree.evaluate(&inputs(10.0, 0.0)).unwrap();
        assert_relative_eq!(y, 10.11, max_relative = 1e-12);
    }

    #[test]
    fn division_by_zero_is_non_finite_not_an_error() {
        let tree = parse("1/(MST - MST)").unwrap();
        let y = tree.evaluate(&inputs(7.5, 0.0)).unwrap();
        assert!(!y.is_finite());
    }

    #[test]
    fn ln_of_negative_is_non_finite() {
        let tree = parse("ln(MST - 10)").unwrap();
        let y = tree.evaluate(&inputs(3.0, 0.0)).unwrap();
        assert!(y.is_nan());
    }

    #[test]
    fn min_propagates_nan() {
        let tree = parse("min(ln(0 - 1), MST)").unwrap();
        let y = tree.evaluate(&inputs(3.0, 0.0)).unwrap();
        assert!(y.is_nan());
    }

    #[test]
    fn missing_variable_is_an_error_distinct_from_non_finite() {
        let mut partial = BTreeMap::new();
        partial.insert(Variable::Mst, 4.0);
        let tree = parse("MST + MYT").unwrap();
        assert_eq!(
            tree.evaluate(&partial),
            Err(EvalError::MissingVariable(Variable::Myt))
        );
    }

    #[test]
    fn complexity_counts_weighted_nodes() {
        assert_eq!(parse("MST").unwrap().complexity(), 1);
        assert_eq!(parse("0.99*MST").unwrap().complexity(), 3);
        assert_eq!(parse("MST - cos(MSDMT)").unwrap().complexity(), 6);
        assert_eq!(parse("0.51 + 0.96*MST").unwrap().complexity(), 5);
        assert_eq!(
            parse("0.55 + 0.95*MST - cos(MSDMT)").unwrap().complexity(),
            10
        );
    }

    #[test]
    fn complexity_of_min_weighs_four() {
        // Hand count: leaves 2 + min 4.
        assert_eq!(parse("min(MST, MYT)").unwrap().complexity(), 6);
    }

    #[test]
    fn subtree_indexing_is_preorder() {
        let tree = parse("(MST + MYT) * S").unwrap();
        assert_eq!(tree.subtree(0), Some(&tree));
        assert_eq!(tree.subtree(1), Some(&parse("MST + MYT").unwrap()));
        assert_eq!(tree.subtree(2), Some(&Expr::Var(Variable::Mst)));
        assert_eq!(tree.subtree(3), Some(&Expr::Var(Variable::Myt)));
        assert_eq!(tree.subtree(4), Some(&Expr::Var(Variable::Season)));
        assert_eq!(tree.subtree(5), None);
        assert_eq!(tree.depth_at(0), Some(1));
        assert_eq!(tree.depth_at(2), Some(3));
        assert_eq!(tree.depth_at(4), Some(2));
    }

    #[test]
    fn replace_subtree_swaps_the_indexed_node() {
        let tree = parse("(MST + MYT) * S").unwrap();
        let out = tree.with_replaced(3, Expr::Const(2.0));
        assert_eq!(out, parse("(MST + 2) * S").unwrap());
    }

    #[test]
    fn fold_constants_collapses_constant_subtrees_only() {
        let tree = parse("(1 + 2)*MST + cos(0)").unwrap();
        let folded = tree.fold_constants();
        assert_eq!(folded, parse("3*MST + 1").unwrap());
    }

    #[test]
    fn logistic_matches_shifted_tanh() {
        for i in -40..=40 {
            let z = i as f64;
            let logistic = Op::Logistic.apply1(z);
            let via_tanh = ((z / 2.0).tanh() + 1.0) / 2.0;
            assert!(
                (logistic - via_tanh).abs() <= 1e-12,
                "z={z}: {logistic} vs {via_tanh}"
            );
        }
    }
}
