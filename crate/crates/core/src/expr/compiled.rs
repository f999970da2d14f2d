//! Postfix compilation for bulk evaluation.
//!
//! Evaluating a tree over a whole dataset row-by-recursion spends most of
//! its time on dispatch. Compiling once to postfix and running a value
//! stack over all rows at each instruction gives the same IEEE operations
//! per row in the same order, so results are bit-identical to
//! [`Expr::evaluate`]; only the grouping differs.

use super::{Expr, Op, Variable};

enum Instr {
    Const(f64),
    Var(Variable),
    Apply1(Op),
    Apply2(Op),
}

/// A tree lowered to postfix, evaluable over many rows at once.
pub struct CompiledExpr {
    code: Vec<Instr>,
    max_stack: usize,
}

fn lower(expr: &Expr, code: &mut Vec<Instr>) {
    match expr {
        Expr::Const(c) => code.push(Instr::Const(*c)),
        Expr::Var(v) => code.push(Instr::Var(*v)),
        Expr::Unary(op, a) => {
            lower(a, code);
            code.push(Instr::Apply1(*op));
        }
        Expr::Binary(op, a, b) => {
            lower(a, code);
            lower(b, code);
            code.push(Instr::Apply2(*op));
        }
    }
}

impl CompiledExpr {
    pub fn new(expr: &Expr) -> CompiledExpr {
        let mut code = Vec::with_capacity(expr.node_count());
        lower(expr, &mut code);
        let mut depth = 0usize;
        let mut max_stack = 0usize;
        for instr in &code {
            match instr {
                Instr::Const(_) | Instr::Var(_) => depth += 1,
                Instr::Apply1(_) => {}
                Instr::Apply2(_) => depth -= 1,
            }
            max_stack = max_stack.max(depth);
        }
        CompiledExpr { code, max_stack }
    }

    /// Evaluate over all rows, writing one value per row into `out`.
    /// `scratch` is caller-provided working memory, reused across calls.
    pub fn evaluate_rows(&self, rows: &[[f64; 8]], scratch: &mut Vec<Vec<f64>>, out: &mut Vec<f64>) {
        let n = rows.len();
        while scratch.len() < self.max_stack {
            scratch.push(vec![0.0; n]);
        }
        for buf in scratch.iter_mut() {
            buf.resize(n, 0.0);
        }
        let mut sp = 0usize;
        for instr in &self.code {
            match instr {
                Instr::Const(c) => {
                    scratch[sp].iter_mut().for_each(|x| *x = *c);
                    sp += 1;
                }
                Instr::Var(v) => {
                    let idx = v.index();
                    for (x, row) in scratch[sp].iter_mut().zip(rows) {
                        *x = row[idx];
                    }
                    sp += 1;
                }
                Instr::Apply1(op) => {
                    let buf = &mut scratch[sp - 1];
                    match op {
                        Op::Sin => buf.iter_mut().for_each(|x| *x = x.sin()),
                        Op::Cos => buf.iter_mut().for_each(|x| *x = x.cos()),
                        Op::Tan => buf.iter_mut().for_each(|x| *x = x.tan()),
                        Op::Exp => buf.iter_mut().for_each(|x| *x = x.exp()),
                        Op::Ln => buf.iter_mut().for_each(|x| *x = x.ln()),
                        Op::Logistic => buf.iter_mut().for_each(|x| *x = 1.0 / (1.0 + (-*x).exp())),
                        Op::Tanh => buf.iter_mut().for_each(|x| *x = x.tanh()),
                        Op::Gaussian => buf.iter_mut().for_each(|x| *x = (-(*x * *x)).exp()),
                        _ => unreachable!("binary op in unary slot"),
                    }
                }
                Instr::Apply2(op) => {
                    let (left, right) = scratch.split_at_mut(sp - 1);
                    let a = &mut left[sp - 2];
                    let b = &right[0];
                    match op {
                        Op::Add => a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
                        Op::Sub => a.iter_mut().zip(b).for_each(|(x, y)| *x -= y),
                        Op::Mul => a.iter_mut().zip(b).for_each(|(x, y)| *x *= y),
                        Op::Div => a.iter_mut().zip(b).for_each(|(x, y)| *x /= y),
                        Op::Min => a.iter_mut().zip(b).for_each(|(x, y)| {
                            *x = if x.is_nan() || y.is_nan() {
                                f64::NAN
                            } else {
                                x.min(*y)
                            }
                        }),
                        _ => unreachable!("unary op in binary slot"),
                    }
                    sp -= 1;
                }
            }
        }
        debug_assert_eq!(sp, 1);
        out.clear();
        out.extend_from_slice(&scratch[0]);
    }
}
