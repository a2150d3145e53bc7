use std::collections::BTreeMap;

use super::{TensorizedModel, TreeMatrices};
use crate::error::{Error, Result};
use crate::exec::{Executor, Instr, OutputColumn, ProgramBuilder, SlotId};
use crate::kernels::{ArithOp, CmpOp, KernelBackend, UnaryOp};
use crate::store::LogicalType;
use crate::tensor::Tensor;
use std::sync::Arc;

/// Slots produced by the tree lowering.
#[derive(Clone, Copy, Debug)]
pub struct TreeSlots {
    /// `n x L` Bool: `P[r, l] == D[l]`.
    pub mask: SlotId,
    /// `n x 1` Int64 leaf number.
    pub leaf: SlotId,
    /// `n x 1` Float64 prediction.
    pub value: SlotId,
}

fn const_f64(b: &mut ProgramBuilder, v: Vec<f64>, rows: usize, width: usize) -> SlotId {
    b.constant(Tensor::new(v, rows, width).expect("constant shape"))
}

pub fn lower_tree(b: &mut ProgramBuilder, t: &TreeMatrices, x: SlotId, rows: SlotId) -> TreeSlots {
    let (i_n, l_n) = (t.internal_count(), t.leaf_count());
    let a = b.constant(t.a.clone());
    let th = b.constant(t.b.clone());
    let c = b.constant(t.c.clone());
    let d = b.constant(t.d.clone());
    let e = b.constant(t.e.clone());
    let xa = b.matmul(x, a);
    let below = b.compare(xa, th, CmpOp::Lt, true);
    let one_row = const_f64(b, vec![1.0; i_n], 1, i_n);
    let zero_row = const_f64(b, vec![0.0; i_n], 1, i_n);
    let ones = b.broadcast(one_row, rows);
    let zeros = b.broadcast(zero_row, rows);
    let s = b.select_where(below, ones, zeros);
    let p = b.matmul(s, c);
    let mask = b.compare(p, d, CmpOp::Eq, true);
    let maskf = b.unary(mask, UnaryOp::ToFloat64);
    let ids = const_f64(b, (0..l_n).map(|l| l as f64).collect(), l_n, 1);
    let leaf_f = b.matmul(maskf, ids);
    let leaf = b.unary(leaf_f, UnaryOp::ToInt64);
    let value = b.gather(e, leaf);
    TreeSlots { mask, leaf, value }
}

/// Emits the prediction of `model` over Float64 feature vectors. Returns
/// an `n x 1` Float64 slot.
pub fn lower_predict(
    b: &mut ProgramBuilder,
    model: &TensorizedModel,
    features: &[SlotId],
    rows: SlotId,
) -> Result<SlotId> {
    let expected = match model {
        TensorizedModel::Linear { w, .. } => w.rows(),
        TensorizedModel::Tree(t) => t.a.rows(),
        TensorizedModel::Constant(_) => features.len(),
    };
    if features.len() != expected {
        return Err(Error::Plan(format!(
            "model expects {expected} features, got {}",
            features.len()
        )));
    }
    let stack = |b: &mut ProgramBuilder| {
        if features.len() == 1 {
            features[0]
        } else {
            b.emit(Instr::HStack {
                parts: features.to_vec(),
            })
        }
    };
    Ok(match model {
        TensorizedModel::Constant(v) => {
            let row = const_f64(b, vec![*v], 1, 1);
            b.broadcast(row, rows)
        }
        TensorizedModel::Linear { w, b: bias, logistic } => {
            let x = stack(b);
            let w = b.constant(w.clone());
            let bias = const_f64(b, vec![*bias], 1, 1);
            let xw = b.matmul(x, w);
            let z = b.arith(xw, bias, ArithOp::Add, true);
            if *logistic {
                // 1 / (1 + exp(-z))
                let neg = b.unary(z, UnaryOp::Neg);
                let ex = b.unary(neg, UnaryOp::Exp);
                let one = const_f64(b, vec![1.0], 1, 1);
                let denom = b.arith(ex, one, ArithOp::Add, true);
                let ones = b.broadcast(one, rows);
                b.arith(ones, denom, ArithOp::Div, false)
            } else {
                z
            }
        }
        TensorizedModel::Tree(t) => {
            let x = stack(b);
            lower_tree(b, t, x, rows).value
        }
    })
}

fn run(backend: Arc<dyn KernelBackend>, build: impl FnOnce(&mut ProgramBuilder, SlotId, SlotId) -> Result<Vec<SlotId>>, x: &Tensor) -> Result<Vec<Tensor>> {
    let mut b = ProgramBuilder::new();
    b.begin("project", "predict");
    let xs = b.constant(x.clone());
    let rows = b.row_count(xs);
    let outs = build(&mut b, xs, rows)?;
    b.end(rows);
    let outputs = outs
        .iter()
        .enumerate()
        .map(|(i, &slot)| OutputColumn {
            name: format!("out{i}"),
            logical: LogicalType::Float64,
            slot,
        })
        .collect();
    let plan = b.finish(outputs, rows);
    Executor::new(plan, backend).run_raw(&BTreeMap::new())
}

/// Runs the lowered prediction of `model` over the rows of `x` (`n x F`).
pub fn predict(backend: Arc<dyn KernelBackend>, model: &TensorizedModel, x: &Tensor) -> Result<Tensor> {
    let f = x.width();
    let mut out = run(
        backend,
        |b, xs, rows| {
            let cols: Vec<SlotId> = (0..f).map(|c| b.emit(Instr::Column { src: xs, col: c })).collect();
            Ok(vec![lower_predict(b, model, &cols, rows)?])
        },
        x,
    )?;
    Ok(out.remove(0))
}

/// Leaf numbers chosen by the GEMM lowering, and the `n x L` match mask.
pub fn tree_leaves(backend: Arc<dyn KernelBackend>, t: &TreeMatrices, x: &Tensor) -> Result<(Tensor, Tensor)> {
    let mut out = run(
        backend,
        |b, xs, rows| {
            let s = lower_tree(b, t, xs, rows);
            Ok(vec![s.leaf, s.mask])
        },
        x,
    )?;
    let mask = out.pop().expect("mask");
    let leaf = out.pop().expect("leaf");
    Ok((leaf, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::BackendKind;
    use crate::ml::{load_model, tensorize};

    #[test]
    fn depth_one_tree_predicts() {
        let m = load_model(
            r#"{"kind":"tree","nodes":[{"feature":0,"threshold":5.0,"left":1,"right":2},{"leaf":10.0},{"leaf":20.0}]}"#,
        )
        .unwrap();
        for k in BackendKind::all() {
            let y = predict(k.create(), &tensorize(&m), &Tensor::from_f64(vec![3.0, 7.0, 5.0])).unwrap();
            assert_eq!(y.as_f64().unwrap(), [10.0, 20.0, 20.0]);
        }
    }

    #[test]
    fn linear_and_identity() {
        let m = load_model(r#"{"kind":"linear","weights":[2.0],"bias":1.0}"#).unwrap();
        let y = predict(BackendKind::Reference.create(), &tensorize(&m), &Tensor::from_f64(vec![0.0, 4.0])).unwrap();
        assert_eq!(y.as_f64().unwrap(), [1.0, 9.0]);
        let id = load_model(r#"{"kind":"linear","weights":[1.0],"bias":0.0}"#).unwrap();
        let x = Tensor::from_f64(vec![-2.5, 0.0, 1e300]);
        let y = predict(BackendKind::Reference.create(), &tensorize(&id), &x).unwrap();
        assert_eq!(y.as_f64().unwrap(), x.as_f64().unwrap());
    }

    #[test]
    fn logistic_matches_scalar() {
        let m = load_model(r#"{"kind":"logistic","weights":[0.5,-1.0],"bias":0.25}"#).unwrap();
        let x = Tensor::new(vec![1.0, 2.0, -3.0, 0.5], 2, 2).unwrap();
        let y = predict(BackendKind::Parallel.create(), &tensorize(&m), &x).unwrap();
        assert_eq!(y.as_f64().unwrap()[0], m.predict_row(&[1.0, 2.0]));
        assert_eq!(y.as_f64().unwrap()[1], m.predict_row(&[-3.0, 0.5]));
    }

    #[test]
    fn arity_mismatch() {
        let m = tensorize(&load_model(r#"{"kind":"linear","weights":[2.0, 1.0],"bias":1.0}"#).unwrap());
        let mut b = ProgramBuilder::new();
        b.begin("project", "");
        let x = b.scalar_i64(0);
        assert!(lower_predict(&mut b, &m, &[x], x).is_err());
    }
}
