//! Reverse-mode gradients and central finite-difference checking.

use std::collections::BTreeMap;

use ndarray::{s, Axis};

use super::expr::{clamp_prob, Bindings, Expr, Forward, Matrix, NodeKind, OpKind};
use super::AutodiffError;

/// Gradient of a scalar expression with respect to each trainable input.
pub type Gradients = BTreeMap<String, Matrix>;

impl Expr {
    /// `∂root/∂input` for every live trainable input, in one reverse sweep.
    pub fn gradients(&self, bindings: &Bindings<'_>) -> Result<Gradients, AutodiffError> {
        Ok(self.value_and_gradients(bindings)?.1)
    }

    /// Scalar root value together with its gradients.
    pub fn value_and_gradients(&self, bindings: &Bindings<'_>) -> Result<(f64, Gradients), AutodiffError> {
        let (rows, cols) = self.root_shape();
        if (rows, cols) != (1, 1) {
            return Err(AutodiffError::NonScalarRoot { rows, cols });
        }
        let forward = self.forward(bindings)?;
        let value = forward.root()[[0, 0]];
        Ok((value, self.backward(&forward)))
    }

    fn backward(&self, forward: &Forward<'_>) -> Gradients {
        let n = self.nodes.len();
        // Only nodes with a trainable ancestor need adjoints.
        let mut needs = vec![false; n];
        for (i, node) in self.nodes.iter().enumerate() {
            needs[i] = self.live[i]
                && match &node.kind {
                    NodeKind::Input { trainable, .. } => *trainable,
                    NodeKind::Constant(_) => false,
                    NodeKind::Op { operands, .. } => operands.iter().any(|o| needs[o.0]),
                };
        }

        let mut adjoints: Vec<Option<Matrix>> = vec![None; n];
        if needs[self.root.0] {
            adjoints[self.root.0] = Some(Matrix::ones((1, 1)));
        }
        let mut grads = Gradients::new();

        for i in (0..n).rev() {
            if !needs[i] {
                continue;
            }
            let Some(adjoint) = adjoints[i].take() else {
                continue;
            };
            match &self.nodes[i].kind {
                NodeKind::Input { name, .. } => {
                    grads.insert(name.clone(), adjoint);
                }
                NodeKind::Constant(_) => {}
                NodeKind::Op { op, operands } => {
                    let args: Vec<&Matrix> = operands.iter().map(|o| forward.value_at(o.0)).collect();
                    let out = forward.value_at(i);
                    for (k, operand) in operands.iter().enumerate() {
                        if !needs[operand.0] {
                            continue;
                        }
                        let contribution = operand_adjoint(op, &args, out, &adjoint, k);
                        match &mut adjoints[operand.0] {
                            Some(acc) => *acc += &contribution,
                            slot @ None => *slot = Some(contribution),
                        }
                    }
                }
            }
        }

        // Live trainable inputs whose adjoint never materialised get zeros.
        for (name, shape) in self.trainable_inputs() {
            grads
                .entry(name.to_string())
                .or_insert_with(|| Matrix::zeros(shape));
        }
        grads
    }

    /// Compares analytic gradients against central differences
    /// `(f(θ+h) − f(θ−h)) / 2h` for every trainable entry.
    pub fn finite_difference_check(&self, bindings: &Bindings<'_>, step: f64) -> Result<GradCheck, AutodiffError> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(AutodiffError::InvalidStep(step));
        }
        let analytic = self.gradients(bindings)?;
        let mut probe = bindings.clone();
        let mut check = GradCheck::default();
        for (name, grad) in &analytic {
            let base = probe
                .get(name)
                .cloned()
                .ok_or_else(|| AutodiffError::MissingBinding { name: name.clone() })?;
            for (index, &a) in grad.indexed_iter() {
                let original = base[index];
                probe.get_mut(name).expect("bound above")[index] = original + step;
                let plus = self.evaluate(&probe)?[[0, 0]];
                probe.get_mut(name).expect("bound above")[index] = original - step;
                let minus = self.evaluate(&probe)?[[0, 0]];
                probe.get_mut(name).expect("bound above")[index] = original;

                let numeric = (plus - minus) / (2.0 * step);
                let err = relative_error(a, numeric);
                check.entries += 1;
                if err > check.max_relative_error || check.entries == 1 {
                    check.max_relative_error = err;
                    check.worst = Some(WorstEntry {
                        input: name.clone(),
                        index,
                        analytic: a,
                        numeric,
                    });
                }
            }
        }
        Ok(check)
    }
}

/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

#[derive(Clone, Debug, Default)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub entries: usize,
    pub worst: Option<WorstEntry>,
}

#[derive(Clone, Debug)]
pub struct WorstEntry {
    pub input: String,
    pub index: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
}

fn operand_adjoint(op: &OpKind, args: &[&Matrix], out: &Matrix, adj: &Matrix, k: usize) -> Matrix {
    match op {
        OpKind::MatMul => {
            if k == 0 {
                adj.dot(&args[1].t())
            } else {
                args[0].t().dot(adj)
            }
        }
        OpKind::Add => adj.clone(),
        OpKind::Mul => adj * args[1 - k],
        OpKind::Scale(c) => adj * *c,
        OpKind::ConcatCols => {
            let start: usize = args[..k].iter().map(|a| a.ncols()).sum();
            adj.slice(s![.., start..start + args[k].ncols()]).to_owned()
        }
        OpKind::MeanRows => {
            let rows = args[0].nrows();
            let row = adj.row(0).mapv(|g| g / rows as f64);
            row.broadcast((rows, args[0].ncols()))
                .expect("row broadcasts over rows")
                .to_owned()
        }
        OpKind::SoftmaxRows => {
            let weighted = (adj * out).sum_axis(Axis(1)).insert_axis(Axis(1));
            out * &(adj - &weighted)
        }
        OpKind::Sigmoid => adj * &out.mapv(|y| y * (1.0 - y)),
        OpKind::Relu => {
            let mut g = adj.clone();
            g.zip_mut_with(args[0], |g, &x| {
                if x <= 0.0 {
                    *g = 0.0
                }
            });
            g
        }
        OpKind::LeakyRelu(slope) => {
            let mut g = adj.clone();
            g.zip_mut_with(args[0], |g, &x| {
                if x <= 0.0 {
                    *g *= slope
                }
            });
            g
        }
        OpKind::Transpose => adj.t().to_owned(),
        OpKind::Sum => Matrix::from_elem(args[0].dim(), adj[[0, 0]]),
        OpKind::BinaryCrossEntropy => {
            let scale = adj[[0, 0]] / args[0].len().max(1) as f64;
            let (probs, targets) = (args[0], args[1]);
            let mut g = Matrix::zeros(probs.dim());
            ndarray::Zip::from(&mut g)
                .and(probs)
                .and(targets)
                .for_each(|g, &p, &y| {
                    let p = clamp_prob(p);
                    *g = scale
                        * if k == 0 {
                            (p - y) / (p * (1.0 - p))
                        } else {
                            -(p.ln() - (1.0 - p).ln())
                        };
                });
            g
        }
        OpKind::CategoricalCrossEntropy => {
            let scale = adj[[0, 0]] / args[0].nrows().max(1) as f64;
            let (probs, targets) = (args[0], args[1]);
            let mut g = Matrix::zeros(probs.dim());
            ndarray::Zip::from(&mut g)
                .and(probs)
                .and(targets)
                .for_each(|g, &p, &y| {
                    let p = clamp_prob(p);
                    *g = scale * if k == 0 { -y / p } else { -p.ln() };
                });
            g
        }
    }
}
