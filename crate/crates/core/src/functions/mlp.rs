use serde::{Deserialize, Serialize};

use super::compose::relu_gate;
use super::DirDiff;
use crate::base::Vector;
use crate::error::{Error, Result};

/// One `(input, target)` training pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

/// Mean squared loss of a fully connected ReLU network over a fixed dataset,
/// as a function of the flattened weight vector.
///
/// Layer `l` maps `ℝ^{dims[l-1]} → ℝ^{dims[l]}`; its weights are stored
/// row-major followed by its bias. ReLU follows every layer but the last.
///
/// The loss is not globally Lipschitz. [`DirDiff::lipschitz`] returns a
/// rigorous bound valid for weight vectors of norm at most `radius`.
#[derive(Clone, Debug)]
pub struct ReluMlp {
    dims: Vec<usize>,
    data: Vec<Sample>,
    radius: f64,
    n_weights: usize,
    lipschitz: f64,
}

struct Pass {
    loss: f64,
    dloss: f64,
    /// Layer inputs (post-activation), one per layer.
    acts: Vec<Vec<f64>>,
    /// ReLU gates of hidden layers.
    gates: Vec<Vec<bool>>,
    residual: Vec<f64>,
}

impl ReluMlp {
    pub fn new(dims: Vec<usize>, data: Vec<Sample>, radius: f64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::contract(
                "layer_dims needs an input and at least one layer, all nonzero",
            ));
        }
        if data.is_empty() {
            return Err(Error::contract("relu_mlp needs at least one data point"));
        }
        let (n_in, n_out) = (dims[0], dims[dims.len() - 1]);
        for (i, s) in data.iter().enumerate() {
            if s.input.len() != n_in || s.target.len() != n_out {
                return Err(Error::contract(format!(
                    "data point {i} has shape ({}, {}), expected ({n_in}, {n_out})",
                    s.input.len(),
                    s.target.len()
                )));
            }
            if s.input.iter().chain(&s.target).any(|v| !v.is_finite()) {
                return Err(Error::contract(format!("data point {i} is not finite")));
            }
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::contract("relu_mlp weight radius must be positive"));
        }
        let n_weights = dims.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        let mut net = Self {
            dims,
            data,
            radius,
            n_weights,
            lipschitz: 0.0,
        };
        net.lipschitz = net.lipschitz_bound();
        Ok(net)
    }

    pub fn num_weights(&self) -> usize {
        self.n_weights
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// With every layer's weights and bias bounded by `R` in norm, activations
    /// obey `A_l ≤ R·A_{l-1} + R` and the output Jacobian in the layer-`l`
    /// parameters is bounded by `sqrt(A_{l-1}² + 1)·R^{D-l}`.
    fn lipschitz_bound(&self) -> f64 {
        let r = self.radius;
        let depth = self.dims.len() - 1;
        let mut worst: f64 = 0.0;
        for s in &self.data {
            let mut a = vec![norm(&s.input)];
            for l in 1..=depth {
                a.push(r * a[l - 1] + r);
            }
            let jac_sq: f64 = (1..=depth)
                .map(|l| (a[l - 1].powi(2) + 1.0) * r.powi(2 * (depth - l) as i32))
                .sum();
            worst = worst.max(2.0 * (a[depth] + norm(&s.target)) * jac_sq.sqrt());
        }
        worst
    }

    fn pass(&self, w: &[f64], dw: &[f64], s: &Sample) -> Pass {
        let depth = self.dims.len() - 1;
        let mut a = s.input.clone();
        let mut da = vec![0.0; a.len()];
        let mut acts = Vec::with_capacity(depth);
        let mut gates = Vec::with_capacity(depth - 1);
        let mut off = 0;
        for l in 1..=depth {
            let (n_in, n_out) = (self.dims[l - 1], self.dims[l]);
            let bias = off + n_out * n_in;
            let mut z = vec![0.0; n_out];
            let mut dz = vec![0.0; n_out];
            for i in 0..n_out {
                let row = off + i * n_in;
                let mut zi = w[bias + i];
                let mut dzi = dw[bias + i];
                for j in 0..n_in {
                    zi += w[row + j] * a[j];
                    dzi += dw[row + j] * a[j] + w[row + j] * da[j];
                }
                z[i] = zi;
                dz[i] = dzi;
            }
            off = bias + n_out;
            acts.push(std::mem::take(&mut a));
            if l < depth {
                let g: Vec<bool> = z.iter().zip(&dz).map(|(&z, &d)| relu_gate(z, d)).collect();
                a = z.iter().map(|v| v.max(0.0)).collect();
                da = dz.iter().zip(&g).map(|(&d, &on)| if on { d } else { 0.0 }).collect();
                gates.push(g);
            } else {
                a = z;
                da = dz;
            }
        }
        let residual: Vec<f64> = a.iter().zip(&s.target).map(|(o, t)| o - t).collect();
        let loss = residual.iter().map(|r| r * r).sum();
        let dloss = 2.0 * residual.iter().zip(&da).map(|(r, d)| r * d).sum::<f64>();
        Pass {
            loss,
            dloss,
            acts,
            gates,
            residual,
        }
    }

    fn check(&self, w: &Vector) {
        assert_eq!(w.dim(), self.n_weights, "weight vector has wrong length");
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl DirDiff for ReluMlp {
    fn dim(&self) -> usize {
        self.n_weights
    }

    fn eval(&self, w: &Vector) -> f64 {
        self.check(w);
        let zero = vec![0.0; self.n_weights];
        let total: f64 = self
            .data
            .iter()
            .map(|s| self.pass(w.as_slice(), &zero, s).loss)
            .sum();
        total / self.data.len() as f64
    }

    fn dir_deriv(&self, w: &Vector, d: &Vector) -> f64 {
        self.check(w);
        let total: f64 = self
            .data
            .iter()
            .map(|s| self.pass(w.as_slice(), d.as_slice(), s).dloss)
            .sum();
        total / self.data.len() as f64
    }

    fn grad_select(&self, w: &Vector, d: &Vector) -> Vector {
        self.check(w);
        let depth = self.dims.len() - 1;
        let ws = w.as_slice();
        let scale = 2.0 / self.data.len() as f64;
        let mut grad = vec![0.0; self.n_weights];
        // layer offsets
        let mut offs = Vec::with_capacity(depth);
        let mut off = 0;
        for l in 1..=depth {
            offs.push(off);
            off += self.dims[l] * (self.dims[l - 1] + 1);
        }
        for s in &self.data {
            let p = self.pass(ws, d.as_slice(), s);
            let mut delta: Vec<f64> = p.residual.iter().map(|r| scale * r).collect();
            for l in (1..=depth).rev() {
                let (n_in, n_out) = (self.dims[l - 1], self.dims[l]);
                let off = offs[l - 1];
                let bias = off + n_out * n_in;
                let a = &p.acts[l - 1];
                let mut back = vec![0.0; n_in];
                for i in 0..n_out {
                    let row = off + i * n_in;
                    for j in 0..n_in {
                        grad[row + j] += delta[i] * a[j];
                        back[j] += ws[row + j] * delta[i];
                    }
                    grad[bias + i] += delta[i];
                }
                if l > 1 {
                    for (b, &on) in back.iter_mut().zip(&p.gates[l - 2]) {
                        if !on {
                            *b = 0.0;
                        }
                    }
                }
                delta = back;
            }
        }
        Vector::from_vec_unchecked(grad)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(input: &[f64], target: &[f64]) -> Sample {
        Sample {
            input: input.to_vec(),
            target: target.to_vec(),
        }
    }

    #[test]
    fn identity_net_has_zero_loss() {
        let net = ReluMlp::new(vec![1, 1], vec![sample(&[1.0], &[1.0])], 2.0).unwrap();
        assert_eq!(net.num_weights(), 2);
        assert_eq!(net.eval(&Vector::from_slice(&[1.0, 0.0])), 0.0);
    }

    #[test]
    fn gradient_is_direction_consistent_at_dead_unit() {
        // 1 -> 1 -> 1 with the hidden pre-activation exactly zero
        let net = ReluMlp::new(vec![1, 1, 1], vec![sample(&[1.0], &[2.0])], 3.0).unwrap();
        let w = Vector::from_slice(&[1.0, -1.0, 1.0, 0.5]);
        for d in [[1.0, 0.0, 0.0, 0.0], [-1.0, 0.3, 0.2, 0.1]] {
            let d = Vector::from_slice(&d);
            let g = net.grad_select(&w, &d);
            assert!((g.dot(&d) - net.dir_deriv(&w, &d)).abs() < 1e-12);
        }
        let d = Vector::from_slice(&[1.0, 0.0, 0.0, 0.0]);
        let t = 1e-7;
        let fd = (net.eval(&(&w + &d.scaled(t))) - net.eval(&w)) / t;
        assert!((fd - net.dir_deriv(&w, &d)).abs() < 1e-4);
    }

    #[test]
    fn rejects_shape_mismatch() {
        assert!(ReluMlp::new(vec![2, 1], vec![sample(&[1.0], &[1.0])], 1.0).is_err());
        assert!(ReluMlp::new(vec![1], vec![sample(&[1.0], &[1.0])], 1.0).is_err());
        assert!(ReluMlp::new(vec![1, 1], vec![], 1.0).is_err());
    }
}
