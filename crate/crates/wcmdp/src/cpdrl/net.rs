//! Fixed-architecture networks for the count-proportion policy and its
//! critic, with hand-rolled reverse-mode gradients.
//!
//! Both networks are two hidden layers of 64 tanh units. The policy head
//! splits into `S·A` priority scores squashed into `(0, 1]` with an epsilon
//! floor, plus `K` resource-use means squashed onto the closed interval
//! `[0, 1]` through a rescaled sigmoid — the rescaling lets the mean reach
//! the boundary at finite pre-activations, which matters because a budget of
//! `b` only affords unit-cost actions once `p̃ = 1` exactly.

use rand::prelude::*;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::sampler::PolicyOutput;
use crate::scalar::Scalar;

/// Priority floor: head A outputs live in `(PRIORITY_EPS, 1)`.
pub const PRIORITY_EPS: f64 = 1e-6;
/// Sigmoid margin folded out of head B so proportions reach 0 and 1 exactly.
pub const PROPORTION_MARGIN: f64 = 0.05;
/// Initial bias on the resource-use outputs. Unit-cost actions are only
/// affordable once `b̃_k >= d_k`, which for tight budgets means `p̃ = 1`
/// exactly; starting the mean near the boundary keeps the exploration noise
/// crossing it, otherwise the proportion head sits in a zero-gradient region
/// and the budget is never discovered.
pub const RESOURCE_BIAS_INIT: f64 = 2.6;
/// Hidden width of both networks.
pub const HIDDEN: usize = 64;

fn sigmoid<T: Scalar>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

/// A dense multilayer perceptron with tanh hidden activations and a linear
/// output layer, parameters stored flat for the optimizer and checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp<T> {
    dims: Vec<usize>,
    params: Vec<T>,
}

/// Per-layer forward intermediates needed by the backward pass.
#[derive(Debug, Clone)]
pub struct Cache<T> {
    /// `inputs[l]` is the input vector of layer `l`.
    inputs: Vec<Vec<T>>,
    output: Vec<T>,
}

impl<T: Scalar> Cache<T> {
    pub fn output(&self) -> &[T] {
        &self.output
    }
}

impl<T: Scalar> Mlp<T> {
    pub fn num_params(dims: &[usize]) -> usize {
        dims.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    /// Orthogonal hidden layers (gain √2), small orthogonal output layer
    /// (gain 0.01), zero biases.
    pub fn orthogonal_init<R: Rng>(dims: Vec<usize>, rng: &mut R) -> Self {
        let mut params = vec![T::zero(); Self::num_params(&dims)];
        let layers = dims.len() - 1;
        let mut offset = 0;
        for l in 0..layers {
            let (rows, cols) = (dims[l + 1], dims[l]);
            let gain = if l + 1 == layers {
                T::of(0.01)
            } else {
                T::of(std::f64::consts::SQRT_2)
            };
            let w = orthogonal_matrix::<T, R>(rows, cols, rng);
            for (i, v) in w.into_iter().enumerate() {
                params[offset + i] = gain * v;
            }
            offset += rows * cols + rows; // biases stay zero
        }
        Self { dims, params }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<T>) {
        assert_eq!(params.len(), self.params.len());
        self.params = params;
    }

    fn layer_offsets(&self, l: usize) -> (usize, usize, usize, usize) {
        let mut offset = 0;
        for i in 0..l {
            offset += self.dims[i + 1] * self.dims[i] + self.dims[i + 1];
        }
        let rows = self.dims[l + 1];
        let cols = self.dims[l];
        (offset, offset + rows * cols, rows, cols)
    }

    pub fn forward(&self, input: &[T]) -> Cache<T> {
        debug_assert_eq!(input.len(), self.dims[0]);
        let layers = self.dims.len() - 1;
        let mut inputs = Vec::with_capacity(layers);
        let mut current = input.to_vec();
        for l in 0..layers {
            let (w_off, b_off, rows, cols) = self.layer_offsets(l);
            let mut z = vec![T::zero(); rows];
            for i in 0..rows {
                let mut acc = self.params[b_off + i];
                let row = &self.params[w_off + i * cols..w_off + (i + 1) * cols];
                for (wij, xj) in row.iter().zip(&current) {
                    acc += *wij * *xj;
                }
                z[i] = acc;
            }
            inputs.push(current);
            if l + 1 == layers {
                current = z; // linear output
            } else {
                current = z.into_iter().map(|v| v.tanh()).collect();
            }
        }
        Cache {
            inputs,
            output: current,
        }
    }

    /// Accumulate `d(loss)/d(params)` into `grad` given `d(loss)/d(output)`.
    pub fn backward(&self, cache: &Cache<T>, dout: &[T], grad: &mut [T]) {
        debug_assert_eq!(grad.len(), self.params.len());
        let layers = self.dims.len() - 1;
        let mut delta = dout.to_vec();
        for l in (0..layers).rev() {
            let (w_off, b_off, rows, cols) = self.layer_offsets(l);
            let input = &cache.inputs[l];
            for i in 0..rows {
                let d = delta[i];
                if d != T::zero() {
                    grad[b_off + i] += d;
                    let row = &mut grad[w_off + i * cols..w_off + (i + 1) * cols];
                    for (g, xj) in row.iter_mut().zip(input) {
                        *g += d * *xj;
                    }
                }
            }
            if l > 0 {
                let mut prev = vec![T::zero(); cols];
                for i in 0..rows {
                    let d = delta[i];
                    if d != T::zero() {
                        let row = &self.params[w_off + i * cols..w_off + (i + 1) * cols];
                        for (p, wij) in prev.iter_mut().zip(row) {
                            *p += d * *wij;
                        }
                    }
                }
                // The stored layer input is tanh(z) of the previous layer.
                for (p, h) in prev.iter_mut().zip(input) {
                    *p *= T::one() - *h * *h;
                }
                delta = prev;
            }
        }
    }
}

/// Orthonormal rows/columns via modified Gram-Schmidt on a Gaussian draw;
/// positive-diagonal normalization makes the factor unique.
fn orthogonal_matrix<T: Scalar, R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Vec<T> {
    let (n, k, transpose) = if rows >= cols {
        (rows, cols, false)
    } else {
        (cols, rows, true)
    };
    // n x k Gaussian, orthonormalize the k columns.
    let mut a: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            (0..n)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    for j in 0..k {
        for prev in 0..j {
            let dot: f64 = a[j].iter().zip(&a[prev]).map(|(x, y)| x * y).sum();
            let (col_prev, col_j) = {
                let (lo, hi) = a.split_at_mut(j);
                (&lo[prev], &mut hi[0])
            };
            for (x, y) in col_j.iter_mut().zip(col_prev) {
                *x -= dot * *y;
            }
        }
        let norm: f64 = a[j].iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in a[j].iter_mut() {
            *x /= norm;
        }
    }
    let mut out = vec![T::zero(); rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            let v = if transpose { a[i][j] } else { a[j][i] };
            out[i * cols + j] = T::of(v);
        }
    }
    out
}

/// The count-proportion policy network: input `(x̄, b̄)` of width `S + K`,
/// output `S·A` priorities plus `K` resource-use means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNet<T> {
    mlp: Mlp<T>,
    num_states: usize,
    num_actions: usize,
    num_resources: usize,
}

/// Forward intermediates plus the raw head outputs.
pub struct PolicyCache<T> {
    cache: Cache<T>,
}

impl<T: Scalar> PolicyNet<T> {
    pub fn new<R: Rng>(
        num_states: usize,
        num_actions: usize,
        num_resources: usize,
        rng: &mut R,
    ) -> Self {
        let dims = vec![
            num_states + num_resources,
            HIDDEN,
            HIDDEN,
            num_states * num_actions + num_resources,
        ];
        let mut mlp = Mlp::orthogonal_init(dims, rng);
        let sa = num_states * num_actions;
        let (_, b_off, rows, _) = mlp.layer_offsets(2);
        debug_assert_eq!(rows, sa + num_resources);
        for k in 0..num_resources {
            mlp.params_mut()[b_off + sa + k] = T::of(RESOURCE_BIAS_INIT);
        }
        Self {
            mlp,
            num_states,
            num_actions,
            num_resources,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_resources(&self) -> usize {
        self.num_resources
    }

    pub fn input_width(&self) -> usize {
        self.num_states + self.num_resources
    }

    pub fn output_width(&self) -> usize {
        self.num_states * self.num_actions + self.num_resources
    }

    pub fn mlp(&self) -> &Mlp<T> {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp<T> {
        &mut self.mlp
    }

    /// Deterministic forward pass: `(x̄, b̄) -> (U, p̃ mean)`.
    pub fn forward(&self, input: &[T]) -> (PolicyOutput<T>, PolicyCache<T>) {
        debug_assert_eq!(input.len(), self.input_width());
        let cache = self.mlp.forward(input);
        let sa = self.num_states * self.num_actions;
        let eps = T::of(PRIORITY_EPS);
        let priorities: Vec<T> = cache.output[..sa]
            .iter()
            .map(|&z| eps + (T::one() - eps) * sigmoid(z))
            .collect();
        let margin = T::of(PROPORTION_MARGIN);
        let resource_use: Vec<T> = cache.output[sa..]
            .iter()
            .map(|&z| {
                ((sigmoid(z) - margin) / (T::one() - margin - margin))
                    .max(T::zero())
                    .min(T::one())
            })
            .collect();
        (
            PolicyOutput {
                priorities,
                resource_use,
            },
            PolicyCache { cache },
        )
    }

    /// Backpropagate gradients expressed w.r.t. the squashed heads
    /// (`d_priorities`, `d_resource_means`) into the flat parameter gradient.
    pub fn backward(
        &self,
        cache: &PolicyCache<T>,
        d_priorities: &[T],
        d_resource_means: &[T],
        grad: &mut [T],
    ) {
        let sa = self.num_states * self.num_actions;
        let eps = T::of(PRIORITY_EPS);
        let margin = T::of(PROPORTION_MARGIN);
        let mut dout = vec![T::zero(); self.output_width()];
        for j in 0..sa {
            let s = sigmoid(cache.cache.output[j]);
            dout[j] = d_priorities[j] * (T::one() - eps) * s * (T::one() - s);
        }
        for k in 0..self.num_resources {
            let z = cache.cache.output[sa + k];
            let s = sigmoid(z);
            let raw = (s - margin) / (T::one() - margin - margin);
            // Clamp kills the gradient at the boundary.
            let slope = if raw > T::zero() && raw < T::one() {
                s * (T::one() - s) / (T::one() - margin - margin)
            } else {
                T::zero()
            };
            dout[sa + k] = d_resource_means[k] * slope;
        }
        self.mlp.backward(&cache.cache, &dout, grad);
    }
}

/// Scalar state-value network over the same `(x̄, b̄)` input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticNet<T> {
    mlp: Mlp<T>,
}

impl<T: Scalar> CriticNet<T> {
    pub fn new<R: Rng>(input_width: usize, rng: &mut R) -> Self {
        Self {
            mlp: Mlp::orthogonal_init(vec![input_width, HIDDEN, HIDDEN, 1], rng),
        }
    }

    pub fn mlp(&self) -> &Mlp<T> {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp<T> {
        &mut self.mlp
    }

    pub fn value(&self, input: &[T]) -> T {
        self.mlp.forward(input).output[0]
    }

    pub fn value_with_cache(&self, input: &[T]) -> (T, Cache<T>) {
        let cache = self.mlp.forward(input);
        (cache.output[0], cache)
    }

    pub fn backward(&self, cache: &Cache<T>, dvalue: T, grad: &mut [T]) {
        self.mlp.backward(cache, &[dvalue], grad);
    }
}

/// Adam with the usual defaults; the learning rate arrives per step so actor
/// and critic can share the implementation.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
    beta1: T,
    beta2: T,
    eps: T,
}

impl<T: Scalar> Adam<T> {
    pub fn new(num_params: usize) -> Self {
        Self {
            m: vec![T::zero(); num_params],
            v: vec![T::zero(); num_params],
            t: 0,
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
        }
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T], lr: T) {
        self.t += 1;
        let b1 = self.beta1;
        let b2 = self.beta2;
        let bias1 = T::one() - b1.powi(self.t);
        let bias2 = T::one() - b2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * grad[i];
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn policy_widths_match_the_architecture() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net: PolicyNet<f64> = PolicyNet::new(3, 2, 1, &mut rng);
        assert_eq!(net.input_width(), 4);
        assert_eq!(net.output_width(), 7);
        let (out, _) = net.forward(&[0.4, 0.3, 0.3, 1.0]);
        assert_eq!(out.priorities.len(), 6);
        assert_eq!(out.resource_use.len(), 1);
        for &u in &out.priorities {
            assert!(u > 0.0 && u <= 1.0);
        }
        for &p in &out.resource_use {
            assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn zeroed_network_emits_constant_heads() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net: PolicyNet<f64> = PolicyNet::new(3, 2, 1, &mut rng);
        let zero = vec![0.0; net.mlp().params().len()];
        net.mlp_mut().set_params(zero);
        let (a, _) = net.forward(&[1.0, 0.0, 0.0, 0.2]);
        let (b, _) = net.forward(&[0.0, 0.5, 0.5, 0.9]);
        assert_eq!(a, b);
        for &u in &a.priorities {
            assert!((u - (PRIORITY_EPS + (1.0 - PRIORITY_EPS) * 0.5)).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net: PolicyNet<f64> = PolicyNet::new(3, 2, 1, &mut rng);
        let input = [0.25, 0.5, 0.25, 0.7];
        let (a, _) = net.forward(&input);
        let (b, _) = net.forward(&input);
        assert_eq!(a, b);
    }

    #[test]
    fn hidden_layers_are_orthogonal_with_gain() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mlp: Mlp<f64> = Mlp::orthogonal_init(vec![4, 64, 64, 7], &mut rng);
        // Second hidden layer is 64x64: rows should be orthogonal with norm √2.
        let (w_off, _, rows, cols) = mlp.layer_offsets(1);
        for i in 0..rows {
            for j in 0..=i {
                let dot: f64 = (0..cols)
                    .map(|c| {
                        mlp.params()[w_off + i * cols + c] * mlp.params()[w_off + j * cols + c]
                    })
                    .sum();
                if i == j {
                    assert!((dot - 2.0).abs() < 1e-9, "row norm² {dot}");
                } else {
                    assert!(dot.abs() < 1e-9, "rows {i},{j} dot {dot}");
                }
            }
        }
    }

    #[test]
    fn mlp_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mlp: Mlp<f64> = Mlp::orthogonal_init(vec![3, 8, 8, 2], &mut rng);
        let input = [0.3, -0.2, 0.9];
        // Scalar loss: weighted sum of the two outputs.
        let loss = |m: &Mlp<f64>| {
            let out = m.forward(&input).output;
            1.3 * out[0] - 0.7 * out[1]
        };
        let cache = mlp.forward(&input);
        let mut grad = vec![0.0; mlp.params().len()];
        mlp.backward(&cache, &[1.3, -0.7], &mut grad);
        let mut probe = mlp.clone();
        for idx in (0..grad.len()).step_by(7) {
            let h = 1e-6;
            let orig = probe.params()[idx];
            probe.params_mut()[idx] = orig + h;
            let up = loss(&probe);
            probe.params_mut()[idx] = orig - h;
            let down = loss(&probe);
            probe.params_mut()[idx] = orig;
            let fd = (up - down) / (2.0 * h);
            let scale = fd.abs().max(grad[idx].abs()).max(1e-8);
            assert!(
                ((fd - grad[idx]) / scale).abs() < 1e-5,
                "param {idx}: fd {fd} vs {}",
                grad[idx]
            );
        }
    }

    #[test]
    fn adam_descends_a_quadratic() {
        let mut params = vec![5.0f64, -3.0];
        let mut adam = Adam::new(2);
        for _ in 0..2000 {
            let grad: Vec<f64> = params.iter().map(|&p| 2.0 * p).collect();
            adam.step(&mut params, &grad, 0.05);
        }
        assert!(params.iter().all(|p| p.abs() < 1e-3), "{params:?}");
    }
}
