//! Fully connected ReLU network with a linear output layer, hand-written
//! backpropagation and Adam.
//!
//! Parameter layout, layer by layer: the weight matrix stored input-major
//! (`w[i * out + o]` connects input `i` to output `o`), then the `out` biases.

use rand::Rng;

use super::distribution::{kl_loss, softmax_in_place};
use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    sizes: Vec<usize>,
    params: Vec<T>,
}

/// Per-layer activations kept for the backward pass.
#[derive(Clone, Debug, Default)]
pub struct Workspace<T> {
    acts: Vec<Vec<T>>,
    delta: Vec<T>,
    delta_prev: Vec<T>,
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Dot product with independent accumulators so the loop vectorizes.
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let (x, y) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for k in 0..8 {
            acc[k] = acc[k] + x[k] * y[k];
        }
    }
    let mut tail = T::zero();
    for k in chunks * 8..a.len() {
        tail = tail + a[k] * b[k];
    }
    acc.iter().copied().sum::<T>() + tail
}

fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

impl<T: Scalar> Mlp<T> {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        Self { sizes: sizes.to_vec(), params: vec![T::zero(); param_count(sizes)] }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        let mut off = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut net.params[off..off + fan_in * fan_out] {
                *p = T::of(rng.gen_range(-limit..limit));
            }
            off += fan_in * fan_out + fan_out;
        }
        net
    }

    pub fn from_params(sizes: &[usize], params: Vec<T>) -> Result<Self> {
        let expected = param_count(sizes);
        if params.len() != expected {
            return Err(Error::ShapeMismatch { expected, got: params.len() });
        }
        Ok(Self { sizes: sizes.to_vec(), params })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn workspace(&self) -> Workspace<T> {
        Workspace {
            acts: self.sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            delta: Vec::new(),
            delta_prev: Vec::new(),
        }
    }

    /// Runs the network; the raw output layer is left in the workspace and returned.
    pub fn forward<'w>(&self, input: &[T], ws: &'w mut Workspace<T>) -> Result<&'w [T]> {
        if input.len() != self.input_dim() {
            return Err(Error::ShapeMismatch { expected: self.input_dim(), got: input.len() });
        }
        if ws.acts.len() != self.sizes.len() {
            *ws = self.workspace();
        }
        ws.acts[0].copy_from_slice(input);
        let layers = self.sizes.len() - 1;
        let mut off = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let (prev, next) = ws.acts.split_at_mut(l + 1);
            let x = &prev[l];
            let z = &mut next[0];
            z.copy_from_slice(b);
            for (i, &xi) in x.iter().enumerate() {
                if xi != T::zero() {
                    axpy(xi, &w[i * n_out..(i + 1) * n_out], z);
                }
            }
            if l + 1 < layers {
                for v in z.iter_mut() {
                    *v = v.max(T::zero());
                }
            }
            off += n_in * n_out + n_out;
        }
        Ok(&ws.acts[layers])
    }

    /// Accumulates into `grads` the parameter gradient of a loss whose
    /// gradient with respect to the output layer is `grad_out`, using the
    /// activations from the latest [`Mlp::forward`] on `ws`.
    pub fn backward(&self, ws: &mut Workspace<T>, grad_out: &[T], grads: &mut [T]) {
        let layers = self.sizes.len() - 1;
        ws.delta.clear();
        ws.delta.extend_from_slice(grad_out);
        let mut off = self.params.len();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            off -= n_in * n_out + n_out;
            let x = &ws.acts[l];
            let (gw, gb) = grads[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for (g, &d) in gb.iter_mut().zip(&ws.delta) {
                *g = *g + d;
            }
            for (i, &xi) in x.iter().enumerate() {
                if xi != T::zero() {
                    axpy(xi, &ws.delta, &mut gw[i * n_out..(i + 1) * n_out]);
                }
            }
            if l > 0 {
                let w = &self.params[off..off + n_in * n_out];
                ws.delta_prev.clear();
                ws.delta_prev.extend((0..n_in).map(|i| {
                    if x[i] > T::zero() {
                        dot(&w[i * n_out..(i + 1) * n_out], &ws.delta)
                    } else {
                        T::zero()
                    }
                }));
                std::mem::swap(&mut ws.delta, &mut ws.delta_prev);
            }
        }
    }

    /// Per-action distributions: the output layer is read as `actions` rows of
    /// `width` logits, each passed through a softmax.
    pub fn forward_distributions(&self, input: &[T], actions: usize, ws: &mut Workspace<T>) -> Result<Vec<T>> {
        let mut out = self.forward(input, ws)?.to_vec();
        if out.len() % actions != 0 {
            return Err(Error::ShapeMismatch { expected: actions, got: out.len() });
        }
        let width = out.len() / actions;
        for row in out.chunks_exact_mut(width) {
            softmax_in_place(row);
        }
        Ok(out)
    }

    /// Mean over `batch` of `KL(target || softmax(row for action))` and its
    /// exact gradient, accumulated into `grads`.
    pub fn kl_loss_and_gradient(
        &self,
        batch: &[(&[T], usize, &[T])],
        actions: usize,
        ws: &mut Workspace<T>,
        grads: &mut [T],
    ) -> Result<T> {
        let scale = T::one() / T::of_usize(batch.len().max(1));
        let mut total = T::zero();
        let mut grad_out = vec![T::zero(); self.output_dim()];
        let width = self.output_dim() / actions;
        for &(input, action, target) in batch {
            if target.len() != width {
                return Err(Error::ShapeMismatch { expected: width, got: target.len() });
            }
            let logits = self.forward(input, ws)?;
            let mut row = logits[action * width..(action + 1) * width].to_vec();
            softmax_in_place(&mut row);
            total = total + kl_loss(&row, target);
            grad_out.fill(T::zero());
            // d KL / d logits = softmax - target (target sums to one)
            for k in 0..width {
                grad_out[action * width + k] = (row[k] - target[k]) * scale;
            }
            self.backward(ws, &grad_out, grads);
        }
        Ok(total * scale)
    }

    /// Mean squared error of the output for `action` against a scalar target.
    pub fn squared_loss_and_gradient(
        &self,
        batch: &[(&[T], usize, T)],
        ws: &mut Workspace<T>,
        grads: &mut [T],
    ) -> Result<T> {
        let scale = T::one() / T::of_usize(batch.len().max(1));
        let mut total = T::zero();
        let mut grad_out = vec![T::zero(); self.output_dim()];
        for &(input, action, target) in batch {
            let out = self.forward(input, ws)?;
            let err = out[action] - target;
            total = total + err * err;
            grad_out.fill(T::zero());
            grad_out[action] = T::of(2.0) * err * scale;
            self.backward(ws, &grad_out, grads);
        }
        Ok(total * scale)
    }

    /// `self <- (1 - tau) * self + tau * source`.
    pub fn soft_update_from(&mut self, source: &Mlp<T>, tau: T) {
        for (t, &s) in self.params.iter_mut().zip(&source.params) {
            *t = (T::one() - tau) * *t + tau * s;
        }
    }
}

/// Adam with the common defaults `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(num_params: usize, lr: T) -> Self {
        Self {
            lr,
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
            m: vec![T::zero(); num_params],
            v: vec![T::zero(); num_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [T], grads: &[T]) {
        self.t += 1;
        let c1 = T::one() - self.beta1.powi(self.t);
        let c2 = T::one() - self.beta2.powi(self.t);
        let step = self.lr * c2.sqrt() / c1;
        for ((p, &g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (T::one() - self.beta1) * g;
            *v = self.beta2 * *v + (T::one() - self.beta2) * g * g;
            *p = *p - step * *m / (v.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn zero_weights_give_uniform_rows() {
        let net = Mlp::<f64>::zeros(&[4, 8, 12]);
        let mut ws = net.workspace();
        let out = net.forward_distributions(&[0.1, 0.2, 0.3, 0.4], 4, &mut ws).unwrap();
        for v in out {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rows_sum_to_one_and_forward_is_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Mlp::<f64>::new(&[4, 16, 16, 4 * 21], &mut rng);
        let mut ws = net.workspace();
        let x = [0.3, 0.7, 0.1, 0.9];
        let a = net.forward_distributions(&x, 4, &mut ws).unwrap();
        let b = net.forward_distributions(&x, 4, &mut ws).unwrap();
        assert_eq!(a, b);
        for row in a.chunks(21) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let net = Mlp::<f64>::zeros(&[4, 3]);
        let mut ws = net.workspace();
        assert!(matches!(net.forward(&[1.0; 5], &mut ws), Err(Error::ShapeMismatch { .. })));
        assert!(Mlp::<f64>::from_params(&[4, 3], vec![0.0; 3]).is_err());
    }

    #[test]
    fn adam_descends_a_quadratic() {
        let mut p = vec![3.0f64, -2.0];
        let mut opt = Adam::new(2, 0.1);
        for _ in 0..500 {
            let g: Vec<f64> = p.iter().map(|x| 2.0 * x).collect();
            opt.step(&mut p, &g);
        }
        assert!(p.iter().all(|x| x.abs() < 1e-2), "{p:?}");
    }
}
