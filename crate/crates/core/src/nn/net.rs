//! Feed-forward networks with hand-written reverse-mode gradients.
//!
//! Parameters live in one flat buffer in layer order (each layer's weight
//! matrix `W` with shape `[out, in]` in row-major order, followed by its bias
//! `b`). The same order is used by the optimizer, soft target updates and the
//! checkpoint format, so all three operate on plain slices.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output `y`.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Parse {
                what: "activation",
                message: format!("unknown activation `{other}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    widths: Vec<usize>,
    activations: Vec<Activation>,
    params: Vec<f64>,
}

/// Per-layer outputs recorded by [`DenseNet::forward_cached`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Tensor,
    outputs: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn input(&self) -> &Tensor {
        &self.input
    }
}

#[derive(Debug, Clone)]
pub struct Gradients {
    /// Same layout as [`DenseNet::params`].
    pub params: Vec<f64>,
    /// Gradient with respect to the network input; same shape as the input.
    pub input: Tensor,
}

impl DenseNet {
    /// Builds a network with uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`
    /// initialization for weights and biases.
    pub fn new<R: Rng + ?Sized>(
        widths: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeroed(widths, activations)?;
        let mut offset = 0;
        for w in widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let n = fan_in * fan_out + fan_out;
            for p in &mut net.params[offset..offset + n] {
                *p = rng.random_range(-bound..=bound);
            }
            offset += n;
        }
        Ok(net)
    }

    /// Tanh hidden layers and an identity output layer.
    pub fn mlp<R: Rng + ?Sized>(
        input: usize,
        hidden: &[usize],
        output: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input);
        widths.extend_from_slice(hidden);
        widths.push(output);
        let mut acts = vec![Activation::Tanh; hidden.len()];
        acts.push(Activation::Identity);
        Self::new(&widths, &acts, rng)
    }

    pub fn zeroed(widths: &[usize], activations: &[Activation]) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::shape("DenseNet", "at least 2 widths", widths.len()));
        }
        if activations.len() != widths.len() - 1 {
            return Err(Error::shape(
                "DenseNet activations",
                widths.len() - 1,
                activations.len(),
            ));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::Precondition("layer widths must be > 0".into()));
        }
        let n = widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self {
            widths: widths.to_vec(),
            activations: activations.to_vec(),
            params: vec![0.0; n],
        })
    }

    /// Replaces all parameters; `params` must have [`Self::num_params`] entries.
    pub fn with_params(mut self, params: Vec<f64>) -> Result<Self> {
        if params.len() != self.params.len() {
            return Err(Error::shape("DenseNet::with_params", self.params.len(), params.len()));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("DenseNet::with_params"));
        }
        self.params = params;
        Ok(self)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Cheap fingerprint of the weights, used to check that ensemble members
    /// start from different initializations.
    pub fn checksum(&self) -> u64 {
        self.params
            .iter()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, p| {
                (h ^ p.to_bits()).wrapping_mul(0x0100_0000_01b3)
            })
    }

    fn layer_offsets(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.widths.windows(2).scan(0usize, |off, w| {
            let start = *off;
            *off += w[0] * w[1] + w[1];
            Some((start, w[0], w[1]))
        })
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.cols() != self.input_width() || x.shape().len() > 2 {
            return Err(Error::shape(
                "DenseNet input",
                format!("[n, {}]", self.input_width()),
                format!("{:?}", x.shape()),
            ));
        }
        Ok(())
    }

    fn output_shape(&self, x: &Tensor) -> Vec<usize> {
        if x.shape().len() == 1 {
            vec![self.output_width()]
        } else {
            vec![x.rows(), self.output_width()]
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let n = x.rows();
        let mut current: Vec<f64> = Vec::new();
        for (li, (off, fan_in, fan_out)) in self.layer_offsets().enumerate() {
            let input = if li == 0 { x.data() } else { &current };
            let out = self.affine(off, fan_in, fan_out, n, input, self.activations[li]);
            current = out;
        }
        if current.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("DenseNet::forward"));
        }
        Ok(Tensor::from_parts(self.output_shape(x), current))
    }

    pub fn forward_cached(&self, x: &Tensor) -> Result<(Tensor, ForwardCache)> {
        self.check_input(x)?;
        let n = x.rows();
        let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(self.activations.len());
        for (li, (off, fan_in, fan_out)) in self.layer_offsets().enumerate() {
            let input = if li == 0 { x.data() } else { &outputs[li - 1] };
            let out = self.affine(off, fan_in, fan_out, n, input, self.activations[li]);
            outputs.push(out);
        }
        let last = outputs.last().unwrap().clone();
        if last.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("DenseNet::forward"));
        }
        let y = Tensor::from_parts(self.output_shape(x), last);
        Ok((
            y,
            ForwardCache {
                input: x.clone(),
                outputs,
            },
        ))
    }

    fn affine(
        &self,
        off: usize,
        fan_in: usize,
        fan_out: usize,
        n: usize,
        input: &[f64],
        act: Activation,
    ) -> Vec<f64> {
        let w = &self.params[off..off + fan_in * fan_out];
        let b = &self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
        let mut out = Vec::with_capacity(n * fan_out);
        for _ in 0..n {
            out.extend_from_slice(b);
        }
        // out[n, fan_out] += input[n, fan_in] * W^T
        unsafe {
            matrixmultiply::dgemm(
                n,
                fan_in,
                fan_out,
                1.0,
                input.as_ptr(),
                fan_in as isize,
                1,
                w.as_ptr(),
                1,
                fan_in as isize,
                1.0,
                out.as_mut_ptr(),
                fan_out as isize,
                1,
            );
        }
        if act != Activation::Identity {
            for v in &mut out {
                *v = act.apply(*v);
            }
        }
        out
    }

    /// Backpropagates `upstream` (d loss / d output) through a recorded pass.
    pub fn backward_cached(&self, cache: &ForwardCache, upstream: &Tensor) -> Result<Gradients> {
        let n = cache.input.rows();
        if upstream.cols() != self.output_width() || upstream.rows() != n {
            return Err(Error::shape(
                "DenseNet upstream",
                format!("[{n}, {}]", self.output_width()),
                format!("{:?}", upstream.shape()),
            ));
        }
        let layers: Vec<_> = self.layer_offsets().collect();
        let mut grads = vec![0.0; self.params.len()];
        let mut delta: Vec<f64> = upstream.data().to_vec();
        for li in (0..layers.len()).rev() {
            let (off, fan_in, fan_out) = layers[li];
            let act = self.activations[li];
            if act != Activation::Identity {
                for (d, y) in delta.iter_mut().zip(&cache.outputs[li]) {
                    *d *= act.derivative_from_output(*y);
                }
            }
            let input: &[f64] = if li == 0 {
                cache.input.data()
            } else {
                &cache.outputs[li - 1]
            };
            let (gw, gb) = grads[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
            // dW[fan_out, fan_in] = delta^T[fan_out, n] * input[n, fan_in]
            unsafe {
                matrixmultiply::dgemm(
                    fan_out,
                    n,
                    fan_in,
                    1.0,
                    delta.as_ptr(),
                    1,
                    fan_out as isize,
                    input.as_ptr(),
                    fan_in as isize,
                    1,
                    0.0,
                    gw.as_mut_ptr(),
                    fan_in as isize,
                    1,
                );
            }
            for row in delta.chunks_exact(fan_out) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            // d input[n, fan_in] = delta[n, fan_out] * W[fan_out, fan_in]
            let w = &self.params[off..off + fan_in * fan_out];
            let mut next = vec![0.0; n * fan_in];
            unsafe {
                matrixmultiply::dgemm(
                    n,
                    fan_out,
                    fan_in,
                    1.0,
                    delta.as_ptr(),
                    fan_out as isize,
                    1,
                    w.as_ptr(),
                    fan_in as isize,
                    1,
                    0.0,
                    next.as_mut_ptr(),
                    fan_in as isize,
                    1,
                );
            }
            delta = next;
        }
        if grads.iter().chain(delta.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("DenseNet::backward"));
        }
        Ok(Gradients {
            params: grads,
            input: Tensor::from_parts(cache.input.shape().to_vec(), delta),
        })
    }

    /// Forward pass followed by backpropagation of `upstream`.
    pub fn backward(&self, x: &Tensor, upstream: &Tensor) -> Result<Gradients> {
        let (_, cache) = self.forward_cached(x)?;
        self.backward_cached(&cache, upstream)
    }

    /// `self <- tau * online + (1 - tau) * self`, elementwise.
    pub fn soft_update_from(&mut self, online: &DenseNet, tau: f64) -> Result<()> {
        if online.widths != self.widths {
            return Err(Error::shape(
                "soft_update",
                format!("{:?}", self.widths),
                format!("{:?}", online.widths),
            ));
        }
        for (t, o) in self.params.iter_mut().zip(&online.params) {
            *t = tau * o + (1.0 - tau) * *t;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_layer_passes_input_through() {
        let net = DenseNet::zeroed(&[2, 2], &[Activation::Identity])
            .unwrap()
            .with_params(vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0])
            .unwrap();
        let y = net.forward(&Tensor::vector(vec![1.0, 2.0]).unwrap()).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0]);
        assert_eq!(y.shape(), &[2]);
    }

    #[test]
    fn tanh_of_zero_weights_is_zero() {
        let net = DenseNet::zeroed(&[1, 1], &[Activation::Tanh]).unwrap();
        let y = net.forward(&Tensor::vector(vec![5.0]).unwrap()).unwrap();
        assert_eq!(y.data(), &[0.0]);
    }

    #[test]
    fn two_layer_matches_manual_chain() {
        // W1 = [[0.5, -1.0], [0.25, 2.0]], b1 = [0.1, -0.2]; tanh
        // W2 = [[1.5, -0.5]], b2 = [0.3]; identity
        let params = vec![0.5, -1.0, 0.25, 2.0, 0.1, -0.2, 1.5, -0.5, 0.3];
        let net = DenseNet::zeroed(&[2, 2, 1], &[Activation::Tanh, Activation::Identity])
            .unwrap()
            .with_params(params)
            .unwrap();
        let x = [0.7, -0.3];
        let h0 = (0.5 * x[0] - 1.0 * x[1] + 0.1f64).tanh();
        let h1 = (0.25 * x[0] + 2.0 * x[1] - 0.2f64).tanh();
        let expected = 1.5 * h0 - 0.5 * h1 + 0.3;
        let y = net.forward(&Tensor::vector(x.to_vec()).unwrap()).unwrap();
        assert!((y.data()[0] - expected).abs() < 1e-15);
        // value from an independent scalar evaluation of the same chain
        assert!((y.data()[0] - 1.530_023_289_755_622).abs() < 1e-12);
    }

    #[test]
    fn linear_input_gradient_is_w_transpose() {
        let w = vec![1.0, 2.0, 3.0, -1.0, 0.5, 4.0];
        let mut params = w.clone();
        params.extend([0.0, 0.0]);
        let net = DenseNet::zeroed(&[3, 2], &[Activation::Identity])
            .unwrap()
            .with_params(params)
            .unwrap();
        let up = Tensor::vector(vec![0.3, -2.0]).unwrap();
        let g = net
            .backward(&Tensor::vector(vec![0.1, 0.2, 0.3]).unwrap(), &up)
            .unwrap();
        for i in 0..3 {
            let expected = w[i] * 0.3 + w[3 + i] * -2.0;
            assert_eq!(g.input.data()[i], expected);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = DenseNet::mlp(4, &[5, 3], 2, &mut rng).unwrap();
        let x = Tensor::matrix(2, 4, vec![0.1, 0.2, -0.3, 0.4, 1.0, -1.0, 0.5, 0.0]).unwrap();
        let g = net.backward(&x, &Tensor::zeros(vec![2, 2])).unwrap();
        assert!(g.params.iter().all(|&v| v == 0.0));
        assert!(g.input.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let net = DenseNet::zeroed(&[3, 1], &[Activation::Identity]).unwrap();
        assert!(matches!(
            net.forward(&Tensor::vector(vec![1.0, 2.0]).unwrap()),
            Err(Error::Shape { .. })
        ));
        let x = Tensor::vector(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            net.backward(&x, &Tensor::vector(vec![1.0, 1.0]).unwrap()),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = DenseNet::mlp(16, &[8], 4, &mut rng).unwrap();
        let first = 16 * 8 + 8;
        assert!(net.params()[..first].iter().all(|p| p.abs() <= 0.25));
        let bound2 = 1.0 / 8f64.sqrt();
        assert!(net.params()[first..].iter().all(|p| p.abs() <= bound2));
    }

    #[test]
    fn soft_update_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let online = DenseNet::mlp(2, &[3], 1, &mut rng).unwrap();
        let mut target = DenseNet::mlp(2, &[3], 1, &mut rng).unwrap();
        let before = target.clone();
        target.soft_update_from(&online, 0.0).unwrap();
        assert_eq!(target, before);
        target.soft_update_from(&online, 1.0).unwrap();
        assert_eq!(target.params(), online.params());
    }
}
