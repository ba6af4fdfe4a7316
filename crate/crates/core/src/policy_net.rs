//! Deterministic feed-forward policy networks.
//!
//! Parameters are stored flat, layer by layer. Within a layer the weight
//! matrix comes first in row-major order (one row per output unit), followed
//! by the bias vector. Directions sampled in [`crate::genome`] index into
//! this layout, so it must never change.

use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::{self, Stream};

/// Hidden-layer nonlinearity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
}

/// How the final layer is mapped to actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutputLayer {
    /// `bound[k] * tanh(z[k])`, keeping every action inside `[-bound, bound]`.
    Tanh { bounds: Vec<f64> },
    /// Identity output. Only used for analysis and tests; actions are unbounded.
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkShape {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    #[serde(default)]
    pub activation: Activation,
    pub output: OutputLayer,
}

impl NetworkShape {
    /// A tanh MLP whose outputs are squashed to `[-bound, bound]` per dimension.
    pub fn mlp(input_dim: usize, hidden_dims: &[usize], bounds: Vec<f64>) -> Self {
        NetworkShape {
            input_dim,
            hidden_dims: hidden_dims.to_vec(),
            output_dim: bounds.len(),
            activation: Activation::Tanh,
            output: OutputLayer::Tanh { bounds },
        }
    }

    /// A tanh MLP with an identity output layer.
    pub fn linear_output(input_dim: usize, hidden_dims: &[usize], output_dim: usize) -> Self {
        NetworkShape {
            input_dim,
            hidden_dims: hidden_dims.to_vec(),
            output_dim,
            activation: Activation::Tanh,
            output: OutputLayer::Linear,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::Config("network dimensions must be positive".into()));
        }
        if self.hidden_dims.iter().any(|&h| h == 0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        if let OutputLayer::Tanh { bounds } = &self.output {
            check_dim("output bounds", self.output_dim, bounds.len())?;
            if bounds.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
                return Err(Error::Config("output bounds must be finite and positive".into()));
            }
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` for each layer, input to output.
    pub fn layers(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let dims = std::iter::once(self.input_dim)
            .chain(self.hidden_dims.iter().copied())
            .chain(std::iter::once(self.output_dim));
        let outs = self.hidden_dims.iter().copied().chain(std::iter::once(self.output_dim));
        dims.zip(outs)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().map(|(i, o)| i * o + o).sum()
    }

    fn widest(&self) -> usize {
        self.hidden_dims
            .iter()
            .copied()
            .chain([self.input_dim, self.output_dim])
            .max()
            .unwrap_or(1)
    }
}

/// Flat parameter vector of a policy network; the state of the
/// policy-optimization MDP.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector {
    values: Vec<f64>,
    shape: Arc<NetworkShape>,
}

impl ParameterVector {
    pub fn new(shape: Arc<NetworkShape>, values: Vec<f64>) -> Result<Self> {
        check_dim("parameter vector", shape.parameter_count(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("parameter vector contains non-finite entries"));
        }
        Ok(ParameterVector { values, shape })
    }

    pub fn zeros(shape: Arc<NetworkShape>) -> Self {
        let n = shape.parameter_count();
        ParameterVector {
            values: vec![0.0; n],
            shape,
        }
    }

    /// Per-layer scaled normal weights (std `1/sqrt(fan_in)`), zero biases.
    pub fn init_from_seed(shape: Arc<NetworkShape>, seed: u64) -> Self {
        let mut rng = rng::stream(seed, Stream::Init);
        let mut values = Vec::with_capacity(shape.parameter_count());
        for (fan_in, fan_out) in shape.layers() {
            let std = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                let z: f64 = StandardNormal.sample(&mut rng);
                values.push(std * z);
            }
            values.extend(std::iter::repeat(0.0).take(fan_out));
        }
        ParameterVector { values, shape }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> &Arc<NetworkShape> {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `self + scale * direction`.
    pub fn offset(&self, direction: &[f64], scale: f64) -> Result<Self> {
        check_dim("direction", self.values.len(), direction.len())?;
        let values = self.values.iter().zip(direction).map(|(p, d)| p + scale * d).collect();
        Ok(ParameterVector {
            values,
            shape: Arc::clone(&self.shape),
        })
    }

    pub fn forward(&self, observation: &[f64]) -> Result<Vec<f64>> {
        let mut scratch = Scratch::new(&self.shape);
        let mut out = vec![0.0; self.shape.output_dim];
        self.forward_into(observation, &mut scratch, &mut out)?;
        Ok(out)
    }

    /// Allocation-free forward pass into `out`.
    pub fn forward_into(&self, observation: &[f64], scratch: &mut Scratch, out: &mut [f64]) -> Result<()> {
        check_dim("observation", self.shape.input_dim, observation.len())?;
        check_dim("output buffer", self.shape.output_dim, out.len())?;
        scratch.fit(&self.shape);
        let Scratch { act, next, .. } = scratch;
        act.clear();
        act.extend_from_slice(observation);

        let n_layers = self.shape.hidden_dims.len() + 1;
        let mut offset = 0;
        for (layer, (fan_in, fan_out)) in self.shape.layers().enumerate() {
            let weights = &self.values[offset..offset + fan_in * fan_out];
            let bias = &self.values[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;

            next.clear();
            for (row, b) in weights.chunks_exact(fan_in).zip(bias) {
                next.push(dot(row, act) + b);
            }
            if layer + 1 < n_layers {
                next.iter_mut().for_each(|z| *z = z.tanh());
            }
            std::mem::swap(act, next);
        }

        match &self.shape.output {
            OutputLayer::Tanh { bounds } => {
                for ((o, z), b) in out.iter_mut().zip(act.iter()).zip(bounds) {
                    *o = b * z.tanh();
                }
            }
            OutputLayer::Linear => out.copy_from_slice(act),
        }
        Ok(())
    }

    /// Forward-mode directional derivative of the outputs with respect to the
    /// parameters: `(d NN(observation; theta) / d theta) * direction`.
    pub fn jvp_outputs(&self, observation: &[f64], direction: &[f64]) -> Result<Vec<f64>> {
        let mut scratch = Scratch::new(&self.shape);
        let mut out = vec![0.0; self.shape.output_dim];
        self.jvp_into(observation, direction, &mut scratch, &mut out)?;
        Ok(out)
    }

    pub fn jvp_into(
        &self,
        observation: &[f64],
        direction: &[f64],
        scratch: &mut Scratch,
        out: &mut [f64],
    ) -> Result<()> {
        check_dim("observation", self.shape.input_dim, observation.len())?;
        check_dim("direction", self.values.len(), direction.len())?;
        check_dim("output buffer", self.shape.output_dim, out.len())?;
        scratch.fit(&self.shape);
        let Scratch {
            act,
            next,
            tangent,
            next_tangent,
        } = scratch;
        act.clear();
        act.extend_from_slice(observation);
        tangent.clear();
        tangent.resize(observation.len(), 0.0);

        let n_layers = self.shape.hidden_dims.len() + 1;
        let mut offset = 0;
        for (layer, (fan_in, fan_out)) in self.shape.layers().enumerate() {
            let w_end = offset + fan_in * fan_out;
            let weights = &self.values[offset..w_end];
            let bias = &self.values[w_end..w_end + fan_out];
            let d_weights = &direction[offset..w_end];
            let d_bias = &direction[w_end..w_end + fan_out];
            offset = w_end + fan_out;

            next.clear();
            next_tangent.clear();
            for unit in 0..fan_out {
                let row = &weights[unit * fan_in..(unit + 1) * fan_in];
                let d_row = &d_weights[unit * fan_in..(unit + 1) * fan_in];
                next.push(dot(row, act) + bias[unit]);
                next_tangent.push(dot(d_row, act) + dot(row, tangent) + d_bias[unit]);
            }
            if layer + 1 < n_layers {
                for (z, dz) in next.iter_mut().zip(next_tangent.iter_mut()) {
                    let a = z.tanh();
                    *dz *= 1.0 - a * a;
                    *z = a;
                }
            }
            std::mem::swap(act, next);
            std::mem::swap(tangent, next_tangent);
        }

        match &self.shape.output {
            OutputLayer::Tanh { bounds } => {
                for (((o, z), dz), b) in out.iter_mut().zip(act.iter()).zip(tangent.iter()).zip(bounds) {
                    let a = z.tanh();
                    *o = b * (1.0 - a * a) * dz;
                }
            }
            OutputLayer::Linear => out.copy_from_slice(tangent),
        }
        Ok(())
    }
}

/// Reusable buffers for forward and JVP passes.
#[derive(Debug, Default)]
pub struct Scratch {
    act: Vec<f64>,
    next: Vec<f64>,
    tangent: Vec<f64>,
    next_tangent: Vec<f64>,
}

impl Scratch {
    pub fn new(shape: &NetworkShape) -> Self {
        let mut s = Scratch::default();
        s.fit(shape);
        s
    }

    fn fit(&mut self, shape: &NetworkShape) {
        let w = shape.widest();
        for buf in [&mut self.act, &mut self.next, &mut self.tangent, &mut self.next_tangent] {
            if buf.capacity() < w {
                buf.reserve(w - buf.len());
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn shape_2_16_1() -> Arc<NetworkShape> {
        Arc::new(NetworkShape::mlp(2, &[16], vec![1.0]))
    }

    #[test]
    fn parameter_count_matches_formula() {
        assert_eq!(shape_2_16_1().parameter_count(), 2 * 16 + 16 + 16 + 1);
        assert_eq!(
            NetworkShape::mlp(2, &[128, 64, 32], vec![1.0]).parameter_count(),
            10_753
        );
    }

    #[test]
    fn parameter_count_matches_layer_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let input = rng.random_range(1..10);
            let hidden: Vec<usize> = (0..rng.random_range(0..4)).map(|_| rng.random_range(1..20)).collect();
            let output = rng.random_range(1..4);
            let shape = NetworkShape::linear_output(input, &hidden, output);
            let mut dims = vec![input];
            dims.extend(&hidden);
            dims.push(output);
            let mut count = 0;
            for w in dims.windows(2) {
                for _ in 0..w[1] {
                    for _ in 0..w[0] {
                        count += 1;
                    }
                    count += 1;
                }
            }
            assert_eq!(shape.parameter_count(), count);
        }
    }

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let shape = shape_2_16_1();
        let a = ParameterVector::init_from_seed(shape.clone(), 7);
        let b = ParameterVector::init_from_seed(shape.clone(), 7);
        let c = ParameterVector::init_from_seed(shape.clone(), 8);
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), c.values());
        assert_eq!(a.len(), 65);
    }

    #[test]
    fn init_biases_are_zero() {
        let shape = shape_2_16_1();
        let p = ParameterVector::init_from_seed(shape, 11);
        assert!(p.values()[32..48].iter().all(|&b| b == 0.0));
        assert_eq!(p.values()[64], 0.0);
        assert!(p.values()[..32].iter().any(|&w| w != 0.0));
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = ParameterVector::zeros(shape_2_16_1());
        assert_eq!(p.forward(&[0.3, -7.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn single_unit_hand_evaluation() {
        let shape = Arc::new(NetworkShape::mlp(1, &[], vec![1.0]));
        let p = ParameterVector::new(shape, vec![1.0, 0.0]).unwrap();
        let y = p.forward(&[0.5]).unwrap();
        assert!((y[0] - 0.5f64.tanh()).abs() < 1e-15);
        assert!((y[0] - 0.4621).abs() < 1e-4);
    }

    #[test]
    fn outputs_respect_bounds() {
        let shape = Arc::new(NetworkShape::mlp(2, &[8], vec![0.5, 2.0]));
        for seed in 0..20 {
            let p = ParameterVector::init_from_seed(shape.clone(), seed);
            let big = p.offset(&vec![10.0; p.len()], 1.0).unwrap();
            for obs in [[1.2, 0.07], [-1.2, -0.07], [100.0, -100.0]] {
                let y = big.forward(&obs).unwrap();
                assert!(y[0].abs() <= 0.5 && y[1].abs() <= 2.0);
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_dims() {
        let p = ParameterVector::zeros(shape_2_16_1());
        assert!(matches!(p.forward(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(p.jvp_outputs(&[1.0, 2.0], &[0.0; 3]).is_err());
    }

    #[test]
    fn jvp_is_linear() {
        let shape = Arc::new(NetworkShape::mlp(4, &[8], vec![1.0, 1.0]));
        let p = ParameterVector::init_from_seed(shape, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d: Vec<f64> = (0..p.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d2: Vec<f64> = d.iter().map(|x| 2.0 * x).collect();
        let x = [0.1, -0.4, 0.9, 0.0];
        let j1 = p.jvp_outputs(&x, &d).unwrap();
        let j2 = p.jvp_outputs(&x, &d2).unwrap();
        for (a, b) in j1.iter().zip(&j2) {
            assert!((2.0 * a - b).abs() <= 1e-12 * b.abs().max(1e-300));
        }
        let zero = p.jvp_outputs(&x, &vec![0.0; p.len()]).unwrap();
        assert!(zero.iter().all(|&z| z == 0.0));
    }

    #[test]
    fn jvp_matches_central_difference_on_small_net() {
        let shape = Arc::new(NetworkShape::mlp(3, &[5, 4], vec![1.5]));
        let p = ParameterVector::init_from_seed(shape, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let d: Vec<f64> = (0..p.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = [0.3, -0.2, 0.5];
        let h = 1e-5;
        let plus = p.offset(&d, h).unwrap().forward(&x).unwrap();
        let minus = p.offset(&d, -h).unwrap().forward(&x).unwrap();
        let jvp = p.jvp_outputs(&x, &d).unwrap();
        for k in 0..jvp.len() {
            let fd = (plus[k] - minus[k]) / (2.0 * h);
            assert!((fd - jvp[k]).abs() < 1e-6, "{fd} vs {}", jvp[k]);
        }
    }

    #[test]
    fn shape_roundtrips_through_json() {
        let shape = NetworkShape::mlp(2, &[32, 32], vec![1.0]);
        let text = serde_json::to_string(&shape).unwrap();
        let back: NetworkShape = serde_json::from_str(&text).unwrap();
        assert_eq!(shape, back);
    }
}
