use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::numerics::RngStream;

/// One affine layer, `y = x W + b` with `W` stored `(fan_in, fan_out)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Layer {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self { w: Array2::zeros((fan_in, fan_out)), b: Array1::zeros(fan_out) }
    }

    pub fn fan_in(&self) -> usize {
        self.w.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.w.ncols()
    }
}

/// Fully connected network with rectifier hidden layers and a linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Gradients, shaped like the network's parameters.
pub type Gradients = Vec<Layer>;

impl Mlp {
    /// Zero weights and biases.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        Ok(Self { layers: dims.windows(2).map(|d| Layer::zeros(d[0], d[1])).collect() })
    }

    /// Uniform `±sqrt(6 / (fan_in + fan_out))` weights, zero biases.
    pub fn xavier(dims: &[usize], rng: &mut RngStream) -> Result<Self> {
        let mut net = Self::zeros(dims)?;
        for layer in &mut net.layers {
            let bound = (6.0 / (layer.fan_in() + layer.fan_out()) as f64).sqrt();
            layer.w.mapv_inplace(|_| rng.uniform_range(-bound, bound));
        }
        Ok(net)
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::Shape(format!(
                    "layer output {} feeds layer input {}",
                    pair[0].fan_out(),
                    pair[1].fan_in()
                )));
            }
        }
        if layers.iter().any(|l| l.b.len() != l.fan_out()) {
            return Err(Error::Shape("bias length differs from layer width".into()));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// `[D_in, hidden..., S]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].fan_in()];
        d.extend(self.layers.iter().map(Layer::fan_out));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Q-values of one state.
    pub fn forward(&self, state: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "state has {} entries, network expects {}",
                state.len(),
                self.input_dim()
            )));
        }
        let mut a = Array1::from(state.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            a = a.dot(&layer.w) + &layer.b;
            if i < last {
                a.mapv_inplace(relu);
            }
        }
        Ok(a.to_vec())
    }

    /// Q-values of a batch, one state per row.
    pub fn forward_batch(&self, states: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.activations(states)?.pop().expect("at least one layer"))
    }

    /// Output of every layer (post-rectifier for hidden ones), input first.
    fn activations(&self, states: ArrayView2<'_, f64>) -> Result<Vec<Array2<f64>>> {
        if states.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "batch has {} columns, network expects {}",
                states.ncols(),
                self.input_dim()
            )));
        }
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(states.to_owned());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = acts[i].dot(&layer.w) + &layer.b;
            if i < last {
                z.mapv_inplace(relu);
            }
            acts.push(z);
        }
        Ok(acts)
    }

    /// Squared TD loss `1/(2B) sum (target - q(s, a))^2` and its gradient.
    /// Only the taken action's output contributes.
    pub fn loss_and_grads(
        &self,
        states: ArrayView2<'_, f64>,
        actions: &[usize],
        targets: &[f64],
    ) -> Result<(f64, Gradients)> {
        let batch = states.nrows();
        if batch == 0 || actions.len() != batch || targets.len() != batch {
            return Err(Error::Shape(format!(
                "batch of {batch} states with {} actions and {} targets",
                actions.len(),
                targets.len()
            )));
        }
        if let Some(&a) = actions.iter().find(|&&a| a >= self.output_dim()) {
            return Err(Error::Index { index: a, size: self.output_dim() });
        }
        let acts = self.activations(states)?;
        let q = &acts[acts.len() - 1];
        let mut delta = Array2::<f64>::zeros(q.raw_dim());
        let mut loss = 0.0;
        for (i, (&a, &y)) in actions.iter().zip(targets).enumerate() {
            let diff = q[[i, a]] - y;
            loss += diff * diff;
            delta[[i, a]] = diff / batch as f64;
        }
        loss /= 2.0 * batch as f64;

        let mut grads: Gradients = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let gw = acts[l].t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut prev = delta.dot(&self.layers[l].w.t());
                prev.zip_mut_with(&acts[l], |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = prev;
            }
            grads.push(Layer { w: gw, b: gb });
        }
        grads.reverse();
        Ok((loss, grads))
    }

    /// Parameters flattened layer by layer, each as row-major `W` then `b`.
    pub fn flat_params(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    /// Mutable access to one parameter in [`Mlp::flat_params`] order.
    pub fn param_mut(&mut self, mut index: usize) -> Option<&mut f64> {
        for layer in &mut self.layers {
            let nw = layer.w.len();
            if index < nw {
                return layer.w.as_slice_mut().map(|w| &mut w[index]);
            }
            index -= nw;
            if index < layer.b.len() {
                return Some(&mut layer.b[index]);
            }
            index -= layer.b.len();
        }
        None
    }

    /// Copies all parameters from `other` (same architecture).
    pub fn copy_from(&mut self, other: &Mlp) {
        debug_assert_eq!(self.dims(), other.dims());
        for (dst, src) in self.layers.iter_mut().zip(&other.layers) {
            dst.w.assign(&src.w);
            dst.b.assign(&src.b);
        }
    }
}

/// Flattens parameters or gradients in [`Mlp::flat_params`] order.
pub fn flatten(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend(l.w.iter());
        out.extend(l.b.iter());
    }
    out
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::Shape(format!("need at least input and output widths, got {dims:?}")));
    }
    if dims.contains(&0) {
        return Err(Error::Shape(format!("zero-width layer in {dims:?}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_batch(rng: &mut RngStream, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.uniform_range(-1.0, 1.0))
    }

    /// Scalar-loop forward pass.
    fn naive_forward(net: &Mlp, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let n = net.layers().len();
        for (li, layer) in net.layers().iter().enumerate() {
            let mut out = vec![0.0; layer.fan_out()];
            for (j, o) in out.iter_mut().enumerate() {
                let mut acc = layer.b[j];
                for (i, ai) in a.iter().enumerate() {
                    acc += ai * layer.w[[i, j]];
                }
                *o = if li + 1 < n { acc.max(0.0) } else { acc };
            }
            a = out;
        }
        a
    }

    fn loss_only(net: &Mlp, s: ArrayView2<'_, f64>, a: &[usize], y: &[f64]) -> f64 {
        let q = net.forward_batch(s).unwrap();
        a.iter().zip(y).enumerate().map(|(i, (&a, &y))| (q[[i, a]] - y).powi(2)).sum::<f64>() / (2.0 * a.len() as f64)
    }

    #[test]
    fn zero_net_outputs_zero() {
        let net = Mlp::zeros(&[5, 7, 3]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 4.0, 5.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn identity_layer_applies_rectifier() {
        let mut eye = Layer::zeros(3, 3);
        eye.w.diag_mut().fill(1.0);
        let net = Mlp::from_layers(vec![eye.clone(), eye]).unwrap();
        assert_eq!(net.forward(&[1.5, -2.0, 0.25]).unwrap(), vec![1.5, 0.0, 0.25]);
    }

    #[test]
    fn forward_matches_scalar_loops() {
        let mut rng = RngStream::new(1, "mlp");
        let net = Mlp::xavier(&[13, 32, 32, 16], &mut rng).unwrap();
        let batch = random_batch(&mut rng, 20, 13);
        let q = net.forward_batch(batch.view()).unwrap();
        for (i, row) in batch.outer_iter().enumerate() {
            let x = row.to_vec();
            let naive = naive_forward(&net, &x);
            let single = net.forward(&x).unwrap();
            for j in 0..16 {
                assert!((q[[i, j]] - naive[j]).abs() <= 1e-10);
                assert!((single[j] - naive[j]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn xavier_bounds_and_zero_bias() {
        let mut rng = RngStream::new(2, "mlp");
        let net = Mlp::xavier(&[83, 256, 256, 128], &mut rng).unwrap();
        assert_eq!(net.num_params(), 83 * 256 + 256 + 256 * 256 + 256 + 256 * 128 + 128);
        for l in net.layers() {
            let bound = (6.0 / (l.fan_in() + l.fan_out()) as f64).sqrt();
            assert!(l.w.iter().all(|w| w.abs() <= bound));
            assert!(l.b.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn shape_errors() {
        let net = Mlp::zeros(&[4, 2]).unwrap();
        assert!(matches!(net.forward(&[1.0; 3]), Err(Error::Shape(_))));
        assert!(Mlp::zeros(&[4]).is_err());
        assert!(Mlp::zeros(&[4, 0, 2]).is_err());
        let s = Array2::zeros((2, 4));
        assert!(matches!(net.loss_and_grads(s.view(), &[0, 2], &[0.0, 0.0]), Err(Error::Index { .. })));
        assert!(net.loss_and_grads(s.view(), &[0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn perfect_prediction_has_zero_loss() {
        let mut rng = RngStream::new(3, "mlp");
        let net = Mlp::xavier(&[6, 8, 4], &mut rng).unwrap();
        let s = random_batch(&mut rng, 5, 6);
        let q = net.forward_batch(s.view()).unwrap();
        let actions = [0, 1, 2, 3, 1];
        let y: Vec<f64> = actions.iter().enumerate().map(|(i, &a)| q[[i, a]]).collect();
        let (loss, grads) = net.loss_and_grads(s.view(), &actions, &y).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.iter().all(|g| g.w.iter().chain(g.b.iter()).all(|&x| x == 0.0)));
    }

    #[test]
    fn linear_one_parameter_closed_form() {
        // q = w x + b with one input, one output: loss = (w x + b - y)^2 / 2.
        let layer = Layer { w: Array2::from_elem((1, 1), 0.5), b: Array1::from(vec![0.25]) };
        let net = Mlp::from_layers(vec![layer]).unwrap();
        let s = Array2::from_elem((1, 1), 2.0);
        let (loss, g) = net.loss_and_grads(s.view(), &[0], &[3.0]).unwrap();
        let r = 0.5 * 2.0 + 0.25 - 3.0;
        assert!((loss - r * r / 2.0).abs() < 1e-15);
        assert!((g[0].w[[0, 0]] - r * 2.0).abs() < 1e-15);
        assert!((g[0].b[0] - r).abs() < 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = RngStream::new(4, "mlp");
        let net = Mlp::xavier(&[13, 32, 32, 16], &mut rng).unwrap();
        let s = random_batch(&mut rng, 8, 13);
        let actions: Vec<usize> = (0..8).map(|_| rng.below(16)).collect();
        let y: Vec<f64> = (0..8).map(|_| rng.uniform_range(-2.0, 2.0)).collect();
        let (_, grads) = net.loss_and_grads(s.view(), &actions, &y).unwrap();
        let h = 1e-5;
        let mut probe = net.clone();
        for (i, &analytic) in flatten(&grads).iter().enumerate() {
            let orig = *probe.param_mut(i).unwrap();
            *probe.param_mut(i).unwrap() = orig + h;
            let up = loss_only(&probe, s.view(), &actions, &y);
            *probe.param_mut(i).unwrap() = orig - h;
            let down = loss_only(&probe, s.view(), &actions, &y);
            *probe.param_mut(i).unwrap() = orig;
            let numeric = (up - down) / (2.0 * h);
            let scale = analytic.abs().max(numeric.abs());
            assert!((analytic - numeric).abs() <= 1e-4 * scale || scale < 1e-9, "param {i}: {analytic} vs {numeric}");
        }
        assert!(probe.param_mut(net.num_params()).is_none());
    }

    #[test]
    fn small_step_decreases_loss() {
        let mut rng = RngStream::new(5, "mlp");
        let net = Mlp::xavier(&[10, 16, 16, 6], &mut rng).unwrap();
        let s = random_batch(&mut rng, 32, 10);
        let actions: Vec<usize> = (0..32).map(|_| rng.below(6)).collect();
        let y: Vec<f64> = (0..32).map(|_| rng.uniform_range(0.0, 3.0)).collect();
        let (loss, grads) = net.loss_and_grads(s.view(), &actions, &y).unwrap();
        let mut stepped = net.clone();
        for (p, g) in stepped.layers_mut().iter_mut().zip(&grads) {
            p.w.scaled_add(-1e-6, &g.w);
            p.b.scaled_add(-1e-6, &g.b);
        }
        assert!(loss_only(&stepped, s.view(), &actions, &y) < loss);
    }
}
