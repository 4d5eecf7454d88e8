use crate::dqn::mlp::{Gradients, Layer, Mlp};

/// Bias-corrected Adam moments for one network.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Layer>,
    v: Vec<Layer>,
}

impl AdamState {
    pub fn new(net: &Mlp) -> Self {
        Self::with_params(net, 0.9, 0.999, 1e-8)
    }

    pub fn with_params(net: &Mlp, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros = || net.layers().iter().map(|l| Layer::zeros(l.fan_in(), l.fan_out())).collect();
        Self { beta1, beta2, eps, step: 0, m: zeros(), v: zeros() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update with learning rate `lr`.
    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients, lr: f64) {
        debug_assert_eq!(grads.len(), net.layers().len());
        self.step += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powf(self.step as f64);
        let c2 = 1.0 - b2.powf(self.step as f64);
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for (((p, g), m), v) in net.layers_mut().iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            ndarray::Zip::from(&mut p.w)
                .and(&g.w)
                .and(&mut m.w)
                .and(&mut v.w)
                .for_each(|p, &g, m, v| update(p, m, v, g));
            ndarray::Zip::from(&mut p.b)
                .and(&g.b)
                .and(&mut m.b)
                .and(&mut v.b)
                .for_each(|p, &g, m, v| update(p, m, v, g));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dqn::mlp::flatten;
    use crate::numerics::RngStream;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut rng = RngStream::new(1, "adam");
        let mut net = Mlp::xavier(&[4, 5, 3], &mut rng).unwrap();
        let before = net.clone();
        let mut adam = AdamState::new(&net);
        let zero: Gradients = net.layers().iter().map(|l| Layer::zeros(l.fan_in(), l.fan_out())).collect();
        for _ in 0..5 {
            adam.step(&mut net, &zero, 1e-3);
        }
        assert_eq!(net, before);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let mut rng = RngStream::new(2, "adam");
        let mut net = Mlp::xavier(&[4, 5, 3], &mut rng).unwrap();
        let before = net.flat_params();
        let grads: Gradients = net
            .layers()
            .iter()
            .map(|l| {
                let mut g = Layer::zeros(l.fan_in(), l.fan_out());
                g.w.mapv_inplace(|_| rng.uniform_range(-3.0, 3.0));
                g.b.mapv_inplace(|_| rng.uniform_range(-3.0, 3.0));
                g
            })
            .collect();
        let lr = 1e-3;
        AdamState::new(&net).step(&mut net, &grads, lr);
        for ((p1, p0), g) in net.flat_params().iter().zip(&before).zip(flatten(&grads)) {
            // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
            let want = p0 - lr * g / (g.abs() + 1e-8);
            assert!((p1 - want).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_scalar_reference_over_steps() {
        let mut rng = RngStream::new(3, "adam");
        let mut net = Mlp::xavier(&[3, 2], &mut rng).unwrap();
        let mut p = net.flat_params();
        let mut m = vec![0.0; p.len()];
        let mut v = vec![0.0; p.len()];
        let mut adam = AdamState::new(&net);
        for t in 1..=10 {
            let grads: Gradients = net
                .layers()
                .iter()
                .map(|l| {
                    let mut g = Layer::zeros(l.fan_in(), l.fan_out());
                    g.w.mapv_inplace(|_| rng.standard_normal());
                    g.b.mapv_inplace(|_| rng.standard_normal());
                    g
                })
                .collect();
            adam.step(&mut net, &grads, 0.01);
            for (i, g) in flatten(&grads).into_iter().enumerate() {
                m[i] = 0.9 * m[i] + 0.1 * g;
                v[i] = 0.999 * v[i] + 0.001 * g * g;
                let mh = m[i] / (1.0 - 0.9f64.powi(t));
                let vh = v[i] / (1.0 - 0.999f64.powi(t));
                p[i] -= 0.01 * mh / (vh.sqrt() + 1e-8);
            }
        }
        for (a, b) in net.flat_params().iter().zip(&p) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(adam.steps(), 10);
    }
}
