use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates for one parameter list.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &[Tensor]) -> Self {
        AdamState {
            step: 0,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }
}

/// One bias-corrected Adam update applied in place.
///
/// Panics if `params`, `grads` and `state` disagree in length or shape.
pub fn adam_step(params: &mut [Tensor], grads: &[Tensor], state: &mut AdamState, cfg: &AdamConfig) {
    assert_eq!(params.len(), grads.len(), "adam: params/grads length");
    assert_eq!(params.len(), state.m.len(), "adam: params/state length");
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        assert_eq!(p.shape(), g.shape(), "adam: param/grad shape");
        for (((pv, &gv), mv), vv) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut())
            .zip(v.data_mut().iter_mut())
        {
            *mv = cfg.beta1 * *mv + (1.0 - cfg.beta1) * gv;
            *vv = cfg.beta2 * *vv + (1.0 - cfg.beta2) * gv * gv;
            let mhat = *mv / bc1;
            let vhat = *vv / bc2;
            *pv -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let cfg = AdamConfig::default();
        let grads = vec![Tensor::vector(vec![0.0, 0.0])];
        let mut params = vec![Tensor::vector(vec![1.0, -2.0])];
        let mut state = AdamState::new(&params);
        adam_step(&mut params, &grads, &mut state, &cfg);
        assert_eq!(params[0].data(), &[1.0, -2.0]);

        state.m[0] = Tensor::vector(vec![0.5, -0.5]);
        state.v[0] = Tensor::vector(vec![4.0, 4.0]);
        adam_step(&mut params, &grads, &mut state, &cfg);
        assert_eq!(state.m[0].data(), &[0.9 * 0.5, 0.9 * -0.5]);
        assert_eq!(state.v[0].data(), &[0.999 * 4.0, 0.999 * 4.0]);
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let mut params = vec![Tensor::vector(vec![0.0, 0.0, 0.0])];
        let grads = vec![Tensor::vector(vec![2.5, -0.01, 100.0])];
        let mut state = AdamState::new(&params);
        let cfg = AdamConfig { lr: 0.01, ..AdamConfig::default() };
        adam_step(&mut params, &grads, &mut state, &cfg);
        for (p, g) in params[0].data().iter().zip(grads[0].data()) {
            // m̂ = g, v̂ = g², so the step is -lr·g/(|g|+eps)
            let expected = -cfg.lr * g / (g.abs() + cfg.eps);
            assert!((p - expected).abs() < 1e-15);
            assert!((p + cfg.lr * g.signum()).abs() < 1e-8);
        }
    }

    #[test]
    fn converges_on_quadratic() {
        let mut x = vec![Tensor::scalar(0.0)];
        let mut state = AdamState::new(&x);
        let cfg = AdamConfig { lr: 0.1, ..AdamConfig::default() };
        for _ in 0..200 {
            let g = 2.0 * (x[0].item() - 3.0);
            adam_step(&mut x, &[Tensor::scalar(g)], &mut state, &cfg);
        }
        assert!((x[0].item() - 3.0).abs() < 0.1, "{}", x[0].item());
    }
}
