//! Central finite-difference verification of tape gradients.

use crate::autodiff::{OpKind, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn eval_scalar<F>(forward: &F, inputs: &[Tensor]) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
    let out = forward(&mut tape, &vars)?;
    let v = tape.value(out);
    if v.len() != 1 {
        return Err(Error::Autodiff(format!("fd_check needs a scalar output, got {:?}", v.shape())));
    }
    Ok(v.item())
}

/// Largest componentwise `|g_ad − g_fd| / max(1, |g_fd|)` over all inputs.
pub fn fd_check<F>(forward: F, inputs: &[Tensor], eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    fd_check_with_fault(forward, inputs, eps, None)
}

/// As [`fd_check`], with the backward rule of `fault` sign-flipped.
pub fn fd_check_with_fault<F>(
    forward: F,
    inputs: &[Tensor],
    eps: f64,
    fault: Option<OpKind>,
) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    if eps <= 0.0 {
        return Err(Error::Config(format!("fd_check eps must be positive, got {eps}")));
    }
    let mut tape = Tape::new();
    if let Some(kind) = fault {
        tape.inject_sign_flip(kind);
    }
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = forward(&mut tape, &vars)?;
    tape.backward(out)?;

    let mut worst = 0.0f64;
    let mut probe: Vec<Tensor> = inputs.to_vec();
    for (k, var) in vars.iter().enumerate() {
        let analytic = tape
            .grad(*var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(inputs[k].shape()));
        for c in 0..inputs[k].len() {
            let orig = inputs[k].data()[c];
            probe[k].data_mut()[c] = orig + eps;
            let plus = eval_scalar(&forward, &probe)?;
            probe[k].data_mut()[c] = orig - eps;
            let minus = eval_scalar(&forward, &probe)?;
            probe[k].data_mut()[c] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let err = (analytic.data()[c] - numeric).abs() / numeric.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_is_exact() {
        let w = Tensor::vector(vec![0.5, -1.5, 2.0]);
        let x = Tensor::vector(vec![1.0, 2.0, 3.0]);
        let err = fd_check(
            |t, v| {
                let p = t.mul(v[0], v[1])?;
                Ok(t.sum(p))
            },
            &[x, w],
            1e-5,
        )
        .unwrap();
        // bilinear, central differences are exact up to rounding
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn constant_function_has_zero_error() {
        let x = Tensor::vector(vec![1.0, 2.0]);
        let err = fd_check(
            |t, _| Ok(t.constant(Tensor::scalar(4.0))),
            &[x],
            1e-5,
        )
        .unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn sign_flip_is_detected() {
        let x = Tensor::vector(vec![0.3, -0.7, 1.1]);
        let f = |t: &mut Tape, v: &[Var]| {
            let y = t.tanh(v[0]);
            Ok(t.sum(y))
        };
        assert!(fd_check(f, std::slice::from_ref(&x), 1e-5).unwrap() < 1e-8);
        assert!(fd_check_with_fault(f, &[x], 1e-5, Some(OpKind::Tanh)).unwrap() > 0.1);
    }
}
