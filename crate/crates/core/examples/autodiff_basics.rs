// Records a small computation on a tape, runs the backward pass and checks
// the gradient against central finite differences.

use ttea::gradcheck::fd_check;
use ttea::{Tape, Tensor};

pub fn run_example() -> ttea::Result<f64> {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::from_rows(&[vec![0.5, -1.0], vec![2.0, 0.25]])?);
    let w = tape.param(Tensor::from_rows(&[vec![1.0], vec![-2.0]])?);
    let xw = tape.matmul(x, w)?;
    let h = tape.tanh(xw);
    let loss = tape.sum(h);
    tape.backward(loss)?;
    println!("loss = {:.6}", tape.value(loss).item());
    println!("dL/dw = {:?}", tape.grad(w).expect("w is trainable").data());

    let err = fd_check(
        |t, v| {
            let xw = t.matmul(v[0], v[1])?;
            let h = t.tanh(xw);
            Ok(t.sum(h))
        },
        &[tape.value(x).clone(), tape.value(w).clone()],
        1e-6,
    )?;
    println!("max relative error vs finite differences: {err:.2e}");
    Ok(err)
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
