//! Build a small expression on a tape, differentiate it, and confirm the
//! result with central differences.
//!
//! ```text
//! cargo run --example autodiff_basics
//! ```

use tagnn::autodiff::Tape;
use tagnn::gradcheck::gradient_check;
use tagnn::Tensor;

fn main() -> tagnn::Result<()> {
    // f(W, x) = Σ sigmoid(W·x)
    let w = Tensor::<f64>::from_rows(&[vec![0.5, -1.0], vec![2.0, 0.25]])?;
    let x = Tensor::<f64>::column(vec![1.0, 3.0]);

    let mut tape = Tape::new();
    let wv = tape.param(&w);
    let xv = tape.input(&x);
    let wx = tape.matmul(wv, xv)?;
    let s = tape.sigmoid(wx)?;
    let f = tape.sum(s)?;
    println!("f = {:.6}", tape.value(f).item());

    let grads = tape.backward(f)?;
    println!(
        "df/dW = {:?}",
        grads.get(wv).expect("W is trainable").data()
    );

    let check = gradient_check(std::slice::from_ref(&w), 1e-5, |tape, vars| {
        let xv = tape.constant(x.clone());
        let wx = tape.matmul(vars[0], xv)?;
        let s = tape.sigmoid(wx)?;
        tape.sum(s)
    })?;
    println!(
        "max relative error vs finite differences: {:.2e} over {} entries",
        check.max_relative_error, check.entries
    );

    // Masked softmax: masked slots are exactly zero.
    let logits = Tensor::<f64>::row(vec![1.0, 2.0, 3.0]);
    let mut tape = Tape::new();
    let l = tape.input(&logits);
    let p = tape.softmax(l, Some(&[true, false, true]))?;
    println!("masked softmax = {:?}", tape.value(p).data());
    Ok(())
}
