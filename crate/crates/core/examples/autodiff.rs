//! Reverse-mode differentiation through one LSTM step, followed by a few
//! RMSprop updates that drive the hidden state toward a target.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gazekex::numeric::{lstm_step, LstmParams, ParamSet, RmsProp, RmsPropConfig, Tape, Tensor};

fn main() -> gazekex::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut params = ParamSet::new();
    let cell = LstmParams::init(&mut params, "cell", 3, 2, &mut rng);
    let mut opt = RmsProp::new(RmsPropConfig { learning_rate: 0.05, ..RmsPropConfig::default() }, &params);
    let target = Tensor::vector(vec![0.5, -0.5]);

    for step in 0..=40 {
        let mut tape = Tape::new();
        let x = tape.input(Tensor::vector(vec![1.0, 0.0, -1.0]));
        let h0 = tape.input(Tensor::zeros(&[2]));
        let c0 = tape.input(Tensor::zeros(&[2]));
        let (h, _) = lstm_step(&mut tape, &params, &cell, x, h0, c0)?;
        let t = tape.input(target.clone());
        let loss = tape.squared_distance(h, t)?;
        if step % 10 == 0 {
            println!("step {step:>2}: loss {:.6}, h {:?}", tape.value(loss).item(), tape.value(h).data());
        }
        let grads = tape.backward(loss, &params)?;
        opt.step(&mut params, &grads)?;
    }
    Ok(())
}
