//! Trains the orientation network on synthetic data and prints per-step progress.
//!
//! `cargo run --release -p orientbot-core --example train_synthetic -- [samples] [steps] [lr] [batch]`

use std::time::Instant;

use orientbot_core::data::{generate_synthetic, StyleParams};
use orientbot_core::nnet::{build_paper_model, train, TrainConfig};
use orientbot_core::parallel::Exec;

fn main() -> orientbot_core::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: &str| args.get(i).cloned().unwrap_or_else(|| d.to_string());
    let n: usize = arg(0, "8000").parse().expect("samples");
    let steps: usize = arg(1, "30").parse().expect("steps");
    let lr: f64 = arg(2, "0.01").parse().expect("learning rate");
    let batch: usize = arg(3, "32").parse().expect("batch size");

    let t0 = Instant::now();
    let ds = generate_synthetic(n, 1, &StyleParams::default(), Exec::Parallel)?;
    let (train_set, val_set) = ds.split(0.2, 2)?;
    println!("generated {n} samples in {:.1}s", t0.elapsed().as_secs_f64());

    let mut model = build_paper_model(3);
    let cfg = TrainConfig { learning_rate: lr, minibatch_size: batch, steps, seed: 10, ..Default::default() };
    let t = Instant::now();
    let report = train(&mut model, &train_set.samples, &cfg, &val_set.samples)?;
    for s in &report.steps {
        println!("step {:>2}: loss {:.4} val {:.4}", s.step, s.mean_loss, s.val_accuracy.unwrap_or(f64::NAN));
    }
    println!("trained in {:.1}s", t.elapsed().as_secs_f64());
    Ok(())
}
