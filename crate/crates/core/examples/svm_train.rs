//! Train a linear SVM, report training accuracy and dump the model.
//!
//! cargo run --release --example svm_train -- data/ionosphere_scale.libsvm [l1|l2] [C]

use mprgp::mprgp::ExpansionStrategy;
use mprgp::svm::{accuracy, predict, read_libsvm, train, Loss, SvmModel};
use mprgp::SolverConfig;

fn main() -> mprgp::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "data/ionosphere_scale.libsvm".into());
    let loss: Loss = args.next().map_or(Ok(Loss::L1), |s| s.parse())?;
    let c: f64 = args.next().map_or(1.0, |s| s.parse().expect("C must be a number"));

    let data = read_libsvm(&path, None)?;
    let config = SolverConfig::default()
        .with_strategy(ExpansionStrategy::projcg())
        .with_rtol(1e-1);
    let (model, report) = train(&data, loss, c, 1.0, &config)?;
    println!(
        "{path}: {loss} loss, C = {c}, {} Hessian mults, converged = {}",
        report.hessian_mults, report.converged
    );
    let support = model.dual.iter().filter(|l| **l > 0.0).count();
    println!("support vectors: {support} of {}", data.sample_count());
    println!("training accuracy: {:.4}", accuracy(&model, &data)?);

    let json = model.to_json()?;
    let back = SvmModel::from_json(&json)?;
    assert_eq!(predict(&back, &data)?, predict(&model, &data)?);
    println!("model JSON: {} bytes, w_hat[0..3] = {:.4?}", json.len(), &back.w_hat[..3]);
    Ok(())
}
