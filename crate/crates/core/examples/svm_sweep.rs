//! Strategy sweep on the dual of a linear l1-loss SVM.
//!
//! cargo run --release --example svm_sweep -- data/diabetes_scale.libsvm [C]

use std::sync::Arc;

use mprgp::bench::{emit, run_sweep, Format, ProblemSource, SweepSpec};
use mprgp::svm::{read_libsvm, Loss};

fn main() -> mprgp::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| "data/diabetes_scale.libsvm".into());
    let c: f64 = args.next().map_or(1.0, |s| s.parse().expect("C must be a number"));

    let data = read_libsvm(&path, None)?;
    println!(
        "{path}: {} samples, {} features",
        data.sample_count(),
        data.feature_count()
    );
    let source = ProblemSource::Svm {
        data: Arc::new(data),
        loss: Loss::L1,
        c,
        beta: 1.0,
    };
    let spec = SweepSpec::new(path.clone(), source, 1e-1);
    let outcome = run_sweep(&spec)?;
    println!(
        "norm estimate {:.6e} ({} mults, not counted below)\n",
        outcome.norm.value, outcome.norm.iterations
    );
    print!("{}", emit(&outcome.rows, Format::Markdown)?);
    Ok(())
}
