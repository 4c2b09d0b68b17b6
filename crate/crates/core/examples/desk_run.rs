//! Desk-scale end-to-end run: synthesize a corpus, train both
//! representations, and print metrics with timings.
//!
//! ```bash
//! cargo run --release -p runtrace-core --example desk_run -- [traces_per_class]
//! ```

use std::time::Instant;

use runtrace_core::dataset::SequenceMode;
use runtrace_core::metrics::{checksum, evaluate, EvalReport};
use runtrace_core::nn::{save_model_bytes, train, FloatWidth, ModelConfig, TrainOptions};
use runtrace_core::pipeline::prepare;
use runtrace_core::synth::{default_grammars, generate, DEFAULT_LEN_RANGE};

fn main() {
    let per_class: usize = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(300);
    let t0 = Instant::now();
    let (mal, ben) = default_grammars();
    let mut traces = generate(&mal, per_class, DEFAULT_LEN_RANGE, 101).unwrap();
    traces.extend(generate(&ben, per_class, DEFAULT_LEN_RANGE, 202).unwrap());
    let n_instr: usize = traces.iter().map(|t| t.instructions.len()).sum();
    println!(
        "corpus: {} traces, {} instructions ({:.1}s)",
        traces.len(),
        n_instr,
        t0.elapsed().as_secs_f64()
    );

    for mode in [SequenceMode::Bsm, SequenceMode::Ism] {
        let t1 = Instant::now();
        let prepared = prepare(&traces, mode, mode.default_maxlen(), 7, None).unwrap();
        println!(
            "{mode}: vocab {} | train {} / val {} / test {} sequences ({:.1}s)",
            prepared.vocab.size(),
            prepared.split.train.len(),
            prepared.split.validation.len(),
            prepared.split.test.len(),
            t1.elapsed().as_secs_f64()
        );
        let config = ModelConfig::new(mode, prepared.vocab.size(), 42);
        let opts = TrainOptions {
            verbose: true,
            ..TrainOptions::default()
        };
        let t2 = Instant::now();
        let outcome = train(
            &prepared.split.train,
            &prepared.split.validation,
            &config,
            &opts,
        )
        .unwrap();
        let train_secs = t2.elapsed().as_secs_f64();
        let t3 = Instant::now();
        let cm = evaluate(&outcome.params, &config, &prepared.split.test).unwrap();
        let bytes = save_model_bytes(&config, &outcome.params, FloatWidth::F64);
        let report = EvalReport::new(&cm, &config, checksum(&bytes)).unwrap();
        println!(
            "{mode}: {} | train {train_secs:.1}s eval {:.1}s",
            report.human_summary(),
            t3.elapsed().as_secs_f64()
        );
    }
    println!("total {:.1}s", t0.elapsed().as_secs_f64());
}
