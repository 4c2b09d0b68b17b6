//! Acceptance suite: one test per criterion, each printing a PASS line
//! with its measurements. Run with `cargo test --test acceptance` (add
//! `-- --nocapture` to see the lines for passing tests).

use std::time::Instant;

use runtrace_core::block::{classify_terminator, render_bsm, segment, TerminatorClass};
use runtrace_core::dataset::{split, SequenceMode};
use runtrace_core::metrics::{checksum, evaluate, format_percent, ConfusionMatrix, EvalReport};
use runtrace_core::nn::{
    batch_gradients, bce_loss, model_forward, save_model_bytes, train, BatchItem, DropoutMode,
    FloatWidth, ModelConfig, ModelParams, TrainOptions,
};
use runtrace_core::pipeline::prepare;
use runtrace_core::rng::Rng;
use runtrace_core::synth::{default_grammars, generate, DEFAULT_LEN_RANGE};
use runtrace_core::text::{TokenSequence, Vocabulary};
use runtrace_core::trace::{parse_trace, Label, RunTrace};

/// Criterion 1: the reference confusion-matrix counts reproduce their
/// known rates exactly to two decimals, in under a second.
#[test]
fn criterion_1_metric_reproduction() {
    let start = Instant::now();

    let ism = ConfusionMatrix::from_counts(34_810_727, 2_951_034, 5_544_678, 24_691_072);
    assert_eq!(format_percent(ism.tpr().unwrap()), "92.19");
    assert_eq!(format_percent(ism.fpr().unwrap()), "18.34");
    assert_eq!(format_percent(ism.acc().unwrap()), "87.51");
    // four significant digits of the accuracy fraction
    let acc4 = (ism.acc().unwrap() * 10_000.0).round() / 10_000.0;
    assert_eq!(acc4, 0.8751);

    let bsm = ConfusionMatrix::from_counts(8_705_965, 13_816, 70_625, 2_628_383);
    assert_eq!(format_percent(bsm.tpr().unwrap()), "99.84");
    assert_eq!(format_percent(bsm.fpr().unwrap()), "2.62");
    assert_eq!(format_percent(bsm.acc().unwrap()), "99.26");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("criterion 1 (metric reproduction): PASS in {elapsed:?}");
}

const SAMPLE_TRACE: &str =
    "mov edi, eax\nadd esp, 0xC\ntest edi, edi\njne 0x00428817\nmov eax, edi\n";

fn check_segmentation_invariants(trace: &RunTrace) {
    let blocks = segment(trace).unwrap();
    // concatenation reproduces the stream
    let flat: Vec<_> = blocks
        .iter()
        .flat_map(|b| b.instructions.iter().cloned())
        .collect();
    assert_eq!(flat, trace.instructions, "{}", trace.source_id);
    // boundary soundness
    for (bi, block) in blocks.iter().enumerate() {
        assert!(!block.instructions.is_empty());
        for ins in &block.instructions[..block.instructions.len() - 1] {
            assert_eq!(classify_terminator(&ins.opcode), TerminatorClass::None);
        }
        if bi + 1 < blocks.len() {
            assert_ne!(
                classify_terminator(&block.instructions.last().unwrap().opcode),
                TerminatorClass::None
            );
        }
    }
    // count identity
    let terminators = trace
        .instructions
        .iter()
        .filter(|i| classify_terminator(&i.opcode) != TerminatorClass::None)
        .count();
    let trailing =
        classify_terminator(&trace.instructions.last().unwrap().opcode) == TerminatorClass::None;
    assert_eq!(blocks.len(), terminators + usize::from(trailing));
    // rendering is one line per block
    assert_eq!(render_bsm(&blocks).lines().count(), blocks.len());
}

/// Criterion 2: segmentation invariants hold on 1,000 random synthetic
/// traces, and the five-line sample trace splits into exactly two blocks.
#[test]
fn criterion_2_segmentation_oracle() {
    let start = Instant::now();

    let sample = parse_trace(SAMPLE_TRACE, "sample", Label::Benign, 1_000_000).unwrap();
    assert_eq!(segment(&sample).unwrap().len(), 2);

    let (mal, ben) = default_grammars();
    let mut traces = generate(&mal, 500, (20, 200), 71).unwrap();
    traces.extend(generate(&ben, 500, (20, 200), 72).unwrap());
    assert_eq!(traces.len(), 1000);
    for trace in &traces {
        check_segmentation_invariants(trace);
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!("criterion 2 (segmentation oracle): PASS on 1000 traces in {elapsed:?}");
}

/// Criterion 3: analytic gradients match central finite differences
/// (h = 1e-4) with relative error below 1e-4 for every parameter of the
/// toy configuration, dropout active with fixed masks.
#[test]
fn criterion_3_gradient_check() {
    let start = Instant::now();

    let mut config = ModelConfig::new(SequenceMode::Ism, 10, 404);
    config.embed_dim = 4;
    config.hidden = 3;
    config.maxlen = 5;
    // dense_hidden stays at its fixed default 64
    let params = ModelParams::init(&config).unwrap();

    let seqs: [[u32; 5]; 4] = [
        [1, 2, 3, 0, 0],
        [4, 5, 6, 7, 8],
        [9, 9, 2, 1, 0],
        [3, 0, 5, 0, 7],
    ];
    let items: Vec<BatchItem> = seqs
        .iter()
        .enumerate()
        .map(|(i, s)| BatchItem {
            indices: s,
            target: if i % 2 == 0 { [1.0, 0.0] } else { [0.0, 1.0] },
            mask_seed: Some(5000 + i as u64),
        })
        .collect();

    let (_, analytic) = batch_gradients(&params, &config, &items).unwrap();
    let analytic_flat: Vec<f64> = analytic.values().collect();

    let batch_loss = |p: &ModelParams| -> f64 {
        let mut total = 0.0;
        for item in &items {
            let seq = TokenSequence {
                indices: item.indices.to_vec(),
                true_length: item.indices.len(),
            };
            let mode = DropoutMode::Train {
                mask_seed: item.mask_seed.unwrap(),
            };
            let probs = model_forward(&seq, p, &config, mode).unwrap();
            total += bce_loss(&probs, &item.target);
        }
        total / items.len() as f64
    };

    let h = 1e-4;
    let n = params.n_params();
    let mut worst = 0.0f64;
    for (i, &a) in analytic_flat.iter().enumerate() {
        let mut plus = params.clone();
        *plus.values_mut().nth(i).unwrap() += h;
        let mut minus = params.clone();
        *minus.values_mut().nth(i).unwrap() -= h;
        let fd = (batch_loss(&plus) - batch_loss(&minus)) / (2.0 * h);
        let scale = a.abs().max(fd.abs());
        let rel = if scale < 1e-8 {
            0.0
        } else {
            (a - fd).abs() / scale
        };
        worst = worst.max(rel);
        assert!(rel < 1e-4, "param {i}: analytic {a} vs fd {fd} (rel {rel})");
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "criterion 3 (gradient check): PASS, {n} parameters, worst rel err {worst:.2e}, in {elapsed:?}"
    );
}

/// Criterion 4: desk-scale end-to-end training on the default synthetic
/// corpus (2,000 traces per class) with the tuned hyperparameters. BSM
/// must reach held-out accuracy >= 0.95 at FPR <= 0.10, ISM >= 0.85, and
/// BSM must beat ISM on the same corpus. The 15-minute figure is a
/// runtime target, reported but not asserted.
#[test]
fn criterion_4_desk_scale_training() {
    let start = Instant::now();

    let (mal, ben) = default_grammars();
    let mut traces = generate(&mal, 2000, DEFAULT_LEN_RANGE, 101).unwrap();
    traces.extend(generate(&ben, 2000, DEFAULT_LEN_RANGE, 202).unwrap());

    let mut results = Vec::new();
    for mode in [SequenceMode::Bsm, SequenceMode::Ism] {
        let prepared = prepare(&traces, mode, mode.default_maxlen(), 7, None).unwrap();
        let config = ModelConfig::new(mode, prepared.vocab.size(), 42);
        let outcome = train(
            &prepared.split.train,
            &prepared.split.validation,
            &config,
            &TrainOptions::default(),
        )
        .unwrap();
        assert_eq!(outcome.history.len(), 3);
        let cm = evaluate(&outcome.params, &config, &prepared.split.test).unwrap();
        let acc = cm.acc().unwrap();
        let fpr = cm.fpr().unwrap();
        println!(
            "criterion 4: {mode} held-out acc {acc:.4}, fpr {fpr:.4} ({} test sequences)",
            prepared.split.test.len()
        );
        results.push((mode, acc, fpr));
    }

    let (_, bsm_acc, bsm_fpr) = results[0];
    let (_, ism_acc, _) = results[1];
    assert!(bsm_acc >= 0.95, "bsm accuracy {bsm_acc}");
    assert!(bsm_fpr <= 0.10, "bsm fpr {bsm_fpr}");
    assert!(ism_acc >= 0.85, "ism accuracy {ism_acc}");
    assert!(
        bsm_acc > ism_acc,
        "block sequences ({bsm_acc}) must beat instruction sequences ({ism_acc})"
    );

    let elapsed = start.elapsed();
    println!(
        "criterion 4 (desk-scale training): PASS, bsm {bsm_acc:.4} vs ism {ism_acc:.4}, in {elapsed:?} (target 15 min)"
    );
}

/// Criterion 5: two full train+eval runs with the same seed produce
/// bit-identical checkpoints and identical reports.
#[test]
fn criterion_5_determinism() {
    let start = Instant::now();

    let run_once = || {
        let (mal, ben) = default_grammars();
        let mut traces = generate(&mal, 150, (60, 120), 11).unwrap();
        traces.extend(generate(&ben, 150, (60, 120), 12).unwrap());
        let prepared = prepare(&traces, SequenceMode::Bsm, 30, 3, None).unwrap();
        let config = ModelConfig::new(SequenceMode::Bsm, prepared.vocab.size(), 8);
        let outcome = train(
            &prepared.split.train,
            &prepared.split.validation,
            &config,
            &TrainOptions::default(),
        )
        .unwrap();
        let bytes = save_model_bytes(&config, &outcome.params, FloatWidth::F64);
        let cm = evaluate(&outcome.params, &config, &prepared.split.test).unwrap();
        let report = EvalReport::new(&cm, &config, checksum(&bytes)).unwrap();
        (bytes, report.to_json(), outcome.history)
    };

    let (bytes_a, report_a, history_a) = run_once();
    let (bytes_b, report_b, history_b) = run_once();
    assert_eq!(bytes_a, bytes_b, "checkpoints differ between runs");
    assert_eq!(report_a, report_b, "reports differ between runs");
    assert_eq!(history_a, history_b, "histories differ between runs");

    let elapsed = start.elapsed();
    println!(
        "criterion 5 (determinism): PASS, {} byte checkpoint identical twice, in {elapsed:?}",
        bytes_a.len()
    );
}

/// Criterion 6: split proportions satisfy the 60/20/20 rule within one
/// element for N in {5, 100, 10000}, with disjointness and coverage
/// verified by brute force.
#[test]
fn criterion_6_split_proportions() {
    let start = Instant::now();

    for n in [5usize, 100, 10_000] {
        for seed in [0u64, 1, 99] {
            let s = split((0..n).collect::<Vec<_>>(), seed).unwrap();
            let (tr, va, te) = (s.train.len(), s.validation.len(), s.test.len());
            assert_eq!(tr + va + te, n);
            let close = |got: usize, want: f64| (got as f64 - want).abs() <= 1.0;
            assert!(close(te, 0.20 * n as f64), "N={n}: test {te}");
            assert!(close(va, 0.20 * n as f64), "N={n}: validation {va}");
            assert!(close(tr, 0.60 * n as f64), "N={n}: train {tr}");
            // brute-force disjointness and coverage
            let mut seen = vec![0u8; n];
            for &item in s.train.iter().chain(&s.validation).chain(&s.test) {
                seen[item] += 1;
            }
            assert!(seen.iter().all(|&c| c == 1), "N={n} seed={seed}");
        }
    }

    let elapsed = start.elapsed();
    println!("criterion 6 (split proportions): PASS for N in {{5, 100, 10000}} in {elapsed:?}");
}

/// Criterion 7: model and vocabulary round trips are lossless; 100 random
/// forward passes agree bit-exactly before and after save+load.
#[test]
fn criterion_7_serialization() {
    let start = Instant::now();

    let (mal, ben) = default_grammars();
    let mut traces = generate(&mal, 20, (30, 60), 31).unwrap();
    traces.extend(generate(&ben, 20, (30, 60), 32).unwrap());
    let prepared = prepare(&traces, SequenceMode::Bsm, 30, 5, None).unwrap();
    let config = ModelConfig::new(SequenceMode::Bsm, prepared.vocab.size(), 6);
    let outcome = train(
        &prepared.split.train,
        &prepared.split.validation,
        &config,
        &TrainOptions {
            epochs: 1,
            ..TrainOptions::default()
        },
    )
    .unwrap();

    // vocabulary round trip
    let dir = tempfile::tempdir().unwrap();
    let vocab_path = dir.path().join("vocab.tsv");
    prepared.vocab.save(&vocab_path).unwrap();
    let vocab_back = Vocabulary::load(&vocab_path).unwrap();
    assert_eq!(prepared.vocab, vocab_back);

    // model round trip through bytes and through a file
    let bytes = save_model_bytes(&config, &outcome.params, FloatWidth::F64);
    let model_path = dir.path().join("model.rtlm");
    std::fs::write(&model_path, &bytes).unwrap();
    let (config_back, params_back) = runtrace_core::nn::load_model(&model_path).unwrap();
    assert_eq!(config, config_back);
    assert_eq!(outcome.params, params_back);

    // 100 random sequences score bit-identically pre/post round trip
    let mut rng = Rng::seed_from(99);
    for _ in 0..100 {
        let indices: Vec<u32> = (0..config.maxlen)
            .map(|_| rng.next_below(config.vocab_size) as u32)
            .collect();
        let seq = TokenSequence {
            true_length: indices.len(),
            indices,
        };
        let a = model_forward(&seq, &outcome.params, &config, DropoutMode::Infer).unwrap();
        let b = model_forward(&seq, &params_back, &config_back, DropoutMode::Infer).unwrap();
        assert_eq!(a, b);
    }

    let elapsed = start.elapsed();
    println!("criterion 7 (serialization): PASS in {elapsed:?}");
}
