//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Wall-clock budgets are part of each criterion.

mod common;

use std::fs;
use std::panic;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use threatlstm::cli::{
    cmd_evaluate, cmd_gradcheck, cmd_prepare, cmd_synth, cmd_train, CliError, CommonArgs,
    EvaluateArgs, GradcheckArgs, PrepareArgs, SchemeArg, SynthArgs, TrainArgs,
};
use threatlstm::corpus::{derive_labels, generate_synthetic_corpus, LabelScheme};
use threatlstm::evaluation::{baseline_table, confusion, metrics, Averaging};
use threatlstm::model::{
    init_model, lstm_step, predict, DecisionPolicy, LstmClassifier, LstmParams, LstmState,
    ModelConfig,
};
use threatlstm::numerics::{rng_uniform, Matrix, SeededRng};
use threatlstm::persistence::{load_model, save_model};
use threatlstm::textprep::{build_vocabulary, text_tokens, EncodedSequence, PAD_ID};
use threatlstm::training::{encode_examples, train_encoded, TrainConfig};

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "gradient correctness",
            budget: Duration::from_secs(10),
            run: gradient_correctness,
        },
        Criterion {
            id: 2,
            name: "LSTM cell scalar oracle",
            budget: Duration::from_secs(1),
            run: cell_oracle,
        },
        Criterion {
            id: 3,
            name: "gate/state invariants",
            budget: Duration::from_secs(5),
            run: gate_invariants,
        },
        Criterion {
            id: 4,
            name: "overfit capacity",
            budget: Duration::from_secs(60),
            run: overfit_capacity,
        },
        Criterion {
            id: 5,
            name: "full-configuration smoke run",
            budget: Duration::from_secs(300),
            run: smoke_run,
        },
        Criterion {
            id: 6,
            name: "metrics oracle",
            budget: Duration::from_secs(60),
            run: metrics_oracle,
        },
        Criterion {
            id: 7,
            name: "baseline fidelity",
            budget: Duration::from_secs(1),
            run: baseline_fidelity,
        },
        Criterion {
            id: 8,
            name: "determinism",
            budget: Duration::from_secs(120),
            run: determinism,
        },
        Criterion {
            id: 9,
            name: "archive round-trip",
            budget: Duration::from_secs(60),
            run: round_trip,
        },
        Criterion {
            id: 10,
            name: "padding invariance",
            budget: Duration::from_secs(60),
            run: padding_invariance,
        },
    ];

    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = panic::catch_unwind(c.run).unwrap_or_else(|payload| {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let result = result.and_then(|detail| {
            if elapsed <= c.budget {
                Ok(detail)
            } else {
                Err(format!("{detail}; over the {:?} budget", c.budget))
            }
        });
        match result {
            Ok(detail) => println!(
                "PASS criterion {:>2} {}: {detail} [{elapsed:.2?}]",
                c.id, c.name
            ),
            Err(detail) => {
                failed += 1;
                println!(
                    "FAIL criterion {:>2} {}: {detail} [{elapsed:.2?}]",
                    c.id, c.name
                );
            }
        }
    }
    println!(
        "{} of {} acceptance criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn tiny_gradcheck_args(seed: u64, corrupt: Option<&str>) -> GradcheckArgs {
    GradcheckArgs {
        common: CommonArgs {
            seed: Some(seed),
            ..CommonArgs::default()
        },
        vocab_size: Some(10),
        embed_dim: Some(2),
        hidden_dim: Some(3),
        max_len: Some(4),
        classes: Some(2),
        epsilon: Some(1e-5),
        corrupt: corrupt.map(str::to_string),
    }
}

fn gradient_correctness() -> Outcome {
    let mut sink = Vec::new();
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let report = cmd_gradcheck(&tiny_gradcheck_args(seed, None), &mut sink).map_err(err)?;
        ensure(report.per_tensor.len() == 11, || {
            "not every tensor was checked".into()
        })?;
        worst = worst.max(report.max_relative_error);
    }
    ensure(worst <= 1e-4, || format!("max relative error {worst:.3e}"))?;

    let mutated = match cmd_gradcheck(&tiny_gradcheck_args(0, Some("W_C")), &mut sink) {
        Err(CliError::GradCheckFailed {
            max_relative_error, ..
        }) => max_relative_error,
        Ok(r) => {
            return Err(format!(
                "doubled W_C gradient passed with error {:.3e}",
                r.max_relative_error
            ))
        }
        Err(e) => return Err(e.to_string()),
    };

    // cross-check against an independently written forward pass
    let config = ModelConfig {
        vocab_size: 10,
        embed_dim: 2,
        hidden_dim: 3,
        num_classes: 2,
        max_len: 4,
        seed: 99,
    };
    let model: LstmClassifier<f64> = init_model(&config).map_err(err)?;
    let seq = EncodedSequence {
        ids: vec![3, 9, 1, 4],
        valid_len: 4,
    };
    let independent = common::independent_gradient_error(&model, &seq, 1, 1e-5);
    ensure(independent <= 1e-4, || {
        format!("scalar-oracle gradient error {independent:.3e}")
    })?;
    Ok(format!(
        "max rel err {worst:.2e} over 5 seeds, scalar oracle {independent:.2e}, W_C x2 flagged at {mutated:.2e}"
    ))
}

fn random_params(rng: &mut SeededRng, hidden: usize, embed: usize, scale: f64) -> LstmParams<f64> {
    let mut w = || rng_uniform::<f64>(rng, -scale, scale, hidden, hidden + embed).unwrap();
    let (w_i, w_f, w_o, w_c) = (w(), w(), w(), w());
    let mut b = || rng_uniform::<f64>(rng, -scale, scale, hidden, 1).unwrap();
    let (b_i, b_f, b_o, b_c) = (b(), b(), b(), b());
    LstmParams {
        w_i,
        w_f,
        w_o,
        w_c,
        b_i,
        b_f,
        b_o,
        b_c,
    }
}

fn cell_oracle() -> Outcome {
    let mut rng = SeededRng::new(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let hidden = 1 + rng.next_below(8) as usize;
        let embed = 1 + rng.next_below(8) as usize;
        let scale = 0.1 + 1.9 * rng.next_f64();
        let params = random_params(&mut rng, hidden, embed, scale);
        let x = rng_uniform::<f64>(&mut rng, -1.0, 1.0, embed, 1).unwrap();
        let prev = LstmState {
            h: rng_uniform::<f64>(&mut rng, -1.0, 1.0, hidden, 1).unwrap(),
            c: rng_uniform::<f64>(&mut rng, -3.0, 3.0, hidden, 1).unwrap(),
        };
        let (state, cache) = lstm_step(&params, &x, &prev).map_err(err)?;
        let s = common::scalar_step(&params, x.values(), prev.h.values(), prev.c.values());
        for (lib, oracle) in [
            (cache.i.values(), &s.i),
            (cache.f.values(), &s.f),
            (cache.o.values(), &s.o),
            (cache.c_tilde.values(), &s.c_tilde),
            (state.c.values(), &s.c),
            (state.h.values(), &s.h),
        ] {
            worst = worst.max(common::max_abs_diff(lib, oracle));
        }
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:.3e}"))?;
    Ok(format!("100 instances, max deviation {worst:.2e}"))
}

fn gate_invariants() -> Outcome {
    let mut rng = SeededRng::new(77);
    let open = |v: &Matrix<f64>, lo: f64, hi: f64| v.values().iter().all(|&x| lo < x && x < hi);
    let mut steps = 0;
    for case in 0..500 {
        let hidden = 1 + rng.next_below(10) as usize;
        let embed = 1 + rng.next_below(10) as usize;
        let scale = 0.01 + 0.99 * rng.next_f64();
        let params = random_params(&mut rng, hidden, embed, scale);
        let mut state = LstmState::zeros(hidden);
        for _ in 0..10 {
            let x = rng_uniform::<f64>(&mut rng, -1.0, 1.0, embed, 1).unwrap();
            let (next, cache) = lstm_step(&params, &x, &state).map_err(err)?;
            ensure(
                open(&cache.i, 0.0, 1.0) && open(&cache.f, 0.0, 1.0) && open(&cache.o, 0.0, 1.0),
                || format!("case {case}: gate outside (0, 1)"),
            )?;
            ensure(open(&cache.c_tilde, -1.0, 1.0), || {
                format!("case {case}: candidate outside (-1, 1)")
            })?;
            ensure(open(&next.h, -1.0, 1.0), || {
                format!("case {case}: h outside (-1, 1)")
            })?;
            state = next;
            steps += 1;
        }
    }

    // memory carousel: forget gate pinned open, input gate pinned shut
    let (hidden, embed) = (8, 5);
    let mut params = random_params(&mut rng, hidden, embed, 0.5);
    params.w_i = Matrix::zeros(hidden, hidden + embed);
    params.w_f = Matrix::zeros(hidden, hidden + embed);
    params.b_i = Matrix::filled(hidden, 1, -25.0);
    params.b_f = Matrix::filled(hidden, 1, 25.0);
    let c0 = rng_uniform::<f64>(&mut rng, -1.0, 1.0, hidden, 1).unwrap();
    let mut state = LstmState {
        h: Matrix::zeros(hidden, 1),
        c: c0.clone(),
    };
    let mut drift: f64 = 0.0;
    for _ in 0..250 {
        let x = rng_uniform::<f64>(&mut rng, -1.0, 1.0, embed, 1).unwrap();
        state = lstm_step(&params, &x, &state).map_err(err)?.0;
        drift = drift.max(common::max_abs_diff(state.c.values(), c0.values()));
    }
    ensure(drift <= 1e-6, || format!("carousel drift {drift:.3e}"))?;
    Ok(format!(
        "{steps} random steps within bounds, carousel drift {drift:.2e} over 250 steps"
    ))
}

struct Pipeline {
    prepared: PathBuf,
    trained: PathBuf,
}

fn common_args(seed: u64, out: &Path) -> CommonArgs {
    CommonArgs {
        seed: Some(seed),
        out: Some(out.to_path_buf()),
        ..CommonArgs::default()
    }
}

fn synth_and_prepare(
    root: &Path,
    seed: u64,
    n: usize,
    max_len: Option<usize>,
) -> Result<PathBuf, String> {
    let corpus = cmd_synth(&SynthArgs {
        common: common_args(seed, &root.join("synth")),
        n: Some(n),
        format: None,
    })
    .map_err(err)?;
    let prepared = root.join("prepared");
    cmd_prepare(&PrepareArgs {
        common: common_args(seed, &prepared),
        corpus,
        scheme: Some(SchemeArg::Binary),
        ratio: None,
        max_vocab: None,
        min_freq: None,
        max_len,
    })
    .map_err(err)?;
    Ok(prepared)
}

fn train_args(data: &Path, out: &Path, seed: u64) -> TrainArgs {
    TrainArgs {
        common: common_args(seed, out),
        data: data.to_path_buf(),
        epochs: None,
        batch_size: None,
        lr: None,
        clip_norm: None,
        embed_dim: None,
        hidden_dim: None,
        patience: None,
    }
}

fn overfit_capacity() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let prepared = synth_and_prepare(dir.path(), 7, 32, None)?;
    let args = TrainArgs {
        epochs: Some(200),
        ..train_args(&prepared, &dir.path().join("model"), 7)
    };
    let history = cmd_train(&args).map_err(err)?;
    let last = history.last().ok_or("empty history")?;
    let first_perfect = history
        .iter()
        .find(|r| r.train_accuracy >= 0.99)
        .map(|r| r.epoch);
    ensure(last.train_accuracy >= 0.99, || {
        format!(
            "train accuracy {:.3} after {} epochs",
            last.train_accuracy, last.epoch
        )
    })?;
    Ok(format!(
        "train accuracy {:.3} after {} epochs (first reached 0.99 at epoch {})",
        last.train_accuracy,
        last.epoch,
        first_perfect.unwrap_or(0)
    ))
}

fn smoke_run() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let prepared = synth_and_prepare(dir.path(), 11, 500, Some(250))?;
    let out = dir.path().join("model");
    let args = TrainArgs {
        epochs: Some(12),
        ..train_args(&prepared, &out, 11)
    };
    let history = cmd_train(&args).map_err(err)?;
    let csv = fs::read_to_string(out.join("history.csv")).map_err(err)?;
    let rows = csv.lines().count() - 1;
    ensure(rows == 12, || format!("history has {rows} rows"))?;
    let val = history.last().ok_or("empty history")?.val_accuracy;
    let chance = 0.5;
    ensure(val - chance >= 0.15, || {
        format!("validation accuracy {val:.3} vs chance {chance}")
    })?;
    Ok(format!(
        "12-row history, validation accuracy {val:.3} (chance {chance})"
    ))
}

fn metrics_oracle() -> Outcome {
    let mut rng = SeededRng::new(6);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = 1 + rng.next_below(300) as usize;
        let bias_p = rng.next_f64();
        let bias_l = rng.next_f64();
        let preds: Vec<usize> = (0..n)
            .map(|_| usize::from(rng.next_f64() < bias_p))
            .collect();
        let labels: Vec<usize> = (0..n)
            .map(|_| usize::from(rng.next_f64() < bias_l))
            .collect();
        let m = metrics(
            &confusion(&preds, &labels, 2).map_err(err)?,
            Averaging::PositiveClass,
        )
        .map_err(err)?;

        let (mut tp, mut fp, mut fnn, mut tn) = (0.0, 0.0, 0.0, 0.0);
        for (&p, &l) in preds.iter().zip(&labels) {
            match (p, l) {
                (1, 1) => tp += 1.0,
                (1, 0) => fp += 1.0,
                (0, 1) => fnn += 1.0,
                _ => tn += 1.0,
            }
        }
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fnn > 0.0 { tp / (tp + fnn) } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let accuracy = (tp + tn) / n as f64;
        for (a, b) in [
            (m.accuracy, accuracy),
            (m.precision, precision),
            (m.recall, recall),
            (m.f1, f1),
        ] {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:.3e}"))?;

    let mut preds = vec![1; 9];
    let mut labels = vec![1; 9];
    preds.push(1);
    labels.push(0);
    preds.push(0);
    labels.push(1);
    preds.extend([0; 9]);
    labels.extend([0; 9]);
    let m = metrics(
        &confusion(&preds, &labels, 2).map_err(err)?,
        Averaging::PositiveClass,
    )
    .map_err(err)?;
    ensure(
        m.accuracy == 0.9 && m.precision == 0.9 && m.recall == 0.9 && m.f1 == 0.9,
        || format!("9/1/1/9 gave {m:?}"),
    )?;
    Ok(format!(
        "1000 random sets, max deviation {worst:.2e}; 9/1/1/9 exact"
    ))
}

fn baseline_fidelity() -> Outcome {
    type Row = (
        &'static str,
        &'static str,
        Option<f64>,
        Option<f64>,
        Option<f64>,
        Option<f64>,
    );
    let expected: [Row; 7] = [
        (
            "My Model",
            "LSTM",
            Some(0.94),
            Some(0.90),
            Some(0.91),
            Some(0.91),
        ),
        (
            "My Model",
            "Random Forest (RFC)",
            Some(0.80),
            Some(0.95),
            Some(0.95),
            Some(0.75),
        ),
        ("Dong et al.", "SVM", Some(0.81), Some(0.90), None, None),
        (
            "Azene et al.",
            "Naive Bayes",
            Some(0.65),
            None,
            None,
            Some(0.85),
        ),
        (
            "Azene et al.",
            "Random Tree",
            Some(0.84),
            None,
            None,
            Some(0.71),
        ),
        (
            "Azene et al.",
            "Random Forest",
            Some(0.97),
            None,
            None,
            Some(0.91),
        ),
        (
            "Arora et al.",
            "Random Forest(RFC)",
            Some(0.80),
            Some(0.81),
            Some(0.80),
            Some(0.79),
        ),
    ];
    let table = baseline_table();
    ensure(table.len() == expected.len(), || {
        format!("{} rows", table.len())
    })?;
    for (row, exp) in table.iter().zip(expected) {
        let got = (
            row.source,
            row.algorithm,
            row.accuracy,
            row.precision,
            row.recall,
            row.f1_or_roc,
        );
        ensure(got == exp, || format!("row {got:?} != {exp:?}"))?;
    }
    Ok("7 rows match, absent cells preserved".into())
}

fn run_pipeline(root: &Path) -> Result<Pipeline, String> {
    let prepared = synth_and_prepare(root, 3, 80, Some(60))?;
    let trained = root.join("model");
    cmd_train(&TrainArgs {
        epochs: Some(3),
        embed_dim: Some(16),
        hidden_dim: Some(16),
        batch_size: Some(8),
        ..train_args(&prepared, &trained, 3)
    })
    .map_err(err)?;
    cmd_evaluate(&EvaluateArgs {
        common: CommonArgs {
            out: Some(root.join("eval")),
            ..CommonArgs::default()
        },
        model: trained.join("model.json"),
        vocab: None,
        data: prepared.join("val.jsonl"),
    })
    .map_err(err)?;
    Ok(Pipeline { prepared, trained })
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(err)?;
    let b = tempfile::tempdir().map_err(err)?;
    let pa = run_pipeline(a.path())?;
    let pb = run_pipeline(b.path())?;
    let files = [
        (
            pa.prepared.join("vocab.json"),
            pb.prepared.join("vocab.json"),
        ),
        (
            pa.prepared.join("train.jsonl"),
            pb.prepared.join("train.jsonl"),
        ),
        (
            pa.trained.join("history.csv"),
            pb.trained.join("history.csv"),
        ),
        (pa.trained.join("model.json"), pb.trained.join("model.json")),
        (
            a.path().join("eval/metrics.json"),
            b.path().join("eval/metrics.json"),
        ),
    ];
    for (x, y) in &files {
        let bx = fs::read(x).map_err(err)?;
        let by = fs::read(y).map_err(err)?;
        ensure(!bx.is_empty() && bx == by, || {
            format!("{} differs between runs", x.display())
        })?;
    }
    Ok(format!(
        "{} artifacts byte-identical across two runs",
        files.len()
    ))
}

fn random_text(rng: &mut SeededRng, words: &[String]) -> String {
    const EXTRA: [&str; 6] = [
        "zzqx",
        "10.1.2.3",
        "CVE-2021-44228",
        "Selling",
        "!!!",
        "http://abc.onion/x",
    ];
    let n = 1 + rng.next_below(40) as usize;
    let mut out: Vec<String> = (0..n)
        .map(|_| {
            if rng.next_below(5) == 0 {
                rng.choose(&EXTRA).to_string()
            } else {
                rng.choose(words).clone()
            }
        })
        .collect();
    out.push("word".into());
    out.join(" ")
}

fn round_trip() -> Outcome {
    let posts = generate_synthetic_corpus(21, 60);
    let examples = derive_labels(&posts, LabelScheme::Binary);
    let vocab =
        build_vocabulary(examples.iter().map(|e| text_tokens(&e.text)), 20_000, 1).map_err(err)?;
    let config = ModelConfig {
        embed_dim: 12,
        hidden_dim: 10,
        max_len: 80,
        ..ModelConfig::new(vocab.len(), 2, 21)
    };
    let (encoded, _) = encode_examples(&examples, &vocab, config.max_len).map_err(err)?;
    let (model, _) = train_encoded(
        init_model::<f64>(&config).map_err(err)?,
        &encoded[..48],
        &encoded[48..],
        &TrainConfig {
            epochs: 2,
            batch_size: 8,
            seed: 21,
            ..TrainConfig::default()
        },
    )
    .map_err(err)?;

    let dir = tempfile::tempdir().map_err(err)?;
    let path = dir.path().join("model.json");
    save_model(&model, &vocab, &path).map_err(err)?;
    let loaded: LstmClassifier<f64> = load_model(&path, &vocab).map_err(err)?;

    let words: Vec<String> = vocab.learned_tokens().to_vec();
    let mut rng = SeededRng::new(909);
    for i in 0..100 {
        let text = random_text(&mut rng, &words);
        let before = predict(&model, &vocab, &text, DecisionPolicy::Argmax).map_err(err)?;
        let after = predict(&loaded, &vocab, &text, DecisionPolicy::Argmax).map_err(err)?;
        ensure(before == after, || {
            format!("text {i} `{text}` predicted differently after reload")
        })?;
    }
    Ok("100 texts, identical classes and probabilities after reload".into())
}

fn padding_invariance() -> Outcome {
    let config = ModelConfig::new(50, 2, 5);
    let model: LstmClassifier<f64> = init_model(&config).map_err(err)?;
    let mut rng = SeededRng::new(10);
    for case in 0..50 {
        let valid = 1 + rng.next_below(120) as usize;
        let ids: Vec<u32> = (0..valid).map(|_| 1 + rng.next_below(49) as u32).collect();
        let tight = EncodedSequence {
            ids: ids.clone(),
            valid_len: valid,
        };
        let base = model.probabilities(&tight).map_err(err)?;
        for extra in [1, 7, config.max_len - valid] {
            let mut padded = ids.clone();
            padded.resize(valid + extra, PAD_ID);
            let seq = EncodedSequence {
                ids: padded,
                valid_len: valid,
            };
            let probs = model.probabilities(&seq).map_err(err)?;
            ensure(probs == base, || {
                format!("case {case}: {extra} pads changed {base:?} to {probs:?}")
            })?;
        }
    }
    Ok("50 sequences, probabilities unchanged by 1, 7 and fill-to-250 padding".into())
}
