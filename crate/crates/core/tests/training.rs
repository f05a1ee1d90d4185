use pdn::data::synth::{NEGATIVE_CUE, POSITIVE_CUE};
use pdn::data::{synth_generate, DistanceProfile, Example, Sentiment, Vocab};
use pdn::exec::Execution;
use pdn::model::{
    DecayKind, DecaySpec, ModelConfig, ModelKind, HEAD_B_Q, HEAD_W_Q, WORD_EMBEDDING,
};
use pdn::numeric::AdamConfig;
use pdn::train::{
    attention_dump, evaluate, init_model, majority_baseline, train, EpochReport, TrainConfig,
    TrainError,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small(kind: ModelKind, vocab: &Vocab) -> TrainConfig {
    TrainConfig {
        model: ModelConfig {
            kind,
            vocab_size: vocab.len(),
            word_dim: 16,
            position_dim: 8,
            hidden_dim: 16,
            pan_position_hidden: 8,
            pan_sequence_hidden: 8,
            attention_hidden: 8,
            penultimate: 16,
            max_len: 30,
            ..ModelConfig::default()
        },
        epochs: 2,
        seed: 3,
        ..TrainConfig::default()
    }
}

fn synth(count: usize, seed: u64) -> Vec<Example> {
    synth_generate(
        count,
        &mut ChaCha8Rng::seed_from_u64(seed),
        &DistanceProfile::default(),
    )
}

fn labelled(label: Sentiment) -> Example {
    Example::new(
        vec!["food".into(), "was".into(), "fine".into()],
        (1, 1),
        label,
    )
    .unwrap()
}

fn with_labels(labels: &[(Sentiment, usize)]) -> Vec<Example> {
    labels
        .iter()
        .flat_map(|&(l, n)| std::iter::repeat_with(move || labelled(l)).take(n))
        .collect()
}

#[test]
fn zero_learning_rate_leaves_parameters_untouched() {
    let data = synth(40, 1);
    let vocab = Vocab::build(&data);
    let config = TrainConfig {
        adam: AdamConfig {
            lr: 0.0,
            ..AdamConfig::default()
        },
        ..small(ModelKind::Pdn, &vocab)
    };
    let before = init_model(&config).unwrap();
    let out = train(&data, None, &vocab, &config, None, |_| {}).unwrap();
    assert_eq!(out.model.params, before.params);
}

#[test]
fn a_single_example_is_memorised() {
    let data = vec![synth(1, 2)[0].clone()];
    let vocab = Vocab::build(&data);
    let config = TrainConfig {
        epochs: 30,
        ..small(ModelKind::Pdn, &vocab)
    };
    let out = train(&data, Some(&data), &vocab, &config, None, |_| {}).unwrap();
    assert!(out.reports[29].loss < out.reports[0].loss);
    assert_eq!(out.final_eval_accuracy(), Some(1.0));
}

#[test]
fn runs_are_reproducible_and_parallel_matches_sequential() {
    let data = synth(120, 4);
    let test = synth(30, 5);
    let vocab = Vocab::build(&data);
    let run = |exec| {
        let config = TrainConfig {
            execution: exec,
            ..small(ModelKind::Pdn, &vocab)
        };
        train(&data, Some(&test), &vocab, &config, None, |_| {}).unwrap()
    };
    let lines = |r: &[EpochReport]| {
        r.iter()
            .map(EpochReport::deterministic_line)
            .collect::<Vec<_>>()
    };
    let a = run(Execution::Sequential);
    let b = run(Execution::Sequential);
    let c = run(Execution::Parallel);
    assert_eq!(lines(&a.reports), lines(&b.reports));
    assert_eq!(a.model.params, b.model.params);
    assert_eq!(lines(&a.reports), lines(&c.reports));
    assert_eq!(a.model.params, c.model.params);
}

#[test]
fn reports_are_well_formed() {
    let data = synth(60, 6);
    let vocab = Vocab::build(&data);
    let mut streamed = Vec::new();
    let out = train(
        &data,
        Some(&data),
        &vocab,
        &small(ModelKind::Lstm, &vocab),
        None,
        |r| streamed.push(r.clone()),
    )
    .unwrap();
    assert_eq!(streamed, out.reports);
    for (i, r) in out.reports.iter().enumerate() {
        assert_eq!(r.epoch, i + 1);
        assert!(r.loss >= 0.0);
        assert!((0.0..=1.0).contains(&r.train_accuracy));
        assert!((0.0..=1.0).contains(&r.eval_accuracy.unwrap()));
        let line = r.to_string();
        assert!(line.starts_with(&format!("epoch={} loss=", i + 1)));
        assert!(line.contains(" time_s="));
    }
    let (epoch, best) = out.best_eval_accuracy().unwrap();
    assert!(out.reports.iter().all(|r| r.eval_accuracy.unwrap() <= best));
    assert_eq!(out.reports[epoch - 1].eval_accuracy, Some(best));
}

#[test]
fn non_finite_parameters_abort_with_the_tensor_name() {
    let data = synth(20, 7);
    let vocab = Vocab::build(&data);
    let config = small(ModelKind::Pdn, &vocab);
    let mut model = init_model(&config).unwrap();
    let id = model.params.find(HEAD_B_Q).unwrap();
    model.params.get_mut(id).data_mut()[0] = f32::NAN;
    let err = train(&data, None, &vocab, &config, Some(model), |_| {})
        .err()
        .unwrap();
    match &err {
        TrainError::NonFinite {
            epoch,
            batch,
            tensor,
        } => {
            assert_eq!((*epoch, *batch), (1, 1));
            assert_eq!(tensor, HEAD_B_Q);
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(err.is_numeric());
    assert!(err.to_string().contains("head.b_q"));
}

#[test]
fn empty_training_set_is_rejected() {
    let vocab = Vocab::build(&[]);
    assert!(train(
        &[],
        None,
        &vocab,
        &small(ModelKind::Pdn, &vocab),
        None,
        |_| {}
    )
    .is_err());
}

#[test]
fn evaluate_counts_matches() {
    let data = with_labels(&[(Sentiment::Positive, 3), (Sentiment::Negative, 1)]);
    let vocab = Vocab::build(&data);
    let config = small(ModelKind::Pdn, &vocab);
    let mut model = init_model(&config).unwrap();
    let w = model.params.find(HEAD_W_Q).unwrap();
    model.params.get_mut(w).data_mut().fill(0.0);
    let b = model.params.find(HEAD_B_Q).unwrap();
    model
        .params
        .get_mut(b)
        .data_mut()
        .copy_from_slice(&[0.0, 0.0, 1.0]);
    assert_eq!(
        evaluate(&data, &model, &vocab, Execution::Sequential).unwrap(),
        0.75
    );
    assert_eq!(
        evaluate(&data[..3], &model, &vocab, Execution::Parallel).unwrap(),
        1.0
    );
    let mut shuffled = data.clone();
    shuffled.reverse();
    assert_eq!(
        evaluate(&shuffled, &model, &vocab, Execution::Sequential).unwrap(),
        0.75
    );
    assert!(matches!(
        evaluate(&[], &model, &vocab, Execution::Sequential),
        Err(TrainError::EmptyEval)
    ));
}

#[test]
fn evaluation_ignores_example_order() {
    let data = synth(50, 8);
    let vocab = Vocab::build(&data);
    let model = init_model(&small(ModelKind::Pdn, &vocab)).unwrap();
    let a = evaluate(&data, &model, &vocab, Execution::Sequential).unwrap();
    let mut rev = data.clone();
    rev.reverse();
    assert_eq!(
        a,
        evaluate(&rev, &model, &vocab, Execution::Parallel).unwrap()
    );
}

#[test]
fn majority_matches_reference_counts() {
    let restaurant = with_labels(&[
        (Sentiment::Positive, 728),
        (Sentiment::Neutral, 196),
        (Sentiment::Negative, 196),
    ]);
    let (label, acc) = majority_baseline(&restaurant, &restaurant).unwrap();
    assert_eq!(label, Sentiment::Positive);
    assert_eq!(format!("{:.2}", acc * 100.0), "65.00");
    let laptop = with_labels(&[
        (Sentiment::Positive, 341),
        (Sentiment::Neutral, 169),
        (Sentiment::Negative, 128),
    ]);
    let (_, acc) = majority_baseline(&laptop, &laptop).unwrap();
    assert_eq!(format!("{:.2}", acc * 100.0), "53.45");
    let (_, acc) = majority_baseline(&synth(2000, 9), &synth(2000, 10)).unwrap();
    assert!((acc - 0.5).abs() < 0.03, "{acc}");
}

#[test]
fn zero_frozen_embeddings_predict_the_lowest_class() {
    let data = synth(40, 11);
    let vocab = Vocab::build(&data);
    let config = small(ModelKind::Nbow, &vocab);
    let mut model = init_model(&config).unwrap();
    let id = model.params.find(WORD_EMBEDDING).unwrap();
    model.params.get_mut(id).data_mut().fill(0.0);
    let negatives = data
        .iter()
        .filter(|e| e.label == Sentiment::Negative)
        .count() as f64;
    let acc = evaluate(&data, &model, &vocab, Execution::Sequential).unwrap();
    assert_eq!(acc, negatives / data.len() as f64);
}

#[test]
fn frozen_embeddings_do_not_move() {
    let data = synth(40, 12);
    let vocab = Vocab::build(&data);
    let config = TrainConfig {
        freeze_embeddings: true,
        ..small(ModelKind::Pdn, &vocab)
    };
    let before = init_model(&config).unwrap();
    let out = train(&data, None, &vocab, &config, None, |_| {}).unwrap();
    assert_eq!(
        out.model.params.by_name(WORD_EMBEDDING),
        before.params.by_name(WORD_EMBEDDING)
    );
    assert_ne!(out.model.params, before.params);
}

#[test]
fn attention_dump_reports_consistent_weights() {
    let data = synth(10, 13);
    let vocab = Vocab::build(&data);
    let config = TrainConfig {
        model: ModelConfig {
            decay: DecaySpec::with_default_lambda(DecayKind::Tangent),
            ..small(ModelKind::Pdn, &vocab).model
        },
        ..small(ModelKind::Pdn, &vocab)
    };
    let model = init_model(&config).unwrap();
    for ex in &data {
        let dump = attention_dump(&model, &vocab, ex).unwrap();
        assert_eq!(dump.tokens.len(), ex.tokens.len());
        let total: f64 = dump.tokens.iter().map(|t| t.alpha).sum();
        assert!((total - 1.0).abs() < 1e-6);
        for t in &dump.tokens {
            assert_eq!(
                t.decay,
                config.model.decay.weight(t.position as f64).unwrap()
            );
            assert_eq!(t.effective, t.alpha * t.decay);
        }
        let text = dump.to_string();
        assert_eq!(text.lines().count(), ex.tokens.len() + 1);
        assert!(text.lines().nth(1).unwrap().starts_with("index=0 token="));
        assert!(dump
            .tokens
            .iter()
            .any(|t| t.token == POSITIVE_CUE.to_lowercase()));
        assert!(dump
            .tokens
            .iter()
            .any(|t| t.token == NEGATIVE_CUE.to_lowercase()));
    }
}
