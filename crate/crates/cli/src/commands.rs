use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::Path;

use log::info;
use pdn::data::{
    find_phrase, load_embeddings, load_examples, synth_generate, to_tsv, tokenize, DataError,
    DistanceProfile, Example, Format, Sentiment, Vocab,
};
use pdn::exec::Execution;
use pdn::model::{
    load_checkpoint, save_checkpoint, CheckpointError, DecayKind, DecaySpec, Faults, ModelConfig,
    WORD_EMBEDDING,
};
use pdn::numeric::AdamConfig;
use pdn::train::{
    attention_dump, evaluate, init_model, majority_baseline, model_gradient_check, train,
    GradcheckOptions, TrainConfig, TrainError,
};
use rand::SeedableRng;

use crate::{
    Command, DataFormat, DecayArg, EvalArgs, GradcheckArgs, MajorityArgs, PredictArgs, SynthArgs,
    TrainArgs,
};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Display) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.to_string(),
        }
    }

    fn data(message: impl Display) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.to_string(),
        }
    }

    fn numeric(message: impl Display) -> Self {
        Self {
            code: EXIT_NUMERIC,
            message: message.to_string(),
        }
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Failure::data(e)
    }
}

impl From<CheckpointError> for Failure {
    fn from(e: CheckpointError) -> Self {
        Failure::data(e)
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        if e.is_numeric() {
            Failure::numeric(e)
        } else {
            Failure::data(e)
        }
    }
}

pub fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Majority(a) => cmd_majority(a),
    }
}

fn decay_spec(decay: DecayArg, lambda: Option<f64>) -> Result<DecaySpec, Failure> {
    let kind = DecayKind::from(decay);
    match lambda {
        Some(l) => DecaySpec::new(kind, l).map_err(Failure::usage),
        None => Ok(DecaySpec::with_default_lambda(kind)),
    }
}

fn execution(sequential: bool) -> Execution {
    if sequential || !Execution::available() {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn load(path: &Path, format: &DataFormat) -> Result<Vec<Example>, Failure> {
    let examples = load_examples(path, format.format.map(Format::from))?;
    if examples.is_empty() {
        return Err(Failure::data(format!(
            "{}: no usable examples",
            path.display()
        )));
    }
    Ok(examples)
}

fn require_file(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::usage(format!("{}: no such file", path.display())))
    }
}

/// Output targets are replaced by rename, so they must be regular files or absent.
fn require_replaceable(path: &Path) -> Result<(), Failure> {
    match std::fs::metadata(path) {
        Ok(meta) if !meta.is_file() => Err(Failure::usage(format!(
            "{}: not a regular file",
            path.display()
        ))),
        _ => Ok(()),
    }
}

fn cmd_train(a: TrainArgs) -> Result<(), Failure> {
    require_file(&a.train)?;
    for p in a.dev.iter().chain(a.embeddings.iter()) {
        require_file(p)?;
    }
    for p in std::iter::once(&a.out).chain(a.report.iter()) {
        require_replaceable(p)?;
    }
    let decay = decay_spec(a.decay, a.lambda)?;
    let adam = AdamConfig {
        lr: a.lr,
        beta1: a.beta1,
        beta2: a.beta2,
        eps: a.adam_eps,
    };
    if a.epochs == 0 || a.batch_size == 0 {
        return Err(Failure::usage("epochs and batch size must be positive"));
    }

    let train_set = load(&a.train, &a.format)?;
    let dev_set = a.dev.as_deref().map(|p| load(p, &a.format)).transpose()?;
    let vocab = Vocab::build(&train_set);
    info!(
        "{} training examples, vocabulary {}",
        train_set.len(),
        vocab.len()
    );

    let config = TrainConfig {
        model: ModelConfig {
            kind: a.model.into(),
            vocab_size: vocab.len(),
            word_dim: a.word_dim,
            position_dim: a.position_dim,
            hidden_dim: a.hidden_dim,
            pan_position_hidden: a.pan_position_hidden,
            pan_sequence_hidden: a.pan_sequence_hidden,
            attention_hidden: a.attention_hidden,
            penultimate: a.penultimate,
            max_len: a.max_len,
            dropout: a.dropout,
            decay,
            ..ModelConfig::default()
        },
        batch_size: a.batch_size,
        epochs: a.epochs,
        adam,
        seed: a.seed,
        freeze_embeddings: a.freeze_embeddings,
        execution: execution(a.sequential),
    };
    config.model.validate().map_err(Failure::usage)?;
    let mut model = init_model(&config).map_err(Failure::usage)?;
    if let Some(path) = &a.embeddings {
        let (table, report) = load_embeddings::<f32>(path, &vocab, a.word_dim)?;
        eprintln!(
            "embeddings found={} missing={} duplicates={}",
            report.found, report.missing, report.duplicates
        );
        let id = model
            .params
            .find(WORD_EMBEDDING)
            .expect("every model has word embeddings");
        *model.params.get_mut(id) = table;
    }

    let mut report_lines = String::new();
    let outcome = train(
        &train_set,
        dev_set.as_deref(),
        &vocab,
        &config,
        Some(model),
        |r| {
            println!("{r}");
            report_lines.push_str(&r.deterministic_line());
            report_lines.push('\n');
        },
    )?;
    save_checkpoint(&outcome.model, &vocab, config.seed, &a.out)?;
    if let Some(path) = &a.report {
        write_atomic(path, report_lines.as_bytes())?;
    }
    if let (Some(last), Some((epoch, best))) =
        (outcome.final_eval_accuracy(), outcome.best_eval_accuracy())
    {
        println!("final_eval_acc={last:.4} best_eval_acc={best:.4} best_epoch={epoch}");
    }
    println!("checkpoint={}", a.out.display());
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    require_replaceable(path)?;
    let fail = |e: std::io::Error| Failure::data(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<(), Failure> {
    require_file(&a.ckpt)?;
    require_file(&a.test)?;
    let ck = load_checkpoint(&a.ckpt)?;
    let test = load(&a.test, &a.format)?;
    let acc = evaluate(&test, &ck.model, &ck.vocab, execution(a.sequential))?;
    println!("accuracy={acc:.4} examples={}", test.len());
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> Result<(), Failure> {
    require_file(&a.ckpt)?;
    if a.occurrence == 0 {
        return Err(Failure::usage("--occurrence counts from 1"));
    }
    let ck = load_checkpoint(&a.ckpt)?;
    let tokens = tokenize(&a.sentence);
    let aspect = tokenize(&a.aspect);
    let start = nth_occurrence(&tokens, &aspect, a.occurrence).ok_or_else(|| {
        Failure::data(format!(
            "aspect {:?} occurrence {} not found in sentence",
            a.aspect, a.occurrence
        ))
    })?;
    let ex = Example::new(
        tokens,
        (start + 1, start + aspect.len()),
        Sentiment::Neutral,
    )?;
    let dump = attention_dump(&ck.model, &ck.vocab, &ex)?;
    println!(
        "label={} p_negative={:.6} p_neutral={:.6} p_positive={:.6}",
        dump.predicted, dump.probs[0], dump.probs[1], dump.probs[2]
    );
    if a.dump_attention {
        print!("{dump}");
    }
    Ok(())
}

/// 0-based start of the `k`-th (1-based) match of `phrase` in `tokens`.
fn nth_occurrence(tokens: &[String], phrase: &[String], k: usize) -> Option<usize> {
    let mut offset = 0;
    for _ in 1..k {
        offset += find_phrase(&tokens[offset..], phrase)? + 1;
    }
    find_phrase(&tokens[offset..], phrase).map(|i| i + offset)
}

fn cmd_gradcheck(a: GradcheckArgs) -> Result<(), Failure> {
    let opts = GradcheckOptions {
        seed: a.seed,
        length: a.n,
        kind: a.model.into(),
        decay: decay_spec(a.decay, a.lambda)?,
        faults: Faults {
            break_decay_gradient: a.break_decay_gradient,
        },
        ..GradcheckOptions::default()
    };
    if opts.length == 0 {
        return Err(Failure::usage("--n must be positive"));
    }
    let report = model_gradient_check(&opts).map_err(Failure::numeric)?;
    println!("{report}");
    if report.passed() {
        Ok(())
    } else {
        let names: Vec<&str> = report.failures().map(|t| t.name.as_str()).collect();
        Err(Failure::numeric(format!(
            "gradient mismatch in {}",
            names.join(", ")
        )))
    }
}

fn cmd_synth(a: SynthArgs) -> Result<(), Failure> {
    if a.count == 0 {
        return Err(Failure::usage("--count must be positive"));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.seed);
    let profile = DistanceProfile {
        decoy: !a.single_aspect,
        ..DistanceProfile::default()
    };
    let examples = synth_generate(a.count, &mut rng, &profile);
    fs::write(&a.out, to_tsv(&examples))
        .map_err(|e| Failure::data(format!("{}: {e}", a.out.display())))?;
    println!("wrote {} examples to {}", examples.len(), a.out.display());
    Ok(())
}

fn cmd_majority(a: MajorityArgs) -> Result<(), Failure> {
    require_file(&a.train)?;
    require_file(&a.test)?;
    let train_set = load(&a.train, &a.format)?;
    let test = load(&a.test, &a.format)?;
    let (label, acc) = majority_baseline(&train_set, &test)?;
    println!("label={label} accuracy={acc:.4} percent={:.2}", acc * 100.0);
    Ok(())
}
