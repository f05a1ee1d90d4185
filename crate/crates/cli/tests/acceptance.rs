//! Acceptance suite. Prints one PASS, FAIL or SKIP line per criterion and
//! exits non-zero if any gating criterion fails. The ten numbered criteria
//! gate; the two trailing property checks are reported alongside them and
//! only the loss property gates.
//!
//! Criteria needing the SemEval-2014 Task 4 files read them from the
//! directory named by `PDN_SEMEVAL_DIR`. The extended reproduction run also
//! needs `PDN_EMBEDDINGS` (300-d vectors) and `PDN_EXTENDED=1`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use pdn::data::synth::{oracle_label, ASPECT_TOKEN, NEGATIVE_CUE, POSITIVE_CUE};
use pdn::data::{
    load_examples, synth_generate, DistanceProfile, Example, LabelCounts, Sentiment, Vocab,
};
use pdn::exec::Execution;
use pdn::model::{
    encode_positions, load_checkpoint, save_checkpoint, DecayKind, DecaySpec, ModelConfig,
};
use pdn::train::{attention_dump, evaluate, predict_example, train, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PDN: &str = env!("CARGO_BIN_EXE_pdn");

/// Reduced widths for the desk-scale synthetic experiment.
const SYNTH_DIMS: &[&str] = &[
    "--word-dim",
    "32",
    "--hidden-dim",
    "32",
    "--position-dim",
    "16",
    "--pan-position-hidden",
    "16",
    "--pan-sequence-hidden",
    "16",
    "--attention-hidden",
    "16",
    "--penultimate",
    "32",
    "--max-len",
    "30",
];

enum Status {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    status: Status,
    detail: String,
}

impl Outcome {
    fn check(ok: bool, detail: impl Into<String>) -> Self {
        Self {
            status: if ok { Status::Pass } else { Status::Fail },
            detail: detail.into(),
        }
    }

    fn skip(detail: impl Into<String>) -> Self {
        Self {
            status: Status::Skip,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        })
    }
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn pdn(args: &[&str]) -> Run {
    let out = Command::new(PDN)
        .args(args)
        .env_remove("PDN_SEED")
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

/// Value of `key=` in the first line that has it.
fn field(text: &str, key: &str) -> Option<f64> {
    let pat = format!("{key}=");
    text.split_whitespace()
        .find_map(|w| w.strip_prefix(&pat))
        .and_then(|v| v.parse().ok())
}

fn epoch_losses(stdout: &str) -> Vec<f64> {
    stdout
        .lines()
        .filter(|l| l.starts_with("epoch="))
        .filter_map(|l| field(l, "loss"))
        .collect()
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn criterion_gradients() -> Outcome {
    let started = Instant::now();
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for kind in ["inverse", "expo", "tangent"] {
        for seed in 0..20u64 {
            let n = (1 + seed % 10).to_string();
            let run = pdn(&[
                "gradcheck",
                "--seed",
                &seed.to_string(),
                "--n",
                &n,
                "--decay",
                kind,
            ]);
            let tensors: Vec<&str> = run
                .stdout
                .lines()
                .filter(|l| l.starts_with("tensor="))
                .collect();
            for l in &tensors {
                worst = worst.max(field(l, "worst_rel_err").unwrap_or(f64::INFINITY));
            }
            if run.code != 0 || tensors.len() != 16 {
                failures.push(format!("{kind}/seed {seed}"));
            }
        }
    }
    let control = pdn(&["gradcheck", "--break-decay-gradient"]);
    let mut names: Vec<&str> = control
        .stdout
        .lines()
        .filter_map(|l| l.strip_prefix("tensor="))
        .filter_map(|l| l.split_whitespace().next())
        .collect();
    let listed = names.len();
    names.sort_unstable();
    names.dedup();
    let control_ok = control.code == 3 && listed == 16 && names.len() == 16;
    let secs = started.elapsed().as_secs_f64();
    Outcome::check(
        failures.is_empty() && control_ok && secs < 120.0,
        format!(
            "60 runs, worst rel err {worst:.2e}, failures {failures:?}, broken-gradient control exit {} ({listed} tensors listed), {secs:.1} s",
            control.code
        ),
    )
}

fn brute_force_positions(len: usize, start: usize, end: usize) -> Vec<usize> {
    (1..=len)
        .map(|i| (start..=end).map(|j| i.abs_diff(j)).min().unwrap() + 1)
        .collect()
}

fn criterion_positions() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let len = rng.gen_range(1..=80);
        let start = rng.gen_range(1..=len);
        let end = rng.gen_range(start..=len);
        let got = encode_positions(len, start, end).unwrap().into_vec();
        mismatches += usize::from(got != brute_force_positions(len, start, end));
    }
    Outcome::check(
        mismatches == 0,
        format!("{mismatches} mismatches in 1000 random cases"),
    )
}

fn criterion_decay() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut bad = Vec::new();
    for kind in DecayKind::ALL {
        for _ in 0..100 {
            let lambda = 2.0 - rng.gen::<f64>() * 2.0; // (0, 2]
            let spec = DecaySpec::new(kind, lambda).unwrap();
            let w: Vec<f64> = (1..=80).map(|x| spec.weight(x as f64).unwrap()).collect();
            if !strictly_decreasing(&w) || w.iter().any(|&v| v <= 0.0) {
                bad.push(format!("{kind} λ={lambda}"));
            }
        }
    }
    let flat = [DecayKind::Exponential, DecayKind::Tangent]
        .iter()
        .all(|&k| {
            let spec = DecaySpec::new(k, 0.0).unwrap();
            (0..=80).all(|x| spec.weight(x as f64).unwrap() == 1.0)
        });
    let inverse = DecaySpec::new(DecayKind::Inverse, 1.1333)
        .unwrap()
        .weight(1.0)
        .unwrap()
        == 1.1333;
    Outcome::check(
        bad.is_empty() && flat && inverse,
        format!("non-monotone {bad:?}, flat λ=0 {flat}, inverse(1)=1.1333 {inverse}"),
    )
}

struct SynthRun {
    train: PathBuf,
    test: PathBuf,
    pdn_ckpt: PathBuf,
    pdn_losses: Vec<f64>,
}

fn synth_files(dir: &Path) -> Result<(PathBuf, PathBuf), String> {
    let train = dir.join("synth_train.tsv");
    let test = dir.join("synth_test.tsv");
    for (path, count, seed) in [(&train, "5000", "1"), (&test, "1000", "2")] {
        let run = pdn(&["synth", "--count", count, "--seed", seed, "--out", p(path)]);
        if run.code != 0 {
            return Err(format!("synth failed: {}", run.stderr));
        }
    }
    Ok((train, test))
}

fn train_synth(train: &Path, test: &Path, out: &Path, extra: &[&str]) -> Result<Run, String> {
    let mut args = vec![
        "train",
        "--train",
        p(train),
        "--dev",
        p(test),
        "--out",
        p(out),
        "--seed",
        "1",
    ];
    args.extend_from_slice(SYNTH_DIMS);
    args.extend_from_slice(extra);
    let run = pdn(&args);
    if run.code == 0 {
        Ok(run)
    } else {
        Err(format!("train {extra:?} exit {}: {}", run.code, run.stderr))
    }
}

fn eval_accuracy(ckpt: &Path, test: &Path) -> Result<f64, String> {
    let run = pdn(&["eval", "--ckpt", p(ckpt), "--test", p(test)]);
    field(&run.stdout, "accuracy").ok_or_else(|| format!("eval exit {}: {}", run.code, run.stderr))
}

fn criterion_synthetic(dir: &Path) -> (Outcome, Option<SynthRun>) {
    let started = Instant::now();
    let result = (|| -> Result<(f64, f64, f64, SynthRun), String> {
        let (train, test) = synth_files(dir)?;
        let pdn_ckpt = dir.join("pdn.ckpt");
        let pdn_run = train_synth(
            &train,
            &test,
            &pdn_ckpt,
            &["--decay", "inverse", "--lambda", "1.1333"],
        )?;
        let nbow = dir.join("nbow.ckpt");
        train_synth(&train, &test, &nbow, &["--model", "nbow"])?;
        let lstm = dir.join("lstm.ckpt");
        train_synth(&train, &test, &lstm, &["--model", "lstm"])?;
        let accs = (
            eval_accuracy(&pdn_ckpt, &test)?,
            eval_accuracy(&nbow, &test)?,
            eval_accuracy(&lstm, &test)?,
        );
        let run = SynthRun {
            train,
            test,
            pdn_ckpt,
            pdn_losses: epoch_losses(&pdn_run.stdout),
        };
        Ok((accs.0, accs.1, accs.2, run))
    })();
    let secs = started.elapsed().as_secs_f64();
    match result {
        Ok((pdn_acc, nbow, lstm, run)) => (
            Outcome::check(
                pdn_acc >= 0.95 && nbow <= 0.65 && lstm <= 0.75 && secs < 600.0,
                format!(
                    "Inverse-PDN {pdn_acc:.4} (>= 0.95), NBOW {nbow:.4} (<= 0.65), LSTM {lstm:.4} (<= 0.75), 30 epochs, {secs:.1} s"
                ),
            ),
            Some(run),
        ),
        Err(e) => (Outcome::check(false, e), None),
    }
}

/// Indices of every aspect token in a synthetic sentence.
fn aspect_indices(ex: &Example) -> Vec<usize> {
    let asp = ASPECT_TOKEN.to_lowercase();
    ex.tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| **t == asp)
        .map(|(i, _)| i)
        .collect()
}

fn with_span(ex: &Example, index: usize) -> Example {
    Example::new(ex.tokens.clone(), (index + 1, index + 1), ex.label).unwrap()
}

fn criterion_aspect_flip(run: Option<&SynthRun>) -> Outcome {
    let Some(run) = run else {
        return Outcome::check(false, "needs the trained synthetic model");
    };
    let ck = load_checkpoint(&run.pdn_ckpt).unwrap();
    let test = load_examples(&run.test, None).unwrap();
    let (mut flipped, mut total) = (0, 0);
    for ex in &test {
        let variants: Vec<Example> = aspect_indices(ex)
            .into_iter()
            .map(|i| with_span(ex, i))
            .collect();
        let near_pos = variants
            .iter()
            .find(|v| oracle_label(v) == Some(Sentiment::Positive));
        let near_neg = variants
            .iter()
            .find(|v| oracle_label(v) == Some(Sentiment::Negative));
        if let (Some(a), Some(b)) = (near_pos, near_neg) {
            total += 1;
            let pa = predict_example(&ck.model, &ck.vocab, a)
                .unwrap()
                .predicted();
            let pb = predict_example(&ck.model, &ck.vocab, b)
                .unwrap()
                .predicted();
            flipped += usize::from(pa != pb);
        }
    }
    let rate = flipped as f64 / total.max(1) as f64;
    Outcome::check(
        total > 0 && rate >= 0.9,
        format!("{flipped}/{total} sentences flip ({rate:.4}, need >= 0.90)"),
    )
}

fn property_loss_decreasing(dir: &Path, run: Option<&SynthRun>) -> Outcome {
    let Some(run) = run else {
        return Outcome::check(false, "needs the synthetic data");
    };
    let mut parts = vec![format!(
        "inverse {:?}",
        &run.pdn_losses[..5.min(run.pdn_losses.len())]
    )];
    let mut ok = run.pdn_losses.len() >= 5 && strictly_decreasing(&run.pdn_losses[..5]);
    for kind in ["expo", "tangent"] {
        let out = dir.join(format!("{kind}.ckpt"));
        match train_synth(
            &run.train,
            &run.test,
            &out,
            &["--decay", kind, "--epochs", "5"],
        ) {
            Ok(r) => {
                let losses = epoch_losses(&r.stdout);
                ok &= losses.len() == 5 && strictly_decreasing(&losses);
                parts.push(format!("{kind} {losses:?}"));
            }
            Err(e) => {
                ok = false;
                parts.push(e);
            }
        }
    }
    Outcome::check(ok, format!("first five epoch losses: {}", parts.join("; ")))
}

fn property_attention_proximity(run: Option<&SynthRun>) -> Outcome {
    let Some(run) = run else {
        return Outcome::check(false, "needs the trained synthetic model");
    };
    let ck = load_checkpoint(&run.pdn_ckpt).unwrap();
    let test = load_examples(&run.test, None).unwrap();
    let near = DistanceProfile::default().near;
    let cues = [POSITIVE_CUE.to_lowercase(), NEGATIVE_CUE.to_lowercase()];
    let is_near_cue = |t: &pdn::train::TokenWeight| {
        cues.contains(&t.token) && (near.0..=near.1).contains(&(t.position - 1))
    };
    let (mut hits, mut hits_outside_span) = (0, 0);
    for ex in &test {
        let dump = attention_dump(&ck.model, &ck.vocab, ex).unwrap();
        hits += usize::from(is_near_cue(&dump.tokens[dump.top_effective().unwrap()]));
        let outside = dump
            .tokens
            .iter()
            .filter(|t| t.position > 1)
            .max_by(|a, b| a.effective.total_cmp(&b.effective));
        hits_outside_span += usize::from(outside.is_some_and(is_near_cue));
    }
    let rate = hits as f64 / test.len() as f64;
    Outcome::check(
        rate >= 0.8,
        format!(
            "top effective weight on a near cue in {hits}/{} ({rate:.4}, need >= 0.80); excluding the aspect span {hits_outside_span}/{}",
            test.len(),
            test.len()
        ),
    )
}

/// First `.xml` file in `dir` whose lowercase name contains every needle.
fn find_xml(dir: &Path, needles: &[&str]) -> Option<PathBuf> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .ok()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    entries.into_iter().find(|path| {
        let name = path.file_name().unwrap().to_string_lossy().to_lowercase();
        name.ends_with(".xml") && needles.iter().all(|n| name.contains(n))
    })
}

struct SemEval {
    files: Vec<(&'static str, &'static str, PathBuf)>,
}

impl SemEval {
    fn locate() -> Result<Self, String> {
        let dir = std::env::var_os("PDN_SEMEVAL_DIR")
            .map(PathBuf::from)
            .ok_or("PDN_SEMEVAL_DIR not set; SemEval-2014 Task 4 files not supplied")?;
        let mut files = Vec::new();
        for (domain, key) in [("restaurant", "restaurant"), ("laptop", "laptop")] {
            for split in ["train", "test"] {
                let path = find_xml(&dir, &[key, split])
                    .ok_or_else(|| format!("no {domain} {split} .xml file in {}", dir.display()))?;
                files.push((domain, split, path));
            }
        }
        Ok(Self { files })
    }

    fn path(&self, domain: &str, split: &str) -> &Path {
        &self
            .files
            .iter()
            .find(|(d, s, _)| *d == domain && *s == split)
            .unwrap()
            .2
    }
}

fn criterion_dataset_counts(data: &Result<SemEval, String>) -> Outcome {
    let data = match data {
        Ok(d) => d,
        Err(e) => return Outcome::skip(e.clone()),
    };
    // positive, negative, neutral
    let expected = [
        ("restaurant", "train", (2164, 805, 633)),
        ("restaurant", "test", (728, 196, 196)),
        ("laptop", "train", (987, 866, 460)),
        ("laptop", "test", (341, 128, 169)),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (domain, split, want) in expected {
        match load_examples(data.path(domain, split), None) {
            Ok(ex) => {
                let c = LabelCounts::of(&ex);
                let got = (c.positive, c.negative, c.neutral);
                ok &= got == want;
                parts.push(format!("{domain} {split} {}/{}/{}", got.0, got.1, got.2));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{domain} {split}: {e}"));
            }
        }
    }
    Outcome::check(ok, parts.join(", "))
}

fn criterion_majority(data: &Result<SemEval, String>) -> Outcome {
    let data = match data {
        Ok(d) => d,
        Err(e) => return Outcome::skip(e.clone()),
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for (domain, want) in [("restaurant", 65.00), ("laptop", 53.45)] {
        let run = pdn(&[
            "majority",
            "--train",
            p(data.path(domain, "train")),
            "--test",
            p(data.path(domain, "test")),
        ]);
        let got = field(&run.stdout, "percent").unwrap_or(f64::NAN);
        ok &= (got - want).abs() <= 0.01 + 1e-9;
        parts.push(format!("{domain} {got:.2} (reference {want:.2})"));
    }
    Outcome::check(ok, parts.join(", "))
}

fn criterion_extended(data: &Result<SemEval, String>, dir: &Path) -> Outcome {
    let data = match data {
        Ok(d) => d,
        Err(e) => return Outcome::skip(e.clone()),
    };
    let Some(embeddings) = std::env::var_os("PDN_EMBEDDINGS").map(PathBuf::from) else {
        return Outcome::skip("PDN_EMBEDDINGS not set");
    };
    if std::env::var("PDN_EXTENDED").as_deref() != Ok("1") {
        return Outcome::skip("set PDN_EXTENDED=1 to run the full-size reproduction");
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for (domain, reference) in [("restaurant", 78.9), ("laptop", 70.69)] {
        let mut accs = Vec::new();
        for model in ["pdn", "lstm", "nbow"] {
            let out = dir.join(format!("{domain}_{model}.ckpt"));
            let run = pdn(&[
                "train",
                "--train",
                p(data.path(domain, "train")),
                "--embeddings",
                p(&embeddings),
                "--model",
                model,
                "--out",
                p(&out),
            ]);
            let acc = if run.code == 0 {
                eval_accuracy(&out, data.path(domain, "test")).unwrap_or(f64::NAN) * 100.0
            } else {
                f64::NAN
            };
            accs.push(acc);
        }
        ok &= (accs[0] - reference).abs() <= 2.5 && accs[0] > accs[1] && accs[0] > accs[2];
        parts.push(format!(
            "{domain} PDN {:.2} (reference {reference}), LSTM {:.2}, NBOW {:.2}",
            accs[0], accs[1], accs[2]
        ));
    }
    Outcome::check(ok, parts.join(", "))
}

fn criterion_determinism(dir: &Path) -> Outcome {
    let data = dir.join("det.tsv");
    if pdn(&["synth", "--count", "400", "--seed", "7", "--out", p(&data)]).code != 0 {
        return Outcome::check(false, "synth failed");
    }
    let mut artefacts = Vec::new();
    for i in 0..2 {
        let (ckpt, report) = (
            dir.join(format!("det{i}.ckpt")),
            dir.join(format!("det{i}.report")),
        );
        let mut args = vec![
            "train",
            "--train",
            p(&data),
            "--dev",
            p(&data),
            "--out",
            p(&ckpt),
            "--report",
            p(&report),
            "--seed",
            "11",
            "--epochs",
            "3",
            "--sequential",
        ];
        args.extend_from_slice(SYNTH_DIMS);
        let run = pdn(&args);
        if run.code != 0 {
            return Outcome::check(false, format!("train exit {}: {}", run.code, run.stderr));
        }
        artefacts.push((
            std::fs::read(&ckpt).unwrap(),
            std::fs::read(&report).unwrap(),
        ));
    }
    let same_ckpt = artefacts[0].0 == artefacts[1].0;
    let same_report = artefacts[0].1 == artefacts[1].1;
    Outcome::check(
        same_ckpt && same_report,
        format!(
            "checkpoints identical {same_ckpt} ({} bytes), epoch reports identical {same_report}",
            artefacts[0].0.len()
        ),
    )
}

fn criterion_checkpoint(dir: &Path) -> Outcome {
    let data = synth_generate(
        300,
        &mut ChaCha8Rng::seed_from_u64(13),
        &DistanceProfile::default(),
    );
    let test = synth_generate(
        200,
        &mut ChaCha8Rng::seed_from_u64(14),
        &DistanceProfile::default(),
    );
    let vocab = Vocab::build(&data);
    let config = TrainConfig {
        model: ModelConfig {
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
        epochs: 3,
        seed: 5,
        ..TrainConfig::default()
    };
    let model = train(&data, None, &vocab, &config, None, |_| {})
        .unwrap()
        .model;
    let before = evaluate(&test, &model, &vocab, Execution::Sequential).unwrap();
    let path = dir.join("roundtrip.ckpt");
    save_checkpoint(&model, &vocab, config.seed, &path).unwrap();
    let ck = load_checkpoint(&path).unwrap();
    let after = evaluate(&test, &ck.model, &ck.vocab, Execution::Sequential).unwrap();
    let params_equal = ck.model.params == model.params && ck.vocab == vocab;
    Outcome::check(
        before.to_bits() == after.to_bits() && params_equal,
        format!("accuracy before {before:.6}, after {after:.6}, parameters and vocabulary identical {params_equal}"),
    )
}

fn main() -> ExitCode {
    let work = tempfile::tempdir().expect("temp dir");
    let dir = work.path();
    let mut failed = 0;
    let mut report = |label: &str, outcome: Outcome, gating: bool| {
        let note = if gating { "" } else { " [non-gating]" };
        println!("{label}: {}{note} ({})", outcome.status, outcome.detail);
        if gating && matches!(outcome.status, Status::Fail) {
            failed += 1;
        }
    };

    report(
        "criterion 1 gradient soundness",
        criterion_gradients(),
        true,
    );
    report(
        "criterion 2 position encoding oracle",
        criterion_positions(),
        true,
    );
    report("criterion 3 decay properties", criterion_decay(), true);
    let (synthetic, run) = criterion_synthetic(dir);
    report("criterion 4 synthetic isolation", synthetic, true);
    report(
        "criterion 5 aspect flip",
        criterion_aspect_flip(run.as_ref()),
        true,
    );
    let semeval = SemEval::locate();
    report(
        "criterion 6 dataset counts",
        criterion_dataset_counts(&semeval),
        true,
    );
    report(
        "criterion 7 majority baseline",
        criterion_majority(&semeval),
        true,
    );
    report(
        "criterion 8 extended reproduction",
        criterion_extended(&semeval, dir),
        false,
    );
    report("criterion 9 determinism", criterion_determinism(dir), true);
    report(
        "criterion 10 checkpoint round trip",
        criterion_checkpoint(dir),
        true,
    );
    report(
        "property loss decreases over first five epochs",
        property_loss_decreasing(dir, run.as_ref()),
        true,
    );
    report(
        "property attention favours near cues",
        property_attention_proximity(run.as_ref()),
        false,
    );

    if failed == 0 {
        println!("acceptance: all gating criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} gating criteria failed");
        ExitCode::FAILURE
    }
}
