// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use serde::Serialize;

use dorabella_core::abc::melody_to_abc;
use dorabella_core::corpus::{sample_excerpts, split_corpus};
use dorabella_core::solver::{run_experiment, solve, RestartTrace};
use dorabella_core::symbols::{builtin_alphabet, parse_dorabella_lines, read_sequences, write_sequences};
use dorabella_core::{Key, NgramModel, Sequence, SolverConfig, TestSource};

use crate::error::{CliError, CliResult};
use crate::formats::{load_corpus, resolve_alphabet, CorpusSpec};
use crate::manifest::{read_input, RunManifest};
use crate::{
    Command, DecipherArgs, DorabellaArgs, EncipherArgs, ExperimentCommand, PerplexityArgs, SearchArgs,
    SolveArgs, TablePerplexityArgs, TestFrom, TrainArgs,
};

/// Number of glyphs in the Dorabella transcription.
pub const DORABELLA_LENGTH: usize = 87;

/// Files a command produces. `main` goes to `--out`, or stdout when absent.
#[derive(Debug, Default)]
pub struct Output {
    pub main: String,
    pub main_path: Option<PathBuf>,
    pub extra: Vec<(PathBuf, String)>,
    pub warnings: Vec<String>,
}

impl Output {
    fn new(main: String, main_path: Option<PathBuf>) -> Output {
        Output {
            main,
            main_path,
            ..Output::default()
        }
    }

    pub fn write(self) -> CliResult<()> {
        for w in &self.warnings {
            eprintln!("warning: {w}");
        }
        match &self.main_path {
            Some(p) => std::fs::write(p, &self.main).map_err(|e| CliError::io(p, e))?,
            None => print!("{}", self.main),
        }
        for (p, text) in &self.extra {
            std::fs::write(p, text).map_err(|e| CliError::io(p, e))?;
        }
        Ok(())
    }
}

pub fn execute(command: Command) -> CliResult<()> {
    let output = match command {
        Command::Train(a) => train(&a)?,
        Command::Perplexity(a) => perplexity(&a)?,
        Command::Encipher(a) => encipher(&a)?,
        Command::Solve(a) => solve_cmd(&a)?,
        Command::Experiment(ExperimentCommand::Decipher(a)) => table_decipher(&a)?,
        Command::Experiment(ExperimentCommand::Perplexity(a)) => table_perplexity(&a)?,
        Command::Dorabella(a) => dorabella(&a)?,
    };
    output.write()
}

fn solver_config(search: &SearchArgs, seed: u64, manifest: &mut RunManifest) -> CliResult<SolverConfig> {
    let config = SolverConfig {
        iterations: search.iterations,
        restarts: search.restarts,
        seed,
        parallel: true,
    };
    config.validate()?;
    manifest
        .param("iterations", search.iterations)
        .param("restarts", search.restarts)
        .seed("seed", seed);
    Ok(config)
}

fn load_model(manifest: &mut RunManifest, path: &std::path::Path) -> CliResult<NgramModel> {
    let text = read_input(manifest, path)?;
    NgramModel::from_text(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Guards the reported score against the model's own scoring.
fn check_score(model: &NgramModel, plaintext: &Sequence, reported: f64) -> CliResult<()> {
    let direct = model.log_prob(plaintext)?;
    if direct != reported {
        return Err(CliError::Internal(format!(
            "solver score {reported} differs from model score {direct}"
        )));
    }
    Ok(())
}

pub fn train(args: &TrainArgs) -> CliResult<Output> {
    if args.order != 3 {
        return Err(CliError::Usage(format!(
            "only --order 3 is supported, got {}",
            args.order
        )));
    }
    let mut manifest = RunManifest::new("train");
    manifest
        .param("order", args.order)
        .param("format", args.format.name());
    let alphabet = args.alphabet.as_deref().map(resolve_alphabet).transpose()?;
    if let Some(a) = &alphabet {
        manifest.param("alphabet", a.name());
    }
    let (alphabet, sequences) = load_corpus(&mut manifest, args.format, &args.inputs, alphabet.as_ref())?;
    let model = NgramModel::train(&sequences, &alphabet)?;
    let text = model.to_text() + &manifest.to_block("#");
    Ok(Output::new(text, args.out.clone()))
}

pub fn perplexity(args: &PerplexityArgs) -> CliResult<Output> {
    let mut manifest = RunManifest::new("perplexity");
    manifest.param("format", args.format.name());
    let model = load_model(&mut manifest, &args.model)?;
    let (_, mut sequences) = load_corpus(&mut manifest, args.format, &args.inputs, Some(model.alphabet()))?;
    let mut out = String::new();
    if let Some(count) = args.excerpts {
        let seed = args
            .seed
            .ok_or_else(|| CliError::Usage("--excerpts needs --seed".into()))?;
        manifest
            .param("excerpts", count)
            .param("length", args.length)
            .seed("seed", seed);
        sequences = sample_excerpts(&sequences, count, args.length, seed)?;
        let per: Vec<f64> = sequences
            .iter()
            .map(|s| model.perplexity(std::slice::from_ref(s)))
            .collect::<Result<_, _>>()?;
        writeln!(
            out,
            "mean_excerpt_perplexity {:.6}",
            per.iter().sum::<f64>() / per.len() as f64
        )
        .unwrap();
    }
    let tokens: usize = sequences.iter().map(Sequence::len).sum();
    writeln!(out, "perplexity {:.6}", model.perplexity(&sequences)?).unwrap();
    writeln!(out, "sequences {}", sequences.len()).unwrap();
    writeln!(out, "tokens {tokens}").unwrap();
    out.push_str(&manifest.to_block("#"));
    Ok(Output::new(out, args.out.clone()))
}

pub fn encipher(args: &EncipherArgs) -> CliResult<Output> {
    let mut manifest = RunManifest::new("encipher");
    let key = match (&args.key, args.seed) {
        (Some(path), _) => {
            let text = read_input(&mut manifest, path)?;
            Key::from_text(&text, builtin_alphabet)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        }
        (None, Some(seed)) => {
            let plain = resolve_alphabet(&args.alphabet)?;
            let cipher = resolve_alphabet(&args.cipher_alphabet)?;
            manifest
                .param("alphabet", plain.name())
                .param("cipher_alphabet", cipher.name())
                .seed("seed", seed);
            Key::random(plain, cipher, seed)?
        }
        (None, None) => return Err(CliError::Usage("either --key or --seed is required".into())),
    };
    let text = read_input(&mut manifest, &args.input)?;
    let plaintexts = read_sequences(key.plain_alphabet(), &text)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.input.display())))?;
    let ciphertexts = plaintexts
        .iter()
        .map(|p| key.encipher(p))
        .collect::<Result<Vec<_>, _>>()?;
    let block = manifest.to_block("#");
    let mut output = Output::new(write_sequences(&ciphertexts) + &block, args.out.clone());
    if let Some(path) = &args.key_out {
        output.extra.push((path.clone(), key.to_text() + &block));
    }
    Ok(output)
}

#[derive(Serialize)]
struct KeyReport {
    plain_alphabet: String,
    cipher_alphabet: String,
    plain: Vec<String>,
    cipher: Vec<String>,
}

impl KeyReport {
    fn new(key: &Key) -> KeyReport {
        let cipher = key.cipher_alphabet();
        KeyReport {
            plain_alphabet: key.plain_alphabet().name().to_string(),
            cipher_alphabet: cipher.name().to_string(),
            plain: key.plain_alphabet().symbols().to_vec(),
            cipher: key
                .mapping()
                .iter()
                .map(|&c| cipher.symbols()[c].clone())
                .collect(),
        }
    }
}

#[derive(Serialize)]
struct SolveReport<'a> {
    command: &'static str,
    ciphertext: String,
    plaintext: String,
    key: KeyReport,
    best_log_prob: f64,
    perplexity: f64,
    best_restart: usize,
    restarts: &'a [RestartTrace],
    manifest: &'a RunManifest,
}

pub fn solve_cmd(args: &SolveArgs) -> CliResult<Output> {
    let mut manifest = RunManifest::new("solve");
    let model = load_model(&mut manifest, &args.model)?;
    let cipher_alphabet = resolve_alphabet(&args.cipher_alphabet)?;
    manifest.param("cipher_alphabet", cipher_alphabet.name());
    let text = read_input(&mut manifest, &args.cipher)?;
    let lines = read_sequences(&cipher_alphabet, &text)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.cipher.display())))?;
    let tokens: Vec<usize> = lines.iter().flat_map(|s| s.tokens().iter().copied()).collect();
    let ciphertext = Sequence::new(Arc::clone(&cipher_alphabet), tokens)?;
    let config = solver_config(&args.search, args.seed, &mut manifest)?;
    let result = solve(&ciphertext, &model, &config)?;
    check_score(&model, &result.best_plaintext, result.best_log_prob)?;
    let report = SolveReport {
        command: "solve",
        ciphertext: ciphertext.render(),
        plaintext: result.best_plaintext.render(),
        key: KeyReport::new(&result.best_key),
        best_log_prob: result.best_log_prob,
        perplexity: (-result.best_log_prob / ciphertext.len() as f64).exp(),
        best_restart: result.best_restart,
        restarts: &result.restart_traces,
        manifest: &manifest,
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(Output::new(json + "\n", args.out.clone()))
}

fn percent(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (k, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if k == 0 {
                write!(s, "{cell:<w$}").unwrap();
            } else {
                write!(s, " | {cell:>w$}").unwrap();
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(&header.iter().map(|h| h.to_string()).collect::<Vec<_>>());
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 3 * (widths.len() - 1)));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
    }
    out
}

/// Decipherment accuracy table: one row per corpus with Key Acc / Dec Acc.
pub fn table_decipher(args: &DecipherArgs) -> CliResult<Output> {
    let mut manifest = RunManifest::new("experiment decipher");
    let config = solver_config(&args.search, args.seed, &mut manifest)?;
    manifest
        .param("ciphers", args.ciphers)
        .param("length", args.length)
        .param("test_from", format!("{:?}", args.test_from).to_lowercase());
    let source = match args.test_from {
        TestFrom::Heldout => TestSource::Heldout,
        TestFrom::Train => TestSource::Train,
    };
    let mut details = String::new();
    let mut rows = Vec::new();
    for (k, arg) in args.corpora.iter().enumerate() {
        let spec = CorpusSpec::parse(arg)?;
        let (alphabet, sources) =
            load_corpus(&mut manifest, spec.format, std::slice::from_ref(&spec.path), None)?;
        let train_count = spec.train_count_for(sources.len())?;
        manifest.param(
            &format!("corpus.{k}"),
            format!("{} train={train_count}", spec.label),
        );
        let split = split_corpus(&sources, train_count, args.seed)?;
        let model = NgramModel::train(&split.train, &alphabet)?;
        let report = run_experiment(&split, &model, args.ciphers, args.length, &config, source)
            .map_err(|e| CliError::Data(format!("corpus `{}`: {e}", spec.label)))?;
        writeln!(details, "# corpus {}", spec.label).unwrap();
        details.push_str(&report.to_text());
        rows.push(vec![
            spec.label.clone(),
            percent(report.mean_key_accuracy),
            percent(report.mean_decipherment_accuracy),
            percent(report.fraction_solved),
        ]);
    }
    let mut out = details;
    out.push('\n');
    out.push_str(&render_table(&["Source", "Key Acc", "Dec Acc", "Solved"], &rows));
    out.push_str(&manifest.to_block("#"));
    Ok(Output::new(out, args.out.clone()))
}

/// Average held-out excerpt perplexity per corpus.
pub fn table_perplexity(args: &TablePerplexityArgs) -> CliResult<Output> {
    let mut manifest = RunManifest::new("experiment perplexity");
    manifest
        .param("excerpts", args.excerpts)
        .param("length", args.length)
        .seed("seed", args.seed);
    let mut rows = Vec::new();
    for (k, arg) in args.corpora.iter().enumerate() {
        let spec = CorpusSpec::parse(arg)?;
        let (alphabet, sources) =
            load_corpus(&mut manifest, spec.format, std::slice::from_ref(&spec.path), None)?;
        let train_count = spec.train_count_for(sources.len())?;
        manifest.param(
            &format!("corpus.{k}"),
            format!("{} train={train_count}", spec.label),
        );
        let split = split_corpus(&sources, train_count, args.seed)?;
        let model = NgramModel::train(&split.train, &alphabet)?;
        let excerpts = sample_excerpts(&split.test, args.excerpts, args.length, args.seed)
            .map_err(|e| CliError::Data(format!("corpus `{}`: {e}", spec.label)))?;
        let per: Vec<f64> = excerpts
            .iter()
            .map(|s| model.perplexity(std::slice::from_ref(s)))
            .collect::<Result<_, _>>()?;
        let mean = per.iter().sum::<f64>() / per.len() as f64;
        rows.push(vec![spec.label.clone(), format!("{mean:.1}")]);
    }
    let mut out = render_table(&["Dataset", "Average Perplexity"], &rows);
    out.push_str(&manifest.to_block("#"));
    Ok(Output::new(out, args.out.clone()))
}

/// Renders `melody` with the same line breaks as the transcription.
fn melody_lines(melody: &Sequence, line_lengths: &[usize]) -> String {
    let symbols: Vec<&str> = melody.symbols().collect();
    let mut out = String::new();
    let mut at = 0;
    for &n in line_lengths {
        out.push_str(&symbols[at..at + n].join(" "));
        out.push('\n');
        at += n;
    }
    out
}

pub fn dorabella(args: &DorabellaArgs) -> CliResult<Output> {
    let mut manifest = RunManifest::new("dorabella");
    let text = read_input(&mut manifest, &args.transcription)?;
    let lines = parse_dorabella_lines(&text)
        .map_err(|e| CliError::Data(format!("{}: {e}", args.transcription.display())))?;
    let line_lengths: Vec<usize> = lines.iter().map(Sequence::len).collect();
    let tokens: Vec<usize> = lines.iter().flat_map(|s| s.tokens().iter().copied()).collect();
    let cipher_alphabet = builtin_alphabet("dorabella").unwrap();
    let ciphertext = Sequence::new(cipher_alphabet, tokens)?;

    let mut warnings = Vec::new();
    if ciphertext.len() != DORABELLA_LENGTH {
        warnings.push(format!(
            "transcription has {} glyphs, expected {DORABELLA_LENGTH}; proceeding",
            ciphertext.len()
        ));
    }

    let model = load_model(&mut manifest, &args.model)?;
    if model.alphabet().len() != ciphertext.alphabet().len() {
        return Err(CliError::Data(format!(
            "model alphabet `{}` has {} symbols; the Dorabella alphabet has 24",
            model.alphabet().name(),
            model.alphabet().len()
        )));
    }

    let (key, log_prob, restart) = match &args.key {
        Some(path) => {
            let key_text = read_input(&mut manifest, path)?;
            let key = Key::from_text(&key_text, builtin_alphabet)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            if key.plain_alphabet() != model.alphabet() || key.cipher_alphabet() != ciphertext.alphabet() {
                return Err(CliError::Data(format!(
                    "key maps `{}` to `{}`; expected `{}` to `dorabella`",
                    key.plain_alphabet().name(),
                    key.cipher_alphabet().name(),
                    model.alphabet().name()
                )));
            }
            let lp = model.log_prob(&key.decipher(&ciphertext)?)?;
            (key, lp, None)
        }
        None => {
            let seed = args
                .seed
                .ok_or_else(|| CliError::Usage("--seed is required".into()))?;
            let config = solver_config(&args.search, seed, &mut manifest)?;
            let result = solve(&ciphertext, &model, &config)?;
            check_score(&model, &result.best_plaintext, result.best_log_prob)?;
            (result.best_key, result.best_log_prob, Some(result.best_restart))
        }
    };
    let melody = key.decipher(&ciphertext)?;
    let abc = melody_to_abc(&melody, "Dorabella decipherment")?;

    let mut out = String::new();
    out.push_str("# melody\n");
    out.push_str(&melody_lines(&melody, &line_lengths));
    out.push_str("\n# key\n");
    out.push_str(&key.to_text());
    out.push_str("\n# score\n");
    writeln!(out, "log_prob {log_prob:.9}").unwrap();
    writeln!(out, "perplexity {:.6}", (-log_prob / melody.len() as f64).exp()).unwrap();
    if let Some(r) = restart {
        writeln!(out, "best_restart {r}").unwrap();
    }
    out.push_str("\n# abc\n");
    out.push_str(&abc);
    out.push('\n');
    out.push_str(&manifest.to_block("#"));

    let mut output = Output::new(out, args.out.clone());
    output.warnings = warnings;
    if let Some(path) = &args.abc {
        output.extra.push((path.clone(), abc + &manifest.to_block("%")));
    }
    Ok(output)
}
