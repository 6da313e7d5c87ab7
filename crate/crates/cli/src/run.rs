//! Command execution.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde_json::{json, Value};
use tracerecon::channel::{transmit_many, ChannelParams, TraceRecord};
use tracerecon::codedtr::{build_code_greedy, code_rate, decode, EditCode};
use tracerecon::editdist::edit_distance;
use tracerecon::lemmalab::{
    estimate_anchor_correspond, estimate_falsematch, estimate_ontrack, estimate_truematch, estimate_useful_joint,
    LemmaEstimate,
};
use tracerecon::prefixrecon::StrategyRegistry;
use tracerecon::reconstruct::{evaluate, reconstruct_with, GroundTruth};
use tracerecon::{sample_uniform, BitString, RngHandle, Stream};

use crate::config::{CommandKind, ExperimentConfig, Lemma};
use crate::output::{self, Table};

/// Source string and traces for one trial.
fn sample_instance(config: &ExperimentConfig, n: usize, trial: u64) -> Result<(BitString, Vec<TraceRecord>)> {
    let channel = ChannelParams::new(config.q)?;
    let x = sample_uniform(n, &mut RngHandle::new(config.seed, Stream::Source).derive(trial));
    let records = transmit_many(&x, channel, config.trace_count, &RngHandle::new(config.seed, Stream::Retention).derive(trial));
    Ok((x, records))
}

fn traces_of(records: &[TraceRecord]) -> Vec<BitString> {
    records.iter().map(|r| r.trace.clone()).collect()
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().context("starting worker pool")
}

/// Full resolved configuration as embedded in the output.
pub fn resolved_config(config: &ExperimentConfig) -> Result<Value> {
    let params = match config.command {
        CommandKind::Lemmas | CommandKind::Sweep => serde_json::to_value(config.lab_params()?)?,
        _ => serde_json::to_value(config.pipeline_params()?)?,
    };
    Ok(json!({ "experiment": config, "params": params }))
}

fn simulate(config: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new(
        "simulate",
        &["seed", "trial", "n", "q", "T", "source_ones", "expected_len", "mean_len", "min_len", "max_len", "provenance_ok"],
    );
    let rows: Vec<Result<Vec<Value>>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let (x, records) = sample_instance(config, config.n, trial)?;
            let lens: Vec<usize> = records.iter().map(|r| r.trace.len()).collect();
            let ok = records
                .iter()
                .all(|r| (0..r.trace.len()).all(|j| r.trace.get(j) == x.get(r.source_index(j))));
            Ok(vec![
                json!(config.seed),
                json!(trial),
                json!(config.n),
                json!(config.q),
                json!(config.trace_count),
                json!(x.count_ones()),
                json!(config.n as f64 * (1.0 - config.q)),
                json!(lens.iter().sum::<usize>() as f64 / lens.len() as f64),
                json!(lens.iter().min()),
                json!(lens.iter().max()),
                json!(ok),
            ])
        })
        .collect();
    for row in rows {
        table.push(row?);
    }
    Ok(table)
}

fn reconstruct(config: &ExperimentConfig) -> Result<Table> {
    let params = config.pipeline_params()?;
    let registry = StrategyRegistry::with_defaults();
    let mut table = Table::new(
        "reconstruct",
        &["seed", "trial", "n", "q", "T", "K2", "chunks", "coverage", "edit_distance", "normalized_de", "wall_ms"],
    );
    let rows: Vec<Result<Vec<Value>>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let (x, records) = sample_instance(config, config.n, trial)?;
            let started = Instant::now();
            let truth = GroundTruth::from_records(&x, &records);
            let report = reconstruct_with(&traces_of(&records), &params, &registry, Some(&truth))?;
            let metrics = evaluate(&x, &report);
            let wall_ms = started.elapsed().as_millis() as u64;
            let k2 = report.resolved.as_ref().map_or(0, |r| r.schedule.k2());
            Ok(vec![
                json!(config.seed),
                json!(trial),
                json!(config.n),
                json!(config.q),
                json!(config.trace_count),
                json!(k2),
                json!(metrics.chunk_count),
                json!(metrics.coverage),
                json!(metrics.edit_distance.value()),
                json!(metrics.normalized_de),
                json!(wall_ms),
            ])
        })
        .collect();
    for row in rows {
        table.push(row?);
    }
    Ok(table)
}

const LEMMA_COLUMNS: [&str; 9] =
    ["seed", "lemma", "trials", "successes", "point", "wilson_lo", "wilson_hi", "acceptance_rate", "conditions"];

fn lemma_row(seed: u64, label: &str, e: &LemmaEstimate) -> Vec<Value> {
    let conditions: Vec<String> = e.condition_params.iter().map(|(k, v)| format!("{k}={v}")).collect();
    vec![
        json!(seed),
        json!(label),
        json!(e.trials),
        json!(e.successes),
        json!(e.point),
        json!(e.wilson.0),
        json!(e.wilson.1),
        json!(e.acceptance_rate),
        json!(conditions.join(";")),
    ]
}

/// Runs the selected estimator; the joint estimator yields three rows.
fn estimate(config: &ExperimentConfig) -> Result<Vec<(String, LemmaEstimate)>> {
    let lab = config.lab_params()?;
    let rng = RngHandle::new(config.seed, Stream::Harness);
    let which = config.which.context("no estimator selected")?;
    Ok(match which {
        Lemma::Truematch => vec![("truematch".into(), estimate_truematch(config.m, &lab, config.trials, &rng)?)],
        Lemma::Falsematch => vec![("falsematch".into(), estimate_falsematch(config.m, &lab, config.trials, &rng)?)],
        Lemma::Ontrack => vec![("ontrack".into(), estimate_ontrack(&lab, config.trials, &rng)?)],
        Lemma::Useful => {
            let j = estimate_useful_joint(&lab, config.trials, &rng)?;
            vec![
                ("useful_joint".into(), j.useful),
                ("not_useful_joint".into(), j.not_useful),
                ("trace_useful".into(), j.trace_useful),
            ]
        }
        Lemma::Anchor => vec![("anchor_correspond".into(), estimate_anchor_correspond(&lab, config.trials, &rng)?)],
    })
}

fn lemmas(config: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new("lemmas", &LEMMA_COLUMNS);
    for (label, e) in estimate(config)? {
        table.push(lemma_row(config.seed, &label, &e));
    }
    Ok(table)
}

fn sweep(config: &ExperimentConfig) -> Result<Table> {
    let spec = config.sweep.as_ref().context("no sweep parameter")?;
    let mut columns = vec!["param", "value"];
    columns.extend(LEMMA_COLUMNS);
    let mut table = Table::new("sweep", &columns);
    for &value in &spec.values {
        let point = config.with_param(&spec.param, value)?;
        for (label, e) in estimate(&point)? {
            let mut row = vec![json!(spec.param), json!(value)];
            row.extend(lemma_row(config.seed, &label, &e));
            table.push(row);
        }
    }
    Ok(table)
}

fn load_or_build_code(config: &ExperimentConfig) -> Result<EditCode> {
    let code = match &config.code_file {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading code file {}", path.display()))?;
            EditCode::from_text(&text)?
        }
        None => build_code_greedy(config.n, config.radius, &mut RngHandle::new(config.seed, Stream::Harness), config.cap)?,
    };
    if let Err((a, b)) = code.check_separation() {
        bail!("code violates its radius: codewords {a} and {b} are too close");
    }
    if let Some(path) = &config.export_code {
        fs::write(path, code.to_text()).with_context(|| format!("writing code file {}", path.display()))?;
    }
    Ok(code)
}

fn code(config: &ExperimentConfig) -> Result<Table> {
    let code = load_or_build_code(config)?;
    let params = config.pipeline_params()?;
    let channel = ChannelParams::new(config.q)?;
    let mut table = Table::new(
        "code",
        &["seed", "trial", "n", "radius", "code_size", "rate", "q", "T", "sent", "decoded", "correct", "edit_distance"],
    );
    let rows: Vec<Result<Vec<Value>>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            use rand::Rng;
            let sent = RngHandle::new(config.seed, Stream::Source).derive(trial).gen_range(0..code.len());
            let x = &code.codewords[sent];
            let records = transmit_many(x, channel, config.trace_count, &RngHandle::new(config.seed, Stream::Retention).derive(trial));
            let decoded = decode(&traces_of(&records), &code, &params)?;
            let index = code.codewords.iter().position(|c| *c == decoded);
            Ok(vec![
                json!(config.seed),
                json!(trial),
                json!(code.n),
                json!(code.radius),
                json!(code.len()),
                json!(code_rate(&code)),
                json!(config.q),
                json!(config.trace_count),
                json!(sent),
                json!(index),
                json!(index == Some(sent)),
                json!(edit_distance(x, &decoded).value()),
            ])
        })
        .collect();
    for row in rows {
        table.push(row?);
    }
    Ok(table)
}

/// Runs a command and returns its table, without writing anything.
pub fn execute(config: &ExperimentConfig) -> Result<Table> {
    pool(config.jobs)?.install(|| match config.command {
        CommandKind::Simulate => simulate(config),
        CommandKind::Reconstruct => reconstruct(config),
        CommandKind::Lemmas => lemmas(config),
        CommandKind::Sweep => sweep(config),
        CommandKind::Code => code(config),
    })
}

/// Runs a command and writes its output to the configured destination.
pub fn run(config: &ExperimentConfig) -> Result<()> {
    let resolved = resolved_config(config)?;
    // open the destination first so an unwritable path fails before any work
    let out: Box<dyn Write> = match &config.output_path {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("cannot write output file {}", path.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    let table = execute(config)?;
    output::write(out, config.format, &table, &resolved)
}
