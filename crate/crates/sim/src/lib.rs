//! Experiment runner for the IIAB simulator: configuration, seeded runs,
//! exhaustive checks, JSON-lines traces, summaries and replay.

pub mod config;
pub mod exhaustive;
pub mod registry;
pub mod run;
pub mod trace;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

pub use config::{ExperimentConfig, Mode};
pub use run::{run_seed, RunSummary, VERSION};

/// Aggregate over the runs of one experiment, sorted by seed order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: u32,
    pub version: String,
    pub mode: Mode,
    pub runs: u64,
    pub completed_runs: u64,
    pub undecided_runs: u64,
    /// Statistics of the round at which the last processor decided, over
    /// runs where everyone decided.
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub p95: Option<u32>,
    /// Runs with an Agreement, Validity or irrevocability violation.
    pub violations: u64,
    pub aborts: u64,
    /// Runs with a liveness bound that was not met.
    pub bound_exceeded: u64,
    pub per_run: Vec<RunSummary>,
}

impl Summary {
    pub fn from_runs(mode: Mode, per_run: Vec<RunSummary>) -> Summary {
        let mut rounds: Vec<u32> = per_run.iter().filter_map(|r| r.completed_at).collect();
        rounds.sort_unstable();
        let n = rounds.len();
        let mean = (n > 0).then(|| rounds.iter().map(|r| f64::from(*r)).sum::<f64>() / n as f64);
        let median = (n > 0).then(|| {
            if n % 2 == 1 {
                f64::from(rounds[n / 2])
            } else {
                (f64::from(rounds[n / 2 - 1]) + f64::from(rounds[n / 2])) / 2.0
            }
        });
        let p95 = (n > 0).then(|| rounds[(n * 95).div_ceil(100) - 1]);
        Summary {
            schema: config::SCHEMA,
            version: VERSION.into(),
            mode,
            runs: per_run.len() as u64,
            completed_runs: n as u64,
            undecided_runs: (per_run.len() - n) as u64,
            mean,
            median,
            p95,
            violations: per_run.iter().filter(|r| !r.safe()).count() as u64,
            aborts: per_run.iter().filter(|r| r.error.is_some()).count() as u64,
            bound_exceeded: per_run.iter().filter(|r| r.within_bound() == Some(false)).count() as u64,
            per_run,
        }
    }
}

/// What an experiment produced.
#[derive(Debug)]
pub struct Outcome {
    pub summary: Json,
    /// Exit-status verdict: no safety violation, no abort and, when
    /// expected, every run decided.
    pub ok: bool,
    pub written: Vec<PathBuf>,
}

fn write(path: PathBuf, text: &str, written: &mut Vec<PathBuf>) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    written.push(path);
    Ok(())
}

pub fn trace_file_name(seed: u64) -> String {
    format!("seed-{seed}.jsonl")
}

/// Runs every seed of a simulate or montecarlo config in parallel, without
/// touching the file system.
pub fn run_seeds(cfg: &ExperimentConfig, links: bool) -> anyhow::Result<Vec<run::RunRecord>> {
    cfg.seeds
        .seeds()
        .par_iter()
        .map(|s| run_seed(cfg, *s, links).map_err(anyhow::Error::from))
        .collect()
}

fn exhaustive_document(cfg: &ExperimentConfig) -> anyhow::Result<(Json, bool)> {
    let spec = cfg.check.as_ref().context("exhaustive mode needs a `check` entry")?;
    let report = exhaustive::run_check(spec).map_err(|e| anyhow::anyhow!("{e}"))?;
    let doc = json!({
        "schema": config::SCHEMA,
        "version": VERSION,
        "config": cfg,
        "report": exhaustive::report_json(&report),
    });
    Ok((doc, report.is_clean()))
}

/// Executes `cfg` and writes its artifacts under [`ExperimentConfig::out_dir`].
pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    cfg.validate()?;
    let dir = cfg.out_dir();
    let mut written = Vec::new();
    match cfg.mode {
        Mode::Exhaustive => {
            let (doc, ok) = exhaustive_document(cfg)?;
            write(dir.join("report.json"), &pretty(&doc), &mut written)?;
            Ok(Outcome {
                summary: doc,
                ok,
                written,
            })
        }
        Mode::Simulate | Mode::Montecarlo => {
            let traces = cfg.mode == Mode::Simulate && cfg.output.traces;
            let records = run_seeds(cfg, traces && cfg.output.links)?;
            if traces {
                for r in &records {
                    write(dir.join("traces").join(trace_file_name(r.summary.seed)), &r.trace, &mut written)?;
                }
            }
            let summary = Summary::from_runs(cfg.mode, records.into_iter().map(|r| r.summary).collect());
            let ok = summary.violations == 0
                && summary.aborts == 0
                && (!cfg.expect_liveness || summary.undecided_runs == 0);
            let doc = serde_json::to_value(&summary)?;
            write(dir.join("summary.json"), &pretty(&doc), &mut written)?;
            Ok(Outcome {
                summary: doc,
                ok,
                written,
            })
        }
    }
}

fn pretty(j: &Json) -> String {
    let mut s = serde_json::to_string_pretty(j).expect("json");
    s.push('\n');
    s
}

/// Re-executes a trace or an exhaustive report and byte-compares the result.
/// A pinned `seed` that differs from the artifact's is refused.
pub fn replay_text(text: &str, seed: Option<u64>) -> anyhow::Result<Json> {
    let first = text.lines().next().context("empty artifact")?;
    let head: Json = serde_json::from_str(first).or_else(|_| serde_json::from_str(text))?;
    if let Some(h) = head.get("header") {
        let version = h.get("version").and_then(Json::as_str).unwrap_or("?");
        if version != VERSION {
            bail!("artifact from version {version}, this is {VERSION}");
        }
        let pinned = h.get("seed").and_then(Json::as_u64).context("header has no seed")?;
        if let Some(s) = seed {
            if s != pinned {
                bail!("artifact pins seed {pinned}; refusing to replay under seed {s}");
            }
        }
        let links = h.get("links").and_then(Json::as_bool).unwrap_or(false);
        let cfg: ExperimentConfig = serde_json::from_value(h.get("config").cloned().context("header has no config")?)?;
        let again = run_seed(&cfg, pinned, links)?;
        if again.trace != text {
            bail!("replay diverged from the recorded trace (determinism bug)");
        }
        return Ok(serde_json::to_value(&again.summary)?);
    }
    if head.get("report").is_some() {
        let version = head.get("version").and_then(Json::as_str).unwrap_or("?");
        if version != VERSION {
            bail!("artifact from version {version}, this is {VERSION}");
        }
        if seed.is_some() {
            bail!("exhaustive reports are not seeded");
        }
        let cfg: ExperimentConfig = serde_json::from_value(head["config"].clone())?;
        let (doc, _) = exhaustive_document(&cfg)?;
        if pretty(&doc) != text {
            bail!("replay diverged from the recorded report (determinism bug)");
        }
        return Ok(doc["report"].clone());
    }
    bail!("not a trace or report artifact")
}

pub fn replay_file(path: &Path, seed: Option<u64>) -> anyhow::Result<Json> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    replay_text(&text, seed)
}

/// Reads and validates a config, optionally forcing its mode first.
pub fn load_config(path: &Path, mode: Option<Mode>) -> anyhow::Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text).map_err(config::ConfigError::from)?;
    if let Some(m) = mode {
        cfg.mode = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(completed: &[Option<u32>]) -> Summary {
        let runs = completed
            .iter()
            .enumerate()
            .map(|(i, c)| RunSummary {
                seed: i as u64,
                decided: Default::default(),
                decision_round: Default::default(),
                agreement_ok: true,
                validity_ok: true,
                irrevocable_ok: true,
                rounds_run: 0,
                completed_at: *c,
                stabilization_round: None,
                impersonated_after_stabilization: None,
                b: None,
                liveness_bound: None,
                error: None,
            })
            .collect();
        Summary::from_runs(Mode::Montecarlo, runs)
    }

    #[test]
    fn statistics() {
        let s = summary(&[Some(10), Some(20), Some(30), None]);
        assert_eq!((s.mean, s.median, s.p95), (Some(20.0), Some(20.0), Some(30)));
        assert_eq!(s.undecided_runs, 1);
        let s = summary(&(1..=100).map(Some).collect::<Vec<_>>());
        assert_eq!((s.median, s.p95), (Some(50.5), Some(95)));
        assert_eq!(summary(&[None]).mean, None);
    }
}
