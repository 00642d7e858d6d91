use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use satuav::planner::{train_dqn, OracleGrid};
use satuav::scenario::{parse_scenario, validate_scenario, write_scenario};
use satuav::sim::sweep::write_sweep_csv;
use satuav::sim::{run_mission, run_sweep, SweepAxis};
use satuav::{Error, MissionScenario, PlannerSource, QNetwork};

use crate::manifest::{sha256_hex, RunManifest};

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(error: anyhow::Error) -> Self {
        Self { code: 1, error }
    }

    pub fn config(error: anyhow::Error) -> Self {
        Self { code: 2, error }
    }

    pub fn runtime(error: anyhow::Error) -> Self {
        Self { code: 3, error }
    }

    pub fn audit(error: anyhow::Error) -> Self {
        Self { code: 4, error }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidScenario(_) | Error::Parse(_) => Failure::config(e.into()),
            Error::InvalidArgument { .. } => Failure::usage(e.into()),
            _ => Failure::runtime(e.into()),
        }
    }
}

fn io_failure(e: std::io::Error, what: &Path) -> Failure {
    Failure::runtime(anyhow!(e).context(format!("writing {}", what.display())))
}

/// Reads a file named on the command line; a missing file is a usage error.
fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    if !path.exists() {
        return Err(Failure::usage(anyhow!("{} does not exist", path.display())));
    }
    std::fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::usage)
}

fn load_config(path: Option<&Path>) -> Result<(MissionScenario, Option<String>), Failure> {
    match path {
        None => Ok((MissionScenario::baseline(), None)),
        Some(p) => {
            let bytes = read_input(p)?;
            let text = String::from_utf8(bytes.clone())
                .map_err(|_| Failure::config(anyhow!("{} is not UTF-8", p.display())))?;
            let s = parse_scenario(&text).map_err(|e| {
                Failure::from(e).with_context(format!("loading {}", p.display()))
            })?;
            Ok((s, Some(sha256_hex(&bytes))))
        }
    }
}

impl Failure {
    fn with_context(self, ctx: String) -> Self {
        Self {
            code: self.code,
            error: self.error.context(ctx),
        }
    }
}

pub fn fresh_manifest(
    subcommand: &str,
    config: &Option<PathBuf>,
    seed: Option<u64>,
    out: &Path,
) -> Result<RunManifest, Failure> {
    let (s, hash) = load_config(config.as_deref())?;
    let mut m = RunManifest::new(subcommand, out, seed.unwrap_or(s.rng_seed));
    m.config = config.as_ref().map(|p| p.display().to_string());
    m.config_hash = hash;
    Ok(m)
}

pub fn attach_planner(m: &mut RunManifest, weights: Option<&Path>, oracle: bool) -> Result<(), Failure> {
    if oracle {
        m.oracle = true;
        return Ok(());
    }
    let Some(w) = weights else {
        return Err(Failure::usage(anyhow!("give --weights PATH or --oracle")));
    };
    m.weights = Some(w.display().to_string());
    m.weights_hash = Some(sha256_hex(&read_input(w)?));
    Ok(())
}

fn check_hash(path: &str, expected: &Option<String>, what: &str) -> Result<(), Failure> {
    let actual = sha256_hex(&read_input(Path::new(path))?);
    if expected.as_deref() != Some(actual.as_str()) {
        return Err(Failure::config(anyhow!(
            "{what} {path} changed since the manifest was written"
        )));
    }
    Ok(())
}

fn planner_source(m: &RunManifest) -> Result<PlannerSource, Failure> {
    if m.oracle {
        return Ok(PlannerSource::Oracle(OracleGrid::default()));
    }
    let path = m
        .weights
        .as_deref()
        .ok_or_else(|| Failure::usage(anyhow!("manifest names neither weights nor the oracle")))?;
    check_hash(path, &m.weights_hash, "weights file")?;
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {path}"))
        .map_err(Failure::usage)?;
    let net = QNetwork::from_json(&text).map_err(|e| Failure::config(e.into()))?;
    Ok(PlannerSource::Dqn(net))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| io_failure(e, &path))
}

fn finish(mut w: BufWriter<File>, dir: &Path, name: &str) -> Result<(), Failure> {
    w.flush().map_err(|e| io_failure(e, &dir.join(name)))?;
    eprintln!("wrote {}", dir.join(name).display());
    Ok(())
}

/// Runs the work a manifest describes. The manifest is written first.
pub fn execute(m: &RunManifest) -> Result<(), Failure> {
    let mut s = match &m.config {
        Some(path) => {
            check_hash(path, &m.config_hash, "config")?;
            load_config(Some(Path::new(path)))?.0
        }
        None => MissionScenario::baseline(),
    };
    s.rng_seed = m.seed;
    if let Some(v) = m.upload_during_hover {
        s.mission.upload_during_hover = v;
    }
    if m.force_interval.is_some() {
        s.mission.forced_sensing_interval = m.force_interval;
    }
    let bad = validate_scenario(&s);
    if !bad.is_empty() {
        return Err(Error::InvalidScenario(bad).into());
    }

    let out = Path::new(&m.out_dir);
    std::fs::create_dir_all(out).map_err(|e| io_failure(e, out))?;
    m.write(out).map_err(|e| io_failure(e, out))?;

    match m.subcommand.as_str() {
        "train" => train(&s, m.seed, out),
        "simulate" => simulate(&s, &planner_source(m)?, m.seed, out),
        "sweep" => {
            let axis: SweepAxis = m
                .axis
                .as_deref()
                .ok_or_else(|| Failure::usage(anyhow!("sweep needs --axis")))?
                .parse()?;
            let values = m.values.as_deref().unwrap_or_default();
            if values.is_empty() {
                return Err(Failure::usage(anyhow!("sweep needs at least one value")));
            }
            sweep(&s, &planner_source(m)?, axis, values, m.seed, out)
        }
        other => Err(Failure::usage(anyhow!("unknown subcommand `{other}` in manifest"))),
    }
}

fn train(s: &MissionScenario, seed: u64, out: &Path) -> Result<(), Failure> {
    let (net, log) = train_dqn(s, seed)?;
    let mut w = create(out, "weights.json")?;
    w.write_all(net.to_json().as_bytes())
        .map_err(|e| io_failure(e, &out.join("weights.json")))?;
    finish(w, out, "weights.json")?;
    let mut w = create(out, "training.csv")?;
    log.write_csv(&mut w)?;
    finish(w, out, "training.csv")
}

fn simulate(s: &MissionScenario, planner: &PlannerSource, seed: u64, out: &Path) -> Result<(), Failure> {
    let run = run_mission(s, planner, seed)?;
    let mut w = create(out, "mission.csv")?;
    run.log.write_csv(&mut w)?;
    finish(w, out, "mission.csv")?;
    let mut w = create(out, "sensing.csv")?;
    run.log.write_sensing_csv(&mut w)?;
    finish(w, out, "sensing.csv")?;
    let mut w = create(out, "result.json")?;
    serde_json::to_writer_pretty(&mut w, &run.result).map_err(|e| Failure::runtime(e.into()))?;
    finish(w, out, "result.json")?;
    if !run.result.audit_passed {
        let failed: Vec<String> = run
            .result
            .audit
            .iter()
            .filter(|a| !a.passed)
            .map(|a| match a.witness_slot {
                Some(slot) => format!("{} at slot {slot}", a.constraint),
                None => a.constraint.clone(),
            })
            .collect();
        return Err(Failure::audit(anyhow!("constraint audit failed: {}", failed.join(", "))));
    }
    Ok(())
}

fn sweep(
    s: &MissionScenario,
    planner: &PlannerSource,
    axis: SweepAxis,
    values: &[f64],
    seed: u64,
    out: &Path,
) -> Result<(), Failure> {
    let rows = run_sweep(s, planner, axis, values, seed);
    let mut w = create(out, "sweep.csv")?;
    write_sweep_csv(&rows, &mut w)?;
    finish(w, out, "sweep.csv")?;
    for r in &rows {
        if let Err(e) = &r.outcome {
            eprintln!("{} = {}: {e}", axis.as_str(), r.value);
        }
    }
    if rows.iter().all(|r| r.outcome.is_err()) {
        return Err(Failure::runtime(anyhow!("every sweep run failed")));
    }
    Ok(())
}

pub fn rerun(manifest: &Path, out: Option<&Path>) -> Result<(), Failure> {
    read_input(manifest)?;
    let mut m = RunManifest::read(manifest).map_err(Failure::config)?;
    if let Some(dir) = out {
        m.out_dir = dir.display().to_string();
    }
    execute(&m)
}

pub fn dump_config(config: Option<&Path>) -> Result<(), Failure> {
    let (s, _) = load_config(config)?;
    println!("{}", write_scenario(&s));
    Ok(())
}

pub fn self_check() -> Result<(), Failure> {
    let reports = satuav::validation::self_check()?;
    let mut failed = 0;
    for r in &reports {
        println!("{}", serde_json::to_string(r).expect("report serializes"));
        if !r.passed && !r.informational {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(Failure::runtime(anyhow!("{failed} of {} gated checks failed", reports.iter().filter(|r| !r.informational).count())));
    }
    Ok(())
}
