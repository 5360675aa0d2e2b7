use std::fmt;
use std::fs;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use serde::{Deserialize, Serialize};
use smfp_core::envs::{make_env, ActionBox, MIXTURE_MEANS};
use smfp_core::nets::Checkpoint;
use smfp_core::oracles::{checks, mode_coverage, modes_covered};
use smfp_core::trainer::{evaluate, policy_samples, ActorKind, MetricsRow, TrainConfig, Trainer, METRICS_HEADER};
use smfp_core::Error;

use crate::svg;

pub const MODE_SAMPLES: usize = 5000;
pub const MODE_RADIUS: f64 = 0.2;
pub const MODE_MIN_MASS: f64 = 0.1;
const BANDIT: &str = "gaussian_mixture_bandit";

#[derive(Debug)]
pub struct CliError {
    code: u8,
    msg: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError { code: 2, msg: msg.into() }
    }

    fn io(path: &Path, e: impl fmt::Display) -> Self {
        CliError { code: 1, msg: format!("{}: {e}", path.display()) }
    }

    pub fn code(&self) -> u8 {
        self.code
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::NonFinite { .. } => 3,
            Error::Io(_) => 1,
            _ => 2,
        };
        CliError { code, msg: e.to_string() }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("plain data serialises") + "\n"
}

fn now() -> String {
    humantime::format_rfc3339_seconds(SystemTime::now()).to_string()
}

fn load_config(path: &Path, seed: Option<u64>, steps: Option<u64>) -> Result<TrainConfig> {
    let text = read_to_string(path)?;
    let mut cfg = TrainConfig::from_text(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = steps {
        // Short runs keep half their budget for learning.
        cfg.total_steps = n;
        cfg.warmup_random_steps = cfg.warmup_random_steps.min(n / 2);
    }
    cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(cfg)
}

#[derive(Serialize)]
struct OutputPaths {
    metrics: PathBuf,
    checkpoints: PathBuf,
    final_checkpoint: PathBuf,
    completion: PathBuf,
}

#[derive(Serialize)]
struct RunManifest {
    run_id: String,
    config: String,
    code_version: &'static str,
    seed: u64,
    start_time: String,
    /// Recorded in `completion.json` so the manifest is never rewritten.
    end_time: Option<String>,
    outputs: OutputPaths,
}

#[derive(Serialize)]
struct Completion {
    run_id: String,
    end_time: String,
    env_steps: u64,
    grad_steps: u64,
}

fn checkpoint_path(out: &Path, step: u64) -> PathBuf {
    out.join(format!("ckpt_{step}.bin"))
}

/// Train to completion under `out`, streaming rows to `metrics.csv`.
fn train_into(cfg: TrainConfig, out: &Path) -> Result<Trainer> {
    create_dir(out)?;
    let mut trainer = Trainer::new(cfg)?;
    let metrics = out.join("metrics.csv");
    let file = fs::File::create(&metrics).map_err(|e| CliError::io(&metrics, e))?;
    let mut csv = BufWriter::new(file);
    writeln!(csv, "{METRICS_HEADER}").map_err(|e| CliError::io(&metrics, e))?;
    let every = trainer.cfg.checkpoint_every;
    let mut io_err = None;
    let run = trainer.run(|t, row| {
        let step = t.env_step();
        let res = writeln!(csv, "{}", row.to_csv()).and_then(|_| csv.flush()).map_err(|e| CliError::io(&metrics, e));
        let res = res.and_then(|_| {
            if every > 0 && step % every == 0 && step < t.cfg.total_steps {
                let path = checkpoint_path(out, step);
                t.to_checkpoint().save(&path).map_err(|e| CliError::io(&path, e))?;
            }
            Ok(())
        });
        if let Err(e) = res {
            io_err = Some(e);
            return Err(Error::Invalid("output write failed".into()));
        }
        Ok(())
    });
    if let Some(e) = io_err {
        return Err(e);
    }
    run?;
    let last = out.join("ckpt_final.bin");
    trainer.to_checkpoint().save(&last).map_err(|e| CliError::io(&last, e))?;
    Ok(trainer)
}

pub fn train(config: &Path, out: &Path, seed: Option<u64>, steps: Option<u64>) -> Result<()> {
    let cfg = load_config(config, seed, steps)?;
    create_dir(out)?;
    let start = now();
    let run_id = format!("{}-seed{}-{}", cfg.env, cfg.seed, start.replace(':', ""));
    let manifest = RunManifest {
        run_id: run_id.clone(),
        config: cfg.to_text(),
        code_version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        start_time: start,
        end_time: None,
        outputs: OutputPaths {
            metrics: out.join("metrics.csv"),
            checkpoints: out.join("ckpt_{step}.bin"),
            final_checkpoint: out.join("ckpt_final.bin"),
            completion: out.join("completion.json"),
        },
    };
    write(&out.join("manifest.json"), to_json(&manifest))?;
    let trainer = train_into(cfg, out)?;
    let done = Completion { run_id, end_time: now(), env_steps: trainer.env_step(), grad_steps: trainer.grad_step() };
    write(&out.join("completion.json"), to_json(&done))?;
    println!("trained {} env steps, {} gradient steps; outputs in {}", trainer.env_step(), trainer.grad_step(), out.display());
    Ok(())
}

#[derive(Serialize, Deserialize)]
pub struct EvalReport {
    pub env: String,
    pub episodes: usize,
    pub seed: u64,
    pub mean: f64,
    pub std: f64,
    pub returns: Vec<f64>,
}

pub fn eval(checkpoint: &Path, env: Option<&str>, episodes: usize, seed: u64, out: Option<&Path>) -> Result<()> {
    let ckpt = Checkpoint::load(checkpoint).map_err(|e| CliError::usage(format!("{}: {e}", checkpoint.display())))?;
    let trainer = Trainer::from_checkpoint(&ckpt)?;
    let env = env.unwrap_or(&trainer.cfg.env).to_string();
    let trained = make_env(&trainer.cfg.env, 0).map_err(Error::from)?;
    let target = make_env(&env, 0).map_err(Error::from)?;
    let (a, b) = (trained.spec(), target.spec());
    if (a.state_dim, a.action_dim) != (b.state_dim, b.action_dim) {
        return Err(CliError::usage(format!(
            "checkpoint expects state/action dims {}/{} but {env} has {}/{}",
            a.state_dim, a.action_dim, b.state_dim, b.action_dim
        )));
    }
    if episodes == 0 {
        return Err(CliError::usage("--episodes must be at least 1"));
    }
    let r = evaluate(&trainer.policy(), &env, episodes, seed)?;
    println!("{env}: {:.4} ± {:.4} over {episodes} episodes", r.mean, r.std);
    let report = EvalReport { env, episodes, seed, mean: r.mean, std: r.std, returns: r.returns };
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| checkpoint.with_file_name("eval.json"));
    write(&path, to_json(&report))
}

pub fn check(suite: &str) -> Result<()> {
    if !checks::SUITES.contains(&suite) {
        return Err(CliError::usage(format!("unknown suite {suite:?}; expected one of {}", checks::SUITES.join(", "))));
    }
    let outcomes = checks::run_suite(suite)?;
    let mut failed = 0;
    for o in &outcomes {
        println!("{} {}/{}: {}", if o.passed { "PASS" } else { "FAIL" }, o.suite, o.name, o.detail);
        failed += usize::from(!o.passed);
    }
    println!("{} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        return Err(CliError { code: 1, msg: format!("{failed} check(s) failed") });
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
pub struct ArmCoverage {
    pub arm: String,
    pub coverage: Vec<f64>,
    pub modes_covered: usize,
}

#[derive(Serialize, Deserialize)]
pub struct CoverageReport {
    pub seed: u64,
    pub samples: usize,
    pub radius: f64,
    pub min_mass: f64,
    pub arms: Vec<ArmCoverage>,
}

/// The three arms of the mode experiment derived from one base config.
pub fn mode_arms(base: &TrainConfig) -> Vec<(&'static str, TrainConfig)> {
    let smfp = TrainConfig { actor: ActorKind::Smfp, ..base.clone() };
    let no_floor = TrainConfig { alpha: 0.0, ..smfp.clone() };
    let gaussian = TrainConfig { actor: ActorKind::Gaussian, ..base.clone() };
    vec![("smfp", smfp), ("smfp_alpha0", no_floor), ("gaussian", gaussian)]
}

pub fn modes(config: &Path, out: &Path, seed: Option<u64>, steps: Option<u64>) -> Result<()> {
    let base = load_config(config, seed, steps)?;
    if base.env != BANDIT {
        return Err(CliError::usage(format!("modes needs env = {BANDIT}, got {}", base.env)));
    }
    create_dir(out)?;
    let arms = mode_arms(&base);
    let trained: Vec<Result<Trainer>> = std::thread::scope(|s| {
        let handles: Vec<_> = arms.iter().map(|(name, cfg)| s.spawn(move || train_into(cfg.clone(), &out.join(name)))).collect();
        handles.into_iter().map(|h| h.join().expect("arm thread panicked")).collect()
    });
    let state = make_env(BANDIT, base.seed).map_err(Error::from)?.reset(Some(base.seed));
    let lim = ActionBox::symmetric(2, 1.0).high()[0];
    let mut report = CoverageReport { seed: base.seed, samples: MODE_SAMPLES, radius: MODE_RADIUS, min_mass: MODE_MIN_MASS, arms: vec![] };
    for ((name, _), t) in arms.iter().zip(trained) {
        let t = t?;
        let samples = policy_samples(&t.agent, &state, MODE_SAMPLES, base.seed)?;
        let coverage = mode_coverage(&samples, &MIXTURE_MEANS, MODE_RADIUS)?;
        let covered = modes_covered(&coverage, MODE_MIN_MASS);
        println!("{name}: coverage {coverage:?}, {covered} mode(s) at >= {MODE_MIN_MASS}");
        let pts: Vec<(f64, f64)> = (0..samples.rows()).map(|i| (samples.get(i, 0), samples.get(i, 1))).collect();
        write(&out.join(format!("{name}.svg")), svg::scatter(&pts, &MIXTURE_MEANS, MODE_RADIUS, lim, name))?;
        report.arms.push(ArmCoverage { arm: name.to_string(), coverage, modes_covered: covered });
    }
    write(&out.join("coverage.json"), to_json(&report))
}

enum Input {
    Metrics(Vec<MetricsRow>),
    Eval(EvalReport),
}

fn read_input(path: &Path) -> Result<Input> {
    let text = read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let r: EvalReport = serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: not an eval report: {e}", path.display())))?;
        return Ok(Input::Eval(r));
    }
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(METRICS_HEADER) {
        return Err(CliError::usage(format!("{}: header does not match the metrics schema", path.display())));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row = MetricsRow::from_csv(line).ok_or_else(|| CliError::usage(format!("{}: malformed row {}", path.display(), i + 2)))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::usage(format!("{}: no data rows", path.display())));
    }
    Ok(Input::Metrics(rows))
}

fn label(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    match path.parent().and_then(Path::file_name) {
        Some(dir) => format!("{}/{stem}", dir.to_string_lossy()),
        None => stem,
    }
}

pub fn plot(inputs: &[PathBuf], out: &Path) -> Result<()> {
    let parsed = inputs.iter().map(|p| read_input(p)).collect::<Result<Vec<_>>>()?;
    let metrics = parsed.iter().filter(|i| matches!(i, Input::Metrics(_))).count();
    if metrics != 0 && metrics != parsed.len() {
        return Err(CliError::usage("cannot mix metrics CSVs and eval JSONs in one plot"));
    }
    let mut series = Vec::new();
    for (path, input) in inputs.iter().zip(parsed) {
        let points: Vec<(f64, f64)> = match input {
            Input::Metrics(rows) => rows.iter().filter_map(|r| r.eval_mean.map(|m| (r.env_step as f64, m))).collect(),
            Input::Eval(r) => r.returns.iter().enumerate().map(|(i, &v)| ((i + 1) as f64, v)).collect(),
        };
        if points.is_empty() {
            return Err(CliError::usage(format!("{}: no data rows with an evaluation return", path.display())));
        }
        series.push(svg::Series { label: label(path), points });
    }
    let (x, y) = if metrics > 0 { ("environment step", "eval return") } else { ("episode", "return") };
    write(out, svg::line_chart(&series, x, y))
}
