use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use quadbench::bench::{average_runs, compare, evaluate_sequence, pool_runs, RunResult};
use quadbench::config::{Aggregation, ModelKind, RunConfig};
use quadbench::data::{preprocess_pipeline, FlightLog, RawLog};
use quadbench::estimate::estimate_coefficients;
use quadbench::models::{Checkpoint, Model, Sequence};
use quadbench::par::Exec;
use quadbench::sim::simulate_flight;
use quadbench::trajectory::{TrajectoryKind, TrajectorySpec};
use serde_json::json;

use crate::{Cli, Command, EstimateArgs, EvaluateArgs, PreprocessArgs, ReportArgs, SimulateArgs, TrainArgs, TrajSelection};

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(h) = cli.horizon {
        cfg.horizon = h;
    }
    cfg.validate()?;
    match cli.command {
        Command::Simulate(a) => simulate(&cfg, a),
        Command::Preprocess(a) => preprocess(&cfg, a),
        Command::Estimate(a) => estimate(&cfg, a),
        Command::Train(a) => train(cfg, a, cli.exec),
        Command::Evaluate(a) => evaluate(&cfg, a, cli.exec),
        Command::Report(a) => report(a),
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Expands directories into their CSV files, sorted by name.
fn csv_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                .collect();
            found.sort();
            out.extend(found);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            bail!("{} does not exist", p.display());
        }
    }
    Ok(out)
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Files whose name starts with one of the trajectory names.
fn select(files: Vec<PathBuf>, kinds: &[TrajectoryKind]) -> Vec<PathBuf> {
    files
        .into_iter()
        .filter(|f| {
            let s = stem(f).to_ascii_lowercase();
            kinds.iter().any(|k| s.starts_with(k.name()))
        })
        .collect()
}

fn parse_kinds(names: &Option<Vec<String>>, default: &[TrajectoryKind]) -> Result<Vec<TrajectoryKind>> {
    match names {
        None => Ok(default.to_vec()),
        Some(v) => v.iter().map(|n| n.parse::<TrajectoryKind>().map_err(|e| anyhow::anyhow!("{e}"))).collect(),
    }
}

fn load_logs(files: &[PathBuf]) -> Result<Vec<(String, FlightLog)>> {
    files
        .iter()
        .map(|f| Ok((stem(f), FlightLog::read_csv(f).with_context(|| format!("loading {}", f.display()))?)))
        .collect()
}

fn simulate(cfg: &RunConfig, a: SimulateArgs) -> Result<()> {
    let kinds = match a.traj {
        TrajSelection::All => TrajectoryKind::BENCHMARK.to_vec(),
        TrajSelection::One(k) => vec![k],
    };
    if a.runs == 0 {
        bail!("--runs must be at least 1");
    }
    let mut cfg = cfg.clone();
    if let Some(d) = a.drag {
        cfg.synthetic_drag = d;
    }
    let hash = cfg.hash();
    let out = a.out.unwrap_or_else(|| cfg.data_dir.clone());
    for kind in kinds {
        for run in 0..a.runs {
            let seed = cfg.seed + run as u64;
            let mut spec = TrajectorySpec::new(kind).with_seed(seed);
            spec.sample_rate = cfg.fs;
            if let Some(d) = a.duration {
                spec = spec.with_duration(d);
            }
            let sim = simulate_flight(&spec, &cfg.sim(seed)).with_context(|| format!("simulating {kind} run {run}"))?;
            let name = format!("{}_{run}", kind.name());
            let csv = out.join(format!("{name}.csv"));
            write(&csv, &sim.log.to_csv_string())?;
            let meta = json!({
                "config_hash": hash,
                "trajectory": kind,
                "run": run,
                "trajectory_seed": seed,
                "noise_seed": seed,
                "synthetic_drag": cfg.synthetic_drag,
                "report": sim.report,
            });
            write(&out.join(format!("{name}.meta.json")), &serde_json::to_string_pretty(&meta)?)?;
            println!("{} {} rows", csv.display(), sim.log.len());
        }
    }
    Ok(())
}

fn preprocess(cfg: &RunConfig, a: PreprocessArgs) -> Result<()> {
    let mut pc = cfg.pipeline();
    if a.no_filter {
        pc.filter = None;
    }
    let hash = cfg.hash();
    let out = a.out.unwrap_or_else(|| cfg.out_dir.join("preprocessed"));
    for f in csv_files(&a.inputs)? {
        let raw = RawLog::read_csv(&f).with_context(|| format!("loading {}", f.display()))?;
        let (log, mut meta) = preprocess_pipeline(&raw, &pc).with_context(|| format!("preprocessing {}", f.display()))?;
        meta.config_hash = Some(hash.clone());
        let name = stem(&f);
        write(&out.join(format!("{name}.csv")), &log.to_csv_string())?;
        write(&out.join(format!("{name}.meta.json")), &serde_json::to_string_pretty(&meta)?)?;
        println!("{name}: {} rows, sync lag {:?}, motor shift {:?}", meta.rows, meta.sync_lag, meta.motor_shift);
    }
    Ok(())
}

fn estimate(cfg: &RunConfig, a: EstimateArgs) -> Result<()> {
    let kinds = parse_kinds(&a.trajectories, &cfg.train_trajectories)?;
    let files = select(csv_files(&a.inputs)?, &kinds);
    if files.is_empty() {
        bail!("no logs matching {:?}", kinds.iter().map(|k| k.name()).collect::<Vec<_>>());
    }
    let logs = load_logs(&files)?;
    let refs: Vec<(&str, &FlightLog)> = logs.iter().map(|(n, l)| (n.as_str(), l)).collect();
    let report = estimate_coefficients(&refs, &cfg.body)?;
    print!("{}", report.to_table());
    if let Some(p) = a.out {
        let v = json!({ "config_hash": cfg.hash(), "report": report });
        write(&p, &serde_json::to_string_pretty(&v)?)?;
    }
    Ok(())
}

fn train(mut cfg: RunConfig, a: TrainArgs, exec: Exec) -> Result<()> {
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    cfg.validate()?;
    let kinds = parse_kinds(&a.trajectories, &cfg.train_trajectories)?;
    let files = select(csv_files(&a.data)?, &kinds);
    if files.is_empty() {
        bail!("no training logs matching {:?}", kinds.iter().map(|k| k.name()).collect::<Vec<_>>());
    }
    let seqs: Vec<Sequence> = load_logs(&files)?.iter().map(|(n, l)| Sequence::from_log(n.clone(), l)).collect();
    let started = Instant::now();
    let (model, history) = cfg.fit_model(a.model, seqs, exec)?;
    if let Some(h) = &history {
        for (e, l) in h.epoch_loss.iter().enumerate() {
            println!("epoch {:>3} loss {l:.6e}", e + 1);
        }
    }
    let ckpt = Checkpoint { config_hash: Some(cfg.hash()), history, ..Checkpoint::new(model) };
    let out = a.out.unwrap_or_else(|| cfg.checkpoint_dir.join(format!("{}.json", a.model)));
    write(&out, &ckpt.to_json())?;
    println!("{} trained on {} logs in {:.1} s -> {}", a.model, files.len(), started.elapsed().as_secs_f64(), out.display());
    Ok(())
}

fn evaluate(cfg: &RunConfig, a: EvaluateArgs, exec: Exec) -> Result<()> {
    let model = match (&a.checkpoint, a.model) {
        (Some(p), _) => Checkpoint::load(p)?.model,
        (None, Some(k)) if !k.is_trainable() => cfg.build_model(k, &[]),
        (None, Some(k)) => bail!("`{k}` must be trained first; pass --checkpoint"),
        (None, None) => bail!("pass --checkpoint or --model"),
    };
    let kinds = parse_kinds(&a.trajectories, &cfg.test_trajectories)?;
    let files = select(csv_files(&a.data)?, &kinds);
    if files.is_empty() {
        bail!("no test logs matching {:?}", kinds.iter().map(|k| k.name()).collect::<Vec<_>>());
    }
    let started = Instant::now();
    let mut runs = Vec::new();
    let mut names = Vec::new();
    for (name, log) in load_logs(&files)? {
        let seq = Sequence::from_log(name.clone(), &log);
        let m = evaluate_sequence(&model, &seq, &log.states(), cfg.horizon, exec)
            .with_context(|| format!("evaluating on {name}"))?;
        runs.push(m);
        names.push(name);
    }
    let metrics = if a.pooled || cfg.aggregation == Aggregation::Pooled { pool_runs(&runs)? } else { average_runs(&runs)? };
    let label = model_label(&model);
    let result = RunResult {
        model: label.clone(),
        trajectories: names,
        metrics,
        config_hash: Some(cfg.hash()),
        seed: Some(cfg.seed),
        elapsed_s: started.elapsed().as_secs_f64(),
    };
    let out = a.out.unwrap_or_else(|| cfg.out_dir.join(format!("{label}_result.json")));
    write(&out, &serde_json::to_string_pretty(&result)?)?;
    let m = &result.metrics;
    println!(
        "{label}: {} windows, MAE_1:{} p {:.4} m, v {:.4} m/s, R {:.4} rad, w {:.4} rad/s -> {}",
        m.windows,
        m.horizon,
        m.cumulative("p"),
        m.cumulative("v"),
        m.cumulative("R"),
        m.cumulative("w"),
        out.display()
    );
    Ok(())
}

fn model_label(m: &Model) -> String {
    match m {
        Model::Naive => ModelKind::Naive.name().into(),
        Model::Physics { .. } => ModelKind::Physics.name().into(),
        Model::Residual(r) if r.is_hybrid() => ModelKind::Hybrid.name().into(),
        Model::Residual(_) => ModelKind::Residual.name().into(),
        Model::Lstm(_) => ModelKind::Lstm.name().into(),
    }
}

fn report(a: ReportArgs) -> Result<()> {
    let results: Vec<RunResult> = a
        .results
        .iter()
        .map(|p| {
            let s = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&s).with_context(|| format!("parsing {}", p.display()))
        })
        .collect::<Result<_>>()?;
    let rep = compare(&results)?;
    let md = rep.markdown();
    print!("{md}");
    if let Some(dir) = a.out {
        write(&dir.join("report.md"), &md)?;
        write(&dir.join("curves.csv"), &rep.curves_csv())?;
        write(&dir.join("summary.json"), &rep.summary_json())?;
    }
    Ok(())
}
