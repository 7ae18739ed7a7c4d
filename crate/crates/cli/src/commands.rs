use crate::args::{Cli, Command, Common, EvaluateArgs, OracleArgs, ReplayArgs, SweepArgs, TrainArgs};
use crate::manifest::{timestamp, ConfigSource, RunManifest, CODE_VERSION};
use crate::workers::{default_threads, run_parallel};
use anyhow::{bail, Context};
use chrono::Utc;
use oran_ts::benchmarks::{compare_on, instance_trace, run_learned, run_relaxed_upper_bound, tiny_instance, SchemeId};
use oran_ts::channel::{scenario_topology, GeneratedTraces, TracePhase, TraceSource};
use oran_ts::config::{build_rb_grid, Slice, SystemConfig};
use oran_ts::io::{
    config_to_toml, dump_traces, load_checkpoint_for, load_traces, parse_config, save_checkpoint, write_metrics,
};
use oran_ts::sim::{evaluate, rollout, GreedyAgents, MetricsSeries};
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Sweep(a) => sweep(a),
        Command::Oracle(a) => oracle(a),
        Command::Replay(a) => replay(a),
    }
}

struct Loaded {
    config: SystemConfig,
    source: ConfigSource,
}

fn load(common: &Common, epochs: Option<usize>) -> anyhow::Result<Loaded> {
    let (origin, raw) = match &common.config {
        Some(p) => (p.display().to_string(), std::fs::read(p).with_context(|| format!("cannot read {}", p.display()))?),
        None => ("builtin:desk".to_string(), config_to_toml(&SystemConfig::desk()).into_bytes()),
    };
    let text = String::from_utf8(raw.clone()).with_context(|| format!("{origin} is not UTF-8"))?;
    let mut overrides = common.overrides.clone();
    if let Some(e) = epochs {
        overrides.push(format!("learning.epochs={e}"));
    }
    let config = parse_config(&text, &origin, &overrides)?;
    let source = ConfigSource::new(origin, &raw, &overrides, &config);
    Ok(Loaded { config, source })
}

fn prepare_out(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write_series(series: &MetricsSeries, path: &Path) -> anyhow::Result<()> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    write_metrics(series, BufWriter::new(f)).with_context(|| format!("cannot write {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn learning_curve_csv(curve: &[f64]) -> String {
    let mut s = String::from("epoch,mean_reward\n");
    for (e, r) in curve.iter().enumerate() {
        writeln!(s, "{e},{r}").expect("writing to a String");
    }
    s
}

fn eval_traces(config: &SystemConfig, seed: u64) -> GeneratedTraces {
    GeneratedTraces::new(config, scenario_topology(config, seed), seed, TracePhase::Eval)
}

fn dump_eval(config: &SystemConfig, seed: u64, dir: &Path) -> anyhow::Result<()> {
    let traces = eval_traces(config, seed);
    dump_traces(&traces, config.evaluation.frames, config, &build_rb_grid(config), dir)?;
    Ok(())
}

fn reject_unrunnable(schemes: &[SchemeId]) -> anyhow::Result<()> {
    if schemes.contains(&SchemeId::BruteForce) {
        bail!("brute_force only runs on tiny instances, use the `oracle` subcommand");
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct Job {
    scheme: SchemeId,
    seed: u64,
    power_dbm: Option<f64>,
}

impl Job {
    fn dir_name(&self) -> String {
        match self.power_dbm {
            Some(p) => format!("{}_p{p}_seed{}", self.scheme, self.seed),
            None => format!("{}_seed{}", self.scheme, self.seed),
        }
    }
}

struct JobOutput {
    series: MetricsSeries,
    files: Vec<PathBuf>,
}

/// Trains when the scheme learns, then evaluates. Every worker writes only
/// inside its own directory.
fn run_job(base: &SystemConfig, job: &Job, workers_dir: &Path, dump_root: Option<&Path>) -> anyhow::Result<JobOutput> {
    let mut config = base.clone();
    if let Some(p) = job.power_dbm {
        config.system.max_power_dbm = p;
    }
    let dir = workers_dir.join(job.dir_name());
    prepare_out(&dir)?;
    let mut files = Vec::new();
    let series = if job.scheme.is_learned() {
        let run = run_learned(&config, job.scheme, job.seed, config.learning.epochs);
        let ckpt = dir.join("agents.ckpt");
        save_checkpoint(&run.agents, &ckpt)?;
        let curve = dir.join("learning_curve.csv");
        write_text(&curve, &learning_curve_csv(&run.learning_curve))?;
        files.extend([ckpt, curve]);
        run.series
    } else {
        run_relaxed_upper_bound(&config, job.seed)
    };
    let metrics = dir.join("metrics.csv");
    write_series(&series, &metrics)?;
    files.push(metrics);
    if let Some(root) = dump_root {
        let d = root.join(job.dir_name());
        dump_eval(&job.scheme.config(&config), job.seed, &d)?;
        files.push(d);
    }
    Ok(JobOutput { series, files })
}

fn merge(outputs: Vec<JobOutput>, out: &Path, files: &mut Vec<PathBuf>) -> anyhow::Result<MetricsSeries> {
    let mut all = MetricsSeries::default();
    for o in outputs {
        files.extend(o.files);
        all.extend(o.series);
    }
    let merged = out.join("metrics.csv");
    write_series(&all, &merged)?;
    files.push(merged);
    Ok(all)
}

struct Session {
    command: &'static str,
    started: chrono::DateTime<Utc>,
    out: PathBuf,
    outputs: Vec<PathBuf>,
}

impl Session {
    fn start(command: &'static str, out: &Path) -> anyhow::Result<Self> {
        prepare_out(out)?;
        Ok(Self { command, started: Utc::now(), out: out.to_path_buf(), outputs: Vec::new() })
    }

    fn save_config(&mut self, config: &SystemConfig) -> anyhow::Result<()> {
        let path = self.out.join("config.toml");
        write_text(&path, &config_to_toml(config))?;
        self.outputs.push(path);
        Ok(())
    }

    fn finish(self, config: ConfigSource, seeds: Vec<u64>, schemes: &[SchemeId], epochs: Option<usize>) -> anyhow::Result<()> {
        let m = RunManifest {
            command: self.command.to_string(),
            config,
            seeds,
            schemes: schemes.iter().map(|s| s.to_string()).collect(),
            epochs,
            code_version: CODE_VERSION.to_string(),
            started_at: timestamp(self.started),
            finished_at: timestamp(Utc::now()),
            outputs: self.outputs,
        };
        let path = m.write(&self.out)?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

fn train(a: TrainArgs) -> anyhow::Result<()> {
    reject_unrunnable(&a.scheme)?;
    let loaded = load(&a.common, a.epochs)?;
    let seeds = a.common.seed.0.clone();
    let jobs: Vec<Job> =
        a.scheme.iter().flat_map(|&scheme| seeds.iter().map(move |&seed| Job { scheme, seed, power_dbm: None })).collect();
    if a.checkpoint.is_some() && (jobs.len() != 1 || !jobs[0].scheme.is_learned()) {
        bail!("--checkpoint needs exactly one learned scheme and one seed");
    }
    let mut session = Session::start("train", &a.common.out)?;
    session.save_config(&loaded.config)?;
    let workers = a.common.out.join("workers");
    let threads = default_threads(a.common.jobs);
    let outputs = run_parallel(&jobs, threads, |j| run_job(&loaded.config, j, &workers, a.dump_traces.as_deref()))?;
    if let Some(dst) = &a.checkpoint {
        let src = workers.join(jobs[0].dir_name()).join("agents.ckpt");
        std::fs::copy(&src, dst).with_context(|| format!("cannot copy the checkpoint to {}", dst.display()))?;
        session.outputs.push(dst.clone());
    }
    let all = merge(outputs, &a.common.out, &mut session.outputs)?;
    report(&all, &a.scheme, &seeds);
    session.finish(loaded.source, seeds, &a.scheme, Some(loaded.config.learning.epochs))
}

fn report(all: &MetricsSeries, schemes: &[SchemeId], seeds: &[u64]) {
    for s in schemes {
        for &seed in seeds {
            let part = MetricsSeries {
                records: all.records.iter().filter(|r| r.scheme == s.as_str() && r.seed == seed).cloned().collect(),
            };
            let g = part.aggregate();
            println!(
                "{s} seed {seed}: throughput {:.4e} b/s, worst latency {:.3e} s, queue {:.4e} b, reward {:.4}, feasible {:.3}",
                g.mean_throughput_bps, g.max_latency_s, g.mean_queue_bits, g.mean_reward, g.feasible_fraction
            );
        }
    }
}

fn evaluate_cmd(a: EvaluateArgs) -> anyhow::Result<()> {
    reject_unrunnable(&[a.scheme])?;
    let loaded = load(&a.common, None)?;
    let seeds = a.common.seed.0.clone();
    let cfg = a.scheme.config(&loaded.config);
    let agents = match (a.scheme.is_learned(), &a.checkpoint) {
        (true, Some(path)) => Some(load_checkpoint_for(path, &cfg).with_context(|| format!("checkpoint {}", path.display()))?),
        (true, None) => bail!("{} needs --checkpoint", a.scheme),
        (false, _) => None,
    };
    let mut session = Session::start("evaluate", &a.common.out)?;
    session.save_config(&loaded.config)?;
    let workers = a.common.out.join("workers");
    let series = run_parallel(&seeds, default_threads(a.common.jobs), |&seed| {
        let series = match &agents {
            Some(ag) => evaluate(&cfg, a.scheme.phi_mode(), ag, seed, cfg.evaluation.frames, a.scheme.as_str()),
            None => run_relaxed_upper_bound(&cfg, seed),
        };
        let job = Job { scheme: a.scheme, seed, power_dbm: None };
        let dir = workers.join(job.dir_name());
        prepare_out(&dir)?;
        let path = dir.join("metrics.csv");
        write_series(&series, &path)?;
        let mut files = vec![path];
        if let Some(root) = &a.dump_traces {
            let d = root.join(job.dir_name());
            dump_eval(&cfg, seed, &d)?;
            files.push(d);
        }
        Ok(JobOutput { series, files })
    })?;
    let all = merge(series, &a.common.out, &mut session.outputs)?;
    report(&all, &[a.scheme], &seeds);
    session.finish(loaded.source, seeds, &[a.scheme], None)
}

fn sweep(a: SweepArgs) -> anyhow::Result<()> {
    reject_unrunnable(&a.scheme)?;
    if a.powers.is_empty() {
        bail!("--powers is empty");
    }
    let loaded = load(&a.common, a.epochs)?;
    let seeds = a.common.seed.0.clone();
    let mut jobs = Vec::new();
    for &p in &a.powers {
        for &scheme in &a.scheme {
            for &seed in &seeds {
                jobs.push(Job { scheme, seed, power_dbm: Some(p) });
            }
        }
    }
    let mut session = Session::start("sweep", &a.common.out)?;
    session.save_config(&loaded.config)?;
    let workers = a.common.out.join("workers");
    let outputs = run_parallel(&jobs, default_threads(a.common.jobs), |j| run_job(&loaded.config, j, &workers, None))?;
    let all = merge(outputs, &a.common.out, &mut session.outputs)?;

    let mut table = String::from(
        "scheme,p_max_dbm,seeds,frames,mean_throughput_bps,std_throughput_bps,mean_latency_s,max_latency_s,mean_queue_bits,mean_reward,feasible_fraction\n",
    );
    for &scheme in &a.scheme {
        for &p in &a.powers {
            let part = MetricsSeries {
                records: all.records.iter().filter(|r| r.scheme == scheme.as_str() && r.p_max_dbm == p).cloned().collect(),
            };
            let g = part.aggregate();
            writeln!(
                table,
                "{scheme},{p},{},{},{},{},{},{},{},{},{}",
                seeds.len(),
                g.frames,
                g.mean_throughput_bps,
                g.std_throughput_bps,
                g.mean_latency_s,
                g.max_latency_s,
                g.mean_queue_bits,
                g.mean_reward,
                g.feasible_fraction
            )
            .expect("writing to a String");
            println!("{scheme} {p} dBm: throughput {:.4e} b/s, queue {:.4e} b", g.mean_throughput_bps, g.mean_queue_bits);
        }
    }
    let path = a.common.out.join("sweep.csv");
    write_text(&path, &table)?;
    session.outputs.push(path);
    session.finish(loaded.source, seeds, &a.scheme, Some(loaded.config.learning.epochs))
}

fn oracle(a: OracleArgs) -> anyhow::Result<()> {
    let mut session = Session::start("oracle", &a.out)?;
    let mut table = String::from(
        "instance,embb_rbs,urllc_rbs,relaxed_bound,brute_force,heuristic,heuristic_feasible,feasible_assignments,ordered\n",
    );
    let mut sources = Vec::new();
    let mut violations = 0;
    for i in 0..a.instances {
        let (tiny, trace) = tiny_instance(a.seed, i);
        let origin = format!("oracle instance {i}");
        let config = parse_config(&config_to_toml(&tiny), &origin, &a.overrides)?;
        let trace = if config == tiny { trace } else { instance_trace(&config, a.seed, i) };
        if i == 0 {
            sources.push(ConfigSource::new(origin, config_to_toml(&tiny).as_bytes(), &a.overrides, &config));
        }
        let grid = build_rb_grid(&config);
        let cmp = compare_on(&config, &trace)?;
        let bf = cmp.brute_force.as_ref().map(|b| b.objective);
        let ordered = bf.is_some_and(|b| cmp.relaxed_bound <= b && (!cmp.heuristic_feasible || b <= cmp.heuristic_objective));
        violations += usize::from(!ordered);
        writeln!(
            table,
            "{i},{},{},{},{},{},{},{},{ordered}",
            grid.slice(Slice::Embb).num_rbs,
            grid.slice(Slice::Urllc).num_rbs,
            cmp.relaxed_bound,
            bf.map_or(String::new(), |b| b.to_string()),
            cmp.heuristic_objective,
            cmp.heuristic_feasible,
            cmp.brute_force.as_ref().map_or(0, |b| b.feasible_count),
        )
        .expect("writing to a String");
    }
    let path = a.out.join("oracle.csv");
    write_text(&path, &table)?;
    session.outputs.push(path);
    println!("{} instances, {violations} ordering violations", a.instances);
    let source = sources.pop().unwrap_or_else(|| {
        let tiny = tiny_instance(a.seed, 0).0;
        ConfigSource::new("oracle".into(), config_to_toml(&tiny).as_bytes(), &a.overrides, &tiny)
    });
    session.finish(source, vec![a.seed], &[SchemeId::RelaxedUpperBound, SchemeId::BruteForce], None)
}

fn replay(a: ReplayArgs) -> anyhow::Result<()> {
    if !a.scheme.is_learned() {
        bail!("replay needs a learned scheme, got {}", a.scheme);
    }
    let loaded = load(&a.common, None)?;
    let cfg = a.scheme.config(&loaded.config);
    let agents = load_checkpoint_for(&a.checkpoint, &cfg).with_context(|| format!("checkpoint {}", a.checkpoint.display()))?;
    let traces = load_traces(&cfg, &build_rb_grid(&cfg), &a.traces)?;
    let frames = traces.len_hint().unwrap_or(0);
    let seed = a.common.seed.0[0];
    let mut session = Session::start("replay", &a.common.out)?;
    session.save_config(&loaded.config)?;
    let series = rollout(
        &cfg,
        a.scheme.phi_mode(),
        &mut GreedyAgents(&agents),
        &traces,
        frames,
        (a.scheme.as_str(), seed),
        &mut |_, _| {},
    );
    let path = a.common.out.join("metrics.csv");
    write_series(&series, &path)?;
    session.outputs.push(path);
    println!("replayed {frames} frames from {}", a.traces.display());
    report(&series, &[a.scheme], &[seed]);
    session.finish(loaded.source, vec![seed], &[a.scheme], None)
}
