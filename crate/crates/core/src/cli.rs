//! Command-line front end: `run`, `compare`, `table`, `stats`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bell::compile_operator;
use crate::config::{ProbePoint, RunConfig, OUTPUT_ROOT_ENV};
use crate::curl::skew_defect;
use crate::error::{Error, Result};
use crate::grid::{Boundary, Component, FieldState};
use crate::measure::{remove_offset, ProbeWriter, SignedReading};
use crate::oracle::{snapshot, ErrorTable};
use crate::pipeline::{
    circuit_stats, probe_trace, steps_for, trotter_error_table, Backend, Frame, Pipeline, ProbeOutcome, ProbeSettings,
};
use crate::schrodinger::{recovery_point, RecoveryMode};
use crate::measure::RemovalMode;

#[derive(Parser, Debug)]
#[command(name = "qmaxwell", version, about = "Maxwell evolution on a simulated quantum register", args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evolve a scenario and write snapshots, probe traces and a manifest.
    Run(RunArgs),
    /// Diff two run directories.
    Compare(CompareArgs),
    /// Trotter error table against the exact evolution.
    Table(TableArgs),
    /// Gate counts of the Trotter circuit, without simulating it.
    Stats(RunArgs),
}

/// Flags override values from `--config`.
#[derive(Args, Debug, Default, Clone)]
pub struct RunArgs {
    /// JSON run configuration (or a manifest from an earlier run).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_via::<crate::pipeline::ScenarioKind>)]
    pub scenario: Option<crate::pipeline::ScenarioKind>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub ny: Option<usize>,
    #[arg(long)]
    pub nz: Option<usize>,
    /// Outer wall condition: pmc or pec.
    #[arg(long, value_parser = parse_boundary)]
    pub walls: Option<Boundary>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Ancilla qubits for the p register.
    #[arg(long = "n-a")]
    pub n_a: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub p_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub p_max: Option<f64>,
    /// single-slice or least-squares.
    #[arg(long, value_parser = parse_recovery)]
    pub recovery: Option<RecoveryMode>,
    /// Constant added to the excited component before evolution.
    #[arg(long)]
    pub offset: Option<f64>,
    /// evolved or constant.
    #[arg(long, value_parser = parse_removal)]
    pub removal: Option<RemovalMode>,
    /// oracle, lifted-exact or circuit.
    #[arg(long, value_parser = parse_via::<Backend>)]
    pub backend: Option<Backend>,
    /// Probe point such as `Hx@8,8` (repeatable).
    #[arg(long = "probe", value_parser = parse_via::<ProbePoint>)]
    pub probes: Vec<ProbePoint>,
    #[arg(long)]
    pub probe_every: Option<usize>,
    /// Comma-separated snapshot times.
    #[arg(long = "snapshot-times", value_delimiter = ',')]
    pub snapshot_times: Vec<f64>,
    /// Output directory; defaults to a name under the output root.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the gate list of one Trotter step as JSON.
    #[arg(long)]
    pub export_circuit: bool,
    /// Write the Bell blocks of both Hermitian parts as JSON.
    #[arg(long)]
    pub export_blocks: bool,
    /// Write the generator as a triplet text file.
    #[arg(long)]
    pub dump_operator: bool,
}

#[derive(Args, Debug, Clone)]
pub struct CompareArgs {
    pub run_a: PathBuf,
    pub run_b: PathBuf,
    /// Where to write the diff; defaults to `<run_b>/compare`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct TableArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.01])]
    pub dts: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![8.0, 16.0, 24.0])]
    pub times: Vec<f64>,
}

fn parse_via<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_boundary(s: &str) -> std::result::Result<Boundary, String> {
    serde_json::from_value(serde_json::Value::String(s.to_lowercase())).map_err(|_| format!("unknown wall type {s:?}"))
}

fn parse_recovery(s: &str) -> std::result::Result<RecoveryMode, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown recovery mode {s:?}"))
}

fn parse_removal(s: &str) -> std::result::Result<RemovalMode, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown removal mode {s:?}"))
}

impl RunArgs {
    /// Config file (if any) with every given flag applied on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => load_config(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => {$(if let Some(v) = self.$f.clone() { c.$f = v; })*};
        }
        set!(scenario, walls, dt, steps, n_a, p_min, p_max, recovery, offset, removal, backend, probe_every, seed);
        if self.nx.is_some() {
            c.nx = self.nx;
        }
        if self.ny.is_some() {
            c.ny = self.ny;
        }
        if self.nz.is_some() {
            c.nz = self.nz;
        }
        if self.output.is_some() {
            c.output = self.output.clone();
        }
        if self.shots.is_some() {
            c.shots = self.shots;
        }
        if !self.probes.is_empty() {
            c.probes = self.probes.clone();
        }
        if !self.snapshot_times.is_empty() {
            c.snapshot_times = self.snapshot_times.clone();
        }
        c.export_circuit |= self.export_circuit;
        c.export_blocks |= self.export_blocks;
        c.dump_operator |= self.dump_operator;
        c.validate()?;
        Ok(c)
    }
}

/// Accepts either a bare config or a manifest written by `run`.
fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let inner = match value.get("config") {
        Some(c) if value.get("tool").is_some() => c.clone(),
        _ => value,
    };
    serde_json::from_value(inner).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub system_qubits: usize,
    pub ancilla_qubits: usize,
    pub lambda_max: f64,
    pub skew_defect: f64,
    pub files: Vec<String>,
    pub warnings: Vec<String>,
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
}

impl Manifest {
    fn new(command: &str, config: &RunConfig, pipeline: &Pipeline) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: config.clone(),
            system_qubits: pipeline.n_system(),
            ancilla_qubits: pipeline.reg.n_a,
            lambda_max: pipeline.lambda_max,
            skew_defect: skew_defect(&pipeline.a).defect,
            files: Vec::new(),
            warnings: Vec::new(),
            metrics: BTreeMap::new(),
        }
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(dir.join("manifest.json"), text)?;
        Ok(())
    }
}

/// Parses and executes; the caller maps the error to an exit code.
pub fn main_with_args<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            print!("{e}");
            Error::Usage(String::new())
        }
        _ => Error::Config(e.to_string()),
    });
    let cli = match cli {
        Err(Error::Usage(m)) if m.is_empty() => return Ok(()),
        other => other?,
    };
    let text = match cli.command {
        Command::Run(a) => run(&a.resolve()?)?.display().to_string(),
        Command::Compare(a) => compare(&a)?.display().to_string(),
        Command::Table(a) => table(&a)?.display().to_string(),
        Command::Stats(a) => stats(&a.resolve()?)?,
    };
    emit(&text)
}

// a closed pipe on stdout is not a failure of the run
fn emit(text: &str) -> Result<()> {
    match writeln!(std::io::stdout(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn pipeline_for(cfg: &RunConfig) -> Result<Pipeline> {
    let mut p = Pipeline::with_seed(cfg.build_scenario()?, cfg.register()?, cfg.seed)?;
    p.recovery = cfg.recovery;
    Ok(p)
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Executes a run and returns its output directory.
pub fn run(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let pipeline = pipeline_for(cfg)?;
    if cfg.backend != Backend::Oracle {
        recovery_point(&pipeline.reg, pipeline.lambda_max, cfg.horizon())?;
    }
    let dir = cfg.output_dir();
    prepare_dir(&dir)?;
    let mut manifest = Manifest::new("run", cfg, &pipeline);
    let layout = pipeline.scenario.spec.layout();

    let snap_steps = steps_for(&cfg.snapshot_times_or_default(), cfg.dt)?;
    let mut probe_steps: Vec<usize> = (0..=cfg.steps).step_by(cfg.probe_every).collect();
    if probe_steps.last() != Some(&cfg.steps) {
        probe_steps.push(cfg.steps);
    }
    let mut record = probe_steps.clone();
    record.extend(&snap_steps);
    let points = cfg.probe_points(&pipeline.scenario);
    let requests: Vec<_> = points.iter().map(|p| p.request()).collect();
    for r in &requests {
        layout.flat_index(r.component, r.index[0], r.index[1], r.index[2])
            .map_err(|e| Error::Config(format!("probe {}: {e}", ProbePoint { component: r.component, index: r.index })))?;
    }

    let mut probes = ProbeWriter::new(BufWriter::new(File::create(dir.join("probes.csv"))?))?;
    let fields: Vec<Frame> = match cfg.backend {
        Backend::Oracle => {
            let u0 = pipeline.scenario.initial_state()?;
            let frames = pipeline.run(Backend::Oracle, &u0, cfg.dt, cfg.steps, &record)?;
            for f in frames.iter().filter(|f| probe_steps.contains(&f.step)) {
                for r in &requests {
                    let value = f.field.get(r.component, r.index)?;
                    let reading = SignedReading {
                        magnitude: value.abs(),
                        sign: if value < 0.0 { -1 } else { 1 },
                        value,
                        shots: None,
                    };
                    probes.write(f.time, r, &reading)?;
                }
            }
            frames
        }
        backend => {
            let settings = ProbeSettings {
                offset: cfg.offset,
                removal: cfg.removal,
                shots: cfg.shots,
                seed: cfg.seed,
            };
            let trace = probe_trace(&pipeline, backend, cfg.dt, cfg.steps, &record, &requests, &settings)?;
            manifest.warnings.extend(trace.warnings.iter().cloned());
            let mut indeterminate = 0usize;
            for s in trace.samples.iter().filter(|s| probe_steps.contains(&((s.time / cfg.dt).round() as usize))) {
                match s.outcome {
                    ProbeOutcome::Signed(r) => probes.write(s.time, &s.request, &r)?,
                    ProbeOutcome::Indeterminate { magnitude, shots } => {
                        indeterminate += 1;
                        probes.write_indeterminate(s.time, &s.request, magnitude, shots)?
                    }
                }
            }
            if indeterminate > 0 {
                manifest
                    .warnings
                    .push(format!("{indeterminate} probe readings had a sign within shot noise"));
            }
            let max_imag = trace.frames.iter().map(|f| f.imag_residual).fold(0.0, f64::max);
            manifest.metrics.insert("max_imag_residual".into(), max_imag);
            trace
                .frames
                .into_iter()
                .zip(&trace.responses)
                .map(|(mut f, resp)| {
                    f.field = remove_offset(&f.field, resp, cfg.offset, cfg.removal)?;
                    Ok(f)
                })
                .collect::<Result<_>>()?
        }
    };
    probes.flush()?;
    drop(probes);
    manifest.files.push("probes.csv".into());

    let plane = cfg.snapshot_plane();
    for f in fields.iter().filter(|f| snap_steps.contains(&f.step)) {
        for c in layout.components() {
            let snap = snapshot(&f.field, c, plane)?;
            snap.write_to_dir(&dir)?;
            manifest.files.push(snap.file_name());
        }
        let name = format!("field_T{}.csv", f.time);
        write_field(&f.field, &dir.join(&name))?;
        manifest.files.push(name);
    }

    if cfg.backend == Backend::Circuit || cfg.export_circuit || cfg.export_blocks {
        let program = pipeline.program(cfg.dt)?;
        if cfg.backend == Backend::Circuit {
            let stats = circuit_stats(&program, cfg.steps)?;
            fs::write(dir.join("gate_stats.json"), serde_json::to_string_pretty(&stats)? + "\n")?;
            manifest.files.push("gate_stats.json".into());
        }
        if cfg.export_circuit {
            let circuit = program.circuit(1, cfg.scenario.name());
            fs::write(dir.join("circuit_step.json"), circuit.to_json()? + "\n")?;
            manifest.files.push("circuit_step.json".into());
        }
    }
    if cfg.export_blocks {
        write_blocks(&pipeline, cfg.dt, &dir)?;
        manifest.files.push("blocks.json".into());
    }
    if cfg.dump_operator {
        let mut w = BufWriter::new(File::create(dir.join("operator.txt"))?);
        pipeline.a.write_triplets(&mut w)?;
        manifest.files.push("operator.txt".into());
    }
    manifest.write(&dir)?;
    Ok(dir)
}

fn write_blocks(pipeline: &Pipeline, dt: f64, dir: &Path) -> Result<()> {
    #[derive(Serialize)]
    struct Blocks {
        h1: crate::bell::CompiledOperator,
        h2: crate::bell::CompiledOperator,
    }
    let blocks = Blocks {
        h1: compile_operator(&pipeline.pair.h1, dt)?,
        h2: compile_operator(&pipeline.pair.h2, dt)?,
    };
    fs::write(dir.join("blocks.json"), serde_json::to_string_pretty(&blocks)? + "\n")?;
    Ok(())
}

/// Every sample as `component,i,j,k,value`.
pub fn write_field(state: &FieldState, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(["component", "i", "j", "k", "value"])?;
    let layout = &state.layout;
    for flat in 0..layout.len() {
        if let Some((c, [i, j, k])) = layout.locate(flat) {
            w.write_record([
                c.to_string(),
                i.to_string(),
                j.to_string(),
                k.to_string(),
                format!("{:.12e}", state.values[flat]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

type SampleKey = (String, usize, usize, usize);

fn read_field(path: &Path) -> Result<BTreeMap<SampleKey, f64>> {
    let mut r = csv::Reader::from_path(path)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            let num = |i: usize| -> Result<usize> {
                rec[i].parse().map_err(|_| Error::Config(format!("{}: bad index {:?}", path.display(), &rec[i])))
            };
            let v: f64 = rec[4]
                .parse()
                .map_err(|_| Error::Config(format!("{}: bad value {:?}", path.display(), &rec[4])))?;
            Ok(((rec[0].to_string(), num(1)?, num(2)?, num(3)?), v))
        })
        .collect()
}

type ProbeKey = (String, String, usize, usize, usize);

fn read_probes(path: &Path) -> Result<BTreeMap<ProbeKey, f64>> {
    let mut r = csv::Reader::from_path(path)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            let num = |i: usize| rec[i].parse::<usize>().unwrap_or(usize::MAX);
            let v: f64 = rec[5].parse().unwrap_or(f64::NAN);
            Ok(((rec[0].to_string(), rec[1].to_string(), num(2), num(3), num(4)), v))
        })
        .collect()
}

/// Per-component ℓ2/ℓ∞ differences at every time both runs dumped, plus a
/// probe overlay.
pub fn compare(args: &CompareArgs) -> Result<PathBuf> {
    let (ma, mb) = (Manifest::read(&args.run_a)?, Manifest::read(&args.run_b)?);
    let (ca, cb) = (&ma.config, &mb.config);
    if ca.scenario != cb.scenario || ca.size() != cb.size() {
        return Err(Error::Layout(format!(
            "runs differ in layout: {} {:?} vs {} {:?}",
            ca.scenario,
            ca.size(),
            cb.scenario,
            cb.size()
        )));
    }
    let out = args.output.clone().unwrap_or_else(|| args.run_b.join("compare"));
    prepare_dir(&out)?;
    let fields = |m: &Manifest| -> Vec<String> { m.files.iter().filter(|f| f.starts_with("field_T")).cloned().collect() };
    let names_b = fields(&mb);
    let mut diff = csv::Writer::from_path(out.join("diff.csv"))?;
    diff.write_record(["time", "component", "l2", "linf"])?;
    for name in fields(&ma).iter().filter(|n| names_b.contains(n)) {
        let time = name.trim_start_matches("field_T").trim_end_matches(".csv");
        let (fa, fb) = (read_field(&args.run_a.join(name))?, read_field(&args.run_b.join(name))?);
        if fa.len() != fb.len() || fa.keys().ne(fb.keys()) {
            return Err(Error::Layout(format!("{name}: sample sets differ")));
        }
        let mut per: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
        for ((key, a), b) in fa.iter().zip(fb.values()) {
            let e = per.entry(key.0.as_str()).or_default();
            let d = (a - b).abs();
            e.0 += d * d;
            e.1 = e.1.max(d);
        }
        let order: Vec<&str> = Component::ALL.iter().map(|c| c.name()).collect();
        for c in order.iter().filter(|c| per.contains_key(*c)) {
            let (s, m) = per[c];
            diff.write_record([time.to_string(), c.to_string(), format!("{:.12e}", s.sqrt()), format!("{m:.12e}")])?;
        }
    }
    diff.flush()?;
    let (pa, pb) = (read_probes(&args.run_a.join("probes.csv"))?, read_probes(&args.run_b.join("probes.csv"))?);
    let mut overlay = csv::Writer::from_path(out.join("probe_overlay.csv"))?;
    overlay.write_record(["time", "component", "i", "j", "k", "value_a", "value_b", "diff"])?;
    for (key, a) in &pa {
        if let Some(b) = pb.get(key) {
            overlay.write_record([
                key.0.clone(),
                key.1.clone(),
                key.2.to_string(),
                key.3.to_string(),
                key.4.to_string(),
                format!("{a:.12e}"),
                format!("{b:.12e}"),
                format!("{:.12e}", a - b),
            ])?;
        }
    }
    overlay.flush()?;
    Ok(out)
}

pub fn table(args: &TableArgs) -> Result<PathBuf> {
    let mut cfg = args.run.resolve()?;
    cfg.backend = Backend::Circuit;
    let horizon = args.times.iter().copied().fold(0.0, f64::max);
    if args.dts.iter().any(|&dt| !(dt > 0.0)) || args.times.iter().any(|&t| t < 0.0) {
        return Err(Error::Config("dts must be positive and times nonnegative".into()));
    }
    for &dt in &args.dts {
        steps_for(&args.times, dt)?;
    }
    let pipeline = pipeline_for(&cfg)?;
    let dir = cfg.output.clone().unwrap_or_else(|| {
        let root = std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from);
        let [nx, ny, _] = cfg.size();
        root.join(format!("table-{}-{nx}x{ny}-T{horizon}", cfg.scenario))
    });
    prepare_dir(&dir)?;
    let t: ErrorTable = trotter_error_table(&pipeline, &args.dts, &args.times)?;
    t.write_csv(BufWriter::new(File::create(dir.join("error_table.csv"))?))?;
    let mut manifest = Manifest::new("table", &cfg, &pipeline);
    manifest.files.push("error_table.csv".into());
    manifest.warnings.extend(t.monotonicity_violations());
    manifest.write(&dir)?;
    Ok(dir)
}

/// Gate counts as pretty JSON; also written under the output directory.
pub fn stats(cfg: &RunConfig) -> Result<String> {
    let pipeline = pipeline_for(cfg)?;
    let program = pipeline.program(cfg.dt)?;
    let stats = circuit_stats(&program, cfg.steps)?;
    let text = serde_json::to_string_pretty(&stats)?;
    let dir = cfg.output_dir();
    prepare_dir(&dir)?;
    fs::write(dir.join("gate_stats.json"), text.clone() + "\n")?;
    let mut manifest = Manifest::new("stats", cfg, &pipeline);
    manifest.files.push("gate_stats.json".into());
    manifest.write(&dir)?;
    Ok(text)
}
