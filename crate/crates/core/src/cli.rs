//! Command-line driver: `run`, `gen-matrix` and `analyze`.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dynamics::{Engine, WorldState};
use crate::io::config::{parse_matrix, parse_rules, print_matrix, print_rules};
use crate::io::relations::{
    build_relation_model, parse_edge_list, RelationOptions, RelationSetKind, DEFAULT_DISTANCE,
};
use crate::io::report::{read_report_csv, write_report_csv};
use crate::io::snapshot::{render_snapshot, DEFAULT_SCALE};
use crate::lattice::Lattice;
use crate::metrics::{
    crowding_indices, neighborhood_counts, significant_populations, CrowdingIndices,
};
use crate::model::{
    validate, Diagnostic, MatrixEntry, Model, PopulationSpec, SimParams, DEFAULT_BETA,
};

/// Seed used when none is given, so default runs are reproducible.
pub const DEFAULT_SEED: u64 = 20_110_317;

#[derive(Debug, Parser)]
#[command(
    name = "swarmnet",
    version,
    about = "Brownian-agent aggregation of co-occurrence networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a rules + matrix model and write neighborhood reports.
    Run(RunSpec),
    /// Generate rules and matrix files around a target from an edge list.
    GenMatrix(GenMatrixArgs),
    /// List the significant populations of a report CSV.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RunSpec {
    #[arg(long)]
    pub rules: PathBuf,
    #[arg(long)]
    pub matrix: PathBuf,
    /// Lattice side A (patches per side).
    #[arg(long, default_value_t = 31)]
    pub side: u32,
    /// Agents per population.
    #[arg(long, default_value_t = 100)]
    pub size: u32,
    /// Optional `name size` lines overriding --size per population.
    #[arg(long)]
    pub sizes: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub steps: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Comma-separated ticks to report; defaults to `0,<steps>`.
    #[arg(long, value_delimiter = ',')]
    pub report_ticks: Vec<u64>,
    /// Population whose neighborhood is reported.
    #[arg(long)]
    pub target: String,
    /// Neighborhood distance in patches.
    #[arg(long, default_value_t = DEFAULT_DISTANCE)]
    pub distance: f64,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub beta: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write `snapshot_t<k>.ppm` per report tick.
    #[arg(long)]
    pub snapshot: bool,
    /// Pixels per patch side in snapshots.
    #[arg(long, default_value_t = DEFAULT_SCALE)]
    pub scale: u32,
    /// Worker threads; output does not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Restricted,
    Extended,
}

impl From<Kind> for RelationSetKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Restricted => RelationSetKind::Restricted,
            Kind::Extended => RelationSetKind::Extended,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenMatrixArgs {
    #[arg(long)]
    pub edges: PathBuf,
    #[arg(long)]
    pub target: String,
    #[arg(long, value_enum, default_value_t = Kind::Restricted)]
    pub kind: Kind,
    #[arg(long)]
    pub rules_out: PathBuf,
    #[arg(long)]
    pub matrix_out: PathBuf,
    /// Emit both directions of every relation.
    #[arg(long)]
    pub symmetric: bool,
    #[arg(long, default_value_t = DEFAULT_DISTANCE)]
    pub distance: f64,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub factor: f64,
}

pub fn execute<W: Write>(cli: Cli, out: &mut W) -> Result<()> {
    match cli.command {
        Command::Run(spec) => cmd_run(&spec, out),
        Command::GenMatrix(args) => cmd_gen_matrix(&args, out),
        Command::Analyze(args) => cmd_analyze(&args, out),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Population names in order of first mention (source, then target).
fn populations_of(matrix: &[MatrixEntry]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for e in matrix {
        for n in std::iter::once(&e.source).chain(e.target.as_ref().map(|t| &t.family)) {
            if !names.contains(n) {
                names.push(n.clone());
            }
        }
    }
    names
}

fn parse_sizes(path: &Path) -> Result<HashMap<String, u32>> {
    let text = read(path)?;
    let mut sizes = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = t.split_whitespace().collect();
        let [name, size] = f.as_slice() else {
            bail!("{}:{}: expected `name size`", path.display(), i + 1);
        };
        let size: u32 = size
            .parse()
            .with_context(|| format!("{}:{}: bad size {size:?}", path.display(), i + 1))?;
        sizes.insert((*name).to_string(), size);
    }
    Ok(sizes)
}

#[derive(Serialize)]
struct RunMeta<'a> {
    version: &'static str,
    spec: &'a RunSpec,
    report_ticks: &'a [u64],
    populations: &'a [PopulationSpec],
    crowding: CrowdingIndices,
    warnings: Vec<String>,
}

fn report_ticks(spec: &RunSpec) -> Result<Vec<u64>> {
    let mut ticks = if spec.report_ticks.is_empty() {
        vec![0, spec.steps]
    } else {
        spec.report_ticks.clone()
    };
    ticks.sort_unstable();
    ticks.dedup();
    if let Some(t) = ticks.iter().find(|&&t| t > spec.steps) {
        bail!("report tick {t} is beyond --steps {}", spec.steps);
    }
    Ok(ticks)
}

pub fn build_run_model(spec: &RunSpec) -> Result<(Model, Vec<Diagnostic>)> {
    let rules =
        parse_rules(&read(&spec.rules)?).with_context(|| format!("in {}", spec.rules.display()))?;
    let matrix = parse_matrix(&read(&spec.matrix)?)
        .with_context(|| format!("in {}", spec.matrix.display()))?;
    let lattice = Lattice::new(spec.side)?;
    let overrides = match &spec.sizes {
        Some(p) => parse_sizes(p)?,
        None => HashMap::new(),
    };
    let names = populations_of(&matrix);
    if let Some(unknown) = overrides.keys().find(|k| !names.contains(k)) {
        bail!("sizes file names unknown population {unknown:?}");
    }
    let populations = names
        .into_iter()
        .map(|n| {
            let size = overrides.get(&n).copied().unwrap_or(spec.size);
            PopulationSpec::new(n, size)
        })
        .collect();
    let model = Model {
        lattice,
        populations,
        rules,
        matrix,
        params: SimParams {
            beta: spec.beta,
            seed: spec.seed,
            max_ticks: spec.steps,
        },
    };
    let diagnostics = validate(&model);
    let errors: Vec<String> = diagnostics
        .iter()
        .filter(|d| d.is_error())
        .map(ToString::to_string)
        .collect();
    if !errors.is_empty() {
        bail!("invalid model:\n{}", errors.join("\n"));
    }
    if model.population_id(&spec.target).is_none() {
        bail!("target population {:?} is not in the matrix", spec.target);
    }
    Ok((model, diagnostics))
}

pub fn cmd_run<W: Write>(spec: &RunSpec, out: &mut W) -> Result<()> {
    let ticks = report_ticks(spec)?;
    let (model, diagnostics) = build_run_model(spec)?;
    for d in &diagnostics {
        eprintln!("{d}");
    }
    let engine = Engine::new(model)?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = spec.workers {
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    let mut observed: Vec<WorldState> = Vec::new();
    pool.install(|| engine.run(&ticks, |s| observed.push(s.clone())))?;

    fs::create_dir_all(&spec.out)
        .with_context(|| format!("cannot create {}", spec.out.display()))?;
    let model = engine.model();
    for state in &observed {
        let report = neighborhood_counts(state, model, &spec.target, spec.distance)?;
        let path = spec.out.join(format!("report_t{}.csv", state.tick));
        let file =
            fs::File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
        write_report_csv(&report, file)?;
        writeln!(out, "wrote {}", path.display())?;
        if spec.snapshot {
            let path = spec.out.join(format!("snapshot_t{}.ppm", state.tick));
            let file = fs::File::create(&path)
                .with_context(|| format!("cannot write {}", path.display()))?;
            render_snapshot(
                state,
                &model.lattice,
                spec.scale,
                std::io::BufWriter::new(file),
            )?;
            writeln!(out, "wrote {}", path.display())?;
        }
    }

    let meta = RunMeta {
        version: env!("CARGO_PKG_VERSION"),
        spec,
        report_ticks: &ticks,
        populations: &model.populations,
        crowding: crowding_indices(&model.lattice, u64::from(spec.size)),
        warnings: diagnostics.iter().map(|d| d.message.clone()).collect(),
    };
    let path = spec.out.join("run_meta.json");
    fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n")
        .with_context(|| format!("cannot write {}", path.display()))?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

pub fn cmd_gen_matrix<W: Write>(args: &GenMatrixArgs, out: &mut W) -> Result<()> {
    let edges = parse_edge_list(&read(&args.edges)?)
        .with_context(|| format!("in {}", args.edges.display()))?;
    let options = RelationOptions {
        distance: args.distance,
        symmetric: args.symmetric,
    };
    let rel = build_relation_model(&edges, &args.target, args.kind.into(), options)?;
    fs::write(&args.rules_out, print_rules(&rel.rules))
        .with_context(|| format!("cannot write {}", args.rules_out.display()))?;
    fs::write(&args.matrix_out, print_matrix(&rel.matrix))
        .with_context(|| format!("cannot write {}", args.matrix_out.display()))?;
    writeln!(out, "populations {}", rel.populations.len())?;
    writeln!(out, "relations {}", rel.relation_count())?;
    Ok(())
}

pub fn cmd_analyze<W: Write>(args: &AnalyzeArgs, out: &mut W) -> Result<()> {
    if args.factor.is_nan() || args.factor <= 0.0 {
        bail!("factor must be positive, got {}", args.factor);
    }
    let file = fs::File::open(&args.report)
        .with_context(|| format!("cannot read {}", args.report.display()))?;
    let report = read_report_csv(file).with_context(|| format!("in {}", args.report.display()))?;
    for row in significant_populations(&report, args.factor) {
        writeln!(out, "{} {}", row.name, row.count)?;
    }
    Ok(())
}
