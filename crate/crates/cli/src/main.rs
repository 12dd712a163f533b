//! `paf`: generate synthetic scenes and fields, detect, parse, and run the
//! evaluation suites.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 a suite check failed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use paf_core::associate::{AssociationConfig, Matcher};
use paf_core::detect::{detect_candidates, DetectConfig};
use paf_core::eval::{
    bench_parse, compare_strategies, latency_csv, mini5_scene_spec, random_scene, random_score_instances,
    rendered_instances, roundtrip_suite, CompareTargets, EvalConfig, MatchReport, RandomInstanceSpec,
    RoundtripTargets, SceneSpec, ScenePipeline, TopologySource,
};
use paf_core::fields::{render_scene_fields, Grid, RenderParams};
use paf_core::io::{read_fields, read_json, to_json_pretty, write_atomic, write_fields, CandidateFile, PoseFile, TopologyRef};
use paf_core::parse::{parse_poses, ParseConfig};
use paf_core::topology::{builtin, RawTopology, SkeletonTopology};

#[derive(Debug, Parser)]
#[command(name = "paf", version, about = "Part affinity field pose parsing toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a scene from a spec and render its fields.
    Gen(GenArgs),
    /// Extract part candidates from a field file.
    Detect(DetectArgs),
    /// Assemble people from a field file.
    Parse(ParseArgs),
    /// Render, parse and score a batch of synthetic scenes.
    Roundtrip(RoundtripArgs),
    /// Time pose assembly against the number of people.
    Bench(BenchArgs),
    /// Compare per-limb scan parsing with exhaustive assembly.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct TopologyArg {
    /// Built-in skeleton name or path to a topology JSON file.
    #[arg(long)]
    topology: Option<String>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long, default_value_t = 7.0)]
    sigma: f64,
    #[arg(long = "sigma-limb", default_value_t = 8.0)]
    sigma_limb: f64,
    #[arg(long, default_value_t = 1)]
    stride: usize,
}

impl RenderArgs {
    fn params(&self) -> RenderParams {
        RenderParams { sigma: self.sigma, sigma_limb: self.sigma_limb, stride: self.stride }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MatcherArg {
    Hungarian,
    Greedy,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// Peak threshold for candidate detection.
    #[arg(long, default_value_t = 0.1)]
    threshold: f64,
    /// Line integral samples per candidate pair.
    #[arg(long, default_value_t = 10)]
    samples: usize,
    #[arg(long, value_enum, default_value_t = MatcherArg::Hungarian)]
    matcher: MatcherArg,
    #[arg(long = "min-parts", default_value_t = 3)]
    min_parts: usize,
    /// Ignore non-tree limbs.
    #[arg(long = "no-redundant")]
    no_redundant: bool,
}

impl PipelineArgs {
    fn detect(&self) -> DetectConfig {
        DetectConfig { threshold: self.threshold, ..DetectConfig::default() }
    }

    fn parse(&self) -> ParseConfig {
        ParseConfig {
            min_parts: self.min_parts,
            matcher: match self.matcher {
                MatcherArg::Hungarian => Matcher::Hungarian,
                MatcherArg::Greedy => Matcher::Greedy,
            },
            association: AssociationConfig { n_samples: self.samples, ..AssociationConfig::default() },
            use_redundant: !self.no_redundant,
            ..ParseConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct SpecArgs {
    /// Scene spec JSON; flags below override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[command(flatten)]
    topology: TopologyArg,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    render: RenderArgs,
    /// Output directory for `scene.json` and `fields.paff`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DetectArgs {
    fields: PathBuf,
    #[command(flatten)]
    topology: TopologyArg,
    #[arg(long, default_value_t = 0.1)]
    threshold: f64,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ParseArgs {
    fields: PathBuf,
    /// Candidates from `detect`; detected from the fields when omitted.
    #[arg(long)]
    candidates: Option<PathBuf>,
    #[command(flatten)]
    topology: TopologyArg,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Aligned text instead of JSON on standard output.
    #[arg(long)]
    human: bool,
    /// Write the JSON report here as well.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Drop wall-clock fields and timing checks from the report.
    #[arg(long = "no-timing")]
    no_timing: bool,
}

#[derive(Debug, Args)]
struct RoundtripArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    render: RenderArgs,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, default_value_t = 100)]
    scenes: usize,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// AP-vs-OKS-threshold CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    report: ReportArgs,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Comma-separated people counts.
    #[arg(long, value_delimiter = ',', default_value = "1,3,6,9,12")]
    people: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    render: RenderArgs,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Latency CSV path; standard output gets JSON.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    human: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InstanceSource {
    /// Score matrices drawn directly.
    Random,
    /// Rendered five-part scenes.
    Rendered,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long, value_enum, default_value_t = InstanceSource::Random)]
    source: InstanceSource,
    #[arg(long, default_value_t = 200)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long = "min-ratio", default_value_t = 0.95)]
    min_ratio: f64,
    /// Required exhaustive/scan wall-time ratio.
    #[arg(long = "min-speedup")]
    min_speedup: Option<f64>,
    #[command(flatten)]
    report: ReportArgs,
}

enum Failure {
    Data(String),
    Check(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse_from(std::env::args_os()) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Detect(a) => detect(a),
        Command::Parse(a) => parse(a),
        Command::Roundtrip(a) => roundtrip(a),
        Command::Bench(a) => bench(a),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Check(m)) => {
            eprintln!("check failed: {m}");
            ExitCode::from(3)
        }
    }
}

fn topology_source(arg: &str) -> Result<TopologySource, Failure> {
    if builtin::NAMES.contains(&arg) {
        return Ok(TopologySource::Builtin(arg.to_owned()));
    }
    let text = fs::read_to_string(arg)
        .map_err(|e| Failure::Data(format!("topology `{arg}` is neither built in nor readable: {e}")))?;
    Ok(TopologySource::Inline(RawTopology::from_json(&text)?))
}

fn load_topology(arg: &TopologyArg) -> Result<SkeletonTopology, Failure> {
    Ok(topology_source(arg.topology.as_deref().unwrap_or("coco18"))?.resolve()?)
}

fn load_spec(args: &SpecArgs) -> Result<SceneSpec, Failure> {
    let mut spec: SceneSpec = match &args.spec {
        Some(p) => read_json(p)?,
        None => SceneSpec::default(),
    };
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(w) = args.width {
        spec.width = w;
    }
    if let Some(h) = args.height {
        spec.height = h;
    }
    if let Some(t) = &args.topology.topology {
        spec.topology = topology_source(t)?;
    }
    spec.validate()?;
    Ok(spec)
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> CliResult {
    let text = to_json_pretty(value);
    match out {
        Some(p) => write_atomic(p, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn gen(a: GenArgs) -> CliResult {
    let spec = load_spec(&a.spec)?;
    let topology = spec.topology.resolve()?;
    let scene = random_scene(&spec)?;
    let stack = render_scene_fields(&scene, &topology, &a.render.params())?;
    fs::create_dir_all(&a.out)?;
    let scene_path = a.out.join("scene.json");
    let fields_path = a.out.join("fields.paff");
    write_atomic(&scene_path, to_json_pretty(&scene).as_bytes())?;
    write_fields(&stack, &fields_path)?;
    #[derive(Serialize)]
    struct Summary {
        topology: TopologyRef,
        people: usize,
        grid: Grid,
        scene: PathBuf,
        fields: PathBuf,
    }
    emit(
        &Summary {
            topology: TopologyRef::of(&topology),
            people: scene.people.len(),
            grid: Grid { width: stack.width, height: stack.height, stride: a.render.stride },
            scene: scene_path,
            fields: fields_path,
        },
        None,
    )
}

fn detect(a: DetectArgs) -> CliResult {
    let topology = load_topology(&a.topology)?;
    let stack = read_fields(&a.fields, &topology)?;
    let config = DetectConfig { threshold: a.threshold, ..DetectConfig::default() };
    let file = CandidateFile {
        topology: TopologyRef::of(&topology),
        grid: Grid { width: stack.width, height: stack.height, stride: a.stride },
        candidates: detect_candidates(&stack, &config),
    };
    emit(&file, a.out.as_deref())
}

fn parse(a: ParseArgs) -> CliResult {
    let topology = load_topology(&a.topology)?;
    let classes = topology.classify_edges(topology.default_root())?;
    let stack = read_fields(&a.fields, &topology)?;
    let (candidates, grid) = match &a.candidates {
        Some(p) => {
            let file: CandidateFile = read_json(p)?;
            file.topology.check(&topology)?;
            (file.candidates, file.grid)
        }
        None => (
            detect_candidates(&stack, &a.pipeline.detect()),
            Grid { width: stack.width, height: stack.height, stride: a.stride },
        ),
    };
    let result = parse_poses(&candidates, &stack, &topology, &classes, &a.pipeline.parse())?;
    emit(&PoseFile::from_parse(&result, &candidates, &grid, &topology), a.out.as_deref())
}

fn finish_report(report: MatchReport, args: &ReportArgs) -> CliResult {
    let report = if args.no_timing { report.without_timing() } else { report };
    if let Some(p) = &args.out {
        write_atomic(p, (report.to_json() + "\n").as_bytes())?;
    }
    if args.human {
        print!("{}", report.to_text());
    } else {
        println!("{}", report.to_json());
    }
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(failed.join(", ")))
    }
}

fn roundtrip(a: RoundtripArgs) -> CliResult {
    let spec = load_spec(&a.spec)?;
    let pipeline = ScenePipeline {
        render: a.render.params(),
        detect: a.pipeline.detect(),
        parse: a.pipeline.parse(),
    };
    let report = roundtrip_suite(
        &spec,
        a.scenes,
        &pipeline,
        &EvalConfig::default(),
        &RoundtripTargets::default(),
        a.threads,
    )?;
    if let Some(p) = &a.csv {
        write_atomic(p, report.ap_csv().as_bytes())?;
    }
    finish_report(report, &a.report)
}

fn bench(a: BenchArgs) -> CliResult {
    let stats = a
        .people
        .iter()
        .map(|&n| bench_parse(n, a.reps, a.seed, &a.render.params(), &a.pipeline.parse()))
        .collect::<Result<Vec<_>, _>>()?;
    let csv = latency_csv(&stats);
    if let Some(p) = &a.csv {
        write_atomic(p, csv.as_bytes())?;
    }
    if a.human {
        print!("{csv}");
        Ok(())
    } else {
        emit(&stats, None)
    }
}

fn compare(a: CompareArgs) -> CliResult {
    let instances = match a.source {
        InstanceSource::Random => random_score_instances(&RandomInstanceSpec {
            seed: a.seed,
            instances: a.instances,
            ..RandomInstanceSpec::default()
        })?,
        InstanceSource::Rendered => {
            let pipeline = ScenePipeline {
                detect: a.pipeline.detect(),
                parse: a.pipeline.parse(),
                ..ScenePipeline::default()
            };
            rendered_instances(&mini5_scene_spec(a.seed), a.instances, &pipeline)?
        }
    };
    let targets = CompareTargets { min_score_ratio: a.min_ratio, min_speedup: a.min_speedup };
    let config = a.pipeline.parse().unpruned();
    let report = compare_strategies(&instances, &config, &EvalConfig::default(), &targets)?;
    finish_report(report, &a.report)
}
