// Copyright 2026 The ribvf Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


//! `ribvf` command-line tool.
//!
//! Every command prints one JSON document on stdout when it succeeds. On
//! failure it prints `{"error": {"kind": ..., "message": ...}}` on stderr
//! and exits nonzero (2 for usage errors, 1 otherwise).

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ribvf::body::{
    fit_body_with, generate_body, BodyDocument, BodyError, BodyInstance, FitOptions, PointCloud, PoseDocument,
    PoseParams, ShapeParams, DEFAULT_RESOLUTION,
};
use ribvf::geometry::{io as meshio, GeometryError, TriMesh};
use ribvf::harness::{
    analyze, run_replay, run_replay_with, HarnessError, RecordedOperator, Session, SessionConfig, SessionLog,
};
use ribvf::ribs::{build_all_fixtures, RibError, TubeConfig};
use ribvf::Vec3;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "ribvf", version, about = "Rib-avoiding virtual fixtures: bodies, fixtures, replays and live sessions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a torso; writes `<out>.obj` (skin and rib ribbons) and `<out>.json`.
    GenerateBody {
        /// Body document (shape, pose, resolution); overrides --seed.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Draw a random subject shape from this seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit shape and pose to a scan (.ply or .xyz); writes a body document.
    Fit {
        #[arg(long)]
        cloud: PathBuf,
        /// Initial pose document.
        #[arg(long)]
        init: Option<PathBuf>,
        /// JSON object mapping landmark names to [x, y, z].
        #[arg(long)]
        landmarks: Option<PathBuf>,
        /// Fit options.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the 12 rib tubes; writes `<out>.obj` and a `<out>.json` sidecar.
    BuildFixtures {
        #[arg(long)]
        body: PathBuf,
        /// Tube configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export one mesh of a body as OBJ or PLY.
    ExportMesh {
        #[arg(long)]
        body: PathBuf,
        #[arg(long, value_enum, default_value_t = MeshKind::Skin)]
        mesh: MeshKind,
        #[arg(long, value_enum)]
        format: Option<MeshFormat>,
        /// Tube configuration (fixtures only).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scripted or recorded exam; writes the frame log, prints metrics.
    Replay {
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long, value_enum, default_value_t = Toggle::On)]
        vf: Toggle,
        /// Replay the leader stream of this log instead of the scripted operator.
        #[arg(long)]
        recorded: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Metrics and plot series of a frame log.
    Analyze {
        #[arg(long)]
        log: PathBuf,
        /// Session the log came from; enables the safety audit.
        #[command(flatten)]
        session: SessionArgs,
        /// Keep every n-th frame in the plot series.
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve a live session over WebSocket until interrupted.
    Serve {
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long, default_value = "127.0.0.1:8765")]
        addr: String,
    },
}

#[derive(Args, Default)]
struct SessionArgs {
    /// Session configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Body document replacing the configured shape and pose.
    #[arg(long)]
    body: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MeshKind {
    Skin,
    Ribs,
    Fixtures,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MeshFormat {
    Obj,
    Ply,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Debug)]
struct CliError {
    kind: &'static str,
    message: String,
}

impl CliError {
    fn new(kind: &'static str, message: impl Into<String>) -> Self {
        CliError { kind, message: message.into() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new("io", e.to_string())
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::new("geometry", e.to_string())
    }
}

impl From<BodyError> for CliError {
    fn from(e: BodyError) -> Self {
        CliError::new("body", e.to_string())
    }
}

impl From<RibError> for CliError {
    fn from(e: RibError) -> Self {
        CliError::new("ribs", e.to_string())
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        let kind = match &e {
            HarnessError::Config(_) => "config",
            HarnessError::Body(_) => "body",
            HarnessError::Ribs(_) => "ribs",
            HarnessError::Geometry(_) => "geometry",
            HarnessError::Sim(_) => "sim",
            HarnessError::Log(_) => "log",
            HarnessError::Io(_) => "io",
        };
        CliError::new(kind, e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::new("usage", e.to_string().trim_end()), 2),
    };
    // batch commands are single-threaded; fits are identical either way
    let _ = rayon::ThreadPoolBuilder::new().num_threads(1).build_global();
    match run(cli.command) {
        Ok(v) => {
            // a closed pipe on stdout is not an error of the command
            let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&v).expect("json values serialise"));
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e, 1),
    }
}

fn fail(e: &CliError, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": { "kind": e.kind, "message": e.message } }));
    ExitCode::from(code)
}

fn run(command: Command) -> Result<Value> {
    match command {
        Command::GenerateBody { config, seed, resolution, out } => generate(config, seed, resolution, &out),
        Command::Fit { cloud, init, landmarks, config, out } => fit(&cloud, init, landmarks, config, &out),
        Command::BuildFixtures { body, config, out } => fixtures(&body, config, &out),
        Command::ExportMesh { body, mesh, format, config, out } => export(&body, mesh, format, config, &out),
        Command::Replay { session, vf, recorded, out } => replay(&session, vf == Toggle::On, recorded, &out),
        Command::Analyze { log, session, stride, out } => analyze_log(&log, &session, stride, out),
        Command::Serve { session, addr } => serve(&session, &addr),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::new("config", format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))
}

fn sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn load_body(path: &Path) -> Result<BodyInstance> {
    let doc = BodyDocument::from_json(&read(path)?)?;
    Ok(generate_body(&doc.shape, &doc.pose, doc.resolution)?)
}

fn obj_bytes(objects: &[(&str, &TriMesh)]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    meshio::write_obj(&mut buf, objects)?;
    Ok(buf)
}

fn generate(config: Option<PathBuf>, seed: Option<u64>, resolution: Option<usize>, out: &Path) -> Result<Value> {
    let mut doc = match (&config, seed) {
        (Some(path), _) => BodyDocument::from_json(&read(path)?)?,
        (None, Some(seed)) => BodyDocument::new(
            ShapeParams::sample(&mut ChaCha8Rng::seed_from_u64(seed)),
            PoseParams::default(),
            DEFAULT_RESOLUTION,
        ),
        (None, None) => BodyDocument::new(ShapeParams::default(), PoseParams::default(), DEFAULT_RESOLUTION),
    };
    if let Some(r) = resolution {
        doc.resolution = r;
    }
    let body = generate_body(&doc.shape, &doc.pose, doc.resolution)?;
    let obj = obj_bytes(&[("skin", &body.skin), ("ribs", &body.rib_mesh)])?;
    let (obj_path, json_path) = (out.with_extension("obj"), out.with_extension("json"));
    write_file(&obj_path, &obj)?;
    write_file(&json_path, doc.to_json().as_bytes())?;
    Ok(json!({
        "mesh": obj_path,
        "body": json_path,
        "sha256": sha256(&obj),
        "skin_faces": body.skin.face_count(),
        "shape": doc.shape,
    }))
}

fn fit(cloud: &Path, init: Option<PathBuf>, landmarks: Option<PathBuf>, config: Option<PathBuf>, out: &Path) -> Result<Value> {
    let points = PointCloud::load(cloud)?;
    let init = match init {
        Some(p) => PoseDocument::from_json(&read(&p)?)?,
        None => PoseParams::default(),
    };
    let landmarks: BTreeMap<String, Vec3> = match landmarks {
        Some(p) => parse::<BTreeMap<String, [f64; 3]>>(&p)?.into_iter().map(|(k, v)| (k, Vec3::from(v))).collect(),
        None => BTreeMap::new(),
    };
    let opts: FitOptions = match config {
        Some(p) => parse(&p)?,
        None => FitOptions::default(),
    };
    let result = fit_body_with(&points, &landmarks, &init, &ShapeParams::default(), &opts)?;
    let doc = BodyDocument::new(result.shape, result.pose, opts.resolution);
    write_file(out, doc.to_json().as_bytes())?;
    Ok(json!({
        "body": out,
        "residual": result.residual,
        "shape": result.shape,
        "pose": result.pose,
        "report": result.report,
    }))
}

fn tube_config(config: Option<PathBuf>) -> Result<TubeConfig> {
    match config {
        Some(p) => parse(&p),
        None => Ok(TubeConfig::default()),
    }
}

fn fixtures(body: &Path, config: Option<PathBuf>, out: &Path) -> Result<Value> {
    let body = load_body(body)?;
    let set = build_all_fixtures(&body, &tube_config(config)?)?;
    let mut obj = Vec::new();
    set.write_obj(&mut obj)?;
    let (obj_path, json_path) = (out.with_extension("obj"), out.with_extension("json"));
    write_file(&obj_path, &obj)?;
    let sidecar = serde_json::to_string_pretty(&set.sidecar()).expect("sidecar serialises");
    write_file(&json_path, sidecar.as_bytes())?;
    Ok(json!({
        "mesh": obj_path,
        "sidecar": json_path,
        "sha256": sha256(&obj),
        "tubes": set.tubes.iter().map(|t| t.id.to_string()).collect::<Vec<_>>(),
    }))
}

fn export(body: &Path, kind: MeshKind, format: Option<MeshFormat>, config: Option<PathBuf>, out: &Path) -> Result<Value> {
    let body = load_body(body)?;
    let format = format.unwrap_or_else(|| match out.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("ply") => MeshFormat::Ply,
        _ => MeshFormat::Obj,
    });
    let set = match kind {
        MeshKind::Fixtures => Some(build_all_fixtures(&body, &tube_config(config)?)?),
        _ => None,
    };
    let (name, mesh) = match (&set, kind) {
        (Some(set), _) => ("fixtures", &set.merged),
        (None, MeshKind::Ribs) => ("ribs", &body.rib_mesh),
        (None, _) => ("skin", &body.skin),
    };
    let bytes = match (format, &set) {
        (MeshFormat::Ply, _) => {
            let mut buf = Vec::new();
            meshio::write_ply(&mut buf, mesh)?;
            buf
        }
        // one named object per tube
        (MeshFormat::Obj, Some(set)) => {
            let mut buf = Vec::new();
            set.write_obj(&mut buf)?;
            buf
        }
        (MeshFormat::Obj, None) => obj_bytes(&[(name, mesh)])?,
    };
    write_file(out, &bytes)?;
    Ok(json!({
        "mesh": out,
        "vertices": mesh.vertices().len(),
        "faces": mesh.face_count(),
        "sha256": sha256(&bytes),
    }))
}

fn session_config(args: &SessionArgs) -> Result<SessionConfig> {
    let mut cfg = match &args.config {
        Some(p) => SessionConfig::from_json(&read(p)?)?,
        None => SessionConfig::default(),
    };
    if let Some(p) = &args.body {
        let doc = BodyDocument::from_json(&read(p)?)?;
        cfg.shape = doc.shape;
        cfg.pose = doc.pose;
        cfg.resolution = doc.resolution;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn replay(args: &SessionArgs, vf: bool, recorded: Option<PathBuf>, out: &Path) -> Result<Value> {
    let session = Session::build(session_config(args)?)?;
    let output = match recorded {
        None => run_replay(&session, vf)?,
        Some(path) => {
            let samples = SessionLog::load(&path)?.leader_samples();
            let period = session.config.follower.impedance.period;
            let end = samples.last().map_or(0.0, |s| s.0) + 1.0;
            let mut op = RecordedOperator::new(samples, period)?;
            run_replay_with(&session, &mut op, vf, None, end)?
        }
    };
    let file = fs::File::create(out).map_err(|e| CliError::new("io", format!("{}: {e}", out.display())))?;
    output.log.write_jsonl(BufWriter::new(file))?;
    Ok(json!({
        "log": out,
        "frames": output.log.frames.len(),
        "complete": output.log.complete,
        "vf_enabled": vf,
        "metrics": output.metrics,
    }))
}

fn analyze_log(log: &Path, args: &SessionArgs, stride: usize, out: Option<PathBuf>) -> Result<Value> {
    if stride == 0 {
        return Err(CliError::new("usage", "--stride must be at least 1"));
    }
    let log = SessionLog::load(log)?;
    let audit_session = (args.config.is_some() || args.body.is_some())
        .then(|| session_config(args).and_then(|c| Ok(Session::build(c)?)))
        .transpose()?;
    let report = analyze(&log, audit_session.as_ref().map(|s| &s.scene.fixture), stride);
    if let Some(path) = &out {
        let file = fs::File::create(path).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, &report).map_err(|e| CliError::new("io", e.to_string()))?;
        w.flush()?;
    }
    Ok(json!({
        "report": out,
        "partial": report.partial,
        "metrics": report.metrics,
        "safety": report.safety,
    }))
}

fn serve(args: &SessionArgs, addr: &str) -> Result<Value> {
    let session = Arc::new(Session::build(session_config(args)?)?);
    let server = ribvf::harness::serve(session, addr)?;
    let mut stdout = std::io::stdout();
    let _ = writeln!(stdout, "{}", json!({ "listening": server.local_addr().to_string() }));
    let _ = stdout.flush();
    server.wait()?;
    Ok(json!({ "stopped": true }))
}
