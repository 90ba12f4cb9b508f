//! Command-line frontend.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::channel::{
    cir, coverage_map, render_png, write_coverage, CirOptions, CoverageMap, CoverageOptions, GridSpec, PngOptions,
};
use crate::error::{Error, Result};
use crate::mathdiff::Vec3;
use crate::optim::{generate_dataset, learn_materials, optimize_orientation, region_points, Dataset, OptimConfig};
use crate::scene::{load_scene, write_scene, MaterialModel, Scene};
use crate::tracer::{compute_paths, Method, PathSet, TraceConfig, Tracer};

#[derive(Debug, Parser)]
#[command(
    name = "radiotrace",
    version,
    about = "Differentiable specular ray tracing for radio propagation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Trace paths between all transmitters and receivers.
    Trace(TraceCmd),
    /// Path-gain map on a horizontal grid.
    Coverage(CoverageCmd),
    /// Frequency responses at probe positions for material learning.
    GenDataset(DatasetCmd),
    /// Learn trainable material parameters from a dataset.
    Calibrate(CalibrateCmd),
    /// Orient a transmitter toward a target region.
    Orient(OrientCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Exhaustive,
    Fibonacci,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// Scene description (JSON).
    #[arg(long, value_name = "FILE")]
    pub scene: PathBuf,
    /// Maximum number of reflections per path.
    #[arg(long, value_name = "N", default_value_t = 3)]
    pub max_depth: usize,
    /// Candidate generation method.
    #[arg(long, value_enum, default_value_t = MethodArg::Fibonacci)]
    pub method: MethodArg,
    /// Rays launched by the fibonacci method.
    #[arg(long, value_name = "N", default_value_t = 4096)]
    pub num_rays: usize,
}

impl TraceArgs {
    fn config(&self) -> Result<TraceConfig> {
        if self.max_depth > 16 {
            return Err(Error::Config(format!(
                "--max-depth {} is above the limit of 16",
                self.max_depth
            )));
        }
        let method = match self.method {
            MethodArg::Exhaustive => Method::Exhaustive,
            MethodArg::Fibonacci => {
                if self.num_rays == 0 {
                    return Err(Error::Config("--num-rays must be positive".into()));
                }
                Method::Fibonacci {
                    num_rays: self.num_rays,
                }
            }
        };
        Ok(TraceConfig {
            max_depth: self.max_depth,
            method,
            ..TraceConfig::default()
        })
    }
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Grid size in cells, e.g. 64x64.
    #[arg(long, value_name = "WxH", value_parser = parse_grid, default_value = "64x64")]
    pub grid: (usize, usize),
    /// Cell edge length.
    #[arg(long, value_name = "METERS", default_value_t = 2.0)]
    pub cell: f64,
    /// Probe height.
    #[arg(long, value_name = "METERS", default_value_t = 1.5)]
    pub height: f64,
    /// Lower-left grid corner; defaults to centering the grid on the transmitter.
    #[arg(long, value_name = "X,Y", value_parser = parse_pair)]
    pub origin: Option<(f64, f64)>,
}

impl GridArgs {
    fn spec(&self) -> GridSpec {
        GridSpec {
            nx: self.grid.0,
            ny: self.grid.1,
            cell: self.cell,
            height: self.height,
            origin: self.origin.map(|(x, y)| [x, y]),
        }
    }
}

#[derive(Debug, Args)]
pub struct OptimArgs {
    /// Base learning rate (conductivity steps use a tenth of it).
    #[arg(long, value_name = "RATE", default_value_t = 0.05)]
    pub lr: f64,
    /// Iteration cap.
    #[arg(long, value_name = "N", default_value_t = 500)]
    pub iterations: usize,
    /// Write the per-iteration log as CSV.
    #[arg(long, value_name = "FILE")]
    pub log: Option<PathBuf>,
}

impl OptimArgs {
    fn config(&self) -> Result<OptimConfig> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::Config(format!("--lr {} must be a non-negative number", self.lr)));
        }
        Ok(OptimConfig {
            iterations: self.iterations,
            lr: self.lr,
            ..OptimConfig::default()
        })
    }
}

#[derive(Debug, Args)]
pub struct TraceCmd {
    #[command(flatten)]
    pub trace: TraceArgs,
    /// Path records, one JSON object per line.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Channel impulse response as JSON.
    #[arg(long, value_name = "FILE")]
    pub cir: Option<PathBuf>,
    /// Measure CIR delays from the first arrival of each link.
    #[arg(long)]
    pub normalize_delays: bool,
    /// Top-down image of the traced paths.
    #[arg(long, value_name = "FILE")]
    pub png: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CoverageCmd {
    #[command(flatten)]
    pub trace: TraceArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Binary coverage map.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Path-gain image in dB.
    #[arg(long, value_name = "FILE")]
    pub png: Option<PathBuf>,
    /// Draw paths to the scene receivers on the image.
    #[arg(long)]
    pub overlay_paths: bool,
}

#[derive(Debug, Args)]
pub struct DatasetCmd {
    #[command(flatten)]
    pub trace: TraceArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Take probe positions from the scene receivers instead of the grid.
    #[arg(long)]
    pub use_receivers: bool,
    /// Number of subcarriers.
    #[arg(long, value_name = "N", default_value_t = 128)]
    pub subcarriers: usize,
    /// Subcarrier spacing.
    #[arg(long, value_name = "HZ", default_value_t = 30e3)]
    pub spacing: f64,
    /// Dataset (JSON).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateCmd {
    #[command(flatten)]
    pub trace: TraceArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// Dataset produced by gen-dataset.
    #[arg(long, value_name = "FILE")]
    pub data: PathBuf,
    /// Starting relative permittivity for every trainable material.
    #[arg(long, value_name = "VALUE")]
    pub init_permittivity: Option<f64>,
    /// Starting conductivity for every trainable material.
    #[arg(long, value_name = "S_PER_M")]
    pub init_conductivity: Option<f64>,
    /// Scene with the learned materials.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OrientCmd {
    #[command(flatten)]
    pub trace: TraceArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// Device to orient; defaults to the first transmitter.
    #[arg(long, value_name = "NAME")]
    pub device: Option<String>,
    /// Center of the target region.
    #[arg(long, value_name = "X,Y", value_parser = parse_pair)]
    pub target: (f64, f64),
    /// Radius of the target region.
    #[arg(long, value_name = "METERS", default_value_t = 0.0)]
    pub radius: f64,
    /// Probe spacing inside the region.
    #[arg(long, value_name = "METERS", default_value_t = 2.0)]
    pub cell: f64,
    /// Probe height.
    #[arg(long, value_name = "METERS", default_value_t = 1.5)]
    pub height: f64,
    /// Scene with the optimized orientation.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

fn parse_grid(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got '{s}'"))?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad grid width '{w}'"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad grid height '{h}'"))?;
    if w == 0 || h == 0 {
        return Err("grid dimensions must be positive".into());
    }
    Ok((w, h))
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected X,Y, got '{s}'"))?;
    let a: f64 = a.trim().parse().map_err(|_| format!("bad number '{a}'"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad number '{b}'"))?;
    if !(a.is_finite() && b.is_finite()) {
        return Err("coordinates must be finite".into());
    }
    Ok((a, b))
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code: 0 on success, 1 on bad input, 2 on an internal error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match panic::catch_unwind(AssertUnwindSafe(|| execute(&cli.command))) {
        Ok(Ok(summary)) => {
            println!("{summary}");
            0
        }
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            if e.is_user_error() {
                1
            } else {
                2
            }
        }
        Err(_) => {
            eprintln!("error: internal failure");
            2
        }
    }
}

fn execute(cmd: &Command) -> Result<String> {
    match cmd {
        Command::Trace(c) => run_trace(c),
        Command::Coverage(c) => run_coverage(c),
        Command::GenDataset(c) => run_dataset(c),
        Command::Calibrate(c) => run_calibrate(c),
        Command::Orient(c) => run_orient(c),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// One JSON object per path record.
pub fn path_dump(scene: &Scene, paths: &PathSet) -> String {
    let mut out = String::new();
    for r in paths.records(scene) {
        out.push_str(&serde_json::to_string(&r).expect("path record serializes"));
        out.push('\n');
    }
    out
}

/// Polylines (source, interactions, target) of every path.
pub fn path_polylines(paths: &PathSet) -> Vec<Vec<Vec3>> {
    paths
        .paths
        .iter()
        .flatten()
        .flatten()
        .map(|p| p.vertices.clone())
        .collect()
}

/// Blank map covering the scene, devices and overlay with a margin.
fn canvas(scene: &Scene, overlay: &[Vec<Vec3>]) -> CoverageMap {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let mut grow = |p: &Vec3| {
        lo = [lo[0].min(p.x), lo[1].min(p.y)];
        hi = [hi[0].max(p.x), hi[1].max(p.y)];
    };
    scene.devices().iter().for_each(|d| grow(&d.position));
    overlay.iter().flatten().for_each(&mut grow);
    if !lo[0].is_finite() {
        lo = [-1.0, -1.0];
        hi = [1.0, 1.0];
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1.0) * 1.1;
    let n = 256;
    let cell = span / n as f64;
    let cx = 0.5 * (lo[0] + hi[0]);
    let cy = 0.5 * (lo[1] + hi[1]);
    CoverageMap {
        origin: [cx - span / 2.0, cy - span / 2.0],
        cell_size: cell,
        nx: n,
        ny: n,
        height: 0.0,
        frequency_hz: scene.frequency_hz(),
        gain: vec![0.0; n * n],
    }
}

fn run_trace(c: &TraceCmd) -> Result<String> {
    let cfg = c.trace.config()?;
    let scene = load_scene(&c.trace.scene)?;
    if scene.transmitters().next().is_none() || scene.receivers().next().is_none() {
        return Err(Error::Validation(format!(
            "{}: tracing needs at least one transmitter and one receiver",
            c.trace.scene.display()
        )));
    }
    let tracer = Tracer::new(&scene, cfg)?;
    let paths = tracer.compute_paths()?;
    write_file(&c.out, path_dump(&scene, &paths).as_bytes())?;
    if let Some(p) = &c.cir {
        let opts = CirOptions {
            normalize_delays: c.normalize_delays,
            ..CirOptions::default()
        };
        let cir = cir(&scene, Some(tracer.bvh()), &paths, &opts);
        let text = serde_json::to_string(&cir).expect("cir serializes");
        write_file(p, (text + "\n").as_bytes())?;
    }
    if let Some(p) = &c.png {
        let overlay = path_polylines(&paths);
        let map = canvas(&scene, &overlay);
        render_png(
            &map,
            &PngOptions {
                overlay,
                scale: 2,
                ..PngOptions::default()
            },
            p,
        )?;
    }
    Ok(format!("{} paths written to {}", paths.total(), c.out.display()))
}

fn run_coverage(c: &CoverageCmd) -> Result<String> {
    let trace = c.trace.config()?;
    let scene = load_scene(&c.trace.scene)?;
    let opts = CoverageOptions {
        grid: c.grid.spec(),
        trace,
        ..CoverageOptions::default()
    };
    let map = coverage_map(&scene, &opts)?;
    write_coverage(&c.out, &map)?;
    if let Some(p) = &c.png {
        let overlay = if c.overlay_paths && scene.receivers().next().is_some() {
            path_polylines(&compute_paths(&scene, trace)?)
        } else {
            Vec::new()
        };
        render_png(
            &map,
            &PngOptions {
                overlay,
                ..PngOptions::default()
            },
            p,
        )?;
    }
    Ok(format!(
        "{}x{} coverage map written to {}",
        map.nx,
        map.ny,
        c.out.display()
    ))
}

fn dataset_positions(c: &DatasetCmd, scene: &Scene) -> Result<Vec<Vec3>> {
    if c.use_receivers {
        let p: Vec<Vec3> = scene.receivers().map(|(_, d)| d.position).collect();
        if p.is_empty() {
            return Err(Error::Validation(
                "--use-receivers given but the scene has no receiver".into(),
            ));
        }
        return Ok(p);
    }
    let g = c.grid.spec();
    if !(g.cell > 0.0) {
        return Err(Error::Config("--cell must be positive".into()));
    }
    let (_, tx) = scene
        .transmitters()
        .next()
        .ok_or_else(|| Error::Validation("scene has no transmitter".into()))?;
    let origin = g.origin.unwrap_or([
        tx.position.x - g.nx as f64 * g.cell / 2.0,
        tx.position.y - g.ny as f64 * g.cell / 2.0,
    ]);
    let mut out = Vec::with_capacity(g.nx * g.ny);
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            out.push(Vec3::new(
                origin[0] + (ix as f64 + 0.5) * g.cell,
                origin[1] + (iy as f64 + 0.5) * g.cell,
                g.height,
            ));
        }
    }
    Ok(out)
}

fn run_dataset(c: &DatasetCmd) -> Result<String> {
    let trace = c.trace.config()?;
    if c.subcarriers == 0 || !(c.spacing.is_finite() && c.spacing > 0.0) {
        return Err(Error::Config("--subcarriers and --spacing must be positive".into()));
    }
    let scene = load_scene(&c.trace.scene)?;
    let positions = dataset_positions(c, &scene)?;
    let data = generate_dataset(&scene, &positions, c.subcarriers, c.spacing, trace)?;
    data.save(&c.out)?;
    Ok(format!("{} records written to {}", data.records.len(), c.out.display()))
}

fn run_calibrate(c: &CalibrateCmd) -> Result<String> {
    let trace = c.trace.config()?;
    let cfg = c.optim.config()?;
    let scene = load_scene(&c.trace.scene)?;
    let data = Dataset::load(&c.data)?;
    let scene = with_initial_materials(&scene, c.init_permittivity, c.init_conductivity)?;
    let r = learn_materials(&scene, &data, &cfg, trace)?;
    for (m, n) in scene.materials().iter().zip(&r.paths_per_material) {
        if m.trainable && *n == 0 {
            log::warn!(
                "trainable material '{}' is not touched by any path; left unchanged",
                m.name
            );
        }
    }
    write_scene(&r.scene, &c.out)?;
    if let Some(p) = &c.optim.log {
        write_file(p, r.log.to_csv().as_bytes())?;
    }
    let mut summary = format!(
        "{} iterations, final loss {:e}",
        r.log.rows.len(),
        r.log.final_loss().unwrap_or(f64::NAN)
    );
    for (n, v) in &r.leaves {
        write!(summary, "\n{n} = {v}").ok();
    }
    Ok(summary)
}

fn with_initial_materials(scene: &Scene, eps: Option<f64>, sigma: Option<f64>) -> Result<Scene> {
    if eps.is_none() && sigma.is_none() {
        return Ok(scene.clone());
    }
    let f = scene.frequency_hz();
    let mut mats = scene.materials().to_vec();
    for m in mats.iter_mut().filter(|m| m.trainable) {
        let p = m.params(f);
        m.model = MaterialModel::Constant {
            relative_permittivity: eps.unwrap_or(p.permittivity),
            conductivity: sigma.unwrap_or(p.conductivity),
        };
    }
    scene.with_materials(mats)
}

fn run_orient(c: &OrientCmd) -> Result<String> {
    let trace = c.trace.config()?;
    let cfg = c.optim.config()?;
    let scene = load_scene(&c.trace.scene)?;
    let device = match &c.device {
        Some(n) => scene
            .device_index(n)
            .ok_or_else(|| Error::Validation(format!("no device named '{n}' in the scene")))?,
        None => scene
            .transmitters()
            .next()
            .map(|(i, _)| i)
            .ok_or_else(|| Error::Validation("scene has no transmitter".into()))?,
    };
    let region = region_points([c.target.0, c.target.1], c.radius, c.cell, c.height)?;
    let r = optimize_orientation(&scene, device, &region, &cfg, trace)?;
    write_scene(&r.scene, &c.out)?;
    if let Some(p) = &c.optim.log {
        write_file(p, r.log.to_csv().as_bytes())?;
    }
    let [y, p, ro] = r.orientation;
    Ok(format!(
        "region gain {:.3} dB -> {:.3} dB; yaw {y} pitch {p} roll {ro} rad",
        r.initial_db, r.final_db
    ))
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    use super::*;

    const DOCUMENTED: [&str; 14] = [
        "scene",
        "max-depth",
        "method",
        "num-rays",
        "grid",
        "cell",
        "height",
        "subcarriers",
        "spacing",
        "lr",
        "iterations",
        "out",
        "png",
        "log",
    ];

    #[test]
    fn help_and_parser_agree() {
        let mut root = Cli::command();
        root.build();
        let mut seen = std::collections::BTreeSet::new();
        for sub in root.get_subcommands_mut() {
            let help = sub.render_long_help().to_string();
            for arg in sub.get_arguments() {
                let Some(long) = arg.get_long() else { continue };
                if long == "help" {
                    continue;
                }
                assert!(
                    help.contains(&format!("--{long}")),
                    "{} --{long} missing from help",
                    sub.get_name()
                );
                assert!(
                    arg.get_help().is_some(),
                    "{} --{long} has no description",
                    sub.get_name()
                );
                seen.insert(long.to_string());
            }
            for line in help.lines() {
                let t = line.trim_start();
                if let Some(rest) = t.strip_prefix("--") {
                    let flag: String = rest.chars().take_while(|c| c.is_alphanumeric() || *c == '-').collect();
                    assert!(
                        flag == "help" || sub.get_arguments().any(|a| a.get_long() == Some(flag.as_str())),
                        "{} help lists unknown --{flag}",
                        sub.get_name()
                    );
                }
            }
        }
        for f in DOCUMENTED {
            assert!(seen.contains(f), "--{f} is not accepted by any subcommand");
        }
    }

    #[test]
    fn grid_and_pair_parsers() {
        assert_eq!(parse_grid("10x20"), Ok((10, 20)));
        assert!(parse_grid("10").is_err());
        assert!(parse_grid("0x5").is_err());
        assert_eq!(parse_pair("1.5,-2"), Ok((1.5, -2.0)));
        assert!(parse_pair("1;2").is_err());
    }

    #[test]
    fn bad_flags_exit_with_user_error() {
        assert_eq!(run(["radiotrace", "trace", "--scene", "x.scene"]), 1);
        assert_eq!(
            run(["radiotrace", "coverage", "--scene", "x", "--out", "y", "--grid", "3"]),
            1
        );
        assert_eq!(run(["radiotrace", "--help"]), 0);
    }
}
