//! Command-line front end.
//!
//! Every command is deterministic for a given configuration and seed; only
//! the `wall_ms` column changes between runs. Exit status is 0 on success,
//! 1 on runtime failure and 2 on usage or configuration errors.

use crate::error::Error;
use crate::field::{FieldOracle, SceneSpec};
use crate::localize::{acceleration_factor, compare_iou, extract, AlgoConfig, ExtractionResult, Variant, THRESHOLD_SWEEP};
use crate::mesh::{chamfer_distance, export_obj, hausdorff_distance, marching_cubes, p2s_distance, read_obj, sample_surface};
use crate::render::{render_view, write_ppm, CameraSpec, RenderConfig};
use crate::sampling::toy::{fit_toy_predictor, ToyDataset, ToyDatasetSpec, ToyReport};
use crate::grid::{write_plane_dump, ISO};
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const STATS_HEADER: &str = "scene,variant,threshold,tau,resolution,total_evals,accel_factor,iou,wall_ms";
pub const OHEM_HEADER: &str = "cluster,method,iou,epoch";
pub const METRICS_HEADER: &str = "pred,gt,samples,chamfer,p2s,hausdorff";

#[derive(Debug, Parser)]
#[command(name = "occfield", version, about = "Isosurface localization, mesh-free rendering and OHEM tools for occupancy fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract a surface with one strategy and export it as OBJ.
    Extract(ExtractArgs),
    /// Sweep strategies, thresholds and resolutions over scenes.
    Bench(BenchArgs),
    /// Render a textured scene from a camera without building a mesh.
    Render(RenderArgs),
    /// Compare two OBJ meshes.
    Metrics(MetricsArgs),
    /// Paired uniform vs hard-example-mining training on a toy dataset.
    OhemDemo(OhemArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long, default_value = "progressive")]
    pub variant: String,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value_t = 128)]
    pub resolution: usize,
    #[arg(long, default_value_t = crate::localize::DEFAULT_COARSEST)]
    pub coarsest: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Scene files; repeat the flag for several.
    #[arg(long, required = true)]
    pub scene: Vec<PathBuf>,
    /// Strategies to run; defaults to all four.
    #[arg(long)]
    pub variant: Vec<String>,
    /// Thresholds for octree_threshold; defaults to the standard sweep.
    #[arg(long)]
    pub threshold: Vec<f64>,
    #[arg(long, default_values_t = [128usize])]
    pub resolution: Vec<usize>,
    #[arg(long, default_value_t = crate::localize::DEFAULT_COARSEST)]
    pub coarsest: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// `yaw,pitch,dist` in degrees and distance (1 = orthographic framing).
    #[arg(long, default_value = "0,0,1")]
    pub camera: String,
    #[arg(long, default_value_t = 256)]
    pub resolution: usize,
    #[arg(long, default_value_t = crate::localize::DEFAULT_COARSEST)]
    pub coarsest: usize,
    /// Background as `r,g,b` in [0,1].
    #[arg(long, default_value = "1,1,1")]
    pub background: String,
    /// Also write the depth plane as a flat float dump.
    #[arg(long)]
    pub depth: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, default_value_t = crate::mesh::DEFAULT_SAMPLES)]
    pub samples: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct OhemArgs {
    /// Toy dataset spec (JSON).
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    /// Paired runs with seeds `seed, seed+1, ...`; rows report the median.
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    #[command(flatten)]
    pub common: Common,
}

/// Parses `argv` and runs; returns the process exit code.
pub fn run_from<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

pub fn main() -> ! {
    std::process::exit(run_from(std::env::args_os()))
}

fn exit_code(e: &anyhow::Error) -> i32 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()) {
        Some(
            Error::InvalidConfig(_) | Error::InvalidScene(_) | Error::Parse(_) | Error::Json(_) | Error::TextureUnavailable,
        ) => 2,
        _ => 1,
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let common = match &cli.command {
        Command::Extract(a) => &a.common,
        Command::Bench(a) => &a.common,
        Command::Render(a) => &a.common,
        Command::Metrics(a) => &a.common,
        Command::OhemDemo(a) => &a.common,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = common.workers {
        if w == 0 {
            return Err(Error::InvalidConfig("--workers must be at least 1".into()).into());
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build().context("building worker pool")?;
    fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    pool.install(|| match &cli.command {
        Command::Extract(a) => cmd_extract(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Render(a) => cmd_render(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::OhemDemo(a) => cmd_ohem_demo(a),
    })
}

fn load_scene(path: &Path) -> Result<SceneSpec> {
    SceneSpec::from_path(path).with_context(|| format!("loading scene {}", path.display()))
}

fn config_for(variant: Variant, threshold: Option<f64>, coarsest: usize, resolution: usize) -> Result<AlgoConfig> {
    let mut cfg = AlgoConfig::for_resolution(variant, coarsest, resolution)?;
    cfg.threshold = threshold;
    cfg.validate()?;
    Ok(cfg)
}

/// One stats row; `threshold` is blank when it does not apply.
#[allow(clippy::too_many_arguments)]
fn stats_row(
    scene: &str,
    variant: Variant,
    threshold: Option<f64>,
    tau: f64,
    resolution: usize,
    result: &ExtractionResult,
    accel: f64,
    iou: f64,
) -> String {
    format!(
        "{scene},{variant},{},{tau},{resolution},{},{accel},{iou},{:.3}",
        threshold.map(|t| t.to_string()).unwrap_or_default(),
        result.total_evals,
        result.wall_time.as_secs_f64() * 1e3
    )
}

fn open_csv(path: &Path, header: &str) -> Result<BufWriter<File>> {
    let fresh = !path.exists();
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut w = BufWriter::new(file);
    if fresh {
        writeln!(w, "{header}")?;
    }
    Ok(w)
}

pub fn cmd_extract(a: &ExtractArgs) -> Result<()> {
    let variant: Variant = a.variant.parse()?;
    let cfg = config_for(variant, a.threshold, a.coarsest, a.resolution)?;
    let spec = load_scene(&a.scene)?;
    let oracle = FieldOracle::new(&spec)?;
    let brute = extract(&oracle, &config_for(Variant::Brute, None, a.coarsest, a.resolution)?)?;
    let result = if variant == Variant::Brute { brute.clone() } else { extract(&oracle, &cfg)? };
    let iou = compare_iou(&result.binarized, &brute.binarized)?;
    let accel = acceleration_factor(&result, &brute)?;

    let mesh = marching_cubes(&result.final_grid, ISO);
    let obj = a.common.out.join(format!("{}_{}.obj", spec.name, variant));
    export_obj(&mesh, &obj).with_context(|| format!("writing {}", obj.display()))?;
    let mut csv = open_csv(&a.common.out.join("stats.csv"), STATS_HEADER)?;
    writeln!(
        csv,
        "{}",
        stats_row(&spec.name, variant, a.threshold, spec.sharpness, a.resolution, &result, accel, iou)
    )?;
    csv.flush()?;
    if result.conflict_limit_hit {
        eprintln!("warning: conflict pass hit its iteration cap");
    }
    println!(
        "{}: {} evals, x{accel:.2} vs brute force, IoU {iou:.6}, {} triangles -> {}",
        spec.name,
        result.total_evals,
        mesh.triangles.len(),
        obj.display()
    );
    Ok(())
}

pub fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let variants: Vec<Variant> = if a.variant.is_empty() {
        Variant::ALL.to_vec()
    } else {
        a.variant.iter().map(|v| v.parse()).collect::<crate::Result<_>>()?
    };
    let thresholds: Vec<f64> = if a.threshold.is_empty() {
        THRESHOLD_SWEEP.to_vec()
    } else {
        a.threshold.clone()
    };
    // validate every configuration before spending time on any
    let mut runs = Vec::new();
    for &res in &a.resolution {
        for &v in &variants {
            if v == Variant::OctreeThreshold {
                for &t in &thresholds {
                    runs.push((res, config_for(v, Some(t), a.coarsest, res)?));
                }
            } else {
                runs.push((res, config_for(v, None, a.coarsest, res)?));
            }
        }
    }
    let scenes: Vec<SceneSpec> = a.scene.iter().map(|p| load_scene(p)).collect::<Result<_>>()?;

    let path = a.common.out.join("bench.csv");
    let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(w, "{STATS_HEADER}")?;
    for spec in &scenes {
        let oracle = FieldOracle::new(spec)?;
        for &res in &a.resolution {
            let brute = extract(&oracle, &config_for(Variant::Brute, None, a.coarsest, res)?)?;
            for (_, cfg) in runs.iter().filter(|(r, _)| *r == res) {
                let result = if cfg.variant == Variant::Brute {
                    brute.clone()
                } else {
                    extract(&oracle, cfg)?
                };
                let iou = compare_iou(&result.binarized, &brute.binarized)?;
                let accel = acceleration_factor(&result, &brute)?;
                writeln!(
                    w,
                    "{}",
                    stats_row(&spec.name, cfg.variant, cfg.threshold, spec.sharpness, res, &result, accel, iou)
                )?;
            }
        }
    }
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}

fn parse_triple(s: &str, what: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidConfig(format!("{what} `{s}` is not three comma-separated numbers")))?;
    parts
        .try_into()
        .map_err(|_| Error::InvalidConfig(format!("{what} `{s}` is not three comma-separated numbers")).into())
}

pub fn parse_camera(s: &str) -> Result<CameraSpec> {
    let [yaw, pitch, dist] = parse_triple(s, "camera")?;
    Ok(CameraSpec::orbit(yaw, pitch, dist)?)
}

pub fn cmd_render(a: &RenderArgs) -> Result<()> {
    let camera = parse_camera(&a.camera)?;
    let background = parse_triple(&a.background, "background")?;
    let cfg = RenderConfig::new(a.coarsest, a.resolution)?.with_background(background);
    let spec = load_scene(&a.scene)?;
    let oracle = FieldOracle::new(&spec)?;
    let image = render_view(&oracle, &camera, &cfg)?;
    let ppm = a.common.out.join(format!("{}.ppm", spec.name));
    let mut w = BufWriter::new(File::create(&ppm).with_context(|| format!("creating {}", ppm.display()))?);
    write_ppm(&image, &mut w)?;
    w.flush()?;
    if a.depth {
        let path = a.common.out.join(format!("{}_depth.bin", spec.name));
        let plane: Vec<f32> = image.depth.iter().map(|d| *d as f32).collect();
        let mut w = BufWriter::new(File::create(&path)?);
        write_plane_dump(cfg.resolution().trailing_zeros(), cfg.resolution(), &plane, &mut w)?;
        w.flush()?;
    }
    let s = image.stats;
    println!(
        "{}: {}x{} px, {} covered, {} evals ({} shadow nodes skipped), {} grazing -> {}",
        spec.name,
        image.width,
        image.height,
        image.mask.iter().filter(|m| **m).count(),
        s.evals,
        s.shadow_nodes,
        s.grazing_pixels,
        ppm.display()
    );
    if s.grazing_pixels > 0 {
        eprintln!("warning: {} pixels graze the view volume boundary", s.grazing_pixels);
    }
    Ok(())
}

pub fn cmd_metrics(a: &MetricsArgs) -> Result<()> {
    let pred = read_obj(&a.pred).with_context(|| format!("reading {}", a.pred.display()))?;
    let gt = read_obj(&a.gt).with_context(|| format!("reading {}", a.gt.display()))?;
    pred.validate()?;
    gt.validate()?;
    let ps = sample_surface(&pred, a.samples, a.common.seed)?;
    let gs = sample_surface(&gt, a.samples, a.common.seed.wrapping_add(1))?;
    let chamfer = chamfer_distance(&ps, &gs)?;
    let p2s = p2s_distance(&ps, &gt)?;
    let haus = hausdorff_distance(&ps, &gt)?;
    let path = a.common.out.join("metrics.csv");
    let mut w = open_csv(&path, METRICS_HEADER)?;
    writeln!(
        w,
        "{},{},{},{chamfer},{p2s},{haus}",
        a.pred.display(),
        a.gt.display(),
        a.samples
    )?;
    w.flush()?;
    println!("chamfer {chamfer:.6}  p2s {p2s:.6}  hausdorff {haus:.6}");
    Ok(())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Paired runs over `runs` seeds; returns (uniform, ohem) reports per seed.
pub fn ohem_experiment(data: &ToyDataset, epochs: usize, seed: u64, runs: usize) -> Result<Vec<(ToyReport, ToyReport)>> {
    (0..runs as u64)
        .into_par_iter()
        .map(|r| {
            let s = seed.wrapping_add(r);
            Ok((fit_toy_predictor(data, false, epochs, s)?, fit_toy_predictor(data, true, epochs, s)?))
        })
        .collect()
}

pub fn cmd_ohem_demo(a: &OhemArgs) -> Result<()> {
    if a.runs == 0 {
        return Err(Error::InvalidConfig("--runs must be at least 1".into()).into());
    }
    let spec = ToyDatasetSpec::from_path(&a.dataset).with_context(|| format!("loading {}", a.dataset.display()))?;
    let data = ToyDataset::generate(&spec)?;
    let pairs = ohem_experiment(&data, a.epochs, a.common.seed, a.runs)?;

    let path = a.common.out.join("ohem.csv");
    let mut w = BufWriter::new(File::create(&path)?);
    writeln!(w, "{OHEM_HEADER}")?;
    let mut worst = [0.0; 2];
    for (m, method) in ["uniform", "ohem"].iter().enumerate() {
        let pick = |p: &(ToyReport, ToyReport)| if m == 0 { p.0.clone() } else { p.1.clone() };
        let reports: Vec<ToyReport> = pairs.iter().map(pick).collect();
        for (c, (name, _)) in reports[0].clusters.iter().enumerate() {
            let iou = median(reports.iter().map(|r| r.clusters[c].1).collect());
            writeln!(w, "{name},{method},{iou},{}", a.epochs)?;
        }
        worst[m] = median(reports.iter().map(|r| r.worst).collect());
        writeln!(w, "worst,{method},{},{}", worst[m], a.epochs)?;
    }
    w.flush()?;
    println!(
        "{}: median worst-cluster IoU uniform {:.4}, ohem {:.4} ({:+.4}) over {} seeds -> {}",
        spec.name,
        worst[0],
        worst[1],
        worst[1] - worst[0],
        a.runs,
        path.display()
    );
    Ok(())
}
