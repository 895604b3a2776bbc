use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use srpac_core::acquisition::{acquire_stack, add_noise, save_stack, ErrorLaw, PositioningModel};
use srpac_core::bounds::{self, BoundsConfig, NdBound, SpectrumModel};
use srpac_core::fusion::{decompose, fuse, hf_snr, write_decomposition_csv, Band};
use srpac_core::grid::FrequencyGrid;
use srpac_core::manifest::RunManifest;
use srpac_core::montecarlo::{
    self, check_validity, exceedance_map, spearman, texture_overlap, FreqMap, LocalizeMode, LocalizeParams, McExperiment, Quantities,
    Quantity, SceneSpec, ValidityCell,
};
use srpac_core::plane::Plane;
use srpac_core::render::{write_image_pgm, write_image_png, write_map_csv, write_map_pgm, write_map_png, write_map_set};
use srpac_core::scene::{apply_blur, HrScene, Psf};
use srpac_core::table;
use srpac_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "srpac", version, about = "Frame-count bounds and Monte-Carlo checks for multi-frame super-resolution", args_override_self = true)]
pub struct Cli {
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON file whose keys mirror the subcommand's long flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Minimal frame counts for one configuration.
    Plan(PlanArgs),
    /// Frame-count grid over r, epsilon and blur, with reference comparison.
    Table1(TableArgs),
    /// Acquire, fuse and decompose one stack.
    Simulate(SimArgs),
    /// Empirical check of the composite guarantee on a list of cells.
    Verify(VerifyArgs),
    /// Aliasing floor, frame-count and exceedance maps.
    Maps(MapsArgs),
    /// High-frequency SNR against frame count.
    Snr(SnrArgs),
    /// Spatial footprint of the unreliable high-frequency band.
    Localize(LocalizeArgs),
    /// Re-run a recorded command and compare its outputs byte for byte.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SceneArgs {
    /// Square grayscale PGM or PNG; omit for a synthetic power-law scene.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Side of the synthetic scene, HR pixels.
    #[arg(long, default_value_t = 64)]
    pub side: usize,
    /// Spectral exponent of the synthetic scene, amplitude |k|^-(1+eta).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub eta: f64,
    #[arg(long, default_value_t = 0)]
    pub scene_seed: u64,
}

impl SceneArgs {
    fn spec(&self) -> SceneSpec {
        match &self.scene {
            Some(p) => SceneSpec::File { path: p.clone() },
            None => SceneSpec::PowerLaw { side: self.side, eta: self.eta, seed: self.scene_seed },
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct PlanArgs {
    #[arg(long, default_value_t = 2)]
    pub r: usize,
    /// Max displacement error per axis, LR pixels.
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.05)]
    pub p1: f64,
    #[arg(long = "P1", default_value_t = 0.95)]
    #[serde(rename = "P1")]
    pub big_p1: f64,
    #[arg(long, default_value_t = 0.05)]
    pub p2: f64,
    #[arg(long = "P2", default_value_t = 0.95)]
    #[serde(rename = "P2")]
    pub big_p2: f64,
    /// Norm of the mean displacement error, HR pixels.
    #[arg(long, default_value_t = 0.0)]
    pub bias: f64,
    /// Power-law exponent when no scene is given.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub eta: f64,
    /// Use this scene's measured spectrum instead of a power law.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, default_value = "dirac")]
    pub psf: String,
    /// LR side of the spectral grid for the power law.
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    #[arg(long)]
    pub strict_cubic: bool,
    #[arg(long)]
    pub seconds_per_frame: Option<f64>,
    #[arg(long, default_value = "srpac_out")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct TableArgs {
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    #[arg(long, default_value = "gaussian:0.5")]
    pub psf: String,
    /// Largest accepted ratio between computed and reference alias counts.
    #[arg(long, default_value_t = 3.0)]
    pub factor: f64,
    #[arg(long, default_value = "srpac_out")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SimArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scene: SceneArgs,
    #[arg(long, default_value = "dirac")]
    pub psf: String,
    #[arg(long, default_value_t = 2)]
    pub r: usize,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 16)]
    pub nd: usize,
    #[arg(long, default_value = "uniform")]
    pub law: String,
    /// Mean displacement error `x,y`, HR pixels.
    #[arg(long, allow_negative_numbers = true)]
    pub bias: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, env = "SRPAC_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "srpac_out")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct VerifyArgs {
    /// JSON list of cells, or an object with a `cells` list.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, default_value = "srpac_out")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct MapsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scene: SceneArgs,
    #[arg(long, default_value = "dirac")]
    pub psf: String,
    #[arg(long, default_value_t = 2)]
    pub r: usize,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    /// Error threshold for the floor and exceedance maps.
    #[arg(long, default_value_t = 0.1)]
    pub p: f64,
    #[arg(long = "P", default_value_t = 0.9)]
    #[serde(rename = "P")]
    pub big_p: f64,
    #[arg(long, default_value_t = 256)]
    pub nd: usize,
    /// Monte-Carlo trials for the exceedance map; 0 skips it.
    #[arg(long, default_value_t = 0)]
    pub trials: usize,
    #[arg(long, env = "SRPAC_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "srpac_out")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SnrArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scene: SceneArgs,
    #[arg(long, default_value = "dirac")]
    pub psf: String,
    #[arg(long, default_value_t = 2)]
    pub r: usize,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long, default_value = "1,2,4,8,16,32,64,128,256")]
    pub nd: String,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, env = "SRPAC_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "srpac_out")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct LocalizeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scene: SceneArgs,
    #[arg(long, default_value = "dirac")]
    pub psf: String,
    #[arg(long, default_value_t = 2)]
    pub r: usize,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 256)]
    pub nd: usize,
    #[arg(long, default_value_t = 0.1)]
    pub p: f64,
    /// Failure-probability threshold.
    #[arg(long, default_value_t = 0.1)]
    pub thr: f64,
    /// `theory` or `mc`.
    #[arg(long, default_value = "theory")]
    pub mode: String,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, env = "SRPAC_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "srpac_out")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct ReplayArgs {
    /// A `run_manifest.json` written by an earlier run.
    pub manifest: PathBuf,
    #[arg(long, default_value = "srpac_replay")]
    pub out_dir: PathBuf,
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    let threads = cli.threads;
    if threads == Some(0) {
        return Err(Error::Input("--threads must be >= 1".into()));
    }
    let job = move || match cli.command {
        Command::Replay(a) => replay(&a, threads),
        other => dispatch(other, threads).map(|_| ExitCode::SUCCESS),
    };
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Input(format!("thread pool: {e}")))?
            .install(job),
        None => job(),
    }
}

fn dispatch(cmd: Command, threads: Option<usize>) -> Result<RunManifest> {
    let t0 = Instant::now();
    let (name, config, seed, dir, files) = match cmd {
        Command::Plan(a) => ("plan", serde_json::to_value(&a)?, 0, a.out_dir.clone(), plan(&a)?),
        Command::Table1(a) => ("table1", serde_json::to_value(&a)?, 0, a.out_dir.clone(), table1(&a)?),
        Command::Simulate(a) => ("simulate", serde_json::to_value(&a)?, a.seed, a.out_dir.clone(), simulate(&a)?),
        Command::Verify(a) => ("verify", serde_json::to_value(&a)?, 0, a.out_dir.clone(), verify(&a)?),
        Command::Maps(a) => ("maps", serde_json::to_value(&a)?, a.seed, a.out_dir.clone(), maps(&a)?),
        Command::Snr(a) => ("snr", serde_json::to_value(&a)?, a.seed, a.out_dir.clone(), snr(&a)?),
        Command::Localize(a) => ("localize", serde_json::to_value(&a)?, a.seed, a.out_dir.clone(), localize(&a)?),
        Command::Replay(_) => unreachable!("handled by run"),
    };
    let mut m = RunManifest::new(name, config, seed, threads);
    m.record_outputs(&dir, &files)?;
    m.wall_time_s = t0.elapsed().as_secs_f64();
    let path = dir.join("run_manifest.json");
    m.save(&path)?;
    println!("wrote {} files and {}", files.len(), path.display());
    Ok(m)
}

fn replay(a: &ReplayArgs, threads: Option<usize>) -> Result<ExitCode> {
    let old = RunManifest::load(&a.manifest)?;
    let mut cfg = old.config.clone();
    let obj = cfg.as_object_mut().ok_or_else(|| Error::Input("manifest config is not an object".into()))?;
    obj.insert("out_dir".into(), serde_json::Value::String(a.out_dir.to_string_lossy().into()));
    let cmd = match old.command.as_str() {
        "plan" => Command::Plan(serde_json::from_value(cfg)?),
        "table1" => Command::Table1(serde_json::from_value(cfg)?),
        "simulate" => Command::Simulate(serde_json::from_value(cfg)?),
        "verify" => Command::Verify(serde_json::from_value(cfg)?),
        "maps" => Command::Maps(serde_json::from_value(cfg)?),
        "snr" => Command::Snr(serde_json::from_value(cfg)?),
        "localize" => Command::Localize(serde_json::from_value(cfg)?),
        other => return Err(Error::Input(format!("cannot replay command '{other}'"))),
    };
    let new = dispatch(cmd, threads)?;
    let diff = old.diff_outputs(&new);
    if diff.is_empty() {
        println!("replay identical: {} outputs", new.outputs.len());
        Ok(ExitCode::SUCCESS)
    } else {
        println!("replay differs: {}", diff.join(", "));
        Ok(ExitCode::from(4))
    }
}

fn prepare(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, v: &T, files: &mut Vec<PathBuf>) -> Result<()> {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v)?)?;
    files.push(p);
    Ok(())
}

fn load_or_synth(s: &SceneArgs) -> Result<HrScene> {
    s.spec().build()
}

fn plan(a: &PlanArgs) -> Result<Vec<PathBuf>> {
    let spectrum = match &a.scene {
        Some(p) => SpectrumModel::measured(srpac_core::scene::load_scene(p)?.amplitude(), p.to_string_lossy()),
        None => SpectrumModel::PowerLaw { eta: a.eta },
    };
    let cfg = BoundsConfig {
        r: a.r,
        epsilon: a.epsilon,
        bias: a.bias,
        p1: a.p1,
        big_p1: a.big_p1,
        p2: a.p2,
        big_p2: a.big_p2,
        spectrum,
        psf: Psf::parse(&a.psf)?,
        n: a.n,
        strict_cubic: a.strict_cubic,
        seconds_per_frame: a.seconds_per_frame,
    };
    let rep = bounds::plan(&cfg)?;
    println!("nd_approx  {:>10}   c1 = {:.6}, p_best = {:.6}", rep.nd_approx.to_string(), rep.c1, rep.p_best);
    println!(
        "nd_alias   {:>10}   c2 = {:.6}, p0 = {:.6}, worst bin ({}, {})",
        rep.nd_alias.to_string(),
        rep.alias.c2,
        rep.alias.p0,
        rep.alias.worst[0],
        rep.alias.worst[1]
    );
    println!("nd_total   {:>10}   frames per targeted position", rep.nd_total.to_string());
    if let Some(f) = rep.total_frames {
        println!("frames     {f:>10}");
    }
    if let Some(t) = rep.acquisition_time_s {
        println!("time       {t:>10.1} s");
    }
    println!("verdict    {:>10}", serde_json::to_value(rep.verdict)?.as_str().unwrap_or("?"));
    println!(
        "guarantee  relative error <= {} with probability >= {:.4}",
        rep.guarantee.error_bound, rep.guarantee.confidence
    );
    prepare(&a.out_dir)?;
    let mut files = Vec::new();
    write_json(&a.out_dir, "bounds_report.json", &rep, &mut files)?;
    Ok(files)
}

fn table1(a: &TableArgs) -> Result<Vec<PathBuf>> {
    let cells = table::table1(a.n, Psf::parse(&a.psf)?)?;
    let text = table::render_text(&cells);
    print!("{text}");
    let mut bad = 0;
    for c in &cells {
        if !c.agrees(a.factor) {
            bad += 1;
            println!(
                "disagree r={} psf={} eps={}: approx {} (ref {}), alias {} (ref {})",
                c.r,
                if c.blurred { "gaussian" } else { "dirac" },
                c.epsilon,
                c.approx,
                c.ref_approx,
                c.alias,
                c.ref_alias
            );
        }
    }
    println!("{} cells, {bad} disagreements, monotone: {}", cells.len(), table::is_monotone(&cells));
    prepare(&a.out_dir)?;
    let csv = a.out_dir.join("table1.csv");
    table::write_table_csv(&cells, &csv)?;
    let txt = a.out_dir.join("table1.txt");
    fs::write(&txt, text)?;
    Ok(vec![csv, txt])
}

fn parse_pair(s: &str) -> Result<[f64; 2]> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| Error::Input(format!("bad number '{x}'"))))
        .collect::<Result<_>>()?;
    match v.as_slice() {
        [x, y] => Ok([*x, *y]),
        _ => Err(Error::Input(format!("expected x,y, got '{s}'"))),
    }
}

fn parse_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| x.trim().parse::<usize>().map_err(|_| Error::Input(format!("bad count '{x}'"))))
        .collect()
}

fn simulate(a: &SimArgs) -> Result<Vec<PathBuf>> {
    let scene = load_or_synth(&a.scene)?;
    let psf = Psf::parse(&a.psf)?;
    let mut model = PositioningModel::new(a.r, a.epsilon, a.nd);
    model.law = ErrorLaw::parse(&a.law)?;
    if let Some(b) = &a.bias {
        model.bias = vec![parse_pair(b)?];
    }
    let mut stack = acquire_stack(&scene, &psf, &model, a.seed, 0)?;
    add_noise(&mut stack, a.noise)?;
    prepare(&a.out_dir)?;
    let stack_dir = a.out_dir.join("stack");
    let mut files = vec![save_stack(&stack, &stack_dir)?];
    files.extend(stack.frames.iter().map(|f| {
        let d = model.target(f.position.d_index);
        stack_dir.join(format!("frame_{}_{}_{:05}.pgm", d[0], d[1], f.position.repeat))
    }));
    let fused = fuse(&stack)?;
    let z = apply_blur(&scene, &psf)?;
    let dec = decompose(&fused, &z, &stack)?;
    let grid = FrequencyGrid::new(stack.n, a.r)?;
    let hf = hf_snr(&grid, &fused.spectrum, z.spectrum(), Band::HfOnly);
    let full = hf_snr(&grid, &fused.spectrum, z.spectrum(), Band::Full);
    for (ext, f) in [("pgm", write_image_pgm as fn(&Plane<f64>, &Path) -> Result<()>), ("png", write_image_png)] {
        let p = a.out_dir.join(format!("fused.{ext}"));
        f(&fused.pixels, &p)?;
        files.push(p);
    }
    let csv = a.out_dir.join("decomposition.csv");
    write_decomposition_csv(&dec, &csv)?;
    files.push(csv);
    let map = FreqMap { values: dec.rel_error.clone(), valid: dec.valid.clone() };
    files.extend(write_map_set(&map, "rel_error", &a.out_dir, "rel_error_map")?);
    let summary = serde_json::json!({
        "frames": stack.frames.len(),
        "nd": a.nd,
        "max_rel_error": dec.max_rel_error(),
        "hf_snr_db": hf,
        "full_snr_db": full,
    });
    println!("frames {}  max relative error {:.3e}  hf SNR {:.2} dB  full SNR {:.2} dB", stack.frames.len(), dec.max_rel_error(), hf, full);
    write_json(&a.out_dir, "summary.json", &summary, &mut files)?;
    Ok(files)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum VerifySpec {
    List(Vec<ValidityCell>),
    Obj { cells: Vec<ValidityCell> },
}

fn verify(a: &VerifyArgs) -> Result<Vec<PathBuf>> {
    let spec: VerifySpec = serde_json::from_str(&fs::read_to_string(&a.spec)?)?;
    let cells = match spec {
        VerifySpec::List(c) | VerifySpec::Obj { cells: c } => c,
    };
    if cells.is_empty() {
        return Err(Error::Input("verify spec lists no cells".into()));
    }
    let mut results = Vec::new();
    for c in &cells {
        let res = check_validity(c)?;
        let status = match res.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "NR",
        };
        println!(
            "{status} r={} eps={} p={} P={} nd={} empirical={} stated={:.4} floor={:.4}",
            c.r,
            c.epsilon,
            c.p,
            c.big_p,
            res.nd_used.map(|n| n.to_string()).unwrap_or_else(|| "NR".into()),
            res.empirical.map(|e| format!("{e:.4}")).unwrap_or_else(|| "-".into()),
            res.stated,
            res.stated - 3.0 * res.sigma
        );
        results.push(res);
    }
    prepare(&a.out_dir)?;
    let mut files = Vec::new();
    write_json(&a.out_dir, "verify_report.json", &results, &mut files)?;
    Ok(files)
}

fn maps(a: &MapsArgs) -> Result<Vec<PathBuf>> {
    let scene = load_or_synth(&a.scene)?;
    let psf = Psf::parse(&a.psf)?;
    prepare(&a.out_dir)?;
    let floor = montecarlo::p2_lower_bound_map(&scene, &psf, a.r, a.epsilon, a.p)?;
    let mut files = write_map_set(&floor.p0, "p0", &a.out_dir, "p2_floor")?;
    let mut cfg = BoundsConfig::power_law(a.r, a.epsilon, a.p, a.big_p, 0.0);
    cfg.spectrum = SpectrumModel::measured(scene.amplitude(), "scene");
    cfg.psf = psf;
    let (_, nd) = bounds::nd_map(&cfg)?;
    let nd_vals = nd.map(|v| match v {
        Some(NdBound::Frames(k)) => *k as f64,
        _ => f64::INFINITY,
    });
    let nd_map = FreqMap { values: nd_vals.clone(), valid: floor.p0.valid.clone() };
    let csv = a.out_dir.join("nd_min.csv");
    write_map_csv(&nd_map, "nd", &csv)?;
    files.push(csv);
    let log_map = FreqMap { values: nd_vals.map(|v| v.log10()), valid: nd_map.valid.clone() };
    let finite = FreqMap { values: log_map.values.map(|v| if v.is_finite() { *v } else { 0.0 }), valid: log_map.valid.clone() };
    let range = srpac_core::render::valid_range(&finite);
    for (ext, f) in [("pgm", write_map_pgm as fn(&FreqMap, (f64, f64), &Path) -> Result<()>), ("png", write_map_png)] {
        let p = a.out_dir.join(format!("nd_min_log10.{ext}"));
        f(&log_map, range, &p)?;
        files.push(p);
    }
    let mut summary = serde_json::json!({
        "fraction_p0_above_threshold": floor.fraction_above,
        "threshold": a.p,
    });
    println!("share of bins with aliasing floor above {}: {:.4}", a.p, floor.fraction_above);
    if a.trials > 0 {
        let exp = McExperiment {
            scene: a.scene.spec(),
            psf,
            model: PositioningModel::new(a.r, a.epsilon, a.nd),
            nd: vec![a.nd],
            trials: a.trials,
            seed: a.seed,
            noise_sigma: 0.0,
            quantities: Quantities { alias: true, ..Quantities::NONE },
        };
        let z = apply_blur(&scene, &psf)?;
        let res = montecarlo::run_on(&exp, &z)?;
        let ex = exceedance_map(&res, 0, Quantity::Alias, a.p)?;
        files.extend(write_map_set(&ex, "exceedance", &a.out_dir, "exceedance")?);
        let (xs, ys): (Vec<f64>, Vec<f64>) = ex
            .values
            .data()
            .iter()
            .zip(nd_vals.data())
            .zip(ex.valid.data())
            .filter(|(_, &v)| v)
            .map(|((e, n), _)| (*e, n.min(1e300)))
            .unzip();
        let rho = spearman(&xs, &ys);
        println!("rank correlation of exceedance with frame-count map: {rho:.3}");
        summary["exceedance_nd_spearman"] = serde_json::json!(rho);
    }
    write_json(&a.out_dir, "summary.json", &summary, &mut files)?;
    Ok(files)
}

fn snr(a: &SnrArgs) -> Result<Vec<PathBuf>> {
    let nd = parse_list(&a.nd)?;
    let exp = McExperiment {
        scene: a.scene.spec(),
        psf: Psf::parse(&a.psf)?,
        model: PositioningModel::new(a.r, a.epsilon, 1),
        nd,
        trials: a.trials,
        seed: a.seed,
        noise_sigma: 0.0,
        quantities: Quantities::NONE,
    };
    let sw = montecarlo::snr_sweep(&exp)?;
    for ((n, m), s) in sw.nd.iter().zip(&sw.mean_db).zip(&sw.std_db) {
        println!("nd {n:>6}  hf SNR {m:8.3} dB  (sd {s:.3})");
    }
    println!("slope {:.3} dB/decade, offset K {:.3} dB", sw.slope, sw.offset);
    prepare(&a.out_dir)?;
    let csv = a.out_dir.join("snr.csv");
    montecarlo::write_snr_csv(&sw, &csv)?;
    let mut files = vec![csv];
    write_json(&a.out_dir, "snr_summary.json", &sw, &mut files)?;
    Ok(files)
}

fn localize(a: &LocalizeArgs) -> Result<Vec<PathBuf>> {
    let scene = load_or_synth(&a.scene)?;
    let mode = match a.mode.as_str() {
        "theory" => LocalizeMode::Theory,
        "mc" | "montecarlo" => LocalizeMode::MonteCarlo { trials: a.trials, seed: a.seed },
        other => return Err(Error::Input(format!("unknown mode '{other}', expected theory or mc"))),
    };
    let prm = LocalizeParams { r: a.r, epsilon: a.epsilon, nd: a.nd, p: a.p, thr: a.thr, mode };
    let band = montecarlo::unreliable_spatial(&scene, &Psf::parse(&a.psf)?, &prm)?;
    let overlap = texture_overlap(scene.pixels(), &band.image, 9);
    println!(
        "unreliable band: weight {:.2} dB, {:.2}% of high-frequency bins, texture overlap {:.3}",
        band.weight_db,
        100.0 * band.masked_fraction,
        overlap
    );
    prepare(&a.out_dir)?;
    let mut files = Vec::new();
    for (ext, f) in [("pgm", write_image_pgm as fn(&Plane<f64>, &Path) -> Result<()>), ("png", write_image_png)] {
        let p = a.out_dir.join(format!("unreliable_band.{ext}"));
        f(&band.image, &p)?;
        files.push(p);
    }
    let mask = FreqMap { values: band.mask.map(|&b| if b { 1.0 } else { 0.0 }), valid: Plane::filled(band.mask.side(), true) };
    files.extend(write_map_set(&mask, "masked", &a.out_dir, "unreliable_mask")?);
    let summary = serde_json::json!({
        "weight_db": band.weight_db,
        "masked_fraction": band.masked_fraction,
        "texture_overlap": overlap,
    });
    write_json(&a.out_dir, "summary.json", &summary, &mut files)?;
    Ok(files)
}
