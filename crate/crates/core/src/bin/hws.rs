use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use hws::buffers::{self, Mask};
use hws::condition::{
    build_bundle, export_bundle, sample_triplet, stage1_target, stage2_target, SourceFrame, TargetKind,
    DEFAULT_NOISE_SIGMA,
};
use hws::dataset::{load_manifest, roi_trigger, split_train_novel, FrameRecord, Roi, TraversalDataset};
use hws::initializer::{init_scene, read_ply, InitConfig};
use hws::losses::LossWeights;
use hws::metrics::{evaluate, save_eval_csv, ZPolicy};
use hws::rasterizer::{render, RenderSettings};
use hws::scene::{decode_view, load_scene, save_scene, Scene};
use hws::trainer::{fit_appearance_latent, load_frames, save_stats_csv, train, FitConfig, TrainConfig, TrainingFrame};

#[derive(Parser, Debug)]
#[command(name = "hws", version, about = "Multi-traversal Gaussian splatting toolkit")]
struct Cli {
    /// TOML file with one table per subcommand; keys match flag names.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load a manifest, summarize it and optionally run the ROI trigger.
    Ingest(IngestArgs),
    /// Build an initial scene from the manifest's point cloud.
    Init(InitArgs),
    /// Optimize a scene on the manifest's frames.
    Train(TrainArgs),
    /// Render the cameras of one traversal.
    Render(RenderArgs),
    /// Score renders against a split and write eval.csv.
    Eval(EvalArgs),
    /// Build and export a condition bundle.
    Condition(ConditionArgs),
    /// Sample generator training triplets.
    Triplets(TripletArgs),
}

#[derive(Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    seed: Option<u64>,
    ingest: IngestArgs,
    init: InitArgs,
    train: TrainArgs,
    render: RenderArgs,
    eval: EvalArgs,
    condition: ConditionArgs,
    triplets: TripletArgs,
}

/// Fills every unset field of `$a` from `$b`.
macro_rules! merge {
    ($a:ident, $b:ident; opt: $($o:ident),*; flag: $($f:ident),*) => {{
        $( $a.$o = $a.$o.take().or($b.$o); )*
        $( $a.$f = $a.$f || $b.$f; )*
        $a
    }};
}

#[derive(Args, Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct IngestArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Run the ROI acceptance test on every traversal.
    #[arg(long)]
    roi_check: bool,
    /// ROI center `x,y` (overrides the manifest).
    #[arg(long, value_delimiter = ',')]
    roi_center: Option<Vec<f64>>,
    #[arg(long)]
    roi_radius: Option<f64>,
}

#[derive(Args, Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct InitArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Point cloud (PLY); defaults to the manifest's `point_cloud`.
    #[arg(long)]
    cloud: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Traversal left out of the appearance table.
    #[arg(long)]
    held_out: Option<u32>,
    #[arg(long)]
    sky_count: Option<usize>,
    #[arg(long)]
    voxel: Option<f64>,
    #[arg(long)]
    ground_spacing: Option<f64>,
}

#[derive(Args, Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct TrainArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Start from this scene instead of initializing from the point cloud.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    downscale: Option<usize>,
    /// Traversal excluded from training.
    #[arg(long)]
    held_out: Option<u32>,
    /// Per-iteration statistics CSV.
    #[arg(long)]
    stats: Option<PathBuf>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    #[arg(long)]
    depth_weight: Option<f64>,
    #[arg(long)]
    normal_weight: Option<f64>,
    #[arg(long)]
    dssim: Option<f64>,
    /// Derive normal targets from depth when no normal file exists.
    #[arg(long)]
    normals_from_depth: bool,
    #[arg(long)]
    sky_count: Option<usize>,
    #[arg(long)]
    voxel: Option<f64>,
}

#[derive(Args, Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct RenderArgs {
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Traversal whose cameras (and latent) are used.
    #[arg(long)]
    traversal: Option<u32>,
    /// Fit the latent to this image instead of using the stored row.
    #[arg(long)]
    fit_appearance: Option<PathBuf>,
    /// Frame of the traversal whose camera saw the fit image (default 0).
    #[arg(long)]
    fit_frame: Option<usize>,
    #[arg(long)]
    fit_iters: Option<usize>,
    #[arg(long)]
    downscale: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct EvalArgs {
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// `train` (own latents) or `novel` (latent fitted on the first frame).
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    held_out: Option<u32>,
    #[arg(long)]
    fit_iters: Option<usize>,
    #[arg(long)]
    downscale: Option<usize>,
    /// Output CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct ConditionArgs {
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Source frame as `traversal:index`.
    #[arg(long)]
    source: Option<String>,
    /// Target camera as `traversal:index` (default: the source camera).
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    fit_iters: Option<usize>,
    #[arg(long)]
    downscale: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct TripletArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    traversal: Option<u32>,
    #[arg(long)]
    count: Option<usize>,
    /// 1: masked-and-noised ground truth, 2: static render.
    #[arg(long)]
    stage: Option<u8>,
    /// Stage-1 noise standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    /// Scene used for stage-2 targets.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Output CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the target images here.
    #[arg(long)]
    targets_dir: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Domain(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Domain(e)
    }
}

impl From<hws::Error> for Failure {
    fn from(e: hws::Error) -> Self {
        Failure::Domain(e.into())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn need<T>(v: Option<T>, flag: &str) -> std::result::Result<T, Failure> {
    v.ok_or_else(|| Failure::Usage(format!("missing required --{flag}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    if let Ok(v) = std::env::var("HWS_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Failure::Usage(format!("HWS_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(Failure::Usage("HWS_THREADS must be a positive integer".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| anyhow!(e))?;
    }
    let file = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| anyhow!("{}: {e}", p.display()))?;
            toml::from_str::<FileConfig>(&text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?
        }
        None => FileConfig::default(),
    };
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    match cli.command {
        Command::Ingest(mut a) => {
            let b = file.ingest;
            ingest(merge!(a, b; opt: manifest, roi_center, roi_radius; flag: roi_check))
        }
        Command::Init(mut a) => {
            let b = file.init;
            init(merge!(a, b; opt: manifest, cloud, out, held_out, sky_count, voxel, ground_spacing; flag: ), seed)
        }
        Command::Train(mut a) => {
            let b = file.train;
            train_cmd(
                merge!(a, b; opt: manifest, scene, out, iters, downscale, held_out, stats, checkpoint_every,
                    checkpoint_dir, depth_weight, normal_weight, dssim, sky_count, voxel; flag: normals_from_depth),
                seed,
            )
        }
        Command::Render(mut a) => {
            let b = file.render;
            render_cmd(merge!(a, b; opt: scene, manifest, traversal, fit_appearance, fit_frame, fit_iters, downscale,
                out; flag: ))
        }
        Command::Eval(mut a) => {
            let b = file.eval;
            eval_cmd(merge!(a, b; opt: scene, manifest, split, held_out, fit_iters, downscale, out; flag: ))
        }
        Command::Condition(mut a) => {
            let b = file.condition;
            condition_cmd(
                merge!(a, b; opt: scene, manifest, source, target, fit_iters, downscale, out; flag: ),
                seed,
            )
        }
        Command::Triplets(mut a) => {
            let b = file.triplets;
            triplets_cmd(
                merge!(a, b; opt: manifest, traversal, count, stage, sigma, scene, out, targets_dir; flag: ),
                seed,
            )
        }
    }
}

fn ingest(a: IngestArgs) -> Outcome {
    let ds = load_manifest(&need(a.manifest, "manifest")?)?;
    println!(
        "scene {}: {} traversals, {} frames",
        ds.scene_id,
        ds.traversals.len(),
        ds.frame_count()
    );
    for t in &ds.traversals {
        println!("traversal {} ({:?}): {} frames", t.id, t.condition, t.frames.len());
    }
    if !a.roi_check {
        return Ok(());
    }
    let roi = match (a.roi_center, a.roi_radius) {
        (Some(c), Some(r)) => {
            if c.len() != 2 {
                return Err(Failure::Usage("--roi-center takes x,y".into()));
            }
            Roi::new([c[0], c[1]], r)?
        }
        (None, None) => ds
            .roi
            .ok_or_else(|| anyhow!("no ROI: set roi in the manifest or pass --roi-center and --roi-radius"))?,
        _ => return Err(Failure::Usage("--roi-center and --roi-radius go together".into())),
    };
    for t in &ds.traversals {
        let d = roi_trigger(&t.trajectory()?, &roi);
        println!(
            "traversal {}: {} duration={:.3}s length={:.3}m overlap={:.4}",
            t.id,
            if d.accepted { "accept" } else { "reject" },
            d.diagnostics.duration,
            d.diagnostics.length,
            d.diagnostics.overlap
        );
    }
    Ok(())
}

fn camera_centers(ds: &TraversalDataset) -> Vec<[f64; 3]> {
    ds.frames()
        .map(|f| {
            let c = f.camera.center();
            [c.x, c.y, c.z]
        })
        .collect()
}

fn build_initial_scene(
    ds: &TraversalDataset,
    cloud: Option<PathBuf>,
    held_out: Option<u32>,
    cfg: &InitConfig,
    seed: u64,
) -> std::result::Result<Scene, Failure> {
    let path = cloud
        .or_else(|| ds.point_cloud.clone())
        .ok_or_else(|| anyhow!("no point cloud: pass --cloud or set point_cloud in the manifest"))?;
    let cloud = read_ply(&path)?;
    let ids: Vec<u32> = ds.traversal_ids().into_iter().filter(|j| Some(*j) != held_out).collect();
    Ok(init_scene(&cloud, &camera_centers(ds), &ids, cfg, seed)?)
}

fn init(a: InitArgs, seed: u64) -> Outcome {
    let ds = load_manifest(&need(a.manifest, "manifest")?)?;
    let out = need(a.out, "out")?;
    let mut cfg = InitConfig::default();
    cfg.sky_count = a.sky_count.unwrap_or(cfg.sky_count);
    cfg.voxel = a.voxel.unwrap_or(cfg.voxel);
    cfg.ground_spacing = a.ground_spacing.unwrap_or(cfg.ground_spacing);
    let scene = build_initial_scene(&ds, a.cloud, a.held_out, &cfg, seed)?;
    save_scene(&scene, &out)?;
    println!(
        "wrote {} ({} sky, {} ground, {} anchors)",
        out.display(),
        scene.sky.len(),
        scene.ground.len(),
        scene.background.len()
    );
    Ok(())
}

/// The dataset without `held_out` (or unchanged when none is given).
fn training_part(ds: TraversalDataset, held_out: Option<u32>) -> std::result::Result<TraversalDataset, Failure> {
    match held_out {
        Some(j) => Ok(split_train_novel(&ds, j)?.0),
        None => Ok(ds),
    }
}

fn train_cmd(a: TrainArgs, seed: u64) -> Outcome {
    let ds = load_manifest(&need(a.manifest, "manifest")?)?;
    let out = need(a.out, "out")?;
    let mut scene = match &a.scene {
        Some(p) => load_scene(p)?,
        None => {
            let mut cfg = InitConfig::default();
            cfg.sky_count = a.sky_count.unwrap_or(cfg.sky_count);
            cfg.voxel = a.voxel.unwrap_or(cfg.voxel);
            build_initial_scene(&ds, None, a.held_out, &cfg, seed)?
        }
    };
    let part = training_part(ds, a.held_out)?;
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        iterations: a.iters.unwrap_or(defaults.iterations),
        seed,
        downscale: a.downscale.unwrap_or(1),
        checkpoint_interval: a.checkpoint_every.unwrap_or(0),
        checkpoint_dir: a.checkpoint_dir,
        normals_from_depth: a.normals_from_depth,
        weights: LossWeights {
            depth: a.depth_weight.unwrap_or(defaults.weights.depth),
            normal: a.normal_weight.unwrap_or(defaults.weights.normal),
            dssim: a.dssim.unwrap_or(defaults.weights.dssim),
        },
        ..defaults
    };
    cfg.validate()?;
    let frames = load_frames(&part, cfg.downscale, cfg.normals_from_depth)?;
    let report = train(&mut scene, &frames, &cfg)?;
    save_scene(&scene, &out)?;
    if let Some(p) = &a.stats {
        save_stats_csv(&report.stats, p)?;
    }
    let last = report.stats.last().map(|s| s.psnr).unwrap_or(0.0);
    println!(
        "trained {} iterations, last psnr {last:.2} dB, {} skipped updates, wrote {}",
        cfg.iterations,
        report.skipped_grads,
        out.display()
    );
    Ok(())
}

fn fit_config(iters: Option<usize>) -> FitConfig {
    FitConfig {
        iterations: iters.unwrap_or(FitConfig::default().iterations),
        ..FitConfig::default()
    }
}

fn render_cmd(a: RenderArgs) -> Outcome {
    let scene = load_scene(&need(a.scene, "scene")?)?;
    let ds = load_manifest(&need(a.manifest, "manifest")?)?;
    let out = need(a.out, "out")?;
    let factor = a.downscale.unwrap_or(1);
    let j = match a.traversal {
        Some(j) => j,
        None => ds.traversals.first().map(|t| t.id).ok_or_else(|| anyhow!("manifest has no traversals"))?,
    };
    let t = ds.traversal(j).ok_or(hws::Error::UnknownTraversal(j))?;
    let settings = RenderSettings::default();
    let z = match &a.fit_appearance {
        Some(img) => {
            let k = a.fit_frame.unwrap_or(0);
            let rec = t
                .frames
                .get(k)
                .ok_or_else(|| anyhow!("traversal {j} has no frame {k}"))?;
            let cam = rec.camera.downscaled(factor);
            let image = buffers::read_png_rgb(img)?.downscale(factor);
            let valid = Mask::all_valid(image.width, image.height);
            fit_appearance_latent(&scene, &image, &valid, &cam, &fit_config(a.fit_iters), &settings)?
        }
        None => {
            if scene.appearance.index_of(j).is_none() {
                warn!("traversal {j} has no appearance row, using the default row");
            }
            scene.appearance.embed_or_default(j)?.to_vec()
        }
    };
    std::fs::create_dir_all(&out).map_err(|e| anyhow!("{}: {e}", out.display()))?;
    for (k, rec) in t.frames.iter().enumerate() {
        let cam = rec.camera.downscaled(factor);
        let view = decode_view(&scene, &cam, &z)?;
        let (img, _) = render(&view.splats, &cam, &settings);
        buffers::write_png_rgb(&out.join(format!("{k:03}.png")), &img.color)?;
        buffers::write_depth(&out.join(format!("{k:03}.hwsd")), &img.depth)?;
    }
    println!("rendered {} frames of traversal {j} into {}", t.frames.len(), out.display());
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> Outcome {
    let scene = load_scene(&need(a.scene, "scene")?)?;
    let ds = load_manifest(&need(a.manifest, "manifest")?)?;
    let factor = a.downscale.unwrap_or(1);
    let split = a.split.as_deref().unwrap_or("train");
    let (part, policy) = match split {
        "train" => (training_part(ds, a.held_out)?, ZPolicy::Own),
        "novel" => {
            let j = a
                .held_out
                .ok_or_else(|| Failure::Usage("--split novel needs --held-out".into()))?;
            (split_train_novel(&ds, j)?.1, ZPolicy::FitFirstFrame(fit_config(a.fit_iters)))
        }
        other => return Err(Failure::Usage(format!("--split must be train or novel, got {other}"))),
    };
    let frames = load_frames(&part, factor, false)?;
    let summary = evaluate(&scene, &frames, policy, &RenderSettings::default())?;
    if let Some(p) = &a.out {
        save_eval_csv(&summary, p)?;
    }
    println!(
        "{split}: {} frames, mean psnr {:.4} dB, mean ssim {:.4}",
        summary.rows.len(),
        summary.mean_psnr,
        summary.mean_ssim
    );
    Ok(())
}

fn frame_ref<'a>(ds: &'a TraversalDataset, spec: &str) -> std::result::Result<&'a FrameRecord, Failure> {
    let (t, k) = spec
        .split_once(':')
        .ok_or_else(|| Failure::Usage(format!("frame reference must be traversal:index, got {spec:?}")))?;
    let t: u32 = t.parse().map_err(|_| Failure::Usage(format!("bad traversal id in {spec:?}")))?;
    let k: usize = k.parse().map_err(|_| Failure::Usage(format!("bad frame index in {spec:?}")))?;
    let trav = ds.traversal(t).ok_or(hws::Error::UnknownTraversal(t))?;
    Ok(trav
        .frames
        .get(k)
        .ok_or_else(|| anyhow!("traversal {t} has no frame {k}"))?)
}

fn condition_cmd(a: ConditionArgs, seed: u64) -> Outcome {
    let scene = load_scene(&need(a.scene, "scene")?)?;
    let ds = load_manifest(&need(a.manifest, "manifest")?)?;
    let out = need(a.out, "out")?;
    let source = need(a.source, "source")?;
    let factor = a.downscale.unwrap_or(1);
    let src = frame_ref(&ds, &source)?;
    let tgt = match &a.target {
        Some(s) => frame_ref(&ds, s)?,
        None => src,
    };
    let frame = TrainingFrame::load(src, factor, false)?;
    let target_cam = tgt.camera.downscaled(factor);
    let bundle = build_bundle(
        &scene,
        &SourceFrame {
            image: &frame.image,
            image_path: Some(src.image.clone()),
            valid: Some(&frame.valid),
            boxes: &src.boxes,
            camera: &frame.camera,
        },
        &target_cam,
        &fit_config(a.fit_iters),
        &RenderSettings::default(),
    )?;
    export_bundle(&bundle, &out, seed)?;
    println!(
        "wrote bundle with {} projected boxes into {}",
        bundle.boxes.len(),
        out.display()
    );
    Ok(())
}

fn triplets_cmd(a: TripletArgs, seed: u64) -> Outcome {
    let ds = load_manifest(&need(a.manifest, "manifest")?)?;
    let j = need(a.traversal, "traversal")?;
    let count = a.count.unwrap_or(1);
    let kind = match a.stage.unwrap_or(1) {
        1 => TargetKind::MaskedNoisy,
        2 => TargetKind::StaticRender,
        s => return Err(Failure::Usage(format!("--stage must be 1 or 2, got {s}"))),
    };
    let sigma = a.sigma.unwrap_or(DEFAULT_NOISE_SIGMA);
    let t = ds.traversal(j).ok_or(hws::Error::UnknownTraversal(j))?;
    let scene = match (&a.scene, kind, &a.targets_dir) {
        (Some(p), _, _) => Some(load_scene(p)?),
        (None, TargetKind::StaticRender, Some(_)) => {
            return Err(Failure::Usage("stage-2 targets need --scene".into()))
        }
        _ => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::from("traversal,gt,src,gt_image,src_image\n");
    if let Some(dir) = &a.targets_dir {
        std::fs::create_dir_all(dir).map_err(|e| anyhow!("{}: {e}", dir.display()))?;
    }
    for n in 0..count {
        let gt = rng.random_range(0..t.frames.len());
        let tri = sample_triplet(j, t.frames.len(), gt, kind, &mut rng)?;
        let (g, s) = (&t.frames[tri.gt], &t.frames[tri.src]);
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            j,
            tri.gt,
            tri.src,
            g.image.display(),
            s.image.display()
        ));
        if let Some(dir) = &a.targets_dir {
            let path = dir.join(format!("target_{n:05}.png"));
            write_target(&path, g, kind, sigma, seed.wrapping_add(n as u64), scene.as_ref())?;
        }
    }
    match &a.out {
        Some(p) => std::fs::write(p, csv).map_err(|e| anyhow!("{}: {e}", p.display()))?,
        None => print!("{csv}"),
    }
    info!("sampled {count} triplets from traversal {j}");
    Ok(())
}

fn write_target(
    path: &Path,
    gt: &FrameRecord,
    kind: TargetKind,
    sigma: f64,
    seed: u64,
    scene: Option<&Scene>,
) -> std::result::Result<(), Failure> {
    let img = match (kind, scene) {
        (TargetKind::MaskedNoisy, _) => {
            let image = buffers::read_png_rgb(&gt.image)?;
            stage1_target(&image, &gt.boxes, &gt.camera, sigma, seed)?
        }
        (TargetKind::StaticRender, Some(scene)) => {
            let z = scene.appearance.embed_or_default(gt.camera.traversal)?.to_vec();
            stage2_target(scene, &gt.camera, &z, &RenderSettings::default())?
        }
        (TargetKind::StaticRender, None) => unreachable!("checked by the caller"),
    };
    Ok(buffers::write_png_rgb(path, &img)?)
}
