//! The `roadbev` command line.
//!
//! Exit codes: 0 ok, 2 usage, 3 generation, 4 validation, 5 I/O. Failures
//! print a single `error[<kind>]: <message>` line on stderr.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use roadbev_core::ambiguity::{build_scenario, FrameChoice};
use roadbev_core::{
    apply_augmentation, coverage_stats, generate_synthetic_scene, run_ambiguity_experiment, sample_augmentation_seeded,
    scene_digest, synthesize_feature_map, AggregateOptions, AugmentationRanges, BevAugmentation, BevGridSpec, CamMask,
    FeatureMap, Layout, MetricsConfig, PsiMode, RotationEmbeddingTable, ScenarioVariant, SyntheticSceneSpec,
};

use crate::error::Error;
use crate::{binary, parallel, render, report, scene_file};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 2,
    Generation = 3,
    Validation = 4,
    Io = 5,
}

impl ExitKind {
    fn name(self) -> &'static str {
        match self {
            ExitKind::Usage => "usage",
            ExitKind::Generation => "generation",
            ExitKind::Validation => "validation",
            ExitKind::Io => "io",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let one_line: String = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        write!(f, "error[{}]: {}", self.kind.name(), one_line)
    }
}

fn usage(message: impl Into<String>) -> CliError {
    CliError { kind: ExitKind::Usage, message: message.into() }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::Io { .. } => ExitKind::Io,
            _ => ExitKind::Validation,
        };
        CliError { kind, message: e.to_string() }
    }
}

impl From<roadbev_core::Error> for CliError {
    fn from(e: roadbev_core::Error) -> Self {
        CliError { kind: ExitKind::Validation, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// `lo:hi` in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Span(pub f64, pub f64);

impl FromStr for Span {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("expected LO:HI, got {s:?}"))?;
        let p = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
        Ok(Span(p(a)?, p(b)?))
    }
}

fn positive_count(s: &str) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|e| format!("{s:?}: {e}"))?;
    if n == 0 {
        return Err("camera count must be at least 1 (a scene needs one or more cameras)".into());
    }
    Ok(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    Corridor,
    Intersection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PsiArg {
    Uniform,
    RightAngles,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Pedestrian,
    Vehicle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Style {
    Hits,
    Detections,
    FeatureNorm,
}

#[derive(Debug, Parser)]
#[command(name = "roadbev", version, about = "Roadside multi-camera BEV toolkit: scenes, mappings, augmentation, features, metrics")]
pub struct Cli {
    /// Random seed [u64]
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads [count; 0 = one per core]
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Primary output file [path; default depends on the command]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// BEV cells along x [count]
    #[arg(long, default_value_t = 500)]
    pub nx: usize,
    /// BEV cells along y [count]
    #[arg(long, default_value_t = 500)]
    pub ny: usize,
    /// BEV x extent [meters, LO:HI]
    #[arg(long, default_value = "-160:160", allow_hyphen_values = true)]
    pub x_range: Span,
    /// BEV y extent [meters, LO:HI]
    #[arg(long, default_value = "-20:800", allow_hyphen_values = true)]
    pub y_range: Span,
    /// Pillar sample heights [meters, comma-separated, increasing]
    #[arg(long, default_value = "0,1,2,3", value_delimiter = ',', allow_hyphen_values = true)]
    pub z_samples: Vec<f64>,
}

impl GridArgs {
    fn grid(&self) -> CliResult<BevGridSpec> {
        BevGridSpec::new(self.nx, self.ny, (self.x_range.0, self.x_range.1), (self.y_range.0, self.y_range.1), self.z_samples.clone())
            .map_err(|e| usage(format!("grid: {e}")))
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic roadside scene (TOML)
    GenScene {
        /// Cameras in the rig [count, >= 1]
        #[arg(long, default_value = "4", value_parser = positive_count)]
        cameras: usize,
        /// Camera layout
        #[arg(long, value_enum, default_value_t = LayoutArg::Corridor)]
        layout: LayoutArg,
        /// Objects to place [count]
        #[arg(long, default_value_t = 10)]
        objects: usize,
        /// Lowest pole height [meters]
        #[arg(long, default_value_t = 6.0)]
        pole_min: f64,
        /// Highest pole height [meters]
        #[arg(long, default_value_t = 15.0)]
        pole_max: f64,
        /// Proportions of vehicles, cyclists, pedestrians [fractions, comma-separated]
        #[arg(long, default_value = "0.6,0.2,0.2", value_delimiter = ',')]
        object_mix: Vec<f64>,
        /// Upper bound on cameras per scene [count]
        #[arg(long, default_value_t = 12)]
        max_cameras: usize,
    },
    /// Build the cell-to-pixel mapping table (BMAP) and print coverage statistics
    BuildMapping {
        /// Scene file [path]
        #[arg(long)]
        scene: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        /// Active cameras, one 0/1 per camera in scene order [bitstring; default all active]
        #[arg(long)]
        cam_mask: Option<String>,
        /// Directory of ROI masks named <camera_id>.pgm [path; default: masks referenced by the scene]
        #[arg(long)]
        roi_dir: Option<PathBuf>,
        /// Upper bound on cameras per scene [count]
        #[arg(long, default_value_t = 12)]
        max_cameras: usize,
    },
    /// Translate and rotate the BEV frame; writes the scene and a .aug.toml record
    Augment {
        /// Scene file [path]
        #[arg(long)]
        scene: PathBuf,
        /// Largest translation [meters, disk radius]
        #[arg(long, default_value_t = 80.0)]
        max_translation: f64,
        /// Rotation distribution
        #[arg(long, value_enum, default_value_t = PsiArg::Uniform)]
        psi: PsiArg,
        /// Allowed quarter turns for right-angles mode [counter-clockwise multiples of pi/2, comma-separated]
        #[arg(long, default_value = "0,1,2,3", value_delimiter = ',')]
        quarter_turns: Vec<u8>,
        /// Apply this augmentation instead of sampling [meters, meters, radians: DX,DY,DPSI]
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        delta: Option<Vec<f64>>,
        /// Upper bound on cameras per scene [count]
        #[arg(long, default_value_t = 12)]
        max_cameras: usize,
    },
    /// Aggregate camera feature maps into a BEV feature (BEVF)
    Aggregate {
        /// Scene file [path]
        #[arg(long)]
        scene: PathBuf,
        /// Mapping table built from the same scene [path]
        #[arg(long)]
        mapping: PathBuf,
        /// FMAP feature files, one per contributing camera [paths, comma-separated]
        #[arg(long, value_delimiter = ',')]
        features: Vec<PathBuf>,
        /// Synthesize feature maps from this seed instead [u64; default --seed]
        #[arg(long)]
        synth_features: Option<u64>,
        /// Channels of synthesized maps [count, even]
        #[arg(long, default_value_t = 16)]
        channels: usize,
        /// Image pixels per feature pixel for synthesized maps [pixels]
        #[arg(long, default_value_t = 16.0)]
        feature_stride: f64,
        /// Camera rotation embedding
        #[arg(long, value_enum, default_value_t = Switch::On)]
        embedding: Switch,
        /// Seed of the rotation embedding table [u64; default --seed]
        #[arg(long)]
        embedding_seed: Option<u64>,
        /// BEV position encoding
        #[arg(long, value_enum, default_value_t = Switch::On)]
        position_encoding: Switch,
        /// Upper bound on cameras per scene [count]
        #[arg(long, default_value_t = 12)]
        max_cameras: usize,
    },
    /// Rebuild the two-frame orientation ambiguity; writes a report and a .svg diagram
    AmbiguityDemo {
        /// Obstacle type
        #[arg(long, value_enum, default_value_t = VariantArg::Pedestrian)]
        variant: VariantArg,
        /// Camera rotation embedding
        #[arg(long, value_enum, default_value_t = Switch::Off)]
        embedding: Switch,
        /// Seed of the rotation embedding table [u64; default --seed]
        #[arg(long)]
        embedding_seed: Option<u64>,
    },
    /// Score detections against ground truth (mAP, mATE, mASE, mAOE, NDS)
    Evaluate {
        /// Detection file [path]
        #[arg(long)]
        dets: PathBuf,
        /// Ground-truth detection file [path]
        #[arg(long, conflicts_with = "gt_scene", required_unless_present = "gt_scene")]
        gts: Option<PathBuf>,
        /// Use a scene file's objects as single-frame ground truth [path]
        #[arg(long)]
        gt_scene: Option<PathBuf>,
        /// AP matching distances [meters, comma-separated]
        #[arg(long, default_value = "0.5,1,2,4", value_delimiter = ',')]
        thresholds: Vec<f64>,
        /// Matching distance for TP errors [meters]
        #[arg(long, default_value_t = 2.0)]
        tp_threshold: f64,
    },
    /// Render a mapping (hits, PPM), scene (detections, SVG) or BEV feature (feature-norm, PPM)
    Render {
        /// What to draw
        #[arg(long, value_enum)]
        style: Style,
        /// Scene file, for the detections style [path]
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Detections to overlay on the scene [path]
        #[arg(long)]
        dets: Option<PathBuf>,
        /// Mapping table, for hits; supplies grid geometry for feature-norm [path]
        #[arg(long)]
        mapping: Option<PathBuf>,
        /// BEV feature file, for feature-norm [path]
        #[arg(long)]
        bev: Option<PathBuf>,
        /// Radial spacing of range circles [meters; 0 disables]
        #[arg(long, default_value_t = 100.0)]
        circle_spacing: f64,
        /// Upper bound on cameras per scene [count]
        #[arg(long, default_value_t = 12)]
        max_cameras: usize,
    },
}

fn out_or(out: &Option<PathBuf>, default: &str) -> PathBuf {
    out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e).into())
}

/// Runs one parsed invocation, returning what to print on stdout.
pub fn execute(cli: &Cli) -> CliResult<String> {
    let Cli { seed, threads, out, command } = cli;
    let (seed, threads) = (*seed, *threads);
    match command {
        Command::GenScene { cameras, layout, objects, pole_min, pole_max, object_mix, max_cameras } => {
            let mix: [f64; 3] = object_mix
                .as_slice()
                .try_into()
                .map_err(|_| usage("object-mix needs exactly three proportions"))?;
            let spec = SyntheticSceneSpec {
                seed,
                num_cameras: *cameras,
                pole_height_range: (*pole_min, *pole_max),
                layout: match layout {
                    LayoutArg::Corridor => Layout::Corridor,
                    LayoutArg::Intersection => Layout::Intersection,
                },
                num_objects: *objects,
                object_mix: mix,
                max_cameras: *max_cameras,
                ..Default::default()
            };
            spec.validate().map_err(|e| usage(e.to_string()))?;
            let scene = generate_synthetic_scene(&spec)
                .map_err(|e| CliError { kind: ExitKind::Generation, message: e.to_string() })?;
            let path = out_or(out, "scene.toml");
            scene_file::save_scene(&scene, &path)?;
            Ok(format!("scene_id = {}\ncameras = {}\nobjects = {}\nwritten = {}\n", scene.scene_id, scene.cameras.len(), scene.objects.len(), path.display()))
        }
        Command::BuildMapping { scene, grid, cam_mask, roi_dir, max_cameras } => {
            let grid = grid.grid()?;
            let s = scene_file::load_scene(scene, *max_cameras)?;
            let mask = match cam_mask {
                Some(bits) => CamMask::from_bitstring(bits)?,
                None => CamMask::all_active(s.cameras.len()),
            };
            let roi = match roi_dir {
                Some(dir) => Some(scene_file::load_roi_dir(&s, dir)?),
                None => scene_file::load_scene_rois(&s, scene)?,
            };
            let table = parallel::build_mapping(&s, &grid, &mask, roi.as_ref(), threads)?;
            let path = out_or(out, "mapping.bmap");
            binary::save_mapping(&table, &path)?;
            Ok(report::coverage_kv(&coverage_stats(&table), table.total_hits()))
        }
        Command::Augment { scene, max_translation, psi, quarter_turns, delta, max_cameras } => {
            let s = scene_file::load_scene(scene, *max_cameras)?;
            let aug = match delta {
                Some(d) => {
                    let [dx, dy, dpsi]: [f64; 3] =
                        d.as_slice().try_into().map_err(|_| usage("delta needs DX,DY,DPSI"))?;
                    BevAugmentation::new([dx, dy], dpsi).map_err(|e| usage(format!("delta: {e}")))?
                }
                None => {
                    let ranges = AugmentationRanges {
                        max_translation: *max_translation,
                        psi_mode: match psi {
                            PsiArg::Uniform => PsiMode::Uniform,
                            PsiArg::RightAngles => PsiMode::RightAngles(quarter_turns.clone()),
                        },
                    };
                    ranges.validate().map_err(|e| usage(e.to_string()))?;
                    sample_augmentation_seeded(seed, &ranges)?
                }
            };
            let augmented = apply_augmentation(&s, &aug);
            let path = out_or(out, "augmented.toml");
            scene_file::save_scene(&augmented, &path)?;
            let record = path.with_extension("aug.toml");
            scene_file::save_augmentation(&aug, seed, &record)?;
            Ok(format!(
                "delta_x = {:?}\ndelta_y = {:?}\ndelta_psi = {:?}\nwritten = {}\nrecord = {}\n",
                aug.delta_xy[0],
                aug.delta_xy[1],
                aug.delta_psi,
                path.display(),
                record.display()
            ))
        }
        Command::Aggregate {
            scene,
            mapping,
            features,
            synth_features,
            channels,
            feature_stride,
            embedding,
            embedding_seed,
            position_encoding,
            max_cameras,
        } => {
            let s = scene_file::load_scene(scene, *max_cameras)?;
            let table = binary::load_mapping(mapping)?;
            if table.provenance().scene != scene_digest(&s) || table.n_cameras() != s.cameras.len() {
                return Err(CliError {
                    kind: ExitKind::Validation,
                    message: format!("{} was not built from {}", mapping.display(), scene.display()),
                });
            }
            if !features.is_empty() && synth_features.is_some() {
                return Err(usage("--features and --synth-features are mutually exclusive"));
            }
            let maps: Vec<FeatureMap> = if features.is_empty() {
                let fseed = synth_features.unwrap_or(seed);
                s.cameras
                    .iter()
                    .enumerate()
                    .map(|(k, c)| {
                        let w = ((c.intrinsics.width as f64 / feature_stride).ceil() as usize).max(1);
                        let h = ((c.intrinsics.height as f64 / feature_stride).ceil() as usize).max(1);
                        synthesize_feature_map(fseed, k, *channels, h, w, *feature_stride)
                    })
                    .collect::<roadbev_core::Result<_>>()
                    .map_err(|e| usage(e.to_string()))?
            } else {
                features.iter().map(binary::load_feature_map).collect::<Result<_, _>>()?
            };
            let c = maps.first().map_or(*channels, FeatureMap::channels);
            let options = AggregateOptions {
                use_rotation_embedding: embedding.on(),
                use_position_encoding: position_encoding.on(),
                embedding_table: Some(RotationEmbeddingTable::from_seed(embedding_seed.unwrap_or(seed), c)),
            };
            let bev = parallel::aggregate(&maps, &table, &s, &options, threads)?;
            let path = out_or(out, "bev.bevf");
            binary::save_bev_feature(&bev, &path)?;
            let nonempty = bev.hit_counts().iter().filter(|&&h| h > 0).count();
            Ok(format!("channels = {}\nnonempty_cells = {nonempty}\nwritten = {}\n", bev.channels(), path.display()))
        }
        Command::AmbiguityDemo { variant, embedding, embedding_seed } => {
            let v = match variant {
                VariantArg::Pedestrian => ScenarioVariant::Pedestrian,
                VariantArg::Vehicle => ScenarioVariant::Vehicle,
            };
            let r = run_ambiguity_experiment(v, embedding.on(), embedding_seed.unwrap_or(seed))?;
            let text = report::ambiguity_kv(&r);
            let path = out_or(out, "ambiguity.txt");
            write_file(&path, text.as_bytes())?;
            let svg = render::render_ambiguity_svg(&r, &build_scenario(v, FrameChoice::A), &build_scenario(v, FrameChoice::B));
            write_file(&path.with_extension("svg"), svg.as_bytes())?;
            Ok(text)
        }
        Command::Evaluate { dets, gts, gt_scene, thresholds, tp_threshold } => {
            let d = scene_file::load_detections(dets)?;
            let g = match (gts, gt_scene) {
                (Some(p), _) => scene_file::load_detections(p)?,
                (None, Some(p)) => scene_file::scene_ground_truth(&scene_file::load_scene(p, usize::MAX)?),
                (None, None) => return Err(usage("one of --gts or --gt-scene is required")),
            };
            let config = MetricsConfig { thresholds: thresholds.clone(), tp_threshold: *tp_threshold };
            let r = roadbev_core::compute_metrics(&d, &g, &config)?;
            let path = out_or(out, "metrics.txt");
            write_file(&path, report::metrics_kv(&r).as_bytes())?;
            Ok(report::metrics_table(&r))
        }
        Command::Render { style, scene, dets, mapping, bev, circle_spacing, max_cameras } => {
            let need = |p: &Option<PathBuf>, flag: &str| p.clone().ok_or_else(|| usage(format!("--style {style:?} needs {flag}")));
            let (bytes, default) = match style {
                Style::Hits => {
                    let table = binary::load_mapping(need(mapping, "--mapping")?)?;
                    (render::render_hits(&table, *circle_spacing).to_ppm(), "render.ppm")
                }
                Style::FeatureNorm => {
                    let f = binary::load_bev_feature(need(bev, "--bev")?)?;
                    let grid = mapping.as_ref().map(binary::load_mapping).transpose()?.map(|t| t.grid().clone());
                    (render::render_feature_norm(&f, grid.as_ref(), *circle_spacing).to_ppm(), "render.ppm")
                }
                Style::Detections => {
                    let s = scene_file::load_scene(need(scene, "--scene")?, *max_cameras)?;
                    let d = dets.as_ref().map(scene_file::load_detections).transpose()?;
                    (render::render_scene_svg(&s, d.as_ref(), *circle_spacing).into_bytes(), "render.svg")
                }
            };
            let path = out_or(out, default);
            write_file(&path, &bytes)?;
            Ok(format!("written = {}\n", path.display()))
        }
    }
}

/// Parses `args`, runs the command and reports errors on stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { ExitCode::from(2) } else { ExitCode::SUCCESS };
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            eprintln!("{}", usage(first));
            return ExitCode::from(ExitKind::Usage as u8);
        }
    };
    match execute(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.kind as u8)
        }
    }
}
