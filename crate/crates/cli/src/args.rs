//! Command-line arguments. Every option is also accepted as a key of the
//! JSON `--config` file (snake_case, same meaning); values given on the
//! command line win. Boolean options accept `--flag`, `--flag true` and
//! `--flag false`.

use crate::error::usage;
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "organforge", version, about = "Template-deformation organ reconstruction from single radiographs")]
pub struct Cli {
    /// JSON file of option values for the subcommand; either a flat object or
    /// one keyed by subcommand name. Command-line flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for internal parallelism (default: available cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset of deformed lung pairs and radiographs.
    Datagen(DatagenArgs),
    /// Project a voxel volume (or the built-in phantom) to a radiograph.
    Project(ProjectArgs),
    /// Apply a serialized lattice displacement to a template mesh.
    Deform(DeformArgs),
    /// Fit templates to target geometry by direct optimization.
    Fit(FitArgs),
    /// Train the image encoder on a generated dataset.
    Train(TrainArgs),
    /// Reconstruct lungs from radiographs with a trained encoder.
    Infer(InferArgs),
    /// Compute reconstruction metrics over prediction / ground-truth pairs.
    Eval(EvalArgs),
    /// Check meshes for manifoldness and datasets for consistency.
    Validate(ValidateArgs),
    /// Write the built-in lung templates as OBJ files.
    Templates(TemplatesArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Datagen(_) => "datagen",
            Command::Project(_) => "project",
            Command::Deform(_) => "deform",
            Command::Fit(_) => "fit",
            Command::Train(_) => "train",
            Command::Infer(_) => "infer",
            Command::Eval(_) => "eval",
            Command::Validate(_) => "validate",
            Command::Templates(_) => "templates",
        }
    }
}

/// Overlays explicitly given flags on the config-file section for `name`.
pub fn merge<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&serde_json::Value>, name: &str) -> crate::Result<T> {
    let Some(config) = config else {
        return Ok(serde_json::from_value(serde_json::to_value(flags)?)?);
    };
    let obj = config
        .as_object()
        .ok_or_else(|| usage("config file must hold a JSON object"))?;
    let section = match obj.get(name) {
        Some(serde_json::Value::Object(s)) => s.clone(),
        Some(_) => return Err(usage(format!("config section {name:?} must be an object"))),
        None => obj.clone(),
    };
    let serde_json::Value::Object(given) = serde_json::to_value(flags)? else {
        unreachable!("argument structs serialize to objects")
    };
    if let Some(k) = section.keys().find(|k| !given.contains_key(*k)) {
        return Err(usage(format!("config: unknown option {k:?} for {name}")));
    }
    let mut merged = section;
    for (k, v) in given {
        if !v.is_null() {
            merged.insert(k, v);
        }
    }
    serde_json::from_value(serde_json::Value::Object(merged)).map_err(|e| usage(format!("config: {e}")))
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct DatagenArgs {
    /// Output dataset directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for every random draw (required).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of samples before scaling [default: 542].
    #[arg(long, value_name = "N")]
    pub n_samples: Option<usize>,
    /// Multiplier on the sample count, for desk-scale runs [default: 1].
    #[arg(long, value_name = "FACTOR")]
    pub scale: Option<f64>,
    /// Template resolution: 1k, 2.5k, 5k, 10k or RINGSxSEGMENTS [default: 2.5k].
    #[arg(long)]
    pub resolution: Option<String>,
    /// Use the reduced-size phantom grid (faster, blurrier images).
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub coarse: Option<bool>,
    /// Add Poisson + Gaussian detector noise [default: true].
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub noise: Option<bool>,
    /// Incident photon count per pixel [default: 1e5].
    #[arg(long)]
    pub i0: Option<f64>,
    /// Electronic noise standard deviation, in photon counts [default: 10].
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Ray geometry: parallel or cone [default: parallel].
    #[arg(long)]
    pub mode: Option<String>,
    /// Per-axis scale factor range MIN,MAX [default: 0.85,1.15].
    #[arg(long, value_delimiter = ',', num_args = 2, value_name = "MIN,MAX")]
    pub scale_range: Option<Vec<f64>>,
    /// Chance of a gradient rather than constant scale per lung [default: 0.3].
    #[arg(long, value_name = "P")]
    pub gradient_probability: Option<f64>,
    /// Chance of local bumps per sample [default: 0.3].
    #[arg(long, value_name = "P")]
    pub bump_probability: Option<f64>,
    /// Maximum centre shift per axis, model units [default: 0.05].
    #[arg(long, value_name = "UNITS")]
    pub center_jitter: Option<f64>,
    /// Template variants to draw from, comma separated [default: 0,1].
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    pub variants: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ProjectArgs {
    /// Input volume file (as written by the volume writer).
    #[arg(long, value_name = "FILE")]
    pub volume: Option<PathBuf>,
    /// Project the built-in phantom instead of a volume file.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub phantom: Option<bool>,
    /// Use the reduced-size phantom grid.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub coarse: Option<bool>,
    /// Lung resolution used to fill the phantom [default: 2.5k].
    #[arg(long)]
    pub resolution: Option<String>,
    /// Output 16-bit PGM image.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Ray geometry: parallel or cone [default: parallel].
    #[arg(long)]
    pub mode: Option<String>,
    /// View angle about the z axis, degrees [default: 0].
    #[arg(long, value_name = "DEG")]
    pub angle: Option<f64>,
    /// Cone beam source-to-axis distance, mm [default: 1000].
    #[arg(long, value_name = "MM")]
    pub sad: Option<f64>,
    /// Cone beam source-to-detector distance, mm [default: 1500].
    #[arg(long, value_name = "MM")]
    pub sdd: Option<f64>,
    /// Detector rows [default: 192].
    #[arg(long)]
    pub rows: Option<usize>,
    /// Detector columns [default: 256].
    #[arg(long)]
    pub cols: Option<usize>,
    /// Detector pixel pitch, mm [default: 1].
    #[arg(long, value_name = "MM")]
    pub spacing: Option<f64>,
    /// Add detector noise (requires --seed).
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub noise: Option<bool>,
    /// Incident photon count per pixel [default: 1e5].
    #[arg(long)]
    pub i0: Option<f64>,
    /// Electronic noise standard deviation [default: 10].
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Noise seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Histogram-equalize the image before writing.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub equalize: Option<bool>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct DeformArgs {
    /// Template mesh (OBJ).
    #[arg(long, value_name = "FILE")]
    pub template: Option<PathBuf>,
    /// Displacement file: raw little-endian f64 triples, or JSON array.
    #[arg(long, value_name = "FILE")]
    pub delta: Option<PathBuf>,
    /// Output OBJ.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Lattice degrees L,M,N [default: 3,3,3].
    #[arg(long, value_delimiter = ',', num_args = 3, value_name = "L,M,N")]
    pub degrees: Option<Vec<usize>>,
    /// Move the template's bounding-box centre to the origin before
    /// embedding, as fit and infer do.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub centered: Option<bool>,
    /// Translation X,Y,Z added after deforming [default: 0,0,0].
    #[arg(long, value_delimiter = ',', num_args = 3, value_name = "X,Y,Z", allow_negative_numbers = true)]
    pub translate: Option<Vec<f64>>,
    /// Also write a PLY coloured by displacement magnitude.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub ply: Option<bool>,
}

/// Where templates come from, shared by fit, train and infer.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct TemplateArgs {
    /// Built-in template resolution: 1k, 2.5k, 5k, 10k or RINGSxSEGMENTS [default: 2.5k].
    #[arg(long)]
    pub resolution: Option<String>,
    /// Directory of left_*.obj / right_*.obj templates, used instead of the built-in ones.
    #[arg(long, value_name = "DIR")]
    pub templates: Option<PathBuf>,
}

/// Dataset selection shared by fit, infer and eval.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct DatasetArgs {
    /// Dataset directory written by datagen.
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
    /// Which samples: train, test or all [default: test].
    #[arg(long)]
    pub split: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// Target geometry: a two-lung OBJ, or a text file of `x y z` points.
    #[arg(long, value_name = "FILE")]
    pub target: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DatasetArgs,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for target surface sampling (required).
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub templates: TemplateArgs,
    /// Optimization steps per template [default: 500].
    #[arg(long)]
    pub steps: Option<usize>,
    /// Adam step size [default: 0.01].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Displacement regularization weight [default: 1].
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Points sampled from each target mesh part [default: 1024].
    #[arg(long, value_name = "N")]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Dataset directory; its manifest's train split is used.
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
    /// Output model file; a `.json` sidecar and a `.train.json` log are written next to it.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Seed for initialization and minibatch order (required).
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub templates: TemplateArgs,
    /// Optimizer steps [default: 5000].
    #[arg(long)]
    pub steps: Option<usize>,
    /// Minibatch size [default: 32].
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Adam step size [default: 0.001].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Translation loss weight [default: 50].
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// Displacement regularization weight [default: 1].
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Translation targets: per-sample or global-mean [default: per-sample].
    #[arg(long)]
    pub translation: Option<String>,
    /// Hidden layer widths, comma separated [default: 256,256,256].
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    pub hidden: Option<Vec<usize>>,
    /// Average-pooling window applied to the image [default: 4].
    #[arg(long)]
    pub pool: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct InferArgs {
    /// Trained model file.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Input radiograph (PGM).
    #[arg(long, value_name = "FILE")]
    pub image: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DatasetArgs,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub templates: TemplateArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    /// Predicted mesh (OBJ).
    #[arg(long, value_name = "FILE")]
    pub pred: Option<PathBuf>,
    /// Ground-truth mesh (OBJ).
    #[arg(long, value_name = "FILE")]
    pub gt: Option<PathBuf>,
    /// Directory of predictions named NNNN.obj, compared with --dataset.
    #[arg(long, value_name = "DIR")]
    pub pred_dir: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DatasetArgs,
    /// Metrics to compute, comma separated [default: all].
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    pub metrics: Option<Vec<String>>,
    /// Seed for surface sampling (required).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Surface points per mesh for point metrics [default: 1024].
    #[arg(long, value_name = "N")]
    pub points: Option<usize>,
    /// Surface samples per mesh for mesh Hausdorff [default: 10000].
    #[arg(long, value_name = "N")]
    pub hd_samples: Option<usize>,
    /// F-score threshold; 1.5x is reported too [default: 0.001].
    #[arg(long)]
    pub eps: Option<f64>,
    /// Voxels along the longest side for IoU [default: 64].
    #[arg(long, value_name = "N")]
    pub iou_resolution: Option<usize>,
    /// JSON report path [default: stdout].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// CSV file receiving one aggregate row (header written when new).
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
    /// Row label in the CSV [default: prediction path].
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ValidateArgs {
    /// Mesh files to check for closed, self-intersection-free manifoldness.
    #[arg(long = "mesh", value_name = "FILE")]
    pub meshes: Option<Vec<PathBuf>>,
    /// Dataset directory to check.
    #[arg(long, value_name = "DIR")]
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct TemplatesArgs {
    /// Output directory; one subdirectory per resolution.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Resolutions, comma separated [default: 1k,2.5k,5k,10k].
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    pub resolution: Option<Vec<String>>,
}
