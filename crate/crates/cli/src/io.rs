//! File and template plumbing shared by the subcommands.

use crate::args::{DatasetArgs, TemplateArgs};
use crate::error::{data, usage, Result};
use organforge::datagen::templates::template_name;
use organforge::datagen::{read_manifest, template_pool, Manifest, Resolution, Side, StoredSample, VARIANT_NAMES};
use organforge::ffd::{BasisCache, ControlLattice, FfdTemplate, DEFAULT_DEGREES};
use organforge::fit::PairTarget;
use organforge::mesh::load_mesh;
use organforge::{Mesh, PointSet, Vec3};
use std::fs;
use std::path::{Path, PathBuf};

pub fn required<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| usage(format!("--{flag} is required")))
}

pub fn resolution(s: Option<&str>) -> Result<Resolution> {
    s.unwrap_or("2.5k").parse().map_err(|e: organforge::Error| usage(e.to_string()))
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| data(format!("{}: {e}", dir.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| data(format!("{}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

pub fn print_json(value: &serde_json::Value) {
    println!("{value}");
}

/// Template embedded in its lattice, with the basis taken from
/// `$ORGANFORGE_CACHE` when set.
pub fn ffd_template(name: String, mesh: Mesh, centered: bool, degrees: [usize; 3]) -> Result<FfdTemplate> {
    let mesh = if centered {
        let c = mesh.bounding_box()?.center();
        mesh.translate(&-c)
    } else {
        mesh
    };
    let lattice = ControlLattice::around(&mesh, degrees)?;
    Ok(match BasisCache::from_env() {
        Some(cache) => {
            let basis = cache.get_or_embed(&mesh, &lattice)?;
            FfdTemplate::with_basis(name, mesh, lattice, basis)?
        }
        None => FfdTemplate::in_lattice(name, mesh, lattice)?,
    })
}

/// `left_*.obj` / `right_*.obj` under `dir`: the known variant names first, in
/// variant order, then any others by file name.
fn template_files(dir: &Path, side: &str) -> Result<Vec<(String, PathBuf)>> {
    let entries = fs::read_dir(dir).map_err(|e| data(format!("{}: {e}", dir.display())))?;
    let mut found: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n.starts_with(&format!("{side}_")) && n.ends_with(".obj"))
        .map(|n| n.trim_end_matches(".obj").to_string())
        .collect();
    let rank = |n: &String| {
        VARIANT_NAMES
            .iter()
            .position(|v| *n == format!("{side}_{v}"))
            .unwrap_or(VARIANT_NAMES.len())
    };
    found.sort_by(|a, b| rank(a).cmp(&rank(b)).then_with(|| a.cmp(b)));
    if found.is_empty() {
        return Err(data(format!("no {side}_*.obj templates in {}", dir.display())));
    }
    Ok(found.into_iter().map(|n| (n.clone(), dir.join(format!("{n}.obj")))).collect())
}

/// Centred left and right template pools.
pub fn templates(args: &TemplateArgs) -> Result<(Vec<FfdTemplate>, Vec<FfdTemplate>)> {
    let pool = |side: Side| -> Result<Vec<FfdTemplate>> {
        let meshes: Vec<(String, Mesh)> = match &args.templates {
            Some(dir) => {
                let tag = if side == Side::Left { "left" } else { "right" };
                template_files(dir, tag)?
                    .into_iter()
                    .map(|(n, p)| Ok((n, load_mesh(&p)?)))
                    .collect::<Result<_>>()?
            }
            None => {
                let res = resolution(args.resolution.as_deref())?;
                template_pool(side, res)?
                    .into_iter()
                    .enumerate()
                    .map(|(v, m)| (template_name(side, v), m))
                    .collect()
            }
        };
        meshes
            .into_iter()
            .map(|(n, m)| ffd_template(n, m, true, DEFAULT_DEGREES))
            .collect()
    };
    Ok((pool(Side::Left)?, pool(Side::Right)?))
}

/// Whitespace-separated `x y z` rows; `#` starts a comment.
pub fn load_points(path: &Path) -> Result<PointSet> {
    let text = fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if v.len() != 3 {
            return Err(data(format!("{}:{}: expected 3 coordinates, got {}", path.display(), i + 1, v.len())));
        }
        pts.push(Vec3::new(v[0], v[1], v[2]));
    }
    Ok(PointSet::new(pts)?)
}

pub fn load_target(path: &Path) -> Result<PairTarget> {
    let is_obj = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj"));
    Ok(if is_obj {
        PairTarget::Mesh(load_mesh(path)?)
    } else {
        PairTarget::Points(load_points(path)?)
    })
}

/// Ground-truth pair in the dataset frame, left then right.
pub fn gt_mesh(s: &StoredSample) -> Mesh {
    Mesh::merge(&[&s.gt_left.translate(&s.ctr_l()), &s.gt_right.translate(&s.ctr_r())])
}

pub fn split_ids(args: &DatasetArgs) -> Result<(PathBuf, Manifest, Vec<usize>)> {
    let dir = required(args.dataset.clone(), "dataset")?;
    let manifest = read_manifest(&dir)?;
    let ids = match args.split.as_deref().unwrap_or("test") {
        "train" => manifest.train.clone(),
        "test" => manifest.test.clone(),
        "all" => (0..manifest.n_samples).collect(),
        other => return Err(usage(format!("--split must be train, test or all, got {other:?}"))),
    };
    Ok((dir, manifest, ids))
}

pub fn stem(id: usize) -> String {
    format!("{id:04}")
}
