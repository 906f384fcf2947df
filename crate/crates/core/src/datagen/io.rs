//! Dataset layout: `images/NNNN.pgm`, `meshes/NNNN_{l,r}.obj`,
//! `meta/NNNN.json` and `manifest.json`.

use super::{build_phantom, generate_sample, DatagenConfig, Sample, SampleParams, TemplateSet};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::{load_mesh, write_obj, Mesh};
use crate::projection::{load_image, save_image, ProjectionImage};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub n_samples: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub config: DatagenConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub id: usize,
    pub ctr_l: [f64; 3],
    pub ctr_r: [f64; 3],
    pub normalization: f64,
    pub noise_seed: u64,
    pub params: SampleParams,
}

/// A sample read back from disk.
#[derive(Debug, Clone)]
pub struct StoredSample {
    pub meta: SampleMeta,
    pub image: ProjectionImage,
    pub gt_left: Mesh,
    pub gt_right: Mesh,
}

impl StoredSample {
    pub fn ctr_l(&self) -> Vec3 {
        Vec3::from(self.meta.ctr_l)
    }

    pub fn ctr_r(&self) -> Vec3 {
        Vec3::from(self.meta.ctr_r)
    }
}

/// `(train, test)` sizes in the 446 : 96 ratio, each non-empty when `n >= 2`.
pub fn split_counts(n: usize) -> (usize, usize) {
    if n < 2 {
        return (n, 0);
    }
    let train = ((n as f64) * 446.0 / 542.0).round() as usize;
    let train = train.clamp(1, n - 1);
    (train, n - train)
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn stem(id: usize) -> String {
    format!("{id:04}")
}

fn write_sample(dir: &Path, s: &Sample) -> Result<()> {
    let st = stem(s.id);
    save_image(&s.image, dir.join("images").join(format!("{st}.pgm")))?;
    write(&dir.join("meshes").join(format!("{st}_l.obj")), write_obj(&s.gt_left))?;
    write(&dir.join("meshes").join(format!("{st}_r.obj")), write_obj(&s.gt_right))?;
    let meta = SampleMeta {
        id: s.id,
        ctr_l: s.ctr_l.into(),
        ctr_r: s.ctr_r.into(),
        normalization: s.normalization,
        noise_seed: s.noise_seed,
        params: s.params.clone(),
    };
    write(&dir.join("meta").join(format!("{st}.json")), serde_json::to_string_pretty(&meta)?)
}

/// Generates `cfg.n_samples` samples in parallel and writes them under `dir`.
/// Output bytes depend only on `cfg`.
pub fn generate_dataset(cfg: &DatagenConfig, dir: impl AsRef<Path>) -> Result<Manifest> {
    cfg.validate()?;
    let dir = dir.as_ref();
    for sub in ["images", "meshes", "meta"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let phantom = build_phantom(&cfg.phantom, cfg.resolution)?;
    let templates = TemplateSet::canonical(cfg.resolution)?;
    (0..cfg.n_samples).into_par_iter().try_for_each(|id| {
        let s = generate_sample(id, &phantom, &templates, cfg)?;
        write_sample(dir, &s)
    })?;
    let mut ids: Vec<usize> = (0..cfg.n_samples).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(u64::MAX);
    ids.shuffle(&mut rng);
    let (n_train, _) = split_counts(cfg.n_samples);
    let (mut train, mut test) = (ids[..n_train].to_vec(), ids[n_train..].to_vec());
    train.sort_unstable();
    test.sort_unstable();
    let manifest = Manifest {
        tool: "organforge".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        n_samples: cfg.n_samples,
        train,
        test,
        config: cfg.clone(),
    };
    write(&dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let p = dir.as_ref().join("manifest.json");
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_sample(dir: impl AsRef<Path>, id: usize) -> Result<StoredSample> {
    let dir = dir.as_ref();
    let st = stem(id);
    let mp = dir.join("meta").join(format!("{st}.json"));
    let text = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
    Ok(StoredSample {
        meta: serde_json::from_str(&text)?,
        image: load_image(dir.join("images").join(format!("{st}.pgm")))?,
        gt_left: load_mesh(dir.join("meshes").join(format!("{st}_l.obj")))?,
        gt_right: load_mesh(dir.join("meshes").join(format!("{st}_r.obj")))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{PhantomConfig, Resolution};

    #[test]
    fn split_ratio() {
        assert_eq!(split_counts(542), (446, 96));
        assert_eq!(split_counts(1), (1, 0));
        assert_eq!(split_counts(2), (1, 1));
        let (a, b) = split_counts(10);
        assert_eq!(a + b, 10);
        assert!(b >= 1);
    }

    #[test]
    fn dataset_roundtrip_and_byte_determinism() {
        let cfg = DatagenConfig {
            n_samples: 3,
            resolution: Resolution::Custom(10, 20),
            phantom: PhantomConfig {
                dims: [32, 32, 24],
                spacing_mm: 8.0,
                ..PhantomConfig::default()
            },
            seed: 5,
            ..DatagenConfig::default()
        };
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let m = generate_dataset(&cfg, a.path()).unwrap();
        generate_dataset(&cfg, b.path()).unwrap();
        assert_eq!(m.train.len() + m.test.len(), 3);
        for rel in ["manifest.json", "images/0000.pgm", "images/0002.pgm", "meshes/0001_l.obj", "meta/0002.json"] {
            assert_eq!(fs::read(a.path().join(rel)).unwrap(), fs::read(b.path().join(rel)).unwrap(), "{rel}");
        }
        assert_eq!(read_manifest(a.path()).unwrap(), m);
        let s = load_sample(a.path(), 1).unwrap();
        assert_eq!(s.meta.id, 1);
        assert_eq!((s.image.width, s.image.height), (256, 192));
        assert!(s.ctr_l().x > 0.0);
    }
}
