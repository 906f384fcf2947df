use crate::args::*;
use crate::error::{check, data, usage, Result};
use crate::io::*;
use log::info;
use organforge::datagen::templates::template_name;
use organforge::datagen::{
    build_phantom, generate_dataset, load_sample, split_counts, DatagenConfig, PhantomConfig, Resolution, Side, VARIANT_NAMES,
};
use organforge::encoder::{
    load_model, save_model, smoothed, train, EncoderDims, EncoderModel, TrainConfig, TrainingExample, TranslationTarget,
};
use organforge::ffd::{read_displacement, Displacement, DEFAULT_DEGREES};
use organforge::fit::{FitConfig, PairTarget};
use organforge::losses::LossWeights;
use organforge::mesh::{load_mesh, save_mesh, validate_manifold, write_obj};
use organforge::metrics::{evaluate, metrics, EvalConfig, MetricsReport};
use organforge::projection::{apply_noise, histogram_equalize, load_image, project, save_image, Geometry, NoiseParams, ProjectionImage};
use organforge::reconstruct::{reconstructors, ReconstructedPair, ReconstructionContext, ReconstructionInput};
use organforge::volume::read_volume;
use organforge::Mesh;
use rayon::prelude::*;
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};

fn seed(s: Option<u64>) -> Result<u64> {
    s.ok_or_else(|| usage("--seed is required for this command"))
}

fn geometry(mode: Option<&str>) -> Geometry {
    Geometry {
        mode: mode.unwrap_or("parallel").to_string(),
        ..Geometry::default()
    }
}

fn noise_params(i0: Option<f64>, sigma: Option<f64>) -> NoiseParams {
    let d = NoiseParams::default();
    NoiseParams {
        i0: i0.unwrap_or(d.i0),
        sigma: sigma.unwrap_or(d.sigma),
    }
}

fn range(v: &[f64], flag: &str) -> Result<[f64; 2]> {
    match v {
        [a, b] => Ok([*a, *b]),
        _ => Err(usage(format!("--{flag} takes exactly two values"))),
    }
}

pub fn datagen(a: DatagenArgs) -> Result<()> {
    let out = required(a.out, "out")?;
    let d = DatagenConfig::default();
    let scale = a.scale.unwrap_or(1.0);
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(usage("--scale must be positive"));
    }
    let n = ((a.n_samples.unwrap_or(d.n_samples) as f64) * scale).round().max(1.0) as usize;
    let cfg = DatagenConfig {
        n_samples: n,
        scale_range: a.scale_range.as_deref().map(|r| range(r, "scale-range")).transpose()?.unwrap_or(d.scale_range),
        gradient_probability: a.gradient_probability.unwrap_or(d.gradient_probability),
        bump_probability: a.bump_probability.unwrap_or(d.bump_probability),
        center_jitter: a.center_jitter.unwrap_or(d.center_jitter),
        variants: a.variants.unwrap_or(d.variants),
        noise: a.noise.unwrap_or(true).then(|| noise_params(a.i0, a.sigma)),
        resolution: resolution(a.resolution.as_deref())?,
        phantom: if a.coarse.unwrap_or(false) { PhantomConfig::coarse() } else { PhantomConfig::default() },
        projection: geometry(a.mode.as_deref()),
        seed: seed(a.seed)?,
        ..d
    };
    check(cfg.validate())?;
    info!("generating {n} samples into {}", out.display());
    let m = generate_dataset(&cfg, &out)?;
    print_json(&json!({
        "out": out,
        "n_samples": m.n_samples,
        "train": m.train.len(),
        "test": m.test.len(),
    }));
    Ok(())
}

pub fn project_cmd(a: ProjectArgs) -> Result<()> {
    let out = required(a.out, "out")?;
    let volume = match (a.volume, a.phantom.unwrap_or(false)) {
        (Some(p), false) => read_volume(p)?,
        (None, true) => {
            let cfg = if a.coarse.unwrap_or(false) { PhantomConfig::coarse() } else { PhantomConfig::default() };
            build_phantom(&cfg, resolution(a.resolution.as_deref())?)?.volume
        }
        _ => return Err(usage("give exactly one of --volume and --phantom")),
    };
    let d = Geometry::default();
    let geo = Geometry {
        mode: a.mode.unwrap_or(d.mode),
        source_to_axis_mm: a.sad.unwrap_or(d.source_to_axis_mm),
        source_to_detector_mm: a.sdd.unwrap_or(d.source_to_detector_mm),
        detector_rows: a.rows.unwrap_or(d.detector_rows),
        detector_cols: a.cols.unwrap_or(d.detector_cols),
        pixel_spacing_mm: a.spacing.map_or(d.pixel_spacing_mm, |s| [s, s]),
        view_angle_deg: a.angle.unwrap_or(d.view_angle_deg),
    };
    check(geo.validate())?;
    let noise = a.noise.unwrap_or(false);
    let noise_seed = if noise { Some(seed(a.seed)?) } else { None };
    let mut img = project(&volume, &geo)?;
    if let Some(s) = noise_seed {
        img = apply_noise(&img, &noise_params(a.i0, a.sigma), s)?;
    }
    if a.equalize.unwrap_or(false) {
        img = histogram_equalize(&img);
    }
    save_image(&img, &out)?;
    let (lo, hi) = img.min_max();
    print_json(&json!({ "out": out, "width": img.width, "height": img.height, "min": lo, "max": hi }));
    Ok(())
}

fn read_delta(path: &Path) -> Result<Displacement> {
    if !path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        return Ok(read_displacement(path)?);
    }
    let text = fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let flat: Vec<f64> = match serde_json::from_value::<Vec<f64>>(v.clone()) {
        Ok(f) => f,
        Err(_) => serde_json::from_value::<Vec<[f64; 3]>>(v)
            .map_err(|_| data(format!("{}: expected a flat number array or an array of triples", path.display())))?
            .concat(),
    };
    Ok(Displacement::from_flat(&flat)?)
}

fn triple<T: Copy>(v: &[T], flag: &str) -> Result<[T; 3]> {
    match v {
        [a, b, c] => Ok([*a, *b, *c]),
        _ => Err(usage(format!("--{flag} takes exactly three values"))),
    }
}

pub fn deform(a: DeformArgs) -> Result<()> {
    let template = required(a.template, "template")?;
    let delta_path = required(a.delta, "delta")?;
    let out = required(a.out, "out")?;
    let degrees = a.degrees.as_deref().map(|d| triple(d, "degrees")).transpose()?.unwrap_or(DEFAULT_DEGREES);
    if degrees.contains(&0) {
        return Err(usage("--degrees must be positive"));
    }
    let shift = a.translate.as_deref().map(|t| triple(t, "translate")).transpose()?.unwrap_or([0.0; 3]);
    let mesh = load_mesh(&template)?;
    let delta = read_delta(&delta_path)?;
    let t = ffd_template("template".into(), mesh, a.centered.unwrap_or(false), degrees)?;
    if delta.len() != t.lattice_size() {
        return Err(data(format!(
            "displacement has {} control points, lattice has {}",
            delta.len(),
            t.lattice_size()
        )));
    }
    let shift = organforge::Vec3::from(shift);
    let moved = t.deform(&delta)?;
    let moved = if shift == organforge::Vec3::zeros() { moved } else { moved.translate(&shift) };
    let magnitude: Vec<f64> = moved
        .vertices()
        .iter()
        .zip(t.mesh.vertices())
        .map(|(a, b)| (a - b - shift).norm())
        .collect();
    save_mesh(&moved, &out, a.ply.unwrap_or(false).then_some(magnitude.as_slice()))?;
    let report = validate_manifold(&moved);
    print_json(&json!({
        "out": out,
        "vertex_count": moved.vertex_count(),
        "max_displacement": delta.max_abs(),
        "manifold": report,
    }));
    Ok(())
}

fn write_prediction(dir: &Path, stem: &str, p: &ReconstructedPair, extra: serde_json::Value) -> Result<serde_json::Value> {
    write_text(&dir.join(format!("{stem}.obj")), &write_obj(&p.mesh))?;
    write_text(&dir.join(format!("{stem}_l.obj")), &write_obj(&p.left_mesh))?;
    write_text(&dir.join(format!("{stem}_r.obj")), &write_obj(&p.right_mesh))?;
    let mut j = p.to_json();
    if let (Some(o), serde_json::Value::Object(e)) = (j.as_object_mut(), extra) {
        o.extend(e);
    }
    write_json(&dir.join(format!("{stem}.json")), &j)?;
    Ok(j)
}

/// Runs `strategy` on each input and writes `<stem>.obj`, `_l.obj`, `_r.obj`
/// and `.json` per input, plus `summary.json`.
fn reconstruct_all(
    strategy: &str,
    ctx: &ReconstructionContext<'_>,
    inputs: Vec<(String, ReconstructionInput<'_>)>,
    out: &Path,
) -> Result<()> {
    let r = reconstructors().get(strategy)?;
    create_dir(out)?;
    let results = inputs
        .par_iter()
        .map(|(stem, input)| {
            info!("{strategy}: {stem}");
            let p = r.reconstruct(ctx, input)?;
            let manifold = validate_manifold(&p.mesh);
            write_prediction(out, stem, &p, json!({ "reconstructor": strategy, "manifold": manifold }))?;
            Ok(json!({ "name": stem, "selected": [p.left.selected, p.right.selected], "closed_manifold": manifold.is_closed_manifold }))
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = json!({ "reconstructor": strategy, "count": results.len(), "outputs": results });
    write_json(&out.join("summary.json"), &summary)?;
    print_json(&json!({ "out": out, "count": results.len() }));
    Ok(())
}

pub fn fit(a: FitArgs) -> Result<()> {
    let out = required(a.out, "out")?;
    let d = FitConfig::default();
    let cfg = FitConfig {
        steps: a.steps.unwrap_or(d.steps),
        adam: organforge::fit::AdamParams {
            lr: a.lr.unwrap_or(d.adam.lr),
            ..d.adam
        },
        weights: LossWeights {
            lambda2: a.lambda2.unwrap_or(d.weights.lambda2),
            ..d.weights
        },
        target_sample_count: a.samples.unwrap_or(d.target_sample_count),
        seed: seed(a.seed)?,
    };
    check(cfg.validate())?;
    let (tl, tr) = templates(&a.templates)?;
    let ctx = ReconstructionContext {
        templates_left: &tl,
        templates_right: &tr,
        fit: cfg,
        model: None,
    };
    let targets: Vec<(String, PairTarget)> = match (a.target, a.data.dataset.is_some()) {
        (Some(t), false) => vec![("pred".into(), load_target(&t)?)],
        (None, true) => {
            let (dir, _, ids) = split_ids(&a.data)?;
            ids.par_iter()
                .map(|&id| Ok((stem(id), PairTarget::Mesh(gt_mesh(&load_sample(&dir, id)?)))))
                .collect::<Result<_>>()?
        }
        _ => return Err(usage("give exactly one of --target and --dataset")),
    };
    let inputs = targets.iter().map(|(s, t)| (s.clone(), ReconstructionInput::Target(t))).collect();
    reconstruct_all("fit", &ctx, inputs, &out)
}

fn trace_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".train.json");
    PathBuf::from(s)
}

pub fn train_cmd(a: TrainArgs) -> Result<()> {
    let dir = required(a.dataset, "dataset")?;
    let out = required(a.out, "out")?;
    let d = TrainConfig::default();
    let translation = match a.translation.as_deref() {
        None => d.translation,
        Some(t) => serde_json::from_value::<TranslationTarget>(json!(t))
            .map_err(|_| usage(format!("--translation must be per-sample or global-mean, got {t:?}")))?,
    };
    let cfg = TrainConfig {
        steps: a.steps.unwrap_or(d.steps),
        adam: organforge::fit::AdamParams {
            lr: a.lr.unwrap_or(d.adam.lr),
            ..d.adam
        },
        batch_size: a.batch_size.unwrap_or(d.batch_size),
        weights: LossWeights {
            lambda1: a.lambda1.unwrap_or(d.weights.lambda1),
            lambda2: a.lambda2.unwrap_or(d.weights.lambda2),
        },
        translation,
        seed: seed(a.seed)?,
    };
    check(cfg.validate())?;
    let (tl, tr) = templates(&a.templates)?;
    let manifest = organforge::datagen::read_manifest(&dir)?;
    if manifest.train.is_empty() {
        return Err(data("dataset has no training samples"));
    }
    let samples = manifest
        .train
        .par_iter()
        .map(|&id| load_sample(&dir, id))
        .collect::<organforge::Result<Vec<_>>>()?;
    let dd = EncoderDims::default();
    let dims = EncoderDims {
        image_rows: samples[0].image.height,
        image_cols: samples[0].image.width,
        pool: a.pool.unwrap_or(dd.pool),
        hidden: a.hidden.unwrap_or(dd.hidden),
        lattice_size: tl[0].lattice_size(),
        templates_left: tl.len(),
        templates_right: tr.len(),
    };
    check(dims.validate())?;
    let model = EncoderModel::new(dims, cfg.seed)?;
    let examples = samples
        .par_iter()
        .map(|s| TrainingExample::from_meshes(&model, &s.image, &s.gt_left, &s.gt_right, s.ctr_l(), s.ctr_r()))
        .collect::<organforge::Result<Vec<_>>>()?;
    info!("training on {} samples for {} steps", examples.len(), cfg.steps);
    let trained = train(&model, &tl, &tr, &examples, &cfg)?;
    save_model(&trained.model, &out)?;
    let window = 100.min(trained.loss_trace.len());
    let s = smoothed(&trained.loss_trace, window);
    let log = json!({
        "config": cfg,
        "dims": trained.model.dims(),
        "train_ids": manifest.train,
        "templates_left": tl.iter().map(|t| &t.name).collect::<Vec<_>>(),
        "templates_right": tr.iter().map(|t| &t.name).collect::<Vec<_>>(),
        "loss_trace": trained.loss_trace,
        "smoothing_window": window,
        "smoothed": s,
    });
    write_json(&trace_path(&out), &log)?;
    print_json(&json!({
        "out": out,
        "param_count": trained.model.param_count(),
        "steps": cfg.steps,
        "smoothed_start": s[window - 1],
        "smoothed_end": s[s.len() - 1],
    }));
    Ok(())
}

pub fn infer(a: InferArgs) -> Result<()> {
    let model = load_model(required(a.model, "model")?)?;
    let out = required(a.out, "out")?;
    let (tl, tr) = templates(&a.templates)?;
    check(model.check_templates(&tl, &tr))?;
    let images: Vec<(String, ProjectionImage)> = match (a.image, a.data.dataset.is_some()) {
        (Some(p), false) => vec![("pred".into(), load_image(p)?)],
        (None, true) => {
            let (dir, _, ids) = split_ids(&a.data)?;
            ids.par_iter()
                .map(|&id| Ok((stem(id), load_sample(&dir, id)?.image)))
                .collect::<Result<_>>()?
        }
        _ => return Err(usage("give exactly one of --image and --dataset")),
    };
    let ctx = ReconstructionContext {
        templates_left: &tl,
        templates_right: &tr,
        fit: FitConfig::default(),
        model: Some(&model),
    };
    let inputs = images.iter().map(|(s, i)| (s.clone(), ReconstructionInput::Image(i))).collect();
    reconstruct_all("encoder", &ctx, inputs, &out)
}

/// Table columns: label, pair count, then means of these report fields.
const CSV_COLUMNS: [(&str, &str); 6] = [
    ("CD", "chamfer"),
    ("EMD", "emd"),
    ("F_eps", "f_score_eps"),
    ("F_1.5eps", "f_score_1_5eps"),
    ("IoU", "iou"),
    ("HD_mesh", "hausdorff_mesh"),
];

fn mean_report(reports: &[MetricsReport]) -> serde_json::Map<String, serde_json::Value> {
    let mut m = serde_json::Map::new();
    for (i, f) in MetricsReport::FIELDS.iter().enumerate() {
        let vals: Vec<f64> = reports.iter().filter_map(|r| r.values()[i]).collect();
        let v = if vals.is_empty() { serde_json::Value::Null } else { json!(vals.iter().sum::<f64>() / vals.len() as f64) };
        m.insert(f.to_string(), v);
    }
    m
}

fn append_csv(path: &Path, label: &str, n: usize, mean: &serde_json::Map<String, serde_json::Value>) -> Result<()> {
    let mut text = if path.exists() {
        fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?
    } else {
        let cols: Vec<&str> = CSV_COLUMNS.iter().map(|c| c.0).collect();
        format!("method,n,{}\n", cols.join(","))
    };
    let cells: Vec<String> = CSV_COLUMNS
        .iter()
        .map(|(_, f)| mean.get(*f).and_then(|v| v.as_f64()).map_or(String::new(), |v| format!("{v:.6}")))
        .collect();
    let label = if label.contains([',', '"']) { format!("\"{}\"", label.replace('"', "\"\"")) } else { label.to_string() };
    text.push_str(&format!("{label},{n},{}\n", cells.join(",")));
    write_text(path, &text)
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let d = EvalConfig::default();
    let cfg = EvalConfig {
        n_points: a.points.unwrap_or(d.n_points),
        hausdorff_mesh_samples: a.hd_samples.unwrap_or(d.hausdorff_mesh_samples),
        eps: a.eps.unwrap_or(d.eps),
        iou_resolution: a.iou_resolution.unwrap_or(d.iou_resolution),
        seed: seed(a.seed)?,
    };
    if cfg.n_points == 0 || cfg.hausdorff_mesh_samples == 0 || cfg.iou_resolution == 0 || !(cfg.eps > 0.0) {
        return Err(usage("--points, --hd-samples, --iou-resolution and --eps must be positive"));
    }
    let names: Vec<String> = a.metrics.unwrap_or_default();
    for n in &names {
        if !metrics().contains(n) {
            return Err(usage(format!("unknown metric {n:?} (available: {})", metrics().names().join(", "))));
        }
    }
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    // (name, prediction, explicit ground truth); dataset pairs take theirs by id.
    let (pairs, label): (Vec<(String, PathBuf, Option<PathBuf>)>, String) = match (&a.pred, &a.gt, &a.pred_dir) {
        (Some(p), Some(g), None) if a.data.dataset.is_none() => {
            (vec![(p.display().to_string(), p.clone(), Some(g.clone()))], p.display().to_string())
        }
        (None, None, Some(pd)) => {
            let (_, _, ids) = split_ids(&a.data)?;
            let pairs = ids
                .iter()
                .map(|&id| (stem(id), pd.join(format!("{}.obj", stem(id))), None))
                .collect();
            (pairs, pd.display().to_string())
        }
        _ => return Err(usage("give either --pred and --gt, or --pred-dir and --dataset")),
    };
    let dataset = a.data.dataset.clone();
    let results = pairs
        .par_iter()
        .map(|(name, pred_path, gt)| {
            let pred = load_mesh(pred_path)?;
            let gt: Mesh = match (gt, &dataset) {
                (Some(g), _) => load_mesh(g)?,
                (None, Some(dir)) => gt_mesh(&load_sample(dir, name.parse().expect("numeric stem"))?),
                (None, None) => unreachable!("dataset mode has a dataset"),
            };
            let report = evaluate(&pred, &gt, &cfg, &names)?;
            Ok((name.clone(), report))
        })
        .collect::<Result<Vec<_>>>()?;
    let reports: Vec<MetricsReport> = results.iter().map(|(_, r)| r.clone()).collect();
    let mean = mean_report(&reports);
    let doc = json!({
        "config": cfg,
        "n": results.len(),
        "mean": mean,
        "pairs": results.iter().map(|(n, r)| json!({ "name": n, "report": r })).collect::<Vec<_>>(),
    });
    match &a.out {
        Some(p) => {
            write_json(p, &doc)?;
            print_json(&json!({ "out": p, "n": results.len(), "mean": mean }));
        }
        None => println!("{}", serde_json::to_string_pretty(&doc)?),
    }
    if let Some(csv) = &a.csv {
        append_csv(csv, a.label.as_deref().unwrap_or(&label), results.len(), &mean)?;
    }
    Ok(())
}

fn check_dataset(dir: &Path) -> Result<(serde_json::Value, Vec<String>)> {
    let mut problems = Vec::new();
    let manifest = match organforge::datagen::read_manifest(dir) {
        Ok(m) => m,
        Err(e) => return Ok((json!({ "path": dir }), vec![format!("manifest: {e}")])),
    };
    let n = manifest.n_samples;
    let mut seen = vec![0u8; n];
    for &id in manifest.train.iter().chain(&manifest.test) {
        match seen.get_mut(id) {
            Some(c) => *c += 1,
            None => problems.push(format!("split id {id} out of range 0..{n}")),
        }
    }
    if seen.iter().any(|&c| c != 1) {
        problems.push("train and test splits must partition the sample ids".into());
    }
    if (manifest.train.len(), manifest.test.len()) != split_counts(n) {
        problems.push(format!(
            "split sizes {}/{} differ from the expected {:?}",
            manifest.train.len(),
            manifest.test.len(),
            split_counts(n)
        ));
    }
    let geo = &manifest.config.projection;
    let per_sample: Vec<Vec<String>> = (0..n)
        .into_par_iter()
        .map(|id| {
            let mut p = Vec::new();
            match load_sample(dir, id) {
                Err(e) => p.push(format!("sample {id}: {e}")),
                Ok(s) => {
                    if s.meta.id != id {
                        p.push(format!("sample {id}: metadata names id {}", s.meta.id));
                    }
                    if (s.image.height, s.image.width) != (geo.detector_rows, geo.detector_cols) {
                        p.push(format!("sample {id}: image is {}x{}", s.image.width, s.image.height));
                    }
                    if s.image.data.iter().any(|v| !v.is_finite()) {
                        p.push(format!("sample {id}: non-finite pixels"));
                    }
                    for (side, m) in [("left", &s.gt_left), ("right", &s.gt_right)] {
                        let r = validate_manifold(m);
                        if !r.is_closed_manifold || r.self_intersection_count > 0 {
                            p.push(format!("sample {id}: {side} mesh is not a closed manifold ({r:?})"));
                        }
                    }
                }
            }
            p
        })
        .collect();
    problems.extend(per_sample.into_iter().flatten());
    Ok((json!({ "path": dir, "n_samples": n, "train": manifest.train.len(), "test": manifest.test.len() }), problems))
}

pub fn validate(a: ValidateArgs) -> Result<()> {
    let meshes = a.meshes.unwrap_or_default();
    if meshes.is_empty() && a.dataset.is_none() {
        return Err(usage("give at least one --mesh or a --dataset"));
    }
    let mut problems = Vec::new();
    let mut mesh_reports = Vec::new();
    for p in &meshes {
        match load_mesh(p) {
            Ok(m) => {
                let r = validate_manifold(&m);
                let ok = r.is_closed_manifold && r.self_intersection_count == 0;
                if !ok {
                    problems.push(format!("{}: not a closed manifold", p.display()));
                }
                mesh_reports.push(json!({ "path": p, "ok": ok, "report": r }));
            }
            Err(e) => {
                problems.push(format!("{}: {e}", p.display()));
                mesh_reports.push(json!({ "path": p, "ok": false, "error": e.to_string() }));
            }
        }
    }
    let dataset = match &a.dataset {
        Some(dir) => {
            let (summary, ds_problems) = check_dataset(dir)?;
            let v = json!({ "summary": summary, "problems": ds_problems });
            problems.extend(ds_problems);
            v
        }
        None => serde_json::Value::Null,
    };
    print_json(&json!({ "ok": problems.is_empty(), "meshes": mesh_reports, "dataset": dataset }));
    match problems.len() {
        0 => Ok(()),
        k => Err(data(format!("validation failed with {k} problem(s); first: {}", problems[0]))),
    }
}

pub fn templates_cmd(a: TemplatesArgs) -> Result<()> {
    let out = required(a.out, "out")?;
    let names = a
        .resolution
        .unwrap_or_else(|| ["1k", "2.5k", "5k", "10k"].map(String::from).to_vec());
    let res: Vec<(String, Resolution)> = names
        .into_iter()
        .map(|n| Ok((n.clone(), resolution(Some(&n))?)))
        .collect::<Result<_>>()?;
    let mut written = Vec::new();
    for (name, r) in res {
        let dir = out.join(&name);
        create_dir(&dir)?;
        for side in Side::BOTH {
            for v in 0..VARIANT_NAMES.len() {
                let m = organforge::datagen::lung_template(side, v, r)?;
                let p = dir.join(format!("{}.obj", template_name(side, v)));
                write_text(&p, &write_obj(&m))?;
                written.push(json!({ "path": p, "vertex_count": m.vertex_count() }));
            }
        }
    }
    print_json(&json!({ "written": written }));
    Ok(())
}
