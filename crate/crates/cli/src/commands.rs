//! Subcommand implementations. Each writes its resolved config beside its
//! outputs; every file is written atomically.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use boundary_core::ablation::run_variant;
use boundary_core::data::{save_gray_png, save_rgb_png, synth_faces, write_pts, DatasetManifest, ManifestItem, Split};
use boundary_core::eval::{auc, ced, ced_svg, evaluate, failure_rate, summary_csv, threshold_grid, MetricsReport, NormalizationKind, CED_STEPS};
use boundary_core::geometry::{default_sigma, generate_heatmaps, BoundaryScheme, HeatmapStack};
use boundary_core::io::{encode_heatmaps, write_atomic, write_json_atomic};
use boundary_core::models::Checkpoint;
use boundary_core::train::{train, EpochRecord, Pipeline};
use boundary_core::{Error, Result};
use log::{error, info};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_resolved<T: Serialize>(out: &Path, cfg: &T) -> Result<()> {
    write_json_atomic(out.join("resolved_config.json"), cfg)
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn log_epoch(r: &EpochRecord) {
    let short = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.5}"));
    info!(
        "epoch {:3}  step {:6}  loss_G {}  loss_D {}  loss_R {:.6}  val_nme {:.5}",
        r.epoch,
        r.step,
        short(r.loss_g),
        short(r.loss_d),
        r.loss_r,
        r.val_nme
    );
}

/// File-name-safe form of a sample id.
pub fn file_stem(id: &str) -> String {
    let s: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    s.trim_start_matches('_').to_string()
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthArgs {
    pub scheme: String,
    pub n: usize,
    pub seed: u64,
    pub side: usize,
    pub occlusion_fraction: f64,
    pub split: Split,
}

/// Writes a procedural corpus as PNG images, `.pts` files and a manifest.
pub fn synth(args: &SynthArgs, out: &Path) -> Result<()> {
    let scheme = BoundaryScheme::resolve(&args.scheme)?;
    let cfg = boundary_core::data::SynthConfig {
        side: args.side,
        occlusion_fraction: args.occlusion_fraction,
        ..Default::default()
    };
    let samples = synth_faces(args.n, args.seed, &scheme, &cfg)?;
    mkdir(&out.join("images"))?;
    mkdir(&out.join("annotations"))?;
    let items = samples
        .par_iter()
        .map(|s| {
            let stem = file_stem(&s.source_id);
            let image = PathBuf::from("images").join(format!("{stem}.png"));
            let annotation = PathBuf::from("annotations").join(format!("{stem}.pts"));
            save_rgb_png(&s.image, out.join(&image))?;
            write_atomic(out.join(&annotation), write_pts(&s.landmarks.points).as_bytes())?;
            Ok(ManifestItem {
                image,
                annotation: Some(annotation),
                inline: None,
                id: Some(s.source_id.clone()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        scheme_id: scheme.scheme_id.clone(),
        split: args.split,
        items,
        root: out.to_path_buf(),
    };
    write_atomic(out.join("manifest.json"), manifest.to_json()?.as_bytes())?;
    write_resolved(out, args)?;
    info!("wrote {} samples to {}", args.n, out.display());
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct GenHeatmapsArgs {
    pub manifest: PathBuf,
    pub scheme: String,
    pub side: usize,
    pub sigma: f64,
    pub expand: f64,
    pub montage: bool,
}

impl GenHeatmapsArgs {
    pub fn default_sigma(side: usize) -> f64 {
        default_sigma(side / 4)
    }
}

/// `K` maps tiled on a grid `ceil(sqrt(K))` wide with a one-pixel gutter.
pub fn montage(stack: &HeatmapStack) -> (Vec<f64>, usize, usize) {
    let k = stack.maps.len();
    let cols = (k as f64).sqrt().ceil().max(1.0) as usize;
    let rows = k.div_ceil(cols);
    let s = stack.side;
    let (w, h) = (cols * (s + 1) - 1, rows * (s + 1) - 1);
    let mut out = vec![0.0; w * h];
    for (i, map) in stack.maps.iter().enumerate() {
        let (ox, oy) = ((i % cols) * (s + 1), (i / cols) * (s + 1));
        for y in 0..s {
            out[(oy + y) * w + ox..(oy + y) * w + ox + s].copy_from_slice(&map[y * s..(y + 1) * s]);
        }
    }
    (out, h, w)
}

#[derive(Debug, Clone, Serialize)]
struct ArchiveEntry {
    id: String,
    archive: PathBuf,
    maps: usize,
    side: usize,
}

/// One archive per manifest item. Failures are logged per sample; the first
/// is returned after every sample has been attempted.
pub fn gen_heatmaps(args: &GenHeatmapsArgs, out: &Path) -> Result<()> {
    if args.side < 8 || args.side % 4 != 0 {
        return Err(Error::Config(format!("side {} must be a multiple of 4 and >= 8", args.side)));
    }
    let scheme = BoundaryScheme::resolve(&args.scheme)?;
    let manifest = DatasetManifest::load(&args.manifest)?;
    if manifest.scheme_id != scheme.scheme_id {
        return Err(Error::Config(format!(
            "manifest scheme `{}` does not match `{}`",
            manifest.scheme_id, scheme.scheme_id
        )));
    }
    mkdir(out)?;
    let results: Vec<Result<ArchiveEntry>> = manifest
        .items
        .par_iter()
        .map(|item| {
            let sample = manifest.load_sample(item, &scheme, args.side, args.expand)?;
            let stack = generate_heatmaps(&sample.landmarks, &scheme, args.side, args.sigma)?;
            let stem = file_stem(&sample.source_id);
            let archive = PathBuf::from(format!("{stem}.bhm"));
            write_atomic(out.join(&archive), &encode_heatmaps(&stack))?;
            if args.montage {
                let (px, h, w) = montage(&stack);
                save_gray_png(&px, h, w, out.join(format!("{stem}.png")))?;
            }
            Ok(ArchiveEntry {
                id: sample.source_id,
                archive,
                maps: stack.maps.len(),
                side: stack.side,
            })
        })
        .collect();
    let mut entries = Vec::new();
    let mut first_err = None;
    for (item, r) in manifest.items.iter().zip(results) {
        match r {
            Ok(e) => entries.push(e),
            Err(e) => {
                error!("{}: {e}", item.source_id());
                first_err.get_or_insert(e);
            }
        }
    }
    write_json_atomic(out.join("index.json"), &entries)?;
    write_resolved(out, args)?;
    match first_err {
        Some(e) => {
            error!("{} of {} samples failed", manifest.items.len() - entries.len(), manifest.items.len());
            Err(e)
        }
        None => {
            info!("wrote {} archives to {}", entries.len(), out.display());
            Ok(())
        }
    }
}

/// Trains one pipeline; writes `checkpoint.json`, `train_report.json` and a
/// line-delimited JSON log with one record per epoch, `metrics.jsonl`.
pub fn train_cmd(cfg: &RunConfig, out: &Path) -> Result<()> {
    mkdir(out)?;
    write_resolved(out, cfg)?;
    let (tr, va) = cfg.datasets()?;
    info!("training on {} samples, validating on {}", tr.len(), va.len());
    let (pipeline, report) = train(cfg.train.clone(), &tr, &va, log_epoch)?;
    pipeline.to_checkpoint(report.steps)?.save(out.join("checkpoint.json"))?;
    write_json_atomic(out.join("train_report.json"), &report)?;
    let mut log = String::new();
    for r in &report.history {
        log.push_str(&serde_json::to_string(r)?);
        log.push('\n');
    }
    write_atomic(out.join("metrics.jsonl"), log.as_bytes())?;
    info!("best val NME {:.5} at epoch {}", report.best_val_nme, report.best_epoch);
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalArgs {
    pub checkpoint: PathBuf,
    pub manifest: Option<PathBuf>,
    pub label: String,
    pub run: RunConfig,
}

/// Evaluates a checkpoint on a manifest, or on the synthetic validation
/// split generated from the run config.
pub fn eval(args: &EvalArgs, out: &Path) -> Result<()> {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let pipeline = Pipeline::from_checkpoint(&ck)?;
    let mut run = args.run.clone();
    run.train = pipeline.config().clone();
    let data = match &args.manifest {
        Some(m) => run.manifest_dataset(m, pipeline.scheme())?,
        None => run.datasets()?.1,
    };
    mkdir(out)?;
    write_resolved(out, args)?;
    let report = evaluate(&pipeline, &data, &args.label, &run.eval.normalizations, run.eval.threshold)?;
    report.write(out)?;
    for (k, m) in &report.by_normalization {
        println!("{:12} mean_nme {:.5}  auc {:.4}  failure_rate {:.4}", k.name(), m.mean_nme, m.auc, m.failure_rate);
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub label: String,
    pub seed: u64,
    pub val_nme: f64,
    pub heatmap_error: Option<f64>,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = String::from("label,seed,val_nme,heatmap_error,best_epoch,epochs_run\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.label,
            r.seed,
            r.val_nme,
            opt(r.heatmap_error),
            r.best_epoch,
            r.epochs_run
        );
    }
    s
}

/// Trains every configured variant on the same data, one row per variant.
pub fn ablate(cfg: &RunConfig, out: &Path) -> Result<Vec<AblationRow>> {
    if cfg.variants.is_empty() {
        return Err(Error::Config("no variants to run".into()));
    }
    for label in &cfg.variants {
        boundary_core::ablation::variant_config(label, &cfg.train)?;
    }
    mkdir(out)?;
    write_resolved(out, cfg)?;
    let (tr, va) = cfg.datasets()?;
    let mut rows = Vec::with_capacity(cfg.variants.len());
    for label in &cfg.variants {
        info!("variant {label}");
        let r = run_variant(label, &cfg.train, &tr, &va, log_epoch)?;
        rows.push(AblationRow {
            label: r.label,
            seed: r.seed,
            val_nme: r.val_nme,
            heatmap_error: r.heatmap_error,
            best_epoch: r.report.best_epoch,
            epochs_run: r.report.epochs_run,
        });
        // Rewritten after each variant so a long run leaves partial results.
        write_atomic(out.join("ablation.csv"), ablation_csv(&rows).as_bytes())?;
    }
    write_json_atomic(out.join("ablation.json"), &rows)?;
    println!("{:14} {:>10} {:>10}", "variant", "val_nme", "hm_error");
    for r in &rows {
        let hm = r.heatmap_error.map(|v| format!("{v:.5}")).unwrap_or_else(|| "-".into());
        println!("{:14} {:>10.5} {:>10}", r.label, r.val_nme, hm);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct PlotArgs {
    pub reports: Vec<PathBuf>,
    pub normalization: NormalizationKind,
    pub max_t: Option<f64>,
}

/// Renders CED curves of several reports: `ced.svg`, the sampled curves in
/// `ced.csv` and per-report AUC and failure rate in `ced_summary.csv`.
pub fn plot_ced(args: &PlotArgs, out: &Path) -> Result<()> {
    if args.reports.is_empty() {
        return Err(Error::Usage("plot-ced needs at least one report".into()));
    }
    let reports = args
        .reports
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                path: p.clone(),
                source: e,
            })?;
            serde_json::from_str::<MetricsReport>(&text).map_err(|e| Error::Data(format!("{}: {e}", p.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_t = args.max_t.unwrap_or(reports[0].threshold);
    let curves = reports
        .iter()
        .map(|r| Ok((r.label.clone(), r.get(args.normalization)?.errors.clone())))
        .collect::<Result<Vec<_>>>()?;

    let grid = threshold_grid(max_t, CED_STEPS);
    let sampled = curves.iter().map(|(_, e)| ced(e, &grid)).collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("threshold");
    for (label, _) in &curves {
        let _ = write!(csv, ",{}", label.replace(',', ";"));
    }
    csv.push('\n');
    for (i, t) in grid.iter().enumerate() {
        let _ = write!(csv, "{t}");
        for s in &sampled {
            let _ = write!(csv, ",{}", s[i].1);
        }
        csv.push('\n');
    }
    let mut summary = String::from("label,normalization,samples,max_t,auc,failure_rate\n");
    for (label, errors) in &curves {
        let _ = writeln!(
            summary,
            "{},{},{},{max_t},{},{}",
            label.replace(',', ";"),
            args.normalization.name(),
            errors.len(),
            auc(errors, max_t)?,
            failure_rate(errors, max_t)?
        );
    }
    mkdir(out)?;
    write_resolved(out, args)?;
    write_atomic(out.join("ced.svg"), ced_svg(&curves, max_t)?.as_bytes())?;
    write_atomic(out.join("ced.csv"), csv.as_bytes())?;
    write_atomic(out.join("ced_summary.csv"), summary.as_bytes())?;
    write_atomic(out.join("summary.csv"), summary_csv(&reports).as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stems_are_file_safe() {
        assert_eq!(file_stem("synth-0-00001"), "synth-0-00001");
        assert_eq!(file_stem("/data/a b/img.png"), "data_a_b_img_png");
    }

    #[test]
    fn montage_layout() {
        let stack = HeatmapStack {
            side: 2,
            sigma: 1.0,
            maps: (0..5).map(|k| vec![k as f64 / 4.0; 4]).collect(),
        };
        let (px, h, w) = montage(&stack);
        // Three columns, two rows, one-pixel gutters.
        assert_eq!((h, w), (5, 8));
        assert_eq!(px[0], 0.0);
        assert_eq!(px[3], 0.25);
        assert_eq!(px[2], 0.0);
        assert_eq!(px[3 * w + 3], 1.0);
    }

    #[test]
    fn ablation_csv_rows() {
        let rows = vec![AblationRow {
            label: "BL".into(),
            seed: 1,
            val_nme: 0.5,
            heatmap_error: None,
            best_epoch: 2,
            epochs_run: 3,
        }];
        assert_eq!(ablation_csv(&rows), "label,seed,val_nme,heatmap_error,best_epoch,epochs_run\nBL,1,0.5,,2,3\n");
    }
}
