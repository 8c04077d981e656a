//! Metric bundles and their JSON, CSV and SVG renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{auc, ced, failure_rate, nme, threshold_grid, NormalizationKind};
use crate::io::{write_atomic, write_json_atomic};
use crate::train::{Dataset, Pipeline};
use crate::{Error, Result};

/// Threshold steps used for CED curves.
pub const CED_STEPS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedMetrics {
    pub mean_nme: f64,
    pub auc: f64,
    pub failure_rate: f64,
    pub errors: Vec<f64>,
}

impl NormalizedMetrics {
    pub fn from_errors(errors: Vec<f64>, threshold: f64) -> Result<Self> {
        Ok(Self {
            mean_nme: errors.iter().sum::<f64>() / errors.len().max(1) as f64,
            auc: auc(&errors, threshold)?,
            failure_rate: failure_rate(&errors, threshold)?,
            errors,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub label: String,
    pub scheme_id: String,
    pub samples: usize,
    pub threshold: f64,
    pub by_normalization: BTreeMap<NormalizationKind, NormalizedMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heatmap_error: Option<f64>,
}

impl MetricsReport {
    pub fn new(label: impl Into<String>, scheme_id: impl Into<String>, threshold: f64) -> Self {
        Self {
            label: label.into(),
            scheme_id: scheme_id.into(),
            samples: 0,
            threshold,
            by_normalization: BTreeMap::new(),
            heatmap_error: None,
        }
    }

    pub fn insert(&mut self, kind: NormalizationKind, errors: Vec<f64>) -> Result<()> {
        self.samples = errors.len();
        let m = NormalizedMetrics::from_errors(errors, self.threshold)?;
        self.by_normalization.insert(kind, m);
        Ok(())
    }

    pub fn get(&self, kind: NormalizationKind) -> Result<&NormalizedMetrics> {
        self.by_normalization
            .get(&kind)
            .ok_or_else(|| Error::Usage(format!("report has no {} metrics", kind.name())))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `threshold,fraction` rows for one normalisation.
    pub fn ced_csv(&self, kind: NormalizationKind) -> Result<String> {
        let m = self.get(kind)?;
        let mut out = String::from("threshold,fraction\n");
        for (t, f) in ced(&m.errors, &threshold_grid(self.threshold, CED_STEPS))? {
            writeln!(out, "{t},{f}").expect("string write");
        }
        Ok(out)
    }

    /// Writes `metrics.json`, `summary.csv` and one `ced_<norm>.csv` per normalisation.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json_atomic(&dir.join("metrics.json"), self)?;
        write_atomic(&dir.join("summary.csv"), summary_csv(std::slice::from_ref(self)).as_bytes())?;
        for kind in self.by_normalization.keys() {
            write_atomic(&dir.join(format!("ced_{}.csv", kind.name())), self.ced_csv(*kind)?.as_bytes())?;
        }
        Ok(())
    }
}

/// Predicts `data` once and reports every requested normalisation, plus the
/// estimator's heatmap error when the pipeline has one.
pub fn evaluate(
    pipeline: &Pipeline,
    data: &Dataset,
    label: &str,
    kinds: &[NormalizationKind],
    threshold: f64,
) -> Result<MetricsReport> {
    let preds = pipeline.predict(data)?;
    let mut report = MetricsReport::new(label, data.scheme.scheme_id.clone(), threshold);
    for &kind in kinds {
        let errors = preds
            .iter()
            .zip(&data.samples)
            .map(|(p, s)| nme(p, &s.landmarks, &data.scheme, kind))
            .collect::<Result<Vec<_>>>()?;
        report.insert(kind, errors)?;
    }
    report.heatmap_error = pipeline.heatmap_error(data)?;
    Ok(report)
}

/// One row per report and normalisation.
pub fn summary_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from("label,scheme,normalization,samples,mean_nme,auc,failure_rate,threshold\n");
    for r in reports {
        for (k, m) in &r.by_normalization {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.label,
                r.scheme_id,
                k.name(),
                m.errors.len(),
                m.mean_nme,
                m.auc,
                m.failure_rate,
                r.threshold
            )
            .expect("string write");
        }
    }
    out
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// CED curves as a standalone SVG step plot. Each curve is `(label, errors)`.
pub fn ced_svg(curves: &[(String, Vec<f64>)], max_t: f64) -> Result<String> {
    if curves.is_empty() {
        return Err(Error::Usage("no curves to plot".into()));
    }
    let (w, h, m) = (640.0, 420.0, 50.0);
    let (pw, ph) = (w - 2.0 * m, h - 2.0 * m);
    let px = |t: f64| m + pw * t / max_t;
    let py = |f: f64| h - m - ph * f;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<rect x="{m}" y="{m}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let t = max_t * f;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{t:.3}</text>"#, px(t), h - m + 18.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{f:.1}</text>"#, m - 6.0, py(f) + 4.0);
        let _ = writeln!(s, r##"<line x1="{m}" x2="{}" y1="{y}" y2="{y}" stroke="#ddd"/>"##, w - m, y = py(f));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">NME</text>"#, w / 2.0, h - 10.0);
    let _ = writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">fraction of images</text>"#, h / 2.0, h / 2.0);
    for (i, (label, errors)) in curves.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let pts = ced(errors, &threshold_grid(max_t, CED_STEPS))?;
        let mut d = String::new();
        let mut prev = 0.0;
        for (j, (t, f)) in pts.iter().enumerate() {
            if j == 0 {
                let _ = write!(d, "M{:.2},{:.2}", px(*t), py(*f));
            } else {
                let _ = write!(d, " L{:.2},{:.2} L{:.2},{:.2}", px(*t), py(prev), px(*t), py(*f));
            }
            prev = *f;
        }
        let _ = writeln!(s, r#"<path d="{d}" fill="none" stroke="{colour}" stroke-width="2"/>"#);
        let ly = m + 16.0 + 16.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{}" x2="{}" y1="{ly}" y2="{ly}" stroke="{colour}" stroke-width="2"/>"#, m + 10.0, m + 30.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, m + 36.0, ly + 4.0, escape(label));
    }
    s.push_str("</svg>\n");
    Ok(s)
}
