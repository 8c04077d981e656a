//! Dataset manifests and the loaders that turn them into samples.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{crop_sample, load_image, parse_aflw_csv, parse_pts, parse_wflw_file, Sample};
use crate::geometry::{BBox, BoundaryScheme, LandmarkSet};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InlineAnnotation {
    pub points: Vec<[f64; 2]>,
    /// Defaults to the tight box around `points`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub image: PathBuf,
    /// A `.pts` file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inline: Option<InlineAnnotation>,
    /// Defaults to the image path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

impl ManifestItem {
    pub fn source_id(&self) -> String {
        self.id.clone().unwrap_or_else(|| self.image.display().to_string())
    }
}

/// `{scheme_id, split, items: [{image, annotation | inline}]}`. Relative
/// paths are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub scheme_id: String,
    pub split: Split,
    pub items: Vec<ManifestItem>,
    #[serde(skip)]
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn from_json(text: &str, root: impl Into<PathBuf>) -> Result<Self> {
        let mut m: Self = serde_json::from_str(text)?;
        m.root = root.into();
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, root)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    /// Structural checks: one annotation source per item, unique ids.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for item in &self.items {
            let id = item.source_id();
            if item.annotation.is_some() == item.inline.is_some() {
                return Err(Error::Data(format!("item `{id}` needs exactly one of `annotation` or `inline`")));
            }
            if !seen.insert(id.clone()) {
                return Err(Error::Data(format!("duplicate source id `{id}`")));
            }
        }
        Ok(())
    }

    /// Every referenced file must exist.
    pub fn check_files(&self) -> Result<()> {
        for item in &self.items {
            for p in std::iter::once(&item.image).chain(&item.annotation) {
                let full = self.resolve(p);
                if !full.is_file() {
                    return Err(Error::io(full, std::io::Error::new(std::io::ErrorKind::NotFound, "missing file")));
                }
            }
        }
        Ok(())
    }

    /// Annotation of one item in source-image pixels.
    pub fn landmarks(&self, item: &ManifestItem) -> Result<LandmarkSet> {
        let (points, bbox) = match (&item.annotation, &item.inline) {
            (Some(path), None) => {
                let full = self.resolve(path);
                let text = std::fs::read_to_string(&full).map_err(|e| Error::io(&full, e))?;
                let points = parse_pts(&text).map_err(|e| match e {
                    Error::Parse { line, message } => Error::parse(line, format!("{}: {message}", full.display())),
                    other => other,
                })?;
                (points, None)
            }
            (None, Some(inline)) => (inline.points.clone(), inline.bbox),
            _ => return Err(Error::Data(format!("item `{}` has no single annotation", item.source_id()))),
        };
        let bbox = bbox.unwrap_or_else(|| BBox::enclosing(&points));
        Ok(LandmarkSet::new(self.scheme_id.clone(), points, bbox))
    }

    /// Loads and crops every item in parallel; output order is manifest order.
    pub fn load_samples(&self, scheme: &BoundaryScheme, out_side: usize, expand: f64) -> Result<Vec<Sample>> {
        if scheme.scheme_id != self.scheme_id {
            return Err(Error::config(format!(
                "manifest scheme `{}` does not match `{}`",
                self.scheme_id, scheme.scheme_id
            )));
        }
        self.check_files()?;
        self.items
            .par_iter()
            .map(|item| self.load_sample(item, scheme, out_side, expand))
            .collect()
    }

    /// Loads and crops one item.
    pub fn load_sample(&self, item: &ManifestItem, scheme: &BoundaryScheme, out_side: usize, expand: f64) -> Result<Sample> {
        let lm = self.landmarks(item)?;
        lm.validate_for(scheme)?;
        let image = load_image(self.resolve(&item.image))?;
        crop_sample(&image, &lm, lm.bbox, out_side, expand, item.source_id()).map(|(s, _)| s)
    }

    /// Pairs every image in `dir` with a `.pts` file of the same stem; used
    /// for COFW after conversion from its binary container.
    pub fn from_pts_dir(dir: impl AsRef<Path>, scheme_id: &str, split: Split) -> Result<Self> {
        let dir = dir.as_ref();
        let mut items = Vec::new();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                matches!(
                    p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                    Some("png" | "jpg" | "jpeg" | "bmp")
                )
            })
            .collect();
        paths.sort();
        for image in paths {
            let pts = image.with_extension("pts");
            if !pts.is_file() {
                return Err(Error::Data(format!("{} has no matching .pts file", image.display())));
            }
            items.push(ManifestItem {
                image: image.file_name().unwrap().into(),
                annotation: Some(pts.file_name().unwrap().into()),
                inline: None,
                id: None,
            });
        }
        let m = Self {
            scheme_id: scheme_id.into(),
            split,
            items,
            root: dir.to_path_buf(),
        };
        m.validate()?;
        Ok(m)
    }

    /// Converts a WFLW annotation list; image paths are relative to `image_root`.
    pub fn from_wflw_list(text: &str, image_root: impl Into<PathBuf>, split: Split) -> Result<Self> {
        let items = parse_wflw_file(text)?
            .into_iter()
            .enumerate()
            .map(|(i, r)| ManifestItem {
                id: Some(format!("{}#{i}", r.filename)),
                image: r.filename.clone().into(),
                annotation: None,
                inline: Some(InlineAnnotation {
                    bbox: Some(r.bbox()),
                    points: r.points,
                }),
            })
            .collect();
        let m = Self {
            scheme_id: "wflw_98".into(),
            split,
            items,
            root: image_root.into(),
        };
        m.validate()?;
        Ok(m)
    }

    /// Converts an AFLW-style CSV.
    pub fn from_aflw_csv(text: &str, image_root: impl Into<PathBuf>, scheme_id: &str, split: Split) -> Result<Self> {
        let items = parse_aflw_csv(text)?
            .into_iter()
            .map(|r| ManifestItem {
                image: r.path.into(),
                annotation: None,
                inline: Some(InlineAnnotation {
                    points: r.points,
                    bbox: Some(r.bbox),
                }),
                id: None,
            })
            .collect();
        let m = Self {
            scheme_id: scheme_id.into(),
            split,
            items,
            root: image_root.into(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_ids_are_rejected() {
        let text = r#"{"scheme_id":"300w_68","split":"train","items":[
            {"image":"a.png","inline":{"points":[[0,0]]}},
            {"image":"a.png","inline":{"points":[[0,0]]}}]}"#;
        assert!(matches!(DatasetManifest::from_json(text, "."), Err(Error::Data(_))));
    }

    #[test]
    fn item_needs_exactly_one_annotation() {
        let text = r#"{"scheme_id":"x","split":"val","items":[{"image":"a.png"}]}"#;
        assert!(DatasetManifest::from_json(text, ".").is_err());
    }

    #[test]
    fn missing_image_is_reported_by_path() {
        let text = r#"{"scheme_id":"x","split":"test","items":[{"image":"nope.png","inline":{"points":[[0,0]]}}]}"#;
        let m = DatasetManifest::from_json(text, "/tmp/does-not-exist").unwrap();
        let err = m.check_files().unwrap_err().to_string();
        assert!(err.contains("nope.png"), "{err}");
    }
}
