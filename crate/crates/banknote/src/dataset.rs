//! Class-per-directory image datasets.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use banknote_core::image::resize_bilinear;
use banknote_core::split::{stratified_split, Split, SplitRatios};
use banknote_core::train::Sample;
use banknote_core::Tensor;
use rayon::prelude::*;

use crate::error::{AppError, Result};
use crate::imageio;

pub const DEFAULT_SIZE: (usize, usize) = (224, 224);

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledImage {
    /// `H×W×3`, values in `[0, 1]`.
    pub pixels: Tensor<f32>,
    pub label: usize,
    pub source_path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Relative to the dataset root.
    pub path: PathBuf,
    pub label: usize,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    /// Sorted directory names; a label is an index into this list.
    pub class_names: Vec<String>,
    pub counts: Vec<usize>,
    /// One entry per loaded image, in load order.
    pub entries: Vec<ManifestEntry>,
    /// Files that could not be decoded.
    pub skipped: Vec<PathBuf>,
}

impl DatasetManifest {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.label).collect()
    }

    pub fn split_counts(&self, split: Split) -> Vec<usize> {
        let mut out = vec![0; self.num_classes()];
        for e in self.entries.iter().filter(|e| e.split == split) {
            out[e.label] += 1;
        }
        out
    }

    /// Tab-separated `path, class, split` table for auditing.
    pub fn to_table(&self) -> String {
        let mut s = String::from("path\tclass\tsplit\n");
        for e in &self.entries {
            let path = e
                .path
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            writeln!(s, "{path}\t{}\t{}", self.class_names[e.label], e.split).unwrap();
        }
        s
    }
}

fn sorted_children(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| AppError::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| AppError::io(dir, err)))
        .collect::<Result<_>>()?;
    out.retain(|p| {
        !p.file_name()
            .is_some_and(|n| n.to_string_lossy().starts_with('.'))
    });
    out.sort();
    Ok(out)
}

/// Decodes `root/<class>/<file>`, bilinear-resizing every image to
/// `target = (height, width)`. Undecodable files are skipped with a
/// warning and listed in the manifest. All entries start in the training
/// split; see [`split_manifest`].
pub fn load_dataset(
    root: &Path,
    target: (usize, usize),
) -> Result<(DatasetManifest, Vec<LabeledImage>)> {
    if !root.is_dir() {
        return Err(AppError::Data(format!(
            "{} is not a directory",
            root.display()
        )));
    }
    let class_dirs: Vec<PathBuf> = sorted_children(root)?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect();
    if class_dirs.is_empty() {
        return Err(AppError::Data(format!(
            "{} has no class directories",
            root.display()
        )));
    }
    let class_names: Vec<String> = class_dirs
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    let mut files = Vec::new();
    for (label, dir) in class_dirs.iter().enumerate() {
        for f in sorted_children(dir)?.into_iter().filter(|p| p.is_file()) {
            files.push((f, label));
        }
    }
    let decoded: Vec<Result<Option<Tensor<f32>>>> = files
        .par_iter()
        .map(|(path, _)| match imageio::load_image(path) {
            Ok(img) => {
                let (h, w, _) = img.hwc()?;
                let img = if (h, w) == target {
                    img
                } else {
                    resize_bilinear(&img, target.0, target.1)?
                };
                Ok(Some(img))
            }
            Err(AppError::Image { path, msg }) => {
                log::warn!("skipping {}: {msg}", path.display());
                Ok(None)
            }
            Err(e) => Err(e),
        })
        .collect();
    let mut counts = vec![0; class_names.len()];
    let mut entries = Vec::new();
    let mut items = Vec::new();
    let mut skipped = Vec::new();
    for ((path, label), img) in files.into_iter().zip(decoded) {
        match img? {
            Some(pixels) => {
                counts[label] += 1;
                entries.push(ManifestEntry {
                    path: path.strip_prefix(root).unwrap_or(&path).to_path_buf(),
                    label,
                    split: Split::Train,
                });
                items.push(LabeledImage {
                    pixels,
                    label,
                    source_path: path,
                });
            }
            None => skipped.push(path),
        }
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(AppError::Data(format!(
            "class directory {:?} has no decodable images",
            class_names[c]
        )));
    }
    let manifest = DatasetManifest {
        class_names,
        counts,
        entries,
        skipped,
    };
    Ok((manifest, items))
}

/// Per-class seeded assignment of every entry to train/val/test.
pub fn split_manifest(
    mut manifest: DatasetManifest,
    ratios: SplitRatios,
    seed: u64,
) -> Result<DatasetManifest> {
    let splits = stratified_split(&manifest.labels(), manifest.num_classes(), ratios, seed)?;
    for (e, s) in manifest.entries.iter_mut().zip(splits) {
        e.split = s;
    }
    Ok(manifest)
}

/// Training samples of one split, in manifest order.
pub fn select(
    manifest: &DatasetManifest,
    items: &[LabeledImage],
    split: Split,
) -> Vec<Sample<f32>> {
    manifest
        .entries
        .iter()
        .zip(items)
        .filter(|(e, _)| e.split == split)
        .map(|(_, it)| Sample::new(it.pixels.clone(), it.label))
        .collect()
}
