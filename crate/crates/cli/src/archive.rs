//! Versioned JSON archives for catalogs and trained models. Round-trips are
//! lossless: floats serialize in shortest-exact form.

use std::fs;
use std::path::Path;

use fairbundle_core::model::{Catalog, Item, ItemId, PairTable, UserId};
use fairbundle_core::relevance::{MfHyperParams, MfModel, NormalizationBounds};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CATALOG_FORMAT_VERSION: u32 = 1;
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{path}: format version {found}, expected {expected}")]
    Version { path: String, found: u32, expected: u32 },
    #[error("{path}: archive is inconsistent: {message}")]
    Inconsistent { path: String, message: String },
}

#[derive(Serialize, Deserialize)]
struct ArchivedItem {
    id: u64,
    group: usize,
    types: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct CatalogArchive {
    format_version: u32,
    group_count: usize,
    type_count: usize,
    type_names: Vec<String>,
    items: Vec<ArchivedItem>,
    /// Packed lower triangle of the symmetric compatibility table.
    compat_cells: Vec<f64>,
}

pub fn save_catalog(
    path: impl AsRef<Path>,
    catalog: &Catalog,
    type_names: &[String],
) -> Result<(), ArchiveError> {
    let archive = CatalogArchive {
        format_version: CATALOG_FORMAT_VERSION,
        group_count: catalog.group_count(),
        type_count: catalog.type_count(),
        type_names: type_names.to_vec(),
        items: catalog
            .items()
            .iter()
            .map(|item| ArchivedItem { id: item.id.0, group: item.group, types: item.types.clone() })
            .collect(),
        compat_cells: catalog.compat_table().cells().to_vec(),
    };
    write_json(path, &archive)
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<(Catalog, Vec<String>), ArchiveError> {
    let path = path.as_ref();
    let archive: CatalogArchive = read_json(path)?;
    if archive.format_version != CATALOG_FORMAT_VERSION {
        return Err(ArchiveError::Version {
            path: path.display().to_string(),
            found: archive.format_version,
            expected: CATALOG_FORMAT_VERSION,
        });
    }
    let items: Vec<Item> = archive
        .items
        .into_iter()
        .map(|a| Item::new(ItemId(a.id), a.group, a.types))
        .collect();
    let table = PairTable::from_cells(items.len(), archive.compat_cells)
        .map_err(|e| inconsistent(path, e))?;
    let catalog = Catalog::new(items, archive.group_count, archive.type_count, table)
        .map_err(|e| inconsistent(path, e))?;
    Ok((catalog, archive.type_names))
}

#[derive(Serialize, Deserialize)]
struct ModelArchive {
    format_version: u32,
    factors: usize,
    epochs: usize,
    learning_rate: f64,
    regularization: f64,
    init_scale: f64,
    seed: u64,
    users: Vec<u64>,
    items: Vec<u64>,
    user_factors: Vec<f64>,
    item_factors: Vec<f64>,
    user_bias: Vec<f64>,
    item_bias: Vec<f64>,
    global_mean: f64,
    epoch_rmse: Vec<f64>,
    bounds_min: f64,
    bounds_max: f64,
}

pub fn save_model(
    path: impl AsRef<Path>,
    model: &MfModel,
    bounds: &NormalizationBounds,
) -> Result<(), ArchiveError> {
    let h = model.hyper();
    let archive = ModelArchive {
        format_version: MODEL_FORMAT_VERSION,
        factors: h.factors,
        epochs: h.epochs,
        learning_rate: h.learning_rate,
        regularization: h.regularization,
        init_scale: h.init_scale,
        seed: h.seed,
        users: model.users().iter().map(|u| u.0).collect(),
        items: model.items().iter().map(|i| i.0).collect(),
        user_factors: model.user_factors_flat().to_vec(),
        item_factors: model.item_factors_flat().to_vec(),
        user_bias: model.user_bias().to_vec(),
        item_bias: model.item_bias().to_vec(),
        global_mean: model.global_mean(),
        epoch_rmse: model.epoch_rmse().to_vec(),
        bounds_min: bounds.min,
        bounds_max: bounds.max,
    };
    write_json(path, &archive)
}

pub fn load_model(
    path: impl AsRef<Path>,
) -> Result<(MfModel, NormalizationBounds), ArchiveError> {
    let path = path.as_ref();
    let archive: ModelArchive = read_json(path)?;
    if archive.format_version != MODEL_FORMAT_VERSION {
        return Err(ArchiveError::Version {
            path: path.display().to_string(),
            found: archive.format_version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let hyper = MfHyperParams {
        factors: archive.factors,
        epochs: archive.epochs,
        learning_rate: archive.learning_rate,
        regularization: archive.regularization,
        init_scale: archive.init_scale,
        seed: archive.seed,
    };
    let model = MfModel::from_parts(
        hyper,
        archive.users.into_iter().map(UserId).collect(),
        archive.items.into_iter().map(ItemId).collect(),
        archive.user_factors,
        archive.item_factors,
        archive.user_bias,
        archive.item_bias,
        archive.global_mean,
        archive.epoch_rmse,
    )
    .map_err(|e| inconsistent(path, e))?;
    Ok((model, NormalizationBounds { min: archive.bounds_min, max: archive.bounds_max }))
}

fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<(), ArchiveError> {
    let path = path.as_ref();
    let body = serde_json::to_string(value)
        .map_err(|source| ArchiveError::Json { path: path.display().to_string(), source })?;
    fs::write(path, body)
        .map_err(|source| ArchiveError::Io { path: path.display().to_string(), source })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ArchiveError> {
    let body = fs::read_to_string(path)
        .map_err(|source| ArchiveError::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&body)
        .map_err(|source| ArchiveError::Json { path: path.display().to_string(), source })
}

fn inconsistent(path: &Path, err: impl std::fmt::Display) -> ArchiveError {
    ArchiveError::Inconsistent { path: path.display().to_string(), message: err.to_string() }
}
