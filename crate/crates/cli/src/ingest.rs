//! Dataset ingestion: rating files, item metadata, the three pairwise
//! compatibility constructions, and producer-group assignment.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use fairbundle_core::model::{Catalog, Item, ItemId, PairTable, UserId};
use fairbundle_core::relevance::RatingsTable;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {malformed} of {lines} lines malformed (over the 1% limit)")]
    Unparseable { path: String, malformed: usize, lines: usize },
    #[error("metadata line {line}: {message}")]
    BadMetadata { line: usize, message: String },
    #[error("item {id}: missing field {field}")]
    MissingField { id: u64, field: &'static str },
    #[error("latitude {lat} or longitude {lon} out of range")]
    CoordinateOutOfRange { lat: f64, lon: f64 },
    #[error("item {id}: unknown tag {tag:?}")]
    UnknownTag { id: u64, tag: String },
    #[error("popularity thresholds must be ascending and non-empty")]
    BadThresholds,
    #[error("catalog construction failed: {0}")]
    Catalog(String),
}

/// Ratings file shape: delimiter-separated `user,item,rating[,timestamp]`.
#[derive(Clone, Debug)]
pub struct RatingsFormat {
    pub delimiter: char,
}

impl Default for RatingsFormat {
    fn default() -> Self {
        Self { delimiter: ',' }
    }
}

/// What ingestion saw, beyond the parsed table itself.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub parsed: usize,
    pub malformed: usize,
    pub duplicate_overwrites: u64,
    pub header_skipped: bool,
}

/// Parses a delimiter-separated ratings file. A leading header row is
/// skipped when its first field is non-numeric. Malformed lines are counted
/// and tolerated up to 1% of the data lines; beyond that the file is
/// rejected.
pub fn load_ratings(
    path: impl AsRef<Path>,
    format: &RatingsFormat,
) -> Result<(RatingsTable, LoadReport), IngestError> {
    let path = path.as_ref();
    let file = File::open(path)
        .map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
    let reader = BufReader::new(file);

    let mut triples = Vec::new();
    let mut report = LoadReport::default();
    let mut data_lines = 0usize;
    let mut first_content_line = true;

    for line in reader.lines() {
        let line = line
            .map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(format.delimiter).collect();
        let parsed = parse_rating_fields(&fields);
        if first_content_line {
            first_content_line = false;
            if parsed.is_none() && fields.first().map_or(false, |f| f.trim().parse::<u64>().is_err())
            {
                report.header_skipped = true;
                continue;
            }
        }
        data_lines += 1;
        match parsed {
            Some(triple) => triples.push(triple),
            None => report.malformed += 1,
        }
    }

    if report.malformed * 100 > data_lines {
        return Err(IngestError::Unparseable {
            path: path.display().to_string(),
            malformed: report.malformed,
            lines: data_lines,
        });
    }
    let table = RatingsTable::from_triples(triples);
    report.parsed = table.len();
    report.duplicate_overwrites = table.duplicate_overwrites();
    Ok((table, report))
}

fn parse_rating_fields(fields: &[&str]) -> Option<(UserId, ItemId, f64)> {
    if fields.len() < 3 {
        return None;
    }
    let user = fields[0].trim().parse::<u64>().ok()?;
    let item = fields[1].trim().parse::<u64>().ok()?;
    let rating = fields[2].trim().parse::<f64>().ok()?;
    if !rating.is_finite() {
        return None;
    }
    Some((UserId(user), ItemId(item), rating))
}

/// One item's metadata record. Files are line-delimited JSON with
/// self-describing keys; unknown keys are ignored.
#[derive(Clone, Debug, Default, Deserialize)]
pub struct ItemMetadata {
    pub id: u64,
    #[serde(default)]
    pub year: Option<i32>,
    #[serde(default)]
    pub genres: Option<BTreeSet<String>>,
    /// `(latitude, longitude)` in degrees.
    #[serde(default)]
    pub location: Option<(f64, f64)>,
    #[serde(default)]
    pub popularity: Option<u64>,
    #[serde(default)]
    pub also_buy: Option<Vec<u64>>,
    #[serde(default)]
    pub also_view: Option<Vec<u64>>,
    #[serde(default)]
    pub country: Option<String>,
    #[serde(default)]
    pub types: Option<Vec<String>>,
}

pub fn load_metadata(path: impl AsRef<Path>) -> Result<Vec<ItemMetadata>, IngestError> {
    let path = path.as_ref();
    let file = File::open(path)
        .map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
    let reader = BufReader::new(file);
    let mut items = Vec::new();
    for (number, line) in reader.lines().enumerate() {
        let line = line
            .map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let item: ItemMetadata = serde_json::from_str(&line)
            .map_err(|e| IngestError::BadMetadata { line: number + 1, message: e.to_string() })?;
        if let Some((lat, lon)) = item.location {
            validate_coords(lat, lon)?;
        }
        items.push(item);
    }
    Ok(items)
}

fn validate_coords(lat: f64, lon: f64) -> Result<(), IngestError> {
    if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
        return Err(IngestError::CoordinateOutOfRange { lat, lon });
    }
    Ok(())
}

/// Same-period, similar-genre score:
/// `0.5 * exp(-|year_a - year_b| / 10) + 0.5 * Jaccard(genres_a, genres_b)`.
pub fn movie_compatibility(a: &ItemMetadata, b: &ItemMetadata) -> Result<f64, IngestError> {
    let (year_a, genres_a) = movie_fields(a)?;
    let (year_b, genres_b) = movie_fields(b)?;
    let period = (-f64::from((year_a - year_b).abs()) / 10.0).exp();
    let inter = genres_a.intersection(genres_b).count() as f64;
    let union = genres_a.union(genres_b).count() as f64;
    Ok(0.5 * period + 0.5 * inter / union)
}

fn movie_fields(item: &ItemMetadata) -> Result<(i32, &BTreeSet<String>), IngestError> {
    let year = item.year.ok_or(IngestError::MissingField { id: item.id, field: "year" })?;
    let genres = item
        .genres
        .as_ref()
        .filter(|g| !g.is_empty())
        .ok_or(IngestError::MissingField { id: item.id, field: "genres" })?;
    Ok((year, genres))
}

/// Great-circle distance in kilometers (Earth radius 6371 km).
pub fn haversine_km(p: (f64, f64), q: (f64, f64)) -> Result<f64, IngestError> {
    validate_coords(p.0, p.1)?;
    validate_coords(q.0, q.1)?;
    const EARTH_RADIUS_KM: f64 = 6371.0;
    let (lat1, lon1) = (p.0.to_radians(), p.1.to_radians());
    let (lat2, lon2) = (q.0.to_radians(), q.1.to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    Ok(2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin())
}

/// Proximity score `exp(-d_km / 3)`: 1 at the same spot, ~0.37 at 3 km.
pub fn venue_compatibility(a: &ItemMetadata, b: &ItemMetadata) -> Result<f64, IngestError> {
    let pa = a.location.ok_or(IngestError::MissingField { id: a.id, field: "location" })?;
    let pb = b.location.ok_or(IngestError::MissingField { id: b.id, field: "location" })?;
    let d = haversine_km(pa, pb)?;
    Ok((-d / 3.0).exp())
}

/// Co-interaction scores for a whole item set: directed raw score 1.0 for an
/// also-buy edge, 0.5 for also-view, then symmetrized by the mean of the two
/// directions and normalized by the largest symmetric value. Returns the
/// table (indexed by position in `items`) and the number of co-interaction
/// references that pointed outside the item set.
pub fn copurchase_table(items: &[ItemMetadata]) -> (PairTable, u64) {
    let index: BTreeMap<u64, usize> = items.iter().enumerate().map(|(i, m)| (m.id, i)).collect();
    let n = items.len();
    let mut directed = vec![0.0f64; n * n];
    let mut dropped = 0u64;

    for (i, item) in items.iter().enumerate() {
        for (list, weight) in [(&item.also_buy, 1.0), (&item.also_view, 0.5)] {
            let Some(ids) = list else { continue };
            for id in ids {
                match index.get(id) {
                    // Buy edges dominate view edges for the same pair.
                    Some(&j) if j != i => {
                        directed[i * n + j] = f64::max(directed[i * n + j], weight)
                    }
                    Some(_) => {}
                    None => dropped += 1,
                }
            }
        }
    }

    let mut table = PairTable::new(n);
    let mut max = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            let sym = (directed[i * n + j] + directed[j * n + i]) / 2.0;
            table.set(i, j, sym);
            max = max.max(sym);
        }
    }
    if max > 0.0 {
        let cells: Vec<f64> = table.cells().iter().map(|&v| v / max).collect();
        table = PairTable::from_cells(n, cells).expect("same shape");
    }
    (table, dropped)
}

/// Popularity-tier assignment against ascending cutoffs: group 0 holds items
/// strictly above the highest cutoff, the last group those at or below the
/// lowest. A count exactly at a cutoff falls to the less popular side.
pub fn assign_groups_by_popularity(
    items: &[ItemMetadata],
    thresholds: &[u64],
) -> Result<Vec<usize>, IngestError> {
    if thresholds.is_empty() || thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(IngestError::BadThresholds);
    }
    items
        .iter()
        .map(|item| {
            let pop = item
                .popularity
                .ok_or(IngestError::MissingField { id: item.id, field: "popularity" })?;
            let exceeded = thresholds.iter().filter(|&&t| pop > t).count();
            Ok(thresholds.len() - exceeded)
        })
        .collect()
}

/// Tag-order assignment: an item's group is its country tag's position.
pub fn assign_groups_by_tag(
    items: &[ItemMetadata],
    tag_order: &[String],
) -> Result<Vec<usize>, IngestError> {
    items
        .iter()
        .map(|item| {
            let tag = item
                .country
                .as_ref()
                .ok_or(IngestError::MissingField { id: item.id, field: "country" })?;
            tag_order
                .iter()
                .position(|t| t == tag)
                .ok_or_else(|| IngestError::UnknownTag { id: item.id, tag: tag.clone() })
        })
        .collect()
}

/// Which pairwise construction to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompatRule {
    /// Year proximity + genre overlap.
    Movie,
    /// Geographic proximity.
    Venue,
    /// Co-purchase / co-view edges.
    Copurchase,
}

/// How producer groups are assigned.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupRule {
    PopularityThresholds(Vec<u64>),
    TagOrder(Vec<String>),
}

/// Pre-filters applied before catalog construction; all default to off.
#[derive(Clone, Debug, Default)]
pub struct FilterSpec {
    pub min_popularity: Option<u64>,
    pub countries: Option<Vec<String>>,
}

impl FilterSpec {
    fn keeps(&self, item: &ItemMetadata) -> bool {
        if let Some(min) = self.min_popularity {
            if item.popularity.map_or(true, |p| p < min) {
                return false;
            }
        }
        if let Some(countries) = &self.countries {
            if item.country.as_ref().map_or(true, |c| !countries.contains(c)) {
                return false;
            }
        }
        true
    }
}

/// Items dropped on the way to a catalog, by reason.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub filtered_out: usize,
    pub missing_compat_fields: usize,
    pub missing_group_fields: usize,
    pub dropped_cointeraction_refs: u64,
    pub kept: usize,
}

/// Builds a catalog: filter, drop records lacking the fields the chosen
/// constructions need, assign groups, index type tags, and fill the pairwise
/// table.
pub fn build_catalog(
    metadata: &[ItemMetadata],
    compat_rule: CompatRule,
    group_rule: &GroupRule,
    filter: &FilterSpec,
) -> Result<(Catalog, Vec<String>, BuildReport), IngestError> {
    let mut report = BuildReport::default();

    let filtered: Vec<&ItemMetadata> = metadata
        .iter()
        .filter(|m| {
            let keep = filter.keeps(m);
            if !keep {
                report.filtered_out += 1;
            }
            keep
        })
        .collect();

    let with_compat: Vec<&ItemMetadata> = filtered
        .into_iter()
        .filter(|m| {
            let ok = match compat_rule {
                CompatRule::Movie => {
                    m.year.is_some() && m.genres.as_ref().map_or(false, |g| !g.is_empty())
                }
                CompatRule::Venue => m.location.is_some(),
                CompatRule::Copurchase => true,
            };
            if !ok {
                report.missing_compat_fields += 1;
            }
            ok
        })
        .collect();

    let kept: Vec<&ItemMetadata> = with_compat
        .into_iter()
        .filter(|m| {
            let ok = match group_rule {
                GroupRule::PopularityThresholds(_) => m.popularity.is_some(),
                GroupRule::TagOrder(tags) => {
                    m.country.as_ref().map_or(false, |c| tags.contains(c))
                }
            };
            if !ok {
                report.missing_group_fields += 1;
            }
            ok
        })
        .collect();
    report.kept = kept.len();

    let owned: Vec<ItemMetadata> = kept.into_iter().cloned().collect();
    let (groups, group_count) = match group_rule {
        GroupRule::PopularityThresholds(thresholds) => {
            (assign_groups_by_popularity(&owned, thresholds)?, thresholds.len() + 1)
        }
        GroupRule::TagOrder(tags) => (assign_groups_by_tag(&owned, tags)?, tags.len()),
    };

    // Type universe: sorted distinct tags across the kept items.
    let type_names: Vec<String> = owned
        .iter()
        .flat_map(|m| m.types.iter().flatten().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let type_index: BTreeMap<&str, usize> =
        type_names.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();

    let compat = match compat_rule {
        CompatRule::Movie => pairwise(&owned, movie_compatibility)?,
        CompatRule::Venue => pairwise(&owned, venue_compatibility)?,
        CompatRule::Copurchase => {
            let (table, dropped) = copurchase_table(&owned);
            report.dropped_cointeraction_refs = dropped;
            table
        }
    };

    let items: Vec<Item> = owned
        .iter()
        .zip(&groups)
        .map(|(m, &g)| {
            let types = m
                .types
                .iter()
                .flatten()
                .filter_map(|t| type_index.get(t.as_str()).copied())
                .collect();
            Item::new(ItemId(m.id), g, types)
        })
        .collect();

    let catalog = Catalog::new(items, group_count, type_names.len(), compat)
        .map_err(|e| IngestError::Catalog(e.to_string()))?;
    Ok((catalog, type_names, report))
}

fn pairwise(
    items: &[ItemMetadata],
    score: impl Fn(&ItemMetadata, &ItemMetadata) -> Result<f64, IngestError>,
) -> Result<PairTable, IngestError> {
    let n = items.len();
    let mut table = PairTable::new(n);
    for i in 0..n {
        for j in 0..=i {
            table.set(i, j, score(&items[i], &items[j])?);
        }
    }
    Ok(table)
}
