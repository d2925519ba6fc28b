//! Synthetic catalog construction for simulations and tests.

use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Catalog, Item, ItemId, PairTable};

/// Shape of a generated catalog: per-group item counts, a type universe, and
/// uniform-random pairwise compatibility.
#[derive(Clone, Debug)]
pub struct SyntheticCatalogSpec {
    pub group_sizes: Vec<usize>,
    pub type_count: usize,
    /// Types drawn per item (without replacement); 0 leaves items untyped.
    pub types_per_item: usize,
    pub seed: u64,
}

impl SyntheticCatalogSpec {
    pub fn untyped(group_sizes: Vec<usize>, seed: u64) -> Self {
        Self { group_sizes, type_count: 0, types_per_item: 0, seed }
    }
}

/// Items get sequential ids `0..n`, laid out group by group; compatibility
/// scores are iid uniform on `[0, 1]`.
pub fn synthetic_catalog(spec: &SyntheticCatalogSpec) -> Result<Catalog, SynthError> {
    if spec.group_sizes.is_empty() || spec.group_sizes.iter().all(|&s| s == 0) {
        return Err(SynthError::EmptyCatalog);
    }
    if spec.types_per_item > spec.type_count {
        return Err(SynthError::TooManyTypesPerItem {
            requested: spec.types_per_item,
            universe: spec.type_count,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n: usize = spec.group_sizes.iter().sum();

    let mut items = Vec::with_capacity(n);
    let mut next_id = 0u64;
    for (group, &size) in spec.group_sizes.iter().enumerate() {
        for _ in 0..size {
            let mut types = Vec::with_capacity(spec.types_per_item);
            while types.len() < spec.types_per_item {
                let z = rng.random_range(0..spec.type_count);
                if !types.contains(&z) {
                    types.push(z);
                }
            }
            items.push(Item::new(ItemId(next_id), group, types));
            next_id += 1;
        }
    }

    let mut compat = PairTable::new(n);
    for i in 0..n {
        for j in 0..=i {
            compat.set(i, j, rng.random::<f64>());
        }
    }
    Catalog::new(items, spec.group_sizes.len(), spec.type_count, compat)
        .map_err(|_| SynthError::EmptyCatalog)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SynthError {
    EmptyCatalog,
    TooManyTypesPerItem { requested: usize, universe: usize },
}

impl fmt::Display for SynthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthError::EmptyCatalog => write!(f, "catalog would be empty"),
            SynthError::TooManyTypesPerItem { requested, universe } => {
                write!(f, "cannot draw {requested} distinct types from {universe}")
            }
        }
    }
}
