//! Catalog, bundle, and relevance types plus quality and validity scoring.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Item handle. Stable across catalog rebuilds; never reused within one catalog.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct ItemId(pub u64);

/// User handle.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct UserId(pub u64);

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A catalog item: one producer group, any number of complementarity types.
#[derive(Clone, Debug)]
pub struct Item {
    pub id: ItemId,
    /// Producer group index in `0..group_count`. Groups partition the catalog.
    pub group: usize,
    /// Type indices in `0..type_count`, sorted and de-duplicated on ingestion.
    pub types: Vec<usize>,
}

impl Item {
    pub fn new(id: ItemId, group: usize, types: Vec<usize>) -> Self {
        Self { id, group, types }
    }
}

/// Symmetric pairwise score table, packed lower triangle (diagonal included).
///
/// Symmetry holds by construction: `set(i, j, v)` and `set(j, i, v)` write the
/// same cell. Values are validated to lie in `[0, 1]` when the table is placed
/// into a [`Catalog`].
#[derive(Clone, Debug, PartialEq)]
pub struct PairTable {
    n: usize,
    cells: Vec<f64>,
}

impl PairTable {
    pub fn new(n: usize) -> Self {
        Self { n, cells: vec![0.0; n * (n + 1) / 2] }
    }

    /// Rebuild from packed cells, e.g. when loading an archived catalog.
    pub fn from_cells(n: usize, cells: Vec<f64>) -> Result<Self, ModelError> {
        if cells.len() != n * (n + 1) / 2 {
            return Err(ModelError::BadTableShape { n, cells: cells.len() });
        }
        Ok(Self { n, cells })
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        hi * (hi + 1) / 2 + lo
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let s = self.slot(i, j);
        self.cells[s] = value;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cells[self.slot(i, j)]
    }

    /// Number of indexed items (not the cell count).
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }
}

/// Immutable item catalog: group partition, type memberships, and the
/// pairwise compatibility table. Safe to share across solver invocations.
#[derive(Clone, Debug)]
pub struct Catalog {
    items: Vec<Item>,
    group_count: usize,
    type_count: usize,
    compat: PairTable,
    index: BTreeMap<ItemId, usize>,
}

impl Catalog {
    /// Validates group/type indices, id uniqueness, table shape, and that all
    /// compatibility scores are finite and in `[0, 1]`.
    pub fn new(
        mut items: Vec<Item>,
        group_count: usize,
        type_count: usize,
        compat: PairTable,
    ) -> Result<Self, ModelError> {
        if compat.len() != items.len() {
            return Err(ModelError::BadTableShape { n: items.len(), cells: compat.cells().len() });
        }
        let mut index = BTreeMap::new();
        for (pos, item) in items.iter_mut().enumerate() {
            if item.group >= group_count {
                return Err(ModelError::GroupOutOfRange { id: item.id, group: item.group, group_count });
            }
            item.types.sort_unstable();
            item.types.dedup();
            if let Some(&z) = item.types.iter().find(|&&z| z >= type_count) {
                return Err(ModelError::TypeOutOfRange { id: item.id, type_index: z, type_count });
            }
            if index.insert(item.id, pos).is_some() {
                return Err(ModelError::DuplicateItem(item.id));
            }
        }
        for &v in compat.cells() {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(ModelError::ScoreOutOfRange(v));
            }
        }
        Ok(Self { items, group_count, type_count, compat, index })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn group_count(&self) -> usize {
        self.group_count
    }

    pub fn type_count(&self) -> usize {
        self.type_count
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn item(&self, id: ItemId) -> Option<&Item> {
        self.index.get(&id).map(|&i| &self.items[i])
    }

    pub fn index_of(&self, id: ItemId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn compat_table(&self) -> &PairTable {
        &self.compat
    }

    /// Pairwise compatibility by dense index (no id lookup).
    pub fn compat_by_index(&self, i: usize, j: usize) -> f64 {
        self.compat.get(i, j)
    }

    pub fn compat(&self, a: ItemId, b: ItemId) -> Result<f64, ModelError> {
        let i = self.index_of(a).ok_or(ModelError::UnknownItem(a))?;
        let j = self.index_of(b).ok_or(ModelError::UnknownItem(b))?;
        Ok(self.compat.get(i, j))
    }
}

/// Bundle shape constraints and the relevance/compatibility blend weight.
#[derive(Clone, Debug)]
pub struct BundleSpec {
    size: u32,
    type_caps: Vec<u32>,
    gamma: f64,
}

impl BundleSpec {
    /// `size` is the exact bundle cardinality (at least 2, pairwise scores need
    /// two items). `type_caps[z]` caps how many items of type `z` a bundle may
    /// hold; types beyond the vector's length are unconstrained.
    pub fn new(size: u32, type_caps: Vec<u32>, gamma: f64) -> Result<Self, ModelError> {
        if size < 2 {
            return Err(ModelError::BundleSizeTooSmall(size));
        }
        if !gamma.is_finite() || !(0.0..=1.0).contains(&gamma) {
            return Err(ModelError::GammaOutOfRange(gamma));
        }
        Ok(Self { size, type_caps, gamma })
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn type_caps(&self) -> &[u32] {
        &self.type_caps
    }

    /// Effective cap for type `z` (`u32::MAX` when unconstrained).
    pub fn cap(&self, z: usize) -> u32 {
        self.type_caps.get(z).copied().unwrap_or(u32::MAX)
    }
}

/// A set of distinct item ids in insertion order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Bundle {
    ids: Vec<ItemId>,
}

impl Bundle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_ids<I: IntoIterator<Item = ItemId>>(ids: I) -> Result<Self, ModelError> {
        let mut bundle = Self::new();
        for id in ids {
            bundle.push(id)?;
        }
        Ok(bundle)
    }

    pub fn push(&mut self, id: ItemId) -> Result<(), ModelError> {
        if self.ids.contains(&id) {
            return Err(ModelError::DuplicateItem(id));
        }
        self.ids.push(id);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: ItemId) -> bool {
        self.ids.contains(&id)
    }

    pub fn ids(&self) -> &[ItemId] {
        &self.ids
    }

    /// Ids sorted ascending, for order-insensitive comparison and tie-breaking.
    pub fn sorted_ids(&self) -> Vec<ItemId> {
        let mut ids = self.ids.clone();
        ids.sort_unstable();
        ids
    }
}

/// Per-user candidate list: item ids with scores in `[0, 1]`, held in
/// canonical order (descending score, ascending id on ties).
#[derive(Clone, Debug)]
pub struct RelevanceView {
    user: UserId,
    entries: Vec<(ItemId, f64)>,
}

impl RelevanceView {
    pub fn new(user: UserId, mut entries: Vec<(ItemId, f64)>) -> Result<Self, ModelError> {
        for &(id, score) in &entries {
            if !score.is_finite() || !(0.0..=1.0).contains(&score) {
                return Err(ModelError::ScoreOutOfRange(score));
            }
            let _ = id;
        }
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut ids: Vec<ItemId> = entries.iter().map(|e| e.0).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(ModelError::DuplicateItem(w[0]));
        }
        Ok(Self { user, entries })
    }

    pub fn user(&self) -> UserId {
        self.user
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in canonical descending-score order.
    pub fn entries(&self) -> &[(ItemId, f64)] {
        &self.entries
    }

    pub fn score(&self, id: ItemId) -> Option<f64> {
        self.entries.iter().find(|e| e.0 == id).map(|e| e.1)
    }
}

/// Mean relevance of the bundle members: `(1/m) Σ r_ui` with `m` the current
/// bundle size, so partial bundles built by the greedy solvers score on the
/// same scale as full ones. Empty bundles score 0 by convention.
pub fn bundle_relevance(bundle: &Bundle, rel: &RelevanceView) -> Result<f64, ModelError> {
    if bundle.is_empty() {
        return Ok(0.0);
    }
    // Summing in id order makes the result independent of insertion order.
    let mut sum = 0.0;
    for id in bundle.sorted_ids() {
        sum += rel.score(id).ok_or(ModelError::MissingRelevance(id))?;
    }
    Ok(sum / bundle.len() as f64)
}

/// Mean pairwise compatibility: `2/(m(m-1)) Σ_{i<j} s_ij`, 0 when the bundle
/// has fewer than two items.
pub fn bundle_compatibility(bundle: &Bundle, catalog: &Catalog) -> Result<f64, ModelError> {
    // Summing in index order makes the result independent of insertion order.
    let mut idx = Vec::with_capacity(bundle.len());
    for &id in bundle.ids() {
        idx.push(catalog.index_of(id).ok_or(ModelError::UnknownItem(id))?);
    }
    idx.sort_unstable();
    let m = idx.len();
    if m < 2 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for a in 0..m {
        for b in (a + 1)..m {
            sum += catalog.compat_by_index(idx[a], idx[b]);
        }
    }
    Ok(sum * 2.0 / (m * (m - 1)) as f64)
}

/// Scalarized bundle quality `(1 - γ)·R + γ·S`.
pub fn bundle_quality(
    bundle: &Bundle,
    rel: &RelevanceView,
    catalog: &Catalog,
    spec: &BundleSpec,
) -> Result<f64, ModelError> {
    let r = bundle_relevance(bundle, rel)?;
    let s = bundle_compatibility(bundle, catalog)?;
    Ok((1.0 - spec.gamma()) * r + spec.gamma() * s)
}

/// One violated validity constraint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    Size { expected: u32, actual: usize },
    TypeCap { type_index: usize, cap: u32, count: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Size { expected, actual } => {
                write!(f, "bundle size {actual} != required {expected}")
            }
            Violation::TypeCap { type_index, cap, count } => {
                write!(f, "type {type_index} has {count} items, cap {cap}")
            }
        }
    }
}

/// Outcome of a validity check; an empty violation list means valid.
#[derive(Clone, Debug, Default)]
pub struct ValidityReport {
    pub violations: Vec<Violation>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the exact-size and per-type-cap constraints.
pub fn validity(
    bundle: &Bundle,
    catalog: &Catalog,
    spec: &BundleSpec,
) -> Result<ValidityReport, ModelError> {
    let mut report = ValidityReport::default();
    if bundle.len() != spec.size() as usize {
        report.violations.push(Violation::Size { expected: spec.size(), actual: bundle.len() });
    }
    let mut type_counts = vec![0u32; catalog.type_count()];
    for &id in bundle.ids() {
        let item = catalog.item(id).ok_or(ModelError::UnknownItem(id))?;
        for &z in &item.types {
            type_counts[z] += 1;
        }
    }
    for (z, &count) in type_counts.iter().enumerate() {
        let cap = spec.cap(z);
        if count > cap {
            report.violations.push(Violation::TypeCap { type_index: z, cap, count });
        }
    }
    Ok(report)
}

/// Errors from catalog construction and bundle scoring.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelError {
    UnknownItem(ItemId),
    DuplicateItem(ItemId),
    MissingRelevance(ItemId),
    ScoreOutOfRange(f64),
    GroupOutOfRange { id: ItemId, group: usize, group_count: usize },
    TypeOutOfRange { id: ItemId, type_index: usize, type_count: usize },
    BadTableShape { n: usize, cells: usize },
    BundleSizeTooSmall(u32),
    GammaOutOfRange(f64),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::UnknownItem(id) => write!(f, "item {id} not in catalog"),
            ModelError::DuplicateItem(id) => write!(f, "duplicate item {id}"),
            ModelError::MissingRelevance(id) => write!(f, "no relevance score for item {id}"),
            ModelError::ScoreOutOfRange(v) => write!(f, "score {v} outside [0, 1]"),
            ModelError::GroupOutOfRange { id, group, group_count } => {
                write!(f, "item {id} group {group} >= group count {group_count}")
            }
            ModelError::TypeOutOfRange { id, type_index, type_count } => {
                write!(f, "item {id} type {type_index} >= type count {type_count}")
            }
            ModelError::BadTableShape { n, cells } => {
                write!(f, "pair table for {n} items cannot have {cells} cells")
            }
            ModelError::BundleSizeTooSmall(l) => write!(f, "bundle size {l} < 2"),
            ModelError::GammaOutOfRange(g) => write!(f, "gamma {g} outside [0, 1]"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn catalog_3() -> Catalog {
        // Pairwise scores: (0,1)=1.0, (0,2)=0.5, (1,2)=0.0
        let items = vec![
            Item::new(ItemId(10), 0, vec![]),
            Item::new(ItemId(11), 0, vec![0]),
            Item::new(ItemId(12), 1, vec![0]),
        ];
        let mut compat = PairTable::new(3);
        compat.set(0, 1, 1.0);
        compat.set(0, 2, 0.5);
        compat.set(1, 2, 0.0);
        Catalog::new(items, 2, 1, compat).unwrap()
    }

    fn view() -> RelevanceView {
        RelevanceView::new(
            UserId(1),
            vec![(ItemId(10), 0.9), (ItemId(11), 0.6), (ItemId(12), 0.3)],
        )
        .unwrap()
    }

    #[test]
    fn relevance_is_the_mean() {
        let rel = view();
        let single = Bundle::from_ids([ItemId(11)]).unwrap();
        assert_eq!(bundle_relevance(&single, &rel).unwrap(), 0.6);

        let three = Bundle::from_ids([ItemId(10), ItemId(11), ItemId(12)]).unwrap();
        assert!((bundle_relevance(&three, &rel).unwrap() - 0.6).abs() < 1e-12);

        assert_eq!(bundle_relevance(&Bundle::new(), &rel).unwrap(), 0.0);
    }

    #[test]
    fn relevance_missing_item_errors() {
        let rel = view();
        let b = Bundle::from_ids([ItemId(99)]).unwrap();
        assert_eq!(bundle_relevance(&b, &rel), Err(ModelError::MissingRelevance(ItemId(99))));
    }

    #[test]
    fn compatibility_is_the_pair_mean() {
        let cat = catalog_3();
        let pair = Bundle::from_ids([ItemId(10), ItemId(12)]).unwrap();
        assert_eq!(bundle_compatibility(&pair, &cat).unwrap(), 0.5);

        let three = Bundle::from_ids([ItemId(10), ItemId(11), ItemId(12)]).unwrap();
        // 2/(3*2) * (1.0 + 0.5 + 0.0) = 0.5
        assert!((bundle_compatibility(&three, &cat).unwrap() - 0.5).abs() < 1e-12);

        let single = Bundle::from_ids([ItemId(10)]).unwrap();
        assert_eq!(bundle_compatibility(&single, &cat).unwrap(), 0.0);
    }

    #[test]
    fn quality_blends_relevance_and_compatibility() {
        let cat = catalog_3();
        let rel = view();
        let b = Bundle::from_ids([ItemId(10), ItemId(11), ItemId(12)]).unwrap();

        let gamma0 = BundleSpec::new(3, vec![], 0.0).unwrap();
        assert_eq!(
            bundle_quality(&b, &rel, &cat, &gamma0).unwrap(),
            bundle_relevance(&b, &rel).unwrap()
        );

        let gamma1 = BundleSpec::new(3, vec![], 1.0).unwrap();
        assert_eq!(
            bundle_quality(&b, &rel, &cat, &gamma1).unwrap(),
            bundle_compatibility(&b, &cat).unwrap()
        );

        // R = 0.6, S = 0.5, gamma = 1/3: hand value 17/30.
        let third = BundleSpec::new(3, vec![], 1.0 / 3.0).unwrap();
        let q = bundle_quality(&b, &rel, &cat, &third).unwrap();
        assert!((q - 0.566_666_666_666_666_7).abs() < 1e-9);
    }

    #[test]
    fn validity_checks_size_and_caps() {
        let cat = catalog_3();
        let spec = BundleSpec::new(2, vec![1], 0.5).unwrap();

        let ok = Bundle::from_ids([ItemId(10), ItemId(11)]).unwrap();
        assert!(validity(&ok, &cat, &spec).unwrap().is_valid());

        let too_big = Bundle::from_ids([ItemId(10), ItemId(11), ItemId(12)]).unwrap();
        let report = validity(&too_big, &cat, &spec).unwrap();
        assert!(report.violations.iter().any(|v| matches!(v, Violation::Size { .. })));

        // Both typed items share type 0 with cap 1.
        let cap_hit = Bundle::from_ids([ItemId(11), ItemId(12)]).unwrap();
        let report = validity(&cap_hit, &cat, &spec).unwrap();
        assert_eq!(
            report.violations,
            vec![Violation::TypeCap { type_index: 0, cap: 1, count: 2 }]
        );
    }

    #[test]
    fn bundle_rejects_duplicates() {
        let mut b = Bundle::new();
        b.push(ItemId(1)).unwrap();
        assert_eq!(b.push(ItemId(1)), Err(ModelError::DuplicateItem(ItemId(1))));
    }

    #[test]
    fn catalog_validates_inputs() {
        let items = vec![Item::new(ItemId(1), 2, vec![])];
        assert!(Catalog::new(items, 2, 0, PairTable::new(1)).is_err());

        let items = vec![Item::new(ItemId(1), 0, vec![])];
        let mut t = PairTable::new(1);
        t.set(0, 0, 1.5);
        assert!(Catalog::new(items, 1, 0, t).is_err());
    }

    #[test]
    fn relevance_view_sorts_canonically() {
        let v = RelevanceView::new(
            UserId(0),
            vec![(ItemId(3), 0.5), (ItemId(1), 0.5), (ItemId(2), 0.9)],
        )
        .unwrap();
        let ids: Vec<u64> = v.entries().iter().map(|e| e.0 .0).collect();
        assert_eq!(ids, vec![2, 1, 3]);
    }
}
