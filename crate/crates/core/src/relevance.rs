//! Per-user relevance: a biased matrix-factorization trainer over explicit
//! ratings, top-M extraction with global min-max normalization, and a
//! synthetic generator for property tests and simulations.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Catalog, ItemId, RelevanceView, UserId};
use crate::seed;

/// Explicit ratings, de-duplicated per (user, item) with last-write-wins.
#[derive(Clone, Debug, Default)]
pub struct RatingsTable {
    entries: Vec<(UserId, ItemId, f64)>,
    duplicate_overwrites: u64,
}

impl RatingsTable {
    /// Later triples overwrite earlier ones for the same (user, item) pair;
    /// the overwrite count is kept for reporting.
    pub fn from_triples<I>(triples: I) -> Self
    where
        I: IntoIterator<Item = (UserId, ItemId, f64)>,
    {
        let mut map: BTreeMap<(UserId, ItemId), f64> = BTreeMap::new();
        let mut duplicate_overwrites = 0;
        for (u, i, r) in triples {
            if map.insert((u, i), r).is_some() {
                duplicate_overwrites += 1;
            }
        }
        let entries = map.into_iter().map(|((u, i), r)| (u, i, r)).collect();
        Self { entries, duplicate_overwrites }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(UserId, ItemId, f64)] {
        &self.entries
    }

    pub fn duplicate_overwrites(&self) -> u64 {
        self.duplicate_overwrites
    }
}

/// Hyperparameters for the factorization trainer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MfHyperParams {
    pub factors: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub regularization: f64,
    /// Half-width of the uniform factor initialization.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for MfHyperParams {
    fn default() -> Self {
        Self {
            factors: 32,
            epochs: 30,
            learning_rate: 0.005,
            regularization: 0.02,
            init_scale: 0.005,
            seed: 0,
        }
    }
}

/// Biased factor model: `r_hat = mu + b_u + b_i + p_u . q_i`.
#[derive(Clone, Debug)]
pub struct MfModel {
    hyper: MfHyperParams,
    users: Vec<UserId>,
    items: Vec<ItemId>,
    user_index: BTreeMap<UserId, usize>,
    item_index: BTreeMap<ItemId, usize>,
    user_factors: Vec<f64>,
    item_factors: Vec<f64>,
    user_bias: Vec<f64>,
    item_bias: Vec<f64>,
    global_mean: f64,
    epoch_rmse: Vec<f64>,
}

impl MfModel {
    pub fn hyper(&self) -> &MfHyperParams {
        &self.hyper
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn items(&self) -> &[ItemId] {
        &self.items
    }

    pub fn global_mean(&self) -> f64 {
        self.global_mean
    }

    /// Training RMSE per epoch, in epoch order.
    pub fn epoch_rmse(&self) -> &[f64] {
        &self.epoch_rmse
    }

    pub fn user_factors_flat(&self) -> &[f64] {
        &self.user_factors
    }

    pub fn item_factors_flat(&self) -> &[f64] {
        &self.item_factors
    }

    pub fn user_bias(&self) -> &[f64] {
        &self.user_bias
    }

    pub fn item_bias(&self) -> &[f64] {
        &self.item_bias
    }

    /// Predicted rating on the training scale.
    pub fn predict(&self, user: UserId, item: ItemId) -> Result<f64, RelevanceError> {
        let u = *self.user_index.get(&user).ok_or(RelevanceError::UnknownUser(user))?;
        let i = *self.item_index.get(&item).ok_or(RelevanceError::UnknownItem(item))?;
        Ok(self.predict_idx(u, i))
    }

    fn predict_idx(&self, u: usize, i: usize) -> f64 {
        let d = self.hyper.factors;
        let p = &self.user_factors[u * d..(u + 1) * d];
        let q = &self.item_factors[i * d..(i + 1) * d];
        let dot: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
        self.global_mean + self.user_bias[u] + self.item_bias[i] + dot
    }

    /// Rebuild a model from persisted parts, re-validating dimensions.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        hyper: MfHyperParams,
        users: Vec<UserId>,
        items: Vec<ItemId>,
        user_factors: Vec<f64>,
        item_factors: Vec<f64>,
        user_bias: Vec<f64>,
        item_bias: Vec<f64>,
        global_mean: f64,
        epoch_rmse: Vec<f64>,
    ) -> Result<Self, RelevanceError> {
        let d = hyper.factors;
        if user_factors.len() != users.len() * d
            || item_factors.len() != items.len() * d
            || user_bias.len() != users.len()
            || item_bias.len() != items.len()
        {
            return Err(RelevanceError::ShapeMismatch);
        }
        let user_index = users.iter().enumerate().map(|(i, &u)| (u, i)).collect();
        let item_index = items.iter().enumerate().map(|(i, &x)| (x, i)).collect();
        Ok(Self {
            hyper,
            users,
            items,
            user_index,
            item_index,
            user_factors,
            item_factors,
            user_bias,
            item_bias,
            global_mean,
            epoch_rmse,
        })
    }
}

/// Trains a biased factor model by stochastic gradient descent on squared
/// error. Deterministic given the seed: initialization, and the per-epoch
/// shuffle of the (sorted) rating list, all come from one seeded generator.
pub fn train_mf(ratings: &RatingsTable, hyper: &MfHyperParams) -> Result<MfModel, RelevanceError> {
    if ratings.is_empty() {
        return Err(RelevanceError::EmptyRatings);
    }
    if hyper.factors == 0 {
        return Err(RelevanceError::BadHyper("factors"));
    }
    if !(hyper.learning_rate.is_finite() && hyper.learning_rate > 0.0) {
        return Err(RelevanceError::BadHyper("learning_rate"));
    }
    if !(hyper.regularization.is_finite() && hyper.regularization >= 0.0) {
        return Err(RelevanceError::BadHyper("regularization"));
    }

    let mut users: Vec<UserId> = ratings.entries().iter().map(|e| e.0).collect();
    users.sort_unstable();
    users.dedup();
    let mut items: Vec<ItemId> = ratings.entries().iter().map(|e| e.1).collect();
    items.sort_unstable();
    items.dedup();
    let user_index: BTreeMap<UserId, usize> =
        users.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let item_index: BTreeMap<ItemId, usize> =
        items.iter().enumerate().map(|(i, &x)| (x, i)).collect();

    let triples: Vec<(usize, usize, f64)> = ratings
        .entries()
        .iter()
        .map(|&(u, i, r)| (user_index[&u], item_index[&i], r))
        .collect();
    let global_mean = triples.iter().map(|t| t.2).sum::<f64>() / triples.len() as f64;

    let d = hyper.factors;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut init = |len: usize| -> Vec<f64> {
        (0..len).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * hyper.init_scale).collect()
    };
    let mut user_factors = init(users.len() * d);
    let mut item_factors = init(items.len() * d);
    let mut user_bias = vec![0.0; users.len()];
    let mut item_bias = vec![0.0; items.len()];

    let lr = hyper.learning_rate;
    let reg = hyper.regularization;
    let mut order: Vec<usize> = (0..triples.len()).collect();
    let mut epoch_rmse = Vec::with_capacity(hyper.epochs);

    for _ in 0..hyper.epochs {
        // Fisher-Yates with the same generator keeps the whole run a pure
        // function of the seed.
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut sq_err = 0.0;
        for &t in &order {
            let (u, i, rating) = triples[t];
            let dot: f64 =
                (0..d).map(|f| user_factors[u * d + f] * item_factors[i * d + f]).sum();
            let pred = global_mean + user_bias[u] + item_bias[i] + dot;
            let err = rating - pred;
            sq_err += err * err;

            user_bias[u] += lr * (err - reg * user_bias[u]);
            item_bias[i] += lr * (err - reg * item_bias[i]);
            for f in 0..d {
                let pf = user_factors[u * d + f];
                let qf = item_factors[i * d + f];
                user_factors[u * d + f] += lr * (err * qf - reg * pf);
                item_factors[i * d + f] += lr * (err * pf - reg * qf);
            }
        }
        epoch_rmse.push(libm::sqrt(sq_err / triples.len() as f64));
    }

    let model = MfModel {
        hyper: *hyper,
        users,
        items,
        user_index,
        item_index,
        user_factors,
        item_factors,
        user_bias,
        item_bias,
        global_mean,
        epoch_rmse,
    };
    if model.user_factors.iter().chain(&model.item_factors).any(|v| !v.is_finite()) {
        return Err(RelevanceError::Diverged);
    }
    Ok(model)
}

/// Global prediction bounds used to map raw predictions into `[0, 1]`.
///
/// Computed once over all (user, item) pairs of the evaluation set so that
/// normalized relevance magnitudes are comparable across users.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizationBounds {
    pub min: f64,
    pub max: f64,
}

impl NormalizationBounds {
    /// Scans every known (user, item) pair of the model.
    pub fn from_model(model: &MfModel) -> Self {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for u in 0..model.users.len() {
            for i in 0..model.items.len() {
                let p = model.predict_idx(u, i);
                min = min.min(p);
                max = max.max(p);
            }
        }
        Self { min, max }
    }

    /// Min-max map to `[0, 1]`, clamped at the boundaries. Strictly monotone
    /// inside the bounds, so rankings are unchanged.
    pub fn normalize(&self, value: f64) -> f64 {
        let span = self.max - self.min;
        if span <= 0.0 {
            return 0.5;
        }
        ((value - self.min) / span).clamp(0.0, 1.0)
    }
}

/// The `m` items with the highest predicted rating for `user`, scores
/// normalized by `bounds`, in canonical descending order.
pub fn top_m(
    model: &MfModel,
    user: UserId,
    m: usize,
    bounds: &NormalizationBounds,
) -> Result<RelevanceView, RelevanceError> {
    let u = *model.user_index.get(&user).ok_or(RelevanceError::UnknownUser(user))?;
    if m > model.items.len() {
        return Err(RelevanceError::NotEnoughItems { requested: m, available: model.items.len() });
    }
    let mut scored: Vec<(ItemId, f64)> = (0..model.items.len())
        .map(|i| (model.items[i], model.predict_idx(u, i)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(m);
    let entries = scored.into_iter().map(|(id, p)| (id, bounds.normalize(p))).collect();
    RelevanceView::new(user, entries).map_err(|_| RelevanceError::ShapeMismatch)
}

/// Group-conditional score skew for the synthetic generator: each item's
/// score is a uniform draw from `[base_min, base_max]` plus its group's bias.
#[derive(Clone, Debug)]
pub struct SkewSpec {
    group_bias: Vec<f64>,
    base_min: f64,
    base_max: f64,
}

impl SkewSpec {
    /// Biases must keep every reachable score inside `[0, 1]`, which also
    /// guarantees the group-mean gaps equal the bias gaps exactly in
    /// expectation (no clipping).
    pub fn new(group_bias: Vec<f64>, base_min: f64, base_max: f64) -> Result<Self, RelevanceError> {
        if group_bias.is_empty() {
            return Err(RelevanceError::BadHyper("group_bias"));
        }
        if !(0.0 <= base_min && base_min <= base_max && base_max <= 1.0) {
            return Err(RelevanceError::BadHyper("base range"));
        }
        for &b in &group_bias {
            if !b.is_finite() || base_min + b < 0.0 || base_max + b > 1.0 {
                return Err(RelevanceError::BadHyper("group_bias"));
            }
        }
        Ok(Self { group_bias, base_min, base_max })
    }

    /// Uniform scores with no group effect.
    pub fn flat(groups: usize) -> Self {
        Self { group_bias: vec![0.0; groups], base_min: 0.2, base_max: 0.6 }
    }

    pub fn group_bias(&self) -> &[f64] {
        &self.group_bias
    }
}

/// Deterministic per-user relevance stream over a catalog.
#[derive(Clone, Debug)]
pub struct SyntheticRelevance<'a> {
    catalog: &'a Catalog,
    spec: SkewSpec,
    seed: u64,
}

impl<'a> SyntheticRelevance<'a> {
    pub fn new(catalog: &'a Catalog, spec: SkewSpec, seed: u64) -> Result<Self, RelevanceError> {
        if spec.group_bias.len() != catalog.group_count() {
            return Err(RelevanceError::ShapeMismatch);
        }
        Ok(Self { catalog, spec, seed })
    }

    /// Top-`m` view for a user index; the same `(seed, user)` pair always
    /// produces the same view.
    pub fn view(&self, user: u64, m: usize) -> Result<RelevanceView, RelevanceError> {
        if m > self.catalog.len() {
            return Err(RelevanceError::NotEnoughItems {
                requested: m,
                available: self.catalog.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(self.seed, user));
        let span = self.spec.base_max - self.spec.base_min;
        let mut scored: Vec<(ItemId, f64)> = self
            .catalog
            .items()
            .iter()
            .map(|item| {
                let base = self.spec.base_min + rng.random::<f64>() * span;
                (item.id, base + self.spec.group_bias[item.group])
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(m);
        RelevanceView::new(UserId(user), scored).map_err(|_| RelevanceError::ShapeMismatch)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelevanceError {
    EmptyRatings,
    BadHyper(&'static str),
    UnknownUser(UserId),
    UnknownItem(ItemId),
    NotEnoughItems { requested: usize, available: usize },
    ShapeMismatch,
    Diverged,
}

impl fmt::Display for RelevanceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelevanceError::EmptyRatings => write!(f, "ratings table is empty"),
            RelevanceError::BadHyper(name) => write!(f, "hyperparameter {name} out of range"),
            RelevanceError::UnknownUser(u) => write!(f, "user {u} not in model"),
            RelevanceError::UnknownItem(i) => write!(f, "item {i} not in model"),
            RelevanceError::NotEnoughItems { requested, available } => {
                write!(f, "requested top-{requested} of {available} items")
            }
            RelevanceError::ShapeMismatch => write!(f, "model parts have inconsistent shapes"),
            RelevanceError::Diverged => write!(f, "training diverged to non-finite factors"),
        }
    }
}
