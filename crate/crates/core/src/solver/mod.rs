//! Bundle construction strategies over a per-user candidate pool.
//!
//! Four strategies share one request/outcome surface:
//!
//! - [`solve_exact`]: depth-first branch-and-bound, provably optimal under
//!   the exposure constraint (or provably infeasible), with a node budget;
//! - [`solve_f3r`]: fairness-first randomized greedy that samples a producer
//!   group from the target shares, then picks the best item inside it;
//! - [`solve_fairwg`]: quality-first greedy whose per-item score carries a
//!   weighted under-exposure bonus;
//! - [`solve_random`]: seeded uniform baseline.
//!
//! [`brute_force_oracle`] enumerates every size-L subset and is the reference
//! the exact solver is tested against.

mod exact;
mod exhaustive;
mod f3r;
mod fairwg;
mod random;

pub use exact::solve_exact;
pub use exhaustive::brute_force_oracle;
pub use f3r::solve_f3r;
pub use fairwg::solve_fairwg;
pub use random::solve_random;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::time::Duration;

use crate::fairness::{FairnessSpec, FEASIBILITY_EPS};
use crate::model::{Bundle, BundleSpec, Catalog, ItemId, RelevanceView};

/// Default node-count cap for the exact solver.
pub const DEFAULT_NODE_BUDGET: u64 = 5_000_000;

/// One bundle-construction request: the user's candidate pool plus the
/// session context the fairness terms need.
///
/// `history_deltas` and `history_exposure` summarize the served history
/// (`delta_history` at `eps_t`, and the per-group exposure shares, all zero
/// while nothing has been served). Both are per-group vectors of length K.
#[derive(Clone, Debug)]
pub struct SolveRequest<'a> {
    pub rel: &'a RelevanceView,
    pub catalog: &'a Catalog,
    pub bundle: &'a BundleSpec,
    pub fairness: &'a FairnessSpec,
    pub history_deltas: Vec<f64>,
    pub history_exposure: Vec<f64>,
    /// Effective tolerance at this step (schedule already applied).
    pub eps_t: f64,
    /// Fairness weight for the weighted greedy.
    pub lambda: f64,
    /// Exploration probability for the fairness-first greedy: with this
    /// probability a step picks the best item over all groups instead of
    /// sampling a group first.
    pub explore: f64,
    /// Node cap for the exact solver (`None` = [`DEFAULT_NODE_BUDGET`]).
    pub node_budget: Option<u64>,
}

impl<'a> SolveRequest<'a> {
    /// A request with empty history and vacuous tolerance; session runners
    /// override the history fields per step.
    pub fn new(
        rel: &'a RelevanceView,
        catalog: &'a Catalog,
        bundle: &'a BundleSpec,
        fairness: &'a FairnessSpec,
    ) -> Self {
        let k = fairness.group_count();
        Self {
            rel,
            catalog,
            bundle,
            fairness,
            history_deltas: vec![0.0; k],
            history_exposure: vec![0.0; k],
            eps_t: 1.0,
            lambda: 0.0,
            explore: 0.0,
            node_budget: None,
        }
    }
}

/// How a solve ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    /// Proven best bundle over the candidate pool (exact solver only).
    Optimal,
    /// A valid bundle without an optimality proof: heuristic output, or the
    /// exact solver's incumbent when the node budget ran out.
    Feasible,
    /// No valid, exposure-feasible bundle exists (exact/oracle), or the
    /// greedy ran out of admissible items before filling the bundle.
    Infeasible,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveStatus::Optimal => write!(f, "optimal"),
            SolveStatus::Feasible => write!(f, "feasible"),
            SolveStatus::Infeasible => write!(f, "infeasible"),
        }
    }
}

/// Scores of a returned bundle.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BundleScores {
    pub relevance: f64,
    pub compatibility: f64,
    pub quality: f64,
}

/// Search statistics. `wall_time` is stamped by the (std) caller that timed
/// the solve; the solvers themselves never read a clock.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolverStats {
    pub nodes: u64,
    pub wall_time: Option<Duration>,
    /// Upper bound on the optimality gap when the node budget stopped the
    /// exact search early.
    pub gap: Option<f64>,
}

/// Result of one solve: a bundle with its scores, or an explicit
/// infeasibility record.
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub bundle: Option<Bundle>,
    pub scores: Option<BundleScores>,
    pub stats: SolverStats,
}

impl SolveOutcome {
    fn infeasible(nodes: u64) -> Self {
        Self {
            status: SolveStatus::Infeasible,
            bundle: None,
            scores: None,
            stats: SolverStats { nodes, ..SolverStats::default() },
        }
    }

    pub fn quality(&self) -> Option<f64> {
        self.scores.map(|s| s.quality)
    }
}

/// Errors for malformed requests. Infeasibility is a status, not an error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveError {
    /// Fewer candidates than the bundle size.
    TooFewCandidates { candidates: usize, bundle_size: u32 },
    UnknownItem(ItemId),
    /// Request vectors (deltas, exposures, targets) disagree on group count.
    GroupCountMismatch { expected: usize, actual: usize },
    ParameterOutOfRange(&'static str),
    /// Oracle refusal: the subset count exceeds its enumeration cap.
    InstanceTooLarge { subsets_log10: u32 },
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveError::TooFewCandidates { candidates, bundle_size } => {
                write!(f, "{candidates} candidates cannot fill a bundle of {bundle_size}")
            }
            SolveError::UnknownItem(id) => write!(f, "candidate {id} not in catalog"),
            SolveError::GroupCountMismatch { expected, actual } => {
                write!(f, "group count mismatch: expected {expected}, got {actual}")
            }
            SolveError::ParameterOutOfRange(name) => write!(f, "{name} out of range"),
            SolveError::InstanceTooLarge { subsets_log10 } => {
                write!(f, "more than 10^{subsets_log10} subsets to enumerate")
            }
        }
    }
}

/// The request's candidate pool resolved against the catalog, in canonical
/// order (descending relevance, ascending id on ties).
pub(crate) struct Candidates<'a> {
    pub catalog: &'a Catalog,
    pub ids: Vec<ItemId>,
    pub scores: Vec<f64>,
    pub cat_index: Vec<usize>,
    pub groups: Vec<usize>,
    pub types: Vec<&'a [usize]>,
}

impl<'a> Candidates<'a> {
    pub fn build(req: &SolveRequest<'a>) -> Result<Self, SolveError> {
        let k = req.fairness.group_count();
        if req.catalog.group_count() != k {
            return Err(SolveError::GroupCountMismatch {
                expected: k,
                actual: req.catalog.group_count(),
            });
        }
        if req.history_deltas.len() != k {
            return Err(SolveError::GroupCountMismatch {
                expected: k,
                actual: req.history_deltas.len(),
            });
        }
        if req.history_exposure.len() != k {
            return Err(SolveError::GroupCountMismatch {
                expected: k,
                actual: req.history_exposure.len(),
            });
        }
        if req.rel.len() < req.bundle.size() as usize {
            return Err(SolveError::TooFewCandidates {
                candidates: req.rel.len(),
                bundle_size: req.bundle.size(),
            });
        }
        if !req.eps_t.is_finite() || req.eps_t < 0.0 {
            return Err(SolveError::ParameterOutOfRange("eps_t"));
        }
        if !req.lambda.is_finite() || req.lambda < 0.0 {
            return Err(SolveError::ParameterOutOfRange("lambda"));
        }
        if !req.explore.is_finite() || !(0.0..=1.0).contains(&req.explore) {
            return Err(SolveError::ParameterOutOfRange("explore"));
        }

        let m = req.rel.len();
        let mut ids = Vec::with_capacity(m);
        let mut scores = Vec::with_capacity(m);
        let mut cat_index = Vec::with_capacity(m);
        let mut groups = Vec::with_capacity(m);
        let mut types = Vec::with_capacity(m);
        for &(id, score) in req.rel.entries() {
            let pos = req.catalog.index_of(id).ok_or(SolveError::UnknownItem(id))?;
            let item = &req.catalog.items()[pos];
            ids.push(id);
            scores.push(score);
            cat_index.push(pos);
            groups.push(item.group);
            types.push(item.types.as_slice());
        }
        Ok(Self { catalog: req.catalog, ids, scores, cat_index, groups, types })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn pair(&self, a: usize, b: usize) -> f64 {
        self.catalog.compat_by_index(self.cat_index[a], self.cat_index[b])
    }
}

/// Minimum items each group must contribute to the current bundle for the
/// stepwise exposure constraint to hold: `ceil(L*rho_k*(1-eps) - delta_k)`
/// clamped at zero. Integer counts make the ceiling form equivalent to the
/// `>= -FEASIBILITY_EPS` comparison on the summed gaps.
pub(crate) fn required_group_counts(req: &SolveRequest<'_>) -> Vec<u32> {
    let l = f64::from(req.bundle.size());
    req.fairness
        .rho()
        .iter()
        .zip(&req.history_deltas)
        .map(|(&rho_k, &delta_k)| {
            let raw = l * rho_k * (1.0 - req.eps_t) - delta_k;
            let need = libm::ceil(raw - FEASIBILITY_EPS);
            if need <= 0.0 {
                0
            } else {
                need as u32
            }
        })
        .collect()
}

/// Incremental bundle state shared by the greedy strategies: running score
/// sums, per-type counts, and the active candidate mask maintained by the
/// saturated-type sweep.
pub(crate) struct GreedyState<'c, 'a> {
    cand: &'c Candidates<'a>,
    spec: &'c BundleSpec,
    pub chosen: Vec<usize>,
    pub active: Vec<bool>,
    type_counts: Vec<u32>,
    rel_sum: f64,
    pair_sum: f64,
}

impl<'c, 'a> GreedyState<'c, 'a> {
    pub fn new(cand: &'c Candidates<'a>, spec: &'c BundleSpec) -> Self {
        let mut state = Self {
            cand,
            spec,
            chosen: Vec::with_capacity(spec.size() as usize),
            active: vec![true; cand.len()],
            type_counts: vec![0; cand.catalog.type_count()],
            rel_sum: 0.0,
            pair_sum: 0.0,
        };
        // Types capped at zero are saturated before anything is picked.
        for j in 0..cand.len() {
            if cand.types[j].iter().any(|&z| spec.cap(z) == 0) {
                state.active[j] = false;
            }
        }
        state
    }

    pub fn is_full(&self) -> bool {
        self.chosen.len() >= self.spec.size() as usize
    }

    pub fn any_active(&self) -> bool {
        self.active.iter().any(|&a| a)
    }

    pub fn group_has_active(&self, k: usize) -> bool {
        (0..self.cand.len()).any(|j| self.active[j] && self.cand.groups[j] == k)
    }

    /// Quality of the current bundle extended with candidate `j`, normalized
    /// by the extended size so every greedy step compares on the same scale.
    pub fn quality_with(&self, j: usize) -> f64 {
        let m = self.chosen.len() + 1;
        let gamma = self.spec.gamma();
        let r = (self.rel_sum + self.cand.scores[j]) / m as f64;
        let s = if m >= 2 {
            let cross: f64 = self.chosen.iter().map(|&c| self.cand.pair(c, j)).sum();
            (self.pair_sum + cross) * 2.0 / (m * (m - 1)) as f64
        } else {
            0.0
        };
        (1.0 - gamma) * r + gamma * s
    }

    /// Argmax of `key` over active candidates, restricted to `pool` when
    /// given. Ties break toward the smaller item id, making every greedy
    /// deterministic and insensitive to the candidate permutation.
    pub fn best_active_by<F>(&self, pool: Option<usize>, key: F) -> Option<usize>
    where
        F: Fn(usize) -> f64,
    {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.cand.len() {
            if !self.active[j] {
                continue;
            }
            if let Some(k) = pool {
                if self.cand.groups[j] != k {
                    continue;
                }
            }
            let v = key(j);
            let better = match best {
                None => true,
                Some((bj, bv)) => v > bv || (v == bv && self.cand.ids[j] < self.cand.ids[bj]),
            };
            if better {
                best = Some((j, v));
            }
        }
        best.map(|(j, _)| j)
    }

    /// Adds candidate `j` and runs the saturated-type sweep: every type the
    /// new item fills to its cap deactivates all remaining items of that type.
    pub fn push(&mut self, j: usize) {
        debug_assert!(self.active[j], "picked an inactive candidate");
        let cross: f64 = self.chosen.iter().map(|&c| self.cand.pair(c, j)).sum();
        self.pair_sum += cross;
        self.rel_sum += self.cand.scores[j];
        self.active[j] = false;
        self.chosen.push(j);
        for &z in self.cand.types[j] {
            self.type_counts[z] += 1;
            if self.type_counts[z] >= self.spec.cap(z) {
                for other in 0..self.cand.len() {
                    if self.active[other] && self.cand.types[other].contains(&z) {
                        self.active[other] = false;
                    }
                }
            }
        }
        debug_assert!(self.no_active_item_is_blocked());
    }

    /// Soundness scan: after the sweep, no active item may carry a saturated
    /// type.
    fn no_active_item_is_blocked(&self) -> bool {
        (0..self.cand.len()).all(|j| {
            !self.active[j]
                || self.cand.types[j].iter().all(|&z| self.type_counts[z] < self.spec.cap(z))
        })
    }

    /// Finished bundle plus its scores; call once the target size is reached.
    pub fn into_outcome(self, nodes: u64) -> SolveOutcome {
        let m = self.chosen.len();
        debug_assert_eq!(m, self.spec.size() as usize);
        let relevance = self.rel_sum / m as f64;
        let compatibility =
            if m >= 2 { self.pair_sum * 2.0 / (m * (m - 1)) as f64 } else { 0.0 };
        let gamma = self.spec.gamma();
        let quality = (1.0 - gamma) * relevance + gamma * compatibility;
        let mut bundle = Bundle::new();
        for &j in &self.chosen {
            bundle.push(self.cand.ids[j]).expect("greedy never repeats a candidate");
        }
        SolveOutcome {
            status: SolveStatus::Feasible,
            bundle: Some(bundle),
            scores: Some(BundleScores { relevance, compatibility, quality }),
            stats: SolverStats { nodes, ..SolverStats::default() },
        }
    }
}

/// Inverse-CDF draw from a weight vector restricted by `allowed`; weights are
/// renormalized over the allowed entries. Returns `None` when nothing is
/// allowed or the allowed mass is zero.
pub(crate) fn sample_weighted<F>(weights: &[f64], allowed: F, draw: f64) -> Option<usize>
where
    F: Fn(usize) -> bool,
{
    let total: f64 = weights
        .iter()
        .enumerate()
        .filter(|&(k, _)| allowed(k))
        .map(|(_, &w)| w)
        .sum();
    if total <= 0.0 {
        return None;
    }
    let target = draw * total;
    let mut cum = 0.0;
    let mut last = None;
    for (k, &w) in weights.iter().enumerate() {
        if !allowed(k) {
            continue;
        }
        cum += w;
        last = Some(k);
        if target < cum {
            return Some(k);
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fairness::ToleranceSchedule;
    use crate::model::{Item, PairTable, UserId};
    use alloc::vec;

    fn fairness(rho: Vec<f64>) -> FairnessSpec {
        FairnessSpec::new(rho, 0.1, ToleranceSchedule::Fixed).unwrap()
    }

    /// Items with the given groups, ids 1.., zero compatibility, no types.
    fn catalog(groups: &[usize], group_count: usize) -> Catalog {
        let items = groups
            .iter()
            .enumerate()
            .map(|(i, &g)| Item::new(ItemId(i as u64 + 1), g, vec![]))
            .collect();
        Catalog::new(items, group_count, 0, PairTable::new(groups.len())).unwrap()
    }

    fn view(scores: &[f64]) -> RelevanceView {
        let entries = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| (ItemId(i as u64 + 1), s))
            .collect();
        RelevanceView::new(UserId(7), entries).unwrap()
    }

    fn ids_of(outcome: &SolveOutcome) -> Vec<u64> {
        outcome.bundle.as_ref().unwrap().sorted_ids().iter().map(|id| id.0).collect()
    }

    #[test]
    fn exact_picks_top_relevance_without_fairness() {
        let cat = catalog(&[0, 0, 0, 0], 1);
        let rel = view(&[0.9, 0.8, 0.1, 0.1]);
        let bundle = BundleSpec::new(2, vec![], 1.0 / 3.0).unwrap();
        let fair = fairness(vec![1.0]);
        let req = SolveRequest::new(&rel, &cat, &bundle, &fair);

        let outcome = solve_exact(&req).unwrap();
        assert_eq!(outcome.status, SolveStatus::Optimal);
        assert_eq!(ids_of(&outcome), vec![1, 2]);

        let oracle = brute_force_oracle(&req).unwrap();
        assert_eq!(oracle.status, SolveStatus::Optimal);
        assert_eq!(ids_of(&oracle), vec![1, 2]);
        assert!((outcome.quality().unwrap() - oracle.quality().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn exact_reports_infeasible_when_a_group_is_unreachable() {
        // Candidates all in group 0, but group 1 needs one of two slots.
        let cat = catalog(&[0, 0, 0, 0], 2);
        let rel = view(&[0.9, 0.8, 0.7, 0.6]);
        let bundle = BundleSpec::new(2, vec![], 0.5).unwrap();
        let fair = fairness(vec![0.5, 0.5]);
        let mut req = SolveRequest::new(&rel, &cat, &bundle, &fair);
        req.eps_t = 0.0;

        let outcome = solve_exact(&req).unwrap();
        assert_eq!(outcome.status, SolveStatus::Infeasible);
        assert!(outcome.bundle.is_none());

        let oracle = brute_force_oracle(&req).unwrap();
        assert_eq!(oracle.status, SolveStatus::Infeasible);
    }

    #[test]
    fn oracle_with_single_subset_checks_it() {
        let cat = catalog(&[0, 1], 2);
        let rel = view(&[0.9, 0.8]);
        let bundle = BundleSpec::new(2, vec![], 0.0).unwrap();
        let fair = fairness(vec![0.5, 0.5]);
        let mut req = SolveRequest::new(&rel, &cat, &bundle, &fair);
        req.eps_t = 0.0;

        let outcome = brute_force_oracle(&req).unwrap();
        assert_eq!(outcome.status, SolveStatus::Optimal);
        assert_eq!(ids_of(&outcome), vec![1, 2]);
    }

    #[test]
    fn oracle_refuses_oversized_instances() {
        let groups: Vec<usize> = vec![0; 60];
        let cat = catalog(&groups, 1);
        let scores: Vec<f64> = (0..60).map(|i| 0.9 - 0.01 * i as f64).collect();
        let rel = view(&scores);
        let bundle = BundleSpec::new(12, vec![], 0.5).unwrap();
        let fair = fairness(vec![1.0]);
        let req = SolveRequest::new(&rel, &cat, &bundle, &fair);
        assert!(matches!(
            brute_force_oracle(&req),
            Err(SolveError::InstanceTooLarge { .. })
        ));
    }

    #[test]
    fn f3r_with_full_exploration_matches_plain_greedy() {
        let cat = catalog(&[0, 1, 0, 1, 0, 1], 2);
        let rel = view(&[0.3, 0.9, 0.5, 0.2, 0.8, 0.4]);
        let bundle = BundleSpec::new(3, vec![], 0.0).unwrap();
        let fair = fairness(vec![0.5, 0.5]);
        let mut req = SolveRequest::new(&rel, &cat, &bundle, &fair);
        req.explore = 1.0;

        // With gamma = 0 the greedy ranks purely by relevance.
        for seed in 0..5 {
            let outcome = solve_f3r(&req, seed).unwrap();
            assert_eq!(outcome.status, SolveStatus::Feasible);
            assert_eq!(ids_of(&outcome), vec![2, 3, 5]);
        }
    }

    #[test]
    fn f3r_with_degenerate_target_stays_in_one_group() {
        // Group 1's share is epsilon-mass only (zero targets are rejected at
        // spec validation), so every draw lands in group 0.
        let cat = catalog(&[0, 0, 0, 1, 1, 1], 2);
        let rel = view(&[0.1, 0.2, 0.3, 0.9, 0.9, 0.9]);
        let bundle = BundleSpec::new(3, vec![], 0.0).unwrap();
        let fair = FairnessSpec::new(
            vec![1.0 - 1e-12, 1e-12],
            0.1,
            ToleranceSchedule::Fixed,
        )
        .unwrap();
        let mut req = SolveRequest::new(&rel, &cat, &bundle, &fair);
        req.explore = 0.0;

        for seed in 0..20 {
            let outcome = solve_f3r(&req, seed).unwrap();
            assert_eq!(ids_of(&outcome), vec![1, 2, 3]);
        }
    }

    #[test]
    fn f3r_is_deterministic_under_seed() {
        let cat = catalog(&[0, 1, 0, 1, 0, 1], 2);
        let rel = view(&[0.3, 0.9, 0.5, 0.2, 0.8, 0.4]);
        let bundle = BundleSpec::new(4, vec![], 0.3).unwrap();
        let fair = fairness(vec![0.4, 0.6]);
        let req = SolveRequest::new(&rel, &cat, &bundle, &fair);

        let a = solve_f3r(&req, 99).unwrap();
        let b = solve_f3r(&req, 99).unwrap();
        assert_eq!(a.bundle, b.bundle);
    }

    #[test]
    fn fairwg_with_zero_weight_is_the_quality_greedy() {
        let cat = catalog(&[0, 1, 0, 1, 0, 1], 2);
        let rel = view(&[0.3, 0.9, 0.5, 0.2, 0.8, 0.4]);
        let bundle = BundleSpec::new(3, vec![], 0.0).unwrap();
        let fair = fairness(vec![0.5, 0.5]);
        let req = SolveRequest::new(&rel, &cat, &bundle, &fair);

        let outcome = solve_fairwg(&req).unwrap();
        // Seed with the top item, then fill by best quality: ids 2, 5, 3.
        assert_eq!(ids_of(&outcome), vec![2, 3, 5]);
    }

    #[test]
    fn fairwg_with_large_weight_prefers_the_heavier_target() {
        // Seed is the relevance argmax (id 1). With lambda large and empty
        // history the fill maximizes rho of the candidate group first:
        // group 1 (share 0.75) beats the higher-relevance group-0 item.
        let cat = catalog(&[0, 0, 1, 1], 2);
        let rel = view(&[0.9, 0.8, 0.5, 0.4]);
        let bundle = BundleSpec::new(2, vec![], 0.0).unwrap();
        let fair = FairnessSpec::new(vec![0.25, 0.75], 0.1, ToleranceSchedule::Fixed).unwrap();
        let mut req = SolveRequest::new(&rel, &cat, &bundle, &fair);
        req.lambda = 100.0;

        let outcome = solve_fairwg(&req).unwrap();
        assert_eq!(ids_of(&outcome), vec![1, 3]);
    }

    #[test]
    fn fairwg_weight_is_inert_with_one_group() {
        let cat = catalog(&[0, 0, 0, 0], 1);
        let rel = view(&[0.3, 0.9, 0.5, 0.2]);
        let bundle = BundleSpec::new(2, vec![], 0.25).unwrap();
        let fair = fairness(vec![1.0]);

        let mut low = SolveRequest::new(&rel, &cat, &bundle, &fair);
        low.lambda = 0.0;
        let mut high = low.clone();
        high.lambda = 50.0;

        assert_eq!(
            solve_fairwg(&low).unwrap().bundle,
            solve_fairwg(&high).unwrap().bundle
        );
    }

    #[test]
    fn random_is_seeded_and_covers_all_candidates_at_full_size() {
        let cat = catalog(&[0, 1, 0, 1], 2);
        let rel = view(&[0.3, 0.9, 0.5, 0.2]);
        let bundle = BundleSpec::new(4, vec![], 0.5).unwrap();
        let fair = fairness(vec![0.5, 0.5]);
        let req = SolveRequest::new(&rel, &cat, &bundle, &fair);

        let a = solve_random(&req, 5).unwrap();
        let b = solve_random(&req, 5).unwrap();
        assert_eq!(a.bundle, b.bundle);
        // L = M: every candidate appears.
        assert_eq!(ids_of(&a), vec![1, 2, 3, 4]);
    }

    #[test]
    fn random_reaches_every_item_across_seeds() {
        let cat = catalog(&[0, 1, 0, 1, 0, 1], 2);
        let rel = view(&[0.3, 0.9, 0.5, 0.2, 0.8, 0.4]);
        let bundle = BundleSpec::new(2, vec![], 0.5).unwrap();
        let fair = fairness(vec![0.5, 0.5]);
        let req = SolveRequest::new(&rel, &cat, &bundle, &fair);

        let mut seen = [false; 6];
        for seed in 0..200 {
            for id in ids_of(&solve_random(&req, seed).unwrap()) {
                seen[id as usize - 1] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn saturated_types_deactivate_candidates_everywhere() {
        // Items 1 and 2 share type 0 with cap 1; the greedy must never take
        // both even though they carry the two best scores.
        let items = vec![
            Item::new(ItemId(1), 0, vec![0]),
            Item::new(ItemId(2), 0, vec![0]),
            Item::new(ItemId(3), 0, vec![1]),
            Item::new(ItemId(4), 0, vec![]),
        ];
        let cat = Catalog::new(items, 1, 2, PairTable::new(4)).unwrap();
        let rel = view(&[0.9, 0.8, 0.2, 0.1]);
        let bundle = BundleSpec::new(3, vec![1, 1], 0.0).unwrap();
        let fair = fairness(vec![1.0]);
        let req = SolveRequest::new(&rel, &cat, &bundle, &fair);

        for outcome in [
            solve_fairwg(&req).unwrap(),
            solve_f3r(&req, 11).unwrap(),
            solve_random(&req, 11).unwrap(),
            solve_exact(&req).unwrap(),
        ] {
            let report = crate::model::validity(
                outcome.bundle.as_ref().unwrap(),
                &cat,
                &bundle,
            )
            .unwrap();
            assert!(report.is_valid(), "violations: {:?}", report.violations);
        }
    }

    #[test]
    fn zero_cap_type_blocks_its_items() {
        let items = vec![
            Item::new(ItemId(1), 0, vec![0]),
            Item::new(ItemId(2), 0, vec![]),
            Item::new(ItemId(3), 0, vec![]),
        ];
        let cat = Catalog::new(items, 1, 1, PairTable::new(3)).unwrap();
        let rel = view(&[0.99, 0.5, 0.4]);
        let bundle = BundleSpec::new(2, vec![0], 0.0).unwrap();
        let fair = fairness(vec![1.0]);
        let req = SolveRequest::new(&rel, &cat, &bundle, &fair);

        assert_eq!(ids_of(&solve_fairwg(&req).unwrap()), vec![2, 3]);
        assert_eq!(ids_of(&solve_exact(&req).unwrap()), vec![2, 3]);
    }

    #[test]
    fn too_few_candidates_is_an_error() {
        let cat = catalog(&[0, 0], 1);
        let rel = view(&[0.9, 0.8]);
        let bundle = BundleSpec::new(3, vec![], 0.5).unwrap();
        let fair = fairness(vec![1.0]);
        let req = SolveRequest::new(&rel, &cat, &bundle, &fair);
        assert!(matches!(
            solve_exact(&req),
            Err(SolveError::TooFewCandidates { .. })
        ));
    }

    #[test]
    fn greedy_infeasible_when_actives_run_out() {
        // Cap 1 on the shared type leaves only two addable items for L = 3.
        let items = vec![
            Item::new(ItemId(1), 0, vec![0]),
            Item::new(ItemId(2), 0, vec![0]),
            Item::new(ItemId(3), 0, vec![0]),
            Item::new(ItemId(4), 0, vec![]),
        ];
        let cat = Catalog::new(items, 1, 1, PairTable::new(4)).unwrap();
        let rel = view(&[0.9, 0.8, 0.7, 0.6]);
        let bundle = BundleSpec::new(3, vec![1], 0.0).unwrap();
        let fair = fairness(vec![1.0]);
        let req = SolveRequest::new(&rel, &cat, &bundle, &fair);

        assert_eq!(solve_fairwg(&req).unwrap().status, SolveStatus::Infeasible);
        assert_eq!(solve_exact(&req).unwrap().status, SolveStatus::Infeasible);
        assert_eq!(brute_force_oracle(&req).unwrap().status, SolveStatus::Infeasible);
    }
}
