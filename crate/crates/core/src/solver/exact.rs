//! Exact depth-first branch-and-bound over the binary item-selection
//! variables.
//!
//! The search maximizes the scalarized quality of a size-L subset of the
//! candidates subject to the per-type caps and the stepwise exposure
//! constraint. Candidates are scanned in descending-relevance order and the
//! include branch is explored first, so good incumbents appear early. A node
//! is fathomed when
//!
//! - too few candidates remain to fill the bundle,
//! - some group can no longer reach its required residual count,
//! - a type cap rules the branch out, or
//! - an admissible upper bound cannot beat the incumbent.
//!
//! The bound adds the best remaining relevance scores (exact, thanks to the
//! sort order) and the globally largest remaining pair scores (a superset
//! relaxation, so it never underestimates).

use alloc::vec;
use alloc::vec::Vec;

use super::{
    required_group_counts, BundleScores, Candidates, SolveError, SolveOutcome, SolveRequest,
    SolveStatus, SolverStats, DEFAULT_NODE_BUDGET,
};
use crate::model::Bundle;

/// Bound slack: subtrees are only fathomed when their bound cannot beat the
/// incumbent by more than this, keeping the returned quality within any
/// reasonable comparison tolerance of the true optimum.
const BOUND_SLACK: f64 = 1e-12;

struct Node {
    /// Next candidate index to decide.
    idx: usize,
    chosen: Vec<u16>,
    group_counts: Vec<u16>,
    type_counts: Vec<u16>,
    rel_sum: f64,
    pair_sum: f64,
}

struct Search<'c, 'a> {
    cand: &'c Candidates<'a>,
    size: usize,
    gamma: f64,
    need: Vec<u32>,
    caps: Vec<u32>,
    /// Prefix sums of candidate relevance in canonical (descending) order.
    rel_prefix: Vec<f64>,
    /// Prefix sums of all candidate pair scores, sorted descending.
    pair_prefix: Vec<f64>,
    /// `avail[k][i]`: candidates with index >= i belonging to group k.
    avail: Vec<Vec<u32>>,
}

impl<'c, 'a> Search<'c, 'a> {
    fn new(req: &SolveRequest<'a>, cand: &'c Candidates<'a>) -> Self {
        let m = cand.len();
        let k = req.fairness.group_count();

        let mut rel_prefix = vec![0.0; m + 1];
        for i in 0..m {
            rel_prefix[i + 1] = rel_prefix[i] + cand.scores[i];
        }

        let mut pairs = Vec::with_capacity(m * (m - 1) / 2);
        for a in 0..m {
            for b in (a + 1)..m {
                pairs.push(cand.pair(a, b));
            }
        }
        pairs.sort_by(|x, y| y.total_cmp(x));
        let mut pair_prefix = vec![0.0; pairs.len() + 1];
        for (i, &p) in pairs.iter().enumerate() {
            pair_prefix[i + 1] = pair_prefix[i] + p;
        }

        let mut avail = vec![vec![0u32; m + 1]; k];
        for i in (0..m).rev() {
            for g in 0..k {
                avail[g][i] = avail[g][i + 1] + u32::from(cand.groups[i] == g);
            }
        }

        let caps = (0..cand.catalog.type_count()).map(|z| req.bundle.cap(z)).collect();

        Self {
            cand,
            size: req.bundle.size() as usize,
            gamma: req.bundle.gamma(),
            need: required_group_counts(req),
            caps,
            rel_prefix,
            pair_prefix,
            avail,
        }
    }

    /// Admissible upper bound on the quality of any completion of `node`.
    fn bound(&self, node: &Node) -> f64 {
        let c = node.chosen.len();
        let slots = self.size - c;
        let rel = node.rel_sum + self.rel_prefix[node.idx + slots] - self.rel_prefix[node.idx];
        let pairs_needed = self.size * (self.size - 1) / 2 - c * c.saturating_sub(1) / 2;
        let pair =
            node.pair_sum + self.pair_prefix[pairs_needed.min(self.pair_prefix.len() - 1)];
        let l = self.size as f64;
        (1.0 - self.gamma) / l * rel + 2.0 * self.gamma / (l * (l - 1.0)) * pair
    }

    /// No group may still be short more items than the open candidates (or
    /// the open slots) can provide.
    fn exposure_reachable(&self, node: &Node) -> bool {
        let slots = (self.size - node.chosen.len()) as u32;
        let mut shortfall = 0u32;
        for (g, &need) in self.need.iter().enumerate() {
            let have = u32::from(node.group_counts[g]);
            if have >= need {
                continue;
            }
            let missing = need - have;
            if self.avail[g][node.idx] < missing {
                return false;
            }
            shortfall += missing;
            if shortfall > slots {
                return false;
            }
        }
        true
    }

    fn caps_allow(&self, node: &Node, j: usize) -> bool {
        self.cand.types[j]
            .iter()
            .all(|&z| u32::from(node.type_counts[z]) < self.caps[z])
    }

    fn leaf_quality(&self, node: &Node) -> f64 {
        let l = self.size as f64;
        (1.0 - self.gamma) / l * node.rel_sum
            + 2.0 * self.gamma / (l * (l - 1.0)) * node.pair_sum
    }

    fn include_child(&self, node: &Node, j: usize) -> Node {
        let mut chosen = node.chosen.clone();
        chosen.push(j as u16);
        let mut group_counts = node.group_counts.clone();
        group_counts[self.cand.groups[j]] += 1;
        let mut type_counts = node.type_counts.clone();
        for &z in self.cand.types[j] {
            type_counts[z] += 1;
        }
        let cross: f64 = node.chosen.iter().map(|&c| self.cand.pair(c as usize, j)).sum();
        Node {
            idx: j + 1,
            chosen,
            group_counts,
            type_counts,
            rel_sum: node.rel_sum + self.cand.scores[j],
            pair_sum: node.pair_sum + cross,
        }
    }
}

/// Maximizes bundle quality over all valid, exposure-feasible size-L subsets
/// of the candidates.
///
/// Returns `Optimal` with the maximizer, `Infeasible` when no subset
/// satisfies the constraints, or `Feasible` with the best incumbent and a
/// gap bound when the node budget ran out. The budget only takes effect once
/// an incumbent exists, so a returned `Infeasible` is always a proof.
pub fn solve_exact(req: &SolveRequest<'_>) -> Result<SolveOutcome, SolveError> {
    let cand = Candidates::build(req)?;
    let search = Search::new(req, &cand);
    let budget = req.node_budget.unwrap_or(DEFAULT_NODE_BUDGET);
    let m = cand.len();
    let k = req.fairness.group_count();

    let mut best: Option<(f64, Vec<u16>)> = None;
    let mut nodes = 0u64;
    let mut stack = vec![Node {
        idx: 0,
        chosen: Vec::new(),
        group_counts: vec![0; k],
        type_counts: vec![0; cand.catalog.type_count()],
        rel_sum: 0.0,
        pair_sum: 0.0,
    }];

    while let Some(node) = stack.pop() {
        nodes += 1;
        if nodes > budget {
            if let Some((best_q, chosen)) = best.take() {
                let open_bound = stack
                    .iter()
                    .map(|n| search.bound(n))
                    .chain(core::iter::once(search.bound(&node)))
                    .fold(best_q, f64::max);
                return Ok(finish(
                    &cand,
                    &search,
                    SolveStatus::Feasible,
                    &chosen,
                    SolverStats { nodes, wall_time: None, gap: Some(open_bound - best_q) },
                ));
            }
            // No incumbent yet: keep searching so Infeasible stays a proof.
        }

        let c = node.chosen.len();
        if c == search.size {
            let meets_need = search
                .need
                .iter()
                .enumerate()
                .all(|(g, &need)| u32::from(node.group_counts[g]) >= need);
            if meets_need {
                let q = search.leaf_quality(&node);
                if best.as_ref().map_or(true, |(bq, _)| q > *bq) {
                    best = Some((q, node.chosen));
                }
            }
            continue;
        }
        if c + (m - node.idx) < search.size {
            continue;
        }
        if !search.exposure_reachable(&node) {
            continue;
        }
        if let Some((best_q, _)) = best {
            if search.bound(&node) <= best_q + BOUND_SLACK {
                continue;
            }
        }

        let j = node.idx;
        let include = if search.caps_allow(&node, j) {
            Some(search.include_child(&node, j))
        } else {
            None
        };
        // Exclude branch first on the stack, include on top: popped first.
        let mut exclude = node;
        exclude.idx = j + 1;
        stack.push(exclude);
        if let Some(child) = include {
            stack.push(child);
        }
    }

    match best {
        Some((_, chosen)) => Ok(finish(
            &cand,
            &search,
            SolveStatus::Optimal,
            &chosen,
            SolverStats { nodes, wall_time: None, gap: None },
        )),
        None => Ok(SolveOutcome::infeasible(nodes)),
    }
}

fn finish(
    cand: &Candidates<'_>,
    search: &Search<'_, '_>,
    status: SolveStatus,
    chosen: &[u16],
    stats: SolverStats,
) -> SolveOutcome {
    let l = search.size as f64;
    let mut bundle = Bundle::new();
    let mut rel_sum = 0.0;
    let mut pair_sum = 0.0;
    for (i, &a) in chosen.iter().enumerate() {
        bundle.push(cand.ids[a as usize]).expect("search never repeats a candidate");
        rel_sum += cand.scores[a as usize];
        for &b in &chosen[..i] {
            pair_sum += cand.pair(a as usize, b as usize);
        }
    }
    let relevance = rel_sum / l;
    let compatibility = 2.0 * pair_sum / (l * (l - 1.0));
    let gamma = search.gamma;
    SolveOutcome {
        status,
        bundle: Some(bundle),
        scores: Some(BundleScores {
            relevance,
            compatibility,
            quality: (1.0 - gamma) * relevance + gamma * compatibility,
        }),
        stats,
    }
}
