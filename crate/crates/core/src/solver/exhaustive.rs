//! Exhaustive reference solver: enumerates every size-L candidate subset,
//! filters by validity and the stepwise exposure constraint, and returns the
//! maximum-quality subset. Quality and feasibility are computed directly from
//! the definitions, independent of the branch-and-bound machinery, so this
//! doubles as the test oracle for [`super::solve_exact`].

use alloc::vec;
use alloc::vec::Vec;

use super::{
    BundleScores, Candidates, SolveError, SolveOutcome, SolveRequest, SolveStatus, SolverStats,
};
use crate::fairness::FEASIBILITY_EPS;
use crate::model::{Bundle, ItemId};

/// Refuse instances with more than this many subsets.
const MAX_SUBSETS: u64 = 1_000_000;

/// Enumerates all `C(M, L)` subsets. Ties on quality break toward the
/// lexicographically smallest sorted id sequence.
pub fn brute_force_oracle(req: &SolveRequest<'_>) -> Result<SolveOutcome, SolveError> {
    let cand = Candidates::build(req)?;
    let m = cand.len();
    let l = req.bundle.size() as usize;
    if binomial(m as u64, l as u64) > MAX_SUBSETS {
        return Err(SolveError::InstanceTooLarge { subsets_log10: 6 });
    }

    let k = req.fairness.group_count();
    let caps: Vec<u32> = (0..cand.catalog.type_count()).map(|z| req.bundle.cap(z)).collect();
    let l_f = l as f64;
    // Exposure requirement per group: count - L*rho*(1-eps) + delta >= 0.
    let required: Vec<f64> = req
        .fairness
        .rho()
        .iter()
        .zip(&req.history_deltas)
        .map(|(&rho_k, &delta_k)| l_f * rho_k * (1.0 - req.eps_t) - delta_k)
        .collect();

    let mut best: Option<(f64, Vec<ItemId>, Vec<usize>)> = None;
    let mut subset: Vec<usize> = (0..l).collect();
    let mut checked = 0u64;

    loop {
        checked += 1;
        if let Some(q) = evaluate(&cand, &subset, &caps, &required, req.bundle.gamma(), k) {
            let mut ids: Vec<ItemId> = subset.iter().map(|&j| cand.ids[j]).collect();
            ids.sort_unstable();
            let better = match &best {
                None => true,
                Some((bq, bids, _)) => q > *bq || (q == *bq && ids < *bids),
            };
            if better {
                best = Some((q, ids, subset.clone()));
            }
        }
        if !advance(&mut subset, m) {
            break;
        }
    }

    match best {
        None => Ok(SolveOutcome::infeasible(checked)),
        Some((_, _, subset)) => {
            let mut bundle = Bundle::new();
            let mut rel_sum = 0.0;
            let mut pair_sum = 0.0;
            for (i, &a) in subset.iter().enumerate() {
                bundle.push(cand.ids[a]).expect("subset members are distinct");
                rel_sum += cand.scores[a];
                for &b in &subset[..i] {
                    pair_sum += cand.pair(a, b);
                }
            }
            let relevance = rel_sum / l_f;
            let compatibility = 2.0 * pair_sum / (l_f * (l_f - 1.0));
            let gamma = req.bundle.gamma();
            Ok(SolveOutcome {
                status: SolveStatus::Optimal,
                bundle: Some(bundle),
                scores: Some(BundleScores {
                    relevance,
                    compatibility,
                    quality: (1.0 - gamma) * relevance + gamma * compatibility,
                }),
                stats: SolverStats { nodes: checked, wall_time: None, gap: None },
            })
        }
    }
}

/// Quality of the subset if it passes type caps and the exposure requirement.
fn evaluate(
    cand: &Candidates<'_>,
    subset: &[usize],
    caps: &[u32],
    required: &[f64],
    gamma: f64,
    group_count: usize,
) -> Option<f64> {
    let mut type_counts = vec![0u32; caps.len()];
    let mut group_counts = vec![0u32; group_count];
    for &j in subset {
        group_counts[cand.groups[j]] += 1;
        for &z in cand.types[j] {
            type_counts[z] += 1;
            if type_counts[z] > caps[z] {
                return None;
            }
        }
    }
    for (g, &req_g) in required.iter().enumerate() {
        if f64::from(group_counts[g]) - req_g < -FEASIBILITY_EPS {
            return None;
        }
    }
    let l = subset.len() as f64;
    let rel: f64 = subset.iter().map(|&j| cand.scores[j]).sum();
    let mut pair = 0.0;
    for (i, &a) in subset.iter().enumerate() {
        for &b in &subset[..i] {
            pair += cand.pair(a, b);
        }
    }
    Some((1.0 - gamma) * rel / l + gamma * 2.0 * pair / (l * (l - 1.0)))
}

/// Next combination in lexicographic index order; false when exhausted.
fn advance(subset: &mut [usize], m: usize) -> bool {
    let l = subset.len();
    let mut i = l;
    while i > 0 {
        i -= 1;
        if subset[i] < m - l + i {
            subset[i] += 1;
            for j in (i + 1)..l {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result: u64 = 1;
    for i in 0..k {
        result = result.saturating_mul(n - i) / (i + 1);
        if result > 100 * MAX_SUBSETS {
            return result;
        }
    }
    result
}
