//! Quality-first weighted greedy.
//!
//! The bundle is seeded with the single most relevant candidate, then filled
//! by repeatedly taking the item that maximizes
//!
//! ```text
//! Q(B ∪ {j}) + lambda * (rho_k(j) - E_k(j))
//! ```
//!
//! where `E` is the per-group exposure accumulated over the served history
//! (all zeros at the start of a session, which puts maximal pressure toward
//! the target shares). The bonus term favors items from under-exposed groups;
//! `lambda = 0` degenerates to the pure quality greedy. Exposures stay frozen
//! at their pre-bundle values for the whole fill. The saturated-type sweep
//! runs after the seed and after every insertion.

use super::{Candidates, GreedyState, SolveError, SolveOutcome, SolveRequest};

/// Builds a bundle seed-then-fill. Pure function of the request; argmax ties
/// break toward the smaller item id.
pub fn solve_fairwg(req: &SolveRequest<'_>) -> Result<SolveOutcome, SolveError> {
    let cand = Candidates::build(req)?;
    let mut state = GreedyState::new(&cand, req.bundle);
    let rho = req.fairness.rho();
    let exposure = &req.history_exposure;

    let Some(seed) = state.best_active_by(None, |j| cand.scores[j]) else {
        return Ok(SolveOutcome::infeasible(0));
    };
    state.push(seed);

    while !state.is_full() {
        let pick = state.best_active_by(None, |j| {
            let k = cand.groups[j];
            state.quality_with(j) + req.lambda * (rho[k] - exposure[k])
        });
        match pick {
            Some(j) => state.push(j),
            None => return Ok(SolveOutcome::infeasible(0)),
        }
    }
    Ok(state.into_outcome(0))
}
