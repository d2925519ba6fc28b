//! Fairness-first randomized greedy.
//!
//! Each slot first draws `z ~ U[0,1)`. With probability `explore` (that is,
//! `z <= explore`) the step relaxes to a plain quality greedy over all active
//! items; otherwise it samples a producer group from the target exposure
//! shares and greedily picks the best item inside that group. Sampling groups
//! from the target shares meets the exposure targets in expectation. If the
//! sampled group's active set is empty, the step resamples among groups that
//! still have active items, with the target shares restricted and
//! renormalized; when no active items remain anywhere before the bundle is
//! full, the solve is infeasible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    sample_weighted, Candidates, GreedyState, SolveError, SolveOutcome, SolveRequest,
};

/// Builds a bundle group-first. Pure function of `(request, seed)`: the seed
/// fixes every draw, and argmax ties break toward the smaller item id.
pub fn solve_f3r(req: &SolveRequest<'_>, seed: u64) -> Result<SolveOutcome, SolveError> {
    let cand = Candidates::build(req)?;
    let mut state = GreedyState::new(&cand, req.bundle);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = req.fairness.rho();

    while !state.is_full() {
        if !state.any_active() {
            return Ok(SolveOutcome::infeasible(0));
        }
        let z: f64 = rng.random();
        let pool = if z > req.explore {
            let draw: f64 = rng.random();
            let k = sample_weighted(rho, |_| true, draw).expect("target shares sum to 1");
            if state.group_has_active(k) {
                Some(k)
            } else {
                let redraw: f64 = rng.random();
                match sample_weighted(rho, |g| state.group_has_active(g), redraw) {
                    Some(k) => Some(k),
                    None => return Ok(SolveOutcome::infeasible(0)),
                }
            }
        } else {
            None
        };
        let pick = state
            .best_active_by(pool, |j| state.quality_with(j))
            .expect("pool checked non-empty");
        state.push(pick);
    }
    Ok(state.into_outcome(0))
}
