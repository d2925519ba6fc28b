//! Seeded uniform baseline: fills the bundle by drawing active items without
//! replacement, honoring the saturated-type sweep and nothing else.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Candidates, GreedyState, SolveError, SolveOutcome, SolveRequest};

pub fn solve_random(req: &SolveRequest<'_>, seed: u64) -> Result<SolveOutcome, SolveError> {
    let cand = Candidates::build(req)?;
    let mut state = GreedyState::new(&cand, req.bundle);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    while !state.is_full() {
        let active: alloc::vec::Vec<usize> =
            (0..cand.len()).filter(|&j| state.active[j]).collect();
        if active.is_empty() {
            return Ok(SolveOutcome::infeasible(0));
        }
        let pick = active[rng.random_range(0..active.len())];
        state.push(pick);
    }
    Ok(state.into_outcome(0))
}
