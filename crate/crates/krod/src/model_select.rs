//! Multi-objective twin-model selection over a grid of candidate ranks.
//!
//! Each candidate rank is scored by two objectives on the flattened
//! space-time fields: the reconstruction error `E = ||u - u_hat||_F` and the
//! normalized similarity `C = <u, u_hat>^2 / (||u||^2 ||u_hat||^2)` (squared
//! cosine). The non-dominated subset under `(min E, max C)` is reported as
//! the Pareto front.
//!
//! For orthogonal-projection reconstructions the two objectives are exactly
//! dependent (`C = 1 - E^2/||u||^2`), so the dominance front degenerates to
//! the single lowest-error candidate and carries no complexity information.
//! The twin therefore gets chosen by a knee rule on the accuracy-complexity
//! curve instead: normalize the rank linearly over the configured sweep range
//! and `ln E` over the scored candidates, and take the candidate closest to
//! the ideal corner (smallest rank, smallest error), ties to the smaller
//! rank. The dominance front is still computed and reported alongside.

use rayon::prelude::*;

use nalgebra::DMatrix;

use crate::decomposition::{krod_offline, reconstruct, KoopmanTriplet};
use crate::error::{Error, Result};
use crate::rng::child_seed;

/// Objective values for one candidate rank.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScore {
    pub k: usize,
    /// Objective 1: Frobenius reconstruction error over all space-time points.
    pub error: f64,
    /// Objective 2: squared cosine similarity of the flattened fields, in [0, 1].
    pub similarity: f64,
    /// Index of the scored triplet in the sweep's triplet list.
    pub triplet_index: usize,
}

/// Outcome of scoring one rank in a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum RankOutcome {
    Scored(CandidateScore),
    /// The rank was rejected (sigma guard or sketch deficiency); the message
    /// preserves the cause for reporting.
    Infeasible { k: usize, reason: String },
}

/// Scores, front, and choice for a completed sweep.
#[derive(Debug, Clone)]
pub struct SelectionResult {
    /// Non-dominated candidates under `(min E, max C)`, ordered by k.
    pub front: Vec<CandidateScore>,
    /// The selected twin candidate.
    pub chosen: CandidateScore,
    /// Every scored candidate, ordered by k.
    pub all_scores: Vec<CandidateScore>,
    /// Ranks that could not be scored, with reasons.
    pub infeasible: Vec<(usize, String)>,
}

/// Computes both objectives for a reconstruction against the truth matrix.
pub fn score_candidate(truth: &DMatrix<f64>, triplet: &KoopmanTriplet) -> Result<CandidateScore> {
    let recon = reconstruct(triplet);
    if truth.shape() != recon.shape() {
        return Err(Error::ShapeMismatch(format!(
            "truth is {}x{} but the reconstruction is {}x{}",
            truth.nrows(),
            truth.ncols(),
            recon.nrows(),
            recon.ncols()
        )));
    }
    let truth_sq = truth.iter().map(|v| v * v).sum::<f64>();
    let recon_sq = recon.iter().map(|v| v * v).sum::<f64>();
    if truth_sq == 0.0 {
        return Err(Error::ZeroNormField("truth"));
    }
    if recon_sq == 0.0 {
        return Err(Error::ZeroNormField("reconstruction"));
    }
    let dot = truth.iter().zip(recon.iter()).map(|(a, b)| a * b).sum::<f64>();
    let error = (truth - &recon).norm();
    let similarity = dot * dot / (truth_sq * recon_sq);
    Ok(CandidateScore { k: triplet.rank, error, similarity, triplet_index: 0 })
}

fn dominates(a: &CandidateScore, b: &CandidateScore) -> bool {
    a.error <= b.error
        && a.similarity >= b.similarity
        && (a.error < b.error || a.similarity > b.similarity)
}

/// Returns the non-dominated subset, ordered by k ascending.
pub fn pareto_front(scores: &[CandidateScore]) -> Result<Vec<CandidateScore>> {
    if scores.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let mut front: Vec<CandidateScore> = scores
        .iter()
        .filter(|c| !scores.iter().any(|other| dominates(other, c)))
        .cloned()
        .collect();
    front.sort_by_key(|c| c.k);
    Ok(front)
}

/// Knee-point selection over the accuracy-complexity curve.
///
/// `k_range` is the configured sweep range used to normalize the rank axis;
/// errors are compared on a log scale (values below 1e-300 are treated as
/// ideal). Ties go to the smaller rank.
pub fn select_twin(scores: &[CandidateScore], k_range: (usize, usize)) -> Result<CandidateScore> {
    if scores.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let (k_lo, k_hi) = k_range;
    let k_span = (k_hi.saturating_sub(k_lo)).max(1) as f64;

    let log_errors: Vec<f64> = scores.iter().map(|c| c.error.max(1e-300).ln()).collect();
    let e_min = log_errors.iter().cloned().fold(f64::INFINITY, f64::min);
    let e_max = log_errors.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e_span = (e_max - e_min).max(f64::MIN_POSITIVE);

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by_key(|&i| scores[i].k);

    let mut best: Option<(f64, usize)> = None;
    for i in order {
        let k_n = (scores[i].k as f64 - k_lo as f64) / k_span;
        let e_n = (log_errors[i] - e_min) / e_span;
        let dist = (k_n * k_n + e_n * e_n).sqrt();
        if best.map_or(true, |(d, _)| dist < d) {
            best = Some((dist, i));
        }
    }
    Ok(scores[best.expect("nonempty scores").1].clone())
}

/// Runs the offline decomposition for every rank in the grid, scores the
/// feasible candidates against `truth`, and selects the twin.
///
/// Child seeds are derived per rank from the master seed, so candidates are
/// independent and the sweep is reproducible. Returns the triplets alongside
/// the selection so the chosen one can be looked up by `triplet_index`.
pub fn sweep_ranks(
    v0: &DMatrix<f64>,
    v1: &DMatrix<f64>,
    truth: &DMatrix<f64>,
    rank_grid: &[usize],
    master_seed: u64,
) -> Result<(Vec<KoopmanTriplet>, SelectionResult)> {
    if rank_grid.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let outcomes: Vec<(usize, std::result::Result<KoopmanTriplet, String>)> = rank_grid
        .par_iter()
        .map(|&k| {
            let seed = child_seed(master_seed, "krod-offline", k as u64);
            match krod_offline(v0, v1, k, seed) {
                Ok(t) => (k, Ok(t)),
                Err(e) => (k, Err(e.to_string())),
            }
        })
        .collect();

    let mut triplets = Vec::new();
    let mut all_scores = Vec::new();
    let mut infeasible = Vec::new();
    for (k, outcome) in outcomes {
        match outcome {
            Ok(triplet) => {
                let mut score = score_candidate(truth, &triplet)?;
                score.triplet_index = triplets.len();
                triplets.push(triplet);
                all_scores.push(score);
            }
            Err(reason) => infeasible.push((k, reason)),
        }
    }
    if all_scores.is_empty() {
        return Err(Error::EmptyCandidates);
    }

    let front = pareto_front(&all_scores)?;
    let k_range = (*rank_grid.first().unwrap(), *rank_grid.last().unwrap());
    let chosen = select_twin(&all_scores, k_range)?;
    Ok((triplets, SelectionResult { front, chosen, all_scores, infeasible }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::KoopmanTriplet;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use proptest::prelude::*;

    fn score(k: usize, error: f64, similarity: f64) -> CandidateScore {
        CandidateScore { k, error, similarity, triplet_index: 0 }
    }

    /// Triplet whose reconstruction is exactly `recon` (identity modes).
    fn triplet_for(recon: &DMatrix<f64>) -> KoopmanTriplet {
        let n = recon.nrows();
        KoopmanTriplet {
            modes: DMatrix::identity(n, n),
            amplitudes: recon.clone(),
            rank: n,
            eigvals: DVector::zeros(n),
            seed: 0,
        }
    }

    #[test]
    fn perfect_model_scores_zero_error_unit_similarity() {
        let truth = DMatrix::from_fn(4, 6, |r, c| (r + 2 * c) as f64 + 0.5);
        let s = score_candidate(&truth, &triplet_for(&truth)).unwrap();
        assert_eq!(s.error, 0.0);
        assert_abs_diff_eq!(s.similarity, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn scaling_preserves_similarity_and_sets_the_error_norm() {
        let truth = DMatrix::from_fn(5, 5, |r, c| ((r * c) as f64).sin() + 2.0);
        let doubled = &truth * 2.0;
        let s = score_candidate(&truth, &triplet_for(&doubled)).unwrap();
        assert_abs_diff_eq!(s.error, truth.norm(), epsilon = 1e-12 * truth.norm());
        assert_abs_diff_eq!(s.similarity, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn orthogonal_fields_have_zero_similarity() {
        let mut truth = DMatrix::zeros(2, 2);
        truth[(0, 0)] = 1.0;
        let mut recon = DMatrix::zeros(2, 2);
        recon[(1, 1)] = 1.0;
        let s = score_candidate(&truth, &triplet_for(&recon)).unwrap();
        assert_eq!(s.similarity, 0.0);
    }

    #[test]
    fn zero_norm_fields_are_rejected() {
        let truth = DMatrix::zeros(3, 3);
        let recon = DMatrix::from_element(3, 3, 1.0);
        assert!(matches!(
            score_candidate(&truth, &triplet_for(&recon)),
            Err(Error::ZeroNormField("truth"))
        ));
        assert!(matches!(
            score_candidate(&recon, &triplet_for(&truth)),
            Err(Error::ZeroNormField("reconstruction"))
        ));
    }

    #[test]
    fn front_filters_the_dominated_candidate() {
        let scores =
            vec![score(10, 0.10, 0.90), score(20, 0.20, 0.95), score(30, 0.15, 0.85)];
        let front = pareto_front(&scores).unwrap();
        assert_eq!(front.len(), 2);
        assert_eq!(front[0].error, 0.10);
        assert_eq!(front[1].error, 0.20);
    }

    #[test]
    fn single_candidate_is_its_own_front() {
        let scores = vec![score(5, 0.3, 0.8)];
        assert_eq!(pareto_front(&scores).unwrap(), scores);
    }

    #[test]
    fn identical_scores_are_both_retained() {
        let scores = vec![score(5, 0.3, 0.8), score(10, 0.3, 0.8)];
        assert_eq!(pareto_front(&scores).unwrap().len(), 2);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(matches!(pareto_front(&[]), Err(Error::EmptyCandidates)));
        assert!(matches!(select_twin(&[], (5, 100)), Err(Error::EmptyCandidates)));
    }

    #[test]
    fn knee_returns_a_singleton_unchanged() {
        let scores = vec![score(40, 0.7, 0.2)];
        assert_eq!(select_twin(&scores, (5, 100)).unwrap().k, 40);
    }

    #[test]
    fn knee_prefers_the_attained_ideal() {
        let scores = vec![score(10, 0.0, 1.0), score(40, 0.5, 1.0)];
        assert_eq!(select_twin(&scores, (10, 40)).unwrap().k, 10);
    }

    #[test]
    fn knee_is_deterministic() {
        let scores: Vec<CandidateScore> =
            (1..=10).map(|i| score(5 * i, (-(i as f64)).exp(), 1.0)).collect();
        let a = select_twin(&scores, (5, 50)).unwrap();
        let b = select_twin(&scores, (5, 50)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn knee_balances_rank_against_log_error() {
        // Error decays a decade per step then floors; the knee should sit
        // where improvement stalls, not at the largest rank.
        let scores = vec![
            score(5, 1e0, 0.9),
            score(10, 1e-4, 0.99),
            score(15, 1e-8, 0.999),
            score(20, 0.9e-8, 0.9999),
            score(25, 0.8e-8, 0.99999),
        ];
        let chosen = select_twin(&scores, (5, 25)).unwrap();
        assert_eq!(chosen.k, 15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        // Soundness/completeness of the front against the dominance definition.
        #[test]
        fn front_is_exactly_the_nondominated_subset(
            raw in prop::collection::vec((1usize..50, 0.0f64..2.0, 0.0f64..1.0), 1..24)
        ) {
            let scores: Vec<CandidateScore> =
                raw.iter().map(|&(k, e, c)| score(k, e, c)).collect();
            let front = pareto_front(&scores).unwrap();
            for member in &front {
                prop_assert!(!scores.iter().any(|o| dominates(o, member)));
            }
            for candidate in &scores {
                let excluded = !front.iter().any(|m| m == candidate);
                if excluded {
                    prop_assert!(scores.iter().any(|o| dominates(o, candidate)));
                }
            }
        }

        // Positive rescaling of the reconstruction leaves C unchanged.
        #[test]
        fn similarity_is_scale_invariant(scale in 1e-3f64..1e3) {
            let truth = DMatrix::from_fn(4, 5, |r, c| ((r + c) as f64 * 0.37).cos() + 1.5);
            let recon = DMatrix::from_fn(4, 5, |r, c| ((r * c) as f64 * 0.11).sin() + 1.0);
            let base = score_candidate(&truth, &triplet_for(&recon)).unwrap();
            let scaled = score_candidate(&truth, &triplet_for(&(&recon * scale))).unwrap();
            prop_assert!((base.similarity - scaled.similarity).abs() <= 1e-12);
        }
    }
}
