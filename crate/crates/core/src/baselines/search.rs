use std::time::Instant;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Px;
use crate::metrics::Thresholds;
use crate::predictor::{rates, Predictor, Rates};
use crate::scene::deployable_candidates;

/// Configurations sent to the predictor per batch.
const EVAL_CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Newly placed stations (pre-deployed ones are not repeated).
    pub placements: Vec<Px>,
    #[serde(rename = "CR")]
    pub cr: f64,
    #[serde(rename = "ER")]
    pub er: f64,
    pub evals: usize,
    pub wall_time_s: f64,
}

fn free_candidates(
    predictor: &dyn Predictor,
    pre_deployed: &[Px],
    stride: usize,
) -> Result<Vec<Px>> {
    let scene = predictor.scene();
    for &p in pre_deployed {
        scene.check_deployable(p)?;
    }
    let mut c = deployable_candidates(scene, stride)?;
    c.retain(|p| !pre_deployed.contains(p));
    Ok(c)
}

fn with_pre(pre_deployed: &[Px], new: &[Px]) -> Vec<Px> {
    pre_deployed.iter().chain(new).copied().collect()
}

/// Best of `trials` uniform draws of `n_bs` distinct free candidates.
/// Ties keep the earliest trial.
pub fn random_search(
    predictor: &dyn Predictor,
    pre_deployed: &[Px],
    n_bs: usize,
    stride: usize,
    trials: usize,
    thresholds: &Thresholds,
    rng: &mut impl Rng,
) -> Result<SearchResult> {
    if trials == 0 || n_bs == 0 {
        return Err(Error::InvalidConfig(
            "random search needs trials >= 1 and n_bs >= 1".into(),
        ));
    }
    let start = Instant::now();
    let cands = free_candidates(predictor, pre_deployed, stride)?;
    if cands.len() < n_bs {
        return Err(Error::InfeasibleScene(format!(
            "{} free candidates for {n_bs} stations",
            cands.len()
        )));
    }
    let mut best: Option<(Vec<Px>, Rates)> = None;
    for _ in 0..trials {
        let pick: Vec<Px> = index::sample(rng, cands.len(), n_bs)
            .into_iter()
            .map(|i| cands[i])
            .collect();
        let r = rates(
            &predictor.predict(&with_pre(pre_deployed, &pick))?,
            thresholds,
        )?;
        if best.as_ref().is_none_or(|(_, b)| r.cr > b.cr) {
            best = Some((pick, r));
        }
    }
    let (placements, r) = best.expect("trials >= 1");
    Ok(SearchResult {
        placements,
        cr: r.cr,
        er: r.er,
        evals: trials,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Smallest lattice stride whose candidate count fits under `limit`.
pub fn stride_hint(predictor: &dyn Predictor, limit: usize) -> Result<usize> {
    let n = predictor.scene().grid_size();
    for s in 1..=n {
        if deployable_candidates(predictor.scene(), s)?.len() <= limit {
            return Ok(s);
        }
    }
    Ok(n)
}

/// Exhaustive search for 1 or 2 new stations over the stride lattice.
/// Configurations with ER below the gate are excluded; the maximum CR wins
/// with ties broken by the lowest (row-major) candidate index tuple.
pub fn brute_force(
    predictor: &dyn Predictor,
    pre_deployed: &[Px],
    n_bs: usize,
    stride: usize,
    candidate_limit: usize,
    thresholds: &Thresholds,
) -> Result<SearchResult> {
    if !(1..=2).contains(&n_bs) {
        return Err(Error::Unsupported(format!(
            "brute force supports 1 or 2 stations, got {n_bs}"
        )));
    }
    let start = Instant::now();
    let cands = free_candidates(predictor, pre_deployed, stride)?;
    if cands.len() > candidate_limit {
        return Err(Error::CandidateLimit {
            count: cands.len(),
            limit: candidate_limit,
            stride_hint: stride_hint(predictor, candidate_limit)?,
        });
    }
    let combos: Vec<Vec<usize>> = if n_bs == 1 {
        (0..cands.len()).map(|a| vec![a]).collect()
    } else {
        (0..cands.len())
            .flat_map(|a| (a + 1..cands.len()).map(move |b| vec![a, b]))
            .collect()
    };
    if combos.is_empty() {
        return Err(Error::InfeasibleScene(format!(
            "{} free candidates for {n_bs} stations",
            cands.len()
        )));
    }
    let mut best: Option<(usize, Rates)> = None;
    for (chunk_no, chunk) in combos.chunks(EVAL_CHUNK).enumerate() {
        let configs: Vec<Vec<Px>> = chunk
            .iter()
            .map(|c| {
                with_pre(
                    pre_deployed,
                    &c.iter().map(|&i| cands[i]).collect::<Vec<_>>(),
                )
            })
            .collect();
        for (k, maps) in predictor.predict_many(&configs)?.iter().enumerate() {
            let r = rates(maps, thresholds)?;
            if r.er < thresholds.lambda_er {
                continue;
            }
            if best.as_ref().is_none_or(|(_, b)| r.cr > b.cr) {
                best = Some((chunk_no * EVAL_CHUNK + k, r));
            }
        }
    }
    let (idx, r) = best.ok_or_else(|| {
        Error::InfeasibleScene(format!(
            "no configuration of {n_bs} stations meets ER >= {}",
            thresholds.lambda_er
        ))
    })?;
    Ok(SearchResult {
        placements: combos[idx].iter().map(|&i| cands[i]).collect(),
        cr: r.cr,
        er: r.er,
        evals: combos.len(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::predictor::OraclePredictor;
    use crate::scene::{SceneGenerator, SceneSpec};

    #[test]
    fn centre_wins_on_open_symmetric_scene() {
        let scene = SceneSpec::open(32, 400.0).unwrap();
        let pred = OraclePredictor::new(&scene);
        // Coverage disc slightly wider than half the side, so the borders clip it.
        let t = Thresholds {
            phi_dbm: -88.0,
            ..Default::default()
        };
        let r = brute_force(&pred, &[], 1, 1, 3000, &t).unwrap();
        assert_eq!(r.evals, 1024);
        assert_eq!(r.placements[0], (15, 15));
    }

    #[test]
    fn pair_count_and_limit() {
        let scene = SceneSpec::open(64, 800.0).unwrap();
        let pred = OraclePredictor::new(&scene);
        let err = brute_force(&pred, &[], 1, 1, 3000, &Thresholds::default()).unwrap_err();
        match err {
            Error::CandidateLimit {
                count,
                limit,
                stride_hint,
            } => {
                assert_eq!((count, limit, stride_hint), (4096, 3000, 2));
            }
            e => panic!("{e}"),
        }
        let small = SceneSpec::open(16, 800.0).unwrap();
        let pred = OraclePredictor::new(&small);
        let r = brute_force(&pred, &[], 2, 1, 3000, &Thresholds::default()).unwrap();
        assert_eq!(r.evals, 256 * 255 / 2);
        assert!(brute_force(&pred, &[], 3, 4, 3000, &Thresholds::default()).is_err());
    }

    #[test]
    fn random_never_beats_brute_force_and_is_reproducible() {
        let scene = SceneGenerator::for_grid(32).generate(4).unwrap();
        let pred = OraclePredictor::new(&scene);
        let t = Thresholds::default();
        let bf = brute_force(&pred, &[], 1, 2, 3000, &t).unwrap();
        for seed in 0..10 {
            let a = random_search(
                &pred,
                &[],
                1,
                2,
                1,
                &t,
                &mut ChaCha8Rng::seed_from_u64(seed),
            )
            .unwrap();
            let b = random_search(
                &pred,
                &[],
                1,
                2,
                1,
                &t,
                &mut ChaCha8Rng::seed_from_u64(seed),
            )
            .unwrap();
            assert_eq!(a.placements, b.placements);
            assert!(a.cr <= bf.cr || a.er < t.lambda_er);
        }
    }

    #[test]
    fn pre_deployed_are_skipped() {
        let scene = SceneSpec::open(16, 800.0).unwrap();
        let pred = OraclePredictor::new(&scene);
        let t = Thresholds {
            phi_dbm: -70.0,
            ..Default::default()
        };
        let first = brute_force(&pred, &[], 1, 1, 3000, &t).unwrap();
        let second = brute_force(&pred, &first.placements, 1, 1, 3000, &t).unwrap();
        assert_ne!(second.placements, first.placements);
        assert_eq!(second.evals, 255);
        assert!(second.cr >= first.cr);
    }
}
