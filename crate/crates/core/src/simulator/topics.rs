use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::{SimError, SimulatorConfig};
use crate::divergence::{symmetric_kl, SymmetricKl};

/// A probability distribution over the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Topic {
    pub topic_id: usize,
    pub probs: Vec<f64>,
}

impl Topic {
    /// Term ids of the `n` most probable terms, ties broken by ascending id.
    pub fn top_terms(&self, n: usize) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.probs.len()).collect();
        ids.sort_by(|&a, &b| self.probs[b].total_cmp(&self.probs[a]).then(a.cmp(&b)));
        ids.truncate(n);
        ids
    }
}

/// `n_topics` independent symmetric Dirichlet(alpha) draws.
///
/// Gamma variates are drawn in log space (`ln Gamma(a+1) + ln(U)/a`) so that
/// very small concentrations do not collapse whole rows to zero before
/// normalisation.
pub fn sample_topics<R: Rng + ?Sized>(
    config: &SimulatorConfig,
    rng: &mut R,
) -> Result<Vec<Topic>, SimError> {
    config.validate()?;
    let alpha = config.alpha;
    let gamma =
        Gamma::new(alpha + 1.0, 1.0).map_err(|e| SimError::InvalidConfig(format!("alpha: {e}")))?;
    let topics = (0..config.n_topics)
        .map(|topic_id| {
            let logs: Vec<f64> = (0..config.vocab_size)
                .map(|_| {
                    let g: f64 = gamma.sample(rng);
                    let u: f64 = rng.random::<f64>();
                    // `random` is in [0, 1); keep ln finite.
                    g.ln() + u.max(f64::MIN_POSITIVE).ln() / alpha
                })
                .collect();
            let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut probs: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
            let total: f64 = probs.iter().sum();
            probs.iter_mut().for_each(|p| *p /= total);
            Topic { topic_id, probs }
        })
        .collect();
    Ok(topics)
}

/// Index among `candidates` with the smallest mean symmetric KL to `target`.
pub fn nearest_topic(target: &Topic, candidates: &[Topic]) -> (usize, SymmetricKl) {
    candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            (
                i,
                symmetric_kl(&target.probs, &c.probs).expect("same vocabulary"),
            )
        })
        .min_by(|a, b| a.1.mean().total_cmp(&b.1.mean()).then(a.0.cmp(&b.0)))
        .expect("at least one candidate")
}

/// Relative tolerance the bisection aims for (the contract is 5%).
pub const CALIBRATION_TOLERANCE: f64 = 1e-3;
pub const BISECTION_MAX_ITERS: usize = 60;

#[derive(Debug, Clone)]
pub struct Calibration {
    pub topics: Vec<Topic>,
    /// Weight of the fresh draw in the novel topic.
    pub lambda: f64,
    pub nearest: usize,
    pub achieved: SymmetricKl,
    pub iterations: usize,
}

fn mixture(fresh: &[f64], base: &[f64], lambda: f64) -> Vec<f64> {
    fresh
        .iter()
        .zip(base)
        .map(|(f, b)| lambda * f + (1.0 - lambda) * b)
        .collect()
}

/// Replaces the last topic by `lambda * fresh + (1 - lambda) * nearest` with
/// `lambda` bisected until the mean symmetric KL to the nearest normal topic
/// hits `target_kl`. The KL is non-decreasing in `lambda` (convexity of KL in
/// either argument, zero at `lambda = 0`), which is what makes bisection valid.
pub fn calibrate_divergence(topics: &[Topic], target_kl: f64) -> Result<Calibration, SimError> {
    if topics.len() < 2 {
        return Err(SimError::InvalidConfig(
            "calibration needs at least two topics".into(),
        ));
    }
    if !(target_kl > 0.0 && target_kl.is_finite()) {
        return Err(SimError::InvalidConfig("target_kl must be positive".into()));
    }
    let (normals, novel) = topics.split_at(topics.len() - 1);
    let fresh = &novel[0];
    let (nearest, at_one) = nearest_topic(fresh, normals);
    if at_one.mean() < target_kl {
        return Err(SimError::Unreachable {
            target: target_kl,
            max: at_one.mean(),
        });
    }
    let base = &normals[nearest].probs;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut lambda = 1.0;
    let mut achieved = at_one;
    let mut iterations = 0;
    for _ in 0..BISECTION_MAX_ITERS {
        iterations += 1;
        lambda = 0.5 * (lo + hi);
        achieved = symmetric_kl(&mixture(&fresh.probs, base, lambda), base).expect("same length");
        let gap = achieved.mean() - target_kl;
        if gap.abs() <= CALIBRATION_TOLERANCE * target_kl {
            break;
        }
        if gap < 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
    }
    let mut out = topics.to_vec();
    out.last_mut().expect("non-empty").probs = mixture(&fresh.probs, base, lambda);
    Ok(Calibration {
        topics: out,
        lambda,
        nearest,
        achieved,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config(vocab: usize, alpha: f64) -> SimulatorConfig {
        SimulatorConfig {
            vocab_size: vocab,
            alpha,
            ..Default::default()
        }
    }

    #[test]
    fn topics_are_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for t in sample_topics(&config(500, 0.01), &mut rng).unwrap() {
            assert!(t.probs.iter().all(|&p| p >= 0.0));
            assert!((t.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn huge_alpha_is_near_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = 1000;
        for t in sample_topics(&config(v, 1e6), &mut rng).unwrap() {
            let max = t.probs.iter().copied().fold(0.0, f64::max);
            assert!(max < 2.0 / v as f64, "{max}");
        }
    }

    #[test]
    fn sparse_alpha_concentrates_mass() {
        // Monte-Carlo over 10 seeds: top-100 terms carry most of the mass.
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cfg = SimulatorConfig {
                n_topics: 2,
                ..config(10_000, 0.01)
            };
            for t in sample_topics(&cfg, &mut rng).unwrap() {
                let mass: f64 = t.top_terms(100).iter().map(|&i| t.probs[i]).sum();
                assert!(mass > 0.5, "seed {seed}: {mass}");
            }
        }
    }

    #[test]
    fn same_seed_same_topics() {
        let cfg = config(300, 0.05);
        let a = sample_topics(&cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_topics(&cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_non_positive_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_topics(&config(10, 0.0), &mut rng),
            Err(SimError::InvalidConfig(_))
        ));
    }

    #[test]
    fn lambda_zero_endpoint_reproduces_nearest() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let topics = sample_topics(&config(400, 0.01), &mut rng).unwrap();
        let base = &topics[0].probs;
        let m = mixture(&topics[9].probs, base, 0.0);
        assert_eq!(&m, base);
        assert!(symmetric_kl(&m, base).unwrap().mean() < 1e-9);
    }

    #[test]
    fn symmetric_kl_non_decreasing_in_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let topics = sample_topics(&config(2000, 0.01), &mut rng).unwrap();
        let (near, _) = nearest_topic(&topics[9], &topics[..9]);
        let base = &topics[near].probs;
        let mut last = -1.0;
        for i in 0..=10 {
            let lambda = i as f64 / 10.0;
            let kl = symmetric_kl(&mixture(&topics[9].probs, base, lambda), base)
                .unwrap()
                .mean();
            assert!(kl >= last, "lambda {lambda}: {kl} < {last}");
            last = kl;
        }
    }

    #[test]
    fn calibration_hits_target_and_keeps_normals() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let topics = sample_topics(&SimulatorConfig::default(), &mut rng).unwrap();
        let cal = calibrate_divergence(&topics, 0.1).unwrap();
        let novel = &cal.topics[9];
        let measured = symmetric_kl(&novel.probs, &cal.topics[cal.nearest].probs)
            .unwrap()
            .mean();
        assert!((0.095..=0.105).contains(&measured), "{measured}");
        assert_eq!(&cal.topics[..9], &topics[..9]);
        assert!((novel.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unreachable_target_reports_maximum() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let topics = sample_topics(&config(50, 1e4), &mut rng).unwrap();
        match calibrate_divergence(&topics, 5.0) {
            Err(SimError::Unreachable { max, .. }) => assert!(max < 5.0),
            other => panic!("expected unreachable, got {other:?}"),
        }
    }
}
